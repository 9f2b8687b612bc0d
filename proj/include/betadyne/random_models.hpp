#pragma once

// Seeded random instances for property checks: Hermitian matrices, unitaries,
// density matrices, and whole Lindblad models. Shared by the validation
// command and the test suite.

#include "betadyne/core.hpp"
#include "betadyne/model.hpp"

#include <random>
#include <vector>

namespace betadyne {

inline Complex random_complex(std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  return Complex(n(rng), n(rng));
}

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index dim, double scale = 1.0) {
  Matrix m(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i)
    for (Eigen::Index j = 0; j < dim; ++j) m(i, j) = random_complex(rng, scale);
  return m;
}

inline Matrix random_hermitian(std::mt19937_64& rng, Eigen::Index dim, double scale = 1.0) {
  Matrix m = random_matrix(rng, dim, scale);
  return 0.5 * (m + m.adjoint().eval());
}

inline Matrix random_unitary(std::mt19937_64& rng, Eigen::Index dim) {
  Eigen::HouseholderQR<Matrix> qr(random_matrix(rng, dim));
  Matrix q = qr.householderQ();
  // fix the phase freedom so the result is reproducible across Eigen versions
  Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index k = 0; k < dim; ++k) {
    const Complex rkk = r(k, k);
    if (std::abs(rkk) > 0.0) q.col(k) *= rkk / std::abs(rkk);
  }
  return q;
}

inline Matrix random_density(std::mt19937_64& rng, Eigen::Index dim) {
  Matrix g = random_matrix(rng, dim);
  Matrix rho = g * g.adjoint();
  return rho / rho.trace();
}

inline Vector random_ket(std::mt19937_64& rng, Eigen::Index dim) {
  Vector v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v(i) = random_complex(rng);
  return v / v.norm();
}

inline LindbladModel random_model(std::mt19937_64& rng, Eigen::Index dim, int channel_count) {
  std::uniform_real_distribution<double> rate(0.0, 2.0);
  std::vector<JumpChannel> channels;
  channels.reserve(std::size_t(channel_count));
  for (int c = 0; c < channel_count; ++c) channels.push_back({rate(rng), random_matrix(rng, dim)});
  return LindbladModel(random_hermitian(rng, dim), std::move(channels));
}

inline std::vector<Complex> random_betas(std::mt19937_64& rng, std::size_t count, double max_abs = 2.0) {
  std::uniform_real_distribution<double> radius(0.0, max_abs);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
  std::vector<Complex> betas(count);
  for (auto& b : betas) b = std::polar(radius(rng), angle(rng));
  return betas;
}

}  // namespace betadyne
