#pragma once

// Lindblad model construction, displacement and unitary-mixing transforms of
// the unraveling, effective non-Hermitian Hamiltonians, Kraus steps, and the
// Liouvillian as a dense superoperator.
//
// Displacement convention: a channel (gamma, J) displaced by beta becomes
// (gamma, J + beta*1) with the compensating Hamiltonian shift
// H -> H - (i gamma/2)(conj(beta) J - beta J^dag), which leaves the master
// equation invariant while the no-jump generator acquires the terms
// -i gamma conj(beta) J - (i gamma/2)|beta|^2 * 1.

#include "betadyne/core.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace betadyne {

struct JumpChannel {
  double rate = 0.0;  // gamma, inverse time
  Matrix op;          // jump operator
};

class LindbladModel {
 public:
  LindbladModel(Matrix hamiltonian, std::vector<JumpChannel> channels)
      : hamiltonian_(std::move(hamiltonian)), channels_(std::move(channels)) {
    require_square(hamiltonian_, "LindbladModel");
    if (!is_finite(hamiltonian_))
      throw std::invalid_argument("LindbladModel: non-finite Hamiltonian");
    // Non-Hermitian input would silently fake open-system physics; reject.
    if (!is_hermitian(hamiltonian_, tolerances().structural))
      throw std::invalid_argument("LindbladModel: Hamiltonian must be Hermitian");
    for (const auto& ch : channels_) {
      if (ch.rate < 0.0) throw std::invalid_argument("LindbladModel: negative rate");
      if (ch.op.rows() != dim() || ch.op.cols() != dim())
        throw std::invalid_argument("LindbladModel: channel dimension mismatch");
      if (!is_finite(ch.op)) throw std::invalid_argument("LindbladModel: non-finite jump operator");
    }
  }

  Eigen::Index dim() const { return hamiltonian_.rows(); }
  const Matrix& hamiltonian() const { return hamiltonian_; }
  const std::vector<JumpChannel>& channels() const { return channels_; }

 private:
  Matrix hamiltonian_;
  std::vector<JumpChannel> channels_;
};

// Per-channel complex displacements plus an optional unitary mixing of the
// channels. `mixing`, when present, acts before the displacements.
struct UnravelingSpec {
  std::vector<Complex> betas;
  std::optional<Matrix> mixing;

  static UnravelingSpec uniform(Complex beta, std::size_t channel_count) {
    UnravelingSpec spec;
    spec.betas.assign(channel_count, beta);
    return spec;
  }
};

// gamma (J rho J^dag - {J^dag J, rho}/2); Hermitian and traceless.
inline Matrix dissipator_apply(const JumpChannel& ch, const Matrix& rho) {
  require_same_dim(ch.op, rho, "dissipator_apply");
  const Matrix& j = ch.op;
  Matrix jdj = j.adjoint() * j;
  return ch.rate * (j * rho * j.adjoint() - 0.5 * (jdj * rho + rho * jdj));
}

// -i[H, rho] + sum_mu dissipators.
inline Matrix lindblad_rhs(const LindbladModel& model, const Matrix& rho) {
  require_same_dim(model.hamiltonian(), rho, "lindblad_rhs");
  Matrix out = -kI * (model.hamiltonian() * rho - rho * model.hamiltonian());
  for (const auto& ch : model.channels()) out += dissipator_apply(ch, rho);
  return out;
}

// Dense d^2 x d^2 generator acting on column-stacked density matrices:
// L = -i(1 (x) H - H^T (x) 1) + sum gamma [conj(J) (x) J
//     - (1 (x) J^dag J)/2 - ((J^dag J)^T (x) 1)/2].
inline Matrix liouvillian_matrix(const LindbladModel& model) {
  const Eigen::Index d = model.dim();
  const Matrix id = Matrix::Identity(d, d);
  Matrix l = -kI * (kron(id, model.hamiltonian()) - kron(model.hamiltonian().transpose(), id));
  for (const auto& ch : model.channels()) {
    const Matrix& j = ch.op;
    Matrix jdj = j.adjoint() * j;
    l += ch.rate * (kron(j.conjugate(), j) - 0.5 * kron(id, jdj) - 0.5 * kron(jdj.transpose(), id));
  }
  return l;
}

// No-jump generator H - (i/2) sum gamma J^dag J.
inline Matrix nhh(const LindbladModel& model) {
  Matrix h = model.hamiltonian();
  for (const auto& ch : model.channels())
    h -= 0.5 * kI * ch.rate * (ch.op.adjoint() * ch.op);
  return h;
}

// Displace every channel: J -> J + beta*1, with the Hamiltonian shift that
// keeps the Liouvillian fixed. Rates are untouched.
inline LindbladModel displace_channels(const LindbladModel& model, const UnravelingSpec& spec) {
  if (spec.betas.size() != model.channels().size())
    throw std::invalid_argument("displace_channels: betas length must match channel count");
  const Matrix id = Matrix::Identity(model.dim(), model.dim());
  Matrix h = model.hamiltonian();
  std::vector<JumpChannel> channels;
  channels.reserve(model.channels().size());
  for (std::size_t mu = 0; mu < spec.betas.size(); ++mu) {
    const auto& ch = model.channels()[mu];
    const Complex beta = spec.betas[mu];
    h -= 0.5 * kI * ch.rate * (std::conj(beta) * ch.op - beta * ch.op.adjoint());
    channels.push_back({ch.rate, ch.op + beta * id});
  }
  h = 0.5 * (h + h.adjoint().eval());  // zero out roundoff skew of the anti-Hermitian correction
  return LindbladModel(std::move(h), std::move(channels));
}

// Displaced no-jump generator, assembled directly from the expanded
// per-channel form
//   H - i sum gamma conj(beta) J - (i/2) sum gamma J^dag J
//     - (i/2) sum gamma |beta|^2 * 1.
// Must agree with nhh(displace_channels(model, spec)); the two code paths are kept
// separate on purpose and tested against each other. The |beta|^2 identity
// shift is physical (it sets the no-click probability) and is not dropped.
inline Matrix nhh_beta(const LindbladModel& model, const UnravelingSpec& spec) {
  if (spec.betas.size() != model.channels().size())
    throw std::invalid_argument("nhh_beta: betas length must match channel count");
  const Eigen::Index d = model.dim();
  Matrix h = model.hamiltonian();
  for (std::size_t mu = 0; mu < spec.betas.size(); ++mu) {
    const auto& ch = model.channels()[mu];
    const Complex beta = spec.betas[mu];
    h -= kI * ch.rate * std::conj(beta) * ch.op;
    h -= 0.5 * kI * ch.rate * (ch.op.adjoint() * ch.op);
    h -= 0.5 * kI * ch.rate * std::norm(beta) * Matrix::Identity(d, d);
  }
  return h;
}

// Unitary recombination of the channels: J'_mu = sum_nu R(mu,nu) sqrt(gamma_nu) J_nu.
// The sqrt(gamma) factors are absorbed, so every output channel has unit rate;
// do not scale by gamma again downstream. Liouvillian and no-jump generator
// are both unchanged.
inline LindbladModel mix_channels(const LindbladModel& model, const Matrix& r) {
  const auto n = Eigen::Index(model.channels().size());
  if (r.rows() != n || r.cols() != n)
    throw std::invalid_argument("mix_channels: mixing matrix side must equal channel count");
  if (!is_unitary(r, tolerances().structural))
    throw std::invalid_argument("mix_channels: matrix is not unitary");
  std::vector<JumpChannel> channels;
  channels.reserve(std::size_t(n));
  for (Eigen::Index mu = 0; mu < n; ++mu) {
    Matrix op = Matrix::Zero(model.dim(), model.dim());
    for (Eigen::Index nu = 0; nu < n; ++nu) {
      const auto& ch = model.channels()[std::size_t(nu)];
      op += r(mu, nu) * std::sqrt(ch.rate) * ch.op;
    }
    channels.push_back({1.0, std::move(op)});
  }
  return LindbladModel(model.hamiltonian(), std::move(channels));
}

// Applies the optional mixing, then the displacements. Beta indices refer to
// the post-mixing channels.
inline LindbladModel apply_unraveling(const LindbladModel& model, const UnravelingSpec& spec) {
  if (spec.mixing) {
    LindbladModel mixed = mix_channels(model, *spec.mixing);
    UnravelingSpec betas_only{spec.betas, std::nullopt};
    return displace_channels(mixed, betas_only);
  }
  return displace_channels(model, spec);
}

// One first-order Kraus step: K_0 = 1 - i H_eff dt, K_mu = sqrt(gamma_mu dt) J_mu.
// sum K^dag K = 1 + O(dt^2).
inline std::vector<Matrix> kraus_step(const LindbladModel& model, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("kraus_step: dt must be positive");
  std::vector<Matrix> ops;
  ops.reserve(model.channels().size() + 1);
  ops.push_back(Matrix::Identity(model.dim(), model.dim()) - kI * dt * nhh(model));
  for (const auto& ch : model.channels())
    ops.push_back(std::sqrt(ch.rate * dt) * ch.op);
  return ops;
}

}  // namespace betadyne
