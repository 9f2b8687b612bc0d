#include "betadyne/model.hpp"
#include "betadyne/random_models.hpp"
#include "betadyne/scenarios.hpp"
#include "betadyne/spectral.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace betadyne;

namespace {

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

double max_value_diff(const EigenSystem& a, const EigenSystem& b) {
  REQUIRE(a.values.size() == b.values.size());
  double worst = 0.0;
  for (std::size_t k = 0; k < a.values.size(); ++k)
    worst = std::max(worst, std::abs(a.values[k] - b.values[k]));
  return worst;
}

Matrix gain_loss_nhh_displaced(double omega, double gm, double gp, Complex beta) {
  return nhh_beta(build_gain_loss_qubit({omega, gm, gp}), UnravelingSpec::uniform(beta, 2));
}

Matrix driven_qubit_nhh_displaced(double omega, double gm, Complex beta) {
  return nhh_beta(build_driven_qubit({omega, gm}), UnravelingSpec::uniform(beta, 1));
}

}  // namespace

TEST_CASE("general eigendecomposition") {
  SECTION("identity") {
    const EigenSystem sys = eigendecompose(identity(2));
    CHECK(sys.values[0] == Complex(1.0));
    CHECK(sys.values[1] == Complex(1.0));
    CHECK(overlap(sys.vectors[0], sys.vectors[1]) < 1e-12);  // diabolic, not exceptional
  }

  SECTION("Jordan block: degenerate values with coalescing vectors") {
    Matrix j = Matrix::Zero(2, 2);
    j(0, 1) = 1.0;
    const EigenSystem sys = eigendecompose(j);
    CHECK(std::abs(sys.values[0]) < 1e-12);
    CHECK(std::abs(sys.values[1]) < 1e-12);
    CHECK(overlap(sys.vectors[0], sys.vectors[1]) > 0.999999);
  }

  SECTION("gain/loss generator at omega=1, g-=1, g+=0.5") {
    const EigenSystem sys = eigendecompose(nhh(build_gain_loss_qubit({1.0, 1.0, 0.5})));
    CHECK(std::abs(sys.values[0] - Complex(0.5, -0.5)) < 1e-12);
    CHECK(std::abs(sys.values[1] - Complex(-0.5, -0.25)) < 1e-12);
  }

  SECTION("residuals stay small on random matrices") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 40; ++trial) {
      const Eigen::Index d = 2 + Eigen::Index(rng() % 7);
      const Matrix a = random_matrix(rng, d);
      const EigenSystem sys = eigendecompose(a);
      const double scale = a.norm();
      for (std::size_t k = 0; k < sys.values.size(); ++k) {
        CHECK(std::abs(sys.vectors[k].norm() - 1.0) < 1e-10);
        CHECK((a * sys.vectors[k] - sys.values[k] * sys.vectors[k]).norm() < 1e-8 * scale);
      }
    }
  }

  CHECK_THROWS_AS(eigendecompose(Matrix::Zero(2, 3)), std::invalid_argument);
}

TEST_CASE("closed-form 2x2 solution") {
  SECTION("sigma_x") {
    const EigenSystem sys = eig2_closed(pauli_x());
    CHECK(std::abs(sys.values[0] - Complex(1.0)) < 1e-15);
    CHECK(std::abs(sys.values[1] - Complex(-1.0)) < 1e-15);
    CHECK(overlap(sys.vectors[0], sys.vectors[1]) < 1e-15);
  }

  SECTION("constructed exceptional point: top-left 2i sqrt(bc)") {
    Matrix a(2, 2);
    a << 2.0 * kI, 1.0, 1.0, 0.0;
    const EigenSystem sys = eig2_closed(a);
    CHECK(std::abs(sys.values[0] - kI) < 1e-12);
    CHECK(std::abs(sys.values[1] - kI) < 1e-12);
    CHECK(overlap(sys.vectors[0], sys.vectors[1]) > 1.0 - 1e-12);
  }

  SECTION("driven qubit at omega=gamma=1: eigenvalues (-i +- sqrt(3))/4") {
    const EigenSystem sys = eig2_closed(nhh(build_driven_qubit({1.0, 1.0})));
    CHECK(std::abs(sys.values[0] - Complex(std::sqrt(3.0) / 4.0, -0.25)) < 1e-12);
    CHECK(std::abs(sys.values[1] - Complex(-std::sqrt(3.0) / 4.0, -0.25)) < 1e-12);
    CHECK(max_value_diff(sys, eigendecompose(nhh(build_driven_qubit({1.0, 1.0})))) < 1e-10);
  }

  SECTION("agrees with the general solver on random matrices") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 1000; ++trial) {
      const Matrix a = random_matrix(rng, 2);
      CHECK(max_value_diff(eig2_closed(a), eigendecompose(a)) < 1e-9);
    }
  }

  SECTION("scalar matrix falls back to orthogonal basis vectors") {
    const EigenSystem sys = eig2_closed(Matrix(3.0 * identity(2)));
    CHECK(overlap(sys.vectors[0], sys.vectors[1]) == 0.0);
  }
}

TEST_CASE("closed-form 3x3 solution") {
  SECTION("diagonal") {
    Matrix d = Matrix::Zero(3, 3);
    d(0, 0) = 1.0;
    d(1, 1) = 2.0;
    d(2, 2) = 3.0;
    const EigenSystem sys = eig3_closed(d);
    CHECK(std::abs(sys.values[0] - Complex(3.0)) < 1e-12);
    CHECK(std::abs(sys.values[1] - Complex(2.0)) < 1e-12);
    CHECK(std::abs(sys.values[2] - Complex(1.0)) < 1e-12);
  }

  SECTION("undriven Kerr limit: {0, -i/2, 2U - i gamma}") {
    const Matrix h = nhh_beta(build_kerr({0.0, 2.0, Complex(0.0), 1.0, 3}),
                              UnravelingSpec::uniform(0.0, 1));
    const EigenSystem sys = eig3_closed(h);
    CHECK(std::abs(sys.values[0] - Complex(4.0, -1.0)) < 1e-12);
    CHECK(std::abs(sys.values[1] - Complex(0.0, 0.0)) < 1e-12);
    CHECK(std::abs(sys.values[2] - Complex(0.0, -0.5)) < 1e-12);
  }

  SECTION("agrees with the general solver on random matrices") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 1000; ++trial) {
      const Matrix a = random_matrix(rng, 3);
      CHECK(max_value_diff(eig3_closed(a), eigendecompose(a)) < 1e-9);
      // eigenvector residuals
      const EigenSystem sys = eig3_closed(a);
      for (std::size_t k = 0; k < 3; ++k)
        CHECK((a * sys.vectors[k] - sys.values[k] * sys.vectors[k]).norm() < 1e-7 * a.norm());
    }
  }
}

TEST_CASE("overlap metric") {
  CHECK(overlap(basis_ket(2, 0), basis_ket(2, 1)) == 0.0);
  CHECK(overlap(basis_ket(2, 0), basis_ket(2, 0)) == 1.0);
  Vector u(2);
  u << Complex(0, 2), 0;  // phases and scales are irrelevant
  CHECK(overlap(u, basis_ket(2, 0)) == Catch::Approx(1.0));
  CHECK_THROWS_AS(overlap(Vector::Zero(2), basis_ket(2, 0)), std::invalid_argument);
  CHECK_THROWS_AS(overlap(basis_ket(2, 0), basis_ket(3, 0)), std::invalid_argument);
}

TEST_CASE("coalescence measure") {
  SECTION("exact EP: Jordan block") {
    Matrix j = Matrix::Zero(2, 2);
    j(0, 1) = 1.0;
    CHECK(coalescence(j).measure < 1e-6);
  }

  SECTION("plain diagonal gap") {
    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = 1.0;
    d(1, 1) = 2.0;
    const CoalescenceReport rep = coalescence(d);
    CHECK(rep.min_gap == Catch::Approx(1.0));
    CHECK(rep.max_overlap < 1e-12);
  }

  SECTION("undisplaced gain/loss qubit never coalesces") {
    for (int k = 0; k <= 40; ++k) {
      const double gp = 2.0 * k / 40.0;
      const CoalescenceReport rep = coalescence(nhh(build_gain_loss_qubit({1.0, 1.0, gp})));
      CHECK(rep.measure > 0.05);
      CHECK(rep.max_overlap < 1e-12);  // diagonal generator
    }
  }

  SECTION("gain/loss qubit at the derived EP displacement") {
    const auto candidates = gain_loss_ep_candidates({1.0, 1.0, 0.5});
    int coalescing = 0;
    for (const Complex beta : candidates) {
      const CoalescenceReport rep = coalescence(gain_loss_nhh_displaced(1.0, 1.0, 0.5, beta));
      if (rep.measure < 1e-6) {
        ++coalescing;
        CHECK(rep.max_overlap > 0.999);
      }
    }
    CHECK(coalescing == 2);  // one +- pair works; the conjugated pair does not
  }
}

TEST_CASE("spectral properties under similarity, shift, and hermiticity") {
  std::mt19937_64 rng(11);

  SECTION("similarity invariance of the spectrum") {
    for (int trial = 0; trial < 30; ++trial) {
      const Matrix a = random_matrix(rng, 4);
      Matrix s = random_unitary(rng, 4);
      Matrix scale = Matrix::Identity(4, 4);
      // modest diagonal stretch keeps cond(S) <= 10
      for (Eigen::Index k = 0; k < 4; ++k) scale(k, k) = 1.0 + 2.0 * double(k) / 3.0;
      s = s * scale;
      const Matrix b = s.inverse() * a * s;
      CHECK(max_value_diff(eigendecompose(a), eigendecompose(b)) < 1e-7);
    }
  }

  SECTION("shift covariance: A + c 1") {
    for (int trial = 0; trial < 20; ++trial) {
      const Matrix a = random_matrix(rng, 3);
      const Complex c = random_complex(rng);
      const EigenSystem sa = eigendecompose(a);
      const EigenSystem sb = eigendecompose(Matrix(a + c * identity(3)));
      // shifting can reorder the sort; compare as multisets via sorted copies
      std::vector<Complex> va = sa.values, vb = sb.values;
      for (auto& z : va) z += c;
      auto cmp = [](Complex x, Complex y) {
        return x.real() != y.real() ? x.real() > y.real() : x.imag() > y.imag();
      };
      std::sort(va.begin(), va.end(), cmp);
      std::sort(vb.begin(), vb.end(), cmp);
      for (std::size_t k = 0; k < va.size(); ++k) CHECK(std::abs(va[k] - vb[k]) < 1e-9);
      CHECK(std::abs(coalescence(a).max_overlap -
                     coalescence(Matrix(a + c * identity(3))).max_overlap) < 1e-7);
    }
  }

  SECTION("Hermitian matrices have orthogonal eigenvectors") {
    for (int trial = 0; trial < 20; ++trial) {
      const Matrix h = random_hermitian(rng, 4);
      const CoalescenceReport rep = coalescence(h);
      CHECK(rep.max_overlap < 1e-8);
    }
  }
}

TEST_CASE("branch tracking") {
  SECTION("constant sweep gives constant branches") {
    std::mt19937_64 rng(13);
    const Matrix a = random_matrix(rng, 3);
    std::vector<EigenSystem> sweep(5, eigendecompose(a));
    const auto branches = track_branches(sweep);
    for (const auto& branch : branches)
      for (const Complex z : branch) CHECK(std::abs(z - branch.front()) < 1e-12);
  }

  SECTION("crossing eigenvalues stay on their lines") {
    std::vector<EigenSystem> sweep;
    const int n = 21;
    for (int k = 0; k < n; ++k) {
      const double t = double(k) / (n - 1);
      Matrix d = Matrix::Zero(2, 2);
      d(0, 0) = t;
      d(1, 1) = 1.0 - t;
      sweep.push_back(eigendecompose(d));
    }
    const auto branches = track_branches(sweep);
    // each branch is a straight line through its endpoints
    for (const auto& branch : branches) {
      for (int k = 0; k < n; ++k) {
        const double t = double(k) / (n - 1);
        const Complex expect = branch.front() + (branch.back() - branch.front()) * t;
        CHECK(std::abs(branch[std::size_t(k)] - expect) < 1e-10);
      }
    }
    CHECK(std::abs(branches[0].front() - branches[1].back()) < 1e-12);  // they swap ends
  }

  SECTION("driven qubit branches switch splitting character at omega = gamma/2") {
    std::vector<EigenSystem> sweep;
    std::vector<double> omegas;
    for (int k = 0; k <= 80; ++k) {
      const double omega = 0.1 + (1.0 - 0.1) * k / 80.0;
      omegas.push_back(omega);
      sweep.push_back(eigendecompose(nhh(build_driven_qubit({omega, 1.0}))));
    }
    const auto branches = track_branches(sweep);
    for (std::size_t k = 0; k < omegas.size(); ++k) {
      const Complex split = branches[0][k] - branches[1][k];
      if (omegas[k] < 0.5 - 1e-9) {
        CHECK(std::abs(split.real()) < 1e-9);  // purely imaginary splitting
      } else if (omegas[k] > 0.5 + 1e-9) {
        CHECK(std::abs(split.imag()) < 1e-9);  // purely real splitting
      }
    }
  }

  CHECK_THROWS_AS(track_branches({}), std::invalid_argument);
}

TEST_CASE("cubic characteristic polynomial and discriminant") {
  SECTION("frozen cases") {
    // (x-1)^2 (x-2) = x^3 - 4x^2 + 5x - 2: double root, zero discriminant
    CHECK(std::abs(cubic_discriminant(-4.0, 5.0, -2.0)) < 1e-12);
    // (x-1)(x-2)(x-3) = x^3 - 6x^2 + 11x - 6: discriminant 4
    CHECK(std::abs(cubic_discriminant(-6.0, 11.0, -6.0) - Complex(4.0)) < 1e-12);
  }

  SECTION("coefficients match the eigenvalues") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 50; ++trial) {
      const Matrix a = random_matrix(rng, 3);
      const auto [ca, cb, cc] = characteristic_cubic(a);
      const EigenSystem sys = eig3_closed(a);
      Complex sum = 0.0, prod = 1.0;
      for (const Complex e : sys.values) {
        sum += e;
        prod *= e;
      }
      CHECK(std::abs(sum + ca) < 1e-9 * (1.0 + std::abs(ca)));
      CHECK(std::abs(prod + cc) < 1e-8 * (1.0 + std::abs(cc)));
    }
  }

  SECTION("discriminant zero iff two eigenvalues coincide") {
    std::mt19937_64 rng(19);
    // constructed double-root cases via similarity of a defective triangular seed
    for (int trial = 0; trial < 50; ++trial) {
      Matrix t = Matrix::Zero(3, 3);
      const Complex lam = random_complex(rng), mu = random_complex(rng);
      t(0, 0) = lam;
      t(1, 1) = lam;
      t(2, 2) = mu;
      t(0, 1) = random_complex(rng);
      t(0, 2) = random_complex(rng);
      t(1, 2) = random_complex(rng);
      const Matrix s = random_unitary(rng, 3);
      const Matrix a = s.adjoint() * t * s;
      const double scale = std::pow(1.0 + a.norm(), 6);
      CHECK(std::abs(cubic_discriminant(a)) < 1e-9 * scale);
      const EigenSystem sys = eig3_closed(a);
      double min_gap = 1e300;
      for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j)
          min_gap = std::min(min_gap, std::abs(sys.values[std::size_t(i)] - sys.values[std::size_t(j)]));
      CHECK(min_gap < 1e-5 * (1.0 + a.norm()));
    }
    // random (generically distinct) spectra keep it away from zero
    for (int trial = 0; trial < 1000; ++trial) {
      const Matrix a = random_matrix(rng, 3);
      const EigenSystem sys = eig3_closed(a);
      double min_gap = 1e300;
      for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j)
          min_gap = std::min(min_gap, std::abs(sys.values[std::size_t(i)] - sys.values[std::size_t(j)]));
      if (min_gap > 1e-2 * (1.0 + a.norm()))
        CHECK(std::abs(cubic_discriminant(a)) > 1e-10);
    }
  }
}

TEST_CASE("exceptional point searches") {
  SECTION("driven qubit, no displacement: EP at omega = gamma/2") {
    auto family = [](double omega) { return nhh(build_driven_qubit({omega, 1.0})); };
    const EPSearchResult res = find_ep_scalar(family, 0.05, 1.95, {});
    CHECK(std::abs(res.location.real() - 0.5) < 1e-6);
    CHECK(res.report.measure < 1e-6);
  }

  SECTION("driven qubit displaced by 5i/24: EP moves to omega = 3/4") {
    auto family = [](double omega) {
      return driven_qubit_nhh_displaced(omega, 1.0, Complex(0.0, 5.0 / 24.0));
    };
    const EPSearchResult res = find_ep_scalar(family, 0.05, 1.95, {});
    CHECK(std::abs(res.location.real() - 0.75) < 1e-4);
    CHECK(res.report.measure < 1e-6);
  }

  SECTION("driven qubit: displacement search reproduces the closed form across omega") {
    for (const double omega : {0.3, 0.5, 0.75, 1.0, 1.5}) {
      auto family = [omega](Complex beta) { return driven_qubit_nhh_displaced(omega, 1.0, beta); };
      const EPSearchResult res = find_ep(family, {-1.0, 1.0, -1.0, 1.0}, {});
      const Complex expect = driven_qubit_ep_displacement({omega, 1.0});
      CHECK(std::abs(res.location - expect) < 1e-6);
      CHECK(res.report.measure < 1e-7);
    }
  }

  SECTION("gain/loss qubit: located EP lies in the candidate set") {
    auto family = [](Complex beta) { return gain_loss_nhh_displaced(1.0, 1.0, 0.5, beta); };
    EPSearchOptions opts;
    opts.tol = 1e-6;
    const EPSearchResult res = find_ep(family, {-1.5, 1.5, -1.5, 1.5}, opts);
    CHECK(res.converged);
    CHECK(res.report.measure < 1e-6);
    double closest = 1e300;
    for (const Complex c : gain_loss_ep_candidates({1.0, 1.0, 0.5}))
      closest = std::min(closest, std::abs(res.location - c));
    CHECK(closest < 1e-4);
  }

  SECTION("non-convergence is reported, not thrown") {
    // family with no EP anywhere: Hermitian for all beta
    auto family = [](Complex beta) {
      return Matrix(pauli_z() + std::abs(beta) * pauli_x());
    };
    EPSearchOptions opts;
    opts.max_iterations = 40;
    const EPSearchResult res = find_ep(family, {-0.5, 0.5, -0.5, 0.5}, opts);
    CHECK_FALSE(res.converged);
    CHECK(res.report.measure > 1e-3);
  }
}
