#pragma once

// Eigendecomposition of small non-Hermitian matrices, coalescence metrics,
// branch tracking along parameter sweeps, and exceptional-point searches over
// a complex displacement or a real model parameter.
//
// Near a defective matrix the residual of any backward-stable eigensolver
// degrades to ~sqrt(eps); coalescence detection therefore relies on the
// combined gap/overlap measure below, never on residual quality. The measure
// has a square-root cusp at the optimum, which is why the searches use
// Nelder-Mead plus a derivative-free axis polish instead of gradients.

#include "betadyne/core.hpp"

#include <algorithm>
#include <array>
#include <functional>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

namespace betadyne {

struct EigenSystem {
  std::vector<Complex> values;   // sorted: descending real part, then descending imaginary part
  std::vector<Vector> vectors;   // right eigenvectors, unit norm, same order
};

struct CoalescenceReport {
  double min_gap = 0.0;       // min_{i<j} |E_i - E_j|
  double max_overlap = 0.0;   // max_{i<j} |<v_i|v_j>|
  double measure = 0.0;       // min over pairs of gap/scale + (1 - overlap), same pair
  std::pair<int, int> pair{0, 0};  // pair attaining the measure
};

struct EPSearchResult {
  Complex location{0.0, 0.0};  // beta (or the real parameter in the real part)
  CoalescenceReport report;
  bool converged = false;
  int iterations = 0;
};

namespace detail {

inline bool value_order(const Complex& a, const Complex& b) {
  if (a.real() != b.real()) return a.real() > b.real();
  return a.imag() > b.imag();
}

inline void sort_system(EigenSystem& sys) {
  std::vector<std::size_t> idx(sys.values.size());
  std::iota(idx.begin(), idx.end(), std::size_t(0));
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) {
    return value_order(sys.values[i], sys.values[j]);
  });
  EigenSystem out;
  out.values.reserve(idx.size());
  out.vectors.reserve(idx.size());
  for (auto i : idx) {
    out.values.push_back(sys.values[i]);
    out.vectors.push_back(std::move(sys.vectors[i]));
  }
  sys = std::move(out);
}

}  // namespace detail

// General dense solver (complex Schur reduction). Throws NumericError if the
// underlying iteration fails to converge; never returns silent garbage.
inline EigenSystem eigendecompose(const Matrix& a) {
  require_square(a, "eigendecompose");
  if (!is_finite(a)) throw std::invalid_argument("eigendecompose: non-finite entries");
  Eigen::ComplexEigenSolver<Matrix> solver(a, /*computeEigenvectors=*/true);
  if (solver.info() != Eigen::Success)
    throw NumericError("eigendecompose: iteration did not converge");
  EigenSystem sys;
  const Eigen::Index d = a.rows();
  sys.values.reserve(std::size_t(d));
  sys.vectors.reserve(std::size_t(d));
  for (Eigen::Index k = 0; k < d; ++k) {
    sys.values.push_back(solver.eigenvalues()(k));
    Vector v = solver.eigenvectors().col(k);
    sys.vectors.push_back(v / v.norm());
  }
  detail::sort_system(sys);
  return sys;
}

// Closed-form 2x2 solution. Writing A = [[at, b], [c, 0]] + d*1 with
// at = A00 - A11, the eigenvalues are d + (at +- s)/2, s = sqrt(at^2 + 4 b c),
// and (at +- s, 2c) are unnormalized eigenvectors. Serves as the oracle for
// the generic solver on two-level families.
inline EigenSystem eig2_closed(const Matrix& a) {
  if (a.rows() != 2 || a.cols() != 2) throw std::invalid_argument("eig2_closed: dim must be 2");
  const Complex at = a(0, 0) - a(1, 1);
  const Complex b = a(0, 1);
  const Complex c = a(1, 0);
  const Complex s = std::sqrt(at * at + 4.0 * b * c);
  const std::array<Complex, 2> values{a(1, 1) + 0.5 * (at + s), a(1, 1) + 0.5 * (at - s)};

  EigenSystem sys;
  for (std::size_t k = 0; k < 2; ++k) {
    const Complex e = values[k];
    // Two algebraic candidates for the eigenvector; take the better-conditioned.
    Vector v1(2), v2(2);
    v1 << e - a(1, 1), c;
    v2 << b, e - a(0, 0);
    Vector v = (v1.norm() >= v2.norm()) ? v1 : v2;
    if (v.norm() == 0.0) v = basis_ket(2, Eigen::Index(k));  // scalar matrix
    sys.values.push_back(e);
    sys.vectors.push_back(v / v.norm());
  }
  detail::sort_system(sys);
  return sys;
}

// Coefficients (a, b, c) of the characteristic cubic
// lambda^3 + a lambda^2 + b lambda + c of a 3x3 matrix.
inline std::array<Complex, 3> characteristic_cubic(const Matrix& m) {
  if (m.rows() != 3 || m.cols() != 3)
    throw std::invalid_argument("characteristic_cubic: dim must be 3");
  const Complex tr = m.trace();
  Complex minors = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j)
      minors += m(i, i) * m(j, j) - m(i, j) * m(j, i);
  const Complex det = m.determinant();
  return {-tr, minors, -det};
}

// Discriminant of lambda^3 + a lambda^2 + b lambda + c. Zero exactly when two
// roots coincide, which is the second-order EP condition of a 3x3 family.
inline Complex cubic_discriminant(Complex a, Complex b, Complex c) {
  return 18.0 * a * b * c - 4.0 * a * a * a * c + a * a * b * b - 4.0 * b * b * b - 27.0 * c * c;
}

inline Complex cubic_discriminant(const Matrix& m) {
  const auto [a, b, c] = characteristic_cubic(m);
  return cubic_discriminant(a, b, c);
}

namespace detail {

// Null vector of a singular 3x3 matrix via row cross products; falls back to
// near-orthogonal completion when the rank drops below 2.
inline Vector null_vector_3(const Matrix& b) {
  auto cross = [](const Vector& x, const Vector& y) {
    Vector z(3);
    z(0) = x(1) * y(2) - x(2) * y(1);
    z(1) = x(2) * y(0) - x(0) * y(2);
    z(2) = x(0) * y(1) - x(1) * y(0);
    return z;
  };
  const Vector r0 = b.row(0).transpose();
  const Vector r1 = b.row(1).transpose();
  const Vector r2 = b.row(2).transpose();
  Vector best = cross(r0, r1);
  for (const Vector& cand : {cross(r1, r2), cross(r2, r0)})
    if (cand.norm() > best.norm()) best = cand;
  const double row_scale = std::max({r0.norm(), r1.norm(), r2.norm(), 1e-300});
  if (best.norm() > 1e-14 * row_scale * row_scale) return best / best.norm();
  // rank <= 1: any vector annihilated by the largest row
  Vector r = r0;
  if (r1.norm() > r.norm()) r = r1;
  if (r2.norm() > r.norm()) r = r2;
  if (r.norm() <= 1e-300) return basis_ket(3, 0);  // zero matrix
  Eigen::Index k = 0;
  r.cwiseAbs().minCoeff(&k);
  Vector v = cross(basis_ket(3, k), r);
  if (v.norm() <= 1e-300) return basis_ket(3, k);
  return v / v.norm();
}

}  // namespace detail

// Closed-form 3x3 solution: Cardano roots of the characteristic cubic plus
// null-space eigenvectors. Independent of the Schur path; used as its oracle.
inline EigenSystem eig3_closed(const Matrix& m) {
  if (m.rows() != 3 || m.cols() != 3) throw std::invalid_argument("eig3_closed: dim must be 3");
  const auto [a, b, c] = characteristic_cubic(m);
  // depressed cubic x^3 + p x + q, lambda = x - a/3
  const Complex p = b - a * a / 3.0;
  const Complex q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
  std::array<Complex, 3> roots;
  if (std::abs(p) == 0.0 && std::abs(q) == 0.0) {
    roots = {Complex(0), Complex(0), Complex(0)};
  } else {
    const Complex disc = 0.25 * q * q + p * p * p / 27.0;
    const Complex sq = std::sqrt(disc);
    // pick the branch keeping |u|^3 away from cancellation
    Complex u3 = -0.5 * q + sq;
    if (std::abs(u3) < std::abs(-0.5 * q - sq)) u3 = -0.5 * q - sq;
    const Complex u = std::pow(u3, 1.0 / 3.0);
    const Complex omega(-0.5, std::sqrt(3.0) / 2.0);
    for (int k = 0; k < 3; ++k) {
      const Complex uk = u * (k == 0 ? Complex(1) : (k == 1 ? omega : omega * omega));
      roots[std::size_t(k)] = uk - p / (3.0 * uk);
    }
  }
  EigenSystem sys;
  const Matrix id = Matrix::Identity(3, 3);
  for (const Complex x : roots) {
    const Complex lambda = x - a / 3.0;
    sys.values.push_back(lambda);
    sys.vectors.push_back(detail::null_vector_3(m - lambda * id));
  }
  detail::sort_system(sys);
  return sys;
}

// |<u|v>| / (|u| |v|), in [0, 1].
inline double overlap(const Vector& u, const Vector& v) {
  if (u.size() != v.size()) throw std::invalid_argument("overlap: dimension mismatch");
  const double nu = u.norm(), nv = v.norm();
  if (nu <= 0.0 || nv <= 0.0) throw std::invalid_argument("overlap: zero vector");
  return std::min(1.0, std::abs(u.dot(v)) / (nu * nv));
}

inline CoalescenceReport coalescence_from(const EigenSystem& sys) {
  const int n = int(sys.values.size());
  if (n < 2) throw std::invalid_argument("coalescence: need dim >= 2");
  double scale = 1.0;
  for (const Complex e : sys.values) scale = std::max(scale, std::abs(e));
  CoalescenceReport rep;
  rep.min_gap = std::numeric_limits<double>::infinity();
  rep.max_overlap = 0.0;
  rep.measure = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double gap = std::abs(sys.values[std::size_t(i)] - sys.values[std::size_t(j)]);
      const double ov = overlap(sys.vectors[std::size_t(i)], sys.vectors[std::size_t(j)]);
      rep.min_gap = std::min(rep.min_gap, gap);
      rep.max_overlap = std::max(rep.max_overlap, ov);
      const double m = gap / scale + (1.0 - ov);
      if (m < rep.measure) {
        rep.measure = m;
        rep.pair = {i, j};
      }
    }
  }
  return rep;
}

// Gap and overlap combined into one scalar, both taken from the same pair:
// min_{i<j} |E_i - E_j| / max(1, rho(A)) + (1 - |<v_i|v_j>|). Eigenvalue
// degeneracy alone cannot tell a diabolic point from an EP; the overlap term
// enforces eigenvector coalescence.
inline CoalescenceReport coalescence(const Matrix& a) {
  return coalescence_from(eigendecompose(a));
}

// Matches consecutive eigensystems of a sweep into continuous branches.
// The per-step assignment minimizes |dE| plus a scaled eigenvector-mismatch
// term: pure value distance cannot follow a genuine level crossing (the
// sorted value sets are identical across the step), while vector continuity
// resolves it; at an EP the coalesced vectors contribute equally to every
// assignment and the value term takes over. Exact permutation search for
// d <= 4, greedy nearest neighbour above. Output is branches[b][k].
inline std::vector<std::vector<Complex>> track_branches(const std::vector<EigenSystem>& sweep) {
  if (sweep.size() < 2) throw std::invalid_argument("track_branches: need >= 2 grid points");
  const std::size_t d = sweep.front().values.size();
  for (const auto& sys : sweep)
    if (sys.values.size() != d) throw std::invalid_argument("track_branches: dim mismatch along sweep");

  std::vector<std::vector<Complex>> branches(d, std::vector<Complex>(sweep.size()));
  std::vector<std::size_t> current(d);  // branch b currently follows eigenpair current[b]
  std::iota(current.begin(), current.end(), std::size_t(0));
  for (std::size_t b = 0; b < d; ++b) branches[b][0] = sweep[0].values[b];

  for (std::size_t k = 1; k < sweep.size(); ++k) {
    const auto& prev = sweep[k - 1];
    const auto& next = sweep[k];
    double scale = 1.0;
    for (const Complex e : prev.values) scale = std::max(scale, std::abs(e));
    for (const Complex e : next.values) scale = std::max(scale, std::abs(e));
    auto pair_cost = [&](std::size_t from, std::size_t to) {
      return std::abs(next.values[to] - prev.values[from]) +
             scale * (1.0 - overlap(prev.vectors[from], next.vectors[to]));
    };
    std::vector<std::size_t> assign(d);
    if (d <= 4) {
      std::vector<std::size_t> perm(d);
      std::iota(perm.begin(), perm.end(), std::size_t(0));
      double best = std::numeric_limits<double>::infinity();
      do {
        double cost = 0.0;
        for (std::size_t b = 0; b < d; ++b) cost += pair_cost(current[b], perm[b]);
        if (cost < best) {
          best = cost;
          assign = perm;
        }
      } while (std::next_permutation(perm.begin(), perm.end()));
    } else {
      std::vector<bool> taken(d, false);
      for (std::size_t b = 0; b < d; ++b) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t pick = 0;
        for (std::size_t j = 0; j < d; ++j) {
          if (taken[j]) continue;
          const double cost = pair_cost(current[b], j);
          if (cost < best) {
            best = cost;
            pick = j;
          }
        }
        taken[pick] = true;
        assign[b] = pick;
      }
    }
    for (std::size_t b = 0; b < d; ++b) {
      current[b] = assign[b];
      branches[b][k] = next.values[assign[b]];
    }
  }
  return branches;
}

namespace detail {

// Plain Nelder-Mead on R^n; deterministic, no restarts. Returns best point,
// best value, and evaluation count through the out-params.
inline void nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                        std::vector<double>& x, double& fx, int& evals,
                        double initial_step, double ftarget, int max_iter) {
  const std::size_t n = x.size();
  const double alpha = 1.0, gamma = 2.0, rho = 0.5, sigma = 0.5;
  std::vector<std::vector<double>> pts(n + 1, x);
  for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += initial_step;
  std::vector<double> fv(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    fv[i] = f(pts[i]);
    ++evals;
  }
  for (int iter = 0; iter < max_iter; ++iter) {
    std::vector<std::size_t> ord(n + 1);
    std::iota(ord.begin(), ord.end(), std::size_t(0));
    std::stable_sort(ord.begin(), ord.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    {
      std::vector<std::vector<double>> p2(n + 1);
      std::vector<double> f2(n + 1);
      for (std::size_t i = 0; i <= n; ++i) {
        p2[i] = pts[ord[i]];
        f2[i] = fv[ord[i]];
      }
      pts.swap(p2);
      fv.swap(f2);
    }
    if (fv[0] <= ftarget) break;
    double diam = 0.0;
    for (std::size_t i = 1; i <= n; ++i)
      for (std::size_t k = 0; k < n; ++k) diam = std::max(diam, std::abs(pts[i][k] - pts[0][k]));
    if (diam < 1e-15 * (1.0 + std::abs(pts[0][0]))) break;

    std::vector<double> centroid(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k) centroid[k] += pts[i][k] / double(n);
    auto blend = [&](const std::vector<double>& base, double coeff) {
      std::vector<double> p(n);
      for (std::size_t k = 0; k < n; ++k) p[k] = centroid[k] + coeff * (base[k] - centroid[k]);
      return p;
    };
    const std::vector<double> xr = blend(pts[n], -alpha);
    const double fr = f(xr);
    ++evals;
    if (fr < fv[0]) {
      const std::vector<double> xe = blend(pts[n], -alpha * gamma);
      const double fe = f(xe);
      ++evals;
      if (fe < fr) {
        pts[n] = xe;
        fv[n] = fe;
      } else {
        pts[n] = xr;
        fv[n] = fr;
      }
    } else if (fr < fv[n - 1]) {
      pts[n] = xr;
      fv[n] = fr;
    } else {
      const bool outside = fr < fv[n];
      const std::vector<double> xc = blend(outside ? xr : pts[n], rho);
      const double fc = f(xc);
      ++evals;
      if (fc < (outside ? fr : fv[n])) {
        pts[n] = xc;
        fv[n] = fc;
      } else {
        for (std::size_t i = 1; i <= n; ++i) {
          for (std::size_t k = 0; k < n; ++k) pts[i][k] = pts[0][k] + sigma * (pts[i][k] - pts[0][k]);
          fv[i] = f(pts[i]);
          ++evals;
        }
      }
    }
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i <= n; ++i)
    if (fv[i] < fv[best]) best = i;
  x = pts[best];
  fx = fv[best];
}

// Axis-wise bracket shrink around the incumbent; pushes into the square-root
// cusp where the simplex stalls near machine precision.
inline void axis_polish(const std::function<double(const std::vector<double>&)>& f,
                        std::vector<double>& x, double& fx, int& evals, double h0) {
  for (double h = h0; h > 1e-17; h *= 0.25) {
    for (std::size_t k = 0; k < x.size(); ++k) {
      for (const double step : {h, -h}) {
        std::vector<double> cand = x;
        cand[k] += step;
        const double fc = f(cand);
        ++evals;
        if (fc < fx) {
          x = cand;
          fx = fc;
        }
      }
    }
  }
}

}  // namespace detail

struct EPSearchOptions {
  double tol = 1e-8;            // converged iff measure <= tol
  int multistart_per_axis = 9;  // coarse grid resolution per axis
  int max_iterations = 400;     // Nelder-Mead iteration cap per start
  int refine_starts = 6;        // number of best grid nodes refined
};

struct SearchBox {
  double re_min = -1.0, re_max = 1.0;
  double im_min = -1.0, im_max = 1.0;
};

// EP search over a complex displacement: multistart Nelder-Mead on the
// coalescence measure over the box, then an axis polish. The measure is
// non-smooth exactly at the optimum (square-root branch point), so a
// simplex method is used instead of gradients. Non-convergence is reported
// with the best location found, never thrown.
inline EPSearchResult find_ep(const std::function<Matrix(Complex)>& family, const SearchBox& box,
                              const EPSearchOptions& opts = {}) {
  if (!(opts.tol > 0.0)) throw std::invalid_argument("find_ep: tol must be positive");
  auto f = [&](const std::vector<double>& x) {
    return coalescence(family(Complex(x[0], x[1]))).measure;
  };
  const int n = std::max(2, opts.multistart_per_axis);
  std::vector<std::pair<double, std::vector<double>>> nodes;
  nodes.reserve(std::size_t(n) * std::size_t(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double re = box.re_min + (box.re_max - box.re_min) * double(i) / double(n - 1);
      const double im = box.im_min + (box.im_max - box.im_min) * double(j) / double(n - 1);
      std::vector<double> x{re, im};
      nodes.emplace_back(f(x), std::move(x));
    }
  }
  std::stable_sort(nodes.begin(), nodes.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });

  const double step = std::max(box.re_max - box.re_min, box.im_max - box.im_min) / double(n - 1) / 4.0;
  EPSearchResult result;
  double best = std::numeric_limits<double>::infinity();
  int evals = 0;
  const int starts = std::min<int>(opts.refine_starts, int(nodes.size()));
  for (int s = 0; s < starts; ++s) {
    std::vector<double> x = nodes[std::size_t(s)].second;
    double fx = nodes[std::size_t(s)].first;
    detail::nelder_mead(f, x, fx, evals, step, opts.tol * 1e-2, opts.max_iterations);
    detail::axis_polish(f, x, fx, evals, step * 1e-2);
    if (fx < best) {
      best = fx;
      result.location = Complex(x[0], x[1]);
    }
  }
  result.report = coalescence(family(result.location));
  result.converged = result.report.measure <= opts.tol;
  result.iterations = evals;
  return result;
}

// EP search over a real scalar parameter on [lo, hi]; result.location carries
// the parameter in its real part.
inline EPSearchResult find_ep_scalar(const std::function<Matrix(double)>& family, double lo,
                                     double hi, const EPSearchOptions& opts = {}) {
  if (!(opts.tol > 0.0)) throw std::invalid_argument("find_ep_scalar: tol must be positive");
  if (!(hi > lo)) throw std::invalid_argument("find_ep_scalar: empty interval");
  auto f = [&](const std::vector<double>& x) { return coalescence(family(x[0])).measure; };
  const int n = std::max(3, opts.multistart_per_axis * opts.multistart_per_axis / 2);
  std::vector<std::pair<double, double>> nodes;
  nodes.reserve(std::size_t(n));
  for (int i = 0; i < n; ++i) {
    const double x = lo + (hi - lo) * double(i) / double(n - 1);
    nodes.emplace_back(f({x}), x);
  }
  std::stable_sort(nodes.begin(), nodes.end());
  const double step = (hi - lo) / double(n - 1) / 4.0;
  EPSearchResult result;
  double best = std::numeric_limits<double>::infinity();
  int evals = 0;
  const int starts = std::min<int>(opts.refine_starts, int(nodes.size()));
  for (int s = 0; s < starts; ++s) {
    std::vector<double> x{nodes[std::size_t(s)].second};
    double fx = nodes[std::size_t(s)].first;
    detail::nelder_mead(f, x, fx, evals, step, opts.tol * 1e-2, opts.max_iterations);
    detail::axis_polish(f, x, fx, evals, step * 1e-2);
    if (fx < best) {
      best = fx;
      result.location = Complex(x[0], 0.0);
    }
  }
  result.report = coalescence(family(result.location.real()));
  result.converged = result.report.measure <= opts.tol;
  result.iterations = evals;
  return result;
}

}  // namespace betadyne
