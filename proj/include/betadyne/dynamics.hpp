#pragma once

// Master-equation integration (RK4), no-jump propagation with survival
// bookkeeping, Monte Carlo jump trajectories for an already-unraveled model,
// and seeded, thread-count-independent ensemble statistics.
//
// Random numbers: one master seed; the trajectory with index k draws its own
// seed as the k-th output of a splitmix64 stream seeded with the master seed,
// which then seeds an mt19937_64. Uniform doubles take the top 53 bits, so a
// given (model, grid, seed) reproduces byte-for-byte on any thread count.

#include "betadyne/core.hpp"
#include "betadyne/model.hpp"
#include "betadyne/parallel.hpp"

#include <cstdint>
#include <limits>
#include <random>
#include <utility>
#include <vector>

namespace betadyne {

struct TimeGrid {
  double t0 = 0.0;
  double t1 = 1.0;
  int steps = 1;

  TimeGrid() = default;
  TimeGrid(double start, double stop, int n) : t0(start), t1(stop), steps(n) {
    if (!(stop > start) || n < 1) throw std::invalid_argument("TimeGrid: need t1 > t0 and steps >= 1");
  }
  double dt() const { return (t1 - t0) / steps; }
  int points() const { return steps + 1; }
  double time_at(int k) const { return t0 + dt() * k; }
};

// First-order jump sampling is valid only while gamma*(op norm)^2*dt stays
// small; 0.05 is the enforced ceiling.
inline constexpr double kJumpStepBound = 0.05;

inline double jump_step_load(const LindbladModel& model, const TimeGrid& grid) {
  double worst = 0.0;
  for (const auto& ch : model.channels()) {
    const double s = spectral_norm(ch.op);
    worst = std::max(worst, ch.rate * s * s);
  }
  return worst * grid.dt();
}

inline void validate_grid(const LindbladModel& model, const TimeGrid& grid) {
  const double load = jump_step_load(model, grid);
  if (load > kJumpStepBound)
    throw std::invalid_argument("time grid too coarse: dt * max(rate * |J|^2) = " +
                                std::to_string(load) + " exceeds " + std::to_string(kJumpStepBound));
}

struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<Vector> states;                  // normalized kets, one per grid point
  std::vector<std::pair<double, int>> jumps;   // (time, channel index)
  std::vector<double> survival;                // cumulative no-jump probability, frozen after the first jump
  std::uint64_t seed = 0;
};

struct EnsembleStats {
  std::vector<double> times;
  std::vector<Matrix> mean_state;              // (1/N) sum |psi_k(t)><psi_k(t)|
  std::vector<double> nojump_fraction;         // fraction with no jump in [t0, t]
  int trajectory_count = 0;
};

struct PostselectionResult {
  std::vector<double> times;
  std::vector<Matrix> conditional_mean;        // zero matrix where no trajectory survives
  std::vector<double> fraction;                // empirical no-jump fraction
  std::vector<int> sample_count;               // surviving trajectories per time; 0 flags an empty sample
};

// --- RNG splitting ------------------------------------------------------

inline std::uint64_t splitmix64_at(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + (index + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline double uniform53(std::mt19937_64& rng) {
  return double(rng() >> 11) * 0x1.0p-53;
}

// --- deterministic evolution --------------------------------------------

// Classic RK4 on the Lindblad right-hand side; returns one density matrix per
// grid point (steps + 1 total).
inline std::vector<Matrix> integrate_master(const LindbladModel& model, const Matrix& rho0,
                                            const TimeGrid& grid) {
  require_same_dim(model.hamiltonian(), rho0, "integrate_master");
  validate_density(rho0, 1e-8);
  validate_grid(model, grid);
  const double dt = grid.dt();
  std::vector<Matrix> out;
  out.reserve(std::size_t(grid.points()));
  Matrix rho = rho0;
  out.push_back(rho);
  for (int k = 0; k < grid.steps; ++k) {
    const Matrix k1 = lindblad_rhs(model, rho);
    const Matrix k2 = lindblad_rhs(model, rho + 0.5 * dt * k1);
    const Matrix k3 = lindblad_rhs(model, rho + 0.5 * dt * k2);
    const Matrix k4 = lindblad_rhs(model, rho + dt * k3);
    rho += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    out.push_back(rho);
  }
  return out;
}

// Exact no-jump propagation psi(t) = exp(-i H_eff t) psi0 via one
// matrix-exponential step propagator. Returns the unnormalized kets and the
// survival probability |psi(t)|^2; this is the oracle the first-order Monte
// Carlo stepping is checked against.
inline std::pair<std::vector<Vector>, std::vector<double>> propagate_nhh(const Matrix& h_eff,
                                                                         const Vector& psi0,
                                                                         const TimeGrid& grid) {
  require_square(h_eff, "propagate_nhh");
  if (psi0.size() != h_eff.rows()) throw std::invalid_argument("propagate_nhh: dimension mismatch");
  const Matrix step = matrix_exponential(-kI * h_eff, grid.dt());
  std::vector<Vector> states;
  std::vector<double> survival;
  states.reserve(std::size_t(grid.points()));
  survival.reserve(std::size_t(grid.points()));
  Vector psi = psi0;
  states.push_back(psi);
  survival.push_back(psi.squaredNorm());
  for (int k = 0; k < grid.steps; ++k) {
    psi = step * psi;
    states.push_back(psi);
    survival.push_back(psi.squaredNorm());
  }
  return {std::move(states), std::move(survival)};
}

// One quantum-jump trajectory for a model whose channels already carry the
// wanted unraveling. Per step: p_mu = gamma_mu dt <psi|J^dag J|psi>; a single
// uniform draw decides no-jump (apply 1 - i H_eff dt, renormalize) versus a
// jump through channel mu picked proportionally to p_mu. The survival column
// multiplies (1 - sum p_mu) until the first jump, then stays frozen.
inline TrajectoryRecord mc_trajectory(const LindbladModel& model, const Vector& psi0,
                                      const TimeGrid& grid, std::uint64_t seed) {
  if (psi0.size() != model.dim()) throw std::invalid_argument("mc_trajectory: dimension mismatch");
  if (std::abs(psi0.norm() - 1.0) > 1e-8)
    throw std::invalid_argument("mc_trajectory: psi0 must be normalized");
  validate_grid(model, grid);

  const double dt = grid.dt();
  const Matrix h_eff = nhh(model);
  const Matrix no_jump = Matrix::Identity(model.dim(), model.dim()) - kI * dt * h_eff;
  const std::size_t nch = model.channels().size();

  std::mt19937_64 rng(seed);
  TrajectoryRecord rec;
  rec.seed = seed;
  rec.times.reserve(std::size_t(grid.points()));
  rec.states.reserve(std::size_t(grid.points()));
  rec.survival.reserve(std::size_t(grid.points()));

  Vector psi = psi0 / psi0.norm();
  double survival = 1.0;
  bool jumped = false;
  rec.times.push_back(grid.t0);
  rec.states.push_back(psi);
  rec.survival.push_back(survival);

  std::vector<double> p(nch);
  std::vector<Vector> jumped_state(nch);
  for (int k = 0; k < grid.steps; ++k) {
    double total = 0.0;
    for (std::size_t mu = 0; mu < nch; ++mu) {
      const auto& ch = model.channels()[mu];
      jumped_state[mu] = ch.op * psi;
      p[mu] = ch.rate * dt * jumped_state[mu].squaredNorm();
      total += p[mu];
    }
    if (total > 0.5)
      throw std::invalid_argument("mc_trajectory: jump probability " + std::to_string(total) +
                                  " at one step; grid too coarse");
    const double t_next = grid.time_at(k + 1);
    const double u = uniform53(rng);
    if (u < total) {
      // channel selection reuses the same draw against the cumulative p_mu
      std::size_t pick = nch;
      double acc = 0.0;
      for (std::size_t mu = 0; mu < nch; ++mu) {
        acc += p[mu];
        if (u < acc) {
          pick = mu;
          break;
        }
      }
      if (pick == nch) {  // rounding pushed u past the last positive slot
        pick = nch - 1;
        while (pick > 0 && p[pick] == 0.0) --pick;
      }
      psi = jumped_state[pick] / jumped_state[pick].norm();
      rec.jumps.emplace_back(t_next, int(pick));
      jumped = true;
    } else {
      psi = no_jump * psi;
      psi /= psi.norm();
      if (!jumped) survival *= (1.0 - total);
    }
    rec.times.push_back(t_next);
    rec.states.push_back(psi);
    rec.survival.push_back(survival);
  }
  return rec;
}

namespace detail {

// Chunked deterministic reduction: trajectories are grouped into fixed-size
// blocks accumulated in index order, and the block partials are merged in
// block order, so the floating-point result is independent of the thread
// count.
inline constexpr std::size_t kEnsembleChunk = 64;

}  // namespace detail

inline EnsembleStats ensemble_average(const LindbladModel& model, const Vector& psi0,
                                      const TimeGrid& grid, int count, std::uint64_t master_seed,
                                      int threads = 0) {
  if (count < 1) throw std::invalid_argument("ensemble_average: count must be >= 1");
  validate_grid(model, grid);
  const std::size_t points = std::size_t(grid.points());
  const Eigen::Index d = model.dim();

  const std::size_t chunks = (std::size_t(count) + detail::kEnsembleChunk - 1) / detail::kEnsembleChunk;
  std::vector<std::vector<Matrix>> partial_state(chunks);
  std::vector<std::vector<double>> partial_alive(chunks);

  parallel_for(chunks, threads, [&](std::size_t c) {
    std::vector<Matrix> acc(points, Matrix::Zero(d, d));
    std::vector<double> alive(points, 0.0);
    const std::size_t lo = c * detail::kEnsembleChunk;
    const std::size_t hi = std::min<std::size_t>(lo + detail::kEnsembleChunk, std::size_t(count));
    for (std::size_t k = lo; k < hi; ++k) {
      const TrajectoryRecord rec = mc_trajectory(model, psi0, grid, splitmix64_at(master_seed, k));
      const double first_jump = rec.jumps.empty() ? std::numeric_limits<double>::infinity()
                                                  : rec.jumps.front().first;
      for (std::size_t i = 0; i < points; ++i) {
        acc[i] += rec.states[i] * rec.states[i].adjoint();
        if (rec.times[i] < first_jump) alive[i] += 1.0;
      }
    }
    partial_state[c] = std::move(acc);
    partial_alive[c] = std::move(alive);
  });

  EnsembleStats stats;
  stats.trajectory_count = count;
  stats.times.resize(points);
  for (std::size_t i = 0; i < points; ++i) stats.times[i] = grid.time_at(int(i));
  stats.mean_state.assign(points, Matrix::Zero(d, d));
  stats.nojump_fraction.assign(points, 0.0);
  for (std::size_t c = 0; c < chunks; ++c) {
    for (std::size_t i = 0; i < points; ++i) {
      stats.mean_state[i] += partial_state[c][i];
      stats.nojump_fraction[i] += partial_alive[c][i];
    }
  }
  for (std::size_t i = 0; i < points; ++i) {
    stats.mean_state[i] /= double(count);
    stats.nojump_fraction[i] /= double(count);
  }
  return stats;
}

// Conditional statistics over the zero-jump subensemble. At each grid time
// only trajectories with no jump in [t0, t] contribute; a sample_count of
// zero marks times where the conditional state is undefined (the matrix is
// left zero there).
inline PostselectionResult postselect_no_jump(const std::vector<TrajectoryRecord>& records,
                                              const TimeGrid& grid) {
  if (records.empty()) throw std::invalid_argument("postselect_no_jump: empty ensemble");
  const std::size_t points = std::size_t(grid.points());
  const Eigen::Index d = records.front().states.front().size();
  PostselectionResult out;
  out.times.resize(points);
  for (std::size_t i = 0; i < points; ++i) out.times[i] = grid.time_at(int(i));
  out.conditional_mean.assign(points, Matrix::Zero(d, d));
  out.fraction.assign(points, 0.0);
  out.sample_count.assign(points, 0);
  for (const auto& rec : records) {
    if (rec.states.size() != points)
      throw std::invalid_argument("postselect_no_jump: record/grid mismatch");
    const double first_jump = rec.jumps.empty() ? std::numeric_limits<double>::infinity()
                                                : rec.jumps.front().first;
    for (std::size_t i = 0; i < points; ++i) {
      if (rec.times[i] < first_jump) {
        out.conditional_mean[i] += rec.states[i] * rec.states[i].adjoint();
        out.sample_count[i] += 1;
      }
    }
  }
  for (std::size_t i = 0; i < points; ++i) {
    out.fraction[i] = double(out.sample_count[i]) / double(records.size());
    if (out.sample_count[i] > 0) out.conditional_mean[i] /= double(out.sample_count[i]);
  }
  return out;
}

}  // namespace betadyne
