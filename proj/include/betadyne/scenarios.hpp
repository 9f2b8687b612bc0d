#pragma once

// Prebuilt models: qubit with gain and loss, its three-level physical
// realization, the driven Kerr resonator on a truncated Fock space, and the
// resonantly driven qubit. Constructors return plain LindbladModels; all
// physics flows through the generic transforms, nothing scenario-specific
// happens downstream.

#include "betadyne/core.hpp"
#include "betadyne/model.hpp"

#include <array>
#include <vector>

namespace betadyne {

// H = (omega/2) sigma_z with loss sqrt(gamma_minus) sigma_- and gain
// sqrt(gamma_plus) sigma_+, basis (|e>, |g>).
struct GainLossQubitParams {
  double omega = 1.0;
  double gamma_minus = 1.0;
  double gamma_plus = 0.0;
};

inline LindbladModel build_gain_loss_qubit(const GainLossQubitParams& p) {
  if (p.gamma_minus < 0.0 || p.gamma_plus < 0.0)
    throw std::invalid_argument("build_gain_loss_qubit: rates must be >= 0");
  std::vector<JumpChannel> channels;
  channels.push_back({p.gamma_minus, sigma_minus()});
  channels.push_back({p.gamma_plus, sigma_plus()});
  return LindbladModel(0.5 * p.omega * pauli_z(), std::move(channels));
}

// The four sign/conjugation variants of
//   beta = +- i (gamma_- - gamma_+ - 2 i omega) / (4 sqrt(gamma_- gamma_+)).
// Only one +- pair coalesces the displaced two-level generator; callers
// disambiguate with the coalescence measure.
inline std::array<Complex, 4> gain_loss_ep_candidates(const GainLossQubitParams& p) {
  if (!(p.gamma_minus * p.gamma_plus > 0.0))
    throw std::invalid_argument("gain_loss_ep_candidates: need gamma_- * gamma_+ > 0");
  const Complex base =
      kI * (p.gamma_minus - p.gamma_plus - 2.0 * kI * p.omega) / (4.0 * std::sqrt(p.gamma_minus * p.gamma_plus));
  return {base, -base, std::conj(base), -std::conj(base)};
}

// Three-level ladder (|g>, |e>, |f>) in the frame rotating at the g<->f
// drive frequency: the resonant drive becomes static, H = omega |e><e| +
// drive (|g><f| + |f><g|), with cascade decays f->e (fast) and e->g. For
// gamma_fe >> drive this reproduces the gain/loss qubit with an effective
// gain rate 4 drive^2 / gamma_fe. delta_omega only moves the emitted photon
// frequencies, not the rotating-frame generator, and is kept for bookkeeping.
struct ThreeLevelParams {
  double omega = 1.0;
  double delta_omega = 0.0;
  double drive = 0.05;
  double gamma_eg = 0.001;
  double gamma_fe = 5.0;
};

inline double three_level_effective_gain(const ThreeLevelParams& p) {
  if (!(p.gamma_fe > 0.0)) throw std::invalid_argument("three_level_effective_gain: gamma_fe must be > 0");
  return 4.0 * p.drive * p.drive / p.gamma_fe;
}

inline LindbladModel build_three_level(const ThreeLevelParams& p) {
  if (!(p.gamma_fe > 0.0)) throw std::invalid_argument("build_three_level: gamma_fe must be > 0");
  if (p.gamma_eg < 0.0) throw std::invalid_argument("build_three_level: gamma_eg must be >= 0");
  Matrix h = p.omega * projector(3, 1, 1);
  h += p.drive * (projector(3, 0, 2) + projector(3, 2, 0));
  std::vector<JumpChannel> channels;
  channels.push_back({p.gamma_eg, projector(3, 0, 1)});  // |g><e|
  channels.push_back({p.gamma_fe, projector(3, 1, 2)});  // |e><f|
  return LindbladModel(std::move(h), std::move(channels));
}

// Driven Kerr resonator in the frame rotating at the cavity frequency:
// H = -detuning a^dag a + kerr a^dag^2 a^2 - i (drive a^dag - conj(drive) a),
// one-photon loss at rate gamma. truncation = 3 is the two-photon regime.
struct KerrParams {
  double detuning = 0.0;
  double kerr = 2.0;
  Complex drive{0.0, 0.0};
  double gamma = 1.0;
  int truncation = 3;
};

inline LindbladModel build_kerr(const KerrParams& p) {
  if (p.truncation < 3) throw std::invalid_argument("build_kerr: truncation must be >= 3");
  if (p.gamma < 0.0) throw std::invalid_argument("build_kerr: gamma must be >= 0");
  const Eigen::Index d = p.truncation;
  const Matrix a = annihilation(d);
  const Matrix ad = a.adjoint();
  Matrix h = -p.detuning * (ad * a) + p.kerr * (ad * ad * a * a);
  h -= kI * (p.drive * ad - std::conj(p.drive) * a);
  std::vector<JumpChannel> channels;
  channels.push_back({p.gamma, a});
  return LindbladModel(std::move(h), std::move(channels));
}

// Resonantly driven qubit in the pump frame: H = (omega/2) sigma_x with decay
// gamma_minus through sigma_-.
struct DrivenQubitParams {
  double omega = 1.0;
  double gamma_minus = 1.0;
};

inline LindbladModel build_driven_qubit(const DrivenQubitParams& p) {
  if (p.gamma_minus < 0.0) throw std::invalid_argument("build_driven_qubit: rate must be >= 0");
  std::vector<JumpChannel> channels;
  channels.push_back({p.gamma_minus, sigma_minus()});
  return LindbladModel(0.5 * p.omega * pauli_x(), std::move(channels));
}

// Imaginary displacement that pins the driven-qubit EP:
// beta = i (4 omega^2 - gamma_-^2) / (8 gamma_- omega).
inline Complex driven_qubit_ep_displacement(const DrivenQubitParams& p) {
  if (!(p.gamma_minus > 0.0) || p.omega == 0.0)
    throw std::invalid_argument("driven_qubit_ep_displacement: need gamma_- > 0 and omega != 0");
  return kI * (4.0 * p.omega * p.omega - p.gamma_minus * p.gamma_minus) / (8.0 * p.gamma_minus * p.omega);
}

}  // namespace betadyne
