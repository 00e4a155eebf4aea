#pragma once

// Physical operators of the two atom-cavity systems and the parameter regime.
//
// The three-level atom is adiabatically reduced: only the ground levels |e>,
// |g> appear, coupled through the cavity mode with strength E = g*Omega/Delta.
// All frequencies are angular, in rad/us; times are in us.

#include "qtel/hilbert.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qtel {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

// Raised when 4E^2 <= kappa^2: the mapping conditions have no real solution.
struct RegimeError : std::domain_error {
  using std::domain_error::domain_error;
};

struct PhysicalParams {
  double g = 0.0;        // cavity coupling
  double omega = 0.0;    // classical laser coupling
  double kappa = 0.0;    // cavity field decay rate
  double gamma = 0.0;    // spontaneous decay of |r>
  double delta = 0.0;    // common detuning
  double delta_e = 0.0;  // Zeeman splitting used for phase shifts
  double eta = 1.0;      // total photodetection efficiency

  // Frequencies given as nu/2pi in MHz.
  static PhysicalParams from_mhz(double g_mhz, double omega_mhz, double kappa_mhz, double gamma_mhz,
                                 double delta_mhz, double delta_e_mhz = 1.0, double eta = 1.0) {
    PhysicalParams p{two_pi * g_mhz,     two_pi * omega_mhz,   two_pi * kappa_mhz, two_pi * gamma_mhz,
                     two_pi * delta_mhz, two_pi * delta_e_mhz, eta};
    p.check();
    return p;
  }

  // (g:Omega:kappa:gamma:Delta)/2pi = (10:10:0.01:1:100) MHz.
  static PhysicalParams reference() { return from_mhz(10.0, 10.0, 0.01, 1.0, 100.0); }

  void check() const {
    auto finite = [](double x) { return std::isfinite(x); };
    if (!(finite(g) && finite(omega) && finite(kappa) && finite(gamma) && finite(delta) && finite(delta_e) &&
          finite(eta)))
      throw std::invalid_argument("physical parameters must be finite");
    if (!(g > 0.0)) throw std::invalid_argument("g must be > 0");
    if (!(omega > 0.0)) throw std::invalid_argument("omega must be > 0");
    if (!(delta > 0.0)) throw std::invalid_argument("delta must be > 0");
    if (kappa < 0.0) throw std::invalid_argument("kappa must be >= 0");
    if (gamma < 0.0) throw std::invalid_argument("gamma must be >= 0");
    if (eta < 0.0 || eta > 1.0) throw std::invalid_argument("eta must lie in [0, 1]");
  }
};

struct EffectiveParams {
  double E = 0.0;            // effective Raman coupling g*Omega/Delta
  double omega_kappa = 0.0;  // sqrt(4E^2 - kappa^2)
};

inline EffectiveParams effective_params(const PhysicalParams& p) {
  p.check();
  const double E = p.g * p.omega / p.delta;
  const double disc = 4.0 * E * E - p.kappa * p.kappa;
  if (!(disc > 0.0))
    throw RegimeError("overdamped regime: 4E^2 <= kappa^2 (E = " + std::to_string(E) +
                      ", kappa = " + std::to_string(p.kappa) + ")");
  return {E, std::sqrt(disc)};
}

// Thresholds turning the "much less / much greater" constraints into numbers.
struct RegimeThresholds {
  double max_adiabatic_ratio = 0.05;   // g*Omega/Delta^2
  double min_detuning_ratio = 20.0;    // Delta/gamma
  double min_oscillation_ratio = 50.0; // Omega_kappa/kappa
};

struct RegimeWarning {
  std::string constraint;
  double value = 0.0;
  double threshold = 0.0;
  std::string message;
};

inline std::vector<RegimeWarning> validate_regime(const PhysicalParams& p, const RegimeThresholds& th = {}) {
  std::vector<RegimeWarning> out;
  const double adiabatic = p.g * p.omega / (p.delta * p.delta);
  if (adiabatic > th.max_adiabatic_ratio)
    out.push_back({"g*Omega/Delta^2 << 1", adiabatic, th.max_adiabatic_ratio,
                   "excited level not adiabatically eliminated: g*Omega/Delta^2 = " + std::to_string(adiabatic)});
  const double detuning = p.gamma > 0.0 ? p.delta / p.gamma : INFINITY;
  if (detuning < th.min_detuning_ratio)
    out.push_back({"Delta >> gamma", detuning, th.min_detuning_ratio,
                   "spontaneous emission not negligible: Delta/gamma = " + std::to_string(detuning)});
  const auto eff = effective_params(p);
  const double osc = p.kappa > 0.0 ? eff.omega_kappa / p.kappa : INFINITY;
  if (osc < th.min_oscillation_ratio)
    out.push_back({"Omega_kappa >> kappa", osc, th.min_oscillation_ratio,
                   "cavity decay comparable to Rabi frequency: Omega_kappa/kappa = " + std::to_string(osc)});
  return out;
}

// ---------------------------------------------------------------------------
// single-factor building blocks

namespace ops {

inline SpaceLabel qubit(const std::string& name) { return SpaceLabel{{name, 2}}; }

// |e><e| on an atom.
inline Operator proj_e(const std::string& atom) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = 1.0;
  return {qubit(atom), m};
}

inline Operator proj_g(const std::string& atom) {
  Matrix m = Matrix::Zero(2, 2);
  m(1, 1) = 1.0;
  return {qubit(atom), m};
}

// |e><g| on an atom.
inline Operator raise_eg(const std::string& atom) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 1) = 1.0;
  return {qubit(atom), m};
}

// Cavity annihilation operator truncated to {|0>, |1>}.
inline Operator annihilate(const std::string& cav) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 1) = 1.0;
  return {qubit(cav), m};
}

inline Operator number(const std::string& cav) {
  Matrix m = Matrix::Zero(2, 2);
  m(1, 1) = 1.0;
  return {qubit(cav), m};
}

}  // namespace ops

// H1 = E|e><e| + E|g><g| + E(c|e><g| + c^dag|g><e|) on atom (x) cavity.
inline Operator hamiltonian_h1(double E, const std::string& atom, const std::string& cav) {
  if (!(E > 0.0)) throw std::invalid_argument("hamiltonian_h1: E must be > 0");
  const SpaceLabel ac{{atom, 2}, {cav, 2}};
  const Operator c = embed(ops::annihilate(cav), ac);
  const Operator eg = embed(ops::raise_eg(atom), ac);
  const Operator diag = embed(ops::proj_e(atom), ac) + embed(ops::proj_g(atom), ac);
  const Operator hop = c * eg;
  return cplx{E} * (diag + hop + hop.adjoint());
}

// H2 = delta_e |e><e|.
inline Operator hamiltonian_h2(double delta_e, const std::string& atom) {
  return cplx{delta_e} * ops::proj_e(atom);
}

// H - i kappa sum_m n_m. `h` must already live on the space containing the modes.
inline Operator h_eff(const Operator& h, double kappa, const std::vector<std::string>& modes) {
  Operator out = h;
  for (const auto& m : modes) out = out - cplx{0.0, kappa} * embed(ops::number(m), h.label());
  return out;
}

inline Operator h_eff(const Operator& h, double kappa, const std::string& mode) {
  return h_eff(h, kappa, std::vector<std::string>{mode});
}

// Beam-splitter detector operators: D+ <-> (cA + cB)/sqrt2, D- <-> (cA - cB)/sqrt2.
inline std::pair<Operator, Operator> jump_operators(const SpaceLabel& space, const std::string& cav_a,
                                                    const std::string& cav_b) {
  const Operator ca = embed(ops::annihilate(cav_a), space);
  const Operator cb = embed(ops::annihilate(cav_b), space);
  const double s = 1.0 / std::sqrt(2.0);
  return {cplx{s} * (ca + cb), cplx{s} * (ca - cb)};
}

}  // namespace qtel
