#pragma once

// Three-stage teleportation of an atomic qubit via cavity decay:
//   preparation  Alice maps atom 1 onto cavity A while Bob entangles atom 2
//                with cavity B; any photon leaking out aborts the run.
//   detection    both fields decay onto a 50/50 beam splitter watched by
//                D+ and D-; the run succeeds on exactly one observed click.
//   correction   Bob rotates atom 2 with a Zeeman phase chosen by the detector.
// Also the entanglement-distribution variant and the insurance encoding.

#include "qtel/dynamics.hpp"
#include "qtel/hilbert.hpp"
#include "qtel/model.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qtel {

namespace names {
inline const std::string atom1 = "atom1";
inline const std::string cav_a = "cavA";
inline const std::string atom2 = "atom2";
inline const std::string cav_b = "cavB";
inline const std::string atom_r = "atomR";
}  // namespace names

inline SpaceLabel joint_space() {
  return SpaceLabel{{names::atom1, 2}, {names::cav_a, 2}, {names::atom2, 2}, {names::cav_b, 2}};
}

inline SpaceLabel atom_qubit(const std::string& name) { return SpaceLabel{{name, 2}}; }

// a|e> + b|g>
struct InputQubit {
  cplx a{1.0, 0.0};
  cplx b{0.0, 0.0};

  InputQubit() = default;
  InputQubit(cplx a_, cplx b_) : a(a_), b(b_) {
    if (std::abs(std::norm(a) + std::norm(b) - 1.0) > 1e-12)
      throw std::invalid_argument("input qubit must satisfy |a|^2 + |b|^2 = 1");
  }

  static InputQubit normalized(cplx a, cplx b) {
    const double n = std::sqrt(std::norm(a) + std::norm(b));
    if (!(n > 0.0)) throw std::invalid_argument("input qubit has zero norm");
    return {a / n, b / n};
  }

  // Uniform (Haar) draw: |a|^2 uniform on [0,1], independent uniform phases.
  static InputQubit haar(Rng& rng) {
    const double u = rng.uniform();
    const double pa = two_pi * rng.uniform();
    const double pb = two_pi * rng.uniform();
    return normalized(std::polar(std::sqrt(u), pa), std::polar(std::sqrt(1.0 - u), pb));
  }

  double pop_e() const { return std::norm(a); }
  double pop_g() const { return std::norm(b); }

  PureState state(const std::string& atom) const {
    Vector v(2);
    v << a, b;
    return {atom_qubit(atom), v};
  }
};

enum class Detector { plus, minus };

inline const char* to_string(Detector d) { return d == Detector::plus ? "D+" : "D-"; }

enum class Status { success, no_click, two_clicks, prep_decay };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::success: return "success";
    case Status::no_click: return "no_click";
    case Status::two_clicks: return "two_clicks";
    case Status::prep_decay: return "prep_decay";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// stage timing

struct StageTimes {
  double t_i = 0.0;  // Alice: atom -> cavity mapping
  double t_e = 0.0;  // Bob: atom-cavity entangling step
  double t_d = 0.0;  // detection window
};

// Smallest positive roots of
//   tan(Omega_k t_I / 2) = -Omega_k / kappa         (|e,0> amplitude vanishes)
//   tan(Omega_k t_E / 2) = -Omega_k / (2E + kappa)  (|e,0> and |g,1> weights equal)
inline StageTimes solve_stage_times(const PhysicalParams& p, double t_d = 0.0) {
  const auto eff = effective_params(p);
  const double w = eff.omega_kappa;
  StageTimes st;
  st.t_i = (2.0 / w) * (std::numbers::pi - std::atan2(w, p.kappa));
  st.t_e = (2.0 / w) * (std::numbers::pi - std::atan2(w, 2.0 * eff.E + p.kappa));
  st.t_d = t_d;
  return st;
}

// Root of the condition with 2E - kappa in the denominator, kept for comparison.
inline double t_e_as_printed(const PhysicalParams& p) {
  const auto eff = effective_params(p);
  const double w = eff.omega_kappa;
  return (2.0 / w) * (std::numbers::pi - std::atan2(w, 2.0 * eff.E - p.kappa));
}

// Duration of an H2 evolution that multiplies |e> by exp(i*phase).
inline double zeeman_duration(double delta_e, double phase) {
  if (delta_e == 0.0 || !std::isfinite(delta_e)) throw std::invalid_argument("Zeeman splitting delta_e must be nonzero");
  // exp(-i delta_e t) = exp(i phase)  <=>  delta_e t = -phase (mod 2 pi)
  double x = std::fmod(delta_e > 0.0 ? -phase : phase, two_pi);
  if (x < 0.0) x += two_pi;
  return x / std::abs(delta_e);
}

// The mapping picks up a relative -i on the photon branch; Alice removes it
// beforehand by giving |e>_1 a phase +i with H2.
inline constexpr double alice_prephase = std::numbers::pi / 2.0;

// Amplitude on |e,1> must vanish: H1 would move it to |g,2>, outside the
// {0,1} truncation. Propagators built by diagonalization leave roundoff of
// order 1e-16 there, hence the tolerance.
inline constexpr double truncation_tolerance = 1e-12;

inline void truncation_guard(const PureState& psi, const std::string& atom, const std::string& cav) {
  const auto& lab = psi.label();
  const std::size_t ia = lab.index_of(atom), ic = lab.index_of(cav);
  for (Eigen::Index i = 0; i < lab.dim(); ++i) {
    auto d = lab.digits(i);
    if (d[ia] == 0 && d[ic] == 1 && std::abs(psi[i]) > truncation_tolerance)
      throw NumericalError("state populates |e,1> on (" + atom + "," + cav + "), outside the Fock truncation");
  }
}

// ---------------------------------------------------------------------------
// preparation

struct AlicePrep {
  PureState cavity;       // normalized cavity-A state
  PureState atom_cavity;  // normalized (atom1, cavA) state
  double survival = 1.0;  // P_ND(A)
  double atom_residual = 0.0;  // weight left in |e>_1 after mapping
};

inline AlicePrep prepare_alice(const InputQubit& q, const PhysicalParams& p) {
  const auto st = solve_stage_times(p);
  const auto eff = effective_params(p);
  const SpaceLabel ac{{names::atom1, 2}, {names::cav_a, 2}};
  PureState psi = tensor(q.state(names::atom1), PureState::basis(atom_qubit(names::cav_a), {0}));
  truncation_guard(psi, names::atom1, names::cav_a);

  const Operator phase_gen = h_eff(embed(hamiltonian_h2(p.delta_e, names::atom1), ac), p.kappa, names::cav_a);
  psi = evolve(psi, phase_gen, zeeman_duration(p.delta_e, alice_prephase));
  const Operator map_gen = h_eff(hamiltonian_h1(eff.E, names::atom1, names::cav_a), p.kappa, names::cav_a);
  auto nj = no_jump_evolve(psi, map_gen, st.t_i);
  truncation_guard(nj.state, names::atom1, names::cav_a);

  AlicePrep out;
  out.survival = nj.survival;
  out.atom_cavity = nj.state.normalized();
  // atom 1 should now be in |g>: amplitudes (g,0) and (g,1) are indices 2, 3.
  const Vector& v = out.atom_cavity.amplitudes();
  out.atom_residual = std::norm(v(0)) + std::norm(v(1));
  Vector cav(2);
  cav << v(2), v(3);
  out.cavity = PureState(atom_qubit(names::cav_a), cav).normalized();
  return out;
}

struct BobPrep {
  PureState atom_cavity;  // normalized (atom2, cavB) state
  double survival = 1.0;  // P_ND(B)
};

inline BobPrep prepare_bob(const PhysicalParams& p, const std::string& atom = names::atom2,
                           const std::string& cav = names::cav_b) {
  const auto st = solve_stage_times(p);
  const auto eff = effective_params(p);
  const SpaceLabel ac{{atom, 2}, {cav, 2}};
  const PureState psi = PureState::basis(ac, {0, 0});
  auto nj = no_jump_evolve(psi, h_eff(hamiltonian_h1(eff.E, atom, cav), p.kappa, cav), st.t_e);
  truncation_guard(nj.state, atom, cav);
  return {nj.state.normalized(), nj.survival};
}

// (|e>|0> + i|g>|1>)/sqrt2
inline PureState ideal_bob_state(const std::string& atom = names::atom2, const std::string& cav = names::cav_b) {
  Vector v = Vector::Zero(4);
  v(0) = 1.0 / std::sqrt(2.0);
  v(3) = I_unit / std::sqrt(2.0);
  return {SpaceLabel{{atom, 2}, {cav, 2}}, v};
}

// ---------------------------------------------------------------------------
// correction

// Relative phase -i (D+) or +i (D-) on |g>_2, realized as an H2 evolution.
inline Operator correction_unitary(Detector d, const PhysicalParams& p, const std::string& atom = names::atom2) {
  // Multiplying |e> by +i (D+) equals multiplying |g> by -i up to a global phase.
  const double phase = d == Detector::plus ? std::numbers::pi / 2.0 : -std::numbers::pi / 2.0;
  return propagator(hamiltonian_h2(p.delta_e, atom), zeeman_duration(p.delta_e, phase));
}

inline PureState post_correction(const PureState& bob, Detector d, const PhysicalParams& p) {
  const std::string atom = bob.label().factors().at(0).name;
  return correction_unitary(d, p, atom).apply(bob);
}

inline DensityMatrix post_correction(const DensityMatrix& bob, Detector d, const PhysicalParams& p) {
  const std::string atom = bob.label().factors().at(0).name;
  const Matrix u = correction_unitary(d, p, atom).matrix();
  return {bob.label(), u * bob.matrix() * u.adjoint()};
}

// ---------------------------------------------------------------------------
// detection

struct ProtocolOutcome {
  Status status = Status::no_click;
  std::optional<Detector> detector;  // present iff success
  double t_click = 0.0;              // us from start of detection
  DensityMatrix bob_state;           // atom 2; corrected on success
  int actual_jumps = 0;
  int observed_jumps = 0;
  std::vector<JumpEvent> events;     // all events, prep and detection, absolute times
  PureState final_state;             // joint register at the end of the last stage run

  bool success() const { return status == Status::success; }
};

// Stage generators shared by every trajectory of an ensemble.
struct ProtocolSetup {
  PhysicalParams params;
  StageTimes times;
  SpaceLabel space;
  std::vector<Operator> jumps;   // D+, D-
  std::vector<Stage> prep;
  std::vector<Stage> detection;
  double prep_duration = 0.0;

  static ProtocolSetup teleportation(const PhysicalParams& p, double t_d) {
    ProtocolSetup s;
    s.params = p;
    s.times = solve_stage_times(p, t_d);
    s.space = joint_space();
    auto [jp, jm] = jump_operators(s.space, names::cav_a, names::cav_b);
    s.jumps = {jp, jm};
    const auto eff = effective_params(p);
    const std::vector<std::string> modes{names::cav_a, names::cav_b};
    const Operator h1a = embed(hamiltonian_h1(eff.E, names::atom1, names::cav_a), s.space);
    const Operator h1b = embed(hamiltonian_h1(eff.E, names::atom2, names::cav_b), s.space);
    const Operator h2a = embed(hamiltonian_h2(p.delta_e, names::atom1), s.space);
    const double t_phase = zeeman_duration(p.delta_e, alice_prephase);
    // Both preparations end together; t_E > t_I so Bob starts first.
    const double lead = std::max(0.0, s.times.t_e - s.times.t_i);
    s.prep = {Stage("alice-prephase", h_eff(h2a, p.kappa, modes), t_phase),
              Stage("bob-lead", h_eff(h1b, p.kappa, modes), lead),
              Stage("joint-prep", h_eff(h1a + h1b, p.kappa, modes), s.times.t_i)};
    s.prep_duration = t_phase + lead + s.times.t_i;
    s.detection = {Stage("detection", h_eff(Operator::zero(s.space), p.kappa, modes), t_d)};
    return s;
  }

  static ProtocolSetup entanglement(const PhysicalParams& p, double t_d) {
    ProtocolSetup s;
    s.params = p;
    s.times = solve_stage_times(p, t_d);
    s.space = joint_space();
    auto [jp, jm] = jump_operators(s.space, names::cav_a, names::cav_b);
    s.jumps = {jp, jm};
    const auto eff = effective_params(p);
    const std::vector<std::string> modes{names::cav_a, names::cav_b};
    const Operator h1a = embed(hamiltonian_h1(eff.E, names::atom1, names::cav_a), s.space);
    const Operator h1b = embed(hamiltonian_h1(eff.E, names::atom2, names::cav_b), s.space);
    s.prep = {Stage("joint-entangle", h_eff(h1a + h1b, p.kappa, modes), s.times.t_e)};
    s.prep_duration = s.times.t_e;
    s.detection = {Stage("detection", h_eff(Operator::zero(s.space), p.kappa, modes), t_d)};
    return s;
  }

  PureState teleportation_input(const InputQubit& q) const {
    return tensor(tensor(q.state(names::atom1), PureState::basis(atom_qubit(names::cav_a), {0})),
                  PureState::basis(SpaceLabel{{names::atom2, 2}, {names::cav_b, 2}}, {0, 0}));
  }

  PureState entanglement_input() const { return PureState::basis(space, {0, 0, 0, 0}); }
};

namespace detail {

inline void classify_clicks(ProtocolOutcome& out, const Trajectory& det, double offset) {
  out.actual_jumps = det.actual_jumps();
  out.observed_jumps = det.observed_jumps();
  for (auto ev : det.events) {
    ev.time += offset;
    out.events.push_back(ev);
  }
  if (out.observed_jumps == 0) {
    out.status = Status::no_click;
  } else if (out.observed_jumps >= 2) {
    out.status = Status::two_clicks;
  } else {
    out.status = Status::success;
    for (const auto& ev : det.events)
      if (ev.observed) {
        out.detector = ev.channel == 0 ? Detector::plus : Detector::minus;
        out.t_click = ev.time;
      }
  }
}

}  // namespace detail

// Pure decay (lasers off) for t_d; success iff exactly one observed click.
// Bob's atom is returned uncorrected.
inline ProtocolOutcome detection_stage(const PureState& joint, const ProtocolSetup& setup, double eta, Rng& rng) {
  if (!joint.is_normalized(1e-10)) throw std::invalid_argument("detection_stage: joint state not normalized");
  Trajectory det = run_trajectory(joint, setup.detection, setup.jumps, eta, rng);
  ProtocolOutcome out;
  detail::classify_clicks(out, det, 0.0);
  out.final_state = det.final_state;
  out.bob_state = partial_trace(det.final_state, {names::atom2});
  return out;
}

inline ProtocolOutcome detection_stage(const PureState& joint, double t_d, double eta, const PhysicalParams& p,
                                       Rng& rng) {
  return detection_stage(joint, ProtocolSetup::teleportation(p, t_d), eta, rng);
}

// One full teleportation run.
inline ProtocolOutcome teleport_once(const InputQubit& q, const ProtocolSetup& setup, double eta, Rng& rng) {
  Trajectory prep = run_trajectory(setup.teleportation_input(q), setup.prep, setup.jumps, eta, rng);
  truncation_guard(prep.final_state, names::atom1, names::cav_a);
  truncation_guard(prep.final_state, names::atom2, names::cav_b);
  if (prep.actual_jumps() > 0) {
    ProtocolOutcome out;
    out.status = Status::prep_decay;
    out.events = prep.events;
    out.actual_jumps = prep.actual_jumps();
    out.observed_jumps = prep.observed_jumps();
    out.final_state = prep.final_state;
    out.bob_state = partial_trace(prep.final_state, {names::atom2});
    return out;
  }
  Trajectory det = run_trajectory(prep.final_state, setup.detection, setup.jumps, eta, rng);
  ProtocolOutcome out;
  detail::classify_clicks(out, det, setup.prep_duration);
  out.final_state = det.final_state;
  out.bob_state = partial_trace(det.final_state, {names::atom2});
  if (out.success()) out.bob_state = post_correction(out.bob_state, *out.detector, setup.params);
  return out;
}

// ---------------------------------------------------------------------------
// ensembles

struct RunningMean {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
  double stderr_mean() const { return n > 0 ? std::sqrt(variance() / static_cast<double>(n)) : 0.0; }
};

struct TrajectoryRecord {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  InputQubit input;
  Status status = Status::no_click;
  std::optional<Detector> detector;
  double t_click = 0.0;
  int actual_jumps = 0;
  int observed_jumps = 0;
  double fidelity = 0.0;  // success only
};

struct TeleportationSummary {
  std::size_t trajectories = 0;
  std::array<std::size_t, 4> counts{};  // indexed by Status
  double success_rate = 0.0;
  double success_stderr = 0.0;
  double fidelity_mean = 0.0;
  double fidelity_stderr = 0.0;
  std::optional<DensityMatrix> mean_bob_state;  // over successes
  std::vector<TrajectoryRecord> records;

  std::size_t count(Status s) const { return counts[static_cast<std::size_t>(s)]; }
};

// `input` empty -> a Haar-random input per trajectory.
inline TeleportationSummary run_teleportation(const std::optional<InputQubit>& input, const PhysicalParams& p,
                                              double t_d, double eta, std::size_t n, std::uint64_t master_seed) {
  if (n == 0) throw std::invalid_argument("run_teleportation: need at least one trajectory");
  const auto setup = ProtocolSetup::teleportation(p, t_d);
  TeleportationSummary sum;
  sum.trajectories = n;
  sum.records.reserve(n);
  RunningMean fid;
  Matrix acc = Matrix::Zero(2, 2);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(trajectory_seed(master_seed, i));
    const InputQubit q = input ? *input : InputQubit::haar(rng);
    const auto out = teleport_once(q, setup, eta, rng);
    TrajectoryRecord rec{i, rng.seed(), q, out.status, out.detector, out.t_click, out.actual_jumps,
                         out.observed_jumps, 0.0};
    ++sum.counts[static_cast<std::size_t>(out.status)];
    if (out.success()) {
      rec.fidelity = fidelity(out.bob_state, q.state(names::atom2));
      fid.add(rec.fidelity);
      acc += out.bob_state.matrix();
    }
    sum.records.push_back(rec);
  }
  const double ns = static_cast<double>(sum.count(Status::success));
  sum.success_rate = ns / static_cast<double>(n);
  sum.success_stderr = std::sqrt(sum.success_rate * (1.0 - sum.success_rate) / static_cast<double>(n));
  sum.fidelity_mean = fid.mean;
  sum.fidelity_stderr = fid.stderr_mean();
  if (ns > 0) sum.mean_bob_state = DensityMatrix(atom_qubit(names::atom2), acc / ns);
  return sum;
}

// Entanglement distribution: both sides prepare (|e,0> + i|g,1>)/sqrt2; a
// single observed click heralds |psi+-> between the atoms. D- runs get a
// pi phase on |g>_2 so all successes are referred to |psi+>.
struct EntanglementSummary {
  std::size_t trajectories = 0;
  std::array<std::size_t, 4> counts{};
  std::optional<DensityMatrix> rho;  // (atom1, atom2), mean over successes

  std::size_t count(Status s) const { return counts[static_cast<std::size_t>(s)]; }
};

inline EntanglementSummary run_entanglement(const PhysicalParams& p, double t_d, double eta, std::size_t n,
                                            std::uint64_t master_seed) {
  if (n == 0) throw std::invalid_argument("run_entanglement: need at least one trajectory");
  const auto setup = ProtocolSetup::entanglement(p, t_d);
  const SpaceLabel pair{{names::atom1, 2}, {names::atom2, 2}};
  const Matrix flip = embed(propagator(hamiltonian_h2(p.delta_e, names::atom2),
                                       zeeman_duration(p.delta_e, std::numbers::pi)),
                            pair)
                          .matrix();
  EntanglementSummary sum;
  sum.trajectories = n;
  Matrix acc = Matrix::Zero(4, 4);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(trajectory_seed(master_seed, i));
    Trajectory prep = run_trajectory(setup.entanglement_input(), setup.prep, setup.jumps, eta, rng);
    if (prep.actual_jumps() > 0) {
      ++sum.counts[static_cast<std::size_t>(Status::prep_decay)];
      continue;
    }
    Trajectory det = run_trajectory(prep.final_state, setup.detection, setup.jumps, eta, rng);
    ProtocolOutcome out;
    detail::classify_clicks(out, det, setup.prep_duration);
    ++sum.counts[static_cast<std::size_t>(out.status)];
    if (!out.success()) continue;
    Matrix r = partial_trace(det.final_state, {names::atom1, names::atom2}).matrix();
    if (*out.detector == Detector::minus) r = flip * r * flip.adjoint();
    acc += r;
  }
  const auto ns = sum.count(Status::success);
  if (ns > 0) sum.rho = DensityMatrix(pair, acc / static_cast<double>(ns));
  return sum;
}

// ---------------------------------------------------------------------------
// teleportation with insurance

// a(|e>_1|g>_r + |g>_1|e>_r) + b(|g>_1|g>_r + |e>_1|e>_r), normalized.
inline PureState insurance_encode(const InputQubit& q) {
  Vector v(4);
  const double s = 1.0 / std::sqrt(2.0);
  v << q.b * s, q.a * s, q.a * s, q.b * s;  // |ee>, |eg>, |ge>, |gg>
  return {SpaceLabel{{names::atom1, 2}, {names::atom_r, 2}}, v};
}

enum class Pauli { identity, phase_flip, bit_flip, both };

inline const char* to_string(Pauli c) {
  switch (c) {
    case Pauli::identity: return "identity";
    case Pauli::phase_flip: return "phase_flip";
    case Pauli::bit_flip: return "bit_flip";
    case Pauli::both: return "bit_flip*phase_flip";
  }
  return "?";
}

inline Matrix pauli_matrix(Pauli c) {
  Matrix x(2, 2), z(2, 2);
  x << 0, 1, 1, 0;
  z << 1, 0, 0, -1;
  switch (c) {
    case Pauli::identity: return Matrix::Identity(2, 2);
    case Pauli::phase_flip: return z;
    case Pauli::bit_flip: return x;
    case Pauli::both: return x * z;
  }
  return Matrix::Identity(2, 2);
}

// The state the reserve atom should end up in: a|g>_r + b|e>_r.
inline PureState insurance_target(const InputQubit& q) {
  Vector v(2);
  v << q.b, q.a;
  return {atom_qubit(names::atom_r), v};
}

struct InsuranceBranch {
  Status failure = Status::no_click;  // no_click or two_clicks (observed)
  double probability = 0.0;           // of this observed outcome, given a clean preparation
  DensityMatrix reserve;              // atom r before correction
  Pauli correction = Pauli::identity;
  DensityMatrix recovered;            // atom r after correction
  double fidelity = 0.0;              // vs a|g>_r + b|e>_r
  bool degraded = false;              // eta < 1: recovery not guaranteed
};

namespace detail {

struct InsuranceModel {
  SpaceLabel space{{names::atom1, 2}, {names::atom_r, 2}, {names::cav_a, 2}, {names::atom2, 2}, {names::cav_b, 2}};
  Matrix alice_map;  // pre-phase then mapping, no-jump Kraus operator
  PureState bob;
  Matrix vacuum;     // projector onto n_A = n_B = 0
  Matrix ca, cb;
  std::vector<Matrix> jumps;  // D+, D-

  explicit InsuranceModel(const PhysicalParams& p) : bob(prepare_bob(p).atom_cavity) {
    const auto st = solve_stage_times(p);
    const auto eff = effective_params(p);
    const SpaceLabel ac{{names::atom1, 2}, {names::cav_a, 2}};
    const Operator phase = propagator(h_eff(embed(hamiltonian_h2(p.delta_e, names::atom1), ac), p.kappa, names::cav_a),
                                      zeeman_duration(p.delta_e, alice_prephase));
    const Operator map = propagator(h_eff(hamiltonian_h1(eff.E, names::atom1, names::cav_a), p.kappa, names::cav_a),
                                    st.t_i);
    alice_map = embed(map * phase, space).matrix();
    const Eigen::Index d = space.dim();
    const Matrix na = embed(ops::number(names::cav_a), space).matrix();
    const Matrix nb = embed(ops::number(names::cav_b), space).matrix();
    vacuum = Matrix::Identity(d, d) - na - nb + na * nb;
    ca = embed(ops::annihilate(names::cav_a), space).matrix();
    cb = embed(ops::annihilate(names::cav_b), space).matrix();
    const double s = 1.0 / std::sqrt(2.0);
    jumps = {s * (ca + cb), s * (ca - cb)};
  }

  // Normalized joint state after a clean preparation.
  Vector prepared(const InputQubit& q) const {
    const PureState enc = insurance_encode(q);
    const PureState full = reorder(tensor(tensor(enc, PureState::basis(atom_qubit(names::cav_a), {0})), bob), space);
    Vector v = alice_map * full.amplitudes();
    return v / v.norm();
  }

  // Unnormalized branch states after the fields have fully decayed, keyed by
  // the number of emitted photons k. Each entry is one Kraus branch. With
  // both modes decaying at the same rate, integrating the jump record over
  // ordered emission times t1 < t2 gives each ordered pair weight 1/2.
  std::vector<Vector> branches(const Vector& psi, int k) const {
    std::vector<Vector> out;
    if (k == 0) {
      out.push_back(vacuum * psi);
    } else if (k == 1) {
      for (const auto& j : jumps) out.push_back(vacuum * j * psi);
    } else {
      const double s = 1.0 / std::sqrt(2.0);
      for (const auto& j1 : jumps)
        for (const auto& j2 : jumps) out.push_back(s * (vacuum * j2 * j1 * psi));
    }
    return out;
  }

  Matrix reserve_state(const std::vector<Vector>& bs) const {
    Matrix acc = Matrix::Zero(2, 2);
    for (const auto& b : bs)
      acc += partial_trace(DensityMatrix(space, b * b.adjoint()), {names::atom_r}).matrix();
    return acc;
  }
};

}  // namespace detail

// Failure branches of the insured protocol with fields decayed to vacuum
// (t_D -> infinity). At eta = 1 each branch leaves atom r in a state that one
// fixed Pauli maps to a|g>_r + b|e>_r.
inline std::vector<InsuranceBranch> insurance_analysis(const InputQubit& q, const PhysicalParams& p, double eta) {
  if (eta < 0.0 || eta > 1.0) throw std::invalid_argument("eta must lie in [0, 1]");
  const detail::InsuranceModel model(p);

  // Probability weights of (actual photons k, observed m) for a failure class.
  auto observed_mix = [&](const Vector& psi, Status cls) {
    Matrix acc = Matrix::Zero(2, 2);
    for (int k = 0; k <= 2; ++k) {
      for (int m = 0; m <= k; ++m) {
        const bool match = cls == Status::no_click ? m == 0 : m >= 2;
        if (!match) continue;
        const double binom = (k == 2 && m == 1) ? 2.0 : 1.0;
        const double w = binom * std::pow(eta, m) * std::pow(1.0 - eta, k - m);
        if (w == 0.0) continue;
        acc += w * model.reserve_state(model.branches(psi, k));
      }
    }
    return acc;
  };

  // Correction per class from probe inputs, independent of q.
  auto label_for = [&](Status cls) {
    const int k = cls == Status::no_click ? 0 : 2;
    const std::array<InputQubit, 4> probes{InputQubit(1.0, 0.0), InputQubit(0.0, 1.0),
                                           InputQubit::normalized(1.0, 1.0), InputQubit::normalized(1.0, I_unit)};
    Pauli best = Pauli::identity;
    double best_score = -1.0;
    for (Pauli c : {Pauli::identity, Pauli::phase_flip, Pauli::bit_flip, Pauli::both}) {
      double score = 0.0;
      for (const auto& pr : probes) {
        Matrix r = model.reserve_state(model.branches(model.prepared(pr), k));
        r /= r.trace().real();
        const Matrix u = pauli_matrix(c);
        score += fidelity(DensityMatrix(atom_qubit(names::atom_r), u * r * u.adjoint()), insurance_target(pr));
      }
      if (score > best_score + 1e-12) {
        best_score = score;
        best = c;
      }
    }
    return best;
  };

  const Vector psi = model.prepared(q);
  std::vector<InsuranceBranch> out;
  for (Status cls : {Status::no_click, Status::two_clicks}) {
    InsuranceBranch b;
    b.failure = cls;
    Matrix r = observed_mix(psi, cls);
    b.probability = r.trace().real();
    b.correction = label_for(cls);
    b.degraded = eta < 1.0;
    if (b.probability > 0.0) {
      b.reserve = DensityMatrix(atom_qubit(names::atom_r), r / b.probability);
      const Matrix u = pauli_matrix(b.correction);
      b.recovered = DensityMatrix(atom_qubit(names::atom_r), u * b.reserve.matrix() * u.adjoint());
      b.fidelity = fidelity(b.recovered, insurance_target(q));
    }
    out.push_back(std::move(b));
  }
  return out;
}

// Applies the branch's correction to a reserve-atom state.
inline DensityMatrix insurance_recover(const DensityMatrix& reserve, Pauli correction) {
  const Matrix u = pauli_matrix(correction);
  return {reserve.label(), u * reserve.matrix() * u.adjoint()};
}

}  // namespace qtel
