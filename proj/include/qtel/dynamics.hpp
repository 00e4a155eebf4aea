#pragma once

// Quantum-jump unraveling: no-jump evolution under a non-Hermitian effective
// Hamiltonian, waiting-time sampling by bisection on the survival curve, jump
// application, and a fixed-step RK4 Lindblad integrator used as the ensemble
// oracle.

#include "qtel/hilbert.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qtel {

// ---------------------------------------------------------------------------
// random numbers

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Per-trajectory seed; independent of the order in which trajectories run.
inline std::uint64_t trajectory_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(master ^ splitmix64(index));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), eng_(seed) {}

  std::uint64_t seed() const { return seed_; }

  // Uniform on [0, 1) from the top 53 bits.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 eng_;
};

// ---------------------------------------------------------------------------
// cached propagator exp(-i A t) for repeated evaluation at many times

class Propagator {
 public:
  Propagator() = default;
  explicit Propagator(Operator generator) : gen_(std::move(generator)) {
    const Matrix& a = gen_.matrix();
    if (!a.allFinite()) throw NumericalError("propagator: non-finite generator");
    const Matrix off = a - Matrix(a.diagonal().asDiagonal());
    if (off.cwiseAbs().maxCoeff() == 0.0) {
      mode_ = Mode::diagonal;
      lambda_ = a.diagonal();
      return;
    }
    Eigen::ComplexEigenSolver<Matrix> es(a);
    if (es.info() == Eigen::Success) {
      const Matrix v = es.eigenvectors();
      Eigen::PartialPivLU<Matrix> lu(v);
      const Matrix vinv = lu.inverse();
      const Matrix rec = v * es.eigenvalues().asDiagonal() * vinv;
      const double scale = 1.0 + a.cwiseAbs().maxCoeff();
      const double cond = v.cwiseAbs().maxCoeff() * vinv.cwiseAbs().maxCoeff() * static_cast<double>(a.rows());
      if ((rec - a).cwiseAbs().maxCoeff() < 1e-12 * scale && cond < 1e6) {
        mode_ = Mode::eigen;
        lambda_ = es.eigenvalues();
        v_ = v;
        vinv_ = vinv;
        return;
      }
    }
    mode_ = Mode::series;
  }

  const Operator& generator() const { return gen_; }

  Vector apply(const Vector& psi, double t) const {
    switch (mode_) {
      case Mode::diagonal: {
        Vector out(psi.size());
        for (Eigen::Index i = 0; i < psi.size(); ++i) out(i) = std::exp(cplx{0.0, -t} * lambda_(i)) * psi(i);
        return out;
      }
      case Mode::eigen: {
        Vector c = vinv_ * psi;
        for (Eigen::Index i = 0; i < c.size(); ++i) c(i) *= std::exp(cplx{0.0, -t} * lambda_(i));
        return v_ * c;
      }
      case Mode::series:
        break;
    }
    return expm(cplx{0.0, -t} * gen_.matrix()) * psi;
  }

  PureState apply(const PureState& psi, double t) const {
    if (!(psi.label() == gen_.label())) throw std::invalid_argument("propagator: space mismatch");
    return {psi.label(), apply(psi.amplitudes(), t)};
  }

  // |exp(-iAt) psi|^2, closed form when the generator is diagonal.
  double survival(const Vector& psi, double t) const {
    if (mode_ == Mode::diagonal) {
      double s = 0.0;
      for (Eigen::Index i = 0; i < psi.size(); ++i)
        s += std::norm(psi(i)) * std::exp(2.0 * t * lambda_(i).imag());
      return s;
    }
    return apply(psi, t).squaredNorm();
  }

  bool is_diagonal() const { return mode_ == Mode::diagonal; }

 private:
  enum class Mode { diagonal, eigen, series };
  Operator gen_;
  Mode mode_ = Mode::series;
  Vector lambda_;
  Matrix v_, vinv_;
};

// ---------------------------------------------------------------------------
// trajectories

struct JumpEvent {
  double time = 0.0;        // absolute time from trajectory start, us
  int channel = 0;          // index into the jump operator list
  bool observed = true;     // survived efficiency thinning
  double efficiency_draw = 0.0;
};

struct Stage {
  std::string name;
  Propagator propagator;  // built from the stage's effective Hamiltonian
  double duration = 0.0;

  Stage() = default;
  Stage(std::string n, const Operator& h_eff, double d) : name(std::move(n)), propagator(h_eff), duration(d) {
    if (!(d >= 0.0)) throw std::invalid_argument("stage '" + name + "': negative duration");
  }
};

struct Trajectory {
  std::uint64_t seed = 0;
  std::vector<JumpEvent> events;
  PureState final_state;
  std::vector<double> stage_ends;

  int actual_jumps() const { return static_cast<int>(events.size()); }
  int observed_jumps() const {
    int n = 0;
    for (const auto& e : events) n += e.observed ? 1 : 0;
    return n;
  }
};

struct NoJumpResult {
  PureState state;  // unnormalized
  double survival = 1.0;
};

// Evolution conditioned on no detector click; norm loss is the click probability.
inline NoJumpResult no_jump_evolve(const PureState& psi, const Operator& h_eff, double t) {
  if (t < 0.0) throw std::invalid_argument("no_jump_evolve: negative time");
  PureState out = evolve(psi, h_eff, t);
  const double s = out.norm_squared() / psi.norm_squared();
  return {std::move(out), s};
}

struct JumpSample {
  double time = 0.0;
  int channel = 0;
  PureState post_state;  // normalized
};

inline constexpr double jump_time_tolerance = 1e-9;  // us

namespace detail {

// Time in [0, duration] at which |U(t) psi0|^2 first reaches `target`, or none.
inline std::optional<double> find_jump_time(const Propagator& prop, const Vector& psi0, double duration,
                                            double target) {
  if (prop.survival(psi0, duration) > target) return std::nullopt;
  double lo = 0.0, hi = duration;
  while (hi - lo > jump_time_tolerance) {
    const double mid = 0.5 * (lo + hi);
    if (prop.survival(psi0, mid) > target)
      lo = mid;
    else
      hi = mid;
  }
  return hi;
}

inline int choose_channel(const std::vector<Operator>& jumps, const Vector& psi, double u, Vector& post) {
  std::vector<double> w(jumps.size());
  std::vector<Vector> out(jumps.size());
  double total = 0.0;
  for (std::size_t k = 0; k < jumps.size(); ++k) {
    out[k] = jumps[k].matrix() * psi;
    w[k] = out[k].squaredNorm();
    total += w[k];
  }
  if (!(total > 0.0)) throw NumericalError("jump with vanishing total rate");
  double acc = 0.0;
  std::size_t pick = jumps.size() - 1;
  for (std::size_t k = 0; k < jumps.size(); ++k) {
    acc += w[k] / total;
    if (u < acc) {
      pick = k;
      break;
    }
  }
  while (w[pick] == 0.0) pick = (pick == 0) ? jumps.size() - 1 : pick - 1;
  post = out[pick] / std::sqrt(w[pick]);
  return static_cast<int>(pick);
}

}  // namespace detail

// Single waiting-time draw within [0, t_max].
inline std::optional<JumpSample> sample_jump(const PureState& psi, const Operator& h_eff,
                                             const std::vector<Operator>& jumps, Rng& rng, double t_max) {
  if (!psi.is_normalized(1e-10)) throw std::invalid_argument("sample_jump: state must be normalized");
  const Propagator prop(h_eff);
  const double r = rng.uniform();
  auto t = detail::find_jump_time(prop, psi.amplitudes(), t_max, r);
  if (!t) return std::nullopt;
  const Vector at = prop.apply(psi.amplitudes(), *t);
  Vector post;
  const int ch = detail::choose_channel(jumps, at, rng.uniform(), post);
  return JumpSample{*t, ch, PureState(psi.label(), std::move(post))};
}

// Runs the stages back to back. The waiting-time target carries across stage
// boundaries; after each jump the state is renormalized and a new target drawn.
inline Trajectory run_trajectory(const PureState& initial, const std::vector<Stage>& schedule,
                                 const std::vector<Operator>& jumps, double eta, Rng& rng) {
  if (!initial.is_normalized(1e-10)) throw std::invalid_argument("run_trajectory: initial state not normalized");
  Trajectory tr;
  tr.seed = rng.seed();
  Vector psi = initial.amplitudes();
  double target = rng.uniform();
  double clock = 0.0;

  for (const auto& stage : schedule) {
    double left = stage.duration;
    while (left > 0.0) {
      auto t = detail::find_jump_time(stage.propagator, psi, left, target);
      if (!t) {
        psi = stage.propagator.apply(psi, left);
        clock += left;
        left = 0.0;
        break;
      }
      const Vector at = stage.propagator.apply(psi, *t);
      Vector post;
      JumpEvent ev;
      ev.time = clock + *t;
      ev.channel = detail::choose_channel(jumps, at, rng.uniform(), post);
      ev.efficiency_draw = rng.uniform();
      ev.observed = ev.efficiency_draw < eta;
      if (!tr.events.empty() && !(ev.time > tr.events.back().time))
        ev.time = std::nextafter(tr.events.back().time, INFINITY);
      tr.events.push_back(ev);
      psi = std::move(post);
      clock += *t;
      left -= *t;
      target = rng.uniform();
    }
    if (!psi.allFinite()) throw NumericalError("trajectory state became non-finite");
    tr.stage_ends.push_back(clock);
  }
  const double n = psi.norm();
  if (!(n > 0.0)) throw NumericalError("trajectory ended in a zero state");
  tr.final_state = PureState(initial.label(), psi / n);
  return tr;
}

inline Trajectory run_trajectory(const PureState& initial, const std::vector<Stage>& schedule,
                                 const std::vector<Operator>& jumps, double eta, std::uint64_t seed) {
  Rng rng(seed);
  return run_trajectory(initial, schedule, jumps, eta, rng);
}

// ---------------------------------------------------------------------------
// Lindblad master equation

namespace detail {

inline double hermitian_norm(const Matrix& h) {
  if (h.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (h + h.adjoint()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace detail

// d rho/dt = -i[H, rho] + sum_k (L_k rho L_k^dag - 1/2 {L_k^dag L_k, rho}),
// fixed-step RK4 with dt <= 1 / (100 max(|H|, |sum L^dag L|)).
inline DensityMatrix lindblad_evolve(const DensityMatrix& rho, const Operator& h,
                                     const std::vector<Operator>& collapse, double t,
                                     std::size_t max_steps = 100'000'000) {
  if (t < 0.0) throw std::invalid_argument("lindblad_evolve: negative time");
  if (!(rho.label() == h.label())) throw std::invalid_argument("lindblad_evolve: space mismatch");
  const Eigen::Index d = h.label().dim();
  Matrix sum_ll = Matrix::Zero(d, d);
  for (const auto& l : collapse) sum_ll += l.matrix().adjoint() * l.matrix();
  const Matrix heff = h.matrix() - cplx{0.0, 0.5} * sum_ll;

  const double rate = std::max(detail::hermitian_norm(h.matrix()), detail::hermitian_norm(sum_ll));
  if (t == 0.0) return rho;
  std::size_t steps = 1;
  if (rate > 0.0) {
    const double need = std::ceil(t * 100.0 * rate);
    if (!(need < static_cast<double>(max_steps))) throw NumericalError("lindblad_evolve: step-size underflow");
    steps = std::max<std::size_t>(1, static_cast<std::size_t>(need));
  }
  const double dt = t / static_cast<double>(steps);

  auto deriv = [&](const Matrix& r) {
    Matrix out = cplx{0.0, -1.0} * (heff * r - r * heff.adjoint());
    for (const auto& l : collapse) out += l.matrix() * r * l.matrix().adjoint();
    return out;
  };

  Matrix r = rho.matrix();
  for (std::size_t s = 0; s < steps; ++s) {
    const Matrix k1 = deriv(r);
    const Matrix k2 = deriv(r + 0.5 * dt * k1);
    const Matrix k3 = deriv(r + 0.5 * dt * k2);
    const Matrix k4 = deriv(r + dt * k3);
    r += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  if (!r.allFinite()) throw NumericalError("lindblad_evolve: non-finite result");
  return {rho.label(), r};
}

// Mean of |psi><psi| over trajectory final states.
inline DensityMatrix ensemble_average(const std::vector<PureState>& states) {
  if (states.empty()) throw std::invalid_argument("ensemble_average: no states");
  const auto& lab = states.front().label();
  Matrix acc = Matrix::Zero(lab.dim(), lab.dim());
  for (const auto& s : states) acc += s.amplitudes() * s.amplitudes().adjoint();
  return {lab, acc / static_cast<double>(states.size())};
}

}  // namespace qtel
