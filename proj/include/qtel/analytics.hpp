#pragma once

// Closed-form expressions for the teleportation and entanglement protocols,
// input-state averaging, and the relative entropy of entanglement.
//
// Two families of expressions live side by side. The transcribed ones keep
// the algebra as printed; the first-principles ones follow from the norms and
// jump maps of the model and are what the trajectory simulation reproduces.

#include "qtel/dynamics.hpp"
#include "qtel/hilbert.hpp"
#include "qtel/model.hpp"
#include "qtel/protocol.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace qtel {

// ---------------------------------------------------------------------------
// amplitude factors

inline double alpha(const PhysicalParams& p) {
  const auto eff = effective_params(p);
  const auto st = solve_stage_times(p);
  const double w = eff.omega_kappa;
  return std::exp(-p.kappa * st.t_i / 2.0) / w * 2.0 * eff.E * std::sin(w * st.t_i / 2.0);
}

inline double beta(const PhysicalParams& p) {
  const auto eff = effective_params(p);
  const auto st = solve_stage_times(p);
  const double w = eff.omega_kappa;
  return std::exp(-p.kappa * st.t_e / 2.0) / w * 2.0 * std::numbers::sqrt2 * eff.E * std::sin(w * st.t_e / 2.0);
}

// Which expression is used for Alice's no-decay probability.
//   as_printed: |a|^2 alpha + |b|^2
//   as_norm:    |a|^2 alpha^2 + |b|^2   (norm of the mapped state)
enum class PndReading { as_printed, as_norm };

inline const char* to_string(PndReading r) { return r == PndReading::as_printed ? "as_printed" : "as_norm"; }

inline double p_nd_alice(const InputQubit& q, double alpha_v, PndReading r) {
  const double a2 = q.pop_e(), b2 = q.pop_g();
  return r == PndReading::as_printed ? a2 * alpha_v + b2 : a2 * alpha_v * alpha_v + b2;
}

inline double p_nd_alice(const InputQubit& q, const PhysicalParams& p, PndReading r = PndReading::as_norm) {
  return p_nd_alice(q, alpha(p), r);
}

inline double p_nd_bob(const PhysicalParams& p) {
  const double b = beta(p);
  return b * b;
}

// ---------------------------------------------------------------------------
// detection stage, starting from the product of the two prepared states

namespace detail {

struct DetectionWeights {
  double pa = 0.0;  // photon weight in Alice's normalized cavity state
  double e = 0.0;   // exp(-2 kappa t_D)
  double q = 0.0;   // 1 - e
};

inline DetectionWeights detection_weights(double t_d, const InputQubit& q, double alpha_v, double kappa,
                                          PndReading r) {
  DetectionWeights w;
  const double nd = p_nd_alice(q, alpha_v, r);
  w.pa = nd > 0.0 ? q.pop_e() * alpha_v * alpha_v / nd : 0.0;
  w.e = std::exp(-2.0 * kappa * t_d);
  w.q = -std::expm1(-2.0 * kappa * t_d);
  return w;
}

}  // namespace detail

// Probability of no photon in [0, t_D].
inline double p_no_decay(double t_d, const InputQubit& q, const PhysicalParams& p,
                         PndReading r = PndReading::as_norm) {
  const auto w = detail::detection_weights(t_d, q, alpha(p), p.kappa, r);
  return (w.pa * w.e + 1.0 - w.pa) * (1.0 + w.e) / 2.0;
}

// Probability of exactly one photon in [0, t_D].
inline double p_one_decay(double t_d, const InputQubit& q, const PhysicalParams& p,
                          PndReading r = PndReading::as_norm) {
  const auto w = detail::detection_weights(t_d, q, alpha(p), p.kappa, r);
  return w.q * (0.5 + w.pa * w.e);
}

inline double p_two_decays(double t_d, const InputQubit& q, const PhysicalParams& p,
                           PndReading r = PndReading::as_norm) {
  const auto w = detail::detection_weights(t_d, q, alpha(p), p.kappa, r);
  return w.pa * 0.5 * w.q * w.q;
}

// P_suc = (P_ND(A) + 2|a|^2 alpha^2 e^{-2 kappa t_D}) P_ND(B) (1 - e^{-2 kappa t_D}) / 2
inline double p_success(double t_d, const InputQubit& q, const PhysicalParams& p,
                        PndReading r = PndReading::as_norm) {
  const double al = alpha(p);
  const double e = std::exp(-2.0 * p.kappa * t_d);
  return (p_nd_alice(q, al, r) + 2.0 * q.pop_e() * al * al * e) * p_nd_bob(p) * (-std::expm1(-2.0 * p.kappa * t_d)) /
         2.0;
}

// ---------------------------------------------------------------------------
// Bob's state and fidelity

// {P_ND(A)|Psi><Psi| + 2|a|^2 alpha^2 e^{-2 kappa t_D}|g><g|} / {...},
// |Psi> = (a alpha|e> + b|g>)/sqrt(|a|^2 alpha^2 + |b|^2).
inline DensityMatrix teleported_rho(double t_d, const InputQubit& q, const PhysicalParams& p,
                                    PndReading r = PndReading::as_norm) {
  const double al = alpha(p);
  const double e = std::exp(-2.0 * p.kappa * t_d);
  const double nd = p_nd_alice(q, al, r);
  const double contam = 2.0 * q.pop_e() * al * al * e;
  Vector psi(2);
  psi << q.a * al, q.b;
  psi /= psi.norm();
  Matrix m = nd * (psi * psi.adjoint());
  m(1, 1) += contam;
  return {atom_qubit(names::atom2), m / (nd + contam)};
}

// F = {P_ND(A)(|a|^2 alpha + |b|^2) + 2|a|^2 alpha^2 e^{-2 kappa t_D}|b|^2} / {P_ND(A) + 2|a|^2 alpha^2 e^{-2 kappa t_D}}
inline double fidelity_closed_form(double t_d, const InputQubit& q, const PhysicalParams& p,
                             PndReading r = PndReading::as_printed) {
  const double al = alpha(p);
  const double a2 = q.pop_e(), b2 = q.pop_g();
  const double e = std::exp(-2.0 * p.kappa * t_d);
  const double nd = p_nd_alice(q, al, r);
  const double contam = 2.0 * a2 * al * al * e;
  return (nd * (a2 * al + b2) + contam * b2) / (nd + contam);
}

// <input| rho_Tel |input> with the norm reading of P_ND(A).
inline double fidelity_first_principles(double t_d, const InputQubit& q, const PhysicalParams& p) {
  return fidelity(teleported_rho(t_d, q, p, PndReading::as_norm), q.state(names::atom2));
}

struct EfficiencyResult {
  double p_suc_eta = 0.0;     // including the preparation stage
  double p_detect_eta = 0.0;  // detection stage only
  double f_eta = 0.0;
};

// One observed click: either a true single decay (fidelity F) or two decays
// with one photon missed, which leaves atom 2 in |g> (fidelity |b|^2).
// The eta factors cancel in the fidelity ratio, giving a finite eta -> 0 limit.
inline EfficiencyResult efficiency_corrected(double t_d, const InputQubit& q, const PhysicalParams& p, double eta,
                                             bool first_principles = true) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("eta must lie in [0, 1]");
  const PndReading r = first_principles ? PndReading::as_norm : PndReading::as_printed;
  const double p1 = p_one_decay(t_d, q, p, r);
  const double p2 = p_two_decays(t_d, q, p, r);
  const double f = first_principles ? fidelity_first_principles(t_d, q, p) : fidelity_closed_form(t_d, q, p, r);
  EfficiencyResult out;
  out.p_detect_eta = eta * p1 + 2.0 * eta * (1.0 - eta) * p2;
  out.p_suc_eta = p_nd_alice(q, p, r) * p_nd_bob(p) * out.p_detect_eta;
  const double den = p1 + 2.0 * (1.0 - eta) * p2;
  // At t_D = 0 both weights vanish; p2/p1 -> 0 there, so the limit is F itself.
  out.f_eta = den > 0.0 ? (p1 * f + 2.0 * (1.0 - eta) * p2 * q.pop_g()) / den : f;
  return out;
}

struct FidelityReport {
  double t_d = 0.0;
  InputQubit input;
  double eta = 1.0;
  double f_as_printed = 0.0;         // transcribed F with printed P_ND(A)
  double f_as_norm = 0.0;            // transcribed F with the norm reading
  double f_first_principles = 0.0;   // <input|rho_Tel|input>
  double p_suc = 0.0;                // norm reading
  double p_suc_as_printed = 0.0;
  double p_suc_eta = 0.0;
  double f_eta = 0.0;
};

inline FidelityReport fidelity_report(double t_d, const InputQubit& q, const PhysicalParams& p, double eta = 1.0) {
  FidelityReport r;
  r.t_d = t_d;
  r.input = q;
  r.eta = eta;
  r.f_as_printed = fidelity_closed_form(t_d, q, p, PndReading::as_printed);
  r.f_as_norm = fidelity_closed_form(t_d, q, p, PndReading::as_norm);
  r.f_first_principles = fidelity_first_principles(t_d, q, p);
  r.p_suc = p_success(t_d, q, p, PndReading::as_norm);
  r.p_suc_as_printed = p_success(t_d, q, p, PndReading::as_printed);
  const auto eff = efficiency_corrected(t_d, q, p, eta);
  r.p_suc_eta = eff.p_suc_eta;
  r.f_eta = eff.f_eta;
  return r;
}

// ---------------------------------------------------------------------------
// averaging over input states

struct QuadratureRule {
  std::vector<double> nodes;    // on [0, 1]
  std::vector<double> weights;  // sum to 1
};

inline QuadratureRule gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
  QuadratureRule r;
  r.nodes.resize(n);
  r.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    // map [-1,1] -> [0,1]
    r.nodes[i] = 0.5 * (1.0 - x);
    r.nodes[n - 1 - i] = 0.5 * (1.0 + x);
    r.weights[i] = r.weights[n - 1 - i] = 0.5 * w;
  }
  return r;
}

inline const QuadratureRule& haar_rule() {
  static const QuadratureRule rule = gauss_legendre(64);
  return rule;
}

// Haar average of a function that depends only on |a|^2.
inline double average_over_inputs(const std::function<double(const InputQubit&)>& f) {
  const auto& rule = haar_rule();
  double acc = 0.0;
  for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
    const double u = rule.nodes[k];
    acc += rule.weights[k] * f(InputQubit(std::sqrt(u), std::sqrt(1.0 - u)));
  }
  return acc;
}

// Haar average of f over the runs that succeed: <P f> / <P>.
inline double success_weighted_average(const std::function<double(const InputQubit&)>& f,
                                       const std::function<double(const InputQubit&)>& p_succ) {
  const double num = average_over_inputs([&](const InputQubit& q) { return p_succ(q) * f(q); });
  const double den = average_over_inputs(p_succ);
  if (!(den > 0.0)) return 0.0;
  return num / den;
}

// Relative rate of heralded runs for input q: P_suc(eta) / (eta (1 - e^{-2 kappa t_D})).
// Dividing out the common factors keeps it finite at t_D = 0 and eta = 0, so
// success-weighted averages have well-defined limits there.
inline double heralding_weight(double t_d, const InputQubit& q, const PhysicalParams& p, double eta = 1.0) {
  const auto w = detail::detection_weights(t_d, q, alpha(p), p.kappa, PndReading::as_norm);
  return p_nd_alice(q, p) * p_nd_bob(p) * (0.5 + w.pa * w.e + (1.0 - eta) * w.pa * w.q);
}

// Haar-averaged fidelity curve point. `weighted` conditions on success the
// way an ensemble of random inputs does; otherwise each input counts equally.
inline double average_fidelity(double t_d, const PhysicalParams& p, bool weighted = true,
                               bool first_principles = true) {
  auto f = [&](const InputQubit& q) {
    return first_principles ? fidelity_first_principles(t_d, q, p) : fidelity_closed_form(t_d, q, p, PndReading::as_printed);
  };
  if (!weighted) return average_over_inputs(f);
  return success_weighted_average(f, [&](const InputQubit& q) { return heralding_weight(t_d, q, p); });
}

inline double average_f_eta(double t_d, const PhysicalParams& p, double eta, bool weighted = true) {
  auto f = [&](const InputQubit& q) { return efficiency_corrected(t_d, q, p, eta).f_eta; };
  if (!weighted) return average_over_inputs(f);
  return success_weighted_average(f, [&](const InputQubit& q) { return heralding_weight(t_d, q, p, eta); });
}

inline double average_p_success(double t_d, const PhysicalParams& p, double eta = 1.0) {
  return average_over_inputs([&](const InputQubit& q) { return efficiency_corrected(t_d, q, p, eta).p_suc_eta; });
}

// ---------------------------------------------------------------------------
// post-jump state

enum class PostJumpForm {
  literal,          // printed form: one-photon branch without a phase factor
  phase_consistent  // one-photon branch carries +-i, as the jump map produces
};

// State of (atom1, cavA, atom2, cavB) right after a click at t_j, before Bob's
// correction. Atom 1 is in |g>.
inline PureState post_jump_state(const InputQubit& q, const PhysicalParams& p, double t_j, Detector d,
                                 PostJumpForm form = PostJumpForm::phase_consistent) {
  const double al = alpha(p);
  const double s = d == Detector::plus ? 1.0 : -1.0;
  const double e = std::exp(-p.kappa * t_j);
  const cplx branch = form == PostJumpForm::literal ? cplx{1.0} : cplx{0.0, s};
  const SpaceLabel sp = joint_space();
  // digits: atom1, cavA, atom2, cavB
  auto idx = [&](int na, int atom2, int nb) { return static_cast<Eigen::Index>(1 * 8 + na * 4 + atom2 * 2 + nb); };
  Vector v = Vector::Zero(sp.dim());
  v(idx(0, 0, 0)) = q.a * al;
  v(idx(0, 1, 0)) = s * I_unit * q.b;
  v(idx(1, 1, 0)) = branch * e * q.a * al;
  v(idx(0, 1, 1)) = branch * s * e * q.a * al;
  const double n = std::sqrt(p_nd_alice(q, al, PndReading::as_norm) + 2.0 * q.pop_e() * al * al * e * e);
  return {sp, v / n};
}

// ---------------------------------------------------------------------------
// entanglement distribution

enum class MixtureReading {
  as_printed,       // printed weights on the normalized Bell projector and |gg>
  first_principles  // weights from the jump algebra of the model
};

inline const char* to_string(MixtureReading r) {
  return r == MixtureReading::as_printed ? "as_printed" : "first_principles";
}

struct MixtureWeights {
  double bell = 0.0;
  double gg = 0.0;
};

inline MixtureWeights entangled_weights(double t_d, double eta, const PhysicalParams& p, MixtureReading r) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("eta must lie in [0, 1]");
  const double e = std::exp(-2.0 * p.kappa * t_d);
  const double q = -std::expm1(-2.0 * p.kappa * t_d);
  if (r == MixtureReading::as_printed) {
    // eta(1 - e^{-4 kappa t})/4 and eta(1-eta)(1 + e^{-4 kappa t} - 2e^{-2 kappa t})/2
    return {eta * q * (1.0 + e) / 4.0, eta * (1.0 - eta) * q * q / 2.0};
  }
  // Bell: a single photon emitted in the window and seen. |gg>: both emitted,
  // one missed; or one seen while the other photon is still in its cavity.
  return {eta * q / 2.0, eta * ((1.0 - eta) * q * q / 2.0 + q * (1.0 - q) / 2.0)};
}

// Normalized two-atom state on (atom1, atom2), Bell component (|eg>+|ge>)/sqrt2.
inline DensityMatrix entangled_state(double t_d, double eta, const PhysicalParams& p,
                                     MixtureReading r = MixtureReading::as_printed) {
  const auto w = entangled_weights(t_d, eta, p, r);
  const double tot = w.bell + w.gg;
  if (!(tot > 0.0)) throw std::domain_error("entangled_state: no heralding events (eta = 0 or t_D = 0)");
  const SpaceLabel pair{{names::atom1, 2}, {names::atom2, 2}};
  Vector bell = Vector::Zero(4);
  bell(1) = bell(2) = 1.0 / std::numbers::sqrt2;
  Matrix m = (w.bell / tot) * (bell * bell.adjoint());
  m(3, 3) += w.gg / tot;
  return {pair, m};
}

// ---------------------------------------------------------------------------
// entropies

inline double entropy(const DensityMatrix& rho) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(rho.hermitian_part(), Eigen::EigenvaluesOnly);
  double s = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double l = es.eigenvalues()(i);
    if (l > 1e-15) s -= l * std::log2(l);
  }
  return s;
}

inline constexpr double support_tolerance = 1e-12;

// S(rho||sigma) in bits; +infinity if rho has weight outside the support of sigma.
inline double relative_entropy(const DensityMatrix& rho, const DensityMatrix& sigma) {
  if (rho.label().dim() != sigma.label().dim()) throw std::invalid_argument("relative_entropy: dimension mismatch");
  Eigen::SelfAdjointEigenSolver<Matrix> es(sigma.hermitian_part());
  const Matrix r = rho.hermitian_part();
  double cross = 0.0;
  for (Eigen::Index j = 0; j < es.eigenvalues().size(); ++j) {
    const double l = es.eigenvalues()(j);
    const double w = (es.eigenvectors().col(j).adjoint() * r * es.eigenvectors().col(j))(0, 0).real();
    if (l <= support_tolerance) {
      if (w > support_tolerance) return std::numeric_limits<double>::infinity();
      continue;
    }
    cross -= w * std::log2(l);
  }
  return std::max(0.0, cross - entropy(rho));
}

inline Matrix partial_transpose_second(const Matrix& m) {
  Matrix out(4, 4);
  for (int i1 = 0; i1 < 2; ++i1)
    for (int i2 = 0; i2 < 2; ++i2)
      for (int j1 = 0; j1 < 2; ++j1)
        for (int j2 = 0; j2 < 2; ++j2) out(2 * i1 + i2, 2 * j1 + j2) = m(2 * i1 + j2, 2 * j1 + i2);
  return out;
}

inline bool is_ppt(const DensityMatrix& rho, double tol = 1e-10) {
  if (rho.label().dim() != 4) throw std::invalid_argument("is_ppt: two-qubit states only");
  Eigen::SelfAdjointEigenSolver<Matrix> es(partial_transpose_second(rho.hermitian_part()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -tol;
}

// ---------------------------------------------------------------------------
// relative entropy of entanglement

struct EntanglementOptions {
  int max_atoms = 32;
  int restarts = 8;
  int window = 200;            // iterations over which improvement is measured
  double min_improvement = 1e-6;
  int max_iterations = 8000;
  double gap_tolerance = 1e-4;  // Frank-Wolfe gap bounds the distance to the optimum
  std::uint64_t seed = 0x5eed5eedULL;
};

struct EntanglementReport {
  double eta = 1.0;
  double t_d = 0.0;
  DensityMatrix rho;
  DensityMatrix sigma;        // best separable state found
  double e_r = 0.0;           // ebits
  double lower_bound = 0.0;
  double upper_bound = 0.0;
  double gap = 0.0;           // Frank-Wolfe duality gap at the optimum
  int iterations = 0;         // summed over restarts
  int restarts = 0;
  bool converged = false;
  bool ppt_certified = false;
};

namespace detail {

using Vec4 = Eigen::Matrix<cplx, 4, 1>;
using Mat4 = Eigen::Matrix<cplx, 4, 4>;

struct SepObjective {
  Mat4 rho;
  double s_rho = 0.0;

  // -Tr rho log2 sigma - S(rho)
  double value(const Mat4& sigma) const {
    Eigen::SelfAdjointEigenSolver<Mat4> es(0.5 * (sigma + sigma.adjoint()));
    double cross = 0.0;
    for (int j = 0; j < 4; ++j) {
      const double l = es.eigenvalues()(j);
      const double w = (es.eigenvectors().col(j).adjoint() * rho * es.eigenvectors().col(j))(0, 0).real();
      if (l <= 1e-300) {
        if (w > 1e-14) return std::numeric_limits<double>::infinity();
        continue;
      }
      cross -= w * std::log2(l);
    }
    return cross - s_rho;
  }

  // Gradient of -Tr rho log2 sigma: -D log(sigma)[rho] / ln2, built from
  // divided differences of log in the eigenbasis of sigma.
  Mat4 gradient(const Mat4& sigma) const {
    Eigen::SelfAdjointEigenSolver<Mat4> es(0.5 * (sigma + sigma.adjoint()));
    const Mat4& u = es.eigenvectors();
    Eigen::Vector4d l = es.eigenvalues().cwiseMax(1e-14);
    Mat4 r = u.adjoint() * rho * u;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        const double d = l(i) - l(j);
        const double g = std::abs(d) > 1e-12 * std::max(l(i), l(j)) ? (std::log(l(i)) - std::log(l(j))) / d
                                                                     : 2.0 / (l(i) + l(j));
        r(i, j) *= g;
      }
    return -(u * r * u.adjoint()) / std::numbers::ln2;
  }
};

inline Eigen::Vector2cd min_eigvec2(const Eigen::Matrix2cd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(0.5 * (m + m.adjoint()));
  return es.eigenvectors().col(0);
}

// Product state |a>|b> minimizing <ab|G|ab>, by alternating minimization.
inline Vec4 product_lmo(const Mat4& g, Rng& rng) {
  auto expect = [&](const Vec4& v) { return (v.adjoint() * g * v)(0, 0).real(); };
  auto pack = [](const Eigen::Vector2cd& a, const Eigen::Vector2cd& b) {
    Vec4 v;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) v(2 * i + j) = a(i) * b(j);
    return v;
  };
  Vec4 best = Vec4::Zero();
  double best_val = std::numeric_limits<double>::infinity();
  for (int start = 0; start < 4; ++start) {
    Eigen::Vector2cd b;
    if (start < 2) {
      b << (start == 0 ? 1.0 : 0.0), (start == 0 ? 0.0 : 1.0);
    } else {
      b << std::polar(std::sqrt(rng.uniform()), two_pi * rng.uniform()),
          std::polar(1.0, two_pi * rng.uniform());
      b.normalize();
    }
    Eigen::Vector2cd a;
    double prev = std::numeric_limits<double>::infinity();
    for (int it = 0; it < 50; ++it) {
      Eigen::Matrix2cd ma = Eigen::Matrix2cd::Zero();
      for (int i = 0; i < 2; ++i)
        for (int k = 0; k < 2; ++k)
          for (int j = 0; j < 2; ++j)
            for (int l = 0; l < 2; ++l) ma(i, k) += std::conj(b(j)) * g(2 * i + j, 2 * k + l) * b(l);
      a = min_eigvec2(ma);
      Eigen::Matrix2cd mb = Eigen::Matrix2cd::Zero();
      for (int j = 0; j < 2; ++j)
        for (int l = 0; l < 2; ++l)
          for (int i = 0; i < 2; ++i)
            for (int k = 0; k < 2; ++k) mb(j, l) += std::conj(a(i)) * g(2 * i + j, 2 * k + l) * a(k);
      b = min_eigvec2(mb);
      const double v = expect(pack(a, b));
      if (prev - v < 1e-15) break;
      prev = v;
    }
    const Vec4 cand = pack(a, b);
    const double v = expect(cand);
    if (v < best_val) {
      best_val = v;
      best = cand;
    }
  }
  return best;
}

// Minimizes a convex function of gamma on [0, hi] by golden-section search.
template <class F>
double line_search(F f, double hi) {
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = 0.0, up = hi;
  double x1 = up - phi * (up - lo), x2 = lo + phi * (up - lo);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 32 && up - lo > 1e-9 * std::max(1.0, hi); ++it) {
    if (f1 <= f2) {
      up = x2;
      x2 = x1;
      f2 = f1;
      x1 = up - phi * (up - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + phi * (up - lo);
      f2 = f(x2);
    }
  }
  double g = 0.5 * (lo + up);
  double fg = f(g);
  if (f(hi) < fg) g = hi;
  return g;
}

// Removes atoms without changing the mixture: sigma lives in a 16-dimensional
// real space, so more than 16 atoms admit a null combination that can zero
// one weight.
inline void caratheodory_reduce(std::vector<Vec4>& atoms, std::vector<double>& w) {
  while (atoms.size() > 16) {
    const auto m = static_cast<Eigen::Index>(atoms.size());
    Eigen::MatrixXd a(16, m);
    for (Eigen::Index k = 0; k < m; ++k) {
      const Mat4 p = atoms[k] * atoms[k].adjoint();
      int r = 0;
      for (int i = 0; i < 4; ++i)
        for (int j = i; j < 4; ++j) {
          a(r++, k) = p(i, j).real();
          if (j > i) a(r++, k) = p(i, j).imag();
        }
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    const Eigen::MatrixXd ker = lu.kernel();
    Eigen::VectorXd c = ker.col(0);
    if (c.maxCoeff() <= 0.0) c = -c;
    double t = std::numeric_limits<double>::infinity();
    Eigen::Index drop = -1;
    for (Eigen::Index k = 0; k < m; ++k)
      if (c(k) > 1e-14 && w[k] / c(k) < t) {
        t = w[k] / c(k);
        drop = k;
      }
    if (drop < 0) break;
    for (Eigen::Index k = 0; k < m; ++k) w[k] = std::max(0.0, w[k] - t * c(k));
    atoms.erase(atoms.begin() + drop);
    w.erase(w.begin() + drop);
  }
}

struct FwResult {
  Mat4 sigma;
  double value = 0.0;
  double gap = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Away-step Frank-Wolfe over convex hulls of pure product states.
inline FwResult frank_wolfe(const SepObjective& obj, std::vector<Vec4> atoms, std::vector<double> w,
                            const EntanglementOptions& opt, Rng& rng) {
  auto build = [&]() {
    Mat4 s = Mat4::Zero();
    for (std::size_t k = 0; k < atoms.size(); ++k) s += w[k] * atoms[k] * atoms[k].adjoint();
    return s;
  };
  Mat4 sigma = build();
  double val = obj.value(sigma);
  std::vector<double> history{val};
  FwResult res;
  for (int it = 1; it <= opt.max_iterations; ++it) {
    const Mat4 g = obj.gradient(sigma);
    const double gs = (g * sigma).trace().real();
    const Vec4 s = product_lmo(g, rng);
    const double fw_gap = gs - (s.adjoint() * g * s)(0, 0).real();
    std::size_t away = 0;
    double away_val = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < atoms.size(); ++k) {
      const double v = (atoms[k].adjoint() * g * atoms[k])(0, 0).real();
      if (v > away_val) {
        away_val = v;
        away = k;
      }
    }
    res.gap = std::max(0.0, fw_gap);
    if (fw_gap < opt.gap_tolerance) {
      res.converged = true;
      res.iterations = it;
      break;
    }
    // Pairwise step: shift weight from the away atom to the new product
    // state. This keeps the active set small without truncation.
    const Vec4 v = atoms[away];
    const Mat4 dir = s * s.adjoint() - v * v.adjoint();
    const double hi = w[away];
    const double step = line_search([&](double gmm) { return obj.value(sigma + gmm * dir); }, hi);
    const auto saved_atoms = atoms;
    const auto saved_w = w;
    w[away] -= step;
    bool merged = false;
    for (std::size_t k = 0; k < atoms.size() && !merged; ++k)
      if (std::norm((atoms[k].adjoint() * s)(0, 0)) > 1.0 - 1e-12) {
        w[k] += step;
        merged = true;
      }
    if (!merged) {
      atoms.push_back(s);
      w.push_back(step);
    }
    for (std::size_t k = atoms.size(); k-- > 0;)
      if (w[k] <= 1e-15 && atoms.size() > 1) {
        atoms.erase(atoms.begin() + static_cast<std::ptrdiff_t>(k));
        w.erase(w.begin() + static_cast<std::ptrdiff_t>(k));
      }
    if (static_cast<int>(atoms.size()) > opt.max_atoms) caratheodory_reduce(atoms, w);
    double tot = 0.0;
    for (double x : w) tot += x;
    for (auto& x : w) x /= tot;
    const Mat4 next = build();
    const double nv = obj.value(next);
    if (nv <= val) {
      sigma = next;
      val = nv;
    } else {
      atoms = saved_atoms;
      w = saved_w;
    }
    history.push_back(val);
    res.iterations = it;
    if (it >= opt.window && history[it - opt.window] - val < opt.min_improvement) {
      res.converged = true;
      break;
    }
  }
  res.sigma = sigma;
  res.value = val;
  return res;
}

inline Vec4 random_product(Rng& rng) {
  Eigen::Vector2cd a, b;
  for (auto* v : {&a, &b}) {
    const double u = rng.uniform();
    (*v) << std::sqrt(u), std::polar(std::sqrt(1.0 - u), two_pi * rng.uniform());
  }
  Vec4 out;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) out(2 * i + j) = a(i) * b(j);
  return out;
}

}  // namespace detail

// min over separable sigma of S(rho||sigma), with certified bounds.
inline EntanglementReport relative_entropy_of_entanglement(const DensityMatrix& rho,
                                                           const EntanglementOptions& opt = {}) {
  if (rho.label().dim() != 4) throw std::invalid_argument("relative_entropy_of_entanglement: two-qubit states only");
  if (!rho.is_valid(1e-10)) throw std::invalid_argument("relative_entropy_of_entanglement: invalid density matrix");

  detail::SepObjective obj;
  obj.rho = rho.hermitian_part();
  obj.s_rho = entropy(rho);

  Rng rng(opt.seed);
  EntanglementReport rep;
  rep.rho = rho;
  rep.e_r = std::numeric_limits<double>::infinity();
  detail::FwResult best;
  for (int r = 0; r < opt.restarts; ++r) {
    std::vector<detail::Vec4> atoms;
    std::vector<double> w;
    // Computational product basis keeps the start full rank.
    for (int k = 0; k < 4; ++k) {
      detail::Vec4 v = detail::Vec4::Zero();
      v(k) = 1.0;
      atoms.push_back(v);
    }
    const int extra = r == 0 ? 0 : 4;
    for (int k = 0; k < extra; ++k) atoms.push_back(detail::random_product(rng));
    for (std::size_t k = 0; k < atoms.size(); ++k) w.push_back(1.0 / static_cast<double>(atoms.size()));
    auto res = detail::frank_wolfe(obj, atoms, w, opt, rng);
    rep.iterations += res.iterations;
    if (r == 0 || res.value < best.value) best = res;
  }
  rep.restarts = opt.restarts;
  const SpaceLabel lab = rho.label();
  rep.sigma = DensityMatrix(lab, Matrix(best.sigma));
  rep.e_r = std::max(0.0, best.value);
  rep.gap = best.gap;
  rep.converged = best.converged;
  rep.ppt_certified = is_ppt(rep.sigma);

  // Lower bounds: hashing-type entropy differences and the duality gap.
  const auto names_ = lab.factors();
  const double s = obj.s_rho;
  const double sa = entropy(partial_trace(rho, {names_[0].name}));
  const double sb = entropy(partial_trace(rho, {names_[1].name}));
  rep.lower_bound = std::max({0.0, sa - s, sb - s, best.value - best.gap});

  // Upper bound by convexity over the spectral decomposition of rho: a pure
  // state's relative entropy of entanglement is its entanglement entropy.
  Eigen::SelfAdjointEigenSolver<Matrix> es(rho.hermitian_part());
  double ub = 0.0;
  for (int k = 0; k < 4; ++k) {
    const double l = es.eigenvalues()(k);
    if (l <= 1e-15) continue;
    const PureState v(lab, es.eigenvectors().col(k));
    ub += l * entropy(partial_trace(v, {names_[0].name}));
  }
  // The optimizer's sigma is separable, so its value is an upper bound too.
  rep.upper_bound = std::min(ub, rep.e_r);
  rep.e_r = rep.upper_bound;
  return rep;
}

inline EntanglementReport entanglement_report(double t_d, double eta, const PhysicalParams& p,
                                              MixtureReading r = MixtureReading::as_printed,
                                              const EntanglementOptions& opt = {}) {
  auto rep = relative_entropy_of_entanglement(entangled_state(t_d, eta, p, r), opt);
  rep.eta = eta;
  rep.t_d = t_d;
  return rep;
}

}  // namespace qtel
