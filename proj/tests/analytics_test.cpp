#include "qtel/analytics.hpp"

#include "qtel/protocol.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

namespace {

using namespace qtel;

const PhysicalParams ref = PhysicalParams::reference();

PhysicalParams lossless() {
  auto p = ref;
  p.kappa = 0.0;
  return p;
}

// E_R of w|psi+><psi+| + (1-w)|gg><gg|, a known closed form for this family.
double e_r_bell_plus_ground(double w) {
  if (w >= 1.0) return 1.0;
  return (w - 2.0) * std::log2(1.0 - w / 2.0) + (1.0 - w) * std::log2(1.0 - w);
}

DensityMatrix bell_plus_ground(double w) {
  const SpaceLabel pair{{"x", 2}, {"y", 2}};
  Matrix m = Matrix::Zero(4, 4);
  m(1, 1) = m(2, 2) = m(1, 2) = m(2, 1) = w / 2.0;
  m(3, 3) = 1.0 - w;
  return {pair, m};
}

TEST(Alpha, LosslessLimit) {
  EXPECT_NEAR(alpha(lossless()), 1.0, 1e-12);
  EXPECT_NEAR(beta(lossless()), 1.0, 1e-12);
}

TEST(Alpha, MatchesNumericMapping) {
  const double numeric = std::sqrt(prepare_alice(InputQubit(1.0, 0.0), ref).survival);
  EXPECT_NEAR(alpha(ref), 0.992, 5e-4);
  EXPECT_LT(std::abs(alpha(ref) - numeric) / numeric, 1e-6);
}

TEST(Beta, SquareMatchesBobSurvival) {
  const double numeric = prepare_bob(ref).survival;
  EXPECT_LT(std::abs(p_nd_bob(ref) - numeric) / numeric, 1e-6);
}

TEST(PndReadings, DifferByLessThanAlphaGap) {
  const double al = alpha(ref);
  Rng rng(2);
  for (int k = 0; k < 50; ++k) {
    const auto q = InputQubit::haar(rng);
    const double d = std::abs(p_nd_alice(q, ref, PndReading::as_printed) - p_nd_alice(q, ref, PndReading::as_norm));
    EXPECT_NEAR(d, q.pop_e() * al * (1.0 - al), 1e-15);
    EXPECT_LE(d, std::abs(al - al * al) + 1e-15);
  }
  EXPECT_LE(std::abs(al - al * al), 0.01);
}

TEST(TeleportedRho, LongDetectionRemovesContamination) {
  const InputQubit q(0.6, 0.8);
  const auto rho = teleported_rho(1e6, q, ref);
  Vector psi(2);
  psi << q.a * alpha(ref), q.b;
  EXPECT_NEAR(fidelity(rho, PureState(atom_qubit(names::atom2), psi.normalized())), 1.0, 1e-12);
}

TEST(TeleportedRho, GroundInputIsExact) {
  const InputQubit q(0.0, 1.0);
  const auto rho = teleported_rho(3.0, q, ref);
  EXPECT_NEAR(rho(1, 1).real(), 1.0, 1e-15);
  EXPECT_NEAR(fidelity_closed_form(3.0, q, ref), 1.0, 1e-15);
  EXPECT_NEAR(fidelity_first_principles(3.0, q, ref), 1.0, 1e-15);
}

TEST(TeleportedRho, UnitTraceBothReadings) {
  Rng rng(6);
  for (int k = 0; k < 20; ++k) {
    const auto q = InputQubit::haar(rng);
    for (auto r : {PndReading::as_printed, PndReading::as_norm}) {
      const auto rho = teleported_rho(10.0 * rng.uniform(), q, ref, r);
      EXPECT_NEAR(rho.trace(), 1.0, 1e-14);
      EXPECT_TRUE(rho.is_valid(1e-12));
    }
  }
}

TEST(FidelityClosedForm, GroundInputIsPerfect) {
  for (double t : {0.0, 1.0, 50.0}) EXPECT_NEAR(fidelity_closed_form(t, InputQubit(0.0, 1.0), ref), 1.0, 1e-15);
}

TEST(FidelityClosedForm, IdealLimit) {
  const auto p = PhysicalParams::from_mhz(10.0, 10.0, 1e-7, 1.0, 100.0);
  EXPECT_NEAR(fidelity_closed_form(1e10, InputQubit::normalized(1.0, 1.0), p), 1.0, 1e-6);
}

TEST(FidelityClosedForm, FirstPrinciplesMatchesHandFormula) {
  // <in|rho|in> with rho built by hand from the two weights.
  Rng rng(10);
  const double al = alpha(ref);
  for (int k = 0; k < 20; ++k) {
    const auto q = InputQubit::haar(rng);
    const double t = 40.0 * rng.uniform();
    const double nd = q.pop_e() * al * al + q.pop_g();
    const double c = 2.0 * q.pop_e() * al * al * std::exp(-2.0 * ref.kappa * t);
    const double amp = std::norm(std::conj(q.a) * q.a * al + std::conj(q.b) * q.b);  // |<in|Psi>|^2 * nd
    EXPECT_NEAR(fidelity_first_principles(t, q, ref), (amp + c * q.pop_g()) / (nd + c), 1e-13);
  }
}

TEST(FidelityClosedForm, MonotoneInDetectionTime) {
  Rng rng(12);
  for (int k = 0; k < 10; ++k) {
    const auto q = InputQubit::haar(rng);
    double lf = -1.0, lfp = -1.0;
    for (int i = 0; i < 50; ++i) {
      const double t = 50.0 * i / 49.0;
      const double f = fidelity_closed_form(t, q, ref), fp = fidelity_first_principles(t, q, ref);
      EXPECT_GE(f, lf - 1e-15);
      EXPECT_GE(fp, lfp - 1e-15);
      lf = f;
      lfp = fp;
    }
  }
}

TEST(Quadrature, ClosedFormMoments) {
  EXPECT_NEAR(average_over_inputs([](const InputQubit&) { return 1.0; }), 1.0, 1e-14);
  EXPECT_NEAR(average_over_inputs([](const InputQubit& q) { return q.pop_e() * q.pop_g(); }), 1.0 / 6.0, 1e-14);
  EXPECT_NEAR(average_over_inputs([](const InputQubit& q) { return std::exp(q.pop_e()); }), std::numbers::e - 1.0,
              1e-10);
  EXPECT_NEAR(average_over_inputs([](const InputQubit& q) { return std::pow(q.pop_e(), 40); }), 1.0 / 41.0, 1e-12);
}

TEST(Quadrature, FivePointRule) {
  // Nodes of P_5 on [-1, 1]: 0, +-sqrt(5 -+ 2 sqrt(10/7))/3.
  const auto r = gauss_legendre(5);
  const double x1 = std::sqrt(5.0 - 2.0 * std::sqrt(10.0 / 7.0)) / 3.0;
  const double x2 = std::sqrt(5.0 + 2.0 * std::sqrt(10.0 / 7.0)) / 3.0;
  EXPECT_NEAR(r.nodes[2], 0.5, 1e-15);
  EXPECT_NEAR(r.nodes[3], 0.5 * (1.0 + x1), 1e-15);
  EXPECT_NEAR(r.nodes[4], 0.5 * (1.0 + x2), 1e-15);
  EXPECT_NEAR(r.weights[2], 0.5 * 128.0 / 225.0, 1e-15);
  double s = 0.0;
  for (double w : haar_rule().weights) s += w;
  EXPECT_NEAR(s, 1.0, 1e-14);
}

TEST(Quadrature, AgreesWithHaarSampling) {
  Rng rng(30);
  double acc = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) acc += fidelity_first_principles(5.0, InputQubit::haar(rng), ref);
  EXPECT_NEAR(acc / n, average_fidelity(5.0, ref, false), 3e-3);
}

TEST(AverageFidelity, SweepIsMonotoneAndEndsAbove099) {
  double last = -1.0;
  for (int i = 0; i < 50; ++i) {
    const double t = 50.0 * i / 49.0;
    const double f = average_fidelity(t, ref);
    EXPECT_GE(f, last - 1e-15);
    last = f;
  }
  EXPECT_GT(last, 0.99);
  EXPECT_GT(average_fidelity(50.0, ref, false, false), 0.99);
}

TEST(AverageFidelity, FiniteAtZeroDetectionTime) {
  EXPECT_TRUE(std::isfinite(average_fidelity(0.0, ref)));
  EXPECT_GT(heralding_weight(0.0, InputQubit(0.6, 0.8), ref, 0.0), 0.0);
}

TEST(Probabilities, ZeroWindowHasNoSuccess) {
  EXPECT_EQ(p_success(0.0, InputQubit(0.6, 0.8), ref), 0.0);
}

TEST(Probabilities, HaarSuccessNearHalf) {
  const double as_norm = average_over_inputs([](const InputQubit& q) { return p_success(50.0, q, ref); });
  const double as_printed =
      average_over_inputs([](const InputQubit& q) { return p_success(50.0, q, ref, PndReading::as_printed); });
  EXPECT_NEAR(as_norm, 0.49, 0.01);
  EXPECT_NEAR(as_printed, 0.49, 0.01);
  EXPECT_NEAR(average_p_success(50.0, ref, 1.0), as_norm, 1e-12);
}

TEST(Probabilities, DetectionOutcomesPartitionUnity) {
  Rng rng(14);
  for (int k = 0; k < 20; ++k) {
    const auto q = InputQubit::haar(rng);
    const double t = 60.0 * rng.uniform();
    for (auto r : {PndReading::as_printed, PndReading::as_norm})
      EXPECT_NEAR(p_no_decay(t, q, ref, r) + p_one_decay(t, q, ref, r) + p_two_decays(t, q, ref, r), 1.0, 1e-14);
  }
}

TEST(Probabilities, IndependentCavityCounting) {
  // Alice's cavity holds a photon with probability pa, Bob's with 1/2; each
  // photon leaks within t with probability 1 - e^{-2 kappa t} independently.
  const double al = alpha(ref);
  Rng rng(16);
  for (int k = 0; k < 20; ++k) {
    const auto q = InputQubit::haar(rng);
    const double t = 60.0 * rng.uniform();
    const double pa = q.pop_e() * al * al / (q.pop_e() * al * al + q.pop_g()), pb = 0.5;
    const double x = -std::expm1(-2.0 * ref.kappa * t);
    const double n0 = (1.0 - pa * x) * (1.0 - pb * x);
    const double n2 = pa * pb * x * x;
    EXPECT_NEAR(p_no_decay(t, q, ref), n0, 1e-14);
    EXPECT_NEAR(p_two_decays(t, q, ref), n2, 1e-14);
    EXPECT_NEAR(p_one_decay(t, q, ref), 1.0 - n0 - n2, 1e-14);
  }
}

TEST(Probabilities, NoDecayIsNormOfEvolvedJointState) {
  const InputQubit q(0.6, 0.8);
  const auto joint = tensor(prepare_alice(q, ref).atom_cavity, prepare_bob(ref).atom_cavity);
  const auto gen = h_eff(Operator::zero(joint.label()), ref.kappa, {names::cav_a, names::cav_b});
  for (double t : {1.0, 10.0, 50.0}) EXPECT_NEAR(no_jump_evolve(joint, gen, t).survival, p_no_decay(t, q, ref), 1e-12);
}

TEST(Probabilities, ClickCountsAgainstMonteCarlo) {
  const InputQubit q(0.6, 0.8);
  const double t_d = 25.0;
  const auto setup = ProtocolSetup::teleportation(ref, t_d);
  const auto joint = tensor(prepare_alice(q, ref).atom_cavity, prepare_bob(ref).atom_cavity);
  const int n = 10000;
  std::array<int, 3> counts{};
  for (int i = 0; i < n; ++i) {
    Rng rng(trajectory_seed(123, static_cast<std::uint64_t>(i)));
    ++counts[std::min(2, detection_stage(joint, setup, 1.0, rng).actual_jumps)];
  }
  const std::array<double, 3> expect{p_no_decay(t_d, q, ref), p_one_decay(t_d, q, ref), p_two_decays(t_d, q, ref)};
  for (int k = 0; k < 3; ++k) {
    const double f = static_cast<double>(counts[k]) / n;
    EXPECT_LT(std::abs(f - expect[k]), 3.0 * std::sqrt(expect[k] * (1.0 - expect[k]) / n)) << "k=" << k;
  }
}

TEST(Efficiency, UnitEfficiencyReducesToIdealFormulas) {
  Rng rng(18);
  for (int k = 0; k < 10; ++k) {
    const auto q = InputQubit::haar(rng);
    const double t = 50.0 * rng.uniform();
    const auto fp = efficiency_corrected(t, q, ref, 1.0);
    EXPECT_NEAR(fp.f_eta, fidelity_first_principles(t, q, ref), 1e-14);
    EXPECT_NEAR(fp.p_suc_eta, p_success(t, q, ref), 1e-14);
    const auto pr = efficiency_corrected(t, q, ref, 1.0, false);
    EXPECT_NEAR(pr.f_eta, fidelity_closed_form(t, q, ref), 1e-14);
    EXPECT_NEAR(pr.p_suc_eta, p_success(t, q, ref, PndReading::as_printed), 1e-14);
  }
  // The window-closed limit is taken, not 0/0.
  const InputQubit q(0.6, 0.8);
  EXPECT_NEAR(efficiency_corrected(0.0, q, ref, 1.0).f_eta, fidelity_first_principles(0.0, q, ref), 1e-14);
  EXPECT_NEAR(average_f_eta(0.0, ref, 1.0), average_fidelity(0.0, ref), 1e-14);
}

TEST(Efficiency, HaarAverageAtSixtyPercent) {
  EXPECT_NEAR(average_f_eta(50.0, ref, 0.6), 0.81, 0.01);
}

TEST(Efficiency, MonotoneInEta) {
  double last = -1.0;
  for (int i = 0; i <= 20; ++i) {
    const double f = average_f_eta(50.0, ref, i / 20.0);
    EXPECT_GE(f, last - 1e-15);
    last = f;
  }
  EXPECT_NEAR(last, average_fidelity(50.0, ref), 1e-14);
}

TEST(Efficiency, RejectsOutOfRangeEta) {
  EXPECT_THROW(efficiency_corrected(1.0, InputQubit(0.6, 0.8), ref, 1.2), std::invalid_argument);
  EXPECT_THROW(efficiency_corrected(1.0, InputQubit(0.6, 0.8), ref, -0.1), std::invalid_argument);
}

TEST(PostJumpState, NormalizedAndPhaseSensitive) {
  const auto q = InputQubit::normalized({0.5, 0.2}, {0.3, -0.7});
  for (Detector d : {Detector::plus, Detector::minus}) {
    const auto pc = post_jump_state(q, ref, 3.0, d);
    const auto lit = post_jump_state(q, ref, 3.0, d, PostJumpForm::literal);
    EXPECT_NEAR(pc.norm_squared(), 1.0, 1e-14);
    EXPECT_NEAR(lit.norm_squared(), 1.0, 1e-14);
    EXPECT_LT(overlap(pc, lit), 1.0 - 1e-3);
    // Bob's atom is the same either way
    EXPECT_LT(trace_distance(partial_trace(pc, {names::atom2}), partial_trace(lit, {names::atom2})), 1e-14);
  }
}

TEST(EntangledState, UnitEfficiencyIsBell) {
  Vector bell = Vector::Zero(4);
  bell(1) = bell(2) = 1.0 / std::numbers::sqrt2;
  const auto printed = entangled_state(7.0, 1.0, ref, MixtureReading::as_printed);
  EXPECT_NEAR(fidelity(printed, PureState(printed.label(), bell)), 1.0, 1e-14);
  // Physically, a photon still in its cavity at t_D leaves |gg> weight behind;
  // the Bell fraction is 1/(2-q) with q = 1 - exp(-2 kappa t_D).
  const double q = -std::expm1(-2.0 * ref.kappa * 7.0);
  const auto early = entangled_state(7.0, 1.0, ref, MixtureReading::first_principles);
  EXPECT_NEAR(fidelity(early, PureState(early.label(), bell)), 1.0 / (2.0 - q), 1e-13);
  const auto late = entangled_state(400.0, 1.0, ref, MixtureReading::first_principles);
  EXPECT_NEAR(fidelity(late, PureState(late.label(), bell)), 1.0, 1e-10);
}

TEST(EntangledState, BellFractionLongWindow) {
  const double eta = 0.6;
  const auto fp = entangled_state(1e5, eta, ref, MixtureReading::first_principles);
  EXPECT_NEAR(fp(1, 2).real() * 2.0, 1.0 / (2.0 - eta), 1e-12);
  EXPECT_NEAR(1.0 / (2.0 - eta), 0.714, 1e-3);
  const auto pr = entangled_state(1e5, eta, ref, MixtureReading::as_printed);
  EXPECT_NEAR(pr(1, 2).real() * 2.0, 1.0 / (3.0 - 2.0 * eta), 1e-12);
  EXPECT_NEAR(pr.trace(), 1.0, 1e-15);
}

TEST(EntangledState, NoHeraldAtZeroEfficiency) {
  EXPECT_THROW(entangled_state(10.0, 0.0, ref), std::domain_error);
}

TEST(RelativeEntropy, BasicValues) {
  Rng rng(20);
  const SpaceLabel q{{"q", 2}};
  const auto rho = qtel::testing::random_density(q, rng);
  EXPECT_NEAR(relative_entropy(rho, rho), 0.0, 1e-12);
  const auto zero = DensityMatrix::from_pure(PureState::basis(q, {0}));
  EXPECT_NEAR(relative_entropy(zero, DensityMatrix::maximally_mixed(q)), 1.0, 1e-14);
  EXPECT_TRUE(std::isinf(relative_entropy(DensityMatrix::maximally_mixed(q), zero)));
}

TEST(RelativeEntropy, JointConvexity) {
  Rng rng(22);
  const SpaceLabel lab{{"a", 2}, {"b", 2}};
  for (int k = 0; k < 20; ++k) {
    const auto r1 = qtel::testing::random_density(lab, rng), r2 = qtel::testing::random_density(lab, rng);
    const auto s1 = qtel::testing::random_density(lab, rng), s2 = qtel::testing::random_density(lab, rng);
    const double l = rng.uniform();
    const DensityMatrix rm(lab, l * r1.matrix() + (1.0 - l) * r2.matrix());
    const DensityMatrix sm(lab, l * s1.matrix() + (1.0 - l) * s2.matrix());
    EXPECT_LE(relative_entropy(rm, sm), l * relative_entropy(r1, s1) + (1.0 - l) * relative_entropy(r2, s2) + 1e-12);
    EXPECT_GE(relative_entropy(r1, s1), 0.0);
  }
}

TEST(EntanglementMeasure, BellStateIsOneEbit) {
  const auto rep = relative_entropy_of_entanglement(bell_plus_ground(1.0));
  EXPECT_NEAR(rep.e_r, 1.0, 0.01);
  EXPECT_TRUE(rep.ppt_certified);
}

TEST(EntanglementMeasure, MaximallyMixedIsSeparable) {
  const auto rep = relative_entropy_of_entanglement(DensityMatrix::maximally_mixed(SpaceLabel{{"x", 2}, {"y", 2}}));
  EXPECT_NEAR(rep.e_r, 0.0, 1e-4);
}

TEST(EntanglementMeasure, MatchesClosedFormFamily) {
  for (double w : {0.3, 0.556, 0.75, 0.9}) {
    const auto rep = relative_entropy_of_entanglement(bell_plus_ground(w));
    EXPECT_NEAR(rep.e_r, e_r_bell_plus_ground(w), 1e-3) << "w=" << w;
    EXPECT_LE(rep.lower_bound, rep.e_r);
    EXPECT_GE(rep.upper_bound, rep.e_r);
    EXPECT_TRUE(rep.ppt_certified);
  }
}

TEST(EntanglementMeasure, ReportedDetectionEfficiencies) {
  const auto r6 = entanglement_report(50.0, 0.6, ref);
  const auto r9 = entanglement_report(50.0, 0.9, ref);
  EXPECT_NEAR(r6.e_r, 0.16, 0.05);
  EXPECT_NEAR(r9.e_r, 0.48, 0.05);
  for (const auto& r : {r6, r9}) {
    EXPECT_LE(r.lower_bound, r.e_r);
    EXPECT_GE(r.upper_bound, r.e_r);
    EXPECT_TRUE(r.converged);
    // entropy lower bound S(rho_A) - S(rho)
    const double sa = entropy(partial_trace(r.rho, {names::atom1}));
    EXPECT_GE(r.e_r, std::max(0.0, sa - entropy(r.rho)) - 1e-6);
  }
}

TEST(EntanglementMeasure, PositiveForAnyEfficiency) {
  for (double eta : {0.05, 0.3}) EXPECT_GT(entanglement_report(50.0, eta, ref).e_r, 0.0);
}

}  // namespace
