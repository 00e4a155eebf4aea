#include "qtel/model.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

namespace {

using namespace qtel;

const double pi = std::numbers::pi;

TEST(EffectiveParams, ReferenceCoupling) {
  const auto eff = effective_params(PhysicalParams::reference());
  EXPECT_NEAR(eff.E, two_pi * 1.0, 1e-12);
}

TEST(EffectiveParams, LosslessOscillationFrequency) {
  auto p = PhysicalParams::reference();
  p.kappa = 0.0;
  const auto eff = effective_params(p);
  EXPECT_DOUBLE_EQ(eff.omega_kappa, 2.0 * eff.E);
}

TEST(EffectiveParams, ReferenceOscillationRatio) {
  const auto p = PhysicalParams::reference();
  const auto eff = effective_params(p);
  const double E = p.g * p.omega / p.delta;
  EXPECT_NEAR(eff.omega_kappa, std::sqrt(4.0 * E * E - p.kappa * p.kappa), 1e-12);
  const double r = eff.omega_kappa / (2.0 * eff.E);
  EXPECT_GT(r, 0.9999);
  EXPECT_LT(r, 1.0);
}

TEST(EffectiveParams, LinearInG) {
  const auto p = PhysicalParams::from_mhz(10.0, 10.0, 0.01, 1.0, 100.0);
  const auto p2 = PhysicalParams::from_mhz(20.0, 10.0, 0.01, 1.0, 100.0);
  EXPECT_EQ(effective_params(p2).E, 2.0 * effective_params(p).E);
}

TEST(EffectiveParams, OverdampedThrows) {
  auto p = PhysicalParams::reference();
  p.kappa = 2.0 * effective_params(p).E + 1e-6;
  EXPECT_THROW(effective_params(p), RegimeError);
}

TEST(PhysicalParams, RejectsInvalid) {
  EXPECT_THROW(PhysicalParams::from_mhz(0.0, 10.0, 0.01, 1.0, 100.0), std::invalid_argument);
  EXPECT_THROW(PhysicalParams::from_mhz(10.0, 10.0, -0.01, 1.0, 100.0), std::invalid_argument);
  EXPECT_THROW(PhysicalParams::from_mhz(10.0, 10.0, 0.01, 1.0, 100.0, 1.0, 1.5), std::invalid_argument);
}

TEST(H1, CouplingMatrixElement) {
  const double E = 2.7;
  const auto h = hamiltonian_h1(E, "atom", "cav");
  // |e,0> = index 0, |g,1> = index 3
  EXPECT_EQ(h.matrix()(3, 0), cplx{E});
  EXPECT_EQ(h.matrix()(0, 3), cplx{E});
}

TEST(H1, HermitianAndBlockStructure) {
  const double E = 1.1;
  const auto h = hamiltonian_h1(E, "atom", "cav");
  EXPECT_TRUE(h.is_hermitian(1e-12));
  // |g,0> (index 2) is an eigenvector with eigenvalue E
  Vector g0 = Vector::Zero(4);
  g0(2) = 1.0;
  EXPECT_LT((h.matrix() * g0 - E * g0).norm(), 1e-15);
  // on span{|e,0>,|g,1>} it is E(I + sigma_x)
  EXPECT_EQ(h.matrix()(0, 0), cplx{E});
  EXPECT_EQ(h.matrix()(3, 3), cplx{E});
}

TEST(H1, LosslessHalfRabiFlop) {
  const double E = 1.9;
  const auto h = hamiltonian_h1(E, "atom", "cav");
  const auto out = evolve(PureState::basis(h.label(), {0, 0}), h, pi / (2.0 * E));
  EXPECT_NEAR(std::norm(out[3]), 1.0, 1e-12);
  // 2x2 oracle at kappa -> 0 carries the same amplitude
  const auto oracle = qtel::testing::jc_block_propagator(E, 0.0, pi / (2.0 * E));
  EXPECT_LT(std::abs(out[3] - oracle(1, 0)), 1e-12);
}

TEST(H2, QuarterPeriodGivesMinusI) {
  const double de = 0.8;
  const auto h = hamiltonian_h2(de, "atom");
  Vector v(2);
  v << 1.0, 1.0;
  const auto out = evolve(PureState(h.label(), v), h, pi / (2.0 * de));
  EXPECT_LT(std::abs(out[0] / out[1] - cplx{0.0, -1.0}), 1e-12);
}

TEST(H2, ZeroTimeIsIdentity) {
  const auto h = hamiltonian_h2(0.8, "atom");
  EXPECT_TRUE(propagator(h, 0.0).matrix().isIdentity(0.0));
}

TEST(H2, PhasesCompose) {
  const double de = 0.8, t = 0.41;
  const auto h = hamiltonian_h2(de, "atom");
  const Matrix twice = propagator(h, t).matrix() * propagator(h, t).matrix();
  EXPECT_LT((twice - propagator(h, 2.0 * t).matrix()).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_LT(std::abs(twice(0, 0) - std::exp(cplx{0.0, -2.0 * de * t})), 1e-13);
}

TEST(HEff, DetectionStageSurvival) {
  const double kappa = 0.2, t = 3.0;
  const SpaceLabel cav{{"cav", 2}};
  const auto a = h_eff(Operator::zero(cav), kappa, "cav");
  EXPECT_NEAR(evolve(PureState::basis(cav, {1}), a, t).norm_squared(), std::exp(-2.0 * kappa * t), 1e-14);
}

TEST(HEff, LosslessLeavesHamiltonian) {
  const auto h = hamiltonian_h1(1.0, "atom", "cav");
  EXPECT_EQ((h_eff(h, 0.0, "cav").matrix() - h.matrix()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(HEff, AntiHermitianPartIsPhotonNumber) {
  const double kappa = 0.37;
  const auto h = hamiltonian_h1(1.4, "atom", "cav");
  const Matrix a = h_eff(h, kappa, "cav").matrix();
  const Matrix anti = 0.5 * (a - a.adjoint());
  Matrix n = Matrix::Zero(4, 4);
  n(1, 1) = n(3, 3) = 1.0;
  EXPECT_LT((anti - cplx{0.0, -kappa} * n).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(HEff, BobDecayingBellNorm) {
  // (|e,0> + i|g,1>)/sqrt2 under pure decay keeps norm^2 (1 + e^{-2 kappa t})/2.
  const double kappa = 0.15;
  const SpaceLabel ac{{"atom", 2}, {"cav", 2}};
  Vector v = Vector::Zero(4);
  v(0) = 1.0 / std::numbers::sqrt2;
  v(3) = cplx{0.0, 1.0} / std::numbers::sqrt2;
  const auto a = h_eff(Operator::zero(ac), kappa, "cav");
  for (double t : {0.5, 2.0, 10.0})
    EXPECT_NEAR(evolve(PureState(ac, v), a, t).norm_squared(), (1.0 + std::exp(-2.0 * kappa * t)) / 2.0, 1e-14);
}

TEST(JumpOperators, ActionOnSinglePhoton) {
  const SpaceLabel ab{{"A", 2}, {"B", 2}};
  const auto [jp, jm] = jump_operators(ab, "A", "B");
  const auto out = jp.apply(PureState::basis(ab, {1, 0}));
  EXPECT_NEAR(out[0].real(), 1.0 / std::numbers::sqrt2, 1e-15);
  EXPECT_NEAR(out.norm_squared(), 0.5, 1e-15);
  (void)jm;
}

TEST(JumpOperators, MinusDetectorBlindToSymmetricState) {
  const SpaceLabel ab{{"A", 2}, {"B", 2}};
  const auto [jp, jm] = jump_operators(ab, "A", "B");
  Vector v = Vector::Zero(4);
  v(2) = v(1) = 1.0 / std::numbers::sqrt2;
  EXPECT_LT(jm.apply(PureState(ab, v)).norm(), 1e-15);
  EXPECT_NEAR(jp.apply(PureState(ab, v)).norm_squared(), 1.0, 1e-15);
}

TEST(JumpOperators, CompletenessIsTotalPhotonNumber) {
  const SpaceLabel full{{"atom1", 2}, {"cavA", 2}, {"atom2", 2}, {"cavB", 2}};
  const auto [jp, jm] = jump_operators(full, "cavA", "cavB");
  const Matrix sum = jp.matrix().adjoint() * jp.matrix() + jm.matrix().adjoint() * jm.matrix();
  const Matrix n = embed(ops::number("cavA"), full).matrix() + embed(ops::number("cavB"), full).matrix();
  EXPECT_LT((sum - n).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ValidateRegime, ReferenceParametersPass) {
  const auto p = PhysicalParams::reference();
  EXPECT_TRUE(validate_regime(p).empty());
  EXPECT_NEAR(p.g * p.omega / (p.delta * p.delta), 0.01, 1e-15);
  EXPECT_NEAR(p.delta / p.gamma, 100.0, 1e-12);
  const auto eff = effective_params(p);
  EXPECT_NEAR(eff.omega_kappa / p.kappa, 200.0, 0.01);
}

TEST(ValidateRegime, DetuningComparableToLinewidth) {
  const auto p = PhysicalParams::from_mhz(10.0, 10.0, 0.01, 100.0, 100.0);
  const auto w = validate_regime(p);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_EQ(w[0].constraint, "Delta >> gamma");
}

TEST(ValidateRegime, DecayComparableToCoupling) {
  auto p = PhysicalParams::reference();
  p.kappa = effective_params(p).E;
  const auto w = validate_regime(p);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_EQ(w[0].constraint, "Omega_kappa >> kappa");
  EXPECT_NEAR(w[0].value, std::sqrt(3.0), 1e-12);
}

}  // namespace
