#pragma once

// Helpers shared by the test binaries. Everything here is computed by hand
// (explicit loops, hand-solved closed forms) so it can serve as an oracle for
// the library routines it is compared against.

#include "qtel/dynamics.hpp"
#include "qtel/hilbert.hpp"
#include "qtel/model.hpp"

#include <cmath>
#include <complex>
#include <vector>

namespace qtel::testing {

inline Vector random_vector(Eigen::Index n, Rng& rng) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = cplx{rng.uniform() - 0.5, rng.uniform() - 0.5};
  return v;
}

inline PureState random_state(const SpaceLabel& lab, Rng& rng) {
  return PureState(lab, random_vector(lab.dim(), rng)).normalized();
}

inline DensityMatrix random_density(const SpaceLabel& lab, Rng& rng) {
  const Eigen::Index d = lab.dim();
  Matrix g(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) g(i, j) = cplx{rng.uniform() - 0.5, rng.uniform() - 0.5};
  Matrix m = g * g.adjoint();
  return {lab, m / m.trace().real()};
}

// Kronecker product by explicit index arithmetic.
inline Vector kron_loop(const Vector& a, const Vector& b) {
  Vector out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i)
    for (Eigen::Index j = 0; j < b.size(); ++j) out(i * b.size() + j) = a(i) * b(j);
  return out;
}

// exp(-i M t) for M = [[0, E], [E, -i kappa]], the H1 - i kappa n block on
// span{|e,0>, |g,1>} with the common E shift removed. Writing
// M = -i kappa/2 + N with N^2 = (Omega_k/2)^2 gives the closed form below.
inline Eigen::Matrix2cd jc_block_propagator(double E, double kappa, double t) {
  const double w = std::sqrt(4.0 * E * E - kappa * kappa);
  Eigen::Matrix2cd n;
  n << cplx{0.0, kappa / 2.0}, E, E, cplx{0.0, -kappa / 2.0};
  const double c = std::cos(w * t / 2.0), s = std::sin(w * t / 2.0);
  Eigen::Matrix2cd out = c * Eigen::Matrix2cd::Identity() - cplx{0.0, 1.0} * (2.0 / w) * s * n;
  return std::exp(cplx{-kappa * t / 2.0, -E * t}) * out;
}

// |<a|b>|^2 over normalized vectors, by hand.
inline double overlap_loop(const Vector& a, const Vector& b) {
  cplx acc = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) acc += std::conj(a(i)) * b(i);
  return std::norm(acc) / (a.squaredNorm() * b.squaredNorm());
}

}  // namespace qtel::testing
