#pragma once

// Dense complex linear algebra over small labeled tensor-product spaces.
//
// Basis convention used throughout the library:
//   atom:   |e> -> index 0, |g> -> index 1
//   cavity: |0> -> index 0, |1> -> index 1
// Factor order in the joint register is the order of the SpaceLabel; the
// first factor is the most significant digit of the flat index.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qtel {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr cplx I_unit{0.0, 1.0};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Factor {
  std::string name;
  int dim = 2;

  friend bool operator==(const Factor&, const Factor&) = default;
};

class SpaceLabel {
 public:
  SpaceLabel() = default;
  SpaceLabel(std::initializer_list<Factor> factors)
      : SpaceLabel(std::vector<Factor>(factors)) {}
  explicit SpaceLabel(std::vector<Factor> factors) : factors_(std::move(factors)) {
    for (std::size_t i = 0; i < factors_.size(); ++i) {
      if (factors_[i].dim < 2)
        throw std::invalid_argument("factor '" + factors_[i].name + "' has dimension < 2");
      for (std::size_t j = 0; j < i; ++j)
        if (factors_[j].name == factors_[i].name)
          throw std::invalid_argument("duplicate factor name '" + factors_[i].name + "'");
    }
  }

  const std::vector<Factor>& factors() const { return factors_; }
  std::size_t size() const { return factors_.size(); }

  Eigen::Index dim() const {
    Eigen::Index d = 1;
    for (const auto& f : factors_) d *= f.dim;
    return d;
  }

  bool contains(const std::string& name) const { return find(name) >= 0; }

  int find(const std::string& name) const {
    for (std::size_t i = 0; i < factors_.size(); ++i)
      if (factors_[i].name == name) return static_cast<int>(i);
    return -1;
  }

  std::size_t index_of(const std::string& name) const {
    int i = find(name);
    if (i < 0) throw std::invalid_argument("unknown factor '" + name + "'");
    return static_cast<std::size_t>(i);
  }

  // Stride of a factor's digit in the flat index.
  Eigen::Index stride(std::size_t pos) const {
    Eigen::Index s = 1;
    for (std::size_t i = pos + 1; i < factors_.size(); ++i) s *= factors_[i].dim;
    return s;
  }

  std::vector<int> digits(Eigen::Index flat) const {
    std::vector<int> d(factors_.size());
    for (std::size_t i = factors_.size(); i-- > 0;) {
      d[i] = static_cast<int>(flat % factors_[i].dim);
      flat /= factors_[i].dim;
    }
    return d;
  }

  friend SpaceLabel concat(const SpaceLabel& a, const SpaceLabel& b) {
    std::vector<Factor> f = a.factors_;
    f.insert(f.end(), b.factors_.begin(), b.factors_.end());
    return SpaceLabel(std::move(f));
  }

  friend bool operator==(const SpaceLabel&, const SpaceLabel&) = default;

 private:
  std::vector<Factor> factors_;
};

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

class PureState {
 public:
  PureState() = default;
  PureState(SpaceLabel label, Vector amps) : label_(std::move(label)), amps_(std::move(amps)) {
    if (amps_.size() != label_.dim())
      throw std::invalid_argument("amplitude vector length does not match space dimension");
  }

  // Computational basis state from one digit per factor.
  static PureState basis(SpaceLabel label, const std::vector<int>& digits) {
    if (digits.size() != label.size()) throw std::invalid_argument("basis: digit count mismatch");
    Eigen::Index flat = 0;
    for (std::size_t i = 0; i < digits.size(); ++i) {
      if (digits[i] < 0 || digits[i] >= label.factors()[i].dim)
        throw std::invalid_argument("basis: digit out of range");
      flat = flat * label.factors()[i].dim + digits[i];
    }
    Vector v = Vector::Zero(label.dim());
    v(flat) = 1.0;
    return {std::move(label), std::move(v)};
  }

  const SpaceLabel& label() const { return label_; }
  const Vector& amplitudes() const { return amps_; }
  cplx operator[](Eigen::Index i) const { return amps_(i); }

  double norm_squared() const { return amps_.squaredNorm(); }
  double norm() const { return amps_.norm(); }
  bool is_normalized(double tol = 1e-12) const { return std::abs(norm_squared() - 1.0) < tol; }

  PureState normalized() const {
    double n = norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw NumericalError("cannot normalize a zero or non-finite state");
    return {label_, amps_ / n};
  }

  PureState scaled(cplx s) const { return {label_, amps_ * s}; }

 private:
  SpaceLabel label_;
  Vector amps_;
};

class Operator {
 public:
  Operator() = default;
  Operator(SpaceLabel label, Matrix m) : label_(std::move(label)), m_(std::move(m)) {
    if (m_.rows() != label_.dim() || m_.cols() != label_.dim())
      throw std::invalid_argument("operator shape does not match space dimension");
  }

  static Operator identity(SpaceLabel label) {
    auto d = label.dim();
    return {std::move(label), Matrix::Identity(d, d)};
  }
  static Operator zero(SpaceLabel label) {
    auto d = label.dim();
    return {std::move(label), Matrix::Zero(d, d)};
  }

  const SpaceLabel& label() const { return label_; }
  const Matrix& matrix() const { return m_; }

  Operator adjoint() const { return {label_, m_.adjoint()}; }
  bool is_hermitian(double tol = 1e-12) const { return (m_ - m_.adjoint()).cwiseAbs().maxCoeff() <= tol; }

  PureState apply(const PureState& psi) const {
    if (!(psi.label() == label_)) throw std::invalid_argument("operator/state space mismatch");
    return {label_, m_ * psi.amplitudes()};
  }

  friend Operator operator+(const Operator& a, const Operator& b) {
    require_same(a, b);
    return {a.label_, a.m_ + b.m_};
  }
  friend Operator operator-(const Operator& a, const Operator& b) {
    require_same(a, b);
    return {a.label_, a.m_ - b.m_};
  }
  friend Operator operator*(const Operator& a, const Operator& b) {
    require_same(a, b);
    return {a.label_, a.m_ * b.m_};
  }
  friend Operator operator*(cplx s, const Operator& a) { return {a.label_, s * a.m_}; }

 private:
  static void require_same(const Operator& a, const Operator& b) {
    if (!(a.label_ == b.label_)) throw std::invalid_argument("operator space mismatch");
  }

  SpaceLabel label_;
  Matrix m_;
};

class DensityMatrix {
 public:
  DensityMatrix() = default;
  DensityMatrix(SpaceLabel label, Matrix m) : label_(std::move(label)), m_(std::move(m)) {
    if (m_.rows() != label_.dim() || m_.cols() != label_.dim())
      throw std::invalid_argument("density matrix shape does not match space dimension");
  }

  static DensityMatrix from_pure(const PureState& psi) {
    return {psi.label(), psi.amplitudes() * psi.amplitudes().adjoint()};
  }

  static DensityMatrix maximally_mixed(SpaceLabel label) {
    auto d = label.dim();
    return {std::move(label), Matrix::Identity(d, d) / static_cast<double>(d)};
  }

  const SpaceLabel& label() const { return label_; }
  const Matrix& matrix() const { return m_; }
  cplx operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

  double trace() const { return m_.trace().real(); }

  DensityMatrix normalized() const {
    double t = trace();
    if (!(t > 0.0)) throw NumericalError("density matrix has non-positive trace");
    return {label_, m_ / t};
  }

  Eigen::VectorXd eigenvalues() const {
    Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian_part(), Eigen::EigenvaluesOnly);
    return es.eigenvalues();
  }

  bool is_valid(double tol = 1e-10) const {
    if ((m_ - m_.adjoint()).cwiseAbs().maxCoeff() > tol) return false;
    if (eigenvalues().minCoeff() < -tol) return false;
    return std::abs(trace() - 1.0) <= tol;
  }

  Matrix hermitian_part() const { return 0.5 * (m_ + m_.adjoint()); }

 private:
  SpaceLabel label_;
  Matrix m_;
};

// ---------------------------------------------------------------------------
// tensor products

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline Vector kron(const Vector& a, const Vector& b) {
  Vector out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

inline PureState tensor(const PureState& a, const PureState& b) {
  return {concat(a.label(), b.label()), kron(a.amplitudes(), b.amplitudes())};
}

inline Operator tensor(const Operator& a, const Operator& b) {
  return {concat(a.label(), b.label()), kron(a.matrix(), b.matrix())};
}

inline DensityMatrix tensor(const DensityMatrix& a, const DensityMatrix& b) {
  return {concat(a.label(), b.label()), kron(a.matrix(), b.matrix())};
}

// ---------------------------------------------------------------------------
// embedding and reordering

// Lift `op` (acting on a subset of factors, in any order) to `target`, acting
// as the identity on every other factor.
inline Operator embed(const Operator& op, const SpaceLabel& target) {
  const auto& sub = op.label();
  std::vector<std::size_t> pos(sub.size());
  for (std::size_t k = 0; k < sub.size(); ++k) {
    int p = target.find(sub.factors()[k].name);
    if (p < 0) throw std::invalid_argument("embed: unknown factor '" + sub.factors()[k].name + "'");
    if (target.factors()[p].dim != sub.factors()[k].dim)
      throw std::invalid_argument("embed: dimension mismatch for '" + sub.factors()[k].name + "'");
    pos[k] = static_cast<std::size_t>(p);
  }

  const Eigen::Index d = target.dim();
  Matrix out = Matrix::Zero(d, d);
  const Matrix& m = op.matrix();
  for (Eigen::Index col = 0; col < d; ++col) {
    auto cd = target.digits(col);
    Eigen::Index sub_col = 0;
    for (std::size_t k = 0; k < sub.size(); ++k) sub_col = sub_col * sub.factors()[k].dim + cd[pos[k]];
    // Column index with the op's factors zeroed out.
    Eigen::Index base = col;
    for (std::size_t k = 0; k < sub.size(); ++k) base -= cd[pos[k]] * target.stride(pos[k]);
    for (Eigen::Index sub_row = 0; sub_row < m.rows(); ++sub_row) {
      const cplx v = m(sub_row, sub_col);
      if (v == cplx{}) continue;
      Eigen::Index rem = sub_row;
      Eigen::Index row = base;
      for (std::size_t k = sub.size(); k-- > 0;) {
        const int fd = sub.factors()[k].dim;
        row += (rem % fd) * target.stride(pos[k]);
        rem /= fd;
      }
      out(row, col) += v;
    }
  }
  return {target, std::move(out)};
}

inline Operator embed(const Operator& op, const std::string& factor, const SpaceLabel& target) {
  if (op.label().size() != 1 || op.label().factors()[0].name != factor) {
    if (op.label().size() != 1) throw std::invalid_argument("embed: operator must act on a single factor");
    return embed(Operator(SpaceLabel{{factor, op.label().factors()[0].dim}}, op.matrix()), target);
  }
  return embed(op, target);
}

// Permute a state's factors into the order of `target` (same factor set).
inline PureState reorder(const PureState& psi, const SpaceLabel& target) {
  const auto& src = psi.label();
  if (src.size() != target.size()) throw std::invalid_argument("reorder: factor sets differ");
  std::vector<std::size_t> pos(target.size());
  for (std::size_t k = 0; k < target.size(); ++k) {
    pos[k] = src.index_of(target.factors()[k].name);
    if (src.factors()[pos[k]].dim != target.factors()[k].dim)
      throw std::invalid_argument("reorder: dimension mismatch");
  }
  Vector out(target.dim());
  for (Eigen::Index i = 0; i < target.dim(); ++i) {
    auto td = target.digits(i);
    Eigen::Index s = 0;
    for (std::size_t k = 0; k < target.size(); ++k) s += td[k] * src.stride(pos[k]);
    out(i) = psi[s];
  }
  return {target, std::move(out)};
}

// ---------------------------------------------------------------------------
// partial trace

inline DensityMatrix partial_trace(const DensityMatrix& rho, const std::vector<std::string>& keep) {
  if (keep.empty()) throw std::invalid_argument("partial_trace: empty keep set");
  const auto& lab = rho.label();
  std::vector<bool> kept(lab.size(), false);
  for (const auto& name : keep) kept[lab.index_of(name)] = true;

  std::vector<Factor> kf, tf;
  for (std::size_t i = 0; i < lab.size(); ++i) (kept[i] ? kf : tf).push_back(lab.factors()[i]);
  SpaceLabel kl(kf), tl(tf);

  auto flat = [&](const SpaceLabel& part, Eigen::Index idx, bool is_kept) {
    auto pd = part.digits(idx);
    Eigen::Index out = 0;
    std::size_t k = 0;
    for (std::size_t i = 0; i < lab.size(); ++i)
      if (kept[i] == is_kept) out += pd[k++] * lab.stride(i);
    return out;
  };

  const Eigen::Index dk = kl.dim(), dt = tl.size() ? tl.dim() : 1;
  std::vector<Eigen::Index> koff(dk), toff(dt, 0);
  for (Eigen::Index i = 0; i < dk; ++i) koff[i] = flat(kl, i, true);
  if (tl.size())
    for (Eigen::Index t = 0; t < dt; ++t) toff[t] = flat(tl, t, false);

  Matrix out = Matrix::Zero(dk, dk);
  for (Eigen::Index i = 0; i < dk; ++i)
    for (Eigen::Index j = 0; j < dk; ++j) {
      cplx s{};
      for (Eigen::Index t = 0; t < dt; ++t) s += rho(koff[i] + toff[t], koff[j] + toff[t]);
      out(i, j) = s;
    }
  return {kl, std::move(out)};
}

inline DensityMatrix partial_trace(const PureState& psi, const std::vector<std::string>& keep) {
  return partial_trace(DensityMatrix::from_pure(psi), keep);
}

// ---------------------------------------------------------------------------
// matrix exponential: Taylor series with scaling and squaring

inline Matrix expm(const Matrix& a, double tol = 1e-12) {
  if (!a.allFinite()) throw NumericalError("expm: non-finite entries");
  const Eigen::Index n = a.rows();
  // Scale so that the 1-norm is at most 1/2; the series then converges quickly.
  const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm1 > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm1 / 0.5)));
  const Matrix scaled = a / std::ldexp(1.0, squarings);

  Matrix sum = Matrix::Identity(n, n);
  Matrix term = Matrix::Identity(n, n);
  for (int k = 1; k < 64; ++k) {
    term = term * scaled / static_cast<double>(k);
    sum += term;
    if (term.cwiseAbs().maxCoeff() < tol * 1e-4) break;
  }
  for (int s = 0; s < squarings; ++s) sum = sum * sum;
  return sum;
}

// exp(-i A t) psi. A may be non-Hermitian (effective Hamiltonians).
inline PureState evolve(const PureState& psi, const Operator& a, double t) {
  if (t < 0.0) throw std::invalid_argument("evolve: negative time");
  if (!(psi.label() == a.label())) throw std::invalid_argument("evolve: space mismatch");
  if (!psi.amplitudes().allFinite()) throw NumericalError("evolve: non-finite state");
  return {psi.label(), expm(cplx{0.0, -t} * a.matrix()) * psi.amplitudes()};
}

inline Operator propagator(const Operator& a, double t) {
  return {a.label(), expm(cplx{0.0, -t} * a.matrix())};
}

// ---------------------------------------------------------------------------
// figures of merit

inline double fidelity(const DensityMatrix& rho, const PureState& psi) {
  if (!(rho.label() == psi.label())) throw std::invalid_argument("fidelity: dimension mismatch");
  cplx v = psi.amplitudes().dot(rho.matrix() * psi.amplitudes());
  return std::clamp(v.real(), 0.0, 1.0);
}

// |<a|b>|^2 / (|a|^2 |b|^2); insensitive to global phase and normalization.
inline double overlap(const PureState& a, const PureState& b) {
  if (!(a.label() == b.label())) throw std::invalid_argument("overlap: space mismatch");
  const double na = a.norm_squared(), nb = b.norm_squared();
  if (!(na > 0.0 && nb > 0.0)) throw NumericalError("overlap: zero state");
  return std::norm(a.amplitudes().dot(b.amplitudes())) / (na * nb);
}

inline double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
  if (!(a.label() == b.label())) throw std::invalid_argument("trace_distance: space mismatch");
  Matrix d = a.matrix() - b.matrix();
  d = 0.5 * (d + d.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> es(d, Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

}  // namespace qtel
