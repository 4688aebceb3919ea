#pragma once

// Dense complex linear algebra and state primitives for finite bipartite
// systems. Units: hbar = k_B = 1, energies in angular-frequency units.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <string>
#include <utility>

#include "qtherm/error.hpp"

namespace qtherm {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Operators (Hamiltonians, propagators, observables) are plain dense matrices.
using Operator = Matrix;

/// Largest joint Hilbert-space dimension any operation will build.
inline constexpr Index kMaxDim = 4096;

inline constexpr cplx kI{0.0, 1.0};

/// Dimensions of a bipartite space; A is the slow (outer) Kronecker index.
struct Dims {
  Index a = 1;
  Index b = 1;
  Index total() const { return a * b; }
};

enum class Subsystem { A, B };

// ---------------------------------------------------------------------------
// small helpers

inline double hermiticity_error(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

inline bool is_hermitian(const Matrix& m, double tol = 1e-12) {
  return m.rows() == m.cols() && hermiticity_error(m) < tol;
}

inline Matrix hermitize(const Matrix& m) { return 0.5 * (m + m.adjoint()); }

inline Matrix commutator(const Matrix& a, const Matrix& b) { return a * b - b * a; }

inline Matrix anticommutator(const Matrix& a, const Matrix& b) { return a * b + b * a; }

inline void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw ShapeError(std::string(what) + ": matrix must be square and non-empty");
  }
}

inline void require_dim_limit(Index dim) {
  if (dim > kMaxDim) {
    throw SizeError("dimension " + std::to_string(dim) + " exceeds maximum " +
                    std::to_string(kMaxDim));
  }
}

// ---------------------------------------------------------------------------
// StateVector

class StateVector {
 public:
  static constexpr double kNormTol = 1e-12;

  explicit StateVector(Vector amplitudes) : amps_(std::move(amplitudes)) {
    if (amps_.size() == 0) throw ShapeError("StateVector: empty amplitude vector");
    require_dim_limit(amps_.size());
    if (!amps_.allFinite()) throw PreconditionError("StateVector: non-finite amplitude");
    const double n = amps_.norm();
    if (std::abs(n - 1.0) > kNormTol) {
      throw PreconditionError("StateVector: norm " + std::to_string(n) + " != 1");
    }
  }

  /// Rescales to unit norm; throws on a zero vector.
  static StateVector normalized(Vector v) {
    const double n = v.norm();
    if (!(n > 0.0)) throw PreconditionError("StateVector: cannot normalize zero vector");
    v /= n;
    return StateVector(std::move(v), Trusted{});
  }

  static StateVector basis(Index dim, Index k) {
    if (k < 0 || k >= dim) throw ShapeError("StateVector::basis: index out of range");
    Vector v = Vector::Zero(dim);
    v(k) = 1.0;
    return StateVector(std::move(v), Trusted{});
  }

  Index dim() const { return amps_.size(); }
  const Vector& amplitudes() const { return amps_; }

 private:
  struct Trusted {};
  StateVector(Vector v, Trusted) : amps_(std::move(v)) {}

  friend class Propagator;
  friend StateVector tensor_product(const StateVector&, const StateVector&);

  Vector amps_;
};

// ---------------------------------------------------------------------------
// DensityMatrix

class DensityMatrix {
 public:
  static constexpr double kHermTol = 1e-12;
  static constexpr double kTraceTol = 1e-10;
  static constexpr double kEigTol = 1e-10;

  /// Validates Hermiticity, unit trace and positivity.
  explicit DensityMatrix(Matrix m) : m_(std::move(m)) {
    require_square(m_, "DensityMatrix");
    require_dim_limit(m_.rows());
    if (!m_.allFinite()) throw PreconditionError("DensityMatrix: non-finite entry");
    if (hermiticity_error(m_) > kHermTol) {
      throw PreconditionError("DensityMatrix: not Hermitian");
    }
    const double tr = m_.trace().real();
    if (std::abs(tr - 1.0) > kTraceTol) {
      throw PreconditionError("DensityMatrix: trace " + std::to_string(tr) + " != 1");
    }
    m_ = hermitize(m_);
    Eigen::SelfAdjointEigenSolver<Matrix> es(m_, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -kEigTol) {
      throw PositivityError("DensityMatrix: negative eigenvalue " +
                            std::to_string(es.eigenvalues().minCoeff()));
    }
  }

  /// Wraps an internally produced matrix: Hermitizes, skips the eigen check.
  /// Callers that must guard positivity do so explicitly via min_eigenvalue.
  static DensityMatrix from_trusted(const Matrix& m) {
    return DensityMatrix(hermitize(m), Trusted{});
  }

  static DensityMatrix pure(const StateVector& psi) {
    return DensityMatrix(psi.amplitudes() * psi.amplitudes().adjoint(), Trusted{});
  }

  static DensityMatrix maximally_mixed(Index dim) {
    return DensityMatrix(Matrix::Identity(dim, dim) / static_cast<double>(dim), Trusted{});
  }

  static DensityMatrix diagonal(const RealVector& populations) {
    const double s = populations.sum();
    if (populations.minCoeff() < 0.0 || std::abs(s - 1.0) > kTraceTol) {
      throw PreconditionError("DensityMatrix::diagonal: invalid probability vector");
    }
    return DensityMatrix(populations.cast<cplx>().asDiagonal().toDenseMatrix(), Trusted{});
  }

  Index dim() const { return m_.rows(); }
  const Matrix& matrix() const { return m_; }
  RealVector populations() const { return m_.diagonal().real(); }

 private:
  struct Trusted {};
  DensityMatrix(Matrix m, Trusted) : m_(std::move(m)) {}

  Matrix m_;
};

inline double min_eigenvalue(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(hermitize(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline double min_eigenvalue(const DensityMatrix& rho) { return min_eigenvalue(rho.matrix()); }

// ---------------------------------------------------------------------------
// Propagator: cached eigendecomposition of a Hermitian operator.

class Propagator {
 public:
  explicit Propagator(const Matrix& h, double herm_tol = 1e-10) {
    require_square(h, "Propagator");
    require_dim_limit(h.rows());
    if (hermiticity_error(h) > herm_tol * std::max(1.0, h.cwiseAbs().maxCoeff())) {
      throw PreconditionError("Propagator: operator is not Hermitian");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(hermitize(h));
    if (es.info() != Eigen::Success) throw NumericError("Propagator: eigensolver failed");
    energies_ = es.eigenvalues();
    vecs_ = es.eigenvectors();
  }

  Index dim() const { return energies_.size(); }
  const RealVector& energies() const { return energies_; }
  /// Columns are eigenvectors, ordered by increasing energy.
  const Matrix& eigenvectors() const { return vecs_; }

  Matrix reconstruct() const {
    return vecs_ * energies_.cast<cplx>().asDiagonal() * vecs_.adjoint();
  }

  /// U(t) = exp(-i t H).
  Matrix unitary(double t) const {
    return vecs_ * phases(t).asDiagonal() * vecs_.adjoint();
  }

  Vector apply(const Vector& v, double t) const {
    Vector c = vecs_.adjoint() * v;
    c = c.cwiseProduct(phases(t));
    return vecs_ * c;
  }

  /// U(t) rho U(t)^dagger for an arbitrary (not necessarily Hermitian) matrix.
  Matrix conjugate(const Matrix& rho, double t) const {
    const Vector ph = phases(t);
    Matrix r = vecs_.adjoint() * rho * vecs_;
    r = ph.asDiagonal() * r * ph.conjugate().asDiagonal();
    return vecs_ * r * vecs_.adjoint();
  }

  /// Matrix elements in the eigenbasis: V^dagger M V.
  Matrix to_eigenbasis(const Matrix& m) const { return vecs_.adjoint() * m * vecs_; }

  /// Populations of rho in this eigenbasis.
  RealVector basis_populations(const Matrix& rho) const {
    RealVector p(dim());
    for (Index k = 0; k < dim(); ++k) {
      p(k) = (vecs_.col(k).adjoint() * rho * vecs_.col(k))(0, 0).real();
    }
    return p;
  }

 private:
  Vector phases(double t) const {
    Vector ph(energies_.size());
    for (Index k = 0; k < energies_.size(); ++k) ph(k) = std::exp(-kI * (energies_(k) * t));
    return ph;
  }

  RealVector energies_;
  Matrix vecs_;
};

// ---------------------------------------------------------------------------
// tensor products and partial traces

inline Matrix kron(const Matrix& a, const Matrix& b) {
  require_dim_limit(a.rows() * b.rows());
  require_dim_limit(a.cols() * b.cols());
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

inline Vector kron(const Vector& a, const Vector& b) {
  require_dim_limit(a.size() * b.size());
  Vector out(a.size() * b.size());
  for (Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

inline Matrix tensor_product(const Matrix& a, const Matrix& b) { return kron(a, b); }

inline DensityMatrix tensor_product(const DensityMatrix& a, const DensityMatrix& b) {
  return DensityMatrix::from_trusted(kron(a.matrix(), b.matrix()));
}

inline StateVector tensor_product(const StateVector& a, const StateVector& b) {
  return StateVector(kron(a.amplitudes(), b.amplitudes()), StateVector::Trusted{});
}

/// Partial trace of any dA*dB square matrix (operators included).
inline Matrix partial_trace(const Matrix& m, Dims dims, Subsystem keep) {
  if (m.rows() != m.cols() || m.rows() != dims.total()) {
    throw ShapeError("partial_trace: matrix dimension " + std::to_string(m.rows()) +
                     " != dA*dB = " + std::to_string(dims.total()));
  }
  const Index da = dims.a, db = dims.b;
  if (keep == Subsystem::A) {
    Matrix out = Matrix::Zero(da, da);
    for (Index i = 0; i < da; ++i)
      for (Index j = 0; j < da; ++j) {
        cplx s = 0.0;
        for (Index k = 0; k < db; ++k) s += m(i * db + k, j * db + k);
        out(i, j) = s;
      }
    return out;
  }
  Matrix out = Matrix::Zero(db, db);
  for (Index k = 0; k < da; ++k) out += m.block(k * db, k * db, db, db);
  return out;
}

inline DensityMatrix partial_trace(const DensityMatrix& rho, Dims dims, Subsystem keep) {
  return DensityMatrix::from_trusted(partial_trace(rho.matrix(), dims, keep));
}

/// Reduced A state of a pure joint vector.
inline Matrix reduced_a(const Vector& psi, Dims dims) {
  if (psi.size() != dims.total()) throw ShapeError("reduced_a: dimension mismatch");
  // psi viewed as dA x dB matrix C with C(i,k) = psi(i*dB + k): rho_A = C C^dagger
  Matrix c(dims.a, dims.b);
  for (Index i = 0; i < dims.a; ++i)
    for (Index k = 0; k < dims.b; ++k) c(i, k) = psi(i * dims.b + k);
  return c * c.adjoint();
}

inline Matrix embed_a(const Matrix& op_a, Index dim_b) {
  return kron(op_a, Matrix::Identity(dim_b, dim_b));
}

inline Matrix embed_b(Index dim_a, const Matrix& op_b) {
  return kron(Matrix::Identity(dim_a, dim_a), op_b);
}

// ---------------------------------------------------------------------------
// evolution

inline StateVector evolve(const StateVector& psi, const Propagator& prop, double t) {
  if (psi.dim() != prop.dim()) throw ShapeError("evolve: dimension mismatch");
  if (t < 0.0) throw PreconditionError("evolve: negative time");
  return StateVector::normalized(prop.apply(psi.amplitudes(), t));
}

inline DensityMatrix evolve(const DensityMatrix& rho, const Propagator& prop, double t) {
  if (rho.dim() != prop.dim()) throw ShapeError("evolve: dimension mismatch");
  if (t < 0.0) throw PreconditionError("evolve: negative time");
  return DensityMatrix::from_trusted(prop.conjugate(rho.matrix(), t));
}

// ---------------------------------------------------------------------------
// expectations and distances

inline double expectation(const Matrix& op, const Matrix& rho) {
  return (op.cwiseProduct(rho.transpose())).sum().real();  // tr(op rho)
}

inline double expectation(const Matrix& op, const DensityMatrix& rho) {
  return expectation(op, rho.matrix());
}

inline double expectation(const Matrix& op, const Vector& psi) {
  return psi.dot(op * psi).real();
}

inline double trace_distance(const Matrix& a, const Matrix& b) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(hermitize(a - b), Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

inline double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
  if (a.dim() != b.dim()) throw ShapeError("trace_distance: dimension mismatch");
  return trace_distance(a.matrix(), b.matrix());
}

// ---------------------------------------------------------------------------
// entropies (nats)

/// -sum p ln p with 0 ln 0 = 0; tiny negative rounding entries count as 0.
inline double shannon_entropy(std::span<const double> p) {
  double s = 0.0;
  for (double x : p)
    if (x > 0.0) s -= x * std::log(x);
  return s;
}

inline double shannon_entropy(const RealVector& p) {
  return shannon_entropy(std::span<const double>(p.data(), static_cast<size_t>(p.size())));
}

inline constexpr double kEntropyPositivityTol = 1e-8;

inline double von_neumann_entropy(const DensityMatrix& rho) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(rho.matrix(), Eigen::EigenvaluesOnly);
  const RealVector& ev = es.eigenvalues();
  if (ev.minCoeff() < -kEntropyPositivityTol) {
    throw PositivityError("von_neumann_entropy: eigenvalue " + std::to_string(ev.minCoeff()));
  }
  return shannon_entropy(ev);
}

/// Shannon entropy of rho's diagonal in the eigenbasis held by `basis`.
inline double diag_entropy(const DensityMatrix& rho, const Propagator& basis) {
  if (rho.dim() != basis.dim()) throw ShapeError("diag_entropy: dimension mismatch");
  return shannon_entropy(basis.basis_populations(rho.matrix()));
}

/// S(rho | sigma) = tr rho ln rho - tr rho ln sigma; +inf when supp(rho) is
/// not contained in supp(sigma).
inline double relative_entropy(const DensityMatrix& rho, const DensityMatrix& sigma) {
  if (rho.dim() != sigma.dim()) throw ShapeError("relative_entropy: dimension mismatch");
  constexpr double kZero = 1e-14;
  constexpr double kSupportTol = 1e-10;
  Eigen::SelfAdjointEigenSolver<Matrix> es(sigma.matrix());
  const RealVector& sv = es.eigenvalues();
  const Matrix& vecs = es.eigenvectors();
  double cross = 0.0;  // tr rho ln sigma
  for (Index k = 0; k < sv.size(); ++k) {
    const double w = (vecs.col(k).adjoint() * rho.matrix() * vecs.col(k))(0, 0).real();
    if (sv(k) <= kZero) {
      if (w > kSupportTol) return std::numeric_limits<double>::infinity();
      continue;
    }
    cross += w * std::log(sv(k));
  }
  return -von_neumann_entropy(rho) - cross;
}

/// Removes coherences between eigenvectors of `basis` (projective measurement
/// average).
inline Matrix dephase(const Matrix& rho, const Propagator& basis) {
  const RealVector p = basis.basis_populations(rho);
  const Matrix& v = basis.eigenvectors();
  return v * p.cast<cplx>().asDiagonal() * v.adjoint();
}

}  // namespace qtherm
