#pragma once

// Superoperators on vectorized density matrices (column stacking:
// vec(rho)[i + j*d] = rho(i, j)), exact and adaptive propagation, and
// null-space steady states.

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>

#include "qtherm/qcore.hpp"

namespace qtherm {

/// A linear map on d x d matrices.
using LinearMap = std::function<Matrix(const Matrix&)>;

inline Vector vec(const Matrix& m) {
  return Eigen::Map<const Vector>(m.data(), m.size());
}

inline Matrix unvec(const Vector& v, Index d) {
  if (v.size() != d * d) throw ShapeError("unvec: size mismatch");
  return Eigen::Map<const Matrix>(v.data(), d, d);
}

/// Builds the d^2 x d^2 matrix of `map` by applying it to each basis matrix.
inline Matrix assemble_superoperator(const LinearMap& map, Index d) {
  require_dim_limit(d * d);
  Matrix s(d * d, d * d);
  Matrix e = Matrix::Zero(d, d);
  for (Index j = 0; j < d; ++j)
    for (Index i = 0; i < d; ++i) {
      e(i, j) = 1.0;
      const Matrix out = map(e);
      if (out.rows() != d || out.cols() != d) throw ShapeError("assemble_superoperator: map changes shape");
      s.col(i + j * d) = vec(out);
      e(i, j) = 0.0;
    }
  return s;
}

/// Poisson-averaged measurement generator on the joint space:
/// rho -> rate(rho) + lambda (Tr_B rho (x) rho_B0 - rho).
inline LinearMap with_measurement_resets(LinearMap rate, Dims dims, Matrix rho_b0, double lambda) {
  return [rate = std::move(rate), dims, rho_b0 = std::move(rho_b0), lambda](const Matrix& rho) {
    Matrix out = rate(rho);
    out += lambda * (kron(partial_trace(rho, dims, Subsystem::A), rho_b0) - rho);
    return out;
  };
}

// ---------------------------------------------------------------------------
// exact propagation exp(S t)

class SuperPropagator {
 public:
  /// `s` acts on column-stacked vectors of d x d matrices.
  SuperPropagator(Matrix s, Index d) : s_(std::move(s)), d_(d) {
    if (s_.rows() != d * d || s_.cols() != d * d) throw ShapeError("SuperPropagator: size mismatch");
    try_diagonalize();
  }

  Index dim() const { return d_; }
  const Matrix& generator() const { return s_; }
  bool diagonalized() const { return diag_.has_value(); }

  Matrix propagator(double t) const {
    if (diag_) {
      Vector ph(diag_->values.size());
      for (Index k = 0; k < ph.size(); ++k) ph(k) = std::exp(diag_->values(k) * t);
      return diag_->right * ph.asDiagonal() * diag_->left;
    }
    std::lock_guard<std::mutex> lock(*cache_mutex_);
    if (cache_t_ && *cache_t_ == t) return cache_;
    cache_ = (s_ * cplx(t)).exp();
    cache_t_ = t;
    return cache_;
  }

  Matrix apply(const Matrix& rho, double t) const {
    if (t == 0.0) return rho;
    if (diag_) {
      Vector c = diag_->left * vec(rho);
      for (Index k = 0; k < c.size(); ++k) c(k) *= std::exp(diag_->values(k) * t);
      return unvec(diag_->right * c, d_);
    }
    return unvec(propagator(t) * vec(rho), d_);
  }

 private:
  struct Diagonal {
    Vector values;
    Matrix right;
    Matrix left;  // inverse of right
  };

  void try_diagonalize() {
    const double scale = std::max(1.0, s_.cwiseAbs().maxCoeff());
    Eigen::ComplexEigenSolver<Matrix> es(s_);
    if (es.info() != Eigen::Success) return;
    Matrix r = es.eigenvectors();
    Eigen::PartialPivLU<Matrix> lu(r);
    const Matrix l = lu.inverse();
    if (!l.allFinite()) return;
    const double cond = r.cwiseAbs().rowwise().sum().maxCoeff() *
                        l.cwiseAbs().rowwise().sum().maxCoeff();
    if (!(cond < 1e6)) return;
    const Matrix rec = r * es.eigenvalues().asDiagonal() * l;
    if ((rec - s_).cwiseAbs().maxCoeff() > 1e-11 * scale) return;
    // long-time stability: no eigenvalue may grow
    if (es.eigenvalues().real().maxCoeff() > 1e-9 * scale) return;
    diag_ = Diagonal{es.eigenvalues(), std::move(r), l};
  }

  Matrix s_;
  Index d_;
  std::optional<Diagonal> diag_;
  std::unique_ptr<std::mutex> cache_mutex_ = std::make_unique<std::mutex>();
  mutable std::optional<double> cache_t_;
  mutable Matrix cache_;
};

// ---------------------------------------------------------------------------
// adaptive Dormand-Prince 5(4) for large systems (no superoperator assembly)

struct AdaptiveOptions {
  double tol_per_unit_time = 1e-10;
  double initial_step = 1e-2;
  double min_step = 1e-12;
  long max_steps = 50'000'000;
};

inline Matrix adaptive_propagate(const LinearMap& rate, Matrix rho, double t,
                                 const AdaptiveOptions& opt = {}) {
  if (t < 0.0) throw PreconditionError("adaptive_propagate: negative time");
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
  (void)c2; (void)c3; (void)c4; (void)c5;

  double h = std::min(opt.initial_step, t);
  double done = 0.0;
  long steps = 0;
  Matrix k1 = rate(rho);
  while (done < t) {
    if (++steps > opt.max_steps) throw StepSizeError("adaptive_propagate: step budget exhausted");
    h = std::min(h, t - done);
    const Matrix k2 = rate(rho + h * a21 * k1);
    const Matrix k3 = rate(rho + h * (a31 * k1 + a32 * k2));
    const Matrix k4 = rate(rho + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const Matrix k5 = rate(rho + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Matrix k6 = rate(rho + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    Matrix next = rho + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const Matrix k7 = rate(next);
    const Matrix err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const double err_norm = err.cwiseAbs().maxCoeff();
    const double allowed = opt.tol_per_unit_time * h;
    if (err_norm <= allowed || h <= opt.min_step) {
      done += h;
      rho = std::move(next);
      k1 = k7;  // FSAL
    }
    const double factor =
        err_norm == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(allowed / err_norm, 0.2), 0.2, 5.0);
    h = std::max(h * factor, opt.min_step);
  }
  return rho;
}

/// Propagates d x d matrices under a linear rate: exact superoperator
/// exponential up to `exact_limit`, adaptive integration above it.
class Flow {
 public:
  static constexpr Index kExactLimit = 32;

  Flow(LinearMap rate, Index d, Index exact_limit = kExactLimit)
      : rate_(std::move(rate)), d_(d) {
    if (d <= exact_limit) {
      exact_ = std::make_shared<SuperPropagator>(assemble_superoperator(rate_, d), d);
    }
  }

  Index dim() const { return d_; }
  bool exact() const { return exact_ != nullptr; }
  const LinearMap& rate() const { return rate_; }

  Matrix apply(const Matrix& rho, double t) const {
    if (rho.rows() != d_ || rho.cols() != d_) throw ShapeError("Flow: dimension mismatch");
    if (t < 0.0) throw PreconditionError("Flow: negative time");
    if (exact_) return exact_->apply(rho, t);
    return adaptive_propagate(rate_, rho, t);
  }

 private:
  LinearMap rate_;
  Index d_;
  std::shared_ptr<const SuperPropagator> exact_;
};

// ---------------------------------------------------------------------------
// null-space steady state

struct NullSpaceState {
  Matrix rho;          // Hermitized, unit trace
  double residual = 0; // ||S vec(rho)||
  long null_dim = 0;
  RealVector singular_values;  // ascending
};

/// Solves S vec(rho) = 0 via SVD. Singular values below rel_tol * max count
/// towards the null space; more than one throws AmbiguityError.
inline NullSpaceState null_space_state(const Matrix& s, Index d, double rel_tol = 1e-10) {
  if (s.rows() != d * d || s.cols() != d * d) throw ShapeError("null_space_state: size mismatch");
  Eigen::BDCSVD<Matrix> svd(s, Eigen::ComputeFullV);
  const RealVector sv = svd.singularValues();  // descending
  const double smax = sv.size() ? sv(0) : 0.0;
  long nd = 0;
  for (Index k = 0; k < sv.size(); ++k)
    if (sv(k) <= rel_tol * smax) ++nd;
  if (nd > 1) {
    throw AmbiguityError("null_space_state: null space has dimension " + std::to_string(nd), nd);
  }
  const Vector v = svd.matrixV().col(sv.size() - 1);
  Matrix rho = unvec(v, d);
  const cplx tr = rho.trace();
  if (std::abs(tr) < 1e-300) throw NumericError("null_space_state: null vector has zero trace");
  rho /= tr;
  rho = hermitize(rho);
  NullSpaceState out;
  out.residual = (s * vec(rho)).norm();
  out.null_dim = std::max<long>(nd, 1);
  out.singular_values = sv.reverse();
  out.rho = std::move(rho);
  return out;
}

}  // namespace qtherm
