#pragma once

// Jaynes-Cummings / Rabi Hamiltonians, Gibbs states and the coupling
// trace conditions.

#include <limits>
#include <string>
#include <vector>

#include "qtherm/params.hpp"
#include "qtherm/qcore.hpp"

namespace qtherm {

inline constexpr double kInfiniteBeta = std::numeric_limits<double>::infinity();

/// H = H_A (x) I + I (x) H_B + gamma H_AB, with gamma kept out of h_ab.
struct JointSystem {
  Index dim_a = 1;
  Index dim_b = 1;
  Matrix h_a;
  Matrix h_b;
  Matrix h_ab;
  double gamma = 0.0;

  Dims dims() const { return {dim_a, dim_b}; }
  Index total() const { return dim_a * dim_b; }
  Matrix h0() const { return embed_a(h_a, dim_b) + embed_b(dim_a, h_b); }
  Matrix hamiltonian() const { return h0() + gamma * h_ab; }

  void validate() const {
    if (h_a.rows() != dim_a || h_b.rows() != dim_b || h_ab.rows() != total()) {
      throw ShapeError("JointSystem: operator dimensions disagree with dim_a, dim_b");
    }
    if (!is_hermitian(h_a, 1e-12) || !is_hermitian(h_b, 1e-12) || !is_hermitian(h_ab, 1e-12)) {
      throw PreconditionError("JointSystem: Hamiltonian blocks must be Hermitian");
    }
    if (!(gamma >= 0.0)) throw PreconditionError("JointSystem: gamma must be >= 0");
  }
};

/// Truncated annihilation operator: a|n> = sqrt(n)|n-1>.
inline Matrix annihilation(Index dim) {
  Matrix a = Matrix::Zero(dim, dim);
  for (Index n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

/// Qubit lowering operator |g><e| with g = 0, e = 1.
inline Matrix qubit_lowering() {
  Matrix s = Matrix::Zero(2, 2);
  s(0, 1) = 1.0;
  return s;
}

inline Matrix number_operator(Index dim) {
  Matrix n = Matrix::Zero(dim, dim);
  for (Index k = 0; k < dim; ++k) n(k, k) = static_cast<double>(k);
  return n;
}

inline JointSystem build_jcm(const JcmParams& p) {
  p.validate();
  const Index da = p.n_max + 1;
  JointSystem sys;
  sys.dim_a = da;
  sys.dim_b = 2;
  sys.gamma = p.gamma;
  sys.h_a = Matrix::Zero(da, da);
  for (Index n = 0; n < da; ++n) sys.h_a(n, n) = p.omega_a * (static_cast<double>(n) + 0.5);
  sys.h_b = Matrix::Zero(2, 2);
  sys.h_b(0, 0) = -0.5 * p.omega_b;
  sys.h_b(1, 1) = 0.5 * p.omega_b;
  const Matrix a = annihilation(da);
  const Matrix s = qubit_lowering();
  sys.h_ab = kron(Matrix(a.adjoint()), s) + kron(a, Matrix(s.adjoint()));
  if (!p.rwa) sys.h_ab += kron(Matrix(a.adjoint()), Matrix(s.adjoint())) + kron(a, s);
  return sys;
}

/// exp(-beta h)/Z. beta = +inf gives the ground projector and requires a
/// non-degenerate ground state.
inline DensityMatrix thermal_state(const Matrix& h, double beta) {
  if (std::isnan(beta) || beta < 0.0) throw PreconditionError("thermal_state: beta must be >= 0");
  const Propagator prop(h);
  const RealVector& e = prop.energies();
  RealVector w(e.size());
  if (std::isinf(beta)) {
    const double scale = std::max(1.0, e.cwiseAbs().maxCoeff());
    if (e.size() > 1 && e(1) - e(0) < 1e-12 * scale) {
      throw PreconditionError("thermal_state: ground state is degenerate at beta = inf");
    }
    w.setZero();
    w(0) = 1.0;
  } else {
    for (Index k = 0; k < e.size(); ++k) w(k) = std::exp(-beta * (e(k) - e(0)));
    w /= w.sum();
  }
  const Matrix& v = prop.eigenvectors();
  return DensityMatrix::from_trusted(v * w.cast<cplx>().asDiagonal() * v.adjoint());
}

struct CouplingViolation {
  Subsystem traced;  // the subsystem traced out
  int power;         // k in f(x) = x^k
  double magnitude;  // max |entry| of the partial trace
};

struct CouplingReport {
  std::vector<CouplingViolation> violations;
  bool ok() const { return violations.empty(); }
};

/// Checks Tr_A[H_A^k H_AB] = 0 and Tr_B[H_B^k H_AB] = 0 for k = 0..max_power.
inline CouplingReport validate_coupling(const JointSystem& sys, int max_power = 4,
                                        double tol = 1e-10) {
  if (max_power < 1) throw PreconditionError("validate_coupling: max_power must be >= 1");
  CouplingReport report;
  Matrix pa = Matrix::Identity(sys.dim_a, sys.dim_a);
  Matrix pb = Matrix::Identity(sys.dim_b, sys.dim_b);
  for (int k = 0; k <= max_power; ++k) {
    const Matrix ta = partial_trace(embed_a(pa, sys.dim_b) * sys.h_ab, sys.dims(), Subsystem::B);
    const Matrix tb = partial_trace(embed_b(sys.dim_a, pb) * sys.h_ab, sys.dims(), Subsystem::A);
    const double ma = ta.size() ? ta.cwiseAbs().maxCoeff() : 0.0;
    const double mb = tb.size() ? tb.cwiseAbs().maxCoeff() : 0.0;
    if (ma > tol) report.violations.push_back({Subsystem::A, k, ma});
    if (mb > tol) report.violations.push_back({Subsystem::B, k, mb});
    pa = pa * sys.h_a;
    pb = pb * sys.h_b;
  }
  return report;
}

}  // namespace qtherm
