#pragma once

// Measurement-averaged generators: the weak-coupling dissipator built from
// frequency sectors of H_AB, the fast-measurement (large lambda) expansion,
// steady states and the low-temperature four-level model.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "qtherm/models.hpp"
#include "qtherm/parallel.hpp"
#include "qtherm/random.hpp"
#include "qtherm/superop.hpp"

namespace qtherm {

/// H_AB split into sectors V_w connecting uncoupled eigenstates whose
/// energies differ by w, plus the Poisson-averaged coefficient tables.
struct GeneratorSpec {
  std::vector<double> frequencies;  // ascending
  std::vector<Matrix> v_omega;      // joint-space operators
  Matrix s_coef, a_coef, d_coef;    // indexed (w, w')
  double lambda = 1.0;
  double gamma = 0.0;
  Dims dims;
  Matrix h_a, h_b;

  Index size() const { return static_cast<Index>(frequencies.size()); }
  Index total() const { return dims.total(); }

  Matrix h0() const { return embed_a(h_a, dims.b) + embed_b(dims.a, h_b); }

  /// sum_w V_w / (lambda - i w); Hermitian.
  Matrix h_tilde() const {
    Matrix h = Matrix::Zero(total(), total());
    for (Index k = 0; k < size(); ++k) h += v_omega[k] / cplx(lambda, -frequencies[k]);
    return h;
  }

  // L'rho = sum_i V_i rho W_i^dagger + left rho + rho right
  std::vector<Matrix> w_op;
  Matrix left, right;
};

namespace detail {

inline void fill_coefficients(GeneratorSpec& spec) {
  const Index f = spec.size();
  const double l = spec.lambda;
  spec.s_coef.resize(f, f);
  spec.a_coef.resize(f, f);
  spec.d_coef.resize(f, f);
  for (Index i = 0; i < f; ++i)
    for (Index j = 0; j < f; ++j) {
      const double w = spec.frequencies[i], wp = spec.frequencies[j];
      const cplx d = cplx(l, -w) * cplx(l, wp) * cplx(l, -(w - wp));
      spec.d_coef(i, j) = d;
      spec.s_coef(i, j) = cplx(2.0 * l, -(w - wp)) / d;
      spec.a_coef(i, j) = (w + wp) / d;
    }
  const Index n = spec.total();
  spec.w_op.assign(static_cast<std::size_t>(f), Matrix::Zero(n, n));
  spec.left = Matrix::Zero(n, n);
  spec.right = Matrix::Zero(n, n);
  for (Index i = 0; i < f; ++i)
    for (Index j = 0; j < f; ++j) {
      const cplx s = spec.s_coef(i, j), a = spec.a_coef(i, j);
      spec.w_op[i] += std::conj(s) * spec.v_omega[j];
      const Matrix k = spec.v_omega[j].adjoint() * spec.v_omega[i];
      spec.left += (-0.5 * s + 0.5 * kI * a) * k;
      spec.right += (-0.5 * s - 0.5 * kI * a) * k;
    }
}

}  // namespace detail

/// Bins the transition frequencies of H_AB in the eigenbasis of H_A + H_B.
/// Frequencies closer than `tol` share a sector; tol <= 0 selects
/// 1e-9 * max|w|.
inline GeneratorSpec decompose(const JointSystem& sys, double lambda, double tol = 0.0) {
  sys.validate();
  if (!(lambda > 0.0)) throw PreconditionError("decompose: lambda must be > 0");
  GeneratorSpec spec;
  spec.lambda = lambda;
  spec.gamma = sys.gamma;
  spec.dims = sys.dims();
  spec.h_a = sys.h_a;
  spec.h_b = sys.h_b;

  const Propagator p0(sys.h0());
  const RealVector& e = p0.energies();
  const Matrix hab = p0.to_eigenbasis(sys.h_ab);
  const Index n = hab.rows();
  const double scale = hab.size() ? hab.cwiseAbs().maxCoeff() : 0.0;
  if (scale == 0.0) {
    detail::fill_coefficients(spec);
    return spec;
  }
  const double negligible = 1e-14 * scale;

  struct Entry {
    double w;
    Index i, j;
  };
  std::vector<Entry> entries;
  double wmax = 0.0;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (std::abs(hab(i, j)) > negligible) {
        entries.push_back({e(i) - e(j), i, j});
        wmax = std::max(wmax, std::abs(e(i) - e(j)));
      }
  if (tol <= 0.0) tol = 1e-9 * std::max(wmax, 1e-300);
  std::sort(entries.begin(), entries.end(), [](const Entry& x, const Entry& y) { return x.w < y.w; });

  std::size_t k = 0;
  while (k < entries.size()) {
    std::size_t end = k + 1;
    while (end < entries.size() && entries[end].w - entries[end - 1].w < tol) ++end;
    Matrix block = Matrix::Zero(n, n);
    for (std::size_t m = k; m < end; ++m) block(entries[m].i, entries[m].j) = hab(entries[m].i, entries[m].j);
    // midpoint keeps +w and -w sectors exact negatives of each other
    spec.frequencies.push_back(0.5 * (entries[k].w + entries[end - 1].w));
    spec.v_omega.push_back(p0.eigenvectors() * block * p0.eigenvectors().adjoint());
    k = end;
  }
  detail::fill_coefficients(spec);
  return spec;
}

/// Same sectors at a different measurement rate.
inline GeneratorSpec with_lambda(GeneratorSpec spec, double lambda) {
  if (!(lambda > 0.0)) throw PreconditionError("with_lambda: lambda must be > 0");
  spec.lambda = lambda;
  detail::fill_coefficients(spec);
  return spec;
}

/// L'rho (the second-order part without gamma^2).
inline Matrix weak_dissipator(const GeneratorSpec& spec, const Matrix& rho) {
  Matrix out = spec.left * rho + rho * spec.right;
  for (Index i = 0; i < spec.size(); ++i) out += spec.v_omega[i] * rho * spec.w_op[i].adjoint();
  return out;
}

/// -i gamma [H~_AB(lambda), rho].
inline Matrix weak_first_order(const GeneratorSpec& spec, const Matrix& rho) {
  return -kI * spec.gamma * commutator(spec.h_tilde(), rho);
}

inline void require_product(const Matrix& rho, Dims dims, const char* what) {
  const Matrix ra = partial_trace(rho, dims, Subsystem::A);
  const Matrix rb = partial_trace(rho, dims, Subsystem::B);
  if ((kron(ra, rb) - rho).cwiseAbs().maxCoeff() > 1e-10) {
    throw PreconditionError(std::string(what) + ": joint state is not a product state");
  }
}

/// Poisson-averaged change <theta> - rho of the interaction-picture state
/// for a product input, through second order in gamma.
inline Matrix weak_map(const GeneratorSpec& spec, const DensityMatrix& rho_ab0) {
  if (rho_ab0.dim() != spec.total()) throw ShapeError("weak_map: dimension mismatch");
  require_product(rho_ab0.matrix(), spec.dims, "weak_map");
  return weak_first_order(spec, rho_ab0.matrix()) +
         spec.gamma * spec.gamma * weak_dissipator(spec, rho_ab0.matrix());
}

/// Joint generator -i[H_A + H_B, .] + gamma^2 lambda L'.
inline LinearMap weak_joint_rate(const GeneratorSpec& spec) {
  const Matrix h0 = spec.h0();
  const double c = spec.gamma * spec.gamma * spec.lambda;
  return [spec, h0, c](const Matrix& rho) -> Matrix {
    return -kI * commutator(h0, rho) + c * weak_dissipator(spec, rho);
  };
}

/// Reduced generator -i[H_A, .] + gamma^2 lambda Tr_B L'[. (x) rho_B0].
inline LinearMap weak_reduced_rate(const GeneratorSpec& spec, const Matrix& rho_b0) {
  const double c = spec.gamma * spec.gamma * spec.lambda;
  return [spec, rho_b0, c](const Matrix& rho_a) -> Matrix {
    const Matrix joint = kron(rho_a, rho_b0);
    return -kI * commutator(spec.h_a, rho_a) +
           c * partial_trace(weak_dissipator(spec, joint), spec.dims, Subsystem::A);
  };
}

inline Matrix weak_reduced_superoperator(const GeneratorSpec& spec, const Matrix& rho_b0) {
  return assemble_superoperator(weak_reduced_rate(spec, rho_b0), spec.dims.a);
}

// ---------------------------------------------------------------------------
// propagation of the weak-coupling master equation

enum class Protocol { Continuous, IntervalPurify };

struct LindbladOptions {
  Protocol protocol = Protocol::Continuous;
  // interval lengths for IntervalPurify; drawn from Exp(lambda) when empty
  std::vector<double> intervals;
  std::uint64_t seed = 1;
  double positivity_tol = 1e-7;
};

struct LindbladSeries {
  std::vector<double> t;
  std::vector<Matrix> rho_a;
  double min_eigenvalue = 0.0;  // over all checked states
};

inline LindbladSeries lindblad_propagate(const GeneratorSpec& spec, const DensityMatrix& rho_a0,
                                         const DensityMatrix& rho_b0,
                                         const std::vector<double>& t_grid,
                                         const LindbladOptions& opt = {}) {
  if (rho_a0.dim() != spec.dims.a || rho_b0.dim() != spec.dims.b) {
    throw ShapeError("lindblad_propagate: dimension mismatch");
  }
  if (!std::is_sorted(t_grid.begin(), t_grid.end()) || (!t_grid.empty() && t_grid.front() < 0.0)) {
    throw PreconditionError("lindblad_propagate: time grid must be sorted and non-negative");
  }
  LindbladSeries out;
  out.min_eigenvalue = min_eigenvalue(rho_a0);
  auto check = [&](const Matrix& m) {
    const double ev = min_eigenvalue(m);
    out.min_eigenvalue = std::min(out.min_eigenvalue, ev);
    if (ev < -opt.positivity_tol) {
      throw StepSizeError("lindblad_propagate: positivity violated (eigenvalue " +
                          std::to_string(ev) + ")");
    }
  };

  if (opt.protocol == Protocol::Continuous) {
    const Flow flow(weak_reduced_rate(spec, rho_b0.matrix()), spec.dims.a);
    Matrix rho = rho_a0.matrix();
    double now = 0.0;
    for (double t : t_grid) {
      rho = flow.apply(rho, t - now);
      now = t;
      check(rho);
      out.t.push_back(t);
      out.rho_a.push_back(hermitize(rho));
    }
    return out;
  }

  const Flow flow(weak_joint_rate(spec), spec.total());
  Rng rng(opt.seed);
  std::size_t next_interval = 0;
  auto draw = [&]() {
    if (!opt.intervals.empty()) {
      if (next_interval >= opt.intervals.size()) {
        throw PreconditionError("lindblad_propagate: interval schedule exhausted");
      }
      return opt.intervals[next_interval++];
    }
    return sample_interval(rng, spec.lambda);
  };
  Matrix joint = kron(rho_a0.matrix(), rho_b0.matrix());
  double start = 0.0;
  double tau = t_grid.empty() ? 0.0 : draw();
  for (double t : t_grid) {
    while (t >= start + tau) {
      const Matrix end = flow.apply(joint, tau);
      const Matrix ra = partial_trace(end, spec.dims, Subsystem::A);
      check(ra);
      joint = kron(hermitize(ra), rho_b0.matrix());
      start += tau;
      tau = draw();
    }
    const Matrix ra = partial_trace(flow.apply(joint, t - start), spec.dims, Subsystem::A);
    check(ra);
    out.t.push_back(t);
    out.rho_a.push_back(hermitize(ra));
  }
  return out;
}

// ---------------------------------------------------------------------------
// fast-measurement expansion

struct FastIncrement {
  Matrix increment;
  bool regime_ok = false;  // lambda >= 10 gamma
};

/// Poisson-averaged change for a product input through O(gamma^2/lambda^2).
inline FastIncrement fast_map(const JointSystem& sys, const DensityMatrix& rho_ab0, double lambda) {
  if (!(lambda > 0.0)) throw PreconditionError("fast_map: lambda must be > 0");
  if (rho_ab0.dim() != sys.total()) throw ShapeError("fast_map: dimension mismatch");
  const Matrix& rho = rho_ab0.matrix();
  const Matrix& h = sys.h_ab;
  const double g = sys.gamma;
  FastIncrement out;
  out.increment = -kI * (g / lambda) * commutator(h, rho) +
                  (g / (lambda * lambda)) * commutator(commutator(sys.h0(), h), rho) +
                  (g * g / (lambda * lambda)) * (2.0 * h * rho * h - anticommutator(h * h, rho));
  out.regime_ok = lambda >= 10.0 * g;
  return out;
}

/// Joint generator -i[H_A + H_B, .] + (gamma^2/lambda)(2 H rho H - {H^2, rho}).
inline LinearMap fast_joint_rate(const JointSystem& sys, double lambda) {
  const Matrix h0 = sys.h0();
  const Matrix h = sys.h_ab;
  const Matrix h2 = h * h;
  const double c = sys.gamma * sys.gamma / lambda;
  return [h0, h, h2, c](const Matrix& rho) -> Matrix {
    return -kI * commutator(h0, rho) + c * (2.0 * h * rho * h - anticommutator(h2, rho));
  };
}

/// Reduced fast generator from the sub-matrices V^{mn}_{ij} = H_AB[(i,m),(j,n)]
/// in the eigenbasis of H_B; rho_b0 must be diagonal there.
inline LinearMap fast_reduced_rate(const JointSystem& sys, const Matrix& rho_b0, double lambda) {
  const Propagator pb(sys.h_b);
  const Matrix hb_basis = embed_b(sys.dim_a, pb.eigenvectors());
  const Matrix h = hb_basis.adjoint() * sys.h_ab * hb_basis;
  const RealVector p = pb.basis_populations(rho_b0);
  const Index da = sys.dim_a, db = sys.dim_b;
  std::vector<Matrix> jumps;   // sqrt(2 p_n) V^{mn}
  Matrix drain = Matrix::Zero(da, da);  // sum p_m V^{mn} V^{mn dagger}
  for (Index m = 0; m < db; ++m)
    for (Index n = 0; n < db; ++n) {
      Matrix v(da, da);
      for (Index i = 0; i < da; ++i)
        for (Index j = 0; j < da; ++j) v(i, j) = h(i * db + m, j * db + n);
      if (p(n) > 0.0) jumps.push_back(std::sqrt(2.0 * p(n)) * v);
      drain += p(m) * v * v.adjoint();
    }
  const double c = sys.gamma * sys.gamma / lambda;
  const Matrix ha = sys.h_a;
  return [ha, jumps, drain, c](const Matrix& rho) -> Matrix {
    Matrix out = -kI * commutator(ha, rho) - c * anticommutator(drain, rho);
    for (const Matrix& j : jumps) out += c * j * rho * j.adjoint();
    return out;
  };
}

// ---------------------------------------------------------------------------
// steady states

struct SteadyStateResult {
  DensityMatrix rho_ss = DensityMatrix::maximally_mixed(1);
  double p0 = 0.0;
  double p1 = 0.0;
  double beta_eff = 0.0;  // -ln(p1/p0)/(E1 - E0)
  double residual = 0.0;
};

/// Null-space steady state of a reduced generator; populations are taken in
/// the eigenbasis of h_a.
inline SteadyStateResult steady_state(const Matrix& superop, const Matrix& h_a) {
  const Index d = h_a.rows();
  const NullSpaceState ns = null_space_state(superop, d);
  const Propagator pa(h_a);
  const RealVector pop = pa.basis_populations(ns.rho);
  SteadyStateResult out;
  out.rho_ss = DensityMatrix::from_trusted(ns.rho);
  out.residual = ns.residual;
  out.p0 = pop(0);
  out.p1 = d > 1 ? pop(1) : 0.0;
  if (d > 1) out.beta_eff = -std::log(out.p1 / out.p0) / (pa.energies()(1) - pa.energies()(0));
  return out;
}

// ---------------------------------------------------------------------------
// low-temperature four-level model

/// p1/p0 in the limit sigma_g -> 1: x/(x+1) with x = (lambda/2w)^2.
inline double min_temp_predict(double lambda, double omega) {
  if (!(lambda > 0.0) || !(omega > 0.0)) throw PreconditionError("min_temp_predict: lambda, omega must be > 0");
  const double x = std::pow(lambda / (2.0 * omega), 2);
  return x / (x + 1.0);
}

inline double min_temp_beta(double lambda, double omega) {
  return -std::log(min_temp_predict(lambda, omega)) / omega;
}

struct FourStateRate {
  double dHA_dt = 0.0;
  double steady_ratio = 0.0;  // p1/p0 where dHA_dt = 0
};

inline FourStateRate four_state_rate(double lambda, double omega, double gamma, double sigma_e,
                                     double sigma_g, double p0, double p1) {
  if (!(lambda > 0.0) || !(omega > 0.0)) throw PreconditionError("four_state_rate: lambda, omega must be > 0");
  const double x = std::pow(lambda / (2.0 * omega), 2);
  FourStateRate out;
  out.dHA_dt = 2.0 * (omega / lambda) * gamma * gamma / (x + 1.0) *
               (x * (p0 - p1) + sigma_e * p0 - sigma_g * p1);
  out.steady_ratio = (x + sigma_e) / (x + sigma_g);
  return out;
}

/// Average number of simultaneous (counter-rotating) excitations per interval.
inline double simultaneous_excitations(double lambda, double omega, double gamma, double sigma_e,
                                       double sigma_g, double mean_n) {
  return 2.0 * gamma * gamma / (lambda * lambda + 4.0 * omega * omega) *
         (sigma_g * (mean_n + 1.0) - sigma_e * mean_n);
}

// ---------------------------------------------------------------------------
// scans and reports

struct ScanPoint {
  double beta = 0.0;
  double lambda = 0.0;
  double p0 = 0.0, p1 = 0.0, beta_eff = 0.0, residual = 0.0;
  bool ok = true;
  std::string note;  // set when the point failed
};

/// Weak-coupling steady state over a (beta, lambda) grid, lambda-major.
inline std::vector<ScanPoint> steady_scan(const JointSystem& sys, const std::vector<double>& betas,
                                          const std::vector<double>& lambdas, unsigned threads = 0) {
  std::vector<ScanPoint> out(betas.size() * lambdas.size());
  if (out.empty()) return out;
  const GeneratorSpec base = decompose(sys, lambdas.front());
  parallel_for(out.size(), threads, [&](std::size_t k) {
    ScanPoint& pt = out[k];
    pt.lambda = lambdas[k / betas.size()];
    pt.beta = betas[k % betas.size()];
    try {
      const GeneratorSpec spec = with_lambda(base, pt.lambda);
      const Matrix rb = thermal_state(sys.h_b, pt.beta).matrix();
      const SteadyStateResult ss = steady_state(weak_reduced_superoperator(spec, rb), sys.h_a);
      pt.p0 = ss.p0;
      pt.p1 = ss.p1;
      pt.beta_eff = ss.beta_eff;
      pt.residual = ss.residual;
    } catch (const AmbiguityError& e) {
      pt.ok = false;
      pt.note = "degenerate null space (dim " + std::to_string(e.null_dim()) + ")";
    }
  });
  return out;
}

/// Eigenvalues of the Hermitian coefficient matrix [s_{w,w'}] (jump-rate
/// spectrum of the canonical Lindblad form).
inline RealVector jump_rate_spectrum(const GeneratorSpec& spec) {
  if (spec.size() == 0) return RealVector();
  Eigen::SelfAdjointEigenSolver<Matrix> es(hermitize(spec.s_coef), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

/// rates(m, n): coefficient of rho_nn in d rho_mm / dt for an assembled
/// reduced generator whose basis is the energy basis.
inline Eigen::MatrixXd population_rates(const Matrix& superop, Index d) {
  Eigen::MatrixXd r(d, d);
  for (Index m = 0; m < d; ++m)
    for (Index n = 0; n < d; ++n) r(m, n) = superop(m + m * d, n + n * d).real();
  return r;
}

}  // namespace qtherm
