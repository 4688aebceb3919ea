#pragma once

// Acceptance checks shared by the `verify` subcommand and the ctest
// acceptance binary. Each check builds its own oracle independently of the
// code path under test and reports the measured figure against its bound.

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "qtherm/cli/commands.hpp"
#include "qtherm/qtherm.hpp"

namespace qtherm::cli {

struct CheckResult {
  CheckResult() = default;
  CheckResult(int id_, std::string name_, double tolerance_, std::string relation_ = "<")
      : id(id_), name(std::move(name_)), tolerance(tolerance_), relation(std::move(relation_)) {}

  int id = 0;
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double tolerance = 0.0;
  std::string relation = "<";  // how measured compares to tolerance when passing
  double seconds = 0.0;
  std::string detail;
};

struct AcceptanceOptions {
  std::set<int> only;  // empty: every criterion
  // test fixture: negate w_meas in the second-law run to prove the suite bites
  bool inject_w_meas_sign_flip = false;
  std::uint64_t seed = 1;
};

namespace acc {

inline JcmParams reference_params() { return JcmParams{}; }

inline std::string fmt(double x) { return format_double(x); }

/// Closed-form 2x2 block on {|n-1,e>, |n,g>} after starting in one of them.
inline Eigen::Matrix2cd block_oracle(int n, double t, const JcmParams& p, bool from_excited) {
  const analytic::JcmAmplitudes a = analytic::amplitudes(n, t, p);
  Eigen::Matrix2cd m;
  if (from_excited) {
    m << std::norm(a.a_n), a.a_n * std::conj(a.b_n), std::conj(a.a_n) * a.b_n, std::norm(a.b_n);
  } else {
    m << std::norm(a.b_n), a.b_n * a.a_n, std::conj(a.a_n) * std::conj(a.b_n), std::norm(a.a_n);
  }
  return m;
}

inline CheckResult ac1() {
  CheckResult r(1, "exact dynamics vs closed-form block amplitudes", 1e-9);
  double worst = 0.0;
  for (double delta : {0.0, 0.5}) {
    JcmParams p;
    p.rwa = true;
    p.n_max = 6;
    p.omega_b = p.omega_a + delta;
    const JointSystem sys = build_jcm(p);
    const Propagator prop(sys.hamiltonian());
    for (int n = 1; n <= 5; ++n)
      for (bool excited : {true, false}) {
        const Index ie = (n - 1) * 2 + 1, ig = n * 2;
        const Vector psi0 = StateVector::basis(sys.total(), excited ? ie : ig).amplitudes();
        for (int k = 0; k <= 400; ++k) {
          const double t = 0.25 * k;
          const Vector psi = prop.apply(psi0, t);
          Eigen::Matrix2cd num;
          num << psi(ie) * std::conj(psi(ie)), psi(ie) * std::conj(psi(ig)), psi(ig) * std::conj(psi(ie)),
              psi(ig) * std::conj(psi(ig));
          worst = std::max(worst, (num - block_oracle(n, t, p, excited)).cwiseAbs().maxCoeff());
        }
      }
  }
  r.measured = worst;
  r.passed = worst < r.tolerance;
  r.detail = "n = 1..5, both block start states, detuning {0, 0.5}, t in [0, 100] step 0.25";
  return r;
}

/// lambda * int_0^inf exp(-lambda t) |b_n(t)|^2 dt by Gauss-Kronrod panels of
/// at most half a Rabi period, truncated where exp(-lambda t) < 1e-17.
inline double poisson_b2_quadrature(int n, double lambda, const JcmParams& p) {
  const double rabi = std::hypot(2.0 * p.gamma * std::sqrt(static_cast<double>(n)), p.detuning());
  const double width = std::min(M_PI / rabi, 1.0 / lambda);
  const double end = 40.0 / lambda;
  auto f = [&](double t) { return lambda * std::exp(-lambda * t) * analytic::b2(n, t, p); };
  double sum = 0.0;
  for (double a = 0.0; a < end; a += width) {
    sum += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, std::min(a + width, end), 0);
  }
  return sum;
}

inline CheckResult ac2() {
  CheckResult r(2, "Poisson-averaged |b_n|^2 closed form vs quadrature", 1e-6);
  double worst = 0.0;
  for (double delta : {0.0, 0.5}) {
    JcmParams p;
    p.omega_b = p.omega_a + delta;
    for (double lambda : {1e-4, 1e-2, 1.0, 1e2})
      for (int n : {1, 5}) {
        const double closed = analytic::mean_b2_poisson(n, lambda, p);
        const double quad = poisson_b2_quadrature(n, lambda, p);
        worst = std::max(worst, std::abs(closed - quad) / std::abs(quad));
      }
  }
  r.measured = worst;
  r.passed = worst < r.tolerance;
  r.detail = "relative error; lambda {1e-4, 1e-2, 1, 1e2}, n {1, 5}, detuning {0, 0.5}";
  return r;
}

inline CheckResult ac3(const AcceptanceOptions& opt) {
  CheckResult r(3, "second-law suite on density-matrix runs", -1e-9, ">=");
  const JointSystem sys = build_jcm(reference_params());
  double min_sprod = std::numeric_limits<double>::infinity(), min_step = min_sprod, max_fl = 0.0;
  std::size_t intervals = 0, violations = 0;
  std::string first_violation;
  for (std::uint64_t seed = opt.seed; seed < opt.seed + 20; ++seed) {
    ProcessConfig cfg;
    cfg.lambda = 1e-2;
    cfg.horizon = 3.0 / cfg.lambda;
    cfg.seed = seed;
    cfg.initial_state_a = StateVector::basis(sys.dim_a, 1);
    ProcessResult res = run_process(cfg, sys);
    std::vector<IntervalLedger> ledgers = res.records.front().ledgers;
    if (opt.inject_w_meas_sign_flip)
      for (IntervalLedger& l : ledgers) l.w_meas = -l.w_meas;
    const SuiteReport rep = second_law_suite(ledgers, {});
    const TimeSeries st = s_tot(ledgers);
    for (std::size_t k = 1; k < st.v.size(); ++k) min_step = std::min(min_step, st.v[k] - st.v[k - 1]);
    intervals += rep.intervals;
    violations += rep.violations.size();
    if (!rep.violations.empty() && first_violation.empty()) {
      const SuiteViolation& v = rep.violations.front();
      first_violation = "; first violation: " + v.check + " (seed " + std::to_string(seed) + ", interval " +
                        std::to_string(v.begin) + ", value " + fmt(v.value) + ")";
    }
    min_sprod = std::min(min_sprod, rep.min_entropy_production);
    max_fl = std::max(max_fl, rep.max_first_law_error);
  }
  r.measured = std::min(min_sprod, min_step);
  r.passed = violations == 0 && r.measured >= r.tolerance && max_fl <= 1e-12;
  r.detail = "20 runs, " + std::to_string(intervals) + " intervals; min dS_A+dS_B and S_tot step = " +
             fmt(r.measured) + "; max first-law error " + fmt(max_fl) + " (bound 1e-12); suite violations " +
             std::to_string(violations) + first_violation;
  return r;
}

inline CheckResult ac4(const AcceptanceOptions& opt) {
  CheckResult r(4, "trajectory ensemble vs density-matrix evolution", 4.0);
  const JointSystem sys = build_jcm(reference_params());
  const double lambda = 1e-2;
  std::vector<double> cps;
  for (int k = 1; k <= 20; ++k) cps.push_back(15.0 * k);
  const DensityMatrix rho_b0 = thermal_state(sys.h_b, 1.0);
  const Matrix ha_joint = embed_a(sys.h_a, sys.dim_b);

  ProcessConfig cfg;
  cfg.lambda = lambda;
  cfg.horizon = cps.back();
  cfg.seed = opt.seed;
  cfg.mode = ProcessMode::Trajectory;
  cfg.n_traj = 10000;
  cfg.initial_state_a = StateVector::basis(sys.dim_a, 1);
  cfg.checkpoints = cps;
  cfg.keep_records = false;

  // (a) independent Poisson draws vs the measurement-time-averaged generator
  const ProcessResult traj = run_process(cfg, sys);
  const Matrix joint0 = kron(DensityMatrix::pure(StateVector::basis(sys.dim_a, 1)).matrix(), rho_b0.matrix());
  const std::vector<Matrix> avg =
      averaged_process(exact_averaged_rate(sys, rho_b0.matrix(), lambda), joint0, sys.total(), cps);
  double worst_a = 0.0;
  for (std::size_t k = 0; k < cps.size(); ++k) {
    const Checkpoint& c = traj.checkpoints[k];
    const double diff = std::abs(c.mean_ha - expectation(ha_joint, avg[k]));
    worst_a = std::max(worst_a, diff / std::max(c.se_ha, 1e-9 / 4.0));
  }

  // (b) one shared interval schedule for both modes
  Rng sched_rng(opt.seed, 0xACu);
  std::vector<double> taus;
  for (double s = 0.0; s <= cfg.horizon;) s += taus.emplace_back(sample_interval(sched_rng, lambda));
  cfg.sampler = schedule_sampler(taus);
  const ProcessResult shared = run_process(cfg, sys);
  ProcessConfig dm = cfg;
  dm.mode = ProcessMode::DensityMatrix;
  const ProcessResult dmres = run_process(dm, sys);
  double worst_b = 0.0;
  for (std::size_t k = 0; k < cps.size(); ++k) {
    const double diff = std::abs(shared.checkpoints[k].mean_ha - dmres.checkpoints[k].mean_ha);
    worst_b = std::max(worst_b, diff / std::max(shared.checkpoints[k].se_ha, 1e-9 / 4.0));
  }
  r.measured = std::max(worst_a, worst_b);
  r.passed = r.measured < r.tolerance;
  r.detail = "max |<H_A> difference| in standard errors over 20 checkpoints: " + fmt(worst_a) +
             " vs averaged density-matrix generator, " + fmt(worst_b) + " vs density-matrix run on a shared schedule (" +
             std::to_string(taus.size()) + " intervals); 1e4 trajectories each";
  return r;
}

inline CheckResult ac5(const AcceptanceOptions& opt) {
  CheckResult r(5, "absorption rate vs Einstein rate", 0.05);
  JcmParams p;
  p.rwa = true;
  p.gamma = 0.01;
  p.omega_b = p.omega_a + 0.2;
  const double lambda = 1e-3, beta = 1.0;
  const JointSystem sys = build_jcm(p);
  const Propagator prop(sys.hamiltonian());
  const DensityMatrix rho_b0 = thermal_state(sys.h_b, beta);
  const StateVector fock1 = StateVector::basis(sys.dim_a, 1);
  const int n = 20000;
  double s = 0.0, s2 = 0.0;
  for (int k = 0; k < n; ++k) {
    Rng rng(opt.seed, static_cast<std::uint64_t>(k) + 1);
    const double tau = sample_interval(rng, lambda);
    const TrajectoryStep step = step_interval(fock1, rho_b0, sys, prop, tau, beta, rng);
    const double absorbed = -step.ledger.dh_a / p.omega_a;
    s += absorbed;
    s2 += absorbed * absorbed;
  }
  const double mean = s / n;
  const double se = std::sqrt(std::max(0.0, s2 / n - mean * mean) / (n - 1));
  const Propagator pb(sys.h_b);
  const RealVector pops = pb.basis_populations(rho_b0.matrix());
  analytic::AtomFieldState st;
  st.p_n.assign(static_cast<std::size_t>(sys.dim_a), 0.0);
  st.p_n[1] = 1.0;
  st.sigma_g = pops(0);
  st.sigma_e = pops(1);
  const double predicted = analytic::einstein_rate(st, lambda, p);
  const double simulated = lambda * mean;
  r.measured = std::abs(simulated / predicted - 1.0);
  r.passed = r.measured < r.tolerance;
  r.detail = "rwa, gamma 0.01, lambda 1e-3, detuning 0.2, 2e4 intervals from Fock 1: simulated " + fmt(simulated) +
             " +- " + fmt(lambda * se) + ", predicted " + fmt(predicted);
  return r;
}

inline CheckResult ac6() {
  CheckResult r(6, "weak-coupling vs exact steady state and early transient", 0.05);
  const JointSystem sys = build_jcm(reference_params());
  const DensityMatrix rho_b0 = thermal_state(sys.h_b, 1.0);
  const Matrix n_a = number_operator(sys.dim_a);
  const Matrix n_joint = embed_a(n_a, sys.dim_b);
  const Matrix joint0 = kron(DensityMatrix::pure(StateVector::basis(sys.dim_a, 1)).matrix(), rho_b0.matrix());
  const double h = M_PI / (20.0 * sys.gamma);
  double worst = 0.0;
  bool signs_differ = true;
  std::ostringstream d;
  for (double lambda : {1e-4, 5e-3, 1e-2, 5e-2}) {
    const LinearMap exact = exact_averaged_rate(sys, rho_b0.matrix(), lambda);
    const LinearMap weak =
        with_measurement_resets(weak_joint_rate(decompose(sys, lambda)), sys.dims(), rho_b0.matrix(), lambda);
    const double ne = expectation(n_a, averaged_steady_state(exact, sys).rho_ss);
    const double nw = expectation(n_a, averaged_steady_state(weak, sys).rho_ss);
    const double rel = std::abs(nw / ne - 1.0);
    worst = std::max(worst, rel);
    auto curvature = [&](const LinearMap& rate) {
      const std::vector<Matrix> s = averaged_process(rate, joint0, sys.total(), {0.0, h, 2.0 * h});
      return expectation(n_joint, s[0]) - 2.0 * expectation(n_joint, s[1]) + expectation(n_joint, s[2]);
    };
    const double ce = curvature(exact), cw = curvature(weak);
    signs_differ = signs_differ && (ce > 0.0) != (cw > 0.0);
    d << "lambda " << fmt(lambda) << ": <n_A> exact " << fmt(ne) << " weak " << fmt(nw) << ", curvature exact "
      << fmt(ce) << " weak " << fmt(cw) << "; ";
  }
  r.measured = worst;
  r.passed = worst < r.tolerance && signs_differ;
  r.detail = d.str() + (signs_differ ? "curvature signs differ" : "curvature signs agree at some lambda");
  return r;
}

inline CheckResult ac7() {
  CheckResult r(7, "van Hove limit approaches the canonical state", 0.01);
  std::vector<double> dist;
  std::ostringstream d;
  for (double gamma : {0.05, 0.02, 0.01}) {
    JcmParams p;
    p.rwa = true;
    p.gamma = gamma;
    const JointSystem sys = build_jcm(p);
    const double lambda = gamma * gamma / 2.5e-3;
    const DensityMatrix rho_b0 = thermal_state(sys.h_b, 1.0);
    const SteadyStateResult ss = averaged_steady_state(exact_averaged_rate(sys, rho_b0.matrix(), lambda), sys);
    dist.push_back(trace_distance(ss.rho_ss, thermal_state(sys.h_a, 1.0)));
    d << "gamma " << fmt(gamma) << ": " << fmt(dist.back()) << "; ";
  }
  bool monotone = true;
  for (std::size_t k = 1; k < dist.size(); ++k) monotone = monotone && dist[k] <= dist[k - 1] + 1e-9;
  r.measured = dist.back();
  r.passed = monotone && r.measured < r.tolerance;
  r.detail = "trace distance to Gibbs(beta = 1): " + d.str() + (monotone ? "non-increasing" : "not monotone");
  return r;
}

inline CheckResult ac8() {
  CheckResult r(8, "minimum-temperature plateau", 0.02);
  JcmParams p;
  p.n_max = 10;
  const JointSystem sys = build_jcm(p);
  const double omega = p.omega_a;
  const GeneratorSpec base = decompose(sys, 1.0);
  double worst_ratio = 0.0, worst_slope = 0.0;
  std::ostringstream d;
  for (double x : {0.05, 0.1, 0.5}) {
    const double lambda = 2.0 * omega * x;
    const GeneratorSpec spec = with_lambda(base, lambda);
    auto solve = [&](double beta) {
      return steady_state(weak_reduced_superoperator(spec, thermal_state(sys.h_b, beta).matrix()), sys.h_a);
    };
    const SteadyStateResult s8 = solve(8.0), s801 = solve(8.01);
    const double predicted = x * x / (x * x + 1.0);
    const double rel = std::abs((s8.p1 / s8.p0) / predicted - 1.0);
    const double slope = std::abs((s801.beta_eff - s8.beta_eff) / 0.01);
    worst_ratio = std::max(worst_ratio, rel);
    worst_slope = std::max(worst_slope, slope);
    d << "x " << fmt(x) << ": p1/p0 " << fmt(s8.p1 / s8.p0) << " vs " << fmt(predicted) << ", dbeta_eff/dbeta "
      << fmt(slope) << "; ";
  }
  r.measured = worst_ratio;
  r.passed = worst_ratio < r.tolerance && worst_slope < 0.01;
  r.detail = d.str() + "slope bound 0.01";
  return r;
}

inline CheckResult ac9() {
  CheckResult r(9, "fast-measurement rate vs Poisson-averaged composition", 0.01);
  JcmParams p;
  p.rwa = true;
  const double lambda = 100.0 * p.gamma;
  const JointSystem sys0 = build_jcm(p);
  const RealVector pb = Propagator(sys0.h_b).basis_populations(thermal_state(sys0.h_b, 1.0).matrix());
  const DensityMatrix rho_b0 = DensityMatrix::diagonal(pb);  // held fixed across detunings
  const double sg = pb(0), se = pb(1);
  const Matrix n_a = number_operator(sys0.dim_a);

  std::vector<RealVector> inputs;
  RealVector fock1 = RealVector::Zero(sys0.dim_a);
  fock1(1) = 1.0;
  RealVector mixed = RealVector::Zero(sys0.dim_a);
  mixed.head(4) << 0.4, 0.3, 0.2, 0.1;
  inputs = {fock1, mixed};

  auto fast_loss = [&](const JcmParams& q, const RealVector& pa) {
    const JointSystem sys = build_jcm(q);
    const DensityMatrix rho(kron(DensityMatrix::diagonal(pa).matrix(), rho_b0.matrix()));
    const FastIncrement inc = fast_map(sys, rho, lambda);
    return -lambda * expectation(embed_a(n_a, sys.dim_b), inc.increment);
  };
  double worst_rel = 0.0, worst_formula = 0.0, worst_delta = 0.0;
  for (const RealVector& pa : inputs) {
    double mean_n = 0.0, composed = 0.0;
    for (Index n = 0; n < pa.size(); ++n) {
      mean_n += static_cast<double>(n) * pa(n);
      composed += pa(n) * (sg * analytic::mean_b2_poisson(static_cast<int>(n), lambda, p) -
                           se * analytic::mean_b2_poisson(static_cast<int>(n) + 1, lambda, p));
    }
    composed *= lambda;
    const double fast = fast_loss(p, pa);
    const double formula = 2.0 * p.gamma * p.gamma / lambda * (sg * mean_n - se * (mean_n + 1.0));
    worst_rel = std::max(worst_rel, std::abs(fast / composed - 1.0));
    worst_formula = std::max(worst_formula, std::abs(fast - formula));
    JcmParams q = p;
    q.omega_b = p.omega_a + 0.5;
    worst_delta = std::max(worst_delta, std::abs(fast_loss(q, pa) - fast));
  }
  r.measured = worst_rel;
  r.passed = worst_rel < r.tolerance && worst_delta < 1e-10;
  r.detail = "lambda = 100 gamma, resonant; |fast - closed rate| " + fmt(worst_formula) +
             "; detuning 0 vs 0.5 difference " + fmt(worst_delta) + " (bound 1e-10)";
  return r;
}

inline Matrix random_hermitian(std::mt19937_64& gen, Index d, double scale) {
  std::normal_distribution<double> nd;
  Matrix m(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) m(i, j) = cplx(nd(gen), nd(gen));
  return scale * hermitize(m);
}

/// Random coupling obeying Tr_A[f(H_A) H_AB] = Tr_B[f(H_B) H_AB] = 0: in the
/// product eigenbasis every element that is diagonal in A or in B is removed.
inline Matrix random_valid_coupling(std::mt19937_64& gen, const Matrix& h_a, const Matrix& h_b) {
  const Index da = h_a.rows(), db = h_b.rows();
  Matrix m = random_hermitian(gen, da * db, 1.0);
  for (Index i = 0; i < da; ++i)
    for (Index k = 0; k < db; ++k)
      for (Index j = 0; j < da; ++j)
        for (Index l = 0; l < db; ++l)
          if (i == j || k == l) m(i * db + k, j * db + l) = 0.0;
  const Matrix v = kron(Propagator(h_a).eigenvectors(), Propagator(h_b).eigenvectors());
  return hermitize(v * m * v.adjoint());
}

inline DensityMatrix random_density(std::mt19937_64& gen, Index d) {
  std::normal_distribution<double> nd;
  Matrix g(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) g(i, j) = cplx(nd(gen), nd(gen));
  const Matrix m = g * g.adjoint();
  return DensityMatrix::from_trusted(m / m.trace().real());
}

inline CheckResult ac10(const AcceptanceOptions& opt) {
  CheckResult r(10, "Klein and R positivity, back-action diagnostic", -1e-9, ">=");
  std::mt19937_64 gen(opt.seed);
  std::uniform_int_distribution<int> da_dist(2, 6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double min_r = std::numeric_limits<double>::infinity(), min_klein = min_r, max_kl_gap = 0.0;
  int r_violations = 0;
  for (int k = 0; k < 1000; ++k) {
    const Index da = da_dist(gen);
    const Index db = std::uniform_int_distribution<Index>(2, 12 / da)(gen);
    JointSystem sys;
    sys.dim_a = da;
    sys.dim_b = db;
    sys.h_a = random_hermitian(gen, da, 1.0 + 5.0 * u(gen));
    sys.h_b = random_hermitian(gen, db, 1.0 + 5.0 * u(gen));
    sys.h_ab = random_valid_coupling(gen, sys.h_a, sys.h_b);
    sys.gamma = 0.02 + u(gen);
    const double beta = 0.1 + 5.0 * u(gen);
    const double tau = 20.0 * u(gen);
    const DensityMatrix rho_a = random_density(gen, da);
    const DensityMatrix rho_b0 = thermal_state(sys.h_b, beta);
    const DmStep step = step_interval(rho_a, rho_b0, sys, UnitaryEvolver(sys), tau, beta);
    const IntervalLedger& l = step.ledger;
    min_r = std::min(min_r, l.r);
    if (l.r < -1e-9) ++r_violations;
    min_klein = std::min(min_klein, -l.w_therm);
    // -W_therm equals the relative entropy of the measured reservoir to its
    // input over beta; ln p0 taken from the energies to avoid underflow
    const RealVector e = Propagator(sys.h_b).energies();
    const double log_z = -beta * e(0) + std::log((-beta * (e.array() - e(0))).exp().sum());
    double kl = 0.0;
    for (Index m = 0; m < db; ++m) {
      const double p = step.reservoir_out(m);
      if (p > 0.0) kl += p * (std::log(p) + beta * e(m) + log_z);
    }
    max_kl_gap = std::max(max_kl_gap, std::abs(-l.w_therm - kl / beta));
  }

  // diagnostic: periodic measurements at the reference point settle into a
  // cycle; booking back-action work as heat gives positive cyclic heat
  const JointSystem sys = build_jcm(reference_params());
  ProcessConfig cfg;
  cfg.lambda = 1e-2;
  cfg.horizon = 100.0 / cfg.lambda;
  cfg.sampler = periodic_sampler(1.0 / cfg.lambda);
  cfg.initial_state_a = StateVector::basis(sys.dim_a, 1);
  const ProcessResult res = run_process(cfg, sys);
  const TrajectoryRecord& rec = res.records.front();
  SuiteOptions normal;
  SuiteOptions diag;
  diag.count_back_action_as_heat = true;
  const SuiteReport rn = second_law_suite(rec.ledgers, rec.states_a, normal);
  const SuiteReport rd = second_law_suite(rec.ledgers, rec.states_a, diag);
  const bool diag_ok = rd.cyclic_windows > 0 && rd.max_cyclic_heat > 1e-10;
  const bool normal_ok = rn.cyclic_windows > 0 && rn.max_cyclic_heat <= 1e-8;

  r.measured = min_r;
  r.passed = r_violations == 0 && min_klein >= -1e-10 && max_kl_gap < 1e-9 && diag_ok && normal_ok;
  std::ostringstream d;
  d << "1000 random intervals (dim <= 12, couplings with vanishing partial traces): min R " << fmt(min_r) << " (" << r_violations
    << " below -1e-9), min -W_therm " << fmt(min_klein) << " (bound -1e-10), max |-W_therm - KL/beta| "
    << fmt(max_kl_gap) << "; periodic run: " << rn.cyclic_windows << " cyclic windows, max sum Q "
    << fmt(rn.max_cyclic_heat) << " (bound 1e-8), back-action-as-heat max sum R " << fmt(rd.max_cyclic_heat)
    << " (must exceed 1e-10)";
  r.detail = d.str();
  return r;
}

namespace detail {
inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

/// Sets QTHERM_THREADS for the lifetime of the guard.
class ThreadsEnv {
 public:
  explicit ThreadsEnv(const std::string& value) {
    if (const char* v = std::getenv("QTHERM_THREADS")) old_ = v;
    setenv("QTHERM_THREADS", value.c_str(), 1);
  }
  ~ThreadsEnv() {
    if (old_) setenv("QTHERM_THREADS", old_->c_str(), 1);
    else unsetenv("QTHERM_THREADS");
  }

 private:
  std::optional<std::string> old_;
};
}  // namespace detail

inline CheckResult ac11(const AcceptanceOptions& opt) {
  CheckResult r(11, "simulate output is byte-deterministic", 0.5);
  const auto root = std::filesystem::temp_directory_path() / ("qtherm-determinism-" + std::to_string(::getpid()));
  RunConfig cfg;
  cfg.seed = opt.seed;
  cfg.mode = SimMode::Both;
  cfg.n_traj = 256;
  cfg.checkpoints = 31;
  std::vector<std::vector<std::filesystem::path>> files;
  for (const char* threads : {"1", "3"}) {
    const detail::ThreadsEnv env(threads);
    cfg.out = (root / threads).string();
    std::ostringstream quiet;
    files.push_back(cmd_simulate(cfg, quiet, true).files);
  }
  int differing = 0, compared = 0;
  for (std::size_t k = 0; k < files[0].size(); ++k) {
    if (files[0][k].extension() != ".csv") continue;
    ++compared;
    if (detail::slurp(files[0][k]) != detail::slurp(files[1][k])) ++differing;
  }
  std::filesystem::remove_all(root);
  r.measured = differing;
  r.passed = differing == 0 && compared > 0;
  r.detail = std::to_string(compared) + " CSV files compared between 1 and 3 worker threads; " +
             std::to_string(differing) + " differ";
  return r;
}

}  // namespace acc

/// Runs the selected criteria in order and times each one. A criterion that
/// throws is reported as failed with the error text.
inline std::vector<CheckResult> run_acceptance(const AcceptanceOptions& opt = {},
                                               const std::function<void(const CheckResult&)>& on_result = {}) {
  const std::vector<std::pair<int, std::function<CheckResult()>>> all = {
      {1, [] { return acc::ac1(); }},       {2, [] { return acc::ac2(); }},
      {3, [&] { return acc::ac3(opt); }},   {4, [&] { return acc::ac4(opt); }},
      {5, [&] { return acc::ac5(opt); }},   {6, [] { return acc::ac6(); }},
      {7, [] { return acc::ac7(); }},       {8, [] { return acc::ac8(); }},
      {9, [] { return acc::ac9(); }},       {10, [&] { return acc::ac10(opt); }},
      {11, [&] { return acc::ac11(opt); }},
  };
  // runtime budgets in seconds
  const std::map<int, double> budget = {{1, 60}, {2, 60}, {3, 60}, {4, 600}};
  std::vector<CheckResult> out;
  for (const auto& [id, fn] : all) {
    if (!opt.only.empty() && !opt.only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    CheckResult r;
    try {
      r = fn();
    } catch (const std::exception& e) {
      r.id = id;
      r.name = "criterion " + std::to_string(id);
      r.passed = false;
      r.detail = std::string("error: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (const auto b = budget.find(id); b != budget.end() && r.seconds > b->second) {
      r.passed = false;
      r.detail += "; runtime " + acc::fmt(r.seconds) + " s exceeds " + acc::fmt(b->second) + " s";
    }
    if (on_result) on_result(r);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace qtherm::cli
