#pragma once

// Per-interval heat, work and entropy bookkeeping, and the second-law checks
// run over sequences of intervals.
//
// Sign conventions: Q is heat flowing into A from the reservoir,
// Q = -dS_B/beta, and W = dH_A - Q. W_therm = -dH_B + dS_B/beta is the work
// a quasistatic reset of B would deliver; -W_therm >= 0 for a thermal input.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "qtherm/models.hpp"

namespace qtherm {

struct IntervalLedger {
  double t = 0.0;       // measurement time closing the interval
  double tau = 0.0;     // interval length
  double dh_a = 0.0;
  double dh_b = 0.0;
  double w_meas = 0.0;  // -gamma <H_AB> just before the measurement
  double w_couple = 0.0;  // gamma <H_AB> right after coupling (0 for JCM inputs)
  double ds_a = 0.0;
  double ds_b = 0.0;    // energy-basis (diagonal) entropy of B
  double q = 0.0;
  double w_therm = 0.0;
  double w = 0.0;
  double r = 0.0;       // dH_A + dH_B - dS_B/beta
  double beta = 1.0;
  bool heat_defined = true;  // false at beta = 0
};

namespace detail {
inline void require_energy_diagonal(const DensityMatrix& rho, const Propagator& basis, const char* what) {
  const Matrix m = basis.to_eigenbasis(rho.matrix());
  const Matrix off = m - Matrix(m.diagonal().asDiagonal());
  if (off.size() && off.cwiseAbs().maxCoeff() > 1e-9) {
    throw PreconditionError(std::string(what) + ": reservoir state not diagonal in the H_B basis");
  }
}
}  // namespace detail

/// Fills every ledger entry from the marginals at the start and end of one
/// interval. Both reservoir marginals must be diagonal in the H_B basis.
inline IntervalLedger ledger_for_interval(const DensityMatrix& rho_a_start, const DensityMatrix& rho_a_end,
                                          const DensityMatrix& rho_b_start, const DensityMatrix& rho_b_end,
                                          double h_ab_expect_pre_meas, const JointSystem& sys, double beta,
                                          double h_ab_expect_start = 0.0) {
  if (rho_a_start.dim() != sys.dim_a || rho_a_end.dim() != sys.dim_a || rho_b_start.dim() != sys.dim_b ||
      rho_b_end.dim() != sys.dim_b) {
    throw ShapeError("ledger_for_interval: dimension mismatch");
  }
  if (std::isnan(beta) || beta < 0.0) throw PreconditionError("ledger_for_interval: beta must be >= 0");
  const Propagator basis_b(sys.h_b);
  detail::require_energy_diagonal(rho_b_start, basis_b, "ledger_for_interval");
  detail::require_energy_diagonal(rho_b_end, basis_b, "ledger_for_interval");

  IntervalLedger l;
  l.beta = beta;
  l.dh_a = expectation(sys.h_a, rho_a_end) - expectation(sys.h_a, rho_a_start);
  l.dh_b = expectation(sys.h_b, rho_b_end) - expectation(sys.h_b, rho_b_start);
  l.w_meas = -sys.gamma * h_ab_expect_pre_meas;
  l.w_couple = sys.gamma * h_ab_expect_start;
  l.ds_a = von_neumann_entropy(rho_a_end) - von_neumann_entropy(rho_a_start);
  l.ds_b = diag_entropy(rho_b_end, basis_b) - diag_entropy(rho_b_start, basis_b);
  if (beta == 0.0) {
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    l.heat_defined = false;
    l.q = l.w_therm = l.w = l.r = nan;
    return l;
  }
  const double ts = l.ds_b / beta;  // zero at beta = inf
  l.q = -ts;
  l.w_therm = -l.dh_b + ts;
  l.w = l.w_therm + l.dh_a + l.dh_b;
  l.r = l.dh_a + l.dh_b - ts;
  return l;
}

struct LinearHeat {
  double ds_b_linear = 0.0;
  double dq_linear = 0.0;
};

/// Linearized reservoir entropy and heat about a canonical rho_B(0).
inline LinearHeat approx_heat_small_change(const DensityMatrix& rho_b_start, const DensityMatrix& rho_b_end,
                                           const Matrix& h_b, double beta) {
  if (trace_distance(rho_b_start, thermal_state(h_b, beta)) > 1e-9) {
    throw PreconditionError("approx_heat_small_change: rho_B(0) is not canonical at beta");
  }
  const Propagator basis(h_b);
  const RealVector p = basis.basis_populations(rho_b_start.matrix());
  const RealVector dp = basis.basis_populations(rho_b_end.matrix()) - p;
  LinearHeat out;
  for (Index j = 0; j < p.size(); ++j)
    if (p(j) > 0.0) out.ds_b_linear -= dp(j) * std::log(p(j));
  out.dq_linear = -expectation(h_b, Matrix(rho_b_end.matrix() - rho_b_start.matrix()));
  return out;
}

struct TraditionalQW {
  std::vector<double> q_trad;
  std::vector<double> w_trad;
};

/// Q = tr[H_A (rho_A(t) - rho_A(0))], W = 0: the time-independent H_A
/// accounting used as a baseline.
inline TraditionalQW traditional_qw(const std::vector<Matrix>& rho_a_series, const Matrix& h_a) {
  TraditionalQW out;
  if (rho_a_series.empty()) return out;
  const double e0 = expectation(h_a, rho_a_series.front());
  for (const Matrix& r : rho_a_series) {
    out.q_trad.push_back(expectation(h_a, r) - e0);
    out.w_trad.push_back(0.0);
  }
  return out;
}

struct TimeSeries {
  std::vector<double> t;
  std::vector<double> v;
};

/// S_tot at t = 0 and after each interval: S_A(t) - S_A(0) - sum beta_k Q_k.
inline TimeSeries s_tot(const std::vector<IntervalLedger>& ledgers) {
  TimeSeries out;
  out.t.push_back(0.0);
  out.v.push_back(0.0);
  double acc = 0.0;
  for (const IntervalLedger& l : ledgers) {
    if (!l.heat_defined) throw PreconditionError("s_tot: ledger with undefined heat");
    acc += l.ds_a - (std::isinf(l.beta) ? -l.ds_b : l.beta * l.q);
    out.t.push_back(l.t);
    out.v.push_back(acc);
  }
  return out;
}

// ---------------------------------------------------------------------------
// second-law suite

struct SuiteOptions {
  double entropy_tol = 1e-9;
  double first_law_tol = 1e-12;
  double klein_tol = 1e-9;
  double balance_tol = 1e-9;
  double cycle_distance = 1e-6;
  double cycle_heat_tol = 1e-8;
  // diagnostic: book the back-action work as heat (heat := R) in the cyclic check
  bool count_back_action_as_heat = false;
  // upper bound on cyclic windows examined; 0 = all
  std::size_t max_windows = 0;
};

struct SuiteViolation {
  std::string check;
  std::size_t begin = 0;  // first interval index
  std::size_t end = 0;    // one past the last interval index
  double value = 0.0;
};

struct SuiteReport {
  std::vector<SuiteViolation> violations;
  std::size_t intervals = 0;
  std::size_t cyclic_windows = 0;
  double min_entropy_production = std::numeric_limits<double>::infinity();
  double max_first_law_error = 0.0;
  double min_neg_w_therm = std::numeric_limits<double>::infinity();
  double min_r = std::numeric_limits<double>::infinity();  // recorded, not asserted
  double max_balance_error = 0.0;
  double max_cyclic_heat = -std::numeric_limits<double>::infinity();

  bool passed() const { return violations.empty(); }
  std::size_t count(const std::string& check) const {
    std::size_t n = 0;
    for (const auto& v : violations) n += v.check == check;
    return n;
  }
};

/// Checks a deterministic interval sequence. rho_a holds the A state at t = 0
/// and after each interval (size = ledgers + 1); it may be empty, which skips
/// the cyclic-window check.
inline SuiteReport second_law_suite(const std::vector<IntervalLedger>& ledgers, const std::vector<Matrix>& rho_a,
                                    const SuiteOptions& opt = {}) {
  if (!rho_a.empty() && rho_a.size() != ledgers.size() + 1) {
    throw ShapeError("second_law_suite: need one A state per measurement plus the initial one");
  }
  SuiteReport rep;
  rep.intervals = ledgers.size();
  for (std::size_t k = 0; k < ledgers.size(); ++k) {
    const IntervalLedger& l = ledgers[k];
    const double sprod = l.ds_a + l.ds_b;
    rep.min_entropy_production = std::min(rep.min_entropy_production, sprod);
    if (sprod < -opt.entropy_tol) rep.violations.push_back({"entropy", k, k + 1, sprod});
    if (!l.heat_defined) continue;
    const double fl = std::abs(l.dh_a - (l.q + l.w));
    rep.max_first_law_error = std::max(rep.max_first_law_error, fl);
    if (fl > opt.first_law_tol) rep.violations.push_back({"first_law", k, k + 1, fl});
    rep.min_neg_w_therm = std::min(rep.min_neg_w_therm, -l.w_therm);
    if (-l.w_therm < -opt.klein_tol) rep.violations.push_back({"klein", k, k + 1, -l.w_therm});
    rep.min_r = std::min(rep.min_r, l.r);
    // energy conservation over the coupled evolution: the back-action work
    // is what the two marginals gain beyond the coupling energy
    const double bal = std::abs(l.dh_a + l.dh_b - l.w_meas - l.w_couple);
    rep.max_balance_error = std::max(rep.max_balance_error, bal);
    if (bal > opt.balance_tol) rep.violations.push_back({"energy_balance", k, k + 1, bal});
  }

  if (rho_a.empty()) return rep;
  const std::size_t n = rho_a.size();
  std::vector<RealVector> pops(n);
  for (std::size_t k = 0; k < n; ++k) pops[k] = rho_a[k].diagonal().real();
  std::vector<double> prefix(n, 0.0);  // prefix[k] = heat over intervals [0, k)
  for (std::size_t k = 1; k < n; ++k) {
    const IntervalLedger& l = ledgers[k - 1];
    const double h = opt.count_back_action_as_heat ? l.r : l.q;
    prefix[k] = prefix[k - 1] + (l.heat_defined ? h : 0.0);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      if (opt.max_windows && rep.cyclic_windows >= opt.max_windows) return rep;
      // diagonal distance bounds the trace distance from below
      if (0.5 * (pops[i] - pops[j]).cwiseAbs().sum() >= opt.cycle_distance) continue;
      if (trace_distance(rho_a[i], rho_a[j]) >= opt.cycle_distance) continue;
      ++rep.cyclic_windows;
      const double sum = prefix[j] - prefix[i];
      rep.max_cyclic_heat = std::max(rep.max_cyclic_heat, sum);
      if (sum > opt.cycle_heat_tol) rep.violations.push_back({"cyclic_heat", i, j, sum});
    }
  return rep;
}

struct EnsembleSuiteReport {
  double mean_entropy_production = 0.0;  // per-trajectory total, averaged
  double se_entropy_production = 0.0;
  double max_first_law_error = 0.0;
  bool passed = true;
};

/// Ensemble form: trajectory totals of dS_A + dS_B must be non-negative on
/// average within n_se standard errors; the first law holds per interval.
inline EnsembleSuiteReport second_law_suite_ensemble(const std::vector<std::vector<IntervalLedger>>& runs,
                                                     double n_se = 4.0, double first_law_tol = 1e-12) {
  EnsembleSuiteReport rep;
  if (runs.empty()) return rep;
  double s = 0.0, s2 = 0.0;
  for (const auto& run : runs) {
    double tot = 0.0;
    for (const IntervalLedger& l : run) {
      tot += l.ds_a + l.ds_b;
      if (l.heat_defined) rep.max_first_law_error = std::max(rep.max_first_law_error, std::abs(l.dh_a - (l.q + l.w)));
    }
    s += tot;
    s2 += tot * tot;
  }
  const double n = static_cast<double>(runs.size());
  rep.mean_entropy_production = s / n;
  rep.se_entropy_production = runs.size() > 1 ? std::sqrt(std::max(0.0, (s2 / n - (s / n) * (s / n)) / (n - 1.0))) : 0.0;
  rep.passed = rep.mean_entropy_production >= -n_se * rep.se_entropy_production - 1e-9 &&
               rep.max_first_law_error <= first_law_tol;
  return rep;
}

}  // namespace qtherm
