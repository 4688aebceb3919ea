#include <gtest/gtest.h>

#include <random>

#include "qtherm/analytic.hpp"
#include "qtherm/engine.hpp"
#include "test_support.hpp"

using namespace qtherm;

namespace {

JcmParams jcm(bool rwa, double detuning = 0.0, int n_max = 3, double gamma = 0.05) {
  JcmParams p;
  p.rwa = rwa;
  p.omega_b = p.omega_a + detuning;
  p.n_max = n_max;
  p.gamma = gamma;
  return p;
}

double max_abs(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

double binary_entropy(double p) { return -p * std::log(p) - (1.0 - p) * std::log(1.0 - p); }

ProcessConfig dm_config(const JointSystem& sys, double lambda, double horizon, Index fock = 1) {
  ProcessConfig cfg;
  cfg.lambda = lambda;
  cfg.horizon = horizon;
  cfg.initial_state_a = StateVector::basis(sys.dim_a, fock);
  return cfg;
}

// Random reservoir marginal diagonal in the H_B eigenbasis.
DensityMatrix random_diagonal(std::mt19937_64& gen, Index d) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  RealVector p(d);
  for (Index k = 0; k < d; ++k) p(k) = u(gen);
  return DensityMatrix::diagonal(p / p.sum());
}

}  // namespace

// ---------------------------------------------------------------------------
// random draws

TEST(Random, ExponentialIntervals) {
  Rng rng(5);
  const double lambda = 0.25;
  const int n = 200000;
  double s = 0.0, s2 = 0.0;
  int beyond = 0;
  for (int k = 0; k < n; ++k) {
    const double t = sample_interval(rng, lambda);
    ASSERT_GE(t, 0.0);
    s += t;
    s2 += t * t;
    beyond += t > 2.0 / lambda;
  }
  const double mean = s / n, var = s2 / n - mean * mean;
  EXPECT_NEAR(mean, 1.0 / lambda, 4.0 * (1.0 / lambda) / std::sqrt(n));
  EXPECT_NEAR(var * lambda * lambda, 1.0, 0.03);
  const double tail = std::exp(-2.0);
  EXPECT_NEAR(static_cast<double>(beyond) / n, tail, 4.0 * std::sqrt(tail * (1 - tail) / n));
  EXPECT_THROW(sample_interval(rng, 0.0), PreconditionError);
}

TEST(Random, DiscreteFrequenciesAndZeroWeights) {
  Rng rng(6);
  const std::vector<double> p{0.2, 0.0, 0.5, 0.3};
  std::vector<int> hits(p.size(), 0);
  const int n = 100000;
  for (int k = 0; k < n; ++k) ++hits[sample_discrete(rng, p)];
  EXPECT_EQ(hits[1], 0);
  for (std::size_t k = 0; k < p.size(); ++k)
    EXPECT_NEAR(hits[k] / static_cast<double>(n), p[k], 4.0 * std::sqrt(p[k] * (1 - p[k]) / n) + 1e-12);
}

TEST(Random, StreamsAreReproducibleAndDistinct) {
  Rng a(7, 3), b(7, 3), c(7, 4), d(8, 3);
  for (int k = 0; k < 10; ++k) {
    const double x = a.uniform();
    EXPECT_EQ(x, b.uniform());
    EXPECT_NE(x, c.uniform());
    EXPECT_NE(x, d.uniform());
  }
}

// ---------------------------------------------------------------------------
// single intervals

TEST(StepInterval, UncoupledIntervalLeavesEverythingUnchanged) {
  const JointSystem sys = build_jcm(jcm(false, 0.0, 3, 0.0));
  std::mt19937_64 gen(21);
  const DensityMatrix ra = test::random_density(gen, sys.dim_a), rb = thermal_state(sys.h_b, 0.7);
  const DmStep s = step_interval(ra, rb, sys, UnitaryEvolver(sys), 3.3, 0.7);
  EXPECT_LT(max_abs(s.rho_a_end - evolve(ra, Propagator(sys.h_a), 3.3).matrix()), 1e-12);
  EXPECT_LT((s.reservoir_out - rb.populations()).cwiseAbs().maxCoeff(), 1e-14);
  for (double v : {s.ledger.dh_a, s.ledger.dh_b, s.ledger.ds_a, s.ledger.ds_b, s.ledger.q, s.ledger.w, s.ledger.w_meas})
    EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(StepInterval, RejectsBadInputs) {
  const JointSystem sys = build_jcm(jcm(true));
  const DensityMatrix ra = DensityMatrix::maximally_mixed(sys.dim_a);
  EXPECT_THROW(step_interval(ra, thermal_state(sys.h_b, 1.0), sys, UnitaryEvolver(sys), -1.0, 1.0),
               PreconditionError);
  const DensityMatrix plus = DensityMatrix::pure(StateVector::normalized(Vector::Ones(2)));
  EXPECT_THROW(step_interval(ra, plus, sys, UnitaryEvolver(sys), 1.0, 1.0), PreconditionError);
}

TEST(StepInterval, OutcomeProbabilityIsClosedFormTransfer) {
  for (double d : {0.0, 0.3}) {
    const JcmParams p = jcm(true, d);
    const JointSystem sys = build_jcm(p);
    const Propagator prop(sys.hamiltonian());
    Rng rng(1);
    for (int n = 1; n <= p.n_max; ++n) {
      const double tau = 7.0 + n;
      // from |n-1, e>: reservoir found in g with probability |b_n|^2
      const TrajectoryStep s = step_interval_from_level(StateVector::basis(sys.dim_a, n - 1), 1,
                                                        thermal_state(sys.h_b, 1.0), sys, prop, tau, 1.0, rng);
      EXPECT_NEAR(s.reservoir_out(0), analytic::b2(n, tau, p), 1e-12);
      EXPECT_NEAR(s.reservoir_out.sum(), 1.0, 1e-13);
    }
  }
}

TEST(StepInterval, TrajectoryOutcomeFrequencies) {
  const JcmParams p = jcm(true);
  const JointSystem sys = build_jcm(p);
  const Propagator prop(sys.hamiltonian());
  const DensityMatrix rb = thermal_state(sys.h_b, kInfiniteBeta);
  const double tau = 5.0, pe = analytic::b2(1, tau, p);
  Rng rng(22);
  const int n = 20000;
  int emitted = 0;
  for (int k = 0; k < n; ++k) {
    // |1, g>: the photon is absorbed with probability |b_1|^2
    const TrajectoryStep s = step_interval(StateVector::basis(sys.dim_a, 1), rb, sys, prop, tau, 1.0, rng);
    emitted += s.outcome.m == 1;
    EXPECT_NEAR(s.psi_a_end.norm(), 1.0, 1e-13);
    ASSERT_EQ(s.psi_a_end.cwiseAbs().maxCoeff(), std::abs(s.psi_a_end(s.outcome.m == 1 ? 0 : 1)));
  }
  EXPECT_NEAR(emitted / static_cast<double>(n), pe, 4.0 * std::sqrt(pe * (1 - pe) / n));
}

TEST(StepInterval, TrajectoryLedgerMatchesDensityMatrixStep) {
  const JointSystem sys = build_jcm(jcm(false, 0.2));
  const Propagator prop(sys.hamiltonian());
  const DensityMatrix rb = thermal_state(sys.h_b, 0.4);
  std::mt19937_64 gen(23);
  Rng rng(23);
  for (int trial = 0; trial < 3; ++trial) {
    const StateVector psi = StateVector::normalized(test::ginibre(gen, sys.dim_a).col(0));
    const TrajectoryStep t = step_interval(psi, rb, sys, prop, 4.0, 0.4, rng);
    const DmStep d = step_interval(DensityMatrix::pure(psi), rb, sys, UnitaryEvolver(sys), 4.0, 0.4);
    EXPECT_NEAR(t.ledger.q, d.ledger.q, 1e-12);
    EXPECT_NEAR(t.ledger.w_meas, d.ledger.w_meas, 1e-12);
    EXPECT_NEAR(t.ledger.ds_a, d.ledger.ds_a, 1e-10);
  }
}

// ---------------------------------------------------------------------------
// interval ledger

TEST(Ledger, FullTransferFromThermalAtomIntoVacuum) {
  // tau = pi/(2 gamma) moves |0,e> to |1,g> completely: the atom ends in g
  const JcmParams p = jcm(true);
  const JointSystem sys = build_jcm(p);
  const double beta = 0.5, tau = M_PI / (2.0 * p.gamma);
  const DmStep s = step_interval(DensityMatrix::pure(StateVector::basis(sys.dim_a, 0)), thermal_state(sys.h_b, beta),
                                 sys, UnitaryEvolver(sys), tau, beta);
  const double se = 1.0 / (1.0 + std::exp(beta * p.omega_b));
  EXPECT_NEAR(s.ledger.dh_a, p.omega_a * se, 1e-10);
  EXPECT_NEAR(s.ledger.q, binary_entropy(se) / beta, 1e-9);
  EXPECT_GT(s.ledger.q, 0.0);
  EXPECT_NEAR(s.ledger.w, s.ledger.dh_a - s.ledger.q, 1e-14);
  EXPECT_NEAR(s.ledger.ds_a, binary_entropy(se), 1e-9);
}

TEST(Ledger, ThermodynamicWorkIsRelativeEntropy) {
  std::mt19937_64 gen(24);
  const JointSystem sys = build_jcm(jcm(false));
  for (double beta : {0.3, 1.0, 4.0}) {
    const DensityMatrix rb0 = thermal_state(sys.h_b, beta);
    const DensityMatrix rb1 = random_diagonal(gen, 2);
    const DensityMatrix ra = test::random_density(gen, sys.dim_a);
    const IntervalLedger l = ledger_for_interval(ra, ra, rb0, rb1, 0.0, sys, beta);
    EXPECT_NEAR(-l.w_therm, relative_entropy(rb1, rb0) / beta, 1e-12);
    EXPECT_NEAR(l.dh_a, l.q + l.w, 1e-14);
    EXPECT_NEAR(l.r, l.dh_a + l.dh_b + l.q, 1e-14);
  }
}

TEST(Ledger, InfiniteTemperatureLeavesHeatUndefined) {
  const JointSystem sys = build_jcm(jcm(true));
  const DensityMatrix ra = DensityMatrix::maximally_mixed(sys.dim_a), rb = DensityMatrix::maximally_mixed(2);
  const IntervalLedger l = ledger_for_interval(ra, ra, rb, rb, 0.0, sys, 0.0);
  EXPECT_FALSE(l.heat_defined);
  EXPECT_TRUE(std::isnan(l.q));
  EXPECT_THROW(s_tot({l}), PreconditionError);
  EXPECT_THROW(ledger_for_interval(ra, ra, rb, rb, 0.0, sys, -1.0), PreconditionError);
}

TEST(Ledger, TotalEntropySeries) {
  IntervalLedger a, b;
  a.t = 1.0;
  a.ds_a = 0.2;
  a.q = 0.1;
  a.beta = 2.0;
  b.t = 3.0;
  b.ds_a = -0.05;
  b.ds_b = 0.3;
  b.beta = kInfiniteBeta;
  const TimeSeries s = s_tot({a, b});
  ASSERT_EQ(s.v.size(), 3u);
  EXPECT_EQ(s.v[0], 0.0);
  EXPECT_NEAR(s.v[1], 0.2 - 2.0 * 0.1, 1e-15);
  EXPECT_NEAR(s.v[2], s.v[1] - 0.05 + 0.3, 1e-15);
  EXPECT_EQ(s.t[2], 3.0);
}

TEST(LinearHeat, VanishesWithoutChange) {
  const JointSystem sys = build_jcm(jcm(true));
  const DensityMatrix rb = thermal_state(sys.h_b, 0.8);
  const LinearHeat h = approx_heat_small_change(rb, rb, sys.h_b, 0.8);
  EXPECT_EQ(h.ds_b_linear, 0.0);
  EXPECT_EQ(h.dq_linear, 0.0);
  EXPECT_THROW(approx_heat_small_change(DensityMatrix::maximally_mixed(2), rb, sys.h_b, 0.8), PreconditionError);
}

TEST(LinearHeat, SecondOrderRemainder) {
  const JointSystem sys = build_jcm(jcm(true));
  const double beta = 0.4;
  const DensityMatrix rb = thermal_state(sys.h_b, beta);
  const RealVector p = rb.populations();
  double prev = 0.0;
  for (double delta : {1e-3, 5e-4}) {
    RealVector q = p;
    q(0) -= delta;
    q(1) += delta;
    const DensityMatrix end = DensityMatrix::diagonal(q);
    const LinearHeat h = approx_heat_small_change(rb, end, sys.h_b, beta);
    // first order: dS_B = beta dH_B for a canonical start
    EXPECT_NEAR(h.ds_b_linear, -beta * h.dq_linear, 1e-15);
    const Propagator basis(sys.h_b);
    const double exact = diag_entropy(end, basis) - diag_entropy(rb, basis);
    const double rem = std::abs(exact - h.ds_b_linear);
    if (prev > 0.0) {
      EXPECT_NEAR(prev / rem, 4.0, 0.05);
    }
    prev = rem;
  }
}

TEST(TraditionalAccounting, HeatIsEnergyChangeOfA) {
  const JointSystem sys = build_jcm(jcm(true));
  std::vector<Matrix> series;
  for (Index n : {1, 0, 2}) series.push_back(DensityMatrix::pure(StateVector::basis(sys.dim_a, n)).matrix());
  const TraditionalQW qw = traditional_qw(series, sys.h_a);
  ASSERT_EQ(qw.q_trad.size(), 3u);
  EXPECT_EQ(qw.q_trad[0], 0.0);
  EXPECT_NEAR(qw.q_trad[1], -2.0 * M_PI, 1e-12);
  EXPECT_NEAR(qw.q_trad[2], 2.0 * M_PI, 1e-12);
  for (double w : qw.w_trad) EXPECT_EQ(w, 0.0);
  EXPECT_TRUE(traditional_qw({}, sys.h_a).q_trad.empty());
}

// ---------------------------------------------------------------------------
// process runs

TEST(Process, RabiOscillationWithinFirstInterval) {
  const JcmParams p = jcm(true, 0.0, 3);
  const JointSystem sys = build_jcm(p);
  ProcessConfig cfg = dm_config(sys, 0.01, 50.0);
  cfg.beta.values = {kInfiniteBeta};
  cfg.sampler = schedule_sampler({1e9});
  for (int k = 0; k <= 20; ++k) cfg.checkpoints.push_back(2.5 * k);
  const ProcessResult r = run_process(cfg, sys);
  ASSERT_EQ(r.checkpoints.size(), cfg.checkpoints.size());
  EXPECT_TRUE(r.records.front().ledgers.empty());
  for (const Checkpoint& c : r.checkpoints) {
    // |1, g>: <H_A> = omega (3/2 - |b_1|^2)
    EXPECT_NEAR(c.mean_ha, p.omega_a * (1.5 - analytic::b2(1, c.t, p)), 1e-10) << c.t;
    EXPECT_NEAR(c.mean_ha + c.mean_hb + p.gamma * c.mean_hab, p.omega_a * 1.5 - p.omega_b / 2, 1e-10);
  }
}

TEST(Process, RotatingWaveSteadyStateIsGeometric) {
  const JcmParams p = jcm(true, 0.0, 5);
  const JointSystem sys = build_jcm(p);
  const double beta = 0.3;
  const DensityMatrix rb = thermal_state(sys.h_b, beta);
  for (double lambda : {0.02, 1.0}) {
    const SteadyStateResult ss = averaged_steady_state(exact_averaged_rate(sys, rb.matrix(), lambda), sys);
    const std::vector<double> target = analytic::steady_pn(rb.populations()(1), rb.populations()(0), p.n_max);
    for (Index n = 0; n < sys.dim_a; ++n) EXPECT_NEAR(ss.rho_ss.matrix()(n, n).real(), target[n], 1e-8) << lambda;
  }
}

TEST(Process, ZeroHorizonHasNoIntervals) {
  const JointSystem sys = build_jcm(jcm(false));
  const ProcessConfig cfg = dm_config(sys, 1.0, 0.0);
  const ProcessResult r = run_process(cfg, sys);
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_TRUE(r.records.front().ledgers.empty());
  EXPECT_EQ(r.records.front().populations_a.size(), 1u);
}

TEST(Process, DensityMatrixRunStaysPhysical) {
  const JointSystem sys = build_jcm(jcm(false, 0.0, 4));
  ProcessConfig cfg = dm_config(sys, 0.5, 200.0);
  cfg.beta.values = {1.0};
  const ProcessResult r = run_process(cfg, sys);
  const TrajectoryRecord& rec = r.records.front();
  ASSERT_GT(rec.ledgers.size(), 50u);
  for (const Matrix& m : rec.states_a) {
    EXPECT_NEAR(m.trace().real(), 1.0, 1e-12);
    EXPECT_GT(min_eigenvalue(m), -1e-12);
  }
  const SuiteReport rep = second_law_suite(rec.ledgers, {});
  EXPECT_LT(rep.max_balance_error, 1e-9);
  EXPECT_LT(rep.max_first_law_error, 1e-12);
  EXPECT_GE(rep.min_neg_w_therm, -1e-10);
  EXPECT_GE(rep.min_entropy_production, -1e-9);
}

TEST(Process, TrajectoryEnsembleIsThreadIndependent) {
  const JointSystem sys = build_jcm(jcm(false, 0.0, 3));
  ProcessConfig cfg = dm_config(sys, 0.2, 30.0);
  cfg.mode = ProcessMode::Trajectory;
  cfg.n_traj = 150;  // three chunks
  cfg.checkpoints = {0.0, 10.0, 30.0};
  cfg.threads = 1;
  const ProcessResult one = run_process(cfg, sys);
  cfg.threads = 3;
  const ProcessResult three = run_process(cfg, sys);
  ASSERT_EQ(one.records.size(), 150u);
  for (std::size_t k = 0; k < cfg.checkpoints.size(); ++k) {
    EXPECT_EQ(one.checkpoints[k].mean_ha, three.checkpoints[k].mean_ha);
    EXPECT_EQ(one.checkpoints[k].q_cum, three.checkpoints[k].q_cum);
    EXPECT_EQ(one.checkpoints[k].n_eff, 150);
  }
  cfg.seed = 2;
  EXPECT_NE(run_process(cfg, sys).checkpoints[2].mean_ha, one.checkpoints[2].mean_ha);
  EXPECT_NEAR(one.checkpoints[0].se_ha, 0.0, 1e-6);
}

TEST(Process, ConfigValidation) {
  const JointSystem sys = build_jcm(jcm(false));
  ProcessConfig cfg = dm_config(sys, 1.0, 10.0);
  cfg.checkpoints = {5.0, 1.0};
  EXPECT_THROW(run_process(cfg, sys), PreconditionError);
  cfg = dm_config(sys, 1.0, 10.0);
  cfg.initial_state_a = StateVector::basis(2, 0);
  EXPECT_THROW(run_process(cfg, sys), ShapeError);
  cfg = dm_config(sys, -1.0, 10.0);
  EXPECT_THROW(run_process(cfg, sys), PreconditionError);
}

// ---------------------------------------------------------------------------
// second-law suite

TEST(Suite, UncoupledRunIsCyclicWithNoHeat) {
  const JointSystem sys = build_jcm(jcm(false, 0.0, 3, 0.0));
  ProcessConfig cfg = dm_config(sys, 1.0, 20.0);
  const ProcessResult r = run_process(cfg, sys);
  const TrajectoryRecord& rec = r.records.front();
  const SuiteReport rep = second_law_suite(rec.ledgers, rec.states_a);
  EXPECT_TRUE(rep.passed());
  const std::size_t n = rec.states_a.size();
  EXPECT_EQ(rep.cyclic_windows, n * (n - 1) / 2);
  EXPECT_NEAR(rep.max_cyclic_heat, 0.0, 1e-12);
}

TEST(Suite, PeriodicDriveCyclicHeatAndBackAction) {
  const JointSystem sys = build_jcm(jcm(false, 0.0, 4, 0.3));
  ProcessConfig cfg = dm_config(sys, 1.0, 600.0, 0);
  // off the counter-rotating period 1/2, where simultaneous excitation vanishes
  cfg.sampler = periodic_sampler(0.73);
  const TrajectoryRecord rec = run_process(cfg, sys).records.front();
  const SuiteReport rep = second_law_suite(rec.ledgers, rec.states_a);
  ASSERT_GT(rep.cyclic_windows, 0u);
  EXPECT_EQ(rep.count("cyclic_heat"), 0u);
  EXPECT_LE(rep.max_cyclic_heat, 1e-8);
  SuiteOptions diag;
  diag.count_back_action_as_heat = true;
  // booking the back-action work as heat breaks the cyclic bound
  EXPECT_GT(second_law_suite(rec.ledgers, rec.states_a, diag).count("cyclic_heat"), 0u);
}

TEST(Suite, FlippedBackActionWorkBreaksEnergyBalance) {
  const JointSystem sys = build_jcm(jcm(false, 0.0, 3, 0.1));
  ProcessConfig cfg = dm_config(sys, 1.0, 50.0);
  std::vector<IntervalLedger> ledgers = run_process(cfg, sys).records.front().ledgers;
  EXPECT_EQ(second_law_suite(ledgers, {}).count("energy_balance"), 0u);
  for (IntervalLedger& l : ledgers) l.w_meas = -l.w_meas;
  EXPECT_GT(second_law_suite(ledgers, {}).count("energy_balance"), 0u);
}

TEST(Suite, DetunedPhotonLossGivesNegativeR) {
  // the cavity photon lands in a lower-frequency atom: energy is lost and R < 0
  JcmParams p = jcm(true, -0.05);
  const JointSystem sys = build_jcm(p);
  const double beta = 3.0, tau = M_PI / std::hypot(2.0 * p.gamma, p.detuning());
  const DmStep s = step_interval(DensityMatrix::pure(StateVector::basis(sys.dim_a, 1)), thermal_state(sys.h_b, beta),
                                 sys, UnitaryEvolver(sys), tau, beta);
  const SuiteReport rep = second_law_suite({s.ledger}, {});
  EXPECT_LT(rep.min_r, 0.0);
  EXPECT_TRUE(rep.passed());
}

TEST(Suite, CraftedViolationsAreReported) {
  IntervalLedger l;
  l.ds_a = -0.5;
  l.ds_b = 0.1;
  l.dh_a = 1.0;
  l.q = 0.2;
  l.w = 0.3;
  l.w_therm = 0.01;
  const SuiteReport rep = second_law_suite({l}, {});
  EXPECT_EQ(rep.count("entropy"), 1u);
  EXPECT_EQ(rep.count("first_law"), 1u);
  EXPECT_EQ(rep.count("klein"), 1u);
  EXPECT_EQ(rep.count("energy_balance"), 1u);
  EXPECT_THROW(second_law_suite({l}, {Matrix(Matrix::Identity(2, 2))}), ShapeError);
}

TEST(Suite, EnsembleEntropyProduction) {
  const JointSystem sys = build_jcm(jcm(false, 0.0, 3, 0.1));
  ProcessConfig cfg = dm_config(sys, 0.5, 40.0);
  cfg.mode = ProcessMode::Trajectory;
  cfg.n_traj = 40;
  std::vector<std::vector<IntervalLedger>> runs;
  for (const TrajectoryRecord& rec : run_process(cfg, sys).records) runs.push_back(rec.ledgers);
  const EnsembleSuiteReport rep = second_law_suite_ensemble(runs);
  EXPECT_TRUE(rep.passed);
  EXPECT_LT(rep.max_first_law_error, 1e-12);
  EXPECT_GT(rep.se_entropy_production, 0.0);
}
