#pragma once

// Repeated-measurement process: couple A to a fresh thermal reservoir
// sample, evolve jointly for an exponentially distributed time, measure the
// reservoir energy, discard it, repeat. Runs as pure-state trajectories or
// as the outcome-averaged density-matrix map.

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "qtherm/generators.hpp"
#include "qtherm/models.hpp"
#include "qtherm/parallel.hpp"
#include "qtherm/random.hpp"
#include "qtherm/superop.hpp"
#include "qtherm/thermo.hpp"

namespace qtherm {

enum class ProcessMode { Trajectory, DensityMatrix };

/// Inverse temperature per interval; the last value repeats.
struct BetaSchedule {
  std::vector<double> values{1.0};

  double at(std::size_t k) const {
    if (values.empty()) throw PreconditionError("BetaSchedule: empty");
    return values[std::min(k, values.size() - 1)];
  }
};

/// Interval length for interval index k. The default draws Exp(lambda).
using IntervalSampler = std::function<double(Rng&, std::size_t)>;

inline IntervalSampler periodic_sampler(double tau) {
  if (!(tau > 0.0)) throw PreconditionError("periodic_sampler: tau must be > 0");
  return [tau](Rng&, std::size_t) { return tau; };
}

inline IntervalSampler schedule_sampler(std::vector<double> taus) {
  return [taus = std::move(taus)](Rng&, std::size_t k) {
    if (k >= taus.size()) throw PreconditionError("schedule_sampler: schedule exhausted");
    return taus[k];
  };
}

struct ProcessConfig {
  double lambda = 1e-2;
  BetaSchedule beta;
  double horizon = 300.0;
  std::uint64_t seed = 1;
  ProcessMode mode = ProcessMode::DensityMatrix;
  int n_traj = 1;
  std::variant<StateVector, DensityMatrix> initial_state_a = StateVector::basis(2, 1);
  std::vector<double> checkpoints;  // ascending, within [0, horizon]
  IntervalSampler sampler;          // empty: Exp(lambda)
  unsigned threads = 0;             // 0: hardware concurrency (capped by QTHERM_THREADS)
  bool keep_records = true;         // per-trajectory records in trajectory mode

  void validate(const JointSystem& sys) const {
    if (!(lambda > 0.0)) throw PreconditionError("ProcessConfig: lambda must be > 0");
    if (!(horizon >= 0.0)) throw PreconditionError("ProcessConfig: horizon must be >= 0");
    if (n_traj < 1) throw PreconditionError("ProcessConfig: n_traj must be >= 1");
    for (double b : beta.values)
      if (std::isnan(b) || b < 0.0) throw PreconditionError("ProcessConfig: beta must be >= 0");
    const Index d = std::visit([](const auto& s) { return s.dim(); }, initial_state_a);
    if (d != sys.dim_a) throw ShapeError("ProcessConfig: initial state dimension != dim_a");
    if (!std::is_sorted(checkpoints.begin(), checkpoints.end()) ||
        (!checkpoints.empty() && (checkpoints.front() < 0.0 || checkpoints.back() > horizon))) {
      throw PreconditionError("ProcessConfig: checkpoints must be sorted within [0, horizon]");
    }
  }
};

struct MeasurementOutcome {
  Index m = 0;       // reservoir energy level
  double p_m = 0.0;  // Born probability
  double t = 0.0;    // interval length
};

inline constexpr double kTruncationThreshold = 1e-6;

struct RecordMetadata {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  bool truncation_suspect = false;
  double max_top_population = 0.0;
};

struct TrajectoryRecord {
  std::vector<IntervalLedger> ledgers;
  std::vector<double> measurement_times;
  std::vector<RealVector> populations_a;  // at t = 0, then after each measurement
  std::vector<Matrix> states_a;           // density-matrix mode only, same indexing
  std::vector<MeasurementOutcome> outcomes;  // trajectory mode only
  std::vector<double> intervals;          // drawn interval lengths, completed ones
  RecordMetadata meta;
};

/// Ensemble (or single density-matrix run) observables at one checkpoint time.
struct Checkpoint {
  double t = 0.0;
  double mean_ha = 0.0, se_ha = 0.0;
  double mean_hb = 0.0;
  double mean_hab = 0.0;
  double q_cum = 0.0, w_cum = 0.0, wmeas_cum = 0.0;
  double s_a = 0.0;    // von Neumann entropy of the mean A state
  double s_tot = 0.0;  // s_a - s_a(0) - sum beta Q
  double beta_q_cum = 0.0;
  long n_eff = 0;
  Matrix rho_a;        // mean A state
};

struct ProcessResult {
  std::vector<TrajectoryRecord> records;
  std::vector<Checkpoint> checkpoints;
  bool truncation_suspect = false;
};

// ---------------------------------------------------------------------------
// joint evolution over one interval

class JointEvolver {
 public:
  virtual ~JointEvolver() = default;
  virtual Matrix evolve(const Matrix& rho, double t) const = 0;
};

class UnitaryEvolver final : public JointEvolver {
 public:
  explicit UnitaryEvolver(const JointSystem& sys) : prop_(sys.hamiltonian()) {}
  Matrix evolve(const Matrix& rho, double t) const override { return prop_.conjugate(rho, t); }
  const Propagator& propagator() const { return prop_; }

 private:
  Propagator prop_;
};

/// Evolves under an arbitrary joint generator (weak or fast protocol).
class FlowEvolver final : public JointEvolver {
 public:
  FlowEvolver(LinearMap rate, Index dim) : flow_(std::move(rate), dim) {}
  Matrix evolve(const Matrix& rho, double t) const override { return flow_.apply(rho, t); }

 private:
  Flow flow_;
};

inline void require_reservoir_diagonal(const DensityMatrix& rho_b, const Propagator& basis_b) {
  const Matrix m = basis_b.to_eigenbasis(rho_b.matrix());
  const Matrix off = m - Matrix(m.diagonal().asDiagonal());
  if (off.size() && off.cwiseAbs().maxCoeff() > 1e-9) {
    throw PreconditionError("step_interval: reservoir input not diagonal in the H_B basis");
  }
}

struct DmStep {
  Matrix rho_a_end;
  RealVector reservoir_out;  // outcome probabilities in the H_B basis
  IntervalLedger ledger;
};

/// Density-matrix interval: couple, evolve, dephase B, trace it out.
inline DmStep step_interval(const DensityMatrix& rho_a, const DensityMatrix& rho_b0, const JointSystem& sys,
                            const JointEvolver& ev, double tau, double beta) {
  if (tau < 0.0) throw PreconditionError("step_interval: negative interval");
  const Propagator basis_b(sys.h_b);
  require_reservoir_diagonal(rho_b0, basis_b);
  const Matrix joint0 = kron(rho_a.matrix(), rho_b0.matrix());
  const Matrix joint = ev.evolve(joint0, tau);
  DmStep out;
  out.rho_a_end = hermitize(partial_trace(joint, sys.dims(), Subsystem::A));
  const Matrix rho_b = dephase(partial_trace(joint, sys.dims(), Subsystem::B), basis_b);
  out.reservoir_out = basis_b.basis_populations(rho_b);
  const double born = out.reservoir_out.sum();
  if (std::abs(born - 1.0) > 1e-10) throw NumericError("step_interval: outcome probabilities sum to " + std::to_string(born));
  const double ev_min = min_eigenvalue(out.rho_a_end);
  if (ev_min < -1e-9) throw PositivityError("step_interval: A state eigenvalue " + std::to_string(ev_min));
  out.ledger = ledger_for_interval(rho_a, DensityMatrix::from_trusted(out.rho_a_end), rho_b0,
                                   DensityMatrix::from_trusted(rho_b), expectation(sys.h_ab, joint), sys, beta,
                                   expectation(sys.h_ab, joint0));
  out.ledger.tau = tau;
  return out;
}

struct TrajectoryStep {
  Vector psi_a_end;
  RealVector reservoir_out;  // Born probabilities
  MeasurementOutcome outcome;
  IntervalLedger ledger;     // density-matrix ledger of |psi_a><psi_a| (x) rho_B0
};

/// Pure-state interval from |psi_a, n> with n a given H_B level: evolves,
/// then draws the measured level m and collapses onto it.
inline TrajectoryStep step_interval_from_level(const StateVector& psi_a, Index n, const DensityMatrix& rho_b0,
                                               const JointSystem& sys, const Propagator& prop, double tau,
                                               double beta, Rng& rng) {
  if (tau < 0.0) throw PreconditionError("step_interval: negative interval");
  if (prop.dim() != sys.total()) throw ShapeError("step_interval: propagator dimension mismatch");
  const Propagator basis_b(sys.h_b);
  require_reservoir_diagonal(rho_b0, basis_b);
  const Index da = sys.dim_a, db = sys.dim_b;
  if (n < 0 || n >= db) throw ShapeError("step_interval: reservoir level out of range");
  const Matrix& vb = basis_b.eigenvectors();
  const Vector phi = prop.apply(kron(psi_a.amplitudes(), Vector(vb.col(n))), tau);

  // components (I (x) <m|) phi for each level m
  Matrix comp(da, db);
  for (Index i = 0; i < da; ++i)
    for (Index m = 0; m < db; ++m) comp(i, m) = vb.col(m).dot(phi.segment(i * db, db));
  TrajectoryStep out;
  out.reservoir_out = comp.colwise().squaredNorm().transpose();
  const double born = out.reservoir_out.sum();
  if (std::abs(born - 1.0) > 1e-10) throw NumericError("step_interval: Born probabilities sum to " + std::to_string(born));
  const Index m = static_cast<Index>(sample_discrete(rng, out.reservoir_out));
  out.outcome = {m, out.reservoir_out(m), tau};
  out.psi_a_end = comp.col(m) / std::sqrt(out.reservoir_out(m));

  const DensityMatrix rho_a = DensityMatrix::pure(psi_a);
  const Matrix joint0 = kron(rho_a.matrix(), rho_b0.matrix());
  const Matrix joint = prop.conjugate(joint0, tau);
  const Matrix rho_b = dephase(partial_trace(joint, sys.dims(), Subsystem::B), basis_b);
  out.ledger = ledger_for_interval(rho_a, DensityMatrix::from_trusted(partial_trace(joint, sys.dims(), Subsystem::A)),
                                   rho_b0, DensityMatrix::from_trusted(rho_b), expectation(sys.h_ab, joint), sys,
                                   beta, expectation(sys.h_ab, joint0));
  out.ledger.tau = tau;
  return out;
}

/// Pure-state interval: draws the reservoir level from rho_b0, then the
/// measurement outcome, both from `rng`.
inline TrajectoryStep step_interval(const StateVector& psi_a, const DensityMatrix& rho_b0, const JointSystem& sys,
                                    const Propagator& prop, double tau, double beta, Rng& rng) {
  const Propagator basis_b(sys.h_b);
  const Index n = static_cast<Index>(sample_discrete(rng, basis_b.basis_populations(rho_b0.matrix())));
  return step_interval_from_level(psi_a, n, rho_b0, sys, prop, tau, beta, rng);
}

// ---------------------------------------------------------------------------
// process runners

namespace detail {

/// Running sums for checkpoint statistics.
struct CheckpointSums {
  double ha = 0.0, ha2 = 0.0, hb = 0.0, hab = 0.0, q = 0.0, w = 0.0, wmeas = 0.0, beta_q = 0.0;
  Matrix rho_a;
  long n = 0;

  void add(const CheckpointSums& o) {
    ha += o.ha;
    ha2 += o.ha2;
    hb += o.hb;
    hab += o.hab;
    q += o.q;
    w += o.w;
    wmeas += o.wmeas;
    beta_q += o.beta_q;
    rho_a = rho_a.size() ? Matrix(rho_a + o.rho_a) : o.rho_a;
    n += o.n;
  }
};

struct Cumulative {
  double q = 0.0, w = 0.0, wmeas = 0.0, beta_q = 0.0;

  void add(const IntervalLedger& l) {
    if (l.heat_defined) {
      q += l.q;
      w += l.w;
      beta_q += std::isinf(l.beta) ? -l.ds_b : l.beta * l.q;
    }
    wmeas += l.w_meas;
  }
};

inline CheckpointSums observe(const Matrix& joint, const JointSystem& sys, const Cumulative& c) {
  CheckpointSums s;
  const double ha = expectation(embed_a(sys.h_a, sys.dim_b), joint);
  s.ha = ha;
  s.ha2 = ha * ha;
  s.hb = expectation(embed_b(sys.dim_a, sys.h_b), joint);
  s.hab = expectation(sys.h_ab, joint);
  s.q = c.q;
  s.w = c.w;
  s.wmeas = c.wmeas;
  s.beta_q = c.beta_q;
  s.rho_a = partial_trace(joint, sys.dims(), Subsystem::A);
  s.n = 1;
  return s;
}

inline double top_population(const Matrix& rho_a) { return rho_a(rho_a.rows() - 1, rho_a.cols() - 1).real(); }

inline void note_truncation(RecordMetadata& meta, const Matrix& rho_a) {
  meta.max_top_population = std::max(meta.max_top_population, top_population(rho_a));
  meta.truncation_suspect = meta.max_top_population > kTruncationThreshold;
}

inline double draw_interval(const ProcessConfig& cfg, Rng& rng, std::size_t k) {
  const double tau = cfg.sampler ? cfg.sampler(rng, k) : sample_interval(rng, cfg.lambda);
  if (!(tau >= 0.0)) throw PreconditionError("interval sampler returned a negative time");
  return tau;
}

inline std::vector<Checkpoint> finalize(const std::vector<CheckpointSums>& sums, const std::vector<double>& times,
                                        double s_a0) {
  std::vector<Checkpoint> out;
  for (std::size_t k = 0; k < sums.size(); ++k) {
    const CheckpointSums& s = sums[k];
    Checkpoint c;
    c.t = times[k];
    c.n_eff = s.n;
    if (s.n == 0) {
      out.push_back(c);
      continue;
    }
    const double n = static_cast<double>(s.n);
    c.mean_ha = s.ha / n;
    c.se_ha = s.n > 1 ? std::sqrt(std::max(0.0, (s.ha2 / n - c.mean_ha * c.mean_ha) / (n - 1.0))) : 0.0;
    c.mean_hb = s.hb / n;
    c.mean_hab = s.hab / n;
    c.q_cum = s.q / n;
    c.w_cum = s.w / n;
    c.wmeas_cum = s.wmeas / n;
    c.rho_a = hermitize(s.rho_a / n);
    c.s_a = shannon_entropy(Eigen::SelfAdjointEigenSolver<Matrix>(c.rho_a, Eigen::EigenvaluesOnly).eigenvalues());
    c.beta_q_cum = s.beta_q / n;
    c.s_tot = c.s_a - s_a0 - c.beta_q_cum;
    out.push_back(c);
  }
  return out;
}

/// Inverts finalize for a single run so runs can be pooled.
inline CheckpointSums sums_of(const Checkpoint& c) {
  CheckpointSums s;
  s.ha = c.mean_ha;
  s.ha2 = c.mean_ha * c.mean_ha;
  s.hb = c.mean_hb;
  s.hab = c.mean_hab;
  s.q = c.q_cum;
  s.w = c.w_cum;
  s.wmeas = c.wmeas_cum;
  s.beta_q = c.beta_q_cum;
  s.rho_a = c.rho_a;
  s.n = 1;
  return s;
}

}  // namespace detail

inline constexpr std::size_t kTrajectoryChunk = 64;

namespace detail {
inline ProcessResult reduce_chunks(const std::vector<std::vector<CheckpointSums>>& chunk_sums,
                                   std::vector<std::vector<TrajectoryRecord>>& chunk_records,
                                   const std::vector<char>& chunk_suspect, const std::vector<double>& times,
                                   double s_a0) {
  std::vector<CheckpointSums> total(times.size());
  ProcessResult out;
  for (std::size_t c = 0; c < chunk_sums.size(); ++c) {
    for (std::size_t j = 0; j < total.size(); ++j) total[j].add(chunk_sums[c][j]);
    out.truncation_suspect = out.truncation_suspect || chunk_suspect[c];
    for (auto& r : chunk_records[c]) out.records.push_back(std::move(r));
  }
  out.checkpoints = finalize(total, times, s_a0);
  return out;
}
}  // namespace detail

/// Density-matrix run with an arbitrary joint evolver (exact unitary, or a
/// weak/fast generator for the interval protocol).
inline ProcessResult run_interval_protocol(const JointSystem& sys, const ProcessConfig& cfg, const JointEvolver& ev,
                                          std::uint64_t stream = 0) {
  cfg.validate(sys);
  const DensityMatrix rho0 = std::holds_alternative<DensityMatrix>(cfg.initial_state_a)
                                 ? std::get<DensityMatrix>(cfg.initial_state_a)
                                 : DensityMatrix::pure(std::get<StateVector>(cfg.initial_state_a));
  Rng rng(cfg.seed, stream);
  TrajectoryRecord rec;
  rec.meta.seed = cfg.seed;
  rec.meta.stream = stream;
  rec.populations_a.push_back(rho0.populations());
  rec.states_a.push_back(rho0.matrix());
  detail::note_truncation(rec.meta, rho0.matrix());
  std::vector<detail::CheckpointSums> sums(cfg.checkpoints.size());
  detail::Cumulative cum;

  DensityMatrix rho = rho0;
  double start = 0.0;
  std::size_t next_cp = 0;
  for (std::size_t k = 0;; ++k) {
    if (next_cp >= cfg.checkpoints.size() && start >= cfg.horizon) break;
    const double beta = cfg.beta.at(k);
    const double tau = detail::draw_interval(cfg, rng, k);
    const DensityMatrix rho_b0 = thermal_state(sys.h_b, beta);
    const Matrix joint0 = kron(rho.matrix(), rho_b0.matrix());
    while (next_cp < cfg.checkpoints.size() && cfg.checkpoints[next_cp] < start + tau) {
      const Matrix joint = ev.evolve(joint0, cfg.checkpoints[next_cp] - start);
      sums[next_cp] = detail::observe(joint, sys, cum);
      detail::note_truncation(rec.meta, sums[next_cp].rho_a);
      ++next_cp;
    }
    if (start + tau > cfg.horizon) break;
    DmStep step = step_interval(rho, rho_b0, sys, ev, tau, beta);
    start += tau;
    step.ledger.t = start;
    cum.add(step.ledger);
    rec.ledgers.push_back(step.ledger);
    rec.measurement_times.push_back(start);
    rec.intervals.push_back(tau);
    rho = DensityMatrix::from_trusted(step.rho_a_end);
    rec.populations_a.push_back(rho.populations());
    rec.states_a.push_back(rho.matrix());
    detail::note_truncation(rec.meta, rho.matrix());
  }
  ProcessResult out;
  out.checkpoints = detail::finalize(sums, cfg.checkpoints, von_neumann_entropy(rho0));
  out.truncation_suspect = rec.meta.truncation_suspect;
  out.records.push_back(std::move(rec));
  return out;
}

/// n_traj density-matrix runs with independent interval draws (streams
/// 1..n_traj), averaged at the checkpoints. Reduction order is fixed.
inline ProcessResult run_protocol_ensemble(const JointSystem& sys, const ProcessConfig& cfg, const JointEvolver& ev) {
  cfg.validate(sys);
  const DensityMatrix rho0 = std::holds_alternative<DensityMatrix>(cfg.initial_state_a)
                                 ? std::get<DensityMatrix>(cfg.initial_state_a)
                                 : DensityMatrix::pure(std::get<StateVector>(cfg.initial_state_a));
  const std::size_t n = static_cast<std::size_t>(cfg.n_traj);
  const std::size_t chunks = (n + kTrajectoryChunk - 1) / kTrajectoryChunk;
  std::vector<std::vector<detail::CheckpointSums>> chunk_sums(chunks);
  std::vector<std::vector<TrajectoryRecord>> chunk_records(chunks);
  std::vector<char> chunk_suspect(chunks, 0);
  parallel_for(chunks, cfg.threads, [&](std::size_t c) {
    std::vector<detail::CheckpointSums> sums(cfg.checkpoints.size());
    const std::size_t lo = c * kTrajectoryChunk, hi = std::min(n, lo + kTrajectoryChunk);
    for (std::size_t k = lo; k < hi; ++k) {
      ProcessResult one = run_interval_protocol(sys, cfg, ev, k + 1);
      for (std::size_t j = 0; j < sums.size(); ++j) sums[j].add(detail::sums_of(one.checkpoints[j]));
      if (one.truncation_suspect) chunk_suspect[c] = 1;
      if (cfg.keep_records) chunk_records[c].push_back(std::move(one.records.front()));
    }
    chunk_sums[c] = std::move(sums);
  });
  return detail::reduce_chunks(chunk_sums, chunk_records, chunk_suspect, cfg.checkpoints, von_neumann_entropy(rho0));
}

namespace detail {

struct TrajectoryOutput {
  TrajectoryRecord record;
  std::vector<CheckpointSums> sums;
};

inline TrajectoryOutput run_trajectory(const JointSystem& sys, const ProcessConfig& cfg, const Propagator& prop,
                                       std::uint64_t stream) {
  Rng rng(cfg.seed, stream);
  TrajectoryOutput out;
  out.record.meta.seed = cfg.seed;
  out.record.meta.stream = stream;
  out.sums.resize(cfg.checkpoints.size());

  Vector psi;
  if (const auto* sv = std::get_if<StateVector>(&cfg.initial_state_a)) {
    psi = sv->amplitudes();
  } else {
    // unravel a mixed start: eigenvector k with probability p_k
    const auto& rho = std::get<DensityMatrix>(cfg.initial_state_a);
    Eigen::SelfAdjointEigenSolver<Matrix> es(rho.matrix());
    const Index k = static_cast<Index>(sample_discrete(rng, es.eigenvalues()));
    psi = es.eigenvectors().col(k);
  }
  const Propagator basis_b(sys.h_b);
  out.record.populations_a.push_back(psi.cwiseAbs2());
  note_truncation(out.record.meta, psi * psi.adjoint());
  Cumulative cum;

  double start = 0.0;
  std::size_t next_cp = 0;
  for (std::size_t k = 0;; ++k) {
    if (next_cp >= cfg.checkpoints.size() && start >= cfg.horizon) break;
    const double beta = cfg.beta.at(k);
    const double tau = draw_interval(cfg, rng, k);
    const DensityMatrix rho_b0 = thermal_state(sys.h_b, beta);
    // draw order per interval: length, reservoir level, outcome
    const Index n = static_cast<Index>(sample_discrete(rng, basis_b.basis_populations(rho_b0.matrix())));
    if (next_cp < cfg.checkpoints.size() && cfg.checkpoints[next_cp] < start + tau) {
      const Vector joint0 = kron(psi, Vector(basis_b.eigenvectors().col(n)));
      while (next_cp < cfg.checkpoints.size() && cfg.checkpoints[next_cp] < start + tau) {
        const Vector v = prop.apply(joint0, cfg.checkpoints[next_cp] - start);
        out.sums[next_cp] = observe(v * v.adjoint(), sys, cum);
        note_truncation(out.record.meta, out.sums[next_cp].rho_a);
        ++next_cp;
      }
    }
    if (start + tau > cfg.horizon) break;
    TrajectoryStep step = step_interval_from_level(StateVector::normalized(psi), n, rho_b0, sys, prop, tau, beta, rng);
    start += tau;
    step.ledger.t = start;
    cum.add(step.ledger);
    psi = step.psi_a_end;
    out.record.ledgers.push_back(step.ledger);
    out.record.measurement_times.push_back(start);
    out.record.intervals.push_back(tau);
    out.record.outcomes.push_back(step.outcome);
    out.record.populations_a.push_back(psi.cwiseAbs2());
    note_truncation(out.record.meta, psi * psi.adjoint());
  }
  return out;
}

}  // namespace detail

/// Runs the exact process. Trajectory ensembles are split into fixed chunks
/// and reduced in index order, so results do not depend on the thread count.
inline ProcessResult run_process(const ProcessConfig& cfg, const JointSystem& sys) {
  cfg.validate(sys);
  const UnitaryEvolver ev(sys);
  if (cfg.mode == ProcessMode::DensityMatrix) return run_interval_protocol(sys, cfg, ev);

  const std::size_t n = static_cast<std::size_t>(cfg.n_traj);
  const std::size_t chunks = (n + kTrajectoryChunk - 1) / kTrajectoryChunk;
  std::vector<std::vector<detail::CheckpointSums>> chunk_sums(chunks);
  std::vector<std::vector<TrajectoryRecord>> chunk_records(chunks);
  std::vector<char> chunk_suspect(chunks, 0);
  parallel_for(chunks, cfg.threads, [&](std::size_t c) {
    std::vector<detail::CheckpointSums> sums(cfg.checkpoints.size());
    const std::size_t lo = c * kTrajectoryChunk, hi = std::min(n, lo + kTrajectoryChunk);
    for (std::size_t k = lo; k < hi; ++k) {
      detail::TrajectoryOutput t = detail::run_trajectory(sys, cfg, ev.propagator(), k + 1);
      for (std::size_t j = 0; j < sums.size(); ++j) sums[j].add(t.sums[j]);
      if (t.record.meta.truncation_suspect) chunk_suspect[c] = 1;
      if (cfg.keep_records) chunk_records[c].push_back(std::move(t.record));
    }
    chunk_sums[c] = std::move(sums);
  });

  double s_a0 = 0.0;
  if (const auto* rho = std::get_if<DensityMatrix>(&cfg.initial_state_a)) s_a0 = von_neumann_entropy(*rho);
  return detail::reduce_chunks(chunk_sums, chunk_records, chunk_suspect, cfg.checkpoints, s_a0);
}

// ---------------------------------------------------------------------------
// measurement-time-averaged dynamics

/// Joint generator -i[H, .] + lambda (Tr_B(.) (x) rho_B0 - .): the exact
/// process averaged over Poisson measurement times and outcomes.
inline LinearMap exact_averaged_rate(const JointSystem& sys, const Matrix& rho_b0, double lambda) {
  const Matrix h = sys.hamiltonian();
  return with_measurement_resets([h](const Matrix& rho) -> Matrix { return -kI * commutator(h, rho); }, sys.dims(),
                                 rho_b0, lambda);
}

/// Joint states at the requested times under the averaged generator.
inline std::vector<Matrix> averaged_process(const LinearMap& rate, const Matrix& joint0, Index dim,
                                            const std::vector<double>& times) {
  const Flow flow(rate, dim);
  std::vector<Matrix> out;
  Matrix rho = joint0;
  double now = 0.0;
  for (double t : times) {
    if (t < now) throw PreconditionError("averaged_process: times must be ascending");
    rho = flow.apply(rho, t - now);
    now = t;
    out.push_back(rho);
  }
  return out;
}

/// Steady A state of an averaged joint generator (null space of the joint
/// superoperator, traced over B).
inline SteadyStateResult averaged_steady_state(const LinearMap& rate, const JointSystem& sys) {
  const Matrix s = assemble_superoperator(rate, sys.total());
  const NullSpaceState ns = null_space_state(s, sys.total());
  const Matrix ra = partial_trace(ns.rho, sys.dims(), Subsystem::A);
  const Propagator pa(sys.h_a);
  const RealVector pop = pa.basis_populations(ra);
  SteadyStateResult out;
  out.rho_ss = DensityMatrix::from_trusted(ra);
  out.residual = ns.residual;
  out.p0 = pop(0);
  out.p1 = pop.size() > 1 ? pop(1) : 0.0;
  if (pop.size() > 1) out.beta_eff = -std::log(out.p1 / out.p0) / (pa.energies()(1) - pa.energies()(0));
  return out;
}

}  // namespace qtherm
