#pragma once

// Subcommands that turn a RunConfig into CSV and SVG files.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "qtherm/analytic.hpp"
#include "qtherm/cli/config.hpp"
#include "qtherm/cli/csv.hpp"
#include "qtherm/cli/svg.hpp"
#include "qtherm/engine.hpp"
#include "qtherm/generators.hpp"

namespace qtherm::cli {

struct CommandOutput {
  std::vector<std::filesystem::path> files;
  bool truncation_suspect = false;
};

inline std::vector<double> checkpoint_grid(const RunConfig& c) {
  std::vector<double> t;
  if (c.checkpoints == 1) t.push_back(0.0);
  for (int k = 0; c.checkpoints > 1 && k < c.checkpoints; ++k) {
    t.push_back(k == c.checkpoints - 1 ? c.horizon : c.horizon * k / (c.checkpoints - 1));
  }
  return t;
}

inline ProcessConfig process_config(const RunConfig& c, const JointSystem& sys) {
  ProcessConfig pc;
  pc.lambda = c.lambda;
  pc.beta.values = {c.beta};
  pc.horizon = c.horizon;
  pc.seed = c.seed;
  pc.mode = c.process_mode == "trajectory" ? ProcessMode::Trajectory : ProcessMode::DensityMatrix;
  pc.n_traj = c.n_traj;
  if (c.initial_fock < 0 || c.initial_fock >= sys.dim_a) throw ConfigError("exceeds n_max", 0, "initial_fock");
  pc.initial_state_a = StateVector::basis(sys.dim_a, c.initial_fock);
  pc.checkpoints = checkpoint_grid(c);
  return pc;
}

namespace detail {

inline void write_series(const std::filesystem::path& dir, const std::string& name, const RunConfig& cfg,
                         const ProcessResult& res, CommandOutput& out) {
  const std::vector<std::string> extra = {"series = " + name,
                                          std::string("truncation_suspect = ") +
                                              (res.truncation_suspect ? "true" : "false")};
  {
    const auto path = dir / ("timeseries_" + name + ".csv");
    CsvWriter w(path, cfg,
                {"t", "mean_HA", "se_HA", "mean_HB", "mean_HAB", "Q_cum", "W_cum", "Wmeas_cum", "S_A", "S_tot",
                 "n_eff_traj"},
                extra);
    for (const Checkpoint& c : res.checkpoints) {
      w.row({c.t, c.mean_ha, c.se_ha, c.mean_hb, c.mean_hab, c.q_cum, c.w_cum, c.wmeas_cum, c.s_a, c.s_tot,
             static_cast<double>(c.n_eff)});
    }
    out.files.push_back(path);
  }
  {
    const auto path = dir / ("ledger_" + name + ".csv");
    CsvWriter w(path, cfg,
                {"run", "interval", "t", "tau", "dH_a", "dH_b", "w_meas", "w_couple", "dS_a", "dS_b", "q", "w_therm",
                 "w", "r", "beta"},
                extra);
    for (std::size_t r = 0; r < res.records.size(); ++r) {
      const auto& ls = res.records[r].ledgers;
      for (std::size_t k = 0; k < ls.size(); ++k) {
        const IntervalLedger& l = ls[k];
        w.row({static_cast<double>(r), static_cast<double>(k), l.t, l.tau, l.dh_a, l.dh_b, l.w_meas, l.w_couple,
               l.ds_a, l.ds_b, l.q, l.w_therm, l.w, l.r, l.beta});
      }
    }
    out.files.push_back(path);
  }
  {
    SvgChart chart{"Energy and entropy bookkeeping (" + name + ")", "t", "energy / entropy", {}};
    SvgSeries dha{"dH_A", {}, {}}, q{"Q_cum", {}, {}}, wk{"W_cum", {}, {}}, st{"S_tot", {}, {}, true};
    const double ha0 = res.checkpoints.empty() ? 0.0 : res.checkpoints.front().mean_ha;
    for (const Checkpoint& c : res.checkpoints) {
      dha.x.push_back(c.t);
      dha.y.push_back(c.mean_ha - ha0);
      q.x.push_back(c.t);
      q.y.push_back(c.q_cum);
      wk.x.push_back(c.t);
      wk.y.push_back(c.w_cum);
      st.x.push_back(c.t);
      st.y.push_back(c.s_tot);
    }
    chart.series = {dha, q, wk, st};
    const auto path = dir / ("simulate_" + name + ".svg");
    write_svg(path, chart);
    out.files.push_back(path);
  }
}

}  // namespace detail

/// Runs the exact process and/or the weak/fast interval protocols and writes
/// timeseries_<series>.csv, ledger_<series>.csv and simulate_<series>.svg.
inline CommandOutput cmd_simulate(const RunConfig& cfg, std::ostream& log = std::cerr, bool quiet = false) {
  const std::filesystem::path dir(cfg.out);
  std::filesystem::create_directories(dir);
  const JointSystem sys = build_jcm(cfg.model);
  const ProcessConfig pc = process_config(cfg, sys);
  CommandOutput out;
  std::vector<std::pair<std::string, ProcessResult>> runs;

  if (cfg.mode == SimMode::Exact || cfg.mode == SimMode::Both) {
    if (!quiet) log << "simulate: exact process (" << cfg.process_mode << ", " << cfg.n_traj << " runs)\n";
    if (pc.mode == ProcessMode::Trajectory) {
      runs.emplace_back("exact", run_process(pc, sys));
    } else {
      runs.emplace_back("exact", run_protocol_ensemble(sys, pc, UnitaryEvolver(sys)));
    }
  }
  if (cfg.mode == SimMode::Weak || cfg.mode == SimMode::Both) {
    if (!quiet) log << "simulate: weak-coupling interval protocol (" << cfg.n_traj << " runs)\n";
    const GeneratorSpec spec = decompose(sys, cfg.lambda);
    runs.emplace_back("weak", run_protocol_ensemble(sys, pc, FlowEvolver(weak_joint_rate(spec), sys.total())));
  }
  if (cfg.mode == SimMode::Fast) {
    if (!quiet) log << "simulate: fast-measurement interval protocol (" << cfg.n_traj << " runs)\n";
    if (cfg.lambda < 10.0 * cfg.model.gamma) {
      log << "warning: lambda < 10 gamma, outside the fast-measurement regime\n";
    }
    runs.emplace_back("fast", run_protocol_ensemble(sys, pc, FlowEvolver(fast_joint_rate(sys, cfg.lambda), sys.total())));
  }

  for (const auto& [name, res] : runs) {
    detail::write_series(dir, name, cfg, res, out);
    if (res.truncation_suspect) {
      out.truncation_suspect = true;
      log << "warning: " << name << " run is truncation-suspect (top Fock population > 1e-6); raise n_max\n";
    }
  }
  if (runs.size() > 1) {
    SvgChart chart{"Excitation energy: exact vs weak coupling", "t", "<H_A>(t) - <H_A>(0)", {}};
    for (const auto& [name, res] : runs) {
      SvgSeries s{name, {}, {}, name != "exact"};
      for (const Checkpoint& c : res.checkpoints) {
        s.x.push_back(c.t);
        s.y.push_back(c.mean_ha - res.checkpoints.front().mean_ha);
      }
      chart.series.push_back(s);
    }
    const auto path = dir / "simulate_compare.svg";
    write_svg(path, chart);
    out.files.push_back(path);
  }
  return out;
}

/// Weak-coupling steady states over the (beta, lambda) grid with the
/// minimum-temperature asymptote per lambda.
inline CommandOutput cmd_steady_scan(const RunConfig& cfg, std::ostream& log = std::cerr, bool quiet = false) {
  const std::filesystem::path dir(cfg.out);
  std::filesystem::create_directories(dir);
  const JointSystem sys = build_jcm(cfg.model);
  if (!quiet) log << "steady-scan: " << cfg.scan_betas.size() << " x " << cfg.scan_lambdas.size() << " points\n";
  const std::vector<ScanPoint> pts = steady_scan(sys, cfg.scan_betas, cfg.scan_lambdas);
  const double omega = cfg.model.omega_a;
  CommandOutput out;
  const auto path = dir / "steady_scan.csv";
  {
    CsvWriter w(path, cfg, {"beta", "lambda", "p0", "p1", "beta_eff", "residual", "ok", "beta_eff_min"});
    for (const ScanPoint& p : pts) {
      w.row({p.beta, p.lambda, p.p0, p.p1, p.beta_eff, p.residual, p.ok ? 1.0 : 0.0,
             min_temp_beta(p.lambda, omega)});
      if (!p.ok) log << "warning: beta=" << p.beta << " lambda=" << p.lambda << ": " << p.note << "\n";
    }
  }
  out.files.push_back(path);

  SvgChart chart{"Steady-state inverse temperature", "reservoir beta", "beta_eff", {}};
  if (!cfg.scan_betas.empty()) {
    const auto [lo, hi] = std::minmax_element(cfg.scan_betas.begin(), cfg.scan_betas.end());
    chart.series.push_back({"beta_eff = beta", {*lo, *hi}, {*lo, *hi}, true});
    for (std::size_t l = 0; l < cfg.scan_lambdas.size(); ++l) {
      SvgSeries s{"lambda = " + format_double(cfg.scan_lambdas[l]), {}, {}};
      for (std::size_t b = 0; b < cfg.scan_betas.size(); ++b) {
        const ScanPoint& p = pts[l * cfg.scan_betas.size() + b];
        if (!p.ok) continue;
        s.x.push_back(p.beta);
        s.y.push_back(p.beta_eff);
      }
      chart.series.push_back(s);
      const double m = min_temp_beta(cfg.scan_lambdas[l], omega);
      chart.series.push_back({"limit " + format_double(cfg.scan_lambdas[l]), {*lo, *hi}, {m, m}, true});
    }
  }
  const auto svg = dir / "steady_scan.svg";
  write_svg(svg, chart);
  out.files.push_back(svg);
  return out;
}

/// Closed-form block amplitudes |b_n(t)|^2, their Poisson averages, and the
/// mean absorbed photon number x(t) for the configured start state.
inline CommandOutput cmd_jcm_analytic(const RunConfig& cfg, std::ostream& log = std::cerr, bool quiet = false) {
  namespace an = qtherm::analytic;
  const std::filesystem::path dir(cfg.out);
  std::filesystem::create_directories(dir);
  if (!quiet) log << "jcm-analytic: n = 1.." << cfg.analytic_n_max << "\n";
  CommandOutput out;
  std::vector<double> ts;
  for (int k = 0; k < cfg.analytic_points; ++k) ts.push_back(cfg.analytic_t_max * k / (cfg.analytic_points - 1));

  SvgChart chart{"|b_n(t)|^2", "t", "probability", {}};
  {
    const auto path = dir / "analytic_amplitudes.csv";
    CsvWriter w(path, cfg, {"n", "t", "a_re", "a_im", "b_re", "b_im", "b2", "mean_b2_poisson"});
    for (int n = 1; n <= cfg.analytic_n_max; ++n) {
      SvgSeries s{"n = " + std::to_string(n), {}, {}};
      const double avg = an::mean_b2_poisson(n, cfg.lambda, cfg.model);
      for (double t : ts) {
        const an::JcmAmplitudes a = an::amplitudes(n, t, cfg.model);
        w.row({static_cast<double>(n), t, a.a_n.real(), a.a_n.imag(), a.b_n.real(), a.b_n.imag(), std::norm(a.b_n),
               avg});
        s.x.push_back(t);
        s.y.push_back(std::norm(a.b_n));
      }
      chart.series.push_back(s);
    }
    out.files.push_back(path);
  }
  {
    const auto path = dir / "analytic_x.csv";
    an::AtomFieldState st;
    st.p_n.assign(static_cast<std::size_t>(std::max(cfg.initial_fock, cfg.analytic_n_max)) + 1, 0.0);
    st.p_n[static_cast<std::size_t>(cfg.initial_fock)] = 1.0;
    st.sigma_e = 1.0 / (1.0 + std::exp(cfg.beta * cfg.model.omega_b));
    st.sigma_g = 1.0 - st.sigma_e;
    CsvWriter w(path, cfg, {"t", "x", "dH_A", "dH_B", "einstein_rate"});
    const double rate = an::einstein_rate(st, cfg.lambda, cfg.model);
    for (double t : ts) {
      const double x = an::x_of_t(st, t, cfg.model);
      const an::AbsorptionUpdate u = an::absorb(st, x, cfg.model);
      w.row({t, x, u.dH_a, u.dH_b, rate});
    }
    out.files.push_back(path);
  }
  const auto svg = dir / "analytic_amplitudes.svg";
  write_svg(svg, chart);
  out.files.push_back(svg);
  return out;
}

}  // namespace qtherm::cli
