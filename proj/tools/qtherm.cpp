// qtherm command-line driver.
//
// Exit codes: 0 ok, 1 usage or configuration error, 2 verification failure,
// 3 numerical failure.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "qtherm/cli/commands.hpp"
#include "qtherm/cli/config.hpp"
#include "qtherm/cli/verify.hpp"

namespace {

struct Common {
  std::string config;
  std::optional<long long> seed;
  std::optional<std::string> out;
  std::optional<std::string> mode;
  std::optional<long long> traj;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "key = value configuration file");
  cmd->add_option("--seed", c.seed, "random seed (overrides the config)");
  cmd->add_option("--out", c.out, "output directory (overrides the config)");
  cmd->add_option("--mode", c.mode, "exact | weak | fast | both");
  cmd->add_option("--traj", c.traj, "number of trajectories or protocol runs");
  cmd->add_flag("--quiet", c.quiet, "suppress progress output");
}

qtherm::cli::RunConfig resolve(const Common& c) {
  using qtherm::cli::apply_setting;
  qtherm::cli::RunConfig cfg = c.config.empty() ? qtherm::cli::RunConfig{} : qtherm::cli::load_config(c.config);
  // command-line overrides win over the file
  if (c.seed) apply_setting(cfg, "seed", std::to_string(*c.seed));
  if (c.out) apply_setting(cfg, "out", *c.out);
  if (c.mode) apply_setting(cfg, "mode", *c.mode);
  if (c.traj) apply_setting(cfg, "n_traj", std::to_string(*c.traj));
  if (cfg.initial_fock > cfg.model.n_max) throw qtherm::cli::ConfigError("exceeds n_max", 0, "initial_fock");
  return cfg;
}

void report_files(const qtherm::cli::CommandOutput& out, bool quiet) {
  if (quiet) return;
  for (const auto& f : out.files) std::cout << "wrote " << f.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qtherm: repeated-measurement open quantum system simulator"};
  app.require_subcommand(1);
  Common simulate_opts, scan_opts, analytic_opts, verify_opts;
  CLI::App* simulate = app.add_subcommand("simulate", "exact process and/or weak/fast interval protocol");
  CLI::App* scan = app.add_subcommand("steady-scan", "weak-coupling steady states over a beta x lambda grid");
  CLI::App* analytic = app.add_subcommand("jcm-analytic", "closed-form Jaynes-Cummings block curves");
  CLI::App* verify = app.add_subcommand("verify", "run the acceptance suite");
  add_common(simulate, simulate_opts);
  add_common(scan, scan_opts);
  add_common(analytic, analytic_opts);
  add_common(verify, verify_opts);
  std::vector<int> only;
  verify->add_option("--only", only, "criterion ids to run (default: all)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (simulate->parsed()) {
      const auto out = qtherm::cli::cmd_simulate(resolve(simulate_opts), std::cerr, simulate_opts.quiet);
      report_files(out, simulate_opts.quiet);
    } else if (scan->parsed()) {
      report_files(qtherm::cli::cmd_steady_scan(resolve(scan_opts), std::cerr, scan_opts.quiet), scan_opts.quiet);
    } else if (analytic->parsed()) {
      report_files(qtherm::cli::cmd_jcm_analytic(resolve(analytic_opts), std::cerr, analytic_opts.quiet),
                   analytic_opts.quiet);
    } else if (verify->parsed()) {
      const qtherm::cli::RunConfig cfg = resolve(verify_opts);
      qtherm::cli::AcceptanceOptions opt;
      opt.seed = cfg.seed;
      opt.only.insert(only.begin(), only.end());
      const auto res = qtherm::cli::cmd_verify(cfg, opt, std::cout, verify_opts.quiet);
      if (!verify_opts.quiet) std::cout << "report: " << res.text_report.string() << "\n";
      return res.passed() ? 0 : 2;
    }
  } catch (const qtherm::cli::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const qtherm::NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const qtherm::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
