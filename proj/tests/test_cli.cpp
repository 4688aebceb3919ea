#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "qtherm/cli/commands.hpp"
#include "qtherm/cli/config.hpp"
#include "qtherm/cli/verify.hpp"

using namespace qtherm;
using namespace qtherm::cli;
namespace fs = std::filesystem;

namespace {

// Fresh scratch directory per test, removed on destruction.
class Scratch {
 public:
  explicit Scratch(const std::string& tag)
      : dir_(fs::temp_directory_path() / ("qtherm-test-" + tag + "-" + std::to_string(::getpid()))) {
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  ~Scratch() { fs::remove_all(dir_); }
  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

RunConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

// Data rows of a CSV written by CsvWriter (comment lines and header skipped).
std::vector<std::vector<double>> rows(const fs::path& p) {
  std::ifstream f(p);
  std::string line;
  std::vector<std::vector<double>> out;
  bool header = false;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    std::vector<double> r;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) r.push_back(std::stod(cell));
    out.push_back(r);
  }
  return out;
}

std::string column_row(const fs::path& p) {
  std::ifstream f(p);
  std::string line;
  while (std::getline(f, line))
    if (!line.empty() && line[0] != '#') return line;
  return "";
}

RunConfig small_simulation(const fs::path& out) {
  RunConfig c = parse(
      "n_max = 5\n"
      "lambda = 0.5\n"
      "horizon = 10\n"
      "n_traj = 70\n"
      "checkpoints = 6\n");
  c.out = out.string();
  return c;
}

int run_tool(const std::string& args) {
  const std::string cmd = std::string(QTHERM_TOOL_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

// ---------------------------------------------------------------------------
// configuration

TEST(Config, DefaultsAndOverrides) {
  const RunConfig c = parse(
      "# reference point with a colder reservoir\n"
      "beta = 2   # trailing comment\n"
      "\n"
      "rwa = true\n"
      "beta = 3\n"
      "scan_lambdas = 0.5, 1.5\n");
  EXPECT_EQ(c.beta, 3.0);
  EXPECT_TRUE(c.model.rwa);
  EXPECT_EQ(c.model.gamma, 0.05);
  EXPECT_EQ(c.scan_lambdas, (std::vector<double>{0.5, 1.5}));
  EXPECT_EQ(c.mode, SimMode::Exact);
}

TEST(Config, ErrorsNameLineAndKey) {
  try {
    parse("gamma = 0.1\nlambda = -2\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 2);
    EXPECT_EQ(e.key(), "lambda");
  }
  EXPECT_THROW(parse("no_such_key = 1\n"), ConfigError);
  EXPECT_THROW(parse("beta 1\n"), ConfigError);
  EXPECT_THROW(parse("n_traj = 1.5\n"), ConfigError);
  EXPECT_THROW(parse("mode = slow\n"), ConfigError);
  EXPECT_THROW(parse("n_max = 2\ninitial_fock = 3\n"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/qtherm.cfg"), ConfigError);
}

TEST(Config, CanonicalTextIgnoresOutputDirectoryAndOrder) {
  RunConfig a = parse("beta = 2\ngamma = 0.1\n");
  RunConfig b = parse("gamma = 0.1\nbeta = 2\nout = elsewhere\n");
  EXPECT_EQ(canonical_text(a), canonical_text(b));
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.seed = 2;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(canonical_text(a).find("out ="), std::string::npos);
}

TEST(Config, BlobHashMatchesGit) {
  // git hash-object of "hello\n"
  EXPECT_EQ(git_blob_hash("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
  EXPECT_EQ(git_blob_hash(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
}

TEST(Config, DoublesRoundTrip) {
  for (double x : {0.1, 1.0 / 3.0, 6.283185307179586, 1e-300, -2.5e17}) {
    EXPECT_EQ(std::stod(format_double(x)), x);
  }
  EXPECT_EQ(format_double(0.5), "0.5");
}

TEST(Config, ShippedConfigsParse) {
  for (const char* name : {"photon_decay.cfg", "steady_scan.cfg"}) {
    EXPECT_NO_THROW(load_config(std::string(QTHERM_SOURCE_DIR) + "/configs/" + name)) << name;
  }
}

// ---------------------------------------------------------------------------
// commands

TEST(Simulate, OutputIsSeedDeterministic) {
  Scratch a("sim-a"), b("sim-b");
  const CommandOutput oa = cmd_simulate(small_simulation(a.dir()), std::cerr, true);
  const CommandOutput ob = cmd_simulate(small_simulation(b.dir()), std::cerr, true);
  ASSERT_EQ(oa.files.size(), ob.files.size());
  for (const char* f : {"timeseries_exact.csv", "ledger_exact.csv"})
    EXPECT_EQ(slurp(a.dir() / f), slurp(b.dir() / f)) << f;
  const std::string text = slurp(a.dir() / "timeseries_exact.csv");
  EXPECT_NE(text.find("# config_hash = " + config_hash(small_simulation(a.dir()))), std::string::npos);
  EXPECT_EQ(column_row(a.dir() / "timeseries_exact.csv"),
            "t,mean_HA,se_HA,mean_HB,mean_HAB,Q_cum,W_cum,Wmeas_cum,S_A,S_tot,n_eff_traj");
  const auto r = rows(a.dir() / "timeseries_exact.csv");
  ASSERT_EQ(r.size(), 6u);
  EXPECT_EQ(r.front()[0], 0.0);
  EXPECT_EQ(r.back()[0], 10.0);
  EXPECT_EQ(r.front()[10], 70.0);
}

TEST(Simulate, BothModesWriteComparison) {
  Scratch s("sim-both");
  RunConfig c = small_simulation(s.dir());
  c.mode = SimMode::Both;
  c.process_mode = "density-matrix";
  c.n_traj = 3;
  cmd_simulate(c, std::cerr, true);
  for (const char* f : {"timeseries_exact.csv", "timeseries_weak.csv", "simulate_compare.svg"})
    EXPECT_TRUE(fs::exists(s.dir() / f)) << f;
  const auto exact = rows(s.dir() / "timeseries_exact.csv"), weak = rows(s.dir() / "timeseries_weak.csv");
  ASSERT_EQ(exact.size(), weak.size());
  // same start state, so both series begin at the same energy
  EXPECT_NEAR(exact.front()[1], weak.front()[1], 1e-12);
}

TEST(Simulate, FastModeWarnsOutsideItsRegime) {
  Scratch s("sim-fast");
  RunConfig c = small_simulation(s.dir());
  c.mode = SimMode::Fast;
  c.process_mode = "density-matrix";
  c.n_traj = 2;
  c.lambda = 0.1;
  std::ostringstream log;
  cmd_simulate(c, log, true);
  EXPECT_NE(log.str().find("fast-measurement regime"), std::string::npos);
  EXPECT_TRUE(fs::exists(s.dir() / "timeseries_fast.csv"));
}

TEST(SteadyScan, EmptyGridWritesHeaderOnly) {
  Scratch s("scan-empty");
  RunConfig c;
  c.out = s.dir().string();
  c.scan_betas.clear();
  cmd_steady_scan(c, std::cerr, true);
  EXPECT_TRUE(rows(s.dir() / "steady_scan.csv").empty());
  EXPECT_EQ(column_row(s.dir() / "steady_scan.csv"), "beta,lambda,p0,p1,beta_eff,residual,ok,beta_eff_min");
}

TEST(SteadyScan, HotReservoirTracksColdReservoirSaturates) {
  Scratch s("scan");
  RunConfig c;
  c.out = s.dir().string();
  c.model.n_max = 4;
  c.scan_betas = {0.05, 0.1, 20.0, 40.0};
  c.scan_lambdas = {2.0};
  cmd_steady_scan(c, std::cerr, true);
  const auto r = rows(s.dir() / "steady_scan.csv");
  ASSERT_EQ(r.size(), 4u);
  for (const auto& row : r) EXPECT_EQ(row[6], 1.0);
  // hot: beta_eff follows beta; cold: beta_eff approaches the floor
  EXPECT_NEAR(r[0][4] / r[0][0], 1.0, 0.05);
  EXPECT_NEAR(r[3][4] / r[3][7], 1.0, 0.02);
  EXPECT_NEAR(r[2][4], r[3][4], 0.02 * r[3][4]);
}

TEST(JcmAnalytic, CurvesMatchClosedForms) {
  Scratch s("analytic");
  RunConfig c;
  c.out = s.dir().string();
  c.model.rwa = true;
  c.analytic_n_max = 2;
  c.analytic_points = 11;
  c.analytic_t_max = 30.0;
  cmd_jcm_analytic(c, std::cerr, true);
  const auto amp = rows(s.dir() / "analytic_amplitudes.csv");
  ASSERT_EQ(amp.size(), 22u);
  for (const auto& r : amp) {
    EXPECT_NEAR(r[2] * r[2] + r[3] * r[3] + r[6], 1.0, 1e-12);
    EXPECT_NEAR(r[6], analytic::b2(static_cast<int>(r[0]), r[1], c.model), 1e-15);
  }
  const auto x = rows(s.dir() / "analytic_x.csv");
  ASSERT_EQ(x.size(), 11u);
  EXPECT_EQ(x.front()[1], 0.0);
  for (const auto& r : x) EXPECT_NEAR(r[2], -c.model.omega_a * r[1], 1e-12);
}

// ---------------------------------------------------------------------------
// verification

TEST(Verify, SingleCriterionReports) {
  Scratch s("verify");
  RunConfig c;
  c.out = s.dir().string();
  AcceptanceOptions opt;
  opt.only = {9};
  const VerifyOutcome v = cmd_verify(c, opt, std::cout, true);
  ASSERT_EQ(v.results.size(), 1u);
  EXPECT_TRUE(v.passed());
  EXPECT_EQ(format_result_line(v.results[0]).rfind("PASS AC9", 0), 0u);
  const std::string json = slurp(v.json_report);
  EXPECT_NE(json.find("\"passed\": true"), std::string::npos);
  EXPECT_NE(slurp(v.text_report).find("ALL PASSED"), std::string::npos);
}

TEST(Verify, SignFlipFixtureFailsEnergyBalance) {
  Scratch s("verify-flip");
  RunConfig c;
  c.out = s.dir().string();
  AcceptanceOptions opt;
  opt.only = {3};
  opt.inject_w_meas_sign_flip = true;
  const VerifyOutcome v = cmd_verify(c, opt, std::cout, true);
  ASSERT_EQ(v.results.size(), 1u);
  EXPECT_FALSE(v.passed());
  EXPECT_EQ(format_result_line(v.results[0]).rfind("FAIL AC3", 0), 0u);
}

// ---------------------------------------------------------------------------
// executable

TEST(Tool, ExitCodes) {
  Scratch s("tool");
  const std::string out = " --out " + s.dir().string();
  EXPECT_EQ(run_tool("--help"), 0);
  EXPECT_EQ(run_tool(""), 1);
  EXPECT_EQ(run_tool("frobnicate"), 1);
  EXPECT_EQ(run_tool("simulate --config /nonexistent.cfg" + out), 1);
  EXPECT_EQ(run_tool("simulate --mode sideways" + out), 1);
  EXPECT_EQ(run_tool("jcm-analytic --quiet" + out), 0);
  EXPECT_TRUE(fs::exists(s.dir() / "analytic_x.csv"));
  EXPECT_EQ(run_tool("verify --quiet --only 1" + out), 0);
  EXPECT_TRUE(fs::exists(s.dir() / "verify_report.json"));
}
