#pragma once

// Flat key = value run configuration. '#' starts a comment; blank lines are
// ignored; later keys override earlier ones. Every key has a default that
// matches the reference state point (resonant full Rabi coupling, gamma = 0.05,
// lambda = 0.01, beta = 1, start in Fock state 1).

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "qtherm/error.hpp"
#include "qtherm/params.hpp"

namespace qtherm::cli {

class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, int line, std::string key)
      : Error(line > 0 ? "config line " + std::to_string(line) + " (" + key + "): " + what
                       : "config key " + key + ": " + what),
        line_(line),
        key_(std::move(key)) {}
  int line() const noexcept { return line_; }
  const std::string& key() const noexcept { return key_; }

 private:
  int line_;
  std::string key_;
};

enum class SimMode { Exact, Weak, Fast, Both };

struct RunConfig {
  JcmParams model;
  double lambda = 1e-2;
  double beta = 1.0;
  double horizon = 300.0;
  std::uint64_t seed = 1;
  std::string process_mode = "trajectory";  // trajectory | density-matrix
  int n_traj = 5000;
  int initial_fock = 1;
  int checkpoints = 101;  // evenly spaced over [0, horizon]
  SimMode mode = SimMode::Exact;
  std::vector<double> scan_betas{0.25, 0.5, 1, 2, 4, 8, 16};
  std::vector<double> scan_lambdas{0.6283185307179586, 1.2566370614359172, 6.283185307179586};
  int analytic_n_max = 5;
  double analytic_t_max = 200.0;
  int analytic_points = 401;
  std::string out = "out";
};

inline std::string to_string(SimMode m) {
  switch (m) {
    case SimMode::Exact: return "exact";
    case SimMode::Weak: return "weak";
    case SimMode::Fast: return "fast";
    case SimMode::Both: return "both";
  }
  return "exact";
}

/// Shortest decimal string that reads back to the same double.
inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& v, int line, const std::string& key) {
  double x = 0.0;
  const auto* end = v.data() + v.size();
  const auto res = std::from_chars(v.data(), end, x);
  if (res.ec != std::errc() || res.ptr != end) throw ConfigError("expected a number, got '" + v + "'", line, key);
  return x;
}

inline long long parse_int(const std::string& v, int line, const std::string& key) {
  long long x = 0;
  const auto* end = v.data() + v.size();
  const auto res = std::from_chars(v.data(), end, x);
  if (res.ec != std::errc() || res.ptr != end) throw ConfigError("expected an integer, got '" + v + "'", line, key);
  return x;
}

inline bool parse_bool(const std::string& v, int line, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("expected true/false, got '" + v + "'", line, key);
}

inline std::vector<double> parse_list(const std::string& v, int line, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_double(item, line, key));
  }
  return out;
}

inline std::string join(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t k = 0; k < xs.size(); ++k) s += (k ? "," : "") + format_double(xs[k]);
  return s;
}

}  // namespace detail

/// Applies one key = value assignment. line = 0 marks a command-line override.
inline void apply_setting(RunConfig& c, const std::string& key, const std::string& value, int line = 0) {
  using namespace detail;
  auto positive = [&](double x) {
    if (!(x > 0.0)) throw ConfigError("must be > 0", line, key);
    return x;
  };
  if (key == "omega_a") c.model.omega_a = positive(parse_double(value, line, key));
  else if (key == "omega_b") c.model.omega_b = positive(parse_double(value, line, key));
  else if (key == "gamma") {
    c.model.gamma = parse_double(value, line, key);
    if (!(c.model.gamma >= 0.0)) throw ConfigError("must be >= 0", line, key);
  } else if (key == "n_max") {
    const long long n = parse_int(value, line, key);
    if (n < 1 || n > 2047) throw ConfigError("must be in [1, 2047]", line, key);
    c.model.n_max = static_cast<int>(n);
  } else if (key == "rwa") c.model.rwa = parse_bool(value, line, key);
  else if (key == "lambda") c.lambda = positive(parse_double(value, line, key));
  else if (key == "beta") {
    c.beta = parse_double(value, line, key);
    if (!(c.beta >= 0.0)) throw ConfigError("must be >= 0", line, key);
  } else if (key == "horizon") {
    c.horizon = parse_double(value, line, key);
    if (!(c.horizon >= 0.0)) throw ConfigError("must be >= 0", line, key);
  } else if (key == "seed") {
    const long long s = parse_int(value, line, key);
    if (s < 0) throw ConfigError("must be >= 0", line, key);
    c.seed = static_cast<std::uint64_t>(s);
  } else if (key == "process_mode") {
    if (value != "trajectory" && value != "density-matrix") {
      throw ConfigError("expected trajectory or density-matrix", line, key);
    }
    c.process_mode = value;
  } else if (key == "n_traj") {
    const long long n = parse_int(value, line, key);
    if (n < 1) throw ConfigError("must be >= 1", line, key);
    c.n_traj = static_cast<int>(n);
  } else if (key == "initial_fock") {
    const long long n = parse_int(value, line, key);
    if (n < 0) throw ConfigError("must be >= 0", line, key);
    c.initial_fock = static_cast<int>(n);
  } else if (key == "checkpoints") {
    const long long n = parse_int(value, line, key);
    if (n < 0) throw ConfigError("must be >= 0", line, key);
    c.checkpoints = static_cast<int>(n);
  } else if (key == "mode") {
    if (value == "exact") c.mode = SimMode::Exact;
    else if (value == "weak") c.mode = SimMode::Weak;
    else if (value == "fast") c.mode = SimMode::Fast;
    else if (value == "both") c.mode = SimMode::Both;
    else throw ConfigError("expected exact, weak, fast or both", line, key);
  } else if (key == "scan_betas") c.scan_betas = parse_list(value, line, key);
  else if (key == "scan_lambdas") {
    c.scan_lambdas = parse_list(value, line, key);
    for (double l : c.scan_lambdas) positive(l);
  } else if (key == "analytic_n_max") {
    const long long n = parse_int(value, line, key);
    if (n < 1) throw ConfigError("must be >= 1", line, key);
    c.analytic_n_max = static_cast<int>(n);
  } else if (key == "analytic_t_max") c.analytic_t_max = positive(parse_double(value, line, key));
  else if (key == "analytic_points") {
    const long long n = parse_int(value, line, key);
    if (n < 2) throw ConfigError("must be >= 2", line, key);
    c.analytic_points = static_cast<int>(n);
  } else if (key == "out") c.out = value;
  else throw ConfigError("unknown key", line, key);
}

inline RunConfig parse_config(std::istream& in, RunConfig c = {}) {
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string text = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value", line, text);
    const std::string key = detail::trim(text.substr(0, eq));
    const std::string value = detail::trim(text.substr(eq + 1));
    if (key.empty()) throw ConfigError("empty key", line, key);
    apply_setting(c, key, value, line);
  }
  if (c.initial_fock > c.model.n_max) throw ConfigError("exceeds n_max", 0, "initial_fock");
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open '" + path + "'", 0, "--config");
  return parse_config(f);
}

/// Canonical text of every parameter that affects results (out excluded),
/// sorted by key. This is what output headers embed and what gets hashed.
inline std::string canonical_text(const RunConfig& c) {
  std::map<std::string, std::string> kv;
  kv["omega_a"] = format_double(c.model.omega_a);
  kv["omega_b"] = format_double(c.model.omega_b);
  kv["gamma"] = format_double(c.model.gamma);
  kv["n_max"] = std::to_string(c.model.n_max);
  kv["rwa"] = c.model.rwa ? "true" : "false";
  kv["lambda"] = format_double(c.lambda);
  kv["beta"] = format_double(c.beta);
  kv["horizon"] = format_double(c.horizon);
  kv["seed"] = std::to_string(c.seed);
  kv["process_mode"] = c.process_mode;
  kv["n_traj"] = std::to_string(c.n_traj);
  kv["initial_fock"] = std::to_string(c.initial_fock);
  kv["checkpoints"] = std::to_string(c.checkpoints);
  kv["mode"] = to_string(c.mode);
  kv["scan_betas"] = detail::join(c.scan_betas);
  kv["scan_lambdas"] = detail::join(c.scan_lambdas);
  kv["analytic_n_max"] = std::to_string(c.analytic_n_max);
  kv["analytic_t_max"] = format_double(c.analytic_t_max);
  kv["analytic_points"] = std::to_string(c.analytic_points);
  std::string s;
  for (const auto& [k, v] : kv) s += k + " = " + v + "\n";
  return s;
}

}  // namespace qtherm::cli
