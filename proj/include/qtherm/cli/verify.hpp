#pragma once

// `verify`: runs the acceptance criteria and writes a text and a JSON report.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "qtherm/cli/acceptance.hpp"
#include "qtherm/cli/csv.hpp"

namespace qtherm::cli {

/// One fixed-layout line per criterion: status, id, measured, bound, runtime, name.
inline std::string format_result_line(const CheckResult& r) {
  std::ostringstream s;
  s << (r.passed ? "PASS" : "FAIL") << " AC" << r.id << "  measured " << format_double(r.measured) << " "
    << (r.relation == "<" ? "<" : ">=") << " " << format_double(r.tolerance) << "  (" << format_double(r.seconds)
    << " s)  " << r.name;
  return s.str();
}

inline nlohmann::json to_json(const CheckResult& r) {
  return {{"id", r.id},           {"name", r.name},           {"passed", r.passed},
          {"measured", r.measured}, {"tolerance", r.tolerance}, {"relation", r.relation},
          {"seconds", r.seconds}, {"detail", r.detail}};
}

struct VerifyOutcome {
  std::vector<CheckResult> results;
  std::filesystem::path text_report, json_report;
  bool passed() const {
    for (const auto& r : results)
      if (!r.passed) return false;
    return true;
  }
};

inline VerifyOutcome cmd_verify(const RunConfig& cfg, const AcceptanceOptions& opt, std::ostream& log = std::cout,
                                bool quiet = false) {
  const std::filesystem::path dir(cfg.out);
  std::filesystem::create_directories(dir);
  VerifyOutcome out;
  out.results = run_acceptance(opt, [&](const CheckResult& r) {
    if (!quiet) log << format_result_line(r) << std::endl;
  });

  out.text_report = dir / "verify_report.txt";
  {
    std::ofstream f(out.text_report);
    f << "# qtherm verification report\n";
    for (const CheckResult& r : out.results) f << format_result_line(r) << "\n    " << r.detail << "\n";
    f << (out.passed() ? "ALL PASSED\n" : "FAILURES PRESENT\n");
  }
  out.json_report = dir / "verify_report.json";
  {
    nlohmann::json j;
    j["seed"] = opt.seed;
    j["passed"] = out.passed();
    j["checks"] = nlohmann::json::array();
    for (const CheckResult& r : out.results) j["checks"].push_back(to_json(r));
    std::ofstream(out.json_report) << j.dump(2) << "\n";
  }
  return out;
}

}  // namespace qtherm::cli
