#pragma once

// CSV output: '#' comment header carrying the resolved configuration and its
// git-style blob hash, ',' separator, shortest round-trip floats. No
// timestamps or host data, so equal inputs give equal bytes.

#include <openssl/sha.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "qtherm/cli/config.hpp"

namespace qtherm::cli {

/// SHA-1 of "blob <len>\0<text>", hex encoded (what `git hash-object` prints).
inline std::string git_blob_hash(const std::string& text) {
  const std::string blob = "blob " + std::to_string(text.size()) + std::string(1, '\0') + text;
  unsigned char digest[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(blob.data()), blob.size(), digest);
  std::string hex;
  char buf[3];
  for (unsigned char b : digest) {
    std::snprintf(buf, sizeof buf, "%02x", b);
    hex += buf;
  }
  return hex;
}

inline std::string config_hash(const RunConfig& c) { return git_blob_hash(canonical_text(c)); }

class CsvWriter {
 public:
  /// Writes the comment header and the column row. `extra` lines are emitted
  /// as additional '# ' comments after the configuration.
  CsvWriter(const std::filesystem::path& path, const RunConfig& cfg, const std::vector<std::string>& columns,
            const std::vector<std::string>& extra = {})
      : path_(path), out_(path, std::ios::binary), width_(columns.size()) {
    if (!out_) throw Error("cannot write " + path.string());
    out_ << "# qtherm output\n";
    const std::string text = canonical_text(cfg);
    std::size_t pos = 0;
    while (pos < text.size()) {
      const auto nl = text.find('\n', pos);
      out_ << "# " << text.substr(pos, nl - pos) << "\n";
      pos = nl + 1;
    }
    out_ << "# config_hash = " << git_blob_hash(text) << "\n";
    for (const auto& e : extra) out_ << "# " << e << "\n";
    for (std::size_t k = 0; k < columns.size(); ++k) out_ << (k ? "," : "") << columns[k];
    out_ << "\n";
  }

  void row(const std::vector<double>& values) {
    if (values.size() != width_) throw Error("CsvWriter: row width mismatch in " + path_.string());
    for (std::size_t k = 0; k < values.size(); ++k) out_ << (k ? "," : "") << format_double(values[k]);
    out_ << "\n";
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t width_;
};

}  // namespace qtherm::cli
