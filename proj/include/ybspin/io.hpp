#pragma once
// Config files, measurement CSVs and run manifests.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "ybspin/core.hpp"

namespace ybspin::io {

namespace fs = std::filesystem;

// One `section.key = value` assignment. Throws ValidationError naming the
// key for unknown keys and unparsable values.
void apply_setting(SpinSystemParams& p, const std::string& key, const std::string& value);

// Line-oriented config; '#' starts a comment. Errors carry "line N".
SpinSystemParams parse_config_text(const std::string& text, SpinSystemParams base = SpinSystemParams::defaults());
SpinSystemParams parse_config_file(const fs::path& path, SpinSystemParams base = SpinSystemParams::defaults());

// Every known key with its current value, in a fixed order.
std::vector<std::pair<std::string, std::string>> config_entries(const SpinSystemParams& p);
std::string format_config(const SpinSystemParams& p);

enum class CsvSchema { Spectrum, Decay, Recovery, Sweep };
const char* to_string(CsvSchema s);
CsvSchema parse_schema(const std::string& s);

struct Dataset {
  CsvSchema schema;
  std::vector<std::string> columns;  // schema columns, in schema order
  Eigen::MatrixXd data;              // rows x columns
  std::vector<std::string> warnings;

  Eigen::VectorXd column(const std::string& name) const;
};

// Sweep files may carry current_A instead of field_mT as the field column.
Dataset parse_measurement_csv(std::istream& in, CsvSchema schema, const std::string& source = "<stream>");
Dataset read_measurement_csv(const fs::path& path, CsvSchema schema);

// Fixed %.10g formatting so repeated runs are byte-identical.
std::string format_number(double v);
void write_csv(const fs::path& path, const std::vector<std::string>& header, const Eigen::MatrixXd& rows);

std::string sha256_file(const fs::path& path);

struct RunManifest {
  std::string tool_version;
  std::string command;
  std::vector<std::string> argv;
  std::vector<std::pair<std::string, std::string>> config;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> inputs;  // path, sha256
  std::vector<std::string> outputs;                         // file names in the output directory
  double duration_s = 0;
  int exit_code = 0;
};

void write_manifest(const fs::path& dir, const RunManifest& m);

}  // namespace ybspin::io
