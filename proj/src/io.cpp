#include "ybspin/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include "json.hpp"
#include <sstream>

namespace ybspin::io {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  double x = 0;
  const auto r = std::from_chars(t.data(), t.data() + t.size(), x);
  if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size() || !std::isfinite(x))
    throw ValidationError(key + ": expected a finite number, got '" + t + "'");
  return x;
}

int parse_int(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  int x = 0;
  const auto r = std::from_chars(t.data(), t.data() + t.size(), x);
  if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size())
    throw ValidationError(key + ": expected an integer, got '" + t + "'");
  return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ValidationError(key + ": expected true or false, got '" + t + "'");
}

using Setter = std::function<void(SpinSystemParams&, const std::string&, const std::string&)>;
using Getter = std::function<std::string(const SpinSystemParams&)>;

struct Key {
  const char* name;
  Setter set;
  Getter get;
};

Key tensor_key(const char* name, UniaxialTensor SpinSystemParams::*t, bool par) {
  return {name,
          [t, par](SpinSystemParams& p, const std::string& k, const std::string& v) {
            const double x = parse_double(k, v);
            (par ? (p.*t).parallel : (p.*t).perpendicular) = x;
          },
          [t, par](const SpinSystemParams& p) { return format_number(par ? (p.*t).parallel : (p.*t).perpendicular); }};
}

template <typename T>
Key scalar_key(const char* name, T SpinSystemParams::*f) {
  return {name,
          [f](SpinSystemParams& p, const std::string& k, const std::string& v) {
            if constexpr (std::is_same_v<T, bool>)
              p.*f = parse_bool(k, v);
            else if constexpr (std::is_same_v<T, int>)
              p.*f = parse_int(k, v);
            else
              p.*f = parse_double(k, v);
          },
          [f](const SpinSystemParams& p) {
            if constexpr (std::is_same_v<T, bool>)
              return std::string(p.*f ? "true" : "false");
            else
              return format_number(static_cast<double>(p.*f));
          }};
}

const std::vector<Key>& keys() {
  static const std::vector<Key> k = {
      tensor_key("ground.g_par", &SpinSystemParams::g_ground, true),
      tensor_key("ground.g_perp", &SpinSystemParams::g_ground, false),
      tensor_key("ground.A_par_GHz", &SpinSystemParams::A_ground, true),
      tensor_key("ground.A_perp_GHz", &SpinSystemParams::A_ground, false),
      tensor_key("excited.g_par", &SpinSystemParams::g_excited, true),
      tensor_key("excited.g_perp", &SpinSystemParams::g_excited, false),
      tensor_key("excited.A_par_GHz", &SpinSystemParams::A_excited, true),
      tensor_key("excited.A_perp_GHz", &SpinSystemParams::A_excited, false),
      scalar_key("system.g_n", &SpinSystemParams::g_n),
      scalar_key("system.T1_s", &SpinSystemParams::T1_optical),
      scalar_key("system.optical_center_nm", &SpinSystemParams::optical_center_nm),
      scalar_key("system.fwhm_optical_MHz", &SpinSystemParams::fwhm_optical_MHz),
      scalar_key("system.fwhm_spin_kHz", &SpinSystemParams::fwhm_spin_kHz),
      scalar_key("system.concentration_ppm", &SpinSystemParams::concentration_ppm),
      scalar_key("system.unit_cell_volume_nm3", &SpinSystemParams::unit_cell_volume_nm3),
      scalar_key("system.sites_per_cell", &SpinSystemParams::sites_per_cell),
      scalar_key("system.refractive_index", &SpinSystemParams::refractive_index),
      scalar_key("system.nuclear_zeeman", &SpinSystemParams::nuclear_zeeman),
  };
  return k;
}

}  // namespace

void apply_setting(SpinSystemParams& p, const std::string& key, const std::string& value) {
  const std::string k = trim(key);
  for (const auto& e : keys())
    if (k == e.name) {
      e.set(p, k, value);
      return;
    }
  throw ValidationError("unknown config key '" + k + "'");
}

SpinSystemParams parse_config_text(const std::string& text, SpinSystemParams p) {
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string key = eq == std::string::npos ? "" : trim(line.substr(0, eq));
    if (eq == std::string::npos || key.find('.') == std::string::npos)
      throw ValidationError("line " + std::to_string(n) + ": expected 'section.key = value'");
    try {
      apply_setting(p, key, line.substr(eq + 1));
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(n) + ": " + e.what());
    }
  }
  p.validate();
  return p;
}

SpinSystemParams parse_config_file(const fs::path& path, SpinSystemParams base) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config_text(ss.str(), std::move(base));
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::vector<std::pair<std::string, std::string>> config_entries(const SpinSystemParams& p) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& k : keys()) out.emplace_back(k.name, k.get(p));
  return out;
}

std::string format_config(const SpinSystemParams& p) {
  std::string s;
  for (const auto& [k, v] : config_entries(p)) s += k + " = " + v + "\n";
  return s;
}

// ---- CSV ----

const char* to_string(CsvSchema s) {
  switch (s) {
    case CsvSchema::Spectrum: return "spectrum";
    case CsvSchema::Decay: return "decay";
    case CsvSchema::Recovery: return "recovery";
    case CsvSchema::Sweep: return "sweep";
  }
  return "?";
}

CsvSchema parse_schema(const std::string& s) {
  for (auto c : {CsvSchema::Spectrum, CsvSchema::Decay, CsvSchema::Recovery, CsvSchema::Sweep})
    if (s == to_string(c)) return c;
  throw ValidationError("unknown CSV schema '" + s + "'");
}

Eigen::VectorXd Dataset::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw ValidationError("dataset has no column '" + name + "'");
  return data.col(it - columns.begin());
}

namespace {
std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::vector<std::string> schema_columns(CsvSchema s) {
  switch (s) {
    case CsvSchema::Spectrum: return {"detuning_GHz", "absorption"};
    case CsvSchema::Decay: return {"tau_s", "intensity"};
    case CsvSchema::Recovery: return {"delay_s", "n1g", "n23g", "n4g"};
    case CsvSchema::Sweep: return {"field_mT", "detuning_GHz", "absorption"};
  }
  return {};
}

bool strictly_monotonic(const Eigen::VectorXd& v) {
  if (v.size() < 2) return true;
  bool up = true, down = true;
  for (Eigen::Index k = 1; k < v.size(); ++k) {
    up &= v(k) > v(k - 1);
    down &= v(k) < v(k - 1);
  }
  return up || down;
}
}  // namespace

Dataset parse_measurement_csv(std::istream& in, CsvSchema schema, const std::string& src) {
  Dataset d{schema, schema_columns(schema), {}, {}};
  std::string line;
  int n = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++n;
    if (!trim(line).empty() && trim(line)[0] != '#') {
      header = split(trim(line));
      break;
    }
  }
  if (header.empty()) throw ValidationError(src + ": empty file, expected a header row");
  if (schema == CsvSchema::Sweep && std::find(header.begin(), header.end(), "field_mT") == header.end() &&
      std::find(header.begin(), header.end(), "current_A") != header.end())
    d.columns[0] = "current_A";

  std::vector<int> idx;
  for (const auto& c : d.columns) {
    const auto it = std::find(header.begin(), header.end(), c);
    if (it == header.end()) throw ValidationError(src + ": missing column '" + c + "' for schema " + to_string(schema));
    idx.push_back(static_cast<int>(it - header.begin()));
  }
  for (const auto& h : header)
    if (std::find(d.columns.begin(), d.columns.end(), h) == d.columns.end())
      d.warnings.push_back(src + ": ignoring unknown column '" + h + "'");

  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++n;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto cells = split(t);
    if (cells.size() != header.size())
      throw ValidationError(src + ": line " + std::to_string(n) + ": expected " + std::to_string(header.size()) +
                            " cells, got " + std::to_string(cells.size()));
    std::vector<double> r;
    for (std::size_t c = 0; c < idx.size(); ++c) {
      try {
        r.push_back(parse_double(d.columns[c], cells[idx[c]]));
      } catch (const ValidationError&) {
        throw ValidationError(src + ": line " + std::to_string(n) + ": non-numeric cell '" + cells[idx[c]] +
                              "' in column '" + d.columns[c] + "'");
      }
    }
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw ValidationError(src + ": no data rows");
  d.data.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d.columns.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) d.data(r, c) = rows[r][c];

  if (schema == CsvSchema::Sweep) {
    // blocks of constant field, each with a monotonic detuning axis
    Eigen::Index b = 0;
    std::vector<double> fields;
    while (b < d.data.rows()) {
      Eigen::Index e = b;
      while (e < d.data.rows() && d.data(e, 0) == d.data(b, 0)) ++e;
      if (!fields.empty() && std::find(fields.begin(), fields.end(), d.data(b, 0)) != fields.end())
        throw ValidationError(src + ": non-monotonic axis '" + d.columns[0] + "' (field blocks must be contiguous)");
      fields.push_back(d.data(b, 0));
      if (!strictly_monotonic(d.data.col(1).segment(b, e - b)))
        throw ValidationError(src + ": non-monotonic axis 'detuning_GHz'");
      b = e;
    }
    Eigen::VectorXd f(static_cast<Eigen::Index>(fields.size()));
    for (std::size_t k = 0; k < fields.size(); ++k) f(k) = fields[k];
    if (!strictly_monotonic(f)) throw ValidationError(src + ": non-monotonic axis '" + d.columns[0] + "'");
  } else if (!strictly_monotonic(d.data.col(0))) {
    throw ValidationError(src + ": non-monotonic axis '" + d.columns[0] + "'");
  }
  return d;
}

Dataset read_measurement_csv(const fs::path& path, CsvSchema schema) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read '" + path.string() + "'");
  return parse_measurement_csv(in, schema, path.string());
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void write_csv(const fs::path& path, const std::vector<std::string>& header, const Eigen::MatrixXd& rows) {
  if (rows.cols() != static_cast<Eigen::Index>(header.size()))
    throw ValidationError("write_csv: header has " + std::to_string(header.size()) + " columns, data " +
                          std::to_string(rows.cols()));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << "\n";
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    for (Eigen::Index c = 0; c < rows.cols(); ++c) out << (c ? "," : "") << format_number(rows(r, c));
    out << "\n";
  }
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read '" + path.string() + "'");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 14];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char h[3];
  for (unsigned i = 0; i < len; ++i) {
    std::snprintf(h, sizeof h, "%02x", md[i]);
    hex += h;
  }
  return hex;
}

void write_manifest(const fs::path& dir, const RunManifest& m) {
  nlohmann::ordered_json j;
  j["tool"] = "ybspin";
  j["version"] = m.tool_version;
  j["command"] = m.command;
  j["argv"] = m.argv;
  nlohmann::ordered_json cfg;
  for (const auto& [k, v] : m.config) cfg[k] = v;
  j["config"] = cfg;
  j["seed"] = m.seed;
  nlohmann::ordered_json in = nlohmann::ordered_json::array();
  for (const auto& [p, d] : m.inputs) in.push_back({{"path", p}, {"sha256", d}});
  j["inputs"] = in;
  j["outputs"] = m.outputs;
  j["duration_s"] = m.duration_s;
  j["exit_code"] = m.exit_code;
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  if (!out) throw ValidationError("cannot write manifest in '" + dir.string() + "'");
  out << j.dump(2) << "\n";
}

}  // namespace ybspin::io
