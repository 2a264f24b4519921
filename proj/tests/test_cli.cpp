#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "ybspin/cli.hpp"
#include "ybspin/io.hpp"
#include "ybspin/spinham.hpp"

using namespace ybspin;
namespace fs = std::filesystem;

namespace {
fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("ybspin_test_" + name);
  fs::remove_all(d);
  return d;
}

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "ybspin");
  std::ostringstream o, e;
  const int code = cli::run_cli(args, o, e);
  return {code, o.str(), e.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

io::Dataset parse(const std::string& text, io::CsvSchema s) {
  std::istringstream in(text);
  return io::parse_measurement_csv(in, s, "test.csv");
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}
}  // namespace

TEST_CASE("config parsing") {
  const auto d = SpinSystemParams::defaults();
  const auto e = io::parse_config_text("# nothing here\n\n");
  CHECK(io::config_entries(e) == io::config_entries(d));

  const auto p = io::parse_config_text("ground.A_perp_GHz = -3.08187\nsystem.concentration_ppm = 10 # doubled\n");
  CHECK(p.A_ground.perpendicular == -3.08187);
  CHECK(p.concentration_ppm == 10);
  p.validate();
  // observables do not depend on the sign of A_perp
  const auto a = solve(d, ManifoldId::Ground, Vec3(0, 0, 20)).energies;
  const auto b = solve(p, ManifoldId::Ground, Vec3(0, 0, 20)).energies;
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);

  const auto msg = error_of([] { io::parse_config_text("system.concentration_ppm = -1\n"); });
  CHECK(msg.find("system.concentration_ppm") != std::string::npos);
  CHECK(msg.find("-1") != std::string::npos);

  CHECK(error_of([] { io::parse_config_text("ground.g_par = 1\nground.g_perp = abc\n"); }).find("line 2") !=
        std::string::npos);
  const auto unk = error_of([] { io::parse_config_text("ground.g_parallel = 1\n"); });
  CHECK(unk.find("line 1") != std::string::npos);
  CHECK(unk.find("ground.g_parallel") != std::string::npos);
  CHECK_THROWS_AS(io::parse_config_text("just words\n"), ValidationError);

  // formatted config parses back to the same record
  const auto back = io::parse_config_text(io::format_config(p));
  CHECK(io::config_entries(back) == io::config_entries(p));
}

TEST_CASE("measurement CSVs") {
  const auto ok = parse("tau_s,intensity\n0,1\n0.1,0.5\n0.2,0.25\n", io::CsvSchema::Decay);
  CHECK(ok.data.rows() == 3);
  CHECK(ok.column("intensity")(1) == 0.5);
  CHECK(ok.warnings.empty());

  const auto miss = error_of([] { parse("tau_s,signal\n0,1\n", io::CsvSchema::Decay); });
  CHECK(miss.find("intensity") != std::string::npos);

  const auto shuffled = error_of([] { parse("tau_s,intensity\n0,1\n0.2,0.5\n0.1,0.25\n", io::CsvSchema::Decay); });
  CHECK(shuffled.find("tau_s") != std::string::npos);

  const auto nonnum = error_of([] { parse("tau_s,intensity\n0,1\n0.1,x\n", io::CsvSchema::Decay); });
  CHECK(nonnum.find("intensity") != std::string::npos);

  const auto extra = parse("tau_s,intensity,comment_id\n0,1,7\n0.1,0.5,8\n", io::CsvSchema::Decay);
  CHECK(extra.warnings.size() == 1);
  CHECK(extra.warnings[0].find("comment_id") != std::string::npos);

  const auto sw = parse("current_A,detuning_GHz,absorption\n0,-1,0.1\n0,0,0.2\n1,-1,0.3\n1,0,0.4\n", io::CsvSchema::Sweep);
  CHECK(sw.data.rows() == 4);
}

TEST_CASE("deterministic outputs and manifest") {
  const auto d1 = fresh_dir("det1"), d2 = fresh_dir("det2");
  for (const auto& d : {d1, d2}) {
    const auto r = run({"--out", d.string(), "--seed", "7", "spectrum", "--points", "801"});
    REQUIRE(r.code == 0);
  }
  for (const char* f : {"spectrum.csv", "lines.csv"}) {
    CHECK(fs::exists(d1 / f));
    CHECK(slurp(d1 / f) == slurp(d2 / f));
  }
  int manifests = 0;
  std::set<std::string> files;
  for (const auto& e : fs::directory_iterator(d1)) {
    files.insert(e.path().filename().string());
    manifests += e.path().filename() == "manifest.json";
  }
  CHECK(manifests == 1);
  const auto m = nlohmann::json::parse(slurp(d1 / "manifest.json"));
  CHECK(m["seed"] == 7);
  CHECK(m["exit_code"] == 0);
  CHECK(m["command"] == "spectrum");
  std::set<std::string> listed;
  for (const auto& o : m["outputs"]) listed.insert(o.get<std::string>());
  files.erase("manifest.json");
  CHECK(listed == files);
}

TEST_CASE("CSV round trip through the fit command") {
  const auto d = fresh_dir("echo");
  fs::create_directories(d);
  Eigen::MatrixXd rows(30, 2);
  for (int k = 0; k < 30; ++k) rows.row(k) << k * 0.01, std::exp(-2 * k * 0.01 / 0.15);
  io::write_csv(d / "echo.csv", {"tau_s", "intensity"}, rows);
  const auto back = io::read_measurement_csv(d / "echo.csv", io::CsvSchema::Decay);
  CHECK((back.data - rows).cwiseAbs().maxCoeff() < 1e-9);
  const auto r = run({"--out", (d / "out").string(), "fit", "--model", "echo", "--input", (d / "echo.csv").string()});
  CHECK(r.code == 0);
  CHECK(slurp(d / "out" / "fit.txt").find("T2") != std::string::npos);
  const auto m = nlohmann::json::parse(slurp(d / "out" / "manifest.json"));
  REQUIRE(m["inputs"].size() == 1);
  CHECK(m["inputs"][0]["sha256"] == io::sha256_file(d / "echo.csv"));
}

TEST_CASE("exit codes") {
  const auto d = fresh_dir("codes");
  CHECK(run({"--out", d.string(), "levels"}).code == 0);
  const auto bad = run({"--out", d.string(), "--set", "system.concentration_ppm=-1", "levels"});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("system.concentration_ppm") != std::string::npos);
  CHECK(run({"--out", d.string(), "--set", "ground.nope=1", "levels"}).code == 1);
  CHECK(run({"--out", d.string(), "nosuchcommand"}).code == 1);
  CHECK(run({"--out", d.string(), "fit", "--model", "echo", "--input", (d / "missing.csv").string()}).code == 1);
  CHECK(run({"--out", d.string(), "pump", "--duration", "0"}).code == 1);
  const auto m = nlohmann::json::parse(slurp(d / "manifest.json"));
  CHECK(m["exit_code"] == 1);
}

TEST_CASE("command outputs") {
  const auto d = fresh_dir("outputs");
  REQUIRE(run({"--out", d.string(), "levels"}).code == 0);
  const auto lv = slurp(d / "levels.txt");
  CHECK(lv.find("clock ground |1>-|4>") != std::string::npos);
  CHECK(lv.find("3.08187") != std::string::npos);

  REQUIRE(run({"--out", d.string(), "spectrum"}).code == 0);
  const auto sp = slurp(d / "spectrum.txt");
  for (const char* l : {"A", "B", "C", "D", "E", "F"}) CHECK(sp.find(l) != std::string::npos);

  REQUIRE(run({"--out", d.string(), "budget", "--mode", "spin", "--t2", "0.15"}).code == 0);
  CHECK(slurp(d / "budget.txt").find("13.3") != std::string::npos);
  REQUIRE(run({"--out", d.string(), "budget", "--mode", "optical"}).code == 0);
  CHECK(slurp(d / "budget.txt").find("0.00077") != std::string::npos);
}
