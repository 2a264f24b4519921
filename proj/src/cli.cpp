#include "ybspin/cli.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "ybspin/fitting.hpp"
#include "ybspin/grouptheory.hpp"
#include "ybspin/io.hpp"

namespace ybspin::cli {

namespace fs = std::filesystem;

namespace {

struct Context {
  SpinSystemParams params;
  fs::path out_dir;
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;
  std::vector<std::pair<std::string, std::string>> inputs;
  std::ostream* out = nullptr;

  fs::path file(const std::string& name) {
    if (std::find(outputs.begin(), outputs.end(), name) == outputs.end()) outputs.push_back(name);
    return out_dir / name;
  }
  void input(const std::string& path) { inputs.emplace_back(path, io::sha256_file(path)); }
  void text(const std::string& name, const std::string& body) {
    std::ofstream f(file(name), std::ios::binary);
    f << body;
    *out << body;
  }
};

std::string fmt(double v, int prec = 6) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << v;
  return os.str();
}

Vec3 parse_vec3(const std::string& s) {
  std::stringstream ss(s);
  std::string c;
  std::vector<double> v;
  while (std::getline(ss, c, ',')) {
    try {
      v.push_back(std::stod(c));
    } catch (...) {
      throw ValidationError("expected three comma-separated numbers, got '" + s + "'");
    }
  }
  if (v.size() != 3) throw ValidationError("expected three comma-separated numbers, got '" + s + "'");
  return {v[0], v[1], v[2]};
}

Vec3 parse_axis(const std::string& s) {
  if (s == "par" || s == "c" || s == "z") return Vec3::UnitZ();
  if (s == "perp" || s == "a" || s == "x") return Vec3::UnitX();
  if (s == "b" || s == "y") return Vec3::UnitY();
  const Vec3 v = parse_vec3(s);
  if (v.norm() == 0) throw ValidationError("field axis must be non-zero");
  return v.normalized();
}

// ---- subcommands ----

struct LevelsOpt {
  std::string field = "0,0,0";
};

void cmd_levels(Context& c, const LevelsOpt& o) {
  const Vec3 B = parse_vec3(o.field);
  Eigen::MatrixXd rows(8, 6);
  std::ostringstream txt;
  txt << "B = (" << B.x() << ", " << B.y() << ", " << B.z() << ") mT\n";
  int r = 0;
  for (auto m : {ManifoldId::Ground, ManifoldId::Excited}) {
    const auto es = solve(c.params, m, B);
    const auto sens = level_sensitivities(c.params, m, B);
    for (int k = 0; k < 4; ++k, ++r) {
      rows.row(r) << (m == ManifoldId::Ground ? 0 : 1), k + 1, es.energies(k), sens(k, 0), sens(k, 1), sens(k, 2);
      txt << to_string(m) << " |" << k + 1 << ">  " << fmt(es.energies(k)) << " GHz\n";
    }
  }
  for (auto m : {ManifoldId::Ground, ManifoldId::Excited}) {
    const auto es = solve(c.params, m, B);
    for (const auto& cp : find_clock_transitions(c.params, m, B))
      txt << "clock " << to_string(m) << " |" << cp.i << ">-|" << cp.j << ">  "
          << fmt(es.energies(cp.j - 1) - es.energies(cp.i - 1)) << " GHz\n";
  }
  io::write_csv(c.file("levels.csv"), {"manifold", "level", "energy_GHz", "sens_x_MHz_per_mT", "sens_y_MHz_per_mT",
                                       "sens_z_MHz_per_mT"},
                rows);
  c.text("levels.txt", txt.str());
}

struct SpectrumOpt {
  std::string pol = "sigma", field = "0,0,0", weighting = "table";
  double min = -6, max = 6;
  std::size_t points = 2401;
};

CatalogOptions catalog_options(const std::string& pol, const std::string& weighting) {
  CatalogOptions co;
  co.polarization = parse_polarization(pol);
  if (weighting == "uniform")
    co.weighting = LineWeighting::Uniform;
  else if (weighting != "table")
    throw ValidationError("--weighting must be table or uniform");
  return co;
}

void cmd_spectrum(Context& c, const SpectrumOpt& o) {
  const auto co = catalog_options(o.pol, o.weighting);
  const Vec3 B = parse_vec3(o.field);
  const auto lines = transition_catalog(c.params, B, co);
  const auto s = synthesize_spectrum(lines, c.params.fwhm_optical_MHz, Grid{o.min, o.max, o.points});
  Eigen::MatrixXd rows(s.detuning.size(), 2);
  rows << s.detuning, s.absorption;
  io::write_csv(c.file("spectrum.csv"), {"detuning_GHz", "absorption"}, rows);
  Eigen::MatrixXd lr(static_cast<Eigen::Index>(lines.size()), 5);
  for (std::size_t k = 0; k < lines.size(); ++k)
    lr.row(k) << lines[k].ground_index, lines[k].excited_index, lines[k].detuning, lines[k].weight,
        lines[k].zero_spin ? 1 : 0;
  io::write_csv(c.file("lines.csv"), {"ground", "excited", "detuning_GHz", "weight", "zero_spin"}, lr);
  std::ostringstream txt;
  txt << "polarization " << to_string(co.polarization) << ", " << lines.size() << " lines\n";
  if (B.norm() == 0)
    for (const auto& pk : label_peaks(lines, c.params.fwhm_optical_MHz * 1e-3 / 2)) {
      txt << pk.letter << "  " << fmt(pk.detuning, 4) << " GHz  weight " << fmt(pk.weight, 3) << "  ";
      for (auto [g, e] : pk.pairs) txt << " " << g << "g-" << e << "e";
      txt << "\n";
    }
  c.text("spectrum.txt", txt.str());
}

struct SweepOpt {
  std::string axis = "par", pol = "sigma", weighting = "uniform";
  double bmin = 0, bmax = 200, min = -12, max = 12;
  std::size_t steps = 21, points = 1201;
};

void cmd_sweep(Context& c, const SweepOpt& o) {
  SweepOptions so;
  so.catalog = catalog_options(o.pol, o.weighting);
  const auto m = field_sweep_map(c.params, parse_axis(o.axis), o.bmin, o.bmax, o.steps, Grid{o.min, o.max, o.points}, so);
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(m.fields_mT.size() * o.points), 3);
  Eigen::Index r = 0;
  for (std::size_t f = 0; f < m.fields_mT.size(); ++f)
    for (Eigen::Index k = 0; k < m.spectra[f].detuning.size(); ++k, ++r)
      rows.row(r) << m.fields_mT[f], m.spectra[f].detuning(k), m.spectra[f].absorption(k);
  io::write_csv(c.file("sweep.csv"), {"field_mT", "detuning_GHz", "absorption"}, rows.topRows(r));
  c.text("sweep.txt", std::to_string(m.fields_mT.size()) + " field steps along the " + o.axis + " axis\n");
}

struct EprOpt {
  double freq = 9.4, theta = 90, phi = 0, bmin = 1, bmax = 2000;
  bool zero_spin = false;
};

void cmd_epr(Context& c, const EprOpt& o) {
  EprOptions eo;
  eo.zero_spin = o.zero_spin;
  const auto res = epr_resonance_fields(c.params, o.freq, o.theta, o.phi, o.bmin, o.bmax, eo);
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(res.size()), 4);
  std::ostringstream txt;
  for (std::size_t k = 0; k < res.size(); ++k) {
    rows.row(k) << res[k].field_mT, res[k].i, res[k].j, res[k].weight;
    txt << fmt(res[k].field_mT, 3) << " mT  |" << res[k].i << ">-|" << res[k].j << ">  weight " << fmt(res[k].weight, 4)
        << "\n";
  }
  io::write_csv(c.file("epr.csv"), {"field_mT", "i", "j", "weight"}, rows);
  c.text("epr.txt", txt.str());
}

struct RosetteOpt {
  std::string plane = "ca";
  std::size_t steps = 91;
  double freq = 9.4, bmin = 1, bmax = 2000, span = 180;
  bool zero_spin = false;
};

void cmd_rosette(Context& c, const RosetteOpt& o) {
  RosettePlane pl;
  if (o.plane == "ca")
    pl = RosettePlane::CA;
  else if (o.plane == "ab")
    pl = RosettePlane::AB;
  else
    throw ValidationError("--plane must be ca or ab");
  EprOptions eo;
  eo.zero_spin = o.zero_spin;
  const auto rows_v = angular_rosette(c.params, pl, o.steps, o.freq, o.bmin, o.bmax, o.span, eo);
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(rows_v.size()), 5);
  for (std::size_t k = 0; k < rows_v.size(); ++k)
    rows.row(k) << rows_v[k].angle_deg, rows_v[k].resonance.field_mT, rows_v[k].resonance.i, rows_v[k].resonance.j,
        rows_v[k].resonance.weight;
  io::write_csv(c.file("rosette.csv"), {"angle_deg", "field_mT", "i", "j", "weight"}, rows);
  c.text("rosette.txt", std::to_string(rows_v.size()) + " resonances in the " + o.plane + " plane\n");
}

struct RulesOpt {
  std::string group = "d2d", variant = "right";
};

void cmd_rules(Context& c, const RulesOpt& o) {
  const PointGroup g = parse_point_group(o.group);
  AssignmentVariant v;
  if (o.variant == "left")
    v = AssignmentVariant::Left;
  else if (o.variant == "right")
    v = AssignmentVariant::Right;
  else
    throw ValidationError("--variant must be left or right");
  const auto [ga, ea] = standard_assignment(g, v);
  const auto t = hyperfine_selection_table(g, ga, ea);
  static const char* gn[] = {"1g", "2,3g", "4g"};
  static const char* en[] = {"1,2e", "3e", "4e"};
  std::ostringstream txt;
  txt << to_string(g) << " (" << o.variant << ")\n";
  txt << std::left << std::setw(14) << "ground\\excited";
  for (int e = 0; e < 3; ++e) txt << std::setw(40) << (std::string(en[e]) + " " + irrep_name(g, ea[e]));
  txt << "\n";
  for (int r = 0; r < 3; ++r) {
    txt << std::setw(14) << (std::string(gn[r]) + " " + irrep_name(g, ga[r]));
    for (int e = 0; e < 3; ++e)
      txt << std::setw(40) << ("ED " + t.cell[r][e].ed.str() + " / MD " + t.cell[r][e].md.str());
    txt << "\n";
  }
  const auto mm = ed_predicted_unobserved(t, observed_hyperfine_rules());
  txt << "ED-allowed but unobserved: " << mm.size() << "\n";
  for (const auto& m : mm) txt << "  " << gn[m.ground_group] << " - " << en[m.excited_group] << "  " << m.pol << "\n";
  c.text("rules.txt", txt.str());
}

struct GfactorOpt {
  int twoJ = 7;
  std::string family = "g78", order = "upper";
  std::optional<double> a, b, relation;
  std::vector<double> jmix;
};

void cmd_gfactor(Context& c, const GfactorOpt& o) {
  DoubletCoefficients k;
  k.twoJ = o.twoJ;
  if (o.family == "g56")
    k.family = DoubletFamily::G56;
  else if (o.family == "g78")
    k.family = DoubletFamily::G78;
  else
    throw ValidationError("--family must be g56 or g78");
  if (o.order == "upper")
    k.order = DoubletOrder::Upper;
  else if (o.order == "lower")
    k.order = DoubletOrder::Lower;
  else
    throw ValidationError("--order must be upper or lower");
  std::ostringstream txt;
  if (o.a || o.b) {
    k.a = o.a.value_or(0);
    k.b = o.b.value_or(0);
    const auto g = doublet_g_factors(k);
    txt << "g_par = " << fmt(g.parallel) << "\ng_perp = " << fmt(g.perpendicular) << "\n";
  }
  if (o.relation)
    txt << "g_perp_from_relation = " << fmt(g_consistency_relation(k.twoJ, k.family, k.order, *o.relation)) << "\n";
  if (!o.jmix.empty()) {
    if (o.jmix.size() != 2) throw ValidationError("--jmix takes g_par,g_perp");
    JMixingOptions jo;
    jo.seed = c.seed ? c.seed : jo.seed;
    const auto r = fit_j_mixing(o.jmix[0], o.jmix[1], jo);
    txt << "R = " << fmt(r.R) << "\na = " << fmt(r.coeffs.a) << "\nb = " << fmt(r.coeffs.b) << "\nc = "
        << fmt(r.coeffs.c) << "\nd = " << fmt(r.coeffs.d) << "\ng_par = " << fmt(r.g.parallel)
        << "\ng_perp = " << fmt(r.g.perpendicular) << "\n";
  }
  if (txt.str().empty()) throw ValidationError("give --a/--b, --relation or --jmix");
  c.text("gfactor.txt", txt.str());
}

struct DynamicsOpt {
  double tmin = 0.05, tmax = 5;
  std::size_t steps = 100;
};

void cmd_dynamics(Context& c, const DynamicsOpt& o) {
  if (o.steps < 2 || !(o.tmin > 0) || !(o.tmax > o.tmin)) throw ValidationError("temperature grid needs 0 < tmin < tmax and steps >= 2");
  const auto& p = c.params;
  std::ostringstream txt;
  txt << "dopant density = " << p.density_cm3() << " cm^-3\n";
  txt << "average distance = "
      << fmt(average_dopant_distance(p.unit_cell_volume_nm3, p.sites_per_cell, p.concentration_ppm * 1e-6), 4)
      << " nm\n";
  txt << "beta_ff clock = " << flipflop_beta_density(FlipFlopChannel::Clock, p.g_ground) << " Hz^2 m^6\n";
  txt << "beta_ff doublet = " << flipflop_beta_density(FlipFlopChannel::Doublet, p.g_ground) << " Hz^2 m^6\n";
  txt << "SLR crossover n23g = " << fmt(slr_crossover_temperature(SlrParams::doublet()), 4) << " K\n";
  txt << "SLR crossover n4g = " << fmt(slr_crossover_temperature(SlrParams::upper()), 4) << " K\n";
  std::vector<double> grid;
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(o.steps), 7);
  for (std::size_t k = 0; k < o.steps; ++k) {
    const double T = o.tmin + (o.tmax - o.tmin) * static_cast<double>(k) / static_cast<double>(o.steps - 1);
    grid.push_back(T);
    rows(k, 0) = T;
    rows(k, 1) = slr_rate(T, SlrParams::doublet());
    rows(k, 2) = slr_rate(T, SlrParams::upper());
    rows(k, 3) = flipflop_rate(default_flipflop(p, FlipFlopChannel::Clock, T));
    rows(k, 4) = flipflop_rate(default_flipflop(p, FlipFlopChannel::Doublet, T));
  }
  const auto spin = t2_vs_temperature(p, grid, CoherenceMode::Spin);
  const auto opt = t2_vs_temperature(p, grid, CoherenceMode::Optical);
  for (std::size_t k = 0; k < o.steps; ++k) rows(k, 5) = spin[k].T2, rows(k, 6) = opt[k].T2;
  io::write_csv(c.file("dynamics.csv"),
                {"T_K", "R_slr_23g", "R_slr_4g", "R_ff_clock", "R_ff_doublet", "T2_spin_s", "T2_optical_s"}, rows);
  c.text("dynamics.txt", txt.str());
}

struct BudgetOpt {
  std::string mode = "spin";
  std::optional<double> t2;
  std::vector<std::string> ff, slr;
  bool unpolarized = false;
  double fraction = 0.01;
};

RateMap parse_rates(const std::vector<std::string>& v) {
  RateMap m;
  for (const auto& s : v) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ValidationError("rates are given as name=value, got '" + s + "'");
    try {
      m[s.substr(0, eq)] = std::stod(s.substr(eq + 1));
    } catch (const std::exception&) {
      throw ValidationError("bad rate value in '" + s + "'");
    }
  }
  return m;
}

void cmd_budget(Context& c, const BudgetOpt& o) {
  std::ostringstream txt;
  if (o.mode != "spin" && o.mode != "optical") throw ValidationError("--mode must be spin or optical");
  if (o.t2) {
    if (o.mode == "spin")
      txt << "R_ff(1g,4g) = " << fmt(infer_spin_flipflop(*o.t2), 4) << " s^-1\n";
    else
      txt << "sum of flip-flop and SLR rates = " << fmt(infer_optical_rate_sum(*o.t2, c.params.T1_optical), 4)
          << " s^-1\n";
  } else {
    const auto b = o.mode == "spin"
                       ? coherence_budget_spin(parse_rates(o.ff), parse_rates(o.slr), !o.unpolarized, o.fraction)
                       : coherence_budget_optical(c.params.T1_optical, parse_rates(o.ff), parse_rates(o.slr));
    for (const auto& [k, r] : b.channels) txt << k << " = " << r << " s^-1\n";
    txt << "pi*Gamma_h = " << b.pi_gamma_h << " s^-1\nGamma_h = " << b.gamma_h_Hz << " Hz\nT2 = "
        << (b.unbounded ? std::string("unbounded") : fmt(b.T2, 9)) << (b.unbounded ? "\n" : " s\n");
  }
  c.text("budget.txt", txt.str());
}

struct PumpOpt {
  double duration = 0.3, temperature = 0.05, rate = 1e3;
  std::size_t points = 301;
};

void cmd_pump(Context& c, const PumpOpt& o) {
  PumpConfig pc;
  pc.duration = o.duration;
  pc.temperature = o.temperature;
  pc.output_points = o.points;
  for (auto& t : pc.pumps) t.rate = o.rate;
  const auto tr = pump_simulation(pc, c.params);
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(tr.t.size()), 9);
  for (std::size_t k = 0; k < tr.t.size(); ++k) {
    rows(k, 0) = tr.t[k];
    rows.row(k).tail(8) = tr.n[k].transpose();
  }
  io::write_csv(c.file("pump.csv"), {"t_s", "n1g", "n2g", "n3g", "n4g", "n1e", "n2e", "n3e", "n4e"}, rows);
  const auto& f = tr.n.back();
  c.text("pump.txt", "n1g(" + fmt(o.duration, 3) + " s) = " + fmt(f(0), 6) + "\nn23g = " + fmt(f(1) + f(2), 6) +
                         "\nn4g = " + fmt(f(3), 6) + "\n");
}

struct FitOpt {
  std::string model = "gaussian";
  std::vector<std::string> inputs, axes;
  std::vector<double> scale0;
};

std::string fit_report(const FitResult& f) {
  std::ostringstream s;
  s << std::setprecision(10);
  for (Eigen::Index k = 0; k < f.values.size(); ++k)
    s << f.names[static_cast<std::size_t>(k)] << " = " << f.values(k) << " +- " << f.errors(k) << "\n";
  s << "converged = " << (f.converged ? "true" : "false") << "\niterations = " << f.iterations
    << "\nresidual_norm = " << f.residual_norm << "\nmessage = " << f.message << "\n";
  return s.str();
}

void cmd_fit(Context& c, const FitOpt& o) {
  if (o.inputs.empty()) throw ValidationError("fit needs --input");
  std::ostringstream txt;
  if (o.model == "gaussian" || o.model == "echo") {
    const auto schema = o.model == "gaussian" ? io::CsvSchema::Spectrum : io::CsvSchema::Decay;
    const auto d = io::read_measurement_csv(o.inputs.at(0), schema);
    c.input(o.inputs[0]);
    for (const auto& w : d.warnings) txt << "warning: " << w << "\n";
    const VecX x = d.data.col(0), y = d.data.col(1);
    VecX model(x.size());
    if (o.model == "gaussian") {
      const auto g = fit_gaussian_line(x, y);
      txt << fit_report(g.fit) << "low_confidence = " << (g.low_confidence ? "true" : "false") << "\n";
      for (Eigen::Index k = 0; k < x.size(); ++k) model(k) = gaussian_model(x(k), g.center, g.fwhm, g.amplitude, g.offset);
    } else {
      const auto e = fit_echo_decay(x, y);
      txt << fit_report(e.fit);
      if (std::isfinite(e.T2)) model = (e.E0 * (-2.0 * x.array() / e.T2).exp()).matrix();
      else model.setConstant(std::numeric_limits<double>::quiet_NaN());
    }
    Eigen::MatrixXd rows(x.size(), 3);
    rows << x, y, model;
    io::write_csv(c.file("fit_curve.csv"), {d.columns[0], d.columns[1], "model"}, rows);
  } else if (o.model == "recovery") {
    const auto d = io::read_measurement_csv(o.inputs.at(0), io::CsvSchema::Recovery);
    c.input(o.inputs[0]);
    for (const auto& w : d.warnings) txt << "warning: " << w << "\n";
    const auto r = fit_slr_recovery(d.data.col(0), d.data.rightCols(3), zero_field_energies(c.params.A_ground));
    txt << fit_report(r.fit);
    for (int g = 0; g < 3; ++g) txt << "unidentifiable_" << g << " = " << (r.unidentifiable[g] ? "true" : "false") << "\n";
  } else if (o.model == "sweep") {
    std::vector<SweepData> maps;
    FieldSweepFitSpec spec;
    for (std::size_t k = 0; k < o.inputs.size(); ++k) {
      const auto d = io::read_measurement_csv(o.inputs[k], io::CsvSchema::Sweep);
      c.input(o.inputs[k]);
      for (const auto& w : d.warnings) txt << "warning: " << w << "\n";
      SweepData s;
      s.axis = parse_axis(k < o.axes.size() ? o.axes[k] : "par");
      std::vector<double> fields;
      for (Eigen::Index r = 0; r < d.data.rows(); ++r)
        if (fields.empty() || fields.back() != d.data(r, 0)) fields.push_back(d.data(r, 0));
      const auto nf = static_cast<Eigen::Index>(fields.size());
      if (d.data.rows() % nf != 0) throw ValidationError(o.inputs[k] + ": every field needs the same detuning grid");
      const Eigen::Index nd = d.data.rows() / nf;
      s.current_A = Eigen::Map<const VecX>(fields.data(), nf);
      s.detuning_GHz = d.data.col(1).head(nd);
      s.absorption.resize(nf, nd);
      for (Eigen::Index r = 0; r < nf; ++r) {
        if ((d.data.col(1).segment(r * nd, nd) - s.detuning_GHz).cwiseAbs().maxCoeff() > 1e-12)
          throw ValidationError(o.inputs[k] + ": every field needs the same detuning grid");
        s.absorption.row(r) = d.data.col(2).segment(r * nd, nd).transpose();
      }
      // A field column in mT is a current with a 10 G/A coil.
      const double s0 = d.columns[0] == "field_mT" ? 10.0 : 150.0;
      spec.scale0.push_back(k < o.scale0.size() ? o.scale0[k] : s0);
      maps.push_back(std::move(s));
    }
    const auto f = fit_field_sweep(maps, spec, c.params);
    txt << fit_report(f.fit) << "g_par_free = " << (f.g_par_free ? "true" : "false")
        << "\ng_perp_free = " << (f.g_perp_free ? "true" : "false") << "\n";
  } else {
    throw ValidationError("--model must be gaussian, echo, recovery or sweep");
  }
  c.text("fit.txt", txt.str());
}

const char* module_of(const std::string& cmd) {
  static const std::map<std::string, const char*> m = {
      {"levels", "spinham"},   {"spectrum", "spectra"},  {"sweep", "spectra"},    {"epr", "spectra"},
      {"rosette", "spectra"},  {"rules", "grouptheory"}, {"gfactor", "grouptheory"}, {"dynamics", "dynamics"},
      {"budget", "dynamics"},  {"pump", "dynamics"},     {"fit", "fitting"}};
  const auto it = m.find(cmd);
  return it == m.end() ? "cli" : it->second;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const auto t0 = std::chrono::steady_clock::now();
  CLI::App app{"Spin Hamiltonian, spectroscopy and dynamics toolkit for 171Yb:CaWO4", "ybspin"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, preset = "yb171-cawo4", out_dir = "ybspin-out";
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  app.add_option("--config", config_path, "config file with section.key = value lines");
  app.add_option("--set", sets, "override, section.key=value (repeatable)");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed, "random seed");
  app.add_option("--preset", preset, "yb171-cawo4 or field-sweep-fit");

  LevelsOpt lo;
  auto* levels = app.add_subcommand("levels", "energy levels and clock transitions");
  levels->add_option("--field-mT", lo.field, "field vector x,y,z in mT");

  SpectrumOpt so;
  auto* spectrum = app.add_subcommand("spectrum", "optical hyperfine absorption spectrum");
  spectrum->add_option("--pol", so.pol, "pi, sigma or alpha");
  spectrum->add_option("--field-mT", so.field, "field vector x,y,z in mT");
  spectrum->add_option("--weighting", so.weighting, "table or uniform");
  spectrum->add_option("--min", so.min, "GHz");
  spectrum->add_option("--max", so.max, "GHz");
  spectrum->add_option("--points", so.points);

  SweepOpt swo;
  auto* sweep = app.add_subcommand("sweep", "absorption map against field");
  sweep->add_option("--axis", swo.axis, "par, perp or x,y,z");
  sweep->add_option("--pol", swo.pol);
  sweep->add_option("--weighting", swo.weighting);
  sweep->add_option("--bmin", swo.bmin, "mT");
  sweep->add_option("--bmax", swo.bmax, "mT");
  sweep->add_option("--steps", swo.steps);
  sweep->add_option("--min", swo.min, "GHz");
  sweep->add_option("--max", swo.max, "GHz");
  sweep->add_option("--points", swo.points);

  EprOpt eo;
  auto* epr = app.add_subcommand("epr", "EPR resonance fields");
  epr->add_option("--freq", eo.freq, "GHz");
  epr->add_option("--theta", eo.theta, "deg from c");
  epr->add_option("--phi", eo.phi, "deg from a");
  epr->add_option("--bmin", eo.bmin, "mT");
  epr->add_option("--bmax", eo.bmax, "mT");
  epr->add_flag("--zero-spin", eo.zero_spin, "I = 0 two-level model");

  RosetteOpt ro;
  auto* rosette = app.add_subcommand("rosette", "angular EPR rosette");
  rosette->add_option("--plane", ro.plane, "ca or ab");
  rosette->add_option("--steps", ro.steps);
  rosette->add_option("--freq", ro.freq, "GHz");
  rosette->add_option("--bmin", ro.bmin, "mT");
  rosette->add_option("--bmax", ro.bmax, "mT");
  rosette->add_option("--span", ro.span, "deg");
  rosette->add_flag("--zero-spin", ro.zero_spin);

  RulesOpt rlo;
  auto* rules = app.add_subcommand("rules", "hyperfine selection-rule tables");
  rules->add_option("--group", rlo.group, "s4 or d2d");
  rules->add_option("--variant", rlo.variant, "left or right");

  GfactorOpt go;
  auto* gfactor = app.add_subcommand("gfactor", "crystal-field g factors");
  gfactor->add_option("--twoJ", go.twoJ, "7 or 5");
  gfactor->add_option("--family", go.family, "g56 or g78");
  gfactor->add_option("--order", go.order, "upper or lower");
  gfactor->add_option("--a", go.a);
  gfactor->add_option("--b", go.b);
  gfactor->add_option("--relation", go.relation, "g_par for the consistency relation");
  gfactor->add_option("--jmix", go.jmix, "g_par g_perp targets")->expected(2)->delimiter(',');

  DynamicsOpt dyo;
  auto* dynamics = app.add_subcommand("dynamics", "flip-flop, SLR and T2 against temperature");
  dynamics->add_option("--tmin", dyo.tmin, "K");
  dynamics->add_option("--tmax", dyo.tmax, "K");
  dynamics->add_option("--steps", dyo.steps);

  BudgetOpt bo;
  auto* budget = app.add_subcommand("budget", "coherence rate budget");
  budget->add_option("--mode", bo.mode, "spin or optical");
  budget->add_option("--t2", bo.t2, "infer rates from a measured T2 (s)");
  budget->add_option("--ff", bo.ff, "flip-flop rate name=value");
  budget->add_option("--slr", bo.slr, "SLR rate name=value");
  budget->add_flag("--unpolarized", bo.unpolarized);
  budget->add_option("--fraction", bo.fraction, "excitation fraction");

  PumpOpt po;
  auto* pump = app.add_subcommand("pump", "optical pumping rate equations");
  pump->add_option("--duration", po.duration, "s");
  pump->add_option("--temperature", po.temperature, "K");
  pump->add_option("--rate", po.rate, "pump rate per pair, s^-1");
  pump->add_option("--points", po.points);

  FitOpt fo;
  auto* fit = app.add_subcommand("fit", "fit measurement CSVs");
  fit->add_option("--model", fo.model, "gaussian, echo, recovery or sweep");
  fit->add_option("--input", fo.inputs, "CSV file (repeatable for sweep)");
  fit->add_option("--axis", fo.axes, "field axis per sweep input");
  fit->add_option("--scale0", fo.scale0, "starting G/A per sweep input");

  std::vector<std::string> argv_tail(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::vector<std::string> rev(argv_tail.rbegin(), argv_tail.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error [cli]: " << e.what() << "\n";
    return 1;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  Context c;
  c.out = &out;
  c.seed = seed;
  c.out_dir = out_dir;
  int code = 0;
  const char* where = "cli";
  try {
    SpinSystemParams p = SpinSystemParams::preset(preset);
    if (!config_path.empty()) {
      p = io::parse_config_file(config_path, p);
      c.inputs.emplace_back(config_path, io::sha256_file(config_path));
    }
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ValidationError("--set expects section.key=value, got '" + s + "'");
      io::apply_setting(p, s.substr(0, eq), s.substr(eq + 1));
    }
    p.validate();
    c.params = p;
    std::error_code ec;
    fs::create_directories(c.out_dir, ec);
    if (ec) throw ValidationError("cannot create output directory '" + out_dir + "': " + ec.message());
    where = module_of(cmd);
    if (cmd == "levels") cmd_levels(c, lo);
    else if (cmd == "spectrum") cmd_spectrum(c, so);
    else if (cmd == "sweep") cmd_sweep(c, swo);
    else if (cmd == "epr") cmd_epr(c, eo);
    else if (cmd == "rosette") cmd_rosette(c, ro);
    else if (cmd == "rules") cmd_rules(c, rlo);
    else if (cmd == "gfactor") cmd_gfactor(c, go);
    else if (cmd == "dynamics") cmd_dynamics(c, dyo);
    else if (cmd == "budget") cmd_budget(c, bo);
    else if (cmd == "pump") cmd_pump(c, po);
    else if (cmd == "fit") cmd_fit(c, fo);
  } catch (const ValidationError& e) {
    err << "error [" << where << "]: " << e.what() << "\n";
    code = 1;
  } catch (const DomainError& e) {
    err << "error [" << where << "]: " << e.what() << "\n";
    code = 1;
  } catch (const NumericalError& e) {
    err << "numerical failure [" << where << "]: " << e.what() << "\n";
    code = 2;
  }

  if (fs::is_directory(c.out_dir)) {
    io::RunManifest m;
    m.tool_version = kVersion;
    m.command = cmd;
    m.argv = argv_tail;
    m.config = io::config_entries(c.params);
    m.config.insert(m.config.begin(), {"preset", preset});
    m.seed = seed;
    m.inputs = c.inputs;
    m.outputs = c.outputs;
    m.duration_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    m.exit_code = code;
    try {
      io::write_manifest(c.out_dir, m);
    } catch (const ValidationError& e) {
      err << "error [cli]: " << e.what() << "\n";
      if (code == 0) code = 1;
    }
  }
  return code;
}

}  // namespace ybspin::cli
