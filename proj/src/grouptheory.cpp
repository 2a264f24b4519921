#include "ybspin/grouptheory.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>

namespace ybspin {

const char* to_string(PointGroup g) { return g == PointGroup::S4 ? "S4" : "D2d"; }

PointGroup parse_point_group(const std::string& s) {
  if (s == "S4" || s == "s4") return PointGroup::S4;
  if (s == "D2d" || s == "d2d" || s == "D2D") return PointGroup::D2d;
  throw ValidationError("unknown point group '" + s + "' (S4, D2d)");
}

int irrep_count(PointGroup g) { return g == PointGroup::S4 ? 8 : 7; }

namespace {

void check_irrep(PointGroup g, int x) {
  if (x < 1 || x > irrep_count(g))
    throw ValidationError(std::string("irrep index out of range for ") + to_string(g) + ": " + std::to_string(x));
}

// S4 double group is cyclic of order 8 (the fourth power of the improper
// rotation is the 2pi rotation). Gamma_i has character w^(k*m) on the m-th
// power, w = exp(i pi/4).
constexpr int kS4Exponent[8] = {0, 4, 6, 2, 3, 5, 7, 1};

CharacterTable make_s4() {
  CharacterTable t;
  t.chi.resize(8, 8);
  t.class_size = Eigen::VectorXd::Ones(8);
  for (int r = 0; r < 8; ++r)
    for (int m = 0; m < 8; ++m) t.chi(r, m) = std::polar(1.0, PhysicalConstants::pi / 4 * kS4Exponent[r] * m);
  return t;
}

CharacterTable make_d2d() {
  // classes: E, 2S4, C2, 2C2', 2sd, R, 2RS4, RC2, 2RC2', 2Rsd
  const double s2 = std::sqrt(2.0);
  const double rows[7][10] = {{1, 1, 1, 1, 1, 1, 1, 1, 1, 1},      {1, 1, 1, -1, -1, 1, 1, 1, -1, -1},
                              {1, -1, 1, 1, -1, 1, -1, 1, 1, -1},  {1, -1, 1, -1, 1, 1, -1, 1, -1, 1},
                              {2, 0, -2, 0, 0, 2, 0, -2, 0, 0},    {2, s2, 0, 0, 0, -2, -s2, 0, 0, 0},
                              {2, -s2, 0, 0, 0, -2, s2, 0, 0, 0}};
  CharacterTable t;
  t.chi.resize(7, 10);
  for (int r = 0; r < 7; ++r)
    for (int c = 0; c < 10; ++c) t.chi(r, c) = rows[r][c];
  t.class_size.resize(10);
  t.class_size << 1, 2, 1, 2, 2, 1, 2, 1, 2, 2;
  return t;
}

}  // namespace

const CharacterTable& character_table(PointGroup g) {
  static const CharacterTable s4 = make_s4(), d2d = make_d2d();
  return g == PointGroup::S4 ? s4 : d2d;
}

int irrep_dimension(PointGroup g, int x) {
  check_irrep(g, x);
  return static_cast<int>(std::lround(character_table(g).chi(x - 1, 0).real()));
}

std::string irrep_name(PointGroup g, int x) {
  check_irrep(g, x);
  return "G" + std::to_string(x);
}

std::string irrep_name(PointGroup g, const Irreps& set) {
  std::string s = "G";
  for (std::size_t k = 0; k < set.size(); ++k) {
    check_irrep(g, set[k]);
    s += (k ? "," : "") + std::to_string(set[k]);
  }
  return s;
}

int parse_irrep(PointGroup g, const std::string& s) {
  std::string t = s;
  for (const char* prefix : {"Gamma", "G", "\xCE\x93"})  // also the Greek capital letter
    if (t.rfind(prefix, 0) == 0) {
      t = t.substr(std::string(prefix).size());
      break;
    }
  if (!t.empty() && t[0] == '_') t = t.substr(1);
  int x = 0;
  try {
    std::size_t used = 0;
    x = std::stoi(t, &used);
    if (used != t.size()) throw std::invalid_argument(t);
  } catch (const std::exception&) {
    throw ValidationError("unknown irrep label '" + s + "'");
  }
  check_irrep(g, x);
  return x;
}

Irreps irrep_product(PointGroup g, int x, int y) {
  check_irrep(g, x);
  check_irrep(g, y);
  const auto& t = character_table(g);
  Irreps out;
  for (int k = 0; k < irrep_count(g); ++k) {
    cplx s = 0;
    for (Eigen::Index c = 0; c < t.chi.cols(); ++c)
      s += t.class_size(c) * t.chi(x - 1, c) * t.chi(y - 1, c) * std::conj(t.chi(k, c));
    const long n = std::lround(s.real() / t.order());
    for (long r = 0; r < n; ++r) out.push_back(k + 1);
  }
  return out;
}

Irreps irrep_product(PointGroup g, const Irreps& x, const Irreps& y) {
  Irreps out;
  for (int a : x)
    for (int b : y) {
      const auto p = irrep_product(g, a, b);
      out.insert(out.end(), p.begin(), p.end());
    }
  std::sort(out.begin(), out.end());
  return out;
}

int irrep_conjugate(PointGroup g, int x) {
  check_irrep(g, x);
  const auto& t = character_table(g);
  for (int k = 0; k < irrep_count(g); ++k)
    if ((t.chi.row(k) - t.chi.row(x - 1).conjugate()).norm() < 1e-9) return k + 1;
  throw NumericalError("character table has no conjugate partner");
}

Irreps family_irreps(PointGroup g, DoubletFamily f) {
  if (g == PointGroup::S4) return f == DoubletFamily::G56 ? Irreps{5, 6} : Irreps{7, 8};
  return f == DoubletFamily::G56 ? Irreps{6} : Irreps{7};
}

Irreps nuclear_spin_irreps(PointGroup g) { return g == PointGroup::S4 ? Irreps{7, 8} : Irreps{7}; }

HyperfineIrreps hyperfine_level_irreps(PointGroup g, DoubletFamily f) {
  HyperfineIrreps h;
  h.all = irrep_product(g, family_irreps(g, f), nuclear_spin_irreps(g));
  if (g == PointGroup::S4) {
    h.doublet = {3, 4};
    for (int x : h.all)
      if (x != 3 && x != 4) h.singlets.push_back(x);
  } else {
    h.doublet = {5};
    for (int x : h.all)
      if (x != 5) h.singlets.push_back(x);
  }
  return h;
}

std::string PolSet::str() const {
  std::string s;
  auto add = [&](bool on, const char* n) {
    if (on) s += (s.empty() ? "" : ",") + std::string(n);
  };
  add(alpha, "alpha");
  add(sigma, "sigma");
  add(pi, "pi");
  return s.empty() ? "-" : s;
}

PolSet PolSet::parse(const std::string& s) {
  PolSet p;
  if (s == "-" || s.empty()) return p;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok == "alpha") p.alpha = true;
    else if (tok == "sigma") p.sigma = true;
    else if (tok == "pi") p.pi = true;
    else throw ValidationError("unknown polarization '" + tok + "'");
  }
  return p;
}

namespace {

struct OperatorIrreps {
  Irreps z, xy, rz, rxy;
};

OperatorIrreps operator_irreps(PointGroup g) {
  if (g == PointGroup::S4) return {{2}, {3, 4}, {1}, {3, 4}};
  return {{4}, {5}, {2}, {5}};
}

bool intersects(const Irreps& a, const Irreps& b) {
  for (int x : a)
    if (std::find(b.begin(), b.end(), x) != b.end()) return true;
  return false;
}

}  // namespace

DipoleRule dipole_selection_rules(PointGroup g, const Irreps& irrep_g, const Irreps& irrep_e) {
  Irreps conj_g;
  for (int x : irrep_g) conj_g.push_back(irrep_conjugate(g, x));
  const Irreps prod = irrep_product(g, conj_g, irrep_e);
  const auto op = operator_irreps(g);
  DipoleRule r;
  // Electric dipole: pi couples through z, sigma and alpha through (x, y).
  r.ed.pi = intersects(prod, op.z);
  r.ed.sigma = r.ed.alpha = intersects(prod, op.xy);
  // Magnetic dipole: sigma has B along c (Rz); pi and alpha have B in the plane.
  r.md.sigma = intersects(prod, op.rz);
  r.md.pi = r.md.alpha = intersects(prod, op.rxy);
  return r;
}

DipoleRule dipole_selection_rules(PointGroup g, int irrep_g, int irrep_e) {
  return dipole_selection_rules(g, Irreps{irrep_g}, Irreps{irrep_e});
}

namespace {

void check_assignment(PointGroup g, const LevelAssignment& a, int doublet_slot, const char* which) {
  Irreps all;
  for (const auto& s : a) {
    if (s.empty()) throw ValidationError(std::string(which) + " assignment has an empty level");
    all.insert(all.end(), s.begin(), s.end());
  }
  std::sort(all.begin(), all.end());
  for (auto f : {DoubletFamily::G56, DoubletFamily::G78}) {
    const auto h = hyperfine_level_irreps(g, f);
    if (all == h.all && a[doublet_slot] == h.doublet) return;
  }
  throw ValidationError(std::string(which) + " assignment " + irrep_name(g, a[0]) + "/" + irrep_name(g, a[1]) +
                        "/" + irrep_name(g, a[2]) + " is not a hyperfine decomposition of any doublet family");
}

}  // namespace

SelectionRuleTable hyperfine_selection_table(PointGroup g, const LevelAssignment& ground,
                                             const LevelAssignment& excited) {
  check_assignment(g, ground, 1, "ground");
  check_assignment(g, excited, 0, "excited");
  SelectionRuleTable t;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) t.cell[r][c] = dipole_selection_rules(g, ground[r], excited[c]);
  return t;
}

std::pair<LevelAssignment, LevelAssignment> standard_assignment(PointGroup g, AssignmentVariant v) {
  if (g == PointGroup::S4) {
    const LevelAssignment ground{Irreps{2}, Irreps{3, 4}, Irreps{2}};
    if (v == AssignmentVariant::Right) return {ground, {Irreps{3, 4}, Irreps{2}, Irreps{2}}};
    return {ground, {Irreps{3, 4}, Irreps{1}, Irreps{1}}};
  }
  const LevelAssignment ground{Irreps{3}, Irreps{5}, Irreps{4}};
  if (v == AssignmentVariant::Right) return {ground, {Irreps{5}, Irreps{4}, Irreps{3}}};
  return {ground, {Irreps{5}, Irreps{2}, Irreps{1}}};
}

std::array<std::array<PolSet, 3>, 3> observed_hyperfine_rules() {
  const PolSet all{true, true, true}, s{false, true, false}, none{};
  return {{{all, s, none}, {s, all, all}, {all, none, s}}};
}

std::vector<RuleMismatch> ed_predicted_unobserved(const SelectionRuleTable& t,
                                                  const std::array<std::array<PolSet, 3>, 3>& observed) {
  std::vector<RuleMismatch> out;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      const auto& ed = t.cell[r][c].ed;
      const auto& ob = observed[r][c];
      if (ed.alpha && !ob.alpha) out.push_back({r, c, 'a'});
      if (ed.sigma && !ob.sigma) out.push_back({r, c, 's'});
      if (ed.pi && !ob.pi) out.push_back({r, c, 'p'});
    }
  return out;
}

// ---- g factors ----

double lande_g(int twoJ) {
  // L = 3, S = 1/2
  const double J = twoJ / 2.0, S = 0.5, L = 3.0;
  if (twoJ != 5 && twoJ != 7) throw ValidationError("only J = 5/2 and J = 7/2 are supported");
  return 1.0 + (J * (J + 1) + S * (S + 1) - L * (L + 1)) / (2 * J * (J + 1));
}

GFactors doublet_g_factors(const DoubletCoefficients& k) {
  const double g = lande_g(k.twoJ);
  const double s = k.order == DoubletOrder::Upper ? 1.0 : -1.0;
  const double a = k.a, b = k.b;
  if (k.twoJ == 7) {
    if (k.family == DoubletFamily::G56) return {s * g * (5 * a * a - 3 * b * b), 2 * std::sqrt(3.0) * g * 2 * a * b};
    return {s * g * (7 * a * a - b * b), -4 * g * b * b};
  }
  if (k.family == DoubletFamily::G56) return {s * g * (5 * a * a - 3 * b * b), -std::sqrt(5.0) * g * 2 * a * b};
  return {s * g, 3 * g};
}

double g_consistency_relation(int twoJ, DoubletFamily f, DoubletOrder o, double gp) {
  const double g = lande_g(twoJ);
  const double s = o == DoubletOrder::Upper ? 1.0 : -1.0;
  auto root = [&](double num, double den) {
    if (num < 0) {
      std::ostringstream m;
      m << "g consistency relation has negative discriminant for g_par = " << gp;
      throw DomainError(m.str());
    }
    return std::sqrt(num / den);
  };
  if (twoJ == 7) {
    if (f == DoubletFamily::G56) return root(-3 * gp * gp + s * 6 * g * gp + 45 * g * g, 4);
    return std::abs((s * gp - 7 * g) / 2);
  }
  if (twoJ == 5) {
    if (f == DoubletFamily::G56) return root(-5 * gp * gp + s * 10 * g * gp + 75 * g * g, 16);
    return std::abs(3 * gp);
  }
  throw ValidationError("only J = 5/2 and J = 7/2 are supported");
}

GFactors mixed_g_factors(double a, double b, double c, double d) {
  const double g5 = lande_g(5), g7 = lande_g(7);
  const double gpar = g5 * (5 * a * a - 3 * b * b) - 2 * std::sqrt(6.0) / 7 * 2 * a * c -
                      2 * std::sqrt(10.0) / 7 * 2 * b * d + g7 * (5 * c * c - 3 * d * d);
  const double gperp = std::abs(-2 * std::sqrt(5.0) * g5 * a * b - 2 * std::sqrt(30.0) / 7 * b * c -
                                2 * std::sqrt(2.0) / 7 * a * d + 4 * std::sqrt(3.0) * g7 * c * d);
  return {gpar, gperp};
}

namespace {

using Vec = Eigen::VectorXd;

// Nelder-Mead with standard coefficients.
Vec nelder_mead(const std::function<double(const Vec&)>& f, Vec x0, double step, int max_iter, double ftol) {
  const Eigen::Index n = x0.size();
  std::vector<Vec> s(n + 1, x0);
  std::vector<double> fv(n + 1);
  for (Eigen::Index k = 0; k < n; ++k) s[k + 1](k) += step;
  for (Eigen::Index k = 0; k <= n; ++k) fv[k] = f(s[k]);
  std::vector<Eigen::Index> idx(n + 1);
  for (int it = 0; it < max_iter; ++it) {
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return fv[a] < fv[b]; });
    const auto best = idx.front(), worst = idx.back(), second = idx[n - 1];
    double spread = 0;
    for (auto k : idx) spread = std::max(spread, (s[k] - s[best]).cwiseAbs().maxCoeff());
    if (std::abs(fv[worst] - fv[best]) <= ftol && spread < 1e-12) break;
    Vec c = Vec::Zero(n);
    for (auto k : idx)
      if (k != worst) c += s[k];
    c /= static_cast<double>(n);
    const Vec xr = c + (c - s[worst]);
    const double fr = f(xr);
    if (fr < fv[best]) {
      const Vec xe = c + 2.0 * (c - s[worst]);
      const double fe = f(xe);
      if (fe < fr) s[worst] = xe, fv[worst] = fe;
      else s[worst] = xr, fv[worst] = fr;
    } else if (fr < fv[second]) {
      s[worst] = xr, fv[worst] = fr;
    } else {
      const bool outside = fr < fv[worst];
      const Vec xc = outside ? Vec(c + 0.5 * (xr - c)) : Vec(c + 0.5 * (s[worst] - c));
      const double fc = f(xc);
      if (fc < std::min(fr, fv[worst])) {
        s[worst] = xc, fv[worst] = fc;
      } else {
        for (auto k : idx)
          if (k != best) s[k] = s[best] + 0.5 * (s[k] - s[best]), fv[k] = f(s[k]);
      }
    }
  }
  return s[std::min_element(fv.begin(), fv.end()) - fv.begin()];
}

// Unit 4-vector from (chi, alpha, beta); R = tan^2 chi.
Eigen::Vector4d unit4(const Vec& t) {
  return {std::cos(t(0)) * std::cos(t(1)), std::cos(t(0)) * std::sin(t(1)), std::sin(t(0)) * std::cos(t(2)),
          std::sin(t(0)) * std::sin(t(2))};
}

}  // namespace

JMixingResult fit_j_mixing(double tp, double tq, const JMixingOptions& opt) {
  if (!std::isfinite(tp) || !std::isfinite(tq)) throw ValidationError("g-factor targets must be finite");
  if (opt.restarts < 1) throw ValidationError("fit_j_mixing needs at least one restart");
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> U(-PhysicalConstants::pi, PhysicalConstants::pi);

  auto resid2 = [&](const Vec& t) {
    const auto v = unit4(t);
    const auto g = mixed_g_factors(v(0), v(1), v(2), v(3));
    return (g.parallel - tp) * (g.parallel - tp) + (g.perpendicular - tq) * (g.perpendicular - tq);
  };

  // The two targets leave a one-parameter family of exact solutions. The
  // admixture is pinned by taking the smallest one: a penalty on sin^2 chi
  // is lowered in stages so each stage starts from the previous optimum.
  const double weights[] = {1e-1, 1e-2, 1e-3, 1e-4, 1e-6, 1e-8, 1e-10};
  JMixingResult best;
  bool have = false;
  double best_score = 0;
  for (int r = 0; r < opt.restarts; ++r) {
    Vec t(3);
    t << U(rng), U(rng), U(rng);
    for (double mu : weights) {
      auto obj = [&](const Vec& x) { return resid2(x) + mu * std::pow(std::sin(x(0)), 2); };
      t = nelder_mead(obj, t, 0.1, opt.max_iterations, 1e-20);
    }
    Eigen::Vector4d v = unit4(t);
    if (v(0) < 0) v = -v;
    JMixingResult cur;
    cur.coeffs = DoubletCoefficients{v(0), v(1), v(2), v(3), 5, DoubletFamily::G56, DoubletOrder::Upper};
    cur.R = cur.coeffs.mixing_ratio();
    cur.g = mixed_g_factors(v(0), v(1), v(2), v(3));
    cur.residual = std::sqrt(resid2(t));
    best.restart_R.push_back(cur.R);
    // feasible beats infeasible, then smaller admixture
    const double score = (cur.residual < opt.tolerance ? 0.0 : 1e6 + cur.residual) + cur.R;
    if (!have || score < best_score) {
      auto keep = std::move(best.restart_R);
      best = cur;
      best.restart_R = std::move(keep);
      best_score = score;
      have = true;
    }
  }
  if (best.residual >= opt.tolerance) {
    std::ostringstream m;
    m << "fit_j_mixing did not reach the targets; best residual " << best.residual;
    throw NumericalError(m.str());
  }
  return best;
}

}  // namespace ybspin
