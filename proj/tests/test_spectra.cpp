#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "ybspin/spectra.hpp"

using namespace ybspin;
using PC = PhysicalConstants;

namespace {
std::vector<double> distinct(std::vector<double> v, double tol) {
  std::sort(v.begin(), v.end());
  std::vector<double> out;
  for (double x : v)
    if (out.empty() || x - out.back() > tol) out.push_back(x);
  return out;
}

CatalogOptions uniform171() {
  CatalogOptions co;
  co.weighting = LineWeighting::Uniform;
  co.include_zero_spin = false;
  return co;
}
}  // namespace

TEST_CASE("zero-field catalog positions") {
  const auto p = SpinSystemParams::defaults();
  CatalogOptions co;
  co.weighting = LineWeighting::Uniform;
  const auto lines = transition_catalog(p, Vec3::Zero(), co);
  CHECK(lines.size() == 20);
  auto find = [&](int g, int e) {
    for (const auto& l : lines)
      if (!l.zero_spin && l.ground_index == g && l.excited_index == e) return l.detuning;
    return std::nan("");
  };
  // level differences from the closed forms
  const double g1 = (0.78905 - 2 * 3.08187) / 4, g4 = (0.78905 + 2 * 3.08187) / 4;
  const double e4 = (2.87 + 2 * 2.72) / 4;
  CHECK(find(4, 4) == doctest::Approx(e4 - g4).epsilon(1e-12));
  CHECK(find(4, 4) == doctest::Approx(0.33930).epsilon(1e-5));
  CHECK(find(1, 4) == doctest::Approx(3.42117).epsilon(1e-5));
  CHECK(find(1, 4) == doctest::Approx(e4 - g1).epsilon(1e-12));
  double lo = 1e9, hi = -1e9;
  int zero_spin = 0;
  for (const auto& l : lines) {
    if (l.zero_spin) {
      ++zero_spin;
      CHECK(l.detuning == 0.0);
      continue;
    }
    lo = std::min(lo, l.detuning);
    hi = std::max(hi, l.detuning);
  }
  CHECK(zero_spin == 4);
  CHECK(hi - lo == doctest::Approx(5.88).epsilon(2e-3));
}

TEST_CASE("zero-field line count and multiplicities") {
  const auto p = SpinSystemParams::defaults();
  const auto lines = transition_catalog(p, Vec3::Zero(), uniform171());
  std::vector<double> det;
  for (const auto& l : lines) det.push_back(l.detuning);
  const auto d = distinct(det, 1e-9);
  CHECK(d.size() == 9);
  // multiplicity of each distinct line is (ground group size) x (excited group size)
  std::multiset<int> mult;
  for (double x : d) mult.insert(static_cast<int>(std::count_if(det.begin(), det.end(), [&](double y) { return std::abs(x - y) < 1e-9; })));
  CHECK(mult == std::multiset<int>{1, 1, 1, 1, 2, 2, 2, 2, 4});
}

TEST_CASE("branching tables") {
  for (auto pol : {Polarization::Pi, Polarization::Sigma, Polarization::Alpha}) CHECK_NOTHROW(BranchingTable::measured(pol).validate());
  BranchingTable bad;
  bad.w[0][0] = 1.5;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  CHECK_THROWS_AS(parse_polarization("circular"), ValidationError);
  CHECK(parse_polarization("sigma") == Polarization::Sigma);
}

TEST_CASE("unit-area Gaussian and synthesized spectra") {
  // peak height 2 sqrt(ln2/pi) / FWHM
  const double peak = 2 * std::sqrt(std::log(2.0) / PC::pi) / 0.185;
  CHECK(gaussian_unit_area(0, 0.185) == doctest::Approx(peak).epsilon(1e-12));
  CHECK(peak == doctest::Approx(5.078).epsilon(1e-3));
  CHECK(gaussian_unit_area(0.0925, 0.185) == doctest::Approx(peak / 2).epsilon(1e-12));

  TransitionLine l;
  l.weight = 1;
  const auto s = synthesize_spectrum({l}, 185, Grid{-2, 2, 4001});
  CHECK(s.absorption.maxCoeff() == doctest::Approx(peak).epsilon(1e-9));

  // two well separated lines give two maxima
  TransitionLine a = l, b = l;
  a.detuning = -1;
  b.detuning = 1;
  const auto two = synthesize_spectrum({a, b}, 185, Grid{-3, 3, 601});
  int maxima = 0;
  for (Eigen::Index k = 1; k + 1 < two.absorption.size(); ++k)
    maxima += two.absorption(k) > two.absorption(k - 1) && two.absorption(k) > two.absorption(k + 1);
  CHECK(maxima == 2);

  CHECK_THROWS_AS(synthesize_spectrum({l}, 0, Grid{-1, 1, 11}), ValidationError);
  CHECK_THROWS_AS(synthesize_spectrum({l}, 185, Grid{-1, 1, 1}), ValidationError);
}

TEST_CASE("spectrum area conservation") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  const auto p = SpinSystemParams::defaults();
  for (int t = 0; t < 10; ++t) {
    CatalogOptions co;
    co.polarization = static_cast<Polarization>(t % 3);
    const auto lines = transition_catalog(p, 150 * Vec3(u(rng), u(rng), u(rng)), co);
    double total = 0, lo = 1e9, hi = -1e9;
    for (const auto& l : lines) total += l.weight, lo = std::min(lo, l.detuning), hi = std::max(hi, l.detuning);
    const auto s = synthesize_spectrum(lines, 185, Grid{lo - 1, hi + 1, 4001});
    CHECK(integrate(s) == doctest::Approx(total).epsilon(1e-3));
  }
}

TEST_CASE("sigma spectrum peak labels") {
  const auto p = SpinSystemParams::defaults();
  const auto peaks = label_peaks(transition_catalog(p, Vec3::Zero()), p.fwhm_optical_MHz * 1e-3 / 2);
  std::string letters;
  for (const auto& pk : peaks) letters += pk.letter;
  CHECK(letters == "ABCDEF");
  const auto& D = peaks[3];
  CHECK(D.weight > 0);
  REQUIRE(D.pairs.size() == 1);
  CHECK(D.pairs[0] == std::pair<int, int>{4, 4});
  // A and E start on |4>_g and |1>_g and end on the excited doublet: 3.08187 GHz apart
  CHECK(peaks[0].pairs[0].first == 4);
  CHECK(peaks[4].pairs[0].first == 1);
  const auto clock = clock_peaks(peaks, find_optical_clock_transitions(p, Vec3::Zero()));
  REQUIRE(clock.size() == 1);
  CHECK(clock[0].letter == 'D');
  // pi polarization has no D line
  CatalogOptions pi;
  pi.polarization = Polarization::Pi;
  for (const auto& pk : label_peaks(transition_catalog(p, Vec3::Zero(), pi), 0.0925))
    for (auto pr : pk.pairs) CHECK_FALSE(pr == std::pair<int, int>{4, 4});
}

TEST_CASE("field sweep maps") {
  const auto p = SpinSystemParams::defaults();
  const Grid grid{-8, 8, 801};
  const auto m = field_sweep_map(p, Vec3::UnitZ(), 0, 100, 11, grid);
  CHECK(m.spectra.size() == 11);
  SweepOptions so;
  const auto zero = synthesize_spectrum(transition_catalog(p, Vec3::Zero(), so.catalog), so.fwhm_171_MHz, grid,
                                        so.fwhm_zero_spin_MHz);
  CHECK((m.spectra[0].absorption - zero.absorption).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(field_sweep_map(p, Vec3::UnitZ(), 0, 100, 1, grid), ValidationError);

  // continuity of tracked lines between adjacent fields
  const auto mp = field_sweep_map(p, Vec3::UnitX(), 0, 300, 61, grid);
  const double dB = 5e-3;  // T
  const double slope = 0.5 * PC::mu_B_over_h * (3.916 + 1.446) + PC::mu_n_over_h * 0.987;
  const double step = 16.0 / 800;
  for (std::size_t f = 1; f < mp.lines.size(); ++f)
    for (std::size_t k = 0; k < mp.lines[f].size(); ++k)
      CHECK(std::abs(mp.lines[f][k].detuning - mp.lines[f - 1][k].detuning) < slope * dB + step);
}

TEST_CASE("Zeeman regime line pairs separate linearly") {
  const auto p = SpinSystemParams::defaults();
  auto span = [&](double B) {
    const auto l = transition_catalog(p, Vec3(B, 0, 0), uniform171());
    double lo = 1e9, hi = -1e9;
    for (const auto& x : l) lo = std::min(lo, x.detuning), hi = std::max(hi, x.detuning);
    return hi - lo;
  };
  const double r = (span(4000) - span(2000)) / (span(2000) - span(1000));
  CHECK(r == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("EPR resonance fields") {
  const auto p = SpinSystemParams::defaults();
  const auto res = epr_resonance_fields(p, 9.4, 90, 0, 1, 2000);
  REQUIRE(!res.empty());
  std::vector<double> strong;
  for (const auto& r : res) {
    // back-substitution
    const auto e = solve(p, ManifoldId::Ground, r.field_mT * direction_from_angles(90, 0)).energies;
    CHECK(std::abs(std::abs(e(r.j - 1) - e(r.i - 1)) - 9.4) < 1e-4);
    if (r.weight > 0.1) strong.push_back(r.field_mT);
  }
  REQUIRE(strong.size() == 2);
  CHECK(std::abs(strong[0] - 143) < 5);
  CHECK(std::abs(strong[1] - 201) < 5);
  // centred near h nu / (g_perp mu_B)
  CHECK(0.5 * (strong[0] + strong[1]) == doctest::Approx(9.4 / (3.916 * PC::mu_B_over_h) * 1000).epsilon(0.02));
  CHECK(epr_resonance_fields(p, 9.4, 90, 0, 2000, 3000).empty());
  CHECK_THROWS_AS(epr_resonance_fields(p, -1, 90, 0, 1, 10), ValidationError);
}

TEST_CASE("EPR of the I = 0 isotope") {
  const auto p = SpinSystemParams::defaults();
  EprOptions o;
  o.zero_spin = true;
  for (double th : {0.0, 30.0, 60.0, 90.0}) {
    const auto r = epr_resonance_fields(p, 9.4, th, 0, 1, 2000, o);
    REQUIRE(r.size() == 1);
    const double t = th * PC::pi / 180;
    const double geff = std::sqrt(std::pow(1.053 * std::cos(t), 2) + std::pow(3.916 * std::sin(t), 2));
    CHECK(r[0].field_mT == doctest::Approx(9.4 / (geff * PC::mu_B_over_h) * 1000).epsilon(1e-5));
  }
  CHECK(epr_resonance_fields(p, 9.4, 90, 0, 1, 2000, o)[0].field_mT == doctest::Approx(171.5).epsilon(1e-3));
  CHECK(epr_resonance_fields(p, 9.4, 0, 0, 1, 2000, o)[0].field_mT == doctest::Approx(637.7).epsilon(1e-3));
}

TEST_CASE("EPR rotational symmetry and rosettes") {
  const auto p = SpinSystemParams::defaults();
  for (double phi : {0.0, 17.0, 45.0}) {
    const auto a = epr_resonance_fields(p, 9.4, 70, phi, 1, 2000);
    const auto b = epr_resonance_fields(p, 9.4, 70, phi + 90, 1, 2000);
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(std::abs(a[k].field_mT - b[k].field_mT) < 1e-3);
  }
  const auto ab = angular_rosette(p, RosettePlane::AB, 7, 9.4, 1, 2000);
  std::map<std::pair<int, int>, std::pair<double, double>> range;
  for (const auto& r : ab) {
    auto& x = range.try_emplace({r.resonance.i, r.resonance.j}, 1e9, -1e9).first->second;
    x.first = std::min(x.first, r.resonance.field_mT);
    x.second = std::max(x.second, r.resonance.field_mT);
  }
  for (const auto& [k, v] : range) CHECK(v.second - v.first < 1e-3);

  EprOptions o;
  o.zero_spin = true;
  const auto ca = angular_rosette(p, RosettePlane::CA, 5, 9.4, 1, 2000, 360, o);
  REQUIRE(ca.size() == 5);  // 0, 90, 180, 270, 360
  CHECK(ca[0].resonance.field_mT > ca[1].resonance.field_mT);  // 1/g_par vs 1/g_perp
  CHECK(std::abs(ca[0].resonance.field_mT - ca[2].resonance.field_mT) < 1e-3);
  CHECK(std::abs(ca[1].resonance.field_mT - ca[3].resonance.field_mT) < 1e-3);
  CHECK_THROWS_AS(angular_rosette(p, RosettePlane::CA, 1, 9.4, 1, 2000), ValidationError);
}
