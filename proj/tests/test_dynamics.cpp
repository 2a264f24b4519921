#include <functional>
#include <random>

#include "doctest.h"
#include "ybspin/dynamics.hpp"

using namespace ybspin;
using PC = PhysicalConstants;

namespace {
// Simpson rule over theta in [0, pi] times a uniform phi sum.
double sphere_integral(const std::function<double(const Vec3&)>& f) {
  const int nt = 2000, np = 16;
  const double ht = PC::pi / nt;
  double s = 0;
  for (int i = 0; i <= nt; ++i) {
    const double th = i * ht;
    const double w = (i == 0 || i == nt) ? 1 : (i % 2 ? 4 : 2);
    double ring = 0;
    for (int j = 0; j < np; ++j) {
      const double ph = 2 * PC::pi * j / np;
      ring += f({std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)});
    }
    s += w * std::sin(th) * ring * (2 * PC::pi / np);
  }
  return s * ht / 3;
}
}  // namespace

TEST_CASE("average dopant distance") {
  CHECK(average_dopant_distance(0.2795, 4, 5e-6) == doctest::Approx(24.2).epsilon(0.01));
  CHECK(average_dopant_distance(0.2795, 4, 1) == doctest::Approx(0.411).epsilon(0.01));
  CHECK(average_dopant_distance(0.2795, 4, 1) == doctest::Approx(std::cbrt(0.2795 / 4)).epsilon(1e-12));
  CHECK(average_dopant_distance(0.2795, 4, 1e-6 / 8) == doctest::Approx(2 * average_dopant_distance(0.2795, 4, 1e-6)));
  CHECK_THROWS_AS(average_dopant_distance(0.2795, 4, 0), DomainError);
}

TEST_CASE("flip-flop angular integrals match the closed forms") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.1, 8);
  for (int t = 0; t < 100; ++t) {
    const UniaxialTensor g(u(rng), u(rng), TensorUnit::Dimensionless);
    const double r = 20;
    for (auto ch : {FlipFlopChannel::Clock, FlipFlopChannel::Doublet}) {
      const double q = sphere_integral([&](const Vec3& d) { return flipflop_beta_angular(ch, g, r, d); });
      CHECK(q == doctest::Approx(flipflop_beta_integrated(ch, g, r)).epsilon(1e-6));
    }
  }
  // spherical mean of (1 - 3 n^2)^2 is 4/5
  CHECK(sphere_integral([](const Vec3& d) { return std::pow(1 - 3 * d.z() * d.z(), 2); }) / (4 * PC::pi) ==
        doctest::Approx(0.8).epsilon(1e-9));
}

TEST_CASE("flip-flop channel ratio and scaling") {
  const auto g = SpinSystemParams::defaults().g_ground;
  const double ratio = flipflop_beta_integrated(FlipFlopChannel::Doublet, g, 24) /
                       flipflop_beta_integrated(FlipFlopChannel::Clock, g, 24);
  CHECK(ratio == doctest::Approx(std::pow(3.916 / 1.053, 4) / 4).epsilon(1e-12));
  CHECK(std::abs(ratio - 47.8) < 0.1);
  const UniaxialTensor iso(2, 2, TensorUnit::Dimensionless);
  CHECK(flipflop_beta_integrated(FlipFlopChannel::Doublet, iso, 5) / flipflop_beta_integrated(FlipFlopChannel::Clock, iso, 5) ==
        doctest::Approx(0.25));
  // r^-6 scaling
  CHECK(flipflop_beta_integrated(FlipFlopChannel::Clock, g, 10) / flipflop_beta_integrated(FlipFlopChannel::Clock, g, 20) ==
        doctest::Approx(64));
  // oracle for the prefactor in SI
  const double k = 1e-7 * PC::mu_B * PC::mu_B / PC::h;
  CHECK(flipflop_beta_density(FlipFlopChannel::Clock, g) == doctest::Approx(k * k * PC::pi * std::pow(1.053, 4) / 10));
}

TEST_CASE("thermal factor") {
  CHECK(thermal_factor(0, 0.1) == 1.0);
  CHECK(thermal_factor(3.08187, 0.14) == doctest::Approx(0.766).epsilon(1e-3));
  double prev = 0;
  for (double T = 0.02; T < 10; T *= 1.3) {
    const double f = thermal_factor(1.146, T);
    CHECK(f > prev);
    CHECK(f <= 1.0);
    prev = f;
  }
  CHECK(thermal_factor(3, 1e6) == doctest::Approx(1).epsilon(1e-9));
  CHECK_THROWS_AS(thermal_factor(1, 0), DomainError);
}

TEST_CASE("flip-flop rates") {
  const auto p = SpinSystemParams::defaults();
  auto f = default_flipflop(p, FlipFlopChannel::Doublet, 0.14);
  const double r = flipflop_rate(f);
  CHECK(r > 3e2);
  CHECK(r < 1e4);
  // independent evaluation of beta n^2 / Gamma sech^2
  const double n = p.density_cm3() * 1e6;
  CHECK(r == doctest::Approx(f.beta_ff * n * n / (f.gamma_inh_kHz * 1e3) * thermal_factor(f.deltaE_GHz, 0.14)));
  f.deltaE_GHz = 0;
  CHECK(flipflop_rate(f) == doctest::Approx(f.beta_ff * n * n / 5e3));
  f.gamma_inh_kHz = 0;
  CHECK_THROWS_AS(flipflop_rate(f), DomainError);
  CHECK_THROWS_AS(default_flipflop(p, FlipFlopChannel::Clock, 1, 2, 2), ValidationError);
}

TEST_CASE("spin-lattice relaxation polynomial") {
  CHECK(slr_rate(1, SlrParams::upper()) == doctest::Approx(9.45e-4));
  CHECK(slr_crossover_temperature(SlrParams::upper()) == doctest::Approx(std::pow(9 / 0.25, 1.0 / 7)));
  CHECK(std::abs(slr_crossover_temperature(SlrParams::upper()) - 1.67) < 0.01);
  CHECK(slr_rate(1e-6, SlrParams::upper()) == doctest::Approx(0.2e-4));
}

TEST_CASE("Boltzmann populations") {
  const Eigen::VectorXd lv = zero_field_energies(SpinSystemParams::defaults().A_ground);
  const auto p = boltzmann_populations(lv, 0.14);
  CHECK(p(0) == doctest::Approx(0.371).epsilon(3e-3));
  CHECK(p(1) == doctest::Approx(0.250).epsilon(3e-3));
  CHECK(p(3) == doctest::Approx(0.129).epsilon(3e-3));
  CHECK(p.sum() == doctest::Approx(1));
  CHECK((boltzmann_populations(lv, 1e6).array() - 0.25).abs().maxCoeff() < 1e-6);
  const auto c = boltzmann_populations(lv, 1e-3);
  CHECK(c(0) == doctest::Approx(1));
  CHECK_THROWS_AS(boltzmann_populations(lv, 0), DomainError);
}

TEST_CASE("SLR generator detailed balance") {
  const Eigen::Vector4d lv = zero_field_energies(SpinSystemParams::defaults().A_ground);
  for (double T : {0.05, 0.14, 1.0, 3.0}) {
    const double R23 = slr_rate(T, SlrParams::doublet()), R4 = slr_rate(T, SlrParams::upper());
    const auto Q = slr_generator(lv, T, R23, R4);
    const Eigen::Vector4d pb = boltzmann_populations(lv, T);
    CHECK((Q * pb).norm() < 1e-12 * R4);
    CHECK(Q.colwise().sum().cwiseAbs().maxCoeff() < 1e-15);
    // pairwise balance k(a->b) p_a = k(b->a) p_b
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        if (a != b) CHECK(Q(b, a) * pb(a) == doctest::Approx(Q(a, b) * pb(b)));
    // stationary state from the null space
    Eigen::FullPivLU<Eigen::Matrix4d> lu(Q);
    Eigen::Vector4d ns = lu.kernel().col(0);
    ns /= ns.sum();
    CHECK((ns - pb).cwiseAbs().maxCoeff() < 1e-6);
    // relaxation eigenvalues on the scale of the measured rates
    Eigen::EigenSolver<Eigen::Matrix4d> es(Q);
    for (int k = 0; k < 4; ++k) {
      const double ev = -es.eigenvalues()(k).real();
      if (ev < 1e-12 * R4) continue;
      CHECK(ev > 0.5 * std::min(R23, R4));
      CHECK(ev < 4 * std::max(R23, R4));
    }
  }
}

TEST_CASE("pump rate equations") {
  const auto p = SpinSystemParams::defaults();
  SUBCASE("default pumping initializes |1>_g") {
    const auto tr = pump_simulation(PumpConfig{}, p);
    CHECK(tr.t.back() == doctest::Approx(0.3));
    CHECK(tr.n.back()(0) > 0.99);
    for (const auto& n : tr.n) {
      CHECK(std::abs(n.sum() - 1) < 1e-6);
      CHECK(n.minCoeff() > -1e-9);
      CHECK(n.maxCoeff() < 1 + 1e-9);
    }
  }
  SUBCASE("zero pump keeps equilibrium") {
    PumpConfig c;
    c.pumps.clear();
    c.temperature = 0.14;
    const auto tr = pump_simulation(c, p);
    for (const auto& n : tr.n) CHECK((n - tr.n.front()).cwiseAbs().maxCoeff() < 1e-9);
    const auto Q = pump_rate_matrix(c, p);
    Eigen::FullPivLU<Eigen::Matrix<double, 8, 8>> lu(Q);
    REQUIRE(lu.kernel().cols() == 1);
    Eigen::Matrix<double, 8, 1> ns = lu.kernel().col(0);
    ns /= ns.sum();
    const auto pb = boltzmann_populations(zero_field_energies(p.A_ground), 0.14);
    CHECK((ns.head<4>() - pb).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(ns.tail<4>().cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("step underflow") {
    PumpConfig c;
    c.min_step = 1.0;
    CHECK_THROWS_AS(pump_simulation(c, p), NumericalError);
  }
  SUBCASE("bad configs") {
    PumpConfig c;
    c.pumps[0].rate = -1;
    CHECK_THROWS_AS(pump_simulation(c, p), ValidationError);
    PumpConfig d;
    d.duration = 0;
    CHECK_THROWS_AS(pump_simulation(d, p), ValidationError);
  }
}

TEST_CASE("optical coherence budget") {
  const auto b = coherence_budget_optical(0.385e-3, {}, {});
  CHECK(b.T2 == 2 * 0.385e-3);
  CHECK(b.gamma_h_Hz == doctest::Approx(1 / (2 * 0.385e-3) / PC::pi));
  CHECK(infer_optical_rate_sum(0.54e-3, 0.385e-3) == doctest::Approx(2 * (1 / 0.54e-3 - 1 / 0.77e-3)));
  CHECK(infer_optical_rate_sum(0.54e-3, 0.385e-3) == doctest::Approx(1.1e3).epsilon(0.05));
  // round trip
  const RateMap ff{{"4g-1g", 350.0}, {"4g-2g", 420.5}}, slr{{"4g", 12.25}};
  const auto r = coherence_budget_optical(0.385e-3, ff, slr);
  CHECK(infer_optical_rate_sum(r.T2, 0.385e-3) == doctest::Approx(350 + 420.5 + 12.25).epsilon(1e-9));
  const auto more = coherence_budget_optical(0.385e-3, {{"4g-1g", 351.0}, {"4g-2g", 420.5}}, slr);
  CHECK(more.T2 < r.T2);
  CHECK_THROWS_AS(coherence_budget_optical(0, {}, {}), ValidationError);
}

TEST_CASE("spin coherence budget") {
  CHECK(infer_spin_flipflop(0.15) == doctest::Approx(13.3).epsilon(0.01));
  CHECK(std::abs(infer_spin_flipflop(0.15) - 13.3) < 0.1);
  const auto z = coherence_budget_spin({}, {}, true, 0.01);
  CHECK(z.unbounded);
  const RateMap ff{{"1g-4g", 13.3}, {"4g-1g", 5.0}, {"1g-2g", 100.0}}, slr{{"1g", 0.1}};
  const auto pol = coherence_budget_spin(ff, slr, true, 0.01);
  CHECK(pol.pi_gamma_h == doctest::Approx(13.3 / 2));
  CHECK(pol.T2 == doctest::Approx(2 / 13.3));
  const auto high = coherence_budget_spin(ff, slr, true, 0.5);
  CHECK(high.pi_gamma_h == doctest::Approx((13.3 + 5) / 2));
  const auto unpol = coherence_budget_spin(ff, slr, false, 0.01);
  CHECK(unpol.pi_gamma_h >= pol.pi_gamma_h);
  CHECK_THROWS_AS(coherence_budget_spin(ff, slr, true, 0), ValidationError);
}

TEST_CASE("T2 against temperature") {
  const auto p = SpinSystemParams::defaults();
  std::vector<double> grid;
  for (double T = 0.1; T <= 5.0001; T += 0.1) grid.push_back(T);
  const auto spin = t2_vs_temperature(p, grid, CoherenceMode::Spin);
  const auto opt = t2_vs_temperature(p, grid, CoherenceMode::Optical);
  for (std::size_t k = 1; k < grid.size(); ++k) {
    CHECK(spin[k].T2 <= spin[k - 1].T2 * (1 + 1e-12));
    CHECK(opt[k].T2 <= opt[k - 1].T2 * (1 + 1e-12));
  }
  auto at = [&](const std::vector<T2Point>& v, double T) {
    for (const auto& x : v)
      if (std::abs(x.T - T) < 1e-9) return x.T2;
    return std::nan("");
  };
  CHECK(at(spin, 1.0) == doctest::Approx(0.15).epsilon(0.05));
  CHECK(at(spin, 0.1) / at(spin, 3.0) > 10);
  CHECK(at(spin, 3.0) > 10e-3 / 3);
  CHECK(at(spin, 3.0) < 10e-3 * 3);
  CHECK(at(opt, 4.0) == doctest::Approx(0.2e-3).epsilon(1e-6));
  CHECK(at(opt, 0.1) == doctest::Approx(0.54e-3).epsilon(1e-3));
  CHECK_THROWS_AS(t2_vs_temperature(p, {6.0}, CoherenceMode::Spin), ValidationError);
}
