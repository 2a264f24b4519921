#include "ybspin/dynamics.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace ybspin {

using PC = PhysicalConstants;

double average_dopant_distance(double V_nm3, int Z, double n) {
  if (!(n > 0) || n > 1) throw DomainError("site occupation must lie in (0, 1], got " + std::to_string(n));
  if (!(V_nm3 > 0) || Z < 1) throw DomainError("cell volume and site count must be positive");
  return std::cbrt(V_nm3 / (Z * n));
}

namespace {
// (mu0/4pi)^2 mu_B^4 / (h^2 r^6) in Hz^2 for r in metres.
double dipolar_scale(double r_m) {
  const double k = PC::mu0_over_4pi * PC::mu_B * PC::mu_B / PC::h;
  return k * k / std::pow(r_m, 6);
}
double g4(FlipFlopChannel ch, const UniaxialTensor& g) {
  return ch == FlipFlopChannel::Clock ? std::pow(g.parallel, 4) : std::pow(g.perpendicular, 4);
}
double angular_denominator(FlipFlopChannel ch) { return ch == FlipFlopChannel::Clock ? 32.0 : 128.0; }
double integrated_denominator(FlipFlopChannel ch) { return ch == FlipFlopChannel::Clock ? 10.0 : 40.0; }
}  // namespace

double flipflop_beta_angular(FlipFlopChannel ch, const UniaxialTensor& g, double r_nm, const Vec3& dir) {
  if (!(r_nm > 0)) throw DomainError("separation must be > 0");
  const Vec3 u = dir.normalized();
  // l^2 + m^2 - 2 n^2 = 1 - 3 n^2 on the unit sphere
  const double ang = u.x() * u.x() + u.y() * u.y() - 2 * u.z() * u.z();
  return dipolar_scale(r_nm * 1e-9) * g4(ch, g) * ang * ang / angular_denominator(ch);
}

double flipflop_beta_integrated(FlipFlopChannel ch, const UniaxialTensor& g, double r_nm) {
  if (!(r_nm > 0)) throw DomainError("separation must be > 0");
  return dipolar_scale(r_nm * 1e-9) * PC::pi * g4(ch, g) / integrated_denominator(ch);
}

double flipflop_beta_density(FlipFlopChannel ch, const UniaxialTensor& g) {
  return flipflop_beta_integrated(ch, g, 1e9 /* 1 m */);
}

double thermal_factor(double dE, double T) {
  if (!(T > 0)) throw DomainError("temperature must be > 0");
  const double x = dE * PC::h_over_kB / (2 * T);
  const double c = std::cosh(x);
  return std::isfinite(c) ? 1.0 / (c * c) : 0.0;
}

double flipflop_rate(const FlipFlopParams& p) {
  const double gamma = (p.gamma_h_kHz + p.gamma_inh_kHz) * 1e3;
  if (!(gamma > 0)) throw DomainError("flip-flop rate needs a positive total linewidth");
  if (p.beta_ff < 0 || p.n_cm3 < 0) throw DomainError("beta and density must be non-negative");
  const double n = p.n_cm3 * 1e6;
  return p.beta_ff * n * n / gamma * thermal_factor(p.deltaE_GHz, p.T_K);
}

FlipFlopParams default_flipflop(const SpinSystemParams& p, FlipFlopChannel ch, double T, int i, int j) {
  const auto E = zero_field_energies(p.A_ground);
  if (i == 0) {
    i = 1;
    j = ch == FlipFlopChannel::Clock ? 4 : 2;
  }
  if (i < 1 || i > 4 || j < 1 || j > 4 || i == j) throw ValidationError("flip-flop levels must be distinct in 1..4");
  FlipFlopParams f;
  f.beta_ff = flipflop_beta_density(ch, p.g_ground);
  f.n_cm3 = p.density_cm3();
  f.gamma_inh_kHz = p.fwhm_spin_kHz;
  f.deltaE_GHz = std::abs(E(j - 1) - E(i - 1));
  f.T_K = T;
  return f;
}

double slr_rate(double T, const SlrParams& p) {
  if (!(T > 0)) throw DomainError("temperature must be > 0");
  return p.R0 + p.a1 * T * T + p.a2 * std::pow(T, 9);
}

double slr_crossover_temperature(const SlrParams& p) {
  if (!(p.a1 > 0) || !(p.a2 > 0)) throw DomainError("crossover needs positive a1 and a2");
  return std::pow(p.a1 / p.a2, 1.0 / 7.0);
}

Eigen::VectorXd boltzmann_populations(const Eigen::VectorXd& E, double T) {
  if (!(T > 0)) throw DomainError("temperature must be > 0");
  const double kT = T / PC::h_over_kB;  // GHz
  const double e0 = E.minCoeff();
  Eigen::VectorXd w = E.unaryExpr([&](double e) { return std::exp(-(e - e0) / kT); });
  return w / w.sum();
}

Eigen::Matrix4d slr_generator(const Eigen::Vector4d& levels, double T, double R23, double R4) {
  const Eigen::Vector4d pb = boltzmann_populations(levels, T);
  Eigen::Matrix4d c = Eigen::Matrix4d::Zero();
  c(0, 1) = c(0, 2) = R23;
  c(0, 3) = R4;
  c(1, 3) = c(2, 3) = 0.5 * (R23 + R4);
  c(1, 2) = R23;
  c = (c + c.transpose()).eval();
  Eigen::Matrix4d Q = Eigen::Matrix4d::Zero();
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      if (a != b) Q(b, a) = c(a, b) * pb(b);
  for (int a = 0; a < 4; ++a) Q(a, a) = -(Q.col(a).sum() - Q(a, a));
  return Q;
}

Eigen::Matrix<double, 8, 8> pump_rate_matrix(const PumpConfig& c, const SpinSystemParams& p) {
  if (!(c.T1 > 0)) throw ValidationError("T1 must be > 0");
  c.branching.validate();
  Eigen::Matrix<double, 8, 8> Q = Eigen::Matrix<double, 8, 8>::Zero();
  for (const auto& pt : c.pumps) {
    if (pt.rate < 0) throw ValidationError("pump rates must be >= 0");
    if (pt.ground_group < 0 || pt.ground_group > 2 || pt.excited_group < 0 || pt.excited_group > 2)
      throw ValidationError("pumped transition group out of range");
    for (int i = 1; i <= 4; ++i)
      for (int j = 1; j <= 4; ++j) {
        if (ground_group(i) != pt.ground_group || excited_group(j) != pt.excited_group) continue;
        const int a = i - 1, b = 3 + j;
        Q(a, a) -= pt.rate;
        Q(b, a) += pt.rate;
        Q(b, b) -= pt.rate;
        Q(a, b) += pt.rate;
      }
  }
  static constexpr int kGroundSize[3] = {1, 2, 1};
  for (int j = 1; j <= 4; ++j) {
    Eigen::Vector4d br;
    for (int i = 1; i <= 4; ++i)
      br(i - 1) = c.branching(ground_group(i), excited_group(j)) / kGroundSize[ground_group(i)];
    if (br.sum() <= 0) br.setConstant(1.0);
    br /= br.sum();
    const int b = 3 + j;
    Q(b, b) -= 1.0 / c.T1;
    for (int i = 0; i < 4; ++i) Q(i, b) += br(i) / c.T1;
  }
  const double R23 = slr_rate(c.temperature, c.slr_doublet), R4 = slr_rate(c.temperature, c.slr_upper);
  Q.topLeftCorner<4, 4>() += slr_generator(zero_field_energies(p.A_ground), c.temperature, R23, R4);
  return Q;
}

Trajectory pump_simulation(const PumpConfig& c, const SpinSystemParams& p) {
  if (!(c.duration > 0)) throw ValidationError("pump duration must be > 0");
  if (!(c.rtol > 0) || !(c.atol > 0)) throw ValidationError("step control tolerances must be > 0");
  if (c.output_points < 2) throw ValidationError("need at least two output points");
  using V8 = Eigen::Matrix<double, 8, 1>;
  const auto Q = pump_rate_matrix(c, p);
  V8 y;
  if (c.initial) {
    y = *c.initial;
    if ((y.array() < 0).any() || std::abs(y.sum() - 1) > 1e-9) throw ValidationError("initial populations must be a distribution");
  } else {
    y.setZero();
    y.head<4>() = boltzmann_populations(zero_field_energies(p.A_ground), c.temperature);
  }

  // Dormand-Prince 5(4)
  static const double a21 = 1.0 / 5, a31 = 3.0 / 40, a32 = 9.0 / 40, a41 = 44.0 / 45, a42 = -56.0 / 15,
                      a43 = 32.0 / 9, a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                      a54 = -212.0 / 729, a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                      a64 = 49.0 / 176, a65 = -5103.0 / 18656, b1 = 35.0 / 384, b3 = 500.0 / 1113,
                      b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84, e1 = 71.0 / 57600,
                      e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200, e6 = 22.0 / 525,
                      e7 = -1.0 / 40;

  Trajectory tr;
  tr.t.push_back(0);
  tr.n.push_back(y);
  double t = 0;
  double h = std::min(c.duration / static_cast<double>(c.output_points - 1), 1.0 / (Q.cwiseAbs().maxCoeff() + 1e-300));
  V8 k1 = Q * y;
  for (std::size_t o = 1; o < c.output_points; ++o) {
    const double t_out = c.duration * static_cast<double>(o) / static_cast<double>(c.output_points - 1);
    while (t < t_out) {
      const bool last = t + h >= t_out;
      const double hs = last ? t_out - t : h;
      const V8 k2 = Q * (y + hs * a21 * k1);
      const V8 k3 = Q * (y + hs * (a31 * k1 + a32 * k2));
      const V8 k4 = Q * (y + hs * (a41 * k1 + a42 * k2 + a43 * k3));
      const V8 k5 = Q * (y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
      const V8 k6 = Q * (y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
      const V8 yn = y + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      const V8 k7 = Q * yn;
      const V8 err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      const V8 sc = (c.atol + c.rtol * y.cwiseAbs().cwiseMax(yn.cwiseAbs()).array()).matrix();
      const double en = (err.array() / sc.array()).abs().maxCoeff();
      if (en <= 1.0) {
        t = last ? t_out : t + hs;
        y = yn;
        k1 = k7;
      }
      const double fac = en == 0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
      if (!last || en > 1.0) h = hs * fac;
      if (h < c.min_step) {
        std::ostringstream m;
        m << "pump_simulation: step size underflow at t = " << t << " s (h = " << h << ")";
        throw NumericalError(m.str());
      }
    }
    tr.t.push_back(t_out);
    tr.n.push_back(y);
  }
  return tr;
}

RateBudget coherence_budget_optical(double T1, const RateMap& ff, const RateMap& slr) {
  if (!(T1 > 0)) throw ValidationError("T1 must be > 0");
  RateBudget b;
  b.channels["T1"] = 1.0 / T1;
  b.pi_gamma_h = 1.0 / (2 * T1);
  for (const auto& [k, r] : ff) {
    if (r < 0) throw ValidationError("rates must be >= 0");
    b.channels["ff:" + k] = r;
    b.pi_gamma_h += 0.5 * r;
  }
  for (const auto& [k, r] : slr) {
    if (r < 0) throw ValidationError("rates must be >= 0");
    b.channels["slr:" + k] = r;
    b.pi_gamma_h += 0.5 * r;
  }
  b.gamma_h_Hz = b.pi_gamma_h / PC::pi;
  b.T2 = 1.0 / b.pi_gamma_h;
  return b;
}

double infer_optical_rate_sum(double T2, double T1) {
  if (!(T2 > 0) || !(T1 > 0)) throw DomainError("T2 and T1 must be > 0");
  return 2.0 * (1.0 / T2 - 1.0 / (2 * T1));
}

RateBudget coherence_budget_spin(const RateMap& ff, const RateMap& slr, bool polarized, double frac,
                                 double threshold) {
  if (!(frac > 0) || frac > 1) throw ValidationError("excitation fraction must lie in (0, 1]");
  for (const auto* m : {&ff, &slr})
    for (const auto& [k, r] : *m)
      if (r < 0) throw ValidationError("rates must be >= 0");
  RateBudget b;
  auto get = [](const RateMap& m, const char* k) {
    const auto it = m.find(k);
    return it == m.end() ? 0.0 : it->second;
  };
  if (!polarized) {
    for (const auto& [k, r] : ff) b.channels["ff:" + k] = r, b.pi_gamma_h += 0.5 * r;
    for (const auto& [k, r] : slr) b.channels["slr:" + k] = r, b.pi_gamma_h += 0.5 * r;
  } else if (frac < threshold) {
    const double r = get(ff, "1g-4g");
    b.channels["ff:1g-4g"] = r;
    b.pi_gamma_h = 0.5 * r;
  } else {
    const double r1 = get(ff, "1g-4g"), r2 = get(ff, "4g-1g");
    b.channels["ff:1g-4g"] = r1;
    b.channels["ff:4g-1g"] = r2;
    b.pi_gamma_h = 0.5 * (r1 + r2);
  }
  b.gamma_h_Hz = b.pi_gamma_h / PC::pi;
  if (b.pi_gamma_h <= 0) {
    b.unbounded = true;
    b.T2 = std::numeric_limits<double>::infinity();
  } else {
    b.T2 = 1.0 / b.pi_gamma_h;
  }
  return b;
}

double infer_spin_flipflop(double T2) {
  if (!(T2 > 0)) throw DomainError("T2 must be > 0");
  return 2.0 / T2;
}

namespace {

double optical_rate(const SpinSystemParams& p, double T, const T2Options& opt, double c9) {
  const double base = 1.0 / (2 * p.T1_optical) + 0.5 * infer_optical_rate_sum(opt.optical_plateau_T2, p.T1_optical);
  return base + 0.5 * slr_rate(T, SlrParams::upper()) + c9 * std::pow(T, 9);
}

}  // namespace

double calibrate_phonon_t9(const SpinSystemParams& p, const T2Options& opt) {
  const double need = 1.0 / opt.calibration_T2 - optical_rate(p, opt.calibration_T, opt, 0.0);
  if (need < 0) throw DomainError("calibration T2 is already exceeded without the T^9 term");
  return need / std::pow(opt.calibration_T, 9);
}

std::vector<T2Point> t2_vs_temperature(const SpinSystemParams& p, const std::vector<double>& grid, CoherenceMode mode,
                                       const T2Options& opt) {
  for (double T : grid)
    if (!(T > 0) || T > 5) throw ValidationError("temperature grid must lie in (0, 5] K");
  std::vector<T2Point> out;
  const double c9 = mode == CoherenceMode::Optical ? (opt.phonon_t9 ? *opt.phonon_t9 : calibrate_phonon_t9(p, opt)) : 0;
  const auto E = zero_field_energies(p.A_ground);
  for (double T : grid) {
    double rate;
    if (mode == CoherenceMode::Spin) {
      // Doublet population refilled by SLR between repolarization and probe.
      const auto pop = boltzmann_populations(E, T);
      const double R23 = slr_rate(T, SlrParams::doublet()), R4 = slr_rate(T, SlrParams::upper());
      const double x = (pop(1) + pop(2)) * (1.0 - std::exp(-R23 * opt.wait_s));
      const double ff = flipflop_rate(default_flipflop(p, FlipFlopChannel::Doublet, T));
      rate = 1.0 / opt.spin_plateau_T2 + 0.5 * x * ff + 0.5 * (R23 + R4);
    } else {
      rate = optical_rate(p, T, opt, c9);
    }
    out.push_back({T, 1.0 / rate});
  }
  return out;
}

}  // namespace ybspin
