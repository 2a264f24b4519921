#pragma once
// Dopant distances, dipolar flip-flop rates, spin-lattice relaxation,
// optical pumping rate equations and coherence budgets.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ybspin/spectra.hpp"

namespace ybspin {

// (V / (Z n))^(1/3) in nm; n is the fractional site occupation.
double average_dopant_distance(double V_nm3, int Z, double n);

// Flip-flop channels between zero-field ground levels.
enum class FlipFlopChannel {
  Clock,    // |1>-|4>, coupled only through g_par S_z
  Doublet,  // any pair involving |2> or |3>, coupled through g_perp
};

// Orientation-resolved coupling (l, m, n direction cosines) in Hz^2, i.e.
// |<i j|H_dd|j i>|^2 / h^2 at separation r.
double flipflop_beta_angular(FlipFlopChannel ch, const UniaxialTensor& g, double r_nm, const Vec3& direction);

// Surface integral of the angular form over the unit sphere, in Hz^2:
// pi g_par^4 mu_B^4 / (10 r^6) and pi g_perp^4 mu_B^4 / (40 r^6), times
// (mu0/4pi)^2 / h^2.
double flipflop_beta_integrated(FlipFlopChannel ch, const UniaxialTensor& g, double r_nm);

// beta * r^6 in Hz^2 m^6. Multiplying by a squared number density (m^-6)
// gives Hz^2, because the mean dopant distance satisfies r^-3 = density.
double flipflop_beta_density(FlipFlopChannel ch, const UniaxialTensor& g);

struct FlipFlopParams {
  double beta_ff = 0;      // Hz^2 m^6 (see flipflop_beta_density)
  double n_cm3 = 0;        // spin density
  double gamma_inh_kHz = 0;
  double gamma_h_kHz = 0;
  double deltaE_GHz = 0;
  double T_K = 1;
};

// sech^2(dE / (2 kB T)).
double thermal_factor(double deltaE_GHz, double T_K);

// beta n^2 / (Gamma_h + Gamma_inh) * sech^2, in s^-1.
double flipflop_rate(const FlipFlopParams& p);

// Default parameters for a channel: density from the concentration,
// Gamma_inh from the spin linewidth, dE from the zero-field splitting.
FlipFlopParams default_flipflop(const SpinSystemParams& p, FlipFlopChannel ch, double T_K, int i = 0, int j = 0);

struct SlrParams {
  double R0 = 0, a1 = 0, a2 = 0;  // s^-1, s^-1 K^-2, s^-1 K^-9
  static SlrParams doublet() { return {0.2e-4, 3.8e-4, 0.55e-4}; }  // n_{2,3g}
  static SlrParams upper() { return {0.2e-4, 9e-4, 0.25e-4}; }      // n_{4g}
};

double slr_rate(double T_K, const SlrParams& p);

// Temperature where the T^2 and T^9 terms are equal.
double slr_crossover_temperature(const SlrParams& p);

// Normalized Boltzmann weights; levels listed individually (degenerate
// levels repeated), energies in GHz.
Eigen::VectorXd boltzmann_populations(const Eigen::VectorXd& levels_GHz, double T_K);

// Generator over the four ground levels, dn/dt = Q n. Rates
// k(a->b) = c_ab p_b satisfy detailed balance with the Boltzmann weights p.
// c(1,2|3) = R23, c(1,4) = R4, c(2|3,4) = (R23 + R4)/2, c(2,3) = R23.
Eigen::Matrix4d slr_generator(const Eigen::Vector4d& ground_levels_GHz, double T_K, double R23, double R4);

struct PumpedTransition {
  int ground_group;   // 0: |1>, 1: |2,3>, 2: |4>
  int excited_group;  // 0: |1,2>, 1: |3>, 2: |4>
  double rate;        // s^-1 per coupled level pair
};

struct PumpConfig {
  std::vector<PumpedTransition> pumps{{2, 0, 1e3}, {1, 0, 1e3}};
  double duration = 0.3;
  BranchingTable branching = BranchingTable::measured(Polarization::Sigma);
  double T1 = 0.385e-3;
  SlrParams slr_doublet = SlrParams::doublet();
  SlrParams slr_upper = SlrParams::upper();
  double temperature = 0.05;
  std::optional<Eigen::Matrix<double, 8, 1>> initial;  // default: ground Boltzmann
  double rtol = 1e-8;
  double atol = 1e-12;
  std::size_t output_points = 301;
  double min_step = 1e-14;
};

struct Trajectory {
  std::vector<double> t;
  std::vector<Eigen::Matrix<double, 8, 1>> n;  // n1g..n4g, n1e..n4e
};

// Full rate matrix (pump, radiative decay with branching, ground SLR).
Eigen::Matrix<double, 8, 8> pump_rate_matrix(const PumpConfig& c, const SpinSystemParams& p);

Trajectory pump_simulation(const PumpConfig& c, const SpinSystemParams& p);

using RateMap = std::map<std::string, double>;

struct RateBudget {
  RateMap channels;           // name -> s^-1
  double pi_gamma_h = 0;      // pi * Gamma_h, s^-1
  double gamma_h_Hz = 0;
  double T2 = 0;              // s; infinite when unbounded
  bool unbounded = false;
};

// pi Gamma_h = 1/(2 T1) + sum(R_ff)/2 + sum(R_SLR)/2 over channels out of |4>_g.
RateBudget coherence_budget_optical(double T1, const RateMap& flipflop, const RateMap& slr);

// Total flip-flop + SLR rate implied by an optical T2.
double infer_optical_rate_sum(double T2, double T1);

// Keys "1g-4g" style: R^{ag,bg}. Unpolarized: half the sum of every
// channel listed. Polarized with excitation_fraction below threshold: only
// R^{1g,4g}/2. Polarized above threshold: (R^{1g,4g} + R^{4g,1g})/2.
RateBudget coherence_budget_spin(const RateMap& flipflop, const RateMap& slr, bool polarized,
                                 double excitation_fraction, double threshold = 0.05);

// R^{1g,4g} implied by a polarized spin T2 (= 2/T2).
double infer_spin_flipflop(double T2);

enum class CoherenceMode { Spin, Optical };

struct T2Options {
  double wait_s = 0.1;            // repolarization-to-probe delay (spin mode)
  double spin_plateau_T2 = 0.15;  // polarized low-temperature T2 (spin mode)
  double optical_plateau_T2 = 0.54e-3;
  std::optional<double> phonon_t9;  // s^-1 K^-9; calibrated when absent
  double calibration_T = 4.0;
  double calibration_T2 = 0.2e-3;
};

struct T2Point {
  double T, T2;
};

std::vector<T2Point> t2_vs_temperature(const SpinSystemParams& p, const std::vector<double>& T_grid,
                                       CoherenceMode mode, const T2Options& opt = {});

// T^9 coefficient putting the optical T2 at opt.calibration_T2 at calibration_T.
double calibrate_phonon_t9(const SpinSystemParams& p, const T2Options& opt);

}  // namespace ybspin
