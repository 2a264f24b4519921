#pragma once
// Damped least squares and the concrete fit models.

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ybspin/dynamics.hpp"

namespace ybspin {

using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

struct FitResult {
  std::vector<std::string> names;
  VecX values, errors;        // 1 sigma from s^2 (J^T J)^-1
  MatX covariance;
  double residual_norm = 0;   // ||r||
  int iterations = 0;
  bool converged = false;
  std::string message;
  std::vector<double> cost_history;  // 0.5 ||r||^2 after each accepted step

  double value(const std::string& name) const;
  double error(const std::string& name) const;
};

using Model = std::function<VecX(const VecX&)>;
using Jacobian = std::function<MatX(const VecX&)>;

struct LsqOptions {
  int max_iterations = 200;
  double gtol = 1e-6;    // max column cosine between J and r
  double xtol = 1e-12;   // relative step
  double ftol = 1e-15;   // relative cost decrease
  double fd_step = 1e-7; // forward-difference step relative to max(|x|, typical)
  std::optional<VecX> typical;  // parameter magnitudes; 1 when absent
  std::optional<VecX> lower, upper;
  Jacobian jacobian;     // forward differences when empty
  std::vector<std::string> names;
};

// Levenberg-Marquardt on r = model(x) - data with Marquardt scaling and
// bounds enforced by projection.
FitResult least_squares(const Model& model, const VecX& data, const VecX& initial, const LsqOptions& opt = {});

// Step rel_step * max(|x_k|, 1).
MatX forward_difference_jacobian(const Model& model, const VecX& x, double rel_step = 1e-7);

// ---- Gaussian line ----

struct GaussianFit {
  double center = 0, fwhm = 0, amplitude = 0, offset = 0;
  FitResult fit;
  bool low_confidence = false;  // amplitude not distinguishable from zero
};

double gaussian_model(double x, double center, double fwhm, double amplitude, double offset);
GaussianFit fit_gaussian_line(const VecX& x, const VecX& y);

// ---- echo decay E0 exp(-2 tau / T2) ----

enum class EchoKind { Spin, Optical };

struct EchoFit {
  double E0 = 0, T2 = 0, T2_error = 0;
  FitResult fit;
};

EchoFit fit_echo_decay(const VecX& tau, const VecX& intensity, EchoKind kind = EchoKind::Spin);

// ---- spin-lattice recovery ----

struct SlrRecoveryFit {
  double T_eq = 0;
  std::array<double, 3> T_R{}, n0{}, n_eq{};  // groups |1>, |2,3>, |4>
  std::array<bool, 3> unidentifiable{};
  FitResult fit;
};

// populations: columns n1g, n23g (doublet total), n4g. Level energies are
// the four ground levels in GHz.
SlrRecoveryFit fit_slr_recovery(const VecX& delays, const MatX& populations, const Eigen::Vector4d& levels_GHz);

// Group equilibrium populations (|1>, |2,3>, |4>) at temperature T.
Eigen::Vector3d group_equilibrium(const Eigen::Vector4d& levels_GHz, double T);

// R0 + a1 T^2 + a2 T^9 by weighted (relative) linear least squares.
SlrParams fit_slr_polynomial(const VecX& T, const VecX& rates);

// ---- magnet sweep ----

// One measured map. field_axis holds coil current (A); the map's scale
// (G/A) converts it to field along `axis`.
struct SweepData {
  VecX current_A;
  Vec3 axis = Vec3::UnitZ();
  VecX detuning_GHz;
  MatX absorption;  // rows: currents, cols: detunings
};

struct FieldSweepFitSpec {
  double g_par0 = -1.4, g_perp0 = 1.3;   // starting point; the sign of g_par is not identifiable
  std::vector<double> scale0;            // G/A per map (default 150)
  double amp171_0 = 1.0, ampI0_0 = 0.05, offset0_GHz = 0.0;
  double fwhm_171_MHz = 136.0, fwhm_zero_spin_MHz = 153.0;
  LsqOptions lsq;
};

struct FieldSweepFit {
  double g_par = 0, g_perp = 0, amp171 = 0, ampI0 = 0, offset_GHz = 0;
  std::vector<double> scale_G_per_A;
  bool g_par_free = true, g_perp_free = true;
  FitResult fit;
};

// Simulated map: ground tensors from params, no nuclear Zeeman term,
// uniform line strengths. I = 0 lines carry ampI0 in total.
MatX field_sweep_model(const SpinSystemParams& p, const SweepData& layout, double g_par, double g_perp,
                       double scale_G_per_A, double amp171, double ampI0, double offset_GHz,
                       double fwhm_171_MHz, double fwhm_zero_spin_MHz);

// Joint fit over all maps. Free: excited g_par and g_perp, one scale per
// map, both amplitudes and a common frequency offset. A g component that
// no map's field direction probes is held at its start value.
FieldSweepFit fit_field_sweep(const std::vector<SweepData>& maps, const FieldSweepFitSpec& spec,
                              const SpinSystemParams& p);

// ---- photometry ----

// f = 4 eps0 m_e c / e^2 * 1/(3N) * sum_i chi_L^-1 int alpha_i dnu.
// spectra: absorption in cm^-1 against detuning in GHz, one per
// polarization; multiplicity duplicates a polarization that stands in for
// an unmeasured orthogonal one. N in cm^-3.
double oscillator_strength(const std::vector<Spectrum>& spectra, const std::vector<double>& multiplicity,
                           double N_cm3, double refractive_index);

double local_field_factor(double n);  // (n^2 + 2)^2 / 9

// Hyperfine spectrum for one polarization scaled to the given peak
// absorption (cm^-1).
Spectrum calibrated_absorption(const SpinSystemParams& p, Polarization pol, double peak_alpha_cm, const Grid& grid);

struct SpontaneousEmission {
  double gamma_s;  // s^-1
  double beta;     // Gamma_s T1
};

// Gamma_s = 2 pi e^2 nu^2 / (eps0 m_e c^3) n^2 chi_L f, frequency in Hz.
SpontaneousEmission spontaneous_rate_and_beta(double f, double frequency_Hz, double refractive_index, double T1);

}  // namespace ybspin
