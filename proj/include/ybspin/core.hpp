#pragma once
// Shared types: physical constants, error classes and the parameter record
// for the two-manifold spin system.

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>

namespace ybspin {

using cplx = std::complex<double>;
using Vec3 = Eigen::Vector3d;
using Mat4c = Eigen::Matrix4cd;
using Vec4c = Eigen::Vector4cd;

// Bad input (malformed value, out-of-range parameter, unknown label).
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Input outside the mathematical domain of a formula (n = 0, negative
// discriminant, zero linewidth).
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Solver trouble: step-size underflow, optimizer that never converged.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PhysicalConstants {
  static constexpr double mu_B_over_h = 13.9962;     // GHz/T
  static constexpr double mu_n_over_h = 7.6226e-3;   // GHz/T (7.6226 MHz/T)
  static constexpr double h_over_kB = 0.0479924;     // K/GHz

  // SI values for the dipolar and photometric formulas.
  static constexpr double mu0_over_4pi = 1e-7;        // T m / A
  static constexpr double mu_B = 9.2740100783e-24;    // J/T
  static constexpr double h = 6.62607015e-34;         // J s
  static constexpr double e = 1.602176634e-19;        // C
  static constexpr double m_e = 9.1093837015e-31;     // kg
  static constexpr double c = 299792458.0;            // m/s
  static constexpr double eps0 = 8.8541878128e-12;    // F/m
  static constexpr double pi = 3.14159265358979323846;
};

enum class ManifoldId { Ground, Excited };

inline const char* to_string(ManifoldId m) { return m == ManifoldId::Ground ? "ground" : "excited"; }

enum class TensorUnit { Dimensionless, GHz };

// Axial tensor about the crystal c axis (z).
struct UniaxialTensor {
  double parallel = 0.0;
  double perpendicular = 0.0;
  TensorUnit unit = TensorUnit::Dimensionless;

  UniaxialTensor() = default;
  UniaxialTensor(double par, double perp, TensorUnit u);

  Eigen::Matrix3d matrix() const;
};

struct SpinSystemParams {
  UniaxialTensor g_ground{1.053, 3.916, TensorUnit::Dimensionless};
  UniaxialTensor g_excited{-1.446, 1.293, TensorUnit::Dimensionless};
  UniaxialTensor A_ground{-0.78905, 3.08187, TensorUnit::GHz};
  UniaxialTensor A_excited{-2.87, 2.72, TensorUnit::GHz};
  double g_n = 0.987;
  double T1_optical = 0.385e-3;       // s
  double optical_center_nm = 973.162; // vacuum wavelength
  double fwhm_optical_MHz = 185.0;
  double fwhm_spin_kHz = 5.0;
  double concentration_ppm = 4.96;    // of Ca sites
  double unit_cell_volume_nm3 = 0.2795;
  int sites_per_cell = 4;
  double refractive_index = 1.895;
  bool nuclear_zeeman = true;

  const UniaxialTensor& g(ManifoldId m) const { return m == ManifoldId::Ground ? g_ground : g_excited; }
  const UniaxialTensor& A(ManifoldId m) const { return m == ManifoldId::Ground ? A_ground : A_excited; }

  // Throws ValidationError naming the offending field.
  void validate() const;

  // Dopant number density in cm^-3.
  double density_cm3() const;
  double optical_frequency_Hz() const { return PhysicalConstants::c / (optical_center_nm * 1e-9); }

  static SpinSystemParams defaults() { return {}; }
  // "yb171-cawo4" (defaults) or "field-sweep-fit" (excited tensor and coil
  // scales from the magnet-sweep fit, E perpendicular to c dataset).
  static SpinSystemParams preset(const std::string& name);
};

// Coil scales that accompany the "field-sweep-fit" preset, in G/A.
struct FieldSweepPreset {
  double g_par, g_perp, s_par, s_perp;
  static FieldSweepPreset e_perp_c() { return {-1.451, 1.361, 143.64, 166.20}; }
  static FieldSweepPreset e_par_c() { return {-1.453, 1.363, 143.63, 165.52}; }
};

}  // namespace ybspin
