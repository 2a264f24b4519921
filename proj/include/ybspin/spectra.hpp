#pragma once
// Optical transition catalogs, Gaussian-broadened spectra, magnet sweeps
// and EPR resonance-field searches.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "ybspin/spinham.hpp"

namespace ybspin {

enum class Polarization { Pi, Sigma, Alpha };

const char* to_string(Polarization p);
Polarization parse_polarization(const std::string& s);

// Relative line strengths between level groups {|1>, |2,3>, |4>}_g (rows)
// and {|1,2>, |3>, |4>}_e (columns).
struct BranchingTable {
  std::array<std::array<double, 3>, 3> w{};

  static BranchingTable measured(Polarization p);
  static BranchingTable uniform();
  double operator()(int g_group, int e_group) const { return w[g_group][e_group]; }
  void validate() const;
};

// Level index (1-based, ascending energy) -> group index 0..2.
int ground_group(int level);
int excited_group(int level);

struct TransitionLine {
  int ground_index = 0;   // 1..4 (1..2 for the I = 0 isotope)
  int excited_index = 0;
  double detuning = 0;    // GHz from the optical center
  double weight = 0;
  Polarization polarization = Polarization::Sigma;
  bool zero_spin = false; // I = 0 isotope line
};

enum class LineWeighting {
  Uniform,  // every 171Yb line weight 1
  Table,    // branching-table weight of the group pair, split evenly over its member lines
};

struct CatalogOptions {
  LineWeighting weighting = LineWeighting::Table;
  Polarization polarization = Polarization::Sigma;
  std::optional<BranchingTable> table;  // overrides the measured table
  double zero_spin_fraction = 0.05;     // of the total 171Yb weight
  double zero_spin_offset_GHz = 0.0;
  bool include_zero_spin = true;
};

std::vector<TransitionLine> transition_catalog(const SpinSystemParams& p, const Vec3& B_mT,
                                               const CatalogOptions& opt = {});

struct Grid {
  double min_GHz, max_GHz;
  std::size_t points;
  Eigen::VectorXd values() const;
};

struct Spectrum {
  Eigen::VectorXd detuning;    // GHz
  Eigen::VectorXd absorption;
};

// Sum of unit-area Gaussians. I = 0 lines use fwhm_zero_spin_MHz when given.
Spectrum synthesize_spectrum(const std::vector<TransitionLine>& lines, double fwhm_MHz, const Grid& grid,
                             std::optional<double> fwhm_zero_spin_MHz = std::nullopt);

double gaussian_unit_area(double x, double fwhm);

// Trapezoid integral of a spectrum over its grid.
double integrate(const Spectrum& s);

// Peaks of a B = 0 catalog labelled A, B, ... by ascending detuning. Lines
// closer than merge_GHz are merged; zero-weight groups are dropped.
struct PeakLabel {
  char letter;
  double detuning;  // weight-averaged, GHz
  double weight;
  std::vector<std::pair<int, int>> pairs;  // (ground, excited) levels, I = 0 as (0,0)
};
std::vector<PeakLabel> label_peaks(const std::vector<TransitionLine>& lines, double merge_GHz);

// Resolved peaks built only from clock pairs. A peak that merges a clock
// pair with a field-sensitive line, or holds I = 0 lines, is not a clock line.
std::vector<PeakLabel> clock_peaks(const std::vector<PeakLabel>& peaks, const std::vector<ClockPair>& clock);

struct SweepMap {
  std::vector<double> fields_mT;
  std::vector<Spectrum> spectra;
  std::vector<std::vector<TransitionLine>> lines;
  Vec3 axis = Vec3::UnitZ();
};

struct SweepOptions {
  CatalogOptions catalog;
  double fwhm_171_MHz = 136.0;
  double fwhm_zero_spin_MHz = 153.0;
};

SweepMap field_sweep_map(const SpinSystemParams& p, const Vec3& axis, double B_min_mT, double B_max_mT,
                         std::size_t steps, const Grid& grid, const SweepOptions& opt = {});

struct EprResonance {
  double field_mT;
  int i, j;       // 1-based ascending-energy levels (ground manifold)
  double weight;  // |dipole| summed in quadrature over two axes normal to B
};

struct EprOptions {
  int samples_per_decade = 2000;
  double tolerance_mT = 1e-3;
  bool zero_spin = false;  // electron-only two-level model
};

Vec3 direction_from_angles(double theta_deg, double phi_deg);

std::vector<EprResonance> epr_resonance_fields(const SpinSystemParams& p, double freq_GHz, double theta_deg,
                                               double phi_deg, double B_min_mT, double B_max_mT,
                                               const EprOptions& opt = {});

enum class RosettePlane { CA, AB };

struct RosetteRow {
  double angle_deg;
  EprResonance resonance;
};

// c-a plane: theta = angle, phi = 0. a-b plane: theta = 90, phi = angle.
std::vector<RosetteRow> angular_rosette(const SpinSystemParams& p, RosettePlane plane, std::size_t steps,
                                        double freq_GHz, double B_min_mT, double B_max_mT,
                                        double span_deg = 180.0, const EprOptions& opt = {});

}  // namespace ybspin
