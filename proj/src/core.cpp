#include "ybspin/core.hpp"

#include <cmath>
#include <sstream>

namespace ybspin {

UniaxialTensor::UniaxialTensor(double par, double perp, TensorUnit u)
    : parallel(par), perpendicular(perp), unit(u) {
  if (!std::isfinite(par) || !std::isfinite(perp))
    throw ValidationError("uniaxial tensor components must be finite");
}

Eigen::Matrix3d UniaxialTensor::matrix() const {
  return Eigen::Vector3d(perpendicular, perpendicular, parallel).asDiagonal();
}

namespace {
void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ValidationError(field + ": " + what);
}
void require(bool ok, const std::string& field, const std::string& what, double got) {
  if (!ok) {
    std::ostringstream os;
    os << field << ": " << what << ", got " << got;
    throw ValidationError(os.str());
  }
}
bool finite(const UniaxialTensor& t) { return std::isfinite(t.parallel) && std::isfinite(t.perpendicular); }
}  // namespace

void SpinSystemParams::validate() const {
  require(finite(g_ground) && finite(g_excited) && finite(A_ground) && finite(A_excited), "ground/excited tensors",
          "components must be finite");
  require(std::isfinite(g_n), "system.g_n", "must be finite");
  require(T1_optical > 0, "system.T1_s", "must be > 0", T1_optical);
  require(optical_center_nm > 0, "system.optical_center_nm", "must be > 0", optical_center_nm);
  require(fwhm_optical_MHz > 0, "system.fwhm_optical_MHz", "must be > 0", fwhm_optical_MHz);
  require(fwhm_spin_kHz > 0, "system.fwhm_spin_kHz", "must be > 0", fwhm_spin_kHz);
  require(concentration_ppm > 0 && concentration_ppm < 1e6, "system.concentration_ppm", "must lie in (0, 1e6)", concentration_ppm);
  require(unit_cell_volume_nm3 > 0, "system.unit_cell_volume_nm3", "must be > 0", unit_cell_volume_nm3);
  require(sites_per_cell >= 1, "system.sites_per_cell", "must be >= 1", sites_per_cell);
  require(refractive_index > 0, "system.refractive_index", "must be > 0", refractive_index);
}

double SpinSystemParams::density_cm3() const {
  const double per_nm3 = concentration_ppm * 1e-6 * sites_per_cell / unit_cell_volume_nm3;
  return per_nm3 * 1e21;
}

SpinSystemParams SpinSystemParams::preset(const std::string& name) {
  SpinSystemParams p;
  if (name == "yb171-cawo4" || name.empty()) return p;
  if (name == "field-sweep-fit") {
    const auto s = FieldSweepPreset::e_perp_c();
    p.g_excited = UniaxialTensor(s.g_par, s.g_perp, TensorUnit::Dimensionless);
    p.nuclear_zeeman = false;
    return p;
  }
  throw ValidationError("unknown preset '" + name + "' (known: yb171-cawo4, field-sweep-fit)");
}

}  // namespace ybspin
