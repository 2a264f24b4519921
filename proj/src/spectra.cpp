#include "ybspin/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace ybspin {

using PC = PhysicalConstants;

const char* to_string(Polarization p) {
  switch (p) {
    case Polarization::Pi: return "pi";
    case Polarization::Sigma: return "sigma";
    case Polarization::Alpha: return "alpha";
  }
  return "?";
}

Polarization parse_polarization(const std::string& s) {
  if (s == "pi") return Polarization::Pi;
  if (s == "sigma") return Polarization::Sigma;
  if (s == "alpha") return Polarization::Alpha;
  throw ValidationError("unknown polarization '" + s + "' (pi, sigma, alpha)");
}

BranchingTable BranchingTable::measured(Polarization p) {
  BranchingTable t;
  if (p == Polarization::Sigma)
    t.w = {{{0.3, 0.7, 0.0}, {1.0, 0.3, 0.7}, {0.7, 0.0, 0.3}}};
  else  // pi and alpha tables coincide
    t.w = {{{1.0, 0.0, 0.0}, {0.0, 1.0, 1.0}, {1.0, 0.0, 0.0}}};
  return t;
}

BranchingTable BranchingTable::uniform() {
  BranchingTable t;
  for (auto& r : t.w) r = {1.0, 1.0, 1.0};
  return t;
}

void BranchingTable::validate() const {
  for (const auto& r : w)
    for (double x : r)
      if (!(x >= 0.0 && x <= 1.0)) throw ValidationError("branching weights must lie in [0, 1]");
}

int ground_group(int level) { return level == 1 ? 0 : (level == 4 ? 2 : 1); }
int excited_group(int level) { return level <= 2 ? 0 : level - 2; }

namespace {
constexpr int kGroundSize[3] = {1, 2, 1};
constexpr int kExcitedSize[3] = {2, 1, 1};

// Electron-only levels of the I = 0 isotope, ascending.
Eigen::Vector2d electron_levels(const UniaxialTensor& g, const Vec3& B_mT) {
  const Vec3 B = B_mT * 1e-3;
  const double d = PC::mu_B_over_h *
                   std::sqrt(std::pow(g.perpendicular * B.x(), 2) + std::pow(g.perpendicular * B.y(), 2) +
                             std::pow(g.parallel * B.z(), 2));
  return {-0.5 * d, 0.5 * d};
}
}  // namespace

std::vector<TransitionLine> transition_catalog(const SpinSystemParams& p, const Vec3& B_mT,
                                               const CatalogOptions& opt) {
  const auto eg = solve(p, ManifoldId::Ground, B_mT).energies;
  const auto ee = solve(p, ManifoldId::Excited, B_mT).energies;
  const BranchingTable table = opt.table ? *opt.table : BranchingTable::measured(opt.polarization);
  table.validate();

  std::vector<TransitionLine> lines;
  double total = 0;
  for (int i = 1; i <= 4; ++i)
    for (int j = 1; j <= 4; ++j) {
      TransitionLine l;
      l.ground_index = i;
      l.excited_index = j;
      l.detuning = ee(j - 1) - eg(i - 1);
      l.polarization = opt.polarization;
      if (opt.weighting == LineWeighting::Uniform) {
        l.weight = 1.0;
      } else {
        const int a = ground_group(i), b = excited_group(j);
        l.weight = table(a, b) / (kGroundSize[a] * kExcitedSize[b]);
      }
      total += l.weight;
      lines.push_back(l);
    }

  if (opt.include_zero_spin) {
    const auto g0 = electron_levels(p.g_ground, B_mT);
    const auto e0 = electron_levels(p.g_excited, B_mT);
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        TransitionLine l;
        l.ground_index = a + 1;
        l.excited_index = b + 1;
        l.detuning = opt.zero_spin_offset_GHz + e0(b) - g0(a);
        l.weight = opt.zero_spin_fraction * total / 4.0;
        l.polarization = opt.polarization;
        l.zero_spin = true;
        lines.push_back(l);
      }
  }
  return lines;
}

Eigen::VectorXd Grid::values() const {
  if (points < 2 || !(max_GHz > min_GHz)) throw ValidationError("grid needs >= 2 points and max > min");
  return Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(points), min_GHz, max_GHz);
}

double gaussian_unit_area(double x, double fwhm) {
  static const double k = 4.0 * std::log(2.0);
  return std::sqrt(k / PC::pi) / fwhm * std::exp(-k * x * x / (fwhm * fwhm));
}

Spectrum synthesize_spectrum(const std::vector<TransitionLine>& lines, double fwhm_MHz, const Grid& grid,
                             std::optional<double> fwhm_zero_spin_MHz) {
  if (!(fwhm_MHz > 0)) throw ValidationError("fwhm must be > 0");
  if (fwhm_zero_spin_MHz && !(*fwhm_zero_spin_MHz > 0)) throw ValidationError("fwhm must be > 0");
  Spectrum s;
  s.detuning = grid.values();
  s.absorption = Eigen::VectorXd::Zero(s.detuning.size());
  for (const auto& l : lines) {
    if (l.weight == 0.0) continue;
    const double w = 1e-3 * ((l.zero_spin && fwhm_zero_spin_MHz) ? *fwhm_zero_spin_MHz : fwhm_MHz);
    s.absorption += l.weight * s.detuning.unaryExpr([&](double x) { return gaussian_unit_area(x - l.detuning, w); });
  }
  return s;
}

double integrate(const Spectrum& s) {
  double a = 0;
  for (Eigen::Index k = 1; k < s.detuning.size(); ++k)
    a += 0.5 * (s.absorption(k) + s.absorption(k - 1)) * (s.detuning(k) - s.detuning(k - 1));
  return a;
}

std::vector<PeakLabel> label_peaks(const std::vector<TransitionLine>& lines, double merge_GHz) {
  std::vector<TransitionLine> sorted = lines;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& a, const auto& b) { return a.detuning < b.detuning; });
  std::vector<PeakLabel> peaks;
  std::size_t k = 0;
  while (k < sorted.size()) {
    std::size_t end = k + 1;
    while (end < sorted.size() && sorted[end].detuning - sorted[end - 1].detuning < merge_GHz) ++end;
    PeakLabel pk{'?', 0.0, 0.0, {}};
    for (std::size_t r = k; r < end; ++r) {
      const auto& l = sorted[r];
      if (l.weight <= 0) continue;
      pk.weight += l.weight;
      pk.detuning += l.weight * l.detuning;
      const std::pair<int, int> pr = l.zero_spin ? std::pair{0, 0} : std::pair{l.ground_index, l.excited_index};
      if (std::find(pk.pairs.begin(), pk.pairs.end(), pr) == pk.pairs.end()) pk.pairs.push_back(pr);
    }
    if (pk.weight > 0) {
      pk.detuning /= pk.weight;
      pk.letter = static_cast<char>('A' + peaks.size());
      peaks.push_back(pk);
    }
    k = end;
  }
  return peaks;
}

SweepMap field_sweep_map(const SpinSystemParams& p, const Vec3& axis, double B_min_mT, double B_max_mT,
                         std::size_t steps, const Grid& grid, const SweepOptions& opt) {
  if (steps < 2) throw ValidationError("field sweep needs >= 2 steps");
  if (axis.norm() == 0) throw ValidationError("sweep axis must be non-zero");
  SweepMap map;
  map.axis = axis.normalized();
  for (std::size_t k = 0; k < steps; ++k) {
    const double B = B_min_mT + (B_max_mT - B_min_mT) * static_cast<double>(k) / static_cast<double>(steps - 1);
    auto lines = transition_catalog(p, map.axis * B, opt.catalog);
    map.spectra.push_back(synthesize_spectrum(lines, opt.fwhm_171_MHz, grid, opt.fwhm_zero_spin_MHz));
    map.fields_mT.push_back(B);
    map.lines.push_back(std::move(lines));
  }
  return map;
}

Vec3 direction_from_angles(double theta_deg, double phi_deg) {
  const double t = theta_deg * PC::pi / 180.0, f = phi_deg * PC::pi / 180.0;
  return {std::sin(t) * std::cos(f), std::sin(t) * std::sin(f), std::cos(t)};
}

namespace {

// Two unit vectors normal to d.
std::pair<Vec3, Vec3> normal_pair(const Vec3& d) {
  Vec3 u = d.cross(Vec3::UnitZ());
  if (u.norm() < 1e-12) u = Vec3::UnitX();
  u.normalize();
  return {u, d.cross(u).normalized()};
}

struct Levels {
  Eigen::VectorXd E;
  Eigen::MatrixXcd V;
};

Levels epr_levels(const SpinSystemParams& p, const Vec3& d, double B, bool zero_spin) {
  if (!zero_spin) {
    const auto es = solve(p, ManifoldId::Ground, d * B);
    return {es.energies, es.states};
  }
  const auto s = spin_half_operators();
  const Vec3 b = d * B * 1e-3;
  const auto& g = p.g_ground;
  const Eigen::Matrix2cd H = PC::mu_B_over_h * (g.perpendicular * (b.x() * s.x + b.y() * s.y) + g.parallel * b.z() * s.z);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(H);
  return {es.eigenvalues(), es.eigenvectors()};
}

double epr_weight(const SpinSystemParams& p, const Vec3& d, const Levels& L, int i, int j, bool zero_spin) {
  const auto [u, v] = normal_pair(d);
  double w2 = 0;
  for (const Vec3& a : {u, v}) {
    cplx m;
    if (!zero_spin) {
      m = transition_magnetic_dipole(L.V.col(i), L.V.col(j), a, p, ManifoldId::Ground);
    } else {
      const auto s = spin_half_operators();
      const auto& g = p.g_ground;
      const Eigen::Matrix2cd O = -(g.perpendicular * (a.x() * s.x + a.y() * s.y) + g.parallel * a.z() * s.z);
      m = (L.V.col(i).adjoint() * O * L.V.col(j))(0);
    }
    w2 += std::norm(m);
  }
  return std::sqrt(w2);
}

}  // namespace

std::vector<EprResonance> epr_resonance_fields(const SpinSystemParams& p, double freq_GHz, double theta_deg,
                                               double phi_deg, double B_min_mT, double B_max_mT,
                                               const EprOptions& opt) {
  if (!(B_min_mT > 0) || !(B_max_mT > B_min_mT)) throw ValidationError("EPR field range must be positive and increasing");
  if (!(freq_GHz > 0)) throw ValidationError("microwave frequency must be > 0");
  if (opt.samples_per_decade < 1 || !(opt.tolerance_mT > 0)) throw ValidationError("bad EPR search options");
  const Vec3 d = direction_from_angles(theta_deg, phi_deg);
  const bool z = opt.zero_spin;
  const int n = z ? 2 : 4;

  const double decades = std::log10(B_max_mT / B_min_mT);
  const auto samples = static_cast<std::size_t>(std::ceil(decades * opt.samples_per_decade)) + 1;
  std::vector<double> B(samples);
  std::vector<Eigen::VectorXd> E(samples);
  for (std::size_t k = 0; k < samples; ++k) {
    B[k] = B_min_mT * std::pow(B_max_mT / B_min_mT, static_cast<double>(k) / static_cast<double>(samples - 1));
    E[k] = epr_levels(p, d, B[k], z).E;
  }

  std::vector<EprResonance> out;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      auto gap = [&](double b) {
        const auto L = epr_levels(p, d, b, z);
        return L.E(j) - L.E(i) - freq_GHz;
      };
      for (std::size_t k = 1; k < samples; ++k) {
        const double f0 = E[k - 1](j) - E[k - 1](i) - freq_GHz;
        const double f1 = E[k](j) - E[k](i) - freq_GHz;
        if (f0 == 0.0 || (f0 < 0) == (f1 < 0)) continue;
        double lo = B[k - 1], hi = B[k], flo = f0;
        while (hi - lo > opt.tolerance_mT) {
          const double mid = 0.5 * (lo + hi);
          const double fm = gap(mid);
          if ((fm < 0) == (flo < 0)) {
            lo = mid;
            flo = fm;
          } else {
            hi = mid;
          }
        }
        const double b = 0.5 * (lo + hi);
        const auto L = epr_levels(p, d, b, z);
        out.push_back({b, i + 1, j + 1, epr_weight(p, d, L, i, j, z)});
      }
    }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.field_mT < b.field_mT; });
  return out;
}

std::vector<RosetteRow> angular_rosette(const SpinSystemParams& p, RosettePlane plane, std::size_t steps,
                                        double freq_GHz, double B_min_mT, double B_max_mT, double span_deg,
                                        const EprOptions& opt) {
  if (steps < 2) throw ValidationError("rosette needs >= 2 angle steps");
  std::vector<RosetteRow> rows;
  for (std::size_t k = 0; k < steps; ++k) {
    const double a = span_deg * static_cast<double>(k) / static_cast<double>(steps - 1);
    const double theta = plane == RosettePlane::CA ? a : 90.0;
    const double phi = plane == RosettePlane::CA ? 0.0 : a;
    for (const auto& r : epr_resonance_fields(p, freq_GHz, theta, phi, B_min_mT, B_max_mT, opt))
      rows.push_back({a, r});
  }
  return rows;
}

std::vector<PeakLabel> clock_peaks(const std::vector<PeakLabel>& peaks, const std::vector<ClockPair>& clock) {
  std::vector<PeakLabel> out;
  for (const auto& pk : peaks) {
    const bool all = std::all_of(pk.pairs.begin(), pk.pairs.end(), [&](const auto& pr) {
      return std::any_of(clock.begin(), clock.end(), [&](const ClockPair& c) { return c.i == pr.first && c.j == pr.second; });
    });
    if (all && !pk.pairs.empty()) out.push_back(pk);
  }
  return out;
}

}  // namespace ybspin
