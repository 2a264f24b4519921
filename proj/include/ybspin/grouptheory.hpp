#pragma once
// S4 and D2d double-group data, irrep products, dipole selection rules for
// hyperfine levels, and crystal-field g-factor relations.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ybspin/core.hpp"

namespace ybspin {

enum class PointGroup { S4, D2d };

const char* to_string(PointGroup g);
PointGroup parse_point_group(const std::string& s);

using Irreps = std::vector<int>;  // sorted multiset of 1-based irrep indices

int irrep_count(PointGroup g);
int irrep_dimension(PointGroup g, int irrep);
std::string irrep_name(PointGroup g, int irrep);
std::string irrep_name(PointGroup g, const Irreps& set);  // e.g. "G3,4"
// Accepts "G3", "Gamma3" or the bare number.
int parse_irrep(PointGroup g, const std::string& s);

struct CharacterTable {
  Eigen::MatrixXcd chi;         // irreps x classes
  Eigen::VectorXd class_size;
  double order() const { return class_size.sum(); }
};
const CharacterTable& character_table(PointGroup g);

Irreps irrep_product(PointGroup g, int x, int y);
// Product of two reducible sums, e.g. (G5+G6) x (G7+G8).
Irreps irrep_product(PointGroup g, const Irreps& x, const Irreps& y);
int irrep_conjugate(PointGroup g, int x);

// Electronic Kramers doublet families.
enum class DoubletFamily { G56, G78 };  // S4 labels; D2d: G56 -> G6, G78 -> G7
Irreps family_irreps(PointGroup g, DoubletFamily f);
Irreps nuclear_spin_irreps(PointGroup g);

struct HyperfineIrreps {
  Irreps all;       // full decomposition of electronic x nuclear
  Irreps doublet;   // carried by the degenerate hyperfine level
  Irreps singlets;  // the two non-degenerate levels
};
HyperfineIrreps hyperfine_level_irreps(PointGroup g, DoubletFamily f);

struct PolSet {
  bool alpha = false, sigma = false, pi = false;
  bool empty() const { return !alpha && !sigma && !pi; }
  bool operator==(const PolSet&) const = default;
  std::string str() const;  // "alpha,sigma" or "-"
  static PolSet parse(const std::string& s);
};

struct DipoleRule {
  PolSet ed, md;
  bool operator==(const DipoleRule&) const = default;
};

// Rule between two levels, each carrying one irrep or a degenerate set.
DipoleRule dipole_selection_rules(PointGroup g, const Irreps& irrep_g, const Irreps& irrep_e);
DipoleRule dipole_selection_rules(PointGroup g, int irrep_g, int irrep_e);

// Irreps of level groups {|1>,|2,3>,|4>}_g or {|1,2>,|3>,|4>}_e.
using LevelAssignment = std::array<Irreps, 3>;

struct SelectionRuleTable {
  std::array<std::array<DipoleRule, 3>, 3> cell;  // [ground group][excited group]
};

SelectionRuleTable hyperfine_selection_table(PointGroup g, const LevelAssignment& ground,
                                             const LevelAssignment& excited);

// Left: electronic irreps differ between manifolds. Right: they coincide.
enum class AssignmentVariant { Left, Right };
std::pair<LevelAssignment, LevelAssignment> standard_assignment(PointGroup g, AssignmentVariant v);

// Polarizations seen in absorption between hyperfine groups.
std::array<std::array<PolSet, 3>, 3> observed_hyperfine_rules();

struct RuleMismatch {
  int ground_group, excited_group;
  char pol;  // 'a', 's' or 'p'
};
// ED-allowed polarizations absent from the observed table.
std::vector<RuleMismatch> ed_predicted_unobserved(const SelectionRuleTable& t,
                                                  const std::array<std::array<PolSet, 3>, 3>& observed);

// ---- g factors ----

enum class DoubletOrder { Upper, Lower };  // G5 (G7) above or below G6 (G8)

struct DoubletCoefficients {
  // a, b: the two free-ion amplitudes of the doublet. For the J = 7/2 G78
  // family these are the |-7/2> and |+1/2> amplitudes. c, d: admixture of
  // J = 7/2 into the J = 5/2 G56 doublet (fit_j_mixing only).
  double a = 1, b = 0, c = 0, d = 0;
  int twoJ = 7;
  DoubletFamily family = DoubletFamily::G56;
  DoubletOrder order = DoubletOrder::Upper;

  double norm2() const { return a * a + b * b + c * c + d * d; }
  double mixing_ratio() const { return (c * c + d * d) / (a * a + b * b); }
};

double lande_g(int twoJ);  // 8/7 for J = 7/2, 6/7 for J = 5/2

struct GFactors {
  double parallel, perpendicular;
};

GFactors doublet_g_factors(const DoubletCoefficients& k);

// |g_perp| implied by g_par for a family and level order.
double g_consistency_relation(int twoJ, DoubletFamily f, DoubletOrder o, double g_parallel);

// g factors of a J = 5/2 G56 doublet with J = 7/2 admixture (upper order).
GFactors mixed_g_factors(double a, double b, double c, double d);

struct JMixingOptions {
  int restarts = 10;
  std::uint64_t seed = 12345;
  int max_iterations = 20000;
  double tolerance = 1e-6;  // on the residual norm
};

struct JMixingResult {
  DoubletCoefficients coeffs;
  double R = 0;
  GFactors g{};
  double residual = 0;
  std::vector<double> restart_R;  // R found by each restart
};

// Smallest-admixture coefficients reproducing (g_par, g_perp).
JMixingResult fit_j_mixing(double target_g_parallel, double target_g_perp, const JMixingOptions& opt = {});

}  // namespace ybspin
