#include "ybspin/spinham.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ybspin {

using PC = PhysicalConstants;

const ProductOperators& product_operators() {
  static const ProductOperators ops = [] {
    const auto s = spin_half_operators();
    const Eigen::Matrix2cd id = Eigen::Matrix2cd::Identity();
    ProductOperators o;
    o.S = {kron(s.x, id), kron(s.y, id), kron(s.z, id)};
    o.I = {kron(id, s.x), kron(id, s.y), kron(id, s.z)};
    return o;
  }();
  return ops;
}

Mat4c build_hamiltonian(const SpinSystemParams& p, ManifoldId m, const Vec3& B_mT) {
  if (!B_mT.allFinite()) throw ValidationError("field must be finite");
  const auto& op = product_operators();
  const auto& A = p.A(m);
  const auto& g = p.g(m);
  const Vec3 B = B_mT * 1e-3;  // T

  Mat4c H = A.perpendicular * (op.S[0] * op.I[0] + op.S[1] * op.I[1]) + A.parallel * op.S[2] * op.I[2];
  H += PC::mu_B_over_h * (g.perpendicular * (B.x() * op.S[0] + B.y() * op.S[1]) + g.parallel * B.z() * op.S[2]);
  if (p.nuclear_zeeman)
    H -= PC::mu_n_over_h * p.g_n * (B.x() * op.I[0] + B.y() * op.I[1] + B.z() * op.I[2]);
  return H;
}

namespace {

void fix_phase(Eigen::Ref<Vec4c> v) {
  Eigen::Index k = 0;
  double best = -1;
  for (Eigen::Index r = 0; r < 4; ++r) {
    // first component whose magnitude is maximal, up to rounding
    if (std::abs(v(r)) > best + 1e-12) {
      best = std::abs(v(r));
      k = r;
    }
  }
  v *= std::conj(v(k)) / std::abs(v(k));
}

}  // namespace

EigenSystem diagonalize(const Mat4c& H) {
  const double scale = std::max(1.0, H.norm());
  if ((H - H.adjoint()).norm() > 1e-9 * scale) throw ValidationError("diagonalize: matrix is not Hermitian");
  const Mat4c Hs = 0.5 * (H + H.adjoint());
  Eigen::SelfAdjointEigenSolver<Mat4c> es(Hs);
  EigenSystem out;
  out.energies = es.eigenvalues();
  out.states = es.eigenvectors();

  const auto& op = product_operators();
  const Mat4c tiebreak = op.S[2] + 0.25 * op.I[2];
  const double tol = 1e-9 * scale;
  int start = 0;
  while (start < 4) {
    int end = start + 1;
    while (end < 4 && out.energies(end) - out.energies(start) < tol) ++end;
    const int n = end - start;
    if (n > 1) {
      const Eigen::MatrixXcd V = out.states.middleCols(start, n);
      const Eigen::MatrixXcd P = V.adjoint() * tiebreak * V;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> sub(0.5 * (P + P.adjoint()));
      // descending S_z: up before down
      Eigen::MatrixXcd U = sub.eigenvectors().rowwise().reverse();
      out.states.middleCols(start, n) = V * U;
      const double mean = out.energies.segment(start, n).mean();
      out.energies.segment(start, n).setConstant(mean);
    }
    start = end;
  }
  for (int k = 0; k < 4; ++k) fix_phase(out.states.col(k));
  return out;
}

EigenSystem solve(const SpinSystemParams& p, ManifoldId m, const Vec3& B_mT) {
  auto es = diagonalize(build_hamiltonian(p, m, B_mT));
  es.field_mT = B_mT;
  return es;
}

std::vector<ZeroFieldLevel> zero_field_levels(const UniaxialTensor& A) {
  std::vector<ZeroFieldLevel> lv{{(-A.parallel - 2 * A.perpendicular) / 4, 1, ZeroFieldKind::Singlet},
                                 {A.parallel / 4, 2, ZeroFieldKind::Doublet},
                                 {(-A.parallel + 2 * A.perpendicular) / 4, 1, ZeroFieldKind::Triplet0}};
  std::stable_sort(lv.begin(), lv.end(), [](const auto& a, const auto& b) { return a.energy < b.energy; });
  return lv;
}

Eigen::Vector4d zero_field_energies(const UniaxialTensor& A) {
  Eigen::Vector4d e;
  int k = 0;
  for (const auto& l : zero_field_levels(A))
    for (int r = 0; r < l.multiplicity; ++r) e(k++) = l.energy;
  return e;
}

namespace {
Vec4c basis(int k) {
  Vec4c v = Vec4c::Zero();
  v(k) = 1.0;
  return v;
}
Vec4c antisym() { return (basis(1) - basis(2)) / std::sqrt(2.0); }
Vec4c sym() { return (basis(1) + basis(2)) / std::sqrt(2.0); }
}  // namespace

std::array<LabeledState, 4> zero_field_states(ManifoldId m) {
  if (m == ManifoldId::Ground)
    return {LabeledState{"(up,Dn - dn,Up)/sqrt2", antisym()}, LabeledState{"up,Up", basis(0)},
            LabeledState{"dn,Dn", basis(3)}, LabeledState{"(up,Dn + dn,Up)/sqrt2", sym()}};
  return {LabeledState{"up,Up", basis(0)}, LabeledState{"dn,Dn", basis(3)},
          LabeledState{"(up,Dn + dn,Up)/sqrt2", sym()}, LabeledState{"(up,Dn - dn,Up)/sqrt2", antisym()}};
}

HighFieldResult high_field_states(ManifoldId m, double B_parallel_mT, const SpinSystemParams& p) {
  const auto& g = p.g(m);
  const auto& A = p.A(m);
  const double x = PC::mu_B_over_h * g.parallel * B_parallel_mT * 1e-3;
  const double n = p.nuclear_zeeman ? PC::mu_n_over_h * p.g_n * B_parallel_mT * 1e-3 : 0.0;
  static const char* names[4] = {"up,Up", "up,Dn", "dn,Up", "dn,Dn"};
  HighFieldResult r;
  for (int k = 0; k < 4; ++k) {
    const double ms = (k < 2) ? 0.5 : -0.5;
    const double mi = (k % 2 == 0) ? 0.5 : -0.5;
    r.states[k] = {names[k], basis(k), x * ms + A.parallel * ms * mi - n * mi};
  }
  std::stable_sort(r.states.begin(), r.states.end(),
                   [](const auto& a, const auto& b) { return a.energy < b.energy; });
  const double amax = std::max(std::abs(A.parallel), std::abs(A.perpendicular));
  r.weak_field = std::abs(x) < 10 * amax;
  return r;
}

namespace {
Mat4c zeeman_derivative(const Vec3& d, const SpinSystemParams& p, ManifoldId m) {
  const auto& op = product_operators();
  const auto& g = p.g(m);
  Mat4c O = PC::mu_B_over_h * (g.perpendicular * (d.x() * op.S[0] + d.y() * op.S[1]) + g.parallel * d.z() * op.S[2]);
  if (p.nuclear_zeeman) O -= PC::mu_n_over_h * p.g_n * (d.x() * op.I[0] + d.y() * op.I[1] + d.z() * op.I[2]);
  return O;
}
}  // namespace

double first_order_sensitivity(const Vec4c& state, const Vec3& direction, const SpinSystemParams& p,
                               ManifoldId m) {
  return (state.adjoint() * zeeman_derivative(direction, p, m) * state)(0).real();
}

Mat4c magnetic_dipole_operator(const Vec3& d, const SpinSystemParams& p, ManifoldId m) {
  const auto& op = product_operators();
  const auto& g = p.g(m);
  Mat4c O = g.perpendicular * (d.x() * op.S[0] + d.y() * op.S[1]) + g.parallel * d.z() * op.S[2];
  if (p.nuclear_zeeman)
    O -= (PC::mu_n_over_h / PC::mu_B_over_h) * p.g_n * (d.x() * op.I[0] + d.y() * op.I[1] + d.z() * op.I[2]);
  return -O;
}

cplx transition_magnetic_dipole(const Vec4c& i, const Vec4c& j, const Vec3& direction,
                                const SpinSystemParams& p, ManifoldId m) {
  return (i.adjoint() * magnetic_dipole_operator(direction, p, m) * j)(0);
}

Eigen::Matrix<double, 4, 3> level_sensitivities(const SpinSystemParams& p, ManifoldId m, const Vec3& B_mT) {
  const auto es = solve(p, m, B_mT);
  Eigen::Matrix<double, 4, 3> s;
  for (int k = 0; k < 4; ++k)
    for (int a = 0; a < 3; ++a) s(k, a) = first_order_sensitivity(es.state(k), Vec3::Unit(a), p, m);
  return s;
}

std::vector<ClockPair> find_clock_transitions(const SpinSystemParams& p, ManifoldId m, const Vec3& B0_mT,
                                              double tol) {
  const auto s = level_sensitivities(p, m, B0_mT);
  std::vector<ClockPair> out;
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) {
      const double d = (s.row(i) - s.row(j)).cwiseAbs().maxCoeff();
      if (d < tol) out.push_back({i + 1, j + 1, d});
    }
  return out;
}

std::vector<ClockPair> find_optical_clock_transitions(const SpinSystemParams& p, const Vec3& B0_mT, double tol) {
  const auto sg = level_sensitivities(p, ManifoldId::Ground, B0_mT);
  const auto se = level_sensitivities(p, ManifoldId::Excited, B0_mT);
  std::vector<ClockPair> out;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      const double d = (sg.row(i) - se.row(j)).cwiseAbs().maxCoeff();
      if (d < tol) out.push_back({i + 1, j + 1, d});
    }
  return out;
}

}  // namespace ybspin
