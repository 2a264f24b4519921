#pragma once
// Effective spin-1/2 electron coupled to a spin-1/2 nucleus.
// Product basis order: (up,Up), (up,Dn), (dn,Up), (dn,Dn), index = 2*s + i
// with s = 0 for electron up and i = 0 for nuclear up.

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "ybspin/core.hpp"

namespace ybspin {

template <typename Scalar = std::complex<double>>
struct SpinHalf {
  using M2 = Eigen::Matrix<Scalar, 2, 2>;
  M2 x, y, z;
};

template <typename Scalar = std::complex<double>>
SpinHalf<Scalar> spin_half_operators() {
  using M2 = typename SpinHalf<Scalar>::M2;
  const Scalar h(0.5), i(0.0, 0.5);
  M2 sx, sy, sz;
  sx << Scalar(0), h, h, Scalar(0);
  sy << Scalar(0), -i, i, Scalar(0);
  sz << h, Scalar(0), Scalar(0), -h;
  return {sx, sy, sz};
}

template <typename A, typename B>
Eigen::Matrix<typename A::Scalar, A::RowsAtCompileTime * B::RowsAtCompileTime,
              A::ColsAtCompileTime * B::ColsAtCompileTime>
kron(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  Eigen::Matrix<typename A::Scalar, A::RowsAtCompileTime * B::RowsAtCompileTime,
                A::ColsAtCompileTime * B::ColsAtCompileTime>
      out;
  for (Eigen::Index r = 0; r < a.rows(); ++r)
    for (Eigen::Index c = 0; c < a.cols(); ++c)
      out.block(r * b.rows(), c * b.cols(), b.rows(), b.cols()) = a(r, c) * b;
  return out;
}

// Electron (S) and nuclear (I) operators lifted to the 4-dim product space.
struct ProductOperators {
  std::array<Mat4c, 3> S, I;
};
const ProductOperators& product_operators();

// Zeeman and hyperfine Hamiltonian in GHz. B in mT; z is the c axis.
Mat4c build_hamiltonian(const SpinSystemParams& p, ManifoldId m, const Vec3& B_mT);

struct EigenSystem {
  Eigen::Vector4d energies;  // GHz, ascending
  Mat4c states;              // columns are eigenvectors
  Vec3 field_mT = Vec3::Zero();

  Vec4c state(int k) const { return states.col(k); }
};

// Ascending eigenpairs. Exactly degenerate clusters are resolved by
// diagonalizing S_z (ties broken by I_z) inside the cluster, so a B = 0
// doublet comes out as (up,Up) then (dn,Dn). Phase: the first component
// of largest magnitude is made real and positive.
EigenSystem diagonalize(const Mat4c& H);

EigenSystem solve(const SpinSystemParams& p, ManifoldId m, const Vec3& B_mT);

enum class ZeroFieldKind { Singlet, Doublet, Triplet0 };

struct ZeroFieldLevel {
  double energy;  // GHz
  int multiplicity;
  ZeroFieldKind kind;
};

// Closed-form B = 0 levels, ascending. Singlet (up,Dn - dn,Up)/sqrt2 at
// (-A_par - 2A_perp)/4, the doublet (up,Up),(dn,Dn) at A_par/4, and the
// symmetric combination at (-A_par + 2A_perp)/4.
std::vector<ZeroFieldLevel> zero_field_levels(const UniaxialTensor& A);

// Same energies expanded to four entries, ascending.
Eigen::Vector4d zero_field_energies(const UniaxialTensor& A);

struct LabeledState {
  std::string label;
  Vec4c vector;
};

// Conventional labels |1>..|4>. Ground: |1> antisymmetric, |2>=(up,Up),
// |3>=(dn,Dn), |4> symmetric. Excited: |1>=(up,Up), |2>=(dn,Dn),
// |3> symmetric, |4> antisymmetric. The excited labels describe
// A_perp < 0; with a positive excited A_perp (the default record) the
// numerical |3> and |4> vectors are the other way round, the energies
// being unaffected.
std::array<LabeledState, 4> zero_field_states(ManifoldId m);

struct HighFieldState {
  std::string label;  // e.g. "dn,Up"
  Vec4c vector;       // product state
  double energy;      // secular estimate, GHz
};

struct HighFieldResult {
  std::array<HighFieldState, 4> states;  // ascending secular energy
  bool weak_field = false;                // Zeeman not dominant over |A|
};

// Product states ordered by secular energy x*mS + A_par*mS*mI - n*mI.
HighFieldResult high_field_states(ManifoldId m, double B_parallel_mT, const SpinSystemParams& p);

// <psi| dE/dB |psi> along unit direction, in MHz/mT (== GHz/T).
double first_order_sensitivity(const Vec4c& state, const Vec3& direction, const SpinSystemParams& p,
                               ManifoldId m);

// -<i| g.d.S - (mu_n/mu_B) g_n d.I |j>, in units of mu_B.
cplx transition_magnetic_dipole(const Vec4c& i, const Vec4c& j, const Vec3& direction,
                                const SpinSystemParams& p, ManifoldId m);

// Operator whose matrix elements transition_magnetic_dipole returns.
Mat4c magnetic_dipole_operator(const Vec3& direction, const SpinSystemParams& p, ManifoldId m);

struct ClockPair {
  int i, j;                  // 1-based level indices (ground, excited for optical)
  double max_sensitivity;    // max over x,y,z of |s_i - s_j|, MHz/mT
};

// Spin pairs within one manifold whose differential first-order
// sensitivity is below tol along x, y and z.
std::vector<ClockPair> find_clock_transitions(const SpinSystemParams& p, ManifoldId m,
                                              const Vec3& B0_mT, double tol = 1e-6);

// Optical pairs (ground i, excited j) with the same property.
std::vector<ClockPair> find_optical_clock_transitions(const SpinSystemParams& p, const Vec3& B0_mT,
                                                      double tol = 1e-6);

// Per-level sensitivities along x, y, z (rows = levels).
Eigen::Matrix<double, 4, 3> level_sensitivities(const SpinSystemParams& p, ManifoldId m,
                                                const Vec3& B_mT);

}  // namespace ybspin
