#include <random>

#include "doctest.h"
#include "ybspin/spinham.hpp"

using namespace ybspin;
using PC = PhysicalConstants;

namespace {
const auto G = ManifoldId::Ground;
const auto E = ManifoldId::Excited;

double spread(const Mat4c& m) { return m.cwiseAbs().maxCoeff(); }

Eigen::Vector4d sorted_eigs(const Mat4c& H) {
  Eigen::SelfAdjointEigenSolver<Mat4c> es(H);
  return es.eigenvalues();
}
}  // namespace

TEST_CASE("spin one-half algebra") {
  const auto s = spin_half_operators();
  CHECK(s.z(0, 0).real() == doctest::Approx(0.5));
  CHECK(s.z(1, 1).real() == doctest::Approx(-0.5));
  const auto cas = s.x * s.x + s.y * s.y + s.z * s.z;
  CHECK(spread(Mat4c::Zero()) == 0);
  CHECK((cas - 0.75 * Eigen::Matrix2cd::Identity()).cwiseAbs().maxCoeff() < 1e-15);
  const Eigen::Matrix2cd comm = s.x * s.y - s.y * s.x - cplx(0, 1) * s.z;
  CHECK(comm.cwiseAbs().maxCoeff() < 1e-15);
  for (const auto* m : {&s.x, &s.y, &s.z}) CHECK(((*m) - m->adjoint()).cwiseAbs().maxCoeff() == 0);
}

TEST_CASE("kron lifts operators into the product basis") {
  const auto& op = product_operators();
  // S_z = diag(1/2, 1/2, -1/2, -1/2), I_z = diag(1/2, -1/2, 1/2, -1/2)
  CHECK(op.S[2](0, 0).real() == doctest::Approx(0.5));
  CHECK(op.S[2](2, 2).real() == doctest::Approx(-0.5));
  CHECK(op.I[2](1, 1).real() == doctest::Approx(-0.5));
  CHECK(op.I[2](2, 2).real() == doctest::Approx(0.5));
  // electron and nuclear operators commute
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) CHECK(spread(op.S[a] * op.I[b] - op.I[b] * op.S[a]) < 1e-15);
}

TEST_CASE("zero-field Hamiltonian eigenvalues") {
  const auto p = SpinSystemParams::defaults();
  // closed forms with the default hyperfine tensors
  const double Ap = -0.78905, At = 3.08187;
  const Eigen::Vector4d g_expected((-Ap - 2 * At) / 4, Ap / 4, Ap / 4, (-Ap + 2 * At) / 4);
  const auto eg = solve(p, G, Vec3::Zero()).energies;
  for (int k = 0; k < 4; ++k) CHECK(eg(k) == doctest::Approx(g_expected(k)).epsilon(1e-12));
  CHECK(eg(0) == doctest::Approx(-1.343673).epsilon(1e-6));
  CHECK(eg(3) == doctest::Approx(1.738198).epsilon(1e-6));
  const auto ee = solve(p, E, Vec3::Zero()).energies;
  const Eigen::Vector4d e_expected(-0.7175, -0.7175, -0.6425, 2.0775);
  for (int k = 0; k < 4; ++k) CHECK(std::abs(ee(k) - e_expected(k)) < 1e-12);
}

TEST_CASE("Hamiltonian is Hermitian and traceless for any field") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-500, 500);
  const auto p = SpinSystemParams::defaults();
  for (int t = 0; t < 50; ++t)
    for (auto m : {G, E}) {
      const auto H = build_hamiltonian(p, m, Vec3(u(rng), u(rng), u(rng)));
      CHECK(spread(H - H.adjoint()) < 1e-12);
      CHECK(std::abs(H.trace()) < 1e-12);
    }
  CHECK_THROWS_AS(build_hamiltonian(p, G, Vec3(std::nan(""), 0, 0)), ValidationError);
}

TEST_CASE("diagonalize") {
  SUBCASE("diagonal input") {
    Mat4c H = Mat4c::Zero();
    H.diagonal() << 1, 2, 3, 4;
    const auto es = diagonalize(H);
    for (int k = 0; k < 4; ++k) {
      CHECK(es.energies(k) == doctest::Approx(k + 1));
      CHECK(std::abs(es.states(k, k) - cplx(1, 0)) < 1e-15);
    }
  }
  SUBCASE("random Hermitian: trace, residual, unitarity, phase") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n(0, 1);
    for (int t = 0; t < 100; ++t) {
      Mat4c M;
      for (int i = 0; i < 16; ++i) M(i / 4, i % 4) = cplx(n(rng), n(rng));
      const Mat4c H = M + M.adjoint();
      const auto es = diagonalize(H);
      CHECK(es.energies.sum() == doctest::Approx(H.trace().real()).epsilon(1e-9));
      for (int k = 1; k < 4; ++k) CHECK(es.energies(k) >= es.energies(k - 1));
      CHECK(spread(es.states.adjoint() * es.states - Mat4c::Identity()) < 1e-12);
      for (int k = 0; k < 4; ++k) {
        const Vec4c v = es.states.col(k);
        CHECK((H * v - es.energies(k) * v).norm() < 1e-9 * H.norm());
        Eigen::Index big;
        v.cwiseAbs().maxCoeff(&big);
        CHECK(std::abs(v(big).imag()) < 1e-12);
        CHECK(v(big).real() > 0);
      }
    }
  }
  SUBCASE("non-Hermitian input is rejected") {
    Mat4c H = Mat4c::Zero();
    H(0, 1) = 1.0;
    CHECK_THROWS_AS(diagonalize(H), ValidationError);
  }
}

TEST_CASE("analytic and numeric zero-field energies agree over random tensors") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-10, 10);
  auto p = SpinSystemParams::defaults();
  for (int t = 0; t < 1000; ++t) {
    p.A_ground = UniaxialTensor(u(rng), u(rng), TensorUnit::GHz);
    const auto num = solve(p, G, Vec3::Zero()).energies;
    const auto ana = zero_field_energies(p.A_ground);
    // independent oracle: the closed forms written out here
    const double a = p.A_ground.parallel, b = p.A_ground.perpendicular;
    std::array<double, 4> o{(-a - 2 * b) / 4, a / 4, a / 4, (-a + 2 * b) / 4};
    std::sort(o.begin(), o.end());
    for (int k = 0; k < 4; ++k) {
      CHECK(std::abs(num(k) - ana(k)) < 1e-9);
      CHECK(std::abs(ana(k) - o[k]) < 1e-12);
    }
  }
}

TEST_CASE("zero-field splittings") {
  const auto e = zero_field_energies(SpinSystemParams::defaults().A_ground);
  CHECK(e(3) - e(0) == doctest::Approx(3.08187).epsilon(1e-12));
  CHECK(e(1) - e(0) == doctest::Approx(std::abs(-0.78905 + 3.08187) / 2).epsilon(1e-12));
  CHECK(e(1) - e(0) == doctest::Approx(1.146410).epsilon(1e-7));
  // measured |1>-|4> splitting 3083.87 MHz sits 2 MHz above A_perp
  CHECK(std::abs(e(3) - e(0) - 3.08387) / 3.08387 < 1e-3);
  const auto z = zero_field_energies(UniaxialTensor(0, 0, TensorUnit::GHz));
  CHECK(z.cwiseAbs().maxCoeff() == 0);
  const auto lv = zero_field_levels(SpinSystemParams::defaults().A_ground);
  REQUIRE(lv.size() == 3);
  CHECK(lv[1].multiplicity == 2);
  CHECK(lv[1].kind == ZeroFieldKind::Doublet);
}

TEST_CASE("exactly one doublet per manifold at zero field") {
  const auto p = SpinSystemParams::defaults();
  for (auto m : {G, E}) {
    const auto e = solve(p, m, Vec3::Zero()).energies;
    int close = 0;
    for (int k = 1; k < 4; ++k) close += std::abs(e(k) - e(k - 1)) < 1e-9;
    CHECK(close == 1);
  }
  const auto g = solve(p, G, Vec3::Zero()).energies;
  CHECK(std::abs(g(2) - g(1)) < 1e-9);
  const auto x = solve(p, E, Vec3::Zero()).energies;
  CHECK(std::abs(x(1) - x(0)) < 1e-9);
}

TEST_CASE("A_perp sign invariance") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-5, 5), b(0, 300);
  for (int t = 0; t < 200; ++t) {
    auto p = SpinSystemParams::defaults();
    p.A_ground = UniaxialTensor(u(rng), u(rng), TensorUnit::GHz);
    p.g_ground = UniaxialTensor(u(rng), u(rng), TensorUnit::Dimensionless);
    auto q = p;
    q.A_ground.perpendicular = -p.A_ground.perpendicular;
    for (const Vec3& B : {Vec3(0, 0, 0), Vec3(0, 0, b(rng))}) {
      const auto a1 = solve(p, G, B).energies, a2 = solve(q, G, B).energies;
      CHECK((a1 - a2).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
}

TEST_CASE("labelled zero-field states") {
  const auto p = SpinSystemParams::defaults();
  const auto num = solve(p, G, Vec3::Zero());
  const auto lab = zero_field_states(G);
  const double r = 1 / std::sqrt(2.0);
  // |1>_g = (up,Dn - dn,Up)/sqrt2 in basis (uU, uD, dU, dD)
  CHECK(std::abs(lab[0].vector(1) - cplx(r)) < 1e-15);
  CHECK(std::abs(lab[0].vector(2) - cplx(-r)) < 1e-15);
  CHECK(std::abs(num.states.col(0).dot(lab[0].vector)) == doctest::Approx(1).epsilon(1e-9));
  CHECK(std::abs(num.states.col(3).dot(lab[3].vector)) == doctest::Approx(1).epsilon(1e-9));
  CHECK(std::abs(lab[0].vector.dot(lab[3].vector)) < 1e-15);
  // doublet comes out as (up,Up) then (dn,Dn)
  CHECK(std::abs(num.states(0, 1)) == doctest::Approx(1));
  CHECK(std::abs(num.states(3, 2)) == doctest::Approx(1));

  // excited |3>,|4> are maximally entangled: Schmidt rank 2
  const auto ex = zero_field_states(E);
  for (int k : {2, 3}) {
    Eigen::Matrix2cd M;
    M << ex[k].vector(0), ex[k].vector(1), ex[k].vector(2), ex[k].vector(3);
    Eigen::JacobiSVD<Eigen::Matrix2cd> svd(M);
    CHECK(svd.singularValues()(1) > 0.7);
  }
  // with the default (positive) excited A_perp the symmetric state is the top level
  const auto nex = solve(p, E, Vec3::Zero());
  CHECK(std::abs(nex.states.col(3).dot(ex[2].vector)) == doctest::Approx(1).epsilon(1e-9));
}

TEST_CASE("high-field product states") {
  const auto p = SpinSystemParams::defaults();
  const auto hf = high_field_states(G, 10000.0, p);
  CHECK_FALSE(hf.weak_field);
  const auto num = solve(p, G, Vec3(0, 0, 10000.0));
  for (int k = 0; k < 4; ++k) CHECK(std::abs(num.states.col(k).dot(hf.states[k].vector)) > 0.99);
  // overlaps approach 1 as the field grows
  double prev = 0;
  for (double B : {2000.0, 20000.0, 200000.0}) {
    const auto h = high_field_states(G, B, p);
    const auto n = solve(p, G, Vec3(0, 0, B));
    double worst = 1;
    for (int k = 0; k < 4; ++k) worst = std::min(worst, std::abs(n.states.col(k).dot(h.states[k].vector)));
    CHECK(worst >= prev);
    prev = worst;
  }
  CHECK(prev > 0.99999);
  CHECK(high_field_states(G, 1.0, p).weak_field);
  const auto he = high_field_states(E, 10000.0, p);
  const auto ne = solve(p, E, Vec3(0, 0, 10000.0));
  for (int k = 0; k < 4; ++k) CHECK(std::abs(ne.states.col(k).dot(he.states[k].vector)) > 0.99);
}

TEST_CASE("first-order sensitivity") {
  const auto p = SpinSystemParams::defaults();
  const auto zs = solve(p, G, Vec3::Zero());
  for (const Vec3& d : {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1), Vec3(1, 1, 1).normalized()})
    CHECK(std::abs(first_order_sensitivity(zs.state(0), d, p, G)) < 1e-10);
  // (up,Up) along c: (mu_B g_par - mu_n g_n) / 2 in GHz/T == MHz/mT
  const double oracle = 0.5 * (1.053 * 13.9962 - 0.987 * 7.6226e-3);
  CHECK(first_order_sensitivity(zs.state(1), Vec3::UnitZ(), p, G) == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(oracle == doctest::Approx(7.365238).epsilon(1e-6));
  CHECK(std::abs(first_order_sensitivity(zs.state(1), Vec3::UnitX(), p, G)) < 1e-12);
}

TEST_CASE("sensitivity equals a central-difference derivative") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1, 1), b(5, 300);
  const auto p = SpinSystemParams::defaults();
  const double h = 1e-3;
  for (int t = 0; t < 40; ++t)
    for (auto m : {G, E}) {
      const Vec3 d = Vec3(u(rng), u(rng), u(rng)).normalized();
      const Vec3 B = b(rng) * Vec3(u(rng), u(rng), u(rng)).normalized();
      const auto es = solve(p, m, B);
      const auto ep = solve(p, m, B + h * d).energies, em = solve(p, m, B - h * d).energies;
      for (int k = 0; k < 4; ++k) {
        const bool isolated = (k == 0 || es.energies(k) - es.energies(k - 1) > 1e-3) &&
                              (k == 3 || es.energies(k + 1) - es.energies(k) > 1e-3);
        if (!isolated) continue;
        const double fd = (ep(k) - em(k)) / (2 * h) * 1e3;  // GHz/mT -> MHz/mT
        CHECK(std::abs(first_order_sensitivity(es.state(k), d, p, m) - fd) < 1e-4);
      }
    }
}

TEST_CASE("magnetic dipole matrix elements") {
  const auto p = SpinSystemParams::defaults();
  const auto zs = solve(p, G, Vec3::Zero());
  const auto lab = zero_field_states(G);
  // <1|g_par S_z|4> = g_par/2 in magnitude (the raw matrix element)
  const double n14 = std::abs(transition_magnetic_dipole(lab[0].vector, lab[3].vector, Vec3::UnitZ(), p, G));
  const double oracle = std::abs(0.5 * (1.053 + PC::mu_n_over_h / PC::mu_B_over_h * 0.987) * 1.0);
  // nuclear part adds g_n mu_n/mu_B / 2 with the opposite sign on I_z
  CHECK(n14 == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(std::abs(transition_magnetic_dipole(lab[0].vector, lab[3].vector, Vec3::UnitX(), p, G)) < 1e-15);
  CHECK(std::abs(transition_magnetic_dipole(lab[0].vector, lab[3].vector, Vec3::UnitY(), p, G)) < 1e-15);
  for (const Vec3& d : {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)})
    CHECK(std::abs(transition_magnetic_dipole(zs.state(1), zs.state(2), d, p, G)) < 1e-15);
}

TEST_CASE("dipole completeness") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  const auto p = SpinSystemParams::defaults();
  for (int t = 0; t < 20; ++t) {
    const Vec3 d = Vec3(u(rng), u(rng), u(rng)).normalized();
    const auto es = solve(p, G, 200 * Vec3(u(rng), u(rng), u(rng)));
    const Mat4c O = magnetic_dipole_operator(d, p, G);
    for (int i = 0; i < 4; ++i) {
      double s = 0;
      for (int j = 0; j < 4; ++j) s += std::norm(transition_magnetic_dipole(es.state(i), es.state(j), d, p, G));
      const double direct = (es.state(i).adjoint() * O * O * es.state(i))(0).real();
      CHECK(s == doctest::Approx(direct).epsilon(1e-9));
    }
  }
}

TEST_CASE("clock transitions") {
  const auto p = SpinSystemParams::defaults();
  const auto g = find_clock_transitions(p, G, Vec3::Zero());
  REQUIRE(g.size() == 1);
  CHECK(g[0].i == 1);
  CHECK(g[0].j == 4);
  CHECK(g[0].max_sensitivity < 1e-6);
  const auto o = find_optical_clock_transitions(p, Vec3::Zero());
  CHECK(std::any_of(o.begin(), o.end(), [](const ClockPair& c) { return c.i == 4 && c.j == 4; }));
  // every flagged optical pair joins two non-degenerate levels
  for (const auto& c : o) {
    CHECK((c.i == 1 || c.i == 4));
    CHECK((c.j == 3 || c.j == 4));
  }
  CHECK(find_clock_transitions(p, G, Vec3(0, 0, 100)).empty());
}
