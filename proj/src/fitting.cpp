#include "ybspin/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ybspin {

using PC = PhysicalConstants;

namespace {
std::size_t index_of(const std::vector<std::string>& names, const std::string& n) {
  const auto it = std::find(names.begin(), names.end(), n);
  if (it == names.end()) throw ValidationError("no fit parameter named '" + n + "'");
  return static_cast<std::size_t>(it - names.begin());
}

void check_finite(const VecX& v, const char* what) {
  if (!v.allFinite()) throw ValidationError(std::string(what) + " produced a non-finite value");
}
}  // namespace

double FitResult::value(const std::string& n) const { return values(static_cast<Eigen::Index>(index_of(names, n))); }
double FitResult::error(const std::string& n) const { return errors(static_cast<Eigen::Index>(index_of(names, n))); }

MatX forward_difference_jacobian(const Model& model, const VecX& x, double rel) {
  const VecX f0 = model(x);
  MatX J(f0.size(), x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    VecX xp = x;
    const double h = rel * std::max(std::abs(x(k)), 1.0);
    xp(k) += h;
    J.col(k) = (model(xp) - f0) / h;
  }
  return J;
}

FitResult least_squares(const Model& model, const VecX& data, const VecX& initial, const LsqOptions& opt) {
  const Eigen::Index p = initial.size();
  if (!initial.allFinite()) throw ValidationError("least_squares: initial point must be finite");
  const VecX lo = opt.lower ? *opt.lower : VecX::Constant(p, -std::numeric_limits<double>::infinity());
  const VecX hi = opt.upper ? *opt.upper : VecX::Constant(p, std::numeric_limits<double>::infinity());
  if (lo.size() != p || hi.size() != p) throw ValidationError("least_squares: bound sizes do not match");
  if ((initial.array() < lo.array()).any() || (initial.array() > hi.array()).any())
    throw ValidationError("least_squares: initial point outside bounds");

  auto project = [&](VecX x) { return x.cwiseMax(lo).cwiseMin(hi); };
  auto residual = [&](const VecX& x) {
    VecX r = model(x);
    if (r.size() != data.size()) throw ValidationError("least_squares: model output size does not match data");
    check_finite(r, "model");
    return VecX(r - data);
  };
  // Shift the difference step inward when a parameter sits on an upper bound.
  auto jac = [&](const VecX& x) {
    if (opt.jacobian) return opt.jacobian(x);
    const VecX f0 = model(x);
    MatX J(f0.size(), p);
    for (Eigen::Index k = 0; k < p; ++k) {
      VecX xp = x;
      double h = opt.fd_step * std::max(std::abs(x(k)), opt.typical ? (*opt.typical)(k) : 1.0);
      if (x(k) + h > hi(k)) h = -h;
      xp(k) += h;
      J.col(k) = (model(xp) - f0) / h;
    }
    check_finite(Eigen::Map<const VecX>(J.data(), J.size()), "model Jacobian");
    return J;
  };

  FitResult res;
  res.names = opt.names;
  if (res.names.empty())
    for (Eigen::Index k = 0; k < p; ++k) res.names.push_back("p" + std::to_string(k));

  VecX x = initial;
  VecX r = residual(x);
  double cost = 0.5 * r.squaredNorm();
  res.cost_history.push_back(cost);
  MatX J = jac(x);
  VecX D = J.colwise().squaredNorm().transpose().cwiseMax(1e-300);
  double lambda = 1e-3, nu = 2.0;
  // Residuals at round-off level carry no direction; treat them as an exact fit.
  const double r_floor = 1e-12 * std::max(data.norm(), r.norm());

  auto gradient_cosine = [&](const MatX& Jm, const VecX& rv) {
    const double rn = rv.norm();
    if (rn <= r_floor) return 0.0;
    double m = 0;
    for (Eigen::Index k = 0; k < p; ++k) {
      const double cn = Jm.col(k).norm();
      if (cn > 0) m = std::max(m, std::abs(Jm.col(k).dot(rv)) / (cn * rn));
    }
    return m;
  };

  std::string why = "iteration limit reached";
  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    if (gradient_cosine(J, r) < opt.gtol) {
      why = "gradient below tolerance";
      break;
    }
    const MatX A = J.transpose() * J;
    const VecX g = J.transpose() * r;
    D = D.cwiseMax(A.diagonal());
    bool accepted = false, tiny = false;
    for (int inner = 0; inner < 60 && !accepted; ++inner) {
      MatX M = A;
      M.diagonal() += lambda * D;
      const VecX step = M.ldlt().solve(-g);
      const VecX xn = project(x + step);
      const VecX dx = xn - x;
      if (dx.norm() <= opt.xtol * (x.norm() + opt.xtol)) {
        tiny = true;
        break;
      }
      const VecX rn = residual(xn);
      const double cn = 0.5 * rn.squaredNorm();
      const double pred = -(g.dot(dx) + 0.5 * dx.dot(A * dx));
      const double rho = pred > 0 ? (cost - cn) / pred : -1;
      if (cn < cost) {
        const double rel = (cost - cn) / std::max(cost, 1e-300);
        x = xn;
        r = rn;
        cost = cn;
        res.cost_history.push_back(cost);
        lambda *= std::max(1.0 / 3.0, 1.0 - std::pow(2 * rho - 1, 3));
        nu = 2.0;
        accepted = true;
        J = jac(x);
        if (rel < opt.ftol) tiny = true;
      } else {
        lambda *= nu;
        nu *= 2;
      }
    }
    if (tiny || !accepted) {
      why = accepted ? "cost change below tolerance" : "step below tolerance";
      ++it;
      break;
    }
  }

  res.values = x;
  res.iterations = it;
  res.residual_norm = r.norm();
  const double cosine = gradient_cosine(J, r);
  Eigen::ColPivHouseholderQR<MatX> qr(J);
  qr.setThreshold(1e-12);
  const bool full_rank = qr.rank() == p;
  res.converged = full_rank && cosine < opt.gtol;
  res.message = full_rank ? why : "singular Jacobian";
  const Eigen::Index m = r.size();
  res.covariance = MatX::Constant(p, p, std::numeric_limits<double>::infinity());
  res.errors = VecX::Constant(p, std::numeric_limits<double>::infinity());
  if (full_rank && m > p) {
    const double s2 = r.squaredNorm() / static_cast<double>(m - p);
    const MatX JtJ = J.transpose() * J;
    res.covariance = s2 * JtJ.ldlt().solve(MatX::Identity(p, p));
    res.errors = res.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  } else if (full_rank) {
    res.covariance.setZero();
    res.errors.setZero();
  }
  return res;
}

// ---- Gaussian ----

double gaussian_model(double x, double c, double w, double a, double o) {
  const double u = (x - c) / w;
  return o + a * std::exp(-4 * std::log(2.0) * u * u);
}

GaussianFit fit_gaussian_line(const VecX& x, const VecX& y) {
  if (x.size() != y.size()) throw ValidationError("x and y lengths differ");
  if (x.size() < 5) throw ValidationError("Gaussian fit needs at least 5 points");
  if (!x.allFinite() || !y.allFinite()) throw ValidationError("Gaussian fit data must be finite");
  const Eigen::Index n = x.size();
  const Eigen::Index edge = std::max<Eigen::Index>(1, n / 10);
  const double o0 = 0.5 * (y.head(edge).mean() + y.tail(edge).mean());
  Eigen::Index k = 0;
  (y.array() - o0).abs().maxCoeff(&k);
  const double a0 = y(k) - o0;
  const double span = x.maxCoeff() - x.minCoeff();
  double w0 = span / 4;
  if (a0 != 0) {
    Eigen::Index l = k, r = k;
    while (l > 0 && (y(l) - o0) / a0 > 0.5) --l;
    while (r < n - 1 && (y(r) - o0) / a0 > 0.5) ++r;
    if (r > l) w0 = std::abs(x(r) - x(l));
  }
  const double dx = span / static_cast<double>(n - 1);
  w0 = std::max(w0, dx);

  // Work in coordinates centred on the initial peak and scaled by w0.
  const double xc = x(k), xs = w0;
  const double ys = std::max(std::abs(a0), y.cwiseAbs().maxCoeff() * 1e-6 + 1e-300);
  const VecX xt = (x.array() - xc) / xs;
  const VecX yt = y / ys;
  Model m = [&](const VecX& q) {
    return VecX(xt.unaryExpr([&](double v) { return gaussian_model(v, q(0), q(1), q(2), q(3)); }));
  };
  LsqOptions opt;
  opt.names = {"center", "fwhm", "amplitude", "offset"};
  opt.lower = VecX(4);
  opt.upper = VecX(4);
  *opt.lower << -1e3, 1e-6, -1e6, -1e6;
  *opt.upper << 1e3, 1e6, 1e6, 1e6;
  VecX q0(4);
  q0 << 0.0, 1.0, a0 / ys, o0 / ys;
  opt.jacobian = [&](const VecX& q) {
    MatX J(xt.size(), 4);
    const double c4 = 4 * std::log(2.0);
    for (Eigen::Index i = 0; i < xt.size(); ++i) {
      const double u = (xt(i) - q(0)) / q(1);
      const double e = std::exp(-c4 * u * u);
      J(i, 0) = q(2) * e * 2 * c4 * u / q(1);
      J(i, 1) = q(2) * e * 2 * c4 * u * u / q(1);
      J(i, 2) = e;
      J(i, 3) = 1;
    }
    return J;
  };
  auto f = least_squares(m, yt, q0, opt);

  GaussianFit g;
  const VecX s = (VecX(4) << xs, xs, ys, ys).finished();
  f.values = f.values.cwiseProduct(s);
  f.values(0) += xc;
  f.errors = f.errors.cwiseProduct(s);
  f.covariance = s.asDiagonal() * f.covariance * s.asDiagonal();
  f.residual_norm *= ys;
  g.center = f.values(0);
  g.fwhm = f.values(1);
  g.amplitude = f.values(2);
  g.offset = f.values(3);
  g.low_confidence = !f.converged || !(std::abs(g.amplitude) > 3 * f.errors(2));
  g.fit = std::move(f);
  return g;
}

// ---- echo ----

EchoFit fit_echo_decay(const VecX& tau, const VecX& I, EchoKind) {
  if (tau.size() != I.size()) throw ValidationError("tau and intensity lengths differ");
  if (tau.size() < 4) throw ValidationError("echo fit needs at least 4 points");
  if ((tau.array() < 0).any() || !tau.allFinite() || !I.allFinite()) throw ValidationError("echo data must be finite with tau >= 0");

  EchoFit e;
  // log-linear start from the positive samples
  std::vector<Eigen::Index> pos;
  for (Eigen::Index k = 0; k < I.size(); ++k)
    if (I(k) > 0) pos.push_back(k);
  double slope = 0, icpt = 0;
  if (pos.size() >= 2) {
    MatX A(pos.size(), 2);
    VecX b(pos.size());
    for (std::size_t r = 0; r < pos.size(); ++r) A(r, 0) = 1, A(r, 1) = tau(pos[r]), b(r) = std::log(I(pos[r]));
    const VecX s = A.colPivHouseholderQr().solve(b);
    icpt = s(0);
    slope = s(1);
  }
  e.fit.names = {"E0", "T2"};
  if (!(slope < 0)) {
    e.fit.converged = false;
    e.fit.message = "data do not decay";
    e.fit.values = VecX::Constant(2, std::numeric_limits<double>::quiet_NaN());
    e.fit.errors = VecX::Constant(2, std::numeric_limits<double>::infinity());
    return e;
  }
  const double T20 = -2.0 / slope, E00 = std::exp(icpt);
  // scaled parameters: E0 / E00, T2 / T20
  Model m = [&](const VecX& q) {
    return VecX((q(0) * (-2.0 * tau.array() / (q(1) * T20)).exp()).matrix());
  };
  LsqOptions opt;
  opt.names = {"E0", "T2"};
  opt.lower = VecX(2);
  opt.upper = VecX(2);
  *opt.lower << 0.0, 1e-6;
  *opt.upper << 1e6, 1e6;
  opt.jacobian = [&](const VecX& q) {
    MatX J(tau.size(), 2);
    const VecX ex = (-2.0 * tau.array() / (q(1) * T20)).exp();
    J.col(0) = ex;
    J.col(1) = (q(0) * ex.array() * 2.0 * tau.array() / (q(1) * q(1) * T20)).matrix();
    return J;
  };
  auto f = least_squares(m, I / E00, (VecX(2) << 1.0, 1.0).finished(), opt);
  const VecX s = (VecX(2) << E00, T20).finished();
  f.values = f.values.cwiseProduct(s);
  f.errors = f.errors.cwiseProduct(s);
  f.covariance = s.asDiagonal() * f.covariance * s.asDiagonal();
  f.residual_norm *= E00;
  e.E0 = f.values(0);
  e.T2 = f.values(1);
  e.T2_error = f.errors(1);
  if (!(e.T2 > 0)) f.converged = false;
  e.fit = std::move(f);
  return e;
}

// ---- SLR recovery ----

Eigen::Vector3d group_equilibrium(const Eigen::Vector4d& levels, double T) {
  const VecX p = boltzmann_populations(levels, T);
  return {p(0), p(1) + p(2), p(3)};
}

SlrRecoveryFit fit_slr_recovery(const VecX& d, const MatX& pop, const Eigen::Vector4d& levels) {
  if (d.size() < 4) throw ValidationError("recovery fit needs at least 4 delays");
  if (pop.rows() != d.size() || pop.cols() != 3) throw ValidationError("populations must be delays x 3 (n1g, n23g, n4g)");
  if ((pop.array() < 0).any() || (pop.array() > 1).any()) throw ValidationError("populations must lie in [0, 1]");
  if ((d.array() < 0).any()) throw ValidationError("delays must be >= 0");
  const Eigen::Index m = d.size();
  const double span = d.maxCoeff() - d.minCoeff();

  // temperature guess from the last sample ratio n1/n4
  double T0 = 1.0;
  const double n1 = pop(m - 1, 0), n4 = pop(m - 1, 2);
  if (n1 > n4 && n4 > 0) T0 = (levels(3) - levels(0)) * PC::h_over_kB / std::log(n1 / n4);
  T0 = std::clamp(T0, 1e-3, 50.0);

  VecX x0(7);
  x0(0) = T0;
  for (int g = 0; g < 3; ++g) {
    x0(1 + g) = pop(0, g);
    const double a = pop(0, g), b = pop(m - 1, g);
    double tr = span / 3;
    for (Eigen::Index k = 1; k < m; ++k)
      if (std::abs(pop(k, g) - b) < std::abs(a - b) / std::exp(1.0)) {
        tr = std::max(d(k) - d(0), span / static_cast<double>(m));
        break;
      }
    x0(4 + g) = tr;
  }
  const VecX scale = x0.cwiseAbs().cwiseMax(1e-6);

  VecX data(3 * m);
  for (int g = 0; g < 3; ++g) data.segment(g * m, m) = pop.col(g);
  Model model = [&](const VecX& q) {
    const VecX x = q.cwiseProduct(scale);
    const auto eq = group_equilibrium(levels, x(0));
    VecX out(3 * m);
    for (int g = 0; g < 3; ++g)
      out.segment(g * m, m) = (eq(g) + (x(1 + g) - eq(g)) * (-d.array() / x(4 + g)).exp()).matrix();
    return out;
  };
  LsqOptions opt;
  opt.names = {"T_eq", "n0_1", "n0_23", "n0_4", "T_R1", "T_R23", "T_R4"};
  opt.lower = VecX(7);
  opt.upper = VecX(7);
  *opt.lower << 1e-3, 0, 0, 0, 1e-9, 1e-9, 1e-9;
  *opt.upper << 100, 1, 1, 1, 1e12, 1e12, 1e12;
  *opt.lower = opt.lower->cwiseQuotient(scale);
  *opt.upper = opt.upper->cwiseQuotient(scale);
  const VecX start = x0.cwiseQuotient(scale).cwiseMax(*opt.lower).cwiseMin(*opt.upper);
  auto f = least_squares(model, data, start, opt);
  f.values = f.values.cwiseProduct(scale);
  f.errors = f.errors.cwiseProduct(scale);
  f.covariance = scale.asDiagonal() * f.covariance * scale.asDiagonal();

  SlrRecoveryFit r;
  r.T_eq = f.values(0);
  const auto eq = group_equilibrium(levels, r.T_eq);
  for (int g = 0; g < 3; ++g) {
    r.n0[g] = f.values(1 + g);
    r.T_R[g] = f.values(4 + g);
    r.n_eq[g] = eq(g);
    const double e = f.errors(4 + g);
    r.unidentifiable[g] = !std::isfinite(e) || e > std::abs(r.T_R[g]) || std::abs(r.n0[g] - r.n_eq[g]) < 1e-4;
  }
  r.fit = std::move(f);
  return r;
}

SlrParams fit_slr_polynomial(const VecX& T, const VecX& rates) {
  if (T.size() != rates.size() || T.size() < 3) throw ValidationError("need >= 3 (T, rate) pairs");
  if ((rates.array() <= 0).any() || (T.array() <= 0).any()) throw ValidationError("temperatures and rates must be > 0");
  MatX A(T.size(), 3);
  for (Eigen::Index k = 0; k < T.size(); ++k) {
    A(k, 0) = 1.0 / rates(k);
    A(k, 1) = T(k) * T(k) / rates(k);
    A(k, 2) = std::pow(T(k), 9) / rates(k);
  }
  // column scaling keeps the T^9 column conditioned
  const VecX cs = A.colwise().norm().transpose();
  const MatX As = A * cs.cwiseInverse().asDiagonal();
  const VecX s = As.colPivHouseholderQr().solve(VecX::Ones(T.size())).cwiseQuotient(cs);
  return {s(0), s(1), s(2)};
}

// ---- magnet sweep ----

MatX field_sweep_model(const SpinSystemParams& p, const SweepData& L, double g_par, double g_perp, double scale,
                       double amp171, double ampI0, double offset, double fwhm171, double fwhm0) {
  SpinSystemParams q = p;
  q.g_excited = UniaxialTensor(g_par, g_perp, TensorUnit::Dimensionless);
  q.nuclear_zeeman = false;
  CatalogOptions co;
  co.weighting = LineWeighting::Uniform;
  co.include_zero_spin = true;
  const Vec3 axis = L.axis.normalized();
  const double w171 = fwhm171 * 1e-3, w0 = fwhm0 * 1e-3;
  MatX out(L.current_A.size(), L.detuning_GHz.size());
  for (Eigen::Index r = 0; r < L.current_A.size(); ++r) {
    const double B = L.current_A(r) * scale * 0.1;  // G -> mT
    const auto lines = transition_catalog(q, axis * B, co);
    VecX row = VecX::Zero(L.detuning_GHz.size());
    for (const auto& l : lines) {
      const double w = l.zero_spin ? ampI0 / 4.0 : amp171 / 16.0;
      const double fw = l.zero_spin ? w0 : w171;
      const double c = l.detuning + offset;
      row += w * L.detuning_GHz.unaryExpr([&](double x) { return gaussian_unit_area(x - c, fw); });
    }
    out.row(r) = row.transpose();
  }
  return out;
}

FieldSweepFit fit_field_sweep(const std::vector<SweepData>& maps, const FieldSweepFitSpec& spec, const SpinSystemParams& p) {
  if (maps.empty()) throw ValidationError("no sweep maps given");
  bool probes_par = false, probes_perp = false;
  for (const auto& m : maps) {
    if (m.current_A.size() < 3) throw ValidationError("each sweep map needs >= 3 field values");
    if (m.absorption.rows() != m.current_A.size() || m.absorption.cols() != m.detuning_GHz.size())
      throw ValidationError("sweep absorption shape does not match its axes");
    const Vec3 a = m.axis.normalized();
    probes_par |= std::abs(a.z()) > 1e-9;
    probes_perp |= std::hypot(a.x(), a.y()) > 1e-9;
  }
  const std::size_t M = maps.size();
  // full parameter vector: g_par, g_perp, s_1..s_M, amp171, ampI0, offset
  const Eigen::Index P = static_cast<Eigen::Index>(M) + 5;
  VecX full(P);
  full(0) = spec.g_par0;
  full(1) = spec.g_perp0;
  for (std::size_t k = 0; k < M; ++k) full(2 + k) = k < spec.scale0.size() ? spec.scale0[k] : 150.0;
  full(P - 3) = spec.amp171_0;
  full(P - 2) = spec.ampI0_0;
  full(P - 1) = spec.offset0_GHz;
  std::vector<std::string> all_names{"g_e_par", "g_e_perp"};
  for (std::size_t k = 0; k < M; ++k) all_names.push_back("scale_" + std::to_string(k));
  all_names.insert(all_names.end(), {"amp171", "ampI0", "offset_GHz"});

  std::vector<Eigen::Index> freeidx;
  for (Eigen::Index k = 0; k < P; ++k)
    if (!((k == 0 && !probes_par) || (k == 1 && !probes_perp))) freeidx.push_back(k);
  const auto F = static_cast<Eigen::Index>(freeidx.size());

  // Typical magnitudes keep the scaled problem near unit size.
  VecX typ = full.cwiseAbs().cwiseMax(0.05);
  typ(P - 1) = 0.1;

  auto expand = [&](const VecX& q) {
    VecX x = full;
    for (Eigen::Index k = 0; k < F; ++k) x(freeidx[k]) = q(k) * typ(freeidx[k]);
    return x;
  };

  VecX q(F);
  for (Eigen::Index k = 0; k < F; ++k) q(k) = full(freeidx[k]) / typ(freeidx[k]);

  // Grow the current range in stages so lines never start far outside
  // their linewidth from the data.
  const double fractions[] = {0.2, 0.4, 0.7, 1.0};
  FitResult fr;
  for (double frac : fractions) {
    std::vector<SweepData> sub;
    Eigen::Index total = 0;
    for (const auto& m : maps) {
      const double imax = m.current_A.cwiseAbs().maxCoeff() * frac + 1e-12;
      std::vector<Eigen::Index> rows;
      for (Eigen::Index r = 0; r < m.current_A.size(); ++r)
        if (std::abs(m.current_A(r)) <= imax) rows.push_back(r);
      SweepData s;
      s.axis = m.axis;
      s.detuning_GHz = m.detuning_GHz;
      s.current_A.resize(static_cast<Eigen::Index>(rows.size()));
      s.absorption.resize(static_cast<Eigen::Index>(rows.size()), m.detuning_GHz.size());
      for (std::size_t r = 0; r < rows.size(); ++r) {
        s.current_A(r) = m.current_A(rows[r]);
        s.absorption.row(r) = m.absorption.row(rows[r]);
      }
      total += s.absorption.size();
      sub.push_back(std::move(s));
    }
    VecX data(total);
    Eigen::Index o = 0;
    for (const auto& s : sub) {
      const MatX At = s.absorption.transpose();
      data.segment(o, At.size()) = Eigen::Map<const VecX>(At.data(), At.size());
      o += At.size();
    }
    Model model = [&](const VecX& qq) {
      const VecX x = expand(qq);
      VecX out(total);
      Eigen::Index off = 0;
      for (std::size_t k = 0; k < sub.size(); ++k) {
        const MatX S = field_sweep_model(p, sub[k], x(0), x(1), x(2 + k), x(P - 3), x(P - 2), x(P - 1),
                                         spec.fwhm_171_MHz, spec.fwhm_zero_spin_MHz)
                           .transpose();
        out.segment(off, S.size()) = Eigen::Map<const VecX>(S.data(), S.size());
        off += S.size();
      }
      return out;
    };
    LsqOptions opt = spec.lsq;
    for (auto k : freeidx) opt.names.push_back(all_names[k]);
    opt.fd_step = std::max(opt.fd_step, 1e-7);
    fr = least_squares(model, data, q, opt);
    q = fr.values;
  }

  FieldSweepFit out;
  const VecX x = expand(q);
  FitResult f = fr;
  f.values = x;
  f.names = all_names;
  VecX err = VecX::Zero(P);
  MatX cov = MatX::Zero(P, P);
  for (Eigen::Index a = 0; a < F; ++a) {
    err(freeidx[a]) = fr.errors(a) * typ(freeidx[a]);
    for (Eigen::Index b = 0; b < F; ++b)
      cov(freeidx[a], freeidx[b]) = fr.covariance(a, b) * typ(freeidx[a]) * typ(freeidx[b]);
  }
  f.errors = err;
  f.covariance = cov;
  out.g_par = x(0);
  out.g_perp = x(1);
  for (std::size_t k = 0; k < M; ++k) out.scale_G_per_A.push_back(x(2 + k));
  out.amp171 = x(P - 3);
  out.ampI0 = x(P - 2);
  out.offset_GHz = x(P - 1);
  out.g_par_free = probes_par;
  out.g_perp_free = probes_perp;
  out.fit = std::move(f);
  return out;
}

// ---- photometry ----

double local_field_factor(double n) { return (n * n + 2) * (n * n + 2) / 9.0; }

double oscillator_strength(const std::vector<Spectrum>& spectra, const std::vector<double>& mult, double N_cm3, double n) {
  if (!(N_cm3 > 0)) throw DomainError("ion density must be > 0");
  if (!(n > 0)) throw DomainError("refractive index must be > 0");
  if (spectra.size() != mult.size() || spectra.empty()) throw ValidationError("one multiplicity per spectrum required");
  // SI: alpha in m^-1, frequency in Hz, N in m^-3. The prefactor
  // 4 pi eps0 m_e c / (pi e^2) has units s m^-2, so f is dimensionless.
  const double pref = 4 * PC::pi * PC::eps0 * PC::m_e * PC::c / (PC::pi * PC::e * PC::e);
  const double N = N_cm3 * 1e6;
  double sum = 0;
  for (std::size_t k = 0; k < spectra.size(); ++k) {
    if (mult[k] < 0) throw ValidationError("multiplicities must be >= 0");
    sum += mult[k] * integrate(spectra[k]) * 100.0 * 1e9;
  }
  return pref / (3 * N) * sum / local_field_factor(n);
}

Spectrum calibrated_absorption(const SpinSystemParams& p, Polarization pol, double peak, const Grid& grid) {
  CatalogOptions co;
  co.polarization = pol;
  auto s = synthesize_spectrum(transition_catalog(p, Vec3::Zero(), co), p.fwhm_optical_MHz, grid);
  const double mx = s.absorption.maxCoeff();
  if (!(mx > 0)) throw DomainError("spectrum has no absorption to calibrate");
  s.absorption *= peak / mx;
  return s;
}

SpontaneousEmission spontaneous_rate_and_beta(double f, double nu, double n, double T1) {
  if (!(f > 0) || !(nu > 0) || !(n > 0) || !(T1 > 0)) throw DomainError("spontaneous rate needs positive inputs");
  const double g = 2 * PC::pi * PC::e * PC::e * nu * nu / (PC::eps0 * PC::m_e * std::pow(PC::c, 3)) * n * n *
                   local_field_factor(n) * f;
  return {g, g * T1};
}

}  // namespace ybspin
