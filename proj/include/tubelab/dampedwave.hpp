#ifndef TUBELAB_DAMPEDWAVE_HPP
#define TUBELAB_DAMPEDWAVE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <Eigen/LU>

#include "tubelab/common.hpp"
#include "tubelab/damping.hpp"
#include "tubelab/fit.hpp"
#include "tubelab/parallel.hpp"
#include "tubelab/spectral.hpp"

namespace tubelab {

/// Galerkin state of u_tt - Delta u + b u_t = 0 in basis coordinates.
struct WaveState {
  double t = 0.0;
  VectorXcd u;
  VectorXcd v;

  static WaveState zeros(std::size_t n) {
    const auto k = static_cast<Eigen::Index>(n);
    return {0.0, VectorXcd::Zero(k), VectorXcd::Zero(k)};
  }

  void require_finite() const {
    if (!u.allFinite() || !v.allFinite()) throw DomainError("wave state has non-finite coefficients");
  }
};

/// E = <Lambda u, u> + |v|^2.
inline double energy(const WaveState& s, const BlockedSystem& sys) {
  if (static_cast<std::size_t>(s.u.size()) != sys.size() || static_cast<std::size_t>(s.v.size()) != sys.size()) {
    throw DomainError("energy: state size does not match the system");
  }
  CompensatedSum<double> acc;
  for (std::size_t k = 0; k < sys.blocks.size(); ++k) {
    for (std::size_t a = 0; a < sys.blocks[k].size(); ++a) {
      const auto j = static_cast<Eigen::Index>(sys.blocks[k][a]);
      acc.add(sys.lambda2[k][static_cast<Eigen::Index>(a)] * std::norm(s.u[j]) + std::norm(s.v[j]));
    }
  }
  return acc.value();
}

/// Data norms (sum (1 + lambda^2)^s |c|^2)^{1/2} using the system eigenvalues.
inline double system_sobolev_norm(const VectorXcd& c, const BlockedSystem& sys, double s) {
  CompensatedSum<double> acc;
  for (std::size_t k = 0; k < sys.blocks.size(); ++k) {
    for (std::size_t a = 0; a < sys.blocks[k].size(); ++a) {
      const auto j = static_cast<Eigen::Index>(sys.blocks[k][a]);
      acc.add(std::pow(1.0 + sys.lambda2[k][static_cast<Eigen::Index>(a)], s) * std::norm(c[j]));
    }
  }
  return std::sqrt(acc.value());
}

struct EnergyTrace {
  std::vector<double> times;
  std::vector<double> energy;
  std::vector<double> dissipation_rate;  // 2<Bv, v> at each sample
  std::vector<double> dissipated;        // cumulative midpoint quadrature of 2<Bv, v> dt
  double u0_h2 = 0.0;
  double u1_h1 = 0.0;
  std::string damping;
  double kappa = 0.0;
  double max_step_increase = 0.0;  // largest E_{n+1} - E_n relative to E_0
  WaveState final_state;

  [[nodiscard]] double data_norm() const { return u0_h2 + u1_h1; }
};

struct SimulationOptions {
  /// dt * sqrt(max lambda^2) allowed; the scheme is A-stable, so this only guards phase accuracy
  double stability_margin = 2.0;
  /// relative energy growth per step treated as an instability
  double growth_tolerance = 1e-6;
  std::string damping = "custom";
  double kappa = 0.0;
};

namespace detail {

// Cayley propagator (I - dt/2 A)^{-1} (I + dt/2 A), A = [[0, I], [-Lambda, -B]]
inline MatrixXcd cayley_block(const VectorXd& lambda2, const MatrixXcd& B, double dt) {
  const Eigen::Index d = lambda2.size();
  MatrixXcd A = MatrixXcd::Zero(2 * d, 2 * d);
  A.topRightCorner(d, d).setIdentity();
  A.bottomLeftCorner(d, d).diagonal() = (-lambda2).cast<cplx>();
  A.bottomRightCorner(d, d) = -B;
  const MatrixXcd I = MatrixXcd::Identity(2 * d, 2 * d);
  const MatrixXcd minus = I - 0.5 * dt * A;
  const MatrixXcd plus = I + 0.5 * dt * A;
  return minus.partialPivLu().solve(plus);
}

struct Stepper {
  const BlockedSystem& sys;
  std::vector<MatrixXcd> prop;

  Stepper(const BlockedSystem& s, double dt) : sys(s), prop(s.blocks.size()) {
    parallel_for(sys.blocks.size(), [&](std::size_t k) { prop[k] = cayley_block(sys.lambda2[k], sys.gram[k], dt); });
  }

  // advances in place; returns 2<B v_mid, v_mid>
  double step(VectorXcd& u, VectorXcd& v) const {
    double rate = 0.0;
    for (std::size_t k = 0; k < sys.blocks.size(); ++k) {
      const auto d = static_cast<Eigen::Index>(sys.blocks[k].size());
      VectorXcd y(2 * d);
      y.head(d) = sys.restrict(u, k);
      y.tail(d) = sys.restrict(v, k);
      const VectorXcd vold = y.tail(d);
      y = prop[k] * y;
      const VectorXcd vmid = 0.5 * (vold + y.tail(d));
      rate += 2.0 * std::real(vmid.dot(sys.gram[k] * vmid));
      sys.scatter(y.head(d), k, u);
      sys.scatter(y.tail(d), k, v);
    }
    return rate;
  }
};

inline double dissipation_rate(const VectorXcd& v, const BlockedSystem& sys) {
  double rate = 0.0;
  for (std::size_t k = 0; k < sys.blocks.size(); ++k) {
    const VectorXcd w = sys.restrict(v, k);
    rate += 2.0 * std::real(w.dot(sys.gram[k] * w));
  }
  return rate;
}

inline double max_lambda2(const BlockedSystem& sys) {
  double m = 0.0;
  for (const auto& l : sys.lambda2) {
    if (l.size() > 0) m = std::max(m, l.maxCoeff());
  }
  return m;
}

}  // namespace detail

/// Advances by `steps` implicit midpoint steps of size dt (dt may be negative).
inline WaveState propagate(const WaveState& s0, const BlockedSystem& sys, std::size_t steps, double dt) {
  if (!(std::abs(dt) > 0.0) || !std::isfinite(dt)) throw DomainError("propagate: dt must be finite and nonzero");
  if (static_cast<std::size_t>(s0.u.size()) != sys.size()) throw DomainError("propagate: state size mismatch");
  s0.require_finite();
  const detail::Stepper st(sys, dt);
  WaveState s = s0;
  for (std::size_t i = 0; i < steps; ++i) st.step(s.u, s.v);
  s.t = s0.t + static_cast<double>(steps) * dt;
  return s;
}

/// Integrates (u, v)' = (v, -Lambda u - B v) with the implicit midpoint rule,
/// sampling every `stride` steps. T is rounded to a whole number of steps.
inline EnergyTrace simulate(const WaveState& initial, const BlockedSystem& sys, double T, double dt,
                            std::size_t stride = 1, const SimulationOptions& opt = {}) {
  if (!(T > 0.0)) throw DomainError("simulate: T must be positive");
  if (!(dt > 0.0) || dt > T) throw DomainError("simulate: dt must lie in (0, T]");
  if (stride == 0) throw DomainError("simulate: stride must be positive");
  if (static_cast<std::size_t>(initial.u.size()) != sys.size() || static_cast<std::size_t>(initial.v.size()) != sys.size()) {
    throw DomainError("simulate: state size does not match the system");
  }
  initial.require_finite();
  if (dt * std::sqrt(detail::max_lambda2(sys)) > opt.stability_margin) {
    throw DomainError("simulate: dt * max frequency " + format_double(dt * std::sqrt(detail::max_lambda2(sys))) +
                      " exceeds the margin " + format_double(opt.stability_margin));
  }
  const auto steps = static_cast<std::size_t>(std::llround(T / dt));
  const detail::Stepper st(sys, dt);

  EnergyTrace tr;
  tr.damping = opt.damping;
  tr.kappa = opt.kappa;
  tr.u0_h2 = system_sobolev_norm(initial.u, sys, 2.0);
  tr.u1_h1 = system_sobolev_norm(initial.v, sys, 1.0);

  WaveState s = initial;
  double E = energy(s, sys);
  const double E0 = E;
  const double scale = E0 > 0.0 ? E0 : 1.0;
  double spent = 0.0;
  auto record = [&] {
    tr.times.push_back(s.t);
    tr.energy.push_back(E);
    tr.dissipation_rate.push_back(detail::dissipation_rate(s.v, sys));
    tr.dissipated.push_back(spent);
  };
  record();
  for (std::size_t i = 1; i <= steps; ++i) {
    spent += dt * st.step(s.u, s.v);
    s.t = initial.t + static_cast<double>(i) * dt;
    const double En = energy(s, sys);
    if (!std::isfinite(En)) throw NumericalError("simulate: energy became non-finite");
    const double inc = (En - E) / scale;
    tr.max_step_increase = std::max(tr.max_step_increase, inc);
    if (inc > opt.growth_tolerance) {
      throw NumericalError("simulate: energy grew by " + format_double(inc) + " (relative) in one step at t = " +
                           format_double(s.t));
    }
    E = En;
    if (i % stride == 0 || i == steps) record();
  }
  tr.final_state = s;
  return tr;
}

struct DecayCertificate {
  double kappa = 0.0;
  double t0 = 0.0;
  double T = 0.0;
  double C_star = 0.0;
  double t_star = 0.0;  // where the sup is attained
  double slope = std::numeric_limits<double>::quiet_NaN();
  std::size_t samples = 0;
};

/// C* = sup_{t >= t0} E^{1/2} t^{1/kappa} / (|u0|_{H^2} + |u1|_{H^1}) and the
/// log-log slope of E^{1/2} on [t0, T].
inline DecayCertificate decay_fit(const EnergyTrace& tr, double kappa, double t0) {
  if (!(kappa > 0.0)) throw DomainError("decay_fit: kappa must be positive");
  if (tr.times.empty() || !(t0 < tr.times.back())) throw DomainError("decay_fit: t0 must lie before the last sample");
  if (!(tr.data_norm() > 0.0)) throw DomainError("decay_fit: zero initial data");
  DecayCertificate c;
  c.kappa = kappa;
  c.t0 = t0;
  c.T = tr.times.back();
  std::vector<double> x;
  std::vector<double> y;
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    const double t = tr.times[i];
    if (t < t0 || !(t > 0.0)) continue;
    const double a = std::sqrt(std::max(tr.energy[i], 0.0));
    const double r = a * std::pow(t, 1.0 / kappa) / tr.data_norm();
    ++c.samples;
    if (r > c.C_star) {
      c.C_star = r;
      c.t_star = t;
    }
    if (a > 0.0) {
      x.push_back(t);
      y.push_back(a);
    }
  }
  if (c.samples == 0) throw DomainError("decay_fit: no samples in [t0, T]");
  if (x.size() >= 3) c.slope = fit_power_law(x, y).slope;
  return c;
}

/// Smooth window around a target frequency with seeded random coefficients,
/// scaled so that |u0|_{H^2} + |u1|_{H^1} = 1.
inline WaveState windowed_initial_data(const std::shared_ptr<const SpectralBasis>& basis, const WindowSpec& w,
                                       std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  ModeVector u{basis, VectorXcd(static_cast<Eigen::Index>(basis->size()))};
  ModeVector v = u;
  for (Eigen::Index j = 0; j < u.coeffs.size(); ++j) {
    u.coeffs[j] = cplx(g(rng), g(rng));
    v.coeffs[j] = cplx(g(rng), g(rng));
  }
  u = window_project(u, w);
  v = window_project(v, w);
  const double norm = sobolev_norm(u, 2.0) + sobolev_norm(v, 1.0);
  if (!(norm > 0.0)) throw DomainError("windowed_initial_data: the window holds no modes");
  return {0.0, u.coeffs / norm, v.coeffs / norm};
}

struct StabiReport {
  EnergyTrace trace;
  DecayCertificate certificate;
  double kappa0 = 0.0;
  /// no patch vanishes (constant patches only): certified against kappa = 1 instead
  bool geometric_control = false;
};

/// Composite damping run certified against 1/kappa0, kappa0 the largest patch order.
inline StabiReport stabi_scenario(const DampingProfile& b, const std::shared_ptr<const SpectralBasis>& basis,
                                  const WaveState& data, double T, double dt, double t0, std::size_t stride = 1,
                                  const SystemOptions& sopt = {}, SimulationOptions opt = {}) {
  const BlockedSystem sys = damping_system(b, basis, sopt);
  StabiReport r;
  r.kappa0 = b.kappa_max();
  r.geometric_control = !(r.kappa0 > 0.0);
  const double k = r.geometric_control ? 1.0 : r.kappa0;
  opt.damping = to_string(b.form);
  opt.kappa = k;
  r.trace = simulate(data, sys, T, dt, stride, opt);
  r.certificate = decay_fit(r.trace, k, t0);
  return r;
}

}  // namespace tubelab

#endif  // TUBELAB_DAMPEDWAVE_HPP
