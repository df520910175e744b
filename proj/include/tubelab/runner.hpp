#ifndef TUBELAB_RUNNER_HPP
#define TUBELAB_RUNNER_HPP

#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "tubelab/concentration.hpp"
#include "tubelab/config.hpp"
#include "tubelab/dampedwave.hpp"
#include "tubelab/oscint.hpp"
#include "tubelab/report.hpp"
#include "tubelab/resolvent.hpp"

namespace tubelab {

namespace detail {

inline std::vector<int> to_ints(const std::vector<long long>& v) { return {v.begin(), v.end()}; }

inline std::vector<std::size_t> to_counts(const std::vector<long long>& v, const std::string& key) {
  std::vector<std::size_t> out;
  for (auto x : v) {
    if (x < 1) throw ConfigError("key '" + key + "': grid counts must be positive");
    out.push_back(static_cast<std::size_t>(x));
  }
  return out;
}

inline std::int64_t as_int(std::size_t v) { return static_cast<std::int64_t>(v); }

inline ManifoldModel manifold_of(const ExperimentConfig& c) {
  const auto& m = c.at("manifold");
  if (m == "sphere2") return ManifoldModel::sphere(2);
  return ManifoldModel::torus(m == "torus2" ? 2 : 1);
}

inline SubmanifoldSpec submanifold_of(const ExperimentConfig& c) {
  const auto& s = c.at("damping.submanifold");
  if (s == "equator") return SubmanifoldSpec::great_subsphere(1);
  if (s == "poles") return SubmanifoldSpec::pole_pair();
  if (s == "circle_x0") return SubmanifoldSpec::sub_torus({true, false});
  return SubmanifoldSpec::sub_torus({true});
}

inline DampingProfile damping_of(const ExperimentConfig& c) {
  const auto& form = c.at("damping.form");
  const double amp = c.real("damping.amplitude");
  if (form == "constant") return DampingProfile::constant(amp);
  const auto sub = submanifold_of(c);
  const double kappa = c.real("damping.kappa");
  auto b = form == "surrogate" ? DampingProfile::smooth_surrogate(sub, kappa, amp)
                               : DampingProfile::distance_power(sub, kappa, amp);
  b.require_compatible(manifold_of(c));
  return b;
}

/// Smallest truncation whose basis is complete below `frequency`.
inline int truncation_for(const ManifoldModel& m, double frequency) {
  int t = 1;
  while (true) {
    const double below = m.is_sphere() ? std::sqrt(double(t + 1) * (t + 2))
                                       : 2.0 * pi * (t + 1) / *std::max_element(m.periods().begin(), m.periods().end());
    if (below >= frequency) return t;
    ++t;
  }
}

inline Curve curve(std::string name, std::string xl, std::string yl, std::vector<double> x, std::vector<double> y) {
  return {std::move(name), std::move(xl), std::move(yl), std::move(x), std::move(y)};
}

inline bool within(double v, double lo, double hi) { return v >= lo && v <= hi; }

inline void add_sample_rows(RunReport& r, std::int64_t j, const std::vector<ConcentrationSample>& s, double minimal_C) {
  for (const auto& x : s) {
    r.add_row({j, x.h, x.alpha, x.tube_norm, x.full_norm, x.tube_norm * x.tube_norm, minimal_C});
  }
}

inline ScalingFit squared_fit(const std::vector<ConcentrationSample>& s) {
  std::vector<double> a;
  std::vector<double> t;
  for (const auto& x : s) {
    a.push_back(x.alpha);
    t.push_back(x.tube_norm * x.tube_norm);
  }
  return fit_power_law(a, t);
}

inline void run_concentration(const ExperimentConfig& c, RunReport& r) {
  const auto family = c.at("concentration.family");
  const auto alphas = c.reals("concentration.alpha_grid");
  const auto js = to_ints(c.integers("concentration.j_grid"));
  if (family == "highest_weight") {
    const auto nlat = static_cast<std::size_t>(c.integer("concentration.nlat"));
    const auto rep = sphere_saturation_check(js, SaturationRegime::AlphaFixed, alphas, nlat);
    r.columns = {"j", "h", "alpha", "tube_norm", "full_norm", "tube_norm_squared", "minimal_C"};
    bool norm_ok = true;
    bool sq_ok = true;
    for (const auto& s : rep.highest_weight) {
      add_sample_rows(r, s.j, s.samples, s.minimal_C);
      const auto tag = "j" + std::to_string(s.j);
      r.fits.push_back({"tube_norm_" + tag, s.norm_fit});
      r.fits.push_back({"tube_norm_squared_" + tag, s.squared_fit});
      r.certificates.emplace_back("minimal_C_" + tag, s.minimal_C);
      norm_ok = norm_ok && within(s.norm_fit.slope, 0.35, 0.65);
      sq_ok = sq_ok && within(s.squared_fit.slope, 0.85, 1.15);
      std::vector<double> a;
      std::vector<double> t;
      for (const auto& x : s.samples) {
        a.push_back(x.alpha);
        t.push_back(x.tube_norm);
      }
      r.curves.push_back(curve("tube_norm_" + tag, "alpha", "tube_norm", a, t));
    }
    r.certificates.emplace_back("minimal_C_spread", rep.spread());
    r.verdicts.emplace_back("norm_slope_in_0.35_0.65", norm_ok);
    r.verdicts.emplace_back("squared_slope_in_0.85_1.15", sq_ok);
    r.verdicts.emplace_back("minimal_C_spread_below_2", rep.spread() < 2.0);
  } else if (family == "zonal") {
    const auto nlat = static_cast<std::size_t>(c.integer("concentration.nlat"));
    const auto rep = sphere_saturation_check(js, SaturationRegime::AlphaEqualsSqrtH, alphas, nlat);
    r.columns = {"j", "h", "tube_norm_squared", "ratio"};
    std::vector<double> hs;
    std::vector<double> ratios;
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& z : rep.zonal) {
      r.add_row({std::int64_t{z.j}, z.h, z.tube_norm_squared, z.ratio});
      hs.push_back(z.h);
      ratios.push_back(z.ratio);
      lo = std::min(lo, z.ratio);
    }
    r.curves.push_back(curve("ratio", "h", "ratio", hs, ratios));
    r.certificates.emplace_back("min_ratio", lo);
    r.certificates.emplace_back("ratio_spread", rep.spread());
    r.verdicts.emplace_back("ratio_positive", lo > 0.0);
    r.verdicts.emplace_back("ratio_spread_below_3", rep.spread() < 3.0);
  } else {
    const auto m = ManifoldModel::torus(2);
    const auto wv = to_ints(c.integers("concentration.wave_vector"));
    if (wv.size() != 2) throw ConfigError("key 'concentration.wave_vector': expected two integers on T^2");
    const int K = std::max(std::abs(wv[0]), std::abs(wv[1])) + 1;
    const auto basis = std::make_shared<const SpectralBasis>(torus_basis(m, K));
    const auto j = basis->find_torus(wv);
    if (!j || basis->entries()[*j].frequency == 0.0) throw ConfigError("key 'concentration.wave_vector': must be nonzero");
    const double h = 1.0 / basis->entries()[*j].frequency;
    const auto grid = build_grid(m, {to_counts(c.integers("concentration.torus_grid"), "concentration.torus_grid")});
    const auto rep = concentration_check(ModeVector::unit(basis, *j), h, SubmanifoldSpec::sub_torus({true, false}), alphas, grid);
    r.columns = {"j", "h", "alpha", "tube_norm", "full_norm", "tube_norm_squared", "minimal_C"};
    add_sample_rows(r, 0, rep.samples, rep.minimal_C);
    const auto sq = squared_fit(rep.samples);
    if (!rep.fits.empty()) r.fits.push_back({"tube_norm", rep.fits.front()});
    r.fits.push_back({"tube_norm_squared", sq});
    r.certificates.emplace_back("minimal_C", rep.minimal_C);
    std::vector<double> a;
    std::vector<double> t;
    for (const auto& x : rep.samples) {
      a.push_back(x.alpha);
      t.push_back(x.tube_norm * x.tube_norm);
    }
    r.curves.push_back(curve("tube_norm_squared", "alpha", "tube_norm_squared", a, t));
    r.verdicts.emplace_back("squared_slope_at_least_0.9", sq.slope >= 0.9);
    r.verdicts.emplace_back("minimal_C_finite", std::isfinite(rep.minimal_C));
  }
}

inline void run_projector(const ExperimentConfig& c, RunReport& r) {
  const auto m = ManifoldModel::torus(2);
  const double lambda = c.real("projector.lambda");
  if (!(lambda > 0.0)) throw ConfigError("key 'projector.lambda': must be positive");
  const auto trials = c.integer("projector.trials");
  if (trials < 1) throw ConfigError("key 'projector.trials': must be at least 1");
  int K = static_cast<int>(c.integer("projector.truncation"));
  if (K <= 0) K = truncation_for(m, lambda + 1.0);
  const auto basis = std::make_shared<const SpectralBasis>(torus_basis(m, K));
  const auto grid = build_grid(m, {to_counts(c.integers("projector.grid"), "projector.grid")});
  const auto alphas = c.reals("projector.alpha_grid");
  const auto rep = projector_concentration_check(basis, lambda, SubmanifoldSpec::sub_torus({true, false}), alphas, grid,
                                                 static_cast<std::size_t>(trials), r.seed);

  // algebraic properties on the same seeded fields
  const auto w = WindowSpec::sharp(lambda);
  double idem = 0.0;
  double orth = 0.0;
  for (long long t = 0; t < trials; ++t) {
    const auto u = random_mode_vector(basis, r.seed + static_cast<std::uint64_t>(t));
    const auto p = window_project(u, w);
    const auto pp = window_project(p, w);
    const double scale = u.norm() * u.norm();
    idem = std::max(idem, (pp.coeffs - p.coeffs).norm() / std::max(p.norm(), 1e-300));
    orth = std::max(orth, std::abs(p.coeffs.dot(u.coeffs - p.coeffs)) / scale);
  }

  r.columns = {"trial", "h", "alpha", "tube_norm", "full_norm", "tube_norm_squared", "minimal_C"};
  for (std::size_t t = 0; t < rep.trials.size(); ++t) add_sample_rows(r, as_int(t), rep.trials[t].samples, rep.trials[t].minimal_C);
  for (std::size_t t = 0; t < rep.trials.size(); ++t) {
    if (!rep.trials[t].fits.empty()) r.fits.push_back({"tube_norm_trial" + std::to_string(t), rep.trials[t].fits.front()});
  }
  r.certificates.emplace_back("window_dimension", static_cast<double>(rep.window_dimension));
  r.certificates.emplace_back("truncation", static_cast<double>(K));
  r.certificates.emplace_back("worst_C", rep.worst_C);
  r.certificates.emplace_back("min_slope", rep.min_slope);
  r.certificates.emplace_back("idempotence_defect", idem);
  r.certificates.emplace_back("orthogonality_defect", orth);
  r.verdicts.emplace_back("window_nonempty", !rep.trivial);
  r.verdicts.emplace_back("idempotent_1e-12", idem < 1e-12);
  r.verdicts.emplace_back("orthogonal_1e-12", orth < 1e-12);
  r.verdicts.emplace_back("worst_C_finite", std::isfinite(rep.worst_C) && rep.worst_C > 0.0);
  r.verdicts.emplace_back("min_slope_at_least_0.4", rep.min_slope >= 0.4);
}

inline void run_resolvent(const ExperimentConfig& c, RunReport& r) {
  const auto m = manifold_of(c);
  const auto b = damping_of(c);
  const auto hs = c.reals("resolvent.h_grid");
  require_h_grid(hs);
  const bool constant = b.form == DampingForm::Constant;
  const double kappa = constant ? 0.0 : c.real("damping.kappa");
  ResolventOptions opt;
  // resonance snapping and the quasimode Rayleigh bound are defined on spheres only
  opt.snap_to_resonance = c.flag("resolvent.snap") && m.is_sphere();
  opt.rayleigh = c.flag("resolvent.rayleigh") && opt.snap_to_resonance;
  opt.truncation_check = c.flag("resolvent.truncation_check");
  opt.spread_bound = c.real("resolvent.spread_bound");
  opt.rayleigh_factor = c.real("resolvent.rayleigh_factor");
  int truncation = static_cast<int>(c.integer("resolvent.truncation"));
  if (truncation <= 0) {
    double h_min = hs.back();
    if (opt.snap_to_resonance) h_min = 1.0 / std::sqrt(HighestWeight{resonant_degree(h_min, m.dim()), m.dim()}.eigenvalue());
    truncation = truncation_for(m, 2.0 / h_min);
  }
  const auto sw = resolvent_sweep(b, m, truncation, hs, kappa, opt);

  r.columns = {"h_nominal", "h", "j", "sigma_min", "lower_bound", "rayleigh_upper", "certificate"};
  std::vector<double> h;
  std::vector<double> s;
  for (const auto& x : sw.samples) {
    r.add_row({x.h_nominal, x.h, std::int64_t{x.j}, x.sigma_min, x.lower_bound, x.rayleigh_upper, x.certificate});
    h.push_back(x.h);
    s.push_back(x.sigma_min);
  }
  r.curves.push_back(curve("sigma_min", "h", "sigma_min", h, s));
  if (sw.fit.count > 0) r.fits.push_back({"sigma_min", sw.fit});
  r.certificates.emplace_back("slope", sw.fit.count > 0 ? sw.fit.slope : std::numeric_limits<double>::quiet_NaN());
  r.certificates.emplace_back("certificate_c", sw.certificate_c);
  r.certificates.emplace_back("certificate_spread", sw.certificate_spread);
  r.certificates.emplace_back("truncation", static_cast<double>(truncation));
  r.certificates.emplace_back("basis_size", static_cast<double>(sw.basis_size));
  if (opt.truncation_check) r.certificates.emplace_back("truncation_change", sw.truncation_change);
  r.verdicts.emplace_back("lower_bound", sw.lower_bound_ok);
  if (opt.truncation_check) r.verdicts.emplace_back("truncation_stable", sw.truncation_ok);
  if (constant) {
    // diagonal system: sigma_min = min_j |h^2 lambda_j^2 - 1 + i h c|
    const auto basis = make_basis(m, truncation);
    double err = 0.0;
    for (const auto& x : sw.samples) {
      double oracle = std::numeric_limits<double>::infinity();
      for (const auto& e : basis->entries()) {
        oracle = std::min(oracle, std::abs(cplx(x.h * x.h * e.eigenvalue - 1.0, x.h * b.amplitude)));
      }
      err = std::max(err, std::abs(x.sigma_min - oracle));
    }
    r.certificates.emplace_back("closed_form_error", err);
    r.verdicts.emplace_back("closed_form_1e-10", err < 1e-10);
  } else {
    r.verdicts.emplace_back("certificate_spread", sw.certificate_pass);
    if (opt.rayleigh) r.verdicts.emplace_back("rayleigh_within_factor", sw.rayleigh_ok);
    if (m.is_sphere() && sw.fit.count > 0) {
      r.verdicts.emplace_back("slope_near_1_plus_kappa", std::abs(sw.fit.slope - (1.0 + kappa)) <= 0.2);
    }
  }
}

inline EnergyTrace truncate_trace(const EnergyTrace& tr, double T) {
  EnergyTrace out = tr;
  std::size_t n = 0;
  while (n < tr.times.size() && tr.times[n] <= T * (1.0 + 1e-12)) ++n;
  out.times.resize(n);
  out.energy.resize(n);
  out.dissipation_rate.resize(n);
  out.dissipated.resize(n);
  return out;
}

inline void run_dampedwave(const ExperimentConfig& c, RunReport& r) {
  const auto m = manifold_of(c);
  const auto b = damping_of(c);
  const int K = static_cast<int>(c.integer("wave.truncation"));
  if (K < 1) throw ConfigError("key 'wave.truncation': must be at least 1");
  const double T = c.real("wave.T");
  const double dt = c.real("wave.dt");
  const double t0 = c.real("wave.t0");
  const auto stride = c.integer("wave.stride");
  if (stride < 1) throw ConfigError("key 'wave.stride': must be at least 1");
  if (!(t0 > 0.0) || !(2.0 * t0 < T)) throw ConfigError("key 'wave.t0': need 0 < t0 < T/2");
  double kappa = c.real("wave.kappa");
  if (!(kappa > 0.0)) kappa = b.form == DampingForm::Constant ? 1.0 : c.real("damping.kappa");
  const auto basis = make_basis(m, K);
  const auto sys = damping_system(b, basis);
  const auto data = windowed_initial_data(
      basis, WindowSpec::smooth(c.real("wave.window_center"), c.real("wave.window_scale")), r.seed);
  SimulationOptions opt;
  opt.damping = to_string(b.form);
  opt.kappa = kappa;
  const auto tr = simulate(data, sys, T, dt, static_cast<std::size_t>(stride), opt);
  const auto full = decay_fit(tr, kappa, t0);
  const auto half = decay_fit(truncate_trace(tr, 0.5 * T), kappa, t0);

  r.columns = {"t", "energy", "dissipated", "sqrtE_t_pow"};
  std::vector<double> ts;
  std::vector<double> es;
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    const double t = tr.times[i];
    const double q = std::sqrt(std::max(tr.energy[i], 0.0)) * std::pow(t, 1.0 / kappa) / tr.data_norm();
    r.add_row({t, tr.energy[i], tr.dissipated[i], q});
    ts.push_back(t);
    es.push_back(tr.energy[i]);
  }
  r.curves.push_back(curve("energy", "t", "energy", ts, es));
  const double ratio = half.C_star > 0.0 ? full.C_star / half.C_star : std::numeric_limits<double>::infinity();
  r.certificates.emplace_back("kappa", kappa);
  r.certificates.emplace_back("C_star_half", half.C_star);
  r.certificates.emplace_back("C_star", full.C_star);
  r.certificates.emplace_back("t_star", full.t_star);
  r.certificates.emplace_back("C_star_ratio", ratio);
  r.certificates.emplace_back("decay_slope", full.slope);
  r.certificates.emplace_back("max_step_increase", tr.max_step_increase);
  r.certificates.emplace_back("data_norm", tr.data_norm());
  r.verdicts.emplace_back("energy_monotone_1e-10", tr.max_step_increase <= 1e-10);
  r.verdicts.emplace_back("C_star_ratio_below_2", ratio < 2.0 && ratio > 0.5);
}

inline void run_oscint(const ExperimentConfig& c, RunReport& r) {
  const int d = static_cast<int>(c.integer("oscint.dim"));
  if (d < 1) throw ConfigError("key 'oscint.dim': must be at least 1");
  const bool bilinear = c.at("oscint.phase") == "bilinear";
  const auto phi = bilinear ? PhaseFunction::bilinear(d) : PhaseFunction::regularized_distance(d, c.real("oscint.delta"));
  auto vec = [&](const std::string& key) {
    const auto v = c.reals(key);
    if (static_cast<int>(v.size()) != d) throw ConfigError("key '" + key + "': expected " + std::to_string(d) + " values");
    return VectorXd(Eigen::Map<const VectorXd>(v.data(), d));
  };
  const auto a = AmplitudeCutoff::box(vec("oscint.x_center"), vec("oscint.x_half"), vec("oscint.xi_center"),
                                      vec("oscint.xi_half"), c.real("oscint.rho"));
  SteinOptions opt;
  opt.grid.oversampling = c.real("oscint.oversampling");
  opt.grid.min_nodes = static_cast<Eigen::Index>(c.integer("oscint.min_nodes"));
  opt.doubling_check = c.flag("oscint.doubling");
  opt.slope_tolerance = c.real("oscint.slope_tolerance");
  opt.seed = r.seed;
  const int p = static_cast<int>(c.integer("oscint.p"));
  const auto rep = stein_sweep(phi, a, c.reals("oscint.lambda_grid"), p, opt);

  r.columns = {"lambda", "norm", "grid_size", "doubled_norm"};
  for (std::size_t i = 0; i < rep.lambdas.size(); ++i) {
    r.add_row({rep.lambdas[i], rep.norms[i], static_cast<std::int64_t>(rep.grid_sizes[i]),
               opt.doubling_check ? Cell{rep.doubled_norms[i]} : Cell{std::string("")}});
  }
  r.fits.push_back({"norm", rep.fit});
  r.curves.push_back(curve("norm", "lambda", "norm", rep.lambdas, rep.norms));
  r.params["oscint.method"] = to_string(rep.method);
  r.certificates.emplace_back("slope", rep.fit.slope);
  r.certificates.emplace_back("bound", rep.bound);
  r.certificates.emplace_back("min_rank", rep.min_rank);
  r.certificates.emplace_back("attained", rep.attained ? 1.0 : 0.0);
  if (opt.doubling_check) r.certificates.emplace_back("max_doubling_change", rep.max_doubling_change);
  r.verdicts.emplace_back("slope_upper_bound", rep.upper_ok);
  if (opt.doubling_check) r.verdicts.emplace_back("grid_doubling_1pct", rep.doubling_ok);
}

/// Geometry and spectral invariants that must hold on any build.
inline void run_selftest(RunReport& r) {
  r.columns = {"check", "defect", "tolerance"};
  auto check = [&](const std::string& name, double defect, double tol) {
    r.add_row({name, defect, tol});
    r.verdicts.emplace_back(name, std::isfinite(defect) && defect <= tol);
  };
  {
    const auto g = gauss_legendre(12);
    double s = 0.0;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) s += g.weights[i] * std::pow(g.nodes[i], 10);
    check("gauss_legendre_exact_degree_10", std::abs(s - 2.0 / 11.0), 1e-14);
  }
  const auto s2 = ManifoldModel::sphere(2);
  const auto t2 = ManifoldModel::torus(2);
  {
    const auto g = build_grid(s2, {{32, 64}});
    check("sphere_grid_area", std::abs(g.weights().sum() - 4.0 * pi) / (4.0 * pi), 1e-13);
    const auto gt = build_grid(t2, {{16, 16}});
    check("torus_grid_area", std::abs(gt.weights().sum() - 1.0), 1e-13);
  }
  auto gram_defect = [](const SpectralBasis& b, const QuadratureGrid& g) {
    MatrixXcd V(static_cast<Eigen::Index>(g.size()), static_cast<Eigen::Index>(b.size()));
    for (std::size_t j = 0; j < b.size(); ++j) {
      VectorXcd e = VectorXcd::Zero(static_cast<Eigen::Index>(b.size()));
      e[static_cast<Eigen::Index>(j)] = 1.0;
      V.col(static_cast<Eigen::Index>(j)) = b.synthesize(e, g);
    }
    const MatrixXcd G = V.adjoint() * g.weights().cast<cplx>().asDiagonal() * V;
    return (G - MatrixXcd::Identity(G.rows(), G.cols())).cwiseAbs().maxCoeff();
  };
  check("sphere_basis_orthonormal", gram_defect(sphere_basis(8), build_grid(s2, {{24, 48}})), 1e-12);
  check("torus_basis_orthonormal", gram_defect(torus_basis(t2, 3), build_grid(t2, {{16, 16}})), 1e-12);
  {
    const VectorXd p = (VectorXd(3) << 1.0, 0.0, 0.0).finished();
    const VectorXd q = (VectorXd(3) << 0.0, 1.0, 0.0).finished();
    check("sphere_geodesic_quarter_circle", std::abs(geodesic_distance(s2, p, q) - pi / 2), 1e-15);
    check("equator_distance_of_pole",
          std::abs(distance_to_submanifold(s2, SubmanifoldSpec::great_subsphere(1), (VectorXd(3) << 0, 0, 1).finished()) -
                   pi / 2),
          1e-15);
    const VectorXd x = (VectorXd(2) << 0.9, 0.3).finished();
    check("torus_distance_wraps",
          std::abs(distance_to_submanifold(t2, SubmanifoldSpec::sub_torus({true, false}), x) - 0.1), 1e-15);
  }
  {
    const auto b = std::make_shared<const SpectralBasis>(torus_basis(t2, 6));
    const auto u = random_mode_vector(b, r.seed);
    const auto w = WindowSpec::sharp(20.0);
    const auto p = window_project(u, w);
    check("projector_idempotent", (window_project(p, w).coeffs - p.coeffs).norm(), 1e-15);
    check("projector_orthogonal", std::abs(p.coeffs.dot(u.coeffs - p.coeffs)) / u.norm(), 1e-12);
    const auto j = *b->find_torus({2, 1});
    const auto e = ModeVector::unit(b, j);
    check("eigenmode_helmholtz_residual", helmholtz_residual(e, 1.0 / b->entries()[j].frequency).norm(), 1e-14);
  }
  {
    const auto hs = sphere_basis(10);
    const HighestWeight hw{7, 2};
    double worst = 0.0;
    for (const auto& e : hs.entries()) {
      if (e.mode.degree == 7) worst = std::max(worst, std::abs(e.eigenvalue - hw.eigenvalue()));
    }
    check("sphere_eigenvalue_l_l_plus_1", worst, 1e-12);
  }
}

template <class E>
[[noreturn]] void rethrow_with(const E& e, const std::string& ctx) {
  throw E(ctx + ": " + e.what());
}

}  // namespace detail

/// Runs one experiment and returns its report; errors carry the experiment name.
inline RunReport run(const ExperimentConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  RunReport r;
  r.experiment = to_string(cfg.experiment);
  r.seed = cfg.seed();
  r.params = cfg.values;
  try {
    switch (cfg.experiment) {
      case Experiment::Concentration: detail::run_concentration(cfg, r); break;
      case Experiment::Projector: detail::run_projector(cfg, r); break;
      case Experiment::Resolvent: detail::run_resolvent(cfg, r); break;
      case Experiment::DampedWave: detail::run_dampedwave(cfg, r); break;
      case Experiment::OscInt: detail::run_oscint(cfg, r); break;
      case Experiment::SelfTest: detail::run_selftest(r); break;
    }
  } catch (const ConfigError& e) {
    detail::rethrow_with(e, r.experiment);
  } catch (const DomainError& e) {
    detail::rethrow_with(e, r.experiment);
  } catch (const ResolutionError& e) {
    detail::rethrow_with(e, r.experiment);
  } catch (const NumericalError& e) {
    detail::rethrow_with(e, r.experiment);
  }
  r.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace tubelab

#endif  // TUBELAB_RUNNER_HPP
