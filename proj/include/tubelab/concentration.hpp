#ifndef TUBELAB_CONCENTRATION_HPP
#define TUBELAB_CONCENTRATION_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include "tubelab/common.hpp"
#include "tubelab/fit.hpp"
#include "tubelab/geometry.hpp"
#include "tubelab/parallel.hpp"
#include "tubelab/spectral.hpp"

namespace tubelab {

using PointFunction = std::function<cplx(const VectorXd&)>;

/// sigma(k, n): 1 for k <= n-3, 1 with a log loss for k = n-2, 1/2 for k = n-1.
struct CodimExponent {
  int k = 1;
  int n = 2;
  double sigma = 0.5;
  bool log_correction = false;

  static CodimExponent of(int k, int n) {
    if (n < 1 || k < 0 || k > n - 1) throw DomainError("codimension exponent needs 0 <= k <= n-1");
    CodimExponent e{k, n, 1.0, false};
    if (k == n - 1) e.sigma = 0.5;
    if (k == n - 2) e.log_correction = true;
    return e;
  }

  /// w(alpha) = alpha^sigma, or alpha log(1/alpha) in the log-loss case.
  [[nodiscard]] double weight(double alpha) const {
    if (log_correction) return alpha * std::log(1.0 / alpha);
    return std::pow(alpha, sigma);
  }
};

struct ConcentrationSample {
  double alpha = 0.0;
  double h = 0.0;
  double tube_norm = 0.0;
  double full_norm = 0.0;
  double residual_norm = 0.0;
};

inline VectorXcd evaluate_on_grid(const PointFunction& f, const QuadratureGrid& grid) {
  VectorXcd out(static_cast<Eigen::Index>(grid.size()));
  parallel_for(grid.size(), [&](std::size_t i) { out[static_cast<Eigen::Index>(i)] = f(grid.node(i)); });
  return out;
}

inline double grid_norm(const VectorXcd& values, const QuadratureGrid& grid) {
  if (static_cast<std::size_t>(values.size()) != grid.size()) throw DomainError("values do not match grid size");
  CompensatedSum<double> acc;
  for (Eigen::Index i = 0; i < values.size(); ++i) acc.add(std::norm(values[i]) * grid.weights()[i]);
  return std::sqrt(acc.value());
}

/// ||u||_{L^2(N_beta)} from grid values.
inline double tube_norm(const VectorXcd& values, const Tube& tube, const QuadratureGrid& grid) {
  if (static_cast<std::size_t>(values.size()) != grid.size()) throw DomainError("values do not match grid size");
  require_tube_resolved(grid, tube);
  const auto in = tube_indicator(grid, tube);
  CompensatedSum<double> acc;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (in[static_cast<std::size_t>(i)]) acc.add(std::norm(values[i]) * grid.weights()[i]);
  }
  return std::sqrt(acc.value());
}

inline double tube_norm(const ModeVector& u, const Tube& tube, const QuadratureGrid& grid) {
  return tube_norm(u.basis->synthesize(u.coeffs, grid), tube, grid);
}

inline double tube_norm(const PointFunction& f, const Tube& tube, const QuadratureGrid& grid) {
  return tube_norm(evaluate_on_grid(f, grid), tube, grid);
}

inline void require_alpha_grid(const std::vector<double>& alphas) {
  if (alphas.empty()) throw DomainError("alpha grid is empty");
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    if (!(alphas[i] > 0.0 && alphas[i] <= 1.0)) throw DomainError("alpha values must lie in (0, 1]");
    if (i > 0 && !(alphas[i] > alphas[i - 1])) throw DomainError("alpha grid must be strictly increasing");
  }
}

/// One sample per alpha; the full norm is the grid norm of the same values.
inline std::vector<ConcentrationSample> alpha_sweep(const VectorXcd& values, double h, const SubmanifoldSpec& sigma,
                                                    const std::vector<double>& alphas, const QuadratureGrid& grid,
                                                    double residual_norm = 0.0) {
  require_alpha_grid(alphas);
  const double full = grid_norm(values, grid);
  std::vector<ConcentrationSample> out(alphas.size());
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    const Tube tube(alphas[i], h, sigma);
    out[i] = {alphas[i], h, tube_norm(values, tube, grid), full, residual_norm};
  }
  return out;
}

inline std::vector<ConcentrationSample> alpha_sweep(const ModeVector& u, double h, const SubmanifoldSpec& sigma,
                                                    const std::vector<double>& alphas, const QuadratureGrid& grid) {
  return alpha_sweep(u.basis->synthesize(u.coeffs, grid), h, sigma, alphas, grid);
}

struct ConcentrationReport {
  CodimExponent exponent;
  std::vector<ConcentrationSample> samples;
  std::vector<double> bound_rhs;     // w(alpha) (||psi|| + ||g|| / h)
  std::vector<double> admissible_C;  // tube_norm / bound_rhs
  double minimal_C = 0.0;
  std::vector<ScalingFit> fits;  // PurePower always, PowerTimesLog in the log-loss case
  bool degenerate = false;       // psi == 0

  [[nodiscard]] std::optional<double> slope() const {
    if (fits.empty()) return std::nullopt;
    return fits.front().slope;
  }
};

/// Fits log tube_norm against log alpha over the samples with a positive tube norm.
inline std::vector<ScalingFit> fit_samples(const std::vector<ConcentrationSample>& samples, bool with_log,
                                           bool squared = false) {
  std::vector<double> x;
  std::vector<double> y;
  for (const auto& s : samples) {
    if (s.tube_norm > 0.0) {
      x.push_back(s.alpha);
      y.push_back(squared ? s.tube_norm * s.tube_norm : s.tube_norm);
    }
  }
  std::vector<ScalingFit> fits;
  if (x.size() < 3) return fits;
  fits.push_back(fit_power_law(x, y, FitModel::PurePower));
  if (with_log && x.back() < 1.0) fits.push_back(fit_power_law(x, y, FitModel::PowerTimesLog));
  return fits;
}

/// Certifies tube_norm <= C w(alpha) (||psi|| + h^{-1} ||g||) over the sweep.
inline ConcentrationReport concentration_check(const std::vector<ConcentrationSample>& samples, const CodimExponent& e) {
  ConcentrationReport r;
  r.exponent = e;
  r.samples = samples;
  for (const auto& s : samples) {
    const double rhs = e.weight(s.alpha) * (s.full_norm + s.residual_norm / s.h);
    r.bound_rhs.push_back(rhs);
    const double c = rhs > 0.0 ? s.tube_norm / rhs : 0.0;
    r.admissible_C.push_back(c);
    r.minimal_C = std::max(r.minimal_C, c);
  }
  r.degenerate = std::all_of(samples.begin(), samples.end(), [](const auto& s) { return s.full_norm == 0.0; });
  r.fits = fit_samples(samples, e.log_correction);
  return r;
}

inline ConcentrationReport concentration_check(const ModeVector& psi, double h, const SubmanifoldSpec& sigma,
                                     const std::vector<double>& alphas, const QuadratureGrid& grid) {
  sigma.require_compatible(grid.manifold());
  const double g = helmholtz_residual(psi, h).norm();
  const auto samples = alpha_sweep(psi.basis->synthesize(psi.coeffs, grid), h, sigma, alphas, grid, g);
  return concentration_check(samples, CodimExponent::of(sigma.k, grid.manifold().dim()));
}

struct ProjectorReport {
  double lambda = 0.0;
  std::size_t window_dimension = 0;
  std::vector<ConcentrationReport> trials;
  double worst_C = 0.0;
  double min_slope = std::numeric_limits<double>::infinity();
  bool trivial = false;  // the window holds no modes
};

/// Seeded complex Gaussian coefficients on the whole basis.
inline ModeVector random_mode_vector(std::shared_ptr<const SpectralBasis> basis, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  ModeVector u = ModeVector::zeros(std::move(basis));
  for (Eigen::Index j = 0; j < u.coeffs.size(); ++j) {
    const double re = nd(rng);
    const double im = nd(rng);
    u.coeffs[j] = {re, im};
  }
  return u;
}

/// Projector estimate ||Pi_lambda u||_{L^2(N)} <= C alpha^sigma ||u||, h = 1/lambda.
/// The reported C uses ||Pi_lambda u|| in the denominator, which is the stronger
/// certificate since ||Pi_lambda u|| <= ||u||.
inline ProjectorReport projector_concentration_check(std::shared_ptr<const SpectralBasis> basis, double lambda,
                                                     const SubmanifoldSpec& sigma, const std::vector<double>& alphas,
                                                     const QuadratureGrid& grid, std::size_t trials,
                                                     std::uint64_t seed) {
  if (!(lambda > 0.0)) throw DomainError("projector check needs lambda > 0");
  if (trials == 0) throw DomainError("projector check needs at least one trial");
  sigma.require_compatible(grid.manifold());
  const auto w = WindowSpec::sharp(lambda);
  ProjectorReport rep;
  rep.lambda = lambda;
  for (const auto& e : basis->entries()) rep.window_dimension += w.multiplier(e.frequency) > 0.0 ? 1 : 0;
  rep.trivial = rep.window_dimension == 0;
  const auto e = CodimExponent::of(sigma.k, grid.manifold().dim());
  rep.trials.resize(trials);
  parallel_for(trials, [&](std::size_t t) {
    const auto u = window_project(random_mode_vector(basis, seed + t), w);
    const auto samples = alpha_sweep(basis->synthesize(u.coeffs, grid), 1.0 / lambda, sigma, alphas, grid);
    rep.trials[t] = concentration_check(samples, e);
  });
  for (const auto& r : rep.trials) {
    rep.worst_C = std::max(rep.worst_C, r.minimal_C);
    if (auto s = r.slope()) rep.min_slope = std::min(rep.min_slope, *s);
  }
  return rep;
}

enum class SaturationRegime { AlphaFixed, AlphaEqualsSqrtH };

struct HighestWeightSaturation {
  int j = 0;
  double h = 0.0;
  std::vector<ConcentrationSample> samples;  // normalised e_j
  ScalingFit norm_fit;
  ScalingFit squared_fit;
  double minimal_C = 0.0;
};

struct ZonalSaturation {
  int j = 0;
  double h = 0.0;
  double tube_norm_squared = 0.0;
  double ratio = 0.0;  // tube_norm^2 / h
};

struct SaturationReport {
  SaturationRegime regime = SaturationRegime::AlphaFixed;
  std::vector<HighestWeightSaturation> highest_weight;
  std::vector<ZonalSaturation> zonal;

  /// max/min of minimal C (AlphaFixed) or of the zonal ratio (AlphaEqualsSqrtH).
  [[nodiscard]] double spread() const {
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (const auto& s : highest_weight) {
      lo = std::min(lo, s.minimal_C);
      hi = std::max(hi, s.minimal_C);
    }
    for (const auto& s : zonal) {
      lo = std::min(lo, s.ratio);
      hi = std::max(hi, s.ratio);
    }
    return lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  }
};

/// Latitude count used for the saturation sweeps; Gauss nodes are about pi/nlat
/// apart in colatitude, so this resolves tubes down to ~0.004 with room to spare.
inline constexpr std::size_t saturation_nlat = 16384;

/// AlphaFixed: normalised e_j on S^2 against the equator for each alpha.
/// AlphaEqualsSqrtH: normalised zonal f_j on tubes of radius h around the poles.
inline SaturationReport sphere_saturation_check(const std::vector<int>& js, SaturationRegime regime,
                                                const std::vector<double>& alphas = {0.0625, 0.125, 0.25, 0.5},
                                                std::size_t nlat = saturation_nlat) {
  if (js.empty()) throw DomainError("saturation check needs at least one j");
  const auto s2 = ManifoldModel::sphere(2);
  // both families are axisymmetric in modulus; a few longitudes suffice
  const auto grid = build_grid(s2, {{nlat, 4}});
  SaturationReport rep;
  rep.regime = regime;
  for (int j : js) {
    if (j < 1) throw DomainError("saturation check needs j >= 1");
    const double h = 1.0 / std::sqrt(double(j) * (j + 1));
    if (regime == SaturationRegime::AlphaFixed) {
      require_alpha_grid(alphas);
      const HighestWeight e{j, 2};
      const double scale = 1.0 / std::sqrt(e.norm_squared());
      const VectorXcd v = evaluate_on_grid([&](const VectorXd& p) { return scale * e(p); }, grid);
      HighestWeightSaturation s;
      s.j = j;
      s.h = h;
      s.samples = alpha_sweep(v, h, SubmanifoldSpec::great_subsphere(1), alphas, grid);
      const auto t1 = concentration_check(s.samples, CodimExponent::of(1, 2));
      s.minimal_C = t1.minimal_C;
      s.norm_fit = fit_samples(s.samples, false).at(0);
      s.squared_fit = fit_samples(s.samples, false, true).at(0);
      rep.highest_weight.push_back(std::move(s));
    } else {
      const VectorXcd v =
          evaluate_on_grid([&](const VectorXd& p) { return cplx(zonal_eval(j, std::acos(std::clamp(p[2], -1.0, 1.0)))); }, grid);
      const Tube tube(std::sqrt(h), h, SubmanifoldSpec::pole_pair());
      ZonalSaturation z;
      z.j = j;
      z.h = h;
      z.tube_norm_squared = square(tube_norm(v, tube, grid));
      z.ratio = z.tube_norm_squared / h;
      rep.zonal.push_back(z);
    }
  }
  return rep;
}

}  // namespace tubelab

#endif  // TUBELAB_CONCENTRATION_HPP
