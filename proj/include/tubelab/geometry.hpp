#ifndef TUBELAB_GEOMETRY_HPP
#define TUBELAB_GEOMETRY_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "tubelab/common.hpp"
#include "tubelab/quadrature.hpp"

namespace tubelab {

enum class ManifoldKind { UnitSphere, FlatTorus };

/// Unit sphere S^n embedded in R^{n+1}, or flat torus R^n / (periods Z^n).
class ManifoldModel {
 public:
  static ManifoldModel sphere(int n) {
    if (n < 1) throw DomainError("sphere dimension must be >= 1");
    ManifoldModel m;
    m.kind_ = ManifoldKind::UnitSphere;
    m.dim_ = n;
    return m;
  }

  static ManifoldModel torus(std::vector<double> periods) {
    if (periods.empty()) throw DomainError("torus dimension must be >= 1");
    for (double p : periods) {
      if (!(p > 0.0) || !std::isfinite(p)) throw DomainError("torus periods must be positive");
    }
    ManifoldModel m;
    m.kind_ = ManifoldKind::FlatTorus;
    m.dim_ = static_cast<int>(periods.size());
    m.periods_ = std::move(periods);
    return m;
  }

  static ManifoldModel torus(int n) {
    if (n < 1) throw DomainError("torus dimension must be >= 1");
    return torus(std::vector<double>(static_cast<std::size_t>(n), 1.0));
  }

  [[nodiscard]] ManifoldKind kind() const { return kind_; }
  [[nodiscard]] bool is_sphere() const { return kind_ == ManifoldKind::UnitSphere; }
  [[nodiscard]] bool is_torus() const { return kind_ == ManifoldKind::FlatTorus; }
  [[nodiscard]] int dim() const { return dim_; }
  [[nodiscard]] const std::vector<double>& periods() const { return periods_; }

  /// Number of coordinates of a point: n + 1 on S^n, n on T^n.
  [[nodiscard]] int ambient_dim() const { return is_sphere() ? dim_ + 1 : dim_; }

  [[nodiscard]] double total_volume() const {
    if (is_sphere()) {
      const double a = 0.5 * (dim_ + 1);
      return 2.0 * std::exp(a * std::log(pi) - std::lgamma(a));
    }
    return std::accumulate(periods_.begin(), periods_.end(), 1.0, std::multiplies<>());
  }

  /// Throws DomainError unless p is a point of the manifold.
  void require_point(const VectorXd& p) const {
    if (p.size() != ambient_dim()) throw DomainError("point has wrong number of coordinates");
    if (!p.allFinite()) throw DomainError("point has non-finite coordinates");
    if (is_sphere() && std::abs(p.norm() - 1.0) > 1e-12) {
      throw DomainError("point is not on the unit sphere");
    }
  }

  bool operator==(const ManifoldModel&) const = default;

 private:
  ManifoldModel() = default;
  ManifoldKind kind_ = ManifoldKind::UnitSphere;
  int dim_ = 1;
  std::vector<double> periods_;
};

enum class SubmanifoldKind { GreatSubsphere, PolePair, SubTorus };

/// Sigma^k. GreatSubsphere(k) on S^n is {x' = 0} where x' collects the last
/// n - k ambient coordinates; PolePair is {+-e_{n+1}}; SubTorus(mask) fixes the
/// masked coordinates to 0.
struct SubmanifoldSpec {
  SubmanifoldKind kind = SubmanifoldKind::GreatSubsphere;
  int k = 1;
  std::vector<bool> mask;

  static SubmanifoldSpec great_subsphere(int k) { return {SubmanifoldKind::GreatSubsphere, k, {}}; }
  static SubmanifoldSpec pole_pair() { return {SubmanifoldKind::PolePair, 0, {}}; }
  static SubmanifoldSpec sub_torus(std::vector<bool> mask) {
    const auto fixed = std::count(mask.begin(), mask.end(), true);
    const int k = static_cast<int>(mask.size()) - static_cast<int>(fixed);
    return {SubmanifoldKind::SubTorus, k, std::move(mask)};
  }

  [[nodiscard]] int codim(const ManifoldModel& m) const { return m.dim() - k; }

  void require_compatible(const ManifoldModel& m) const {
    switch (kind) {
      case SubmanifoldKind::GreatSubsphere:
        if (!m.is_sphere()) throw DomainError("great subsphere requires a sphere");
        if (k < 1 || k > m.dim() - 1) throw DomainError("great subsphere dimension out of range");
        break;
      case SubmanifoldKind::PolePair:
        if (!m.is_sphere()) throw DomainError("pole pair requires a sphere");
        break;
      case SubmanifoldKind::SubTorus:
        if (!m.is_torus()) throw DomainError("sub-torus requires a torus");
        if (static_cast<int>(mask.size()) != m.dim()) throw DomainError("sub-torus mask size mismatch");
        if (k < 1 || k > m.dim() - 1) throw DomainError("sub-torus dimension out of range");
        break;
    }
  }

  bool operator==(const SubmanifoldSpec&) const = default;
};

/// Signed representative of x modulo period, in [-period/2, period/2].
inline double wrap_coordinate(double x, double period) {
  return std::remainder(x, period);
}

inline double geodesic_distance(const ManifoldModel& m, const VectorXd& p, const VectorXd& q) {
  m.require_point(p);
  m.require_point(q);
  if (m.is_sphere()) {
    // chord form stays accurate for both nearby and antipodal points
    return 2.0 * std::atan2((p - q).norm(), (p + q).norm());
  }
  double acc = 0.0;
  for (int i = 0; i < m.dim(); ++i) {
    acc += square(wrap_coordinate(p[i] - q[i], m.periods()[static_cast<std::size_t>(i)]));
  }
  return std::sqrt(acc);
}

namespace detail {

inline double distance_to_submanifold_unchecked(const ManifoldModel& m, const SubmanifoldSpec& s,
                                                const double* p) {
  const int a = m.ambient_dim();
  switch (s.kind) {
    case SubmanifoldKind::GreatSubsphere: {
      double normal = 0.0;
      double tangent = 0.0;
      for (int i = 0; i < a; ++i) {
        if (i >= s.k + 1) {
          normal += p[i] * p[i];
        } else {
          tangent += p[i] * p[i];
        }
      }
      return std::atan2(std::sqrt(normal), std::sqrt(tangent));
    }
    case SubmanifoldKind::PolePair: {
      const double z = std::abs(p[a - 1]);
      double rest = 0.0;
      for (int i = 0; i + 1 < a; ++i) rest += p[i] * p[i];
      return std::atan2(std::sqrt(rest), z);
    }
    case SubmanifoldKind::SubTorus: {
      double acc = 0.0;
      for (int i = 0; i < a; ++i) {
        if (s.mask[static_cast<std::size_t>(i)]) {
          acc += square(wrap_coordinate(p[i], m.periods()[static_cast<std::size_t>(i)]));
        }
      }
      return std::sqrt(acc);
    }
  }
  return 0.0;
}

}  // namespace detail

inline double distance_to_submanifold(const ManifoldModel& m, const SubmanifoldSpec& s, const VectorXd& p) {
  s.require_compatible(m);
  m.require_point(p);
  return detail::distance_to_submanifold_unchecked(m, s, p.data());
}

/// Grid resolution: {nlat, nlon} on spheres (nlat Gauss nodes per polar
/// angle), one count per axis on tori.
struct GridResolution {
  std::vector<std::size_t> counts;
  bool operator==(const GridResolution&) const = default;
};

/// Product quadrature on a manifold. Spheres: Gauss-Gegenbauer in each polar
/// coordinate (Gauss-Legendre in cos(theta) on S^2) times a uniform azimuthal
/// rule; tori: uniform tensor rule. Node index is row-major over `axes`.
class QuadratureGrid {
 public:
  QuadratureGrid(ManifoldModel manifold, GridResolution resolution)
      : manifold_(std::move(manifold)), resolution_(std::move(resolution)) {
    if (manifold_.is_sphere()) {
      build_sphere();
    } else {
      build_torus();
    }
  }

  [[nodiscard]] const ManifoldModel& manifold() const { return manifold_; }
  [[nodiscard]] const GridResolution& resolution() const { return resolution_; }
  [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(weights_.size()); }
  /// Column i is node i in ambient coordinates.
  [[nodiscard]] const MatrixXd& nodes() const { return nodes_; }
  [[nodiscard]] const VectorXd& weights() const { return weights_; }
  [[nodiscard]] VectorXd node(std::size_t i) const { return nodes_.col(static_cast<Eigen::Index>(i)); }

  /// One-dimensional rules. Spheres: polar levels t_n, ..., t_2 then the
  /// azimuth; tori: one uniform rule per coordinate.
  [[nodiscard]] const std::vector<GaussRule>& axes() const { return axes_; }

  /// Largest gap between neighbouring polar angles (spheres).
  [[nodiscard]] double polar_spacing() const { return polar_spacing_; }
  /// Node spacing along torus coordinate i.
  [[nodiscard]] double axis_spacing(std::size_t i) const {
    return manifold_.periods()[i] / static_cast<double>(resolution_.counts[i]);
  }

 private:
  void build_sphere() {
    const int n = manifold_.dim();
    if (n < 2) throw DomainError("sphere grids require n >= 2");
    if (resolution_.counts.size() != 2) throw DomainError("sphere resolution is {nlat, nlon}");
    const std::size_t nlat = resolution_.counts[0];
    const std::size_t nlon = resolution_.counts[1];
    if (nlat < 1 || nlon < 1) throw DomainError("grid resolution must be positive");
    // levels m = n, n-1, ..., 2 with weight (1 - t^2)^{(m-2)/2}
    for (int m = n; m >= 2; --m) axes_.push_back(gauss_gegenbauer(nlat, 0.5 * (m - 2)));
    GaussRule lon;
    for (std::size_t k = 0; k < nlon; ++k) {
      lon.nodes.push_back(2.0 * pi * static_cast<double>(k) / static_cast<double>(nlon));
      lon.weights.push_back(2.0 * pi / static_cast<double>(nlon));
    }
    axes_.push_back(std::move(lon));

    polar_spacing_ = 0.0;
    for (std::size_t ax = 0; ax + 1 < axes_.size(); ++ax) {
      double prev = pi;
      for (double ti : axes_[ax].nodes) {
        const double th = std::acos(ti);
        polar_spacing_ = std::max(polar_spacing_, prev - th);
        prev = th;
      }
      polar_spacing_ = std::max(polar_spacing_, prev);
    }

    std::size_t total = nlon;
    for (int l = 0; l < n - 1; ++l) total *= nlat;
    nodes_.resize(n + 1, static_cast<Eigen::Index>(total));
    weights_.resize(static_cast<Eigen::Index>(total));
    std::vector<std::size_t> idx(axes_.size(), 0);
    for (std::size_t node = 0; node < total; ++node) {
      std::size_t rem = node;
      for (std::size_t ax = axes_.size(); ax-- > 0;) {
        const std::size_t len = axes_[ax].nodes.size();
        idx[ax] = rem % len;
        rem /= len;
      }
      const double phi = axes_.back().nodes[idx.back()];
      double w = axes_.back().weights[idx.back()];
      // x^{(1)} = (cos phi, sin phi); x^{(m)} = (sqrt(1 - t_m^2) x^{(m-1)}, t_m)
      std::vector<double> x{std::cos(phi), std::sin(phi)};
      for (int m = 2; m <= n; ++m) {
        const std::size_t ax = static_cast<std::size_t>(n - m);
        const double tm = axes_[ax].nodes[idx[ax]];
        w *= axes_[ax].weights[idx[ax]];
        const double s = std::sqrt(std::max(0.0, 1.0 - tm * tm));
        for (double& xi : x) xi *= s;
        x.push_back(tm);
      }
      for (int c = 0; c <= n; ++c) nodes_(c, static_cast<Eigen::Index>(node)) = x[static_cast<std::size_t>(c)];
      weights_[static_cast<Eigen::Index>(node)] = w;
    }
  }

  void build_torus() {
    const int n = manifold_.dim();
    if (resolution_.counts.size() != static_cast<std::size_t>(n)) {
      throw DomainError("torus resolution needs one count per axis");
    }
    std::size_t total = 1;
    for (int i = 0; i < n; ++i) {
      const std::size_t c = resolution_.counts[static_cast<std::size_t>(i)];
      if (c < 1) throw DomainError("grid resolution must be positive");
      const double p = manifold_.periods()[static_cast<std::size_t>(i)];
      GaussRule r;
      for (std::size_t k = 0; k < c; ++k) {
        r.nodes.push_back(p * static_cast<double>(k) / static_cast<double>(c));
        r.weights.push_back(p / static_cast<double>(c));
      }
      axes_.push_back(std::move(r));
      total *= c;
    }
    nodes_.resize(n, static_cast<Eigen::Index>(total));
    weights_.resize(static_cast<Eigen::Index>(total));
    for (std::size_t node = 0; node < total; ++node) {
      std::size_t rem = node;
      double w = 1.0;
      for (int ax = n; ax-- > 0;) {
        const auto& r = axes_[static_cast<std::size_t>(ax)];
        const std::size_t i = rem % r.nodes.size();
        rem /= r.nodes.size();
        nodes_(ax, static_cast<Eigen::Index>(node)) = r.nodes[i];
        w *= r.weights[i];
      }
      weights_[static_cast<Eigen::Index>(node)] = w;
    }
  }

  ManifoldModel manifold_;
  GridResolution resolution_;
  MatrixXd nodes_;
  VectorXd weights_;
  std::vector<GaussRule> axes_;
  double polar_spacing_ = 0.0;
};

inline QuadratureGrid build_grid(const ManifoldModel& m, const GridResolution& r) { return QuadratureGrid(m, r); }

/// Grid that integrates products of modes up to `degree` exactly (sphere
/// harmonic degree L, or torus frequency K); ResolutionError otherwise.
inline QuadratureGrid build_grid(const ManifoldModel& m, const GridResolution& r, int degree) {
  QuadratureGrid g(m, r);
  const auto d = static_cast<std::size_t>(std::max(0, degree));
  if (m.is_sphere()) {
    if (r.counts[0] < d + 1 || r.counts[1] < 2 * d + 1) {
      throw ResolutionError("sphere grid " + std::to_string(r.counts[0]) + "x" + std::to_string(r.counts[1]) +
                            " under-resolves harmonic degree " + std::to_string(degree));
    }
  } else {
    for (std::size_t c : r.counts) {
      if (c < 2 * d + 1) {
        throw ResolutionError("torus grid axis of " + std::to_string(c) + " nodes under-resolves frequency " +
                              std::to_string(degree));
      }
    }
  }
  return g;
}

/// Tubular neighbourhood {p : d(p, Sigma) < alpha sqrt(h)}.
struct Tube {
  double alpha = 1.0;
  double h = 1.0;
  SubmanifoldSpec submanifold;

  Tube(double alpha_, double h_, SubmanifoldSpec s) : alpha(alpha_), h(h_), submanifold(std::move(s)) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("tube alpha must lie in (0, 1]");
    if (!(h > 0.0) || !std::isfinite(h)) throw DomainError("tube h must be positive");
  }

  [[nodiscard]] double half_width() const { return alpha * std::sqrt(h); }

  [[nodiscard]] bool contains(const ManifoldModel& m, const VectorXd& p) const {
    return distance_to_submanifold(m, submanifold, p) < half_width();
  }
};

/// ResolutionError unless the grid has at least 4 nodes across the tube in
/// every normal direction.
inline void require_tube_resolved(const QuadratureGrid& grid, const Tube& tube) {
  const auto& m = grid.manifold();
  tube.submanifold.require_compatible(m);
  const double width = 2.0 * tube.half_width();
  if (m.is_sphere()) {
    // the tube is a union of polar-angle bands; nothing to resolve once it
    // swallows the sphere
    if (tube.half_width() >= pi) return;
    if (width < 4.0 * grid.polar_spacing()) {
      throw ResolutionError("tube of half-width " + std::to_string(tube.half_width()) +
                            " is under-resolved by polar spacing " + std::to_string(grid.polar_spacing()));
    }
    return;
  }
  for (std::size_t i = 0; i < tube.submanifold.mask.size(); ++i) {
    if (!tube.submanifold.mask[i]) continue;
    if (tube.half_width() >= 0.5 * m.periods()[i]) continue;
    if (width < 4.0 * grid.axis_spacing(i)) {
      throw ResolutionError("tube of half-width " + std::to_string(tube.half_width()) +
                            " is under-resolved along axis " + std::to_string(i));
    }
  }
}

/// 1 where the node lies in the tube.
inline std::vector<unsigned char> tube_indicator(const QuadratureGrid& grid, const Tube& tube) {
  const auto& m = grid.manifold();
  tube.submanifold.require_compatible(m);
  const double beta = tube.half_width();
  std::vector<unsigned char> in(grid.size(), 0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double d = detail::distance_to_submanifold_unchecked(m, tube.submanifold,
                                                               grid.nodes().col(static_cast<Eigen::Index>(i)).data());
    in[i] = d < beta ? 1 : 0;
  }
  return in;
}

inline double tube_volume(const QuadratureGrid& grid, const Tube& tube) {
  require_tube_resolved(grid, tube);
  const auto in = tube_indicator(grid, tube);
  CompensatedSum<double> acc;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (in[i]) acc.add(grid.weights()[static_cast<Eigen::Index>(i)]);
  }
  return acc.value();
}

}  // namespace tubelab

#endif  // TUBELAB_GEOMETRY_HPP
