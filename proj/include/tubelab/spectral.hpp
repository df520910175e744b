#ifndef TUBELAB_SPECTRAL_HPP
#define TUBELAB_SPECTRAL_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "tubelab/common.hpp"
#include "tubelab/format.hpp"
#include "tubelab/geometry.hpp"

namespace tubelab {

/// Torus modes carry an integer frequency vector; S^2 modes carry (degree, order).
struct ModeDescriptor {
  std::vector<int> freq;
  int degree = 0;
  int order = 0;
  bool operator==(const ModeDescriptor&) const = default;
};

struct SpectralEntry {
  std::size_t index = 0;
  double eigenvalue = 0.0;  // lambda_j^2
  double frequency = 0.0;   // lambda_j
  ModeDescriptor mode;
};

namespace detail {

/// Fully normalised associated Legendre values Pbar_l^m(t), m fixed,
/// l = m..L, scaled so that 2 pi * int_{-1}^{1} Pbar^2 dt = 1.
inline void legendre_column(int L, int m, double t, double* out) {
  const double s = std::sqrt(std::max(0.0, 1.0 - t * t));
  double pmm = 1.0 / std::sqrt(4.0 * pi);
  for (int k = 1; k <= m; ++k) pmm *= -std::sqrt((2.0 * k + 1.0) / (2.0 * k)) * s;
  out[0] = pmm;
  if (m == L) return;
  double p1 = std::sqrt(2.0 * m + 3.0) * t * pmm;
  out[1] = p1;
  double p0 = pmm;
  for (int l = m + 2; l <= L; ++l) {
    const double ll = l;
    const double a = std::sqrt((4.0 * ll * ll - 1.0) / (ll * ll - double(m) * m));
    const double b = std::sqrt((square(ll - 1.0) - double(m) * m) / (4.0 * square(ll - 1.0) - 1.0));
    const double p2 = a * (t * p1 - b * p0);
    out[l - m] = p2;
    p0 = p1;
    p1 = p2;
  }
}

}  // namespace detail

/// Orthonormal eigenbasis of the Laplace-Beltrami operator, stored with
/// multiplicity and ordered by nondecreasing eigenvalue.
class SpectralBasis {
 public:
  /// All e^{2 pi i m.x / p} / sqrt(vol) with |m_i| <= K.
  static SpectralBasis torus(const ManifoldModel& manifold, int K) {
    if (!manifold.is_torus()) throw DomainError("torus_basis requires a torus");
    if (K < 1) throw DomainError("torus_basis requires K >= 1");
    SpectralBasis b(manifold, K);
    const int n = manifold.dim();
    std::vector<int> m(static_cast<std::size_t>(n), -K);
    while (true) {
      SpectralEntry e;
      e.mode.freq = m;
      double ev = 0.0;
      for (int i = 0; i < n; ++i) ev += square(2.0 * pi * m[static_cast<std::size_t>(i)] / manifold.periods()[static_cast<std::size_t>(i)]);
      e.eigenvalue = ev;
      e.frequency = std::sqrt(ev);
      b.entries_.push_back(std::move(e));
      int ax = n - 1;
      while (ax >= 0 && m[static_cast<std::size_t>(ax)] == K) {
        m[static_cast<std::size_t>(ax)] = -K;
        --ax;
      }
      if (ax < 0) break;
      ++m[static_cast<std::size_t>(ax)];
    }
    std::stable_sort(b.entries_.begin(), b.entries_.end(),
                     [](const SpectralEntry& x, const SpectralEntry& y) { return x.eigenvalue < y.eigenvalue; });
    b.finish();
    return b;
  }

  /// Real orthonormal spherical harmonics on S^2, degrees 0..L, ordered by
  /// (l, m) with m = -l..l; m > 0 is the cosine branch, m < 0 the sine branch.
  static SpectralBasis sphere(int L) {
    if (L < 1) throw DomainError("sphere_basis requires L >= 1");
    SpectralBasis b(ManifoldModel::sphere(2), L);
    for (int l = 0; l <= L; ++l) {
      for (int m = -l; m <= l; ++m) {
        SpectralEntry e;
        e.mode.degree = l;
        e.mode.order = m;
        e.eigenvalue = double(l) * (l + 1);
        e.frequency = std::sqrt(e.eigenvalue);
        b.entries_.push_back(std::move(e));
      }
    }
    b.finish();
    return b;
  }

  [[nodiscard]] const ManifoldModel& manifold() const { return manifold_; }
  [[nodiscard]] const std::vector<SpectralEntry>& entries() const { return entries_; }
  [[nodiscard]] std::size_t size() const { return entries_.size(); }
  /// K (torus) or L (sphere).
  [[nodiscard]] int truncation() const { return truncation_; }
  [[nodiscard]] VectorXd eigenvalues() const {
    VectorXd v(static_cast<Eigen::Index>(size()));
    for (std::size_t j = 0; j < size(); ++j) v[static_cast<Eigen::Index>(j)] = entries_[j].eigenvalue;
    return v;
  }

  /// Every eigenmode with frequency strictly below this value is in the basis.
  [[nodiscard]] double complete_below() const {
    if (manifold_.is_sphere()) return std::sqrt(double(truncation_ + 1) * (truncation_ + 2));
    const double pmax = *std::max_element(manifold_.periods().begin(), manifold_.periods().end());
    return 2.0 * pi * (truncation_ + 1) / pmax;
  }

  [[nodiscard]] double max_frequency() const { return entries_.back().frequency; }

  [[nodiscard]] std::optional<std::size_t> find_torus(const std::vector<int>& freq) const {
    for (std::size_t j = 0; j < size(); ++j) {
      if (entries_[j].mode.freq == freq) return j;
    }
    return std::nullopt;
  }

  [[nodiscard]] std::optional<std::size_t> find_sphere(int l, int m) const {
    if (!manifold_.is_sphere() || l < 0 || l > truncation_ || std::abs(m) > l) return std::nullopt;
    return static_cast<std::size_t>(l * l + l + m);
  }

  /// Value of mode j at a point of the manifold.
  [[nodiscard]] cplx evaluate(std::size_t j, const VectorXd& p) const {
    manifold_.require_point(p);
    const auto& e = entries_.at(j);
    if (manifold_.is_torus()) {
      double phase = 0.0;
      for (int i = 0; i < manifold_.dim(); ++i) {
        phase += 2.0 * pi * e.mode.freq[static_cast<std::size_t>(i)] * p[i] / manifold_.periods()[static_cast<std::size_t>(i)];
      }
      return std::polar(1.0 / std::sqrt(manifold_.total_volume()), phase);
    }
    const int l = e.mode.degree;
    const int m = std::abs(e.mode.order);
    std::vector<double> col(static_cast<std::size_t>(l - m + 1));
    detail::legendre_column(l, m, std::clamp(p[2], -1.0, 1.0), col.data());
    const double pl = col.back();
    const double phi = std::atan2(p[1], p[0]);
    if (e.mode.order == 0) return pl;
    if (e.mode.order > 0) return std::sqrt(2.0) * pl * std::cos(m * phi);
    return std::sqrt(2.0) * pl * std::sin(m * phi);
  }

  /// Matrix of mode values, rows = grid nodes, columns = modes.
  [[nodiscard]] MatrixXcd evaluate(const QuadratureGrid& grid) const {
    require_same_manifold(grid);
    MatrixXcd out(static_cast<Eigen::Index>(grid.size()), static_cast<Eigen::Index>(size()));
    for (std::size_t j = 0; j < size(); ++j) {
      VectorXcd c = VectorXcd::Zero(static_cast<Eigen::Index>(size()));
      c[static_cast<Eigen::Index>(j)] = 1.0;
      out.col(static_cast<Eigen::Index>(j)) = synthesize(c, grid);
    }
    return out;
  }

  /// Values of sum_j c_j phi_j at the grid nodes.
  [[nodiscard]] VectorXcd synthesize(const VectorXcd& coeffs, const QuadratureGrid& grid) const {
    require_same_manifold(grid);
    if (static_cast<std::size_t>(coeffs.size()) != size()) throw DomainError("coefficient vector size mismatch");
    return manifold_.is_torus() ? synthesize_torus(coeffs, grid) : synthesize_sphere(coeffs, grid);
  }

 private:
  SpectralBasis(ManifoldModel m, int truncation) : manifold_(std::move(m)), truncation_(truncation) {}

  void finish() {
    for (std::size_t j = 0; j < entries_.size(); ++j) entries_[j].index = j;
  }

  void require_same_manifold(const QuadratureGrid& grid) const {
    if (!(grid.manifold() == manifold_)) throw DomainError("grid and basis live on different manifolds");
    const auto& c = grid.resolution().counts;
    if (manifold_.is_sphere()) {
      if (c[0] < static_cast<std::size_t>(truncation_ + 1) || c[1] < static_cast<std::size_t>(2 * truncation_ + 1)) {
        throw ResolutionError("sphere grid under-resolves degree " + std::to_string(truncation_));
      }
    } else {
      for (auto ci : c) {
        if (ci < static_cast<std::size_t>(2 * truncation_ + 1)) {
          throw ResolutionError("torus grid under-resolves frequency " + std::to_string(truncation_));
        }
      }
    }
  }

  [[nodiscard]] VectorXcd synthesize_torus(const VectorXcd& c, const QuadratureGrid& grid) const {
    const int n = manifold_.dim();
    const auto& axes = grid.axes();
    const int K = truncation_;
    // per-axis tables e^{2 pi i m x / p} for m = -K..K
    std::vector<MatrixXcd> table(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const auto& nodes = axes[static_cast<std::size_t>(i)].nodes;
      MatrixXcd t(static_cast<Eigen::Index>(nodes.size()), 2 * K + 1);
      for (std::size_t a = 0; a < nodes.size(); ++a) {
        for (int m = -K; m <= K; ++m) {
          t(static_cast<Eigen::Index>(a), m + K) =
              std::polar(1.0, 2.0 * pi * m * nodes[a] / manifold_.periods()[static_cast<std::size_t>(i)]);
        }
      }
      table[static_cast<std::size_t>(i)] = std::move(t);
    }
    const double scale = 1.0 / std::sqrt(manifold_.total_volume());
    VectorXcd out = VectorXcd::Zero(static_cast<Eigen::Index>(grid.size()));
    std::vector<std::size_t> idx(static_cast<std::size_t>(n));
    for (std::size_t j = 0; j < size(); ++j) {
      const cplx cj = c[static_cast<Eigen::Index>(j)];
      if (cj == cplx(0.0, 0.0)) continue;
      const auto& freq = entries_[j].mode.freq;
      for (std::size_t node = 0; node < grid.size(); ++node) {
        std::size_t rem = node;
        cplx v = cj * scale;
        for (int ax = n; ax-- > 0;) {
          const auto len = axes[static_cast<std::size_t>(ax)].nodes.size();
          const std::size_t a = rem % len;
          rem /= len;
          v *= table[static_cast<std::size_t>(ax)](static_cast<Eigen::Index>(a), freq[static_cast<std::size_t>(ax)] + K);
        }
        out[static_cast<Eigen::Index>(node)] += v;
      }
    }
    return out;
  }

  [[nodiscard]] VectorXcd synthesize_sphere(const VectorXcd& c, const QuadratureGrid& grid) const {
    if (manifold_.dim() != 2) throw DomainError("sphere synthesis is implemented on S^2 only");
    const int L = truncation_;
    const auto& lat = grid.axes()[0].nodes;
    const auto& lon = grid.axes()[1].nodes;
    VectorXcd out(static_cast<Eigen::Index>(grid.size()));
    std::vector<double> col(static_cast<std::size_t>(L + 1));
    std::vector<cplx> cos_part(static_cast<std::size_t>(L + 1));
    std::vector<cplx> sin_part(static_cast<std::size_t>(L + 1));
    for (std::size_t it = 0; it < lat.size(); ++it) {
      for (int m = 0; m <= L; ++m) {
        detail::legendre_column(L, m, lat[it], col.data());
        cplx a = 0.0;
        cplx b = 0.0;
        for (int l = m; l <= L; ++l) {
          const double p = col[static_cast<std::size_t>(l - m)];
          a += c[l * l + l + m] * p;
          if (m > 0) b += c[l * l + l - m] * p;
        }
        cos_part[static_cast<std::size_t>(m)] = a;
        sin_part[static_cast<std::size_t>(m)] = b;
      }
      for (std::size_t ip = 0; ip < lon.size(); ++ip) {
        const double phi = lon[ip];
        cplx v = cos_part[0];
        for (int m = 1; m <= L; ++m) {
          v += std::sqrt(2.0) * (cos_part[static_cast<std::size_t>(m)] * std::cos(m * phi) +
                                 sin_part[static_cast<std::size_t>(m)] * std::sin(m * phi));
        }
        out[static_cast<Eigen::Index>(it * lon.size() + ip)] = v;
      }
    }
    return out;
  }

  ManifoldModel manifold_;
  int truncation_ = 0;
  std::vector<SpectralEntry> entries_;
};

inline SpectralBasis torus_basis(const ManifoldModel& m, int K) { return SpectralBasis::torus(m, K); }
inline SpectralBasis sphere_basis(int L) { return SpectralBasis::sphere(L); }

/// Coefficients of a function in an orthonormal basis.
struct ModeVector {
  std::shared_ptr<const SpectralBasis> basis;
  VectorXcd coeffs;

  static ModeVector zeros(std::shared_ptr<const SpectralBasis> b) {
    const auto n = static_cast<Eigen::Index>(b->size());
    return {std::move(b), VectorXcd::Zero(n)};
  }

  static ModeVector unit(std::shared_ptr<const SpectralBasis> b, std::size_t j, cplx value = 1.0) {
    ModeVector u = zeros(std::move(b));
    u.coeffs[static_cast<Eigen::Index>(j)] = value;
    return u;
  }

  /// L^2 norm by Parseval.
  [[nodiscard]] double norm() const { return coeffs.norm(); }
};

enum class WindowKind { Sharp, Smooth };
enum class WindowProfile { Gaussian, Bump };

/// Sharp: indicator of lambda_j in [center, center + 1).
/// Smooth: multiplier chi((lambda_j - center) / scale), chi(0) != 0.
struct WindowSpec {
  double center = 0.0;
  WindowKind kind = WindowKind::Sharp;
  WindowProfile profile = WindowProfile::Gaussian;
  double scale = 1.0;

  static WindowSpec sharp(double center) { return {center, WindowKind::Sharp, WindowProfile::Gaussian, 1.0}; }
  static WindowSpec smooth(double center, double scale = 1.0, WindowProfile p = WindowProfile::Gaussian) {
    if (!(scale > 0.0)) throw DomainError("smooth window scale must be positive");
    return {center, WindowKind::Smooth, p, scale};
  }

  [[nodiscard]] static double chi(WindowProfile p, double t) {
    if (p == WindowProfile::Gaussian) return std::exp(-t * t);
    return std::abs(t) < 1.0 ? std::exp(-1.0 / (1.0 - t * t)) : 0.0;
  }

  [[nodiscard]] double multiplier(double frequency) const {
    if (kind == WindowKind::Sharp) return (frequency >= center && frequency < center + 1.0) ? 1.0 : 0.0;
    return chi(profile, (frequency - center) / scale);
  }

  /// Frequencies above this carry a zero (or below-roundoff) multiplier.
  [[nodiscard]] double upper_edge() const {
    if (kind == WindowKind::Sharp) return center + 1.0;
    // exp(-t^2) < 1e-17 for t > 6.3
    return center + scale * (profile == WindowProfile::Gaussian ? 6.3 : 1.0);
  }
};

/// Pi_lambda u (sharp) or chi((sqrt(-Delta) - lambda)/scale) u (smooth).
inline ModeVector window_project(const ModeVector& u, const WindowSpec& w) {
  if (w.upper_edge() > u.basis->complete_below()) {
    throw ResolutionError("window reaching frequency " + format_double(w.upper_edge()) +
                          " exceeds the basis truncation (complete below " +
                          format_double(u.basis->complete_below()) + ")");
  }
  ModeVector out = u;
  const auto& e = u.basis->entries();
  for (std::size_t j = 0; j < e.size(); ++j) out.coeffs[static_cast<Eigen::Index>(j)] *= w.multiplier(e[j].frequency);
  return out;
}

/// g = (h^2 Delta + 1) psi, i.e. g_j = (1 - h^2 lambda_j^2) psi_j.
inline ModeVector helmholtz_residual(const ModeVector& psi, double h) {
  if (!(h > 0.0)) throw DomainError("helmholtz_residual requires h > 0");
  ModeVector g = psi;
  const auto& e = psi.basis->entries();
  for (std::size_t j = 0; j < e.size(); ++j) g.coeffs[static_cast<Eigen::Index>(j)] *= (1.0 - h * h * e[j].eigenvalue);
  return g;
}

/// (sum (1 + lambda_j^2)^s |c_j|^2)^{1/2}.
inline double sobolev_norm(const ModeVector& u, double s) {
  CompensatedSum<double> acc;
  const auto& e = u.basis->entries();
  for (std::size_t j = 0; j < e.size(); ++j) {
    acc.add(std::pow(1.0 + e[j].eigenvalue, s) * std::norm(u.coeffs[static_cast<Eigen::Index>(j)]));
  }
  return std::sqrt(acc.value());
}

/// e_j = (x_1 + i x_2)^j on S^n, eigenvalue j(j + n - 1).
struct HighestWeight {
  int j = 0;
  int n = 2;

  [[nodiscard]] double eigenvalue() const { return double(j) * (j + n - 1); }
  /// ||e_j||^2 = 2 pi^{(n+1)/2} Gamma(j+1) / Gamma(j + (n+1)/2).
  [[nodiscard]] double norm_squared() const {
    const double a = 0.5 * (n + 1);
    return 2.0 * std::exp(a * std::log(pi) + std::lgamma(j + 1.0) - std::lgamma(j + a));
  }
  [[nodiscard]] cplx operator()(const VectorXd& p) const {
    const double r = std::hypot(p[0], p[1]);
    return std::polar(std::pow(r, j), j * std::atan2(p[1], p[0]));
  }
};

inline cplx highest_weight_eval(int j, int n, const VectorXd& p) {
  if (j < 0) throw DomainError("highest-weight degree must be >= 0");
  const auto m = ManifoldModel::sphere(n);
  m.require_point(p);
  return HighestWeight{j, n}(p);
}

/// L^2-normalised degree-j zonal harmonic on S^2 at colatitude theta.
inline double zonal_eval(int j, double theta) {
  if (j < 0) throw DomainError("zonal degree must be >= 0");
  std::vector<double> col(static_cast<std::size_t>(j + 1));
  detail::legendre_column(j, 0, std::cos(theta), col.data());
  return col.back();
}

/// Rows "j,lambda2,re,im" with a header line.
inline void write_mode_vector_csv(std::ostream& os, const ModeVector& u) {
  os << "j,lambda2,re,im\n";
  const auto& e = u.basis->entries();
  for (std::size_t j = 0; j < e.size(); ++j) {
    const cplx c = u.coeffs[static_cast<Eigen::Index>(j)];
    os << j << ',' << format_double(e[j].eigenvalue) << ',' << format_double(c.real()) << ','
       << format_double(c.imag()) << '\n';
  }
}

/// Inverse of write_mode_vector_csv; rows may be sparse (missing j are zero).
inline ModeVector read_mode_vector_csv(std::istream& is, std::shared_ptr<const SpectralBasis> basis) {
  ModeVector u = ModeVector::zeros(basis);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line.rfind("j,", 0) == 0) continue;
    std::stringstream ss(line);
    std::string f[4];
    for (auto& s : f) {
      if (!std::getline(ss, s, ',')) throw DomainError("mode csv line " + std::to_string(lineno) + ": expected 4 fields");
    }
    const std::size_t j = std::stoul(f[0]);
    if (j >= basis->size()) throw DomainError("mode csv line " + std::to_string(lineno) + ": index out of range");
    const double ev = parse_double(f[1]);
    if (std::abs(ev - basis->entries()[j].eigenvalue) > 1e-9 * std::max(1.0, ev)) {
      throw DomainError("mode csv line " + std::to_string(lineno) + ": eigenvalue does not match basis");
    }
    u.coeffs[static_cast<Eigen::Index>(j)] = {parse_double(f[2]), parse_double(f[3])};
  }
  return u;
}

}  // namespace tubelab

#endif  // TUBELAB_SPECTRAL_HPP
