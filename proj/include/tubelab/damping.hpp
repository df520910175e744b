#ifndef TUBELAB_DAMPING_HPP
#define TUBELAB_DAMPING_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "tubelab/common.hpp"
#include "tubelab/geometry.hpp"
#include "tubelab/parallel.hpp"
#include "tubelab/quadrature.hpp"
#include "tubelab/spectral.hpp"

namespace tubelab {

enum class DampingForm { DistancePower, SmoothSurrogate, Constant, PatchMax };

inline std::string to_string(DampingForm f) {
  switch (f) {
    case DampingForm::DistancePower: return "DistancePower";
    case DampingForm::SmoothSurrogate: return "SmoothSurrogate";
    case DampingForm::Constant: return "Constant";
    case DampingForm::PatchMax: return "PatchMax";
  }
  return "?";
}

/// Nonnegative damping coefficient b on a manifold.
///   DistancePower:   amplitude * d(p, Sigma)^{2 kappa}
///   SmoothSurrogate: amplitude * s(p)^{2 kappa}, s = sin d on spheres and
///                    (sum (p_i/pi)^2 sin^2(pi x_i / p_i))^{1/2} over the fixed
///                    coordinates on tori; c1 d^{2 kappa} <= b <= c2 d^{2 kappa}
///   Constant:        c everywhere
///   PatchMax:        pointwise max of the patches
struct DampingProfile {
  DampingForm form = DampingForm::Constant;
  std::optional<SubmanifoldSpec> submanifold;
  double kappa = 0.0;
  double amplitude = 0.0;
  std::vector<DampingProfile> patches;

  static DampingProfile distance_power(SubmanifoldSpec s, double kappa, double amplitude = 1.0) {
    if (!(kappa > 0.0)) throw DomainError("damping kappa must be positive");
    if (!(amplitude >= 0.0)) throw DomainError("damping amplitude must be nonnegative");
    return {DampingForm::DistancePower, std::move(s), kappa, amplitude, {}};
  }
  static DampingProfile smooth_surrogate(SubmanifoldSpec s, double kappa, double amplitude = 1.0) {
    if (!(kappa > 0.0)) throw DomainError("damping kappa must be positive");
    if (!(amplitude >= 0.0)) throw DomainError("damping amplitude must be nonnegative");
    return {DampingForm::SmoothSurrogate, std::move(s), kappa, amplitude, {}};
  }
  static DampingProfile constant(double c) {
    if (!(c >= 0.0)) throw DomainError("constant damping must be nonnegative");
    return {DampingForm::Constant, std::nullopt, 0.0, c, {}};
  }
  static DampingProfile patch_max(std::vector<DampingProfile> patches) {
    if (patches.empty()) throw DomainError("PatchMax needs at least one patch");
    for (const auto& p : patches) {
      if (p.form == DampingForm::PatchMax) throw DomainError("PatchMax patches cannot be nested");
    }
    return {DampingForm::PatchMax, std::nullopt, 0.0, 0.0, std::move(patches)};
  }

  /// Lower/upper constants relative to amplitude * d^{2 kappa}.
  [[nodiscard]] double c1() const { return form == DampingForm::SmoothSurrogate ? std::pow(2.0 / pi, 2.0 * kappa) : 1.0; }
  [[nodiscard]] double c2() const { return 1.0; }

  /// Largest vanishing order over the patches (kappa_0); 0 for pure constants.
  [[nodiscard]] double kappa_max() const {
    if (form != DampingForm::PatchMax) return kappa;
    double k = 0.0;
    for (const auto& p : patches) k = std::max(k, p.kappa);
    return k;
  }

  void require_compatible(const ManifoldModel& m) const {
    if (submanifold) submanifold->require_compatible(m);
    for (const auto& p : patches) p.require_compatible(m);
  }

  [[nodiscard]] double operator()(const ManifoldModel& m, const double* p) const {
    switch (form) {
      case DampingForm::Constant:
        return amplitude;
      case DampingForm::DistancePower:
        return amplitude * std::pow(detail::distance_to_submanifold_unchecked(m, *submanifold, p), 2.0 * kappa);
      case DampingForm::SmoothSurrogate:
        return amplitude * std::pow(surrogate_s2(m, p), kappa);
      case DampingForm::PatchMax: {
        double b = 0.0;
        for (const auto& q : patches) b = std::max(b, q(m, p));
        return b;
      }
    }
    return 0.0;
  }

  [[nodiscard]] double operator()(const ManifoldModel& m, const VectorXd& p) const {
    m.require_point(p);
    return (*this)(m, p.data());
  }

  /// Torus coordinates the profile depends on.
  [[nodiscard]] std::vector<bool> torus_dependence(int n) const {
    std::vector<bool> dep(static_cast<std::size_t>(n), false);
    if (submanifold && submanifold->kind == SubmanifoldKind::SubTorus) {
      for (std::size_t i = 0; i < dep.size(); ++i) dep[i] = submanifold->mask[i];
    }
    for (const auto& q : patches) {
      const auto d = q.torus_dependence(n);
      for (std::size_t i = 0; i < dep.size(); ++i) dep[i] = dep[i] || d[i];
    }
    return dep;
  }

  /// True when b on S^n depends only on the last ambient coordinate.
  [[nodiscard]] bool zonal_on_sphere(const ManifoldModel& m) const {
    if (!m.is_sphere()) return false;
    if (form == DampingForm::Constant) return true;
    if (form == DampingForm::PatchMax) {
      return std::all_of(patches.begin(), patches.end(), [&](const auto& q) { return q.zonal_on_sphere(m); });
    }
    if (submanifold->kind == SubmanifoldKind::PolePair) return true;
    return submanifold->kind == SubmanifoldKind::GreatSubsphere && submanifold->k == m.dim() - 1;
  }

 private:
  // s^2 for the surrogate, without the square root
  [[nodiscard]] double surrogate_s2(const ManifoldModel& m, const double* p) const {
    if (m.is_sphere()) return square(std::sin(detail::distance_to_submanifold_unchecked(m, *submanifold, p)));
    double acc = 0.0;
    for (int i = 0; i < m.dim(); ++i) {
      if (!submanifold->mask[static_cast<std::size_t>(i)]) continue;
      const double per = m.periods()[static_cast<std::size_t>(i)];
      acc += square(per / pi * std::sin(pi * p[i] / per));
    }
    return acc;
  }
};

/// B_{jk} = <b phi_k, phi_j> by grid quadrature (dense; small bases only).
inline MatrixXcd gram_matrix(const DampingProfile& b, const SpectralBasis& basis, const QuadratureGrid& grid) {
  b.require_compatible(basis.manifold());
  const MatrixXcd V = basis.evaluate(grid);
  VectorXd wb(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    wb[static_cast<Eigen::Index>(i)] =
        grid.weights()[static_cast<Eigen::Index>(i)] * b(grid.manifold(), grid.nodes().col(static_cast<Eigen::Index>(i)).data());
  }
  MatrixXcd B = V.adjoint() * wb.asDiagonal() * V;
  return 0.5 * (B + B.adjoint());
}

/// Galerkin system split into blocks that the damping does not couple.
struct BlockedSystem {
  std::shared_ptr<const SpectralBasis> basis;
  std::vector<std::vector<std::size_t>> blocks;  // basis indices per block
  std::vector<MatrixXcd> gram;                   // B restricted to each block
  std::vector<VectorXd> lambda2;                 // eigenvalues per block

  /// One dense block from raw data (no basis attached).
  static BlockedSystem dense(const VectorXd& lambda2, const MatrixXcd& B) {
    if (B.rows() != lambda2.size() || B.cols() != lambda2.size()) throw DomainError("dense system: size mismatch");
    BlockedSystem s;
    std::vector<std::size_t> all(static_cast<std::size_t>(lambda2.size()));
    for (std::size_t j = 0; j < all.size(); ++j) all[j] = j;
    s.blocks.push_back(std::move(all));
    s.gram.push_back(B);
    s.lambda2.push_back(lambda2);
    return s;
  }

  [[nodiscard]] std::size_t size() const {
    std::size_t n = 0;
    for (const auto& b : blocks) n += b.size();
    return n;
  }

  [[nodiscard]] MatrixXcd dense_gram() const {
    const auto n = static_cast<Eigen::Index>(size());
    MatrixXcd B = MatrixXcd::Zero(n, n);
    for (std::size_t k = 0; k < blocks.size(); ++k) {
      for (std::size_t a = 0; a < blocks[k].size(); ++a) {
        for (std::size_t c = 0; c < blocks[k].size(); ++c) {
          B(static_cast<Eigen::Index>(blocks[k][a]), static_cast<Eigen::Index>(blocks[k][c])) =
              gram[k](static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(c));
        }
      }
    }
    return B;
  }

  /// Gathers the entries of a coefficient vector belonging to block k.
  [[nodiscard]] VectorXcd restrict(const VectorXcd& v, std::size_t k) const {
    VectorXcd out(static_cast<Eigen::Index>(blocks[k].size()));
    for (std::size_t a = 0; a < blocks[k].size(); ++a) out[static_cast<Eigen::Index>(a)] = v[static_cast<Eigen::Index>(blocks[k][a])];
    return out;
  }

  void scatter(const VectorXcd& part, std::size_t k, VectorXcd& v) const {
    for (std::size_t a = 0; a < blocks[k].size(); ++a) v[static_cast<Eigen::Index>(blocks[k][a])] = part[static_cast<Eigen::Index>(a)];
  }
};

namespace detail {

inline void require_psd(const MatrixXcd& B, const std::string& where) {
  if (B.size() == 0) return;
  const double scale = std::max(1.0, B.cwiseAbs().maxCoeff());
  if ((B - B.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw NumericalError(where + ": damping Gram matrix is not Hermitian (under-resolved quadrature)");
  }
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(B, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-10 * scale) {
    throw NumericalError(where + ": damping Gram matrix has a negative eigenvalue (under-resolved quadrature)");
  }
}

inline void fill_lambda2(BlockedSystem& s) {
  s.lambda2.clear();
  for (const auto& blk : s.blocks) {
    VectorXd l(static_cast<Eigen::Index>(blk.size()));
    for (std::size_t a = 0; a < blk.size(); ++a) l[static_cast<Eigen::Index>(a)] = s.basis->entries()[blk[a]].eigenvalue;
    s.lambda2.push_back(std::move(l));
  }
}

/// Fourier coefficients bhat(k) = vol^{-1} int b e^{-2 pi i k.x/p}, |k_i| <= kmax,
/// by separable DFTs of the grid samples; axes b ignores get exact zeros.
inline std::vector<cplx> torus_fourier(const DampingProfile& b, const ManifoldModel& m, int kmax,
                                       std::size_t samples_per_axis) {
  const int n = m.dim();
  std::vector<std::size_t> counts(static_cast<std::size_t>(n), samples_per_axis);
  const auto grid = build_grid(m, GridResolution{counts});
  const auto dep = b.torus_dependence(n);
  const std::size_t span = static_cast<std::size_t>(2 * kmax + 1);
  std::vector<cplx> data(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) data[i] = b(m, grid.nodes().col(static_cast<Eigen::Index>(i)).data());
  // shape is transformed one axis at a time, row-major with axis 0 outermost
  std::vector<std::size_t> shape = counts;
  for (int ax = 0; ax < n; ++ax) {
    const std::size_t len = shape[static_cast<std::size_t>(ax)];
    std::size_t outer = 1;
    std::size_t inner = 1;
    for (int a = 0; a < ax; ++a) outer *= shape[static_cast<std::size_t>(a)];
    for (int a = ax + 1; a < n; ++a) inner *= shape[static_cast<std::size_t>(a)];
    std::vector<cplx> out(outer * span * inner);
    std::vector<cplx> tw(len * span);
    for (std::size_t x = 0; x < len; ++x) {
      for (int k = -kmax; k <= kmax; ++k) {
        tw[x * span + static_cast<std::size_t>(k + kmax)] = std::polar(1.0 / double(len), -2.0 * pi * k * double(x) / double(len));
      }
    }
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t kk = 0; kk < span; ++kk) {
        const bool zero = !dep[static_cast<std::size_t>(ax)] && kk != static_cast<std::size_t>(kmax);
        for (std::size_t in = 0; in < inner; ++in) {
          CompensatedSum<cplx> acc;
          if (!zero) {
            for (std::size_t x = 0; x < len; ++x) acc.add(tw[x * span + kk] * data[(o * len + x) * inner + in]);
          }
          out[(o * span + kk) * inner + in] = acc.value();
        }
      }
    }
    data = std::move(out);
    shape[static_cast<std::size_t>(ax)] = span;
  }
  return data;
}

inline BlockedSystem torus_system(const DampingProfile& b, std::shared_ptr<const SpectralBasis> basis,
                                  std::size_t samples_per_axis) {
  const auto& m = basis->manifold();
  const int n = m.dim();
  const int K = basis->truncation();
  BlockedSystem s;
  s.basis = basis;
  const auto dep = b.torus_dependence(n);
  // modes that agree on the ignored axes are coupled; others are not
  std::map<std::vector<int>, std::size_t> block_of;
  for (const auto& e : basis->entries()) {
    std::vector<int> key;
    for (int i = 0; i < n; ++i) {
      if (!dep[static_cast<std::size_t>(i)]) key.push_back(e.mode.freq[static_cast<std::size_t>(i)]);
    }
    auto [it, fresh] = block_of.try_emplace(key, s.blocks.size());
    if (fresh) s.blocks.emplace_back();
    s.blocks[it->second].push_back(e.index);
  }
  s.gram.resize(s.blocks.size());
  if (b.form == DampingForm::Constant) {
    for (std::size_t k = 0; k < s.blocks.size(); ++k) {
      const auto d = static_cast<Eigen::Index>(s.blocks[k].size());
      s.gram[k] = MatrixXcd::Identity(d, d) * b.amplitude;
    }
    fill_lambda2(s);
    return s;
  }
  if (samples_per_axis < static_cast<std::size_t>(4 * K + 1)) {
    throw ResolutionError("damping quadrature needs at least 4K+1 samples per axis");
  }
  const int kmax = 2 * K;
  const auto bhat = torus_fourier(b, m, kmax, samples_per_axis);
  const std::size_t span = static_cast<std::size_t>(2 * kmax + 1);
  auto coeff = [&](const std::vector<int>& a, const std::vector<int>& c) {
    std::size_t idx = 0;
    for (int i = 0; i < n; ++i) {
      idx = idx * span + static_cast<std::size_t>(a[static_cast<std::size_t>(i)] - c[static_cast<std::size_t>(i)] + kmax);
    }
    return bhat[idx];
  };
  parallel_for(s.blocks.size(), [&](std::size_t k) {
    const auto& blk = s.blocks[k];
    const auto d = static_cast<Eigen::Index>(blk.size());
    MatrixXcd B(d, d);
    for (Eigen::Index r = 0; r < d; ++r) {
      for (Eigen::Index c = 0; c < d; ++c) {
        B(r, c) = coeff(basis->entries()[blk[static_cast<std::size_t>(r)]].mode.freq,
                        basis->entries()[blk[static_cast<std::size_t>(c)]].mode.freq);
      }
    }
    s.gram[k] = 0.5 * (B + B.adjoint());
  });
  fill_lambda2(s);
  return s;
}

/// Zonal b on S^2: one block per (|m|, branch), entries
/// 2 pi int b(t) Pbar_l^m(t) Pbar_l'^m(t) dt by Gauss-Legendre in t.
inline BlockedSystem sphere_zonal_system(const DampingProfile& b, std::shared_ptr<const SpectralBasis> basis,
                                         std::size_t nodes_t) {
  const auto& m = basis->manifold();
  const int L = basis->truncation();
  const auto rule = gauss_legendre(nodes_t);
  VectorXd wb(static_cast<Eigen::Index>(nodes_t));
  for (std::size_t i = 0; i < nodes_t; ++i) {
    const double t = rule.nodes[i];
    const double p[3] = {std::sqrt(std::max(0.0, 1.0 - t * t)), 0.0, t};
    wb[static_cast<Eigen::Index>(i)] = 2.0 * pi * rule.weights[i] * b(m, p);
  }
  std::vector<MatrixXd> per_m(static_cast<std::size_t>(L + 1));
  parallel_for(static_cast<std::size_t>(L + 1), [&](std::size_t mm) {
    const int mo = static_cast<int>(mm);
    const Eigen::Index d = L - mo + 1;
    MatrixXd P(static_cast<Eigen::Index>(nodes_t), d);
    std::vector<double> col(static_cast<std::size_t>(d));
    for (std::size_t i = 0; i < nodes_t; ++i) {
      detail::legendre_column(L, mo, rule.nodes[i], col.data());
      for (Eigen::Index a = 0; a < d; ++a) P(static_cast<Eigen::Index>(i), a) = col[static_cast<std::size_t>(a)];
    }
    MatrixXd B = P.transpose() * wb.asDiagonal() * P;
    per_m[mm] = 0.5 * (B + B.transpose());
  });
  BlockedSystem s;
  s.basis = basis;
  for (int mo = 0; mo <= L; ++mo) {
    for (int sign : {1, -1}) {
      if (mo == 0 && sign == -1) continue;
      std::vector<std::size_t> blk;
      for (int l = mo; l <= L; ++l) blk.push_back(*basis->find_sphere(l, sign * mo));
      s.blocks.push_back(std::move(blk));
      s.gram.push_back(per_m[static_cast<std::size_t>(mo)].cast<cplx>());
    }
  }
  fill_lambda2(s);
  return s;
}

}  // namespace detail

struct SystemOptions {
  /// samples per axis for torus Fourier coefficients (0: max(256, 4K+2))
  std::size_t torus_samples = 0;
  /// Gauss-Legendre nodes in t for zonal sphere damping (0: 4L+64)
  std::size_t sphere_nodes = 0;
  /// grid for the dense fallback
  std::optional<QuadratureGrid> grid;
};

/// Blocked Galerkin system for b in the given basis. Tori use Fourier
/// coefficients of b; zonal damping on S^2 uses azimuthal blocks; anything
/// else falls back to one dense block assembled on a grid.
inline BlockedSystem damping_system(const DampingProfile& b, std::shared_ptr<const SpectralBasis> basis,
                                    const SystemOptions& opt = {}) {
  const auto& m = basis->manifold();
  b.require_compatible(m);
  BlockedSystem s;
  if (m.is_torus()) {
    const int K = basis->truncation();
    const std::size_t samples = opt.torus_samples ? opt.torus_samples : std::max<std::size_t>(256, static_cast<std::size_t>(4 * K + 2));
    s = detail::torus_system(b, basis, samples);
  } else if (b.zonal_on_sphere(m) && m.dim() == 2) {
    const int L = basis->truncation();
    const std::size_t nodes = opt.sphere_nodes ? opt.sphere_nodes : static_cast<std::size_t>(4 * L + 64);
    s = detail::sphere_zonal_system(b, basis, nodes);
  } else {
    if (!opt.grid) throw DomainError("non-separable damping needs an explicit quadrature grid");
    s.basis = basis;
    std::vector<std::size_t> all(basis->size());
    for (std::size_t j = 0; j < all.size(); ++j) all[j] = j;
    s.blocks.push_back(std::move(all));
    s.gram.push_back(gram_matrix(b, *basis, *opt.grid));
    detail::fill_lambda2(s);
  }
  for (const auto& B : s.gram) detail::require_psd(B, "damping_system");
  return s;
}

}  // namespace tubelab

#endif  // TUBELAB_DAMPING_HPP
