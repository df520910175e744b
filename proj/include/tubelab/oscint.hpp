#ifndef TUBELAB_OSCINT_HPP
#define TUBELAB_OSCINT_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include <Eigen/LU>
#include <Eigen/SVD>
#include <fftw3.h>

#include "tubelab/common.hpp"
#include "tubelab/fit.hpp"
#include "tubelab/format.hpp"
#include "tubelab/parallel.hpp"

namespace tubelab {

enum class PhaseFamily { Bilinear, RegularizedDistance, Custom };

inline std::string to_string(PhaseFamily f) {
  switch (f) {
    case PhaseFamily::Bilinear: return "Bilinear";
    case PhaseFamily::RegularizedDistance: return "RegularizedDistance";
    case PhaseFamily::Custom: return "Custom";
  }
  return "?";
}

/// Real phase phi(X, Xi) with X, Xi in R^dim.
///   Bilinear:            X . Xi
///   RegularizedDistance: (|X - Xi|^2 + delta^2)^{1/2}
///   Custom:              user evaluator plus a bound on |grad phi|
struct PhaseFunction {
  using Evaluator = std::function<double(const double*, const double*)>;

  PhaseFamily family = PhaseFamily::Bilinear;
  int dim = 1;
  double delta = 0.0;
  Evaluator custom;
  double custom_gradient_bound = 0.0;

  static PhaseFunction bilinear(int n) {
    if (n < 1) throw DomainError("phase dimension must be positive");
    return {PhaseFamily::Bilinear, n, 0.0, {}, 0.0};
  }
  static PhaseFunction regularized_distance(int d, double delta) {
    if (d < 1) throw DomainError("phase dimension must be positive");
    if (!std::isfinite(delta)) throw DomainError("delta must be finite");
    return {PhaseFamily::RegularizedDistance, d, delta, {}, 0.0};
  }
  static PhaseFunction make_custom(int n, Evaluator f, double gradient_bound) {
    if (n < 1) throw DomainError("phase dimension must be positive");
    if (!f) throw DomainError("custom phase needs an evaluator");
    if (!(gradient_bound >= 0.0)) throw DomainError("custom phase needs a gradient bound");
    return {PhaseFamily::Custom, n, 0.0, std::move(f), gradient_bound};
  }

  [[nodiscard]] bool translation_invariant() const { return family == PhaseFamily::RegularizedDistance; }

  [[nodiscard]] double operator()(const double* X, const double* Xi) const {
    if (family == PhaseFamily::Custom) return custom(X, Xi);
    return eval<double>(X, Xi);
  }

  /// Built-in families in any floating type (extended precision for difference stencils).
  template <typename T>
  [[nodiscard]] T eval(const T* X, const T* Xi) const {
    T s = family == PhaseFamily::RegularizedDistance ? T(delta) * T(delta) : T(0);
    for (int k = 0; k < dim; ++k) s += family == PhaseFamily::Bilinear ? X[k] * Xi[k] : (X[k] - Xi[k]) * (X[k] - Xi[k]);
    return family == PhaseFamily::Bilinear ? s : std::sqrt(s);
  }

  [[nodiscard]] double operator()(const VectorXd& X, const VectorXd& Xi) const {
    require_point(X);
    require_point(Xi);
    return (*this)(X.data(), Xi.data());
  }

  void require_point(const VectorXd& p) const {
    if (p.size() != dim) throw DomainError("phase point has dimension " + std::to_string(p.size()) + ", expected " + std::to_string(dim));
    if (!p.allFinite()) throw DomainError("phase point is not finite");
  }
};

/// Plateau bump: 1 on |s| <= rho, 0 on |s| >= 1, C-infinity in between.
inline double plateau_bump(double s, double rho) {
  const double a = std::abs(s);
  if (a >= 1.0) return 0.0;
  if (a <= rho) return 1.0;
  const double u = (1.0 - a) / (1.0 - rho);
  auto psi = [](double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; };
  return psi(u) / (psi(u) + psi(1.0 - u));
}

/// a(X, Xi) = scale * prod_k chi((X_k - c_k)/w_k) * prod_k chi((Xi_k - c'_k)/w'_k).
struct AmplitudeCutoff {
  VectorXd x_center;
  VectorXd x_half;
  VectorXd xi_center;
  VectorXd xi_half;
  double rho = 0.8;
  double scale = 1.0;

  static AmplitudeCutoff box(VectorXd xc, VectorXd xw, VectorXd xic, VectorXd xiw, double rho = 0.8, double scale = 1.0) {
    AmplitudeCutoff a{std::move(xc), std::move(xw), std::move(xic), std::move(xiw), rho, scale};
    a.validate();
    return a;
  }

  void validate() const {
    const auto n = x_center.size();
    if (n < 1 || x_half.size() != n || xi_center.size() != n || xi_half.size() != n) {
      throw DomainError("cutoff boxes need matching nonzero dimensions");
    }
    if (!(x_half.minCoeff() > 0.0) || !(xi_half.minCoeff() > 0.0)) throw DomainError("cutoff half widths must be positive");
    if (!(rho >= 0.0 && rho < 1.0)) throw DomainError("cutoff plateau must lie in [0, 1)");
    if (!std::isfinite(scale)) throw DomainError("cutoff scale must be finite");
  }

  [[nodiscard]] int dim() const { return static_cast<int>(x_center.size()); }

  [[nodiscard]] double x_factor(const double* X) const {
    double v = 1.0;
    for (int k = 0; k < dim(); ++k) v *= plateau_bump((X[k] - x_center[k]) / x_half[k], rho);
    return v;
  }
  [[nodiscard]] double xi_factor(const double* Xi) const {
    double v = 1.0;
    for (int k = 0; k < dim(); ++k) v *= plateau_bump((Xi[k] - xi_center[k]) / xi_half[k], rho);
    return v;
  }
  [[nodiscard]] double operator()(const double* X, const double* Xi) const { return scale * x_factor(X) * xi_factor(Xi); }

  /// One-dimensional factor along axis k.
  [[nodiscard]] AmplitudeCutoff axis(int k) const {
    const auto K = static_cast<Eigen::Index>(k);
    return box(VectorXd::Constant(1, x_center[K]), VectorXd::Constant(1, x_half[K]), VectorXd::Constant(1, xi_center[K]),
               VectorXd::Constant(1, xi_half[K]), rho, 1.0);
  }
};

/// Bound on |grad_X phi| and |grad_Xi phi| over the cutoff support.
inline double phase_gradient_bound(const PhaseFunction& phi, const AmplitudeCutoff& a) {
  switch (phi.family) {
    case PhaseFamily::Bilinear: {
      // grad_X = Xi, grad_Xi = X
      double gx = 0.0;
      double gxi = 0.0;
      for (int k = 0; k < a.dim(); ++k) {
        gx += square(std::abs(a.xi_center[k]) + a.xi_half[k]);
        gxi += square(std::abs(a.x_center[k]) + a.x_half[k]);
      }
      return std::sqrt(std::max(gx, gxi));
    }
    case PhaseFamily::RegularizedDistance:
      return 1.0;
    case PhaseFamily::Custom:
      return phi.custom_gradient_bound;
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Mixed Hessian and the distance-phase rank analysis

enum class HessianMethod { Analytic, CentralDifference };

/// d^2 phi / dX_i dXi_j.
inline MatrixXd mixed_hessian(const PhaseFunction& phi, const VectorXd& X, const VectorXd& Xi,
                              HessianMethod method = HessianMethod::Analytic, double step = 1e-5) {
  phi.require_point(X);
  phi.require_point(Xi);
  const int d = phi.dim;
  if (phi.family == PhaseFamily::RegularizedDistance && phi.delta == 0.0 && (X - Xi).norm() == 0.0) {
    throw DomainError("distance phase with delta = 0 is singular on the diagonal");
  }
  if (method == HessianMethod::Analytic) {
    switch (phi.family) {
      case PhaseFamily::Bilinear:
        return MatrixXd::Identity(d, d);
      case PhaseFamily::RegularizedDistance: {
        const double r = phi(X, Xi);
        const VectorXd w = (X - Xi) / r;
        return (w * w.transpose() - MatrixXd::Identity(d, d)) / r;
      }
      case PhaseFamily::Custom:
        throw DomainError("custom phases only support the central-difference Hessian");
    }
  }
  if (!(step > 0.0)) throw DomainError("finite-difference step must be positive");
  // built-in families are differenced in long double, which keeps roundoff
  // (eps / step^2) well below the O(step^2) truncation error at step ~ 1e-5
  const bool extended = phi.family != PhaseFamily::Custom;
  MatrixXd H(d, d);
  std::vector<long double> xl(static_cast<std::size_t>(d));
  std::vector<long double> ql(static_cast<std::size_t>(d));
  VectorXd xp = X;
  VectorXd qp = Xi;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      long double acc = 0.0L;
      for (int si : {1, -1}) {
        for (int sj : {1, -1}) {
          if (extended) {
            for (int k = 0; k < d; ++k) {
              xl[static_cast<std::size_t>(k)] = X[k];
              ql[static_cast<std::size_t>(k)] = Xi[k];
            }
            xl[static_cast<std::size_t>(i)] += si * static_cast<long double>(step);
            ql[static_cast<std::size_t>(j)] += sj * static_cast<long double>(step);
            acc += si * sj * phi.eval<long double>(xl.data(), ql.data());
          } else {
            xp = X;
            qp = Xi;
            xp[i] += si * step;
            qp[j] += sj * step;
            acc += si * sj * phi(xp.data(), qp.data());
          }
        }
      }
      H(i, j) = static_cast<double>(acc / (4.0L * static_cast<long double>(step) * static_cast<long double>(step)));
    }
  }
  return H;
}

/// Count of singular values above rel_threshold * sigma_max (0 for the zero matrix).
inline int numerical_rank(const VectorXd& sv, double rel_threshold = 1e-10) {
  if (sv.size() == 0 || !(sv.maxCoeff() > 0.0)) return 0;
  const double cut = rel_threshold * sv.maxCoeff();
  return static_cast<int>((sv.array() > cut).count());
}

struct HessianAnalysis {
  MatrixXd M;
  VectorXd singular_values;
  int rank = 0;
  double phi0 = 0.0;
  double det_numeric = 0.0;
  double det_analytic = 0.0;   // (-1)^d delta^2 phi0^{-(d+2)}
  double det_displayed = 0.0;  // (-1)^d delta^2 / phi0^2, without the row factor
  int pivot = 0;               // coordinate moved last (largest |omega|)
  double minor_det = 0.0;      // det(-I + omega omega^T) on the other d-1 coordinates
  double minor_expected = 0.0;  // (-1)^{d-1} (1 - sum_{j != pivot} omega_j^2)
};

/// M = phi0^{-1}(-delta_jk + omega_j omega_k), omega = (x - x')/phi0.
inline HessianAnalysis distance_phase_hessian_analysis(const VectorXd& x, const VectorXd& xp, double delta) {
  if (x.size() != xp.size() || x.size() < 1) throw DomainError("hessian analysis needs points of equal positive dimension");
  const auto phi = PhaseFunction::regularized_distance(static_cast<int>(x.size()), delta);
  HessianAnalysis r;
  r.M = mixed_hessian(phi, x, xp);
  const auto d = static_cast<int>(x.size());
  r.phi0 = phi(x, xp);
  Eigen::JacobiSVD<MatrixXd> svd(r.M);
  r.singular_values = svd.singularValues();
  r.rank = numerical_rank(r.singular_values);
  r.det_numeric = r.M.determinant();
  const double sign = d % 2 == 0 ? 1.0 : -1.0;
  r.det_analytic = sign * delta * delta * std::pow(r.phi0, -(d + 2.0));
  r.det_displayed = sign * delta * delta / (r.phi0 * r.phi0);

  const VectorXd w = (x - xp) / r.phi0;
  w.cwiseAbs().maxCoeff(&r.pivot);
  const MatrixXd A = r.phi0 * r.M;
  MatrixXd minor(d - 1, d - 1);
  double rest = 0.0;
  for (int i = 0, a = 0; i < d; ++i) {
    if (i == r.pivot) continue;
    rest += w[i] * w[i];
    for (int j = 0, b = 0; j < d; ++j) {
      if (j == r.pivot) continue;
      minor(a, b++) = A(i, j);
    }
    ++a;
  }
  r.minor_det = d == 1 ? 1.0 : minor.determinant();
  r.minor_expected = (d % 2 == 1 ? 1.0 : -1.0) * (1.0 - rest);
  return r;
}

// ---------------------------------------------------------------------------
// Grids and assembly

/// Uniform midpoint grid on a box, row-major with axis 0 outermost.
struct BoxGrid {
  VectorXd start;    // first node per axis
  VectorXd spacing;  // per axis
  std::vector<Eigen::Index> counts;

  [[nodiscard]] int dim() const { return static_cast<int>(counts.size()); }
  [[nodiscard]] Eigen::Index size() const {
    Eigen::Index n = 1;
    for (auto c : counts) n *= c;
    return n;
  }
  [[nodiscard]] double weight() const { return spacing.prod(); }

  void node(Eigen::Index i, double* out) const {
    for (int k = dim() - 1; k >= 0; --k) {
      const auto c = counts[static_cast<std::size_t>(k)];
      out[k] = start[k] + static_cast<double>(i % c) * spacing[k];
      i /= c;
    }
  }
  [[nodiscard]] VectorXd node(Eigen::Index i) const {
    VectorXd p(dim());
    node(i, p.data());
    return p;
  }
};

/// Grid covering [c - w, c + w] with spacing at most h per axis (n = ceil(2w/h) nodes, centred).
inline BoxGrid box_grid(const VectorXd& center, const VectorXd& half, const VectorXd& h) {
  if (center.size() != half.size() || center.size() != h.size()) throw DomainError("box_grid: dimension mismatch");
  if (!(h.minCoeff() > 0.0)) throw DomainError("box_grid: spacing must be positive");
  BoxGrid g;
  g.start.resize(center.size());
  g.spacing = h;
  for (Eigen::Index k = 0; k < center.size(); ++k) {
    const auto n = static_cast<Eigen::Index>(std::ceil(2.0 * half[k] / h[k] - 1e-9));
    g.counts.push_back(std::max<Eigen::Index>(n, 1));
    g.start[k] = center[k] - 0.5 * static_cast<double>(g.counts.back() - 1) * h[k];
  }
  return g;
}

/// Largest spacing resolving e^{i lambda phi}: (2 pi / lambda) / (oversampling * max |grad phi|).
inline double resolving_spacing(double lambda, double gradient_bound, double oversampling) {
  if (!(oversampling > 0.0)) throw DomainError("oversampling must be positive");
  if (lambda == 0.0 || gradient_bound == 0.0) return std::numeric_limits<double>::infinity();
  return (2.0 * pi / lambda) / (oversampling * gradient_bound);
}

struct GridPolicy {
  double oversampling = 8.0;
  Eigen::Index min_nodes = 24;
  double refinement = 1.0;  // 2 for the doubling check
};

/// Shared per-axis spacing for the X and Xi grids of a cutoff.
inline VectorXd policy_spacing(const PhaseFunction& phi, const AmplitudeCutoff& a, double lambda, const GridPolicy& p) {
  const double h0 = resolving_spacing(lambda, phase_gradient_bound(phi, a), p.oversampling);
  VectorXd h(a.dim());
  for (int k = 0; k < a.dim(); ++k) {
    const double w = std::min(a.x_half[k], a.xi_half[k]);
    h[k] = std::min(h0, 2.0 * w / static_cast<double>(p.min_nodes)) / p.refinement;
  }
  return h;
}

struct OscOperatorGrid {
  BoxGrid x;
  BoxGrid xi;
  double lambda = 0.0;
  MatrixXcd T;  // T(i, j) = w_x e^{i lambda phi(X_j, Xi_i)} a(X_j, Xi_i)
};

/// Dense T^lambda on the given grids; rejects grids that alias the oscillation.
inline OscOperatorGrid assemble_osc_operator(const PhaseFunction& phi, const AmplitudeCutoff& a, double lambda, const BoxGrid& xg,
                                             const BoxGrid& xig, double oversampling = 8.0) {
  a.validate();
  if (a.dim() != phi.dim || xg.dim() != phi.dim || xig.dim() != phi.dim) throw DomainError("assemble: dimension mismatch");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw DomainError("assemble: lambda must be finite and nonnegative");
  const double hmax = resolving_spacing(lambda, phase_gradient_bound(phi, a), oversampling);
  if (std::max(xg.spacing.maxCoeff(), xig.spacing.maxCoeff()) > hmax * (1.0 + 1e-12)) {
    throw ResolutionError("grid spacing " + format_double(std::max(xg.spacing.maxCoeff(), xig.spacing.maxCoeff())) +
                          " does not resolve lambda = " + format_double(lambda) + " (needs <= " + format_double(hmax) + ")");
  }
  OscOperatorGrid g{xg, xig, lambda, MatrixXcd(xig.size(), xg.size())};
  const double w = xg.weight();
  parallel_for(static_cast<std::size_t>(xig.size()), [&](std::size_t ii) {
    const auto i = static_cast<Eigen::Index>(ii);
    VectorXd X(phi.dim);
    const VectorXd Xi = xig.node(i);
    for (Eigen::Index j = 0; j < xg.size(); ++j) {
      xg.node(j, X.data());
      const double amp = a(X.data(), Xi.data());
      g.T(i, j) = amp == 0.0 ? cplx(0.0) : w * amp * std::polar(1.0, lambda * phi(X.data(), Xi.data()));
    }
  });
  if (!g.T.allFinite()) throw NumericalError("assemble: non-finite entries");
  return g;
}

// ---------------------------------------------------------------------------
// Norms

/// Matrix-free operator for the Lanczos norm.
struct LinearMap {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  std::function<VectorXcd(const VectorXcd&)> apply;
  std::function<VectorXcd(const VectorXcd&)> adjoint;
};

/// Largest singular value by Golub-Kahan bidiagonalization with full reorthogonalization.
inline double lanczos_norm(const LinearMap& A, double tol = 1e-12, int max_iter = 400, std::uint64_t seed = 1) {
  const Eigen::Index kmax = std::min<Eigen::Index>({A.rows, A.cols, max_iter});
  if (kmax == 0) return 0.0;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  VectorXcd v(A.cols);
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = cplx(nd(rng), nd(rng));
  v.normalize();
  std::vector<VectorXcd> V{v};
  std::vector<VectorXcd> U;
  std::vector<double> alpha;
  std::vector<double> beta;
  double last = -1.0;
  for (Eigen::Index k = 0; k < kmax; ++k) {
    VectorXcd u = A.apply(V.back());
    if (!U.empty()) u -= beta.back() * U.back();
    for (const auto& q : U) u -= q.dot(u) * q;
    const double a = u.norm();
    alpha.push_back(a);
    if (a == 0.0) break;
    U.push_back(u / a);
    VectorXcd w = A.adjoint(U.back()) - a * V.back();
    for (const auto& q : V) w -= q.dot(w) * q;
    const double b = w.norm();

    const auto m = static_cast<Eigen::Index>(alpha.size());
    MatrixXd Bk = MatrixXd::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      Bk(i, i) = alpha[static_cast<std::size_t>(i)];
      if (i + 1 < m) Bk(i, i + 1) = beta[static_cast<std::size_t>(i)];
    }
    const double s = Eigen::JacobiSVD<MatrixXd>(Bk).singularValues()[0];
    if (b <= 1e-14 * s) return s;
    if (last > 0.0 && std::abs(s - last) <= tol * s && k >= 4) return s;
    last = s;
    beta.push_back(b);
    V.push_back(w / b);
  }
  return last > 0.0 ? last : (alpha.empty() ? 0.0 : alpha.front());
}

/// Largest singular value of a plain matrix (dense SVD up to 600 columns, Lanczos beyond).
inline double operator_norm(const MatrixXcd& T) {
  if (T.size() == 0) return 0.0;
  if (std::min(T.rows(), T.cols()) <= 600) return Eigen::BDCSVD<MatrixXcd>(T).singularValues()[0];
  return lanczos_norm({T.rows(), T.cols(), [&](const VectorXcd& x) { return VectorXcd(T * x); },
                       [&](const VectorXcd& y) { return VectorXcd(T.adjoint() * y); }});
}

/// L^2 -> L^2 norm with the quadrature weights folded in: sigma_max(sqrt(w_xi) T / sqrt(w_x)).
inline double operator_norm(const OscOperatorGrid& g) {
  return std::sqrt(g.xi.weight() / g.x.weight()) * operator_norm(g.T);
}

/// sqrt(sup_i sum_j |S_ij| * sup_j sum_i |S_ij|) for the weighted matrix.
inline double schur_bound(const OscOperatorGrid& g) {
  const MatrixXd S = std::sqrt(g.xi.weight() / g.x.weight()) * g.T.cwiseAbs();
  return std::sqrt(S.rowwise().sum().maxCoeff() * S.colwise().sum().maxCoeff());
}

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace detail

/// T^lambda for phases depending on X - Xi, applied by FFT convolution.
/// Both grids share the per-axis spacing; the weighted operator is
/// diag(sqrt(w) a_xi) K diag(sqrt(w) a_x) with K_ij = e^{i lambda F(X_j - Xi_i)}.
class ToeplitzOscOperator {
 public:
  ToeplitzOscOperator(const PhaseFunction& phi, const AmplitudeCutoff& a, double lambda, const BoxGrid& xg, const BoxGrid& xig)
      : xg_(xg), xig_(xig) {
    if (!phi.translation_invariant()) throw DomainError("Toeplitz path needs a translation-invariant phase");
    if ((xg.spacing - xig.spacing).cwiseAbs().maxCoeff() > 1e-15 * xg.spacing.maxCoeff()) {
      throw DomainError("Toeplitz path needs equal spacing on both grids");
    }
    const int d = phi.dim;
    dims_.resize(static_cast<std::size_t>(d));
    total_ = 1;
    for (int k = 0; k < d; ++k) {
      const auto K = static_cast<std::size_t>(k);
      dims_[K] = static_cast<int>(xg.counts[K] + xig.counts[K] - 1);
      total_ *= dims_[K];
    }
    // g'[m] = exp(i lambda F(x0 - xi0 - m h)) at circular index m mod M, m in [-(Nx-1), Nxi-1]
    std::vector<cplx> kernel(static_cast<std::size_t>(total_));
    std::vector<int> idx(static_cast<std::size_t>(d));
    VectorXd diff(d);
    const VectorXd zero = VectorXd::Zero(d);
    for (Eigen::Index flat = 0; flat < total_; ++flat) {
      Eigen::Index rem = flat;
      for (int k = d - 1; k >= 0; --k) {
        const auto K = static_cast<std::size_t>(k);
        idx[K] = static_cast<int>(rem % dims_[K]);
        rem /= dims_[K];
        int m = idx[K];
        if (m > static_cast<int>(xig.counts[K]) - 1) m -= dims_[K];
        diff[k] = xg.start[k] - xig.start[k] - static_cast<double>(m) * xg.spacing[k];
      }
      kernel[static_cast<std::size_t>(flat)] = std::polar(1.0, lambda * phi(diff.data(), zero.data()));
    }
    {
      std::lock_guard lock(detail::fftw_planner_mutex());
      fwd_ = fftw_plan_dft(d, dims_.data(), reinterpret_cast<fftw_complex*>(kernel.data()), reinterpret_cast<fftw_complex*>(kernel.data()),
                           FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
      bwd_ = fftw_plan_dft(d, dims_.data(), reinterpret_cast<fftw_complex*>(kernel.data()), reinterpret_cast<fftw_complex*>(kernel.data()),
                           FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
    }
    fftw_execute_dft(fwd_, reinterpret_cast<fftw_complex*>(kernel.data()), reinterpret_cast<fftw_complex*>(kernel.data()));
    khat_ = std::move(kernel);

    const double sw = std::sqrt(xg.weight());
    wx_.resize(xg.size());
    for (Eigen::Index j = 0; j < xg.size(); ++j) wx_[j] = sw * a.x_factor(xg.node(j).data());
    wxi_.resize(xig.size());
    for (Eigen::Index i = 0; i < xig.size(); ++i) wxi_[i] = sw * a.scale * a.xi_factor(xig.node(i).data());
  }

  ToeplitzOscOperator(const ToeplitzOscOperator&) = delete;
  ToeplitzOscOperator& operator=(const ToeplitzOscOperator&) = delete;
  ~ToeplitzOscOperator() {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
  }

  [[nodiscard]] Eigen::Index rows() const { return xig_.size(); }
  [[nodiscard]] Eigen::Index cols() const { return xg_.size(); }

  /// Weighted operator applied to u on the X grid.
  [[nodiscard]] VectorXcd apply(const VectorXcd& u) const {
    return wxi_.cwiseProduct(convolve(wx_.cwiseProduct(u).eval(), xg_, xig_, false));
  }
  [[nodiscard]] VectorXcd adjoint(const VectorXcd& y) const {
    return wx_.cwiseProduct(convolve(wxi_.cwiseProduct(y).eval(), xig_, xg_, true));
  }

  [[nodiscard]] double norm() const {
    return lanczos_norm({rows(), cols(), [this](const VectorXcd& x) { return apply(x); }, [this](const VectorXcd& y) { return adjoint(y); }});
  }

 private:
  // place `in` (shaped like `from`) at the origin, multiply by khat (or its conjugate), read `to`
  [[nodiscard]] VectorXcd convolve(const VectorXcd& in, const BoxGrid& from, const BoxGrid& to, bool conj) const {
    const int d = static_cast<int>(dims_.size());
    std::vector<cplx> buf(static_cast<std::size_t>(total_), cplx(0.0));
    auto flat_of = [&](const BoxGrid& g, Eigen::Index i) {
      Eigen::Index f = 0;
      Eigen::Index stride = 1;
      for (int k = d - 1; k >= 0; --k) {
        const auto K = static_cast<std::size_t>(k);
        f += (i % g.counts[K]) * stride;
        i /= g.counts[K];
        stride *= dims_[K];
      }
      return f;
    };
    for (Eigen::Index i = 0; i < from.size(); ++i) buf[static_cast<std::size_t>(flat_of(from, i))] = in[i];
    auto* p = reinterpret_cast<fftw_complex*>(buf.data());
    fftw_execute_dft(fwd_, p, p);
    for (std::size_t k = 0; k < buf.size(); ++k) buf[k] *= conj ? std::conj(khat_[k]) : khat_[k];
    fftw_execute_dft(bwd_, p, p);
    VectorXcd out(to.size());
    const double inv = 1.0 / static_cast<double>(total_);
    for (Eigen::Index i = 0; i < to.size(); ++i) out[i] = inv * buf[static_cast<std::size_t>(flat_of(to, i))];
    return out;
  }

  BoxGrid xg_;
  BoxGrid xig_;
  std::vector<int> dims_;
  Eigen::Index total_ = 0;
  std::vector<cplx> khat_;
  VectorXcd wx_;
  VectorXcd wxi_;
  fftw_plan fwd_ = nullptr;
  fftw_plan bwd_ = nullptr;
};

enum class NormMethod { Auto, Dense, Toeplitz, Kronecker };

inline std::string to_string(NormMethod m) {
  switch (m) {
    case NormMethod::Auto: return "Auto";
    case NormMethod::Dense: return "Dense";
    case NormMethod::Toeplitz: return "Toeplitz";
    case NormMethod::Kronecker: return "Kronecker";
  }
  return "?";
}

struct OscNorm {
  double norm = 0.0;
  Eigen::Index x_nodes = 0;
  Eigen::Index xi_nodes = 0;
  NormMethod method = NormMethod::Dense;
};

/// ||T^lambda||_{L^2 -> L^2} on policy grids. Auto picks the Kronecker
/// factorization for bilinear phases (the norm is the product of 1-D norms),
/// FFT convolution for translation-invariant phases, dense SVD otherwise.
inline OscNorm osc_norm(const PhaseFunction& phi, const AmplitudeCutoff& a, double lambda, const GridPolicy& policy = {},
                        NormMethod method = NormMethod::Auto) {
  a.validate();
  if (a.dim() != phi.dim) throw DomainError("osc_norm: cutoff and phase dimensions differ");
  if (method == NormMethod::Auto) {
    method = phi.family == PhaseFamily::Bilinear ? NormMethod::Kronecker
             : phi.translation_invariant()        ? NormMethod::Toeplitz
                                                  : NormMethod::Dense;
  }
  OscNorm r;
  r.method = method;
  if (method == NormMethod::Kronecker) {
    if (phi.family != PhaseFamily::Bilinear) throw DomainError("Kronecker path needs a bilinear phase");
    r.norm = std::abs(a.scale);
    r.x_nodes = 1;
    r.xi_nodes = 1;
    const auto phi1 = PhaseFunction::bilinear(1);
    for (int k = 0; k < phi.dim; ++k) {
      const auto ak = a.axis(k);
      const VectorXd h = policy_spacing(phi1, ak, lambda, policy);
      const auto g = assemble_osc_operator(phi1, ak, lambda, box_grid(ak.x_center, ak.x_half, h), box_grid(ak.xi_center, ak.xi_half, h),
                                           policy.oversampling);
      r.norm *= operator_norm(g);
      r.x_nodes *= g.x.size();
      r.xi_nodes *= g.xi.size();
    }
    return r;
  }
  const VectorXd h = policy_spacing(phi, a, lambda, policy);
  const BoxGrid xg = box_grid(a.x_center, a.x_half, h);
  const BoxGrid xig = box_grid(a.xi_center, a.xi_half, h);
  r.x_nodes = xg.size();
  r.xi_nodes = xig.size();
  if (method == NormMethod::Toeplitz) {
    const double hmax = resolving_spacing(lambda, phase_gradient_bound(phi, a), policy.oversampling);
    if (h.maxCoeff() > hmax * (1.0 + 1e-12)) throw ResolutionError("osc_norm: grid does not resolve lambda");
    r.norm = ToeplitzOscOperator(phi, a, lambda, xg, xig).norm();
    return r;
  }
  r.norm = operator_norm(assemble_osc_operator(phi, a, lambda, xg, xig, policy.oversampling));
  return r;
}

// ---------------------------------------------------------------------------
// Decay sweep

struct SteinOptions {
  GridPolicy grid;
  NormMethod method = NormMethod::Auto;
  bool doubling_check = true;
  double doubling_tolerance = 0.01;
  double slope_tolerance = 0.15;
  std::size_t rank_samples = 64;
  std::uint64_t seed = 1;
};

struct SteinReport {
  int expected_p = 0;
  int min_rank = 0;
  std::vector<double> lambdas;
  std::vector<double> norms;
  std::vector<Eigen::Index> grid_sizes;  // X nodes
  std::vector<double> doubled_norms;
  double max_doubling_change = 0.0;
  bool doubling_ok = true;
  ScalingFit fit;
  double bound = 0.0;  // -p/2 + tolerance
  bool upper_ok = false;
  bool attained = false;
  NormMethod method = NormMethod::Auto;

  [[nodiscard]] bool pass() const { return upper_ok && doubling_ok; }
};

/// Smallest mixed-Hessian rank over random points of the cutoff support.
inline int sampled_min_rank(const PhaseFunction& phi, const AmplitudeCutoff& a, std::size_t samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int best = phi.dim;
  const auto method = phi.family == PhaseFamily::Custom ? HessianMethod::CentralDifference : HessianMethod::Analytic;
  for (std::size_t s = 0; s < samples; ++s) {
    VectorXd X(phi.dim);
    VectorXd Xi(phi.dim);
    for (int k = 0; k < phi.dim; ++k) {
      X[k] = a.x_center[k] + a.x_half[k] * u(rng);
      Xi[k] = a.xi_center[k] + a.xi_half[k] * u(rng);
    }
    const MatrixXd H = mixed_hessian(phi, X, Xi, method, 1e-4);
    best = std::min(best, numerical_rank(Eigen::JacobiSVD<MatrixXd>(H).singularValues()));
  }
  return best;
}

/// log ||T^lambda|| against log lambda; passes when the slope is at most -p/2 + tolerance
/// and doubling the grid moves every norm by less than the doubling tolerance.
inline SteinReport stein_sweep(const PhaseFunction& phi, const AmplitudeCutoff& a, const std::vector<double>& lambdas, int p,
                               const SteinOptions& opt = {}) {
  a.validate();
  if (lambdas.size() < 3) throw DomainError("stein_sweep: need at least 3 lambda values");
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    if (!(lambdas[i] > 0.0) || !std::isfinite(lambdas[i])) throw DomainError("stein_sweep: lambda must be positive");
    if (i > 0 && !(lambdas[i] > lambdas[i - 1])) throw DomainError("stein_sweep: lambda grid must be strictly increasing");
  }
  if (p < 0 || p > phi.dim) throw DomainError("stein_sweep: p must lie in [0, dim]");
  SteinReport r;
  r.expected_p = p;
  r.min_rank = sampled_min_rank(phi, a, opt.rank_samples, opt.seed);
  if (r.min_rank < p) {
    throw DomainError("stein_sweep: mixed Hessian rank " + std::to_string(r.min_rank) + " < p = " + std::to_string(p) + " on the support");
  }
  r.lambdas = lambdas;
  const std::size_t n = lambdas.size();
  r.norms.resize(n);
  r.grid_sizes.resize(n);
  r.doubled_norms.assign(n, 0.0);
  std::vector<NormMethod> used(n);
  GridPolicy fine = opt.grid;
  fine.refinement *= 2.0;
  parallel_for(n, [&](std::size_t i) {
    const auto c = osc_norm(phi, a, lambdas[i], opt.grid, opt.method);
    r.norms[i] = c.norm;
    r.grid_sizes[i] = c.x_nodes;
    used[i] = c.method;
    if (opt.doubling_check) r.doubled_norms[i] = osc_norm(phi, a, lambdas[i], fine, opt.method).norm;
  });
  r.method = used.front();
  if (opt.doubling_check) {
    for (std::size_t i = 0; i < n; ++i) {
      r.max_doubling_change = std::max(r.max_doubling_change, std::abs(r.doubled_norms[i] - r.norms[i]) / r.doubled_norms[i]);
    }
    r.doubling_ok = r.max_doubling_change < opt.doubling_tolerance;
  }
  r.fit = fit_power_law(lambdas, r.norms);
  r.bound = -0.5 * p + opt.slope_tolerance;
  r.upper_ok = r.fit.slope <= r.bound;
  r.attained = std::abs(r.fit.slope + 0.5 * p) <= opt.slope_tolerance;
  return r;
}

}  // namespace tubelab

#endif  // TUBELAB_OSCINT_HPP
