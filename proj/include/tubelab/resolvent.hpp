#ifndef TUBELAB_RESOLVENT_HPP
#define TUBELAB_RESOLVENT_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "tubelab/common.hpp"
#include "tubelab/concentration.hpp"
#include "tubelab/damping.hpp"
#include "tubelab/fit.hpp"
#include "tubelab/parallel.hpp"
#include "tubelab/spectral.hpp"

namespace tubelab {

/// L = h^2 Lambda - I + i h B, the Galerkin matrix of -h^2 Delta - 1 + i h b
/// (Delta <= 0, so -Delta has eigenvalues lambda_j^2 >= 0).
struct OperatorAssembly {
  double h = 0.0;
  VectorXd lambda2;
  MatrixXcd B;
  MatrixXcd L;
};

inline MatrixXcd helmholtz_matrix(double h, const VectorXd& lambda2, const MatrixXcd& B) {
  MatrixXcd L = cplx(0.0, h) * B;
  L.diagonal().array() += (h * h * lambda2.array() - 1.0).cast<cplx>();
  return L;
}

inline OperatorAssembly assemble_Lh(double h, const VectorXd& lambda2, const MatrixXcd& B) {
  if (!(h > 0.0)) throw DomainError("assemble_Lh requires h > 0");
  if (B.rows() != lambda2.size() || B.cols() != lambda2.size()) throw DomainError("assemble_Lh: size mismatch");
  return {h, lambda2, B, helmholtz_matrix(h, lambda2, B)};
}

inline OperatorAssembly assemble_Lh(double h, const SpectralBasis& basis, const MatrixXcd& B) {
  return assemble_Lh(h, basis.eigenvalues(), B);
}

/// Smallest singular value by a full SVD.
inline double min_singular(const MatrixXcd& A) {
  if (A.rows() != A.cols()) throw DomainError("min_singular needs a square matrix");
  if (A.size() == 0) return std::numeric_limits<double>::infinity();
  Eigen::BDCSVD<MatrixXcd> svd(A);
  return svd.singularValues().minCoeff();
}

/// sigma_min over all blocks of a blocked operator.
inline double min_singular(const BlockedSystem& s, double h) {
  std::vector<double> per(s.blocks.size());
  parallel_for(s.blocks.size(), [&](std::size_t k) { per[k] = min_singular(helmholtz_matrix(h, s.lambda2[k], s.gram[k])); });
  return *std::min_element(per.begin(), per.end());
}

/// Smallest eigenvalue of B over all blocks.
inline double min_damping_eigenvalue(const BlockedSystem& s) {
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& B : s.gram) {
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(B, Eigen::EigenvaluesOnly);
    lo = std::min(lo, es.eigenvalues().minCoeff());
  }
  return lo;
}

/// ||L_h e_j|| / ||e_j|| for the highest-weight e_j at h = (j(j+n-1))^{-1/2};
/// the Helmholtz part vanishes, leaving h ||b e_j|| / ||e_j||.
inline double quasimode_rayleigh(int j, const DampingProfile& b, const QuadratureGrid& grid) {
  const auto& m = grid.manifold();
  if (!m.is_sphere()) throw DomainError("quasimode_rayleigh needs a sphere grid");
  if (j < 1) throw DomainError("quasimode_rayleigh needs j >= 1");
  b.require_compatible(m);
  const HighestWeight e{j, m.dim()};
  const double h = 1.0 / std::sqrt(e.eigenvalue());
  CompensatedSum<double> num;
  CompensatedSum<double> den;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto p = grid.nodes().col(static_cast<Eigen::Index>(i));
    const double w = grid.weights()[static_cast<Eigen::Index>(i)];
    const double e2 = std::norm(e(p));
    num.add(w * square(b(m, p.data())) * e2);
    den.add(w * e2);
  }
  return h * std::sqrt(num.value() / den.value());
}

/// Resonant h for the highest-weight family on S^n nearest to a nominal h.
inline int resonant_degree(double h, int n = 2) {
  // solve j(j+n-1) = 1/h^2 and round
  const double a = n - 1.0;
  const double j = 0.5 * (-a + std::sqrt(a * a + 4.0 / (h * h)));
  return std::max(1, static_cast<int>(std::lround(j)));
}

struct ResolventOptions {
  /// move each nominal h to the nearest highest-weight resonance (spheres)
  bool snap_to_resonance = false;
  /// pass requires max/min of sigma_min h^{-(1+kappa)} below this
  double spread_bound = 3.0;
  /// add the quasimode Rayleigh upper bound at each h (spheres, snapped)
  bool rayleigh = false;
  /// Rayleigh / sigma_min must stay below this
  double rayleigh_factor = 5.0;
  /// compare sigma_min against a doubled truncation at the largest h
  bool truncation_check = true;
  double truncation_tolerance = 0.01;
  SystemOptions system;
};

struct ResolventSample {
  double h_nominal = 0.0;
  double h = 0.0;
  int j = 0;  // resonant degree when snapped
  double sigma_min = 0.0;
  double lower_bound = 0.0;  // h * lambda_min(B)
  double rayleigh_upper = std::numeric_limits<double>::quiet_NaN();
  double certificate = 0.0;  // sigma_min h^{-(1+kappa)}
};

struct ResolventSweep {
  double kappa = 0.0;
  std::vector<ResolventSample> samples;
  ScalingFit fit;
  double certificate_c = 0.0;
  double certificate_spread = 0.0;
  bool certificate_pass = false;
  bool lower_bound_ok = true;  // sigma_min >= h lambda_min(B)
  bool rayleigh_ok = true;     // sigma_min <= Rayleigh <= factor * sigma_min
  double truncation_change = std::numeric_limits<double>::quiet_NaN();
  bool truncation_ok = true;
  std::size_t basis_size = 0;

  [[nodiscard]] bool pass() const { return certificate_pass && lower_bound_ok && rayleigh_ok && truncation_ok; }
};

inline std::shared_ptr<const SpectralBasis> make_basis(const ManifoldModel& m, int truncation) {
  if (m.is_torus()) return std::make_shared<const SpectralBasis>(torus_basis(m, truncation));
  if (m.dim() != 2) throw DomainError("full spectral bases exist on S^2 and tori only");
  return std::make_shared<const SpectralBasis>(sphere_basis(truncation));
}

inline void require_h_grid(const std::vector<double>& h) {
  if (h.empty()) throw DomainError("h grid is empty");
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (!(h[i] > 0.0)) throw DomainError("h values must be positive");
    if (i > 0 && !(h[i] < h[i - 1])) throw DomainError("h grid must be strictly decreasing");
  }
}

/// sigma_min(L_h) over a decreasing h grid with the c h^{1+kappa} certificate.
inline ResolventSweep resolvent_sweep(const DampingProfile& b, const ManifoldModel& m, int truncation,
                                      const std::vector<double>& h_grid, double kappa,
                                      const ResolventOptions& opt = {}) {
  require_h_grid(h_grid);
  if (!(kappa >= 0.0)) throw DomainError("kappa must be nonnegative");
  const auto basis = make_basis(m, truncation);
  ResolventSweep out;
  out.kappa = kappa;
  out.basis_size = basis->size();
  out.samples.resize(h_grid.size());
  for (std::size_t i = 0; i < h_grid.size(); ++i) {
    auto& s = out.samples[i];
    s.h_nominal = h_grid[i];
    s.h = h_grid[i];
    if (opt.snap_to_resonance) {
      if (!m.is_sphere()) throw DomainError("resonance snapping is defined on spheres");
      s.j = resonant_degree(h_grid[i], m.dim());
      s.h = 1.0 / std::sqrt(HighestWeight{s.j, m.dim()}.eigenvalue());
    }
  }
  const double h_min = out.samples.back().h;
  if (basis->complete_below() < 2.0 / h_min) {
    throw ResolutionError("truncation " + std::to_string(truncation) + " covers frequencies below " +
                          format_double(basis->complete_below()) + " but the sweep needs 2/h_min = " +
                          format_double(2.0 / h_min));
  }
  const auto sys = damping_system(b, basis, opt.system);
  const double bmin = std::max(0.0, min_damping_eigenvalue(sys));
  for (auto& s : out.samples) {
    s.sigma_min = min_singular(sys, s.h);
    s.lower_bound = s.h * bmin;
    s.certificate = s.sigma_min / std::pow(s.h, 1.0 + kappa);
    if (s.sigma_min < s.lower_bound * (1.0 - 1e-10) - 1e-14) out.lower_bound_ok = false;
    if (opt.rayleigh) {
      if (!opt.snap_to_resonance) throw DomainError("the Rayleigh bound needs resonant h");
      const auto g = build_grid(m, {{static_cast<std::size_t>(2 * s.j + 64), 4}});
      s.rayleigh_upper = quasimode_rayleigh(s.j, b, g);
      if (s.rayleigh_upper < s.sigma_min * (1.0 - 1e-8) || s.rayleigh_upper > opt.rayleigh_factor * s.sigma_min) {
        out.rayleigh_ok = false;
      }
    }
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  std::vector<double> hs;
  std::vector<double> sig;
  for (const auto& s : out.samples) {
    lo = std::min(lo, s.certificate);
    hi = std::max(hi, s.certificate);
    hs.push_back(s.h);
    sig.push_back(s.sigma_min);
  }
  out.certificate_c = lo;
  out.certificate_spread = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  out.certificate_pass = lo > 0.0 && out.certificate_spread < opt.spread_bound;
  if (hs.size() >= 3 && lo > 0.0) out.fit = fit_power_law(hs, sig);
  if (opt.truncation_check) {
    const auto fine = damping_system(b, make_basis(m, 2 * truncation), opt.system);
    const double a = out.samples.front().sigma_min;
    const double c = min_singular(fine, out.samples.front().h);
    out.truncation_change = a > 0.0 ? std::abs(c - a) / a : 0.0;
    out.truncation_ok = out.truncation_change < opt.truncation_tolerance;
  }
  return out;
}

struct EnergyIdentityReport {
  double im_lhs = 0.0;  // Im <f, phi>
  double im_rhs = 0.0;  // h <B phi, phi>
  double re_lhs = 0.0;  // Re <f, phi>
  double re_rhs = 0.0;  // h^2 <Lambda phi, phi> - ||phi||^2
  double phi_norm = 0.0;
  double f_norm = 0.0;
  bool inequality_i = true;   // h <B phi, phi> <= ||phi|| ||f||
  bool inequality_ii = true;  // h^2 <Lambda phi, phi> <= ||phi||^2 + ||phi|| ||f||

  /// max of the two identity defects relative to max(1, scale of the terms)
  [[nodiscard]] double defect() const {
    const double sc = std::max({1.0, std::abs(im_rhs), std::abs(re_rhs), phi_norm * f_norm});
    return std::max(std::abs(im_lhs - im_rhs), std::abs(re_lhs - re_rhs)) / sc;
  }
};

/// f = L_h phi; <f, phi> = phi^H f.
inline EnergyIdentityReport energy_identity(const VectorXcd& phi, double h, const VectorXd& lambda2, const MatrixXcd& B) {
  const auto A = assemble_Lh(h, lambda2, B);
  const VectorXcd f = A.L * phi;
  EnergyIdentityReport r;
  const cplx fp = phi.dot(f);
  const double bpp = phi.dot(B * phi).real();
  const double lpp = (lambda2.array() * phi.cwiseAbs2().array()).sum();
  r.phi_norm = phi.norm();
  r.f_norm = f.norm();
  r.im_lhs = fp.imag();
  r.im_rhs = h * bpp;
  r.re_lhs = fp.real();
  r.re_rhs = h * h * lpp - r.phi_norm * r.phi_norm;
  const double slack = 1e-12 * std::max(1.0, r.phi_norm * r.f_norm + r.phi_norm * r.phi_norm);
  r.inequality_i = h * bpp <= r.phi_norm * r.f_norm + slack;
  r.inequality_ii = h * h * lpp <= r.phi_norm * r.phi_norm + r.phi_norm * r.f_norm + slack;
  return r;
}

inline EnergyIdentityReport energy_identity(const ModeVector& phi, double h, const MatrixXcd& B) {
  return energy_identity(phi.coeffs, h, phi.basis->eigenvalues(), B);
}

struct StationaryFormReport {
  double lambda = 0.0;
  double sigma_stationary = 0.0;  // sigma_min(Lambda - lambda^2 + i lambda B)
  double sigma_scaled = 0.0;      // lambda^2 sigma_min(L_{1/lambda})
  double relative_defect = 0.0;
};

/// Checks sigma_min(Lambda - lambda^2 I + i lambda B) = lambda^2 sigma_min(L_{1/lambda}).
inline StationaryFormReport stationary_form_check(double lambda, const BlockedSystem& s) {
  if (!(lambda > 0.0)) throw DomainError("stationary form needs lambda > 0");
  if (s.basis && s.basis->complete_below() < lambda) throw ResolutionError("lambda exceeds the basis truncation");
  StationaryFormReport r;
  r.lambda = lambda;
  std::vector<double> per(s.blocks.size());
  parallel_for(s.blocks.size(), [&](std::size_t k) {
    MatrixXcd A = cplx(0.0, lambda) * s.gram[k];
    A.diagonal().array() += (s.lambda2[k].array() - lambda * lambda).cast<cplx>();
    per[k] = min_singular(A);
  });
  r.sigma_stationary = *std::min_element(per.begin(), per.end());
  r.sigma_scaled = lambda * lambda * min_singular(s, 1.0 / lambda);
  r.relative_defect = std::abs(r.sigma_stationary - r.sigma_scaled) / std::max(r.sigma_stationary, 1e-300);
  return r;
}

}  // namespace tubelab

#endif  // TUBELAB_RESOLVENT_HPP
