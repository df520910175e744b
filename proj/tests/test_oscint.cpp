#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "tubelab/oscint.hpp"

using namespace tubelab;

namespace {

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

MatrixXcd random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  MatrixXcd A(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) A(i, j) = {nd(rng), nd(rng)};
  return A;
}

double power_iteration(const MatrixXcd& A, int iters = 20000) {
  VectorXcd v = VectorXcd::Ones(A.cols()).normalized();
  double s = 0.0;
  for (int k = 0; k < iters; ++k) {
    VectorXcd w = A.adjoint() * (A * v);
    const double nw = w.norm();
    v = w / nw;
    if (std::abs(std::sqrt(nw) - s) < 1e-15 * s) break;
    s = std::sqrt(nw);
  }
  return (A * v).norm();
}

AmplitudeCutoff distance_cutoff(double rho = 0.8) {
  return AmplitudeCutoff::box(vec({0.0, 0.0}), vec({0.1, 0.6}), vec({1.25, 0.0}), vec({0.1, 0.6}), rho);
}

AmplitudeCutoff bilinear_cutoff(int n, double rho = 0.8) {
  return AmplitudeCutoff::box(VectorXd::Zero(n), VectorXd::Ones(n), VectorXd::Zero(n), VectorXd::Ones(n), rho);
}

}  // namespace

TEST(PlateauBump, ShapeAndSmoothness) {
  EXPECT_EQ(plateau_bump(0.0, 0.5), 1.0);
  EXPECT_EQ(plateau_bump(0.5, 0.5), 1.0);
  EXPECT_EQ(plateau_bump(1.0, 0.5), 0.0);
  EXPECT_EQ(plateau_bump(-1.2, 0.5), 0.0);
  EXPECT_NEAR(plateau_bump(0.75, 0.5), 0.5, 1e-15);
  for (double s = -1.0; s <= 1.0; s += 0.01) {
    EXPECT_GE(plateau_bump(s, 0.3), 0.0);
    EXPECT_LE(plateau_bump(s, 0.3), 1.0);
  }
}

TEST(MixedHessian, BilinearIsIdentity) {
  const auto phi = PhaseFunction::bilinear(3);
  const MatrixXd H = mixed_hessian(phi, vec({0.3, -1.0, 2.0}), vec({1.0, 0.5, -0.2}));
  EXPECT_EQ((H - MatrixXd::Identity(3, 3)).norm(), 0.0);
  const MatrixXd F = mixed_hessian(phi, vec({0.3, -1.0, 2.0}), vec({1.0, 0.5, -0.2}), HessianMethod::CentralDifference, 1e-3);
  EXPECT_LT((F - MatrixXd::Identity(3, 3)).norm(), 1e-9);
}

TEST(MixedHessian, AnalyticMatchesFiniteDifference) {
  const auto phi = PhaseFunction::regularized_distance(3, 0.5);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 20; ++t) {
    const VectorXd x = vec({nd(rng), nd(rng), nd(rng)});
    const VectorXd y = vec({nd(rng), nd(rng), nd(rng)});
    const MatrixXd A = mixed_hessian(phi, x, y);
    const MatrixXd F = mixed_hessian(phi, x, y, HessianMethod::CentralDifference, 1e-5);
    EXPECT_LT((A - F).norm() / A.norm(), 1e-6);
  }
}

TEST(MixedHessian, PureTermsDropOut) {
  const auto base = PhaseFunction::regularized_distance(2, 0.3);
  const auto gauged = PhaseFunction::make_custom(
      2, [base](const double* X, const double* Xi) { return base(X, Xi) + std::sin(3.0 * X[0]) * X[1] + std::exp(Xi[1]) * Xi[0]; }, 10.0);
  const VectorXd x = vec({0.2, -0.4});
  const VectorXd y = vec({1.1, 0.3});
  const MatrixXd A = mixed_hessian(base, x, y);
  const MatrixXd F = mixed_hessian(gauged, x, y, HessianMethod::CentralDifference, 1e-4);
  EXPECT_LT((A - F).norm() / A.norm(), 1e-6);
  EXPECT_THROW(mixed_hessian(gauged, x, y), DomainError);
}

TEST(MixedHessian, SingularDiagonalRejected) {
  const auto phi = PhaseFunction::regularized_distance(2, 0.0);
  EXPECT_THROW(mixed_hessian(phi, vec({1.0, 2.0}), vec({1.0, 2.0})), DomainError);
  EXPECT_THROW(distance_phase_hessian_analysis(vec({1.0, 2.0}), vec({1.0, 2.0}), 0.0), DomainError);
  EXPECT_NO_THROW(distance_phase_hessian_analysis(vec({1.0, 2.0}), vec({1.0, 2.0}), 0.5));
}

TEST(DistanceHessian, DegenerateCaseRankAndMinor) {
  const VectorXd x = vec({0.4, -1.0, 0.7});
  const VectorXd xp = vec({1.0, 0.5, 0.2});
  const auto r = distance_phase_hessian_analysis(x, xp, 0.0);
  EXPECT_EQ(r.rank, 2);
  EXPECT_NEAR(r.det_numeric, 0.0, 1e-14);
  EXPECT_EQ(r.det_analytic, 0.0);
  const VectorXd w = (x - xp) / r.phi0;
  EXPECT_NEAR(r.minor_det, w[r.pivot] * w[r.pivot], 1e-13);  // (-1)^{d-1} omega_d^2 with d = 3
  EXPECT_NEAR(r.minor_expected, r.minor_det, 1e-13);
  EXPECT_NE(r.minor_det, 0.0);
}

TEST(DistanceHessian, DeterminantAgainstFiniteDifferences) {
  const VectorXd x = vec({1.0, 0.0});
  const VectorXd xp = vec({0.0, 0.0});
  const auto r = distance_phase_hessian_analysis(x, xp, 1.0);
  EXPECT_EQ(r.rank, 2);
  const MatrixXd F = mixed_hessian(PhaseFunction::regularized_distance(2, 1.0), x, xp, HessianMethod::CentralDifference, 1e-5);
  EXPECT_LT(std::abs(F.determinant() - r.det_analytic) / std::abs(r.det_analytic), 1e-6);
  EXPECT_LT(std::abs(r.det_numeric - r.det_analytic) / std::abs(r.det_analytic), 1e-13);
  // phi0 = sqrt 2: the displayed constant misses the phi0^{-d} row factor
  EXPECT_NEAR(r.det_displayed / r.det_analytic, 2.0, 1e-12);
}

TEST(DistanceHessian, RankOverRandomConfigurations) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(0.1, 2.0);
  for (int t = 0; t < 100; ++t) {
    const int d = 1 + t % 4;
    VectorXd x(d);
    VectorXd xp(d);
    for (int k = 0; k < d; ++k) {
      x[k] = nd(rng);
      xp[k] = nd(rng);
    }
    const double delta = t % 2 == 0 ? 0.0 : ud(rng);
    const auto r = distance_phase_hessian_analysis(x, xp, delta);
    EXPECT_EQ(r.rank, delta != 0.0 ? d : d - 1) << "d = " << d << " delta = " << delta;
    if (delta != 0.0) EXPECT_LT(std::abs(r.det_numeric - r.det_analytic) / std::abs(r.det_analytic), 1e-10);
    EXPECT_NEAR(r.minor_det, r.minor_expected, 1e-12);
  }
}

TEST(Assemble, ZeroFrequencyAndZeroAmplitude) {
  const auto phi = PhaseFunction::regularized_distance(2, 0.3);
  auto a = distance_cutoff();
  const VectorXd h = vec({0.02, 0.1});
  const auto xg = box_grid(a.x_center, a.x_half, h);
  const auto xig = box_grid(a.xi_center, a.xi_half, h);
  const auto g = assemble_osc_operator(phi, a, 0.0, xg, xig);
  for (Eigen::Index i = 0; i < g.T.rows(); i += 7) {
    for (Eigen::Index j = 0; j < g.T.cols(); j += 5) {
      EXPECT_EQ(g.T(i, j).imag(), 0.0);
      EXPECT_NEAR(g.T(i, j).real(), xg.weight() * a(xg.node(j).data(), xig.node(i).data()), 1e-16);
    }
  }
  a.scale = 0.0;
  EXPECT_EQ(assemble_osc_operator(phi, a, 10.0, xg, xig, 1.0).T.norm(), 0.0);
}

TEST(Assemble, RowsMatchAdaptiveQuadrature) {
  const auto phi = PhaseFunction::bilinear(1);
  const auto a = AmplitudeCutoff::box(vec({0.2}), vec({0.8}), vec({0.0}), vec({1.0}), 0.3);
  const double lambda = 12.0;
  const VectorXd h = VectorXd::Constant(1, 2e-3);
  const auto g = assemble_osc_operator(phi, a, lambda, box_grid(a.x_center, a.x_half, h), box_grid(a.xi_center, a.xi_half, h));
  const VectorXcd row_sums = g.T.rowwise().sum();
  using boost::math::quadrature::gauss_kronrod;
  for (Eigen::Index i = 0; i < g.xi.size(); i += 97) {
    const double xi = g.xi.node(i)[0];
    auto f = [&](double x, bool im) {
      const double amp = a(&x, &xi);
      return amp * (im ? std::sin(lambda * x * xi) : std::cos(lambda * x * xi));
    };
    const double re = gauss_kronrod<double, 31>::integrate([&](double x) { return f(x, false); }, -0.6, 1.0, 15, 1e-14);
    const double im = gauss_kronrod<double, 31>::integrate([&](double x) { return f(x, true); }, -0.6, 1.0, 15, 1e-14);
    EXPECT_NEAR(row_sums[i].real(), re, 1e-8);
    EXPECT_NEAR(row_sums[i].imag(), im, 1e-8);
  }
}

TEST(Assemble, RejectsAliasedGrids) {
  const auto phi = PhaseFunction::regularized_distance(2, 0.0);
  const auto a = distance_cutoff();
  const VectorXd h = vec({0.05, 0.05});
  const auto xg = box_grid(a.x_center, a.x_half, h);
  const auto xig = box_grid(a.xi_center, a.xi_half, h);
  EXPECT_THROW(assemble_osc_operator(phi, a, 64.0, xg, xig), ResolutionError);
  EXPECT_NO_THROW(assemble_osc_operator(phi, a, 8.0, xg, xig));
}

TEST(OperatorNorm, TrivialCases) {
  MatrixXcd D = MatrixXcd::Zero(4, 4);
  D.diagonal() << 1.0, cplx(0.0, -3.0), 2.0, 0.5;
  EXPECT_NEAR(operator_norm(D), 3.0, 1e-14);
  const VectorXcd u = random_matrix(30, 1, 1).col(0);
  const VectorXcd v = random_matrix(20, 1, 2).col(0);
  EXPECT_NEAR(operator_norm(u * v.adjoint()), u.norm() * v.norm(), 1e-12 * u.norm() * v.norm());
}

TEST(OperatorNorm, PowerIterationOracle) {
  const MatrixXcd A = random_matrix(200, 200, 3);
  const double p = power_iteration(A);
  EXPECT_LT(std::abs(operator_norm(A) - p) / p, 1e-8);
}

TEST(OperatorNorm, LanczosMatchesDenseSvd) {
  const MatrixXcd A = random_matrix(700, 650, 5);
  const double dense = Eigen::BDCSVD<MatrixXcd>(A).singularValues()[0];
  EXPECT_LT(std::abs(operator_norm(A) - dense) / dense, 1e-10);
}

TEST(OperatorNorm, GaugeInvariance) {
  const auto base = PhaseFunction::regularized_distance(2, 0.0);
  const auto gauged = PhaseFunction::make_custom(
      2, [base](const double* X, const double* Xi) { return base(X, Xi) + 0.3 * X[0] * X[0] - std::cos(Xi[1]); }, 1.0);
  const auto a = distance_cutoff();
  const VectorXd h = vec({0.01, 0.02});
  const auto xg = box_grid(a.x_center, a.x_half, h);
  const auto xig = box_grid(a.xi_center, a.xi_half, h);
  const double n0 = operator_norm(assemble_osc_operator(base, a, 20.0, xg, xig, 1.0));
  const double n1 = operator_norm(assemble_osc_operator(gauged, a, 20.0, xg, xig, 1.0));
  EXPECT_LT(std::abs(n0 - n1) / n0, 1e-10);
}

TEST(OperatorNorm, SchurBoundAndNestedCutoffs) {
  const auto phi = PhaseFunction::regularized_distance(2, 0.2);
  const auto big = AmplitudeCutoff::box(vec({0.0, 0.0}), vec({0.2, 0.6}), vec({1.25, 0.0}), vec({0.2, 0.6}), 0.5);
  // the small supports sit inside the plateau of the big ones
  const auto small = AmplitudeCutoff::box(vec({0.0, 0.05}), vec({0.1, 0.3}), vec({1.25, -0.1}), vec({0.1, 0.2}), 0.8);
  const VectorXd h = vec({0.02, 0.04});
  const auto xg = box_grid(big.x_center, big.x_half, h);
  const auto xig = box_grid(big.xi_center, big.xi_half, h);
  for (double lambda : {4.0, 16.0, 32.0}) {
    const auto gb = assemble_osc_operator(phi, big, lambda, xg, xig, 4.0);
    const auto gs = assemble_osc_operator(phi, small, lambda, xg, xig, 4.0);
    EXPECT_LE(operator_norm(gb), schur_bound(gb) * (1.0 + 1e-12));
    EXPECT_LE(operator_norm(gs), operator_norm(gb) * (1.0 + 1e-12));
  }
}

TEST(Toeplitz, MatchesDenseAssembly) {
  for (int d : {1, 2, 3}) {
    const auto phi = PhaseFunction::regularized_distance(d, d == 2 ? 0.0 : 0.4);
    VectorXd xc = VectorXd::Zero(d);
    VectorXd xic = VectorXd::Zero(d);
    xic[0] = 1.0;
    const auto a = AmplitudeCutoff::box(xc, VectorXd::Constant(d, 0.3), xic, VectorXd::Constant(d, 0.2), 0.6, 1.5);
    const double lambda = 10.0;
    const VectorXd h = VectorXd::Constant(d, d == 3 ? 0.05 : 0.02);
    const auto xg = box_grid(a.x_center, a.x_half, h);
    const auto xig = box_grid(a.xi_center, a.xi_half, h);
    const auto dense = assemble_osc_operator(phi, a, lambda, xg, xig, 1.0);
    const MatrixXcd S = std::sqrt(xig.weight() / xg.weight()) * dense.T;
    const ToeplitzOscOperator op(phi, a, lambda, xg, xig);
    const VectorXcd u = random_matrix(xg.size(), 1, 7).col(0);
    const VectorXcd y = random_matrix(xig.size(), 1, 8).col(0);
    EXPECT_LT((op.apply(u) - S * u).norm() / (S * u).norm(), 1e-12) << "d = " << d;
    EXPECT_LT((op.adjoint(y) - S.adjoint() * y).norm() / (S.adjoint() * y).norm(), 1e-12) << "d = " << d;
    EXPECT_LT(std::abs(op.norm() - operator_norm(dense)) / operator_norm(dense), 1e-10) << "d = " << d;
  }
}

TEST(Kronecker, MatchesDenseAssembly) {
  const auto phi = PhaseFunction::bilinear(2);
  const auto a = AmplitudeCutoff::box(vec({0.0, 0.1}), vec({0.5, 0.4}), vec({0.2, 0.0}), vec({0.4, 0.5}), 0.6);
  GridPolicy pol;
  pol.min_nodes = 30;
  const auto kron = osc_norm(phi, a, 16.0, pol, NormMethod::Kronecker);
  const auto dense = osc_norm(phi, a, 16.0, pol, NormMethod::Dense);
  EXPECT_EQ(kron.x_nodes, dense.x_nodes);
  EXPECT_LT(std::abs(kron.norm - dense.norm) / dense.norm, 1e-10);
}

TEST(SteinSweep, BilinearFullRank) {
  const auto r = stein_sweep(PhaseFunction::bilinear(2), bilinear_cutoff(2), {8, 16, 32, 64}, 2);
  EXPECT_EQ(r.method, NormMethod::Kronecker);
  EXPECT_EQ(r.min_rank, 2);
  EXPECT_NEAR(r.fit.slope, -1.0, 0.15);
  EXPECT_TRUE(r.doubling_ok);
  EXPECT_TRUE(r.pass());
  EXPECT_TRUE(r.attained);
}

TEST(SteinSweep, DegenerateDistancePhase) {
  const auto r = stein_sweep(PhaseFunction::regularized_distance(2, 0.0), distance_cutoff(), {8, 16, 32, 64}, 1);
  EXPECT_EQ(r.method, NormMethod::Toeplitz);
  EXPECT_EQ(r.min_rank, 1);
  EXPECT_GE(r.fit.slope, -0.65);
  EXPECT_LE(r.fit.slope, -0.35);
  EXPECT_LT(r.max_doubling_change, 0.01);
  EXPECT_TRUE(r.pass());
}

TEST(SteinSweep, Preconditions) {
  const auto phi = PhaseFunction::regularized_distance(2, 0.0);
  EXPECT_THROW(stein_sweep(phi, distance_cutoff(), {8}, 1), DomainError);
  EXPECT_THROW(stein_sweep(phi, distance_cutoff(), {8, 16, 32}, 2), DomainError);
  EXPECT_THROW(stein_sweep(phi, distance_cutoff(), {16, 8, 32}, 1), DomainError);
}
