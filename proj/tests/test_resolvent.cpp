#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <random>

#include "tubelab/resolvent.hpp"

using namespace tubelab;

namespace {

std::shared_ptr<const SpectralBasis> torus2(int K) {
  return std::make_shared<const SpectralBasis>(torus_basis(ManifoldModel::torus(2), K));
}

// sin^2(pi x) on T^2, as a surrogate with amplitude pi^2
DampingProfile sin2x() { return DampingProfile::smooth_surrogate(SubmanifoldSpec::sub_torus({true, false}), 1.0, pi * pi); }

MatrixXcd random_matrix(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  MatrixXcd A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = {nd(rng), nd(rng)};
  return A;
}

}  // namespace

TEST(Damping, ProfilesAndBounds) {
  const auto s2 = ManifoldModel::sphere(2);
  const auto eq = SubmanifoldSpec::great_subsphere(1);
  const auto dp = DampingProfile::distance_power(eq, 1.0, 2.0);
  const auto sg = DampingProfile::smooth_surrogate(eq, 1.0);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 200; ++t) {
    VectorXd p(3);
    p << nd(rng), nd(rng), nd(rng);
    p.normalize();
    const double d = distance_to_submanifold(s2, eq, p);
    EXPECT_NEAR(dp(s2, p), 2.0 * d * d, 1e-14);
    EXPECT_NEAR(sg(s2, p), p[2] * p[2], 1e-14);
    EXPECT_GE(sg(s2, p), sg.c1() * d * d - 1e-15);
    EXPECT_LE(sg(s2, p), sg.c2() * d * d + 1e-15);
  }
  const auto pm = DampingProfile::patch_max({DampingProfile::constant(0.1), DampingProfile::distance_power(eq, 2.0)});
  EXPECT_EQ(pm.kappa_max(), 2.0);
  VectorXd pole(3);
  pole << 0, 0, 1;
  EXPECT_NEAR(pm(s2, pole), std::pow(pi / 2, 4.0), 1e-12);
  EXPECT_THROW(DampingProfile::distance_power(eq, 0.0), DomainError);
  EXPECT_THROW(DampingProfile::constant(-1.0), DomainError);
  EXPECT_TRUE(pm.zonal_on_sphere(s2));
}

TEST(Gram, ConstantAndZero) {
  const auto b = torus2(3);
  const auto s = damping_system(DampingProfile::constant(0.7), b);
  const MatrixXcd B = s.dense_gram();
  EXPECT_EQ((B - 0.7 * MatrixXcd::Identity(B.rows(), B.cols())).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(damping_system(DampingProfile::constant(0.0), b).dense_gram().cwiseAbs().maxCoeff(), 0.0);
}

TEST(Gram, SinSquaredFourierOracle) {
  // sin^2(pi x) = 1/2 - (e^{2 pi i x} + e^{-2 pi i x})/4: index shift 1
  const auto b = torus2(4);
  const MatrixXcd B = damping_system(sin2x(), b).dense_gram();
  for (std::size_t r = 0; r < b->size(); ++r) {
    for (std::size_t c = 0; c < b->size(); ++c) {
      const auto& mr = b->entries()[r].mode.freq;
      const auto& mc = b->entries()[c].mode.freq;
      double expect = 0.0;
      if (mr[1] == mc[1]) {
        if (mr[0] == mc[0]) expect = 0.5;
        if (std::abs(mr[0] - mc[0]) == 1) expect = -0.25;
      }
      EXPECT_NEAR(std::abs(B(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) - expect), 0.0, 1e-13);
    }
  }
}

TEST(Gram, BlockedMatchesDenseQuadrature) {
  {
    const auto b = torus2(3);
    const auto prof = DampingProfile::distance_power(SubmanifoldSpec::sub_torus({true, false}), 1.0);
    const auto g = build_grid(ManifoldModel::torus(2), {{256, 16}});
    const MatrixXcd dense = gram_matrix(prof, *b, g);
    SystemOptions o;
    o.torus_samples = 256;
    const MatrixXcd blocked = damping_system(prof, b, o).dense_gram();
    EXPECT_LT((dense - blocked).cwiseAbs().maxCoeff(), 1e-12);
  }
  {
    auto b = std::make_shared<const SpectralBasis>(sphere_basis(8));
    const auto prof = DampingProfile::smooth_surrogate(SubmanifoldSpec::great_subsphere(1), 1.0);
    const auto g = build_grid(ManifoldModel::sphere(2), {{20, 40}});
    const MatrixXcd dense = gram_matrix(prof, *b, g);
    const auto sys = damping_system(prof, b);
    EXPECT_LT((dense - sys.dense_gram()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(sys.blocks.size(), 17u);
  }
}

TEST(Gram, NonSeparableNeedsGrid) {
  auto b = std::make_shared<const SpectralBasis>(sphere_basis(4));
  const auto prof = DampingProfile::distance_power(SubmanifoldSpec::pole_pair(), 1.0);
  EXPECT_NO_THROW(damping_system(prof, b));
  EXPECT_THROW(damping_system(DampingProfile::distance_power(SubmanifoldSpec::sub_torus({true, false}), 1.0), b),
               DomainError);
}

TEST(Assemble, HandAssembly) {
  const auto b = torus2(2);
  const MatrixXcd B = damping_system(sin2x(), b).dense_gram();
  const double h = 0.1;
  const auto A = assemble_Lh(h, *b, B);
  EXPECT_EQ((A.L - helmholtz_matrix(h, b->eigenvalues(), MatrixXcd::Zero(B.rows(), B.cols())) - cplx(0, h) * B)
                .cwiseAbs()
                .maxCoeff(),
            0.0);
  // my = 0 block, ordered by mx = -2..2
  MatrixXcd hand = MatrixXcd::Zero(5, 5);
  for (int i = 0; i < 5; ++i) {
    const int mx = i - 2;
    hand(i, i) = cplx(h * h * square(2 * pi * mx) - 1.0, h * 0.5);
    if (i + 1 < 5) hand(i, i + 1) = hand(i + 1, i) = cplx(0.0, -0.25 * h);
  }
  MatrixXcd got(5, 5);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 5; ++c)
      got(r, c) = A.L(static_cast<Eigen::Index>(*b->find_torus({r - 2, 0})), static_cast<Eigen::Index>(*b->find_torus({c - 2, 0})));
  EXPECT_LT((got - hand).cwiseAbs().maxCoeff(), 1e-13);
  // b = 0, h = 1/lambda_j: zero diagonal entry
  const auto j = *b->find_torus({1, 0});
  const auto A0 = assemble_Lh(1.0 / b->entries()[j].frequency, *b, MatrixXcd::Zero(B.rows(), B.cols()));
  EXPECT_NEAR(std::abs(A0.L(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j))), 0.0, 1e-15);
  EXPECT_THROW(assemble_Lh(0.0, *b, B), DomainError);
}

TEST(MinSingular, Oracles) {
  EXPECT_NEAR(min_singular(MatrixXcd::Identity(4, 4)), 1.0, 1e-15);
  MatrixXcd D = MatrixXcd::Zero(2, 2);
  D(0, 0) = {-0.5, 0.1};
  D(1, 1) = 2.0;
  EXPECT_NEAR(min_singular(D), std::sqrt(0.26), 1e-15);
  const MatrixXcd A = random_matrix(50, 4);
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(A.adjoint() * A, Eigen::EigenvaluesOnly);
  const double oracle = std::sqrt(es.eigenvalues().minCoeff());
  EXPECT_LT(std::abs(min_singular(A) - oracle) / oracle, 1e-10);
  EXPECT_THROW(min_singular(MatrixXcd::Zero(2, 3)), DomainError);
}

TEST(ResolventSweep, ConstantDampingClosedForm) {
  const auto t1 = ManifoldModel::torus(1);
  const int K = 64;
  // at h = 1/(2 pi m) the closest diagonal entry is exactly i h
  const std::vector<double> hs = {1 / (8 * pi), 1 / (16 * pi), 1 / (32 * pi)};
  ResolventOptions o;
  o.spread_bound = 100.0;
  const auto r = resolvent_sweep(DampingProfile::constant(1.0), t1, K, hs, 0.0, o);
  const auto basis = torus_basis(t1, K);
  for (const auto& s : r.samples) {
    double oracle = 1e300;
    for (const auto& e : basis.entries()) oracle = std::min(oracle, std::abs(cplx(s.h * s.h * e.eigenvalue - 1.0, s.h)));
    EXPECT_NEAR(s.sigma_min, oracle, 1e-10);
    EXPECT_GE(s.sigma_min, s.lower_bound * (1 - 1e-12));
  }
  EXPECT_NEAR(r.fit.slope, 1.0, 0.1);
  EXPECT_TRUE(r.lower_bound_ok);
  EXPECT_TRUE(r.truncation_ok);
}

TEST(ResolventSweep, UndampedDistanceToSpectrum) {
  const auto t1 = ManifoldModel::torus(1);
  const std::vector<double> hs = {0.07, 0.03, 0.011};
  ResolventOptions o;
  o.spread_bound = 1e9;
  const auto r = resolvent_sweep(DampingProfile::constant(0.0), t1, 100, hs, 0.0, o);
  const auto basis = torus_basis(t1, 100);
  for (const auto& s : r.samples) {
    double oracle = 1e300;
    for (const auto& e : basis.entries()) oracle = std::min(oracle, std::abs(1.0 - s.h * s.h * e.eigenvalue));
    EXPECT_NEAR(s.sigma_min, oracle, 1e-12);
  }
}

TEST(ResolventSweep, Preconditions) {
  const auto t1 = ManifoldModel::torus(1);
  EXPECT_THROW(resolvent_sweep(DampingProfile::constant(1.0), t1, 4, {0.01}, 0.0), ResolutionError);
  EXPECT_THROW(resolvent_sweep(DampingProfile::constant(1.0), t1, 64, {0.01, 0.02}, 0.0), DomainError);
  EXPECT_THROW(resolvent_sweep(DampingProfile::constant(1.0), t1, 64, {}, 0.0), DomainError);
}

TEST(ResolventSweep, SphereEquatorTwoSided) {
  ResolventOptions o;
  o.snap_to_resonance = true;
  o.rayleigh = true;
  o.truncation_check = false;
  const auto b = DampingProfile::smooth_surrogate(SubmanifoldSpec::great_subsphere(1), 1.0);
  const auto r = resolvent_sweep(b, ManifoldModel::sphere(2), 72, {0.125, 0.0625, 0.03125}, 1.0, o);
  EXPECT_EQ(r.samples[0].j, 8);
  EXPECT_EQ(r.samples[2].j, 32);
  EXPECT_NEAR(r.fit.slope, 2.0, 0.2);
  EXPECT_TRUE(r.certificate_pass);
  EXPECT_TRUE(r.rayleigh_ok);
  EXPECT_TRUE(r.lower_bound_ok);
}

TEST(Rayleigh, Oracles) {
  const auto g = build_grid(ManifoldModel::sphere(2), {{200, 4}});
  EXPECT_EQ(quasimode_rayleigh(40, DampingProfile::constant(0.0), g), 0.0);
  const double h = 1.0 / std::sqrt(40.0 * 41.0);
  EXPECT_NEAR(quasimode_rayleigh(40, DampingProfile::constant(0.3), g), 0.3 * h, 1e-14);
  double lo = 1e300;
  double hi = 0.0;
  const auto b = DampingProfile::distance_power(SubmanifoldSpec::great_subsphere(1), 1.0);
  for (int j : {64, 128, 256}) {
    const auto gj = build_grid(ManifoldModel::sphere(2), {{static_cast<std::size_t>(2 * j + 64), 4}});
    const double hj = 1.0 / std::sqrt(double(j) * (j + 1));
    const double v = quasimode_rayleigh(j, b, gj) / (hj * hj);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  EXPECT_LT(hi / lo, 3.0);
}

TEST(EnergyIdentity, RandomVectors) {
  const auto b = torus2(8);
  const MatrixXcd B = damping_system(sin2x(), b).dense_gram();
  std::mt19937_64 rng(77);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> uh(0.01, 1.0);
  for (int t = 0; t < 20; ++t) {
    VectorXcd phi(static_cast<Eigen::Index>(b->size()));
    for (Eigen::Index i = 0; i < phi.size(); ++i) phi[i] = {nd(rng), nd(rng)};
    const auto r = energy_identity(phi, uh(rng), b->eigenvalues(), B);
    EXPECT_LT(r.defect(), 1e-12);
    EXPECT_TRUE(r.inequality_i);
    EXPECT_TRUE(r.inequality_ii);
  }
  const auto z = energy_identity(VectorXcd::Zero(static_cast<Eigen::Index>(b->size())), 0.3, b->eigenvalues(), B);
  EXPECT_EQ(z.im_lhs, 0.0);
  EXPECT_EQ(z.re_lhs, 0.0);
  // single mode, b = 0: Re <f, phi> = (h^2 lambda^2 - 1) ||phi||^2
  const auto j = *b->find_torus({2, 1});
  const auto one = ModeVector::unit(b, j, {0.0, 2.0});
  const auto r1 = energy_identity(one, 0.05, MatrixXcd::Zero(B.rows(), B.cols()));
  EXPECT_NEAR(r1.re_lhs, (0.0025 * b->entries()[j].eigenvalue - 1.0) * 4.0, 1e-13);
  EXPECT_NEAR(r1.f_norm, std::abs(0.0025 * b->entries()[j].eigenvalue - 1.0) * 2.0, 1e-13);
}

TEST(StationaryForm, ScalingIdentity) {
  const auto b = torus2(6);
  const auto s = damping_system(sin2x(), b);
  for (double lam : {5.0, 11.3, 20.0}) {
    const auto r = stationary_form_check(lam, s);
    EXPECT_LT(r.relative_defect, 1e-10);
  }
  const auto s0 = damping_system(DampingProfile::constant(0.0), b);
  const auto r0 = stationary_form_check(9.0, s0);
  double oracle = 1e300;
  for (const auto& e : b->entries()) oracle = std::min(oracle, std::abs(e.eigenvalue - 81.0));
  EXPECT_NEAR(r0.sigma_stationary, oracle, 1e-10);
}
