#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "tubelab/concentration.hpp"
#include "tubelab/fit.hpp"

using namespace tubelab;

namespace {

// composite Simpson on [a, b], independent of the Gauss rules under test
template <typename F>
double simpson(F f, double a, double b, int n = 20000) {
  const double hh = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * hh) * (i % 2 ? 4.0 : 2.0);
  return s * hh / 3.0;
}

const std::vector<double> dyadic = {0.0625, 0.125, 0.25, 0.5};

}  // namespace

TEST(Fit, ExactPowerLaw) {
  std::vector<double> x = {0.5, 1.0, 2.0, 4.0, 8.0};
  std::vector<double> y;
  for (double v : x) y.push_back(3.0 * v * v);
  const auto f = fit_power_law(x, y);
  EXPECT_NEAR(f.slope, 2.0, 1e-12);
  EXPECT_NEAR(f.intercept, std::log(3.0), 1e-12);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
  EXPECT_EQ(f.count, 5u);
  const auto c = fit_power_law(x, std::vector<double>(5, 7.0));
  EXPECT_NEAR(c.slope, 0.0, 1e-14);
  EXPECT_EQ(c.r_squared, 1.0);
}

TEST(Fit, PowerTimesLogRecoversSlope) {
  std::vector<double> x;
  std::vector<double> y;
  for (double a = 1.0 / 64; a < 0.6; a *= 2) {
    x.push_back(a);
    y.push_back(a * std::log(1.0 / a));
  }
  EXPECT_NEAR(fit_power_law(x, y, FitModel::PowerTimesLog).slope, 1.0, 1e-10);
  // the pure model sees a smaller apparent slope
  EXPECT_LT(fit_power_law(x, y, FitModel::PurePower).slope, 1.0);
}

TEST(Fit, ScaleEquivariance) {
  std::vector<double> x = {0.1, 0.2, 0.4, 0.8};
  std::vector<double> y = {0.3, 0.45, 0.62, 0.9};
  std::vector<double> y2;
  for (double v : y) y2.push_back(2.0 * v);
  const auto a = fit_power_law(x, y);
  const auto b = fit_power_law(x, y2);
  EXPECT_NEAR(a.slope, b.slope, 1e-14);
  EXPECT_NEAR(b.intercept - a.intercept, std::log(2.0), 1e-14);
}

TEST(Fit, Errors) {
  EXPECT_THROW(fit_power_law({1.0, 2.0}, {1.0, 2.0}), DomainError);
  EXPECT_THROW(fit_power_law({1.0, 1.0, 2.0}, {1.0, 2.0, 3.0}), DomainError);
  EXPECT_THROW(fit_power_law({1.0, 2.0, 3.0}, {1.0, 0.0, 3.0}), DomainError);
  EXPECT_THROW(fit_power_law({0.1, 0.2, 2.0}, {1.0, 1.0, 3.0}, FitModel::PowerTimesLog), DomainError);
}

TEST(CodimExponent, Table) {
  EXPECT_EQ(CodimExponent::of(1, 2).sigma, 0.5);
  EXPECT_FALSE(CodimExponent::of(1, 2).log_correction);
  EXPECT_TRUE(CodimExponent::of(1, 3).log_correction);
  EXPECT_EQ(CodimExponent::of(1, 3).sigma, 1.0);
  EXPECT_EQ(CodimExponent::of(2, 5).sigma, 1.0);
  EXPECT_FALSE(CodimExponent::of(2, 5).log_correction);
  EXPECT_THROW(CodimExponent::of(3, 3), DomainError);
}

TEST(TubeNorm, TorusConstantAndPlaneWave) {
  const auto m = ManifoldModel::torus(2);
  const auto g = build_grid(m, {{200, 8}});
  const auto sig = SubmanifoldSpec::sub_torus({true, false});
  const Tube tube(0.4, 0.0625, sig);  // beta = 0.1
  const double vol = tube_volume(g, tube);
  EXPECT_NEAR(vol, 0.2, 1e-12);
  const PointFunction c = [](const VectorXd&) { return cplx(2.0, -1.0); };
  EXPECT_NEAR(tube_norm(c, tube, g), std::sqrt(5.0) * std::sqrt(0.2), 1e-12);
  auto b = std::make_shared<const SpectralBasis>(torus_basis(m, 3));
  const auto u = ModeVector::unit(b, *b->find_torus({2, -3}));
  EXPECT_NEAR(tube_norm(u, tube, g), std::sqrt(vol), 1e-12);
  EXPECT_THROW(tube_norm(u, Tube(0.4, 0.0625, sig), build_grid(m, {{16, 8}})), ResolutionError);
}

TEST(TubeNorm, HighestWeightAgainstSimpson) {
  const int j = 100;
  const double h = 1.0 / std::sqrt(double(j) * (j + 1));
  const Tube tube(0.25, h, SubmanifoldSpec::great_subsphere(1));
  const HighestWeight e{j, 2};
  const double s = std::sin(tube.half_width());
  const double oracle = std::sqrt(2.0 * pi * simpson([&](double t) { return std::pow(1.0 - t * t, j); }, -s, s) /
                                  e.norm_squared());
  const auto g = build_grid(ManifoldModel::sphere(2), {{2048, 4}});
  const double scale = 1.0 / std::sqrt(e.norm_squared());
  const double tn = tube_norm([&](const VectorXd& p) { return scale * e(p); }, tube, g);
  EXPECT_LT(std::abs(tn - oracle) / oracle, 0.01);
}

TEST(AlphaSweep, MonotoneAndSingleton) {
  const auto m = ManifoldModel::sphere(2);
  const auto g = build_grid(m, {{1024, 4}});
  const int j = 64;
  const double h = 1.0 / std::sqrt(64.0 * 65.0);
  const VectorXcd v = evaluate_on_grid([&](const VectorXd& p) { return HighestWeight{j, 2}(p); }, g);
  const auto sig = SubmanifoldSpec::great_subsphere(1);
  EXPECT_EQ(alpha_sweep(v, h, sig, {0.5}, g).size(), 1u);
  const auto s = alpha_sweep(v, h, sig, {0.0625, 0.125, 0.25, 0.5, 1.0}, g);
  for (std::size_t i = 1; i < s.size(); ++i) EXPECT_LE(s[i - 1].tube_norm, s[i].tube_norm);
  for (const auto& x : s) EXPECT_LE(x.tube_norm, x.full_norm + 1e-10);
  EXPECT_THROW(alpha_sweep(v, h, sig, {0.5, 0.25}, g), DomainError);
  EXPECT_THROW(alpha_sweep(v, h, sig, {0.0, 0.25}, g), DomainError);
}

TEST(AlphaSweep, HighestWeightSlopeOracle) {
  // oracle: direct Simpson integration of (1-t^2)^j over each band
  const int j = 64;
  const double h = 1.0 / std::sqrt(64.0 * 65.0);
  const auto g = build_grid(ManifoldModel::sphere(2), {{4096, 4}});
  const VectorXcd v = evaluate_on_grid([&](const VectorXd& p) { return HighestWeight{j, 2}(p); }, g);
  const auto s = alpha_sweep(v, h, SubmanifoldSpec::great_subsphere(1), dyadic, g);
  std::vector<double> oracle;
  for (double a : dyadic) {
    const double st = std::sin(a * std::sqrt(h));
    oracle.push_back(std::sqrt(2.0 * pi * simpson([&](double t) { return std::pow(1.0 - t * t, j); }, -st, st)));
  }
  const auto fo = fit_power_law(dyadic, oracle);
  const auto fs = fit_samples(s, false).at(0);
  EXPECT_NEAR(fs.slope, fo.slope, 0.05);
  EXPECT_NEAR(fs.slope, 0.5, 0.15);
}

TEST(ConcentrationCheck, PlaneWaveAdmitsCOne) {
  const auto m = ManifoldModel::torus(2);
  auto b = std::make_shared<const SpectralBasis>(torus_basis(m, 4));
  const auto j = *b->find_torus({3, 1});
  const auto psi = ModeVector::unit(b, j, {0.0, 3.0});
  const double h = 1.0 / b->entries()[j].frequency;
  const auto g = build_grid(m, {{2048, 16}});
  const auto sig = SubmanifoldSpec::sub_torus({true, false});
  const auto r = concentration_check(psi, h, sig, dyadic, g);
  EXPECT_LE(r.minimal_C, 1.0);
  EXPECT_FALSE(r.degenerate);
  ASSERT_TRUE(r.slope());
  EXPECT_NEAR(*r.slope(), 0.5, 0.02);
  for (std::size_t i = 0; i < r.samples.size(); ++i) {
    const double frac = r.samples[i].tube_norm / r.samples[i].full_norm;
    EXPECT_NEAR(frac, std::sqrt(2.0 * dyadic[i] * std::sqrt(h)), 0.02 * frac);
  }
  // 1-homogeneity
  const auto r2 = concentration_check(ModeVector{b, psi.coeffs * cplx(-0.3, 2.0)}, h, sig, dyadic, g);
  EXPECT_NEAR(r2.minimal_C, r.minimal_C, 1e-12 * r.minimal_C);
  // zero input
  const auto r0 = concentration_check(ModeVector::zeros(b), h, sig, dyadic, g);
  EXPECT_TRUE(r0.degenerate);
  EXPECT_EQ(r0.minimal_C, 0.0);
}

TEST(ConcentrationCheck, ResidualEntersBound) {
  const auto m = ManifoldModel::torus(2);
  auto b = std::make_shared<const SpectralBasis>(torus_basis(m, 4));
  auto psi = ModeVector::unit(b, *b->find_torus({3, 1}));
  psi.coeffs[static_cast<Eigen::Index>(*b->find_torus({2, 2}))] = 0.5;
  const double h = 0.05;
  const auto g = build_grid(m, {{2048, 16}});
  const auto r = concentration_check(psi, h, SubmanifoldSpec::sub_torus({true, false}), dyadic, g);
  const double gn = helmholtz_residual(psi, h).norm();
  EXPECT_GT(gn, 0.0);
  EXPECT_NEAR(r.samples[0].residual_norm, gn, 1e-15);
  EXPECT_NEAR(r.bound_rhs[0], std::sqrt(dyadic[0]) * (psi.norm() + gn / h), 1e-9);
}

TEST(ConcentrationCheck, LogLossFitsBothModels) {
  std::vector<ConcentrationSample> s;
  for (double a : dyadic) s.push_back({a, 0.01, a * std::log(1.0 / a), 1.0, 0.0});
  const auto r = concentration_check(s, CodimExponent::of(1, 3));
  ASSERT_EQ(r.fits.size(), 2u);
  EXPECT_EQ(r.fits[1].model, FitModel::PowerTimesLog);
  EXPECT_NEAR(r.fits[1].slope, 1.0, 1e-10);
  EXPECT_NEAR(r.minimal_C, 1.0, 1e-12);
}

TEST(Projector, TrivialAndSingleMode) {
  const auto m = ManifoldModel::torus(2);
  auto b = std::make_shared<const SpectralBasis>(torus_basis(m, 4));
  const auto g = build_grid(m, {{1024, 16}});
  const auto sig = SubmanifoldSpec::sub_torus({true, false});
  // [20, 21) holds no torus frequency 2 pi |m|
  const auto r0 = projector_concentration_check(b, 20.0, sig, dyadic, g, 2, 1);
  EXPECT_TRUE(r0.trivial);
  EXPECT_EQ(r0.worst_C, 0.0);
  // [2 pi sqrt(5), +1) holds exactly the 8 modes with |m|^2 = 5
  const auto r1 = projector_concentration_check(b, 2.0 * pi * std::sqrt(5.0) - 0.5, sig, dyadic, g, 3, 7);
  EXPECT_EQ(r1.window_dimension, 8u);
  EXPECT_GT(r1.worst_C, 0.0);
  EXPECT_TRUE(std::isfinite(r1.worst_C));
}

TEST(Projector, Idempotent) {
  auto b = std::make_shared<const SpectralBasis>(torus_basis(ManifoldModel::torus(2), 11));
  const auto g = build_grid(ManifoldModel::torus(2), {{512, 32}});
  const auto w = WindowSpec::sharp(64.0);
  const auto p = window_project(random_mode_vector(b, 5), w);
  const Tube tube(0.25, 1.0 / 64, SubmanifoldSpec::sub_torus({true, false}));
  EXPECT_EQ(tube_norm(window_project(p, w), tube, g), tube_norm(p, tube, g));
}

TEST(Projector, RandomFieldsAtSixtyFour) {
  auto b = std::make_shared<const SpectralBasis>(torus_basis(ManifoldModel::torus(2), 11));
  const auto g = build_grid(ManifoldModel::torus(2), {{1024, 32}});
  const auto r = projector_concentration_check(b, 64.0, SubmanifoldSpec::sub_torus({true, false}), dyadic, g, 20, 2024);
  EXPECT_EQ(r.window_dimension, 16u);
  EXPECT_TRUE(std::isfinite(r.worst_C));
  EXPECT_GT(r.worst_C, 0.0);
  EXPECT_GE(r.min_slope, 0.5 - 0.1);
}

TEST(Saturation, HighestWeightSquaredSlope) {
  const auto r = sphere_saturation_check({128}, SaturationRegime::AlphaFixed);
  ASSERT_EQ(r.highest_weight.size(), 1u);
  EXPECT_NEAR(r.highest_weight[0].squared_fit.slope, 1.0, 0.15);
  EXPECT_NEAR(r.highest_weight[0].norm_fit.slope, 0.5, 0.1);
  // whole-sphere tube equals the full norm
  const auto g = build_grid(ManifoldModel::sphere(2), {{256, 4}});
  const VectorXcd v = evaluate_on_grid([](const VectorXd& p) { return HighestWeight{20, 2}(p); }, g);
  const Tube whole(1.0, 4.0, SubmanifoldSpec::great_subsphere(1));
  EXPECT_NEAR(tube_norm(v, whole, g), grid_norm(v, g), 1e-14);
}

TEST(Saturation, ZonalRatioBounded) {
  const auto r = sphere_saturation_check({32, 64, 128, 256}, SaturationRegime::AlphaEqualsSqrtH);
  ASSERT_EQ(r.zonal.size(), 4u);
  for (const auto& z : r.zonal) EXPECT_GT(z.ratio, 0.1);
  EXPECT_LT(r.spread(), 3.0);
}
