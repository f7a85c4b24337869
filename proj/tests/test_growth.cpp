#include <gtest/gtest.h>

#include "domino/growth.hpp"

using namespace domino;

namespace {

PeriodicWeights two_periodic(double a, double b) {
  PeriodicWeights w(1, 0);
  w.set_tuple({0, 0}, {a, a, a, a});
  w.set_tuple({1, 1}, {b, b, b, b});
  return w;
}

const EmpiricalShape& uniform_shape() {
  static const EmpiricalShape s = empirical_limit_shape(PeriodicWeights::uniform(1), 96, 30, 11);
  return s;
}

const EmpiricalShape& uniform_half_shape() {
  static const EmpiricalShape s = empirical_limit_shape(PeriodicWeights::uniform(1), 48, 30, 12);
  return s;
}

}  // namespace

TEST(Envelopes, Values) {
  EXPECT_EQ(envelopes(0, 0, 1), std::make_pair(-0.25, 0.25));
  EXPECT_EQ(envelopes(0.25, 0, 1), std::make_pair(0.0, 0.25));
  for (int n : {1, 2, 3}) {
    const double r = 1.0 / (2.0 * n);
    for (double t : {0.0, 0.2, 0.5, 0.9, 1.0}) {
      const double x1 = r * t, x2 = r * (1 - t);
      const auto [lo, hi] = envelopes(x1, -x2, n);
      EXPECT_NEAR(lo, boundary_profile(x1, -x2, n), 1e-15);
      EXPECT_NEAR(hi, boundary_profile(x1, -x2, n), 1e-15);
    }
  }
  EXPECT_THROW(envelopes(0.3, 0.3, 1), InvalidArgument);
}

TEST(SpeedKasteleyn, UniformCentreIsZero) {
  const SpeedEstimate e = speed_kasteleyn(PeriodicWeights::uniform(1), {0, 0}, 16);
  EXPECT_LT(std::abs(e.v), 1e-3);
  EXPECT_EQ(e.method, SpeedMethod::KasteleynSum);
  EXPECT_EQ(e.terms.size(), 16u);
  EXPECT_GE(e.error_bar, 0.0);
  // all weights on the chain are gauge equivalent: no Cesaro drift
  EXPECT_LT(e.cesaro_gap, 1e-12);
}

TEST(SpeedKasteleyn, ReflectionSymmetry) {
  // uniform weights: swapping the two lattice directions maps H to V
  const auto a = speed_kasteleyn(PeriodicWeights::uniform(1), {0.3, 0.1}, 8);
  const auto b = speed_kasteleyn(PeriodicWeights::uniform(1), {-0.3, 0.1}, 8);
  const auto c = speed_kasteleyn(PeriodicWeights::uniform(1), {0.3, -0.1}, 8);
  EXPECT_NEAR(a.v, b.v, 1e-9);
  EXPECT_NEAR(a.v, c.v, 1e-9);
  const auto d = speed_kasteleyn(PeriodicWeights::uniform(1), {0.1, 0.3}, 8);
  EXPECT_NEAR(a.v, -d.v, 1e-9);
}

TEST(SpeedKasteleyn, TrendsToCornerValue) {
  const auto u = PeriodicWeights::uniform(1);
  const double v1 = speed_kasteleyn(u, {0.95, 0}, 8).v;
  const double v2 = speed_kasteleyn(u, {0.98, 0}, 8).v;
  EXPECT_LT(v2, v1);
  const double extrapolated = v2 + (v2 - v1) / 0.03 * 0.02;
  EXPECT_NEAR(extrapolated, -0.25, 0.02);
}

TEST(SpeedKasteleyn, RejectsSmoothAndBadInput) {
  EXPECT_THROW(speed_kasteleyn(two_periodic(3, 1), {0, 0}, 8), InvalidArgument);
  EXPECT_THROW(speed_kasteleyn(PeriodicWeights::uniform(1), {0, 0}, 1), InvalidArgument);
  EXPECT_THROW(speed_kasteleyn(PeriodicWeights::uniform(1), {1.0, 0.0}, 8), InvalidArgument);
}

TEST(SpeedKasteleyn, RandomWeightsCesaroGap) {
  const auto e = speed_kasteleyn(PeriodicWeights::random(1, 3), {0.3, 0.2}, 32);
  double sum = 0.0;
  for (double t : e.terms) sum += t;
  EXPECT_NEAR(e.v, sum / (4.0 * 32), 1e-15);
  double partial = 0.0;
  for (int j = 0; j < 30; ++j) partial += e.terms[j];
  EXPECT_NEAR(e.cesaro_gap, std::abs(e.v - partial / (4.0 * 30)), 1e-15);
  EXPECT_GE(e.error_bar, e.cesaro_gap);
}

TEST(SpeedHessian, UniformCentreSaddle) {
  const SpeedHessian H = speed_hessian(PeriodicWeights::uniform(1), {0, 0}, 0.1, 8);
  EXPECT_LT(H.det + H.det_error, 0.0);
  EXPECT_LT(std::abs(H.D2(0, 1)), 1e-8 + H.D2_error(0, 1));
  EXPECT_THROW(speed_hessian(two_periodic(3, 1), {0, 0}, 0.1, 8), InvalidArgument);
}

TEST(EmpiricalShape, BoundaryEnvelopesCorners) {
  const EmpiricalShape& s = uniform_shape();
  const ShapeChecks c = check_shape(s);
  EXPECT_LE(c.boundary_deviation, 2.0 / s.N);
  EXPECT_LE(c.envelope_violation, 2.0 / s.N);
  EXPECT_GT(c.corner_cells, 0);
  EXPECT_LE(c.corner_deviation, 0.03);
  EXPECT_NEAR(s.psi(0, 0), 0.0, 0.02);
}

TEST(EmpiricalShape, DeterministicAcrossThreads) {
  const auto a = empirical_limit_shape(PeriodicWeights::random(2, 1), 20, 6, 5, 1);
  const auto b = empirical_limit_shape(PeriodicWeights::random(2, 1), 20, 6, 5, 3);
  EXPECT_EQ(a.sum, b.sum);
  EXPECT_EQ(a.sum_sq, b.sum_sq);
}

TEST(EmpiricalShape, InvariantUnderSpiderStep) {
  // psi for w0 and for spider(w0) agree cell by cell within 3 standard errors
  const PeriodicWeights w = PeriodicWeights::random(1, 8);
  const auto a = empirical_limit_shape(w, 64, 60, 21);
  const auto b = empirical_limit_shape(spider_step(w), 64, 60, 22);
  int checked = 0, outside = 0;
  for (int j = -48; j <= 48; j += 12)
    for (int i = -48; i <= 48; i += 12) {
      if (!a.has(i, j)) continue;
      const double se = std::hypot(a.standard_error(i, j), b.standard_error(i, j));
      ++checked;
      outside += std::abs(a.psi(i, j) - b.psi(i, j)) > 3 * se + 1e-12;
    }
  EXPECT_GT(checked, 30);
  EXPECT_LE(outside, 1);
}

TEST(SpeedLimitShape, CentreAndCrossValidation) {
  const EmpiricalShape& s = uniform_shape();
  const SpeedEstimate c = speed_limit_shape(s, {0, 0}, &uniform_half_shape());
  EXPECT_NEAR(c.v, 0.0, 0.02);
  EXPECT_LT(std::hypot(c.x_w[0], c.x_w[1]), 0.05);
  for (Slope rho : {Slope{0.3, 0.2}, Slope{-0.4, 0.1}}) {
    const SpeedEstimate L = speed_limit_shape(s, rho, &uniform_half_shape());
    const SpeedEstimate K = speed_kasteleyn(PeriodicWeights::uniform(1), rho, 8);
    EXPECT_LE(std::abs(L.v - K.v), L.error_bar + K.error_bar);
    EXPECT_GT(L.error_bar, 0.0);
  }
  EXPECT_THROW(speed_limit_shape(s, {0.999, 0.0}, nullptr, 0.0005), NotResolved);
}

TEST(SpeedLimitShape, GradientIdentity) {
  // D v = -x_w: finite differences of the Kasteleyn speed against the shape
  const Slope rho{0.2, 0.1};
  const double h = 0.05;
  const auto u = PeriodicWeights::uniform(1);
  const double d1 = (speed_kasteleyn(u, {rho.r1 + h, rho.r2}, 4).v - speed_kasteleyn(u, {rho.r1 - h, rho.r2}, 4).v) / (2 * h);
  const double d2 = (speed_kasteleyn(u, {rho.r1, rho.r2 + h}, 4).v - speed_kasteleyn(u, {rho.r1, rho.r2 - h}, 4).v) / (2 * h);
  const SpeedEstimate L = speed_limit_shape(uniform_shape(), rho);
  EXPECT_NEAR(-L.x_w[0], d1, 0.05);
  EXPECT_NEAR(-L.x_w[1], d2, 0.05);
}

TEST(Facets, TwoPeriodicCentralFacet) {
  const auto s = empirical_limit_shape(two_periodic(3, 1), 100, 10, 4);
  const auto f = facets(s, {0, 0});
  ASSERT_FALSE(f.empty());
  EXPECT_GE(f[0].diameter, 5.0);
  EXPECT_LT(f[0].v_max - f[0].v_min, 0.03);
  EXPECT_GT(std::hypot(f[0].x_far[0] - f[0].x_first[0], f[0].x_far[1] - f[0].x_first[1]), 0.0);
}

TEST(Fluctuations, ShapesAndModels) {
  const auto f = fluctuation_stats(PeriodicWeights::uniform(1), {0, 0}, 24, 50, 3, 1, 8);
  ASSERT_EQ(f.variance.size(), 25u);
  EXPECT_EQ(f.variance[0], 0.0);
  EXPECT_EQ(f.runs, 50);
  EXPECT_EQ(f.fits.size(), 3u);
  // synthetic series pick their own model
  std::vector<double> lg, lin, cst;
  for (int k = 0; k <= 256; ++k) {
    lg.push_back(k ? 0.3 * std::log(k) : 0.0);
    lin.push_back(0.01 * k);
    cst.push_back(0.4);
  }
  auto best = [](const std::vector<double>& v) {
    const auto fits = fit_growth_models(v, 16);
    return std::min_element(fits.begin(), fits.end(), [](auto& a, auto& b) { return a.residual < b.residual; })->name;
  };
  EXPECT_EQ(best(lg), "log");
  EXPECT_EQ(best(lin), "linear");
  EXPECT_EQ(best(cst), "constant");
  EXPECT_THROW(fluctuation_stats(PeriodicWeights::uniform(1), {0.6, 0}, 8, 4, 1), InvalidArgument);
}

TEST(LocalQuadratic, RecoversExactQuadratic) {
  EmpiricalShape s = empty_shape(1, 64);
  s.samples = 1000;
  auto psi = [](double x, double y) { return 0.1 + 0.2 * x - 0.05 * y + 0.5 * x * x - 0.3 * x * y - 0.7 * y * y; };
  for (int j = -64; j <= 64; ++j)
    for (int i = -64; i <= 64; ++i)
      if (s.has(i, j)) {
        const auto x = s.x(i, j);
        s.sum[s.slot(i, j)] = std::llround(psi(x[0], x[1]) * s.samples * 4.0 * s.N);
      }
  const LocalQuadratic q = fit_local_quadratic(s, 8, -4, 0.1);
  const auto x = s.x(8, -4);
  EXPECT_NEAR(q.D2(0, 0), 1.0, 1e-3);
  EXPECT_NEAR(q.D2(0, 1), -0.3, 1e-3);
  EXPECT_NEAR(q.D2(1, 1), -1.4, 1e-3);
  EXPECT_NEAR(q.gradient[0], 0.2 + x[0] - 0.3 * x[1], 1e-4);
  EXPECT_NEAR(q.value, psi(x[0], x[1]), 1e-5);
  EXPECT_THROW(fit_local_quadratic(s, 60, 0, 0.1), NotResolved);
}
