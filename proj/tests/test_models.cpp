#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "ubk/models.hpp"
#include "ubk/quadrature.hpp"

using ubk::make_model;

namespace {

//! Closed-form CDF of the density (1 - |x|)^+, written out independently.
double triangle_cdf(double x)
{
  if (x <= -1.0)
    return 0.0;
  if (x >= 1.0)
    return 1.0;
  return x <= 0.0 ? (1.0 + x) * (1.0 + x) / 2.0 : 1.0 - (1.0 - x) * (1.0 - x) / 2.0;
}

double at(const ubk::PointFn& fn, double x)
{
  return fn(std::span<const double>(&x, 1));
}

} // namespace

TEST(Models, EveryShippedNameBuilds)
{
  for (const auto& name : ubk::model_names()) {
    const auto model = make_model(name);
    EXPECT_EQ(model.name, name);
    EXPECT_TRUE(static_cast<bool>(model.oracle.f));
  }
  EXPECT_THROW(make_model("gaussian"), std::invalid_argument);
  EXPECT_THROW(make_model("bump_square"), std::invalid_argument);
  EXPECT_THROW(make_model("uniform", ubk::ResponseRegime::bounded()), std::invalid_argument);
}

TEST(Models, DensitySamplesAreDeterministic)
{
  const auto model = make_model("uniform");
  const auto a = ubk::draw_density_sample(model, 5, 123);
  const auto b = ubk::draw_density_sample(model, 5, 123);
  ASSERT_EQ(a.size(), 5U);
  for (std::size_t i = 0; i < 5; ++i)
    EXPECT_EQ(a.point(i)[0], b.point(i)[0]);
  const auto c = ubk::draw_density_sample(model, 5, 124);
  EXPECT_NE(a.point(0)[0], c.point(0)[0]);
}

TEST(Models, SamplesArePrefixConsistent)
{
  const auto model = make_model("triangular");
  const auto small = ubk::draw_density_sample(model, 10, 3, 2);
  const auto large = ubk::draw_density_sample(model, 1000, 3, 2);
  for (std::size_t i = 0; i < small.size(); ++i)
    EXPECT_EQ(small.point(i)[0], large.point(i)[0]);
}

TEST(Models, SinglePointLiesInSupport)
{
  for (const char* name : { "uniform", "triangular", "bump" }) {
    const auto s = ubk::draw_density_sample(make_model(name), 1, 77);
    ASSERT_EQ(s.size(), 1U);
    EXPECT_GE(s.point(0)[0], -1.0);
    EXPECT_LE(s.point(0)[0], 1.0);
  }
}

TEST(Models, TriangularSampleMatchesCdf)
{
  const std::size_t n = 100000;
  auto s = ubk::draw_density_sample(make_model("triangular"), n, 2024);
  std::vector<double> xs(s.flat().begin(), s.flat().end());
  std::sort(xs.begin(), xs.end());
  double ks = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double F = triangle_cdf(xs[i]);
    ks = std::max({ ks, std::abs(F - static_cast<double>(i) / n), std::abs(F - static_cast<double>(i + 1) / n) });
  }
  // DKW band at level 0.003
  EXPECT_LT(ks, std::sqrt(std::log(2.0 / 0.003) / (2.0 * n)));
}

TEST(Models, BumpQuantileInvertsCdf)
{
  for (int i = 1; i < 1000; ++i) {
    const double u = i / 1000.0;
    EXPECT_NEAR(ubk::detail::bump_cdf(ubk::detail::bump_quantile(u)), u, 1e-12);
  }
}

TEST(Models, ZeroNoiseGivesExactRegression)
{
  const auto model = make_model("uniform_sine", ubk::ResponseRegime::bounded(0.0));
  const auto ps = ubk::draw_regression_sample(model, 200, 5);
  for (std::size_t i = 0; i < ps.size(); ++i)
    EXPECT_EQ(ps.response(i), std::sin(3.0 * ps.base().point(i)[0]));
}

TEST(Models, BoundedNoiseRespectsItsBound)
{
  const auto model = make_model("triangular_square", ubk::ResponseRegime::bounded(1.0));
  const auto ps = ubk::draw_regression_sample(model, 20000, 8);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const double x = ps.base().point(i)[0];
    ASSERT_LE(std::abs(ps.response(i) - x * x), 1.0);
    if (std::abs(x) <= model.oracle.i_hi + model.oracle.J_margin) {
      ASSERT_LE(std::abs(ps.response(i)), model.regime.M);
    }
  }
}

TEST(Models, DensityOnlyModelsRefuseRegressionDraws)
{
  EXPECT_THROW(ubk::draw_regression_sample(make_model("uniform"), 5, 1), std::invalid_argument);
}

TEST(Models, LomaxMomentClosedForm)
{
  // Gamma(4) Gamma(1) / Gamma(4) = 1
  EXPECT_NEAR(ubk::lomax_abs_moment(3.0, 4.0), 1.0, 1e-14);
  // E|Z| = 1/(a - 1)
  EXPECT_NEAR(ubk::lomax_abs_moment(1.0, 5.0), 0.25, 1e-14);
  EXPECT_TRUE(std::isinf(ubk::lomax_abs_moment(4.0, 4.0)));
}

TEST(Models, HeavyTailThirdMomentMatchesClosedForm)
{
  // |Z|^3 has infinite variance at tail index 4, so sigma is the sample estimate
  const auto model = make_model("uniform_square", ubk::ResponseRegime::moment(3.0, 4.0));
  const auto ps = ubk::draw_regression_sample(model, 1000000, 31);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const double x = ps.base().point(i)[0];
    const double v = std::pow(std::abs(ps.response(i) - x * x), 3.0);
    sum += v;
    sum_sq += v * v;
  }
  const double n = static_cast<double>(ps.size());
  const double mean = sum / n;
  const double sigma = std::sqrt((sum_sq / n - mean * mean) / n);
  EXPECT_NEAR(mean, ubk::lomax_abs_moment(3.0, 4.0), 3.0 * sigma);
}

TEST(ModelTruth, UniformDensity)
{
  const auto& o = ubk::model_truth(make_model("uniform"));
  EXPECT_EQ(at(o.f, 0.3), 0.5);
  EXPECT_EQ(at(o.f, -1.0), 0.5);
  EXPECT_EQ(at(o.f, 1.5), 0.0);
}

TEST(ModelTruth, UniformNoiseConditionalCdf)
{
  const auto model = make_model("uniform_square", ubk::ResponseRegime::bounded(1.0));
  for (double x : { -0.4, 0.0, 0.3 })
    for (double t : { -2.0, -0.5, 0.0, 0.4, 1.0, 2.0 }) {
      const double expected = std::clamp((t - x * x + 1.0) / 2.0, 0.0, 1.0);
      EXPECT_DOUBLE_EQ(model.oracle.cond_cdf(t, std::span<const double>(&x, 1)), expected);
    }
}

TEST(ModelTruth, ConditionalCdfIsMonotoneInT)
{
  for (auto regime : { ubk::ResponseRegime::bounded(0.5), ubk::ResponseRegime::moment(3.0, 4.0) }) {
    const auto model = make_model("triangular_sine", regime);
    for (double x : { -0.5, 0.1, 0.5 }) {
      double prev = 0.0;
      for (int i = -400; i <= 400; ++i) {
        const double v = model.oracle.cond_cdf(i / 50.0, std::span<const double>(&x, 1));
        EXPECT_GE(v, prev);
        EXPECT_LE(v, 1.0);
        prev = v;
      }
    }
  }
}

TEST(ModelTruth, TriangularLipschitzConstant)
{
  EXPECT_EQ(ubk::model_truth(make_model("triangular")).lipschitz_const.value(), 1.0);
}

TEST(ModelTruth, DensitiesIntegrateToOneAndStayPositiveOnJ)
{
  for (const auto& name : ubk::model_names()) {
    const auto model = make_model(name);
    const auto& o = model.oracle;
    const auto rule = ubk::composite_gauss(-1.0, 1.0, o.breakpoints, 4096);
    std::vector<ubk::Rule1d> rules(o.dim, rule);
    const double mass = ubk::integrate_tensor(std::span<const ubk::Rule1d>(rules), o.f);
    EXPECT_NEAR(mass, 1.0, 1e-10) << name;
    // scan J = [-0.75, 0.75]^d against the documented floor
    const double lo = o.i_lo - o.J_margin, hi = o.i_hi + o.J_margin;
    EXPECT_GT(o.density_floor_on_J, 0.0) << name;
    std::vector<double> pt(o.dim);
    for (int i = 0; i <= 300; ++i)
      for (int j = 0; j <= (o.dim == 2 ? 300 : 0); ++j) {
        pt[0] = lo + (hi - lo) * i / 300.0;
        if (o.dim == 2)
          pt[1] = lo + (hi - lo) * j / 300.0;
        ASSERT_GE(o.f(pt), o.density_floor_on_J - 1e-15) << name;
      }
  }
}

TEST(ModelTruth, TranslationShiftsEveryFunction)
{
  const auto model = make_model("triangular_square");
  const double shift = 0.3;
  const auto moved = ubk::translate(model.oracle, std::span<const double>(&shift, 1));
  for (double x : { -0.2, 0.0, 0.45 }) {
    const double y = x + shift;
    EXPECT_EQ(at(moved.f, y), at(model.oracle.f, x));
    EXPECT_EQ(at(moved.m, y), at(model.oracle.m, x));
  }
}
