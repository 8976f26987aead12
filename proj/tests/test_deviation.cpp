#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "ubk/deviation.hpp"

using ubk::MaybeReal;

namespace {

ubk::Sample quantile_grid_sample(const ubk::Model& model, std::size_t n)
{
  std::vector<double> xs(n);
  for (std::size_t i = 0; i < n; ++i)
    xs[i] = model.axis_quantile((static_cast<double>(i) + 0.5) / static_cast<double>(n));
  return ubk::Sample(xs);
}

ubk::SupDeviation sup_of(const std::vector<MaybeReal>& est, const std::vector<MaybeReal>& tgt)
{
  return ubk::sup_deviation(std::span<const MaybeReal>(est), std::span<const MaybeReal>(tgt));
}

} // namespace

TEST(Normalizer, LogLogBranch)
{
  EXPECT_NEAR(ubk::normalizer(1024, 1.0), 32.0 / std::sqrt(std::log(std::log(1024.0))), 1e-12);
  EXPECT_NEAR(ubk::normalizer(1024, 1.0), 22.997, 1e-3);
}

TEST(Normalizer, LogBranch)
{
  EXPECT_NEAR(ubk::normalizer(1024, 0.1), std::sqrt(102.4 / std::log(10.0)), 1e-12);
  EXPECT_NEAR(ubk::normalizer(1024, 0.1), 6.669, 5e-4);
}

TEST(Normalizer, BranchesAgreeAtCrossover)
{
  const std::size_t n = 5000;
  const double h = std::exp(-std::log(std::log(5000.0)));
  const double direct = std::sqrt(5000.0 * h / std::log(std::log(5000.0)));
  EXPECT_NEAR(ubk::normalizer(n, h), direct, 1e-12 * direct);
  EXPECT_NEAR(ubk::normalizer(n, h * (1.0 - 1e-9)), ubk::normalizer(n, h * (1.0 + 1e-9)), 1e-6);
}

TEST(Normalizer, RejectsSmallSamplesAndBadBandwidths)
{
  EXPECT_THROW(ubk::normalizer(15, 0.5), std::invalid_argument);
  EXPECT_NO_THROW(ubk::normalizer(16, 0.5));
  EXPECT_THROW(ubk::normalizer(100, 0.0), std::invalid_argument);
}

TEST(Normalizer, RatioIsNondecreasingInBandwidth)
{
  for (std::size_t n : { 16UL, 1000UL, 1UL << 20 }) {
    double prev = 0.0;
    for (int i = 1; i <= 10000; ++i) {
      const double h = i / 10000.0;
      const double v = ubk::normalizer(n, h);
      EXPECT_GE(v, prev) << "n=" << n << " h=" << h;
      prev = v;
    }
  }
}

TEST(Normalizer, QuadruplingSampleSize)
{
  for (std::size_t n : { 16UL, 100UL, 4096UL, 1UL << 18 })
    for (double h : { 1e-4, 0.01, 0.2, 0.9 }) {
      const double lln = std::log(std::log(static_cast<double>(n)));
      const double lln4 = std::log(std::log(4.0 * static_cast<double>(n)));
      const double expected = 2.0 * std::sqrt(std::max(std::log(1.0 / h), lln) / std::max(std::log(1.0 / h), lln4));
      EXPECT_NEAR(ubk::normalizer(4 * n, h) / ubk::normalizer(n, h), expected, 1e-13);
    }
}

TEST(DyadicGrid, Example)
{
  const auto b = ubk::dyadic_grid(1.0, 10, 2.0);
  EXPECT_NEAR(b.h_list.front(), std::log(1024.0) / 1024.0, 1e-17);
  EXPECT_NEAR(b.h_list.front(), 0.0067690, 5e-8);
  EXPECT_EQ(b.l_k(), 8U);
  EXPECT_NEAR(b.h_list.back(), 1.7329, 5e-5);
  EXPECT_GT(2.0 * b.h_list.back(), 2.0);
  EXPECT_EQ(b.n_k, 1024U);
}

TEST(DyadicGrid, CapAtFirstBlock)
{
  const double h0 = std::log(1024.0) / 1024.0;
  const auto b = ubk::dyadic_grid(1.0, 10, h0);
  EXPECT_EQ(b.l_k(), 0U);
}

TEST(DyadicGrid, StrictDoubling)
{
  for (double c : { 0.5, 1.0, 2.0, 7.3 })
    for (unsigned k = 6; k <= 24; ++k) {
      const auto b = ubk::dyadic_grid(c, k, 1.0);
      for (std::size_t j = 1; j < b.h_list.size(); ++j)
        EXPECT_EQ(b.h_list[j] / b.h_list[j - 1], 2.0);
      EXPECT_LE(b.h_list.back(), 1.0);
    }
}

TEST(DyadicGrid, GammaAdjustedAnchor)
{
  const auto b = ubk::dyadic_grid(2.0, 12, 1.0, 1.0 / 3.0);
  EXPECT_NEAR(b.h_list.front(), 2.0 * std::cbrt(std::log(4096.0) / 4096.0), 1e-15);
}

TEST(DyadicGrid, RangeEmpty)
{
  EXPECT_THROW(ubk::dyadic_grid(1000.0, 8, 1.0), ubk::RangeEmptyError);
  EXPECT_THROW(ubk::dyadic_grid(0.0, 8, 1.0), std::invalid_argument);
  EXPECT_THROW(ubk::dyadic_grid(1.0, 3, 1.0), std::invalid_argument);
}

TEST(SupDeviation, Examples)
{
  const std::vector<MaybeReal> a{ 0.1, 0.4, -0.3 };
  EXPECT_EQ(sup_of(a, a).sup_dev, 0.0);

  const std::vector<MaybeReal> ones(5, 1.0), zeros(5, 0.0);
  const auto s = sup_of(ones, zeros);
  EXPECT_EQ(s.sup_dev, 1.0);
  EXPECT_EQ(s.undefined_count, 0U);

  const std::vector<MaybeReal> est{ 0.1, std::nullopt, 0.3, 0.2, std::nullopt };
  const auto p = sup_of(est, zeros);
  EXPECT_EQ(p.sup_dev, 0.3);
  EXPECT_EQ(p.undefined_count, 2U);
}

TEST(SupDeviation, AllUndefinedIsDegenerate)
{
  const std::vector<MaybeReal> none(3), zeros(3, 0.0);
  EXPECT_THROW(sup_of(none, zeros), ubk::DegenerateReportError);
}

TEST(UbStatistic, RowPerBlockOnQuantileGrid)
{
  const auto model = ubk::make_model("triangular");
  const auto sample = quantile_grid_sample(model, 256);
  const auto box = ubk::Kernel::builtin(ubk::KernelShape::box);
  const auto blocks = ubk::dyadic_grid(1.0, 8, 1.0);
  const auto report = ubk::ub_statistic(sample, box, blocks, ubk::DeviationMode::density, model.oracle);
  ASSERT_EQ(report.rows.size(), blocks.l_k() + 1);
  double stat = 0.0;
  for (std::size_t j = 0; j < report.rows.size(); ++j) {
    const auto& r = report.rows[j];
    EXPECT_EQ(r.h, blocks.h_list[j]);
    EXPECT_GE(r.sup_dev, 0.0);
    EXPECT_EQ(r.normalized_stat, r.sup_dev * ubk::normalizer(256, r.h));
    stat = std::max(stat, r.normalized_stat);
  }
  EXPECT_EQ(report.statistic, stat);
}

TEST(UbStatistic, RangeEmptyForLargeC)
{
  EXPECT_THROW(ubk::dyadic_grid(200.0, 8, 1.0), ubk::RangeEmptyError);
  ubk::DyadicBlocks empty;
  const auto model = ubk::make_model("triangular");
  EXPECT_THROW(ubk::ub_statistic(quantile_grid_sample(model, 64), ubk::Kernel::builtin(ubk::KernelShape::box), empty,
                                 ubk::DeviationMode::density, model.oracle),
               ubk::RangeEmptyError);
}

TEST(UbStatistic, PermutationInvariant)
{
  const auto model = ubk::make_model("uniform_square", ubk::ResponseRegime::bounded());
  const auto ps = ubk::draw_regression_sample(model, 512, 1);
  std::vector<std::size_t> order(ps.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 gen(2);
  std::shuffle(order.begin(), order.end(), gen);
  std::vector<double> xs, ys;
  for (auto i : order) {
    xs.push_back(ps.base().point(i)[0]);
    ys.push_back(ps.response(i));
  }
  const ubk::PairedSample shuffled(ubk::Sample(xs), ys);
  const auto k = ubk::Kernel::builtin(ubk::KernelShape::epanechnikov);
  const auto blocks = ubk::dyadic_grid(2.0, 9, 0.5);
  for (auto mode : { ubk::DeviationMode::density, ubk::DeviationMode::regression }) {
    const auto a = ubk::ub_statistic(ps, k, blocks, mode, model.oracle);
    const auto b = ubk::ub_statistic(shuffled, k, blocks, mode, model.oracle);
    EXPECT_EQ(a.statistic, b.statistic);
  }
}

TEST(SupDeviation, RefiningGridNeverDecreases)
{
  const auto model = ubk::make_model("triangular");
  const auto s = ubk::draw_density_sample(model, 300, 9);
  const auto k = ubk::Kernel::builtin(ubk::KernelShape::triangular);
  const auto bw = ubk::BandwidthSpec::volume(0.1);
  const auto est = [&](std::span<const double> x) -> MaybeReal { return ubk::density_estimate(s, k, bw, x); };
  const auto tgt = [&](std::span<const double> x) -> MaybeReal {
    return ubk::smoothed_targets(model.oracle, k, bw, x).f_bar;
  };
  std::vector<double> grid = ubk::location_grid(-0.5, 0.5, 1, 0.1);
  double prev = ubk::sup_deviation(est, tgt, std::span<const double>(grid)).sup_dev;
  for (int round = 0; round < 3; ++round) {
    std::vector<double> finer;
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
      finer.push_back(grid[i]);
      finer.push_back(0.5 * (grid[i] + grid[i + 1]));
    }
    finer.push_back(grid.back());
    grid = finer;
    const double now = ubk::sup_deviation(est, tgt, std::span<const double>(grid)).sup_dev;
    EXPECT_GE(now, prev);
    prev = now;
  }
}

TEST(LocationGrid, SpacingAndEndpoints)
{
  const auto g = ubk::location_grid(-0.5, 0.5, 1, 0.01);
  EXPECT_EQ(g.front(), -0.5);
  EXPECT_EQ(g.back(), 0.5);
  for (std::size_t i = 1; i < g.size(); ++i)
    EXPECT_LE(g[i] - g[i - 1], 0.01 / 8.0 + 1e-15);
  const auto g2 = ubk::location_grid(-0.5, 0.5, 2, 0.04);
  // axis scale 0.2 gives spacing 0.025 and 41 points per axis
  EXPECT_EQ(g2.size(), 41U * 41U * 2U);
  EXPECT_EQ(ubk::location_grid(0.0, 1.0, 1, 10.0, 17).size(), 17U);
}

TEST(DeviationReport, CsvHeader)
{
  ubk::DeviationReport r;
  ubk::DeviationRow row;
  row.n = 1024;
  row.h = 0.5;
  row.sup_dev = 0.25;
  row.normalized_stat = 2.0;
  r.rows.push_back(row);
  std::ostringstream os;
  r.write_csv(os);
  EXPECT_EQ(os.str(), "n,h,sup_dev,normalized_stat,undefined_count\n1024,0.5,0.25,2,0\n");
}
