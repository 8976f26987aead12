#include <algorithm>
#include <bit>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "ubk/empirical_process.hpp"

using ubk::FunctionClassGrid;
using ubk::Kernel;
using ubk::KernelShape;
using ubk::Sample;

namespace {

const Kernel kBox = Kernel::builtin(KernelShape::box);

FunctionClassGrid box_class(std::vector<double> xs, std::vector<double> hs)
{
  return ubk::kernel_class(kBox, xs, hs);
}

FunctionClassGrid from_members(std::vector<ubk::ClassMember> members, double bound)
{
  FunctionClassGrid cls;
  cls.members = std::move(members);
  cls.envelope_bound = bound;
  return cls;
}

Sample uniform01(std::size_t n, std::uint64_t seed)
{
  std::vector<double> xs(n);
  for (std::size_t i = 0; i < n; ++i)
    xs[i] = ubk::CounterRng(seed, 0, i).uniform();
  return Sample(xs);
}

std::vector<ubk::WeightedAtom> atoms_at(std::vector<double> xs)
{
  std::vector<ubk::WeightedAtom> atoms;
  for (double x : xs)
    atoms.push_back({ { x }, 0.0, 1.0 / static_cast<double>(xs.size()) });
  return atoms;
}

//! Smallest subset of members whose closed balls cover the class, by
//! enumerating all subsets of a three-member class.
std::size_t brute_force_cover(const std::vector<std::vector<double>>& values, double radius)
{
  const std::size_t m = values.size();
  auto dist = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t j = 0; j < values[a].size(); ++j)
      s += (values[a][j] - values[b][j]) * (values[a][j] - values[b][j]) / static_cast<double>(values[a].size());
    return std::sqrt(s);
  };
  std::size_t best = m;
  for (unsigned subset = 1; subset < (1U << m); ++subset) {
    bool ok = true;
    for (std::size_t i = 0; i < m && ok; ++i) {
      bool hit = false;
      for (std::size_t c = 0; c < m; ++c)
        hit = hit || (((subset >> c) & 1U) && dist(c, i) <= radius);
      ok = hit;
    }
    if (ok)
      best = std::min<std::size_t>(best, static_cast<std::size_t>(std::popcount(subset)));
  }
  return best;
}

} // namespace

TEST(RademacherSup, SingleMemberSinglePoint)
{
  const Sample s({ 0.2 });
  const auto cls = box_class({ 0.0 }, { 1.0 });
  for (std::uint64_t seed : { 1ULL, 2ULL, 3ULL })
    EXPECT_EQ(ubk::rademacher_sup(s, cls, 17, seed), 1.0);
  const auto tri = ubk::kernel_class(Kernel::builtin(KernelShape::triangular), std::vector<double>{ 0.0 },
                                     std::vector<double>{ 1.0 });
  EXPECT_DOUBLE_EQ(ubk::rademacher_sup(s, tri, 5, 9), 2.0 * (1.0 - 2.0 * 0.2));
}

TEST(RademacherSup, SymmetricClassMatchesHalf)
{
  const Sample s = uniform01(200, 4);
  const ubk::ClassMember g = [](std::span<const double> u, double) { return std::sin(7.0 * u[0]); };
  const ubk::ClassMember neg = [g](std::span<const double> u, double v) { return -g(u, v); };
  EXPECT_EQ(ubk::rademacher_sup(s, from_members({ g }, 1.0), 64, 5),
            ubk::rademacher_sup(s, from_members({ g, neg }, 1.0), 64, 5));
}

TEST(RademacherSup, BoxMeanAbsoluteValue)
{
  // n = 1: the estimate equals |g(X_1)|, a Bernoulli(0.2) draw
  const auto cls = box_class({ 0.5 }, { 0.2 });
  const std::size_t reps = 20000;
  double total = 0.0;
  for (std::size_t r = 0; r < reps; ++r)
    total += ubk::rademacher_sup(uniform01(1, 1000 + r), cls, 1, r);
  const double mean = total / static_cast<double>(reps);
  EXPECT_NEAR(mean, 0.2, 3.0 * std::sqrt(0.2 * 0.8 / static_cast<double>(reps)));
}

TEST(RademacherSup, NonnegativeAndMonotoneInClass)
{
  const Sample s = uniform01(500, 6);
  std::vector<double> xs, hs{ 0.05, 0.1, 0.2 };
  for (int i = 0; i <= 10; ++i)
    xs.push_back(i / 10.0);
  const auto small = box_class({ 0.3, 0.7 }, { 0.1 });
  const auto large = box_class(xs, hs);
  const double a = ubk::rademacher_sup(s, small, 32, 8);
  const double b = ubk::rademacher_sup(s, large, 32, 8);
  EXPECT_GE(a, 0.0);
  EXPECT_GE(b, a);
}

TEST(RademacherSup, ExactLinearScaling)
{
  const Sample s = uniform01(400, 12);
  const auto cls = ubk::kernel_class(Kernel::builtin(KernelShape::epanechnikov), std::vector<double>{ 0.2, 0.5, 0.8 },
                                     std::vector<double>{ 0.05, 0.2 });
  const double base = ubk::rademacher_sup(s, cls, 40, 3);
  for (double lambda : { 2.0, 0.5 })
    EXPECT_EQ(ubk::rademacher_sup(s, ubk::scaled(cls, lambda), 40, 3), lambda * base);
}

TEST(RademacherSup, WindowedAndGenericPathsAgree)
{
  const Sample s = uniform01(300, 14);
  auto cls = ubk::kernel_class(Kernel::builtin(KernelShape::quartic), std::vector<double>{ 0.1, 0.45, 0.9 },
                               std::vector<double>{ 0.03, 0.3 });
  const double windowed = ubk::rademacher_sup(s, cls, 20, 1);
  cls.kernel.reset();
  EXPECT_NEAR(ubk::rademacher_sup(s, cls, 20, 1), windowed, 1e-12);
}

TEST(VarianceEnvelope, ConstantClass)
{
  const auto cls = from_members({ [](std::span<const double>, double) { return 1.0; } }, 1.0);
  const auto v = ubk::variance_envelope(uniform01(10, 1), cls);
  EXPECT_EQ(v.sigma0_sq, 1.0);
  EXPECT_EQ(v.U, 1.0);
  EXPECT_EQ(v.beta_sq, 1.0);
}

TEST(VarianceEnvelope, BoxSecondMoment)
{
  const std::size_t n = 20000;
  const auto v = ubk::variance_envelope(uniform01(n, 2), box_class({ 0.5 }, { 0.2 }));
  EXPECT_NEAR(v.sigma0_sq, 0.2, 3.0 * std::sqrt(0.2 * 0.8 / static_cast<double>(n)));
  EXPECT_EQ(v.U, 1.0);
}

TEST(VarianceEnvelope, EmptySupportMemberContributesNothing)
{
  const auto s = uniform01(100, 3);
  const auto far = ubk::variance_envelope(s, box_class({ 100.0 }, { 0.2 }));
  EXPECT_EQ(far.sigma0_sq, 0.0);
  EXPECT_EQ(far.U, 0.0);
  const auto near = ubk::variance_envelope(s, box_class({ 0.5 }, { 0.2 }));
  const auto both = ubk::variance_envelope(s, box_class({ 0.5, 100.0 }, { 0.2 }));
  EXPECT_EQ(both.sigma0_sq, near.sigma0_sq);
  EXPECT_EQ(both.U, near.U);
  EXPECT_EQ(ubk::rademacher_sup(s, box_class({ 100.0 }, { 0.2 }), 8, 1), 0.0);
}

TEST(CoveringNumber, MatchesBruteForceOnThreeTranslates)
{
  const std::vector<double> q{ 0.0, 0.5, 1.0 };
  const auto atoms = atoms_at(q);
  for (const auto& centers : { std::vector<double>{ 0.0, 0.3, 0.6 }, std::vector<double>{ 0.1, 0.5, 0.9 },
                               std::vector<double>{ 0.0, 0.25, 1.0 } })
    for (double h : { 0.3, 0.6, 1.2 }) {
      const auto cls = box_class(centers, { h });
      std::vector<std::vector<double>> values;
      for (double c : centers) {
        std::vector<double> row;
        for (double x : q)
          row.push_back(std::abs(x - c) <= h / 2.0 ? 1.0 : 0.0);
        values.push_back(row);
      }
      for (int i = 1; i <= 40; ++i) {
        const double eps = i / 40.0;
        EXPECT_EQ(ubk::covering_number(cls, atoms, eps), brute_force_cover(values, eps));
      }
    }
}

TEST(CoveringNumber, DuplicatesDoNotCount)
{
  const auto atoms = atoms_at({ 0.0, 0.2, 0.4, 0.6, 0.8, 1.0 });
  const auto one = box_class({ 0.3 }, { 0.4 });
  const auto two = box_class({ 0.3, 0.3 }, { 0.4 });
  const auto mixed = box_class({ 0.1, 0.6 }, { 0.4 });
  const auto mixed_dup = box_class({ 0.1, 0.6, 0.1, 0.6 }, { 0.4 });
  for (int i = 1; i <= 20; ++i) {
    const double eps = i / 20.0;
    EXPECT_EQ(ubk::covering_number(one, atoms, eps), ubk::covering_number(two, atoms, eps));
    EXPECT_EQ(ubk::covering_number(mixed, atoms, eps), ubk::covering_number(mixed_dup, atoms, eps));
  }
}

TEST(CoveringNumber, OneBallBeyondDiameter)
{
  const auto atoms = ubk::uniform_atoms(uniform01(64, 5));
  std::vector<double> xs;
  for (int i = 0; i <= 20; ++i)
    xs.push_back(i / 20.0);
  const auto cls = box_class(xs, { 0.05, 0.1, 0.2 });
  const double diam = ubk::class_diameter(cls, atoms);
  ASSERT_GT(diam, 0.0);
  const double eps = diam / cls.envelope_bound;
  EXPECT_EQ(ubk::covering_number(cls, atoms, eps), 1U);
  EXPECT_EQ(ubk::covering_number(cls, atoms, 2.0 * eps), 1U);
  EXPECT_GT(ubk::covering_number(cls, atoms, 0.5 * eps), 1U);
}

TEST(CoveringNumber, NonincreasingInEpsilon)
{
  const auto atoms = ubk::uniform_atoms(uniform01(128, 6));
  std::vector<double> xs;
  for (int i = 0; i <= 32; ++i)
    xs.push_back(i / 32.0);
  const auto cls = ubk::kernel_class(Kernel::builtin(KernelShape::epanechnikov), xs, std::vector<double>{ 0.02, 0.1, 0.4 });
  std::vector<double> eps;
  for (int i = 1; i <= 60; ++i)
    eps.push_back(i / 60.0);
  const auto counts = ubk::covering_curve(cls, atoms, eps);
  for (std::size_t i = 1; i < counts.size(); ++i)
    EXPECT_LE(counts[i], counts[i - 1]);
  for (std::size_t i = 0; i < eps.size(); i += 7)
    EXPECT_EQ(counts[i], ubk::covering_number(cls, atoms, eps[i]));
}

TEST(CoveringNumber, RejectsBadInput)
{
  const auto atoms = atoms_at({ 0.0, 1.0 });
  const auto cls = box_class({ 0.5 }, { 0.2 });
  EXPECT_THROW(ubk::covering_number(cls, atoms, 0.0), std::invalid_argument);
  EXPECT_THROW(ubk::covering_number(cls, atoms, -1.0), std::invalid_argument);
  auto bad = atoms;
  bad[0].weight = 0.9;
  EXPECT_THROW(ubk::covering_number(cls, bad, 0.5), std::invalid_argument);
}

TEST(EntropyFit, ExactPowerLaw)
{
  const std::vector<std::pair<double, std::size_t>> curve{ { 0.5, 4 }, { 0.25, 8 }, { 0.125, 16 }, { 0.0625, 32 } };
  const auto fit = ubk::entropy_fit(curve);
  EXPECT_NEAR(fit.nu_hat, 1.0, 1e-12);
  EXPECT_NEAR(fit.C_hat, 2.0, 1e-12);
  ASSERT_TRUE(fit.r_squared.has_value());
  EXPECT_NEAR(*fit.r_squared, 1.0, 1e-12);
}

TEST(EntropyFit, FlatCurveIsDegenerate)
{
  const std::vector<std::pair<double, std::size_t>> curve{ { 0.5, 1 }, { 0.25, 1 }, { 0.125, 1 }, { 0.0625, 1 } };
  const auto fit = ubk::entropy_fit(curve);
  EXPECT_EQ(fit.nu_hat, 0.0);
  EXPECT_FALSE(fit.r_squared.has_value());
}

TEST(ComplexityShapeFit, RecoversExactForm)
{
  std::vector<ubk::ComplexityPoint> pts;
  for (std::size_t n : { 1024UL, 4096UL })
    for (double h : { 0.01, 0.02, 0.04, 0.08, 0.16, 0.5 }) {
      const double nd = static_cast<double>(n);
      const double r = 0.7 * std::sqrt(nd * h * std::log(std::max(1.0 / h, std::exp(1.0)))) + 0.3 * std::log(nd);
      pts.push_back({ n, h, r });
    }
  const auto fit = ubk::complexity_shape_fit(pts);
  EXPECT_NEAR(fit.c1, 0.7, 1e-10);
  EXPECT_NEAR(fit.c2, 0.3, 1e-10);
  EXPECT_NEAR(fit.r_squared, 1.0, 1e-12);
}
