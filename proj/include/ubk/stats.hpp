#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace ubk {

//! Type-7 sample quantile (linear interpolation between order statistics).
inline double quantile(std::vector<double> values, double prob)
{
  if (values.empty())
    throw std::invalid_argument("quantile: empty input");
  if (!(prob >= 0.0 && prob <= 1.0))
    throw std::invalid_argument("quantile: probability outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = prob * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

inline double median(std::vector<double> values)
{
  return quantile(std::move(values), 0.5);
}

//! Kendall's tau-a between two equally long sequences.
inline double kendall_tau(std::span<const double> a, std::span<const double> b)
{
  if (a.size() != b.size() || a.size() < 2)
    throw std::invalid_argument("kendall_tau: need two sequences of equal length >= 2");
  long long score = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const double s = (a[j] - a[i]) * (b[j] - b[i]);
      score += s > 0 ? 1 : (s < 0 ? -1 : 0);
    }
  const double pairs = static_cast<double>(a.size() * (a.size() - 1) / 2);
  return static_cast<double>(score) / pairs;
}

struct LinearFit
{
  double slope = 0.0;
  double intercept = 0.0;
  std::optional<double> r_squared; // undefined when y has no variance
};

//! Ordinary least squares of y on x with intercept.
inline LinearFit linear_fit(std::span<const double> x, std::span<const double> y)
{
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("linear_fit: need at least two paired observations");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0)
    throw std::invalid_argument("linear_fit: x has no spread");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (syy > 0.0) {
    double sse = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double e = y[i] - fit.intercept - fit.slope * x[i];
      sse += e * e;
    }
    fit.r_squared = 1.0 - sse / syy;
  }
  return fit;
}

struct TwoFeatureFit
{
  double c1 = 0.0;
  double c2 = 0.0;
  double r_squared = 0.0;
};

//! Least squares y ~ c1 * u + c2 * v without intercept; r^2 is measured
//! against the mean of y.
inline TwoFeatureFit two_feature_fit(std::span<const double> u, std::span<const double> v, std::span<const double> y)
{
  if (u.size() != y.size() || v.size() != y.size() || y.size() < 3)
    throw std::invalid_argument("two_feature_fit: need at least three observations");
  double suu = 0.0, suv = 0.0, svv = 0.0, suy = 0.0, svy = 0.0, my = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    suu += u[i] * u[i];
    suv += u[i] * v[i];
    svv += v[i] * v[i];
    suy += u[i] * y[i];
    svy += v[i] * y[i];
    my += y[i];
  }
  my /= static_cast<double>(y.size());
  const double det = suu * svv - suv * suv;
  if (std::abs(det) <= 1e-14 * suu * svv)
    throw std::invalid_argument("two_feature_fit: features are collinear");
  TwoFeatureFit fit;
  fit.c1 = (suy * svv - svy * suv) / det;
  fit.c2 = (svy * suu - suy * suv) / det;
  double sse = 0.0, sst = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double e = y[i] - fit.c1 * u[i] - fit.c2 * v[i];
    sse += e * e;
    sst += (y[i] - my) * (y[i] - my);
  }
  fit.r_squared = sst > 0.0 ? 1.0 - sse / sst : 0.0;
  return fit;
}

} // namespace ubk
