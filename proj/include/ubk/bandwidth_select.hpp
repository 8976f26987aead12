#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "estimators.hpp"
#include "kernels.hpp"
#include "quadrature.hpp"
#include "sample.hpp"

namespace ubk {

//! Admissible bandwidth range [a_n, b_n] for data-driven selectors.
struct BandwidthRange
{
  double a_n = 0.0;
  double b_n = 0.0;
  double gamma = 1.0;
  double c = 0.0;

  static BandwidthRange make(double a_n, double b_n, double gamma = 1.0, double c = 0.0)
  {
    if (!(a_n > 0.0 && a_n < b_n && b_n <= 1.0))
      throw std::invalid_argument("BandwidthRange: need 0 < a_n < b_n <= 1");
    if (!(gamma > 0.0 && gamma <= 1.0))
      throw std::invalid_argument("BandwidthRange: gamma must lie in (0, 1]");
    return { a_n, b_n, gamma, c };
  }

  //! a_n = c (log n / n)^gamma; gamma = 1 for bounded responses and
  //! 1 - 2/p under a p-th moment condition.
  static BandwidthRange theory(std::size_t n, double c, double gamma, double b_n)
  {
    const double nd = static_cast<double>(n);
    return make(c * std::pow(std::log(nd) / nd, gamma), b_n, gamma, c);
  }

  bool contains(double h) const { return h >= a_n && h <= b_n; }
};

struct ClampResult
{
  double h = 0.0;
  bool clamped = false;
};

inline ClampResult clamp_bandwidth(double h, const BandwidthRange& range)
{
  const double c = std::min(std::max(h, range.a_n), range.b_n);
  return { c, c != h };
}

namespace detail {

//! The autoconvolution t -> integral K(u) K(u - t) du of a one-dimensional
//! kernel, tabulated once as a piecewise Chebyshev interpolant. Pieces end at
//! differences of kernel breakpoints, so polynomial kernels are reproduced
//! up to rounding.
class KernelAutoconvolution
{
public:
  explicit KernelAutoconvolution(const Kernel& kernel)
  {
    const double r = kernel.support_radius();
    const auto bps = kernel.breakpoints();
    std::vector<double> ends{ 0.0, 2.0 * r };
    for (double a : bps)
      for (double b : bps)
        if (a - b > 0.0 && a - b < 2.0 * r)
          ends.push_back(a - b);
    std::sort(ends.begin(), ends.end());
    ends.erase(std::unique(ends.begin(), ends.end()), ends.end());
    reach_ = 2.0 * r;

    std::array<double, kNodes> values{};
    std::vector<double> cuts;
    for (std::size_t p = 0; p + 1 < ends.size(); ++p) {
      Piece piece{ ends[p], ends[p + 1], {}, kNodes };
      const double mid = 0.5 * (piece.lo + piece.hi);
      const double half = 0.5 * (piece.hi - piece.lo);
      for (std::size_t k = 0; k < kNodes; ++k) {
        const double t = mid + half * std::cos(node_angle(k));
        cuts.assign(bps.begin(), bps.end());
        for (double b : bps)
          cuts.push_back(b + t);
        const Rule1d rule = composite_gauss(-r, r, cuts, 64);
        double v = 0.0;
        for (std::size_t q = 0; q < rule.size(); ++q)
          v += rule.weights[q] * kernel.profile(rule.nodes[q]) * kernel.profile(rule.nodes[q] - t);
        values[k] = v;
      }
      // Chebyshev coefficients from values at the first-kind nodes
      for (std::size_t j = 0; j < kNodes; ++j) {
        double c = 0.0;
        for (std::size_t k = 0; k < kNodes; ++k)
          c += values[k] * std::cos(static_cast<double>(j) * node_angle(k));
        piece.coeffs[j] = (j == 0 ? 1.0 : 2.0) * c / static_cast<double>(kNodes);
      }
      double scale = 0.0;
      for (double c : piece.coeffs)
        scale = std::max(scale, std::abs(c));
      piece.terms = kNodes;
      while (piece.terms > 1 && std::abs(piece.coeffs[piece.terms - 1]) <= 1e-13 * scale)
        --piece.terms;
      pieces_.push_back(piece);
    }
  }

  double reach() const { return reach_; }

  double operator()(double t) const
  {
    t = std::abs(t);
    if (t >= reach_)
      return 0.0;
    std::size_t p = 0;
    while (p + 1 < pieces_.size() && t > pieces_[p].hi)
      ++p;
    const Piece& piece = pieces_[p];
    const double s = (2.0 * t - piece.lo - piece.hi) / (piece.hi - piece.lo);
    double b1 = 0.0, b2 = 0.0;
    for (std::size_t j = piece.terms - 1; j > 0; --j) {
      const double b0 = 2.0 * s * b1 - b2 + piece.coeffs[j];
      b2 = b1;
      b1 = b0;
    }
    return piece.coeffs[0] + s * b1 - b2;
  }

private:
  static constexpr std::size_t kNodes = 16;

  struct Piece
  {
    double lo = 0.0;
    double hi = 0.0;
    std::array<double, kNodes> coeffs{};
    std::size_t terms = kNodes;
  };

  static double node_angle(std::size_t k)
  {
    return std::numbers::pi * (2.0 * static_cast<double>(k) + 1.0) / (2.0 * kNodes);
  }

  std::vector<Piece> pieces_;
  double reach_ = 0.0;
};

//! Integral of fhat^2 in one dimension as (n^2 h)^{-1} sum_{i,j} (K*K)((X_i - X_j)/h).
inline double integrated_square_1d(const SortedSample1d& sorted, const KernelAutoconvolution& conv, double h)
{
  const auto xs = sorted.xs();
  const std::size_t n = xs.size();
  const double span = conv.reach() * h;
  double off = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n && xs[j] - xs[i] < span; ++j)
      off += conv((xs[j] - xs[i]) / h);
  const double nd = static_cast<double>(n);
  return (nd * conv(0.0) + 2.0 * off) / (nd * nd * h);
}

//! Integral of fhat^2 over the sample hull widened by the largest kernel reach.
inline double integrated_square(const Sample& sample, const Kernel& kernel, double h, double reach)
{
  const std::size_t d = sample.dim();
  const auto bw = BandwidthSpec::volume(h);
  if (d == 1)
    return integrated_square_1d(SortedSample1d(sample), KernelAutoconvolution(kernel), h);
  std::vector<Rule1d> rules;
  const double scale = volume_scale(h, d);
  for (std::size_t a = 0; a < d; ++a) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = 0; i < sample.size(); ++i) {
      lo = std::min(lo, sample.point(i)[a]);
      hi = std::max(hi, sample.point(i)[a]);
    }
    const auto nodes = static_cast<std::size_t>(std::max(64.0, 16.0 * (hi - lo + 2.0 * reach) / scale));
    rules.push_back(composite_gauss(lo - reach, hi + reach, {}, nodes));
  }
  return integrate_tensor(std::span<const Rule1d>(rules), [&](std::span<const double> x) {
    const double v = density_estimate(sample, kernel, bw, x);
    return v * v;
  });
}

//! sum_i fhat^{(-i)}(X_i) for the leave-one-out estimates.
inline double leave_one_out_sum(const Sample& sample, const Kernel& kernel, double h)
{
  const std::size_t n = sample.size();
  const double self = [&] {
    std::vector<double> zero(sample.dim(), 0.0);
    return kernel(zero);
  }();
  const double norm = 1.0 / (static_cast<double>(n - 1) * h);
  double total = 0.0;
  if (sample.dim() == 1) {
    const SortedSample1d sorted(sample);
    for (double xi : sorted.xs())
      total += norm * (sorted.kernel_sum(kernel, h, xi) - self);
    return total;
  }
  const auto bw = BandwidthSpec::volume(h);
  std::vector<double> pts(sample.flat().begin(), sample.flat().end());
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i)
        s += scaled_evaluate(kernel, sample.point(i), sample.point(j), bw);
    total += norm * s;
  }
  return total;
}

} // namespace detail

//! Least-squares cross-validation scores integral(fhat^2) - (2/n) sum fhat^{(-i)}(X_i).
inline std::vector<double> lscv_scores(const Sample& sample, const Kernel& kernel, std::span<const double> h_grid)
{
  if (sample.size() < 3)
    throw std::invalid_argument("lscv: need at least three points");
  if (h_grid.empty())
    throw std::invalid_argument("lscv: empty bandwidth grid");
  if (!std::is_sorted(h_grid.begin(), h_grid.end()))
    throw std::invalid_argument("lscv: bandwidth grid must be sorted");
  const double reach = kernel.support_radius() * volume_scale(h_grid.back(), sample.dim());
  std::vector<double> scores;
  const double n = static_cast<double>(sample.size());
  std::optional<SortedSample1d> sorted;
  std::optional<detail::KernelAutoconvolution> conv;
  if (sample.dim() == 1) {
    sorted.emplace(sample);
    conv.emplace(kernel);
  }
  for (double h : h_grid) {
    if (!(h > 0.0))
      throw std::invalid_argument("lscv: bandwidths must be positive");
    const double square = sorted ? detail::integrated_square_1d(*sorted, *conv, h)
                                 : detail::integrated_square(sample, kernel, h, reach);
    scores.push_back(square -
                     2.0 / n * detail::leave_one_out_sum(sample, kernel, h));
  }
  return scores;
}

//! Grid minimiser of the LSCV score; ties go to the smaller bandwidth.
inline double lscv_bandwidth(const Sample& sample, const Kernel& kernel, std::span<const double> h_grid)
{
  const auto scores = lscv_scores(sample, kernel, h_grid);
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] < scores[best])
      best = i;
  return h_grid[best];
}

inline constexpr double kPluginFloor = 0.05;

//! n^{-1/5} * max(pilot density, floor)^{-1/5}.
inline double plugin_from_density(std::size_t n, double pilot_density)
{
  return std::pow(static_cast<double>(n), -0.2) * std::pow(std::max(pilot_density, kPluginFloor), -0.2);
}

//! Local plug-in bandwidth h_n C_hat(x) with h_n = n^{-1/5} and
//! C_hat(x) = max(fhat_{pilot}(x), 0.05)^{-1/5}.
inline double local_plugin_bandwidth(const Sample& sample, const Kernel& kernel, std::span<const double> x, double pilot_h)
{
  if (!(pilot_h > 0.0))
    throw std::invalid_argument("local_plugin_bandwidth: pilot bandwidth must be positive");
  return plugin_from_density(sample.size(), density_estimate(sample, kernel, BandwidthSpec::volume(pilot_h), x));
}

enum class EstimatorMode
{
  density,
  regression
};

using BandwidthFn = std::function<double(std::span<const double>)>;

//! Density estimate at x with bandwidth clamp(h_of_x(x)) in [a_n, b_n].
inline MaybeReal variable_bandwidth_estimate(const Sample& sample,
                                             const Kernel& kernel,
                                             const BandwidthFn& h_of_x,
                                             const BandwidthRange& range,
                                             std::span<const double> x)
{
  const auto h = clamp_bandwidth(h_of_x(x), range).h;
  return density_estimate(sample, kernel, BandwidthSpec::volume(h), x);
}

inline MaybeReal variable_bandwidth_estimate(const PairedSample& ps,
                                             const Kernel& kernel,
                                             const BandwidthFn& h_of_x,
                                             const BandwidthRange& range,
                                             std::span<const double> x,
                                             EstimatorMode mode)
{
  if (mode == EstimatorMode::density)
    return variable_bandwidth_estimate(ps.base(), kernel, h_of_x, range, x);
  const auto h = clamp_bandwidth(h_of_x(x), range).h;
  return nw_estimate(ps, kernel, BandwidthSpec::volume(h), x);
}

} // namespace ubk
