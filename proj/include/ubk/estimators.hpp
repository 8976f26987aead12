#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "exact_sum.hpp"
#include "kernels.hpp"
#include "models.hpp"
#include "quadrature.hpp"
#include "sample.hpp"

namespace ubk {

//! A real value or the undefined marker (empty), produced by ratio
//! estimators whose kernel denominator is exactly zero.
using MaybeReal = std::optional<double>;

namespace detail {

inline void check_dims(const Kernel& kernel, std::size_t sample_dim, std::size_t point_dim)
{
  if (kernel.dim() != sample_dim || point_dim != sample_dim)
    throw std::invalid_argument("estimator: dimensions of kernel, sample and point disagree");
}

//! 1 / (n h), shared so that algebraically equal estimators round identically.
inline double inverse_nh(std::size_t n, double h)
{
  return 1.0 / (static_cast<double>(n) * h);
}

} // namespace detail

//! Kernel density estimate (nh)^{-1} sum_i K((x - X_i)/h^{1/d}).
//! The kernel sum is accumulated exactly, so the estimate does not depend
//! on the order of the sample.
inline double density_estimate(const Sample& sample,
                               const Kernel& kernel,
                               const BandwidthSpec& bw,
                               std::span<const double> x)
{
  detail::check_dims(kernel, sample.dim(), x.size());
  ExactSum total;
  for (std::size_t i = 0; i < sample.size(); ++i)
    total += scaled_evaluate(kernel, x, sample.point(i), bw);
  return detail::inverse_nh(sample.size(), bw.h()) * total.value();
}

//! Nadaraya-Watson ratio sum Y_i K_i / sum K_i.
inline MaybeReal nw_estimate(const PairedSample& ps,
                             const Kernel& kernel,
                             const BandwidthSpec& bw,
                             std::span<const double> x)
{
  detail::check_dims(kernel, ps.dim(), x.size());
  ExactSum num, den;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const double k = scaled_evaluate(kernel, x, ps.base().point(i), bw);
    num += ps.response(i) * k;
    den += k;
  }
  const double d = den.value();
  if (d == 0.0)
    return std::nullopt;
  return num.value() / d;
}

//! Conditional empirical distribution function at (t | z).
inline MaybeReal cond_ecdf(const PairedSample& ps,
                           const Kernel& kernel,
                           const BandwidthSpec& bw,
                           double t,
                           std::span<const double> z)
{
  detail::check_dims(kernel, ps.dim(), z.size());
  ExactSum num, den;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const double k = scaled_evaluate(kernel, z, ps.base().point(i), bw);
    if (ps.response(i) <= t)
      num += k;
    den += k;
  }
  const double d = den.value();
  if (d == 0.0)
    return std::nullopt;
  return num.value() / d;
}

//! One member phi of a finite class Phi together with its weights.
//! `p` is the moment order of the unbounded regime; infinite p means the
//! bounded regime with |phi| <= M.
struct WeightedProcessSpec
{
  std::function<double(double)> phi;
  std::function<double(double)> envelope; // F >= |phi|
  PointFn c_phi;
  PointFn d_phi;
  double p = std::numeric_limits<double>::infinity();
  double M = 0.0;
};

//! Exact partial sums behind omega_{phi,n,h}(x):
//! sum phi(Y_i) K_i and sum K_i over the selected indices.
struct WeightedSums
{
  ExactSum phi_kernel;
  ExactSum kernel;

  friend bool operator==(const WeightedSums& a, const WeightedSums& b)
  {
    return a.phi_kernel == b.phi_kernel && a.kernel == b.kernel;
  }

  friend WeightedSums operator+(WeightedSums a, const WeightedSums& b)
  {
    a.phi_kernel += b.phi_kernel;
    a.kernel += b.kernel;
    return a;
  }
};

//! Partial sums over the indices where `mask` is true (all indices when
//! `mask` is empty).
inline WeightedSums weighted_sums(const PairedSample& ps,
                                  const WeightedProcessSpec& spec,
                                  const Kernel& kernel,
                                  const BandwidthSpec& bw,
                                  std::span<const double> x,
                                  const std::vector<bool>& mask = {})
{
  detail::check_dims(kernel, ps.dim(), x.size());
  if (!mask.empty() && mask.size() != ps.size())
    throw std::invalid_argument("weighted_sums: mask length differs from sample size");
  WeightedSums s;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (!mask.empty() && !mask[i])
      continue;
    const double k = scaled_evaluate(kernel, x, ps.base().point(i), bw);
    if (k == 0.0)
      continue;
    s.phi_kernel += spec.phi(ps.response(i)) * k;
    s.kernel += k;
  }
  return s;
}

//! omega = c_phi(x) sum phi(Y_i) K_i + d_phi(x) sum K_i, un-normalised.
//! With d_phi = 0 this is eta_{phi,n,h}(x).
inline double combine(const WeightedSums& s,
                      const WeightedProcessSpec& spec,
                      std::span<const double> x)
{
  const double c = spec.c_phi ? spec.c_phi(x) : 1.0;
  const double d = spec.d_phi ? spec.d_phi(x) : 0.0;
  double out = c * s.phi_kernel.value();
  if (d != 0.0)
    out += d * s.kernel.value();
  return out;
}

inline double weighted_process(const PairedSample& ps,
                               const WeightedProcessSpec& spec,
                               const Kernel& kernel,
                               const BandwidthSpec& bw,
                               std::span<const double> x,
                               const std::vector<bool>& mask = {})
{
  return combine(weighted_sums(ps, spec, kernel, bw, x, mask), spec, x);
}

//! Complementary index masks splitting responses at the envelope threshold
//! (n_k / k)^{1/p} with n_k = 2^k.
struct TruncationMasks
{
  std::vector<bool> low;  // F(Y_i) <  threshold
  std::vector<bool> high; // F(Y_i) >= threshold
  double threshold = 0.0;
};

inline double truncation_threshold(unsigned k, double p)
{
  if (k == 0)
    throw std::invalid_argument("truncation_threshold: k must be positive");
  if (!(p > 2.0) || !std::isfinite(p))
    throw std::invalid_argument("truncation_threshold: moment order must be finite and > 2");
  return std::pow(std::ldexp(1.0, static_cast<int>(k)) / static_cast<double>(k), 1.0 / p);
}

inline TruncationMasks truncation_split(const PairedSample& ps, const WeightedProcessSpec& spec, unsigned k)
{
  TruncationMasks out;
  out.threshold = truncation_threshold(k, spec.p);
  if (!spec.envelope)
    throw std::invalid_argument("truncation_split: spec has no envelope function");
  out.low.resize(ps.size());
  out.high.resize(ps.size());
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const bool small = spec.envelope(ps.response(i)) < out.threshold;
    out.low[i] = small;
    out.high[i] = !small;
  }
  return out;
}

//! Deterministic kernel-smoothing integrals at one location x:
//! integral g(u) K((x - u)/h^{1/d}) du / h for integrands g built from the
//! oracle. After the substitution u = x - s v the integral runs over the
//! kernel support; each axis rule is split at kernel kinks and at the
//! images of the oracle's breakpoints.
class Smoother
{
public:
  static constexpr std::size_t kNodes1d = 2048;
  static constexpr std::size_t kNodesMultid = 512;

  Smoother(const TruthOracle& oracle,
           const Kernel& kernel,
           const BandwidthSpec& bw,
           std::span<const double> x,
           std::size_t nodes_per_axis = 0)
    : oracle_(&oracle)
    , dim_(kernel.dim())
  {
    if (oracle.dim != dim_ || x.size() != dim_)
      throw std::invalid_argument("Smoother: dimension mismatch");
    if (nodes_per_axis == 0)
      nodes_per_axis = dim_ == 1 ? kNodes1d : kNodesMultid;
    const double r = kernel.support_radius();
    std::vector<Rule1d> rules;
    std::vector<double> scales(dim_);
    for (std::size_t a = 0; a < dim_; ++a) {
      scales[a] = bw.axis_scale(a, dim_);
      std::vector<double> cuts(kernel.breakpoints().begin(), kernel.breakpoints().end());
      for (double b : oracle.breakpoints)
        cuts.push_back((x[a] - b) / scales[a]);
      rules.push_back(composite_gauss(-r, r, cuts, nodes_per_axis));
    }
    // flatten the tensor grid, keeping only nodes where the kernel is nonzero
    std::vector<std::size_t> idx(dim_, 0);
    std::vector<double> v(dim_);
    while (true) {
      double w = 1.0;
      for (std::size_t a = 0; a < dim_; ++a) {
        v[a] = rules[a].nodes[idx[a]];
        w *= rules[a].weights[idx[a]];
      }
      const double kw = w * kernel(v);
      if (kw != 0.0) {
        weights_.push_back(kw);
        for (std::size_t a = 0; a < dim_; ++a)
          points_.push_back(x[a] - scales[a] * v[a]);
      }
      std::size_t a = 0;
      while (a < dim_ && ++idx[a] == rules[a].size()) {
        idx[a] = 0;
        ++a;
      }
      if (a == dim_)
        break;
    }
    f_values_.resize(weights_.size());
    for (std::size_t j = 0; j < weights_.size(); ++j)
      f_values_[j] = oracle.f(point(j));
  }

  //! integral of g(u) f(u) K(v) dv
  template <class G>
  double integrate_weighted(G&& g) const
  {
    double total = 0.0;
    for (std::size_t j = 0; j < weights_.size(); ++j)
      if (f_values_[j] != 0.0)
        total += weights_[j] * f_values_[j] * g(point(j));
    return total;
  }

  //! integral of g(u) K(v) dv
  template <class G>
  double integrate(G&& g) const
  {
    double total = 0.0;
    for (std::size_t j = 0; j < weights_.size(); ++j)
      total += weights_[j] * g(point(j));
    return total;
  }

  //! f_bar(x, h) = (f * K_h)(x)
  double f_bar() const
  {
    double total = 0.0;
    for (std::size_t j = 0; j < weights_.size(); ++j)
      total += weights_[j] * f_values_[j];
    return total;
  }

  double r_bar() const
  {
    if (!oracle_->m)
      throw std::invalid_argument("Smoother: oracle has no regression function");
    return integrate_weighted([this](std::span<const double> u) { return oracle_->m(u); });
  }

  //! E[K 1{Y <= t}] / h
  double cond_numerator(double t) const
  {
    if (!oracle_->cond_cdf)
      throw std::invalid_argument("Smoother: oracle has no conditional CDF");
    return integrate_weighted([this, t](std::span<const double> u) { return oracle_->cond_cdf(t, u); });
  }

  std::size_t node_count() const { return weights_.size(); }

private:
  std::span<const double> point(std::size_t j) const
  {
    return std::span<const double>(points_).subspan(j * dim_, dim_);
  }

  const TruthOracle* oracle_;
  std::size_t dim_;
  std::vector<double> weights_;
  std::vector<double> points_;
  std::vector<double> f_values_;
};

struct SmoothedTargets
{
  double f_bar = 0.0;
  MaybeReal r_bar;  // present when the oracle has m
  MaybeReal m_bar;  // r_bar / f_bar, undefined when f_bar = 0
  MaybeReal F_cond; // F_{n,h}(t|x), when t is given and the oracle has F(t|.)
};

//! Smoothed targets f_bar(x,h), r_bar(x,h) and F_{n,h}(t|x), the centerings
//! of the uniform-in-bandwidth statistics.
inline SmoothedTargets smoothed_targets(const TruthOracle& oracle,
                                        const Kernel& kernel,
                                        const BandwidthSpec& bw,
                                        std::span<const double> x,
                                        std::optional<double> t = std::nullopt)
{
  Smoother s(oracle, kernel, bw, x);
  SmoothedTargets out;
  out.f_bar = s.f_bar();
  if (oracle.m) {
    out.r_bar = s.r_bar();
    if (out.f_bar != 0.0)
      out.m_bar = *out.r_bar / out.f_bar;
  }
  if (t && oracle.cond_cdf && out.f_bar != 0.0)
    out.F_cond = s.cond_numerator(*t) / out.f_bar;
  return out;
}

//! One-dimensional sample sorted by (x, y) for windowed evaluation.
//!
//! Only points with |x - X_i| <= r h can contribute, so each evaluation
//! touches the kernel window instead of the whole sample. Sums run in
//! sorted order, which makes results independent of the input order.
class SortedSample1d
{
public:
  explicit SortedSample1d(const Sample& sample)
  {
    if (sample.dim() != 1)
      throw std::invalid_argument("SortedSample1d: sample must be one-dimensional");
    xs_.assign(sample.flat().begin(), sample.flat().end());
    std::sort(xs_.begin(), xs_.end());
  }

  explicit SortedSample1d(const PairedSample& ps)
  {
    if (ps.dim() != 1)
      throw std::invalid_argument("SortedSample1d: sample must be one-dimensional");
    std::vector<std::pair<double, double>> pairs(ps.size());
    for (std::size_t i = 0; i < ps.size(); ++i)
      pairs[i] = { ps.base().flat()[i], ps.response(i) };
    std::sort(pairs.begin(), pairs.end());
    xs_.resize(pairs.size());
    ys_.resize(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      xs_[i] = pairs[i].first;
      ys_[i] = pairs[i].second;
    }
  }

  std::size_t size() const { return xs_.size(); }
  std::span<const double> xs() const { return xs_; }
  std::span<const double> ys() const { return ys_; }
  bool has_responses() const { return !ys_.empty(); }

  //! Index range [first, last) covering every point the kernel can reach.
  std::pair<std::size_t, std::size_t> window(const Kernel& kernel, double h, double x) const
  {
    const double reach = kernel.support_radius() * h * (1.0 + 1e-12) + 1e-300;
    const auto lo = std::lower_bound(xs_.begin(), xs_.end(), x - reach);
    const auto hi = std::upper_bound(lo, xs_.end(), x + reach);
    return { static_cast<std::size_t>(lo - xs_.begin()), static_cast<std::size_t>(hi - xs_.begin()) };
  }

  double kernel_sum(const Kernel& kernel, double h, double x) const
  {
    const auto [first, last] = window(kernel, h, x);
    double s = 0.0;
    for (std::size_t i = first; i < last; ++i)
      s += kernel.profile((x - xs_[i]) / h);
    return s;
  }

  double density(const Kernel& kernel, double h, double x) const
  {
    return detail::inverse_nh(xs_.size(), h) * kernel_sum(kernel, h, x);
  }

  MaybeReal nw(const Kernel& kernel, double h, double x) const
  {
    const auto [first, last] = window(kernel, h, x);
    double num = 0.0, den = 0.0;
    for (std::size_t i = first; i < last; ++i) {
      const double k = kernel.profile((x - xs_[i]) / h);
      num += ys_[i] * k;
      den += k;
    }
    if (den == 0.0)
      return std::nullopt;
    return num / den;
  }

  //! Conditional ECDF at z for every t in `ts` (sorted ascending).
  std::vector<MaybeReal> cond_ecdf(const Kernel& kernel, double h, double z, std::span<const double> ts) const
  {
    const auto [first, last] = window(kernel, h, z);
    std::vector<std::pair<double, double>> yk;
    yk.reserve(last - first);
    double den = 0.0;
    for (std::size_t i = first; i < last; ++i) {
      const double k = kernel.profile((z - xs_[i]) / h);
      if (k != 0.0)
        yk.emplace_back(ys_[i], k);
      den += k;
    }
    std::vector<MaybeReal> out(ts.size());
    if (den == 0.0)
      return out;
    std::sort(yk.begin(), yk.end());
    double cum = 0.0;
    std::size_t j = 0;
    for (std::size_t q = 0; q < ts.size(); ++q) {
      while (j < yk.size() && yk[j].first <= ts[q])
        cum += yk[j++].second;
      out[q] = cum / den;
    }
    return out;
  }

private:
  std::vector<double> xs_;
  std::vector<double> ys_;
};

} // namespace ubk
