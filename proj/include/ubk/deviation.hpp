#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "estimators.hpp"
#include "kernels.hpp"
#include "models.hpp"
#include "stats.hpp"

namespace ubk {

//! The requested bandwidth range holds no dyadic block.
class RangeEmptyError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

//! Every grid point was undefined, so no deviation can be reported.
class DegenerateReportError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

//! sqrt(n h / max(log(1/h), log log n)), natural logs.
inline double normalizer(std::size_t n, double h)
{
  if (n < 16)
    throw std::invalid_argument("normalizer: n must be at least 16");
  if (!(h > 0.0) || !std::isfinite(h))
    throw std::invalid_argument("normalizer: bandwidth must be positive");
  const double nd = static_cast<double>(n);
  const double denom = std::max(std::log(1.0 / h), std::log(std::log(nd)));
  return std::sqrt(nd * h / denom);
}

//! Dyadic bandwidth blocks h_{j,k} = 2^j h_{0,k} for n_k = 2^k, where
//! h_{0,k} = c (log n_k / n_k)^gamma, truncated at h_cap.
struct DyadicBlocks
{
  double c = 0.0;
  unsigned k = 0;
  std::size_t n_k = 0;
  double gamma = 1.0;
  double h_cap = 0.0;
  std::vector<double> h_list;

  std::size_t l_k() const { return h_list.size() - 1; }
};

inline DyadicBlocks dyadic_grid(double c, unsigned k, double h_cap, double gamma = 1.0)
{
  if (!(c > 0.0))
    throw std::invalid_argument("dyadic_grid: c must be positive");
  if (k < 4 || k > 62)
    throw std::invalid_argument("dyadic_grid: k must lie in [4, 62]");
  if (!(h_cap > 0.0 && h_cap <= 2.0))
    throw std::invalid_argument("dyadic_grid: h_cap must lie in (0, 2]");
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw std::invalid_argument("dyadic_grid: gamma must lie in (0, 1]");
  DyadicBlocks b;
  b.c = c;
  b.k = k;
  b.n_k = std::size_t{ 1 } << k;
  b.gamma = gamma;
  b.h_cap = h_cap;
  const double nk = static_cast<double>(b.n_k);
  const double h0 = gamma == 1.0 ? c * std::log(nk) / nk : c * std::pow(std::log(nk) / nk, gamma);
  if (h0 > h_cap)
    throw RangeEmptyError("dyadic_grid: h_{0,k} = " + std::to_string(h0) + " exceeds h_cap = " +
                          std::to_string(h_cap));
  for (int j = 0;; ++j) {
    const double h = std::ldexp(h0, j);
    if (h > h_cap)
      break;
    b.h_list.push_back(h);
  }
  return b;
}

struct SupDeviation
{
  double sup_dev = 0.0;
  std::size_t undefined_count = 0;
};

//! Max of |estimate - target| over points where both are defined.
inline SupDeviation sup_deviation(std::span<const MaybeReal> estimates, std::span<const MaybeReal> targets)
{
  if (estimates.size() != targets.size())
    throw std::invalid_argument("sup_deviation: length mismatch");
  if (estimates.empty())
    throw std::invalid_argument("sup_deviation: empty grid");
  SupDeviation out;
  bool any = false;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    if (!estimates[i] || !targets[i]) {
      ++out.undefined_count;
      continue;
    }
    any = true;
    out.sup_dev = std::max(out.sup_dev, std::abs(*estimates[i] - *targets[i]));
  }
  if (!any)
    throw DegenerateReportError("sup_deviation: every grid point is undefined");
  return out;
}

//! Evaluates both functions on every grid point (each point a span of
//! length `dim` inside `flat_grid`).
template <class Est, class Tgt>
SupDeviation sup_deviation(Est&& estimate, Tgt&& target, std::span<const double> flat_grid, std::size_t dim = 1)
{
  if (dim == 0 || flat_grid.empty() || flat_grid.size() % dim != 0)
    throw std::invalid_argument("sup_deviation: empty or ragged grid");
  const std::size_t m = flat_grid.size() / dim;
  std::vector<MaybeReal> est(m), tgt(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto pt = flat_grid.subspan(i * dim, dim);
    est[i] = estimate(pt);
    tgt[i] = target(pt);
  }
  return sup_deviation(std::span<const MaybeReal>(est), std::span<const MaybeReal>(tgt));
}

//! Evenly spaced product grid on [lo, hi]^dim with spacing at most
//! h^{1/d}/8 and at least `min_points` points per axis (endpoints included).
inline std::vector<double> location_grid(double lo, double hi, std::size_t dim, double h, std::size_t min_points = 2)
{
  if (!(hi > lo) || dim == 0)
    throw std::invalid_argument("location_grid: empty domain");
  const double spacing = volume_scale(h, dim) / 8.0;
  const auto needed = static_cast<std::size_t>(std::ceil((hi - lo) / spacing)) + 1;
  const std::size_t per_axis = std::max({ needed, min_points, std::size_t{ 2 } });
  std::vector<double> axis(per_axis);
  for (std::size_t i = 0; i < per_axis; ++i)
    axis[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(per_axis - 1);
  std::size_t total = 1;
  for (std::size_t a = 0; a < dim; ++a)
    total *= per_axis;
  std::vector<double> flat(total * dim);
  std::vector<std::size_t> idx(dim, 0);
  for (std::size_t p = 0; p < total; ++p) {
    for (std::size_t a = 0; a < dim; ++a)
      flat[p * dim + a] = axis[idx[a]];
    for (std::size_t a = 0; a < dim && ++idx[a] == per_axis; ++a)
      idx[a] = 0;
  }
  return flat;
}

enum class DeviationMode
{
  density,
  regression,
  condcdf
};

struct DeviationRow
{
  std::size_t n = 0;
  double h = 0.0;
  std::size_t j = 0;
  double sup_dev = 0.0;
  double normalized_stat = 0.0;
  std::size_t undefined_count = 0;
  double sup_err = 0.0; // against the unsmoothed truth f, m or F(t|.)
};

struct DeviationReport
{
  std::vector<DeviationRow> rows;
  double statistic = 0.0;
  std::optional<LinearFit> slope_fit;

  void write_csv(std::ostream& os) const
  {
    os << "n,h,sup_dev,normalized_stat,undefined_count\n";
    for (const auto& r : rows)
      os << r.n << ',' << r.h << ',' << r.sup_dev << ',' << r.normalized_stat << ',' << r.undefined_count << '\n';
  }

  std::size_t undefined_total() const
  {
    std::size_t s = 0;
    for (const auto& r : rows)
      s += r.undefined_count;
    return s;
  }
};

struct PlanOptions
{
  //! density mode only: sup over the whole support (true) or over I (false)
  bool whole_support = true;
  std::size_t min_grid_points = 2;
  std::size_t quadrature_nodes = 0; // 0 = Smoother default
  std::vector<double> t_grid;       // condcdf mode, ascending
};

//! Deterministic part of a deviation study: per-bandwidth location grids
//! and the smoothed targets on them. Built once and reused across
//! replicated samples.
class DeviationPlan
{
public:
  DeviationPlan(const TruthOracle& oracle,
                const Kernel& kernel,
                std::vector<double> h_list,
                DeviationMode mode,
                PlanOptions options = {})
    : kernel_(kernel)
    , mode_(mode)
    , dim_(kernel.dim())
    , options_(std::move(options))
  {
    if (h_list.empty())
      throw RangeEmptyError("DeviationPlan: no bandwidths");
    if (oracle.dim != dim_)
      throw std::invalid_argument("DeviationPlan: oracle and kernel dimensions differ");
    if (mode != DeviationMode::density && !oracle.m)
      throw std::invalid_argument("DeviationPlan: regression modes need an oracle with m");
    if (mode == DeviationMode::condcdf) {
      if (!oracle.cond_cdf)
        throw std::invalid_argument("DeviationPlan: condcdf mode needs F(t|.)");
      if (options_.t_grid.empty() || !std::is_sorted(options_.t_grid.begin(), options_.t_grid.end()))
        throw std::invalid_argument("DeviationPlan: condcdf mode needs an ascending t grid");
    }
    const std::size_t nt = options_.t_grid.size();
    for (double h : h_list) {
      Block b;
      b.h = h;
      double lo = oracle.i_lo, hi = oracle.i_hi;
      if (mode == DeviationMode::density && options_.whole_support) {
        const double reach = kernel.support_radius() * volume_scale(h, dim_);
        lo = oracle.support_lo - reach;
        hi = oracle.support_hi + reach;
      }
      b.grid = location_grid(lo, hi, dim_, h, options_.min_grid_points);
      const auto bw = BandwidthSpec::volume(h);
      const std::size_t m = b.grid.size() / dim_;
      b.targets.reserve(mode == DeviationMode::condcdf ? m * nt : m);
      for (std::size_t i = 0; i < m; ++i) {
        const auto pt = std::span<const double>(b.grid).subspan(i * dim_, dim_);
        const Smoother s(oracle, kernel, bw, pt, options_.quadrature_nodes);
        const double fb = s.f_bar();
        switch (mode) {
          case DeviationMode::density:
            b.targets.emplace_back(fb);
            b.truth.emplace_back(oracle.f(pt));
            break;
          case DeviationMode::regression:
            b.targets.push_back(fb != 0.0 ? MaybeReal(s.r_bar() / fb) : std::nullopt);
            b.truth.emplace_back(oracle.m(pt));
            break;
          case DeviationMode::condcdf:
            for (double t : options_.t_grid) {
              b.targets.push_back(fb != 0.0 ? MaybeReal(s.cond_numerator(t) / fb) : std::nullopt);
              b.truth.emplace_back(oracle.cond_cdf(t, pt));
            }
            break;
        }
      }
      blocks_.push_back(std::move(b));
    }
  }

  DeviationMode mode() const { return mode_; }
  std::size_t block_count() const { return blocks_.size(); }
  double bandwidth(std::size_t j) const { return blocks_[j].h; }
  std::span<const double> grid(std::size_t j) const { return blocks_[j].grid; }
  std::span<const MaybeReal> targets(std::size_t j) const { return blocks_[j].targets; }
  std::span<const MaybeReal> truth(std::size_t j) const { return blocks_[j].truth; }

  DeviationReport evaluate(const Sample& sample) const
  {
    if (mode_ != DeviationMode::density)
      throw std::invalid_argument("DeviationPlan: regression modes need a paired sample");
    if (sample.dim() != dim_)
      throw std::invalid_argument("DeviationPlan: sample dimension mismatch");
    std::optional<SortedSample1d> sorted;
    if (dim_ == 1)
      sorted.emplace(sample);
    return assemble(sample.size(), [&](const Block& b) {
      const std::size_t m = b.grid.size() / dim_;
      std::vector<MaybeReal> est(m);
      const auto bw = BandwidthSpec::volume(b.h);
      for (std::size_t i = 0; i < m; ++i) {
        const auto pt = std::span<const double>(b.grid).subspan(i * dim_, dim_);
        est[i] = sorted ? sorted->density(kernel_, b.h, pt[0]) : density_estimate(sample, kernel_, bw, pt);
      }
      return est;
    });
  }

  DeviationReport evaluate(const PairedSample& ps) const
  {
    if (mode_ == DeviationMode::density)
      return evaluate(ps.base());
    if (ps.dim() != dim_)
      throw std::invalid_argument("DeviationPlan: sample dimension mismatch");
    std::optional<SortedSample1d> sorted;
    if (dim_ == 1)
      sorted.emplace(ps);
    const auto& ts = options_.t_grid;
    return assemble(ps.size(), [&](const Block& b) {
      const std::size_t m = b.grid.size() / dim_;
      std::vector<MaybeReal> est;
      est.reserve(b.targets.size());
      const auto bw = BandwidthSpec::volume(b.h);
      for (std::size_t i = 0; i < m; ++i) {
        const auto pt = std::span<const double>(b.grid).subspan(i * dim_, dim_);
        if (mode_ == DeviationMode::regression) {
          est.push_back(sorted ? sorted->nw(kernel_, b.h, pt[0]) : nw_estimate(ps, kernel_, bw, pt));
        } else if (sorted) {
          for (auto& v : sorted->cond_ecdf(kernel_, b.h, pt[0], ts))
            est.push_back(v);
        } else {
          for (double t : ts)
            est.push_back(cond_ecdf(ps, kernel_, bw, t, pt));
        }
      }
      return est;
    });
  }

private:
  struct Block
  {
    double h = 0.0;
    std::vector<double> grid;
    std::vector<MaybeReal> targets;
    std::vector<MaybeReal> truth;
  };

  template <class Estimates>
  DeviationReport assemble(std::size_t n, Estimates&& estimates) const
  {
    DeviationReport report;
    for (std::size_t j = 0; j < blocks_.size(); ++j) {
      const Block& b = blocks_[j];
      const auto est = estimates(b);
      const auto sd = sup_deviation(std::span<const MaybeReal>(est), std::span<const MaybeReal>(b.targets));
      DeviationRow row;
      row.n = n;
      row.h = b.h;
      row.j = j;
      row.sup_dev = sd.sup_dev;
      row.undefined_count = sd.undefined_count;
      row.normalized_stat = sd.sup_dev * normalizer(n, b.h);
      row.sup_err = sup_deviation(std::span<const MaybeReal>(est), std::span<const MaybeReal>(b.truth)).sup_dev;
      report.statistic = std::max(report.statistic, row.normalized_stat);
      report.rows.push_back(row);
    }
    return report;
  }

  Kernel kernel_;
  DeviationMode mode_;
  std::size_t dim_;
  PlanOptions options_;
  std::vector<Block> blocks_;
};

//! Uniform-in-bandwidth statistic: max over the dyadic blocks of
//! normalizer(n, h) * sup |estimator - smoothed target| on the location grid.
template <class SampleT>
DeviationReport ub_statistic(const SampleT& sample,
                             const Kernel& kernel,
                             const DyadicBlocks& blocks,
                             DeviationMode mode,
                             const TruthOracle& oracle,
                             PlanOptions options = {})
{
  if (blocks.h_list.empty())
    throw RangeEmptyError("ub_statistic: empty block list");
  const DeviationPlan plan(oracle, kernel, blocks.h_list, mode, std::move(options));
  return plan.evaluate(sample);
}

} // namespace ubk
