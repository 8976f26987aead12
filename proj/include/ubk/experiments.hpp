#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

#include "bandwidth_select.hpp"
#include "bias.hpp"
#include "config.hpp"
#include "deviation.hpp"
#include "empirical_process.hpp"
#include "estimators.hpp"
#include "kernels.hpp"
#include "models.hpp"
#include "stats.hpp"

namespace ubk {

//! Ten significant digits, so reports are byte-identical across runs.
inline std::string format_real(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

struct CsvTable
{
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  template <class... Cells>
  void add(const Cells&... cells)
  {
    rows.push_back({ cell(cells)... });
  }

  void write(std::ostream& os) const
  {
    auto line = [&](const std::vector<std::string>& r) {
      for (std::size_t i = 0; i < r.size(); ++i)
        os << (i ? "," : "") << r[i];
      os << '\n';
    };
    line(header);
    for (const auto& r : rows)
      line(r);
  }

private:
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  static std::string cell(double v) { return format_real(v); }
  static std::string cell(bool b) { return b ? "1" : "0"; }
  template <class T>
    requires std::is_integral_v<T>
  static std::string cell(T v)
  {
    return std::to_string(v);
  }
};

//! One evaluated property: the claim it instantiates, what was measured and
//! the acceptance rule it was held against.
struct Check
{
  std::string claim_id;
  double measured = 0.0;
  std::string threshold;
  bool pass = false;
};

inline Check at_most(std::string id, double measured, double limit)
{
  return { std::move(id), measured, "<=" + format_real(limit), measured <= limit };
}

inline Check below(std::string id, double measured, double limit)
{
  return { std::move(id), measured, "<" + format_real(limit), measured < limit };
}

inline Check at_least(std::string id, double measured, double limit)
{
  return { std::move(id), measured, ">=" + format_real(limit), measured >= limit };
}

inline Check above(std::string id, double measured, double limit)
{
  return { std::move(id), measured, ">" + format_real(limit), measured > limit };
}

inline Check within(std::string id, double measured, double lo, double hi)
{
  return { std::move(id), measured, "[" + format_real(lo) + ";" + format_real(hi) + "]", measured >= lo && measured <= hi };
}

struct ExperimentResult
{
  std::string csv_name;
  CsvTable table;
  std::vector<Check> checks;

  bool all_passed() const
  {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
  }

  const Check* find(std::string_view id) const
  {
    for (const auto& c : checks)
      if (c.claim_id == id)
        return &c;
    return nullptr;
  }

  void write_summary(std::ostream& os) const
  {
    CsvTable t;
    t.header = { "claim_id", "measured", "threshold", "pass" };
    for (const auto& c : checks)
      t.rows.push_back({ c.claim_id, format_real(c.measured), c.threshold, c.pass ? "true" : "false" });
    t.write(os);
  }
};

//! fn(0), ..., fn(count - 1) spread over `workers` threads. Results are
//! stored by index, so the output does not depend on scheduling.
template <class Fn>
auto parallel_map(std::size_t count, unsigned workers, Fn&& fn)
{
  using R = std::invoke_result_t<Fn&, std::size_t>;
  std::vector<R> out(count);
  workers = std::max(1U, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i)
      out[i] = fn(i);
    return out;
  }
  std::atomic<std::size_t> next{ 0 };
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          out[i] = fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error)
            error = std::current_exception();
        }
      }
    });
  for (auto& t : pool)
    t.join();
  if (error)
    std::rethrow_exception(error);
  return out;
}

//! Substream index of replicate r at sample size 2^k.
inline std::uint64_t replicate_id(unsigned k, std::size_t r)
{
  return (static_cast<std::uint64_t>(k) << 32) | static_cast<std::uint64_t>(r);
}

//! Acceptance limits frozen from pilot runs with a different seed.
struct FrozenThresholds
{
  double consistency_final = 0.0;  // density, median sup error at the largest n
  double nw_sup_dev = 0.0;         // regression, median un-normalised deviation at the largest n
  double condcdf_sup_err = 0.0;    // conditional CDF, median sup error at the largest n
  double nu_lo = 0.0;              // entropy exponent band
  double nu_hi = 0.0;
};

inline FrozenThresholds frozen_thresholds()
{
  return { 0.762, 1.143, 1.133, 2.2, 3.5 };
}

struct RunOptions
{
  unsigned workers = 1;
  FrozenThresholds thresholds = frozen_thresholds();
};

inline std::vector<unsigned> k_values(const ExperimentConfig& cfg)
{
  std::vector<unsigned> ks;
  for (unsigned k = cfg.k_min; k <= cfg.k_max; ++k)
    ks.push_back(k);
  return ks;
}

namespace detail {

inline std::vector<double> linspace(double lo, double hi, std::size_t count)
{
  std::vector<double> v(count);
  for (std::size_t i = 0; i < count; ++i)
    v[i] = count == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  return v;
}

inline std::vector<double> logspace(double lo, double hi, std::size_t count)
{
  auto v = linspace(std::log(lo), std::log(hi), count);
  for (auto& x : v)
    x = std::exp(x);
  v.front() = lo;
  v.back() = hi;
  return v;
}

//! Product grid on [lo, hi]^dim with `per_axis` points per axis.
inline std::vector<double> product_grid(double lo, double hi, std::size_t dim, std::size_t per_axis)
{
  return location_grid(lo, hi, dim, 1e300, per_axis);
}

template <class Sample>
Sample draw(const Model& model, std::size_t n, std::uint64_t seed, std::uint64_t replicate)
{
  if constexpr (std::is_same_v<Sample, PairedSample>)
    return draw_regression_sample(model, n, seed, replicate);
  else
    return draw_density_sample(model, n, seed, replicate);
}

//! Replicated evaluation of a deviation plan per sample size 2^k.
template <class SampleT>
std::vector<std::vector<DeviationReport>> replicate_plans(const Model& model,
                                                          const std::vector<DeviationPlan>& plans,
                                                          const std::vector<unsigned>& ks,
                                                          std::size_t replicates,
                                                          std::uint64_t seed,
                                                          unsigned workers)
{
  std::vector<std::vector<DeviationReport>> out;
  for (std::size_t q = 0; q < ks.size(); ++q) {
    const std::size_t n = std::size_t{ 1 } << ks[q];
    out.push_back(parallel_map(replicates, workers, [&](std::size_t r) {
      return plans[q].evaluate(draw<SampleT>(model, n, seed, replicate_id(ks[q], r)));
    }));
  }
  return out;
}

//! Median over replicates of each row field, row j of size 2^k per line.
inline void add_median_rows(CsvTable& table,
                            unsigned k,
                            const std::vector<DeviationReport>& reps,
                            bool with_undefined)
{
  const std::size_t rows = reps.front().rows.size();
  for (std::size_t j = 0; j < rows; ++j) {
    std::vector<double> dev, stat;
    std::size_t undefined = 0;
    for (const auto& rep : reps) {
      dev.push_back(rep.rows[j].sup_dev);
      stat.push_back(rep.rows[j].normalized_stat);
      undefined += rep.rows[j].undefined_count;
    }
    const auto& r0 = reps.front().rows[j];
    if (with_undefined)
      table.add(k, r0.n, r0.h, r0.j, median(dev), median(stat), undefined);
    else
      table.add(k, r0.n, r0.h, r0.j, median(dev), median(stat));
  }
}

//! Stability of the per-k distribution of the block statistic: the spread of
//! the 95th percentiles and the rank trend of the medians.
inline void stability_checks(std::vector<Check>& checks,
                             const std::string& prefix,
                             const std::vector<unsigned>& ks,
                             const std::vector<std::vector<DeviationReport>>& reports)
{
  std::vector<double> p95, med, kd;
  for (std::size_t q = 0; q < ks.size(); ++q) {
    std::vector<double> stat;
    for (const auto& rep : reports[q])
      stat.push_back(rep.statistic);
    p95.push_back(quantile(stat, 0.95));
    med.push_back(median(stat));
    kd.push_back(static_cast<double>(ks[q]));
  }
  const auto [lo, hi] = std::minmax_element(p95.begin(), p95.end());
  checks.push_back(below(prefix + ".p95_ratio", *hi / *lo, 2.0));
  if (ks.size() >= 2)
    checks.push_back(at_most(prefix + ".kendall_tau", kendall_tau(kd, med), 0.5));
}

} // namespace detail

//! Sup-deviation study over dyadic bandwidth blocks; shared by the
//! density-rate, nw and condcdf commands.
struct DyadicStudy
{
  std::vector<unsigned> ks;
  std::vector<std::vector<DeviationReport>> reports; // [k][replicate]
};

template <class SampleT>
DyadicStudy dyadic_study(const Model& model,
                         const Kernel& kernel,
                         const std::vector<unsigned>& ks,
                         double c,
                         double h_cap,
                         double gamma,
                         DeviationMode mode,
                         const PlanOptions& options,
                         std::size_t replicates,
                         std::uint64_t seed,
                         unsigned workers)
{
  std::vector<DeviationPlan> plans;
  for (unsigned k : ks)
    plans.emplace_back(model.oracle, kernel, dyadic_grid(c, k, h_cap, gamma).h_list, mode, options);
  return { ks, detail::replicate_plans<SampleT>(model, plans, ks, replicates, seed, workers) };
}

//! Median over replicates of sup_{h in [a_n, 2 a_n]} sup_dev with a_n = n^{-1/2},
//! regressed on log n.
struct RateSlope
{
  std::vector<std::size_t> n;
  std::vector<double> median_sup_dev;
  LinearFit fit;
};

inline RateSlope rate_slope(const Model& model,
                            const Kernel& kernel,
                            const std::vector<unsigned>& ks,
                            std::size_t replicates,
                            std::uint64_t seed,
                            std::size_t grid_points,
                            unsigned workers)
{
  PlanOptions options;
  options.min_grid_points = grid_points;
  std::vector<DeviationPlan> plans;
  for (unsigned k : ks) {
    const double a_n = std::pow(2.0, -0.5 * k);
    std::vector<double> h_list;
    for (int q = 0; q <= 4; ++q)
      h_list.push_back(a_n * std::exp2(q / 4.0));
    plans.emplace_back(model.oracle, kernel, h_list, DeviationMode::density, options);
  }
  const auto reports = detail::replicate_plans<Sample>(model, plans, ks, replicates, seed ^ 0x5a5aULL, workers);
  RateSlope out;
  std::vector<double> lx, ly;
  for (std::size_t q = 0; q < ks.size(); ++q) {
    std::vector<double> sup;
    for (const auto& rep : reports[q]) {
      double s = 0.0;
      for (const auto& row : rep.rows)
        s = std::max(s, row.sup_dev);
      sup.push_back(s);
    }
    out.n.push_back(std::size_t{ 1 } << ks[q]);
    out.median_sup_dev.push_back(median(sup));
    lx.push_back(std::log(static_cast<double>(out.n.back())));
    ly.push_back(std::log(out.median_sup_dev.back()));
  }
  out.fit = linear_fit(lx, ly);
  return out;
}

inline ExperimentResult run_density_rate(const ExperimentConfig& cfg, const RunOptions& run = {})
{
  const Model model = make_model(cfg.model);
  const Kernel kernel = kernel_by_name(cfg.kernel, model.dim);
  const auto ks = k_values(cfg);
  PlanOptions options;
  options.min_grid_points = cfg.grid_points;
  const auto study = dyadic_study<Sample>(model, kernel, ks, cfg.c, cfg.h_cap.value_or(1.0), 1.0,
                                          DeviationMode::density, options, cfg.replicates, cfg.seed, run.workers);
  ExperimentResult res;
  res.csv_name = "density-rate.csv";
  res.table.header = { "k", "n", "h", "j", "sup_dev", "normalized_stat" };
  for (std::size_t q = 0; q < ks.size(); ++q)
    detail::add_median_rows(res.table, ks[q], study.reports[q], false);
  detail::stability_checks(res.checks, "T1", ks, study.reports);
  if (ks.size() >= 2) {
    const auto slope = rate_slope(model, kernel, ks, cfg.replicates, cfg.seed, cfg.grid_points, run.workers);
    res.checks.push_back(within("R2.slope", slope.fit.slope, -0.33, -0.17));
  }
  return res;
}

//! Median over replicates of sup_{a_n <= h <= b_n} ||fhat - f||_I with
//! a_n = c log n / n and b_n = n^{-1/10}, per sample size.
struct ConsistencyCurve
{
  std::vector<std::size_t> n;
  std::vector<double> median_sup_err;
  std::vector<std::vector<DeviationReport>> reports;
};

inline ConsistencyCurve consistency_curve(const Model& model,
                                          const Kernel& kernel,
                                          const std::vector<unsigned>& ks,
                                          double c,
                                          std::size_t replicates,
                                          std::uint64_t seed,
                                          std::size_t grid_points,
                                          unsigned workers)
{
  PlanOptions options;
  options.whole_support = false;
  options.min_grid_points = grid_points;
  std::vector<DeviationPlan> plans;
  for (unsigned k : ks) {
    const double b_n = std::pow(2.0, -0.1 * k);
    plans.emplace_back(model.oracle, kernel, dyadic_grid(c, k, b_n).h_list, DeviationMode::density, options);
  }
  ConsistencyCurve out;
  out.reports = detail::replicate_plans<Sample>(model, plans, ks, replicates, seed, workers);
  for (std::size_t q = 0; q < ks.size(); ++q) {
    std::vector<double> sup;
    for (const auto& rep : out.reports[q]) {
      double s = 0.0;
      for (const auto& row : rep.rows)
        s = std::max(s, row.sup_err);
      sup.push_back(s);
    }
    out.n.push_back(std::size_t{ 1 } << ks[q]);
    out.median_sup_err.push_back(median(sup));
  }
  return out;
}

inline void consistency_checks(std::vector<Check>& checks, const ConsistencyCurve& curve, double threshold)
{
  std::size_t increases = 0;
  for (std::size_t q = 1; q < curve.median_sup_err.size(); ++q)
    if (!(curve.median_sup_err[q] < curve.median_sup_err[q - 1]))
      ++increases;
  checks.push_back(at_most("C1.nonmonotone_steps", static_cast<double>(increases), 0.0));
  checks.push_back(below("C1.final_sup_err", curve.median_sup_err.back(), threshold));
}

inline ExperimentResult run_consistency(const ExperimentConfig& cfg, const RunOptions& run = {})
{
  const Model model = make_model(cfg.model);
  const Kernel kernel = kernel_by_name(cfg.kernel, model.dim);
  const auto ks = k_values(cfg);
  const auto curve = consistency_curve(model, kernel, ks, cfg.c, cfg.replicates, cfg.seed, cfg.grid_points, run.workers);
  ExperimentResult res;
  res.csv_name = "consistency.csv";
  res.table.header = { "n", "h", "sup_err" };
  for (const auto& reps : curve.reports)
    for (std::size_t j = 0; j < reps.front().rows.size(); ++j) {
      std::vector<double> err;
      for (const auto& rep : reps)
        err.push_back(rep.rows[j].sup_err);
      res.table.add(reps.front().rows[j].n, reps.front().rows[j].h, median(err));
    }
  consistency_checks(res.checks, curve, run.thresholds.consistency_final);
  return res;
}

//! Response regime of the regression commands: bounded noise, or a p-th
//! moment regime with tail index p + 1 and lower range exponent 1 - 2/p.
inline std::pair<Model, double> regression_model(const ExperimentConfig& cfg)
{
  if (cfg.p)
    return { make_model(cfg.model, ResponseRegime::moment(*cfg.p, *cfg.p + 1.0)), 1.0 - 2.0 / *cfg.p };
  return { make_model(cfg.model, ResponseRegime::bounded()), 1.0 };
}

inline double median_max_sup_dev(const std::vector<DeviationReport>& reps)
{
  std::vector<double> v;
  for (const auto& rep : reps) {
    double s = 0.0;
    for (const auto& row : rep.rows)
      s = std::max(s, row.sup_dev);
    v.push_back(s);
  }
  return median(v);
}

inline double median_max_sup_err(const std::vector<DeviationReport>& reps)
{
  std::vector<double> v;
  for (const auto& rep : reps) {
    double s = 0.0;
    for (const auto& row : rep.rows)
      s = std::max(s, row.sup_err);
    v.push_back(s);
  }
  return median(v);
}

inline ExperimentResult run_nw(const ExperimentConfig& cfg, const RunOptions& run = {})
{
  const auto [model, gamma] = regression_model(cfg);
  const Kernel kernel = kernel_by_name(cfg.kernel, model.dim);
  const auto ks = k_values(cfg);
  PlanOptions options;
  options.min_grid_points = cfg.grid_points;
  const auto study = dyadic_study<PairedSample>(model, kernel, ks, cfg.c, cfg.h_cap.value_or(0.5), gamma,
                                                DeviationMode::regression, options, cfg.replicates, cfg.seed,
                                                run.workers);
  ExperimentResult res;
  res.csv_name = "nw.csv";
  res.table.header = { "k", "n", "h", "j", "sup_dev", "normalized_stat", "undefined_count" };
  for (std::size_t q = 0; q < ks.size(); ++q)
    detail::add_median_rows(res.table, ks[q], study.reports[q], true);
  const std::string prefix = cfg.p ? "T2p" : "T2";
  detail::stability_checks(res.checks, prefix, ks, study.reports);
  if (!cfg.p) {
    res.checks.push_back(below(prefix + ".sup_dev_at_nmax", median_max_sup_dev(study.reports.back()),
                               run.thresholds.nw_sup_dev));
    std::size_t undefined = 0;
    bool any = false;
    for (std::size_t q = 0; q < ks.size(); ++q)
      if (ks[q] >= 12) {
        any = true;
        for (const auto& rep : study.reports[q])
          undefined += rep.undefined_total();
      }
    if (any)
      res.checks.push_back(at_most(prefix + ".undefined_count", static_cast<double>(undefined), 0.0));
  }
  return res;
}

//! Evenly spaced response thresholds spanning the conditional law on I.
inline std::vector<double> condcdf_t_grid(const Model& model, std::size_t count = 17)
{
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  const std::vector<double> xs = detail::linspace(model.oracle.i_lo, model.oracle.i_hi, 201);
  for (double x : xs) {
    const double m = model.oracle.m(std::span<const double>(&x, 1));
    lo = std::min(lo, m);
    hi = std::max(hi, m);
  }
  const auto& rr = model.regime;
  const double spread =
    rr.kind == RegimeKind::bounded ? rr.noise_width : std::pow(0.02, -1.0 / rr.tail_index) - 1.0;
  return detail::linspace(lo - spread, hi + spread, count);
}

inline ExperimentResult run_condcdf(const ExperimentConfig& cfg, const RunOptions& run = {})
{
  const auto [model, gamma] = regression_model(cfg);
  const Kernel kernel = kernel_by_name(cfg.kernel, model.dim);
  const auto ks = k_values(cfg);
  PlanOptions options;
  options.min_grid_points = cfg.grid_points;
  options.quadrature_nodes = 512;
  options.t_grid = condcdf_t_grid(model);
  const auto study = dyadic_study<PairedSample>(model, kernel, ks, cfg.c, cfg.h_cap.value_or(0.5), gamma,
                                                DeviationMode::condcdf, options, cfg.replicates, cfg.seed,
                                                run.workers);
  ExperimentResult res;
  res.csv_name = "condcdf.csv";
  res.table.header = { "k", "n", "h", "j", "sup_dev", "normalized_stat", "undefined_count" };
  for (std::size_t q = 0; q < ks.size(); ++q)
    detail::add_median_rows(res.table, ks[q], study.reports[q], true);
  detail::stability_checks(res.checks, "T3", ks, study.reports);
  res.checks.push_back(below("C3.sup_err_at_nmax", median_max_sup_err(study.reports.back()),
                             run.thresholds.condcdf_sup_err));
  return res;
}

inline std::vector<double> bias_bandwidths(double h_cap)
{
  return { h_cap / 8.0, h_cap / 4.0, h_cap / 2.0, h_cap };
}

inline ExperimentResult run_bias(const ExperimentConfig& cfg, const RunOptions& = {})
{
  const Model model = make_model(cfg.model);
  const Kernel kernel = kernel_by_name(cfg.kernel, model.dim);
  const auto h_list = bias_bandwidths(cfg.h_cap.value_or(0.4));
  const auto grid = detail::product_grid(model.oracle.i_lo, model.oracle.i_hi, model.dim, cfg.grid_points);
  const auto curve = bias_rate_fit(model.oracle, kernel, h_list, grid);
  ExperimentResult res;
  res.csv_name = "bias.csv";
  res.table.header = { "h", "sup_bias" };
  for (const auto& row : curve.rows)
    res.table.add(row.h, row.sup_bias);
  if (curve.slope_fit)
    res.checks.push_back(at_least("R6.slope", curve.slope_fit->slope, 1.0 / static_cast<double>(model.dim) - 0.05));
  if (model.name == "triangular" && kernel.name() == "box") {
    // (f * K_h)(0) = 1 - h/4 for this pair
    double worst = 0.0;
    for (double h : h_list) {
      const double x0 = 0.0;
      const double b = 1.0 - convolve(model.oracle, kernel, BandwidthSpec::volume(h), std::span<const double>(&x0, 1));
      worst = std::max(worst, std::abs(b - h / 4.0) / (h / 4.0));
    }
    res.checks.push_back(at_most("L1.anchor_rel_err", worst, 1e-6));
  }
  return res;
}

//! Covering curve of a kernel class over the atoms of a sample of size 256.
struct EntropyStudy
{
  std::vector<double> epsilons;
  std::vector<std::size_t> counts;
  double diameter = 0.0;
  double kappa = 0.0;
  std::size_t class_size = 0;
  std::size_t count_at_diameter = 0;
  std::optional<EntropyFit> fit;
};

inline EntropyStudy entropy_study(const Model& model, const Kernel& kernel, std::uint64_t seed, std::size_t atoms_n = 256)
{
  const Sample sample = draw_density_sample(model, atoms_n, seed, 0);
  const auto atoms = uniform_atoms(sample);
  const auto locations = detail::product_grid(model.oracle.i_lo, model.oracle.i_hi, model.dim, model.dim == 1 ? 33 : 9);
  std::vector<double> bandwidths;
  for (int j = 1; j <= 6; ++j)
    bandwidths.push_back(std::exp2(-j));
  const auto cls = kernel_class(kernel, locations, bandwidths);
  EntropyStudy out;
  out.class_size = cls.size();
  out.kappa = cls.envelope_bound;
  out.diameter = class_diameter(cls, atoms);
  out.epsilons = detail::logspace(0.01, 1.0, 25);
  out.counts = covering_curve(cls, atoms, out.epsilons);
  const double eps_diam = out.diameter / out.kappa;
  out.count_at_diameter = covering_curve(cls, atoms, std::span<const double>(&eps_diam, 1)).front();
  std::vector<std::pair<double, std::size_t>> usable;
  for (std::size_t i = 0; i < out.epsilons.size(); ++i)
    if (out.epsilons[i] < 1.0 && out.counts[i] > 1 && 2 * out.counts[i] <= out.class_size)
      usable.emplace_back(out.epsilons[i], out.counts[i]);
  if (usable.size() >= 4)
    out.fit = entropy_fit(usable);
  return out;
}

inline ExperimentResult run_entropy(const ExperimentConfig& cfg, const RunOptions& run = {})
{
  const Model model = make_model(cfg.model);
  const Kernel kernel = kernel_by_name(cfg.kernel, model.dim);
  const auto st = entropy_study(model, kernel, cfg.seed);
  ExperimentResult res;
  res.csv_name = "entropy.csv";
  res.table.header = { "epsilon", "count" };
  for (std::size_t i = 0; i < st.epsilons.size(); ++i)
    res.table.add(st.epsilons[i], st.counts[i]);
  std::size_t rises = 0;
  for (std::size_t i = 1; i < st.counts.size(); ++i)
    if (st.counts[i] > st.counts[i - 1])
      ++rises;
  res.checks.push_back(at_most("K3.count_increases", static_cast<double>(rises), 0.0));
  res.checks.push_back(within("K3.count_at_diameter", static_cast<double>(st.count_at_diameter), 1.0, 1.0));
  if (st.fit && st.fit->r_squared) {
    res.checks.push_back(above("K3.r_squared", *st.fit->r_squared, 0.9));
    res.checks.push_back(within("K3.nu_hat", st.fit->nu_hat, run.thresholds.nu_lo, run.thresholds.nu_hi));
  } else {
    res.checks.push_back({ "K3.r_squared", 0.0, ">0.9", false });
  }
  return res;
}

//! Rademacher supremum of the kernel class at one bandwidth over a fixed
//! set of locations on I, averaged over replicated samples.
struct SymmetrizeRow
{
  std::size_t n = 0;
  double h = 0.0;
  double rademacher_sup = 0.0;
  double sigma0_sq = 0.0;
  double U = 0.0;
};

inline constexpr std::size_t kRademacherDraws = 8;

inline std::vector<SymmetrizeRow> symmetrize_study(const Model& model,
                                                   const Kernel& kernel,
                                                   const std::vector<unsigned>& ks,
                                                   double c,
                                                   double h_cap,
                                                   std::size_t replicates,
                                                   std::uint64_t seed,
                                                   std::size_t grid_points,
                                                   unsigned workers)
{
  const auto locations = detail::product_grid(model.oracle.i_lo, model.oracle.i_hi, model.dim, grid_points);
  std::vector<SymmetrizeRow> rows;
  for (unsigned k : ks) {
    const auto blocks = dyadic_grid(c, k, h_cap);
    const std::size_t n = blocks.n_k;
    std::vector<FunctionClassGrid> classes;
    for (double h : blocks.h_list)
      classes.push_back(kernel_class(kernel, locations, std::span<const double>(&h, 1)));
    const auto per_rep = parallel_map(replicates, workers, [&](std::size_t r) {
      const Sample s = draw_density_sample(model, n, seed, replicate_id(k, r));
      std::vector<SymmetrizeRow> out;
      for (std::size_t j = 0; j < classes.size(); ++j) {
        const auto mv = evaluate_members(s, classes[j]);
        const auto env = variance_envelope(mv, n, classes[j].envelope_bound);
        out.push_back({ n, blocks.h_list[j], rademacher_sup(mv, n, kRademacherDraws, seed ^ replicate_id(k, r)),
                        env.sigma0_sq, env.U });
      }
      return out;
    });
    for (std::size_t j = 0; j < classes.size(); ++j) {
      SymmetrizeRow row{ n, blocks.h_list[j], 0.0, 0.0, 0.0 };
      for (const auto& rep : per_rep) {
        row.rademacher_sup += rep[j].rademacher_sup;
        row.sigma0_sq += rep[j].sigma0_sq;
        row.U = std::max(row.U, rep[j].U);
      }
      row.rademacher_sup /= static_cast<double>(replicates);
      row.sigma0_sq /= static_cast<double>(replicates);
      rows.push_back(row);
    }
  }
  return rows;
}

//! |R(lambda G) - lambda R(G)| for lambda = 2 on one sample and seed.
inline double scaling_defect(const Model& model, const Kernel& kernel, std::size_t n, double h, std::uint64_t seed)
{
  const Sample s = draw_density_sample(model, n, seed, 0);
  const auto locations = detail::product_grid(model.oracle.i_lo, model.oracle.i_hi, model.dim, 33);
  const auto cls = kernel_class(kernel, locations, std::span<const double>(&h, 1));
  return std::abs(rademacher_sup(s, scaled(cls, 2.0), kRademacherDraws, seed) - 2.0 * rademacher_sup(s, cls, kRademacherDraws, seed));
}

inline ExperimentResult run_symmetrize(const ExperimentConfig& cfg, const RunOptions& run = {})
{
  const Model model = make_model(cfg.model);
  const Kernel kernel = kernel_by_name(cfg.kernel, model.dim);
  const auto rows = symmetrize_study(model, kernel, k_values(cfg), cfg.c, cfg.h_cap.value_or(1.0), cfg.replicates,
                                     cfg.seed, cfg.grid_points, run.workers);
  ExperimentResult res;
  res.csv_name = "symmetrize.csv";
  res.table.header = { "n", "h", "rademacher_sup", "sigma0_sq", "U" };
  std::vector<ComplexityPoint> pts;
  for (const auto& r : rows) {
    res.table.add(r.n, r.h, r.rademacher_sup, r.sigma0_sq, r.U);
    pts.push_back({ r.n, r.h, r.rademacher_sup });
  }
  if (pts.size() >= 3)
    res.checks.push_back(above("C4.shape_r_squared", complexity_shape_fit(pts).r_squared, 0.8));
  const std::size_t n_min = std::size_t{ 1 } << cfg.k_min;
  res.checks.push_back(at_most("C4.scaling_defect", scaling_defect(model, kernel, n_min, 0.1, cfg.seed), 0.0));
  return res;
}

//! Remark-style selector study at one sample size: LSCV over a log grid,
//! a local plug-in fed by the clamped LSCV pilot, and the variable-bandwidth
//! estimator against every fixed bandwidth of the grid inside the range.
struct SelectionStudy
{
  BandwidthRange range;
  std::vector<double> lscv_grid;
  std::vector<double> selected_h;
  std::vector<bool> clamped;
  double lscv_hit_rate = 0.0;
  double plugin_hit_rate = 0.0;
  double variable_median_err = 0.0;
  double best_fixed_median_err = 0.0;
  double best_fixed_h = 0.0;
};

inline SelectionStudy selection_study(const Model& model,
                                      const Kernel& kernel,
                                      std::size_t n,
                                      double c,
                                      std::size_t replicates,
                                      std::uint64_t seed,
                                      std::size_t grid_points,
                                      unsigned workers)
{
  if (model.dim != 1)
    throw std::invalid_argument("selection_study: one-dimensional models only");
  SelectionStudy st;
  st.range = BandwidthRange::theory(n, c, 1.0, std::pow(static_cast<double>(n), -0.1));
  st.lscv_grid = detail::logspace(st.range.a_n / 4.0, 1.0, 40);
  std::vector<double> fixed;
  for (double h : st.lscv_grid)
    if (st.range.contains(h))
      fixed.push_back(h);
  const auto xs = detail::linspace(model.oracle.i_lo, model.oracle.i_hi, grid_points);

  struct Rep
  {
    double lscv_h = 0.0;
    std::size_t plugin_hits = 0;
    double variable_err = 0.0;
    std::vector<double> fixed_err;
  };
  const auto reps = parallel_map(replicates, workers, [&](std::size_t r) {
    const Sample s = draw_density_sample(model, n, seed, replicate_id(63, r));
    const SortedSample1d sorted(s);
    Rep out;
    out.lscv_h = lscv_bandwidth(s, kernel, st.lscv_grid);
    const double pilot = clamp_bandwidth(out.lscv_h, st.range).h;
    for (double x : xs) {
      const double h_x = plugin_from_density(n, sorted.density(kernel, pilot, x));
      out.plugin_hits += st.range.contains(h_x) ? 1 : 0;
      const double est = sorted.density(kernel, clamp_bandwidth(h_x, st.range).h, x);
      out.variable_err = std::max(out.variable_err, std::abs(est - model.oracle.f(std::span<const double>(&x, 1))));
    }
    for (double h : fixed) {
      double e = 0.0;
      for (double x : xs)
        e = std::max(e, std::abs(sorted.density(kernel, h, x) - model.oracle.f(std::span<const double>(&x, 1))));
      out.fixed_err.push_back(e);
    }
    return out;
  });

  std::size_t lscv_hits = 0, plugin_hits = 0;
  std::vector<double> variable;
  for (const auto& r : reps) {
    st.selected_h.push_back(r.lscv_h);
    st.clamped.push_back(clamp_bandwidth(r.lscv_h, st.range).clamped);
    lscv_hits += st.range.contains(r.lscv_h) ? 1 : 0;
    plugin_hits += r.plugin_hits;
    variable.push_back(r.variable_err);
  }
  st.lscv_hit_rate = static_cast<double>(lscv_hits) / static_cast<double>(replicates);
  st.plugin_hit_rate = static_cast<double>(plugin_hits) / static_cast<double>(replicates * xs.size());
  st.variable_median_err = median(variable);
  st.best_fixed_median_err = std::numeric_limits<double>::infinity();
  for (std::size_t q = 0; q < fixed.size(); ++q) {
    std::vector<double> e;
    for (const auto& r : reps)
      e.push_back(r.fixed_err[q]);
    const double med = median(e);
    if (med < st.best_fixed_median_err) {
      st.best_fixed_median_err = med;
      st.best_fixed_h = fixed[q];
    }
  }
  return st;
}

inline ExperimentResult run_select(const ExperimentConfig& cfg, const RunOptions& run = {})
{
  const Model model = make_model(cfg.model);
  const Kernel kernel = kernel_by_name(cfg.kernel, model.dim);
  const std::size_t n = std::size_t{ 1 } << cfg.k_max;
  const auto st = selection_study(model, kernel, n, cfg.c, cfg.replicates, cfg.seed, cfg.grid_points, run.workers);
  ExperimentResult res;
  res.csv_name = "select.csv";
  res.table.header = { "replicate", "selected_h", "clamped" };
  for (std::size_t r = 0; r < st.selected_h.size(); ++r)
    res.table.add(r, st.selected_h[r], static_cast<bool>(st.clamped[r]));
  res.checks.push_back(at_least("R7.lscv_hit_rate", st.lscv_hit_rate, 0.99));
  res.checks.push_back(at_least("R7.plugin_hit_rate", st.plugin_hit_rate, 0.99));
  res.checks.push_back(at_most("R7.variable_over_best_fixed", st.variable_median_err / st.best_fixed_median_err, 1.5));
  return res;
}

inline ExperimentResult run_experiment(Command command, const ExperimentConfig& cfg, const RunOptions& run = {})
{
  switch (command) {
    case Command::density_rate:
      return run_density_rate(cfg, run);
    case Command::consistency:
      return run_consistency(cfg, run);
    case Command::nw:
      return run_nw(cfg, run);
    case Command::condcdf:
      return run_condcdf(cfg, run);
    case Command::bias:
      return run_bias(cfg, run);
    case Command::entropy:
      return run_entropy(cfg, run);
    case Command::symmetrize:
      return run_symmetrize(cfg, run);
    case Command::select:
      return run_select(cfg, run);
  }
  throw std::invalid_argument("run_experiment: unknown command");
}

} // namespace ubk
