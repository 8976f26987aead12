#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rng.hpp"
#include "sample.hpp"

namespace ubk {

using PointFn = std::function<double(std::span<const double>)>;
using CondCdfFn = std::function<double(double, std::span<const double>)>;

//! Analytic truth for a synthetic model.
//!
//! `f` is the covariate density; `m` and `cond_cdf` are present for
//! regression models. `breakpoints` lists per-axis kinks or jumps of f, m
//! and F(t|.) so quadrature can split there. The evaluation window I is
//! [i_lo, i_hi]^d and J = I widened by `J_margin` in the max-norm.
struct TruthOracle
{
  std::size_t dim = 1;
  PointFn f;
  PointFn m;
  CondCdfFn cond_cdf;
  std::function<double(double)> marginal_cdf; // per-axis CDF of X
  double support_lo = -1.0;
  double support_hi = 1.0;
  double i_lo = -0.5;
  double i_hi = 0.5;
  double J_margin = 0.25;
  double density_floor_on_J = 0.0;
  std::optional<double> lipschitz_const;
  std::vector<double> breakpoints;

  bool has_regression() const { return static_cast<bool>(m); }
  bool has_cond_cdf() const { return static_cast<bool>(cond_cdf); }

  //! r(x) = m(x) f(x)
  double r(std::span<const double> x) const { return m(x) * f(x); }
};

enum class RegimeKind
{
  none,
  bounded,
  moment
};

//! Response noise regime: bounded uniform noise of half-width `noise_width`
//! (|Y| <= M on J), or symmetrised Lomax noise with `tail_index` > p so that
//! sup_z E(|Y|^p | X = z) = alpha is finite.
struct ResponseRegime
{
  RegimeKind kind = RegimeKind::none;
  double noise_width = 1.0;
  double M = 0.0;
  double p = 0.0;
  double tail_index = 0.0;
  double alpha = 0.0;

  static ResponseRegime none() { return {}; }

  static ResponseRegime bounded(double noise_width = 1.0)
  {
    if (!(noise_width >= 0.0))
      throw std::invalid_argument("ResponseRegime: noise width must be nonnegative");
    ResponseRegime r;
    r.kind = RegimeKind::bounded;
    r.noise_width = noise_width;
    return r;
  }

  static ResponseRegime moment(double p, double tail_index)
  {
    if (!(p > 2.0))
      throw std::invalid_argument("ResponseRegime: moment order p must exceed 2");
    if (!(tail_index > p))
      throw std::invalid_argument("ResponseRegime: tail index must exceed p");
    ResponseRegime r;
    r.kind = RegimeKind::moment;
    r.p = p;
    r.tail_index = tail_index;
    return r;
  }
};

//! E|Z|^q for Z symmetrised Lomax(shape a, scale 1); infinite for q >= a.
inline double lomax_abs_moment(double q, double a)
{
  if (q >= a)
    return std::numeric_limits<double>::infinity();
  return std::tgamma(q + 1.0) * std::tgamma(a - q) / std::tgamma(a);
}

struct Model
{
  std::string name;
  std::size_t dim = 1;
  TruthOracle oracle;
  ResponseRegime regime;
  //! Inverse CDF of one covariate axis (axes are independent).
  std::function<double(double)> axis_quantile;
};

namespace detail {

inline double bump_cdf(double x)
{
  if (x <= -1.0)
    return 0.0;
  if (x >= 1.0)
    return 1.0;
  const double x2 = x * x;
  return 0.5 + 0.9375 * (x - 2.0 * x * x2 / 3.0 + x * x2 * x2 / 5.0);
}

inline double bump_pdf(double x)
{
  if (std::abs(x) > 1.0)
    return 0.0;
  const double t = 1.0 - x * x;
  return 0.9375 * t * t;
}

//! Safeguarded Newton on the bump CDF.
inline double bump_quantile(double u)
{
  double lo = -1.0, hi = 1.0, x = 2.0 * u - 1.0;
  for (int it = 0; it < 100; ++it) {
    const double g = bump_cdf(x) - u;
    if (g > 0.0)
      hi = x;
    else
      lo = x;
    const double dens = bump_pdf(x);
    double next = dens > 0.0 ? x - g / dens : 0.5 * (lo + hi);
    if (!(next > lo && next < hi))
      next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-15)
      return next;
    x = next;
  }
  return x;
}

inline double triangular_pdf(double x)
{
  return std::max(0.0, 1.0 - std::abs(x));
}

inline double triangular_cdf(double x)
{
  if (x <= -1.0)
    return 0.0;
  if (x >= 1.0)
    return 1.0;
  if (x <= 0.0)
    return 0.5 * (1.0 + x) * (1.0 + x);
  return 1.0 - 0.5 * (1.0 - x) * (1.0 - x);
}

inline double triangular_quantile(double u)
{
  return u < 0.5 ? -1.0 + std::sqrt(2.0 * u) : 1.0 - std::sqrt(2.0 * (1.0 - u));
}

struct DesignSpec
{
  std::size_t dim;
  std::function<double(double)> pdf;
  std::function<double(double)> cdf;
  std::function<double(double)> quantile;
  std::vector<double> breakpoints;
  std::optional<double> lipschitz;
};

inline DesignSpec design_by_name(std::string_view name)
{
  if (name == "uniform")
    return { 1,
             [](double x) { return std::abs(x) <= 1.0 ? 0.5 : 0.0; },
             [](double x) { return std::clamp(0.5 * (x + 1.0), 0.0, 1.0); },
             [](double u) { return 2.0 * u - 1.0; },
             { -1.0, 1.0 },
             std::nullopt };
  if (name == "triangular" || name == "triangular2d")
    return { name == "triangular" ? 1u : 2u, triangular_pdf, triangular_cdf, triangular_quantile, { -1.0, 0.0, 1.0 },
             name == "triangular" ? 1.0 : 2.0 };
  if (name == "bump")
    // max |f'| = (15/16) * 4 x (1 - x^2) at x = 1/sqrt(3)
    return { 1, bump_pdf, bump_cdf, bump_quantile, { -1.0, 1.0 }, 0.9375 * 8.0 / (3.0 * std::sqrt(3.0)) };
  throw std::invalid_argument("unknown model '" + std::string(name) + "'");
}

} // namespace detail

//! Names of the shipped models.
inline std::vector<std::string> model_names()
{
  return { "uniform",        "triangular",       "bump",          "triangular2d",
           "uniform_square", "uniform_sine",     "triangular_square", "triangular_sine" };
}

//! Builds a named model. Density-only names are "uniform", "triangular",
//! "bump" and "triangular2d"; "<design>_square" and "<design>_sine" attach
//! m(x) = x^2 or m(x) = sin(3x) with the given response regime (bounded
//! uniform noise of half-width 1 when unspecified).
inline Model make_model(std::string_view name, std::optional<ResponseRegime> regime = std::nullopt)
{
  std::string design(name);
  std::function<double(double)> truth;
  if (auto pos = design.rfind('_'); pos != std::string::npos) {
    const std::string suffix = design.substr(pos + 1);
    if (suffix == "square")
      truth = [](double x) { return x * x; };
    else if (suffix == "sine")
      truth = [](double x) { return std::sin(3.0 * x); };
    else
      throw std::invalid_argument("unknown model '" + std::string(name) + "'");
    design = design.substr(0, pos);
    if (design == "triangular2d" || design == "bump")
      throw std::invalid_argument("unknown model '" + std::string(name) + "'");
  }
  auto spec = detail::design_by_name(design);

  Model model;
  model.name = std::string(name);
  model.dim = spec.dim;
  model.axis_quantile = spec.quantile;
  TruthOracle& o = model.oracle;
  o.dim = spec.dim;
  o.marginal_cdf = spec.cdf;
  o.breakpoints = spec.breakpoints;
  o.lipschitz_const = spec.lipschitz;
  const auto pdf = spec.pdf;
  o.f = [pdf](std::span<const double> x) {
    double v = 1.0;
    for (double xi : x)
      v *= pdf(xi);
    return v;
  };
  const double edge = o.i_hi + o.J_margin;
  o.density_floor_on_J = std::pow(std::min(pdf(edge), pdf(0.0)), static_cast<double>(spec.dim));

  if (!truth) {
    if (regime && regime->kind != RegimeKind::none)
      throw std::invalid_argument("model '" + std::string(name) + "' has no regression truth");
    model.regime = ResponseRegime::none();
    return model;
  }

  model.regime = regime.value_or(ResponseRegime::bounded());
  if (model.regime.kind == RegimeKind::none)
    model.regime = ResponseRegime::bounded();
  o.m = [truth](std::span<const double> x) { return truth(x[0]); };
  ResponseRegime& rr = model.regime;
  // sup |m| over J
  double sup_m = 0.0;
  for (int i = 0; i <= 1000; ++i)
    sup_m = std::max(sup_m, std::abs(truth(-edge + 2.0 * edge * i / 1000.0)));
  if (rr.kind == RegimeKind::bounded) {
    rr.M = sup_m + rr.noise_width;
    const double w = rr.noise_width;
    o.cond_cdf = [truth, w](double t, std::span<const double> x) {
      const double z = t - truth(x[0]);
      if (w == 0.0)
        return z >= 0.0 ? 1.0 : 0.0;
      return std::clamp((z + w) / (2.0 * w), 0.0, 1.0);
    };
  } else {
    // E|m + Z|^p <= 2^{p-1} (|m|^p + E|Z|^p)
    rr.alpha = std::pow(2.0, rr.p - 1.0) * (std::pow(sup_m, rr.p) + lomax_abs_moment(rr.p, rr.tail_index));
    const double a = rr.tail_index;
    o.cond_cdf = [truth, a](double t, std::span<const double> x) {
      const double z = t - truth(x[0]);
      return z >= 0.0 ? 1.0 - 0.5 * std::pow(1.0 + z, -a) : 0.5 * std::pow(1.0 - z, -a);
    };
  }
  return model;
}

inline const TruthOracle& model_truth(const Model& model)
{
  return model.oracle;
}

//! Draws n i.i.d. covariates by inverse CDF. Point i consumes its own
//! substream (seed, replicate, i), so samples are prefix-consistent and
//! independent of how draws are scheduled.
inline Sample draw_density_sample(const Model& model, std::size_t n, std::uint64_t seed, std::uint64_t replicate = 0)
{
  if (n == 0)
    throw std::invalid_argument("draw_density_sample: n must be positive");
  std::vector<double> flat(n * model.dim);
  for (std::size_t i = 0; i < n; ++i) {
    CounterRng rng(seed, tagged(StreamTag::sample, replicate), i);
    for (std::size_t a = 0; a < model.dim; ++a)
      flat[i * model.dim + a] = model.axis_quantile(rng.uniform_open());
  }
  return Sample(model.dim, std::move(flat));
}

//! Draws (X, Y) with Y = m(X) + noise.
inline PairedSample draw_regression_sample(const Model& model, std::size_t n, std::uint64_t seed, std::uint64_t replicate = 0)
{
  if (model.regime.kind == RegimeKind::none || !model.oracle.has_regression())
    throw std::invalid_argument("draw_regression_sample: model '" + model.name + "' has no response regime");
  if (n == 0)
    throw std::invalid_argument("draw_regression_sample: n must be positive");
  std::vector<double> flat(n * model.dim);
  std::vector<double> y(n);
  const auto& rr = model.regime;
  for (std::size_t i = 0; i < n; ++i) {
    CounterRng rng(seed, tagged(StreamTag::sample, replicate), i);
    for (std::size_t a = 0; a < model.dim; ++a)
      flat[i * model.dim + a] = model.axis_quantile(rng.uniform_open());
    const double mx = model.oracle.m(std::span<const double>(&flat[i * model.dim], model.dim));
    double noise = 0.0;
    if (rr.kind == RegimeKind::bounded) {
      noise = rr.noise_width * (2.0 * rng.uniform() - 1.0);
      if (rr.noise_width == 0.0)
        noise = 0.0;
    } else {
      const double u = rng.uniform_open();
      const double magnitude = std::pow(u, -1.0 / rr.tail_index) - 1.0;
      noise = (rng() & 1U) != 0 ? magnitude : -magnitude;
    }
    y[i] = mx + noise;
  }
  return PairedSample(Sample(model.dim, std::move(flat)), std::move(y));
}

//! The oracle translated by `shift`: f_s(x) = f(x - shift), likewise m and F(t|.).
inline TruthOracle translate(const TruthOracle& o, std::span<const double> shift)
{
  if (shift.size() != o.dim)
    throw std::invalid_argument("translate: shift dimension mismatch");
  TruthOracle out = o;
  std::vector<double> s(shift.begin(), shift.end());
  auto moved = [s](std::span<const double> x) {
    std::vector<double> y(x.begin(), x.end());
    for (std::size_t a = 0; a < y.size(); ++a)
      y[a] -= s[a];
    return y;
  };
  out.f = [f = o.f, moved](std::span<const double> x) { return f(moved(x)); };
  if (o.m)
    out.m = [m = o.m, moved](std::span<const double> x) { return m(moved(x)); };
  if (o.cond_cdf)
    out.cond_cdf = [c = o.cond_cdf, moved](double t, std::span<const double> x) { return c(t, moved(x)); };
  // per-axis bookkeeping only tracks a common shift
  const double s0 = s.empty() ? 0.0 : s[0];
  for (auto& b : out.breakpoints)
    b += s0;
  out.support_lo += s0;
  out.support_hi += s0;
  out.i_lo += s0;
  out.i_hi += s0;
  return out;
}

} // namespace ubk
