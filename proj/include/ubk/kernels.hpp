#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "quadrature.hpp"

namespace ubk {

enum class KernelShape
{
  box,
  triangular,
  epanechnikov,
  quartic,
  custom
};

//! Regularity metadata: sup-norm, squared L2 norm, max-norm support
//! half-width and the integral of the radial envelope
//! Psi_K(x) = sup_{|y| >= |x|} |K(y)|.
struct KernelConstants
{
  double kappa = 0.0;
  double l2_norm_sq = 0.0;
  double support_radius = 0.0;
  double psi_integral = 0.0;
};

//! Asserted uniform entropy parameters: N(eps) <= C eps^-nu on (0, 1).
struct EntropyParams
{
  double C = 0.0;
  double nu = 0.0;
};

namespace detail {

inline double builtin_profile(KernelShape shape, double u)
{
  const double a = std::abs(u);
  if (a > 0.5)
    return 0.0;
  switch (shape) {
    case KernelShape::box:
      return 1.0;
    case KernelShape::triangular:
      return 2.0 * (1.0 - 2.0 * a);
    case KernelShape::epanechnikov:
      return 1.5 * (1.0 - 4.0 * u * u);
    case KernelShape::quartic: {
      const double t = 1.0 - 4.0 * u * u;
      return 1.875 * t * t;
    }
    case KernelShape::custom:
      break;
  }
  return 0.0;
}

struct ProfileConstants
{
  double kappa;
  double l2_norm_sq;
};

inline ProfileConstants builtin_profile_constants(KernelShape shape)
{
  switch (shape) {
    case KernelShape::box:
      return { 1.0, 1.0 };
    case KernelShape::triangular:
      return { 2.0, 4.0 / 3.0 };
    case KernelShape::epanechnikov:
      return { 1.5, 1.2 };
    case KernelShape::quartic:
      return { 1.875, 10.0 / 7.0 };
    case KernelShape::custom:
      break;
  }
  throw std::invalid_argument("builtin_profile_constants: custom kernel");
}

} // namespace detail

//! A d-variate kernel together with its regularity metadata.
//!
//! Built-ins are products of a one-dimensional profile supported on the
//! closed interval [-1/2, 1/2]; the boundary is evaluated by the formula.
//! Values are immutable after construction.
class Kernel
{
public:
  using Fn = std::function<double(std::span<const double>)>;

  static Kernel builtin(KernelShape shape, std::size_t dim = 1);

  //! A user-defined kernel. `breakpoints` lists per-axis kinks (inside the
  //! support) that quadrature should not straddle.
  static Kernel custom(std::string name,
                       std::size_t dim,
                       Fn fn,
                       KernelConstants constants,
                       EntropyParams entropy = {},
                       std::vector<double> breakpoints = {})
  {
    if (dim == 0)
      throw std::invalid_argument("Kernel::custom: dimension must be positive");
    if (!fn)
      throw std::invalid_argument("Kernel::custom: empty evaluation function");
    Kernel k;
    k.shape_ = KernelShape::custom;
    k.name_ = std::move(name);
    k.dim_ = dim;
    k.fn_ = std::move(fn);
    k.constants_ = constants;
    k.entropy_ = entropy;
    const double r = constants.support_radius;
    k.breakpoints_ = { -r, r };
    for (double b : breakpoints)
      k.breakpoints_.push_back(b);
    std::sort(k.breakpoints_.begin(), k.breakpoints_.end());
    return k;
  }

  std::size_t dim() const { return dim_; }
  const std::string& name() const { return name_; }
  KernelShape shape() const { return shape_; }
  bool is_builtin() const { return shape_ != KernelShape::custom; }
  const KernelConstants& constants() const { return constants_; }
  const EntropyParams& entropy() const { return entropy_; }
  double support_radius() const { return constants_.support_radius; }

  //! Per-axis points where the kernel is not smooth, including the support ends.
  std::span<const double> breakpoints() const { return breakpoints_; }

  double operator()(std::span<const double> u) const
  {
    if (u.size() != dim_)
      throw std::invalid_argument("Kernel: argument dimension mismatch");
    if (shape_ == KernelShape::custom)
      return fn_(u);
    double v = 1.0;
    for (double ui : u) {
      v *= detail::builtin_profile(shape_, ui);
      if (v == 0.0)
        return 0.0;
    }
    return v;
  }

  //! One-dimensional factor of a built-in product kernel; for a custom
  //! one-dimensional kernel this is the kernel itself.
  double profile(double u) const
  {
    if (shape_ != KernelShape::custom)
      return detail::builtin_profile(shape_, u);
    if (dim_ != 1)
      throw std::logic_error("Kernel::profile: custom kernel is not a product form");
    return fn_(std::span<const double>(&u, 1));
  }

private:
  Kernel() = default;

  KernelShape shape_ = KernelShape::box;
  std::string name_;
  std::size_t dim_ = 1;
  Fn fn_;
  KernelConstants constants_;
  EntropyParams entropy_;
  std::vector<double> breakpoints_;
};

//! Per-axis scale of a volume bandwidth h in dimension d, i.e. h^{1/d}.
inline double volume_scale(double h, std::size_t dim)
{
  if (dim == 1)
    return h;
  if (dim == 2)
    return std::sqrt(h);
  return std::pow(h, 1.0 / static_cast<double>(dim));
}

//! Volume bandwidth h, optionally given as per-axis widths whose product is h.
class BandwidthSpec
{
public:
  static BandwidthSpec volume(double h)
  {
    if (!(h > 0.0) || !std::isfinite(h))
      throw std::invalid_argument("BandwidthSpec: bandwidth must be positive and finite");
    BandwidthSpec b;
    b.h_ = h;
    return b;
  }

  static BandwidthSpec per_axis(std::vector<double> widths)
  {
    if (widths.empty())
      throw std::invalid_argument("BandwidthSpec: no per-axis widths");
    double h = 1.0;
    for (double w : widths) {
      if (!(w > 0.0) || !std::isfinite(w))
        throw std::invalid_argument("BandwidthSpec: per-axis widths must be positive");
      h *= w;
    }
    BandwidthSpec b;
    b.h_ = h;
    b.per_axis_ = std::move(widths);
    return b;
  }

  double h() const { return h_; }
  bool is_vector() const { return !per_axis_.empty(); }
  std::span<const double> widths() const { return per_axis_; }

  double axis_scale(std::size_t axis, std::size_t dim) const
  {
    if (!per_axis_.empty()) {
      if (per_axis_.size() != dim)
        throw std::invalid_argument("BandwidthSpec: per-axis width count does not match dimension");
      return per_axis_[axis];
    }
    return volume_scale(h_, dim);
  }

private:
  double h_ = 1.0;
  std::vector<double> per_axis_;
};

namespace detail {

inline constexpr std::size_t kInlineDims = 8;

template <class Fn>
decltype(auto) with_buffer(std::size_t dim, Fn&& fn)
{
  if (dim <= kInlineDims) {
    std::array<double, kInlineDims> buf{};
    return fn(std::span<double>(buf.data(), dim));
  }
  std::vector<double> buf(dim);
  return fn(std::span<double>(buf));
}

} // namespace detail

//! K applied to (x - xi) scaled per axis by h^{1/d} or by the vector widths.
inline double scaled_evaluate(const Kernel& kernel,
                              std::span<const double> x,
                              std::span<const double> xi,
                              const BandwidthSpec& bw)
{
  const std::size_t d = kernel.dim();
  if (x.size() != d || xi.size() != d)
    throw std::invalid_argument("scaled_evaluate: dimension mismatch");
  if (bw.is_vector() && bw.widths().size() != d)
    throw std::invalid_argument("scaled_evaluate: bandwidth dimension mismatch");
  return detail::with_buffer(d, [&](std::span<double> u) {
    for (std::size_t a = 0; a < d; ++a)
      u[a] = (x[a] - xi[a]) / bw.axis_scale(a, d);
    return kernel(std::span<const double>(u.data(), u.size()));
  });
}

inline double scaled_evaluate(const Kernel& kernel, double x, double xi, double h)
{
  const double pt[1] = { x };
  const double c[1] = { xi };
  return scaled_evaluate(kernel, pt, c, BandwidthSpec::volume(h));
}

inline const KernelConstants& kernel_constants(const Kernel& kernel)
{
  return kernel.constants();
}

//! Numerical integral of the radial envelope Psi_K over R^d.
//!
//! Psi is sampled on a radial grid out to the Euclidean radius of the
//! support cube; on each shell the max over a set of directions is taken,
//! then a running max from the outside in realises the sup over |y| >= r.
inline double measure_psi_integral(const Kernel& kernel, std::size_t radial_nodes = 4096)
{
  const std::size_t d = kernel.dim();
  const double reach = kernel.support_radius() * std::sqrt(static_cast<double>(d)) * 1.0001;
  std::vector<std::vector<double>> dirs;
  if (d == 1) {
    dirs = { { 1.0 }, { -1.0 } };
  } else if (d == 2) {
    const std::size_t m = 1440;
    for (std::size_t i = 0; i < m; ++i) {
      const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(m);
      dirs.push_back({ std::cos(a), std::sin(a) });
    }
  } else {
    // quasi-random directions from normalised low-discrepancy points
    const std::size_t m = 4096;
    for (std::size_t i = 0; i < m; ++i) {
      std::vector<double> v(d);
      double norm = 0.0;
      for (std::size_t a = 0; a < d; ++a) {
        const double frac = std::fmod(static_cast<double>(i + 1) * std::sqrt(2.0 + static_cast<double>(a) * 3.0), 1.0);
        v[a] = 2.0 * frac - 1.0;
        norm += v[a] * v[a];
      }
      norm = std::sqrt(norm);
      if (norm == 0.0)
        continue;
      for (auto& x : v)
        x /= norm;
      dirs.push_back(std::move(v));
    }
  }

  const double dr = reach / static_cast<double>(radial_nodes);
  std::vector<double> shell_max(radial_nodes, 0.0);
  std::vector<double> point(d);
  for (std::size_t i = 0; i < radial_nodes; ++i) {
    const double r = (static_cast<double>(i) + 0.5) * dr;
    double best = 0.0;
    for (const auto& dir : dirs) {
      for (std::size_t a = 0; a < d; ++a)
        point[a] = r * dir[a];
      best = std::max(best, std::abs(kernel(point)));
    }
    shell_max[i] = best;
  }
  const double sphere = 2.0 * std::pow(std::numbers::pi, 0.5 * static_cast<double>(d)) /
                        std::tgamma(0.5 * static_cast<double>(d));
  double running = 0.0;
  double total = 0.0;
  for (std::size_t i = radial_nodes; i-- > 0;) {
    running = std::max(running, shell_max[i]);
    const double r = (static_cast<double>(i) + 0.5) * dr;
    total += running * sphere * std::pow(r, static_cast<double>(d) - 1.0) * dr;
  }
  return total;
}

inline Kernel Kernel::builtin(KernelShape shape, std::size_t dim)
{
  if (shape == KernelShape::custom)
    throw std::invalid_argument("Kernel::builtin: custom is not a built-in shape");
  if (dim == 0)
    throw std::invalid_argument("Kernel::builtin: dimension must be positive");
  Kernel k;
  k.shape_ = shape;
  k.dim_ = dim;
  switch (shape) {
    case KernelShape::box:
      k.name_ = "box";
      k.breakpoints_ = { -0.5, 0.5 };
      break;
    case KernelShape::triangular:
      k.name_ = "triangular";
      k.breakpoints_ = { -0.5, 0.0, 0.5 };
      break;
    case KernelShape::epanechnikov:
      k.name_ = "epanechnikov";
      k.breakpoints_ = { -0.5, 0.5 };
      break;
    case KernelShape::quartic:
      k.name_ = "quartic";
      k.breakpoints_ = { -0.5, 0.5 };
      break;
    case KernelShape::custom:
      break;
  }
  const auto pc = detail::builtin_profile_constants(shape);
  const double dd = static_cast<double>(dim);
  k.constants_.kappa = std::pow(pc.kappa, dd);
  k.constants_.l2_norm_sq = std::pow(pc.l2_norm_sq, dd);
  k.constants_.support_radius = 0.5;
  // every built-in profile is symmetric and nonincreasing in |u|, so in one
  // dimension Psi_K = K
  k.constants_.psi_integral = 1.0;
  // polynomial-profile classes: VC-type bound with two parameters (location,
  // scale) per axis
  k.entropy_ = { std::pow(16.0, dd), 4.0 * dd };
  if (dim > 1)
    k.constants_.psi_integral = measure_psi_integral(k);
  return k;
}

inline Kernel kernel_by_name(std::string_view name, std::size_t dim = 1)
{
  if (name == "box")
    return Kernel::builtin(KernelShape::box, dim);
  if (name == "triangular")
    return Kernel::builtin(KernelShape::triangular, dim);
  if (name == "epanechnikov")
    return Kernel::builtin(KernelShape::epanechnikov, dim);
  if (name == "quartic")
    return Kernel::builtin(KernelShape::quartic, dim);
  throw std::invalid_argument("unknown kernel '" + std::string(name) + "'");
}

//! One line of a regularity report.
struct RegularityCheck
{
  std::string condition;
  bool passed = false;
  bool asserted = false; // true when not measurable, only asserted by construction
  double measured = std::numeric_limits<double>::quiet_NaN();
  double expected = std::numeric_limits<double>::quiet_NaN();
  std::string note;
};

struct RegularityReport
{
  std::vector<RegularityCheck> checks;

  bool all_passed() const
  {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
  }

  const RegularityCheck& at(std::string_view condition) const
  {
    for (const auto& c : checks)
      if (c.condition == condition)
        return c;
    throw std::out_of_range("RegularityReport: no check named " + std::string(condition));
  }
};

inline constexpr double kRegularityTolerance = 1e-8;

//! Numerical check of normalisation (K.i), boundedness (K.ii), the compact
//! support claim and envelope integrability (K.v). Entropy (K.iii) and
//! pointwise measurability (K.iv) are reported as asserted.
inline RegularityReport validate_regularity(const Kernel& kernel)
{
  RegularityReport report;
  const std::size_t d = kernel.dim();
  const double r = kernel.support_radius();
  const auto& kc = kernel.constants();

  // (K.i): composite Gauss-Legendre split at the kernel's kinks
  {
    RegularityCheck c;
    c.condition = "K.i";
    c.expected = 1.0;
    std::size_t nodes = 4096;
    if (d > 2)
      nodes = std::max<std::size_t>(16, static_cast<std::size_t>(std::pow(1 << 24, 1.0 / static_cast<double>(d))));
    std::vector<Rule1d> rules(d, composite_gauss(-r, r, kernel.breakpoints(), nodes));
    double integral = std::numeric_limits<double>::quiet_NaN();
    double abs_integral = std::numeric_limits<double>::quiet_NaN();
    try {
      integral = integrate_tensor(std::span<const Rule1d>(rules), [&](std::span<const double> u) { return kernel(u); });
      abs_integral = integrate_tensor(std::span<const Rule1d>(rules),
                                      [&](std::span<const double> u) { return std::abs(kernel(u)); });
    } catch (const std::exception& e) {
      c.note = std::string("quadrature failed: ") + e.what();
    }
    c.measured = integral;
    if (!std::isfinite(integral)) {
      if (c.note.empty())
        c.note = "quadrature did not converge";
    } else {
      c.passed = std::abs(integral - 1.0) <= kRegularityTolerance;
      if (!c.passed)
        c.note = "kernel does not integrate to one";
    }
    report.checks.push_back(c);

    // (K.v) reuses the L1 norm as its lower bound
    RegularityCheck v;
    v.condition = "K.v";
    v.expected = kc.psi_integral;
    v.measured = measure_psi_integral(kernel);
    const bool finite = std::isfinite(v.measured) && std::isfinite(kc.psi_integral);
    const bool dominates = finite && std::isfinite(abs_integral) && kc.psi_integral >= abs_integral - 1e-6;
    const bool consistent = finite && std::abs(v.measured - kc.psi_integral) <= 1e-3 * std::max(1.0, kc.psi_integral);
    v.passed = dominates && consistent;
    if (!finite)
      v.note = "envelope integral not finite";
    else if (!dominates)
      v.note = "envelope integral below the L1 norm";
    else if (!consistent)
      v.note = "stored envelope integral disagrees with measurement";

    // (K.ii): sup over a grid that contains 0 and the support boundary
    RegularityCheck s;
    s.condition = "K.ii";
    s.expected = kc.kappa;
    const std::size_t per_axis = d == 1 ? 4097 : (d == 2 ? 1025 : 33);
    std::vector<double> axis(per_axis);
    for (std::size_t i = 0; i < per_axis; ++i)
      axis[i] = -r + 2.0 * r * static_cast<double>(i) / static_cast<double>(per_axis - 1);
    Rule1d grid{ axis, std::vector<double>(per_axis, 1.0) };
    std::vector<Rule1d> grids(d, grid);
    double sup = 0.0;
    integrate_tensor(std::span<const Rule1d>(grids), [&](std::span<const double> u) {
      sup = std::max(sup, std::abs(kernel(u)));
      return 0.0;
    });
    s.measured = sup;
    s.passed = std::isfinite(sup) && std::isfinite(kc.kappa) &&
               std::abs(sup - kc.kappa) <= 1e-6 * std::max(1.0, kc.kappa);
    if (!s.passed)
      s.note = "grid sup differs from stored kappa";
    report.checks.push_back(s);

    // support: zero just outside [-r, r]^d on every axis
    RegularityCheck sp;
    sp.condition = "support";
    sp.expected = 0.0;
    double outside = 0.0;
    std::vector<double> u(d, 0.0);
    for (std::size_t a = 0; a < d; ++a) {
      for (double off : { r * (1.0 + 1e-9), r * 1.01, r * 1.5, r * 3.0 }) {
        for (double sign : { -1.0, 1.0 }) {
          std::fill(u.begin(), u.end(), 0.0);
          u[a] = sign * off;
          outside = std::max(outside, std::abs(kernel(u)));
        }
      }
    }
    sp.measured = outside;
    sp.passed = outside == 0.0;
    if (!sp.passed)
      sp.note = "nonzero outside the declared support";
    report.checks.push_back(sp);
    report.checks.push_back(v);
  }

  RegularityCheck e;
  e.condition = "K.iii";
  e.asserted = true;
  e.passed = kernel.entropy().C > 0.0 && kernel.entropy().nu > 0.0;
  e.note = e.passed ? "asserted: polynomial profile of bounded variation" : "no entropy parameters declared";
  report.checks.push_back(e);

  RegularityCheck m;
  m.condition = "K.iv";
  m.asserted = true;
  m.passed = true;
  m.note = "asserted: right-continuous evaluation";
  report.checks.push_back(m);
  return report;
}

} // namespace ubk
