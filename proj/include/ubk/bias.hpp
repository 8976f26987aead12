#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "estimators.hpp"
#include "kernels.hpp"
#include "models.hpp"
#include "stats.hpp"

namespace ubk {

//! (f * K_h)(x) = h^{-1} integral f(u) K((x - u)/h^{1/d}) du by quadrature.
inline double convolve(const TruthOracle& oracle, const Kernel& kernel, const BandwidthSpec& bw, std::span<const double> x)
{
  const double v = Smoother(oracle, kernel, bw, x).f_bar();
  if (!std::isfinite(v))
    throw std::runtime_error("convolve: quadrature did not converge");
  return v;
}

//! max over the grid (flat, dimension oracle.dim) of |f * K_h - f|.
inline double bias_sup(const TruthOracle& oracle, const Kernel& kernel, const BandwidthSpec& bw, std::span<const double> grid)
{
  const std::size_t d = oracle.dim;
  if (grid.empty() || grid.size() % d != 0)
    throw std::invalid_argument("bias_sup: empty grid");
  double sup = 0.0;
  for (std::size_t i = 0; i < grid.size() / d; ++i) {
    const auto pt = grid.subspan(i * d, d);
    sup = std::max(sup, std::abs(convolve(oracle, kernel, bw, pt) - oracle.f(pt)));
  }
  return sup;
}

//! Bias at or below this level counts as zero (quadrature round-off).
inline constexpr double kZeroBias = 1e-12;

struct BiasRow
{
  double h = 0.0;
  double sup_bias = 0.0;
  bool zero = false; // excluded from the fit
};

struct BiasCurve
{
  std::vector<BiasRow> rows;
  std::optional<LinearFit> slope_fit; // log sup_bias on log h; empty when refused

  void write_csv(std::ostream& os) const
  {
    os << "h,sup_bias\n";
    for (const auto& r : rows)
      os << r.h << ',' << r.sup_bias << '\n';
  }
};

//! Sup-bias over the grid for each bandwidth and the log-log slope.
//! Rows with zero bias are flagged and left out; with fewer than two
//! usable rows the fit is refused.
inline BiasCurve bias_rate_fit(const TruthOracle& oracle,
                               const Kernel& kernel,
                               std::span<const double> h_list,
                               std::span<const double> grid)
{
  if (h_list.size() < 4)
    throw std::invalid_argument("bias_rate_fit: need at least four bandwidths");
  for (std::size_t i = 1; i < h_list.size(); ++i)
    if (!(h_list[i] > h_list[i - 1]))
      throw std::invalid_argument("bias_rate_fit: bandwidths must be strictly increasing");
  BiasCurve curve;
  std::vector<double> lx, ly;
  for (double h : h_list) {
    BiasRow row;
    row.h = h;
    row.sup_bias = bias_sup(oracle, kernel, BandwidthSpec::volume(h), grid);
    row.zero = row.sup_bias <= kZeroBias;
    if (!row.zero) {
      lx.push_back(std::log(h));
      ly.push_back(std::log(row.sup_bias));
    }
    curve.rows.push_back(row);
  }
  if (lx.size() >= 2)
    curve.slope_fit = linear_fit(lx, ly);
  return curve;
}

} // namespace ubk
