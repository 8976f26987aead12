#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

namespace ubk {

//! Nodes and weights of a one-dimensional quadrature rule.
struct Rule1d
{
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
};

namespace detail {

inline constexpr std::size_t kGaussPoints = 8;

inline const std::array<std::pair<double, double>, kGaussPoints>& gauss_reference()
{
  static const auto rule = [] {
    using gauss = boost::math::quadrature::gauss<double, kGaussPoints>;
    std::array<std::pair<double, double>, kGaussPoints> out{};
    const auto& x = gauss::abscissa();
    const auto& w = gauss::weights();
    std::size_t k = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      out[k++] = { -x[i], w[i] };
      out[k++] = { x[i], w[i] };
    }
    std::sort(out.begin(), out.end());
    return out;
  }();
  return rule;
}

} // namespace detail

//! Composite 8-point Gauss-Legendre rule on [a, b].
//!
//! The interval is first cut at every breakpoint inside (a, b); each piece
//! then gets panels in proportion to its length, roughly `total_nodes` nodes
//! overall. With breakpoints at every kink of a piecewise polynomial
//! integrand of degree < 16 the rule is exact up to rounding.
inline Rule1d composite_gauss(double a,
                              double b,
                              std::span<const double> breakpoints,
                              std::size_t total_nodes)
{
  if (!(b > a))
    throw std::invalid_argument("composite_gauss: empty interval");
  std::vector<double> cuts{ a };
  for (double p : breakpoints)
    if (p > a && p < b)
      cuts.push_back(p);
  cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  const double panels_total =
    std::max(1.0, static_cast<double>(total_nodes) / detail::kGaussPoints);
  const auto& ref = detail::gauss_reference();
  Rule1d rule;
  rule.nodes.reserve(total_nodes + 16 * cuts.size());
  rule.weights.reserve(total_nodes + 16 * cuts.size());
  for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
    const double lo = cuts[p];
    const double hi = cuts[p + 1];
    const auto panels = static_cast<std::size_t>(
      std::max(1.0, std::round(panels_total * (hi - lo) / (b - a))));
    const double width = (hi - lo) / static_cast<double>(panels);
    for (std::size_t q = 0; q < panels; ++q) {
      const double left = lo + width * static_cast<double>(q);
      const double mid = left + 0.5 * width;
      for (const auto& [x, w] : ref) {
        rule.nodes.push_back(mid + 0.5 * width * x);
        rule.weights.push_back(0.5 * width * w);
      }
    }
  }
  return rule;
}

//! Tensor-product integral of `f` over the rules, one rule per axis.
//! `f` receives the current point as `std::span<const double>`.
template <class Fn>
double integrate_tensor(std::span<const Rule1d> rules, Fn&& f)
{
  const std::size_t d = rules.size();
  if (d == 0)
    throw std::invalid_argument("integrate_tensor: no axes");
  for (const auto& r : rules)
    if (r.size() == 0)
      return 0.0;
  std::vector<std::size_t> idx(d, 0);
  std::vector<double> point(d);
  double total = 0.0;
  while (true) {
    double w = 1.0;
    for (std::size_t a = 0; a < d; ++a) {
      point[a] = rules[a].nodes[idx[a]];
      w *= rules[a].weights[idx[a]];
    }
    total += w * f(std::span<const double>(point));
    std::size_t a = 0;
    while (a < d && ++idx[a] == rules[a].size()) {
      idx[a] = 0;
      ++a;
    }
    if (a == d)
      break;
  }
  return total;
}

} // namespace ubk
