#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "estimators.hpp"
#include "kernels.hpp"
#include "rng.hpp"
#include "sample.hpp"
#include "stats.hpp"

namespace ubk {

//! g(x, y) for a data point (x in R^d, response y; y = 0 for plain samples).
using ClassMember = std::function<double(std::span<const double>, double)>;

//! Location/bandwidth parameters of one kernel-class member
//! (u, v) -> c * phi(v) * K((x - u)/h^{1/d}).
struct KernelMemberSpec
{
  std::vector<double> x;
  double h = 1.0;
  double c = 1.0;
};

//! A finite function class with a constant envelope bound G = beta.
struct FunctionClassGrid
{
  std::size_t dim = 1;
  std::vector<ClassMember> members;
  double envelope_bound = 0.0;

  // Structured description of kernel classes, used for windowed
  // evaluation on one-dimensional data.
  std::optional<Kernel> kernel;
  std::vector<KernelMemberSpec> kernel_members;
  std::function<double(double)> phi;

  std::size_t size() const { return members.size(); }
};

//! The class {c_phi(x) phi(v) K((x - u)/h^{1/d})} over a grid of locations
//! (flat, dimension kernel.dim()) and bandwidths. `phi_bound` and
//! `c_bound` bound |phi| and |c_phi|; the envelope is their product with kappa.
inline FunctionClassGrid kernel_class(const Kernel& kernel,
                                      std::span<const double> locations,
                                      std::span<const double> bandwidths,
                                      PointFn c_phi = {},
                                      std::function<double(double)> phi = {},
                                      double phi_bound = 1.0,
                                      double c_bound = 1.0)
{
  const std::size_t d = kernel.dim();
  if (locations.empty() || locations.size() % d != 0 || bandwidths.empty())
    throw std::invalid_argument("kernel_class: empty location or bandwidth grid");
  FunctionClassGrid cls;
  cls.dim = d;
  cls.envelope_bound = kernel.constants().kappa * phi_bound * c_bound;
  cls.kernel = kernel;
  cls.phi = phi;
  for (double h : bandwidths) {
    const auto bw = BandwidthSpec::volume(h);
    for (std::size_t i = 0; i < locations.size() / d; ++i) {
      std::vector<double> x(locations.begin() + static_cast<std::ptrdiff_t>(i * d),
                            locations.begin() + static_cast<std::ptrdiff_t>((i + 1) * d));
      const double c = c_phi ? c_phi(x) : 1.0;
      cls.kernel_members.push_back({ x, h, c });
      cls.members.push_back([kernel, x, bw, c, phi](std::span<const double> u, double v) {
        const double k = scaled_evaluate(kernel, x, u, bw);
        if (k == 0.0)
          return 0.0;
        return c * (phi ? phi(v) : 1.0) * k;
      });
    }
  }
  return cls;
}

//! Every member multiplied by lambda; the envelope scales with |lambda|.
inline FunctionClassGrid scaled(const FunctionClassGrid& cls, double lambda)
{
  FunctionClassGrid out = cls;
  out.envelope_bound = cls.envelope_bound * std::abs(lambda);
  for (auto& m : out.members)
    m = [g = m, lambda](std::span<const double> u, double v) { return lambda * g(u, v); };
  for (auto& km : out.kernel_members)
    km.c *= lambda;
  return out;
}

//! Data points (X_i, Y_i) viewed uniformly; plain samples carry Y_i = 0.
struct DataView
{
  const Sample* sample = nullptr;
  std::span<const double> y;

  DataView(const Sample& s)
    : sample(&s)
  {}
  DataView(const PairedSample& ps)
    : sample(&ps.base())
    , y(ps.responses())
  {}

  std::size_t size() const { return sample->size(); }
  double response(std::size_t i) const { return y.empty() ? 0.0 : y[i]; }
};

//! Nonzero values g(Z_i) of every member, row per member.
struct MemberValues
{
  std::vector<std::vector<std::pair<std::uint32_t, double>>> rows;
};

inline MemberValues evaluate_members(DataView data, const FunctionClassGrid& cls)
{
  if (cls.members.empty())
    throw std::invalid_argument("evaluate_members: empty class");
  if (data.sample->dim() != cls.dim)
    throw std::invalid_argument("evaluate_members: data dimension differs from class dimension");
  MemberValues mv;
  mv.rows.resize(cls.members.size());
  const std::size_t n = data.size();
  const bool windowed = cls.dim == 1 && cls.kernel && cls.kernel_members.size() == cls.members.size();
  if (windowed) {
    // sort once, then visit only the kernel window of each member
    std::vector<std::uint32_t> order(n);
    for (std::uint32_t i = 0; i < n; ++i)
      order[i] = i;
    const auto xs_raw = data.sample->flat();
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return xs_raw[a] < xs_raw[b] || (xs_raw[a] == xs_raw[b] && a < b); });
    std::vector<double> xs(n);
    for (std::size_t i = 0; i < n; ++i)
      xs[i] = xs_raw[order[i]];
    const Kernel& kernel = *cls.kernel;
    for (std::size_t m = 0; m < cls.kernel_members.size(); ++m) {
      const auto& km = cls.kernel_members[m];
      const double x = km.x[0];
      const double reach = kernel.support_radius() * km.h * (1.0 + 1e-12) + 1e-300;
      auto lo = std::lower_bound(xs.begin(), xs.end(), x - reach) - xs.begin();
      auto hi = std::upper_bound(xs.begin(), xs.end(), x + reach) - xs.begin();
      auto& row = mv.rows[m];
      for (auto p = lo; p < hi; ++p) {
        const std::uint32_t i = order[static_cast<std::size_t>(p)];
        const double k = scaled_evaluate(kernel, x, xs[static_cast<std::size_t>(p)], km.h);
        if (k == 0.0)
          continue;
        const double g = km.c * (cls.phi ? cls.phi(data.response(i)) : 1.0) * k;
        if (g != 0.0)
          row.emplace_back(i, g);
      }
      std::sort(row.begin(), row.end());
    }
    return mv;
  }
  for (std::size_t m = 0; m < cls.members.size(); ++m)
    for (std::uint32_t i = 0; i < n; ++i) {
      const double g = cls.members[m](data.sample->point(i), data.response(i));
      if (g != 0.0)
        mv.rows[m].emplace_back(i, g);
    }
  return mv;
}

//! Rademacher signs for one draw, from the draw's own substream.
inline std::vector<signed char> rademacher_signs(std::uint64_t seed, std::uint64_t draw, std::size_t n)
{
  CounterRng rng(seed, tagged(StreamTag::rademacher, draw));
  std::vector<signed char> eps(n);
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i % 64 == 0)
      bits = rng();
    eps[i] = (bits & 1U) != 0 ? 1 : -1;
    bits >>= 1;
  }
  return eps;
}

//! Monte Carlo estimate of E max_g |sum_i eps_i g(Z_i)| over `draws`
//! Rademacher vectors, from precomputed member values on n points. Draw d
//! uses substream d, so the value depends only on (values, draws, seed).
inline double rademacher_sup(const MemberValues& mv, std::size_t n, std::size_t draws, std::uint64_t seed)
{
  if (draws == 0)
    throw std::invalid_argument("rademacher_sup: draws must be positive");
  double total = 0.0;
  for (std::size_t d = 0; d < draws; ++d) {
    const auto eps = rademacher_signs(seed, d, n);
    double best = 0.0;
    for (const auto& row : mv.rows) {
      double s = 0.0;
      for (const auto& [i, g] : row)
        s += eps[i] > 0 ? g : -g;
      best = std::max(best, std::abs(s));
    }
    total += best;
  }
  return total / static_cast<double>(draws);
}

inline double rademacher_sup(DataView data, const FunctionClassGrid& cls, std::size_t draws, std::uint64_t seed)
{
  if (draws == 0)
    throw std::invalid_argument("rademacher_sup: draws must be positive");
  return rademacher_sup(evaluate_members(data, cls), data.size(), draws, seed);
}

struct VarianceEnvelope
{
  double sigma0_sq = 0.0;
  double beta_sq = 0.0;
  double U = 0.0;
};

//! Empirical second moments of the class on n points from precomputed values.
inline VarianceEnvelope variance_envelope(const MemberValues& mv, std::size_t n, double envelope_bound)
{
  VarianceEnvelope out;
  out.beta_sq = envelope_bound * envelope_bound;
  for (const auto& row : mv.rows) {
    double sq = 0.0;
    for (const auto& [i, g] : row) {
      sq += g * g;
      out.U = std::max(out.U, std::abs(g));
    }
    out.sigma0_sq = std::max(out.sigma0_sq, sq / static_cast<double>(n));
  }
  return out;
}

inline VarianceEnvelope variance_envelope(DataView data, const FunctionClassGrid& cls)
{
  return variance_envelope(evaluate_members(data, cls), data.size(), cls.envelope_bound);
}

//! One atom of a discrete probability measure Q.
struct WeightedAtom
{
  std::vector<double> x;
  double y = 0.0;
  double weight = 0.0;
};

//! Uniform weights over the points of a sample.
inline std::vector<WeightedAtom> uniform_atoms(const Sample& sample)
{
  std::vector<WeightedAtom> atoms;
  const double w = 1.0 / static_cast<double>(sample.size());
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const auto p = sample.point(i);
    atoms.push_back({ std::vector<double>(p.begin(), p.end()), 0.0, w });
  }
  return atoms;
}

namespace detail {

struct QEmbedding
{
  std::vector<std::vector<double>> values; // member x atom
  std::vector<double> weights;
};

inline QEmbedding embed(const FunctionClassGrid& cls, std::span<const WeightedAtom> atoms)
{
  if (cls.members.empty())
    throw std::invalid_argument("covering_number: empty class");
  if (atoms.empty())
    throw std::invalid_argument("covering_number: no atoms");
  double total = 0.0;
  for (const auto& a : atoms) {
    if (a.weight < 0.0)
      throw std::invalid_argument("covering_number: negative atom weight");
    total += a.weight;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("covering_number: atom weights must sum to 1");
  QEmbedding e;
  for (const auto& a : atoms)
    e.weights.push_back(a.weight);
  e.values.resize(cls.members.size());
  for (std::size_t m = 0; m < cls.members.size(); ++m)
    for (const auto& a : atoms)
      e.values[m].push_back(cls.members[m](a.x, a.y));
  return e;
}

inline double q_distance(const QEmbedding& e, std::size_t a, std::size_t b)
{
  double s = 0.0;
  for (std::size_t j = 0; j < e.weights.size(); ++j) {
    const double diff = e.values[a][j] - e.values[b][j];
    s += e.weights[j] * diff * diff;
  }
  return std::sqrt(s);
}

} // namespace detail

//! L2(Q) distance matrix between class members.
inline std::vector<std::vector<double>> q_distances(const FunctionClassGrid& cls, std::span<const WeightedAtom> atoms)
{
  const auto e = detail::embed(cls, atoms);
  const std::size_t m = cls.members.size();
  std::vector<std::vector<double>> dist(m, std::vector<double>(m, 0.0));
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a + 1; b < m; ++b)
      dist[a][b] = dist[b][a] = detail::q_distance(e, a, b);
  return dist;
}

//! Farthest-point cover: centers are added until every member lies within
//! `radius` of one. The centers are pairwise more than `radius` apart.
inline std::size_t greedy_cover_count(const std::vector<std::vector<double>>& dist, double radius)
{
  const std::size_t m = dist.size();
  if (m == 0)
    return 0;
  std::vector<double> nearest = dist[0];
  std::size_t count = 1;
  while (true) {
    std::size_t far = 0;
    for (std::size_t i = 1; i < m; ++i)
      if (nearest[i] > nearest[far])
        far = i;
    if (nearest[far] <= radius)
      return count;
    ++count;
    for (std::size_t i = 0; i < m; ++i)
      nearest[i] = std::min(nearest[i], dist[far][i]);
  }
}

//! Smallest number of closed balls of `radius`, centred at members, that
//! cover all members. Exhaustive over center subsets; only for small classes.
inline std::size_t exact_cover_count(const std::vector<std::vector<double>>& dist, double radius)
{
  const std::size_t m = dist.size();
  if (m == 0)
    return 0;
  if (m > 20)
    throw std::invalid_argument("exact_cover_count: class too large for exhaustive search");
  std::vector<std::uint32_t> reach(m, 0);
  for (std::size_t c = 0; c < m; ++c)
    for (std::size_t i = 0; i < m; ++i)
      if (dist[c][i] <= radius)
        reach[c] |= 1U << i;
  const std::uint32_t all = (m == 32) ? ~0U : ((1U << m) - 1U);
  std::size_t best = m;
  for (std::uint32_t subset = 1; subset <= all; ++subset) {
    const auto size = static_cast<std::size_t>(std::popcount(subset));
    if (size >= best)
      continue;
    std::uint32_t covered = 0;
    for (std::size_t c = 0; c < m; ++c)
      if ((subset >> c) & 1U)
        covered |= reach[c];
    if (covered == all)
      best = size;
  }
  return best;
}

inline constexpr std::size_t kExactCoverLimit = 12;

//! Covering number of the class in L2(Q) at radius kappa * epsilon, where
//! kappa is the class envelope constant. Exhaustive for classes of at most
//! 12 members, farthest-point greedy (an upper bound) above that.
inline std::size_t covering_number(const FunctionClassGrid& cls, std::span<const WeightedAtom> atoms, double epsilon)
{
  if (!(epsilon > 0.0))
    throw std::invalid_argument("covering_number: epsilon must be positive");
  const auto dist = q_distances(cls, atoms);
  const double radius = cls.envelope_bound * epsilon;
  if (dist.size() <= kExactCoverLimit)
    return exact_cover_count(dist, radius);
  return greedy_cover_count(dist, radius);
}

//! Counts for several epsilons from a single distance matrix.
inline std::vector<std::size_t> covering_curve(const FunctionClassGrid& cls,
                                               std::span<const WeightedAtom> atoms,
                                               std::span<const double> epsilons)
{
  const auto dist = q_distances(cls, atoms);
  std::vector<std::size_t> out;
  for (double eps : epsilons) {
    if (!(eps > 0.0))
      throw std::invalid_argument("covering_curve: epsilon must be positive");
    const double radius = cls.envelope_bound * eps;
    out.push_back(dist.size() <= kExactCoverLimit ? exact_cover_count(dist, radius) : greedy_cover_count(dist, radius));
  }
  return out;
}

inline double class_diameter(const FunctionClassGrid& cls, std::span<const WeightedAtom> atoms)
{
  double diam = 0.0;
  for (const auto& row : q_distances(cls, atoms))
    for (double v : row)
      diam = std::max(diam, v);
  return diam;
}

struct EntropyFit
{
  double C_hat = 1.0;
  double nu_hat = 0.0;
  std::optional<double> r_squared;
};

//! Least-squares fit of log N against log(1/eps).
inline EntropyFit entropy_fit(std::span<const std::pair<double, std::size_t>> curve)
{
  if (curve.size() < 4)
    throw std::invalid_argument("entropy_fit: need at least four points");
  std::vector<double> lx, ly;
  for (const auto& [eps, count] : curve) {
    if (!(eps > 0.0 && eps < 1.0))
      throw std::invalid_argument("entropy_fit: epsilon outside (0, 1)");
    if (count < 1)
      throw std::invalid_argument("entropy_fit: counts must be at least 1");
    lx.push_back(std::log(1.0 / eps));
    ly.push_back(std::log(static_cast<double>(count)));
  }
  EntropyFit out;
  if (std::all_of(curve.begin(), curve.end(), [&](const auto& p) { return p.second == curve.front().second; })) {
    out.nu_hat = 0.0;
    out.C_hat = static_cast<double>(curve.front().second);
    return out;
  }
  const auto fit = linear_fit(lx, ly);
  out.nu_hat = fit.slope;
  out.C_hat = std::exp(fit.intercept);
  out.r_squared = fit.r_squared;
  return out;
}

//! Scaling form of the symmetrised-supremum bound:
//! R ~ c1 sqrt(n h log(max(1/h, e))) + c2 log n.
struct ComplexityPoint
{
  std::size_t n = 0;
  double h = 0.0;
  double rademacher_sup = 0.0;
};

inline TwoFeatureFit complexity_shape_fit(std::span<const ComplexityPoint> points)
{
  std::vector<double> u, v, y;
  for (const auto& p : points) {
    const double nd = static_cast<double>(p.n);
    u.push_back(std::sqrt(nd * p.h * std::log(std::max(1.0 / p.h, std::numbers::e))));
    v.push_back(std::log(nd));
    y.push_back(p.rademacher_sup);
  }
  return two_feature_fit(u, v, y);
}

} // namespace ubk
