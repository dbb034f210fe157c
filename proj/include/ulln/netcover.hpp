// Copyright 2026 The ulln Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Covering nets of parameter boxes, covering-number constants, the shrinking
// radius schedule r_n = (eps / n^(1-1/p))^(1/a), Holder modulus estimation,
// and the oscillation modulus
//
//   eta(theta, x, r) = sup_{theta' in B_r(theta)}
//       |(H(theta, x) - mu(theta)) - (H(theta', x) - mu(theta'))|.
//
// The metric is Euclidean throughout.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ulln/error.hpp"
#include "ulln/family.hpp"
#include "ulln/rng.hpp"
#include "ulln/stats.hpp"

namespace ulln {

struct ParameterNet {
  int dim = 1;
  std::vector<double> centers;  // row-major, dim values per center
  double radius = 0.0;

  std::size_t size() const { return dim > 0 ? centers.size() / static_cast<std::size_t>(dim) : 0; }
  std::span<const double> center(std::size_t i) const {
    return {centers.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
  }

  static ParameterNet from_points(int dim, std::vector<double> points, double radius) {
    if (dim < 1 || points.size() % static_cast<std::size_t>(dim) != 0)
      throw InvalidParameter("point list does not match the dimension");
    return {dim, std::move(points), radius};
  }

  // CSV: one row per center, coordinates then radius.
  std::string to_csv() const {
    std::ostringstream os;
    os.precision(17);
    for (int k = 0; k < dim; ++k) os << "theta" << k + 1 << ',';
    os << "radius\n";
    for (std::size_t i = 0; i < size(); ++i) {
      for (double v : center(i)) os << v << ',';
      os << radius << '\n';
    }
    return os.str();
  }
};

inline double euclidean(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

namespace detail {

// Per-axis center count ceil(L sqrt(D) / (2 r)); the relative guard keeps
// exact ratios such as L / s = 50 from rounding up to 51.
inline std::int64_t axis_count(double length, int dim, double r) {
  if (length <= 0.0) return 1;
  const double ratio = length * std::sqrt(static_cast<double>(dim)) / (2.0 * r);
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(ratio * (1.0 - 1e-12))));
}

inline double net_count(const Box& box, double r) {
  double count = 1.0;
  for (const auto& iv : box)
    count *= static_cast<double>(axis_count(iv.length(), static_cast<int>(box.size()), r));
  return count;
}

inline double radical_inverse(std::uint64_t i, std::uint64_t base) {
  double inv = 1.0 / static_cast<double>(base), f = inv, out = 0.0;
  while (i > 0) {
    out += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return out;
}

}  // namespace detail

// Axis-aligned grid with per-axis spacing at most 2r/sqrt(D), centers half a
// spacing in from the boundary. Every point of the box lies within r of a
// center (closed balls; boundary corners can sit at distance exactly r).
inline ParameterNet build_net(const Box& box, double r, double cap = 1e7) {
  if (!(r > 0.0)) throw InvalidParameter("net radius must be > 0");
  if (box.empty()) throw InvalidParameter("box has no dimensions");
  for (const auto& iv : box)
    if (!(iv.hi >= iv.lo)) throw InvalidParameter("box interval with hi < lo");
  const int dim = static_cast<int>(box.size());
  const double count = detail::net_count(box, r);
  if (count > cap) {
    std::ostringstream os;
    os << "net at radius " << r << " needs " << count << " centers (cap " << cap << ")";
    throw CapExceeded(os.str());
  }
  std::vector<std::int64_t> per(box.size());
  for (std::size_t k = 0; k < box.size(); ++k)
    per[k] = detail::axis_count(box[k].length(), dim, r);
  ParameterNet net;
  net.dim = dim;
  net.radius = r;
  net.centers.reserve(static_cast<std::size_t>(count) * box.size());
  std::vector<std::int64_t> idx(box.size(), 0);
  while (true) {
    for (std::size_t k = 0; k < box.size(); ++k) {
      const double step = box[k].length() / static_cast<double>(per[k]);
      net.centers.push_back(box[k].lo + (static_cast<double>(idx[k]) + 0.5) * step);
    }
    std::size_t k = 0;
    while (k < box.size()) {
      if (++idx[k] < per[k]) break;
      idx[k] = 0;
      ++k;
    }
    if (k == box.size()) break;
  }
  return net;
}

// Checks the box corners and a Halton sample of the box are each within the
// net radius of some center. Returns the worst nearest-center distance.
inline double covering_gap(const ParameterNet& net, const Box& box, std::size_t samples = 10'000) {
  static constexpr std::uint64_t kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29};
  const auto dim = box.size();
  if (dim > std::size(kPrimes)) throw InvalidParameter("covering check supports D <= 10");
  std::vector<double> pt(dim);
  double worst = 0.0;
  auto probe = [&] {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < net.size() && best > 0.0; ++i)
      best = std::min(best, euclidean(pt, net.center(i)));
    worst = std::max(worst, best);
  };
  for (std::size_t mask = 0; mask < (std::size_t{1} << dim); ++mask) {
    for (std::size_t k = 0; k < dim; ++k) pt[k] = (mask >> k) & 1 ? box[k].hi : box[k].lo;
    probe();
  }
  for (std::size_t s = 1; s <= samples; ++s) {
    for (std::size_t k = 0; k < dim; ++k)
      pt[k] = box[k].lo + box[k].length() * detail::radical_inverse(s, kPrimes[k]);
    probe();
  }
  return worst;
}

inline bool covers(const ParameterNet& net, const Box& box, std::size_t samples = 10'000) {
  return covering_gap(net, box, samples) <= net.radius * (1.0 + 1e-12);
}

struct CoveringFit {
  double c = 0.0;
  double D_fit = 0.0;
  std::vector<double> radii;
  std::vector<double> counts;
};

// Fits log N(r) against log(1/r) and returns the slope D_fit together with
// the smallest c such that N(r) <= c r^-D_fit for every r in
// [min r_grid, max r_grid]. N is a step function, so c is the maximum of
// N(r-) r^D_fit over the jump radii in range and the range endpoints.
inline CoveringFit covering_constant(const Box& box, std::vector<double> r_grid,
                                     double cap = 1e7) {
  if (r_grid.size() < 4) throw InvalidParameter("covering_constant needs at least 4 radii");
  std::sort(r_grid.begin(), r_grid.end());
  const double r_min = r_grid.front(), r_max = r_grid.back();
  if (!(r_min > 0.0) || r_max / r_min < 8.0 * (1.0 - 1e-12))
    throw InvalidParameter("radius grid must be positive and span at least a factor of 8");
  CoveringFit fit;
  std::vector<double> lx, ly;
  for (double r : r_grid) {
    const double n = detail::net_count(box, r);
    if (n > cap) throw CapExceeded("covering count at smallest radius exceeds cap");
    fit.radii.push_back(r);
    fit.counts.push_back(n);
    lx.push_back(std::log(1.0 / r));
    ly.push_back(std::log(n));
  }
  fit.D_fit = stats::least_squares(lx, ly).slope;
  if (std::abs(fit.D_fit) < 1e-12) fit.D_fit = 0.0;

  const int dim = static_cast<int>(box.size());
  std::vector<double> candidates{r_min, r_max};
  for (const auto& iv : box) {
    if (iv.length() <= 0.0) continue;
    const double A = iv.length() * std::sqrt(static_cast<double>(dim)) / 2.0;
    const auto j_lo = static_cast<std::int64_t>(std::floor(A / r_max));
    const auto j_hi = static_cast<std::int64_t>(std::ceil(A / r_min));
    for (std::int64_t j = std::max<std::int64_t>(1, j_lo); j <= j_hi; ++j) {
      const double r = A / static_cast<double>(j);
      if (r > r_min && r <= r_max) candidates.push_back(r);
    }
  }
  for (double r : candidates) {
    fit.c = std::max(fit.c, detail::net_count(box, r) * std::pow(r, fit.D_fit));
    if (r > r_min)
      fit.c = std::max(fit.c, detail::net_count(box, r * (1.0 - 1e-9)) * std::pow(r, fit.D_fit));
  }
  for (std::size_t i = 0; i < fit.radii.size(); ++i)
    if (fit.counts[i] > fit.c * std::pow(fit.radii[i], -fit.D_fit) * (1.0 + 1e-12))
      throw std::logic_error("covering constant does not bound the grid counts");
  return fit;
}

// r_n = (eps / n^(1 - 1/p))^(1/a) and the grid net at that radius; the net
// size is K_n.
inline double rn_radius(double a, double p, double epsilon, std::int64_t n) {
  return std::pow(epsilon / std::pow(static_cast<double>(n), 1.0 - 1.0 / p), 1.0 / a);
}

inline ParameterNet build_rn_schedule(const FunctionFamily& family, double p, double epsilon,
                                      std::int64_t n, double cap = 1e7) {
  if (!family.holder) throw InvalidParameter("r_n schedule needs a Holder family");
  if (!(p > 1.0 && p < 2.0)) throw InvalidParameter("r_n schedule needs p in (1, 2)");
  if (!(epsilon > 0.0) || n < 1) throw InvalidParameter("r_n schedule needs eps > 0, n >= 1");
  const double r = rn_radius(family.holder->a, p, epsilon, n);
  try {
    return build_net(family.box, r, cap);
  } catch (const CapExceeded& e) {
    throw CapExceeded(std::string(e.what()) + "; use a larger epsilon or a smaller n");
  }
}

struct HolderEstimate {
  double a_hat = std::numeric_limits<double>::quiet_NaN();
  double M_hat = 0.0;
  std::size_t pairs_used = 0;
  // Largest excess |dH| - M d^a over sampled triples with d < delta.
  double max_declared_excess = -std::numeric_limits<double>::infinity();
  std::vector<std::string> warnings;
};

// Fits the 0.99 upper quantile line of log|H(theta,x) - H(theta',x)| against
// log d(theta, theta') over random triples with d <= pair_scale.
inline HolderEstimate estimate_holder(const FunctionFamily& family, const DataModel& data,
                                      std::size_t samples, double pair_scale,
                                      std::uint64_t seed = 0x401de5ULL) {
  family.validate();
  const auto dim = static_cast<std::size_t>(family.dim);
  double diam = 0.0;
  for (const auto& iv : family.box) diam += iv.length() * iv.length();
  diam = std::sqrt(diam);
  if (!(pair_scale > 0.0 && pair_scale < diam))
    throw InvalidParameter("pair_scale must lie in (0, diam(Theta))");
  RngStream rng(seed);
  std::vector<double> th(dim), th2(dim), dir(dim), lx, ly;
  HolderEstimate est;
  std::size_t excess_count = 0;
  for (std::size_t s = 0; s < samples; ++s) {
    double norm = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      th[k] = family.box[k].lo + family.box[k].length() * rng.uniform01();
      dir[k] = 2.0 * rng.uniform01() - 1.0;
      norm += dir[k] * dir[k];
    }
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;
    const double step = pair_scale * (1.0 - rng.uniform01());
    for (std::size_t k = 0; k < dim; ++k)
      th2[k] = std::clamp(th[k] + step * dir[k] / norm, family.box[k].lo, family.box[k].hi);
    const double d = euclidean(th, th2);
    const double x = data.sample(rng);
    const double h1 = family(th, x), h2 = family(th2, x);
    if (!std::isfinite(h1) || !std::isfinite(h2)) {
      std::ostringstream os;
      os.precision(17);
      os << "H is not finite at theta=" << th[0] << (dim > 1 ? ",..." : "") << " x=" << x;
      throw NonFiniteValue(os.str());
    }
    if (d <= 0.0) continue;
    const double diff = std::abs(h1 - h2);
    if (family.holder && d < family.holder->delta) {
      const double excess = diff - family.holder->M * std::pow(d, family.holder->a);
      est.max_declared_excess = std::max(est.max_declared_excess, excess);
      if (excess > 1e-9) ++excess_count;
    }
    if (diff > 0.0) {
      lx.push_back(std::log(d));
      ly.push_back(std::log(diff));
    }
  }
  if (excess_count > 0)
    est.warnings.push_back("declared Holder bound violated by " + std::to_string(excess_count) +
                           " sampled triples");
  est.pairs_used = lx.size();
  if (lx.size() < 10) {
    est.warnings.push_back("H is (numerically) constant in theta; exponent undefined");
    est.M_hat = 0.0;
    return est;
  }
  const auto fit = stats::quantile_regression(lx, ly, 0.99, 0.0, 3.0);
  est.a_hat = fit.slope;
  est.M_hat = std::exp(fit.intercept);
  return est;
}

// Probe net for eta_modulus: the grid of radius r / 20 over the box clipped
// to the bounding cube of B_r(theta).
inline ParameterNet make_probe_net(const Box& box, std::span<const double> theta, double r) {
  Box local(box.size());
  for (std::size_t k = 0; k < box.size(); ++k)
    local[k] = {std::max(box[k].lo, theta[k] - r), std::min(box[k].hi, theta[k] + r)};
  return build_net(local, r / 20.0);
}

struct EtaValue {
  double value = 0.0;
  // 2 M (r/10)^a when the family is Holder, NaN otherwise.
  double discretization_bound = std::numeric_limits<double>::quiet_NaN();
};

// Lower bound on eta(theta, x, r) from the probe-net points inside B_r(theta).
inline EtaValue eta_modulus(const FunctionFamily& family, std::span<const double> theta, double x,
                            double r, const ParameterNet& probe_net,
                            const std::function<double(std::span<const double>)>& mu) {
  if (!(r > 0.0)) throw InvalidParameter("eta radius must be > 0");
  if (probe_net.radius > r / 10.0 * (1.0 + 1e-12))
    throw InvalidParameter("probe net resolution must be <= r/10");
  const double base = family(theta, x) - mu(theta);
  EtaValue out;
  for (std::size_t i = 0; i < probe_net.size(); ++i) {
    const auto c = probe_net.center(i);
    if (euclidean(theta, c) >= r) continue;
    out.value = std::max(out.value, std::abs(base - (family(c, x) - mu(c))));
  }
  if (family.holder) out.discretization_bound = 2.0 * family.holder->M * std::pow(r / 10.0, family.holder->a);
  return out;
}

}  // namespace ulln
