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

// Weighting schemes for randomly weighted sums: multinomial (m-out-of-n and
// unequal-probability), Bayesian bootstrap, delete-d and downweight-d
// jackknife, over-replacement, independent and negatively correlated
// Gaussian weights. Each scheme can be sampled and has analytic marginal
// absolute moments.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <boost/math/special_functions/hypergeometric_1F1.hpp>

#include "ulln/error.hpp"
#include "ulln/rng.hpp"
#include "ulln/stats.hpp"

namespace ulln {

enum class SchemeKind {
  multinomial,
  bayesian_dirichlet,
  hypergeometric_delete_d,
  downweight_d,
  over_replacement,
  independent,
  gaussian_nod,
};

inline constexpr SchemeKind kAllSchemeKinds[] = {
    SchemeKind::multinomial,      SchemeKind::bayesian_dirichlet,
    SchemeKind::hypergeometric_delete_d, SchemeKind::downweight_d,
    SchemeKind::over_replacement, SchemeKind::independent,
    SchemeKind::gaussian_nod,
};

inline std::string_view to_string(SchemeKind k) {
  switch (k) {
    case SchemeKind::multinomial: return "multinomial";
    case SchemeKind::bayesian_dirichlet: return "bayesian_dirichlet";
    case SchemeKind::hypergeometric_delete_d: return "hypergeometric_delete_d";
    case SchemeKind::downweight_d: return "downweight_d";
    case SchemeKind::over_replacement: return "over_replacement";
    case SchemeKind::independent: return "independent";
    case SchemeKind::gaussian_nod: return "gaussian_nod";
  }
  return "?";
}

inline SchemeKind parse_scheme_kind(std::string_view s) {
  for (SchemeKind k : kAllSchemeKinds)
    if (to_string(k) == s) return k;
  throw InvalidParameter("unknown scheme kind '" + std::string(s) + "'");
}

// Resample size m_n for multinomial kinds.
struct MSchedule {
  enum class Kind { identity, power, log, constant };
  Kind kind = Kind::identity;
  // power: exponent in (0, 1]; log: exponent excess delta_m > 0; constant: m.
  double param = 1.0;

  static MSchedule identity() { return {}; }
  static MSchedule power(double gamma) { return {Kind::power, gamma}; }
  static MSchedule log(double delta) { return {Kind::log, delta}; }
  static MSchedule constant(std::int64_t m) { return {Kind::constant, static_cast<double>(m)}; }

  void validate() const {
    switch (kind) {
      case Kind::identity: break;
      case Kind::power:
        if (!(param > 0.0 && param <= 1.0))
          throw InvalidParameter("power schedule exponent must lie in (0, 1]");
        break;
      case Kind::log:
        if (!(param > 0.0)) throw InvalidParameter("log schedule exponent must be > 0");
        break;
      case Kind::constant:
        if (!(param >= 1.0) || param != std::floor(param))
          throw InvalidParameter("constant schedule needs a positive integer m");
        break;
    }
  }

  std::int64_t operator()(std::int64_t n) const {
    double m = 0.0;
    switch (kind) {
      case Kind::identity: m = static_cast<double>(n); break;
      // The 1e-9 guard keeps exact powers (e.g. 100^0.5) from rounding up.
      case Kind::power: m = std::ceil(std::pow(static_cast<double>(n), param) - 1e-9); break;
      case Kind::log:
        m = std::ceil(std::pow(std::log(static_cast<double>(n)), 1.0 + param) - 1e-9);
        break;
      case Kind::constant: m = param; break;
    }
    return std::max<std::int64_t>(1, static_cast<std::int64_t>(m));
  }

  std::string describe() const {
    switch (kind) {
      case Kind::identity: return "identity";
      case Kind::power: return "power:" + format_param();
      case Kind::log: return "log:" + format_param();
      case Kind::constant: return "constant:" + format_param();
    }
    return "?";
  }

 private:
  std::string format_param() const {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", param);
    return buf;
  }
};

// Selection probabilities (p_n1, ..., p_nn) of the multinomial kinds. Both
// rules have rational entries, which the exact NOD checker relies on.
struct ProbsRule {
  enum class Kind { uniform, ramp };
  Kind kind = Kind::uniform;

  // p_nj = 1/n, or p_nj = 2j / (n(n+1)) for j = 1..n.
  std::vector<double> probs(std::int64_t n) const {
    std::vector<double> p(static_cast<std::size_t>(n));
    const double nd = static_cast<double>(n);
    for (std::int64_t j = 0; j < n; ++j)
      p[static_cast<std::size_t>(j)] =
          kind == Kind::uniform ? 1.0 / nd : 2.0 * static_cast<double>(j + 1) / (nd * (nd + 1.0));
    return p;
  }

  // (numerator, denominator) of p_nj, j zero-based.
  std::pair<std::int64_t, std::int64_t> rational(std::int64_t n, std::int64_t j) const {
    if (kind == Kind::uniform) return {1, n};
    return {2 * (j + 1), n * (n + 1)};
  }

  // Every entry satisfies p_nj < kappa / n.
  double kappa() const { return 2.0; }

  std::string describe() const { return kind == Kind::uniform ? "uniform" : "ramp"; }
};

// Number of deleted (or downweighted) indices for the jackknife kinds.
struct DRule {
  enum class Kind { ceil_fraction, fixed };
  Kind kind = Kind::ceil_fraction;
  double param = 0.2;

  static DRule fraction(double f) { return {Kind::ceil_fraction, f}; }
  static DRule fixed(std::int64_t d) { return {Kind::fixed, static_cast<double>(d)}; }

  std::int64_t operator()(std::int64_t n) const {
    if (kind == Kind::fixed) return static_cast<std::int64_t>(param);
    return static_cast<std::int64_t>(std::ceil(param * static_cast<double>(n) - 1e-12));
  }

  std::string describe() const {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%s:%.17g", kind == Kind::fixed ? "fixed" : "fraction", param);
    return buf;
  }
};

// Marginal law of independent weights: Gamma(shape, scale). Shape 1 is the
// exponential law; the default is the unit-mean exponential.
struct IndependentLaw {
  double shape = 1.0;
  double scale = 1.0;

  double mean() const { return shape * scale; }
  double abs_moment(double r) const {
    return std::exp(r * std::log(scale) + std::lgamma(shape + r) - std::lgamma(shape));
  }
  std::string describe() const {
    char buf[64];
    std::snprintf(buf, sizeof buf, "gamma:%.17g:%.17g", shape, scale);
    return buf;
  }
};

// Equicorrelated Gaussian weights N(mean, sigma^2 [(1-rho) I + rho 11^T])
// with rho <= 0. rho is either a constant or rho_n = -rho_scale / (n - 1).
struct GaussianSpec {
  double mean = 1.0;
  double variance = 1.0;
  bool scaled_rho = true;
  double rho_value = 0.0;
  double rho_scale = 0.5;

  static GaussianSpec constant_rho(double rho, double mean = 1.0, double variance = 1.0) {
    GaussianSpec g;
    g.mean = mean;
    g.variance = variance;
    g.scaled_rho = false;
    g.rho_value = rho;
    return g;
  }
  static GaussianSpec scaled(double scale, double mean = 1.0, double variance = 1.0) {
    GaussianSpec g;
    g.mean = mean;
    g.variance = variance;
    g.scaled_rho = true;
    g.rho_scale = scale;
    return g;
  }

  double rho(std::int64_t n) const {
    if (!scaled_rho) return rho_value;
    return n > 1 ? -rho_scale / static_cast<double>(n - 1) : 0.0;
  }

  void validate(std::int64_t n) const {
    if (!(variance > 0.0)) throw InvalidParameter("gaussian variance must be > 0");
    if (scaled_rho && !(rho_scale >= 0.0 && rho_scale <= 1.0))
      throw InvalidParameter("gaussian rho_scale must lie in [0, 1]");
    const double r = rho(n);
    const double floor_rho = -1.0 / static_cast<double>(n - 1);
    if (r > 0.0) throw InvalidParameter("gaussian correlation must be <= 0");
    if (r < floor_rho * (1.0 + 1e-12))
      throw InvalidParameter("gaussian correlation below -1/(n-1): covariance not PSD");
  }

  std::string describe() const {
    char buf[96];
    if (scaled_rho)
      std::snprintf(buf, sizeof buf, "mean=%.17g;var=%.17g;rho_scale=%.17g", mean, variance,
                    rho_scale);
    else
      std::snprintf(buf, sizeof buf, "mean=%.17g;var=%.17g;rho=%.17g", mean, variance, rho_value);
    return buf;
  }
};

struct WeightScheme {
  SchemeKind kind = SchemeKind::multinomial;
  MSchedule m_schedule;
  ProbsRule probs_rule;
  DRule d_rule;
  IndependentLaw indep_law;
  GaussianSpec gaussian;

  static WeightScheme multinomial(MSchedule m = {}, ProbsRule probs = {}) {
    WeightScheme s;
    s.kind = SchemeKind::multinomial;
    s.m_schedule = m;
    s.probs_rule = probs;
    return s;
  }
  static WeightScheme dirichlet() { return of(SchemeKind::bayesian_dirichlet); }
  static WeightScheme delete_d(DRule d = {}) {
    WeightScheme s = of(SchemeKind::hypergeometric_delete_d);
    s.d_rule = d;
    return s;
  }
  static WeightScheme downweight_d(DRule d = {}) {
    WeightScheme s = of(SchemeKind::downweight_d);
    s.d_rule = d;
    return s;
  }
  static WeightScheme over_replacement() { return of(SchemeKind::over_replacement); }
  static WeightScheme independent(IndependentLaw law = {}) {
    WeightScheme s = of(SchemeKind::independent);
    s.indep_law = law;
    return s;
  }
  static WeightScheme gaussian_nod(GaussianSpec g = {}) {
    WeightScheme s = of(SchemeKind::gaussian_nod);
    s.gaussian = g;
    return s;
  }

  // Throws InvalidParameter when the scheme cannot be instantiated at n.
  void validate(std::int64_t n) const {
    if (n < 2) throw InvalidParameter("weight vectors need n >= 2");
    switch (kind) {
      case SchemeKind::multinomial: m_schedule.validate(); break;
      case SchemeKind::hypergeometric_delete_d:
      case SchemeKind::downweight_d: {
        const auto d = d_rule(n);
        if (d < 1 || d > n - 1)
          throw InvalidParameter("jackknife d must lie in {1, ..., n-1}; got d=" +
                                 std::to_string(d) + " at n=" + std::to_string(n));
        break;
      }
      case SchemeKind::independent:
        if (!(indep_law.shape > 0.0 && indep_law.scale > 0.0))
          throw InvalidParameter("independent law needs positive shape and scale");
        break;
      case SchemeKind::gaussian_nod: gaussian.validate(n); break;
      default: break;
    }
  }

  std::string describe() const {
    std::string out(to_string(kind));
    switch (kind) {
      case SchemeKind::multinomial:
        out += "(m=" + m_schedule.describe() + ";probs=" + probs_rule.describe() + ")";
        break;
      case SchemeKind::hypergeometric_delete_d:
      case SchemeKind::downweight_d: out += "(d=" + d_rule.describe() + ")"; break;
      case SchemeKind::independent: out += "(" + indep_law.describe() + ")"; break;
      case SchemeKind::gaussian_nod: out += "(" + gaussian.describe() + ")"; break;
      default: break;
    }
    return out;
  }

  // Weights that take finitely many values at every n.
  bool finite_support() const {
    return kind == SchemeKind::multinomial || kind == SchemeKind::hypergeometric_delete_d ||
           kind == SchemeKind::downweight_d || kind == SchemeKind::over_replacement;
  }

 private:
  static WeightScheme of(SchemeKind k) {
    WeightScheme s;
    s.kind = k;
    return s;
  }
};

struct WeightVector {
  std::int64_t n = 0;
  std::vector<double> values;
  std::string scheme_id;
  std::uint64_t draw_seed = 0;
};

namespace detail {

// Unbiased integer in [0, bound) by rejection on the top bits.
inline std::uint64_t uniform_index(RngStream& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

// First k entries of a uniformly random permutation of 0..n-1.
inline std::vector<std::int64_t> random_subset(RngStream& rng, std::int64_t n, std::int64_t k) {
  std::vector<std::int64_t> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), std::int64_t{0});
  for (std::int64_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::int64_t>(
                           uniform_index(rng, static_cast<std::uint64_t>(n - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

inline double standard_normal(RngStream& rng) {
  // Box-Muller without caching so that draws depend only on stream position.
  double u1;
  do {
    u1 = rng.uniform01();
  } while (u1 <= 0.0);
  const double u2 = rng.uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace detail

// Uniform weak composition of n into n nonnegative parts: choose n-1 bar
// positions among 2n-1 slots; the parts are the gaps between bars.
inline WeightVector sample_over_replacement(std::int64_t n, RngStream& rng) {
  if (n < 2) throw InvalidParameter("over-replacement needs n >= 2");
  auto bars = detail::random_subset(rng, 2 * n - 1, n - 1);
  std::sort(bars.begin(), bars.end());
  WeightVector w;
  w.n = n;
  w.values.resize(static_cast<std::size_t>(n));
  std::int64_t prev = -1;
  for (std::int64_t j = 0; j < n - 1; ++j) {
    const auto b = bars[static_cast<std::size_t>(j)];
    w.values[static_cast<std::size_t>(j)] = static_cast<double>(b - prev - 1);
    prev = b;
  }
  w.values[static_cast<std::size_t>(n - 1)] = static_cast<double>(2 * n - 2 - prev);
  w.scheme_id = std::string(to_string(SchemeKind::over_replacement));
  w.draw_seed = rng.key();
  return w;
}

// Y = sqrt(1-rho) * (Z - b * mean(Z) * 1) has correlation rho off the diagonal
// when b = 1 - sqrt(1 + n rho / (1 - rho)). At rho = -1/(n-1) b = 1 and the
// draw lies in the (n-1)-dimensional sum-zero subspace.
inline WeightVector sample_gaussian_nod(const GaussianSpec& spec, std::int64_t n, RngStream& rng) {
  if (n < 2) throw InvalidParameter("gaussian weights need n >= 2");
  spec.validate(n);
  const double rho = spec.rho(n);
  const double nd = static_cast<double>(n);
  const double disc = std::max(0.0, 1.0 + nd * rho / (1.0 - rho));
  const double b = 1.0 - std::sqrt(disc);
  const double scale = std::sqrt(spec.variance * (1.0 - rho));
  WeightVector w;
  w.n = n;
  w.values.resize(static_cast<std::size_t>(n));
  double zsum = 0.0;
  for (auto& v : w.values) {
    v = detail::standard_normal(rng);
    zsum += v;
  }
  const double shift = b * zsum / nd;
  for (auto& v : w.values) v = spec.mean + scale * (v - shift);
  w.scheme_id = std::string(to_string(SchemeKind::gaussian_nod));
  w.draw_seed = rng.key();
  return w;
}

// One draw of (W_n1, ..., W_nn). Deterministic given the stream state.
inline WeightVector sample_weights(const WeightScheme& scheme, std::int64_t n, RngStream& rng) {
  scheme.validate(n);
  const auto un = static_cast<std::size_t>(n);
  WeightVector w;
  w.n = n;
  w.scheme_id = std::string(to_string(scheme.kind));
  w.draw_seed = rng.key();
  switch (scheme.kind) {
    case SchemeKind::multinomial: {
      // Sequential conditional binomials: W_j | W_1..W_{j-1} is
      // Binomial(remaining, p_j / (p_j + ... + p_n)).
      const auto p = scheme.probs_rule.probs(n);
      std::vector<double> tail(un + 1, 0.0);
      for (std::size_t j = un; j-- > 0;) tail[j] = tail[j + 1] + p[j];
      std::int64_t remaining = scheme.m_schedule(n);
      w.values.assign(un, 0.0);
      for (std::size_t j = 0; j + 1 < un && remaining > 0; ++j) {
        const double q = std::clamp(p[j] / tail[j], 0.0, 1.0);
        std::binomial_distribution<std::int64_t> bin(remaining, q);
        const auto k = bin(rng);
        w.values[j] = static_cast<double>(k);
        remaining -= k;
      }
      w.values[un - 1] += static_cast<double>(remaining);
      break;
    }
    case SchemeKind::bayesian_dirichlet: {
      w.values.resize(un);
      double total = 0.0;
      for (auto& v : w.values) {
        v = -std::log1p(-rng.uniform01());
        total += v;
      }
      for (auto& v : w.values) v /= total;
      break;
    }
    case SchemeKind::hypergeometric_delete_d:
    case SchemeKind::downweight_d: {
      const auto d = scheme.d_rule(n);
      const bool jack = scheme.kind == SchemeKind::hypergeometric_delete_d;
      const double nd = static_cast<double>(n), dd = static_cast<double>(d);
      const double kept = jack ? 1.0 : 1.0 + dd / nd;
      const double dropped = jack ? 0.0 : dd / nd;
      w.values.assign(un, kept);
      for (auto i : detail::random_subset(rng, n, d)) w.values[static_cast<std::size_t>(i)] = dropped;
      break;
    }
    case SchemeKind::over_replacement: {
      auto v = sample_over_replacement(n, rng);
      w.values = std::move(v.values);
      break;
    }
    case SchemeKind::independent: {
      w.values.resize(un);
      std::gamma_distribution<double> g(scheme.indep_law.shape, scheme.indep_law.scale);
      for (auto& v : w.values) v = g(rng);
      break;
    }
    case SchemeKind::gaussian_nod: {
      auto v = sample_gaussian_nod(scheme.gaussian, n, rng);
      w.values = std::move(v.values);
      break;
    }
  }
  return w;
}

enum class MomentMode { analytic, monte_carlo };

struct MomentEstimate {
  double value = 0.0;
  double std_error = 0.0;  // zero in analytic mode
  MomentMode mode = MomentMode::analytic;
};

namespace detail {

// E|X|^r for X ~ N(mu, sigma^2).
inline double folded_normal_moment(double mu, double sigma, double r) {
  const double z = -mu * mu / (2.0 * sigma * sigma);
  const double lead = std::pow(sigma, r) * std::pow(2.0, r / 2.0) *
                      std::tgamma((r + 1.0) / 2.0) / std::sqrt(std::numbers::pi);
  return lead * boost::math::hypergeometric_1F1(-r / 2.0, 0.5, z);
}

// E X^r for X ~ Binomial(m, p), summing the pmf in log space until the
// terms beyond the mode become negligible.
inline double binomial_moment(std::int64_t m, double p, double r) {
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return std::pow(static_cast<double>(m), r);
  const double lp = std::log(p), lq = std::log1p(-p);
  const double mode = static_cast<double>(m) * p;
  double total = 0.0;
  for (std::int64_t k = 1; k <= m; ++k) {
    const double kd = static_cast<double>(k);
    const double term =
        std::exp(stats::log_choose(static_cast<double>(m), kd) + kd * lp +
                 static_cast<double>(m - k) * lq + r * std::log(kd));
    total += term;
    if (kd > mode + 10.0 && term < 1e-18 * total) break;
  }
  return total;
}

}  // namespace detail

// Closed-form E|W_nj|^order. Throws AnalyticUnavailable when no closed form
// is registered (none at present; kept for user extensions).
inline double analytic_abs_moment(const WeightScheme& scheme, std::int64_t n, std::int64_t j,
                                  double order) {
  scheme.validate(n);
  if (j < 0 || j >= n) throw InvalidParameter("weight index out of range");
  const double nd = static_cast<double>(n);
  switch (scheme.kind) {
    case SchemeKind::multinomial: {
      const auto p = scheme.probs_rule.probs(n)[static_cast<std::size_t>(j)];
      return detail::binomial_moment(scheme.m_schedule(n), p, order);
    }
    case SchemeKind::bayesian_dirichlet:
      // Beta(1, n-1) marginal.
      return std::exp(std::lgamma(1.0 + order) + std::lgamma(nd) - std::lgamma(nd + order));
    case SchemeKind::hypergeometric_delete_d:
      return (nd - static_cast<double>(scheme.d_rule(n))) / nd;
    case SchemeKind::downweight_d: {
      const double f = static_cast<double>(scheme.d_rule(n)) / nd;
      return f * std::pow(f, order) + (1.0 - f) * std::pow(1.0 + f, order);
    }
    case SchemeKind::over_replacement: {
      // P(W = k) = C(2n-2-k, n-2) / C(2n-1, n-1).
      const double denom = stats::log_choose(2.0 * nd - 1.0, nd - 1.0);
      double total = 0.0;
      for (std::int64_t k = 1; k <= n; ++k) {
        const double kd = static_cast<double>(k);
        total += std::exp(stats::log_choose(2.0 * nd - 2.0 - kd, nd - 2.0) - denom +
                          order * std::log(kd));
      }
      return total;
    }
    case SchemeKind::independent: return scheme.indep_law.abs_moment(order);
    case SchemeKind::gaussian_nod:
      return detail::folded_normal_moment(scheme.gaussian.mean,
                                          std::sqrt(scheme.gaussian.variance), order);
  }
  throw AnalyticUnavailable("no closed form for this scheme");
}

// Monte Carlo E|W_nj|^r for several orders from one set of `draws` full
// weight vectors, with batch-means (20 batches) standard errors.
inline std::vector<MomentEstimate> monte_carlo_abs_moments(const WeightScheme& scheme,
                                                           std::int64_t n, std::int64_t j,
                                                           std::span<const double> orders,
                                                           std::int64_t draws,
                                                           std::uint64_t seed) {
  scheme.validate(n);
  if (j < 0 || j >= n) throw InvalidParameter("weight index out of range");
  if (draws < 20) throw InvalidParameter("need at least 20 Monte Carlo draws");
  RngStream rng = RngStream::substream(seed, {static_cast<std::uint64_t>(n),
                                              static_cast<std::uint64_t>(j)});
  const auto D = static_cast<std::size_t>(draws);
  std::vector<std::vector<double>> xs(orders.size(), std::vector<double>(D));
  for (std::size_t d = 0; d < D; ++d) {
    const double v = std::abs(sample_weights(scheme, n, rng).values[static_cast<std::size_t>(j)]);
    for (std::size_t k = 0; k < orders.size(); ++k) {
      const double r = orders[k];
      if (r == std::floor(r) && r <= 8.0) {
        double acc = 1.0;
        for (int t = 0; t < static_cast<int>(r); ++t) acc *= v;
        xs[k][d] = acc;
      } else {
        xs[k][d] = std::pow(v, r);
      }
    }
  }
  std::vector<MomentEstimate> out;
  for (const auto& x : xs) {
    const auto bm = stats::batch_means(x, 20);
    out.push_back({bm.mean, bm.std_error, MomentMode::monte_carlo});
  }
  return out;
}

inline MomentEstimate monte_carlo_abs_moment(const WeightScheme& scheme, std::int64_t n,
                                             std::int64_t j, double order, std::int64_t draws,
                                             std::uint64_t seed) {
  const double orders[] = {order};
  return monte_carlo_abs_moments(scheme, n, j, orders, draws, seed).front();
}

inline MomentEstimate marginal_moment(const WeightScheme& scheme, std::int64_t n, std::int64_t j,
                                      double order, MomentMode mode,
                                      std::int64_t mc_draws = 1'000'000,
                                      std::uint64_t seed = 0x5eed) {
  if (!(order >= 1.0)) throw InvalidParameter("moment order must be >= 1");
  if (mode == MomentMode::analytic) return {analytic_abs_moment(scheme, n, j, order), 0.0, mode};
  return monte_carlo_abs_moment(scheme, n, j, order, mc_draws, seed);
}

// E W_nj (signed).
inline double weight_mean(const WeightScheme& scheme, std::int64_t n, std::int64_t j) {
  if (scheme.kind == SchemeKind::gaussian_nod) {
    scheme.validate(n);
    return scheme.gaussian.mean;
  }
  return analytic_abs_moment(scheme, n, j, 1.0);
}

inline std::vector<double> weight_means(const WeightScheme& scheme, std::int64_t n) {
  scheme.validate(n);
  std::vector<double> out(static_cast<std::size_t>(n));
  switch (scheme.kind) {
    case SchemeKind::multinomial: {
      const auto p = scheme.probs_rule.probs(n);
      const double m = static_cast<double>(scheme.m_schedule(n));
      for (std::size_t j = 0; j < out.size(); ++j) out[j] = m * p[j];
      return out;
    }
    case SchemeKind::downweight_d:
    case SchemeKind::over_replacement: std::fill(out.begin(), out.end(), 1.0); return out;
    default: std::fill(out.begin(), out.end(), weight_mean(scheme, n, 0)); return out;
  }
}

// Sum over j of E|W_nj|^order, using exchangeability where it holds.
inline double summed_abs_moment(const WeightScheme& scheme, std::int64_t n, double order) {
  if (scheme.kind == SchemeKind::multinomial && scheme.probs_rule.kind == ProbsRule::Kind::ramp) {
    double total = 0.0;
    for (std::int64_t j = 0; j < n; ++j) total += analytic_abs_moment(scheme, n, j, order);
    return total;
  }
  return static_cast<double>(n) * analytic_abs_moment(scheme, n, 0, order);
}

}  // namespace ulln
