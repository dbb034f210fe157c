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

// Hypothesis checks for the three uniform strong laws. Asymptotic statements
// ("= O(n)", "limsup < inf") are decided on a finite grid of n by a bounded
// ratio plus a log-log slope test with slack 0.05, so every verdict here is
// advisory; reports say so.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "ulln/error.hpp"
#include "ulln/family.hpp"
#include "ulln/netcover.hpp"
#include "ulln/schemes.hpp"
#include "ulln/stats.hpp"
#include "ulln/text.hpp"

namespace ulln {

enum class Theorem { T1a, T1b, T2, T3 };

inline std::string_view to_string(Theorem t) {
  switch (t) {
    case Theorem::T1a: return "T1a";
    case Theorem::T1b: return "T1b";
    case Theorem::T2: return "T2";
    case Theorem::T3: return "T3";
  }
  return "?";
}

inline Theorem parse_theorem(std::string_view s) {
  for (Theorem t : {Theorem::T1a, Theorem::T1b, Theorem::T2, Theorem::T3})
    if (to_string(t) == s) return t;
  throw InvalidParameter("unknown theorem '" + std::string(s) + "' (T1a, T1b, T2, T3)");
}

struct ExponentConfig {
  Theorem theorem = Theorem::T1a;
  double delta = 0.0;
  double p = 1.0;
  double alpha = 4.0;
  double beta = 4.0 / 3.0;
  double q = 0.0;
};

enum class Verdict { satisfied, violated, undetermined };

inline std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::satisfied: return "satisfied";
    case Verdict::violated: return "violated";
    case Verdict::undetermined: return "undetermined";
  }
  return "?";
}

enum class Provenance { analytic, monte_carlo };

struct Check {
  std::string name;
  double value = 0.0;
  double bound = 0.0;
  bool pass = false;
  Provenance provenance = Provenance::analytic;
  // Monte Carlo checks whose confidence interval straddles the bound.
  bool straddles = false;
  double std_error = 0.0;
};

struct ConditionReport {
  Verdict verdict = Verdict::satisfied;
  std::vector<Check> checks;
  std::string notes;
  bool lemma2_case_b_candidate = false;

  void add(Check c) {
    if (c.straddles) c.pass = false;
    checks.push_back(std::move(c));
    finalize();
  }

  void merge(const ConditionReport& other) {
    for (const auto& c : other.checks) checks.push_back(c);
    if (!other.notes.empty()) notes += (notes.empty() ? "" : "\n") + other.notes;
    lemma2_case_b_candidate = lemma2_case_b_candidate || other.lemma2_case_b_candidate;
    finalize();
  }

  void note(const std::string& s) { notes += (notes.empty() ? "" : "\n") + s; }

  void finalize() {
    bool any_straddle = false, all_pass = true;
    for (const auto& c : checks) {
      any_straddle = any_straddle || c.straddles;
      all_pass = all_pass && c.pass;
    }
    verdict = any_straddle ? Verdict::undetermined
                           : (all_pass ? Verdict::satisfied : Verdict::violated);
  }

  static std::string csv_header() { return "check,value,bound,pass"; }

  std::string to_csv() const {
    std::ostringstream os;
    os.precision(17);
    os << csv_header() << '\n';
    for (const auto& c : checks)
      os << c.name << ',' << c.value << ',' << c.bound << ',' << (c.pass ? "true" : "false")
         << '\n';
    return os.str();
  }

  std::string to_text() const {
    std::ostringstream os;
    os.precision(10);
    os << "verdict: " << to_string(verdict) << '\n';
    for (const auto& c : checks) {
      os << "  [" << (c.pass ? "pass" : (c.straddles ? " ?? " : "FAIL")) << "] " << c.name
         << ": value=" << c.value << " bound=" << c.bound << " ("
         << (c.provenance == Provenance::analytic ? "analytic" : "monte_carlo");
      if (c.provenance == Provenance::monte_carlo) os << ", se=" << c.std_error;
      os << ")\n";
    }
    if (!notes.empty()) os << "notes:\n" << notes << '\n';
    os << "(finite-grid proxies for asymptotic conditions; verdicts are advisory)\n";
    return os.str();
  }
};

// Smallest admissible moment order for the shrinking-net law:
// ((1 - 1/p) D / a + 1) / (1/p - 1/2).
inline double q_threshold(double p, double D, double a) {
  if (!(p > 1.0 && p < 2.0))
    throw InvalidParameter("q_threshold needs p in (1, 2); the denominator degenerates");
  if (!(D > 0.0) || !(a > 0.0 && a <= 1.0))
    throw InvalidParameter("q_threshold needs D > 0 and a in (0, 1]");
  return ((1.0 - 1.0 / p) * D / a + 1.0) / (1.0 / p - 0.5);
}

// gamma = q (1/p - 1/2) - (1 - 1/p) D / a, the summability exponent.
inline double summability_exponent(double q, double p, double D, double a) {
  return q * (1.0 / p - 0.5) - (1.0 - 1.0 / p) * D / a;
}

inline ConditionReport check_exponent_triangle(double p, double alpha, double beta,
                                               bool identically_distributed = false) {
  ConditionReport r;
  const double lhs = 1.0 / alpha + 1.0 / beta;
  const bool in_range = p >= 1.0 && p < 2.0;
  r.lemma2_case_b_candidate =
      std::abs(alpha - 2.0 * p) <= 1e-12 && std::abs(beta - 2.0 * p) <= 1e-12;
  if (identically_distributed && r.lemma2_case_b_candidate) {
    r.add({"p in [1,2)", p, 2.0, in_range});
    r.add({"alpha = beta = 2p (identically distributed weights)", alpha, 2.0 * p, true});
    r.note("case (b): identically distributed weights with alpha = beta = 2p");
    return r;
  }
  r.add({"p in [1,2)", p, 2.0, in_range});
  r.add({"1/alpha + 1/beta = 1/p", lhs, 1.0 / p, std::abs(lhs - 1.0 / p) <= 1e-12});
  r.add({"alpha > 2p", alpha, 2.0 * p, alpha > 2.0 * p});
  r.add({"beta > 1", beta, 1.0, beta > 1.0});
  if (r.lemma2_case_b_candidate && r.verdict == Verdict::violated)
    r.note("alpha = beta = 2p: admissible under case (b) if the weights are identically "
           "distributed");
  return r;
}

namespace detail {

inline void require_grid(const std::vector<std::int64_t>& grid, std::size_t min_points,
                         double min_decades) {
  if (grid.size() < min_points) throw InvalidParameter("n grid has too few points");
  if (!std::is_sorted(grid.begin(), grid.end()) || grid.front() < 2)
    throw InvalidParameter("n grid must be increasing with n >= 2");
  if (std::log10(static_cast<double>(grid.back()) / static_cast<double>(grid.front())) <
      min_decades - 1e-12)
    throw InvalidParameter("n grid must span at least " + std::to_string(min_decades) +
                           " decades");
}

}  // namespace detail

inline std::vector<std::int64_t> default_growth_grid() {
  return {100, 316, 1000, 3162, 10000, 31623, 100000};
}

// Sum_j E|W_nj|^order = O(n^rate_exponent), tested on the grid.
inline ConditionReport check_weight_growth(const WeightScheme& scheme, double order,
                                           double rate_exponent,
                                           const std::vector<std::int64_t>& n_grid,
                                           MomentMode mode = MomentMode::analytic,
                                           std::int64_t mc_draws = 100'000,
                                           std::uint64_t seed = 0x67726f77ULL) {
  detail::require_grid(n_grid, 4, 2.0);
  ConditionReport r;
  std::vector<double> lx, ly;
  double max_g = 0.0, max_g_se = 0.0, worst_rel_se = 0.0;
  for (auto n : n_grid) {
    double total = 0.0, se = 0.0;
    if (mode == MomentMode::analytic) {
      total = summed_abs_moment(scheme, n, order);
    } else {
      RngStream rng = RngStream::substream(seed, {static_cast<std::uint64_t>(n)});
      std::vector<double> sums(static_cast<std::size_t>(mc_draws));
      for (auto& s : sums) {
        const auto w = sample_weights(scheme, n, rng);
        s = 0.0;
        for (double v : w.values) s += std::pow(std::abs(v), order);
      }
      const auto bm = stats::batch_means(sums, 20);
      total = bm.mean;
      se = bm.std_error;
      worst_rel_se = std::max(worst_rel_se, total > 0.0 ? se / total : 0.0);
    }
    const double scale = std::pow(static_cast<double>(n), rate_exponent);
    if (total / scale >= max_g) {
      max_g = total / scale;
      max_g_se = se / scale;
    }
    lx.push_back(std::log(static_cast<double>(n)));
    ly.push_back(std::log(std::max(total, std::numeric_limits<double>::min())));
  }
  const double slope = stats::least_squares(lx, ly).slope;
  const auto prov = mode == MomentMode::analytic ? Provenance::analytic : Provenance::monte_carlo;
  const std::string tag = "sum_j E|W|^" + fmt_num(order);
  Check bounded{"max " + tag + " / n^" + fmt_num(rate_exponent), max_g,
                std::numeric_limits<double>::infinity(), std::isfinite(max_g), prov};
  Check trend{"log-log slope of " + tag, slope, rate_exponent + 0.05,
              slope <= rate_exponent + 0.05, prov};
  bounded.std_error = max_g_se;
  if (prov == Provenance::monte_carlo && worst_rel_se > 0.05) {
    trend.straddles = true;
    trend.std_error = worst_rel_se;
    r.note("Monte Carlo moments with relative standard error above 5%");
  }
  r.add(bounded);
  r.add(trend);
  return r;
}

// Growth-rate regimes for m_n: (a) n^(1-delta) / m_n bounded, (b)
// log(n)^(1+delta) / m_n bounded.
inline ConditionReport check_t1_regime(const MSchedule& m_schedule, char regime, double delta,
                                       std::vector<std::int64_t> n_grid = {}) {
  if (regime != 'a' && regime != 'b') throw InvalidParameter("regime must be 'a' or 'b'");
  if (regime == 'a' && !(delta >= 0.0 && delta < 1.0))
    throw InvalidParameter("regime (a) needs delta in [0, 1)");
  if (regime == 'b' && !(delta > 0.0)) throw InvalidParameter("regime (b) needs delta > 0");
  if (n_grid.empty())
    for (int e = 4; e <= 16; ++e)
      n_grid.push_back(static_cast<std::int64_t>(std::llround(std::pow(10.0, e / 2.0))));
  m_schedule.validate();
  double max_ratio = 0.0;
  std::vector<double> lx, ly;
  for (auto n : n_grid) {
    const double nd = static_cast<double>(n);
    const double num = regime == 'a' ? std::pow(nd, 1.0 - delta)
                                     : std::pow(std::log(nd), 1.0 + delta);
    const double ratio = num / static_cast<double>(m_schedule(n));
    max_ratio = std::max(max_ratio, ratio);
    if (n >= 100) {
      lx.push_back(std::log(nd));
      ly.push_back(std::log(ratio));
    }
  }
  if (lx.size() < 2) throw InvalidParameter("n grid needs at least two points with n >= 100");
  const double slope = stats::least_squares(lx, ly).slope;
  ConditionReport r;
  const std::string what = regime == 'a' ? "n^(1-delta)/m_n" : "log(n)^(1+delta)/m_n";
  r.add({"max " + what, max_ratio, std::numeric_limits<double>::infinity(),
         std::isfinite(max_ratio)});
  r.add({"log-log trend of " + what + " (n >= 100)", slope, 0.05, slope <= 0.05});
  // m_n ~ n^a log(n)^b for every schedule kind, so boundedness is decidable.
  double a = 0.0, b = 0.0;
  switch (m_schedule.kind) {
    case MSchedule::Kind::identity: a = 1.0; break;
    case MSchedule::Kind::power: a = m_schedule.param; break;
    case MSchedule::Kind::log: b = 1.0 + m_schedule.param; break;
    case MSchedule::Kind::constant: break;
  }
  const double en = regime == 'a' ? 1.0 - delta - a : -a;
  const double el = regime == 'a' ? -b : 1.0 + delta - b;
  const bool n_tied = std::abs(en) <= 1e-12;
  const double lead = n_tied ? el : en;
  r.add({std::string("asymptotic exponent of ") + what + (n_tied ? " (log n)" : " (n)"), lead, 0.0,
         lead <= 1e-12});
  return r;
}

enum class MomentMethod { closed_form, quadrature, monte_carlo };

inline MomentMethod parse_moment_method(std::string_view s) {
  if (s == "closed_form") return MomentMethod::closed_form;
  if (s == "quadrature") return MomentMethod::quadrature;
  if (s == "monte_carlo") return MomentMethod::monte_carlo;
  throw InvalidParameter("unknown moment method '" + std::string(s) + "'");
}

struct HMomentOptions {
  MomentMethod method = MomentMethod::quadrature;
  // Envelope style E G(X)^r when null; otherwise sup over these centers of
  // E|H(theta, X)|^r.
  const ParameterNet* net = nullptr;
  std::int64_t mc_draws = 1'000'000;
  std::uint64_t seed = 0x686d6f6dULL;
};

namespace detail {

// Monte Carlo E g(X) with a heavy-tail flag: the estimate is not trusted
// when a single draw carries more than 5% of the total.
struct McMoment {
  double mean = 0.0;
  double std_error = 0.0;
  bool heavy_tail = false;
};

inline McMoment mc_moment(const DataModel& data, const std::function<double(double)>& g,
                          std::int64_t draws, std::uint64_t seed) {
  RngStream rng(seed);
  std::vector<double> xs(static_cast<std::size_t>(draws));
  double total = 0.0, biggest = 0.0;
  for (auto& x : xs) {
    x = g(data.sample(rng));
    total += x;
    biggest = std::max(biggest, x);
  }
  const auto bm = stats::batch_means(xs, 20);
  return {bm.mean, bm.std_error, !(total > 0.0) ? false : biggest > 0.05 * total};
}

}  // namespace detail

// Finiteness of E G(X)^order (envelope style) or of sup_theta E|H(theta,X)|^order
// over a net (pointwise style).
inline ConditionReport check_h_moment(const FunctionFamily& family, const DataModel& data,
                                      double order, const HMomentOptions& opt = {}) {
  ConditionReport r;
  const bool pointwise = opt.net != nullptr;
  const std::string name = pointwise ? "sup_theta E|H(theta,X)|^" + fmt_num(order)
                                     : "E G(X)^" + fmt_num(order);
  const double inf = std::numeric_limits<double>::infinity();
  switch (opt.method) {
    case MomentMethod::closed_form: {
      if (pointwise || !family.envelope_moment_fn)
        throw AnalyticUnavailable("no closed-form moment registered for family '" + family.name +
                                  "'");
      const auto v = family.envelope_moment_fn(data, order);
      if (!v)
        throw AnalyticUnavailable("no closed-form moment for family '" + family.name +
                                  "' under '" + data.name + "'");
      r.add({name, *v, inf, std::isfinite(*v)});
      return r;
    }
    case MomentMethod::quadrature: {
      double value = 0.0, worst_err = 0.0;
      if (pointwise) {
        for (std::size_t i = 0; i < opt.net->size(); ++i) {
          std::vector<double> th(opt.net->center(i).begin(), opt.net->center(i).end());
          double err = 0.0;
          const auto kinks = family.kinks ? family.kinks(th) : std::vector<double>{};
          const double v = data.expectation(
              [&](double x) { return std::pow(std::abs(family(th, x)), order); }, kinks, 1e-10,
              &err);
          value = std::max(value, v);
          worst_err = std::max(worst_err, err);
        }
      } else {
        if (!family.envelope)
          throw InvalidParameter("family '" + family.name + "' has no registered envelope");
        const auto kinks = family.kinks ? family.kinks({}) : std::vector<double>{};
        value = data.expectation(
            [&](double x) { return std::pow(family.envelope(x), order); }, kinks, 1e-10,
            &worst_err);
      }
      Check c{name, value, inf, std::isfinite(value)};
      if (!std::isfinite(value) || worst_err > 1e-6 * std::max(1.0, std::abs(value))) {
        c.straddles = true;
        r.note("quadrature did not converge; the moment may be infinite");
      }
      r.add(c);
      return r;
    }
    case MomentMethod::monte_carlo: {
      detail::McMoment worst;
      if (pointwise) {
        for (std::size_t i = 0; i < opt.net->size(); ++i) {
          std::vector<double> th(opt.net->center(i).begin(), opt.net->center(i).end());
          const auto m = detail::mc_moment(
              data, [&](double x) { return std::pow(std::abs(family(th, x)), order); },
              opt.mc_draws, opt.seed);
          if (m.mean > worst.mean || m.heavy_tail) worst = m;
        }
      } else {
        if (!family.envelope)
          throw InvalidParameter("family '" + family.name + "' has no registered envelope");
        worst = detail::mc_moment(
            data, [&](double x) { return std::pow(family.envelope(x), order); }, opt.mc_draws,
            opt.seed);
      }
      Check c{name, worst.mean, inf, std::isfinite(worst.mean), Provenance::monte_carlo};
      c.std_error = worst.std_error;
      if (worst.heavy_tail) {
        c.straddles = true;
        r.note("warning: running maximum dominates the Monte Carlo sum (possible heavy tail)");
      }
      r.add(c);
      return r;
    }
  }
  return r;
}

struct HypothesisInputs {
  ExponentConfig exponents;
  WeightScheme scheme;
  FunctionFamily family;
  DataModel data = DataModel::uniform01();
  MomentMethod h_method = MomentMethod::quadrature;
  // Radius of the net on which pointwise moments are taken (T3).
  double net_radius = 0.05;
};

// All applicable checks for the configured theorem.
inline ConditionReport check_hypotheses(const HypothesisInputs& in) {
  const auto& e = in.exponents;
  ConditionReport r;
  HMomentOptions hopt;
  hopt.method = in.h_method;
  switch (e.theorem) {
    case Theorem::T1a:
    case Theorem::T1b: {
      const bool uniform_multinomial = in.scheme.kind == SchemeKind::multinomial &&
                                       in.scheme.probs_rule.kind == ProbsRule::Kind::uniform;
      r.add({"multinomial weights with uniform probabilities", uniform_multinomial ? 1.0 : 0.0,
             1.0, uniform_multinomial});
      if (!uniform_multinomial) break;
      const char regime = e.theorem == Theorem::T1a ? 'a' : 'b';
      r.merge(check_t1_regime(in.scheme.m_schedule, regime, e.delta));
      r.merge(check_h_moment(in.family, in.data, regime == 'a' ? 1.0 + e.delta : 2.0, hopt));
      break;
    }
    case Theorem::T2: {
      r.merge(check_exponent_triangle(e.p, e.alpha, e.beta));
      const auto grid = default_growth_grid();
      r.merge(check_weight_growth(in.scheme, e.alpha, 1.0, grid));
      r.merge(check_weight_growth(in.scheme, 1.0, 1.0 / e.p, grid));
      r.merge(check_h_moment(in.family, in.data, e.beta, hopt));
      break;
    }
    case Theorem::T3: {
      r.add({"p in (1,2)", e.p, 2.0, e.p > 1.0 && e.p < 2.0});
      r.add({"Holder modulus registered", in.family.holder ? 1.0 : 0.0, 1.0,
             in.family.holder.has_value()});
      if (!(e.p > 1.0 && e.p < 2.0) || !in.family.holder) break;
      const double thr = q_threshold(e.p, in.family.dim, in.family.holder->a);
      r.add({"q > q_threshold(p, D, a)", e.q, thr, e.q > thr});
      r.merge(check_weight_growth(in.scheme, e.q, 1.0, default_growth_grid()));
      const auto net = build_net(in.family.box, in.net_radius);
      hopt.net = &net;
      r.merge(check_h_moment(in.family, in.data, e.q, hopt));
      break;
    }
  }
  if (e.theorem == Theorem::T2 || e.theorem == Theorem::T3) {
    if (in.scheme.kind == SchemeKind::bayesian_dirichlet || in.scheme.kind == SchemeKind::independent)
      r.note("NOD of " + std::string(to_string(in.scheme.kind)) +
             " weights is taken from the literature (documented, not machine-checked)");
    else
      r.note("NOD of " + std::string(to_string(in.scheme.kind)) +
             " weights: see check-nod for exact small-n verification");
  }
  return r;
}

}  // namespace ulln
