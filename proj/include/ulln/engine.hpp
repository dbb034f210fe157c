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

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ulln/conditions.hpp"
#include "ulln/error.hpp"
#include "ulln/family.hpp"
#include "ulln/netcover.hpp"
#include "ulln/rng.hpp"
#include "ulln/schemes.hpp"
#include "ulln/stats.hpp"
#include "ulln/text.hpp"

namespace ulln {

enum class Scaling { theorem1, theorem23 };

inline std::string_view to_string(Scaling s) {
  return s == Scaling::theorem1 ? "theorem1" : "theorem23";
}

inline Scaling parse_scaling(std::string_view s) {
  if (s == "theorem1") return Scaling::theorem1;
  if (s == "theorem23") return Scaling::theorem23;
  throw InvalidParameter("unknown scaling '" + std::string(s) + "' (theorem1, theorem23)");
}

struct NetRule {
  enum class Kind { fixed, rn_schedule };
  Kind kind = Kind::fixed;
  double radius = 0.01;   // fixed
  double epsilon = 0.1;   // rn_schedule

  static NetRule fixed(double r) { return {Kind::fixed, r, 0.1}; }
  static NetRule rn_schedule(double eps) { return {Kind::rn_schedule, 0.01, eps}; }

  std::string describe() const {
    return kind == Kind::fixed ? "fixed:" + format_double(radius)
                               : "rn_schedule:" + format_double(epsilon);
  }
};

struct ExperimentConfig {
  std::string experiment_id = "experiment";
  FunctionFamily family = families::abs_loc();
  DataModel data = DataModel::uniform01();
  WeightScheme scheme;
  Scaling scaling = Scaling::theorem1;
  double p = 1.0;
  std::vector<std::int64_t> n_grid{100, 316, 1000, 3162, 10000};
  std::int64_t replications = 200;
  NetRule net_rule;
  std::uint64_t seed = 1;
  unsigned threads = 1;  // 0: hardware concurrency
  // Hypotheses to precheck; derived from scaling and scheme when unset.
  std::optional<ExponentConfig> conditions;
  MomentMethod h_method = MomentMethod::quadrature;
  bool force = false;
  bool timing = false;

  // Config field responsible for a scheme validation failure.
  std::string scheme_field() const {
    switch (scheme.kind) {
      case SchemeKind::multinomial: return "scheme.m";
      case SchemeKind::hypergeometric_delete_d:
      case SchemeKind::downweight_d: return "scheme.d";
      case SchemeKind::independent: return "scheme.shape";
      case SchemeKind::gaussian_nod: return "scheme.rho";
      default: return "scheme.kind";
    }
  }

  void validate() const {
    family.validate();
    for (auto n : n_grid) {
      if (n < 2) throw ConfigError("experiment.n_grid", "every n must be >= 2");
      try {
        scheme.validate(n);
      } catch (const InvalidParameter& e) {
        throw ConfigError(scheme_field(), e.message());
      }
    }
    if (scaling == Scaling::theorem1 && scheme.kind != SchemeKind::multinomial)
      throw ConfigError("scheme.kind", "theorem1 scaling requires a multinomial scheme");
    if (scaling == Scaling::theorem23 && !(p >= 1.0 && p < 2.0))
      throw ConfigError("experiment.p", "theorem23 scaling requires p in [1, 2)");
    if (n_grid.empty()) throw ConfigError("experiment.n_grid", "n grid is empty");
    for (std::size_t i = 0; i < n_grid.size(); ++i) {
      if (n_grid[i] < 2) throw ConfigError("experiment.n_grid", "every n must be >= 2");
      if (i > 0 && n_grid[i] <= n_grid[i - 1])
        throw ConfigError("experiment.n_grid", "n grid must be strictly increasing");
    }
    if (replications < 1) throw ConfigError("experiment.replications", "need R >= 1");
    if (net_rule.kind == NetRule::Kind::fixed && !(net_rule.radius > 0.0))
      throw ConfigError("net.radius", "net radius must be > 0");
    if (net_rule.kind == NetRule::Kind::rn_schedule) {
      if (!(net_rule.epsilon > 0.0)) throw ConfigError("net.epsilon", "epsilon must be > 0");
      if (!(p > 1.0 && p < 2.0))
        throw ConfigError("experiment.p", "rn_schedule nets need p in (1, 2)");
      if (!family.holder)
        throw ConfigError("family.name", "rn_schedule nets need a Holder family");
    }
  }
};

struct DeviationRecord {
  std::int64_t n = 0;
  std::int64_t m_n = 0;
  std::int64_t replicate = 0;
  std::uint64_t seed = 0;
  double sup_dev = 0.0;
  std::size_t net_size = 0;
  double wall_ms = 0.0;
  // Bound on sup over the box minus max over the net (Holder families).
  double gap_bound = std::numeric_limits<double>::quiet_NaN();
};

struct DeviationCurve {
  std::string experiment_id;
  std::string scheme_id;
  Scaling scaling = Scaling::theorem1;
  double p = 1.0;
  NetRule net_rule;
  std::vector<DeviationRecord> records;
  // Set when the run stopped early; records then hold the completed prefix.
  std::optional<std::string> failure;

  static std::string csv_header() {
    return "experiment_id,scheme,n,m_n,p,replicate,seed,sup_dev,net_size,wall_ms";
  }

  std::string to_csv() const {
    std::ostringstream os;
    os << csv_header() << '\n';
    const std::string id = csv_field(experiment_id), sch = csv_field(scheme_id);
    for (const auto& r : records)
      os << id << ',' << sch << ',' << r.n << ',' << r.m_n << ',' << format_double(p) << ','
         << r.replicate << ',' << r.seed << ',' << format_double(r.sup_dev) << ',' << r.net_size
         << ',' << format_double(r.wall_ms) << '\n';
    if (failure) os << "#FAILED," << csv_field(*failure) << '\n';
    return os.str();
  }

  std::vector<std::int64_t> distinct_n() const {
    std::vector<std::int64_t> out;
    for (const auto& r : records)
      if (out.empty() || out.back() != r.n) out.push_back(r.n);
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  std::vector<double> values_at(std::int64_t n) const {
    std::vector<double> out;
    for (const auto& r : records)
      if (r.n == n) out.push_back(r.sup_dev);
    return out;
  }
};

// A run that stopped on an error; carries the records completed before it.
class ExperimentFailed : public Error {
 public:
  ExperimentFailed(std::string kind, const std::string& what, DeviationCurve partial)
      : Error(std::move(kind), what), partial_(std::move(partial)) {}
  const DeviationCurve& partial() const noexcept { return partial_; }

 private:
  DeviationCurve partial_;
};

namespace detail {

inline double checked_eval(const FunctionFamily& f, std::span<const double> theta, double x) {
  const double v = f(theta, x);
  if (!std::isfinite(v)) {
    std::ostringstream os;
    os.precision(17);
    os << "non-finite H at theta=(";
    for (std::size_t k = 0; k < theta.size(); ++k) os << (k ? "," : "") << theta[k];
    os << "), x=" << x;
    throw NonFiniteValue(os.str());
  }
  return v;
}

inline void check_sizes(std::span<const double> data, const WeightVector& w,
                        const ParameterNet& net, std::span<const double> mu) {
  if (w.values.size() != data.size())
    throw InvalidParameter("weight vector and data differ in length");
  if (mu.size() != net.size()) throw InvalidParameter("need one mean per net center");
  if (net.size() == 0) throw InvalidParameter("empty parameter net");
}

}  // namespace detail

// max_i |(1/m_n) sum_j W_nj H(theta_i, X_j) - mu(theta_i)|.
inline double sup_deviation_t1(const FunctionFamily& family, std::span<const double> data,
                               const WeightVector& weights, std::int64_t m_n,
                               const ParameterNet& net, std::span<const double> mu) {
  detail::check_sizes(data, weights, net, mu);
  if (m_n < 1) throw InvalidParameter("m_n must be positive");
  const double inv_m = 1.0 / static_cast<double>(m_n);
  double best = 0.0;
  for (std::size_t i = 0; i < net.size(); ++i) {
    const auto theta = net.center(i);
    double s = 0.0;
    for (std::size_t j = 0; j < data.size(); ++j)
      if (weights.values[j] != 0.0)
        s += weights.values[j] * detail::checked_eval(family, theta, data[j]);
    best = std::max(best, std::abs(s * inv_m - mu[i]));
  }
  return best;
}

// max_i n^(-1/p) |sum_j (W_nj H(theta_i, X_j) - E(W_nj) mu(theta_i))|.
inline double sup_deviation_t23(const FunctionFamily& family, std::span<const double> data,
                                const WeightVector& weights, double p, const ParameterNet& net,
                                std::span<const double> mu, std::span<const double> weight_means) {
  detail::check_sizes(data, weights, net, mu);
  if (weight_means.size() != data.size())
    throw InvalidParameter("need one weight mean per observation");
  if (!(p >= 1.0)) throw InvalidParameter("p must be >= 1");
  double mean_mass = 0.0;
  for (double e : weight_means) mean_mass += e;
  const double scale = std::pow(static_cast<double>(data.size()), -1.0 / p);
  double best = 0.0;
  for (std::size_t i = 0; i < net.size(); ++i) {
    const auto theta = net.center(i);
    double s = 0.0;
    for (std::size_t j = 0; j < data.size(); ++j)
      if (weights.values[j] != 0.0)
        s += weights.values[j] * detail::checked_eval(family, theta, data[j]);
    best = std::max(best, std::abs(s - mean_mass * mu[i]));
  }
  return scale * best;
}

// Same statistic with W = W+ - W- accumulated separately, as in the
// decomposition into nonnegative monotone transforms of the weights.
inline double sup_deviation_t23_split(const FunctionFamily& family, std::span<const double> data,
                                      const WeightVector& weights, double p,
                                      const ParameterNet& net, std::span<const double> mu,
                                      std::span<const double> weight_means) {
  detail::check_sizes(data, weights, net, mu);
  if (weight_means.size() != data.size())
    throw InvalidParameter("need one weight mean per observation");
  double mean_pos = 0.0, mean_neg = 0.0;
  for (double e : weight_means) (e >= 0.0 ? mean_pos : mean_neg) += std::abs(e);
  const double scale = std::pow(static_cast<double>(data.size()), -1.0 / p);
  double best = 0.0;
  for (std::size_t i = 0; i < net.size(); ++i) {
    const auto theta = net.center(i);
    double pos = 0.0, neg = 0.0;
    for (std::size_t j = 0; j < data.size(); ++j) {
      const double w = weights.values[j];
      const double h = detail::checked_eval(family, theta, data[j]);
      if (w > 0.0) pos += w * h;
      else if (w < 0.0) neg += -w * h;
    }
    best = std::max(best, std::abs((pos - mean_pos * mu[i]) - (neg - mean_neg * mu[i])));
  }
  return scale * best;
}

inline std::vector<double> net_means(const FunctionFamily& family, const ParameterNet& net,
                                     const DataModel& data) {
  std::vector<double> mu(net.size());
  for (std::size_t i = 0; i < net.size(); ++i) mu[i] = family_mean(family, net.center(i), data).value;
  return mu;
}

// The precheck hypotheses implied by a config when none are given.
inline ExponentConfig default_hypotheses(const ExperimentConfig& cfg) {
  if (cfg.conditions) return *cfg.conditions;
  ExponentConfig e;
  if (cfg.scaling == Scaling::theorem1) {
    const auto& m = cfg.scheme.m_schedule;
    switch (m.kind) {
      case MSchedule::Kind::identity: e.theorem = Theorem::T1a; e.delta = 0.0; break;
      case MSchedule::Kind::power: e.theorem = Theorem::T1a; e.delta = 1.0 - m.param; break;
      case MSchedule::Kind::log: e.theorem = Theorem::T1b; e.delta = m.param; break;
      case MSchedule::Kind::constant: e.theorem = Theorem::T1a; e.delta = 0.0; break;
    }
    return e;
  }
  e.p = cfg.p;
  if (cfg.net_rule.kind == NetRule::Kind::rn_schedule && cfg.family.holder) {
    // Shrinking nets: the smallest integer moment order above the threshold.
    e.theorem = Theorem::T3;
    e.q = std::floor(q_threshold(cfg.p, cfg.family.dim, cfg.family.holder->a)) + 1.0;
    return e;
  }
  e.theorem = Theorem::T2;
  e.alpha = 4.0 * cfg.p;
  e.beta = 4.0 * cfg.p / 3.0;
  return e;
}

inline ConditionReport precheck(const ExperimentConfig& cfg) {
  HypothesisInputs in;
  in.exponents = default_hypotheses(cfg);
  in.scheme = cfg.scheme;
  in.family = cfg.family;
  in.data = cfg.data;
  in.h_method = cfg.h_method;
  return check_hypotheses(in);
}

// Replicated sup-deviation experiment. Every (n, replicate) unit draws from
// its own substream of cfg.seed, so the output does not depend on the thread
// count or schedule. Throws PrecheckFailed when the hypotheses are violated
// and cfg.force is unset, and ExperimentFailed (with the completed prefix)
// when a unit fails.
inline DeviationCurve run_experiment(const ExperimentConfig& cfg,
                                     ConditionReport* precheck_out = nullptr) {
  cfg.validate();
  const auto pre = precheck(cfg);
  if (precheck_out) *precheck_out = pre;
  if (pre.verdict == Verdict::violated && !cfg.force)
    throw PrecheckFailed("hypotheses violated for this configuration (use --force to run "
                         "anyway):\n" + pre.to_text());

  struct PerN {
    std::int64_t n = 0, m_n = 0;
    ParameterNet net;
    std::vector<double> mu, means;
    double gap_unit = std::numeric_limits<double>::quiet_NaN();  // M r^a
  };
  std::vector<PerN> per_n;
  std::optional<ParameterNet> fixed_net;
  std::vector<double> fixed_mu;
  if (cfg.net_rule.kind == NetRule::Kind::fixed) {
    fixed_net = build_net(cfg.family.box, cfg.net_rule.radius);
    fixed_mu = net_means(cfg.family, *fixed_net, cfg.data);
  }
  for (auto n : cfg.n_grid) {
    PerN pn;
    pn.n = n;
    pn.m_n = cfg.scheme.kind == SchemeKind::multinomial ? cfg.scheme.m_schedule(n) : n;
    if (fixed_net) {
      pn.net = *fixed_net;
      pn.mu = fixed_mu;
    } else {
      pn.net = build_rn_schedule(cfg.family, cfg.p, cfg.net_rule.epsilon, n);
      pn.mu = net_means(cfg.family, pn.net, cfg.data);
    }
    if (cfg.scaling == Scaling::theorem23) pn.means = weight_means(cfg.scheme, n);
    if (cfg.family.holder) pn.gap_unit = cfg.family.holder->M * std::pow(pn.net.radius, cfg.family.holder->a);
    per_n.push_back(std::move(pn));
  }

  const auto R = static_cast<std::size_t>(cfg.replications);
  const std::size_t units = per_n.size() * R;
  std::vector<DeviationRecord> results(units);
  std::vector<std::exception_ptr> errors(units);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};

  auto work = [&] {
    std::vector<double> data;
    while (!stop.load(std::memory_order_relaxed)) {
      const std::size_t u = next.fetch_add(1);
      if (u >= units) return;
      const auto& pn = per_n[u / R];
      const auto rep = static_cast<std::int64_t>(u % R);
      DeviationRecord rec;
      rec.n = pn.n;
      rec.m_n = pn.m_n;
      rec.replicate = rep;
      rec.seed = derive_stream_key(
          cfg.seed, {static_cast<std::uint64_t>(pn.n), static_cast<std::uint64_t>(rep)});
      rec.net_size = pn.net.size();
      try {
        const auto t0 = std::chrono::steady_clock::now();
        RngStream data_rng = RngStream::substream(rec.seed, {0});
        RngStream weight_rng = RngStream::substream(rec.seed, {1});
        data.resize(static_cast<std::size_t>(pn.n));
        for (auto& x : data) x = cfg.data.sample(data_rng);
        const auto w = sample_weights(cfg.scheme, pn.n, weight_rng);
        double mass = 0.0;
        for (double v : w.values) mass += std::abs(v);
        if (cfg.scaling == Scaling::theorem1) {
          rec.sup_dev = sup_deviation_t1(cfg.family, data, w, pn.m_n, pn.net, pn.mu);
          rec.gap_bound = pn.gap_unit * (mass / static_cast<double>(pn.m_n) + 1.0);
        } else {
          rec.sup_dev = sup_deviation_t23(cfg.family, data, w, cfg.p, pn.net, pn.mu, pn.means);
          double mean_mass = 0.0;
          for (double e : pn.means) mean_mass += std::abs(e);
          rec.gap_bound = pn.gap_unit * (mass + mean_mass) *
                          std::pow(static_cast<double>(pn.n), -1.0 / cfg.p);
        }
        if (cfg.timing)
          rec.wall_ms = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - t0).count();
        results[u] = rec;
      } catch (...) {
        errors[u] = std::current_exception();
        stop.store(true);
      }
    }
  };

  unsigned threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, units));
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work);
  }

  DeviationCurve curve;
  curve.experiment_id = cfg.experiment_id;
  curve.scheme_id = cfg.scheme.describe();
  curve.scaling = cfg.scaling;
  curve.p = cfg.p;
  curve.net_rule = cfg.net_rule;
  const auto failed = std::find_if(errors.begin(), errors.end(), [](const auto& e) { return e; });
  for (std::size_t u = 0; u < units && !errors[u] && results[u].n != 0; ++u)
    curve.records.push_back(results[u]);
  if (failed != errors.end()) {
    const auto u = static_cast<std::size_t>(failed - errors.begin());
    std::string kind = "error", msg = "unknown failure";
    try {
      std::rethrow_exception(*failed);
    } catch (const Error& e) {
      kind = e.kind();
      msg = e.message();
    } catch (const std::exception& e) {
      msg = e.what();
    }
    msg += " (n=" + std::to_string(per_n[u / R].n) + ", replicate=" + std::to_string(u % R) + ")";
    curve.failure = msg;
    throw ExperimentFailed(kind, msg, curve);
  }
  return curve;
}

enum class SummaryStat { median, mean };

inline std::string_view to_string(SummaryStat s) { return s == SummaryStat::median ? "median" : "mean"; }

inline SummaryStat parse_summary_stat(std::string_view s) {
  if (s == "median") return SummaryStat::median;
  if (s == "mean") return SummaryStat::mean;
  throw InvalidParameter("unknown summary statistic '" + std::string(s) + "'");
}

struct RateEstimate {
  double slope = 0.0;
  double intercept = 0.0;
  double std_error = 0.0;
  SummaryStat summary = SummaryStat::median;
  std::vector<std::int64_t> n;
  std::vector<double> values;  // summary of sup_dev per n

  static std::string csv_header() { return "experiment_id,summary,slope,intercept,stderr,points"; }

  std::string csv_row(const std::string& experiment_id) const {
    return csv_field(experiment_id) + ',' + std::string(to_string(summary)) + ',' +
           format_double(slope) + ',' + format_double(intercept) + ',' +
           format_double(std_error) + ',' + std::to_string(n.size());
  }

  std::string to_text() const {
    std::ostringstream os;
    os.precision(6);
    os << "rate (" << to_string(summary) << " of sup_dev vs n, log-log): slope " << slope
       << " +/- " << std_error << ", intercept " << intercept << '\n';
    for (std::size_t i = 0; i < n.size(); ++i) os << "  n=" << n[i] << "  " << values[i] << '\n';
    os << "(finite-n proxy; almost-sure convergence is not checked directly)\n";
    return os.str();
  }
};

inline double summarize(std::vector<double> v, SummaryStat s) {
  if (v.empty()) throw InvalidParameter("no records to summarize");
  if (s == SummaryStat::median) return stats::median(std::move(v));
  double t = 0.0;
  for (double x : v) t += x;
  return t / static_cast<double>(v.size());
}

// Least squares of log(summary sup_dev) on log(n).
inline RateEstimate estimate_rate(const DeviationCurve& curve,
                                  SummaryStat summary = SummaryStat::median) {
  RateEstimate est;
  est.summary = summary;
  est.n = curve.distinct_n();
  if (est.n.size() < 4)
    throw InvalidParameter("rate estimation needs at least 4 distinct n values; got " +
                           std::to_string(est.n.size()));
  std::vector<double> lx, ly;
  for (auto n : est.n) {
    const double v = summarize(curve.values_at(n), summary);
    if (!(v > 0.0))
      throw ZeroSummary("summary sup_dev is " + format_double(v) + " at n=" + std::to_string(n) +
                        "; log-log fit undefined");
    est.values.push_back(v);
    lx.push_back(std::log(static_cast<double>(n)));
    ly.push_back(std::log(v));
  }
  const auto fit = stats::least_squares(lx, ly);
  est.slope = fit.slope;
  est.intercept = fit.intercept;
  est.std_error = fit.slope_stderr;
  return est;
}

// Per-n summary rows for the summary CSV.
struct SummaryRow {
  std::int64_t n = 0, m_n = 0, replicates = 0;
  double median = 0.0, mean = 0.0, q90 = 0.0, max_gap_bound = 0.0;
  std::size_t net_size = 0;
};

inline std::vector<SummaryRow> summarize_curve(const DeviationCurve& curve) {
  std::vector<SummaryRow> out;
  for (auto n : curve.distinct_n()) {
    SummaryRow row;
    row.n = n;
    std::vector<double> v;
    double gap = 0.0;
    for (const auto& r : curve.records)
      if (r.n == n) {
        v.push_back(r.sup_dev);
        row.m_n = r.m_n;
        row.net_size = r.net_size;
        gap = std::max(gap, r.gap_bound);
      }
    row.replicates = static_cast<std::int64_t>(v.size());
    row.median = summarize(v, SummaryStat::median);
    row.mean = summarize(v, SummaryStat::mean);
    row.q90 = stats::quantile(v, 0.9);
    row.max_gap_bound = gap;
    out.push_back(row);
  }
  return out;
}

inline std::string summary_csv(const DeviationCurve& curve) {
  std::ostringstream os;
  os << "experiment_id,n,m_n,replicates,median,mean,q90,net_size,net_gap_bound\n";
  for (const auto& r : summarize_curve(curve))
    os << csv_field(curve.experiment_id) << ',' << r.n << ',' << r.m_n << ',' << r.replicates
       << ',' << format_double(r.median) << ',' << format_double(r.mean) << ','
       << format_double(r.q90) << ',' << r.net_size << ',' << format_double(r.max_gap_bound)
       << '\n';
  return os.str();
}

struct RosenthalRow {
  std::string label;
  std::int64_t n = 0;
  double lhs = 0.0;      // E|sum_j Y_j|^q
  double lhs_se = 0.0;
  double rhs1 = 0.0;     // sum_j E|Y_j|^q
  double rhs2 = 0.0;     // (sum_j E Y_j^2)^(q/2)
  double ratio = 0.0;    // lhs / (rhs1 + rhs2)
  bool unstable = false;

  static std::string csv_header() { return "label,n,lhs,lhs_se,rhs1,rhs2,ratio,unstable"; }
  std::string csv_row() const {
    return csv_field(label) + ',' + std::to_string(n) + ',' + format_double(lhs) + ',' +
           format_double(lhs_se) + ',' + format_double(rhs1) + ',' + format_double(rhs2) + ',' +
           format_double(ratio) + ',' + (unstable ? "true" : "false");
  }
};

namespace detail {

inline void finish_row(RosenthalRow& row, std::span<const double> sums_q) {
  const auto bm = stats::batch_means(sums_q, 20);
  row.lhs = bm.mean;
  row.lhs_se = bm.std_error;
  const double denom = row.rhs1 + row.rhs2;
  row.ratio = denom > 0.0 ? row.lhs / denom : 0.0;
  row.unstable = row.lhs > 0.0 ? row.lhs_se / row.lhs > 0.2 : row.lhs_se > 0.0;
}

}  // namespace detail

// Monte Carlo check of E|sum Y|^q <= C [sum E|Y|^q + (sum E Y^2)^(q/2)] for
// Y_j = W_nj H(theta, X_j) - E(W_nj) mu(theta). Right-hand moments are taken
// from the same replicates.
inline std::vector<RosenthalRow> rosenthal_stress(const WeightScheme& scheme,
                                                  const FunctionFamily& family,
                                                  const DataModel& data,
                                                  std::span<const double> theta, double q,
                                                  const std::vector<std::int64_t>& n_grid,
                                                  std::int64_t R, std::uint64_t seed) {
  if (!(q > 2.0)) throw InvalidParameter("Rosenthal order q must exceed 2");
  if (R < 20) throw InvalidParameter("Rosenthal stress needs R >= 20 replicates");
  if (static_cast<int>(theta.size()) != family.dim)
    throw InvalidParameter("theta has the wrong dimension");
  const double mu = family_mean(family, theta, data).value;
  std::vector<RosenthalRow> rows;
  for (auto n : n_grid) {
    scheme.validate(n);
    const auto means = weight_means(scheme, n);
    RosenthalRow row;
    row.label = "scheme";
    row.n = n;
    std::vector<double> sums_q(static_cast<std::size_t>(R));
    double abs_q = 0.0, sq = 0.0;
    for (std::int64_t r = 0; r < R; ++r) {
      const auto key = derive_stream_key(seed, {static_cast<std::uint64_t>(n),
                                                static_cast<std::uint64_t>(r)});
      RngStream data_rng = RngStream::substream(key, {0});
      RngStream weight_rng = RngStream::substream(key, {1});
      const auto w = sample_weights(scheme, n, weight_rng);
      double s = 0.0;
      for (std::size_t j = 0; j < w.values.size(); ++j) {
        const double y =
            w.values[j] * detail::checked_eval(family, theta, data.sample(data_rng)) -
            means[j] * mu;
        s += y;
        abs_q += std::pow(std::abs(y), q);
        sq += y * y;
      }
      sums_q[static_cast<std::size_t>(r)] = std::pow(std::abs(s), q);
    }
    row.rhs1 = abs_q / static_cast<double>(R);
    row.rhs2 = std::pow(sq / static_cast<double>(R), q / 2.0);
    detail::finish_row(row, sums_q);
    rows.push_back(row);
  }
  return rows;
}

// Calibration with i.i.d. standard normal Y: E|sum Y|^q / n^(q/2) equals
// E|Z|^q (3 at q = 4). Right-hand moments are exact.
inline RosenthalRow rosenthal_gaussian_calibration(std::int64_t n, double q, std::int64_t R,
                                                   std::uint64_t seed) {
  if (!(q > 2.0)) throw InvalidParameter("Rosenthal order q must exceed 2");
  if (R < 20 || n < 1) throw InvalidParameter("calibration needs R >= 20 and n >= 1");
  const double abs_moment = std::pow(2.0, q / 2.0) * std::tgamma((q + 1.0) / 2.0) /
                            std::sqrt(std::numbers::pi);
  RosenthalRow row;
  row.label = "gaussian_calibration";
  row.n = n;
  row.rhs1 = static_cast<double>(n) * abs_moment;
  row.rhs2 = std::pow(static_cast<double>(n), q / 2.0);
  std::vector<double> sums_q(static_cast<std::size_t>(R));
  RngStream rng = RngStream::substream(seed, {0x6761757373ULL, static_cast<std::uint64_t>(n)});
  for (auto& v : sums_q) {
    double s = 0.0;
    for (std::int64_t j = 0; j < n; ++j) s += detail::standard_normal(rng);
    v = std::pow(std::abs(s), q);
  }
  detail::finish_row(row, sums_q);
  return row;
}

struct SummabilityReport {
  double gamma = 0.0;
  double epsilon = 0.0;
  std::vector<std::int64_t> n;
  std::vector<double> freq;
  std::optional<stats::LineFit> fit;
  std::string note;

  static std::string csv_header() { return "n,exceedance_freq"; }

  std::string to_csv() const {
    std::ostringstream os;
    os << csv_header() << '\n';
    for (std::size_t i = 0; i < n.size(); ++i) os << n[i] << ',' << format_double(freq[i]) << '\n';
    return os.str();
  }

  std::string to_text() const {
    std::ostringstream os;
    os.precision(6);
    os << "gamma = " << gamma << " (> 1 required)\n";
    for (std::size_t i = 0; i < n.size(); ++i)
      os << "  n=" << n[i] << "  P(sup_dev > " << epsilon << ") ~ " << freq[i] << '\n';
    if (fit) os << "log-log slope of exceedance frequency: " << fit->slope << " (expected <= -gamma)\n";
    if (!note.empty()) os << note << '\n';
    os << "(exceedance decay is a finite-n proxy for the Borel-Cantelli step)\n";
    return os.str();
  }
};

inline SummabilityReport summability_proxy(const DeviationCurve& curve, double epsilon, double q,
                                           double p, double D, double a) {
  if (!(epsilon > 0.0)) throw InvalidParameter("epsilon must be > 0");
  if (curve.net_rule.kind == NetRule::Kind::rn_schedule &&
      std::abs(curve.net_rule.epsilon - epsilon) > 1e-12 * epsilon)
    throw InvalidParameter("curve was produced with rn_schedule epsilon " +
                           format_double(curve.net_rule.epsilon) + ", not " +
                           format_double(epsilon));
  SummabilityReport rep;
  rep.epsilon = epsilon;
  rep.gamma = summability_exponent(q, p, D, a);
  if (!(rep.gamma > 1.0))
    throw OutsideHypotheses("gamma = " + format_double(rep.gamma) +
                            " <= 1: configuration outside the shrinking-net hypotheses");
  std::vector<double> lx, ly;
  for (auto n : curve.distinct_n()) {
    const auto v = curve.values_at(n);
    double hits = 0.0;
    for (double x : v) hits += x > epsilon ? 1.0 : 0.0;
    const double f = hits / static_cast<double>(v.size());
    rep.n.push_back(n);
    rep.freq.push_back(f);
    if (f > 0.0) {
      lx.push_back(std::log(static_cast<double>(n)));
      ly.push_back(std::log(f));
    }
  }
  bool beyond_first = true;
  for (std::size_t i = 1; i < rep.freq.size(); ++i) beyond_first = beyond_first && rep.freq[i] == 0.0;
  if (lx.size() >= 2) rep.fit = stats::least_squares(lx, ly);
  if (lx.empty())
    rep.note = "no exceedances";
  else if (beyond_first && rep.freq.size() > 1)
    rep.note = "no exceedances beyond the smallest n";
  else if (!rep.fit)
    rep.note = "too few rows with exceedances to fit a slope";
  return rep;
}

}  // namespace ulln
