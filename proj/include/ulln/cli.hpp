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

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ulln/conditions.hpp"
#include "ulln/config.hpp"
#include "ulln/csv.hpp"
#include "ulln/engine.hpp"
#include "ulln/error.hpp"
#include "ulln/exactdist.hpp"
#include "ulln/netcover.hpp"
#include "ulln/text.hpp"

#ifndef ULLN_VERSION
#define ULLN_VERSION "0.0.0"
#endif

namespace ulln::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitPrecheck = 2;
inline constexpr int kExitViolated = 3;
inline constexpr int kExitUndetermined = 4;

struct Streams {
  std::ostream& out;
  std::ostream& err;
};

struct SeedChoice {
  std::uint64_t seed = 0;
  std::string source;  // flag, env or config
};

// --seed beats ULLN_SEED beats the config file.
inline SeedChoice resolve_seed(const std::string& flag, const char* env, std::uint64_t config) {
  if (!flag.empty()) return {config_detail::parse_u64("--seed", flag), "flag"};
  if (env && *env) return {config_detail::parse_u64("ULLN_SEED", env), "env"};
  return {config, "config"};
}

inline std::string iso_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace fs = std::filesystem;

inline void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InvalidParameter("cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw InvalidParameter("write failed for '" + path.string() + "'");
}

// Gnuplot commands over the CSVs next to it.
inline std::string plot_script(const RunConfig& rc, const std::optional<RateEstimate>& rate) {
  std::ostringstream os;
  os << "# Plot for experiment " << rc.experiment.experiment_id << ". Run: gnuplot plot.gp\n"
     << "set datafile separator ','\n"
     << "set terminal pngcairo size 900,600\n"
     << "set output 'sup_dev.png'\n"
     << "set logscale xy\n"
     << "set xlabel 'n'\n"
     << "set ylabel 'sup deviation over the net'\n"
     << "set key top right\n"
     << "set title '" << rc.experiment.experiment_id << " (" << to_string(rc.experiment.scaling)
     << ")' noenhanced\n";
  if (rate)
    os << "fit_line(x) = exp(" << format_double(rate->intercept) << ") * x**("
       << format_double(rate->slope) << ")\n";
  os << "plot 'deviations.csv' every ::1 using 3:8 with points pt 7 ps 0.3 lc rgb '#9a9a9a' "
        "title 'replicates', \\\n"
     << "     'summary.csv' every ::1 using 2:5 with linespoints lw 2 pt 5 title 'median', \\\n"
     << "     'summary.csv' every ::1 using 2:6 with linespoints lw 1 pt 4 title 'mean'";
  if (rate)
    os << ", \\\n     fit_line(x) with lines dt 2 lw 2 title sprintf('slope %.3f', "
       << format_double(rate->slope) << ")";
  os << '\n';
  return os.str();
}

struct RunOptions {
  std::string config;
  std::string out = "ulln-out";
  std::string seed;
  int threads = -1;
  bool force = false;
  bool strict = false;
  bool timing = false;
};

inline int cmd_run(const RunOptions& o, Streams s, const char* env_seed) {
  auto rc = parse_config_file(o.config, o.strict);
  for (const auto& w : rc.warnings) s.err << "warning: " << w << '\n';
  const auto seed = resolve_seed(o.seed, env_seed, rc.experiment.seed);
  const std::string digest = rc.digest();
  auto& cfg = rc.experiment;
  cfg.seed = seed.seed;
  if (o.threads >= 0) cfg.threads = static_cast<unsigned>(o.threads);
  cfg.force = cfg.force || o.force;
  cfg.timing = cfg.timing || o.timing;

  nlohmann::ordered_json manifest;
  manifest["experiment_id"] = cfg.experiment_id;
  manifest["config_digest"] = digest;
  manifest["config_path"] = o.config;
  manifest["seed"] = seed.seed;
  manifest["seed_source"] = seed.source;
  manifest["tool_version"] = ULLN_VERSION;
  manifest["started"] = iso_now();
  nlohmann::ordered_json echo;
  for (const auto& [k, v] : rc.canonical(true)) echo[k] = v;
  manifest["config"] = echo;

  const fs::path out(o.out);
  ConditionReport pre;
  DeviationCurve curve;
  try {
    curve = run_experiment(cfg, &pre);
  } catch (const PrecheckFailed& e) {
    s.err << e.message() << '\n';
    return kExitPrecheck;
  } catch (const ExperimentFailed& e) {
    fs::create_directories(out);
    write_file(out / "deviations.csv", e.partial().to_csv());
    manifest["status"] = "failed";
    manifest["error"] = e.what();
    manifest["finished"] = iso_now();
    manifest["outputs"] = {"deviations.csv"};
    write_file(out / "manifest.json", manifest.dump(2) + "\n");
    s.err << "error: " << e.what() << '\n';
    return kExitError;
  }
  s.out << "precheck: " << to_string(pre.verdict) << '\n';
  if (pre.verdict != Verdict::satisfied) s.err << pre.to_text();

  fs::create_directories(out);
  std::vector<std::string> outputs{"deviations.csv", "summary.csv", "rates.csv"};
  write_file(out / "deviations.csv", curve.to_csv());
  write_file(out / "summary.csv", summary_csv(curve));
  std::optional<RateEstimate> rate;
  std::string rates = RateEstimate::csv_header() + "\n";
  try {
    rate = estimate_rate(curve, rc.summary);
    rates += rate->csv_row(cfg.experiment_id) + "\n";
    s.out << rate->to_text();
  } catch (const Error& e) {
    s.err << "warning: no rate estimate: " << e.what() << '\n';
  }
  write_file(out / "rates.csv", rates);
  if (cfg.net_rule.kind == NetRule::Kind::rn_schedule && cfg.conditions &&
      cfg.conditions->theorem == Theorem::T3) {
    try {
      const auto rep = summability_proxy(curve, cfg.net_rule.epsilon, cfg.conditions->q, cfg.p,
                                         cfg.family.dim, cfg.family.holder->a);
      write_file(out / "summability.csv", rep.to_csv());
      outputs.push_back("summability.csv");
      s.out << rep.to_text();
    } catch (const Error& e) {
      s.err << "warning: no summability report: " << e.what() << '\n';
    }
  }
  write_file(out / "plot.gp", plot_script(rc, rate));
  outputs.push_back("plot.gp");
  outputs.push_back("manifest.json");
  manifest["status"] = "ok";
  manifest["precheck"] = std::string(to_string(pre.verdict));
  manifest["records"] = curve.records.size();
  manifest["finished"] = iso_now();
  manifest["outputs"] = outputs;
  write_file(out / "manifest.json", manifest.dump(2) + "\n");
  s.out << "wrote " << curve.records.size() << " records to " << (out / "deviations.csv").string()
        << '\n';
  return kExitOk;
}

struct NodOptions {
  std::string config;
  std::string scheme = "multinomial";
  int n = 0;
  std::string m = "identity";
  std::string probs = "uniform";
  std::string d;
  std::string rho;
  std::string rho_scale;
  double mean = 1.0;
  double variance = 1.0;
  std::string grid;
  bool use_double = false;
  std::size_t budget = 100'000;
  std::string out;
};

inline WeightScheme scheme_from_flags(const NodOptions& o) {
  namespace cd = config_detail;
  std::string text = "[family]\nname = abs_loc\n[scheme]\nkind = " + o.scheme + "\n";
  const auto kind = parse_scheme_kind(o.scheme);
  if (kind == SchemeKind::multinomial) text += "m = " + o.m + "\nprobs = " + o.probs + "\n";
  if (!o.d.empty()) text += "d = " + o.d + "\n";
  if (kind == SchemeKind::gaussian_nod) {
    text += "mean = " + format_double(o.mean) + "\nvariance = " + format_double(o.variance) + "\n";
    if (!o.rho.empty()) text += "rho = " + o.rho + "\n";
    if (!o.rho_scale.empty()) text += "rho_scale = " + o.rho_scale + "\n";
  }
  // Validation at n happens in the checker; keep the grid out of the way.
  text += "[experiment]\nscaling = theorem23\nn_grid = " + std::to_string(std::max(o.n, 2)) + "\n";
  return parse_config_string(text, true).experiment.scheme;
}

inline int cmd_check_nod(const NodOptions& o, Streams s) {
  NodReport rep;
  std::string kind_name = o.scheme, params;
  if (o.scheme == "comonotone_test") {
    rep = o.use_double ? check_nod(comonotone_test_pmf<double>())
                       : check_nod(comonotone_test_pmf<Rational>());
    params = "two comonotone fair coins";
  } else {
    if (o.n < 1) throw InvalidParameter("check-nod needs --n >= 1");
    const WeightScheme scheme =
        o.config.empty() ? scheme_from_flags(o) : parse_config_file(o.config).experiment.scheme;
    kind_name = std::string(to_string(scheme.kind));
    params = scheme.describe();
    if (scheme.kind == SchemeKind::gaussian_nod) {
      std::vector<double> grid;
      if (!o.grid.empty()) {
        grid = config_detail::parse_real_list("--grid", o.grid);
      } else {
        const double sd = std::sqrt(scheme.gaussian.variance);
        for (double z : {-1.5, -0.5, 0.5, 1.5}) grid.push_back(scheme.gaussian.mean + sd * z);
      }
      rep = check_nod_gaussian(scheme.gaussian, o.n, grid);
    } else if (o.use_double) {
      rep = check_nod(enumerate_joint<double>(scheme, o.n, o.budget));
    } else {
      rep = check_nod(enumerate_joint<Rational>(scheme, o.n, o.budget));
    }
  }
  const int n = o.scheme == "comonotone_test" ? 2 : o.n;
  s.out << "scheme: " << params << "  n=" << n << '\n' << rep.to_text();
  const std::string csv = NodReport::csv_header() + "\n" + rep.csv_row(kind_name, n, params) + "\n";
  s.out << csv;
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    write_file(fs::path(o.out) / "nod.csv", csv);
  }
  return rep.holds ? kExitOk : kExitViolated;
}

struct ConditionsOptions {
  std::string config;
  std::string out;
  bool strict = false;
};

inline int cmd_check_conditions(const ConditionsOptions& o, Streams s) {
  const auto rc = parse_config_file(o.config, o.strict);
  for (const auto& w : rc.warnings) s.err << "warning: " << w << '\n';
  HypothesisInputs in;
  in.exponents = default_hypotheses(rc.experiment);
  in.scheme = rc.experiment.scheme;
  in.family = rc.experiment.family;
  in.data = rc.experiment.data;
  in.h_method = rc.experiment.h_method;
  in.net_radius = rc.conditions_net_radius;
  const auto rep = check_hypotheses(in);
  s.out << "theorem: " << to_string(in.exponents.theorem) << '\n' << rep.to_text();
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    write_file(fs::path(o.out) / "conditions.csv", rep.to_csv());
  }
  switch (rep.verdict) {
    case Verdict::satisfied: return kExitOk;
    case Verdict::violated: return kExitViolated;
    case Verdict::undetermined: return kExitUndetermined;
  }
  return kExitError;
}

struct RateOptions {
  std::string input;
  std::string summary = "median";
  std::string out;
};

inline int cmd_rate(const RateOptions& o, Streams s) {
  std::ifstream f(o.input, std::ios::binary);
  if (!f) throw InvalidParameter("cannot open '" + o.input + "'");
  const auto curve = csv::read_deviations(f);
  if (curve.failure) s.err << "warning: input carries a failure marker: " << *curve.failure << '\n';
  const auto rate = estimate_rate(curve, parse_summary_stat(o.summary));
  s.out << rate.to_text();
  const std::string csv = RateEstimate::csv_header() + "\n" + rate.csv_row(curve.experiment_id) + "\n";
  s.out << csv;
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    write_file(fs::path(o.out) / "rates.csv", csv);
  }
  return kExitOk;
}

struct RosenthalOptions {
  std::string config;
  std::string out;
  std::string seed;
  bool strict = false;
};

inline int cmd_rosenthal(const RosenthalOptions& o, Streams s, const char* env_seed) {
  const auto rc = parse_config_file(o.config, o.strict);
  for (const auto& w : rc.warnings) s.err << "warning: " << w << '\n';
  const auto seed = resolve_seed(o.seed, env_seed, rc.experiment.seed);
  const auto& ro = rc.rosenthal;
  auto rows = rosenthal_stress(rc.experiment.scheme, rc.experiment.family, rc.experiment.data,
                               ro.theta, ro.q, ro.n_grid, ro.replications, seed.seed);
  if (ro.calibration)
    rows.push_back(rosenthal_gaussian_calibration(ro.n_grid.back(), ro.q, 10 * ro.replications,
                                                  seed.seed));
  std::string csv = RosenthalRow::csv_header() + "\n";
  for (const auto& r : rows) csv += r.csv_row() + "\n";
  s.out << csv;
  if (!rows.empty() && rows.front().label == "scheme" && rows.front().ratio > 0.0) {
    double worst = 0.0;
    for (const auto& r : rows)
      if (r.label == "scheme") worst = std::max(worst, r.ratio / rows.front().ratio);
    s.out << "max ratio relative to n=" << rows.front().n << ": " << worst << '\n';
  }
  if (ro.calibration) {
    const auto& c = rows.back();
    s.out << "gaussian calibration: E|sum|^q / n^(q/2) = " << c.lhs / c.rhs2 << '\n';
  }
  s.out << "(C_A(q) has no known value; ratios are reported, not bounded)\n";
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    write_file(fs::path(o.out) / "rosenthal.csv", csv);
  }
  return kExitOk;
}

struct NetOptions {
  std::string config;
  std::string family = "abs_loc";
  std::string box;
  double radius = 0.0;
  std::int64_t n = 0;
  double p = 0.0;
  bool fit = false;
  std::string out;
};

inline int cmd_net(const NetOptions& o, Streams s) {
  FunctionFamily fam;
  ExperimentConfig cfg;
  if (!o.config.empty()) {
    cfg = parse_config_file(o.config).experiment;
    fam = cfg.family;
  } else {
    Box box(static_cast<std::size_t>(families::dimension_of(o.family)), Interval{});
    if (!o.box.empty()) box = config_detail::parse_box(o.box);
    fam = families::by_name(o.family, box);
    cfg.family = fam;
  }
  if (o.p != 0.0) cfg.p = o.p;
  if (o.radius < 0.0) throw InvalidParameter("--radius must be > 0");
  ParameterNet net;
  if (o.n > 0) {
    net = build_rn_schedule(fam, cfg.p, cfg.net_rule.epsilon, o.n);
  } else {
    const double r = o.radius > 0.0 ? o.radius : cfg.net_rule.radius;
    net = build_net(fam.box, r);
  }
  s.out << "centers: " << net.size() << "  radius: " << format_double(net.radius)
        << "  covers: " << (covers(net, fam.box) ? "yes" : "no") << '\n';
  if (o.fit) {
    const auto f = covering_constant(fam.box, {0.2, 0.1, 0.05, 0.02, 0.01});
    s.out << "covering fit: c=" << format_double(f.c) << "  D_fit=" << format_double(f.D_fit)
          << '\n';
  }
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    write_file(fs::path(o.out) / "net.csv", net.to_csv());
  }
  return kExitOk;
}

// Entry point shared by the binary and the tests.
inline int main(int argc, const char* const* argv, Streams s,
                const char* env_seed = std::getenv("ULLN_SEED")) {
  CLI::App app{"ulln: weighted-bootstrap uniform laws of large numbers, checked and simulated"};
  app.set_version_flag("--version", std::string(ULLN_VERSION));
  app.require_subcommand(1);

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "run a replicated sup-deviation experiment");
  run_cmd->add_option("--config", run.config, "config file")->required();
  run_cmd->add_option("--out", run.out, "output directory");
  run_cmd->add_option("--seed", run.seed, "root seed (overrides ULLN_SEED and the config)");
  run_cmd->add_option("--threads", run.threads, "worker threads (0: all cores)")
      ->check(CLI::Range(0, 1024));
  run_cmd->add_flag("--force", run.force, "run even if the hypothesis precheck fails");
  run_cmd->add_flag("--strict", run.strict, "reject unknown config keys");
  run_cmd->add_flag("--timing", run.timing, "record per-replicate wall time");

  NodOptions nod;
  auto* nod_cmd = app.add_subcommand("check-nod", "exact NOD check of a small weight vector");
  nod_cmd->add_option("--config", nod.config, "take the scheme from a config file");
  nod_cmd->add_option("--scheme", nod.scheme, "scheme kind");
  nod_cmd->add_option("--n", nod.n, "dimension (not needed for comonotone_test)");
  nod_cmd->add_option("--m", nod.m, "multinomial m schedule");
  nod_cmd->add_option("--probs", nod.probs, "multinomial probabilities: uniform or ramp");
  nod_cmd->add_option("--d", nod.d, "jackknife d rule");
  nod_cmd->add_option("--rho", nod.rho, "gaussian constant correlation");
  nod_cmd->add_option("--rho-scale", nod.rho_scale, "gaussian correlation -scale/(n-1)");
  nod_cmd->add_option("--mean", nod.mean, "gaussian mean");
  nod_cmd->add_option("--variance", nod.variance, "gaussian variance");
  nod_cmd->add_option("--grid", nod.grid, "gaussian cut points, comma separated");
  nod_cmd->add_flag("--float", nod.use_double, "double arithmetic instead of exact rationals");
  nod_cmd->add_option("--budget", nod.budget, "maximum support size");
  nod_cmd->add_option("--out", nod.out, "output directory for nod.csv");
  nod_cmd->add_flag("--strict", "accepted for uniformity");

  ConditionsOptions cond;
  auto* cond_cmd = app.add_subcommand("check-conditions", "check theorem hypotheses");
  cond_cmd->add_option("--config", cond.config, "config file")->required();
  cond_cmd->add_option("--out", cond.out, "output directory for conditions.csv");
  cond_cmd->add_flag("--strict", cond.strict, "reject unknown config keys");

  RateOptions rate;
  auto* rate_cmd = app.add_subcommand("rate", "fit a log-log rate to a deviations CSV");
  rate_cmd->add_option("--input", rate.input, "deviations.csv")->required();
  rate_cmd->add_option("--summary", rate.summary, "median or mean");
  rate_cmd->add_option("--out", rate.out, "output directory for rates.csv");

  RosenthalOptions ros;
  auto* ros_cmd = app.add_subcommand("rosenthal", "Monte Carlo Rosenthal-ratio stress test");
  ros_cmd->add_option("--config", ros.config, "config file")->required();
  ros_cmd->add_option("--out", ros.out, "output directory for rosenthal.csv");
  ros_cmd->add_option("--seed", ros.seed, "root seed");
  ros_cmd->add_flag("--strict", ros.strict, "reject unknown config keys");

  NetOptions net;
  auto* net_cmd = app.add_subcommand("net", "build a covering net");
  net_cmd->add_option("--config", net.config, "config file");
  net_cmd->add_option("--family", net.family, "family name");
  net_cmd->add_option("--box", net.box, "box 'lo,hi;lo,hi'");
  net_cmd->add_option("--radius", net.radius, "net radius");
  net_cmd->add_option("--n", net.n, "use the r_n schedule at this n");
  net_cmd->add_option("--p", net.p, "scaling exponent p for the r_n schedule");
  net_cmd->add_flag("--fit", net.fit, "fit the covering constant");
  net_cmd->add_option("--out", net.out, "output directory for net.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, s.out, s.err);
    return code == 0 ? kExitOk : kExitError;
  }
  try {
    if (*run_cmd) return cmd_run(run, s, env_seed);
    if (*nod_cmd) return cmd_check_nod(nod, s);
    if (*cond_cmd) return cmd_check_conditions(cond, s);
    if (*rate_cmd) return cmd_rate(rate, s);
    if (*ros_cmd) return cmd_rosenthal(ros, s, env_seed);
    if (*net_cmd) return cmd_net(net, s);
  } catch (const std::exception& e) {
    s.err << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}

}  // namespace ulln::cli
