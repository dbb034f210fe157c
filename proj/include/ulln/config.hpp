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

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ulln/conditions.hpp"
#include "ulln/engine.hpp"
#include "ulln/error.hpp"
#include "ulln/family.hpp"
#include "ulln/schemes.hpp"
#include "ulln/text.hpp"

// Config files are sectioned key = value text. Comments take whole lines
// starting with '#' or ';'. See README.md for the schema.

namespace ulln {

struct RosenthalSettings {
  std::vector<double> theta;  // empty: box midpoint
  double q = 4.0;
  std::vector<std::int64_t> n_grid{64, 256, 1024, 4096};
  std::int64_t replications = 2000;
  bool calibration = true;
};

struct RunConfig {
  ExperimentConfig experiment;
  std::string family_name = "abs_loc";
  Box box{Interval{}};
  double family_scale = 1.0;
  std::string data_name = "uniform01";
  SummaryStat summary = SummaryStat::median;
  double conditions_net_radius = 0.05;
  RosenthalSettings rosenthal;
  std::vector<std::string> warnings;

  // Every typed field with defaults applied, one "section.key=value" line
  // each, sorted. Execution-only knobs (threads, force) are left out.
  std::map<std::string, std::string> canonical(bool include_execution = false) const;
  std::string digest() const;
};

namespace config_detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) return out;
    start = pos + 1;
  }
}

// Decimal or a/b.
inline double parse_real(const std::string& field, const std::string& text) {
  const auto slash = text.find('/');
  if (slash != std::string::npos)
    return parse_real(field, trim(text.substr(0, slash))) /
           parse_real(field, trim(text.substr(slash + 1)));
  double v = 0.0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  const auto res = std::from_chars(first, last, v);
  if (text.empty() || res.ec != std::errc{} || res.ptr != last || !std::isfinite(v))
    throw ConfigError(field, "expected a number, got '" + text + "'");
  return v;
}

inline std::int64_t parse_int(const std::string& field, const std::string& text) {
  std::int64_t v = 0;
  const auto* last = text.data() + text.size();
  const auto res = std::from_chars(text.data(), last, v);
  if (text.empty() || res.ec != std::errc{} || res.ptr != last)
    throw ConfigError(field, "expected an integer, got '" + text + "'");
  return v;
}

inline std::uint64_t parse_u64(const std::string& field, const std::string& text) {
  std::uint64_t v = 0;
  const auto* last = text.data() + text.size();
  const auto res = std::from_chars(text.data(), last, v);
  if (text.empty() || res.ec != std::errc{} || res.ptr != last)
    throw ConfigError(field, "expected an unsigned 64-bit integer, got '" + text + "'");
  return v;
}

inline bool parse_bool(const std::string& field, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(field, "expected true or false, got '" + text + "'");
}

inline std::vector<std::int64_t> parse_int_list(const std::string& field, const std::string& text) {
  std::vector<std::int64_t> out;
  for (const auto& part : split(text, ',')) out.push_back(parse_int(field, part));
  return out;
}

inline std::vector<double> parse_real_list(const std::string& field, const std::string& text) {
  std::vector<double> out;
  for (const auto& part : split(text, ',')) out.push_back(parse_real(field, part));
  return out;
}

// "kind" or "kind:param".
inline std::pair<std::string, std::string> tagged(const std::string& text) {
  const auto c = text.find(':');
  if (c == std::string::npos) return {text, {}};
  return {trim(text.substr(0, c)), trim(text.substr(c + 1))};
}

inline MSchedule parse_m(const std::string& text) {
  const auto [tag, arg] = tagged(text);
  const std::string f = "scheme.m";
  if (tag == "identity" && arg.empty()) return MSchedule::identity();
  if (tag == "power") return MSchedule::power(parse_real(f, arg));
  if (tag == "log") return MSchedule::log(parse_real(f, arg));
  if (tag == "constant") return MSchedule::constant(parse_int(f, arg));
  throw ConfigError(f, "expected identity, power:G, log:D or constant:M, got '" + text + "'");
}

inline DRule parse_d(const std::string& text) {
  const std::string f = "scheme.d";
  if (text == "n") return DRule::fraction(1.0);
  const auto [tag, arg] = tagged(text);
  if (tag == "fraction") return DRule::fraction(parse_real(f, arg));
  if (tag == "fixed") return DRule::fixed(parse_int(f, arg));
  return DRule::fixed(parse_int(f, text));
}

inline Box parse_box(const std::string& text) {
  Box box;
  for (const auto& part : split(text, ';')) {
    const auto v = parse_real_list("family.box", part);
    if (v.size() != 2) throw ConfigError("family.box", "each interval needs 'lo, hi'");
    if (!(v[1] >= v[0])) throw ConfigError("family.box", "interval needs lo <= hi");
    box.push_back({v[0], v[1]});
  }
  return box;
}

inline std::string join(const std::vector<std::int64_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

inline std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_double(v[i]);
  return out;
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s{
      {"experiment", {"id", "scaling", "p", "n_grid", "replications", "seed", "data"}},
      {"scheme",
       {"kind", "m", "probs", "d", "shape", "scale", "mean", "variance", "rho", "rho_scale"}},
      {"family", {"name", "box", "scale"}},
      {"net", {"rule", "radius", "epsilon"}},
      {"engine", {"threads", "summary", "force", "timing", "h_method"}},
      {"conditions", {"theorem", "delta", "p", "alpha", "beta", "q", "net_radius"}},
      {"rosenthal", {"theta", "q", "n_grid", "replications", "calibration"}},
  };
  return s;
}

}  // namespace config_detail

// Parses and validates a config. Strict mode turns unknown sections and keys
// into errors; otherwise they are collected as warnings.
inline RunConfig parse_config(std::istream& in, bool strict = false) {
  namespace cd = config_detail;
  boost::property_tree::ptree pt;
  try {
    boost::property_tree::read_ini(in, pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("<file>", "line " + std::to_string(e.line()) + ": " + e.message());
  }
  RunConfig rc;
  std::map<std::string, std::string> kv;
  for (const auto& [section, body] : pt) {
    const auto sec = cd::schema().find(section);
    if (body.empty() && !body.data().empty())
      throw ConfigError(section, "key outside any section");
    if (sec == cd::schema().end()) {
      if (strict) throw ConfigError(section, "unknown section");
      rc.warnings.push_back("ignored unknown section [" + section + "]");
      continue;
    }
    for (const auto& [key, value] : body) {
      const std::string path = section + "." + key;
      if (!sec->second.count(key)) {
        if (strict) throw ConfigError(path, "unknown key");
        rc.warnings.push_back("ignored unknown key " + path);
        continue;
      }
      kv[path] = cd::trim(value.data());
    }
  }
  auto get = [&](const std::string& path) -> std::optional<std::string> {
    const auto it = kv.find(path);
    if (it == kv.end()) return std::nullopt;
    return it->second;
  };
  auto require = [&](const std::string& path) {
    auto v = get(path);
    if (!v || v->empty()) throw ConfigError(path, "missing required field");
    return *v;
  };

  auto& e = rc.experiment;
  // [family]
  rc.family_name = require("family.name");
  if (rc.family_name != "abs_loc" && rc.family_name != "abs_loc2" && rc.family_name != "linear" &&
      rc.family_name != "cos" && rc.family_name != "identity")
    throw ConfigError("family.name", "unknown family '" + rc.family_name +
                                         "' (abs_loc, abs_loc2, linear, cos, identity)");
  const int dim = families::dimension_of(rc.family_name);
  rc.box = Box(static_cast<std::size_t>(dim), Interval{});
  if (auto v = get("family.box")) rc.box = cd::parse_box(*v);
  if (static_cast<int>(rc.box.size()) != dim)
    throw ConfigError("family.box", "family '" + rc.family_name + "' needs " +
                                        std::to_string(dim) + " interval(s)");
  if (auto v = get("family.scale")) rc.family_scale = cd::parse_real("family.scale", *v);
  if (!(rc.family_scale > 0.0)) throw ConfigError("family.scale", "scale must be > 0");
  e.family = families::by_name(rc.family_name, rc.box);
  if (rc.family_scale != 1.0) e.family = families::scaled(e.family, rc.family_scale);

  // [scheme]
  const auto kind = require("scheme.kind");
  SchemeKind sk;
  try {
    sk = parse_scheme_kind(kind);
  } catch (const InvalidParameter& err) {
    throw ConfigError("scheme.kind", err.message());
  }
  auto reject_unless = [&](const std::string& key, bool allowed) {
    if (!allowed && get("scheme." + key))
      throw ConfigError("scheme." + key, "not a parameter of scheme kind '" + kind + "'");
  };
  const bool jack = sk == SchemeKind::hypergeometric_delete_d || sk == SchemeKind::downweight_d;
  reject_unless("m", sk == SchemeKind::multinomial);
  reject_unless("probs", sk == SchemeKind::multinomial);
  reject_unless("d", jack);
  reject_unless("shape", sk == SchemeKind::independent);
  reject_unless("scale", sk == SchemeKind::independent);
  for (const char* g : {"mean", "variance", "rho", "rho_scale"})
    reject_unless(g, sk == SchemeKind::gaussian_nod);
  switch (sk) {
    case SchemeKind::multinomial: {
      MSchedule m;
      if (auto v = get("scheme.m")) m = cd::parse_m(*v);
      ProbsRule pr;
      if (auto v = get("scheme.probs")) {
        if (*v == "ramp") pr.kind = ProbsRule::Kind::ramp;
        else if (*v != "uniform") throw ConfigError("scheme.probs", "expected uniform or ramp");
      }
      try {
        m.validate();
      } catch (const InvalidParameter& err) {
        throw ConfigError("scheme.m", err.message());
      }
      e.scheme = WeightScheme::multinomial(m, pr);
      break;
    }
    case SchemeKind::bayesian_dirichlet: e.scheme = WeightScheme::dirichlet(); break;
    case SchemeKind::hypergeometric_delete_d:
    case SchemeKind::downweight_d: {
      DRule d;
      if (auto v = get("scheme.d")) d = cd::parse_d(*v);
      e.scheme = sk == SchemeKind::downweight_d ? WeightScheme::downweight_d(d)
                                                : WeightScheme::delete_d(d);
      break;
    }
    case SchemeKind::over_replacement: e.scheme = WeightScheme::over_replacement(); break;
    case SchemeKind::independent: {
      IndependentLaw law;
      if (auto v = get("scheme.shape")) law.shape = cd::parse_real("scheme.shape", *v);
      if (auto v = get("scheme.scale")) law.scale = cd::parse_real("scheme.scale", *v);
      e.scheme = WeightScheme::independent(law);
      break;
    }
    case SchemeKind::gaussian_nod: {
      GaussianSpec g;
      if (auto v = get("scheme.mean")) g.mean = cd::parse_real("scheme.mean", *v);
      if (auto v = get("scheme.variance")) g.variance = cd::parse_real("scheme.variance", *v);
      if (get("scheme.rho") && get("scheme.rho_scale"))
        throw ConfigError("scheme.rho", "give either rho or rho_scale, not both");
      if (auto v = get("scheme.rho")) {
        g.scaled_rho = false;
        g.rho_value = cd::parse_real("scheme.rho", *v);
      }
      if (auto v = get("scheme.rho_scale")) g.rho_scale = cd::parse_real("scheme.rho_scale", *v);
      e.scheme = WeightScheme::gaussian_nod(g);
      break;
    }
  }

  // [experiment]
  if (auto v = get("experiment.id")) e.experiment_id = *v;
  if (e.experiment_id.empty()) throw ConfigError("experiment.id", "id must be nonempty");
  if (auto v = get("experiment.scaling")) {
    try {
      e.scaling = parse_scaling(*v);
    } catch (const InvalidParameter& err) {
      throw ConfigError("experiment.scaling", err.message());
    }
  }
  if (auto v = get("experiment.p")) e.p = cd::parse_real("experiment.p", *v);
  if (auto v = get("experiment.n_grid")) e.n_grid = cd::parse_int_list("experiment.n_grid", *v);
  if (auto v = get("experiment.replications"))
    e.replications = cd::parse_int("experiment.replications", *v);
  if (auto v = get("experiment.seed")) e.seed = cd::parse_u64("experiment.seed", *v);
  if (auto v = get("experiment.data")) rc.data_name = *v;
  try {
    e.data = data_model_by_name(rc.data_name);
  } catch (const InvalidParameter& err) {
    throw ConfigError("experiment.data", err.message());
  }

  // [net]
  if (auto v = get("net.rule")) {
    if (*v == "fixed") e.net_rule.kind = NetRule::Kind::fixed;
    else if (*v == "rn_schedule") e.net_rule.kind = NetRule::Kind::rn_schedule;
    else throw ConfigError("net.rule", "expected fixed or rn_schedule");
  }
  if (auto v = get("net.radius")) e.net_rule.radius = cd::parse_real("net.radius", *v);
  if (auto v = get("net.epsilon")) e.net_rule.epsilon = cd::parse_real("net.epsilon", *v);

  // [engine]
  if (auto v = get("engine.threads")) {
    const auto t = cd::parse_int("engine.threads", *v);
    if (t < 0 || t > 1024) throw ConfigError("engine.threads", "threads must lie in [0, 1024]");
    e.threads = static_cast<unsigned>(t);
  }
  if (auto v = get("engine.summary")) {
    if (*v == "median") rc.summary = SummaryStat::median;
    else if (*v == "mean") rc.summary = SummaryStat::mean;
    else throw ConfigError("engine.summary", "expected median or mean");
  }
  if (auto v = get("engine.force")) e.force = cd::parse_bool("engine.force", *v);
  if (auto v = get("engine.timing")) e.timing = cd::parse_bool("engine.timing", *v);
  if (auto v = get("engine.h_method")) {
    try {
      e.h_method = parse_moment_method(*v);
    } catch (const InvalidParameter& err) {
      throw ConfigError("engine.h_method", err.message());
    }
  }

  // [conditions]
  if (auto v = get("conditions.theorem")) {
    ExponentConfig x;
    try {
      x.theorem = parse_theorem(*v);
    } catch (const InvalidParameter& err) {
      throw ConfigError("conditions.theorem", err.message());
    }
    x.p = e.p;
    if (auto w = get("conditions.delta")) x.delta = cd::parse_real("conditions.delta", *w);
    if (auto w = get("conditions.p")) x.p = cd::parse_real("conditions.p", *w);
    if (auto w = get("conditions.alpha")) x.alpha = cd::parse_real("conditions.alpha", *w);
    if (auto w = get("conditions.beta")) x.beta = cd::parse_real("conditions.beta", *w);
    if (auto w = get("conditions.q")) x.q = cd::parse_real("conditions.q", *w);
    if (x.theorem == Theorem::T1a && !(x.delta >= 0.0 && x.delta < 1.0))
      throw ConfigError("conditions.delta", "T1a needs delta in [0, 1)");
    if (x.theorem == Theorem::T1b && !(x.delta > 0.0))
      throw ConfigError("conditions.delta", "T1b needs delta > 0");
    if (x.theorem == Theorem::T3 && !get("conditions.q"))
      throw ConfigError("conditions.q", "T3 needs a moment order q");
    e.conditions = x;
  } else {
    for (const char* k : {"delta", "p", "alpha", "beta", "q"})
      if (get(std::string("conditions.") + k))
        throw ConfigError(std::string("conditions.") + k, "needs conditions.theorem");
  }
  if (auto v = get("conditions.net_radius"))
    rc.conditions_net_radius = cd::parse_real("conditions.net_radius", *v);
  if (!(rc.conditions_net_radius > 0.0))
    throw ConfigError("conditions.net_radius", "radius must be > 0");

  // [rosenthal]
  auto& ro = rc.rosenthal;
  if (auto v = get("rosenthal.theta")) ro.theta = cd::parse_real_list("rosenthal.theta", *v);
  if (ro.theta.empty())
    for (const auto& iv : rc.box) ro.theta.push_back(0.5 * (iv.lo + iv.hi));
  if (static_cast<int>(ro.theta.size()) != dim)
    throw ConfigError("rosenthal.theta", "theta has the wrong dimension");
  if (auto v = get("rosenthal.q")) ro.q = cd::parse_real("rosenthal.q", *v);
  if (!(ro.q > 2.0)) throw ConfigError("rosenthal.q", "q must exceed 2");
  if (auto v = get("rosenthal.n_grid")) ro.n_grid = cd::parse_int_list("rosenthal.n_grid", *v);
  if (auto v = get("rosenthal.replications"))
    ro.replications = cd::parse_int("rosenthal.replications", *v);
  if (ro.replications < 20) throw ConfigError("rosenthal.replications", "need at least 20");
  if (auto v = get("rosenthal.calibration"))
    ro.calibration = cd::parse_bool("rosenthal.calibration", *v);

  e.validate();
  return rc;
}

inline RunConfig parse_config_string(const std::string& text, bool strict = false) {
  std::istringstream in(text);
  return parse_config(in, strict);
}

inline RunConfig parse_config_file(const std::string& path, bool strict = false) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open config '" + path + "'");
  return parse_config(in, strict);
}

inline std::map<std::string, std::string> RunConfig::canonical(bool include_execution) const {
  namespace cd = config_detail;
  const auto& e = experiment;
  std::map<std::string, std::string> m;
  m["experiment.id"] = e.experiment_id;
  m["experiment.scaling"] = std::string(to_string(e.scaling));
  m["experiment.p"] = format_double(e.p);
  m["experiment.n_grid"] = cd::join(e.n_grid);
  m["experiment.replications"] = std::to_string(e.replications);
  m["experiment.seed"] = std::to_string(e.seed);
  m["experiment.data"] = e.data.name;
  m["scheme"] = e.scheme.describe();
  m["family.name"] = family_name;
  std::vector<double> flat;
  for (const auto& iv : box) {
    flat.push_back(iv.lo);
    flat.push_back(iv.hi);
  }
  m["family.box"] = cd::join(flat);
  m["family.scale"] = format_double(family_scale);
  m["net.rule"] = e.net_rule.kind == NetRule::Kind::fixed ? "fixed" : "rn_schedule";
  if (e.net_rule.kind == NetRule::Kind::fixed)
    m["net.radius"] = format_double(e.net_rule.radius);
  else
    m["net.epsilon"] = format_double(e.net_rule.epsilon);
  m["engine.summary"] = std::string(to_string(summary));
  m["engine.timing"] = e.timing ? "true" : "false";
  const char* hm[] = {"closed_form", "quadrature", "monte_carlo"};
  m["engine.h_method"] = hm[static_cast<int>(e.h_method)];
  if (e.conditions) {
    const auto& c = *e.conditions;
    m["conditions.theorem"] = std::string(to_string(c.theorem));
    m["conditions.delta"] = format_double(c.delta);
    m["conditions.p"] = format_double(c.p);
    m["conditions.alpha"] = format_double(c.alpha);
    m["conditions.beta"] = format_double(c.beta);
    m["conditions.q"] = format_double(c.q);
  }
  m["conditions.net_radius"] = format_double(conditions_net_radius);
  m["rosenthal.theta"] = cd::join(rosenthal.theta);
  m["rosenthal.q"] = format_double(rosenthal.q);
  m["rosenthal.n_grid"] = cd::join(rosenthal.n_grid);
  m["rosenthal.replications"] = std::to_string(rosenthal.replications);
  m["rosenthal.calibration"] = rosenthal.calibration ? "true" : "false";
  if (include_execution) {
    m["engine.threads"] = std::to_string(e.threads);
    m["engine.force"] = e.force ? "true" : "false";
  }
  return m;
}

inline std::string RunConfig::digest() const {
  std::string text;
  for (const auto& [k, v] : canonical()) text += k + "=" + v + "\n";
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(config_detail::fnv1a(text)));
  return buf;
}

}  // namespace ulln
