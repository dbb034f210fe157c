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

// Function families H(theta, x) over a box of parameters, and the data laws
// X is drawn from. Built-in families register their sup-envelope G(x), a
// Holder modulus when one holds uniformly in x, and closed-form means
// mu(theta) = E H(theta, X) for the built-in data models.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "ulln/error.hpp"
#include "ulln/rng.hpp"
#include "ulln/stats.hpp"

namespace ulln {

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  double length() const { return hi - lo; }
};

using Box = std::vector<Interval>;

struct DataModel {
  enum class Kind { uniform01, standard_normal, exponential1, user };

  Kind kind = Kind::uniform01;
  std::string name = "uniform01";
  // Support [lo, hi]; lo == hi is a point mass.
  double lo = 0.0;
  double hi = 1.0;
  // User models supply both; built-ins leave them empty.
  std::function<double(RngStream&)> sampler;
  std::function<double(double)> density;

  static DataModel uniform01() { return {}; }
  static DataModel standard_normal() {
    constexpr double inf = std::numeric_limits<double>::infinity();
    return {Kind::standard_normal, "standard_normal", -inf, inf, {}, {}};
  }
  static DataModel exponential1() {
    return {Kind::exponential1, "exponential1", 0.0, std::numeric_limits<double>::infinity(),
            {}, {}};
  }
  static DataModel uniform(double a, double b) {
    if (!(b > a)) throw InvalidParameter("uniform data model needs lo < hi");
    DataModel m{Kind::user, "uniform(" + fmt(a) + "," + fmt(b) + ")", a, b, {}, {}};
    m.sampler = [a, b](RngStream& rng) { return a + (b - a) * rng.uniform01(); };
    m.density = [a, b](double) { return 1.0 / (b - a); };
    return m;
  }
  static DataModel point_mass(double c) {
    DataModel m{Kind::user, "point(" + fmt(c) + ")", c, c, {}, {}};
    m.sampler = [c](RngStream&) { return c; };
    return m;
  }

  bool is_point_mass() const { return lo == hi; }

  double sample(RngStream& rng) const {
    switch (kind) {
      case Kind::uniform01: return rng.uniform01();
      case Kind::standard_normal: {
        double u1;
        do {
          u1 = rng.uniform01();
        } while (u1 <= 0.0);
        const double u2 = rng.uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
      }
      case Kind::exponential1: return -std::log1p(-rng.uniform01());
      case Kind::user: return sampler(rng);
    }
    return 0.0;
  }

  double pdf(double x) const {
    switch (kind) {
      case Kind::uniform01: return x >= 0.0 && x <= 1.0 ? 1.0 : 0.0;
      case Kind::standard_normal: return stats::normal_pdf(x);
      case Kind::exponential1: return x >= 0.0 ? std::exp(-x) : 0.0;
      case Kind::user: return density ? density(x) : std::numeric_limits<double>::quiet_NaN();
    }
    return 0.0;
  }

  bool has_density() const { return kind != Kind::user || static_cast<bool>(density); }

  // E g(X) by adaptive Gauss-Kronrod over the support, split at the given
  // breakpoints (kinks of g). Point masses evaluate g directly.
  double expectation(const std::function<double(double)>& g,
                     std::vector<double> breakpoints = {}, double tol = 1e-10,
                     double* error = nullptr) const {
    if (is_point_mass()) {
      if (error) *error = 0.0;
      return g(lo);
    }
    if (!has_density())
      throw AnalyticUnavailable("data model '" + name + "' has no density for quadrature");
    std::vector<double> cuts{lo};
    std::sort(breakpoints.begin(), breakpoints.end());
    for (double b : breakpoints)
      if (b > lo && b < hi && b > cuts.back()) cuts.push_back(b);
    cuts.push_back(hi);
    double total = 0.0, total_err = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      double err = 0.0;
      total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
          [&](double x) { return g(x) * pdf(x); }, cuts[i], cuts[i + 1], 15, tol * 1e-2, &err);
      total_err += err;
    }
    if (error) *error = total_err;
    return total;
  }

 private:
  static std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  }
};

struct HolderSpec {
  double a = 1.0;      // exponent in (0, 1]
  double M = 1.0;      // constant
  double delta = std::numeric_limits<double>::infinity();  // locality radius
};

struct FunctionFamily {
  using Theta = std::span<const double>;

  std::string name;
  int dim = 1;
  Box box{Interval{}};
  std::function<double(Theta, double)> evaluate;
  std::optional<HolderSpec> holder;
  // G(x) >= sup_theta |H(theta, x)|.
  std::function<double(double)> envelope;
  // Closed-form mu(theta) for a data model, when registered.
  std::function<std::optional<double>(Theta, const DataModel&)> mean_fn;
  // Closed-form E G(X)^r, when registered.
  std::function<std::optional<double>(const DataModel&, double)> envelope_moment_fn;
  // x-locations where H(theta, .) or G has kinks; improves quadrature.
  std::function<std::vector<double>(Theta)> kinks;

  double operator()(Theta theta, double x) const { return evaluate(theta, x); }

  void validate() const {
    if (dim < 1 || static_cast<int>(box.size()) != dim)
      throw InvalidParameter("family box must have one interval per dimension");
    for (const auto& iv : box)
      if (!(iv.hi >= iv.lo) || !std::isfinite(iv.lo) || !std::isfinite(iv.hi))
        throw InvalidParameter("family box must be a finite nonempty box");
    if (!evaluate) throw InvalidParameter("family has no evaluate function");
    if (holder && !(holder->a > 0.0 && holder->a <= 1.0 && holder->M > 0.0 && holder->delta > 0.0))
      throw InvalidParameter("holder spec needs a in (0,1], M > 0, delta > 0");
  }

  // The 2^dim corners of the box, flattened row-major.
  std::vector<double> box_corners() const {
    std::vector<double> out;
    for (int mask = 0; mask < (1 << dim); ++mask)
      for (int k = 0; k < dim; ++k)
        out.push_back((mask >> k) & 1 ? box[static_cast<std::size_t>(k)].hi
                                      : box[static_cast<std::size_t>(k)].lo);
    return out;
  }
};

enum class MeanSource { closed_form, quadrature, monte_carlo };

inline std::string_view to_string(MeanSource s) {
  switch (s) {
    case MeanSource::closed_form: return "closed_form";
    case MeanSource::quadrature: return "quadrature";
    case MeanSource::monte_carlo: return "monte_carlo";
  }
  return "?";
}

struct MeanValue {
  double value = 0.0;
  MeanSource source = MeanSource::closed_form;
};

// mu(theta): closed form if registered, else quadrature against the data
// density, else a one-time 10^7-draw Monte Carlo estimate.
inline MeanValue family_mean(const FunctionFamily& f, FunctionFamily::Theta theta,
                             const DataModel& model, std::int64_t mc_draws = 10'000'000) {
  if (f.mean_fn)
    if (auto v = f.mean_fn(theta, model)) return {*v, MeanSource::closed_form};
  if (model.is_point_mass() || model.has_density()) {
    std::vector<double> th(theta.begin(), theta.end());
    const auto kinks = f.kinks ? f.kinks(theta) : std::vector<double>{};
    return {model.expectation([&](double x) { return f(th, x); }, kinks),
            MeanSource::quadrature};
  }
  RngStream rng(0x6d75ULL);
  double total = 0.0;
  for (std::int64_t i = 0; i < mc_draws; ++i) total += f(theta, model.sample(rng));
  return {total / static_cast<double>(mc_draws), MeanSource::monte_carlo};
}

namespace families {

namespace detail {

// E|X - t| under the built-in data models.
inline std::optional<double> abs_dev_mean(double t, const DataModel& m) {
  switch (m.kind) {
    case DataModel::Kind::uniform01:
      if (t < 0.0) return 0.5 - t;
      if (t > 1.0) return t - 0.5;
      return 0.5 * (t * t + (1.0 - t) * (1.0 - t));
    case DataModel::Kind::standard_normal:
      return 2.0 * stats::normal_pdf(t) + t * (2.0 * stats::normal_cdf(t) - 1.0);
    case DataModel::Kind::exponential1:
      return t >= 0.0 ? t - 1.0 + 2.0 * std::exp(-t) : 1.0 - t;
    case DataModel::Kind::user:
      if (m.is_point_mass()) return std::abs(m.lo - t);
      return std::nullopt;
  }
  return std::nullopt;
}

inline std::optional<double> data_mean(const DataModel& m) {
  switch (m.kind) {
    case DataModel::Kind::uniform01: return 0.5;
    case DataModel::Kind::standard_normal: return 0.0;
    case DataModel::Kind::exponential1: return 1.0;
    case DataModel::Kind::user:
      if (m.is_point_mass()) return m.lo;
      return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace detail

// H(theta, x) = |x - theta|, 1-Lipschitz in theta. Envelope is the exact sup
// over the box, max(|x - lo|, |x - hi|).
inline FunctionFamily abs_loc(double lo = 0.0, double hi = 1.0) {
  FunctionFamily f;
  f.name = "abs_loc";
  f.dim = 1;
  f.box = {{lo, hi}};
  f.evaluate = [](FunctionFamily::Theta t, double x) { return std::abs(x - t[0]); };
  f.holder = HolderSpec{1.0, 1.0, std::numeric_limits<double>::infinity()};
  f.envelope = [lo, hi](double x) { return std::max(std::abs(x - lo), std::abs(x - hi)); };
  f.mean_fn = [](FunctionFamily::Theta t, const DataModel& m) {
    return detail::abs_dev_mean(t[0], m);
  };
  f.envelope_moment_fn = [lo, hi](const DataModel& m, double r) -> std::optional<double> {
    if (m.kind == DataModel::Kind::uniform01 && lo == 0.0 && hi == 1.0)
      // 2 * int_{1/2}^1 x^r dx
      return 2.0 * (1.0 - std::pow(0.5, r + 1.0)) / (r + 1.0);
    if (m.kind == DataModel::Kind::exponential1 && lo + hi <= 0.0) {
      // G(x) = x - lo on x >= 0: E (X + c)^r = e^c Gamma(r + 1, c), c = -lo.
      const double c = -lo;
      return std::exp(c) * boost::math::tgamma(r + 1.0, c);
    }
    return std::nullopt;
  };
  f.kinks = [lo, hi](FunctionFamily::Theta t) {
    return std::vector<double>{t.empty() ? 0.5 * (lo + hi) : t[0], 0.5 * (lo + hi)};
  };
  return f;
}

// H(theta, x) = |x - theta_1| + |x - theta_2| on a 2-D box; sqrt(2)-Lipschitz
// in the Euclidean metric.
inline FunctionFamily abs_loc2(Interval a = {}, Interval b = {}) {
  FunctionFamily f;
  f.name = "abs_loc2";
  f.dim = 2;
  f.box = {a, b};
  f.evaluate = [](FunctionFamily::Theta t, double x) {
    return std::abs(x - t[0]) + std::abs(x - t[1]);
  };
  f.holder = HolderSpec{1.0, std::numbers::sqrt2, std::numeric_limits<double>::infinity()};
  f.envelope = [a, b](double x) {
    return std::max(std::abs(x - a.lo), std::abs(x - a.hi)) +
           std::max(std::abs(x - b.lo), std::abs(x - b.hi));
  };
  f.mean_fn = [](FunctionFamily::Theta t, const DataModel& m) -> std::optional<double> {
    auto u = detail::abs_dev_mean(t[0], m), v = detail::abs_dev_mean(t[1], m);
    if (u && v) return *u + *v;
    return std::nullopt;
  };
  f.kinks = [a, b](FunctionFamily::Theta t) {
    std::vector<double> k{0.5 * (a.lo + a.hi), 0.5 * (b.lo + b.hi)};
    if (!t.empty()) k.insert(k.end(), t.begin(), t.end());
    return k;
  };
  return f;
}

// H(theta, x) = theta * x. Lipschitz with M = x_bound when the data are
// bounded by x_bound; no uniform Holder modulus otherwise.
inline FunctionFamily linear(double lo = 0.0, double hi = 1.0,
                             std::optional<double> x_bound = std::nullopt) {
  FunctionFamily f;
  f.name = "linear";
  f.dim = 1;
  f.box = {{lo, hi}};
  f.evaluate = [](FunctionFamily::Theta t, double x) { return t[0] * x; };
  if (x_bound) f.holder = HolderSpec{1.0, *x_bound, std::numeric_limits<double>::infinity()};
  const double tmax = std::max(std::abs(lo), std::abs(hi));
  f.envelope = [tmax](double x) { return tmax * std::abs(x); };
  f.mean_fn = [](FunctionFamily::Theta t, const DataModel& m) -> std::optional<double> {
    if (auto mx = detail::data_mean(m)) return t[0] * *mx;
    return std::nullopt;
  };
  return f;
}

// H(theta, x) = cos(theta x); bounded by 1, |dH/dtheta| <= |x|.
inline FunctionFamily cosine(double lo = 0.0, double hi = 1.0,
                             std::optional<double> x_bound = std::nullopt) {
  FunctionFamily f;
  f.name = "cos";
  f.dim = 1;
  f.box = {{lo, hi}};
  f.evaluate = [](FunctionFamily::Theta t, double x) { return std::cos(t[0] * x); };
  if (x_bound) f.holder = HolderSpec{1.0, *x_bound, std::numeric_limits<double>::infinity()};
  f.envelope = [](double) { return 1.0; };
  f.mean_fn = [](FunctionFamily::Theta t, const DataModel& m) -> std::optional<double> {
    const double th = t[0];
    switch (m.kind) {
      case DataModel::Kind::uniform01: return th == 0.0 ? 1.0 : std::sin(th) / th;
      case DataModel::Kind::standard_normal: return std::exp(-0.5 * th * th);
      case DataModel::Kind::exponential1: return 1.0 / (1.0 + th * th);
      case DataModel::Kind::user:
        if (m.is_point_mass()) return std::cos(th * m.lo);
        return std::nullopt;
    }
    return std::nullopt;
  };
  f.envelope_moment_fn = [](const DataModel&, double) -> std::optional<double> { return 1.0; };
  return f;
}

// H(theta, x) = x, constant in theta.
inline FunctionFamily identity(double lo = 0.0, double hi = 1.0) {
  FunctionFamily f;
  f.name = "identity";
  f.dim = 1;
  f.box = {{lo, hi}};
  f.evaluate = [](FunctionFamily::Theta, double x) { return x; };
  f.holder = HolderSpec{1.0, 1.0, std::numeric_limits<double>::infinity()};
  f.envelope = [](double x) { return std::abs(x); };
  f.mean_fn = [](FunctionFamily::Theta, const DataModel& m) { return detail::data_mean(m); };
  f.kinks = [](FunctionFamily::Theta) { return std::vector<double>{0.0}; };
  return f;
}

// lambda * H.
inline FunctionFamily scaled(FunctionFamily base, double lambda) {
  if (!(lambda > 0.0)) throw InvalidParameter("scale factor must be > 0");
  FunctionFamily f = base;
  f.name = base.name + "*" + std::to_string(lambda);
  f.evaluate = [g = base.evaluate, lambda](FunctionFamily::Theta t, double x) {
    return lambda * g(t, x);
  };
  if (base.holder) f.holder->M *= lambda;
  if (base.envelope)
    f.envelope = [g = base.envelope, lambda](double x) { return lambda * g(x); };
  if (base.mean_fn)
    f.mean_fn = [g = base.mean_fn, lambda](FunctionFamily::Theta t,
                                           const DataModel& m) -> std::optional<double> {
      if (auto v = g(t, m)) return lambda * *v;
      return std::nullopt;
    };
  if (base.envelope_moment_fn)
    f.envelope_moment_fn = [g = base.envelope_moment_fn, lambda](
                               const DataModel& m, double r) -> std::optional<double> {
      if (auto v = g(m, r)) return std::pow(lambda, r) * *v;
      return std::nullopt;
    };
  return f;
}

inline FunctionFamily by_name(const std::string& name, const Box& box) {
  auto iv = [&](std::size_t i) { return i < box.size() ? box[i] : Interval{}; };
  if (name == "abs_loc") return abs_loc(iv(0).lo, iv(0).hi);
  if (name == "abs_loc2") return abs_loc2(iv(0), iv(1));
  if (name == "linear") return linear(iv(0).lo, iv(0).hi);
  if (name == "cos") return cosine(iv(0).lo, iv(0).hi);
  if (name == "identity") return identity(iv(0).lo, iv(0).hi);
  throw InvalidParameter("unknown family '" + name + "'");
}

inline int dimension_of(const std::string& name) { return name == "abs_loc2" ? 2 : 1; }

}  // namespace families

inline DataModel data_model_by_name(const std::string& name) {
  if (name == "uniform01") return DataModel::uniform01();
  if (name == "standard_normal") return DataModel::standard_normal();
  if (name == "exponential1") return DataModel::exponential1();
  // uniform(a,b) and point(c)
  double a = 0.0, b = 0.0;
  if (std::sscanf(name.c_str(), "uniform(%lf,%lf)", &a, &b) == 2) return DataModel::uniform(a, b);
  if (std::sscanf(name.c_str(), "point(%lf)", &a) == 1) return DataModel::point_mass(a);
  throw InvalidParameter("unknown data model '" + name + "'");
}

}  // namespace ulln
