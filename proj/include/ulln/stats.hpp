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

// Small numerical helpers shared by the modules: batch-means standard
// errors, least-squares and quantile line fits, normal distribution helpers.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "ulln/error.hpp"

namespace ulln::stats {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

inline double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

inline double log_choose(double n, double k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

struct MeanWithError {
  double mean = 0.0;
  double std_error = 0.0;
};

// Mean of a sequence with a batch-means standard error. The tail of the
// sequence that does not fill a whole batch is included in the mean but not
// in the batch variance.
inline MeanWithError batch_means(std::span<const double> xs, std::size_t batches = 20) {
  MeanWithError out;
  if (xs.empty()) return out;
  double total = 0.0;
  for (double x : xs) total += x;
  out.mean = total / static_cast<double>(xs.size());
  const std::size_t per = xs.size() / batches;
  if (batches < 2 || per == 0) return out;
  std::vector<double> bm(batches, 0.0);
  for (std::size_t b = 0; b < batches; ++b) {
    double s = 0.0;
    for (std::size_t i = b * per; i < (b + 1) * per; ++i) s += xs[i];
    bm[b] = s / static_cast<double>(per);
  }
  double grand = 0.0;
  for (double v : bm) grand += v;
  grand /= static_cast<double>(batches);
  double ss = 0.0;
  for (double v : bm) ss += (v - grand) * (v - grand);
  const double var_batch = ss / static_cast<double>(batches - 1);
  out.std_error = std::sqrt(var_batch / static_cast<double>(batches));
  return out;
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
};

// Ordinary least squares y = intercept + slope * x.
inline LineFit least_squares(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw InvalidParameter("least_squares needs at least two (x, y) pairs");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw InvalidParameter("least_squares needs distinct x values");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (x.size() > 2) {
    double rss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = y[i] - fit.intercept - fit.slope * x[i];
      rss += r * r;
    }
    fit.slope_stderr = std::sqrt(rss / (n - 2.0) / sxx);
  }
  return fit;
}

// Empirical quantile with linear interpolation between order statistics.
inline double quantile(std::vector<double> xs, double level) {
  if (xs.empty()) throw InvalidParameter("quantile of an empty sample");
  std::sort(xs.begin(), xs.end());
  const double pos = level * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, xs.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return xs[lo] + frac * (xs[hi] - xs[lo]);
}

inline double median(std::vector<double> xs) { return quantile(std::move(xs), 0.5); }

// Linear quantile regression y ~ intercept + slope * x at level tau, by
// minimizing the pinball loss. For a fixed slope the optimal intercept is the
// tau-quantile of the residuals, and the profiled loss is convex in the slope,
// so a ternary search over [slope_lo, slope_hi] finds the minimizer.
inline LineFit quantile_regression(std::span<const double> x, std::span<const double> y,
                                   double tau, double slope_lo, double slope_hi) {
  if (x.size() != y.size() || x.empty())
    throw InvalidParameter("quantile_regression needs matching non-empty inputs");
  std::vector<double> resid(x.size());
  auto profile = [&](double slope, double* intercept) {
    for (std::size_t i = 0; i < x.size(); ++i) resid[i] = y[i] - slope * x[i];
    const double b = quantile(resid, tau);
    double loss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double u = y[i] - slope * x[i] - b;
      loss += u >= 0.0 ? tau * u : (tau - 1.0) * u;
    }
    if (intercept) *intercept = b;
    return loss;
  };
  double lo = slope_lo, hi = slope_hi;
  for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
    const double m1 = lo + (hi - lo) / 3.0;
    const double m2 = hi - (hi - lo) / 3.0;
    if (profile(m1, nullptr) <= profile(m2, nullptr))
      hi = m2;
    else
      lo = m1;
  }
  LineFit fit;
  fit.slope = 0.5 * (lo + hi);
  profile(fit.slope, &fit.intercept);
  return fit;
}

}  // namespace ulln::stats
