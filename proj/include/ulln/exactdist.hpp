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

// Exact joint laws of weight vectors on small instances and brute-force
// checks of negative orthant dependence (NOD):
//
//   P(X_1 <= x_1, ..., X_n <= x_n) <= prod_i P(X_i <= x_i)
//   P(X_1 >  x_1, ..., X_n >  x_n) <= prod_i P(X_i >  x_i)
//
// Orthant probabilities of a finitely supported law are step functions of
// x, so evaluating both families at the per-coordinate support values (plus
// -inf for the upper family) is exhaustive.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <span>
#include <type_traits>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include "ulln/error.hpp"
#include "ulln/schemes.hpp"
#include "ulln/stats.hpp"

namespace ulln {

using Rational = boost::multiprecision::cpp_rational;

inline double to_double(double x) { return x; }
inline double to_double(const Rational& x) { return x.convert_to<double>(); }

template <class Prob>
struct BasicJointPMF {
  int n = 0;
  std::vector<std::vector<double>> support;
  std::vector<Prob> probs;

  void validate() const {
    if (n < 1) throw InvalidParameter("joint pmf dimension must be >= 1");
    if (support.size() != probs.size() || support.empty())
      throw InvalidParameter("joint pmf needs one probability per support point");
    Prob total = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (support[i].size() != static_cast<std::size_t>(n))
        throw InvalidParameter("support point of wrong dimension");
      if (probs[i] < 0) throw InvalidParameter("negative probability");
      total += probs[i];
    }
    if (std::abs(to_double(total - Prob(1))) > 1e-12)
      throw InvalidParameter("probabilities do not sum to 1");
    auto sorted = support;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw InvalidParameter("support points are not distinct");
  }

  // Marginal law of coordinate i as (value, probability) pairs sorted by value.
  std::vector<std::pair<double, Prob>> marginal(int i) const {
    std::map<double, Prob> m;
    for (std::size_t k = 0; k < support.size(); ++k) m[support[k][i]] += probs[k];
    return {m.begin(), m.end()};
  }
};

using JointPMF = BasicJointPMF<double>;
using ExactJointPMF = BasicJointPMF<Rational>;

struct NodReport {
  double max_lower_violation = 0.0;
  double max_upper_violation = 0.0;
  std::vector<double> lower_witness;
  std::vector<double> upper_witness;
  // Grid point of the larger of the two violations.
  std::vector<double> witness;
  double tolerance = 1e-12;
  bool exact = false;
  bool holds = false;
  std::size_t grid_points = 0;

  static std::string csv_header() {
    return "scheme,n,params,max_lower_violation,max_upper_violation,witness";
  }

  std::string csv_row(const std::string& scheme, int n, const std::string& params) const {
    std::ostringstream os;
    os.precision(17);
    os << scheme << ',' << n << ',' << quote(params) << ',' << max_lower_violation << ','
       << max_upper_violation << ',' << join(witness);
    return os.str();
  }

  std::string to_text() const {
    std::ostringstream os;
    os.precision(17);
    os << "NOD report\n"
       << "  arithmetic          : " << (exact ? "exact rational" : "double") << '\n'
       << "  grid points         : " << grid_points << '\n'
       << "  max lower violation : " << max_lower_violation << "  at (" << join(lower_witness)
       << ")\n"
       << "  max upper violation : " << max_upper_violation << "  at (" << join(upper_witness)
       << ")\n"
       << "  tolerance           : " << tolerance << '\n'
       << "  verdict             : " << (holds ? "NOD holds" : "NOD violated") << '\n';
    return os.str();
  }

 private:
  static std::string join(const std::vector<double>& v) {
    std::ostringstream os;
    os.precision(17);
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ";" : "") << v[i];
    return os.str();
  }
  static std::string quote(const std::string& s) {
    if (s.find_first_of(",\"") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
  }
};

namespace detail {

// Calls fn(parts) for every weak composition of `total` into `k` parts.
inline void for_each_weak_composition(int total, int k,
                                      const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> parts(static_cast<std::size_t>(k), 0);
  std::function<void(int, int)> rec = [&](int idx, int left) {
    if (idx == k - 1) {
      parts[static_cast<std::size_t>(idx)] = left;
      fn(parts);
      return;
    }
    for (int v = left; v >= 0; --v) {
      parts[static_cast<std::size_t>(idx)] = v;
      rec(idx + 1, left - v);
    }
  };
  rec(0, total);
}

inline void for_each_subset(int n, int k, const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> idx;
  std::function<void(int)> rec = [&](int start) {
    if (static_cast<int>(idx.size()) == k) {
      fn(idx);
      return;
    }
    for (int i = start; i < n; ++i) {
      idx.push_back(i);
      rec(i + 1);
      idx.pop_back();
    }
  };
  rec(0);
}

inline double choose(double n, double k) { return std::round(std::exp(stats::log_choose(n, k))); }

template <class Prob>
Prob make_ratio(std::int64_t num, std::int64_t den) {
  if constexpr (std::is_same_v<Prob, Rational>)
    return Rational(num, den);
  else
    return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace detail

// Exact joint pmf of one weight vector at small n.
template <class Prob = double>
BasicJointPMF<Prob> enumerate_joint(const WeightScheme& scheme, int n,
                                    std::size_t budget = 100'000) {
  if (n < 2 || n > 6) throw InvalidParameter("exact enumeration supports 2 <= n <= 6");
  if (!scheme.finite_support())
    throw ContinuousKind(std::string(to_string(scheme.kind)) +
                         " has continuous weights and no finite joint pmf; use "
                         "check_nod_gaussian for gaussian_nod. Dirichlet and independent "
                         "continuous weights are NOD by the cited literature "
                         "(documented-but-unchecked)");
  scheme.validate(n);
  BasicJointPMF<Prob> joint;
  joint.n = n;
  const double nd = n;
  switch (scheme.kind) {
    case SchemeKind::multinomial: {
      const int m = static_cast<int>(scheme.m_schedule(n));
      const double count = detail::choose(m + nd - 1.0, nd - 1.0);
      if (count > static_cast<double>(budget))
        throw BudgetExceeded("multinomial support has " + std::to_string(count) +
                             " points, budget " + std::to_string(budget));
      std::vector<Prob> p(static_cast<std::size_t>(n));
      for (int j = 0; j < n; ++j) {
        const auto [num, den] = scheme.probs_rule.rational(n, j);
        p[static_cast<std::size_t>(j)] = detail::make_ratio<Prob>(num, den);
      }
      detail::for_each_weak_composition(m, n, [&](const std::vector<int>& k) {
        // m! / prod k_j! * prod p_j^k_j
        Prob prob = 1;
        int placed = 0;
        for (int j = 0; j < n; ++j) {
          for (int t = 1; t <= k[static_cast<std::size_t>(j)]; ++t) {
            ++placed;
            prob *= Prob(placed);
            prob /= Prob(t);
            prob *= p[static_cast<std::size_t>(j)];
          }
        }
        joint.support.emplace_back(k.begin(), k.end());
        joint.probs.push_back(prob);
      });
      break;
    }
    case SchemeKind::hypergeometric_delete_d:
    case SchemeKind::downweight_d: {
      const int d = static_cast<int>(scheme.d_rule(n));
      const auto count = static_cast<std::int64_t>(detail::choose(nd, d));
      if (static_cast<std::size_t>(count) > budget)
        throw BudgetExceeded("jackknife support exceeds budget");
      const bool jack = scheme.kind == SchemeKind::hypergeometric_delete_d;
      const double kept = jack ? 1.0 : 1.0 + d / nd;
      const double dropped = jack ? 0.0 : d / nd;
      detail::for_each_subset(n, d, [&](const std::vector<int>& idx) {
        std::vector<double> w(static_cast<std::size_t>(n), kept);
        for (int i : idx) w[static_cast<std::size_t>(i)] = dropped;
        joint.support.push_back(std::move(w));
        joint.probs.push_back(detail::make_ratio<Prob>(1, count));
      });
      break;
    }
    case SchemeKind::over_replacement: {
      const auto count = static_cast<std::int64_t>(detail::choose(2.0 * nd - 1.0, nd - 1.0));
      if (static_cast<std::size_t>(count) > budget)
        throw BudgetExceeded("over-replacement support exceeds budget");
      detail::for_each_weak_composition(n, n, [&](const std::vector<int>& k) {
        joint.support.emplace_back(k.begin(), k.end());
        joint.probs.push_back(detail::make_ratio<Prob>(1, count));
      });
      break;
    }
    default: break;
  }
  return joint;
}

// Evaluates both orthant inequality families over the full cut-point grid.
template <class Prob>
NodReport check_nod(const BasicJointPMF<Prob>& joint, std::size_t work_cap = 200'000'000) {
  joint.validate();
  const int n = joint.n;
  const auto un = static_cast<std::size_t>(n);
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();

  // Per-coordinate sorted distinct values and each support point's rank.
  std::vector<std::vector<double>> cuts(un);
  std::vector<std::vector<Prob>> cdf(un);  // P(X_i <= cuts[i][c])
  for (int i = 0; i < n; ++i) {
    const auto m = joint.marginal(i);
    Prob acc = 0;
    for (const auto& [v, p] : m) {
      acc += p;
      cuts[static_cast<std::size_t>(i)].push_back(v);
      cdf[static_cast<std::size_t>(i)].push_back(acc);
    }
  }
  const std::size_t S = joint.support.size();
  std::vector<int> rank(S * un);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t i = 0; i < un; ++i) {
      const auto& c = cuts[i];
      rank[s * un + i] = static_cast<int>(
          std::lower_bound(c.begin(), c.end(), joint.support[s][i]) - c.begin());
    }

  double upper_grid = 1.0, lower_grid = 1.0;
  for (const auto& c : cuts) {
    lower_grid *= static_cast<double>(c.size());
    upper_grid *= static_cast<double>(c.size() + 1);
  }
  if ((lower_grid + upper_grid) * static_cast<double>(S * un) > static_cast<double>(work_cap))
    throw GridOverflow("cut-point grid too large: " + std::to_string(lower_grid + upper_grid) +
                       " points x " + std::to_string(S) + " support points");

  NodReport report;
  report.exact = std::is_same_v<Prob, Rational>;
  report.tolerance = report.exact ? 0.0 : 1e-12;
  report.grid_points = static_cast<std::size_t>(lower_grid + upper_grid);

  // Odometer over grid indices; upper family uses offset -1 for the -inf cut.
  auto scan = [&](bool upper, std::vector<double>& witness) {
    const int offset = upper ? -1 : 0;
    std::vector<int> idx(un, offset);
    bool first = true;
    Prob best = 0;
    while (true) {
      Prob product = 1;
      for (std::size_t i = 0; i < un; ++i) {
        const int c = idx[i];
        if (upper)
          product *= c < 0 ? Prob(1) : Prob(1) - cdf[i][static_cast<std::size_t>(c)];
        else
          product *= cdf[i][static_cast<std::size_t>(c)];
      }
      Prob joint_prob = 0;
      for (std::size_t s = 0; s < S; ++s) {
        bool in = true;
        for (std::size_t i = 0; i < un && in; ++i)
          in = upper ? rank[s * un + i] > idx[i] : rank[s * un + i] <= idx[i];
        if (in) joint_prob += joint.probs[s];
      }
      const Prob v = joint_prob - product;
      if (first || v > best) {
        best = v;
        witness.assign(un, 0.0);
        for (std::size_t i = 0; i < un; ++i)
          witness[i] = idx[i] < 0 ? kNegInf : cuts[i][static_cast<std::size_t>(idx[i])];
        first = false;
      }
      std::size_t k = 0;
      while (k < un) {
        if (++idx[k] < static_cast<int>(cuts[k].size())) break;
        idx[k] = offset;
        ++k;
      }
      if (k == un) break;
    }
    return best;
  };

  const Prob lo = scan(false, report.lower_witness);
  const Prob up = scan(true, report.upper_witness);
  report.max_lower_violation = to_double(lo);
  report.max_upper_violation = to_double(up);
  report.witness = up > lo ? report.upper_witness : report.lower_witness;
  if constexpr (std::is_same_v<Prob, Rational>)
    report.holds = lo <= 0 && up <= 0;
  else
    report.holds = lo <= report.tolerance && up <= report.tolerance;
  return report;
}

// Two perfectly comonotone fair coins: the simplest distribution that is not
// NOD. Used to confirm the checker detects violations.
template <class Prob = double>
BasicJointPMF<Prob> comonotone_test_pmf() {
  BasicJointPMF<Prob> j;
  j.n = 2;
  j.support = {{0.0, 0.0}, {1.0, 1.0}};
  j.probs = {detail::make_ratio<Prob>(1, 2), detail::make_ratio<Prob>(1, 2)};
  return j;
}

enum class Monotone { nondecreasing, nonincreasing };

struct MonotoneMap {
  std::function<double(double)> f;
  Monotone direction = Monotone::nondecreasing;
};

// NOD of (f_1(X_1), ..., f_n(X_n)). A single map is applied to every
// coordinate. All maps must share one monotonicity direction.
template <class Prob>
NodReport check_monotone_closure(const BasicJointPMF<Prob>& joint,
                                 const std::vector<MonotoneMap>& transforms) {
  joint.validate();
  const auto un = static_cast<std::size_t>(joint.n);
  if (transforms.size() != 1 && transforms.size() != un)
    throw InvalidParameter("need one transform or one per coordinate");
  for (const auto& t : transforms)
    if (t.direction != transforms.front().direction)
      throw MixedMonotonicity("transforms mix nondecreasing and nonincreasing maps");
  auto map_for = [&](std::size_t i) -> const MonotoneMap& {
    return transforms.size() == 1 ? transforms.front() : transforms[i];
  };
  for (std::size_t i = 0; i < un; ++i) {
    const auto m = joint.marginal(static_cast<int>(i));
    const auto& t = map_for(i);
    for (std::size_t k = 1; k < m.size(); ++k) {
      const double a = t.f(m[k - 1].first), b = t.f(m[k].first);
      const bool ok = t.direction == Monotone::nondecreasing ? a <= b : a >= b;
      if (!ok) throw InvalidParameter("transform is not monotone in its declared direction");
    }
  }
  std::map<std::vector<double>, Prob> merged;
  for (std::size_t s = 0; s < joint.support.size(); ++s) {
    std::vector<double> y(un);
    for (std::size_t i = 0; i < un; ++i) y[i] = map_for(i).f(joint.support[s][i]);
    merged[y] += joint.probs[s];
  }
  BasicJointPMF<Prob> out;
  out.n = joint.n;
  for (auto& [pt, p] : merged) {
    out.support.push_back(pt);
    out.probs.push_back(p);
  }
  return check_nod(out);
}

struct OrthantProbability {
  double value = 0.0;
  double error = 0.0;
};

namespace detail {

// Adaptive bisection on a fixed Gauss-Kronrod rule with an absolute error
// target, which the relative stopping rule in boost cannot express.
template <unsigned Points, class F>
double integrate_abs(F&& f, double a, double b, double atol, int depth, double& err) {
  double e = 0.0;
  const double v =
      boost::math::quadrature::gauss_kronrod<double, Points>::integrate(f, a, b, 0, 0.0, &e);
  if (e <= atol || depth == 0) {
    err += e;
    return v;
  }
  const double mid = 0.5 * (a + b);
  return integrate_abs<Points>(f, a, mid, 0.5 * atol, depth - 1, err) +
         integrate_abs<Points>(f, mid, b, 0.5 * atol, depth - 1, err);
}

// Plackett's identity: d/dr Phi2(h, k; r) = phi2(h, k; r), integrated from the
// independent case r = 0 to rho.
inline OrthantProbability bivariate_normal_lower(double h, double k, double rho, double tol) {
  const double base = stats::normal_cdf(h) * stats::normal_cdf(k);
  if (rho == 0.0) return {base, 1e-16};
  if (std::abs(rho) >= 1.0) throw InvalidParameter("bivariate correlation must lie in (-1, 1)");
  auto density = [h, k](double r) {
    const double om = 1.0 - r * r;
    return std::exp(-(h * h - 2.0 * r * h * k + k * k) / (2.0 * om)) /
           (2.0 * std::numbers::pi * std::sqrt(om));
  };
  double err = 0.0;
  const double add = integrate_abs<15>(density, 0.0, rho, tol, 12, err);
  return {std::clamp(base + add, 0.0, 1.0), err + 1e-16};
}

// P(Z <= b) for Z ~ N(0, R) with R a correlation matrix, by conditioning on
// the first coordinate and integrating its density with adaptive
// Gauss-Kronrod. The conditional law of the rest stays Gaussian with a
// covariance independent of the conditioning value.
inline OrthantProbability gaussian_orthant_rec(const std::vector<std::vector<double>>& R,
                                               std::vector<double> b, double tol) {
  const std::size_t k = b.size();
  if (k == 1) return {stats::normal_cdf(b[0]), 1e-16};
  if (k == 2) return bivariate_normal_lower(b[0], b[1], R[0][1], tol);
  constexpr double kTail = 10.0;
  if (b[0] <= -kTail) return {0.0, stats::normal_cdf(-kTail)};
  std::vector<double> s(k - 1), r0(k - 1);
  std::vector<std::vector<double>> Rc(k - 1, std::vector<double>(k - 1));
  for (std::size_t i = 1; i < k; ++i) {
    r0[i - 1] = R[i][0];
    const double v = 1.0 - R[i][0] * R[i][0];
    if (v <= 1e-12)
      throw InvalidParameter("singular correlation matrix; orthant integration needs full rank");
    s[i - 1] = std::sqrt(v);
  }
  for (std::size_t i = 1; i < k; ++i)
    for (std::size_t j = 1; j < k; ++j)
      Rc[i - 1][j - 1] = i == j ? 1.0 : (R[i][j] - R[i][0] * R[j][0]) / (s[i - 1] * s[j - 1]);
  double inner_err = 0.0;
  auto integrand = [&](double t) {
    std::vector<double> bc(k - 1);
    for (std::size_t i = 0; i + 1 < k; ++i) bc[i] = (b[i + 1] - r0[i] * t) / s[i];
    const auto inner = gaussian_orthant_rec(Rc, std::move(bc), tol);
    inner_err = std::max(inner_err, inner.error);
    return stats::normal_pdf(t) * inner.value;
  };
  const double hi = std::min(b[0], kTail);
  double err = 0.0;
  const double value = integrate_abs<31>(integrand, -kTail, hi, tol, 12, err);
  return {value, err + inner_err + stats::normal_cdf(-kTail)};
}

}  // namespace detail

inline OrthantProbability gaussian_lower_orthant(const std::vector<std::vector<double>>& corr,
                                                 std::span<const double> upper,
                                                 double tol = 1e-11) {
  return detail::gaussian_orthant_rec(corr, {upper.begin(), upper.end()}, tol);
}

// Numerical NOD check of equicorrelated Gaussian weights at n <= 4. Every
// orthant probability must be integrated to within error_budget, which is
// added to the reporting tolerance.
inline NodReport check_nod_gaussian(const GaussianSpec& spec, int n, std::span<const double> grid,
                                    double error_budget = 1e-8) {
  if (n < 2 || n > 4) throw InvalidParameter("gaussian NOD check supports 2 <= n <= 4");
  if (grid.empty()) throw InvalidParameter("cut-point grid is empty");
  spec.validate(n);
  const double rho = spec.rho(n);
  const double sigma = std::sqrt(spec.variance);
  const auto un = static_cast<std::size_t>(n);
  std::vector<std::vector<double>> R(un, std::vector<double>(un, rho));
  for (std::size_t i = 0; i < un; ++i) R[i][i] = 1.0;

  NodReport report;
  report.tolerance = 1e-12 + error_budget;
  bool first_lo = true, first_up = true;
  std::vector<std::size_t> idx(un, 0);
  std::size_t points = 0;
  while (true) {
    std::vector<double> x(un), z(un), negz(un);
    double prod_lo = 1.0, prod_up = 1.0;
    for (std::size_t i = 0; i < un; ++i) {
      x[i] = grid[idx[i]];
      z[i] = (x[i] - spec.mean) / sigma;
      negz[i] = -z[i];
      prod_lo *= stats::normal_cdf(z[i]);
      prod_up *= stats::normal_cdf(-z[i]);
    }
    const auto lo = gaussian_lower_orthant(R, z);
    const auto up = gaussian_lower_orthant(R, negz);  // P(X > x) = P(-X < -x)
    const double worst = std::max(lo.error, up.error);
    if (worst > error_budget) {
      std::ostringstream os;
      os << "orthant integration error " << worst << " exceeds budget " << error_budget;
      throw IntegrationError(os.str());
    }
    const double vlo = lo.value - prod_lo, vup = up.value - prod_up;
    if (first_lo || vlo > report.max_lower_violation) {
      report.max_lower_violation = vlo;
      report.lower_witness = x;
      first_lo = false;
    }
    if (first_up || vup > report.max_upper_violation) {
      report.max_upper_violation = vup;
      report.upper_witness = x;
      first_up = false;
    }
    ++points;
    std::size_t k = 0;
    while (k < un) {
      if (++idx[k] < grid.size()) break;
      idx[k] = 0;
      ++k;
    }
    if (k == un) break;
  }
  report.grid_points = 2 * points;
  report.witness = report.max_upper_violation > report.max_lower_violation
                       ? report.upper_witness
                       : report.lower_witness;
  report.holds = report.max_lower_violation <= report.tolerance &&
                 report.max_upper_violation <= report.tolerance;
  return report;
}

}  // namespace ulln
