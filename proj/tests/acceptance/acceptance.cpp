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

// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "ulln/cli.hpp"
#include "ulln/conditions.hpp"
#include "ulln/engine.hpp"
#include "ulln/exactdist.hpp"
#include "ulln/netcover.hpp"
#include "ulln/schemes.hpp"

namespace {

using namespace ulln;
namespace fs = std::filesystem;

// Collects the reasons a criterion failed; empty means PASS.
struct Verdicts {
  std::vector<std::string> failures;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  void info(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string num(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + num(v[i]);
  return s;
}

// 1. Exact NOD for the finite-support kinds at n = 2, 3, 4.
void nod_exactness(Verdicts& v) {
  std::vector<WeightScheme> kinds;
  for (std::int64_t m = 1; m <= 3; ++m)
    for (auto pk : {ProbsRule::Kind::uniform, ProbsRule::Kind::ramp})
      kinds.push_back(WeightScheme::multinomial(MSchedule::constant(m), ProbsRule{pk}));
  kinds.push_back(WeightScheme::over_replacement());
  int cases = 0;
  double worst_double = -1.0, worst_exact = -1.0;
  for (int n = 2; n <= 4; ++n) {
    auto all = kinds;
    for (std::int64_t d = 1; d < n; ++d) {
      all.push_back(WeightScheme::delete_d(DRule::fixed(d)));
      all.push_back(WeightScheme::downweight_d(DRule::fixed(d)));
    }
    for (const auto& s : all) {
      const auto fd = check_nod(enumerate_joint<double>(s, n));
      const auto ex = check_nod(enumerate_joint<Rational>(s, n));
      const double vd = std::max(fd.max_lower_violation, fd.max_upper_violation);
      const double ve = std::max(ex.max_lower_violation, ex.max_upper_violation);
      worst_double = std::max(worst_double, vd);
      worst_exact = std::max(worst_exact, ve);
      v.require(vd <= 1e-12, s.describe() + " n=" + std::to_string(n) + " double " + num(vd));
      v.require(ve <= 0.0, s.describe() + " n=" + std::to_string(n) + " exact " + num(ve));
      ++cases;
    }
  }
  v.info(std::to_string(cases) + " cases, worst double " + num(worst_double) + ", worst exact " +
         num(worst_exact));
}

// 2. The comonotone pair is caught.
void nod_violation(Verdicts& v) {
  for (bool exact : {false, true}) {
    const auto rep = exact ? check_nod(comonotone_test_pmf<Rational>())
                           : check_nod(comonotone_test_pmf<double>());
    v.require(std::abs(rep.max_lower_violation - 0.25) <= 1e-12,
              "lower violation " + num(rep.max_lower_violation));
    v.require(rep.lower_witness == std::vector<double>{0.0, 0.0}, "witness is not (0,0)");
    v.require(!rep.holds, "reported as NOD");
    if (!exact) v.info("violation " + num(rep.max_lower_violation) + " at (0,0)");
  }
}

// 3. Analytic marginal moments against 10^6 Monte Carlo draws.
void moment_oracle(Verdicts& v) {
  const std::vector<WeightScheme> kinds{
      WeightScheme::multinomial(),
      WeightScheme::multinomial(MSchedule::identity(), ProbsRule{ProbsRule::Kind::ramp}),
      WeightScheme::dirichlet(),
      WeightScheme::delete_d(),
      WeightScheme::downweight_d(),
      WeightScheme::over_replacement(),
      WeightScheme::independent(),
      WeightScheme::gaussian_nod()};
  const double orders[] = {1.0, 2.0, 4.0};
  double worst = 0.0;
  int compared = 0;
  for (const auto& s : kinds)
    for (std::int64_t n : {4, 16, 64}) {
      const std::int64_t j = n - 1;
      const auto mc = monte_carlo_abs_moments(s, n, j, orders, 1'000'000, 0xacce55);
      for (std::size_t k = 0; k < 3; ++k) {
        const double a = analytic_abs_moment(s, n, j, orders[k]);
        const double diff = std::abs(mc[k].value - a);
        const std::string tag = s.describe() + " n=" + std::to_string(n) + " r=" + num(orders[k]);
        if (mc[k].std_error == 0.0) {
          v.require(diff <= 1e-12 * std::max(1.0, a), tag + " degenerate mismatch " + num(diff));
        } else {
          const double z = diff / mc[k].std_error;
          worst = std::max(worst, z);
          v.require(z <= 4.0, tag + " z=" + num(z));
        }
        ++compared;
      }
    }
  v.info(std::to_string(compared) + " comparisons, worst |z| " + num(worst));
}

ExperimentConfig t1_config() {
  ExperimentConfig cfg;
  cfg.experiment_id = "acceptance-t1";
  cfg.family = families::abs_loc();
  cfg.data = DataModel::uniform01();
  cfg.scheme = WeightScheme::multinomial();
  cfg.scaling = Scaling::theorem1;
  cfg.n_grid = {100, 316, 1000, 3162, 10000};
  cfg.replications = 200;
  cfg.net_rule = NetRule::fixed(0.01);
  cfg.seed = 20260401;
  cfg.threads = 0;
  return cfg;
}

void rate_in(Verdicts& v, const ExperimentConfig& cfg, double lo, double hi) {
  ConditionReport pre;
  const auto curve = run_experiment(cfg, &pre);
  v.require(pre.verdict == Verdict::satisfied,
            "precheck " + std::string(to_string(pre.verdict)));
  const auto rate = estimate_rate(curve);
  v.require(strictly_decreasing(rate.values), "medians not strictly decreasing: " +
                                                  join(rate.values));
  v.require(rate.slope >= lo && rate.slope <= hi, "slope " + num(rate.slope));
  v.info("slope " + num(rate.slope) + " (se " + num(rate.std_error) + "), medians " +
         join(rate.values));
}

// 4. m_n = n.
void theorem1_full(Verdicts& v) { rate_in(v, t1_config(), -0.65, -0.35); }

// 5. m_n = ceil(n^0.6).
void theorem1_m_out_of_n(Verdicts& v) {
  auto cfg = t1_config();
  cfg.experiment_id = "acceptance-t1-m";
  cfg.scheme = WeightScheme::multinomial(MSchedule::power(0.6));
  const auto t1 = check_t1_regime(cfg.scheme.m_schedule, 'a', 0.4);
  v.require(t1.verdict == Verdict::satisfied, "T1a with delta 0.4 not satisfied");
  rate_in(v, cfg, -0.45, -0.15);
}

// 6. Theorem 2 scaling: identity with theorem 1 at p = 1, decay for Dirichlet.
void theorem2(Verdicts& v) {
  auto a = t1_config();
  a.replications = 50;
  a.experiment_id = "acceptance-t2-identity";
  auto b = a;
  b.scaling = Scaling::theorem23;
  b.p = 1.0;
  const auto ca = run_experiment(a), cb = run_experiment(b);
  double worst = 0.0;
  v.require(ca.records.size() == cb.records.size(), "record counts differ");
  for (std::size_t i = 0; i < std::min(ca.records.size(), cb.records.size()); ++i)
    worst = std::max(worst, std::abs(ca.records[i].sup_dev - cb.records[i].sup_dev));
  v.require(worst <= 1e-12, "theorem1 vs theorem23 differ by " + num(worst));
  v.info("max |t1 - t23| " + num(worst));

  auto d = t1_config();
  d.experiment_id = "acceptance-t2-dirichlet";
  d.scheme = WeightScheme::dirichlet();
  d.scaling = Scaling::theorem23;
  d.p = 1.2;
  ConditionReport pre;
  const auto curve = run_experiment(d, &pre);
  const auto rate = estimate_rate(curve);
  v.require(pre.verdict == Verdict::satisfied, "dirichlet precheck " +
                                                   std::string(to_string(pre.verdict)));
  v.require(strictly_decreasing(rate.values), "dirichlet medians not strictly decreasing");
  v.require(rate.slope <= -0.8, "dirichlet slope " + num(rate.slope));
  v.info("dirichlet slope " + num(rate.slope) + ", medians " + join(rate.values));
}

// 7. r_n net sizes against the covering fit; summability exponent.
void theorem3_nets(Verdicts& v) {
  const auto fam = families::abs_loc();
  const double p = 4.0 / 3.0, eps = 0.1;
  const auto fit = covering_constant(fam.box, {0.04, 0.02, 0.01, 0.005});
  for (std::int64_t n : {100, 1000, 10000}) {
    const auto net = build_rn_schedule(fam, p, eps, n);
    const double bound = fit.c * std::pow(net.radius, -fit.D_fit);
    v.require(static_cast<double>(net.size()) <= bound,
              "n=" + std::to_string(n) + " K_n=" + std::to_string(net.size()) + " > " + num(bound));
    v.info("n=" + std::to_string(n) + " r_n=" + num(net.radius) + " K_n=" +
           std::to_string(net.size()) + " <= " + num(bound));
  }
  auto cfg = t1_config();
  cfg.experiment_id = "acceptance-t3";
  cfg.scaling = Scaling::theorem23;
  cfg.p = p;
  cfg.net_rule = NetRule::rn_schedule(eps);
  cfg.n_grid = {100, 1000, 10000};
  cfg.replications = 20;
  const auto curve = run_experiment(cfg);
  const auto rep = summability_proxy(curve, eps, 6.0, p, 1.0, 1.0);
  v.require(std::abs(rep.gamma - 1.25) <= 1e-12, "gamma " + num(rep.gamma));
  v.require(rep.gamma > 1.0, "gamma not above 1");
  v.require(std::abs(summability_exponent(6.0, p, 1.0, 1.0) - 1.25) <= 1e-12,
            "summability_exponent");
  v.info("c=" + num(fit.c) + " D=" + num(fit.D_fit) + " gamma=" + num(rep.gamma));
}

// 8. Rosenthal ratios and Gaussian calibration.
void rosenthal(Verdicts& v) {
  const double theta[] = {0.5};
  const auto rows = rosenthal_stress(WeightScheme::multinomial(), families::abs_loc(),
                                     DataModel::uniform01(), theta, 4.0, {64, 256, 1024, 4096},
                                     2000, 0x7051);
  std::vector<double> ratios;
  for (const auto& r : rows) {
    ratios.push_back(r.ratio);
    v.require(r.ratio <= 4.0 * rows.front().ratio, "ratio blow-up at n=" + std::to_string(r.n));
  }
  const auto cal = rosenthal_gaussian_calibration(4096, 4.0, 20000, 0x7051);
  const double m4 = cal.lhs / cal.rhs2;
  v.require(std::abs(m4 - 3.0) <= 0.3, "calibration " + num(m4));
  v.info("ratios " + join(ratios) + ", calibration " + num(m4));
}

// 9. The two-point hand case.
void hand_case(Verdicts& v) {
  const auto fam = families::linear();
  const auto net = ParameterNet::from_points(1, {0.0, 0.25, 0.5, 0.75, 1.0}, 0.125);
  const auto mu = net_means(fam, net, DataModel::uniform01());
  const std::vector<double> data{0.0, 1.0}, means{1.0, 1.0};
  WeightVector w;
  w.n = 2;
  w.values = {2.0, 0.0};
  const double t1 = sup_deviation_t1(fam, data, w, 2, net, mu);
  const double t23 = sup_deviation_t23(fam, data, w, 1.0, net, mu, means);
  v.require(std::abs(t1 - 0.5) <= 1e-12, "theorem1 " + num(t1));
  v.require(std::abs(t23 - 0.5) <= 1e-12, "theorem23 " + num(t23));
  v.info("theorem1 " + num(t1) + ", theorem23 " + num(t23));
}

// 10. The run command at 1 and 8 threads.
void determinism(Verdicts& v) {
  const auto dir = fs::temp_directory_path() / ("ulln-acceptance-" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const auto cfg = dir / "det.ini";
  std::ofstream(cfg) << "[experiment]\nid = acceptance-det\nscaling = theorem1\n"
                        "n_grid = 100, 316, 1000, 3162\nreplications = 100\nseed = 424242\n"
                        "[scheme]\nkind = multinomial\n[family]\nname = abs_loc\n"
                        "[net]\nrule = fixed\nradius = 0.01\n";
  std::string csv[2];
  int k = 0;
  for (const char* threads : {"1", "8"}) {
    const auto out = (dir / (std::string("t") + threads)).string();
    const std::string cfgs = cfg.string();
    const char* argv[] = {"ulln", "run", "--config", cfgs.c_str(), "--out", out.c_str(),
                          "--threads", threads};
    std::ostringstream o, e;
    const int code = cli::main(8, argv, {o, e}, nullptr);
    v.require(code == cli::kExitOk, std::string("exit ") + std::to_string(code) + " at threads " +
                                        threads + ": " + e.str());
    std::ifstream f(out + "/deviations.csv", std::ios::binary);
    std::ostringstream body;
    body << f.rdbuf();
    csv[k++] = body.str();
  }
  v.require(!csv[0].empty() && csv[0] == csv[1], "deviations.csv differs between 1 and 8 threads");
  v.info(std::to_string(csv[0].size()) + " bytes identical");
  std::error_code ec;
  fs::remove_all(dir, ec);
}

// 11. Condition checker truth table.
void conditions_table(Verdicts& v) {
  int checked = 0;
  auto expect_verdict = [&](const ConditionReport& r, Verdict want, const std::string& tag) {
    v.require(r.verdict == want, tag + " gave " + std::string(to_string(r.verdict)));
    ++checked;
  };
  auto expect_value = [&](double got, double want, double tol, const std::string& tag) {
    v.require(std::abs(got - want) <= tol, tag + " = " + num(got) + ", want " + num(want));
    ++checked;
  };

  expect_value(q_threshold(1.0 + 1e-9, 1, 1), 2.0, 1e-6, "q_threshold p->1");
  expect_value(q_threshold(4.0 / 3.0, 1, 1), 5.0, 1e-9, "q_threshold(4/3,1,1)");
  expect_value(q_threshold(1.5, 2, 1), 10.0, 1e-9, "q_threshold(1.5,2,1)");

  expect_verdict(check_exponent_triangle(1, 4, 4.0 / 3.0), Verdict::satisfied, "triangle(1,4,4/3)");
  expect_verdict(check_exponent_triangle(1.5, 4, 2.4), Verdict::satisfied, "triangle(1.5,4,2.4)");
  const auto tri = check_exponent_triangle(1, 2, 2);
  expect_verdict(tri, Verdict::violated, "triangle(1,2,2)");
  v.require(tri.lemma2_case_b_candidate, "triangle(1,2,2) not flagged as case (b)");

  const auto grid = default_growth_grid();
  const auto g2 = check_weight_growth(WeightScheme::multinomial(), 2, 1, grid);
  expect_verdict(g2, Verdict::satisfied, "growth multinomial order 2");
  double gmax = 0.0;
  for (auto n : grid) gmax = std::max(gmax, 2.0 - 1.0 / static_cast<double>(n));
  for (const auto& c : g2.checks)
    if (c.name.find("max") != std::string::npos || c.name.find("bounded") != std::string::npos)
      expect_value(c.value, gmax, 1e-9, "multinomial max g(n)");
  for (double p : {1.0, 1.2, 1.5, 1.9})
    expect_verdict(check_weight_growth(WeightScheme::dirichlet(), 1, 1.0 / p, grid),
                   Verdict::satisfied, "growth dirichlet p=" + num(p));
  expect_verdict(check_weight_growth(WeightScheme::multinomial(MSchedule::identity(),
                                                               ProbsRule{ProbsRule::Kind::ramp}),
                                     4, 1, grid),
                 Verdict::satisfied, "growth ramp order 4");

  expect_verdict(check_t1_regime(MSchedule::identity(), 'a', 0.0), Verdict::satisfied,
                 "T1a identity");
  expect_verdict(check_t1_regime(MSchedule::power(0.6), 'a', 0.4), Verdict::satisfied,
                 "T1a power 0.6");
  expect_verdict(check_t1_regime(MSchedule::log(1.0), 'b', 1.0), Verdict::satisfied, "T1b log");
  for (double delta : {0.0, 0.5, 0.9, 0.99})
    expect_verdict(check_t1_regime(MSchedule::log(1.0), 'a', delta), Verdict::violated,
                   "T1a log delta=" + num(delta));

  const auto h = check_h_moment(families::abs_loc(), DataModel::uniform01(), 2);
  expect_verdict(h, Verdict::satisfied, "E G^2 abs_loc uniform");
  expect_value(h.checks.front().value, 7.0 / 12.0, 1e-9, "E G^2 abs_loc uniform");
  HMomentOptions mc;
  mc.method = MomentMethod::monte_carlo;
  const auto hm = check_h_moment(families::abs_loc(), DataModel::uniform01(), 2, mc);
  expect_value(hm.checks.front().value, 7.0 / 12.0, 4.0 * hm.checks.front().std_error,
               "Monte Carlo E G^2 abs_loc uniform");
  for (const auto& data :
       {DataModel::uniform01(), DataModel::standard_normal(), DataModel::exponential1()})
    for (double order : {1.0, 2.0, 4.0}) {
      const auto c = check_h_moment(families::cosine(0.0, 2.0), data, order);
      expect_verdict(c, Verdict::satisfied, "cosine " + data.name);
      v.require(c.checks.front().value <= 1.0 + 1e-12, "cosine moment above 1");
    }
  const auto e = check_h_moment(families::abs_loc(-1.0, 1.0), DataModel::exponential1(), 2);
  expect_verdict(e, Verdict::satisfied, "E(X+1)^2");
  expect_value(e.checks.front().value, 5.0, 1e-9, "E(X+1)^2");
  v.info(std::to_string(checked) + " verdicts and values");
}

struct Criterion {
  const char* name;
  double budget_s;
  std::function<void(Verdicts&)> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"1 NOD exactness (finite-support kinds, n=2..4)", 10, nod_exactness},
      {"2 NOD violation detection (comonotone pair)", 1, nod_violation},
      {"3 moment oracle agreement (10^6 draws)", 60, moment_oracle},
      {"4 theorem 1 convergence, m_n = n", 300, theorem1_full},
      {"5 m-out-of-n regime, m_n = ceil(n^0.6)", 300, theorem1_m_out_of_n},
      {"6 theorem 2 scaling and Dirichlet decay", 300, theorem2},
      {"7 theorem 3 net schedule and summability", 30, theorem3_nets},
      {"8 Rosenthal stress and calibration", 300, rosenthal},
      {"9 hand-computed two-point case", 1, hand_case},
      {"10 determinism across thread counts", 120, determinism},
      {"11 condition checker truth table", 60, conditions_table},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Verdicts v;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(v);
    } catch (const std::exception& e) {
      v.failures.push_back(std::string("exception: ") + e.what());
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    v.require(secs <= c.budget_s, "runtime " + num(secs) + " s over " + num(c.budget_s) + " s");
    const bool ok = v.failures.empty();
    failed += ok ? 0 : 1;
    std::printf("%s  %s  (%.2f s)\n", ok ? "PASS" : "FAIL", c.name, secs);
    if (!v.detail.empty()) std::printf("      %s\n", v.detail.c_str());
    for (const auto& f : v.failures) std::printf("      - %s\n", f.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu criteria, %d failed\n", criteria.size(), failed);
  return failed == 0 ? 0 : 1;
}
