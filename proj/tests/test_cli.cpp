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

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "test_util.hpp"
#include "ulln/cli.hpp"
#include "ulln/csv.hpp"

namespace ulln {
namespace {

using testing::slurp;
using testing::TempDir;
namespace fs = std::filesystem;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run_cli(std::vector<std::string> args, const char* env_seed = nullptr) {
  args.insert(args.begin(), "ulln");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::main(static_cast<int>(argv.size()), argv.data(), {out, err}, env_seed);
  return {code, out.str(), err.str()};
}

const char* kSmallRun = R"([experiment]
id = cli-small
scaling = theorem1
n_grid = 40, 80, 160, 320
replications = 12
seed = 99
data = uniform01

[scheme]
kind = multinomial
m = identity

[family]
name = abs_loc
box = 0, 1

[net]
rule = fixed
radius = 0.05
)";

std::string first_line(const std::string& text) { return text.substr(0, text.find('\n')); }

// Config parsing

TEST(ParseConfig, MinimalConfigUsesDefaults) {
  const auto rc = parse_config_string("[family]\nname = abs_loc\n[scheme]\nkind = multinomial\n");
  EXPECT_EQ(rc.family_name, "abs_loc");
  EXPECT_EQ(rc.experiment.scheme.kind, SchemeKind::multinomial);
  EXPECT_TRUE(rc.warnings.empty());
  EXPECT_FALSE(rc.experiment.experiment_id.empty());
}

ConfigError config_error(const std::string& text, bool strict = false) {
  try {
    parse_config_string(text, strict);
  } catch (const ConfigError& e) {
    return e;
  }
  ADD_FAILURE() << "no ConfigError for:\n" << text;
  return ConfigError("", "");
}

TEST(ParseConfig, ErrorsNameTheOffendingField) {
  const std::string base = "[family]\nname = abs_loc\n";
  EXPECT_EQ(config_error(base + "[scheme]\nkind = multinomial\n"
                                "[experiment]\nscaling = theorem23\np = 2\n")
                .field(),
            "experiment.p");
  EXPECT_EQ(config_error(base + "[scheme]\nkind = downweight_d\nd = n\n").field(), "scheme.d");
  EXPECT_EQ(config_error(base + "[scheme]\nkind = multinomial\nfoo = 1\n", true).field(),
            "scheme.foo");
  EXPECT_EQ(config_error("[scheme]\nkind = multinomial\n").field(), "family.name");
  EXPECT_EQ(config_error(base).field(), "scheme.kind");
  EXPECT_EQ(config_error(base + "[scheme]\nkind = poisson\n").field(), "scheme.kind");
  EXPECT_EQ(config_error(base + "[scheme]\nkind = bayesian_dirichlet\nm = identity\n").field(), "scheme.m");
  EXPECT_EQ(config_error(base + "[scheme]\nkind = multinomial\n[conditions]\nq = 9\n").field(),
            "conditions.q");
  EXPECT_EQ(config_error(base + "[scheme]\nkind = multinomial\n[conditions]\ntheorem = T3\n")
                .field(),
            "conditions.q");
}

TEST(ParseConfig, UnknownKeysWarnWhenLenient) {
  const auto rc = parse_config_string(
      "[family]\nname = abs_loc\n[scheme]\nkind = multinomial\nfoo = 1\n[extra]\nx = 2\n");
  ASSERT_EQ(rc.warnings.size(), 2u);
  const std::string all = rc.warnings[0] + "\n" + rc.warnings[1];
  EXPECT_NE(all.find("[extra]"), std::string::npos);
  EXPECT_NE(all.find("scheme.foo"), std::string::npos);
  EXPECT_THROW(parse_config_string("[family]\nname = abs_loc\n[scheme]\nkind = multinomial\n"
                                   "[extra]\nx = 2\n",
                                   true),
               ConfigError);
}

TEST(ParseConfig, DigestIgnoresLayoutAndExecutionSettings) {
  const auto a = parse_config_string(kSmallRun).digest();
  const auto reordered = parse_config_string(
      "; leading comment\n[net]\nradius = 0.05\nrule = fixed\n\n[family]\nbox = 0,1\n"
      "name = abs_loc\n[scheme]\nm = identity\nkind = multinomial\n[experiment]\n"
      "data = uniform01\nseed = 99\nreplications = 12\nn_grid = 40,80,160,320\n"
      "scaling = theorem1\nid = cli-small\n");
  EXPECT_EQ(a, reordered.digest());
  EXPECT_EQ(a, parse_config_string(std::string(kSmallRun) + "[engine]\nthreads = 8\nforce = true\n")
                   .digest());
  EXPECT_NE(a, parse_config_string(std::string(kSmallRun) + "[engine]\nsummary = mean\n").digest());
  std::string other_seed = kSmallRun;
  other_seed.replace(other_seed.find("seed = 99"), 9, "seed = 98");
  EXPECT_NE(a, parse_config_string(other_seed).digest());
  EXPECT_EQ(a.size(), 16u);
}

TEST(ResolveSeed, FlagBeatsEnvBeatsConfig) {
  auto s = cli::resolve_seed("5", "6", 7);
  EXPECT_EQ(s.seed, 5u);
  EXPECT_EQ(s.source, "flag");
  s = cli::resolve_seed("", "6", 7);
  EXPECT_EQ(s.seed, 6u);
  EXPECT_EQ(s.source, "env");
  s = cli::resolve_seed("", "", 7);
  EXPECT_EQ(s.seed, 7u);
  EXPECT_EQ(s.source, "config");
  s = cli::resolve_seed("", nullptr, 7);
  EXPECT_EQ(s.source, "config");
  EXPECT_THROW(cli::resolve_seed("x1", nullptr, 7), ConfigError);
}

// run

TEST(CliRun, WritesArtifactsWithExactHeaders) {
  TempDir dir("cli-run");
  const auto cfg = dir.write("small.ini", kSmallRun);
  const auto out = dir.file("out");
  const auto r = run_cli({"run", "--config", cfg, "--out", out});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_NE(r.out.find("precheck: "), std::string::npos);

  const auto dev = slurp(out + "/deviations.csv");
  EXPECT_EQ(first_line(dev), "experiment_id,scheme,n,m_n,p,replicate,seed,sup_dev,net_size,wall_ms");
  const auto curve = csv::read_deviations(dev);
  ASSERT_EQ(curve.records.size(), 48u);
  EXPECT_FALSE(curve.failure);
  EXPECT_EQ(curve.experiment_id, "cli-small");
  for (const auto& rec : curve.records) {
    EXPECT_GE(rec.sup_dev, 0.0);
    EXPECT_EQ(rec.wall_ms, 0.0);
  }
  EXPECT_EQ(first_line(slurp(out + "/summary.csv")),
            "experiment_id,n,m_n,replicates,median,mean,q90,net_size,net_gap_bound");
  const auto rates = csv::parse(slurp(out + "/rates.csv"));
  ASSERT_EQ(rates.size(), 2u);
  EXPECT_EQ(csv::join_header(rates[0]), "experiment_id,summary,slope,intercept,stderr,points");
  EXPECT_EQ(rates[1][0], "cli-small");
  EXPECT_EQ(rates[1][5], "4");
  EXPECT_LT(csv::to_real(rates[1][2]), 0.0);
  EXPECT_TRUE(fs::exists(out + "/plot.gp"));

  const auto manifest = nlohmann::json::parse(slurp(out + "/manifest.json"));
  EXPECT_EQ(manifest["status"], "ok");
  EXPECT_EQ(manifest["experiment_id"], "cli-small");
  EXPECT_EQ(manifest["config_digest"], parse_config_file(cfg).digest());
  EXPECT_EQ(manifest["seed"], 99u);
  EXPECT_EQ(manifest["seed_source"], "config");
  EXPECT_EQ(manifest["records"], 48u);
  EXPECT_TRUE(manifest["config"].contains("engine.threads"));
  for (const char* key : {"tool_version", "started", "finished", "outputs", "precheck"})
    EXPECT_TRUE(manifest.contains(key)) << key;
}

TEST(CliRun, ByteIdenticalAcrossRepeatsAndThreadCounts) {
  TempDir dir("cli-det");
  const auto cfg = dir.write("small.ini", kSmallRun);
  std::vector<std::string> outputs;
  for (const char* threads : {"1", "8", "1"}) {
    const auto out = dir.file(std::string("out") + threads + std::to_string(outputs.size()));
    ASSERT_EQ(run_cli({"run", "--config", cfg, "--out", out, "--threads", threads}).code, 0);
    outputs.push_back(slurp(out + "/deviations.csv") + slurp(out + "/summary.csv") +
                      slurp(out + "/rates.csv"));
  }
  EXPECT_EQ(outputs[0], outputs[1]);
  EXPECT_EQ(outputs[0], outputs[2]);
}

TEST(CliRun, SeedPrecedenceReachesTheManifest) {
  TempDir dir("cli-seed");
  const auto cfg = dir.write("small.ini", kSmallRun);
  ASSERT_EQ(run_cli({"run", "--config", cfg, "--out", dir.file("a"), "--seed", "3"}, "4").code, 0);
  ASSERT_EQ(run_cli({"run", "--config", cfg, "--out", dir.file("b")}, "4").code, 0);
  const auto a = nlohmann::json::parse(slurp(dir.file("a") + "/manifest.json"));
  const auto b = nlohmann::json::parse(slurp(dir.file("b") + "/manifest.json"));
  EXPECT_EQ(a["seed"], 3u);
  EXPECT_EQ(a["seed_source"], "flag");
  EXPECT_EQ(b["seed"], 4u);
  EXPECT_EQ(b["seed_source"], "env");
  EXPECT_NE(slurp(dir.file("a") + "/deviations.csv"), slurp(dir.file("b") + "/deviations.csv"));
}

TEST(CliRun, PrecheckFailureStopsUnlessForced) {
  TempDir dir("cli-pre");
  std::string text = kSmallRun;
  text.replace(text.find("m = identity"), 12, "m = constant:3");
  const auto cfg = dir.write("const.ini", text);
  const auto r = run_cli({"run", "--config", cfg, "--out", dir.file("a")});
  EXPECT_EQ(r.code, cli::kExitPrecheck);
  EXPECT_FALSE(fs::exists(dir.file("a") + "/deviations.csv"));
  EXPECT_FALSE(r.err.empty());
  const auto f = run_cli({"run", "--config", cfg, "--out", dir.file("b"), "--force"});
  EXPECT_EQ(f.code, cli::kExitOk) << f.err;
  EXPECT_TRUE(fs::exists(dir.file("b") + "/deviations.csv"));
  EXPECT_NE(f.out.find("precheck: violated"), std::string::npos);
}

TEST(CliRun, ConfigAndUsageErrorsExitOne) {
  TempDir dir("cli-err");
  const auto bad = dir.write("bad.ini", "[family]\nname = abs_loc\n[scheme]\nkind = downweight_d\n"
                                        "d = n\n");
  auto r = run_cli({"run", "--config", bad, "--out", dir.file("o")});
  EXPECT_EQ(r.code, cli::kExitError);
  EXPECT_NE(r.err.find("scheme.d"), std::string::npos);
  EXPECT_EQ(run_cli({"run", "--config", dir.file("missing.ini")}).code, cli::kExitError);
  EXPECT_EQ(run_cli({"run"}).code, cli::kExitError);
  EXPECT_EQ(run_cli({}).code, cli::kExitError);
  EXPECT_EQ(run_cli({"frobnicate"}).code, cli::kExitError);
  const auto strict = dir.write("extra.ini", std::string(kSmallRun) + "[engine]\ncolour = red\n");
  r = run_cli({"run", "--config", strict, "--out", dir.file("s"), "--strict"});
  EXPECT_EQ(r.code, cli::kExitError);
  EXPECT_NE(r.err.find("engine.colour"), std::string::npos);
  r = run_cli({"run", "--config", strict, "--out", dir.file("l")});
  EXPECT_EQ(r.code, cli::kExitOk);
  EXPECT_NE(r.err.find("warning: ignored unknown key engine.colour"), std::string::npos);
}

TEST(CliRun, HelpAndVersionExitZero) {
  const auto h = run_cli({"--help"});
  EXPECT_EQ(h.code, 0);
  EXPECT_NE(h.out.find("check-nod"), std::string::npos);
  EXPECT_EQ(run_cli({"--version"}).code, 0);
}

// check-nod

TEST(CliCheckNod, SmallMultinomialHolds) {
  TempDir dir("cli-nod");
  const auto r = run_cli({"check-nod", "--scheme", "multinomial", "--n", "3", "--m", "constant:2",
                          "--out", dir.file("o")});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const auto rows = csv::parse(slurp(dir.file("o") + "/nod.csv"));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(csv::join_header(rows[0]),
            "scheme,n,params,max_lower_violation,max_upper_violation,witness");
  EXPECT_EQ(rows[1][1], "3");
  EXPECT_LE(csv::to_real(rows[1][3]), 0.0);
  EXPECT_LE(csv::to_real(rows[1][4]), 0.0);
}

TEST(CliCheckNod, ComonotonePairIsViolated) {
  const auto r = run_cli({"check-nod", "--scheme", "comonotone_test"});
  EXPECT_EQ(r.code, cli::kExitViolated);
  const auto rows = csv::parse(r.out.substr(r.out.find("scheme,n,params")));
  ASSERT_GE(rows.size(), 2u);
  EXPECT_NEAR(std::max(csv::to_real(rows[1][3]), csv::to_real(rows[1][4])), 0.25, 1e-12);
  EXPECT_EQ(run_cli({"check-nod", "--scheme", "comonotone_test", "--float"}).code,
            cli::kExitViolated);
}

TEST(CliCheckNod, OtherKindsAndBudgets) {
  for (const char* kind : {"downweight_d", "hypergeometric_delete_d", "over_replacement"}) {
    std::vector<std::string> args{"check-nod", "--scheme", kind, "--n", "4"};
    if (std::string(kind) != "over_replacement") {
      args.push_back("--d");
      args.push_back("2");
    }
    EXPECT_EQ(run_cli(args).code, cli::kExitOk) << kind;
  }
  EXPECT_EQ(run_cli({"check-nod", "--scheme", "gaussian_nod", "--n", "3"}).code, cli::kExitOk);
  const auto dir = run_cli({"check-nod", "--scheme", "bayesian_dirichlet", "--n", "3"});
  EXPECT_EQ(dir.code, cli::kExitError);
  EXPECT_NE(dir.err.find("documented-but-unchecked"), std::string::npos);
  const auto big = run_cli({"check-nod", "--scheme", "multinomial", "--n", "8", "--budget", "50"});
  EXPECT_EQ(big.code, cli::kExitError);
  EXPECT_NE(big.err.find("error:"), std::string::npos);
}

// check-conditions

const std::string kCondBase =
    "[experiment]\nid = cond\nn_grid = 10, 100\nreplications = 20\ndata = uniform01\n";

TEST(CliCheckConditions, TheoremTwoSatisfied) {
  TempDir dir("cli-cond");
  const auto cfg = dir.write(
      "t2.ini", kCondBase +
                    "scaling = theorem23\np = 1\n[scheme]\nkind = multinomial\n[family]\n"
                    "name = abs_loc\n[conditions]\ntheorem = T2\nalpha = 4\nbeta = 4/3\n");
  const auto r = run_cli({"check-conditions", "--config", cfg, "--out", dir.file("o")});
  EXPECT_EQ(r.code, cli::kExitOk) << r.out << r.err;
  EXPECT_EQ(first_line(r.out), "theorem: T2");
  const auto rows = csv::parse(slurp(dir.file("o") + "/conditions.csv"));
  ASSERT_GE(rows.size(), 2u);
  EXPECT_EQ(csv::join_header(rows[0]), "check,value,bound,pass");
}

TEST(CliCheckConditions, TheoremThreeMomentOrderTooLow) {
  TempDir dir("cli-cond3");
  const auto cfg = dir.write(
      "t3.ini", kCondBase +
                    "scaling = theorem23\np = 1.5\n[scheme]\nkind = multinomial\n[family]\n"
                    "name = abs_loc2\n[net]\nrule = rn_schedule\n"
                    "[conditions]\ntheorem = T3\nq = 9\n");
  EXPECT_EQ(run_cli({"check-conditions", "--config", cfg}).code, cli::kExitViolated);
}

TEST(CliCheckConditions, TheoremOneSlowScheduleViolated) {
  TempDir dir("cli-cond1");
  const auto cfg = dir.write(
      "t1.ini", kCondBase +
                    "scaling = theorem1\n[scheme]\nkind = multinomial\nm = log:1\n[family]\n"
                    "name = abs_loc\n[conditions]\ntheorem = T1a\ndelta = 0.5\n");
  const auto r = run_cli({"check-conditions", "--config", cfg});
  EXPECT_EQ(r.code, cli::kExitViolated) << r.out;
  EXPECT_EQ(first_line(r.out), "theorem: T1a");
}

// rate, rosenthal, net

TEST(CliRate, ReproducesTheRunEstimate) {
  TempDir dir("cli-rate");
  const auto cfg = dir.write("small.ini", kSmallRun);
  ASSERT_EQ(run_cli({"run", "--config", cfg, "--out", dir.file("o")}).code, 0);
  const auto r = run_cli({"rate", "--input", dir.file("o") + "/deviations.csv", "--out",
                          dir.file("r")});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_EQ(slurp(dir.file("r") + "/rates.csv"), slurp(dir.file("o") + "/rates.csv"));
  EXPECT_EQ(run_cli({"rate", "--input", dir.file("o") + "/deviations.csv", "--summary", "mean"})
                .code,
            cli::kExitOk);
  EXPECT_EQ(run_cli({"rate", "--input", dir.file("nothing.csv")}).code, cli::kExitError);
  const auto one = dir.write("one.csv", DeviationCurve::csv_header() +
                                            "\nx,multinomial,10,10,1,0,1,0.1,5,0\n");
  EXPECT_EQ(run_cli({"rate", "--input", one}).code, cli::kExitError);
}

TEST(CliRosenthal, WritesRowsAndCalibration) {
  TempDir dir("cli-ros");
  const auto cfg = dir.write(
      "ros.ini", std::string(kSmallRun) +
                     "[rosenthal]\ntheta = 0.5\nq = 4\nn_grid = 16, 32\nreplications = 200\n"
                     "calibration = true\n");
  const auto r = run_cli({"rosenthal", "--config", cfg, "--out", dir.file("o")});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const auto rows = csv::parse(slurp(dir.file("o") + "/rosenthal.csv"));
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(csv::join_header(rows[0]), "label,n,lhs,lhs_se,rhs1,rhs2,ratio,unstable");
  EXPECT_EQ(rows[1][0], "scheme");
  EXPECT_EQ(rows[3][1], "32");
  EXPECT_NE(r.out.find("gaussian calibration"), std::string::npos);
  const auto again = run_cli({"rosenthal", "--config", cfg, "--out", dir.file("p")});
  EXPECT_EQ(slurp(dir.file("o") + "/rosenthal.csv"), slurp(dir.file("p") + "/rosenthal.csv"));
}

TEST(CliNet, BuildsAndExportsNets) {
  TempDir dir("cli-net");
  auto r = run_cli({"net", "--family", "abs_loc2", "--box", "0,1;0,1", "--radius", "0.25", "--out",
                    dir.file("o"), "--fit"});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_NE(r.out.find("covers: yes"), std::string::npos);
  EXPECT_NE(r.out.find("covering fit"), std::string::npos);
  const auto rows = csv::parse(slurp(dir.file("o") + "/net.csv"));
  ASSERT_GE(rows.size(), 2u);
  EXPECT_EQ(csv::join_header(rows[0]), "theta1,theta2,radius");
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_EQ(rows[i].size(), 3u);

  r = run_cli({"net", "--family", "abs_loc", "--n", "100", "--p", "1.5"});
  EXPECT_EQ(r.code, cli::kExitOk) << r.err;
  TempDir cdir("cli-net-cfg");
  const auto cfg = cdir.write("small.ini", kSmallRun);
  r = run_cli({"net", "--config", cfg});
  EXPECT_EQ(r.code, cli::kExitOk);
  EXPECT_EQ(r.out.rfind("centers: ", 0), 0u);
  EXPECT_EQ(run_cli({"net", "--family", "abs_loc", "--radius", "-1"}).code, cli::kExitError);
}

}  // namespace
}  // namespace ulln
