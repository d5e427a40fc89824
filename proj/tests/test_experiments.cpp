// Copyright 2026 The mrfcftp Authors - All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "mrfcftp/experiments.hpp"

namespace mrfcftp {
namespace {

ExperimentConfig make(const std::string& text) { return ExperimentConfig::from(KeyValueConfig::parse(text)); }

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

const char* kIsingTorus = R"(
[model]
name = ising
beta = 0.15
dimension = 2
[substrate]
kind = torus:3x3
[schedule]
p = 0.1111111111
[run]
seed = 11
replicas = 300
)";

TEST(ExperimentConfig, DefaultsAndSections) {
  const auto c = make("[model]\nname = hardcore\nlambda = 0.2\n");
  EXPECT_EQ(c.spec.dim(), 2);
  EXPECT_FALSE(c.substrate.torus);
  EXPECT_EQ(c.schedule.kind, "fixed");
  EXPECT_EQ(c.schedule.block.size(), 1u);
  EXPECT_DOUBLE_EQ(c.schedule.p, 0.5);
  EXPECT_DOUBLE_EQ(c.conditions.p_c, 0.592746);
  EXPECT_DOUBLE_EQ(c.stats.tv_threshold, 0.02);
  const auto t = make(kIsingTorus);
  ASSERT_TRUE(t.substrate.torus);
  EXPECT_EQ(t.substrate.torus->size(), 9u);
  EXPECT_EQ(t.substrate.str(), "torus:3x3");
  EXPECT_EQ(parse_block("box:2", 2).size(), 25u);
  EXPECT_EQ(parse_block("l1:1", 2).size(), 5u);
}

TEST(ExperimentConfig, RejectsBadInput) {
  const std::string m = "[model]\nname = ising\nbeta = 0.1\n";
  EXPECT_THROW(make(m + "[run]\nreplicas = 0\n"), ParameterError);
  EXPECT_THROW(make(m + "[run]\nbogus = 1\n"), ParameterError);
  EXPECT_THROW(make(m + "[nowhere]\nx = 1\n"), ParameterError);
  EXPECT_THROW(make(m + "[substrate]\nkind = torus:3\n"), ParameterError);
  EXPECT_THROW(make(m + "[substrate]\nkind = sphere\n"), ParameterError);
  EXPECT_THROW(make(m + "[schedule]\np = 1.5\n"), ParameterError);
  EXPECT_THROW(make(m + "[schedule]\nblock = hex:2\n"), ParameterError);
  EXPECT_THROW(make(m + "[schedule]\nkind = growing\ndelta = 1/2\n"), ParameterError);
  EXPECT_THROW(make(m + "[schedule]\nkind = growing\nn_max = 9\n"), ParameterError);
  EXPECT_THROW(make(m + "[diag]\nkind = other\n"), ParameterError);
  EXPECT_THROW(make(m + "[statistics]\nalpha = 0\n"), ParameterError);
  EXPECT_THROW(make("[model]\nname = nothing\n"), std::exception);
}

TEST(ExperimentConfig, OverridesChangeTheHash) {
  KeyValueConfig cfg = KeyValueConfig::parse(kIsingTorus);
  const auto h0 = ExperimentConfig::from(cfg).hash();
  Overrides ov;
  ov.seed = 99;
  ov.substrate = "window";
  ov.apply(cfg);
  const auto c = ExperimentConfig::from(cfg);
  EXPECT_EQ(c.run.seed, 99u);
  EXPECT_FALSE(c.substrate.torus);
  EXPECT_NE(c.hash(), h0);
  const auto p = c.provenance();
  EXPECT_EQ(p["seed"], 99u);
  EXPECT_EQ(p["version"], version());
  EXPECT_EQ(p["config_hash"].get<std::string>().size(), 16u);
}

TEST(ParallelFor, CoversEveryIndexOnceAndPropagatesErrors) {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), 4, [&](std::uint64_t i) { ++hits[i]; });
  for (int h : hits) EXPECT_EQ(h, 1);
  EXPECT_THROW(parallel_for(100, 3, [](std::uint64_t i) { if (i == 57) throw ParameterError("x"); }),
               ParameterError);
}

TEST(Conditions, ExampleVerdicts) {
  const auto hc = cmd_conditions(make("[model]\nname = hardcore\nlambda = 0.2\n")).summary;
  EXPECT_TRUE(hc["high_noise"]["pass"].get<bool>());
  EXPECT_TRUE(hc["dobrushin"]["pass"].get<bool>());
  const auto pt = cmd_conditions(make("[model]\nname = potts\nq = 3\nbeta = 0\n")).summary;
  EXPECT_TRUE(pt["high_noise"]["pass"].get<bool>());
  EXPECT_TRUE(pt["dobrushin"]["pass"].get<bool>());
  EXPECT_TRUE(pt["disagreement_percolation"]["pass"].get<bool>());
  EXPECT_DOUBLE_EQ(pt["gamma_site"].get<double>(), 1.0);
  const auto col = cmd_conditions(make("[model]\nname = coloring\nq = 3\n")).summary;
  EXPECT_FALSE(col["high_noise"]["pass"].get<bool>());
  EXPECT_TRUE(col["mixing"].contains("error"));
  EXPECT_TRUE(col["mixing"].contains("suggestion"));
}

TEST(Sample, TorusRunIsReproducibleAndRecordsProvenance) {
  const std::string a = ::testing::TempDir() + "mrf_a.jsonl", b = ::testing::TempDir() + "mrf_b.jsonl";
  auto c1 = make(kIsingTorus);
  c1.run.out = a;
  auto c2 = make(kIsingTorus);
  c2.run.out = b;
  c2.run.threads = 3;
  const auto r1 = cmd_sample(c1), r2 = cmd_sample(c2);
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_EQ(r1.summary["tv"], r2.summary["tv"]);
  EXPECT_EQ(r1.summary["states"], 512u);
  EXPECT_GT(r1.summary["chi_square"]["p_value"].get<double>(), 1e-3);
  std::ifstream f(a);
  std::string line;
  std::getline(f, line);
  const auto head = nlohmann::json::parse(line);
  EXPECT_EQ(head["type"], "header");
  EXPECT_EQ(head["seed"], 11u);
  EXPECT_EQ(head["config_hash"], c1.provenance()["config_hash"]);
  std::size_t n = 0;
  while (std::getline(f, line)) ++n;
  EXPECT_EQ(n, 300u);
  std::remove(a.c_str());
  std::remove(b.c_str());
}

TEST(Sample, CensoredDrawsAreExcluded) {
  auto c = make(kIsingTorus);
  c.run.horizon_cap = 4;
  const auto r = cmd_sample(c);
  const auto censored = r.summary["censored"].get<std::uint64_t>();
  EXPECT_GT(censored, 0u);
  if (censored == 300u) {
    EXPECT_FALSE(r.ok);
  }
}

TEST(Sample, WindowBoundaryIndependentUniformity) {
  const auto r = cmd_sample(make("[model]\nname = potts\nq = 3\nbeta = 0\n[run]\nreplicas = 3000\nseed = 5\n"));
  EXPECT_TRUE(r.ok);
  EXPECT_EQ(r.summary["frequencies"].size(), 3u);
  EXPECT_EQ(r.summary["censored"], 0u);
}

TEST(Tails, CsvCarriesProvenanceAndSlopeMatchesGeometricLaw) {
  const std::string path = ::testing::TempDir() + "mrf_tails.csv";
  auto c = make("[model]\nname = potts\nq = 2\nbeta = 0\n[schedule]\np = 0.5\n[run]\nreplicas = 3000\nseed = 9\n");
  c.run.out = path;
  const auto r = cmd_tails(c);
  const std::string csv = slurp(path);
  EXPECT_EQ(csv.rfind("# config_hash=" + c.provenance()["config_hash"].get<std::string>(), 0), 0u);
  const double slope = r.summary["table"]["geometric_slope"].get<double>();
  const double se = r.summary["table"]["geometric_slope_se"].get<double>();
  EXPECT_NEAR(slope, std::log(1.0 - 1.0 / 512.0), 4.0 * se);
  std::remove(path.c_str());
}

TEST(Tails, GrowingModeRespectsTPrime) {
  const auto r = cmd_tails(make(
      "[model]\nname = ising\nbeta = 0.05\ndimension = 1\n[schedule]\nkind = growing\nell1 = 8\nn_max = 2\n"
      "p_override = 0.0285714, 0.0019268\n[run]\nreplicas = 200\nseed = 3\n"));
  EXPECT_EQ(r.summary["time"], "T_prime");
  EXPECT_EQ(r.summary["order_violations"], 0u);
  EXPECT_TRUE(r.ok);
}

TEST(CouplingDiag, RemarkFamilyAndRatio) {
  const auto rem = cmd_coupling_diag(make("[model]\nname = potts\nq = 2\nbeta = 0\n[diag]\nkind = remark\n"));
  EXPECT_TRUE(rem.ok);
  const auto fam = cmd_coupling_diag(make("[model]\nname = potts\nq = 2\nbeta = 0\n[diag]\nkind = family\n"));
  EXPECT_TRUE(fam.ok);
  EXPECT_LE(fam.summary["max_abs_error"].get<double>(), 1e-12);
  const auto rat = cmd_coupling_diag(make(
      "[model]\nname = ising\nbeta = 0.1\n[diag]\nkind = ratio\nratio_outer = 2\ndraws = 2000\n"));
  EXPECT_EQ(rat.summary["containment_violations"], 0u);
  EXPECT_TRUE(rat.ok);
}

TEST(CouplingDiag, BlockReportsGammaAndContraction) {
  const auto r = cmd_coupling_diag(make(
      "[model]\nname = ising\nbeta = 0.05\ndimension = 1\n[schedule]\nblock = box:1\ncoupling = optimal_on_U\n"
      "coupled = box:1\n[diag]\nkind = block\nmax_size = 2\nrandom_larger = 5\n"));
  EXPECT_TRUE(r.summary.contains("gamma"));
  EXPECT_TRUE(r.summary.contains("contraction"));
  ASSERT_TRUE(r.summary.contains("coincidence"));
  EXPECT_NEAR(r.summary["coincidence"]["value"].get<double>(), r.summary["gamma"].get<double>(), 1e-12);
}

TEST(ScheduleBuild, GrowingPlanRoundTripsAsConfig) {
  const std::string path = ::testing::TempDir() + "mrf_plan.cfg";
  auto c = make("[model]\nname = potts\nq = 2\nbeta = 0\n[schedule]\nkind = growing\nn_max = 1\n[run]\nreplicas = 400\n");
  c.run.out = path;
  const auto r = cmd_schedule_build(c);
  EXPECT_TRUE(r.ok);
  EXPECT_TRUE(r.summary["plan"]["recursion_holds"].get<bool>());
  const auto back = KeyValueConfig::parse(slurp(path));
  EXPECT_EQ(back.get("schedule", "kind"), "growing");
  EXPECT_EQ(back.get("schedule", "delta"), "1/4");
  EXPECT_EQ(r.summary["stage_success"].size(), 1u);
  std::remove(path.c_str());
  const auto f = cmd_schedule_build(make("[model]\nname = hardcore\nlambda = 0.2\n[schedule]\nblock = box:1\n"));
  EXPECT_EQ(f.summary["plan"]["radius"], 5);
}

}  // namespace
}  // namespace mrfcftp
