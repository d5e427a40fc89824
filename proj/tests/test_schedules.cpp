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
#include <random>

#include "mrfcftp/exact_gibbs.hpp"
#include "mrfcftp/schedules.hpp"

using namespace mrfcftp;

TEST(Rational, Parse) {
  EXPECT_EQ(Rational::parse("0.25").str(), "1/4");
  EXPECT_EQ(Rational::parse("3/12").str(), "1/4");
  EXPECT_EQ(Rational::parse("2").str(), "2/1");
  EXPECT_EQ(Rational::parse("0.125").floor_times(17), 2);
  EXPECT_THROW(Rational::parse("abc"), ParameterError);
  EXPECT_THROW(Rational::parse("-1/4"), ParameterError);
  EXPECT_THROW(Rational::parse("1/0"), ParameterError);
}

TEST(FixedSchedule, SingleSiteAndBoxBlocks) {
  const Spec spec = ising(0.05, 2);
  const auto single = fixed_plan(spec, origin_region(2), CouplingKind::optimal_on_U);
  EXPECT_EQ(single.radius, 1);
  EXPECT_EQ(single.schedule->at(1).p, 0.5);
  const auto box = fixed_plan(spec, ball(1, 2), CouplingKind::optimal_on_U);
  EXPECT_EQ(box.radius, 5);
  for (std::uint32_t n : {1u, 7u, 1000u}) {
    EXPECT_EQ(box.schedule->at(n).p, 0.5);
    EXPECT_EQ(box.schedule->radius(n), 5);
  }
  EXPECT_THROW(box.schedule->at(0), ContractError);
}

TEST(FixedSchedule, OtherCouplingKinds) {
  const auto c = fixed_plan(ising(0.1, 2), ball(4, 2), CouplingKind::contracting_2d);
  EXPECT_EQ(c.radius, 17);
  EXPECT_NE(c.coupling->id().find("contracting"), std::string::npos);
  EXPECT_THROW(fixed_plan(ising(0.1, 2), l1_ball(4, 2), CouplingKind::contracting_2d), ParameterError);
  const auto s = fixed_plan(hardcore(0.5, 2), ball(2, 2), CouplingKind::sequential);
  EXPECT_EQ(s.radius, 9);
  EXPECT_THROW(fixed_plan(ising(0.1, 2), ball(1, 2), CouplingKind::product), ParameterError);
  EXPECT_NO_THROW(fixed_plan(potts(3, 0.0, 2), ball(3, 2), CouplingKind::product));
  EXPECT_EQ(coupling_kind_from("optimal"), CouplingKind::optimal_on_U);
  EXPECT_THROW(coupling_kind_from("glauber"), ParameterError);
}

TEST(ProductCoupling, IgnoresBoundaryAndFollowsVertexWeights) {
  const Spec spec = potts(3, 0.0, 1);
  ProductCoupling c(spec, ball(2, 1));
  RandomField f(1);
  FieldSource src(f);
  std::vector<int> counts(3, 0);
  for (std::uint32_t n = 1; n <= 3000; ++n) {
    const Draw d{&src, Vertex{0}, n};
    const Config a = c.evaluate(Config{0, 0}, d);
    EXPECT_EQ(a, c.evaluate(Config{2, 1}, d));
    ++counts[a[2]];
  }
  for (int x : counts) EXPECT_NEAR(x / 3000.0, 1.0 / 3.0, 4 * std::sqrt(2.0 / 9.0 / 3000.0));
}

TEST(GrowingSchedule, RecursionArithmetic) {
  GrowingOptions o;
  o.delta = Rational{1, 4};
  o.ell1 = 4;
  o.n_max = 2;
  o.max_block_sites = 1;
  const auto plan = growing_schedule(potts(2, 0.0, 2), o);
  ASSERT_EQ(plan.stages.size(), 2u);
  EXPECT_EQ(plan.stages[1].ell, 129);  // must exceed 4 * 2 * 4 / 0.25 = 128
  EXPECT_TRUE(plan.recursion_holds());
  EXPECT_DOUBLE_EQ(plan.stages[0].p, 1.0 / 16.0);
  EXPECT_EQ(plan.stages[0].radius, 17);
}

TEST(GrowingSchedule, MinimalSequencesSatisfyTheRecursion) {
  std::mt19937 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    GrowingOptions o;
    const std::int64_t den = 4 + rng() % 40;
    o.delta = Rational{1 + static_cast<std::int64_t>(rng() % ((den - 1) / 3)), den};
    if (!(o.delta.value() < 1.0 / 3.0)) continue;
    o.ell1 = 2 + rng() % 20;
    o.n_max = 4;
    o.max_block_sites = 1;
    const int d = 1 + trial % 3;
    const auto plan = growing_schedule(potts(2, 0.0, d), o);
    ASSERT_EQ(plan.stages.size(), 4u);
    EXPECT_TRUE(plan.recursion_holds());
    std::int64_t sum = 0;
    for (std::size_t i = 0; i + 1 < plan.stages.size(); ++i) {
      sum += plan.stages[i].ell;
      const std::int64_t prev = plan.stages[i + 1].ell - 1;
      EXPECT_FALSE(o.delta.num * prev > 4 * d * sum * o.delta.den) << "l_" << i + 2 << " is not minimal";
    }
  }
}

TEST(GrowingSchedule, RejectsBadParameters) {
  GrowingOptions o;
  o.delta = Rational{1, 3};
  EXPECT_THROW(growing_schedule(ising(0.1, 2), o), ParameterError);
  o.delta = Rational{1, 4};
  o.epsilon = 0.5;
  EXPECT_THROW(growing_schedule(ising(0.1, 2), o), ParameterError);
  o.epsilon = 0.1;
  o.n_max = 5;
  EXPECT_THROW(growing_schedule(ising(0.1, 2), o), ParameterError);
  o.n_max = 1;
  o.ell1 = 1;
  EXPECT_THROW(growing_schedule(ising(0.1, 2), o), ParameterError);  // p = 1
}

TEST(GrowingSchedule, BetaZeroIsCertifiedEverywhere) {
  GrowingOptions o;
  o.n_max = 3;
  o.max_block_sites = 1u << 15;
  const auto plan = growing_schedule(potts(3, 0.0, 2), o);
  ASSERT_EQ(plan.stages.size(), 3u);
  for (const auto& s : plan.stages) {
    EXPECT_EQ(s.gamma, 1.0);
    EXPECT_TRUE(s.certified);
    EXPECT_EQ(s.certification, "independent");
  }
  EXPECT_TRUE(plan.stages[1].coupling);
  EXPECT_FALSE(plan.stages[2].coupling);  // l_3 = 2145 is beyond the site budget
  EXPECT_FALSE(plan.truncated);
}

TEST(GrowingSchedule, ExactGammaMatchesEnumeration) {
  {
    GrowingOptions o;
    o.n_max = 1;
    o.ell1 = 2;
    const Spec spec = ising(0.2, 1);
    const auto plan = growing_schedule(spec, o);
    ASSERT_EQ(plan.stages[0].certification, "exact");
    EXPECT_NEAR(plan.stages[0].gamma, gamma(spec, ball(2, 1), ball(1, 1)), 1e-12);
  }
  {
    GrowingOptions o;
    o.n_max = 1;
    o.ell1 = 3;
    o.delta = Rational{1, 4};
    const Spec spec = hardcore(0.3, 2);
    o.budget.limits = ExhaustionLimits{std::uint64_t{1} << 24, std::uint64_t{1} << 24};
    o.budget.exact_cells = std::uint64_t{1} << 24;
    o.ell1 = 1;
    o.delta = Rational{3, 10};
    o.p_override = {0.5};
    const auto plan = growing_schedule(spec, o);
    ASSERT_EQ(plan.stages[0].certification, "exact");
    EXPECT_EQ(plan.stages[0].inner, 0);
    EXPECT_NEAR(plan.stages[0].gamma, gamma(spec, ball(1, 2), origin_region(2)), 1e-12);
  }
}

TEST(GrowingSchedule, MonteCarloCertificationTracksGamma) {
  GrowingOptions o;
  o.n_max = 1;
  o.ell1 = 2;
  o.budget.exact_cells = 0;
  o.budget.mc_draws = 4000;
  const Spec spec = ising(0.2, 1);
  const auto plan = growing_schedule(spec, o);
  const auto& s = plan.stages[0];
  ASSERT_EQ(s.certification, "monte_carlo");
  ASSERT_EQ(s.coupling_kind, "optimal_on_U");
  const double g = gamma(spec, ball(2, 1), ball(1, 1));
  EXPECT_NEAR(s.gamma, g, 4 * binomial_se(g, 4000));
  EXPECT_LT(s.gamma_lower, s.gamma);
}

TEST(GrowingSchedule, FailedCertificationTruncates) {
  GrowingOptions o;
  o.n_max = 3;
  o.ell1 = 2;
  o.epsilon = 0.3;
  const auto plan = growing_schedule(ising(2.0, 1), o);
  EXPECT_TRUE(plan.truncated);
  ASSERT_EQ(plan.stages.size(), 1u);
  EXPECT_FALSE(plan.stages[0].certified);
  EXPECT_NE(plan.diagnostic.find("stage 1"), std::string::npos);
}

TEST(GrowingSchedule, SerializesToConfig) {
  GrowingOptions o;
  o.n_max = 2;
  o.max_block_sites = 1;
  const auto plan = growing_schedule(potts(2, 0.0, 2), o);
  const auto cfg = KeyValueConfig::parse(plan.to_config());
  EXPECT_EQ(cfg.get("schedule", "ell"), "2, 65");
  EXPECT_EQ(cfg.get("schedule", "delta"), "1/4");
  EXPECT_EQ(plan.to_json()["stages"].size(), 2u);
}

TEST(StageSuccess, BoundFormulaForTheAcceptanceSetting) {
  GrowingOptions o;
  o.n_max = 1;
  o.ell1 = 2;
  const auto plan = growing_schedule(potts(2, 0.0, 2), o);
  const StageBound b = stage_success_bound(plan, 0);
  EXPECT_EQ(b.gamma, 1.0);
  EXPECT_DOUBLE_EQ(b.one_active, 0.25);
  EXPECT_NEAR(std::log(b.none_around), 360 * std::log(0.75), 1e-9);
  const auto sim = simulate_stage_success(plan, 0, 20000, 3);
  EXPECT_TRUE(sim.pass());
  EXPECT_EQ(sim.undetermined, 0u);
}

TEST(StageSuccess, FrequencyAtLeastTheBound) {
  // d = 1 with a larger p so that F_1 is frequent.
  GrowingOptions o;
  o.n_max = 1;
  o.ell1 = 8;
  o.p_override = {1.0 / 35.0};
  for (const Spec& spec : {potts(2, 0.0, 1), ising(0.1, 1)}) {
    o.budget.exact_cells = std::uint64_t{1} << 24;
    const auto plan = growing_schedule(spec, o);
    const auto sim = simulate_stage_success(plan, 0, 20000, 5);
    EXPECT_GT(sim.bound.value(), 0.01) << spec.describe();
    EXPECT_GE(sim.frequency(), sim.bound.value() - 3 * sim.se()) << spec.describe();
    EXPECT_EQ(sim.undetermined, 0u);
  }
}

TEST(StageSuccess, TIsAtMostTPrimePathwise) {
  const Spec spec = ising(0.05, 1);
  GrowingOptions o;
  o.n_max = 2;
  o.ell1 = 8;
  o.p_override = {1.0 / 35.0, 1.0 / 519.0};
  const auto plan = growing_schedule(spec, o);
  ASSERT_EQ(plan.stages.size(), 2u) << plan.diagnostic;
  const auto sched = plan.schedule();
  int fired = 0;
  for (std::uint64_t seed = 0; seed < 1500; ++seed) {
    const RandomField f(seed);
    const auto tp = t_prime(plan, *sched, f, Vertex{0});
    ASSERT_FALSE(tp.undetermined);
    if (!tp.n) continue;
    ++fired;
    const auto res = cftp_value(spec, *sched, f, Vertex{0}, *tp.n);
    EXPECT_TRUE(res.coalesced) << "seed " << seed;
    EXPECT_LE(res.T, *tp.n) << "seed " << seed;
  }
  EXPECT_GT(fired, 20);
}
