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

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "mrfcftp/coupling.hpp"
#include "mrfcftp/exact_gibbs.hpp"
#include "mrfcftp/randomness.hpp"
#include "mrfcftp/ratio_coupling.hpp"
#include "mrfcftp/variates.hpp"

using namespace mrfcftp;

namespace {

// Member i uniform on {0..k-1} without i.
std::vector<Pmf> leave_one_out_family(int k) {
  std::vector<Pmf> fam;
  const Region r(1, {Vertex{0}});
  for (int i = 0; i < k; ++i) {
    std::map<Config, double> m;
    for (int a = 0; a < k; ++a)
      if (a != i) m[{static_cast<Symbol>(a)}] = 1.0;
    fam.push_back(Pmf::from_masses(r, m));
  }
  return fam;
}

double sum_of_minima(const std::vector<Pmf>& fam, const Region& U) {
  std::map<Config, double> mn;
  std::vector<Pmf> marg;
  for (const auto& p : fam) marg.push_back(marginal(p, U));
  for (const auto& w : marg[0].support) {
    double x = 1.0;
    for (const auto& m : marg) x = std::min(x, m.prob(w));
    mn[w] = x;
  }
  double s = 0.0;
  for (const auto& [w, x] : mn) s += x;
  return s;
}

Config restrict_to(const Config& w, const Region& V, const Region& U) {
  Config out;
  for (const auto& u : U) out.push_back(w[*V.index_of(u)]);
  return out;
}

}  // namespace

TEST(OptimalFamilyCoupling, CoincidenceEqualsSumOfMinimaOnRandomFamilies) {
  RandomField f(2024);
  for (int trial = 0; trial < 50; ++trial) {
    const auto rd = [&](std::uint64_t c) { return f.uniform({Vertex{trial}, 1, 50, c}); };
    const int k = 2 + static_cast<int>(rd(0) * 4);
    const int q = 2 + static_cast<int>(rd(1) * 5);
    const Region V(1, {Vertex{0}});
    std::vector<Pmf> fam;
    for (int i = 0; i < k; ++i) {
      std::map<Config, double> m;
      for (int a = 0; a < q; ++a) {
        const double x = rd(10 + i * q + a);
        if (x > 0.2) m[{static_cast<Symbol>(a)}] = x;
      }
      if (m.empty()) m[{0}] = 1.0;
      fam.push_back(Pmf::from_masses(V, m));
    }
    OptimalFamilyCoupling c(fam, V);
    const double oracle = sum_of_minima(fam, V);
    EXPECT_NEAR(c.gamma(), oracle, 1e-12);
    ExactExplorer ex;
    auto atoms = ex.explore([&](VariateSource& src) { return c.sample_all(Draw{&src, Vertex{0}, 1}); });
    double agree = 0.0;
    std::vector<std::map<Config, double>> law(k);
    for (const auto& a : atoms) {
      bool same = std::all_of(a.outcome.begin(), a.outcome.end(), [&](const Config& w) { return w == a.outcome[0]; });
      if (same) agree += a.weight;
      for (int i = 0; i < k; ++i) law[i][a.outcome[i]] += a.weight;
    }
    EXPECT_NEAR(agree, oracle, 1e-12) << "trial " << trial;
    for (int i = 0; i < k; ++i)
      for (std::size_t j = 0; j < fam[i].size(); ++j)
        EXPECT_NEAR(law[i][fam[i].support[j]], fam[i].probs[j], 1e-12);
  }
}

TEST(OptimalFamilyCoupling, MultiSiteCoincidenceOnSubregion) {
  const Region V(1, {Vertex{0}, Vertex{1}, Vertex{2}});
  const Region U(1, {Vertex{1}});
  RandomField f(5);
  std::vector<Pmf> fam;
  for (int i = 0; i < 3; ++i) {
    std::map<Config, double> m;
    for (Symbol a = 0; a < 2; ++a)
      for (Symbol b = 0; b < 3; ++b)
        for (Symbol c = 0; c < 2; ++c) m[{a, b, c}] = 0.05 + f.uniform({Vertex{i}, 1, 3, a * 6u + b * 2u + c});
    fam.push_back(Pmf::from_masses(V, m));
  }
  OptimalFamilyCoupling c(fam, U);
  const double oracle = sum_of_minima(fam, U);
  ExactExplorer ex;
  auto atoms = ex.explore([&](VariateSource& src) { return c.sample_all(Draw{&src, Vertex{0}, 1}); });
  double agree = 0.0;
  std::vector<std::map<Config, double>> law(3);
  for (const auto& a : atoms) {
    const Config u0 = restrict_to(a.outcome[0], V, U);
    bool same = true;
    for (const auto& w : a.outcome) same = same && restrict_to(w, V, U) == u0;
    if (same) agree += a.weight;
    for (int i = 0; i < 3; ++i) law[i][a.outcome[i]] += a.weight;
  }
  EXPECT_NEAR(agree, oracle, 1e-12);
  for (int i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < fam[i].size(); ++j) EXPECT_NEAR(law[i][fam[i].support[j]], fam[i].probs[j], 1e-12);
}

TEST(OptimalFamilyCoupling, TwoBernoullis) {
  const Region V(1, {Vertex{0}});
  std::vector<Pmf> fam{Pmf::from_masses(V, {{{0}, 0.7}, {{1}, 0.3}}), Pmf::from_masses(V, {{{0}, 0.5}, {{1}, 0.5}})};
  OptimalFamilyCoupling c(fam, V);
  EXPECT_NEAR(c.gamma(), 0.8, 1e-15);
}

TEST(OptimalFamilyCoupling, LeaveOneOutFamilyHasNoCommonMass) {
  auto fam3 = leave_one_out_family(3);
  EXPECT_EQ(OptimalFamilyCoupling(fam3, fam3[0].region).gamma(), 0.0);
  auto fam = leave_one_out_family(4);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i + 1; j < 4; ++j) EXPECT_NEAR(tv_distance(fam[i], fam[j]), 1.0 / 3.0, 1e-15);
  OptimalFamilyCoupling c(fam, fam[0].region);
  EXPECT_EQ(c.gamma(), 0.0);
  ExactExplorer ex;
  auto atoms = ex.explore([&](VariateSource& src) { return c.sample_all(Draw{&src, Vertex{0}, 1}); });
  double worst = 0.0;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i + 1; j < 4; ++j) {
      double dis = 0.0;
      for (const auto& a : atoms) dis += a.outcome[i] != a.outcome[j] ? a.weight : 0.0;
      // Any coupling disagrees at least as often as the total variation.
      EXPECT_GE(dis, 1.0 / 3.0 - 1e-12);
      worst = std::max(worst, dis);
    }
  EXPECT_GE(worst, 0.5);
}

TEST(OptimalCoupling, MarginalsAndCoincidenceAreExact) {
  const Spec spec = ising(0.4, 1);
  const Region V(1, {Vertex{0}, Vertex{1}});
  const Region U(1, {Vertex{0}});
  for (const Region& UU : {U, V}) {
    OptimalCoupling c(spec, V, UU);
    const auto& fam = *c.family();
    EXPECT_NEAR(c.gamma(), gamma(spec, V, UU), 1e-12);
    ExactExplorer ex;
    auto atoms = ex.explore([&](VariateSource& src) {
      Draw d{&src, Vertex{0}, 1};
      std::vector<Config> out;
      for (std::size_t t = 0; t < fam.size(); ++t) out.push_back(c.evaluate(fam.at(t).values, d));
      return out;
    });
    double agree = 0.0;
    std::vector<std::map<Config, double>> law(fam.size());
    for (const auto& a : atoms) {
      bool same = true;
      for (const auto& w : a.outcome) same = same && restrict_to(w, V, UU) == restrict_to(a.outcome[0], V, UU);
      if (same) agree += a.weight;
      for (std::size_t t = 0; t < fam.size(); ++t) law[t][a.outcome[t]] += a.weight;
    }
    EXPECT_NEAR(agree, c.gamma(), 1e-12);
    for (std::size_t t = 0; t < fam.size(); ++t) {
      Pmf p = conditional_dist(spec, V, fam.at(t));
      for (std::size_t j = 0; j < p.size(); ++j) EXPECT_NEAR(law[t][p.support[j]], p.probs[j], 1e-12);
    }
  }
}

TEST(OptimalCoupling, BetaZeroCoincidesEverywhere) {
  OptimalCoupling c(potts(3, 0.0, 2), ball(0, 2), ball(0, 2));
  EXPECT_NEAR(c.gamma(), 1.0, 1e-12);
  RandomField f(1);
  FieldSource src(f);
  for (int n = 1; n < 50; ++n) EXPECT_TRUE(c.universal(Draw{&src, Vertex{0, 0}, static_cast<std::uint32_t>(n)}));
}

TEST(OptimalCoupling, UniversalAndCachedEvaluationAgreeWithDirect) {
  const Spec spec = hardcore(0.5, 2);
  OptimalCoupling c(spec, ball(0, 2), ball(0, 2));
  const auto& fam = *c.family();
  RandomField f(9);
  FieldSource src(f);
  std::vector<std::size_t> all(fam.size());
  for (std::size_t t = 0; t < all.size(); ++t) all[t] = t;
  int universal = 0;
  for (std::uint32_t n = 1; n <= 400; ++n) {
    Draw d{&src, Vertex{3, -1}, n};
    std::vector<Config> cached;
    c.evaluate_members(all, d, cached);
    auto u = c.universal(d);
    universal += u.has_value();
    for (std::size_t t = 0; t < fam.size(); ++t) {
      const Config direct = c.evaluate(fam.at(t).values, d);
      EXPECT_EQ(cached[t], direct);
      if (u) {
        EXPECT_EQ(*u, direct);
      }
    }
    EXPECT_EQ(c.evaluate(fam.at(0).values, d), c.evaluate(fam.at(0).values, d));
  }
  // gamma = 1/(1+lambda) = 2/3 for the free single site.
  EXPECT_NEAR(universal / 400.0, 2.0 / 3.0, 4 * std::sqrt(2.0 / 9.0 / 400.0));
}

TEST(OptimalCoupling, RejectsBadArguments) {
  EXPECT_THROW(OptimalCoupling(ising(0.1, 2), ball(0, 2).translate(Vertex{1, 0}), ball(0, 2).translate(Vertex{1, 0})),
               ContractError);
  EXPECT_THROW(OptimalCoupling(ising(0.1, 2), ball(0, 2), ball(1, 2)), ContractError);
  EXPECT_THROW(OptimalCoupling(ising(0.1, 2), ball(1, 2), ball(1, 2), ExhaustionLimits{1 << 10, 1 << 24}), CapacityError);
  EXPECT_THROW(OptimalCoupling(ising(0.1, 2), ball(1, 2), ball(1, 2), {}, 1 << 12), CapacityError);
}

TEST(RatioCoupling, ExactMarginalsAndContainment) {
  const Spec spec = ising(0.4, 1);
  const Region V = ball(3, 1);
  const Region U(1, {Vertex{0}});
  const Region dV = boundary(V);
  const Config tau{0, 0}, tau2{0, 1};
  RatioCoupling c(spec, V, U, tau, tau2);
  EXPECT_EQ(c.r_star(), 2);
  EXPECT_EQ(c.shell(), Region(1, {Vertex{-2}, Vertex{2}}));
  EXPECT_EQ(c.inside().size(), 3u);
  ExactExplorer ex;
  auto atoms = ex.explore([&](VariateSource& src) { return c.sample(Draw{&src, Vertex{0}, 1}); });
  std::map<Config, double> lw, ls;
  double dis_U = 0.0;
  for (const auto& a : atoms) {
    lw[a.outcome.omega] += a.weight;
    ls[a.outcome.sigma] += a.weight;
    if (a.outcome.agree_B) {
      EXPECT_TRUE(a.outcome.agree_W);
      EXPECT_TRUE(a.outcome.agree_U);
    }
    if (!a.outcome.agree_U) dis_U += a.weight;
  }
  const Pmf p = conditional_dist(spec, V, BoundaryCondition(dV, tau));
  const Pmf q = conditional_dist(spec, V, BoundaryCondition(dV, tau2));
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(lw[p.support[i]], p.probs[i], 1e-12);
  for (std::size_t i = 0; i < q.size(); ++i) EXPECT_NEAR(ls[q.support[i]], q.probs[i], 1e-12);
  const double tv = tv_distance(marginal(p, U), marginal(q, U));
  EXPECT_NEAR(tv_distance(c.marginal_U(false), c.marginal_U(true)), tv, 1e-12);
  EXPECT_GE(dis_U, tv - 1e-12);
}

TEST(RatioCoupling, IdenticalBoundariesGiveIdenticalSamples) {
  const Spec spec = potts(3, 0.3, 2);
  const Region V = ball(1, 2);
  const Config tau(boundary(V).size(), 2);
  RatioCoupling c(spec, V, Region(2, {Vertex{0, 0}}), tau, tau);
  RandomField f(3);
  FieldSource src(f);
  for (std::uint32_t n = 1; n <= 200; ++n) {
    auto s = c.sample(Draw{&src, Vertex{0, 0}, n});
    EXPECT_EQ(s.omega, s.sigma);
  }
}

TEST(RatioCoupling, BetaZeroAlwaysAgreesOnU) {
  const Spec spec = potts(2, 0.0, 2);
  const Region V = ball(2, 2);
  const Region dV = boundary(V);
  Config tau(dV.size(), 0), tau2 = tau;
  tau2[*dV.index_of(Vertex{3, 2})] = 1;
  RatioCoupling c(spec, V, Region(2, {Vertex{0, 0}}), tau, tau2);
  EXPECT_NEAR(c.stage1_gamma(), 1.0, 1e-12);
  RandomField f(4);
  FieldSource src(f);
  for (std::uint32_t n = 1; n <= 200; ++n) EXPECT_TRUE(c.sample(Draw{&src, Vertex{0, 0}, n}).agree_U);
}

TEST(RatioCoupling, RejectsCloseDisagreement) {
  const Spec spec = ising(0.1, 1);
  const Region V = ball(0, 1);
  EXPECT_THROW(RatioCoupling(spec, V, Region(1, {Vertex{0}}), Config{0, 0}, Config{0, 1}), ParameterError);
}
