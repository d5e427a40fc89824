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
#include <numeric>
#include <random>

#include "mrfcftp/exact_gibbs.hpp"
#include "mrfcftp/model.hpp"
#include "mrfcftp/model_config.hpp"

using namespace mrfcftp;

namespace {

std::vector<Spec> builtins(int d) {
  return {potts(3, 0.4, d),   ising(-0.3, d),           coloring(4, d),
          hardcore(0.7, d),   widom_rowlinson(2, 1.3, d), beach(0.5, d)};
}

}  // namespace

TEST(MakeModel, ParameterValidation) {
  EXPECT_THROW(potts(1, 0.0, 2), ParameterError);
  EXPECT_THROW(coloring(2, 2), ParameterError);
  EXPECT_THROW(hardcore(0.0, 2), ParameterError);
  EXPECT_THROW(beach(-1.0, 2), ParameterError);
  EXPECT_THROW(make_model("potts", {}, 2), ParameterError);
  EXPECT_THROW(make_model("nonsense", {{"beta", 1}}, 2), ParameterError);
  try {
    hardcore(-2.0, 2);
    FAIL();
  } catch (const ParameterError& e) {
    EXPECT_NE(std::string(e.what()).find("lambda"), std::string::npos);
  }
  EXPECT_EQ(make_model("potts", {{"q", 3}, {"beta", 0.2}}, 2).q(), 3);
  EXPECT_EQ(make_model("ising", {{"beta", 0.2}}, 2).q(), 2);
}

TEST(Model, PottsBetaZeroUniform) {
  Spec s = potts(2, 0.0, 2);
  const Region v = origin_region(2);
  const Region dv = boundary(v);
  for (int t = 0; t < 16; ++t) {
    Config tau(4);
    for (int k = 0; k < 4; ++k) tau[k] = (t >> k) & 1;
    Pmf p = conditional_dist(s, v, Assignment(dv, tau));
    ASSERT_EQ(p.size(), 2u);
    EXPECT_NEAR(p.probs[0], 0.5, 1e-15);
  }
  EXPECT_TRUE(s.boundary_independent());
  EXPECT_FALSE(potts(2, 0.1, 2).boundary_independent());
}

TEST(Model, HardcoreFreeSite) {
  const double lam = 0.37;
  Spec s = hardcore(lam, 2);
  const Region v = origin_region(2);
  Pmf p = conditional_dist(s, v, constant_assignment(boundary(v), 0));
  EXPECT_NEAR(p.prob({1}), lam / (1 + lam), 1e-15);
}

TEST(Model, BeachMinimumSingleSiteProbability) {
  for (double lam : {0.3, 1.0, 2.5}) {
    Spec s = beach(lam, 2);
    const Region v = origin_region(2);
    auto fam = boundary_family(s, v);
    double mn = 1.0;
    for (std::size_t t = 0; t < fam.size(); ++t) {
      Pmf p = conditional_dist(s, v, fam.at(t));
      for (double x : p.probs) mn = std::min(mn, x);
    }
    EXPECT_NEAR(mn, std::min(1.0, lam) / (2.0 + lam), 1e-14) << lam;
  }
}

TEST(FeasiblePairs, Builtins) {
  EXPECT_EQ(coloring(3, 2).feasible_pairs().size(), 3u);
  for (auto [a, b] : coloring(3, 2).feasible_pairs()) EXPECT_NE(a, b);
  auto hc = hardcore(1.0, 2).feasible_pairs();
  ASSERT_EQ(hc.size(), 2u);
  EXPECT_EQ(hc[0], (std::pair<Symbol, Symbol>{0, 0}));
  EXPECT_EQ(hc[1], (std::pair<Symbol, Symbol>{0, 1}));
  Spec b = beach(1.0, 2);
  const int vals[4] = {-2, -1, 1, 2};
  std::size_t expect = 0;
  for (int a = 0; a < 4; ++a)
    for (int c = a; c < 4; ++c) expect += vals[a] * vals[c] >= -1;
  EXPECT_EQ(b.feasible_pairs().size(), expect);
  for (auto [x, y] : b.feasible_pairs()) EXPECT_GE(vals[x] * vals[y], -1);
}

TEST(Weight, Examples) {
  const double beta = 0.3;
  Spec s = ising(beta, 2);
  const Region v = origin_region(2);
  EXPECT_NEAR(weight(s, v, constant_assignment(boundary(v), 0), {0}), std::exp(4 * beta), 1e-13);
  Spec hc = hardcore(2.0, 2);
  Config tau{0, 1, 0, 0};
  EXPECT_EQ(weight(hc, v, Assignment(boundary(v), tau), {1}), 0.0);
  Spec col = coloring(3, 2);
  EXPECT_EQ(weight(col, v, Assignment(boundary(v), {0, 1, 0, 1}), {2}), 1.0);
}

TEST(Weight, TranslationInvariant) {
  std::mt19937_64 rng(5);
  for (const Spec& s : builtins(2)) {
    Region V = ball(1, 2);
    Region dV = boundary(V);
    std::uniform_int_distribution<int> sym(0, s.q() - 1);
    for (int trial = 0; trial < 20; ++trial) {
      Config tau(dV.size()), w(V.size());
      for (auto& x : tau) x = sym(rng);
      for (auto& x : w) x = sym(rng);
      Vertex u{3, -2};
      double a = weight(s, V, Assignment(dV, tau), w);
      double b = weight(s, V.translate(u), Assignment(dV.translate(u), tau), w);
      EXPECT_DOUBLE_EQ(a, b);
    }
  }
}

TEST(Weight, PottsSpinFlipSymmetry) {
  std::mt19937_64 rng(9);
  Spec s = potts(3, 0.8, 2);
  Region V = ball(1, 2);
  Region dV = boundary(V);
  std::vector<Symbol> perm{2, 0, 1};
  std::uniform_int_distribution<int> sym(0, 2);
  for (int trial = 0; trial < 50; ++trial) {
    Config tau(dV.size()), w(V.size());
    for (auto& x : tau) x = sym(rng);
    for (auto& x : w) x = sym(rng);
    Config tp(tau), wp(w);
    for (auto& x : tp) x = perm[x];
    for (auto& x : wp) x = perm[x];
    EXPECT_NEAR(weight(s, V, Assignment(dV, tau), w), weight(s, V, Assignment(dV, tp), wp), 1e-12);
  }
}

TEST(Weight, PottsBetaZeroConstantOverFeasible) {
  Spec s = potts(3, 0.0, 2);
  Region V = ball(1, 2);
  Region dV = boundary(V);
  Config tau(dV.size(), 1);
  for (const auto& w : enumerate_feasible(s, V, Assignment(dV, tau)))
    EXPECT_EQ(weight(s, V, Assignment(dV, tau), w), 1.0);
}

TEST(Model, EverySymbolFeasibleAtCenterSomewhere) {
  for (const Spec& s : builtins(2)) {
    auto fam = boundary_family(s, origin_region(2));
    SymbolSet seen = 0;
    for (std::size_t t = 0; t < fam.size(); ++t)
      for (const auto& w : enumerate_feasible(s, origin_region(2), fam.at(t))) seen |= singleton(w[0]);
    EXPECT_EQ(seen, s.full_set()) << s.describe();
  }
}

TEST(Model, SpecValidation) {
  EXPECT_THROW(Spec("x", 2, {"a", "b"}, {1.0, 1.0}, {1.0, 2.0, 1.0, 1.0}), ParameterError);
  EXPECT_THROW(Spec("x", 2, {"a", "b"}, {1.0, 1.0}, {1.0, 0.0, 0.0, 0.0}), ParameterError);
  EXPECT_THROW(Spec("x", 2, {"a", "b"}, {0.0, 1.0}, {1.0, 1.0, 1.0, 1.0}), ParameterError);
  EXPECT_THROW(Spec("x", 2, {"a"}, {1.0}, {1.0}), ParameterError);
}

TEST(ModelConfig, CustomModel) {
  KeyValueConfig cfg = KeyValueConfig::parse(
      "[model]\nname = custom\ndimension = 2\nalphabet = a,b,c\nvertex_weights = 1,2,1\n"
      "edge_default = 1\n[edges]\na,b = 0.5\nc,c = forbid\n");
  Spec s = spec_from_config(cfg);
  EXPECT_EQ(s.q(), 3);
  EXPECT_EQ(s.vertex_weight(1), 2.0);
  EXPECT_EQ(s.edge_weight(0, 1), 0.5);
  EXPECT_EQ(s.edge_weight(1, 0), 0.5);
  EXPECT_FALSE(s.allowed(2, 2));
  EXPECT_TRUE(s.allowed(2, 0));
}

TEST(ModelConfig, BuiltinByName) {
  KeyValueConfig cfg = KeyValueConfig::parse("[model]\nname = hardcore\nlambda = 0.2\ndimension = 3\n");
  Spec s = spec_from_config(cfg);
  EXPECT_EQ(s.name(), "hardcore");
  EXPECT_EQ(s.dim(), 3);
  EXPECT_DOUBLE_EQ(s.vertex_weight(1), 0.2);
}
