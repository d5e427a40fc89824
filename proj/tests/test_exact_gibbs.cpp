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
#include "mrfcftp/mixing.hpp"

using namespace mrfcftp;

namespace {

Pmf raw_pmf(const Region& r, std::vector<std::pair<Config, double>> items) {
  std::map<Config, double> m;
  for (auto& [w, x] : items) m[w] += x;
  return Pmf::from_masses(r, m);
}

// Independent sets of a graph given by adjacency on n vertices.
int count_independent_sets(int n, const std::vector<std::pair<int, int>>& edges) {
  int c = 0;
  for (int mask = 0; mask < (1 << n); ++mask) {
    bool ok = true;
    for (auto [a, b] : edges) ok = ok && !((mask >> a & 1) && (mask >> b & 1));
    c += ok;
  }
  return c;
}

// P(sigma_0 = +) on the path {-n..n} with both ends pinned to `end`, by
// 2x2 transfer matrices.
double path_plus_prob(double beta, int n, int end) {
  using M = std::array<double, 4>;
  auto mul = [](const M& a, const M& b) {
    return M{a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3], a[2] * b[0] + a[3] * b[2],
             a[2] * b[1] + a[3] * b[3]};
  };
  const double e = std::exp(beta);
  M t{e, 1, 1, e}, p{1, 0, 0, 1};
  for (int i = 0; i < n + 1; ++i) p = mul(p, t);
  double a = p[end * 2 + 0] * p[0 * 2 + end];
  double b = p[end * 2 + 1] * p[1 * 2 + end];
  return a / (a + b);
}

}  // namespace

TEST(EnumerateFeasible, ColoringExclusion) {
  Spec s = coloring(3, 2);
  const Region v = origin_region(2);
  auto out = enumerate_feasible(s, v, Assignment(boundary(v), {0, 1, 1, 0}));
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0][0], 2);
  EXPECT_TRUE(enumerate_feasible(s, v, Assignment(boundary(v), {0, 1, 2, 0})).empty());
}

TEST(EnumerateFeasible, HardcoreGridCountMatchesBruteForce) {
  Spec s = hardcore(1.0, 2);
  Region V = ball(1, 2);
  std::vector<std::pair<int, int>> edges;
  for (std::size_t i = 0; i < V.size(); ++i)
    for (std::size_t j = i + 1; j < V.size(); ++j)
      if (l1_dist(V[i], V[j]) == 1) edges.emplace_back(i, j);
  const int expect = count_independent_sets(9, edges);
  EXPECT_EQ(expect, 63);
  auto out = enumerate_feasible(s, V, constant_assignment(boundary(V), 0));
  EXPECT_EQ(static_cast<int>(out.size()), expect);
  EXPECT_TRUE(std::is_sorted(out.begin(), out.end()));
}

TEST(EnumerateFeasible, CapacityError) {
  ExhaustionLimits lim;
  lim.interior = 10;
  EXPECT_THROW(enumerate_feasible(potts(2, 0.0, 2), ball(1, 2),
                                  constant_assignment(boundary(ball(1, 2)), 0), lim),
               CapacityError);
}

TEST(ConditionalDist, Examples) {
  const double beta = 0.4;
  Spec s = ising(beta, 2);
  const Region v = origin_region(2);
  Pmf p = conditional_dist(s, v, Assignment(boundary(v), {0, 0, 1, 0}));
  EXPECT_NEAR(p.prob({0}), std::exp(3 * beta) / (std::exp(3 * beta) + std::exp(beta)), 1e-15);
  Spec hc = hardcore(0.25, 2);
  EXPECT_NEAR(conditional_dist(hc, v, constant_assignment(boundary(v), 0)).prob({1}), 0.2, 1e-15);
  EXPECT_THROW(conditional_dist(coloring(3, 2), v, Assignment(boundary(v), {0, 1, 2, 0})),
               InfeasibleBoundary);
}

TEST(ConditionalDist, NormalisedAndSupportMatches) {
  std::mt19937_64 rng(17);
  for (const Spec& s : {potts(3, 0.5, 2), hardcore(0.6, 2), beach(0.8, 2), widom_rowlinson(2, 1.5, 2)}) {
    Region V(2, {Vertex{0, 0}, Vertex{1, 0}, Vertex{0, 1}});
    auto fam = boundary_family(s, V);
    std::uniform_int_distribution<std::size_t> pick(0, fam.size() - 1);
    for (int k = 0; k < 5; ++k) {
      auto tau = fam.at(pick(rng));
      Pmf p = conditional_dist(s, V, tau);
      EXPECT_NEAR(p.total(), 1.0, 1e-12);
      EXPECT_EQ(p.support, enumerate_feasible(s, V, tau));
    }
  }
}

TEST(Marginal, Examples) {
  Spec s = hardcore(1.0, 1);
  Region V = ball(1, 1);
  Pmf p = conditional_dist(s, V, constant_assignment(boundary(V), 0));
  EXPECT_EQ(p.size(), 5u);
  // Independent sets of the 3-path containing the middle vertex.
  int hits = 0;
  for (const auto& w : p.support) hits += w[1] == 1;
  Pmf m = marginal(p, origin_region(1));
  EXPECT_NEAR(m.prob({1}), hits / 5.0, 1e-15);
  EXPECT_NEAR(m.prob({1}), 0.2, 1e-15);
  Pmf same = marginal(p, V);
  EXPECT_EQ(same.support, p.support);
  Region two(1, {Vertex{0}, Vertex{1}});
  Pmf bits = raw_pmf(two, {{{0, 0}, 1}, {{0, 1}, 1}, {{1, 0}, 1}, {{1, 1}, 1}});
  EXPECT_NEAR(marginal(bits, Region(1, {Vertex{0}})).prob({1}), 0.5, 1e-15);
  EXPECT_THROW(marginal(bits, Region(1, {Vertex{5}})), ContractError);
  Pmf cm = conditional_marginal(s, V, constant_assignment(boundary(V), 0), origin_region(1));
  EXPECT_NEAR(cm.prob({1}), 0.2, 1e-15);
}

TEST(TvDistance, Examples) {
  Region r(1, {Vertex{0}});
  Pmf p = raw_pmf(r, {{{0}, 0.3}, {{1}, 0.7}});
  EXPECT_EQ(tv_distance(p, p), 0.0);
  Pmf point = raw_pmf(r, {{{2}, 1.0}});
  Pmf uni = raw_pmf(r, {{{0}, 1}, {{1}, 1}, {{2}, 1}, {{3}, 1}});
  EXPECT_NEAR(tv_distance(point, uni), 0.75, 1e-15);
  const int k = 4;
  std::vector<Pmf> fam;
  for (int i = 0; i < k; ++i) {
    std::vector<std::pair<Config, double>> it;
    for (int a = 0; a < k; ++a)
      if (a != i) it.push_back({{static_cast<Symbol>(a)}, 1.0});
    fam.push_back(raw_pmf(r, it));
  }
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) EXPECT_NEAR(tv_distance(fam[i], fam[j]), 1.0 / 3.0, 1e-15);
  EXPECT_THROW(tv_distance(p, raw_pmf(Region(1, {Vertex{1}}), {{{0}, 1}})), ContractError);
}

TEST(TvDistance, EqualsMaxOverEvents) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Region r(1, {Vertex{0}});
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 1 + trial % 12;
    std::vector<std::pair<Config, double>> a, b;
    for (int i = 0; i < n; ++i) {
      if (u(rng) < 0.8) a.push_back({{static_cast<Symbol>(i)}, u(rng)});
      if (u(rng) < 0.8) b.push_back({{static_cast<Symbol>(i)}, u(rng)});
    }
    if (a.empty() || b.empty()) continue;
    Pmf p = raw_pmf(r, a), q = raw_pmf(r, b);
    double best = 0.0;
    for (int mask = 0; mask < (1 << n); ++mask) {
      double s = 0.0;
      for (int i = 0; i < n; ++i)
        if (mask >> i & 1) s += p.prob({static_cast<Symbol>(i)}) - q.prob({static_cast<Symbol>(i)});
      best = std::max(best, std::abs(s));
    }
    EXPECT_NEAR(tv_distance(p, q), best, 1e-12);
  }
}

TEST(Gamma, Examples) {
  const Region v = origin_region(2);
  EXPECT_NEAR(gamma(potts(3, 0.0, 2), v, v), 1.0, 1e-15);
  for (double lam : {0.1, 0.5, 2.0}) {
    // Oracle: minimum over all 16 boundaries of each symbol's probability.
    Spec s = hardcore(lam, 2);
    double m0 = 1.0, m1 = 1.0;
    for (int t = 0; t < 16; ++t) {
      Config tau(4);
      for (int k = 0; k < 4; ++k) tau[k] = (t >> k) & 1;
      Pmf p = conditional_dist(s, v, Assignment(boundary(v), tau));
      m0 = std::min(m0, p.prob({0}));
      m1 = std::min(m1, p.prob({1}));
    }
    EXPECT_NEAR(gamma(s, v, v), m0 + m1, 1e-15);
    EXPECT_NEAR(gamma(s, v, v), 1.0 / (1.0 + lam), 1e-15);
  }
  EXPECT_EQ(gamma(coloring(3, 2), v, v), 0.0);
}

TEST(Gamma, CapacityError) {
  ExhaustionLimits lim;
  lim.boundary = 100;
  EXPECT_THROW(gamma(ising(0.1, 2), ball(1, 2), ball(1, 2), lim), CapacityError);
}

TEST(Gamma, MonotoneInU) {
  std::mt19937_64 rng(31);
  for (const Spec& s : {ising(0.4, 2), hardcore(0.7, 2), potts(3, -0.5, 2)}) {
    Region V(2, {Vertex{0, 0}, Vertex{1, 0}, Vertex{0, 1}});
    for (std::size_t mask = 1; mask < 8; ++mask)
      for (std::size_t sub = mask; sub; sub = (sub - 1) & mask) {
        std::vector<Vertex> a, b;
        for (std::size_t i = 0; i < 3; ++i) {
          if (mask >> i & 1) b.push_back(V[i]);
          if (sub >> i & 1) a.push_back(V[i]);
        }
        double ga = gamma(s, V, Region(2, a)), gb = gamma(s, V, Region(2, b));
        EXPECT_GE(ga, gb - 1e-14);
        EXPECT_GE(gb, -1e-15);
        EXPECT_LE(ga, 1.0 + 1e-15);
      }
  }
}

TEST(Conditions, HighNoise) {
  auto a = check_high_noise(hardcore(0.2, 2));
  EXPECT_NEAR(a.value, 1.0 / 1.2, 1e-15);
  EXPECT_TRUE(a.pass);
  auto b = check_high_noise(hardcore(0.5, 2));
  EXPECT_FALSE(b.pass);
  EXPECT_TRUE(check_high_noise(potts(2, 0.0, 2)).pass);
  EXPECT_FALSE(check_high_noise(coloring(3, 2)).pass);
}

TEST(Conditions, Dobrushin) {
  auto z = check_dobrushin(potts(2, 0.0, 2));
  EXPECT_EQ(z.value, 0.0);
  EXPECT_TRUE(z.pass);
  for (double lam : {0.1, 0.3}) {
    auto c = check_dobrushin(hardcore(lam, 2));
    EXPECT_NEAR(c.value, 4 * lam / (1 + lam), 1e-12);
  }
  // Brute force for Ising: per neighbour, max TV over pairs differing there.
  const double beta = 0.1;
  Spec s = ising(beta, 2);
  const Region v = origin_region(2);
  double sum = 0.0;
  for (int u = 0; u < 4; ++u) {
    double worst = 0.0;
    for (int t = 0; t < 16; ++t) {
      Config a(4), b;
      for (int k = 0; k < 4; ++k) a[k] = (t >> k) & 1;
      b = a;
      b[u] ^= 1;
      worst = std::max(worst, tv_distance(conditional_dist(s, v, Assignment(boundary(v), a)),
                                          conditional_dist(s, v, Assignment(boundary(v), b))));
    }
    sum += worst;
  }
  auto c = check_dobrushin(s);
  EXPECT_NEAR(c.value, sum, 1e-14);
  EXPECT_LT(c.value, 1.0);
  EXPECT_TRUE(c.pass);
}

TEST(Conditions, HighNoiseImpliesDobrushin) {
  for (int d = 1; d <= 3; ++d)
    for (const Spec& s : {potts(2, 0.05, d), potts(3, 0.2, d), hardcore(0.1, d), hardcore(0.4, d),
                          widom_rowlinson(2, 0.2, d), beach(0.3, d)})
      if (check_high_noise(s).pass) {
        EXPECT_TRUE(check_dobrushin(s).pass) << s.describe();
      }
}

TEST(Conditions, DisagreementPercolation) {
  EXPECT_TRUE(check_disagreement_percolation(potts(2, 0.0, 2), 0.1).pass);
  const double pc = 0.5927;
  for (double lam : {0.5, 1.4, 1.5}) {
    auto c = check_disagreement_percolation(hardcore(lam, 2), pc);
    EXPECT_NEAR(c.value, lam / (1 + lam), 1e-15);
    EXPECT_EQ(c.pass, lam < pc / (1 - pc));
  }
}

TEST(RhoStar, Values) {
  EXPECT_TRUE(std::isinf(rho_star({}, 1, 2)));
  EXPECT_NEAR(rho_star({{1, 0.01}}, 2, 2), 1.2, 1e-12);
  EXPECT_NEAR(rho_star({{2, 0.04}}, 4, 2), 3.0 * sphere_count(2, 2) * 0.2, 1e-12);
  EXPECT_NEAR(rho_star({{2, 0.04}}, 4, 2), 4.8, 1e-12);
  EXPECT_THROW(rho_star({}, 3, 2), ParameterError);
}

TEST(Mixing, BetaZeroAllZero) {
  auto rep = mixing_profile(potts(2, 0.0, 2), MixingKind::weak, box_cases(2, 0));
  EXPECT_EQ(rep.distances.size(), 1u);
  for (auto [r, x] : rep.distances) EXPECT_EQ(x, 0.0);
}

TEST(Mixing, SegmentsDecayMatchesTransferMatrix) {
  const double beta = 0.1;
  auto rep = mixing_profile(ising(beta, 1), MixingKind::weak, segment_cases(6));
  ASSERT_EQ(rep.distances.size(), 6u);
  for (auto [r, x] : rep.distances) {
    const int n = r - 1;
    double tv = std::abs(path_plus_prob(beta, n, 0) - path_plus_prob(beta, n, 1));
    EXPECT_NEAR(x, tv, 1e-13);
  }
  EXPECT_LT(rep.fit.slope, 0.0);
  for (std::size_t i = 1; i < rep.distances.size(); ++i)
    EXPECT_GT(rep.distances[i].first, rep.distances[i - 1].first);
}

TEST(Mixing, RatioDominatesTv) {
  for (MixingKind k : {MixingKind::weak, MixingKind::strong}) {
    auto cases = box_cases(1, 3);
    auto tv = mixing_profile(ising(0.3, 1), k, cases);
    auto ratio = mixing_profile(ising(0.3, 1),
                                k == MixingKind::weak ? MixingKind::ratio_weak : MixingKind::ratio_strong,
                                cases);
    ASSERT_EQ(tv.distances.size(), ratio.distances.size());
    for (std::size_t i = 0; i < tv.distances.size(); ++i)
      EXPECT_GE(ratio.distances[i].second, tv.distances[i].second - 1e-15);
  }
}

TEST(Mixing, IdenticalPairsGiveZero) {
  PairGenerator same = [](const Spec& s, const Region&, const Region& V) {
    auto fam = boundary_family(s, V);
    std::vector<BoundaryPair> out;
    for (const auto& t : fam.members) out.push_back({t, t});
    return out;
  };
  auto rep = mixing_profile(ising(0.7, 2), MixingKind::weak,
                            {{origin_region(2), Region(2, {Vertex{0, 0}, Vertex{1, 0}}), same}});
  EXPECT_FALSE(rep.distances.empty());
  for (auto [r, x] : rep.distances) EXPECT_EQ(x, 0.0);
}

TEST(Mixing, PlanarColumnPresetAndSerialisation) {
  auto rep = mixing_profile(ising(0.2, 2), MixingKind::strong, planar_column_cases(0));
  EXPECT_FALSE(rep.distances.empty());
  EXPECT_NE(rep.to_csv().find("separation,worst_discrepancy"), std::string::npos);
  EXPECT_TRUE(rep.to_json().contains("slope"));
}

TEST(TorusLaw, RingMatchesTransferMatrix) {
  for (const Spec& spec : {potts(3, 0.4, 1), hardcore(0.7, 1), ising(-0.3, 1)}) {
    const int q = spec.q();
    for (int n : {3, 5, 8}) {
      const auto law = torus_law(spec, Torus({n}));
      // Z = tr(T^n) with T_ab = sqrt(w_a) e_ab sqrt(w_b).
      std::vector<double> T(q * q), P(q * q, 0.0);
      for (int a = 0; a < q; ++a)
        for (int b = 0; b < q; ++b)
          T[a * q + b] = std::sqrt(spec.vertex_weight(a) * spec.vertex_weight(b)) * spec.edge_weight(a, b);
      for (int a = 0; a < q; ++a) P[a * q + a] = 1.0;
      for (int k = 0; k < n; ++k) {
        std::vector<double> R(q * q, 0.0);
        for (int a = 0; a < q; ++a)
          for (int b = 0; b < q; ++b)
            for (int c = 0; c < q; ++c) R[a * q + c] += P[a * q + b] * T[b * q + c];
        P = R;
      }
      double Z = 0.0;
      for (int a = 0; a < q; ++a) Z += P[a * q + a];
      const double zero = std::pow(spec.vertex_weight(0) * spec.edge_weight(0, 0), n) / Z;
      EXPECT_NEAR(law[0], zero, 1e-12) << spec.describe() << " n=" << n;
      double total = 0.0;
      for (double x : law) total += x;
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
  EXPECT_THROW(torus_law(ising(0.1, 2), Torus({5, 5}), 1u << 20), CapacityError);
}
