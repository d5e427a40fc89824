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

#ifndef MRFCFTP_MIXING_HPP
#define MRFCFTP_MIXING_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mrfcftp/exact_gibbs.hpp"
#include "mrfcftp/statistics.hpp"

namespace mrfcftp {

enum class MixingKind { weak, strong, ratio_weak, ratio_strong };

inline MixingKind mixing_kind_from(const std::string& s) {
  if (s == "weak") return MixingKind::weak;
  if (s == "strong") return MixingKind::strong;
  if (s == "ratio_weak") return MixingKind::ratio_weak;
  if (s == "ratio_strong") return MixingKind::ratio_strong;
  throw ParameterError("unknown mixing kind '" + s + "'");
}

struct BoundaryPair {
  Config tau, tau_prime;
};

// Produces the boundary pairs to probe for one (U, V).
using PairGenerator =
    std::function<std::vector<BoundaryPair>(const Spec&, const Region& U, const Region& V)>;

struct MixingCase {
  Region U, V;
  PairGenerator pairs;
};

struct MixingReport {
  std::vector<std::pair<int, double>> distances;
  LogLinearFit fit;

  std::string to_csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "separation,worst_discrepancy\n";
    for (const auto& [r, x] : distances) os << r << ',' << x << '\n';
    return os.str();
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["distances"] = nlohmann::json::array();
    for (const auto& [r, x] : distances)
      j["distances"].push_back({{"separation", r}, {"worst_discrepancy", x}});
    j["slope"] = fit.slope;
    j["intercept"] = fit.intercept;
    j["residual"] = fit.residual;
    return j;
  }
};

inline Region disagreement_set(const Region& boundary_region, const Config& a, const Config& b) {
  std::vector<Vertex> out;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) out.push_back(boundary_region[i]);
  return Region(boundary_region.dim(), std::move(out));
}

inline MixingReport mixing_profile(const Spec& spec, MixingKind kind,
                                   const std::vector<MixingCase>& cases,
                                   const ExhaustionLimits& lim = {}) {
  const bool ratio = kind == MixingKind::ratio_weak || kind == MixingKind::ratio_strong;
  const bool strong = kind == MixingKind::strong || kind == MixingKind::ratio_strong;
  std::map<int, double> worst;
  for (const auto& c : cases) {
    const Region dV = boundary(c.V);
    std::map<Config, Pmf> cache;
    auto law = [&](const Config& t) -> const Pmf& {
      auto it = cache.find(t);
      if (it == cache.end())
        it = cache.emplace(t, conditional_marginal(spec, c.V, Assignment(dV, t), c.U, lim)).first;
      return it->second;
    };
    for (const auto& pr : c.pairs(spec, c.U, c.V)) {
      int sep;
      if (strong) {
        Region sigma = disagreement_set(dV, pr.tau, pr.tau_prime);
        if (sigma.empty()) continue;
        sep = dist(c.U, sigma);
      } else {
        sep = dist(c.U, dV);
      }
      const Pmf& p = law(pr.tau);
      const Pmf& q = law(pr.tau_prime);
      double disc = ratio ? std::max(ratio_discrepancy(p, q), ratio_discrepancy(q, p))
                          : tv_distance(p, q);
      disc /= static_cast<double>(c.U.size());
      auto [it, fresh] = worst.emplace(sep, disc);
      if (!fresh) it->second = std::max(it->second, disc);
    }
  }
  MixingReport rep;
  std::vector<double> xs, ys;
  for (const auto& [r, x] : worst) {
    rep.distances.emplace_back(r, x);
    xs.push_back(r);
    ys.push_back(x);
  }
  rep.fit = fit_log_linear(xs, ys);
  return rep;
}

// Generators -------------------------------------------------------------

// Every ordered pair of feasible boundary conditions.
inline PairGenerator all_pairs_generator(ExhaustionLimits lim = {}) {
  return [lim](const Spec& spec, const Region&, const Region& V) {
    auto fam = boundary_family(spec, V, lim);
    std::vector<BoundaryPair> out;
    for (const auto& a : fam.members)
      for (const auto& b : fam.members)
        if (a != b) out.push_back({a, b});
    return out;
  };
}

// Constant boundary conditions against each other, when feasible.
inline PairGenerator pure_pairs_generator() {
  return [](const Spec& spec, const Region&, const Region& V) {
    const Region dV = boundary(V);
    std::vector<Config> pure;
    for (int s = 0; s < spec.q(); ++s) {
      Config t(dV.size(), static_cast<Symbol>(s));
      if (pairwise_consistent(spec, dV, t) && has_extension(spec, V, Assignment(dV, t)))
        pure.push_back(t);
    }
    std::vector<BoundaryPair> out;
    for (const auto& a : pure)
      for (const auto& b : pure)
        if (a != b) out.push_back({a, b});
    return out;
  };
}

// Pairs of feasible boundary conditions that agree outside `allowed`.
inline PairGenerator restricted_pairs_generator(std::function<bool(const Vertex&)> allowed,
                                                ExhaustionLimits lim = {}) {
  return [allowed, lim](const Spec& spec, const Region&, const Region& V) {
    auto fam = boundary_family(spec, V, lim);
    std::vector<std::size_t> fixed;
    for (std::size_t i = 0; i < fam.region.size(); ++i)
      if (!allowed(fam.region[i])) fixed.push_back(i);
    std::map<Config, std::vector<std::size_t>> classes;
    for (std::size_t k = 0; k < fam.size(); ++k) {
      Config key;
      for (std::size_t i : fixed) key.push_back(fam.members[k][i]);
      classes[key].push_back(k);
    }
    std::vector<BoundaryPair> out;
    for (const auto& [key, ids] : classes)
      for (std::size_t a : ids)
        for (std::size_t b : ids)
          if (a != b) out.push_back({fam.members[a], fam.members[b]});
    return out;
  };
}

// Presets ------------------------------------------------------------------

// Segments V = {-n..n} in d = 1 with U = {0}, pure boundary pairs.
inline std::vector<MixingCase> segment_cases(int n_max) {
  std::vector<MixingCase> out;
  for (int n = 1; n <= n_max; ++n)
    out.push_back({origin_region(1), ball(n, 1), pure_pairs_generator()});
  return out;
}

// Boxes V = Lambda_n around U = {0}, all boundary pairs.
inline std::vector<MixingCase> box_cases(int d, int n_max, ExhaustionLimits lim = {}) {
  std::vector<MixingCase> out;
  for (int n = 0; n <= n_max; ++n)
    out.push_back({origin_region(d), ball(n, d), all_pairs_generator(lim)});
  return out;
}

// The restricted planar class: U = {0} x S_r inside V = S_r x S_r, with
// boundary conditions differing only on the two vertical sides.
inline std::vector<MixingCase> planar_column_cases(int r_max, ExhaustionLimits lim = {}) {
  std::vector<MixingCase> out;
  for (int r = 0; r <= r_max; ++r) {
    std::vector<Vertex> col;
    for (int y = -r; y <= r; ++y) col.push_back(Vertex{0, y});
    const int side = r + 1;
    out.push_back({Region(2, col), ball(r, 2),
                   restricted_pairs_generator(
                       [side](const Vertex& v) { return std::abs(v[0]) == side; }, lim)});
  }
  return out;
}

}  // namespace mrfcftp

#endif  // MRFCFTP_MIXING_HPP
