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

#ifndef MRFCFTP_EXACT_GIBBS_HPP
#define MRFCFTP_EXACT_GIBBS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "mrfcftp/lattice.hpp"
#include "mrfcftp/model.hpp"

namespace mrfcftp {

struct ExhaustionLimits {
  std::uint64_t boundary = std::uint64_t{1} << 22;
  std::uint64_t interior = std::uint64_t{1} << 24;
};

// Exact pmf over configurations of a region. The support is kept in
// lexicographic order.
struct Pmf {
  Region region;
  std::vector<Config> support;
  std::vector<double> probs;

  std::size_t size() const { return support.size(); }

  double prob(const Config& w) const {
    auto it = std::lower_bound(support.begin(), support.end(), w);
    if (it == support.end() || *it != w) return 0.0;
    return probs[it - support.begin()];
  }

  double total() const {
    double s = 0.0;
    for (double p : probs) s += p;
    return s;
  }

  // Builds a pmf from unsorted (config, mass) pairs, merging duplicates
  // and normalising.
  static Pmf from_masses(Region region, std::map<Config, double> masses) {
    Pmf p;
    p.region = std::move(region);
    double z = 0.0;
    for (const auto& [w, m] : masses) z += m;
    for (const auto& [w, m] : masses) {
      if (m <= 0.0) continue;
      p.support.push_back(w);
      p.probs.push_back(m / z);
    }
    return p;
  }
};

namespace detail {

// Compensated accumulator used for sums over larger regions.
struct KahanSum {
  double sum = 0.0, comp = 0.0;
  bool compensated = false;
  void add(double x) {
    if (!compensated) {
      sum += x;
      return;
    }
    double y = x - comp;
    double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
};

// Depth-first enumeration of feasible configurations in lexicographic
// order, pruning partial assignments that violate a constraint.
class Enumerator {
 public:
  Enumerator(const Spec& spec, const Region& V, const BoundaryCondition& tau)
      : spec_(spec), n_(V.size()) {
    earlier_.resize(n_);
    boundary_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i)
      for (const auto& nb : neighbors(V[i])) {
        if (auto j = V.index_of(nb)) {
          if (*j < i) earlier_[i].push_back(*j);
        } else {
          auto t = tau.at(nb);
          if (!t) throw ContractError("boundary condition misses " + nb.str());
          boundary_[i].push_back(*t);
        }
      }
    local_.assign(n_, std::vector<double>(spec.q()));
    for (std::size_t i = 0; i < n_; ++i)
      for (int s = 0; s < spec.q(); ++s) {
        double w = spec.vertex_weight(s);
        for (Symbol t : boundary_[i]) w *= spec.edge_weight(s, t);
        local_[i][s] = w;
      }
  }

  // Calls visit(config, weight) for every positive-weight config; stops
  // early when visit returns false.
  void run(const std::function<bool(const Config&, double)>& visit) {
    Config w(n_, 0);
    stop_ = false;
    if (n_ == 0) {
      visit(w, 1.0);
      return;
    }
    rec(0, 1.0, w, visit);
  }

 private:
  void rec(std::size_t i, double acc, Config& w,
           const std::function<bool(const Config&, double)>& visit) {
    for (int s = 0; s < spec_.q() && !stop_; ++s) {
      double x = acc * local_[i][s];
      for (std::size_t j : earlier_[i]) x *= spec_.edge_weight(s, w[j]);
      if (x == 0.0) continue;
      w[i] = static_cast<Symbol>(s);
      if (i + 1 == n_) {
        if (!visit(w, x)) stop_ = true;
      } else {
        rec(i + 1, x, w, visit);
      }
    }
  }

  const Spec& spec_;
  std::size_t n_;
  std::vector<std::vector<std::size_t>> earlier_;
  std::vector<std::vector<Symbol>> boundary_;
  std::vector<std::vector<double>> local_;
  bool stop_ = false;
};

}  // namespace detail

inline std::vector<Config> enumerate_feasible(const Spec& spec, const Region& V,
                                              const BoundaryCondition& tau,
                                              const ExhaustionLimits& lim = {}) {
  std::vector<Config> out;
  detail::Enumerator(spec, V, tau).run([&](const Config& w, double) {
    if (out.size() >= lim.interior)
      throw CapacityError("interior enumeration exceeds " +
                          std::to_string(lim.interior) + " configurations");
    out.push_back(w);
    return true;
  });
  return out;
}

inline bool has_extension(const Spec& spec, const Region& V, const BoundaryCondition& tau) {
  bool found = false;
  detail::Enumerator(spec, V, tau).run([&](const Config&, double) {
    found = true;
    return false;
  });
  return found;
}

inline Pmf conditional_dist(const Spec& spec, const Region& V, const BoundaryCondition& tau,
                            const ExhaustionLimits& lim = {}) {
  Pmf p;
  p.region = V;
  detail::KahanSum z;
  z.compensated = V.size() > 12;
  detail::Enumerator(spec, V, tau).run([&](const Config& w, double x) {
    if (p.support.size() >= lim.interior)
      throw CapacityError("interior enumeration exceeds " +
                          std::to_string(lim.interior) + " configurations");
    p.support.push_back(w);
    p.probs.push_back(x);
    z.add(x);
    return true;
  });
  if (p.support.empty())
    throw InfeasibleBoundary("boundary condition has no feasible extension to V");
  for (double& x : p.probs) x /= z.sum;
  return p;
}

inline Pmf marginal(const Pmf& p, const Region& U) {
  std::vector<std::size_t> pos;
  for (const auto& u : U) {
    auto i = p.region.index_of(u);
    if (!i) throw ContractError("marginal region not contained in pmf region");
    pos.push_back(*i);
  }
  std::map<Config, double> m;
  Config key(pos.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    for (std::size_t j = 0; j < pos.size(); ++j) key[j] = p.support[k][pos[j]];
    m[key] += p.probs[k];
  }
  Pmf out;
  out.region = U;
  for (const auto& [w, x] : m) {
    out.support.push_back(w);
    out.probs.push_back(x);
  }
  return out;
}

// Marginal on U of P^tau_V, accumulated during enumeration without
// storing the full support.
inline Pmf conditional_marginal(const Spec& spec, const Region& V,
                                const BoundaryCondition& tau, const Region& U,
                                const ExhaustionLimits& lim = {}) {
  std::vector<std::size_t> pos;
  for (const auto& u : U) {
    auto i = V.index_of(u);
    if (!i) throw ContractError("marginal region not contained in V");
    pos.push_back(*i);
  }
  std::map<Config, detail::KahanSum> m;
  detail::KahanSum z;
  z.compensated = V.size() > 12;
  std::uint64_t visited = 0;
  Config key(pos.size());
  detail::Enumerator(spec, V, tau).run([&](const Config& w, double x) {
    if (++visited > lim.interior)
      throw CapacityError("interior enumeration exceeds " +
                          std::to_string(lim.interior) + " configurations");
    for (std::size_t j = 0; j < pos.size(); ++j) key[j] = w[pos[j]];
    auto& acc = m[key];
    acc.compensated = z.compensated;
    acc.add(x);
    z.add(x);
    return true;
  });
  if (visited == 0)
    throw InfeasibleBoundary("boundary condition has no feasible extension to V");
  Pmf out;
  out.region = U;
  for (const auto& [w, acc] : m) {
    out.support.push_back(w);
    out.probs.push_back(acc.sum / z.sum);
  }
  return out;
}

inline double tv_distance(const Pmf& p, const Pmf& q) {
  if (!(p.region == q.region)) throw ContractError("tv_distance: region mismatch");
  double s = 0.0;
  std::size_t i = 0, j = 0;
  while (i < p.size() || j < q.size()) {
    if (j == q.size() || (i < p.size() && p.support[i] < q.support[j])) {
      s += p.probs[i++];
    } else if (i == p.size() || q.support[j] < p.support[i]) {
      s += q.probs[j++];
    } else {
      s += std::abs(p.probs[i++] - q.probs[j++]);
    }
  }
  return 0.5 * s;
}

// max over w with p(w) > 0 of 1 - q(w)/p(w).
inline double ratio_discrepancy(const Pmf& p, const Pmf& q) {
  if (!(p.region == q.region)) throw ContractError("ratio_discrepancy: region mismatch");
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p.probs[i] > 0.0) worst = std::max(worst, 1.0 - q.prob(p.support[i]) / p.probs[i]);
  return worst;
}

// Feasible boundary conditions of V: pairwise consistent on adjacent
// boundary sites and extendable into V. Lexicographic order.
struct BoundaryFamily {
  Region region;
  std::vector<Config> members;

  std::size_t size() const { return members.size(); }
  BoundaryCondition at(std::size_t i) const { return Assignment(region, members[i]); }
  std::optional<std::size_t> index_of(const Config& tau) const {
    auto it = std::lower_bound(members.begin(), members.end(), tau);
    if (it == members.end() || *it != tau) return std::nullopt;
    return static_cast<std::size_t>(it - members.begin());
  }
};

inline bool pairwise_consistent(const Spec& spec, const Region& R, const Config& vals) {
  for (std::size_t i = 0; i < R.size(); ++i)
    for (const auto& nb : neighbors(R[i]))
      if (auto j = R.index_of(nb); j && *j > i && !spec.allowed(vals[i], vals[*j]))
        return false;
  return true;
}

inline BoundaryFamily boundary_family(const Spec& spec, const Region& V,
                                      const ExhaustionLimits& lim = {}) {
  BoundaryFamily fam;
  fam.region = boundary(V);
  const std::size_t m = fam.region.size();
  double count = std::pow(static_cast<double>(spec.q()), static_cast<double>(m));
  if (count > static_cast<double>(lim.boundary))
    throw CapacityError("boundary of size " + std::to_string(m) + " has " +
                        std::to_string(count) + " assignments, above the cap " +
                        std::to_string(lim.boundary));
  Config tau(m, 0);
  while (true) {
    if (pairwise_consistent(spec, fam.region, tau) &&
        has_extension(spec, V, Assignment(fam.region, tau)))
      fam.members.push_back(tau);
    std::size_t i = m;
    while (i > 0 && tau[i - 1] + 1 == spec.q()) tau[--i] = 0;
    if (i == 0) break;
    ++tau[i - 1];
  }
  return fam;
}

inline double gamma(const Spec& spec, const Region& V, const Region& U,
                    const ExhaustionLimits& lim = {}) {
  if (!is_subset(U, V)) throw ContractError("gamma requires U inside V");
  auto fam = boundary_family(spec, V, lim);
  if (fam.size() == 0) throw InfeasibleBoundary("no feasible boundary condition");
  std::map<Config, double> mins;
  bool first = true;
  for (std::size_t t = 0; t < fam.size(); ++t) {
    Pmf m = conditional_marginal(spec, V, fam.at(t), U, lim);
    if (first) {
      for (std::size_t k = 0; k < m.size(); ++k) mins[m.support[k]] = m.probs[k];
      first = false;
      continue;
    }
    for (auto& [w, x] : mins) x = std::min(x, m.prob(w));
  }
  double s = 0.0;
  for (const auto& [w, x] : mins) s += x;
  return s;
}

struct ConditionVerdict {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

inline Region origin_region(int d) { return Region(d, {Vertex::origin(d)}); }

inline ConditionVerdict check_high_noise(const Spec& spec) {
  const Region v = origin_region(spec.dim());
  ConditionVerdict c{"high_noise", gamma(spec, v, v), 1.0 - 1.0 / (2.0 * spec.dim()), false};
  c.pass = c.value > c.threshold;
  return c;
}

namespace detail {

inline std::vector<Pmf> single_site_laws(const Spec& spec, const BoundaryFamily& fam) {
  const Region v = origin_region(spec.dim());
  std::vector<Pmf> laws;
  laws.reserve(fam.size());
  for (std::size_t t = 0; t < fam.size(); ++t)
    laws.push_back(conditional_dist(spec, v, fam.at(t)));
  return laws;
}

}  // namespace detail

inline ConditionVerdict check_dobrushin(const Spec& spec) {
  const Region v = origin_region(spec.dim());
  auto fam = boundary_family(spec, v);
  auto laws = detail::single_site_laws(spec, fam);
  double sum = 0.0;
  for (std::size_t u = 0; u < fam.region.size(); ++u) {
    double worst = 0.0;
    for (std::size_t t = 0; t < fam.size(); ++t) {
      Config other = fam.members[t];
      for (int s = 0; s < spec.q(); ++s) {
        if (s == fam.members[t][u]) continue;
        other[u] = static_cast<Symbol>(s);
        if (auto k = fam.index_of(other))
          worst = std::max(worst, tv_distance(laws[t], laws[*k]));
      }
    }
    sum += worst;
  }
  return {"dobrushin", sum, 1.0, sum < 1.0};
}

inline ConditionVerdict check_disagreement_percolation(const Spec& spec, double p_c) {
  const Region v = origin_region(spec.dim());
  auto fam = boundary_family(spec, v);
  auto laws = detail::single_site_laws(spec, fam);
  double worst = 0.0;
  for (std::size_t a = 0; a < laws.size(); ++a)
    for (std::size_t b = a + 1; b < laws.size(); ++b)
      worst = std::max(worst, tv_distance(laws[a], laws[b]));
  return {"disagreement_percolation", worst, p_c, worst < p_c};
}

// Base-q code of a configuration, first site most significant.
inline std::size_t config_code(const Config& x, int q) {
  std::size_t c = 0;
  for (Symbol s : x) c = c * static_cast<std::size_t>(q) + s;
  return c;
}

// Exact Gibbs law of a torus by enumeration, indexed by config_code over
// torus.sites().
inline std::vector<double> torus_law(const Spec& spec, const Torus& t,
                                     std::uint64_t max_states = std::uint64_t{1} << 24) {
  const std::size_t n = t.size();
  if (std::pow(double(spec.q()), double(n)) > double(max_states))
    throw CapacityError("torus " + t.str() + " has more than " + std::to_string(max_states) + " states");
  std::size_t states = 1;
  for (std::size_t i = 0; i < n; ++i) states *= static_cast<std::size_t>(spec.q());
  const auto edges = t.edges();
  std::vector<double> w(states, 0.0);
  detail::KahanSum z;
  z.compensated = true;
  Config x(n, 0);
  for (std::size_t c = 0; c < states; ++c) {
    double a = 1.0;
    for (Symbol s : x) a *= spec.vertex_weight(s);
    for (auto [i, j] : edges) {
      a *= spec.edge_weight(x[i], x[j]);
      if (a == 0.0) break;
    }
    w[c] = a;
    z.add(a);
    std::size_t k = n;
    while (k > 0 && x[k - 1] + 1 == spec.q()) x[--k] = 0;
    if (k > 0) ++x[k - 1];
  }
  if (!(z.sum > 0.0)) throw InfeasibleBoundary("torus admits no feasible configuration");
  for (double& a : w) a /= z.sum;
  return w;
}

// rho_*(r): +infinity at r = 1, else 3 s_{r/2} sqrt(rho(r/2)).
inline double rho_star(const std::map<int, double>& rho, int r, int d) {
  if (r < 1) throw ContractError("rho_star requires r >= 1");
  if (r == 1) return std::numeric_limits<double>::infinity();
  const int h = r / 2;
  auto it = rho.find(h);
  if (it == rho.end()) throw ParameterError("rho value missing at " + std::to_string(h));
  return 3.0 * static_cast<double>(sphere_count(h, d)) * std::sqrt(it->second);
}

}  // namespace mrfcftp

#endif  // MRFCFTP_EXACT_GIBBS_HPP
