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


#ifndef MRFCFTP_DIAGNOSTICS_HPP
#define MRFCFTP_DIAGNOSTICS_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "mrfcftp/config.hpp"
#include "mrfcftp/coupling.hpp"
#include "mrfcftp/exact_gibbs.hpp"
#include "mrfcftp/randomness.hpp"
#include "mrfcftp/statistics.hpp"

namespace mrfcftp {

// Uncertainty measure on symbol sets: monotone, zero exactly on singletons.
using Psi = std::function<double(SymbolSet)>;

inline double psi_one(SymbolSet a) { return set_size(a) > 1 ? 1.0 : 0.0; }
inline double psi_log(SymbolSet a) { return std::log(static_cast<double>(set_size(a))); }

// How expectations over the coupling's randomness are computed.
struct EstimatePlan {
  bool exact = true;              // exact integration of every decision
  std::uint64_t draws = 100000;   // Monte Carlo draws otherwise
  std::uint64_t seed = 1;
  double z = 3.0;                 // width of reported bounds in standard errors
};

struct Estimate {
  double value = 0.0;
  double se = 0.0;
  bool exact = false;
  std::uint64_t draws = 0;

  double upper(double z) const { return value + z * se; }
  double lower(double z) const { return value - z * se; }
};

// Exact mode is permitted when |family| x |support| <= 2^20.
inline bool exact_joint_allowed(const GrandCoupling& c) {
  const BoundaryFamily* fam = c.family();
  if (!fam) return false;
  if (auto* oc = dynamic_cast<const OptimalCoupling*>(&c)) return oc->support_cells() <= (1u << 20);
  return false;
}

namespace detail {

// Outputs of the coupling at every boundary condition in taus under one
// draw; uses the family's batched path when indices are available.
inline void joint_outputs(const GrandCoupling& c, const std::vector<Config>& taus,
                          const std::vector<std::size_t>& idx, const Draw& d, std::vector<Config>& out) {
  if (!idx.empty()) {
    c.evaluate_members(idx, d, out);
    return;
  }
  out.resize(taus.size());
  for (std::size_t i = 0; i < taus.size(); ++i) out[i] = c.evaluate(taus[i], d);
}

inline std::vector<std::size_t> family_indices(const GrandCoupling& c, const std::vector<Config>& taus) {
  const BoundaryFamily* fam = c.family();
  if (!fam) return {};
  std::vector<std::size_t> idx;
  for (const auto& t : taus) {
    auto i = fam->index_of(t);
    if (!i) throw InfeasibleBoundary("boundary condition outside the coupling's family");
    idx.push_back(*i);
  }
  return idx;
}

}  // namespace detail

// E[f(outputs at taus)] under the coupling, exactly or by Monte Carlo.
inline Estimate expect_joint(const GrandCoupling& c, const std::vector<Config>& taus,
                             const std::function<double(const std::vector<Config>&)>& f,
                             const EstimatePlan& plan) {
  if (taus.empty()) throw ContractError("expectation over an empty family");
  const auto idx = detail::family_indices(c, taus);
  const Vertex o = Vertex::origin(c.block().dim());
  Estimate e;
  if (plan.exact) {
    ExactExplorer ex;
    auto atoms = ex.explore([&](VariateSource& src) {
      std::vector<Config> out;
      detail::joint_outputs(c, taus, idx, Draw{&src, o, 1}, out);
      return f(out);
    });
    detail::KahanSum s;
    for (const auto& a : atoms) s.add(a.weight * a.outcome);
    e.value = s.sum;
    e.exact = true;
    e.draws = atoms.size();
    return e;
  }
  RandomField field(plan.seed);
  FieldSource src(field);
  double sum = 0.0, sum2 = 0.0;
  std::vector<Config> out;
  for (std::uint64_t n = 1; n <= plan.draws; ++n) {
    Draw d{&src, o, static_cast<std::uint32_t>(n)};
    double x;
    if (auto u = c.universal(d)) {
      out.assign(taus.size(), *u);
      x = f(out);
    } else {
      detail::joint_outputs(c, taus, idx, d, out);
      x = f(out);
    }
    sum += x;
    sum2 += x * x;
  }
  const double N = static_cast<double>(plan.draws);
  e.value = sum / N;
  e.se = std::sqrt(std::max(0.0, sum2 / N - e.value * e.value) / N);
  e.draws = plan.draws;
  return e;
}

// Probability that every boundary condition in taus gives the same
// configuration on U.
inline Estimate coincidence_probability(const GrandCoupling& c, const Region& U,
                                        const std::vector<Config>& taus, const EstimatePlan& plan) {
  std::vector<std::size_t> pos;
  for (const auto& u : U) {
    auto i = c.block().index_of(u);
    if (!i) throw ContractError("coincidence region outside the block");
    pos.push_back(*i);
  }
  return expect_joint(c, taus, [&](const std::vector<Config>& out) {
    for (const auto& w : out)
      for (std::size_t p : pos)
        if (w[p] != out[0][p]) return 0.0;
    return 1.0;
  }, plan);
}

// Boundary conditions of the family with tau_b in eta_b for every b.
inline std::vector<Config> family_within(const GrandCoupling& c, const std::vector<SymbolSet>& eta) {
  const BoundaryFamily* fam = c.family();
  if (!fam) throw ContractError("coupling has no enumerated family");
  if (eta.size() != c.boundary_region().size()) throw ContractError("eta size mismatch");
  std::vector<Config> out;
  for (const auto& t : fam->members) {
    bool ok = true;
    for (std::size_t b = 0; b < eta.size() && ok; ++b) ok = (eta[b] >> t[b]) & 1;
    if (ok) out.push_back(t);
  }
  return out;
}

// Eta encoding the family agreeing with tau off A (indices into the
// boundary region).
inline std::vector<SymbolSet> eta_of(const Spec& spec, const Config& tau, const std::vector<std::size_t>& A) {
  std::vector<SymbolSet> eta(tau.size());
  for (std::size_t b = 0; b < tau.size(); ++b) eta[b] = singleton(tau[b]);
  for (std::size_t b : A) eta[b] = spec.full_set();
  return eta;
}

// (1/|V|) sum_v Pr(all tau agree at v).
inline Estimate kappa(const GrandCoupling& c, const EstimatePlan& plan) {
  const BoundaryFamily* fam = c.family();
  if (!fam) throw ContractError("kappa needs an enumerated family");
  const double nv = static_cast<double>(c.block().size());
  return expect_joint(c, fam->members, [&](const std::vector<Config>& out) {
    std::size_t agree = 0;
    for (std::size_t v = 0; v < out[0].size(); ++v) {
      bool same = true;
      for (const auto& w : out) same = same && w[v] == out[0][v];
      agree += same;
    }
    return agree / nv;
  }, plan);
}

// lambda_{pi,psi}(eta) = (1/|V|) sum_v E psi({omega^tau_v : tau in eta}).
inline Estimate lambda_psi(const GrandCoupling& c, const Psi& psi, const std::vector<SymbolSet>& eta,
                           const EstimatePlan& plan) {
  auto taus = family_within(c, eta);
  if (taus.empty()) throw InfeasibleBoundary("no feasible boundary condition within eta");
  const double nv = static_cast<double>(c.block().size());
  return expect_joint(c, taus, [&](const std::vector<Config>& out) {
    double s = 0.0;
    for (std::size_t v = 0; v < out[0].size(); ++v) {
      SymbolSet a = 0;
      for (const auto& w : out) a |= singleton(w[v]);
      s += psi(a);
    }
    return s / nv;
  }, plan);
}

// lambda_pi(tau, A): average fraction of V where some tau' agreeing with
// tau off A disagrees with tau.
inline Estimate lambda_tau_A(const GrandCoupling& c, const Config& tau, const std::vector<std::size_t>& A,
                             const EstimatePlan& plan) {
  if (!c.admits(tau)) throw InfeasibleBoundary("tau is not a feasible boundary condition");
  return lambda_psi(c, psi_one, eta_of(c.spec(), tau, A), plan);
}

// One (tau, A) entry of a contraction check.
struct ContractionRecord {
  std::string coupling_id;
  std::uint64_t tau_hash = 0;
  std::vector<std::size_t> A;
  double lambda = 0.0, se = 0.0, bound = 0.0, slack = 0.0;

  nlohmann::json to_json() const {
    return {{"coupling_id", coupling_id}, {"tau_hash", tau_hash}, {"A", A},
            {"lambda", lambda},           {"se", se},             {"bound", bound},
            {"slack", slack}};
  }
};

struct ContractionReport {
  bool pass = true;
  bool statistical = false;
  double worst_slack = std::numeric_limits<double>::infinity();
  ContractionRecord worst;
  std::uint64_t pairs = 0;
  std::uint64_t draws = 0, informative_draws = 0;
  std::vector<ContractionRecord> records;  // the worst entry for each |A|

  nlohmann::json to_json() const {
    nlohmann::json r = nlohmann::json::array();
    for (const auto& x : records) r.push_back(x.to_json());
    return {{"pass", pass},   {"statistical", statistical}, {"worst_slack", worst_slack},
            {"pairs", pairs}, {"draws", draws},             {"informative_draws", informative_draws},
            {"worst", worst.to_json()}, {"worst_by_size", r}};
  }
};

inline std::uint64_t tau_hash(const Config& tau) {
  return fnv1a64(std::string(tau.begin(), tau.end()));
}

// Sweep of lambda_pi(tau, A) < |A| / |dV| over every tau of the family,
// every A with |A| <= max_size, and `random_larger` random A of larger
// size (each paired with every tau). Needs the full product family (no
// hard constraints on the boundary). In Monte Carlo mode an entry passes
// when lambda + z se < |A| / |dV|, and the slack reported is
// |A| / |dV| - lambda - z se.
inline ContractionReport contraction_sweep(const GrandCoupling& c, std::size_t max_size,
                                           std::size_t random_larger, const EstimatePlan& plan) {
  const BoundaryFamily* fam = c.family();
  if (!fam) throw ContractError("contraction sweep needs an enumerated family");
  const Spec& spec = c.spec();
  const std::size_t nb = c.boundary_region().size();
  const std::size_t nv = c.block().size();
  const int q = spec.q();
  if (q != 2 || nv > 64 || nb > 30)
    throw CapacityError("contraction sweep supports two symbols, |V| <= 64 and |dV| <= 30");
  if (fam->size() != (std::size_t{1} << nb))
    throw ContractError("contraction sweep needs every boundary condition to be feasible");
  const std::size_t F = fam->size();
  // Member t has boundary bits equal to its index (lexicographic order).
  auto bit_of = [&](std::size_t b) { return std::size_t{1} << (nb - 1 - b); };

  // Subsets A: all with |A| <= max_size, then random larger ones.
  std::vector<std::vector<std::size_t>> subsets;
  {
    std::vector<std::size_t> cur;
    std::function<void(std::size_t)> rec = [&](std::size_t from) {
      if (!cur.empty()) subsets.push_back(cur);
      if (cur.size() == max_size) return;
      for (std::size_t b = from; b < nb; ++b) {
        cur.push_back(b);
        rec(b + 1);
        cur.pop_back();
      }
    };
    rec(0);
    RandomField pick(plan.seed ^ 0xA5A5A5A5ull);
    for (std::size_t k = 0; k < random_larger && max_size < nb; ++k) {
      const std::size_t size = max_size + 1 +
          static_cast<std::size_t>(pick.uniform({Vertex{0}, 1, 7, 2 * k}) * (nb - max_size));
      std::vector<std::size_t> all(nb);
      for (std::size_t b = 0; b < nb; ++b) all[b] = b;
      for (std::size_t i = 0; i < size; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(pick.uniform({Vertex{static_cast<int>(i)}, 1, 7, 2 * k + 1}) * (nb - i));
        std::swap(all[i], all[std::min(j, nb - 1)]);
      }
      std::vector<std::size_t> A(all.begin(), all.begin() + std::min(size, nb));
      std::sort(A.begin(), A.end());
      subsets.push_back(A);
    }
  }
  const std::size_t S = subsets.size();
  std::vector<double> acc(S * F, 0.0);
  std::vector<std::size_t> members(F);
  for (std::size_t t = 0; t < F; ++t) members[t] = t;

  // Per draw: ones/zeros masks per member; the cylinder union over A is a
  // closure along the bits of A.
  std::vector<std::uint64_t> ones(F), zeros(F), o2(F), z2(F);
  auto accumulate = [&](const std::vector<Config>& out, double weight) {
    for (std::size_t t = 0; t < F; ++t) {
      std::uint64_t a = 0;
      for (std::size_t v = 0; v < nv; ++v) a |= std::uint64_t(out[t][v]) << v;
      ones[t] = a;
      zeros[t] = ~a & (nv == 64 ? ~0ull : ((1ull << nv) - 1));
    }
    for (std::size_t s = 0; s < S; ++s) {
      o2 = ones;
      z2 = zeros;
      for (std::size_t b : subsets[s]) {
        const std::size_t m = bit_of(b);
        for (std::size_t t = 0; t < F; ++t)
          if (!(t & m)) {
            const std::uint64_t o = o2[t] | o2[t | m], z = z2[t] | z2[t | m];
            o2[t] = o2[t | m] = o;
            z2[t] = z2[t | m] = z;
          }
      }
      double* row = &acc[s * F];
      for (std::size_t t = 0; t < F; ++t) row[t] += weight * std::popcount(o2[t] & z2[t]);
    }
  };

  ContractionReport rep;
  double total_weight = 0.0;
  std::vector<Config> out;
  const Vertex o = Vertex::origin(c.block().dim());
  if (plan.exact) {
    ExactExplorer ex;
    auto atoms = ex.explore([&](VariateSource& src) {
      std::vector<Config> r;
      c.evaluate_members(members, Draw{&src, o, 1}, r);
      return r;
    });
    for (const auto& a : atoms) accumulate(a.outcome, a.weight);
    total_weight = 1.0;
    rep.draws = atoms.size();
  } else {
    rep.statistical = true;
    RandomField field(plan.seed);
    FieldSource src(field);
    for (std::uint64_t n = 1; n <= plan.draws; ++n) {
      Draw d{&src, o, static_cast<std::uint32_t>(n)};
      // A universal draw couples everything and adds nothing.
      if (c.universal(d)) continue;
      c.evaluate_members(members, d, out);
      accumulate(out, 1.0);
      ++rep.informative_draws;
    }
    total_weight = static_cast<double>(plan.draws);
    rep.draws = plan.draws;
  }

  std::vector<double> worst_by_size(nb + 1, std::numeric_limits<double>::infinity());
  std::vector<ContractionRecord> worst_rec(nb + 1);
  for (std::size_t s = 0; s < S; ++s) {
    const double bound = double(subsets[s].size()) / nb;
    for (std::size_t t = 0; t < F; ++t) {
      const double lam = acc[s * F + t] / (total_weight * nv);
      // Per-draw values lie in [0,1], so lam (1 - lam) bounds the variance.
      const double se = plan.exact ? 0.0 : std::sqrt(std::max(lam * (1 - lam), 0.0) / total_weight);
      const double slack = bound - lam - (plan.exact ? 0.0 : plan.z * se);
      ++rep.pairs;
      const std::size_t k = subsets[s].size();
      if (slack < worst_by_size[k]) {
        worst_by_size[k] = slack;
        worst_rec[k] = {c.id(), tau_hash(fam->members[t]), subsets[s], lam, se, bound, slack};
      }
      if (!(slack > 0.0)) rep.pass = false;
    }
  }
  for (std::size_t k = 1; k <= nb; ++k) {
    if (!std::isfinite(worst_by_size[k])) continue;
    rep.records.push_back(worst_rec[k]);
    if (worst_by_size[k] < rep.worst_slack) {
      rep.worst_slack = worst_by_size[k];
      rep.worst = worst_rec[k];
    }
  }
  return rep;
}

// Check of lambda_{pi,psi}(eta) <= (1 - eps) / |dV| sum_b psi(eta_b) over
// the given etas. Reports the largest eps that holds for all of them.
struct PsiContraction {
  bool pass = true;
  double epsilon = std::numeric_limits<double>::infinity();
  std::size_t checked = 0;
};

inline PsiContraction check_contraction_psi(const GrandCoupling& c, const Psi& psi,
                                            const std::vector<std::vector<SymbolSet>>& etas,
                                            const EstimatePlan& plan) {
  PsiContraction r;
  const double nb = static_cast<double>(c.boundary_region().size());
  for (const auto& eta : etas) {
    double rhs = 0.0;
    for (SymbolSet a : eta) rhs += psi(a);
    if (rhs <= 0.0) continue;
    Estimate e = lambda_psi(c, psi, eta, plan);
    const double lam = plan.exact ? e.value : e.upper(plan.z);
    r.epsilon = std::min(r.epsilon, 1.0 - lam * nb / rhs);
    ++r.checked;
  }
  r.pass = r.checked == 0 || r.epsilon > 0.0;
  return r;
}

// Member i uniform on {0, ..., k-1} without i. Pairwise total variation
// is 1/(k-1) while the pointwise minimum vanishes.
inline std::vector<Pmf> leave_one_out_family(int k) {
  if (k < 2 || k > kMaxSymbols) throw ParameterError("leave-one-out family needs 2 <= k <= 64");
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

// Exact joint behaviour of the optimal family coupling on U.
struct FamilyReport {
  double gamma = 0.0;        // sum over U-configurations of the minimum mass
  double coincidence = 0.0;  // Pr(all members agree on U), integrated exactly
  std::vector<std::vector<double>> tv, disagreement;
  double worst_disagreement = 0.0;

  nlohmann::json to_json() const {
    return {{"gamma", gamma}, {"coincidence", coincidence}, {"pairwise_tv", tv},
            {"pairwise_disagreement", disagreement}, {"worst_disagreement", worst_disagreement}};
  }
};

inline FamilyReport family_report(const std::vector<Pmf>& fam, const Region& U) {
  FamilyReport r;
  std::vector<Pmf> marg;
  for (const auto& p : fam) marg.push_back(marginal(p, U));
  std::map<Config, double> mn;
  for (const auto& m : marg)
    for (const auto& w : m.support) mn.emplace(w, 1.0);
  for (auto& [w, x] : mn)
    for (const auto& m : marg) x = std::min(x, m.prob(w));
  for (const auto& [w, x] : mn) r.gamma += x;

  OptimalFamilyCoupling c(fam, U);
  std::vector<std::size_t> pos;
  for (const auto& u : U) pos.push_back(*c.region().index_of(u));
  ExactExplorer ex;
  auto atoms = ex.explore([&](VariateSource& src) { return c.sample_all(Draw{&src, Vertex::origin(U.dim()), 1}); });
  const std::size_t k = fam.size();
  r.tv.assign(k, std::vector<double>(k, 0.0));
  r.disagreement.assign(k, std::vector<double>(k, 0.0));
  detail::KahanSum co;
  for (const auto& a : atoms) {
    bool all = true;
    for (std::size_t i = 1; i < k && all; ++i)
      for (std::size_t p : pos) all = all && a.outcome[i][p] == a.outcome[0][p];
    if (all) co.add(a.weight);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = i + 1; j < k; ++j) {
        bool same = true;
        for (std::size_t p : pos) same = same && a.outcome[i][p] == a.outcome[j][p];
        if (!same) r.disagreement[i][j] += a.weight;
      }
  }
  r.coincidence = co.sum;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) {
      r.tv[i][j] = r.tv[j][i] = tv_distance(marg[i], marg[j]);
      r.disagreement[j][i] = r.disagreement[i][j];
      r.worst_disagreement = std::max(r.worst_disagreement, r.disagreement[i][j]);
    }
  return r;
}

}  // namespace mrfcftp

#endif  // MRFCFTP_DIAGNOSTICS_HPP
