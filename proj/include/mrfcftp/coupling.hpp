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

#ifndef MRFCFTP_COUPLING_HPP
#define MRFCFTP_COUPLING_HPP

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mrfcftp/exact_gibbs.hpp"
#include "mrfcftp/variates.hpp"

namespace mrfcftp {

namespace stage {
inline constexpr std::uint32_t kCommon = kCouplingBase + 0;
inline constexpr std::uint32_t kResidual = kCouplingBase + 1;
inline constexpr std::uint32_t kExtend = kCouplingBase + 2;
inline constexpr std::uint32_t kSequential = kCouplingBase + 3;
}  // namespace stage

// A coupling of the family (P^tau_V)_tau: a deterministic map from a
// boundary condition and a draw to a configuration on V.
class GrandCoupling {
 public:
  virtual ~GrandCoupling() = default;

  virtual const Spec& spec() const = 0;
  virtual const Region& block() const = 0;
  virtual const Region& boundary_region() const = 0;
  virtual std::string id() const = 0;

  // Whether tau (aligned with boundary_region()) is a feasible boundary.
  virtual bool admits(const Config& tau) const = 0;

  // Output on block() in region order.
  virtual Config evaluate(const Config& tau, const Draw& d) const = 0;

  // The common output when this draw makes every boundary condition give
  // the same configuration, if the coupling can tell cheaply.
  virtual std::optional<Config> universal(const Draw&) const { return std::nullopt; }

  // The enumerated feasible boundary family, when the coupling has one.
  virtual const BoundaryFamily* family() const { return nullptr; }

  // Outputs for several members of family(), one draw.
  virtual void evaluate_members(const std::vector<std::size_t>& members, const Draw& d,
                                std::vector<Config>& out) const {
    const BoundaryFamily* fam = family();
    if (!fam) throw ContractError("coupling has no enumerated family");
    out.resize(members.size());
    for (std::size_t i = 0; i < members.size(); ++i)
      out[i] = evaluate(fam->members[members[i]], d);
  }
};

// Optimal coupling machinery over an explicit finite family of pmfs on a
// common list of sites. Sites [0, m) form U. The support universe is kept
// as a lexicographic trie so that every prefix is a contiguous range.
//
// With probability gamma = sum of pointwise minima of the U-marginals, one
// shared pick selects a common U-configuration from the minimum measure.
// Otherwise the U-configuration is drawn from the member's residual,
// site by site with one shared uniform per site. Sites beyond U are drawn
// from the member's conditional law, again with one shared uniform per site.
class OptimalCore {
 public:
  OptimalCore() = default;

  // support[i] / probs[i]: member i's pmf over configurations of n sites.
  OptimalCore(std::size_t n, std::size_t m, const std::vector<std::vector<Config>>& support,
              const std::vector<std::vector<double>>& probs)
      : n_(n), m_(m) {
    if (m > n) throw ContractError("U larger than V");
    if (support.empty()) throw ContractError("empty family");
    std::map<Config, std::size_t> uni;
    for (const auto& s : support)
      for (const auto& w : s) uni.emplace(w, 0);
    universe_.reserve(uni.size());
    for (auto& [w, idx] : uni) {
      idx = universe_.size();
      universe_.push_back(w);
    }
    const std::size_t N = universe_.size();
    const std::size_t k = support.size();
    cum_.assign(k * (N + 1), 0.0);
    for (std::size_t i = 0; i < k; ++i) {
      std::vector<double> p(N, 0.0);
      for (std::size_t j = 0; j < support[i].size(); ++j) p[uni.at(support[i][j])] += probs[i][j];
      double* c = &cum_[i * (N + 1)];
      for (std::size_t j = 0; j < N; ++j) c[j + 1] = c[j] + p[j];
    }
    build_trie();
    build_minimum(k);
  }

  std::size_t members() const { return cum_.size() / (universe_.size() + 1); }
  std::size_t sites() const { return n_; }
  std::size_t u_sites() const { return m_; }
  double gamma() const { return gamma_; }
  const std::vector<Config>& universe() const { return universe_; }

  // Index into universe() of the sampled configuration.
  template <class Picker>
  std::size_t sample(std::size_t member, Picker&& pick) const {
    std::size_t cell = pick(stage::kCommon, 0, std::span<const double>(common_w_));
    std::size_t node;
    if (cell < ucells_.size()) {
      node = ucells_[cell];
    } else {
      node = 0;
      const double* rc = &rcum_[member * (ucells_.size() + 1)];
      std::array<double, kMaxSymbols> w{};
      for (std::size_t depth = 0; depth < m_; ++depth) {
        const Node& nd = nodes_[node];
        double total = 0.0;
        for (std::size_t c = 0; c < nd.children.size(); ++c) {
          const Node& ch = nodes_[nd.children[c]];
          w[c] = rc[ch.uhi] - rc[ch.ulo];
          total += w[c];
        }
        if (!(total > 0.0)) {
          // Residual mass lost to rounding; follow the member's own law.
          for (std::size_t c = 0; c < nd.children.size(); ++c) w[c] = mass(member, nodes_[nd.children[c]]);
        }
        std::size_t c = pick(stage::kResidual, depth, std::span<const double>(w.data(), nd.children.size()));
        node = nd.children[c];
      }
    }
    return extend(member, node, pick);
  }

  template <class Picker>
  std::size_t extend(std::size_t member, std::size_t node, Picker&& pick) const {
    std::array<double, kMaxSymbols> w{};
    while (!nodes_[node].children.empty()) {
      const Node& nd = nodes_[node];
      for (std::size_t c = 0; c < nd.children.size(); ++c) w[c] = mass(member, nodes_[nd.children[c]]);
      std::size_t c = pick(stage::kExtend, nd.depth, std::span<const double>(w.data(), nd.children.size()));
      node = nd.children[c];
    }
    return nodes_[node].lo;
  }

  // Common cell chosen by uniform u0, or nullopt for the residual branch.
  std::optional<std::size_t> common_cell(double u0) const {
    std::size_t c = pick_index(u0, common_w_);
    if (c < ucells_.size()) return c;
    return std::nullopt;
  }
  std::size_t ucell_config(std::size_t cell) const { return nodes_[ucells_[cell]].lo; }

 private:
  struct Node {
    std::size_t depth, lo, hi;
    std::size_t ulo = 0, uhi = 0;  // range in ucells_
    std::vector<std::size_t> children;
  };

  double mass(std::size_t member, const Node& nd) const {
    const double* c = &cum_[member * (universe_.size() + 1)];
    return c[nd.hi] - c[nd.lo];
  }

  void build_trie() {
    nodes_.clear();
    nodes_.push_back({0, 0, universe_.size(), 0, 0, {}});
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (nodes_[i].depth == n_) continue;
      const std::size_t d = nodes_[i].depth;
      std::size_t lo = nodes_[i].lo;
      const std::size_t hi = nodes_[i].hi;
      while (lo < hi) {
        std::size_t e = lo;
        while (e < hi && universe_[e][d] == universe_[lo][d]) ++e;
        nodes_[i].children.push_back(nodes_.size());
        nodes_.push_back({d + 1, lo, e, 0, 0, {}});
        lo = e;
      }
    }
    // U-cells in lexicographic order, and their ranges below each node.
    ucells_.clear();
    assign_ucells(0);
  }

  void assign_ucells(std::size_t node) {
    Node& nd = nodes_[node];
    nd.ulo = ucells_.size();
    if (nd.depth == m_) {
      ucells_.push_back(node);
    } else {
      for (std::size_t c : std::vector<std::size_t>(nd.children)) assign_ucells(c);
    }
    nodes_[node].uhi = ucells_.size();
  }

  void build_minimum(std::size_t k) {
    const std::size_t K = ucells_.size();
    std::vector<double> mn(K, 0.0);
    for (std::size_t j = 0; j < K; ++j) {
      double x = mass(0, nodes_[ucells_[j]]);
      for (std::size_t i = 1; i < k; ++i) x = std::min(x, mass(i, nodes_[ucells_[j]]));
      mn[j] = x;
    }
    gamma_ = 0.0;
    for (double x : mn) gamma_ += x;
    common_w_ = mn;
    common_w_.push_back(std::max(0.0, 1.0 - gamma_));
    rcum_.assign(k * (K + 1), 0.0);
    for (std::size_t i = 0; i < k; ++i) {
      double* r = &rcum_[i * (K + 1)];
      for (std::size_t j = 0; j < K; ++j) r[j + 1] = r[j] + (mass(i, nodes_[ucells_[j]]) - mn[j]);
    }
  }

  std::size_t n_ = 0, m_ = 0;
  std::vector<Config> universe_;
  std::vector<double> cum_;
  std::vector<Node> nodes_;
  std::vector<std::size_t> ucells_;
  std::vector<double> common_w_;
  std::vector<double> rcum_;
  double gamma_ = 0.0;
};

namespace detail {

// Picker that reads through a Draw.
struct DrawPicker {
  const Draw& d;
  std::size_t operator()(std::uint32_t st, std::uint64_t ctr, std::span<const double> w) const {
    return d.pick(st, ctr, w);
  }
};

// Picker over uniforms read once per draw and reused for every member.
class CachedPicker {
 public:
  CachedPicker(const Draw& d, std::size_t depth) : d_(d), u_(3 * (depth + 1), -1.0) {}
  std::size_t operator()(std::uint32_t st, std::uint64_t ctr, std::span<const double> w) {
    double& u = u_[(st - stage::kCommon) * (u_.size() / 3) + ctr];
    if (u < 0.0) u = *d_.raw(st, ctr);
    return pick_index(u, w);
  }

 private:
  const Draw& d_;
  std::vector<double> u_;
};

}  // namespace detail

// Optimal coupling of a raw family of pmfs on one region, coinciding on U
// with probability sum_a min_i mu_i(a).
class OptimalFamilyCoupling {
 public:
  OptimalFamilyCoupling(const std::vector<Pmf>& family, const Region& U) {
    if (family.empty()) throw ContractError("empty family");
    region_ = family.front().region;
    for (const auto& p : family)
      if (!(p.region == region_)) throw ContractError("family members on different regions");
    perm_ = internal_order(region_, U);
    std::vector<std::vector<Config>> sup;
    std::vector<std::vector<double>> pr;
    for (const auto& p : family) {
      sup.emplace_back();
      for (const auto& w : p.support) sup.back().push_back(permute(w));
      pr.push_back(p.probs);
    }
    core_ = OptimalCore(region_.size(), U.size(), sup, pr);
  }

  double gamma() const { return core_.gamma(); }
  std::size_t members() const { return core_.members(); }
  const Region& region() const { return region_; }

  Config sample(std::size_t member, const Draw& d) const {
    return unpermute(core_.universe()[core_.sample(member, detail::DrawPicker{d})]);
  }

  std::vector<Config> sample_all(const Draw& d) const {
    std::vector<Config> out;
    for (std::size_t i = 0; i < members(); ++i) out.push_back(sample(i, d));
    return out;
  }

  // Sites of U first (region order), then the rest.
  static std::vector<std::size_t> internal_order(const Region& V, const Region& U) {
    std::vector<std::size_t> perm;
    for (const auto& u : U) {
      auto i = V.index_of(u);
      if (!i) throw ContractError("U must be contained in V");
      perm.push_back(*i);
    }
    for (std::size_t i = 0; i < V.size(); ++i)
      if (!U.contains(V[i])) perm.push_back(i);
    return perm;
  }

 private:
  Config permute(const Config& w) const {
    Config out(w.size());
    for (std::size_t k = 0; k < perm_.size(); ++k) out[k] = w[perm_[k]];
    return out;
  }
  Config unpermute(const Config& w) const {
    Config out(w.size());
    for (std::size_t k = 0; k < perm_.size(); ++k) out[perm_[k]] = w[k];
    return out;
  }

  Region region_;
  std::vector<std::size_t> perm_;
  OptimalCore core_;
};

// The optimal-on-U grand coupling of (P^tau_V) over every feasible tau.
class OptimalCoupling final : public GrandCoupling {
 public:
  OptimalCoupling(const Spec& spec, const Region& V, const Region& U,
                  const ExhaustionLimits& lim = {}, std::uint64_t max_cells = std::uint64_t{1} << 23)
      : spec_(spec), V_(V), U_(U), dV_(boundary(V)) {
    if (!is_subset(U, V)) throw ContractError("optimal coupling needs U inside V");
    if (!V.contains(Vertex::origin(V.dim())))
      throw ContractError("block must contain the origin");
    fam_ = boundary_family(spec, V, lim);
    if (fam_.size() == 0) throw InfeasibleBoundary("no feasible boundary condition");
    perm_ = OptimalFamilyCoupling::internal_order(V, U);
    std::vector<std::vector<Config>> sup(fam_.size());
    std::vector<std::vector<double>> pr(fam_.size());
    std::uint64_t cells = 0;
    for (std::size_t t = 0; t < fam_.size(); ++t) {
      Pmf p = conditional_dist(spec, V, fam_.at(t), lim);
      cells += p.size();
      if (cells > max_cells)
        throw CapacityError("optimal coupling tables exceed " + std::to_string(max_cells) +
                            " cells");
      for (const auto& w : p.support) {
        Config x(w.size());
        for (std::size_t k = 0; k < perm_.size(); ++k) x[k] = w[perm_[k]];
        sup[t].push_back(std::move(x));
      }
      pr[t] = std::move(p.probs);
    }
    core_ = OptimalCore(V.size(), U.size(), sup, pr);
    support_cells_ = cells;
  }

  const Spec& spec() const override { return spec_; }
  const Region& block() const override { return V_; }
  const Region& boundary_region() const override { return dV_; }
  const Region& coupled_region() const { return U_; }
  std::string id() const override {
    return "optimal|" + spec_.describe() + "|V=" + std::to_string(V_.size()) +
           "|U=" + std::to_string(U_.size());
  }
  const BoundaryFamily* family() const override { return &fam_; }
  double gamma() const { return core_.gamma(); }
  // |family| x |support| as used by the exact-joint threshold.
  std::uint64_t support_cells() const { return support_cells_; }

  bool admits(const Config& tau) const override { return fam_.index_of(tau).has_value(); }

  Config evaluate(const Config& tau, const Draw& d) const override {
    auto t = fam_.index_of(tau);
    if (!t) throw InfeasibleBoundary("boundary condition outside the feasible family");
    return evaluate_member(*t, d);
  }

  Config evaluate_member(std::size_t t, const Draw& d) const {
    return unpermute(core_.universe()[core_.sample(t, detail::DrawPicker{d})]);
  }

  std::optional<Config> universal(const Draw& d) const override {
    if (U_.size() != V_.size()) return std::nullopt;
    auto u0 = d.raw(stage::kCommon, 0);
    if (!u0) return std::nullopt;
    auto cell = core_.common_cell(*u0);
    if (!cell) return std::nullopt;
    return unpermute(core_.universe()[core_.ucell_config(*cell)]);
  }

  void evaluate_members(const std::vector<std::size_t>& members, const Draw& d,
                        std::vector<Config>& out) const override {
    out.resize(members.size());
    if (!d.raw(stage::kCommon, 0)) {
      for (std::size_t i = 0; i < members.size(); ++i) out[i] = evaluate_member(members[i], d);
      return;
    }
    detail::CachedPicker pick(d, V_.size());
    for (std::size_t i = 0; i < members.size(); ++i)
      out[i] = unpermute(core_.universe()[core_.sample(members[i], pick)]);
  }

 private:
  Config unpermute(const Config& w) const {
    Config out(w.size());
    for (std::size_t k = 0; k < perm_.size(); ++k) out[perm_[k]] = w[k];
    return out;
  }

  Spec spec_;
  Region V_, U_, dV_;
  BoundaryFamily fam_;
  std::vector<std::size_t> perm_;
  OptimalCore core_;
  std::uint64_t support_cells_ = 0;
};

}  // namespace mrfcftp

#endif  // MRFCFTP_COUPLING_HPP
