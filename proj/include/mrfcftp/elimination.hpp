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

#ifndef MRFCFTP_ELIMINATION_HPP
#define MRFCFTP_ELIMINATION_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mrfcftp/exact_gibbs.hpp"

namespace mrfcftp {

// Exact inference on P^tau_V by sweeping the sites of V in region order
// and carrying the frontier (placed sites with an unplaced neighbour) as a
// mixed-radix state. Transition tables depend only on (spec, V); the
// boundary condition enters through per-site factors at solve time.
class FrontierEliminator {
 public:
  // Backward messages for one boundary condition and clamp pattern.
  struct Solution {
    std::vector<std::vector<double>> beta;  // beta[k][f], k = 0..n
    std::vector<std::array<double, kMaxSymbols>> phi;
    std::vector<int> clamp;
    double log_z = -std::numeric_limits<double>::infinity();
    bool feasible() const { return std::isfinite(log_z); }
  };

  FrontierEliminator() = default;

  FrontierEliminator(const Spec& spec, const Region& V, std::uint64_t max_cells = std::uint64_t{1} << 24)
      : spec_(spec), V_(V), dV_(boundary(V)), n_(V.size()), q_(spec.q()) {
    earlier_.resize(n_);
    bnd_.resize(n_);
    std::vector<std::size_t> last(n_, 0);
    for (std::size_t k = 0; k < n_; ++k) {
      last[k] = k;
      for (const auto& nb : neighbors(V[k])) {
        if (auto j = V.index_of(nb)) {
          if (*j < k) earlier_[k].push_back(*j);
          last[k] = std::max(last[k], *j);
        } else {
          bnd_[k].push_back(*dV_.index_of(nb));
        }
      }
    }
    // Frontier after placing sites [0, k).
    frontier_.assign(n_ + 1, {});
    for (std::size_t k = 0; k < n_; ++k)
      for (std::size_t j = 0; j <= k; ++j)
        if (last[j] > k) frontier_[k + 1].push_back(j);
    std::uint64_t cells = 0;
    states_.resize(n_ + 1);
    for (std::size_t k = 0; k <= n_; ++k) {
      double s = std::pow(static_cast<double>(q_), static_cast<double>(frontier_[k].size()));
      if (s > static_cast<double>(max_cells))
        throw CapacityError("frontier of " + std::to_string(frontier_[k].size()) +
                            " sites exceeds the elimination cap");
      states_[k] = static_cast<std::size_t>(s);
      cells += states_[k] * q_;
      if (cells > max_cells) throw CapacityError("elimination tables exceed the cap");
    }
    build_tables();
  }

  const Region& region() const { return V_; }
  const Region& boundary_region() const { return dV_; }
  const Spec& spec() const { return spec_; }
  std::size_t max_frontier() const {
    std::size_t m = 0;
    for (const auto& f : frontier_) m = std::max(m, f.size());
    return m;
  }

  // tau aligned with boundary_region(); clamp[k] >= 0 pins site k.
  Solution solve(const Config& tau, const std::vector<int>& clamp = {}) const {
    if (tau.size() != dV_.size()) throw ContractError("boundary condition size mismatch");
    Solution sol;
    sol.clamp = clamp.empty() ? std::vector<int>(n_, -1) : clamp;
    sol.phi.resize(n_);
    for (std::size_t k = 0; k < n_; ++k)
      for (int s = 0; s < q_; ++s) {
        double w = (sol.clamp[k] < 0 || sol.clamp[k] == s) ? 1.0 : 0.0;
        for (std::size_t b : bnd_[k]) w *= spec_.edge_weight(s, tau[b]);
        sol.phi[k][s] = w;
      }
    sol.beta.resize(n_ + 1);
    sol.beta[n_].assign(1, 1.0);
    double log_scale = 0.0;
    for (std::size_t k = n_; k-- > 0;) {
      const auto& nxt = next_[k];
      const auto& loc = local_[k];
      const auto& b1 = sol.beta[k + 1];
      auto& b0 = sol.beta[k];
      b0.assign(states_[k], 0.0);
      double mx = 0.0;
      for (std::size_t f = 0; f < states_[k]; ++f) {
        double acc = 0.0;
        for (int s = 0; s < q_; ++s) {
          const std::size_t c = f * q_ + s;
          acc += loc[c] * sol.phi[k][s] * b1[nxt[c]];
        }
        b0[f] = acc;
        mx = std::max(mx, acc);
      }
      if (!(mx > 0.0)) return sol;
      for (double& x : b0) x /= mx;
      log_scale += std::log(mx);
    }
    if (n_ == 0) {
      sol.log_z = 0.0;
      return sol;
    }
    sol.log_z = log_scale + std::log(sol.beta[0][0]);
    return sol;
  }

  double log_partition(const Config& tau, const std::vector<int>& clamp = {}) const {
    return solve(tau, clamp).log_z;
  }

  // Conditional weights of site k's symbols given the state f.
  void site_weights(const Solution& sol, std::size_t k, std::size_t f,
                    std::array<double, kMaxSymbols>& w) const {
    for (int s = 0; s < q_; ++s) {
      const std::size_t c = f * q_ + s;
      w[s] = local_[k][c] * sol.phi[k][s] * sol.beta[k + 1][next_[k][c]];
    }
  }

  std::size_t advance(std::size_t k, std::size_t f, Symbol s) const { return next_[k][f * q_ + s]; }

  // Sequential sample in region order; pick(k, weights) returns a symbol.
  template <class Picker>
  Config sample(const Solution& sol, Picker&& pick) const {
    if (!sol.feasible()) throw InfeasibleBoundary("boundary condition has no feasible extension to V");
    Config out(n_);
    std::size_t f = 0;
    std::array<double, kMaxSymbols> w{};
    for (std::size_t k = 0; k < n_; ++k) {
      site_weights(sol, k, f, w);
      const Symbol s = static_cast<Symbol>(pick(k, std::span<const double>(w.data(), q_)));
      out[k] = s;
      f = advance(k, f, s);
    }
    return out;
  }

  // Exact marginal of P^tau_V on U, by one clamped solve per
  // configuration of U.
  Pmf marginal(const Config& tau, const Region& U) const {
    std::vector<std::size_t> pos;
    for (const auto& u : U) {
      auto i = V_.index_of(u);
      if (!i) throw ContractError("marginal region not contained in V");
      pos.push_back(*i);
    }
    const double lz = log_partition(tau);
    if (!std::isfinite(lz)) throw InfeasibleBoundary("boundary condition has no feasible extension to V");
    Pmf out;
    out.region = U;
    Config w(pos.size(), 0);
    std::vector<int> clamp(n_, -1);
    while (true) {
      for (std::size_t j = 0; j < pos.size(); ++j) clamp[pos[j]] = w[j];
      const double l = log_partition(tau, clamp);
      if (std::isfinite(l)) {
        out.support.push_back(w);
        out.probs.push_back(std::exp(l - lz));
      }
      std::size_t i = pos.size();
      while (i > 0 && w[i - 1] + 1 == q_) w[--i] = 0;
      if (i == 0) break;
      ++w[i - 1];
    }
    return out;
  }

 private:
  void build_tables() {
    next_.resize(n_);
    local_.resize(n_);
    for (std::size_t k = 0; k < n_; ++k) {
      const auto& F = frontier_[k];
      const auto& G = frontier_[k + 1];
      // Position of each earlier neighbour of k within F.
      std::vector<std::size_t> epos;
      for (std::size_t j : earlier_[k]) epos.push_back(std::find(F.begin(), F.end(), j) - F.begin());
      // Source of each slot of G: a slot of F, or the new site k.
      std::vector<long> src;
      for (std::size_t j : G) {
        if (j == k) {
          src.push_back(-1);
        } else {
          src.push_back(std::find(F.begin(), F.end(), j) - F.begin());
        }
      }
      next_[k].assign(states_[k] * q_, 0);
      local_[k].assign(states_[k] * q_, 0.0);
      std::vector<Symbol> vals(F.size());
      for (std::size_t f = 0; f < states_[k]; ++f) {
        std::size_t x = f;
        for (std::size_t m = 0; m < F.size(); ++m) {
          vals[m] = static_cast<Symbol>(x % q_);
          x /= q_;
        }
        for (int s = 0; s < q_; ++s) {
          double w = spec_.vertex_weight(s);
          for (std::size_t m : epos) w *= spec_.edge_weight(s, vals[m]);
          std::size_t code = 0, mul = 1;
          for (std::size_t g = 0; g < G.size(); ++g) {
            const Symbol v = src[g] < 0 ? static_cast<Symbol>(s) : vals[src[g]];
            code += v * mul;
            mul *= q_;
          }
          next_[k][f * q_ + s] = static_cast<std::uint32_t>(code);
          local_[k][f * q_ + s] = w;
        }
      }
    }
  }

  Spec spec_;
  Region V_, dV_;
  std::size_t n_ = 0;
  int q_ = 0;
  std::vector<std::vector<std::size_t>> earlier_, bnd_, frontier_;
  std::vector<std::size_t> states_;
  std::vector<std::vector<std::uint32_t>> next_;
  std::vector<std::vector<double>> local_;
};

}  // namespace mrfcftp

#endif  // MRFCFTP_ELIMINATION_HPP
