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


#ifndef MRFCFTP_RATIO_COUPLING_HPP
#define MRFCFTP_RATIO_COUPLING_HPP

#include <map>
#include <memory>
#include <vector>

#include "mrfcftp/coupling.hpp"
#include "mrfcftp/elimination.hpp"

namespace mrfcftp {

namespace stage {
inline constexpr std::uint32_t kRatioInner = kCouplingBase + 4;
inline constexpr std::uint32_t kRatioOmega = kCouplingBase + 5;
inline constexpr std::uint32_t kRatioSigma = kCouplingBase + 6;
}  // namespace stage

struct RatioSample {
  Config omega, sigma;  // on V, region order
  bool agree_B = false, agree_W = false, agree_U = false;
};

// Three-stage coupling of P^tau_V and P^tau'_V. With r = floor(dist(U,
// Sigma) / 2), where Sigma is where tau and tau' differ, the shell B =
// {dist(., U) = r} is drawn from an optimal coupling of the two
// B-marginals, the inside W = {dist(., U) < r} from the common law given
// omega_B with shared variates, and the rest of V separately for each
// side. Agreement on B forces agreement on W and so on U.
class RatioCoupling {
 public:
  RatioCoupling(const Spec& spec, const Region& V, const Region& U, const Config& tau,
                const Config& tau_prime, std::uint64_t max_cells = std::uint64_t{1} << 24)
      : spec_(spec), V_(V), U_(U), dV_(boundary(V)), tau_(tau), tau2_(tau_prime) {
    if (!is_subset(U, V) || U.empty()) throw ContractError("U must be a non-empty subset of V");
    if (tau.size() != dV_.size() || tau_prime.size() != dV_.size())
      throw ContractError("boundary condition size mismatch");
    std::vector<Vertex> sig;
    for (std::size_t b = 0; b < dV_.size(); ++b)
      if (tau[b] != tau_prime[b]) sig.push_back(dV_[b]);
    if (sig.empty()) {
      r_ = -1;
    } else {
      r_ = dist(U, Region(V.dim(), sig)) / 2;
      if (r_ < 1) throw ParameterError("boundary disagreement too close to U: r_* < 1");
    }
    std::vector<Vertex> b, w, rest;
    for (const auto& v : V) {
      const int dv = dist(v, U);
      if (r_ < 0 || dv < r_) {
        w.push_back(v);
      } else if (dv == r_) {
        b.push_back(v);
      } else {
        rest.push_back(v);
      }
    }
    B_ = Region(V.dim(), b);
    W_ = Region(V.dim(), w);
    R_ = Region(V.dim(), rest);
    elim_V_ = std::make_unique<FrontierEliminator>(spec, V, max_cells);
    elim_W_ = std::make_unique<FrontierEliminator>(spec, W_, max_cells);
    if (!R_.empty()) elim_R_ = std::make_unique<FrontierEliminator>(spec, R_, max_cells);
    if (!B_.empty()) {
      std::vector<Pmf> fam{elim_V_->marginal(tau, B_), elim_V_->marginal(tau_prime, B_)};
      stage1_ = std::make_unique<OptimalFamilyCoupling>(fam, B_);
    }
  }

  int r_star() const { return r_; }
  const Region& shell() const { return B_; }
  const Region& inside() const { return W_; }
  const Region& outside() const { return R_; }
  const Region& region() const { return V_; }
  double stage1_gamma() const { return stage1_ ? stage1_->gamma() : 1.0; }

  // Exact marginals of the two laws on U.
  Pmf marginal_U(bool prime) const { return elim_V_->marginal(prime ? tau2_ : tau_, U_); }

  RatioSample sample(const Draw& d) const {
    RatioSample s;
    s.omega.assign(V_.size(), 0);
    s.sigma.assign(V_.size(), 0);
    Config wb, sb;
    if (stage1_) {
      wb = stage1_->sample(0, d);
      sb = stage1_->sample(1, d);
    }
    for (std::size_t i = 0; i < B_.size(); ++i) {
      s.omega[*V_.index_of(B_[i])] = wb[i];
      s.sigma[*V_.index_of(B_[i])] = sb[i];
    }
    s.agree_B = wb == sb;
    fill_inner(s.omega, d);
    fill_inner(s.sigma, d);
    if (elim_R_) {
      fill_outer(s.omega, tau_, d, stage::kRatioOmega);
      fill_outer(s.sigma, tau2_, d, stage::kRatioSigma);
    }
    s.agree_W = true;
    for (const auto& w : W_) s.agree_W = s.agree_W && s.omega[*V_.index_of(w)] == s.sigma[*V_.index_of(w)];
    s.agree_U = true;
    for (const auto& u : U_) s.agree_U = s.agree_U && s.omega[*V_.index_of(u)] == s.sigma[*V_.index_of(u)];
    return s;
  }

 private:
  // Value at a boundary vertex of W or R: from the current V-configuration
  // when inside V, otherwise from tau.
  Symbol outer_value(const Vertex& x, const Config& cfg, const Config& tau) const {
    if (auto i = V_.index_of(x)) return cfg[*i];
    return tau[*dV_.index_of(x)];
  }

  void fill_inner(Config& cfg, const Draw& d) const {
    const Region& bw = elim_W_->boundary_region();
    Config t(bw.size());
    for (std::size_t i = 0; i < bw.size(); ++i) {
      if (!V_.contains(bw[i]) && tau_[*dV_.index_of(bw[i])] != tau2_[*dV_.index_of(bw[i])])
        throw ContractError("inner region touches the boundary disagreement");
      t[i] = outer_value(bw[i], cfg, tau_);
    }
    const auto sol = elim_W_->solve(t);
    Config w = elim_W_->sample(sol, [&](std::size_t k, std::span<const double> p) {
      return d.pick(stage::kRatioInner, k, p);
    });
    for (std::size_t i = 0; i < W_.size(); ++i) cfg[*V_.index_of(W_[i])] = w[i];
  }

  void fill_outer(Config& cfg, const Config& tau, const Draw& d, std::uint32_t st) const {
    const Region& br = elim_R_->boundary_region();
    Config t(br.size());
    for (std::size_t i = 0; i < br.size(); ++i) t[i] = outer_value(br[i], cfg, tau);
    const auto sol = elim_R_->solve(t);
    Config w = elim_R_->sample(sol, [&](std::size_t k, std::span<const double> p) { return d.pick(st, k, p); });
    for (std::size_t i = 0; i < R_.size(); ++i) cfg[*V_.index_of(R_[i])] = w[i];
  }

  Spec spec_;
  Region V_, U_, dV_, B_, W_, R_;
  Config tau_, tau2_;
  int r_ = 0;
  std::unique_ptr<FrontierEliminator> elim_V_, elim_W_, elim_R_;
  std::unique_ptr<OptimalFamilyCoupling> stage1_;
};

}  // namespace mrfcftp

#endif  // MRFCFTP_RATIO_COUPLING_HPP
