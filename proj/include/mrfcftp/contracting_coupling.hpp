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


#ifndef MRFCFTP_CONTRACTING_COUPLING_HPP
#define MRFCFTP_CONTRACTING_COUPLING_HPP

#include <algorithm>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "mrfcftp/coupling.hpp"
#include "mrfcftp/elimination.hpp"

namespace mrfcftp {

namespace stage {
inline constexpr std::uint32_t kContractInner = kCouplingBase + 7;
inline constexpr std::uint32_t kContractFace = kCouplingBase + 8;
inline constexpr std::uint32_t kContractRest = kCouplingBase + 9;
}  // namespace stage

// Grand coupling of (P^tau_V) on V = Lambda_n in two dimensions, built in
// stages. (i) omega_U on U = Lambda_{n-r} from a sequential sampler of V
// with shared per-site variates. (ii) The annulus K = V \ U is cut into
// faces: runs of length s to 10s along each side, kept ceil(s/2) away
// from the corners and s apart from each other. (iii) Face i is drawn from
// its exact conditional law through a common part: the pointwise minimum
// over the unsampled sites E_i bordering the near strip N_i of the laws of
// omega_{L_i} given the known values eta around N_i and the values on E_i.
// All boundary conditions read the same variates for face i, so equal eta
// gives equal draws and close common parts mostly agree. (iv) Each
// remaining component of K is drawn from its conditional law with shared
// per-site variates, so equal boundary values give equal samples.
class ContractingCoupling final : public GrandCoupling {
 public:
  ContractingCoupling(const Spec& spec, int n, int r, int s,
                      std::uint64_t max_cells = std::uint64_t{1} << 22)
      : spec_(spec), n_(n), r_(r), s_(s) {
    if (spec.dim() != 2) throw ParameterError("contracting coupling is two-dimensional");
    if (!(1 <= r && r < s && s <= 4 * r && 4 * r <= n))
      throw ParameterError("need 1 <= r < s <= 4r <= n");
    V_ = ball(n, 2);
    dV_ = boundary(V_);
    U_ = ball(n - r, 2);
    K_ = region_minus(V_, U_);
    elim_V_ = std::make_unique<FrontierEliminator>(spec, V_, max_cells);
    build_faces();
    for (auto& f : faces_) {
      f.strip_elim = std::make_unique<FrontierEliminator>(spec, f.strip, max_cells);
      // Kr: annulus sites not yet fixed when face i is drawn.
      Region fixed(2);
      for (const auto& g : faces_) {
        if (&g == &f) break;
        fixed = region_union(fixed, g.L);
      }
      f.open = region_minus(K_, fixed);
      f.open_elim = std::make_unique<FrontierEliminator>(spec, f.open, max_cells);
      if (std::pow(double(spec.q()), double(f.L.size())) > 65536.0)
        throw CapacityError("face of " + std::to_string(f.L.size()) + " sites is too large to enumerate");
    }
    Region covered(2);
    for (const auto& f : faces_) covered = region_union(covered, f.L);
    for (auto& comp : components(region_minus(K_, covered))) {
      rest_.push_back({comp, std::make_unique<FrontierEliminator>(spec, comp, max_cells)});
    }
  }

  const Spec& spec() const override { return spec_; }
  const Region& block() const override { return V_; }
  const Region& boundary_region() const override { return dV_; }
  std::string id() const override {
    return "contracting|" + spec_.describe() + "|n=" + std::to_string(n_) + "|r=" + std::to_string(r_) +
           "|s=" + std::to_string(s_);
  }
  const Region& inner() const { return U_; }
  std::size_t face_count() const { return faces_.size(); }
  const Region& face(std::size_t i) const { return faces_[i].L; }
  std::size_t rest_count() const { return rest_.size(); }
  const Region& rest(std::size_t i) const { return rest_[i].region; }

  bool admits(const Config& tau) const override {
    return tau.size() == dV_.size() && pairwise_consistent(spec_, dV_, tau) && elim_V_->solve(tau).feasible();
  }

  Config evaluate(const Config& tau, const Draw& d) const override {
    Config out(V_.size(), 0);
    std::vector<char> known(V_.size(), 0);
    // (i) inner square.
    const auto sol = elim_V_->solve(tau);
    const Config full = elim_V_->sample(sol, [&](std::size_t k, std::span<const double> w) {
      return d.pick(stage::kContractInner, k, w);
    });
    for (const auto& u : U_) {
      const std::size_t i = *V_.index_of(u);
      out[i] = full[i];
      known[i] = 1;
    }
    // (iii) faces.
    for (std::size_t fi = 0; fi < faces_.size(); ++fi) draw_face(fi, tau, d, out, known);
    // (iv) remaining components.
    for (std::size_t ci = 0; ci < rest_.size(); ++ci) {
      const auto& comp = rest_[ci];
      const Region& bc = comp.elim->boundary_region();
      Config t(bc.size());
      for (std::size_t b = 0; b < bc.size(); ++b) t[b] = value_at(bc[b], tau, out, known);
      const auto cs = comp.elim->solve(t);
      const Config w = comp.elim->sample(cs, [&](std::size_t k, std::span<const double> p) {
        return d.pick(stage::kContractRest, (std::uint64_t(ci) << 32) | k, p);
      });
      for (std::size_t k = 0; k < comp.region.size(); ++k) {
        const std::size_t i = *V_.index_of(comp.region[k]);
        out[i] = w[k];
        known[i] = 1;
      }
    }
    return out;
  }

  std::optional<Config> universal(const Draw& d) const override {
    if (!spec_.boundary_independent()) return std::nullopt;
    return evaluate(Config(dV_.size(), 0), d);
  }

 private:
  struct Face {
    Region L, strip, edge, open;
    std::unique_ptr<FrontierEliminator> strip_elim, open_elim;
  };
  struct Rest {
    Region region;
    std::unique_ptr<FrontierEliminator> elim;
  };

  Symbol value_at(const Vertex& x, const Config& tau, const Config& out, const std::vector<char>& known) const {
    if (auto i = V_.index_of(x)) {
      if (!known[*i]) throw ContractError("value at " + x.str() + " requested before it is drawn");
      return out[*i];
    }
    return tau[*dV_.index_of(x)];
  }

  static std::vector<Region> components(const Region& R) {
    std::vector<Region> out;
    std::vector<char> seen(R.size(), 0);
    for (std::size_t s = 0; s < R.size(); ++s) {
      if (seen[s]) continue;
      std::vector<Vertex> comp{R[s]};
      seen[s] = 1;
      for (std::size_t h = 0; h < comp.size(); ++h)
        for (const auto& nb : neighbors(comp[h]))
          if (auto j = R.index_of(nb); j && !seen[*j]) {
            seen[*j] = 1;
            comp.push_back(nb);
          }
      out.emplace_back(2, comp);
    }
    return out;
  }

  void build_faces() {
    const int margin = (s_ + 1) / 2;
    const int lo = -(n_ - r_) + margin, hi = (n_ - r_) - margin;
    // Runs along one side: faces of length in [s, 10s] separated by gaps of s.
    std::vector<std::pair<int, int>> runs;
    if (hi - lo + 1 >= s_) {
      const int len = hi - lo + 1;
      int count = std::max(1, (len + s_) / (10 * s_ + s_));
      while ((len - (count - 1) * s_) / count > 10 * s_) ++count;
      while (count > 1 && (len - (count - 1) * s_) / count < s_) --count;
      const int usable = len - (count - 1) * s_;
      int pos = lo;
      for (int c = 0; c < count; ++c) {
        const int l = usable / count + (c < usable % count ? 1 : 0);
        runs.emplace_back(pos, pos + l - 1);
        pos += l + s_;
      }
    }
    // Sides: x > n-r, y > n-r, x < -(n-r), y < -(n-r).
    for (int sd = 0; sd < 4; ++sd)
      for (auto [a, b] : runs) {
        std::vector<Vertex> L;
        for (int t = a; t <= b; ++t)
          for (int depth = n_ - r_ + 1; depth <= n_; ++depth) {
            Vertex v(2);
            switch (sd) {
              case 0: v = Vertex{depth, t}; break;
              case 1: v = Vertex{t, depth}; break;
              case 2: v = Vertex{-depth, t}; break;
              default: v = Vertex{t, -depth}; break;
            }
            L.push_back(v);
          }
        Face f;
        f.L = Region(2, L);
        f.strip = region_filter(K_, [&](const Vertex& x) { return dist(x, f.L) <= std::max(0, s_ - 2); });
        faces_.push_back(std::move(f));
      }
    for (std::size_t i = 0; i < faces_.size(); ++i)
      for (std::size_t j = i + 1; j < faces_.size(); ++j)
        if (dist(faces_[i].L, faces_[j].L) < s_) throw ContractError("faces closer than s");
  }

  // Marginal on L (in L's order) of the solution of an eliminator over a
  // region containing L.
  static std::vector<double> face_law(const FrontierEliminator& e, const Config& t, const Region& L, int q) {
    std::vector<std::size_t> pos;
    for (const auto& x : L) pos.push_back(*e.region().index_of(x));
    const double lz = e.log_partition(t);
    std::size_t states = 1;
    for (std::size_t i = 0; i < L.size(); ++i) states *= q;
    std::vector<double> out(states, 0.0);
    if (!std::isfinite(lz)) return out;
    std::vector<int> clamp(e.region().size(), -1);
    for (std::size_t c = 0; c < states; ++c) {
      std::size_t r = c;
      for (std::size_t i = L.size(); i-- > 0;) {
        clamp[pos[i]] = static_cast<int>(r % q);
        r /= q;
      }
      const double l = e.log_partition(t, clamp);
      out[c] = std::isfinite(l) ? std::exp(l - lz) : 0.0;
    }
    return out;
  }

  void draw_face(std::size_t fi, const Config& tau, const Draw& d, Config& out, std::vector<char>& known) const {
    const Face& f = faces_[fi];
    const int q = spec_.q();
    // eta: known values on the boundary of the near strip; E: open annulus sites there.
    const Region& bs = f.strip_elim->boundary_region();
    Config t(bs.size(), 0);
    std::vector<std::size_t> open_pos;
    for (std::size_t b = 0; b < bs.size(); ++b) {
      auto i = V_.index_of(bs[b]);
      if (i && !known[*i]) {
        open_pos.push_back(b);
      } else {
        t[b] = value_at(bs[b], tau, out, known);
      }
    }
    // Common part: pointwise minimum over the open values.
    std::vector<double> mn;
    {
      std::vector<Symbol> e(open_pos.size(), 0);
      bool first = true;
      while (true) {
        for (std::size_t j = 0; j < open_pos.size(); ++j) t[open_pos[j]] = e[j];
        std::vector<double> law = face_law(*f.strip_elim, t, f.L, q);
        double tot = 0.0;
        for (double x : law) tot += x;
        if (tot > 0.0 && pairwise_consistent(spec_, bs, t)) {
          if (first) {
            mn = law;
            first = false;
          } else {
            for (std::size_t c = 0; c < mn.size(); ++c) mn[c] = std::min(mn[c], law[c]);
          }
        }
        std::size_t j = e.size();
        while (j > 0 && e[j - 1] + 1 == q) e[--j] = 0;
        if (j == 0) break;
        ++e[j - 1];
      }
      if (first) mn.assign(static_cast<std::size_t>(std::pow(q, f.L.size())), 0.0);
    }
    // Exact conditional law of the face given everything drawn so far.
    const Region& bo = f.open_elim->boundary_region();
    Config to(bo.size());
    for (std::size_t b = 0; b < bo.size(); ++b) to[b] = value_at(bo[b], tau, out, known);
    std::vector<double> nu = face_law(*f.open_elim, to, f.L, q);
    double common = 0.0;
    for (std::size_t c = 0; c < mn.size(); ++c) {
      mn[c] = std::min(mn[c], nu[c]);
      common += mn[c];
    }
    const std::uint64_t h = 2 * fi;
    std::vector<double> w(mn);
    w.push_back(std::max(0.0, 1.0 - common));
    std::size_t c = d.pick(stage::kContractFace, h, w);
    if (c == mn.size()) {
      std::vector<double> res(nu.size());
      double tot = 0.0;
      for (std::size_t k = 0; k < nu.size(); ++k) {
        res[k] = std::max(0.0, nu[k] - mn[k]);
        tot += res[k];
      }
      if (!(tot > 0.0)) res = nu;
      c = d.pick(stage::kContractFace, h + 1, res);
    }
    for (std::size_t i = f.L.size(); i-- > 0;) {
      const std::size_t v = *V_.index_of(f.L[i]);
      out[v] = static_cast<Symbol>(c % q);
      known[v] = 1;
      c /= q;
    }
  }

  Spec spec_;
  int n_, r_, s_;
  Region V_, dV_, U_, K_;
  std::unique_ptr<FrontierEliminator> elim_V_;
  std::vector<Face> faces_;
  std::vector<Rest> rest_;
};

}  // namespace mrfcftp

#endif  // MRFCFTP_CONTRACTING_COUPLING_HPP
