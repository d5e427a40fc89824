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

#ifndef MRFCFTP_DYNAMICS_HPP
#define MRFCFTP_DYNAMICS_HPP

#include <algorithm>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "mrfcftp/coupling.hpp"

namespace mrfcftp {

// Norm used for the exclusion radius r_n in the chosen rule. The box norm
// matches Pr(chosen) = p (1-p)^{|Lambda_r| - 1}.
enum class ExclusionNorm { box, l1 };

// Parameters of one step of the block dynamics: activation probability,
// base block (from the coupling) and exclusion radius r = diam + 1.
struct StepParams {
  double p = 0.5;
  std::shared_ptr<const GrandCoupling> coupling;
  ExclusionNorm norm = ExclusionNorm::box;
  int r = 1;

  StepParams() = default;
  StepParams(double p_, std::shared_ptr<const GrandCoupling> c,
             ExclusionNorm n = ExclusionNorm::box)
      : p(p_), coupling(std::move(c)), norm(n) {
    if (!(p > 0.0 && p < 1.0)) throw ParameterError("activation probability p must be in (0,1)");
    if (!coupling) throw ParameterError("step needs a coupling");
    if (!coupling->block().contains(Vertex::origin(coupling->block().dim())))
      throw ParameterError("block must contain the origin");
    r = diameter(coupling->block()) + 1;
  }

  const Region& block() const { return coupling->block(); }
  const Region& block_boundary() const { return coupling->boundary_region(); }
};

class Schedule {
 public:
  virtual ~Schedule() = default;
  // Parameters of step n >= 1.
  virtual const StepParams& at(std::uint32_t n) const = 0;
  // Number of steps the schedule defines.
  virtual std::uint32_t length() const { return std::numeric_limits<std::uint32_t>::max(); }
  int radius(std::uint32_t n) const { return at(n).r; }
};

class FixedSchedule final : public Schedule {
 public:
  explicit FixedSchedule(StepParams p) : p_(std::move(p)) {}
  const StepParams& at(std::uint32_t n) const override {
    if (n == 0) throw ContractError("steps are numbered from 1");
    return p_;
  }

 private:
  StepParams p_;
};

// Finitely many explicit steps.
class StagedSchedule final : public Schedule {
 public:
  explicit StagedSchedule(std::vector<StepParams> steps) : steps_(std::move(steps)) {
    if (steps_.empty()) throw ParameterError("staged schedule needs at least one step");
  }
  const StepParams& at(std::uint32_t n) const override {
    if (n == 0) throw ContractError("steps are numbered from 1");
    if (n > steps_.size())
      throw CapacityError("schedule defines only " + std::to_string(steps_.size()) + " steps");
    return steps_[n - 1];
  }
  std::uint32_t length() const override { return static_cast<std::uint32_t>(steps_.size()); }

 private:
  std::vector<StepParams> steps_;
};

// Z^d, or a finite torus used for validation.
class Substrate {
 public:
  static Substrate lattice(int d) {
    Substrate s;
    s.dim_ = d;
    return s;
  }
  static Substrate on_torus(const Torus& t) {
    Substrate s;
    s.dim_ = t.dim();
    s.torus_ = t;
    return s;
  }

  int dim() const { return dim_; }
  const std::optional<Torus>& torus() const { return torus_; }
  Vertex canon(const Vertex& v) const { return torus_ ? torus_->wrap(v) : v; }
  std::string str() const { return torus_ ? "torus:" + torus_->str() : "window"; }

 private:
  int dim_ = 0;
  std::optional<Torus> torus_;
};

// Activation bit A_{u,n}.
inline bool is_active(const RandomField& f, const Vertex& u, std::uint32_t n, double p) {
  return f.uniform({u, n, stage::kActive, 0}) < p;
}

namespace detail {

// Offsets w != 0 with |w| <= r in the chosen norm.
inline std::vector<Vertex> exclusion_offsets(int r, int d, ExclusionNorm norm) {
  std::vector<Vertex> out;
  for (const auto& w : ball(r, d)) {
    if (w == Vertex::origin(d)) continue;
    if (norm == ExclusionNorm::l1 && l1_norm(w) > r) continue;
    out.push_back(w);
  }
  return out;
}

// Per-step geometry on a substrate.
struct StepGeometry {
  std::vector<Vertex> exclusion;  // offsets, distinct modulo the substrate
  std::vector<Vertex> block;      // Delta in region order
  std::vector<Vertex> bnd;        // boundary of Delta in region order
};

inline StepGeometry make_geometry(const StepParams& sp, const Substrate& sub) {
  StepGeometry g;
  const int d = sub.dim();
  if (sp.block().dim() != d) throw ParameterError("block dimension differs from substrate");
  g.block = sp.block().vertices();
  g.bnd = sp.block_boundary().vertices();
  auto ex = exclusion_offsets(sp.r, d, sp.norm);
  if (const auto& t = sub.torus()) {
    if (!t->embeds(sp.block()))
      throw ParameterError("block and its boundary do not embed in torus " + t->str());
    std::set<Vertex> seen;
    const Vertex zero = Vertex::origin(d);
    for (const auto& w : ex) {
      Vertex c = t->wrap(w);
      if (c == zero || !seen.insert(c).second) continue;
      g.exclusion.push_back(w);
    }
  } else {
    g.exclusion = std::move(ex);
  }
  return g;
}

inline bool chosen_with(const RandomField& f, const Substrate& sub, const StepGeometry& g,
                        const Vertex& u, std::uint32_t n, double p) {
  if (!is_active(f, u, n, p)) return false;
  for (const auto& w : g.exclusion)
    if (is_active(f, sub.canon(u + w), n, p)) return false;
  return true;
}

}  // namespace detail

// A'_{v,n}: v is active and no other vertex within r_n is.
inline bool chosen(const RandomField& f, const Schedule& s, const Vertex& v, std::uint32_t n) {
  const StepParams& sp = s.at(n);
  if (!is_active(f, v, n, sp.p)) return false;
  for (const auto& w : detail::exclusion_offsets(sp.r, v.dim, sp.norm))
    if (is_active(f, v + w, n, sp.p)) return false;
  return true;
}

// U_{v,n} = {u in v - Delta_n : u chosen}; at most one vertex.
inline Region update_set(const RandomField& f, const Schedule& s, const Vertex& v, std::uint32_t n) {
  const StepParams& sp = s.at(n);
  std::vector<Vertex> out;
  for (const auto& delta : sp.block())
    if (chosen(f, s, v - delta, n)) out.push_back(v - delta);
  if (out.size() > 1) throw ContractError("more than one chosen vertex covers " + v.str());
  return Region(v.dim, std::move(out));
}

// Counters for set-valued steps.
struct StepStats {
  std::uint64_t blocks = 0;
  std::uint64_t widened = 0;
  std::uint64_t universal = 0;
  std::uint64_t evaluations = 0;
};

// Union over every admitted tau in the product of eta of the coupling's
// output under one draw. Widens to full sets when more than `limit`
// boundary sites are undetermined.
inline std::vector<SymbolSet> block_sets(const GrandCoupling& c, const std::vector<SymbolSet>& eta,
                                         const Draw& d, std::size_t limit, StepStats& st) {
  const std::size_t nb = c.block().size();
  ++st.blocks;
  if (auto u = c.universal(d)) {
    ++st.universal;
    std::vector<SymbolSet> out(nb);
    for (std::size_t i = 0; i < nb; ++i) out[i] = singleton((*u)[i]);
    return out;
  }
  std::size_t undetermined = 0;
  for (SymbolSet e : eta) {
    if (e == 0) throw ContractError("empty symbol set at a block boundary");
    undetermined += !is_singleton(e);
  }
  if (undetermined > limit) {
    ++st.widened;
    return std::vector<SymbolSet>(nb, c.spec().full_set());
  }
  // Odometer over the symbols of each boundary set.
  std::vector<std::vector<Symbol>> choices(eta.size());
  for (std::size_t b = 0; b < eta.size(); ++b)
    for (SymbolSet e = eta[b]; e; e &= e - 1) choices[b].push_back(set_min(e));
  std::vector<std::size_t> idx(eta.size(), 0);
  Config tau(eta.size());
  std::vector<SymbolSet> out(nb, 0);
  const BoundaryFamily* fam = c.family();
  std::vector<std::size_t> members;
  while (true) {
    for (std::size_t b = 0; b < eta.size(); ++b) tau[b] = choices[b][idx[b]];
    if (fam) {
      if (auto m = fam->index_of(tau)) members.push_back(*m);
    } else if (c.admits(tau)) {
      Config w = c.evaluate(tau, d);
      ++st.evaluations;
      for (std::size_t i = 0; i < nb; ++i) out[i] |= singleton(w[i]);
    }
    std::size_t b = eta.size();
    while (b > 0 && idx[b - 1] + 1 == choices[b - 1].size()) idx[--b] = 0;
    if (b == 0) break;
    ++idx[b - 1];
  }
  if (fam && !members.empty()) {
    std::vector<Config> outs;
    c.evaluate_members(members, d, outs);
    st.evaluations += outs.size();
    for (const auto& w : outs)
      for (std::size_t i = 0; i < nb; ++i) out[i] |= singleton(w[i]);
  }
  if (out[0] == 0) throw ContractError("no admitted boundary condition is consistent with the sets");
  return out;
}

// Per-vertex symbol sets on a finite window of Z^d.
struct SetConfig {
  Region region;
  std::vector<SymbolSet> sets;

  SetConfig() = default;
  SetConfig(Region r, std::vector<SymbolSet> s) : region(std::move(r)), sets(std::move(s)) {
    if (sets.size() != region.size()) throw ContractError("set configuration size mismatch");
  }
  static SetConfig full(const Region& r, SymbolSet all) {
    return SetConfig(r, std::vector<SymbolSet>(r.size(), all));
  }
  SymbolSet at(const Vertex& v) const {
    auto i = region.index_of(v);
    if (!i) throw WindowError("vertex " + v.str() + " outside the window");
    return sets[*i];
  }
  bool determined(const Vertex& v) const { return is_singleton(at(v)); }
};

// Sites of `window` whose step-n value is determined by the window: every
// block that could cover them has its boundary inside the window.
inline Region step_output_region(const Region& window, const StepParams& sp) {
  std::vector<Vertex> out;
  for (const auto& w : window) {
    bool ok = true;
    for (const auto& delta : sp.block()) {
      const Vertex u = w - delta;
      for (const auto& b : sp.block_boundary())
        if (!window.contains(u + b)) {
          ok = false;
          break;
        }
      if (!ok) break;
    }
    if (ok) out.push_back(w);
  }
  return Region(window.dim(), std::move(out));
}

namespace detail {

inline Region checked_output(const Region& window, const StepParams& sp, const Region* target) {
  Region out = step_output_region(window, sp);
  if (target) {
    Region miss = region_minus(*target, out);
    if (!miss.empty())
      throw WindowError("window too small: " + std::to_string(miss.size()) +
                        " target vertices lack a full block boundary (first " + miss[0].str() +
                        "); pad the window by r = " + std::to_string(sp.r));
    return *target;
  }
  if (out.empty())
    throw WindowError("window too small: no vertex has all covering block boundaries inside; pad by " +
                      std::to_string(sp.r + 1));
  return out;
}

}  // namespace detail

// f_n on a window configuration. Output lives on `target` (default: the
// largest determined region).
inline Assignment step(const Assignment& xi, std::uint32_t n, const RandomField& field,
                       const Schedule& s, const Region* target = nullptr) {
  const StepParams& sp = s.at(n);
  const Region out_region = detail::checked_output(xi.region, sp, target);
  FieldSource src(field);
  Config out(out_region.size());
  for (std::size_t i = 0; i < out_region.size(); ++i) {
    const Vertex& w = out_region[i];
    Region U = update_set(field, s, w, n);
    if (U.empty()) {
      out[i] = *xi.at(w);
      continue;
    }
    const Vertex u = U[0];
    Config tau(sp.block_boundary().size());
    for (std::size_t b = 0; b < tau.size(); ++b) tau[b] = *xi.at(u + sp.block_boundary()[b]);
    Config y = sp.coupling->evaluate(tau, Draw{&src, u, n});
    out[i] = y[*sp.block().index_of(w - u)];
  }
  return Assignment(out_region, std::move(out));
}

// Set-valued f_n: a sound over-approximation of {f_n(xi) : xi in sc}.
inline SetConfig step_sets(const SetConfig& sc, std::uint32_t n, const RandomField& field,
                           const Schedule& s, std::size_t exhaustion_limit, StepStats* stats = nullptr,
                           const Region* target = nullptr) {
  const StepParams& sp = s.at(n);
  const Region out_region = detail::checked_output(sc.region, sp, target);
  FieldSource src(field);
  StepStats local;
  StepStats& st = stats ? *stats : local;
  std::vector<SymbolSet> out(out_region.size());
  std::unordered_map<Vertex, std::vector<SymbolSet>, VertexHash> blocks;
  for (std::size_t i = 0; i < out_region.size(); ++i) {
    const Vertex& w = out_region[i];
    Region U = update_set(field, s, w, n);
    if (U.empty()) {
      out[i] = sc.at(w);
      continue;
    }
    const Vertex u = U[0];
    auto it = blocks.find(u);
    if (it == blocks.end()) {
      std::vector<SymbolSet> eta(sp.block_boundary().size());
      for (std::size_t b = 0; b < eta.size(); ++b) eta[b] = sc.at(u + sp.block_boundary()[b]);
      it = blocks.emplace(u, block_sets(*sp.coupling, eta, Draw{&src, u, n}, exhaustion_limit, st)).first;
    }
    out[i] = it->second[*sp.block().index_of(w - u)];
  }
  return SetConfig(out_region, std::move(out));
}

// Result of a backward coalescence search at one vertex.
struct CftpResult {
  Vertex v;
  bool coalesced = false;
  Symbol value = 0;
  std::uint32_t T = 0;
  std::int64_t radius_bound = 0;
  std::uint64_t widened_steps = 0;
  std::uint64_t blocks_evaluated = 0;
  std::uint64_t horizons_tried = 0;
  int final_set_size = 0;

  nlohmann::json to_json(std::uint64_t seed, const Spec& spec) const {
    nlohmann::json j{{"seed", seed},
                     {"v", v.str()},
                     {"T_v", T},
                     {"radius_bound", radius_bound},
                     {"widened_steps", widened_steps},
                     {"coalesced", coalesced}};
    if (coalesced) {
      j["value"] = spec.label(value);
    } else {
      j["value"] = nullptr;
      j["final_set_size"] = final_set_size;
    }
    return j;
  }
};

// 2 (r_1 + ... + r_T).
inline std::int64_t radius_bound(const Schedule& s, std::uint32_t T) {
  std::int64_t sum = 0;
  for (std::uint32_t i = 1; i <= T; ++i) sum += s.at(i).r;
  return 2 * sum;
}

// Lazily evaluated bounding chain on Z^d or a torus. Backward sets are
// those of f_1 o ... o f_N applied to every configuration; forward sets
// those of f_t o ... o f_1. Only blocks that the queried vertex depends on
// are evaluated; results are memoised with the range of horizons for
// which they hold.
class SetChain {
 public:
  SetChain(const Spec& spec, const Schedule& sched, const RandomField& field,
           Substrate sub, std::size_t exhaustion_limit)
      : spec_(spec), sched_(sched), field_(field), src_(field_), sub_(std::move(sub)),
        limit_(exhaustion_limit), initial_(spec.full_set()) {
    if (sub_.dim() != spec.dim()) throw ParameterError("substrate dimension differs from spec");
    if (sub_.torus()) torus_tl_.resize(sub_.torus()->size());
  }

  SetChain(const SetChain&) = delete;
  SetChain& operator=(const SetChain&) = delete;

  // Starting set at every vertex (all feasible symbols by default).
  void set_initial(SymbolSet s) {
    initial_ = s;
    back_.clear();
    fwd_.clear();
  }
  SymbolSet initial() const { return initial_; }

  const StepStats& stats() const { return stats_; }
  std::uint64_t scanned_steps() const { return scans_; }

  struct Update {
    std::uint32_t time;
    Vertex chooser;
  };

  // First update of v at a time in [t, N].
  std::optional<Update> next_update(const Vertex& v, std::uint32_t t, std::uint32_t N) {
    if (t > N) return std::nullopt;
    Timeline& tl = timeline(v);
    auto it = std::lower_bound(tl.times.begin(), tl.times.end(), t);
    if (it != tl.times.end()) {
      if (*it > N) return std::nullopt;
      return Update{*it, tl.choosers[it - tl.times.begin()]};
    }
    while (scanned(v, tl) < N) {
      const std::size_t before = tl.times.size();
      scan_one(v, tl);
      if (tl.times.size() > before && tl.times.back() >= t) return Update{tl.times.back(), tl.choosers.back()};
    }
    return std::nullopt;
  }

  // Last update of v at a time in [1, t].
  std::optional<Update> prev_update(const Vertex& v, std::uint32_t t) {
    if (t == 0) return std::nullopt;
    Timeline& tl = timeline(v);
    while (scanned(v, tl) < t) scan_one(v, tl);
    auto it = std::upper_bound(tl.times.begin(), tl.times.end(), t);
    if (it == tl.times.begin()) return std::nullopt;
    --it;
    return Update{*it, tl.choosers[it - tl.times.begin()]};
  }

  // Set at v after f_1 o ... o f_N.
  SymbolSet backward(const Vertex& v0, std::uint32_t N) {
    const Vertex v = sub_.canon(v0);
    auto up = next_update(v, 1, N);
    if (!up) return initial_;
    const Record& rec = ensure(up->chooser, up->time, N, true);
    return rec.sets[position(up->chooser, v, up->time)];
  }

  // Set at v after f_t o ... o f_1.
  SymbolSet forward(const Vertex& v0, std::uint32_t t) {
    const Vertex v = sub_.canon(v0);
    auto up = prev_update(v, t);
    if (!up) return initial_;
    const Record& rec = ensure(up->chooser, up->time, 0, false);
    return rec.sets[position(up->chooser, v, up->time)];
  }

  const Substrate& substrate() const { return sub_; }

 private:
  struct Timeline {
    std::uint32_t scanned = 0;
    std::vector<std::uint32_t> times;
    std::vector<Vertex> choosers;
  };

  struct Key {
    Vertex u;
    std::uint32_t t;
    bool operator==(const Key& o) const { return t == o.t && u == o.u; }
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept {
      return VertexHash{}(k.u) ^ (static_cast<std::size_t>(k.t) * 0x9E3779B97F4A7C15ull);
    }
  };

  // Block output together with the horizons [reach, valid_to] it holds for.
  struct Record {
    std::vector<SymbolSet> sets;
    std::uint32_t reach = 0;
    std::uint32_t valid_to = std::numeric_limits<std::uint32_t>::max();
  };

  const detail::StepGeometry& geometry(std::uint32_t n) {
    const StepParams* sp = &sched_.at(n);
    auto it = geom_.find(sp);
    if (it == geom_.end()) it = geom_.emplace(sp, detail::make_geometry(*sp, sub_)).first;
    return it->second;
  }

  Timeline& timeline(const Vertex& v) {
    if (const auto& t = sub_.torus()) return torus_tl_[t->index(v)];
    return tl_[v];
  }

  std::uint32_t scanned(const Vertex& v, const Timeline& tl) const {
    (void)v;
    return sub_.torus() ? torus_scanned_ : tl.scanned;
  }

  // Advances the scan of v by one step. On a torus every site advances
  // together, reading each activation bit once.
  void scan_one(const Vertex& v, Timeline& tl) {
    if (sub_.torus()) {
      scan_torus();
      return;
    }
    const std::uint32_t n = tl.scanned + 1;
    if (n > sched_.length()) throw CapacityError("scan beyond the schedule's last step");
    const StepParams& sp = sched_.at(n);
    const auto& g = geometry(n);
    ++scans_;
    for (const auto& delta : g.block) {
      const Vertex u = v - delta;
      if (detail::chosen_with(field_, sub_, g, u, n, sp.p)) {
        tl.times.push_back(n);
        tl.choosers.push_back(u);
        break;
      }
    }
    tl.scanned = n;
  }

  void scan_torus() {
    const Torus& T = *sub_.torus();
    const std::uint32_t n = torus_scanned_ + 1;
    if (n > sched_.length()) throw CapacityError("scan beyond the schedule's last step");
    const StepParams& sp = sched_.at(n);
    const auto& g = geometry(n);
    ++scans_;
    const std::size_t N = T.size();
    active_.assign(N, 0);
    for (std::size_t i = 0; i < N; ++i) active_[i] = is_active(field_, T.sites()[i], n, sp.p);
    for (std::size_t i = 0; i < N; ++i) {
      if (!active_[i]) continue;
      bool ok = true;
      for (const auto& w : g.exclusion)
        if (active_[T.index(T.sites()[i] + w)]) {
          ok = false;
          break;
        }
      if (!ok) continue;
      const Vertex& u = T.sites()[i];
      for (const auto& delta : g.block) {
        Timeline& tl = torus_tl_[T.index(u + delta)];
        tl.times.push_back(n);
        tl.choosers.push_back(u);
      }
    }
    torus_scanned_ = n;
  }

  std::size_t position(const Vertex& u, const Vertex& v, std::uint32_t t) {
    const auto& g = geometry(t);
    for (std::size_t i = 0; i < g.block.size(); ++i)
      if (sub_.canon(u + g.block[i]) == v) return i;
    throw ContractError("vertex not covered by its chooser's block");
  }

  const Record* lookup(const std::unordered_map<Key, Record, KeyHash>& memo, const Key& k,
                       std::uint32_t N, bool backward) const {
    auto it = memo.find(k);
    if (it == memo.end()) return nullptr;
    if (backward && (it->second.reach > N || it->second.valid_to < N)) return nullptr;
    return &it->second;
  }

  // Evaluates block (u, t) and, depth first, every block it depends on.
  const Record& ensure(const Vertex& u0, std::uint32_t t0, std::uint32_t N, bool backward) {
    auto& memo = backward ? back_ : fwd_;
    const Key root{u0, t0};
    if (const Record* r = lookup(memo, root, N, backward)) return *r;
    std::vector<Key> stack{root};
    std::vector<SymbolSet> eta;
    while (!stack.empty()) {
      const Key k = stack.back();
      if (lookup(memo, k, N, backward)) {
        stack.pop_back();
        continue;
      }
      const StepParams& sp = sched_.at(k.t);
      const auto& g = geometry(k.t);
      const Draw d{&src_, k.u, k.t};
      Record rec;
      rec.reach = k.t;
      if (auto w = sp.coupling->universal(d)) {
        ++stats_.blocks;
        ++stats_.universal;
        rec.sets.resize(w->size());
        for (std::size_t i = 0; i < w->size(); ++i) rec.sets[i] = singleton((*w)[i]);
        memo[k] = std::move(rec);
        stack.pop_back();
        continue;
      }
      bool ready = true;
      eta.assign(g.bnd.size(), 0);
      for (std::size_t b = 0; b < g.bnd.size(); ++b) {
        const Vertex x = sub_.canon(k.u + g.bnd[b]);
        auto up = backward ? next_update(x, k.t + 1, N) : prev_update(x, k.t - 1);
        if (!up) {
          eta[b] = initial_;
          if (backward) rec.valid_to = std::min(rec.valid_to, N);
          continue;
        }
        const Key dep{up->chooser, up->time};
        const Record* r = lookup(memo, dep, N, backward);
        if (!r) {
          stack.push_back(dep);
          ready = false;
          continue;
        }
        if (!ready) continue;
        eta[b] = r->sets[position(up->chooser, x, up->time)];
        rec.reach = std::max(rec.reach, r->reach);
        rec.valid_to = std::min(rec.valid_to, r->valid_to);
      }
      if (!ready) continue;
      rec.sets = block_sets(*sp.coupling, eta, d, limit_, stats_);
      memo[k] = std::move(rec);
      stack.pop_back();
    }
    return *lookup(memo, root, N, backward);
  }

  Spec spec_;
  const Schedule& sched_;
  RandomField field_;
  FieldSource src_;
  Substrate sub_;
  std::size_t limit_;
  SymbolSet initial_;
  StepStats stats_;
  std::uint64_t scans_ = 0;
  std::unordered_map<const StepParams*, detail::StepGeometry> geom_;
  std::unordered_map<Vertex, Timeline, VertexHash> tl_;
  std::vector<Timeline> torus_tl_;
  std::uint32_t torus_scanned_ = 0;
  std::vector<char> active_;
  std::unordered_map<Key, Record, KeyHash> back_, fwd_;
};

namespace detail {

// Least horizon in [1, cap] at which pred holds, given monotonicity;
// doubling then bisection.
template <class Pred>
std::optional<std::uint32_t> least_horizon(std::uint32_t cap, std::uint64_t& tried, Pred&& pred) {
  std::uint32_t lo = 0, hi = 1;
  while (true) {
    if (hi > cap) hi = cap;
    ++tried;
    if (pred(hi)) break;
    if (hi == cap) return std::nullopt;
    lo = hi;
    hi = hi > cap / 2 ? cap : 2 * hi;
  }
  // pred(lo) false (or lo = 0), pred(hi) true.
  while (hi - lo > 1) {
    const std::uint32_t mid = lo + (hi - lo) / 2;
    ++tried;
    if (pred(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

}  // namespace detail

// Backward coalescence at v: T_v is the least horizon at which the set at
// v is a singleton; the value is read there.
inline CftpResult cftp_value(SetChain& chain, const Schedule& s, const Vertex& v,
                             std::uint32_t horizon_cap) {
  CftpResult res;
  res.v = v;
  const std::uint32_t cap = std::min(horizon_cap, s.length());
  if (is_singleton(chain.initial())) {
    res.coalesced = true;
    res.value = set_min(chain.initial());
    res.T = 0;
    res.radius_bound = 0;
    return res;
  }
  auto T = detail::least_horizon(cap, res.horizons_tried, [&](std::uint32_t N) {
    return is_singleton(chain.backward(v, N));
  });
  res.widened_steps = chain.stats().widened;
  res.blocks_evaluated = chain.stats().blocks;
  if (!T) {
    res.coalesced = false;
    res.T = cap;
    res.final_set_size = cap ? set_size(chain.backward(v, cap)) : set_size(chain.initial());
    return res;
  }
  res.coalesced = true;
  res.T = *T;
  res.value = set_min(chain.backward(v, *T));
  res.radius_bound = radius_bound(s, *T);
  return res;
}

inline CftpResult cftp_value(const Spec& spec, const Schedule& s, const RandomField& field,
                             const Vertex& v, std::uint32_t horizon_cap,
                             std::size_t exhaustion_limit = 8) {
  SetChain chain(spec, s, field, Substrate::lattice(spec.dim()), exhaustion_limit);
  return cftp_value(chain, s, v, horizon_cap);
}

// Reference implementation on a materialised window: full sets on
// v + Lambda_{2(r_1 + ... + r_N)}, then f_N, ..., f_1 with step_sets.
// Horizons double until v is determined; T is then located by bisection.
inline CftpResult cftp_value_windowed(const Spec& spec, const Schedule& s, const RandomField& field,
                                      const Vertex& v, std::uint32_t horizon_cap,
                                      std::size_t exhaustion_limit = 8) {
  CftpResult res;
  res.v = v;
  StepStats st;
  auto run = [&](std::uint32_t N) {
    const std::int64_t R = radius_bound(s, N);
    SetConfig sc = SetConfig::full(ball(static_cast<int>(R), spec.dim()).translate(v), spec.full_set());
    for (std::uint32_t n = N; n >= 1; --n) sc = step_sets(sc, n, field, s, exhaustion_limit, &st);
    return sc.at(v);
  };
  auto T = detail::least_horizon(std::min(horizon_cap, s.length()), res.horizons_tried,
                                 [&](std::uint32_t N) { return is_singleton(run(N)); });
  res.widened_steps = st.widened;
  res.blocks_evaluated = st.blocks;
  if (!T) {
    res.T = horizon_cap;
    return res;
  }
  res.coalesced = true;
  res.T = *T;
  res.value = set_min(run(*T));
  res.radius_bound = radius_bound(s, *T);
  return res;
}

// First time the forward set at v is a singleton.
struct ForwardResult {
  std::uint32_t time = 0;
  bool censored = false;
};

inline ForwardResult forward_coalescence_sample(SetChain& chain, const Vertex& v,
                                                std::uint32_t horizon_cap) {
  if (is_singleton(chain.initial())) return {0, false};
  std::uint32_t t = 1;
  while (t <= horizon_cap) {
    auto up = chain.next_update(chain.substrate().canon(v), t, horizon_cap);
    if (!up) break;
    if (is_singleton(chain.forward(v, up->time))) return {up->time, false};
    t = up->time + 1;
  }
  return {horizon_cap, true};
}

inline ForwardResult forward_coalescence_sample(const Spec& spec, const Schedule& s,
                                                const RandomField& field, const Vertex& v,
                                                std::uint32_t horizon_cap,
                                                std::size_t exhaustion_limit = 8) {
  SetChain chain(spec, s, field, Substrate::lattice(spec.dim()), exhaustion_limit);
  return forward_coalescence_sample(chain, v, horizon_cap);
}

// psi_1 of the forward set at v for n = 0..N (1 when not a singleton).
inline std::vector<std::uint8_t> forward_uncertainty(SetChain& chain, const Vertex& v, std::uint32_t N) {
  std::vector<std::uint8_t> out(N + 1, 0);
  std::uint8_t cur = !is_singleton(chain.initial());
  std::uint32_t t = 1;
  out[0] = cur;
  while (t <= N) {
    auto up = chain.next_update(chain.substrate().canon(v), t, N);
    const std::uint32_t until = up ? up->time : N + 1;
    for (std::uint32_t n = t; n < until; ++n) out[n] = cur;
    if (!up) break;
    cur = !is_singleton(chain.forward(v, up->time));
    out[up->time] = cur;
    t = up->time + 1;
  }
  return out;
}

// A perfect sample of the whole torus.
struct TorusSample {
  Config values;  // aligned with torus.sites()
  std::uint32_t horizon = 0;
  bool coalesced = false;
  std::uint64_t widened_steps = 0;
};

inline TorusSample cftp_torus(const Spec& spec, const Schedule& s, const RandomField& field,
                              const Torus& torus, std::uint32_t horizon_cap,
                              std::size_t exhaustion_limit = 8) {
  SetChain chain(spec, s, field, Substrate::on_torus(torus), exhaustion_limit);
  TorusSample out;
  out.values.assign(torus.size(), 0);
  const std::uint32_t cap = std::min(horizon_cap, s.length());
  for (std::uint32_t N = 1;; N = N > cap / 2 ? cap : 2 * N) {
    bool all = true;
    for (std::size_t i = 0; i < torus.size() && all; ++i) {
      SymbolSet x = chain.backward(torus.sites()[i], N);
      if (!is_singleton(x)) all = false;
      out.values[i] = set_min(x);
    }
    if (all) {
      out.coalesced = true;
      out.horizon = N;
      break;
    }
    if (N == cap) {
      out.horizon = cap;
      break;
    }
  }
  out.widened_steps = chain.stats().widened;
  return out;
}

// Activation decision through a variate source, so that exact integration
// can branch on it. Agrees with is_active on a field source.
inline bool active_from(VariateSource& src, const VariateAddress& a, double p) {
  if (auto u = src.raw(a)) return *u < p;
  const double w[2] = {p, 1.0 - p};
  return src.pick(a, w) == 0;
}

// f_n on a full torus configuration with every decision read from src.
inline Config step_torus(const Config& xi, std::uint32_t n, VariateSource& src, const Schedule& s,
                         const Torus& torus) {
  const StepParams& sp = s.at(n);
  const Substrate sub = Substrate::on_torus(torus);
  const auto g = detail::make_geometry(sp, sub);
  const std::size_t N = torus.size();
  std::vector<char> act(N);
  for (std::size_t i = 0; i < N; ++i) act[i] = active_from(src, {torus.sites()[i], n, stage::kActive, 0}, sp.p);
  Config out = xi;
  for (std::size_t i = 0; i < N; ++i) {
    if (!act[i]) continue;
    const Vertex& u = torus.sites()[i];
    bool ok = true;
    for (const auto& w : g.exclusion) ok = ok && !act[torus.index(u + w)];
    if (!ok) continue;
    Config tau(g.bnd.size());
    for (std::size_t b = 0; b < g.bnd.size(); ++b) tau[b] = xi[torus.index(u + g.bnd[b])];
    Config y = sp.coupling->evaluate(tau, Draw{&src, u, n});
    for (std::size_t k = 0; k < g.block.size(); ++k) out[torus.index(u + g.block[k])] = y[k];
  }
  return out;
}

}  // namespace mrfcftp

#endif  // MRFCFTP_DYNAMICS_HPP
