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

#ifndef MRFCFTP_VARIATES_HPP
#define MRFCFTP_VARIATES_HPP

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "mrfcftp/errors.hpp"
#include "mrfcftp/randomness.hpp"

namespace mrfcftp {

// Inverse CDF: the cell of [0,1), split proportionally to `w`, holding u.
// Zero-weight cells are never returned.
inline std::size_t pick_index(double u, std::span<const double> w) {
  double total = 0.0;
  for (double x : w) total += x;
  if (!(total > 0.0)) throw ContractError("pick over zero total weight");
  const double target = u * total;
  double cum = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] <= 0.0) continue;
    cum += w[i];
    last = i;
    if (target < cum) return i;
  }
  return last;
}

// Source of the decisions a coupling makes. Every random choice is an
// inverse-CDF pick at an address, which lets the same code run on a
// pseudo-random field or under exact integration.
class VariateSource {
 public:
  virtual ~VariateSource() = default;
  virtual std::size_t pick(const VariateAddress& a, std::span<const double> w) = 0;
  // The underlying uniform, when the source has one.
  virtual std::optional<double> raw(const VariateAddress&) { return std::nullopt; }
};

class FieldSource final : public VariateSource {
 public:
  explicit FieldSource(const RandomField& f) : field_(f) {}
  std::size_t pick(const VariateAddress& a, std::span<const double> w) override {
    return pick_index(field_.uniform(a), w);
  }
  std::optional<double> raw(const VariateAddress& a) override { return field_.uniform(a); }
  const RandomField& field() const { return field_; }

 private:
  const RandomField& field_;
};

// The randomness B_{u,n} handed to a coupling: a source bound to one
// (site, time).
struct Draw {
  VariateSource* src = nullptr;
  Vertex site;
  std::uint32_t time = 0;

  VariateAddress address(std::uint32_t stage, std::uint64_t counter) const {
    return {site, time, stage, counter};
  }
  std::size_t pick(std::uint32_t stage, std::uint64_t counter, std::span<const double> w) const {
    return src->pick(address(stage, counter), w);
  }
  std::optional<double> raw(std::uint32_t stage, std::uint64_t counter) const {
    return src->raw(address(stage, counter));
  }
};

// Exact integration over every decision made through pick(). Each address
// is assigned a sub-interval of [0,1); a pick whose interval straddles
// cells of the current partition forces a split and a re-run. Completed
// runs are atoms weighted by the product of their interval lengths.
class ExactExplorer {
 public:
  template <class R>
  struct Atom {
    R outcome;
    double weight;
  };

  explicit ExactExplorer(std::size_t max_runs = 1u << 22) : max_runs_(max_runs) {}

  template <class Fn>
  auto explore(Fn&& fn) -> std::vector<Atom<decltype(fn(std::declval<VariateSource&>()))>> {
    using R = decltype(fn(std::declval<VariateSource&>()));
    std::vector<Atom<R>> atoms;
    std::vector<Assignment> stack{Assignment{}};
    std::size_t runs = 0;
    while (!stack.empty()) {
      Assignment cur = std::move(stack.back());
      stack.pop_back();
      if (++runs > max_runs_)
        throw CapacityError("exact-joint exploration exceeds " + std::to_string(max_runs_) +
                            " runs");
      Source src(cur);
      try {
        R out = fn(src);
        double w = 1.0;
        for (const auto& [a, iv] : cur) w *= iv.second - iv.first;
        atoms.push_back({std::move(out), w});
      } catch (const Split& s) {
        for (const auto& iv : s.pieces) {
          Assignment child = cur;
          child[s.address] = iv;
          stack.push_back(std::move(child));
        }
      }
    }
    return atoms;
  }

 private:
  using Interval = std::pair<double, double>;
  using Assignment = std::map<VariateAddress, Interval>;

  struct Split {
    VariateAddress address;
    std::vector<Interval> pieces;
  };

  class Source final : public VariateSource {
   public:
    explicit Source(const Assignment& a) : assigned_(a) {}
    std::size_t pick(const VariateAddress& a, std::span<const double> w) override {
      Interval iv{0.0, 1.0};
      if (auto it = assigned_.find(a); it != assigned_.end()) iv = it->second;
      double total = 0.0;
      for (double x : w) total += x;
      if (!(total > 0.0)) throw ContractError("pick over zero total weight");
      // Slivers below this width come from rounding of equal cut points.
      const double eps = 1e-15;
      std::vector<Interval> pieces;
      std::size_t hit = 0;
      double cum = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i) {
        if (w[i] <= 0.0) continue;
        const double lo = cum / total;
        cum += w[i];
        const double hi = cum / total;
        const double a0 = std::max(lo, iv.first), b0 = std::min(hi, iv.second);
        if (b0 - a0 > eps) {
          pieces.emplace_back(a0, b0);
          hit = i;
        }
      }
      if (pieces.size() == 1) return hit;
      if (pieces.empty()) {
        // The interval lies within rounding noise of a cut; fall back to
        // the cell containing its midpoint.
        return pick_index(0.5 * (iv.first + iv.second), w);
      }
      // Absorb dropped slivers so the pieces tile the interval.
      pieces.front().first = iv.first;
      for (std::size_t k = 1; k < pieces.size(); ++k) pieces[k].first = pieces[k - 1].second;
      pieces.back().second = iv.second;
      throw Split{a, std::move(pieces)};
    }

   private:
    const Assignment& assigned_;
  };

  std::size_t max_runs_;
};

}  // namespace mrfcftp

#endif  // MRFCFTP_VARIATES_HPP
