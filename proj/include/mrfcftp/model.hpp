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

#ifndef MRFCFTP_MODEL_HPP
#define MRFCFTP_MODEL_HPP

#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mrfcftp/errors.hpp"
#include "mrfcftp/lattice.hpp"

namespace mrfcftp {

using Symbol = std::uint8_t;
using Config = std::vector<Symbol>;
// Bit s set means symbol s is in the set.
using SymbolSet = std::uint64_t;

inline constexpr int kMaxSymbols = 64;

inline SymbolSet singleton(Symbol s) { return SymbolSet{1} << s; }
inline int set_size(SymbolSet a) { return std::popcount(a); }
inline bool is_singleton(SymbolSet a) { return std::has_single_bit(a); }
inline Symbol set_min(SymbolSet a) {
  return static_cast<Symbol>(std::countr_zero(a));
}

// Nearest-neighbour specification: P^tau_V(w) is proportional to the
// product of vertex weights over V and edge weights over edges meeting V.
// An edge weight of zero encodes a hard constraint.
class Spec {
 public:
  Spec() = default;
  Spec(std::string name, int dim, std::vector<std::string> labels,
       std::vector<double> vertex_weights, std::vector<double> edge_weights)
      : name_(std::move(name)),
        dim_(dim),
        labels_(std::move(labels)),
        vw_(std::move(vertex_weights)),
        ew_(std::move(edge_weights)) {
    validate();
  }

  const std::string& name() const { return name_; }
  int dim() const { return dim_; }
  int q() const { return static_cast<int>(labels_.size()); }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& label(Symbol s) const { return labels_[s]; }

  double vertex_weight(Symbol s) const { return vw_[s]; }
  double edge_weight(Symbol a, Symbol b) const { return ew_[a * q() + b]; }
  bool allowed(Symbol a, Symbol b) const { return ew_[a * q() + b] > 0.0; }

  SymbolSet full_set() const {
    return q() == 64 ? ~SymbolSet{0} : (SymbolSet{1} << q()) - 1;
  }

  // P^tau_V does not depend on tau: no hard constraints and all edge
  // weights equal.
  bool boundary_independent() const {
    for (double w : ew_)
      if (w != ew_[0]) return false;
    return true;
  }

  // Unordered allowed pairs (a <= b).
  std::vector<std::pair<Symbol, Symbol>> feasible_pairs() const {
    std::vector<std::pair<Symbol, Symbol>> out;
    for (int a = 0; a < q(); ++a)
      for (int b = a; b < q(); ++b)
        if (allowed(a, b)) out.emplace_back(a, b);
    return out;
  }

  std::optional<Symbol> symbol_of(const std::string& label) const {
    for (int i = 0; i < q(); ++i)
      if (labels_[i] == label) return static_cast<Symbol>(i);
    return std::nullopt;
  }

  std::string describe() const {
    std::string s = name_ + " d=" + std::to_string(dim_) + " S={";
    for (int i = 0; i < q(); ++i) s += (i ? "," : "") + labels_[i];
    return s + "}";
  }

 private:
  void validate() const {
    if (dim_ < 1 || dim_ > kMaxDim) throw ParameterError("dimension d");
    const int n = q();
    if (n < 2) throw ParameterError("alphabet must have at least 2 symbols");
    if (n > kMaxSymbols) throw ParameterError("alphabet too large");
    if (static_cast<int>(vw_.size()) != n)
      throw ParameterError("vertex weight table size");
    if (static_cast<int>(ew_.size()) != n * n)
      throw ParameterError("edge weight table size");
    for (int a = 0; a < n; ++a) {
      if (!(vw_[a] > 0.0) || !std::isfinite(vw_[a]))
        throw ParameterError("vertex weight of '" + labels_[a] +
                             "' must be positive");
      bool partner = false;
      for (int b = 0; b < n; ++b) {
        double w = ew_[a * n + b];
        if (w != ew_[b * n + a])
          throw ParameterError("edge weights must be symmetric");
        if (w < 0.0 || !std::isfinite(w))
          throw ParameterError("edge weights must be finite and >= 0");
        partner = partner || w > 0.0;
      }
      if (!partner)
        throw ParameterError("symbol '" + labels_[a] + "' has no allowed partner");
      for (int b = a + 1; b < n; ++b)
        if (labels_[a] == labels_[b]) throw ParameterError("duplicate label");
    }
  }

  std::string name_;
  int dim_ = 0;
  std::vector<std::string> labels_;
  std::vector<double> vw_;
  std::vector<double> ew_;
};

using ModelParams = std::map<std::string, double>;

namespace detail {

inline double param(const ModelParams& p, const std::string& key) {
  auto it = p.find(key);
  if (it == p.end()) throw ParameterError("missing model parameter '" + key + "'");
  return it->second;
}

inline double param_or(const ModelParams& p, const std::string& key, double dflt) {
  auto it = p.find(key);
  return it == p.end() ? dflt : it->second;
}

inline int int_param(const ModelParams& p, const std::string& key, double dflt) {
  double v = param_or(p, key, dflt);
  if (v != std::floor(v)) throw ParameterError("parameter '" + key + "' must be an integer");
  return static_cast<int>(v);
}

inline std::vector<std::string> numbered(int from, int count) {
  std::vector<std::string> out;
  for (int i = 0; i < count; ++i) out.push_back(std::to_string(from + i));
  return out;
}

}  // namespace detail

inline Spec potts(int q, double beta, int d) {
  if (q < 2) throw ParameterError("q must be >= 2 for potts");
  if (!std::isfinite(beta)) throw ParameterError("beta must be finite (use coloring)");
  std::vector<double> ew(q * q, 1.0);
  for (int a = 0; a < q; ++a) ew[a * q + a] = std::exp(beta);
  return Spec("potts", d, detail::numbered(1, q), std::vector<double>(q, 1.0), ew);
}

inline Spec ising(double beta, int d) {
  Spec s = potts(2, beta, d);
  return s;
}

inline Spec coloring(int q, int d) {
  if (q < 3) throw ParameterError("q must be >= 3 for coloring");
  std::vector<double> ew(q * q, 1.0);
  for (int a = 0; a < q; ++a) ew[a * q + a] = 0.0;
  return Spec("coloring", d, detail::numbered(1, q), std::vector<double>(q, 1.0), ew);
}

inline Spec hardcore(double lambda, int d) {
  if (!(lambda > 0.0)) throw ParameterError("lambda must be > 0 for hardcore");
  return Spec("hardcore", d, {"0", "1"}, {1.0, lambda}, {1.0, 1.0, 1.0, 0.0});
}

// Symbols 0..q; distinct nonzero types may not be adjacent.
inline Spec widom_rowlinson(int q, double lambda, int d) {
  if (q < 1) throw ParameterError("q must be >= 1 for widom_rowlinson");
  if (!(lambda > 0.0)) throw ParameterError("lambda must be > 0 for widom_rowlinson");
  const int n = q + 1;
  std::vector<double> vw(n, lambda);
  vw[0] = 1.0;
  std::vector<double> ew(n * n, 0.0);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      if (a == 0 || b == 0 || a == b) ew[a * n + b] = 1.0;
  return Spec("widom_rowlinson", d, detail::numbered(0, n), vw, ew);
}

// Symbols -2,-1,1,2 with x_u x_v >= -1 and weight lambda^|x|.
inline Spec beach(double lambda, int d) {
  if (!(lambda > 0.0)) throw ParameterError("lambda must be > 0 for beach");
  const int vals[4] = {-2, -1, 1, 2};
  std::vector<double> vw(4), ew(16);
  for (int a = 0; a < 4; ++a) {
    vw[a] = std::pow(lambda, std::abs(vals[a]));
    for (int b = 0; b < 4; ++b) ew[a * 4 + b] = vals[a] * vals[b] >= -1 ? 1.0 : 0.0;
  }
  return Spec("beach", d, {"-2", "-1", "1", "2"}, vw, ew);
}

// Built-in models by name. Custom models come from model_config.hpp.
inline Spec make_model(const std::string& name, const ModelParams& p, int d) {
  if (name == "potts")
    return potts(detail::int_param(p, "q", 2), detail::param(p, "beta"), d);
  if (name == "ising") return ising(detail::param(p, "beta"), d);
  if (name == "coloring") return coloring(detail::int_param(p, "q", 3), d);
  if (name == "hardcore") return hardcore(detail::param(p, "lambda"), d);
  if (name == "widom_rowlinson")
    return widom_rowlinson(detail::int_param(p, "q", 2), detail::param(p, "lambda"), d);
  if (name == "beach") return beach(detail::param(p, "lambda"), d);
  throw ParameterError("unknown model '" + name + "'");
}

// Assignment of symbols to the vertices of a region, aligned with the
// region's lexicographic order. Used for boundary conditions and for
// configurations alike.
struct Assignment {
  Region region;
  Config values;

  Assignment() = default;
  Assignment(Region r, Config v) : region(std::move(r)), values(std::move(v)) {
    if (values.size() != region.size())
      throw ContractError("assignment size does not match its region");
  }

  std::optional<Symbol> at(const Vertex& v) const {
    auto i = region.index_of(v);
    if (!i) return std::nullopt;
    return values[*i];
  }
};

using BoundaryCondition = Assignment;

inline Assignment constant_assignment(const Region& r, Symbol s) {
  return Assignment(r, Config(r.size(), s));
}

// Unnormalised weight of w on V given tau on the boundary of V.
inline double weight(const Spec& spec, const Region& V, const BoundaryCondition& tau,
                     const Config& w) {
  if (w.size() != V.size()) throw ContractError("configuration size");
  double out = 1.0;
  for (std::size_t i = 0; i < V.size(); ++i) {
    out *= spec.vertex_weight(w[i]);
    for (const auto& nb : neighbors(V[i])) {
      if (auto j = V.index_of(nb)) {
        // Interior edge, counted once from its smaller endpoint.
        if (*j > i) out *= spec.edge_weight(w[i], w[*j]);
      } else {
        auto t = tau.at(nb);
        if (!t) throw ContractError("boundary condition misses " + nb.str());
        out *= spec.edge_weight(w[i], *t);
      }
      if (out == 0.0) return 0.0;
    }
  }
  return out;
}

}  // namespace mrfcftp

#endif  // MRFCFTP_MODEL_HPP
