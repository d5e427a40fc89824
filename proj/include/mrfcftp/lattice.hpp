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

#ifndef MRFCFTP_LATTICE_HPP
#define MRFCFTP_LATTICE_HPP

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrfcftp/errors.hpp"

namespace mrfcftp {

inline constexpr int kMaxDim = 4;

// A point of Z^d. Unused trailing coordinates are kept at zero so that
// comparison and hashing can look at the whole array.
struct Vertex {
  std::array<std::int32_t, kMaxDim> c{};
  int dim = 0;

  Vertex() = default;
  explicit Vertex(int d) : dim(d) { check_dim(d); }
  Vertex(std::initializer_list<int> coords)
      : dim(static_cast<int>(coords.size())) {
    check_dim(dim);
    int i = 0;
    for (int x : coords) c[i++] = x;
  }

  static Vertex origin(int d) { return Vertex(d); }

  std::int32_t operator[](int i) const { return c[i]; }
  std::int32_t& operator[](int i) { return c[i]; }

  Vertex operator+(const Vertex& o) const {
    Vertex r(dim);
    for (int i = 0; i < dim; ++i) r.c[i] = c[i] + o.c[i];
    return r;
  }
  Vertex operator-(const Vertex& o) const {
    Vertex r(dim);
    for (int i = 0; i < dim; ++i) r.c[i] = c[i] - o.c[i];
    return r;
  }
  Vertex operator-() const {
    Vertex r(dim);
    for (int i = 0; i < dim; ++i) r.c[i] = -c[i];
    return r;
  }

  friend bool operator==(const Vertex& a, const Vertex& b) {
    return a.dim == b.dim && a.c == b.c;
  }
  friend bool operator<(const Vertex& a, const Vertex& b) {
    if (a.dim != b.dim) return a.dim < b.dim;
    return a.c < b.c;
  }

  std::string str() const {
    std::ostringstream os;
    os << '(';
    for (int i = 0; i < dim; ++i) os << (i ? "," : "") << c[i];
    os << ')';
    return os.str();
  }

 private:
  static void check_dim(int d) {
    if (d < 1 || d > kMaxDim)
      throw ParameterError("dimension must be in [1," +
                           std::to_string(kMaxDim) + "], got " +
                           std::to_string(d));
  }
};

struct VertexHash {
  std::size_t operator()(const Vertex& v) const noexcept {
    std::uint64_t h = 0x9E3779B97F4A7C15ull ^ static_cast<std::uint64_t>(v.dim);
    for (int i = 0; i < kMaxDim; ++i) {
      h ^= static_cast<std::uint32_t>(v.c[i]);
      h *= 0xBF58476D1CE4E5B9ull;
      h ^= h >> 31;
    }
    return static_cast<std::size_t>(h);
  }
};

inline int l1_norm(const Vertex& v) {
  int s = 0;
  for (int i = 0; i < v.dim; ++i) s += std::abs(v.c[i]);
  return s;
}

inline int linf_norm(const Vertex& v) {
  int s = 0;
  for (int i = 0; i < v.dim; ++i) s = std::max(s, std::abs(v.c[i]));
  return s;
}

inline int l1_dist(const Vertex& a, const Vertex& b) { return l1_norm(a - b); }

// The 2d nearest neighbours in the order -e_1, +e_1, -e_2, +e_2, ...
inline std::vector<Vertex> neighbors(const Vertex& v) {
  std::vector<Vertex> out;
  out.reserve(2 * v.dim);
  for (int i = 0; i < v.dim; ++i) {
    Vertex a = v, b = v;
    a.c[i] -= 1;
    b.c[i] += 1;
    out.push_back(a);
    out.push_back(b);
  }
  return out;
}

// Finite subset of Z^d, sorted lexicographically and free of duplicates.
class Region {
 public:
  Region() = default;
  explicit Region(int d) : dim_(d) {}
  Region(int d, std::vector<Vertex> vs) : dim_(d), v_(std::move(vs)) {
    for (const auto& x : v_)
      if (x.dim != d) throw ParameterError("region vertex of wrong dimension");
    std::sort(v_.begin(), v_.end());
    v_.erase(std::unique(v_.begin(), v_.end()), v_.end());
  }

  int dim() const { return dim_; }
  std::size_t size() const { return v_.size(); }
  bool empty() const { return v_.empty(); }
  const Vertex& operator[](std::size_t i) const { return v_[i]; }
  const std::vector<Vertex>& vertices() const { return v_; }
  auto begin() const { return v_.begin(); }
  auto end() const { return v_.end(); }

  bool contains(const Vertex& x) const {
    return std::binary_search(v_.begin(), v_.end(), x);
  }
  std::optional<std::size_t> index_of(const Vertex& x) const {
    auto it = std::lower_bound(v_.begin(), v_.end(), x);
    if (it == v_.end() || !(*it == x)) return std::nullopt;
    return static_cast<std::size_t>(it - v_.begin());
  }

  Region translate(const Vertex& u) const {
    std::vector<Vertex> out;
    out.reserve(v_.size());
    for (const auto& x : v_) out.push_back(x + u);
    return Region(dim_, std::move(out));
  }

  friend bool operator==(const Region& a, const Region& b) {
    return a.dim_ == b.dim_ && a.v_ == b.v_;
  }

  // One vertex per line, comma-separated coordinates.
  std::string to_text() const {
    std::ostringstream os;
    for (const auto& x : v_) {
      for (int i = 0; i < x.dim; ++i) os << (i ? "," : "") << x.c[i];
      os << '\n';
    }
    return os.str();
  }

  static Region from_text(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    std::vector<Vertex> vs;
    int d = 0;
    while (std::getline(is, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      std::vector<int> coords;
      std::istringstream ls(line);
      std::string tok;
      while (std::getline(ls, tok, ',')) coords.push_back(std::stoi(tok));
      if (d == 0) d = static_cast<int>(coords.size());
      if (static_cast<int>(coords.size()) != d)
        throw ParameterError("inconsistent dimension in region text: " + line);
      Vertex v(d);
      for (int i = 0; i < d; ++i) v.c[i] = coords[i];
      vs.push_back(v);
    }
    if (d == 0) throw ParameterError("empty region text");
    return Region(d, std::move(vs));
  }

 private:
  int dim_ = 0;
  std::vector<Vertex> v_;
};

// Lambda_r = [-r, r]^d.
inline Region ball(int r, int d) {
  if (r < 0) throw ParameterError("ball radius must be non-negative");
  std::vector<Vertex> out;
  Vertex x(d);
  for (int i = 0; i < d; ++i) x.c[i] = -r;
  while (true) {
    out.push_back(x);
    int i = d - 1;
    while (i >= 0 && x.c[i] == r) x.c[i--] = -r;
    if (i < 0) break;
    ++x.c[i];
  }
  return Region(d, std::move(out));
}

// Graph-distance ball {v : |v|_1 <= r}.
inline Region l1_ball(int r, int d) {
  std::vector<Vertex> out;
  for (const auto& v : ball(r, d))
    if (l1_norm(v) <= r) out.push_back(v);
  return Region(d, std::move(out));
}

inline Region boundary(const Region& V) {
  std::vector<Vertex> out;
  for (const auto& v : V)
    for (const auto& w : neighbors(v))
      if (!V.contains(w)) out.push_back(w);
  return Region(V.dim(), std::move(out));
}

inline int dist(const Region& A, const Region& B) {
  if (A.empty() || B.empty())
    throw ContractError("dist requires non-empty regions");
  int best = std::numeric_limits<int>::max();
  for (const auto& a : A)
    for (const auto& b : B) best = std::min(best, l1_dist(a, b));
  return best;
}

inline int dist(const Vertex& a, const Region& B) {
  return dist(Region(a.dim, {a}), B);
}

// Max pairwise l1 distance, as the widest spread of s.v over sign vectors s.
inline int diameter(const Region& V) {
  if (V.empty()) return 0;
  const int d = V.dim();
  int best = 0;
  for (unsigned mask = 0; mask < (1u << d); ++mask) {
    int lo = std::numeric_limits<int>::max(), hi = std::numeric_limits<int>::min();
    for (const auto& v : V) {
      int x = 0;
      for (int i = 0; i < d; ++i) x += (mask >> i & 1) ? -v.c[i] : v.c[i];
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
    best = std::max(best, hi - lo);
  }
  return best;
}

inline std::int64_t sphere_count(int r, int d) {
  if (r < 0) throw ParameterError("sphere radius must be non-negative");
  // Number of integer points with |v|_1 = r, by the standard recurrence.
  std::vector<std::vector<std::int64_t>> n(d + 1,
                                           std::vector<std::int64_t>(r + 1, 0));
  n[0][0] = 1;
  for (int k = 1; k <= d; ++k)
    for (int m = 0; m <= r; ++m) {
      std::int64_t s = n[k - 1][m];
      for (int a = 1; a <= m; ++a) s += 2 * n[k - 1][m - a];
      n[k][m] = s;
    }
  return n[d][r];
}

inline Region region_union(const Region& a, const Region& b) {
  std::vector<Vertex> out(a.vertices());
  out.insert(out.end(), b.begin(), b.end());
  return Region(a.dim() ? a.dim() : b.dim(), std::move(out));
}

inline Region region_minus(const Region& a, const Region& b) {
  std::vector<Vertex> out;
  for (const auto& v : a)
    if (!b.contains(v)) out.push_back(v);
  return Region(a.dim(), std::move(out));
}

inline Region region_filter(const Region& a,
                            const std::function<bool(const Vertex&)>& keep) {
  std::vector<Vertex> out;
  for (const auto& v : a)
    if (keep(v)) out.push_back(v);
  return Region(a.dim(), std::move(out));
}

inline bool is_subset(const Region& a, const Region& b) {
  for (const auto& v : a)
    if (!b.contains(v)) return false;
  return true;
}

// Finite torus used as a validation substrate.
class Torus {
 public:
  Torus() = default;
  explicit Torus(std::vector<int> sides) : dim_(static_cast<int>(sides.size())) {
    if (dim_ < 1 || dim_ > kMaxDim) throw ParameterError("torus dimension");
    for (int i = 0; i < dim_; ++i) {
      if (sides[i] < 3)
        throw ParameterError("torus side must be at least 3");
      side_[i] = sides[i];
    }
    std::vector<Vertex> all;
    for (const auto& v : ball_from_zero()) all.push_back(v);
    sites_ = Region(dim_, std::move(all));
  }

  int dim() const { return dim_; }
  int side(int i) const { return side_[i]; }
  const Region& sites() const { return sites_; }
  std::size_t size() const { return sites_.size(); }

  Vertex wrap(const Vertex& v) const {
    Vertex w(dim_);
    for (int i = 0; i < dim_; ++i) {
      int m = v.c[i] % side_[i];
      w.c[i] = m < 0 ? m + side_[i] : m;
    }
    return w;
  }

  std::size_t index(const Vertex& v) const { return *sites_.index_of(wrap(v)); }

  int linf_dist(const Vertex& a, const Vertex& b) const {
    int s = 0;
    for (int i = 0; i < dim_; ++i) s = std::max(s, coord_dist(a, b, i));
    return s;
  }
  int l1_dist(const Vertex& a, const Vertex& b) const {
    int s = 0;
    for (int i = 0; i < dim_; ++i) s += coord_dist(a, b, i);
    return s;
  }

  // Each undirected torus edge once, as index pairs into sites().
  std::vector<std::pair<std::size_t, std::size_t>> edges() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t i = 0; i < sites_.size(); ++i)
      for (int k = 0; k < dim_; ++k) {
        Vertex w = sites_[i];
        w.c[k] += 1;
        out.emplace_back(i, index(w));
      }
    return out;
  }

  // True when V together with its boundary embeds injectively, so that
  // the torus neighbourhood of any translate of V looks like Z^d.
  bool embeds(const Region& V) const {
    Region closure = region_union(V, boundary(V));
    for (int i = 0; i < dim_; ++i) {
      int lo = std::numeric_limits<int>::max(), hi = std::numeric_limits<int>::min();
      for (const auto& v : closure) {
        lo = std::min(lo, v.c[i]);
        hi = std::max(hi, v.c[i]);
      }
      if (hi - lo + 1 > side_[i]) return false;
    }
    return true;
  }

  std::string str() const {
    std::string s;
    for (int i = 0; i < dim_; ++i) s += (i ? "x" : "") + std::to_string(side_[i]);
    return s;
  }

 private:
  int coord_dist(const Vertex& a, const Vertex& b, int i) const {
    int d = std::abs(a.c[i] - b.c[i]) % side_[i];
    return std::min(d, side_[i] - d);
  }

  std::vector<Vertex> ball_from_zero() const {
    std::vector<Vertex> out;
    Vertex x(dim_);
    while (true) {
      out.push_back(x);
      int i = dim_ - 1;
      while (i >= 0 && x.c[i] == side_[i] - 1) x.c[i--] = 0;
      if (i < 0) break;
      ++x.c[i];
    }
    return out;
  }

  int dim_ = 0;
  std::array<int, kMaxDim> side_{};
  Region sites_;
};

}  // namespace mrfcftp

#endif  // MRFCFTP_LATTICE_HPP
