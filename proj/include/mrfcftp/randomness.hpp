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

#ifndef MRFCFTP_RANDOMNESS_HPP
#define MRFCFTP_RANDOMNESS_HPP

#include <array>
#include <cstdint>

#include "mrfcftp/lattice.hpp"

namespace mrfcftp {

// Philox4x32-10 block function.
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
  constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += W0;
      key[1] += W1;
    }
    const std::uint64_t p0 = static_cast<std::uint64_t>(M0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(M1) * ctr[2];
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Stage tags keep the different uses of one (site, time) apart.
namespace stage {
inline constexpr std::uint32_t kActive = 1;
inline constexpr std::uint32_t kReplica = 2;
inline constexpr std::uint32_t kCouplingBase = 16;
}  // namespace stage

struct VariateAddress {
  Vertex site;
  std::uint32_t time = 0;
  std::uint32_t stage = 0;
  std::uint64_t counter = 0;

  friend bool operator<(const VariateAddress& a, const VariateAddress& b) {
    if (!(a.site == b.site)) return a.site < b.site;
    if (a.time != b.time) return a.time < b.time;
    if (a.stage != b.stage) return a.stage < b.stage;
    return a.counter < b.counter;
  }
  friend bool operator==(const VariateAddress& a, const VariateAddress& b) {
    return a.site == b.site && a.time == b.time && a.stage == b.stage &&
           a.counter == b.counter;
  }
};

// Stateless addressable field of uniforms.
class RandomField {
 public:
  RandomField() = default;
  explicit RandomField(std::uint64_t seed) : seed_(seed), mixed_(splitmix64(seed)) {}

  std::uint64_t seed() const { return seed_; }

  // Independent field for replica r of this seed.
  RandomField replica(std::uint64_t r) const {
    RandomField f(splitmix64(seed_ ^ splitmix64(r + 0x5851F42D4C957F2Dull)));
    return f;
  }

  // Field whose value at site v equals this field's value at v + u.
  RandomField shifted(const Vertex& u) const {
    RandomField f = *this;
    f.offset_ = has_offset_ ? offset_ + u : u;
    f.has_offset_ = true;
    return f;
  }

  std::array<std::uint32_t, 4> block(const VariateAddress& a) const {
    const Vertex v = has_offset_ ? a.site + offset_ : a.site;
    const std::uint64_t packed = pack(v);
    const std::uint64_t k = mixed_ ^ (a.counter * 0x9E3779B97F4A7C15ull);
    return philox4x32({static_cast<std::uint32_t>(packed), static_cast<std::uint32_t>(packed >> 32),
                       a.time, a.stage},
                      {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)});
  }

  // Uniform on [0,1) with 53 random bits.
  double uniform(const VariateAddress& a) const {
    const auto b = block(a);
    const std::uint64_t bits = (static_cast<std::uint64_t>(b[0]) << 32 | b[1]) >> 11;
    return static_cast<double>(bits) * 0x1.0p-53;
  }

  bool bernoulli(const VariateAddress& a, double p) const { return uniform(a) < p; }

 private:
  static std::uint64_t pack(const Vertex& v) {
    std::uint64_t out = 0;
    if (v.dim <= 3) {
      for (int i = 0; i < v.dim; ++i)
        out |= (static_cast<std::uint64_t>(v.c[i] + (1 << 20)) & 0x1FFFFF) << (21 * i);
    } else {
      for (int i = 0; i < v.dim; ++i)
        out |= (static_cast<std::uint64_t>(v.c[i] + (1 << 15)) & 0xFFFF) << (16 * i);
    }
    return out;
  }

  std::uint64_t seed_ = 0;
  std::uint64_t mixed_ = splitmix64(0);
  Vertex offset_;
  bool has_offset_ = false;
};

}  // namespace mrfcftp

#endif  // MRFCFTP_RANDOMNESS_HPP
