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

#ifndef MRFCFTP_SEQUENTIAL_COUPLING_HPP
#define MRFCFTP_SEQUENTIAL_COUPLING_HPP

#include <optional>
#include <string>

#include "mrfcftp/coupling.hpp"
#include "mrfcftp/elimination.hpp"

namespace mrfcftp {

// Grand coupling that samples V site by site in region order, each site
// from its exact conditional given tau and the sites already placed, with
// one shared uniform per site. Used for blocks whose boundary family is
// too large to enumerate.
class SequentialCoupling final : public GrandCoupling {
 public:
  SequentialCoupling(const Spec& spec, const Region& V,
                     std::uint64_t max_cells = std::uint64_t{1} << 24)
      : spec_(spec), V_(V), dV_(boundary(V)), elim_(spec, V, max_cells) {
    if (!V.contains(Vertex::origin(V.dim())))
      throw ContractError("block must contain the origin");
  }

  const Spec& spec() const override { return spec_; }
  const Region& block() const override { return V_; }
  const Region& boundary_region() const override { return dV_; }
  std::string id() const override {
    return "sequential|" + spec_.describe() + "|V=" + std::to_string(V_.size());
  }
  const FrontierEliminator& eliminator() const { return elim_; }

  bool admits(const Config& tau) const override {
    return tau.size() == dV_.size() && pairwise_consistent(spec_, dV_, tau) &&
           elim_.solve(tau).feasible();
  }

  Config evaluate(const Config& tau, const Draw& d) const override {
    auto sol = elim_.solve(tau);
    return elim_.sample(sol, [&](std::size_t k, std::span<const double> w) {
      return d.pick(stage::kSequential, k, w);
    });
  }

  // Without interactions across the boundary every tau gives one law, and
  // shared per-site uniforms make the outputs identical.
  std::optional<Config> universal(const Draw& d) const override {
    if (!spec_.boundary_independent()) return std::nullopt;
    return evaluate(Config(dV_.size(), 0), d);
  }

 private:
  Spec spec_;
  Region V_, dV_;
  FrontierEliminator elim_;
};

}  // namespace mrfcftp

#endif  // MRFCFTP_SEQUENTIAL_COUPLING_HPP
