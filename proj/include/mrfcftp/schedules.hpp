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


#ifndef MRFCFTP_SCHEDULES_HPP
#define MRFCFTP_SCHEDULES_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mrfcftp/config.hpp"
#include "mrfcftp/contracting_coupling.hpp"
#include "mrfcftp/coupling.hpp"
#include "mrfcftp/dynamics.hpp"
#include "mrfcftp/elimination.hpp"
#include "mrfcftp/errors.hpp"
#include "mrfcftp/exact_gibbs.hpp"
#include "mrfcftp/sequential_coupling.hpp"
#include "mrfcftp/statistics.hpp"

namespace mrfcftp {

// Positive rational num/den, parsed from "a/b" or a finite decimal.
struct Rational {
  std::int64_t num = 1, den = 4;

  double value() const { return double(num) / double(den); }
  std::string str() const { return std::to_string(num) + "/" + std::to_string(den); }
  // floor(this * x) for x >= 0.
  std::int64_t floor_times(std::int64_t x) const { return num * x / den; }

  static Rational parse(const std::string& text) {
    const std::string t = trim(text);
    Rational r;
    try {
      if (auto slash = t.find('/'); slash != std::string::npos) {
        r.num = std::stoll(t.substr(0, slash));
        r.den = std::stoll(t.substr(slash + 1));
      } else {
        const auto dot = t.find('.');
        const std::string digits = dot == std::string::npos ? t : t.substr(0, dot) + t.substr(dot + 1);
        const std::size_t frac = dot == std::string::npos ? 0 : t.size() - dot - 1;
        if (digits.empty() || frac > 12 || digits.find_first_not_of("0123456789") != std::string::npos)
          throw ParameterError("bad rational '" + text + "'");
        r.num = std::stoll(digits);
        r.den = 1;
        for (std::size_t i = 0; i < frac; ++i) r.den *= 10;
      }
    } catch (const std::logic_error&) {
      throw ParameterError("bad rational '" + text + "'");
    }
    if (r.num <= 0 || r.den <= 0) throw ParameterError("rational must be positive: '" + text + "'");
    const std::int64_t g = std::gcd(r.num, r.den);
    r.num /= g;
    r.den /= g;
    return r;
  }
};

// Grand coupling for specifications without interactions: every site is an
// independent draw from the vertex weights, so all boundary conditions agree.
class ProductCoupling final : public GrandCoupling {
 public:
  ProductCoupling(const Spec& spec, const Region& V) : spec_(spec), V_(V), dV_(boundary(V)) {
    if (!spec.boundary_independent()) throw ParameterError("product coupling needs a boundary independent spec");
    if (!V.contains(Vertex::origin(V.dim()))) throw ContractError("block must contain the origin");
    for (int a = 0; a < spec.q(); ++a) w_.push_back(spec.vertex_weight(static_cast<Symbol>(a)));
  }

  const Spec& spec() const override { return spec_; }
  const Region& block() const override { return V_; }
  const Region& boundary_region() const override { return dV_; }
  std::string id() const override { return "product|" + spec_.describe() + "|V=" + std::to_string(V_.size()); }
  bool admits(const Config& tau) const override { return tau.size() == dV_.size(); }

  Config evaluate(const Config&, const Draw& d) const override {
    Config out(V_.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = static_cast<Symbol>(d.pick(stage::kSequential, k, w_));
    return out;
  }
  std::optional<Config> universal(const Draw& d) const override { return evaluate({}, d); }

 private:
  Spec spec_;
  Region V_, dV_;
  std::vector<double> w_;
};

enum class CouplingKind { optimal_on_U, contracting_2d, sequential, product };

inline CouplingKind coupling_kind_from(const std::string& s) {
  if (s == "optimal_on_U" || s == "optimal") return CouplingKind::optimal_on_U;
  if (s == "contracting_2d" || s == "contracting") return CouplingKind::contracting_2d;
  if (s == "sequential") return CouplingKind::sequential;
  if (s == "product") return CouplingKind::product;
  throw ParameterError("unknown coupling kind '" + s + "'");
}

inline std::string to_string(CouplingKind k) {
  switch (k) {
    case CouplingKind::optimal_on_U: return "optimal_on_U";
    case CouplingKind::contracting_2d: return "contracting_2d";
    case CouplingKind::sequential: return "sequential";
    default: return "product";
  }
}

struct FixedOptions {
  std::optional<Region> U;  // coupled region for optimal_on_U, default V
  double p = 0.5;
  ExclusionNorm norm = ExclusionNorm::box;
  int contract_r = 1;
  int contract_s = 2;
  ExhaustionLimits limits{};
  std::uint64_t max_cells = std::uint64_t{1} << 23;
};

struct FixedPlan {
  Region block;
  CouplingKind kind = CouplingKind::optimal_on_U;
  double p = 0.5;
  int radius = 1;
  std::shared_ptr<const GrandCoupling> coupling;
  std::shared_ptr<const Schedule> schedule;

  nlohmann::json to_json() const {
    return {{"kind", "fixed"},      {"coupling", to_string(kind)}, {"coupling_id", coupling->id()},
            {"block_sites", block.size()}, {"p", p}, {"radius", radius}};
  }
};

inline std::shared_ptr<const GrandCoupling> make_coupling(const Spec& spec, const Region& V, CouplingKind kind,
                                                          const FixedOptions& o = {}) {
  switch (kind) {
    case CouplingKind::optimal_on_U:
      return std::make_shared<OptimalCoupling>(spec, V, o.U.value_or(V), o.limits, o.max_cells);
    case CouplingKind::contracting_2d: {
      int n = 0;
      while (n < 64 && !(ball(n, spec.dim()) == V)) ++n;
      if (n == 64) throw ParameterError("contracting coupling needs V = Lambda_n");
      return std::make_shared<ContractingCoupling>(spec, n, o.contract_r, o.contract_s);
    }
    case CouplingKind::sequential:
      return std::make_shared<SequentialCoupling>(spec, V, o.max_cells);
    default:
      return std::make_shared<ProductCoupling>(spec, V);
  }
}

// Delta_n = V and p_n = p for every n.
inline FixedPlan fixed_plan(const Spec& spec, const Region& V, CouplingKind kind, const FixedOptions& o = {}) {
  FixedPlan plan;
  plan.block = V;
  plan.kind = kind;
  plan.p = o.p;
  plan.coupling = make_coupling(spec, V, kind, o);
  StepParams sp(o.p, plan.coupling, o.norm);
  plan.radius = sp.r;
  plan.schedule = std::make_shared<FixedSchedule>(std::move(sp));
  return plan;
}

inline std::shared_ptr<const Schedule> fixed_schedule(const Spec& spec, const Region& V, CouplingKind kind,
                                                      const FixedOptions& o = {}) {
  return fixed_plan(spec, V, kind, o).schedule;
}

// Work limits for certifying gamma(Lambda_l, Lambda_{3 delta l}).
struct GammaBudget {
  ExhaustionLimits limits{std::uint64_t{1} << 12, std::uint64_t{1} << 20};
  std::uint64_t exact_cells = std::uint64_t{1} << 22;  // |family| * q^|U|
  std::uint64_t max_cells = std::uint64_t{1} << 22;    // eliminator tables
  std::uint64_t mc_draws = 4000;
  std::uint64_t mc_evaluations = std::uint64_t{1} << 22;
  double z = 2.326;  // one-sided 99%
  std::uint64_t seed = 1;
};

struct GrowingOptions {
  Rational delta{1, 4};
  double epsilon = 0.1;
  int n_max = 3;
  int n_max_limit = 4;
  std::int64_t ell1 = 2;
  std::vector<double> p_override;  // replaces l^{-d} per stage when set
  ExclusionNorm norm = ExclusionNorm::box;
  std::uint64_t max_block_sites = std::uint64_t{1} << 20;
  GammaBudget budget{};
};

struct GrowingStage {
  int n = 0;
  std::int64_t ell = 0;
  double p = 0.0;
  std::int64_t radius = 0;
  std::int64_t core = 0;   // floor(delta l)
  std::int64_t inner = 0;  // floor(3 delta l)
  std::string certification = "uncertified";
  double gamma = std::numeric_limits<double>::quiet_NaN();
  double gamma_lower = std::numeric_limits<double>::quiet_NaN();
  bool certified = false;
  std::string coupling_kind = "none";
  std::shared_ptr<const GrandCoupling> coupling;
  std::shared_ptr<const BoundaryFamily> family;
};

struct GrowingPlan {
  Rational delta;
  double epsilon = 0.1;
  int d = 2;
  std::vector<GrowingStage> stages;
  bool truncated = false;
  std::string diagnostic;

  // delta l_{n+1} > 4d (l_1 + ... + l_n), in integers.
  bool recursion_holds() const {
    std::int64_t sum = 0;
    for (std::size_t i = 0; i + 1 < stages.size(); ++i) {
      sum += stages[i].ell;
      if (!(delta.num * stages[i + 1].ell > 4 * d * sum * delta.den)) return false;
    }
    return true;
  }

  std::shared_ptr<const Schedule> schedule() const {
    std::vector<StepParams> steps;
    for (const auto& s : stages) {
      if (!s.coupling) throw CapacityError("stage " + std::to_string(s.n) + " has no constructible coupling");
      steps.emplace_back(s.p, s.coupling, ExclusionNorm::box);
    }
    return std::make_shared<StagedSchedule>(std::move(steps));
  }

  nlohmann::json to_json() const {
    nlohmann::json st = nlohmann::json::array();
    for (const auto& s : stages) {
      nlohmann::json j{{"n", s.n},         {"ell", s.ell},     {"p", s.p},
                       {"radius", s.radius}, {"core", s.core},   {"inner", s.inner},
                       {"certification", s.certification}, {"certified", s.certified},
                       {"coupling", s.coupling_kind}};
      j["gamma"] = std::isfinite(s.gamma) ? nlohmann::json(s.gamma) : nlohmann::json(nullptr);
      j["gamma_lower"] = std::isfinite(s.gamma_lower) ? nlohmann::json(s.gamma_lower) : nlohmann::json(nullptr);
      st.push_back(j);
    }
    return {{"delta", delta.str()}, {"epsilon", epsilon}, {"d", d},  {"stages", st},
            {"recursion_holds", recursion_holds()}, {"truncated", truncated}, {"diagnostic", diagnostic}};
  }

  // Key = value form readable by KeyValueConfig.
  std::string to_config() const {
    std::ostringstream os;
    os << "[schedule]\nkind = growing\ndelta = " << delta.str() << "\nepsilon = " << epsilon << "\n";
    os << "ell =";
    for (std::size_t i = 0; i < stages.size(); ++i) os << (i ? ", " : " ") << stages[i].ell;
    os << "\np =";
    for (std::size_t i = 0; i < stages.size(); ++i) os << (i ? ", " : " ") << stages[i].p;
    os << "\ncertified =";
    for (std::size_t i = 0; i < stages.size(); ++i) os << (i ? ", " : " ") << (stages[i].certified ? 1 : 0);
    os << "\n";
    return os.str();
  }
};

namespace detail {

inline std::int64_t next_ell(const Rational& delta, int d, std::int64_t sum) {
  const long double need = 4.0L * d * sum * delta.den;
  if (need > 9.0e15L) throw CapacityError("block half-side overflows");
  return 4 * d * sum * delta.den / delta.num + 1;
}

// Feasible boundary conditions of V found through the eliminator.
inline BoundaryFamily eliminator_family(const Spec& spec, const FrontierEliminator& e, const ExhaustionLimits& lim) {
  BoundaryFamily fam;
  fam.region = e.boundary_region();
  const std::size_t m = fam.region.size();
  if (std::pow(double(spec.q()), double(m)) > double(lim.boundary))
    throw CapacityError("boundary family of " + std::to_string(m) + " sites exceeds the cap");
  Config tau(m, 0);
  while (true) {
    if (pairwise_consistent(spec, fam.region, tau) && e.solve(tau).feasible()) fam.members.push_back(tau);
    std::size_t i = m;
    while (i > 0 && tau[i - 1] + 1 == spec.q()) tau[--i] = 0;
    if (i == 0) break;
    ++tau[i - 1];
  }
  return fam;
}

}  // namespace detail

// Whether all members of the family give the same output on U (relative
// to the block) under draw d. Unknown without a family.
inline std::optional<bool> coincides_on(const GrandCoupling& c, const BoundaryFamily* fam, const Region& U,
                                        const Draw& d) {
  if (c.universal(d)) return true;
  if (!fam) return std::nullopt;
  std::vector<std::size_t> pos;
  for (const auto& u : U) pos.push_back(*c.block().index_of(u));
  std::optional<Config> first;
  for (const auto& tau : fam->members) {
    const Config w = c.evaluate(tau, d);
    Config on(pos.size());
    for (std::size_t k = 0; k < pos.size(); ++k) on[k] = w[pos[k]];
    if (!first) first = on;
    else if (*first != on) return false;
  }
  return true;
}

// Minimal l-sequence with delta l_{n+1} > 4d sum_{k<=n} l_k, Delta_n =
// Lambda_{l_n}, p_n = l_n^{-d}, and gamma(Lambda_{l_n}, Lambda_{3 delta l_n})
// certified above epsilon where the budget allows.
inline GrowingPlan growing_schedule(const Spec& spec, const GrowingOptions& o = {}) {
  if (!(o.delta.value() > 0.0 && o.delta.value() < 1.0 / 3.0)) throw ParameterError("delta must lie in (0, 1/3)");
  if (!(o.epsilon > 0.0 && o.epsilon < 1.0 / 3.0)) throw ParameterError("epsilon must lie in (0, 1/3)");
  if (o.n_max < 1 || o.n_max > o.n_max_limit)
    throw ParameterError("n_max must lie in [1, " + std::to_string(o.n_max_limit) + "]");
  if (o.ell1 < 1) throw ParameterError("l_1 must be positive");
  GrowingPlan plan;
  plan.delta = o.delta;
  plan.epsilon = o.epsilon;
  plan.d = spec.dim();
  const int d = spec.dim();
  std::int64_t sum = 0;
  for (int n = 1; n <= o.n_max; ++n) {
    GrowingStage st;
    st.n = n;
    st.ell = n == 1 ? o.ell1 : detail::next_ell(o.delta, d, sum);
    sum += st.ell;
    st.p = static_cast<std::size_t>(n - 1) < o.p_override.size() ? o.p_override[n - 1]
                                                                 : std::pow(double(st.ell), -double(d));
    if (!(st.p > 0.0 && st.p < 1.0)) throw ParameterError("stage " + std::to_string(n) + ": p must lie in (0,1)");
    st.radius = 2 * d * st.ell + 1;
    st.core = o.delta.floor_times(st.ell);
    st.inner = o.delta.floor_times(3 * st.ell);
    const double sites = std::pow(2.0 * double(st.ell) + 1.0, double(d));
    if (sites > double(o.max_block_sites)) {
      st.certification = spec.boundary_independent() ? "independent" : "uncertified";
      if (spec.boundary_independent()) st.gamma = st.gamma_lower = 1.0;
      st.certified = spec.boundary_independent();
      plan.stages.push_back(std::move(st));
      continue;
    }
    const Region V = ball(static_cast<int>(st.ell), d);
    const Region U = ball(static_cast<int>(st.inner), d);
    if (spec.boundary_independent()) {
      st.coupling = std::make_shared<ProductCoupling>(spec, V);
      st.coupling_kind = "product";
      st.certification = "independent";
      st.gamma = st.gamma_lower = 1.0;
    } else {
      std::unique_ptr<FrontierEliminator> elim;
      try {
        elim = std::make_unique<FrontierEliminator>(spec, V, o.budget.max_cells);
        st.family = std::make_shared<BoundaryFamily>(detail::eliminator_family(spec, *elim, o.budget.limits));
      } catch (const CapacityError&) {
        st.family.reset();
      }
      if (st.family && std::pow(double(spec.q()), double(V.size())) <= double(o.budget.limits.interior)) {
        try {
          st.coupling = std::make_shared<OptimalCoupling>(spec, V, U, o.budget.limits, o.budget.max_cells);
          st.coupling_kind = "optimal_on_U";
        } catch (const CapacityError&) {
        }
      }
      if (!st.coupling) {
        try {
          st.coupling = std::make_shared<SequentialCoupling>(spec, V, o.budget.max_cells);
          st.coupling_kind = "sequential";
        } catch (const CapacityError&) {
        }
      }
      if (st.family) {
        const double cells = double(st.family->size()) * std::pow(double(spec.q()), double(U.size()));
        if (cells <= double(o.budget.exact_cells)) {
          std::map<Config, double> mins;
          for (std::size_t t = 0; t < st.family->size(); ++t) {
            const Pmf m = elim->marginal(st.family->members[t], U);
            if (t == 0) {
              for (std::size_t k = 0; k < m.size(); ++k) mins[m.support[k]] = m.probs[k];
            } else {
              for (auto& [w, x] : mins) x = std::min(x, m.prob(w));
            }
          }
          double g = 0.0;
          for (const auto& [w, x] : mins) g += x;
          st.gamma = st.gamma_lower = g;
          st.certification = "exact";
        } else if (double(st.family->size()) * double(o.budget.mc_draws) <= double(o.budget.mc_evaluations)) {
          // Coincidence frequency of any grand coupling is at most gamma.
          RandomField f(o.budget.seed);
          FieldSource src(f);
          std::uint64_t hits = 0;
          for (std::uint64_t k = 0; k < o.budget.mc_draws; ++k)
            if (*coincides_on(*st.coupling, st.family.get(), U, Draw{&src, Vertex::origin(d), std::uint32_t(k + 1)}))
              ++hits;
          const double fr = double(hits) / double(o.budget.mc_draws);
          st.gamma = fr;
          st.gamma_lower = fr - o.budget.z * binomial_se(fr, o.budget.mc_draws);
          st.certification = "monte_carlo";
        }
      }
    }
    st.certified = std::isfinite(st.gamma_lower) && st.gamma_lower > o.epsilon;
    const bool failed = st.certification != "uncertified" && !st.certified;
    plan.stages.push_back(std::move(st));
    if (failed) {
      plan.truncated = true;
      plan.diagnostic = "gamma at stage " + std::to_string(n) + " is not above epsilon";
      break;
    }
  }
  return plan;
}

// T'_v: the first stage n at which U_{v,n} = {u} with u in v + Lambda_{delta l_n}
// and the block at u coincides on Lambda_{3 delta l_n} for every boundary.
struct TPrime {
  std::optional<std::uint32_t> n;
  bool undetermined = false;  // some coincidence check had no family
};

inline TPrime t_prime(const GrowingPlan& plan, const Schedule& sched, const RandomField& field, const Vertex& v) {
  TPrime out;
  FieldSource src(field);
  for (std::size_t i = 0; i < plan.stages.size(); ++i) {
    const auto& st = plan.stages[i];
    const std::uint32_t n = static_cast<std::uint32_t>(i + 1);
    const Region Uv = update_set(field, sched, v, n);
    if (Uv.size() != 1) continue;
    const Vertex u = Uv[0];
    if (linf_norm(u - v) > st.core) continue;
    const Region inner = ball(static_cast<int>(st.inner), plan.d);
    auto hit = coincides_on(*st.coupling, st.family.get(), inner, Draw{&src, u, n});
    if (!hit) {
      out.undetermined = true;
      continue;
    }
    if (*hit) {
      out.n = n;
      return out;
    }
  }
  return out;
}

// Lower bound on Pr(F_n): gamma_lower * Pr(Bin(|Lambda_{delta l}|, p) = 1)
// * Pr(no active site in Lambda_{delta l + r} outside Lambda_{delta l}).
struct StageBound {
  double gamma = 0.0, one_active = 0.0, none_around = 0.0;
  double value() const { return gamma * one_active * none_around; }
};

inline StageBound stage_success_bound(const GrowingPlan& plan, std::size_t i) {
  const auto& st = plan.stages.at(i);
  const double core = std::pow(2.0 * double(st.core) + 1.0, double(plan.d));
  const double outer = std::pow(2.0 * double(st.core + st.radius) + 1.0, double(plan.d));
  StageBound b;
  b.gamma = std::isfinite(st.gamma_lower) ? std::max(0.0, st.gamma_lower) : 0.0;
  b.one_active = core * st.p * std::exp((core - 1.0) * std::log1p(-st.p));
  b.none_around = std::exp((outer - core) * std::log1p(-st.p));
  return b;
}

struct StageSuccess {
  std::size_t stage = 0;
  std::uint64_t trials = 0, successes = 0, undetermined = 0;
  StageBound bound;
  double frequency() const { return trials ? double(successes) / double(trials) : 0.0; }
  double se() const { return std::sqrt(std::max(bound.value() * (1.0 - bound.value()), 0.0) / double(trials)); }
  bool pass() const { return frequency() >= bound.value() - 3.0 * se(); }

  nlohmann::json to_json() const {
    return {{"stage", stage + 1}, {"trials", trials}, {"successes", successes}, {"undetermined", undetermined},
            {"frequency", frequency()}, {"bound", bound.value()}, {"bound_gamma", bound.gamma},
            {"bound_one_active", bound.one_active}, {"bound_none_around", bound.none_around},
            {"se", se()}, {"pass", pass()}};
  }
};

// Frequency of F_n at the origin over independent fields.
inline StageSuccess simulate_stage_success(const GrowingPlan& plan, std::size_t i, std::uint64_t trials,
                                           std::uint64_t seed) {
  const auto& st = plan.stages.at(i);
  if (!st.coupling) throw CapacityError("stage " + std::to_string(i + 1) + " has no constructible coupling");
  // A schedule whose step i+1 is this stage; earlier steps are never read.
  std::vector<StepParams> steps(i + 1, StepParams(st.p, st.coupling, ExclusionNorm::box));
  StagedSchedule sched(std::move(steps));
  const std::uint32_t n = static_cast<std::uint32_t>(i + 1);
  const Region inner = ball(static_cast<int>(st.inner), plan.d);
  const Vertex o = Vertex::origin(plan.d);
  StageSuccess out;
  out.stage = i;
  out.trials = trials;
  out.bound = stage_success_bound(plan, i);
  const RandomField base(seed);
  for (std::uint64_t t = 0; t < trials; ++t) {
    const RandomField f = base.replica(t);
    const Region Uv = update_set(f, sched, o, n);
    if (Uv.size() != 1 || linf_norm(Uv[0]) > st.core) continue;
    FieldSource src(f);
    auto hit = coincides_on(*st.coupling, st.family.get(), inner, Draw{&src, Uv[0], n});
    if (!hit) ++out.undetermined;
    else if (*hit) ++out.successes;
  }
  return out;
}

}  // namespace mrfcftp

#endif  // MRFCFTP_SCHEDULES_HPP
