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


#ifndef MRFCFTP_EXPERIMENTS_HPP
#define MRFCFTP_EXPERIMENTS_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "mrfcftp/config.hpp"
#include "mrfcftp/diagnostics.hpp"
#include "mrfcftp/dynamics.hpp"
#include "mrfcftp/exact_gibbs.hpp"
#include "mrfcftp/mixing.hpp"
#include "mrfcftp/model_config.hpp"
#include "mrfcftp/ratio_coupling.hpp"
#include "mrfcftp/schedules.hpp"
#include "mrfcftp/statistics.hpp"

#ifndef MRFCFTP_VERSION
#define MRFCFTP_VERSION "0.1.0"
#endif

namespace mrfcftp {

inline std::string version() { return MRFCFTP_VERSION; }

// "window" or "torus:WxH...".
struct SubstrateChoice {
  std::optional<Torus> torus;

  static SubstrateChoice parse(const std::string& text, int d) {
    SubstrateChoice s;
    const std::string t = trim(text);
    if (t == "window") return s;
    if (t.rfind("torus:", 0) != 0) throw ParameterError("substrate must be 'window' or 'torus:WxH', got '" + t + "'");
    std::vector<int> sides;
    for (const auto& x : split_list(t.substr(6), 'x')) {
      try {
        sides.push_back(std::stoi(x));
      } catch (const std::exception&) {
        throw ParameterError("bad torus side '" + x + "'");
      }
    }
    if (static_cast<int>(sides.size()) != d)
      throw ParameterError("torus has " + std::to_string(sides.size()) + " sides for dimension " + std::to_string(d));
    s.torus = Torus(sides);
    return s;
  }
  Substrate substrate(int d) const { return torus ? Substrate::on_torus(*torus) : Substrate::lattice(d); }
  std::string str() const { return torus ? "torus:" + torus->str() : "window"; }
};

// "single", "box:R" (Lambda_R) or "l1:R".
inline Region parse_block(const std::string& text, int d) {
  const std::string t = trim(text);
  if (t == "single") return origin_region(d);
  const auto colon = t.find(':');
  if (colon == std::string::npos) throw ParameterError("block must be single, box:R or l1:R, got '" + t + "'");
  int r = 0;
  try {
    r = std::stoi(t.substr(colon + 1));
  } catch (const std::exception&) {
    throw ParameterError("bad block radius in '" + t + "'");
  }
  if (r < 0) throw ParameterError("block radius must be non-negative");
  const std::string kind = t.substr(0, colon);
  if (kind == "box") return ball(r, d);
  if (kind == "l1") return l1_ball(r, d);
  throw ParameterError("unknown block shape '" + kind + "'");
}

struct ScheduleChoice {
  std::string kind = "fixed";  // fixed | growing
  Region block;
  std::optional<Region> coupled;
  CouplingKind coupling = CouplingKind::optimal_on_U;
  double p = 0.5;
  ExclusionNorm norm = ExclusionNorm::box;
  int contract_r = 1, contract_s = 2;
  GrowingOptions growing;
};

struct RunChoice {
  std::uint64_t seed = 1;
  std::uint64_t replicas = 1000;
  std::uint32_t horizon_cap = 1u << 20;
  std::size_t exhaustion_limit = 8;
  std::string out;
  unsigned threads = 1;
  bool records = true;
};

struct StatsChoice {
  double alpha = 1e-3;
  double min_expected = 5.0;
  double tv_threshold = 0.02;
  double tail_floor = 1e-3;
  std::size_t tail_points = 60;
  double fit_from = 0.0;
};

struct ConditionsChoice {
  double p_c = 0.0;  // 0 selects the tabulated threshold
  int mixing_max = 3;
  std::string mixing = "strong";
  ExhaustionLimits limits{std::uint64_t{1} << 16, std::uint64_t{1} << 20};
};

struct DiagChoice {
  std::string kind = "block";  // block | remark | family | ratio
  int k = 4;
  std::size_t families = 50;
  std::size_t max_size = 3, random_larger = 200;
  bool exact = true;
  std::uint64_t draws = 100000;
  double z = 3.0;
  int ratio_outer = 3, ratio_inner = 0;
  std::string ratio_boundaries = "extremes";  // extremes | random
};

// Site percolation thresholds of Z^d used when none is configured.
inline double default_site_threshold(int d) {
  switch (d) {
    case 1: return 1.0;
    case 2: return 0.592746;
    case 3: return 0.3116;
    case 4: return 0.198;
    default: return 1.0 / (2.0 * d - 1.0);
  }
}

struct ExperimentConfig {
  KeyValueConfig raw;
  Spec spec;
  SubstrateChoice substrate;
  ScheduleChoice schedule;
  RunChoice run;
  StatsChoice stats;
  ConditionsChoice conditions;
  DiagChoice diag;

  std::uint64_t hash() const { return raw.hash(); }

  // Every artifact carries these.
  nlohmann::json provenance() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash()));
    return {{"config_hash", buf}, {"seed", run.seed}, {"version", version()}};
  }

  static ExperimentConfig from(const KeyValueConfig& cfg) {
    static const std::map<std::string, std::set<std::string>> known{
        {"substrate", {"kind"}},
        {"schedule", {"kind", "block", "coupled", "coupling", "p", "norm", "contract_r", "contract_s", "delta",
                      "epsilon", "n_max", "ell1", "p_override"}},
        {"run", {"seed", "replicas", "horizon_cap", "exhaustion_limit", "out", "threads", "records"}},
        {"statistics", {"alpha", "min_expected", "tv_threshold", "tail_floor", "tail_points", "fit_from"}},
        {"conditions", {"p_c", "mixing_max", "mixing", "boundary_limit", "interior_limit"}},
        {"diag", {"kind", "k", "families", "max_size", "random_larger", "mode", "draws", "z", "ratio_outer",
                  "ratio_inner", "ratio_boundaries"}}};
    for (const auto& e : cfg.entries()) {
      if (e.section == "model" || e.section == "edges") continue;
      auto it = known.find(e.section);
      if (it == known.end()) throw ParameterError("unknown config section [" + e.section + "]");
      if (!it->second.count(e.key)) throw ParameterError("unknown key '" + e.key + "' in [" + e.section + "]");
    }
    ExperimentConfig c;
    c.raw = cfg;
    c.spec = spec_from_config(cfg);
    const int d = c.spec.dim();
    c.substrate = SubstrateChoice::parse(cfg.get_or("substrate", "kind", "window"), d);

    auto& s = c.schedule;
    s.kind = cfg.get_or("schedule", "kind", "fixed");
    if (s.kind != "fixed" && s.kind != "growing") throw ParameterError("[schedule] kind must be fixed or growing");
    s.block = parse_block(cfg.get_or("schedule", "block", "single"), d);
    if (cfg.has("schedule", "coupled")) s.coupled = parse_block(cfg.get("schedule", "coupled"), d);
    s.coupling = coupling_kind_from(cfg.get_or("schedule", "coupling", "optimal_on_U"));
    s.p = cfg.get_double_or("schedule", "p", 0.5);
    if (!(s.p > 0.0 && s.p < 1.0)) throw ParameterError("[schedule] p must lie in (0,1)");
    const std::string norm = cfg.get_or("schedule", "norm", "box");
    if (norm != "box" && norm != "l1") throw ParameterError("[schedule] norm must be box or l1");
    s.norm = norm == "box" ? ExclusionNorm::box : ExclusionNorm::l1;
    s.contract_r = static_cast<int>(cfg.get_int_or("schedule", "contract_r", 1));
    s.contract_s = static_cast<int>(cfg.get_int_or("schedule", "contract_s", 2));
    auto& g = s.growing;
    g.delta = Rational::parse(cfg.get_or("schedule", "delta", "1/4"));
    g.epsilon = cfg.get_double_or("schedule", "epsilon", 0.1);
    g.n_max = static_cast<int>(cfg.get_int_or("schedule", "n_max", 3));
    g.ell1 = cfg.get_int_or("schedule", "ell1", 2);
    for (const auto& x : split_list(cfg.get_or("schedule", "p_override", ""))) {
      try {
        g.p_override.push_back(std::stod(x));
      } catch (const std::exception&) {
        throw ParameterError("[schedule] p_override entries must be numbers");
      }
    }
    if (s.kind == "growing") {
      if (!(g.delta.value() > 0.0 && g.delta.value() < 1.0 / 3.0)) throw ParameterError("delta must lie in (0, 1/3)");
      if (!(g.epsilon > 0.0 && g.epsilon < 1.0 / 3.0)) throw ParameterError("epsilon must lie in (0, 1/3)");
      if (g.n_max < 1 || g.n_max > g.n_max_limit) throw ParameterError("[schedule] n_max must lie in [1, 4]");
      if (c.substrate.torus) throw ParameterError("growing schedules run on the window substrate only");
    }

    auto& r = c.run;
    r.seed = cfg.get_u64_or("run", "seed", 1);
    r.replicas = cfg.get_u64_or("run", "replicas", 1000);
    if (r.replicas == 0) throw ParameterError("[run] replicas must be positive");
    const auto cap = cfg.get_int_or("run", "horizon_cap", 1 << 20);
    if (cap < 1 || cap > std::int64_t{1} << 31) throw ParameterError("[run] horizon_cap must lie in [1, 2^31]");
    r.horizon_cap = static_cast<std::uint32_t>(cap);
    const auto lim = cfg.get_int_or("run", "exhaustion_limit", 8);
    if (lim < 0 || lim > 24) throw ParameterError("[run] exhaustion_limit must lie in [0, 24]");
    r.exhaustion_limit = static_cast<std::size_t>(lim);
    r.out = cfg.get_or("run", "out", "");
    const auto th = cfg.get_int_or("run", "threads", 1);
    if (th < 1 || th > 256) throw ParameterError("[run] threads must lie in [1, 256]");
    r.threads = static_cast<unsigned>(th);
    r.records = cfg.get_int_or("run", "records", 1) != 0;

    auto& st = c.stats;
    st.alpha = cfg.get_double_or("statistics", "alpha", 1e-3);
    st.min_expected = cfg.get_double_or("statistics", "min_expected", 5.0);
    st.tv_threshold = cfg.get_double_or("statistics", "tv_threshold", 0.02);
    st.tail_floor = cfg.get_double_or("statistics", "tail_floor", 1e-3);
    st.tail_points = static_cast<std::size_t>(cfg.get_int_or("statistics", "tail_points", 60));
    st.fit_from = cfg.get_double_or("statistics", "fit_from", 0.0);
    if (!(st.alpha > 0.0 && st.alpha < 1.0)) throw ParameterError("[statistics] alpha must lie in (0,1)");
    if (!(st.tail_floor > 0.0 && st.tail_floor < 1.0)) throw ParameterError("[statistics] tail_floor must lie in (0,1)");
    if (st.tail_points < 2) throw ParameterError("[statistics] tail_points must be at least 2");
    if (!(st.fit_from >= 0.0 && st.fit_from < 1.0)) throw ParameterError("[statistics] fit_from must lie in [0,1)");

    auto& co = c.conditions;
    co.p_c = cfg.get_double_or("conditions", "p_c", default_site_threshold(d));
    co.mixing_max = static_cast<int>(cfg.get_int_or("conditions", "mixing_max", 3));
    co.mixing = cfg.get_or("conditions", "mixing", "strong");
    mixing_kind_from(co.mixing);
    co.limits.boundary = cfg.get_u64_or("conditions", "boundary_limit", co.limits.boundary);
    co.limits.interior = cfg.get_u64_or("conditions", "interior_limit", co.limits.interior);

    auto& dg = c.diag;
    dg.kind = cfg.get_or("diag", "kind", "block");
    if (dg.kind != "block" && dg.kind != "remark" && dg.kind != "family" && dg.kind != "ratio")
      throw ParameterError("[diag] kind must be block, remark, family or ratio");
    dg.k = static_cast<int>(cfg.get_int_or("diag", "k", 4));
    dg.families = static_cast<std::size_t>(cfg.get_int_or("diag", "families", 50));
    dg.max_size = static_cast<std::size_t>(cfg.get_int_or("diag", "max_size", 3));
    dg.random_larger = static_cast<std::size_t>(cfg.get_int_or("diag", "random_larger", 200));
    const std::string mode = cfg.get_or("diag", "mode", "exact");
    if (mode != "exact" && mode != "monte_carlo") throw ParameterError("[diag] mode must be exact or monte_carlo");
    dg.exact = mode == "exact";
    dg.draws = cfg.get_u64_or("diag", "draws", 100000);
    dg.z = cfg.get_double_or("diag", "z", 3.0);
    dg.ratio_outer = static_cast<int>(cfg.get_int_or("diag", "ratio_outer", 3));
    dg.ratio_inner = static_cast<int>(cfg.get_int_or("diag", "ratio_inner", 0));
    dg.ratio_boundaries = cfg.get_or("diag", "ratio_boundaries", "extremes");
    if (dg.ratio_boundaries != "extremes" && dg.ratio_boundaries != "random")
      throw ParameterError("[diag] ratio_boundaries must be extremes or random");
    return c;
  }
};

// Command line values that replace config entries before validation.
struct Overrides {
  std::optional<std::uint64_t> seed, replicas;
  std::optional<std::string> out, substrate;
  std::optional<std::uint32_t> horizon_cap;
  std::optional<std::size_t> exhaustion_limit;

  void apply(KeyValueConfig& cfg) const {
    if (seed) cfg.set("run", "seed", std::to_string(*seed));
    if (replicas) cfg.set("run", "replicas", std::to_string(*replicas));
    if (out) cfg.set("run", "out", *out);
    if (substrate) cfg.set("substrate", "kind", *substrate);
    if (horizon_cap) cfg.set("run", "horizon_cap", std::to_string(*horizon_cap));
    if (exhaustion_limit) cfg.set("run", "exhaustion_limit", std::to_string(*exhaustion_limit));
  }
};

// Runs fn(i) for i in [0, n) on up to `threads` workers. Results must be
// stored by index.
inline void parallel_for(std::uint64_t n, unsigned threads, const std::function<void(std::uint64_t)>& fn) {
  if (threads <= 1 || n < 2) {
    for (std::uint64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr err;
  std::mutex m;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      while (true) {
        const std::uint64_t i = next++;
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lk(m);
          if (!err) err = std::current_exception();
          next = n;
        }
      }
    });
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

struct Report {
  nlohmann::json summary;
  bool ok = true;
};

namespace detail {

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw ParameterError("cannot write '" + path + "'");
  f << text;
}

inline FixedPlan fixed_from(const ExperimentConfig& c) {
  FixedOptions o;
  o.U = c.schedule.coupled;
  o.p = c.schedule.p;
  o.norm = c.schedule.norm;
  o.contract_r = c.schedule.contract_r;
  o.contract_s = c.schedule.contract_s;
  return fixed_plan(c.spec, c.schedule.block, c.schedule.coupling, o);
}

inline nlohmann::json verdict_json(const ConditionVerdict& v) {
  return {{"name", v.name}, {"value", v.value}, {"threshold", v.threshold}, {"pass", v.pass}};
}

}  // namespace detail

// Condition checkers plus gamma and mixing presets.
inline Report cmd_conditions(const ExperimentConfig& c) {
  Report r;
  auto& j = r.summary;
  j = c.provenance();
  j["command"] = "conditions";
  j["model"] = c.spec.describe();
  const auto attempt = [&](const std::string& key, const std::function<nlohmann::json()>& fn,
                           const std::string& hint) {
    try {
      j[key] = fn();
    } catch (const CapacityError& e) {
      j[key] = {{"error", e.what()}, {"suggestion", hint}};
    } catch (const InfeasibleBoundary& e) {
      j[key] = {{"error", e.what()}};
    }
  };
  attempt("high_noise", [&] { return detail::verdict_json(check_high_noise(c.spec)); },
          "use a smaller alphabet or dimension");
  attempt("dobrushin", [&] { return detail::verdict_json(check_dobrushin(c.spec)); },
          "use a smaller alphabet or dimension");
  attempt("disagreement_percolation",
          [&] { return detail::verdict_json(check_disagreement_percolation(c.spec, c.conditions.p_c)); },
          "use a smaller alphabet or dimension");
  const int d = c.spec.dim();
  attempt("gamma_site",
          [&] { return nlohmann::json(gamma(c.spec, origin_region(d), origin_region(d), c.conditions.limits)); },
          "use a smaller alphabet or dimension");
  attempt("gamma_box1_site",
          [&] { return nlohmann::json(gamma(c.spec, ball(1, d), origin_region(d), c.conditions.limits)); },
          "raise [conditions] boundary_limit or use a smaller alphabet");
  attempt("mixing",
          [&] {
            const auto rep = mixing_profile(c.spec, mixing_kind_from(c.conditions.mixing),
                                            box_cases(d, c.conditions.mixing_max, c.conditions.limits),
                                            c.conditions.limits);
            nlohmann::json m = rep.to_json();
            m["kind"] = c.conditions.mixing;
            return m;
          },
          "lower [conditions] mixing_max or raise boundary_limit");
  return r;
}

// CFTP draws. On a torus the whole configuration is sampled and compared
// with the enumerated Gibbs law; on the window the value at the origin is
// sampled.
inline Report cmd_sample(const ExperimentConfig& c) {
  if (c.schedule.kind != "fixed") throw ParameterError("sample runs fixed schedules");
  const FixedPlan plan = detail::fixed_from(c);
  const RandomField base(c.run.seed);
  const std::uint64_t R = c.run.replicas;
  const int q = c.spec.q();
  Report r;
  auto& j = r.summary;
  j = c.provenance();
  j["command"] = "sample";
  j["model"] = c.spec.describe();
  j["substrate"] = c.substrate.str();
  j["schedule"] = plan.to_json();
  std::vector<std::uint64_t> codes(R);
  std::vector<std::uint32_t> horizons(R);
  std::vector<char> coalesced(R);
  std::vector<std::uint64_t> widened(R);
  std::vector<double> law;
  if (c.substrate.torus) {
    const Torus& t = *c.substrate.torus;
    law = torus_law(c.spec, t, std::uint64_t{1} << 22);
    parallel_for(R, c.run.threads, [&](std::uint64_t i) {
      const TorusSample s = cftp_torus(c.spec, *plan.schedule, base.replica(i), t, c.run.horizon_cap,
                                       c.run.exhaustion_limit);
      codes[i] = config_code(s.values, q);
      horizons[i] = s.horizon;
      coalesced[i] = s.coalesced;
      widened[i] = s.widened_steps;
    });
  } else {
    law.assign(q, 0.0);
    parallel_for(R, c.run.threads, [&](std::uint64_t i) {
      const CftpResult s = cftp_value(c.spec, *plan.schedule, base.replica(i), Vertex::origin(c.spec.dim()),
                                      c.run.horizon_cap, c.run.exhaustion_limit);
      codes[i] = s.value;
      horizons[i] = s.T;
      coalesced[i] = s.coalesced;
      widened[i] = s.widened_steps;
    });
  }
  std::vector<std::uint64_t> counts(c.substrate.torus ? law.size() : static_cast<std::size_t>(q), 0);
  std::uint64_t censored = 0;
  for (std::uint64_t i = 0; i < R; ++i) {
    if (!coalesced[i]) ++censored;
    else ++counts[codes[i]];
  }
  const std::uint64_t used = R - censored;
  j["replicas"] = R;
  j["censored"] = censored;
  if (!c.run.out.empty() && c.run.records) {
    std::ofstream f(c.run.out);
    if (!f) throw ParameterError("cannot write '" + c.run.out + "'");
    nlohmann::json head = c.provenance();
    head["type"] = "header";
    head["command"] = "sample";
    f << head.dump() << '\n';
    for (std::uint64_t i = 0; i < R; ++i) {
      nlohmann::json rec{{"type", "draw"}, {"replica", i}, {"coalesced", bool(coalesced[i])},
                         {"horizon", horizons[i]}, {"widened_steps", widened[i]}};
      if (coalesced[i]) rec[c.substrate.torus ? "code" : "value"] = codes[i];
      f << rec.dump() << '\n';
    }
  }
  if (used == 0) {
    r.ok = false;
    j["error"] = "no draw coalesced within the horizon cap";
    return r;
  }
  if (c.substrate.torus) {
    const auto chi = chi_square_gof(counts, law, c.stats.min_expected);
    const double tv = empirical_tv(counts, law);
    // Mean plug-in TV of an exact sampler at this sample size.
    double expected_tv = 0.0;
    for (double p : law) expected_tv += std::sqrt(p * (1.0 - p) / (2.0 * M_PI * double(used)));
    j["states"] = law.size();
    j["support"] = std::count_if(law.begin(), law.end(), [](double p) { return p > 0.0; });
    j["tv"] = tv;
    j["tv_threshold"] = c.stats.tv_threshold;
    j["tv_expected_exact_sampler"] = expected_tv;
    j["chi_square"] = {{"statistic", chi.statistic}, {"dof", chi.dof}, {"p_value", chi.p_value}, {"cells", chi.cells}};
    j["alpha"] = c.stats.alpha;
    r.ok = tv < c.stats.tv_threshold && chi.p_value > c.stats.alpha;
  } else {
    nlohmann::json freq = nlohmann::json::array();
    for (int a = 0; a < q; ++a) {
      const double f = double(counts[a]) / double(used);
      freq.push_back({{"symbol", c.spec.label(static_cast<Symbol>(a))}, {"frequency", f},
                      {"se", binomial_se(f, used)}});
    }
    j["frequencies"] = freq;
    if (c.spec.boundary_independent()) {
      // The law at a site is then the normalized vertex weights.
      std::vector<double> w(q);
      double tot = 0.0;
      for (int a = 0; a < q; ++a) tot += w[a] = c.spec.vertex_weight(static_cast<Symbol>(a));
      for (double& x : w) x /= tot;
      const auto chi = chi_square_gof(counts, w, c.stats.min_expected);
      j["chi_square"] = {{"statistic", chi.statistic}, {"dof", chi.dof}, {"p_value", chi.p_value}};
      r.ok = chi.p_value > c.stats.alpha;
    }
  }
  j["pass"] = r.ok;
  return r;
}

// Survival table of the backward coalescence time at the origin, or of the
// stage-success time in growing mode.
inline Report cmd_tails(const ExperimentConfig& c) {
  const RandomField base(c.run.seed);
  const std::uint64_t R = c.run.replicas;
  std::vector<std::uint32_t> times(R);
  std::vector<bool> cens(R);
  Report r;
  auto& j = r.summary;
  j = c.provenance();
  j["command"] = "tails";
  j["model"] = c.spec.describe();
  const Vertex o = Vertex::origin(c.spec.dim());
  if (c.schedule.kind == "fixed") {
    const FixedPlan plan = detail::fixed_from(c);
    j["schedule"] = plan.to_json();
    std::vector<char> cc(R);
    parallel_for(R, c.run.threads, [&](std::uint64_t i) {
      const RandomField f = base.replica(i);
      if (c.substrate.torus) {
        SetChain chain(c.spec, *plan.schedule, f, c.substrate.substrate(c.spec.dim()), c.run.exhaustion_limit);
        const CftpResult s = cftp_value(chain, *plan.schedule, o, c.run.horizon_cap);
        times[i] = s.T;
        cc[i] = !s.coalesced;
      } else {
        const CftpResult s = cftp_value(c.spec, *plan.schedule, f, o, c.run.horizon_cap, c.run.exhaustion_limit);
        times[i] = s.T;
        cc[i] = !s.coalesced;
      }
    });
    for (std::uint64_t i = 0; i < R; ++i) cens[i] = cc[i];
    j["time"] = "T";
  } else {
    const GrowingPlan plan = growing_schedule(c.spec, c.schedule.growing);
    j["schedule"] = plan.to_json();
    const auto sched = plan.schedule();
    std::vector<char> cc(R), order_ok(R, 1);
    parallel_for(R, c.run.threads, [&](std::uint64_t i) {
      const RandomField f = base.replica(i);
      const TPrime tp = t_prime(plan, *sched, f, o);
      if (!tp.n) {
        times[i] = static_cast<std::uint32_t>(plan.stages.size());
        cc[i] = 1;
        return;
      }
      times[i] = *tp.n;
      const CftpResult s = cftp_value(c.spec, *sched, f, o, *tp.n, c.run.exhaustion_limit);
      order_ok[i] = s.coalesced && s.T <= *tp.n;
    });
    std::uint64_t violations = 0;
    for (std::uint64_t i = 0; i < R; ++i) {
      cens[i] = cc[i];
      violations += !order_ok[i];
    }
    j["time"] = "T_prime";
    j["order_violations"] = violations;
    r.ok = violations == 0;
  }
  const TailTable tab = tail_table(times, cens, c.stats.tail_floor, c.stats.tail_points, c.stats.fit_from);
  j["table"] = tab.summary();
  if (!c.run.out.empty()) {
    const auto prov = c.provenance();
    detail::write_text(c.run.out, "# config_hash=" + prov["config_hash"].get<std::string>() +
                                      " seed=" + std::to_string(c.run.seed) + " version=" + version() + "\n" +
                                      tab.to_csv());
  }
  j["pass"] = r.ok;
  return r;
}

// Coupling diagnostics: optimal-family equalities, the leave-one-out
// fixture, contraction sweeps on a block, or the pairwise ratio coupling.
inline Report cmd_coupling_diag(const ExperimentConfig& c) {
  Report r;
  auto& j = r.summary;
  j = c.provenance();
  j["command"] = "coupling-diag";
  j["kind"] = c.diag.kind;
  const auto& dg = c.diag;
  if (dg.kind == "remark") {
    const auto rep = family_report(leave_one_out_family(dg.k), Region(1, {Vertex{0}}));
    j["report"] = rep.to_json();
    double worst_tv_err = 0.0;
    for (int a = 0; a < dg.k; ++a)
      for (int b = a + 1; b < dg.k; ++b) worst_tv_err = std::max(worst_tv_err, std::abs(rep.tv[a][b] - 1.0 / (dg.k - 1)));
    j["pairwise_tv_expected"] = 1.0 / (dg.k - 1);
    j["pairwise_tv_max_error"] = worst_tv_err;
    r.ok = worst_tv_err == 0.0 && rep.gamma == 0.0 && rep.worst_disagreement >= 2.0 / dg.k;
  } else if (dg.kind == "family") {
    std::mt19937_64 rng(c.run.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    const Region site(1, {Vertex{0}});
    for (std::size_t t = 0; t < dg.families; ++t) {
      const int members = 1 + static_cast<int>(rng() % 5), symbols = 1 + static_cast<int>(rng() % 6);
      std::vector<Pmf> fam;
      for (int m = 0; m < members; ++m) {
        std::map<Config, double> masses;
        for (int a = 0; a < symbols; ++a)
          if (u(rng) < 0.8 || a == 0) masses[{static_cast<Symbol>(a)}] = u(rng) + 1e-3;
        fam.push_back(Pmf::from_masses(site, masses));
      }
      const auto rep = family_report(fam, site);
      worst = std::max(worst, std::abs(rep.coincidence - rep.gamma));
    }
    j["families"] = dg.families;
    j["max_abs_error"] = worst;
    r.ok = worst <= 1e-12;
  } else if (dg.kind == "ratio") {
    const int d = c.spec.dim();
    const Region V = ball(dg.ratio_outer, d), U = ball(dg.ratio_inner, d);
    const Region dV = boundary(V);
    Config tau(dV.size(), 0), tau2(dV.size(), static_cast<Symbol>(c.spec.q() - 1));
    if (dg.ratio_boundaries == "random") {
      std::mt19937_64 rng(c.run.seed);
      for (auto& x : tau) x = static_cast<Symbol>(rng() % c.spec.q());
      for (auto& x : tau2) x = static_cast<Symbol>(rng() % c.spec.q());
    }
    RatioCoupling rc(c.spec, V, U, tau, tau2);
    const double tv = tv_distance(rc.marginal_U(false), rc.marginal_U(true));
    const RandomField base(c.run.seed);
    FieldSource src(base);
    std::uint64_t violations = 0, differ = 0, agree_B = 0;
    for (std::uint64_t n = 1; n <= dg.draws; ++n) {
      const RatioSample s = rc.sample(Draw{&src, Vertex::origin(d), static_cast<std::uint32_t>(n)});
      agree_B += s.agree_B;
      violations += s.agree_B && !s.agree_U;
      differ += !s.agree_U;
    }
    const double pd = double(differ) / double(dg.draws);
    // Standard error at the null boundary P = TV; the plug-in one vanishes
    // when no draw disagrees.
    const double se = binomial_se(tv, dg.draws);
    j["r_star"] = rc.r_star();
    j["draws"] = dg.draws;
    j["containment_violations"] = violations;
    j["shell_agreement"] = double(agree_B) / double(dg.draws);
    j["stage1_gamma"] = rc.stage1_gamma();
    j["disagreement_on_U"] = pd;
    j["disagreement_se"] = se;
    j["exact_tv"] = tv;
    r.ok = violations == 0 && pd >= tv - dg.z * se;
  } else {
    const FixedPlan plan = detail::fixed_from(c);
    const GrandCoupling& cp = *plan.coupling;
    j["coupling"] = cp.id();
    EstimatePlan ep;
    ep.exact = dg.exact;
    ep.draws = dg.draws;
    ep.seed = c.run.seed;
    ep.z = dg.z;
    if (const auto* oc = dynamic_cast<const OptimalCoupling*>(&cp)) {
      j["gamma"] = oc->gamma();
      j["family_size"] = oc->family()->size();
      j["exact_joint_allowed"] = exact_joint_allowed(cp);
      if (exact_joint_allowed(cp) || !dg.exact) {
        EstimatePlan cplan = ep;
        cplan.exact = dg.exact && exact_joint_allowed(cp);
        const Estimate e = coincidence_probability(cp, oc->coupled_region(), oc->family()->members, cplan);
        j["coincidence"] = {{"value", e.value}, {"se", e.se}, {"exact", e.exact}};
        j["coincidence_minus_gamma"] = e.value - oc->gamma();
      }
      const Estimate k = kappa(cp, ep.exact && !exact_joint_allowed(cp) ? EstimatePlan{false, ep.draws, ep.seed, ep.z} : ep);
      j["kappa"] = {{"value", k.value}, {"se", k.se}, {"exact", k.exact}};
    }
    try {
      EstimatePlan sp = ep;
      sp.exact = dg.exact && exact_joint_allowed(cp);
      const ContractionReport rep = contraction_sweep(cp, dg.max_size, dg.random_larger, sp);
      j["contraction"] = rep.to_json();
      r.ok = rep.pass;
    } catch (const CapacityError& e) {
      j["contraction"] = {{"skipped", e.what()}};
    } catch (const ContractError& e) {
      j["contraction"] = {{"skipped", e.what()}};
    }
  }
  j["pass"] = r.ok;
  if (!c.run.out.empty()) detail::write_text(c.run.out, j.dump(2) + "\n");
  return r;
}

// Builds the configured schedule; in growing mode also simulates the
// stage-success events against their product bound.
inline Report cmd_schedule_build(const ExperimentConfig& c) {
  Report r;
  auto& j = r.summary;
  j = c.provenance();
  j["command"] = "schedule-build";
  if (c.schedule.kind == "fixed") {
    j["plan"] = detail::fixed_from(c).to_json();
  } else {
    const GrowingPlan plan = growing_schedule(c.spec, c.schedule.growing);
    j["plan"] = plan.to_json();
    j["config"] = plan.to_config();
    nlohmann::json sims = nlohmann::json::array();
    for (std::size_t i = 0; i < plan.stages.size(); ++i) {
      if (!plan.stages[i].coupling) continue;
      const StageSuccess s = simulate_stage_success(plan, i, c.run.replicas, c.run.seed + i);
      sims.push_back(s.to_json());
      r.ok = r.ok && s.pass();
    }
    j["stage_success"] = sims;
    r.ok = r.ok && plan.recursion_holds();
    if (!c.run.out.empty()) {
      detail::write_text(c.run.out, "# config_hash=" + j["config_hash"].get<std::string>() + " seed=" +
                                        std::to_string(c.run.seed) + " version=" + version() + "\n" +
                                        plan.to_config());
    }
  }
  j["pass"] = r.ok;
  return r;
}

}  // namespace mrfcftp

#endif  // MRFCFTP_EXPERIMENTS_HPP
