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


#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mrfcftp/experiments.hpp"

int main(int argc, char** argv) {
  using namespace mrfcftp;
  CLI::App app{"mrfcftp: coupling from the past for Markov random fields on Z^d"};
  app.set_version_flag("--version", version());
  app.require_subcommand(1);

  std::string config_path;
  Overrides ov;
  std::uint64_t seed = 0, replicas = 0;
  std::uint32_t horizon_cap = 0;
  std::size_t exhaustion_limit = 0;
  std::string out, substrate;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "master seed");
    sub->add_option("--replicas", replicas, "number of replicas")->check(CLI::PositiveNumber);
    sub->add_option("--out", out, "artifact path");
    sub->add_option("--substrate", substrate, "torus:WxH or window");
    sub->add_option("--horizon-cap", horizon_cap, "largest backward horizon")->check(CLI::PositiveNumber);
    sub->add_option("--exhaustion-limit", exhaustion_limit, "exhaustive boundary enumeration limit (log2)");
  };
  CLI::App* conditions = app.add_subcommand("conditions", "check sufficient conditions and report gamma");
  CLI::App* sample = app.add_subcommand("sample", "draw CFTP samples and test them against the exact law");
  CLI::App* tails = app.add_subcommand("tails", "tabulate coalescence-time tails");
  CLI::App* diag = app.add_subcommand("coupling-diag", "coupling diagnostics");
  CLI::App* build = app.add_subcommand("schedule-build", "build a fixed or growing schedule");
  for (CLI::App* s : {conditions, sample, tails, diag, build}) add_common(s);

  CLI11_PARSE(app, argc, argv);

  try {
    KeyValueConfig cfg = KeyValueConfig::load(config_path);
    CLI::App* sub = app.get_subcommands().front();
    if (sub->count("--seed")) ov.seed = seed;
    if (sub->count("--replicas")) ov.replicas = replicas;
    if (sub->count("--out")) ov.out = out;
    if (sub->count("--substrate")) ov.substrate = substrate;
    if (sub->count("--horizon-cap")) ov.horizon_cap = horizon_cap;
    if (sub->count("--exhaustion-limit")) ov.exhaustion_limit = exhaustion_limit;
    ov.apply(cfg);
    const ExperimentConfig ec = ExperimentConfig::from(cfg);
    Report r;
    if (sub == conditions) r = cmd_conditions(ec);
    else if (sub == sample) r = cmd_sample(ec);
    else if (sub == tails) r = cmd_tails(ec);
    else if (sub == diag) r = cmd_coupling_diag(ec);
    else r = cmd_schedule_build(ec);
    std::cout << r.summary.dump(2) << '\n';
    return r.ok ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
