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

#ifndef MRFCFTP_MODEL_CONFIG_HPP
#define MRFCFTP_MODEL_CONFIG_HPP

#include <string>
#include <vector>

#include "mrfcftp/config.hpp"
#include "mrfcftp/model.hpp"

namespace mrfcftp {

// Reads the [model] section (and [edges] for custom models).
//
//   [model]
//   name = custom
//   dimension = 2
//   alphabet = a,b,c
//   vertex_weights = 1,2,1
//   edge_default = 1
//   [edges]
//   a,b = 0.5
//   c,c = forbid
inline Spec spec_from_config(const KeyValueConfig& cfg) {
  const std::string name = cfg.get("model", "name");
  const int d = static_cast<int>(cfg.get_int_or("model", "dimension", 2));
  if (name != "custom") {
    ModelParams p;
    for (const auto& e : cfg.section("model")) {
      if (e.key == "name" || e.key == "dimension") continue;
      p[e.key] = cfg.get_double("model", e.key);
    }
    return make_model(name, p, d);
  }

  auto labels = split_list(cfg.get("model", "alphabet"));
  const int q = static_cast<int>(labels.size());
  std::vector<double> vw(q, 1.0);
  if (cfg.has("model", "vertex_weights")) {
    auto ws = split_list(cfg.get("model", "vertex_weights"));
    if (static_cast<int>(ws.size()) != q)
      throw ParameterError("vertex_weights must list one weight per symbol");
    for (int i = 0; i < q; ++i) vw[i] = std::stod(ws[i]);
  }
  const double dflt = cfg.get_double_or("model", "edge_default", 1.0);
  std::vector<double> ew(q * q, dflt);
  auto index = [&](const std::string& l) {
    for (int i = 0; i < q; ++i)
      if (labels[i] == l) return i;
    throw ParameterError("edge table names unknown symbol '" + l + "'");
  };
  for (const auto& e : cfg.section("edges")) {
    auto pair = split_list(e.key);
    if (pair.size() != 2) throw ParameterError("edge key must be 'a,b': " + e.key);
    int a = index(pair[0]), b = index(pair[1]);
    double w = e.value == "forbid" ? 0.0 : std::stod(e.value);
    ew[a * q + b] = w;
    ew[b * q + a] = w;
  }
  return Spec("custom", d, labels, vw, ew);
}

}  // namespace mrfcftp

#endif  // MRFCFTP_MODEL_CONFIG_HPP
