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

#ifndef MRFCFTP_CONFIG_HPP
#define MRFCFTP_CONFIG_HPP

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mrfcftp/errors.hpp"

namespace mrfcftp {

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::string tok;
  std::istringstream is(s);
  while (std::getline(is, tok, sep)) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// Flat sections of key = value pairs. '#' starts a comment. Keys keep
// their file order; a repeated key overrides the earlier value.
class KeyValueConfig {
 public:
  struct Entry {
    std::string section, key, value;
  };

  static KeyValueConfig parse(const std::string& text) {
    KeyValueConfig cfg;
    std::istringstream is(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          throw ParameterError("config line " + std::to_string(lineno) +
                               ": unterminated section header");
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ParameterError("config line " + std::to_string(lineno) +
                             ": expected key = value");
      cfg.set(section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
  }

  static KeyValueConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParameterError("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
  }

  void set(const std::string& section, const std::string& key,
           const std::string& value) {
    for (auto& e : entries_)
      if (e.section == section && e.key == key) {
        e.value = value;
        return;
      }
    entries_.push_back({section, key, value});
  }

  bool has(const std::string& section, const std::string& key) const {
    return find(section, key) != nullptr;
  }

  std::string get(const std::string& section, const std::string& key) const {
    const Entry* e = find(section, key);
    if (!e) throw ParameterError("config is missing [" + section + "] " + key);
    return e->value;
  }

  std::string get_or(const std::string& section, const std::string& key,
                     const std::string& dflt) const {
    const Entry* e = find(section, key);
    return e ? e->value : dflt;
  }

  double get_double(const std::string& section, const std::string& key) const {
    return to_double(section, key, get(section, key));
  }
  double get_double_or(const std::string& section, const std::string& key,
                       double dflt) const {
    const Entry* e = find(section, key);
    return e ? to_double(section, key, e->value) : dflt;
  }
  std::int64_t get_int_or(const std::string& section, const std::string& key,
                          std::int64_t dflt) const {
    const Entry* e = find(section, key);
    if (!e) return dflt;
    try {
      std::size_t pos = 0;
      long long v = std::stoll(e->value, &pos);
      if (pos != e->value.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw ParameterError("[" + section + "] " + key + " must be an integer, got '" +
                           e->value + "'");
    }
  }
  std::uint64_t get_u64_or(const std::string& section, const std::string& key,
                           std::uint64_t dflt) const {
    const Entry* e = find(section, key);
    if (!e) return dflt;
    try {
      return std::stoull(e->value);
    } catch (const std::exception&) {
      throw ParameterError("[" + section + "] " + key + " must be unsigned");
    }
  }

  std::vector<Entry> section(const std::string& name) const {
    std::vector<Entry> out;
    for (const auto& e : entries_)
      if (e.section == name) out.push_back(e);
    return out;
  }

  const std::vector<Entry>& entries() const { return entries_; }

  // Canonical text: sections and keys in first-appearance order.
  std::string canonical() const {
    std::vector<std::string> order;
    for (const auto& e : entries_) {
      bool seen = false;
      for (const auto& s : order) seen = seen || s == e.section;
      if (!seen) order.push_back(e.section);
    }
    std::ostringstream os;
    for (const auto& s : order) {
      os << '[' << s << "]\n";
      for (const auto& e : entries_)
        if (e.section == s) os << e.key << " = " << e.value << '\n';
    }
    return os.str();
  }

  std::uint64_t hash() const { return fnv1a64(canonical()); }

 private:
  static double to_double(const std::string& section, const std::string& key,
                          const std::string& v) {
    try {
      std::size_t pos = 0;
      double d = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument("trailing");
      return d;
    } catch (const std::exception&) {
      throw ParameterError("[" + section + "] " + key + " must be a number, got '" +
                           v + "'");
    }
  }

  const Entry* find(const std::string& section, const std::string& key) const {
    for (const auto& e : entries_)
      if (e.section == section && e.key == key) return &e;
    return nullptr;
  }

  std::vector<Entry> entries_;
};

}  // namespace mrfcftp

#endif  // MRFCFTP_CONFIG_HPP
