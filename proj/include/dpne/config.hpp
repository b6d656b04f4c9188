// Copyright 2026 The DPNE Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Experiment configuration: one flat text file of `key = value` lines.
// `#` starts a comment; lists are separated by whitespace or commas. See
// docs/config.md for the full key reference.

#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "dpne/errors.hpp"
#include "dpne/game.hpp"
#include "dpne/ledger.hpp"
#include "dpne/mechanism.hpp"
#include "dpne/schedules.hpp"
#include "dpne/seeker.hpp"
#include "dpne/topology.hpp"

namespace dpne {

struct TopologyConfig {
  std::string preset = "ring";  // ring | complete | path | star | edges
  double weight = 1.0;
  std::vector<Edge> edges;

  Topology Build(int n) const {
    if (preset == "ring") return Topology::Ring(n, weight);
    if (preset == "complete") return Topology::Complete(n, weight);
    if (preset == "path") return Topology::Path(n, weight);
    if (preset == "star") return Topology::Star(n, weight);
    if (preset == "edges") return Topology::Build(edges, n);
    throw ConfigError("topology.preset: unknown preset '" + preset + "'");
  }
};

struct RunConfig {
  int iterations = 1500;
  int seeds = 20;
  std::uint64_t base_seed = 1;
  std::optional<std::vector<double>> explicit_init;  // empty: uniform
  int decimation = 1;
  int threads = 0;  // 0: hardware concurrency

  std::uint64_t Seed(int run_id) const {
    return base_seed + static_cast<std::uint64_t>(run_id);
  }
};

struct BaselineConfig {
  bool enabled = false;
  BaselineParams params;
};

struct AttackConfig {
  bool enabled = false;
  int target = 0;
};

struct AccountantConfig {
  bool enabled = false;
  std::optional<double> c_tilde;  // empty: estimate from coupled runs
  AdjacencySpec adjacency;
  int seeds = 10;
  // Coupled runs use seeds base_seed + seed_offset + r.
  std::uint64_t seed_offset = 100000;
  long horizon = -1;  // -1: run.iterations
};

struct ExperimentConfig {
  QuadraticGame game;
  TopologyConfig topology;
  MechanismParams mechanism;
  Schedules schedules;
  RunConfig run;
  BaselineConfig baseline;
  AttackConfig attack;
  AccountantConfig accountant;

  std::vector<double> InitialDecisions(const GameInstance& g, int run_id) const {
    if (run.explicit_init) return *run.explicit_init;
    return UniformInit(g, run.Seed(run_id));
  }
  long AccountantHorizon() const {
    return accountant.horizon >= 0 ? accountant.horizon : run.iterations;
  }
};

namespace detail {

inline std::string_view Trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

class KeyValues {
 public:
  struct Entry {
    std::string value;
    int line = 0;
  };

  static KeyValues Parse(std::istream& in) {
    KeyValues kv;
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
      ++line;
      std::string_view s(raw);
      if (auto hash = s.find('#'); hash != std::string_view::npos) {
        s = s.substr(0, hash);
      }
      s = Trim(s);
      if (s.empty()) continue;
      const auto eq = s.find('=');
      if (eq == std::string_view::npos) {
        throw ConfigError("line " + std::to_string(line) +
                          ": expected 'key = value'");
      }
      const std::string key(Trim(s.substr(0, eq)));
      const std::string value(Trim(s.substr(eq + 1)));
      if (key.empty()) {
        throw ConfigError("line " + std::to_string(line) + ": empty key");
      }
      if (kv.entries_.contains(key)) {
        throw ConfigError("line " + std::to_string(line) + ": duplicate key '" +
                          key + "' (first set on line " +
                          std::to_string(kv.entries_[key].line) + ")");
      }
      kv.entries_[key] = {value, line};
    }
    return kv;
  }

  bool Has(const std::string& key) const { return entries_.contains(key); }

  const Entry& Require(const std::string& key) {
    auto it = entries_.find(key);
    if (it == entries_.end()) {
      throw ConfigError("missing required key '" + key + "'");
    }
    used_.insert(key);
    return it->second;
  }

  std::optional<Entry> Get(const std::string& key) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    used_.insert(key);
    return it->second;
  }

  // Every key must have been consumed.
  void RejectUnknown() const {
    for (const auto& [key, entry] : entries_) {
      if (!used_.contains(key)) {
        throw ConfigError("line " + std::to_string(entry.line) +
                          ": unknown key '" + key + "'");
      }
    }
  }

 private:
  std::map<std::string, Entry> entries_;
  std::set<std::string> used_;
};

inline std::string Where(const std::string& key, const KeyValues::Entry& e) {
  return "line " + std::to_string(e.line) + ": key '" + key + "'";
}

inline double ToDouble(const std::string& key, const KeyValues::Entry& e,
                       std::string_view token) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw ConfigError(Where(key, e) + ": '" + std::string(token) +
                      "' is not a number");
  }
  return v;
}

inline std::vector<std::string_view> Tokens(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == ',')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != ',') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

class Reader {
 public:
  explicit Reader(KeyValues kv) : kv_(std::move(kv)) {}

  double Number(const std::string& key) {
    const auto& e = kv_.Require(key);
    return ToDouble(key, e, e.value);
  }
  double Number(const std::string& key, double fallback) {
    const auto e = kv_.Get(key);
    return e ? ToDouble(key, *e, e->value) : fallback;
  }

  long Integer(const std::string& key, std::optional<long> fallback = std::nullopt) {
    const auto e = fallback ? kv_.Get(key) : std::optional(kv_.Require(key));
    if (!e) return *fallback;
    long v = 0;
    const std::string& s = e->value;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw ConfigError(Where(key, *e) + ": '" + s + "' is not an integer");
    }
    return v;
  }

  std::vector<double> List(const std::string& key) {
    const auto& e = kv_.Require(key);
    std::vector<double> out;
    for (std::string_view t : Tokens(e.value)) out.push_back(ToDouble(key, e, t));
    if (out.empty()) throw ConfigError(Where(key, e) + ": empty list");
    return out;
  }

  std::string Text(const std::string& key, std::optional<std::string> fallback = std::nullopt) {
    const auto e = fallback ? kv_.Get(key) : std::optional(kv_.Require(key));
    return e ? e->value : *fallback;
  }

  bool Flag(const std::string& key, bool fallback) {
    const auto e = kv_.Get(key);
    if (!e) return fallback;
    if (e->value == "true" || e->value == "1" || e->value == "yes") return true;
    if (e->value == "false" || e->value == "0" || e->value == "no") return false;
    throw ConfigError(Where(key, *e) + ": expected true or false");
  }

  std::optional<KeyValues::Entry> Raw(const std::string& key) { return kv_.Get(key); }

  void Finish() const { kv_.RejectUnknown(); }

 private:
  KeyValues kv_;
};

// "0-1:0.4, 1-2:0.4" or "0-1 1-2" (unit weight).
inline std::vector<Edge> ParseEdges(const std::string& key,
                                    const KeyValues::Entry& e) {
  std::vector<Edge> edges;
  for (std::string_view t : Tokens(e.value)) {
    const auto dash = t.find('-');
    if (dash == std::string_view::npos || dash == 0) {
      throw ConfigError(Where(key, e) + ": edge '" + std::string(t) +
                        "' is not of the form i-j[:w]");
    }
    const auto colon = t.find(':');
    const std::string_view a = t.substr(0, dash);
    const std::string_view b =
        t.substr(dash + 1, colon == std::string_view::npos ? std::string_view::npos
                                                            : colon - dash - 1);
    Edge edge;
    edge.i = static_cast<int>(ToDouble(key, e, a));
    edge.j = static_cast<int>(ToDouble(key, e, b));
    if (colon != std::string_view::npos) {
      edge.weight = ToDouble(key, e, t.substr(colon + 1));
    }
    edges.push_back(edge);
  }
  return edges;
}

}  // namespace detail

inline void Validate(const ExperimentConfig& cfg);

inline ExperimentConfig ParseConfig(std::istream& in) {
  detail::Reader r(detail::KeyValues::Parse(in));
  ExperimentConfig cfg;

  const std::string family = r.Text("game.family");
  if (family != "quadratic") {
    throw ConfigError("game.family: only 'quadratic' is supported, got '" +
                      family + "'");
  }
  cfg.game.targets = r.List("game.targets");
  const std::vector<double> lower = r.List("game.lower");
  const std::vector<double> upper = r.List("game.upper");
  if (lower.size() != cfg.game.targets.size() ||
      upper.size() != cfg.game.targets.size()) {
    throw ConfigError("game.lower/game.upper must have one entry per target");
  }
  cfg.game.decision_sets.clear();
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (!(lower[i] < upper[i])) {
      throw ConfigError("game: decision set " + std::to_string(i) +
                        " needs lower < upper");
    }
    cfg.game.decision_sets.push_back({lower[i], upper[i]});
  }
  cfg.game.coupling = r.Number("game.beta");
  cfg.game.offset = r.Number("game.offset");

  cfg.topology.preset = r.Text("topology.preset");
  cfg.topology.weight = r.Number("topology.weight", 1.0);
  if (cfg.topology.preset == "edges") {
    const auto e = r.Raw("topology.edges");
    if (!e) throw ConfigError("topology.preset = edges needs topology.edges");
    cfg.topology.edges = detail::ParseEdges("topology.edges", *e);
  }

  cfg.mechanism.sigma = r.Number("mechanism.sigma");
  cfg.mechanism.a = r.Number("mechanism.a");
  cfg.mechanism.c = r.Number("mechanism.c");
  cfg.mechanism.d = r.Number("mechanism.d");

  cfg.schedules.lambda0 = r.Number("schedule.lambda0");
  cfg.schedules.b_lambda = r.Number("schedule.b_lambda");
  cfg.schedules.p = r.Number("schedule.p");
  cfg.schedules.gamma0 = r.Number("schedule.gamma0");
  cfg.schedules.b_gamma = r.Number("schedule.b_gamma");
  cfg.schedules.q = r.Number("schedule.q");

  cfg.run.iterations = static_cast<int>(r.Integer("run.iterations"));
  cfg.run.seeds = static_cast<int>(r.Integer("run.seeds"));
  cfg.run.base_seed = static_cast<std::uint64_t>(r.Integer("run.base_seed", 1));
  cfg.run.decimation = static_cast<int>(r.Integer("run.decimation", 1));
  cfg.run.threads = static_cast<int>(r.Integer("run.threads", 0));
  const std::string init = r.Text("run.init", "uniform");
  if (init != "uniform") {
    std::istringstream tmp("run.init = " + init);
    detail::KeyValues one = detail::KeyValues::Parse(tmp);
    cfg.run.explicit_init = detail::Reader(std::move(one)).List("run.init");
  }

  cfg.baseline.enabled = r.Flag("baseline.enabled", false);
  cfg.baseline.params.noise_scale = r.Number("baseline.noise_scale", 1.0);
  cfg.baseline.params.noise_decay = r.Number("baseline.noise_decay", 0.97);
  cfg.baseline.params.lambda0 = r.Number("baseline.lambda0", 0.03);
  cfg.baseline.params.lambda_decay = r.Number("baseline.lambda_decay", 0.96);

  cfg.attack.enabled = r.Flag("attack.enabled", false);
  cfg.attack.target = static_cast<int>(r.Integer("attack.target", 0));

  cfg.accountant.enabled = r.Flag("accountant.enabled", false);
  const std::string c_tilde = r.Text("accountant.c_tilde", "estimate");
  if (c_tilde != "estimate") {
    std::istringstream tmp("accountant.c_tilde = " + c_tilde);
    cfg.accountant.c_tilde =
        detail::Reader(detail::KeyValues::Parse(tmp)).Number("accountant.c_tilde");
  }
  cfg.accountant.adjacency.perturbed_player =
      static_cast<int>(r.Integer("accountant.player", 0));
  cfg.accountant.adjacency.alpha = r.Number("accountant.alpha", 0.5);
  cfg.accountant.adjacency.kappa = r.Number("accountant.kappa", 0.01);
  cfg.accountant.seeds = static_cast<int>(r.Integer("accountant.seeds", 10));
  cfg.accountant.horizon = r.Integer("accountant.horizon", -1);

  r.Finish();
  Validate(cfg);
  return cfg;
}

inline ExperimentConfig LoadConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  try {
    return ParseConfig(in);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// Structural and schedule checks performed before any run.
inline void Validate(const ExperimentConfig& cfg) {
  const int n = cfg.game.num_players();
  try {
    cfg.mechanism.Validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (cfg.run.iterations < 1) throw ConfigError("run.iterations must be >= 1");
  if (cfg.run.seeds < 1) throw ConfigError("run.seeds must be >= 1");
  if (cfg.run.decimation < 1) throw ConfigError("run.decimation must be >= 1");
  if (cfg.run.explicit_init) {
    if (static_cast<int>(cfg.run.explicit_init->size()) != n) {
      throw ConfigError("run.init: need one value per player");
    }
    for (int i = 0; i < n; ++i) {
      if (!cfg.game.decision_sets[i].Contains((*cfg.run.explicit_init)[i])) {
        throw ConfigError("run.init: entry " + std::to_string(i) +
                          " outside its decision set");
      }
    }
  }
  if (cfg.attack.target < 0 || cfg.attack.target >= n) {
    throw ConfigError("attack.target out of range");
  }
  if (cfg.attack.enabled && cfg.run.decimation != 1) {
    throw ConfigError("attack needs run.decimation = 1");
  }
  const AdjacencySpec& adj = cfg.accountant.adjacency;
  if (adj.perturbed_player < 0 || adj.perturbed_player >= n) {
    throw ConfigError("accountant.player out of range");
  }
  if (!(adj.alpha > 0.0)) throw ConfigError("accountant.alpha must be > 0");
  if (cfg.accountant.seeds < 1) throw ConfigError("accountant.seeds must be >= 1");
  if (cfg.accountant.c_tilde && !(*cfg.accountant.c_tilde > 0.0)) {
    throw ConfigError("accountant.c_tilde must be > 0");
  }
  if (cfg.baseline.enabled) {
    try {
      cfg.baseline.params.Validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }

  ScheduleValidity v;
  try {
    v = ValidateSchedules(cfg.schedules);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (!v.convergence_ok) {
    throw ConfigError("schedule: convergence condition violated: " +
                      v.convergence_reason);
  }
  if (cfg.accountant.enabled && !v.privacy_ok) {
    throw ConfigError(
        "schedule: privacy accounting requested but the infinite-horizon "
        "budget is unbounded: " + v.privacy_reason);
  }
}

}  // namespace dpne
