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

// Multi-seed experiment harness: runs the private scheme, the unprivate
// variant and the noise-injection baseline over a seed range, aggregates
// distance-to-equilibrium and consensus statistics, runs the eavesdropper and
// the privacy accountant, and writes the CSV bundle.
//
// Every run is a pure function of (config, run id); seeds fan out to a thread
// pool and results are folded in run-id order, so a bundle is byte-identical
// across reruns.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dpne/adversary.hpp"
#include "dpne/config.hpp"
#include "dpne/errors.hpp"
#include "dpne/game.hpp"
#include "dpne/ledger.hpp"
#include "dpne/seeker.hpp"
#include "dpne/stats.hpp"

namespace dpne {

inline constexpr double kConservationTolerance = 1e-9;

// Process exit codes shared by the CLI and the tests.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitInvariant = 3;
inline constexpr double kExactInferenceTolerance = 1e-9;

// Calls fn(r) for r in [0, count) on up to `threads` workers.
inline void ParallelFor(int count, int threads,
                        const std::function<void(int)>& fn) {
  if (threads <= 0) {
    threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  }
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (int r = 0; r < count; ++r) fn(r);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (int r = next++; r < count && !failed; r = next++) {
        try {
          fn(r);
        } catch (...) {
          if (!failed.exchange(true)) error = std::current_exception();
        }
      }
    });
  }
  for (std::thread& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

inline double Distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(acc);
}

// sum_i (y_i - mean(y))^2
inline double ConsensusError(std::span<const double> y) {
  const double m = Mean(y);
  double acc = 0.0;
  for (double v : y) acc += (v - m) * (v - m);
  return acc;
}

struct VariantStats {
  std::string name;
  std::vector<int> k;
  std::vector<double> mean_distance;
  std::vector<double> var_distance;
  std::vector<double> mean_consensus;

  double initial_distance() const { return mean_distance.front(); }
  double final_distance() const { return mean_distance.back(); }
  double peak_consensus() const {
    return *std::max_element(mean_consensus.begin(), mean_consensus.end());
  }
  double final_consensus() const { return mean_consensus.back(); }
  // Mean distance at the stored iterate nearest to (not after) iteration k.
  double DistanceAt(int iteration) const {
    auto it = std::upper_bound(k.begin(), k.end(), iteration);
    return mean_distance.at(static_cast<std::size_t>(it - k.begin()) - 1);
  }
};

inline VariantStats Aggregate(const std::string& name,
                              const std::vector<Trajectory>& runs,
                              std::span<const double> equilibrium) {
  VariantStats st;
  st.name = name;
  st.k = runs.front().k;
  const std::size_t rows = st.k.size();
  for (std::size_t m = 0; m < rows; ++m) {
    std::vector<double> dist, cons;
    for (const Trajectory& t : runs) {
      dist.push_back(Distance(t.x[m], equilibrium));
      cons.push_back(ConsensusError(t.y[m]));
    }
    st.mean_distance.push_back(Mean(dist));
    st.var_distance.push_back(Variance(dist));
    st.mean_consensus.push_back(Mean(cons));
  }
  return st;
}

struct AttackSummary {
  int target = 0;
  int k_lo = 100;
  int k_hi = 1500;
  AttackReport private_report;    // run 0
  AttackReport unprivate_report;  // run 0
  std::vector<double> private_medians;    // per run
  std::vector<double> unprivate_medians;  // per run
  double private_median = 0.0;    // median over the pooled window errors
  double unprivate_median = 0.0;
  double rank_sum_p = 1.0;
  // Largest unprivate error where the target's projection was inactive.
  double max_exact_error = 0.0;
};

struct AccountantSummary {
  double c_tilde = 0.0;
  bool estimated = false;
  std::optional<CTildeEstimate> estimate;
  std::vector<LedgerEntry> entries;
  CumulativeDelta cumulative;
  int out_of_range = 0;
  std::string statement;
};

struct ExperimentResult {
  std::vector<double> equilibrium;
  std::vector<Trajectory> runs;  // private scheme, one per seed
  VariantStats algorithm;
  std::optional<VariantStats> unprivate;
  std::optional<VariantStats> baseline;
  std::vector<double> mean_trigger_rate;  // per player, averaged over runs
  int nontrigger_violations = 0;
  double max_conservation_error = 0.0;
  std::optional<AttackSummary> attack;
  std::optional<AccountantSummary> accountant;
  std::vector<std::string> invariant_failures;
};

inline std::vector<double> RequireEquilibrium(const QuadraticGame& game) {
  const NashSolution ne = SolveQuadraticEquilibrium(game);
  if (!ne.feasible()) {
    std::string who;
    for (int i : ne.violated) who += (who.empty() ? "" : ",") + std::to_string(i);
    throw ConfigError("equilibrium oracle: constraints active for players " + who);
  }
  return ne.x;
}

inline AccountantSummary RunAccountant(const ExperimentConfig& cfg,
                                       const GameInstance& game,
                                       const Topology& topo,
                                       std::span<const double> equilibrium) {
  AccountantSummary out;
  if (cfg.accountant.c_tilde) {
    out.c_tilde = *cfg.accountant.c_tilde;
  } else {
    const GameInstance adjacent =
        MakeAdjacent(game, cfg.accountant.adjacency, equilibrium);
    std::vector<std::uint64_t> seeds;
    for (int r = 0; r < cfg.accountant.seeds; ++r) {
      seeds.push_back(cfg.run.base_seed + cfg.accountant.seed_offset +
                      static_cast<std::uint64_t>(r));
    }
    out.estimate = EstimateCTilde(game, adjacent, topo, cfg.mechanism,
                                  cfg.schedules, cfg.run.iterations, seeds,
                                  cfg.accountant.adjacency.perturbed_player);
    out.c_tilde = out.estimate->c_tilde;
    out.estimated = true;
  }
  if (!(out.c_tilde > 0.0)) {
    throw ConfigError(
        "accountant: estimated C is zero (adjacent games never diverge); "
        "increase accountant.kappa or set accountant.c_tilde");
  }
  PrivacyLedger ledger(cfg.schedules, cfg.mechanism, out.c_tilde);
  ledger.AdvanceTo(cfg.AccountantHorizon());
  out.entries = ledger.entries();
  out.out_of_range = ledger.out_of_range();
  out.statement = ledger.Statement();
  out.cumulative = CumulativeDeltaSum(cfg.schedules, cfg.mechanism, out.c_tilde,
                                      cfg.AccountantHorizon());
  return out;
}

inline AttackSummary RunAttack(const ExperimentConfig& cfg,
                               const GameInstance& game, const Topology& topo,
                               const std::vector<Trajectory>& private_runs,
                               const std::vector<Trajectory>& unprivate_runs) {
  AttackSummary out;
  out.target = cfg.attack.target;
  out.k_hi = std::min(1500, cfg.run.iterations - 2);
  out.k_lo = std::min(100, out.k_hi);
  std::vector<double> pooled_private, pooled_unprivate;
  for (std::size_t r = 0; r < private_runs.size(); ++r) {
    const AttackReport p =
        Attack(private_runs[r], game, topo, cfg.schedules, out.target);
    const AttackReport u =
        Attack(unprivate_runs[r], game, topo, cfg.schedules, out.target);
    out.private_medians.push_back(p.MedianError(out.k_lo, out.k_hi));
    out.unprivate_medians.push_back(u.MedianError(out.k_lo, out.k_hi));
    for (std::size_t m = 0; m < u.k.size(); ++m) {
      const int k = u.k[m];
      if (k >= out.k_lo && k <= out.k_hi) {
        pooled_private.push_back(p.abs_error[m]);
        pooled_unprivate.push_back(u.abs_error[m]);
      }
      if (!unprivate_runs[r].projection_active[k][out.target]) {
        out.max_exact_error = std::max(out.max_exact_error, u.abs_error[m]);
      }
    }
    if (r == 0) {
      out.private_report = p;
      out.unprivate_report = u;
    }
  }
  out.private_median = Median(pooled_private);
  out.unprivate_median = Median(pooled_unprivate);
  out.rank_sum_p = RankSumPValue(out.private_medians, out.unprivate_medians);
  return out;
}

inline ExperimentResult RunExperiment(const ExperimentConfig& cfg) {
  Validate(cfg);
  ExperimentResult res;
  res.equilibrium = RequireEquilibrium(cfg.game);
  const GameInstance game = cfg.game.ToInstance();
  const Topology topo = cfg.topology.Build(game.num_players());
  const int seeds = cfg.run.seeds;
  const int n = game.num_players();

  RunOptions opts;
  opts.decimation = cfg.run.decimation;
  res.runs.resize(seeds);
  ParallelFor(seeds, cfg.run.threads, [&](int r) {
    const std::vector<double> x0 = cfg.InitialDecisions(game, r);
    res.runs[r] = Run(game, topo, cfg.mechanism, cfg.schedules,
                      cfg.run.iterations, x0, cfg.run.Seed(r), opts);
  });
  res.algorithm = Aggregate("algorithm", res.runs, res.equilibrium);

  res.mean_trigger_rate.assign(n, 0.0);
  for (const Trajectory& t : res.runs) {
    for (int i = 0; i < n; ++i) res.mean_trigger_rate[i] += t.TriggerRate(i) / seeds;
    res.nontrigger_violations += t.nontrigger_violations;
    res.max_conservation_error =
        std::max(res.max_conservation_error, t.max_conservation_error);
  }

  if (cfg.attack.enabled) {
    std::vector<Trajectory> unprivate(seeds);
    RunOptions uopts;
    uopts.mode = Mode::kUnprivate;
    ParallelFor(seeds, cfg.run.threads, [&](int r) {
      const std::vector<double> x0 = cfg.InitialDecisions(game, r);
      unprivate[r] = Run(game, topo, cfg.mechanism, cfg.schedules,
                         cfg.run.iterations, x0, cfg.run.Seed(r), uopts);
    });
    res.unprivate = Aggregate("unprivate", unprivate, res.equilibrium);
    res.attack = RunAttack(cfg, game, topo, res.runs, unprivate);
  }

  if (cfg.baseline.enabled) {
    std::vector<Trajectory> base(seeds);
    ParallelFor(seeds, cfg.run.threads, [&](int r) {
      const std::vector<double> x0 = cfg.InitialDecisions(game, r);
      base[r] = RunNoisyBaseline(game, topo, cfg.schedules, cfg.baseline.params,
                                 cfg.run.iterations, x0, cfg.run.Seed(r),
                                 cfg.run.decimation);
    });
    res.baseline = Aggregate("baseline", base, res.equilibrium);
  }

  if (cfg.accountant.enabled) {
    res.accountant = RunAccountant(cfg, game, topo, res.equilibrium);
  }

  if (res.max_conservation_error > kConservationTolerance) {
    std::ostringstream os;
    os << "conservation: max relative |sum y - sum x| = "
       << res.max_conservation_error;
    res.invariant_failures.push_back(os.str());
  }
  if (res.nontrigger_violations > 0) {
    res.invariant_failures.push_back(
        "non-trigger bound violated " + std::to_string(res.nontrigger_violations) +
        " times");
  }
  for (const Trajectory& t : res.runs) {
    for (const std::vector<double>& x : t.x) {
      for (int i = 0; i < n; ++i) {
        if (!game.decision_set(i).Contains(x[i])) {
          res.invariant_failures.push_back("decision left its set");
          return res;
        }
      }
    }
  }
  return res;
}

inline int ExitCode(const ExperimentResult& res) {
  return res.invariant_failures.empty() ? kExitOk : kExitInvariant;
}

// Consensus error against (lambda/gamma)^2 and squared decision error
// against lambda/gamma, over stored iterates with k >= k_begin.
struct RateFitReport {
  RateFit consensus;
  RateFit decision;
  long k_begin = 0;
};

inline RateFitReport FitRates(const ExperimentResult& res, const Schedules& s,
                              long k_begin = 200) {
  std::vector<long> ks;
  std::vector<double> consensus, decision;
  const VariantStats& st = res.algorithm;
  for (std::size_t m = 0; m < st.k.size(); ++m) {
    if (st.k[m] < k_begin) continue;
    ks.push_back(st.k[m]);
    consensus.push_back(st.mean_consensus[m]);
    double sq = 0.0;
    for (const Trajectory& t : res.runs) {
      const double d = Distance(t.x[m], res.equilibrium);
      sq += d * d;
    }
    decision.push_back(sq / static_cast<double>(res.runs.size()));
  }
  if (ks.empty()) throw std::invalid_argument("FitRates: no iterates after k_begin");
  RateFitReport out;
  out.k_begin = k_begin;
  out.consensus = FitRate(consensus, ks, s, RateModel::kLambdaOverGammaSq);
  out.decision = FitRate(decision, ks, s, RateModel::kLambdaOverGamma);
  return out;
}

// ---------------------------------------------------------------------------
// CSV output

inline std::string FormatNumber(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
      : out_(path) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    Row(header);
  }

  void Row(const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c) out_ << ',';
      out_ << cells[c];
    }
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int Column(const std::string& name) const {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (header[c] == name) return static_cast<int>(c);
    }
    throw std::out_of_range("CSV has no column '" + name + "'");
  }
};

inline CsvTable ReadCsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (first) {
      table.header = std::move(cells);
      first = false;
    } else {
      table.rows.push_back(std::move(cells));
    }
  }
  return table;
}

inline void WriteTrajectoryCsv(const std::filesystem::path& path,
                               const std::vector<Trajectory>& runs) {
  CsvWriter csv(path, {"run_id", "k", "player", "x", "y", "fired", "message"});
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const Trajectory& t = runs[r];
    for (std::size_t m = 0; m < t.k.size(); ++m) {
      const int k = t.k[m];
      for (int i = 0; i < t.num_players; ++i) {
        std::string fired, message;
        if (k < t.iterations) {
          const ObservationRecord& o =
              t.observations[static_cast<std::size_t>(k) * t.num_players + i];
          fired = o.fired ? "1" : "0";
          if (o.message) message = FormatNumber(*o.message);
        }
        csv.Row({std::to_string(r), std::to_string(k), std::to_string(i),
                 FormatNumber(t.x[m][i]), FormatNumber(t.y[m][i]), fired, message});
      }
    }
  }
}

inline void WriteSummaryCsv(const std::filesystem::path& path,
                            const std::vector<Trajectory>& runs) {
  CsvWriter csv(path, {"run_id", "player", "trigger_count", "trigger_rate"});
  for (std::size_t r = 0; r < runs.size(); ++r) {
    for (int i = 0; i < runs[r].num_players; ++i) {
      csv.Row({std::to_string(r), std::to_string(i),
               std::to_string(runs[r].trigger_counts[i]),
               FormatNumber(runs[r].TriggerRate(i))});
    }
  }
}

inline void WriteConvergenceCsv(const std::filesystem::path& path,
                                const ExperimentResult& res) {
  CsvWriter csv(path, {"variant", "k", "mean_distance", "var_distance",
                       "mean_consensus"});
  for (const VariantStats* st :
       {&res.algorithm, res.unprivate ? &*res.unprivate : nullptr,
        res.baseline ? &*res.baseline : nullptr}) {
    if (!st) continue;
    for (std::size_t m = 0; m < st->k.size(); ++m) {
      csv.Row({st->name, std::to_string(st->k[m]), FormatNumber(st->mean_distance[m]),
               FormatNumber(st->var_distance[m]), FormatNumber(st->mean_consensus[m])});
    }
  }
}

inline void WriteAccountantCsv(const std::filesystem::path& path,
                               const std::vector<LedgerEntry>& entries) {
  CsvWriter csv(path, {"k", "lambda", "gamma", "sensitivity_bound", "delta_k",
                       "cum_delta"});
  for (const LedgerEntry& e : entries) {
    csv.Row({std::to_string(e.k), FormatNumber(e.lambda), FormatNumber(e.gamma),
             FormatNumber(e.sensitivity_bound), FormatNumber(e.delta),
             FormatNumber(e.cumulative)});
  }
}

inline void WriteAttackCsv(const std::filesystem::path& path,
                           const AttackSummary& attack) {
  CsvWriter csv(path, {"k", "inferred", "truth", "abs_error", "mode"});
  for (const auto& [report, mode] :
       {std::pair{&attack.private_report, "private"},
        std::pair{&attack.unprivate_report, "unprivate"}}) {
    for (std::size_t m = 0; m < report->k.size(); ++m) {
      csv.Row({std::to_string(report->k[m]), FormatNumber(report->inferred[m]),
               FormatNumber(report->truth[m]), FormatNumber(report->abs_error[m]),
               mode});
    }
  }
}

inline void WriteRateFitCsv(const std::filesystem::path& path,
                            const RateFitReport& fit) {
  CsvWriter csv(path, {"metric", "model", "k_begin", "constant",
                       "relative_residual", "min_ratio", "max_ratio"});
  auto row = [&](const char* metric, const char* model, const RateFit& f) {
    csv.Row({metric, model, std::to_string(fit.k_begin), FormatNumber(f.constant),
             FormatNumber(f.relative_residual), FormatNumber(f.min_ratio),
             FormatNumber(f.max_ratio)});
  };
  row("consensus_error", "lambda_over_gamma_sq", fit.consensus);
  row("squared_distance", "lambda_over_gamma", fit.decision);
}

inline std::string TextSummary(const ExperimentConfig& cfg,
                               const ExperimentResult& res) {
  std::ostringstream os;
  os << std::setprecision(6);
  os << "equilibrium:";
  for (double v : res.equilibrium) os << ' ' << v;
  os << "\nseeds: " << cfg.run.seeds << "  iterations: " << cfg.run.iterations
     << "\nalgorithm: mean distance " << res.algorithm.initial_distance() << " -> "
     << res.algorithm.final_distance() << " (ratio "
     << res.algorithm.final_distance() / res.algorithm.initial_distance() << ")"
     << "\nconsensus error: peak " << res.algorithm.peak_consensus() << ", final "
     << res.algorithm.final_consensus() << "\ntrigger rates:";
  for (double r : res.mean_trigger_rate) os << ' ' << r;
  os << "\nnon-trigger bound violations: " << res.nontrigger_violations
     << "\nmax conservation error: " << res.max_conservation_error << '\n';
  if (res.baseline) {
    os << "baseline: mean distance " << res.baseline->initial_distance() << " -> "
       << res.baseline->final_distance() << '\n';
  }
  if (res.attack) {
    os << "attack (player " << res.attack->target << ", k in [" << res.attack->k_lo
       << ", " << res.attack->k_hi << "]): median error private "
       << res.attack->private_median << ", unprivate " << res.attack->unprivate_median
       << ", rank-sum p " << res.attack->rank_sum_p << '\n';
  }
  if (res.accountant) {
    os << "accountant: C = " << res.accountant->c_tilde
       << (res.accountant->estimated ? " (estimated)" : " (configured)") << "\n  "
       << res.accountant->statement << "\n  infinite-horizon bound: "
       << res.accountant->cumulative.infinite_horizon_bound() << '\n';
  }
  for (const std::string& f : res.invariant_failures) {
    os << "INVARIANT VIOLATION: " << f << '\n';
  }
  return os.str();
}

inline void WriteBundle(const ExperimentConfig& cfg, const ExperimentResult& res,
                        const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  WriteTrajectoryCsv(dir / "trajectory.csv", res.runs);
  WriteSummaryCsv(dir / "summary.csv", res.runs);
  WriteConvergenceCsv(dir / "convergence.csv", res);
  if (res.accountant) WriteAccountantCsv(dir / "accountant.csv", res.accountant->entries);
  if (res.attack) WriteAttackCsv(dir / "attack.csv", *res.attack);
  if (res.algorithm.k.back() >= 200) {
    WriteRateFitCsv(dir / "rate_fit.csv", FitRates(res, cfg.schedules));
  }
  std::ofstream(dir / "report.txt") << TextSummary(cfg, res);
}

}  // namespace dpne
