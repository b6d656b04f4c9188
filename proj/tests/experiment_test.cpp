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

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "dpne/config.hpp"
#include "dpne/errors.hpp"
#include "dpne/experiment.hpp"

namespace dpne {
namespace {

namespace fs = std::filesystem;

const std::string kConfigDir = DPNE_CONFIG_DIR;

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string EnergyText() { return Slurp(kConfigDir + "/energy.cfg"); }

std::string Replace(std::string text, const std::string& from, const std::string& to) {
  const std::size_t at = text.find(from);
  EXPECT_NE(at, std::string::npos) << from;
  if (at != std::string::npos) text.replace(at, from.size(), to);
  return text;
}

ExperimentConfig Parse(const std::string& text) {
  std::istringstream in(text);
  return ParseConfig(in);
}

std::string ConfigErrorOf(const std::string& text) {
  try {
    Parse(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

fs::path TempDir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dpne_test_" + name);
  fs::remove_all(p);
  return p;
}

TEST(Config, EnergyConfigParses) {
  const ExperimentConfig cfg = LoadConfig(kConfigDir + "/energy.cfg");
  EXPECT_EQ(cfg.game.targets, (std::vector<double>{50, 55, 60, 65, 70}));
  EXPECT_EQ(cfg.game.decision_sets[3].lo, 54.0);
  EXPECT_EQ(cfg.game.coupling, 0.04);
  EXPECT_EQ(cfg.mechanism.c, 1e-4);
  EXPECT_EQ(cfg.schedules.q, 0.55);
  EXPECT_EQ(cfg.run.iterations, 1500);
  EXPECT_EQ(cfg.run.seeds, 20);
  EXPECT_FALSE(cfg.run.explicit_init.has_value());
  EXPECT_TRUE(cfg.accountant.enabled);
  EXPECT_FALSE(cfg.accountant.c_tilde.has_value());
  EXPECT_EQ(cfg.topology.Build(5).weight(0, 1), 0.4);
}

TEST(Config, ExplicitInitAndConstant) {
  std::string text = Replace(EnergyText(), "run.init       = uniform",
                             "run.init = 41 45 49 55 59");
  text = Replace(text, "accountant.c_tilde = estimate", "accountant.c_tilde = 2.5");
  const ExperimentConfig cfg = Parse(text);
  EXPECT_EQ(*cfg.run.explicit_init, (std::vector<double>{41, 45, 49, 55, 59}));
  EXPECT_EQ(*cfg.accountant.c_tilde, 2.5);
}

TEST(Config, EdgeListTopology) {
  const std::string text =
      Replace(EnergyText(), "topology.preset = ring",
              "topology.preset = edges\ntopology.edges = 0-1:0.5 1-2:0.5 2-3:0.5 3-4:0.5");
  const Topology t = Parse(text).topology.Build(5);
  EXPECT_EQ(t.weight(2, 3), 0.5);
  EXPECT_EQ(t.weight(4, 0), 0.0);
}

TEST(Config, DiagnosticsNameLineAndKey) {
  EXPECT_NE(ConfigErrorOf(EnergyText() + "mechanism.sigma = 2\n").find("duplicate key"),
            std::string::npos);
  EXPECT_NE(ConfigErrorOf(EnergyText() + "mechanism.sigmaa = 2\n").find("mechanism.sigmaa"),
            std::string::npos);
  const std::string bad = Replace(EnergyText(), "mechanism.d     = 15", "mechanism.d = fifteen");
  const std::string msg = ConfigErrorOf(bad);
  EXPECT_NE(msg.find("mechanism.d"), std::string::npos) << msg;
  EXPECT_NE(msg.find("line 20"), std::string::npos) << msg;
  EXPECT_NE(ConfigErrorOf(Replace(EnergyText(), "game.beta    = 0.04\n", ""))
                .find("game.beta"),
            std::string::npos);
  EXPECT_NE(ConfigErrorOf(EnergyText() + "no equals sign\n").find("line"),
            std::string::npos);
  EXPECT_NE(ConfigErrorOf(Replace(EnergyText(), "game.family  = quadratic",
                                  "game.family = cubic"))
                .find("quadratic"),
            std::string::npos);
  EXPECT_FALSE(ConfigErrorOf(Replace(EnergyText(), "run.init       = uniform",
                                     "run.init = 1 2 3 4 5"))
                   .empty());
}

TEST(Config, NonSummableScheduleWithAccountantIsAnError) {
  const std::string msg = ConfigErrorOf(Slurp(kConfigDir + "/nonsummable.cfg"));
  EXPECT_NE(msg.find("lambda_k^2 / gamma_k^(3/2)"), std::string::npos) << msg;
  // Without accounting the same schedules still converge.
  const std::string text = Replace(Slurp(kConfigDir + "/nonsummable.cfg"),
                                   "accountant.enabled = true", "accountant.enabled = false");
  EXPECT_NO_THROW(Parse(text));
}

TEST(Config, ConvergenceFailureIsAnError) {
  const std::string text = Replace(EnergyText(), "schedule.q        = 0.55", "schedule.q = 0.45");
  EXPECT_NE(ConfigErrorOf(text).find("convergence"), std::string::npos);
}

TEST(Config, InfeasibleEquilibriumIsAnError) {
  ExperimentConfig cfg = LoadConfig(kConfigDir + "/smoke.cfg");
  cfg.game.decision_sets[0] = {30, 35};
  EXPECT_THROW(RunExperiment(cfg), ConfigError);
}

TEST(Experiment, SmokeRunWritesEveryFile) {
  const ExperimentConfig cfg = LoadConfig(kConfigDir + "/smoke.cfg");
  const ExperimentResult res = RunExperiment(cfg);
  const fs::path dir = TempDir("smoke");
  WriteBundle(cfg, res, dir);
  for (const char* f : {"trajectory.csv", "summary.csv", "convergence.csv",
                        "accountant.csv", "attack.csv", "report.txt"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  const CsvTable traj = ReadCsv(dir / "trajectory.csv");
  EXPECT_EQ(traj.header, (std::vector<std::string>{"run_id", "k", "player", "x", "y",
                                                   "fired", "message"}));
  EXPECT_EQ(traj.rows.size(), 11u * 5u);
  // The final iterate has no broadcast yet.
  EXPECT_EQ(traj.rows.back()[5], "");
  EXPECT_EQ(ReadCsv(dir / "accountant.csv").header,
            (std::vector<std::string>{"k", "lambda", "gamma", "sensitivity_bound",
                                      "delta_k", "cum_delta"}));
  EXPECT_EQ(ReadCsv(dir / "attack.csv").header,
            (std::vector<std::string>{"k", "inferred", "truth", "abs_error", "mode"}));
  EXPECT_EQ(ReadCsv(dir / "summary.csv").header,
            (std::vector<std::string>{"run_id", "player", "trigger_count", "trigger_rate"}));
  EXPECT_TRUE(res.invariant_failures.empty());
}

TEST(Experiment, BundlesAreByteIdentical) {
  ExperimentConfig cfg = LoadConfig(kConfigDir + "/energy.cfg");
  cfg.run.seeds = 4;
  cfg.run.iterations = 300;
  cfg.accountant.seeds = 2;
  const fs::path a = TempDir("bundle_a");
  const fs::path b = TempDir("bundle_b");
  cfg.run.threads = 4;
  WriteBundle(cfg, RunExperiment(cfg), a);
  cfg.run.threads = 1;
  WriteBundle(cfg, RunExperiment(cfg), b);
  for (const auto& entry : fs::directory_iterator(a)) {
    EXPECT_EQ(Slurp(entry.path()), Slurp(b / entry.path().filename()))
        << entry.path().filename();
  }
}

TEST(Experiment, CsvRoundTripReproducesStatistics) {
  ExperimentConfig cfg = LoadConfig(kConfigDir + "/energy.cfg");
  cfg.run.seeds = 3;
  cfg.run.iterations = 200;
  cfg.accountant.enabled = false;
  const ExperimentResult res = RunExperiment(cfg);
  const fs::path dir = TempDir("roundtrip");
  WriteBundle(cfg, res, dir);

  const CsvTable summary = ReadCsv(dir / "summary.csv");
  const int rate = summary.Column("trigger_rate");
  for (std::size_t m = 0; m < summary.rows.size(); ++m) {
    const int run = std::stoi(summary.rows[m][0]);
    const int player = std::stoi(summary.rows[m][1]);
    EXPECT_EQ(std::stod(summary.rows[m][rate]), res.runs[run].TriggerRate(player));
  }

  // Recompute the mean distance curve from trajectory.csv.
  const CsvTable traj = ReadCsv(dir / "trajectory.csv");
  const int n = 5;
  std::vector<std::vector<double>> dist(res.algorithm.k.size());
  for (std::size_t r = 0; r < traj.rows.size(); r += n) {
    std::vector<double> x;
    for (int i = 0; i < n; ++i) x.push_back(std::stod(traj.rows[r + i][3]));
    const int k = std::stoi(traj.rows[r][1]);
    dist[k].push_back(Distance(x, res.equilibrium));
  }
  const CsvTable conv = ReadCsv(dir / "convergence.csv");
  for (const auto& row : conv.rows) {
    if (row[0] != "algorithm") continue;
    const int k = std::stoi(row[1]);
    EXPECT_EQ(std::stod(row[2]), Mean(dist[k])) << k;
    EXPECT_EQ(std::stod(row[2]), res.algorithm.mean_distance[k]);
  }
}

TEST(Experiment, FormatUsesSeventeenDigits) {
  EXPECT_EQ(FormatNumber(0.1), "0.10000000000000001");
  EXPECT_EQ(std::stod(FormatNumber(1.0 / 3.0)), 1.0 / 3.0);
  EXPECT_EQ(FormatNumber(45.0), "45");
}

TEST(Experiment, ParallelForVisitsEveryIndexOnce) {
  std::vector<int> hits(100, 0);
  ParallelFor(100, 8, [&](int r) { ++hits[r]; });
  EXPECT_EQ(hits, std::vector<int>(100, 1));
  EXPECT_THROW(ParallelFor(10, 4, [](int r) {
                 if (r == 7) throw std::runtime_error("boom");
               }),
               std::runtime_error);
}

TEST(Experiment, InvariantFailuresMapToExitCodeThree) {
  ExperimentResult res;
  EXPECT_EQ(ExitCode(res), 0);
  res.invariant_failures.push_back("conservation");
  EXPECT_EQ(ExitCode(res), 3);
}

int RunCli(const std::string& args) {
  const std::string cmd = std::string(DPNE_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodes) {
  const fs::path out = TempDir("cli");
  EXPECT_EQ(RunCli("validate --config " + kConfigDir + "/energy.cfg"), 0);
  EXPECT_EQ(RunCli("run --quiet --config " + kConfigDir + "/smoke.cfg --out " + out.string()),
            0);
  EXPECT_TRUE(fs::exists(out / "trajectory.csv"));
  EXPECT_EQ(RunCli("validate --config " + kConfigDir + "/nonsummable.cfg"), 2);
  EXPECT_EQ(RunCli("validate --config /nonexistent.cfg"), 2);
  EXPECT_EQ(RunCli("run --config"), 2);
  EXPECT_EQ(RunCli("accountant --quiet --config " + kConfigDir + "/smoke.cfg --out " +
                   out.string()),
            0);
  EXPECT_EQ(RunCli("attack --quiet --seeds 2 --config " + kConfigDir + "/smoke.cfg --out " +
                   out.string()),
            0);
  EXPECT_TRUE(fs::exists(out / "attack.csv"));
}

}  // namespace
}  // namespace dpne
