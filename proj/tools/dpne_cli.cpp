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

// dpne: command-line driver for the private Nash-equilibrium seeker.
//
//   dpne run        --config energy.cfg --out out/
//   dpne accountant --config energy.cfg --out out/
//   dpne attack     --config energy.cfg --out out/ --seeds 5
//   dpne validate   --config energy.cfg
//   dpne rate-fit   --config energy.cfg --out out/
//
// Exit codes: 0 ok, 2 config error, 3 invariant violation, 1 anything else.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "dpne/config.hpp"
#include "dpne/errors.hpp"
#include "dpne/experiment.hpp"

namespace {

using dpne::kExitConfig;
using dpne::kExitFailure;
using dpne::kExitInvariant;
using dpne::kExitOk;

struct Options {
  std::string config;
  std::string out = "out";
  int seeds = 0;
  bool quiet = false;
};

dpne::ExperimentConfig Load(const Options& opt) {
  dpne::ExperimentConfig cfg = dpne::LoadConfig(opt.config);
  if (opt.seeds > 0) cfg.run.seeds = opt.seeds;
  dpne::Validate(cfg);
  return cfg;
}

int Finish(const dpne::ExperimentResult& res) {
  for (const std::string& f : res.invariant_failures) {
    std::cerr << "invariant violation: " << f << '\n';
  }
  return dpne::ExitCode(res);
}

int CmdRun(const Options& opt) {
  const dpne::ExperimentConfig cfg = Load(opt);
  const dpne::ExperimentResult res = dpne::RunExperiment(cfg);
  dpne::WriteBundle(cfg, res, opt.out);
  if (!opt.quiet) std::cout << dpne::TextSummary(cfg, res);
  return Finish(res);
}

int CmdAccountant(const Options& opt) {
  dpne::ExperimentConfig cfg = Load(opt);
  cfg.accountant.enabled = true;
  dpne::Validate(cfg);
  const std::vector<double> ne = dpne::RequireEquilibrium(cfg.game);
  const dpne::GameInstance game = cfg.game.ToInstance();
  const dpne::Topology topo = cfg.topology.Build(game.num_players());
  const dpne::AccountantSummary acc = dpne::RunAccountant(cfg, game, topo, ne);
  std::filesystem::create_directories(opt.out);
  dpne::WriteAccountantCsv(std::filesystem::path(opt.out) / "accountant.csv",
                           acc.entries);
  if (!opt.quiet) {
    std::cout << std::setprecision(6) << "C = " << acc.c_tilde
              << (acc.estimated ? " (estimated)" : " (configured)") << '\n'
              << acc.statement << '\n'
              << "infinite-horizon bound: "
              << acc.cumulative.infinite_horizon_bound() << '\n';
  }
  return kExitOk;
}

int CmdAttack(const Options& opt) {
  dpne::ExperimentConfig cfg = Load(opt);
  cfg.attack.enabled = true;
  cfg.baseline.enabled = false;
  cfg.accountant.enabled = false;
  dpne::Validate(cfg);
  const dpne::ExperimentResult res = dpne::RunExperiment(cfg);
  std::filesystem::create_directories(opt.out);
  dpne::WriteAttackCsv(std::filesystem::path(opt.out) / "attack.csv", *res.attack);
  if (!opt.quiet) {
    const dpne::AttackSummary& a = *res.attack;
    std::cout << std::setprecision(6) << "target player " << a.target
              << ", k in [" << a.k_lo << ", " << a.k_hi << "]\n"
              << "median error: private " << a.private_median << ", unprivate "
              << a.unprivate_median << '\n'
              << "rank-sum p: " << a.rank_sum_p << '\n'
              << "max unprivate error off the boundary: " << a.max_exact_error
              << '\n';
  }
  return Finish(res);
}

int CmdValidate(const Options& opt) {
  const dpne::ExperimentConfig cfg = Load(opt);
  const std::vector<double> ne = dpne::RequireEquilibrium(cfg.game);
  const dpne::ScheduleValidity v = dpne::ValidateSchedules(cfg.schedules);
  const dpne::GameInstance game = cfg.game.ToInstance();
  const dpne::Topology topo = cfg.topology.Build(game.num_players());
  if (!opt.quiet) {
    std::cout << std::setprecision(10) << "players: " << game.num_players()
              << "\nequilibrium:";
    for (double x : ne) std::cout << ' ' << x;
    std::cout << "\nsecond Laplacian eigenvalue: " << topo.second_eigenvalue()
              << "\nconvergence schedule: " << (v.convergence_ok ? "ok" : "FAIL")
              << (v.convergence_reason.empty() ? "" : " (" + v.convergence_reason + ")")
              << "\nprivacy schedule: " << (v.privacy_ok ? "ok" : "FAIL")
              << (v.privacy_reason.empty() ? "" : " (" + v.privacy_reason + ")")
              << '\n';
  }
  return kExitOk;
}

int CmdRateFit(const Options& opt) {
  dpne::ExperimentConfig cfg = Load(opt);
  cfg.attack.enabled = false;
  cfg.baseline.enabled = false;
  cfg.accountant.enabled = false;
  const dpne::ExperimentResult res = dpne::RunExperiment(cfg);
  const dpne::RateFitReport fit = dpne::FitRates(res, cfg.schedules);
  std::filesystem::create_directories(opt.out);
  dpne::WriteRateFitCsv(std::filesystem::path(opt.out) / "rate_fit.csv", fit);
  if (!opt.quiet) {
    std::cout << std::setprecision(6) << "k >= " << fit.k_begin << '\n'
              << "consensus vs (lambda/gamma)^2: C = " << fit.consensus.constant
              << ", residual " << fit.consensus.relative_residual << ", ratio in ["
              << fit.consensus.min_ratio << ", " << fit.consensus.max_ratio << "]\n"
              << "squared distance vs lambda/gamma: C = " << fit.decision.constant
              << ", residual " << fit.decision.relative_residual << ", ratio in ["
              << fit.decision.min_ratio << ", " << fit.decision.max_ratio << "]\n";
  }
  return Finish(res);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentially private distributed Nash-equilibrium seeking"};
  app.require_subcommand(1);
  Options opt;

  struct Command {
    const char* name;
    const char* help;
    int (*fn)(const Options&);
  };
  const Command commands[] = {
      {"run", "run the full experiment and write the CSV bundle", CmdRun},
      {"accountant", "write the privacy ledger", CmdAccountant},
      {"attack", "run the eavesdropper against private and unprivate runs", CmdAttack},
      {"validate", "check a config and its schedules", CmdValidate},
      {"rate-fit", "fit convergence rates against the step-size ratio", CmdRateFit},
  };
  int (*chosen)(const Options&) = nullptr;
  for (const Command& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", opt.config, "config file")->required();
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--seeds", opt.seeds, "override run.seeds")
        ->check(CLI::PositiveNumber);
    sub->add_flag("--quiet", opt.quiet, "suppress the text summary");
    sub->callback([&chosen, fn = c.fn] { chosen = fn; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    return chosen(opt);
  } catch (const dpne::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const dpne::InvariantViolation& e) {
    std::cerr << "invariant violation: " << e.what() << '\n';
    return kExitInvariant;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}
