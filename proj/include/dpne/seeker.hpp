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

// Distributed equilibrium seeking with event-triggered quantized
// communication.
//
// Each iteration k runs, for every player i:
//   a) trigger: at k = 0 every player broadcasts; afterwards the stochastic
//      event trigger decides from rho = stored_i - y_i;
//   b) on a trigger, broadcast Q(y_i) and overwrite the stored value;
//      neighbors overwrite their copy of it;
//   c) x_i <- Proj_i[x_i - lambda_k F_i(x_i, y_i)]
//      y_i <- y_i + gamma_k sum_j L_ij (stored_j - stored_i) + (x_i' - x_i).
// Because L has zero column sums the mixing term cancels in the sum over
// players, so sum_i y_i = sum_i x_i at every iteration.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpne/game.hpp"
#include "dpne/mechanism.hpp"
#include "dpne/rng.hpp"
#include "dpne/schedules.hpp"
#include "dpne/topology.hpp"

namespace dpne {

enum class Mode {
  kPrivate,    // stochastic trigger and stochastic quantizer
  kUnprivate,  // broadcast raw y_i at every iteration
};

struct PlayerState {
  double x = 0.0;
  double y = 0.0;
  TriggerState trig;
  // Latest value received from each neighbor, aligned with
  // Topology::neighbors(i).
  std::vector<double> neighbor_store;
};

// What an eavesdropper on the channel sees: whether player i spoke at
// iteration k, and if so, what it said.
struct ObservationRecord {
  int k = 0;
  int player = 0;
  bool fired = false;
  std::optional<double> message;
};

struct StepResult {
  std::vector<ObservationRecord> observations;
  std::vector<std::uint8_t> projection_active;
  int nontrigger_violations = 0;
  double conservation_error = 0.0;  // |sum y - sum x| / max(1, |sum x|)
};

inline std::vector<PlayerState> InitialStates(const GameInstance& game,
                                              const Topology& topo,
                                              std::span<const double> x0) {
  const int n = game.num_players();
  if (static_cast<int>(x0.size()) != n || topo.size() != n) {
    throw std::invalid_argument("InitialStates: dimension mismatch");
  }
  std::vector<PlayerState> players(n);
  for (int i = 0; i < n; ++i) {
    if (!game.decision_set(i).Contains(x0[i])) {
      throw std::out_of_range("InitialStates: x0[" + std::to_string(i) +
                              "] outside its decision set");
    }
    players[i].x = x0[i];
    players[i].y = x0[i];
    players[i].neighbor_store.assign(topo.neighbors(i).size(), 0.0);
  }
  return players;
}

// x0_i drawn uniformly from the decision set on the seed's init stream.
inline std::vector<double> UniformInit(const GameInstance& game,
                                       std::uint64_t seed) {
  std::vector<double> x0(game.num_players());
  for (int i = 0; i < game.num_players(); ++i) {
    const Interval& s = game.decision_set(i);
    const double u = StreamUniform(
        {seed, static_cast<std::uint32_t>(i), Channel::kInit}, 0);
    x0[i] = s.lo + s.width() * u;
  }
  return x0;
}

namespace detail {

inline double Sum(const std::vector<PlayerState>& players, double PlayerState::*m) {
  double s = 0.0;
  for (const PlayerState& p : players) s += p.*m;
  return s;
}

inline void Deliver(std::vector<PlayerState>& players, const Topology& topo,
                    std::span<const ObservationRecord> obs) {
  for (std::size_t i = 0; i < players.size(); ++i) {
    const std::vector<int>& nbrs = topo.neighbors(static_cast<int>(i));
    for (std::size_t m = 0; m < nbrs.size(); ++m) {
      const ObservationRecord& o = obs[nbrs[m]];
      if (o.fired) players[i].neighbor_store[m] = *o.message;
    }
  }
}

// Step c): projected gradient on x, then consensus plus increment on y.
inline void UpdateDecisions(std::vector<PlayerState>& players,
                            const GameInstance& game, const Topology& topo,
                            double lambda_k, double gamma_k,
                            StepResult& result) {
  const int n = static_cast<int>(players.size());
  result.projection_active.assign(n, 0);
  for (int i = 0; i < n; ++i) {
    PlayerState& pl = players[i];
    const double raw = pl.x - lambda_k * game.Gradient(i, pl.x, pl.y);
    const double x_next = Project(game.decision_set(i), raw);
    result.projection_active[i] = x_next != raw;

    const std::vector<int>& nbrs = topo.neighbors(i);
    double mixing = 0.0;
    for (std::size_t m = 0; m < nbrs.size(); ++m) {
      mixing += topo.weight(i, nbrs[m]) *
                (pl.neighbor_store[m] - pl.trig.stored);
    }
    pl.y = pl.y + gamma_k * mixing + (x_next - pl.x);
    pl.x = x_next;
    if (!std::isfinite(pl.x) || !std::isfinite(pl.y)) {
      throw std::runtime_error("trajectory diverged at player " +
                               std::to_string(i));
    }
  }
  const double sx = Sum(players, &PlayerState::x);
  const double sy = Sum(players, &PlayerState::y);
  result.conservation_error = std::abs(sy - sx) / std::max(1.0, std::abs(sx));
}

}  // namespace detail

// One synchronous iteration. `players` is advanced from k to k + 1 in place;
// the returned observations describe iteration k.
inline StepResult Step(std::vector<PlayerState>& players,
                       const GameInstance& game, const Topology& topo,
                       const MechanismParams& params, const Schedules& s,
                       int k, std::uint64_t seed, Mode mode = Mode::kPrivate) {
  if (k < 0) throw std::invalid_argument("Step: negative iteration");
  const int n = static_cast<int>(players.size());
  if (n != game.num_players() || n != topo.size()) {
    throw std::invalid_argument("Step: dimension mismatch");
  }
  const double lambda_k = s.Lambda(k);
  const double gamma_k = s.Gamma(k);

  StepResult result;
  result.observations.resize(n);
  for (int i = 0; i < n; ++i) {
    PlayerState& pl = players[i];
    ObservationRecord& obs = result.observations[i];
    obs.k = k;
    obs.player = i;
    if (mode == Mode::kUnprivate) {
      pl.trig = {k, pl.y, 0.0};
      obs.fired = true;
      obs.message = pl.y;
      continue;
    }
    const auto who = static_cast<std::uint32_t>(i);
    const double uq = StreamUniform({seed, who, Channel::kQuantizer}, k);
    MechanismOutcome out;
    if (k == 0) {
      out = ForcedBroadcast(pl.y, params, uq);
    } else {
      const double ut = StreamUniform({seed, who, Channel::kTrigger}, k);
      out = MechanismStep(pl.trig, pl.y, k, gamma_k, params, ut, uq);
      if (!out.fired && !NonTriggerBoundHolds(out.rho, gamma_k, out.xi, params)) {
        ++result.nontrigger_violations;
      }
    }
    pl.trig = out.state;
    obs.fired = out.fired;
    obs.message = out.message;
  }
  detail::Deliver(players, topo, result.observations);
  detail::UpdateDecisions(players, game, topo, lambda_k, gamma_k, result);
  return result;
}

struct RunOptions {
  Mode mode = Mode::kPrivate;
  // Keep every m-th iterate of x and y (the final iterate is always kept).
  int decimation = 1;
};

struct Trajectory {
  int num_players = 0;
  int iterations = 0;
  int decimation = 1;
  // Iteration index of each stored iterate.
  std::vector<int> k;
  std::vector<std::vector<double>> x;
  std::vector<std::vector<double>> y;
  // Iterations 0..T-1, num_players records each, ordered by (k, player).
  std::vector<ObservationRecord> observations;
  // projection_active[k][i] for iterations 0..T-1.
  std::vector<std::vector<std::uint8_t>> projection_active;
  std::vector<int> trigger_counts;
  int nontrigger_violations = 0;
  double max_conservation_error = 0.0;

  double TriggerRate(int i) const {
    return iterations > 0 ? static_cast<double>(trigger_counts.at(i)) / iterations
                          : 0.0;
  }
  const std::vector<double>& final_x() const { return x.back(); }
  const std::vector<double>& final_y() const { return y.back(); }
  // Row of the stored iterate for iteration k; requires k to be stored.
  std::size_t Row(int iteration) const {
    auto it = std::lower_bound(k.begin(), k.end(), iteration);
    if (it == k.end() || *it != iteration) {
      throw std::out_of_range("Trajectory: iterate " +
                              std::to_string(iteration) + " not stored");
    }
    return static_cast<std::size_t>(it - k.begin());
  }
};

namespace detail {

inline void Record(Trajectory& traj, const std::vector<PlayerState>& players,
                   int k) {
  std::vector<double> x(players.size()), y(players.size());
  for (std::size_t i = 0; i < players.size(); ++i) {
    x[i] = players[i].x;
    y[i] = players[i].y;
  }
  traj.k.push_back(k);
  traj.x.push_back(std::move(x));
  traj.y.push_back(std::move(y));
}

inline Trajectory StartTrajectory(const std::vector<PlayerState>& players,
                                  int iterations, int decimation) {
  if (iterations < 0) throw std::invalid_argument("run: negative iterations");
  if (decimation < 1) throw std::invalid_argument("run: decimation must be >= 1");
  Trajectory traj;
  traj.num_players = static_cast<int>(players.size());
  traj.iterations = iterations;
  traj.decimation = decimation;
  traj.trigger_counts.assign(players.size(), 0);
  traj.observations.reserve(static_cast<std::size_t>(iterations) * players.size());
  traj.projection_active.reserve(iterations);
  Record(traj, players, 0);
  return traj;
}

inline void Absorb(Trajectory& traj, StepResult&& r,
                   const std::vector<PlayerState>& players, int k) {
  for (const ObservationRecord& o : r.observations) {
    if (o.fired) ++traj.trigger_counts[o.player];
    traj.observations.push_back(o);
  }
  traj.projection_active.push_back(std::move(r.projection_active));
  traj.nontrigger_violations += r.nontrigger_violations;
  traj.max_conservation_error =
      std::max(traj.max_conservation_error, r.conservation_error);
  const int next = k + 1;
  if (next % traj.decimation == 0 || next == traj.iterations) {
    Record(traj, players, next);
  }
}

}  // namespace detail

// Runs T iterations from x0. Deterministic in `seed`.
inline Trajectory Run(const GameInstance& game, const Topology& topo,
                      const MechanismParams& params, const Schedules& s,
                      int iterations, std::span<const double> x0,
                      std::uint64_t seed, const RunOptions& options = {}) {
  params.Validate();
  const ScheduleValidity validity = ValidateSchedules(s);
  if (!validity.convergence_ok) {
    throw std::invalid_argument("run: schedules invalid: " +
                                validity.convergence_reason);
  }
  std::vector<PlayerState> players = InitialStates(game, topo, x0);
  Trajectory traj =
      detail::StartTrajectory(players, iterations, options.decimation);
  for (int k = 0; k < iterations; ++k) {
    StepResult r = Step(players, game, topo, params, s, k, seed, options.mode);
    detail::Absorb(traj, std::move(r), players, k);
  }
  return traj;
}

// Noise-injection comparison scheme: every player broadcasts y_i plus
// Laplace noise of scale noise_scale * noise_decay^k at every iteration, with
// no trigger and no quantizer, and a geometrically decaying step size
// lambda0 * lambda_decay^k. Mixing uses the same gamma_k schedule.
struct BaselineParams {
  double noise_scale = 1.0;
  double noise_decay = 0.97;
  double lambda0 = 0.03;
  double lambda_decay = 0.96;
  // When false, the step size follows Schedules::Lambda instead.
  bool geometric_stepsize = true;

  void Validate() const {
    if (!(noise_scale >= 0.0)) {
      throw std::invalid_argument("baseline: noise scale must be >= 0");
    }
    if (!(noise_decay > 0.0 && noise_decay < 1.0)) {
      throw std::invalid_argument("baseline: need 0 < noise decay < 1");
    }
    if (geometric_stepsize &&
        !(lambda0 > 0.0 && lambda_decay > 0.0 && lambda_decay < 1.0)) {
      throw std::invalid_argument(
          "baseline: need lambda0 > 0 and 0 < lambda decay < 1");
    }
  }
};

// Inverse-CDF Laplace sample from a uniform draw in [0, 1).
inline double LaplaceSample(double scale, double uniform) {
  if (scale == 0.0) return 0.0;
  const double u = uniform + 0x1.0p-54 - 0.5;  // in (-1/2, 1/2)
  return -scale * std::copysign(1.0, u) * std::log1p(-2.0 * std::abs(u));
}

inline Trajectory RunNoisyBaseline(const GameInstance& game,
                                   const Topology& topo, const Schedules& s,
                                   const BaselineParams& baseline,
                                   int iterations, std::span<const double> x0,
                                   std::uint64_t seed, int decimation = 1) {
  baseline.Validate();
  std::vector<PlayerState> players = InitialStates(game, topo, x0);
  Trajectory traj = detail::StartTrajectory(players, iterations, decimation);
  const int n = game.num_players();
  for (int k = 0; k < iterations; ++k) {
    const double lambda_k =
        baseline.geometric_stepsize
            ? baseline.lambda0 * std::pow(baseline.lambda_decay, k)
            : s.Lambda(k);
    const double scale = baseline.noise_scale * std::pow(baseline.noise_decay, k);
    StepResult r;
    r.observations.resize(n);
    for (int i = 0; i < n; ++i) {
      const double u = StreamUniform(
          {seed, static_cast<std::uint32_t>(i), Channel::kNoise}, k);
      const double msg = players[i].y + LaplaceSample(scale, u);
      players[i].trig = {k, msg, 0.0};
      r.observations[i] = {k, i, true, msg};
    }
    detail::Deliver(players, topo, r.observations);
    detail::UpdateDecisions(players, game, topo, lambda_k, s.Gamma(k), r);
    detail::Absorb(traj, std::move(r), players, k);
  }
  return traj;
}

}  // namespace dpne
