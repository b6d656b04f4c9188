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

// Honest-but-curious eavesdropper.
//
// The attacker sees every broadcast (and every silence), knows L and the
// schedules, and keeps the latest message of each player, which is exactly
// the stored value the players themselves mix with. It inverts the estimate
// update of the target player t,
//
//   dx_t^k = yhat_t^{k+1} - yhat_t^k - gamma_k sum_j L_tj (yhat_j^k - yhat_t^k),
//
// and reads the gradient as -dx_t^k / lambda_k, assuming the projection is
// inactive. With raw every-iteration broadcasts the inversion is exact.

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "dpne/game.hpp"
#include "dpne/schedules.hpp"
#include "dpne/seeker.hpp"
#include "dpne/stats.hpp"
#include "dpne/topology.hpp"

namespace dpne {

struct AttackReport {
  int target = 0;
  std::vector<int> k;
  std::vector<double> inferred;
  std::vector<double> truth;
  std::vector<double> abs_error;

  // Median absolute error over k in [k_lo, k_hi].
  double MedianError(int k_lo, int k_hi) const {
    return Median(Window(k_lo, k_hi));
  }
  double MeanError(int k_lo, int k_hi) const { return Mean(Window(k_lo, k_hi)); }

 private:
  std::vector<double> Window(int k_lo, int k_hi) const {
    std::vector<double> w;
    for (std::size_t m = 0; m < k.size(); ++m) {
      if (k[m] >= k_lo && k[m] <= k_hi) w.push_back(abs_error[m]);
    }
    return w;
  }
};

// Gradient estimates for iterations 0..T-2 from observations of
// iterations 0..T-1 (ordered by (k, player), as recorded by Run).
inline std::vector<double> InferGradient(
    std::span<const ObservationRecord> observations, const Topology& topo,
    const Schedules& s, int target) {
  const int n = topo.size();
  if (observations.empty()) {
    throw std::invalid_argument("InferGradient: empty observation stream");
  }
  if (target < 0 || target >= n) {
    throw std::invalid_argument("InferGradient: bad target");
  }
  if (observations.size() % n != 0) {
    throw std::invalid_argument("InferGradient: incomplete iteration");
  }
  const int iterations = static_cast<int>(observations.size() / n);

  // yhat[k][j]: latest message from j at or before iteration k.
  std::vector<std::vector<double>> yhat(iterations, std::vector<double>(n, 0.0));
  std::vector<bool> heard(n, false);
  for (int k = 0; k < iterations; ++k) {
    if (k > 0) yhat[k] = yhat[k - 1];
    for (int j = 0; j < n; ++j) {
      const ObservationRecord& o = observations[static_cast<std::size_t>(k) * n + j];
      if (o.k != k || o.player != j) {
        throw std::invalid_argument("InferGradient: observations out of order");
      }
      if (o.fired) {
        yhat[k][j] = *o.message;
        heard[j] = true;
      }
    }
  }
  if (!std::all_of(heard.begin(), heard.end(), [](bool b) { return b; })) {
    throw std::invalid_argument("InferGradient: some player never broadcast");
  }

  std::vector<double> inferred;
  inferred.reserve(iterations > 0 ? iterations - 1 : 0);
  for (int k = 0; k + 1 < iterations; ++k) {
    const double lambda = s.Lambda(k);
    if (!(lambda > 0.0)) throw std::invalid_argument("InferGradient: lambda_k = 0");
    double mixing = 0.0;
    for (int j : topo.neighbors(target)) {
      mixing += topo.weight(target, j) * (yhat[k][j] - yhat[k][target]);
    }
    const double dx = yhat[k + 1][target] - yhat[k][target] - s.Gamma(k) * mixing;
    inferred.push_back(-dx / lambda);
  }
  return inferred;
}

// Compares estimates with the true F_t(x_t^k, y_t^k) along the trajectory.
inline AttackReport ScoreAttack(std::span<const double> inferred,
                                const Trajectory& traj,
                                const GameInstance& game, int target) {
  if (traj.decimation != 1) {
    throw std::invalid_argument("ScoreAttack: needs an undecimated trajectory");
  }
  AttackReport report;
  report.target = target;
  for (std::size_t k = 0; k < inferred.size(); ++k) {
    const double truth =
        game.Gradient(target, traj.x.at(k)[target], traj.y.at(k)[target]);
    report.k.push_back(static_cast<int>(k));
    report.inferred.push_back(inferred[k]);
    report.truth.push_back(truth);
    report.abs_error.push_back(std::abs(inferred[k] - truth));
  }
  return report;
}

inline AttackReport Attack(const Trajectory& traj, const GameInstance& game,
                           const Topology& topo, const Schedules& s, int target) {
  const std::vector<double> inferred =
      InferGradient(traj.observations, topo, s, target);
  return ScoreAttack(inferred, traj, game, target);
}

}  // namespace dpne
