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

#include <cmath>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "dpne/adversary.hpp"
#include "dpne/stats.hpp"

namespace dpne {
namespace {

struct EnergyRing {
  QuadraticGame q = QuadraticGame::Energy();
  GameInstance game = q.ToInstance();
  Topology topo = Topology::Ring(5, 0.4);
  Schedules sched;
  std::vector<double> x0{42, 46, 50, 57, 60};
};

TEST(Attack, HandBuiltStream) {
  // Two players, one edge of weight 1. Player 0 says 10 then 12; player 1
  // says 4 and then stays silent.
  const Topology topo = Topology::Path(2);
  Schedules s;
  std::vector<ObservationRecord> obs{
      {0, 0, true, 10.0}, {0, 1, true, 4.0}, {1, 0, true, 12.0}, {1, 1, false, {}}};
  const std::vector<double> inferred = InferGradient(obs, topo, s, 0);
  ASSERT_EQ(inferred.size(), 1u);
  // dx = 12 - 10 - gamma_0 (4 - 10), F = -dx / lambda_0
  const double dx = 2.0 + 1.2 * 6.0;
  EXPECT_NEAR(inferred[0], -dx / 0.03, 1e-9);
}

TEST(Attack, RejectsMalformedStreams) {
  const Topology topo = Topology::Path(2);
  const Schedules s;
  EXPECT_THROW(InferGradient({}, topo, s, 0), std::invalid_argument);
  std::vector<ObservationRecord> odd{{0, 0, true, 1.0}};
  EXPECT_THROW(InferGradient(odd, topo, s, 0), std::invalid_argument);
  std::vector<ObservationRecord> silent{{0, 0, true, 1.0}, {0, 1, false, {}}};
  EXPECT_THROW(InferGradient(silent, topo, s, 0), std::invalid_argument);
  std::vector<ObservationRecord> swapped{{0, 1, true, 1.0}, {0, 0, true, 1.0}};
  EXPECT_THROW(InferGradient(swapped, topo, s, 0), std::invalid_argument);
  EXPECT_THROW(InferGradient(swapped, topo, s, 2), std::invalid_argument);
}

TEST(Attack, ExactWithoutPrivacyOffTheBoundary) {
  EnergyRing e;
  RunOptions opts;
  opts.mode = Mode::kUnprivate;
  const Trajectory t = dpne::Run(e.game, e.topo, MechanismParams{}, e.sched, 600, e.x0, 2, opts);
  for (int target = 0; target < 5; ++target) {
    const AttackReport r = Attack(t, e.game, e.topo, e.sched, target);
    ASSERT_EQ(r.k.size(), 599u);
    int checked = 0;
    for (std::size_t m = 0; m < r.k.size(); ++m) {
      if (t.projection_active[r.k[m]][target]) continue;
      // Inversion error scales with |y| / lambda_k times machine epsilon.
      EXPECT_LE(r.abs_error[m], 1e-9) << target << " k=" << r.k[m];
      ++checked;
    }
    EXPECT_GT(checked, 500);
  }
}

TEST(Attack, PrivacyInflatesTheError) {
  EnergyRing e;
  RunOptions opts;
  opts.mode = Mode::kUnprivate;
  const Trajectory un = dpne::Run(e.game, e.topo, MechanismParams{}, e.sched, 800, e.x0, 2, opts);
  const Trajectory pr = dpne::Run(e.game, e.topo, MechanismParams{}, e.sched, 800, e.x0, 2);
  const double err_un = Attack(un, e.game, e.topo, e.sched, 0).MedianError(100, 798);
  const double err_pr = Attack(pr, e.game, e.topo, e.sched, 0).MedianError(100, 798);
  EXPECT_GT(err_pr, 100.0 * err_un);
}

TEST(Attack, NeedsUndecimatedTrajectory) {
  EnergyRing e;
  RunOptions opts;
  opts.decimation = 2;
  const Trajectory t = dpne::Run(e.game, e.topo, MechanismParams{}, e.sched, 10, e.x0, 2, opts);
  EXPECT_THROW(Attack(t, e.game, e.topo, e.sched, 0), std::invalid_argument);
}

TEST(Stats, MeanVarianceMedian) {
  const std::vector<double> v{3, 1, 4, 1, 5, 9};
  EXPECT_DOUBLE_EQ(Mean(v), 23.0 / 6.0);
  double var = 0.0;
  for (double x : v) var += (x - 23.0 / 6.0) * (x - 23.0 / 6.0);
  EXPECT_DOUBLE_EQ(Variance(v), var / 6.0);
  EXPECT_DOUBLE_EQ(Median(v), 3.5);
  EXPECT_DOUBLE_EQ(Median({7, 2, 5}), 5.0);
  EXPECT_THROW(Median({}), std::invalid_argument);
  EXPECT_THROW(Mean(std::vector<double>{}), std::invalid_argument);
}

TEST(Stats, RankSum) {
  // Complete separation with 5 vs 5: U = 25, mean 12.5, var 25*11/12.
  const std::vector<double> hi{10, 11, 12, 13, 14};
  const std::vector<double> lo{1, 2, 3, 4, 5};
  const double z = 12.5 / std::sqrt(25.0 * 11.0 / 12.0);
  EXPECT_NEAR(RankSumPValue(hi, lo), 0.5 * std::erfc(z / std::sqrt(2.0)), 1e-12);
  EXPECT_GT(RankSumPValue(lo, hi), 0.99);
  const std::vector<double> same{2, 2, 2};
  EXPECT_EQ(RankSumPValue(same, same), 1.0);
}

TEST(RateFitting, RecoversConstantOnSyntheticSequence) {
  const Schedules s;
  std::vector<double> metric;
  for (long k = 200; k <= 1500; ++k) {
    const double r = s.Lambda(k) / s.Gamma(k);
    metric.push_back(3.7 * r * r);
  }
  const RateFit fit = FitRate(metric, s, RateModel::kLambdaOverGammaSq, 200);
  EXPECT_NEAR(fit.constant, 3.7, 1e-6);
  EXPECT_LT(fit.relative_residual, 1e-12);
  EXPECT_NEAR(fit.min_ratio, 3.7, 1e-9);
  EXPECT_NEAR(fit.max_ratio, 3.7, 1e-9);

  std::vector<double> linear;
  std::vector<long> ks{200, 400, 900};
  for (long k : ks) linear.push_back(0.25 * s.Lambda(k) / s.Gamma(k));
  EXPECT_NEAR(FitRate(linear, ks, s, RateModel::kLambdaOverGamma).constant, 0.25, 1e-12);
}

TEST(RateFitting, RejectsDegenerateInput) {
  const Schedules s;
  EXPECT_THROW(FitRate(std::vector<double>{}, s, RateModel::kLambdaOverGamma),
               std::invalid_argument);
  const std::vector<double> m{1.0, 2.0};
  const std::vector<long> ks{1};
  EXPECT_THROW(FitRate(m, ks, s, RateModel::kLambdaOverGamma), std::invalid_argument);
}

}  // namespace
}  // namespace dpne
