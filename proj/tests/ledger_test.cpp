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
#include <limits>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "dpne/game.hpp"
#include "dpne/ledger.hpp"
#include "dpne/seeker.hpp"

namespace dpne {
namespace {

// Written out independently of the library.
double HandDelta(long k, double c_tilde) {
  const double lambda = 0.03 / (1.0 + 0.01 * std::pow(k, 0.95));
  const double gamma = 1.2 / (1.0 + 0.12 * std::pow(k, 0.55));
  const double bracket =
      1.03 / 0.95 * std::sqrt(2.0 * 1e-4 / (std::exp(1.0) * gamma)) + 1.0 / 15.0;
  return bracket * c_tilde * lambda * lambda / gamma;
}

TEST(Delta, HandDerivedValues) {
  const Schedules s;
  const MechanismParams p;
  EXPECT_NEAR(DeltaPerIteration(s, p, 1.0, 0), 5.6367e-5, 1e-8);
  EXPECT_NEAR(DeltaPerIteration(s, p, 1.0, 1500), 4.0046e-6, 1e-9);
  for (long k : {0L, 1L, 10L, 1500L, 100000L}) {
    EXPECT_NEAR(DeltaPerIteration(s, p, 2.5, k), HandDelta(k, 2.5),
                1e-14 * HandDelta(k, 2.5));
  }
}

TEST(Delta, ScalesLinearlyInC) {
  const Schedules s;
  const MechanismParams p;
  EXPECT_DOUBLE_EQ(DeltaPerIteration(s, p, 3.0, 77), 3.0 * DeltaPerIteration(s, p, 1.0, 77));
  EXPECT_EQ(DeltaPerIteration(s, p, 0.0, 77), 0.0);
  EXPECT_THROW(DeltaPerIteration(s, p, -1.0, 7), std::invalid_argument);
  EXPECT_THROW(DeltaPerIteration(s, p, 1.0, -1), std::invalid_argument);
}

TEST(Delta, SensitivityBound) {
  const Schedules s;
  const double l = s.Lambda(100);
  EXPECT_DOUBLE_EQ(SensitivityBound(s, 2.0, 100), 2.0 * l * l / s.Gamma(100));
}

TEST(Cumulative, PartialSumMatchesBruteForce) {
  const Schedules s;
  const MechanismParams p;
  const CumulativeDelta c = CumulativeDeltaSum(s, p, 1.0, 1500);
  double brute = 0.0;
  for (long k = 0; k <= 1500; ++k) brute += HandDelta(k, 1.0);
  EXPECT_NEAR(c.partial_sum, brute, 1e-12 * brute);
  EXPECT_TRUE(c.tail_finite());
}

TEST(Cumulative, TailBoundDominatesTheTail) {
  const Schedules s;
  const MechanismParams p;
  for (long t : {0L, 10L, 1500L}) {
    const CumulativeDelta c = CumulativeDeltaSum(s, p, 1.0, t);
    double tail = 0.0;
    for (long k = t + 1; k <= 200000; ++k) tail += HandDelta(k, 1.0);
    EXPECT_GE(c.tail_bound, tail) << t;
  }
}

TEST(Cumulative, DivergentScheduleHasNoTailBound) {
  Schedules s;
  s.q = 0.70;
  const CumulativeDelta c = CumulativeDeltaSum(s, MechanismParams{}, 1.0, 100);
  EXPECT_FALSE(c.tail_finite());
  EXPECT_GT(c.partial_sum, 0.0);
}

TEST(Ledger, EntriesAccumulate) {
  const Schedules s;
  PrivacyLedger ledger(s, MechanismParams{}, 1.0);
  ledger.AdvanceTo(20);
  ASSERT_EQ(ledger.entries().size(), 21u);
  double run = 0.0;
  for (const LedgerEntry& e : ledger.entries()) {
    run += e.delta;
    EXPECT_DOUBLE_EQ(e.cumulative, run);
    EXPECT_EQ(e.lambda, s.Lambda(e.k));
    EXPECT_EQ(e.gamma, s.Gamma(e.k));
  }
  EXPECT_EQ(ledger.out_of_range(), 0);
  EXPECT_NE(ledger.Statement().find("k=20"), std::string::npos);
  EXPECT_THROW(PrivacyLedger(s, MechanismParams{}, 0.0), std::invalid_argument);
}

TEST(Ledger, CountsDeltasOutsideTheUnitInterval) {
  PrivacyLedger ledger(Schedules{}, MechanismParams{}, 1e6);
  ledger.AdvanceTo(3);
  EXPECT_GT(ledger.out_of_range(), 0);
}

TEST(Adjacency, RampIsFlatInsideTheBall) {
  EXPECT_EQ(Ramp(-0.1), 0.0);
  EXPECT_EQ(Ramp(0.0), 0.0);
  EXPECT_DOUBLE_EQ(Ramp(0.3), 0.09);
  const GameInstance g = QuadraticGame::Energy().ToInstance();
  const std::vector<double> ne{41.5, 46.4, 51.3, 56.2, 61.1};
  const GameInstance adj = MakeAdjacent(g, {0, 0.5, 2.0}, ne);
  EXPECT_EQ(adj.Gradient(0, 41.2, 50.0), g.Gradient(0, 41.2, 50.0));
  EXPECT_EQ(adj.Gradient(0, 42.0, 50.0), g.Gradient(0, 42.0, 50.0));
  EXPECT_DOUBLE_EQ(adj.Gradient(0, 43.0, 50.0), g.Gradient(0, 43.0, 50.0) + 2.0 * 1.0);
  EXPECT_DOUBLE_EQ(adj.Gradient(0, 40.0, 50.0), g.Gradient(0, 40.0, 50.0) + 2.0 * 1.0);
  EXPECT_EQ(adj.Gradient(1, 48.0, 50.0), g.Gradient(1, 48.0, 50.0));
  EXPECT_THROW(MakeAdjacent(g, {5, 0.5, 1.0}, ne), std::invalid_argument);
  EXPECT_THROW(MakeAdjacent(g, {0, 0.0, 1.0}, ne), std::invalid_argument);
}

TEST(Adjacency, ZeroKappaRunsAreBitwiseIdentical) {
  const QuadraticGame q = QuadraticGame::Energy();
  const GameInstance g = q.ToInstance();
  const std::vector<double> ne = SolveQuadraticEquilibrium(q).x;
  const GameInstance adj = MakeAdjacent(g, {0, 0.5, 0.0}, ne);
  const SensitivityTrace t = CoupledSensitivity(g, adj, Topology::Ring(5, 0.4),
                                                MechanismParams{}, Schedules{}, 300, 17, 0);
  EXPECT_TRUE(t.observations_equal);
  for (double gap : t.gap) ASSERT_EQ(gap, 0.0);
}

TEST(Adjacency, EstimatedConstantBoundsItsOwnSeeds) {
  const QuadraticGame q = QuadraticGame::Energy();
  const GameInstance g = q.ToInstance();
  const std::vector<double> ne = SolveQuadraticEquilibrium(q).x;
  const GameInstance adj = MakeAdjacent(g, {0, 0.5, 0.01}, ne);
  const Schedules s;
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  const CTildeEstimate est = EstimateCTilde(g, adj, Topology::Ring(5, 0.4),
                                            MechanismParams{}, s, 400, seeds, 0);
  ASSERT_GT(est.c_tilde, 0.0);
  ASSERT_EQ(est.traces.size(), 3u);
  for (const SensitivityTrace& t : est.traces) {
    for (int k = 1; k <= 400; ++k) {
      ASSERT_LE(t.gap[k], SensitivityBound(s, est.c_tilde, k) * (1 + 1e-12));
    }
  }
  EXPECT_THROW(EstimateCTilde(g, adj, Topology::Ring(5, 0.4), MechanismParams{}, s,
                              10, std::span<const std::uint64_t>{}, 0),
               std::invalid_argument);
}

}  // namespace
}  // namespace dpne
