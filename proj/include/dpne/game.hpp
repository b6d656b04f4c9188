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

// Aggregative game model: per-player interval decision sets, partial-gradient
// fields F_i(x_i, u) where u stands for the average decision, the
// pseudo-gradient map, and the closed-form equilibrium of the quadratic
// (energy consumption) family.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dpne/rng.hpp"

namespace dpne {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const { return hi - lo; }
  double mid() const { return 0.5 * (lo + hi); }
  bool Contains(double v, double tol = 0.0) const {
    return v >= lo - tol && v <= hi + tol;
  }
};

// Euclidean projection onto [lo, hi].
inline double Project(const Interval& set, double v) {
  if (!(set.lo <= set.hi)) {
    throw std::invalid_argument("Project: interval has lo > hi");
  }
  return std::clamp(v, set.lo, set.hi);
}

// F_i(x_i, u): partial derivative of player i's cost in its own decision,
// with u standing for the average decision. Must be a pure function.
using GradientField = std::function<double(double x, double u)>;

inline constexpr double kDomainTolerance = 1e-9;

class GameInstance {
 public:
  // Grid resolution and safety margin used when l or eta are not supplied.
  static constexpr int kEstimateGrid = 64;
  static constexpr double kEstimateMargin = 1.1;

  GameInstance(std::vector<Interval> decision_sets,
               std::vector<GradientField> fields,
               std::optional<double> lipschitz = std::nullopt,
               std::optional<double> grad_bound = std::nullopt)
      : sets_(std::move(decision_sets)), fields_(std::move(fields)) {
    if (sets_.empty()) {
      throw std::invalid_argument("GameInstance: need at least one player");
    }
    if (sets_.size() != fields_.size()) {
      throw std::invalid_argument(
          "GameInstance: decision sets and gradient fields differ in count");
    }
    for (const Interval& s : sets_) {
      if (!(s.lo < s.hi)) {
        throw std::invalid_argument("GameInstance: decision set needs lo < hi");
      }
    }
    for (const GradientField& f : fields_) {
      if (!f) throw std::invalid_argument("GameInstance: empty gradient field");
    }
    lipschitz_ = lipschitz ? *lipschitz : EstimateLipschitz();
    grad_bound_ = grad_bound ? *grad_bound : EstimateGradBound();
    if (!(lipschitz_ > 0.0) || !(grad_bound_ > 0.0)) {
      throw std::invalid_argument("GameInstance: l and eta must be positive");
    }
  }

  int num_players() const { return static_cast<int>(sets_.size()); }
  const Interval& decision_set(int i) const { return sets_.at(i); }
  const std::vector<Interval>& decision_sets() const { return sets_; }
  const GradientField& field(int i) const { return fields_.at(i); }

  // Minkowski average of the decision sets.
  Interval aggregate_set() const {
    Interval agg;
    for (const Interval& s : sets_) {
      agg.lo += s.lo;
      agg.hi += s.hi;
    }
    agg.lo /= num_players();
    agg.hi /= num_players();
    return agg;
  }

  double Gradient(int i, double x, double u) const { return fields_[i](x, u); }

  double lipschitz() const { return lipschitz_; }
  double grad_bound() const { return grad_bound_; }

  // Copy of this game with player i's field replaced. Constants l and eta are
  // re-estimated.
  GameInstance WithField(int i, GradientField field) const {
    std::vector<GradientField> fields = fields_;
    fields.at(i) = std::move(field);
    return GameInstance(sets_, std::move(fields));
  }

 private:
  static double GridPoint(const Interval& s, int m) {
    return s.lo + s.width() * m / (kEstimateGrid - 1);
  }

  // Largest difference quotient in u over adjacent grid points, per player.
  double EstimateLipschitz() const {
    const Interval agg = aggregate_set();
    double best = 0.0;
    for (int i = 0; i < num_players(); ++i) {
      for (int a = 0; a < kEstimateGrid; ++a) {
        const double x = GridPoint(sets_[i], a);
        for (int b = 0; b + 1 < kEstimateGrid; ++b) {
          const double u1 = GridPoint(agg, b);
          const double u2 = GridPoint(agg, b + 1);
          const double q =
              std::abs(fields_[i](x, u1) - fields_[i](x, u2)) / (u2 - u1);
          best = std::max(best, q);
        }
      }
    }
    return std::max(best * kEstimateMargin, kFloor);
  }

  double EstimateGradBound() const {
    const Interval agg = aggregate_set();
    double best = 0.0;
    for (int i = 0; i < num_players(); ++i) {
      for (int a = 0; a < kEstimateGrid; ++a) {
        for (int b = 0; b < kEstimateGrid; ++b) {
          best = std::max(best, std::abs(fields_[i](GridPoint(sets_[i], a),
                                                    GridPoint(agg, b))));
        }
      }
    }
    return std::max(best * kEstimateMargin, kFloor);
  }

  // Constant fields have zero difference quotients; keep l, eta positive.
  static constexpr double kFloor = 1e-12;

  std::vector<Interval> sets_;
  std::vector<GradientField> fields_;
  double lipschitz_ = 0.0;
  double grad_bound_ = 0.0;
};

// phi(x)_i = F_i(x_i, mean(x)).
inline std::vector<double> PseudoGradient(const GameInstance& game,
                                          std::span<const double> x) {
  if (static_cast<int>(x.size()) != game.num_players()) {
    throw std::invalid_argument("PseudoGradient: dimension mismatch");
  }
  for (int i = 0; i < game.num_players(); ++i) {
    if (!game.decision_set(i).Contains(x[i], kDomainTolerance)) {
      throw std::out_of_range("PseudoGradient: x[" + std::to_string(i) +
                              "] outside its decision set");
    }
  }
  const double mean =
      std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  std::vector<double> phi(x.size());
  for (int i = 0; i < game.num_players(); ++i) {
    phi[i] = game.Gradient(i, x[i], mean);
  }
  return phi;
}

// Quadratic aggregative game
//   f_i(x) = (x_i - target_i)^2 + (coupling * sum_j x_j + offset) * x_i.
// The gradient field includes the own-decision term coupling * x_i, so
// phi(x) is the exact game gradient and phi(x*) = 0 at the equilibrium.
struct QuadraticGame {
  std::vector<double> targets;
  std::vector<Interval> decision_sets;
  double coupling = 0.04;
  double offset = 5.0;

  int num_players() const { return static_cast<int>(targets.size()); }

  GradientField Field(int i) const {
    const double target = targets.at(i);
    const double beta = coupling;
    const double p = offset;
    const double n = static_cast<double>(targets.size());
    return [=](double x, double u) {
      return 2.0 * (x - target) + beta * x + beta * n * u + p;
    };
  }

  GameInstance ToInstance() const {
    if (targets.size() != decision_sets.size()) {
      throw std::invalid_argument(
          "QuadraticGame: targets and decision sets differ in count");
    }
    if (!(coupling > 0.0)) {
      throw std::invalid_argument("QuadraticGame: coupling must be positive");
    }
    std::vector<GradientField> fields;
    for (int i = 0; i < num_players(); ++i) fields.push_back(Field(i));
    // F_i is affine: dF/du = coupling * N, |F| peaks at a corner.
    const double l = coupling * num_players();
    return GameInstance(decision_sets, std::move(fields), l);
  }

  // The five-player energy consumption game.
  static QuadraticGame Energy() {
    return QuadraticGame{
        .targets = {50, 55, 60, 65, 70},
        .decision_sets = {{40, 45}, {44, 49}, {48, 53}, {54, 59}, {58, 63}},
        .coupling = 0.04,
        .offset = 5.0,
    };
  }
};

struct NashSolution {
  std::vector<double> x;
  // Components that fall outside their decision sets. The unconstrained
  // solution is only the equilibrium when this is empty.
  std::vector<int> violated;

  bool feasible() const { return violated.empty(); }
};

// Solves (2 + beta) x_i + beta * sum_j x_j = 2 target_i - offset.
inline NashSolution SolveQuadraticEquilibrium(const QuadraticGame& game) {
  const int n = game.num_players();
  if (n == 0 || game.decision_sets.size() != game.targets.size()) {
    throw std::invalid_argument("SolveQuadraticEquilibrium: malformed game");
  }
  const double beta = game.coupling;
  Eigen::MatrixXd a = Eigen::MatrixXd::Constant(n, n, beta);
  a.diagonal().array() += 2.0 + beta;
  Eigen::VectorXd rhs(n);
  for (int i = 0; i < n; ++i) rhs(i) = 2.0 * game.targets[i] - game.offset;

  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible()) {
    throw std::domain_error("SolveQuadraticEquilibrium: singular system");
  }
  const Eigen::VectorXd sol = lu.solve(rhs);

  NashSolution out;
  out.x.assign(sol.data(), sol.data() + n);
  for (int i = 0; i < n; ++i) {
    if (!game.decision_sets[i].Contains(out.x[i])) out.violated.push_back(i);
  }
  return out;
}

struct MonotonicityReport {
  int samples = 0;
  double min_inner_product = std::numeric_limits<double>::infinity();
  int violations = 0;

  bool violated() const { return violations > 0; }
};

// Random probe of strict monotonicity of phi over the decision box: draws
// pairs x != x' and records (phi(x) - phi(x'))^T (x - x').
inline MonotonicityReport CheckMonotonicity(const GameInstance& game,
                                            int samples, Rng& rng) {
  if (samples < 1) {
    throw std::invalid_argument("CheckMonotonicity: samples must be >= 1");
  }
  const int n = game.num_players();
  std::vector<double> x(n), xp(n);
  MonotonicityReport report;
  while (report.samples < samples) {
    for (int i = 0; i < n; ++i) {
      const Interval& s = game.decision_set(i);
      x[i] = rng.Uniform(s.lo, s.hi);
      xp[i] = rng.Uniform(s.lo, s.hi);
    }
    if (x == xp) continue;
    const std::vector<double> phi = PseudoGradient(game, x);
    const std::vector<double> phip = PseudoGradient(game, xp);
    double inner = 0.0;
    for (int i = 0; i < n; ++i) inner += (phi[i] - phip[i]) * (x[i] - xp[i]);
    report.min_inner_product = std::min(report.min_inner_product, inner);
    if (inner <= 0.0) ++report.violations;
    ++report.samples;
  }
  return report;
}

}  // namespace dpne
