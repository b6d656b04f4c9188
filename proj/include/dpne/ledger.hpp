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

// Privacy accounting for the event-triggered quantized scheme.
//
// With sensitivity envelope Delta_k <= C * lambda_k^2 / gamma_k, iteration k
// is (0, delta_k)-differentially private with
//
//   delta_k = (sigma / (1 - a) * sqrt(2c / (e * gamma_k)) + 1/d)
//             * C * lambda_k^2 / gamma_k,
//
// and T iterations compose to (0, sum_{k<=T} delta_k). For power-law
// schedules the infinite sum is finite exactly when 2p - 1.5q > 1.
//
// C is not known in closed form. EstimateCTilde measures it from coupled
// runs on adjacent games that share every random draw.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpne/game.hpp"
#include "dpne/mechanism.hpp"
#include "dpne/schedules.hpp"
#include "dpne/seeker.hpp"
#include "dpne/topology.hpp"

namespace dpne {

// sigma / (1 - a) * sqrt(2c / (e * gamma_k)) + 1/d
inline double DeltaBracket(const Schedules& s, const MechanismParams& p,
                           long k) {
  p.Validate();
  const double gamma = s.Gamma(k);
  return p.sigma / (1.0 - p.a) * std::sqrt(2.0 * p.c / (std::numbers::e * gamma)) +
         1.0 / p.d;
}

inline double SensitivityBound(const Schedules& s, double c_tilde, long k) {
  const double lambda = s.Lambda(k);
  return c_tilde * lambda * lambda / s.Gamma(k);
}

inline double DeltaPerIteration(const Schedules& s, const MechanismParams& p,
                                double c_tilde, long k) {
  if (k < 0) throw std::invalid_argument("delta: negative iteration");
  if (!(c_tilde >= 0.0)) throw std::invalid_argument("delta: C must be >= 0");
  return DeltaBracket(s, p, k) * SensitivityBound(s, c_tilde, k);
}

struct CumulativeDelta {
  long horizon = 0;
  double partial_sum = 0.0;  // sum_{k=0}^{T} delta_k
  // Upper bound on sum_{k>T} delta_k; +inf when the series diverges.
  double tail_bound = std::numeric_limits<double>::infinity();

  bool tail_finite() const { return std::isfinite(tail_bound); }
  double infinite_horizon_bound() const { return partial_sum + tail_bound; }
};

namespace detail {

// sum_{k > T} k^-e for e > 1, bounded by the integral from T (or by
// 1 + 1/(e-1) when T = 0).
inline double PowerTail(long horizon, double e) {
  if (horizon <= 0) return 1.0 + 1.0 / (e - 1.0);
  return std::pow(static_cast<double>(horizon), 1.0 - e) / (e - 1.0);
}

}  // namespace detail

inline CumulativeDelta CumulativeDeltaSum(const Schedules& s,
                                          const MechanismParams& p,
                                          double c_tilde, long horizon) {
  if (horizon < 0) throw std::invalid_argument("cumulative: negative horizon");
  CumulativeDelta out;
  out.horizon = horizon;
  for (long k = 0; k <= horizon; ++k) {
    out.partial_sum += DeltaPerIteration(s, p, c_tilde, k);
  }
  if (!ValidateSchedules(s).privacy_ok) return out;

  // For k >= 1: lambda_k <= (lambda0 / b_l) k^-p and
  // 1 / gamma_k <= ((1 + b_g) / gamma0) k^q.
  const double lam = s.lambda0 / s.b_lambda;
  const double inv_gamma = (1.0 + s.b_gamma) / s.gamma0;
  const double trigger_coeff =
      p.sigma / (1.0 - p.a) * std::sqrt(2.0 * p.c / std::numbers::e);
  const double e_trigger = 2.0 * s.p - 1.5 * s.q;
  const double e_quant = 2.0 * s.p - s.q;
  out.tail_bound =
      c_tilde * (trigger_coeff * lam * lam * std::pow(inv_gamma, 1.5) *
                     detail::PowerTail(horizon, e_trigger) +
                 lam * lam * inv_gamma / p.d * detail::PowerTail(horizon, e_quant));
  return out;
}

struct LedgerEntry {
  long k = 0;
  double lambda = 0.0;
  double gamma = 0.0;
  double sensitivity_bound = 0.0;
  double delta = 0.0;
  double cumulative = 0.0;
};

class PrivacyLedger {
 public:
  PrivacyLedger(Schedules s, MechanismParams p, double c_tilde)
      : schedules_(s), params_(p), c_tilde_(c_tilde) {
    params_.Validate();
    if (!(c_tilde_ > 0.0)) throw std::invalid_argument("ledger: need C > 0");
  }

  // Appends iteration k = entries().size().
  const LedgerEntry& Advance() {
    LedgerEntry e;
    e.k = static_cast<long>(entries_.size());
    e.lambda = schedules_.Lambda(e.k);
    e.gamma = schedules_.Gamma(e.k);
    e.sensitivity_bound = SensitivityBound(schedules_, c_tilde_, e.k);
    e.delta = DeltaPerIteration(schedules_, params_, c_tilde_, e.k);
    e.cumulative = (entries_.empty() ? 0.0 : entries_.back().cumulative) + e.delta;
    if (!(e.delta > 0.0 && e.delta < 1.0)) ++out_of_range_;
    entries_.push_back(e);
    return entries_.back();
  }

  void AdvanceTo(long horizon) {
    while (static_cast<long>(entries_.size()) <= horizon) Advance();
  }

  double c_tilde() const { return c_tilde_; }
  const std::vector<LedgerEntry>& entries() const { return entries_; }
  // Number of iterations whose delta_k fell outside (0, 1).
  int out_of_range() const { return out_of_range_; }
  double cumulative() const {
    return entries_.empty() ? 0.0 : entries_.back().cumulative;
  }

  std::string Statement() const {
    std::ostringstream os;
    os.precision(6);
    const long t = entries_.empty() ? 0 : entries_.back().k;
    os << "per-iteration: (0, " << (entries_.empty() ? 0.0 : entries_.back().delta)
       << ")-DP at k=" << t << "; composed: (0, " << cumulative()
       << ")-DP over k=0.." << t;
    return os.str();
  }

 private:
  Schedules schedules_;
  MechanismParams params_;
  double c_tilde_;
  std::vector<LedgerEntry> entries_;
  int out_of_range_ = 0;
};

// Perturbation of one player's cost that leaves its gradient untouched on the
// ball |x - x_i*| <= alpha around its equilibrium decision.
struct AdjacencySpec {
  int perturbed_player = 0;
  double alpha = 0.5;
  double kappa = 0.01;
};

inline double Ramp(double t) { return t > 0.0 ? t * t : 0.0; }

// F'_i(x, u) = F_i(x, u) + kappa * ramp(|x - x_i*| - alpha).
inline GameInstance MakeAdjacent(const GameInstance& game,
                                 const AdjacencySpec& spec,
                                 std::span<const double> ne) {
  if (!(spec.alpha > 0.0)) throw std::invalid_argument("adjacent: need alpha > 0");
  const int i = spec.perturbed_player;
  if (i < 0 || i >= game.num_players() ||
      static_cast<int>(ne.size()) != game.num_players()) {
    throw std::invalid_argument("adjacent: bad player or equilibrium size");
  }
  GradientField base = game.field(i);
  const double center = ne[i];
  const double alpha = spec.alpha;
  const double kappa = spec.kappa;
  return game.WithField(i, [=](double x, double u) {
    return base(x, u) + kappa * Ramp(std::abs(x - center) - alpha);
  });
}

struct SensitivityTrace {
  std::uint64_t seed = 0;
  std::vector<double> gap;    // |y_i^k - y'_i^k|, k = 0..T
  std::vector<double> ratio;  // gap * gamma_k / lambda_k^2, k = 0..T
  bool observations_equal = true;
};

// Runs the original and adjacent games from the same initial decisions with
// the same random streams.
inline SensitivityTrace CoupledSensitivity(const GameInstance& game,
                                           const GameInstance& adjacent,
                                           const Topology& topo,
                                           const MechanismParams& params,
                                           const Schedules& s, int iterations,
                                           std::uint64_t seed, int player) {
  const std::vector<double> x0 = UniformInit(game, seed);
  const Trajectory a = Run(game, topo, params, s, iterations, x0, seed);
  const Trajectory b = Run(adjacent, topo, params, s, iterations, x0, seed);
  SensitivityTrace trace;
  trace.seed = seed;
  for (int k = 0; k <= iterations; ++k) {
    const double g = std::abs(a.y[k][player] - b.y[k][player]);
    if (!std::isfinite(g)) throw std::runtime_error("coupled run diverged");
    trace.gap.push_back(g);
    const double lambda = s.Lambda(k);
    trace.ratio.push_back(g * s.Gamma(k) / (lambda * lambda));
  }
  for (std::size_t m = 0; m < a.observations.size(); ++m) {
    const ObservationRecord& oa = a.observations[m];
    const ObservationRecord& ob = b.observations[m];
    if (oa.fired != ob.fired || oa.message != ob.message) {
      trace.observations_equal = false;
      break;
    }
  }
  return trace;
}

struct CTildeEstimate {
  double c_tilde = 0.0;
  std::uint64_t argmax_seed = 0;
  int argmax_k = 0;
  std::vector<SensitivityTrace> traces;
};

// Max over seeds and k >= 1 of |y_i^k - y'_i^k| * gamma_k / lambda_k^2.
inline CTildeEstimate EstimateCTilde(const GameInstance& game,
                                     const GameInstance& adjacent,
                                     const Topology& topo,
                                     const MechanismParams& params,
                                     const Schedules& s, int iterations,
                                     std::span<const std::uint64_t> seeds,
                                     int player) {
  if (seeds.empty()) throw std::invalid_argument("EstimateCTilde: no seeds");
  CTildeEstimate est;
  for (std::uint64_t seed : seeds) {
    SensitivityTrace t = CoupledSensitivity(game, adjacent, topo, params, s,
                                            iterations, seed, player);
    for (int k = 1; k <= iterations; ++k) {
      if (t.ratio[k] > est.c_tilde) {
        est.c_tilde = t.ratio[k];
        est.argmax_seed = seed;
        est.argmax_k = k;
      }
    }
    est.traces.push_back(std::move(t));
  }
  return est;
}

}  // namespace dpne
