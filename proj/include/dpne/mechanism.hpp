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

// Dual-randomness privacy mechanism: a stochastic event trigger that decides
// when a player broadcasts, and an unbiased stochastic quantizer that decides
// what it broadcasts.
//
// A player fires at iteration k when xi > sigma * exp(-c * rho^2 / gamma_k),
// with xi ~ Uniform[a, 1) and rho the gap between its last broadcast value
// and its current estimate. Because sigma > 1, rho = 0 never fires. When it
// fires, the broadcast is a random rounding of the estimate to the lattice
// d * Z that is unbiased with error variance at most d^2 / 4.

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>

namespace dpne {

struct MechanismParams {
  double sigma = 1.03;
  double c = 1e-4;
  double a = 0.05;
  double d = 15.0;

  void Validate() const {
    if (!(sigma > 1.0)) throw std::invalid_argument("mechanism: need sigma > 1");
    if (!(c > 0.0)) throw std::invalid_argument("mechanism: need c > 0");
    if (!(a > 0.0 && a < 1.0)) {
      throw std::invalid_argument("mechanism: need 0 < a < 1");
    }
    if (!(d > 0.0)) throw std::invalid_argument("mechanism: need d > 0");
  }
};

struct QuantizationSample {
  double input = 0.0;
  double output = 0.0;  // a multiple of d
  double error = 0.0;   // output - input
};

// Rounds v to floor(v/d)*d or the next lattice point up, going up with
// probability (v - floor(v/d)*d) / d. `draw` is uniform in [0, 1). Exact
// multiples of d map to themselves with probability one.
inline QuantizationSample StochasticQuantize(double v, double d, double draw) {
  if (!(d > 0.0)) throw std::invalid_argument("quantize: need d > 0");
  if (!std::isfinite(v)) throw std::invalid_argument("quantize: non-finite input");
  const double n = std::floor(v / d);
  const double z = v - n * d;
  const double out = draw < z / d ? (n + 1.0) * d : n * d;
  return {v, out, out - v};
}

inline double TriggerThreshold(double rho, double gamma_k,
                               const MechanismParams& p) {
  if (!(gamma_k > 0.0)) throw std::invalid_argument("trigger: need gamma_k > 0");
  return p.sigma * std::exp(-p.c * rho * rho / gamma_k);
}

// Closed-form P(fire) for xi ~ Uniform(a, 1).
inline double TriggerProbability(double rho, double gamma_k,
                                 const MechanismParams& p) {
  p.Validate();
  const double threshold = TriggerThreshold(rho, gamma_k, p);
  const double prob = (1.0 - std::max(p.a, threshold)) / (1.0 - p.a);
  return std::clamp(prob, 0.0, 1.0);
}

inline bool TriggerDecide(double rho, double gamma_k, const MechanismParams& p,
                          double xi) {
  p.Validate();
  if (!(xi >= p.a && xi < 1.0)) {
    throw std::invalid_argument("trigger: xi outside [a, 1)");
  }
  return xi > TriggerThreshold(rho, gamma_k, p);
}

// Maps a uniform [0, 1) draw onto the support [a, 1) of xi.
inline double TriggerNoise(double uniform, const MechanismParams& p) {
  return p.a + (1.0 - p.a) * uniform;
}

// Any silent (player, iteration) satisfies rho^2 <= (gamma/c) ln(sigma/xi).
// The relative slack absorbs rounding at the decision boundary.
inline bool NonTriggerBoundHolds(double rho, double gamma_k, double xi,
                                 const MechanismParams& p) {
  const double bound = gamma_k / p.c * std::log(p.sigma / xi);
  return rho * rho <= bound * (1.0 + 1e-12);
}

struct TriggerState {
  int tau = 0;          // iteration of the last broadcast
  double stored = 0.0;  // last broadcast (quantized) value
  double rho = 0.0;     // last trigger error
};

struct MechanismOutcome {
  TriggerState state;
  bool fired = false;
  std::optional<double> message;
  double rho = 0.0;
  double xi = 0.0;
};

// Iteration-0 broadcast that bypasses the trigger.
inline MechanismOutcome ForcedBroadcast(double y, const MechanismParams& p,
                                        double quantizer_draw) {
  const double q = StochasticQuantize(y, p.d, quantizer_draw).output;
  MechanismOutcome out;
  out.state = {0, q, 0.0};
  out.fired = true;
  out.message = q;
  return out;
}

// One trigger/quantize round for iteration k >= 1. `trigger_draw` and
// `quantizer_draw` are uniform in [0, 1); the quantizer draw is consumed only
// when the trigger fires.
inline MechanismOutcome MechanismStep(const TriggerState& state, double y,
                                      int k, double gamma_k,
                                      const MechanismParams& p,
                                      double trigger_draw,
                                      double quantizer_draw) {
  if (k < 1) throw std::invalid_argument("MechanismStep: needs k >= 1");
  MechanismOutcome out;
  out.state = state;
  out.rho = state.stored - y;
  out.xi = TriggerNoise(trigger_draw, p);
  out.state.rho = out.rho;
  out.fired = TriggerDecide(out.rho, gamma_k, p, out.xi);
  if (out.fired) {
    const double q = StochasticQuantize(y, p.d, quantizer_draw).output;
    out.message = q;
    out.state.stored = q;
    out.state.tau = k;
  }
  return out;
}

}  // namespace dpne
