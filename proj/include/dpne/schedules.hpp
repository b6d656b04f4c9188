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

#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace dpne {

// Power-law step size and decaying factor:
//   lambda_k = lambda0 / (1 + b_lambda * k^p)
//   gamma_k  = gamma0  / (1 + b_gamma  * k^q)
struct Schedules {
  double lambda0 = 0.03;
  double b_lambda = 0.01;
  double p = 0.95;
  double gamma0 = 1.2;
  double b_gamma = 0.12;
  double q = 0.55;

  double Lambda(long k) const {
    return lambda0 / (1.0 + b_lambda * std::pow(static_cast<double>(k), p));
  }
  double Gamma(long k) const {
    return gamma0 / (1.0 + b_gamma * std::pow(static_cast<double>(k), q));
  }
};

struct ScheduleValidity {
  // sum lambda = inf, sum gamma = inf, sum gamma^2 < inf,
  // sum lambda^2 / gamma < inf.
  bool convergence_ok = false;
  // Additionally sum lambda^2 / gamma^{3/2} < inf.
  bool privacy_ok = false;
  std::string convergence_reason;
  std::string privacy_reason;
};

inline ScheduleValidity ValidateSchedules(const Schedules& s) {
  if (!(s.lambda0 > 0 && s.b_lambda > 0 && s.p > 0 && s.gamma0 > 0 &&
        s.b_gamma > 0 && s.q > 0)) {
    throw std::invalid_argument("schedules: all parameters must be positive");
  }
  ScheduleValidity v;
  if (s.p > 1.0) {
    v.convergence_reason = "sum of lambda_k is finite (need p <= 1)";
  } else if (s.q > 1.0) {
    v.convergence_reason = "sum of gamma_k is finite (need q <= 1)";
  } else if (s.q <= 0.5) {
    v.convergence_reason = "sum of gamma_k^2 diverges (need q > 1/2)";
  } else if (2.0 * s.p - s.q <= 1.0) {
    v.convergence_reason =
        "sum of lambda_k^2 / gamma_k diverges (need 2p - q > 1, got " +
        std::to_string(2.0 * s.p - s.q) + ")";
  } else {
    v.convergence_ok = true;
  }

  const double privacy_exponent = 2.0 * s.p - 1.5 * s.q;
  if (!v.convergence_ok) {
    v.privacy_reason = "convergence conditions fail";
  } else if (privacy_exponent <= 1.0) {
    v.privacy_reason =
        "sum of lambda_k^2 / gamma_k^(3/2) diverges (need 2p - 1.5q > 1, got " +
        std::to_string(privacy_exponent) + ")";
  } else {
    v.privacy_ok = true;
  }
  return v;
}

}  // namespace dpne
