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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dpne/schedules.hpp"

namespace dpne {

inline double Mean(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("Mean: empty sample");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Population variance.
inline double Variance(std::span<const double> v) {
  const double m = Mean(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return acc / static_cast<double>(v.size());
}

inline double Median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("Median: empty sample");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lower + upper);
}

// One-sided Mann-Whitney U test of H1: values in `high` tend to exceed those
// in `low`. Normal approximation with tie correction; returns the p-value.
inline double RankSumPValue(std::span<const double> high,
                            std::span<const double> low) {
  const std::size_t n1 = high.size();
  const std::size_t n2 = low.size();
  if (n1 == 0 || n2 == 0) throw std::invalid_argument("RankSum: empty sample");
  std::vector<std::pair<double, int>> all;
  for (double v : high) all.emplace_back(v, 0);
  for (double v : low) all.emplace_back(v, 1);
  std::sort(all.begin(), all.end());

  const double n = static_cast<double>(n1 + n2);
  double rank_sum_high = 0.0;
  double tie_term = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    for (std::size_t m = i; m < j; ++m) {
      if (all[m].second == 0) rank_sum_high += avg_rank;
    }
    i = j;
  }
  const double a = static_cast<double>(n1);
  const double b = static_cast<double>(n2);
  const double u = rank_sum_high - a * (a + 1.0) / 2.0;
  const double mean_u = a * b / 2.0;
  const double var_u = a * b / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
  if (var_u <= 0.0) return u > mean_u ? 0.0 : 1.0;
  const double z = (u - mean_u) / std::sqrt(var_u);
  return 0.5 * std::erfc(z / std::sqrt(2.0));
}

enum class RateModel {
  kLambdaOverGamma,    // metric ~ C * (lambda/gamma)
  kLambdaOverGammaSq,  // metric ~ C * (lambda/gamma)^2
};

struct RateFit {
  double constant = 0.0;
  // RMS of (metric - C*g) relative to the mean metric.
  double relative_residual = 0.0;
  // Range of metric_k / g_k over the fitted window.
  double min_ratio = 0.0;
  double max_ratio = 0.0;
};

// Least-squares fit of metric[m] = C * g(ks[m]) for the chosen model.
inline RateFit FitRate(std::span<const double> metric, std::span<const long> ks,
                       const Schedules& s, RateModel model) {
  if (metric.empty()) throw std::invalid_argument("FitRate: empty sequence");
  if (metric.size() != ks.size()) {
    throw std::invalid_argument("FitRate: metric and index lengths differ");
  }
  const double e = model == RateModel::kLambdaOverGamma ? 1.0 : 2.0;
  std::vector<double> g(metric.size());
  double num = 0.0;
  double den = 0.0;
  for (std::size_t m = 0; m < metric.size(); ++m) {
    g[m] = std::pow(s.Lambda(ks[m]) / s.Gamma(ks[m]), e);
    num += metric[m] * g[m];
    den += g[m] * g[m];
  }
  if (!(den > 0.0) || !std::isfinite(num)) {
    throw std::invalid_argument("FitRate: degenerate sequence");
  }
  RateFit fit;
  fit.constant = num / den;
  double sq = 0.0;
  fit.min_ratio = metric[0] / g[0];
  fit.max_ratio = fit.min_ratio;
  for (std::size_t m = 0; m < metric.size(); ++m) {
    const double r = metric[m] - fit.constant * g[m];
    sq += r * r;
    fit.min_ratio = std::min(fit.min_ratio, metric[m] / g[m]);
    fit.max_ratio = std::max(fit.max_ratio, metric[m] / g[m]);
  }
  const double scale = std::abs(Mean(metric));
  fit.relative_residual =
      std::sqrt(sq / static_cast<double>(metric.size())) / (scale > 0 ? scale : 1.0);
  return fit;
}

// Contiguous iterations k_begin, k_begin + 1, ...
inline RateFit FitRate(std::span<const double> metric, const Schedules& s,
                       RateModel model, long k_begin = 0) {
  std::vector<long> ks(metric.size());
  for (std::size_t m = 0; m < ks.size(); ++m) ks[m] = k_begin + static_cast<long>(m);
  return FitRate(metric, ks, s, model);
}

}  // namespace dpne
