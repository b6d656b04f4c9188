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

// Undirected weighted communication graph and its weight matrix L, with
// L_ij > 0 on edges, L_ii = -sum_{j != i} L_ij, so rows and columns sum to
// zero and the spectrum is non-positive. Players are indexed from 0.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <queue>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dpne {

struct Edge {
  int i = 0;
  int j = 0;
  double weight = 1.0;
};

class Topology {
 public:
  // Throws std::invalid_argument on self-loops, nonpositive weights,
  // duplicate edges, out-of-range endpoints or a disconnected graph.
  static Topology Build(const std::vector<Edge>& edges, int n) {
    if (n < 1) throw std::invalid_argument("Topology: need n >= 1");
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
    for (const Edge& e : edges) {
      if (e.i < 0 || e.i >= n || e.j < 0 || e.j >= n) {
        throw std::invalid_argument("Topology: edge endpoint out of range");
      }
      if (e.i == e.j) {
        throw std::invalid_argument("Topology: self-loop at node " +
                                    std::to_string(e.i));
      }
      if (!(e.weight > 0.0) || !std::isfinite(e.weight)) {
        throw std::invalid_argument("Topology: edge weight must be positive");
      }
      if (w(e.i, e.j) != 0.0) {
        throw std::invalid_argument("Topology: duplicate edge " +
                                    std::to_string(e.i) + "-" +
                                    std::to_string(e.j));
      }
      w(e.i, e.j) = e.weight;
      w(e.j, e.i) = e.weight;
    }
    return Topology(std::move(w));
  }

  static Topology Ring(int n, double weight = 1.0) {
    if (n < 3) return Path(n, weight);
    std::vector<Edge> edges;
    for (int i = 0; i < n; ++i) edges.push_back({i, (i + 1) % n, weight});
    return Build(edges, n);
  }

  static Topology Path(int n, double weight = 1.0) {
    std::vector<Edge> edges;
    for (int i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1, weight});
    return Build(edges, n);
  }

  static Topology Complete(int n, double weight = 1.0) {
    std::vector<Edge> edges;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) edges.push_back({i, j, weight});
    }
    return Build(edges, n);
  }

  static Topology Star(int n, double weight = 1.0) {
    std::vector<Edge> edges;
    for (int i = 1; i < n; ++i) edges.push_back({0, i, weight});
    return Build(edges, n);
  }

  int size() const { return static_cast<int>(weights_.rows()); }
  const Eigen::MatrixXd& weights() const { return weights_; }
  double weight(int i, int j) const { return weights_(i, j); }
  const std::vector<int>& neighbors(int i) const { return neighbors_.at(i); }

  // Second largest eigenvalue of L. Negative for every connected graph with
  // at least two nodes; zero for a single node.
  double second_eigenvalue() const { return rho2_; }
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  // Spectral norm of L.
  double norm() const { return eigenvalues_.cwiseAbs().maxCoeff(); }

 private:
  explicit Topology(Eigen::MatrixXd adjacency) {
    const int n = static_cast<int>(adjacency.rows());
    neighbors_.resize(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (adjacency(i, j) > 0.0) neighbors_[i].push_back(j);
      }
    }
    if (!Connected()) throw std::invalid_argument("Topology: disconnected");

    weights_ = adjacency;
    for (int i = 0; i < n; ++i) weights_(i, i) = -adjacency.row(i).sum();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
        weights_, Eigen::EigenvaluesOnly);
    eigenvalues_ = solver.eigenvalues();  // ascending
    rho2_ = n >= 2 ? eigenvalues_(n - 2) : 0.0;
  }

  bool Connected() const {
    const int n = static_cast<int>(neighbors_.size());
    std::vector<bool> seen(n, false);
    std::queue<int> frontier;
    frontier.push(0);
    seen[0] = true;
    int count = 1;
    while (!frontier.empty()) {
      const int v = frontier.front();
      frontier.pop();
      for (int u : neighbors_[v]) {
        if (!seen[u]) {
          seen[u] = true;
          ++count;
          frontier.push(u);
        }
      }
    }
    return count == n;
  }

  Eigen::MatrixXd weights_;
  std::vector<std::vector<int>> neighbors_;
  Eigen::VectorXd eigenvalues_;
  double rho2_ = 0.0;
};

}  // namespace dpne
