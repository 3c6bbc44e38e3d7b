// Copyright 2026 The ramp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

namespace ramp {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Legendre rule on [-1, 1]. Nodes are Legendre roots found by Newton
/// iteration from the Chebyshev-like initial guess; symmetric pairs share one
/// solve. Rules are cached per order.
inline const QuadratureRule& gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("quadrature order must be positive");
  static std::map<int, QuadratureRule> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;

  QuadratureRule rule;
  rule.nodes.assign(static_cast<size_t>(n), 0.0);
  rule.weights.assign(static_cast<size_t>(n), 0.0);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      // Recurrence (j+1)P_{j+1} = (2j+1)xP_j - jP_{j-1}.
      double p0 = 1.0, p1 = x;
      for (int j = 1; j < n; ++j) {
        const double p2 = ((2.0 * j + 1.0) * x * p1 - j * p0) / (j + 1.0);
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[static_cast<size_t>(i)] = -x;
    rule.nodes[static_cast<size_t>(n - 1 - i)] = x;
    rule.weights[static_cast<size_t>(i)] = w;
    rule.weights[static_cast<size_t>(n - 1 - i)] = w;
  }
  if (n % 2 == 1) rule.nodes[static_cast<size_t>(n / 2)] = 0.0;
  auto [pos, ok] = cache.emplace(n, std::move(rule));
  (void)ok;
  return pos->second;
}

/// Gauss-Legendre rule mapped onto [a, b].
inline QuadratureRule gauss_legendre_on(int n, double a, double b) {
  if (!(a < b)) throw std::invalid_argument("quadrature interval must have a < b");
  const QuadratureRule& base = gauss_legendre(n);
  QuadratureRule rule;
  rule.nodes.reserve(static_cast<size_t>(n));
  rule.weights.reserve(static_cast<size_t>(n));
  const double mid = 0.5 * (a + b);
  const double halfw = 0.5 * (b - a);
  for (int i = 0; i < n; ++i) {
    rule.nodes.push_back(mid + halfw * base.nodes[static_cast<size_t>(i)]);
    rule.weights.push_back(halfw * base.weights[static_cast<size_t>(i)]);
  }
  return rule;
}

}  // namespace ramp
