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

#include <Eigen/Core>

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace ramp {

using Rng = std::mt19937_64;

/// Uniform draw in [0, 1) with 53 random bits; keeps sampling reproducible
/// across standard library implementations.
inline double u01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double standard_normal(Rng& rng) {
  const double u1 = (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
  const double u2 = u01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

enum class DistKind { Uniform, Gaussian, TruncatedGaussian, DiscreteFinite };

/// One scalar uncertainty source. Field use by kind:
///   Uniform:            lo, hi
///   Gaussian:           mean, std
///   TruncatedGaussian:  mean, std, lo, hi (parent parameters, hard bounds)
///   DiscreteFinite:     values, probs
struct DistributionSpec {
  DistKind kind{DistKind::Uniform};
  double lo{0.0};
  double hi{1.0};
  double mean{0.0};
  double std{1.0};
  std::vector<double> values;
  std::vector<double> probs;

  void validate() const {
    switch (kind) {
      case DistKind::Uniform:
        if (!(lo < hi)) throw std::invalid_argument("uniform distribution needs lo < hi");
        return;
      case DistKind::Gaussian:
        if (!(std > 0.0)) throw std::invalid_argument("gaussian distribution needs std > 0");
        return;
      case DistKind::TruncatedGaussian:
        if (!(std > 0.0)) throw std::invalid_argument("truncated gaussian needs std > 0");
        if (!(lo < hi)) throw std::invalid_argument("truncated gaussian needs lo < hi");
        return;
      case DistKind::DiscreteFinite: {
        if (values.empty() || values.size() != probs.size()) {
          throw std::invalid_argument("discrete distribution needs matching values and probs");
        }
        double total = 0.0;
        for (double p : probs) {
          if (p < 0.0) throw std::invalid_argument("discrete probabilities must be nonnegative");
          total += p;
        }
        if (std::abs(total - 1.0) > 1e-9) {
          throw std::invalid_argument("discrete probabilities must sum to 1, got " +
                                      std::to_string(total));
        }
        return;
      }
    }
    throw std::logic_error("unreachable distribution kind");
  }

  /// Support interval for quadrature. Gaussian tails are cut where their mass
  /// is far below every tolerance in use.
  std::pair<double, double> support() const {
    switch (kind) {
      case DistKind::Uniform:
      case DistKind::TruncatedGaussian:
        return {lo, hi};
      case DistKind::Gaussian:
        return {mean - 13.0 * std, mean + 13.0 * std};
      case DistKind::DiscreteFinite: {
        double a = values.front(), b = values.front();
        for (double v : values) {
          a = std::min(a, v);
          b = std::max(b, v);
        }
        return {a, b};
      }
    }
    throw std::logic_error("unreachable distribution kind");
  }

  /// Density on the support (continuous kinds only).
  double pdf(double x) const {
    switch (kind) {
      case DistKind::Uniform:
        return 1.0 / (hi - lo);
      case DistKind::Gaussian: {
        const double z = (x - mean) / std;
        return std::exp(-0.5 * z * z) / (std * std::sqrt(2.0 * M_PI));
      }
      case DistKind::TruncatedGaussian: {
        const double z = (x - mean) / std;
        const double mass = normal_cdf((hi - mean) / std) - normal_cdf((lo - mean) / std);
        return std::exp(-0.5 * z * z) / (std * std::sqrt(2.0 * M_PI) * mass);
      }
      case DistKind::DiscreteFinite:
        throw std::logic_error("discrete distribution has no density");
    }
    throw std::logic_error("unreachable distribution kind");
  }

  double sample(Rng& rng) const {
    switch (kind) {
      case DistKind::Uniform:
        return lo + (hi - lo) * u01(rng);
      case DistKind::Gaussian:
        return mean + std * standard_normal(rng);
      case DistKind::TruncatedGaussian: {
        for (int i = 0; i < 100000; ++i) {
          const double x = mean + std * standard_normal(rng);
          if (x >= lo && x <= hi) return x;
        }
        throw std::runtime_error("truncated gaussian rejection sampling failed; check bounds");
      }
      case DistKind::DiscreteFinite: {
        const double u = u01(rng);
        double acc = 0.0;
        for (size_t i = 0; i < values.size(); ++i) {
          acc += probs[i];
          if (u < acc) return values[i];
        }
        return values.back();
      }
    }
    throw std::logic_error("unreachable distribution kind");
  }
};

inline DistributionSpec uniform_dist(double lo, double hi) {
  DistributionSpec d;
  d.kind = DistKind::Uniform;
  d.lo = lo;
  d.hi = hi;
  return d;
}

inline DistributionSpec gaussian_dist(double mean, double std) {
  DistributionSpec d;
  d.kind = DistKind::Gaussian;
  d.mean = mean;
  d.std = std;
  return d;
}

inline DistributionSpec truncated_gaussian_dist(double mean, double std, double lo, double hi) {
  DistributionSpec d;
  d.kind = DistKind::TruncatedGaussian;
  d.mean = mean;
  d.std = std;
  d.lo = lo;
  d.hi = hi;
  return d;
}

inline DistributionSpec discrete_dist(std::vector<double> values, std::vector<double> probs) {
  DistributionSpec d;
  d.kind = DistKind::DiscreteFinite;
  d.values = std::move(values);
  d.probs = std::move(probs);
  return d;
}

/// One draw of the stacked uncertainty vector.
inline Eigen::VectorXd sample_eta(const std::vector<DistributionSpec>& dists, Rng& rng) {
  Eigen::VectorXd eta(static_cast<Eigen::Index>(dists.size()));
  for (size_t i = 0; i < dists.size(); ++i) eta[static_cast<Eigen::Index>(i)] = dists[i].sample(rng);
  return eta;
}

}  // namespace ramp
