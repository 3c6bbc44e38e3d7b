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
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ramp/bicycle.hpp"
#include "ramp/distributions.hpp"

namespace ramp {

/// First-order model of the ego vehicle around (x0, u0):
/// x+ = A x + B u + d, output = state. A and B are the exact Jacobians of the
/// bicycle update, so one linearized step from the expansion point reproduces
/// the nonlinear step.
struct EvLinearModel {
  Eigen::Matrix4d A;
  Eigen::Matrix<double, 4, 2> B;
  Eigen::Vector4d d;
  double dt{0.0};
  Eigen::Vector4d x0;
  Eigen::Vector2d u0;
};

inline EvLinearModel linearize_ev(const BicycleState& x0, const Eigen::Vector2d& u0, double dt,
                                  double l) {
  if (!(l > 0.0)) throw std::invalid_argument("invalid geometry: wheelbase must be positive");
  const double gamma0 = u0[0];
  const double cs = std::cos(x0.phi + gamma0);
  const double sn = std::sin(x0.phi + gamma0);

  EvLinearModel m;
  m.dt = dt;
  m.x0 = x0.vec();
  m.u0 = u0;
  m.A = Eigen::Matrix4d::Identity();
  m.A(0, 2) = -dt * x0.omega * sn;
  m.A(0, 3) = dt * cs;
  m.A(1, 2) = dt * x0.omega * cs;
  m.A(1, 3) = dt * sn;
  m.A(2, 3) = dt * std::sin(gamma0) / l;
  m.B.setZero();
  m.B(0, 0) = -dt * x0.omega * sn;
  m.B(1, 0) = dt * x0.omega * cs;
  // Steering-to-heading gain: the simplified printed input matrix drops this
  // entry, but without it heading is uncontrollable with gamma0 = 0.
  m.B(2, 0) = dt * x0.omega * std::cos(gamma0) / l;
  m.B(3, 1) = dt;

  const BicycleState x1 = bicycle_step(x0, u0[0], u0[1], dt, l);
  m.d = (x1.vec() - x0.vec()) - (m.A - Eigen::Matrix4d::Identity()) * x0.vec() - m.B * u0;
  return m;
}

/// Factored linearization of the opponent model around z0 with the length
/// uncertainty split out: z+ = A0 z + (b0 B0 + b1 B1) tau + (e0 d0 + e1 d1)
/// where b0 = iota, b1 = iota/l, e0 = 1, e1 = delta. B1 acts only on the
/// heading row, d1 only on the speed row.
struct OvLinearization {
  Eigen::Matrix4d A0;
  Eigen::Matrix<double, 4, 2> B0;
  Eigen::Matrix<double, 4, 2> B1;
  Eigen::Vector4d d0;
  Eigen::Vector4d d1;
  double dt{0.0};
  Eigen::Vector4d z0;
};

inline OvLinearization linearize_ov(const BicycleState& z0, double dt) {
  const double cs = std::cos(z0.phi);
  const double sn = std::sin(z0.phi);
  OvLinearization m;
  m.dt = dt;
  m.z0 = z0.vec();
  m.A0 = Eigen::Matrix4d::Identity();
  m.A0(0, 2) = -dt * z0.omega * sn;
  m.A0(0, 3) = dt * cs;
  m.A0(1, 2) = dt * z0.omega * cs;
  m.A0(1, 3) = dt * sn;
  m.B0.setZero();
  m.B0(0, 0) = -dt * z0.omega * sn;
  m.B0(1, 0) = dt * z0.omega * cs;
  m.B0(3, 1) = dt;
  m.B1.setZero();
  m.B1(2, 0) = dt * z0.omega * cs;
  m.d0 = Eigen::Vector4d(dt * z0.omega * z0.phi * sn, -dt * z0.omega * z0.phi * cs, 0.0, 0.0);
  m.d1 = Eigen::Vector4d(0.0, 0.0, 0.0, dt);
  return m;
}

struct OvFactors {
  double b0{0.0}, b1{0.0}, e0{1.0}, e1{0.0};
};

/// Scalar uncertainty factors for the factored opponent model, eta = (l, delta, iota).
inline OvFactors ov_factors(const Eigen::Vector3d& eta) {
  const double l = eta[0];
  if (!(l > 0.0)) throw std::invalid_argument("invalid geometry: length must be positive");
  OvFactors f;
  f.b0 = eta[2];
  f.b1 = eta[2] / l;
  f.e0 = 1.0;
  f.e1 = eta[1];
  return f;
}

/// Intention-encoded opponent policy: a finite intent distribution (a single
/// positive-probability atom models a known intent), a feedforward input
/// profile scaled per intent, and an optional intent-dependent feedback gain.
struct IntentPolicy {
  DistributionSpec intent;
  std::vector<Eigen::Vector2d> tau;
  std::function<Eigen::MatrixXd(double)> feedback;  // K(iota); empty means zero

  bool known() const {
    int atoms = 0;
    for (double p : intent.probs) {
      if (p > 0.0) ++atoms;
    }
    return atoms == 1;
  }

  double known_value() const {
    for (size_t i = 0; i < intent.probs.size(); ++i) {
      if (intent.probs[i] > 0.0 && intent.probs[i] >= 1.0 - 1e-12) return intent.values[i];
    }
    throw std::logic_error("intent is not known");
  }
};

using MatrixFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;
using IntentGainFn = std::function<Eigen::MatrixXd(double)>;

struct ClosedLoopEvaluators {
  MatrixFn Fbar;  // F(eta) + G(eta) K(iota) H(eta)
  MatrixFn Gbar;  // G(eta) L(iota)
};

/// Closes the opponent loop around an intent-dependent policy. The returned
/// evaluators are plain functions of eta; projecting them entrywise onto a
/// joint basis yields the coefficient matrices for the general Galerkin
/// assembly. iota_index selects the intent component inside eta.
inline ClosedLoopEvaluators closed_loop_ov(MatrixFn F, MatrixFn G, MatrixFn H, IntentGainFn K,
                                           IntentGainFn L, int iota_index) {
  ClosedLoopEvaluators ev;
  ev.Fbar = [=](const Eigen::VectorXd& eta) -> Eigen::MatrixXd {
    if (iota_index < 0 || iota_index >= eta.size()) {
      throw std::invalid_argument("intent index outside the uncertainty vector");
    }
    Eigen::MatrixXd f = F(eta);
    Eigen::MatrixXd g = G(eta);
    Eigen::MatrixXd h = H(eta);
    Eigen::MatrixXd k = K(eta[iota_index]);
    if (g.cols() != k.rows() || k.cols() != h.rows() || h.cols() != f.cols() ||
        g.rows() != f.rows()) {
      throw std::invalid_argument("closed-loop dimension mismatch");
    }
    return f + g * k * h;
  };
  ev.Gbar = [=](const Eigen::VectorXd& eta) -> Eigen::MatrixXd {
    if (iota_index < 0 || iota_index >= eta.size()) {
      throw std::invalid_argument("intent index outside the uncertainty vector");
    }
    Eigen::MatrixXd g = G(eta);
    Eigen::MatrixXd l = L(eta[iota_index]);
    if (g.cols() != l.rows()) throw std::invalid_argument("closed-loop dimension mismatch");
    return g * l;
  };
  return ev;
}

}  // namespace ramp
