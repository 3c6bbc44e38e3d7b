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
#include <stdexcept>

namespace ramp {

/// Planar kinematic bicycle state in the front-wheel frame:
/// longitudinal position xi (m), lateral position zeta (m), heading phi (rad),
/// front-wheel speed omega (m/s).
struct BicycleState {
  double xi{0.0};
  double zeta{0.0};
  double phi{0.0};
  double omega{0.0};

  Eigen::Vector4d vec() const { return {xi, zeta, phi, omega}; }
  static BicycleState from(const Eigen::Vector4d& v) { return {v[0], v[1], v[2], v[3]}; }
};

/// One forward-Euler step of the kinematic bicycle with steering angle gamma
/// (rad) and acceleration a (m/s^2); l is the wheelbase (m).
inline BicycleState bicycle_step(const BicycleState& s, double gamma, double a, double dt,
                                 double l) {
  if (!(l > 0.0)) throw std::invalid_argument("invalid geometry: wheelbase must be positive");
  BicycleState n;
  n.xi = s.xi + dt * s.omega * std::cos(s.phi + gamma);
  n.zeta = s.zeta + dt * s.omega * std::sin(s.phi + gamma);
  n.phi = s.phi + dt * s.omega * std::sin(gamma) / l;
  n.omega = s.omega + dt * a;
  return n;
}

/// State of an arbitrary reference point on the wheel axis, parameterized by
/// the ratio c in [0,1] (c=1 is the front wheel itself).
struct PointState {
  double xi{0.0};
  double zeta{0.0};
  double omega{0.0};
  double gamma{0.0};
};

/// Converts front-wheel state and steering to the state of the point at ratio
/// c along the wheelbase: positions shift backward along the heading, the
/// effective steering is atan(c tan gamma) and the speed rescales so the
/// point's motion stays consistent.
inline PointState front_to_point(const BicycleState& s, double gamma, double c, double l) {
  if (!(l > 0.0)) throw std::invalid_argument("invalid geometry: wheelbase must be positive");
  if (c < 0.0 || c > 1.0) throw std::invalid_argument("point ratio must lie in [0, 1]");
  if (std::abs(std::cos(gamma)) < 1e-12) throw std::domain_error("singular steering");
  PointState p;
  p.xi = s.xi - (1.0 - c) * l * std::cos(s.phi);
  p.zeta = s.zeta - (1.0 - c) * l * std::sin(s.phi);
  p.gamma = std::atan(c * std::tan(gamma));
  p.omega = s.omega * std::cos(gamma) / std::cos(p.gamma);
  return p;
}

}  // namespace ramp
