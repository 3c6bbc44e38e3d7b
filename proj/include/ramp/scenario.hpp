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
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ramp/belief.hpp"
#include "ramp/distributions.hpp"
#include "ramp/encode.hpp"
#include "ramp/linearize.hpp"
#include "ramp/mpc.hpp"
#include "ramp/stl.hpp"
#include "ramp/stl_text.hpp"

namespace ramp {

/// Ego vehicle block of a scenario: initial state, geometry, input box, and
/// the diagonal input cost.
struct EvConfig {
  Eigen::Vector4d x0{0.0, 0.0, 0.0, 0.0};
  double wheelbase{4.0};
  double steer_max{0.3};
  double accel_max{3.0};
  Eigen::Vector2d r_diag{1.0, 1.0};

  void validate() const {
    if (!(wheelbase > 0.0)) throw std::invalid_argument("ev.wheelbase must be positive");
    if (!(steer_max > 0.0)) throw std::invalid_argument("ev.steer_max must be positive");
    if (!(accel_max > 0.0)) throw std::invalid_argument("ev.accel_max must be positive");
    if (!(r_diag[0] >= 0.0) || !(r_diag[1] >= 0.0)) {
      throw std::invalid_argument("ev.r_diag must be nonnegative");
    }
  }
};

/// One stochastic opponent: initial state, the three uncertainty marginals,
/// the feedforward profile tau_0..tau_N, and the safety box half-widths
/// (longitudinal, lateral). A pedestrian group is an opponent with small
/// length and walking speed.
struct OvConfig {
  std::string name{"ov"};
  Eigen::Vector4d z0{0.0, 0.0, 0.0, 0.0};
  DistributionSpec length{uniform_dist(3.99, 4.01)};
  DistributionSpec offset{gaussian_dist(0.0, 0.01)};
  DistributionSpec intent{discrete_dist({0.0}, {1.0})};
  std::vector<Eigen::Vector2d> tau;
  Eigen::Vector2d d_safe{4.0, 2.0};

  void validate(int n_steps) const {
    if (name.empty()) throw std::invalid_argument("opponent name must not be empty");
    length.validate();
    offset.validate();
    intent.validate();
    if (static_cast<int>(tau.size()) < n_steps + 1) {
      throw std::invalid_argument("feedforward profile shorter than the horizon");
    }
    if (!(d_safe[0] > 0.0) || !(d_safe[1] > 0.0)) {
      throw std::invalid_argument("safety distances must be positive");
    }
  }
};

enum class SpecPreset { Overtaking, Intersection, IntersectionNoAwareness, CustomText };

inline std::string to_string(SpecPreset p) {
  switch (p) {
    case SpecPreset::Overtaking: return "overtaking";
    case SpecPreset::Intersection: return "intersection";
    case SpecPreset::IntersectionNoAwareness: return "intersection-no-awareness";
    case SpecPreset::CustomText: return "custom-text";
  }
  throw std::logic_error("unreachable");
}

inline SpecPreset spec_preset_from(const std::string& s) {
  if (s == "overtaking") return SpecPreset::Overtaking;
  if (s == "intersection") return SpecPreset::Intersection;
  if (s == "intersection-no-awareness") return SpecPreset::IntersectionNoAwareness;
  if (s == "custom-text") return SpecPreset::CustomText;
  throw std::invalid_argument("unknown spec preset: " + s);
}

/// Road geometry constants. The highway presets use the five boundaries
/// (bottom edge, slow lane center, middle boundary, fast lane center, top
/// edge); the crossing presets use the lane width.
struct LaneConfig {
  double bot{0.0};
  double slow{2.0};
  double mid{4.0};
  double fast{6.0};
  double top{8.0};
  double width{8.0};
};

/// Task block: which formula family to build, the risk budget, the quantile
/// mode of risk atoms, the speed limit the opponent intent is judged
/// against, road geometry, and the formula source text for the custom preset.
struct SpecConfig {
  SpecPreset preset{SpecPreset::Overtaking};
  double eps{0.05};
  KappaMode mode{KappaMode::Gaussian};
  double v_lim{12.0};
  LaneConfig lanes{};
  std::string text;
};

struct McConfig {
  int samples{100};
  std::uint64_t seed{1};
};

/// Full description of one runnable scenario. Everything downstream (the
/// controller configuration, the formula, the sampled realizations, the
/// encoding dump) derives from this one record.
struct ScenarioConfig {
  std::string name{"scenario"};
  double dt{1.0};
  int n_steps{15};
  EvConfig ev{};
  std::vector<OvConfig> ovs;
  SpecConfig spec{};
  int pce_degree{2};
  SolveLimits limits{};
  McConfig mc{};

  void validate() const {
    if (name.empty()) throw std::invalid_argument("name must not be empty");
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
    if (n_steps < 1) throw std::invalid_argument("n_steps must be at least 1");
    ev.validate();
    if (ovs.empty()) throw std::invalid_argument("at least one opponent required");
    for (const OvConfig& ov : ovs) ov.validate(n_steps);
    if (!(spec.eps > 0.0 && spec.eps <= 1.0)) {
      throw std::invalid_argument("spec.eps must lie in (0, 1]");
    }
    if (spec.preset != SpecPreset::CustomText && n_steps < 4) {
      throw std::invalid_argument("preset formulas need n_steps >= 4");
    }
    if (spec.preset == SpecPreset::CustomText && spec.text.empty()) {
      throw std::invalid_argument("spec.text must not be empty for the custom preset");
    }
    if (pce_degree < 0) throw std::invalid_argument("pce_degree must be nonnegative");
    if (mc.samples < 1) throw std::invalid_argument("mc.samples must be at least 1");
  }
};

/// Maps the scenario onto the controller knobs.
inline MpcConfig mpc_config(const ScenarioConfig& sc) {
  MpcConfig cfg;
  cfg.n_steps = sc.n_steps;
  cfg.dt = sc.dt;
  cfg.wheelbase = sc.ev.wheelbase;
  cfg.r_diag = sc.ev.r_diag;
  cfg.steer_max = sc.ev.steer_max;
  cfg.accel_max = sc.ev.accel_max;
  cfg.mode = sc.spec.mode;
  cfg.pce_degree = sc.pce_degree;
  cfg.limits = sc.limits;
  return cfg;
}

/// One belief per opponent, in scenario order.
inline std::vector<OvBelief> scenario_beliefs(const ScenarioConfig& sc) {
  std::vector<OvBelief> out;
  out.reserve(sc.ovs.size());
  for (const OvConfig& ov : sc.ovs) {
    out.push_back(make_ov_belief(ov.z0, ov.length, ov.offset, ov.intent, ov.tau, sc.pce_degree));
  }
  return out;
}

/// Draws one realization of every opponent's uncertainty vector.
inline std::vector<OvFactors> sample_realization(const ScenarioConfig& sc, Rng& rng) {
  std::vector<OvFactors> out;
  out.reserve(sc.ovs.size());
  for (const OvConfig& ov : sc.ovs) {
    const Eigen::VectorXd eta = sample_eta({ov.length, ov.offset, ov.intent}, rng);
    out.push_back(ov_factors(eta.head<3>()));
  }
  return out;
}

namespace detail {

/// Atom y_i <= bound.
inline Formula out_le(int i, double bound) {
  LinearPredicate p;
  p.coeffs = Eigen::VectorXd::Zero(4);
  p.coeffs[i] = 1.0;
  p.offset = bound;
  return atom(p);
}

/// Atom y_i >= bound.
inline Formula out_ge(int i, double bound) {
  LinearPredicate p;
  p.coeffs = Eigen::VectorXd::Zero(4);
  p.coeffs[i] = -1.0;
  p.offset = -bound;
  return atom(p);
}

/// Band |y_i - center| <= half.
inline Formula out_band(int i, double center, double half) {
  return conj({out_le(i, center + half), out_ge(i, center - half)});
}

/// Risk atom P(sgn (w_axis - y_axis) >= dist) >= 1 - eps for opponent block
/// `block` of `wdim`-dimensional stacked outputs: the opponent sits at least
/// dist away from the ego on the given side of the given axis.
inline Formula apart(int wdim, int block, int axis, double sgn, double dist, double eps,
                     KappaMode mode) {
  BeliefPredicate p;
  p.alpha = Eigen::VectorXd::Zero(4);
  p.alpha[axis] = sgn;
  p.gamma = Eigen::VectorXd::Zero(wdim);
  p.gamma[4 * block + axis] = -sgn;
  p.beta = -dist;
  p.eps = eps;
  p.mode = mode;
  return belief_atom(p);
}

/// Separation predicate for one opponent block: with probability 1 - eps the
/// opponent lies outside the safety box, i.e. at least one planar direction
/// clears its distance. Allocating the whole budget to each disjunct is
/// conservative.
inline Formula outside_box(int wdim, int block, const Eigen::Vector2d& d, double eps,
                           KappaMode mode) {
  return disj({apart(wdim, block, 0, 1.0, d[0], eps, mode),
               apart(wdim, block, 0, -1.0, d[0], eps, mode),
               apart(wdim, block, 1, 1.0, d[1], eps, mode),
               apart(wdim, block, 1, -1.0, d[1], eps, mode)});
}

/// Moment atom E[w_idx] <= bound (risk budget 1: mean only).
inline Formula mean_le(int wdim, int idx, double bound) {
  BeliefPredicate p;
  p.alpha = Eigen::VectorXd::Zero(4);
  p.gamma = Eigen::VectorXd::Zero(wdim);
  p.gamma[idx] = 1.0;
  p.beta = bound;
  p.eps = 1.0;
  p.mode = KappaMode::MeanOnly;
  return belief_atom(p);
}

inline Formula overtaking_spec(const ScenarioConfig& sc) {
  const int n = sc.n_steps;
  const int wdim = 4 * static_cast<int>(sc.ovs.size());
  const LaneConfig& ln = sc.spec.lanes;
  const Eigen::Vector2d d = sc.ovs[0].d_safe;
  const double eps = sc.spec.eps;
  const KappaMode mode = sc.spec.mode;

  Formula safety = conj({out_ge(1, ln.bot), out_le(1, ln.top),
                         outside_box(wdim, 0, d, eps, mode)});
  // Cooperative opponent: its mean stays in the slow lane below the speed
  // limit over the whole horizon.
  Formula cooperative = always(0, n, conj({mean_le(wdim, 1, ln.mid),
                                           mean_le(wdim, 3, sc.spec.v_lim)}));
  // Obligation once cooperative: settle in the slow lane, straightened out,
  // leading the opponent by the longitudinal distance, for four steps.
  Formula settled = conj({out_band(1, ln.slow, 0.1), out_band(2, 0.0, 0.1),
                          apart(wdim, 0, 0, -1.0, d[0], eps, mode)});
  return conj({always(0, n, safety),
               implies(cooperative, eventually(0, n - 3, always(0, 3, settled)))});
}

inline Formula intersection_spec(const ScenarioConfig& sc, bool aware) {
  const int n = sc.n_steps;
  const int wdim = 4 * static_cast<int>(sc.ovs.size());
  const double l = sc.spec.lanes.width;
  const double eps = sc.spec.eps;
  const KappaMode mode = sc.spec.mode;

  // Keep the approach lane until past the entry line. The implication holds
  // at every step so the turn cannot cut the corner.
  Formula corner = disj({out_ge(0, -1.2 * l), out_band(1, -l / 2.0, 0.1)});
  std::vector<Formula> hold{corner};
  if (aware) {
    for (size_t i = 0; i < sc.ovs.size(); ++i) {
      hold.push_back(outside_box(wdim, static_cast<int>(i), sc.ovs[i].d_safe, eps, mode));
    }
  }
  Formula block = hold.size() > 1 ? conj(std::move(hold)) : std::move(hold[0]);
  // Target: centered in the northbound lane, past the far edge, held for
  // four steps.
  Formula arrived = conj({out_band(0, l / 2.0, 0.1), out_ge(1, 1.5 * l)});
  return conj({always(0, n, std::move(block)),
               eventually(0, n - 3, always(0, 3, arrived))});
}

}  // namespace detail

/// Builds the scenario's formula over absolute steps 0..n_steps. Preset
/// windows scale with the horizon, so a horizon override rescales the task
/// timing with it.
inline Formula scenario_spec(const ScenarioConfig& sc) {
  switch (sc.spec.preset) {
    case SpecPreset::Overtaking: return detail::overtaking_spec(sc);
    case SpecPreset::Intersection: return detail::intersection_spec(sc, true);
    case SpecPreset::IntersectionNoAwareness: return detail::intersection_spec(sc, false);
    case SpecPreset::CustomText: return parse_formula(sc.spec.text);
  }
  throw std::logic_error("unreachable");
}

/// Zero feedforward everywhere.
inline std::vector<Eigen::Vector2d> zero_profile(int n_steps) {
  return std::vector<Eigen::Vector2d>(static_cast<size_t>(n_steps) + 1,
                                      Eigen::Vector2d::Zero());
}

/// Acceleration feedforward of the given magnitude over the first
/// active_steps steps, zero after. Truncation keeps the linear opponent
/// model away from negative speeds inside the horizon.
inline std::vector<Eigen::Vector2d> accel_profile(int n_steps, double accel, int active_steps) {
  std::vector<Eigen::Vector2d> tau = zero_profile(n_steps);
  for (int k = 0; k < active_steps && k <= n_steps; ++k) tau[static_cast<size_t>(k)][1] = accel;
  return tau;
}

/// Steering feedforward executing one lane change over five steps starting
/// at `start`: two steps toward the target lane, one straight, two steps
/// back.
inline std::vector<Eigen::Vector2d> lane_change_profile(int n_steps, double gamma, int start) {
  std::vector<Eigen::Vector2d> tau = zero_profile(n_steps);
  const double pulse[5] = {gamma, gamma, 0.0, -gamma, -gamma};
  for (int j = 0; j < 5; ++j) {
    const int k = start + j;
    if (k >= 0 && k <= n_steps) tau[static_cast<size_t>(k)][0] = pulse[j];
  }
  return tau;
}

/// Steering pulse magnitude that moves the lane-change profile one 4 m lane
/// at 10 m/s with a 4 m vehicle length and 1 s steps. Frozen from the
/// realized rollout of the factored model.
inline constexpr double kLaneChangeGamma = 0.02632;

/// Two-lane highway overtake: ego in the fast lane behind a slower opponent
/// in the slow lane. The opponent intent defaults to the slow-down case;
/// apply_intent selects the others.
inline ScenarioConfig overtaking_preset() {
  ScenarioConfig sc;
  sc.name = "overtaking";
  sc.dt = 1.0;
  sc.n_steps = 15;
  sc.ev.x0 = {0.0, 6.0, 0.0, 13.0};
  sc.ev.wheelbase = 4.0;
  sc.ev.steer_max = 0.3;
  sc.ev.accel_max = 3.0;
  sc.ev.r_diag = {1.0e4, 1.0e-6};

  OvConfig ov;
  ov.name = "ov";
  ov.z0 = {20.0, 2.0, 0.0, 10.0};
  ov.length = uniform_dist(3.99, 4.01);
  ov.offset = truncated_gaussian_dist(0.0, 0.1, -0.1, 0.1);
  ov.intent = discrete_dist({-1.0}, {1.0});
  ov.tau = accel_profile(sc.n_steps, 1.0, 8);
  ov.d_safe = {10.0, 2.0};
  sc.ovs.push_back(std::move(ov));

  sc.spec.preset = SpecPreset::Overtaking;
  sc.spec.eps = 0.05;
  // The truncated offset is bounded, so the robust quantile dominates every
  // realizable shift and box entries are impossible, not merely unlikely.
  sc.spec.mode = KappaMode::DistributionallyRobust;
  sc.spec.v_lim = 12.0;
  sc.spec.lanes = {0.0, 2.0, 4.0, 6.0, 8.0, 4.0};
  sc.pce_degree = 2;
  sc.limits.time_seconds = 10.0;
  sc.mc.samples = 100;
  sc.mc.seed = 1;
  return sc;
}

/// Rewrites the overtaking opponent to one of the known-intent cases.
inline void apply_intent(ScenarioConfig& sc, const std::string& intent) {
  if (sc.spec.preset != SpecPreset::Overtaking) {
    throw std::invalid_argument("intent selection needs a known-intent opponent preset");
  }
  OvConfig& ov = sc.ovs[0];
  if (intent == "slow_down") {
    ov.intent = discrete_dist({-1.0}, {1.0});
    ov.tau = accel_profile(sc.n_steps, 1.0, 8);
  } else if (intent == "constant") {
    ov.intent = discrete_dist({0.0}, {1.0});
    ov.tau = accel_profile(sc.n_steps, 1.0, 8);
  } else if (intent == "speed_up") {
    ov.intent = discrete_dist({1.0}, {1.0});
    ov.tau = accel_profile(sc.n_steps, 1.0, 8);
  } else if (intent == "switch_lane") {
    ov.intent = discrete_dist({1.0}, {1.0});
    ov.tau = lane_change_profile(sc.n_steps, kLaneChangeGamma, 0);
  } else {
    throw std::invalid_argument("unknown intent: " + intent);
  }
}

/// Crossing with a turning ego: eastbound approach, left turn into the
/// northbound lane, against a westbound car of unknown intent and a
/// pedestrian group on the near crosswalk. aware=false drops the separation
/// predicates and keeps only the driving task.
inline ScenarioConfig intersection_preset(bool aware) {
  ScenarioConfig sc;
  sc.name = aware ? "intersection" : "intersection-no-awareness";
  sc.dt = 0.5;
  sc.n_steps = 36;
  sc.ev.x0 = {-23.0, -4.0, 0.0, 5.0};
  sc.ev.wheelbase = 4.0;
  sc.ev.steer_max = 0.3;
  sc.ev.accel_max = 3.0;
  sc.ev.r_diag = {1.0, 50.0};

  OvConfig car;
  car.name = "car";
  car.z0 = {40.0, 4.0, std::numbers::pi, 4.0};
  car.length = uniform_dist(3.59, 3.61);
  car.offset = gaussian_dist(0.0, 0.01);
  car.intent = discrete_dist({-1.0, 0.0, 1.0}, {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
  car.tau = accel_profile(sc.n_steps, 0.3, 4);
  car.d_safe = {4.0, 4.0};
  sc.ovs.push_back(std::move(car));

  OvConfig ped;
  ped.name = "ped";
  ped.z0 = {-10.0, -10.0, std::numbers::pi / 2.0, 1.2};
  ped.length = uniform_dist(0.490, 0.501);
  ped.offset = gaussian_dist(0.0, 0.01);
  ped.intent = discrete_dist({-1.0, 1.0}, {0.5, 0.5});
  ped.tau = accel_profile(sc.n_steps, 0.15, 4);
  ped.d_safe = {2.0, 2.0};
  sc.ovs.push_back(std::move(ped));

  sc.spec.preset = aware ? SpecPreset::Intersection : SpecPreset::IntersectionNoAwareness;
  sc.spec.eps = 0.05;
  sc.spec.mode = KappaMode::Gaussian;
  sc.spec.v_lim = 12.0;
  sc.spec.lanes.width = 8.0;
  sc.pce_degree = 2;
  sc.limits.time_seconds = 10.0;
  sc.mc.samples = 100;
  sc.mc.seed = 1;
  return sc;
}

/// Minimal single-opponent scenario for round-trip and golden-file tests:
/// short horizon, trivially satisfiable custom formula, coasting opponent.
inline ScenarioConfig toy_preset() {
  ScenarioConfig sc;
  sc.name = "toy";
  sc.dt = 1.0;
  sc.n_steps = 4;
  sc.ev.x0 = {0.0, 0.0, 0.0, 5.0};
  sc.ev.wheelbase = 4.0;
  sc.ev.steer_max = 0.3;
  sc.ev.accel_max = 3.0;
  sc.ev.r_diag = {100.0, 1.0};

  OvConfig ov;
  ov.name = "ov";
  ov.z0 = {30.0, 0.0, 0.0, 5.0};
  ov.length = uniform_dist(3.99, 4.01);
  ov.offset = truncated_gaussian_dist(0.0, 0.1, -0.1, 0.1);
  ov.intent = discrete_dist({0.0}, {1.0});
  ov.tau = zero_profile(sc.n_steps);
  ov.d_safe = {4.0, 2.0};
  sc.ovs.push_back(std::move(ov));

  sc.spec.preset = SpecPreset::CustomText;
  sc.spec.eps = 0.05;
  sc.spec.mode = KappaMode::DistributionallyRobust;
  sc.spec.text = "G[0,4] bel(1,0,0,0; -1,0,0,0; -10; 0.05; dr)";
  sc.pce_degree = 2;
  sc.limits.time_seconds = 10.0;
  sc.mc.samples = 8;
  sc.mc.seed = 1;
  return sc;
}

/// Rescales the scenario to a different horizon: windows derive from
/// n_steps, feedforward profiles are truncated or zero-padded.
inline void override_horizon(ScenarioConfig& sc, int n_steps) {
  if (n_steps < 1) throw std::invalid_argument("horizon override must be at least 1");
  sc.n_steps = n_steps;
  for (OvConfig& ov : sc.ovs) {
    ov.tau.resize(static_cast<size_t>(n_steps) + 1, Eigen::Vector2d::Zero());
  }
}

/// Stacked opponent moments over steps 0..n_steps as the first planning step
/// predicts them.
inline MomentTrajectory scenario_moments(const ScenarioConfig& sc) {
  const MpcConfig cfg = mpc_config(sc);
  const int n = sc.n_steps;
  std::vector<MomentTrajectory> fresh;
  fresh.reserve(sc.ovs.size());
  for (const OvBelief& ov : scenario_beliefs(sc)) {
    const OvLinearization lin = linearize_ov(BicycleState::from(ov.zhat.head<4>()), cfg.dt);
    const PceModel model = galerkin_assemble_ov(lin.A0, lin.B0, lin.B1, lin.d0, lin.d1, ov.bhat0,
                                                ov.bhat1, ov.ehat0, ov.ehat1, ov.basis.sq_norms);
    std::vector<Eigen::VectorXd> inputs;
    inputs.reserve(static_cast<size_t>(n));
    for (int t = 0; t < n; ++t) inputs.push_back(ov.tau[static_cast<size_t>(t)]);
    const PcePropagation prop = propagate(model, ov.zhat, inputs, n);
    fresh.push_back(moment_trajectory(prop, ov.basis.sq_norms, 4));
  }
  MomentTrajectory stacked;
  stacked.reserve(static_cast<size_t>(n) + 1);
  for (int j = 0; j <= n; ++j) stacked.push_back(detail::stack_moments(fresh, static_cast<size_t>(j)));
  return stacked;
}

/// Encodes the scenario's first planning step (no history beyond the initial
/// output, full horizon). This is the deterministic program the controller
/// solves at step 0.
inline EncodeResult scenario_encoding(const ScenarioConfig& sc) {
  sc.validate();
  const MpcConfig cfg = mpc_config(sc);
  const MomentTrajectory stacked = scenario_moments(sc);
  const Formula lowered = simplify_constants(lower_dstl(scenario_spec(sc), stacked));
  const EvLinearModel ev = linearize_ev(BicycleState::from(sc.ev.x0), Eigen::Vector2d::Zero(),
                                        cfg.dt, cfg.wheelbase);
  const std::vector<Eigen::VectorXd> history{sc.ev.x0};
  return encode(lowered, LtiDynamics(ev), history, cfg.u_lo(), cfg.u_hi(), cfg.r_diag,
                sc.n_steps, 0);
}

}  // namespace ramp
