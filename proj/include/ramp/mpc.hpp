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

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ramp/belief.hpp"
#include "ramp/bicycle.hpp"
#include "ramp/bnb.hpp"
#include "ramp/encode.hpp"
#include "ramp/galerkin.hpp"
#include "ramp/linearize.hpp"
#include "ramp/milp.hpp"
#include "ramp/pce.hpp"
#include "ramp/stl.hpp"

namespace ramp {

/// Knobs of the shrinking-horizon controller. The input box is symmetric:
/// steering in [-steer_max, steer_max], acceleration in [-accel_max,
/// accel_max]. r_diag is the diagonal of the input cost R.
struct MpcConfig {
  int n_steps{15};
  double dt{1.0};
  double wheelbase{2.5};
  Eigen::Vector2d r_diag{1.0, 1.0};
  double steer_max{0.3};
  double accel_max{3.0};
  KappaMode mode{KappaMode::Gaussian};
  int pce_degree{2};
  SolveLimits limits{};

  void validate() const {
    if (n_steps < 1) throw std::invalid_argument("horizon must have at least one step");
    if (!(dt > 0.0)) throw std::invalid_argument("step length must be positive");
    if (!(wheelbase > 0.0)) throw std::invalid_argument("invalid geometry: wheelbase must be positive");
    if (!(steer_max > 0.0) || !(accel_max > 0.0)) {
      throw std::invalid_argument("input bounds must be positive");
    }
    if (!(r_diag[0] >= 0.0) || !(r_diag[1] >= 0.0)) {
      throw std::invalid_argument("input cost must be nonnegative");
    }
    if (pce_degree < 0) throw std::invalid_argument("polynomial degree must be nonnegative");
  }

  Eigen::Vector2d u_lo() const { return {-steer_max, -accel_max}; }
  Eigen::Vector2d u_hi() const { return {steer_max, accel_max}; }
};

/// Controller-side model of one opponent: the joint basis over its
/// uncertainty vector, the basis coefficients of the factored-model scalars,
/// the feedforward profile (indexed by absolute step), and the current
/// lifted coefficient state.
struct OvBelief {
  JointBasis basis;
  Eigen::VectorXd bhat0, bhat1, ehat0, ehat1;
  std::vector<Eigen::Vector2d> tau;
  Eigen::VectorXd zhat;
};

/// Builds the belief for an opponent with known initial state z0 and
/// uncertainty eta = (length, offset, intent). A point-mass intent reduces
/// its basis direction to the constant, so a known intent needs no special
/// casing.
inline OvBelief make_ov_belief(const Eigen::Vector4d& z0, const DistributionSpec& length,
                               const DistributionSpec& offset, const DistributionSpec& intent,
                               std::vector<Eigen::Vector2d> tau, int degree) {
  OvBelief ov;
  ov.basis = joint_basis({length, offset, intent}, degree);
  ov.bhat0 = project([](const Eigen::VectorXd& eta) { return eta[2]; }, ov.basis);
  ov.bhat1 = project([](const Eigen::VectorXd& eta) { return eta[2] / eta[0]; }, ov.basis);
  ov.ehat0 = project([](const Eigen::VectorXd&) { return 1.0; }, ov.basis);
  ov.ehat1 = project([](const Eigen::VectorXd& eta) { return eta[1]; }, ov.basis);
  ov.tau = std::move(tau);
  ov.zhat = lift_deterministic(z0, ov.basis.size());
  return ov;
}

/// Mutable controller state threaded through the closed loop. history holds
/// the recorded outputs y_0..y_k; past holds the stacked opponent moments of
/// steps 0..k-1 exactly as planned when those steps were current; plan holds
/// the inputs the previous solve intended for steps k..N-1 (empty at k = 0).
struct MpcState {
  BicycleState ev;
  Eigen::Vector2d u_prev{0.0, 0.0};
  std::vector<Eigen::VectorXd> history;
  std::vector<OvBelief> ovs;
  MomentTrajectory past;
  std::vector<Eigen::Vector2d> plan;
  int k{0};
};

/// Everything one planning step produces. plan covers steps k..N-1 and its
/// first entry is the applied input. moments is the stacked opponent moment
/// trajectory the constraints were lowered against (steps 0..N). next_zhat
/// holds the per-opponent one-step coefficient update under the same model
/// the plan used.
struct StepResult {
  Eigen::Vector2d u{0.0, 0.0};
  std::vector<Eigen::Vector2d> plan;
  SolveStatus status{SolveStatus::Infeasible};
  bool degraded{false};
  double objective{std::numeric_limits<double>::infinity()};
  int binaries{0};
  long nodes{0};
  double wall_seconds{0.0};
  MomentTrajectory moments;
  std::vector<Eigen::VectorXd> next_zhat;
};

namespace detail {

inline MomentStep stack_moments(const std::vector<MomentTrajectory>& per_ov, size_t idx) {
  const int wdim = 4 * static_cast<int>(per_ov.size());
  MomentStep ms;
  ms.mu = Eigen::VectorXd::Zero(wdim);
  ms.Sigma = Eigen::MatrixXd::Zero(wdim, wdim);
  for (size_t i = 0; i < per_ov.size(); ++i) {
    const MomentStep& m = per_ov[i][idx];
    ms.mu.segment(4 * static_cast<int>(i), 4) = m.mu;
    // Opponents draw from independent uncertainty vectors, so cross blocks
    // stay zero.
    ms.Sigma.block(4 * static_cast<int>(i), 4 * static_cast<int>(i), 4, 4) = m.Sigma;
  }
  return ms;
}

}  // namespace detail

/// One shrinking-horizon planning step at st.k: relinearize the ego model at
/// the current state, rebuild each opponent's coefficient dynamics around its
/// predicted mean, propagate moments over the remaining steps, lower the
/// belief spec against them, encode, and solve. Infeasible steps fall back to
/// the shifted previous plan (zero input at step 0) and come back flagged
/// degraded; hitting the solver limits with no incumbent throws.
inline StepResult mpc_step(const MpcState& st, const MpcConfig& cfg, const Formula& spec,
                           MilpBackend* backend = nullptr) {
  cfg.validate();
  const int n = cfg.n_steps;
  const int k = st.k;
  if (k < 0 || k >= n) throw std::invalid_argument("step index outside the horizon");
  if (static_cast<int>(st.history.size()) != k + 1) {
    throw std::invalid_argument("history must cover steps 0..k");
  }
  if (static_cast<int>(st.past.size()) != k) {
    throw std::invalid_argument("moment record must cover steps 0..k-1");
  }
  if (!st.plan.empty() && static_cast<int>(st.plan.size()) != n - k) {
    throw std::invalid_argument("carried plan must cover steps k..N-1");
  }

  const EvLinearModel ev = linearize_ev(st.ev, st.u_prev, cfg.dt, cfg.wheelbase);

  // Fresh opponent moments for steps k..N, one trajectory per opponent, each
  // propagated in its own basis through a model relinearized at the current
  // predicted mean.
  std::vector<MomentTrajectory> fresh;
  std::vector<Eigen::VectorXd> next_zhat;
  fresh.reserve(st.ovs.size());
  next_zhat.reserve(st.ovs.size());
  for (const OvBelief& ov : st.ovs) {
    const int basis_size = ov.basis.size();
    if (ov.zhat.size() != 4 * basis_size) {
      throw std::invalid_argument("opponent coefficient state has wrong dimension");
    }
    if (static_cast<int>(ov.tau.size()) < n) {
      throw std::invalid_argument("feedforward profile shorter than the horizon");
    }
    const OvLinearization lin = linearize_ov(BicycleState::from(ov.zhat.head<4>()), cfg.dt);
    const PceModel model = galerkin_assemble_ov(lin.A0, lin.B0, lin.B1, lin.d0, lin.d1, ov.bhat0,
                                                ov.bhat1, ov.ehat0, ov.ehat1, ov.basis.sq_norms);
    std::vector<Eigen::VectorXd> inputs;
    inputs.reserve(static_cast<size_t>(n - k));
    for (int t = k; t < n; ++t) inputs.push_back(ov.tau[static_cast<size_t>(t)]);
    const PcePropagation prop = propagate(model, ov.zhat, inputs, n - k);
    fresh.push_back(moment_trajectory(prop, ov.basis.sq_norms, 4));
    next_zhat.push_back(prop.zhat[1]);
  }

  // Past steps keep the moments they were planned with; replanning only
  // rewrites the future.
  MomentTrajectory stacked;
  stacked.reserve(static_cast<size_t>(n) + 1);
  const int wdim = 4 * static_cast<int>(st.ovs.size());
  for (int j = 0; j < k; ++j) {
    if (st.past[static_cast<size_t>(j)].mu.size() != wdim) {
      throw std::invalid_argument("moment record dimension mismatch");
    }
    stacked.push_back(st.past[static_cast<size_t>(j)]);
  }
  for (int j = k; j <= n; ++j) stacked.push_back(detail::stack_moments(fresh, static_cast<size_t>(j - k)));

  const Formula lowered = simplify_constants(lower_dstl(spec, stacked));
  const EncodeResult enc =
      encode(lowered, LtiDynamics(ev), st.history, cfg.u_lo(), cfg.u_hi(), cfg.r_diag, n, k);

  // Warm start: roll the shifted previous plan through the fresh
  // linearization and read off the literal pattern it satisfies. The same
  // rollout feeds the plan-keeping rule below.
  BinaryHint hint;
  bool have_hint = false;
  bool plan_feasible = false;
  double plan_objective = std::numeric_limits<double>::infinity();
  if (!st.plan.empty()) {
    Eigen::MatrixXd states(n + 1, 4);
    for (int t = 0; t < k; ++t) states.row(t) = st.history[static_cast<size_t>(t)].transpose();
    Eigen::Vector4d x = ev.x0;
    states.row(k) = x.transpose();
    for (int t = k; t < n; ++t) {
      x = ev.A * x + ev.B * st.plan[static_cast<size_t>(t - k)] + ev.d;
      states.row(t + 1) = x.transpose();
    }
    hint = binary_hint(enc, states);
    have_hint = true;
    bool ok = true;
    double cost = 0.0;
    for (const Eigen::Vector2d& u : st.plan) {
      ok = ok && (u.array() >= cfg.u_lo().array() - 1e-9).all() &&
           (u.array() <= cfg.u_hi().array() + 1e-9).all();
      cost += cfg.r_diag.dot(u.cwiseProduct(u));
    }
    if (ok && eval_bool(lowered, Trajectory{states, cfg.dt}, 0)) {
      plan_feasible = true;
      plan_objective = cost;
    }
  }

  BranchAndBoundBackend builtin;
  MilpBackend* eng = backend ? backend : &builtin;
  const Solution sol = eng->solve(enc.problem, cfg.limits, have_hint ? &hint : nullptr);

  StepResult out;
  out.status = sol.status;
  out.binaries = enc.num_binaries;
  out.nodes = sol.nodes;
  out.wall_seconds = sol.wall_seconds;
  out.moments = std::move(stacked);
  out.next_zhat = std::move(next_zhat);

  const bool have_incumbent = sol.assignment.size() > 0;
  if (have_incumbent) {
    // Plan keeping: when the shifted previous plan is still feasible and the
    // fresh solve only ties it within tolerance, keep the old inputs. This
    // pins the replanned tail to the previous plan (the warm-start fixed
    // point) instead of letting solver noise move it around a flat optimum.
    if (plan_feasible &&
        plan_objective <= sol.objective + 1e-6 * std::max(1.0, std::abs(sol.objective))) {
      out.objective = plan_objective;
      out.plan = st.plan;
      out.u = out.plan.front();
      return out;
    }
    out.objective = sol.objective;
    out.plan.reserve(static_cast<size_t>(n - k));
    for (int t = k; t < n; ++t) {
      out.plan.emplace_back(sol.assignment[enc.input(t, 0)], sol.assignment[enc.input(t, 1)]);
    }
    out.u = out.plan.front();
    return out;
  }
  if (sol.status == SolveStatus::Infeasible) {
    // Relinearization can transiently break feasibility; keeping to the
    // previously planned inputs keeps the loop alive while flagging the run.
    out.degraded = true;
    if (st.plan.empty()) {
      out.plan.assign(static_cast<size_t>(n - k), Eigen::Vector2d::Zero());
    } else {
      out.plan = st.plan;
    }
    out.u = out.plan.front();
    return out;
  }
  throw std::runtime_error("step failed: no feasible plan within solver limits at step " +
                           std::to_string(k));
}

/// Applies one planning result: steps the ego vehicle with the nonlinear
/// model, records the new output, advances each opponent belief one step
/// under the model its plan used, freezes the current step's moments, and
/// shifts the plan. disturbance is added to the ego state after the step; it
/// is a validation knob, not part of the modeled dynamics.
inline void advance(MpcState& st, const MpcConfig& cfg, const StepResult& step,
                    const Eigen::Vector4d& disturbance = Eigen::Vector4d::Zero()) {
  if (step.next_zhat.size() != st.ovs.size()) {
    throw std::invalid_argument("step result does not match the opponent count");
  }
  BicycleState next = bicycle_step(st.ev, step.u[0], step.u[1], cfg.dt, cfg.wheelbase);
  st.ev = BicycleState::from(next.vec() + disturbance);
  st.u_prev = step.u;
  for (size_t i = 0; i < st.ovs.size(); ++i) st.ovs[i].zhat = step.next_zhat[i];
  st.past.push_back(step.moments[static_cast<size_t>(st.k)]);
  st.history.push_back(st.ev.vec());
  st.plan.assign(step.plan.begin() + 1, step.plan.end());
  ++st.k;
}

/// One realized step of the stochastic opponent model: relinearize at the
/// realized state and apply the factored update with the sampled scalars.
inline Eigen::Vector4d ov_realized_step(const Eigen::Vector4d& z, const OvFactors& f,
                                        const Eigen::Vector2d& tau, double dt) {
  const OvLinearization lin = linearize_ov(BicycleState::from(z), dt);
  return lin.A0 * z + (f.b0 * lin.B0 + f.b1 * lin.B1) * tau + f.e0 * lin.d0 + f.e1 * lin.d1;
}

struct StepRecord {
  int k{0};
  SolveStatus status{SolveStatus::Infeasible};
  bool degraded{false};
  int binaries{0};
  long nodes{0};
  double wall_seconds{0.0};
  double objective{0.0};
};

/// One full closed-loop run. ev holds the N+1 realized ego states; ov one
/// realized state sequence per opponent; moments the stacked opponent moments
/// actually enforced (past steps frozen as planned, the tail from the final
/// replan).
struct ClosedLoopResult {
  Trajectory ev;
  std::vector<Eigen::Vector2d> inputs;
  std::vector<std::vector<Eigen::Vector4d>> ov;
  std::vector<StepRecord> records;
  MomentTrajectory moments;
  bool degraded{false};
};

/// Runs the controller over the whole horizon: the ego vehicle follows the
/// nonlinear model driven by the planned inputs, each opponent follows the
/// stochastic linear model under its realized factors. Solver failure at some
/// step propagates out of mpc_step.
inline ClosedLoopResult closed_loop(const BicycleState& ev0, std::vector<OvBelief> beliefs,
                                    const std::vector<OvFactors>& realized, const MpcConfig& cfg,
                                    const Formula& spec, MilpBackend* backend = nullptr,
                                    const std::vector<Eigen::Vector4d>* disturbance = nullptr) {
  cfg.validate();
  if (realized.size() != beliefs.size()) {
    throw std::invalid_argument("one realization per opponent belief required");
  }
  const int n = cfg.n_steps;
  if (disturbance && static_cast<int>(disturbance->size()) < n) {
    throw std::invalid_argument("disturbance sequence shorter than the horizon");
  }

  MpcState st;
  st.ev = ev0;
  st.history.push_back(ev0.vec());
  st.ovs = std::move(beliefs);

  ClosedLoopResult out;
  out.ev.dt = cfg.dt;
  out.ev.samples.resize(n + 1, 4);
  out.ev.samples.row(0) = ev0.vec().transpose();
  out.ov.resize(st.ovs.size());
  std::vector<Eigen::Vector4d> ovz(st.ovs.size());
  for (size_t i = 0; i < st.ovs.size(); ++i) {
    ovz[i] = st.ovs[i].zhat.head<4>();
    out.ov[i].push_back(ovz[i]);
  }

  for (int k = 0; k < n; ++k) {
    const StepResult step = mpc_step(st, cfg, spec, backend);
    out.records.push_back({k, step.status, step.degraded, step.binaries, step.nodes,
                           step.wall_seconds, step.objective});
    out.degraded = out.degraded || step.degraded;
    out.inputs.push_back(step.u);
    out.moments = step.moments;
    for (size_t i = 0; i < st.ovs.size(); ++i) {
      ovz[i] = ov_realized_step(ovz[i], realized[i], st.ovs[i].tau[static_cast<size_t>(k)], cfg.dt);
      out.ov[i].push_back(ovz[i]);
    }
    advance(st, cfg, step, disturbance ? (*disturbance)[static_cast<size_t>(k)]
                                       : Eigen::Vector4d::Zero());
    out.ev.samples.row(k + 1) = st.ev.vec().transpose();
  }
  return out;
}

}  // namespace ramp
