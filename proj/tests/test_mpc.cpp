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

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "ramp/belief.hpp"
#include "ramp/mpc.hpp"
#include "ramp/stl.hpp"

namespace ramp {
namespace {

using Catch::Matchers::ContainsSubstring;

MpcConfig toy_cfg(int n) {
  MpcConfig cfg;
  cfg.n_steps = n;
  cfg.dt = 1.0;
  cfg.wheelbase = 2.5;
  cfg.r_diag = {100.0, 1.0};
  cfg.steer_max = 0.3;
  cfg.accel_max = 3.0;
  return cfg;
}

Formula speed_ge(double c) {
  LinearPredicate p;
  p.coeffs = Eigen::Vector4d(0.0, 0.0, 0.0, -1.0);
  p.offset = -c;
  return atom(p);
}

Formula speed_le(double c) {
  LinearPredicate p;
  p.coeffs = Eigen::Vector4d(0.0, 0.0, 0.0, 1.0);
  p.offset = c;
  return atom(p);
}

MpcState fresh_state(const BicycleState& ev) {
  MpcState st;
  st.ev = ev;
  st.history.push_back(ev.vec());
  return st;
}

// Advances the controller state with the linearized model instead of the
// nonlinear simulator, so the predicted and realized states coincide exactly.
void advance_linear(MpcState& st, const MpcConfig& cfg, const StepResult& step) {
  const EvLinearModel m = linearize_ev(st.ev, st.u_prev, cfg.dt, cfg.wheelbase);
  const Eigen::Vector4d x1 = m.A * st.ev.vec() + m.B * step.u + m.d;
  st.ev = BicycleState::from(x1);
  st.u_prev = step.u;
  st.past.push_back(step.moments[static_cast<size_t>(st.k)]);
  st.history.push_back(x1);
  st.plan.assign(step.plan.begin() + 1, step.plan.end());
  ++st.k;
}

}  // namespace

TEST_CASE("mpc_step: trivial spec leaves the vehicle at rest", "[mpc]") {
  const MpcConfig cfg = toy_cfg(4);
  const MpcState st = fresh_state(BicycleState{0.0, 0.0, 0.0, 0.0});

  const StepResult step = mpc_step(st, cfg, verum());
  CHECK(step.status == SolveStatus::Optimal);
  CHECK_FALSE(step.degraded);
  CHECK(step.binaries == 0);
  CHECK(step.objective < 1e-8);
  REQUIRE(step.plan.size() == 4);
  for (const auto& u : step.plan) {
    CHECK(std::abs(u[0]) < 1e-3);
    CHECK(std::abs(u[1]) < 1e-3);
  }
  REQUIRE(step.moments.size() == 5);
  CHECK(step.moments[0].mu.size() == 0);
}

TEST_CASE("mpc_step: two-step reach plans half the effort up front", "[mpc]") {
  const MpcConfig cfg = toy_cfg(3);
  const MpcState st = fresh_state(BicycleState{0.0, 0.0, 0.0, 0.0});

  const StepResult step = mpc_step(st, cfg, eventually(0, 2, speed_ge(1.0)));
  REQUIRE(step.status == SolveStatus::Optimal);
  CHECK(step.objective == Catch::Approx(0.5).margin(1e-6));
  // The piecewise-linear refinement pins the objective far tighter than the
  // minimizer, so the inputs only get a loose tolerance.
  CHECK(step.u[1] == Catch::Approx(0.5).margin(1e-3));
  CHECK(std::abs(step.u[0]) < 1e-3);
  CHECK(step.plan[1][1] == Catch::Approx(0.5).margin(1e-3));
  CHECK(std::abs(step.plan[2][1]) < 1e-3);
}

TEST_CASE("mpc_step: replanning from the predicted state keeps the plan tail", "[mpc]") {
  const MpcConfig cfg = toy_cfg(5);
  MpcState st = fresh_state(BicycleState{0.0, 0.0, 0.0, 0.0});
  const Formula spec = conj({eventually(0, 3, speed_ge(1.0)), always(0, 5, speed_le(2.0))});

  const StepResult first = mpc_step(st, cfg, spec);
  REQUIRE(first.status == SolveStatus::Optimal);
  advance_linear(st, cfg, first);

  StepResult prev = first;
  for (int k = 1; k < 5; ++k) {
    const StepResult next = mpc_step(st, cfg, spec);
    CHECK_FALSE(next.degraded);
    REQUIRE(next.plan.size() == prev.plan.size() - 1);
    for (size_t t = 0; t < next.plan.size(); ++t) {
      CHECK(std::abs(next.plan[t][0] - prev.plan[t + 1][0]) < 1e-6);
      CHECK(std::abs(next.plan[t][1] - prev.plan[t + 1][1]) < 1e-6);
    }
    advance_linear(st, cfg, next);
    prev = next;
  }
}

TEST_CASE("mpc_step: impossible spec falls back and flags the step", "[mpc]") {
  const MpcConfig cfg = toy_cfg(3);

  SECTION("no previous plan applies zero input") {
    const MpcState st = fresh_state(BicycleState{0.0, 0.0, 0.0, 5.0});
    const StepResult step = mpc_step(st, cfg, always(0, 2, speed_le(0.5)));
    CHECK(step.status == SolveStatus::Infeasible);
    CHECK(step.degraded);
    REQUIRE(step.plan.size() == 3);
    CHECK(step.u[0] == 0.0);
    CHECK(step.u[1] == 0.0);
  }

  SECTION("a carried plan is shifted into place") {
    MpcState st = fresh_state(BicycleState{0.0, 0.0, 0.0, 5.0});
    st.history.push_back(Eigen::Vector4d(0.0, 0.0, 0.0, 5.0));
    st.past.push_back(MomentStep{});
    st.k = 1;
    st.plan.assign(2, Eigen::Vector2d(0.0, 0.25));
    const StepResult step = mpc_step(st, cfg, always(0, 2, speed_le(0.5)));
    CHECK(step.degraded);
    CHECK(step.u[1] == 0.25);
    CHECK(step.plan.size() == 2);
  }
}

TEST_CASE("mpc_step: exhausted limits without an incumbent abort the step", "[mpc]") {
  MpcConfig cfg = toy_cfg(3);
  cfg.limits.node_cap = 0;
  const MpcState st = fresh_state(BicycleState{0.0, 0.0, 0.0, 0.0});
  CHECK_THROWS_WITH(mpc_step(st, cfg, eventually(0, 2, speed_ge(1.0))),
                    ContainsSubstring("step failed"));
}

TEST_CASE("mpc_step: state validation", "[mpc]") {
  const MpcConfig cfg = toy_cfg(3);

  SECTION("history must cover exactly steps 0..k") {
    MpcState st = fresh_state(BicycleState{});
    st.history.push_back(Eigen::Vector4d::Zero());
    CHECK_THROWS_WITH(mpc_step(st, cfg, verum()), ContainsSubstring("history"));
  }
  SECTION("frozen moments must cover steps 0..k-1") {
    MpcState st = fresh_state(BicycleState{});
    st.past.push_back(MomentStep{});
    CHECK_THROWS_WITH(mpc_step(st, cfg, verum()), ContainsSubstring("moment record"));
  }
  SECTION("carried plan must span the remaining horizon") {
    MpcState st = fresh_state(BicycleState{});
    st.plan.assign(1, Eigen::Vector2d::Zero());
    CHECK_THROWS_WITH(mpc_step(st, cfg, verum()), ContainsSubstring("carried plan"));
  }
  SECTION("config invariants") {
    MpcConfig bad = cfg;
    bad.n_steps = 0;
    CHECK_THROWS(mpc_step(fresh_state(BicycleState{}), bad, verum()));
    bad = cfg;
    bad.dt = 0.0;
    CHECK_THROWS(mpc_step(fresh_state(BicycleState{}), bad, verum()));
    bad = cfg;
    bad.steer_max = 0.0;
    CHECK_THROWS(mpc_step(fresh_state(BicycleState{}), bad, verum()));
  }
}

TEST_CASE("closed_loop: trivial spec keeps a resting vehicle near rest", "[mpc]") {
  const MpcConfig cfg = toy_cfg(4);
  const ClosedLoopResult run =
      closed_loop(BicycleState{0.0, 0.0, 0.0, 0.0}, {}, {}, cfg, verum());
  CHECK_FALSE(run.degraded);
  REQUIRE(run.records.size() == 4);
  for (const StepRecord& r : run.records) {
    CHECK(r.status == SolveStatus::Optimal);
    CHECK(r.binaries == 0);
  }
  for (const auto& u : run.inputs) {
    CHECK(std::abs(u[0]) < 1e-3);
    CHECK(std::abs(u[1]) < 1e-3);
  }
  CHECK(run.ev.samples.rows() == 5);
  CHECK(std::abs(run.ev.samples(4, 0)) < 0.05);
  CHECK(std::abs(run.ev.samples(4, 3)) < 5e-3);
}

TEST_CASE("closed_loop: binary counts shrink as the horizon recedes", "[mpc]") {
  const MpcConfig cfg = toy_cfg(5);
  const Formula spec = conj({eventually(0, 3, speed_ge(1.0)), always(0, 5, speed_le(2.0))});
  const ClosedLoopResult run = closed_loop(BicycleState{0.0, 0.0, 0.0, 0.0}, {}, {}, cfg, spec);
  CHECK_FALSE(run.degraded);
  REQUIRE(run.records.size() == 5);
  for (size_t i = 1; i < run.records.size(); ++i) {
    CHECK(run.records[i].binaries <= run.records[i - 1].binaries);
  }
  // The reach target is met and held under the speed cap.
  double peak = 0.0;
  for (int t = 0; t <= 5; ++t) peak = std::max(peak, run.ev.samples(t, 3));
  CHECK(peak >= 1.0 - 1e-6);
  CHECK(peak <= 2.0 + 1e-6);
}

TEST_CASE("closed_loop: belief constraint keeps the gap to a leading opponent", "[mpc]") {
  MpcConfig cfg = toy_cfg(6);
  cfg.mode = KappaMode::Gaussian;
  cfg.pce_degree = 2;

  // Opponent coasting ahead in the same lane; the ego vehicle closes at
  // twice the speed and must brake to honor the risk-bounded gap.
  const Eigen::Vector4d ov0(30.0, 0.0, 0.0, 5.0);
  std::vector<Eigen::Vector2d> tau(6, Eigen::Vector2d::Zero());
  OvBelief belief = make_ov_belief(ov0, uniform_dist(3.99, 4.01),
                                   truncated_gaussian_dist(0.0, 0.1, -0.1, 0.1),
                                   discrete_dist({1.0}, {1.0}), tau, cfg.pce_degree);

  BeliefPredicate gap;
  gap.alpha = Eigen::VectorXd::Zero(4);
  gap.alpha[0] = 1.0;
  gap.gamma = Eigen::VectorXd::Zero(4);
  gap.gamma[0] = -1.0;
  gap.beta = -10.0;
  gap.eps = 0.05;
  gap.mode = cfg.mode;
  const Formula spec = always(0, 6, belief_atom(gap));

  const OvFactors realized = ov_factors(Eigen::Vector3d(4.0, 0.05, 1.0));
  const ClosedLoopResult run =
      closed_loop(BicycleState{0.0, 0.0, 0.0, 10.0}, {belief}, {realized}, cfg, spec);

  CHECK_FALSE(run.degraded);
  REQUIRE(run.records.size() == 6);
  for (const StepRecord& r : run.records) CHECK(r.status == SolveStatus::Optimal);
  // Braking happened and the realized gap never dips under the safety
  // distance (the risk margin absorbs the sampled disturbance).
  CHECK(run.ev.samples(6, 3) < 10.0 - 0.5);
  for (int t = 0; t <= 6; ++t) {
    CHECK(run.ov[0][static_cast<size_t>(t)][0] - run.ev.samples(t, 0) >= 10.0 - 1e-6);
  }
  // The lowered constraint holds on the realized word against the moments
  // the controller actually enforced.
  REQUIRE(run.moments.size() == 7);
  const Formula lowered = simplify_constants(lower_dstl(spec, run.moments));
  CHECK(eval_bool(lowered, run.ev, 0));
}

TEST_CASE("closed_loop: opponent belief mean tracks the realized mean path", "[mpc]") {
  MpcConfig cfg = toy_cfg(4);
  const Eigen::Vector4d ov0(20.0, 2.0, 0.0, 8.0);
  std::vector<Eigen::Vector2d> tau;
  for (int t = 0; t < 4; ++t) tau.emplace_back(0.0, -1.0);
  OvBelief belief = make_ov_belief(ov0, uniform_dist(3.99, 4.01),
                                   truncated_gaussian_dist(0.0, 0.1, -0.1, 0.1),
                                   discrete_dist({1.0}, {1.0}), tau, 2);
  // Realization at the exact distribution means: the planned mean and the
  // realized path then agree step by step.
  const OvFactors realized = ov_factors(Eigen::Vector3d(4.0, 0.0, 1.0));
  const ClosedLoopResult run =
      closed_loop(BicycleState{0.0, 0.0, 0.0, 5.0}, {belief}, {realized}, cfg, verum());

  REQUIRE(run.moments.size() == 5);
  for (int t = 0; t <= 4; ++t) {
    const Eigen::Vector4d realized_z = run.ov[0][static_cast<size_t>(t)];
    const Eigen::VectorXd mu = run.moments[static_cast<size_t>(t)].mu;
    REQUIRE(mu.size() == 4);
    for (int i = 0; i < 4; ++i) {
      CHECK(std::abs(mu[i] - realized_z[i]) < 5e-3);
    }
  }
}

}  // namespace ramp
