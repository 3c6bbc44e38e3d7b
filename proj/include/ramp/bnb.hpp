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

// Branch and bound over the dual-warm-started LP engine. Most-fractional
// branching with lowest-index tie break; depth-first diving along the LP
// rounding until the first incumbent, best-bound node selection with
// insertion-order tie break afterwards. Incumbents are re-solved with every
// binary pinned so the reported assignment is exactly integral. Infeasible is
// only reported after both node stores empty with no incumbent, which is a
// pruning proof; hitting the time or node budget reports TimeLimit with the
// incumbent if one exists. The clock is consulted solely for limit checks, so
// search order and results are deterministic for a fixed problem.

#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ramp/milp.hpp"
#include "ramp/simplex.hpp"

namespace ramp {

inline Solution solve(const MilpProblem& p, const SolveLimits& limits,
                      const BinaryHint* hint = nullptr) {
  using Clock = std::chrono::steady_clock;
  const auto t0 = Clock::now();
  p.validate();
  Solution out;
  out.status = SolveStatus::Infeasible;

  std::vector<int> bins;
  for (int j = 0; j < p.num_vars(); ++j) {
    if (p.binary[static_cast<size_t>(j)]) bins.push_back(j);
  }

  LpEngine eng(p);
  eng.set_refine_tol(1e-6);
  // Tangent refinement spreads across the search instead of converging at
  // every node; bounds stay valid at any cap.
  eng.set_cut_round_cap(3);

  bool have_inc = false;
  double inc_obj = std::numeric_limits<double>::infinity();
  Eigen::VectorXd inc_x;
  const auto prune_tol = [&] { return 1e-7 * std::max(1.0, std::abs(inc_obj)); };

  using Decisions = std::vector<std::pair<int, int>>;
  std::map<int, int> applied;
  const auto apply_node = [&](const Decisions& dec) {
    std::map<int, int> want;
    for (const auto& [v, val] : dec) want[v] = val;
    for (const auto& [v, val] : applied) {
      if (want.find(v) == want.end()) eng.reset_var_bounds(v);
    }
    for (const auto& [v, val] : want) {
      const auto it = applied.find(v);
      if (it == applied.end() || it->second != val) {
        eng.set_var_bounds(v, static_cast<double>(val), static_cast<double>(val));
      }
    }
    applied = std::move(want);
  };

  const auto most_fractional = [&]() -> int {
    int pick = -1;
    double best = 1e-6;
    for (int v : bins) {
      const double x = eng.var_value(v);
      const double f = std::min(x, 1.0 - x);
      if (f > best) {
        best = f;
        pick = v;
      }
    }
    return pick;
  };

  // Pins every undecided binary at its rounded relaxation value and re-solves,
  // so an accepted incumbent is exactly integral and exactly feasible.
  const auto try_incumbent = [&](const Decisions& dec) {
    std::vector<int> snapped;
    bool ok = true;
    for (int v : bins) {
      bool decided = false;
      for (const auto& [dv, dval] : dec) decided |= (dv == v);
      if (decided) continue;
      const double r = std::round(eng.var_value(v));
      if (!eng.set_var_bounds(v, r, r)) ok = false;
      snapped.push_back(v);
    }
    ++out.nodes;
    if (ok && eng.reoptimize() == LpStatus::Optimal) {
      const double obj = eng.true_objective();
      if (obj < inc_obj) {
        inc_obj = obj;
        inc_x = eng.assignment();
        have_inc = true;
      }
    }
    for (int v : snapped) {
      const auto it = applied.find(v);
      if (it != applied.end()) {
        eng.set_var_bounds(v, static_cast<double>(it->second), static_cast<double>(it->second));
      } else {
        eng.reset_var_bounds(v);
      }
    }
  };

  struct Node {
    double bound;
    long seq;
    Decisions dec;
  };
  const auto node_after = [](const Node& a, const Node& b) {
    return a.bound > b.bound || (a.bound == b.bound && a.seq > b.seq);
  };
  std::priority_queue<Node, std::vector<Node>, decltype(node_after)> pool(node_after);
  long seq = 0;
  pool.push({-std::numeric_limits<double>::infinity(), seq++, {}});

  // Hint dive: pin the suggested pattern once and harvest an incumbent before
  // the search starts. A contradictory hint simply yields nothing.
  if (hint != nullptr && !hint->empty()) {
    Decisions dive;
    for (const auto& [v, val] : *hint) {
      if (v >= 0 && v < p.num_vars() && p.binary[static_cast<size_t>(v)]) {
        dive.emplace_back(v, static_cast<int>(std::lround(val)));
      }
    }
    apply_node(dive);
    ++out.nodes;
    if (eng.reoptimize() == LpStatus::Optimal && most_fractional() < 0) try_incumbent(dive);
    apply_node({});
  }

  // Until an incumbent exists the relaxation bound cannot prune anything, so
  // the search runs depth first along the LP rounding (a diving heuristic);
  // rejected siblings wait on the stack. Once an incumbent lands, the stack
  // drains into the best-bound pool and the search closes the gap from there.
  std::vector<Node> stack;
  stack.push_back({-std::numeric_limits<double>::infinity(), seq++, {}});
  pool.pop();
  const auto drain_stack = [&] {
    for (Node& n : stack) pool.push(std::move(n));
    stack.clear();
  };
  if (have_inc) drain_stack();

  bool aborted = false;
  while (!stack.empty() || !pool.empty()) {
    const double spent = std::chrono::duration<double>(Clock::now() - t0).count();
    if (spent > limits.time_seconds || out.nodes >= limits.node_cap) {
      aborted = true;
      break;
    }
    const bool from_stack = !stack.empty();
    Node node;
    if (from_stack) {
      node = std::move(stack.back());
      stack.pop_back();
    } else {
      node = pool.top();
      pool.pop();
    }
    if (have_inc && node.bound >= inc_obj - prune_tol()) {
      if (from_stack) continue;
      break;
    }
    apply_node(node.dec);
    const LpStatus s = eng.reoptimize();
    ++out.nodes;
    if (s == LpStatus::Infeasible) continue;
    if (s == LpStatus::Unbounded) throw std::runtime_error("unbounded LP");
    if (s == LpStatus::IterLimit) {
      aborted = true;
      break;
    }
    const double bound = eng.bound_objective();
    if (have_inc && bound >= inc_obj - prune_tol()) continue;
    const int v = most_fractional();
    if (v < 0) {
      const bool before = have_inc;
      try_incumbent(node.dec);
      if (!before && have_inc) drain_stack();
      continue;
    }
    const int toward = (eng.var_value(v) >= 0.5) ? 1 : 0;
    Decisions away = node.dec;
    away.emplace_back(v, 1 - toward);
    Decisions follow = node.dec;
    follow.emplace_back(v, toward);
    if (have_inc) {
      pool.push({bound, seq++, std::move(away)});
      pool.push({bound, seq++, std::move(follow)});
    } else {
      stack.push_back({bound, seq++, std::move(away)});
      stack.push_back({bound, seq++, std::move(follow)});
    }
  }

  if (aborted) {
    out.status = SolveStatus::TimeLimit;
  } else {
    out.status = have_inc ? SolveStatus::Optimal : SolveStatus::Infeasible;
  }
  if (have_inc) {
    out.assignment = inc_x;
    out.objective = inc_obj;
  }
  out.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return out;
}

/// solve() behind the pluggable backend seam.
class BranchAndBoundBackend final : public MilpBackend {
 public:
  Solution solve(const MilpProblem& p, const SolveLimits& limits,
                 const BinaryHint* hint = nullptr) override {
    return ramp::solve(p, limits, hint);
  }
};

}  // namespace ramp
