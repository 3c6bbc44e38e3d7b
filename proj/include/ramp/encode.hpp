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

// Lowers a deterministic temporal-logic constraint over a linear plant into a
// mixed-integer problem: dynamics equalities from the current step forward,
// pinned past outputs, one binary per live predicate-time literal under a
// big-M row, and a monotone network of [0,1] variables for the connectives
// with the root pinned to 1. The encoding is one-sided: in negation normal
// form every connective is monotone, so only upper pressure on the
// satisfaction variables is needed, and forcing the root high forces every
// required literal binary to 1, which activates its half-space row.

#include <Eigen/Dense>

#include <algorithm>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ramp/linearize.hpp"
#include "ramp/milp.hpp"
#include "ramp/stl.hpp"

namespace ramp {

/// Discrete-time affine plant x_{t+1} = a x_t + b u_t + d in arbitrary
/// dimension. Converts implicitly from the fixed-size vehicle linearization.
struct LtiDynamics {
  Eigen::MatrixXd a;
  Eigen::MatrixXd b;
  Eigen::VectorXd d;
  Eigen::VectorXd x0;

  LtiDynamics() = default;
  LtiDynamics(const EvLinearModel& m) : a(m.A), b(m.B), d(m.d), x0(m.x0) {}
  LtiDynamics(Eigen::MatrixXd a_, Eigen::MatrixXd b_, Eigen::VectorXd d_, Eigen::VectorXd x0_)
      : a(std::move(a_)), b(std::move(b_)), d(std::move(d_)), x0(std::move(x0_)) {}

  int nx() const { return static_cast<int>(a.rows()); }
  int nu() const { return static_cast<int>(b.cols()); }
};

/// One literal binary: when the variable is 1 the trajectory satisfies
/// w . x_step <= c (or its strict complement when negated).
struct EncodedBinary {
  int var{-1};
  Eigen::VectorXd w;
  double c{0.0};
  int step{0};
  bool negated{false};
};

struct EncodeResult {
  MilpProblem problem;
  int num_binaries{0};
  int n_steps{0};
  int start{0};
  int nx{0};
  int nu{0};
  std::vector<int> state_var;  // [t * nx + i], t = 0..N
  std::vector<int> input_var;  // [t * nu + i], t = 0..N-1; -1 before start
  std::vector<EncodedBinary> binaries;

  int state(int t, int i) const { return state_var[static_cast<size_t>(t * nx + i)]; }
  int input(int t, int i) const { return input_var[static_cast<size_t>(t * nu + i)]; }
};

namespace detail {

// Satisfaction reference: either a [0,1] variable or a folded constant.
struct ZRef {
  int var{-1};
  bool truth{false};
  bool is_const() const { return var < 0; }
  static ZRef constant(bool v) { return {-1, v}; }
  static ZRef of(int var) { return {var, false}; }
};

struct EncodeCtx {
  EncodeResult* out;
  const std::vector<Eigen::VectorXd>* history;
  int start{0};
  std::vector<Eigen::VectorXd> box_lo, box_hi;  // per step, state space
  std::map<std::pair<const void*, int>, ZRef> memo;
  int z_count{0};
  int b_count{0};
  // Strict-side margin for negated literals; tiny guard on the satisfied side
  // so round-trip evaluation of a tight optimum survives the LP residual when
  // the trajectory is rebuilt from the inputs alone.
  double strict_margin{1e-6};
  double sat_guard{1e-7};
  double big_m_floor{1e4};
};

inline void require_lowered(const Formula& f) {
  if (f.belief() != nullptr) throw std::runtime_error("encode requires lowered formula");
  for (const auto& c : f.children()) require_lowered(c);
}

inline const LinearPredicate& literal_at(const Formula& atom, int t) {
  if (const auto* tvp = atom.time_varying()) return tvp->at(t);
  return *atom.linear();
}

// Interval of w . x over the step-t state box. Zero coefficients are skipped
// so pre-history steps with unbounded boxes stay harmless.
inline std::pair<double, double> literal_range(const EncodeCtx& ctx, const Eigen::VectorXd& w,
                                               int t) {
  double lo = 0.0, hi = 0.0;
  const auto& bl = ctx.box_lo[static_cast<size_t>(t)];
  const auto& bh = ctx.box_hi[static_cast<size_t>(t)];
  for (int i = 0; i < w.size(); ++i) {
    const double wi = w[i];
    if (wi == 0.0) continue;
    if (wi > 0.0) {
      lo += wi * bl[i];
      hi += wi * bh[i];
    } else {
      lo += wi * bh[i];
      hi += wi * bl[i];
    }
  }
  return {lo, hi};
}

inline ZRef encode_literal(EncodeCtx& ctx, const Formula& atom, int t, bool negated) {
  const LinearPredicate& p = literal_at(atom, t);
  const Eigen::VectorXd& w = p.coeffs;
  const double c = p.offset;
  if (static_cast<int>(w.size()) != ctx.out->nx) {
    throw std::invalid_argument("predicate arity error: predicate dim " +
                                std::to_string(w.size()) + ", state dim " +
                                std::to_string(ctx.out->nx));
  }
  // Past steps are data: fold against the recorded output.
  if (t < static_cast<int>(ctx.history->size())) {
    const bool sat = w.dot((*ctx.history)[static_cast<size_t>(t)]) <= c;
    return ZRef::constant(negated ? !sat : sat);
  }
  if (t < ctx.start) {
    throw std::invalid_argument("predicate at step " + std::to_string(t) +
                                " precedes both the recorded history and the plan start");
  }
  if (w.isZero(0.0)) {
    const bool sat = 0.0 <= c;
    return ZRef::constant(negated ? !sat : sat);
  }
  MilpProblem& p_out = ctx.out->problem;
  const int b = p_out.add_var("b" + std::to_string(ctx.b_count++), 0.0, 1.0, true);
  const auto [wmin, wmax] = literal_range(ctx, w, t);
  std::vector<int> idx;
  std::vector<double> val;
  idx.reserve(static_cast<size_t>(w.size()) + 1);
  val.reserve(static_cast<size_t>(w.size()) + 1);
  double fix_lo = 0.0, fix_hi = 1.0;
  if (!negated) {
    // b = 1 forces w . x <= c - guard.
    const double target = c - ctx.sat_guard;
    const double m = std::max(wmax - target, ctx.big_m_floor);
    for (int i = 0; i < w.size(); ++i) {
      if (w[i] == 0.0) continue;
      idx.push_back(ctx.out->state(t, i));
      val.push_back(w[i]);
    }
    idx.push_back(b);
    val.push_back(m);
    p_out.add_row(idx, val, RowSense::Le, target + m);
    if (wmax <= target) fix_lo = 1.0;
    if (wmin > target) fix_hi = 0.0;
  } else {
    // b = 1 forces w . x >= c + margin, the strict side of the half-space.
    const double target = c + ctx.strict_margin;
    const double m = std::max(target - wmin, ctx.big_m_floor);
    for (int i = 0; i < w.size(); ++i) {
      if (w[i] == 0.0) continue;
      idx.push_back(ctx.out->state(t, i));
      val.push_back(-w[i]);
    }
    idx.push_back(b);
    val.push_back(m);
    p_out.add_row(idx, val, RowSense::Le, -target + m);
    if (wmin >= target) fix_lo = 1.0;
    if (wmax < target) fix_hi = 0.0;
  }
  // Interval analysis may decide the literal outright; the binary stays
  // declared so the count reflects the formula, but its box collapses.
  if (fix_lo > fix_hi) throw std::logic_error("literal fixed both ways");
  p_out.lo[static_cast<size_t>(b)] = fix_lo;
  p_out.hi[static_cast<size_t>(b)] = fix_hi;
  ctx.out->binaries.push_back({b, w, c, t, negated});
  ++ctx.out->num_binaries;
  return ZRef::of(b);
}

inline ZRef combine_and(EncodeCtx& ctx, std::vector<ZRef> zs) {
  std::vector<int> vars;
  for (const ZRef& z : zs) {
    if (z.is_const()) {
      if (!z.truth) return ZRef::constant(false);
    } else {
      vars.push_back(z.var);
    }
  }
  if (vars.empty()) return ZRef::constant(true);
  std::sort(vars.begin(), vars.end());
  vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
  if (vars.size() == 1) return ZRef::of(vars[0]);
  MilpProblem& p = ctx.out->problem;
  const int z = p.add_var("z" + std::to_string(ctx.z_count++), 0.0, 1.0);
  for (int v : vars) p.add_row({z, v}, {1.0, -1.0}, RowSense::Le, 0.0);
  return ZRef::of(z);
}

inline ZRef combine_or(EncodeCtx& ctx, std::vector<ZRef> zs) {
  std::vector<int> vars;
  for (const ZRef& z : zs) {
    if (z.is_const()) {
      if (z.truth) return ZRef::constant(true);
    } else {
      vars.push_back(z.var);
    }
  }
  if (vars.empty()) return ZRef::constant(false);
  std::sort(vars.begin(), vars.end());
  vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
  if (vars.size() == 1) return ZRef::of(vars[0]);
  MilpProblem& p = ctx.out->problem;
  const int z = p.add_var("z" + std::to_string(ctx.z_count++), 0.0, 1.0);
  std::vector<int> idx{z};
  std::vector<double> val{1.0};
  for (int v : vars) {
    idx.push_back(v);
    val.push_back(-1.0);
  }
  p.add_row(idx, val, RowSense::Le, 0.0);
  return ZRef::of(z);
}

inline ZRef encode_rec(EncodeCtx& ctx, const Formula& f, int t) {
  const auto key = std::make_pair(f.id(), t);
  const auto it = ctx.memo.find(key);
  if (it != ctx.memo.end()) return it->second;
  ZRef z;
  switch (f.kind()) {
    case FormulaKind::True:
      z = ZRef::constant(true);
      break;
    case FormulaKind::Predicate:
      z = encode_literal(ctx, f, t, false);
      break;
    case FormulaKind::Not: {
      const Formula& c = f.child(0);
      if (c.kind() == FormulaKind::True) {
        z = ZRef::constant(false);
      } else if (c.kind() == FormulaKind::Predicate) {
        z = encode_literal(ctx, c, t, true);
      } else {
        throw std::logic_error("negation not reduced to a literal");
      }
      break;
    }
    case FormulaKind::And: {
      std::vector<ZRef> zs;
      for (const auto& c : f.children()) zs.push_back(encode_rec(ctx, c, t));
      z = combine_and(ctx, std::move(zs));
      break;
    }
    case FormulaKind::Or: {
      std::vector<ZRef> zs;
      for (const auto& c : f.children()) zs.push_back(encode_rec(ctx, c, t));
      z = combine_or(ctx, std::move(zs));
      break;
    }
    case FormulaKind::Always: {
      std::vector<ZRef> zs;
      for (int tau = t + f.window_lo(); tau <= t + f.window_hi(); ++tau) {
        zs.push_back(encode_rec(ctx, f.child(0), tau));
      }
      z = combine_and(ctx, std::move(zs));
      break;
    }
    case FormulaKind::Eventually: {
      std::vector<ZRef> zs;
      for (int tau = t + f.window_lo(); tau <= t + f.window_hi(); ++tau) {
        zs.push_back(encode_rec(ctx, f.child(0), tau));
      }
      z = combine_or(ctx, std::move(zs));
      break;
    }
    case FormulaKind::Until: {
      // Witness per candidate settle time: right operand there, left operand
      // from the evaluation step through the settle time inclusive.
      std::vector<ZRef> witnesses;
      for (int tau = t + f.window_lo(); tau <= t + f.window_hi(); ++tau) {
        std::vector<ZRef> parts;
        parts.push_back(encode_rec(ctx, f.child(1), tau));
        for (int j = t; j <= tau; ++j) parts.push_back(encode_rec(ctx, f.child(0), j));
        witnesses.push_back(combine_and(ctx, std::move(parts)));
      }
      z = combine_or(ctx, std::move(witnesses));
      break;
    }
  }
  ctx.memo.emplace(key, z);
  return z;
}

}  // namespace detail

/// Builds the deterministic shrinking-horizon problem at step k: minimize the
/// input cost subject to the plant equalities from k on, the recorded outputs
/// up to k, the input box, and the formula evaluated at step 0 over the whole
/// word. Predicate instances that land on recorded steps fold to constants,
/// so the binary count shrinks as the horizon recedes. The formula must
/// already be free of belief atoms.
inline EncodeResult encode(const Formula& spec, const LtiDynamics& dyn,
                           const std::vector<Eigen::VectorXd>& history,
                           const Eigen::VectorXd& u_lo, const Eigen::VectorXd& u_hi,
                           const Eigen::VectorXd& r_diag, int n_steps, int k) {
  const int nx = dyn.nx();
  const int nu = dyn.nu();
  if (nx <= 0 || dyn.a.cols() != nx || dyn.b.rows() != nx || dyn.d.size() != nx ||
      dyn.x0.size() != nx) {
    throw std::invalid_argument("dynamics dimension mismatch");
  }
  if (u_lo.size() != nu || u_hi.size() != nu || r_diag.size() != nu) {
    throw std::invalid_argument("input box or cost dimension mismatch");
  }
  for (int i = 0; i < nu; ++i) {
    if (!(u_lo[i] <= u_hi[i]) || !std::isfinite(u_lo[i]) || !std::isfinite(u_hi[i])) {
      throw std::invalid_argument("input box must be finite and ordered");
    }
    if (!(r_diag[i] >= 0.0)) throw std::invalid_argument("input cost must be nonnegative");
  }
  if (k < 0 || k >= n_steps) throw std::invalid_argument("step index outside the horizon");
  if (static_cast<int>(history.size()) > k + 1) {
    throw std::invalid_argument("history extends past the current step");
  }
  for (const auto& y : history) {
    if (y.size() != nx) throw std::invalid_argument("history sample dimension mismatch");
  }
  if (horizon(spec) > n_steps) {
    throw std::invalid_argument("horizon overflow: formula needs " + std::to_string(horizon(spec)) +
                                " steps, horizon has " + std::to_string(n_steps));
  }
  detail::require_lowered(spec);
  const Formula g = nnf(spec);

  EncodeResult out;
  out.n_steps = n_steps;
  out.start = k;
  out.nx = nx;
  out.nu = nu;
  MilpProblem& p = out.problem;
  const int hlen = static_cast<int>(history.size());

  out.state_var.assign(static_cast<size_t>((n_steps + 1) * nx), -1);
  out.input_var.assign(static_cast<size_t>(n_steps * nu), -1);
  for (int t = 0; t <= n_steps; ++t) {
    const Eigen::VectorXd* pin = nullptr;
    if (t < hlen) pin = &history[static_cast<size_t>(t)];
    if (t == k && hlen <= k) pin = &dyn.x0;
    for (int i = 0; i < nx; ++i) {
      const std::string name = "x" + std::to_string(t) + "_" + std::to_string(i);
      const double lo = pin ? (*pin)[i] : -kLpInf;
      const double hi = pin ? (*pin)[i] : kLpInf;
      out.state_var[static_cast<size_t>(t * nx + i)] = p.add_var(name, lo, hi);
    }
  }
  for (int t = k; t < n_steps; ++t) {
    for (int i = 0; i < nu; ++i) {
      const std::string name = "u" + std::to_string(t) + "_" + std::to_string(i);
      const int v = p.add_var(name, u_lo[i], u_hi[i]);
      p.quad_cost[static_cast<size_t>(v)] = r_diag[i];
      out.input_var[static_cast<size_t>(t * nu + i)] = v;
    }
  }
  for (int t = k; t < n_steps; ++t) {
    for (int i = 0; i < nx; ++i) {
      std::vector<int> idx{out.state(t + 1, i)};
      std::vector<double> val{1.0};
      for (int j = 0; j < nx; ++j) {
        if (dyn.a(i, j) == 0.0) continue;
        idx.push_back(out.state(t, j));
        val.push_back(-dyn.a(i, j));
      }
      for (int j = 0; j < nu; ++j) {
        if (dyn.b(i, j) == 0.0) continue;
        idx.push_back(out.input(t, j));
        val.push_back(-dyn.b(i, j));
      }
      p.add_row(idx, val, RowSense::Eq, dyn.d[i]);
    }
  }

  detail::EncodeCtx ctx;
  ctx.out = &out;
  ctx.history = &history;
  ctx.start = k;
  // Reachable boxes: exact points through the pins, then one interval image
  // per dynamics step. Steps between an absent history and k are never
  // referenced by the formula; their boxes stay unbounded.
  ctx.box_lo.assign(static_cast<size_t>(n_steps + 1),
                    Eigen::VectorXd::Constant(nx, -kLpInf));
  ctx.box_hi.assign(static_cast<size_t>(n_steps + 1), Eigen::VectorXd::Constant(nx, kLpInf));
  for (int t = 0; t < hlen; ++t) {
    ctx.box_lo[static_cast<size_t>(t)] = history[static_cast<size_t>(t)];
    ctx.box_hi[static_cast<size_t>(t)] = history[static_cast<size_t>(t)];
  }
  if (hlen <= k) {
    ctx.box_lo[static_cast<size_t>(k)] = dyn.x0;
    ctx.box_hi[static_cast<size_t>(k)] = dyn.x0;
  }
  for (int t = k; t < n_steps; ++t) {
    Eigen::VectorXd nlo = dyn.d, nhi = dyn.d;
    for (int i = 0; i < nx; ++i) {
      for (int j = 0; j < nx; ++j) {
        const double a = dyn.a(i, j);
        if (a == 0.0) continue;
        const double l = ctx.box_lo[static_cast<size_t>(t)][j];
        const double h = ctx.box_hi[static_cast<size_t>(t)][j];
        nlo[i] += a * (a > 0.0 ? l : h);
        nhi[i] += a * (a > 0.0 ? h : l);
      }
      for (int j = 0; j < nu; ++j) {
        const double bc = dyn.b(i, j);
        if (bc == 0.0) continue;
        nlo[i] += bc * (bc > 0.0 ? u_lo[j] : u_hi[j]);
        nhi[i] += bc * (bc > 0.0 ? u_hi[j] : u_lo[j]);
      }
    }
    ctx.box_lo[static_cast<size_t>(t + 1)] = nlo;
    ctx.box_hi[static_cast<size_t>(t + 1)] = nhi;
  }

  const detail::ZRef root = detail::encode_rec(ctx, g, 0);
  if (root.is_const()) {
    if (!root.truth) p.add_row({}, {}, RowSense::Le, -1.0);
  } else if (p.hi[static_cast<size_t>(root.var)] >= 1.0) {
    p.lo[static_cast<size_t>(root.var)] = 1.0;
  } else {
    p.add_row({}, {}, RowSense::Le, -1.0);
  }
  p.validate();
  return out;
}

/// Heuristic binary assignment read off a candidate state trajectory, used to
/// seed the solver with the shifted plan from the previous step.
inline BinaryHint binary_hint(const EncodeResult& enc, const Eigen::MatrixXd& states) {
  if (static_cast<int>(states.cols()) != enc.nx || static_cast<int>(states.rows()) < enc.n_steps + 1) {
    throw std::invalid_argument("hint trajectory shape mismatch");
  }
  BinaryHint hint;
  hint.reserve(enc.binaries.size());
  for (const auto& bin : enc.binaries) {
    const double lhs = bin.w.dot(states.row(bin.step).transpose());
    const bool sat = bin.negated ? (lhs > bin.c) : (lhs <= bin.c);
    hint.emplace_back(bin.var, sat ? 1.0 : 0.0);
  }
  return hint;
}

}  // namespace ramp
