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

#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ramp {

/// Discrete-time vector signal. Row k holds the signal value at step k.
struct Trajectory {
  Eigen::MatrixXd samples;
  double dt{1.0};

  int steps() const { return static_cast<int>(samples.rows()) - 1; }
  int dim() const { return static_cast<int>(samples.cols()); }
};

/// Half-space atom over a signal sample. Satisfied iff
///   coeffs . s <= offset,
/// i.e. margin(s) = offset - coeffs . s >= 0. Zero margin counts as satisfied.
struct LinearPredicate {
  Eigen::VectorXd coeffs;
  double offset{0.0};

  double margin(const Eigen::Ref<const Eigen::VectorXd>& s) const {
    if (s.size() != coeffs.size()) {
      throw std::invalid_argument("predicate arity error: signal dim " +
                                  std::to_string(s.size()) + ", predicate dim " +
                                  std::to_string(coeffs.size()));
    }
    return offset - coeffs.dot(s);
  }

  bool operator==(const LinearPredicate& o) const {
    return offset == o.offset && coeffs.size() == o.coeffs.size() && coeffs == o.coeffs;
  }
};

/// Atom whose half-space changes with the absolute time step. Entry t applies
/// when the atom is evaluated at step t. Produced by lowering belief atoms
/// against a moment trajectory; has no concrete-syntax form.
struct TimeVaryingPredicate {
  std::vector<LinearPredicate> by_step;

  const LinearPredicate& at(int t) const {
    if (t < 0 || t >= static_cast<int>(by_step.size())) {
      throw std::out_of_range("time-varying atom has no entry for step " + std::to_string(t));
    }
    return by_step[static_cast<size_t>(t)];
  }

  bool operator==(const TimeVaryingPredicate& o) const { return by_step == o.by_step; }
};

struct BeliefPredicate;  // belief.hpp

enum class FormulaKind { True, Predicate, Not, And, Or, Always, Eventually, Until };

class Formula;

namespace detail {
struct FormulaNode {
  FormulaKind kind{FormulaKind::True};
  int lo{0};
  int hi{0};
  std::vector<Formula> children;
  std::shared_ptr<const LinearPredicate> lin;
  std::shared_ptr<const TimeVaryingPredicate> tvp;
  std::shared_ptr<const BeliefPredicate> bel;
  // Structural comparison for the payload above; installed where the
  // complete BeliefPredicate type is visible.
  bool (*bel_eq)(const BeliefPredicate&, const BeliefPredicate&){nullptr};
};
}  // namespace detail

/// Immutable formula handle; copies share structure. Temporal windows are in
/// steps, inclusive at both ends, with 0 <= lo <= hi.
class Formula {
 public:
  Formula() = default;

  FormulaKind kind() const { return node().kind; }
  int window_lo() const { return node().lo; }
  int window_hi() const { return node().hi; }
  const std::vector<Formula>& children() const { return node().children; }
  const Formula& child(size_t i) const { return node().children.at(i); }

  const LinearPredicate* linear() const { return node().lin.get(); }
  const TimeVaryingPredicate* time_varying() const { return node().tvp.get(); }
  const BeliefPredicate* belief() const { return node().bel.get(); }

  bool is_atom() const { return kind() == FormulaKind::Predicate; }

  bool same_node(const Formula& o) const { return node_ == o.node_; }
  const void* id() const { return node_.get(); }

  bool operator==(const Formula& o) const;

  static Formula make(detail::FormulaNode n) {
    Formula f;
    f.node_ = std::make_shared<const detail::FormulaNode>(std::move(n));
    return f;
  }

 private:
  const detail::FormulaNode& node() const {
    if (!node_) throw std::logic_error("empty formula handle");
    return *node_;
  }

  std::shared_ptr<const detail::FormulaNode> node_;
};

inline Formula verum() { return Formula::make({}); }

inline Formula atom(LinearPredicate p) {
  detail::FormulaNode n;
  n.kind = FormulaKind::Predicate;
  n.lin = std::make_shared<const LinearPredicate>(std::move(p));
  return Formula::make(std::move(n));
}

inline Formula atom(TimeVaryingPredicate p) {
  detail::FormulaNode n;
  n.kind = FormulaKind::Predicate;
  n.tvp = std::make_shared<const TimeVaryingPredicate>(std::move(p));
  return Formula::make(std::move(n));
}

/// Deferred so stl.hpp does not need the complete BeliefPredicate type.
template <class P>
Formula belief_atom(P p) {
  detail::FormulaNode n;
  n.kind = FormulaKind::Predicate;
  n.bel = std::make_shared<const P>(std::move(p));
  n.bel_eq = [](const P& a, const P& b) { return a == b; };
  return Formula::make(std::move(n));
}

inline Formula neg(Formula f) {
  detail::FormulaNode n;
  n.kind = FormulaKind::Not;
  n.children.push_back(std::move(f));
  return Formula::make(std::move(n));
}

inline Formula falsum() { return neg(verum()); }

namespace detail {
inline Formula nary(FormulaKind kind, std::vector<Formula> fs) {
  if (fs.size() < 2) throw std::invalid_argument("conjunction/disjunction needs >= 2 operands");
  FormulaNode n;
  n.kind = kind;
  n.children = std::move(fs);
  return Formula::make(std::move(n));
}

inline void check_window(int lo, int hi) {
  if (lo < 0 || hi < lo) {
    throw std::invalid_argument("bad temporal window [" + std::to_string(lo) + "," +
                                std::to_string(hi) + "]");
  }
}
}  // namespace detail

inline Formula conj(std::vector<Formula> fs) { return detail::nary(FormulaKind::And, std::move(fs)); }
inline Formula disj(std::vector<Formula> fs) { return detail::nary(FormulaKind::Or, std::move(fs)); }

inline Formula always(int lo, int hi, Formula f) {
  detail::check_window(lo, hi);
  detail::FormulaNode n;
  n.kind = FormulaKind::Always;
  n.lo = lo;
  n.hi = hi;
  n.children.push_back(std::move(f));
  return Formula::make(std::move(n));
}

inline Formula eventually(int lo, int hi, Formula f) {
  detail::check_window(lo, hi);
  detail::FormulaNode n;
  n.kind = FormulaKind::Eventually;
  n.lo = lo;
  n.hi = hi;
  n.children.push_back(std::move(f));
  return Formula::make(std::move(n));
}

/// Bounded until. At step k it asks for some k' in [k+lo, k+hi] with the right
/// operand true at k' and the left operand true at every step of [k, k'],
/// both ends inclusive.
inline Formula until(int lo, int hi, Formula left, Formula right) {
  detail::check_window(lo, hi);
  detail::FormulaNode n;
  n.kind = FormulaKind::Until;
  n.lo = lo;
  n.hi = hi;
  n.children.push_back(std::move(left));
  n.children.push_back(std::move(right));
  return Formula::make(std::move(n));
}

inline Formula implies(Formula a, Formula b) { return disj({neg(std::move(a)), std::move(b)}); }

inline bool Formula::operator==(const Formula& o) const {
  if (node_ == o.node_) return true;
  if (!node_ || !o.node_) return false;
  const auto& a = *node_;
  const auto& b = *o.node_;
  if (a.kind != b.kind || a.lo != b.lo || a.hi != b.hi) return false;
  if (static_cast<bool>(a.lin) != static_cast<bool>(b.lin)) return false;
  if (a.lin && !(*a.lin == *b.lin)) return false;
  if (static_cast<bool>(a.tvp) != static_cast<bool>(b.tvp)) return false;
  if (a.tvp && !(*a.tvp == *b.tvp)) return false;
  if (static_cast<bool>(a.bel) != static_cast<bool>(b.bel)) return false;
  if (a.bel && a.bel != b.bel && !a.bel_eq(*a.bel, *b.bel)) return false;
  if (a.children.size() != b.children.size()) return false;
  for (size_t i = 0; i < a.children.size(); ++i) {
    if (!(a.children[i] == b.children[i])) return false;
  }
  return true;
}

/// Steps of future signal needed beyond the evaluation instant.
inline int horizon(const Formula& f) {
  switch (f.kind()) {
    case FormulaKind::True:
      return 0;
    case FormulaKind::Predicate:
      return 0;
    case FormulaKind::Not:
      return horizon(f.child(0));
    case FormulaKind::And:
    case FormulaKind::Or: {
      int h = 0;
      for (const auto& c : f.children()) h = std::max(h, horizon(c));
      return h;
    }
    case FormulaKind::Always:
    case FormulaKind::Eventually:
      return f.window_hi() + horizon(f.child(0));
    case FormulaKind::Until:
      return f.window_hi() + std::max(horizon(f.child(0)), horizon(f.child(1)));
  }
  throw std::logic_error("unreachable formula kind");
}

namespace detail {

inline double atom_margin(const Formula& f, const Trajectory& traj, int k) {
  if (f.belief()) {
    throw std::invalid_argument("cannot evaluate a belief atom; lower it first");
  }
  const Eigen::VectorXd s = traj.samples.row(k);
  if (const auto* tvp = f.time_varying()) return tvp->at(k).margin(s);
  return f.linear()->margin(s);
}

template <class Leaf, class Acc>
auto eval_rec(const Formula& f, const Trajectory& traj, int k, Leaf leaf, Acc acc)
    -> decltype(leaf(f, k)) {
  using V = decltype(leaf(f, k));
  switch (f.kind()) {
    case FormulaKind::True:
      return acc.top();
    case FormulaKind::Predicate:
      return leaf(f, k);
    case FormulaKind::Not:
      return acc.negate(eval_rec(f.child(0), traj, k, leaf, acc));
    case FormulaKind::And: {
      V v = acc.top();
      for (const auto& c : f.children()) v = acc.meet(v, eval_rec(c, traj, k, leaf, acc));
      return v;
    }
    case FormulaKind::Or: {
      V v = acc.bottom();
      for (const auto& c : f.children()) v = acc.join(v, eval_rec(c, traj, k, leaf, acc));
      return v;
    }
    case FormulaKind::Always: {
      V v = acc.top();
      for (int t = k + f.window_lo(); t <= k + f.window_hi(); ++t) {
        v = acc.meet(v, eval_rec(f.child(0), traj, t, leaf, acc));
      }
      return v;
    }
    case FormulaKind::Eventually: {
      V v = acc.bottom();
      for (int t = k + f.window_lo(); t <= k + f.window_hi(); ++t) {
        v = acc.join(v, eval_rec(f.child(0), traj, t, leaf, acc));
      }
      return v;
    }
    case FormulaKind::Until: {
      V best = acc.bottom();
      for (int t = k + f.window_lo(); t <= k + f.window_hi(); ++t) {
        V v = eval_rec(f.child(1), traj, t, leaf, acc);
        for (int s = k; s <= t; ++s) v = acc.meet(v, eval_rec(f.child(0), traj, s, leaf, acc));
        best = acc.join(best, v);
      }
      return best;
    }
  }
  throw std::logic_error("unreachable formula kind");
}

struct BoolAlgebra {
  bool top() const { return true; }
  bool bottom() const { return false; }
  bool negate(bool v) const { return !v; }
  bool meet(bool a, bool b) const { return a && b; }
  bool join(bool a, bool b) const { return a || b; }
};

struct RobustAlgebra {
  double top() const { return std::numeric_limits<double>::infinity(); }
  double bottom() const { return -std::numeric_limits<double>::infinity(); }
  double negate(double v) const { return -v; }
  double meet(double a, double b) const { return std::min(a, b); }
  double join(double a, double b) const { return std::max(a, b); }
};

inline void check_length(const Formula& f, const Trajectory& traj, int k) {
  if (k < 0) throw std::invalid_argument("negative evaluation step");
  if (k + horizon(f) > traj.steps()) {
    throw std::invalid_argument("insufficient trajectory length: need step " +
                                std::to_string(k + horizon(f)) + ", have " +
                                std::to_string(traj.steps()));
  }
}

}  // namespace detail

/// Boolean satisfaction at step k. Atoms with zero margin count as satisfied.
inline bool eval_bool(const Formula& f, const Trajectory& traj, int k = 0) {
  detail::check_length(f, traj, k);
  auto leaf = [&](const Formula& a, int t) { return detail::atom_margin(a, traj, t) >= 0.0; };
  return detail::eval_rec(f, traj, k, leaf, detail::BoolAlgebra{});
}

/// Quantitative robustness at step k: min/max recursion over atom margins.
/// Nonnegative iff eval_bool holds; exactly zero means marginal satisfaction.
inline double robustness(const Formula& f, const Trajectory& traj, int k = 0) {
  detail::check_length(f, traj, k);
  auto leaf = [&](const Formula& a, int t) { return detail::atom_margin(a, traj, t); };
  return detail::eval_rec(f, traj, k, leaf, detail::RobustAlgebra{});
}

/// Negation normal form: pushes Not inward until it sits directly above atoms
/// (or True). Negated bounded until is expanded over its window using
/// singleton Always/Eventually shifts; all other operators dualize.
inline Formula nnf(const Formula& f, bool negate = false) {
  switch (f.kind()) {
    case FormulaKind::True:
      return negate ? falsum() : f;
    case FormulaKind::Predicate:
      return negate ? neg(f) : f;
    case FormulaKind::Not:
      return nnf(f.child(0), !negate);
    case FormulaKind::And:
    case FormulaKind::Or: {
      std::vector<Formula> cs;
      cs.reserve(f.children().size());
      for (const auto& c : f.children()) cs.push_back(nnf(c, negate));
      const bool is_and = (f.kind() == FormulaKind::And) != negate;
      return is_and ? conj(std::move(cs)) : disj(std::move(cs));
    }
    case FormulaKind::Always: {
      Formula c = nnf(f.child(0), negate);
      return negate ? eventually(f.window_lo(), f.window_hi(), std::move(c))
                    : always(f.window_lo(), f.window_hi(), std::move(c));
    }
    case FormulaKind::Eventually: {
      Formula c = nnf(f.child(0), negate);
      return negate ? always(f.window_lo(), f.window_hi(), std::move(c))
                    : eventually(f.window_lo(), f.window_hi(), std::move(c));
    }
    case FormulaKind::Until: {
      if (!negate) {
        return until(f.window_lo(), f.window_hi(), nnf(f.child(0)), nnf(f.child(1)));
      }
      // not (p U[a,b] q)  ==  for every k' in [a,b]: (not q at k') or (not p
      // somewhere in [0,k']). Expanded with singleton windows as time shifts.
      Formula np = nnf(f.child(0), true);
      Formula nq = nnf(f.child(1), true);
      std::vector<Formula> terms;
      for (int j = f.window_lo(); j <= f.window_hi(); ++j) {
        Formula miss = (j == 0) ? nq : always(j, j, nq);
        Formula broken = eventually(0, j, np);
        terms.push_back(disj({std::move(miss), std::move(broken)}));
      }
      if (terms.size() == 1) return std::move(terms.front());
      return conj(std::move(terms));
    }
  }
  throw std::logic_error("unreachable formula kind");
}

}  // namespace ramp
