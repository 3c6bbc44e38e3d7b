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
#include <string>
#include <vector>

#include "ramp/stl.hpp"

namespace ramp {

/// Tail bound used to turn a chance constraint into a deterministic margin.
enum class KappaMode { Gaussian, DistributionallyRobust, MeanOnly };

/// Standard normal quantile of 1 - eps via bisection on erfc. Monotone and
/// accurate to ~1e-12 over risk levels representable in double precision.
inline double normal_upper_quantile(double eps) {
  const double p = (eps <= 0.5) ? eps : 1.0 - eps;
  double lo = 0.0, hi = 41.0;  // erfc(41/sqrt(2)) underflows well past any usable eps
  for (int it = 0; it < 200 && hi - lo > 1e-13 * std::max(1.0, lo); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (0.5 * std::erfc(mid / std::sqrt(2.0)) > p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double q = 0.5 * (lo + hi);
  return (eps <= 0.5) ? q : -q;
}

/// Margin multiplier kappa(eps) for a chance constraint at risk level eps.
inline double kappa(double eps, KappaMode mode) {
  if (!(eps > 0.0)) throw std::invalid_argument("unbounded kappa: risk level must be positive");
  if (eps > 1.0) throw std::invalid_argument("risk level above 1");
  switch (mode) {
    case KappaMode::MeanOnly:
      return 0.0;
    case KappaMode::Gaussian:
      if (eps >= 1.0) throw std::invalid_argument("degenerate quantile: Gaussian kappa needs eps < 1");
      return normal_upper_quantile(eps);
    case KappaMode::DistributionallyRobust:
      return std::sqrt((1.0 - eps) / eps);
  }
  throw std::logic_error("unreachable kappa mode");
}

/// Chance-constrained half-space over EV outputs y and opponent outputs w:
///   P(gamma . w <= beta - alpha . y) >= 1 - eps.
/// MeanOnly atoms constrain the mean and carry eps = 1 by convention.
struct BeliefPredicate {
  Eigen::VectorXd alpha;
  Eigen::VectorXd gamma;
  double beta{0.0};
  double eps{1.0};
  KappaMode mode{KappaMode::MeanOnly};

  void validate() const {
    if (!(eps > 0.0) || eps > 1.0) throw std::invalid_argument("belief atom risk level outside (0, 1]");
    if ((mode == KappaMode::MeanOnly) != (eps == 1.0)) {
      throw std::invalid_argument("MeanOnly belief atoms must carry eps = 1 and vice versa");
    }
  }

  bool operator==(const BeliefPredicate& o) const {
    return beta == o.beta && eps == o.eps && mode == o.mode && alpha.size() == o.alpha.size() &&
           alpha == o.alpha && gamma.size() == o.gamma.size() && gamma == o.gamma;
  }
};

inline Formula belief_atom(BeliefPredicate p) {
  p.validate();
  return belief_atom<BeliefPredicate>(std::move(p));
}

/// First two moments of the opponent output stack at one step.
struct MomentStep {
  Eigen::VectorXd mu;
  Eigen::MatrixXd Sigma;
};

/// Entry k holds the opponent output moments at absolute step k.
using MomentTrajectory = std::vector<MomentStep>;

/// Deterministic surrogate value of a belief atom. Satisfied iff the result
/// is <= 0 (zero counts as satisfied).
inline double belief_g(const BeliefPredicate& p, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& mu, const Eigen::MatrixXd& Sigma) {
  p.validate();
  if (y.size() != p.alpha.size() || mu.size() != p.gamma.size() ||
      Sigma.rows() != p.gamma.size() || Sigma.cols() != p.gamma.size()) {
    throw std::invalid_argument("belief atom dimension mismatch");
  }
  double q = p.gamma.dot(Sigma * p.gamma);
  if (q < -1e-12) throw std::invalid_argument("covariance not PSD");
  q = std::max(q, 0.0);
  return p.alpha.dot(y) + p.gamma.dot(mu) + kappa(p.eps, p.mode) * std::sqrt(q) - p.beta;
}

namespace detail {

/// Lowered form of one belief atom at step t: alpha . y <= offset(t).
inline LinearPredicate lower_at(const BeliefPredicate& p, const MomentStep& m) {
  double q = p.gamma.dot(m.Sigma * p.gamma);
  if (q < -1e-12) throw std::invalid_argument("covariance not PSD");
  q = std::max(q, 0.0);
  LinearPredicate lp;
  lp.coeffs = p.alpha;
  lp.offset = p.beta - p.gamma.dot(m.mu) - kappa(p.eps, p.mode) * std::sqrt(q);
  return lp;
}

}  // namespace detail

/// Replaces every belief atom by a time-indexed linear atom over EV outputs,
/// using the moment trajectory as decision-independent constants. Atoms that
/// do not touch EV outputs and have the same truth value at every step fold
/// to constants. Plain linear atoms pass through unchanged.
inline Formula lower_dstl(const Formula& f, const MomentTrajectory& moments) {
  if (static_cast<int>(moments.size()) < horizon(f) + 1) {
    throw std::invalid_argument("moment trajectory shorter than formula horizon: need " +
                                std::to_string(horizon(f) + 1) + " steps, have " +
                                std::to_string(moments.size()));
  }
  struct Rec {
    const MomentTrajectory& moments;
    Formula run(const Formula& f) const {
      switch (f.kind()) {
        case FormulaKind::True:
          return f;
        case FormulaKind::Predicate: {
          const BeliefPredicate* bp = f.belief();
          if (!bp) return f;
          bp->validate();
          TimeVaryingPredicate tvp;
          tvp.by_step.reserve(moments.size());
          for (const auto& m : moments) tvp.by_step.push_back(detail::lower_at(*bp, m));
          if (bp->alpha.isZero(0.0)) {
            bool all_true = true, all_false = true;
            for (const auto& lp : tvp.by_step) ((lp.offset >= 0.0) ? all_false : all_true) = false;
            if (all_true) return verum();
            if (all_false) return falsum();
          }
          return atom(std::move(tvp));
        }
        case FormulaKind::Not:
          return neg(run(f.child(0)));
        case FormulaKind::And:
        case FormulaKind::Or: {
          std::vector<Formula> cs;
          cs.reserve(f.children().size());
          for (const auto& c : f.children()) cs.push_back(run(c));
          return f.kind() == FormulaKind::And ? conj(std::move(cs)) : disj(std::move(cs));
        }
        case FormulaKind::Always:
          return always(f.window_lo(), f.window_hi(), run(f.child(0)));
        case FormulaKind::Eventually:
          return eventually(f.window_lo(), f.window_hi(), run(f.child(0)));
        case FormulaKind::Until:
          return until(f.window_lo(), f.window_hi(), run(f.child(0)), run(f.child(1)));
      }
      throw std::logic_error("unreachable formula kind");
    }
  };
  return Rec{moments}.run(f);
}

namespace detail {

enum class Truth { False, True, Unknown };

inline Truth neg_truth(Truth t) {
  if (t == Truth::Unknown) return t;
  return t == Truth::True ? Truth::False : Truth::True;
}

/// Three-valued truth of a lowered node at one concrete evaluation step.
/// Atoms that touch decision variables are Unknown; everything known folds.
inline Truth truth_at(const Formula& f, int t) {
  switch (f.kind()) {
    case FormulaKind::True:
      return Truth::True;
    case FormulaKind::Predicate: {
      if (f.belief()) return Truth::Unknown;  // not lowered; rejected elsewhere
      const LinearPredicate* lp = f.linear();
      if (!lp) {
        const auto* tvp = f.time_varying();
        if (t < 0 || t >= static_cast<int>(tvp->by_step.size())) return Truth::Unknown;
        lp = &tvp->by_step[static_cast<size_t>(t)];
      }
      if (!lp->coeffs.isZero(0.0)) return Truth::Unknown;
      return lp->offset >= 0.0 ? Truth::True : Truth::False;
    }
    case FormulaKind::Not:
      return neg_truth(truth_at(f.child(0), t));
    case FormulaKind::And:
    case FormulaKind::Or: {
      const bool is_and = f.kind() == FormulaKind::And;
      Truth agg = is_and ? Truth::True : Truth::False;
      for (const auto& c : f.children()) {
        const Truth v = truth_at(c, t);
        if (v == (is_and ? Truth::False : Truth::True)) return v;
        if (v == Truth::Unknown) agg = Truth::Unknown;
      }
      return agg;
    }
    case FormulaKind::Always:
    case FormulaKind::Eventually: {
      const bool is_all = f.kind() == FormulaKind::Always;
      Truth agg = is_all ? Truth::True : Truth::False;
      for (int s = t + f.window_lo(); s <= t + f.window_hi(); ++s) {
        const Truth v = truth_at(f.child(0), s);
        if (v == (is_all ? Truth::False : Truth::True)) return v;
        if (v == Truth::Unknown) agg = Truth::Unknown;
      }
      return agg;
    }
    case FormulaKind::Until: {
      Truth best = Truth::False;
      for (int kp = t + f.window_lo(); kp <= t + f.window_hi(); ++kp) {
        Truth v = truth_at(f.child(1), kp);
        for (int s = t; s <= kp && v != Truth::False; ++s) {
          const Truth l = truth_at(f.child(0), s);
          if (l == Truth::False) v = Truth::False;
          if (l == Truth::Unknown && v == Truth::True) v = Truth::Unknown;
        }
        if (v == Truth::True) return v;
        if (v == Truth::Unknown) best = Truth::Unknown;
      }
      return best;
    }
  }
  throw std::logic_error("unreachable formula kind");
}

/// Truth over every step in [tmin, tmax] if uniform, Unknown otherwise.
inline Truth range_truth(const Formula& f, int tmin, int tmax) {
  const Truth agg = truth_at(f, tmin);
  if (agg == Truth::Unknown) return agg;
  for (int t = tmin + 1; t <= tmax; ++t) {
    if (truth_at(f, t) != agg) return Truth::Unknown;
  }
  return agg;
}

inline Formula simplify_rec(const Formula& f, int tmin, int tmax) {
  const Truth whole = range_truth(f, tmin, tmax);
  if (whole == Truth::True) return verum();
  if (whole == Truth::False) return falsum();
  switch (f.kind()) {
    case FormulaKind::True:
    case FormulaKind::Predicate:
      return f;
    case FormulaKind::Not:
      return neg(simplify_rec(f.child(0), tmin, tmax));
    case FormulaKind::And:
    case FormulaKind::Or: {
      const bool is_and = f.kind() == FormulaKind::And;
      std::vector<Formula> kept;
      for (const auto& c : f.children()) {
        Formula s = simplify_rec(c, tmin, tmax);
        const Truth t = range_truth(s, tmin, tmax);
        if (t == Truth::Unknown) {
          kept.push_back(std::move(s));
          continue;
        }
        const bool v = (t == Truth::True);
        if (is_and && !v) return falsum();
        if (!is_and && v) return verum();
        // neutral operand, drop
      }
      if (kept.empty()) return is_and ? verum() : falsum();
      if (kept.size() == 1) return std::move(kept.front());
      return is_and ? conj(std::move(kept)) : disj(std::move(kept));
    }
    case FormulaKind::Always:
    case FormulaKind::Eventually: {
      const int a = f.window_lo(), b = f.window_hi();
      Formula c = simplify_rec(f.child(0), tmin + a, tmax + b);
      const Truth t = range_truth(c, tmin + a, tmax + b);
      if (t == Truth::True) return verum();
      if (t == Truth::False) return falsum();
      return f.kind() == FormulaKind::Always ? always(a, b, std::move(c))
                                             : eventually(a, b, std::move(c));
    }
    case FormulaKind::Until: {
      const int a = f.window_lo(), b = f.window_hi();
      Formula left = simplify_rec(f.child(0), tmin, tmax + b);
      Formula right = simplify_rec(f.child(1), tmin + a, tmax + b);
      const Truth tl = range_truth(left, tmin, tmax + b);
      const Truth tr = range_truth(right, tmin + a, tmax + b);
      if (tl == Truth::False || tr == Truth::False) return falsum();
      if (tl == Truth::True) return simplify_rec(eventually(a, b, std::move(right)), tmin, tmax);
      // left unknown, right true everywhere: the earliest witness step works.
      if (tr == Truth::True) return simplify_rec(always(0, a, std::move(left)), tmin, tmax);
      return until(a, b, std::move(left), std::move(right));
    }
  }
  throw std::logic_error("unreachable formula kind");
}

}  // namespace detail

/// Folds subformulas whose truth is fixed by lowered constants. Expects a
/// lowered formula evaluated from step 0; folding is sound for every
/// evaluation step the recursion can reach. Implications whose antecedent
/// folds to False disappear entirely, along with their binaries later on.
inline Formula simplify_constants(const Formula& f) { return detail::simplify_rec(f, 0, 0); }

}  // namespace ramp
