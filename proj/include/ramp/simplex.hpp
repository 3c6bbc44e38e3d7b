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

// LP engine behind the branch-and-bound backend: a bounded-variable revised
// simplex over a dense explicit basis inverse, with a light presolve that
// substitutes free variables out of equality rows (dynamics chains collapse
// onto the inputs), a primal phase-1/phase-2 path for cold starts, and a dual
// simplex for reoptimization after bound changes or appended cut rows. The
// quadratic-diagonal objective stays outside the simplex as epigraph columns
// under tangent cuts refined on demand, so every relaxation objective is a
// valid lower bound on the true quadratic objective.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ramp/milp.hpp"

namespace ramp {

struct SimplexOptions {
  double feas_tol{1e-7};
  double opt_tol{1e-7};
  double pivot_tol{1e-9};
  int refactor_every{100};
  long iter_cap{200000};
  int stall_window{300};
  int max_cut_rounds{400};
};

enum class LpStatus { Optimal, Infeasible, Unbounded, IterLimit };

class LpEngine {
 public:
  explicit LpEngine(const MilpProblem& p, SimplexOptions opt = {}) : opt_(opt) {
    p.validate();
    n_orig_ = p.num_vars();
    presolve(p);
    if (!proven_infeasible_) build_lp();
  }

  bool proven_infeasible_at_build() const { return proven_infeasible_; }

  /// Cold solve: slack/artificial start, phase 1, phase 2, cut refinement.
  /// A numerically singular basis is repaired by one restart from scratch.
  LpStatus solve() {
    if (proven_infeasible_) return last_ = LpStatus::Infeasible;
    try {
      return last_ = solve_inner();
    } catch (const BasisRepair&) {
    }
    try {
      return last_ = solve_inner();
    } catch (const BasisRepair&) {
      throw std::runtime_error("basis factorization failed");
    }
  }

  /// Warm reoptimize after bound edits or appended cut rows. Falls back to a
  /// primal pass or a cold start when the basis lost dual or primal
  /// feasibility in a way bound flips cannot repair, and to a full restart
  /// when the warm basis has degenerated into a singular one.
  LpStatus reoptimize() {
    if (proven_infeasible_) return last_ = LpStatus::Infeasible;
    if (!basis_ready_) return solve();
    if (box_infeasible_count_ > 0) return last_ = LpStatus::Infeasible;
    try {
      const bool dual_ok = restore_dual_feasibility();
      refresh_values();
      LpStatus s;
      if (dual_ok) {
        s = dual_loop();
      } else if (primal_violation() <= opt_.feas_tol) {
        s = primal_loop();
      } else {
        s = cold_core();
      }
      if (s != LpStatus::Optimal) return last_ = s;
      if (worst_dual_violation() > 10.0 * dual_tol()) {
        s = primal_loop();
        if (s != LpStatus::Optimal) return last_ = s;
      }
      return last_ = refine_cuts();
    } catch (const BasisRepair&) {
    }
    return solve();
  }

  LpStatus status() const { return last_; }
  long iterations() const { return iters_; }
  int lp_rows() const { return m_; }
  int lp_cols() const { return ncol_; }

  int presolve_eliminated() const {
    int k = 0;
    for (const auto& rec : post_) k += (rec.kind == PostRec::Subst) ? 1 : 0;
    return k;
  }
  int presolve_fixed() const {
    int k = 0;
    for (const auto& rec : post_) k += (rec.kind == PostRec::Fix) ? 1 : 0;
    return k;
  }

  /// False for variables substituted out during presolve; their bounds cannot
  /// change after construction.
  bool can_rebound(int var) const {
    check_var(var);
    return col_of_[static_cast<size_t>(var)] >= 0 || fixed_value_.count(var) > 0;
  }

  /// Relative tolerance for closing the epigraph gap during refinement.
  void set_refine_tol(double rel) { refine_rel_ = rel; }

  /// Caps tangent-refinement rounds per solve or reoptimize call; negative
  /// means unlimited. The bound stays valid at any cap, only its tightness
  /// suffers, so a caller doing many reoptimizations can spread refinement
  /// across calls instead of paying for full convergence at every point the
  /// search visits.
  void set_cut_round_cap(int cap) { cut_round_cap_ = cap; }

  /// Bound override in original variable space. Returns false when the new box
  /// is empty or contradicts a value pinned during presolve; in that state
  /// reoptimize() reports Infeasible until the bounds are restored.
  bool set_var_bounds(int var, double vlo, double vhi) {
    check_var(var);
    auto& ov = override_[static_cast<size_t>(var)];
    const bool was_bad = ov.bad;
    const bool ok = apply_bounds(var, vlo, vhi);
    ov.active = true;
    ov.bad = !ok;
    box_infeasible_count_ += int(ov.bad) - int(was_bad);
    return ok;
  }

  /// Restores the bounds the problem was built with.
  void reset_var_bounds(int var) {
    check_var(var);
    auto& ov = override_[static_cast<size_t>(var)];
    if (!ov.active) return;
    box_infeasible_count_ -= int(ov.bad);
    ov = {};
    apply_bounds(var, base_lo_[static_cast<size_t>(var)], base_hi_[static_cast<size_t>(var)]);
  }

  /// Objective of the current LP point including the epigraph terms: a valid
  /// lower bound on the true quadratic objective over the same bounds.
  double bound_objective() const {
    double v = obj_offset_;
    for (int j = 0; j < ncol_; ++j) {
      const double c = ccost_[static_cast<size_t>(j)];
      if (c != 0.0) v += c * col_value(j);
    }
    return v;
  }

  /// Exact objective of the current point in original space.
  double true_objective() const {
    const Eigen::VectorXd x = assignment();
    double v = 0.0;
    for (int j = 0; j < n_orig_; ++j) {
      v += orig_lin_[static_cast<size_t>(j)] * x[j] +
           orig_quad_[static_cast<size_t>(j)] * x[j] * x[j];
    }
    return v;
  }

  double var_value(int var) const {
    check_var(var);
    const int c = col_of_[static_cast<size_t>(var)];
    if (c >= 0) return col_value(c);
    const auto it = fixed_value_.find(var);
    if (it != fixed_value_.end()) return it->second;
    throw std::logic_error("variable eliminated by substitution; use assignment()");
  }

  /// Full original-space assignment, replaying presolve substitutions.
  Eigen::VectorXd assignment() const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n_orig_);
    for (int j = 0; j < n_orig_; ++j) {
      const int c = col_of_[static_cast<size_t>(j)];
      if (c >= 0) x[j] = col_value(c);
    }
    for (auto it = post_.rbegin(); it != post_.rend(); ++it) {
      if (it->kind == PostRec::Fix) {
        x[it->var] = it->rhs;
      } else {
        double v = it->rhs;
        for (const auto& [w, a] : it->terms) v -= a * x[w];
        x[it->var] = v / it->coef;
      }
    }
    return x;
  }

 private:
  enum Stat : int8_t { kBasic, kAtLo, kAtUp, kFree0 };

  /// Raised when the factorization finds the working basis singular; the
  /// public entry points recover with a cold restart.
  struct BasisRepair {};

  LpStatus solve_inner() {
    LpStatus s = cold_core();
    if (s != LpStatus::Optimal) return s;
    return refine_cuts();
  }

  struct PostRec {
    enum Kind { Fix, Subst } kind{Fix};
    int var{0};
    double rhs{0.0};
    double coef{1.0};
    std::vector<std::pair<int, double>> terms;
  };

  struct Override {
    bool active{false};
    bool bad{false};
  };

  // ---- presolve ----------------------------------------------------------

  struct PRow {
    std::vector<std::pair<int, double>> terms;  // original var -> coefficient
    RowSense sense{RowSense::Le};
    double rhs{0.0};
    bool alive{true};
  };

  void presolve(const MilpProblem& p) {
    base_lo_ = p.lo;
    base_hi_ = p.hi;
    orig_lin_ = p.lin_cost;
    orig_quad_ = p.quad_cost;
    plo_ = p.lo;
    phi_ = p.hi;
    plin_ = p.lin_cost;
    pquad_ = p.quad_cost;
    override_.assign(static_cast<size_t>(n_orig_), {});
    col_of_.assign(static_cast<size_t>(n_orig_), -1);
    gone_.assign(static_cast<size_t>(n_orig_), 0);

    std::vector<PRow> rows;
    rows.reserve(p.rows.size());
    for (const auto& r : p.rows) {
      PRow pr;
      pr.sense = r.sense;
      pr.rhs = r.rhs;
      for (size_t t = 0; t < r.idx.size(); ++t) {
        if (r.val[t] != 0.0) pr.terms.emplace_back(r.idx[t], r.val[t]);
      }
      rows.push_back(std::move(pr));
    }

    auto substitute_fixed = [&](int var, double value) {
      gone_[static_cast<size_t>(var)] = 1;
      obj_offset_ += plin_[static_cast<size_t>(var)] * value +
                     pquad_[static_cast<size_t>(var)] * value * value;
      post_.push_back({PostRec::Fix, var, value, 1.0, {}});
      for (auto& row : rows) {
        if (!row.alive) continue;
        for (size_t t = 0; t < row.terms.size(); ++t) {
          if (row.terms[t].first == var) {
            row.rhs -= row.terms[t].second * value;
            row.terms.erase(row.terms.begin() + static_cast<long>(t));
            break;
          }
        }
      }
    };

    bool changed = true;
    while (changed && !proven_infeasible_) {
      changed = false;
      for (int j = 0; j < n_orig_; ++j) {
        if (gone_[static_cast<size_t>(j)]) continue;
        if (plo_[static_cast<size_t>(j)] == phi_[static_cast<size_t>(j)]) {
          substitute_fixed(j, plo_[static_cast<size_t>(j)]);
          changed = true;
        }
      }
      for (auto& row : rows) {
        if (!row.alive || proven_infeasible_) continue;
        if (row.terms.empty()) {
          const double viol = (row.sense == RowSense::Eq) ? std::abs(row.rhs) : -row.rhs;
          if (viol > 1e-9 * (1.0 + std::abs(row.rhs))) proven_infeasible_ = true;
          row.alive = false;
          changed = true;
          continue;
        }
        if (row.terms.size() == 1) {
          const int j = row.terms[0].first;
          const double a = row.terms[0].second;
          const double v = row.rhs / a;
          auto& l = plo_[static_cast<size_t>(j)];
          auto& h = phi_[static_cast<size_t>(j)];
          if (row.sense == RowSense::Eq) {
            if (v < l - 1e-7 || v > h + 1e-7) {
              proven_infeasible_ = true;
            } else {
              const double vc = std::min(std::max(v, l), h);
              l = h = vc;
            }
          } else if (a > 0.0) {
            h = std::min(h, v);
          } else {
            l = std::max(l, v);
          }
          if (l > h) proven_infeasible_ = true;
          row.alive = false;
          changed = true;
          continue;
        }
        if (row.sense != RowSense::Eq) continue;
        // Substitute out one free, quadratic-cost-free variable. Free bounds
        // make the substitution lossless: the variable cuts nothing itself.
        int pick = -1;
        double pick_coef = 0.0, row_scale = 0.0;
        for (const auto& [j, a] : row.terms) row_scale = std::max(row_scale, std::abs(a));
        for (const auto& [j, a] : row.terms) {
          if (plo_[static_cast<size_t>(j)] != -kLpInf || phi_[static_cast<size_t>(j)] != kLpInf) {
            continue;
          }
          if (pquad_[static_cast<size_t>(j)] != 0.0) continue;
          if (std::abs(a) < 1e-9 * row_scale) continue;
          if (pick < 0 || std::abs(a) > std::abs(pick_coef) ||
              (std::abs(a) == std::abs(pick_coef) && j < pick)) {
            pick = j;
            pick_coef = a;
          }
        }
        if (pick < 0) continue;
        PostRec rec;
        rec.kind = PostRec::Subst;
        rec.var = pick;
        rec.coef = pick_coef;
        rec.rhs = row.rhs;
        for (const auto& [j, a] : row.terms) {
          if (j != pick) rec.terms.emplace_back(j, a);
        }
        const double cf = plin_[static_cast<size_t>(pick)];
        if (cf != 0.0) {
          obj_offset_ += cf * rec.rhs / pick_coef;
          for (const auto& [j, a] : rec.terms) plin_[static_cast<size_t>(j)] -= cf * a / pick_coef;
        }
        row.alive = false;
        gone_[static_cast<size_t>(pick)] = 1;
        for (auto& other : rows) {
          if (!other.alive) continue;
          double af = 0.0;
          for (size_t t = 0; t < other.terms.size(); ++t) {
            if (other.terms[t].first == pick) {
              af = other.terms[t].second;
              other.terms.erase(other.terms.begin() + static_cast<long>(t));
              break;
            }
          }
          if (af == 0.0) continue;
          const double f = af / pick_coef;
          other.rhs -= f * rec.rhs;
          for (const auto& [j, a] : rec.terms) {
            bool found = false;
            for (auto& [oj, oa] : other.terms) {
              if (oj == j) {
                oa -= f * a;
                found = true;
                break;
              }
            }
            if (!found) other.terms.emplace_back(j, -f * a);
          }
          double sc = 0.0;
          for (const auto& [j, a] : other.terms) sc = std::max(sc, std::abs(a));
          other.terms.erase(std::remove_if(other.terms.begin(), other.terms.end(),
                                           [&](const auto& t) {
                                             return std::abs(t.second) <= 1e-14 * sc;
                                           }),
                            other.terms.end());
        }
        post_.push_back(std::move(rec));
        changed = true;
      }
    }
    for (const auto& rec : post_) {
      if (rec.kind == PostRec::Fix) fixed_value_[rec.var] = rec.rhs;
    }
    if (proven_infeasible_) return;
    for (auto& row : rows) {
      if (row.alive) kept_rows_.push_back(std::move(row));
    }
  }

  // ---- LP construction ---------------------------------------------------

  void build_lp() {
    for (int j = 0; j < n_orig_; ++j) {
      if (gone_[static_cast<size_t>(j)]) continue;
      col_of_[static_cast<size_t>(j)] = new_col(
          plo_[static_cast<size_t>(j)], phi_[static_cast<size_t>(j)], plin_[static_cast<size_t>(j)]);
    }
    for (const auto& row : kept_rows_) {
      const int r = new_row(row.sense == RowSense::Eq, row.rhs);
      for (const auto& [j, a] : row.terms) {
        col_[static_cast<size_t>(col_of_[static_cast<size_t>(j)])].emplace_back(r, a);
      }
    }
    for (int j = 0; j < n_orig_; ++j) {
      if (gone_[static_cast<size_t>(j)]) continue;
      const double q = pquad_[static_cast<size_t>(j)];
      if (q <= 0.0) continue;
      const double l = plo_[static_cast<size_t>(j)], h = phi_[static_cast<size_t>(j)];
      double tlo = 0.0;
      if (l > 0.0) tlo = q * l * l;
      if (h < 0.0) tlo = q * h * h;
      QuadVar qv;
      qv.var = j;
      qv.q = q;
      qv.epi_col = new_col(tlo, kLpInf, 1.0);
      quad_.push_back(qv);
      const double a = (l > -kLpInf) ? l : -std::max(1.0, (h < kLpInf) ? std::abs(h) : 0.0);
      const double b = (h < kLpInf) ? h : std::max(1.0, (l > -kLpInf) ? std::abs(l) : 0.0);
      add_tangent(quad_.back(), a);
      add_tangent(quad_.back(), 0.5 * (a + b));
      add_tangent(quad_.back(), b);
    }
    rebuild_slack_cols();
    opt_tol_scaled_ = opt_.opt_tol;
    for (double c : ccost_) opt_tol_scaled_ = std::max(opt_tol_scaled_, opt_.opt_tol * std::abs(c));
  }

  int new_col(double l, double h, double cost) {
    col_.emplace_back();
    clo_.push_back(l);
    chi_.push_back(h);
    ccost_.push_back(cost);
    stat_.push_back(kAtLo);
    nbval_.push_back(0.0);
    in_row_.push_back(-1);
    d_.push_back(0.0);
    art_.push_back(0);
    tight_col_.push_back(0);
    return ncol_++;
  }

  int new_row(bool is_eq, double rhs, bool is_cut = false) {
    rhs_.push_back(rhs);
    row_eq_.push_back(is_eq ? 1 : 0);
    cut_row_.push_back(is_cut ? 1 : 0);
    slack_col_.push_back(-1);
    return m_++;
  }

  void rebuild_slack_cols() {
    for (int r = 0; r < m_; ++r) {
      if (slack_col_[static_cast<size_t>(r)] >= 0) continue;
      const double hi = row_eq_[static_cast<size_t>(r)] ? 0.0 : kLpInf;
      const int c = new_col(0.0, hi, 0.0);
      col_[static_cast<size_t>(c)].emplace_back(r, 1.0);
      slack_col_[static_cast<size_t>(r)] = c;
      tight_col_[static_cast<size_t>(c)] = cut_row_[static_cast<size_t>(r)];
    }
  }

  // Epigraph cut slacks must be policed far below the general feasibility
  // tolerance or the objective refinement bottoms out at that tolerance.
  static constexpr double kCutFeasTol = 1e-11;

  double col_feas_tol(int c) const {
    return tight_col_[static_cast<size_t>(c)] ? kCutFeasTol : opt_.feas_tol;
  }

  struct QuadVar {
    int var{-1};
    double q{0.0};
    int epi_col{-1};
    std::vector<double> tangents;
  };

  // t >= q (2 xbar x - xbar^2) written as 2 q xbar x - t <= q xbar^2.
  bool add_tangent(QuadVar& qv, double xbar) {
    for (double t : qv.tangents) {
      if (std::abs(t - xbar) <= 1e-9 * std::max(1.0, std::abs(xbar))) return false;
    }
    qv.tangents.push_back(xbar);
    // A tangent placed at the incumbent point violates the new row by exactly
    // the model gap, which near convergence sits far below the general row
    // tolerance; cut rows are exact by construction, so their slacks carry a
    // tight tolerance or refinement would stall at the general one.
    const int r = new_row(false, qv.q * xbar * xbar, true);
    const int xc = col_of_[static_cast<size_t>(qv.var)];
    col_[static_cast<size_t>(xc)].emplace_back(r, 2.0 * qv.q * xbar);
    col_[static_cast<size_t>(qv.epi_col)].emplace_back(r, -1.0);
    if (basis_ready_) attach_row_to_basis(r);
    return true;
  }

  // ---- value and basis bookkeeping ---------------------------------------

  double col_value(int c) const {
    return stat_[static_cast<size_t>(c)] == kBasic
               ? xb_[in_row_[static_cast<size_t>(c)]]
               : nbval_[static_cast<size_t>(c)];
  }

  void compute_rhs_eff() {
    rhs_eff_ = Eigen::Map<const Eigen::VectorXd>(rhs_.data(), m_);
    for (int c = 0; c < ncol_; ++c) {
      if (stat_[static_cast<size_t>(c)] == kBasic) continue;
      const double v = nbval_[static_cast<size_t>(c)];
      if (v == 0.0) continue;
      for (const auto& [r, a] : col_[static_cast<size_t>(c)]) rhs_eff_[r] -= a * v;
    }
  }

  // binv_ stores the transpose of the basis inverse: column r is row r of the
  // inverse, so the dual pivot row extraction is contiguous.
  Eigen::VectorXd ftran(int c) const {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(m_);
    for (const auto& [r, a] : col_[static_cast<size_t>(c)]) w += a * binv_.row(r).transpose();
    return w;
  }

  double row_dot(const Eigen::VectorXd& rho, int c) const {
    double s = 0.0;
    for (const auto& [r, a] : col_[static_cast<size_t>(c)]) s += a * rho[r];
    return s;
  }

  void refactor() {
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(m_, m_);
    for (int r = 0; r < m_; ++r) {
      const int c = basis_[static_cast<size_t>(r)];
      for (const auto& [rr, a] : col_[static_cast<size_t>(c)]) B(rr, r) = a;
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
    const Eigen::MatrixXd inv = lu.inverse();
    if (!inv.allFinite()) throw std::runtime_error("basis factorization failed");
    binv_ = inv.transpose();
    refresh_values();
    pivots_since_refactor_ = 0;
  }

  void recompute_reduced_costs(const std::vector<double>& cost) {
    Eigen::VectorXd cb(m_);
    for (int r = 0; r < m_; ++r) cb[r] = cost[static_cast<size_t>(basis_[static_cast<size_t>(r)])];
    const Eigen::VectorXd y = binv_ * cb;  // equals inverse-transpose times cb
    for (int c = 0; c < ncol_; ++c) {
      if (stat_[static_cast<size_t>(c)] == kBasic) {
        d_[static_cast<size_t>(c)] = 0.0;
      } else {
        d_[static_cast<size_t>(c)] = cost[static_cast<size_t>(c)] - row_dot(y, c);
      }
    }
  }

  void refresh_values() {
    compute_rhs_eff();
    xb_ = binv_.transpose() * rhs_eff_;
  }

  void attach_row_to_basis(int r) {
    // Bordered extension: the new row's slack becomes basic. The slack has
    // zero cost, so existing reduced costs are untouched.
    rebuild_slack_cols();
    const int sc = slack_col_[static_cast<size_t>(r)];
    binv_.conservativeResize(m_, m_);
    binv_.row(m_ - 1).setZero();
    binv_.col(m_ - 1).setZero();
    binv_(m_ - 1, m_ - 1) = 1.0;
    Eigen::VectorXd ab = Eigen::VectorXd::Zero(m_ - 1);
    for (int rr = 0; rr < m_ - 1; ++rr) {
      const int bc = basis_[static_cast<size_t>(rr)];
      for (const auto& [cr, a] : col_[static_cast<size_t>(bc)]) {
        if (cr == r) ab[rr] = a;
      }
    }
    binv_.col(m_ - 1).head(m_ - 1).noalias() = -(binv_.topLeftCorner(m_ - 1, m_ - 1) * ab);
    basis_.push_back(sc);
    stat_[static_cast<size_t>(sc)] = kBasic;
    in_row_[static_cast<size_t>(sc)] = m_ - 1;
    d_[static_cast<size_t>(sc)] = 0.0;
    rhs_eff_.conservativeResize(m_);
    xb_.conservativeResize(m_);
    double re = rhs_[static_cast<size_t>(r)];
    double v = rhs_[static_cast<size_t>(r)];
    for (int c = 0; c < ncol_; ++c) {
      if (c == sc) continue;
      for (const auto& [cr, a] : col_[static_cast<size_t>(c)]) {
        if (cr != r) continue;
        v -= a * col_value(c);
        if (stat_[static_cast<size_t>(c)] != kBasic) re -= a * nbval_[static_cast<size_t>(c)];
      }
    }
    rhs_eff_[m_ - 1] = re;
    xb_[m_ - 1] = v;
  }

  bool apply_bounds(int var, double vlo, double vhi) {
    if (vlo > vhi) return false;
    // With infeasibility proven at build time no LP exists to carry the edit,
    // and every solve reports Infeasible whatever the bounds say.
    if (proven_infeasible_) return true;
    const int c = col_of_[static_cast<size_t>(var)];
    if (c < 0) {
      const auto it = fixed_value_.find(var);
      if (it == fixed_value_.end()) {
        throw std::logic_error("cannot re-bound a variable eliminated by substitution");
      }
      return it->second >= vlo - 1e-9 && it->second <= vhi + 1e-9;
    }
    clo_[static_cast<size_t>(c)] = vlo;
    chi_[static_cast<size_t>(c)] = vhi;
    if (basis_ready_ && stat_[static_cast<size_t>(c)] != kBasic) {
      // Snap the nonbasic value to the nearest finite bound to keep the warm
      // start close to the previous point.
      const double old = nbval_[static_cast<size_t>(c)];
      if (vlo == -kLpInf && vhi == kLpInf) {
        stat_[static_cast<size_t>(c)] = kFree0;
        nbval_[static_cast<size_t>(c)] = 0.0;
      } else if (vlo == -kLpInf) {
        stat_[static_cast<size_t>(c)] = kAtUp;
        nbval_[static_cast<size_t>(c)] = vhi;
      } else if (vhi == kLpInf) {
        stat_[static_cast<size_t>(c)] = kAtLo;
        nbval_[static_cast<size_t>(c)] = vlo;
      } else {
        const bool to_lo = std::abs(old - vlo) <= std::abs(old - vhi);
        stat_[static_cast<size_t>(c)] = to_lo ? kAtLo : kAtUp;
        nbval_[static_cast<size_t>(c)] = to_lo ? vlo : vhi;
      }
      values_stale_ = true;
    }
    return true;
  }

  void check_var(int var) const {
    if (var < 0 || var >= n_orig_) throw std::out_of_range("variable index outside the problem");
  }

  // ---- feasibility measures ----------------------------------------------

  double dual_tol() const { return opt_tol_scaled_; }

  double worst_dual_violation() const {
    double w = 0.0;
    for (int c = 0; c < ncol_; ++c) {
      if (stat_[static_cast<size_t>(c)] == kBasic) continue;
      if (clo_[static_cast<size_t>(c)] == chi_[static_cast<size_t>(c)]) continue;
      const double dc = d_[static_cast<size_t>(c)];
      switch (stat_[static_cast<size_t>(c)]) {
        case kAtLo:
          w = std::max(w, -dc);
          break;
        case kAtUp:
          w = std::max(w, dc);
          break;
        default:
          w = std::max(w, std::abs(dc));
          break;
      }
    }
    return w;
  }

  double primal_violation() {
    if (values_stale_) {
      refresh_values();
      values_stale_ = false;
    }
    double w = 0.0;
    for (int r = 0; r < m_; ++r) {
      const int bc = basis_[static_cast<size_t>(r)];
      w = std::max(w, clo_[static_cast<size_t>(bc)] - xb_[r]);
      w = std::max(w, xb_[r] - chi_[static_cast<size_t>(bc)]);
    }
    return w;
  }

  /// Flips nonbasic columns whose reduced cost sign no longer matches their
  /// bound after an edit. Returns false when an unflippable column remains.
  bool restore_dual_feasibility() {
    bool ok = true;
    const double tol = dual_tol();
    for (int c = 0; c < ncol_; ++c) {
      if (stat_[static_cast<size_t>(c)] == kBasic) continue;
      if (clo_[static_cast<size_t>(c)] == chi_[static_cast<size_t>(c)]) continue;
      const double dc = d_[static_cast<size_t>(c)];
      if (stat_[static_cast<size_t>(c)] == kAtLo && dc < -tol) {
        if (chi_[static_cast<size_t>(c)] < kLpInf) {
          stat_[static_cast<size_t>(c)] = kAtUp;
          nbval_[static_cast<size_t>(c)] = chi_[static_cast<size_t>(c)];
          values_stale_ = true;
        } else {
          ok = false;
        }
      } else if (stat_[static_cast<size_t>(c)] == kAtUp && dc > tol) {
        if (clo_[static_cast<size_t>(c)] > -kLpInf) {
          stat_[static_cast<size_t>(c)] = kAtLo;
          nbval_[static_cast<size_t>(c)] = clo_[static_cast<size_t>(c)];
          values_stale_ = true;
        } else {
          ok = false;
        }
      } else if (stat_[static_cast<size_t>(c)] == kFree0 && std::abs(dc) > tol) {
        ok = false;
      }
    }
    return ok;
  }

  // ---- cold start --------------------------------------------------------

  LpStatus cold_core() {
    cold_start();
    LpStatus s = primal_phase1();
    if (s != LpStatus::Optimal) return s;
    return primal_loop();
  }

  void cold_start() {
    for (int c = 0; c < ncol_; ++c) {
      if (art_[static_cast<size_t>(c)]) clo_[static_cast<size_t>(c)] = chi_[static_cast<size_t>(c)] = 0.0;
    }
    for (int c = 0; c < ncol_; ++c) {
      in_row_[static_cast<size_t>(c)] = -1;
      if (clo_[static_cast<size_t>(c)] > -kLpInf) {
        stat_[static_cast<size_t>(c)] = kAtLo;
        nbval_[static_cast<size_t>(c)] = clo_[static_cast<size_t>(c)];
      } else if (chi_[static_cast<size_t>(c)] < kLpInf) {
        stat_[static_cast<size_t>(c)] = kAtUp;
        nbval_[static_cast<size_t>(c)] = chi_[static_cast<size_t>(c)];
      } else {
        stat_[static_cast<size_t>(c)] = kFree0;
        nbval_[static_cast<size_t>(c)] = 0.0;
      }
    }
    basis_.assign(static_cast<size_t>(m_), -1);
    binv_ = Eigen::MatrixXd::Identity(m_, m_);
    for (int r = 0; r < m_; ++r) {
      const int sc = slack_col_[static_cast<size_t>(r)];
      basis_[static_cast<size_t>(r)] = sc;
      stat_[static_cast<size_t>(sc)] = kBasic;
      in_row_[static_cast<size_t>(sc)] = r;
    }
    compute_rhs_eff();
    xb_ = rhs_eff_;
    phase1_cost_.assign(static_cast<size_t>(ncol_), 0.0);
    for (int r = 0; r < m_; ++r) {
      const int sc = slack_col_[static_cast<size_t>(r)];
      const double v = xb_[r];
      const double lo = clo_[static_cast<size_t>(sc)], hi = chi_[static_cast<size_t>(sc)];
      if (v >= lo - opt_.feas_tol && v <= hi + opt_.feas_tol) continue;
      const double t = std::min(std::max(v, lo), hi);
      stat_[static_cast<size_t>(sc)] = (t == lo) ? kAtLo : kAtUp;
      nbval_[static_cast<size_t>(sc)] = t;
      in_row_[static_cast<size_t>(sc)] = -1;
      const double sg = (v > t) ? 1.0 : -1.0;
      const int ac = new_col(0.0, kLpInf, 0.0);
      art_[static_cast<size_t>(ac)] = 1;
      col_[static_cast<size_t>(ac)].emplace_back(r, sg);
      phase1_cost_.resize(static_cast<size_t>(ncol_), 0.0);
      phase1_cost_[static_cast<size_t>(ac)] = 1.0;
      basis_[static_cast<size_t>(r)] = ac;
      stat_[static_cast<size_t>(ac)] = kBasic;
      in_row_[static_cast<size_t>(ac)] = r;
      binv_(r, r) = sg;
      rhs_eff_[r] -= t;
      xb_[r] = sg * rhs_eff_[r];
    }
    basis_ready_ = true;
    values_stale_ = false;
    pivots_since_refactor_ = 0;
  }

  LpStatus primal_phase1() {
    bool any = false;
    for (double c : phase1_cost_) any |= (c != 0.0);
    if (!any) {
      recompute_reduced_costs(ccost_);
      return LpStatus::Optimal;
    }
    recompute_reduced_costs(phase1_cost_);
    const LpStatus s = primal_iterate(phase1_cost_);
    if (s != LpStatus::Optimal) {
      return s == LpStatus::Unbounded ? LpStatus::Infeasible : s;
    }
    double infeas = 0.0;
    for (int c = 0; c < ncol_; ++c) {
      if (art_[static_cast<size_t>(c)]) infeas += col_value(c);
    }
    double scale = 1.0;
    for (double b : rhs_) scale = std::max(scale, std::abs(b));
    if (infeas > 1e-7 * scale) return LpStatus::Infeasible;
    for (int c = 0; c < ncol_; ++c) {
      if (!art_[static_cast<size_t>(c)]) continue;
      clo_[static_cast<size_t>(c)] = chi_[static_cast<size_t>(c)] = 0.0;
      if (stat_[static_cast<size_t>(c)] != kBasic) nbval_[static_cast<size_t>(c)] = 0.0;
    }
    recompute_reduced_costs(ccost_);
    return LpStatus::Optimal;
  }

  // ---- primal simplex ----------------------------------------------------

  LpStatus primal_loop() {
    if (values_stale_) {
      refresh_values();
      values_stale_ = false;
    }
    recompute_reduced_costs(ccost_);
    return primal_iterate(ccost_);
  }

  LpStatus primal_iterate(const std::vector<double>& cost) {
    long stall = 0;
    bool bland = false;
    bool verified = false;
    double last_obj = std::numeric_limits<double>::infinity();
    for (long it = 0; it < opt_.iter_cap; ++it, ++iters_) {
      if (pivots_since_refactor_ >= opt_.refactor_every) {
        refactor();
        recompute_reduced_costs(cost);
      }
      int e = -1;
      double best = dual_tol();
      for (int c = 0; c < ncol_; ++c) {
        if (stat_[static_cast<size_t>(c)] == kBasic) continue;
        if (clo_[static_cast<size_t>(c)] == chi_[static_cast<size_t>(c)]) continue;
        const double dc = d_[static_cast<size_t>(c)];
        double viol = 0.0;
        switch (stat_[static_cast<size_t>(c)]) {
          case kAtLo:
            viol = -dc;
            break;
          case kAtUp:
            viol = dc;
            break;
          default:
            viol = std::abs(dc);
            break;
        }
        if (viol > best) {
          e = c;
          if (bland) break;
          best = viol;
        }
      }
      if (e < 0) {
        // Recompute exactly once before declaring optimality; incremental
        // reduced costs drift between refactorizations.
        if (!verified) {
          refactor();
          recompute_reduced_costs(cost);
          verified = true;
          continue;
        }
        return LpStatus::Optimal;
      }
      const double de = d_[static_cast<size_t>(e)];
      const double s = (stat_[static_cast<size_t>(e)] == kAtUp)   ? -1.0
                       : (stat_[static_cast<size_t>(e)] == kAtLo) ? 1.0
                                                                  : (de > 0.0 ? -1.0 : 1.0);
      const Eigen::VectorXd w = ftran(e);
      double theta_cap = kLpInf;
      for (int r = 0; r < m_; ++r) {
        const int bc = basis_[static_cast<size_t>(r)];
        const double den = s * w[r];
        if (den > opt_.pivot_tol) {
          const double lo = clo_[static_cast<size_t>(bc)];
          if (lo > -kLpInf) theta_cap = std::min(theta_cap, (xb_[r] - lo + opt_.feas_tol) / den);
        } else if (den < -opt_.pivot_tol) {
          const double hi = chi_[static_cast<size_t>(bc)];
          if (hi < kLpInf) theta_cap = std::min(theta_cap, (xb_[r] - hi - opt_.feas_tol) / den);
        }
      }
      int lr = -1;
      double theta = kLpInf, lr_den = 0.0;
      bool leave_to_lo = true;
      for (int r = 0; r < m_; ++r) {
        const int bc = basis_[static_cast<size_t>(r)];
        const double den = s * w[r];
        double t = kLpInf;
        bool to_lo = true;
        if (den > opt_.pivot_tol) {
          const double lo = clo_[static_cast<size_t>(bc)];
          if (lo > -kLpInf) t = (xb_[r] - lo) / den;
        } else if (den < -opt_.pivot_tol) {
          const double hi = chi_[static_cast<size_t>(bc)];
          if (hi < kLpInf) {
            t = (xb_[r] - hi) / den;
            to_lo = false;
          }
        }
        if (t >= kLpInf || t > theta_cap) continue;
        bool take;
        if (bland) {
          take = (lr < 0) || t < theta ||
                 (t <= theta && bc < basis_[static_cast<size_t>(lr)]);
        } else {
          take = (lr < 0) || std::abs(den) > std::abs(lr_den) + 1e-12 ||
                 (std::abs(den) > std::abs(lr_den) - 1e-12 && bc < basis_[static_cast<size_t>(lr)]);
        }
        if (take) {
          lr = r;
          theta = t;
          lr_den = den;
          leave_to_lo = to_lo;
        }
      }
      const double range = chi_[static_cast<size_t>(e)] - clo_[static_cast<size_t>(e)];
      if (lr < 0 && !(range < kLpInf)) {
        // An unbounded verdict also deserves an exact recomputation: a drifted
        // reduced cost can nominate a column that is really basic-degenerate.
        if (!verified) {
          refactor();
          recompute_reduced_costs(cost);
          verified = true;
          continue;
        }
        return LpStatus::Unbounded;
      }
      verified = false;
      if (lr >= 0) theta = std::max(theta, 0.0);
      if (range < kLpInf && (lr < 0 || range <= theta)) {
        const double delta = s * range;
        for (const auto& [r, a] : col_[static_cast<size_t>(e)]) rhs_eff_[r] -= a * delta;
        xb_ -= delta * w;
        stat_[static_cast<size_t>(e)] = (s > 0.0) ? kAtUp : kAtLo;
        nbval_[static_cast<size_t>(e)] += delta;
      } else {
        pivot(e, lr, w, s * theta, leave_to_lo);
      }
      const double obj = current_cost(cost);
      if (obj < last_obj - 1e-10 * (1.0 + std::abs(last_obj))) {
        stall = 0;
        bland = false;
      } else if (++stall > opt_.stall_window) {
        bland = true;
      }
      last_obj = obj;
    }
    return LpStatus::IterLimit;
  }

  double current_cost(const std::vector<double>& cost) const {
    double v = 0.0;
    for (int c = 0; c < ncol_; ++c) {
      const double cc = cost[static_cast<size_t>(c)];
      if (cc != 0.0) v += cc * col_value(c);
    }
    return v;
  }

  void pivot(int e, int lr, const Eigen::VectorXd& w, double delta, bool leave_to_lo) {
    const int leaving = basis_[static_cast<size_t>(lr)];
    const double alpha = w[lr];
    if (std::abs(alpha) < 1e-12) throw std::runtime_error("degenerate pivot element");
    const Eigen::VectorXd rho = binv_.col(lr);  // row lr of the basis inverse
    const double ratio = d_[static_cast<size_t>(e)] / alpha;
    if (ratio != 0.0) {
      for (int c = 0; c < ncol_; ++c) {
        if (stat_[static_cast<size_t>(c)] == kBasic || c == e) continue;
        const double a = row_dot(rho, c);
        if (a != 0.0) d_[static_cast<size_t>(c)] -= ratio * a;
      }
    }
    d_[static_cast<size_t>(leaving)] = -ratio;
    d_[static_cast<size_t>(e)] = 0.0;
    const double enter_new = col_value(e) + delta;
    double leave_new = leave_to_lo ? clo_[static_cast<size_t>(leaving)]
                                   : chi_[static_cast<size_t>(leaving)];
    Stat leave_stat = leave_to_lo ? kAtLo : kAtUp;
    if (clo_[static_cast<size_t>(leaving)] == -kLpInf &&
        chi_[static_cast<size_t>(leaving)] == kLpInf) {
      leave_stat = kFree0;
      leave_new = 0.0;
    }
    xb_ -= delta * w;
    xb_[lr] = enter_new;
    for (const auto& [r, a] : col_[static_cast<size_t>(e)]) {
      rhs_eff_[r] += a * nbval_[static_cast<size_t>(e)];
    }
    for (const auto& [r, a] : col_[static_cast<size_t>(leaving)]) {
      rhs_eff_[r] -= a * leave_new;
    }
    stat_[static_cast<size_t>(leaving)] = leave_stat;
    nbval_[static_cast<size_t>(leaving)] = leave_new;
    in_row_[static_cast<size_t>(leaving)] = -1;
    basis_[static_cast<size_t>(lr)] = e;
    stat_[static_cast<size_t>(e)] = kBasic;
    in_row_[static_cast<size_t>(e)] = lr;
    binv_.col(lr) /= alpha;
    for (int r = 0; r < m_; ++r) {
      if (r == lr) continue;
      const double f = w[r];
      if (f != 0.0) binv_.col(r) -= f * binv_.col(lr);
    }
    ++pivots_since_refactor_;
  }

  // ---- dual simplex ------------------------------------------------------

  LpStatus dual_loop() {
    long stall = 0;
    bool bland = false;
    bool verified = false;
    double last_infeas = std::numeric_limits<double>::infinity();
    for (long it = 0; it < opt_.iter_cap; ++it, ++iters_) {
      if (pivots_since_refactor_ >= opt_.refactor_every) {
        refactor();
        recompute_reduced_costs(ccost_);
      }
      int lr = -1;
      double worst = 0.0;
      bool below = true;
      double total_infeas = 0.0;
      for (int r = 0; r < m_; ++r) {
        const int bc = basis_[static_cast<size_t>(r)];
        const double ctol = col_feas_tol(bc);
        const double vlo = clo_[static_cast<size_t>(bc)] - xb_[r];
        const double vhi = xb_[r] - chi_[static_cast<size_t>(bc)];
        total_infeas += std::max({vlo, vhi, 0.0});
        if (vlo - ctol > worst) {
          worst = vlo - ctol;
          lr = r;
          below = true;
          if (bland) break;
        }
        if (vhi - ctol > worst) {
          worst = vhi - ctol;
          lr = r;
          below = false;
          if (bland) break;
        }
      }
      if (lr < 0) {
        if (!verified) {
          refactor();
          recompute_reduced_costs(ccost_);
          verified = true;
          continue;
        }
        return LpStatus::Optimal;
      }
      if (total_infeas < last_infeas - 1e-10 * (1.0 + last_infeas)) {
        stall = 0;
        bland = false;
      } else if (++stall > opt_.stall_window) {
        bland = true;
      }
      last_infeas = total_infeas;
      const Eigen::VectorXd rho = binv_.col(lr);
      // Ratio test keeping reduced costs dual feasible. For a basic below its
      // lower bound the entering move must raise row lr, which fixes the
      // admissible sign of alpha per nonbasic status.
      int e = -1;
      double e_alpha = 0.0;
      double cap = kLpInf;
      for (int pass = 0; pass < 2; ++pass) {
        for (int c = 0; c < ncol_; ++c) {
          if (stat_[static_cast<size_t>(c)] == kBasic) continue;
          if (clo_[static_cast<size_t>(c)] == chi_[static_cast<size_t>(c)]) continue;
          const double a = row_dot(rho, c);
          if (std::abs(a) <= opt_.pivot_tol) continue;
          const Stat st = static_cast<Stat>(stat_[static_cast<size_t>(c)]);
          bool ok = false;
          if (st == kFree0) {
            ok = true;
          } else if (below) {
            ok = (st == kAtLo && a < 0.0) || (st == kAtUp && a > 0.0);
          } else {
            ok = (st == kAtLo && a > 0.0) || (st == kAtUp && a < 0.0);
          }
          if (!ok) continue;
          const double ratio = std::max(0.0, std::abs(d_[static_cast<size_t>(c)]) / std::abs(a));
          if (pass == 0) {
            cap = std::min(cap, ratio + 1e-9 * (1.0 + ratio));
          } else if (ratio <= cap) {
            bool take;
            if (bland) {
              take = (e < 0) || c < e;
            } else {
              take = (e < 0) || std::abs(a) > std::abs(e_alpha) + 1e-12 ||
                     (std::abs(a) > std::abs(e_alpha) - 1e-12 && c < e);
            }
            if (take) {
              e = c;
              e_alpha = a;
            }
          }
        }
        if (pass == 0 && cap == kLpInf) break;
      }
      if (e < 0) {
        // Primal infeasibility is proven by a dual ray; require the claim to
        // survive an exact refactorization before reporting it.
        if (!verified) {
          refactor();
          recompute_reduced_costs(ccost_);
          verified = true;
          continue;
        }
        return LpStatus::Infeasible;
      }
      const double bound = below ? clo_[static_cast<size_t>(basis_[static_cast<size_t>(lr)])]
                                 : chi_[static_cast<size_t>(basis_[static_cast<size_t>(lr)])];
      const Eigen::VectorXd w = ftran(e);
      const double alpha = w[lr];
      if (std::abs(alpha) < 1e-11) {
        refactor();
        recompute_reduced_costs(ccost_);
        verified = true;
        continue;
      }
      const double delta = (xb_[lr] - bound) / alpha;
      pivot(e, lr, w, delta, below);
      verified = false;
    }
    return LpStatus::IterLimit;
  }

  // ---- quadratic refinement ---------------------------------------------

  LpStatus refine_cuts() {
    if (quad_.empty()) return LpStatus::Optimal;
    double prev_gap = std::numeric_limits<double>::infinity();
    const int rounds = (cut_round_cap_ >= 0) ? std::min(cut_round_cap_, opt_.max_cut_rounds)
                                             : opt_.max_cut_rounds;
    for (int round = 0; round < rounds; ++round) {
      const double tol = refine_rel_ * std::max(1.0, std::abs(bound_objective()));
      double gap_total = 0.0;
      bool added = false;
      for (auto& qv : quad_) {
        const double x = col_value(col_of_[static_cast<size_t>(qv.var)]);
        const double t = col_value(qv.epi_col);
        const double gap = qv.q * x * x - t;
        gap_total += std::max(gap, 0.0);
        if (gap > tol / (2.0 * static_cast<double>(quad_.size()))) {
          added |= add_tangent(qv, x);
        }
      }
      if (gap_total <= tol) return LpStatus::Optimal;
      // With every wanted cut deduplicated, progress can only come from the
      // dual pass repairing a violated existing cut; stop once that dries up.
      if (!added && gap_total >= prev_gap - 1e-12 * (1.0 + prev_gap)) return LpStatus::Optimal;
      prev_gap = gap_total;
      const LpStatus s = dual_loop();
      if (s != LpStatus::Optimal) return s;
    }
    return LpStatus::Optimal;
  }

  // ---- state -------------------------------------------------------------

  SimplexOptions opt_;
  int n_orig_{0};
  bool proven_infeasible_{false};
  bool basis_ready_{false};
  bool values_stale_{false};
  LpStatus last_{LpStatus::IterLimit};
  long iters_{0};
  int pivots_since_refactor_{0};
  double obj_offset_{0.0};
  double refine_rel_{1e-9};
  int cut_round_cap_{-1};
  double opt_tol_scaled_{1e-7};
  int box_infeasible_count_{0};

  std::vector<double> base_lo_, base_hi_;
  std::vector<double> orig_lin_, orig_quad_;
  std::vector<double> plo_, phi_, plin_, pquad_;
  std::vector<char> gone_;
  std::vector<PostRec> post_;
  std::map<int, double> fixed_value_;
  std::vector<PRow> kept_rows_;
  std::vector<Override> override_;

  int m_{0}, ncol_{0};
  std::vector<std::vector<std::pair<int, double>>> col_;
  std::vector<double> clo_, chi_, ccost_, phase1_cost_;
  std::vector<double> rhs_;
  std::vector<char> row_eq_;
  std::vector<char> cut_row_;
  std::vector<int> slack_col_;
  std::vector<int> col_of_;
  std::vector<QuadVar> quad_;
  std::vector<char> art_;
  std::vector<char> tight_col_;

  std::vector<int> basis_;
  std::vector<int8_t> stat_;
  std::vector<double> nbval_;
  std::vector<int> in_row_;
  std::vector<double> d_;
  Eigen::MatrixXd binv_;  // transpose of the basis inverse
  Eigen::VectorXd xb_, rhs_eff_;
};

/// Solves a problem as a pure LP; binary flags are ignored, their box bounds
/// stay. Optimal to 1e-8 relative on the objective including the
/// quadratic-diagonal terms.
inline Solution lp_solve(const MilpProblem& p, SimplexOptions opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  LpEngine eng(p, opt);
  eng.set_refine_tol(1e-9);
  const LpStatus s = eng.solve();
  Solution out;
  out.nodes = 0;
  switch (s) {
    case LpStatus::Optimal:
      out.status = SolveStatus::Optimal;
      out.assignment = eng.assignment();
      out.objective = eng.true_objective();
      break;
    case LpStatus::Infeasible:
      out.status = SolveStatus::Infeasible;
      break;
    case LpStatus::Unbounded:
      throw std::runtime_error("unbounded LP");
    case LpStatus::IterLimit:
      out.status = SolveStatus::TimeLimit;
      break;
  }
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace ramp
