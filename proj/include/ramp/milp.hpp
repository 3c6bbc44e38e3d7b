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
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ramp {

inline constexpr double kLpInf = std::numeric_limits<double>::infinity();

enum class RowSense { Le, Eq };

enum class SolveStatus { Optimal, Infeasible, TimeLimit };

/// Mixed-integer program with a quadratic-diagonal objective:
///   minimize  lin_cost . x + sum_j quad_cost[j] x_j^2
/// subject to sparse rows (<= or =), box bounds, and integrality on the
/// variables flagged binary. Binary variables keep box bounds inside [0, 1];
/// a fixed box such as [1, 1] is how an encoder pins one without a row.
struct MilpProblem {
  std::vector<double> lo, hi;
  std::vector<double> lin_cost, quad_cost;
  std::vector<char> binary;
  std::vector<std::string> names;

  struct Row {
    std::vector<int> idx;
    std::vector<double> val;
    RowSense sense{RowSense::Le};
    double rhs{0.0};
  };
  std::vector<Row> rows;

  int num_vars() const { return static_cast<int>(lo.size()); }
  int num_binary() const {
    return static_cast<int>(std::count(binary.begin(), binary.end(), char(1)));
  }

  int add_var(std::string name, double vlo, double vhi, bool is_binary = false) {
    const int id = num_vars();
    if (name.empty()) name = "v" + std::to_string(id);
    lo.push_back(vlo);
    hi.push_back(vhi);
    lin_cost.push_back(0.0);
    quad_cost.push_back(0.0);
    binary.push_back(is_binary ? 1 : 0);
    names.push_back(std::move(name));
    return id;
  }

  /// Terms are coalesced and sorted by variable index so that equal problems
  /// produce byte-identical dumps.
  void add_row(std::vector<int> idx, std::vector<double> val, RowSense sense, double rhs) {
    if (idx.size() != val.size()) throw std::invalid_argument("row index/value length mismatch");
    std::vector<std::pair<int, double>> terms;
    terms.reserve(idx.size());
    for (size_t i = 0; i < idx.size(); ++i) terms.emplace_back(idx[i], val[i]);
    std::sort(terms.begin(), terms.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    Row row;
    row.sense = sense;
    row.rhs = rhs;
    for (const auto& [j, v] : terms) {
      if (!row.idx.empty() && row.idx.back() == j) {
        row.val.back() += v;
      } else {
        row.idx.push_back(j);
        row.val.push_back(v);
      }
    }
    rows.push_back(std::move(row));
  }

  void validate() const {
    const int n = num_vars();
    for (int j = 0; j < n; ++j) {
      if (std::isnan(lo[j]) || std::isnan(hi[j]) || lo[j] > hi[j]) {
        throw std::invalid_argument("bad bounds on variable " + names[static_cast<size_t>(j)]);
      }
      if (binary[static_cast<size_t>(j)] && (lo[j] < 0.0 || hi[j] > 1.0)) {
        throw std::invalid_argument("binary variable " + names[static_cast<size_t>(j)] +
                                    " has bounds outside [0, 1]");
      }
      if (!(quad_cost[static_cast<size_t>(j)] >= 0.0)) {
        throw std::invalid_argument("negative quadratic cost on variable " +
                                    names[static_cast<size_t>(j)]);
      }
      if (!std::isfinite(lin_cost[static_cast<size_t>(j)])) {
        throw std::invalid_argument("non-finite cost on variable " + names[static_cast<size_t>(j)]);
      }
    }
    for (size_t i = 0; i < rows.size(); ++i) {
      const Row& row = rows[i];
      if (!std::isfinite(row.rhs)) throw std::invalid_argument("non-finite rhs in row " + std::to_string(i));
      for (size_t t = 0; t < row.idx.size(); ++t) {
        if (row.idx[t] < 0 || row.idx[t] >= n) {
          throw std::invalid_argument("row " + std::to_string(i) + " references unknown variable");
        }
        if (!std::isfinite(row.val[t])) {
          throw std::invalid_argument("non-finite coefficient in row " + std::to_string(i));
        }
      }
    }
  }

  /// LP text dump for diffing; ordering and formatting are deterministic
  /// functions of the problem contents alone.
  std::string dump_lp() const;
};

namespace detail {

inline std::string lp_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace detail

inline std::string MilpProblem::dump_lp() const {
  std::string out;
  out += "Minimize\n obj:";
  bool any = false;
  for (int j = 0; j < num_vars(); ++j) {
    const double c = lin_cost[static_cast<size_t>(j)];
    if (c == 0.0) continue;
    out += (c < 0.0) ? " - " : (any ? " + " : " ");
    out += detail::lp_num(std::abs(c)) + " " + names[static_cast<size_t>(j)];
    any = true;
  }
  bool any_quad = false;
  for (int j = 0; j < num_vars(); ++j) {
    const double q = quad_cost[static_cast<size_t>(j)];
    if (q == 0.0) continue;
    out += any_quad ? " + " : (any ? " + [ " : " [ ");
    out += detail::lp_num(2.0 * q) + " " + names[static_cast<size_t>(j)] + " ^ 2";
    any_quad = true;
  }
  if (any_quad) out += " ] / 2";
  if (!any && !any_quad) out += " 0 " + (num_vars() ? names[0] : std::string("none"));
  out += "\nSubject To\n";
  for (size_t i = 0; i < rows.size(); ++i) {
    const Row& row = rows[i];
    out += " c" + std::to_string(i) + ":";
    bool first = true;
    for (size_t t = 0; t < row.idx.size(); ++t) {
      const double v = row.val[t];
      if (v == 0.0) continue;
      out += (v < 0.0) ? " - " : (first ? " " : " + ");
      out += detail::lp_num(std::abs(v)) + " " + names[static_cast<size_t>(row.idx[t])];
      first = false;
    }
    if (first) out += " 0 " + names[0];
    out += (row.sense == RowSense::Le) ? " <= " : " = ";
    out += detail::lp_num(row.rhs) + "\n";
  }
  out += "Bounds\n";
  for (int j = 0; j < num_vars(); ++j) {
    const double l = lo[static_cast<size_t>(j)], h = hi[static_cast<size_t>(j)];
    const std::string& nm = names[static_cast<size_t>(j)];
    if (l == h) {
      out += " " + nm + " = " + detail::lp_num(l) + "\n";
    } else if (l == -kLpInf && h == kLpInf) {
      out += " " + nm + " free\n";
    } else if (h == kLpInf) {
      out += " " + nm + " >= " + detail::lp_num(l) + "\n";
    } else if (l == -kLpInf) {
      out += " " + nm + " <= " + detail::lp_num(h) + "\n";
    } else {
      out += " " + detail::lp_num(l) + " <= " + nm + " <= " + detail::lp_num(h) + "\n";
    }
  }
  if (num_binary() > 0) {
    out += "Binaries\n";
    for (int j = 0; j < num_vars(); ++j) {
      if (binary[static_cast<size_t>(j)]) out += " " + names[static_cast<size_t>(j)] + "\n";
    }
  }
  out += "End\n";
  return out;
}

struct Solution {
  SolveStatus status{SolveStatus::Infeasible};
  Eigen::VectorXd assignment;
  double objective{std::numeric_limits<double>::infinity()};
  long nodes{0};
  double wall_seconds{0.0};
};

struct SolveLimits {
  double time_seconds{60.0};
  long node_cap{1000000};
};

/// Warm-start hint: binding suggestions for binary variables, used to seed an
/// incumbent dive. Entries outside [0, 1] or on non-binary variables are an
/// error at the backend.
using BinaryHint = std::vector<std::pair<int, double>>;

/// Plug point so an external engine can replace the built-in solver without
/// touching the encoder.
class MilpBackend {
 public:
  virtual ~MilpBackend() = default;
  virtual Solution solve(const MilpProblem& p, const SolveLimits& limits,
                         const BinaryHint* hint) = 0;
};

}  // namespace ramp
