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

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>
#include <vector>

#include "ramp/belief.hpp"
#include "ramp/stl.hpp"

namespace ramp {

/// Concrete syntax:
///   formula := or_chain
///   or      := and ('|' and)*
///   and     := until ('&' until)*
///   until   := unary ('U[a,b]' unary)?          (non-associative)
///   unary   := ('!' | 'G[a,b]' | 'F[a,b]') unary | atom
///   atom    := 'true' | 'lin(c1,...,cd; offset)'
///            | 'bel(a1,...; g1,...; beta; eps; gaussian|dr|mean)'
///            | '(' formula ')'
/// Windows are inclusive integer step ranges. print_formula and parse_formula
/// round-trip: parse(print(f)) is structurally equal to f.

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

class FormulaParser {
 public:
  explicit FormulaParser(const std::string& text) : text_(text) {}

  Formula parse() {
    Formula f = parse_or();
    skip_ws();
    if (pos_ != text_.size()) fail("trailing input");
    return f;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw std::invalid_argument("formula parse error at offset " + std::to_string(pos_) + ": " +
                                what);
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!eat(c)) fail(std::string("expected '") + c + "'");
  }

  bool eat_word(const char* w) {
    skip_ws();
    const size_t n = std::strlen(w);
    if (text_.compare(pos_, n, w) != 0) return false;
    const char after = pos_ + n < text_.size() ? text_[pos_ + n] : '\0';
    if (std::isalnum(static_cast<unsigned char>(after)) || after == '_') return false;
    pos_ += n;
    return true;
  }

  double number() {
    skip_ws();
    const char* start = text_.c_str() + pos_;
    char* end = nullptr;
    const double v = std::strtod(start, &end);
    if (end == start) fail("expected number");
    pos_ += static_cast<size_t>(end - start);
    return v;
  }

  int integer() {
    skip_ws();
    const char* start = text_.c_str() + pos_;
    char* end = nullptr;
    const long v = std::strtol(start, &end, 10);
    if (end == start) fail("expected integer");
    pos_ += static_cast<size_t>(end - start);
    return static_cast<int>(v);
  }

  std::pair<int, int> window() {
    expect('[');
    const int a = integer();
    expect(',');
    const int b = integer();
    expect(']');
    if (a < 0 || b < a) fail("bad temporal window");
    return {a, b};
  }

  std::vector<double> number_list() {
    std::vector<double> vs{number()};
    while (eat(',')) vs.push_back(number());
    return vs;
  }

  static Eigen::VectorXd to_vec(const std::vector<double>& vs) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(vs.size()));
    for (size_t i = 0; i < vs.size(); ++i) v[static_cast<Eigen::Index>(i)] = vs[i];
    return v;
  }

  Formula parse_or() {
    std::vector<Formula> ops{parse_and()};
    while (eat('|')) ops.push_back(parse_and());
    if (ops.size() == 1) return std::move(ops.front());
    return disj(std::move(ops));
  }

  Formula parse_and() {
    std::vector<Formula> ops{parse_until()};
    while (eat('&')) ops.push_back(parse_until());
    if (ops.size() == 1) return std::move(ops.front());
    return conj(std::move(ops));
  }

  Formula parse_until() {
    Formula left = parse_unary();
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == 'U') {
      ++pos_;
      const auto [a, b] = window();
      Formula right = parse_unary();
      return until(a, b, std::move(left), std::move(right));
    }
    return left;
  }

  Formula parse_unary() {
    skip_ws();
    if (eat('!')) return neg(parse_unary());
    if (pos_ < text_.size() && (text_[pos_] == 'G' || text_[pos_] == 'F')) {
      const char op = text_[pos_];
      const char after = pos_ + 1 < text_.size() ? text_[pos_ + 1] : '\0';
      if (after == '[') {
        ++pos_;
        const auto [a, b] = window();
        Formula c = parse_unary();
        return op == 'G' ? always(a, b, std::move(c)) : eventually(a, b, std::move(c));
      }
    }
    return parse_atom();
  }

  Formula parse_atom() {
    skip_ws();
    if (eat('(')) {
      Formula f = parse_or();
      expect(')');
      return f;
    }
    if (eat_word("true")) return verum();
    if (eat_word("lin")) {
      expect('(');
      const auto coeffs = number_list();
      expect(';');
      const double offset = number();
      expect(')');
      LinearPredicate p;
      p.coeffs = to_vec(coeffs);
      p.offset = offset;
      return atom(std::move(p));
    }
    if (eat_word("bel")) {
      expect('(');
      const auto alpha = number_list();
      expect(';');
      const auto gamma = number_list();
      expect(';');
      const double beta = number();
      expect(';');
      const double eps = number();
      expect(';');
      KappaMode mode;
      if (eat_word("gaussian")) {
        mode = KappaMode::Gaussian;
      } else if (eat_word("dr")) {
        mode = KappaMode::DistributionallyRobust;
      } else if (eat_word("mean")) {
        mode = KappaMode::MeanOnly;
      } else {
        fail("expected belief mode gaussian|dr|mean");
      }
      expect(')');
      BeliefPredicate p;
      p.alpha = to_vec(alpha);
      p.gamma = to_vec(gamma);
      p.beta = beta;
      p.eps = eps;
      p.mode = mode;
      return belief_atom(std::move(p));
    }
    fail("expected atom");
  }

  const std::string& text_;
  size_t pos_{0};
};

// Precedence levels: Or=1, And=2, Until=3, unary=4, atom=5.
inline int precedence(const Formula& f) {
  switch (f.kind()) {
    case FormulaKind::Or:
      return 1;
    case FormulaKind::And:
      return 2;
    case FormulaKind::Until:
      return 3;
    case FormulaKind::Not:
    case FormulaKind::Always:
    case FormulaKind::Eventually:
      return 4;
    case FormulaKind::True:
    case FormulaKind::Predicate:
      return 5;
  }
  return 5;
}

inline void print_rec(const Formula& f, int min_level, std::string& out) {
  const bool parens = precedence(f) < min_level;
  if (parens) out += '(';
  switch (f.kind()) {
    case FormulaKind::True:
      out += "true";
      break;
    case FormulaKind::Predicate: {
      if (f.time_varying()) {
        throw std::invalid_argument("time-varying atom has no text form");
      }
      if (const auto* bp = f.belief()) {
        out += "bel(";
        for (Eigen::Index i = 0; i < bp->alpha.size(); ++i) {
          if (i) out += ',';
          out += fmt_double(bp->alpha[i]);
        }
        out += "; ";
        for (Eigen::Index i = 0; i < bp->gamma.size(); ++i) {
          if (i) out += ',';
          out += fmt_double(bp->gamma[i]);
        }
        out += "; " + fmt_double(bp->beta) + "; " + fmt_double(bp->eps) + "; ";
        out += bp->mode == KappaMode::Gaussian
                   ? "gaussian"
                   : (bp->mode == KappaMode::DistributionallyRobust ? "dr" : "mean");
        out += ')';
        break;
      }
      const auto* lp = f.linear();
      out += "lin(";
      for (Eigen::Index i = 0; i < lp->coeffs.size(); ++i) {
        if (i) out += ',';
        out += fmt_double(lp->coeffs[i]);
      }
      out += "; " + fmt_double(lp->offset) + ')';
      break;
    }
    case FormulaKind::Not:
      out += '!';
      print_rec(f.child(0), 4, out);
      break;
    case FormulaKind::And:
    case FormulaKind::Or: {
      const char* sep = f.kind() == FormulaKind::And ? " & " : " | ";
      const int level = precedence(f) + 1;
      for (size_t i = 0; i < f.children().size(); ++i) {
        if (i) out += sep;
        print_rec(f.child(i), level, out);
      }
      break;
    }
    case FormulaKind::Always:
    case FormulaKind::Eventually:
      out += f.kind() == FormulaKind::Always ? 'G' : 'F';
      out += '[' + std::to_string(f.window_lo()) + ',' + std::to_string(f.window_hi()) + "] ";
      print_rec(f.child(0), 4, out);
      break;
    case FormulaKind::Until:
      print_rec(f.child(0), 4, out);
      out += " U[" + std::to_string(f.window_lo()) + ',' + std::to_string(f.window_hi()) + "] ";
      print_rec(f.child(1), 4, out);
      break;
  }
  if (parens) out += ')';
}

}  // namespace detail

inline Formula parse_formula(const std::string& text) { return detail::FormulaParser(text).parse(); }

inline std::string print_formula(const Formula& f) {
  std::string out;
  detail::print_rec(f, 0, out);
  return out;
}

}  // namespace ramp
