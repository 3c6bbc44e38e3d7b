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

#include <Eigen/Cholesky>
#include <cmath>
#include <random>

#include "ramp/belief.hpp"
#include "ramp/stl.hpp"

using namespace ramp;

namespace {

// Independent erf oracle: scaled power series
//   erf(x) = (2/sqrt(pi)) e^{-x^2} sum_n x^{2n+1} 2^n / (1*3*...*(2n+1)),
// all terms positive, convergent to ~1e-16 for |x| <= 3. Deliberately a
// different algorithm from the libm implementation used by the library.
double erf_oracle(double x) {
  if (x < 0) return -erf_oracle(-x);
  double term = x;
  double sum = x;
  for (int n = 1; n < 200; ++n) {
    term *= 2.0 * x * x / (2.0 * n + 1.0);
    sum += term;
    if (term < 1e-18 * sum) break;
  }
  return 2.0 / std::sqrt(M_PI) * std::exp(-x * x) * sum;
}

// Tail form keeps full relative precision where 1 - erf would cancel:
// erfc(x) = e^{-x^2}/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))).
double erfc_oracle(double x) {
  if (x < 2.0) return 1.0 - erf_oracle(x);
  double cf = 0.0;
  for (int n = 80; n >= 1; --n) cf = (0.5 * n) / (x + cf);
  return std::exp(-x * x) / std::sqrt(M_PI) / (x + cf);
}

double upper_tail_oracle(double x) {
  if (x < 0) return 1.0 - upper_tail_oracle(-x);
  return 0.5 * erfc_oracle(x / std::sqrt(2.0));
}

// x with P(Z > x) = eps for a standard normal Z.
double upper_quantile_oracle(double eps) {
  double lo = -10.0, hi = 42.0;
  for (int i = 0; i < 300; ++i) {
    const double mid = 0.5 * (lo + hi);
    (upper_tail_oracle(mid) > eps ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Formula ov_mean_below(double threshold, int idx, int dim) {
  BeliefPredicate p;
  p.alpha = Eigen::VectorXd::Zero(1);
  p.gamma = Eigen::VectorXd::Zero(dim);
  p.gamma[idx] = 1.0;
  p.beta = threshold;
  p.eps = 1.0;
  p.mode = KappaMode::MeanOnly;
  return belief_atom(std::move(p));
}

MomentTrajectory constant_moments(const Eigen::VectorXd& mu, const Eigen::MatrixXd& Sigma,
                                  int steps) {
  return MomentTrajectory(static_cast<size_t>(steps), MomentStep{mu, Sigma});
}

}  // namespace

TEST_CASE("kappa: Gaussian quantile against an independent erf oracle", "[belief]") {
  // Oracle value for eps = 0.05, frozen after computing upper_quantile_oracle(0.05).
  const double frozen = 1.6448536269514722;
  REQUIRE(std::abs(upper_quantile_oracle(0.05) - frozen) < 1e-12);
  CHECK(std::abs(kappa(0.05, KappaMode::Gaussian) - frozen) < 1e-9);

  for (double eps : {0.4, 0.2, 0.1, 0.01, 1e-4, 1e-8}) {
    CAPTURE(eps);
    CHECK(std::abs(kappa(eps, KappaMode::Gaussian) - upper_quantile_oracle(eps)) < 1e-9);
  }
  CHECK(std::abs(kappa(0.5, KappaMode::Gaussian)) < 1e-12);
  CHECK(kappa(0.9, KappaMode::Gaussian) < 0.0);
}

TEST_CASE("kappa: distributionally robust closed form", "[belief]") {
  // sqrt((1 - 0.05) / 0.05) = sqrt(19), frozen.
  CHECK(std::abs(kappa(0.05, KappaMode::DistributionallyRobust) - 4.358898943540674) < 1e-12);
  CHECK(kappa(1.0, KappaMode::DistributionallyRobust) == 0.0);
  CHECK(kappa(1.0, KappaMode::MeanOnly) == 0.0);
}

TEST_CASE("kappa: domain errors", "[belief]") {
  CHECK_THROWS_WITH(kappa(0.0, KappaMode::Gaussian),
                    Catch::Matchers::ContainsSubstring("unbounded kappa"));
  CHECK_THROWS_WITH(kappa(1.0, KappaMode::Gaussian),
                    Catch::Matchers::ContainsSubstring("degenerate quantile"));
  CHECK_THROWS_AS(kappa(-0.1, KappaMode::DistributionallyRobust), std::invalid_argument);
  CHECK_THROWS_AS(kappa(1.5, KappaMode::MeanOnly), std::invalid_argument);
}

TEST_CASE("kappa: distributionally robust dominates Gaussian", "[belief][property]") {
  for (int i = 1; i <= 100; ++i) {
    const double eps = 0.5 * i / 100.0;
    CAPTURE(eps);
    REQUIRE(kappa(eps, KappaMode::DistributionallyRobust) >=
            kappa(eps, KappaMode::Gaussian) - 1e-12);
  }
}

TEST_CASE("belief_g: surrogate value on the scalar example", "[belief]") {
  BeliefPredicate p;
  p.alpha = Eigen::VectorXd::Constant(1, -1.0);
  p.gamma = Eigen::VectorXd::Constant(1, 1.0);
  p.beta = -4.0;
  p.eps = 0.05;
  p.mode = KappaMode::Gaussian;

  const auto y = Eigen::VectorXd::Constant(1, 25.0);
  const auto mu = Eigen::VectorXd::Constant(1, 20.0);
  const auto Sigma = Eigen::MatrixXd::Constant(1, 1, 0.25);

  // Oracle: -25 + 20 + upper_quantile_oracle(0.05) * 0.5 + 4.
  const double expected = -25.0 + 20.0 + upper_quantile_oracle(0.05) * 0.5 + 4.0;
  const double g = belief_g(p, y, mu, Sigma);
  CHECK(std::abs(g - expected) < 1e-9);
  CHECK(std::abs(g - (-0.177573)) < 1e-6);
  CHECK(g <= 0.0);  // satisfied

  CHECK_THROWS_WITH(belief_g(p, y, mu, Eigen::MatrixXd::Constant(1, 1, -1.0)),
                    Catch::Matchers::ContainsSubstring("covariance not PSD"));
}

TEST_CASE("lower_dstl: chance atom becomes a time-indexed linear atom", "[belief]") {
  // P(w1 <= y1 - 4) >= 0.95 with w1 ~ N(20, 0.5^2) lowers to y1 >= 24.822427.
  BeliefPredicate p;
  p.alpha = Eigen::VectorXd::Constant(1, -1.0);
  p.gamma = Eigen::VectorXd::Constant(1, 1.0);
  p.beta = -4.0;
  p.eps = 0.05;
  p.mode = KappaMode::Gaussian;

  const auto moments = constant_moments(Eigen::VectorXd::Constant(1, 20.0),
                                        Eigen::MatrixXd::Constant(1, 1, 0.25), 1);
  const Formula lowered = lower_dstl(belief_atom(p), moments);
  REQUIRE(lowered.time_varying() != nullptr);
  const auto& lp = lowered.time_varying()->at(0);
  REQUIRE(lp.coeffs.size() == 1);
  CHECK(lp.coeffs[0] == -1.0);
  const double expected_offset = -4.0 - 20.0 - upper_quantile_oracle(0.05) * 0.5;
  CHECK(std::abs(lp.offset - expected_offset) < 1e-9);
  CHECK(std::abs(lp.offset - (-24.822427)) < 1e-5);

  // Satisfied iff y1 >= 24.822427: margin at the threshold is ~0.
  Eigen::VectorXd at(1);
  at << -expected_offset;
  CHECK(std::abs(lp.margin(at)) < 1e-12);
}

TEST_CASE("lower_dstl: mean-only opponent atom folds to a constant", "[belief]") {
  const auto moments = constant_moments(Eigen::Vector2d(3.0, 1.0), Eigen::Matrix2d::Zero(), 4);
  CHECK(lower_dstl(ov_mean_below(4.0, 0, 2), moments).kind() == FormulaKind::True);
  // mu = 3 is not below 2: the atom folds to the canonical false form.
  const Formula f = lower_dstl(ov_mean_below(2.0, 0, 2), moments);
  REQUIRE(f.kind() == FormulaKind::Not);
  CHECK(f.child(0).kind() == FormulaKind::True);
}

TEST_CASE("lower_dstl: requires enough moment steps", "[belief]") {
  const auto moments = constant_moments(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Zero(1, 1), 3);
  const Formula f = always(0, 4, ov_mean_below(1.0, 0, 1));
  CHECK_THROWS_WITH(lower_dstl(f, moments),
                    Catch::Matchers::ContainsSubstring("shorter than formula horizon"));
}

TEST_CASE("simplify_constants: vacuous antecedent prunes the consequent", "[belief]") {
  // Antecedent: opponent mean stays below 12 at every step. The moment
  // trajectory crosses 12 at step 3, so G[0,5] antecedent is false and the
  // implication holds vacuously; the consequent subtree must disappear.
  MomentTrajectory moments;
  for (int k = 0; k <= 5; ++k) {
    moments.push_back({Eigen::VectorXd::Constant(1, 10.0 + k), Eigen::MatrixXd::Zero(1, 1)});
  }
  LinearPredicate ev;
  ev.coeffs = Eigen::VectorXd::Constant(1, 1.0);
  ev.offset = 0.0;
  const Formula f =
      implies(always(0, 5, ov_mean_below(12.0, 0, 1)), always(0, 5, atom(ev)));
  const Formula simplified = simplify_constants(lower_dstl(f, moments));
  CHECK(simplified.kind() == FormulaKind::True);

  // With the threshold raised the antecedent is constant-true instead and
  // only the consequent survives.
  const Formula g =
      implies(always(0, 5, ov_mean_below(20.0, 0, 1)), always(0, 5, atom(ev)));
  const Formula gs = simplify_constants(lower_dstl(g, moments));
  REQUIRE(gs.kind() == FormulaKind::Always);
  CHECK(gs.child(0).linear() != nullptr);
}

TEST_CASE("simplify_constants: folding respects temporal windows", "[belief]") {
  // Atom is true at steps 0..4 and false from step 5 on.
  MomentTrajectory moments;
  for (int k = 0; k <= 6; ++k) {
    moments.push_back({Eigen::VectorXd::Constant(1, k < 5 ? 1.0 : 3.0), Eigen::MatrixXd::Zero(1, 1)});
  }
  const Formula atom_f = ov_mean_below(2.0, 0, 1);
  CHECK(simplify_constants(lower_dstl(always(0, 4, atom_f), moments)).kind() == FormulaKind::True);
  const Formula wide = simplify_constants(lower_dstl(always(0, 6, atom_f), moments));
  CHECK(wide.kind() == FormulaKind::Not);  // canonical false
  // Disjunction with an unknown operand survives folding of the known one.
  LinearPredicate ev;
  ev.coeffs = Eigen::VectorXd::Constant(1, 1.0);
  ev.offset = 5.0;
  const Formula mixed = simplify_constants(
      lower_dstl(disj({always(0, 6, atom_f), eventually(0, 2, atom(ev))}), moments));
  REQUIRE(mixed.kind() == FormulaKind::Eventually);
}

TEST_CASE("lowering soundness: empirical risk stays near the target level", "[belief][property]") {
  // Worst case for the chance bound: pick y on the lowered hyperplane, then
  // the Gaussian surrogate is exact and the violation frequency must sit
  // within Monte Carlo noise of eps on both sides.
  std::mt19937 rng(20260822);
  std::normal_distribution<double> gauss;
  const int n = 100000;
  for (const double eps : {0.05, 0.2}) {
    for (int rep = 0; rep < 3; ++rep) {
      const int d = 3;
      Eigen::MatrixXd A(d, d);
      for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) A(i, j) = gauss(rng);
      }
      const Eigen::MatrixXd Sigma = A * A.transpose() + 0.05 * Eigen::MatrixXd::Identity(d, d);
      Eigen::VectorXd mu(d), gamma(d);
      for (int i = 0; i < d; ++i) {
        mu[i] = 2.0 * gauss(rng);
        gamma[i] = gauss(rng);
      }
      BeliefPredicate p;
      p.alpha = Eigen::VectorXd::Constant(1, 1.0);
      p.gamma = gamma;
      p.beta = 0.5;
      p.eps = eps;
      p.mode = KappaMode::Gaussian;

      // Lowered constraint: y <= beta - gamma.mu - kappa * sigma. Sit exactly
      // on the boundary.
      const double sigma = std::sqrt(gamma.dot(Sigma * gamma));
      const double y = p.beta - gamma.dot(mu) - kappa(eps, KappaMode::Gaussian) * sigma;
      REQUIRE(std::abs(belief_g(p, Eigen::VectorXd::Constant(1, y), mu, Sigma)) < 1e-9);

      const Eigen::MatrixXd L = Sigma.llt().matrixL();
      int violations = 0;
      Eigen::VectorXd z(d);
      for (int s = 0; s < n; ++s) {
        for (int i = 0; i < d; ++i) z[i] = gauss(rng);
        const Eigen::VectorXd w = mu + L * z;
        if (gamma.dot(w) > p.beta - y) ++violations;
      }
      const double freq = static_cast<double>(violations) / n;
      const double slack = 3.0 * std::sqrt(eps * (1.0 - eps) / n);
      CAPTURE(eps, rep, freq);
      REQUIRE(freq <= eps + slack);
      REQUIRE(freq >= eps - slack);
    }
  }
}
