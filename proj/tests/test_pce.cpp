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
#include <functional>
#include <set>
#include <vector>

#include "ramp/pce.hpp"

namespace {

// Composite Simpson integration, independent of the Gauss-Legendre machinery
// under test. n must be even.
double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  const double h = (b - a) / n;
  double acc = f(a) + f(b);
  for (int i = 1; i < n; ++i) acc += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

// E[x^k] under Uniform(-1,1), closed form.
double legendre_moment(int k) { return (k % 2) ? 0.0 : 1.0 / (k + 1); }

double expect_continuous(const ramp::DistributionSpec& dist,
                         const std::function<double(double)>& f) {
  const auto [lo, hi] = dist.support();
  return simpson([&](double x) { return f(x) * dist.pdf(x); }, lo, hi, 40000);
}

double expect_discrete(const ramp::DistributionSpec& dist,
                       const std::function<double(double)>& f) {
  double acc = 0.0;
  for (size_t i = 0; i < dist.values.size(); ++i) acc += dist.probs[i] * f(dist.values[i]);
  return acc;
}

int find_index(const ramp::JointBasis& b, const std::vector<int>& idx) {
  for (int j = 0; j < b.size(); ++j) {
    if (b.index[static_cast<size_t>(j)] == idx) return j;
  }
  return -1;
}

}  // namespace

TEST_CASE("gauss-legendre rules integrate polynomials exactly", "[pce][quadrature]") {
  const auto& r4 = ramp::gauss_legendre(4);
  double m6 = 0.0, wsum = 0.0;
  for (int i = 0; i < 4; ++i) {
    m6 += r4.weights[static_cast<size_t>(i)] * std::pow(r4.nodes[static_cast<size_t>(i)], 6);
    wsum += r4.weights[static_cast<size_t>(i)];
  }
  CHECK(std::abs(m6 - 2.0 / 7.0) < 1e-14);
  CHECK(std::abs(wsum - 2.0) < 1e-14);
  for (int i = 0; i < 4; ++i) {
    CHECK(r4.nodes[static_cast<size_t>(i)] ==
          Catch::Approx(-r4.nodes[static_cast<size_t>(3 - i)]).margin(1e-15));
  }

  const auto& r1 = ramp::gauss_legendre(1);
  CHECK(r1.nodes[0] == 0.0);
  CHECK(r1.weights[0] == Catch::Approx(2.0));

  auto mapped = ramp::gauss_legendre_on(8, 0.0, 2.0);
  double m3 = 0.0;
  for (size_t i = 0; i < mapped.nodes.size(); ++i) {
    m3 += mapped.weights[i] * mapped.nodes[i] * mapped.nodes[i] * mapped.nodes[i];
  }
  CHECK(m3 == Catch::Approx(4.0).margin(1e-12));
}

TEST_CASE("uniform basis matches the closed-form Legendre family", "[pce]") {
  auto b = ramp::stieltjes_basis(ramp::uniform_dist(-1.0, 1.0), 4);

  const std::vector<double> beta_expect = {0.0, 1.0 / 3.0, 4.0 / 15.0, 9.0 / 35.0};
  const std::vector<double> norm_expect = {1.0, 1.0 / 3.0, 4.0 / 45.0, 4.0 / 175.0,
                                           64.0 / 11025.0};
  for (size_t j = 0; j < b.alpha.size(); ++j) CHECK(std::abs(b.alpha[j]) < 1e-12);
  for (size_t j = 1; j < beta_expect.size(); ++j) {
    CHECK(b.beta[j] == Catch::Approx(beta_expect[j]).epsilon(1e-10));
  }
  for (size_t j = 0; j < norm_expect.size(); ++j) {
    CHECK(b.norms[j] == Catch::Approx(norm_expect[j]).epsilon(1e-10));
  }
  // p_2(x) = x^2 - 1/3.
  CHECK(b.eval(2, 0.7) == Catch::Approx(0.49 - 1.0 / 3.0).margin(1e-12));
  // p_3(x) = x^3 - 3x/5.
  CHECK(b.eval(3, 0.5) == Catch::Approx(0.125 - 0.3).margin(1e-12));
}

TEST_CASE("uniform basis on a shifted interval recovers mean and variance", "[pce]") {
  auto b = ramp::stieltjes_basis(ramp::uniform_dist(3.99, 4.01), 2);
  CHECK(b.alpha[0] == Catch::Approx(4.0).margin(1e-12));
  CHECK(b.beta[1] == Catch::Approx(0.02 * 0.02 / 12.0).epsilon(1e-10));
  CHECK(b.norms[0] == Catch::Approx(1.0).margin(1e-14));
}

TEST_CASE("three-atom discrete basis matches direct summation", "[pce]") {
  auto dist = ramp::discrete_dist({-1.0, 0.0, 1.0}, {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
  auto b = ramp::stieltjes_basis(dist, 2);
  CHECK(b.norms[0] == Catch::Approx(1.0).margin(1e-14));
  CHECK(b.norms[1] == Catch::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(b.norms[2] == Catch::Approx(2.0 / 9.0).epsilon(1e-12));
  CHECK(std::abs(b.alpha[0]) < 1e-14);
  CHECK(std::abs(b.alpha[1]) < 1e-14);
  // p_2(x) = x^2 - 2/3 vanishes nowhere on the atoms except by weighting.
  CHECK(b.eval(2, 1.0) == Catch::Approx(1.0 / 3.0).margin(1e-12));
  CHECK(b.eval(2, 0.0) == Catch::Approx(-2.0 / 3.0).margin(1e-12));
}

TEST_CASE("gaussian basis matches the Hermite family", "[pce]") {
  auto b01 = ramp::stieltjes_basis(ramp::gaussian_dist(0.0, 1.0), 1);
  CHECK(b01.norms[0] == Catch::Approx(1.0).margin(1e-12));
  CHECK(b01.norms[1] == Catch::Approx(1.0).epsilon(1e-9));

  // With mean m and std s: alpha_j = m, beta_j = j s^2, norms s^(2n) n!.
  auto b = ramp::stieltjes_basis(ramp::gaussian_dist(1.0, 2.0), 4);
  const std::vector<double> norm_expect = {1.0, 4.0, 32.0, 384.0, 6144.0};
  for (size_t j = 0; j < b.alpha.size(); ++j) {
    CHECK(b.alpha[j] == Catch::Approx(1.0).margin(1e-8));
  }
  for (size_t j = 1; j < b.beta.size(); ++j) {
    CHECK(b.beta[j] == Catch::Approx(4.0 * static_cast<double>(j)).epsilon(1e-9));
  }
  for (size_t j = 0; j < norm_expect.size(); ++j) {
    CHECK(b.norms[j] == Catch::Approx(norm_expect[j]).epsilon(1e-8));
  }
}

TEST_CASE("truncated gaussian basis agrees with an independent integrator", "[pce]") {
  auto dist = ramp::truncated_gaussian_dist(0.0, 0.1, -0.1, 0.1);
  auto b = ramp::stieltjes_basis(dist, 4);

  const double mass = expect_continuous(dist, [](double) { return 1.0; });
  CHECK(mass == Catch::Approx(1.0).margin(1e-10));
  const double var = expect_continuous(dist, [](double x) { return x * x; });
  CHECK(b.beta[1] == Catch::Approx(var).epsilon(1e-8));
  CHECK(b.norms[1] == Catch::Approx(var).epsilon(1e-8));
  CHECK(std::abs(b.alpha[0]) < 1e-12);
}

TEST_CASE("orthogonality holds across the case-study distributions", "[pce][property]") {
  std::vector<ramp::DistributionSpec> dists = {
      ramp::uniform_dist(-1.0, 1.0),
      ramp::uniform_dist(3.99, 4.01),
      ramp::gaussian_dist(0.0, 1.0),
      ramp::truncated_gaussian_dist(0.0, 0.1, -0.1, 0.1),
      ramp::discrete_dist({-1.0, 0.0, 1.0}, {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}),
      ramp::discrete_dist({-2.0, -1.0, 0.0, 1.0, 2.0}, {0.1, 0.2, 0.4, 0.2, 0.1}),
  };
  for (const auto& dist : dists) {
    int degree = 4;
    if (dist.kind == ramp::DistKind::DiscreteFinite) {
      degree = static_cast<int>(dist.values.size()) - 1;
    }
    auto b = ramp::stieltjes_basis(dist, degree);
    for (int i = 0; i <= degree; ++i) {
      for (int j = 0; j < i; ++j) {
        auto f = [&](double x) { return b.eval(i, x) * b.eval(j, x); };
        const double ip = dist.kind == ramp::DistKind::DiscreteFinite
                              ? expect_discrete(dist, f)
                              : expect_continuous(dist, f);
        const double scale = std::sqrt(b.norms[static_cast<size_t>(i)] *
                                       b.norms[static_cast<size_t>(j)]);
        INFO("dist kind " << static_cast<int>(dist.kind) << " pair (" << i << "," << j << ")");
        CHECK(std::abs(ip) <= 1e-8 * scale);
      }
      CHECK(b.norms[static_cast<size_t>(i)] > 0.0);
    }
  }
}

TEST_CASE("discrete degree caps reject degenerate measures", "[pce]") {
  auto d3 = ramp::discrete_dist({-1.0, 0.0, 1.0}, {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
  CHECK_THROWS_WITH(ramp::stieltjes_basis(d3, 3),
                    Catch::Matchers::ContainsSubstring("insufficient atoms"));

  auto onehot = ramp::discrete_dist({-1.0, 0.0, 1.0}, {0.0, 1.0, 0.0});
  CHECK_THROWS_WITH(ramp::stieltjes_basis(onehot, 1),
                    Catch::Matchers::ContainsSubstring("insufficient atoms"));
  auto b0 = ramp::stieltjes_basis(onehot, 0);
  CHECK(b0.norms.size() == 1);
  CHECK(b0.norms[0] == Catch::Approx(1.0));
}

TEST_CASE("joint basis enumerates graded multi-indices", "[pce]") {
  using ramp::joint_basis;
  auto u = ramp::uniform_dist(-1.0, 1.0);
  auto g = ramp::gaussian_dist(0.0, 1.0);
  auto d3 = ramp::discrete_dist({-1.0, 0.0, 1.0}, {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
  auto d2 = ramp::discrete_dist({0.0, 1.0}, {0.5, 0.5});

  auto b1 = joint_basis({u, g}, 1);
  REQUIRE(b1.size() == 3);
  CHECK(b1.index[0] == std::vector<int>({0, 0}));
  std::set<std::vector<int>> got(b1.index.begin(), b1.index.end());
  CHECK(got == std::set<std::vector<int>>({{0, 0}, {1, 0}, {0, 1}}));

  CHECK(joint_basis({u, g}, 2).size() == 6);
  CHECK(joint_basis({u, g, d3}, 2).size() == 10);
  // A two-atom variable cannot exceed first order in its own coordinate.
  CHECK(joint_basis({u, d2}, 2).size() == 5);

  auto b2 = joint_basis({u, g}, 2);
  int prev = 0;
  for (const auto& idx : b2.index) {
    int total = idx[0] + idx[1];
    CHECK(total >= prev);
    prev = total;
  }
  CHECK(b2.sq_norms[static_cast<Eigen::Index>(find_index(b2, {1, 1}))] ==
        Catch::Approx(1.0 / 3.0).epsilon(1e-9));
  CHECK(b2.sq_norms[static_cast<Eigen::Index>(find_index(b2, {2, 0}))] ==
        Catch::Approx(4.0 / 45.0).epsilon(1e-9));
  CHECK(b2.sq_norms[static_cast<Eigen::Index>(find_index(b2, {0, 2}))] ==
        Catch::Approx(2.0).epsilon(1e-8));

  CHECK_THROWS_WITH(joint_basis({}, 2), Catch::Matchers::ContainsSubstring("at least one"));

  // Degree zero degenerates to the constant alone.
  auto b0 = joint_basis({u, g, d3}, 0);
  CHECK(b0.size() == 1);
  CHECK(b0.sq_norms[0] == Catch::Approx(1.0));
}

TEST_CASE("triple products match symbolic Legendre moments", "[pce]") {
  auto b = ramp::joint_basis({ramp::uniform_dist(-1.0, 1.0)}, 2);
  auto tp = ramp::triple_products(b);

  // E[p1 p1 p2] = E[x^2 (x^2 - 1/3)] = E[x^4] - E[x^2]/3 from closed-form moments.
  const double e112 = legendre_moment(4) - legendre_moment(2) / 3.0;
  CHECK(e112 == Catch::Approx(4.0 / 45.0));
  CHECK(tp.e3[1](1, 2) == Catch::Approx(e112).epsilon(1e-12));
  CHECK(tp.psi(1, 1, 2) == Catch::Approx(4.0 / 15.0).epsilon(1e-12));

  for (int j = 0; j < b.size(); ++j) {
    CHECK(tp.psi(0, j, j) == 1.0);  // exact, not approximate
    for (int r = 0; r < b.size(); ++r) {
      if (r != j) CHECK(tp.psi(0, j, r) == 0.0);
    }
  }

  // The unscaled tensor is symmetric under all index permutations.
  for (int i = 0; i < b.size(); ++i) {
    for (int j = 0; j < b.size(); ++j) {
      for (int r = 0; r < b.size(); ++r) {
        CHECK(tp.e3[static_cast<size_t>(i)](j, r) ==
              Catch::Approx(tp.e3[static_cast<size_t>(j)](r, i)).margin(1e-14));
      }
    }
  }
}

TEST_CASE("projection recovers constants and basis elements", "[pce]") {
  auto basis = ramp::joint_basis(
      {ramp::uniform_dist(3.99, 4.01), ramp::truncated_gaussian_dist(0.0, 0.1, -0.1, 0.1),
       ramp::discrete_dist({-1.0, 0.0, 1.0}, {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0})},
      2);

  // Spurious coefficients are judged by their contribution to the function
  // (coefficient times polynomial scale); raw coefficients on near-zero-norm
  // monic polynomials amplify roundoff harmlessly.
  auto c5 = ramp::project([](const Eigen::VectorXd&) { return 5.0; }, basis);
  CHECK(c5[0] == Catch::Approx(5.0).margin(1e-12));
  for (int j = 1; j < basis.size(); ++j) {
    CHECK(std::abs(c5[j]) * std::sqrt(basis.sq_norms[j]) < 5e-12);
  }

  auto ci = ramp::project([](const Eigen::VectorXd& eta) { return eta[2]; }, basis);
  const int iota_lin = find_index(basis, {0, 0, 1});
  REQUIRE(iota_lin >= 0);
  CHECK(ci[iota_lin] == Catch::Approx(1.0).margin(1e-12));
  for (int j = 0; j < basis.size(); ++j) {
    if (j != iota_lin) CHECK(std::abs(ci[j]) * std::sqrt(basis.sq_norms[j]) < 1e-12);
  }
}

TEST_CASE("projection of intent over length matches Monte Carlo", "[pce]") {
  // Independent oracle first: 1e6-draw Monte Carlo estimate of E[1/l].
  ramp::Rng rng(777);
  double acc = 0.0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    const double l = 3.99 + 0.02 * ramp::u01(rng);
    acc += 1.0 / l;
  }
  const double mc = acc / n;
  // Series value: E[1/l] = 1/4 + Var(l)/4^3 + O(range^4) = 0.2500005208...
  CHECK(mc == Catch::Approx(0.2500005208).margin(2e-6));

  auto f = [](const Eigen::VectorXd& eta) { return eta[2] / eta[0]; };
  std::vector<ramp::DistributionSpec> vars = {
      ramp::uniform_dist(3.99, 4.01), ramp::truncated_gaussian_dist(0.0, 0.1, -0.1, 0.1),
      ramp::discrete_dist({-1.0, 0.0, 1.0}, {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0})};

  auto b1 = ramp::joint_basis(vars, 1);
  auto c1 = ramp::project(f, b1);
  const int iota_lin = find_index(b1, {0, 0, 1});
  REQUIRE(iota_lin >= 0);
  CHECK(std::abs(c1[iota_lin] - mc) < 2e-6);
  CHECK(c1[iota_lin] == Catch::Approx(0.2500005208).margin(1e-9));
  for (int j = 0; j < b1.size(); ++j) {
    if (j != iota_lin) CHECK(std::abs(c1[j]) <= 1e-6);
  }

  // At total degree 2 the cross term iota*(l - 4) legitimately appears with
  // coefficient E[(l-4)/l] / E[(l-4)^2] = -1/16 + O(range^2).
  auto b2 = ramp::joint_basis(vars, 2);
  auto c2 = ramp::project(f, b2);
  const int cross = find_index(b2, {1, 0, 1});
  REQUIRE(cross >= 0);
  CHECK(c2[cross] == Catch::Approx(-1.0 / 16.0).margin(1e-5));
}

TEST_CASE("projection convergence check trips on unresolvable integrands", "[pce]") {
  auto basis = ramp::joint_basis({ramp::uniform_dist(-1.0, 1.0)}, 2);
  // An oscillation far above the grid's resolvable frequency aliases
  // differently on the doubled grid, so the cross-check cannot stabilize.
  auto chirp = [](const Eigen::VectorXd& eta) { return std::sin(5.0e3 * eta[0]); };
  CHECK_THROWS_WITH(ramp::project(chirp, basis),
                    Catch::Matchers::ContainsSubstring("projection not converged"));
}

TEST_CASE("sampling respects supports and seed determinism", "[pce][determinism]") {
  std::vector<ramp::DistributionSpec> specs = {
      ramp::uniform_dist(3.99, 4.01), ramp::truncated_gaussian_dist(0.0, 0.1, -0.1, 0.1),
      ramp::discrete_dist({-1.0, 0.0, 1.0}, {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0})};

  ramp::Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXd ea = ramp::sample_eta(specs, a);
    Eigen::VectorXd eb = ramp::sample_eta(specs, b);
    REQUIRE(ea.size() == 3);
    CHECK((ea.array() == eb.array()).all());
    CHECK(ea[0] >= 3.99);
    CHECK(ea[0] <= 4.01);
    CHECK(ea[1] >= -0.1);
    CHECK(ea[1] <= 0.1);
    CHECK((ea[2] == -1.0 || ea[2] == 0.0 || ea[2] == 1.0));
  }

  ramp::Rng rng(7);
  int counts[3] = {0, 0, 0};
  const int n = 300000;
  for (int i = 0; i < n; ++i) {
    const double v = specs[2].sample(rng);
    counts[static_cast<int>(v) + 1]++;
  }
  for (int atom = 0; atom < 3; ++atom) {
    CHECK(std::abs(static_cast<double>(counts[atom]) / n - 1.0 / 3.0) < 0.005);
  }
}
