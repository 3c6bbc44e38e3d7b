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
#include <cstddef>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ramp/distributions.hpp"
#include "ramp/quadrature.hpp"

namespace ramp {

/// Monic orthogonal polynomial family for one scalar distribution, built with
/// the Stieltjes procedure. p_{j+1}(x) = (x - alpha[j]) p_j(x) - beta[j] p_{j-1}(x)
/// with p_0 = 1 and beta[0] unused. qx/qw discretize the measure (quadrature
/// nodes for continuous kinds, atoms for discrete ones); weights sum to one and
/// every expectation the basis reports is taken against this discretization, so
/// orthogonality identities hold to roundoff by construction.
struct UnivariateBasis {
  DistributionSpec dist;
  int degree{0};
  std::vector<double> alpha;
  std::vector<double> beta;
  std::vector<double> norms;  // E[p_j^2], j = 0..degree
  std::vector<double> qx;
  std::vector<double> qw;

  /// p_0(x) .. p_degree(x).
  std::vector<double> eval_all(double x) const {
    std::vector<double> p(static_cast<size_t>(degree) + 1);
    p[0] = 1.0;
    if (degree >= 1) p[1] = (x - alpha[0]) * 1.0;
    for (int j = 1; j < degree; ++j) {
      p[static_cast<size_t>(j) + 1] =
          (x - alpha[static_cast<size_t>(j)]) * p[static_cast<size_t>(j)] -
          beta[static_cast<size_t>(j)] * p[static_cast<size_t>(j) - 1];
    }
    return p;
  }

  double eval(int j, double x) const {
    if (j < 0 || j > degree) throw std::out_of_range("polynomial degree out of range");
    return eval_all(x)[static_cast<size_t>(j)];
  }
};

namespace detail {

struct StieltjesResult {
  std::vector<double> alpha, beta, norms;
};

/// Stieltjes recurrence over a discrete measure given by nodes and weights.
/// Returns empty norms if the measure collapses before reaching the degree.
inline StieltjesResult stieltjes_on_nodes(const std::vector<double>& x,
                                          const std::vector<double>& w, int degree) {
  const size_t n = x.size();
  StieltjesResult r;
  std::vector<double> p_prev(n, 0.0), p_cur(n, 1.0);
  double norm_prev = 1.0;
  for (int j = 0; j <= degree; ++j) {
    double norm = 0.0;
    for (size_t i = 0; i < n; ++i) norm += w[i] * p_cur[i] * p_cur[i];
    if (!(norm > 1e-300)) {
      r.norms.clear();
      return r;
    }
    r.norms.push_back(norm);
    if (j == degree) break;
    double a = 0.0;
    for (size_t i = 0; i < n; ++i) a += w[i] * x[i] * p_cur[i] * p_cur[i];
    a /= norm;
    const double b = (j == 0) ? 0.0 : norm / norm_prev;
    r.alpha.push_back(a);
    r.beta.push_back(b);
    std::vector<double> p_next(n);
    for (size_t i = 0; i < n; ++i) p_next[i] = (x[i] - a) * p_cur[i] - b * p_prev[i];
    p_prev = std::move(p_cur);
    p_cur = std::move(p_next);
    norm_prev = norm;
  }
  return r;
}

inline double rel_gap(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

inline double max_coeff_gap(const StieltjesResult& a, const StieltjesResult& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.alpha.size(); ++i) m = std::max(m, rel_gap(a.alpha[i], b.alpha[i]));
  for (size_t i = 1; i < a.beta.size(); ++i) m = std::max(m, rel_gap(a.beta[i], b.beta[i]));
  for (size_t i = 0; i < a.norms.size(); ++i) m = std::max(m, rel_gap(a.norms[i], b.norms[i]));
  return m;
}

}  // namespace detail

/// Builds the monic orthogonal family for one distribution. Continuous kinds
/// use Gauss-Legendre discretizations of the density, doubling the node count
/// until recurrence coefficients and norms are stable to 1e-10. Discrete kinds
/// use the atoms directly and support degree at most (#distinct atoms - 1).
inline UnivariateBasis stieltjes_basis(const DistributionSpec& dist, int degree) {
  dist.validate();
  if (degree < 0) throw std::invalid_argument("polynomial degree must be nonnegative");
  UnivariateBasis basis;
  basis.dist = dist;
  basis.degree = degree;

  if (dist.kind == DistKind::DiscreteFinite) {
    // Zero-probability atoms carry no measure (a one-hot intent is a single
    // point mass) and must not count toward the representable degree.
    std::set<double> distinct;
    for (size_t i = 0; i < dist.values.size(); ++i) {
      if (dist.probs[i] > 0.0) distinct.insert(dist.values[i]);
    }
    if (degree + 1 > static_cast<int>(distinct.size())) {
      throw std::invalid_argument("measure has insufficient atoms: " +
                                  std::to_string(distinct.size()) +
                                  " support polynomial degree at most " +
                                  std::to_string(static_cast<int>(distinct.size()) - 1));
    }
    double total = 0.0;
    for (size_t i = 0; i < dist.values.size(); ++i) {
      if (dist.probs[i] > 0.0) {
        basis.qx.push_back(dist.values[i]);
        basis.qw.push_back(dist.probs[i]);
        total += dist.probs[i];
      }
    }
    for (double& p : basis.qw) p /= total;
    auto res = detail::stieltjes_on_nodes(basis.qx, basis.qw, degree);
    if (res.norms.size() != static_cast<size_t>(degree) + 1) {
      throw std::runtime_error("orthogonal basis construction collapsed on discrete measure");
    }
    basis.alpha = std::move(res.alpha);
    basis.beta = std::move(res.beta);
    basis.norms = std::move(res.norms);
    return basis;
  }

  const auto [lo, hi] = dist.support();
  detail::StieltjesResult prev;
  bool have_prev = false;
  for (int n = 128; n <= 16384; n *= 2) {
    QuadratureRule rule = gauss_legendre_on(n, lo, hi);
    std::vector<double> w(rule.weights.size());
    double total = 0.0;
    for (size_t i = 0; i < w.size(); ++i) {
      w[i] = rule.weights[i] * dist.pdf(rule.nodes[i]);
      total += w[i];
    }
    for (double& wi : w) wi /= total;
    auto res = detail::stieltjes_on_nodes(rule.nodes, w, degree);
    if (res.norms.size() == static_cast<size_t>(degree) + 1 && have_prev &&
        detail::max_coeff_gap(res, prev) <= 1e-10) {
      basis.alpha = std::move(res.alpha);
      basis.beta = std::move(res.beta);
      basis.norms = std::move(res.norms);
      basis.qx = std::move(rule.nodes);
      basis.qw = std::move(w);
      return basis;
    }
    prev = std::move(res);
    have_prev = true;
  }
  throw std::runtime_error("quadrature for orthogonal basis did not stabilize to 1e-10");
}

/// Tensorized basis over independent scalar uncertainties. Multi-indices are
/// enumerated in graded lexicographic order (total degree ascending, then
/// lexicographic on the index vector); index 0 is the constant term. Discrete
/// variables are capped at (#atoms - 1) in their own coordinate, so the basis
/// size is C(n + d, d) minus the indices removed by caps.
struct JointBasis {
  std::vector<DistributionSpec> dists;
  std::vector<UnivariateBasis> uni;
  std::vector<std::vector<int>> index;
  int total_degree{0};
  Eigen::VectorXd sq_norms;  // E[Phi_j^2]

  int dim() const { return static_cast<int>(dists.size()); }
  int size() const { return static_cast<int>(index.size()); }

  double eval(int j, const Eigen::VectorXd& eta) const {
    if (j < 0 || j >= size()) throw std::out_of_range("basis index out of range");
    if (eta.size() != dim()) throw std::invalid_argument("uncertainty vector dimension mismatch");
    double v = 1.0;
    for (int var = 0; var < dim(); ++var) {
      v *= uni[static_cast<size_t>(var)].eval(index[static_cast<size_t>(j)][static_cast<size_t>(var)],
                                              eta[var]);
    }
    return v;
  }
};

inline JointBasis joint_basis(std::vector<DistributionSpec> dists, int total_degree) {
  if (dists.empty()) throw std::invalid_argument("joint basis needs at least one variable");
  if (total_degree < 0) throw std::invalid_argument("polynomial degree must be nonnegative");
  JointBasis basis;
  basis.total_degree = total_degree;
  std::vector<int> caps;
  for (const auto& d : dists) {
    int cap = total_degree;
    if (d.kind == DistKind::DiscreteFinite) {
      d.validate();
      std::set<double> distinct;
      for (size_t i = 0; i < d.values.size(); ++i) {
        if (d.probs[i] > 0.0) distinct.insert(d.values[i]);
      }
      cap = std::min(cap, static_cast<int>(distinct.size()) - 1);
    }
    caps.push_back(cap);
    basis.uni.push_back(stieltjes_basis(d, cap));
  }
  basis.dists = std::move(dists);

  const int n = basis.dim();
  std::vector<int> cur(static_cast<size_t>(n), 0);
  std::vector<std::vector<int>> all;
  // Enumerate all capped multi-indices with total degree <= total_degree.
  auto rec = [&](auto&& self, int var, int remaining) -> void {
    if (var == n) {
      all.push_back(cur);
      return;
    }
    const int top = std::min(remaining, caps[static_cast<size_t>(var)]);
    for (int a = 0; a <= top; ++a) {
      cur[static_cast<size_t>(var)] = a;
      self(self, var + 1, remaining - a);
    }
    cur[static_cast<size_t>(var)] = 0;
  };
  rec(rec, 0, total_degree);
  std::stable_sort(all.begin(), all.end(), [](const std::vector<int>& a, const std::vector<int>& b) {
    int sa = 0, sb = 0;
    for (int v : a) sa += v;
    for (int v : b) sb += v;
    if (sa != sb) return sa < sb;
    return a < b;
  });
  basis.index = std::move(all);

  basis.sq_norms.resize(basis.size());
  for (int j = 0; j < basis.size(); ++j) {
    double v = 1.0;
    for (int var = 0; var < n; ++var) {
      v *= basis.uni[static_cast<size_t>(var)]
               .norms[static_cast<size_t>(basis.index[static_cast<size_t>(j)][static_cast<size_t>(var)])];
    }
    basis.sq_norms[j] = v;
  }
  return basis;
}

/// Dense third-moment tensor of a joint basis. e3[i](j, r) = E[Phi_i Phi_j Phi_r]
/// against the basis discretization, with entries below roundoff scale snapped
/// to exact zero so structural zeros (odd moments of symmetric measures,
/// orthogonality residues) are preserved. psi divides by E[Phi_j^2].
struct TripleProducts {
  Eigen::VectorXd sq_norms;
  std::vector<Eigen::MatrixXd> e3;

  double psi(int i, int j, int r) const {
    const double v = e3[static_cast<size_t>(i)](j, r);
    return v == 0.0 ? 0.0 : v / sq_norms[j];
  }
  int size() const { return static_cast<int>(e3.size()); }
};

inline TripleProducts triple_products(const JointBasis& basis) {
  const int n = basis.dim();
  // Univariate tensors T[var][a](b, c) = E[p_a p_b p_c] over the stored grid.
  std::vector<std::vector<Eigen::MatrixXd>> T(static_cast<size_t>(n));
  for (int var = 0; var < n; ++var) {
    const UnivariateBasis& u = basis.uni[static_cast<size_t>(var)];
    const int d = u.degree;
    std::vector<std::vector<double>> pv(u.qx.size());
    for (size_t i = 0; i < u.qx.size(); ++i) pv[i] = u.eval_all(u.qx[i]);
    T[static_cast<size_t>(var)].assign(static_cast<size_t>(d) + 1,
                                       Eigen::MatrixXd::Zero(d + 1, d + 1));
    for (int a = 0; a <= d; ++a) {
      for (int b = 0; b <= d; ++b) {
        for (int c = 0; c <= d; ++c) {
          double s = 0.0;
          for (size_t i = 0; i < u.qx.size(); ++i) {
            s += u.qw[i] * pv[i][static_cast<size_t>(a)] * pv[i][static_cast<size_t>(b)] *
                 pv[i][static_cast<size_t>(c)];
          }
          const double scale = std::sqrt(u.norms[static_cast<size_t>(a)] *
                                         u.norms[static_cast<size_t>(b)] *
                                         u.norms[static_cast<size_t>(c)]);
          if (std::abs(s) <= 1e-12 * scale) s = 0.0;
          T[static_cast<size_t>(var)][static_cast<size_t>(a)](b, c) = s;
        }
      }
    }
  }

  const int L = basis.size();
  TripleProducts tp;
  tp.sq_norms = basis.sq_norms;
  tp.e3.assign(static_cast<size_t>(L), Eigen::MatrixXd::Zero(L, L));
  for (int i = 0; i < L; ++i) {
    for (int j = 0; j < L; ++j) {
      for (int r = 0; r < L; ++r) {
        double v = 1.0;
        for (int var = 0; var < n; ++var) {
          const auto& idx = basis.index;
          v *= T[static_cast<size_t>(var)]
                [static_cast<size_t>(idx[static_cast<size_t>(i)][static_cast<size_t>(var)])](
                    idx[static_cast<size_t>(j)][static_cast<size_t>(var)],
                    idx[static_cast<size_t>(r)][static_cast<size_t>(var)]);
          if (v == 0.0) break;
        }
        tp.e3[static_cast<size_t>(i)](j, r) = v;
      }
    }
  }
  return tp;
}

namespace detail {

struct VarGrid {
  std::vector<double> x, w;
};

template <class F>
Eigen::VectorXd project_on_grids(F&& f, const JointBasis& basis,
                                 const std::vector<VarGrid>& grids) {
  const int n = basis.dim();
  const int L = basis.size();
  // Per-variable polynomial values at the grid nodes.
  std::vector<std::vector<std::vector<double>>> pv(static_cast<size_t>(n));
  for (int var = 0; var < n; ++var) {
    const UnivariateBasis& u = basis.uni[static_cast<size_t>(var)];
    const VarGrid& g = grids[static_cast<size_t>(var)];
    pv[static_cast<size_t>(var)].resize(g.x.size());
    for (size_t i = 0; i < g.x.size(); ++i) pv[static_cast<size_t>(var)][i] = u.eval_all(g.x[i]);
  }
  Eigen::VectorXd coeff = Eigen::VectorXd::Zero(L);
  std::vector<size_t> pos(static_cast<size_t>(n), 0);
  Eigen::VectorXd eta(n);
  while (true) {
    double w = 1.0;
    for (int var = 0; var < n; ++var) {
      const VarGrid& g = grids[static_cast<size_t>(var)];
      w *= g.w[pos[static_cast<size_t>(var)]];
      eta[var] = g.x[pos[static_cast<size_t>(var)]];
    }
    const double fv = f(eta);
    for (int j = 0; j < L; ++j) {
      double phi = 1.0;
      for (int var = 0; var < n; ++var) {
        phi *= pv[static_cast<size_t>(var)][pos[static_cast<size_t>(var)]]
                 [static_cast<size_t>(basis.index[static_cast<size_t>(j)][static_cast<size_t>(var)])];
      }
      coeff[j] += w * fv * phi;
    }
    int var = n - 1;
    while (var >= 0) {
      if (++pos[static_cast<size_t>(var)] < grids[static_cast<size_t>(var)].x.size()) break;
      pos[static_cast<size_t>(var)] = 0;
      --var;
    }
    if (var < 0) break;
  }
  for (int j = 0; j < L; ++j) coeff[j] /= basis.sq_norms[j];
  return coeff;
}

inline VarGrid continuous_grid(const DistributionSpec& dist, int n) {
  const auto [lo, hi] = dist.support();
  QuadratureRule rule = gauss_legendre_on(n, lo, hi);
  VarGrid g;
  g.x = std::move(rule.nodes);
  g.w.resize(g.x.size());
  double total = 0.0;
  for (size_t i = 0; i < g.x.size(); ++i) {
    g.w[i] = rule.weights[i] * dist.pdf(g.x[i]);
    total += g.w[i];
  }
  for (double& wi : g.w) wi /= total;
  return g;
}

}  // namespace detail

/// Galerkin projection of a scalar function of the uncertainty vector onto the
/// joint basis: returns coefficients c with f(eta) ~= sum_j c_j Phi_j(eta).
/// Expectations use the tensor product of the per-variable discretizations,
/// cross-checked against doubled continuous grids to catch functions the
/// quadrature cannot resolve.
template <class F>
Eigen::VectorXd project(F&& f, const JointBasis& basis) {
  const int n = basis.dim();
  std::vector<detail::VarGrid> coarse(static_cast<size_t>(n)), fine(static_cast<size_t>(n));
  bool any_continuous = false;
  for (int var = 0; var < n; ++var) {
    const UnivariateBasis& u = basis.uni[static_cast<size_t>(var)];
    coarse[static_cast<size_t>(var)] = {u.qx, u.qw};
    if (u.dist.kind == DistKind::DiscreteFinite) {
      fine[static_cast<size_t>(var)] = coarse[static_cast<size_t>(var)];
    } else {
      fine[static_cast<size_t>(var)] =
          detail::continuous_grid(u.dist, 2 * static_cast<int>(u.qx.size()));
      any_continuous = true;
    }
  }
  // The stored grid defines the basis's measure, so orthogonality identities
  // are exact on it; the doubled grid serves only as a convergence check.
  Eigen::VectorXd c0 = detail::project_on_grids(f, basis, coarse);
  if (!any_continuous) return c0;
  Eigen::VectorXd c1 = detail::project_on_grids(f, basis, fine);
  for (int j = 0; j < basis.size(); ++j) {
    if (std::abs(c0[j] - c1[j]) > 1e-8 * std::max(1.0, std::abs(c1[j]))) {
      throw std::runtime_error("projection not converged");
    }
  }
  return c0;
}

}  // namespace ramp
