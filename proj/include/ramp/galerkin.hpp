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

#include <stdexcept>
#include <vector>

#include "ramp/belief.hpp"
#include "ramp/pce.hpp"

namespace ramp {

/// Deterministic linear dynamics over stacked polynomial-chaos coefficients.
/// The stochastic system z+ = F(eta) z + G(eta) u + d(eta), w = H(eta) z turns
/// into zhat+ = A zhat + B u + d, what = H zhat where zhat stacks the L
/// coefficient blocks of the state expansion.
struct PceModel {
  Eigen::MatrixXd A;  // (state_dim*L) x (state_dim*L)
  Eigen::MatrixXd B;  // (state_dim*L) x input_dim
  Eigen::VectorXd d;  // state_dim*L
  Eigen::MatrixXd H;  // (out_dim*L) x (state_dim*L)
  Eigen::VectorXd sq_norms;
  int state_dim{0};
  int input_dim{0};
  int out_dim{0};
  int L{0};
};

/// Lifts a deterministically known state into coefficient space: the mean
/// block carries the value, all higher blocks are zero.
inline Eigen::VectorXd lift_deterministic(const Eigen::VectorXd& z0, int L) {
  Eigen::VectorXd zhat = Eigen::VectorXd::Zero(z0.size() * L);
  zhat.head(z0.size()) = z0;
  return zhat;
}

/// Assembly specialized to dynamics whose uncertainty enters only through the
/// input matrix and the affine drift:
///   z+ = A0 z + (b0(eta) B0 + b1(eta) B1) u + (e0(eta) d0 + e1(eta) d1)
/// bhat0/bhat1/ehat0/ehat1 are the basis coefficients of the scalar factors.
/// The output is the full state, replicated per coefficient block.
inline PceModel galerkin_assemble_ov(const Eigen::MatrixXd& A0, const Eigen::MatrixXd& B0,
                                     const Eigen::MatrixXd& B1, const Eigen::VectorXd& d0,
                                     const Eigen::VectorXd& d1, const Eigen::VectorXd& bhat0,
                                     const Eigen::VectorXd& bhat1, const Eigen::VectorXd& ehat0,
                                     const Eigen::VectorXd& ehat1, const Eigen::VectorXd& sq_norms) {
  const int p = static_cast<int>(A0.rows());
  const int q = static_cast<int>(B0.cols());
  const int L = static_cast<int>(bhat0.size());
  if (A0.cols() != p || B0.rows() != p || B1.rows() != p || B1.cols() != q || d0.size() != p ||
      d1.size() != p) {
    throw std::invalid_argument("dynamics matrix dimensions disagree");
  }
  if (bhat1.size() != L || ehat0.size() != L || ehat1.size() != L || sq_norms.size() != L) {
    throw std::invalid_argument("coefficient vectors disagree on basis size");
  }
  PceModel m;
  m.state_dim = p;
  m.input_dim = q;
  m.out_dim = p;
  m.L = L;
  m.sq_norms = sq_norms;
  m.A = Eigen::MatrixXd::Zero(p * L, p * L);
  m.B = Eigen::MatrixXd::Zero(p * L, q);
  m.d = Eigen::VectorXd::Zero(p * L);
  m.H = Eigen::MatrixXd::Zero(p * L, p * L);
  for (int j = 0; j < L; ++j) {
    m.A.block(j * p, j * p, p, p) = A0;
    m.B.block(j * p, 0, p, q) = bhat0[j] * B0 + bhat1[j] * B1;
    m.d.segment(j * p, p) = ehat0[j] * d0 + ehat1[j] * d1;
    m.H.block(j * p, j * p, p, p) = Eigen::MatrixXd::Identity(p, p);
  }
  return m;
}

/// General Galerkin assembly from basis-coefficient expansions of F, G and H.
/// Block (j, r) of A is sum_i Fhat[i] * psi(i, j, r); the input matrix needs no
/// triple products because inputs are deterministic, so block j of B is
/// Ghat[j] directly.
inline PceModel galerkin_assemble_general(const std::vector<Eigen::MatrixXd>& Fhat,
                                          const std::vector<Eigen::MatrixXd>& Ghat,
                                          const std::vector<Eigen::VectorXd>& dhat,
                                          const std::vector<Eigen::MatrixXd>& Hhat,
                                          const TripleProducts& tp) {
  const int L = tp.size();
  if (static_cast<int>(Fhat.size()) != L || static_cast<int>(Ghat.size()) != L ||
      static_cast<int>(dhat.size()) != L || static_cast<int>(Hhat.size()) != L) {
    throw std::invalid_argument("expansion lists must have one entry per basis function");
  }
  const int p = static_cast<int>(Fhat[0].rows());
  const int q = static_cast<int>(Ghat[0].cols());
  const int r_dim = static_cast<int>(Hhat[0].rows());
  PceModel m;
  m.state_dim = p;
  m.input_dim = q;
  m.out_dim = r_dim;
  m.L = L;
  m.sq_norms = tp.sq_norms;
  m.A = Eigen::MatrixXd::Zero(p * L, p * L);
  m.B = Eigen::MatrixXd::Zero(p * L, q);
  m.d = Eigen::VectorXd::Zero(p * L);
  m.H = Eigen::MatrixXd::Zero(r_dim * L, p * L);
  for (int j = 0; j < L; ++j) {
    m.B.block(j * p, 0, p, q) = Ghat[static_cast<size_t>(j)];
    m.d.segment(j * p, p) = dhat[static_cast<size_t>(j)];
    for (int r = 0; r < L; ++r) {
      for (int i = 0; i < L; ++i) {
        const double psi = tp.psi(i, j, r);
        if (psi == 0.0) continue;
        m.A.block(j * p, r * p, p, p) += Fhat[static_cast<size_t>(i)] * psi;
        m.H.block(j * r_dim, r * p, r_dim, p) += Hhat[static_cast<size_t>(i)] * psi;
      }
    }
  }
  return m;
}

struct PcePropagation {
  std::vector<Eigen::VectorXd> zhat;  // coefficient states, k = 0..N
  std::vector<Eigen::VectorXd> what;  // coefficient outputs, k = 0..N
};

/// Rolls the coefficient dynamics forward N steps under a deterministic input
/// sequence (inputs[k] applied at step k; at least N entries).
inline PcePropagation propagate(const PceModel& m, const Eigen::VectorXd& zhat0,
                                const std::vector<Eigen::VectorXd>& inputs, int N) {
  if (zhat0.size() != m.state_dim * m.L) {
    throw std::invalid_argument("initial coefficient state has wrong dimension");
  }
  if (static_cast<int>(inputs.size()) < N) {
    throw std::invalid_argument("input sequence shorter than the propagation horizon");
  }
  PcePropagation out;
  out.zhat.reserve(static_cast<size_t>(N) + 1);
  out.what.reserve(static_cast<size_t>(N) + 1);
  Eigen::VectorXd z = zhat0;
  out.zhat.push_back(z);
  out.what.push_back(m.H * z);
  for (int k = 0; k < N; ++k) {
    if (inputs[static_cast<size_t>(k)].size() != m.input_dim) {
      throw std::invalid_argument("input vector has wrong dimension");
    }
    z = m.A * z + m.B * inputs[static_cast<size_t>(k)] + m.d;
    out.zhat.push_back(z);
    out.what.push_back(m.H * z);
  }
  return out;
}

/// Mean and covariance of one stacked coefficient output.
inline MomentStep pce_moments(const Eigen::VectorXd& what, const Eigen::VectorXd& sq_norms,
                              int out_dim) {
  const int L = static_cast<int>(sq_norms.size());
  if (what.size() != out_dim * L) {
    throw std::invalid_argument("coefficient output has wrong dimension");
  }
  MomentStep ms;
  ms.mu = what.head(out_dim);
  ms.Sigma = Eigen::MatrixXd::Zero(out_dim, out_dim);
  for (int j = 1; j < L; ++j) {
    const Eigen::VectorXd wj = what.segment(j * out_dim, out_dim);
    ms.Sigma += sq_norms[j] * (wj * wj.transpose());
  }
  return ms;
}

inline MomentTrajectory moment_trajectory(const PcePropagation& prop,
                                          const Eigen::VectorXd& sq_norms, int out_dim) {
  MomentTrajectory traj;
  traj.reserve(prop.what.size());
  for (const auto& w : prop.what) traj.push_back(pce_moments(w, sq_norms, out_dim));
  return traj;
}

}  // namespace ramp
