/*
 * Copyright 2026 The voltnet Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Nonlinear branch-flow (DistFlow) solver used only as a test oracle.
//
// Unknowns per line (parent i -> bus j): active/reactive flow P_j, Q_j sent
// from i, and squared voltage magnitude v_j. With consumption c_j = -s_j,
//   P_j = sum_{k in subtree(j)} p_c_k + sum_{lines in subtree(j)} r l
//   v_j = v_i - 2 (r P_j + x Q_j) + (r^2 + x^2) l_j,   l_j = (P_j^2 + Q_j^2) / v_i.
// Solved by backward/forward sweeps from a flat start.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "voltnet/feeder.hpp"

namespace voltnet::oracle {

/// Squared voltage magnitudes at buses 1..N for net injections p, q (pu,
/// generation positive).
inline Vector distflow_squared_voltages(const FeederTopology& topo, const Vector& p_inj, const Vector& q_inj,
                                        double v0 = 1.0, double tol = 1e-14, int max_sweeps = 200) {
  const FeederTree tree(topo);
  const std::size_t n = topo.bus_count;
  std::vector<double> r(n + 1, 0.0), x(n + 1, 0.0);
  for (const auto& l : topo.lines) {
    const BusId child = tree.parent(l.to) == l.from ? l.to : l.from;
    r[child] = l.r_pu;
    x[child] = l.x_pu;
  }
  std::vector<double> v(n + 1, v0 * v0), loss(n + 1, 0.0);
  const auto& order = tree.bfs_order();
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    // Backward: flows from the leaves up.
    std::vector<double> Pn(n + 1, 0.0), Qn(n + 1, 0.0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const BusId j = *it;
      if (j == 0) continue;
      const auto k = static_cast<Eigen::Index>(j - 1);
      Pn[j] += -p_inj(k) + r[j] * loss[j];
      Qn[j] += -q_inj(k) + x[j] * loss[j];
      const BusId i = tree.parent(j);
      if (i != 0) {
        Pn[i] += Pn[j];
        Qn[i] += Qn[j];
      }
    }
    // Forward: voltages from the substation down.
    double change = 0.0;
    std::vector<double> vn(n + 1, v0 * v0);
    for (const BusId j : order) {
      if (j == 0) continue;
      const BusId i = tree.parent(j);
      const double l = (Pn[j] * Pn[j] + Qn[j] * Qn[j]) / vn[i];
      vn[j] = vn[i] - 2.0 * (r[j] * Pn[j] + x[j] * Qn[j]) + (r[j] * r[j] + x[j] * x[j]) * l;
      change = std::max(change, std::abs(l - loss[j]));
      loss[j] = l;
    }
    for (std::size_t j = 0; j <= n; ++j) change = std::max(change, std::abs(vn[j] - v[j]));
    v = vn;
    if (change < tol) {
      Vector out(static_cast<Eigen::Index>(n));
      for (std::size_t j = 1; j <= n; ++j) out(static_cast<Eigen::Index>(j - 1)) = v[j];
      return out;
    }
  }
  throw std::runtime_error("distflow sweep did not converge");
}

struct DistFlowJacobian {
  Matrix dv_dp;
  Matrix dv_dq;
};

/// Central-difference Jacobian of the squared voltages at the flat point.
inline DistFlowJacobian distflow_jacobian_at_flat(const FeederTopology& topo, double h = 1e-6) {
  const auto n = static_cast<Eigen::Index>(topo.bus_count);
  DistFlowJacobian J{Matrix(n, n), Matrix(n, n)};
  const Vector zero = Vector::Zero(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    Vector e = Vector::Zero(n);
    e(k) = h;
    J.dv_dp.col(k) = (distflow_squared_voltages(topo, e, zero) - distflow_squared_voltages(topo, -e, zero)) / (2 * h);
    J.dv_dq.col(k) = (distflow_squared_voltages(topo, zero, e) - distflow_squared_voltages(topo, zero, -e)) / (2 * h);
  }
  return J;
}

}  // namespace voltnet::oracle
