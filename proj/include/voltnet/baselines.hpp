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

// Comparison solvers: box-constrained QP by projected gradient, the
// unparameterized optimal policy by averaged-constraint dual decomposition,
// the per-scenario OPF by dual projected gradient, and the no-control policy.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "voltnet/error.hpp"
#include "voltnet/feeder.hpp"
#include "voltnet/trainer.hpp"

namespace voltnet {

/// min over |q_n| <= qbar_n of q'Rq - b'q + lambda' g(q).
struct QPInstance {
  Matrix R;
  Matrix X;
  Vector b;
  Vector y;
  Vector v_lo;
  Vector v_hi;
  Vector qbar;
};

inline QPInstance make_qp_instance(const GridModel& grid, const ConstraintContext& ctx) {
  return {grid.sens.R, grid.sens.X, ctx.b, ctx.y, grid.limits.v_lo, grid.limits.v_hi, grid.qbar};
}

struct BoxQPOptions {
  double tolerance = 1e-8;  // fixed-point residual of one projected-gradient step
  std::size_t max_iterations = 100000;
  double step_margin = 1e-12;     // delta in the step 1 / (2 lambda_max(R) + delta)
  bool record_objective = false;  // keep the objective after every iteration
};

struct BoxQPResult {
  Vector q;
  std::size_t iterations = 0;
  double residual = 0.0;
  bool converged = false;
  std::vector<double> objective_trace;
};

/// Projected-gradient solver for a fixed (R, qbar). Coordinates with qbar = 0
/// are pinned at zero, so the iteration runs on the free block only.
class BoxQPSolver {
 public:
  BoxQPSolver(const Matrix& R, const Vector& qbar, BoxQPOptions opts = {})
      : opts_(opts), n_(R.rows()) {
    detail::require(R.rows() == R.cols() && qbar.size() == R.rows(), "QP dimensions disagree");
    detail::require(qbar.minCoeff() >= 0.0, "box half-widths must be nonnegative");
    if (!is_psd(R)) throw ContractError("QP matrix R is not symmetric positive semidefinite");
    for (Eigen::Index i = 0; i < n_; ++i) {
      if (qbar(i) > 0.0) free_.push_back(i);
    }
    const auto m = static_cast<Eigen::Index>(free_.size());
    r_free_.resize(m, m);
    qbar_free_.resize(m);
    for (Eigen::Index a = 0; a < m; ++a) {
      qbar_free_(a) = qbar(free_[static_cast<std::size_t>(a)]);
      for (Eigen::Index c = 0; c < m; ++c) r_free_(a, c) = R(free_[static_cast<std::size_t>(a)], free_[static_cast<std::size_t>(c)]);
    }
    step_ = m > 0 ? 1.0 / (2.0 * std::max(0.0, max_eigenvalue(r_free_)) + opts_.step_margin) : 0.0;
  }

  const std::vector<Eigen::Index>& free_coordinates() const noexcept { return free_; }

  /// Minimizes q'Rq + c'q over the box. `warm` (full length) seeds the iteration.
  BoxQPResult solve(const Vector& c, const Vector* warm = nullptr) const {
    detail::require_size(c, n_, "linear term");
    BoxQPResult out;
    out.q = Vector::Zero(n_);
    const auto m = static_cast<Eigen::Index>(free_.size());
    if (m == 0) {
      out.converged = true;
      return out;
    }
    Vector cf(m), x(m);
    for (Eigen::Index a = 0; a < m; ++a) {
      cf(a) = c(free_[static_cast<std::size_t>(a)]);
      x(a) = warm ? (*warm)(free_[static_cast<std::size_t>(a)]) : 0.0;
    }
    x = x.cwiseMax(-qbar_free_).cwiseMin(qbar_free_);
    auto objective = [&](const Vector& v) { return v.dot(r_free_ * v) + cf.dot(v); };
    if (opts_.record_objective) out.objective_trace.push_back(objective(x));
    Vector next(m);
    for (std::size_t it = 0; it < opts_.max_iterations; ++it) {
      next = (x - step_ * (2.0 * r_free_ * x + cf)).cwiseMax(-qbar_free_).cwiseMin(qbar_free_);
      out.residual = (next - x).lpNorm<Eigen::Infinity>();
      x.swap(next);
      out.iterations = it + 1;
      if (opts_.record_objective) out.objective_trace.push_back(objective(x));
      if (out.residual < opts_.tolerance) {
        out.converged = true;
        break;
      }
    }
    for (Eigen::Index a = 0; a < m; ++a) out.q(free_[static_cast<std::size_t>(a)]) = x(a);
    return out;
  }

 private:
  BoxQPOptions opts_;
  Eigen::Index n_;
  std::vector<Eigen::Index> free_;
  Matrix r_free_;
  Vector qbar_free_;
  double step_ = 0.0;
};

/// Linear term of the inner Lagrangian: -b + X'(lambda_up - lambda_lo).
inline Vector lagrangian_linear_term(const Matrix& X, const Vector& b, const Vector& lambda) {
  const auto n = b.size();
  detail::require_size(lambda, 2 * n, "lambda");
  return -b + X.transpose() * (lambda.head(n) - lambda.tail(n));
}

inline BoxQPResult solve_box_qp(const QPInstance& inst, const Vector& lambda, const BoxQPOptions& opts = {},
                                const Vector* warm = nullptr) {
  detail::require(lambda.minCoeff() >= 0.0, "multipliers must be nonnegative");
  const BoxQPSolver solver(inst.R, inst.qbar, opts);
  return solver.solve(lagrangian_linear_term(inst.X, inst.b, lambda), warm);
}

/// Maximum over the box-projected gradient, ||q - P(q - grad)||_inf; zero at a
/// KKT point of the inner problem.
inline double box_kkt_residual(const Matrix& R, const Vector& c, const Vector& qbar, const Vector& q) {
  const Vector step = (q - (2.0 * R * q + c)).cwiseMax(-qbar).cwiseMin(qbar);
  return (q - step).lpNorm<Eigen::Infinity>();
}

// ---------------------------------------------------------------------------

/// 1 / L for L = lambda_max(X_free R_free^-1 X_free'), the Lipschitz
/// constant of the dual gradient lambda -> g(q(lambda)). The bound holds with
/// the box because the inner minimizer is nonexpansive in the 2R norm.
inline double dual_step_bound(const GridModel& grid, const BoxQPSolver& solver) {
  const auto& free = solver.free_coordinates();
  detail::require(!free.empty(), "no inverter with reactive headroom");
  const auto n = grid.bus_count();
  const auto m = static_cast<Eigen::Index>(free.size());
  Matrix r_free(m, m), x_free(n, m);
  for (Eigen::Index a = 0; a < m; ++a) {
    x_free.col(a) = grid.sens.X.col(free[static_cast<std::size_t>(a)]);
    for (Eigen::Index c = 0; c < m; ++c) {
      r_free(a, c) = grid.sens.R(free[static_cast<std::size_t>(a)], free[static_cast<std::size_t>(c)]);
    }
  }
  const Eigen::LLT<Matrix> llt(r_free);
  detail::require(llt.info() == Eigen::Success && min_eigenvalue(r_free) > 0.0,
                  "R must be positive definite on the inverter buses");
  const Matrix k = x_free * llt.solve(x_free.transpose());
  return 1.0 / max_eigenvalue(0.5 * (k + k.transpose()));
}

struct DualDecompositionConfig {
  std::size_t max_iterations = 50000;
  double dual_step = 0.0;  // mu_0; 0 selects 1.9 * dual_step_bound()
  // The averaged constraint is an exact dual gradient, so a constant step
  // below 2 / L converges; a positive decay reproduces the trainer schedule.
  double dual_decay = 0.0;
  double tolerance = 1e-12;  // stop once every multiplier moves less than this
  double divergence_lambda = 1e8;
  BoxQPOptions inner{1e-11};
};

struct DualDecompositionRecord {
  std::size_t iteration = 0;
  double avg_loss = 0.0;
  double residual = 0.0;  // max(0, max_i avg g_i)
  double lambda_max = 0.0;
};

/// Shared multipliers and per-scenario setpoints of the optimal policy.
struct OptimalPolicyState {
  DualVars dual;
  std::vector<Vector> q;
  std::vector<DualDecompositionRecord> trace;
  std::size_t iterations = 0;
  bool converged = false;
  Vector avg_g;
};

/// Solves min E[loss] s.t. E[g] <= 0 with per-scenario setpoints: every
/// iteration minimizes each scenario's Lagrangian for the shared lambda, then
/// takes a projected ascent step along the averaged constraint.
inline OptimalPolicyState dual_decomposition(const GridModel& grid, std::span<const ConstraintContext> contexts,
                                             const DualDecompositionConfig& cfg = {}) {
  if (contexts.empty()) throw ContractError("dual decomposition needs at least one scenario");
  const auto n = grid.bus_count();
  const BoxQPSolver solver(grid.sens.R, grid.qbar, cfg.inner);
  const double inv_k = 1.0 / static_cast<double>(contexts.size());
  const double step0 = cfg.dual_step > 0.0                   ? cfg.dual_step
                       : solver.free_coordinates().empty() ? 1.0
                                                           : 1.9 * dual_step_bound(grid, solver);

  OptimalPolicyState st;
  st.dual = DualVars::zeros(n);
  st.q.assign(contexts.size(), Vector::Zero(n));
  auto inner_pass = [&](const DualVars& dual, Vector& avg_g, double& avg_loss) {
    avg_g = Vector::Zero(2 * n);
    avg_loss = 0.0;
    for (std::size_t k = 0; k < contexts.size(); ++k) {
      const auto& ctx = contexts[k];
      st.q[k] = solver.solve(lagrangian_linear_term(grid.sens.X, ctx.b, dual.lambda), &st.q[k]).q;
      avg_g += constraint_g(ctx, grid.sens, st.q[k], grid.limits);
      avg_loss += losses(ctx, grid.sens, st.q[k]);
    }
    avg_g *= inv_k;
    avg_loss *= inv_k;
  };

  Vector avg_g;
  double avg_loss = 0.0;
  for (std::size_t t = 0; t < cfg.max_iterations; ++t) {
    inner_pass(st.dual, avg_g, avg_loss);
    const auto next = project_dual(st.dual, avg_g, dual_step_size(t, step0, cfg.dual_decay));
    const double moved = (next.lambda - st.dual.lambda).lpNorm<Eigen::Infinity>();
    st.dual = next;
    st.iterations = t + 1;
    st.trace.push_back({t + 1, avg_loss, std::max(0.0, avg_g.maxCoeff()), st.dual.lambda.maxCoeff()});
    if (!st.dual.lambda.allFinite() || st.dual.lambda.maxCoeff() > cfg.divergence_lambda) {
      throw DivergenceError("dual decomposition multipliers diverged at iteration " + std::to_string(t + 1));
    }
    if (moved < cfg.tolerance) {
      st.converged = true;
      break;
    }
  }
  inner_pass(st.dual, avg_g, avg_loss);
  st.avg_g = avg_g;
  return st;
}

inline OptimalPolicyState dual_decomposition(const GridModel& grid, const ScenarioSet& set,
                                             const DualDecompositionConfig& cfg = {}) {
  std::vector<ConstraintContext> contexts;
  contexts.reserve(set.size());
  for (const auto& s : set) contexts.push_back(grid.context(s.z));
  return dual_decomposition(grid, contexts, cfg);
}

// ---------------------------------------------------------------------------

enum class OpfStatus { optimal, infeasible, iteration_limit };

inline const char* to_string(OpfStatus s) {
  switch (s) {
    case OpfStatus::optimal: return "optimal";
    case OpfStatus::infeasible: return "infeasible";
    case OpfStatus::iteration_limit: return "iteration_limit";
  }
  return "unknown";
}

struct ActiveConstraint {
  BusId bus = 0;
  bool upper = true;  // v <= v_hi if true, v >= v_lo otherwise
  double multiplier = 0.0;
  double value = 0.0;  // g entry at the solution
};

struct OpfResult {
  Vector q;
  DualVars dual;
  OpfStatus status = OpfStatus::iteration_limit;
  std::size_t iterations = 0;
  double residual = 0.0;  // ||lambda - [lambda + g]_+||_inf
  std::vector<ActiveConstraint> active;
  std::vector<BusId> saturated_inverters;  // |q_n| = qbar_n
};

struct OpfOptions {
  double tolerance = 1e-10;
  std::size_t max_iterations = 200000;
  double lambda_cap = 1e4;  // multipliers beyond this are taken as infeasibility
  BoxQPOptions inner{1e-13};
};

/// Exact per-scenario OPF: min loss s.t. g <= 0 over the box, by projected
/// gradient ascent on the multipliers with the fixed step dual_step_bound().
/// Infeasibility is declared when the multipliers exceed `lambda_cap`.
inline OpfResult deterministic_opf(const GridModel& grid, const ConstraintContext& ctx, const OpfOptions& opts = {}) {
  const auto n = grid.bus_count();
  const BoxQPSolver solver(grid.sens.R, grid.qbar, opts.inner);
  const auto& free = solver.free_coordinates();
  OpfResult res;
  res.dual = DualVars::zeros(n);
  res.q = Vector::Zero(n);
  if (free.empty()) {
    const Vector g = constraint_g(ctx, grid.sens, res.q, grid.limits);
    res.status = g.maxCoeff() <= opts.tolerance ? OpfStatus::optimal : OpfStatus::infeasible;
    res.residual = std::max(0.0, g.maxCoeff());
    return res;
  }
  const double step = dual_step_bound(grid, solver);

  Vector q = Vector::Zero(n);
  for (std::size_t it = 0; it < opts.max_iterations; ++it) {
    q = solver.solve(lagrangian_linear_term(grid.sens.X, ctx.b, res.dual.lambda), &q).q;
    const Vector g = constraint_g(ctx, grid.sens, q, grid.limits);
    res.residual = (res.dual.lambda - (res.dual.lambda + g).cwiseMax(0.0)).lpNorm<Eigen::Infinity>();
    res.iterations = it + 1;
    if (res.residual <= opts.tolerance) {
      res.status = OpfStatus::optimal;
      break;
    }
    res.dual = project_dual(res.dual, g, step);
    if (res.dual.lambda.maxCoeff() > opts.lambda_cap) {
      res.status = OpfStatus::infeasible;
      break;
    }
  }
  res.q = q;
  const Vector g = constraint_g(ctx, grid.sens, q, grid.limits);
  for (Eigen::Index i = 0; i < 2 * n; ++i) {
    if (res.dual.lambda(i) > 0.0 || std::abs(g(i)) <= 1e-7) {
      res.active.push_back({static_cast<BusId>(i % n + 1), i < n, res.dual.lambda(i), g(i)});
    }
  }
  for (const auto i : free) {
    if (std::abs(std::abs(q(i)) - grid.qbar(i)) <= 1e-12) res.saturated_inverters.push_back(static_cast<BusId>(i + 1));
  }
  return res;
}

inline OpfResult deterministic_opf(const GridConditions& z, const GridModel& grid, const OpfOptions& opts = {}) {
  return deterministic_opf(grid, grid.context(z), opts);
}

/// Inverters at unit power factor.
inline Vector no_control(Eigen::Index bus_count) { return Vector::Zero(bus_count); }

}  // namespace voltnet
