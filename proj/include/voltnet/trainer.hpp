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

// Stochastic primal-dual training of the two-tier policy: Adam on theta,
// projected ascent with a decaying step on the voltage-constraint multipliers.
//
// The primal step needs no projection onto the inverter box because the
// policy output is qbar * tanh(.) for every theta.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "voltnet/error.hpp"
#include "voltnet/feeder.hpp"
#include "voltnet/policy.hpp"
#include "voltnet/scenario.hpp"

namespace voltnet {

/// Everything about the feeder the trainer needs besides the scenarios.
struct GridModel {
  SensitivityMatrices sens;
  VoltageLimits limits;
  double v0 = 1.0;
  Vector qbar;  // N-vector, zero off the inverter buses

  static GridModel from_topology(const FeederTopology& topo, VoltageLimits limits) {
    auto sens = build_sensitivities(topo);
    detail::require_size(limits.v_lo, sens.size(), "v_lo");
    detail::require_size(limits.v_hi, sens.size(), "v_hi");
    for (Eigen::Index i = 0; i < sens.size(); ++i) {
      detail::require(limits.v_lo(i) < limits.v_hi(i), "voltage limits need v_lo < v_hi");
    }
    return {std::move(sens), std::move(limits), topo.v0, topo.qbar()};
  }

  static GridModel from_topology(const FeederTopology& topo) {
    return from_topology(topo, VoltageLimits::uniform(topo.bus_count));
  }

  Eigen::Index bus_count() const noexcept { return sens.size(); }
  ConstraintContext context(const GridConditions& z) const { return make_context(sens, z, v0); }
};

/// Multipliers for [upper; lower] voltage constraints, always >= 0.
struct DualVars {
  Vector lambda;

  static DualVars zeros(Eigen::Index bus_count) { return {Vector::Zero(2 * bus_count)}; }
  auto upper() const { return lambda.head(lambda.size() / 2); }
  auto lower() const { return lambda.tail(lambda.size() / 2); }
};

struct AdamConfig {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  Vector m;
  Vector v;
  std::int64_t t = 0;

  static AdamState zeros(Eigen::Index n) { return {Vector::Zero(n), Vector::Zero(n), 0}; }
};

struct TrainConfig {
  std::size_t epochs = 30;
  AdamConfig adam;
  double dual_step = 1.0;   // mu_0
  double dual_decay = 0.5;  // mu_k = mu_0 / (k + 1)^decay
  std::size_t batch_size = 1;
  bool reshuffle_each_epoch = true;
  bool update_duals = true;  // false keeps lambda at its initial value
  bool standardize_inputs = true;
  bool record_dual_trajectory = false;
  double divergence_loss = 1e6;
  std::uint64_t seed = 0;
  std::optional<Vector> initial_lambda;

  void validate() const {
    detail::require(epochs >= 1, "epochs must be >= 1");
    detail::require(adam.learning_rate > 0.0 && adam.epsilon > 0.0, "Adam rates must be positive");
    detail::require(adam.beta1 > 0.0 && adam.beta1 < 1.0 && adam.beta2 > 0.0 && adam.beta2 < 1.0,
                    "Adam betas must lie in (0, 1)");
    detail::require(dual_step > 0.0 && dual_decay >= 0.0, "dual step must be positive");
    detail::require(batch_size >= 1, "batch_size must be >= 1");
  }
};

/// Per-scenario terms of the Lagrangian at the current policy.
struct ScenarioEvaluation {
  Vector q;
  double loss = 0.0;
  Vector g;
};

inline ScenarioEvaluation evaluate_scenario(const PolicyParams& p, const GridModel& grid,
                                            const Scenario& s) {
  const auto ctx = grid.context(s.z);
  ScenarioEvaluation e;
  e.q = forward(p, s.w);
  e.loss = losses(ctx, grid.sens, e.q);
  e.g = constraint_g(ctx, grid.sens, e.q, grid.limits);
  return e;
}

/// Sample-average Lagrangian (1/K) sum_k [loss_k + lambda' g_k].
inline double lagrangian(const PolicyParams& p, const DualVars& dual, const GridModel& grid,
                         const ScenarioSet& set) {
  if (set.empty()) throw ContractError("lagrangian needs a nonempty scenario set");
  detail::require(dual.lambda.minCoeff() >= 0.0, "multipliers must be nonnegative");
  detail::require_size(dual.lambda, 2 * grid.bus_count(), "lambda");
  double total = 0.0;
  for (const auto& s : set) {
    const auto e = evaluate_scenario(p, grid, s);
    total += e.loss + dual.lambda.dot(e.g);
  }
  return total / static_cast<double>(set.size());
}

/// Gradient of loss_k + lambda' g_k with respect to theta:
/// J' (2 R q - b + X (lambda_up - lambda_lo)).
inline Vector grad_theta(const PolicyParams& p, const DualVars& dual, const GridModel& grid,
                         const Scenario& s) {
  detail::require_size(dual.lambda, 2 * grid.bus_count(), "lambda");
  detail::require(dual.lambda.minCoeff() >= 0.0, "multipliers must be nonnegative");
  const auto ctx = grid.context(s.z);
  const Vector q = forward(p, s.w);
  const Vector c = losses_gradient(ctx, grid.sens, q) + grid.sens.X.transpose() * (dual.upper() - dual.lower());
  return vector_jacobian_product(p, s.w, c);
}

/// One Adam update of theta in place. Throws DivergenceError on a non-finite
/// gradient.
inline void primal_step(Vector& theta, AdamState& state, const Vector& grad, const AdamConfig& cfg) {
  detail::require(grad.size() == theta.size() && state.m.size() == theta.size() && state.v.size() == theta.size(),
                  "Adam state does not match theta");
  if (!grad.allFinite()) throw DivergenceError("non-finite gradient at Adam step " + std::to_string(state.t + 1));
  state.t += 1;
  state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grad;
  state.v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  theta.array() -= cfg.learning_rate * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + cfg.epsilon);
}

inline double dual_step_size(std::size_t k, double step0, double decay) {
  return step0 / std::pow(static_cast<double>(k) + 1.0, decay);
}

/// lambda' = max(0, lambda + mu_k g), elementwise.
inline DualVars project_dual(const DualVars& dual, const Vector& g, double step) {
  detail::require(g.size() == dual.lambda.size(), "constraint vector does not match lambda");
  return {(dual.lambda + step * g).cwiseMax(0.0)};
}

/// Dual ascent on one scenario, with g evaluated at the freshly updated policy.
inline DualVars dual_step(const DualVars& dual, const PolicyParams& updated, const GridModel& grid,
                          const Scenario& s, std::size_t k, const TrainConfig& cfg) {
  detail::require(dual.lambda.minCoeff() >= 0.0, "multipliers must be nonnegative");
  const auto e = evaluate_scenario(updated, grid, s);
  return project_dual(dual, e.g, dual_step_size(k, cfg.dual_step, cfg.dual_decay));
}

struct EpochRecord {
  std::size_t epoch = 0;       // 1-based
  double avg_loss = 0.0;       // over the training set at the end of the epoch
  double avg_max_g = 0.0;      // mean over scenarios of max_i g_i
  std::size_t violations = 0;  // scenarios with some g_i > kViolationTolerance
  double lambda_max = 0.0;
  double max_excursion = 0.0;  // largest g_i over all scenarios, floored at 0
  double lagrangian = 0.0;     // sample-average Lagrangian at the epoch's final lambda
  Vector avg_g;                // sample-average constraint vector
  Vector lambda;
};

struct TrainingTrace {
  std::vector<EpochRecord> epochs;
  std::vector<Vector> dual_trajectory;  // lambda after every dual update, if recorded
};

struct TrainResult {
  PolicyParams params;
  DualVars dual;
  TrainingTrace trace;
};

namespace detail {
inline EpochRecord summarize_epoch(std::size_t epoch, const PolicyParams& p, const DualVars& dual,
                                   const GridModel& grid, const ScenarioSet& set) {
  EpochRecord r;
  r.epoch = epoch;
  r.avg_g = Vector::Zero(2 * grid.bus_count());
  for (const auto& s : set) {
    const auto e = evaluate_scenario(p, grid, s);
    r.avg_loss += e.loss;
    const double gmax = e.g.maxCoeff();
    r.avg_max_g += gmax;
    r.max_excursion = std::max(r.max_excursion, gmax);
    if (gmax > kViolationTolerance) ++r.violations;
    r.avg_g += e.g;
  }
  const double k = static_cast<double>(set.size());
  r.avg_loss /= k;
  r.avg_max_g /= k;
  r.avg_g /= k;
  r.lambda = dual.lambda;
  r.lambda_max = dual.lambda.maxCoeff();
  r.lagrangian = r.avg_loss + dual.lambda.dot(r.avg_g);
  return r;
}
}  // namespace detail

/// Runs epochs x ceil(K / batch) stochastic primal-dual iterations. Each
/// iteration takes an Adam step on the batch-averaged Lagrangian gradient, then
/// a dual step with the batch-averaged constraint value at the new theta.
inline TrainResult train(const ScenarioSet& set, const PolicyArch& arch, const GridModel& grid,
                         const TrainConfig& cfg) {
  cfg.validate();
  if (set.empty()) throw ContractError("training needs a nonempty scenario set");
  detail::require(static_cast<Eigen::Index>(arch.bus_count) == grid.bus_count(),
                  "architecture and grid disagree on the bus count");

  auto params = init_params(arch, split_seed(cfg.seed, 0));
  if (cfg.standardize_inputs) {
    std::vector<ScenarioInputs> inputs;
    inputs.reserve(set.size());
    for (const auto& s : set) inputs.push_back(s.w);
    params.set_scaling(InputScaling::fit(inputs));
  }
  DualVars dual = DualVars::zeros(grid.bus_count());
  if (cfg.initial_lambda) {
    detail::require_size(*cfg.initial_lambda, 2 * grid.bus_count(), "initial_lambda");
    detail::require(cfg.initial_lambda->minCoeff() >= 0.0, "initial_lambda must be nonnegative");
    dual.lambda = *cfg.initial_lambda;
  }
  auto adam = AdamState::zeros(params.theta().size());

  TrainingTrace trace;
  std::vector<std::size_t> order(set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t k = 0;  // dual update counter
  std::size_t iteration = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.reshuffle_each_epoch) {
      std::mt19937_64 rng(split_seed(cfg.seed, epoch));
      std::shuffle(order.begin(), order.end(), rng);
    }
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const double inv_batch = 1.0 / static_cast<double>(stop - start);
      ++iteration;

      Vector grad = Vector::Zero(params.theta().size());
      for (std::size_t i = start; i < stop; ++i) grad += grad_theta(params, dual, grid, set[order[i]]);
      grad *= inv_batch;
      if (!grad.allFinite()) {
        throw DivergenceError("non-finite gradient at iteration " + std::to_string(iteration) + " (scenario " +
                              std::to_string(order[start]) + ")");
      }
      primal_step(params.theta(), adam, grad, cfg.adam);
      if (!params.theta().allFinite()) {
        throw DivergenceError("non-finite parameter after iteration " + std::to_string(iteration));
      }

      if (cfg.update_duals) {
        Vector g = Vector::Zero(dual.lambda.size());
        for (std::size_t i = start; i < stop; ++i) g += evaluate_scenario(params, grid, set[order[i]]).g;
        g *= inv_batch;
        dual = project_dual(dual, g, dual_step_size(k, cfg.dual_step, cfg.dual_decay));
        ++k;
        if (cfg.record_dual_trajectory) trace.dual_trajectory.push_back(dual.lambda);
      }
    }
    trace.epochs.push_back(detail::summarize_epoch(epoch, params, dual, grid, set));
    const auto& last = trace.epochs.back();
    if (!std::isfinite(last.avg_loss) || std::abs(last.avg_loss) > cfg.divergence_loss) {
      throw DivergenceError("average loss " + std::to_string(last.avg_loss) + " exceeds the divergence bound at epoch " +
                            std::to_string(epoch));
    }
  }
  return {std::move(params), std::move(dual), std::move(trace)};
}

inline void write_trace_csv(std::ostream& out, const TrainingTrace& trace) {
  out.precision(17);
  out << "epoch,avg_loss,avg_max_g,violations,lambda_max\n";
  for (const auto& r : trace.epochs) {
    out << r.epoch << ',' << r.avg_loss << ',' << r.avg_max_g << ',' << r.violations << ',' << r.lambda_max << '\n';
  }
}

/// One row per dual update: `iteration,lambda_1,...,lambda_2N`.
inline void write_dual_trajectory_csv(std::ostream& out, const TrainingTrace& trace) {
  out.precision(17);
  out << "iteration";
  const auto width = trace.dual_trajectory.empty() ? 0 : trace.dual_trajectory.front().size();
  for (Eigen::Index i = 0; i < width; ++i) out << ",lambda_" << (i + 1);
  out << '\n';
  for (std::size_t k = 0; k < trace.dual_trajectory.size(); ++k) {
    out << k;
    for (Eigen::Index i = 0; i < width; ++i) out << ',' << trace.dual_trajectory[k](i);
    out << '\n';
  }
}

}  // namespace voltnet
