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


#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "oracles/grid_search.hpp"
#include "voltnet/baselines.hpp"
#include "workspace.hpp"

namespace voltnet {
namespace {

using testing::random_vector;

QPInstance scalar_qp(double r, double b, double qbar) {
  QPInstance inst;
  inst.R = Matrix::Constant(1, 1, r);
  inst.X = Matrix::Constant(1, 1, 2.0 * r);
  inst.b = Vector::Constant(1, b);
  inst.y = Vector::Ones(1);
  inst.v_lo = Vector::Constant(1, 0.97);
  inst.v_hi = Vector::Constant(1, 1.03);
  inst.qbar = Vector::Constant(1, qbar);
  return inst;
}

// Scalar lattice minimizer of r q^2 - b q over [-qbar, qbar].
double scalar_grid_min(double r, double b, double qbar, double step) {
  double best = 0.0, best_f = 0.0;
  for (double q = -qbar; q <= qbar + 1e-12; q += step) {
    const double f = r * q * q - b * q;
    if (f < best_f) {
      best_f = f;
      best = q;
    }
  }
  return best;
}

TEST(BoxQP, ScalarInteriorMinimizer) {
  const auto res = solve_box_qp(scalar_qp(0.3, 0.12, 0.5), Vector::Zero(2));
  EXPECT_TRUE(res.converged);
  EXPECT_NEAR(res.q(0), 0.2, 1e-8);
  EXPECT_NEAR(res.q(0), scalar_grid_min(0.3, 0.12, 0.5, 1e-4), 1e-4);
}

TEST(BoxQP, ScalarClippedMinimizer) {
  const auto res = solve_box_qp(scalar_qp(0.3, 0.6, 0.5), Vector::Zero(2));
  EXPECT_DOUBLE_EQ(res.q(0), 0.5);
  EXPECT_NEAR(res.q(0), scalar_grid_min(0.3, 0.6, 0.5, 1e-4), 1e-4);
}

TEST(BoxQP, ZeroLinearTermGivesZero) {
  std::mt19937_64 rng(1);
  const auto s = build_sensitivities(testing::random_tree(6, rng));
  const auto res = BoxQPSolver(s.R, Vector::Constant(6, 0.3)).solve(Vector::Zero(6));
  EXPECT_EQ(res.q.norm(), 0.0);
}

TEST(BoxQP, RandomInstancesAreInBoxAndKkt) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto s = build_sensitivities(testing::random_tree(8, rng));
    Vector qbar = random_vector(8, rng, 0.0, 0.5);
    qbar(trial % 8) = 0.0;
    const Vector c = random_vector(8, rng, -0.05, 0.05);
    const auto res = BoxQPSolver(s.R, qbar).solve(c);
    EXPECT_LE((res.q.cwiseAbs() - qbar).maxCoeff(), 0.0);
    EXPECT_EQ(res.q(trial % 8), 0.0);
    EXPECT_LE(box_kkt_residual(s.R, c, qbar, res.q), 1e-6);
  }
}

TEST(BoxQP, ObjectiveDescendsMonotonically) {
  std::mt19937_64 rng(3);
  const auto s = build_sensitivities(testing::random_tree(10, rng));
  BoxQPOptions opts;
  opts.record_objective = true;
  const auto res = BoxQPSolver(s.R, Vector::Constant(10, 0.2), opts).solve(random_vector(10, rng, -0.1, 0.1));
  ASSERT_GT(res.objective_trace.size(), 2u);
  for (std::size_t i = 1; i < res.objective_trace.size(); ++i) {
    EXPECT_LE(res.objective_trace[i], res.objective_trace[i - 1] + 1e-15);
  }
}

TEST(BoxQP, RejectsIndefiniteMatrixAndNegativeMultipliers) {
  Matrix r(2, 2);
  r << 1.0, 2.0, 2.0, 1.0;
  EXPECT_THROW(BoxQPSolver(r, Vector::Ones(2)), ContractError);
  EXPECT_THROW(solve_box_qp(scalar_qp(0.3, 0.1, 0.5), Vector::Constant(2, -1.0)), ContractError);
}

TEST(NoControl, ZeroSetpointsZeroLossVoltageEqualsY) {
  std::mt19937_64 rng(4);
  const auto topo = testing::random_tree(5, rng);
  const auto s = build_sensitivities(topo);
  const auto z = testing::random_conditions(5, rng);
  const Vector q = no_control(5);
  EXPECT_EQ(q.norm(), 0.0);
  const auto ctx = make_context(s, z, 1.0);
  EXPECT_EQ(losses(ctx, s, q), 0.0);
  EXPECT_EQ(voltages(ctx, s, q), ctx.y);
}

FeederTopology two_inverter_tree(std::mt19937_64& rng) {
  auto topo = testing::random_tree(6, rng);
  topo.inverters = {{3, 0.3}, {6, 0.3}};
  return topo;
}

TEST(Opf, SlackConstraintsGiveUnconstrainedMinimizer) {
  std::mt19937_64 rng(5);
  const auto topo = two_inverter_tree(rng);
  const auto grid = GridModel::from_topology(topo, VoltageLimits::uniform(6, 0.5, 1.5));
  GridConditions z{random_vector(6, rng, 0.0, 0.02), random_vector(6, rng, 0.0, 0.02), Vector::Zero(6)};
  const auto res = deterministic_opf(z, grid);
  EXPECT_EQ(res.status, OpfStatus::optimal);
  EXPECT_EQ(res.dual.lambda.norm(), 0.0);
  const auto ctx = grid.context(z);
  const auto free = solve_box_qp(make_qp_instance(grid, ctx), Vector::Zero(12), {1e-13});
  EXPECT_LT((res.q - free.q).norm(), 1e-10);
}

TEST(Opf, MatchesGridSearchOnSmallInstances) {
  std::mt19937_64 rng(6);
  int binding = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const auto topo = two_inverter_tree(rng);
    const auto grid = GridModel::from_topology(topo, VoltageLimits::uniform(6, 0.97, 1.0));
    GridConditions z{random_vector(6, rng, 0.0, 0.05), random_vector(6, rng, 0.0, 0.02),
                     random_vector(6, rng, 0.0, 0.4)};
    const auto ctx = grid.context(z);
    const auto res = deterministic_opf(grid, ctx);
    const auto oracle = oracle::grid_search_two(grid, ctx, 2, 5, 2.5e-3);
    if (!oracle.feasible) continue;  // the lattice may miss a thin feasible set
    ASSERT_EQ(res.status, OpfStatus::optimal);
    if (res.dual.lambda.maxCoeff() > 0.0) ++binding;
    const double f = losses(ctx, grid.sens, res.q);
    EXPECT_LE(f, oracle.objective + 1e-9);
    EXPECT_LT(oracle.objective - f, 5e-3);
    EXPECT_LE(constraint_g(ctx, grid.sens, res.q, grid.limits).maxCoeff(), 1e-6);
  }
  EXPECT_GT(binding, 0);
}

TEST(Opf, InfeasibleInstanceIsReported) {
  // A single line with tiny capability cannot pull a 10% overvoltage back.
  auto topo = testing::single_line();
  topo.inverters = {{1, 0.01}};
  const auto grid = GridModel::from_topology(topo);
  GridConditions z{Vector::Zero(1), Vector::Zero(1), Vector::Constant(1, 2.0)};
  const auto res = deterministic_opf(z, grid);
  EXPECT_EQ(res.status, OpfStatus::infeasible);
}

TEST(Opf, ReportsActiveConstraintsAndSaturation) {
  auto topo = testing::single_line();
  topo.inverters = {{1, 1.0}};
  const auto grid = GridModel::from_topology(topo);
  GridConditions z{Vector::Zero(1), Vector::Zero(1), Vector::Constant(1, 0.6)};
  const auto res = deterministic_opf(z, grid);
  ASSERT_EQ(res.status, OpfStatus::optimal);
  ASSERT_EQ(res.active.size(), 1u);
  EXPECT_TRUE(res.active[0].upper);
  EXPECT_GT(res.active[0].multiplier, 0.0);
  EXPECT_TRUE(res.saturated_inverters.empty());
  EXPECT_NEAR(voltages(grid.context(z), grid.sens, res.q)(0), 1.03, 1e-8);
}

TEST(DualDecomposition, WideLimitsKeepMultipliersAtZero) {
  std::mt19937_64 rng(7);
  const auto topo = two_inverter_tree(rng);
  const auto grid = GridModel::from_topology(topo, VoltageLimits::uniform(6, 0.5, 1.5));
  std::vector<ConstraintContext> ctx;
  for (int k = 0; k < 10; ++k) ctx.push_back(grid.context(testing::random_conditions(6, rng)));
  const auto st = dual_decomposition(grid, ctx);
  EXPECT_TRUE(st.converged);
  EXPECT_EQ(st.dual.lambda.norm(), 0.0);
  for (std::size_t k = 0; k < ctx.size(); ++k) {
    const auto free = solve_box_qp(make_qp_instance(grid, ctx[k]), Vector::Zero(12), {1e-11});
    EXPECT_LT((st.q[k] - free.q).norm(), 1e-8);
  }
}

TEST(DualDecomposition, SingleScenarioMatchesOpf) {
  std::mt19937_64 rng(8);
  int checked = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto topo = two_inverter_tree(rng);
    const auto grid = GridModel::from_topology(topo, VoltageLimits::uniform(6, 0.97, 1.01));
    GridConditions z{random_vector(6, rng, 0.0, 0.05), random_vector(6, rng, 0.0, 0.02),
                     random_vector(6, rng, 0.0, 0.3)};
    const auto ctx = grid.context(z);
    const auto opf = deterministic_opf(grid, ctx);
    if (opf.status != OpfStatus::optimal) continue;
    const std::vector<ConstraintContext> one{ctx};
    const auto st = dual_decomposition(grid, one);
    EXPECT_LT((st.q[0] - opf.q).lpNorm<Eigen::Infinity>(), 1e-5)
        << "trial " << trial << " dd iters " << st.iterations << " converged " << st.converged << " opf iters "
        << opf.iterations << " lambda dd " << st.dual.lambda.transpose() << " opf " << opf.dual.lambda.transpose();
    ++checked;
  }
  EXPECT_GT(checked, 3);
}

TEST(DualDecomposition, Preconditions) {
  std::mt19937_64 rng(9);
  const auto grid = GridModel::from_topology(two_inverter_tree(rng));
  EXPECT_THROW(dual_decomposition(grid, std::vector<ConstraintContext>{}), ContractError);
}

// High-solar window of the bundled feeder.
class BundledBaselines : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    cfg_ = new RunConfig;
    ws_ = new Workspace(testing::bundled_workspace(*cfg_));
    test_ = new ScenarioSet(test_data(*cfg_, *ws_));
  }
  static void TearDownTestSuite() {
    delete test_;
    delete ws_;
    delete cfg_;
  }
  static RunConfig* cfg_;
  static Workspace* ws_;
  static ScenarioSet* test_;
};
RunConfig* BundledBaselines::cfg_ = nullptr;
Workspace* BundledBaselines::ws_ = nullptr;
ScenarioSet* BundledBaselines::test_ = nullptr;

TEST_F(BundledBaselines, DualDecompositionResidualDecreasesOverLastThird) {
  const auto st = dual_decomposition(ws_->grid, *test_);
  ASSERT_TRUE(st.converged);
  ASSERT_GT(st.trace.size(), 30u);
  for (const auto& r : st.trace) ASSERT_GE(r.lambda_max, 0.0);
  const auto third = st.trace.size() / 3;
  const double start = st.trace[st.trace.size() - third].residual;
  EXPECT_LE(st.trace.back().residual, start);
  EXPECT_LE(std::max(0.0, st.avg_g.maxCoeff()), 1e-8);
}

TEST_F(BundledBaselines, StressHourOpfMatchesGridSearch) {
  const auto& grid = ws_->grid;
  // Worst no-control overvoltage in the window.
  std::size_t worst = 0;
  double vmax = 0.0;
  for (std::size_t t = 0; t < test_->size(); ++t) {
    const double v = grid.context((*test_)[t].z).y.maxCoeff();
    if (v > vmax) {
      vmax = v;
      worst = t;
    }
  }
  ASSERT_GT(vmax, cfg_->v_hi);
  const auto ctx = grid.context((*test_)[worst].z);
  const auto res = deterministic_opf(grid, ctx);
  ASSERT_EQ(res.status, OpfStatus::optimal);
  const auto oracle = oracle::grid_search_two(grid, ctx, 8, 11, 2.5e-3);
  ASSERT_TRUE(oracle.feasible);
  const double f = losses(ctx, grid.sens, res.q);
  EXPECT_LE(f, oracle.objective + 1e-9);
  EXPECT_LT(oracle.objective - f, 5e-3);
  EXPECT_LE(constraint_g(ctx, grid.sens, res.q, grid.limits).maxCoeff(), 1e-6);
}

}  // namespace
}  // namespace voltnet
