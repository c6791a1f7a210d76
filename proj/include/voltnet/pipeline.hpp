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

// End-to-end control-period pipeline: traces -> scenarios -> trained policy
// -> real-time evaluation against the baselines. The command-line tool is a
// thin layer over these functions.

#include <filesystem>
#include <string>
#include <vector>

#include "voltnet/baselines.hpp"
#include "voltnet/config.hpp"
#include "voltnet/evaluation.hpp"
#include "voltnet/feeder.hpp"
#include "voltnet/ieee13.hpp"
#include "voltnet/policy.hpp"
#include "voltnet/scenario.hpp"
#include "voltnet/trainer.hpp"

namespace voltnet {

struct Workspace {
  FeederTopology topo;
  GridModel grid;
  InputMap inputs;
  TraceTable table;
};

inline FeederTopology load_topology(const RunConfig& cfg) {
  if (cfg.feeder_dir.empty()) return ieee13::topology();
  const std::filesystem::path dir(cfg.feeder_dir);
  return load_feeder((dir / "lines.csv").string(), (dir / "inverters.csv").string(),
                     (dir / "solar_buses.csv").string());
}

/// Builds the workspace from traces already scaled to pu.
inline Workspace make_workspace(const RunConfig& cfg, const std::vector<TimeSeriesTrace>& traces) {
  cfg.validate();
  auto topo = load_topology(cfg);
  VoltageLimits limits{Vector::Constant(static_cast<Eigen::Index>(topo.bus_count), cfg.v_lo),
                       Vector::Constant(static_cast<Eigen::Index>(topo.bus_count), cfg.v_hi)};
  auto grid = GridModel::from_topology(topo, std::move(limits));
  InputMap inputs(topo, cfg.telemetry);
  auto table = assemble(traces, topo, {cfg.pf_lo, cfg.pf_hi}, stage_seeds(cfg.seed).reactive);
  return {std::move(topo), std::move(grid), std::move(inputs), std::move(table)};
}

inline Workspace load_workspace(const RunConfig& cfg) {
  cfg.validate();
  return make_workspace(cfg, ingest_traces(cfg.traces_path(), cfg.scale));
}

/// Trace rows of the window starting at `hour`; errors if the traces do not
/// cover a full window.
inline std::vector<std::size_t> window_rows(const RunConfig& cfg, const TraceTable& table, int hour) {
  const std::int64_t start = static_cast<std::int64_t>(hour) * 60;
  const auto rows = table.window(start, start + cfg.window_minutes);
  if (rows.size() != static_cast<std::size_t>(cfg.window_minutes)) {
    throw ContractError("traces cover " + std::to_string(rows.size()) + " of the " +
                        std::to_string(cfg.window_minutes) + " minutes starting at hour " + std::to_string(hour));
  }
  return rows;
}

struct TrainingData {
  ScenarioSet set;
  std::vector<std::size_t> rows;
  double noise_std = 0.0;
};

inline TrainingData training_data(const RunConfig& cfg, const Workspace& ws) {
  TrainingData d;
  d.rows = window_rows(cfg, ws.table, cfg.train_hour);
  d.noise_std = select_noise_std(cfg, ws.table, d.rows);
  const auto measured = measured_scenarios(ws.table, d.rows, ws.inputs);
  d.set = augment(measured, {cfg.replication_factor, d.noise_std, stage_seeds(cfg.seed).augment}, ws.inputs);
  return d;
}

/// Measured scenarios of the test window, unaugmented and in time order.
inline ScenarioSet test_data(const RunConfig& cfg, const Workspace& ws) {
  return {measured_scenarios(ws.table, window_rows(cfg, ws.table, cfg.effective_test_hour()), ws.inputs)};
}

inline TrainConfig train_config(const RunConfig& cfg) {
  TrainConfig t;
  t.epochs = cfg.epochs;
  t.adam.learning_rate = cfg.learning_rate;
  t.dual_step = cfg.dual_step;
  t.dual_decay = cfg.dual_decay;
  t.batch_size = cfg.batch_size;
  t.standardize_inputs = cfg.standardize_inputs;
  t.record_dual_trajectory = cfg.dump_duals;
  t.seed = stage_seeds(cfg.seed).train;
  return t;
}

inline PolicyArch policy_arch(const Workspace& ws) {
  return PolicyArch::two_tier(ws.topo.bus_count, ws.topo.inverters, ws.inputs.utility_dim());
}

struct TrainingRun {
  TrainingData data;
  TrainResult result;
  ModelMetadata metadata;
};

inline TrainingRun run_training(const RunConfig& cfg, const Workspace& ws) {
  auto data = training_data(cfg, ws);
  auto result = train(data.set, policy_arch(ws), ws.grid, train_config(cfg));
  ModelMetadata meta;
  meta.window_start_min = ws.table.timestamps.at(data.rows.front());
  meta.window_end_min = ws.table.timestamps.at(data.rows.back()) + 1;
  meta.telemetry = cfg.telemetry;
  meta.seed = cfg.seed;
  meta.epochs = cfg.epochs;
  meta.scenarios = data.set.size();
  return {std::move(data), std::move(result), std::move(meta)};
}

/// Reports in the order dnn_policy, optimal_policy, deterministic_opf,
/// no_control.
inline std::vector<EvalReport> run_evaluation(const RunConfig& cfg, const Workspace& ws, const PolicyParams& params) {
  const auto test = test_data(cfg, ws);
  return {simulate_realtime(params, test, ws.grid), evaluate_optimal_policy(test, ws.grid),
          evaluate_deterministic_opf(test, ws.grid), evaluate_no_control(test, ws.grid)};
}

}  // namespace voltnet
