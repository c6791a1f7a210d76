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

// Real-time evaluation of a trained policy and of the baselines over a test
// window, and side-by-side comparison tables.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "voltnet/baselines.hpp"
#include "voltnet/csv.hpp"
#include "voltnet/error.hpp"
#include "voltnet/feeder.hpp"
#include "voltnet/policy.hpp"
#include "voltnet/scenario.hpp"
#include "voltnet/trainer.hpp"

namespace voltnet {

enum class Method { dnn_policy, optimal_policy, deterministic_opf, no_control };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::dnn_policy: return "dnn_policy";
    case Method::optimal_policy: return "optimal_policy";
    case Method::deterministic_opf: return "deterministic_opf";
    case Method::no_control: return "no_control";
  }
  return "unknown";
}

inline Method method_from_string(const std::string& s) {
  for (auto m : {Method::dnn_policy, Method::optimal_policy, Method::deterministic_opf, Method::no_control}) {
    if (s == to_string(m)) return m;
  }
  throw ContractError("unknown method '" + s + "'");
}

/// Bytes per broadcast scalar.
inline constexpr std::size_t kScalarBytes = 8;

struct TimestepRecord {
  std::size_t timestep = 0;
  Method method = Method::no_control;
  double loss = 0.0;
  double vmax = 0.0;
  double vmin = 0.0;
  std::size_t violations = 0;     // buses beyond the limits by more than kViolationTolerance
  double violation_energy = 0.0;  // sum over buses of the excursion beyond the limits, pu
  std::size_t comm_bytes = 0;     // real-time downlink traffic
};

struct EvalReport {
  Method method = Method::no_control;
  std::vector<TimestepRecord> records;
  Vector avg_g;  // sample average of the constraint vector
  std::map<std::string, std::string> solver_info;

  double average_loss() const {
    double s = 0.0;
    for (const auto& r : records) s += r.loss;
    return records.empty() ? 0.0 : s / static_cast<double>(records.size());
  }
  std::size_t total_violations() const {
    std::size_t s = 0;
    for (const auto& r : records) s += r.violations;
    return s;
  }
  std::size_t violating_timesteps() const {
    return static_cast<std::size_t>(std::count_if(records.begin(), records.end(),
                                                  [](const auto& r) { return r.violations > 0; }));
  }
  double total_violation_energy() const {
    double s = 0.0;
    for (const auto& r : records) s += r.violation_energy;
    return s;
  }
  std::size_t total_comm_bytes() const {
    std::size_t s = 0;
    for (const auto& r : records) s += r.comm_bytes;
    return s;
  }
  /// max(0, max_i avg g_i): how far the averaged constraint is violated.
  double average_constraint_residual() const {
    return avg_g.size() == 0 ? 0.0 : std::max(0.0, avg_g.maxCoeff());
  }
};

/// Scores setpoints against the true grid conditions. This is the only place
/// full z is used during evaluation.
inline EvalReport score_setpoints(Method method, std::span<const Vector> setpoints, std::span<const GridConditions> truth,
                                  const GridModel& grid, std::span<const std::size_t> comm_bytes) {
  detail::require(setpoints.size() == truth.size() && comm_bytes.size() == truth.size(),
                  "setpoints, conditions and traffic must cover the same timesteps");
  EvalReport rep;
  rep.method = method;
  rep.avg_g = Vector::Zero(2 * grid.bus_count());
  for (std::size_t t = 0; t < truth.size(); ++t) {
    const auto ctx = grid.context(truth[t]);
    const auto& q = setpoints[t];
    const Vector v = voltages(ctx, grid.sens, q);
    TimestepRecord r;
    r.timestep = t;
    r.method = method;
    r.loss = losses(ctx, grid.sens, q);
    r.vmax = v.maxCoeff();
    r.vmin = v.minCoeff();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double excess = std::max(0.0, v(i) - grid.limits.v_hi(i)) + std::max(0.0, grid.limits.v_lo(i) - v(i));
      if (excess > kViolationTolerance) ++r.violations;
      r.violation_energy += excess;
    }
    r.comm_bytes = comm_bytes[t];
    rep.avg_g += constraint_g(ctx, grid.sens, q, grid.limits);
    rep.records.push_back(r);
  }
  if (!truth.empty()) rep.avg_g /= static_cast<double>(truth.size());
  return rep;
}

/// Setpoints and downlink traffic of the deployed two-tier policy. Consumes
/// only the real-time inputs (w_u at the utility, w_local at each inverter).
struct RealtimeRun {
  std::vector<Vector> setpoints;
  std::vector<std::size_t> comm_bytes;
};

inline RealtimeRun run_realtime(const PolicyParams& p, std::span<const ScenarioInputs> inputs) {
  const auto& arch = p.arch();
  RealtimeRun run;
  for (const auto& w : inputs) {
    detail::require_inputs(p, w);
    const auto u = forward_utility(p, w.w_u);  // utility side
    Vector q = Vector::Zero(static_cast<Eigen::Index>(arch.bus_count));
    for (std::size_t s = 0; s < arch.inverters.size(); ++s) {  // inverter side, same broadcast u
      const auto& inv = arch.inverters[s];
      q(static_cast<Eigen::Index>(inv.bus - 1)) = forward_inverter(p, inv.bus, u, w.w_local[s], inv.qbar_pu);
    }
    run.setpoints.push_back(std::move(q));
    run.comm_bytes.push_back(static_cast<std::size_t>(u.u.size()) * kScalarBytes);
  }
  return run;
}

namespace detail {
inline void require_matching(const PolicyParams& p, const GridModel& grid) {
  const auto& arch = p.arch();
  if (static_cast<Eigen::Index>(arch.bus_count) != grid.bus_count()) {
    throw ArchMismatchError("policy expects " + std::to_string(arch.bus_count) + " buses, feeder has " +
                            std::to_string(grid.bus_count()));
  }
  for (const auto& inv : arch.inverters) {
    if (grid.qbar(static_cast<Eigen::Index>(inv.bus - 1)) != inv.qbar_pu) {
      throw ArchMismatchError("policy inverter at bus " + std::to_string(inv.bus) + " does not match the feeder");
    }
  }
  const auto installed = (grid.qbar.array() > 0.0).count();
  if (static_cast<std::size_t>(installed) != arch.inverters.size()) {
    throw ArchMismatchError("policy covers " + std::to_string(arch.inverters.size()) + " inverters, feeder has " +
                            std::to_string(installed));
  }
}

inline std::vector<GridConditions> conditions_of(const ScenarioSet& set) {
  std::vector<GridConditions> z;
  for (const auto& s : set) z.push_back(s.z);
  return z;
}
}  // namespace detail

/// Real-time phase over a test window: per timestep the utility computes u
/// from w_u, broadcasts it, every inverter evaluates its sub-network, and the
/// resulting setpoints are scored on the feeder model.
inline EvalReport simulate_realtime(const PolicyParams& p, const ScenarioSet& test, const GridModel& grid) {
  detail::require_matching(p, grid);
  std::vector<ScenarioInputs> inputs;
  for (const auto& s : test) inputs.push_back(s.w);
  const auto run = run_realtime(p, inputs);
  const auto truth = detail::conditions_of(test);
  auto rep = score_setpoints(Method::dnn_policy, run.setpoints, truth, grid, run.comm_bytes);
  rep.solver_info["control_dim"] = std::to_string(p.arch().control_dim());
  return rep;
}

/// Setpoints are pushed to every inverter each timestep by the baselines that
/// solve centrally.
inline std::size_t setpoint_downlink_bytes(const GridModel& grid) {
  return static_cast<std::size_t>((grid.qbar.array() > 0.0).count()) * kScalarBytes;
}

inline EvalReport evaluate_no_control(const ScenarioSet& test, const GridModel& grid) {
  const std::vector<Vector> q(test.size(), no_control(grid.bus_count()));
  const std::vector<std::size_t> bytes(test.size(), 0);
  return score_setpoints(Method::no_control, q, detail::conditions_of(test), grid, bytes);
}

inline EvalReport evaluate_optimal_policy(const ScenarioSet& test, const GridModel& grid,
                                          const DualDecompositionConfig& cfg = {}) {
  const auto st = dual_decomposition(grid, test, cfg);
  const std::vector<std::size_t> bytes(test.size(), setpoint_downlink_bytes(grid));
  auto rep = score_setpoints(Method::optimal_policy, st.q, detail::conditions_of(test), grid, bytes);
  rep.solver_info["iterations"] = std::to_string(st.iterations);
  rep.solver_info["converged"] = st.converged ? "true" : "false";
  std::ostringstream lam;
  lam.precision(17);
  lam << st.dual.lambda.maxCoeff();
  rep.solver_info["lambda_max"] = lam.str();
  return rep;
}

inline EvalReport evaluate_deterministic_opf(const ScenarioSet& test, const GridModel& grid,
                                             const OpfOptions& opts = {}) {
  std::vector<Vector> q;
  std::size_t iterations = 0, infeasible = 0, capped = 0;
  for (const auto& s : test) {
    auto r = deterministic_opf(s.z, grid, opts);
    iterations += r.iterations;
    if (r.status == OpfStatus::infeasible) ++infeasible;
    if (r.status == OpfStatus::iteration_limit) ++capped;
    q.push_back(std::move(r.q));
  }
  const std::vector<std::size_t> bytes(test.size(), setpoint_downlink_bytes(grid));
  auto rep = score_setpoints(Method::deterministic_opf, q, detail::conditions_of(test), grid, bytes);
  rep.solver_info["iterations"] = std::to_string(iterations);
  rep.solver_info["infeasible_timesteps"] = std::to_string(infeasible);
  rep.solver_info["iteration_limited_timesteps"] = std::to_string(capped);
  return rep;
}

// ---------------------------------------------------------------------------
// Report I/O

inline void write_report_csv(std::ostream& out, const EvalReport& rep, bool header = true) {
  out.precision(17);
  if (header) out << "timestep,method,loss,vmax,vmin,violations,violation_energy,comm_bytes\n";
  for (const auto& r : rep.records) {
    out << r.timestep << ',' << to_string(r.method) << ',' << r.loss << ',' << r.vmax << ',' << r.vmin << ','
        << r.violations << ',' << r.violation_energy << ',' << r.comm_bytes << '\n';
  }
}

inline nlohmann::json report_to_json(const EvalReport& rep) {
  nlohmann::json j;
  j["method"] = to_string(rep.method);
  auto recs = nlohmann::json::array();
  for (const auto& r : rep.records) {
    recs.push_back({{"timestep", r.timestep},
                    {"loss", r.loss},
                    {"vmax", r.vmax},
                    {"vmin", r.vmin},
                    {"violations", r.violations},
                    {"violation_energy", r.violation_energy},
                    {"comm_bytes", r.comm_bytes}});
  }
  j["records"] = std::move(recs);
  j["avg_g"] = detail::to_json_array(rep.avg_g);
  j["aggregates"] = {{"average_loss", rep.average_loss()},
                     {"total_violations", rep.total_violations()},
                     {"violating_timesteps", rep.violating_timesteps()},
                     {"total_violation_energy", rep.total_violation_energy()},
                     {"average_constraint_residual", rep.average_constraint_residual()},
                     {"total_comm_bytes", rep.total_comm_bytes()}};
  j["solver"] = rep.solver_info;
  return j;
}

inline EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport rep;
  try {
    rep.method = method_from_string(j.at("method").get<std::string>());
    for (const auto& r : j.at("records")) {
      TimestepRecord t;
      t.timestep = r.at("timestep").get<std::size_t>();
      t.method = rep.method;
      t.loss = r.at("loss").get<double>();
      t.vmax = r.at("vmax").get<double>();
      t.vmin = r.at("vmin").get<double>();
      t.violations = r.at("violations").get<std::size_t>();
      t.violation_energy = r.at("violation_energy").get<double>();
      t.comm_bytes = r.at("comm_bytes").get<std::size_t>();
      rep.records.push_back(t);
    }
    rep.avg_g = detail::from_json_array(j.at("avg_g"));
    if (j.contains("solver")) rep.solver_info = j.at("solver").get<std::map<std::string, std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("malformed report: ") + e.what());
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Comparison

struct ComparisonRow {
  std::string method;
  double average_loss = 0.0;
  std::size_t total_violations = 0;
  std::size_t violating_timesteps = 0;
  double violation_energy = 0.0;
  double constraint_residual = 0.0;
  std::size_t comm_bytes_per_timestep = 0;
  double gap_vs_optimal = 0.0;  // relative when |optimal loss| > 1e-12, else absolute

  bool operator==(const ComparisonRow&) const = default;
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;
  bool operator==(const ComparisonTable&) const = default;
};

/// Gap of `loss` against `reference`.
inline double loss_gap(double loss, double reference) {
  const double diff = loss - reference;
  return std::abs(reference) > 1e-12 ? diff / std::abs(reference) : diff;
}

/// Side-by-side aggregates. Gaps are taken against the optimal-policy report
/// when present, otherwise against the first report.
inline ComparisonTable compare(std::span<const EvalReport> reports) {
  detail::require(!reports.empty(), "nothing to compare");
  const auto steps = reports.front().records.size();
  for (const auto& r : reports) {
    if (r.records.size() != steps) throw ContractError("reports cover different numbers of timesteps");
    for (std::size_t t = 0; t < steps; ++t) {
      if (r.records[t].timestep != reports.front().records[t].timestep) {
        throw ContractError("reports cover different timesteps");
      }
    }
    if (r.avg_g.size() != reports.front().avg_g.size()) throw ContractError("reports come from different feeders");
  }
  const EvalReport* ref = &reports.front();
  for (const auto& r : reports) {
    if (r.method == Method::optimal_policy) ref = &r;
  }
  ComparisonTable table;
  for (const auto& r : reports) {
    ComparisonRow row;
    row.method = to_string(r.method);
    row.average_loss = r.average_loss();
    row.total_violations = r.total_violations();
    row.violating_timesteps = r.violating_timesteps();
    row.violation_energy = r.total_violation_energy();
    row.constraint_residual = r.average_constraint_residual();
    row.comm_bytes_per_timestep = steps ? r.total_comm_bytes() / steps : 0;
    row.gap_vs_optimal = loss_gap(row.average_loss, ref->average_loss());
    table.rows.push_back(row);
  }
  return table;
}

inline void write_comparison_csv(std::ostream& out, const ComparisonTable& table) {
  out.precision(17);
  out << "method,average_loss,total_violations,violating_timesteps,violation_energy,constraint_residual,"
         "comm_bytes_per_timestep,gap_vs_optimal\n";
  for (const auto& r : table.rows) {
    out << r.method << ',' << r.average_loss << ',' << r.total_violations << ',' << r.violating_timesteps << ','
        << r.violation_energy << ',' << r.constraint_residual << ',' << r.comm_bytes_per_timestep << ','
        << r.gap_vs_optimal << '\n';
  }
}

inline ComparisonTable read_comparison_csv(std::istream& in) {
  ComparisonTable table;
  for (const auto& row : csv::read(in, {"method", "average_loss", "total_violations", "violating_timesteps",
                                        "violation_energy", "constraint_residual", "comm_bytes_per_timestep",
                                        "gap_vs_optimal"})) {
    ComparisonRow r;
    r.method = row.fields[0];
    r.average_loss = csv::to_double(row, 1);
    r.total_violations = static_cast<std::size_t>(csv::to_integer(row, 2));
    r.violating_timesteps = static_cast<std::size_t>(csv::to_integer(row, 3));
    r.violation_energy = csv::to_double(row, 4);
    r.constraint_residual = csv::to_double(row, 5);
    r.comm_bytes_per_timestep = static_cast<std::size_t>(csv::to_integer(row, 6));
    r.gap_vs_optimal = csv::to_double(row, 7);
    table.rows.push_back(std::move(r));
  }
  return table;
}

}  // namespace voltnet
