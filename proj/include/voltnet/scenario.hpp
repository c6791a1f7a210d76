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

// Scenario pipeline: trace ingestion, reactive-load synthesis, DNN input
// derivation and noise augmentation into a shuffled training set.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "voltnet/csv.hpp"
#include "voltnet/error.hpp"
#include "voltnet/feeder.hpp"

namespace voltnet {

/// Derives an independent 64-bit seed for sub-stream `stream` of `seed`
/// (splitmix64 finalizer).
inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct TimeSeriesTrace {
  BusId bus = 0;
  std::vector<std::int64_t> timestamps;  // minutes
  std::vector<double> p_load;            // pu
  std::vector<double> p_solar;           // pu
};

/// Parses `timestamp,bus,p_load_pu,p_solar_pu` rows, multiplies every value by
/// `scale_factor` and returns one trace per bus in ascending bus order. All
/// buses must report the same timestamps.
inline std::vector<TimeSeriesTrace> read_traces(std::istream& in, double scale_factor) {
  detail::require(scale_factor > 0.0 && std::isfinite(scale_factor), "scale_factor must be positive");
  std::map<BusId, TimeSeriesTrace> by_bus;
  for (const auto& row : csv::read(in, {"timestamp", "bus", "p_load_pu", "p_solar_pu"})) {
    const auto t = csv::to_integer(row, 0);
    const auto bus = csv::to_integer(row, 1);
    const double p = csv::to_double(row, 2);
    const double s = csv::to_double(row, 3);
    if (bus < 1) throw IngestError(row.line, "bus id must be >= 1 (substation carries no trace)");
    if (!(p >= 0.0) || !(s >= 0.0)) throw IngestError(row.line, "negative or non-finite power value");
    auto& tr = by_bus[static_cast<BusId>(bus)];
    tr.bus = static_cast<BusId>(bus);
    if (!tr.timestamps.empty() && t <= tr.timestamps.back()) {
      throw IngestError(row.line, "timestamps for bus " + std::to_string(bus) + " are not strictly increasing");
    }
    tr.timestamps.push_back(t);
    tr.p_load.push_back(p * scale_factor);
    tr.p_solar.push_back(s * scale_factor);
  }
  std::vector<TimeSeriesTrace> out;
  for (auto& [bus, tr] : by_bus) out.push_back(std::move(tr));
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i].timestamps != out[0].timestamps) {
      const auto& a = out[0].timestamps;
      const auto& b = out[i].timestamps;
      std::size_t k = 0;
      while (k < a.size() && k < b.size() && a[k] == b[k]) ++k;
      std::string where = k < a.size() && k < b.size()
                              ? "timestamp " + std::to_string(a[k]) + " vs " + std::to_string(b[k])
                              : "series lengths " + std::to_string(a.size()) + " vs " + std::to_string(b.size());
      throw IngestError(0, "traces of bus " + std::to_string(out[0].bus) + " and bus " +
                               std::to_string(out[i].bus) + " are misaligned at " + where);
    }
  }
  return out;
}

inline std::vector<TimeSeriesTrace> ingest_traces(const std::string& path, double scale_factor) {
  auto in = detail::open_input(path);
  try {
    return read_traces(in, scale_factor);
  } catch (const IngestError& e) {
    throw IngestError(e.row(), path + ": " + e.what());
  }
}

inline void write_traces(std::ostream& out, const std::vector<TimeSeriesTrace>& traces) {
  out.precision(17);
  out << "timestamp,bus,p_load_pu,p_solar_pu\n";
  if (traces.empty()) return;
  const auto steps = traces.front().timestamps.size();
  for (std::size_t k = 0; k < steps; ++k) {
    for (const auto& tr : traces) {
      out << tr.timestamps[k] << ',' << tr.bus << ',' << tr.p_load[k] << ',' << tr.p_solar[k] << '\n';
    }
  }
}

/// Lagging reactive load q = p tan(acos(pf)) with pf ~ U[pf_lo, pf_hi] drawn
/// independently per sample.
inline std::vector<double> synthesize_reactive_loads(std::span<const double> p_load, double pf_lo,
                                                     double pf_hi, std::uint64_t seed) {
  detail::require(pf_lo > 0.0 && pf_lo <= pf_hi && pf_hi <= 1.0,
                  "power factor bounds must satisfy 0 < pf_lo <= pf_hi <= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pf_dist(pf_lo, pf_hi);
  std::vector<double> q(p_load.size());
  for (std::size_t t = 0; t < p_load.size(); ++t) {
    const double pf = pf_lo == pf_hi ? pf_lo : pf_dist(rng);
    q[t] = pf >= 1.0 ? 0.0 : p_load[t] * std::tan(std::acos(pf));
  }
  return q;
}

struct PowerFactorRange {
  double lo = 0.9;
  double hi = 1.0;
};

/// Traces aligned into per-timestep grid conditions for a particular feeder.
struct TraceTable {
  std::vector<std::int64_t> timestamps;
  std::vector<GridConditions> conditions;

  /// Rows whose timestamp lies in [start, end).
  std::vector<std::size_t> window(std::int64_t start, std::int64_t end) const {
    std::vector<std::size_t> rows;
    for (std::size_t k = 0; k < timestamps.size(); ++k) {
      if (timestamps[k] >= start && timestamps[k] < end) rows.push_back(k);
    }
    return rows;
  }
};

/// Maps traces onto feeder buses and synthesizes reactive loads. The reactive
/// series of bus n uses seed stream n, so any window of the day sees the same
/// values regardless of what else is assembled.
inline TraceTable assemble(const std::vector<TimeSeriesTrace>& traces, const FeederTopology& topo,
                           PowerFactorRange pf, std::uint64_t seed) {
  detail::require(!traces.empty(), "no traces to assemble");
  TraceTable table;
  table.timestamps = traces.front().timestamps;
  const auto steps = table.timestamps.size();
  table.conditions.assign(steps, GridConditions::zeros(topo.bus_count));
  for (const auto& tr : traces) {
    if (tr.bus < 1 || tr.bus > topo.bus_count) {
      throw ContractError("trace for bus " + std::to_string(tr.bus) + " is outside the feeder");
    }
    if (tr.timestamps != table.timestamps) {
      throw ContractError("trace for bus " + std::to_string(tr.bus) + " is misaligned");
    }
    const bool solar = topo.has_solar(tr.bus);
    const auto q = synthesize_reactive_loads(tr.p_load, pf.lo, pf.hi, split_seed(seed, tr.bus));
    const auto i = static_cast<Eigen::Index>(tr.bus - 1);
    for (std::size_t k = 0; k < steps; ++k) {
      if (!solar && tr.p_solar[k] != 0.0) {
        throw ContractError("trace for bus " + std::to_string(tr.bus) +
                            " reports solar but the feeder has no solar there");
      }
      auto& z = table.conditions[k];
      z.p_load(i) = tr.p_load[k];
      z.q_load(i) = q[k];
      z.p_solar(i) = tr.p_solar[k];
    }
  }
  return table;
}

/// Inputs of the two-tier policy for one grid condition.
struct ScenarioInputs {
  Vector w_u;                   // utility telemetry
  std::vector<Vector> w_local;  // one per inverter, ascending bus order
};

/// Number of local readings fed to each inverter sub-network:
/// (p_solar_n, p_load_n, q_load_n, qbar_n).
inline constexpr std::size_t kLocalInputDim = 4;

/// Computes policy inputs from grid conditions. Utility entry i is the net
/// withdrawal (load minus solar) of the subtree under telemetry bus i, a proxy
/// for the active flow on the line feeding that bus.
class InputMap {
 public:
  InputMap(FeederTopology topo, std::vector<BusId> telemetry)
      : topo_(std::move(topo)), telemetry_(std::move(telemetry)) {
    const FeederTree tree(topo_);
    const auto n = static_cast<Eigen::Index>(topo_.bus_count);
    for (const auto bus : telemetry_) {
      if (bus < 1 || bus > topo_.bus_count) {
        throw ContractError("telemetry bus " + std::to_string(bus) + " is not in the feeder");
      }
      Vector mask = Vector::Zero(n);
      for (const auto b : tree.subtree(bus)) mask(static_cast<Eigen::Index>(b - 1)) = 1.0;
      masks_.push_back(std::move(mask));
    }
  }

  const FeederTopology& topology() const noexcept { return topo_; }
  const std::vector<BusId>& telemetry() const noexcept { return telemetry_; }
  std::size_t utility_dim() const noexcept { return telemetry_.size(); }
  std::size_t inverter_count() const noexcept { return topo_.inverters.size(); }

  ScenarioInputs derive(const GridConditions& z) const {
    const auto n = static_cast<Eigen::Index>(topo_.bus_count);
    detail::require_size(z.p_load, n, "p_load");
    detail::require_size(z.q_load, n, "q_load");
    detail::require_size(z.p_solar, n, "p_solar");
    ScenarioInputs w;
    const Vector net = z.p_load - z.p_solar;
    w.w_u.resize(static_cast<Eigen::Index>(masks_.size()));
    for (std::size_t i = 0; i < masks_.size(); ++i) w.w_u(static_cast<Eigen::Index>(i)) = masks_[i].dot(net);
    for (const auto& inv : topo_.inverters) {
      const auto k = static_cast<Eigen::Index>(inv.bus - 1);
      Vector local(static_cast<Eigen::Index>(kLocalInputDim));
      local << z.p_solar(k), z.p_load(k), z.q_load(k), inv.qbar_pu;
      w.w_local.push_back(std::move(local));
    }
    return w;
  }

 private:
  FeederTopology topo_;
  std::vector<BusId> telemetry_;
  std::vector<Vector> masks_;
};

inline ScenarioInputs derive_inputs(const GridConditions& z, const FeederTopology& topo,
                                    const std::vector<BusId>& telemetry) {
  return InputMap(topo, telemetry).derive(z);
}

enum class Origin { measured, augmented };

inline const char* to_string(Origin o) { return o == Origin::measured ? "measured" : "augmented"; }

struct Scenario {
  GridConditions z;
  ScenarioInputs w;
  Origin origin = Origin::measured;
  std::size_t source_index = 0;  // index of the parent measured scenario
};

struct ScenarioSet {
  std::vector<Scenario> scenarios;

  std::size_t size() const noexcept { return scenarios.size(); }
  bool empty() const noexcept { return scenarios.empty(); }
  const Scenario& operator[](std::size_t i) const { return scenarios[i]; }
  auto begin() const { return scenarios.begin(); }
  auto end() const { return scenarios.end(); }
};

/// Unperturbed scenarios for the given table rows; source_index is the
/// position within `rows`.
inline std::vector<Scenario> measured_scenarios(const TraceTable& table,
                                                const std::vector<std::size_t>& rows,
                                                const InputMap& inputs) {
  std::vector<Scenario> out;
  out.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& z = table.conditions.at(rows[i]);
    out.push_back({z, inputs.derive(z), Origin::measured, i});
  }
  return out;
}

struct AugmentConfig {
  std::size_t replication_factor = 4;
  double noise_std = 1e-3;  // pu
  std::uint64_t seed = 0;
};

/// Replicates every measured scenario `replication_factor` times. Copy 0 is
/// the original; the others add i.i.d. Gaussian noise to every entry of z
/// (solar only at solar buses), clip at zero and recompute the inputs. The
/// result is shuffled. Parent i draws its noise from seed stream i.
inline ScenarioSet augment(const std::vector<Scenario>& measured, const AugmentConfig& cfg,
                           const InputMap& inputs) {
  detail::require(!measured.empty(), "augment needs at least one measured scenario");
  detail::require(cfg.replication_factor >= 1, "replication_factor must be >= 1");
  detail::require(cfg.noise_std >= 0.0, "noise_std must be nonnegative");
  const auto& topo = inputs.topology();
  ScenarioSet set;
  set.scenarios.reserve(measured.size() * cfg.replication_factor);
  for (std::size_t i = 0; i < measured.size(); ++i) {
    const auto& parent = measured[i];
    std::mt19937_64 rng(split_seed(cfg.seed, i));
    std::normal_distribution<double> noise(0.0, 1.0);
    set.scenarios.push_back({parent.z, parent.w, parent.origin, i});
    for (std::size_t r = 1; r < cfg.replication_factor; ++r) {
      GridConditions z = parent.z;
      for (Eigen::Index k = 0; k < z.size(); ++k) {
        z.p_load(k) = std::max(0.0, z.p_load(k) + cfg.noise_std * noise(rng));
        z.q_load(k) = std::max(0.0, z.q_load(k) + cfg.noise_std * noise(rng));
        if (topo.has_solar(static_cast<BusId>(k + 1))) {
          z.p_solar(k) = std::max(0.0, z.p_solar(k) + cfg.noise_std * noise(rng));
        }
      }
      auto w = inputs.derive(z);
      set.scenarios.push_back({std::move(z), std::move(w), Origin::augmented, i});
    }
  }
  std::mt19937_64 shuffler(split_seed(cfg.seed, ~std::uint64_t{0}));
  std::shuffle(set.scenarios.begin(), set.scenarios.end(), shuffler);
  return set;
}

// ---------------------------------------------------------------------------
// JSON lines: {"z":[...3N],"w_u":[...],"w_local":[[...],...],"origin":"measured","source_index":k}

namespace detail {
inline nlohmann::json to_json_array(const Vector& v) {
  return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}
inline Vector from_json_array(const nlohmann::json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}
}  // namespace detail

inline std::string to_json_line(const Scenario& s) {
  nlohmann::json j;
  j["z"] = detail::to_json_array(s.z.stacked());
  j["w_u"] = detail::to_json_array(s.w.w_u);
  auto local = nlohmann::json::array();
  for (const auto& w : s.w.w_local) local.push_back(detail::to_json_array(w));
  j["w_local"] = std::move(local);
  j["origin"] = to_string(s.origin);
  j["source_index"] = s.source_index;
  return j.dump();
}

inline void write_scenarios(std::ostream& out, const ScenarioSet& set) {
  for (const auto& s : set) out << to_json_line(s) << '\n';
}

inline ScenarioSet read_scenarios(std::istream& in) {
  ScenarioSet set;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Scenario s;
      s.z = GridConditions::from_stacked(detail::from_json_array(j.at("z")));
      s.w.w_u = detail::from_json_array(j.at("w_u"));
      for (const auto& w : j.at("w_local")) s.w.w_local.push_back(detail::from_json_array(w));
      const auto origin = j.at("origin").get<std::string>();
      if (origin != "measured" && origin != "augmented") throw ContractError("unknown origin '" + origin + "'");
      s.origin = origin == "measured" ? Origin::measured : Origin::augmented;
      s.source_index = j.at("source_index").get<std::size_t>();
      set.scenarios.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw IngestError(line_no, e.what());
    } catch (const ContractError& e) {
      throw IngestError(line_no, e.what());
    }
  }
  return set;
}

}  // namespace voltnet
