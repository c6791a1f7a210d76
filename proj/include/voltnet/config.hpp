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

// Run configuration shared by the command-line tool, its canonical text form
// and the hash recorded in run manifests.

#include <cstdint>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "voltnet/error.hpp"
#include "voltnet/feeder.hpp"
#include "voltnet/scenario.hpp"

namespace voltnet {

struct RunConfig {
  // Paths. An empty feeder_dir selects the bundled fixture.
  std::string run_dir = "run";
  std::string feeder_dir;
  std::string traces;  // defaults to <run_dir>/data/traces.csv

  // Data shaping.
  std::vector<BusId> telemetry{2, 3, 7};
  double scale = 7.5;
  double pf_lo = 0.9;
  double pf_hi = 1.0;
  double v_lo = 0.97;
  double v_hi = 1.03;
  std::size_t days = 1;

  // Windows, in hours of the trace timeline; test_hour < 0 means train_hour + 1.
  int train_hour = 13;
  int test_hour = -1;
  int window_minutes = 60;

  // Augmentation. noise_std < 0 picks noise_high or noise_low from the
  // training window's solar share.
  std::size_t replication_factor = 4;
  double noise_std = -1.0;
  double noise_low = 1e-3;
  double noise_high = 1e-1;

  // Training.
  std::size_t epochs = 30;
  double learning_rate = 0.01;
  double dual_step = 1.0;
  double dual_decay = 0.5;
  std::size_t batch_size = 1;
  bool standardize_inputs = true;
  bool dump_duals = false;

  std::uint64_t seed = 7;

  int effective_test_hour() const { return test_hour < 0 ? train_hour + 1 : test_hour; }
  std::string traces_path() const { return traces.empty() ? run_dir + "/data/traces.csv" : traces; }

  void validate() const {
    detail::require(scale > 0.0, "scale must be positive");
    detail::require(pf_lo > 0.0 && pf_lo <= pf_hi && pf_hi <= 1.0, "power factors need 0 < pf_lo <= pf_hi <= 1");
    detail::require(v_lo < v_hi, "voltage limits need v_lo < v_hi");
    detail::require(window_minutes > 0, "window_minutes must be positive");
    detail::require(train_hour >= 0, "train_hour must be >= 0");
    detail::require(replication_factor >= 1, "replication_factor must be >= 1");
    detail::require(noise_low >= 0.0 && noise_high >= 0.0, "noise levels must be >= 0");
    detail::require(epochs >= 1 && batch_size >= 1, "epochs and batch_size must be >= 1");
    detail::require(learning_rate > 0.0 && dual_step > 0.0 && dual_decay >= 0.0, "step sizes must be positive");
    detail::require(days >= 1, "days must be >= 1");
  }
};

/// One `key = value` line per field, in declaration order. Doubles are
/// printed with 17 significant digits so the text identifies the values.
inline std::string canonical_text(const RunConfig& c) {
  std::ostringstream o;
  o.precision(17);
  auto kv = [&](std::string_view k, const auto& v) { o << k << " = " << v << '\n'; };
  kv("run_dir", c.run_dir);
  kv("feeder_dir", c.feeder_dir);
  kv("traces", c.traces_path());
  std::string tel;
  for (std::size_t i = 0; i < c.telemetry.size(); ++i) tel += (i ? "," : "") + std::to_string(c.telemetry[i]);
  kv("telemetry", tel);
  kv("scale", c.scale);
  kv("pf_lo", c.pf_lo);
  kv("pf_hi", c.pf_hi);
  kv("v_lo", c.v_lo);
  kv("v_hi", c.v_hi);
  kv("days", c.days);
  kv("train_hour", c.train_hour);
  kv("test_hour", c.effective_test_hour());
  kv("window_minutes", c.window_minutes);
  kv("replication_factor", c.replication_factor);
  kv("noise_std", c.noise_std);
  kv("noise_low", c.noise_low);
  kv("noise_high", c.noise_high);
  kv("epochs", c.epochs);
  kv("learning_rate", c.learning_rate);
  kv("dual_step", c.dual_step);
  kv("dual_decay", c.dual_decay);
  kv("batch_size", c.batch_size);
  kv("standardize_inputs", c.standardize_inputs);
  kv("dump_duals", c.dump_duals);
  kv("seed", c.seed);
  return o.str();
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string config_hash(const RunConfig& c) {
  std::ostringstream o;
  o << std::hex;
  o.width(16);
  o.fill('0');
  o << fnv1a64(canonical_text(c));
  return o.str();
}

/// Seeds derived from the run seed, one per pipeline stage.
struct StageSeeds {
  std::uint64_t traces, reactive, augment, train;
};

inline StageSeeds stage_seeds(std::uint64_t seed) {
  return {split_seed(seed, 0), split_seed(seed, 1), split_seed(seed, 2), split_seed(seed, 3)};
}

/// High-solar windows are those where solar supplies at least half of the
/// active load on average.
inline bool is_high_solar(const TraceTable& table, const std::vector<std::size_t>& rows) {
  double solar = 0.0, load = 0.0;
  for (const auto r : rows) {
    solar += table.conditions.at(r).p_solar.sum();
    load += table.conditions.at(r).p_load.sum();
  }
  return solar >= 0.5 * load && solar > 0.0;
}

inline double select_noise_std(const RunConfig& c, const TraceTable& table, const std::vector<std::size_t>& rows) {
  if (c.noise_std >= 0.0) return c.noise_std;
  return is_high_solar(table, rows) ? c.noise_high : c.noise_low;
}

}  // namespace voltnet
