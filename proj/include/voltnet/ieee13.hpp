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

// Bundled single-phase IEEE 13-bus fixture.
//
// Bus numbering (node names of the benchmark in parentheses):
//   0 (650, substation), 1 (632), 2 (633), 3 (645), 4 (634), 5 (646),
//   6 (671), 7 (684), 8 (692), 9 (675), 10 (680), 11 (611), 12 (652).
//
// Impedances are the positive-sequence values of the benchmark line
// configurations on a 4.16 kV, 100 kVA base. The regulator is dropped, the
// 633-634 transformer keeps its nameplate impedance, and the 671-692 switch is
// a 1e-4 pu line. The underground segments 692-675 and 684-652 carry 0.6x
// their benchmark resistance.

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include "voltnet/feeder.hpp"
#include "voltnet/synthetic.hpp"

namespace voltnet::ieee13 {

inline constexpr double kBaseKV = 4.16;
inline constexpr double kBaseMVA = 0.1;
inline constexpr double kCableResistanceFactor = 0.6;
inline constexpr double kInverterCapacity = 1.5;  // pu
inline constexpr double kSolarPeak = 0.5;         // pu, before the peak scale
inline constexpr double kPeakScale = 7.5;         // monthly peak / benchmark peak
inline constexpr std::size_t kBusCount = 12;

inline constexpr std::array<std::string_view, kBusCount + 1> kNodeNames = {
    "650", "632", "633", "645", "634", "646", "671", "684", "692", "675", "680", "611", "652"};

/// Series impedance in ohm/mile of the benchmark configurations used here.
struct Config {
  double r_ohm_per_mile;
  double x_ohm_per_mile;
};
inline constexpr Config k601{0.3465, 1.0179};
inline constexpr Config k602{0.7526, 1.1814};
inline constexpr Config k603{1.3294, 1.3471};
inline constexpr Config k604{1.3238, 1.3569};
inline constexpr Config k605{1.3292, 1.3475};
inline constexpr Config k606{0.7982 * kCableResistanceFactor, 0.4463};
inline constexpr Config k607{1.3425 * kCableResistanceFactor, 0.5124};

inline constexpr double base_impedance() { return kBaseKV * kBaseKV / kBaseMVA; }

inline Line overhead(BusId from, BusId to, Config c, double feet) {
  const double miles = feet / 5280.0;
  return {from, to, c.r_ohm_per_mile * miles / base_impedance(), c.x_ohm_per_mile * miles / base_impedance()};
}

inline std::vector<Line> lines() {
  // XFM-1: 500 kVA, 1.1 + j2 percent on its own rating.
  const double xfm_scale = kBaseMVA / 0.5;
  return {overhead(0, 1, k601, 2000),
          overhead(1, 2, k602, 500),
          {2, 4, 0.011 * xfm_scale, 0.02 * xfm_scale},
          overhead(1, 3, k603, 500),
          overhead(3, 5, k603, 300),
          overhead(1, 6, k601, 2000),
          overhead(6, 7, k604, 300),
          overhead(7, 11, k605, 300),
          overhead(7, 12, k607, 800),
          {6, 8, 1e-4, 1e-4},
          overhead(8, 9, k606, 500),
          overhead(6, 10, k601, 1000)};
}

inline std::vector<BusId> solar_buses() { return {1, 5, 9, 10, 11, 12}; }
inline std::vector<BusId> telemetry_buses() { return {2, 3, 7}; }

inline FeederTopology topology() {
  FeederTopology topo;
  topo.bus_count = kBusCount;
  topo.lines = lines();
  topo.inverters = {{9, kInverterCapacity}, {12, kInverterCapacity}};
  topo.solar_buses = solar_buses();
  topo.v0 = 1.0;
  validate(topo);
  return topo;
}

/// Benchmark spot loads in pu, buses 1..12.
inline Vector load_peaks() {
  Vector p(static_cast<Eigen::Index>(kBusCount));
  p << 0.100, 0.085, 0.115, 0.025, 0.075, 0.115, 0.050, 0.085, 0.100, 0.115, 0.085, 0.100;
  return p;
}

inline Vector solar_peaks() {
  Vector p = Vector::Zero(static_cast<Eigen::Index>(kBusCount));
  for (const auto b : solar_buses()) p(static_cast<Eigen::Index>(b - 1)) = kSolarPeak;
  return p;
}

/// Trace generator settings at benchmark peaks. Ingest multiplies by
/// kPeakScale.
inline SyntheticConfig synthetic_config(std::uint64_t seed, std::size_t days = 1) {
  SyntheticConfig cfg;
  cfg.bus_count = kBusCount;
  cfg.load_peak = load_peaks();
  cfg.solar_peak = solar_peaks();
  cfg.days = days;
  cfg.seed = seed;
  return cfg;
}

}  // namespace voltnet::ieee13
