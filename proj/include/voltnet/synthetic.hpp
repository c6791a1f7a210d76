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

// Synthetic one-minute load and solar traces: a two-peak residential load
// shape and a clear-sky solar bell with slow cloud attenuation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "voltnet/error.hpp"
#include "voltnet/feeder.hpp"
#include "voltnet/scenario.hpp"

namespace voltnet {

struct SyntheticConfig {
  std::size_t bus_count = 0;
  Vector load_peak;   // per bus, pu, before `scale`
  Vector solar_peak;  // per bus, pu, zero where there is no solar
  double scale = 1.0;
  std::size_t days = 1;
  double sunrise_hour = 7.0;
  double sunset_hour = 20.0;
  std::uint64_t seed = 0;
};

/// One trace per bus over `days` x 1440 minutes. Each bus's series peaks at
/// exactly peak * scale; solar is exactly zero outside daylight.
inline std::vector<TimeSeriesTrace> generate_traces(const SyntheticConfig& cfg) {
  const auto n = static_cast<Eigen::Index>(cfg.bus_count);
  detail::require(n > 0, "synthetic traces need at least one bus");
  detail::require_size(cfg.load_peak, n, "load_peak");
  detail::require_size(cfg.solar_peak, n, "solar_peak");
  detail::require(cfg.scale > 0.0, "scale must be positive");
  detail::require(cfg.days >= 1, "days must be >= 1");
  detail::require(cfg.sunrise_hour < cfg.sunset_hour, "sunrise must precede sunset");
  detail::require(cfg.load_peak.minCoeff() >= 0.0 && cfg.solar_peak.minCoeff() >= 0.0, "peaks must be nonnegative");

  const std::size_t steps = cfg.days * 1440;
  std::vector<TimeSeriesTrace> out;
  for (Eigen::Index b = 0; b < n; ++b) {
    const auto bus = static_cast<BusId>(b + 1);
    std::mt19937_64 rng(split_seed(cfg.seed, bus));
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<double> load(steps), solar(steps, 0.0);
    double wiggle = 0.0;
    double cloud = 0.0;
    for (std::size_t k = 0; k < steps; ++k) {
      const double hour = static_cast<double>(k % 1440) / 60.0;
      const double morning = std::exp(-std::pow((hour - 8.0) / 1.5, 2));
      const double evening = std::exp(-std::pow((hour - 19.0) / 2.0, 2));
      wiggle = 0.98 * wiggle + 0.01 * gauss(rng);
      load[k] = std::max(0.0, (0.55 + 0.25 * morning + 0.45 * evening) * (1.0 + wiggle));
      cloud = 0.97 * cloud + 0.004 * gauss(rng);
      if (hour > cfg.sunrise_hour && hour < cfg.sunset_hour) {
        const double phase = std::numbers::pi * (hour - cfg.sunrise_hour) / (cfg.sunset_hour - cfg.sunrise_hour);
        solar[k] = std::pow(std::sin(phase), 1.3) * std::clamp(1.0 - std::abs(cloud), 0.0, 1.0);
      }
    }
    auto normalize = [&](std::vector<double>& v, double peak) {
      const double top = *std::max_element(v.begin(), v.end());
      for (auto& x : v) x = top > 0.0 ? x / top * peak * cfg.scale : 0.0;
    };
    normalize(load, cfg.load_peak(b));
    normalize(solar, cfg.solar_peak(b));

    TimeSeriesTrace tr;
    tr.bus = bus;
    tr.timestamps.resize(steps);
    for (std::size_t k = 0; k < steps; ++k) tr.timestamps[k] = static_cast<std::int64_t>(k);
    tr.p_load = std::move(load);
    tr.p_solar = std::move(solar);
    out.push_back(std::move(tr));
  }
  return out;
}

}  // namespace voltnet
