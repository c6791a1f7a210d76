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

// Small feeders and random instances shared by the test binaries.

#include <random>
#include <vector>

#include "voltnet/feeder.hpp"

namespace voltnet::testing {

// 0 -> 1 (0.1, 0.2), 1 -> 2 (0.05, 0.1).
inline FeederTopology chain2() {
  FeederTopology t;
  t.bus_count = 2;
  t.lines = {{0, 1, 0.1, 0.2}, {1, 2, 0.05, 0.1}};
  return t;
}

inline FeederTopology single_line() {
  FeederTopology t;
  t.bus_count = 1;
  t.lines = {{0, 1, 0.03, 0.04}};
  return t;
}

/// Random tree: bus k attaches to a uniformly drawn earlier bus.
inline FeederTopology random_tree(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> imp(0.001, 0.05);
  FeederTopology t;
  t.bus_count = n;
  for (BusId k = 1; k <= n; ++k) {
    std::uniform_int_distribution<BusId> parent(0, k - 1);
    t.lines.push_back({parent(rng), k, imp(rng), imp(rng)});
  }
  return t;
}

inline Vector random_vector(Eigen::Index n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = d(rng);
  return v;
}

inline GridConditions random_conditions(Eigen::Index n, std::mt19937_64& rng, double scale = 0.1) {
  return {random_vector(n, rng, 0.0, scale), random_vector(n, rng, 0.0, scale), random_vector(n, rng, 0.0, scale)};
}

}  // namespace voltnet::testing
