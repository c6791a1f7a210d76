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

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fixtures.hpp"
#include "voltnet/ieee13.hpp"
#include "voltnet/scenario.hpp"
#include "voltnet/synthetic.hpp"

namespace voltnet {
namespace {

using testing::chain2;

std::vector<Scenario> measured_chain(std::size_t count, const InputMap& inputs) {
  std::vector<Scenario> out;
  for (std::size_t i = 0; i < count; ++i) {
    auto z = GridConditions::zeros(2);
    z.p_load << 1.0 + 0.01 * static_cast<double>(i), 1.0;
    z.q_load << 0.5, 0.5;
    z.p_solar << 1.0, 0.0;
    out.push_back({z, inputs.derive(z), Origin::measured, i});
  }
  return out;
}

FeederTopology chain_with_solar() {
  auto t = chain2();
  t.solar_buses = {1};
  t.inverters = {{2, 0.3}};
  return t;
}

TEST(Traces, ScaleFactorMultipliesEverySample) {
  std::istringstream in("timestamp,bus,p_load_pu,p_solar_pu\n0,1,1.0,1.0\n1,1,1.0,1.0\n");
  const auto tr = read_traces(in, 7.5);
  ASSERT_EQ(tr.size(), 1u);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_EQ(tr[0].p_load[k], 7.5);
    EXPECT_EQ(tr[0].p_solar[k], 7.5);
  }
  std::istringstream again("timestamp,bus,p_load_pu,p_solar_pu\n0,1,0.3,0.1\n");
  const auto same = read_traces(again, 1.0);
  EXPECT_EQ(same[0].p_load[0], 0.3);
  EXPECT_EQ(same[0].p_solar[0], 0.1);
}

TEST(Traces, MisalignedBusesAreReported) {
  std::istringstream in("timestamp,bus,p_load_pu,p_solar_pu\n0,1,1,0\n1,1,1,0\n5,2,1,0\n6,2,1,0\n");
  try {
    read_traces(in, 1.0);
    FAIL() << "expected misalignment";
  } catch (const IngestError& e) {
    EXPECT_NE(std::string(e.what()).find("misaligned"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("0 vs 5"), std::string::npos);
  }
}

TEST(Traces, BadRowsCarryTheirRowNumber) {
  auto row_of = [](const std::string& text) -> std::size_t {
    std::istringstream in(text);
    try {
      read_traces(in, 1.0);
    } catch (const IngestError& e) {
      return e.row();
    }
    return 0;
  };
  EXPECT_EQ(row_of("timestamp,bus,p_load_pu,p_solar_pu\n0,1,1,0\n1,1,-0.1,0\n"), 3u);
  EXPECT_EQ(row_of("timestamp,bus,p_load_pu,p_solar_pu\n0,1,1,0\n1,1,1\n"), 3u);
  EXPECT_EQ(row_of("timestamp,p_load_pu,p_solar_pu\n0,1,0\n"), 1u);
  EXPECT_EQ(row_of("timestamp,bus,p_load_pu,p_solar_pu\n1,1,1,0\n1,1,1,0\n"), 3u);
}

TEST(Traces, CsvRoundTripIsExact) {
  const auto traces = generate_traces(ieee13::synthetic_config(5));
  std::stringstream buf;
  write_traces(buf, traces);
  const auto back = read_traces(buf, 1.0);
  ASSERT_EQ(back.size(), traces.size());
  for (std::size_t i = 0; i < traces.size(); ++i) {
    EXPECT_EQ(back[i].p_load, traces[i].p_load);
    EXPECT_EQ(back[i].p_solar, traces[i].p_solar);
    EXPECT_EQ(back[i].timestamps, traces[i].timestamps);
  }
}

TEST(ReactiveLoads, UnityPowerFactorGivesZero) {
  const std::vector<double> p{0.5, 1.0, 2.0};
  for (const double q : synthesize_reactive_loads(p, 1.0, 1.0, 3)) EXPECT_EQ(q, 0.0);
}

TEST(ReactiveLoads, FixedPowerFactor) {
  const std::vector<double> p{1.0};
  const auto q = synthesize_reactive_loads(p, 0.9, 0.9, 3);
  EXPECT_NEAR(q[0], std::sqrt(1.0 - 0.81) / 0.9, 1e-15);
  EXPECT_NEAR(q[0], 0.4843, 1e-4);
}

TEST(ReactiveLoads, DeterministicNonnegativeAndBounded) {
  std::vector<double> p(500);
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = 0.01 * static_cast<double>(i);
  const auto a = synthesize_reactive_loads(p, 0.9, 1.0, 42);
  EXPECT_EQ(a, synthesize_reactive_loads(p, 0.9, 1.0, 42));
  EXPECT_NE(a, synthesize_reactive_loads(p, 0.9, 1.0, 43));
  const double tmax = std::tan(std::acos(0.9));
  for (std::size_t i = 0; i < p.size(); ++i) {
    EXPECT_GE(a[i], 0.0);
    EXPECT_LE(a[i], p[i] * tmax + 1e-15);
  }
  EXPECT_THROW(synthesize_reactive_loads(p, 0.0, 1.0, 1), ContractError);
  EXPECT_THROW(synthesize_reactive_loads(p, 0.95, 0.9, 1), ContractError);
  EXPECT_THROW(synthesize_reactive_loads(p, 0.9, 1.1, 1), ContractError);
}

TEST(Inputs, SubtreeFlowByHand) {
  auto z = GridConditions::zeros(2);
  z.p_load << 0.2, 0.3;
  const auto w = derive_inputs(z, chain2(), {1});
  ASSERT_EQ(w.w_u.size(), 1);
  EXPECT_NEAR(w.w_u(0), 0.5, 1e-15);
}

TEST(Inputs, ZeroConditionsAndReverseFlow) {
  const auto topo = chain_with_solar();
  const auto w = derive_inputs(GridConditions::zeros(2), topo, {1, 2});
  EXPECT_TRUE(w.w_u.isZero());
  ASSERT_EQ(w.w_local.size(), 1u);
  EXPECT_EQ(w.w_local[0](0), 0.0);
  EXPECT_EQ(w.w_local[0](1), 0.0);
  EXPECT_EQ(w.w_local[0](2), 0.0);
  EXPECT_EQ(w.w_local[0](3), 0.3);

  auto z = GridConditions::zeros(2);
  z.p_solar << 1.0, 0.0;
  z.p_load << 0.1, 0.2;
  EXPECT_LT(derive_inputs(z, topo, {1}).w_u(0), 0.0);
  EXPECT_THROW(derive_inputs(z, topo, {3}), ContractError);
}

TEST(Inputs, LeafPartitionConservesNetLoad) {
  // Telemetry at the three children of bus 1 plus bus 6's subtree covers
  // every bus except 1 itself.
  const auto topo = ieee13::topology();
  std::mt19937_64 rng(9);
  const auto z = testing::random_conditions(12, rng);
  const auto w = derive_inputs(z, topo, {2, 3, 6});
  const Vector net = z.p_load - z.p_solar;
  EXPECT_NEAR(w.w_u.sum(), net.sum() - net(0), 1e-14);
}

TEST(Augment, SixtyByFourIsTwoForty) {
  const auto topo = chain_with_solar();
  const InputMap inputs(topo, {1});
  const auto set = augment(measured_chain(60, inputs), {4, 1e-3, 7}, inputs);
  EXPECT_EQ(set.size(), 240u);
}

TEST(Augment, ZeroNoiseCopiesParents) {
  const auto topo = chain_with_solar();
  const InputMap inputs(topo, {1});
  const auto measured = measured_chain(5, inputs);
  const auto set = augment(measured, {3, 0.0, 1}, inputs);
  for (const auto& s : set) {
    const auto& parent = measured.at(s.source_index);
    EXPECT_EQ(s.z.stacked(), parent.z.stacked());
    EXPECT_EQ(s.w.w_u, parent.w.w_u);
  }
}

TEST(Augment, ShuffleKeepsMultisetAndOriginalCopy) {
  const auto topo = chain_with_solar();
  const InputMap inputs(topo, {1});
  const auto measured = measured_chain(30, inputs);
  const auto set = augment(measured, {4, 0.05, 3}, inputs);
  std::vector<std::size_t> count(30, 0), originals(30, 0);
  bool reordered = false;
  for (std::size_t k = 0; k < set.size(); ++k) {
    ++count.at(set[k].source_index);
    if (set[k].origin == Origin::measured) {
      ++originals[set[k].source_index];
      EXPECT_EQ(set[k].z.stacked(), measured[set[k].source_index].z.stacked());
    }
    if (set[k].source_index != k / 4) reordered = true;
  }
  for (std::size_t i = 0; i < 30; ++i) {
    EXPECT_EQ(count[i], 4u);
    EXPECT_EQ(originals[i], 1u);
  }
  EXPECT_TRUE(reordered);
}

TEST(Augment, InputsFollowPerturbedConditionsAndStayNonnegative) {
  const auto topo = chain_with_solar();
  const InputMap inputs(topo, {1, 2});
  const auto set = augment(measured_chain(20, inputs), {4, 0.8, 5}, inputs);
  for (const auto& s : set) {
    const auto w = inputs.derive(s.z);
    EXPECT_EQ(w.w_u, s.w.w_u);
    EXPECT_EQ(w.w_local[0], s.w.w_local[0]);
    EXPECT_GE(s.z.p_load.minCoeff(), 0.0);
    EXPECT_GE(s.z.q_load.minCoeff(), 0.0);
    EXPECT_GE(s.z.p_solar.minCoeff(), 0.0);
    EXPECT_EQ(s.z.p_solar(1), 0.0);  // no solar at bus 2
  }
}

TEST(Augment, NoiseSampleStd) {
  const auto topo = chain_with_solar();
  const InputMap inputs(topo, {1});
  const auto measured = measured_chain(1, inputs);
  const auto set = augment(measured, {10001, 1e-2, 13}, inputs);
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (const auto& s : set) {
    if (s.origin == Origin::measured) continue;
    const Vector d = s.z.p_load - measured[0].z.p_load;
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      sum += d(i);
      sq += d(i) * d(i);
      ++n;
    }
  }
  const double mean = sum / static_cast<double>(n);
  const double sd = std::sqrt(sq / static_cast<double>(n) - mean * mean);
  EXPECT_NEAR(sd, 1e-2, 0.2e-2);
  EXPECT_GE(n, 10000u);
}

TEST(Augment, DeterministicSerialization) {
  const auto topo = chain_with_solar();
  const InputMap inputs(topo, {1});
  const auto measured = measured_chain(10, inputs);
  std::stringstream a, b, c;
  write_scenarios(a, augment(measured, {4, 0.1, 21}, inputs));
  write_scenarios(b, augment(measured, {4, 0.1, 21}, inputs));
  write_scenarios(c, augment(measured, {4, 0.1, 22}, inputs));
  EXPECT_EQ(a.str(), b.str());
  EXPECT_NE(a.str(), c.str());
}

TEST(Scenarios, JsonLinesRoundTrip) {
  const auto topo = chain_with_solar();
  const InputMap inputs(topo, {1});
  const auto set = augment(measured_chain(6, inputs), {3, 0.2, 4}, inputs);
  std::stringstream buf;
  write_scenarios(buf, set);
  const auto back = read_scenarios(buf);
  ASSERT_EQ(back.size(), set.size());
  for (std::size_t k = 0; k < set.size(); ++k) {
    EXPECT_EQ(back[k].z.stacked(), set[k].z.stacked());
    EXPECT_EQ(back[k].w.w_u, set[k].w.w_u);
    EXPECT_EQ(back[k].w.w_local[0], set[k].w.w_local[0]);
    EXPECT_EQ(back[k].origin, set[k].origin);
    EXPECT_EQ(back[k].source_index, set[k].source_index);
  }
  std::istringstream bad("{\"z\":[1,2,3]}\n");
  EXPECT_THROW(read_scenarios(bad), IngestError);
}

TEST(Assemble, RejectsSolarOffTheSolarBuses) {
  TimeSeriesTrace tr{2, {0, 1}, {0.1, 0.1}, {0.0, 0.2}};
  EXPECT_THROW(assemble({tr}, chain_with_solar(), {0.9, 1.0}, 1), ContractError);
  tr.bus = 3;
  tr.p_solar = {0.0, 0.0};
  EXPECT_THROW(assemble({tr}, chain_with_solar(), {0.9, 1.0}, 1), ContractError);
}

TEST(Assemble, WindowSelectsHalfOpenRange) {
  TimeSeriesTrace tr{1, {}, {}, {}};
  for (int t = 0; t < 180; ++t) {
    tr.timestamps.push_back(t);
    tr.p_load.push_back(0.1);
    tr.p_solar.push_back(0.0);
  }
  const auto table = assemble({tr}, chain_with_solar(), {0.9, 1.0}, 1);
  const auto rows = table.window(60, 120);
  ASSERT_EQ(rows.size(), 60u);
  EXPECT_EQ(rows.front(), 60u);
  EXPECT_EQ(rows.back(), 119u);
}

}  // namespace
}  // namespace voltnet
