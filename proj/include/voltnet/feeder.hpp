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

// Radial feeder model under the linearized distribution flow approximation.
//
// Buses are numbered 0..N with 0 the substation. Every per-bus vector in this
// library has length N and stores bus n at index n - 1.

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <queue>
#include <string>
#include <vector>

#include "voltnet/csv.hpp"
#include "voltnet/error.hpp"

namespace voltnet {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using BusId = std::size_t;

namespace detail {
inline void require(bool ok, const std::string& what) {
  if (!ok) throw ContractError(what);
}
inline void require_size(const Vector& v, Eigen::Index n, const char* name) {
  if (v.size() != n) {
    throw ContractError(std::string(name) + " has length " + std::to_string(v.size()) +
                        ", expected " + std::to_string(n));
  }
}
}  // namespace detail

struct Line {
  BusId from = 0;
  BusId to = 0;
  double r_pu = 0.0;
  double x_pu = 0.0;
};

struct InverterSite {
  BusId bus = 0;
  double qbar_pu = 0.0;
};

struct FeederTopology {
  std::size_t bus_count = 0;  // N, excludes the substation
  std::vector<Line> lines;
  std::vector<InverterSite> inverters;  // ascending bus order
  std::vector<BusId> solar_buses;
  double v0 = 1.0;

  /// Reactive capability per bus; zero where no inverter is installed.
  Vector qbar() const {
    Vector out = Vector::Zero(static_cast<Eigen::Index>(bus_count));
    for (const auto& inv : inverters) out(static_cast<Eigen::Index>(inv.bus - 1)) = inv.qbar_pu;
    return out;
  }

  bool has_solar(BusId bus) const {
    return std::find(solar_buses.begin(), solar_buses.end(), bus) != solar_buses.end();
  }
};

/// Tree view of a feeder: parent pointers, children and cumulative path
/// impedance from the substation. Construction validates the topology.
class FeederTree {
 public:
  explicit FeederTree(const FeederTopology& topo) : n_(topo.bus_count) {
    if (n_ == 0) throw TopologyError("feeder has no buses besides the substation");
    if (topo.lines.size() != n_) {
      throw TopologyError("radial feeder with " + std::to_string(n_) + " buses needs " +
                          std::to_string(n_) + " lines, found " +
                          std::to_string(topo.lines.size()));
    }
    std::vector<std::vector<std::size_t>> adjacent(n_ + 1);
    for (std::size_t i = 0; i < topo.lines.size(); ++i) {
      const auto& l = topo.lines[i];
      const auto name = line_name(l);
      if (l.from > n_ || l.to > n_) throw TopologyError(name + " references a bus outside 0.." + std::to_string(n_));
      if (l.from == l.to) throw TopologyError(name + " is a self loop");
      if (!(l.r_pu > 0.0) || !(l.x_pu > 0.0)) {
        throw TopologyError(name + " must have positive r_pu and x_pu");
      }
      adjacent[l.from].push_back(i);
      adjacent[l.to].push_back(i);
    }

    parent_.assign(n_ + 1, 0);
    depth_.assign(n_ + 1, 0);
    path_r_.assign(n_ + 1, 0.0);
    path_x_.assign(n_ + 1, 0.0);
    children_.assign(n_ + 1, {});
    std::vector<bool> seen(n_ + 1, false);
    std::vector<bool> used(topo.lines.size(), false);
    std::queue<BusId> frontier;
    frontier.push(0);
    seen[0] = true;
    while (!frontier.empty()) {
      const BusId bus = frontier.front();
      frontier.pop();
      order_.push_back(bus);
      for (const auto i : adjacent[bus]) {
        if (used[i]) continue;
        used[i] = true;
        const auto& l = topo.lines[i];
        const BusId next = l.from == bus ? l.to : l.from;
        if (seen[next]) throw TopologyError(line_name(l) + " closes a cycle at bus " + std::to_string(next));
        seen[next] = true;
        parent_[next] = bus;
        depth_[next] = depth_[bus] + 1;
        path_r_[next] = path_r_[bus] + l.r_pu;
        path_x_[next] = path_x_[bus] + l.x_pu;
        children_[bus].push_back(next);
        frontier.push(next);
      }
    }
    for (BusId b = 1; b <= n_; ++b) {
      if (!seen[b]) throw TopologyError("bus " + std::to_string(b) + " is not connected to the substation");
    }
    for (auto& c : children_) std::sort(c.begin(), c.end());
  }

  std::size_t bus_count() const noexcept { return n_; }
  BusId parent(BusId bus) const { return parent_.at(bus); }
  const std::vector<BusId>& children(BusId bus) const { return children_.at(bus); }
  std::size_t depth(BusId bus) const { return depth_.at(bus); }
  /// Total resistance on the path from the substation to `bus`.
  double path_r(BusId bus) const { return path_r_.at(bus); }
  double path_x(BusId bus) const { return path_x_.at(bus); }
  /// Buses in breadth-first order from the substation (bus 0 first).
  const std::vector<BusId>& bfs_order() const noexcept { return order_; }

  BusId common_ancestor(BusId a, BusId b) const {
    while (depth_.at(a) > depth_.at(b)) a = parent_[a];
    while (depth_.at(b) > depth_.at(a)) b = parent_[b];
    while (a != b) {
      a = parent_[a];
      b = parent_[b];
    }
    return a;
  }

  /// `root` and every bus below it.
  std::vector<BusId> subtree(BusId root) const {
    std::vector<BusId> out{root};
    for (std::size_t i = 0; i < out.size(); ++i) {
      const auto& c = children_.at(out[i]);
      out.insert(out.end(), c.begin(), c.end());
    }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  static std::string line_name(const Line& l) {
    return "line " + std::to_string(l.from) + "->" + std::to_string(l.to);
  }

  std::size_t n_;
  std::vector<BusId> parent_;
  std::vector<std::size_t> depth_;
  std::vector<double> path_r_;
  std::vector<double> path_x_;
  std::vector<std::vector<BusId>> children_;
  std::vector<BusId> order_;
};

/// Checks every FeederTopology invariant. Throws TopologyError or ContractError.
inline void validate(const FeederTopology& topo) {
  FeederTree tree(topo);
  detail::require(topo.v0 > 0.0, "substation voltage must be positive");
  BusId previous = 0;
  for (const auto& inv : topo.inverters) {
    if (inv.bus < 1 || inv.bus > topo.bus_count) {
      throw TopologyError("inverter bus " + std::to_string(inv.bus) + " is not in 1.." +
                          std::to_string(topo.bus_count));
    }
    if (inv.bus <= previous) throw ContractError("inverter buses must be unique and ascending");
    if (!(inv.qbar_pu > 0.0)) {
      throw ContractError("inverter at bus " + std::to_string(inv.bus) + " needs qbar_pu > 0");
    }
    previous = inv.bus;
  }
  for (const auto bus : topo.solar_buses) {
    if (bus < 1 || bus > topo.bus_count) {
      throw TopologyError("solar bus " + std::to_string(bus) + " is not in 1.." +
                          std::to_string(topo.bus_count));
    }
  }
}

/// Voltage sensitivities: v ~= R p + X q + v0 1.
struct SensitivityMatrices {
  Matrix R;
  Matrix X;

  Eigen::Index size() const noexcept { return R.rows(); }
};

/// R(m, n) = 2 * resistance shared by the substation paths of buses m and n,
/// and likewise for X with reactance.
inline SensitivityMatrices build_sensitivities(const FeederTopology& topo) {
  validate(topo);
  const FeederTree tree(topo);
  const auto n = static_cast<Eigen::Index>(topo.bus_count);
  SensitivityMatrices s{Matrix::Zero(n, n), Matrix::Zero(n, n)};
  for (BusId m = 1; m <= topo.bus_count; ++m) {
    for (BusId k = m; k <= topo.bus_count; ++k) {
      const BusId a = tree.common_ancestor(m, k);
      const auto i = static_cast<Eigen::Index>(m - 1);
      const auto j = static_cast<Eigen::Index>(k - 1);
      s.R(i, j) = s.R(j, i) = 2.0 * tree.path_r(a);
      s.X(i, j) = s.X(j, i) = 2.0 * tree.path_x(a);
    }
  }
  return s;
}

inline double min_eigenvalue(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

inline double max_eigenvalue(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().maxCoeff();
}

inline bool is_psd(const Matrix& m, double tol = 1e-10) {
  return m.rows() == m.cols() && m == m.transpose() && min_eigenvalue(m) >= -tol;
}

/// One realization z = [p_load; q_load; p_solar] across buses 1..N.
struct GridConditions {
  Vector p_load;
  Vector q_load;
  Vector p_solar;

  static GridConditions zeros(std::size_t n) {
    const auto k = static_cast<Eigen::Index>(n);
    return {Vector::Zero(k), Vector::Zero(k), Vector::Zero(k)};
  }

  Eigen::Index size() const noexcept { return p_load.size(); }

  Vector stacked() const {
    Vector z(3 * size());
    z << p_load, q_load, p_solar;
    return z;
  }

  static GridConditions from_stacked(const Vector& z) {
    detail::require(z.size() % 3 == 0 && z.size() > 0, "stacked grid conditions must have length 3N");
    const auto n = z.size() / 3;
    return {z.segment(0, n), z.segment(n, n), z.segment(2 * n, n)};
  }
};

/// Checks dimensions, nonnegativity and that solar is zero off the solar buses.
inline void validate(const GridConditions& z, const FeederTopology& topo) {
  const auto n = static_cast<Eigen::Index>(topo.bus_count);
  detail::require_size(z.p_load, n, "p_load");
  detail::require_size(z.q_load, n, "q_load");
  detail::require_size(z.p_solar, n, "p_solar");
  detail::require(z.p_load.minCoeff() >= 0.0, "p_load must be nonnegative");
  detail::require(z.q_load.minCoeff() >= 0.0, "q_load must be nonnegative");
  detail::require(z.p_solar.minCoeff() >= 0.0, "p_solar must be nonnegative");
  for (BusId b = 1; b <= topo.bus_count; ++b) {
    if (!topo.has_solar(b) && z.p_solar(static_cast<Eigen::Index>(b - 1)) != 0.0) {
      throw ContractError("p_solar is nonzero at bus " + std::to_string(b) + " which has no solar");
    }
  }
}

struct VoltageLimits {
  Vector v_lo;
  Vector v_hi;

  static VoltageLimits uniform(std::size_t n, double lo = 0.97, double hi = 1.03) {
    detail::require(lo < hi, "voltage limits need v_lo < v_hi");
    const auto k = static_cast<Eigen::Index>(n);
    return {Vector::Constant(k, lo), Vector::Constant(k, hi)};
  }
};

/// Control-independent terms of the voltage constraints and losses for one z.
struct ConstraintContext {
  Vector y;  // R (p_solar - p_load) - X q_load + v0 1
  Vector b;  // 2 R q_load
};

inline ConstraintContext make_context(const SensitivityMatrices& s, const GridConditions& z,
                                      double v0) {
  const auto n = s.size();
  detail::require_size(z.p_load, n, "p_load");
  detail::require_size(z.q_load, n, "q_load");
  detail::require_size(z.p_solar, n, "p_solar");
  ConstraintContext ctx;
  ctx.y = s.R * (z.p_solar - z.p_load) - s.X * z.q_load + Vector::Constant(n, v0);
  ctx.b = 2.0 * s.R * z.q_load;
  return ctx;
}

inline Vector predict_voltages(const SensitivityMatrices& s, const GridConditions& z,
                               const Vector& q_inv, double v0) {
  detail::require_size(q_inv, s.size(), "q_inv");
  detail::require_size(z.p_load, s.size(), "p_load");
  detail::require_size(z.q_load, s.size(), "q_load");
  detail::require_size(z.p_solar, s.size(), "p_solar");
  return s.R * (z.p_solar - z.p_load) + s.X * (q_inv - z.q_load) +
         Vector::Constant(s.size(), v0);
}

/// Same voltages as predict_voltages, from a precomputed context.
inline Vector voltages(const ConstraintContext& ctx, const SensitivityMatrices& s,
                       const Vector& q_inv) {
  detail::require_size(q_inv, s.size(), "q_inv");
  detail::require_size(ctx.y, s.size(), "y");
  return s.X * q_inv + ctx.y;
}

/// Excursions at or below this (pu of squared voltage) are not counted as
/// violations; it absorbs round-off of solutions that sit on a limit.
inline constexpr double kViolationTolerance = 1e-6;

/// g = [v - v_hi; v_lo - v]; feasible iff g <= 0.
inline Vector constraint_g(const ConstraintContext& ctx, const SensitivityMatrices& s,
                           const Vector& q_inv, const VoltageLimits& lim) {
  const auto n = s.size();
  detail::require_size(lim.v_lo, n, "v_lo");
  detail::require_size(lim.v_hi, n, "v_hi");
  const Vector v = voltages(ctx, s, q_inv);
  Vector g(2 * n);
  g << v - lim.v_hi, lim.v_lo - v;
  return g;
}

/// Control-dependent part of the ohmic losses: q' R q - b' q.
inline double losses(const ConstraintContext& ctx, const SensitivityMatrices& s,
                     const Vector& q_inv) {
  detail::require_size(q_inv, s.size(), "q_inv");
  detail::require_size(ctx.b, s.size(), "b");
  return q_inv.dot(s.R * q_inv) - ctx.b.dot(q_inv);
}

inline Vector losses_gradient(const ConstraintContext& ctx, const SensitivityMatrices& s,
                              const Vector& q_inv) {
  detail::require_size(q_inv, s.size(), "q_inv");
  detail::require_size(ctx.b, s.size(), "b");
  return 2.0 * s.R * q_inv - ctx.b;
}

// ---------------------------------------------------------------------------
// File formats: feeder `from,to,r_pu,x_pu`; inverters `bus,qbar_pu`; solar `bus`.

inline std::vector<Line> read_lines_csv(std::istream& in) {
  std::vector<Line> lines;
  for (const auto& row : csv::read(in, {"from", "to", "r_pu", "x_pu"})) {
    const auto from = csv::to_integer(row, 0);
    const auto to = csv::to_integer(row, 1);
    if (from < 0 || to < 0) throw IngestError(row.line, "bus ids must be nonnegative");
    lines.push_back({static_cast<BusId>(from), static_cast<BusId>(to), csv::to_double(row, 2),
                     csv::to_double(row, 3)});
  }
  return lines;
}

inline std::vector<InverterSite> read_inverters_csv(std::istream& in) {
  std::vector<InverterSite> out;
  for (const auto& row : csv::read(in, {"bus", "qbar_pu"})) {
    const auto bus = csv::to_integer(row, 0);
    if (bus < 0) throw IngestError(row.line, "bus ids must be nonnegative");
    out.push_back({static_cast<BusId>(bus), csv::to_double(row, 1)});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.bus < b.bus; });
  return out;
}

inline std::vector<BusId> read_bus_list_csv(std::istream& in) {
  std::vector<BusId> out;
  for (const auto& row : csv::read(in, {"bus"})) {
    const auto bus = csv::to_integer(row, 0);
    if (bus < 0) throw IngestError(row.line, "bus ids must be nonnegative");
    out.push_back(static_cast<BusId>(bus));
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace detail {
inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ContractError("cannot open '" + path + "'");
  return in;
}
}  // namespace detail

/// Loads and validates a feeder from its three CSV files.
inline FeederTopology load_feeder(const std::string& lines_path, const std::string& inverters_path,
                                  const std::string& solar_path, double v0 = 1.0) {
  FeederTopology topo;
  {
    auto in = detail::open_input(lines_path);
    topo.lines = read_lines_csv(in);
  }
  {
    auto in = detail::open_input(inverters_path);
    topo.inverters = read_inverters_csv(in);
  }
  {
    auto in = detail::open_input(solar_path);
    topo.solar_buses = read_bus_list_csv(in);
  }
  topo.bus_count = topo.lines.size();
  topo.v0 = v0;
  validate(topo);
  return topo;
}

inline void write_feeder(const FeederTopology& topo, std::ostream& lines_out,
                         std::ostream& inverters_out, std::ostream& solar_out) {
  lines_out.precision(17);
  inverters_out.precision(17);
  lines_out << "from,to,r_pu,x_pu\n";
  for (const auto& l : topo.lines) lines_out << l.from << ',' << l.to << ',' << l.r_pu << ',' << l.x_pu << '\n';
  inverters_out << "bus,qbar_pu\n";
  for (const auto& inv : topo.inverters) inverters_out << inv.bus << ',' << inv.qbar_pu << '\n';
  solar_out << "bus\n";
  for (const auto b : topo.solar_buses) solar_out << b << '\n';
}

}  // namespace voltnet
