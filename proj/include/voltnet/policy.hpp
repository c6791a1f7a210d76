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

// Two-tier reactive power policy.
//
// A utility sub-network maps telemetry w_u to a short broadcast signal u. Each
// inverter runs its own sub-network on [u; w_local] and outputs
// q_n = qbar_n * tanh(.), so every setpoint lies strictly inside its box.
//
// All parameters live in one flat vector theta. Layout: utility layers first,
// then inverter sub-networks in ascending bus order; within a layer the weight
// matrix is stored row-major and followed by the bias.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "voltnet/error.hpp"
#include "voltnet/feeder.hpp"
#include "voltnet/scenario.hpp"

namespace voltnet {

enum class Activation { tanh, identity };

inline const char* to_string(Activation a) { return a == Activation::tanh ? "tanh" : "identity"; }

inline Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::tanh;
  if (s == "identity") return Activation::identity;
  throw ContractError("unknown activation '" + s + "'");
}

struct LayerSpec {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  Activation activation = Activation::tanh;

  std::size_t parameter_count() const noexcept { return out_dim * in_dim + out_dim; }
  bool operator==(const LayerSpec&) const = default;
};

struct PolicyArch {
  std::size_t bus_count = 0;
  std::vector<InverterSite> inverters;  // ascending bus order
  std::vector<LayerSpec> utility;       // w_u -> u
  std::vector<LayerSpec> inverter;      // [u; w_local] -> scalar, shared shape

  /// Utility layer `utility_inputs -> control_dim` (tanh) and inverter stack
  /// `control_dim + 4 -> hidden... -> 1` with tanh everywhere.
  static PolicyArch two_tier(std::size_t bus_count, std::vector<InverterSite> inverters,
                             std::size_t utility_inputs, std::size_t control_dim = 1,
                             const std::vector<std::size_t>& hidden = {6}) {
    PolicyArch a;
    a.bus_count = bus_count;
    a.inverters = std::move(inverters);
    a.utility.push_back({utility_inputs, control_dim, Activation::tanh});
    std::size_t in = control_dim + kLocalInputDim;
    for (const auto h : hidden) {
      a.inverter.push_back({in, h, Activation::tanh});
      in = h;
    }
    a.inverter.push_back({in, 1, Activation::tanh});
    a.validate();
    return a;
  }

  std::size_t utility_input_dim() const { return utility.front().in_dim; }
  std::size_t control_dim() const { return utility.back().out_dim; }

  std::size_t utility_parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : utility) n += l.parameter_count();
    return n;
  }
  std::size_t inverter_parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : inverter) n += l.parameter_count();
    return n;
  }
  std::size_t parameter_count() const {
    return utility_parameter_count() + inverters.size() * inverter_parameter_count();
  }

  /// Index of the inverter at `bus` within `inverters`, if any.
  std::optional<std::size_t> slot_of(BusId bus) const {
    for (std::size_t s = 0; s < inverters.size(); ++s) {
      if (inverters[s].bus == bus) return s;
    }
    return std::nullopt;
  }

  void validate() const {
    auto chain = [](const std::vector<LayerSpec>& layers, const char* name) {
      if (layers.empty()) throw ContractError(std::string(name) + " sub-network has no layers");
      for (std::size_t l = 0; l < layers.size(); ++l) {
        if (layers[l].in_dim < 1 || layers[l].out_dim < 1) {
          throw ContractError(std::string(name) + " layer " + std::to_string(l) + " has a zero dimension");
        }
        if (l > 0 && layers[l].in_dim != layers[l - 1].out_dim) {
          throw ContractError(std::string(name) + " layer " + std::to_string(l) +
                              " input does not match the previous layer output");
        }
      }
    };
    chain(utility, "utility");
    chain(inverter, "inverter");
    if (utility.back().activation != Activation::tanh) {
      throw ContractError("utility output layer must use tanh so that u stays in (-1, 1)");
    }
    if (inverter.front().in_dim != control_dim() + kLocalInputDim) {
      throw ContractError("inverter input must be [u; w_local] of dimension " +
                          std::to_string(control_dim() + kLocalInputDim));
    }
    if (inverter.back().out_dim != 1 || inverter.back().activation != Activation::tanh) {
      throw ContractError("inverter output layer must be a single tanh unit");
    }
    BusId previous = 0;
    for (const auto& inv : inverters) {
      if (inv.bus < 1 || inv.bus > bus_count || inv.bus <= previous) {
        throw ContractError("inverter buses must be unique, ascending and within 1..N");
      }
      if (!(inv.qbar_pu > 0.0)) throw ContractError("inverter qbar_pu must be positive");
      previous = inv.bus;
    }
  }

  bool operator==(const PolicyArch& o) const {
    if (bus_count != o.bus_count || utility != o.utility || inverter != o.inverter ||
        inverters.size() != o.inverters.size()) {
      return false;
    }
    for (std::size_t s = 0; s < inverters.size(); ++s) {
      if (inverters[s].bus != o.inverters[s].bus || inverters[s].qbar_pu != o.inverters[s].qbar_pu) {
        return false;
      }
    }
    return true;
  }
};

/// Fixed affine standardization applied to raw inputs before the first layer:
/// x -> (x - shift) ./ scale. Not trained.
struct InputScaling {
  Vector utility_shift;
  Vector utility_scale;
  Vector local_shift;
  Vector local_scale;

  static InputScaling identity(const PolicyArch& arch) {
    const auto du = static_cast<Eigen::Index>(arch.utility_input_dim());
    const auto dl = static_cast<Eigen::Index>(kLocalInputDim);
    return {Vector::Zero(du), Vector::Ones(du), Vector::Zero(dl), Vector::Ones(dl)};
  }

  /// Per-feature mean and standard deviation over `samples`; features with
  /// spread below 1e-12 keep unit scale.
  static InputScaling fit(std::span<const ScenarioInputs> samples) {
    detail::require(!samples.empty(), "cannot fit input scaling on an empty set");
    const auto du = samples.front().w_u.size();
    const auto dl = static_cast<Eigen::Index>(kLocalInputDim);
    Vector su = Vector::Zero(du), ssu = Vector::Zero(du);
    Vector sl = Vector::Zero(dl), ssl = Vector::Zero(dl);
    double nl = 0.0;
    for (const auto& w : samples) {
      su += w.w_u;
      ssu += w.w_u.cwiseAbs2();
      for (const auto& x : w.w_local) {
        sl += x;
        ssl += x.cwiseAbs2();
        nl += 1.0;
      }
    }
    const double nu = static_cast<double>(samples.size());
    auto finish = [](const Vector& s, const Vector& ss, double n, Vector& shift, Vector& scale) {
      shift = s / n;
      scale.resize(s.size());
      for (Eigen::Index i = 0; i < s.size(); ++i) {
        const double var = std::max(0.0, ss(i) / n - shift(i) * shift(i));
        const double sd = std::sqrt(var);
        scale(i) = sd > 1e-12 ? sd : 1.0;
      }
    };
    InputScaling out;
    finish(su, ssu, nu, out.utility_shift, out.utility_scale);
    if (nl > 0.0) {
      finish(sl, ssl, nl, out.local_shift, out.local_scale);
    } else {
      out.local_shift = Vector::Zero(dl);
      out.local_scale = Vector::Ones(dl);
    }
    return out;
  }

  bool operator==(const InputScaling& o) const {
    return utility_shift == o.utility_shift && utility_scale == o.utility_scale &&
           local_shift == o.local_shift && local_scale == o.local_scale;
  }
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct DenseLayer {
  RowMatrix weight;  // out x in
  Vector bias;       // out
};

/// Architecture plus flat parameter vector theta.
class PolicyParams {
 public:
  PolicyParams(PolicyArch arch, Vector theta)
      : arch_(std::move(arch)), theta_(std::move(theta)) {
    arch_.validate();
    if (static_cast<std::size_t>(theta_.size()) != arch_.parameter_count()) {
      throw ArchMismatchError("theta has " + std::to_string(theta_.size()) + " entries, architecture needs " +
                              std::to_string(arch_.parameter_count()));
    }
    scaling_ = InputScaling::identity(arch_);
  }

  static PolicyParams zeros(const PolicyArch& arch) {
    return PolicyParams(arch, Vector::Zero(static_cast<Eigen::Index>(arch.parameter_count())));
  }

  const PolicyArch& arch() const noexcept { return arch_; }
  const Vector& theta() const noexcept { return theta_; }
  Vector& theta() noexcept { return theta_; }
  const InputScaling& scaling() const noexcept { return scaling_; }
  void set_scaling(InputScaling s) {
    detail::require(s.utility_shift.size() == static_cast<Eigen::Index>(arch_.utility_input_dim()) &&
                        s.local_shift.size() == static_cast<Eigen::Index>(kLocalInputDim),
                    "input scaling does not match the architecture");
    scaling_ = std::move(s);
  }

  Eigen::Index utility_offset(std::size_t layer) const {
    std::size_t off = 0;
    for (std::size_t l = 0; l < layer; ++l) off += arch_.utility[l].parameter_count();
    return static_cast<Eigen::Index>(off);
  }

  Eigen::Index inverter_offset(std::size_t slot, std::size_t layer) const {
    std::size_t off = arch_.utility_parameter_count() + slot * arch_.inverter_parameter_count();
    for (std::size_t l = 0; l < layer; ++l) off += arch_.inverter[l].parameter_count();
    return static_cast<Eigen::Index>(off);
  }

  std::vector<DenseLayer> utility_layers() const {
    return unpack(arch_.utility, [&](std::size_t l) { return utility_offset(l); });
  }

  std::vector<DenseLayer> inverter_layers(std::size_t slot) const {
    detail::require(slot < arch_.inverters.size(), "inverter slot out of range");
    return unpack(arch_.inverter, [&](std::size_t l) { return inverter_offset(slot, l); });
  }

  /// Inverse of the accessors above: packs per-layer weights into theta.
  static PolicyParams from_layers(const PolicyArch& arch, const std::vector<DenseLayer>& utility,
                                  const std::vector<std::vector<DenseLayer>>& inverters) {
    auto p = zeros(arch);
    detail::require(utility.size() == arch.utility.size() && inverters.size() == arch.inverters.size(),
                    "layer lists do not match the architecture");
    auto pack = [&](const std::vector<LayerSpec>& specs, const std::vector<DenseLayer>& layers, auto offset) {
      detail::require(layers.size() == specs.size(), "layer count does not match the architecture");
      for (std::size_t l = 0; l < specs.size(); ++l) {
        const auto out = static_cast<Eigen::Index>(specs[l].out_dim);
        const auto in = static_cast<Eigen::Index>(specs[l].in_dim);
        detail::require(layers[l].weight.rows() == out && layers[l].weight.cols() == in &&
                            layers[l].bias.size() == out,
                        "layer shape does not match the architecture");
        const auto off = offset(l);
        Eigen::Map<RowMatrix>(p.theta_.data() + off, out, in) = layers[l].weight;
        p.theta_.segment(off + out * in, out) = layers[l].bias;
      }
    };
    pack(arch.utility, utility, [&](std::size_t l) { return p.utility_offset(l); });
    for (std::size_t s = 0; s < inverters.size(); ++s) {
      pack(arch.inverter, inverters[s], [&](std::size_t l) { return p.inverter_offset(s, l); });
    }
    return p;
  }

 private:
  template <class Offset>
  std::vector<DenseLayer> unpack(const std::vector<LayerSpec>& specs, Offset offset) const {
    std::vector<DenseLayer> out;
    for (std::size_t l = 0; l < specs.size(); ++l) {
      const auto o = static_cast<Eigen::Index>(specs[l].out_dim);
      const auto i = static_cast<Eigen::Index>(specs[l].in_dim);
      const auto off = offset(l);
      out.push_back({Eigen::Map<const RowMatrix>(theta_.data() + off, o, i),
                     theta_.segment(off + o * i, o)});
    }
    return out;
  }

  PolicyArch arch_;
  Vector theta_;
  InputScaling scaling_;
};

/// Every parameter i.i.d. uniform on [-0.1, 0.1].
inline PolicyParams init_params(const PolicyArch& arch, std::uint64_t seed) {
  arch.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-0.1, 0.1);
  Vector theta(static_cast<Eigen::Index>(arch.parameter_count()));
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta(i) = dist(rng);
  return PolicyParams(arch, std::move(theta));
}

struct ControlSignal {
  Vector u;  // entries in (-1, 1)
};

namespace detail {

// Activations of one dense stack, kept for the backward pass.
struct StackTape {
  std::vector<Vector> inputs;
  std::vector<Vector> outputs;
};

template <class Offset>
Vector run_stack(const Vector& theta, const std::vector<LayerSpec>& specs, Offset offset,
                 Vector x, StackTape* tape) {
  for (std::size_t l = 0; l < specs.size(); ++l) {
    const auto o = static_cast<Eigen::Index>(specs[l].out_dim);
    const auto i = static_cast<Eigen::Index>(specs[l].in_dim);
    const auto off = offset(l);
    Eigen::Map<const RowMatrix> w(theta.data() + off, o, i);
    Vector z = w * x + theta.segment(off + o * i, o);
    if (specs[l].activation == Activation::tanh) z = z.array().tanh().matrix();
    if (tape) {
      tape->inputs.push_back(std::move(x));
      tape->outputs.push_back(z);
    }
    x = std::move(z);
  }
  return x;
}

// Backpropagates d(objective)/d(stack output) into `grad` and returns
// d(objective)/d(stack input).
template <class Offset>
Vector backprop_stack(const Vector& theta, const std::vector<LayerSpec>& specs, Offset offset,
                      const StackTape& tape, Vector upstream, Vector& grad) {
  for (std::size_t l = specs.size(); l-- > 0;) {
    const auto o = static_cast<Eigen::Index>(specs[l].out_dim);
    const auto i = static_cast<Eigen::Index>(specs[l].in_dim);
    const auto off = offset(l);
    if (specs[l].activation == Activation::tanh) {
      upstream = upstream.cwiseProduct((1.0 - tape.outputs[l].array().square()).matrix());
    }
    Eigen::Map<RowMatrix> gw(grad.data() + off, o, i);
    gw.noalias() += upstream * tape.inputs[l].transpose();
    grad.segment(off + o * i, o) += upstream;
    Eigen::Map<const RowMatrix> w(theta.data() + off, o, i);
    upstream = w.transpose() * upstream;
  }
  return upstream;
}

inline Vector scaled_utility_input(const PolicyParams& p, const Vector& w_u) {
  detail::require_size(w_u, static_cast<Eigen::Index>(p.arch().utility_input_dim()), "w_u");
  const auto& s = p.scaling();
  return (w_u - s.utility_shift).cwiseQuotient(s.utility_scale);
}

inline Vector inverter_input(const PolicyParams& p, const Vector& u, const Vector& w_local) {
  detail::require_size(u, static_cast<Eigen::Index>(p.arch().control_dim()), "u");
  detail::require_size(w_local, static_cast<Eigen::Index>(kLocalInputDim), "w_local");
  const auto& s = p.scaling();
  Vector x(u.size() + w_local.size());
  x << u, (w_local - s.local_shift).cwiseQuotient(s.local_scale);
  return x;
}

inline void require_inputs(const PolicyParams& p, const ScenarioInputs& w) {
  if (w.w_local.size() != p.arch().inverters.size()) {
    throw ContractError("got local inputs for " + std::to_string(w.w_local.size()) + " inverters, policy has " +
                        std::to_string(p.arch().inverters.size()));
  }
}

}  // namespace detail

inline ControlSignal forward_utility(const PolicyParams& p, const Vector& w_u) {
  const auto& arch = p.arch();
  return {detail::run_stack(p.theta(), arch.utility, [&](std::size_t l) { return p.utility_offset(l); },
                            detail::scaled_utility_input(p, w_u), nullptr)};
}

/// Setpoint of the inverter at `bus` given the broadcast signal, its local
/// readings and its capability `qbar`.
inline double forward_inverter(const PolicyParams& p, BusId bus, const ControlSignal& u,
                               const Vector& w_local, double qbar) {
  const auto slot = p.arch().slot_of(bus);
  if (!slot) throw ContractError("bus " + std::to_string(bus) + " has no inverter in this policy");
  const Vector out = detail::run_stack(
      p.theta(), p.arch().inverter, [&](std::size_t l) { return p.inverter_offset(*slot, l); },
      detail::inverter_input(p, u.u, w_local), nullptr);
  return qbar * out(0);
}

/// Full policy: one utility evaluation, then every inverter on the same u.
/// Entries of non-inverter buses are zero.
inline Vector forward(const PolicyParams& p, const ScenarioInputs& w) {
  detail::require_inputs(p, w);
  const auto& arch = p.arch();
  const auto u = forward_utility(p, w.w_u);
  Vector q = Vector::Zero(static_cast<Eigen::Index>(arch.bus_count));
  for (std::size_t s = 0; s < arch.inverters.size(); ++s) {
    const auto& inv = arch.inverters[s];
    q(static_cast<Eigen::Index>(inv.bus - 1)) = forward_inverter(p, inv.bus, u, w.w_local[s], inv.qbar_pu);
  }
  return q;
}

/// Returns J' c where J = d forward / d theta (N x dim(theta)) and c is an
/// N-vector, by one reverse sweep. Utility gradients accumulate over all
/// inverter heads.
inline Vector vector_jacobian_product(const PolicyParams& p, const ScenarioInputs& w, const Vector& c) {
  detail::require_inputs(p, w);
  const auto& arch = p.arch();
  detail::require_size(c, static_cast<Eigen::Index>(arch.bus_count), "cotangent");
  const auto& theta = p.theta();
  Vector grad = Vector::Zero(theta.size());

  auto utility_offset = [&](std::size_t l) { return p.utility_offset(l); };
  detail::StackTape utape;
  const Vector u = detail::run_stack(theta, arch.utility, utility_offset,
                                     detail::scaled_utility_input(p, w.w_u), &utape);
  Vector du = Vector::Zero(u.size());
  for (std::size_t s = 0; s < arch.inverters.size(); ++s) {
    const auto& inv = arch.inverters[s];
    const double weight = c(static_cast<Eigen::Index>(inv.bus - 1));
    if (weight == 0.0) continue;
    auto offset = [&](std::size_t l) { return p.inverter_offset(s, l); };
    detail::StackTape tape;
    detail::run_stack(theta, arch.inverter, offset, detail::inverter_input(p, u, w.w_local[s]), &tape);
    const Vector dx = detail::backprop_stack(theta, arch.inverter, offset, tape,
                                             Vector::Constant(1, weight * inv.qbar_pu), grad);
    du += dx.head(u.size());
  }
  detail::backprop_stack(theta, arch.utility, utility_offset, utape, du, grad);
  return grad;
}

/// Dense Jacobian d forward / d theta, N x dim(theta). Rows of buses without an
/// inverter are zero.
inline Matrix jacobian(const PolicyParams& p, const ScenarioInputs& w) {
  const auto& arch = p.arch();
  const auto n = static_cast<Eigen::Index>(arch.bus_count);
  Matrix J = Matrix::Zero(n, p.theta().size());
  for (const auto& inv : arch.inverters) {
    Vector e = Vector::Zero(n);
    e(static_cast<Eigen::Index>(inv.bus - 1)) = 1.0;
    J.row(static_cast<Eigen::Index>(inv.bus - 1)) = vector_jacobian_product(p, w, e).transpose();
  }
  return J;
}

// ---------------------------------------------------------------------------
// Model file: versioned JSON with architecture, input scaling, theta and the
// control-period window the parameters were trained for.

inline constexpr int kModelFormatVersion = 1;

struct ModelMetadata {
  std::int64_t window_start_min = 0;  // control period the model is trained for
  std::int64_t window_end_min = 0;
  std::vector<BusId> telemetry;
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  std::size_t scenarios = 0;
};

struct ModelFile {
  PolicyParams params;
  ModelMetadata metadata;
};

namespace detail {
inline nlohmann::json layers_to_json(const std::vector<LayerSpec>& layers) {
  auto arr = nlohmann::json::array();
  for (const auto& l : layers) {
    arr.push_back({{"in", l.in_dim}, {"out", l.out_dim}, {"activation", to_string(l.activation)}});
  }
  return arr;
}
inline std::vector<LayerSpec> layers_from_json(const nlohmann::json& j) {
  std::vector<LayerSpec> out;
  for (const auto& l : j) {
    out.push_back({l.at("in").get<std::size_t>(), l.at("out").get<std::size_t>(),
                   activation_from_string(l.at("activation").get<std::string>())});
  }
  return out;
}
}  // namespace detail

inline nlohmann::json arch_to_json(const PolicyArch& arch) {
  auto inv = nlohmann::json::array();
  for (const auto& s : arch.inverters) inv.push_back({{"bus", s.bus}, {"qbar_pu", s.qbar_pu}});
  return {{"bus_count", arch.bus_count},
          {"inverters", inv},
          {"utility", detail::layers_to_json(arch.utility)},
          {"inverter", detail::layers_to_json(arch.inverter)}};
}

inline PolicyArch arch_from_json(const nlohmann::json& j) {
  PolicyArch arch;
  arch.bus_count = j.at("bus_count").get<std::size_t>();
  for (const auto& s : j.at("inverters")) {
    arch.inverters.push_back({s.at("bus").get<BusId>(), s.at("qbar_pu").get<double>()});
  }
  arch.utility = detail::layers_from_json(j.at("utility"));
  arch.inverter = detail::layers_from_json(j.at("inverter"));
  arch.validate();
  return arch;
}

inline void write_model(std::ostream& out, const PolicyParams& p, const ModelMetadata& meta) {
  const auto& s = p.scaling();
  nlohmann::json j;
  j["format"] = "voltnet-policy";
  j["version"] = kModelFormatVersion;
  j["arch"] = arch_to_json(p.arch());
  j["input_scaling"] = {{"utility_shift", detail::to_json_array(s.utility_shift)},
                        {"utility_scale", detail::to_json_array(s.utility_scale)},
                        {"local_shift", detail::to_json_array(s.local_shift)},
                        {"local_scale", detail::to_json_array(s.local_scale)}};
  j["theta"] = detail::to_json_array(p.theta());
  j["metadata"] = {{"window_start_min", meta.window_start_min},
                   {"window_end_min", meta.window_end_min},
                   {"telemetry", meta.telemetry},
                   {"seed", meta.seed},
                   {"epochs", meta.epochs},
                   {"scenarios", meta.scenarios}};
  out << j.dump(1) << '\n';
}

/// Parses a model file. When `expected` is given the stored architecture must
/// match it exactly.
inline ModelFile read_model(std::istream& in, const PolicyArch* expected = nullptr) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ArchMismatchError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "voltnet-policy") throw ArchMismatchError("not a voltnet policy file");
    const int version = j.at("version").get<int>();
    if (version != kModelFormatVersion) {
      throw ArchMismatchError("model format version " + std::to_string(version) + " is not supported (expected " +
                              std::to_string(kModelFormatVersion) + ")");
    }
    auto arch = arch_from_json(j.at("arch"));
    if (expected) {
      if (expected->inverters.size() != arch.inverters.size()) {
        throw ArchMismatchError("model has " + std::to_string(arch.inverters.size()) + " inverters, expected " +
                                std::to_string(expected->inverters.size()));
      }
      if (!(*expected == arch)) throw ArchMismatchError("model architecture does not match the feeder");
    }
    PolicyParams p(std::move(arch), detail::from_json_array(j.at("theta")));
    const auto& s = j.at("input_scaling");
    p.set_scaling({detail::from_json_array(s.at("utility_shift")), detail::from_json_array(s.at("utility_scale")),
                   detail::from_json_array(s.at("local_shift")), detail::from_json_array(s.at("local_scale"))});
    ModelMetadata meta;
    const auto& m = j.at("metadata");
    meta.window_start_min = m.at("window_start_min").get<std::int64_t>();
    meta.window_end_min = m.at("window_end_min").get<std::int64_t>();
    meta.telemetry = m.at("telemetry").get<std::vector<BusId>>();
    meta.seed = m.at("seed").get<std::uint64_t>();
    meta.epochs = m.at("epochs").get<std::size_t>();
    meta.scenarios = m.at("scenarios").get<std::size_t>();
    return {std::move(p), std::move(meta)};
  } catch (const nlohmann::json::exception& e) {
    throw ArchMismatchError(std::string("malformed model file: ") + e.what());
  }
}

inline void serialize_params(const PolicyParams& p, const ModelMetadata& meta, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ContractError("cannot write '" + path + "'");
  write_model(out, p, meta);
}

inline ModelFile deserialize_params(const std::string& path, const PolicyArch* expected = nullptr) {
  auto in = detail::open_input(path);
  return read_model(in, expected);
}

}  // namespace voltnet
