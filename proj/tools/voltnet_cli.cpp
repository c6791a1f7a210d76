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


// voltnet command-line tool: gen-data, train, evaluate, compare.
//
// Exit codes: 0 success, 1 contract or I/O error, 2 numerical divergence.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "voltnet/voltnet.hpp"

namespace fs = std::filesystem;
using namespace voltnet;

namespace {

constexpr const char* kVersion = "1.0.0";

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ContractError("cannot write " + path.string());
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_output(path);
  out << text;
}

// The manifest keeps one entry per subcommand, so a run directory records
// every stage that wrote into it.
void update_manifest(const RunConfig& cfg, const std::string& command, const std::vector<std::string>& outputs) {
  const fs::path path = fs::path(cfg.run_dir) / "manifest.json";
  nlohmann::json manifest;
  if (fs::exists(path)) {
    std::ifstream in(path);
    try {
      in >> manifest;
    } catch (const nlohmann::json::exception&) {
      throw ContractError("unreadable manifest " + path.string());
    }
  }
  manifest["tool"] = "voltnet";
  manifest["version"] = kVersion;
  const auto seeds = stage_seeds(cfg.seed);
  manifest["commands"][command] = {
      {"config_hash", "fnv1a64:" + config_hash(cfg)},
      {"config", canonical_text(cfg)},
      {"seeds",
       {{"run", cfg.seed}, {"traces", seeds.traces}, {"reactive", seeds.reactive}, {"augment", seeds.augment},
        {"train", seeds.train}}},
      {"outputs", outputs}};
  write_text(path, manifest.dump(2) + "\n");
}

void cmd_gen_data(const RunConfig& cfg, const std::string& out_dir_opt) {
  cfg.validate();
  const fs::path out_dir = out_dir_opt.empty() ? fs::path(cfg.run_dir) / "data" : fs::path(out_dir_opt);
  const auto topo = load_topology(cfg);
  auto syn = ieee13::synthetic_config(stage_seeds(cfg.seed).traces, cfg.days);
  if (topo.bus_count != ieee13::kBusCount) throw ContractError("gen-data only knows the bundled 13-bus profile");
  const auto traces = generate_traces(syn);
  {
    auto out = open_output(out_dir / "traces.csv");
    write_traces(out, traces);
  }
  {
    auto lines = open_output(out_dir / "lines.csv");
    auto inverters = open_output(out_dir / "inverters.csv");
    auto solar = open_output(out_dir / "solar_buses.csv");
    write_feeder(topo, lines, inverters, solar);
  }
  update_manifest(cfg, "gen-data",
                  {(out_dir / "traces.csv").string(), (out_dir / "lines.csv").string(),
                   (out_dir / "inverters.csv").string(), (out_dir / "solar_buses.csv").string()});
  std::cout << "wrote " << traces.size() << " bus traces of " << traces.front().timestamps.size()
            << " minutes to " << out_dir.string() << '\n';
}

void cmd_train(const RunConfig& cfg) {
  const auto ws = load_workspace(cfg);
  const auto run = run_training(cfg, ws);
  const fs::path dir = fs::path(cfg.run_dir) / "train";
  std::vector<std::string> outputs;
  {
    auto out = open_output(dir / "model.json");
    write_model(out, run.result.params, run.metadata);
    outputs.push_back((dir / "model.json").string());
  }
  {
    auto out = open_output(dir / "training_trace.csv");
    write_trace_csv(out, run.result.trace);
    outputs.push_back((dir / "training_trace.csv").string());
  }
  {
    auto out = open_output(dir / "scenarios.jsonl");
    write_scenarios(out, run.data.set);
    outputs.push_back((dir / "scenarios.jsonl").string());
  }
  if (cfg.dump_duals) {
    auto out = open_output(dir / "dual_trajectory.csv");
    write_dual_trajectory_csv(out, run.result.trace);
    outputs.push_back((dir / "dual_trajectory.csv").string());
  }
  update_manifest(cfg, "train", outputs);
  const auto& last = run.result.trace.epochs.back();
  std::printf("trained %zu epochs on %zu scenarios (noise std %g)\n", cfg.epochs, run.data.set.size(),
              run.data.noise_std);
  std::printf("final epoch: avg loss %.6g, avg max g %.6g, violations %zu, lambda max %.6g\n", last.avg_loss,
              last.avg_max_g, last.violations, last.lambda_max);
}

void write_reports(const fs::path& dir, const std::vector<EvalReport>& reports, std::vector<std::string>& outputs) {
  {
    auto out = open_output(dir / "report.csv");
    for (std::size_t i = 0; i < reports.size(); ++i) write_report_csv(out, reports[i], i == 0);
    outputs.push_back((dir / "report.csv").string());
  }
  {
    auto arr = nlohmann::json::array();
    for (const auto& r : reports) arr.push_back(report_to_json(r));
    write_text(dir / "reports.json", arr.dump(1) + "\n");
    outputs.push_back((dir / "reports.json").string());
  }
  {
    auto out = open_output(dir / "comparison.csv");
    write_comparison_csv(out, compare(reports));
    outputs.push_back((dir / "comparison.csv").string());
  }
}

void print_table(const ComparisonTable& table) {
  std::printf("%-18s %12s %10s %10s %12s %10s %8s\n", "method", "avg_loss", "gap", "viol_ts", "viol_energy",
              "residual", "bytes/t");
  for (const auto& r : table.rows) {
    std::printf("%-18s %12.6g %+10.4f %10zu %12.6g %10.3g %8zu\n", r.method.c_str(), r.average_loss,
                r.gap_vs_optimal, r.violating_timesteps, r.violation_energy, r.constraint_residual,
                r.comm_bytes_per_timestep);
  }
}

void cmd_evaluate(const RunConfig& cfg, const std::string& model_opt) {
  const auto ws = load_workspace(cfg);
  const fs::path model_path = model_opt.empty() ? fs::path(cfg.run_dir) / "train" / "model.json" : fs::path(model_opt);
  std::ifstream in(model_path);
  if (!in) throw ContractError("cannot read model " + model_path.string());
  const auto arch = policy_arch(ws);
  const auto model = read_model(in, &arch);
  const auto reports = run_evaluation(cfg, ws, model.params);
  std::vector<std::string> outputs;
  write_reports(fs::path(cfg.run_dir) / "eval", reports, outputs);
  update_manifest(cfg, "evaluate", outputs);
  std::printf("test window: hour %d, %zu timesteps\n", cfg.effective_test_hour(), reports.front().records.size());
  print_table(compare(reports));
}

void cmd_compare(const std::vector<std::string>& inputs, const std::string& out_path) {
  std::vector<EvalReport> reports;
  for (const auto& path : inputs) {
    std::ifstream in(path);
    if (!in) throw ContractError("cannot read " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ContractError(path + ": " + e.what());
    }
    if (j.is_array()) {
      for (const auto& r : j) reports.push_back(report_from_json(r));
    } else {
      reports.push_back(report_from_json(j));
    }
  }
  const auto table = compare(reports);
  if (out_path.empty()) {
    write_comparison_csv(std::cout, table);
  } else {
    auto out = open_output(out_path);
    write_comparison_csv(out, table);
    print_table(table);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-tier neural volt/var control: data generation, primal-dual training and evaluation"};
  app.set_version_flag("--version", kVersion);
  app.set_config("--config", "", "Read options from a key = value file with [section] headers");
  app.require_subcommand(1);
  app.fallthrough();

  RunConfig cfg;
  std::string telemetry_text = "2,3,7";
  app.add_option("--run-dir", cfg.run_dir, "Directory receiving all outputs and the manifest")->capture_default_str();
  app.add_option("--feeder-dir", cfg.feeder_dir,
                 "Directory with lines.csv, inverters.csv, solar_buses.csv (default: bundled 13-bus fixture)");
  app.add_option("--traces", cfg.traces, "Trace CSV (default: <run-dir>/data/traces.csv)");
  app.add_option("--telemetry", telemetry_text, "Comma-separated telemetry buses")->capture_default_str();
  app.add_option("--scale", cfg.scale, "Multiplier applied to traces at ingest")->capture_default_str();
  app.add_option("--pf-lo", cfg.pf_lo, "Lowest sampled load power factor")->capture_default_str();
  app.add_option("--pf-hi", cfg.pf_hi, "Highest sampled load power factor")->capture_default_str();
  app.add_option("--v-lo", cfg.v_lo, "Lower voltage limit, pu")->capture_default_str();
  app.add_option("--v-hi", cfg.v_hi, "Upper voltage limit, pu")->capture_default_str();
  app.add_option("--train-hour", cfg.train_hour, "Hour whose minutes form the training window")->capture_default_str();
  app.add_option("--test-hour", cfg.test_hour, "Test window hour (default: train hour + 1)");
  app.add_option("--window-minutes", cfg.window_minutes, "Control period length")->capture_default_str();
  app.add_option("--seed", cfg.seed, "Run seed; stage seeds are derived from it")->capture_default_str();

  auto* gen = app.add_subcommand("gen-data", "Write synthetic traces and the bundled feeder files");
  std::string out_dir;
  gen->add_option("--out-dir", out_dir, "Output directory (default: <run-dir>/data)");
  gen->add_option("--days", cfg.days, "Number of days to synthesize")->capture_default_str();

  auto* tr = app.add_subcommand("train", "Train the two-tier policy on one control period");
  tr->add_option("--epochs", cfg.epochs, "Passes over the scenario set")->capture_default_str();
  tr->add_option("--learning-rate", cfg.learning_rate, "Adam step size")->capture_default_str();
  tr->add_option("--dual-step", cfg.dual_step, "Initial multiplier step")->capture_default_str();
  tr->add_option("--dual-decay", cfg.dual_decay, "Multiplier step decays as 1/(k+1)^decay")->capture_default_str();
  tr->add_option("--batch-size", cfg.batch_size, "Scenarios per primal-dual update")->capture_default_str();
  tr->add_option("--replication", cfg.replication_factor, "Copies per measured scenario")->capture_default_str();
  tr->add_option("--noise-std", cfg.noise_std, "Augmentation noise, pu (negative: pick by solar share)")
      ->capture_default_str();
  tr->add_option("--noise-low", cfg.noise_low, "Noise for low-solar windows")->capture_default_str();
  tr->add_option("--noise-high", cfg.noise_high, "Noise for high-solar windows")->capture_default_str();
  tr->add_flag("!--no-standardize", cfg.standardize_inputs, "Feed raw inputs to the network");
  tr->add_flag("--dump-duals", cfg.dump_duals, "Write the multiplier after every update");

  auto* ev = app.add_subcommand("evaluate", "Run the trained policy and the baselines on the test window");
  std::string model_path;
  ev->add_option("--model", model_path, "Model file (default: <run-dir>/train/model.json)");

  auto* cmp = app.add_subcommand("compare", "Tabulate reports.json files side by side");
  std::vector<std::string> report_paths;
  std::string compare_out;
  cmp->add_option("reports", report_paths, "Report JSON files")->required()->check(CLI::ExistingFile);
  cmp->add_option("--out", compare_out, "Comparison CSV (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    cfg.telemetry.clear();
    for (const auto& tok : csv::split(telemetry_text)) {
      cfg.telemetry.push_back(static_cast<BusId>(std::stoul(csv::trim(tok))));
    }
    if (gen->parsed()) cmd_gen_data(cfg, out_dir);
    if (tr->parsed()) cmd_train(cfg);
    if (ev->parsed()) cmd_evaluate(cfg, model_path);
    if (cmp->parsed()) cmd_compare(report_paths, compare_out);
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
