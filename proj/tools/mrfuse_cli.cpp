// Copyright 2026 The mrfuse Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// mrfuse: run fusion experiments from a JSON config or a built-in preset.
//
//   mrfuse run configs/frame_500_50.json --seed 3
//   mrfuse run truss_fused --threads 2 --out-dir out/
//   mrfuse validate configs/beam_input_estimation.json
//   mrfuse list-presets
//   mrfuse show-preset frame_500_30 > my.json

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "mrfuse/config.hpp"
#include "mrfuse/experiment.hpp"

namespace {

namespace fs = std::filesystem;
using namespace mrfuse;

bool is_preset(const std::string& name) {
  for (const auto& p : preset_names())
    if (p == name) return true;
  return false;
}

ExperimentConfig load(const std::string& source) {
  if (!fs::exists(source) && is_preset(source)) return preset_config(source);
  return load_config_file(source);
}

fs::path default_out_dir() {
  if (const char* env = std::getenv("MRFUSE_OUT_DIR"); env && *env) return env;
  return "out";
}

int cmd_run(const std::string& source, const std::vector<std::uint64_t>& seed_override,
            fs::path out_dir, int threads) {
  const ExperimentConfig cfg = load(source);
  const std::vector<std::uint64_t> seeds = seed_override.empty() ? cfg.seeds : seed_override;
  if (seeds.empty()) {
    std::cerr << "error: no seeds given and config lists none\n";
    return 2;
  }
  const fs::path root = out_dir / cfg.name;
  const auto outcomes = run_seeds(cfg, seeds, threads, [&](const SeedOutcome& o) {
    if (!o.error.empty()) {
      std::cerr << cfg.name << " seed " << o.seed << ": " << o.error << "\n";
      return;
    }
    const fs::path dir = root / ("seed_" + std::to_string(o.seed));
    write_run_outputs(*o.run, dir);
    std::cout << cfg.name << " seed " << o.seed << " done in " << o.run->report.wall_seconds
              << " s -> " << dir.string() << "\n";
  });

  std::vector<ExperimentReport> reports;
  for (const auto& o : outcomes)
    if (o.run) reports.push_back(o.run->report);
  if (reports.size() > 1) {
    std::ofstream table(root / "seeds.csv");
    write_seed_table(table, reports);
  }
  if (reports.size() == 1) write_summary(std::cout, reports.front());
  return reports.size() == outcomes.size() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-rate structural response fusion experiments"};
  app.require_subcommand(1);

  std::string source;
  std::vector<std::uint64_t> seeds;
  std::string out_dir;
  int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

  auto* run = app.add_subcommand("run", "Run an experiment for one or more seeds");
  run->add_option("config", source, "Config file or preset name")->required();
  run->add_option("--seed", seeds, "Seed(s) to run; defaults to the config's list");
  run->add_option("--out-dir", out_dir, "Output root (default: $MRFUSE_OUT_DIR or ./out)");
  run->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

  auto* validate = app.add_subcommand("validate", "Check a config without running it");
  validate->add_option("config", source, "Config file or preset name")->required();

  app.add_subcommand("list-presets", "List built-in presets");

  std::string preset;
  auto* show = app.add_subcommand("show-preset", "Print a preset as JSON");
  show->add_option("name", preset, "Preset name")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(source, seeds, out_dir.empty() ? default_out_dir() : fs::path(out_dir), threads);
    if (*validate) {
      validate_experiment(load(source));
      std::cout << "ok\n";
      return 0;
    }
    if (app.got_subcommand("list-presets")) {
      for (const auto& p : preset_names()) std::cout << p << "\n";
      return 0;
    }
    if (*show) {
      std::cout << preset_json(preset).dump(2) << "\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
