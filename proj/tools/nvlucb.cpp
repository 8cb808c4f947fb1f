// Batch front end: run / plot / bench.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nvlucb/nvlucb.hpp"

namespace {

struct Overrides {
  std::vector<std::uint64_t> seeds;
  std::string out;
  bool quick = false;
  std::size_t threads = 0;
};

nvlucb::ExperimentConfig load(const std::string& path, const Overrides& o) {
  auto cfg = nvlucb::load_config(path);
  if (!o.seeds.empty()) cfg.seeds = o.seeds;
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (o.threads > 0) cfg.threads = o.threads;
  if (o.quick) cfg.horizon = std::max<std::size_t>(1, cfg.horizon / 2);
  return cfg;
}

int cmd_run(const std::string& path, const Overrides& o) {
  const auto cfg = load(path, o);
  const auto results = nvlucb::run_experiment(cfg);
  int failed = 0;
  std::printf("%-24s %6s %14s %12s %10s %12s %12s\n", "agent", "seed", "regret", "calibration",
              "sharpness", "select_ms", "train_ms");
  for (const auto& r : results) {
    if (r.failed) {
      ++failed;
      std::printf("%-24s %6llu FAILED: %s\n", r.agent.c_str(), static_cast<unsigned long long>(r.seed),
                  r.error.c_str());
      continue;
    }
    std::printf("%-24s %6llu %14.3f %12.5f %10.5f %12.4f %12.3f\n", r.agent.c_str(),
                static_cast<unsigned long long>(r.seed), r.final_regret, r.calibration_error,
                r.sharpness, r.mean_select_ms, r.mean_train_ms);
  }
  std::printf("wrote %s/summary.json\n", cfg.output_dir.c_str());
  return failed == 0 ? 0 : 2;
}

int cmd_plot(const std::string& dir, const Overrides& o) {
  const auto summaries = nvlucb::load_summaries(dir);
  for (const auto& f : nvlucb::emit_plots(summaries, o.out.empty() ? dir : o.out))
    std::printf("wrote %s\n", f.c_str());
  return 0;
}

int cmd_bench(const std::string& path, const Overrides& o) {
  const auto cfg = load(path, o);
  std::printf("%-24s %8s %16s %16s %10s\n", "agent", "rounds", "select_s/100", "train_s/100", "trainings");
  for (const auto& b : nvlucb::run_bench(cfg)) {
    const double per100 = 100.0 / static_cast<double>(b.rounds);
    std::printf("%-24s %8zu %16.5f %16.5f %10zu\n", b.agent.c_str(), b.rounds,
                b.select_seconds * per100, b.train_seconds * per100, b.train_events);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural variance-aware linear UCB experiment runner"};
  app.require_subcommand(1);
  app.fallthrough();
  Overrides o;
  app.add_option("--seeds", o.seeds, "Seed list overriding the config");
  app.add_option("--out", o.out, "Output directory");
  app.add_flag("--quick", o.quick, "Halve the horizon for smoke runs");
  app.add_option("--threads", o.threads, "Worker threads across (agent, seed) cells");

  std::string target;
  auto* run = app.add_subcommand("run", "Run every (agent, seed) cell of a config");
  run->add_option("config", target, "Config file")->required();
  auto* plot = app.add_subcommand("plot", "Render SVG plots from a run directory");
  plot->add_option("summary-dir", target, "Directory holding summary.json")->required();
  auto* bench = app.add_subcommand("bench", "Latency-only run: selection vs training time");
  bench->add_option("config", target, "Config file")->required();
  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(target, o);
    if (*plot) return cmd_plot(target, o);
    return cmd_bench(target, o);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
}
