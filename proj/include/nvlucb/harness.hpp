#pragma once

// Experiment runner: (agent × seed) cells over one environment spec, with
// per-round CSV logs, a JSON summary and SVG plots.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"

#include "nvlucb/agents.hpp"
#include "nvlucb/config.hpp"
#include "nvlucb/envs.hpp"
#include "nvlucb/metrics.hpp"
#include "nvlucb/plots.hpp"

namespace nvlucb {

inline constexpr const char* kCsvHeader =
    "t,arm,reward,regret,cum_regret,mean_est,ucb_width,sigma_hat_sq,sigma_bar_sq,select_us,train_us";

struct HoldoutCheckpoint {
  std::size_t t;
  double calibration_error;
};

struct RunSummary {
  std::string agent;
  std::string policy;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  std::string csv_path;
  double final_regret = 0.0;
  double calibration_error = 0.0;
  double sharpness = 0.0;
  double mean_select_ms = 0.0;  // per round
  double mean_train_ms = 0.0;   // per training phase
  std::vector<HoldoutCheckpoint> holdout;
  std::vector<std::pair<double, double>> reliability;
  // In-memory only; not part of summary.json.
  std::vector<double> cumulative_regret;
  std::shared_ptr<const MetricsAccumulator> metrics;
};

struct RunOptions {
  std::optional<std::string> output_dir;  // overrides the config; empty string = no files
  std::optional<std::size_t> threads;
  bool write_files = true;
};

/// Shared, immutable inputs of one experiment (dataset tables are loaded once).
class EnvFactory {
 public:
  explicit EnvFactory(const ExperimentConfig& cfg) : cfg_(cfg) {
    const auto& e = cfg.env;
    if (e.kind == "csv") {
      LabelColumn col = std::string(e.label_column);
      if (const auto idx = detail::parse_number(e.label_column); idx && *idx == std::floor(*idx))
        col = static_cast<long>(*idx);
      table_ = std::make_shared<DatasetTable>(load_csv_dataset(e.path, col));
    } else if (e.kind == "idx") {
      table_ = std::make_shared<DatasetTable>(load_idx_dataset(e.images, e.labels));
    } else if (e.kind == "blobs") {
      table_ = std::make_shared<DatasetTable>(
          make_blob_dataset(e.blob_samples, e.blob_dim, e.arms, e.blob_spread, 0xb10b5));
    } else if (e.kind != "synthetic") {
      throw ConfigError("unknown env kind '" + e.kind + "'");
    }
  }

  explicit EnvFactory(const ExperimentConfig& cfg, std::shared_ptr<const DatasetTable> table)
      : cfg_(cfg), table_(std::move(table)) {}

  std::unique_ptr<Environment> make(std::uint64_t seed, std::size_t horizon) const {
    const auto& e = cfg_.env;
    if (!table_) {
      SyntheticEnvConfig sc;
      sc.d = e.d;
      sc.arms = e.arms;
      sc.h = e.h;
      sc.noise = e.noise;
      sc.horizon = horizon;
      sc.reward_range = cfg_.reward_range;
      sc.oracle_slack = e.oracle_slack;
      sc.normalize = e.normalize;
      return std::make_unique<SyntheticEnv>(sc, seed);
    }
    DatasetEnvConfig dc;
    dc.horizon = horizon;
    dc.dynamic_range = e.dynamic_range;
    dc.normalize = e.normalize;
    return std::make_unique<DatasetEnv>(table_, dc, seed);
  }

  std::shared_ptr<const DatasetTable> table() const { return table_; }

 private:
  const ExperimentConfig& cfg_;
  std::shared_ptr<const DatasetTable> table_;
};

inline AgentConfig make_agent_config(const ExperimentConfig& cfg, const AgentSpec& spec,
                                     const Environment& env) {
  AgentConfig ac;
  ac.policy = spec.policy;
  ac.variance = spec.variance;
  ac.input_dim = env.context_dim();
  ac.hidden_width = cfg.hidden_width;
  ac.depth = cfg.depth;
  ac.feature_dim = cfg.feature_dim;
  ac.lambda = cfg.lambda;
  ac.R = cfg.R;
  ac.reward_range = cfg.reward_range;
  ac.train_period = cfg.train_period;
  ac.warmup = cfg.warmup;
  ac.train.iters = cfg.train_iters;
  ac.train.learning_rate = cfg.learning_rate;
  ac.train.weight_decay = cfg.weight_decay;
  ac.train.batch_size = cfg.batch_size;
  ac.train.loss = spec.loss;
  auto& ex = ac.exploration;
  ex.kind = spec.exploration.value_or(cfg.exploration);
  ex.alpha = spec.alpha.value_or(cfg.alpha);
  ex.R = cfg.R;
  ex.M = cfg.theory_M;
  ex.delta = cfg.theory_delta;
  ex.H = cfg.train_period;
  ex.K = env.arms();
  ex.lambda = cfg.lambda;
  ex.d = ac.head_dim();
  return ac;
}

/// Agent RNG stream for a seed; shared by every policy so that runs with the
/// same seed start from the same θ₀ and network.
inline std::uint64_t agent_seed(std::uint64_t seed) { return seed * 0x9e3779b97f4a7c15ull + 1; }

inline StepFeedback feedback_for(const AgentConfig& ac, const RoundObservation& obs) {
  StepFeedback fb;
  fb.reward_range = obs.reward_range;
  if (!ac.gradient_explorer()) {
    const VarianceMode v = ac.effective_variance();
    if (v == VarianceMode::oracle_bound) fb.oracle_variance = obs.oracle_var_bound;
    if (v == VarianceMode::oracle_true_var) fb.oracle_variance = obs.oracle_true_var;
  }
  return fb;
}

namespace harness_detail {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

inline std::string cell_stem(const std::string& agent, std::uint64_t seed) {
  return agent + "_seed" + std::to_string(seed);
}

}  // namespace harness_detail

/// One (agent, seed) cell: fresh environment and agent, `horizon` rounds.
inline RunSummary run_cell(const ExperimentConfig& cfg, const EnvFactory& factory,
                           const AgentSpec& spec, std::uint64_t seed, std::size_t horizon,
                           const std::string& out_dir) {
  using harness_detail::fmt;
  using harness_detail::fmt_opt;
  RunSummary sum;
  sum.agent = spec.name;
  sum.policy = std::string(to_string(spec.policy));
  sum.seed = seed;
  try {
    auto env = factory.make(seed, horizon);
    Agent agent(make_agent_config(cfg, spec, *env), agent_seed(seed));
    const CalibrationConfig cal{cfg.thresholds};
    cal.validate();

    std::vector<HoldoutPoint> holdout;
    if (!cfg.checkpoints.empty()) holdout = env->holdout(cfg.holdout_size, seed ^ 0x5eedull);
    auto checkpoint = [&](std::size_t t) {
      if (std::find(cfg.checkpoints.begin(), cfg.checkpoints.end(), t) != cfg.checkpoints.end())
        sum.holdout.push_back({t, calibration_error_holdout(agent, holdout, cal)});
    };

    std::ofstream csv;
    if (!out_dir.empty()) {
      sum.csv_path = harness_detail::cell_stem(spec.name, seed) + ".csv";
      csv.open(std::filesystem::path(out_dir) / sum.csv_path);
      if (!csv) throw std::runtime_error("cannot write " + sum.csv_path);
      csv << kCsvHeader << "\n";
    }

    auto metrics = std::make_shared<MetricsAccumulator>();
    checkpoint(0);
    for (std::size_t t = 1; t <= horizon; ++t) {
      const RoundObservation& obs = env->sample_contexts(t);
      const StepFeedback fb = feedback_for(agent.config(), obs);
      const RoundRecord rec =
          agent.step(obs.contexts, [&](std::size_t arm) { return env->reward_value(arm); }, fb);
      const double regret = metrics->record_round(rec, obs);
      if (csv.is_open()) {
        csv << rec.t << ',' << rec.arm << ',' << fmt(rec.reward) << ',' << fmt(regret) << ','
            << fmt(metrics->total_regret()) << ',' << fmt(rec.mean_est) << ',' << fmt(rec.ucb_width)
            << ',' << fmt_opt(rec.sigma_hat_sq) << ',' << fmt_opt(rec.sigma_bar_sq) << ','
            << fmt(rec.select_us) << ',' << fmt(rec.train_us) << '\n';
      }
      checkpoint(t);
    }
    if (csv.is_open()) {
      csv.flush();
      if (!csv) throw std::runtime_error("write failed for " + sum.csv_path);
    }

    sum.final_regret = metrics->total_regret();
    sum.calibration_error = metrics->calibration(cal);
    sum.sharpness = metrics->sharpness();
    sum.reliability = reliability_bins(metrics->pit_values(), cal);
    sum.mean_select_ms = metrics->total_select_us() / 1000.0 / static_cast<double>(horizon);
    sum.mean_train_ms = metrics->train_events()
                            ? metrics->total_train_us() / 1000.0 / static_cast<double>(metrics->train_events())
                            : 0.0;
    sum.cumulative_regret = metrics->cumulative_regret();
    sum.metrics = std::move(metrics);
  } catch (const std::exception& ex) {
    sum.failed = true;
    sum.error = ex.what();
  }
  return sum;
}

inline nlohmann::json summary_to_json(const RunSummary& s) {
  nlohmann::json j;
  j["agent"] = s.agent;
  j["policy"] = s.policy;
  j["seed"] = s.seed;
  j["failed"] = s.failed;
  if (s.failed) j["error"] = s.error;
  j["csv"] = s.csv_path;
  j["final_regret"] = s.final_regret;
  j["calibration_error"] = s.calibration_error;
  j["sharpness"] = s.sharpness;
  j["mean_select_ms"] = s.mean_select_ms;
  j["mean_train_ms"] = s.mean_train_ms;
  j["holdout_calibration"] = nlohmann::json::array();
  for (const auto& h : s.holdout)
    j["holdout_calibration"].push_back({{"t", h.t}, {"calibration_error", h.calibration_error}});
  j["reliability"] = nlohmann::json::array();
  for (const auto& [p, q] : s.reliability) j["reliability"].push_back({p, q});
  return j;
}

/// Reads summary.json and each cell's cum_regret column back from `dir`.
inline std::vector<RunSummary> load_summaries(const std::string& dir) {
  const auto path = std::filesystem::path(dir) / "summary.json";
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const nlohmann::json doc = nlohmann::json::parse(in);
  std::vector<RunSummary> out;
  for (const auto& j : doc.at("cells")) {
    RunSummary s;
    s.agent = j.at("agent").get<std::string>();
    s.policy = j.at("policy").get<std::string>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.failed = j.at("failed").get<bool>();
    s.csv_path = j.value("csv", std::string());
    s.final_regret = j.at("final_regret").get<double>();
    s.calibration_error = j.at("calibration_error").get<double>();
    s.sharpness = j.at("sharpness").get<double>();
    s.mean_select_ms = j.at("mean_select_ms").get<double>();
    s.mean_train_ms = j.at("mean_train_ms").get<double>();
    for (const auto& h : j.at("holdout_calibration"))
      s.holdout.push_back({h.at("t").get<std::size_t>(), h.at("calibration_error").get<double>()});
    for (const auto& b : j.at("reliability"))
      s.reliability.emplace_back(b.at(0).get<double>(), b.at(1).get<double>());
    if (!s.failed && !s.csv_path.empty()) {
      std::ifstream csv(std::filesystem::path(dir) / s.csv_path);
      if (!csv) throw std::runtime_error("cannot open " + s.csv_path);
      std::string line;
      std::getline(csv, line);
      while (std::getline(csv, line)) {
        std::size_t pos = 0;
        for (int col = 0; col < 4; ++col) pos = line.find(',', pos) + 1;
        s.cumulative_regret.push_back(std::stod(line.substr(pos, line.find(',', pos) - pos)));
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

/// regret.svg plus one reliability_<agent>.svg per agent. Returns the files written.
inline std::vector<std::string> emit_plots(const std::vector<RunSummary>& summaries,
                                           const std::string& out_dir) {
  if (summaries.empty()) throw std::invalid_argument("emit_plots: no summaries");
  std::vector<RegretSeries> regret;
  std::vector<ReliabilitySeries> reliability;
  std::map<std::string, std::size_t> index;
  for (const auto& s : summaries) {
    if (s.failed) continue;
    auto [it, fresh] = index.emplace(s.agent, regret.size());
    if (fresh) {
      regret.push_back({s.agent, {}});
      reliability.push_back({s.agent, {}});
    }
    regret[it->second].per_seed.push_back(s.cumulative_regret);
    // Reliability diagram per agent: average coverage across seeds.
    auto& bins = reliability[it->second].bins;
    if (bins.empty()) {
      bins = s.reliability;
    } else {
      for (std::size_t j = 0; j < bins.size() && j < s.reliability.size(); ++j)
        bins[j].second += s.reliability[j].second;
    }
  }
  if (regret.empty()) throw std::invalid_argument("emit_plots: every cell failed");
  for (std::size_t i = 0; i < reliability.size(); ++i) {
    const double n = static_cast<double>(regret[i].per_seed.size());
    for (auto& b : reliability[i].bins) b.second /= n;
  }

  std::filesystem::create_directories(out_dir);
  std::vector<std::string> written;
  auto write = [&](const std::string& name, const std::string& body) {
    const auto p = std::filesystem::path(out_dir) / name;
    std::ofstream f(p);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f << body;
    written.push_back(p.string());
  };
  write("regret.svg", regret_svg(regret));
  for (const auto& r : reliability)
    write("reliability_" + r.agent + ".svg", reliability_svg({r}, "Reliability diagram: " + r.agent));
  return written;
}

/// Runs every (agent, seed) cell. Cells are independent and may run on
/// several threads; results come back in (agent, seed) order either way.
inline std::vector<RunSummary> run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {}) {
  const std::string out_dir = opts.write_files ? opts.output_dir.value_or(cfg.output_dir) : std::string();
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
  const EnvFactory factory(cfg);

  struct Cell {
    const AgentSpec* spec;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (const auto& a : cfg.agents)
    for (auto s : cfg.seeds) cells.push_back({&a, s});

  std::vector<RunSummary> results(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++)
      results[i] = run_cell(cfg, factory, *cells[i].spec, cells[i].seed, cfg.horizon, out_dir);
  };
  const std::size_t threads = std::clamp<std::size_t>(opts.threads.value_or(cfg.threads), 1, cells.size());
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
  }

  if (!out_dir.empty()) {
    nlohmann::json doc;
    doc["config"] = serialize_config(cfg);
    doc["cells"] = nlohmann::json::array();
    for (const auto& r : results) doc["cells"].push_back(summary_to_json(r));
    std::ofstream f(std::filesystem::path(out_dir) / "summary.json");
    f << doc.dump(2) << "\n";
  }
  return results;
}

struct BenchResult {
  std::string agent;
  std::size_t rounds = 0;
  double select_seconds = 0.0;  // total over the run
  double train_seconds = 0.0;
  std::size_t train_events = 0;
};

/// Latency-only mode: one seed per agent, no files; wall time split into arm
/// selection and network training.
inline std::vector<BenchResult> run_bench(const ExperimentConfig& cfg) {
  const EnvFactory factory(cfg);
  std::vector<BenchResult> out;
  const std::uint64_t seed = cfg.seeds.front();
  for (const auto& spec : cfg.agents) {
    RunSummary s = run_cell(cfg, factory, spec, seed, cfg.horizon, "");
    if (s.failed) throw std::runtime_error("bench: agent " + spec.name + " failed: " + s.error);
    BenchResult b;
    b.agent = spec.name;
    b.rounds = cfg.horizon;
    b.select_seconds = s.metrics->total_select_us() / 1e6;
    b.train_seconds = s.metrics->total_train_us() / 1e6;
    b.train_events = s.metrics->train_events();
    out.push_back(b);
  }
  return out;
}

}  // namespace nvlucb
