#pragma once

// Experiment configuration: a flat `key = value` format with an [env]
// section and one [agent NAME] section per policy under test.
//
//   horizon = 2000
//   seeds = 0,1,2,3,4
//   reward_a = 0
//   reward_b = 2
//
//   [env]
//   kind = synthetic
//   h = h1
//
//   [agent ours]
//   policy = neural_var_linucb
//   variance = estimated_bound

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "nvlucb/agents.hpp"
#include "nvlucb/envs.hpp"
#include "nvlucb/neural.hpp"

namespace nvlucb {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EnvSpec {
  std::string kind = "synthetic";  // synthetic | csv | idx | blobs
  RewardFn h = RewardFn::h1;
  std::size_t d = 20;
  std::size_t arms = 4;
  NoiseModel noise{};
  double oracle_slack = 1.0;
  bool normalize = false;
  std::string path;                 // csv
  std::string label_column = "-1";  // csv: index or header name
  std::string images;               // idx
  std::string labels;               // idx
  bool dynamic_range = false;       // csv / idx / blobs
  std::size_t blob_samples = 2000;  // blobs
  std::size_t blob_dim = 64;
  double blob_spread = 1.0;
  bool operator==(const EnvSpec&) const = default;
};

struct AgentSpec {
  std::string name;
  PolicyKind policy = PolicyKind::neural_var_linucb;
  VarianceMode variance = VarianceMode::estimated_bound;
  LossKind loss = LossKind::mse;
  std::optional<double> alpha;
  std::optional<ExplorationSchedule::Kind> exploration;
  bool operator==(const AgentSpec&) const = default;
};

struct ExperimentConfig {
  std::size_t horizon = 10000;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  double lambda = 1.0;
  double alpha = 0.02;
  ExplorationSchedule::Kind exploration = ExplorationSchedule::Kind::constant;
  double theory_M = 0.1;
  double theory_delta = 0.1;
  std::size_t train_period = 100;  // H
  std::size_t train_iters = 1000;  // n
  double learning_rate = 1e-2;
  double weight_decay = 0.0;
  std::size_t batch_size = 64;
  std::size_t hidden_width = 100;  // m
  std::size_t depth = 2;           // L
  std::size_t feature_dim = 20;    // m_L
  RewardRange reward_range{0.0, 1.0};
  double R = 1.0;
  std::size_t warmup = 2000;
  std::vector<std::size_t> checkpoints;
  std::size_t holdout_size = 500;
  std::vector<double> thresholds{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::string output_dir = "out";
  std::size_t threads = 1;
  EnvSpec env{};
  std::vector<AgentSpec> agents;
  bool operator==(const ExperimentConfig&) const = default;
};

namespace config_detail {

inline std::string trim(std::string_view s) { return detail::trim(s); }

[[noreturn]] inline void fail(std::size_t line, const std::string& msg) {
  throw ConfigError("config line " + std::to_string(line) + ": " + msg);
}

template <class T>
T parse_unsigned(const std::string& v, std::size_t line, const std::string& key) {
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    fail(line, "key '" + key + "' expects a non-negative integer, got '" + v + "'");
  return out;
}

inline double parse_double(const std::string& v, std::size_t line, const std::string& key) {
  const auto d = detail::parse_number(v);
  if (!d) fail(line, "key '" + key + "' expects a number, got '" + v + "'");
  return *d;
}

inline bool parse_bool(const std::string& v, std::size_t line, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(line, "key '" + key + "' expects true/false, got '" + v + "'");
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(v);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline ExplorationSchedule::Kind parse_exploration(const std::string& v, std::size_t line) {
  if (v == "constant") return ExplorationSchedule::Kind::constant;
  if (v == "theory") return ExplorationSchedule::Kind::theory;
  fail(line, "exploration must be 'constant' or 'theory', got '" + v + "'");
}

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string_view exploration_name(ExplorationSchedule::Kind k) {
  return k == ExplorationSchedule::Kind::theory ? "theory" : "constant";
}

}  // namespace config_detail

inline ExperimentConfig parse_config(std::string_view text) {
  using namespace config_detail;
  ExperimentConfig cfg;
  enum class Section { global, env, agent } section = Section::global;
  std::vector<bool> agent_has_policy;

  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') fail(lineno, "unterminated section header");
      const std::string inner = trim(std::string_view(line).substr(1, line.size() - 2));
      if (inner == "env") {
        section = Section::env;
      } else if (inner.rfind("agent", 0) == 0) {
        std::string name = trim(std::string_view(inner).substr(5));
        if (name.empty()) fail(lineno, "agent section needs a name: [agent NAME]");
        for (const auto& a : cfg.agents)
          if (a.name == name) fail(lineno, "duplicate agent name '" + name + "'");
        AgentSpec spec;
        spec.name = std::move(name);
        cfg.agents.push_back(std::move(spec));
        agent_has_policy.push_back(false);
        section = Section::agent;
      } else {
        fail(lineno, "unknown section '" + inner + "'");
      }
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(lineno, "expected 'key = value'");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string val = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) fail(lineno, "empty key");

    const auto u = [&](auto& dst) { dst = parse_unsigned<std::decay_t<decltype(dst)>>(val, lineno, key); };
    const auto f = [&](double& dst) { dst = parse_double(val, lineno, key); };
    const auto b = [&](bool& dst) { dst = parse_bool(val, lineno, key); };

    if (section == Section::global) {
      if (key == "horizon") u(cfg.horizon);
      else if (key == "seeds") {
        cfg.seeds.clear();
        for (const auto& s : split_list(val)) cfg.seeds.push_back(parse_unsigned<std::uint64_t>(s, lineno, key));
      }
      else if (key == "lambda") f(cfg.lambda);
      else if (key == "alpha") f(cfg.alpha);
      else if (key == "exploration") cfg.exploration = parse_exploration(val, lineno);
      else if (key == "theory_M") f(cfg.theory_M);
      else if (key == "theory_delta") f(cfg.theory_delta);
      else if (key == "H") u(cfg.train_period);
      else if (key == "n") u(cfg.train_iters);
      else if (key == "learning_rate") f(cfg.learning_rate);
      else if (key == "weight_decay") f(cfg.weight_decay);
      else if (key == "batch_size") u(cfg.batch_size);
      else if (key == "m") u(cfg.hidden_width);
      else if (key == "L") u(cfg.depth);
      else if (key == "d_out") u(cfg.feature_dim);
      else if (key == "reward_a") f(cfg.reward_range.a);
      else if (key == "reward_b") f(cfg.reward_range.b);
      else if (key == "R") f(cfg.R);
      else if (key == "warmup") u(cfg.warmup);
      else if (key == "checkpoints") {
        cfg.checkpoints.clear();
        for (const auto& s : split_list(val)) cfg.checkpoints.push_back(parse_unsigned<std::size_t>(s, lineno, key));
      }
      else if (key == "holdout_size") u(cfg.holdout_size);
      else if (key == "thresholds") {
        cfg.thresholds.clear();
        for (const auto& s : split_list(val)) cfg.thresholds.push_back(parse_double(s, lineno, key));
      }
      else if (key == "output_dir") cfg.output_dir = val;
      else if (key == "threads") u(cfg.threads);
      else fail(lineno, "unknown key '" + key + "'");
    } else if (section == Section::env) {
      auto& e = cfg.env;
      if (key == "kind") {
        if (val != "synthetic" && val != "csv" && val != "idx" && val != "blobs")
          fail(lineno, "env kind must be synthetic, csv, idx or blobs, got '" + val + "'");
        e.kind = val;
      }
      else if (key == "h") {
        const auto h = parse_reward_fn(val);
        if (!h) fail(lineno, "h must be h1, h2 or h3, got '" + val + "'");
        e.h = *h;
      }
      else if (key == "d") u(e.d);
      else if (key == "arms") u(e.arms);
      else if (key == "noise") {
        const auto k = parse_noise_kind(val);
        if (!k) fail(lineno, "unknown noise kind '" + val + "'");
        e.noise.kind = *k;
      }
      else if (key == "noise_std") f(e.noise.fixed_std);
      else if (key == "noise_start") f(e.noise.start);
      else if (key == "noise_end") f(e.noise.end);
      else if (key == "oracle_slack") f(e.oracle_slack);
      else if (key == "normalize") b(e.normalize);
      else if (key == "path") e.path = val;
      else if (key == "label_column") e.label_column = val;
      else if (key == "images") e.images = val;
      else if (key == "labels") e.labels = val;
      else if (key == "dynamic_range") b(e.dynamic_range);
      else if (key == "blob_samples") u(e.blob_samples);
      else if (key == "blob_dim") u(e.blob_dim);
      else if (key == "blob_spread") f(e.blob_spread);
      else fail(lineno, "unknown key '" + key + "' in [env]");
    } else {
      auto& a = cfg.agents.back();
      if (key == "policy") {
        const auto p = parse_policy(val);
        if (!p) fail(lineno, "unknown policy '" + val + "'");
        a.policy = *p;
        agent_has_policy.back() = true;
      }
      else if (key == "variance") {
        const auto v = parse_variance_mode(val);
        if (!v) fail(lineno, "unknown variance source '" + val + "'");
        a.variance = *v;
      }
      else if (key == "loss") {
        if (val == "mse") a.loss = LossKind::mse;
        else if (val == "mle") a.loss = LossKind::mle;
        else fail(lineno, "loss must be mse or mle, got '" + val + "'");
      }
      else if (key == "alpha") { double v; f(v); a.alpha = v; }
      else if (key == "exploration") a.exploration = parse_exploration(val, lineno);
      else fail(lineno, "unknown key '" + key + "' in [agent " + a.name + "]");
    }
  }

  for (std::size_t i = 0; i < cfg.agents.size(); ++i)
    if (!agent_has_policy[i])
      throw ConfigError("config: missing required key 'policy' in [agent " + cfg.agents[i].name + "]");
  if (cfg.agents.empty()) throw ConfigError("config: missing required [agent NAME] section");
  if (cfg.horizon < 1) throw ConfigError("config: horizon must be >= 1");
  if (cfg.seeds.empty()) throw ConfigError("config: seeds must be non-empty");
  if (cfg.env.kind == "csv" && cfg.env.path.empty())
    throw ConfigError("config: missing required key 'path' for csv env");
  if (cfg.env.kind == "idx" && (cfg.env.images.empty() || cfg.env.labels.empty()))
    throw ConfigError("config: missing required keys 'images'/'labels' for idx env");
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

inline std::string serialize_config(const ExperimentConfig& c) {
  using config_detail::fmt_double;
  std::ostringstream o;
  const auto list = [](const auto& xs, auto&& fmt) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + fmt(xs[i]);
    return s;
  };
  const auto num = [](auto v) { return std::to_string(v); };

  o << "horizon = " << c.horizon << "\n"
    << "seeds = " << list(c.seeds, num) << "\n"
    << "lambda = " << fmt_double(c.lambda) << "\n"
    << "alpha = " << fmt_double(c.alpha) << "\n"
    << "exploration = " << config_detail::exploration_name(c.exploration) << "\n"
    << "theory_M = " << fmt_double(c.theory_M) << "\n"
    << "theory_delta = " << fmt_double(c.theory_delta) << "\n"
    << "H = " << c.train_period << "\n"
    << "n = " << c.train_iters << "\n"
    << "learning_rate = " << fmt_double(c.learning_rate) << "\n"
    << "weight_decay = " << fmt_double(c.weight_decay) << "\n"
    << "batch_size = " << c.batch_size << "\n"
    << "m = " << c.hidden_width << "\n"
    << "L = " << c.depth << "\n"
    << "d_out = " << c.feature_dim << "\n"
    << "reward_a = " << fmt_double(c.reward_range.a) << "\n"
    << "reward_b = " << fmt_double(c.reward_range.b) << "\n"
    << "R = " << fmt_double(c.R) << "\n"
    << "warmup = " << c.warmup << "\n";
  if (!c.checkpoints.empty()) o << "checkpoints = " << list(c.checkpoints, num) << "\n";
  o << "holdout_size = " << c.holdout_size << "\n";
  if (!c.thresholds.empty())
    o << "thresholds = " << list(c.thresholds, [](double v) { return fmt_double(v); }) << "\n";
  o << "output_dir = " << c.output_dir << "\n"
    << "threads = " << c.threads << "\n\n";

  const auto& e = c.env;
  o << "[env]\n"
    << "kind = " << e.kind << "\n"
    << "h = " << to_string(e.h) << "\n"
    << "d = " << e.d << "\n"
    << "arms = " << e.arms << "\n"
    << "noise = " << to_string(e.noise.kind) << "\n"
    << "noise_std = " << fmt_double(e.noise.fixed_std) << "\n"
    << "noise_start = " << fmt_double(e.noise.start) << "\n"
    << "noise_end = " << fmt_double(e.noise.end) << "\n"
    << "oracle_slack = " << fmt_double(e.oracle_slack) << "\n"
    << "normalize = " << (e.normalize ? "true" : "false") << "\n";
  if (!e.path.empty()) o << "path = " << e.path << "\n";
  o << "label_column = " << e.label_column << "\n";
  if (!e.images.empty()) o << "images = " << e.images << "\n";
  if (!e.labels.empty()) o << "labels = " << e.labels << "\n";
  o << "dynamic_range = " << (e.dynamic_range ? "true" : "false") << "\n"
    << "blob_samples = " << e.blob_samples << "\n"
    << "blob_dim = " << e.blob_dim << "\n"
    << "blob_spread = " << fmt_double(e.blob_spread) << "\n";

  for (const auto& a : c.agents) {
    o << "\n[agent " << a.name << "]\n"
      << "policy = " << to_string(a.policy) << "\n"
      << "variance = " << to_string(a.variance) << "\n"
      << "loss = " << (a.loss == LossKind::mle ? "mle" : "mse") << "\n";
    if (a.alpha) o << "alpha = " << fmt_double(*a.alpha) << "\n";
    if (a.exploration) o << "exploration = " << config_detail::exploration_name(*a.exploration) << "\n";
  }
  return o.str();
}

}  // namespace nvlucb
