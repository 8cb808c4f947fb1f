#pragma once

// Reward-generating environments: the synthetic nonlinear rewards h1..h3 with
// their noise regimes, and the classification-to-bandit adapter (disjoint
// encoding, optional dynamic reward range). Also the CSV / IDX loaders.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "nvlucb/agents.hpp"
#include "nvlucb/linalg.hpp"
#include "nvlucb/rng.hpp"

namespace nvlucb {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class RewardFn { h1, h2, h3 };

inline std::string_view to_string(RewardFn h) {
  switch (h) {
    case RewardFn::h1: return "h1";
    case RewardFn::h2: return "h2";
    case RewardFn::h3: return "h3";
  }
  return "?";
}

inline std::optional<RewardFn> parse_reward_fn(std::string_view s) {
  if (s == "h1") return RewardFn::h1;
  if (s == "h2") return RewardFn::h2;
  if (s == "h3") return RewardFn::h3;
  return std::nullopt;
}

/// h1 = 10(xᵀθ)², h2 = xᵀθθᵀx = (θᵀx)², h3 = cos(3xᵀθ).
inline double h_value(RewardFn kind, std::span<const double> x, std::span<const double> theta) {
  const double s = dot(x, theta);
  switch (kind) {
    case RewardFn::h1: return 10.0 * s * s;
    case RewardFn::h2: return s * s;
    case RewardFn::h3: return std::cos(3.0 * s);
  }
  return 0.0;
}

struct NoiseModel {
  enum class Kind { random_variance, fixed_std, increasing, decreasing };
  Kind kind = Kind::random_variance;
  double fixed_std = 0.0;
  double start = 1.0;  // noise std at t = 1 (monotone kinds)
  double end = 10.0;   // noise std at t = T
  bool operator==(const NoiseModel&) const = default;

  /// Scheduled std for the monotone kinds, linear in t over [1, T].
  double scheduled_std(std::size_t t, std::size_t horizon) const {
    if (horizon <= 1) return start;
    const double frac = static_cast<double>(t - 1) / static_cast<double>(horizon - 1);
    return start + (end - start) * std::clamp(frac, 0.0, 1.0);
  }
};

inline std::string_view to_string(NoiseModel::Kind k) {
  switch (k) {
    case NoiseModel::Kind::random_variance: return "random_variance";
    case NoiseModel::Kind::fixed_std: return "fixed_std";
    case NoiseModel::Kind::increasing: return "increasing";
    case NoiseModel::Kind::decreasing: return "decreasing";
  }
  return "?";
}

inline std::optional<NoiseModel::Kind> parse_noise_kind(std::string_view s) {
  for (auto k : {NoiseModel::Kind::random_variance, NoiseModel::Kind::fixed_std,
                 NoiseModel::Kind::increasing, NoiseModel::Kind::decreasing})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

struct VarianceFeed {
  double bound;     // σ_t², the oracle variance bound
  double variance;  // Var(ξ_t)
};

/// Oracle feeds for round t. `drawn_variance` is this round's v_t for the
/// random-variance regime; the other regimes are deterministic in t.
inline VarianceFeed oracle_variance_bound(const NoiseModel& noise, std::size_t t,
                                          std::size_t horizon, double drawn_variance = 0.0,
                                          double slack = 1.0) {
  double var = 0.0;
  switch (noise.kind) {
    case NoiseModel::Kind::random_variance: var = drawn_variance; break;
    case NoiseModel::Kind::fixed_std: var = noise.fixed_std * noise.fixed_std; break;
    case NoiseModel::Kind::increasing:
    case NoiseModel::Kind::decreasing: {
      const double s = noise.scheduled_std(t, horizon);
      var = s * s;
      break;
    }
  }
  return {slack * var, var};
}

/// [x̃/(2‖x̃‖), ½, x̃/(2‖x̃‖), ½]: unit norm, first half equals second half.
inline Vector normalize_context(std::span<const double> raw) {
  const double n = std::sqrt(dot(raw, raw));
  if (!(n > 0.0)) throw ContractViolation("normalize_context: zero vector");
  Vector out;
  out.reserve(2 * raw.size() + 2);
  for (int copy = 0; copy < 2; ++copy) {
    for (double v : raw) out.push_back(v / (2.0 * n));
    out.push_back(0.5);
  }
  return out;
}

struct RoundObservation {
  std::vector<Vector> contexts;
  Vector expected_rewards;
  double oracle_var_bound = 0.0;
  double oracle_true_var = 0.0;
  RewardRange reward_range{};
};

struct HoldoutPoint {
  Vector context;
  double reward;
};

class Environment {
 public:
  virtual ~Environment() = default;
  virtual std::size_t arms() const = 0;
  virtual std::size_t context_dim() const = 0;
  virtual std::size_t horizon() const = 0;
  /// Advances to round t (1-based) and returns what the agent and metrics see.
  virtual const RoundObservation& sample_contexts(std::size_t t) = 0;
  /// Reward of `arm` at the current round.
  virtual double reward_value(std::size_t arm) = 0;
  virtual std::vector<HoldoutPoint> holdout(std::size_t n, std::uint64_t seed) const = 0;
};

struct SyntheticEnvConfig {
  std::size_t d = 20;
  std::size_t arms = 4;
  RewardFn h = RewardFn::h1;
  NoiseModel noise{};
  std::size_t horizon = 10000;
  RewardRange reward_range{0.0, 2.0};
  double oracle_slack = 1.0;
  bool normalize = false;
};

class SyntheticEnv final : public Environment {
 public:
  SyntheticEnv(SyntheticEnvConfig cfg, std::uint64_t seed)
      : cfg_(std::move(cfg)),
        context_rng_(make_rng(seed, 0x63747874)),
        noise_rng_(make_rng(seed, 0x6e6f6973)) {
    if (cfg_.d == 0 || cfg_.arms == 0) throw ContractViolation("SyntheticEnv: zero dimension");
    if (!(cfg_.oracle_slack >= 1.0)) throw ContractViolation("SyntheticEnv: oracle_slack must be >= 1");
    Rng theta_rng = make_rng(seed, 0x7468657461);
    hidden_theta_ = random_unit(cfg_.d, theta_rng);
  }

  std::size_t arms() const override { return cfg_.arms; }
  std::size_t context_dim() const override { return cfg_.normalize ? 2 * cfg_.d + 2 : cfg_.d; }
  std::size_t horizon() const override { return cfg_.horizon; }
  const Vector& hidden_theta() const noexcept { return hidden_theta_; }
  const std::vector<Vector>& raw_contexts() const noexcept { return raw_; }
  double current_noise() const noexcept { return xi_; }

  const RoundObservation& sample_contexts(std::size_t t) override {
    raw_.resize(cfg_.arms);
    obs_.contexts.resize(cfg_.arms);
    obs_.expected_rewards.resize(cfg_.arms);
    for (std::size_t k = 0; k < cfg_.arms; ++k) {
      raw_[k] = random_unit(cfg_.d, context_rng_);
      obs_.expected_rewards[k] = h_value(cfg_.h, raw_[k], hidden_theta_);
      obs_.contexts[k] = cfg_.normalize ? normalize_context(raw_[k]) : raw_[k];
    }
    // One variance draw and one unit normal per round, whatever the regime,
    // so every agent sees the same noise sequence.
    const double v = uniform01(noise_rng_);
    const double z = standard_normal(noise_rng_);
    const VarianceFeed feed = oracle_variance_bound(cfg_.noise, t, cfg_.horizon, v, cfg_.oracle_slack);
    xi_ = std::sqrt(feed.variance) * z;
    obs_.oracle_var_bound = feed.bound;
    obs_.oracle_true_var = feed.variance;
    obs_.reward_range = cfg_.reward_range;
    return obs_;
  }

  double reward_value(std::size_t arm) override {
    if (arm >= cfg_.arms) throw ContractViolation("reward_value: arm out of range");
    return obs_.expected_rewards[arm] + xi_;
  }

  std::vector<HoldoutPoint> holdout(std::size_t n, std::uint64_t seed) const override {
    Rng rng = make_rng(seed, 0x686f6c64);
    std::vector<HoldoutPoint> pts;
    pts.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      Vector x = random_unit(cfg_.d, rng);
      const double v = uniform01(rng);
      const double z = standard_normal(rng);
      const double var = oracle_variance_bound(cfg_.noise, cfg_.horizon, cfg_.horizon, v).variance;
      const double r = h_value(cfg_.h, x, hidden_theta_) + std::sqrt(var) * z;
      pts.push_back({cfg_.normalize ? normalize_context(x) : std::move(x), r});
    }
    return pts;
  }

  static Vector random_unit(std::size_t d, Rng& rng) {
    Vector x(d);
    double n2 = 0.0;
    do {
      n2 = 0.0;
      for (auto& v : x) {
        v = standard_normal(rng);
        n2 += v * v;
      }
    } while (!(n2 > 0.0));
    const double n = std::sqrt(n2);
    for (auto& v : x) v /= n;
    return x;
  }

 private:
  SyntheticEnvConfig cfg_;
  Rng context_rng_;
  Rng noise_rng_;
  Vector hidden_theta_;
  std::vector<Vector> raw_;
  RoundObservation obs_;
  double xi_ = 0.0;
};

/// Immutable labelled table; labels are 0..num_classes-1.
struct DatasetTable {
  std::vector<Vector> features;
  std::vector<std::size_t> labels;
  std::size_t num_classes = 0;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t feature_dim() const noexcept { return features.empty() ? 0 : features.front().size(); }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  std::size_t used = 0;
  try {
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

/// Map raw integer labels onto 0..K-1; the labels must cover a contiguous range.
inline std::size_t remap_labels(std::vector<long long>& raw, std::vector<std::size_t>& out) {
  if (raw.empty()) throw DataError("dataset: no rows");
  const std::set<long long> distinct(raw.begin(), raw.end());
  const long long lo = *distinct.begin();
  const long long hi = *distinct.rbegin();
  if (static_cast<long long>(distinct.size()) != hi - lo + 1) {
    for (long long v = lo; v <= hi; ++v)
      if (!distinct.count(v))
        throw DataError("dataset: label " + std::to_string(v) + " missing from range [" +
                        std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  out.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = static_cast<std::size_t>(raw[i] - lo);
  return distinct.size();
}

inline std::uint32_t read_be32(std::istream& in, const std::string& what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw DataError("idx: truncated header in " + what);
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

}  // namespace detail

/// Label column by zero-based index (negative counts from the end) or header name.
using LabelColumn = std::variant<long, std::string>;

/// CSV → table. Header auto-detected (any non-numeric cell in the first row).
/// Features are min-max scaled per column; constant columns become 0.
inline DatasetTable load_csv_dataset(const std::string& path, const LabelColumn& label_col = -1L) {
  std::ifstream in(path);
  if (!in) throw DataError("csv: cannot open " + path);
  std::string line;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    rows.push_back(detail::split_csv_line(line));
    line_numbers.push_back(lineno);
  }
  if (rows.empty()) throw DataError("csv: empty file " + path);

  std::vector<std::string> header;
  const bool has_header = std::any_of(rows.front().begin(), rows.front().end(),
                                      [](const std::string& c) { return !detail::parse_number(c); });
  std::size_t first = 0;
  if (has_header) {
    header = rows.front();
    first = 1;
  }
  const std::size_t width = rows.front().size();
  if (width < 2) throw DataError("csv: need at least one feature and a label column");

  std::size_t label_idx = 0;
  if (const auto* idx = std::get_if<long>(&label_col)) {
    const long w = static_cast<long>(width);
    const long i = *idx < 0 ? w + *idx : *idx;
    if (i < 0 || i >= w) throw DataError("csv: label column index out of range");
    label_idx = static_cast<std::size_t>(i);
  } else {
    const auto& name = std::get<std::string>(label_col);
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("csv: no column named '" + name + "'");
    label_idx = static_cast<std::size_t>(it - header.begin());
  }

  DatasetTable table;
  std::vector<long long> raw_labels;
  for (std::size_t r = first; r < rows.size(); ++r) {
    const auto& cells = rows[r];
    const std::string where = " at line " + std::to_string(line_numbers[r]);
    if (cells.size() != width)
      throw DataError("csv: ragged row (" + std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(width) + ")" + where);
    Vector feats;
    feats.reserve(width - 1);
    for (std::size_t c = 0; c < width; ++c) {
      const auto v = detail::parse_number(cells[c]);
      if (!v) throw DataError("csv: non-numeric cell '" + cells[c] + "'" + where);
      if (c == label_idx) {
        if (*v != std::floor(*v)) throw DataError("csv: non-integer label" + where);
        raw_labels.push_back(static_cast<long long>(*v));
      } else {
        feats.push_back(*v);
      }
    }
    table.features.push_back(std::move(feats));
  }
  table.num_classes = detail::remap_labels(raw_labels, table.labels);

  const std::size_t d = width - 1;
  for (std::size_t c = 0; c < d; ++c) {
    double lo = table.features[0][c], hi = lo;
    for (const auto& f : table.features) {
      lo = std::min(lo, f[c]);
      hi = std::max(hi, f[c]);
    }
    const double span = hi - lo;
    for (auto& f : table.features) f[c] = span > 0.0 ? (f[c] - lo) / span : 0.0;
  }
  return table;
}

struct IdxImageHeader {
  std::uint32_t count = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::size_t feature_dim() const noexcept { return std::size_t{rows} * cols; }
};

inline IdxImageHeader read_idx_image_header(std::istream& in, const std::string& what) {
  if (detail::read_be32(in, what) != 0x00000803u) throw DataError("idx: bad image magic in " + what);
  IdxImageHeader h;
  h.count = detail::read_be32(in, what);
  h.rows = detail::read_be32(in, what);
  h.cols = detail::read_be32(in, what);
  return h;
}

inline IdxImageHeader read_idx_image_header(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("idx: cannot open " + path);
  return read_idx_image_header(in, path);
}

/// MNIST-style IDX pair (0x00000803 images, 0x00000801 labels, big-endian).
/// Pixels are flattened row-major and divided by 255.
inline DatasetTable load_idx_dataset(const std::string& images_path, const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw DataError("idx: cannot open " + images_path);
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw DataError("idx: cannot open " + labels_path);

  const IdxImageHeader header = read_idx_image_header(img, images_path);
  const std::uint32_t n = header.count;
  const std::uint32_t rows = header.rows;
  const std::uint32_t cols = header.cols;
  if (detail::read_be32(lab, labels_path) != 0x00000801u)
    throw DataError("idx: bad label magic in " + labels_path);
  const std::uint32_t n_labels = detail::read_be32(lab, labels_path);
  if (n != n_labels)
    throw DataError("idx: image count " + std::to_string(n) + " != label count " +
                    std::to_string(n_labels));

  const std::size_t pixels = std::size_t{rows} * cols;
  DatasetTable table;
  table.features.reserve(n);
  std::vector<unsigned char> buf(pixels);
  for (std::uint32_t i = 0; i < n; ++i) {
    if (!img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels)))
      throw DataError("idx: truncated image payload at image " + std::to_string(i));
    Vector f(pixels);
    for (std::size_t p = 0; p < pixels; ++p) f[p] = static_cast<double>(buf[p]) / 255.0;
    table.features.push_back(std::move(f));
  }
  std::vector<long long> raw(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    char c;
    if (!lab.get(c)) throw DataError("idx: truncated label payload at label " + std::to_string(i));
    raw[i] = static_cast<unsigned char>(c);
  }
  table.num_classes = detail::remap_labels(raw, table.labels);
  return table;
}

/// Gaussian class blobs: a stand-in classification table for smoke runs and
/// latency measurement when no real dataset is on disk.
inline DatasetTable make_blob_dataset(std::size_t n, std::size_t d, std::size_t classes,
                                      double spread, std::uint64_t seed) {
  if (n == 0 || d == 0 || classes == 0) throw ContractViolation("make_blob_dataset: zero size");
  Rng rng = make_rng(seed, 0x626c6f62);
  std::vector<Vector> centers(classes, Vector(d));
  for (auto& c : centers)
    for (auto& v : c) v = standard_normal(rng);
  DatasetTable t;
  t.num_classes = classes;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t y = i % classes;
    Vector f(d);
    for (std::size_t j = 0; j < d; ++j) f[j] = centers[y][j] + spread * standard_normal(rng);
    t.features.push_back(std::move(f));
    t.labels.push_back(y);
  }
  return t;
}

struct DatasetEnvConfig {
  std::size_t horizon = 15000;
  bool dynamic_range = false;
  bool normalize = false;
  bool operator==(const DatasetEnvConfig&) const = default;
};

/// Classification → K-armed bandit. Arm k sees the sample in block k of a
/// d·K zero vector; the correct arm pays 1 (3 after the switch at T/2 in
/// dynamic mode), the others 0 (1 after the switch). Rewards are noise-free.
class DatasetEnv final : public Environment {
 public:
  DatasetEnv(std::shared_ptr<const DatasetTable> table, DatasetEnvConfig cfg, std::uint64_t seed)
      : table_(std::move(table)), cfg_(cfg), rng_(make_rng(seed, 0x64617461)) {
    if (!table_ || table_->size() == 0) throw ContractViolation("DatasetEnv: empty table");
    order_.resize(table_->size());
    reshuffle();
  }

  std::size_t arms() const override { return table_->num_classes; }
  std::size_t context_dim() const override {
    const std::size_t raw = table_->feature_dim() * table_->num_classes;
    return cfg_.normalize ? 2 * raw + 2 : raw;
  }
  std::size_t horizon() const override { return cfg_.horizon; }
  std::size_t current_label() const noexcept { return label_; }

  bool second_phase(std::size_t t) const {
    return cfg_.dynamic_range && 2 * t > cfg_.horizon;
  }

  const RoundObservation& sample_contexts(std::size_t t) override {
    if (cursor_ >= order_.size()) reshuffle();
    const std::size_t idx = order_[cursor_++];
    label_ = table_->labels[idx];
    const bool late = second_phase(t);
    const double correct = late ? 3.0 : 1.0;
    const double wrong = late ? 1.0 : 0.0;
    const std::size_t k_arms = arms();
    obs_.contexts.resize(k_arms);
    obs_.expected_rewards.assign(k_arms, wrong);
    obs_.expected_rewards[label_] = correct;
    for (std::size_t k = 0; k < k_arms; ++k) obs_.contexts[k] = disjoint_context(idx, k);
    obs_.oracle_var_bound = 0.0;
    obs_.oracle_true_var = 0.0;
    obs_.reward_range = late ? RewardRange{1.0, 3.0} : RewardRange{0.0, 1.0};
    return obs_;
  }

  double reward_value(std::size_t arm) override {
    if (arm >= arms()) throw ContractViolation("reward_value: arm out of range");
    return obs_.expected_rewards[arm];
  }

  std::vector<HoldoutPoint> holdout(std::size_t n, std::uint64_t seed) const override {
    Rng rng = make_rng(seed, 0x686f6c64);
    std::uniform_int_distribution<std::size_t> row(0, table_->size() - 1);
    std::uniform_int_distribution<std::size_t> arm(0, arms() - 1);
    std::vector<HoldoutPoint> pts;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t idx = row(rng);
      const std::size_t k = arm(rng);
      pts.push_back({disjoint_context(idx, k), table_->labels[idx] == k ? 1.0 : 0.0});
    }
    return pts;
  }

  Vector disjoint_context(std::size_t idx, std::size_t k) const {
    const auto& f = table_->features[idx];
    Vector x(f.size() * arms(), 0.0);
    std::copy(f.begin(), f.end(), x.begin() + static_cast<std::ptrdiff_t>(k * f.size()));
    if (!cfg_.normalize) return x;
    return normalize_context(x);
  }

 private:
  void reshuffle() {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::shuffle(order_.begin(), order_.end(), rng_);
    cursor_ = 0;
  }

  std::shared_ptr<const DatasetTable> table_;
  DatasetEnvConfig cfg_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::size_t label_ = 0;
  RoundObservation obs_;
};

}  // namespace nvlucb
