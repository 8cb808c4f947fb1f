#pragma once

// Bandit policies. The linear-head family (LinUCB, Neural-LinGreedy,
// Neural-LinUCB and the variance-aware variants) shares one code path: a
// feature map (identity or FeatureNet), a weighted ridge head kept as A⁻¹ via
// rank-1 updates, and a pluggable source for the per-round variance bound.
// NeuralUCB / NeuralTS explore on the full weight gradient with a diagonal
// design matrix.

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nvlucb/linalg.hpp"
#include "nvlucb/neural.hpp"
#include "nvlucb/rng.hpp"

namespace nvlucb {

enum class PolicyKind {
  linucb,             // identity features, unit weights
  linucb_var,         // identity features, variance-weighted head
  neural_lingreedy,   // neural features, unit weights, alpha = 0
  neural_linucb,      // neural features, unit weights
  neural_var_linucb,  // neural features, variance-weighted head
  neural_ucb,
  neural_ts,
};

enum class VarianceMode { unit, oracle_bound, oracle_true_var, estimated_bound, predictive_variance };

inline std::string_view to_string(PolicyKind p) {
  switch (p) {
    case PolicyKind::linucb: return "linucb";
    case PolicyKind::linucb_var: return "linucb_var";
    case PolicyKind::neural_lingreedy: return "neural_lingreedy";
    case PolicyKind::neural_linucb: return "neural_linucb";
    case PolicyKind::neural_var_linucb: return "neural_var_linucb";
    case PolicyKind::neural_ucb: return "neural_ucb";
    case PolicyKind::neural_ts: return "neural_ts";
  }
  return "?";
}

inline std::string_view to_string(VarianceMode v) {
  switch (v) {
    case VarianceMode::unit: return "unit";
    case VarianceMode::oracle_bound: return "oracle_bound";
    case VarianceMode::oracle_true_var: return "oracle_true_var";
    case VarianceMode::estimated_bound: return "estimated_bound";
    case VarianceMode::predictive_variance: return "predictive_variance";
  }
  return "?";
}

inline std::optional<PolicyKind> parse_policy(std::string_view s) {
  for (auto p : {PolicyKind::linucb, PolicyKind::linucb_var, PolicyKind::neural_lingreedy,
                 PolicyKind::neural_linucb, PolicyKind::neural_var_linucb, PolicyKind::neural_ucb,
                 PolicyKind::neural_ts})
    if (to_string(p) == s) return p;
  return std::nullopt;
}

inline std::optional<VarianceMode> parse_variance_mode(std::string_view s) {
  for (auto v : {VarianceMode::unit, VarianceMode::oracle_bound, VarianceMode::oracle_true_var,
                 VarianceMode::estimated_bound, VarianceMode::predictive_variance})
    if (to_string(v) == s) return v;
  return std::nullopt;
}

inline bool is_oracle(VarianceMode v) {
  return v == VarianceMode::oracle_bound || v == VarianceMode::oracle_true_var;
}

struct RewardRange {
  double a = 0.0;
  double b = 1.0;
  bool operator==(const RewardRange&) const = default;
};

/// (b - μ)(μ - a). Negative when μ lies outside [a, b]; clamp_sigma floors it.
inline double estimate_sigma_sq(double mean_est, double a, double b) {
  if (!(b > a)) throw ContractViolation("estimate_sigma_sq: need b > a");
  return (b - mean_est) * (mean_est - a);
}

/// max(σ², R²/d).
inline double clamp_sigma(double sigma_sq, double R, std::size_t d) {
  if (!(R > 0.0) || d < 1) throw ContractViolation("clamp_sigma: need R > 0 and d >= 1");
  return std::max(sigma_sq, R * R / static_cast<double>(d));
}

struct ExplorationSchedule {
  enum class Kind { constant, theory };
  Kind kind = Kind::constant;
  double alpha = 0.02;
  // Theory-mode constants.
  double R = 1.0;
  double M = 0.1;
  double delta = 0.1;
  std::size_t H = 100;
  std::size_t K = 4;
  double lambda = 1.0;
  std::size_t d = 20;
  bool operator==(const ExplorationSchedule&) const = default;
};

/// Exploration rate for round t (1-based) given the current σ̄_t.
///
/// Theory mode:
///   8·√(d·log(1 + t·d·log(HK) / (σ̄²·d·λ)) · log(4t²/δ)) + (4R/σ̄)·log(4t²/δ) + √λ·M
inline double alpha_at(const ExplorationSchedule& s, std::size_t t, double sigma_bar) {
  if (s.kind == ExplorationSchedule::Kind::constant) return s.alpha;
  if (t < 1 || !(sigma_bar > 0.0)) throw ContractViolation("alpha_at: need t >= 1, sigma_bar > 0");
  const double tt = static_cast<double>(t);
  const double d = static_cast<double>(s.d);
  const double log_conf = std::log(4.0 * tt * tt / s.delta);
  const double log_hk = std::log(static_cast<double>(s.H) * static_cast<double>(s.K));
  const double inner = std::log(1.0 + tt * d * log_hk / (sigma_bar * sigma_bar * d * s.lambda));
  return 8.0 * std::sqrt(d * inner * log_conf) + 4.0 * s.R / sigma_bar * log_conf +
         std::sqrt(s.lambda) * s.M;
}

/// θ₀ ~ N(0, 1/d).
inline Vector initial_theta(std::size_t d, Rng& rng) {
  if (d == 0) throw ContractViolation("initial_theta: zero dimension");
  const double sd = std::sqrt(1.0 / static_cast<double>(d));
  Vector theta(d);
  for (auto& v : theta) v = sd * standard_normal(rng);
  return theta;
}

/// Output-layer state of a linear-head agent: θ = A⁻¹ b.
struct LinearHead {
  Vector theta;
  Matrix a_inv;
  Vector b;
  double lambda = 1.0;

  /// A += φφᵀ/σ̄², b += φ·r/σ̄², θ = A⁻¹ b.
  void update(std::span<const double> phi, double reward, double sigma_bar_sq) {
    if (!(sigma_bar_sq > 0.0)) throw ContractViolation("update_linear: sigma_bar_sq must be > 0");
    if (phi.size() != b.size()) throw ContractViolation("update_linear: dimension mismatch");
    const double w = 1.0 / sigma_bar_sq;
    sherman_morrison_update_inplace(a_inv, phi, w);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] += phi[i] * reward * w;
    theta = matvec(a_inv, b);
  }
};

struct AgentConfig {
  PolicyKind policy = PolicyKind::neural_var_linucb;
  VarianceMode variance = VarianceMode::estimated_bound;  // variance-aware policies only
  std::size_t input_dim = 20;
  std::size_t hidden_width = 100;  // m
  std::size_t depth = 2;           // L
  std::size_t feature_dim = 20;    // m_L; ignored by identity-feature policies
  double lambda = 1.0;
  double R = 1.0;
  RewardRange reward_range{};
  std::size_t train_period = 100;  // H
  std::size_t warmup = 0;          // first round eligible for training
  TrainConfig train{};
  ExplorationSchedule exploration{};

  bool uses_network() const {
    return policy != PolicyKind::linucb && policy != PolicyKind::linucb_var;
  }
  bool gradient_explorer() const {
    return policy == PolicyKind::neural_ucb || policy == PolicyKind::neural_ts;
  }
  VarianceMode effective_variance() const {
    return (policy == PolicyKind::neural_var_linucb || policy == PolicyKind::linucb_var)
               ? variance
               : VarianceMode::unit;
  }
  std::size_t head_dim() const { return uses_network() ? feature_dim : input_dim; }

  void validate() const {
    if (train_period < 1) throw ContractViolation("AgentConfig: train_period must be >= 1");
    if (!(lambda > 0.0)) throw ContractViolation("AgentConfig: lambda must be > 0");
    if (!(R > 0.0)) throw ContractViolation("AgentConfig: R must be > 0");
    if (effective_variance() == VarianceMode::estimated_bound && !(reward_range.b > reward_range.a))
      throw ContractViolation("AgentConfig: reward range needs b > a");
    if (input_dim == 0 || (uses_network() && (hidden_width == 0 || feature_dim == 0 || depth == 0)))
      throw ContractViolation("AgentConfig: zero dimension");
    if (exploration.kind == ExplorationSchedule::Kind::constant && !(exploration.alpha >= 0.0))
      throw ContractViolation("AgentConfig: alpha must be >= 0");
    train.validate();
  }
  bool operator==(const AgentConfig&) const = default;
};

struct RoundRecord {
  std::size_t t = 0;
  std::size_t arm = 0;
  double reward = 0.0;
  double mean_est = 0.0;
  double ucb_width = 0.0;
  std::optional<double> sigma_hat_sq;
  std::optional<double> sigma_bar_sq;
  double select_us = 0.0;
  double train_us = 0.0;
  bool trained = false;
};

struct Selection {
  std::size_t arm = 0;
  std::vector<double> scores;
  double mean_est = 0.0;
  double width = 0.0;
  Vector features;  // φ (linear head) or ∇_w f (gradient explorers) of the chosen arm
};

/// Per-round side information from the environment.
struct StepFeedback {
  std::optional<double> oracle_variance;  // required iff the variance source is an oracle mode
  std::optional<RewardRange> reward_range;
};

struct Forecast {
  double mean = 0.0;
  double std = 0.0;
};

class Agent {
 public:
  Agent(AgentConfig cfg, std::uint64_t seed)
      : cfg_(std::move(cfg)),
        train_rng_(make_rng(seed, 0x747261696e)),
        sample_rng_(make_rng(seed, 0x73616d706c65)) {
    cfg_.validate();
    const std::size_t d = cfg_.head_dim();
    Rng init_rng = make_rng(seed, 0x696e6974);
    head_.lambda = cfg_.lambda;
    head_.a_inv = Matrix::identity(d, 1.0 / cfg_.lambda);
    head_.b.assign(d, 0.0);
    head_.theta = initial_theta(d, init_rng);
    if (cfg_.uses_network()) {
      const auto dims = layer_dims(cfg_.input_dim, cfg_.hidden_width, cfg_.depth, cfg_.feature_dim);
      net_ = init_weights(dims, init_rng());
    }
    if (cfg_.gradient_explorer()) z_diag_.assign(net_.parameter_count(), cfg_.lambda);
    prev_sigma_bar_sq_ = cfg_.effective_variance() == VarianceMode::unit ? 1.0 : cfg_.R * cfg_.R;
  }

  const AgentConfig& config() const noexcept { return cfg_; }
  const LinearHead& head() const noexcept { return head_; }
  const FeatureNet& net() const noexcept { return net_; }
  const ReplayBuffer& buffer() const noexcept { return buffer_; }
  const Vector& z_diag() const noexcept { return z_diag_; }
  std::size_t rounds() const noexcept { return t_; }
  double previous_sigma_bar_sq() const noexcept { return prev_sigma_bar_sq_; }

  void set_net(FeatureNet net) {
    if (!cfg_.uses_network() || net.dims != net_.dims)
      throw ContractViolation("set_net: architecture mismatch");
    net_ = std::move(net);
  }

  void set_head(LinearHead head) {
    const std::size_t d = cfg_.head_dim();
    if (head.theta.size() != d || head.b.size() != d || head.a_inv.rows() != d || !head.a_inv.square())
      throw ContractViolation("set_head: dimension mismatch");
    head_ = std::move(head);
  }

  /// Feature map of the linear head: φ(x; w), or x itself for LinUCB.
  Vector features(std::span<const double> x) const {
    if (cfg_.uses_network()) return forward_features(net_, x);
    if (x.size() != cfg_.input_dim) throw ContractViolation("features: input dimension mismatch");
    return Vector(x.begin(), x.end());
  }

  /// Exploration rate used at the upcoming round.
  double current_alpha() const {
    if (cfg_.policy == PolicyKind::neural_lingreedy) return 0.0;
    return alpha_at(cfg_.exploration, t_ + 1, std::sqrt(prev_sigma_bar_sq_));
  }

  Selection select_arm(std::span<const Vector> contexts) {
    if (contexts.empty()) throw ContractViolation("select_arm: no arms");
    if (cfg_.policy == PolicyKind::neural_ucb) return neural_ucb_select(contexts);
    if (cfg_.policy == PolicyKind::neural_ts) return neural_ts_select(contexts);

    const double alpha = current_alpha();
    Selection sel;
    sel.scores.resize(contexts.size());
    double best_width = 0.0;
    double best_mean = 0.0;
    for (std::size_t k = 0; k < contexts.size(); ++k) {
      Vector phi = features(contexts[k]);
      const double mean = dot(head_.theta, phi);
      const double width = alpha * mahalanobis_norm(phi, head_.a_inv);
      const double score = mean + width;
      if (!std::isfinite(score)) throw NumericError("select_arm: non-finite score for arm", k);
      sel.scores[k] = score;
      if (k == 0 || score > sel.scores[sel.arm]) {
        sel.arm = k;
        best_mean = mean;
        best_width = width;
        sel.features = std::move(phi);
      }
    }
    sel.mean_est = best_mean;
    sel.width = best_width;
    return sel;
  }

  /// f(x) + γ·√(gᵀ Z⁻¹ g / m) with g = ∇_w f(x) and diagonal Z.
  Selection neural_ucb_select(std::span<const Vector> contexts) {
    return gradient_select(contexts, false);
  }

  /// argmax of r̃_k ~ N(f(x_k), ν²·gᵀZ⁻¹g/m).
  Selection neural_ts_select(std::span<const Vector> contexts) {
    return gradient_select(contexts, true);
  }

  void update_linear(std::span<const double> phi, double reward, double sigma_bar_sq) {
    head_.update(phi, reward, sigma_bar_sq);
  }

  /// One full round: select, pull, resolve σ̄², update the head (or Z), and
  /// retrain the network every H rounds once past warmup.
  RoundRecord step(std::span<const Vector> contexts, const std::function<double(std::size_t)>& pull,
                   const StepFeedback& feedback = {}) {
    const VarianceMode mode = cfg_.effective_variance();
    const bool needs_oracle = !cfg_.gradient_explorer() && is_oracle(mode);
    if (needs_oracle != feedback.oracle_variance.has_value())
      throw ContractViolation("step: oracle variance feedback must be given iff an oracle mode is active");

    RoundRecord rec;
    rec.t = t_ + 1;
    const auto t0 = std::chrono::steady_clock::now();
    Selection sel = select_arm(contexts);
    const auto t1 = std::chrono::steady_clock::now();
    rec.select_us = std::chrono::duration<double, std::micro>(t1 - t0).count();
    ++t_;

    rec.arm = sel.arm;
    rec.mean_est = sel.mean_est;
    rec.ucb_width = sel.width;
    rec.reward = pull(sel.arm);

    if (cfg_.gradient_explorer()) {
      const double m = static_cast<double>(cfg_.hidden_width);
      for (std::size_t i = 0; i < z_diag_.size(); ++i)
        z_diag_[i] += sel.features[i] * sel.features[i] / m;
    } else {
      std::optional<double> sigma_hat;
      double sigma_bar = 1.0;
      if (mode != VarianceMode::unit) {
        switch (mode) {
          case VarianceMode::oracle_bound:
          case VarianceMode::oracle_true_var:
            sigma_hat = *feedback.oracle_variance;
            break;
          case VarianceMode::estimated_bound: {
            const RewardRange rr = feedback.reward_range.value_or(cfg_.reward_range);
            sigma_hat = estimate_sigma_sq(sel.mean_est, rr.a, rr.b);
            break;
          }
          case VarianceMode::predictive_variance:
            sigma_hat = quadratic_form(sel.features, head_.a_inv);
            break;
          case VarianceMode::unit:
            break;
        }
        sigma_bar = clamp_sigma(*sigma_hat, cfg_.R, cfg_.head_dim());
      }
      rec.sigma_hat_sq = sigma_hat;
      rec.sigma_bar_sq = sigma_bar;
      update_linear(sel.features, rec.reward, sigma_bar);
      prev_sigma_bar_sq_ = sigma_bar;
    }

    if (cfg_.uses_network()) {
      buffer_.append(Vector(contexts[sel.arm].begin(), contexts[sel.arm].end()), rec.reward);
      if (t_ >= cfg_.warmup && t_ % cfg_.train_period == 0) {
        const auto s0 = std::chrono::steady_clock::now();
        train_inplace(net_, head_.theta, head_.a_inv, buffer_, training_config(), train_rng_);
        const auto s1 = std::chrono::steady_clock::now();
        rec.train_us = std::chrono::duration<double, std::micro>(s1 - s0).count();
        rec.trained = true;
      }
    }
    return rec;
  }

  /// Gaussian predictive law the agent implies for context x: mean estimate
  /// and exploration width of its current score.
  Forecast forecast(std::span<const double> x) const {
    if (cfg_.gradient_explorer()) {
      ForwardTrace trace;
      forward(net_, x, trace);
      Vector g(net_.parameter_count(), 0.0);
      backward(net_, trace, head_.theta, g);
      return {dot(head_.theta, trace.features), cfg_.exploration.alpha * gradient_bonus(g)};
    }
    const Vector phi = features(x);
    return {dot(head_.theta, phi), current_alpha() * mahalanobis_norm(phi, head_.a_inv)};
  }

 private:
  TrainConfig training_config() const {
    TrainConfig tc = cfg_.train;
    if (cfg_.gradient_explorer()) tc.loss = LossKind::mse;
    return tc;
  }

  double gradient_bonus(std::span<const double> g) const {
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) s += g[i] * g[i] / z_diag_[i];
    return std::sqrt(s / static_cast<double>(cfg_.hidden_width));
  }

  Selection gradient_select(std::span<const Vector> contexts, bool thompson) {
    if (!cfg_.gradient_explorer()) throw ContractViolation("gradient_select: not a NeuralUCB/TS agent");
    const double scale = cfg_.exploration.kind == ExplorationSchedule::Kind::constant
                             ? cfg_.exploration.alpha
                             : alpha_at(cfg_.exploration, t_ + 1, cfg_.R);
    Selection sel;
    sel.scores.resize(contexts.size());
    ForwardTrace trace;
    Vector g(net_.parameter_count());
    for (std::size_t k = 0; k < contexts.size(); ++k) {
      forward(net_, contexts[k], trace);
      std::fill(g.begin(), g.end(), 0.0);
      backward(net_, trace, head_.theta, g);
      const double f = dot(head_.theta, trace.features);
      const double width = scale * gradient_bonus(g);
      const double score = thompson ? f + width * standard_normal(sample_rng_) : f + width;
      if (!std::isfinite(score)) throw NumericError("select_arm: non-finite score for arm", k);
      sel.scores[k] = score;
      if (k == 0 || score > sel.scores[sel.arm]) {
        sel.arm = k;
        sel.mean_est = f;
        sel.width = width;
        sel.features = g;
      }
    }
    return sel;
  }

  AgentConfig cfg_;
  LinearHead head_;
  FeatureNet net_;
  ReplayBuffer buffer_;
  Vector z_diag_;
  Rng train_rng_;
  Rng sample_rng_;
  std::size_t t_ = 0;
  double prev_sigma_bar_sq_ = 1.0;
};

}  // namespace nvlucb
