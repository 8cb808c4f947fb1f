#pragma once

// Bias-free ReLU feature network φ(x; w) = √m · g(W_L g(W_{L-1} ⋯ g(W_1 x)))
// with hand-written backpropagation and the two training objectives used by
// the neural-linear agents (squared error and Gaussian negative log-likelihood).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nvlucb/linalg.hpp"
#include "nvlucb/rng.hpp"

namespace nvlucb {

/// A non-finite value showed up in a forward pass (index = layer) or during
/// training (index = SGD step).
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, std::size_t index)
      : std::runtime_error(what + " (index " + std::to_string(index) + ")"), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

struct FeatureNet {
  // dims[0] = input width, dims.back() = feature width; weights[l] is dims[l+1] x dims[l].
  std::vector<std::size_t> dims;
  std::vector<Matrix> weights;
  double output_scale = 1.0;

  std::size_t depth() const noexcept { return weights.size(); }
  std::size_t input_dim() const noexcept { return dims.front(); }
  std::size_t output_dim() const noexcept { return dims.back(); }
  std::size_t parameter_count() const noexcept {
    std::size_t p = 0;
    for (const auto& w : weights) p += w.rows() * w.cols();
    return p;
  }
  bool operator==(const FeatureNet&) const = default;
};

/// Layer widths for an L-layer net with hidden width m.
inline std::vector<std::size_t> layer_dims(std::size_t input_dim, std::size_t hidden,
                                           std::size_t depth, std::size_t output_dim) {
  if (depth == 0) throw ContractViolation("layer_dims: depth must be >= 1");
  std::vector<std::size_t> dims{input_dim};
  for (std::size_t l = 1; l < depth; ++l) dims.push_back(hidden);
  dims.push_back(output_dim);
  return dims;
}

/// He-style Gaussian init: W_l entries ~ N(0, 2 / m_{l-1}). The output scale
/// is √(dims[1]), the hidden width for L >= 2.
inline FeatureNet init_weights(std::span<const std::size_t> dims, std::uint64_t seed) {
  if (dims.size() < 2) throw ContractViolation("init_weights: need at least two layer dims");
  for (auto d : dims)
    if (d == 0) throw ContractViolation("init_weights: zero layer width");
  FeatureNet net;
  net.dims.assign(dims.begin(), dims.end());
  net.output_scale = std::sqrt(static_cast<double>(dims[1]));
  Rng rng = make_rng(seed, 0x6e6574);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const double sd = std::sqrt(2.0 / static_cast<double>(dims[l]));
    Matrix w(dims[l + 1], dims[l]);
    for (auto& v : w.data()) v = sd * standard_normal(rng);
    net.weights.push_back(std::move(w));
  }
  return net;
}

/// Activations kept for backprop: layer_out[0] = x, layer_out[l] = g(W_l layer_out[l-1]).
struct ForwardTrace {
  std::vector<Vector> layer_out;
  Vector features;
};

inline void forward(const FeatureNet& net, std::span<const double> x, ForwardTrace& trace) {
  if (x.size() != net.input_dim()) throw ContractViolation("forward: input dimension mismatch");
  trace.layer_out.resize(net.depth() + 1);
  trace.layer_out[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < net.depth(); ++l) {
    const Matrix& w = net.weights[l];
    const Vector& in = trace.layer_out[l];
    Vector& out = trace.layer_out[l + 1];
    out.assign(w.rows(), 0.0);
    for (std::size_t i = 0; i < w.rows(); ++i) {
      auto r = w.row(i);
      double s = 0.0;
      for (std::size_t j = 0; j < r.size(); ++j) s += r[j] * in[j];
      if (!std::isfinite(s)) throw NumericError("forward: non-finite pre-activation", l + 1);
      out[i] = s > 0.0 ? s : 0.0;
    }
  }
  const Vector& last = trace.layer_out.back();
  trace.features.resize(last.size());
  for (std::size_t i = 0; i < last.size(); ++i) trace.features[i] = net.output_scale * last[i];
}

inline Vector forward_features(const FeatureNet& net, std::span<const double> x) {
  ForwardTrace trace;
  forward(net, x, trace);
  return std::move(trace.features);
}

/// Accumulate factor · ∂(dphiᵀ φ)/∂w into `grad` (flattened, layer-major then
/// row-major, length parameter_count()).
inline void backward(const FeatureNet& net, const ForwardTrace& trace,
                     std::span<const double> dphi, std::span<double> grad, double factor = 1.0) {
  if (grad.size() != net.parameter_count() || dphi.size() != net.output_dim())
    throw ContractViolation("backward: dimension mismatch");
  std::vector<std::size_t> offset(net.depth());
  for (std::size_t l = 0, acc = 0; l < net.depth(); ++l) {
    offset[l] = acc;
    acc += net.weights[l].rows() * net.weights[l].cols();
  }

  Vector delta(dphi.size());
  const Vector& top = trace.layer_out.back();
  for (std::size_t i = 0; i < delta.size(); ++i)
    delta[i] = top[i] > 0.0 ? factor * net.output_scale * dphi[i] : 0.0;

  for (std::size_t l = net.depth(); l-- > 0;) {
    const Matrix& w = net.weights[l];
    const Vector& in = trace.layer_out[l];
    double* g = grad.data() + offset[l];
    for (std::size_t i = 0; i < w.rows(); ++i) {
      const double di = delta[i];
      if (di == 0.0) continue;
      double* gr = g + i * w.cols();
      for (std::size_t j = 0; j < w.cols(); ++j) gr[j] += di * in[j];
    }
    if (l == 0) break;
    Vector prev(w.cols(), 0.0);
    for (std::size_t i = 0; i < w.rows(); ++i) {
      const double di = delta[i];
      if (di == 0.0) continue;
      auto r = w.row(i);
      for (std::size_t j = 0; j < r.size(); ++j) prev[j] += di * r[j];
    }
    for (std::size_t j = 0; j < prev.size(); ++j)
      if (!(in[j] > 0.0)) prev[j] = 0.0;
    delta = std::move(prev);
  }
}

/// ∇_w f(x; θ, w) for f = θᵀφ(x; w).
inline Vector grad_wrt_weights(const FeatureNet& net, std::span<const double> theta,
                               std::span<const double> x) {
  ForwardTrace trace;
  forward(net, x, trace);
  Vector g(net.parameter_count(), 0.0);
  backward(net, trace, theta, g);
  return g;
}

/// Observed (context, reward) pairs of pulled arms, in pull order.
class ReplayBuffer {
 public:
  struct Entry {
    Vector context;
    double reward;
  };

  void append(Vector context, double reward) { entries_.push_back({std::move(context), reward}); }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const Entry& operator[](std::size_t i) const { return entries_[i]; }
  auto begin() const noexcept { return entries_.begin(); }
  auto end() const noexcept { return entries_.end(); }

 private:
  std::vector<Entry> entries_;
};

enum class LossKind { mse, mle };

struct TrainConfig {
  std::size_t iters = 1000;
  double learning_rate = 1e-2;
  double weight_decay = 0.0;
  std::size_t batch_size = 64;
  LossKind loss = LossKind::mse;

  void validate() const {
    if (iters < 1) throw ContractViolation("TrainConfig: iters must be >= 1");
    if (batch_size < 1) throw ContractViolation("TrainConfig: batch_size must be >= 1");
    if (!(learning_rate >= 0.0)) throw ContractViolation("TrainConfig: learning_rate must be >= 0");
    if (!(weight_decay >= 0.0)) throw ContractViolation("TrainConfig: weight_decay must be >= 0");
  }
  bool operator==(const TrainConfig&) const = default;
};

inline constexpr double kMleVarianceFloor = 1e-8;

namespace detail {

// Per-sample loss value; writes ∂loss/∂φ into dphi.
inline double sample_loss(LossKind kind, std::span<const double> phi, std::span<const double> theta,
                          const Matrix* a_inv, double reward, std::span<double> dphi) {
  const double pred = dot(theta, phi);
  const double resid = pred - reward;
  if (kind == LossKind::mse) {
    for (std::size_t i = 0; i < phi.size(); ++i) dphi[i] = 2.0 * resid * theta[i];
    return resid * resid;
  }
  const Vector a_phi = matvec(*a_inv, phi);
  const double raw_v = dot(phi, a_phi);
  const bool floored = !(raw_v > kMleVarianceFloor);
  const double v = floored ? kMleVarianceFloor : raw_v;
  // loss = ½ log(2πv) + resid² / (2v)
  const double dv = floored ? 0.0 : (0.5 / v - resid * resid / (2.0 * v * v));
  for (std::size_t i = 0; i < phi.size(); ++i)
    dphi[i] = dv * 2.0 * a_phi[i] + (resid / v) * theta[i];
  return 0.5 * std::log(2.0 * std::numbers::pi * v) + resid * resid / (2.0 * v);
}

}  // namespace detail

/// Σ (θᵀφ(x_i) - r_i)² over the whole buffer.
inline double loss_mse(const FeatureNet& net, std::span<const double> theta,
                       const ReplayBuffer& buffer) {
  if (buffer.empty()) throw ContractViolation("loss_mse: empty buffer");
  double s = 0.0;
  for (const auto& e : buffer) {
    const double r = dot(theta, forward_features(net, e.context)) - e.reward;
    s += r * r;
  }
  return s;
}

/// Σ [½ log(2π v_i) + (r_i - θᵀφ_i)² / (2 v_i)], v_i = max(φ_iᵀ A⁻¹ φ_i, 1e-8).
inline double loss_mle(const FeatureNet& net, std::span<const double> theta, const Matrix& a_inv,
                       const ReplayBuffer& buffer) {
  if (buffer.empty()) throw ContractViolation("loss_mle: empty buffer");
  double s = 0.0;
  for (const auto& e : buffer) {
    const Vector phi = forward_features(net, e.context);
    const double v = std::max(quadratic_form(phi, a_inv), kMleVarianceFloor);
    const double r = e.reward - dot(theta, phi);
    s += 0.5 * std::log(2.0 * std::numbers::pi * v) + r * r / (2.0 * v);
  }
  return s;
}

/// Mini-batch SGD on the network weights only; θ and A⁻¹ are constants of
/// the objective. Each step uses the batch-mean loss plus weight_decay · w.
inline void train_inplace(FeatureNet& net, std::span<const double> theta, const Matrix& a_inv,
                          const ReplayBuffer& buffer, const TrainConfig& cfg, Rng& rng) {
  cfg.validate();
  if (buffer.empty()) throw ContractViolation("train: empty buffer");
  if (theta.size() != net.output_dim()) throw ContractViolation("train: theta dimension mismatch");
  if (cfg.loss == LossKind::mle &&
      (!a_inv.square() || a_inv.rows() != net.output_dim()))
    throw ContractViolation("train: a_inv dimension mismatch");

  const std::size_t p = net.parameter_count();
  std::vector<std::size_t> order(buffer.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();

  Vector grad(p);
  Vector dphi(net.output_dim());
  ForwardTrace trace;
  for (std::size_t step = 0; step < cfg.iters; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    if (cursor >= order.size()) {
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    const std::size_t end = std::min(order.size(), cursor + cfg.batch_size);
    const double inv_batch = 1.0 / static_cast<double>(end - cursor);
    double batch_loss = 0.0;
    for (; cursor < end; ++cursor) {
      const auto& e = buffer[order[cursor]];
      forward(net, e.context, trace);
      batch_loss += detail::sample_loss(cfg.loss, trace.features, theta, &a_inv, e.reward, dphi);
      backward(net, trace, dphi, grad, inv_batch);
    }
    if (!std::isfinite(batch_loss)) throw NumericError("train: non-finite loss", step);

    std::size_t k = 0;
    for (auto& w : net.weights) {
      for (auto& v : w.data()) {
        v -= cfg.learning_rate * (grad[k++] + cfg.weight_decay * v);
      }
    }
  }
}

inline FeatureNet train(FeatureNet net, std::span<const double> theta, const Matrix& a_inv,
                        const ReplayBuffer& buffer, const TrainConfig& cfg, Rng& rng) {
  train_inplace(net, theta, a_inv, buffer, cfg, rng);
  return net;
}

}  // namespace nvlucb
