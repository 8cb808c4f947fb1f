#pragma once

// Regret accumulation and uncertainty-quality metrics (calibration error,
// sharpness, reliability bins, variance-estimation error).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "nvlucb/agents.hpp"
#include "nvlucb/envs.hpp"

namespace nvlucb {

inline constexpr double kForecastStdFloor = 1e-8;

/// Gaussian predictive law F_t.
struct ForecastCdf {
  double mean = 0.0;
  double std = 1.0;

  ForecastCdf() = default;
  ForecastCdf(double m, double s) : mean(m), std(std::max(s, kForecastStdFloor)) {}

  double operator()(double r) const {
    return 0.5 * std::erfc(-(r - mean) / (std * std::numbers::sqrt2));
  }
};

struct CalibrationConfig {
  std::vector<double> thresholds;

  /// {0.1, 0.2, ..., 1.0}
  static CalibrationConfig deciles() {
    CalibrationConfig c;
    for (int j = 1; j <= 10; ++j) c.thresholds.push_back(j / 10.0);
    return c;
  }

  void validate() const {
    if (thresholds.empty()) throw ContractViolation("CalibrationConfig: no thresholds");
    for (std::size_t j = 0; j < thresholds.size(); ++j) {
      if (thresholds[j] < 0.0 || thresholds[j] > 1.0)
        throw ContractViolation("CalibrationConfig: threshold outside [0, 1]");
      if (j > 0 && !(thresholds[j] > thresholds[j - 1]))
        throw ContractViolation("CalibrationConfig: thresholds must be strictly increasing");
    }
  }
};

/// (p_j, fraction of PIT values <= p_j) per threshold.
inline std::vector<std::pair<double, double>> reliability_bins(std::span<const double> pit,
                                                               const CalibrationConfig& cfg) {
  cfg.validate();
  if (pit.empty()) throw ContractViolation("reliability_bins: no PIT values");
  std::vector<double> sorted(pit.begin(), pit.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::pair<double, double>> bins;
  bins.reserve(cfg.thresholds.size());
  for (double p : cfg.thresholds) {
    const auto covered = std::upper_bound(sorted.begin(), sorted.end(), p) - sorted.begin();
    bins.emplace_back(p, static_cast<double>(covered) / static_cast<double>(sorted.size()));
  }
  return bins;
}

/// Σ_j (p_j - |{t : F_t(r_t) <= p_j}| / T)².
inline double calibration_error(std::span<const double> pit, const CalibrationConfig& cfg) {
  double err = 0.0;
  for (const auto& [p, freq] : reliability_bins(pit, cfg)) err += (p - freq) * (p - freq);
  return err;
}

/// Same error over a hold-out set, with forecasts from a frozen agent.
template <class Forecaster>
double calibration_error_holdout(const Forecaster& agent, std::span<const HoldoutPoint> holdout,
                                 const CalibrationConfig& cfg) {
  if (holdout.empty()) throw ContractViolation("calibration_error_holdout: empty hold-out set");
  std::vector<double> pit;
  pit.reserve(holdout.size());
  for (const auto& pt : holdout) {
    const Forecast f = agent.forecast(pt.context);
    pit.push_back(ForecastCdf(f.mean, f.std)(pt.reward));
  }
  return calibration_error(pit, cfg);
}

/// √(mean of forecast variances).
inline double sharpness(std::span<const ForecastCdf> forecasts) {
  if (forecasts.empty()) throw ContractViolation("sharpness: no forecasts");
  double s = 0.0;
  for (const auto& f : forecasts) s += f.std * f.std;
  return std::sqrt(s / static_cast<double>(forecasts.size()));
}

inline double sharpness_of_stds(std::span<const double> stds) {
  if (stds.empty()) throw ContractViolation("sharpness: no forecasts");
  double s = 0.0;
  for (double v : stds) s += v * v;
  return std::sqrt(s / static_cast<double>(stds.size()));
}

struct VarianceEstimate {
  double estimate;
  double truth;
};

inline std::vector<double> variance_estimation_error(std::span<const VarianceEstimate> pairs) {
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(std::abs(p.estimate - p.truth));
  return out;
}

class MetricsAccumulator {
 public:
  /// Pseudo-regret increment, PIT value and variance pair for one round.
  double record_round(const RoundRecord& rec, const RoundObservation& obs) {
    if (rec.arm >= obs.expected_rewards.size())
      throw ContractViolation("record_round: arm index outside expected reward vector");
    const double best = *std::max_element(obs.expected_rewards.begin(), obs.expected_rewards.end());
    const double regret = best - obs.expected_rewards[rec.arm];
    total_regret_ += regret;
    regret_.push_back(regret);
    cumulative_.push_back(total_regret_);

    const ForecastCdf f(rec.mean_est, rec.ucb_width);
    pit_.push_back(f(rec.reward));
    forecast_std_.push_back(f.std);
    sigma_hat_.push_back(rec.sigma_hat_sq);
    true_var_.push_back(obs.oracle_true_var);
    if (rec.sigma_hat_sq) variance_pairs_.push_back({*rec.sigma_hat_sq, obs.oracle_true_var});
    select_us_ += rec.select_us;
    train_us_ += rec.train_us;
    if (rec.trained) ++train_events_;
    return regret;
  }

  std::size_t rounds() const noexcept { return regret_.size(); }
  double total_regret() const noexcept { return total_regret_; }
  const std::vector<double>& regret() const noexcept { return regret_; }
  const std::vector<double>& cumulative_regret() const noexcept { return cumulative_; }
  const std::vector<double>& pit_values() const noexcept { return pit_; }
  const std::vector<double>& forecast_stds() const noexcept { return forecast_std_; }
  const std::vector<std::optional<double>>& sigma_hat() const noexcept { return sigma_hat_; }
  const std::vector<double>& true_variance() const noexcept { return true_var_; }
  const std::vector<VarianceEstimate>& variance_pairs() const noexcept { return variance_pairs_; }
  double total_select_us() const noexcept { return select_us_; }
  double total_train_us() const noexcept { return train_us_; }
  std::size_t train_events() const noexcept { return train_events_; }

  double calibration(const CalibrationConfig& cfg) const { return calibration_error(pit_, cfg); }
  double sharpness() const { return sharpness_of_stds(forecast_std_); }

  /// Fraction of rounds in [begin, end) with Var(ξ_t) <= σ̂²_t <= R².
  double sandwich_fraction(std::size_t begin, std::size_t end, double R) const {
    end = std::min(end, sigma_hat_.size());
    if (begin >= end) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = begin; i < end; ++i) {
      if (sigma_hat_[i] && true_var_[i] <= *sigma_hat_[i] && *sigma_hat_[i] <= R * R) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(end - begin);
  }

 private:
  double total_regret_ = 0.0;
  std::vector<double> regret_;
  std::vector<double> cumulative_;
  std::vector<double> pit_;
  std::vector<double> forecast_std_;
  std::vector<std::optional<double>> sigma_hat_;
  std::vector<double> true_var_;
  std::vector<VarianceEstimate> variance_pairs_;
  double select_us_ = 0.0;
  double train_us_ = 0.0;
  std::size_t train_events_ = 0;
};

}  // namespace nvlucb
