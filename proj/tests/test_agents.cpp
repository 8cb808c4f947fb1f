#include "nvlucb/agents.hpp"
#include "nvlucb/envs.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

namespace nvlucb {
namespace {

AgentConfig small_config(PolicyKind policy, std::size_t input_dim = 6) {
  AgentConfig c;
  c.policy = policy;
  c.input_dim = input_dim;
  c.hidden_width = 8;
  c.depth = 2;
  c.feature_dim = 4;
  c.train_period = 10;
  c.train.iters = 20;
  c.exploration.alpha = 0.5;
  return c;
}

std::vector<Vector> random_contexts(std::size_t k, std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Vector> out(k, Vector(d));
  for (auto& x : out)
    for (auto& v : x) v = g(rng);
  return out;
}

LinearHead head_with_theta(Vector theta, double lambda = 1.0) {
  LinearHead h;
  h.lambda = lambda;
  h.a_inv = Matrix::identity(theta.size(), 1.0 / lambda);
  h.b.assign(theta.size(), 0.0);
  h.theta = std::move(theta);
  return h;
}

TEST(InitAgent, LambdaSetsInverse) {
  auto c = small_config(PolicyKind::linucb);
  c.lambda = 1.0;
  EXPECT_EQ(Agent(c, 1).head().a_inv, Matrix::identity(6));
  c.lambda = 4.0;
  EXPECT_EQ(Agent(c, 1).head().a_inv, Matrix::identity(6, 0.25));
}

TEST(InitAgent, ThetaVariance) {
  Rng rng = make_rng(3, 0);
  const std::size_t d = 10000;
  const Vector theta = initial_theta(d, rng);
  double s = 0.0, s2 = 0.0;
  for (double v : theta) {
    s += v;
    s2 += v * v;
  }
  const double n = static_cast<double>(d);
  const double var = s2 / n - (s / n) * (s / n);
  EXPECT_NEAR(var, 1.0 / n, 0.1 / n);
}

TEST(InitAgent, DistinctSeedsGiveDistinctTheta) {
  const auto c = small_config(PolicyKind::neural_var_linucb);
  EXPECT_NE(Agent(c, 1).head().theta, Agent(c, 2).head().theta);
  EXPECT_EQ(Agent(c, 1).head().theta, Agent(c, 1).head().theta);
}

TEST(SelectArm, GreedyPicksLargestMean) {
  auto c = small_config(PolicyKind::linucb, 3);
  c.exploration.alpha = 0.0;
  Agent agent(c, 0);
  agent.set_head(head_with_theta({1.0, 1.0, 1.0}));
  const std::vector<Vector> ctx{{0.1, 0.0, 0.0}, {0.0, 0.9, 0.0}, {0.0, 0.0, 0.3}};
  const Selection s = agent.select_arm(ctx);
  EXPECT_EQ(s.arm, 1u);
  EXPECT_NEAR(s.mean_est, 0.9, 1e-15);
}

TEST(SelectArm, IdenticalContextsPickArmZero) {
  Agent agent(small_config(PolicyKind::neural_linucb), 5);
  const Vector x{0.1, 0.2, -0.3, 0.4, 0.5, -0.6};
  EXPECT_EQ(agent.select_arm(std::vector<Vector>{x, x, x, x}).arm, 0u);
}

TEST(SelectArm, HandArithmeticTie) {
  auto c = small_config(PolicyKind::linucb, 2);
  c.exploration.alpha = 1.0;
  Agent agent(c, 0);
  agent.set_head(head_with_theta({1.0, 0.0}));
  const Selection s = agent.select_arm(std::vector<Vector>{{1.0, 0.0}, {0.0, 2.0}});
  EXPECT_DOUBLE_EQ(s.scores[0], 2.0);
  EXPECT_DOUBLE_EQ(s.scores[1], 2.0);
  EXPECT_EQ(s.arm, 0u);
}

TEST(SelectArm, ScoreAtLeastMean) {
  std::mt19937_64 rng(1);
  Agent agent(small_config(PolicyKind::neural_var_linucb), 2);
  for (int t = 0; t < 30; ++t) {
    const auto ctx = random_contexts(4, 6, rng);
    const Selection s = agent.select_arm(ctx);
    for (std::size_t k = 0; k < ctx.size(); ++k)
      EXPECT_GE(s.scores[k], dot(agent.head().theta, agent.features(ctx[k])));
    agent.step(ctx, [](std::size_t k) { return 0.1 * static_cast<double>(k); },
               StepFeedback{std::nullopt, RewardRange{0.0, 1.0}});
  }
}

TEST(EstimateSigma, Examples) {
  EXPECT_DOUBLE_EQ(estimate_sigma_sq(0.5, 0.0, 1.0), 0.25);
  EXPECT_DOUBLE_EQ(estimate_sigma_sq(1.0, 0.0, 1.0), 0.0);
  EXPECT_NEAR(estimate_sigma_sq(0.9, 0.0, 1.0), 0.09, 1e-15);
  EXPECT_THROW(estimate_sigma_sq(0.5, 1.0, 1.0), ContractViolation);
}

TEST(ClampSigma, Examples) {
  EXPECT_DOUBLE_EQ(clamp_sigma(0.25, 1.0, 20), 0.25);
  EXPECT_DOUBLE_EQ(clamp_sigma(-0.24, 1.0, 20), 0.05);
  EXPECT_DOUBLE_EQ(clamp_sigma(0.0, 2.0, 16), 0.25);
}

TEST(VarianceBounds, RandomizedFuzz) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::uniform_real_distribution<double> rpos(0.01, 3.0);
  std::uniform_int_distribution<std::size_t> dd(1, 200);
  for (int i = 0; i < 100000; ++i) {
    double a = u(rng), b = u(rng);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    const double mu = u(rng) * 2.0;
    const double s = estimate_sigma_sq(mu, a, b);
    ASSERT_LE(s, (b - a) * (b - a) / 4.0 * (1.0 + 1e-12) + 1e-15);
    const double R = rpos(rng);
    const std::size_t d = dd(rng);
    ASSERT_GE(clamp_sigma(s, R, d), R * R / static_cast<double>(d));
    // With μ in [a, b] and b - a <= 2R the estimate never exceeds R².
    const double Rb = (b - a) / 2.0 * (1.0 + rpos(rng));
    const double inside = a + (b - a) * (u(rng) + 5.0) / 10.0;
    ASSERT_LE(estimate_sigma_sq(inside, a, b), Rb * Rb);
  }
}

TEST(UpdateLinear, SingleUpdateFromInit) {
  Agent agent(small_config(PolicyKind::linucb, 4), 0);
  agent.update_linear(Vector{1.0, 0.0, 0.0, 0.0}, 1.0, 1.0);
  EXPECT_NEAR(agent.head().theta[0], 0.5, 1e-15);
  for (std::size_t i = 1; i < 4; ++i) EXPECT_EQ(agent.head().theta[i], 0.0);
}

TEST(UpdateLinear, BatchClosedForm) {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> w(0.05, 2.0);
  for (int seed = 0; seed < 5; ++seed) {
    auto c = small_config(PolicyKind::linucb_var, 5);
    c.lambda = 0.5 + seed;
    Agent agent(c, static_cast<std::uint64_t>(seed));
    Matrix a = Matrix::identity(5, c.lambda);
    Vector b(5, 0.0);
    for (int k = 0; k < 10; ++k) {
      Vector phi(5);
      for (auto& v : phi) v = g(rng);
      const double r = g(rng);
      const double s2 = w(rng);
      agent.update_linear(phi, r, s2);
      for (std::size_t i = 0; i < 5; ++i) {
        b[i] += phi[i] * r / s2;
        for (std::size_t j = 0; j < 5; ++j) a(i, j) += phi[i] * phi[j] / s2;
      }
      // A·θ = b, with A rebuilt from the running inverse.
      const Vector resid = matvec(direct_inverse(agent.head().a_inv), agent.head().theta);
      for (std::size_t i = 0; i < 5; ++i) EXPECT_LT(std::abs(resid[i] - agent.head().b[i]), 1e-8);
    }
    const Vector theta = matvec(direct_inverse(a), b);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(agent.head().theta[i], theta[i], 1e-8);
  }
}

TEST(UpdateLinear, UnitWeightsMatchUnweightedRecursion) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 1.0);
  Agent weighted(small_config(PolicyKind::linucb_var, 3), 0);
  Agent plain(small_config(PolicyKind::linucb, 3), 0);
  for (int k = 0; k < 20; ++k) {
    const Vector phi{g(rng), g(rng), g(rng)};
    const double r = g(rng);
    weighted.update_linear(phi, r, 1.0);
    plain.update_linear(phi, r, 1.0);
  }
  EXPECT_EQ(weighted.head().theta, plain.head().theta);
  EXPECT_EQ(weighted.head().a_inv, plain.head().a_inv);
}

TEST(UpdateLinear, ProbeWidthNeverIncreases) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> w(0.05, 3.0);
  Agent agent(small_config(PolicyKind::linucb_var, 4), 0);
  const Vector probe{0.3, -1.0, 0.5, 0.2};
  double prev = quadratic_form(probe, agent.head().a_inv);
  for (int k = 0; k < 100; ++k) {
    const Vector phi = k % 3 == 0 ? probe : Vector{g(rng), g(rng), g(rng), g(rng)};
    agent.update_linear(phi, g(rng), w(rng));
    const double q = quadratic_form(probe, agent.head().a_inv);
    EXPECT_LE(q, prev + 1e-12);
    prev = q;
  }
}

TEST(AlphaSchedule, Constant) {
  ExplorationSchedule s;
  s.alpha = 0.02;
  for (std::size_t t : {1u, 10u, 10000u}) EXPECT_EQ(alpha_at(s, t, 0.3), 0.02);
}

TEST(AlphaSchedule, TheoryMTermIsAdditive) {
  ExplorationSchedule s;
  s.kind = ExplorationSchedule::Kind::theory;
  s.lambda = 4.0;
  s.M = 0.0;
  const double base = alpha_at(s, 7, 0.8);
  s.M = 0.5;
  EXPECT_NEAR(alpha_at(s, 7, 0.8) - base, 1.0, 1e-12);
}

TEST(AlphaSchedule, TheoryRoundOneReference) {
  ExplorationSchedule s;
  s.kind = ExplorationSchedule::Kind::theory;
  s.d = 20;
  s.H = 100;
  s.K = 4;
  s.lambda = 1.0;
  s.M = 0.1;
  s.delta = 0.1;
  s.R = 1.0;
  // 40-digit evaluation of the closed form with mpmath.
  EXPECT_NEAR(alpha_at(s, 1, 1.0), 110.68020565598255, 1e-10);
}

TEST(Step, OracleFeedbackContract) {
  auto c = small_config(PolicyKind::neural_var_linucb);
  c.variance = VarianceMode::oracle_bound;
  Agent agent(c, 0);
  std::mt19937_64 rng(1);
  const auto ctx = random_contexts(3, 6, rng);
  auto pull = [](std::size_t) { return 0.5; };
  EXPECT_THROW(agent.step(ctx, pull, {}), ContractViolation);
  EXPECT_NO_THROW(agent.step(ctx, pull, StepFeedback{0.3, std::nullopt}));

  Agent est(small_config(PolicyKind::neural_var_linucb), 0);
  EXPECT_THROW(est.step(ctx, pull, StepFeedback{0.3, std::nullopt}), ContractViolation);
}

TEST(Step, SigmaBarRespectsFloor) {
  std::mt19937_64 rng(2);
  for (auto mode : {VarianceMode::estimated_bound, VarianceMode::predictive_variance}) {
    auto c = small_config(PolicyKind::neural_var_linucb);
    c.variance = mode;
    c.R = 1.5;
    Agent agent(c, 3);
    for (int t = 0; t < 60; ++t) {
      const auto rec = agent.step(random_contexts(4, 6, rng), [&](std::size_t) { return 3.0 * (t % 2); },
                                  StepFeedback{std::nullopt, RewardRange{0.0, 1.0}});
      ASSERT_TRUE(rec.sigma_bar_sq && rec.sigma_hat_sq);
      EXPECT_GE(*rec.sigma_bar_sq, 1.5 * 1.5 / 4.0);
      if (mode == VarianceMode::estimated_bound) {
        EXPECT_LE(*rec.sigma_hat_sq, 0.25);
      }
    }
  }
}

TEST(Step, UnitSourceMatchesNeuralLinUcb) {
  std::mt19937_64 rng(3);
  auto cv = small_config(PolicyKind::neural_var_linucb);
  cv.variance = VarianceMode::unit;
  Agent var_agent(cv, 9);
  Agent lin_agent(small_config(PolicyKind::neural_linucb), 9);
  for (int t = 0; t < 100; ++t) {
    const auto ctx = random_contexts(4, 6, rng);
    auto pull = [&](std::size_t k) { return std::sin(static_cast<double>(t + k)); };
    const auto a = var_agent.step(ctx, pull);
    const auto b = lin_agent.step(ctx, pull);
    ASSERT_EQ(a.arm, b.arm) << "round " << t;
    EXPECT_EQ(a.mean_est, b.mean_est);
  }
  EXPECT_EQ(var_agent.net(), lin_agent.net());
}

TEST(Step, ScalingEquivalence) {
  for (double c : {0.5, 2.0}) {
    for (std::uint64_t seed : {0u, 1u, 2u}) {
      SyntheticEnvConfig ec;
      ec.d = 6;
      ec.horizon = 200;
      SyntheticEnv env(ec, seed);

      auto cv = small_config(PolicyKind::neural_var_linucb);
      cv.variance = VarianceMode::oracle_bound;
      cv.lambda = 1.0;
      cv.R = 0.1;
      cv.exploration.alpha = 0.3;
      cv.train_period = 1000;  // frozen net
      auto cl = small_config(PolicyKind::neural_linucb);
      cl.lambda = 1.0 * c * c;
      cl.exploration.alpha = 0.3 * c;
      cl.train_period = 1000;
      Agent var_agent(cv, seed);
      Agent lin_agent(cl, seed);
      for (std::size_t t = 1; t <= 200; ++t) {
        const auto& obs = env.sample_contexts(t);
        const auto a = var_agent.step(obs.contexts, [&](std::size_t k) { return env.reward_value(k); },
                                      StepFeedback{c * c, std::nullopt});
        const auto b = lin_agent.step(obs.contexts, [&](std::size_t k) { return env.reward_value(k); });
        ASSERT_EQ(a.arm, b.arm) << "c=" << c << " seed=" << seed << " round " << t;
      }
    }
  }
}

TEST(Step, LongTrainPeriodFreezesNet) {
  auto c = small_config(PolicyKind::neural_var_linucb);
  c.train_period = 500;
  Agent agent(c, 4);
  const FeatureNet before = agent.net();
  std::mt19937_64 rng(4);
  for (int t = 0; t < 100; ++t)
    agent.step(random_contexts(3, 6, rng), [](std::size_t) { return 0.2; },
               StepFeedback{std::nullopt, RewardRange{0.0, 1.0}});
  EXPECT_EQ(agent.net(), before);
}

TEST(Step, WarmupDelaysTraining) {
  auto c = small_config(PolicyKind::neural_linucb);
  c.warmup = 35;
  Agent agent(c, 4);
  std::mt19937_64 rng(5);
  for (std::size_t t = 1; t <= 60; ++t) {
    const auto rec = agent.step(random_contexts(3, 6, rng), [](std::size_t) { return 0.2; });
    EXPECT_EQ(rec.trained, t >= 35 && t % 10 == 0) << t;
  }
}

// Golden transcript: regenerate with NVLUCB_WRITE_GOLDEN=1.
std::string transcript() {
  auto c = small_config(PolicyKind::neural_var_linucb, 5);
  c.warmup = 20;
  SyntheticEnvConfig ec;
  ec.d = 5;
  ec.arms = 3;
  ec.horizon = 50;
  SyntheticEnv env(ec, 42);
  Agent agent(c, 42);
  std::ostringstream out;
  char buf[256];
  for (std::size_t t = 1; t <= 50; ++t) {
    const auto& obs = env.sample_contexts(t);
    const auto r = agent.step(obs.contexts, [&](std::size_t k) { return env.reward_value(k); },
                              StepFeedback{std::nullopt, obs.reward_range});
    std::snprintf(buf, sizeof buf, "%zu %zu %.17g %.17g %.17g %.17g %.17g %d\n", r.t, r.arm, r.reward,
                  r.mean_est, r.ucb_width, *r.sigma_hat_sq, *r.sigma_bar_sq, r.trained ? 1 : 0);
    out << buf;
  }
  return out.str();
}

TEST(Step, GoldenTranscript) {
  const std::string path = std::string(NVLUCB_TEST_DATA) + "/golden_transcript.txt";
  const std::string got = transcript();
  if (std::getenv("NVLUCB_WRITE_GOLDEN")) {
    std::ofstream(path) << got;
    GTEST_SKIP() << "golden transcript written";
  }
  std::ifstream in(path);
  ASSERT_TRUE(in) << "missing " << path;
  std::istringstream want_s(std::string(std::istreambuf_iterator<char>(in), {}));
  std::istringstream got_s(got);
  std::string want_line, got_line;
  int rows = 0;
  while (std::getline(want_s, want_line)) {
    ASSERT_TRUE(std::getline(got_s, got_line));
    std::istringstream w(want_line), g(got_line);
    for (int field = 0; field < 8; ++field) {
      double a = 0, b = 0;
      w >> a;
      g >> b;
      EXPECT_NEAR(a, b, 1e-9 * std::max(1.0, std::abs(a))) << "row " << rows << " field " << field;
    }
    ++rows;
  }
  EXPECT_EQ(rows, 50);
}

// Reference NeuralUCB scores from the network definition directly.
struct GradientReference {
  Vector f;
  std::vector<Vector> g;
};

GradientReference reference_gradients(const FeatureNet& net, const Vector& theta,
                                      const std::vector<Vector>& ctx) {
  GradientReference out;
  for (const auto& x : ctx) {
    // Forward with stored activations.
    std::vector<Vector> acts{x};
    for (const auto& w : net.weights) {
      Vector n(w.rows(), 0.0);
      for (std::size_t i = 0; i < w.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < w.cols(); ++j) s += w(i, j) * acts.back()[j];
        n[i] = std::max(s, 0.0);
      }
      acts.push_back(n);
    }
    double f = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) f += theta[i] * net.output_scale * acts.back()[i];
    // Backward.
    std::vector<Vector> grads(net.depth());
    Vector delta(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i)
      delta[i] = acts.back()[i] > 0.0 ? theta[i] * net.output_scale : 0.0;
    for (std::size_t l = net.depth(); l-- > 0;) {
      const auto& w = net.weights[l];
      Vector gl(w.rows() * w.cols());
      for (std::size_t i = 0; i < w.rows(); ++i)
        for (std::size_t j = 0; j < w.cols(); ++j) gl[i * w.cols() + j] = delta[i] * acts[l][j];
      grads[l] = gl;
      Vector prev(w.cols(), 0.0);
      for (std::size_t j = 0; j < w.cols(); ++j) {
        for (std::size_t i = 0; i < w.rows(); ++i) prev[j] += w(i, j) * delta[i];
        if (!(acts[l][j] > 0.0)) prev[j] = 0.0;
      }
      delta = prev;
    }
    Vector flat;
    for (const auto& gl : grads) flat.insert(flat.end(), gl.begin(), gl.end());
    out.f.push_back(f);
    out.g.push_back(flat);
  }
  return out;
}

TEST(NeuralUcb, ZeroGammaIsGreedy) {
  auto c = small_config(PolicyKind::neural_ucb);
  c.exploration.alpha = 0.0;
  Agent agent(c, 1);
  std::mt19937_64 rng(6);
  for (int t = 0; t < 20; ++t) {
    const auto ctx = random_contexts(4, 6, rng);
    const auto ref = reference_gradients(agent.net(), agent.head().theta, ctx);
    const auto best = std::max_element(ref.f.begin(), ref.f.end()) - ref.f.begin();
    EXPECT_EQ(agent.neural_ucb_select(ctx).arm, static_cast<std::size_t>(best));
  }
}

TEST(NeuralUcb, IdenticalGradientsDecidedByMean) {
  // One layer, unit-norm inputs: every arm gets the same bonus on a fresh Z.
  auto c = small_config(PolicyKind::neural_ucb, 2);
  c.depth = 1;
  c.feature_dim = 1;
  Agent agent(c, 2);
  FeatureNet net = agent.net();
  net.weights[0](0, 0) = 1.0;
  net.weights[0](0, 1) = 1.0;
  agent.set_net(net);
  LinearHead h = head_with_theta({1.0});
  agent.set_head(h);
  const std::vector<Vector> ctx{{0.6, 0.8}, {0.8, 0.6}, {0.0, 1.0}};
  const Selection s = agent.neural_ucb_select(ctx);
  const double w0 = s.scores[0] - 1.4 * net.output_scale;
  const double w2 = s.scores[2] - 1.0 * net.output_scale;
  EXPECT_NEAR(w0, w2, 1e-12);
  EXPECT_EQ(s.arm, 0u);
}

TEST(NeuralUcb, ScriptedRoundsMatchReference) {
  auto c = small_config(PolicyKind::neural_ucb);
  c.train_period = 1000;
  Agent agent(c, 3);
  Vector z(agent.net().parameter_count(), c.lambda);
  std::mt19937_64 rng(7);
  const double m = static_cast<double>(c.hidden_width);
  for (int t = 0; t < 5; ++t) {
    const auto ctx = random_contexts(4, 6, rng);
    const auto ref = reference_gradients(agent.net(), agent.head().theta, ctx);
    std::vector<double> scores;
    for (std::size_t k = 0; k < ctx.size(); ++k) {
      double q = 0.0;
      for (std::size_t i = 0; i < z.size(); ++i) q += ref.g[k][i] * ref.g[k][i] / z[i];
      scores.push_back(ref.f[k] + c.exploration.alpha * std::sqrt(q / m));
    }
    const auto rec = agent.step(ctx, [](std::size_t k) { return 0.1 * static_cast<double>(k); });
    const auto best = static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin());
    ASSERT_EQ(rec.arm, best);
    EXPECT_NEAR(rec.mean_est + rec.ucb_width, scores[best], 1e-10);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += ref.g[best][i] * ref.g[best][i] / m;
    for (std::size_t i = 0; i < z.size(); ++i) ASSERT_NEAR(agent.z_diag()[i], z[i], 1e-10);
  }
}

TEST(NeuralTs, ZeroNuIsGreedy) {
  auto c = small_config(PolicyKind::neural_ts);
  c.exploration.alpha = 0.0;
  Agent agent(c, 1);
  std::mt19937_64 rng(8);
  for (int t = 0; t < 20; ++t) {
    const auto ctx = random_contexts(4, 6, rng);
    const auto ref = reference_gradients(agent.net(), agent.head().theta, ctx);
    const auto best = std::max_element(ref.f.begin(), ref.f.end()) - ref.f.begin();
    EXPECT_EQ(agent.neural_ts_select(ctx).arm, static_cast<std::size_t>(best));
  }
}

TEST(NeuralTs, ReproducibleForSeed) {
  auto run = [] {
    Agent agent(small_config(PolicyKind::neural_ts), 11);
    std::mt19937_64 rng(9);
    std::vector<std::size_t> arms;
    for (int t = 0; t < 40; ++t)
      arms.push_back(agent.step(random_contexts(4, 6, rng), [](std::size_t k) { return 0.3 * k; }).arm);
    return arms;
  };
  EXPECT_EQ(run(), run());
}

TEST(NeuralTs, SampledScoresCenteredOnMean) {
  auto c = small_config(PolicyKind::neural_ts);
  c.exploration.alpha = 1.0;
  Agent agent(c, 12);
  std::mt19937_64 rng(10);
  const auto ctx = random_contexts(3, 6, rng);
  const auto ref = reference_gradients(agent.net(), agent.head().theta, ctx);
  const int draws = 10000;
  std::vector<double> mean(ctx.size(), 0.0);
  for (int i = 0; i < draws; ++i) {
    const Selection s = agent.neural_ts_select(ctx);
    for (std::size_t k = 0; k < ctx.size(); ++k) mean[k] += s.scores[k] / draws;
  }
  const double m = static_cast<double>(c.hidden_width);
  for (std::size_t k = 0; k < ctx.size(); ++k) {
    double q = 0.0;
    for (std::size_t i = 0; i < ref.g[k].size(); ++i) q += ref.g[k][i] * ref.g[k][i] / c.lambda;
    const double sd = std::sqrt(q / m);
    EXPECT_LT(std::abs(mean[k] - ref.f[k]), 3.0 * sd / std::sqrt(static_cast<double>(draws)));
  }
}

TEST(Forecast, MatchesSelectionOfChosenArm) {
  Agent agent(small_config(PolicyKind::neural_var_linucb), 13);
  std::mt19937_64 rng(11);
  const auto ctx = random_contexts(4, 6, rng);
  const Selection s = agent.select_arm(ctx);
  const Forecast f = agent.forecast(ctx[s.arm]);
  EXPECT_DOUBLE_EQ(f.mean, s.mean_est);
  EXPECT_DOUBLE_EQ(f.std, s.width);
}

TEST(AgentConfig, Validation) {
  auto c = small_config(PolicyKind::neural_var_linucb);
  c.lambda = 0.0;
  EXPECT_THROW(Agent(c, 0), ContractViolation);
  c = small_config(PolicyKind::neural_var_linucb);
  c.reward_range = {1.0, 1.0};
  EXPECT_THROW(Agent(c, 0), ContractViolation);
  c = small_config(PolicyKind::neural_var_linucb);
  c.train_period = 0;
  EXPECT_THROW(Agent(c, 0), ContractViolation);
}

TEST(Names, RoundTrip) {
  for (auto p : {PolicyKind::linucb, PolicyKind::linucb_var, PolicyKind::neural_lingreedy,
                 PolicyKind::neural_linucb, PolicyKind::neural_var_linucb, PolicyKind::neural_ucb,
                 PolicyKind::neural_ts})
    EXPECT_EQ(parse_policy(to_string(p)), p);
  for (auto v : {VarianceMode::unit, VarianceMode::oracle_bound, VarianceMode::oracle_true_var,
                 VarianceMode::estimated_bound, VarianceMode::predictive_variance})
    EXPECT_EQ(parse_variance_mode(to_string(v)), v);
  EXPECT_FALSE(parse_policy("neural_lin_ucb"));
}

}  // namespace
}  // namespace nvlucb
