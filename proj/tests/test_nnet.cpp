#include <gtest/gtest.h>

#include <chrono>
#include <cmath>

#include "oracles.hpp"
#include "sentiscore/nnet.hpp"

using namespace sentiscore;
using namespace sentiscore::nnet;

namespace {

ModelConfig small_config(double dropout = 0.0) { return ModelConfig{20, 8, 5, dropout, 6}; }

LstmWeights<double> scalar_weights() {
  return {{0.1, 0.2, 0.3, 0.4}, {-0.1, 0.5, -0.3, 0.2}, {0.0, 1.0, 0.0, 0.0}};
}

std::vector<TokenSequence> random_batch(const ModelConfig& cfg, std::size_t n, std::uint64_t seed) {
  Xoshiro256pp rng(seed);
  std::vector<TokenSequence> out;
  for (std::size_t b = 0; b < n; ++b) {
    std::vector<TokenId> ids(1 + rng.below(cfg.seq_len));
    for (auto& id : ids) id = static_cast<TokenId>(1 + rng.below(cfg.vocab_size - 1));
    out.push_back(pad_truncate(ids, cfg.seq_len));
  }
  return out;
}

template <class T>
ModelParams<T> train_steps(const ModelConfig& cfg, int steps, std::uint64_t seed) {
  auto params = init_params<T>(cfg, seed);
  auto state = AdamState<T>::create(cfg, 0.01);
  Xoshiro256pp rng(seed + 1);
  const auto batch = random_batch(cfg, 8, seed + 2);
  std::vector<T> targets(batch.size());
  for (std::size_t i = 0; i < targets.size(); ++i) targets[i] = static_cast<T>(0.1 * static_cast<double>(i));
  ForwardOptions<T> fo;
  fo.mode = Mode::train;
  fo.rng = &rng;
  for (int s = 0; s < steps; ++s) {
    const auto r = forward<T>(batch, params, fo);
    const auto g = backward<T>(*r.cache, targets, params);
    adam_step(params, g, state);
  }
  return params;
}

}  // namespace

TEST(ModelConfig, Validation) {
  EXPECT_NO_THROW(small_config().validate());
  EXPECT_THROW((ModelConfig{1, 8, 5, 0.0, 6}.validate()), PreconditionError);
  EXPECT_THROW((ModelConfig{20, 0, 5, 0.0, 6}.validate()), PreconditionError);
  EXPECT_THROW((ModelConfig{20, 8, 5, 1.0, 6}.validate()), PreconditionError);
  EXPECT_THROW((ModelConfig{20, 8, 5, -0.1, 6}.validate()), PreconditionError);
  EXPECT_EQ(small_config().feature_dim(), 10u);
}

TEST(InitParams, DeterministicAndStructured) {
  const auto cfg = small_config();
  const auto a = init_params<float>(cfg, 7);
  const auto b = init_params<float>(cfg, 7);
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(a == init_params<float>(cfg, 8));
  for (std::size_t k = 0; k < cfg.embed_dim; ++k) EXPECT_EQ(a.embedding[k], 0.0f);
  for (std::size_t k = cfg.embed_dim; k < a.embedding.size(); ++k) EXPECT_LE(std::abs(a.embedding[k]), 0.05f);
  const std::size_t H = cfg.lstm_units;
  for (const auto* dir : {&a.fwd, &a.bwd}) {
    for (std::size_t r = 0; r < 4 * H; ++r) EXPECT_EQ(dir->b[r], r / H == kForgetGate ? 1.0f : 0.0f);
    const float bound = std::sqrt(6.0f / static_cast<float>(cfg.embed_dim + H));
    for (float w : dir->W) EXPECT_LE(std::abs(w), bound);
  }
  EXPECT_EQ(a.b_out[0], 0.0f);
  EXPECT_EQ(a.parameter_count(), 20u * 8 + 2 * (20 * 8 + 20 * 5 + 20) + 10 + 1);
}

TEST(LstmCell, ZeroWeightsGiveZeroState) {
  LstmWeights<double> w{std::vector<double>(16, 0.0), std::vector<double>(16, 0.0), std::vector<double>(8, 0.0)};
  const std::vector<double> x = {1.0, -2.0}, h = {0.3, 0.4}, c = {0.0, 0.0};
  const auto out = lstm_cell_forward<double>(x, h, c, w);
  EXPECT_EQ(out.h, (std::vector<double>{0.0, 0.0}));
  EXPECT_EQ(out.c, (std::vector<double>{0.0, 0.0}));
}

TEST(LstmCell, SaturatedGatesKeepMemory) {
  LstmWeights<double> w{{0, 0, 0, 0}, {0, 0, 0, 0}, {-1000.0, 1000.0, 0.0, 0.0}};
  const std::vector<double> x = {0.7}, h = {0.2}, c = {0.35};
  const auto out = lstm_cell_forward<double>(x, h, c, w);
  EXPECT_EQ(out.c[0], 0.35);
  EXPECT_DOUBLE_EQ(out.h[0], 0.5 * std::tanh(0.35));
}

TEST(LstmCell, ScalarHandComputation) {
  const std::vector<double> x = {0.5}, h = {0.1}, c = {0.2};
  const auto out = lstm_cell_forward<double>(x, h, c, scalar_weights());
  EXPECT_NEAR(out.h[0], 0.11631196947514087, 1e-15);
  EXPECT_NEAR(out.c[0], 0.21280994643143467, 1e-15);
}

TEST(LstmCell, ShapeMismatchThrows) {
  const std::vector<double> x = {0.5, 0.1}, h = {0.1}, c = {0.2};
  EXPECT_THROW(lstm_cell_forward<double>(x, h, c, scalar_weights()), PreconditionError);
}

TEST(BiLstm, ZeroParamsGiveZeroFeature) {
  const auto p = ModelParams<double>::zeros(small_config());
  const std::vector<double> emb(6 * 8, 0.3);
  EXPECT_EQ(bilstm_forward<double>(emb, p), std::vector<double>(10, 0.0));
}

TEST(BiLstm, ComposesTwoCellSteps) {
  auto p = ModelParams<double>::zeros(ModelConfig{2, 1, 1, 0.0, 2});
  p.fwd = scalar_weights();
  p.bwd = scalar_weights();
  const std::vector<double> emb = {0.5, -1.0};
  const auto f = bilstm_forward<double>(emb, p);
  EXPECT_NEAR(f[0], -0.03640823737066192, 1e-15);
  EXPECT_NEAR(f[1], -0.010007946817155142, 1e-15);

  const std::vector<double> z = {0.0}, x0 = {0.5}, x1 = {-1.0};
  const auto s1 = lstm_cell_forward<double>(x0, z, z, p.fwd);
  const auto s2 = lstm_cell_forward<double>(x1, s1.h, s1.c, p.fwd);
  EXPECT_EQ(f[0], s2.h[0]);
}

TEST(BiLstm, PalindromeWithSymmetricWeights) {
  auto p = init_params<double>(small_config(), 3);
  p.bwd = p.fwd;
  TokenSequence seq{{4, 9, 2, 2, 9, 4}, 6};
  std::vector<double> emb;
  for (auto id : seq.ids) emb.insert(emb.end(), &p.embedding[id * 8], &p.embedding[id * 8] + 8);
  const auto f = bilstm_forward<double>(emb, p);
  for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(f[j], f[5 + j]);
}

TEST(Forward, TrainAndEvalAgreeWithoutDropout) {
  const auto cfg = small_config();
  const auto p = init_params<double>(cfg, 5);
  const auto batch = random_batch(cfg, 6, 1);
  ForwardOptions<double> fo;
  fo.mode = Mode::train;
  const auto tr = forward<double>(batch, p, fo);
  const auto ev = forward<double>(batch, p);
  EXPECT_EQ(tr.predictions, ev.predictions);
  EXPECT_TRUE(tr.cache.has_value());
  EXPECT_FALSE(ev.cache.has_value());
}

TEST(Forward, AllKeepMaskDoublesFeaturePath) {
  auto cfg = small_config(0.5);
  auto p = init_params<double>(cfg, 5);
  p.b_out[0] = 0.0;
  const auto batch = random_batch(cfg, 3, 2);
  const std::vector<double> mask(3 * cfg.feature_dim(), 2.0);
  ForwardOptions<double> fo;
  fo.mode = Mode::train;
  fo.frozen_mask = mask;
  const auto tr = forward<double>(batch, p, fo);
  const auto ev = forward<double>(batch, p);
  for (std::size_t b = 0; b < 3; ++b) EXPECT_NEAR(tr.predictions[b], 2.0 * ev.predictions[b], 1e-14);
}

TEST(Forward, ZeroParamsPredictZero) {
  const auto cfg = small_config();
  const auto p = ModelParams<double>::zeros(cfg);
  for (double y : forward<double>(random_batch(cfg, 5, 3), p).predictions) EXPECT_EQ(y, 0.0);
}

TEST(Forward, RejectsBadSequences) {
  const auto cfg = small_config();
  const auto p = init_params<double>(cfg, 1);
  std::vector<TokenSequence> bad = {TokenSequence{{0, 0, 0, 0, 0, 20}, 1}};
  EXPECT_THROW(forward<double>(bad, p), PreconditionError);
  std::vector<TokenSequence> short_seq = {TokenSequence{{2, 3}, 2}};
  EXPECT_THROW(forward<double>(short_seq, p), PreconditionError);
  ForwardOptions<double> fo;
  fo.mode = Mode::train;
  const auto pd = init_params<double>(small_config(0.3), 1);
  EXPECT_THROW(forward<double>(random_batch(cfg, 2, 1), pd, fo), PreconditionError);
}

TEST(Forward, DropoutExpectationMatchesEval) {
  const auto cfg = small_config(0.4);
  const auto p = init_params<double>(cfg, 9);
  const auto batch = random_batch(cfg, 1, 4);
  const double eval = forward<double>(batch, p).predictions[0];
  Xoshiro256pp rng(123);
  ForwardOptions<double> fo;
  fo.mode = Mode::train;
  fo.rng = &rng;
  const int n = 20000;
  double sum = 0, sum2 = 0;
  for (int i = 0; i < n; ++i) {
    const double y = forward<double>(batch, p, fo).predictions[0];
    sum += y;
    sum2 += y * y;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sum2 / n - mean * mean) / n);
  EXPECT_LT(std::abs(mean - eval), 3.0 * se);
}

TEST(MseLoss, Examples) {
  const std::vector<double> a = {0.3, 0.6};
  EXPECT_EQ(mse_loss<double>(a, a), 0.0);
  EXPECT_EQ(mse_loss<double>(std::vector<double>{1.0, -1.0}, std::vector<double>{0.0, 0.0}), 1.0);
  EXPECT_NEAR(mse_loss<double>(std::vector<double>{0.2, 0.8}, std::vector<double>{0.0, 1.0}), 0.04, 1e-15);
  EXPECT_THROW(mse_loss<double>(std::vector<double>{}, std::vector<double>{}), PreconditionError);
  EXPECT_THROW(mse_loss<double>(a, std::vector<double>{1.0}), PreconditionError);
}

TEST(Backward, OutputBiasGradient) {
  const auto cfg = small_config();
  const auto p = init_params<double>(cfg, 11);
  const auto batch = random_batch(cfg, 5, 6);
  const std::vector<double> targets = {0.1, 0.9, 0.5, 0.0, 1.0};
  ForwardOptions<double> fo;
  fo.mode = Mode::train;
  const auto r = forward<double>(batch, p, fo);
  const auto g = backward<double>(*r.cache, targets, p);
  double expected = 0;
  for (std::size_t b = 0; b < 5; ++b) expected += 2.0 * (r.predictions[b] - targets[b]);
  EXPECT_NEAR(g.b_out[0], expected / 5.0, 1e-14);
  for (std::size_t k = 0; k < cfg.embed_dim; ++k) EXPECT_EQ(g.embedding[k], 0.0);
}

TEST(Backward, PerfectFitHasZeroGradient) {
  const auto cfg = small_config();
  const auto p = init_params<double>(cfg, 11);
  const auto batch = random_batch(cfg, 4, 7);
  ForwardOptions<double> fo;
  fo.mode = Mode::train;
  const auto r = forward<double>(batch, p, fo);
  const auto g = backward<double>(*r.cache, r.predictions, p);
  EXPECT_TRUE(g == ModelParams<double>::zeros(cfg));
  EXPECT_THROW(backward<double>(*r.cache, std::vector<double>{0.0}, p), PreconditionError);
}

namespace {
double quadratic_grad(double w) { return 2.0 * (w - 3.0); }

// Adam on the output bias of a one-unit model; every other gradient is zero.
std::vector<double> library_adam_trace(int steps) {
  const ModelConfig cfg{2, 1, 1, 0.0, 1};
  auto p = ModelParams<double>::zeros(cfg);
  auto state = AdamState<double>::create(cfg, 0.001);
  std::vector<double> out;
  for (int t = 0; t < steps; ++t) {
    auto g = ModelParams<double>::zeros(cfg);
    g.b_out[0] = quadratic_grad(p.b_out[0]);
    adam_step(p, g, state);
    out.push_back(p.b_out[0]);
  }
  return out;
}
}  // namespace

TEST(Adam, FirstStepClosedForm) {
  EXPECT_NEAR(library_adam_trace(1)[0], 0.001 * 6.0 / (6.0 + 1e-8), 1e-12);
}

TEST(Adam, MatchesReferenceTrace) {
  const auto lib = library_adam_trace(10);
  const auto ref = oracle::adam_trace(0.0, 0.001, 10, quadratic_grad);
  for (std::size_t t = 0; t < 10; ++t) EXPECT_NEAR(lib[t], ref[t], 1e-12) << t;
}

TEST(Adam, ZeroGradientLeavesParamsAndCountsStep) {
  const auto cfg = small_config();
  auto p = init_params<double>(cfg, 2);
  const auto before = p;
  auto state = AdamState<double>::create(cfg, 0.01);
  adam_step(p, ModelParams<double>::zeros(cfg), state);
  EXPECT_TRUE(p == before);
  EXPECT_EQ(state.step, 1u);
}

TEST(Adam, NonFiniteGradientNamesArray) {
  const auto cfg = small_config();
  auto p = init_params<double>(cfg, 2);
  const auto before = p;
  auto state = AdamState<double>::create(cfg, 0.01);
  auto g = ModelParams<double>::zeros(cfg);
  g.fwd.U[3] = std::numeric_limits<double>::quiet_NaN();
  try {
    adam_step(p, g, state);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("U_fwd"), std::string::npos);
  }
  EXPECT_TRUE(p == before);
  EXPECT_EQ(state.step, 0u);
}

TEST(GradientCheck, SmallConfigPasses) {
  const auto start = std::chrono::steady_clock::now();
  const auto report = gradient_check(small_config(), 42, 1e-4);
  const auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_TRUE(report.passed) << report.max_relative_error << " at " << report.worst_array << "["
                             << report.worst_index << "]";
  EXPECT_EQ(report.coordinates, ModelParams<double>::zeros(small_config()).parameter_count() - 8);
  EXPECT_LT(secs, 30.0);
}

TEST(GradientCheck, DetectsCorruptedDenseGradient) {
  GradientCheckOptions opts;
  opts.tamper = [](ModelParams<double>& g) {
    for (auto& x : g.w_out) x *= 2.0;
  };
  const auto report = gradient_check(small_config(), 42, 1e-4, opts);
  EXPECT_FALSE(report.passed);
  EXPECT_EQ(report.worst_array, "w_out");
  EXPECT_NEAR(report.max_relative_error, 0.5, 1e-4);
}

TEST(GradientCheck, DropoutNeedsFrozenMask) {
  EXPECT_THROW(gradient_check(small_config(0.5), 42, 1e-4), PreconditionError);
}

TEST(GradientCheck, PassesWithFrozenMask) {
  const auto cfg = small_config(0.5);
  GradientCheckOptions opts;
  Xoshiro256pp rng(77);
  for (std::size_t k = 0; k < opts.batch_size * cfg.feature_dim(); ++k) {
    opts.frozen_mask.push_back(rng.bernoulli(0.5) ? 0.0 : 2.0);
  }
  const auto report = gradient_check(cfg, 42, 1e-4, opts);
  EXPECT_TRUE(report.passed) << report.max_relative_error << " at " << report.worst_array;
}

TEST(Training, DeterministicInBothWidths) {
  const auto cfg = small_config(0.3);
  EXPECT_TRUE(train_steps<float>(cfg, 15, 5) == train_steps<float>(cfg, 15, 5));
  EXPECT_TRUE(train_steps<double>(cfg, 15, 5) == train_steps<double>(cfg, 15, 5));
}

TEST(Training, PadRowStaysZero) {
  const auto p = train_steps<float>(small_config(0.2), 40, 9);
  for (std::size_t k = 0; k < 8; ++k) EXPECT_EQ(p.embedding[k], 0.0f);
}

TEST(Params, CastRoundTrip) {
  const auto p = init_params<float>(small_config(), 4);
  EXPECT_TRUE(p.cast<double>().cast<float>() == p);
}
