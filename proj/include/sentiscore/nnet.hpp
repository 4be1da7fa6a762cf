#pragma once

// Embedding -> bidirectional LSTM -> dropout -> linear unit regressor with
// hand-written reverse-mode gradients, MSE loss, Adam and a finite-difference
// gradient checker.
//
// Every routine is templated on the scalar type: training runs in float, the
// gradient checker in double.
//
// Layouts (all row-major, contiguous):
//   embedding  V x D, row 0 is the PAD vector and is held at zero
//   W          4H x D, rows grouped by gate block [i, f, g, o]
//   U          4H x H, same grouping
//   b          4H
//   w_out      2H, forward half first
//   b_out      1

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "rng.hpp"
#include "textprep.hpp"

namespace sentiscore::nnet {

struct ModelConfig {
  std::size_t vocab_size = 2;
  std::size_t embed_dim = 128;
  std::size_t lstm_units = 52;
  double dropout_rate = 0.0;
  std::size_t seq_len = kDefaultSeqLen;

  void validate() const {
    if (vocab_size < 2) throw PreconditionError("vocab_size must be at least 2");
    if (embed_dim < 1 || lstm_units < 1 || seq_len < 1) {
      throw PreconditionError("embed_dim, lstm_units and seq_len must be positive");
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw PreconditionError("dropout_rate must lie in [0,1)");
  }

  std::size_t gate_rows() const noexcept { return 4 * lstm_units; }
  std::size_t feature_dim() const noexcept { return 2 * lstm_units; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

enum Gate : std::size_t { kInputGate = 0, kForgetGate = 1, kCandidate = 2, kOutputGate = 3 };

template <class T>
struct LstmWeights {
  std::vector<T> W;
  std::vector<T> U;
  std::vector<T> b;

  friend bool operator==(const LstmWeights&, const LstmWeights&) = default;
};

template <class T>
struct NamedArray {
  std::string_view name;
  std::span<T> values;
};

template <class T>
struct ModelParams {
  ModelConfig config;
  std::vector<T> embedding;
  LstmWeights<T> fwd;
  LstmWeights<T> bwd;
  std::vector<T> w_out;
  std::vector<T> b_out;

  static ModelParams zeros(const ModelConfig& cfg) {
    cfg.validate();
    const std::size_t V = cfg.vocab_size, D = cfg.embed_dim, H = cfg.lstm_units;
    ModelParams p;
    p.config = cfg;
    p.embedding.assign(V * D, T{0});
    for (auto* dir : {&p.fwd, &p.bwd}) {
      dir->W.assign(4 * H * D, T{0});
      dir->U.assign(4 * H * H, T{0});
      dir->b.assign(4 * H, T{0});
    }
    p.w_out.assign(2 * H, T{0});
    p.b_out.assign(1, T{0});
    return p;
  }

  // Checkpoint order.
  std::array<NamedArray<T>, 9> arrays() {
    return {{{"embedding", embedding},
             {"W_fwd", fwd.W},
             {"U_fwd", fwd.U},
             {"b_fwd", fwd.b},
             {"W_bwd", bwd.W},
             {"U_bwd", bwd.U},
             {"b_bwd", bwd.b},
             {"w_out", w_out},
             {"b_out", b_out}}};
  }
  std::array<NamedArray<const T>, 9> arrays() const {
    return {{{"embedding", embedding},
             {"W_fwd", fwd.W},
             {"U_fwd", fwd.U},
             {"b_fwd", fwd.b},
             {"W_bwd", bwd.W},
             {"U_bwd", bwd.U},
             {"b_bwd", bwd.b},
             {"w_out", w_out},
             {"b_out", b_out}}};
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& a : arrays()) n += a.values.size();
    return n;
  }

  void zero_pad_row() { std::fill_n(embedding.begin(), config.embed_dim, T{0}); }

  template <class U>
  ModelParams<U> cast() const {
    ModelParams<U> out = ModelParams<U>::zeros(config);
    auto dst = out.arrays();
    const auto src = arrays();
    for (std::size_t a = 0; a < src.size(); ++a) {
      std::transform(src[a].values.begin(), src[a].values.end(), dst[a].values.begin(),
                     [](T x) { return static_cast<U>(x); });
    }
    return out;
  }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

template <class T>
ModelParams<T> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  auto p = ModelParams<T>::zeros(cfg);
  Xoshiro256pp rng(seed);
  const std::size_t D = cfg.embed_dim, H = cfg.lstm_units;
  for (std::size_t i = D; i < p.embedding.size(); ++i) p.embedding[i] = static_cast<T>(rng.uniform(-0.05, 0.05));
  const double w_bound = std::sqrt(6.0 / static_cast<double>(D + H));
  const double u_bound = std::sqrt(6.0 / static_cast<double>(2 * H));
  for (auto* dir : {&p.fwd, &p.bwd}) {
    for (auto& w : dir->W) w = static_cast<T>(rng.uniform(-w_bound, w_bound));
    for (auto& u : dir->U) u = static_cast<T>(rng.uniform(-u_bound, u_bound));
    std::fill_n(dir->b.begin() + kForgetGate * H, H, T{1});
  }
  const double out_bound = std::sqrt(6.0 / static_cast<double>(2 * H + 1));
  for (auto& w : p.w_out) w = static_cast<T>(rng.uniform(-out_bound, out_bound));
  return p;
}

namespace detail {

template <class T>
T sigmoid(T x) noexcept {
  return T{1} / (T{1} + std::exp(-x));
}

// Four independent partial sums, combined in a fixed order.
template <class T>
T dot(const T* a, const T* b, std::size_t n) noexcept {
  T s0{0}, s1{0}, s2{0}, s3{0};
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    s0 += a[k] * b[k];
    s1 += a[k + 1] * b[k + 1];
    s2 += a[k + 2] * b[k + 2];
    s3 += a[k + 3] * b[k + 3];
  }
  for (; k < n; ++k) s0 += a[k] * b[k];
  return (s0 + s1) + (s2 + s3);
}

template <class T>
void axpy(T alpha, const T* x, T* y, std::size_t n) noexcept {
  for (std::size_t k = 0; k < n; ++k) y[k] += alpha * x[k];
}

// One LSTM step. `x` may be null for an all-zero input. `gates` receives the
// post-activation values [i, f, g, o].
template <class T>
void cell_step(const LstmWeights<T>& w, std::size_t D, std::size_t H, const T* x, const T* h_prev, const T* c_prev,
               T* gates, T* h, T* c) noexcept {
  for (std::size_t r = 0; r < 4 * H; ++r) {
    T z = w.b[r];
    if (x) z += dot(&w.W[r * D], x, D);
    z += dot(&w.U[r * H], h_prev, H);
    gates[r] = (r / H == kCandidate) ? std::tanh(z) : sigmoid(z);
  }
  const T* gi = gates;
  const T* gf = gates + H;
  const T* gg = gates + 2 * H;
  const T* go = gates + 3 * H;
  for (std::size_t j = 0; j < H; ++j) {
    c[j] = gf[j] * c_prev[j] + gi[j] * gg[j];
    h[j] = go[j] * std::tanh(c[j]);
  }
}

}  // namespace detail

template <class T>
struct CellOutput {
  std::vector<T> h;
  std::vector<T> c;
};

template <class T>
CellOutput<T> lstm_cell_forward(std::span<const T> x, std::span<const T> h_prev, std::span<const T> c_prev,
                                const LstmWeights<T>& w) {
  const std::size_t H = h_prev.size();
  const std::size_t D = x.size();
  if (c_prev.size() != H || w.b.size() != 4 * H || w.W.size() != 4 * H * D || w.U.size() != 4 * H * H) {
    throw PreconditionError("lstm_cell_forward: inconsistent shapes");
  }
  CellOutput<T> out{std::vector<T>(H), std::vector<T>(H)};
  std::vector<T> gates(4 * H);
  detail::cell_step(w, D, H, x.data(), h_prev.data(), c_prev.data(), gates.data(), out.h.data(), out.c.data());
  return out;
}

// Per-direction activations in processing order (step s = 0 is the first
// step the chain takes).
template <class T>
struct DirectionCache {
  std::vector<TokenId> ids;  // input id consumed at each step
  std::vector<T> gates;      // steps x 4H
  std::vector<T> c;          // steps x H
  std::vector<T> h;          // steps x H
};

namespace detail {

// Runs one chain; `input(s)` returns the D-vector for step s or null for zero.
template <class T, class Input>
void run_chain(const LstmWeights<T>& w, std::size_t D, std::size_t H, std::size_t steps, Input&& input,
               DirectionCache<T>* cache, T* h_final) {
  std::vector<T> h_prev(H, T{0}), c_prev(H, T{0}), h(H), c(H), gates(4 * H);
  if (cache) {
    cache->gates.resize(steps * 4 * H);
    cache->c.resize(steps * H);
    cache->h.resize(steps * H);
  }
  for (std::size_t s = 0; s < steps; ++s) {
    T* g = cache ? &cache->gates[s * 4 * H] : gates.data();
    T* hs = cache ? &cache->h[s * H] : h.data();
    T* cs = cache ? &cache->c[s * H] : c.data();
    cell_step(w, D, H, input(s), h_prev.data(), c_prev.data(), g, hs, cs);
    std::copy_n(hs, H, h_prev.begin());
    std::copy_n(cs, H, c_prev.begin());
  }
  std::copy(h_prev.begin(), h_prev.end(), h_final);
}

}  // namespace detail

// Feature = [h_fwd after the last position, h_bwd after the first position]
// for an L x D embedded sequence.
template <class T>
std::vector<T> bilstm_forward(std::span<const T> embedded, const ModelParams<T>& params) {
  const std::size_t D = params.config.embed_dim, H = params.config.lstm_units;
  if (embedded.size() % D != 0) throw PreconditionError("bilstm_forward: embedded size is not a multiple of D");
  const std::size_t L = embedded.size() / D;
  std::vector<T> feature(2 * H);
  detail::run_chain<T>(params.fwd, D, H, L, [&](std::size_t s) { return &embedded[s * D]; }, nullptr,
                       feature.data());
  detail::run_chain<T>(params.bwd, D, H, L, [&](std::size_t s) { return &embedded[(L - 1 - s) * D]; }, nullptr,
                       feature.data() + H);
  return feature;
}

enum class Mode { train, eval };

template <class T>
struct ForwardCache {
  ModelConfig config;
  std::size_t batch = 0;
  std::vector<DirectionCache<T>> fwd;  // per sample
  std::vector<DirectionCache<T>> bwd;
  std::vector<T> mask;     // batch x 2H, 0 or 1/(1-p)
  std::vector<T> feature;  // batch x 2H, before dropout
  std::vector<T> predictions;
};

template <class T>
struct ForwardOptions {
  Mode mode = Mode::eval;
  Xoshiro256pp* rng = nullptr;      // required in train mode when p > 0
  std::span<const T> frozen_mask{};  // batch x 2H; replaces sampling when set
};

template <class T>
struct ForwardResult {
  std::vector<T> predictions;
  std::optional<ForwardCache<T>> cache;  // train mode only
};

namespace detail {

inline void check_sequence(const TokenSequence& seq, const ModelConfig& cfg) {
  if (seq.ids.size() != cfg.seq_len) {
    throw PreconditionError("sequence length " + std::to_string(seq.ids.size()) + " does not match model length " +
                            std::to_string(cfg.seq_len));
  }
  for (auto id : seq.ids) {
    if (id >= cfg.vocab_size) {
      throw PreconditionError("token id " + std::to_string(id) + " is outside the vocabulary of " +
                              std::to_string(cfg.vocab_size));
    }
  }
}

template <class T>
void sample_features(const TokenSequence& seq, const ModelParams<T>& p, DirectionCache<T>* fwd,
                     DirectionCache<T>* bwd, T* feature) {
  const std::size_t D = p.config.embed_dim, H = p.config.lstm_units, L = seq.ids.size();
  auto row = [&](TokenId id) -> const T* { return id == kPadId ? nullptr : &p.embedding[id * D]; };
  run_chain<T>(p.fwd, D, H, L, [&](std::size_t s) { return row(seq.ids[s]); }, fwd, feature);
  run_chain<T>(p.bwd, D, H, L, [&](std::size_t s) { return row(seq.ids[L - 1 - s]); }, bwd, feature + H);
  if (fwd) fwd->ids.assign(seq.ids.begin(), seq.ids.end());
  if (bwd) bwd->ids.assign(seq.ids.rbegin(), seq.ids.rend());
}

}  // namespace detail

// Eval-mode prediction for one sequence. Pure; safe to call concurrently.
template <class T>
T predict_one(const TokenSequence& seq, const ModelParams<T>& p) {
  detail::check_sequence(seq, p.config);
  std::vector<T> feature(p.config.feature_dim());
  detail::sample_features<T>(seq, p, nullptr, nullptr, feature.data());
  return detail::dot(p.w_out.data(), feature.data(), feature.size()) + p.b_out[0];
}

template <class T>
ForwardResult<T> forward(std::span<const TokenSequence> batch, const ModelParams<T>& p,
                         const ForwardOptions<T>& opts = {}) {
  const auto& cfg = p.config;
  const std::size_t F = cfg.feature_dim();
  const T p_drop = static_cast<T>(cfg.dropout_rate);
  const bool train = opts.mode == Mode::train;
  if (train && !opts.frozen_mask.empty() && opts.frozen_mask.size() != batch.size() * F) {
    throw PreconditionError("frozen dropout mask has the wrong size");
  }
  if (train && opts.frozen_mask.empty() && cfg.dropout_rate > 0.0 && !opts.rng) {
    throw PreconditionError("train-mode forward with dropout needs a random number generator");
  }
  ForwardResult<T> result;
  result.predictions.resize(batch.size());
  if (!train) {
    for (std::size_t b = 0; b < batch.size(); ++b) result.predictions[b] = predict_one(batch[b], p);
    return result;
  }
  ForwardCache<T> cache;
  cache.config = cfg;
  cache.batch = batch.size();
  cache.fwd.resize(batch.size());
  cache.bwd.resize(batch.size());
  cache.feature.resize(batch.size() * F);
  cache.mask.assign(batch.size() * F, T{1});
  const T keep_scale = T{1} / (T{1} - p_drop);
  std::vector<T> dropped(F);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    detail::check_sequence(batch[b], cfg);
    T* feature = &cache.feature[b * F];
    detail::sample_features<T>(batch[b], p, &cache.fwd[b], &cache.bwd[b], feature);
    T* mask = &cache.mask[b * F];
    if (!opts.frozen_mask.empty()) {
      std::copy_n(&opts.frozen_mask[b * F], F, mask);
    } else if (cfg.dropout_rate > 0.0) {
      for (std::size_t k = 0; k < F; ++k) mask[k] = opts.rng->bernoulli(cfg.dropout_rate) ? T{0} : keep_scale;
    }
    for (std::size_t k = 0; k < F; ++k) dropped[k] = feature[k] * mask[k];
    result.predictions[b] = detail::dot(p.w_out.data(), dropped.data(), F) + p.b_out[0];
  }
  cache.predictions = result.predictions;
  result.cache = std::move(cache);
  return result;
}

template <class T>
T mse_loss(std::span<const T> pred, std::span<const T> target) {
  if (pred.size() != target.size()) throw PreconditionError("mse_loss: length mismatch");
  if (pred.empty()) throw PreconditionError("mse_loss: empty batch");
  T sum{0};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const T e = pred[i] - target[i];
    sum += e * e;
  }
  return sum / static_cast<T>(pred.size());
}

namespace detail {

// Backpropagation through time for one chain given dL/dh at its last step.
// Accumulates into the direction's gradients and the embedding gradient.
template <class T>
void backprop_chain(const LstmWeights<T>& w, const DirectionCache<T>& cache, std::span<const T> embedding,
                    std::size_t D, std::size_t H, const T* dh_final, LstmWeights<T>& gw,
                    std::span<T> g_embedding) {
  const std::size_t steps = cache.ids.size();
  std::vector<T> dh(dh_final, dh_final + H), dc(H, T{0}), dz(4 * H), dh_prev(H), dx(D);
  const std::vector<T> zeros(H, T{0});
  for (std::size_t s = steps; s-- > 0;) {
    const T* gates = &cache.gates[s * 4 * H];
    const T* gi = gates;
    const T* gf = gates + H;
    const T* gg = gates + 2 * H;
    const T* go = gates + 3 * H;
    const T* c = &cache.c[s * H];
    const T* c_prev = s > 0 ? &cache.c[(s - 1) * H] : zeros.data();
    const T* h_prev = s > 0 ? &cache.h[(s - 1) * H] : zeros.data();
    for (std::size_t j = 0; j < H; ++j) {
      const T tc = std::tanh(c[j]);
      const T d_o = dh[j] * tc;
      const T d_c = dc[j] + dh[j] * go[j] * (T{1} - tc * tc);
      dc[j] = d_c * gf[j];
      dz[kInputGate * H + j] = d_c * gg[j] * gi[j] * (T{1} - gi[j]);
      dz[kForgetGate * H + j] = d_c * c_prev[j] * gf[j] * (T{1} - gf[j]);
      dz[kCandidate * H + j] = d_c * gi[j] * (T{1} - gg[j] * gg[j]);
      dz[kOutputGate * H + j] = d_o * go[j] * (T{1} - go[j]);
    }
    const TokenId id = cache.ids[s];
    const T* x = id == kPadId ? nullptr : &embedding[id * D];
    std::fill(dh_prev.begin(), dh_prev.end(), T{0});
    if (x) std::fill(dx.begin(), dx.end(), T{0});
    for (std::size_t r = 0; r < 4 * H; ++r) {
      const T d = dz[r];
      gw.b[r] += d;
      axpy(d, h_prev, &gw.U[r * H], H);
      axpy(d, &w.U[r * H], dh_prev.data(), H);
      if (x) {
        axpy(d, x, &gw.W[r * D], D);
        axpy(d, &w.W[r * D], dx.data(), D);
      }
    }
    if (x) axpy(T{1}, dx.data(), &g_embedding[id * D], D);
    dh.swap(dh_prev);
  }
}

}  // namespace detail

// Gradients of mse_loss over the cached batch with respect to every array.
// The PAD embedding row gradient is always zero.
template <class T>
ModelParams<T> backward(const ForwardCache<T>& cache, std::span<const T> targets, const ModelParams<T>& p) {
  if (targets.size() != cache.batch || cache.predictions.size() != cache.batch) {
    throw PreconditionError("backward: cache and targets disagree on batch size");
  }
  if (!(cache.config == p.config)) throw PreconditionError("backward: cache was produced by another model shape");
  const std::size_t D = p.config.embed_dim, H = p.config.lstm_units, F = p.config.feature_dim();
  auto g = ModelParams<T>::zeros(p.config);
  const T scale = T{2} / static_cast<T>(cache.batch);
  std::vector<T> dfeature(F);
  for (std::size_t b = 0; b < cache.batch; ++b) {
    const T dpred = scale * (cache.predictions[b] - targets[b]);
    const T* feature = &cache.feature[b * F];
    const T* mask = &cache.mask[b * F];
    g.b_out[0] += dpred;
    for (std::size_t k = 0; k < F; ++k) {
      g.w_out[k] += dpred * feature[k] * mask[k];
      dfeature[k] = dpred * p.w_out[k] * mask[k];
    }
    detail::backprop_chain<T>(p.fwd, cache.fwd[b], p.embedding, D, H, dfeature.data(), g.fwd, g.embedding);
    detail::backprop_chain<T>(p.bwd, cache.bwd[b], p.embedding, D, H, dfeature.data() + H, g.bwd, g.embedding);
  }
  g.zero_pad_row();
  return g;
}

template <class T>
struct AdamState {
  std::uint64_t step = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  ModelParams<T> m;
  ModelParams<T> v;

  static AdamState create(const ModelConfig& cfg, double learning_rate) {
    AdamState s;
    s.learning_rate = learning_rate;
    s.m = ModelParams<T>::zeros(cfg);
    s.v = ModelParams<T>::zeros(cfg);
    return s;
  }
};

// One Adam update with bias correction. Rejects non-finite gradients before
// touching any parameter.
template <class T>
void adam_step(ModelParams<T>& params, const ModelParams<T>& grads, AdamState<T>& state) {
  if (!(params.config == grads.config) || !(params.config == state.m.config)) {
    throw PreconditionError("adam_step: parameter, gradient and moment shapes differ");
  }
  for (const auto& g : grads.arrays()) {
    for (T x : g.values) {
      if (!std::isfinite(x)) throw NumericError("non-finite gradient in " + std::string(g.name));
    }
  }
  ++state.step;
  const auto t = static_cast<double>(state.step);
  const T b1 = static_cast<T>(state.beta1);
  const T b2 = static_cast<T>(state.beta2);
  const T c1 = static_cast<T>(1.0 - std::pow(state.beta1, t));
  const T c2 = static_cast<T>(1.0 - std::pow(state.beta2, t));
  const T lr = static_cast<T>(state.learning_rate);
  const T eps = static_cast<T>(state.epsilon);
  auto theta = params.arrays();
  const auto g = grads.arrays();
  auto m = state.m.arrays();
  auto v = state.v.arrays();
  for (std::size_t a = 0; a < theta.size(); ++a) {
    for (std::size_t k = 0; k < theta[a].values.size(); ++k) {
      const T gk = g[a].values[k];
      T& mk = m[a].values[k];
      T& vk = v[a].values[k];
      mk = b1 * mk + (T{1} - b1) * gk;
      vk = b2 * vk + (T{1} - b2) * gk * gk;
      const T m_hat = mk / c1;
      const T v_hat = vk / c2;
      theta[a].values[k] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
  params.zero_pad_row();
}

struct GradientCheckOptions {
  std::size_t batch_size = 4;
  double step = 1e-5;
  // Dropout mask (batch x 2H) held fixed for every evaluation. Required when
  // the config has a positive dropout rate.
  std::vector<double> frozen_mask;
  // Applied to the analytic gradients before comparison; fault injection.
  std::function<void(ModelParams<double>&)> tamper;
};

struct GradientCheckReport {
  bool passed = false;
  double max_relative_error = 0.0;
  std::string worst_array;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;
};

// Relative error with a floor on the denominator so that coordinates whose
// true gradient is essentially zero are compared in absolute terms.
inline double relative_error(double analytic, double numeric) noexcept {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

// Seeded random batch used by the gradient checker: pre-padded sequences with
// random true lengths and targets in [0,1].
struct CheckBatch {
  std::vector<TokenSequence> sequences;
  std::vector<double> targets;
};

inline CheckBatch make_check_batch(const ModelConfig& cfg, std::size_t batch_size, std::uint64_t seed) {
  Xoshiro256pp rng(derive_seed(seed, "gradient-check-batch"));
  CheckBatch batch;
  for (std::size_t b = 0; b < batch_size; ++b) {
    const std::size_t len = 1 + static_cast<std::size_t>(rng.below(cfg.seq_len));
    std::vector<TokenId> ids(len);
    for (auto& id : ids) id = static_cast<TokenId>(1 + rng.below(cfg.vocab_size - 1));
    batch.sequences.push_back(pad_truncate(ids, cfg.seq_len));
    batch.targets.push_back(rng.uniform());
  }
  return batch;
}

// Compares backward() with central differences over every trainable
// coordinate (the PAD embedding row is not trainable and is skipped).
inline GradientCheckReport gradient_check(const ModelConfig& cfg, std::uint64_t seed, double tolerance,
                                          const GradientCheckOptions& opts = {}) {
  cfg.validate();
  if (cfg.dropout_rate > 0.0 && opts.frozen_mask.empty()) {
    throw PreconditionError("gradient_check with dropout needs a frozen dropout mask");
  }
  auto params = init_params<double>(cfg, seed);
  const auto batch = make_check_batch(cfg, opts.batch_size, seed);
  ForwardOptions<double> fo;
  fo.mode = Mode::train;
  fo.frozen_mask = opts.frozen_mask;
  auto loss_at = [&](const ModelParams<double>& p) {
    const auto r = forward<double>(batch.sequences, p, fo);
    return mse_loss<double>(r.predictions, batch.targets);
  };
  const auto fr = forward<double>(batch.sequences, params, fo);
  auto grads = backward<double>(*fr.cache, batch.targets, params);
  if (opts.tamper) opts.tamper(grads);

  GradientCheckReport report;
  auto theta = params.arrays();
  const auto analytic = grads.arrays();
  for (std::size_t a = 0; a < theta.size(); ++a) {
    const std::size_t first = a == 0 ? cfg.embed_dim : 0;
    for (std::size_t k = first; k < theta[a].values.size(); ++k) {
      double& x = theta[a].values[k];
      const double saved = x;
      x = saved + opts.step;
      const double up = loss_at(params);
      x = saved - opts.step;
      const double down = loss_at(params);
      x = saved;
      const double numeric = (up - down) / (2.0 * opts.step);
      const double rel = relative_error(analytic[a].values[k], numeric);
      ++report.coordinates;
      if (rel > report.max_relative_error || !std::isfinite(rel)) {
        report.max_relative_error = std::isfinite(rel) ? rel : std::numeric_limits<double>::infinity();
        report.worst_array = std::string(theta[a].name);
        report.worst_index = k;
        report.worst_analytic = analytic[a].values[k];
        report.worst_numeric = numeric;
      }
    }
  }
  report.passed = report.max_relative_error < tolerance;
  return report;
}

}  // namespace sentiscore::nnet
