#pragma once

// Dataset preparation, splitting, the fixed-epoch training loop, checkpoint
// files and end-user scoring.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "corpus.hpp"
#include "error.hpp"
#include "format.hpp"
#include "nnet.hpp"
#include "rng.hpp"
#include "textprep.hpp"

namespace sentiscore {

// One supervised example: encoded review and its label in [0,1].
struct Example {
  TokenSequence sequence;
  double label = 0.0;
};

struct EncodedDataset {
  std::vector<Example> examples;
  std::size_t dropped_empty = 0;  // reviews with no tokens left after preprocessing
};

inline EncodedDataset encode_reviews(const std::vector<CleanReview>& reviews, const Preprocessor& prep,
                                     const Vocabulary& vocab, std::size_t seq_len) {
  EncodedDataset out;
  out.examples.reserve(reviews.size());
  for (const auto& r : reviews) {
    const auto tokens = prep.tokenize(r.text);
    if (tokens.empty()) {
      ++out.dropped_empty;
      continue;
    }
    const auto ids = encode(tokens, vocab);
    out.examples.push_back({pad_truncate(ids, seq_len), normalize_label(r.rating).value});
  }
  return out;
}

// Seeded shuffle, then the first floor(fraction * n) items train.
template <class Item>
std::pair<std::vector<Item>, std::vector<Item>> split_dataset(std::vector<Item> data, double fraction,
                                                              std::uint64_t seed) {
  if (data.size() < 2) throw PreconditionError("split_dataset needs at least two items");
  if (!(fraction > 0.0 && fraction < 1.0)) throw PreconditionError("split fraction must lie in (0,1)");
  const auto n_train = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(data.size())));
  if (n_train == 0 || n_train == data.size()) {
    throw PreconditionError("split fraction leaves one side empty for " + std::to_string(data.size()) + " items");
  }
  Xoshiro256pp rng(seed);
  rng.shuffle(std::span<Item>(data));
  std::vector<Item> validation(std::make_move_iterator(data.begin() + static_cast<std::ptrdiff_t>(n_train)),
                               std::make_move_iterator(data.end()));
  data.resize(n_train);
  return {std::move(data), std::move(validation)};
}

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  double split_fraction = 0.8;
  std::uint64_t seed = 20240917;
  double learning_rate = 0.005358;
  nnet::ModelConfig model;

  void validate() const {
    if (epochs < 1 || batch_size < 1) throw PreconditionError("epochs and batch_size must be at least 1");
    if (!(split_fraction > 0.0 && split_fraction < 1.0)) throw PreconditionError("split_fraction must lie in (0,1)");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
      throw PreconditionError("learning_rate must be positive");
    }
    model.validate();
  }

  std::string canonical() const {
    std::ostringstream s;
    s << "epochs=" << epochs << ";batch_size=" << batch_size << ";split=" << format_double(split_fraction)
      << ";seed=" << seed << ";lr=" << format_double(learning_rate) << ";V=" << model.vocab_size
      << ";D=" << model.embed_dim << ";H=" << model.lstm_units << ";p=" << format_double(model.dropout_rate)
      << ";L=" << model.seq_len;
    return s.str();
  }
  std::uint64_t digest() const { return fnv1a64(canonical()); }
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_mae = 0.0;
  double val_loss = 0.0;
  double val_mae = 0.0;
};

using History = std::vector<EpochRecord>;

// Raised when the loss stops being finite. Carries the history so far.
class TrainingAborted : public NumericError {
 public:
  TrainingAborted(const std::string& what, std::size_t epoch, std::size_t batch, History history)
      : NumericError(what), epoch_(epoch), batch_(batch), history_(std::move(history)) {}
  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t batch() const noexcept { return batch_; }
  const History& history() const noexcept { return history_; }

 private:
  std::size_t epoch_;
  std::size_t batch_;
  History history_;
};

struct LossAndMae {
  double loss = 0.0;
  double mae = 0.0;
};

// Eval-mode MSE and MAE on the raw (unclamped) output, normalized scale.
template <class T>
LossAndMae evaluate_examples(std::span<const Example> data, const nnet::ModelParams<T>& params) {
  double se = 0.0, ae = 0.0;
  for (const auto& ex : data) {
    const double e = static_cast<double>(nnet::predict_one(ex.sequence, params)) - ex.label;
    se += e * e;
    ae += std::abs(e);
  }
  const auto n = static_cast<double>(data.size());
  return {se / n, ae / n};
}

struct TrainHooks {
  // Called after every completed epoch.
  std::function<void(const EpochRecord&)> on_epoch;
};

template <class T = float>
struct TrainOutcome {
  nnet::ModelParams<T> params;
  History history;
};

// Fixed-epoch minibatch training with Adam; no early stopping. The last
// partial batch of each epoch is used.
template <class T = float>
TrainOutcome<T> train(std::span<const Example> train_set, std::span<const Example> val_set,
                            const TrainConfig& config, const TrainHooks& hooks = {}) {
  config.validate();
  if (train_set.empty() || val_set.empty()) throw PreconditionError("training and validation sets must be nonempty");
  for (auto set : {train_set, val_set}) {
    for (const auto& ex : set) {
      if (ex.sequence.ids.size() != config.model.seq_len) {
        throw PreconditionError("example length does not match model seq_len");
      }
    }
  }
  auto params = nnet::init_params<T>(config.model, derive_seed(config.seed, "init"));
  auto adam = nnet::AdamState<T>::create(config.model, config.learning_rate);
  Xoshiro256pp rng(derive_seed(config.seed, "train"));
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  History history;
  std::vector<TokenSequence> batch;
  std::vector<T> targets;
  nnet::ForwardOptions<T> fo;
  fo.mode = nnet::Mode::train;
  fo.rng = &rng;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      targets.clear();
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(train_set[order[i]].sequence);
        targets.push_back(static_cast<T>(train_set[order[i]].label));
      }
      auto fr = nnet::forward<T>(batch, params, fo);
      const T loss = nnet::mse_loss<T>(fr.predictions, targets);
      if (!std::isfinite(loss)) {
        throw TrainingAborted("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                  std::to_string(batch_index),
                              epoch, batch_index, history);
      }
      const auto grads = nnet::backward<T>(*fr.cache, targets, params);
      try {
        nnet::adam_step(params, grads, adam);
      } catch (const NumericError& e) {
        throw TrainingAborted(std::string(e.what()) + " at epoch " + std::to_string(epoch) + ", batch " +
                                  std::to_string(batch_index),
                              epoch, batch_index, history);
      }
    }
    const auto tr = evaluate_examples(train_set, params);
    const auto va = evaluate_examples(val_set, params);
    EpochRecord rec{epoch, tr.loss, tr.mae, va.loss, va.mae};
    if (!std::isfinite(tr.loss) || !std::isfinite(va.loss)) {
      throw TrainingAborted("non-finite evaluation loss at epoch " + std::to_string(epoch), epoch, 0, history);
    }
    history.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec);
  }
  return {std::move(params), std::move(history)};
}

inline void write_history(const std::filesystem::path& path, const History& history) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write history", path.string());
  out << "epoch,train_loss,train_mae,val_loss,val_mae\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << format_double(r.train_loss) << ',' << format_double(r.train_mae) << ','
        << format_double(r.val_loss) << ',' << format_double(r.val_mae) << '\n';
  }
  if (!out) throw IoError("write failed", path.string());
}

// ---------------------------------------------------------------------------
// Checkpoints
//
//   "SSCK" | u16 version | u32 header length | header (JSON, UTF-8)
//   | f32 arrays in ModelParams::arrays() order
//
// All integers and floats little-endian.

constexpr std::uint16_t kCheckpointVersion = 1;
constexpr char kCheckpointMagic[4] = {'S', 'S', 'C', 'K'};

class CheckpointError : public Error {
 public:
  using Error::Error;
};
class CheckpointVersionError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class CheckpointTruncatedError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class CheckpointDimensionError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

struct Checkpoint {
  std::uint16_t version = kCheckpointVersion;
  std::uint64_t seed = 0;
  std::uint64_t train_config_digest = 0;
  std::uint64_t vocab_digest = 0;
  nnet::ModelParams<float> params;

  const nnet::ModelConfig& model() const noexcept { return params.config; }
};

namespace detail {

inline void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}
inline void put_u32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
}
inline std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline nlohmann::json model_json(const nnet::ModelConfig& m) {
  return {{"vocab_size", m.vocab_size},
          {"embed_dim", m.embed_dim},
          {"lstm_units", m.lstm_units},
          {"dropout_rate", m.dropout_rate},
          {"seq_len", m.seq_len}};
}

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& ck) {
  nlohmann::json header = {{"model", detail::model_json(ck.model())},
                           {"seed", ck.seed},
                           {"train_config_digest", hex64(ck.train_config_digest)},
                           {"vocab_digest", hex64(ck.vocab_digest)}};
  const std::string text = header.dump();
  std::string out(kCheckpointMagic, 4);
  detail::put_u16(out, ck.version);
  detail::put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  for (const auto& a : ck.params.arrays()) {
    for (float x : a.values) detail::put_u32(out, std::bit_cast<std::uint32_t>(x));
  }
  return out;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  const auto bytes = serialize_checkpoint(ck);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint", path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed", path.string());
}

// Parses a checkpoint image. When `expected` is given, the stored model
// dimensions must match it.
inline Checkpoint parse_checkpoint(std::string_view bytes, const std::optional<nnet::ModelConfig>& expected = {}) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 4) throw CheckpointTruncatedError("checkpoint truncated before magic bytes");
  if (std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) throw CheckpointError("not a checkpoint (bad magic)");
  if (bytes.size() < 10) throw CheckpointTruncatedError("checkpoint truncated in fixed header");
  Checkpoint ck;
  ck.version = static_cast<std::uint16_t>(p[4] | (p[5] << 8));
  if (ck.version != kCheckpointVersion) {
    throw CheckpointVersionError("checkpoint version " + std::to_string(ck.version) + " is not supported (expected " +
                                 std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint32_t header_len = detail::get_u32(p + 6);
  if (bytes.size() < 10 + std::size_t{header_len}) throw CheckpointTruncatedError("checkpoint truncated in header");
  nnet::ModelConfig cfg;
  try {
    const auto header = nlohmann::json::parse(bytes.substr(10, header_len));
    const auto& m = header.at("model");
    cfg.vocab_size = m.at("vocab_size").get<std::size_t>();
    cfg.embed_dim = m.at("embed_dim").get<std::size_t>();
    cfg.lstm_units = m.at("lstm_units").get<std::size_t>();
    cfg.dropout_rate = m.at("dropout_rate").get<double>();
    cfg.seq_len = m.at("seq_len").get<std::size_t>();
    ck.seed = header.at("seed").get<std::uint64_t>();
    ck.train_config_digest = std::stoull(header.at("train_config_digest").get<std::string>(), nullptr, 16);
    ck.vocab_digest = std::stoull(header.at("vocab_digest").get<std::string>(), nullptr, 16);
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
  }
  try {
    cfg.validate();
  } catch (const PreconditionError& e) {
    throw CheckpointError(std::string("checkpoint header describes an invalid model: ") + e.what());
  }
  if (expected) {
    const auto& e = *expected;
    if (e.vocab_size != cfg.vocab_size || e.embed_dim != cfg.embed_dim || e.lstm_units != cfg.lstm_units ||
        e.seq_len != cfg.seq_len) {
      throw CheckpointDimensionError("checkpoint dimensions V=" + std::to_string(cfg.vocab_size) +
                                     " D=" + std::to_string(cfg.embed_dim) + " H=" + std::to_string(cfg.lstm_units) +
                                     " L=" + std::to_string(cfg.seq_len) + " do not match expected V=" +
                                     std::to_string(e.vocab_size) + " D=" + std::to_string(e.embed_dim) +
                                     " H=" + std::to_string(e.lstm_units) + " L=" + std::to_string(e.seq_len));
    }
  }
  ck.params = nnet::ModelParams<float>::zeros(cfg);
  const std::size_t payload = 4 * ck.params.parameter_count();
  const std::size_t offset = 10 + std::size_t{header_len};
  if (bytes.size() < offset + payload) throw CheckpointTruncatedError("checkpoint truncated in parameter arrays");
  if (bytes.size() > offset + payload) throw CheckpointError("checkpoint has trailing bytes");
  const unsigned char* q = p + offset;
  for (auto& a : ck.params.arrays()) {
    for (float& x : a.values) {
      x = std::bit_cast<float>(detail::get_u32(q));
      q += 4;
    }
  }
  return ck;
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path,
                                  const std::optional<nnet::ModelConfig>& expected = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint", path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str(), expected);
}

// ---------------------------------------------------------------------------
// Scoring

// Raw network output to a 0-5 score: clamp to [0,1], then scale.
inline double score_from_raw(double raw) noexcept { return denormalize(raw); }

struct Prediction {
  std::optional<double> score;
  std::string error;  // set when score is empty
};

template <class T>
std::vector<Prediction> predict(std::span<const std::string> texts, const nnet::ModelParams<T>& params,
                                const Vocabulary& vocab, const Preprocessor& prep) {
  if (vocab.size() != params.config.vocab_size) {
    throw PreconditionError("vocabulary size " + std::to_string(vocab.size()) + " does not match model vocab_size " +
                            std::to_string(params.config.vocab_size));
  }
  std::vector<Prediction> out;
  out.reserve(texts.size());
  for (const auto& text : texts) {
    const auto tokens = prep.tokenize(text);
    if (tokens.empty()) {
      out.push_back({std::nullopt, "empty after cleaning"});
      continue;
    }
    const auto seq = pad_truncate(encode(tokens, vocab), params.config.seq_len);
    out.push_back({score_from_raw(static_cast<double>(nnet::predict_one(seq, params))), {}});
  }
  return out;
}

}  // namespace sentiscore
