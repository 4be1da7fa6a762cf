// sentiscore: command-line driver for the review scoring pipeline.
//
//   sentiscore <subcommand> [--config PATH] [--seed N] [--out DIR]
//
// Inputs default to files inside --out, so `synth`, `train` and `evaluate`
// chain without a config file.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sentiscore/sentiscore.hpp"

namespace fs = std::filesystem;
using namespace sentiscore;

namespace {

constexpr std::uint64_t kDefaultSeed = 20240917;

const std::vector<std::string> kSubcommands = {"clean",    "vocab",   "train",    "tune", "evaluate",
                                               "predict", "baseline", "synth", "compare"};

class MissingPath : public Error {
 public:
  MissingPath(const std::string& key, fs::path path)
      : Error("input '" + key + "' does not exist: " + path.string()), key_(key), path_(std::move(path)) {}
  const std::string& key() const { return key_; }
  const fs::path& path() const { return path_; }

 private:
  std::string key_;
  fs::path path_;
};

void log(const std::string& msg) { std::cerr << "sentiscore: " << msg << '\n'; }

struct Run {
  KeyValueConfig cfg;
  fs::path out;
  std::uint64_t seed = kDefaultSeed;

  fs::path output(const char* name) const { return out / name; }

  // An explicitly configured input must exist; a defaulted one may be absent.
  std::optional<fs::path> input(const std::string& key, const char* default_name) const {
    if (auto v = cfg.get(key)) {
      if (v->empty()) return std::nullopt;
      fs::path p(*v);
      if (!fs::exists(p)) throw MissingPath(key, p);
      return p;
    }
    fs::path p = out / default_name;
    return fs::exists(p) ? std::optional<fs::path>(p) : std::nullopt;
  }

  fs::path required_input(const std::string& key, const char* default_name) const {
    auto p = input(key, default_name);
    if (!p) throw MissingPath(key, cfg.get(key).value_or((out / default_name).string()));
    return *p;
  }
};

DatasetFormat dataset_format(const Run& run, const fs::path& path) {
  const auto f = run.cfg.get_string("format", "auto");
  if (f == "auto") return format_for_path(path);
  if (f == "delimited" || f == "csv") return DatasetFormat::delimited;
  if (f == "jsonl" || f == "record") return DatasetFormat::record_per_line;
  throw PreconditionError("unknown dataset format '" + f + "'");
}

Preprocessor load_preprocessor(const Run& run) {
  std::unordered_set<Token> dict, stop;
  if (auto p = run.input("dictionary", "dictionary.txt")) dict = load_word_list(*p);
  if (auto p = run.input("stopwords", "stopwords.txt")) stop = load_word_list(*p);
  return Preprocessor(Dictionary(std::move(dict)), std::move(stop));
}

std::vector<CleanReview> load_clean(const Run& run, const std::string& key, const char* default_name) {
  const auto path = run.required_input(key, default_name);
  const auto raw = load_dataset(path, dataset_format(run, path));
  auto result = clean_reviews(raw);
  log("loaded " + std::to_string(raw.size()) + " reviews from " + path.string() + "; removed " +
      std::to_string(result.duplicates_removed) + " duplicates, dropped " + std::to_string(result.empty_dropped) +
      " empty");
  return std::move(result.reviews);
}

struct Tokenized {
  std::vector<CleanReview> reviews;
  std::vector<std::vector<Token>> tokens;
};

Tokenized tokenize_all(const std::vector<CleanReview>& reviews, const Preprocessor& prep) {
  Tokenized t;
  std::size_t dropped = 0;
  for (const auto& r : reviews) {
    auto tokens = prep.tokenize(r.text);
    if (tokens.empty()) {
      ++dropped;
      continue;
    }
    t.reviews.push_back(r);
    t.tokens.push_back(std::move(tokens));
  }
  if (dropped) log("dropped " + std::to_string(dropped) + " reviews with no tokens after stop-word removal");
  return t;
}

std::size_t vocab_budget(const Run& run, const std::vector<std::vector<Token>>& docs) {
  if (auto max = run.cfg.get_uint("vocab_max", 0); max > 0) return max;
  const auto counts = count_tokens(docs);
  if (counts.empty()) throw PreconditionError("corpus has no tokens");
  return min_vocab_for_coverage(frequencies_of(counts), run.cfg.get_double("vocab_coverage", kDefaultCoverage));
}

// Loads the configured vocabulary, or builds one from the whole cleaned
// dataset and saves it.
Vocabulary obtain_vocab(const Run& run, const Tokenized& data) {
  if (auto p = run.input("vocab", "vocab.tsv")) {
    log("using vocabulary " + p->string());
    return Vocabulary::load(*p);
  }
  auto vocab = build_vocab(data.tokens, vocab_budget(run, data.tokens));
  vocab.save(run.output("vocab.tsv"));
  log("built vocabulary of " + std::to_string(vocab.content_size()) + " words");
  return vocab;
}

struct Split {
  std::vector<CleanReview> train;
  std::vector<CleanReview> validation;
};

Split split_reviews(const Run& run, std::vector<CleanReview> reviews) {
  const double fraction = run.cfg.get_double("split", 0.8);
  auto [tr, va] = split_dataset(std::move(reviews), fraction, derive_seed(run.seed, "split"));
  return {std::move(tr), std::move(va)};
}

TrainConfig train_config(const Run& run, std::size_t vocab_size) {
  TrainConfig tc;
  tc.seed = run.seed;
  tc.epochs = run.cfg.get_uint("epochs", tc.epochs);
  tc.batch_size = run.cfg.get_uint("batch_size", tc.batch_size);
  tc.split_fraction = run.cfg.get_double("split", tc.split_fraction);
  tc.learning_rate = run.cfg.get_double("learning_rate", tc.learning_rate);
  tc.model.vocab_size = vocab_size;
  tc.model.embed_dim = run.cfg.get_uint("embed_dim", tc.model.embed_dim);
  tc.model.lstm_units = run.cfg.get_uint("lstm_units", tc.model.lstm_units);
  tc.model.dropout_rate = run.cfg.get_double("dropout", 0.007038);
  tc.model.seq_len = run.cfg.get_uint("seq_len", tc.model.seq_len);
  tc.validate();
  return tc;
}

std::vector<Example> encode_split(const std::vector<CleanReview>& reviews, const Preprocessor& prep,
                                  const Vocabulary& vocab, std::size_t seq_len) {
  return encode_reviews(reviews, prep, vocab, seq_len).examples;
}

// ---------------------------------------------------------------------------

int cmd_synth(const Run& run) {
  SynthParams p;
  p.corpus_size = run.cfg.get_uint("synth_size", p.corpus_size);
  p.lexicon_size = run.cfg.get_uint("synth_lexicon", p.lexicon_size);
  p.neutral_size = run.cfg.get_uint("synth_neutral", p.neutral_size);
  p.min_length = run.cfg.get_uint("synth_min_len", p.min_length);
  p.max_length = run.cfg.get_uint("synth_max_len", p.max_length);
  p.noise = run.cfg.get_double("synth_noise", p.noise);
  p.scale = run.cfg.get_double("synth_scale", p.scale);
  p.duplicate_rate = run.cfg.get_double("synth_duplicate_rate", p.duplicate_rate);
  const auto corpus = generate_synthetic_corpus(p, derive_seed(run.seed, "synth"));
  save_dataset(run.output("corpus.jsonl"), corpus.reviews, DatasetFormat::record_per_line);
  std::string dict, stop, lex = "token,weight\n";
  for (const auto& w : corpus.dictionary) dict += w + '\n';
  for (const auto& w : corpus.stopwords) stop += w + '\n';
  for (const auto& e : corpus.lexicon) lex += e.token + ',' + std::to_string(e.weight) + '\n';
  write_text(run.output("dictionary.txt"), dict);
  write_text(run.output("stopwords.txt"), stop);
  write_text(run.output("lexicon.csv"), lex);
  log("wrote " + std::to_string(corpus.reviews.size()) + " synthetic reviews to " +
      run.output("corpus.jsonl").string());
  return 0;
}

int cmd_clean(const Run& run) {
  const auto reviews = load_clean(run, "dataset", "corpus.jsonl");
  save_dataset(run.output("clean.jsonl"), reviews, DatasetFormat::record_per_line);
  log("wrote " + std::to_string(reviews.size()) + " cleaned reviews");
  return 0;
}

int cmd_vocab(const Run& run) {
  const auto prep = load_preprocessor(run);
  const auto data = tokenize_all(load_clean(run, "dataset", "corpus.jsonl"), prep);
  const auto counts = count_tokens(data.tokens);
  if (counts.empty()) throw PreconditionError("corpus has no tokens");
  const auto freqs = frequencies_of(counts);
  std::string curve = "k,coverage\n";
  for (const auto& pt : coverage_curve(freqs)) curve += std::to_string(pt.k) + ',' + format_double(pt.coverage) + '\n';
  write_text(run.output("coverage.csv"), curve);
  for (double t : {0.95, 0.98}) {
    log(std::to_string(min_vocab_for_coverage(freqs, t)) + " of " + std::to_string(freqs.size()) + " words reach " +
        format_double(t) + " coverage");
  }
  auto vocab = build_vocab(data.tokens, vocab_budget(run, data.tokens));
  vocab.save(run.output("vocab.tsv"));
  log("vocabulary: " + std::to_string(vocab.content_size()) + " words");
  return 0;
}

int cmd_train(const Run& run) {
  const auto prep = load_preprocessor(run);
  auto data = tokenize_all(load_clean(run, "dataset", "corpus.jsonl"), prep);
  const auto vocab = obtain_vocab(run, data);
  const auto tc = train_config(run, vocab.size());
  const auto split = split_reviews(run, std::move(data.reviews));
  const auto tr = encode_split(split.train, prep, vocab, tc.model.seq_len);
  const auto va = encode_split(split.validation, prep, vocab, tc.model.seq_len);
  log("training on " + std::to_string(tr.size()) + " reviews, validating on " + std::to_string(va.size()));
  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochRecord& r) {
    log("epoch " + std::to_string(r.epoch) + "/" + std::to_string(tc.epochs) + " train_mae " +
        format_fixed(r.train_mae, 5) + " val_mae " + format_fixed(r.val_mae, 5));
  };
  try {
    auto result = train<float>(tr, va, tc, hooks);
    write_history(run.output("history.csv"), result.history);
    Checkpoint ck;
    ck.seed = tc.seed;
    ck.train_config_digest = tc.digest();
    ck.vocab_digest = vocab.digest();
    ck.params = std::move(result.params);
    save_checkpoint(run.output("checkpoint.ssck"), ck);
  } catch (const TrainingAborted& e) {
    write_history(run.output("history.csv"), e.history());
    throw;
  }
  log("wrote " + run.output("checkpoint.ssck").string());
  return 0;
}

int cmd_tune(const Run& run) {
  const auto prep = load_preprocessor(run);
  auto data = tokenize_all(load_clean(run, "dataset", "corpus.jsonl"), prep);
  const auto vocab = obtain_vocab(run, data);
  const auto base = train_config(run, vocab.size());
  const auto split = split_reviews(run, std::move(data.reviews));
  const auto tr = encode_split(split.train, prep, vocab, base.model.seq_len);
  const auto va = encode_split(split.validation, prep, vocab, base.model.seq_len);

  hypertune::SearchSpace space;
  space.lr_min = run.cfg.get_double("lr_min", space.lr_min);
  space.lr_max = run.cfg.get_double("lr_max", space.lr_max);
  space.units_min = run.cfg.get_uint("units_min", space.units_min);
  space.units_max = run.cfg.get_uint("units_max", space.units_max);
  space.dropout_min = run.cfg.get_double("dropout_min", space.dropout_min);
  space.dropout_max = run.cfg.get_double("dropout_max", space.dropout_max);
  const auto n_random = run.cfg.get_uint("n_random", 5);
  const auto n_bayes = run.cfg.get_uint("n_bayes", 15);
  const auto tune_epochs = run.cfg.get_uint("tune_epochs", 15);

  hypertune::TrialLedger ledger(run.output("trials.csv"));
  auto objective = [&](const hypertune::HyperConfig& c) {
    TrainConfig tc = base;
    tc.epochs = tune_epochs;
    tc.learning_rate = c.learning_rate;
    tc.model.lstm_units = c.lstm_units;
    tc.model.dropout_rate = c.dropout_rate;
    try {
      return train<float>(tr, va, tc).history.back().val_mae;
    } catch (const NumericError& e) {
      log(std::string("trial failed: ") + e.what());
      return std::numeric_limits<double>::quiet_NaN();
    }
  };
  const auto result = hypertune::optimize_hyperparameters(
      space, objective, n_random, n_bayes, derive_seed(run.seed, "tune"), [&](const hypertune::HyperTrial& t) {
        ledger.append(t.trial, t.config);
        log("trial " + std::to_string(t.trial.index) + " (" + hypertune::phase_name(t.trial.phase) + ") lr " +
            format_double(t.config.learning_rate) + " units " + std::to_string(t.config.lstm_units) + " dropout " +
            format_double(t.config.dropout_rate) + " -> val_mae " + format_fixed(t.trial.objective, 5));
      });
  const auto& best = result.best;
  write_text(run.output("best_config.txt"), "learning_rate = " + format_double(best.config.learning_rate) +
                                                "\nlstm_units = " + std::to_string(best.config.lstm_units) +
                                                "\ndropout = " + format_double(best.config.dropout_rate) +
                                                "\n# val_mae = " + format_double(best.trial.objective) + "\n");
  log("best trial " + std::to_string(best.trial.index) + " val_mae " + format_fixed(best.trial.objective, 5));
  return 0;
}

struct HeldOut {
  std::vector<double> truth;
  std::vector<double> model;
  std::vector<double> baseline;
};

// Scores the held-out reviews (test dataset if configured, else the
// validation split) with the checkpoint and the baseline.
HeldOut score_held_out(const Run& run) {
  const auto prep = load_preprocessor(run);
  auto data = tokenize_all(load_clean(run, "dataset", "corpus.jsonl"), prep);
  const auto vocab = Vocabulary::load(run.required_input("vocab", "vocab.tsv"));
  const auto ck = load_checkpoint(run.required_input("checkpoint", "checkpoint.ssck"));
  if (ck.model().vocab_size != vocab.size()) {
    throw CheckpointDimensionError("checkpoint vocabulary size " + std::to_string(ck.model().vocab_size) +
                                   " does not match vocabulary file size " + std::to_string(vocab.size()));
  }
  if (ck.vocab_digest != vocab.digest()) throw CheckpointError("checkpoint was trained with a different vocabulary");
  auto split = split_reviews(run, std::move(data.reviews));
  std::vector<CleanReview> held_out = std::move(split.validation);
  if (run.cfg.has("test_dataset")) held_out = load_clean(run, "test_dataset", "test.jsonl");

  NBModel nb;
  if (auto p = run.input("baseline_model", "baseline.txt")) {
    nb = load_baseline(*p);
  } else {
    nb = train_baseline(split.train, prep);
  }
  HeldOut out;
  for (const auto& r : held_out) {
    const auto tokens = prep.tokenize(r.text);
    if (tokens.empty()) continue;
    const auto seq = pad_truncate(encode(tokens, vocab), ck.model().seq_len);
    out.truth.push_back(r.rating);
    out.model.push_back(score_from_raw(nnet::predict_one(seq, ck.params)));
    out.baseline.push_back(score_baseline_tokens(tokens, nb));
  }
  log("scored " + std::to_string(out.truth.size()) + " held-out reviews");
  return out;
}

int cmd_evaluate(const Run& run) {
  const auto h = score_held_out(run);
  const auto mm = compute_metrics(h.truth, h.model);
  const auto mb = compute_metrics(h.truth, h.baseline);
  write_text(run.output("metrics.txt"), format_report(mm, "bilstm") + "\n" + format_report(mb, "baseline"));
  const auto bins = run.cfg.get_uint("hist_bins", 10);
  write_text(run.output("hist_model.csv"), format_histogram(histogram(h.model, bins, 0.0, 5.0)));
  write_text(run.output("hist_baseline.csv"), format_histogram(histogram(h.baseline, bins, 0.0, 5.0)));
  write_text(run.output("hist_truth.csv"), format_histogram(histogram(h.truth, bins, 0.0, 5.0)));
  std::cout << format_report(mm, "bilstm") << '\n' << format_report(mb, "baseline");
  return 0;
}

int cmd_compare(const Run& run) {
  const auto h = score_held_out(run);
  const auto mm = compute_metrics(h.truth, h.model);
  const auto mb = compute_metrics(h.truth, h.baseline);
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("undefined"); };
  struct Row {
    const char* name;
    std::string a, b;
  };
  const std::vector<Row> rows = {
      {"mse", format_double(mm.mse), format_double(mb.mse)},
      {"rmse", format_double(mm.rmse), format_double(mb.rmse)},
      {"mae", format_double(mm.mae), format_double(mb.mae)},
      {"mape", format_double(mm.mape), format_double(mb.mape)},
      {"msle", format_double(mm.msle), format_double(mb.msle)},
      {"medae", format_double(mm.medae), format_double(mb.medae)},
      {"r2", opt(mm.r2), opt(mb.r2)},
      {"evs", opt(mm.evs), opt(mb.evs)},
  };
  std::string csv = "metric,bilstm,baseline\n";
  for (const auto& r : rows) csv += std::string(r.name) + ',' + r.a + ',' + r.b + '\n';
  write_text(run.output("comparison.csv"), csv);
  std::printf("%-8s %22s %22s\n", "metric", "bilstm", "baseline");
  for (const auto& r : rows) std::printf("%-8s %22s %22s\n", r.name, r.a.c_str(), r.b.c_str());
  return 0;
}

int cmd_baseline(const Run& run) {
  const auto prep = load_preprocessor(run);
  auto data = tokenize_all(load_clean(run, "dataset", "corpus.jsonl"), prep);
  const auto split = split_reviews(run, std::move(data.reviews));
  const auto nb = train_baseline(split.train, prep);
  save_baseline(run.output("baseline.txt"), nb);
  log("baseline model over " + std::to_string(nb.order.size()) + " tokens");
  return 0;
}

int cmd_predict(const Run& run) {
  const auto prep = load_preprocessor(run);
  const auto vocab = Vocabulary::load(run.required_input("vocab", "vocab.tsv"));
  const auto ck = load_checkpoint(run.required_input("checkpoint", "checkpoint.ssck"));
  const auto texts_path = run.required_input("texts", "texts.txt");
  std::ifstream in(texts_path, std::ios::binary);
  std::vector<std::string> texts;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    texts.push_back(line);
  }
  const auto preds = predict<float>(texts, ck.params, vocab, prep);
  std::string csv = "index,score,error\n";
  for (std::size_t i = 0; i < preds.size(); ++i) {
    csv += std::to_string(i) + ',' + (preds[i].score ? format_fixed(*preds[i].score, 4) : "") + ',' + preds[i].error +
           '\n';
    std::cout << (preds[i].score ? format_fixed(*preds[i].score, 4) : "error: " + preds[i].error) << '\n';
  }
  write_text(run.output("predictions.csv"), csv);
  return 0;
}

void report_error(const std::string& kind, const std::string& message, const nlohmann::json& extra = {}) {
  nlohmann::json j = {{"error", kind}, {"message", message}};
  if (extra.is_object()) j.update(extra);
  std::cerr << j.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("Sentiment intensity scoring for review text", "sentiscore");
  std::string subcommand, config_path, out_dir = ".";
  std::optional<std::uint64_t> seed;
  app.add_option("subcommand", subcommand, "one of: clean vocab train tune evaluate predict baseline synth compare")
      ->required();
  app.add_option("--config", config_path, "flat key = value configuration file");
  app.add_option("--seed", seed, "master seed");
  app.add_option("--out", out_dir, "output directory (default: current directory)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    report_error("usage", e.what());
    std::cerr << app.help();
    return 2;
  }
  if (std::find(kSubcommands.begin(), kSubcommands.end(), subcommand) == kSubcommands.end()) {
    report_error("usage", "unknown subcommand '" + subcommand + "'", {{"subcommand", subcommand}});
    std::cerr << app.help();
    return 2;
  }
  try {
    Run run;
    if (!config_path.empty()) {
      if (!fs::exists(config_path)) throw MissingPath("config", config_path);
      run.cfg = KeyValueConfig::load(config_path);
    }
    run.out = out_dir;
    run.seed = seed.value_or(run.cfg.get_uint("seed", kDefaultSeed));
    fs::create_directories(run.out);
    int status = 0;
    if (subcommand == "synth") status = cmd_synth(run);
    else if (subcommand == "clean") status = cmd_clean(run);
    else if (subcommand == "vocab") status = cmd_vocab(run);
    else if (subcommand == "train") status = cmd_train(run);
    else if (subcommand == "tune") status = cmd_tune(run);
    else if (subcommand == "evaluate") status = cmd_evaluate(run);
    else if (subcommand == "predict") status = cmd_predict(run);
    else if (subcommand == "baseline") status = cmd_baseline(run);
    else if (subcommand == "compare") status = cmd_compare(run);
    return status;
  } catch (const MissingPath& e) {
    report_error("missing_path", e.what(), {{"key", e.key()}, {"path", e.path().string()}});
  } catch (const IoError& e) {
    report_error("io", e.what(), {{"path", e.path()}});
  } catch (const ParseError& e) {
    report_error("parse", e.what(), {{"line", e.line()}});
  } catch (const CheckpointError& e) {
    report_error("checkpoint", e.what());
  } catch (const PreconditionError& e) {
    report_error("invalid_input", e.what());
  } catch (const NumericError& e) {
    report_error("numeric", e.what());
  } catch (const std::exception& e) {
    report_error("internal", e.what());
  }
  return 1;
}
