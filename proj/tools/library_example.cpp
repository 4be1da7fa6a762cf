// Library walkthrough: synthetic corpus -> cleaning -> vocabulary -> BiLSTM
// training -> held-out metrics next to the naive Bayes baseline.

#include <iostream>
#include <unordered_set>

#include "sentiscore/sentiscore.hpp"

using namespace sentiscore;

int main() {
  const std::uint64_t seed = 7;
  SynthParams sp;
  sp.corpus_size = 600;
  const auto corpus = generate_synthetic_corpus(sp, derive_seed(seed, "synth"));

  const auto cleaned = clean_reviews(corpus.reviews);
  std::cout << "reviews: " << cleaned.input_count << " in, " << cleaned.reviews.size() << " kept, "
            << cleaned.duplicates_removed << " duplicates\n";

  Preprocessor prep(Dictionary(std::unordered_set<Token>(corpus.dictionary.begin(), corpus.dictionary.end())),
                    std::unordered_set<Token>(corpus.stopwords.begin(), corpus.stopwords.end()));
  std::vector<std::vector<Token>> docs;
  for (const auto& r : cleaned.reviews) docs.push_back(prep.tokenize(r.text));

  std::vector<std::uint64_t> freqs;
  for (const auto& c : count_tokens(docs)) freqs.push_back(c.count);
  const auto k = min_vocab_for_coverage(freqs, kDefaultCoverage);
  const auto vocab = build_vocab(docs, k);
  std::cout << "vocabulary: " << k << " of " << freqs.size() << " tokens cover 95%\n";

  auto [train_reviews, val_reviews] = split_dataset(cleaned.reviews, 0.8, derive_seed(seed, "split"));
  const std::size_t L = 40;
  const auto train_set = encode_reviews(train_reviews, prep, vocab, L).examples;
  const auto val_set = encode_reviews(val_reviews, prep, vocab, L).examples;

  TrainConfig cfg;
  cfg.epochs = 8;
  cfg.batch_size = 32;
  cfg.learning_rate = 0.01;
  cfg.seed = seed;
  cfg.model = nnet::ModelConfig{vocab.size(), 24, 12, 0.2, L};
  TrainHooks hooks{[](const EpochRecord& r) {
    std::cout << "epoch " << r.epoch << "  train_mae " << format_fixed(r.train_mae, 4) << "  val_mae "
              << format_fixed(r.val_mae, 4) << '\n';
  }};
  const auto model = train(std::span<const Example>(train_set), std::span<const Example>(val_set), cfg, hooks);
  const auto nb = train_baseline(train_reviews, prep);

  std::vector<double> truth, ours, theirs;
  for (const auto& r : val_reviews) {
    const auto tokens = prep.tokenize(r.text);
    if (tokens.empty()) continue;
    truth.push_back(r.rating);
    ours.push_back(score_from_raw(nnet::predict_one(pad_truncate(encode(tokens, vocab), L), model.params)));
    theirs.push_back(score_baseline_tokens(tokens, nb));
  }
  std::cout << '\n'
            << format_report(compute_metrics(truth, ours), "bilstm") << '\n'
            << format_report(compute_metrics(truth, theirs), "baseline");
}
