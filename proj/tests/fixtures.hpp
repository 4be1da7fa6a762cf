#pragma once

// Synthetic corpus to encoded examples, shared by the trainer tests and the
// acceptance runner.

#include <unordered_set>

#include "sentiscore/sentiscore.hpp"

namespace fixture {

struct Encoded {
  sentiscore::SyntheticCorpus corpus;
  std::vector<sentiscore::CleanReview> clean;
  sentiscore::Preprocessor prep;
  sentiscore::Vocabulary vocab;
  std::vector<sentiscore::Example> examples;
};

inline Encoded encoded_synthetic(const sentiscore::SynthParams& sp, std::uint64_t seed, std::size_t seq_len,
                                 std::size_t vocab_max = 100000) {
  using namespace sentiscore;
  auto corpus = generate_synthetic_corpus(sp, seed);
  auto clean = clean_reviews(corpus.reviews).reviews;
  Preprocessor prep(Dictionary(std::unordered_set<std::string>(corpus.dictionary.begin(), corpus.dictionary.end())),
                    std::unordered_set<std::string>(corpus.stopwords.begin(), corpus.stopwords.end()));
  std::vector<std::vector<Token>> docs;
  for (const auto& r : clean) docs.push_back(prep.tokenize(r.text));
  auto vocab = build_vocab(docs, vocab_max);
  auto examples = encode_reviews(clean, prep, vocab, seq_len).examples;
  return {std::move(corpus), std::move(clean), std::move(prep), std::move(vocab), std::move(examples)};
}

}  // namespace fixture
