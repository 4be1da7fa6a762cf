#pragma once

// Planted-lexicon corpus generator. Reviews are strings of two-character
// pseudo-words: K positive words (weight +1), K negative words (weight -1)
// and neutral filler (weight 0), with stop words, punctuation and the odd
// HTML tag mixed in so the whole cleaning pipeline is exercised. A review's
// rating is clamp(2.5 + scale * mean content weight + noise, 0, 5).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "corpus.hpp"
#include "error.hpp"
#include "rng.hpp"
#include "utf8.hpp"

namespace sentiscore {

struct SynthParams {
  std::size_t corpus_size = 2000;
  std::size_t lexicon_size = 40;   // words per polarity
  std::size_t neutral_size = 300;
  std::size_t min_length = 6;      // content words per review
  std::size_t max_length = 30;
  double sentiment_rate = 0.35;    // chance a content word carries polarity
  double stopword_rate = 0.15;
  double punctuation_rate = 0.1;
  double html_rate = 0.05;
  double duplicate_rate = 0.01;    // chance of re-posting an earlier review
  double scale = 5.0;
  double noise = 0.3;              // standard deviation of rating noise
  std::size_t users = 500;

  void validate() const {
    if (corpus_size < 10) throw PreconditionError("synthetic corpus size must be at least 10");
    if (lexicon_size < 1 || neutral_size < 1) throw PreconditionError("lexicon sizes must be positive");
    if (min_length < 1 || max_length < min_length) throw PreconditionError("invalid review length range");
    if (users < 1) throw PreconditionError("need at least one user");
    if (noise < 0.0) throw PreconditionError("noise must be non-negative");
  }
};

struct LexiconEntry {
  std::string token;
  int weight = 0;  // +1, -1 or 0
};

struct SyntheticCorpus {
  std::vector<RawReview> reviews;
  std::vector<LexiconEntry> lexicon;  // positive, then negative, then neutral
  std::vector<std::string> stopwords;
  std::vector<std::string> dictionary;  // every lexicon word plus the stop words
};

inline const std::vector<std::string>& synthetic_stopwords() {
  static const std::vector<std::string> words = {"的", "是", "在", "了", "和", "也", "就", "都"};
  return words;
}

inline double synthetic_rating(double mean_weight, double scale, double noise) {
  return std::clamp(2.5 + scale * mean_weight + noise, kMinRating, kMaxRating);
}

// Mean weight over the content words of a token list; stop words and unknown
// tokens count as neutral.
inline double mean_weight(const std::vector<std::string>& tokens,
                          const std::unordered_map<std::string, int>& weights) {
  if (tokens.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& t : tokens) {
    const auto it = weights.find(t);
    if (it != weights.end()) sum += it->second;
  }
  return sum / static_cast<double>(tokens.size());
}

inline SyntheticCorpus generate_synthetic_corpus(const SynthParams& params, std::uint64_t seed) {
  params.validate();
  Xoshiro256pp rng(seed);
  SyntheticCorpus out;
  out.stopwords = synthetic_stopwords();

  std::unordered_set<char32_t> stop_chars;
  for (const auto& s : out.stopwords) stop_chars.insert(utf8::to_u32(s).front());
  std::unordered_set<std::string> used;
  const std::size_t total_words = 2 * params.lexicon_size + params.neutral_size;
  constexpr char32_t kFirst = 0x4E00, kSpan = 0x9FA5 - 0x4E00 + 1;
  while (out.lexicon.size() < total_words) {
    const char32_t a = kFirst + static_cast<char32_t>(rng.below(kSpan));
    const char32_t b = kFirst + static_cast<char32_t>(rng.below(kSpan));
    if (stop_chars.contains(a) || stop_chars.contains(b)) continue;
    std::string word;
    utf8::append(word, a);
    utf8::append(word, b);
    if (!used.insert(word).second) continue;
    const std::size_t i = out.lexicon.size();
    const int weight = i < params.lexicon_size ? 1 : (i < 2 * params.lexicon_size ? -1 : 0);
    out.lexicon.push_back({std::move(word), weight});
  }
  for (const auto& e : out.lexicon) out.dictionary.push_back(e.token);
  for (const auto& s : out.stopwords) out.dictionary.push_back(s);

  const std::size_t K = params.lexicon_size;
  // neutral words follow a Zipf-like law so vocabulary coverage is realistic
  std::vector<double> zipf_cdf(params.neutral_size);
  double acc = 0.0;
  for (std::size_t r = 0; r < params.neutral_size; ++r) {
    acc += 1.0 / static_cast<double>(r + 1);
    zipf_cdf[r] = acc;
  }
  for (auto& c : zipf_cdf) c /= acc;
  static const char* kPunct[] = {"，", "。", "！", "!!", "...", "😀", "?", " "};

  for (std::size_t n = 0; n < params.corpus_size; ++n) {
    if (n > 0 && rng.bernoulli(params.duplicate_rate)) {
      out.reviews.push_back(out.reviews[rng.below(out.reviews.size())]);
      continue;
    }
    const double polarity = rng.uniform();
    const std::size_t len =
        params.min_length + static_cast<std::size_t>(rng.below(params.max_length - params.min_length + 1));
    std::string text;
    double weight_sum = 0.0;
    for (std::size_t k = 0; k < len; ++k) {
      if (rng.bernoulli(params.stopword_rate)) text += out.stopwords[rng.below(out.stopwords.size())];
      const LexiconEntry* word;
      if (rng.bernoulli(params.sentiment_rate)) {
        const bool positive = rng.bernoulli(polarity);
        word = &out.lexicon[(positive ? 0 : K) + rng.below(K)];
      } else {
        const double u = rng.uniform();
        const auto r = static_cast<std::size_t>(std::lower_bound(zipf_cdf.begin(), zipf_cdf.end(), u) -
                                                zipf_cdf.begin());
        word = &out.lexicon[2 * K + std::min(r, params.neutral_size - 1)];
      }
      text += word->token;
      weight_sum += word->weight;
      if (rng.bernoulli(params.punctuation_rate)) text += kPunct[rng.below(std::size(kPunct))];
    }
    if (rng.bernoulli(params.html_rate)) text = "<p>" + text + "</p>";
    const double noise = params.noise > 0.0 ? params.noise * rng.normal() : 0.0;
    const double rating = synthetic_rating(weight_sum / static_cast<double>(len), params.scale, noise);
    char uid[32];
    std::snprintf(uid, sizeof uid, "u%05llu", static_cast<unsigned long long>(rng.below(params.users)));
    out.reviews.push_back({uid, std::move(text), rating});
  }
  return out;
}

}  // namespace sentiscore
