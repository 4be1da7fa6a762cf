#pragma once

// Word segmentation, stop-word filtering, the frequency-ordered vocabulary
// with its coverage analysis, and conversion of reviews into fixed-length id
// sequences with labels scaled to [0,1].

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "corpus.hpp"
#include "error.hpp"
#include "rng.hpp"
#include "utf8.hpp"

namespace sentiscore {

using Token = std::string;
using TokenId = std::uint32_t;

constexpr TokenId kPadId = 0;
constexpr TokenId kOovId = 1;
constexpr std::size_t kDefaultSeqLen = 100;
constexpr double kDefaultCoverage = 0.95;

class Dictionary {
 public:
  Dictionary() = default;
  explicit Dictionary(std::unordered_set<Token> words) : words_(std::move(words)) {
    for (const auto& w : words_) max_chars_ = std::max(max_chars_, utf8::to_u32(w).size());
  }

  bool contains(const std::string& w) const { return words_.contains(w); }
  std::size_t max_chars() const noexcept { return max_chars_; }
  std::size_t size() const noexcept { return words_.size(); }
  bool empty() const noexcept { return words_.empty(); }
  const std::unordered_set<Token>& words() const noexcept { return words_; }

 private:
  std::unordered_set<Token> words_;
  std::size_t max_chars_ = 0;
};

// Maximum forward matching: at each position take the longest dictionary word
// starting there, or a single character when nothing matches.
inline std::vector<Token> segment(std::string_view text, const Dictionary& dict) {
  const auto chars = utf8::characters(text);
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < chars.size()) {
    std::size_t take = 1;
    const std::size_t longest = std::min(dict.max_chars(), chars.size() - i);
    std::string candidate;
    for (std::size_t k = 0; k < longest; ++k) candidate += chars[i + k];
    for (std::size_t len = longest; len >= 2; --len) {
      if (dict.contains(candidate)) {
        take = len;
        break;
      }
      candidate.resize(candidate.size() - chars[i + len - 1].size());
    }
    std::string word;
    for (std::size_t k = 0; k < take; ++k) word += chars[i + k];
    out.push_back(std::move(word));
    i += take;
  }
  return out;
}

inline std::vector<Token> segment(std::string_view text, const std::unordered_set<Token>& words) {
  return segment(text, Dictionary(words));
}

inline std::vector<Token> remove_stopwords(const std::vector<Token>& tokens, const std::unordered_set<Token>& stoplist) {
  std::vector<Token> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (!stoplist.contains(t)) out.push_back(t);
  }
  return out;
}

// One word per line, UTF-8; blank lines and lines starting with '#' skipped.
inline std::unordered_set<Token> load_word_list(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open word list", path.string());
  std::unordered_set<Token> words;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (n == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    line.erase(0, first);
    if (!utf8::is_valid(line)) throw ParseError("word list entry is not valid UTF-8", n);
    words.insert(line);
  }
  return words;
}

// Text to tokens: clean, split on spaces, segment, drop stop words.
class Preprocessor {
 public:
  Preprocessor() = default;
  Preprocessor(Dictionary dictionary, std::unordered_set<Token> stoplist)
      : dictionary_(std::move(dictionary)), stoplist_(std::move(stoplist)) {}

  std::vector<Token> tokenize(std::string_view text) const {
    const auto cleaned = clean_text(text);
    std::vector<Token> tokens;
    std::size_t start = 0;
    while (start < cleaned.size()) {
      auto end = cleaned.find(' ', start);
      if (end == std::string::npos) end = cleaned.size();
      for (auto& t : segment(std::string_view(cleaned).substr(start, end - start), dictionary_)) {
        if (!stoplist_.contains(t)) tokens.push_back(std::move(t));
      }
      start = end + 1;
    }
    return tokens;
  }

  const Dictionary& dictionary() const noexcept { return dictionary_; }
  const std::unordered_set<Token>& stoplist() const noexcept { return stoplist_; }

 private:
  Dictionary dictionary_;
  std::unordered_set<Token> stoplist_;
};

struct TokenCount {
  Token token;
  std::uint64_t count = 0;
  std::size_t first_seen = 0;
};

// All distinct tokens, most frequent first; ties go to the earlier first
// occurrence.
inline std::vector<TokenCount> count_tokens(const std::vector<std::vector<Token>>& corpus) {
  std::unordered_map<Token, std::size_t> index;
  std::vector<TokenCount> counts;
  std::size_t position = 0;
  for (const auto& doc : corpus) {
    for (const auto& t : doc) {
      auto [it, inserted] = index.try_emplace(t, counts.size());
      if (inserted) counts.push_back({t, 0, position});
      ++counts[it->second].count;
      ++position;
    }
  }
  std::sort(counts.begin(), counts.end(), [](const TokenCount& a, const TokenCount& b) {
    return a.count != b.count ? a.count > b.count : a.first_seen < b.first_seen;
  });
  return counts;
}

class Vocabulary {
 public:
  static constexpr std::string_view kPadToken = "<PAD>";
  static constexpr std::string_view kOovToken = "<OOV>";

  Vocabulary() { clear(); }

  // Content tokens must arrive in id order (id 2 first).
  static Vocabulary from_counts(std::span<const TokenCount> ordered) {
    Vocabulary v;
    for (const auto& tc : ordered) v.add(tc.token, tc.count);
    return v;
  }

  std::size_t size() const noexcept { return tokens_.size(); }
  std::size_t content_size() const noexcept { return tokens_.size() - 2; }

  TokenId id(const std::string& token) const {
    const auto it = ids_.find(token);
    return it == ids_.end() ? kOovId : it->second;
  }
  bool contains(const std::string& token) const { return ids_.contains(token); }
  const Token& token(TokenId id) const { return tokens_.at(id); }
  std::uint64_t frequency(TokenId id) const { return freqs_.at(id); }

  // Text form: token<TAB>id<TAB>frequency per line, in id order.
  std::string serialize() const {
    std::ostringstream out;
    for (std::size_t i = 0; i < tokens_.size(); ++i) out << tokens_[i] << '\t' << i << '\t' << freqs_[i] << '\n';
    return out.str();
  }

  std::uint64_t digest() const { return fnv1a64(serialize()); }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write vocabulary", path.string());
    out << serialize();
    if (!out) throw IoError("write failed", path.string());
  }

  static Vocabulary load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open vocabulary", path.string());
    Vocabulary v;
    v.tokens_.clear();
    v.freqs_.clear();
    v.ids_.clear();
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      std::istringstream fields(line);
      std::string token, id_text, freq_text;
      if (!std::getline(fields, token, '\t') || !std::getline(fields, id_text, '\t') ||
          !std::getline(fields, freq_text)) {
        throw ParseError("vocabulary line needs token, id and frequency", n);
      }
      std::size_t id = 0;
      std::uint64_t freq = 0;
      try {
        std::size_t used = 0;
        id = std::stoull(id_text, &used);
        if (used != id_text.size()) throw std::invalid_argument(id_text);
        freq = std::stoull(freq_text, &used);
        if (used != freq_text.size()) throw std::invalid_argument(freq_text);
      } catch (const std::logic_error&) {
        throw ParseError("bad id or frequency in vocabulary", n);
      }
      if (id != v.tokens_.size()) throw ParseError("vocabulary ids must be consecutive from 0", n);
      if (id == kPadId && token != kPadToken) throw ParseError("id 0 must be <PAD>", n);
      if (id == kOovId && token != kOovToken) throw ParseError("id 1 must be <OOV>", n);
      if (id >= 2) {
        if (v.ids_.contains(token)) throw ParseError("duplicate vocabulary token '" + token + "'", n);
        if (freq > v.freqs_.back() && id > 2) throw ParseError("frequencies must not increase with id", n);
        v.ids_.emplace(token, static_cast<TokenId>(id));
      }
      v.tokens_.push_back(token);
      v.freqs_.push_back(freq);
    }
    if (v.tokens_.size() < 2) throw ParseError("vocabulary must contain <PAD> and <OOV>", n);
    return v;
  }

 private:
  void clear() {
    tokens_ = {Token(kPadToken), Token(kOovToken)};
    freqs_ = {0, 0};
    ids_.clear();
  }
  void add(const Token& token, std::uint64_t freq) {
    ids_.emplace(token, static_cast<TokenId>(tokens_.size()));
    tokens_.push_back(token);
    freqs_.push_back(freq);
  }

  std::vector<Token> tokens_;
  std::vector<std::uint64_t> freqs_;
  std::unordered_map<Token, TokenId> ids_;
};

inline Vocabulary build_vocab(const std::vector<std::vector<Token>>& corpus, std::size_t max_content_tokens) {
  if (max_content_tokens < 1) throw PreconditionError("max_content_tokens must be at least 1");
  auto counts = count_tokens(corpus);
  if (counts.empty()) throw PreconditionError("cannot build a vocabulary from an empty corpus");
  if (counts.size() > max_content_tokens) counts.resize(max_content_tokens);
  return Vocabulary::from_counts(counts);
}

struct CoveragePoint {
  std::size_t k = 0;
  double coverage = 0.0;
};

namespace detail {
inline void check_frequencies(std::span<const std::uint64_t> freqs) {
  if (freqs.empty()) throw PreconditionError("coverage needs at least one frequency");
  for (std::size_t i = 0; i < freqs.size(); ++i) {
    if (freqs[i] == 0) throw PreconditionError("frequencies must be positive");
    if (i > 0 && freqs[i] > freqs[i - 1]) throw PreconditionError("frequencies must be non-increasing");
  }
}
}  // namespace detail

// coverage(k) = (top-k count) / (total count) for k = 1..n.
inline std::vector<CoveragePoint> coverage_curve(std::span<const std::uint64_t> freqs) {
  detail::check_frequencies(freqs);
  std::uint64_t total = 0;
  for (auto f : freqs) total += f;
  std::vector<CoveragePoint> curve;
  curve.reserve(freqs.size());
  std::uint64_t prefix = 0;
  for (std::size_t i = 0; i < freqs.size(); ++i) {
    prefix += freqs[i];
    curve.push_back({i + 1, static_cast<double>(prefix) / static_cast<double>(total)});
  }
  return curve;
}

// Smallest k whose coverage reaches the threshold.
inline std::size_t min_vocab_for_coverage(std::span<const std::uint64_t> freqs, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw PreconditionError("coverage threshold must lie in (0,1]");
  const auto curve = coverage_curve(freqs);
  for (const auto& p : curve) {
    if (p.coverage >= threshold) return p.k;
  }
  return curve.size();
}

inline std::vector<std::uint64_t> frequencies_of(std::span<const TokenCount> counts) {
  std::vector<std::uint64_t> f;
  f.reserve(counts.size());
  for (const auto& c : counts) f.push_back(c.count);
  return f;
}

inline std::vector<TokenId> encode(const std::vector<Token>& tokens, const Vocabulary& vocab) {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(vocab.id(t));
  return ids;
}

// Fixed-length id sequence. Real tokens occupy the last true_length slots;
// everything before them is kPadId.
struct TokenSequence {
  std::vector<TokenId> ids;
  std::size_t true_length = 0;

  std::size_t length() const noexcept { return ids.size(); }
  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

// Pre-pads with zeros, or keeps the first `length` ids.
inline TokenSequence pad_truncate(std::span<const TokenId> ids, std::size_t length = kDefaultSeqLen) {
  if (length < 1) throw PreconditionError("sequence length must be at least 1");
  if (ids.empty()) throw PreconditionError("cannot pad an empty id sequence");
  TokenSequence seq;
  seq.true_length = std::min(ids.size(), length);
  seq.ids.assign(length - seq.true_length, kPadId);
  seq.ids.insert(seq.ids.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(seq.true_length));
  return seq;
}

struct NormalizedLabel {
  double value = 0.0;
};

inline NormalizedLabel normalize_label(double rating) {
  if (!rating_in_range(rating)) throw PreconditionError("rating outside [0,5]: " + std::to_string(rating));
  return {rating / kMaxRating};
}

inline double denormalize(double v) noexcept { return std::clamp(v, 0.0, 1.0) * kMaxRating; }

}  // namespace sentiscore
