#pragma once

// Polarity baseline: multinomial naive Bayes over tokens with add-one
// smoothing. Reviews rated 4 or more are positive, 2 or less negative, and
// the rest are ignored. Scores are 5 * P(positive | tokens).

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "corpus.hpp"
#include "error.hpp"
#include "format.hpp"
#include "textprep.hpp"

namespace sentiscore {

constexpr double kPositiveMinRating = 4.0;
constexpr double kNegativeMaxRating = 2.0;

struct NBModel {
  double log_prior_pos = 0.0;
  double log_prior_neg = 0.0;
  // Smoothed likelihood of a token never seen in training.
  double unseen_pos = 0.0;
  double unseen_neg = 0.0;
  struct Likelihood {
    double pos = 0.0;
    double neg = 0.0;
  };
  std::unordered_map<Token, Likelihood> tokens;
  std::vector<Token> order;  // first-seen order, used for stable serialization
};

inline NBModel train_baseline_tokens(const std::vector<std::vector<Token>>& docs, const std::vector<double>& ratings) {
  if (docs.size() != ratings.size()) throw PreconditionError("train_baseline: documents and ratings differ in length");
  std::unordered_map<Token, std::pair<std::uint64_t, std::uint64_t>> counts;
  std::vector<Token> order;
  std::uint64_t n_pos = 0, n_neg = 0, total_pos = 0, total_neg = 0;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    const bool pos = ratings[d] >= kPositiveMinRating;
    const bool neg = ratings[d] <= kNegativeMaxRating;
    if (!pos && !neg) continue;
    (pos ? n_pos : n_neg) += 1;
    for (const auto& t : docs[d]) {
      auto [it, inserted] = counts.try_emplace(t, 0, 0);
      if (inserted) order.push_back(t);
      if (pos) {
        ++it->second.first;
        ++total_pos;
      } else {
        ++it->second.second;
        ++total_neg;
      }
    }
  }
  if (n_pos == 0 || n_neg == 0) {
    throw PreconditionError("baseline needs at least one positive (rating >= 4) and one negative (rating <= 2) review");
  }
  NBModel m;
  const auto n = static_cast<double>(n_pos + n_neg);
  m.log_prior_pos = std::log(static_cast<double>(n_pos) / n);
  m.log_prior_neg = std::log(static_cast<double>(n_neg) / n);
  const auto vocab = static_cast<double>(counts.size());
  const double denom_pos = static_cast<double>(total_pos) + vocab;
  const double denom_neg = static_cast<double>(total_neg) + vocab;
  m.unseen_pos = std::log(1.0 / denom_pos);
  m.unseen_neg = std::log(1.0 / denom_neg);
  for (const auto& t : order) {
    const auto [cp, cn] = counts.at(t);
    m.tokens.emplace(t, NBModel::Likelihood{std::log((static_cast<double>(cp) + 1.0) / denom_pos),
                                            std::log((static_cast<double>(cn) + 1.0) / denom_neg)});
  }
  m.order = std::move(order);
  return m;
}

inline NBModel train_baseline(const std::vector<CleanReview>& reviews, const Preprocessor& prep) {
  std::vector<std::vector<Token>> docs;
  std::vector<double> ratings;
  docs.reserve(reviews.size());
  for (const auto& r : reviews) {
    docs.push_back(prep.tokenize(r.text));
    ratings.push_back(r.rating);
  }
  return train_baseline_tokens(docs, ratings);
}

// P(positive | tokens) computed in log space.
inline double positive_posterior(const std::vector<Token>& tokens, const NBModel& m) {
  double lp = m.log_prior_pos, ln = m.log_prior_neg;
  for (const auto& t : tokens) {
    const auto it = m.tokens.find(t);
    lp += it == m.tokens.end() ? m.unseen_pos : it->second.pos;
    ln += it == m.tokens.end() ? m.unseen_neg : it->second.neg;
  }
  // p = e^lp / (e^lp + e^ln) = 1 / (1 + e^(ln - lp))
  const double d = ln - lp;
  return d > 0 ? std::exp(-d) / (1.0 + std::exp(-d)) : 1.0 / (1.0 + std::exp(d));
}

inline double score_baseline_tokens(const std::vector<Token>& tokens, const NBModel& m) {
  return kMaxRating * positive_posterior(tokens, m);
}

inline double score_baseline(std::string_view text, const NBModel& m, const Preprocessor& prep) {
  return score_baseline_tokens(prep.tokenize(text), m);
}

// Text form:
//   sentiscore-nb 1
//   log_prior_pos <v> / log_prior_neg / unseen_pos / unseen_neg
//   tokens <n>
//   <token>\t<log p(token|pos)>\t<log p(token|neg)>   (n lines)
inline void save_baseline(const std::filesystem::path& path, const NBModel& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write baseline model", path.string());
  out << "sentiscore-nb 1\n"
      << "log_prior_pos " << format_double(m.log_prior_pos) << '\n'
      << "log_prior_neg " << format_double(m.log_prior_neg) << '\n'
      << "unseen_pos " << format_double(m.unseen_pos) << '\n'
      << "unseen_neg " << format_double(m.unseen_neg) << '\n'
      << "tokens " << m.order.size() << '\n';
  for (const auto& t : m.order) {
    const auto& l = m.tokens.at(t);
    out << t << '\t' << format_double(l.pos) << '\t' << format_double(l.neg) << '\n';
  }
  if (!out) throw IoError("write failed", path.string());
}

inline NBModel load_baseline(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open baseline model", path.string());
  std::string line;
  std::size_t n = 0;
  auto next = [&]() -> std::string& {
    if (!std::getline(in, line)) throw ParseError("baseline model truncated", n + 1);
    ++n;
    return line;
  };
  if (next() != "sentiscore-nb 1") throw ParseError("not a baseline model file", n);
  NBModel m;
  auto field = [&](const char* name) {
    std::istringstream s(next());
    std::string key;
    double v = 0;
    if (!(s >> key >> v) || key != name) throw ParseError(std::string("expected ") + name, n);
    return v;
  };
  m.log_prior_pos = field("log_prior_pos");
  m.log_prior_neg = field("log_prior_neg");
  m.unseen_pos = field("unseen_pos");
  m.unseen_neg = field("unseen_neg");
  const auto count = static_cast<std::size_t>(field("tokens"));
  for (std::size_t i = 0; i < count; ++i) {
    const auto& l = next();
    const auto a = l.find('\t');
    const auto b = a == std::string::npos ? a : l.find('\t', a + 1);
    if (b == std::string::npos) throw ParseError("token line needs three tab-separated fields", n);
    Token t = l.substr(0, a);
    NBModel::Likelihood lk;
    try {
      lk.pos = std::stod(l.substr(a + 1, b - a - 1));
      lk.neg = std::stod(l.substr(b + 1));
    } catch (const std::logic_error&) {
      throw ParseError("bad log-likelihood", n);
    }
    if (!m.tokens.emplace(t, lk).second) throw ParseError("duplicate token in baseline model", n);
    m.order.push_back(std::move(t));
  }
  return m;
}

}  // namespace sentiscore
