#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "gen.hpp"
#include "sentiscore/baseline.hpp"

using namespace sentiscore;

using Docs = std::vector<std::vector<Token>>;

TEST(Baseline, PositiveOnlyTokenFavorsPositive) {
  const Docs docs = {{"好", "快"}, {"差", "快"}, {"好"}};
  const auto m = train_baseline_tokens(docs, {5, 1, 4});
  EXPECT_GT(m.tokens.at("好").pos, m.tokens.at("好").neg);
  // |V| = 3, positive tokens 3, negative tokens 2
  EXPECT_NEAR(m.tokens.at("好").pos, std::log(3.0 / 6.0), 1e-15);
  EXPECT_NEAR(m.tokens.at("好").neg, std::log(1.0 / 5.0), 1e-15);
  EXPECT_NEAR(m.log_prior_pos, std::log(2.0 / 3.0), 1e-15);
}

TEST(Baseline, SymmetricCorpusHasEqualPriors) {
  const auto m = train_baseline_tokens({{"好"}, {"差"}, {"快"}, {"慢"}}, {5, 1, 4, 2});
  EXPECT_NEAR(m.log_prior_pos, std::log(0.5), 1e-15);
  EXPECT_NEAR(m.log_prior_neg, std::log(0.5), 1e-15);
  EXPECT_NEAR(std::exp(m.log_prior_pos) + std::exp(m.log_prior_neg), 1.0, 1e-15);
  EXPECT_EQ(score_baseline_tokens({}, m), 2.5);
}

TEST(Baseline, MiddleRatingsAreDroppedAndClassesRequired) {
  EXPECT_THROW(train_baseline_tokens({{"好"}, {"差"}}, {5, 3}), PreconditionError);
  EXPECT_THROW(train_baseline_tokens({{"好"}}, {1, 2}), PreconditionError);
  const auto m = train_baseline_tokens({{"好"}, {"中"}, {"差"}}, {5, 3, 1});
  EXPECT_FALSE(m.tokens.contains("中"));
}

TEST(Baseline, SinglePairStaysFinite) {
  const auto m = train_baseline_tokens({{"好"}, {"差"}}, {5, 0});
  for (const auto& [t, l] : m.tokens) {
    EXPECT_TRUE(std::isfinite(l.pos) && std::isfinite(l.neg)) << t;
  }
  EXPECT_TRUE(std::isfinite(m.unseen_pos));
  const double s = score_baseline_tokens({"好", "新"}, m);
  EXPECT_GT(s, 2.5);
  EXPECT_LE(s, 5.0);
}

TEST(Baseline, PositiveTextScoresAboveMidpointAndIsPure) {
  const auto m = train_baseline_tokens({{"好", "棒"}, {"差", "慢"}, {"好"}, {"差"}}, {5, 1, 4, 2});
  const std::vector<Token> text = {"好", "棒", "好"};
  EXPECT_GT(score_baseline_tokens(text, m), 2.5);
  EXPECT_EQ(score_baseline_tokens(text, m), score_baseline_tokens(text, m));
}

TEST(Baseline, LongInputsDoNotOverflow) {
  const auto m = train_baseline_tokens({{"好"}, {"差"}, {"好"}}, {5, 1, 5});
  const std::vector<Token> pos(10000, "好"), neg(10000, "差");
  EXPECT_EQ(score_baseline_tokens(pos, m), 5.0);
  EXPECT_EQ(score_baseline_tokens(neg, m), 0.0);
}

// Appending a token seen only in positive reviews raises its log-odds by
// log((c+1)(N_neg+|V|)/(N_pos+|V|)), which is non-negative whenever
// N_pos <= 2 N_neg + |V|. The generator keeps corpora inside that regime.
TEST(Baseline, AppendingPositiveOnlyTokenNeverLowersScore) {
  Xoshiro256pp rng(17);
  int checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    Docs docs;
    std::vector<double> ratings;
    const auto n = 2 + rng.below(10);
    for (std::uint64_t d = 0; d < n; ++d) {
      std::vector<Token> doc;
      const auto len = rng.below(6);
      for (std::uint64_t k = 0; k < len; ++k) doc.push_back(gen::cjk_text(rng, 1, 6));
      docs.push_back(doc);
      ratings.push_back(d == 0 ? 5.0 : (d == 1 ? 1.0 : 5.0 * rng.uniform()));
    }
    docs[0].push_back("独");
    const auto m = train_baseline_tokens(docs, ratings);
    std::uint64_t n_pos = 0, n_neg = 0;
    bool pos_only = true;
    for (std::size_t d = 0; d < docs.size(); ++d) {
      const bool pos = ratings[d] >= 4, neg = ratings[d] <= 2;
      for (const auto& t : docs[d]) {
        if (pos) ++n_pos;
        if (neg) {
          ++n_neg;
          if (t == "独") pos_only = false;
        }
      }
    }
    if (!pos_only || n_pos > 2 * n_neg + m.tokens.size()) continue;
    ++checked;
    std::vector<Token> text;
    const auto len = rng.below(8);
    for (std::uint64_t k = 0; k < len; ++k) text.push_back(gen::cjk_text(rng, 1, 6));
    const double before = score_baseline_tokens(text, m);
    text.push_back("独");
    EXPECT_GE(score_baseline_tokens(text, m), before - 1e-12);
  }
  EXPECT_GT(checked, 500);
}

TEST(Baseline, ScoresAlwaysInRange) {
  Xoshiro256pp rng(3);
  const auto m = train_baseline_tokens({{"好", "棒"}, {"差"}, {"慢", "差"}}, {5, 1, 0});
  for (int i = 0; i < 1000; ++i) {
    std::vector<Token> t;
    const auto len = rng.below(50);
    for (std::uint64_t k = 0; k < len; ++k) t.push_back(gen::cjk_text(rng, 1, 5));
    const double s = score_baseline_tokens(t, m);
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 5.0);
  }
}

TEST(Baseline, PipelineScoringAndFileRoundTrip) {
  Preprocessor prep(Dictionary({"充电", "方便", "麻烦"}), {"的"});
  const std::vector<CleanReview> reviews = {{"u1", "充电方便", 5}, {"u2", "充电的麻烦", 1}, {"u3", "一般", 3}};
  const auto m = train_baseline(reviews, prep);
  EXPECT_GT(score_baseline("<b>方便</b>!!", m, prep), 2.5);
  EXPECT_EQ(score_baseline("!!!", m, prep), 2.5);

  const auto path = std::filesystem::temp_directory_path() / "sentiscore_nb.txt";
  save_baseline(path, m);
  const auto back = load_baseline(path);
  EXPECT_EQ(back.order, m.order);
  EXPECT_EQ(back.log_prior_pos, m.log_prior_pos);
  for (const auto& t : m.order) {
    EXPECT_EQ(back.tokens.at(t).pos, m.tokens.at(t).pos);
    EXPECT_EQ(back.tokens.at(t).neg, m.tokens.at(t).neg);
  }
  EXPECT_EQ(score_baseline("充电方便", back, prep), score_baseline("充电方便", m, prep));
}
