#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numeric>

#include "gen.hpp"
#include "oracles.hpp"
#include "sentiscore/textprep.hpp"

using namespace sentiscore;
namespace fs = std::filesystem;

using Tokens = std::vector<Token>;

TEST(Segment, Examples) {
  EXPECT_EQ(segment("充电桩很方便", {"充电", "充电桩", "很", "方便"}), (Tokens{"充电桩", "很", "方便"}));
  EXPECT_EQ(segment("好", std::unordered_set<Token>{}), (Tokens{"好"}));
  EXPECT_EQ(segment("abcd", {"ab", "cd"}), (Tokens{"ab", "cd"}));
}

TEST(Segment, FallsBackToSingleCharacters) {
  EXPECT_EQ(segment("充电很快", {"充电"}), (Tokens{"充电", "很", "快"}));
  EXPECT_TRUE(segment("", {"充电"}).empty());
}

TEST(Segment, ConcatenationPropertyWithRandomDictionaries) {
  Xoshiro256pp rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    std::unordered_set<Token> dict;
    const auto words = rng.below(8);
    for (std::uint64_t w = 0; w < words; ++w) {
      auto word = gen::cjk_text(rng, 4, 4);
      if (!word.empty()) dict.insert(word);
    }
    const auto text = gen::cjk_text(rng, 30, 4);
    const auto tokens = segment(text, dict);
    EXPECT_EQ(std::accumulate(tokens.begin(), tokens.end(), std::string()), text);
    for (const auto& t : tokens) {
      EXPECT_TRUE(dict.contains(t) || utf8::to_u32(t).size() == 1) << t;
    }
  }
}

TEST(RemoveStopwords, Examples) {
  EXPECT_EQ(remove_stopwords({"充电桩", "是", "方便"}, {"是", "的"}), (Tokens{"充电桩", "方便"}));
  const Tokens t = {"好", "差"};
  EXPECT_EQ(remove_stopwords(t, {}), t);
  EXPECT_TRUE(remove_stopwords({"的", "的"}, {"的"}).empty());
}

TEST(WordList, SkipsCommentsAndBlankLines) {
  const auto p = fs::temp_directory_path() / "sentiscore_words.txt";
  std::ofstream(p) << "# stop words\n的\n\n是\r\n  # indented comment\n在\n";
  EXPECT_EQ(load_word_list(p), (std::unordered_set<Token>{"的", "是", "在"}));
}

TEST(Preprocessor, CleansSegmentsAndFilters) {
  Preprocessor prep(Dictionary({"充电桩", "方便", "充电"}), {"是", "很"});
  EXPECT_EQ(prep.tokenize("<p>充电桩是很方便!!!</p>"), (Tokens{"充电桩", "方便"}));
  EXPECT_EQ(prep.tokenize("充电，方便"), (Tokens{"充电", "方便"}));
  EXPECT_TRUE(prep.tokenize("是很").empty());
}

TEST(BuildVocab, Examples) {
  const std::vector<Tokens> corpus = {{"好", "差", "好", "慢"}, {"好", "差", "好"}, {"差", "好"}};
  const auto v = build_vocab(corpus, 2);
  EXPECT_EQ(v.size(), 4u);
  EXPECT_EQ(v.id("好"), 2u);
  EXPECT_EQ(v.id("差"), 3u);
  EXPECT_EQ(v.frequency(2), 5u);
  EXPECT_EQ(v.frequency(3), 3u);
  EXPECT_FALSE(v.contains("慢"));
  EXPECT_EQ(v.id("慢"), kOovId);

  EXPECT_EQ(build_vocab({{"唯一"}}, 10).id("唯一"), 2u);

  const auto tie = build_vocab({{"乙", "甲"}, {"甲", "乙"}}, 10);
  EXPECT_EQ(tie.id("乙"), 2u);
  EXPECT_EQ(tie.id("甲"), 3u);

  EXPECT_THROW(build_vocab({}, 5), PreconditionError);
  EXPECT_THROW(build_vocab({{}}, 5), PreconditionError);
  EXPECT_THROW(build_vocab({{"a"}}, 0), PreconditionError);
}

TEST(BuildVocab, MatchesCountSortOracle) {
  Xoshiro256pp rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Tokens> corpus(1 + rng.below(6));
    for (auto& doc : corpus) {
      const auto n = rng.below(15);
      for (std::uint64_t i = 0; i < n; ++i) doc.push_back(gen::cjk_text(rng, 1, 12) + "x");
    }
    const auto expected = oracle::vocab_order(corpus);
    if (expected.empty()) continue;
    const std::size_t budget = 1 + rng.below(expected.size() + 2);
    const auto v = build_vocab(corpus, budget);
    const std::size_t kept = std::min(budget, expected.size());
    ASSERT_EQ(v.content_size(), kept);
    for (std::size_t i = 0; i < kept; ++i) {
      EXPECT_EQ(v.token(static_cast<TokenId>(i + 2)), expected[i].first);
      EXPECT_EQ(v.frequency(static_cast<TokenId>(i + 2)), expected[i].second);
    }
  }
}

TEST(Vocabulary, FileRoundTripAndFormat) {
  const auto v = build_vocab({{"好", "差", "好"}}, 10);
  const auto p = fs::temp_directory_path() / "sentiscore_vocab.tsv";
  v.save(p);
  std::ifstream in(p);
  std::string contents((std::istreambuf_iterator<char>(in)), {});
  EXPECT_EQ(contents, "<PAD>\t0\t0\n<OOV>\t1\t0\n好\t2\t2\n差\t3\t1\n");
  const auto back = Vocabulary::load(p);
  EXPECT_EQ(back.serialize(), v.serialize());
  EXPECT_EQ(back.digest(), v.digest());
  EXPECT_EQ(back.id("差"), 3u);
}

TEST(Vocabulary, LoadRejectsBadFiles) {
  const auto p = fs::temp_directory_path() / "sentiscore_bad_vocab.tsv";
  std::ofstream(p) << "<PAD>\t0\t0\n<OOV>\t1\t0\n好\t3\t2\n";
  EXPECT_THROW(Vocabulary::load(p), ParseError);
  std::ofstream(p) << "<PAD>\t0\t0\n<OOV>\t1\t0\n好\t2\t1\n差\t3\t5\n";
  EXPECT_THROW(Vocabulary::load(p), ParseError);
  std::ofstream(p) << "x\t0\t0\n<OOV>\t1\t0\n";
  EXPECT_THROW(Vocabulary::load(p), ParseError);
}

TEST(Coverage, Examples) {
  const std::vector<std::uint64_t> f = {5, 3, 1, 1};
  const auto c = coverage_curve(f);
  ASSERT_EQ(c.size(), 4u);
  const double expected[] = {0.5, 0.8, 0.9, 1.0};
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(c[i].k, i + 1);
    EXPECT_DOUBLE_EQ(c[i].coverage, expected[i]);
  }
  const std::vector<std::uint64_t> single = {7};
  EXPECT_EQ(coverage_curve(single).front().coverage, 1.0);
  EXPECT_THROW(coverage_curve(std::vector<std::uint64_t>{}), PreconditionError);
  EXPECT_THROW(coverage_curve(std::vector<std::uint64_t>{1, 2}), PreconditionError);
}

TEST(MinVocabForCoverage, Examples) {
  const std::vector<std::uint64_t> f = {5, 3, 1, 1};
  EXPECT_EQ(min_vocab_for_coverage(f, 0.95), 4u);
  EXPECT_EQ(min_vocab_for_coverage(f, 0.5), 1u);
  EXPECT_EQ(min_vocab_for_coverage(f, 1.0), 4u);
  EXPECT_THROW(min_vocab_for_coverage(f, 0.0), PreconditionError);
  EXPECT_THROW(min_vocab_for_coverage(f, 1.01), PreconditionError);
}

TEST(MinVocabForCoverage, BracketsThresholdOnRandomCounts) {
  Xoshiro256pp rng(8);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<std::uint64_t> f(1 + rng.below(40));
    for (auto& x : f) x = 1 + rng.below(100);
    std::sort(f.rbegin(), f.rend());
    const double t = 0.01 + 0.99 * rng.uniform();
    const auto curve = coverage_curve(f);
    for (std::size_t i = 1; i < curve.size(); ++i) EXPECT_GE(curve[i].coverage, curve[i - 1].coverage);
    EXPECT_EQ(curve.back().coverage, 1.0);
    const auto k = min_vocab_for_coverage(f, t);
    EXPECT_EQ(k, oracle::min_k(f, t));
    EXPECT_GE(curve[k - 1].coverage, t);
    if (k > 1) {
      EXPECT_LT(curve[k - 2].coverage, t);
    }
  }
}

TEST(Encode, Examples) {
  const auto v = build_vocab({{"好", "好", "差"}}, 10);
  EXPECT_EQ(encode({"好", "差"}, v), (std::vector<TokenId>{2, 3}));
  EXPECT_EQ(encode({"新词"}, v), (std::vector<TokenId>{kOovId}));
  EXPECT_TRUE(encode({}, v).empty());
}

TEST(PadTruncate, Examples) {
  const std::vector<TokenId> two = {5, 7};
  const auto a = pad_truncate(two, 4);
  EXPECT_EQ(a.ids, (std::vector<TokenId>{0, 0, 5, 7}));
  EXPECT_EQ(a.true_length, 2u);

  std::vector<TokenId> long_ids(150);
  std::iota(long_ids.begin(), long_ids.end(), 1u);
  const auto b = pad_truncate(long_ids, 100);
  EXPECT_EQ(b.ids, std::vector<TokenId>(long_ids.begin(), long_ids.begin() + 100));
  EXPECT_EQ(b.true_length, 100u);

  std::vector<TokenId> exact(100, 9);
  EXPECT_EQ(pad_truncate(exact).ids, exact);

  EXPECT_THROW(pad_truncate(std::vector<TokenId>{}, 4), PreconditionError);
  EXPECT_THROW(pad_truncate(two, 0), PreconditionError);
}

TEST(PadTruncate, PropertyLengthAndPrePadding) {
  Xoshiro256pp rng(31);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<TokenId> ids(1 + rng.below(60));
    for (auto& id : ids) id = static_cast<TokenId>(1 + rng.below(50));
    const std::size_t L = 1 + rng.below(40);
    const auto seq = pad_truncate(ids, L);
    ASSERT_EQ(seq.ids.size(), L);
    EXPECT_EQ(seq.true_length, std::min(ids.size(), L));
    for (std::size_t i = 0; i < L - seq.true_length; ++i) EXPECT_EQ(seq.ids[i], kPadId);
    for (std::size_t i = 0; i < seq.true_length; ++i) EXPECT_EQ(seq.ids[L - seq.true_length + i], ids[i]);
  }
}

TEST(Labels, NormalizeAndDenormalize) {
  EXPECT_DOUBLE_EQ(normalize_label(4.5).value, 0.9);
  EXPECT_EQ(normalize_label(0).value, 0.0);
  EXPECT_EQ(normalize_label(5).value, 1.0);
  EXPECT_EQ(denormalize(1.2), 5.0);
  EXPECT_EQ(denormalize(-0.1), 0.0);
  EXPECT_THROW(normalize_label(5.01), PreconditionError);
  EXPECT_THROW(normalize_label(-1), PreconditionError);
}

TEST(Labels, RoundTripProperty) {
  Xoshiro256pp rng(4);
  for (int i = 0; i < 1000; ++i) {
    const double r = 5.0 * rng.uniform();
    EXPECT_NEAR(denormalize(normalize_label(r).value), r, 1e-12);
  }
}
