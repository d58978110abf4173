#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "pbt/error.hpp"
#include "pbt/text.hpp"
#include "test_util.hpp"

using namespace pbt;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& content) {
  auto path = std::filesystem::temp_directory_path() / ("pbt_text_" + name);
  std::ofstream(path, std::ios::binary) << content;
  return path;
}

Text abrainadrain() { return Text::from_string("abrainadrain"); }

}  // namespace

TEST(LoadText, ReadsFileAndAlphabet) {
  const Text t = load_text(write_temp("abrainadrain", "abrainadrain"));
  EXPECT_EQ(t.size(), 12u);
  EXPECT_EQ(t.sigma(), 6u);
}

TEST(LoadText, SingleSymbol) {
  const Text t = load_text(write_temp("one", "a"));
  EXPECT_EQ(t.size(), 1u);
  EXPECT_EQ(t.sigma(), 1u);
}

TEST(LoadText, UnaryHistogram) {
  const Text t = load_text(write_temp("unary", "aaaa"));
  EXPECT_EQ(t.size(), 4u);
  EXPECT_EQ(t.sigma(), 1u);
  EXPECT_EQ(t.histogram()['a'], 4u);
}

TEST(LoadText, RejectsEmptyAndMissing) {
  EXPECT_THROW(load_text(write_temp("empty", "")), InvalidArgument);
  EXPECT_THROW(load_text("/nonexistent/pbt/input"), IoError);
  EXPECT_THROW(Text(std::vector<Byte>{}), InvalidArgument);
}

TEST(Text, HistogramInvariants) {
  std::mt19937_64 rng(1);
  const Text t(oracle::make_text(rng, 5000, 16, oracle::TextClass::random));
  std::uint64_t sum = 0;
  unsigned nonzero = 0;
  for (auto h : t.histogram()) {
    sum += h;
    nonzero += h != 0;
  }
  EXPECT_EQ(sum, t.size());
  EXPECT_EQ(nonzero, t.sigma());
  EXPECT_EQ(t.alphabet().size(), t.sigma());
}

TEST(NaiveQueries, Access) {
  const Text t = abrainadrain();
  EXPECT_EQ(naive_access(t, 1), 'a');
  EXPECT_EQ(naive_access(t, 12), 'n');
  EXPECT_EQ(naive_access(t, 4), 'a');
  EXPECT_THROW(naive_access(t, 0), BoundsError);
  EXPECT_THROW(naive_access(t, 13), BoundsError);
}

TEST(NaiveQueries, Rank) {
  EXPECT_EQ(naive_rank(abrainadrain(), 'a', 12), 4u);
  EXPECT_EQ(naive_rank(abrainadrain(), 'x', 0), 0u);
  EXPECT_EQ(naive_rank(Text::from_string("aaaa"), 'a', 3), 3u);
  EXPECT_THROW(naive_rank(abrainadrain(), 'a', 13), BoundsError);
}

TEST(NaiveQueries, Select) {
  // a b r a i n a d r a i n: the second 'r' is position 9
  EXPECT_EQ(naive_select(abrainadrain(), 'r', 2), 9u);
  EXPECT_EQ(naive_select(Text::from_string("aaaa"), 'a', 4), 4u);
  EXPECT_THROW(naive_select(abrainadrain(), 'z', 1), NotFoundError);
  EXPECT_THROW(naive_select(abrainadrain(), 'a', 0), BoundsError);
}

TEST(NaiveQueries, RankMonotoneAndSelectDual) {
  std::mt19937_64 rng(2);
  const Text t(oracle::make_text(rng, 3000, 4, oracle::TextClass::mutated_repeat));
  for (Byte c : t.alphabet()) {
    for (std::uint64_t i = 0; i < t.size(); ++i) {
      const auto a = naive_rank(t, c, i), b = naive_rank(t, c, i + 1);
      ASSERT_LE(a, b);
      ASSERT_LE(b, a + 1);
    }
    const auto total = naive_rank(t, c, t.size());
    for (std::uint64_t j = 1; j <= total; ++j) ASSERT_EQ(naive_rank(t, c, naive_select(t, c, j)), j);
    for (std::uint64_t p = 1; p <= t.size(); p += 7) {
      const auto r = naive_rank(t, c, p);
      if (r > 0) {
        ASSERT_LE(naive_select(t, c, r), p);
      }
    }
  }
}

TEST(Lz77, UnaryText) {
  const auto f = lz77_factorize(Text::from_string("aaaa"));
  ASSERT_EQ(f.z(), 2u);
  EXPECT_TRUE(f.factors[0].literal);
  EXPECT_EQ(f.factors[0].source, 'a');
  EXPECT_FALSE(f.factors[1].literal);
  EXPECT_EQ(f.factors[1].position, 1u);
  EXPECT_EQ(f.factors[1].source, 0u);  // 0-based: the first character
  EXPECT_EQ(f.factors[1].length, 3u);
}

TEST(Lz77, NoRepeats) {
  const auto f = lz77_factorize(Text::from_string("ab"));
  ASSERT_EQ(f.z(), 2u);
  EXPECT_TRUE(f.factors[0].literal);
  EXPECT_TRUE(f.factors[1].literal);
}

TEST(Lz77, PeriodTwo) {
  const auto f = lz77_factorize(Text::from_string("abab"));
  ASSERT_EQ(f.z(), 3u);
  EXPECT_TRUE(f.factors[0].literal);
  EXPECT_TRUE(f.factors[1].literal);
  EXPECT_EQ(f.factors[2], (Lz77Factor{2, 2, 0, false}));
}

TEST(Lz77, MatchesNaiveAndRoundTrips) {
  std::mt19937_64 rng(3);
  const oracle::TextClass classes[] = {oracle::TextClass::random, oracle::TextClass::periodic,
                                        oracle::TextClass::mutated_repeat};
  for (int rep = 0; rep < 60; ++rep) {
    const std::size_t n = 1 + rng() % 700;
    const unsigned sigma = std::vector<unsigned>{1, 2, 4, 16, 96, 256}[rng() % 6];
    const Text t(oracle::make_text(rng, n, sigma, classes[rep % 3]));
    const auto fast = lz77_factorize(t);
    const auto slow = lz77_factorize_naive(t);
    ASSERT_EQ(fast.factors, slow.factors) << "n=" << n << " sigma=" << sigma;
    const auto expanded = lz77_expand(fast);
    ASSERT_TRUE(std::equal(expanded.begin(), expanded.end(), t.bytes().begin(), t.bytes().end()));
  }
}

TEST(Lz77, SourcesPrecedeFactors) {
  std::mt19937_64 rng(4);
  const Text t(oracle::make_text(rng, 20000, 4, oracle::TextClass::mutated_repeat));
  for (const auto& f : lz77_factorize(t).factors)
    if (!f.literal) {
      ASSERT_LT(f.source, f.position);
    }
}

TEST(Corpus, DeterministicAndRepetitive) {
  RepetitiveCorpusSpec spec;
  spec.n = 1 << 16;
  spec.seed_len = 1 << 10;
  const auto a = make_repetitive_corpus(spec);
  const auto b = make_repetitive_corpus(spec);
  EXPECT_EQ(a, b);
  ASSERT_EQ(a.size(), spec.n);
  std::size_t diffs = 0;
  for (std::size_t i = spec.seed_len; i < a.size(); ++i) diffs += a[i] != a[i % spec.seed_len];
  // mutation rate 0.001 over 63 KiB of copies: a few dozen changed bytes
  EXPECT_GT(diffs, 10u);
  EXPECT_LT(diffs, 200u);
  for (Byte c : a) ASSERT_TRUE(c >= 0x20 && c <= 0x7e);
}
