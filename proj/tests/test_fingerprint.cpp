#include <gtest/gtest.h>

#include <random>

#include "pbt/error.hpp"
#include "pbt/fingerprint.hpp"
#include "test_util.hpp"

using namespace pbt;

namespace {

std::vector<Byte> bytes_of(std::string_view s) { return {s.begin(), s.end()}; }

std::vector<Byte> random_bytes(std::mt19937_64& rng, std::size_t n) {
  std::vector<Byte> t(n);
  for (auto& b : t) b = static_cast<Byte>(rng());
  return t;
}

}  // namespace

TEST(FingerprintParams, Powers) {
  FingerprintParams p(100);
  EXPECT_EQ(p.power(0), 1u);
  for (std::size_t k = 1; k <= 100; ++k) EXPECT_EQ(p.power(k), p.power(k - 1) * 33u);
  EXPECT_EQ(p.power(1000), base_power(1000));
  EXPECT_EQ(FingerprintParams::base, 33u);
}

TEST(FpDirect, Definition) {
  EXPECT_EQ(fp_direct(bytes_of("a"), 0, 1), (Fingerprint{97, 1}));
  EXPECT_EQ(fp_direct(bytes_of("ab"), 0, 2), (Fingerprint{3299, 2}));
  const auto t = bytes_of("abrainadrain");
  EXPECT_EQ(fp_direct(t, 2, 4), fp_direct(t, 8, 10));  // "ra" twice
  EXPECT_THROW(fp_direct(t, 3, 3), BoundsError);
  EXPECT_THROW(fp_direct(t, 0, 13), BoundsError);
}

TEST(FpDirect, LengthSeparatesWindows) {
  // "\x00a" and "a" share the value but not the length
  const std::vector<Byte> t{0, 'a'};
  EXPECT_EQ(fp_direct(t, 0, 2).value, fp_direct(t, 1, 2).value);
  EXPECT_NE(fp_direct(t, 0, 2), fp_direct(t, 1, 2));
}

TEST(FpRoll, MatchesDirect) {
  const auto t = bytes_of("abr");
  FingerprintParams p(4);
  const auto rolled = fp_roll(fp_direct(t, 0, 2), 'a', 'r', p);
  EXPECT_EQ(rolled, fp_direct(t, 1, 3));
  EXPECT_EQ(rolled.value, 3299u * 33u - 97u * 33u * 33u + 114u);
}

TEST(FpRoll, ConstantOnUnary) {
  const auto t = bytes_of("aaaa");
  FingerprintParams p(2);
  auto f = fp_direct(t, 0, 2);
  for (int i = 0; i < 2; ++i) {
    const auto g = fp_roll(f, 'a', 'a', p);
    EXPECT_EQ(g, f);
    f = g;
  }
}

TEST(FpRoll, EveryWindowOfRandomText) {
  std::mt19937_64 rng(5);
  const auto t = random_bytes(rng, 256);
  FingerprintParams p(17);
  auto f = fp_direct(t, 0, 17);
  for (std::size_t s = 1; s + 17 <= t.size(); ++s) {
    f = fp_roll(f, t[s - 1], t[s + 16], p);
    ASSERT_EQ(f, fp_direct(t, s, s + 17));
  }
}

TEST(FpConcat, ComposesPairs) {
  const auto t = bytes_of("abrainadrain");
  EXPECT_EQ(fp_concat(fp_direct(t, 0, 2), fp_direct(t, 2, 6)), fp_direct(t, 0, 6));
}

TEST(FpAllWindows, PeriodTwo) {
  const auto w = fp_all_windows(bytes_of("abab"), 2, 0, 4);
  ASSERT_EQ(w.size(), 3u);
  EXPECT_EQ(w[0], w[2]);
  EXPECT_NE(w[0], w[1]);
}

TEST(FpAllWindows, AbrainadrainRepeats) {
  const auto w = fp_all_windows(bytes_of("abrainadrain"), 2, 0, 12);
  EXPECT_EQ(w[2], w[8]);  // "ra"
  EXPECT_EQ(w[4], w[10]);  // "in"
}

TEST(FpAllWindows, MatchesDirect) {
  std::mt19937_64 rng(6);
  const auto t = random_bytes(rng, 4096);
  const auto w = fp_all_windows(t, 64, 0, t.size());
  ASSERT_EQ(w.size(), t.size() - 63);
  for (std::size_t p = 0; p < w.size(); ++p) ASSERT_EQ(w[p], fp_direct(t, p, p + 64).value);
}

TEST(FpAllWindows, SubRange) {
  std::mt19937_64 rng(7);
  const auto t = random_bytes(rng, 300);
  const auto w = fp_all_windows(t, 10, 50, 120);
  ASSERT_EQ(w.size(), 61u);
  for (std::size_t i = 0; i < w.size(); ++i) ASSERT_EQ(w[i], fp_direct(t, 50 + i, 60 + i).value);
  EXPECT_EQ(fp_blocked_windows(t, 10, 50, 120), w);
}

TEST(FpAllWindows, RejectsBadArguments) {
  const auto t = bytes_of("abcd");
  EXPECT_THROW(fp_all_windows(t, 0, 0, 4), InvalidArgument);
  EXPECT_THROW(fp_all_windows(t, 5, 0, 4), BoundsError);
  EXPECT_THROW(fp_all_windows(t, 2, 3, 2), BoundsError);
  EXPECT_THROW(fp_blocked_windows(t, 0, 0, 4), InvalidArgument);
  EXPECT_THROW(fp_blocked_windows(t, 2, 0, 5), BoundsError);
}

TEST(FpBlockedWindows, EqualsScalarForAllShortLengths) {
  std::mt19937_64 rng(8);
  for (int rep = 0; rep < 4; ++rep) {
    const auto t = random_bytes(rng, 1024);
    for (std::size_t ell = 1; ell <= 64; ++ell)
      ASSERT_EQ(fp_blocked_windows(t, ell, 0, t.size()), fp_all_windows(t, ell, 0, t.size())) << "ell=" << ell;
  }
}

TEST(FpBlockedWindows, EqualsScalarForLongWindows) {
  std::mt19937_64 rng(9);
  const auto t = random_bytes(rng, 5000);
  for (std::size_t ell : {65u, 100u, 128u, 1000u, 4096u, 5000u})
    ASSERT_EQ(fp_blocked_windows(t, ell, 0, t.size()), fp_all_windows(t, ell, 0, t.size())) << "ell=" << ell;
}

TEST(FpBlockedWindows, ConstantOnUnary) {
  const std::vector<Byte> t(333, 'a');
  for (std::size_t ell : {1u, 16u, 17u, 40u, 300u}) {
    const auto w = fp_blocked_windows(t, ell, 0, t.size());
    for (auto v : w) ASSERT_EQ(v, w[0]);
  }
}

TEST(FpBlockedWindows, AbrainadrainDoubled) {
  const auto t = bytes_of("abrainadrainabrainadrain");
  EXPECT_EQ(fp_blocked_windows(t, 16, 0, t.size()), fp_all_windows(t, 16, 0, t.size()));
}

TEST(FpBlockedWindows, TextLengthsAroundBlockBoundaries) {
  std::mt19937_64 rng(10);
  for (std::size_t n = 1; n < 120; ++n) {
    const auto t = random_bytes(rng, n);
    for (std::size_t ell = 1; ell <= n; ell += 1 + ell / 8)
      ASSERT_EQ(fp_blocked_windows(t, ell, 0, n), fp_all_windows(t, ell, 0, n)) << n << " " << ell;
  }
}

TEST(WindowStreams, ChunkedReadsMatchBulk) {
  std::mt19937_64 rng(11);
  const auto t = random_bytes(rng, 2000);
  for (std::size_t ell : {3u, 16u, 29u, 70u}) {
    const auto bulk = fp_all_windows(t, ell, 0, t.size());
    BlockedWindowStream blocked(t, ell);
    ScalarWindowStream scalar(t, ell);
    std::vector<std::uint32_t> got_b, got_s;
    std::vector<std::uint32_t> buf(37);
    for (std::size_t chunk = 1; got_b.size() < bulk.size(); chunk = chunk % 37 + 1) {
      const auto k = blocked.next(std::span(buf).first(chunk));
      got_b.insert(got_b.end(), buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(k));
    }
    while (auto k = scalar.next(buf)) got_s.insert(got_s.end(), buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(k));
    EXPECT_EQ(got_b, bulk);
    EXPECT_EQ(got_s, bulk);
    EXPECT_EQ(blocked.next(buf), 0u);
  }
}
