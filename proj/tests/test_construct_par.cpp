#include <gtest/gtest.h>

#include <json.hpp>
#include <map>
#include <random>
#include <sstream>
#include <thread>

#include "pbt/build.hpp"
#include "pbt/channel.hpp"
#include "pbt/error.hpp"
#include "pbt/parallel.hpp"
#include "pbt/serialize.hpp"
#include "test_util.hpp"

using namespace pbt;

namespace {

std::vector<Byte> build_bytes(const Text& text, const TreeParams& p, std::uint32_t workers,
                              std::size_t capacity = 512, bool prune = false) {
  BuildConfig cfg;
  cfg.workers = workers;
  cfg.queue_capacity = capacity;
  cfg.prune = prune;
  return serialize(build_parallel(text, p, cfg));
}

}  // namespace

TEST(LocalFilter, ForwardsOnlyImprovements) {
  LocalFilter f;
  EXPECT_TRUE(f.offer(7, 40));
  EXPECT_TRUE(f.offer(7, 12));
  EXPECT_FALSE(f.offer(7, 12));
  EXPECT_FALSE(f.offer(7, 30));
  EXPECT_TRUE(f.offer(8, 30));
  EXPECT_EQ(f.forwarded(), 3u);
  EXPECT_EQ(f.dropped(), 2u);
  EXPECT_EQ(f.size(), 2u);
  EXPECT_TRUE(f.contains(8));
  f.clear();
  EXPECT_FALSE(f.contains(7));
  EXPECT_EQ(f.size(), 0u);
}

TEST(OwnerReduce, KeepsMinimum) {
  OwnerReduce r;
  EXPECT_FALSE(r.best(1).has_value());
  r.offer(1, 40);
  r.offer(1, 12);
  r.offer(1, 30);
  EXPECT_EQ(r.best(1), 12u);
  EXPECT_EQ(r.table().size(), 1u);
}

TEST(OwnerReduce, FilteringDoesNotChangeResult) {
  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t workers = 1 + rng() % 8;
    std::vector<LocalFilter> filters(workers);
    OwnerReduce filtered, unfiltered;
    for (int i = 0; i < 2000; ++i) {
      const std::uint64_t key = rng() % 50, pos = rng() % 100000;
      auto& f = filters[rng() % workers];
      unfiltered.offer(key, pos);
      if (f.offer(key, pos)) filtered.offer(key, pos);
    }
    ASSERT_EQ(filtered.table(), unfiltered.table());
  }
}

TEST(Routing, OwnerIsFingerprintModuloWorkers) {
  EXPECT_EQ(owner_of(3299, 4), 3u);
  EXPECT_EQ(owner_of(97, 1), 0u);
  for (std::uint32_t fp = 0; fp < 1000; ++fp) EXPECT_LT(owner_of(fp, 7), 7u);
}

TEST(BoundedChannel, FullEmptyClose) {
  BoundedChannel<int> ch(2);
  EXPECT_EQ(ch.capacity(), 2u);
  EXPECT_TRUE(ch.try_push(1));
  EXPECT_TRUE(ch.try_push(2));
  EXPECT_FALSE(ch.try_push(3));
  std::vector<int> got;
  EXPECT_EQ(ch.drain([&](int v) { got.push_back(v); }), 2u);
  EXPECT_EQ(got, (std::vector<int>{1, 2}));
  EXPECT_EQ(ch.size(), 0u);
  ch.close();
  EXPECT_TRUE(ch.closed());
  EXPECT_FALSE(ch.try_push(4));
  EXPECT_EQ(BoundedChannel<int>(0).capacity(), 1u);
}

TEST(BoundedChannel, ManyProducers) {
  BoundedChannel<int> ch(3);
  std::atomic<int> done{0};
  std::vector<std::jthread> producers;
  for (int p = 0; p < 4; ++p)
    producers.emplace_back([&, p] {
      for (int i = 0; i < 500; ++i)
        while (!ch.try_push(p * 1000 + i)) ch.wait_not_full(std::chrono::milliseconds(1));
      ++done;
    });
  std::map<int, int> last;
  std::size_t total = 0;
  while (total < 2000) {
    ch.wait_not_empty(std::chrono::milliseconds(1));
    total += ch.drain([&](int v) {
      auto [it, fresh] = last.try_emplace(v / 1000, v % 1000);
      if (!fresh) {
        EXPECT_GT(v % 1000, it->second);  // per-producer order is kept
        it->second = v % 1000;
      }
    });
  }
  producers.clear();
  EXPECT_EQ(done.load(), 4);
}

TEST(BuildConfig, Validation) {
  BuildConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.workers = 0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg.workers = 2;
  cfg.deterministic = false;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  EXPECT_THROW(build_parallel(Text::from_string("ab"), TreeParams{}, cfg), InvalidArgument);
}

TEST(BuildParallel, AbrainadrainMatchesSequential) {
  const Text t = Text::from_string("abrainadrain");
  TreeParams p;
  p.s = 2;
  p.tau = 3;
  p.leaf_cutoff = 1;
  p.tracked_symbols = t.alphabet();
  const auto seq = serialize(build_sequential(t, p));
  for (std::uint32_t k : {1u, 2u, 3u, 5u, 16u}) EXPECT_EQ(build_bytes(t, p, k), seq) << "K=" << k;
  BuildConfig cfg;
  cfg.workers = 3;
  const BlockTree tree = build_parallel(t, p, cfg);
  EXPECT_EQ(tree.levels()[1].marked, (std::vector<std::uint8_t>{1, 1, 1, 1, 1, 0}));
}

TEST(BuildParallel, RandomTextsMatchSequential) {
  std::mt19937_64 rng(32);
  static const unsigned sigmas[] = {1, 2, 4, 16, 96, 256};
  for (int rep = 0; rep < 60; ++rep) {
    const auto bytes = oracle::make_text(rng, 1 + rng() % 6000, sigmas[rng() % 6],
                                          static_cast<oracle::TextClass>(rng() % 3));
    const Text text(bytes);
    TreeParams p;
    p.s = static_cast<std::uint32_t>(1 + rng() % 8);
    p.tau = static_cast<std::uint32_t>(2 + rng() % 7);
    p.leaf_cutoff = static_cast<std::uint32_t>(1 + rng() % 8);
    p.tracked_symbols = TreeParams::default_tracked(text);
    const bool prune = rng() % 2;
    const auto seq = serialize(build_sequential(text, p, prune));
    for (std::uint32_t k : {2u, 4u, 8u}) ASSERT_EQ(build_bytes(text, p, k, 512, prune), seq) << rep << " K=" << k;
  }
}

TEST(BuildParallel, QueueCapacityDoesNotMatter) {
  RepetitiveCorpusSpec spec;
  spec.n = 200000;
  spec.seed_len = 3000;
  const Text text(make_repetitive_corpus(spec));
  const TreeParams p = TreeParams::defaults_for(text);
  const auto seq = serialize(build_sequential(text, p));
  for (std::size_t cap : {1u, 2u, 7u, 64u, 4096u}) ASSERT_EQ(build_bytes(text, p, 4, cap), seq) << "cap=" << cap;
}

TEST(BuildParallel, ReportIsJsonLines) {
  RepetitiveCorpusSpec spec;
  spec.n = 50000;
  spec.seed_len = 1000;
  const Text text(make_repetitive_corpus(spec));
  BuildConfig cfg;
  cfg.workers = 3;
  cfg.prune = true;
  BuildReport report;
  build_parallel(text, TreeParams::defaults_for(text), cfg, &report);
  EXPECT_EQ(report.workers, 3u);
  ASSERT_FALSE(report.phases.empty());
  std::istringstream lines(report.to_json_lines());
  std::string line;
  std::size_t count = 0;
  nlohmann::json last;
  while (std::getline(lines, line)) {
    last = nlohmann::json::parse(line);
    ++count;
  }
  EXPECT_EQ(count, report.phases.size() + 1);
  EXPECT_EQ(last["workers"], 3);
  for (const auto& ph : report.phases) {
    EXPECT_TRUE(ph.phase == "mark" || ph.phase == "link");
    EXPECT_EQ(ph.owner_registrations.size(), 3u);
    EXPECT_GE(ph.filter_drop_rate, 0.0);
    EXPECT_LE(ph.filter_drop_rate, 1.0);
  }
}
