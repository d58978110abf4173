#include <algorithm>
#include <cstring>
#include <numeric>

#include "flat_table.hpp"
#include "pbt/build.hpp"
#include "pbt/error.hpp"
#include "pbt/fingerprint.hpp"

namespace pbt {

namespace {

constexpr std::uint64_t kNone = ~std::uint64_t{0};

std::uint32_t horner(const Byte* p, std::uint64_t len) noexcept {
  std::uint32_t h = 0;
  for (std::uint64_t i = 0; i < len; ++i) h = h * kFingerprintBase + p[i];
  return h;
}

}  // namespace

ScanStats& ScanStats::operator+=(const ScanStats& o) {
  items += o.items;
  groups += o.groups;
  windows += o.windows;
  candidates += o.candidates;
  verifications += o.verifications;
  verified_matches += o.verified_matches;
  distinct_matches += o.distinct_matches;
  return *this;
}

std::vector<Run> level_runs(const Level& level) {
  std::vector<Run> runs;
  const std::size_t count = level.starts.size();
  for (std::size_t j = 0; j < count; ++j) {
    if (j > 0 && level.adjacent_to_previous(j)) {
      runs.back().last = j + 1;
      runs.back().end = level.end(j);
    } else {
      runs.push_back({j, j + 1, level.starts[j], level.end(j)});
    }
  }
  return runs;
}

std::vector<std::uint64_t> leftmost_occurrences(std::span<const Byte> text, std::span<const Run> runs,
                                                std::span<const ScanItem> items, ScanStats* stats) {
  struct Group {
    std::uint64_t rep;
    std::uint64_t earliest;
    std::uint32_t next;
  };
  ScanStats st;
  st.items = items.size();
  std::vector<std::uint64_t> result(items.size(), kNone);
  std::vector<std::uint32_t> order(items.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return items[a].len != items[b].len ? items[a].len < items[b].len : items[a].start < items[b].start;
  });
  std::vector<std::uint32_t> item_group(items.size());
  std::vector<std::uint32_t> buf(4096);
  const Byte* t = text.data();

  for (std::size_t i = 0; i < order.size();) {
    const std::uint64_t len = items[order[i]].len;
    std::size_t end = i;
    while (end < order.size() && items[order[end]].len == len) ++end;

    detail::FpTable table(end - i);
    std::vector<Group> groups;
    for (std::size_t x = i; x < end; ++x) {
      const std::uint32_t idx = order[x];
      const std::uint64_t start = items[idx].start;
      std::uint32_t& head = table.insert(horner(t + start, len));
      std::uint32_t found = detail::FpTable::kEmpty;
      for (std::uint32_t g = head; g != detail::FpTable::kEmpty; g = groups[g].next) {
        ++st.verifications;
        if (std::memcmp(t + groups[g].rep, t + start, len) == 0) {
          found = g;
          break;
        }
      }
      if (found == detail::FpTable::kEmpty) {
        found = static_cast<std::uint32_t>(groups.size());
        groups.push_back({start, kNone, head});
        head = found;
      }
      item_group[idx] = found;
    }
    st.groups += groups.size();

    std::size_t unresolved = groups.size();
    for (const Run& run : runs) {
      if (unresolved == 0) break;
      if (run.end - run.begin < len) continue;
      BlockedWindowStream stream(text.subspan(run.begin, run.end - run.begin), len);
      std::uint64_t p = run.begin;
      while (unresolved != 0) {
        const std::size_t got = stream.next(buf);
        if (got == 0) break;
        st.windows += got;
        for (std::size_t w = 0; w < got && unresolved != 0; ++w) {
          const std::uint32_t fp = buf[w];
          if (!table.maybe_contains(fp)) continue;
          std::uint32_t g = table.find(fp);
          if (g == detail::FpTable::kEmpty) continue;
          ++st.candidates;
          const std::uint64_t pos = p + w;
          for (; g != detail::FpTable::kEmpty; g = groups[g].next) {
            Group& grp = groups[g];
            if (grp.earliest != kNone || grp.rep < pos) continue;
            ++st.verifications;
            if (std::memcmp(t + pos, t + grp.rep, len) == 0) {
              grp.earliest = pos;
              ++st.verified_matches;
              ++st.distinct_matches;
              --unresolved;
            }
          }
        }
        p += got;
      }
    }
    if (unresolved != 0) throw InternalError("item without an occurrence inside the level");
    for (std::size_t x = i; x < end; ++x) result[order[x]] = groups[item_group[order[x]]].earliest;
    i = end;
  }
  if (stats != nullptr) *stats += st;
  return result;
}

PairItems pair_items(const Level& level) {
  PairItems out;
  for (const Run& run : level_runs(level)) {
    if (run.last - run.first == 1) {
      out.items.push_back({level.starts[run.first], level.lengths[run.first]});
      out.first_block.push_back(run.first);
      continue;
    }
    for (std::size_t j = run.first; j + 1 < run.last; ++j) {
      out.items.push_back({level.starts[j], level.lengths[j] + level.lengths[j + 1]});
      out.first_block.push_back(j);
    }
  }
  return out;
}

std::vector<std::uint8_t> marks_from_leftmost(const Level& level, const PairItems& pairs,
                                              std::span<const std::uint64_t> leftmost) {
  std::vector<std::uint8_t> marked(level.starts.size(), 0);
  for (std::size_t i = 0; i < pairs.items.size(); ++i) {
    if (leftmost[i] != pairs.items[i].start) continue;
    const std::size_t j = pairs.first_block[i];
    marked[j] = 1;
    if (pairs.items[i].len > level.lengths[j]) marked[j + 1] = 1;
  }
  return marked;
}

std::size_t links_from_leftmost(Level& level, std::span<const std::size_t> unmarked,
                                std::span<const std::uint64_t> leftmost) {
  std::size_t promotions = 0;
  level.refs.clear();
  for (std::size_t i = 0; i < unmarked.size(); ++i) {
    const std::size_t j = unmarked[i];
    const std::uint64_t p = leftmost[i];
    if (p == level.starts[j]) {
      level.marked[j] = 1;
      ++promotions;
      continue;
    }
    const auto it = std::upper_bound(level.starts.begin(), level.starts.end(), p);
    const auto tgt = static_cast<std::size_t>(it - level.starts.begin()) - 1;
    const std::uint64_t src_end = p + level.lengths[j];
    bool ok = tgt < j && level.marked[tgt];
    if (ok && src_end > level.end(tgt)) {
      ok = tgt + 1 < level.starts.size() && level.marked[tgt + 1] && level.adjacent_to_previous(tgt + 1) &&
           src_end <= level.end(tgt + 1);
    }
    if (!ok) throw InternalError("leftmost occurrence of an unmarked block is not inside marked blocks");
    level.refs.push_back({tgt, static_cast<std::uint32_t>(p - level.starts[tgt])});
  }
  // promoted blocks were skipped above, so refs are already in block order
  return promotions;
}

std::vector<std::uint8_t> mark_level(std::span<const Byte> text, const Level& level, ScanStats* stats) {
  const PairItems pairs = pair_items(level);
  const auto runs = level_runs(level);
  const auto leftmost = leftmost_occurrences(text, runs, pairs.items, stats);
  return marks_from_leftmost(level, pairs, leftmost);
}

std::size_t link_level(std::span<const Byte> text, Level& level, ScanStats* stats) {
  std::vector<std::size_t> unmarked;
  std::vector<ScanItem> items;
  for (std::size_t j = 0; j < level.starts.size(); ++j) {
    if (level.marked[j]) continue;
    unmarked.push_back(j);
    items.push_back({level.starts[j], level.lengths[j]});
  }
  const auto runs = level_runs(level);
  const auto leftmost = leftmost_occurrences(text, runs, items, stats);
  return links_from_leftmost(level, unmarked, leftmost);
}

std::vector<Byte> collect_leaf_bytes(std::span<const Byte> text, const Level& level) {
  std::vector<Byte> out;
  for (std::size_t j = 0; j < level.starts.size(); ++j) {
    if (!level.marked[j]) continue;
    const auto* p = text.data() + level.starts[j];
    out.insert(out.end(), p, p + level.lengths[j]);
  }
  return out;
}

std::vector<Level> build_levels_sequential(std::span<const Byte> text, const TreeParams& params,
                                           SequentialReport* report) {
  params.validate();
  if (text.empty()) throw InvalidArgument("empty input");
  const std::uint64_t n = text.size();
  std::vector<Level> levels(1);
  layout_top_level(n, top_block_length(n, params.s, params.tau, params.leaf_cutoff), levels[0]);
  for (;;) {
    Level& lv = levels.back();
    ScanStats ms, ls;
    lv.marked = mark_level(text, lv, &ms);
    const std::size_t promoted = link_level(text, lv, &ls);
    if (report != nullptr) {
      report->mark.push_back(ms);
      report->link.push_back(ls);
      report->promotions += promoted;
    }
    if (lv.block_len <= params.leaf_cutoff) break;
    Level next;
    split_marked_blocks(lv, child_block_length(lv.block_len, params.tau), next);
    next.marked.assign(next.starts.size(), 0);
    // the layout is derivable again from the marks; keep only what is stored
    lv.starts = {};
    lv.lengths = {};
    levels.push_back(std::move(next));
  }
  return levels;
}

BlockTree finish_tree(std::span<const Byte> text, const TreeParams& params, std::vector<Level> levels, bool prune,
                      bool prune_fixpoint, std::size_t* pruned) {
  const std::uint64_t n = text.size();
  std::size_t demoted = 0;
  if (prune) demoted = prune_levels(text, params.tau, levels, params.tracked_symbols.size(), prune_fixpoint);
  if (pruned != nullptr) *pruned = demoted;
  if (levels.back().starts.size() != levels.back().marked.size()) derive_layout(n, params.tau, levels);
  std::vector<Byte> leaf = collect_leaf_bytes(text, levels.back());
  TreeParams shape = params;
  shape.tracked_symbols.clear();
  BlockTree tree = BlockTree::assemble(n, std::move(shape), std::move(levels), std::move(leaf));
  tree.attach_rank_support(params.tracked_symbols);
  return tree;
}

BlockTree build_sequential(const Text& text, const TreeParams& params, bool prune, bool prune_fixpoint,
                           SequentialReport* report) {
  auto levels = build_levels_sequential(text.bytes(), params, report);
  std::size_t pruned = 0;
  BlockTree tree = finish_tree(text.bytes(), params, std::move(levels), prune, prune_fixpoint, &pruned);
  if (report != nullptr) report->pruned = pruned;
  return tree;
}

}  // namespace pbt
