#include <algorithm>
#include <cstdint>
#include <limits>

#include "pbt/build.hpp"
#include "pbt/error.hpp"

namespace pbt {

namespace {

constexpr std::int64_t kRefBytes = 12;   // u64 target + u32 offset
constexpr std::int64_t kBreakBytes = 8;  // one run-break position
constexpr std::int64_t kCountBytes = 8;  // one u64 count entry

std::vector<std::uint8_t> targeted_blocks(const Level& lv) {
  std::vector<std::uint8_t> out(lv.size(), 0);
  std::size_t r = 0;
  for (std::size_t j = 0; j < lv.size(); ++j) {
    if (lv.marked[j]) continue;
    const BackRef& ref = lv.refs[r++];
    out[ref.target] = 1;
    if (ref.offset + lv.lengths[j] > lv.lengths[ref.target]) out[ref.target + 1] = 1;
  }
  return out;
}

std::size_t prune_level(std::span<const Byte> text, std::vector<Level>& levels, std::size_t k, std::size_t tracked) {
  Level& lv = levels[k];
  Level& ch = levels[k + 1];
  const bool child_is_leaf_level = k + 2 == levels.size();
  const std::size_t nb = lv.size();
  const auto T = static_cast<std::int64_t>(tracked);

  std::vector<std::uint64_t> cb(nb + 1, 0);
  for (std::size_t j = 0; j < nb; ++j)
    cb[j + 1] = cb[j] + (lv.marked[j] ? (lv.lengths[j] + ch.block_len - 1) / ch.block_len : 0);

  std::vector<std::uint8_t> tk = targeted_blocks(lv);
  const std::vector<std::uint8_t> tc = targeted_blocks(ch);

  std::vector<std::size_t> cand;
  std::vector<ScanItem> items;
  for (std::size_t j = 0; j < nb; ++j) {
    if (!lv.marked[j] || lv.starts[j] == 0 || tk[j]) continue;
    bool ok = true;
    for (std::uint64_t c = cb[j]; c < cb[j + 1] && ok; ++c)
      ok = !tc[c] && (!ch.marked[c] || child_is_leaf_level);
    if (!ok) continue;
    cand.push_back(j);
    items.push_back({lv.starts[j], lv.lengths[j]});
  }
  if (cand.empty()) return 0;
  const auto runs = level_runs(lv);
  const auto leftmost = leftmost_occurrences(text, runs, items);

  std::vector<std::uint8_t> demoted(nb, 0);
  std::vector<BackRef> added(nb);
  std::size_t count = 0;
  constexpr std::uint64_t kNoChild = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t right_alive = kNoChild;  // first surviving child right of the current block
  std::size_t ci = cand.size();

  auto try_demote = [&](std::size_t j, std::uint64_t p) {
    const std::uint64_t len = lv.lengths[j];
    if (p + len > lv.starts[j]) return false;
    const auto it = std::upper_bound(lv.starts.begin(), lv.starts.end(), p);
    const auto t = static_cast<std::size_t>(it - lv.starts.begin()) - 1;
    if (!lv.marked[t]) return false;
    const bool spill = p + len > lv.end(t);
    if (spill && (t + 1 >= nb || !lv.marked[t + 1] || !lv.adjacent_to_previous(t + 1) || p + len > lv.end(t + 1)))
      return false;

    std::int64_t delta = kRefBytes + kCountBytes * T;
    const std::uint64_t c0 = cb[j], c1 = cb[j + 1];
    for (std::uint64_t c = c0; c < c1; ++c) {
      delta -= 2 * kCountBytes * T;
      if (!ch.marked[c])
        delta -= kRefBytes + kCountBytes * T;
      else
        delta -= static_cast<std::int64_t>(ch.lengths[c]);
    }
    // blocks left of j are still untouched, so child c0 - 1 survives
    const bool has_left = c0 > 0;
    const bool has_right = right_alive != kNoChild;
    const int before = (has_left && ch.end(c0 - 1) != ch.starts[c0]) +
                       (has_right && ch.end(c1 - 1) != ch.starts[right_alive]);
    const int after = has_left && has_right ? 1 : 0;
    delta += kBreakBytes * (after - before);
    if (delta >= 0) return false;

    lv.marked[j] = 0;
    demoted[j] = 1;
    added[j] = {t, static_cast<std::uint32_t>(p - lv.starts[t])};
    tk[t] = 1;
    if (spill) tk[t + 1] = 1;
    return true;
  };

  for (std::size_t j = nb; j-- > 0;) {
    if (!lv.marked[j]) continue;
    bool gone = false;
    if (ci > 0 && cand[ci - 1] == j) {
      --ci;
      if (!tk[j]) gone = try_demote(j, leftmost[ci]);
    }
    if (gone) {
      ++count;
    } else {
      right_alive = cb[j];
    }
  }
  if (count == 0) return 0;

  std::vector<BackRef> refs;
  refs.reserve(lv.refs.size() + count);
  std::size_t r = 0;
  for (std::size_t j = 0; j < nb; ++j) {
    if (demoted[j])
      refs.push_back(added[j]);
    else if (!lv.marked[j])
      refs.push_back(lv.refs[r++]);
  }
  lv.refs = std::move(refs);

  std::vector<std::uint8_t> dead(ch.size(), 0);
  for (std::size_t j = 0; j < nb; ++j)
    if (demoted[j]) std::fill(dead.begin() + static_cast<std::ptrdiff_t>(cb[j]), dead.begin() + static_cast<std::ptrdiff_t>(cb[j + 1]), 1);
  std::vector<std::uint64_t> new_index(ch.size());
  Level out;
  out.block_len = ch.block_len;
  std::vector<BackRef> kept_refs;
  std::size_t cr = 0;
  for (std::size_t c = 0; c < ch.size(); ++c) {
    const bool has_ref = !ch.marked[c];
    if (!dead[c]) {
      new_index[c] = out.marked.size();
      out.marked.push_back(ch.marked[c]);
      out.starts.push_back(ch.starts[c]);
      out.lengths.push_back(ch.lengths[c]);
      if (has_ref) kept_refs.push_back(ch.refs[cr]);
    }
    if (has_ref) ++cr;
  }
  for (BackRef& ref : kept_refs) {
    if (dead[ref.target]) throw InternalError("pruning removed a referenced block");
    ref.target = new_index[ref.target];
  }
  out.refs = std::move(kept_refs);
  ch = std::move(out);
  return count;
}

}  // namespace

std::size_t prune_levels(std::span<const Byte> text, std::uint32_t tau, std::vector<Level>& levels,
                         std::size_t tracked, bool fixpoint) {
  derive_layout(text.size(), tau, levels);
  std::size_t total = 0;
  for (;;) {
    std::size_t pass = 0;
    for (std::size_t k = levels.size() - 1; k-- > 0;) pass += prune_level(text, levels, k, tracked);
    total += pass;
    if (!fixpoint || pass == 0) break;
  }
  return total;
}

BlockTree prune_tree(const BlockTree& tree, bool fixpoint) {
  const std::vector<Byte> text = tree.reconstruct();
  std::vector<Level> levels = tree.levels();
  return finish_tree(text, tree.params(), std::move(levels), true, fixpoint);
}

}  // namespace pbt
