#include "pbt/block_tree.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <string>

#include "pbt/error.hpp"
#include "pbt/serialize.hpp"

namespace pbt {

namespace {

[[noreturn]] void corrupt(const std::string& what) { throw FormatError("invalid block tree: " + what); }

}  // namespace

std::uint32_t TreeParams::default_leaf_cutoff(std::uint64_t n, unsigned sigma) {
  const double num = std::log2(static_cast<double>(std::max<std::uint64_t>(n, 1)));
  const double den = std::log2(static_cast<double>(std::max(2u, sigma)));
  return std::max<std::uint32_t>(4, static_cast<std::uint32_t>(std::ceil(num / den)));
}

std::vector<Byte> TreeParams::default_tracked(const Text& text) {
  if (text.sigma() <= 16) return text.alphabet();
  return {};
}

TreeParams TreeParams::defaults_for(const Text& text) {
  TreeParams p;
  p.s = static_cast<std::uint32_t>(std::max<std::uint64_t>(8, (text.size() + (1u << 20) - 1) >> 20));
  p.tau = 8;
  p.leaf_cutoff = default_leaf_cutoff(text.size(), text.sigma());
  p.tracked_symbols = default_tracked(text);
  return p;
}

void TreeParams::validate() const {
  if (s < 1) throw InvalidArgument("s must be >= 1");
  if (tau < 2) throw InvalidArgument("tau must be >= 2");
  if (leaf_cutoff < 1) throw InvalidArgument("leaf cutoff must be >= 1");
}

std::vector<std::uint64_t> Level::run_breaks() const {
  std::vector<std::uint64_t> out;
  for (std::size_t j = 1; j < size(); ++j)
    if (!adjacent_to_previous(j)) out.push_back(j);
  return out;
}

std::size_t Level::marked_count() const {
  return static_cast<std::size_t>(std::count(marked.begin(), marked.end(), std::uint8_t{1}));
}

void layout_top_level(std::uint64_t n, std::uint64_t block_len, Level& level) {
  const std::uint64_t count = (n + block_len - 1) / block_len;
  level.block_len = block_len;
  level.starts.resize(count);
  level.lengths.resize(count);
  for (std::uint64_t j = 0; j < count; ++j) {
    level.starts[j] = j * block_len;
    level.lengths[j] = std::min(block_len, n - j * block_len);
  }
}

void split_marked_blocks(const Level& parent, std::uint64_t child_len, Level& child) {
  child.block_len = child_len;
  child.starts.clear();
  child.lengths.clear();
  for (std::size_t j = 0; j < parent.size(); ++j) {
    if (!parent.marked[j]) continue;
    const std::uint64_t len = parent.lengths[j];
    for (std::uint64_t off = 0; off < len; off += child_len) {
      child.starts.push_back(parent.starts[j] + off);
      child.lengths.push_back(std::min(child_len, len - off));
    }
  }
}

std::uint64_t top_block_length(std::uint64_t n, std::uint32_t s, std::uint32_t tau, std::uint32_t leaf_cutoff) {
  const std::uint64_t lower = (n + s - 1) / s;
  auto exact_chain = [&](std::uint64_t b) {
    while (b > leaf_cutoff) {
      const std::uint64_t c = child_block_length(b, tau);
      if (b % c != 0) return false;
      b = c;
    }
    return true;
  };
  for (std::uint64_t b = std::max<std::uint64_t>(lower, 1);; ++b)
    if (exact_chain(b)) return b;
}

BlockTree BlockTree::assemble(std::uint64_t n, TreeParams params, std::vector<Level> levels,
                              std::vector<Byte> leaf_bytes) {
  BlockTree t;
  t.n_ = n;
  t.params_ = std::move(params);
  t.levels_ = std::move(levels);
  t.leaf_bytes_ = std::move(leaf_bytes);
  t.derive();
  t.validate();
  return t;
}

void derive_layout(std::uint64_t n, std::uint32_t tau, std::vector<Level>& levels) {
  for (std::size_t k = 0; k < levels.size(); ++k) {
    Level& lv = levels[k];
    const std::size_t stored = lv.marked.size();
    if (lv.block_len == 0) corrupt("zero block length");
    if (k == 0) {
      layout_top_level(n, lv.block_len, lv);
    } else {
      if (lv.block_len != child_block_length(levels[k - 1].block_len, tau))
        corrupt("block length does not follow arity");
      split_marked_blocks(levels[k - 1], lv.block_len, lv);
    }
    if (lv.starts.size() != stored) corrupt("block count mismatch on level " + std::to_string(k));
  }
}

void BlockTree::derive() {
  params_.validate();
  if (n_ == 0) corrupt("empty text");
  if (levels_.empty()) corrupt("no levels");
  derive_layout(n_, params_.tau, levels_);
  marked_before_.assign(levels_.size(), {});
  child_begin_.assign(levels_.size(), {});
  for (std::size_t k = 0; k < levels_.size(); ++k) {
    const Level& lv = levels_[k];
    const bool last = k + 1 == levels_.size();
    auto& mb = marked_before_[k];
    auto& cb = child_begin_[k];
    mb.assign(lv.size() + 1, 0);
    cb.assign(lv.size() + 1, 0);
    for (std::size_t j = 0; j < lv.size(); ++j) {
      if (lv.marked[j] > 1) corrupt("mark value out of range");
      mb[j + 1] = mb[j] + lv.marked[j];
      std::uint64_t width = 0;
      if (lv.marked[j]) {
        width = last ? lv.lengths[j] : (lv.lengths[j] + levels_[k + 1].block_len - 1) / levels_[k + 1].block_len;
      }
      cb[j + 1] = cb[j] + width;
    }
  }
}

void BlockTree::validate() const {
  const Level& top = levels_[0];
  if (top.size() > params_.s) corrupt("more top-level blocks than s");
  for (std::size_t k = 0; k < levels_.size(); ++k) {
    const Level& lv = levels_[k];
    const bool last = k + 1 == levels_.size();
    if (last != (lv.block_len <= params_.leaf_cutoff)) corrupt("leaf cutoff violated on level " + std::to_string(k));
    if (lv.size() == 0) corrupt("empty level");
    if (lv.block_len > 0xffffffffull) corrupt("block length exceeds offset range");
    const std::size_t unmarked = lv.size() - static_cast<std::size_t>(marked_before_[k].back());
    if (lv.refs.size() != unmarked) corrupt("back-reference count mismatch on level " + std::to_string(k));
    for (std::size_t j = 0; j < lv.size(); ++j) {
      if (lv.marked[j]) continue;
      const BackRef& ref = lv.refs[ref_index(k, j)];
      if (ref.target >= j) corrupt("back-reference does not point left");
      const std::size_t t = static_cast<std::size_t>(ref.target);
      if (!lv.marked[t]) corrupt("back-reference target unmarked");
      if (ref.offset >= lv.lengths[t]) corrupt("back-reference offset too large");
      const std::uint64_t src = lv.starts[t] + ref.offset;
      if (src >= lv.starts[j]) corrupt("back-reference source not strictly left");
      const std::uint64_t src_end = src + lv.lengths[j];
      if (src_end > lv.end(t)) {
        if (t + 1 >= lv.size() || !lv.marked[t + 1] || !lv.adjacent_to_previous(t + 1) || src_end > lv.end(t + 1))
          corrupt("back-reference spill invalid");
      }
    }
    if (!last && child_begin_[k].back() != levels_[k + 1].size()) corrupt("child count mismatch");
  }
  if (child_begin_.back().back() != leaf_bytes_.size()) corrupt("leaf byte count mismatch");

  // counts are validated bottom-up: checks on level k only rely on level k + 1
  for (std::size_t slot = 0; slot < counts_.size(); ++slot) {
    const SymbolCounts& sc = counts_[slot];
    if (sc.prefix.size() != levels_.size() || sc.internal.size() != levels_.size() || sc.offset.size() != levels_.size())
      corrupt("rank support level count mismatch");
    for (std::size_t k = levels_.size(); k-- > 0;) {
      const Level& lv = levels_[k];
      const bool last = k + 1 == levels_.size();
      if (sc.prefix[k].size() != lv.size() || sc.internal[k].size() != lv.size() || sc.offset[k].size() != lv.refs.size())
        corrupt("rank support size mismatch");
      std::uint64_t running = 0;
      for (std::size_t j = 0; j < lv.size(); ++j) {
        if (sc.prefix[k][j] != running) corrupt("prefix count mismatch");
        if (sc.internal[k][j] > lv.lengths[j]) corrupt("internal count too large");
        running += sc.internal[k][j];
        if (lv.marked[j]) {
          std::uint64_t expect = 0;
          if (last) {
            const Byte* leaf = leaf_bytes_.data() + child_begin_[k][j];
            expect = static_cast<std::uint64_t>(std::count(leaf, leaf + lv.lengths[j], sc.symbol));
          } else {
            for (std::uint64_t c = child_begin_[k][j]; c < child_begin_[k][j + 1]; ++c) expect += sc.internal[k + 1][c];
          }
          if (expect != sc.internal[k][j]) corrupt("internal count mismatch");
        }
      }
      if (running > n_) corrupt("count exceeds text length");
      for (std::size_t j = 0; j < lv.size(); ++j) {
        if (lv.marked[j]) continue;
        const std::size_t r = ref_index(k, j);
        const BackRef& ref = lv.refs[r];
        const std::uint64_t before = count_pair_prefix(slot, k, ref.target, ref.offset);
        const std::uint64_t through = count_pair_prefix(slot, k, ref.target, ref.offset + lv.lengths[j]);
        if (sc.offset[k][r] != before || sc.internal[k][j] != through - before) corrupt("back-reference count mismatch");
      }
    }
  }
}

void BlockTree::validate_against(std::span<const Byte> text) const {
  validate();
  if (text.size() != n_) corrupt("text length mismatch");
  for (std::size_t k = 0; k < levels_.size(); ++k) {
    const Level& lv = levels_[k];
    for (std::size_t j = 0; j < lv.size(); ++j) {
      if (lv.marked[j]) continue;
      const BackRef& ref = lv.refs[ref_index(k, j)];
      const std::uint64_t src = lv.starts[ref.target] + ref.offset;
      if (std::memcmp(text.data() + src, text.data() + lv.starts[j], lv.lengths[j]) != 0)
        corrupt("unmarked block differs from its source on level " + std::to_string(k));
    }
  }
  auto rebuilt = reconstruct();
  if (!std::equal(rebuilt.begin(), rebuilt.end(), text.begin(), text.end())) corrupt("reconstruction differs from text");
}

Byte BlockTree::access(std::uint64_t i) const {
  if (i == 0 || i > n_) throw BoundsError("access position out of range");
  const std::size_t last = levels_.size() - 1;
  std::uint64_t p = i - 1;
  std::size_t k = 0;
  std::size_t j = static_cast<std::size_t>(p / levels_[0].block_len);
  std::uint64_t o = p - levels_[0].starts[j];
  for (;;) {
    const Level& lv = levels_[k];
    if (lv.marked[j]) {
      if (k == last) return leaf_bytes_[child_begin_[k][j] + o];
      const std::uint64_t cl = levels_[k + 1].block_len;
      const std::uint64_t ci = o / cl;
      j = static_cast<std::size_t>(child_begin_[k][j] + ci);
      o -= ci * cl;
      ++k;
    } else {
      const BackRef& ref = lv.refs[ref_index(k, j)];
      const std::uint64_t x = ref.offset + o;
      const std::uint64_t tlen = lv.lengths[ref.target];
      if (x < tlen) {
        j = static_cast<std::size_t>(ref.target);
        o = x;
      } else {
        j = static_cast<std::size_t>(ref.target + 1);
        o = x - tlen;
      }
    }
  }
}

std::uint64_t BlockTree::count_prefix(std::size_t slot, std::size_t k, std::size_t j, std::uint64_t o) const {
  const SymbolCounts& sc = counts_[slot];
  const std::size_t last = levels_.size() - 1;
  std::uint64_t acc = 0;  // wraps transiently when back-reference offsets are subtracted
  for (;;) {
    const Level& lv = levels_[k];
    if (o == 0) return acc;
    if (o >= lv.lengths[j]) return acc + sc.internal[k][j];
    if (lv.marked[j]) {
      if (k == last) {
        const Byte* leaf = leaf_bytes_.data() + child_begin_[k][j];
        return acc + static_cast<std::uint64_t>(std::count(leaf, leaf + o, sc.symbol));
      }
      const std::uint64_t cl = levels_[k + 1].block_len;
      const std::uint64_t first = child_begin_[k][j];
      const std::uint64_t ci = o / cl;
      acc += sc.prefix[k + 1][first + ci] - sc.prefix[k + 1][first];
      o -= ci * cl;
      j = static_cast<std::size_t>(first + ci);
      ++k;
    } else {
      const std::size_t r = ref_index(k, j);
      const BackRef& ref = lv.refs[r];
      acc -= sc.offset[k][r];
      const std::uint64_t x = ref.offset + o;
      const std::uint64_t tlen = lv.lengths[ref.target];
      if (x <= tlen) {
        j = static_cast<std::size_t>(ref.target);
        o = x;
      } else {
        acc += sc.internal[k][ref.target];
        j = static_cast<std::size_t>(ref.target + 1);
        o = x - tlen;
      }
    }
  }
}

std::uint64_t BlockTree::count_pair_prefix(std::size_t slot, std::size_t k, std::size_t t, std::uint64_t x) const {
  const Level& lv = levels_[k];
  if (x <= lv.lengths[t]) return count_prefix(slot, k, t, x);
  return counts_[slot].internal[k][t] + count_prefix(slot, k, t + 1, x - lv.lengths[t]);
}

std::uint64_t BlockTree::rank(Byte c, std::uint64_t i) const {
  if (!tracks(c)) throw UnsupportedSymbolError("symbol has no rank support");
  if (i > n_) throw BoundsError("rank position out of range");
  if (i == 0) return 0;
  const auto slot = static_cast<std::size_t>(slot_[c]);
  const SymbolCounts& sc = counts_[slot];
  const Level& top = levels_[0];
  if (i == n_) return sc.prefix[0].back() + sc.internal[0].back();
  const auto j = static_cast<std::size_t>(i / top.block_len);
  return sc.prefix[0][j] + count_prefix(slot, 0, j, i - top.starts[j]);
}

std::uint64_t BlockTree::select_in_block(std::size_t slot, std::size_t k, std::size_t j, std::uint64_t r) const {
  const SymbolCounts& sc = counts_[slot];
  const std::size_t last = levels_.size() - 1;
  std::uint64_t acc = 0;  // offset relative to the starting block, may wrap transiently
  for (;;) {
    const Level& lv = levels_[k];
    if (lv.marked[j]) {
      if (k == last) {
        const Byte* leaf = leaf_bytes_.data() + child_begin_[k][j];
        for (std::uint64_t o = 0; o < lv.lengths[j]; ++o)
          if (leaf[o] == sc.symbol && --r == 0) return acc + o;
        throw InternalError("select ran past a leaf block");
      }
      const auto& pre = sc.prefix[k + 1];
      const std::uint64_t first = child_begin_[k][j];
      const std::uint64_t end = child_begin_[k][j + 1];
      const std::uint64_t base = pre[first];
      auto it = std::lower_bound(pre.begin() + static_cast<std::ptrdiff_t>(first),
                                 pre.begin() + static_cast<std::ptrdiff_t>(end), base + r);
      const auto child = static_cast<std::size_t>(it - pre.begin()) - 1;
      r -= pre[child] - base;
      acc += (child - first) * levels_[k + 1].block_len;
      j = child;
      ++k;
    } else {
      const std::size_t idx = ref_index(k, j);
      const BackRef& ref = lv.refs[idx];
      const std::uint64_t shifted = r + sc.offset[k][idx];
      acc -= ref.offset;
      const auto t = static_cast<std::size_t>(ref.target);
      if (shifted <= sc.internal[k][t]) {
        j = t;
        r = shifted;
      } else {
        acc += lv.lengths[t];
        r = shifted - sc.internal[k][t];
        j = t + 1;
      }
    }
  }
}

std::uint64_t BlockTree::select(Byte c, std::uint64_t j) const {
  if (!tracks(c)) throw UnsupportedSymbolError("symbol has no select support");
  if (j == 0) throw BoundsError("select occurrence index must be >= 1");
  const auto slot = static_cast<std::size_t>(slot_[c]);
  const auto& pre = counts_[slot].prefix[0];
  const std::uint64_t total = pre.back() + counts_[slot].internal[0].back();
  if (j > total) throw NotFoundError("fewer than j occurrences");
  auto it = std::lower_bound(pre.begin(), pre.end(), j);
  const auto b = static_cast<std::size_t>(it - pre.begin()) - 1;
  return levels_[0].starts[b] + select_in_block(slot, 0, b, j - pre[b]) + 1;
}

std::vector<Byte> BlockTree::reconstruct() const {
  std::vector<Byte> out(n_);
  // bottom-up: marked leaves first, then each level's unmarked blocks copy
  // from marked blocks that are already complete
  const std::size_t last = levels_.size() - 1;
  const Level& leaves = levels_[last];
  for (std::size_t j = 0; j < leaves.size(); ++j) {
    if (leaves.marked[j])
      std::memcpy(out.data() + leaves.starts[j], leaf_bytes_.data() + child_begin_[last][j], leaves.lengths[j]);
  }
  for (std::size_t k = levels_.size(); k-- > 0;) {
    const Level& lv = levels_[k];
    for (std::size_t j = 0; j < lv.size(); ++j) {
      if (lv.marked[j]) continue;
      const BackRef& ref = lv.refs[ref_index(k, j)];
      std::memmove(out.data() + lv.starts[j], out.data() + lv.starts[ref.target] + ref.offset, lv.lengths[j]);
    }
  }
  return out;
}

void BlockTree::attach_rank_support(std::vector<Byte> symbols) {
  std::sort(symbols.begin(), symbols.end());
  symbols.erase(std::unique(symbols.begin(), symbols.end()), symbols.end());
  counts_.clear();
  slot_ = filled_slots();
  params_.tracked_symbols = symbols;
  const std::size_t last = levels_.size() - 1;
  for (Byte c : symbols) {
    slot_[c] = static_cast<std::int16_t>(counts_.size());
    SymbolCounts sc;
    sc.symbol = c;
    sc.prefix.resize(levels_.size());
    sc.internal.resize(levels_.size());
    sc.offset.resize(levels_.size());
    for (std::size_t k = 0; k < levels_.size(); ++k) {
      sc.prefix[k].assign(levels_[k].size(), 0);
      sc.internal[k].assign(levels_[k].size(), 0);
      sc.offset[k].assign(levels_[k].refs.size(), 0);
    }
    counts_.push_back(std::move(sc));
  }
  for (std::size_t slot = 0; slot < counts_.size(); ++slot) {
    SymbolCounts& sc = counts_[slot];
    for (std::size_t k = levels_.size(); k-- > 0;) {
      const Level& lv = levels_[k];
      for (std::size_t j = 0; j < lv.size(); ++j) {
        if (!lv.marked[j]) continue;
        std::uint64_t sum = 0;
        if (k == last) {
          const Byte* leaf = leaf_bytes_.data() + child_begin_[k][j];
          sum = static_cast<std::uint64_t>(std::count(leaf, leaf + lv.lengths[j], sc.symbol));
        } else {
          for (std::uint64_t c = child_begin_[k][j]; c < child_begin_[k][j + 1]; ++c) sum += sc.internal[k + 1][c];
        }
        sc.internal[k][j] = sum;
      }
      // unmarked sources lie in marked blocks, whose counts are final now
      for (std::size_t j = 0; j < lv.size(); ++j) {
        if (lv.marked[j]) continue;
        const std::size_t r = ref_index(k, j);
        const BackRef& ref = lv.refs[r];
        const std::uint64_t before = count_pair_prefix(slot, k, ref.target, ref.offset);
        sc.offset[k][r] = before;
        sc.internal[k][j] = count_pair_prefix(slot, k, ref.target, ref.offset + lv.lengths[j]) - before;
      }
      std::uint64_t running = 0;
      for (std::size_t j = 0; j < lv.size(); ++j) {
        sc.prefix[k][j] = running;
        running += sc.internal[k][j];
      }
    }
  }
}

void BlockTree::attach_rank_support(std::vector<SymbolCounts> counts) {
  counts_ = std::move(counts);
  slot_ = filled_slots();
  params_.tracked_symbols.clear();
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    const Byte c = counts_[i].symbol;
    if (slot_[c] >= 0) corrupt("duplicate tracked symbol");
    if (i > 0 && counts_[i - 1].symbol >= c) corrupt("tracked symbols not sorted");
    slot_[c] = static_cast<std::int16_t>(i);
    params_.tracked_symbols.push_back(c);
  }
  validate();
}

TreeStats BlockTree::stats(const Lz77Factorization* lz) const {
  TreeStats st;
  st.n = n_;
  for (const Level& lv : levels_) {
    LevelStats ls;
    ls.block_len = lv.block_len;
    ls.blocks = lv.size();
    ls.marked = lv.marked_count();
    ls.unmarked = ls.blocks - ls.marked;
    st.levels.push_back(ls);
  }
  st.leaf_bytes = leaf_bytes_.size();
  st.serialized_size = serialized_size(*this);
  st.ratio = static_cast<double>(st.serialized_size) / static_cast<double>(n_);
  st.tracked_symbols = counts_.size();
  if (lz != nullptr) {
    st.z = lz->z();
    const std::uint64_t bound = 3ull * lz->z() * params_.tau;
    for (std::size_t k = 1; k < levels_.size(); ++k)
      if (levels_[k].size() > bound) st.levels_over_z_tau_bound.push_back(k);
  }
  return st;
}

}  // namespace pbt
