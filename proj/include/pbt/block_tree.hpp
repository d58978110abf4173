#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pbt/text.hpp"

namespace pbt {

/// Shape parameters of a block tree.
struct TreeParams {
  std::uint32_t s = 8;            // top-level arity
  std::uint32_t tau = 8;          // arity of every other inner node
  std::uint32_t leaf_cutoff = 4;  // blocks of at most this length are leaves
  std::vector<Byte> tracked_symbols;  // symbols with rank/select support

  /// max(4, ceil(log2 n / log2 max(2, sigma))).
  static std::uint32_t default_leaf_cutoff(std::uint64_t n, unsigned sigma);
  /// All present symbols when sigma <= 16, none otherwise.
  static std::vector<Byte> default_tracked(const Text& text);
  static TreeParams defaults_for(const Text& text);

  void validate() const;
};

/// Source of an unmarked block: the occurrence starts `offset` characters
/// into block `target` of the same level and may spill into `target + 1`.
struct BackRef {
  std::uint64_t target = 0;
  std::uint32_t offset = 0;

  bool operator==(const BackRef&) const = default;
};

/// One level of the tree. `block_len`, `marked` and `refs` are the stored
/// representation; the remaining vectors are derived from the parent level.
struct Level {
  std::uint64_t block_len = 0;
  std::vector<std::uint8_t> marked;  // one entry per block, 0 or 1
  std::vector<BackRef> refs;         // one per unmarked block, in block order

  std::vector<std::uint64_t> starts;   // 0-based start of each block in T
  std::vector<std::uint64_t> lengths;  // actual length (shorter only at the end of T)

  std::size_t size() const noexcept { return marked.size(); }
  std::uint64_t end(std::size_t j) const noexcept { return starts[j] + lengths[j]; }
  /// True if block j is directly preceded in T by block j - 1.
  bool adjacent_to_previous(std::size_t j) const noexcept { return j > 0 && end(j - 1) == starts[j]; }
  /// Indices j where block j is not adjacent to block j - 1 (j = 0 excluded).
  std::vector<std::uint64_t> run_breaks() const;
  std::size_t marked_count() const;
};

/// Per-symbol counts supporting rank and select.
struct SymbolCounts {
  Byte symbol = 0;
  // indexed [level][block]; prefix[j] = sum of internal[j'] for j' < j
  std::vector<std::vector<std::uint64_t>> prefix;
  std::vector<std::vector<std::uint64_t>> internal;
  // indexed [level][unmarked rank]: occurrences in the first `offset`
  // characters of the back-reference target
  std::vector<std::vector<std::uint64_t>> offset;
};

struct LevelStats {
  std::uint64_t block_len = 0;
  std::uint64_t blocks = 0;
  std::uint64_t marked = 0;
  std::uint64_t unmarked = 0;
};

struct TreeStats {
  std::uint64_t n = 0;
  std::vector<LevelStats> levels;
  std::uint64_t leaf_bytes = 0;
  std::uint64_t serialized_size = 0;
  double ratio = 0.0;  // serialized size / n
  std::size_t tracked_symbols = 0;
  // filled when an LZ77 factorization is supplied
  std::optional<std::uint64_t> z;
  std::vector<std::size_t> levels_over_z_tau_bound;  // non-top levels with > 3 z tau blocks
};

/// Block tree over a byte text answering access/rank/select.
///
/// Query positions are 1-based: access(i) is T[i], rank(c, i) counts c in
/// T[1..i], select(c, j) is the position of the j-th c.
class BlockTree {
 public:
  BlockTree() = default;

  /// Takes ownership of stored levels and leaf bytes, derives the block
  /// layout and query indexes, and checks structural invariants.
  static BlockTree assemble(std::uint64_t n, TreeParams params, std::vector<Level> levels,
                            std::vector<Byte> leaf_bytes);

  std::uint64_t n() const noexcept { return n_; }
  const TreeParams& params() const noexcept { return params_; }
  const std::vector<Level>& levels() const noexcept { return levels_; }
  const std::vector<Byte>& leaf_bytes() const noexcept { return leaf_bytes_; }
  const std::vector<SymbolCounts>& rank_support() const noexcept { return counts_; }
  bool tracks(Byte c) const noexcept { return slot_[c] >= 0; }

  Byte access(std::uint64_t i) const;
  std::uint64_t rank(Byte c, std::uint64_t i) const;
  std::uint64_t select(Byte c, std::uint64_t j) const;
  std::vector<Byte> reconstruct() const;

  /// Builds rank/select counts for `symbols` (replacing existing ones)
  /// bottom-up from the leaf bytes and back-references.
  void attach_rank_support(std::vector<Byte> symbols);
  /// Installs already computed counts (deserialization); validated.
  void attach_rank_support(std::vector<SymbolCounts> counts);

  /// Structural checks: layout, back-reference direction and targets,
  /// leaf size, count consistency. Throws FormatError on violation.
  void validate() const;
  /// Additionally checks that every unmarked block equals its source
  /// substring in `text` and that the tree reconstructs `text`.
  void validate_against(std::span<const Byte> text) const;

  TreeStats stats(const Lz77Factorization* lz = nullptr) const;

  /// Index into refs for unmarked block j.
  std::size_t ref_index(std::size_t level, std::size_t j) const noexcept { return j - marked_before_[level][j]; }

 private:
  void derive();
  std::uint64_t count_prefix(std::size_t slot, std::size_t level, std::size_t j, std::uint64_t o) const;
  std::uint64_t count_pair_prefix(std::size_t slot, std::size_t level, std::size_t t, std::uint64_t x) const;
  std::uint64_t select_in_block(std::size_t slot, std::size_t level, std::size_t j, std::uint64_t r) const;

  std::uint64_t n_ = 0;
  TreeParams params_;
  std::vector<Level> levels_;
  std::vector<Byte> leaf_bytes_;
  std::vector<SymbolCounts> counts_;
  std::array<std::int16_t, 256> slot_ = filled_slots();

  // derived: marked_before_[k][j] = marked blocks before j (size blocks + 1);
  // child_begin_[k][j] = first child of block j on level k + 1 (or first leaf
  // byte on the last level), size blocks + 1
  std::vector<std::vector<std::uint64_t>> marked_before_;
  std::vector<std::vector<std::uint64_t>> child_begin_;

  static std::array<std::int16_t, 256> filled_slots() {
    std::array<std::int16_t, 256> a{};
    a.fill(-1);
    return a;
  }
};

/// Lays out level k + 1 from the marked blocks of `parent`: every marked block
/// is cut into ceil(len / child_len) children, the last one possibly shorter.
void split_marked_blocks(const Level& parent, std::uint64_t child_len, Level& child);

/// Level 0 layout: ceil(n / block_len) blocks.
void layout_top_level(std::uint64_t n, std::uint64_t block_len, Level& level);

/// Recomputes starts/lengths of every level from block_len and the parent
/// levels' marks. Throws FormatError if a level's stored block count or
/// block length is inconsistent.
void derive_layout(std::uint64_t n, std::uint32_t tau, std::vector<Level>& levels);

/// Smallest top-level block length >= ceil(n / s) for which every level's
/// length ceil(b / tau) divides the previous one down to the leaf cutoff, so
/// that only the block ending at n is ever shorter than its level's length.
std::uint64_t top_block_length(std::uint64_t n, std::uint32_t s, std::uint32_t tau, std::uint32_t leaf_cutoff);

inline std::uint64_t child_block_length(std::uint64_t len, std::uint32_t tau) noexcept {
  return (len + tau - 1) / tau;
}

}  // namespace pbt
