#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pbt/block_tree.hpp"
#include "pbt/text.hpp"

namespace pbt {

/// Maximal sequence of blocks [first, last) of a level that are adjacent in
/// T, covering text range [begin, end).
struct Run {
  std::size_t first = 0;
  std::size_t last = 0;
  std::uint64_t begin = 0;
  std::uint64_t end = 0;
};

std::vector<Run> level_runs(const Level& level);

/// A substring T[start, start + len) whose leftmost occurrence is wanted.
struct ScanItem {
  std::uint64_t start = 0;
  std::uint64_t len = 0;
};

/// Counters of one leftmost-occurrence search.
struct ScanStats {
  std::uint64_t items = 0;
  std::uint64_t groups = 0;             // distinct contents among the items
  std::uint64_t windows = 0;            // window fingerprints computed
  std::uint64_t candidates = 0;         // windows whose fingerprint hit the table
  std::uint64_t verifications = 0;      // byte comparisons, including failed ones
  std::uint64_t verified_matches = 0;   // comparisons that confirmed a match
  std::uint64_t distinct_matches = 0;   // groups that received a confirmed match

  ScanStats& operator+=(const ScanStats& o);
};

/// For every item, the smallest p such that T[p, p + len) lies inside one of
/// `runs` and equals the item's content. Items must themselves lie inside a
/// run, so the answer is at most their start. Every match is confirmed by a
/// byte comparison, at most once per distinct content.
std::vector<std::uint64_t> leftmost_occurrences(std::span<const Byte> text, std::span<const Run> runs,
                                                std::span<const ScanItem> items, ScanStats* stats = nullptr);

/// Phase-one items of a level: every pair of adjacent blocks, and every block
/// that is alone in its run. `first_block[i]` is the first block of item i.
struct PairItems {
  std::vector<ScanItem> items;
  std::vector<std::size_t> first_block;
};
PairItems pair_items(const Level& level);

/// Marks both blocks of every item whose leftmost occurrence is itself.
std::vector<std::uint8_t> marks_from_leftmost(const Level& level, const PairItems& pairs,
                                              std::span<const std::uint64_t> leftmost);

/// Turns the leftmost occurrence of every unmarked block into a back-reference
/// (filling level.refs); a block whose leftmost occurrence is itself becomes
/// marked. Returns the number of such promotions. Throws InternalError if a
/// source does not lie in marked blocks.
std::size_t links_from_leftmost(Level& level, std::span<const std::size_t> unmarked,
                                std::span<const std::uint64_t> leftmost);

/// Phase one: marked flags for a laid-out level.
std::vector<std::uint8_t> mark_level(std::span<const Byte> text, const Level& level, ScanStats* stats = nullptr);

/// Phase two: back-references for the unmarked blocks of a marked level.
/// Returns the number of blocks promoted to marked.
std::size_t link_level(std::span<const Byte> text, Level& level, ScanStats* stats = nullptr);

/// Leaf bytes of a finished level: concatenation of its marked blocks.
std::vector<Byte> collect_leaf_bytes(std::span<const Byte> text, const Level& level);

struct SequentialReport {
  std::vector<ScanStats> mark;  // per level
  std::vector<ScanStats> link;
  std::size_t promotions = 0;
  std::size_t pruned = 0;
};

/// Level-by-level construction: mark, link, split, until the block length
/// drops to the leaf cutoff. Optional pruning, then rank support for
/// params.tracked_symbols.
BlockTree build_sequential(const Text& text, const TreeParams& params, bool prune = false,
                           bool prune_fixpoint = false, SequentialReport* report = nullptr);

/// Builds levels without pruning or rank support (starts/lengths of all but
/// the last level may be released).
std::vector<Level> build_levels_sequential(std::span<const Byte> text, const TreeParams& params,
                                           SequentialReport* report = nullptr);

/// Shared tail of the builders: optional pruning, leaf bytes, assembly,
/// rank support.
BlockTree finish_tree(std::span<const Byte> text, const TreeParams& params, std::vector<Level> levels, bool prune,
                      bool prune_fixpoint, std::size_t* pruned = nullptr);

/// Demotes marked blocks that nothing points to, whose content occurs earlier
/// inside marked blocks of the same level, and whose children are all leaves;
/// their children are deleted. A block is only demoted when the serialized
/// size shrinks (`tracked` is the number of symbols with rank support).
/// Bottom-up; right to left within a level. Returns the number of demotions.
std::size_t prune_levels(std::span<const Byte> text, std::uint32_t tau, std::vector<Level>& levels,
                         std::size_t tracked, bool fixpoint = false);

/// Pruned copy of a tree with the same rank support.
BlockTree prune_tree(const BlockTree& tree, bool fixpoint = false);

}  // namespace pbt
