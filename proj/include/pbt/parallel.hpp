#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "pbt/block_tree.hpp"
#include "pbt/text.hpp"

namespace pbt {

struct BuildConfig {
  std::uint32_t workers = 1;            // K; also the number of partitions
  std::size_t queue_capacity = 512;     // entries per owner channel
  bool prune = false;
  bool prune_fixpoint = false;
  bool deterministic = true;            // the only supported mode

  void validate() const;
};

enum class CandidateKind : std::uint8_t { pair_registration, window_occurrence, link_registration, link_occurrence };

/// Message routed to the worker owning `fp`. For registrations `payload` is
/// the item index, for occurrences the owner-local group id.
struct RoutedCandidate {
  CandidateKind kind = CandidateKind::pair_registration;
  std::uint32_t fp = 0;
  std::uint32_t len = 0;
  std::uint64_t position = 0;
  std::uint64_t payload = 0;
};

inline std::uint32_t owner_of(std::uint32_t fp, std::uint32_t workers) noexcept { return fp % workers; }

/// Worker-local filter: keeps the smallest position per key and lets a
/// candidate through only when it improves on it.
class LocalFilter {
 public:
  /// True if `position` is a new minimum for `key` (forward it).
  bool offer(std::uint64_t key, std::uint64_t position);
  bool contains(std::uint64_t key) const { return best_.contains(key); }
  std::size_t size() const noexcept { return best_.size(); }
  std::uint64_t forwarded() const noexcept { return forwarded_; }
  std::uint64_t dropped() const noexcept { return dropped_; }
  void clear();

 private:
  std::unordered_map<std::uint64_t, std::uint64_t> best_;
  std::uint64_t forwarded_ = 0;
  std::uint64_t dropped_ = 0;
};

/// Owner side: global minimum per key over everything it receives.
class OwnerReduce {
 public:
  void offer(std::uint64_t key, std::uint64_t position);
  std::optional<std::uint64_t> best(std::uint64_t key) const;
  const std::unordered_map<std::uint64_t, std::uint64_t>& table() const noexcept { return best_; }

 private:
  std::unordered_map<std::uint64_t, std::uint64_t> best_;
};

/// One construction phase (marking or linking) of one level.
struct PhaseReport {
  std::size_t level = 0;
  std::string phase;
  std::uint64_t block_len = 0;
  std::uint64_t blocks = 0;
  std::uint64_t items = 0;
  std::uint64_t groups = 0;
  std::uint64_t windows = 0;
  std::uint64_t candidates = 0;      // window hits in an owner table
  std::uint64_t verifications = 0;
  std::uint64_t forwarded = 0;       // occurrences sent to owners
  std::uint64_t dropped = 0;         // hits dominated by the local filter
  double filter_drop_rate = 0.0;
  std::uint64_t peak_table_entries = 0;  // owner groups + local filter entries, all workers
  std::vector<std::uint64_t> owner_registrations;
  std::vector<std::uint64_t> owner_occurrences;
  double seconds = 0.0;
};

struct BuildReport {
  std::uint32_t workers = 0;
  std::size_t queue_capacity = 0;
  std::vector<PhaseReport> phases;
  std::size_t pruned = 0;
  double seconds = 0.0;

  /// One JSON object per phase, then a summary object.
  std::string to_json_lines() const;
};

/// Domain-decomposed construction with K workers. Produces the same tree as
/// build_sequential for every K and queue capacity.
BlockTree build_parallel(const Text& text, const TreeParams& params, const BuildConfig& config,
                         BuildReport* report = nullptr);

}  // namespace pbt
