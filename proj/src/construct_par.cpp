#include <algorithm>
#include <atomic>
#include <barrier>
#include <chrono>
#include <cstring>
#include <exception>
#include <memory>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "flat_table.hpp"
#include "pbt/build.hpp"
#include "pbt/channel.hpp"
#include "pbt/error.hpp"
#include "pbt/fingerprint.hpp"
#include "pbt/parallel.hpp"

namespace pbt {

void BuildConfig::validate() const {
  if (workers < 1) throw InvalidArgument("workers must be >= 1");
  if (queue_capacity < 1) throw InvalidArgument("queue capacity must be >= 1");
  if (!deterministic) throw InvalidArgument("only deterministic construction is supported");
}

bool LocalFilter::offer(std::uint64_t key, std::uint64_t position) {
  auto [it, inserted] = best_.try_emplace(key, position);
  if (inserted || position < it->second) {
    it->second = position;
    ++forwarded_;
    return true;
  }
  ++dropped_;
  return false;
}

void LocalFilter::clear() {
  best_.clear();
  forwarded_ = dropped_ = 0;
}

void OwnerReduce::offer(std::uint64_t key, std::uint64_t position) {
  auto [it, inserted] = best_.try_emplace(key, position);
  if (!inserted && position < it->second) it->second = position;
}

std::optional<std::uint64_t> OwnerReduce::best(std::uint64_t key) const {
  auto it = best_.find(key);
  if (it == best_.end()) return std::nullopt;
  return it->second;
}

std::string BuildReport::to_json_lines() const {
  std::string out;
  for (const PhaseReport& p : phases) {
    nlohmann::json j = {{"level", p.level},
                        {"phase", p.phase},
                        {"block_len", p.block_len},
                        {"blocks", p.blocks},
                        {"items", p.items},
                        {"groups", p.groups},
                        {"windows", p.windows},
                        {"candidates", p.candidates},
                        {"verifications", p.verifications},
                        {"forwarded", p.forwarded},
                        {"dropped", p.dropped},
                        {"filter_drop_rate", p.filter_drop_rate},
                        {"peak_table_entries", p.peak_table_entries},
                        {"owner_registrations", p.owner_registrations},
                        {"owner_occurrences", p.owner_occurrences},
                        {"seconds", p.seconds}};
    out += j.dump();
    out += '\n';
  }
  nlohmann::json summary = {{"summary", true},
                            {"workers", workers},
                            {"queue_capacity", queue_capacity},
                            {"levels", phases.empty() ? 0 : phases.back().level + 1},
                            {"pruned", pruned},
                            {"seconds", seconds}};
  out += summary.dump();
  out += '\n';
  return out;
}

namespace {

constexpr std::uint64_t kNone = ~std::uint64_t{0};
using Clock = std::chrono::steady_clock;

struct Aborted {};

std::uint32_t horner(const Byte* p, std::uint64_t len) noexcept {
  std::uint32_t h = 0;
  for (std::uint64_t i = 0; i < len; ++i) h = h * kFingerprintBase + p[i];
  return h;
}

class ParallelBuild {
 public:
  ParallelBuild(std::span<const Byte> text, const TreeParams& params, const BuildConfig& config)
      : text_(text), params_(params), k_(config.workers), sync_(config.workers), owners_(config.workers),
        workers_(config.workers) {
    for (std::uint32_t w = 0; w < k_; ++w)
      inbox_.push_back(std::make_unique<BoundedChannel<RoutedCandidate>>(config.queue_capacity));
    const std::uint64_t n = text.size();
    levels_.resize(1);
    layout_top_level(n, top_block_length(n, params.s, params.tau, params.leaf_cutoff), levels_[0]);
    levels_[0].marked.assign(levels_[0].starts.size(), 0);
  }

  std::vector<Level> run(std::vector<PhaseReport>& phases) {
    {
      std::vector<std::jthread> threads;
      for (std::uint32_t w = 0; w < k_; ++w) threads.emplace_back([this, w] { worker(w); });
    }
    if (error_) std::rethrow_exception(error_);
    phases = std::move(phases_);
    return std::move(levels_);
  }

 private:
  struct Group {
    std::uint64_t rep;
    std::uint64_t earliest;
    std::uint32_t next;
  };

  struct OwnerState {
    std::vector<RoutedCandidate> regs;
    std::vector<std::uint32_t> reg_group;
    std::vector<Group> groups;
    std::vector<detail::FpTable> tables;  // one per window length
    std::uint64_t registrations = 0;
    std::uint64_t occurrences = 0;
  };

  struct WorkerStats {
    std::uint64_t windows = 0;
    std::uint64_t candidates = 0;
    std::uint64_t verifications = 0;
    std::uint64_t forwarded = 0;
    std::uint64_t dropped = 0;
    std::uint64_t filter_entries = 0;
  };

  void worker(std::uint32_t w) {
    try {
      for (;;) {
        if (w == 0) prepare_mark();
        wait();
        if (finished_) break;
        run_phase(w, CandidateKind::pair_registration, CandidateKind::window_occurrence);
        apply_marks(w);
        wait();
        if (w == 0) prepare_link();
        wait();
        run_phase(w, CandidateKind::link_registration, CandidateKind::link_occurrence);
        if (w == 0) finish_level();
      }
    } catch (...) {
      fail(std::current_exception());
      sync_.arrive_and_drop();
    }
  }

  void fail(std::exception_ptr e) {
    {
      std::lock_guard lock(error_mu_);
      if (!error_) error_ = e;
    }
    abort_.store(true);
    for (auto& ch : inbox_) ch->close();
  }

  void check_abort() const {
    if (abort_.load(std::memory_order_relaxed)) throw Aborted{};
  }

  void wait() {
    sync_.arrive_and_wait();
    check_abort();
  }

  // -- level bookkeeping (worker 0, between barriers) --

  void prepare_mark() {
    if (finished_) return;
    Level& lv = levels_.back();
    runs_ = level_runs(lv);
    const std::size_t nb = lv.starts.size();
    part_first_.assign(k_ + 1, 0);
    for (std::uint32_t w = 0; w <= k_; ++w) part_first_[w] = nb * w / k_;
    pairs_ = pair_items(lv);
    item_of_block_.assign(nb, kNone);
    for (std::size_t i = 0; i < pairs_.items.size(); ++i) item_of_block_[pairs_.first_block[i]] = i;
    set_items(pairs_.items, pairs_.first_block);
    phase_name_ = "mark";
  }

  void prepare_link() {
    Level& lv = levels_.back();
    unmarked_.clear();
    std::vector<ScanItem> items;
    for (std::size_t j = 0; j < lv.starts.size(); ++j) {
      if (lv.marked[j]) continue;
      unmarked_.push_back(j);
      items.push_back({lv.starts[j], lv.lengths[j]});
    }
    set_items(std::move(items), unmarked_);
    phase_name_ = "link";
  }

  void set_items(std::vector<ScanItem> items, std::span<const std::size_t> first_block) {
    items_ = std::move(items);
    earliest_.assign(items_.size(), kNone);
    item_part_first_.assign(k_ + 1, items_.size());
    item_part_first_[0] = 0;
    std::size_t i = 0;
    for (std::uint32_t w = 1; w <= k_; ++w) {
      while (i < items_.size() && first_block[i] < part_first_[w]) ++i;
      item_part_first_[w] = i;
    }
    lengths_.clear();
    for (const ScanItem& it : items_) lengths_.push_back(it.len);
    std::sort(lengths_.begin(), lengths_.end());
    lengths_.erase(std::unique(lengths_.begin(), lengths_.end()), lengths_.end());
    phase_start_ = Clock::now();
  }

  void apply_marks(std::uint32_t w) {
    Level& lv = levels_.back();
    auto leftmost = [&](std::uint64_t item) { return item != kNone && earliest_[item] == items_[item].start; };
    for (std::size_t j = part_first_[w]; j < part_first_[w + 1]; ++j) {
      bool m = leftmost(item_of_block_[j]);
      if (!m && j > 0) {
        const std::uint64_t left = item_of_block_[j - 1];
        m = left != kNone && items_[left].len > lv.lengths[j - 1] && leftmost(left);
      }
      lv.marked[j] = m;
    }
  }

  void finish_level() {
    Level& lv = levels_.back();
    links_from_leftmost(lv, unmarked_, earliest_);
    if (lv.block_len <= params_.leaf_cutoff) {
      finished_ = true;
      return;
    }
    Level next;
    split_marked_blocks(lv, child_block_length(lv.block_len, params_.tau), next);
    next.marked.assign(next.starts.size(), 0);
    lv.starts = {};
    lv.lengths = {};
    levels_.push_back(std::move(next));
  }

  // -- one route-and-reduce phase, run by every worker --

  template <class Handler>
  std::size_t drain_own(std::uint32_t w, Handler&& handle) {
    return inbox_[w]->drain(handle);
  }

  template <class Handler>
  void send(std::uint32_t w, std::uint32_t owner, const RoutedCandidate& c, Handler&& handle) {
    if (owner == w) {
      handle(c);
      return;
    }
    while (!inbox_[owner]->try_push(c)) {
      check_abort();
      // our own inbox may be what the blocked owner is waiting on
      if (drain_own(w, handle) == 0) inbox_[owner]->wait_not_full(std::chrono::microseconds(200));
    }
  }

  template <class Handler>
  void finish_sending(std::uint32_t w, Handler&& handle) {
    ++round_[w];
    const std::uint64_t target = round_[w] * k_;
    producers_done_.fetch_add(1);
    for (;;) {
      const bool all = producers_done_.load() >= target;
      drain_own(w, handle);
      if (all) {
        drain_own(w, handle);
        return;
      }
      check_abort();
      inbox_[w]->wait_not_empty(std::chrono::microseconds(500));
    }
  }

  std::size_t length_index(std::uint64_t len) const {
    return static_cast<std::size_t>(std::lower_bound(lengths_.begin(), lengths_.end(), len) - lengths_.begin());
  }

  void run_phase(std::uint32_t w, CandidateKind reg_kind, CandidateKind occ_kind) {
    const Byte* t = text_.data();
    OwnerState& me = owners_[w];
    WorkerStats& ws = workers_[w];
    me = OwnerState{};
    ws = WorkerStats{};

    // 1. route registrations to the owners of their fingerprints
    auto on_reg = [&](const RoutedCandidate& c) {
      if (c.kind != reg_kind) throw InternalError("unexpected candidate kind");
      me.regs.push_back(c);
    };
    for (std::size_t i = item_part_first_[w]; i < item_part_first_[w + 1]; ++i) {
      const ScanItem& it = items_[i];
      RoutedCandidate c{reg_kind, horner(t + it.start, it.len), static_cast<std::uint32_t>(it.len), it.start, i};
      send(w, owner_of(c.fp, k_), c, on_reg);
    }
    finish_sending(w, on_reg);
    wait();

    // 2. owners group their registrations by verified content
    std::sort(me.regs.begin(), me.regs.end(), [](const RoutedCandidate& a, const RoutedCandidate& b) {
      if (a.len != b.len) return a.len < b.len;
      if (a.fp != b.fp) return a.fp < b.fp;
      return a.position < b.position;
    });
    me.registrations = me.regs.size();
    std::vector<std::size_t> per_len(lengths_.size(), 0);
    for (const auto& c : me.regs) ++per_len[length_index(c.len)];
    for (std::size_t li = 0; li < lengths_.size(); ++li) me.tables.emplace_back(per_len[li]);
    me.reg_group.resize(me.regs.size());
    for (std::size_t r = 0; r < me.regs.size(); ++r) {
      const RoutedCandidate& c = me.regs[r];
      std::uint32_t& head = me.tables[length_index(c.len)].insert(c.fp);
      std::uint32_t found = detail::FpTable::kEmpty;
      for (std::uint32_t g = head; g != detail::FpTable::kEmpty; g = me.groups[g].next) {
        if (std::memcmp(t + me.groups[g].rep, t + c.position, c.len) == 0) {
          found = g;
          break;
        }
      }
      if (found == detail::FpTable::kEmpty) {
        found = static_cast<std::uint32_t>(me.groups.size());
        me.groups.push_back({c.position, kNone, head});
        head = found;
      }
      me.reg_group[r] = found;
    }
    wait();

    // 3. scan windows of this partition against the (now read-only) owner tables
    auto on_occ = [&](const RoutedCandidate& c) {
      if (c.kind != occ_kind) throw InternalError("unexpected candidate kind");
      Group& g = me.groups[c.payload];
      if (c.position < g.earliest) g.earliest = c.position;
      ++me.occurrences;
    };
    scan_partition(w, occ_kind, on_occ);
    finish_sending(w, on_occ);
    wait();

    // 4. publish the global leftmost occurrence of every registered item
    for (std::size_t r = 0; r < me.regs.size(); ++r) {
      const std::uint64_t e = me.groups[me.reg_group[r]].earliest;
      if (e == kNone) throw InternalError("registered item without an occurrence");
      earliest_[me.regs[r].payload] = e;
    }
    wait();
    if (w == 0) record_phase();
  }

  template <class Handler>
  void scan_partition(std::uint32_t w, CandidateKind occ_kind, Handler& on_occ) {
    const Level& lv = levels_.back();
    const std::size_t b0 = part_first_[w], b1 = part_first_[w + 1];
    if (b0 == b1) return;
    const std::uint64_t pbegin = lv.starts[b0], pend = lv.end(b1 - 1);
    const Byte* t = text_.data();
    WorkerStats& ws = workers_[w];
    LocalFilter filter;
    std::vector<std::uint32_t> buf(4096);
    const auto first_run = std::upper_bound(runs_.begin(), runs_.end(), pbegin,
                                            [](std::uint64_t p, const Run& r) { return p < r.end; });
    for (std::size_t li = 0; li < lengths_.size(); ++li) {
      const std::uint64_t len = lengths_[li];
      for (auto run = first_run; run != runs_.end() && run->begin < pend; ++run) {
        const std::uint64_t a = std::max(run->begin, pbegin);
        const std::uint64_t last_start = std::min(run->end, pend);  // exclusive
        const std::uint64_t stop = std::min(run->end, last_start + len - 1);
        if (stop < a + len) continue;
        BlockedWindowStream stream(text_.subspan(a, stop - a), len);
        std::uint64_t p = a;
        for (;;) {
          const std::size_t got = stream.next(buf);
          if (got == 0) break;
          ws.windows += got;
          for (std::size_t i = 0; i < got; ++i) {
            const std::uint32_t fp = buf[i];
            const std::uint32_t o = owner_of(fp, k_);
            const detail::FpTable& table = owners_[o].tables[li];
            if (!table.maybe_contains(fp)) continue;
            std::uint32_t g = table.find(fp);
            if (g == detail::FpTable::kEmpty) continue;
            ++ws.candidates;
            const std::uint64_t pos = p + i;
            for (; g != detail::FpTable::kEmpty; g = owners_[o].groups[g].next) {
              const Group& grp = owners_[o].groups[g];
              if (grp.rep < pos) continue;
              const std::uint64_t key = (std::uint64_t{o} << 32) | g;
              if (filter.contains(key)) {
                filter.offer(key, pos);  // never improves: positions only grow
                continue;
              }
              ++ws.verifications;
              if (std::memcmp(t + pos, t + grp.rep, len) != 0) continue;
              if (filter.offer(key, pos))
                send(w, o, RoutedCandidate{occ_kind, fp, static_cast<std::uint32_t>(len), pos, g}, on_occ);
            }
          }
          p += got;
          drain_own(w, on_occ);
        }
      }
    }
    ws.forwarded = filter.forwarded();
    ws.dropped = filter.dropped();
    ws.filter_entries = filter.size();
  }

  void record_phase() {
    PhaseReport r;
    r.level = levels_.size() - 1;
    r.phase = phase_name_;
    r.block_len = levels_.back().block_len;
    r.blocks = levels_.back().starts.size();
    r.items = items_.size();
    for (std::uint32_t w = 0; w < k_; ++w) {
      const WorkerStats& ws = workers_[w];
      const OwnerState& os = owners_[w];
      r.groups += os.groups.size();
      r.windows += ws.windows;
      r.candidates += ws.candidates;
      r.verifications += ws.verifications;
      r.forwarded += ws.forwarded;
      r.dropped += ws.dropped;
      r.peak_table_entries += os.groups.size() + ws.filter_entries;
      r.owner_registrations.push_back(os.registrations);
      r.owner_occurrences.push_back(os.occurrences);
    }
    const std::uint64_t seen = r.forwarded + r.dropped;
    r.filter_drop_rate = seen == 0 ? 0.0 : static_cast<double>(r.dropped) / static_cast<double>(seen);
    r.seconds = std::chrono::duration<double>(Clock::now() - phase_start_).count();
    phases_.push_back(std::move(r));
  }

  std::span<const Byte> text_;
  TreeParams params_;
  std::uint32_t k_;
  std::barrier<> sync_;
  std::vector<std::unique_ptr<BoundedChannel<RoutedCandidate>>> inbox_;
  std::atomic<bool> abort_{false};
  std::atomic<std::uint64_t> producers_done_{0};
  std::vector<std::uint64_t> round_ = std::vector<std::uint64_t>(k_, 0);
  std::mutex error_mu_;
  std::exception_ptr error_;

  // level state, written by worker 0 between barriers
  std::vector<Level> levels_;
  std::vector<Run> runs_;
  std::vector<std::size_t> part_first_;
  PairItems pairs_;
  std::vector<std::uint64_t> item_of_block_;
  std::vector<std::size_t> unmarked_;
  bool finished_ = false;

  // phase state
  std::vector<ScanItem> items_;
  std::vector<std::size_t> item_part_first_;
  std::vector<std::uint64_t> lengths_;
  std::vector<std::uint64_t> earliest_;  // each entry written by exactly one owner
  std::vector<OwnerState> owners_;
  std::vector<WorkerStats> workers_;
  std::string phase_name_;
  Clock::time_point phase_start_;
  std::vector<PhaseReport> phases_;
};

}  // namespace

BlockTree build_parallel(const Text& text, const TreeParams& params, const BuildConfig& config,
                         BuildReport* report) {
  params.validate();
  config.validate();
  const auto start = Clock::now();
  ParallelBuild build(text.bytes(), params, config);
  std::vector<PhaseReport> phases;
  std::vector<Level> levels;
  try {
    levels = build.run(phases);
  } catch (const Aborted&) {
    throw InternalError("parallel construction aborted");
  }
  std::size_t pruned = 0;
  BlockTree tree = finish_tree(text.bytes(), params, std::move(levels), config.prune, config.prune_fixpoint, &pruned);
  if (report != nullptr) {
    report->workers = config.workers;
    report->queue_capacity = config.queue_capacity;
    report->phases = std::move(phases);
    report->pruned = pruned;
    report->seconds = std::chrono::duration<double>(Clock::now() - start).count();
  }
  return tree;
}

}  // namespace pbt
