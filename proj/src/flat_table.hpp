#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace pbt::detail {

/// Open-addressing map from 32-bit fingerprint values to 32-bit values, with
/// a bit filter in front so that most window lookups touch a single word.
class FpTable {
 public:
  static constexpr std::uint32_t kEmpty = 0xffffffffu;

  explicit FpTable(std::size_t expected = 0) { reserve(expected); }

  void reserve(std::size_t expected) {
    const std::size_t slots = std::bit_ceil(std::max<std::size_t>(16, expected * 2));
    keys_.assign(slots, 0);
    values_.assign(slots, kEmpty);
    slot_shift_ = 64 - std::countr_zero(slots);
    const std::size_t bits = std::min<std::size_t>(std::size_t{1} << 30,
                                                   std::bit_ceil(std::max<std::size_t>(4096, expected * 16)));
    filter_.assign(bits / 64, 0);
    filter_shift_ = 32 - std::countr_zero(bits);
    size_ = 0;
  }

  std::size_t size() const noexcept { return size_; }
  std::size_t memory_bytes() const noexcept {
    return keys_.size() * sizeof(std::uint32_t) * 2 + filter_.size() * sizeof(std::uint64_t);
  }

  bool maybe_contains(std::uint32_t fp) const noexcept {
    const std::uint32_t bit = filter_index(fp);
    return (filter_[bit >> 6] >> (bit & 63)) & 1u;
  }

  /// Value stored for fp, or kEmpty.
  std::uint32_t find(std::uint32_t fp) const noexcept {
    const std::size_t mask = keys_.size() - 1;
    for (std::size_t i = slot(fp);; i = (i + 1) & mask) {
      if (values_[i] == kEmpty) return kEmpty;
      if (keys_[i] == fp) return values_[i];
    }
  }

  /// Reference to the value for fp; a new entry holds kEmpty until assigned.
  /// Assign a value other than kEmpty before the next call.
  std::uint32_t& insert(std::uint32_t fp) {
    if ((size_ + 1) * 2 > keys_.size()) grow();
    const std::size_t mask = keys_.size() - 1;
    std::size_t i = slot(fp);
    for (; values_[i] != kEmpty; i = (i + 1) & mask)
      if (keys_[i] == fp) return values_[i];
    keys_[i] = fp;
    ++size_;
    const std::uint32_t bit = filter_index(fp);
    filter_[bit >> 6] |= std::uint64_t{1} << (bit & 63);
    return values_[i];
  }

 private:
  std::size_t slot(std::uint32_t fp) const noexcept {
    return static_cast<std::size_t>((fp * 0x9E3779B97F4A7C15ull) >> slot_shift_);
  }
  std::uint32_t filter_index(std::uint32_t fp) const noexcept { return (fp * 0x85EBCA6Bu) >> filter_shift_; }

  void grow() {
    std::vector<std::uint32_t> keys = std::move(keys_);
    std::vector<std::uint32_t> values = std::move(values_);
    reserve(keys.size());
    for (std::size_t i = 0; i < keys.size(); ++i)
      if (values[i] != kEmpty) insert(keys[i]) = values[i];
  }

  std::vector<std::uint32_t> keys_;
  std::vector<std::uint32_t> values_;
  std::vector<std::uint64_t> filter_;
  int slot_shift_ = 60;
  int filter_shift_ = 20;
  std::size_t size_ = 0;
};

}  // namespace pbt::detail
