#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pbt/text.hpp"

namespace pbt {

/// Karp-Rabin fingerprints phi(s..e) = sum T[i] * r^(e-i) mod q with q = 2^32
/// (plain uint32_t wraparound) and r = 33.
///
/// Equal fingerprints do not imply equal strings. Every consumer in this
/// library confirms a match with a byte comparison before acting on it.
inline constexpr std::uint32_t kFingerprintBase = 33;

/// r^k mod 2^32.
constexpr std::uint32_t base_power(std::uint64_t k) noexcept {
  std::uint32_t result = 1, b = kFingerprintBase;
  while (k != 0) {
    if (k & 1) result *= b;
    b *= b;
    k >>= 1;
  }
  return result;
}

struct Fingerprint {
  std::uint32_t value = 0;
  std::uint64_t len = 0;

  auto operator<=>(const Fingerprint&) const = default;
};

/// Precomputed powers r^0 .. r^max_len.
class FingerprintParams {
 public:
  explicit FingerprintParams(std::size_t max_len = 64);

  static constexpr std::uint64_t modulus_bits = 32;
  static constexpr std::uint32_t base = kFingerprintBase;

  std::uint32_t power(std::uint64_t k) const noexcept {
    return k < powers_.size() ? powers_[k] : base_power(k);
  }
  std::span<const std::uint32_t> powers() const noexcept { return powers_; }

 private:
  std::vector<std::uint32_t> powers_;
};

/// Evaluates the defining sum over text[begin, end). Reference oracle.
Fingerprint fp_direct(std::span<const Byte> text, std::size_t begin, std::size_t end);

/// phi(s..e) from phi(s-1..e-1): prev * r - out * r^len + in.
inline Fingerprint fp_roll(Fingerprint prev, Byte out_char, Byte in_char, const FingerprintParams& params) {
  prev.value = prev.value * kFingerprintBase - out_char * params.power(prev.len) + in_char;
  return prev;
}

/// phi(a . b) from phi(a), phi(b).
inline Fingerprint fp_concat(Fingerprint a, Fingerprint b) noexcept {
  return {a.value * base_power(b.len) + b.value, a.len + b.len};
}

/// Stream of every length-`ell` window fingerprint of a text range, produced
/// by one direct evaluation followed by rolling updates.
class ScalarWindowStream {
 public:
  ScalarWindowStream(std::span<const Byte> range, std::size_t ell);

  /// Number of windows in total.
  std::size_t count() const noexcept { return count_; }
  /// Fills `out` with the next fingerprint values; returns how many were written.
  std::size_t next(std::span<std::uint32_t> out);

 private:
  std::span<const Byte> text_;
  std::size_t ell_;
  std::size_t count_;
  std::size_t pos_ = 0;
  std::uint32_t hash_ = 0;
  std::uint32_t out_weight_;
};

/// Same contract as ScalarWindowStream, computed 16 windows at a time:
///
///   phi(s..e) = phi(s-16..e-16) * r^16 - phi(s-16..s-1) * r^(e-s+1) + phi(e-15..e)
///
/// The 16-character hashes are built from pair hashes (weights r, 1), 4-tuple
/// hashes (r^2, 1), 8-tuple hashes (r^4, 1) carried over between iterations,
/// and 16-tuple hashes (r^8, 1). They are kept in a ring buffer until the
/// window start reaches them. Windows of at most 16 characters are hashed
/// directly; windows of 17..32 characters use a fixed 64-entry ring.
class BlockedWindowStream {
 public:
  BlockedWindowStream(std::span<const Byte> range, std::size_t ell);

  std::size_t count() const noexcept { return count_; }
  std::size_t next(std::span<std::uint32_t> out);

 private:
  static constexpr std::size_t kLanes = 16;
  static constexpr std::size_t kSmallRing = 64;

  void compute_block();  // fills block_ with windows [pos_, pos_ + 16)
  void produce_tuples_until(std::size_t last);
  std::uint32_t* ring() noexcept { return ring_heap_.empty() ? ring_small_.data() : ring_heap_.data(); }

  std::span<const Byte> text_;
  std::size_t ell_;
  std::size_t count_;
  std::size_t pos_ = 0;  // first window of block_
  std::size_t served_ = 0;  // windows of block_ already handed out
  std::size_t block_size_ = 0;
  std::array<std::uint32_t, kLanes> block_{};

  // 16-tuple hash state
  std::size_t tuples_ready_ = 0;  // 16-tuple hashes produced for positions [0, tuples_ready_)
  std::array<std::uint32_t, 8> carried_oct_{};
  bool have_carry_ = false;
  std::size_t ring_mask_ = 0;
  std::array<std::uint32_t, kSmallRing> ring_small_{};
  std::vector<std::uint32_t> ring_heap_;
  std::uint32_t weight_len_;  // r^ell
};

/// All window fingerprints of length `ell` whose start lies in [lo, hi - ell],
/// 0-based with `hi` exclusive.
std::vector<std::uint32_t> fp_all_windows(std::span<const Byte> text, std::size_t ell, std::size_t lo,
                                          std::size_t hi);
std::vector<std::uint32_t> fp_blocked_windows(std::span<const Byte> text, std::size_t ell, std::size_t lo,
                                              std::size_t hi);

}  // namespace pbt
