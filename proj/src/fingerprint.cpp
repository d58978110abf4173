#include "pbt/fingerprint.hpp"

#include <algorithm>
#include <bit>

#include "pbt/error.hpp"

namespace pbt {

namespace {

constexpr std::uint32_t kR = kFingerprintBase;
constexpr std::uint32_t kR2 = base_power(2);
constexpr std::uint32_t kR4 = base_power(4);
constexpr std::uint32_t kR8 = base_power(8);
constexpr std::uint32_t kR16 = base_power(16);

inline std::uint32_t horner(const Byte* p, std::size_t len) noexcept {
  std::uint32_t h = 0;
  for (std::size_t i = 0; i < len; ++i) h = h * kR + p[i];
  return h;
}

}  // namespace

FingerprintParams::FingerprintParams(std::size_t max_len) : powers_(max_len + 1) {
  powers_[0] = 1;
  for (std::size_t k = 1; k <= max_len; ++k) powers_[k] = powers_[k - 1] * kR;
}

Fingerprint fp_direct(std::span<const Byte> text, std::size_t begin, std::size_t end) {
  if (begin >= end || end > text.size()) throw BoundsError("fingerprint range out of bounds");
  std::uint32_t sum = 0;
  for (std::size_t i = begin; i < end; ++i) sum += static_cast<std::uint32_t>(text[i]) * base_power(end - 1 - i);
  return {sum, end - begin};
}

ScalarWindowStream::ScalarWindowStream(std::span<const Byte> range, std::size_t ell)
    : text_(range), ell_(ell), count_(range.size() >= ell ? range.size() - ell + 1 : 0),
      out_weight_(base_power(ell)) {
  if (ell == 0) throw InvalidArgument("window length must be positive");
}

std::size_t ScalarWindowStream::next(std::span<std::uint32_t> out) {
  std::size_t written = 0;
  const Byte* t = text_.data();
  while (written < out.size() && pos_ < count_) {
    if (pos_ == 0) {
      hash_ = horner(t, ell_);
    } else {
      hash_ = hash_ * kR - t[pos_ - 1] * out_weight_ + t[pos_ + ell_ - 1];
    }
    out[written++] = hash_;
    ++pos_;
  }
  return written;
}

BlockedWindowStream::BlockedWindowStream(std::span<const Byte> range, std::size_t ell)
    : text_(range), ell_(ell), count_(range.size() >= ell ? range.size() - ell + 1 : 0),
      weight_len_(base_power(ell)) {
  if (ell == 0) throw InvalidArgument("window length must be positive");
  if (ell > kLanes) {
    if (ell <= 32) {
      ring_mask_ = kSmallRing - 1;
    } else {
      ring_heap_.resize(std::bit_ceil(ell + 2 * kLanes + kLanes));
      ring_mask_ = ring_heap_.size() - 1;
    }
  }
}

std::size_t BlockedWindowStream::next(std::span<std::uint32_t> out) {
  std::size_t written = 0;
  while (written < out.size()) {
    if (served_ == block_size_) {
      if (pos_ + block_size_ >= count_) break;
      pos_ += block_size_;
      compute_block();
      served_ = 0;
    }
    const std::size_t take = std::min(block_size_ - served_, out.size() - written);
    std::copy_n(block_.begin() + static_cast<std::ptrdiff_t>(served_), take, out.begin() + static_cast<std::ptrdiff_t>(written));
    served_ += take;
    written += take;
  }
  return written;
}

void BlockedWindowStream::produce_tuples_until(std::size_t last) {
  const Byte* t = text_.data();
  const std::size_t n = text_.size();
  std::uint32_t* r = ring();
  while (tuples_ready_ <= last) {
    const std::size_t gp = tuples_ready_;
    if (gp + 2 * kLanes - 2 < n) {
      const Byte* c = t + gp;
      const std::size_t from = have_carry_ ? 8 : 0;
      std::array<std::uint32_t, 30> pair{};
      std::array<std::uint32_t, 28> quad{};
      std::array<std::uint32_t, 24> oct{};
      for (std::size_t i = from; i < 30; ++i) pair[i] = c[i] * kR + c[i + 1];
      for (std::size_t i = from; i < 28; ++i) quad[i] = pair[i] * kR2 + pair[i + 2];
      for (std::size_t i = 0; i < from; ++i) oct[i] = carried_oct_[i];
      for (std::size_t i = from; i < 24; ++i) oct[i] = quad[i] * kR4 + quad[i + 4];
      for (std::size_t i = 0; i < kLanes; ++i) r[(gp + i) & ring_mask_] = oct[i] * kR8 + oct[i + 8];
      std::copy_n(oct.begin() + kLanes, 8, carried_oct_.begin());
      have_carry_ = true;
    } else {
      for (std::size_t x = gp; x < gp + kLanes && x + kLanes <= n; ++x) r[x & ring_mask_] = horner(t + x, kLanes);
      have_carry_ = false;
    }
    tuples_ready_ += kLanes;
  }
}

void BlockedWindowStream::compute_block() {
  const Byte* t = text_.data();
  const std::size_t size = std::min(kLanes, count_ - pos_);
  const std::size_t p = pos_;

  if (ell_ <= kLanes) {
    if (size == kLanes) {
      std::array<std::uint32_t, kLanes> h{};
      for (std::size_t i = 0; i < ell_; ++i)
        for (std::size_t lane = 0; lane < kLanes; ++lane) h[lane] = h[lane] * kR + t[p + lane + i];
      block_ = h;
    } else {
      for (std::size_t lane = 0; lane < size; ++lane) block_[lane] = horner(t + p + lane, ell_);
    }
    block_size_ = size;
    return;
  }

  if (p == 0) {
    block_[0] = horner(t, ell_);
    for (std::size_t lane = 1; lane < size; ++lane)
      block_[lane] = block_[lane - 1] * kR - t[lane - 1] * weight_len_ + t[lane + ell_ - 1];
  } else if (size == kLanes) {
    produce_tuples_until(p + ell_ - 1);
    const std::uint32_t* r = ring();
    std::array<std::uint32_t, kLanes> h{};
    for (std::size_t lane = 0; lane < kLanes; ++lane) {
      h[lane] = block_[lane] * kR16 - r[(p - kLanes + lane) & ring_mask_] * weight_len_ +
                r[(p + ell_ - kLanes + lane) & ring_mask_];
    }
    block_ = h;
  } else {
    std::uint32_t h = block_[kLanes - 1];
    for (std::size_t lane = 0; lane < size; ++lane) {
      const std::size_t s = p + lane;
      h = h * kR - t[s - 1] * weight_len_ + t[s + ell_ - 1];
      block_[lane] = h;
    }
  }
  block_size_ = size;
}

namespace {

template <class Stream>
std::vector<std::uint32_t> collect(std::span<const Byte> text, std::size_t ell, std::size_t lo, std::size_t hi) {
  if (ell == 0) throw InvalidArgument("window length must be positive");
  if (lo > hi || hi > text.size() || hi - lo < ell) throw BoundsError("window range out of bounds");
  Stream stream(text.subspan(lo, hi - lo), ell);
  std::vector<std::uint32_t> out(stream.count());
  stream.next(out);
  return out;
}

}  // namespace

std::vector<std::uint32_t> fp_all_windows(std::span<const Byte> text, std::size_t ell, std::size_t lo,
                                          std::size_t hi) {
  return collect<ScalarWindowStream>(text, ell, lo, hi);
}

std::vector<std::uint32_t> fp_blocked_windows(std::span<const Byte> text, std::size_t ell, std::size_t lo,
                                              std::size_t hi) {
  return collect<BlockedWindowStream>(text, ell, lo, hi);
}

}  // namespace pbt
