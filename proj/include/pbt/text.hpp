#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace pbt {

using Byte = std::uint8_t;
using Histogram = std::array<std::uint64_t, 256>;

/// Immutable, non-empty byte text with its alphabet statistics.
///
/// Positions in the query helpers below are 1-based; everything else in the
/// library (fingerprints, levels, back-references) works on 0-based offsets.
class Text {
 public:
  explicit Text(std::vector<Byte> bytes);
  static Text from_string(std::string_view s);

  std::span<const Byte> bytes() const noexcept { return bytes_; }
  const Byte* data() const noexcept { return bytes_.data(); }
  std::size_t size() const noexcept { return bytes_.size(); }
  Byte operator[](std::size_t i) const noexcept { return bytes_[i]; }

  /// Number of distinct byte values present.
  unsigned sigma() const noexcept { return sigma_; }
  const Histogram& histogram() const noexcept { return histogram_; }
  std::vector<Byte> alphabet() const;

 private:
  std::vector<Byte> bytes_;
  Histogram histogram_{};
  unsigned sigma_ = 0;
};

Text load_text(const std::filesystem::path& path);

Byte naive_access(const Text& text, std::uint64_t i);
std::uint64_t naive_rank(const Text& text, Byte c, std::uint64_t i);
std::uint64_t naive_select(const Text& text, Byte c, std::uint64_t j);

struct Lz77Factor {
  std::uint64_t position = 0;  // 0-based start in the text
  std::uint64_t length = 1;
  std::uint64_t source = 0;  // 0-based source start; the byte value for literals
  bool literal = true;

  bool operator==(const Lz77Factor&) const = default;
};

struct Lz77Factorization {
  std::vector<Lz77Factor> factors;
  std::size_t z() const noexcept { return factors.size(); }
};

/// Greedy leftmost-longest LZ77 with self-overlapping sources; among sources
/// of maximal length the smallest start wins.
Lz77Factorization lz77_factorize(const Text& text);

/// Quadratic reference scan with the same tie-breaking as lz77_factorize.
Lz77Factorization lz77_factorize_naive(const Text& text);

std::vector<Byte> lz77_expand(const Lz77Factorization& f);

/// Synthetic repetitive corpus: a random seed over `alphabet` of length
/// `seed_len`, repeated until `n` bytes, each copy mutating every byte with
/// probability `mutation_rate`.
struct RepetitiveCorpusSpec {
  std::size_t n = 32u << 20;
  std::size_t seed_len = 16u << 10;
  double mutation_rate = 0.001;
  std::uint64_t rng_seed = 42;
  std::string_view alphabet = {};  // empty: printable ASCII 0x20..0x7e
};

std::vector<Byte> make_repetitive_corpus(const RepetitiveCorpusSpec& spec);

}  // namespace pbt
