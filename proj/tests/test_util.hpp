#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <random>
#include <string>
#include <vector>

#include "pbt/block_tree.hpp"
#include "pbt/text.hpp"

namespace pbt::oracle {

enum class TextClass { random, periodic, mutated_repeat };

/// Byte alphabet of size sigma; 96 uses printable ASCII plus newline.
inline std::vector<Byte> alphabet_of(unsigned sigma) {
  std::vector<Byte> a;
  if (sigma == 256) {
    for (unsigned c = 0; c < 256; ++c) a.push_back(static_cast<Byte>(c));
  } else if (sigma == 96) {
    a.push_back('\n');
    for (unsigned c = 0x20; c < 0x7f; ++c) a.push_back(static_cast<Byte>(c));
  } else {
    for (unsigned c = 0; c < sigma; ++c) a.push_back(static_cast<Byte>('a' + c));
  }
  return a;
}

inline std::vector<Byte> make_text(std::mt19937_64& rng, std::size_t n, unsigned sigma, TextClass cls) {
  const auto alpha = alphabet_of(sigma);
  auto pick = [&] { return alpha[rng() % alpha.size()]; };
  std::vector<Byte> t(n);
  switch (cls) {
    case TextClass::random:
      for (auto& b : t) b = pick();
      break;
    case TextClass::periodic: {
      const std::size_t period = 1 + rng() % std::max<std::size_t>(1, std::min<std::size_t>(n, 64));
      std::vector<Byte> unit(period);
      for (auto& b : unit) b = pick();
      for (std::size_t i = 0; i < n; ++i) t[i] = unit[i % period];
      break;
    }
    case TextClass::mutated_repeat: {
      const std::size_t seed = 1 + rng() % std::max<std::size_t>(1, n / 8 + 1);
      std::vector<Byte> unit(seed);
      for (auto& b : unit) b = pick();
      std::bernoulli_distribution mutate(0.01);
      for (std::size_t i = 0; i < n; ++i) t[i] = (i >= seed && mutate(rng)) ? pick() : unit[i % seed];
      break;
    }
  }
  return t;
}

/// Quadratic reference marking: block j is marked iff a pair of adjacent
/// blocks containing it (or j alone, when it has no adjacent neighbour) has
/// no occurrence inside the covered runs that starts before the pair.
inline std::vector<std::uint8_t> brute_force_marks(const std::vector<Byte>& text,
                                                   const std::vector<std::uint64_t>& starts,
                                                   const std::vector<std::uint64_t>& lengths) {
  const std::size_t nb = starts.size();
  auto adjacent = [&](std::size_t j) { return j > 0 && starts[j - 1] + lengths[j - 1] == starts[j]; };
  std::vector<std::pair<std::uint64_t, std::uint64_t>> runs;  // [begin, end)
  for (std::size_t j = 0; j < nb; ++j) {
    if (adjacent(j))
      runs.back().second = starts[j] + lengths[j];
    else
      runs.push_back({starts[j], starts[j] + lengths[j]});
  }
  auto first_occurrence_is_self = [&](std::uint64_t start, std::uint64_t len) {
    for (const auto& [b, e] : runs) {
      for (std::uint64_t p = b; p + len <= e && p < start; ++p)
        if (std::memcmp(text.data() + p, text.data() + start, len) == 0) return false;
      if (b > start) break;
    }
    return true;
  };
  std::vector<std::uint8_t> marked(nb, 0);
  for (std::size_t j = 0; j < nb; ++j) {
    const bool has_left = adjacent(j);
    const bool has_right = j + 1 < nb && adjacent(j + 1);
    if (!has_left && !has_right) {
      if (first_occurrence_is_self(starts[j], lengths[j])) marked[j] = 1;
      continue;
    }
    if (has_right && first_occurrence_is_self(starts[j], lengths[j] + lengths[j + 1])) marked[j] = marked[j + 1] = 1;
  }
  return marked;
}

/// Checks every access and `queries` random rank/select calls per tracked
/// symbol against the naive oracles. Returns an empty string or a
/// description of the first mismatch.
inline std::string check_queries(const BlockTree& tree, const Text& text, std::mt19937_64& rng, int queries = 1000) {
  const auto n = text.size();
  for (std::uint64_t i = 1; i <= n; ++i)
    if (tree.access(i) != text[i - 1]) return "access(" + std::to_string(i) + ")";
  for (Byte c : tree.params().tracked_symbols) {
    const std::uint64_t total = naive_rank(text, c, n);
    for (int q = 0; q < queries; ++q) {
      const std::uint64_t i = rng() % (n + 1);
      if (tree.rank(c, i) != naive_rank(text, c, i))
        return "rank(" + std::to_string(c) + "," + std::to_string(i) + ")";
      const std::uint64_t j = 1 + rng() % (total + 1);
      if (j <= total) {
        if (tree.select(c, j) != naive_select(text, c, j))
          return "select(" + std::to_string(c) + "," + std::to_string(j) + ")";
      } else {
        try {
          tree.select(c, j);
          return "select past the last occurrence did not fail";
        } catch (const std::exception&) {
        }
      }
    }
  }
  return {};
}

}  // namespace pbt::oracle
