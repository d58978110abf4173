#include "pbt/text.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <numeric>
#include <random>
#include <string>

#include "pbt/error.hpp"

namespace pbt {

Text::Text(std::vector<Byte> bytes) : bytes_(std::move(bytes)) {
  if (bytes_.empty()) throw InvalidArgument("empty input");
  for (Byte b : bytes_) ++histogram_[b];
  sigma_ = static_cast<unsigned>(
      std::count_if(histogram_.begin(), histogram_.end(), [](auto c) { return c != 0; }));
}

Text Text::from_string(std::string_view s) { return Text(std::vector<Byte>(s.begin(), s.end())); }

std::vector<Byte> Text::alphabet() const {
  std::vector<Byte> out;
  for (unsigned c = 0; c < 256; ++c)
    if (histogram_[c] != 0) out.push_back(static_cast<Byte>(c));
  return out;
}

Text load_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<Byte> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failure on " + path.string());
  if (bytes.empty()) throw InvalidArgument("empty input: " + path.string());
  return Text(std::move(bytes));
}

Byte naive_access(const Text& text, std::uint64_t i) {
  if (i == 0 || i > text.size()) throw BoundsError("access position out of range");
  return text[i - 1];
}

std::uint64_t naive_rank(const Text& text, Byte c, std::uint64_t i) {
  if (i > text.size()) throw BoundsError("rank position out of range");
  auto b = text.bytes();
  return static_cast<std::uint64_t>(std::count(b.begin(), b.begin() + static_cast<std::ptrdiff_t>(i), c));
}

std::uint64_t naive_select(const Text& text, Byte c, std::uint64_t j) {
  if (j == 0) throw BoundsError("select occurrence index must be >= 1");
  std::uint64_t seen = 0;
  for (std::size_t p = 0; p < text.size(); ++p) {
    if (text[p] == c && ++seen == j) return p + 1;
  }
  throw NotFoundError("fewer than j occurrences");
}

namespace {

std::vector<std::uint32_t> suffix_array(std::span<const Byte> t) {
  const std::size_t n = t.size();
  std::vector<std::uint32_t> sa(n), rank(n), tmp(n);
  std::iota(sa.begin(), sa.end(), 0u);
  for (std::size_t i = 0; i < n; ++i) rank[i] = t[i];
  for (std::size_t k = 1;; k <<= 1) {
    auto key = [&](std::uint32_t i) {
      std::int64_t second = i + k < n ? static_cast<std::int64_t>(rank[i + k]) : -1;
      return std::pair<std::int64_t, std::int64_t>(rank[i], second);
    };
    std::sort(sa.begin(), sa.end(), [&](std::uint32_t a, std::uint32_t b) { return key(a) < key(b); });
    tmp[sa[0]] = 0;
    for (std::size_t i = 1; i < n; ++i) tmp[sa[i]] = tmp[sa[i - 1]] + (key(sa[i - 1]) < key(sa[i]) ? 1 : 0);
    rank.swap(tmp);
    if (rank[sa[n - 1]] == n - 1) break;
  }
  return sa;
}

class SparseMin {
 public:
  explicit SparseMin(std::vector<std::uint32_t> base) {
    table_.push_back(std::move(base));
    const std::size_t n = table_[0].size();
    for (std::size_t w = 1; (std::size_t{1} << w) <= n; ++w) {
      const auto& prev = table_.back();
      std::vector<std::uint32_t> cur(n - (std::size_t{1} << w) + 1);
      for (std::size_t i = 0; i < cur.size(); ++i)
        cur[i] = std::min(prev[i], prev[i + (std::size_t{1} << (w - 1))]);
      table_.push_back(std::move(cur));
    }
  }
  // min over [a, b], a <= b
  std::uint32_t query(std::size_t a, std::size_t b) const {
    const unsigned w = std::bit_width(b - a + 1) - 1;
    return std::min(table_[w][a], table_[w][b + 1 - (std::size_t{1} << w)]);
  }

 private:
  std::vector<std::vector<std::uint32_t>> table_;
};

}  // namespace

Lz77Factorization lz77_factorize(const Text& text) {
  auto t = text.bytes();
  const std::size_t n = t.size();
  Lz77Factorization out;
  if (n == 1) {
    out.factors.push_back({0, 1, t[0], true});
    return out;
  }
  auto sa = suffix_array(t);
  std::vector<std::uint32_t> isa(n), lcp(n, 0);
  for (std::size_t k = 0; k < n; ++k) isa[sa[k]] = static_cast<std::uint32_t>(k);
  // Kasai: lcp[k] = LCP(sa[k-1], sa[k])
  for (std::size_t i = 0, h = 0; i < n; ++i) {
    if (isa[i] == 0) {
      h = 0;
      continue;
    }
    std::size_t j = sa[isa[i] - 1];
    while (i + h < n && j + h < n && t[i + h] == t[j + h]) ++h;
    lcp[isa[i]] = static_cast<std::uint32_t>(h);
    if (h > 0) --h;
  }
  // nearest ranks to the left/right whose suffix starts earlier in the text
  constexpr std::uint32_t kNone = ~0u;
  std::vector<std::uint32_t> psv(n, kNone), nsv(n, kNone), stack;
  for (std::size_t k = 0; k < n; ++k) {
    while (!stack.empty() && sa[stack.back()] > sa[k]) {
      nsv[stack.back()] = static_cast<std::uint32_t>(k);
      stack.pop_back();
    }
    if (!stack.empty()) psv[k] = stack.back();
    stack.push_back(static_cast<std::uint32_t>(k));
  }
  SparseMin lcp_min(lcp);
  SparseMin pos_min(sa);

  std::size_t i = 0;
  while (i < n) {
    const std::size_t k = isa[i];
    std::size_t len = 0;
    if (psv[k] != kNone) len = std::max<std::size_t>(len, lcp_min.query(psv[k] + 1, k));
    if (nsv[k] != kNone) len = std::max<std::size_t>(len, lcp_min.query(k + 1, nsv[k]));
    if (len == 0) {
      out.factors.push_back({i, 1, t[i], true});
      i += 1;
      continue;
    }
    // widen [lo, hi] to every suffix sharing `len` characters with suffix i
    std::size_t lo = k, hi = k;
    {
      std::size_t a = 0, b = k;  // smallest lo with min(lcp[lo+1..k]) >= len
      while (a < b) {
        std::size_t m = (a + b) / 2;
        if (lcp_min.query(m + 1, k) >= len) b = m; else a = m + 1;
      }
      lo = a;
      a = k, b = n - 1;  // largest hi with min(lcp[k+1..hi]) >= len
      while (a < b) {
        std::size_t m = (a + b + 1) / 2;
        if (lcp_min.query(k + 1, m) >= len) a = m; else b = m - 1;
      }
      hi = a;
    }
    const std::size_t src = pos_min.query(lo, hi);
    out.factors.push_back({i, len, src, false});
    i += len;
  }
  return out;
}

Lz77Factorization lz77_factorize_naive(const Text& text) {
  auto t = text.bytes();
  const std::size_t n = t.size();
  Lz77Factorization out;
  std::size_t i = 0;
  while (i < n) {
    std::size_t best_len = 0, best_src = 0;
    for (std::size_t j = 0; j < i; ++j) {
      std::size_t l = 0;
      while (i + l < n && t[j + l] == t[i + l]) ++l;
      if (l > best_len) {
        best_len = l;
        best_src = j;
      }
    }
    if (best_len == 0) {
      out.factors.push_back({i, 1, t[i], true});
      ++i;
    } else {
      out.factors.push_back({i, best_len, best_src, false});
      i += best_len;
    }
  }
  return out;
}

std::vector<Byte> lz77_expand(const Lz77Factorization& f) {
  std::vector<Byte> out;
  for (const auto& factor : f.factors) {
    if (factor.literal) {
      // literal factors carry their byte in `source`
      out.push_back(static_cast<Byte>(factor.source));
      continue;
    }
    if (factor.source >= out.size()) throw InternalError("lz77 source beyond parsed prefix");
    for (std::uint64_t k = 0; k < factor.length; ++k) out.push_back(out[factor.source + k]);
  }
  return out;
}

std::vector<Byte> make_repetitive_corpus(const RepetitiveCorpusSpec& spec) {
  static constexpr std::string_view kPrintable =
      " !\"#$%&'()*+,-./0123456789:;<=>?@ABCDEFGHIJKLMNOPQRSTUVWXYZ[\\]^_`abcdefghijklmnopqrstuvwxyz{|}~";
  const std::string_view alphabet = spec.alphabet.empty() ? kPrintable : spec.alphabet;
  if (spec.seed_len == 0 || spec.n == 0) throw InvalidArgument("corpus sizes must be positive");
  std::mt19937_64 rng(spec.rng_seed);
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);

  std::vector<Byte> seed(spec.seed_len);
  for (auto& b : seed) b = static_cast<Byte>(alphabet[pick(rng)]);

  std::vector<Byte> out;
  out.reserve(spec.n);
  while (out.size() < spec.n) {
    const std::size_t take = std::min(spec.seed_len, spec.n - out.size());
    const std::size_t base = out.size();
    out.insert(out.end(), seed.begin(), seed.begin() + static_cast<std::ptrdiff_t>(take));
    if (spec.mutation_rate <= 0.0 || base == 0) continue;  // first copy stays pristine
    std::geometric_distribution<std::size_t> gap(std::min(spec.mutation_rate, 1.0));
    for (std::size_t p = gap(rng); p < take; p += 1 + gap(rng)) out[base + p] = static_cast<Byte>(alphabet[pick(rng)]);
  }
  return out;
}

}  // namespace pbt
