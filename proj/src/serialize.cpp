#include "pbt/serialize.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <iterator>
#include <ostream>
#include <string>

#include "pbt/error.hpp"

namespace pbt {

namespace {

constexpr char kMagic[4] = {'P', 'B', 'T', '1'};

class Writer {
 public:
  explicit Writer(std::vector<Byte>& out) : out_(out) {}

  template <class U>
  void put(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<Byte>(static_cast<std::uint64_t>(v) >> (8 * i)));
  }
  void bytes(const void* p, std::size_t len) {
    const auto* b = static_cast<const Byte*>(p);
    out_.insert(out_.end(), b, b + len);
  }

 private:
  std::vector<Byte>& out_;
};

class Reader {
 public:
  explicit Reader(std::span<const Byte> in) : in_(in) {}

  template <class U>
  U get() {
    need(sizeof(U));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += sizeof(U);
    return static_cast<U>(v);
  }
  std::span<const Byte> take(std::uint64_t len) {
    need(len);
    auto s = in_.subspan(pos_, static_cast<std::size_t>(len));
    pos_ += static_cast<std::size_t>(len);
    return s;
  }
  /// Guards allocations: a count of `elems` items of `size` bytes must fit.
  void need_items(std::uint64_t elems, std::uint64_t size) {
    if (elems > (in_.size() - pos_) / size) throw FormatError("truncated tree");
  }
  bool done() const noexcept { return pos_ == in_.size(); }

 private:
  void need(std::uint64_t len) {
    if (len > in_.size() - pos_) throw FormatError("truncated tree");
  }
  std::span<const Byte> in_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(const Byte* p, std::size_t len) {
  uLong crc = crc32(0L, Z_NULL, 0);
  while (len > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(len, 1u << 30));
    crc = crc32(crc, p, chunk);
    p += chunk;
    len -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::uint64_t serialized_size(const BlockTree& tree) {
  std::uint64_t size = 4 + 2 + 8 + 4 + 4 + 4 + 2;
  std::uint64_t count_entries = 0;
  for (const Level& lv : tree.levels()) {
    const std::uint64_t nb = lv.size();
    size += 8 + 8 + (nb + 7) / 8 + 12 * lv.refs.size() + 8 + 8 * lv.run_breaks().size();
    count_entries += 2 * nb + lv.refs.size();
  }
  size += 8 + tree.leaf_bytes().size();
  size += 2 + tree.rank_support().size() * (1 + 8 * count_entries);
  return size + 4;
}

std::vector<Byte> serialize(const BlockTree& tree) {
  std::vector<Byte> out;
  out.reserve(static_cast<std::size_t>(serialized_size(tree)));
  Writer w(out);
  const TreeParams& p = tree.params();
  w.bytes(kMagic, 4);
  w.put<std::uint16_t>(kFormatVersion);
  w.put<std::uint64_t>(tree.n());
  w.put<std::uint32_t>(p.s);
  w.put<std::uint32_t>(p.tau);
  w.put<std::uint32_t>(p.leaf_cutoff);
  w.put<std::uint16_t>(static_cast<std::uint16_t>(tree.levels().size()));
  for (const Level& lv : tree.levels()) {
    w.put<std::uint64_t>(lv.size());
    w.put<std::uint64_t>(lv.block_len);
    std::vector<Byte> bits((lv.size() + 7) / 8, 0);
    for (std::size_t j = 0; j < lv.size(); ++j)
      if (lv.marked[j]) bits[j / 8] |= static_cast<Byte>(1u << (j % 8));
    w.bytes(bits.data(), bits.size());
    for (const BackRef& r : lv.refs) w.put<std::uint64_t>(r.target);
    for (const BackRef& r : lv.refs) w.put<std::uint32_t>(r.offset);
    const auto breaks = lv.run_breaks();
    w.put<std::uint64_t>(breaks.size());
    for (std::uint64_t b : breaks) w.put<std::uint64_t>(b);
  }
  w.put<std::uint64_t>(tree.leaf_bytes().size());
  w.bytes(tree.leaf_bytes().data(), tree.leaf_bytes().size());
  w.put<std::uint16_t>(static_cast<std::uint16_t>(tree.rank_support().size()));
  for (const SymbolCounts& sc : tree.rank_support()) {
    w.put<std::uint8_t>(sc.symbol);
    for (std::size_t k = 0; k < tree.levels().size(); ++k) {
      for (std::uint64_t v : sc.prefix[k]) w.put<std::uint64_t>(v);
      for (std::uint64_t v : sc.internal[k]) w.put<std::uint64_t>(v);
      for (std::uint64_t v : sc.offset[k]) w.put<std::uint64_t>(v);
    }
  }
  w.put<std::uint32_t>(crc_of(out.data(), out.size()));
  return out;
}

void serialize(const BlockTree& tree, std::ostream& out) {
  const auto bytes = serialize(tree);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed to write tree");
}

BlockTree deserialize(std::span<const Byte> bytes) {
  if (bytes.size() < 4 + 2 + 4) throw FormatError("truncated tree");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("bad magic");
  const std::size_t body = bytes.size() - 4;
  Reader crc_reader(bytes.subspan(body));
  if (crc_reader.get<std::uint32_t>() != crc_of(bytes.data(), body)) throw FormatError("checksum mismatch");

  Reader r(bytes.first(body));
  r.take(4);
  if (r.get<std::uint16_t>() != kFormatVersion) throw FormatError("unsupported format version");
  const auto n = r.get<std::uint64_t>();
  TreeParams params;
  params.s = r.get<std::uint32_t>();
  params.tau = r.get<std::uint32_t>();
  params.leaf_cutoff = r.get<std::uint32_t>();
  if (n == 0 || params.s == 0 || params.tau < 2 || params.leaf_cutoff == 0) throw FormatError("bad parameters");
  const auto level_count = r.get<std::uint16_t>();
  if (level_count == 0) throw FormatError("no levels");

  std::vector<Level> levels(level_count);
  std::vector<std::vector<std::uint64_t>> breaks(level_count);
  for (Level& lv : levels) {
    const auto nb = r.get<std::uint64_t>();
    lv.block_len = r.get<std::uint64_t>();
    r.need_items(nb, 1);  // at least the bit vector must be present
    const auto bits = r.take((nb + 7) / 8);
    lv.marked.resize(static_cast<std::size_t>(nb));
    std::size_t unmarked = 0;
    for (std::size_t j = 0; j < nb; ++j) {
      lv.marked[j] = (bits[j / 8] >> (j % 8)) & 1u;
      unmarked += !lv.marked[j];
    }
    if (nb % 8 != 0 && (bits.back() >> (nb % 8)) != 0) throw FormatError("padding bits set");
    r.need_items(unmarked, 12);
    lv.refs.resize(unmarked);
    for (BackRef& ref : lv.refs) ref.target = r.get<std::uint64_t>();
    for (BackRef& ref : lv.refs) ref.offset = r.get<std::uint32_t>();
    const auto nbreaks = r.get<std::uint64_t>();
    r.need_items(nbreaks, 8);
    auto& br = breaks[&lv - levels.data()];
    br.resize(static_cast<std::size_t>(nbreaks));
    for (auto& b : br) b = r.get<std::uint64_t>();
  }
  const auto leaf_len = r.get<std::uint64_t>();
  const auto leaf = r.take(leaf_len);
  std::vector<Byte> leaf_bytes(leaf.begin(), leaf.end());

  if (levels[0].block_len != top_block_length(n, params.s, params.tau, params.leaf_cutoff))
    throw FormatError("top-level block length does not match parameters");
  for (Level& lv : levels)
    for (const BackRef& ref : lv.refs)
      if (ref.target >= lv.size()) throw FormatError("back-reference target out of range");

  BlockTree tree = BlockTree::assemble(n, params, std::move(levels), std::move(leaf_bytes));
  for (std::size_t k = 0; k < level_count; ++k)
    if (tree.levels()[k].run_breaks() != breaks[k]) throw FormatError("run breaks do not match layout");

  const auto symbols = r.get<std::uint16_t>();
  if (symbols > 256) throw FormatError("too many tracked symbols");
  std::vector<SymbolCounts> counts(symbols);
  for (SymbolCounts& sc : counts) {
    sc.symbol = r.get<std::uint8_t>();
    sc.prefix.resize(level_count);
    sc.internal.resize(level_count);
    sc.offset.resize(level_count);
    for (std::size_t k = 0; k < level_count; ++k) {
      const Level& lv = tree.levels()[k];
      auto read_array = [&](std::vector<std::uint64_t>& a, std::size_t len) {
        r.need_items(len, 8);
        a.resize(len);
        for (auto& v : a) v = r.get<std::uint64_t>();
      };
      read_array(sc.prefix[k], lv.size());
      read_array(sc.internal[k], lv.size());
      read_array(sc.offset[k], lv.refs.size());
    }
  }
  if (!r.done()) throw FormatError("trailing bytes");
  tree.attach_rank_support(std::move(counts));
  return tree;
}

void save_tree(const BlockTree& tree, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  serialize(tree, out);
}

BlockTree load_tree(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<Byte> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace pbt
