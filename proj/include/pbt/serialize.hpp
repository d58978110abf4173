#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "pbt/block_tree.hpp"

namespace pbt {

/// Canonical little-endian encoding of a tree, terminated by a CRC32 of all
/// preceding bytes. Identical trees encode to identical bytes.
std::vector<Byte> serialize(const BlockTree& tree);
void serialize(const BlockTree& tree, std::ostream& out);
std::uint64_t serialized_size(const BlockTree& tree);

/// Throws FormatError on bad magic/version, truncation, checksum mismatch
/// or any structural violation.
BlockTree deserialize(std::span<const Byte> bytes);

void save_tree(const BlockTree& tree, const std::filesystem::path& path);
BlockTree load_tree(const std::filesystem::path& path);

inline constexpr std::uint16_t kFormatVersion = 1;

}  // namespace pbt
