#pragma once

#include <cstddef>

/// Heap accounting through replaced global operator new/delete. Only
/// binaries that link the pbt_alloc library are instrumented.
namespace pbt::alloc {

std::size_t current_bytes() noexcept;
std::size_t peak_bytes() noexcept;
/// Restarts the high-water mark at the current usage.
void reset_peak() noexcept;

}  // namespace pbt::alloc
