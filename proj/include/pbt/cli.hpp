#pragma once

#include <iosfwd>
#include <string>
#include <string_view>

#include "pbt/block_tree.hpp"
#include "pbt/error.hpp"

namespace pbt::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2, kUnsupported = 3 };

/// Malformed command line or query spec.
class UsageError : public Error {
 public:
  using Error::Error;
};

inline constexpr std::string_view kBenchFpHeader = "kernel,ell,bytes,seconds,mib_per_s,checksum";
inline constexpr std::string_view kBenchBuildHeader =
    "workers,n,seconds,mib_per_s,peak_heap_bytes,peak_heap_pct,serialized_bytes,seed_len,mutation_rate";

/// Answers `access:i`, `rank:c:i` or `select:c:j`. The symbol c is everything
/// between the first and the last ':' and must be one byte, or \xHH.
/// access prints the byte itself when printable, \xHH otherwise.
std::string answer_query(const BlockTree& tree, std::string_view spec);

/// Entry point of the `pbt` tool. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err, std::istream& in);

}  // namespace pbt::cli
