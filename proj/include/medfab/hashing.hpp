#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace medfab {

/// Lowercase hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view bytes);

std::uint64_t fnv1a64(std::string_view bytes);

/// Seed for a named random substream ("qc", "split", "judge-order", ...).
/// Pure function of its inputs, so substreams are reproducible across runs,
/// platforms and thread schedules.
std::uint64_t derive_seed(std::uint64_t base, std::string_view stream, std::string_view key = {},
                          std::uint64_t counter = 0);

}  // namespace medfab
