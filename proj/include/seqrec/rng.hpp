#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace seqrec {

using Rng = std::mt19937_64;

/// Counter-based seed derivation: every (root, purpose, a, b) tuple maps to an
/// independent stream, so the draws of one component never depend on how many
/// draws another component made.
std::uint64_t derive_seed(std::uint64_t root, std::string_view purpose, std::uint64_t a = 0,
                          std::uint64_t b = 0);

inline Rng make_rng(std::uint64_t root, std::string_view purpose, std::uint64_t a = 0,
                    std::uint64_t b = 0) {
  return Rng(derive_seed(root, purpose, a, b));
}

}  // namespace seqrec
