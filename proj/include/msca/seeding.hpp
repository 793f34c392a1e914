#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace msca {

using Rng = std::mt19937_64;

/// Derives an independent seed for a named sub-stream ("dataset", "init",
/// "shuffle", "noise", ...) so that all randomness flows from one base seed.
std::uint64_t derive_seed(std::uint64_t base, std::string_view stream);

inline Rng make_rng(std::uint64_t base, std::string_view stream) {
  return Rng(derive_seed(base, stream));
}

}  // namespace msca
