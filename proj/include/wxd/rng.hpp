#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace wxd {

using Rng = std::mt19937_64;

/// Seed for a named substream of a master seed. Adding a new stream name
/// never changes the values produced by existing streams.
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream);

/// Seed for the i-th member of an indexed family (e.g. Monte Carlo paths).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

inline Rng make_rng(std::uint64_t master, std::string_view stream) {
    return Rng(derive_seed(master, stream));
}

}  // namespace wxd
