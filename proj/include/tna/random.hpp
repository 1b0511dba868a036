#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace tna {

using Rng = std::mt19937_64;

/// Independent seed for (run seed, target index, stream) via splitmix64
/// finalization, so per-target work needs no shared generator.
std::uint64_t derive_seed(std::uint64_t seed, std::size_t t, std::uint64_t stream);

inline constexpr std::uint64_t kModelStream = 1;
inline constexpr std::uint64_t kTrainStream = 2;
inline constexpr std::uint64_t kEvalStream = 3;

}  // namespace tna
