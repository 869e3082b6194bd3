#pragma once

#include <cstdint>
#include <random>

namespace misspec {

using RandomEngine = std::mt19937_64;

/// SplitMix64 finalizer; used to decorrelate derived seeds.
std::uint64_t mix64(std::uint64_t x);

/// Independent stream for one Monte Carlo replication. The seed depends only on
/// (master seed, n, alpha, replication index), never on scheduling.
RandomEngine replication_stream(std::uint64_t master_seed, std::uint64_t n, double alpha,
                                std::uint64_t rep_index);

/// Generic stream derived from a master seed and a label.
RandomEngine derived_stream(std::uint64_t master_seed, std::uint64_t label);

/// Uniform double in [0, 1) from the top 53 bits; identical across standard libraries.
inline double uniform01(RandomEngine& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace misspec
