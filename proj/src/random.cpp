#include "misspec/random.hpp"

#include <bit>

namespace misspec {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RandomEngine replication_stream(std::uint64_t master_seed, std::uint64_t n, double alpha,
                                std::uint64_t rep_index) {
  std::uint64_t h = mix64(master_seed);
  h = mix64(h ^ n);
  h = mix64(h ^ std::bit_cast<std::uint64_t>(alpha));
  h = mix64(h ^ rep_index);
  std::seed_seq seq{static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  return RandomEngine(seq);
}

RandomEngine derived_stream(std::uint64_t master_seed, std::uint64_t label) {
  const std::uint64_t h = mix64(mix64(master_seed) ^ mix64(label + 0x51ed270b27ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  return RandomEngine(seq);
}

}  // namespace misspec
