#pragma once

#include <cstdint>
#include <random>

namespace dasco {

using Rng = std::mt19937_64;

/// Independent sub-streams consumed by one agent within one round.
enum class Stream : std::uint32_t {
  kInit = 0,
  kSample = 1,
  kCompress = 2,
  kInstance = 3,
};

/// Derives the stream owned by (agent, round, purpose) from a master seed.
///
/// Every agent draws only from its own child stream, so a round produces the
/// same numbers whatever order the agents are updated in. Splitting the
/// sampling and compression purposes keeps the oracle draws identical across
/// algorithms that differ only in how they compress.
inline Rng child_rng(std::uint64_t master_seed, std::uint64_t agent, std::uint64_t round,
                     Stream purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed),
                    static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(agent),
                    static_cast<std::uint32_t>(agent >> 32),
                    static_cast<std::uint32_t>(round),
                    static_cast<std::uint32_t>(round >> 32),
                    static_cast<std::uint32_t>(purpose)};
  return Rng(seq);
}

}  // namespace dasco
