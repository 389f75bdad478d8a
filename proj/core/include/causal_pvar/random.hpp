#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>

namespace causal_pvar {

using Rng = std::mt19937_64;

/// Seed for an independent stream derived from a master seed and a stream
/// index (replication number, scenario id, ...). SplitMix64 finalizer.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

inline Rng make_rng(std::uint64_t master, std::uint64_t stream) {
  return Rng(derive_seed(master, stream));
}

/// Runs body(index) for index in [0, count) on up to `threads` workers.
/// Each index is handled exactly once; callers write results into
/// per-index slots so the outcome never depends on scheduling.
void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& body);

}  // namespace causal_pvar
