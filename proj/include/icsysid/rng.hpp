#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace icsysid {

// splitmix64 mixer. Substream seeds are derived by folding a stream tag and
// a path of ids (worker, rollout, round, ...) onto a root seed, so every
// logical stream is independent and scheduling order cannot change draws.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

enum class Stream : std::uint64_t {
  rollout = 1,       // per (worker, rollout) data generation
  split = 2,         // per worker train/cc shuffle
  cluster_init = 3,  // coordinator-side parameter draws
  minibatch = 4,     // per (worker, round) shuffles
  warm = 5,          // warm-start perturbations
};

using RngEngine = std::mt19937_64;

inline std::uint64_t derive_seed(std::uint64_t root, Stream tag,
                                 std::initializer_list<std::uint64_t> path = {}) {
  std::uint64_t h = splitmix64(root ^ 0x6a09e667f3bcc908ull);
  h = splitmix64(h ^ static_cast<std::uint64_t>(tag));
  for (std::uint64_t p : path) h = splitmix64(h ^ p);
  return h;
}

inline RngEngine make_engine(std::uint64_t root, Stream tag,
                             std::initializer_list<std::uint64_t> path = {}) {
  return RngEngine(derive_seed(root, tag, path));
}

}  // namespace icsysid
