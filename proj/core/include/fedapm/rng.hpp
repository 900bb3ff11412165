#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace fedapm {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t stream_seed(std::uint64_t global_seed, std::uint64_t stream_id) {
  return mix_seed(mix_seed(global_seed) ^ mix_seed(stream_id + 0x51ed270b27a1f3c5ULL));
}

// Stream ids reserved for non-client consumers.
inline constexpr std::uint64_t kSelectionStream = 0xffff'0001ULL;
inline constexpr std::uint64_t kDataStream = 0xffff'0002ULL;
inline constexpr std::uint64_t kPartitionStream = 0xffff'0003ULL;
inline constexpr std::uint64_t kInitStream = 0xffff'0004ULL;

inline Rng make_stream(std::uint64_t global_seed, std::uint64_t stream_id) {
  return Rng(stream_seed(global_seed, stream_id));
}

// Uniform integer in [0, n) with a fixed algorithm, so streams replay identically
// regardless of the standard library's distribution implementation.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t r;
  do {
    r = rng();
  } while (r >= limit);
  return static_cast<std::size_t>(r % n);
}

inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

template <typename T>
void shuffle_in_place(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::swap(items[i - 1], items[uniform_index(rng, i)]);
  }
}

}  // namespace fedapm
