#pragma once
// Counter-based uniform draws: the draw for (face, time) is a pure function
// of (seed, i, j, k), so coupled runs and parallel sweeps see the same value.

#include <cstdint>

namespace domino {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class Tickets {
 public:
  explicit Tickets(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t bits(int i, int j, long long k) const {
    std::uint64_t h = splitmix64(seed_);
    h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<std::uint32_t>(i)));
    h = splitmix64(h ^ (static_cast<std::uint64_t>(static_cast<std::uint32_t>(j)) << 1));
    h = splitmix64(h ^ (static_cast<std::uint64_t>(k) * 0xd1b54a32d192ed03ULL));
    return h;
  }

  /// Uniform in [0, 1) with 53 random bits.
  double draw(int i, int j, long long k) const {
    return static_cast<double>(bits(i, j, k) >> 11) * 0x1.0p-53;
  }

  /// Independent child stream, e.g. one per Monte Carlo run.
  Tickets child(std::uint64_t index) const { return Tickets(splitmix64(seed_ ^ splitmix64(index + 0x51ed27ULL))); }

 private:
  std::uint64_t seed_;
};

}  // namespace domino
