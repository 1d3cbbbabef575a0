#pragma once

#include <cstdint>

namespace spii {

// Counter-free splitmix64 stream. Chosen over <random> engines because the
// standard distributions are implementation-defined; every simulation result
// in this project must be bit-reproducible across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    ++count_;
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform double in [0, 1), 53 mantissa bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Number of variates consumed so far (the "stream position").
  std::uint64_t count() const { return count_; }

  // Splittable per-point seed: hash of (base, index) so that grid points are
  // reproducible independently of evaluation order.
  static std::uint64_t derive(std::uint64_t base, std::uint64_t index) {
    std::uint64_t z = base ^ (0x9e3779b97f4a7c15ULL * (index + 0x632be59bd9b4e019ULL));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
  std::uint64_t count_ = 0;
};

}  // namespace spii
