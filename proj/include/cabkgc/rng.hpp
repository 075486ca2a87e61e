#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace cabkgc {

// Seeded RNG with hand-rolled draw helpers. std::mt19937_64's output sequence
// is pinned by the standard, while the std distributions are not; drawing
// through these helpers keeps runs reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next() { return gen_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  // Uniform in [-scale, scale).
  double uniform_symmetric(double scale) {
    return (2.0 * uniform() - 1.0) * scale;
  }

  // Uniform integer in [0, n). Modulo bias is negligible for the small n used
  // here and keeps the draw a single generator call.
  std::size_t bounded(std::size_t n) {
    return static_cast<std::size_t>(gen_() % n);
  }

  // In-place Fisher-Yates shuffle.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[bounded(i)]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace cabkgc
