#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace snvt {

// 64-bit linear congruential generator with Knuth's MMIX constants:
//
//   state <- state * 6364136223846793005 + 1442695040888963407  (mod 2^64)
//
// Every draw in the project (parameter init, epoch shuffles, synthetic data,
// gradient-check subsampling) goes through this generator so runs reproduce
// bit-for-bit on any platform. Do not swap in std:: distributions; their
// output is implementation-defined.
class Lcg64 {
 public:
  explicit Lcg64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ = state_ * 6364136223846793005ULL + 1442695040888963407ULL;
    return state_;
  }

  // Uniform in [0, 1) with 53 random mantissa bits.
  double next_real() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_real(); }

  // Uniform in [0, n). Plain modulo; the tiny bias is irrelevant here and
  // the arithmetic is trivially portable.
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  // Fisher-Yates, back to front.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace snvt
