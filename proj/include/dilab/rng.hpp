#pragma once

// Portable pseudo-random numbers.
//
// Every random draw in the library goes through Rng so that runs are
// reproducible bit-for-bit and can be matched by ports in other languages:
//
//   mix64(x)        splitmix64 finalizer:
//                     x += 0x9E3779B97F4A7C15
//                     x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9
//                     x = (x ^ (x >> 27)) * 0x94D049BB133111EB
//                     return x ^ (x >> 31)
//   derive_seed(p, tag)  = mix64(p ^ mix64(tag))
//   derive_seed(p, name) = derive_seed(p, fnv1a64(name))
//   Rng(seed)       xoshiro256** whose four state words are successive
//                   splitmix64 outputs starting from `seed`
//   uniform()       (next() >> 11) * 2^-53, in [0, 1)
//   below(n)        (next() * n) >> 64 using 128-bit multiply, in [0, n)
//   normal()        Box-Muller on u1 = 1 - uniform(), u2 = uniform();
//                   returns sqrt(-2 ln u1) * cos(2 pi u2), no spare cached

#include <cstdint>
#include <span>
#include <string_view>

namespace dilab {

std::uint64_t mix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state);

std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag);
std::uint64_t derive_seed(std::uint64_t parent, std::string_view tag);

class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  double uniform();
  std::uint64_t below(std::uint64_t n);
  double normal();

  /// Fisher-Yates, iterating i from n-1 down to 1 and swapping with below(i+1).
  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t s_[4];
};

}  // namespace dilab
