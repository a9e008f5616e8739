#pragma once

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

#include "raggen/text.hpp"

namespace raggen {

// splitmix64; used to derive well-mixed sub-seeds from (seed, key) pairs so
// per-example decisions stay stable regardless of processing order.
inline uint64_t mix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t seed, std::string_view key) {
  return mix64(seed ^ text::fnv1a64(key));
}

// xorshift-based generator with hand-rolled bounded draws; avoids
// std::uniform_int_distribution, whose output is implementation-defined.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(mix64(seed ^ 0xD6E8FEB86659FD93ULL)) {}

  uint64_t next() {
    state_ = mix64(state_);
    return state_;
  }

  // Uniform in [0, n); n must be > 0. Modulo bias is negligible for the
  // small ranges used here.
  size_t bounded(size_t n) { return static_cast<size_t>(next() % n); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = bounded(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  // Draws k distinct indices from [0, n) via a partial Fisher-Yates pass.
  std::vector<size_t> sample_without_replacement(size_t n, size_t k);

 private:
  uint64_t state_;
};

inline std::vector<size_t> Rng::sample_without_replacement(size_t n, size_t k) {
  std::vector<size_t> pool(n);
  for (size_t i = 0; i < n; ++i) pool[i] = i;
  if (k > n) k = n;
  std::vector<size_t> out;
  out.reserve(k);
  for (size_t i = 0; i < k; ++i) {
    size_t j = i + bounded(n - i);
    std::swap(pool[i], pool[j]);
    out.push_back(pool[i]);
  }
  return out;
}

}  // namespace raggen
