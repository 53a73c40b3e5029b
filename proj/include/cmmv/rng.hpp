#pragma once

// Counter-based random source: every draw is a pure hash of
// (seed, stream, counter), so ensembles are reproducible and independent of
// evaluation order across streams.

#include <cstdint>

#include "cmmv/math/normal.hpp"

namespace cmmv {

namespace detail {

inline uint64_t mix64(uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z;
}

}  // namespace detail

class CounterRng {
 public:
  CounterRng(uint64_t seed, uint64_t stream) : key_(setup(seed, stream)), counter_(0) {}

  uint64_t next_u64() {
    uint64_t v = detail::mix64(key_ ^ detail::mix64(counter_ * 0xc2b2ae3d27d4eb4fULL + 0x165667b19e3779f9ULL));
    ++counter_;
    return v;
  }

  // Uniform in the open interval (0,1).
  double next_u01() { return (next_u64() >> 11) * 0x1.0p-53 + 0x1.0p-54; }

  double next_normal() { return normal_quantile(next_u01()); }

  int next_sign() { return (next_u64() & 1u) ? 1 : -1; }

 private:
  static uint64_t setup(uint64_t seed, uint64_t stream) {
    uint64_t k = detail::mix64(seed + 0x9e3779b97f4a7c15ULL);
    k = detail::mix64(k ^ (stream * 0xd6e8feb86659fd93ULL + 0x2545f4914f6cdd1dULL));
    return k;
  }

  uint64_t key_;
  uint64_t counter_;
};

}  // namespace cmmv
