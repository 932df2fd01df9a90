#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>

#include "pinncw/common.hpp"

namespace pinncw {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Independent, reproducible substreams: every consumer of randomness derives
// its own seed so that changing how often one consumer draws never shifts the
// values seen by another.
enum class Stream : uint64_t {
  ParamInit = 1,
  Collocation = 2,
  Neighbors = 3,
  Noise = 4,
  TestSet = 5,
  Boundary = 6,
  Observation = 7,
};

inline uint64_t derive_seed(uint64_t seed, Stream stream, uint64_t a = 0,
                            uint64_t b = 0) {
  uint64_t h = splitmix64(seed ^ 0xA5A5A5A5A5A5A5A5ull);
  h = splitmix64(h ^ static_cast<uint64_t>(stream));
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  return h;
}

// xoshiro256** with explicit state so it serializes to a few decimal words
// and behaves identically on every platform (std::mt19937 distributions are
// implementation-defined).
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) {
    uint64_t s = seed;
    for (auto& w : state_) {
      s = splitmix64(s);
      w = s;
    }
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // [0, 1), 53-bit mantissa
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; the spare value is cached so state stays cheap to serialize.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  std::string serialize() const {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%llu %llu %llu %llu %d %llu",
                  (unsigned long long)state_[0], (unsigned long long)state_[1],
                  (unsigned long long)state_[2], (unsigned long long)state_[3],
                  has_spare_ ? 1 : 0, (unsigned long long)bits(spare_));
    return buf;
  }

  static Rng deserialize(const std::string& text) {
    Rng r(0);
    unsigned long long s0, s1, s2, s3, sp;
    int has;
    check(std::sscanf(text.c_str(), "%llu %llu %llu %llu %d %llu", &s0, &s1,
                      &s2, &s3, &has, &sp) == 6,
          "rng: malformed serialized state");
    r.state_[0] = s0;
    r.state_[1] = s1;
    r.state_[2] = s2;
    r.state_[3] = s3;
    r.has_spare_ = has != 0;
    r.spare_ = from_bits(sp);
    return r;
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  static uint64_t bits(double d) {
    uint64_t u;
    std::memcpy(&u, &d, 8);
    return u;
  }
  static double from_bits(uint64_t u) {
    double d;
    std::memcpy(&d, &u, 8);
    return d;
  }

  uint64_t state_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace pinncw
