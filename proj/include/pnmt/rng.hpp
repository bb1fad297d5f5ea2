#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace pnmt {

// splitmix64; used to derive independent stream seeds from one run seed.
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t base, std::string_view tag) {
  uint64_t h = base;
  for (char c : tag) h = mix64(h ^ static_cast<uint64_t>(static_cast<unsigned char>(c)));
  return mix64(h);
}

inline uint64_t derive_seed(uint64_t base, std::string_view tag, uint64_t a) {
  return mix64(derive_seed(base, tag) ^ mix64(a));
}

inline uint64_t derive_seed(uint64_t base, std::string_view tag, uint64_t a, uint64_t b) {
  return mix64(derive_seed(base, tag, a) ^ mix64(b ^ 0x5851f42d4c957f2dULL));
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(eng_);
  }
  double normal(double mean, double stddev) {
    return std::normal_distribution<double>(mean, stddev)(eng_);
  }
  int64_t uniform_int(int64_t lo, int64_t hi) {  // inclusive bounds
    return std::uniform_int_distribution<int64_t>(lo, hi)(eng_);
  }
  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

}  // namespace pnmt
