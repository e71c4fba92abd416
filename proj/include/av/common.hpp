#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace av {

class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

inline void check(bool cond, const std::string& msg) {
  if (!cond) throw Error(msg);
}

inline constexpr double kPi = 3.14159265358979323846;

// One SplitMix64 step; advances the state.
inline uint64_t splitmix64(uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derives an independent stream seed from a base seed plus salts. Used
// everywhere a sub-component needs its own reproducible randomness.
inline uint64_t mix_seed(uint64_t base, std::initializer_list<uint64_t> salts) {
  uint64_t s = base;
  uint64_t out = splitmix64(s);
  for (uint64_t salt : salts) {
    s ^= salt + 0x9e3779b97f4a7c15ULL;
    out ^= splitmix64(s);
  }
  return out;
}

// FNV-1a, for salting seeds with names and hashing configs.
inline uint64_t hash_str(const std::string& s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Deterministic RNG with hand-rolled distributions. std::mt19937_64 output is
// portable by the standard; the library distributions are not, so we avoid them.
class Rng {
public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next() { return eng_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    double u1 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  // [0, n), n > 0
  size_t uniform_index(size_t n) {
    return static_cast<size_t>(
        (static_cast<unsigned __int128>(eng_()) * static_cast<unsigned __int128>(n)) >> 64);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = uniform_index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct indices from [0, n), returned sorted.
  std::vector<size_t> sample_without_replacement(size_t n, size_t k);

private:
  std::mt19937_64 eng_;
};

}  // namespace av
