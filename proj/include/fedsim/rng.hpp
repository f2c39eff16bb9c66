#pragma once
// Deterministic random streams. Every stochastic component takes an
// explicit Rng so that a (config, seed) pair replays bit-identically;
// independent streams are derived from the run seed with a tag so that
// adding a consumer never shifts another stream.

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace fedsim {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller with a cached spare.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double gaussian(double sigma) { return sigma * gaussian(); }

  // Uniform index in [0, n) without modulo bias.
  std::size_t uniform_index(std::size_t n) {
    const std::uint64_t span = n;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return static_cast<std::size_t>(x % span);
  }

  // Derives a child seed from (seed, tag, k). FNV-1a over the tag mixed
  // through the splitmix64 finalizer; used to give each device/purpose its
  // own independent stream.
  static std::uint64_t derive(std::uint64_t seed, std::string_view tag,
                              std::uint64_t k = 0) {
    std::uint64_t h = 1469598103934665603ull;
    for (char c : tag) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ull;
    }
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (h ^ (k + 1));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace fedsim
