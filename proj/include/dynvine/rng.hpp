#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace dynvine {

/// SplitMix64 finalizer. Used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Order-sensitive 64-bit hash of a list of words, seeded with `seed`.
/// Stream seeds are derived as derive_seed(master, {tag, tree, a, b, ...}).
constexpr std::uint64_t derive_seed(std::uint64_t seed,
                                    std::initializer_list<std::uint64_t> words) noexcept {
  std::uint64_t h = splitmix64(seed);
  for (std::uint64_t w : words) h = splitmix64(h ^ splitmix64(w + 0x632BE59BD9B4E019ULL));
  return h;
}

/// Seeded generator carried inside chain states. Copying the object copies the
/// full stream position, so a copied chain continues bit-identically.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  double uniform() { return unif_(engine_); }
  /// Uniform on the open interval (0, 1).
  double uniform_open() {
    double u;
    do {
      u = unif_(engine_);
    } while (u <= 0.0);
    return u;
  }
  double normal() { return norm_(engine_); }
  double normal(double mean, double sd) { return mean + sd * norm_(engine_); }
  std::uint64_t next_u64() { return engine_(); }

  std::mt19937_64& engine() { return engine_; }

  friend bool operator==(const Rng& a, const Rng& b) {
    return a.engine_ == b.engine_ && a.norm_ == b.norm_;
  }

 private:
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
  std::normal_distribution<double> norm_{0.0, 1.0};
};

}  // namespace dynvine
