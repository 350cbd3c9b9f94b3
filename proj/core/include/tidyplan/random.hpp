#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace tidy {

/// Mixes a value into a seed (splitmix64 finalizer). Used to derive
/// independent, reproducible streams: derive_seed(seed, template, index).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t value);
std::uint64_t hash_string(std::string_view s);

template <typename... Ts>
std::uint64_t derive_seed(std::uint64_t seed, Ts... values) {
  ((seed = mix_seed(seed, static_cast<std::uint64_t>(values))), ...);
  return seed;
}

/// mt19937_64 with library-defined (not implementation-defined) mappings to
/// uniform reals and integers, so streams are identical across standard
/// libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace tidy
