#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace mrta {

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a(std::string_view s);

// Independent seed for a named sub-stream of a master seed. All randomness in
// the project flows through these, so components stay reproducible in
// isolation.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream);
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream,
                          std::uint64_t index);

// mt19937_64 with hand-rolled sampling. std::*_distribution output is
// implementation-defined; these algorithms are pinned so identical seeds give
// identical streams on any standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // [0, 1), 53-bit mantissa
  double uniform();
  // [lo, hi)
  double uniform(double lo, double hi);
  // inclusive on both ends, rejection-free of modulo bias
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  // standard normal, Box-Muller
  double normal();

  std::uint64_t next() { return gen_(); }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace mrta
