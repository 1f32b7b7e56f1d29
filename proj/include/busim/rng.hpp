// rng.hpp - seeded random streams for replications.
//
// Every stream is derived from (master seed, replication index, purpose,
// entity id), so draws never depend on event interleaving or on how many
// replications run in parallel. All samplers are built from raw mt19937_64
// words with fixed arithmetic; a given seed reproduces the same sequence on
// any standard library.
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string_view>

namespace busim {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t hash_tag(std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t replication,
                                 std::string_view purpose, std::uint64_t entity = 0) {
  std::uint64_t s = master;
  s = splitmix64(s) ^ (0x9e3779b97f4a7c15ull * (replication + 1));
  s = splitmix64(s) ^ hash_tag(purpose);
  s = splitmix64(s) ^ (0xbf58476d1ce4e5b9ull * (entity + 1));
  return splitmix64(s);
}

class RngStream {
 public:
  RngStream() : engine_(0) {}
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1).
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Box-Muller; consumes exactly two words per draw.
  double normal(double mean, double sd) {
    const double u1 = 1.0 - uniform01();  // (0, 1]
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + sd * r * std::cos(2.0 * std::numbers::pi * u2);
  }

  double exponential(double rate) { return -std::log(1.0 - uniform01()) / rate; }

  // Index into a normalized probability vector, by CDF inversion.
  int discrete(std::span<const double> probabilities) {
    const double u = uniform01();
    double acc = 0.0;
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
      acc += probabilities[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probabilities.size()) - 1;
  }

 private:
  std::mt19937_64 engine_;
};

inline RngStream make_stream(std::uint64_t master, std::uint64_t replication,
                             std::string_view purpose, std::uint64_t entity = 0) {
  return RngStream(derive_seed(master, replication, purpose, entity));
}

}  // namespace busim
