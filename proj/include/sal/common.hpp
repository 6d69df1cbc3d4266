#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace sal {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

// splitmix64 finalizer; stable bit pattern on every platform
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Named seed derivation: every consumer of randomness hashes the root seed
// with a purpose tag and an index, so adding a consumer never shifts the
// streams of existing ones.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose,
                                 std::uint64_t index = 0) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : purpose) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return mix64(seed ^ mix64(h + 0x632be59bd9b4e019ULL * index));
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::string_view purpose,
                                std::uint64_t index = 0) {
  return std::mt19937_64(derive_seed(seed, purpose, index));
}

}  // namespace sal
