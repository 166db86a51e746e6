#ifndef N2CE_RNG_HPP
#define N2CE_RNG_HPP

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

#include "n2ce/common.hpp"

namespace n2ce {

using Rng = std::mt19937_64;

/// Builds an independent stream from a base seed and any number of indices
/// (entry, run, stage, ...). Same inputs always give the same stream.
inline Rng derive_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> indices = {}) {
  std::vector<std::uint32_t> words;
  words.reserve(2 + 2 * indices.size());
  auto push = [&](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  for (auto i : indices) push(i);
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

/// rows x cols matrix of N(0,1) draws, filled row by row.
inline Matrix standard_normal(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) out(i, j) = normal(rng);
  return out;
}

inline double uniform(double lo, double hi, Rng& rng) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace n2ce

#endif  // N2CE_RNG_HPP
