#pragma once

#include <string>

#include "isohash/isohash.hpp"

namespace isohash::testing {

inline Dataset unit_random(std::size_t q, std::size_t n, std::uint64_t seed) {
  return preprocess(gen_random_dataset(q, n, seed).points);
}

inline std::string data_file(const std::string& name) { return std::string(ISOHASH_DATA_DIR) + "/" + name; }

/// Codes with every bit drawn uniformly.
inline BinaryCodes random_codes(std::size_t q, std::size_t bits, std::uint64_t seed) {
  Rng rng(seed);
  BinaryCodes codes(q, bits);
  for (std::size_t r = 0; r < q; ++r)
    for (std::size_t m = 0; m < bits; ++m) codes.set(r, m, (rng.next() & 1U) != 0);
  return codes;
}

}  // namespace isohash::testing
