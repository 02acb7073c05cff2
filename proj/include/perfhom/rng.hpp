// Copyright (c) the perfhom contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "perfhom/types.hpp"

namespace perfhom {

// Seeded generator with hand-rolled transforms so identical seeds give
// identical bits independent of the standard library's distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform() {  // [0, 1)
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double normal() {
    const double u1 = uniform(), u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log1p(-u1));
    return r * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  Complex cnormal() {
    const double u1 = uniform(), u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log1p(-u1));
    const double th = 2.0 * 3.14159265358979323846 * u2;
    return Complex(r * std::cos(th), r * std::sin(th));
  }

  std::uint64_t raw() { return gen_(); }

  // Derived stream for a sweep row; keeps rows independent of scheduling.
  static std::uint64_t substream(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace perfhom
