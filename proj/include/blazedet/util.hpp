#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace blazedet {

// Median of an unsorted sample; even-sized samples average the two middle values.
inline double median_of(std::vector<double> values) {
  if (values.empty()) {
    throw std::invalid_argument("median_of: empty sample");
  }
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) {
    return values[n / 2];
  }
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

// Uniform draw in (0, 1) built from the raw 32-bit engine output, so sequences
// are identical across standard library implementations for a given seed.
inline double unit_uniform(std::mt19937& rng) {
  return (static_cast<double>(rng()) + 0.5) * (1.0 / 4294967296.0);
}

inline float uniform_in(std::mt19937& rng, float lo, float hi) {
  return lo + static_cast<float>(unit_uniform(rng) * (static_cast<double>(hi) - lo));
}

}  // namespace blazedet
