#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "velcd/error.hpp"

namespace velcd {

// Linear interpolation between order statistics (the "type 7" rule).
inline double quantile(std::vector<double> v, double q) {
  require(!v.empty(), "quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

}  // namespace velcd
