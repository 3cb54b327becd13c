#pragma once

// Index sequences along which the interpolation error at a fixed time is
// worst (fractional parts near 1/2), exact-simulation index families for
// rational times, and log-log rate fits.

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "wicklab/gauss_kernel.hpp"

namespace wicklab {

struct WeylSequence {
  TimePoint t;
  std::vector<std::int64_t> indices;
  std::vector<long double> gaps;  // |{n t} - 1/2|
};

/// Record scan over 1 <= n <= n_max keeping strict improvements of the gap.
/// Every record found is returned; InsufficientRange when fewer than `count`.
WeylSequence weyl_sequence(const TimePoint& t, std::size_t count, std::int64_t n_max);

/// Denominators q <= n_max of continued-fraction convergents p/q of 2t with p
/// odd, so that {q t} is close to 1/2.
std::vector<std::int64_t> continued_fraction_seeds(const TimePoint& t, std::int64_t n_max);

/// q, 2q, ..., count*q for t = p/q in lowest terms.
std::vector<std::int64_t> rational_indices(const TimePoint& t, std::size_t count);

/// ({n t}/n)(1 - {n t}), the bridge variance at t on the equidistant grid.
long double weyl_bridge_variance(const TimePoint& t, std::int64_t n);

struct RateFit {
  double alpha = 0.0;
  double c = 0.0;
  double r2 = 0.0;
  std::pair<std::int64_t, std::int64_t> window{0, 0};  // smallest and largest n used
  std::size_t used = 0;
};

inline constexpr double kDefaultDropFraction = 0.2;

/// Least squares of log e on log n after dropping the smallest
/// floor(drop_fraction * size) indices.
RateFit fit_rate(std::span<const std::pair<std::int64_t, double>> points, double drop_fraction = kDefaultDropFraction);

}  // namespace wicklab
