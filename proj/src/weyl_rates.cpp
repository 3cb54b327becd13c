#include "wicklab/weyl_rates.hpp"

#include <algorithm>
#include <cmath>

namespace wicklab {

namespace {

long double frac_part(std::int64_t n, long double t) {
  const long double x = static_cast<long double>(n) * t;
  return x - std::floor(x);
}

}  // namespace

WeylSequence weyl_sequence(const TimePoint& t, std::size_t count, std::int64_t n_max) {
  if (t.is_exact()) throw Error(Errc::invalid_argument, "weyl_sequence needs an irrational time, got " + t.to_string());
  if (count < 1) throw Error(Errc::invalid_argument, "count must be positive");
  WeylSequence out;
  out.t = t;
  const long double tv = t.value();
  long double best = 1.0L;
  for (std::int64_t n = 1; n <= n_max; ++n) {
    const long double gap = std::fabs(frac_part(n, tv) - 0.5L);
    if (gap < best) {
      best = gap;
      out.indices.push_back(n);
      out.gaps.push_back(gap);
    }
  }
  if (out.indices.size() < count)
    throw Error(Errc::insufficient_range, std::to_string(out.indices.size()) + " records below n_max = " +
                                              std::to_string(n_max) + ", " + std::to_string(count) + " requested");
  return out;
}

std::vector<std::int64_t> continued_fraction_seeds(const TimePoint& t, std::int64_t n_max) {
  std::vector<std::int64_t> out;
  long double x = 2.0L * t.value();
  // convergents p_k / q_k
  std::int64_t p0 = 1, q0 = 0, p1 = 0, q1 = 1;
  for (int k = 0; k < 64; ++k) {
    const long double a = std::floor(x);
    const auto ai = static_cast<std::int64_t>(a);
    const std::int64_t p = ai * p0 + p1, q = ai * q0 + q1;
    if (q > n_max) break;
    if (q > 0 && p % 2 != 0) out.push_back(q);
    p1 = p0;
    q1 = q0;
    p0 = p;
    q0 = q;
    const long double r = x - a;
    if (r < 1e-18L) break;
    x = 1.0L / r;
  }
  return out;
}

std::vector<std::int64_t> rational_indices(const TimePoint& t, std::size_t count) {
  if (!t.is_exact()) throw Error(Errc::no_exact_tag, "rational_indices needs an exact time, got " + t.to_string());
  const std::int64_t q = t.rational()->den;
  std::vector<std::int64_t> out;
  for (std::size_t k = 1; k <= count; ++k) out.push_back(static_cast<std::int64_t>(k) * q);
  return out;
}

long double weyl_bridge_variance(const TimePoint& t, std::int64_t n) {
  const long double f = t.is_exact() ? fractional(n, t) : frac_part(n, t.value());
  return f / static_cast<long double>(n) * (1.0L - f);
}

RateFit fit_rate(std::span<const std::pair<std::int64_t, double>> points, double drop_fraction) {
  if (points.size() < 3) throw Error(Errc::degenerate_points, "fit_rate needs at least 3 points");
  if (!(drop_fraction >= 0.0 && drop_fraction < 1.0)) throw Error(Errc::invalid_argument, "drop fraction must lie in [0, 1)");
  std::vector<std::pair<std::int64_t, double>> pts(points.begin(), points.end());
  std::sort(pts.begin(), pts.end());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (!(pts[i].second > 0.0)) throw Error(Errc::degenerate_points, "error value must be positive at n = " + std::to_string(pts[i].first));
    if (pts[i].first <= 0) throw Error(Errc::degenerate_points, "index must be positive");
    if (i > 0 && pts[i].first == pts[i - 1].first) throw Error(Errc::degenerate_points, "repeated n = " + std::to_string(pts[i].first));
  }
  auto drop = static_cast<std::size_t>(std::floor(drop_fraction * static_cast<double>(pts.size())));
  drop = std::min(drop, pts.size() - 3);
  const std::span<const std::pair<std::int64_t, double>> win(pts.data() + drop, pts.size() - drop);

  const auto m = static_cast<long double>(win.size());
  long double sx = 0, sy = 0;
  for (const auto& [n, e] : win) {
    sx += std::log(static_cast<long double>(n));
    sy += std::log(static_cast<long double>(e));
  }
  const long double mx = sx / m, my = sy / m;
  long double sxx = 0, sxy = 0, syy = 0;
  for (const auto& [n, e] : win) {
    const long double dx = std::log(static_cast<long double>(n)) - mx;
    const long double dy = std::log(static_cast<long double>(e)) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  const long double slope = sxy / sxx;
  const long double intercept = my - slope * mx;
  long double ssr = 0;
  for (const auto& [n, e] : win) {
    const long double r = std::log(static_cast<long double>(e)) - (intercept + slope * std::log(static_cast<long double>(n)));
    ssr += r * r;
  }
  RateFit fit;
  fit.alpha = static_cast<double>(slope);
  fit.c = static_cast<double>(std::exp(intercept));
  fit.r2 = syy > 0 ? static_cast<double>(std::clamp(1.0L - ssr / syy, 0.0L, 1.0L)) : 1.0;
  fit.window = {win.front().first, win.back().first};
  fit.used = win.size();
  return fit;
}

}  // namespace wicklab
