#include <doctest.h>

#include <cmath>
#include <numbers>

#include "wicklab/error_engine.hpp"
#include "wicklab/weyl_rates.hpp"

using namespace wicklab;

TEST_CASE("records of the gap") {
  const WeylSequence w = weyl_sequence(inv_pi(), 10, 100000);
  REQUIRE(w.indices.size() >= 10);
  CHECK(w.indices.size() == w.gaps.size());
  CHECK(w.indices.back() == 52174);
  // brute scan: every record is a strict improvement, and nothing between records beats it
  long double best = 1.0L;
  std::size_t next = 0;
  for (std::int64_t n = 1; n <= 100000; ++n) {
    const long double g = std::fabs(fractional(n, inv_pi()) - 0.5L);
    if (g < best) {
      best = g;
      REQUIRE(next < w.indices.size());
      CHECK(w.indices[next] == n);
      CHECK(w.gaps[next] == g);
      ++next;
    }
  }
  CHECK(next == w.indices.size());
  CHECK_THROWS_AS(weyl_sequence(inv_pi(), 1000, 1000), Error);
  CHECK_THROWS_AS(weyl_sequence(TimePoint::exact(1, 3), 1, 100), Error);
}

TEST_CASE("bridge variance along records approaches 1/(4n)") {
  // {nt}(1 - {nt}) = 1/4 - gap^2
  const WeylSequence w = weyl_sequence(inv_pi(), 1, 100000);
  for (std::size_t k = 0; k < w.indices.size(); ++k) {
    const long double g = w.gaps[k];
    CHECK(std::fabs(4.0L * w.indices[k] * weyl_bridge_variance(inv_pi(), w.indices[k]) - (1.0L - 4.0L * g * g)) < 1e-15L);
  }
  CHECK(weyl_bridge_variance(TimePoint::exact(1, 3), 6) == 0.0L);
  CHECK(static_cast<double>(weyl_bridge_variance(TimePoint::exact(1, 4), 2)) == doctest::Approx(0.125));
}

TEST_CASE("continued fraction seeds are near-half indices") {
  const auto seeds = continued_fraction_seeds(inv_pi(), 1000000);
  REQUIRE(!seeds.empty());
  for (std::int64_t q : seeds) CHECK(std::fabs(fractional(q, inv_pi()) - 0.5L) * q < 1.0L);
  const auto w = weyl_sequence(inv_pi(), 1, 1000000).indices;
  CHECK(std::find(w.begin(), w.end(), seeds.back()) != w.end());
}

TEST_CASE("rational indices") {
  const auto r = rational_indices(TimePoint::exact(2, 6), 4);
  CHECK(r == std::vector<std::int64_t>{3, 6, 9, 12});
  CHECK_THROWS_AS(rational_indices(inv_pi(), 3), Error);
}

TEST_CASE("rate fit") {
  std::vector<std::pair<std::int64_t, double>> pts;
  for (std::int64_t n = 10; n <= 100000; n *= 3) pts.push_back({n, 2.5 * std::pow(static_cast<double>(n), -0.75)});
  const RateFit f = fit_rate(pts, 0.0);
  CHECK(std::fabs(f.alpha + 0.75) < 1e-12);
  CHECK(std::fabs(f.c - 2.5) < 1e-12);
  CHECK(f.r2 == doctest::Approx(1.0));
  CHECK(f.used == pts.size());
  CHECK(f.window.first == 10);

  const RateFit d = fit_rate(pts);
  CHECK(d.used == pts.size() - static_cast<std::size_t>(kDefaultDropFraction * pts.size()));
  CHECK(std::fabs(d.alpha + 0.75) < 1e-12);

  // shuffled order does not matter
  std::vector<std::pair<std::int64_t, double>> rev(pts.rbegin(), pts.rend());
  CHECK(fit_rate(rev, 0.0).alpha == f.alpha);

  std::vector<std::pair<std::int64_t, double>> bad = pts;
  bad[2].second = 0.0;
  CHECK_THROWS_AS(fit_rate(bad), Error);
  std::vector<std::pair<std::int64_t, double>> two(pts.begin(), pts.begin() + 2);
  CHECK_THROWS_AS(fit_rate(two), Error);
  std::vector<std::pair<std::int64_t, double>> dup = pts;
  dup.push_back(pts[0]);
  CHECK_THROWS_AS(fit_rate(dup), Error);
}

TEST_CASE("rescaling the error does not move the exponent") {
  std::vector<std::pair<std::int64_t, double>> a, b;
  for (std::int64_t n : weyl_sequence(inv_pi(), 1, 3000).indices) {
    const double e = abs_mse_full(inv_pi(), std::make_shared<const NodeSet>(NodeSet::equidistant(n))).e;
    a.push_back({n, e});
    b.push_back({n, 7.0 * e});
  }
  const RateFit fa = fit_rate(a), fb = fit_rate(b);
  CHECK(fa.alpha == doctest::Approx(fb.alpha).epsilon(1e-12));
  CHECK(fb.c == doctest::Approx(7.0 * fa.c).epsilon(1e-12));
}
