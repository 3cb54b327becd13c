#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "wicklab/verification.hpp"

using namespace wicklab;

namespace {
NodeSetPtr grid(std::int64_t n) { return std::make_shared<const NodeSet>(NodeSet::equidistant(n)); }
}  // namespace

TEST_CASE("brute inner products") {
  const Factor a = Factor::path(TimePoint::exact(1, 2)), b = Factor::path(TimePoint::exact(3, 4));
  // E[(W_a <> W_b)^2] = var a var b + cov^2
  const WickMonomial m = WickMonomial::make(1.0, {{a, 1}, {b, 1}});
  CHECK(brute_inner(m, m) == doctest::Approx(0.5 * 0.75 + 0.25));
  const WickMonomial big = WickMonomial::make(1.0, {{a, 9}});
  CHECK_THROWS_AS(brute_inner(big, big), Error);
  // 2 cov(a,a) cov(a,b)
  CHECK(brute_inner(WickMonomial::make(1.0, {{a, 2}}), m) == doctest::Approx(0.5));
  CHECK(brute_inner(WickMonomial::make(1.0, {{a, 3}}), m) == 0.0);
}

TEST_CASE("counter generator") {
  CHECK(counter_uniform(1, 7) == counter_uniform(1, 7));
  CHECK(counter_uniform(1, 7) != counter_uniform(2, 7));
  double s = 0, s2 = 0;
  const int N = 200000;
  for (int i = 0; i < N; ++i) {
    const double u = counter_uniform(5, static_cast<std::uint64_t>(i));
    CHECK((u > 0.0 && u < 1.0));
    const double z = counter_normal(5, static_cast<std::uint64_t>(i));
    s += z;
    s2 += z * z;
  }
  CHECK(std::fabs(s / N) < 4 / std::sqrt(N));
  CHECK(std::fabs(s2 / N - 1) < 4 * std::sqrt(2.0 / N));
  CounterRng r(3);
  for (int i = 0; i < 1000; ++i) {
    const auto k = r.below(7);
    CHECK((k >= 0 && k < 7));
  }
}

TEST_CASE("sampling reproduces the covariance and is piecewise stable") {
  const auto s = grid(4);
  const std::vector<Factor> fs = {Factor::path(TimePoint::exact(1, 3)), Factor::interp(TimePoint::exact(1, 3), s),
                                  Factor::bridge(TimePoint::exact(1, 3), s), Factor::path(TimePoint::exact(1, 1))};
  const std::size_t N = 200000;
  const SampleBatch b = sample_factors(fs, N, 11);
  for (std::size_t i = 0; i < fs.size(); ++i)
    for (std::size_t j = 0; j < fs.size(); ++j) {
      const double emp = (b.values.col(static_cast<Eigen::Index>(i)).array() * b.values.col(static_cast<Eigen::Index>(j)).array()).mean();
      CHECK(std::fabs(emp - cov(fs[i], fs[j])) < 0.02);
    }
  const SampleBatch tail = sample_factors(fs, 10, 11, N - 10);
  CHECK(tail.values == b.values.bottomRows(10));
}

TEST_CASE("pathwise Wick monomials") {
  const Factor a = Factor::path(TimePoint::exact(1, 2));
  const SampleBatch b = sample_factors({a}, 50, 3);
  const auto v = evaluate_monomial(WickMonomial::make(2.0, {{a, 3}}), b);
  for (std::size_t i = 0; i < 50; ++i) {
    const double x = b.values(static_cast<Eigen::Index>(i), 0);
    CHECK(v[i] == doctest::Approx(2.0 * (x * x * x - 3 * 0.5 * x)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(evaluate_monomial(WickMonomial::make(1.0, {{Factor::path(TimePoint::exact(1, 3)), 1}}), b), Error);
}

TEST_CASE("oracle and moment suites") {
  const OracleSuite o = oracle_suite(80, 6, 21, 1e-10);
  CHECK(o.pairs == 80);
  CHECK(o.failures == 0);
  const MomentSuite m = moment_suite(6, 3, 100000, 21);
  CHECK(m.failures == 0);
}

TEST_CASE("projection residual is orthogonal to node functionals") {
  const auto s = grid(4);
  IntegrandSpec u;
  u.taus = {inv_pi()};
  u.terms.push_back({CoeffFn::constant(1.0), 0, {2}});
  const ProjectionReport r = projection_check(u, s, default_test_functions(*s), 200000, 9);
  CHECK(r.passed());
  CHECK(r.estimates.size() == default_test_functions(*s).size());
  const ProjectionReport again = projection_check(u, s, default_test_functions(*s), 200000, 9);
  for (std::size_t i = 0; i < r.estimates.size(); ++i) CHECK(r.estimates[i].mean == again.estimates[i].mean);

  IntegrandSpec running;
  running.terms.push_back({CoeffFn({{1.0, 1, 0.0}}), 1, {}});
  CHECK_THROWS_AS(projection_check(running, s, default_test_functions(*s), 100, 1), Error);
}

TEST_CASE("ordinary products of Wick monomials") {
  const Factor x = Factor::path(TimePoint::exact(1, 2));
  // X X = X^{<>2} + var X, so E[X^4] = 3 var^2
  const ChaosExpansion xx = ordinary_product(WickMonomial::make(1.0, {{x, 1}}), WickMonomial::make(1.0, {{x, 1}}));
  CHECK(inner(xx, xx) == doctest::Approx(0.75).epsilon(1e-15));

  // pathwise: evaluate(a * b) equals evaluate(a) evaluate(b) row by row
  CounterRng rng(13);
  for (int rep = 0; rep < 25; ++rep) {
    const auto s = grid(1 + rng.below(5));
    const WickMonomial a = random_monomial(rng, s, 1 + static_cast<int>(rng.below(4)), 3);
    const WickMonomial b = random_monomial(rng, s, 1 + static_cast<int>(rng.below(4)), 3);
    if (a.is_zero() || b.is_zero()) continue;
    std::vector<Factor> fs;
    for (const auto& [f, e] : a.factors) fs.push_back(f);
    for (const auto& [f, e] : b.factors)
      if (std::find(fs.begin(), fs.end(), f) == fs.end()) fs.push_back(f);
    const SampleBatch batch = sample_factors(fs, 200, 40 + static_cast<std::uint64_t>(rep));
    const auto va = evaluate_monomial(a, batch), vb = evaluate_monomial(b, batch);
    const auto vp = evaluate(ordinary_product(a, b), batch);
    for (std::size_t r = 0; r < va.size(); ++r)
      CHECK(vp[r] == doctest::Approx(va[r] * vb[r]).epsilon(1e-9).scale(1e-12));
    // E[a b] is the constant term
    CHECK(norm(chaos_project(ordinary_product(a, b), 0)) == doctest::Approx(std::fabs(wick_inner(a, b))).epsilon(1e-12).scale(1e-15));
  }
}
