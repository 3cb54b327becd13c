#include <doctest.h>

#include <cmath>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "wicklab/error_engine.hpp"
#include "wicklab/skorohod_calc.hpp"
#include "wicklab/verification.hpp"

using namespace wicklab;
using boost::math::quadrature::gauss_kronrod;

namespace {

double integrate(const auto& f, double a, double b) { return gauss_kronrod<double, 31>::integrate(f, a, b, 12, 1e-14); }

double fact(int k) { return std::tgamma(k + 1.0); }

CoeffFn random_coeff(CounterRng& rng) {
  std::vector<CoeffFn::Term> t;
  const auto n = 1 + rng.below(3);
  for (std::int64_t i = 0; i < n; ++i)
    t.push_back({rng.uniform() * 2 - 1, static_cast<int>(rng.below(3)), rng.below(2) ? 0.0 : std::round(rng.uniform() * 8 - 4) / 4});
  return CoeffFn(std::move(t));
}

IntegrandSpec random_spec(CounterRng& rng) {
  IntegrandSpec u;
  const auto taus = rng.below(3);
  for (std::int64_t i = 0; i < taus; ++i) u.taus.push_back(TimePoint::approx(0.1L + 0.8L * rng.uniform() * (i + 1) / taus));
  const auto terms = 1 + rng.below(3);
  for (std::int64_t i = 0; i < terms; ++i) {
    std::vector<int> l(u.taus.size());
    for (auto& e : l) e = static_cast<int>(rng.below(3));
    u.terms.push_back({random_coeff(rng), static_cast<int>(rng.below(3)), l});
  }
  return u;
}

// Y1 - Y2 as a single integral representation
SkorohodResult difference(SkorohodResult a, const SkorohodResult& b) {
  a.boundary = a.boundary - b.boundary;
  for (const auto& t : b.time_terms) a.time_terms.push_back({t.g.scaled(-1.0), t.run_exp, t.tau_exps});
  return a;
}

}  // namespace

TEST_CASE("coefficient functions") {
  CounterRng rng(1);
  for (int rep = 0; rep < 30; ++rep) {
    const CoeffFn f = random_coeff(rng);
    const CoeffFn d = f.derivative(), F = f.antiderivative();
    for (double s : {0.1, 0.45, 0.9}) {
      const double h = 1e-5;
      const double fd = static_cast<double>((f(s + h) - f(s - h)) / (2 * h));
      CHECK(static_cast<double>(d(s)) == doctest::Approx(fd).epsilon(1e-7).scale(1));
      const double q = integrate([&](double x) { return static_cast<double>(f(x)); }, 0.0, s);
      CHECK(static_cast<double>(F(s)) == doctest::Approx(q).epsilon(1e-12).scale(1));
    }
    CHECK(F(0.0L) == doctest::Approx(0.0).scale(1));
  }
  const CoeffFn a({{2.0, 1, 0.5}});
  CHECK((a + a.scaled(-1.0)).is_zero());
  CHECK(static_cast<double>((a * a)(0.3)) == doctest::Approx(std::pow(static_cast<double>(a(0.3)), 2)));
}

TEST_CASE("skorohod integral construction") {
  // stationary: X <> W_1
  IntegrandSpec x;
  x.taus = {TimePoint::exact(1, 3)};
  x.terms.push_back({CoeffFn::constant(1.0), 0, {2}});
  const SkorohodResult y = skorohod_integral(x);
  CHECK(y.time_terms.empty());
  const ChaosExpansion expect(
      {WickMonomial::make(1.0, {{Factor::path(TimePoint::exact(1, 3)), 2}, {Factor::path(TimePoint::exact(1, 1)), 1}})});
  CHECK(norm(y.boundary - expect) == 0.0);

  IntegrandSpec one;
  one.terms.push_back({CoeffFn::constant(1.0), 0, {}});
  CHECK(norm(skorohod_integral(one).boundary - ChaosExpansion::single(Factor::path(TimePoint::exact(1, 1)))) == 0.0);
  CHECK(second_moment(skorohod_integral(one)) == doctest::Approx(1.0));

  IntegrandSpec two;
  two.terms.push_back({CoeffFn::constant(2.0), 1, {}});
  const SkorohodResult y2 = skorohod_integral(two);
  CHECK(norm(y2.boundary - ChaosExpansion::single(Factor::path(TimePoint::exact(1, 1)), 2)) == 0.0);
  CHECK(second_moment(y2) == doctest::Approx(2.0));
}

TEST_CASE("second moments") {
  // int_0^t W_s dW_s
  for (const TimePoint t : {TimePoint::exact(1, 1), TimePoint::exact(2, 5), inv_pi()}) {
    IntegrandSpec u;
    u.horizon = t;
    u.terms.push_back({CoeffFn::constant(1.0), 1, {}});
    const double tv = static_cast<double>(t.value());
    CHECK(second_moment(skorohod_integral(u)) == doctest::Approx(tv * tv / 2).epsilon(1e-13));
  }
  // e^{W_tau} <> W_1 summed in closed form: e^{2 tau}(1 + tau^2)
  const IntegrandSpec s = sko_exp(inv_pi(), 18);
  const double tau = static_cast<double>(inv_pi().value());
  const double full = std::exp(2 * tau) * (1 + tau * tau);
  const double m = second_moment(skorohod_integral(s));
  CHECK(m <= full);
  CHECK(full - m <= s.tail_bound * (1 + 1e-9) + 1e-14);
  CHECK(m == doctest::Approx(full).epsilon(1e-12));
}

TEST_CASE("isometry for adapted integrands") {
  const CoeffFn a({{1.0, 0, 0.3}, {1.0, 1, 0.3}});
  for (int l = 0; l <= 4; ++l)
    for (const TimePoint T : {TimePoint::exact(1, 1), TimePoint::exact(3, 7)}) {
      IntegrandSpec u;
      u.horizon = T;
      u.terms.push_back({a, l, {}});
      const double expect = integrate(
          [&](double s) {
            const double v = static_cast<double>(a(s));
            return v * v * fact(l) * std::pow(s, l);
          },
          0.0, static_cast<double>(T.value()));
      CHECK(second_moment(skorohod_integral(u)) == doctest::Approx(expect).epsilon(1e-10));
    }
}

TEST_CASE("partial derivatives in Wick coordinates") {
  IntegrandSpec u;
  const CoeffFn a({{1.0, 1, 0.0}, {0.5, 0, 1.0}});
  u.taus = {inv_pi()};
  u.terms.push_back({a, 3, {0}});
  const IntegrandSpec d = partial_x(u, 1);
  REQUIRE(d.terms.size() == 1);
  CHECK(d.terms[0].l1 == 2);
  CHECK(d.terms[0].coeff == a.scaled(3.0));
  CHECK(partial_x(u, 2).terms.empty());

  IntegrandSpec v;
  v.taus = {inv_pi(), TimePoint::exact(1, 2)};
  v.terms.push_back({CoeffFn::constant(1.0), 0, {2, 1}});
  const IntegrandSpec dd = partial_x(partial_x(v, 2), 2);
  REQUIRE(dd.terms.size() == 1);
  CHECK(dd.terms[0].coeff == CoeffFn::constant(2.0));
  CHECK(dd.terms[0].l == std::vector<int>{0, 1});
  CHECK_THROWS_AS(partial_x(v, 4), Error);

  // commutes with multiplication by a fixed factor W_{1/2}
  CounterRng rng(8);
  for (int rep = 0; rep < 10; ++rep) {
    IntegrandSpec w = random_spec(rng);
    w.taus.push_back(TimePoint::exact(1, 2));
    for (auto& t : w.terms) t.l.push_back(0);
    IntegrandSpec times = w;
    for (auto& t : times.terms) t.l.back() += 2;
    const IntegrandSpec lhs = partial_x(times, 1);
    IntegrandSpec rhs = partial_x(w, 1);
    for (auto& t : rhs.terms) t.l.back() += 2;
    REQUIRE(lhs.terms.size() == rhs.terms.size());
    for (std::size_t i = 0; i < lhs.terms.size(); ++i) {
      CHECK(lhs.terms[i].coeff == rhs.terms[i].coeff);
      CHECK(lhs.terms[i].l == rhs.terms[i].l);
    }
  }

  // d/dx of the |W_t| chaos truncation against a finite difference of the Hermite sum
  const TimePoint t = TimePoint::exact(1, 2);
  const IntegrandSpec ab = abs_integrand(t, 10, false);
  const IntegrandSpec dab = partial_x(ab, 2);
  const double x = 0.37, h = 1e-6, var = 0.5;
  auto value = [&](const IntegrandSpec& s, double at) {
    double v = 0;
    for (const auto& term : s.terms) v += static_cast<double>(term.coeff(0.0L)) * hermite(term.l[0], var, at);
    return v;
  };
  CHECK(value(dab, x) == doctest::Approx((value(ab, x + h) - value(ab, x - h)) / (2 * h)).epsilon(1e-7));
}

TEST_CASE("the operator L") {
  IntegrandSpec c;
  c.taus = {inv_pi()};
  c.terms.push_back({CoeffFn::constant(2.0), 1, {3}});
  CHECK(wick_L(c).empty());
  IntegrandSpec s;
  s.terms.push_back({CoeffFn({{1.0, 1, 0.0}}), 2, {}});
  const auto L = wick_L(s);
  REQUIRE(L.size() == 1);
  CHECK(L[0].g == CoeffFn::constant(1.0));
  CHECK(L[0].run_exp == 2);
}

TEST_CASE("Ito formula and integration by parts telescope") {
  CounterRng rng(17);
  for (int rep = 0; rep < 20; ++rep) {
    const IntegrandSpec v = random_spec(rng);
    // v(1) - v(0) = delta(d_x1 v) + int L v ds
    SkorohodResult lhs = skorohod_integral(partial_x(v, 1));
    for (const auto& t : wick_L(v)) lhs.time_terms.push_back({t.g.scaled(-1.0), t.run_exp, t.tau_exps});
    std::vector<WickMonomial> ends;
    for (const auto& t : v.terms) {
      for (const auto& [when, sign] : {std::pair{TimePoint::exact(1, 1), 1.0}, std::pair{TimePoint::exact(0, 1), -1.0}}) {
        std::vector<std::pair<Factor, int>> f{{Factor::path(when), t.l1}};
        for (std::size_t i = 0; i < v.taus.size(); ++i) f.emplace_back(Factor::path(v.taus[i]), t.l[i]);
        ends.push_back(WickMonomial::make(sign * static_cast<double>(t.coeff(when.value())), std::move(f)));
      }
    }
    SkorohodResult rhs;
    rhs.boundary = ChaosExpansion(std::move(ends));
    rhs.taus = v.taus;
    const double scale = second_moment(rhs) + 1.0;
    CHECK(second_moment(difference(lhs, rhs)) <= 1e-10 * scale);
  }
}

TEST_CASE("time terms at a fixed running time") {
  IntegrandSpec u;
  u.taus = {TimePoint::exact(1, 3)};
  u.terms.push_back({CoeffFn({{1.0, 2, 0.0}}), 1, {1}});
  const SkorohodResult y = skorohod_integral(u);
  REQUIRE(y.time_terms.size() == 1);
  // a = s^2, l1 = 1: g = a' / 2 = s, shape W_s^{<>2} <> W_{1/3}
  const ChaosExpansion at = time_term_at(y, 0, TimePoint::exact(1, 2));
  const ChaosExpansion expect({WickMonomial::make(
      0.5, {{Factor::path(TimePoint::exact(1, 2)), 2}, {Factor::path(TimePoint::exact(1, 3)), 1}})});
  CHECK(norm(at - expect) < 1e-15);
}
