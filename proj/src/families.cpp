#include <cmath>
#include <limits>
#include <numbers>

#include "pairing.hpp"
#include "wicklab/error_engine.hpp"

namespace wicklab {

namespace {

constexpr long double kPi = std::numbers::pi_v<long double>;

// (2m)!/((2m)!!)^2 / (2m-1)^2, the squared |W_t| chaos weight without 2t/pi.
struct AbsWeights {
  long double ratio = 1.0L;  // prod_{j<=m} (2j-1)/(2j)
  int m = 0;
  long double next() {
    ++m;
    ratio *= static_cast<long double>(2 * m - 1) / static_cast<long double>(2 * m);
    const long double d = 2.0L * m - 1.0L;
    return ratio / (d * d);
  }
};

TimePoint fractional_time(std::int64_t k, const TimePoint& T) {
  if (T.is_exact()) {
    const Rational& r = *T.rational();
    return TimePoint::exact(static_cast<std::int64_t>((static_cast<__int128>(k) * r.num) % r.den), r.den);
  }
  return TimePoint::approx(fractional(k, T));
}

}  // namespace

IntegrandSpec ito_exp(const TimePoint& horizon, int M) {
  if (M < 0) throw Error(Errc::invalid_argument, "truncation must be nonnegative");
  IntegrandSpec u;
  u.horizon = horizon;
  u.label = "ito-exp";
  // e^{W_t} = e^{t/2} sum_k W_t^{<>k} / k!
  for (int k = 0; k <= M; ++k)
    u.terms.push_back({CoeffFn({{static_cast<double>(1.0L / detail::factorial(k)), 0, 0.5}}), k, {}});
  // E[(int_0^T a_k W^{<>k} dW)^2] = int_0^T e^s s^k / k! ds <= T e^T T^k / k!
  const long double T = horizon.value();
  long double term = 1.0L, tail = 0.0L;
  for (int k = 1; k <= M + 400; ++k) {
    term *= T / k;
    if (k > M) tail += term;
  }
  u.tail_bound = static_cast<double>(T * std::exp(T) * tail);
  return u;
}

IntegrandSpec sko_exp(const TimePoint& tau, int M) {
  if (M < 0) throw Error(Errc::invalid_argument, "truncation must be nonnegative");
  IntegrandSpec u;
  u.taus = {tau};
  u.label = "sko-exp";
  const long double t = tau.value();
  for (int k = 0; k <= M; ++k)
    u.terms.push_back({CoeffFn::constant(static_cast<double>(std::exp(t / 2) / detail::factorial(k))), 0, {k}});
  // E[(a_k W_1 <> W_tau^{<>k})^2] = e^tau tau^k (1 + k tau) / k!
  long double pw = 1.0L, tail = 0.0L;
  for (int k = 1; k <= M + 400; ++k) {
    pw *= t / k;
    if (k > M) tail += std::exp(t) * pw * (1.0L + k * t);
  }
  u.tail_bound = static_cast<double>(tail);
  return u;
}

ChaosExpansion abs_chaos(const TimePoint& t, int M) {
  if (M < 0) throw Error(Errc::invalid_argument, "truncation must be nonnegative");
  const long double tv = t.value();
  if (tv <= 0.0L) throw Error(Errc::invalid_argument, "abs_chaos needs t > 0");
  const long double scale = std::sqrt(2.0L * tv / kPi);
  const Factor w = Factor::path(t);
  std::vector<WickMonomial> terms;
  long double c = 1.0L;  // (-1)^{m+1} t^{-m} / ((2m-1) (2m)!!) without the 1/(2m-1)
  for (int m = 0; m <= M; ++m) {
    if (m > 0) c *= -1.0L / (tv * 2.0L * m);
    const long double coeff = scale * (-c) / (2.0L * m - 1.0L);
    terms.push_back(WickMonomial::make(static_cast<double>(coeff), {{w, 2 * m}}));
  }
  // ||tail||^2 = (2t/pi) sum_{m>M} b_m, b_m <= m^{-5/2} / (sqrt(pi) (2 - 1/m)^2)
  AbsWeights bw;
  long double tail = 0.0L;
  const int m2 = M + (1 << 16);
  for (int m = 1; m <= m2; ++m) {
    const long double b = bw.next();
    if (m > M) tail += b;
  }
  const long double k = 2.0L - 1.0L / m2;
  tail += (2.0L / 3.0L) * std::pow(static_cast<long double>(m2), -1.5L) / (std::sqrt(kPi) * k * k);
  return ChaosExpansion(std::move(terms), static_cast<double>(2.0L * tv / kPi * tail));
}

IntegrandSpec abs_integrand(const TimePoint& t, int M, bool linear_weight) {
  const ChaosExpansion x = abs_chaos(t, M);
  IntegrandSpec u;
  u.taus = {t};
  u.label = linear_weight ? "abs-linear" : "abs";
  for (const auto& m : x.terms()) {
    const int deg = m.degree();
    const CoeffFn a = linear_weight ? CoeffFn({{m.coeff, 1, 0.0}}) : CoeffFn::constant(m.coeff);
    u.terms.push_back({a, 0, {deg}});
  }
  // Y = Z <> X with Z = int w dW: E[(Z <> W_t^{<>2m})^2] = (2m)! t^{2m} (V + 2m C^2 / t),
  // V = int_0^1 w^2, C = int_0^t w.
  const long double tv = t.value();
  const long double V = linear_weight ? 1.0L / 3.0L : 1.0L;
  const long double C = linear_weight ? tv * tv / 2.0L : tv;
  AbsWeights bw;
  long double tail = 0.0L;
  const int m2 = M + (1 << 16);
  for (int m = 1; m <= m2; ++m) {
    const long double b = bw.next();
    if (m > M) tail += b * (V + 2.0L * m * C * C / tv);
  }
  const long double k = 2.0L - 1.0L / m2;
  const long double rem = (V * (2.0L / 3.0L) * std::pow(static_cast<long double>(m2), -1.5L) +
                           (2.0L * C * C / tv) * 2.0L * std::pow(static_cast<long double>(m2), -0.5L)) /
                          (std::sqrt(kPi) * k * k);
  u.tail_bound = static_cast<double>(2.0L * tv / kPi * (tail + rem));
  return u;
}

IntegrandSpec xt_process(const TimePoint& T, int K) {
  if (K < 0) throw Error(Errc::invalid_argument, "truncation must be nonnegative");
  IntegrandSpec u;
  u.label = "xt";
  for (int k = 1; k <= K; ++k) u.taus.push_back(fractional_time(k, T));
  for (int k = 0; k <= K; ++k) {
    std::vector<int> l(static_cast<std::size_t>(K), 0);
    if (k > 0) l[static_cast<std::size_t>(k - 1)] = k;
    u.terms.push_back({CoeffFn::constant(static_cast<double>(1.0L / detail::factorial(k))), 0, std::move(l)});
  }
  // E[(W_1 <> W_tau^{<>k})^2] / k!^2 = tau^k (1 + k tau) / k! <= (1 + k) / k!
  long double tail = 0.0L, inv = 1.0L;
  for (int k = 1; k <= K + 400; ++k) {
    inv /= k;
    if (k > K) tail += (1.0L + k) * inv;
  }
  u.tail_bound = static_cast<double>(tail);
  return u;
}

namespace {

// (2m+1)! / ((2m)^{2+2q} ((2m)!!)^2)
long double xq_weight(int m, double q) {
  const long double lm = m;
  const long double lg = std::lgamma(2.0L * lm + 2.0L) - (2.0L + 2.0L * q) * std::log(2.0L * lm) -
                         2.0L * (lm * std::log(2.0L) + std::lgamma(lm + 1.0L));
  return std::exp(lg);
}

}  // namespace

IntegrandSpec xq_variable(const TimePoint& T, double q, int M) {
  if (!(q > -0.5 && q < 0.5)) throw Error(Errc::invalid_argument, "q must lie in (-1/2, 1/2)");
  if (M < 1) throw Error(Errc::invalid_argument, "X_q needs M >= 1");
  IntegrandSpec u;
  u.label = "xq";
  for (int m = 1; m <= M; ++m) u.taus.push_back(fractional_time(m, T));
  for (int m = 1; m <= M; ++m) {
    // 1 / ((2m)^{1+q} (2m)!!), (2m)!! = 2^m m!
    const long double lc = -(1.0L + q) * std::log(2.0L * m) - (m * std::log(2.0L) + std::lgamma(m + 1.0L));
    std::vector<int> l(static_cast<std::size_t>(M), 0);
    l[static_cast<std::size_t>(m - 1)] = 2 * m;
    u.terms.push_back({CoeffFn::constant(static_cast<double>(std::exp(lc))), 0, std::move(l)});
  }
  // tail <= sum_{m>M} xq_weight(m); beyond m2 the weight is at most
  // (1 + 1/(2 m2)) 2^{-1-2q} pi^{-1/2} m^{-(3/2 + 2q)}
  const int m2 = M + 100000;
  long double tail = 0.0L;
  for (int m = M + 1; m <= m2; ++m) tail += xq_weight(m, q);
  const long double p = 1.5L + 2.0L * q;
  if (p <= 1.0L) {
    u.tail_bound = std::numeric_limits<double>::infinity();
  } else {
    const long double lead = (1.0L + 0.5L / m2) * std::pow(2.0L, -1.0L - 2.0L * q) / std::sqrt(kPi);
    tail += lead * std::pow(static_cast<long double>(m2), 1.0L - p) / (p - 1.0L);
    u.tail_bound = static_cast<double>(tail);
  }
  return u;
}

double xq_moment_bound(const TimePoint& T, double q, int M) {
  long double s = 0.0L;
  for (int m = 1; m <= M; ++m) {
    const long double f = fractional_time(m, T).value();
    s += xq_weight(m, q) * std::pow(f, 2.0L * m);
  }
  return static_cast<double>(s);
}

}  // namespace wicklab
