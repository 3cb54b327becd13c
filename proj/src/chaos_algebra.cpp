#include "wicklab/chaos_algebra.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "pairing.hpp"

namespace wicklab {

namespace detail {

namespace {

std::vector<long double> build_factorials() {
  std::vector<long double> f(kMaxFactorial + 1);
  f[0] = 1.0L;
  for (int i = 1; i <= kMaxFactorial; ++i) f[i] = f[i - 1] * static_cast<long double>(i);
  return f;
}

}  // namespace

long double factorial(int n) {
  static const std::vector<long double> table = build_factorials();
  if (n < 0 || n > kMaxFactorial) throw Error(Errc::degree_too_large, "factorial of " + std::to_string(n));
  return table[static_cast<std::size_t>(n)];
}

long double pairing_from_cov(std::span<const int> rows, std::span<const int> cols,
                             std::span<const long double> cov) {
  const std::size_t nr = rows.size();
  const std::size_t nc = cols.size();
  std::vector<std::vector<long double>> powers(nr * nc);
  for (std::size_t i = 0; i < nr; ++i) {
    for (std::size_t j = 0; j < nc; ++j) {
      const int top = std::min(rows[i], cols[j]);
      auto& p = powers[i * nc + j];
      p.resize(static_cast<std::size_t>(top) + 1);
      p[0] = 1.0L;
      const long double c = cov[i * nc + j];
      for (int a = 1; a <= top; ++a) p[static_cast<std::size_t>(a)] = p[static_cast<std::size_t>(a) - 1] * c / a;
    }
  }
  const auto pw = [&](std::size_t i, std::size_t j, int a) -> long double {
    const auto& p = powers[i * nc + j];
    return static_cast<std::size_t>(a) < p.size() ? p[static_cast<std::size_t>(a)] : 0.0L;
  };
  PairingSum<decltype(pw)> sum(rows, cols, pw);
  long double v = sum.run();
  if (v == 0.0L) return 0.0L;
  for (int l : rows) v *= factorial(l);
  for (int m : cols) v *= factorial(m);
  return v;
}

}  // namespace detail

namespace {

std::strong_ordering compare_shape(const std::vector<std::pair<Factor, int>>& a,
                                   const std::vector<std::pair<Factor, int>>& b) {
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (auto c = a[i].first <=> b[i].first; c != 0) return c;
    if (auto c = a[i].second <=> b[i].second; c != 0) return c;
  }
  return a.size() <=> b.size();
}

std::vector<WickMonomial> canonical_terms(std::vector<WickMonomial> terms) {
  std::erase_if(terms, [](const WickMonomial& m) { return m.is_zero(); });
  std::stable_sort(terms.begin(), terms.end(), [](const WickMonomial& a, const WickMonomial& b) {
    return compare_shape(a.factors, b.factors) < 0;
  });
  std::vector<WickMonomial> out;
  for (auto& t : terms) {
    if (!out.empty() && out.back().same_shape(t)) {
      out.back().coeff += t.coeff;
    } else {
      out.push_back(std::move(t));
    }
  }
  std::erase_if(out, [](const WickMonomial& m) { return m.is_zero(); });
  return out;
}

double combine_tails(double a, double b) {
  const double s = std::sqrt(a) + std::sqrt(b);
  return s * s;
}

}  // namespace

WickMonomial WickMonomial::make(double coeff, std::vector<std::pair<Factor, int>> factors) {
  for (const auto& [f, e] : factors)
    if (e < 0) throw Error(Errc::invalid_argument, "negative Wick exponent on " + f.to_string());
  std::erase_if(factors, [](const auto& fe) { return fe.second == 0; });
  std::stable_sort(factors.begin(), factors.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  WickMonomial m;
  m.coeff = coeff;
  for (auto& fe : factors) {
    if (!m.factors.empty() && m.factors.back().first == fe.first) {
      m.factors.back().second += fe.second;
    } else {
      m.factors.push_back(std::move(fe));
    }
  }
  if (coeff == 0.0) {
    m.factors.clear();
    return m;
  }
  for (const auto& fe : m.factors) {
    if (fe.first.degenerate()) {
      m.coeff = 0.0;
      m.factors.clear();
      break;
    }
  }
  return m;
}

int WickMonomial::degree() const {
  int d = 0;
  for (const auto& fe : factors) d += fe.second;
  return d;
}

bool WickMonomial::same_shape(const WickMonomial& other) const {
  return compare_shape(factors, other.factors) == 0;
}

std::string WickMonomial::to_string() const {
  std::ostringstream os;
  os.precision(17);
  os << coeff;
  for (const auto& [f, e] : factors) {
    os << " " << f.to_string();
    if (e != 1) os << "^" << e;
  }
  return os.str();
}

ChaosExpansion::ChaosExpansion(std::vector<WickMonomial> terms, double tail_bound)
    : terms_(canonical_terms(std::move(terms))), tail_bound_(tail_bound) {
  if (!(tail_bound >= 0.0)) throw Error(Errc::invalid_argument, "tail bound must be nonnegative");
}

ChaosExpansion ChaosExpansion::constant(double c) { return ChaosExpansion({WickMonomial::constant(c)}); }

ChaosExpansion ChaosExpansion::single(const Factor& f, int exponent, double coeff) {
  return ChaosExpansion({WickMonomial::make(coeff, {{f, exponent}})});
}

int ChaosExpansion::max_degree() const {
  int d = 0;
  for (const auto& t : terms_) d = std::max(d, t.degree());
  return d;
}

ChaosExpansion ChaosExpansion::scaled(double c) const {
  std::vector<WickMonomial> t = terms_;
  for (auto& m : t) m.coeff *= c;
  return ChaosExpansion(std::move(t), tail_bound_ * c * c);
}

ChaosExpansion operator+(const ChaosExpansion& a, const ChaosExpansion& b) {
  std::vector<WickMonomial> t = a.terms_;
  t.insert(t.end(), b.terms_.begin(), b.terms_.end());
  return ChaosExpansion(std::move(t), combine_tails(a.tail_bound_, b.tail_bound_));
}

ChaosExpansion operator-(const ChaosExpansion& a, const ChaosExpansion& b) { return a + b.scaled(-1.0); }

std::string ChaosExpansion::to_string() const {
  if (terms_.empty()) return "0";
  std::string s;
  for (const auto& t : terms_) {
    if (!s.empty()) s += " + ";
    s += t.to_string();
  }
  return s;
}

long double wick_inner_ld(const WickMonomial& a, const WickMonomial& b) {
  if (a.is_zero() || b.is_zero()) return 0.0L;
  if (a.degree() != b.degree()) return 0.0L;
  if (a.factors.empty()) return static_cast<long double>(a.coeff) * b.coeff;

  std::vector<const Factor*> all;
  for (const auto& fe : a.factors) all.push_back(&fe.first);
  for (const auto& fe : b.factors) all.push_back(&fe.first);
  const NodeSet* ns = common_node_set(all);

  std::vector<Atom> xs, ys;
  std::vector<int> rows, cols;
  for (const auto& [f, e] : a.factors) {
    xs.push_back({f.kind(), f.position(ns)});
    rows.push_back(e);
  }
  for (const auto& [f, e] : b.factors) {
    ys.push_back({f.kind(), f.position(ns)});
    cols.push_back(e);
  }
  std::vector<long double> c(xs.size() * ys.size());
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t j = 0; j < ys.size(); ++j) c[i * ys.size() + j] = atom_cov(xs[i], ys[j]);
  return static_cast<long double>(a.coeff) * b.coeff * detail::pairing_from_cov(rows, cols, c);
}

double wick_inner(const WickMonomial& a, const WickMonomial& b) { return static_cast<double>(wick_inner_ld(a, b)); }

double inner(const ChaosExpansion& x, const ChaosExpansion& y) {
  long double sum = 0.0L;
  for (const auto& a : x.terms())
    for (const auto& b : y.terms()) sum += wick_inner_ld(a, b);
  return static_cast<double>(sum);
}

double norm(const ChaosExpansion& x) { return std::sqrt(std::max(0.0, inner(x, x))); }

ChaosExpansion wick_mul(const ChaosExpansion& x, const ChaosExpansion& y) {
  std::vector<WickMonomial> out;
  out.reserve(x.terms().size() * y.terms().size());
  for (const auto& a : x.terms()) {
    for (const auto& b : y.terms()) {
      auto f = a.factors;
      f.insert(f.end(), b.factors.begin(), b.factors.end());
      out.push_back(WickMonomial::make(a.coeff * b.coeff, std::move(f)));
    }
  }
  // Wick products are not norm-submultiplicative, so a truncated operand
  // leaves the product without a finite bound.
  const bool truncated = x.tail_bound() > 0.0 || y.tail_bound() > 0.0;
  return ChaosExpansion(std::move(out), truncated ? std::numeric_limits<double>::infinity() : 0.0);
}

ChaosExpansion chaos_project(const ChaosExpansion& x, int k) {
  std::vector<WickMonomial> out;
  for (const auto& t : x.terms())
    if (t.degree() == k) out.push_back(t);
  return ChaosExpansion(std::move(out));
}

ChaosExpansion condition(const ChaosExpansion& x, const NodeSetPtr& nodes) {
  if (!nodes) throw Error(Errc::invalid_argument, "condition needs a node set");
  std::vector<WickMonomial> out;
  for (const auto& t : x.terms()) {
    std::vector<std::pair<Factor, int>> f;
    for (const auto& [factor, e] : t.factors) {
      if (factor.kind() != FactorKind::path)
        throw Error(Errc::unsupported_factor, "cannot condition " + factor.to_string());
      f.emplace_back(Factor::interp(factor.time(), nodes), e);
    }
    out.push_back(WickMonomial::make(t.coeff, std::move(f)));
  }
  return ChaosExpansion(std::move(out), x.tail_bound());
}

ChaosExpansion bridge_expand(const TimePoint& t, const NodeSetPtr& nodes, int k) {
  if (k < 1) throw Error(Errc::invalid_argument, "bridge_expand needs k >= 1");
  const Factor w = Factor::path(t);
  const Factor lin = Factor::interp(t, nodes);
  const Factor b = Factor::bridge(t, nodes);
  std::vector<WickMonomial> out;
  for (int j = 1; j <= k; ++j) out.push_back(WickMonomial::make(1.0, {{b, 1}, {w, k - j}, {lin, j - 1}}));
  return ChaosExpansion(std::move(out));
}

double integrability_index(std::span<const std::pair<int, double>> pi_norms) {
  double s = 0.0;
  for (const auto& [k, v] : pi_norms) {
    if (k < 0 || v < 0.0) throw Error(Errc::invalid_argument, "chaos norms must be nonnegative");
    s += (k + 1) * v;
  }
  return s;
}

}  // namespace wicklab
