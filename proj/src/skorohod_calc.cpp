#include "wicklab/skorohod_calc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "moment_engine.hpp"
#include "pairing.hpp"

namespace wicklab {

namespace {

std::vector<CoeffFn::Term> canonical(std::vector<CoeffFn::Term> terms) {
  std::sort(terms.begin(), terms.end(), [](const auto& a, const auto& b) { return a.p != b.p ? a.p < b.p : a.r < b.r; });
  std::vector<CoeffFn::Term> out;
  for (const auto& t : terms) {
    if (t.p < 0) throw Error(Errc::invalid_argument, "negative power in coefficient");
    if (!out.empty() && out.back().p == t.p && out.back().r == t.r) {
      out.back().c += t.c;
    } else {
      out.push_back(t);
    }
  }
  std::erase_if(out, [](const auto& t) { return t.c == 0.0; });
  return out;
}

}  // namespace

CoeffFn::CoeffFn(std::vector<Term> terms) : terms_(canonical(std::move(terms))) {}

long double CoeffFn::operator()(long double s) const {
  long double v = 0.0L;
  for (const auto& t : terms_) {
    long double x = t.c;
    for (int k = 0; k < t.p; ++k) x *= s;
    if (t.r != 0.0) x *= std::exp(static_cast<long double>(t.r) * s);
    v += x;
  }
  return v;
}

CoeffFn CoeffFn::derivative() const {
  std::vector<Term> out;
  for (const auto& t : terms_) {
    if (t.p > 0) out.push_back({t.c * t.p, t.p - 1, t.r});
    if (t.r != 0.0) out.push_back({t.c * t.r, t.p, t.r});
  }
  return CoeffFn(std::move(out));
}

CoeffFn CoeffFn::antiderivative() const {
  std::vector<Term> out;
  for (const auto& t : terms_) {
    if (t.r == 0.0) {
      out.push_back({t.c / (t.p + 1), t.p + 1, 0.0});
      continue;
    }
    // int_0^s x^p e^{rx} dx = sum_j (-1)^{p-j} p!/(j! r^{p-j+1}) s^j e^{rs} - (-1)^p p!/r^{p+1}
    double coef = t.c / t.r;  // j = p
    for (int j = t.p; j >= 0; --j) {
      out.push_back({coef, j, t.r});
      if (j > 0) coef *= -static_cast<double>(j) / t.r;
    }
    out.push_back({-coef, 0, 0.0});
  }
  return CoeffFn(std::move(out));
}

CoeffFn CoeffFn::scaled(double k) const {
  std::vector<Term> out = terms_;
  for (auto& t : out) t.c *= k;
  return CoeffFn(std::move(out));
}

CoeffFn operator+(const CoeffFn& a, const CoeffFn& b) {
  std::vector<CoeffFn::Term> t = a.terms_;
  t.insert(t.end(), b.terms_.begin(), b.terms_.end());
  return CoeffFn(std::move(t));
}

CoeffFn operator*(const CoeffFn& a, const CoeffFn& b) {
  std::vector<CoeffFn::Term> t;
  for (const auto& x : a.terms_)
    for (const auto& y : b.terms_) t.push_back({x.c * y.c, x.p + y.p, x.r + y.r});
  return CoeffFn(std::move(t));
}

std::string CoeffFn::to_string() const {
  if (terms_.empty()) return "0";
  std::ostringstream os;
  os.precision(17);
  bool first = true;
  for (const auto& t : terms_) {
    if (!first) os << " + ";
    first = false;
    os << t.c;
    if (t.p > 0) os << "*s^" << t.p;
    if (t.r != 0.0) os << "*exp(" << t.r << "s)";
  }
  return os.str();
}

void IntegrandSpec::validate() const {
  for (std::size_t i = 0; i < taus.size(); ++i)
    for (std::size_t j = i + 1; j < taus.size(); ++j)
      if (taus[i] == taus[j]) throw Error(Errc::invalid_argument, "repeated tau " + taus[i].to_string());
  if (horizon.value() <= 0.0L) throw Error(Errc::invalid_argument, "horizon must be positive");
  for (const auto& t : terms) {
    if (t.l1 < 0) throw Error(Errc::invalid_argument, "negative running exponent");
    if (t.l.size() != taus.size()) throw Error(Errc::invalid_argument, "exponent vector length differs from tau count");
    for (int e : t.l)
      if (e < 0) throw Error(Errc::invalid_argument, "negative tau exponent");
  }
}

int IntegrandSpec::max_degree() const {
  int d = 0;
  for (const auto& t : terms) {
    int k = t.l1 + 1;
    for (int e : t.l) k += e;
    d = std::max(d, k);
  }
  return d;
}

SkorohodResult skorohod_integral(const IntegrandSpec& u) {
  u.validate();
  SkorohodResult y;
  y.taus = u.taus;
  y.horizon = u.horizon;
  y.tail_bound = u.tail_bound;
  const Factor wt = Factor::path(u.horizon);
  std::vector<WickMonomial> bnd;
  for (const auto& term : u.terms) {
    const int k = term.l1 + 1;
    std::vector<std::pair<Factor, int>> f{{wt, k}};
    for (std::size_t i = 0; i < u.taus.size(); ++i) f.emplace_back(Factor::path(u.taus[i]), term.l[i]);
    const double a_end = static_cast<double>(term.coeff(u.horizon.value()));
    bnd.push_back(WickMonomial::make(a_end / k, std::move(f)));
    // the lower boundary carries W_0^{<>k} = 0
    const CoeffFn g = term.coeff.derivative().scaled(1.0 / k);
    if (g.is_zero()) continue;
    auto same = [&](const SkorohodResult::TimeTerm& t) { return t.run_exp == k && t.tau_exps == term.l; };
    if (auto it = std::find_if(y.time_terms.begin(), y.time_terms.end(), same); it != y.time_terms.end()) {
      it->g = it->g + g;
    } else {
      y.time_terms.push_back({g, k, term.l});
    }
  }
  std::erase_if(y.time_terms, [](const auto& t) { return t.g.is_zero(); });
  y.boundary = ChaosExpansion(std::move(bnd));
  return y;
}

double second_moment(const SkorohodResult& y, const QuadratureConfig& quad) {
  const detail::Geometry geo = detail::make_geometry(nullptr, y.horizon, y.taus);
  const detail::Route route = detail::make_route(y, detail::RouteKind::plain);
  return static_cast<double>(detail::route_moment(route, geo, quad).value());
}

IntegrandSpec partial_x(const IntegrandSpec& u, int i) {
  if (i < 1 || static_cast<std::size_t>(i) > u.taus.size() + 1)
    throw Error(Errc::invalid_argument, "partial_x index " + std::to_string(i) + " out of range");
  IntegrandSpec out;
  out.taus = u.taus;
  out.horizon = u.horizon;
  out.label = u.label.empty() ? "" : "d" + std::to_string(i) + "(" + u.label + ")";
  // no bound is tracked for the differentiated tail
  out.tail_bound = u.tail_bound > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  for (const auto& t : u.terms) {
    IntegrandSpec::Term d = t;
    int& e = i == 1 ? d.l1 : d.l[static_cast<std::size_t>(i - 2)];
    if (e == 0) continue;
    d.coeff = d.coeff.scaled(e);
    --e;
    out.terms.push_back(std::move(d));
  }
  return out;
}

std::vector<LTerm> wick_L(const IntegrandSpec& u) {
  std::vector<LTerm> out;
  for (const auto& t : u.terms) {
    CoeffFn g = t.coeff.derivative();
    if (!g.is_zero()) out.push_back({std::move(g), t.l1, t.l});
  }
  return out;
}

ChaosExpansion time_term_at(const SkorohodResult& y, std::size_t term, const TimePoint& s) {
  const auto& tt = y.time_terms.at(term);
  std::vector<std::pair<Factor, int>> f{{Factor::path(s), tt.run_exp}};
  for (std::size_t i = 0; i < y.taus.size(); ++i) f.emplace_back(Factor::path(y.taus[i]), tt.tau_exps[i]);
  return ChaosExpansion({WickMonomial::make(static_cast<double>(tt.g(s.value())), std::move(f))});
}

}  // namespace wicklab
