#include "wicklab/error_engine.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "moment_engine.hpp"
#include "pairing.hpp"

namespace wicklab {

namespace {

constexpr long double kPi = std::numbers::pi_v<long double>;

std::vector<detail::Pattern> path_patterns(const std::vector<LTerm>& terms) {
  std::vector<detail::Pattern> out;
  for (const auto& t : terms) {
    detail::Pattern p;
    p.g = t.g;
    p.run = detail::Run::path;
    p.run_exp = t.run_exp;
    p.degree = t.run_exp;
    for (std::size_t k = 0; k < t.tau_exps.size(); ++k) {
      if (t.tau_exps[k] == 0) continue;
      p.fixed.emplace_back(2 * (static_cast<int>(k) + 1), t.tau_exps[k]);
      p.degree += t.tau_exps[k];
    }
    out.push_back(std::move(p));
  }
  return detail::merge_patterns(std::move(out));
}

std::vector<LTerm> as_lterms(const IntegrandSpec& u) {
  std::vector<LTerm> out;
  for (const auto& t : u.terms) out.push_back({t.coeff, t.l1, t.l});
  return out;
}

std::int64_t node_count(const NodeSet& ns) {
  if (const auto& n = ns.equidistant_n()) return *n;
  return static_cast<std::int64_t>(ns.cell_count());
}

void fill_components(ErrorReport& r, const std::vector<long double>& by_degree) {
  for (std::size_t k = 0; k < by_degree.size(); ++k)
    if (by_degree[k] != 0.0L) r.components.emplace_back(static_cast<int>(k), static_cast<double>(by_degree[k]));
}

// sum_{m>M} b_m [min(1, 2m d) + 2mt min(1, (2m-1) d)] after the explicit range,
// using b_m <= m^{-5/2} / (sqrt(pi) (2 - 1/m)^2).
long double abs_tail(int M, long double t, long double d) {
  if (d == 0.0L) return 0.0L;
  long double ratio = 1.0L, tail = 0.0L;
  const int m2 = M + (1 << 20);
  for (int m = 1; m <= m2; ++m) {
    ratio *= static_cast<long double>(2 * m - 1) / static_cast<long double>(2 * m);
    if (m <= M) continue;
    const long double b = ratio / ((2.0L * m - 1.0L) * (2.0L * m - 1.0L));
    tail += b * (std::min(1.0L, 2.0L * m * d) + 2.0L * m * t * std::min(1.0L, (2.0L * m - 1.0L) * d));
  }
  const long double k = 2.0L - 1.0L / m2;
  tail += ((2.0L / 3.0L) * std::pow(static_cast<long double>(m2), -1.5L) +
           4.0L * t * std::pow(static_cast<long double>(m2), -0.5L)) /
          (std::sqrt(kPi) * k * k);
  return 2.0L * t / kPi * tail;
}

struct BridgeAt {
  long double t = 0.0L;
  long double var = 0.0L;  // var(B_t)
};

BridgeAt bridge_at(const TimePoint& t, const NodeSetPtr& nodes) {
  if (!nodes) throw Error(Errc::invalid_argument, "abs_mse needs a node set");
  if (t.value() <= 0.0L) throw Error(Errc::invalid_argument, "abs_mse needs t > 0");
  const CellPos p = nodes->locate(t);
  return {t.value(), p.left * p.right / p.length};
}

ErrorReport base_report(const NodeSet& ns) {
  ErrorReport r;
  r.descriptor = ns.describe();
  r.n = node_count(ns);
  return r;
}

}  // namespace

ErrorReport mse(const IntegrandSpec& u, const NodeSetPtr& nodes, const QuadratureConfig& quad, bool check_projection) {
  if (!nodes) throw Error(Errc::invalid_argument, "mse needs a node set");
  const SkorohodResult y = skorohod_integral(u);
  const detail::Geometry geo = detail::make_geometry(nodes.get(), y.horizon, y.taus);

  ErrorReport r = base_report(*nodes);
  const detail::MomentResult res = detail::route_moment(detail::make_route(y, detail::RouteKind::residual), geo, quad);
  r.e2 = static_cast<double>(res.value());
  r.e = std::sqrt(std::max(0.0, r.e2));
  r.i1 = static_cast<double>(res.q1);
  r.i2 = static_cast<double>(res.q2);
  r.i3 = static_cast<double>(res.q3);
  r.truncation_bound = u.tail_bound;
  fill_components(r, res.by_degree);

  std::vector<std::size_t> cells;
  for (std::size_t k = 0; k < y.taus.size(); ++k) {
    if (geo.fixed_on_node[k + 1]) continue;
    cells.push_back(geo.fixed[2 * (k + 1)].pos.cell);
  }
  std::sort(cells.begin(), cells.end());
  r.pre_asymptotic = std::adjacent_find(cells.begin(), cells.end()) != cells.end();

  if (check_projection) {
    const auto plain = detail::route_moment(detail::make_route(y, detail::RouteKind::plain), geo, quad);
    const auto proj = detail::route_moment(detail::make_route(y, detail::RouteKind::projected), geo, quad);
    r.projection_checked = true;
    r.ey2 = static_cast<double>(plain.value());
    r.eyhat2 = static_cast<double>(proj.value());
    r.discrepancy = static_cast<double>(std::fabs(res.value() - (plain.value() - proj.value())));
  }
  return r;
}

double c1(const IntegrandSpec& u, const QuadratureConfig& quad) {
  u.validate();
  const auto patterns = path_patterns(wick_L(u));
  if (patterns.empty()) return 0.0;
  const detail::Geometry geo = detail::make_geometry(nullptr, u.horizon, u.taus);
  const long double v = detail::diagonal_moment(patterns, geo, quad);
  return static_cast<double>(std::sqrt(std::max(0.0L, v) / 12.0L));
}

C2Breakdown c2_breakdown(const IntegrandSpec& u, const QuadratureConfig& quad) {
  u.validate();
  C2Breakdown out;
  double sum = 0.0;
  for (std::size_t i = 0; i < u.taus.size(); ++i) {
    if (u.taus[i].is_exact()) continue;
    const IntegrandSpec d = partial_x(u, static_cast<int>(i) + 2);
    const double m = d.terms.empty() ? 0.0 : second_moment(skorohod_integral(d), quad);
    out.per_tau.emplace_back(i, m);
    sum += m;
  }
  out.value = 0.5 * std::sqrt(std::max(0.0, sum));
  return out;
}

double c2(const IntegrandSpec& u, const QuadratureConfig& quad) { return c2_breakdown(u, quad).value; }

double ito_c2(const IntegrandSpec& u, const QuadratureConfig& quad) {
  u.validate();
  for (const auto& t : u.terms)
    for (int e : t.l)
      if (e != 0) throw Error(Errc::invalid_argument, "ito_c2 needs an adapted integrand without tau factors");
  const IntegrandSpec d = partial_x(u, 1);
  const auto patterns = path_patterns(as_lterms(d));
  if (patterns.empty()) return 0.0;
  const detail::Geometry geo = detail::make_geometry(nullptr, u.horizon, u.taus);
  const long double v = detail::diagonal_moment(patterns, geo, quad);
  return static_cast<double>(0.5L * std::sqrt(std::max(0.0L, v)));
}

std::vector<std::pair<int, double>> chaos_norms(const IntegrandSpec& u, const QuadratureConfig& quad) {
  u.validate();
  const auto patterns = path_patterns(as_lterms(u));
  const detail::Geometry geo = detail::make_geometry(nullptr, u.horizon, u.taus);
  std::vector<int> degrees;
  for (const auto& p : patterns) degrees.push_back(p.degree);
  std::sort(degrees.begin(), degrees.end());
  degrees.erase(std::unique(degrees.begin(), degrees.end()), degrees.end());
  std::vector<std::pair<int, double>> out;
  for (int k : degrees) {
    std::vector<detail::Pattern> sel;
    for (const auto& p : patterns)
      if (p.degree == k) sel.push_back(p);
    out.emplace_back(k, static_cast<double>(detail::diagonal_moment(sel, geo, quad)));
  }
  return out;
}

ErrorReport abs_mse(const TimePoint& t, const NodeSetPtr& nodes, int M) {
  if (M < 1) throw Error(Errc::invalid_argument, "abs_mse needs M >= 1");
  const BridgeAt b = bridge_at(t, nodes);
  ErrorReport r = base_report(*nodes);
  const long double d = b.var / b.t;
  const long double lz = std::log1p(-d);  // log z
  const long double scale = 2.0L * b.t / kPi;
  detail::CompensatedSum sum;
  long double ratio = 1.0L;
  for (int m = 1; m <= M; ++m) {
    ratio *= static_cast<long double>(2 * m - 1) / static_cast<long double>(2 * m);
    const long double bm = ratio / ((2.0L * m - 1.0L) * (2.0L * m - 1.0L));
    const long double c = scale * bm * (-std::expm1(2.0L * m * lz) - 2.0L * m * b.t * std::expm1((2.0L * m - 1.0L) * lz));
    sum.add(c);
    r.components.emplace_back(m, static_cast<double>(c));
  }
  r.e2 = static_cast<double>(sum.value());
  r.e = std::sqrt(std::max(0.0, r.e2));
  r.truncation_bound = static_cast<double>(abs_tail(M, b.t, d));
  r.i1 = r.e2;
  return r;
}

ErrorReport abs_mse_full(const TimePoint& t, const NodeSetPtr& nodes) {
  const BridgeAt b = bridge_at(t, nodes);
  ErrorReport r = base_report(*nodes);
  if (b.var == 0.0L) return r;
  // e2 = (t - 2t/pi) + t^2 - (2t/pi) sum_{m>=1} b_m (z^{2m} + 2mt z^{2m-1});
  // the first two pieces are the full sums sum (2t/pi) b_m and sum (2t/pi) b_m 2mt.
  const long double tv = b.t;
  const long double d = b.var / tv;
  const long double z = 1.0L - d;
  const long double w = z * z;
  const long double one_minus_w = d * (2.0L - d);
  const long double scale = 2.0L * tv / kPi;
  const long double head = (tv - scale) + tv * tv;
  detail::CompensatedSum s;
  long double ratio = 1.0L, zp = 1.0L;  // zp = z^{2m-2}
  long double rem = 0.0L;
  for (int m = 1;; ++m) {
    ratio *= static_cast<long double>(2 * m - 1) / static_cast<long double>(2 * m);
    const long double bm = ratio / ((2.0L * m - 1.0L) * (2.0L * m - 1.0L));
    const long double z_odd = zp * z;  // z^{2m-1}
    zp *= w;                           // z^{2m}
    s.add(bm * (zp + 2.0L * m * tv * z_odd));
    if (m <= 32) r.components.emplace_back(m, static_cast<double>(scale * bm * (-std::expm1(2.0L * m * std::log1p(-d)) - 2.0L * m * tv * std::expm1((2.0L * m - 1.0L) * std::log1p(-d)))));
    if (m % 256 == 0 || zp < 1e-30L) {
      // b_k <= b_{m+1} for k > m
      const long double bnext = bm;
      const long double g0 = zp * w / one_minus_w;
      const long double g1 = zp * w * ((m + 1.0L) - m * w) / (one_minus_w * one_minus_w);
      rem = bnext * (g0 + 2.0L * tv / z * g1);
      if (rem < 1e-22L * head) break;
    }
  }
  const long double e2 = head - scale * (s.value() + rem);
  r.e2 = static_cast<double>(e2);
  r.e = std::sqrt(std::max(0.0, r.e2));
  r.truncation_bound = static_cast<double>(scale * rem);
  r.i1 = r.e2;
  return r;
}

double hypergeom_inner(int k, int i, int j, double t, double z) {
  if (k < 0 || i < 0 || j < 0 || i > k || j > k) throw Error(Errc::invalid_argument, "hypergeom_inner needs 0 <= i, j <= k");
  using detail::factorial;
  const int lo = std::max(0, k - i - j);
  const int hi = k - std::max(i, j);
  const long double pre = factorial(k - i) * factorial(k - j) * factorial(i) * factorial(j);
  long double s = 0.0L;
  for (int l = lo; l <= hi; ++l) {
    const long double den = factorial(l) * factorial(k - i - l) * factorial(k - j - l) * factorial(i + j - k + l);
    s += std::pow(static_cast<long double>(z), k - l) * pre / den;
  }
  return static_cast<double>(std::pow(static_cast<long double>(t), k) * s);
}

}  // namespace wicklab
