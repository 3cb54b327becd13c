#include "wicklab/verification.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <boost/math/special_functions/erf.hpp>

namespace wicklab {

namespace {

std::vector<const Factor*> expand(const WickMonomial& m) {
  std::vector<const Factor*> out;
  for (const auto& [f, e] : m.factors)
    for (int k = 0; k < e; ++k) out.push_back(&f);
  return out;
}

constexpr std::size_t kEvalChunk = 4096;

// Exponent vectors are small: up to a handful of factors of degree <= ~12.
class WickEvaluator {
 public:
  WickEvaluator(std::vector<int> exps, std::vector<double> var, Eigen::MatrixXd cov)
      : top_(std::move(exps)), var_(std::move(var)), cov_(std::move(cov)) {}

  void run(const std::vector<const double*>& cols, std::size_t rows, double* out) {
    cols_ = &cols;
    rows_ = rows;
    memo_.clear();
    const auto& v = get(top_);
    std::copy(v.begin(), v.end(), out);
  }

 private:
  const std::vector<double>& get(const std::vector<int>& e) {
    if (auto it = memo_.find(e); it != memo_.end()) return it->second;
    std::vector<double> v(rows_);
    std::size_t nz = 0, j = 0;
    for (std::size_t i = e.size(); i-- > 0;)
      if (e[i] > 0) {
        ++nz;
        j = i;
      }
    if (nz == 0) {
      std::fill(v.begin(), v.end(), 1.0);
    } else if (nz == 1) {
      const double* x = (*cols_)[j];
      for (std::size_t r = 0; r < rows_; ++r) v[r] = hermite(e[j], var_[j], x[r]);
    } else {
      // X <> M = X M - sum_i cov(X, Y_i) dM/dY_i
      std::vector<int> rest = e;
      --rest[j];
      const std::vector<double> m = get(rest);
      const double* x = (*cols_)[j];
      for (std::size_t r = 0; r < rows_; ++r) v[r] = x[r] * m[r];
      for (std::size_t i = 0; i < rest.size(); ++i) {
        if (rest[i] == 0 || cov_(j, i) == 0.0) continue;
        std::vector<int> d = rest;
        --d[i];
        const std::vector<double> dm = get(d);
        const double k = rest[i] * cov_(j, i);
        for (std::size_t r = 0; r < rows_; ++r) v[r] -= k * dm[r];
      }
    }
    return memo_.emplace(e, std::move(v)).first->second;
  }

  std::vector<int> top_;
  std::vector<double> var_;
  Eigen::MatrixXd cov_;
  const std::vector<const double*>* cols_ = nullptr;
  std::size_t rows_ = 0;
  std::map<std::vector<int>, std::vector<double>> memo_;
};

std::size_t column_of(const SampleBatch& batch, const Factor& f) {
  for (std::size_t j = 0; j < batch.factors.size(); ++j)
    if (batch.factors[j] == f) return j;
  throw Error(Errc::missing_factor, f.to_string() + " is not sampled in this batch");
}

}  // namespace

double brute_inner(const WickMonomial& a, const WickMonomial& b) {
  const int da = a.degree(), db = b.degree();
  if (std::max(da, db) > kBruteMaxDegree)
    throw Error(Errc::degree_too_large, "brute_inner is limited to degree " + std::to_string(kBruteMaxDegree));
  if (da != db || a.is_zero() || b.is_zero()) return 0.0;
  const auto fa = expand(a), fb = expand(b);
  const std::size_t n = fa.size();
  std::vector<long double> c(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] = cov(*fa[i], *fb[j]);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  long double sum = 0.0L;
  do {
    long double p = 1.0L;
    for (std::size_t i = 0; i < n; ++i) p *= c[i * n + perm[i]];
    sum += p;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(static_cast<long double>(a.coeff) * b.coeff * sum);
}

ChaosExpansion ordinary_product(const WickMonomial& a, const WickMonomial& b) {
  const std::size_t ra = a.factors.size(), rb = b.factors.size();
  std::vector<int> left_a(ra), left_b(rb);
  for (std::size_t i = 0; i < ra; ++i) left_a[i] = a.factors[i].second;
  for (std::size_t j = 0; j < rb; ++j) left_b[j] = b.factors[j].second;
  std::vector<double> c(ra * rb);
  for (std::size_t i = 0; i < ra; ++i)
    for (std::size_t j = 0; j < rb; ++j) c[i * rb + j] = cov(a.factors[i].first, b.factors[j].first);

  std::vector<WickMonomial> out;
  // k contractions between slot i of a and slot j of b carry
  // (falling factorials of both exponents) * cov^k / k!
  auto rec = [&](auto& self, std::size_t cell, long double w) -> void {
    if (cell == ra * rb) {
      std::vector<std::pair<Factor, int>> f;
      for (std::size_t i = 0; i < ra; ++i) f.emplace_back(a.factors[i].first, left_a[i]);
      for (std::size_t j = 0; j < rb; ++j) f.emplace_back(b.factors[j].first, left_b[j]);
      out.push_back(WickMonomial::make(static_cast<double>(w * a.coeff * b.coeff), std::move(f)));
      return;
    }
    const std::size_t i = cell / rb, j = cell % rb;
    const int save_a = left_a[i], save_b = left_b[j];
    long double wk = w;
    for (int k = 0;; ++k) {
      self(self, cell + 1, wk);
      if (left_a[i] == 0 || left_b[j] == 0 || c[cell] == 0.0) break;
      wk *= static_cast<long double>(left_a[i]) * left_b[j] * c[cell] / (k + 1);
      --left_a[i];
      --left_b[j];
    }
    left_a[i] = save_a;
    left_b[j] = save_b;
  };
  rec(rec, 0, 1.0L);
  return ChaosExpansion(std::move(out));
}

double counter_uniform(std::uint64_t seed, std::uint64_t counter) {
  std::uint64_t z = seed + (counter + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return (static_cast<double>(z >> 11) + 0.5) * 0x1.0p-53;
}

double counter_normal(std::uint64_t seed, std::uint64_t counter) {
  return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * counter_uniform(seed, counter));
}

SampleBatch sample_factors(const std::vector<Factor>& factors, std::size_t count, std::uint64_t seed,
                           std::uint64_t first_row) {
  SampleBatch b;
  b.seed = seed;
  b.count = count;
  b.factors = factors;
  const auto nf = static_cast<Eigen::Index>(factors.size());
  b.values.resize(static_cast<Eigen::Index>(count), nf);
  if (count == 0 || nf == 0) return b;

  Eigen::MatrixXd gram(nf, nf);
  for (Eigen::Index i = 0; i < nf; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) gram(i, j) = gram(j, i) = cov(factors[i], factors[j]);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  Eigen::VectorXd lambda = eig.eigenvalues();
  const double lowest = lambda.minCoeff();
  if (lowest < -1e-8) throw Error(Errc::non_psd, "Gram matrix has eigenvalue " + std::to_string(lowest));
  if (lowest < 0.0) b.regularized = true;
  lambda = lambda.cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd root = eig.eigenvectors() * lambda.asDiagonal() * eig.eigenvectors().transpose();

  const auto rows = static_cast<std::int64_t>(count);
  const auto unf = static_cast<std::uint64_t>(nf);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < rows; ++i) {
    Eigen::RowVectorXd z(nf);
    const std::uint64_t base = (first_row + static_cast<std::uint64_t>(i)) * unf;
    for (Eigen::Index j = 0; j < nf; ++j) z(j) = counter_normal(seed, base + static_cast<std::uint64_t>(j));
    b.values.row(i) = z * root;
  }
  return b;
}

std::vector<double> evaluate_monomial(const WickMonomial& m, const SampleBatch& batch) {
  std::vector<double> out(batch.count, m.coeff);
  if (m.is_zero() || m.factors.empty() || batch.count == 0) return out;
  const std::size_t r = m.factors.size();
  std::vector<std::size_t> col(r);
  std::vector<int> exps(r);
  std::vector<double> var(r);
  Eigen::MatrixXd c(r, r);
  for (std::size_t i = 0; i < r; ++i) {
    col[i] = column_of(batch, m.factors[i].first);
    exps[i] = m.factors[i].second;
    var[i] = m.factors[i].first.variance();
    for (std::size_t j = 0; j < r; ++j) c(i, j) = cov(m.factors[i].first, m.factors[j].first);
  }
  // column-major storage: column j starts at data() + j * count
  const double* data = batch.values.data();
  const auto chunks = static_cast<std::int64_t>((batch.count + kEvalChunk - 1) / kEvalChunk);
#pragma omp parallel
  {
    WickEvaluator ev(exps, var, c);
    std::vector<double> buf(kEvalChunk);
    std::vector<const double*> cols(r);
#pragma omp for schedule(static)
    for (std::int64_t k = 0; k < chunks; ++k) {
      const std::size_t lo = static_cast<std::size_t>(k) * kEvalChunk;
      const std::size_t rows = std::min(kEvalChunk, batch.count - lo);
      for (std::size_t i = 0; i < r; ++i) cols[i] = data + col[i] * batch.count + lo;
      ev.run(cols, rows, buf.data());
      for (std::size_t s = 0; s < rows; ++s) out[lo + s] *= buf[s];
    }
  }
  return out;
}

std::vector<double> evaluate(const ChaosExpansion& x, const SampleBatch& batch) {
  std::vector<double> out(batch.count, 0.0);
  for (const auto& m : x.terms()) {
    const auto v = evaluate_monomial(m, batch);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[i];
  }
  return out;
}

std::string TestFunction::label() const {
  if (powers.empty()) return "1";
  std::string s;
  for (const auto& [i, p] : powers) {
    if (!s.empty()) s += "*";
    s += "x" + std::to_string(i);
    if (p != 1) s += "^" + std::to_string(p);
  }
  return s;
}

bool ProjectionReport::passed() const {
  return std::all_of(estimates.begin(), estimates.end(), [](const auto& e) { return e.pass; });
}

std::vector<TestFunction> default_test_functions(const NodeSet& nodes) {
  const std::size_t last = nodes.cell_count();
  std::vector<TestFunction> out{{{}}, {{{last, 1}}}};
  if (last >= 2) {
    out.push_back({{{1, 1}, {last, 1}}});
    out.push_back({{{(last + 1) / 2, 2}}});
  }
  return out;
}

ProjectionReport projection_check(const IntegrandSpec& u, const NodeSetPtr& nodes,
                                  const std::vector<TestFunction>& test_fns, std::size_t count, std::uint64_t seed) {
  if (!nodes) throw Error(Errc::invalid_argument, "projection_check needs a node set");
  const SkorohodResult y = skorohod_integral(u);
  if (!y.time_terms.empty())
    throw Error(Errc::unsupported_factor, "projection_check needs an integrand with time-independent coefficients");
  const ChaosExpansion residual = y.boundary - condition(y.boundary, nodes);

  std::vector<Factor> factors;
  auto add = [&](const Factor& f) {
    if (std::find(factors.begin(), factors.end(), f) == factors.end()) factors.push_back(f);
  };
  for (const auto& m : residual.terms())
    for (const auto& [f, e] : m.factors) add(f);
  std::vector<std::vector<std::pair<std::size_t, int>>> fn_cols;
  for (const auto& fn : test_fns) {
    fn_cols.emplace_back();
    for (const auto& [i, p] : fn.powers) {
      if (i < 1 || i > nodes->cell_count()) throw Error(Errc::invalid_argument, "test function node index out of range");
      const Factor f = Factor::path(nodes->node(i));
      add(f);
      fn_cols.back().emplace_back(static_cast<std::size_t>(std::find(factors.begin(), factors.end(), f) - factors.begin()), p);
    }
  }

  const std::size_t nt = test_fns.size();
  std::vector<long double> s1(nt, 0.0L), s2(nt, 0.0L);
  constexpr std::size_t kChunk = 1 << 16;
  for (std::size_t lo = 0; lo < count; lo += kChunk) {
    const std::size_t rows = std::min(kChunk, count - lo);
    const SampleBatch batch = sample_factors(factors, rows, seed, lo);
    const std::vector<double> r = evaluate(residual, batch);
    for (std::size_t k = 0; k < nt; ++k) {
      long double a = 0.0L, b = 0.0L;
      for (std::size_t s = 0; s < rows; ++s) {
        double v = r[s];
        for (const auto& [c, p] : fn_cols[k]) v *= std::pow(batch.values(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(c)), p);
        a += v;
        b += static_cast<long double>(v) * v;
      }
      s1[k] += a;
      s2[k] += b;
    }
  }

  ProjectionReport rep;
  rep.count = count;
  rep.seed = seed;
  for (std::size_t k = 0; k < nt; ++k) {
    ProjectionEstimate e;
    e.label = test_fns[k].label();
    if (count > 1) {
      const long double n = static_cast<long double>(count);
      const long double mean = s1[k] / n;
      const long double var = std::max(0.0L, (s2[k] / n - mean * mean) * n / (n - 1));
      e.mean = static_cast<double>(mean);
      e.se = static_cast<double>(std::sqrt(var / n));
      e.z = e.se > 0 ? e.mean / e.se : (e.mean == 0.0 ? 0.0 : INFINITY);
    }
    e.pass = std::fabs(e.z) <= 4.0;
    rep.estimates.push_back(e);
  }
  return rep;
}

}  // namespace wicklab

namespace wicklab {

std::int64_t CounterRng::below(std::int64_t n) {
  if (n <= 0) throw Error(Errc::invalid_argument, "CounterRng::below needs n > 0");
  return std::min<std::int64_t>(n - 1, static_cast<std::int64_t>(uniform() * static_cast<double>(n)));
}

namespace {

TimePoint random_time(CounterRng& rng, const NodeSet& nodes) {
  if (rng.below(3) == 0) {
    const std::int64_t q = 2 + rng.below(23);
    return TimePoint::exact(1 + rng.below(q - 1), q);
  }
  for (;;) {
    const TimePoint t = TimePoint::approx(0.02L + 0.96L * static_cast<long double>(rng.uniform()));
    try {
      (void)nodes.locate(t);
      return t;
    } catch (const Error&) {
    }
  }
}

}  // namespace

WickMonomial random_monomial(CounterRng& rng, const NodeSetPtr& nodes, int degree, int max_factors) {
  const int r = static_cast<int>(1 + rng.below(std::max(1, std::min(max_factors, degree))));
  std::vector<std::pair<Factor, int>> f;
  for (int i = 0; i < r; ++i) {
    const TimePoint t = random_time(rng, *nodes);
    switch (rng.below(3)) {
      case 0: f.emplace_back(Factor::path(t), 1); break;
      case 1: f.emplace_back(Factor::interp(t, nodes), 1); break;
      default: f.emplace_back(Factor::bridge(t, nodes), 1); break;
    }
  }
  for (int k = r; k < degree; ++k) ++f[static_cast<std::size_t>(rng.below(r))].second;
  if (degree == 0) f.clear();
  const double c = 0.5 + rng.uniform();
  return WickMonomial::make(c, std::move(f));
}

OracleSuite oracle_suite(std::size_t pairs, int max_degree, std::uint64_t seed, double rel_tol) {
  CounterRng rng(seed);
  OracleSuite s;
  s.pairs = pairs;
  for (std::size_t i = 0; i < pairs; ++i) {
    NodeSetPtr nodes;
    if (rng.below(2) == 0) {
      nodes = std::make_shared<const NodeSet>(NodeSet::equidistant(1 + rng.below(8)));
    } else {
      std::vector<TimePoint> ts{TimePoint::exact(1, 1)};
      const auto extra = rng.below(5);
      for (std::int64_t k = 0; k < extra; ++k) ts.push_back(TimePoint::approx(0.05L + 0.9L * static_cast<long double>(rng.uniform())));
      std::sort(ts.begin(), ts.end());
      ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
      nodes = std::make_shared<const NodeSet>(NodeSet::from_times(std::move(ts)));
    }
    const int da = static_cast<int>(rng.below(max_degree + 1));
    const int db = rng.below(8) == 0 ? static_cast<int>(rng.below(max_degree + 1)) : da;
    const WickMonomial a = random_monomial(rng, nodes, da, 4);
    const WickMonomial b = random_monomial(rng, nodes, db, 4);
    const double x = wick_inner(a, b);
    const double y = brute_inner(a, b);
    const double scale = std::max(std::fabs(x), std::fabs(y));
    const double rel = scale > 0 ? std::fabs(x - y) / scale : 0.0;
    s.worst_rel = std::max(s.worst_rel, rel);
    if (!(rel <= rel_tol)) ++s.failures;
  }
  return s;
}

MomentSuite moment_suite(std::size_t monomials, int max_degree, std::size_t count, std::uint64_t seed) {
  CounterRng rng(seed);
  MomentSuite s;
  s.monomials = monomials;
  for (std::size_t i = 0; i < monomials; ++i) {
    const auto nodes = std::make_shared<const NodeSet>(NodeSet::equidistant(1 + rng.below(6)));
    const int d = 1 + static_cast<int>(rng.below(max_degree));
    WickMonomial m = random_monomial(rng, nodes, d, 3);
    if (m.is_zero()) continue;
    m.coeff = 1.0;
    std::vector<Factor> fs;
    for (const auto& [f, e] : m.factors) fs.push_back(f);
    const SampleBatch batch = sample_factors(fs, count, seed + 1 + i);
    const auto v = evaluate_monomial(m, batch);
    long double s1 = 0, s2 = 0;
    for (double x : v) {
      s1 += x;
      s2 += static_cast<long double>(x) * x;
    }
    const long double n = static_cast<long double>(count);
    const long double mean = s1 / n, m2 = s2 / n;
    // sample standard errors of m^2 are heavy tailed and track the estimate itself
    const long double ref = wick_inner_ld(m, m);
    const ChaosExpansion sq = ordinary_product(m, m);
    const long double m4 = inner(sq, sq);
    const long double se1 = std::sqrt(ref / n);
    const long double se2 = std::sqrt(std::max(0.0L, m4 - ref * ref) / n);
    const double z1 = se1 > 0 ? static_cast<double>(mean / se1) : 0.0;
    const double z2 = se2 > 0 ? static_cast<double>((m2 - ref) / se2) : 0.0;
    const double z = std::max(std::fabs(z1), std::fabs(z2));
    s.worst_z = std::max(s.worst_z, z);
    if (!(z <= 4.0)) ++s.failures;
  }
  return s;
}

}  // namespace wicklab
