#include "moment_engine.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>

#include "pairing.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace wicklab::detail {

const GaussRule& gauss_legendre(int order) {
  if (order < 1 || order > 4096) throw Error(Errc::invalid_argument, "quadrature order out of range");
  static std::mutex mu;
  static std::map<int, std::unique_ptr<GaussRule>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[order];
  if (slot) return *slot;

  auto rule = std::make_unique<GaussRule>();
  const int n = order;
  const long double pi = 3.141592653589793238462643383279502884L;
  for (int i = 0; i < n; ++i) {
    long double x = std::cos(pi * (i + 0.75L) / (n + 0.5L));
    long double dp = 0.0L;
    for (int it = 0; it < 100; ++it) {
      long double p0 = 1.0L, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const long double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0L;
      dp = n * (x * p1 - p0) / (x * x - 1.0L);
      const long double dx = p1 / dp;
      x -= dx;
      if (std::fabs(dx) < 1e-19L) break;
    }
    // recompute the derivative at the converged root for the weight
    long double p0 = 1.0L, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const long double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    if (n == 1) p0 = 1.0L;
    dp = n * (x * p1 - p0) / (x * x - 1.0L);
    rule->x.push_back((1.0L + x) / 2.0L);
    rule->w.push_back(1.0L / ((1.0L - x * x) * dp * dp));
  }
  std::vector<std::size_t> idx(rule->x.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return rule->x[a] < rule->x[b]; });
  GaussRule sorted;
  for (std::size_t i : idx) {
    sorted.x.push_back(rule->x[i]);
    sorted.w.push_back(rule->w[i]);
  }
  *rule = std::move(sorted);
  slot = std::move(rule);
  return *slot;
}

std::vector<Pattern> merge_patterns(std::vector<Pattern> patterns) {
  std::vector<Pattern> out;
  for (auto& p : patterns) {
    std::sort(p.fixed.begin(), p.fixed.end());
    auto same = [&](const Pattern& q) { return q.run == p.run && q.run_exp == p.run_exp && q.fixed == p.fixed; };
    auto it = std::find_if(out.begin(), out.end(), same);
    if (it == out.end()) {
      out.push_back(std::move(p));
    } else {
      it->g = it->g + p.g;
      it->c += p.c;
    }
  }
  std::erase_if(out, [](const Pattern& p) { return p.run == Run::none ? p.c == 0.0L : p.g.is_zero(); });
  return out;
}

namespace {

struct Block {
  std::vector<long double> deg;
  long double abs = 0.0L;

  explicit Block(int max_deg = 0) : deg(static_cast<std::size_t>(max_deg) + 1, 0.0L) {}
  long double total() const {
    long double s = 0.0L;
    for (long double v : deg) s += v;
    return s;
  }
  Block& operator-=(const Block& o) {
    for (std::size_t k = 0; k < deg.size(); ++k) deg[k] -= o.deg[k];
    abs += o.abs;
    return *this;
  }
  Block& operator*=(long double f) {
    for (auto& v : deg) v *= f;
    abs *= std::fabs(f);
    return *this;
  }
};

struct BlockSum {
  std::vector<CompensatedSum> deg;
  long double abs = 0.0L;
  explicit BlockSum(int max_deg) : deg(static_cast<std::size_t>(max_deg) + 1) {}
  void add(const Block& b) {
    for (std::size_t k = 0; k < deg.size(); ++k) deg[k].add(b.deg[k]);
    abs += b.abs;
  }
  Block value() const {
    Block b(static_cast<int>(deg.size()) - 1);
    for (std::size_t k = 0; k < deg.size(); ++k) b.deg[k] = deg[k].value();
    b.abs = abs;
    return b;
  }
};

// Pattern compiled against the atom layout: fixed atoms 0..F-1, then the
// left running path/interp slots and the right running path/interp slots.
struct Compiled {
  int degree = 0;
  long double fact = 1.0L;  // product of factorials of the exponents
  long double c = 0.0L;
  int base = -1;             // index into the distinct coefficient bases
  long double scale = 0.0L;  // g = scale * base
  std::vector<int> left_ids, right_ids, exps;
};

struct CompiledList {
  std::vector<Compiled> items;
  std::vector<CoeffFn> bases;
};

CompiledList compile(const std::vector<Pattern>& patterns, int fixed_count) {
  CompiledList out;
  for (const auto& p : patterns) {
    Compiled c;
    c.degree = p.degree;
    c.c = p.c;
    if (p.run != Run::none) {
      if (p.g.is_zero()) continue;
      c.scale = p.g.terms().front().c;
      const CoeffFn base = p.g.scaled(1.0 / c.scale);
      auto it = std::find(out.bases.begin(), out.bases.end(), base);
      c.base = static_cast<int>(it - out.bases.begin());
      if (it == out.bases.end()) out.bases.push_back(base);
      if (p.run_exp > 0) {
        const int off = p.run == Run::path ? 0 : 1;
        c.left_ids.push_back(fixed_count + off);
        c.right_ids.push_back(fixed_count + 2 + off);
        c.exps.push_back(p.run_exp);
      }
    }
    for (const auto& [id, e] : p.fixed) {
      if (e == 0) continue;
      c.left_ids.push_back(id);
      c.right_ids.push_back(id);
      c.exps.push_back(e);
    }
    for (int e : c.exps) c.fact *= factorial(e);
    out.items.push_back(std::move(c));
  }
  return out;
}

using Jobs = std::vector<std::pair<int, int>>;

Jobs make_jobs(const CompiledList& a, const CompiledList& b) {
  Jobs jobs;
  for (std::size_t i = 0; i < a.items.size(); ++i)
    for (std::size_t j = 0; j < b.items.size(); ++j)
      if (a.items[i].degree == b.items[j].degree) jobs.emplace_back(static_cast<int>(i), static_cast<int>(j));
  return jobs;
}

// Covariance powers C^a / a! for every atom pair.
class Table {
 public:
  Table(const Geometry& geo, int max_deg)
      : geo_(&geo),
        f_(static_cast<int>(geo.fixed.size())),
        a_(f_ + 4),
        d_(max_deg),
        data_(static_cast<std::size_t>(a_ * a_) * static_cast<std::size_t>(d_ + 1), 0.0L),
        inv_(static_cast<std::size_t>(d_) + 1, 0.0L) {
    for (int k = 1; k <= d_; ++k) inv_[static_cast<std::size_t>(k)] = 1.0L / k;
    for (int x = 0; x < f_; ++x)
      for (int y = 0; y <= x; ++y) fill(x, y, atom_cov(geo.fixed[static_cast<std::size_t>(x)], geo.fixed[static_cast<std::size_t>(y)]));
  }

  int fixed_count() const { return f_; }

  void set_side(bool right, const CellPos& pos) {
    const int base = f_ + (right ? 2 : 0);
    Atom p{FactorKind::path, pos};
    Atom q{geo_->nodes ? FactorKind::interp : FactorKind::path, pos};
    run_[right ? 2 : 0] = p;
    run_[right ? 3 : 1] = q;
    for (int x = 0; x < f_; ++x) {
      const Atom& fx = geo_->fixed[static_cast<std::size_t>(x)];
      fill(base, x, atom_cov(p, fx));
      fill(base + 1, x, atom_cov(q, fx));
    }
  }

  void couple() {
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) fill(f_ + a, f_ + 2 + b, atom_cov(run_[a], run_[2 + b]));
  }

  const long double* pw(int x, int y) const {
    return &data_[(static_cast<std::size_t>(x) * a_ + static_cast<std::size_t>(y)) * static_cast<std::size_t>(d_ + 1)];
  }

 private:
  void fill(int x, int y, long double c) {
    long double* p = &data_[(static_cast<std::size_t>(x) * a_ + static_cast<std::size_t>(y)) * static_cast<std::size_t>(d_ + 1)];
    p[0] = 1.0L;
    for (int k = 1; k <= d_; ++k) p[k] = p[k - 1] * c * inv_[static_cast<std::size_t>(k)];
    if (x != y) {
      long double* q = &data_[(static_cast<std::size_t>(y) * a_ + static_cast<std::size_t>(x)) * static_cast<std::size_t>(d_ + 1)];
      std::copy(p, p + d_ + 1, q);
    }
  }

  const Geometry* geo_;
  int f_, a_, d_;
  std::vector<long double> data_;
  std::vector<long double> inv_;
  Atom run_[4];
};

long double pair_value(const Table& t, const Compiled& a, const Compiled& b) {
  const std::size_t nr = a.exps.size();
  const std::size_t nc = b.exps.size();
  if (nr == 0 && nc == 0) return 1.0L;
  if (nr == 1 && nc == 1) return t.pw(a.left_ids[0], b.right_ids[0])[a.exps[0]] * a.fact * b.fact;
  const auto pw = [&](std::size_t i, std::size_t j, int e) { return t.pw(a.left_ids[i], b.right_ids[j])[e]; };
  PairingSum<decltype(pw)> sum(a.exps, b.exps, pw);
  const long double v = sum.run();
  return v == 0.0L ? 0.0L : v * a.fact * b.fact;
}

// A stretch [a, a+h] of the time axis. Pieces inside one cell know their cell
// and their offset from its origin; others are located point by point.
struct Piece {
  long double a = 0.0L;
  long double h = 0.0L;
  std::ptrdiff_t cell = -1;
  long double left0 = 0.0L;
  bool special = false;
};

class Locator {
 public:
  explicit Locator(const NodeSet* nodes) : nodes_(nodes) {
    if (nodes_ && !nodes_->equidistant_n()) {
      for (std::size_t i = 0; i <= nodes_->cell_count(); ++i) values_.push_back(nodes_->node(i).value());
    }
  }

  CellPos at(const Piece& pc, long double frac) const {
    if (pc.cell >= 0) return nodes_->at_offset(static_cast<std::size_t>(pc.cell), pc.left0 + pc.h * frac);
    return loose(pc.a + pc.h * frac);
  }

  CellPos loose(long double s) const {
    if (!nodes_) {
      CellPos p;
      p.time = s;
      p.left = s;
      p.right = 1.0L - s;
      return p;
    }
    std::size_t cell;
    if (const auto& n = nodes_->equidistant_n()) {
      const long double x = std::floor(s * static_cast<long double>(*n));
      cell = x < 0 ? 0 : std::min(static_cast<std::size_t>(x), static_cast<std::size_t>(*n - 1));
      return nodes_->at_offset(cell, s - static_cast<long double>(cell) / static_cast<long double>(*n));
    }
    const auto it = std::upper_bound(values_.begin(), values_.end(), s);
    cell = it == values_.begin() ? 0 : static_cast<std::size_t>(it - values_.begin()) - 1;
    cell = std::min(cell, nodes_->cell_count() - 1);
    return nodes_->at_offset(cell, s - values_[cell]);
  }

 private:
  const NodeSet* nodes_;
  std::vector<long double> values_;
};

// Evaluates the building-block integrals for fixed pattern lists.
class Integrator {
 public:
  Integrator(const Geometry& geo, int max_deg) : geo_(geo), loc_(geo.nodes), table_(geo, max_deg), d_(max_deg) {}
  Integrator(const Integrator&) = default;

  // sum_{p,q} c_p int_piece g_q(s) <P_p, Q_q(s)> ds
  Block line(const CompiledList& bnd, const CompiledList& list, const Jobs& jobs, const Piece& pc, int order) {
    Block out(d_);
    const GaussRule& r = gauss_legendre(order);
    std::vector<long double> gb(list.bases.size());
    for (std::size_t i = 0; i < r.x.size(); ++i) {
      const CellPos pos = loc_.at(pc, r.x[i]);
      table_.set_side(true, pos);
      for (std::size_t b = 0; b < gb.size(); ++b) gb[b] = list.bases[b](pos.time);
      const long double w = r.w[i] * pc.h;
      for (const auto& [pi, qi] : jobs) {
        const Compiled& p = bnd.items[static_cast<std::size_t>(pi)];
        const Compiled& q = list.items[static_cast<std::size_t>(qi)];
        const long double coef = p.c * q.scale * gb[static_cast<std::size_t>(q.base)];
        if (coef == 0.0L) continue;
        const long double v = w * coef * pair_value(table_, p, q);
        out.deg[static_cast<std::size_t>(p.degree)] += v;
        out.abs += std::fabs(v);
      }
    }
    return out;
  }

  // int_{ps} int_{pu} sum g_p(s) g_q(u) <P_p(s), Q_q(u)> du ds
  Block square(const CompiledList& a, const CompiledList& b, const Jobs& jobs, const Piece& ps, const Piece& pu, int order) {
    Block out(d_);
    const GaussRule& r = gauss_legendre(order);
    std::vector<long double> ga(a.bases.size()), gb(b.bases.size());
    std::vector<CellPos> upos(r.x.size());
    std::vector<long double> gbs(r.x.size() * gb.size());
    for (std::size_t j = 0; j < r.x.size(); ++j) {
      upos[j] = loc_.at(pu, r.x[j]);
      for (std::size_t k = 0; k < gb.size(); ++k) gbs[j * gb.size() + k] = b.bases[k](upos[j].time);
    }
    for (std::size_t i = 0; i < r.x.size(); ++i) {
      const CellPos sp = loc_.at(ps, r.x[i]);
      table_.set_side(false, sp);
      for (std::size_t k = 0; k < ga.size(); ++k) ga[k] = a.bases[k](sp.time);
      for (std::size_t j = 0; j < r.x.size(); ++j) {
        table_.set_side(true, upos[j]);
        table_.couple();
        const long double w = r.w[i] * r.w[j] * ps.h * pu.h;
        accumulate(a, b, jobs, ga.data(), &gbs[j * gb.size()], w, out);
      }
    }
    return out;
  }

  // int_pc int_pc ... over the full square of one piece, via the triangle u < s
  Block tri(const CompiledList& a, const CompiledList& b, const Jobs& jobs, const Piece& pc, int order) {
    Block out(d_);
    const GaussRule& r = gauss_legendre(order);
    std::vector<long double> ga(a.bases.size()), gb(b.bases.size());
    for (std::size_t i = 0; i < r.x.size(); ++i) {
      const long double x = r.x[i];
      const CellPos sp = loc_.at(pc, x);
      table_.set_side(false, sp);
      for (std::size_t k = 0; k < ga.size(); ++k) ga[k] = a.bases[k](sp.time);
      for (std::size_t j = 0; j < r.x.size(); ++j) {
        const CellPos up = loc_.at(pc, x * r.x[j]);
        table_.set_side(true, up);
        table_.couple();
        for (std::size_t k = 0; k < gb.size(); ++k) gb[k] = b.bases[k](up.time);
        const long double w = 2.0L * r.w[i] * r.w[j] * pc.h * pc.h * x;
        accumulate(a, b, jobs, ga.data(), gb.data(), w, out);
      }
    }
    return out;
  }

  // int_pc sum g_p(s) g_q(s) <P_p(s), Q_q(s)> ds
  Block diag(const CompiledList& a, const Jobs& jobs, const Piece& pc, int order) {
    Block out(d_);
    const GaussRule& r = gauss_legendre(order);
    std::vector<long double> ga(a.bases.size());
    for (std::size_t i = 0; i < r.x.size(); ++i) {
      const CellPos sp = loc_.at(pc, r.x[i]);
      table_.set_side(false, sp);
      table_.set_side(true, sp);
      table_.couple();
      for (std::size_t k = 0; k < ga.size(); ++k) ga[k] = a.bases[k](sp.time);
      accumulate(a, a, jobs, ga.data(), ga.data(), r.w[i] * pc.h, out);
    }
    return out;
  }

  Block boundary(const CompiledList& bnd, const Jobs& jobs) {
    Block out(d_);
    for (const auto& [pi, qi] : jobs) {
      const Compiled& p = bnd.items[static_cast<std::size_t>(pi)];
      const Compiled& q = bnd.items[static_cast<std::size_t>(qi)];
      const long double v = p.c * q.c * pair_value(table_, p, q);
      out.deg[static_cast<std::size_t>(p.degree)] += v;
      out.abs += std::fabs(v);
    }
    return out;
  }

 private:
  void accumulate(const CompiledList& a, const CompiledList& b, const Jobs& jobs, const long double* ga,
                  const long double* gb, long double w, Block& out) const {
    for (const auto& [pi, qi] : jobs) {
      const Compiled& p = a.items[static_cast<std::size_t>(pi)];
      const Compiled& q = b.items[static_cast<std::size_t>(qi)];
      const long double coef = p.scale * ga[p.base] * q.scale * gb[q.base];
      if (coef == 0.0L) continue;
      const long double v = w * coef * pair_value(table_, p, q);
      out.deg[static_cast<std::size_t>(p.degree)] += v;
      out.abs += std::fabs(v);
    }
  }

  const Geometry& geo_;
  Locator loc_;
  Table table_;
  int d_;
};

bool converged(const Block& coarse, const Block& fine, long double rel_tol) {
  const long double a = coarse.total();
  const long double b = fine.total();
  const long double noise = 1e-15L * std::max(coarse.abs, fine.abs) + 1e-300L;
  return std::fabs(a - b) <= rel_tol * std::fabs(b) + noise;
}

// Runs `compute(order)` at increasing orders until two successive results agree.
template <class F>
Block refined(F&& compute, const QuadratureConfig& quad, const char* what) {
  int order = quad.order;
  Block coarse = compute(order);
  for (int level = 0; level < quad.max_levels; ++level) {
    Block fine = compute(order * 2);
    if (converged(coarse, fine, quad.rel_tol)) return fine;
    coarse = std::move(fine);
    order *= 2;
  }
  throw Error(Errc::quadrature_divergence, std::string(what) + " did not settle up to order " + std::to_string(order));
}

int max_degree_of(const Route& r) {
  int d = 0;
  for (const auto* list : {&r.bnd, &r.exact, &r.far})
    for (const auto& p : *list) d = std::max(d, p.degree);
  return d;
}

struct Partition {
  std::vector<Piece> pieces;
  std::vector<std::size_t> special_cells;
};

Partition make_partition(const Geometry& geo, bool corrections) {
  Partition part;
  const long double T = geo.horizon;
  std::vector<long double> pts{0.0L, T};
  for (long double t : geo.fixed_times)
    if (t > 0.0L && t < T) pts.push_back(t);
  if (corrections && geo.nodes) {
    for (std::size_t k = 0; k < geo.fixed_times.size(); ++k) {
      if (geo.fixed_on_node[k]) continue;
      const CellPos& pos = geo.fixed[2 * k].pos;
      if (pos.origin >= T) continue;
      part.special_cells.push_back(pos.cell);
    }
    std::sort(part.special_cells.begin(), part.special_cells.end());
    part.special_cells.erase(std::unique(part.special_cells.begin(), part.special_cells.end()), part.special_cells.end());
    for (std::size_t c : part.special_cells) {
      const CellPos o = geo.nodes->at_offset(c, 0.0L);
      pts.push_back(o.origin);
      if (o.origin + o.length < T) pts.push_back(o.origin + o.length);
    }
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    Piece pc;
    pc.a = pts[i];
    pc.h = pts[i + 1] - pts[i];
    if (pc.h <= 0.0L) continue;
    for (std::size_t c : part.special_cells) {
      const CellPos o = geo.nodes->at_offset(c, 0.0L);
      const long double mid = pc.a + pc.h / 2;
      if (mid > o.origin && mid < o.origin + o.length) {
        pc.special = true;
        pc.cell = static_cast<std::ptrdiff_t>(c);
        pc.left0 = pc.a - o.origin;
      }
    }
    part.pieces.push_back(pc);
  }
  return part;
}

bool parallel(const QuadratureConfig& q) { return q.execution == QuadratureConfig::Execution::parallel; }

}  // namespace

MomentResult route_moment(const Route& route, const Geometry& geo, const QuadratureConfig& quad) {
  if (quad.order < 2) throw Error(Errc::invalid_argument, "quadrature order must be at least 2");
  const int d = max_degree_of(route);
  const int f = static_cast<int>(geo.fixed.size());
  const CompiledList bnd = compile(route.bnd, f);
  const CompiledList ex = compile(route.exact, f);
  const CompiledList far = compile(route.far, f);
  const Jobs jb = make_jobs(bnd, bnd);
  const Jobs jbe = make_jobs(bnd, ex);
  const Jobs jbf = make_jobs(bnd, far);
  const Jobs jee = make_jobs(ex, ex);
  const Jobs jef = make_jobs(ex, far);
  const Jobs jff = make_jobs(far, far);

  Integrator base(geo, d);
  const bool corr = route.corrections && geo.nodes != nullptr;
  const Partition part = make_partition(geo, corr);
  const bool has_time = !ex.items.empty() || !far.items.empty();

  BlockSum q1(d), q2(d), q3(d);
  q1.add(base.boundary(bnd, jb));

  if (has_time) {
    std::vector<const Piece*> sp, other;
    for (const auto& pc : part.pieces) (pc.special ? sp : other).push_back(&pc);

    for (const auto& pc : part.pieces) {
      q2.add(refined([&](int o) { return base.line(bnd, far, jbf, pc, o); }, quad, "boundary/time integral"));
      for (std::size_t j = 0; j < part.pieces.size(); ++j) {
        const Piece& pu = part.pieces[j];
        if (&pu < &pc) continue;
        if (&pu == &pc) {
          q3.add(refined([&](int o) { return base.tri(far, far, jff, pc, o); }, quad, "diagonal time integral"));
        } else {
          Block b = refined([&](int o) { return base.square(far, far, jff, pc, pu, o); }, quad, "time integral");
          b *= 2.0L;
          q3.add(b);
        }
      }
    }

    if (corr) {
      for (const Piece* pc : sp) {
        Block b = refined([&](int o) { return base.line(bnd, ex, jbe, *pc, o); }, quad, "special cell integral");
        b -= refined([&](int o) { return base.line(bnd, far, jbf, *pc, o); }, quad, "special cell integral");
        q2.add(b);
      }
      for (std::size_t i = 0; i < sp.size(); ++i) {
        for (std::size_t j = i; j < sp.size(); ++j) {
          Block b(d);
          if (i == j) {
            b = refined([&](int o) { return base.tri(ex, ex, jee, *sp[i], o); }, quad, "special cell block");
            b -= refined([&](int o) { return base.tri(far, far, jff, *sp[i], o); }, quad, "special cell block");
          } else {
            b = refined([&](int o) { return base.square(ex, ex, jee, *sp[i], *sp[j], o); }, quad, "special cell block");
            b -= refined([&](int o) { return base.square(far, far, jff, *sp[i], *sp[j], o); }, quad, "special cell block");
            b *= 2.0L;
          }
          q3.add(b);
        }
        for (const Piece* pu : other) {
          Block b = refined([&](int o) { return base.square(ex, far, jef, *sp[i], *pu, o); }, quad, "special strip");
          b -= refined([&](int o) { return base.square(far, far, jff, *sp[i], *pu, o); }, quad, "special strip");
          b *= 2.0L;
          q3.add(b);
        }
      }

      // diagonal blocks of ordinary cells inside [0, T]
      std::vector<std::size_t> cells;
      const NodeSet& ns = *geo.nodes;
      for (std::size_t c = 0; c < ns.cell_count(); ++c) {
        if (ns.node(c + 1).value() > geo.horizon) break;
        if (std::binary_search(part.special_cells.begin(), part.special_cells.end(), c)) continue;
        cells.push_back(c);
      }
      const auto cell_block = [&](Integrator& it, std::size_t c, int order) {
        const CellPos o = ns.at_offset(c, 0.0L);
        Piece pc{o.origin, o.length, static_cast<std::ptrdiff_t>(c), 0.0L, false};
        Block b = it.tri(ex, ex, jee, pc, order);
        b -= it.tri(far, far, jff, pc, order);
        return b;
      };

      int order = quad.order;
      const std::size_t stride = std::max<std::size_t>(1, cells.size() / static_cast<std::size_t>(std::max(1, quad.diagonal_checks)));
      for (int level = 0;; ++level) {
        bool ok = true;
        for (std::size_t k = 0; k < cells.size() && ok; k += stride) {
          const Block coarse = cell_block(base, cells[k], order);
          const Block fine = cell_block(base, cells[k], order * 2);
          ok = converged(coarse, fine, quad.rel_tol);
        }
        if (ok) break;
        if (level + 1 >= quad.max_levels)
          throw Error(Errc::quadrature_divergence, "diagonal cell blocks did not settle up to order " + std::to_string(order * 2));
        order *= 2;
      }

      constexpr std::size_t kChunk = 512;
      const std::size_t chunks = (cells.size() + kChunk - 1) / kChunk;
      std::vector<Block> partial(chunks, Block(d));
      const bool par = parallel(quad);
#pragma omp parallel if (par)
      {
        Integrator local(base);
#pragma omp for schedule(dynamic, 1)
        for (std::ptrdiff_t ci = 0; ci < static_cast<std::ptrdiff_t>(chunks); ++ci) {
          BlockSum acc(d);
          const std::size_t lo = static_cast<std::size_t>(ci) * kChunk;
          const std::size_t hi = std::min(cells.size(), lo + kChunk);
          for (std::size_t k = lo; k < hi; ++k) acc.add(cell_block(local, cells[k], order));
          partial[static_cast<std::size_t>(ci)] = acc.value();
        }
      }
      for (const auto& b : partial) q3.add(b);
    }
  }

  MomentResult r;
  const Block b1 = q1.value(), b2 = q2.value(), b3 = q3.value();
  r.q1 = b1.total();
  r.q2 = b2.total();
  r.q3 = b3.total();
  r.by_degree.resize(static_cast<std::size_t>(d) + 1);
  for (std::size_t k = 0; k <= static_cast<std::size_t>(d); ++k) r.by_degree[k] = b1.deg[k] - 2.0L * b2.deg[k] + b3.deg[k];
  return r;
}

long double diagonal_moment(const std::vector<Pattern>& patterns, const Geometry& geo, const QuadratureConfig& quad) {
  int d = 0;
  for (const auto& p : patterns) d = std::max(d, p.degree);
  const CompiledList list = compile(patterns, static_cast<int>(geo.fixed.size()));
  const Jobs jobs = make_jobs(list, list);
  Integrator it(geo, d);
  const Partition part = make_partition(geo, false);
  CompensatedSum s;
  for (const auto& pc : part.pieces)
    s.add(refined([&](int o) { return it.diag(list, jobs, pc, o); }, quad, "diagonal integral").total());
  return s.value();
}

}  // namespace wicklab::detail

namespace wicklab::detail {

Geometry make_geometry(const NodeSet* nodes, const TimePoint& horizon, const std::vector<TimePoint>& taus) {
  Geometry geo;
  geo.nodes = nodes;
  geo.horizon = horizon.value();
  std::vector<TimePoint> times{horizon};
  times.insert(times.end(), taus.begin(), taus.end());
  for (const auto& t : times) {
    CellPos pos;
    if (nodes) {
      pos = nodes->locate(t);
    } else {
      pos.time = t.value();
      pos.left = pos.time;
      pos.right = 1.0L - pos.time;
    }
    geo.fixed.push_back(Atom{FactorKind::path, pos});
    geo.fixed.push_back(Atom{nodes ? FactorKind::interp : FactorKind::path, pos});
    geo.fixed_times.push_back(t.value());
    geo.fixed_on_node.push_back(!nodes || pos.left == 0.0L || pos.right == 0.0L);
  }
  return geo;
}

namespace {

int time_index(const SkorohodResult& y, const TimePoint& t) {
  for (std::size_t k = 0; k < y.taus.size(); ++k)
    if (y.taus[k] == t) return static_cast<int>(k) + 1;
  if (t == y.horizon) return 0;
  throw Error(Errc::invalid_argument, "boundary factor at " + t.to_string() + " is neither a tau nor the horizon");
}

}  // namespace

Route make_route(const SkorohodResult& y, RouteKind kind) {
  Route r;
  r.corrections = kind != RouteKind::plain;
  for (const auto& m : y.boundary.terms()) {
    Pattern path, lin;
    path.c = lin.c = m.coeff;
    for (const auto& [f, e] : m.factors) {
      if (f.kind() != FactorKind::path) throw Error(Errc::unsupported_factor, "boundary factor " + f.to_string());
      const int k = time_index(y, f.time());
      path.fixed.emplace_back(2 * k, e);
      lin.fixed.emplace_back(2 * k + 1, e);
    }
    path.degree = lin.degree = m.degree();
    lin.c = kind == RouteKind::residual ? -m.coeff : m.coeff;
    if (kind != RouteKind::projected) r.bnd.push_back(path);
    if (kind != RouteKind::plain) r.bnd.push_back(lin);
  }
  for (const auto& tt : y.time_terms) {
    Pattern wp, wl, lp, ll;  // running kind x fixed kind
    int degree = tt.run_exp;
    for (std::size_t k = 0; k < tt.tau_exps.size(); ++k) {
      const int e = tt.tau_exps[k];
      if (e == 0) continue;
      degree += e;
      const int id = 2 * (static_cast<int>(k) + 1);
      wp.fixed.emplace_back(id, e);
      lp.fixed.emplace_back(id, e);
      wl.fixed.emplace_back(id + 1, e);
      ll.fixed.emplace_back(id + 1, e);
    }
    for (Pattern* p : {&wp, &wl, &lp, &ll}) {
      p->degree = degree;
      p->run_exp = tt.run_exp;
      p->g = tt.g;
    }
    wp.run = wl.run = Run::path;
    lp.run = ll.run = Run::interp;
    switch (kind) {
      case RouteKind::plain:
        r.exact.push_back(wp);
        r.far.push_back(wp);
        break;
      case RouteKind::projected:
        r.exact.push_back(ll);
        r.far.push_back(wl);
        break;
      case RouteKind::residual:
        ll.g = ll.g.scaled(-1.0);
        wl.g = wl.g.scaled(-1.0);
        r.exact.push_back(wp);
        r.exact.push_back(ll);
        r.far.push_back(wp);
        r.far.push_back(wl);
        break;
    }
  }
  r.bnd = merge_patterns(std::move(r.bnd));
  r.exact = merge_patterns(std::move(r.exact));
  r.far = merge_patterns(std::move(r.far));
  return r;
}

}  // namespace wicklab::detail
