#include "wicklab/gauss_kernel.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <sstream>

namespace wicklab {

namespace {

using i128 = __int128;

std::atomic<std::uint64_t> g_next_node_set_id{1};

long double rational_diff(const TimePoint& a, const TimePoint& b) {
  // a - b, exactly rounded when both carry tags
  if (a.is_exact() && b.is_exact()) {
    const Rational& x = *a.rational();
    const Rational& y = *b.rational();
    const i128 num = static_cast<i128>(x.num) * y.den - static_cast<i128>(y.num) * x.den;
    const i128 den = static_cast<i128>(x.den) * y.den;
    return static_cast<long double>(num) / static_cast<long double>(den);
  }
  return a.value() - b.value();
}

}  // namespace

Rational Rational::make(std::int64_t num, std::int64_t den) {
  if (den == 0) throw Error(Errc::invalid_argument, "zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  return Rational{num, den};
}

std::strong_ordering compare(const Rational& a, const Rational& b) {
  const i128 lhs = static_cast<i128>(a.num) * b.den;
  const i128 rhs = static_cast<i128>(b.num) * a.den;
  if (lhs < rhs) return std::strong_ordering::less;
  if (lhs > rhs) return std::strong_ordering::greater;
  return std::strong_ordering::equal;
}

TimePoint TimePoint::exact(std::int64_t num, std::int64_t den) {
  const Rational r = Rational::make(num, den);
  if (r.num < 0 || r.num > r.den)
    throw Error(Errc::invalid_argument, "time " + std::to_string(num) + "/" + std::to_string(den) + " outside [0,1]");
  TimePoint t;
  t.exact_ = r;
  t.value_ = r.value();
  return t;
}

TimePoint TimePoint::approx(long double value) {
  if (!(value >= 0.0L && value <= 1.0L))
    throw Error(Errc::invalid_argument, "time outside [0,1]");
  TimePoint t;
  t.value_ = value;
  return t;
}

TimePoint TimePoint::parse(std::string_view text) {
  const std::string s(text);
  if (s == "1/pi") return inv_pi();
  if (s == "1/sqrt2") return inv_sqrt2();
  if (const auto slash = s.find('/'); slash != std::string::npos) {
    std::int64_t p = 0, q = 0;
    const auto r1 = std::from_chars(s.data(), s.data() + slash, p);
    const auto r2 = std::from_chars(s.data() + slash + 1, s.data() + s.size(), q);
    if (r1.ec != std::errc{} || r1.ptr != s.data() + slash || r2.ec != std::errc{} || r2.ptr != s.data() + s.size())
      throw Error(Errc::invalid_argument, "cannot parse time '" + s + "'");
    return exact(p, q);
  }
  std::int64_t whole = 0;
  if (const auto r = std::from_chars(s.data(), s.data() + s.size(), whole); r.ec == std::errc{} && r.ptr == s.data() + s.size())
    return exact(whole, 1);
  char* end = nullptr;
  const long double v = std::strtold(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw Error(Errc::invalid_argument, "cannot parse time '" + s + "'");
  return approx(v);
}

std::string TimePoint::to_string() const {
  if (exact_) return std::to_string(exact_->num) + "/" + std::to_string(exact_->den);
  std::ostringstream os;
  os.precision(21);
  os << value_;
  return os.str();
}

bool operator==(const TimePoint& a, const TimePoint& b) {
  if (a.is_exact() && b.is_exact()) return *a.exact_ == *b.exact_;
  return a.value_ == b.value_;
}

std::strong_ordering operator<=>(const TimePoint& a, const TimePoint& b) {
  if (a.is_exact() && b.is_exact()) return compare(*a.exact_, *b.exact_);
  if (a.value_ < b.value_) return std::strong_ordering::less;
  if (a.value_ > b.value_) return std::strong_ordering::greater;
  return std::strong_ordering::equal;
}

TimePoint inv_pi() { return TimePoint::approx(std::strtold("0.3183098861837906715377675267450287240689", nullptr)); }
TimePoint inv_sqrt2() { return TimePoint::approx(std::strtold("0.7071067811865475244008443621048490392848", nullptr)); }

// ---------------------------------------------------------------------------

NodeSet NodeSet::equidistant(std::int64_t n) {
  if (n < 1) throw Error(Errc::invalid_argument, "equidistant node set needs n >= 1");
  NodeSet s;
  s.nodes_.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 1; i <= n; ++i) s.nodes_.push_back(TimePoint::exact(i, n));
  s.equidistant_n_ = n;
  s.id_ = g_next_node_set_id.fetch_add(1);
  return s;
}

NodeSet NodeSet::from_times(std::vector<TimePoint> times) {
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  if (times.empty() || times.back() != TimePoint::exact(1, 1))
    throw Error(Errc::invalid_argument, "node set must contain 1");
  if (times.front().value() <= 0.0L) throw Error(Errc::invalid_argument, "node times must lie in (0,1]");
  NodeSet s;
  s.nodes_ = std::move(times);
  s.id_ = g_next_node_set_id.fetch_add(1);
  // keep the fast path when the times happen to be i/n
  const auto n = static_cast<std::int64_t>(s.nodes_.size());
  bool equi = true;
  for (std::int64_t i = 0; i < n && equi; ++i)
    equi = s.nodes_[static_cast<std::size_t>(i)].is_exact() &&
           *s.nodes_[static_cast<std::size_t>(i)].rational() == Rational::make(i + 1, n);
  if (equi) s.equidistant_n_ = n;
  return s;
}

NodeSet NodeSet::merged_with(std::span<const TimePoint> extra) const {
  std::vector<TimePoint> all = nodes_;
  for (const auto& t : extra)
    if (t.value() > 0.0L) all.push_back(t);
  return from_times(std::move(all));
}

TimePoint NodeSet::node(std::size_t i) const { return i == 0 ? TimePoint::exact(0, 1) : nodes_.at(i - 1); }

long double NodeSet::cell_length(std::size_t i) const {
  if (equidistant_n_) return 1.0L / static_cast<long double>(*equidistant_n_);
  return rational_diff(node(i + 1), node(i));
}

CellPos NodeSet::at_offset(std::size_t cell, long double left) const {
  CellPos p;
  p.cell = cell;
  p.length = cell_length(cell);
  p.origin = equidistant_n_ ? static_cast<long double>(cell) / static_cast<long double>(*equidistant_n_)
                            : node(cell).value();
  p.left = left;
  p.right = p.length - left;
  p.time = p.origin + left;
  return p;
}

CellPos NodeSet::locate(const TimePoint& t) const {
  const std::size_t cells = nodes_.size();
  CellPos p;
  p.time = t.value();
  if (equidistant_n_) {
    const std::int64_t n = *equidistant_n_;
    const long double nl = static_cast<long double>(n);
    p.length = 1.0L / nl;
    if (t.is_exact()) {
      const Rational& r = *t.rational();
      const i128 np = static_cast<i128>(n) * r.num;
      i128 i = np / r.den;
      if (i == n) i = n - 1;
      const long double scale = static_cast<long double>(r.den) * nl;
      p.cell = static_cast<std::size_t>(i);
      p.left = static_cast<long double>(np - i * r.den) / scale;
      p.right = static_cast<long double>((i + 1) * r.den - np) / scale;
    } else {
      const long double x = nl * t.value();
      long double i = std::floor(x);
      long double f = x - i;
      if (t.value() == 1.0L) {
        i = nl - 1;
        f = 1.0L;
      }
      const bool endpoint = t.value() == 0.0L || t.value() == 1.0L;
      if (!endpoint && std::min(f, 1.0L - f) < kBoundaryEpsilon)
        throw Error(Errc::boundary_ambiguity, "time " + t.to_string() + " is within 1e-9 of a node of P_" + std::to_string(n));
      p.cell = static_cast<std::size_t>(i);
      p.left = f / nl;
      p.right = (1.0L - f) / nl;
    }
    p.origin = static_cast<long double>(p.cell) / nl;
    return p;
  }

  // first node strictly greater than t; nodes_[k] is node k+1
  const auto it = std::upper_bound(nodes_.begin(), nodes_.end(), t);
  std::size_t cell = static_cast<std::size_t>(it - nodes_.begin());
  if (cell >= cells) cell = cells - 1;
  const TimePoint lo = node(cell);
  const TimePoint hi = node(cell + 1);
  p.cell = cell;
  p.origin = lo.value();
  p.length = rational_diff(hi, lo);
  p.left = rational_diff(t, lo);
  p.right = rational_diff(hi, t);
  if (!t.is_exact() && t.value() != 0.0L && t.value() != 1.0L) {
    const auto near = [&](const TimePoint& node, long double gap) {
      if (gap >= kBoundaryEpsilon * p.length) return false;
      // a node copied from this very (untagged) time is certain
      return node.is_exact() || node.value() != t.value();
    };
    if (near(lo, p.left) || near(hi, p.right))
      throw Error(Errc::boundary_ambiguity, "time " + t.to_string() + " is within 1e-9 of a node");
  }
  return p;
}

bool NodeSet::contains(const TimePoint& t) const { return std::binary_search(nodes_.begin(), nodes_.end(), t); }

std::string NodeSet::describe() const {
  if (equidistant_n_) return "P_" + std::to_string(*equidistant_n_);
  return "nodes(" + std::to_string(nodes_.size()) + ")";
}

bool operator==(const NodeSet& a, const NodeSet& b) {
  if (&a == &b || a.id_ == b.id_) return true;
  return a.nodes_ == b.nodes_;
}

// ---------------------------------------------------------------------------

const char* kind_name(FactorKind kind) {
  switch (kind) {
    case FactorKind::path: return "W";
    case FactorKind::interp: return "Wlin";
    case FactorKind::bridge: return "B";
  }
  return "?";
}

namespace {

// an interpolated value at a node is the path value itself
Atom normalized(const Atom& a) {
  if (a.kind == FactorKind::interp && (a.pos.left == 0.0L || a.pos.right == 0.0L)) return Atom{FactorKind::path, a.pos};
  return a;
}

}  // namespace

long double atom_cov(const Atom& a_in, const Atom& b_in) {
  const Atom a = normalized(a_in);
  const Atom b = normalized(b_in);
  const bool ab = a.kind == FactorKind::bridge;
  const bool bb = b.kind == FactorKind::bridge;
  if (ab || bb) {
    if ((ab && b.kind == FactorKind::interp) || (bb && a.kind == FactorKind::interp)) return 0.0L;
    if (a.pos.cell != b.pos.cell) return 0.0L;
    const CellPos& early = a.pos.time <= b.pos.time ? a.pos : b.pos;
    const CellPos& late = a.pos.time <= b.pos.time ? b.pos : a.pos;
    return early.left * late.right / early.length;
  }
  if (a.kind == FactorKind::path && b.kind == FactorKind::path) return std::min(a.pos.time, b.pos.time);
  if (a.pos.cell == b.pos.cell) return a.pos.origin + a.pos.left * b.pos.left / a.pos.length;
  return std::min(a.pos.time, b.pos.time);
}

Factor Factor::path(TimePoint t) {
  Factor f;
  f.kind_ = FactorKind::path;
  f.time_ = t;
  return f;
}

Factor Factor::interp(TimePoint t, NodeSetPtr nodes) {
  if (!nodes) throw Error(Errc::invalid_argument, "interpolated factor needs a node set");
  Factor f;
  f.kind_ = FactorKind::interp;
  f.time_ = t;
  f.nodes_ = std::move(nodes);
  return f;
}

Factor Factor::bridge(TimePoint t, NodeSetPtr nodes) {
  if (!nodes) throw Error(Errc::invalid_argument, "bridge factor needs a node set");
  Factor f;
  f.kind_ = FactorKind::bridge;
  f.time_ = t;
  f.nodes_ = std::move(nodes);
  return f;
}

CellPos Factor::position(const NodeSet* nodes) const {
  const NodeSet* ns = nodes_ ? nodes_.get() : nodes;
  if (ns) return ns->locate(time_);
  CellPos p;
  p.time = time_.value();
  p.left = p.time;
  return p;
}

double Factor::variance() const {
  const Atom a{kind_, position(nullptr)};
  return static_cast<double>(atom_cov(a, a));
}

std::string Factor::to_string() const {
  std::string s = std::string(kind_name(kind_)) + "(" + time_.to_string();
  if (nodes_) s += "|" + nodes_->describe();
  return s + ")";
}

bool operator==(const Factor& a, const Factor& b) {
  if (a.kind_ != b.kind_ || a.time_ != b.time_) return false;
  if (a.nodes_ == b.nodes_) return true;
  if (!a.nodes_ || !b.nodes_) return false;
  return *a.nodes_ == *b.nodes_;
}

std::strong_ordering operator<=>(const Factor& a, const Factor& b) {
  if (auto c = static_cast<int>(a.kind_) <=> static_cast<int>(b.kind_); c != 0) return c;
  if (auto c = a.time_ <=> b.time_; c != 0) return c;
  const std::uint64_t ia = a.nodes_ ? a.nodes_->id() : 0;
  const std::uint64_t ib = b.nodes_ ? b.nodes_->id() : 0;
  if (a == b) return std::strong_ordering::equal;
  return ia <=> ib;
}

const NodeSet* common_node_set(std::span<const Factor* const> factors) {
  const NodeSet* found = nullptr;
  for (const Factor* f : factors) {
    if (!f->nodes()) continue;
    if (!found) {
      found = f->nodes().get();
    } else if (!(*found == *f->nodes())) {
      throw Error(Errc::mixed_node_sets, f->to_string() + " conditions on " + f->nodes()->describe() +
                                             " but another factor uses " + found->describe());
    }
  }
  return found;
}

double cov(const Factor& a, const Factor& b) {
  const Factor* pair[] = {&a, &b};
  const NodeSet* ns = common_node_set(pair);
  return static_cast<double>(atom_cov(Atom{a.kind(), a.position(ns)}, Atom{b.kind(), b.position(ns)}));
}

double bridge_cell_integral(const NodeSet& nodes, std::size_t i, std::size_t j) {
  if (i >= nodes.cell_count() || j >= nodes.cell_count()) throw Error(Errc::invalid_argument, "cell index out of range");
  if (i != j) return 0.0;
  const long double h = nodes.cell_length(i);
  return static_cast<double>(h * h * h / 12.0L);
}

double hermite(int k, double alpha, double x) {
  if (k < 0) throw Error(Errc::invalid_argument, "negative Hermite degree");
  if (k == 0) return 1.0;
  double prev = 1.0;
  double cur = x;
  for (int j = 1; j < k; ++j) {
    const double next = x * cur - alpha * j * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

long double fractional(std::int64_t n, const TimePoint& t) {
  if (n < 1) throw Error(Errc::invalid_argument, "fractional part needs n >= 1");
  if (t.is_exact()) {
    const Rational& r = *t.rational();
    const i128 np = static_cast<i128>(n) * r.num;
    return static_cast<long double>(np % r.den) / static_cast<long double>(r.den);
  }
  const long double x = static_cast<long double>(n) * t.value();
  const long double f = x - std::floor(x);
  if (std::min(f, 1.0L - f) < kBoundaryEpsilon)
    throw Error(Errc::boundary_ambiguity, "n t is within 1e-9 of an integer for n=" + std::to_string(n));
  return f;
}

}  // namespace wicklab
