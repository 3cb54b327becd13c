#pragma once

// Elementary Gaussian factors of a Brownian path on [0,1] and their
// covariances with respect to a finite conditioning node set.
//
// Three kinds of factor exist for a time t and node set S:
//   Path(t)    W_t
//   Interp(t)  E[W_t | W_s, s in S], the piecewise linear interpolation
//   Bridge(t)  W_t - Interp(t)
// All covariances are cell-local: a bridge never correlates with anything
// outside its own cell and never with an interpolated value.

#include <compare>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wicklab/error.hpp"

namespace wicklab {

/// Reduced fraction with positive denominator.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  static Rational make(std::int64_t num, std::int64_t den);
  long double value() const { return static_cast<long double>(num) / static_cast<long double>(den); }
  friend bool operator==(const Rational&, const Rational&) = default;
};

std::strong_ordering compare(const Rational& a, const Rational& b);

/// A time in [0,1], optionally tagged with its exact rational value.
class TimePoint {
 public:
  TimePoint() = default;

  static TimePoint exact(std::int64_t num, std::int64_t den);
  static TimePoint approx(long double value);
  /// Parses a decimal string at extended precision; "p/q" yields an exact tag.
  static TimePoint parse(std::string_view text);

  long double value() const { return value_; }
  const std::optional<Rational>& rational() const { return exact_; }
  bool is_exact() const { return exact_.has_value(); }

  std::string to_string() const;

  friend bool operator==(const TimePoint& a, const TimePoint& b);
  friend std::strong_ordering operator<=>(const TimePoint& a, const TimePoint& b);

 private:
  long double value_ = 0.0L;
  std::optional<Rational> exact_;
};

/// Named irrational constants given to 40 significant digits.
TimePoint inv_pi();
TimePoint inv_sqrt2();

/// Location of a time inside the cell [origin, origin + length] of a node set.
/// `left` = t - origin and `right` = origin + length - t are kept separately so
/// bridge variances do not suffer cancellation.
struct CellPos {
  std::size_t cell = 0;
  long double time = 0.0L;
  long double origin = 0.0L;
  long double left = 0.0L;
  long double right = 0.0L;
  long double length = 1.0L;
};

/// Relative distance to a cell boundary below which untagged times are rejected.
inline constexpr long double kBoundaryEpsilon = 1e-9L;

/// Strictly increasing conditioning times in (0,1] ending at 1, with the
/// implicit anchor W_0 = 0.
class NodeSet {
 public:
  static NodeSet equidistant(std::int64_t n);
  static NodeSet from_times(std::vector<TimePoint> times);

  /// Union with extra conditioning times (e.g. P_n together with fixed taus).
  NodeSet merged_with(std::span<const TimePoint> extra) const;

  std::size_t cell_count() const { return nodes_.size(); }
  /// Node i for i in [0, cell_count()]; node 0 is the anchor 0.
  TimePoint node(std::size_t i) const;
  long double cell_length(std::size_t i) const;
  const std::optional<std::int64_t>& equidistant_n() const { return equidistant_n_; }

  /// Throws BoundaryAmbiguity for an untagged time too close to a cell boundary.
  CellPos locate(const TimePoint& t) const;
  /// Position of a point given directly by its cell and offset from the cell origin.
  CellPos at_offset(std::size_t cell, long double left) const;
  bool contains(const TimePoint& t) const;

  std::uint64_t id() const { return id_; }
  std::string describe() const;

  friend bool operator==(const NodeSet& a, const NodeSet& b);

 private:
  std::vector<TimePoint> nodes_;  // excludes the anchor 0
  std::optional<std::int64_t> equidistant_n_;
  std::uint64_t id_ = 0;
};

using NodeSetPtr = std::shared_ptr<const NodeSet>;

enum class FactorKind { path = 0, interp = 1, bridge = 2 };

const char* kind_name(FactorKind kind);

/// Lightweight (kind, position) pair used by the inner loops; positions must
/// come from the same node set for conditioned kinds.
struct Atom {
  FactorKind kind = FactorKind::path;
  CellPos pos;
};

long double atom_cov(const Atom& a, const Atom& b);

/// A centered Gaussian built from the path: W_t, W_t^lin or B_t.
class Factor {
 public:
  static Factor path(TimePoint t);
  static Factor interp(TimePoint t, NodeSetPtr nodes);
  static Factor bridge(TimePoint t, NodeSetPtr nodes);

  FactorKind kind() const { return kind_; }
  const TimePoint& time() const { return time_; }
  const NodeSetPtr& nodes() const { return nodes_; }

  /// Position within the node set (Path factors use `nodes` when supplied).
  CellPos position(const NodeSet* nodes) const;
  double variance() const;
  bool degenerate() const { return variance() == 0.0; }

  std::string to_string() const;

  friend bool operator==(const Factor& a, const Factor& b);
  /// Canonical order: kind, time, node-set id.
  friend std::strong_ordering operator<=>(const Factor& a, const Factor& b);

 private:
  FactorKind kind_ = FactorKind::path;
  TimePoint time_;
  NodeSetPtr nodes_;
};

/// The node set shared by the conditioned factors in the list, or nullptr.
/// Throws MixedNodeSets when two conditioned factors disagree.
const NodeSet* common_node_set(std::span<const Factor* const> factors);

/// E[ab].
double cov(const Factor& a, const Factor& b);

/// Double integral of E[B_s B_t] over cells i and j.
double bridge_cell_integral(const NodeSet& nodes, std::size_t i, std::size_t j);

/// h^k_alpha(x) by the three-term recurrence.
double hermite(int k, double alpha, double x);

/// {n t}; exact for rational-tagged times.
long double fractional(std::int64_t n, const TimePoint& t);

}  // namespace wicklab
