#pragma once

// Second moments of variables of the form
//   Z = sum_p c_p * P_p  -  int_0^T sum_q g_q(s) * Q_q(s) ds
// where P_p are Wick monomials over a fixed set of Gaussian atoms and Q_q(s)
// additionally carries a running factor at time s (path or interpolated).
//
// E[Z^2] = Q1 - 2 Q2 + Q3 with Q1 the boundary Gram sum, Q2 a single and Q3
// a double time integral. Patterns come in two flavours: `exact`, valid
// everywhere, and `far`, which agrees with `exact` whenever the running
// points lie in distinct cells that contain no fixed time. The double
// integral is taken over the far integrand on a coarse partition and
// corrected on the diagonal cells and on the cells holding fixed times.

#include <cstddef>
#include <utility>
#include <vector>

#include "wicklab/gauss_kernel.hpp"
#include "wicklab/skorohod_calc.hpp"

namespace wicklab::detail {

struct GaussRule {
  std::vector<long double> x;  // nodes on [0,1]
  std::vector<long double> w;
};

/// Gauss-Legendre rule on [0,1]; cached, thread safe.
const GaussRule& gauss_legendre(int order);

enum class Run { none, path, interp };

struct Pattern {
  CoeffFn g;             // time patterns
  long double c = 0.0L;  // boundary patterns
  Run run = Run::none;
  int run_exp = 0;
  std::vector<std::pair<int, int>> fixed;  // (fixed atom index, exponent)
  int degree = 0;
};

/// Merges patterns with identical structure and drops vanishing ones.
std::vector<Pattern> merge_patterns(std::vector<Pattern> patterns);

struct Route {
  std::vector<Pattern> bnd;
  std::vector<Pattern> exact;
  std::vector<Pattern> far;
  /// false when exact and far coincide everywhere (no conditioning)
  bool corrections = true;
};

struct Geometry {
  const NodeSet* nodes = nullptr;
  long double horizon = 1.0L;
  std::vector<Atom> fixed;  // positions resolved against `nodes`
  std::vector<long double> fixed_times;
  std::vector<bool> fixed_on_node;
};

struct MomentResult {
  long double q1 = 0.0L;
  long double q2 = 0.0L;
  long double q3 = 0.0L;
  std::vector<long double> by_degree;  // Z^2 split by chaos degree
  long double value() const { return q1 - 2.0L * q2 + q3; }
};

/// Atoms 2k (path) and 2k+1 (interpolated) for the horizon (k = 0) and each
/// tau (k >= 1), resolved against `nodes` when given.
Geometry make_geometry(const NodeSet* nodes, const TimePoint& horizon, const std::vector<TimePoint>& taus);

enum class RouteKind {
  residual,   // Y - E[Y | nodes]
  plain,      // Y
  projected,  // E[Y | nodes]
};

Route make_route(const SkorohodResult& y, RouteKind kind);

MomentResult route_moment(const Route& route, const Geometry& geo, const QuadratureConfig& quad);

/// int_0^T E[(sum_q g_q(s) Q_q(s))^2] ds with every running factor at the same s.
long double diagonal_moment(const std::vector<Pattern>& patterns, const Geometry& geo, const QuadratureConfig& quad);

/// Neumaier compensated sum.
struct CompensatedSum {
  long double sum = 0.0L;
  long double comp = 0.0L;
  void add(long double v) {
    const long double t = sum + v;
    if ((sum >= 0 ? sum : -sum) >= (v >= 0 ? v : -v))
      comp += (sum - t) + v;
    else
      comp += (v - t) + sum;
    sum = t;
  }
  long double value() const { return sum + comp; }
};

}  // namespace wicklab::detail
