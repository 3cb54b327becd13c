#pragma once

// Wick monomials over Factors and finite chaos expansions.

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wicklab/gauss_kernel.hpp"

namespace wicklab {

/// coeff * X_1^{<>l_1} <> ... <> X_r^{<>l_r}, factors sorted and merged.
struct WickMonomial {
  double coeff = 0.0;
  std::vector<std::pair<Factor, int>> factors;

  /// Canonicalizes: sorts, merges repeated factors, drops zero exponents and
  /// collapses to the zero element when a degenerate factor appears.
  static WickMonomial make(double coeff, std::vector<std::pair<Factor, int>> factors);
  static WickMonomial constant(double c) { return WickMonomial{c, {}}; }

  int degree() const;
  bool is_zero() const { return coeff == 0.0; }
  /// Same factor multiset (coefficients ignored).
  bool same_shape(const WickMonomial& other) const;
  std::string to_string() const;
};

class ChaosExpansion {
 public:
  ChaosExpansion() = default;
  explicit ChaosExpansion(std::vector<WickMonomial> terms, double tail_bound = 0.0);

  static ChaosExpansion constant(double c);
  static ChaosExpansion single(const Factor& f, int exponent = 1, double coeff = 1.0);

  const std::vector<WickMonomial>& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }
  int max_degree() const;

  /// Bound on the squared L2 norm of whatever was truncated away.
  double tail_bound() const { return tail_bound_; }
  void set_tail_bound(double bound) { tail_bound_ = bound; }

  ChaosExpansion scaled(double c) const;
  friend ChaosExpansion operator+(const ChaosExpansion& a, const ChaosExpansion& b);
  friend ChaosExpansion operator-(const ChaosExpansion& a, const ChaosExpansion& b);

  std::string to_string() const;

 private:
  std::vector<WickMonomial> terms_;
  double tail_bound_ = 0.0;
};

/// E[a b] by the multiplicity-matrix form of the pairing sum.
double wick_inner(const WickMonomial& a, const WickMonomial& b);
long double wick_inner_ld(const WickMonomial& a, const WickMonomial& b);

double inner(const ChaosExpansion& x, const ChaosExpansion& y);
double norm(const ChaosExpansion& x);

ChaosExpansion wick_mul(const ChaosExpansion& x, const ChaosExpansion& y);
ChaosExpansion chaos_project(const ChaosExpansion& x, int k);

/// E[x | W_s, s in nodes]; x must consist of Path factors only.
ChaosExpansion condition(const ChaosExpansion& x, const NodeSetPtr& nodes);

/// W_t^{<>k} - (W_t^lin)^{<>k} written as B_t <> sum_j W_t^{<>(k-j)} <> (W_t^lin)^{<>(j-1)}.
ChaosExpansion bridge_expand(const TimePoint& t, const NodeSetPtr& nodes, int k);

/// sum (k+1) * squared norm of the k-th chaos.
double integrability_index(std::span<const std::pair<int, double>> pi_norms);

}  // namespace wicklab
