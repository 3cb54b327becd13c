#pragma once

// Wick-analytic integrands and their Skorohod integrals, built by
// integration by parts in the running variable.

#include <optional>
#include <string>
#include <vector>

#include "wicklab/chaos_algebra.hpp"

namespace wicklab {

/// s -> sum c * s^p * exp(r s).
class CoeffFn {
 public:
  struct Term {
    double c = 0.0;
    int p = 0;
    double r = 0.0;
    friend bool operator==(const Term&, const Term&) = default;
  };

  CoeffFn() = default;
  explicit CoeffFn(std::vector<Term> terms);
  static CoeffFn constant(double c) { return CoeffFn({{c, 0, 0.0}}); }

  const std::vector<Term>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  long double operator()(long double s) const;
  CoeffFn derivative() const;
  /// Antiderivative vanishing at 0.
  CoeffFn antiderivative() const;
  CoeffFn scaled(double k) const;

  friend CoeffFn operator+(const CoeffFn& a, const CoeffFn& b);
  friend CoeffFn operator*(const CoeffFn& a, const CoeffFn& b);
  friend bool operator==(const CoeffFn&, const CoeffFn&) = default;

  std::string to_string() const;

 private:
  std::vector<Term> terms_;
};

/// u_t = sum a(t) * W_t^{<>l1} <> W_{tau_1}^{<>l_1} <> ... on [0, horizon].
struct IntegrandSpec {
  struct Term {
    CoeffFn coeff;
    int l1 = 0;
    std::vector<int> l;  // one exponent per tau
  };

  std::vector<TimePoint> taus;
  std::vector<Term> terms;
  TimePoint horizon = TimePoint::exact(1, 1);
  /// Bound on the squared norm of the truncated part of the integral.
  double tail_bound = 0.0;
  std::string label;

  /// Checks exponent vector lengths, distinct taus and nonnegative exponents.
  void validate() const;
  int max_degree() const;
};

/// Y = boundary - sum_i int_0^horizon g_i(s) * W_s^{<>run_exp_i} <> fixed_i ds.
struct SkorohodResult {
  struct TimeTerm {
    CoeffFn g;
    int run_exp = 0;
    std::vector<int> tau_exps;
  };

  ChaosExpansion boundary;
  std::vector<TimeTerm> time_terms;
  std::vector<TimePoint> taus;
  TimePoint horizon = TimePoint::exact(1, 1);
  double tail_bound = 0.0;
};

struct QuadratureConfig {
  enum class Execution { serial, parallel };
  int order = 8;
  double rel_tol = 1e-9;
  /// Number of order doublings allowed before giving up.
  int max_levels = 4;
  /// Diagonal cell blocks re-checked at doubled order (strided sample).
  int diagonal_checks = 256;
  Execution execution = Execution::parallel;
};

SkorohodResult skorohod_integral(const IntegrandSpec& u);

/// E[Y^2].
double second_moment(const SkorohodResult& y, const QuadratureConfig& quad = {});

/// Wick-coordinate derivative in the running variable (i = 1) or tau_{i-1}.
IntegrandSpec partial_x(const IntegrandSpec& u, int i);

/// One term a'(t) * W_t^{<>l1} <> W_tau^{<>l} of L f, the dt-part of the Ito
/// formula in Wick coordinates.
struct LTerm {
  CoeffFn g;
  int run_exp = 0;
  std::vector<int> tau_exps;
};
std::vector<LTerm> wick_L(const IntegrandSpec& u);

/// Y as an expansion at a fixed running time s (for tests): the shape of a
/// time term with W_s substituted.
ChaosExpansion time_term_at(const SkorohodResult& y, std::size_t term, const TimePoint& s);

}  // namespace wicklab
