#pragma once

// Optimal mean-square approximation errors given discrete path information,
// the asymptotic constants, and the built-in integrand families.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "wicklab/skorohod_calc.hpp"

namespace wicklab {

struct ErrorReport {
  std::string descriptor;  // node set description
  std::int64_t n = 0;      // equidistant parameter or cell count
  double e2 = 0.0;
  double e = 0.0;
  double truncation_bound = 0.0;
  /// (chaos degree, contribution to e2); for |W_t| reports the index is m.
  std::vector<std::pair<int, double>> components;
  // I1 - 2 I2 + I3 pieces of the residual route
  double i1 = 0.0, i2 = 0.0, i3 = 0.0;
  // projection identity cross-check, when requested
  bool projection_checked = false;
  double ey2 = 0.0, eyhat2 = 0.0, discrepancy = 0.0;
  /// Two taus off the nodes share a cell.
  bool pre_asymptotic = false;
};

/// E[(Y - E[Y | nodes])^2] for Y the Skorohod integral of u.
ErrorReport mse(const IntegrandSpec& u, const NodeSetPtr& nodes, const QuadratureConfig& quad = {},
                bool check_projection = true);

/// (1/sqrt 12) (int E[(L f)(s)^2] ds)^{1/2}.
double c1(const IntegrandSpec& u, const QuadratureConfig& quad = {});

struct C2Breakdown {
  double value = 0.0;
  std::vector<std::pair<std::size_t, double>> per_tau;  // (tau index, E[(delta d_i u)^2])
};

/// 1/2 (sum over untagged taus of E[(delta d_i u)^2])^{1/2}.
double c2(const IntegrandSpec& u, const QuadratureConfig& quad = {});
C2Breakdown c2_breakdown(const IntegrandSpec& u, const QuadratureConfig& quad = {});

/// 1/2 (int_0^T E[(d_x f)(s, W_s)^2] ds)^{1/2} for an adapted spec.
double ito_c2(const IntegrandSpec& u, const QuadratureConfig& quad = {});

/// Truncated chaos expansion of |W_t| up to W_t^{<>2M}, with its tail bound.
ChaosExpansion abs_chaos(const TimePoint& t, int M);

/// (|W_t| truncated at M) <> W_1 by the per-chaos closed form.
ErrorReport abs_mse(const TimePoint& t, const NodeSetPtr& nodes, int M);

/// Same without truncation: the series is complemented against its known sum
/// and only a geometric remainder, bounded in `truncation_bound`, is dropped.
ErrorReport abs_mse_full(const TimePoint& t, const NodeSetPtr& nodes);

/// E[(W_t^{<>(k-i)} <> (W_t^lin)^{<>i}) (W_t^{<>(k-j)} <> (W_t^lin)^{<>j})] with
/// var(W_t^lin) = t z.
double hypergeom_inner(int k, int i, int j, double t, double z);

// Built-in integrands ------------------------------------------------------

/// u_t = e^{W_t} on [0, horizon], chaos degrees 0..M.
IntegrandSpec ito_exp(const TimePoint& horizon, int M);
/// u_t = e^{W_tau}, constant in t, chaos degrees 0..M.
IntegrandSpec sko_exp(const TimePoint& tau, int M);
/// u_t = w(t) |W_t0| truncated at W^{<>2M}; w = 1, or w(s) = s when `linear_weight`.
IntegrandSpec abs_integrand(const TimePoint& t, int M, bool linear_weight);
/// sum_{k <= K} W_{{kT}}^{<>k} / k!.
IntegrandSpec xt_process(const TimePoint& T, int K);
/// sum_{1 <= m <= M} W_{{mT}}^{<>2m} / ((2m)^{1+q} (2m)!!).
IntegrandSpec xq_variable(const TimePoint& T, double q, int M);
/// Upper bound on E[I_q^2] for the untruncated variable.
double xq_moment_bound(const TimePoint& T, double q, int M);

/// Squared chaos norms of the integrand, for integrability_index: pairs
/// (k, ||pi_k(u)||^2 in L2(Omega x [0, T])).
std::vector<std::pair<int, double>> chaos_norms(const IntegrandSpec& u, const QuadratureConfig& quad = {});

}  // namespace wicklab
