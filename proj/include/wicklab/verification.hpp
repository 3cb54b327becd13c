#pragma once

// Independent oracles: permutation-sum inner products, reproducible Gaussian
// sampling of factor families, pathwise Wick monomials and Monte Carlo
// orthogonality checks of the projection residual.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "wicklab/chaos_algebra.hpp"
#include "wicklab/skorohod_calc.hpp"

namespace wicklab {

inline constexpr int kBruteMaxDegree = 8;

/// Literal sum over permutations; degree above kBruteMaxDegree is refused.
double brute_inner(const WickMonomial& a, const WickMonomial& b);

/// Ordinary product a * b as a sum of Wick monomials (all partial contractions).
ChaosExpansion ordinary_product(const WickMonomial& a, const WickMonomial& b);

/// Counter-based uniform in (0,1): the k-th output of SplitMix64 started at
/// `seed`, top 53 bits, shifted by half an ulp.
double counter_uniform(std::uint64_t seed, std::uint64_t counter);
/// Standard normal by inverse CDF of counter_uniform.
double counter_normal(std::uint64_t seed, std::uint64_t counter);

struct SampleBatch {
  std::uint64_t seed = 0;
  std::size_t count = 0;
  std::vector<Factor> factors;
  Eigen::MatrixXd values;  // count x factors.size()
  bool regularized = false;
};

/// Jointly Gaussian samples of `factors`. Row i uses normals with counters
/// (first_row + i) * factors.size() + j, so batches can be drawn in pieces.
SampleBatch sample_factors(const std::vector<Factor>& factors, std::size_t count, std::uint64_t seed,
                           std::uint64_t first_row = 0);

/// Pathwise values of m on each sample row.
std::vector<double> evaluate_monomial(const WickMonomial& m, const SampleBatch& batch);
std::vector<double> evaluate(const ChaosExpansion& x, const SampleBatch& batch);

/// Product of powers of node values W_{node(i)}.
struct TestFunction {
  std::vector<std::pair<std::size_t, int>> powers;  // (node index >= 1, exponent)
  std::string label() const;
};

struct ProjectionEstimate {
  std::string label;
  double mean = 0.0;
  double se = 0.0;
  double z = 0.0;
  bool pass = false;
};

struct ProjectionReport {
  std::size_t count = 0;
  std::uint64_t seed = 0;
  std::vector<ProjectionEstimate> estimates;
  bool passed() const;
};

/// Default test functions: 1, W_1, and products of two node values.
std::vector<TestFunction> default_test_functions(const NodeSet& nodes);

/// Monte Carlo estimate of E[(Y - E[Y | nodes]) phi] for each test function.
/// Only integrands whose Skorohod integral has no time term are supported.
ProjectionReport projection_check(const IntegrandSpec& u, const NodeSetPtr& nodes,
                                  const std::vector<TestFunction>& test_fns, std::size_t count, std::uint64_t seed);

}  // namespace wicklab

namespace wicklab {

/// Portable draws from the counter generator (no std distributions).
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}
  double uniform() { return counter_uniform(seed_, counter_++); }
  /// Uniform integer in [0, n).
  std::int64_t below(std::int64_t n);

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

/// Random monomial of the given degree over at most `max_factors` distinct
/// factors of mixed kinds, conditioned kinds using `nodes`.
WickMonomial random_monomial(CounterRng& rng, const NodeSetPtr& nodes, int degree, int max_factors);

struct OracleSuite {
  std::size_t pairs = 0;
  std::size_t failures = 0;
  double worst_rel = 0.0;
};

/// wick_inner against brute_inner on random pairs sharing a node set.
OracleSuite oracle_suite(std::size_t pairs, int max_degree, std::uint64_t seed, double rel_tol);

struct MomentSuite {
  std::size_t monomials = 0;
  std::size_t failures = 0;
  double worst_z = 0.0;
};

/// Empirical E[m] and E[m^2] against 0 and wick_inner(m, m), 4 standard errors.
/// The standard errors are exact: sqrt(E[m^2] / N) and
/// sqrt((E[m^4] - E[m^2]^2) / N) with E[m^4] = ||m * m||^2.
MomentSuite moment_suite(std::size_t monomials, int max_degree, std::size_t count, std::uint64_t seed);

}  // namespace wicklab
