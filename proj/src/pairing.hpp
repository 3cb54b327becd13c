#pragma once

// Multiplicity-matrix evaluation of Gaussian pairing sums.
//
// For factors X_i with exponents l_i and Y_j with exponents m_j the pairing
// sum over all bijections equals
//   prod l_i! prod m_j! * sum_A prod_ij C_ij^{A_ij} / A_ij!
// over nonnegative integer matrices A with row sums l and column sums m.
// `pw(i, j, a)` must return C_ij^a / a!.

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "wicklab/error.hpp"

namespace wicklab::detail {

inline constexpr int kMaxFactorial = 1754;

/// n! in extended precision, n <= kMaxFactorial.
long double factorial(int n);

template <class Pow>
class PairingSum {
 public:
  PairingSum(std::span<const int> rows, std::span<const int> cols, const Pow& pw)
      : rows_(rows), cols_(cols), pw_(pw) {}

  /// sum_A prod pw(i,j,A_ij); caller multiplies by the factorials.
  long double run() {
    const std::size_t nr = rows_.size();
    const std::size_t nc = cols_.size();
    if (nr == 0 || nc == 0) return (total(rows_) == 0 && total(cols_) == 0) ? 1.0L : 0.0L;
    if (total(rows_) != total(cols_)) return 0.0L;
    if (nr == 1) {
      long double p = 1.0L;
      for (std::size_t j = 0; j < nc; ++j) p *= pw_(0, j, cols_[j]);
      return p;
    }
    if (nc == 1) {
      long double p = 1.0L;
      for (std::size_t i = 0; i < nr; ++i) p *= pw_(i, 0, rows_[i]);
      return p;
    }
    if (nc > colrem_.size()) throw Error(Errc::invalid_argument, "too many distinct factors in pairing");
    for (std::size_t j = 0; j < nc; ++j) colrem_[j] = cols_[j];
    return rec(0, 0, rows_[0]);
  }

 private:
  static int total(std::span<const int> v) {
    int s = 0;
    for (int x : v) s += x;
    return s;
  }

  long double rec(std::size_t i, std::size_t j, int rem) {
    const std::size_t nc = cols_.size();
    if (i + 1 == rows_.size()) {
      long double p = 1.0L;
      for (std::size_t c = 0; c < nc && p != 0.0L; ++c) p *= pw_(i, c, colrem_[c]);
      return p;
    }
    if (j + 1 == nc) {
      if (rem > colrem_[j]) return 0.0L;
      const long double p = pw_(i, j, rem);
      if (p == 0.0L) return 0.0L;
      colrem_[j] -= rem;
      const long double v = p * rec(i + 1, 0, rows_[i + 1]);
      colrem_[j] += rem;
      return v;
    }
    int after = 0;
    for (std::size_t c = j + 1; c < nc; ++c) after += colrem_[c];
    const int lo = rem > after ? rem - after : 0;
    const int hi = rem < colrem_[j] ? rem : colrem_[j];
    long double sum = 0.0L;
    for (int a = lo; a <= hi; ++a) {
      const long double p = pw_(i, j, a);
      if (p == 0.0L) continue;
      colrem_[j] -= a;
      sum += p * rec(i, j + 1, rem - a);
      colrem_[j] += a;
    }
    return sum;
  }

  std::span<const int> rows_;
  std::span<const int> cols_;
  const Pow& pw_;
  std::array<int, 64> colrem_;  // filled by run()
};

/// Pairing sum from a dense covariance matrix (row-major, rows x cols),
/// factorial prefactor included.
long double pairing_from_cov(std::span<const int> rows, std::span<const int> cols,
                             std::span<const long double> cov);

}  // namespace wicklab::detail
