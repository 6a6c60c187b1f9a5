#pragma once

#include <cstdint>

namespace gwx::series {

/// Sum of n^{-s} over n >= m, for s > 1 and m >= 1.
///
/// Terms up to m + direct_terms are added explicitly (smallest first, with
/// compensation); the remainder is the Euler-Maclaurin tail
/// N^{1-s}/(s-1) + N^{-s}/2 + Bernoulli corrections, whose truncation error
/// is far below 1e-14 once N exceeds a few hundred.
double power_tail(double s, std::int64_t m, std::int64_t direct_terms = 4096);

//! Riemann zeta for s > 1, by direct summation to 10^6 plus Euler-Maclaurin tail.
double zeta(double s);

//! Neumaier-compensated accumulator.
class KahanSum {
 public:
  void add(double x) noexcept;
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace gwx::series
