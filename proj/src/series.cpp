#include "gwx/series.hpp"

#include <cmath>
#include <stdexcept>

namespace gwx::series {

void KahanSum::add(double x) noexcept {
  const double t = sum_ + x;
  if (std::abs(sum_) >= std::abs(x)) {
    comp_ += (sum_ - t) + x;
  } else {
    comp_ += (x - t) + sum_;
  }
  sum_ = t;
}

namespace {

// Euler-Maclaurin remainder of sum_{n >= N} n^{-s}.
double euler_maclaurin_tail(double s, double N) {
  // B2/2!, B4/4!, B6/6!, B8/8!
  constexpr double b[] = {1.0 / 12.0, -1.0 / 720.0, 1.0 / 30240.0, -1.0 / 1209600.0};
  double result = std::pow(N, 1.0 - s) / (s - 1.0) + 0.5 * std::pow(N, -s);
  // d^{2j-1}/dn^{2j-1} n^{-s} = -s(s+1)...(s+2j-2) n^{-s-2j+1}
  double rising = s;
  double power = std::pow(N, -s - 1.0);
  for (int j = 0; j < 4; ++j) {
    result += b[j] * rising * power;
    rising *= (s + 2.0 * j + 1.0) * (s + 2.0 * j + 2.0);
    power /= N * N;
  }
  return result;
}

}  // namespace

double power_tail(double s, std::int64_t m, std::int64_t direct_terms) {
  if (!(s > 1.0)) throw std::invalid_argument("power_tail: exponent must exceed 1");
  if (m < 1) throw std::invalid_argument("power_tail: start index must be >= 1");
  const std::int64_t end = m + direct_terms;  // first index handled by the tail formula
  KahanSum acc;
  acc.add(euler_maclaurin_tail(s, static_cast<double>(end)));
  for (std::int64_t n = end - 1; n >= m; --n) acc.add(std::pow(static_cast<double>(n), -s));
  return acc.value();
}

double zeta(double s) { return power_tail(s, 1, 1'000'000); }

}  // namespace gwx::series
