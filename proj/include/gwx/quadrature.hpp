#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

namespace gwx {

class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

//! [lo, hi] with interior breakpoints where the integrand may be nonsmooth; hi may be +inf.
struct Domain {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<double> breakpoints;
};

struct QuadratureResult {
  double value = 0.0;
  double abs_error = 0.0;
};

inline constexpr double kQuadratureTolerance = 1e-10;

/// Adaptive Gauss-Kronrod (15/31 point) on each piece of the domain.
/// Throws QuadratureError when the summed error estimate exceeds abs_tol.
QuadratureResult quadrature(const std::function<double(double)>& f, const Domain& domain,
                            double abs_tol = kQuadratureTolerance);

}  // namespace gwx
