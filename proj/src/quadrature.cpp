#include "gwx/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace gwx {

QuadratureResult quadrature(const std::function<double(double)>& f, const Domain& domain, double abs_tol) {
  if (!(domain.hi >= domain.lo)) throw QuadratureError("quadrature: empty or invalid domain");
  std::vector<double> cuts{domain.lo};
  for (double b : domain.breakpoints) {
    if (b > domain.lo && b < domain.hi) cuts.push_back(b);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  cuts.push_back(domain.hi);

  using Rule = boost::math::quadrature::gauss_kronrod<double, 31>;
  QuadratureResult out;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (cuts[i] == cuts[i + 1]) continue;
    double err = 0.0;
    out.value += Rule::integrate(f, cuts[i], cuts[i + 1], 15, 1e-13, &err);
    out.abs_error += err;
  }
  if (!std::isfinite(out.value) || out.abs_error > abs_tol) {
    std::ostringstream msg;
    msg << "quadrature did not converge: value " << out.value << ", error estimate " << out.abs_error;
    throw QuadratureError(msg.str());
  }
  return out;
}

}  // namespace gwx
