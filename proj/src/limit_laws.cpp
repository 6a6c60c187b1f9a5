#include "gwx/limit_laws.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include <boost/math/special_functions/gamma.hpp>

#include "gwx/quadrature.hpp"

namespace gwx {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_sigma(double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be > 0");
}

double lambda_of(const CoxIntensity& intensity, double x) {
  return std::visit(
      [x](const auto& law) -> double {
        using T = std::decay_t<decltype(law)>;
        if constexpr (std::is_same_v<T, ParetoIntensity>) {
          if (!(x > 0.0)) return kInf;
          return std::pow(x, -law.alpha);
        } else {
          return law.a * std::exp(-law.b * x);
        }
      },
      intensity);
}

// P(Poisson(mu) < j)
double poisson_below(int j, double mu) {
  if (mu == 0.0) return 1.0;
  if (mu == kInf) return 0.0;
  if (j > 32) return boost::math::gamma_q(static_cast<double>(j), mu);
  double term = std::exp(-mu);
  double sum = term;
  for (int i = 1; i < j; ++i) {
    term *= mu / i;
    sum += term;
  }
  return std::min(sum, 1.0);
}

// tau has Levy scale 1/sigma^2. With t = 1 / (2 sigma^2 w^2) its law becomes
// (2/sqrt(pi)) e^{-w^2} dw on (0, inf), and tau <= t_cap becomes w >= w_cap(t_cap).
double w_cap(double sigma, double t_cap) { return 1.0 / (sigma * std::sqrt(2.0 * t_cap)); }

double mixture(const CoxIntensity& intensity, const StableHalf& sh, int j, double x, double w_lo) {
  if (j < 1) throw std::invalid_argument("order j must be >= 1");
  require_sigma(sh.sigma);
  const double lam = lambda_of(intensity, x);
  if (lam == kInf) return 0.0;
  if (lam == 0.0) return 1.0;
  const double c = lam / (2.0 * sh.sigma * sh.sigma);  // tau Lambda = c / w^2
  const double peak = std::pow(c, 0.25);
  constexpr double kWMax = 9.0;  // e^{-81} is below every tolerance in use
  if (w_lo >= kWMax) return 0.0;
  auto integrand = [c, j](double w) {
    if (w <= 0.0) return 0.0;
    return std::exp(-w * w) * poisson_below(j, c / (w * w));
  };
  const auto r = quadrature(integrand, Domain{w_lo, kWMax, {0.5 * peak, peak, 2.0 * peak, std::sqrt(static_cast<double>(j)) * peak}});
  return std::clamp(2.0 / std::sqrt(std::numbers::pi) * r.value, 0.0, 1.0);
}

}  // namespace

double frechet_cdf(const FrechetLimit& law, double x) {
  require_sigma(law.sigma);
  if (!(x > 0.0)) return 0.0;
  if (x == kInf) return 1.0;
  return std::exp(-std::numbers::sqrt2 / law.sigma * std::pow(x, -0.5 * law.alpha));
}

double gumbel_cdf(const GumbelLimit& law, double x) {
  require_sigma(law.sigma);
  return std::exp(-std::numbers::sqrt2 / law.sigma * std::sqrt(law.a) * std::exp(-0.5 * law.b * x));
}

double stable_half_pdf(const StableHalf& sh, double t) {
  require_sigma(sh.sigma);
  if (!(t > 0.0) || t == kInf) return 0.0;
  const double s2 = sh.sigma * sh.sigma;
  return 1.0 / (sh.sigma * std::sqrt(2.0 * std::numbers::pi * t * t * t)) * std::exp(-1.0 / (2.0 * s2 * t));
}

double stable_half_cdf(const StableHalf& sh, double t) {
  require_sigma(sh.sigma);
  if (!(t > 0.0)) return 0.0;
  return std::erfc(w_cap(sh.sigma, t));
}

double truncated_stable_cdf(const StableHalf& sh, double t, double t_cap) {
  if (!(t_cap > 0.0)) throw std::invalid_argument("t_cap must be > 0");
  return stable_half_cdf(sh, std::min(t, t_cap)) / stable_half_cdf(sh, t_cap);
}

double stable_half_sample(const StableHalf& sh, RandomStream& rng) {
  require_sigma(sh.sigma);
  const double u1 = 1.0 - rng.uniform();  // (0, 1]
  const double u2 = rng.uniform();
  const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  return 1.0 / (sh.sigma * sh.sigma * z * z);
}

double cox_mass_above(const CoxIntensity& intensity, double u) { return lambda_of(intensity, u); }

std::vector<double> cox_sample(const CoxIntensity& intensity, double t, double u, RandomStream& rng) {
  if (!(t >= 0.0)) throw std::invalid_argument("cox_sample: t must be >= 0");
  if (std::holds_alternative<ParetoIntensity>(intensity) && !(u > 0.0)) {
    throw std::invalid_argument("cox_sample: Pareto intensity needs level u > 0");
  }
  std::vector<double> atoms;
  const double mean = t * lambda_of(intensity, u);
  if (mean == 0.0) return atoms;
  std::poisson_distribution<long> count(mean);
  const long n = count(rng);
  atoms.reserve(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    const double v = 1.0 - rng.uniform();
    if (const auto* p = std::get_if<ParetoIntensity>(&intensity)) {
      atoms.push_back(u * std::pow(v, -1.0 / p->alpha));
    } else {
      atoms.push_back(u - std::log(v) / std::get<ExponentialIntensity>(intensity).b);
    }
  }
  std::sort(atoms.begin(), atoms.end(), std::greater<>{});
  return atoms;
}

double cox_topj_cdf(const CoxIntensity& intensity, const StableHalf& sh, int j, double x) {
  return mixture(intensity, sh, j, x, 0.0);
}

double truncated_mixture_cdf(const CoxIntensity& intensity, const StableHalf& sh, int j, double x, double t_cap) {
  if (!(t_cap > 0.0)) throw std::invalid_argument("t_cap must be > 0");
  require_sigma(sh.sigma);
  const double w_lo = w_cap(sh.sigma, t_cap);
  return std::min(1.0, mixture(intensity, sh, j, x, w_lo) / std::erfc(w_lo));
}

double laplace_Tk_limit(double a, double sigma) {
  require_sigma(sigma);
  if (!(a >= 0.0)) throw std::invalid_argument("laplace_Tk_limit: a must be >= 0");
  return std::exp(-std::sqrt(2.0 * a) / sigma);
}

}  // namespace gwx
