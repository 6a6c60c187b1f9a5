#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "gwx/random_stream.hpp"

namespace gwx {

/// exp(-(sqrt2/sigma) x^{-alpha/2}), the limit law of X*_k / phi(k^-2).
struct FrechetLimit {
  double alpha = 3.0;
  double sigma = 1.0;
};

/// Positive stable(1/2) law of the limit of T_k / k^2: Levy with scale 1/sigma^2,
/// density exp(-1 / (2 sigma^2 t)) / (sigma sqrt(2 pi t^3)), Laplace transform exp(-sqrt(2a)/sigma).
struct StableHalf {
  double sigma = 1.0;
};

/// Intensity alpha t x^{-alpha-1} dx on (0, inf).
struct ParetoIntensity {
  double alpha = 3.0;
};
/// Intensity t a b e^{-bx} dx on the real line.
struct ExponentialIntensity {
  double a = 0.5;
  double b = 0.6931471805599453;
};
using CoxIntensity = std::variant<ParetoIntensity, ExponentialIntensity>;

/// exp(-(sqrt2/sigma) sqrt(a) e^{-bx/2}).
struct GumbelLimit {
  double a = 0.5;
  double b = 0.6931471805599453;
  double sigma = 1.4142135623730951;
};

double frechet_cdf(const FrechetLimit& law, double x);
double gumbel_cdf(const GumbelLimit& law, double x);

double stable_half_pdf(const StableHalf& sh, double t);
//! erfc(1 / (sigma sqrt(2t))).
double stable_half_cdf(const StableHalf& sh, double t);
//! P(tau <= t | tau <= t_cap).
double truncated_stable_cdf(const StableHalf& sh, double t, double t_cap);
//! 1 / (sigma Z)^2, Z standard normal by Box-Muller (two uniforms).
double stable_half_sample(const StableHalf& sh, RandomStream& rng);

//! Mass of the unit-t intensity above u: u^{-alpha} or a e^{-bu}.
double cox_mass_above(const CoxIntensity& intensity, double u);

/// Atoms of the Cox measure above level u, given tau = t, sorted decreasing.
std::vector<double> cox_sample(const CoxIntensity& intensity, double t, double u, RandomStream& rng);

/// P(xi_j <= x) = E P(Poisson(tau Lambda(x)) < j).
double cox_topj_cdf(const CoxIntensity& intensity, const StableHalf& sh, int j, double x);

/// cox_topj_cdf conditioned on tau <= t_cap.
double truncated_mixture_cdf(const CoxIntensity& intensity, const StableHalf& sh, int j, double x, double t_cap);

//! exp(-sqrt(2a)/sigma) = E exp(-a tau).
double laplace_Tk_limit(double a, double sigma);

}  // namespace gwx
