#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "gwx/limit_laws.hpp"
#include "gwx/quadrature.hpp"
#include "gwx/statistics.hpp"

using Catch::Approx;
using namespace gwx;

namespace {

constexpr double kSigma = 0.66549016798795169;  // pareto(3, 0.5)
constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

TEST_CASE("Frechet CDF", "[limits]") {
  const FrechetLimit f{3.0, kSigma};
  CHECK(frechet_cdf(f, 1.0) == Approx(std::exp(-std::numbers::sqrt2 / kSigma)).epsilon(1e-15));
  CHECK(frechet_cdf(f, 1.0) == Approx(0.119425).margin(1e-6));
  CHECK(frechet_cdf(f, 0.0) == 0.0);
  CHECK(frechet_cdf(f, -1.0) == 0.0);
  CHECK(frechet_cdf(f, 1e12) == Approx(1.0).margin(1e-8));
  CHECK(frechet_cdf(f, 1e-6) < 1e-100);
  CHECK_THROWS_AS(frechet_cdf({3.0, 0.0}, 1.0), std::invalid_argument);
}

TEST_CASE("Frechet is the j = 1 Cox marginal", "[limits]") {
  const FrechetLimit f{3.0, kSigma};
  for (double x = 0.1; x <= 10.0; x *= 1.25) {
    CHECK(std::abs(cox_topj_cdf(ParetoIntensity{3.0}, {kSigma}, 1, x) - frechet_cdf(f, x)) < 1e-8);
  }
  for (double alpha : {2.5, 4.0}) {
    for (double x : {0.3, 1.0, 3.0}) {
      CHECK(std::abs(cox_topj_cdf(ParetoIntensity{alpha}, {1.3}, 1, x) - frechet_cdf({alpha, 1.3}, x)) < 1e-8);
    }
  }
}

TEST_CASE("Gumbel is the j = 1 Cox marginal of the exponential intensity", "[limits]") {
  const GumbelLimit g{0.5, std::numbers::ln2, std::numbers::sqrt2};
  for (double x = -4.0; x <= 12.0; x += 0.5) {
    CHECK(std::abs(cox_topj_cdf(ExponentialIntensity{0.5, std::numbers::ln2}, {std::numbers::sqrt2}, 1, x) - gumbel_cdf(g, x)) <
          1e-8);
  }
}

TEST_CASE("higher order statistics sit below", "[limits]") {
  for (double x = 0.2; x < 8.0; x *= 1.3) {
    const double c1 = cox_topj_cdf(ParetoIntensity{3.0}, {kSigma}, 1, x);
    const double c2 = cox_topj_cdf(ParetoIntensity{3.0}, {kSigma}, 2, x);
    const double c3 = cox_topj_cdf(ParetoIntensity{3.0}, {kSigma}, 3, x);
    CHECK(c2 >= c1);
    CHECK(c3 >= c2);
  }
  CHECK_THROWS_AS(cox_topj_cdf(ParetoIntensity{3.0}, {kSigma}, 0, 1.0), std::invalid_argument);
}

TEST_CASE("stable(1/2) CDF, density and Laplace transform", "[limits]") {
  const StableHalf s1{1.0};
  CHECK(stable_half_cdf(s1, 1.0) == Approx(std::erfc(1.0 / std::numbers::sqrt2)).epsilon(1e-15));
  CHECK(stable_half_cdf(s1, 1.0) == Approx(0.3173105).margin(1e-7));
  CHECK(stable_half_cdf(s1, 0.0) == 0.0);
  for (double sigma : {0.5, kSigma, 1.0, 2.0}) {
    const StableHalf s{sigma};
    // The t^{-3/2} tail is too slow for an infinite range; check mass up to finite horizons.
    for (double horizon : {1.0, 50.0, 1e4}) {
      const auto mass = quadrature([&](double t) { return stable_half_pdf(s, t); }, Domain{0.0, horizon, {1.0 / (sigma * sigma)}});
      CHECK(std::abs(mass.value - stable_half_cdf(s, horizon)) < 1e-10);
    }
    for (double a : {0.5, 1.0, 3.0}) {
      const auto lt = quadrature([&](double t) { return std::exp(-a * t) * stable_half_pdf(s, t); },
                                 Domain{0.0, kInf, {1.0 / (sigma * sigma)}});
      CHECK(std::abs(lt.value - laplace_Tk_limit(a, sigma)) < 1e-8);
    }
    // Derivative of the CDF is the density.
    for (double t : {0.1, 1.0, 7.0}) {
      const double h = 1e-6 * t;
      CHECK((stable_half_cdf(s, t + h) - stable_half_cdf(s, t - h)) / (2 * h) == Approx(stable_half_pdf(s, t)).epsilon(1e-6));
    }
  }
}

TEST_CASE("stable scaling: tau(sigma) has the law of tau(1) / sigma^2", "[limits][property]") {
  for (double sigma : {0.3, kSigma, 1.7}) {
    for (double t : {0.01, 0.5, 2.0, 50.0}) {
      CHECK(std::abs(stable_half_cdf({sigma}, t) - stable_half_cdf({1.0}, t * sigma * sigma)) < 1e-12);
    }
  }
}

TEST_CASE("Laplace limit of T_k", "[limits]") {
  CHECK(laplace_Tk_limit(0.0, 1.0) == 1.0);
  CHECK(laplace_Tk_limit(1.0, 1.0) == Approx(std::exp(-std::numbers::sqrt2)).epsilon(1e-15));
  CHECK(laplace_Tk_limit(1.0, 1.0) == Approx(0.243117).margin(1e-6));
  CHECK_THROWS_AS(laplace_Tk_limit(-1.0, 1.0), std::invalid_argument);
}

TEST_CASE("stable sampler matches the CDF", "[limits]") {
  RandomStream rng(5, 0);
  const StableHalf s{kSigma};
  std::vector<double> xs(1'000'000);
  for (double& x : xs) x = stable_half_sample(s, rng);
  const Ecdf e(std::move(xs));
  const double d = ks_statistic(e, [&](double t) { return stable_half_cdf(s, t); });
  CHECK(d < 0.002);
  CHECK(d < 1.5 * ks_noise_floor(e.size()));
}

TEST_CASE("truncated references", "[limits]") {
  const StableHalf s{kSigma};
  CHECK(truncated_stable_cdf(s, 50.0, 50.0) == 1.0);
  CHECK(truncated_stable_cdf(s, 100.0, 50.0) == 1.0);
  CHECK(truncated_stable_cdf(s, 1.0, 50.0) == Approx(stable_half_cdf(s, 1.0) / stable_half_cdf(s, 50.0)));
  for (double x : {0.3, 1.0, 4.0}) {
    for (int j : {1, 2}) {
      const double full = cox_topj_cdf(ParetoIntensity{3.0}, s, j, x);
      // Off by about P(tau > t_cap), ~5e-7 here.
      CHECK(std::abs(truncated_mixture_cdf(ParetoIntensity{3.0}, s, j, x, 1e12) - full) < 1e-5);
      // A short horizon leaves fewer atoms, so the maximum is smaller.
      CHECK(truncated_mixture_cdf(ParetoIntensity{3.0}, {1.0}, j, x, 0.01) >= cox_topj_cdf(ParetoIntensity{3.0}, {1.0}, j, x));
    }
  }
  CHECK(truncated_mixture_cdf(ParetoIntensity{3.0}, s, 1, 1e9, 50.0) == Approx(1.0).margin(1e-12));
  CHECK_THROWS_AS(truncated_stable_cdf(s, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("limit CDFs are nondecreasing on a fine grid", "[limits][property]") {
  const StableHalf s{kSigma};
  double prev[6] = {0, 0, 0, 0, 0, 0};
  for (int i = 1; i <= 1000; ++i) {
    const double x = 0.01 * i;
    const double v[6] = {frechet_cdf({3.0, kSigma}, x),
                         gumbel_cdf({0.5, std::numbers::ln2, std::numbers::sqrt2}, x - 3.0),
                         stable_half_cdf(s, x),
                         truncated_stable_cdf(s, x, 5.0),
                         i % 10 == 0 ? cox_topj_cdf(ParetoIntensity{3.0}, s, 2, x) : prev[4],
                         i % 10 == 0 ? truncated_mixture_cdf(ParetoIntensity{3.0}, s, 1, x, 50.0) : prev[5]};
    for (int j = 0; j < 6; ++j) {
      REQUIRE(v[j] >= prev[j] - 1e-12);
      REQUIRE(v[j] <= 1.0);
      prev[j] = v[j];
    }
  }
}

TEST_CASE("Cox sampling", "[limits]") {
  RandomStream rng(8, 0);
  CHECK(cox_sample(ParetoIntensity{3.0}, 0.0, 1.0, rng).empty());
  CHECK_THROWS_AS(cox_sample(ParetoIntensity{3.0}, 1.0, 0.0, rng), std::invalid_argument);
  CHECK(cox_mass_above(ParetoIntensity{3.0}, 2.0) == 0.125);
  CHECK(cox_mass_above(ExponentialIntensity{0.5, 1.0}, 0.0) == 0.5);

  const int n = 300'000;
  double sum = 0.0;
  double sq = 0.0;
  std::vector<double> tops;
  for (int i = 0; i < n; ++i) {
    const auto atoms = cox_sample(ParetoIntensity{3.0}, 1.0, 1.0, rng);
    REQUIRE(std::is_sorted(atoms.rbegin(), atoms.rend()));
    for (double a : atoms) REQUIRE(a > 1.0);
    const double c = static_cast<double>(atoms.size());
    sum += c;
    sq += c * c;
    if (!atoms.empty()) tops.push_back(atoms.front());
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean - 1.0) < 4.0 * std::sqrt(1.0 / n));
  CHECK(std::abs(var - 1.0) < 4.0 * std::sqrt(3.0 / n));
  // Top atom given N >= 1: P(top <= x) = (e^{-x^{-3}} - e^{-1}) / (1 - e^{-1}).
  const Ecdf e(tops);
  const double d = ks_statistic(e, [](double x) { return (std::exp(-std::pow(x, -3.0)) - std::exp(-1.0)) / (1.0 - std::exp(-1.0)); });
  CHECK(d < 1.5 * ks_noise_floor(e.size()));

  std::size_t above = 0;
  for (int i = 0; i < 100'000; ++i) {
    for (double a : cox_sample(ExponentialIntensity{0.5, std::numbers::ln2}, 2.0, 1.0, rng)) above += a > 3.0 ? 1 : 0;
  }
  // E count above 3 = t a e^{-3b} = 2 * 0.5 / 8.
  CHECK(std::abs(above / 1e5 - 0.125) < 4.0 * std::sqrt(0.125 / 1e5));
}
