#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "gwx/csv.hpp"
#include "gwx/quadrature.hpp"
#include "gwx/series.hpp"
#include "gwx/statistics.hpp"

using Catch::Approx;
using namespace gwx;

namespace {

double uniform_cdf(double x) { return std::clamp(x, 0.0, 1.0); }

}  // namespace

TEST_CASE("KS statistic examples", "[statistics]") {
  CHECK(ks_statistic(Ecdf({0.2, 0.6}), uniform_cdf) == Approx(0.4));
  CHECK(ks_statistic(Ecdf({0.5}), uniform_cdf) == Approx(0.5));
  // Sample placed at the points where the CDF hits i/n: every right limit matches.
  std::vector<double> grid;
  for (int i = 1; i <= 10; ++i) grid.push_back(i / 10.0);
  const Ecdf e(grid);
  for (double x : grid) CHECK(e(x) == Approx(uniform_cdf(x)));
  CHECK(ks_statistic(e, uniform_cdf) == Approx(0.1));
  CHECK_THROWS(Ecdf({}));
}

TEST_CASE("ECDF invariants", "[statistics][property]") {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> xs(1 + gen() % 50);
    for (double& x : xs) x = std::floor(u(gen) * 10.0) / 10.0;  // ties on purpose
    const Ecdf e(xs);
    CHECK(std::is_sorted(e.values().begin(), e.values().end()));
    CHECK(e(1e9) == 1.0);
    CHECK(e(-1e9) == 0.0);
    double prev = 0.0;
    for (double x = -0.05; x < 1.1; x += 0.05) {
      CHECK(e(x) >= prev);
      CHECK(e.left(x) <= e(x));
      prev = e(x);
    }
  }
}

TEST_CASE("a duplicated sample moves D by at most the weight change", "[statistics][property]") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> xs(1 + gen() % 40);
    for (double& x : xs) x = u(gen);
    const double d0 = ks_statistic(Ecdf(xs), uniform_cdf);
    const double n = static_cast<double>(xs.size());
    xs.push_back(xs[gen() % xs.size()]);
    const double d1 = ks_statistic(Ecdf(xs), uniform_cdf);
    CHECK(d1 >= d0 - 1.0 / (n + 1.0) - 1e-15);
  }
}

TEST_CASE("two-sample KS", "[statistics]") {
  CHECK(ks_two_sample(Ecdf({1, 2, 3}), Ecdf({1, 2, 3})) == 0.0);
  CHECK(ks_two_sample(Ecdf({1, 2}), Ecdf({3, 4})) == 1.0);
  CHECK(ks_two_sample(Ecdf({1, 3}), Ecdf({2, 4})) == Approx(0.5));
  CHECK(ks_noise_floor(10'000) == Approx(0.0136));
}

TEST_CASE("mean estimate", "[statistics]") {
  const auto m = mean_estimate({1.0, 2.0, 3.0, 4.0});
  CHECK(m.mean == 2.5);
  CHECK(m.std_error == Approx(std::sqrt(5.0 / 3.0 / 4.0)));
}

TEST_CASE("conditional Poisson dispersion on synthetic data", "[statistics]") {
  std::mt19937_64 gen(4);
  std::exponential_distribution<double> texp(0.5);
  std::vector<double> t;
  std::vector<double> c;
  const double lambda = 3.0;
  for (int i = 0; i < 20'000; ++i) {
    const double ti = texp(gen);
    std::poisson_distribution<int> pois(ti * lambda);
    t.push_back(ti);
    c.push_back(pois(gen));
  }
  const auto buckets = poisson_dispersion(t, c, lambda, 10);
  REQUIRE(buckets.size() == 10);
  for (const auto& b : buckets) {
    CHECK(b.size == 2000);
    CHECK(b.dispersion > 0.9);
    CHECK(b.dispersion < 1.1);
    CHECK(b.mean_count == Approx(b.mean_predicted).epsilon(0.1));
    CHECK(b.t_lo <= b.t_hi);
  }
}

TEST_CASE("chi-square tests", "[statistics]") {
  const auto fit = chi_square_fit({10, 20, 30}, {10, 20, 30});
  CHECK(fit.statistic == 0.0);
  CHECK(fit.p_value == Approx(1.0));
  CHECK(fit.dof == 2);
  const auto bad = chi_square_fit({100, 0}, {50, 50});
  CHECK(bad.statistic == Approx(100.0));
  CHECK(bad.p_value < 1e-20);
  const auto two = chi_square_two_sample({50, 50}, {50, 50});
  CHECK(two.statistic == 0.0);
  CHECK(chi_square_two_sample({90, 10}, {10, 90}).p_value < 1e-10);
}

TEST_CASE("quadrature examples", "[quadrature]") {
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(quadrature([](double x) { return 3.0 * std::pow(x, -4.0); }, Domain{1.0, inf, {}}).value == Approx(1.0).epsilon(1e-12));
  CHECK(quadrature([](double x) { return 3.0 * (1.0 - std::exp(-1.0)) * std::pow(x, -4.0); }, Domain{1.0, inf, {}}).value ==
        Approx(0.632121).margin(1e-6));
  const auto step = quadrature([](double x) { return x > 1.0 ? 3.0 * (1.0 - std::exp(-1.0)) * std::pow(x, -4.0) : 0.0; },
                               Domain{0.5, inf, {1.0}});
  CHECK(step.value == Approx(1.0 - std::exp(-1.0)).epsilon(1e-12));
  CHECK(quadrature([](double x) { return std::sin(x); }, Domain{0.0, std::numbers::pi, {}}).value == Approx(2.0).epsilon(1e-13));
  CHECK_THROWS_AS(quadrature([](double x) { return 1.0 / x; }, Domain{0.0, 1.0, {}}), QuadratureError);
}

TEST_CASE("zeta and power tails", "[series]") {
  CHECK(series::zeta(2.0) == Approx(std::numbers::pi * std::numbers::pi / 6.0).epsilon(1e-14));
  CHECK(series::zeta(3.0) == Approx(1.2020569031595942).epsilon(1e-14));
  CHECK(series::zeta(4.0) == Approx(std::pow(std::numbers::pi, 4) / 90.0).epsilon(1e-14));
  CHECK(series::zeta(2.5) == Approx(1.3414872572509171).epsilon(1e-14));
  CHECK(series::power_tail(3.0, 1) == Approx(series::zeta(3.0)).epsilon(1e-14));
  double direct = 0.0;
  for (int n = 10; n < 20; ++n) direct += std::pow(n, -3.0);
  CHECK(series::power_tail(3.0, 10) - series::power_tail(3.0, 20) == Approx(direct).epsilon(1e-12));
  series::KahanSum s;
  s.add(1.0);
  for (int i = 0; i < 1000; ++i) s.add(1e-17);
  CHECK(s.value() == Approx(1.0 + 1e-14).epsilon(1e-16));
}

TEST_CASE("CSV number format", "[csv]") {
  CHECK(csv::format(1.0) == "1");
  CHECK(csv::format(0.1) == "0.10000000000000001");
  CHECK(csv::format(1e-8) == "1e-08");
  CHECK(csv::format(-2.5) == "-2.5");
  CHECK(csv::row({"a", "b"}) == "a,b\n");
}
