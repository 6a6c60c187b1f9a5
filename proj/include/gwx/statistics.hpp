#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace gwx {

/// Right-continuous empirical CDF with equal weights.
class Ecdf {
 public:
  explicit Ecdf(std::vector<double> samples);

  std::size_t size() const noexcept { return values_.size(); }
  const std::vector<double>& values() const noexcept { return values_; }
  //! F(x) = #{x_i <= x} / n.
  double operator()(double x) const;
  //! F(x-) = #{x_i < x} / n.
  double left(double x) const;

 private:
  std::vector<double> values_;
};

//! sup over sample points of max(|F(x_i) - G(x_i)|, |F(x_i-) - G(x_i)|).
double ks_statistic(const Ecdf& ecdf, const std::function<double(double)>& cdf);
//! sup_x |F(x) - G(x)| over the pooled sample.
double ks_two_sample(const Ecdf& a, const Ecdf& b);
//! 95% Kolmogorov band, 1.36 / sqrt(n).
double ks_noise_floor(std::size_t n);

struct MeanEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};
MeanEstimate mean_estimate(const std::vector<double>& xs);

/// One bucket of the conditional Poisson check.
struct DispersionBucket {
  double t_lo = 0.0;
  double t_hi = 0.0;
  std::int64_t size = 0;
  double mean_count = 0.0;
  double mean_predicted = 0.0;  // mean of t_i * lambda
  double raw_dispersion = 0.0;  // var(count) / mean(count)
  double dispersion = 0.0;      // var(count - t_i lambda) / mean(count)
};

/// Splits (t_i, count_i) into `buckets` quantile groups of t and compares the
/// counts with a Poisson(t_i * lambda) model in each.
std::vector<DispersionBucket> poisson_dispersion(const std::vector<double>& t, const std::vector<double>& counts,
                                                 double lambda, int buckets = 10);

//! Pearson chi-square statistic and its upper tail p-value.
struct ChiSquare {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
};
//! Goodness of fit of observed counts to expected counts (cells with expected > 0).
ChiSquare chi_square_fit(const std::vector<double>& observed, const std::vector<double>& expected);
//! Homogeneity test for two histograms on the same cells.
ChiSquare chi_square_two_sample(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace gwx
