#include "gwx/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>

namespace gwx {

Ecdf::Ecdf(std::vector<double> samples) : values_(std::move(samples)) {
  if (values_.empty()) throw std::invalid_argument("Ecdf: no samples");
  for (double v : values_) {
    if (std::isnan(v)) throw std::invalid_argument("Ecdf: NaN sample");
  }
  std::sort(values_.begin(), values_.end());
}

double Ecdf::operator()(double x) const {
  const auto it = std::upper_bound(values_.begin(), values_.end(), x);
  return static_cast<double>(it - values_.begin()) / static_cast<double>(values_.size());
}

double Ecdf::left(double x) const {
  const auto it = std::lower_bound(values_.begin(), values_.end(), x);
  return static_cast<double>(it - values_.begin()) / static_cast<double>(values_.size());
}

double ks_statistic(const Ecdf& ecdf, const std::function<double(double)>& cdf) {
  const auto& v = ecdf.values();
  const double n = static_cast<double>(v.size());
  double d = 0.0;
  std::size_t i = 0;
  while (i < v.size()) {
    std::size_t j = i;
    while (j < v.size() && v[j] == v[i]) ++j;
    const double g = cdf(v[i]);
    d = std::max({d, std::abs(static_cast<double>(j) / n - g), std::abs(static_cast<double>(i) / n - g)});
    i = j;
  }
  return d;
}

double ks_two_sample(const Ecdf& a, const Ecdf& b) {
  const auto& x = a.values();
  const auto& y = b.values();
  const double nx = static_cast<double>(x.size());
  const double ny = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() || j < y.size()) {
    double v;
    if (j == y.size() || (i < x.size() && x[i] <= y[j])) {
      v = x[i];
    } else {
      v = y[j];
    }
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / nx - static_cast<double>(j) / ny));
  }
  return d;
}

double ks_noise_floor(std::size_t n) { return 1.36 / std::sqrt(static_cast<double>(n)); }

MeanEstimate mean_estimate(const std::vector<double>& xs) {
  if (xs.empty()) throw std::invalid_argument("mean_estimate: no samples");
  double mean = 0.0, m2 = 0.0;
  double n = 0.0;
  for (double x : xs) {
    n += 1.0;
    const double delta = x - mean;
    mean += delta / n;
    m2 += delta * (x - mean);
  }
  MeanEstimate out{mean, 0.0};
  if (xs.size() > 1) out.std_error = std::sqrt(m2 / (n - 1.0) / n);
  return out;
}

std::vector<DispersionBucket> poisson_dispersion(const std::vector<double>& t, const std::vector<double>& counts,
                                                 double lambda, int buckets) {
  if (t.size() != counts.size()) throw std::invalid_argument("poisson_dispersion: size mismatch");
  if (buckets < 1) throw std::invalid_argument("poisson_dispersion: buckets must be >= 1");
  std::vector<std::size_t> order(t.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return t[a] < t[b]; });

  std::vector<DispersionBucket> out;
  const std::size_t n = order.size();
  for (int b = 0; b < buckets; ++b) {
    const std::size_t lo = n * static_cast<std::size_t>(b) / static_cast<std::size_t>(buckets);
    const std::size_t hi = n * static_cast<std::size_t>(b + 1) / static_cast<std::size_t>(buckets);
    if (hi <= lo) continue;
    DispersionBucket bucket;
    bucket.t_lo = t[order[lo]];
    bucket.t_hi = t[order[hi - 1]];
    bucket.size = static_cast<std::int64_t>(hi - lo);
    std::vector<double> c, r;
    double pred = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      const double mu = t[order[i]] * lambda;
      c.push_back(counts[order[i]]);
      r.push_back(counts[order[i]] - mu);
      pred += mu;
    }
    const double m = static_cast<double>(c.size());
    bucket.mean_count = mean_estimate(c).mean;
    bucket.mean_predicted = pred / m;
    const auto var = [m](const std::vector<double>& xs) {
      const auto e = mean_estimate(xs);
      return e.std_error * e.std_error * m;
    };
    if (bucket.mean_count > 0.0) {
      bucket.raw_dispersion = var(c) / bucket.mean_count;
      bucket.dispersion = var(r) / bucket.mean_count;
    }
    out.push_back(bucket);
  }
  return out;
}

namespace {
ChiSquare finish_chi(double stat, int dof) {
  ChiSquare out{stat, dof, 1.0};
  if (dof > 0) out.p_value = boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), stat));
  return out;
}
}  // namespace

ChiSquare chi_square_fit(const std::vector<double>& observed, const std::vector<double>& expected) {
  if (observed.size() != expected.size()) throw std::invalid_argument("chi_square_fit: size mismatch");
  double stat = 0.0;
  int cells = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (expected[i] <= 0.0) continue;
    const double d = observed[i] - expected[i];
    stat += d * d / expected[i];
    ++cells;
  }
  return finish_chi(stat, cells - 1);
}

ChiSquare chi_square_two_sample(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("chi_square_two_sample: size mismatch");
  double na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    na += a[i];
    nb += b[i];
  }
  const double ka = std::sqrt(nb / na);
  const double kb = std::sqrt(na / nb);
  double stat = 0.0;
  int cells = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] + b[i] == 0.0) continue;
    const double d = ka * a[i] - kb * b[i];
    stat += d * d / (a[i] + b[i]);
    ++cells;
  }
  return finish_chi(stat, cells - 1);
}

}  // namespace gwx
