#include "gwx/exact_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "gwx/quadrature.hpp"
#include "gwx/series.hpp"

namespace gwx {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// (1-d)^n - 1 + n d >= 0, accurate for small n d.
double psi(std::int64_t n, double d) {
  if (n <= 1) return 0.0;
  const double nd = static_cast<double>(n) * d;
  if (nd < 0.05) {
    // sum_{j>=2} C(n,j) (-d)^j
    double term = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1) * d * d;
    double sum = term;
    for (std::int64_t j = 2; j < n; ++j) {
      term *= -static_cast<double>(n - j) * d / static_cast<double>(j + 1);
      sum += term;
      if (std::abs(term) <= 1e-18 * sum) break;
    }
    return sum;
  }
  return std::expm1(static_cast<double>(n) * std::log1p(-d)) + nd;
}

// H(d) = g_f(1-d) - (1-d), written as
//   sum_{n<=N} p(n) [psi_n(d) - c_n (1-d)^n] + tail(d) + d (1 - mean),
// with c_n = 1 - e^{-f(n)}. For n > N the penalty is taken equal to f(N)
// (exactly +inf when the penalty has a hard cutoff at N), so the remainder is
//   -tail(N) (1 - w_N (1-d)^{N+1}) + d tail_moment(N).
class DeficitEquation {
 public:
  std::vector<double> p, f, c;
  double tail_mass = 0.0;
  double tail_moment = 0.0;
  double tail_f = kInf;
  double mean_gap = 0.0;

  double value(double d) const {
    const double ls = std::log1p(-d);
    series::KahanSum acc;
    for (std::size_t n = 0; n < p.size(); ++n) {
      if (p[n] == 0.0) continue;
      const auto nn = static_cast<std::int64_t>(n);
      double term = psi(nn, d);
      if (c[n] != 0.0) term -= c[n] * power(nn, ls);
      acc.add(p[n] * term);
    }
    const auto N = static_cast<std::int64_t>(p.size()) - 1;
    acc.add(-tail_mass * one_minus_weighted_power(tail_f, N + 1, ls) + d * tail_moment);
    acc.add(d * mean_gap);
    return acc.value();
  }

  double derivative(double d) const {
    const double ls = std::log1p(-d);
    series::KahanSum acc;
    for (std::size_t n = 1; n < p.size(); ++n) {
      if (p[n] == 0.0) continue;
      const auto nn = static_cast<std::int64_t>(n);
      acc.add(static_cast<double>(nn) * p[n] * one_minus_weighted_power(f[n], nn - 1, ls));
    }
    const auto N = static_cast<std::int64_t>(p.size()) - 1;
    acc.add(tail_moment * one_minus_weighted_power(tail_f, N, ls));
    acc.add(mean_gap);
    return acc.value();
  }

 private:
  static double power(std::int64_t n, double ls) {
    if (n == 0) return 1.0;
    return std::exp(static_cast<double>(n) * ls);
  }
  // 1 - e^{-f} (1-d)^m
  static double one_minus_weighted_power(double fv, std::int64_t m, double ls) {
    if (fv == kInf) return 1.0;
    if (m == 0) return -std::expm1(-fv);
    return -std::expm1(-fv + static_cast<double>(m) * ls);
  }
};

std::int64_t series_cut(const ReproductionLaw& law, double tail_cut) {
  if (law.support_max() >= 0) return law.support_max();
  auto n = static_cast<std::int64_t>(std::ceil(std::max(0.0, law.phi(tail_cut))));
  while (n > 0 && law.tail(n - 1) < tail_cut) --n;
  while (law.tail(n) >= tail_cut) ++n;
  return n;
}

double mean_gap_of(const ReproductionLaw& law) { return law.is_critical() ? 0.0 : 1.0 - law.mean(); }

FixedPointResult finish(const DeficitEquation& eq, double d, std::int64_t iterations) {
  return {1.0 - d, d, std::abs(eq.value(d)), iterations};
}

FixedPointResult bisect(const DeficitEquation& eq, double lo, double hi, std::int64_t iterations) {
  for (int i = 0; i < 4000; ++i, ++iterations) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (eq.value(mid) > 0.0) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  const double d = std::abs(eq.value(lo)) <= std::abs(eq.value(hi)) ? lo : hi;
  return finish(eq, d, iterations);
}

FixedPointResult solve(const DeficitEquation& eq, const SolverOptions& opts) {
  // H(1) = g_f(0) >= 0 and H(0) = g_f(1) - 1 <= 0; H is convex and nondecreasing in d.
  const double h_one = eq.value(1.0);
  if (h_one <= 0.0) return {0.0, 1.0, std::abs(h_one), 0};
  const double h_zero = eq.value(0.0);
  if (h_zero >= 0.0) return {1.0, 0.0, std::abs(h_zero), 0};

  double lo = 0.0;
  double hi = 1.0;
  switch (opts.method) {
    case FixedPointMethod::bisection:
      return bisect(eq, lo, hi, 0);

    case FixedPointMethod::iteration: {
      // d <- d - H(d) is s <- g_f(s); decreases monotonically to the least root.
      double d = 1.0;
      std::int64_t it = 0;
      for (; it < opts.max_iterations; ++it) {
        const double h = eq.value(d);
        if (h <= 0.0) {
          lo = d;
          break;
        }
        hi = d;
        const double next = d - h;
        if (next >= d) break;
        d = next;
      }
      const FixedPointResult r = finish(eq, hi, it);
      if (r.residual <= 1e-15) return r;
      return bisect(eq, lo, hi, it);
    }

    case FixedPointMethod::newton: {
      // From d = 1 the tangent of a convex H undershoots nothing: iterates
      // decrease monotonically to the root. The bracket guards rounding.
      double d = 1.0;
      double h = h_one;
      std::int64_t it = 0;
      for (; it < opts.max_iterations; ++it) {
        const double slope = eq.derivative(d);
        double next = slope > 0.0 ? d - h / slope : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        const double hn = eq.value(next);
        const double step = std::abs(next - d);
        d = next;
        h = hn;
        if (hn == 0.0) return finish(eq, d, it + 1);
        if (hn > 0.0) {
          hi = d;
        } else {
          lo = d;
        }
        if (step <= 2.0 * std::numeric_limits<double>::epsilon() * d || hi - lo <= 1e-300) break;
      }
      const double best = std::abs(eq.value(lo)) < std::abs(eq.value(hi)) ? lo : hi;
      return finish(eq, std::abs(eq.value(best)) < std::abs(h) ? best : d, it + 1);
    }
  }
  throw std::logic_error("unknown fixed-point method");
}

}  // namespace

PenaltyFunction PenaltyFunction::zero() {
  PenaltyFunction out;
  out.fn_ = [](std::int64_t) { return 0.0; };
  out.zero_ = true;
  return out;
}

PenaltyFunction PenaltyFunction::constant(double a) {
  if (!(a >= 0.0)) throw std::invalid_argument("penalty must be nonnegative");
  if (a == 0.0) return zero();
  PenaltyFunction out;
  out.fn_ = [a](std::int64_t) { return a; };
  return out;
}

PenaltyFunction PenaltyFunction::truncation(double x) {
  if (!(x >= 0.0)) throw std::invalid_argument("truncation level must be >= 0");
  const double level = std::floor(std::min(x, 9e18));
  PenaltyFunction out;
  out.fn_ = [level](std::int64_t n) { return static_cast<double>(n) > level ? kInf : 0.0; };
  out.cutoff_ = static_cast<std::int64_t>(level);
  return out;
}

PenaltyFunction PenaltyFunction::from_function(std::function<double(std::int64_t)> f,
                                               std::optional<std::int64_t> hard_cutoff) {
  if (!f) throw std::invalid_argument("penalty function is empty");
  PenaltyFunction out;
  out.fn_ = std::move(f);
  out.cutoff_ = hard_cutoff;
  return out;
}

double PenaltyFunction::operator()(std::int64_t n) const {
  if (cutoff_ && n > *cutoff_) return kInf;
  const double v = fn_(n);
  if (!(v >= 0.0)) throw std::invalid_argument("penalty function must be nonnegative");
  return v;
}

SubProbabilityLaw SubProbabilityLaw::from(const ReproductionLaw& law, const PenaltyFunction& f, std::int64_t n_terms) {
  SubProbabilityLaw out;
  series::KahanSum total;
  for (std::int64_t n = 0; n < n_terms; ++n) {
    const double fv = f(n);
    const double m = fv == kInf ? 0.0 : law.pmf(n) * std::exp(-fv);
    out.mass.push_back(m);
    total.add(m);
  }
  out.defect = std::max(0.0, 1.0 - total.value());
  return out;
}

FixedPointResult laplace_functional(const ReproductionLaw& law, const PenaltyFunction& f, const SolverOptions& opts) {
  if (f.is_zero()) return {1.0, 0.0, 0.0, 0};
  std::int64_t N = series_cut(law, opts.tail_cut);
  bool exact_tail = law.support_max() >= 0;
  if (const auto cut = f.hard_cutoff(); cut && *cut <= N) {
    N = *cut;
    exact_tail = true;
  }
  DeficitEquation eq;
  eq.p.resize(static_cast<std::size_t>(N + 1));
  eq.f.resize(eq.p.size());
  eq.c.resize(eq.p.size());
  for (std::int64_t n = 0; n <= N; ++n) {
    const auto i = static_cast<std::size_t>(n);
    eq.p[i] = law.pmf(n);
    eq.f[i] = f(n);
    eq.c[i] = eq.f[i] == kInf ? 1.0 : -std::expm1(-eq.f[i]);
  }
  eq.tail_mass = law.tail(N);
  eq.tail_moment = eq.tail_mass > 0.0 ? law.tail_moment(N) : 0.0;
  eq.tail_f = exact_tail ? kInf : eq.f.back();
  eq.mean_gap = mean_gap_of(law);
  return solve(eq, opts);
}

FixedPointResult solve_rho(const ReproductionLaw& law, double x, const SolverOptions& opts) {
  if (!(x >= 0.0)) throw std::invalid_argument("solve_rho: x must be >= 0");
  const double level = std::floor(std::min(x, 9e18));
  const auto X = static_cast<std::int64_t>(level);
  if (law.tail(X) == 0.0) return {1.0, 0.0, 0.0, 0};
  DeficitEquation eq;
  eq.p.resize(static_cast<std::size_t>(X + 1));
  for (std::int64_t n = 0; n <= X; ++n) eq.p[static_cast<std::size_t>(n)] = law.pmf(n);
  eq.f.assign(eq.p.size(), 0.0);
  eq.c.assign(eq.p.size(), 0.0);
  eq.tail_mass = law.tail(X);
  eq.tail_moment = law.tail_moment(X);
  eq.tail_f = kInf;
  eq.mean_gap = mean_gap_of(law);
  return solve(eq, opts);
}

double cdf_max_k(const ReproductionLaw& law, double x, std::int64_t k) {
  if (k < 1) throw std::invalid_argument("cdf_max_k: k must be >= 1");
  return pow_k(solve_rho(law, x), k);
}

double pow_k(const FixedPointResult& r, std::int64_t k) {
  if (r.deficit >= 1.0) return 0.0;
  // Below 1/2 the value itself is accurate; above, the deficit is.
  if (r.deficit >= 0.5) return std::pow(r.value, static_cast<double>(k));
  return std::exp(static_cast<double>(k) * std::log1p(-r.deficit));
}

std::vector<double> dwass_total(const SubProbabilityLaw& lawf, int n_max) {
  if (n_max < 1 || n_max > 64) throw std::invalid_argument("dwass_total: n_max must lie in [1, 64]");
  const auto len = static_cast<std::size_t>(n_max);
  std::vector<double> base(len, 0.0);
  for (std::size_t i = 0; i < len && i < lawf.mass.size(); ++i) base[i] = lawf.mass[i];
  std::vector<double> power = base;  // p_f^{*n}, exact on indices < n_max
  std::vector<double> terms(len);
  terms[0] = power[0];
  for (std::size_t n = 2; n <= len; ++n) {
    std::vector<double> next(len, 0.0);
    for (std::size_t i = 0; i < len; ++i) {
      if (power[i] == 0.0) continue;
      for (std::size_t j = 0; i + j < len; ++j) next[i + j] += power[i] * base[j];
    }
    power = std::move(next);
    terms[n - 1] = power[n - 1] / static_cast<double>(n);
  }
  return terms;
}

ReproductionLaw gibbs_tilt(const ReproductionLaw& law, const PenaltyFunction& f) {
  if (f.is_zero()) throw std::invalid_argument("gibbs_tilt: f is identically zero, the tilt is not subcritical");
  const FixedPointResult L = laplace_functional(law, f);
  if (L.value <= 0.0) throw std::invalid_argument("gibbs_tilt: partition function vanishes");
  const double log_l = std::log1p(-L.deficit);
  const std::int64_t max = law.support_max();
  constexpr std::int64_t kMaxTable = 50'000'000;
  std::vector<double> q;
  for (std::int64_t n = 0;; ++n) {
    if (max >= 0 && n > max) break;
    if (max < 0 && n >= 2 && std::exp(static_cast<double>(n - 1) * log_l) * law.tail(n) < 1e-18) {
      q.push_back(0.0);  // placeholder trimmed by from_pmf
      break;
    }
    if (n >= kMaxTable) throw std::invalid_argument("gibbs_tilt: tilted law decays too slowly to tabulate");
    const double fv = f(n);
    const double weight = fv == kInf ? 0.0 : std::exp(static_cast<double>(n - 1) * log_l - fv);
    q.push_back(weight * law.pmf(n));
  }
  return ReproductionLaw::from_pmf(std::move(q));
}

TiltDiagnostics tilt_diagnostics(const ReproductionLaw& law, const PenaltyFunction& f) {
  const ReproductionLaw q = gibbs_tilt(law, f);
  const FixedPointResult L = laplace_functional(law, f);
  series::KahanSum qf;
  for (std::int64_t n = 0; n <= q.support_max(); ++n) {
    const double qn = q.pmf(n);
    if (qn > 0.0) qf.add(qn * f(n));
  }
  TiltDiagnostics out;
  out.partition = L.value;
  out.expected_total = 1.0 / (1.0 - q.mean());
  out.expected_hamiltonian = qf.value() * out.expected_total;
  out.relative_entropy = -out.expected_hamiltonian - std::log1p(-L.deficit);
  return out;
}

double lemma1_ratio(const ReproductionLaw& law, double x) {
  const double t = law.tail(static_cast<std::int64_t>(std::floor(x)));
  if (!(t > 0.0)) throw std::invalid_argument("lemma1_ratio: tail(x) must be positive");
  return solve_rho(law, x).deficit * law.sigma() / std::sqrt(2.0 * t);
}

PenaltyTemplate PenaltyTemplate::zero() { return {[](double) { return 0.0; }, kInf, {}}; }

PenaltyTemplate PenaltyTemplate::step(double level, double height) {
  if (!(level > 0.0) || !(height >= 0.0)) throw std::invalid_argument("step penalty needs level > 0, height >= 0");
  return {[level, height](double x) { return x > level ? height : 0.0; }, level, {level}};
}

void PenaltyTemplate::validate() const {
  if (!fn) throw std::invalid_argument("penalty template is empty");
  if (!(zero_below > 0.0)) throw std::invalid_argument("penalty must vanish on a neighborhood of 0");
  const double span = std::isfinite(zero_below) ? zero_below : 1e6;
  for (int i = 0; i <= 64; ++i) {
    const double x = span * i / 64.0;
    if (fn(x) != 0.0) throw std::invalid_argument("penalty does not vanish on [0, zero_below]");
  }
}

double lemma2_scaled_deficit(const ReproductionLaw& law, const PenaltyTemplate& f, double a, std::int64_t k) {
  f.validate();
  if (!(a >= 0.0)) throw std::invalid_argument("lemma2: a must be >= 0");
  if (k < 1) throw std::invalid_argument("lemma2: k must be >= 1");
  const double kk = static_cast<double>(k);
  const double scale = law.phi(1.0 / (kk * kk));
  const double shift = a / (kk * kk);
  const auto fn = f.fn;
  PenaltyFunction pen = (a == 0.0 && !std::isfinite(f.zero_below))
                            ? PenaltyFunction::zero()
                            : PenaltyFunction::from_function([fn, scale, shift](std::int64_t n) {
                                return shift + fn(static_cast<double>(n) / scale);
                              });
  return kk * laplace_functional(law, pen).deficit;
}

double lemma2_limit(double alpha, double sigma, const PenaltyTemplate& f, double a) {
  f.validate();
  double integral = 0.0;
  if (std::isfinite(f.zero_below)) {
    const auto fn = f.fn;
    integral = quadrature([&](double x) { return -std::expm1(-fn(x)) * alpha * std::pow(x, -alpha - 1.0); },
                          Domain{f.zero_below, kInf, f.breakpoints})
                   .value;
  }
  return std::sqrt(2.0) / sigma * std::sqrt(a + integral);
}

}  // namespace gwx
