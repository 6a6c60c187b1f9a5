#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "gwx/repro_law.hpp"

namespace gwx {

/// Solution s of s = g_f(s) := sum_n p(n) e^{-f(n)} s^n on [0,1].
///
/// `deficit` is 1 - value computed directly (not by subtraction), so it keeps
/// full relative precision when the root sits next to 1.
struct FixedPointResult {
  double value = 1.0;
  double deficit = 0.0;
  double residual = 0.0;  // |value - g_f(value)|
  std::int64_t iterations = 0;
};

/// f : N -> [0, +inf]. A hard cutoff declares f = +inf for every n above it,
/// which lets solvers handle the infinite remainder exactly.
class PenaltyFunction {
 public:
  static PenaltyFunction zero();
  static PenaltyFunction constant(double a);
  //! 0 for n <= x, +inf for n > x.
  static PenaltyFunction truncation(double x);
  static PenaltyFunction from_function(std::function<double(std::int64_t)> f,
                                       std::optional<std::int64_t> hard_cutoff = std::nullopt);

  double operator()(std::int64_t n) const;
  std::optional<std::int64_t> hard_cutoff() const noexcept { return cutoff_; }
  bool is_zero() const noexcept { return zero_; }

 private:
  std::function<double(std::int64_t)> fn_;
  std::optional<std::int64_t> cutoff_;
  bool zero_ = false;
};

/// p_f(n) = p(n) e^{-f(n)} on a finite window, with the missing mass as the atom at infinity.
struct SubProbabilityLaw {
  std::vector<double> mass;
  double defect = 0.0;

  static SubProbabilityLaw from(const ReproductionLaw& law, const PenaltyFunction& f, std::int64_t n_terms);
};

enum class FixedPointMethod {
  newton,     // safeguarded Newton from s = 0 (monotone, default)
  iteration,  // s <- g_f(s) from s = 0, bisection polish if it stalls
  bisection,
};

struct SolverOptions {
  FixedPointMethod method = FixedPointMethod::newton;
  std::int64_t max_iterations = 1'000'000;
  //! Series for infinite-support laws are cut at the first N with tail(N) < tail_cut.
  double tail_cut = 1e-16;
};

//! L(f) = E exp(-sum_{i <= T_1} f(X_i)).
FixedPointResult laplace_functional(const ReproductionLaw& law, const PenaltyFunction& f,
                                    const SolverOptions& opts = {});

//! rho(x) = P(X*_1 <= x), the root of rho = sum_{n <= x} p(n) rho^n.
FixedPointResult solve_rho(const ReproductionLaw& law, double x, const SolverOptions& opts = {});

//! P(X*_k <= x) = rho(x)^k.
double cdf_max_k(const ReproductionLaw& law, double x, std::int64_t k);
//! r.value^k, computed from the deficit when the root is near 1.
double pow_k(const FixedPointResult& r, std::int64_t k);

//! Terms (1/n) p_f^{*n}(n-1), n = 1..n_max, of the total-progeny series. n_max <= 64.
std::vector<double> dwass_total(const SubProbabilityLaw& lawf, int n_max);

/// Tilted reproduction law q(n) = L(f)^{n-1} e^{-f(n)} p(n).
/// For infinite support the table stops once L^{n-1} tail(n) < 1e-18.
ReproductionLaw gibbs_tilt(const ReproductionLaw& law, const PenaltyFunction& f);

struct TiltDiagnostics {
  double expected_total = 0.0;        // E_Q T_1
  double expected_hamiltonian = 0.0;  // E_Q H(f)
  double relative_entropy = 0.0;      // D(Q || P)
  double partition = 0.0;             // L(f)
};
TiltDiagnostics tilt_diagnostics(const ReproductionLaw& law, const PenaltyFunction& f);

//! (1 - rho(x)) sigma / sqrt(2 tail(x)).
double lemma1_ratio(const ReproductionLaw& law, double x);

/// A penalty on R+ vanishing on [0, zero_below]. Breakpoints mark
/// discontinuities for quadrature.
struct PenaltyTemplate {
  std::function<double(double)> fn;
  double zero_below = 0.0;
  std::vector<double> breakpoints;

  static PenaltyTemplate zero();
  //! height * 1{x > level}
  static PenaltyTemplate step(double level, double height);
  void validate() const;
};

/// k (1 - L(f_{k,a})) with f_{k,a}(n) = a k^{-2} + f(n / phi(k^{-2})).
double lemma2_scaled_deficit(const ReproductionLaw& law, const PenaltyTemplate& f, double a, std::int64_t k);

/// (sqrt 2 / sigma) (a + alpha int_0^inf (1 - e^{-f(x)}) x^{-alpha-1} dx)^{1/2}.
double lemma2_limit(double alpha, double sigma, const PenaltyTemplate& f, double a);

}  // namespace gwx
