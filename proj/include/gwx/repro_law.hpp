#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "gwx/random_stream.hpp"

namespace gwx {

//! Raised for invalid law parameters.
class LawError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Regularly varying tail: tail(n) = C (n+1)^{-alpha} for n >= 1.
struct RegVarTail {
  double alpha;
  double C;
};
/// Exponential tail: tail(n) ~ a e^{-b n}.
struct ExponentialTail {
  double a;
  double b;
};
struct FiniteSupport {
  std::int64_t max;
};
using TailClass = std::variant<RegVarTail, ExponentialTail, FiniteSupport>;

//! Serializable description of a law family.
struct LawDescriptor {
  std::string family;  // "pareto" | "geometric" | "binary"
  double alpha = 0.0;
  double C = 0.0;
};
void to_json(nlohmann::json& j, const LawDescriptor& d);
void from_json(const nlohmann::json& j, LawDescriptor& d);

inline constexpr std::int64_t kDefaultTailThreshold = 4096;

/// An offspring distribution on the nonnegative integers.
///
/// Laws are immutable after construction and may be shared across threads.
/// The head of the distribution (n <= tail_threshold) is held as a table of
/// tail probabilities; beyond it, tail() and sampling use the analytic form
/// of the tail class.
class ReproductionLaw {
 public:
  /// Critical law with tail(n) = C (n+1)^{-alpha} for n >= 1 and
  /// tail(0) = 1 - C (zeta(alpha) - 1), so that the mean sum_n tail(n) is 1.
  static ReproductionLaw critical_pareto(double alpha, double C,
                                         std::int64_t tail_threshold = kDefaultTailThreshold);
  //! pmf(n) = 2^{-(n+1)}.
  static ReproductionLaw critical_geometric();
  //! pmf(0) = pmf(2) = 1/2.
  static ReproductionLaw binary();
  /// Finite-support law from an explicit pmf. Need not be critical.
  /// The pmf must sum to 1 within 1e-12 and must not be the point mass at 1.
  static ReproductionLaw from_pmf(std::vector<double> pmf);
  static ReproductionLaw from_descriptor(const LawDescriptor& d);

  double pmf(std::int64_t n) const;
  //! P(X > n).
  double tail(std::int64_t n) const;
  //! sum_{j >= n} tail(j), equivalently E[(X - n)^+].
  double tail_sum(std::int64_t n) const;
  //! sum_{j > n} j pmf(j).
  double tail_moment(std::int64_t n) const;

  double mean() const noexcept { return mean_; }
  double variance() const noexcept { return variance_; }
  double sigma() const noexcept;
  bool is_critical() const noexcept;
  const TailClass& tail_class() const noexcept { return tail_class_; }
  //! Largest n with pmf(n) > 0, or -1 for unbounded support.
  std::int64_t support_max() const noexcept;

  std::int64_t tail_threshold() const noexcept { return threshold_; }
  //! tail(0..tail_threshold).
  std::span<const double> head_tails() const noexcept { return head_tails_; }

  //! Inverse-CDF sample: min{n : F(n) > u} for u in [0,1).
  std::uint32_t sample_uniform(double u) const { return sample_tail_variable(1.0 - u); }
  //! min{n : tail(n) < v} for v in (0,1]. This is the sampler every kernel reproduces.
  std::uint32_t sample_tail_variable(double v) const;
  std::uint32_t sample(RandomStream& rng) const { return sample_uniform(rng.uniform()); }

  /// Asymptotic inverse of the tail: tail(phi(eps)) ~ eps.
  /// RegVar: (C/eps)^{1/alpha} - 1; Exponential: ln(a/eps)/b.
  double phi(double eps) const;

  const LawDescriptor& descriptor() const noexcept { return descriptor_; }

 private:
  ReproductionLaw() = default;
  void build_head(std::int64_t threshold);
  std::uint32_t sample_beyond_head(double v) const;

  LawDescriptor descriptor_;
  TailClass tail_class_ = FiniteSupport{0};
  std::vector<double> pmf_table_;  // finite-support laws only
  std::vector<double> head_tails_;
  std::int64_t threshold_ = 0;
  double tail0_ = 1.0;  // pareto: tail(0)
  double mean_ = 1.0;
  double variance_ = 0.0;
};

}  // namespace gwx
