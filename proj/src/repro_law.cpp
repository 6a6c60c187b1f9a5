#include "gwx/repro_law.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "gwx/series.hpp"

namespace gwx {

namespace {

constexpr std::int64_t kFastHeadEntries = 4;  // tail(0..3) are compared vectorially by kernels

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

}  // namespace

void to_json(nlohmann::json& j, const LawDescriptor& d) {
  j = nlohmann::json{{"family", d.family}};
  if (d.family == "pareto") {
    j["alpha"] = d.alpha;
    j["C"] = d.C;
  }
}

void from_json(const nlohmann::json& j, LawDescriptor& d) {
  d = LawDescriptor{};
  j.at("family").get_to(d.family);
  if (d.family == "pareto") {
    j.at("alpha").get_to(d.alpha);
    j.at("C").get_to(d.C);
  }
}

ReproductionLaw ReproductionLaw::critical_pareto(double alpha, double C, std::int64_t tail_threshold) {
  if (!(alpha > 2.0) || !std::isfinite(alpha)) throw LawError("pareto law requires alpha > 2");
  if (!(C > 0.0) || !std::isfinite(C)) throw LawError("pareto law requires C > 0");
  if (tail_threshold < kFastHeadEntries) throw LawError("tail_threshold too small");

  // sum_{n>=1} tail(n) = C sum_{m>=2} m^{-alpha} = C (zeta(alpha) - 1)
  const double upper_mass = C * series::power_tail(alpha, 2, 1'000'000);
  const double tail0 = 1.0 - upper_mass;
  const double tail1 = C * std::pow(2.0, -alpha);
  if (!(upper_mass < 1.0)) {
    throw LawError("pareto law: C (zeta(alpha) - 1) >= 1, mean cannot be 1 (supercritical mass)");
  }
  if (tail0 < tail1) {
    throw LawError("pareto law: tail(0) = " + std::to_string(tail0) + " < tail(1) = " + std::to_string(tail1) +
                   " (non-monotone tail)");
  }

  ReproductionLaw law;
  law.descriptor_ = {"pareto", alpha, C};
  law.tail_class_ = RegVarTail{alpha, C};
  law.tail0_ = tail0;
  law.mean_ = tail0 + upper_mass;
  // sigma^2 = 2 sum_n n tail(n) = 2C sum_{m>=2} (m-1) m^{-alpha}
  law.variance_ =
      2.0 * C * (series::power_tail(alpha - 1.0, 2, 1'000'000) - series::power_tail(alpha, 2, 1'000'000));
  law.build_head(tail_threshold);
  return law;
}

ReproductionLaw ReproductionLaw::critical_geometric() {
  ReproductionLaw law;
  law.descriptor_ = {"geometric", 0.0, 0.0};
  law.tail_class_ = ExponentialTail{0.5, std::numbers::ln2};
  law.mean_ = 1.0;
  law.variance_ = 2.0;
  law.build_head(kDefaultTailThreshold);
  return law;
}

ReproductionLaw ReproductionLaw::binary() {
  ReproductionLaw law = from_pmf({0.5, 0.0, 0.5});
  law.descriptor_ = {"binary", 0.0, 0.0};
  return law;
}

ReproductionLaw ReproductionLaw::from_pmf(std::vector<double> pmf) {
  while (!pmf.empty() && pmf.back() == 0.0) pmf.pop_back();
  if (pmf.empty()) throw LawError("empty pmf");
  series::KahanSum total;
  for (double p : pmf) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw LawError("pmf entries must be finite and nonnegative");
    total.add(p);
  }
  if (std::abs(total.value() - 1.0) > 1e-12) throw LawError("pmf does not sum to 1 within 1e-12");
  if (pmf.size() == 2 && pmf[0] == 0.0) throw LawError("degenerate law delta_1 is excluded");

  ReproductionLaw law;
  law.descriptor_ = {"tabulated", 0.0, 0.0};
  const auto max = static_cast<std::int64_t>(pmf.size()) - 1;
  law.tail_class_ = FiniteSupport{max};
  series::KahanSum m1, m2;
  for (std::size_t n = 0; n < pmf.size(); ++n) {
    const double x = static_cast<double>(n);
    m1.add(x * pmf[n]);
    m2.add(x * x * pmf[n]);
  }
  law.mean_ = m1.value();
  law.variance_ = m2.value() - law.mean_ * law.mean_;
  law.pmf_table_ = std::move(pmf);
  law.build_head(std::max<std::int64_t>(max, kFastHeadEntries - 1));
  return law;
}

ReproductionLaw ReproductionLaw::from_descriptor(const LawDescriptor& d) {
  if (d.family == "pareto") return critical_pareto(d.alpha, d.C);
  if (d.family == "geometric") return critical_geometric();
  if (d.family == "binary") return binary();
  throw LawError("unknown law family '" + d.family + "'");
}

void ReproductionLaw::build_head(std::int64_t threshold) {
  threshold_ = threshold;
  head_tails_.assign(static_cast<std::size_t>(threshold + 1), 0.0);
  if (!pmf_table_.empty()) {
    // suffix sums, smallest terms first
    double acc = 0.0;
    for (std::int64_t n = static_cast<std::int64_t>(pmf_table_.size()) - 1; n >= 0; --n) {
      if (n <= threshold) head_tails_[static_cast<std::size_t>(n)] = acc;
      acc += pmf_table_[static_cast<std::size_t>(n)];
    }
    return;
  }
  for (std::int64_t n = 0; n <= threshold; ++n) head_tails_[static_cast<std::size_t>(n)] = tail(n);
}

double ReproductionLaw::sigma() const noexcept { return std::sqrt(variance_); }

bool ReproductionLaw::is_critical() const noexcept { return std::abs(mean_ - 1.0) <= 1e-10; }

std::int64_t ReproductionLaw::support_max() const noexcept {
  if (const auto* f = std::get_if<FiniteSupport>(&tail_class_)) return f->max;
  return -1;
}

double ReproductionLaw::tail(std::int64_t n) const {
  if (n < 0) return 1.0;
  return std::visit(
      Overloaded{
          [&](const RegVarTail& t) {
            return n == 0 ? tail0_ : t.C * std::pow(static_cast<double>(n) + 1.0, -t.alpha);
          },
          [&](const ExponentialTail&) {
            // geometric: 2^{-(n+1)}
            return n >= 1100 ? 0.0 : std::ldexp(1.0, -static_cast<int>(n + 1));
          },
          [&](const FiniteSupport& f) {
            return n >= f.max ? 0.0 : head_tails_[static_cast<std::size_t>(n)];
          },
      },
      tail_class_);
}

double ReproductionLaw::pmf(std::int64_t n) const {
  if (n < 0) return 0.0;
  return std::visit(
      Overloaded{
          [&](const RegVarTail& t) {
            if (n == 0) return 1.0 - tail0_;
            if (n == 1) return tail0_ - t.C * std::pow(2.0, -t.alpha);
            // C (n^{-a} - (n+1)^{-a}) without cancellation
            const double x = static_cast<double>(n);
            return t.C * std::pow(x, -t.alpha) * -std::expm1(-t.alpha * std::log1p(1.0 / x));
          },
          [&](const ExponentialTail&) { return n >= 1100 ? 0.0 : std::ldexp(1.0, -static_cast<int>(n + 1)); },
          [&](const FiniteSupport& f) { return n > f.max ? 0.0 : pmf_table_[static_cast<std::size_t>(n)]; },
      },
      tail_class_);
}

double ReproductionLaw::tail_sum(std::int64_t n) const {
  if (n < 0) return tail_sum(0) - static_cast<double>(n);
  return std::visit(
      Overloaded{
          [&](const RegVarTail& t) {
            if (n == 0) return tail0_ + t.C * series::power_tail(t.alpha, 2);
            return t.C * series::power_tail(t.alpha, n + 1);
          },
          [&](const ExponentialTail&) { return n >= 1100 ? 0.0 : std::ldexp(1.0, -static_cast<int>(n)); },
          [&](const FiniteSupport& f) {
            series::KahanSum acc;
            for (std::int64_t j = f.max - 1; j >= n; --j) acc.add(head_tails_[static_cast<std::size_t>(j)]);
            return acc.value();
          },
      },
      tail_class_);
}

double ReproductionLaw::tail_moment(std::int64_t n) const {
  if (n < 0) n = 0;
  return static_cast<double>(n) * tail(n) + tail_sum(n);
}

std::uint32_t ReproductionLaw::sample_tail_variable(double v) const {
  const double* t = head_tails_.data();
  std::uint32_t count = 0;
  for (std::int64_t j = 0; j < kFastHeadEntries; ++j) count += (v <= t[j]) ? 1u : 0u;
  if (count < kFastHeadEntries) return count;
  if (v <= head_tails_.back()) return sample_beyond_head(v);
  // Galloping search: most draws that get here stop within a few entries.
  const auto pred = [v](double x) { return x >= v; };
  auto first = head_tails_.begin() + kFastHeadEntries;
  std::ptrdiff_t width = 8;
  for (;;) {
    const auto last = head_tails_.end() - first > width ? first + width : head_tails_.end();
    if (last == head_tails_.end() || *(last - 1) < v) {
      return static_cast<std::uint32_t>(std::partition_point(first, last, pred) - head_tails_.begin());
    }
    first = last;
    width *= 2;
  }
}

std::uint32_t ReproductionLaw::sample_beyond_head(double v) const {
  static constexpr double kMax = static_cast<double>(std::numeric_limits<std::uint32_t>::max());
  const auto clamp = [this](double n) {
    n = std::max(n, static_cast<double>(threshold_ + 1));
    return static_cast<std::uint32_t>(std::min(n, kMax));
  };
  return std::visit(Overloaded{
                        [&](const RegVarTail& t) { return clamp(std::floor(std::pow(t.C / v, 1.0 / t.alpha))); },
                        [&](const ExponentialTail& e) { return clamp(std::floor(std::log(e.a / v) / e.b) + 1.0); },
                        [&](const FiniteSupport& f) { return static_cast<std::uint32_t>(f.max); },
                    },
                    tail_class_);
}

double ReproductionLaw::phi(double eps) const {
  if (!(eps > 0.0 && eps < 1.0)) throw LawError("phi: eps must lie in (0,1)");
  return std::visit(Overloaded{
                        [&](const RegVarTail& t) { return std::pow(t.C / eps, 1.0 / t.alpha) - 1.0; },
                        [&](const ExponentialTail& e) { return std::log(e.a / eps) / e.b; },
                        [&](const FiniteSupport&) -> double {
                          throw LawError("phi: finite-support laws have no asymptotic inverse");
                        },
                    },
                    tail_class_);
}

}  // namespace gwx
