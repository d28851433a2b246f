#pragma once

// Empirical CREX estimators.
//
// Spacing form (plug-in of the empirical survival into -1/2 ∫ F̄^2):
//   V_n     = -1/2 Σ_{k=1}^{n-1} (X_(k+1) - X_(k)) (1 - k/n)^2          SRS
//   R_n     = same formula over the pooled MinRSSU order statistics
//   R_{m,n} = -1/2 Σ_{k=1}^{n-1} (Y_(k+1) - Y_(k)) (1 - k/(n+m+w))^2
//
// L-statistic form (plug-in of -∫ x F̄(x) dF(x)) with J(u) = 1 - u:
//   lstat          = -1/n Σ_{i=1}^n J(i/n) X_(i)
//   lstat_adjusted = -1/n Σ_{i=1}^n J(i/(n+ψ(m,w))) Y_(i)
//
// Textual estimator specs:
//   "vn" | "rn" | "lstat" | "rmn:w=<int>" | "lstat_adj:family=<exp|unif|beta>,w=<int>"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crexlab/distributions.hpp"
#include "crexlab/error.hpp"
#include "crexlab/quadrature.hpp"
#include "crexlab/sampling.hpp"

namespace crexlab {

/// Right-continuous empirical survival 1 - F̂_n(x): 1 below X_(1), 1 - k/n on
/// [X_(k), X_(k+1)), 0 from X_(n) on.
class EmpiricalSurvival {
 public:
  explicit EmpiricalSurvival(std::vector<double> sample) : order_stats_(std::move(sample)) {
    if (order_stats_.empty()) throw SizeError("EmpiricalSurvival: empty sample");
    std::sort(order_stats_.begin(), order_stats_.end());
  }

  double operator()(double x) const noexcept {
    const auto at_or_below = std::upper_bound(order_stats_.begin(), order_stats_.end(), x) - order_stats_.begin();
    return 1.0 - static_cast<double>(at_or_below) / static_cast<double>(order_stats_.size());
  }

  const std::vector<double>& order_statistics() const noexcept { return order_stats_; }

  /// ∫ F̂̄_n(x)^2 dx, evaluated piece by piece from the step function itself.
  double integral_of_square() const {
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < order_stats_.size(); ++k) {
      const double width = order_stats_[k + 1] - order_stats_[k];
      if (width <= 0.0) continue;
      const double level = (*this)(order_stats_[k] + 0.5 * width);
      total += width * level * level;
    }
    return total;
  }

 private:
  std::vector<double> order_stats_;
};

enum class EstimatorKind { Vn, Rn, Rmn, LStat, LStatAdjusted };

/// ψ(m, w) families of the adjusted L-statistic.
enum class PsiFamily { ExponentialForm, UniformForm, BetaForm };

inline const char* to_string(PsiFamily f) {
  switch (f) {
    case PsiFamily::ExponentialForm: return "exp";
    case PsiFamily::UniformForm: return "unif";
    case PsiFamily::BetaForm: return "beta";
  }
  return "?";
}

inline PsiFamily parse_psi_family(std::string_view text) {
  if (text == "exp" || text == "exponential") return PsiFamily::ExponentialForm;
  if (text == "unif" || text == "uniform") return PsiFamily::UniformForm;
  if (text == "beta") return PsiFamily::BetaForm;
  throw ParseError("unknown psi family '" + std::string(text) + "' (expected exp, unif or beta)");
}

/// ψ(m, w):
///   ExponentialForm  5m - 4k_m + w,       (k_2..k_5) = (3, 2, 1, 0)
///   UniformForm      3m - (2k_m + 1) + w, (k_2..k_5) = (-1, 0, 1, 2)
///   BetaForm         m - w
inline int psi(PsiFamily family, int m, int w) {
  if (family == PsiFamily::BetaForm) {
    if (m < 1) throw DomainError("psi: m must be >= 1");
    return m - w;
  }
  if (m < 2 || m > 5) throw DomainError("psi: m must lie in 2..5 for the k_m families, got " + std::to_string(m));
  if (family == PsiFamily::ExponentialForm) {
    const int k = 5 - m;
    return 5 * m - 4 * k + w;
  }
  const int k = m - 3;
  return 3 * m - (2 * k + 1) + w;
}

struct EstimatorSpec {
  EstimatorKind kind = EstimatorKind::Vn;
  std::optional<int> w;
  std::optional<PsiFamily> psi_family;

  static EstimatorSpec parse(std::string_view text);

  /// Kind plus ψ family, without w ("rmn", "lstat_adj:family=exp").
  std::string label() const {
    switch (kind) {
      case EstimatorKind::Vn: return "vn";
      case EstimatorKind::Rn: return "rn";
      case EstimatorKind::Rmn: return "rmn";
      case EstimatorKind::LStat: return "lstat";
      case EstimatorKind::LStatAdjusted:
        return std::string("lstat_adj:family=") + (psi_family ? crexlab::to_string(*psi_family) : "?");
    }
    return "?";
  }

  std::string to_string() const {
    if (kind == EstimatorKind::Rmn) return "rmn:w=" + std::to_string(w.value_or(0));
    if (kind == EstimatorKind::LStatAdjusted) return label() + ",w=" + std::to_string(w.value_or(0));
    return label();
  }

  bool uses_w() const noexcept { return kind == EstimatorKind::Rmn || kind == EstimatorKind::LStatAdjusted; }

  /// w present exactly for Rmn/LStatAdjusted; ψ family exactly for LStatAdjusted.
  void validate() const {
    if (uses_w() != w.has_value()) {
      throw ParseError("estimator '" + label() + "': w is " + (uses_w() ? "required" : "not accepted"));
    }
    if ((kind == EstimatorKind::LStatAdjusted) != psi_family.has_value()) {
      throw ParseError("estimator '" + label() + "': family is " +
                       (kind == EstimatorKind::LStatAdjusted ? "required" : "not accepted"));
    }
  }

  friend bool operator==(const EstimatorSpec&, const EstimatorSpec&) = default;
};

inline EstimatorSpec EstimatorSpec::parse(std::string_view text) {
  text = detail::trim(text);
  const auto colon = text.find(':');
  const std::string name(detail::trim(text.substr(0, colon)));
  const std::string context = "estimator spec '" + std::string(text) + "'";
  const auto pairs =
      detail::parse_key_values(colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1), context);

  EstimatorSpec spec;
  if (name == "vn") spec.kind = EstimatorKind::Vn;
  else if (name == "rn") spec.kind = EstimatorKind::Rn;
  else if (name == "rmn") spec.kind = EstimatorKind::Rmn;
  else if (name == "lstat") spec.kind = EstimatorKind::LStat;
  else if (name == "lstat_adj") spec.kind = EstimatorKind::LStatAdjusted;
  else throw ParseError("unknown estimator '" + name + "' in " + context);

  for (const auto& [key, value] : pairs) {
    if (key == "w") {
      const double v = detail::parse_number(value, context);
      if (v != std::floor(v) || std::abs(v) > 1e6) throw ParseError("w must be an integer in " + context);
      spec.w = static_cast<int>(v);
    } else if (key == "family") {
      spec.psi_family = parse_psi_family(value);
    } else {
      throw ParseError("unknown parameter '" + key + "' in " + context);
    }
  }
  spec.validate();
  return spec;
}

namespace detail {

inline std::vector<double> sorted_copy(std::span<const double> sample) {
  std::vector<double> v(sample.begin(), sample.end());
  std::sort(v.begin(), v.end());
  return v;
}

/// -1/2 Σ_{k=1}^{n-1} (x_(k+1) - x_(k)) (1 - k/denominator)^2 over sorted x.
inline double spacing_estimate(const std::vector<double>& sorted, double denominator) {
  long double total = 0.0L;
  for (std::size_t k = 1; k < sorted.size(); ++k) {
    const double weight = 1.0 - static_cast<double>(k) / denominator;
    total += static_cast<long double>(sorted[k] - sorted[k - 1]) * weight * weight;
  }
  return static_cast<double>(-0.5L * total);
}

/// -1/n Σ_{i=1}^n (1 - i/denominator) x_(i) over sorted x.
inline double lstat_estimate(const std::vector<double>& sorted, double denominator) {
  long double total = 0.0L;
  for (std::size_t i = 1; i <= sorted.size(); ++i) {
    total += static_cast<long double>(1.0 - static_cast<double>(i) / denominator) * sorted[i - 1];
  }
  return static_cast<double>(-total / static_cast<long double>(sorted.size()));
}

inline void require_nonnegative(const std::vector<double>& sorted, const char* what) {
  if (!sorted.empty() && sorted.front() < 0.0) {
    throw DomainError(std::string(what) + ": values must be nonnegative");
  }
}

}  // namespace detail

/// V_n on an SRS. Input need not be sorted.
inline double vn(std::span<const double> sample) {
  if (sample.size() < 2) throw SizeError("vn: need n >= 2, got " + std::to_string(sample.size()));
  const auto sorted = detail::sorted_copy(sample);
  return detail::spacing_estimate(sorted, static_cast<double>(sorted.size()));
}

inline double rn(const MinRssuSample& s) {
  if (s.n() < 2) throw SizeError("rn: need n >= 2");
  return detail::spacing_estimate(pooled_order_statistics(s), static_cast<double>(s.n()));
}

/// R_{m,n} over already-pooled values with an explicit set count m.
inline double rmn_pooled(std::span<const double> pooled, int m, int w) {
  const std::size_t n = pooled.size();
  if (n < 2) throw SizeError("rmn: need n >= 2, got " + std::to_string(n));
  const long long denominator = static_cast<long long>(n) + m + w;
  if (denominator <= static_cast<long long>(n) - 1) {
    throw ParameterError("rmn: n+m+w = " + std::to_string(denominator) + " makes weight 1-k/(n+m+w) <= 0 for k = n-1 = " +
                         std::to_string(n - 1));
  }
  return detail::spacing_estimate(detail::sorted_copy(pooled), static_cast<double>(denominator));
}

inline double rmn(const MinRssuSample& s, int w) { return rmn_pooled(s.values(), s.m(), w); }

/// Plug-in L-statistic -1/n Σ (1 - i/n) X_(i). Input need not be sorted.
inline double lstat(std::span<const double> sample) {
  if (sample.empty()) throw SizeError("lstat: need n >= 1");
  const auto sorted = detail::sorted_copy(sample);
  detail::require_nonnegative(sorted, "lstat");
  return detail::lstat_estimate(sorted, static_cast<double>(sorted.size()));
}

/// -1/n Σ (1 - i/(n+offset)) Y_(i) for an explicit ψ offset.
inline double lstat_with_offset(std::span<const double> pooled, int offset) {
  if (pooled.empty()) throw SizeError("lstat_adjusted: need n >= 1");
  const long long denominator = static_cast<long long>(pooled.size()) + offset;
  if (denominator <= 0) {
    throw ParameterError("lstat_adjusted: n+psi = " + std::to_string(denominator) + " must be positive");
  }
  const auto sorted = detail::sorted_copy(pooled);
  detail::require_nonnegative(sorted, "lstat_adjusted");
  return detail::lstat_estimate(sorted, static_cast<double>(denominator));
}

inline double lstat_adjusted(const MinRssuSample& s, PsiFamily family, int w) {
  return lstat_with_offset(s.values(), psi(family, s.m(), w));
}

/// Pooled order statistics of one replication, as consumed by `evaluate`.
/// For Vn the values are an SRS of size m·l; for every other kind they are
/// the pooled MinRSSU values.
struct DesignSample {
  int m = 1;
  int l = 1;
  std::vector<double> values;
};

/// Checks that `spec` can be evaluated on an m·l sample without a parameter error.
inline void validate_for_design(const EstimatorSpec& spec, int m, int l) {
  spec.validate();
  const long long n = static_cast<long long>(m) * l;
  if (n < 2 && spec.kind != EstimatorKind::LStat && spec.kind != EstimatorKind::LStatAdjusted) {
    throw SizeError("estimator " + spec.to_string() + " needs n >= 2");
  }
  if (spec.kind == EstimatorKind::Rmn && n + m + *spec.w <= n - 1) {
    throw ParameterError("rmn: n+m+w = " + std::to_string(n + m + *spec.w) + " <= n-1 = " + std::to_string(n - 1));
  }
  if (spec.kind == EstimatorKind::LStatAdjusted) {
    const int offset = psi(*spec.psi_family, m, *spec.w);
    if (n + offset <= 0) {
      throw ParameterError("lstat_adjusted: n+psi(m,w) = " + std::to_string(n + offset) + " must be positive");
    }
  }
}

inline double evaluate(const EstimatorSpec& spec, const DesignSample& sample) {
  switch (spec.kind) {
    case EstimatorKind::Vn:
    case EstimatorKind::Rn:
      return vn(sample.values);
    case EstimatorKind::Rmn:
      return rmn_pooled(sample.values, sample.m, *spec.w);
    case EstimatorKind::LStat:
      return lstat(sample.values);
    case EstimatorKind::LStatAdjusted:
      return lstat_with_offset(sample.values, psi(*spec.psi_family, sample.m, *spec.w));
  }
  return 0.0;
}

namespace detail {

inline double variance_upper_limit(const ParametricDistribution& d) {
  const Support s = d.support();
  return std::isfinite(s.upper) ? s.upper : d.quantile(1.0 - 1e-12);
}

/// 2 ∫_lo^hi outer(y) [∫_lo^y inner(x) dx] dy: the symmetric double integral
/// of a kernel that factors as inner(x)·outer(y) on the triangle x < y.
/// The range is cut into panels; the inner integral up to each panel start is
/// carried forward so only a short piece is integrated per outer node.
template <class Inner, class Outer>
double triangle_integral(Inner&& inner, Outer&& outer, double lo, double hi, int panels = 64) {
  if (!(hi > lo)) return 0.0;
  // work on the unit square so tolerances do not depend on the support width
  const double width = hi - lo;
  auto in = [&](double u) { return inner(lo + width * u); };
  auto out = [&](double v) { return outer(lo + width * v); };
  quadrature::Options opts;
  opts.rel_tolerance = 1e-10;
  opts.max_depth = 8;
  const double h = 1.0 / panels;
  double carried = 0.0;
  quadrature::Estimate total;
  for (int p = 0; p < panels; ++p) {
    const double a = p * h;
    const double b = p + 1 == panels ? 1.0 : a + h;
    total += quadrature::integrate(
        [&](double v) {
          const double o = out(v);
          if (o == 0.0) return 0.0;
          return o * (carried + quadrature::integrate(in, a, v, opts).value);
        },
        a, b, opts);
    carried += quadrature::integrate(in, a, b, opts).value;
  }
  return 2.0 * width * width * total.value;
}

}  // namespace detail

/// σ²(J,F) = ∫∫ J(F(x)) J(F(y)) [F(min(x,y)) - F(x)F(y)] dx dy with J(u) = 1 - u:
/// asymptotic variance of √n(lstat - ξJ) under SRS.
inline double asymptotic_variance_srs(const ParametricDistribution& d) {
  const double lo = d.support().lower;
  const double hi = detail::variance_upper_limit(d);
  // For x < y the integrand is F̄(x)F(x) · F̄(y)^2.
  return detail::triangle_integral(
      [&d](double x) { return d.survival(x) * d.cdf(x); },
      [&d](double y) {
        const double s = d.survival(y);
        return s * s;
      },
      lo, hi);
}

/// σ²_MinRSSU(J, F̃, K) with F̃ = (1/m) Σ F_(1)i and
/// K(x,y) = (1/m) Σ [F_(1)i(min(x,y)) - F_(1)i(x) F_(1)i(y)], F_(1)i = 1 - F̄^i.
inline double asymptotic_variance_minrssu(const ParametricDistribution& d, int m) {
  if (m < 1) throw DomainError("asymptotic_variance_minrssu: m must be >= 1");
  const double lo = d.support().lower;
  const double hi = detail::variance_upper_limit(d);
  auto mixture_survival = [&d, m](double x) {
    const double s = d.survival(x);
    double total = 0.0;
    double power = 1.0;
    for (int i = 1; i <= m; ++i) {
      power *= s;
      total += power;
    }
    return total / m;
  };
  // For x < y the i-th kernel term is F_(1)i(x) · F̄^i(y); each term is a
  // separate triangle integral.
  double total = 0.0;
  for (int i = 1; i <= m; ++i) {
    total += detail::triangle_integral(
        [&](double x) { return mixture_survival(x) * (1.0 - std::pow(d.survival(x), i)); },
        [&](double y) { return mixture_survival(y) * std::pow(d.survival(y), i); }, lo, hi);
  }
  return total / m;
}

}  // namespace crexlab
