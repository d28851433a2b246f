#pragma once

// Survival-based discrimination between the minimum of i draws and its
// parent, and between the MinRSSU and SRS designs:
//
//   D(F̄_(1)i : F̄) = -1/2 ∫ F̄^i (F̄^i - F̄) dx = -1/2 [E X_(1)2i - E X_(1)i+1]
//   D(MinRSSU : SRS) = -1/2 [∏_{i=1}^m E X_(1)2i - ∏_{i=1}^m E X_(1)i+1]

#include <cmath>

#include "crexlab/distributions.hpp"
#include "crexlab/measures.hpp"
#include "crexlab/quadrature.hpp"

namespace crexlab {

struct DiscriminationValue {
  double value = 0.0;
  int i_or_m = 1;
  Method method = Method::ClosedForm;
};

namespace detail {

inline bool has_closed_minimum_means(const ParametricDistribution& d) {
  return d.survival_power_integral_closed_form(1.0, 0.0).has_value();
}

}  // namespace detail

/// Mean-difference form, using min_order_statistic_mean.
inline DiscriminationValue d_min_vs_parent(const ParametricDistribution& d, int i,
                                           EvaluationMethod method = EvaluationMethod::Auto) {
  if (i < 1) throw DomainError("d_min_vs_parent: i must be >= 1");
  DiscriminationValue out;
  out.i_or_m = i;
  if (i == 1) return out;
  const double doubled = min_order_statistic_mean(d, 2 * i, method);
  const double shifted = min_order_statistic_mean(d, i + 1, method);
  out.value = -0.5 * (doubled - shifted);
  out.method = (method == EvaluationMethod::Quadrature || !detail::has_closed_minimum_means(d)) ? Method::Quadrature
                                                                                                 : Method::ClosedForm;
  return out;
}

/// Direct quadrature of -1/2 ∫ F̄^i (F̄^i - F̄) dx.
inline DiscriminationValue d_min_vs_parent_integral(const ParametricDistribution& d, int i) {
  if (i < 1) throw DomainError("d_min_vs_parent_integral: i must be >= 1");
  const Support s = d.support();
  auto integrand = [&d, i](double x) {
    const double sv = d.survival(x);
    const double si = std::pow(sv, i);
    return si * (si - sv);
  };
  quadrature::Estimate total;
  if (std::isfinite(s.upper)) {
    total = quadrature::integrate_graded(integrand, s.lower, s.upper);
  } else {
    const double cut = d.quantile(1.0 - 1e-12);
    total = quadrature::integrate(integrand, s.lower, cut);
    total += quadrature::integrate(integrand, cut, kInfinity);
  }
  return {-0.5 * total.value, i, Method::Quadrature};
}

inline DiscriminationValue d_designs(const ParametricDistribution& d, int m,
                                     EvaluationMethod method = EvaluationMethod::Auto) {
  if (m < 1) throw DomainError("d_designs: m must be >= 1");
  double minrssu = 1.0;
  double srs = 1.0;
  for (int i = 1; i <= m; ++i) {
    minrssu *= min_order_statistic_mean(d, 2 * i, method);
    srs *= min_order_statistic_mean(d, i + 1, method);
  }
  DiscriminationValue out;
  out.i_or_m = m;
  out.value = m == 1 ? 0.0 : -0.5 * (minrssu - srs);
  out.method = (method == EvaluationMethod::Quadrature || !detail::has_closed_minimum_means(d)) ? Method::Quadrature
                                                                                               : Method::ClosedForm;
  return out;
}

}  // namespace crexlab
