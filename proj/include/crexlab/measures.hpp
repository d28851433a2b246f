#pragma once

// Cumulative residual extropy (CREX) and its relatives:
//
//   extropy              J(X)     = -1/2 ∫ f(x)^2 dx
//   CREX                 ξJ(X)    = -1/2 ∫_0^∞ F̄(x)^2 dx
//   cumulative extropy   CJ(X)    = -1/2 ∫_0^{sup} F(x)^2 dx
//   dynamic CREX         ξJ(X;t)  = -1/2 ∫_t^∞ (F̄(x)/F̄(t))^2 dx
//
// and the design-level values for m sets,
//
//   MinRSSU  -1/2 ∏_{i=1}^m ∫ F̄^{2i}        SRS  -1/2 (∫ F̄^2)^m
//
// Everything routes through survival_power_integral, so each value is
// available both in closed form (all four families at t = 0) and by
// quadrature.

#include <cmath>
#include <utility>
#include <vector>

#include "crexlab/distributions.hpp"
#include "crexlab/error.hpp"
#include "crexlab/quadrature.hpp"

namespace crexlab {

enum class Method { ClosedForm, Quadrature };

inline const char* to_string(Method m) { return m == Method::ClosedForm ? "closed-form" : "quadrature"; }

struct CrexValue {
  double value = 0.0;
  Method method = Method::ClosedForm;
  double abs_error_bound = 0.0;
};

namespace detail {

struct Factor {
  double value;
  double error;
  bool closed;
};

inline Factor survival_factor(const ParametricDistribution& d, double k, double t, EvaluationMethod method) {
  if (method != EvaluationMethod::Quadrature) {
    if (auto closed = d.survival_power_integral_closed_form(k, t)) return {*closed, 0.0, true};
    if (method == EvaluationMethod::ClosedForm) {
      throw DomainError("no closed form for " + d.spec() + " at t=" + format_number(t));
    }
  }
  const auto q = survival_power_integral_quadrature(d, k, t);
  return {q.value, q.error, false};
}

inline double require_positive_survival(const ParametricDistribution& d, double t, const char* what) {
  const double s = d.survival(t);
  if (!(s > 0.0)) throw DomainError(std::string(what) + ": survival is zero at t=" + format_number(t));
  return s;
}

/// -1/2 ∏ factors. Switches to log-space above 20 factors.
inline CrexValue half_negated_product(const std::vector<Factor>& factors) {
  bool closed = true;
  double relative_error = 0.0;
  for (const auto& f : factors) {
    closed = closed && f.closed;
    if (f.value > 0.0) relative_error += f.error / f.value;
  }
  double product = 1.0;
  if (factors.size() > 20) {
    double log_sum = 0.0;
    for (const auto& f : factors) {
      if (f.value <= 0.0) {
        log_sum = -kInfinity;
        break;
      }
      log_sum += std::log(f.value);
    }
    product = std::exp(log_sum);
  } else {
    for (const auto& f : factors) product *= f.value;
  }
  CrexValue out;
  out.value = -0.5 * product;
  out.method = closed ? Method::ClosedForm : Method::Quadrature;
  out.abs_error_bound = closed ? 0.0 : 0.5 * product * relative_error;
  return out;
}

inline void require_m(int m, const char* what) {
  if (m < 1) throw DomainError(std::string(what) + ": m must be >= 1");
}

}  // namespace detail

/// J(X) = -1/2 ∫ f^2.
inline double extropy(const ParametricDistribution& d, EvaluationMethod method = EvaluationMethod::Auto) {
  if (method != EvaluationMethod::Quadrature) {
    const auto closed = std::visit(
        [](const auto& f) -> std::optional<double> {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, Exponential>) {
            return -0.25 * f.rate;
          } else if constexpr (std::is_same_v<T, Uniform>) {
            return -0.5 / (f.upper - f.lower);
          } else if constexpr (std::is_same_v<T, FiniteRange>) {
            if (f.shape <= 0.5) throw DivergenceError("extropy: pdf of finite-range b<=1/2 is not square-integrable");
            return -0.5 * f.scale * f.shape * f.shape / (2.0 * f.shape - 1.0);
          } else {
            if (f.alpha <= 0.5) throw DivergenceError("extropy: pdf of powerbeta alpha<=1/2 is not square-integrable");
            return -0.5 * f.alpha * f.alpha / (2.0 * f.alpha - 1.0);
          }
        },
        d.family());
    if (closed) return *closed;
  }
  const Support s = d.support();
  auto sq = [&d](double x) {
    const double p = d.pdf(x);
    return p * p;
  };
  quadrature::Estimate total;
  if (std::isfinite(s.upper)) {
    total = quadrature::integrate_graded(sq, s.lower, s.upper);
  } else {
    const double cut = d.quantile(1.0 - 1e-12);
    total = quadrature::integrate(sq, s.lower, cut);
    total += quadrature::integrate(sq, cut, kInfinity);
  }
  return -0.5 * total.value;
}

/// ξJ(X) = -1/2 ∫_0^∞ F̄^2.
inline CrexValue crex(const ParametricDistribution& d, EvaluationMethod method = EvaluationMethod::Auto) {
  return detail::half_negated_product({detail::survival_factor(d, 2.0, 0.0, method)});
}

/// CJ(X) = -1/2 ∫_0^{sup} F^2; requires bounded support.
inline double cumulative_extropy(const ParametricDistribution& d, EvaluationMethod method = EvaluationMethod::Auto) {
  if (!d.bounded_above()) {
    throw DivergenceError("cumulative_extropy: diverges for unbounded support (" + d.spec() + ")");
  }
  if (method != EvaluationMethod::Quadrature) {
    const double closed = std::visit(
        [](const auto& f) -> double {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, Uniform>) {
            return (f.upper - f.lower) / 3.0;
          } else if constexpr (std::is_same_v<T, FiniteRange>) {
            return (1.0 - 2.0 / (f.shape + 1.0) + 1.0 / (2.0 * f.shape + 1.0)) / f.scale;
          } else if constexpr (std::is_same_v<T, PowerBeta>) {
            return 1.0 / (2.0 * f.alpha + 1.0);
          } else {
            return kInfinity;
          }
        },
        d.family());
    return -0.5 * closed;
  }
  const Support s = d.support();
  const auto q = quadrature::integrate_graded(
      [&d](double x) {
        const double c = d.cdf(x);
        return c * c;
      },
      s.lower, s.upper);
  return -0.5 * q.value;
}

/// ξJ(X;t) = -1/2 ∫_t^∞ (F̄(x)/F̄(t))^2 dx.
inline CrexValue dynamic_crex(const ParametricDistribution& d, double t,
                              EvaluationMethod method = EvaluationMethod::Auto) {
  const double st = detail::require_positive_survival(d, t, "dynamic_crex");
  auto f = detail::survival_factor(d, 2.0, t, method);
  const double scale = 1.0 / (st * st);
  return detail::half_negated_product({{f.value * scale, f.error * scale, f.closed}});
}

/// ξJ(X_(1)i) = -1/2 ∫_0^∞ F̄^{2i}: CREX of the minimum of i draws.
inline CrexValue crex_min_order_stat(const ParametricDistribution& d, int i,
                                     EvaluationMethod method = EvaluationMethod::Auto) {
  if (i < 1) throw DomainError("crex_min_order_stat: i must be >= 1");
  return detail::half_negated_product({detail::survival_factor(d, 2.0 * i, 0.0, method)});
}

/// Design-level CREX of an m-set MinRSSU sample: -1/2 ∏_{i=1}^m ∫_0^∞ F̄^{2i}.
inline CrexValue crex_minrssu_design(const ParametricDistribution& d, int m,
                                     EvaluationMethod method = EvaluationMethod::Auto) {
  detail::require_m(m, "crex_minrssu_design");
  std::vector<detail::Factor> factors;
  factors.reserve(static_cast<std::size_t>(m));
  for (int i = 1; i <= m; ++i) factors.push_back(detail::survival_factor(d, 2.0 * i, 0.0, method));
  return detail::half_negated_product(factors);
}

/// Design-level CREX of an SRS of size m: -1/2 (∫_0^∞ F̄^2)^m.
inline CrexValue crex_srs_design(const ParametricDistribution& d, int m,
                                 EvaluationMethod method = EvaluationMethod::Auto) {
  detail::require_m(m, "crex_srs_design");
  const auto f = detail::survival_factor(d, 2.0, 0.0, method);
  return detail::half_negated_product(std::vector<detail::Factor>(static_cast<std::size_t>(m), f));
}

struct DesignPair {
  CrexValue minrssu;
  CrexValue srs;
};

/// Dynamic design values at age t: minima of i draws conditioned on survival past t.
inline DesignPair dynamic_crex_designs(const ParametricDistribution& d, int m, double t,
                                       EvaluationMethod method = EvaluationMethod::Auto) {
  detail::require_m(m, "dynamic_crex_designs");
  const double st = detail::require_positive_survival(d, t, "dynamic_crex_designs");
  std::vector<detail::Factor> minima;
  minima.reserve(static_cast<std::size_t>(m));
  for (int i = 1; i <= m; ++i) {
    auto f = detail::survival_factor(d, 2.0 * i, t, method);
    const double scale = std::pow(st, -2.0 * i);
    minima.push_back({f.value * scale, f.error * scale, f.closed});
  }
  auto base = detail::survival_factor(d, 2.0, t, method);
  const double scale = 1.0 / (st * st);
  const detail::Factor srs_factor{base.value * scale, base.error * scale, base.closed};
  return {detail::half_negated_product(minima),
          detail::half_negated_product(std::vector<detail::Factor>(static_cast<std::size_t>(m), srs_factor))};
}

}  // namespace crexlab
