#pragma once

// Adaptive Gauss-Kronrod integration used by every quadrature path in the
// library. Thin layer over Boost.Math that carries an error estimate and
// turns non-convergence into DivergenceError.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "crexlab/error.hpp"

namespace crexlab::quadrature {

struct Estimate {
  double value = 0.0;
  double error = 0.0;

  Estimate& operator+=(const Estimate& other) {
    value += other.value;
    error += other.error;
    return *this;
  }
};

struct Options {
  double abs_tolerance = 1e-10;
  /// Relative tolerance handed to the Kronrod refinement.
  double rel_tolerance = 1e-10;
  unsigned max_depth = 15;
  /// Error estimates above this (scaled by max(1,|value|)) are treated as divergence.
  double divergence_threshold = 1e-6;
};

/// ∫_a^b f(x) dx; b may be +infinity. Throws DivergenceError when the
/// estimate is not finite or the error estimate stays above the threshold.
template <class F>
Estimate integrate(F&& f, double a, double b, const Options& opts = {}) {
  if (!(b > a)) return {};
  double error = 0.0;
  double l1 = 0.0;
  const double value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
      f, a, b, opts.max_depth, opts.rel_tolerance, &error, &l1);
  if (!std::isfinite(value) || !std::isfinite(error) ||
      error > opts.divergence_threshold * std::max(1.0, std::abs(value))) {
    throw DivergenceError("integral over [" + std::to_string(a) + ", " + std::to_string(b) +
                          "] did not converge (error estimate " + std::to_string(error) + ")");
  }
  return {value, error};
}

/// ∫_a^b f on a finite interval, split into panels that halve in width
/// towards both endpoints so algebraic endpoint singularities are resolved.
template <class F>
Estimate integrate_graded(F&& f, double a, double b, Options opts = {}, int levels = 48) {
  if (!(b > a)) return {};
  // each panel is smooth on its own scale; deep recursion only burns time on roundoff
  opts.max_depth = std::min(opts.max_depth, 8u);
  const double half = 0.5 * (b - a);
  Estimate total;
  double inner = half;
  const double floor_width = 256.0 * std::numeric_limits<double>::epsilon() * std::max({std::abs(a), std::abs(b), half});
  for (int j = 0; j < levels && inner * 0.5 > floor_width; ++j) {
    const double outer = inner * 0.5;
    total += integrate(f, a + outer, a + inner, opts);
    total += integrate(f, b - inner, b - outer, opts);
    inner = outer;
  }
  total += integrate(f, a, a + inner, opts);
  total += integrate(f, b - inner, b, opts);
  return total;
}

}  // namespace crexlab::quadrature
