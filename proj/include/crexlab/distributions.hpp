#pragma once

// Parametric lifetime families with analytic pdf, cdf, survival and quantile,
// inverse-transform sampling, and the survival-power integrals
// ∫_t^∞ F̄(x)^k dx that every measure in the library reduces to.
//
// Textual form (used by the CLI and config files):
//
//   spec   := family [ ":" param { "," param } ]
//   param  := key "=" number
//   family := "exp" | "unif" | "finite" | "powerbeta"
//
//   exp:rate=λ            survival e^{-λx} on [0,∞)            default rate=1
//   unif:a=a,b=b          uniform on [a,b], 0 ≤ a < b            default a=0,b=1
//   finite:a=a,b=b        survival (1-ax)^b on [0,1/a]           default a=1,b=1
//   powerbeta:alpha=α     cdf x^α on [0,1], i.e. Beta(α,1)       default alpha=2
//
// Omitted parameters take their defaults; unknown keys are rejected.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "crexlab/error.hpp"
#include "crexlab/quadrature.hpp"
#include "crexlab/rng.hpp"

namespace crexlab {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct Exponential {
  double rate = 1.0;
};

struct Uniform {
  double lower = 0.0;
  double upper = 1.0;
};

/// Survival (1 - scale·x)^shape on [0, 1/scale].
struct FiniteRange {
  double scale = 1.0;
  double shape = 1.0;
};

/// Beta(α, 1): cdf x^α on [0, 1].
struct PowerBeta {
  double alpha = 2.0;
};

struct Support {
  double lower;
  double upper;  ///< may be +infinity
};

namespace detail {

inline std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline double parse_number(std::string_view text, std::string_view context) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  if (!text.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || first == last) {
    throw ParseError("invalid number '" + std::string(text) + "' in " + std::string(context));
  }
  return v;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

/// Splits "k1=v1,k2=v2" into pairs. Empty input yields no pairs.
inline std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text,
                                                                         std::string_view context,
                                                                         char separator = ',') {
  std::vector<std::pair<std::string, std::string>> out;
  text = trim(text);
  if (text.empty()) return out;
  while (true) {
    const auto comma = text.find(separator);
    std::string_view item = trim(text.substr(0, comma));
    const auto eq = item.find('=');
    if (eq == std::string_view::npos || eq == 0 || eq + 1 == item.size()) {
      throw ParseError("expected key=value, got '" + std::string(item) + "' in " +
                       std::string(context));
    }
    std::string key(trim(item.substr(0, eq)));
    for (const auto& kv : out) {
      if (kv.first == key) throw ParseError("duplicate key '" + key + "' in " + std::string(context));
    }
    out.emplace_back(std::move(key), std::string(trim(item.substr(eq + 1))));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return out;
}

}  // namespace detail

class ParametricDistribution {
 public:
  using Family = std::variant<Exponential, Uniform, FiniteRange, PowerBeta>;

  explicit ParametricDistribution(Family family) : family_(family) { validate(); }

  static ParametricDistribution exponential(double rate) { return ParametricDistribution(Exponential{rate}); }
  static ParametricDistribution uniform(double lower, double upper) {
    return ParametricDistribution(Uniform{lower, upper});
  }
  static ParametricDistribution finite_range(double scale, double shape) {
    return ParametricDistribution(FiniteRange{scale, shape});
  }
  static ParametricDistribution power_beta(double alpha) { return ParametricDistribution(PowerBeta{alpha}); }

  /// Parses the textual form documented at the top of this header.
  static ParametricDistribution parse(std::string_view spec);

  const Family& family() const noexcept { return family_; }

  Support support() const noexcept {
    return std::visit(
        [](const auto& f) -> Support {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, Exponential>) return {0.0, kInfinity};
          else if constexpr (std::is_same_v<T, Uniform>) return {f.lower, f.upper};
          else if constexpr (std::is_same_v<T, FiniteRange>) return {0.0, 1.0 / f.scale};
          else return {0.0, 1.0};
        },
        family_);
  }

  bool bounded_above() const noexcept { return std::isfinite(support().upper); }

  double pdf(double x) const noexcept {
    return std::visit(
        [x](const auto& f) -> double {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, Exponential>) {
            return x < 0.0 ? 0.0 : f.rate * std::exp(-f.rate * x);
          } else if constexpr (std::is_same_v<T, Uniform>) {
            return (x < f.lower || x > f.upper) ? 0.0 : 1.0 / (f.upper - f.lower);
          } else if constexpr (std::is_same_v<T, FiniteRange>) {
            if (x < 0.0 || x > 1.0 / f.scale) return 0.0;
            return f.scale * f.shape * std::pow(1.0 - f.scale * x, f.shape - 1.0);
          } else {
            if (x < 0.0 || x > 1.0) return 0.0;
            return f.alpha * std::pow(x, f.alpha - 1.0);
          }
        },
        family_);
  }

  double cdf(double x) const noexcept {
    return std::visit(
        [x](const auto& f) -> double {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, Exponential>) {
            return x <= 0.0 ? 0.0 : -std::expm1(-f.rate * x);
          } else if constexpr (std::is_same_v<T, Uniform>) {
            if (x <= f.lower) return 0.0;
            if (x >= f.upper) return 1.0;
            return (x - f.lower) / (f.upper - f.lower);
          } else if constexpr (std::is_same_v<T, FiniteRange>) {
            if (x <= 0.0) return 0.0;
            if (x >= 1.0 / f.scale) return 1.0;
            return -std::expm1(f.shape * std::log1p(-f.scale * x));
          } else {
            if (x <= 0.0) return 0.0;
            if (x >= 1.0) return 1.0;
            return std::pow(x, f.alpha);
          }
        },
        family_);
  }

  double survival(double x) const noexcept {
    return std::visit(
        [x](const auto& f) -> double {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, Exponential>) {
            return x <= 0.0 ? 1.0 : std::exp(-f.rate * x);
          } else if constexpr (std::is_same_v<T, Uniform>) {
            if (x <= f.lower) return 1.0;
            if (x >= f.upper) return 0.0;
            return (f.upper - x) / (f.upper - f.lower);
          } else if constexpr (std::is_same_v<T, FiniteRange>) {
            if (x <= 0.0) return 1.0;
            if (x >= 1.0 / f.scale) return 0.0;
            return std::pow(1.0 - f.scale * x, f.shape);
          } else {
            if (x <= 0.0) return 1.0;
            if (x >= 1.0) return 0.0;
            return -std::expm1(f.alpha * std::log(x));
          }
        },
        family_);
  }

  /// inf{x : cdf(x) ≥ u}; u = 0 and u = 1 map to the support endpoints.
  double quantile(double u) const {
    if (!(u >= 0.0 && u <= 1.0)) {
      throw DomainError("quantile level " + detail::format_number(u) + " outside [0,1]");
    }
    return std::visit(
        [u](const auto& f) -> double {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, Exponential>) {
            return u == 1.0 ? kInfinity : -std::log1p(-u) / f.rate;
          } else if constexpr (std::is_same_v<T, Uniform>) {
            return u == 1.0 ? f.upper : f.lower + u * (f.upper - f.lower);
          } else if constexpr (std::is_same_v<T, FiniteRange>) {
            if (u == 1.0) return 1.0 / f.scale;
            return -std::expm1(std::log1p(-u) / f.shape) / f.scale;
          } else {
            return std::pow(u, 1.0 / f.alpha);
          }
        },
        family_);
  }

  double mean() const noexcept {
    return std::visit(
        [](const auto& f) -> double {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, Exponential>) return 1.0 / f.rate;
          else if constexpr (std::is_same_v<T, Uniform>) return 0.5 * (f.lower + f.upper);
          else if constexpr (std::is_same_v<T, FiniteRange>) return 1.0 / (f.scale * (1.0 + f.shape));
          else return f.alpha / (f.alpha + 1.0);
        },
        family_);
  }

  /// `count` i.i.d. draws by inverse transform, one uniform per draw.
  std::vector<double> sample(RngStream& rng, std::size_t count) const {
    std::vector<double> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(draw(rng));
    return out;
  }

  double draw(RngStream& rng) const { return quantile(rng.uniform()); }

  /// Closed form of ∫_t^∞ F̄(x)^k dx for k > 0, when the family has one.
  std::optional<double> survival_power_integral_closed_form(double k, double t) const;

  std::string family_name() const {
    static constexpr const char* names[] = {"exp", "unif", "finite", "powerbeta"};
    return names[family_.index()];
  }

  /// Parameter list as "key=value" pairs joined by `separator`.
  std::string params_string(char separator = ',') const {
    std::string out;
    for (const auto& [key, value] : parameters()) {
      if (!out.empty()) out += separator;
      out += key + "=" + detail::format_number(value);
    }
    return out;
  }

  /// Canonical textual form; parse(spec()) reproduces the distribution.
  std::string spec() const { return family_name() + ":" + params_string(','); }

  std::vector<std::pair<std::string, double>> parameters() const {
    return std::visit(
        [](const auto& f) -> std::vector<std::pair<std::string, double>> {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, Exponential>) return {{"rate", f.rate}};
          else if constexpr (std::is_same_v<T, Uniform>) return {{"a", f.lower}, {"b", f.upper}};
          else if constexpr (std::is_same_v<T, FiniteRange>) return {{"a", f.scale}, {"b", f.shape}};
          else return {{"alpha", f.alpha}};
        },
        family_);
  }

  /// Copy with one named parameter replaced (names as in the textual form).
  ParametricDistribution with_parameter(std::string_view name, double value) const {
    return parse(family_name() + ":" + std::string(name) + "=" + detail::format_number(value) +
                 rest_of_params(name));
  }

  friend bool operator==(const ParametricDistribution& a, const ParametricDistribution& b) {
    return a.spec() == b.spec();
  }

 private:
  std::string rest_of_params(std::string_view skip) const {
    std::string out;
    for (const auto& [key, value] : parameters()) {
      if (key == skip) continue;
      out += "," + key + "=" + detail::format_number(value);
    }
    return out;
  }

  void validate() const {
    std::visit(
        [](const auto& f) {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, Exponential>) {
            if (!(f.rate > 0.0 && std::isfinite(f.rate))) throw DomainError("exp: rate must be > 0");
          } else if constexpr (std::is_same_v<T, Uniform>) {
            if (!(f.lower >= 0.0 && f.upper > f.lower && std::isfinite(f.upper))) {
              throw DomainError("unif: need 0 <= a < b");
            }
          } else if constexpr (std::is_same_v<T, FiniteRange>) {
            if (!(f.scale > 0.0 && f.shape > 0.0 && std::isfinite(f.scale) && std::isfinite(f.shape))) {
              throw DomainError("finite: need a > 0 and b > 0");
            }
          } else {
            if (!(f.alpha > 0.0 && std::isfinite(f.alpha))) throw DomainError("powerbeta: alpha must be > 0");
          }
        },
        family_);
  }

  Family family_;
};

inline ParametricDistribution ParametricDistribution::parse(std::string_view spec) {
  spec = detail::trim(spec);
  const auto colon = spec.find(':');
  const std::string name(detail::trim(spec.substr(0, colon)));
  const std::string_view rest = colon == std::string_view::npos ? std::string_view{} : spec.substr(colon + 1);
  const std::string context = "distribution spec '" + std::string(spec) + "'";
  const auto pairs = detail::parse_key_values(rest, context);

  auto take = [&](std::initializer_list<std::pair<const char*, double*>> slots) {
    for (const auto& [key, value] : pairs) {
      bool matched = false;
      for (const auto& [slot_key, slot] : slots) {
        if (key == slot_key) {
          *slot = detail::parse_number(value, context);
          matched = true;
        }
      }
      if (!matched) throw ParseError("unknown parameter '" + key + "' in " + context);
    }
  };

  try {
    if (name == "exp" || name == "exponential") {
      Exponential f;
      take({{"rate", &f.rate}, {"lambda", &f.rate}});
      return ParametricDistribution(f);
    }
    if (name == "unif" || name == "uniform") {
      Uniform f;
      take({{"a", &f.lower}, {"b", &f.upper}});
      return ParametricDistribution(f);
    }
    if (name == "finite" || name == "finiterange") {
      FiniteRange f;
      take({{"a", &f.scale}, {"b", &f.shape}});
      return ParametricDistribution(f);
    }
    if (name == "powerbeta" || name == "beta") {
      PowerBeta f;
      take({{"alpha", &f.alpha}});
      return ParametricDistribution(f);
    }
  } catch (const DomainError& e) {
    throw ParseError(std::string(e.what()) + " in " + context);
  }
  throw ParseError("unknown distribution family '" + name + "' in " + context);
}

inline std::optional<double> ParametricDistribution::survival_power_integral_closed_form(double k,
                                                                                         double t) const {
  return std::visit(
      [k, t](const auto& f) -> std::optional<double> {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, Exponential>) {
          if (t <= 0.0) return -t + 1.0 / (k * f.rate);
          return std::exp(-k * f.rate * t) / (k * f.rate);
        } else if constexpr (std::is_same_v<T, Uniform>) {
          const double width = f.upper - f.lower;
          if (t >= f.upper) return 0.0;
          if (t <= f.lower) return (f.lower - t) + width / (k + 1.0);
          return width * std::pow((f.upper - t) / width, k + 1.0) / (k + 1.0);
        } else if constexpr (std::is_same_v<T, FiniteRange>) {
          const double base = 1.0 / (f.scale * (1.0 + k * f.shape));
          if (t >= 1.0 / f.scale) return 0.0;
          if (t <= 0.0) return -t + base;
          return std::pow(1.0 - f.scale * t, k * f.shape + 1.0) * base;
        } else {
          // ∫_0^1 (1 - x^α)^k dx = Γ(1+1/α) Γ(k+1) / Γ(k+1+1/α)
          if (t >= 1.0) return 0.0;
          if (t > 0.0) return std::nullopt;
          const double inv = 1.0 / f.alpha;
          return -t + std::exp(std::lgamma(1.0 + inv) + std::lgamma(k + 1.0) - std::lgamma(k + 1.0 + inv));
        }
      },
      family_);
}

enum class EvaluationMethod { Auto, ClosedForm, Quadrature };

/// Quadrature of ∫_t^∞ F̄(x)^k dx. The flat part below the support is exact;
/// on unbounded support the range is split at quantile(1 - 1e-12) and the
/// tail is integrated on its own so its contribution enters the error bound.
inline quadrature::Estimate survival_power_integral_quadrature(const ParametricDistribution& d, double k,
                                                               double t) {
  const Support s = d.support();
  quadrature::Estimate total;
  double start = t;
  if (t < s.lower) {
    total.value += s.lower - t;
    start = s.lower;
  }
  auto integrand = [&d, k](double x) { return std::pow(d.survival(x), k); };
  if (std::isfinite(s.upper)) {
    total += quadrature::integrate_graded(integrand, start, s.upper);
    return total;
  }
  const double cut = std::max(start, d.quantile(1.0 - 1e-12));
  total += quadrature::integrate(integrand, start, cut);
  total += quadrature::integrate(integrand, cut, kInfinity);
  return total;
}

/// ∫_t^∞ F̄(x)^k dx by the requested method. `Auto` prefers the closed form.
inline quadrature::Estimate survival_power_integral(const ParametricDistribution& d, double k, double t,
                                                    EvaluationMethod method = EvaluationMethod::Auto) {
  if (method != EvaluationMethod::Quadrature) {
    if (auto closed = d.survival_power_integral_closed_form(k, t)) return {*closed, 0.0};
    if (method == EvaluationMethod::ClosedForm) {
      throw DomainError("no closed form for " + d.spec() + " at t=" + detail::format_number(t));
    }
  }
  return survival_power_integral_quadrature(d, k, t);
}

// Free-function surface.

inline double pdf(const ParametricDistribution& d, double x) { return d.pdf(x); }
inline double cdf(const ParametricDistribution& d, double x) { return d.cdf(x); }
inline double survival(const ParametricDistribution& d, double x) { return d.survival(x); }
inline double quantile(const ParametricDistribution& d, double u) { return d.quantile(u); }

inline std::vector<double> sample(const ParametricDistribution& d, RngStream& rng, std::size_t count) {
  return d.sample(rng, count);
}

/// E[X_(1)j] = ∫_0^∞ F̄(x)^j dx, the mean of the minimum of j draws.
inline double min_order_statistic_mean(const ParametricDistribution& d, int j,
                                       EvaluationMethod method = EvaluationMethod::Auto) {
  if (j < 1) throw DomainError("min_order_statistic_mean: j must be >= 1");
  return survival_power_integral(d, static_cast<double>(j), 0.0, method).value;
}

/// μ(t) = ∫_t^∞ F̄(x) dx / F̄(t).
inline double mean_residual_life(const ParametricDistribution& d, double t,
                                 EvaluationMethod method = EvaluationMethod::Auto) {
  const double tail = d.survival(t);
  if (!(tail > 0.0)) {
    throw DomainError("mean_residual_life: survival is zero at t=" + detail::format_number(t));
  }
  return survival_power_integral(d, 1.0, t, method).value / tail;
}

}  // namespace crexlab
