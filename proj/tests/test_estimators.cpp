// Empirical CREX estimators, ψ offsets, spec parsing and the asymptotic
// variance functionals.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "crexlab/estimators.hpp"
#include "crexlab/measures.hpp"
#include "support/oracles.hpp"

using Catch::Approx;
using crexlab::EstimatorKind;
using crexlab::EstimatorSpec;
using crexlab::MinRssuSample;
using crexlab::ParametricDistribution;
using crexlab::PsiFamily;
using crexlab::RngStream;

namespace {

const std::vector<double> kSmall{1.0, 2.0, 4.0};

/// −(1/2)Σ (X_(k+1)−X_(k))(1−k/D)², written out independently of the library.
double spreadsheet_spacings(std::vector<double> x, double denominator) {
  std::sort(x.begin(), x.end());
  double total = 0.0;
  for (std::size_t k = 1; k < x.size(); ++k) {
    const double weight = 1.0 - static_cast<double>(k) / denominator;
    total += (x[k] - x[k - 1]) * weight * weight;
  }
  return -0.5 * total;
}

std::vector<double> random_sample(std::mt19937_64& gen, std::size_t n) {
  std::gamma_distribution<double> g(1.5, 2.0);
  std::vector<double> v(n);
  for (auto& x : v) x = g(gen);
  return v;
}

}  // namespace

TEST_CASE("EmpiricalSurvival: step heights", "[estimators][ecdf]") {
  const crexlab::EmpiricalSurvival s(kSmall);
  CHECK(s(0.5) == 1.0);
  CHECK(s(1.0) == Approx(2.0 / 3.0));
  CHECK(s(1.5) == Approx(2.0 / 3.0));
  CHECK(s(2.0) == Approx(1.0 / 3.0));
  CHECK(s(4.0) == 0.0);
  CHECK(s(9.0) == 0.0);
  CHECK(s.integral_of_square() == Approx(2.0 / 3.0).margin(1e-15));
  CHECK_THROWS_AS(crexlab::EmpiricalSurvival({}), crexlab::SizeError);
}

TEST_CASE("vn: examples", "[estimators][vn]") {
  CHECK(crexlab::vn(kSmall) == Approx(-1.0 / 3.0).margin(1e-15));
  CHECK(oracle::empirical_half_square_integral(kSmall) == Approx(-1.0 / 3.0).margin(1e-15));
  CHECK(crexlab::vn(std::vector<double>{2.5, 2.5, 2.5}) == 0.0);
  CHECK(crexlab::vn(std::vector<double>{4.0, 1.0, 2.0}) == Approx(-1.0 / 3.0).margin(1e-15));
  CHECK_THROWS_AS(crexlab::vn(std::vector<double>{1.0}), crexlab::SizeError);

  RngStream gen(10);
  const auto x = crexlab::draw_srs(ParametricDistribution::exponential(1.0), 10000, gen);
  CHECK(crexlab::vn(x) == Approx(-0.25).margin(0.02));
}

TEST_CASE("rn: examples", "[estimators][rn]") {
  const MinRssuSample pooled(3, 1, kSmall);
  CHECK(crexlab::rn(pooled) == Approx(-1.0 / 3.0).margin(1e-15));
  const MinRssuSample flat(2, 2, {3.0, 3.0, 3.0, 3.0});
  CHECK(crexlab::rn(flat) == 0.0);
  RngStream gen(3);
  const auto s = crexlab::draw_minrssu(ParametricDistribution::exponential(1.0), 1, 50, gen);
  CHECK(crexlab::rn(s) == crexlab::vn(s.values()));
  CHECK_THROWS_AS(crexlab::rn(MinRssuSample(1, 1, {1.0})), crexlab::SizeError);
}

TEST_CASE("rmn: examples", "[estimators][rmn]") {
  // pooled {1,2,4} with denominator 6: −(1/2)[(5/6)² + 2(4/6)²] = −57/72
  CHECK(crexlab::rmn_pooled(kSmall, 2, 1) == Approx(-57.0 / 72.0).margin(1e-15));
  CHECK(spreadsheet_spacings(kSmall, 6.0) == Approx(-57.0 / 72.0).margin(1e-15));
  CHECK(crexlab::rmn(MinRssuSample(3, 1, kSmall), 0) == Approx(-57.0 / 72.0).margin(1e-15));

  // n+m+w = n reduces to rn
  RngStream gen(12);
  const auto s = crexlab::draw_minrssu(ParametricDistribution::uniform(0.0, 1.0), 3, 4, gen);
  CHECK(crexlab::rmn(s, -3) == Approx(crexlab::rn(s)).margin(1e-15));

  // n=3: need n+m+w > 2
  CHECK_THROWS_AS(crexlab::rmn_pooled(kSmall, 2, -3), crexlab::ParameterError);
  CHECK_NOTHROW(crexlab::rmn_pooled(kSmall, 2, -2));
}

TEST_CASE("lstat: examples", "[estimators][lstat]") {
  CHECK(crexlab::lstat(kSmall) == Approx(-4.0 / 9.0).margin(1e-15));
  CHECK(oracle::plug_in_lstat(kSmall) == Approx(-4.0 / 9.0).margin(1e-15));
  CHECK(crexlab::lstat(std::vector<double>{7.0}) == 0.0);
  CHECK_THROWS_AS(crexlab::lstat(std::vector<double>{}), crexlab::SizeError);
  CHECK_THROWS_AS(crexlab::lstat(std::vector<double>{-1.0, 2.0}), crexlab::DomainError);

  RngStream gen(21);
  const auto x = crexlab::draw_srs(ParametricDistribution::uniform(0.0, 1.0), 10000, gen);
  CHECK(crexlab::lstat(x) == Approx(-1.0 / 6.0).margin(0.01));
}

TEST_CASE("psi: examples and k_m tables", "[estimators][psi]") {
  CHECK(crexlab::psi(PsiFamily::ExponentialForm, 2, 0) == -2);
  CHECK(crexlab::psi(PsiFamily::UniformForm, 2, 0) == 7);
  CHECK(crexlab::psi(PsiFamily::BetaForm, 3, 1) == 2);
  const int k_exp[] = {3, 2, 1, 0};
  const int k_unif[] = {-1, 0, 1, 2};
  for (int m = 2; m <= 5; ++m) {
    for (int w = -4; w <= 4; ++w) {
      CHECK(crexlab::psi(PsiFamily::ExponentialForm, m, w) == 5 * m - 4 * k_exp[m - 2] + w);
      CHECK(crexlab::psi(PsiFamily::UniformForm, m, w) == 3 * m - (2 * k_unif[m - 2] + 1) + w);
      CHECK(crexlab::psi(PsiFamily::BetaForm, m, w) == m - w);
    }
  }
  CHECK_THROWS_AS(crexlab::psi(PsiFamily::ExponentialForm, 1, 0), crexlab::DomainError);
  CHECK_THROWS_AS(crexlab::psi(PsiFamily::UniformForm, 6, 0), crexlab::DomainError);
  CHECK(crexlab::psi(PsiFamily::BetaForm, 9, 0) == 9);
}

TEST_CASE("lstat_adjusted: examples", "[estimators][lstat-adj]") {
  // ψ = 3 on {1,2,4}: −(1/3)(5/6 + 8/6 + 12/6) = −25/18
  CHECK(crexlab::lstat_with_offset(kSmall, 3) == Approx(-25.0 / 18.0).margin(1e-15));
  const double by_hand = -(1.0 / 3.0) * (5.0 / 6.0 * 1 + 4.0 / 6.0 * 2 + 3.0 / 6.0 * 4);
  CHECK(by_hand == Approx(-25.0 / 18.0).margin(1e-15));
  // BetaForm with m = w gives ψ = 0
  const MinRssuSample s(3, 1, kSmall);
  CHECK(crexlab::lstat_adjusted(s, PsiFamily::BetaForm, 3) == Approx(crexlab::lstat(kSmall)).margin(1e-15));
  CHECK(crexlab::lstat_adjusted(s, PsiFamily::BetaForm, 0) == Approx(-25.0 / 18.0).margin(1e-15));
  CHECK_THROWS_AS(crexlab::lstat_with_offset(kSmall, -3), crexlab::ParameterError);
  CHECK_THROWS_AS(crexlab::lstat_adjusted(MinRssuSample(2, 2, {1, 2, 3, 4}), PsiFamily::ExponentialForm, -11),
                  crexlab::ParameterError);
}

TEST_CASE("EstimatorSpec: grammar", "[estimators][spec]") {
  CHECK(EstimatorSpec::parse("vn").kind == EstimatorKind::Vn);
  CHECK(EstimatorSpec::parse("rn").kind == EstimatorKind::Rn);
  const auto r = EstimatorSpec::parse("rmn:w=-2");
  CHECK(r.kind == EstimatorKind::Rmn);
  CHECK(r.w == -2);
  const auto a = EstimatorSpec::parse("lstat_adj:family=exp,w=0");
  CHECK(a.kind == EstimatorKind::LStatAdjusted);
  CHECK(a.psi_family == PsiFamily::ExponentialForm);
  CHECK(a.w == 0);
  CHECK(a.to_string() == "lstat_adj:family=exp,w=0");
  CHECK(a.label() == "lstat_adj:family=exp");
  for (const char* text : {"vn", "rn", "lstat", "rmn:w=3", "lstat_adj:family=unif,w=-4", "lstat_adj:family=beta,w=1"}) {
    CHECK(EstimatorSpec::parse(EstimatorSpec::parse(text).to_string()) == EstimatorSpec::parse(text));
  }
  using crexlab::ParseError;
  CHECK_THROWS_AS(EstimatorSpec::parse("rmn"), ParseError);
  CHECK_THROWS_AS(EstimatorSpec::parse("vn:w=1"), ParseError);
  CHECK_THROWS_AS(EstimatorSpec::parse("lstat_adj:w=1"), ParseError);
  CHECK_THROWS_AS(EstimatorSpec::parse("lstat_adj:family=gamma,w=1"), ParseError);
  CHECK_THROWS_AS(EstimatorSpec::parse("rmn:w=1.5"), ParseError);
  CHECK_THROWS_AS(EstimatorSpec::parse("entropy"), ParseError);
}

TEST_CASE("validate_for_design rejects infeasible cells", "[estimators][spec]") {
  using crexlab::validate_for_design;
  CHECK_NOTHROW(validate_for_design(EstimatorSpec::parse("rmn:w=-2"), 2, 2));
  CHECK_THROWS_AS(validate_for_design(EstimatorSpec::parse("rmn:w=-3"), 2, 2), crexlab::ParameterError);
  CHECK_THROWS_AS(validate_for_design(EstimatorSpec::parse("rmn:w=-3"), 2, 1), crexlab::ParameterError);
  CHECK_THROWS_AS(validate_for_design(EstimatorSpec::parse("lstat_adj:family=exp,w=-11"), 2, 2),
                  crexlab::ParameterError);
  CHECK_NOTHROW(validate_for_design(EstimatorSpec::parse("lstat_adj:family=exp,w=1"), 5, 2));
  CHECK_THROWS_AS(validate_for_design(EstimatorSpec::parse("vn"), 1, 1), crexlab::SizeError);
}

TEST_CASE("invariant: vn equals half the negated integral of the squared empirical survival",
          "[estimators][property]") {
  std::mt19937_64 gen(1);
  for (int trial = 0; trial < 200; ++trial) {
    const auto x = random_sample(gen, 2 + trial % 40);
    const double direct = -0.5 * crexlab::EmpiricalSurvival(x).integral_of_square();
    REQUIRE(crexlab::vn(x) == Approx(direct).margin(1e-12));
    REQUIRE(crexlab::vn(x) == Approx(oracle::empirical_half_square_integral(x)).margin(1e-12));
  }
}

TEST_CASE("invariant: scale and shift behaviour of vn and lstat", "[estimators][property]") {
  std::mt19937_64 gen(2);
  for (int trial = 0; trial < 100; ++trial) {
    auto x = random_sample(gen, 30);
    const double a = 0.5 + trial * 0.05;
    std::vector<double> scaled(x);
    std::vector<double> shifted(x);
    for (auto& v : scaled) v *= a;
    for (auto& v : shifted) v += 3.0;
    REQUIRE(crexlab::vn(scaled) == Approx(a * crexlab::vn(x)).margin(1e-12));
    REQUIRE(crexlab::vn(shifted) == Approx(crexlab::vn(x)).margin(1e-12));
    REQUIRE(crexlab::lstat(scaled) == Approx(a * crexlab::lstat(x)).margin(1e-12));
    // weights multiply values, so a shift moves lstat by −3·(n−1)/(2n)
    REQUIRE(crexlab::lstat(shifted) < crexlab::lstat(x));
    REQUIRE(crexlab::lstat(shifted) == Approx(crexlab::lstat(x) - 3.0 * 29.0 / 60.0).margin(1e-12));
    REQUIRE(crexlab::lstat(x) == Approx(oracle::plug_in_lstat(x)).margin(1e-12));
  }
}

TEST_CASE("invariant: vn is consistent and its error shrinks with n", "[estimators][property][statistical]") {
  const std::vector<ParametricDistribution> dists{
      ParametricDistribution::exponential(1.0), ParametricDistribution::uniform(0.0, 1.0),
      ParametricDistribution::finite_range(2.0, 3.0), ParametricDistribution::power_beta(2.0)};
  for (const auto& d : dists) {
    const double truth = crexlab::crex(d).value;
    std::vector<double> abs_error;
    for (std::size_t n : {100u, 1000u, 10000u}) {
      // mean over replications of |vn − ξJ|; the bias alone sits below Monte Carlo noise
      double total = 0.0;
      const int reps = 200;
      for (int r = 0; r < reps; ++r) {
        RngStream gen(crexlab::derive_stream_seed(7, crexlab::fnv1a64(d.spec()), n * 1000 + r));
        total += std::abs(crexlab::vn(crexlab::draw_srs(d, n, gen)) - truth);
      }
      abs_error.push_back(total / reps);
    }
    INFO(d.spec() << " errors " << abs_error[0] << ' ' << abs_error[1] << ' ' << abs_error[2]);
    CHECK(abs_error[2] < 0.02);
    CHECK(abs_error[0] > abs_error[1]);
    CHECK(abs_error[1] > abs_error[2]);
  }
}

TEST_CASE("asymptotic_variance_srs", "[estimators][variance]") {
  const auto u = ParametricDistribution::uniform(0.0, 1.0);
  CHECK(crexlab::asymptotic_variance_srs(u) == Approx(1.0 / 45.0).margin(1e-10));
  // oracle: 2∫_0^1 (1−y)^2 ∫_0^y x(1−x) dx dy by Simpson
  const double by_oracle = 2.0 * oracle::simpson(
                                     [](double y) {
                                       const double inner = y * y / 2.0 - y * y * y / 3.0;
                                       return (1.0 - y) * (1.0 - y) * inner;
                                     },
                                     0.0, 1.0);
  CHECK(by_oracle == Approx(1.0 / 45.0).margin(1e-12));
  // the kernel depends on x only through F, so Y = aX scales the double integral by a^2
  const double two = crexlab::asymptotic_variance_srs(ParametricDistribution::uniform(0.0, 2.0));
  CHECK(two == Approx(4.0 / 45.0).margin(1e-9));
  // exponential: 2∫e^{-2y}∫_0^y e^{-x}(1−e^{-x}) dx dy = 1/12
  CHECK(crexlab::asymptotic_variance_srs(ParametricDistribution::exponential(1.0)) == Approx(1.0 / 12.0).margin(1e-8));
  CHECK(crexlab::asymptotic_variance_srs(ParametricDistribution::uniform(0.0, 1e-6)) == Approx(0.0).margin(1e-12));
}

TEST_CASE("asymptotic_variance_minrssu", "[estimators][variance]") {
  for (const auto& d : {ParametricDistribution::uniform(0.0, 1.0), ParametricDistribution::exponential(1.0),
                        ParametricDistribution::power_beta(2.0)}) {
    INFO(d.spec());
    CHECK(crexlab::asymptotic_variance_minrssu(d, 1) == Approx(crexlab::asymptotic_variance_srs(d)).margin(1e-10));
    const double v2 = crexlab::asymptotic_variance_minrssu(d, 2);
    CHECK(v2 > 0.0);
    CHECK(std::isfinite(v2));
  }
  CHECK_THROWS_AS(crexlab::asymptotic_variance_minrssu(ParametricDistribution::uniform(0.0, 1.0), 0),
                  crexlab::DomainError);
}

TEST_CASE("asymptotic_variance_minrssu: Exponential(1), m=2 against Monte Carlo", "[estimators][variance][statistical]") {
  const auto d = ParametricDistribution::exponential(1.0);
  const double sigma2 = crexlab::asymptotic_variance_minrssu(d, 2);
  // centre on the mixture functional −∫x F̄_mix dF_mix is not needed: the variance is location-free
  const int reps = 2000;
  const int l = 1000;
  std::vector<double> stats(reps);
  for (int r = 0; r < reps; ++r) {
    RngStream gen(crexlab::derive_stream_seed(11, 0xE2, r));
    const auto s = crexlab::draw_minrssu(d, 2, l, gen);
    stats[r] = std::sqrt(2.0 * l) * crexlab::lstat(s.values());
  }
  const double var = oracle::moments(stats).variance;
  INFO("sigma2=" << sigma2 << " mc=" << var);
  CHECK(std::abs(var / sigma2 - 1.0) < 0.1);
}
