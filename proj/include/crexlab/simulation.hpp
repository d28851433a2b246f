#pragma once

// Seeded Monte Carlo harness for the CREX estimators.
//
// A cell is one (distribution, m, l, estimator, w) coordinate. Each of its
// replications draws a fresh sample from its own RngStream, seeded from
// (base seed, cell hash, replication index), so results do not depend on how
// replications are scheduled across threads. Per-replication estimates are
// stored and reduced in index order.
//
// CSV schema (header line is fixed):
//
//   distribution,params,estimator,m,l,w,reps,seed,true_value,bias,rmse,mc_se
//
// `params` joins key=value pairs with ';'. `w` is NA for estimators without
// a tuning offset. Lines starting with '#' are comments.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <functional>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "crexlab/distributions.hpp"
#include "crexlab/error.hpp"
#include "crexlab/estimators.hpp"
#include "crexlab/measures.hpp"
#include "crexlab/rng.hpp"
#include "crexlab/sampling.hpp"

namespace crexlab {

inline constexpr std::uint64_t kDefaultSeed = 20210601ULL;
inline constexpr const char* kCsvHeader = "distribution,params,estimator,m,l,w,reps,seed,true_value,bias,rmse,mc_se";

enum class BiasConvention { EstimateMinusTruth, TruthMinusEstimate };

inline const char* to_string(BiasConvention c) {
  return c == BiasConvention::EstimateMinusTruth ? "estimate_minus_truth" : "truth_minus_estimate";
}

inline BiasConvention parse_bias_convention(std::string_view text) {
  if (text == "estimate_minus_truth" || text == "est-truth") return BiasConvention::EstimateMinusTruth;
  if (text == "truth_minus_estimate" || text == "truth-est") return BiasConvention::TruthMinusEstimate;
  throw ParseError("unknown bias convention '" + std::string(text) +
                   "' (expected estimate_minus_truth or truth_minus_estimate)");
}

struct Cell {
  ParametricDistribution distribution;
  int m = 2;
  int l = 2;
  EstimatorSpec estimator;

  std::string key() const {
    return distribution.spec() + "|" + std::to_string(m) + "|" + std::to_string(l) + "|" + estimator.to_string();
  }
  std::uint64_t hash() const { return fnv1a64(key()); }
};

/// Produces one replication's sample for a cell.
using SampleSource = std::function<DesignSample(const Cell&, RngStream&)>;

/// SRS of size m·l for Vn, pooled MinRSSU values for every other estimator.
inline DesignSample default_sample_source(const Cell& cell, RngStream& rng) {
  DesignSample out;
  out.m = cell.m;
  out.l = cell.l;
  if (cell.estimator.kind == EstimatorKind::Vn) {
    out.values = draw_srs(cell.distribution, static_cast<std::size_t>(cell.m) * cell.l, rng);
    std::sort(out.values.begin(), out.values.end());
  } else {
    out.values = pooled_order_statistics(draw_minrssu(cell.distribution, cell.m, cell.l, rng));
  }
  return out;
}

struct RunOptions {
  int replications = 5000;
  std::uint64_t seed = kDefaultSeed;
  BiasConvention convention = BiasConvention::TruthMinusEstimate;
  /// 0 means hardware concurrency; always capped by CREXLAB_THREADS when set.
  unsigned threads = 0;
  SampleSource source = default_sample_source;
};

struct SimulationRow {
  std::string distribution;
  std::string params;
  std::string estimator;
  int m = 0;
  int l = 0;
  std::optional<int> w;
  int reps = 0;
  std::uint64_t seed = 0;
  double true_value = 0.0;
  double bias = 0.0;
  double rmse = 0.0;
  double mc_se = 0.0;
  /// Accumulators over errors e_r = estimate_r - truth.
  double mean_error = 0.0;
  double mean_squared_error = 0.0;

  friend bool operator==(const SimulationRow&, const SimulationRow&) = default;
};

/// Worker count after applying the CREXLAB_THREADS cap.
inline unsigned resolve_threads(unsigned requested) {
  unsigned n = requested == 0 ? std::max(1u, std::thread::hardware_concurrency()) : requested;
  if (const char* env = std::getenv("CREXLAB_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && cap > 0) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
  }
  return std::max(1u, n);
}

namespace detail {

/// Runs body(i) for i in [0, count) on `threads` workers. The first
/// exception thrown by any worker is rethrown after all workers join.
template <class Body>
void parallel_for(std::size_t count, unsigned threads, Body&& body) {
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(count, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  constexpr std::size_t kChunk = 64;
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t begin = next.fetch_add(kChunk);
      if (begin >= count) return;
      const std::size_t end = std::min(count, begin + kChunk);
      try {
        for (std::size_t i = begin; i < end; ++i) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace detail

/// Runs every replication of one cell and reduces to bias / RMSE / MC error.
inline SimulationRow run_cell(const Cell& cell, const RunOptions& options) {
  if (options.replications < 1) throw DomainError("run_cell: replications must be >= 1");
  try {
    validate_for_design(cell.estimator, cell.m, cell.l);
  } catch (const std::exception& e) {
    throw ParameterError("cell " + cell.key() + ": " + e.what());
  }
  const double truth = crex(cell.distribution).value;
  const std::uint64_t cell_hash = cell.hash();
  const auto reps = static_cast<std::size_t>(options.replications);
  std::vector<double> estimates(reps);
  detail::parallel_for(reps, resolve_threads(options.threads), [&](std::size_t r) {
    RngStream rng(derive_stream_seed(options.seed, cell_hash, r));
    estimates[r] = evaluate(cell.estimator, options.source(cell, rng));
  });

  // Welford over errors, in extended precision, in replication order.
  long double mean = 0.0L;
  long double m2 = 0.0L;
  for (std::size_t r = 0; r < reps; ++r) {
    const long double e = static_cast<long double>(estimates[r]) - truth;
    const long double delta = e - mean;
    mean += delta / static_cast<long double>(r + 1);
    m2 += delta * (e - mean);
  }
  const long double count = static_cast<long double>(reps);
  const long double mse = mean * mean + m2 / count;

  SimulationRow row;
  row.distribution = cell.distribution.family_name();
  row.params = cell.distribution.params_string(';');
  row.estimator = cell.estimator.label();
  row.m = cell.m;
  row.l = cell.l;
  row.w = cell.estimator.w;
  row.reps = options.replications;
  row.seed = options.seed;
  row.true_value = truth;
  row.mean_error = static_cast<double>(mean);
  row.mean_squared_error = static_cast<double>(mse);
  row.bias = options.convention == BiasConvention::EstimateMinusTruth ? row.mean_error : -row.mean_error;
  row.rmse = static_cast<double>(std::sqrt(mse));
  row.mc_se = reps > 1 ? static_cast<double>(std::sqrt(m2 / (count - 1.0L) / count)) : 0.0;
  return row;
}

/// An estimator and its w values; `w_by_m` overrides `w_values` for listed m.
struct EstimatorGrid {
  EstimatorSpec estimator;
  std::vector<int> w_values;
  std::map<int, std::vector<int>> w_by_m;

  std::vector<int> w_for(int m) const {
    if (auto it = w_by_m.find(m); it != w_by_m.end()) return it->second;
    return w_values;
  }
};

struct SimulationConfig {
  std::vector<ParametricDistribution> distributions;
  std::vector<int> m_values;
  std::vector<int> l_values;
  std::vector<EstimatorGrid> estimators;
  int replications = 5000;
  std::uint64_t seed = kDefaultSeed;
  bool seed_defaulted = true;
  BiasConvention convention = BiasConvention::TruthMinusEstimate;
  unsigned threads = 0;

  void validate() const {
    if (replications < 1) throw ParseError("config: replications must be >= 1");
    if (distributions.empty() || m_values.empty() || l_values.empty() || estimators.empty()) {
      throw ParseError("config: distributions, m, l and estimators must be nonempty");
    }
    for (int m : m_values) {
      if (m < 1) throw ParseError("config: m values must be >= 1");
    }
    for (int l : l_values) {
      if (l < 1) throw ParseError("config: l values must be >= 1");
    }
    for (const auto& e : estimators) {
      if (!e.estimator.uses_w()) {
        if (!e.w_values.empty() || !e.w_by_m.empty()) {
          throw ParseError("config: estimator " + e.estimator.label() + " takes no w values");
        }
        continue;
      }
      for (int m : m_values) {
        if (e.w_for(m).empty()) {
          throw ParseError("config: estimator " + e.estimator.label() + " has no w values for m=" + std::to_string(m));
        }
      }
    }
  }

  /// Cells in output order: distribution, m, l, estimator, w.
  std::vector<Cell> cells() const {
    std::vector<Cell> out;
    for (const auto& d : distributions) {
      for (int m : m_values) {
        for (int l : l_values) {
          for (const auto& e : estimators) {
            if (!e.estimator.uses_w()) {
              EstimatorSpec spec = e.estimator;
              spec.w.reset();
              out.push_back({d, m, l, spec});
              continue;
            }
            for (int w : e.w_for(m)) {
              EstimatorSpec spec = e.estimator;
              spec.w = w;
              out.push_back({d, m, l, spec});
            }
          }
        }
      }
    }
    return out;
  }

  RunOptions run_options() const {
    RunOptions o;
    o.replications = replications;
    o.seed = seed;
    o.convention = convention;
    o.threads = threads;
    return o;
  }
};

struct CellFailure {
  std::string cell;
  std::string message;
};

struct GridResult {
  std::vector<SimulationRow> rows;
  std::vector<CellFailure> failures;
};

/// Runs every cell; a failing cell is recorded and the grid continues.
inline GridResult run_grid(const SimulationConfig& config, const SampleSource& source = default_sample_source) {
  config.validate();
  RunOptions options = config.run_options();
  options.source = source;
  GridResult result;
  for (const auto& cell : config.cells()) {
    try {
      result.rows.push_back(run_cell(cell, options));
    } catch (const std::exception& e) {
      result.failures.push_back({cell.key(), e.what()});
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Table layouts

enum class PaperTable { Exponential, Uniform, Beta };
enum class EstimatorHalf { Spacing, LStatistic, Both };

inline PaperTable parse_paper_table(std::string_view text) {
  if (text == "exp") return PaperTable::Exponential;
  if (text == "unif") return PaperTable::Uniform;
  if (text == "beta" || text == "powerbeta") return PaperTable::Beta;
  throw ParseError("unknown table '" + std::string(text) + "' (expected exp, unif or beta)");
}

inline EstimatorHalf parse_estimator_half(std::string_view text) {
  if (text == "r" || text == "spacing") return EstimatorHalf::Spacing;
  if (text == "lstat") return EstimatorHalf::LStatistic;
  if (text == "both") return EstimatorHalf::Both;
  throw ParseError("unknown estimator family '" + std::string(text) + "' (expected r, lstat or both)");
}

/// The grid laid out in the published bias/RMSE tables: m = 2..5, l = 2, 3,
/// four w values per row plus the unadjusted estimator. Defaults λ = 1,
/// Unif(0,1), Beta(2,1).
inline SimulationConfig paper_table_config(PaperTable table, EstimatorHalf half = EstimatorHalf::Spacing) {
  SimulationConfig cfg;
  switch (table) {
    case PaperTable::Exponential: cfg.distributions = {ParametricDistribution::exponential(1.0)}; break;
    case PaperTable::Uniform: cfg.distributions = {ParametricDistribution::uniform(0.0, 1.0)}; break;
    case PaperTable::Beta: cfg.distributions = {ParametricDistribution::power_beta(2.0)}; break;
  }
  cfg.m_values = {2, 3, 4, 5};
  cfg.l_values = {2, 3};
  auto range = [](int lo) { return std::vector<int>{lo, lo + 1, lo + 2, lo + 3}; };

  if (half != EstimatorHalf::LStatistic) {
    EstimatorGrid rmn_grid{EstimatorSpec{EstimatorKind::Rmn, 0, std::nullopt}, {}, {}};
    for (int m = 2; m <= 5; ++m) rmn_grid.w_by_m[m] = range(m - 4);
    cfg.estimators.push_back(rmn_grid);
    cfg.estimators.push_back({EstimatorSpec{EstimatorKind::Rn, std::nullopt, std::nullopt}, {}, {}});
  }
  if (half != EstimatorHalf::Spacing) {
    PsiFamily family = PsiFamily::ExponentialForm;
    std::map<int, std::vector<int>> w;
    switch (table) {
      case PaperTable::Exponential:
        family = PsiFamily::ExponentialForm;
        w = {{2, range(-11)}, {3, range(-7)}, {4, range(-3)}, {5, range(1)}};
        break;
      case PaperTable::Uniform:
        family = PsiFamily::UniformForm;
        w = {{2, range(-4)}, {3, range(-2)}, {4, range(0)}, {5, range(2)}};
        break;
      case PaperTable::Beta:
        family = PsiFamily::BetaForm;
        w = {{2, range(-3)}, {3, range(-3)}, {4, range(-3)}, {5, range(-3)}};
        break;
    }
    cfg.estimators.push_back({EstimatorSpec{EstimatorKind::LStatAdjusted, 0, family}, {}, w});
    cfg.estimators.push_back({EstimatorSpec{EstimatorKind::LStat, std::nullopt, std::nullopt}, {}, {}});
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Config file (JSON)
//
// {
//   "distributions": ["exp:rate=1"],          (or "distribution": "exp:rate=1")
//   "m": [2, 3], "l": [2, 3],
//   "estimators": [
//     {"spec": "rn"},
//     {"spec": "rmn", "w": [-2, -1, 0, 1]},
//     {"spec": "lstat_adj:family=exp", "w_by_m": {"2": [-2], "3": [0]}}
//   ],
//   "replications": 5000, "seed": 42,
//   "bias_convention": "truth_minus_estimate", "threads": 0
// }

namespace detail {

/// Parses an estimator spec that may omit w (w lists come from the config).
inline EstimatorSpec parse_estimator_without_w(const std::string& text) {
  const bool needs_w = text.rfind("rmn", 0) == 0 || text.rfind("lstat_adj", 0) == 0;
  if (!needs_w || text.find("w=") != std::string::npos) {
    EstimatorSpec spec = EstimatorSpec::parse(text);
    return spec;
  }
  const std::string with_w = text + (text.find(':') == std::string::npos ? ":w=0" : ",w=0");
  return EstimatorSpec::parse(with_w);
}

}  // namespace detail

inline SimulationConfig parse_config_json(const nlohmann::json& j) {
  SimulationConfig cfg;
  try {
    if (j.contains("distribution")) cfg.distributions.push_back(ParametricDistribution::parse(j.at("distribution").get<std::string>()));
    if (j.contains("distributions")) {
      for (const auto& d : j.at("distributions")) cfg.distributions.push_back(ParametricDistribution::parse(d.get<std::string>()));
    }
    cfg.m_values = j.at("m").get<std::vector<int>>();
    cfg.l_values = j.at("l").get<std::vector<int>>();
    for (const auto& e : j.at("estimators")) {
      EstimatorGrid grid;
      const auto text = e.at("spec").get<std::string>();
      grid.estimator = detail::parse_estimator_without_w(text);
      const bool explicit_w = text.find("w=") != std::string::npos;
      if (e.contains("w")) grid.w_values = e.at("w").get<std::vector<int>>();
      else if (explicit_w) grid.w_values = {*grid.estimator.w};
      if (e.contains("w_by_m")) {
        for (const auto& [key, list] : e.at("w_by_m").items()) {
          grid.w_by_m[std::stoi(key)] = list.get<std::vector<int>>();
        }
      }
      for (const auto& [key, _] : e.items()) {
        if (key != "spec" && key != "w" && key != "w_by_m") throw ParseError("config: unknown estimator key '" + key + "'");
      }
      cfg.estimators.push_back(grid);
    }
    if (j.contains("replications")) cfg.replications = j.at("replications").get<int>();
    if (j.contains("seed")) {
      cfg.seed = j.at("seed").get<std::uint64_t>();
      cfg.seed_defaulted = false;
    }
    if (j.contains("bias_convention")) cfg.convention = parse_bias_convention(j.at("bias_convention").get<std::string>());
    if (j.contains("threads")) cfg.threads = j.at("threads").get<unsigned>();
    for (const auto& [key, _] : j.items()) {
      static const char* known[] = {"distribution", "distributions", "m", "l", "estimators",
                                    "replications", "seed", "bias_convention", "threads"};
      if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) == std::end(known)) {
        throw ParseError("config: unknown key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

inline SimulationConfig load_config(std::istream& is) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  return parse_config_json(j);
}

// ---------------------------------------------------------------------------
// CSV

struct CsvFormat {
  /// Significant digits; ignored when `raw` is set.
  int precision = 6;
  /// Shortest round-trip representation (lossless).
  bool raw = false;
};

inline std::string format_value(double v, const CsvFormat& fmt) {
  if (fmt.raw) return detail::format_number(v);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", fmt.precision, v);
  return buf;
}

inline void write_csv(std::ostream& os, const std::vector<SimulationRow>& rows, const CsvFormat& fmt = {},
                      const std::vector<std::string>& comments = {}) {
  for (const auto& c : comments) os << "# " << c << '\n';
  os << kCsvHeader << '\n';
  for (const auto& r : rows) {
    os << r.distribution << ',' << r.params << ',' << r.estimator << ',' << r.m << ',' << r.l << ','
       << (r.w ? std::to_string(*r.w) : std::string("NA")) << ',' << r.reps << ',' << r.seed << ','
       << format_value(r.true_value, fmt) << ',' << format_value(r.bias, fmt) << ',' << format_value(r.rmse, fmt)
       << ',' << format_value(r.mc_se, fmt) << '\n';
  }
}

/// Reads rows written by write_csv. Accumulator fields are reconstructed
/// from bias and rmse assuming nothing about the sign convention:
/// mean_squared_error = rmse², mean_error is left at bias.
inline std::vector<SimulationRow> read_csv(std::istream& is) {
  std::vector<SimulationRow> rows;
  std::string line;
  bool header_seen = false;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {
      if (line != kCsvHeader) throw ParseError("results CSV: unexpected header '" + line + "'");
      header_seen = true;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) f.push_back(field);
    const std::string context = "results CSV line " + std::to_string(line_no);
    if (f.size() != 12) throw ParseError(context + ": expected 12 fields, got " + std::to_string(f.size()));
    auto integer = [&](const std::string& s) {
      const double v = detail::parse_number(s, context);
      if (v != std::floor(v)) throw ParseError(context + ": expected integer '" + s + "'");
      return static_cast<int>(v);
    };
    SimulationRow r;
    r.distribution = f[0];
    r.params = f[1];
    r.estimator = f[2];
    r.m = integer(f[3]);
    r.l = integer(f[4]);
    if (f[5] != "NA") r.w = integer(f[5]);
    r.reps = integer(f[6]);
    {
      std::uint64_t seed = 0;
      auto [ptr, ec] = std::from_chars(f[7].data(), f[7].data() + f[7].size(), seed);
      if (ec != std::errc{} || ptr != f[7].data() + f[7].size()) throw ParseError(context + ": bad seed '" + f[7] + "'");
      r.seed = seed;
    }
    r.true_value = detail::parse_number(f[8], context);
    r.bias = detail::parse_number(f[9], context);
    r.rmse = detail::parse_number(f[10], context);
    r.mc_se = detail::parse_number(f[11], context);
    r.mean_error = r.bias;
    r.mean_squared_error = r.rmse * r.rmse;
    rows.push_back(std::move(r));
  }
  if (!header_seen) throw ParseError("results CSV: missing header");
  return rows;
}

// ---------------------------------------------------------------------------
// Parameter calibration

struct CalibrationTarget {
  double bias = 0.0;
  double rmse = 0.0;
};

struct CalibrationPoint {
  double parameter = 0.0;
  BiasConvention convention = BiasConvention::TruthMinusEstimate;
  double bias = 0.0;
  double rmse = 0.0;
  double residual = 0.0;
};

struct CalibrationResult {
  CalibrationPoint best;
  std::vector<CalibrationPoint> scanned;
};

/// Scans `grid` values of the named distribution parameter, runs the cell at
/// each, and returns the value and bias convention whose (bias, rmse) is
/// closest to the target in squared distance.
inline CalibrationResult calibrate_parameter(const Cell& cell, const CalibrationTarget& target,
                                             const std::string& parameter, const std::vector<double>& grid,
                                             RunOptions options) {
  if (grid.empty()) throw DomainError("calibrate_parameter: empty parameter grid");
  if (!std::isfinite(target.bias) || !std::isfinite(target.rmse)) {
    throw DomainError("calibrate_parameter: target must be finite");
  }
  CalibrationResult result;
  bool have_best = false;
  options.convention = BiasConvention::EstimateMinusTruth;
  for (double value : grid) {
    Cell probe = cell;
    probe.distribution = cell.distribution.with_parameter(parameter, value);
    const SimulationRow row = run_cell(probe, options);
    for (auto convention : {BiasConvention::EstimateMinusTruth, BiasConvention::TruthMinusEstimate}) {
      CalibrationPoint p;
      p.parameter = value;
      p.convention = convention;
      p.bias = convention == BiasConvention::EstimateMinusTruth ? row.mean_error : -row.mean_error;
      p.rmse = row.rmse;
      p.residual = (p.bias - target.bias) * (p.bias - target.bias) + (p.rmse - target.rmse) * (p.rmse - target.rmse);
      result.scanned.push_back(p);
      if (!have_best || p.residual < result.best.residual) {
        result.best = p;
        have_best = true;
      }
    }
  }
  return result;
}

}  // namespace crexlab
