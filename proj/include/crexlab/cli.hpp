#pragma once

// Command-line front end. `run` is the whole program; tools/crexlab.cpp only
// forwards argv to it, which lets tests drive the CLI in-process.
//
// Exit codes: 0 ok, 2 usage/config error, 3 numeric divergence,
// 4 partial grid failure (simulate).

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "crexlab/discrimination.hpp"
#include "crexlab/distributions.hpp"
#include "crexlab/error.hpp"
#include "crexlab/estimators.hpp"
#include "crexlab/measures.hpp"
#include "crexlab/sampling.hpp"
#include "crexlab/simulation.hpp"

namespace crexlab::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kDivergence = 3, kPartialFailure = 4 };

/// A rendered result: named columns, cells either text or numbers.
class Table {
 public:
  using Cell = std::variant<std::string, double, long long>;

  explicit Table(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  void add(std::vector<Cell> row) { rows_.push_back(std::move(row)); }

  void render(std::ostream& os, const std::string& format, const CsvFormat& numbers) const {
    if (format == "json") {
      nlohmann::json out = nlohmann::json::array();
      for (const auto& row : rows_) {
        nlohmann::json obj = nlohmann::json::object();
        for (std::size_t c = 0; c < columns_.size(); ++c) {
          std::visit([&](const auto& v) { obj[columns_[c]] = v; }, row[c]);
        }
        out.push_back(obj);
      }
      os << out.dump(2) << '\n';
      return;
    }
    std::vector<std::vector<std::string>> text;
    for (const auto& row : rows_) {
      std::vector<std::string> line;
      for (const auto& cell : row) line.push_back(to_text(cell, numbers));
      text.push_back(std::move(line));
    }
    if (format == "csv") {
      write_line(os, columns_);
      for (const auto& line : text) write_line(os, line);
      return;
    }
    std::vector<std::size_t> width(columns_.size());
    for (std::size_t c = 0; c < columns_.size(); ++c) {
      width[c] = columns_[c].size();
      for (const auto& line : text) width[c] = std::max(width[c], line[c].size());
    }
    auto padded = [&](const std::vector<std::string>& line) {
      std::string out;
      for (std::size_t c = 0; c < line.size(); ++c) {
        out += line[c];
        if (c + 1 < line.size()) out += std::string(width[c] - line[c].size() + 2, ' ');
      }
      os << out << '\n';
    };
    padded(columns_);
    for (const auto& line : text) padded(line);
  }

 private:
  static std::string to_text(const Cell& cell, const CsvFormat& numbers) {
    if (const auto* s = std::get_if<std::string>(&cell)) return *s;
    if (const auto* i = std::get_if<long long>(&cell)) return std::to_string(*i);
    return format_value(std::get<double>(cell), numbers);
  }

  // RFC 4180 quoting; distribution specs carry commas
  static std::string quoted(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char ch : field) {
      if (ch == '"') out += '"';
      out += ch;
    }
    return out + '"';
  }

  static void write_line(std::ostream& os, const std::vector<std::string>& line) {
    for (std::size_t c = 0; c < line.size(); ++c) os << (c ? "," : "") << quoted(line[c]);
    os << '\n';
  }

  std::vector<std::string> columns_;
  std::vector<std::vector<Cell>> rows_;
};

namespace detail {

struct OutputOptions {
  int precision = 6;
  bool raw = false;
  std::string format = "table";

  CsvFormat numbers() const { return CsvFormat{precision, raw}; }
};

inline void add_output_flags(CLI::App* cmd, OutputOptions& out, bool with_format = true) {
  cmd->add_option("--precision", out.precision, "Significant digits for printed numbers")
      ->default_val(6)
      ->check(CLI::Range(1, 17));
  cmd->add_flag("--raw", out.raw, "Print full-precision (round-trip) numbers");
  if (with_format) {
    cmd->add_option("--format", out.format, "Output format")
        ->default_val("table")
        ->check(CLI::IsMember({"table", "csv", "json"}));
  }
}

inline EvaluationMethod parse_method(const std::string& text) {
  if (text == "closed") return EvaluationMethod::ClosedForm;
  if (text == "quadrature") return EvaluationMethod::Quadrature;
  return EvaluationMethod::Auto;
}

/// "-2..1" -> {-2,-1,0,1}; "3" -> {3}.
inline std::vector<int> parse_int_range(const std::string& text) {
  const auto dots = text.find("..");
  auto one = [&](const std::string& s) {
    const double v = crexlab::detail::parse_number(s, "integer list '" + text + "'");
    if (v != std::floor(v)) throw ParseError("expected integer in '" + text + "'");
    return static_cast<int>(v);
  };
  if (dots == std::string::npos) return {one(text)};
  const int lo = one(text.substr(0, dots));
  const int hi = one(text.substr(dots + 2));
  if (hi < lo) throw ParseError("empty range '" + text + "'");
  std::vector<int> out;
  for (int v = lo; v <= hi; ++v) out.push_back(v);
  return out;
}

/// Estimator flag for simulate: like an estimator spec, but w may be a range "a..b".
inline EstimatorGrid parse_estimator_grid(const std::string& text) {
  const auto pos = text.find("w=");
  if (pos == std::string::npos) {
    return {crexlab::detail::parse_estimator_without_w(text), {}, {}};
  }
  auto end = text.find(',', pos);
  const std::string w_text = text.substr(pos + 2, end == std::string::npos ? std::string::npos : end - pos - 2);
  std::string rest = text.substr(0, pos) + (end == std::string::npos ? "" : text.substr(end + 1));
  while (!rest.empty() && (rest.back() == ',' || rest.back() == ':')) rest.pop_back();
  EstimatorGrid grid{crexlab::detail::parse_estimator_without_w(rest), parse_int_range(w_text), {}};
  return grid;
}

inline std::vector<double> parse_grid_values(const std::string& text) {
  std::vector<double> out;
  // lo:hi:count
  if (std::count(text.begin(), text.end(), ':') == 2) {
    const auto a = text.find(':');
    const auto b = text.find(':', a + 1);
    const double lo = crexlab::detail::parse_number(text.substr(0, a), "grid");
    const double hi = crexlab::detail::parse_number(text.substr(a + 1, b - a - 1), "grid");
    const double count = crexlab::detail::parse_number(text.substr(b + 1), "grid");
    if (count < 1 || count != std::floor(count)) throw ParseError("grid count must be a positive integer");
    const int n = static_cast<int>(count);
    for (int k = 0; k < n; ++k) out.push_back(n == 1 ? lo : lo + (hi - lo) * k / (n - 1));
    return out;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(crexlab::detail::parse_number(item, "grid"));
  if (out.empty()) throw ParseError("empty parameter grid");
  return out;
}

}  // namespace detail

/// Builds the CLI11 app tree. Exposed so the help text can be golden-tested.
struct Program {
  CLI::App app{"crexlab: cumulative residual extropy for SRS and MinRSSU designs", "crexlab"};

  detail::OutputOptions out;

  // measure
  CLI::App* measure = nullptr;
  std::string measure_dist;
  std::string measure_design = "single";
  std::string measure_quantity = "crex";
  int measure_m = 1;
  std::optional<double> measure_t;
  std::string measure_method = "auto";

  // estimate
  CLI::App* estimate = nullptr;
  std::string estimate_spec;
  std::string estimate_input;
  std::string estimate_dist;
  int estimate_m = 2;
  int estimate_l = 2;
  std::uint64_t estimate_seed = kDefaultSeed;
  std::string estimate_write_sample;

  // simulate
  CLI::App* simulate = nullptr;
  std::string sim_config;
  std::vector<std::string> sim_dists;
  std::vector<int> sim_m;
  std::vector<int> sim_l;
  std::vector<std::string> sim_estimators;
  std::string sim_paper_grid;
  std::string sim_half = "r";
  std::optional<int> sim_reps;
  std::optional<std::uint64_t> sim_seed;
  std::string sim_convention;
  std::optional<unsigned> sim_threads;
  std::string sim_out;
  std::string sim_input;

  // discriminate
  CLI::App* discriminate = nullptr;
  std::string disc_dist;
  std::string disc_mode = "designs";
  std::optional<int> disc_i;
  std::optional<int> disc_m;
  std::string disc_method = "auto";

  // calibrate
  CLI::App* calibrate = nullptr;
  std::string cal_dist;
  std::string cal_estimator;
  int cal_m = 2;
  int cal_l = 2;
  std::string cal_param;
  std::string cal_grid;
  double cal_target_bias = 0.0;
  double cal_target_rmse = 0.0;
  int cal_reps = 1000;
  std::uint64_t cal_seed = kDefaultSeed;
  bool cal_verbose = false;

  Program() {
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Print help for every subcommand");

    measure = app.add_subcommand("measure", "Theoretical CREX and related measures of a distribution");
    measure->add_option("--dist", measure_dist, "Distribution spec, e.g. exp:rate=1, unif:a=0,b=1")->required();
    measure->add_option("--design", measure_design, "single | srs | minrssu | dynamic")
        ->default_val("single")
        ->check(CLI::IsMember({"single", "srs", "minrssu", "dynamic"}));
    measure->add_option("--quantity", measure_quantity,
                        "For --design single: crex | extropy | cumulative-extropy | min-crex | min-mean | mrl")
        ->default_val("crex")
        ->check(CLI::IsMember({"crex", "extropy", "cumulative-extropy", "min-crex", "min-mean", "mrl"}));
    measure->add_option("--m", measure_m, "Set count m (also i or j for min-crex / min-mean)")
        ->default_val(1)
        ->check(CLI::PositiveNumber);
    measure->add_option("--t", measure_t, "Age t for --design dynamic and --quantity mrl");
    measure->add_option("--method", measure_method, "auto | closed | quadrature")
        ->default_val("auto")
        ->check(CLI::IsMember({"auto", "closed", "quadrature"}));
    detail::add_output_flags(measure, out);

    estimate = app.add_subcommand("estimate", "Evaluate an empirical CREX estimator on a sample");
    estimate->add_option("--estimator", estimate_spec, "vn | rn | lstat | rmn:w=W | lstat_adj:family=F,w=W")->required();
    auto* input = estimate->add_option("--input", estimate_input, "Sample CSV with header cycle,set_size,value");
    auto* dist = estimate->add_option("--dist", estimate_dist, "Draw the sample from this distribution instead");
    input->excludes(dist);
    estimate->add_option("--m", estimate_m, "Sets per cycle when drawing")->default_val(2)->check(CLI::PositiveNumber);
    estimate->add_option("--l", estimate_l, "Cycles when drawing")->default_val(2)->check(CLI::PositiveNumber);
    estimate->add_option("--seed", estimate_seed, "Seed when drawing")->default_val(kDefaultSeed);
    estimate->add_option("--write-sample", estimate_write_sample, "Also write the sample as CSV to this path");
    detail::add_output_flags(estimate, out);

    simulate = app.add_subcommand("simulate", "Monte Carlo bias/RMSE grid for the estimators");
    simulate->add_option("--config", sim_config, "JSON config file");
    simulate->add_option("--dist", sim_dists, "Distribution spec (repeatable)");
    simulate->add_option("--m", sim_m, "Set counts m (repeatable)");
    simulate->add_option("--l", sim_l, "Cycle counts l (repeatable)");
    simulate->add_option("--estimator", sim_estimators, "Estimator spec; w may be a range, e.g. rmn:w=-2..1 (repeatable)");
    simulate->add_option("--paper-grid", sim_paper_grid, "Table layout: exp | unif | beta")
        ->check(CLI::IsMember({"exp", "unif", "beta"}));
    simulate->add_option("--estimator-family", sim_half, "With --paper-grid: r | lstat | both")
        ->default_val("r")
        ->check(CLI::IsMember({"r", "lstat", "both"}));
    simulate->add_option("--reps", sim_reps, "Replications per cell (default 5000)");
    simulate->add_option("--seed", sim_seed, "Base seed (default " + std::to_string(kDefaultSeed) + ")");
    simulate->add_option("--bias-convention", sim_convention, "truth_minus_estimate | estimate_minus_truth")
        ->check(CLI::IsMember({"truth_minus_estimate", "estimate_minus_truth"}));
    simulate->add_option("--threads", sim_threads, "Worker threads (0 = all cores; capped by CREXLAB_THREADS)");
    simulate->add_option("--out", sim_out, "Write CSV here instead of stdout");
    simulate->add_option("--input", sim_input, "Read a results CSV and re-emit it");
    detail::add_output_flags(simulate, out, false);

    discriminate = app.add_subcommand("discriminate", "Survival-based discrimination between minima, parent and designs");
    discriminate->add_option("--dist", disc_dist, "Distribution spec")->required();
    discriminate->add_option("--mode", disc_mode, "min-vs-parent | designs")
        ->default_val("designs")
        ->check(CLI::IsMember({"min-vs-parent", "designs"}));
    discriminate->add_option("--i", disc_i, "Set size i (min-vs-parent)")->check(CLI::PositiveNumber);
    discriminate->add_option("--m", disc_m, "Set count m (designs)")->check(CLI::PositiveNumber);
    discriminate->add_option("--method", disc_method, "auto | closed | quadrature")
        ->default_val("auto")
        ->check(CLI::IsMember({"auto", "closed", "quadrature"}));
    detail::add_output_flags(discriminate, out);

    calibrate = app.add_subcommand("calibrate", "Fit a distribution parameter to a target (bias, RMSE) cell");
    calibrate->add_option("--dist", cal_dist, "Distribution spec")->required();
    calibrate->add_option("--estimator", cal_estimator, "Estimator spec (single w)")->required();
    calibrate->add_option("--m", cal_m, "Set count m")->default_val(2)->check(CLI::PositiveNumber);
    calibrate->add_option("--l", cal_l, "Cycle count l")->default_val(2)->check(CLI::PositiveNumber);
    calibrate->add_option("--param", cal_param, "Parameter name to scan, e.g. rate, b, alpha")->required();
    calibrate->add_option("--grid", cal_grid, "Values v1,v2,... or lo:hi:count")->required();
    calibrate->add_option("--target-bias", cal_target_bias, "Target bias")->required();
    calibrate->add_option("--target-rmse", cal_target_rmse, "Target RMSE")->required();
    calibrate->add_option("--reps", cal_reps, "Replications per grid point")->default_val(1000)->check(CLI::PositiveNumber);
    calibrate->add_option("--seed", cal_seed, "Base seed")->default_val(kDefaultSeed);
    calibrate->add_flag("--verbose", cal_verbose, "Also print every scanned point");
    detail::add_output_flags(calibrate, out);
  }

  int run_measure(std::ostream& os) const {
    const auto d = ParametricDistribution::parse(measure_dist);
    const auto method = detail::parse_method(measure_method);
    Table table({"quantity", "design", "dist", "m", "t", "value", "method", "abs_error_bound"});
    const std::string t_text = measure_t ? crexlab::detail::format_number(*measure_t) : "-";
    auto add = [&](const std::string& quantity, const std::string& design, const CrexValue& v) {
      table.add({quantity, design, d.spec(), static_cast<long long>(measure_m), t_text, v.value,
                 std::string(to_string(v.method)), v.abs_error_bound});
    };
    auto add_plain = [&](const std::string& quantity, double value) {
      const bool quad = method == EvaluationMethod::Quadrature;
      add(quantity, "single", CrexValue{value, quad ? Method::Quadrature : Method::ClosedForm, 0.0});
    };

    if (measure_design == "srs") {
      add("crex", "srs", crex_srs_design(d, measure_m, method));
    } else if (measure_design == "minrssu") {
      add("crex", "minrssu", crex_minrssu_design(d, measure_m, method));
    } else if (measure_design == "dynamic") {
      if (!measure_t) throw ParseError("--design dynamic requires --t");
      const auto pair = dynamic_crex_designs(d, measure_m, *measure_t, method);
      add("dynamic-crex", "minrssu", pair.minrssu);
      add("dynamic-crex", "srs", pair.srs);
    } else if (measure_quantity == "crex") {
      add("crex", "single", crex(d, method));
    } else if (measure_quantity == "extropy") {
      add_plain("extropy", extropy(d, method));
    } else if (measure_quantity == "cumulative-extropy") {
      add_plain("cumulative-extropy", cumulative_extropy(d, method));
    } else if (measure_quantity == "min-crex") {
      add("min-crex", "single", crex_min_order_stat(d, measure_m, method));
    } else if (measure_quantity == "min-mean") {
      add_plain("min-mean", min_order_statistic_mean(d, measure_m, method));
    } else {
      if (!measure_t) throw ParseError("--quantity mrl requires --t");
      add_plain("mrl", mean_residual_life(d, *measure_t, method));
    }
    table.render(os, out.format, out.numbers());
    return kOk;
  }

  int run_estimate(std::ostream& os) const {
    const auto spec = EstimatorSpec::parse(estimate_spec);
    std::optional<MinRssuSample> sample;
    if (!estimate_input.empty()) {
      std::ifstream in(estimate_input);
      if (!in) throw ParseError("cannot open " + estimate_input);
      sample = read_sample_csv(in);
    } else {
      if (estimate_dist.empty()) throw ParseError("estimate needs --input or --dist");
      const auto d = ParametricDistribution::parse(estimate_dist);
      RngStream rng(estimate_seed);
      if (spec.kind == EstimatorKind::Vn) {
        sample = MinRssuSample(1, estimate_m * estimate_l, draw_srs(d, static_cast<std::size_t>(estimate_m) * estimate_l, rng));
      } else {
        sample = draw_minrssu(d, estimate_m, estimate_l, rng);
      }
    }
    if (!estimate_write_sample.empty()) {
      std::ofstream file(estimate_write_sample);
      if (!file) throw ParseError("cannot write " + estimate_write_sample);
      write_sample_csv(file, *sample);
    }
    validate_for_design(spec, sample->m(), sample->l());
    const DesignSample design{sample->m(), sample->l(), pooled_order_statistics(*sample)};
    const double value = evaluate(spec, design);
    Table table({"estimator", "n", "m", "l", "value"});
    table.add({spec.to_string(), static_cast<long long>(sample->n()), static_cast<long long>(sample->m()),
               static_cast<long long>(sample->l()), value});
    table.render(os, out.format, out.numbers());
    return kOk;
  }

  SimulationConfig simulation_config() const {
    SimulationConfig cfg;
    const bool flags_used = !sim_dists.empty() || !sim_m.empty() || !sim_l.empty() || !sim_estimators.empty();
    const int sources = (!sim_config.empty()) + (!sim_paper_grid.empty()) + flags_used;
    if (sources != 1) {
      throw ParseError("simulate needs exactly one of --config, --paper-grid, or --dist/--m/--l/--estimator flags");
    }
    if (!sim_config.empty()) {
      std::ifstream in(sim_config);
      if (!in) throw ParseError("cannot open " + sim_config);
      cfg = load_config(in);
    } else if (!sim_paper_grid.empty()) {
      cfg = paper_table_config(parse_paper_table(sim_paper_grid), parse_estimator_half(sim_half));
    } else {
      for (const auto& d : sim_dists) cfg.distributions.push_back(ParametricDistribution::parse(d));
      cfg.m_values = sim_m;
      cfg.l_values = sim_l;
      for (const auto& e : sim_estimators) cfg.estimators.push_back(detail::parse_estimator_grid(e));
    }
    if (sim_reps) cfg.replications = *sim_reps;
    if (sim_seed) {
      cfg.seed = *sim_seed;
      cfg.seed_defaulted = false;
    }
    if (!sim_convention.empty()) cfg.convention = parse_bias_convention(sim_convention);
    if (sim_threads) cfg.threads = *sim_threads;
    cfg.validate();
    return cfg;
  }

  int run_simulate(std::ostream& os, std::ostream& err) const {
    if (!sim_input.empty()) {
      std::ifstream in(sim_input);
      if (!in) throw ParseError("cannot open " + sim_input);
      write_csv(os, read_csv(in), out.numbers());
      return kOk;
    }
    const auto cfg = simulation_config();
    const auto result = run_grid(cfg);
    std::vector<std::string> comments = {
        "crexlab simulate seed=" + std::to_string(cfg.seed) + (cfg.seed_defaulted ? " (default)" : "") +
            " reps=" + std::to_string(cfg.replications) + " bias=" + to_string(cfg.convention)};
    if (sim_out.empty()) {
      write_csv(os, result.rows, out.numbers(), comments);
    } else {
      std::ofstream file(sim_out);
      if (!file) throw ParseError("cannot write " + sim_out);
      write_csv(file, result.rows, out.numbers(), comments);
    }
    for (const auto& f : result.failures) err << "cell failed: " << f.cell << ": " << f.message << '\n';
    return result.failures.empty() ? kOk : kPartialFailure;
  }

  int run_discriminate(std::ostream& os) const {
    const auto d = ParametricDistribution::parse(disc_dist);
    const auto method = detail::parse_method(disc_method);
    DiscriminationValue v;
    if (disc_mode == "min-vs-parent") {
      if (disc_m) throw ParseError("--mode min-vs-parent takes --i, not --m");
      v = d_min_vs_parent(d, disc_i.value_or(1), method);
    } else {
      if (disc_i) throw ParseError("--mode designs takes --m, not --i");
      v = d_designs(d, disc_m.value_or(1), method);
    }
    Table table({"mode", "dist", disc_mode == "designs" ? "m" : "i", "value", "method"});
    table.add({disc_mode, d.spec(), static_cast<long long>(v.i_or_m), v.value, std::string(to_string(v.method))});
    table.render(os, out.format, out.numbers());
    return kOk;
  }

  int run_calibrate(std::ostream& os) const {
    const auto d = ParametricDistribution::parse(cal_dist);
    const auto spec = EstimatorSpec::parse(cal_estimator);
    const auto grid = detail::parse_grid_values(cal_grid);
    RunOptions options;
    options.replications = cal_reps;
    options.seed = cal_seed;
    const auto result = calibrate_parameter(Cell{d, cal_m, cal_l, spec}, {cal_target_bias, cal_target_rmse},
                                            cal_param, grid, options);
    Table table({"param", "value", "convention", "bias", "rmse", "residual"});
    auto add = [&](const CalibrationPoint& p) {
      table.add({cal_param, p.parameter, std::string(to_string(p.convention)), p.bias, p.rmse, p.residual});
    };
    add(result.best);
    if (cal_verbose) {
      for (const auto& p : result.scanned) add(p);
    }
    table.render(os, out.format, out.numbers());
    return kOk;
  }
};

/// Runs the program on argv-style arguments (args[0] is the program name).
inline int run(const std::vector<std::string>& args, std::ostream& os, std::ostream& err) {
  Program program;
  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    program.app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    os << program.app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    os << program.app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  try {
    if (*program.measure) return program.run_measure(os);
    if (*program.estimate) return program.run_estimate(os);
    if (*program.simulate) return program.run_simulate(os, err);
    if (*program.discriminate) return program.run_discriminate(os);
    if (*program.calibrate) return program.run_calibrate(os);
  } catch (const DivergenceError& e) {
    err << "divergence: " << e.what() << '\n';
    return kDivergence;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::domain_error& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}

}  // namespace crexlab::cli
