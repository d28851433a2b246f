#pragma once

// SRS and l-cycle MinRSSU sample generation.
//
// A MinRSSU cycle draws m independent sets of sizes 1, 2, ..., m and keeps
// the minimum of each set (ranking is perfect). Repeating for l cycles gives
// n = m·l recorded values X_(1:i)j. Stream consumption order is
// cycle-major, then set size ascending, then draw order within the set, so a
// single stream state fully determines the sample; l·m(m+1)/2 uniforms are
// consumed in total.
//
// CSV form (one row per recorded value):
//
//   cycle,set_size,value
//   1,1,0.5321
//   1,2,0.1207
//   ...

#include <algorithm>
#include <cstddef>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "crexlab/distributions.hpp"
#include "crexlab/error.hpp"
#include "crexlab/rng.hpp"

namespace crexlab {

class MinRssuSample {
 public:
  MinRssuSample(int m, int l) : m_(m), l_(l) {
    if (m < 1 || l < 1) throw DomainError("MinRssuSample: m and l must be >= 1");
    values_.assign(static_cast<std::size_t>(m) * static_cast<std::size_t>(l), 0.0);
  }

  /// Builds a sample from values laid out cycle-major, set ascending.
  MinRssuSample(int m, int l, std::vector<double> values) : m_(m), l_(l), values_(std::move(values)) {
    if (m < 1 || l < 1) throw DomainError("MinRssuSample: m and l must be >= 1");
    if (values_.size() != static_cast<std::size_t>(m) * static_cast<std::size_t>(l)) {
      throw SizeError("MinRssuSample: expected m*l = " + std::to_string(m * l) + " values, got " +
                      std::to_string(values_.size()));
    }
  }

  int m() const noexcept { return m_; }
  int l() const noexcept { return l_; }
  std::size_t n() const noexcept { return values_.size(); }

  /// Value of set size `set_size` (1-based) in cycle `cycle` (1-based).
  double at(int cycle, int set_size) const { return values_.at(index(cycle, set_size)); }
  double& at(int cycle, int set_size) { return values_.at(index(cycle, set_size)); }

  const std::vector<double>& values() const noexcept { return values_; }

 private:
  std::size_t index(int cycle, int set_size) const {
    if (cycle < 1 || cycle > l_ || set_size < 1 || set_size > m_) {
      throw DomainError("MinRssuSample: index out of range");
    }
    return static_cast<std::size_t>(cycle - 1) * static_cast<std::size_t>(m_) +
           static_cast<std::size_t>(set_size - 1);
  }

  int m_;
  int l_;
  std::vector<double> values_;
};

inline std::vector<double> draw_srs(const ParametricDistribution& d, std::size_t n, RngStream& rng) {
  if (n < 1) throw SizeError("draw_srs: n must be >= 1");
  return d.sample(rng, n);
}

inline MinRssuSample draw_minrssu(const ParametricDistribution& d, int m, int l, RngStream& rng) {
  MinRssuSample s(m, l);
  for (int cycle = 1; cycle <= l; ++cycle) {
    for (int set_size = 1; set_size <= m; ++set_size) {
      double smallest = kInfinity;
      for (int k = 0; k < set_size; ++k) smallest = std::min(smallest, d.draw(rng));
      s.at(cycle, set_size) = smallest;
    }
  }
  return s;
}

/// Y_(1) ≤ ... ≤ Y_(n): all recorded values sorted ascending.
inline std::vector<double> pooled_order_statistics(const MinRssuSample& s) {
  std::vector<double> out = s.values();
  std::sort(out.begin(), out.end());
  return out;
}

inline void write_sample_csv(std::ostream& os, const MinRssuSample& s) {
  const auto old_precision = os.precision(std::numeric_limits<double>::max_digits10);
  os << "cycle,set_size,value\n";
  for (int cycle = 1; cycle <= s.l(); ++cycle) {
    for (int set_size = 1; set_size <= s.m(); ++set_size) {
      os << cycle << ',' << set_size << ',' << s.at(cycle, set_size) << '\n';
    }
  }
  os.precision(old_precision);
}

/// Reads the CSV written by write_sample_csv. m and l are inferred from the
/// largest set size and cycle index; every (cycle, set_size) cell must appear once.
inline MinRssuSample read_sample_csv(std::istream& is) {
  std::string line;
  bool header_seen = false;
  struct Row {
    int cycle;
    int set_size;
    double value;
  };
  std::vector<Row> rows;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {
      if (line != "cycle,set_size,value") {
        throw ParseError("sample CSV: expected header 'cycle,set_size,value', got '" + line + "'");
      }
      header_seen = true;
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 3) throw ParseError("sample CSV line " + std::to_string(line_no) + ": expected 3 fields");
    const std::string context = "sample CSV line " + std::to_string(line_no);
    const double cycle = detail::parse_number(fields[0], context);
    const double set_size = detail::parse_number(fields[1], context);
    if (cycle < 1 || set_size < 1 || cycle != std::floor(cycle) || set_size != std::floor(set_size)) {
      throw ParseError(context + ": cycle and set_size must be positive integers");
    }
    rows.push_back({static_cast<int>(cycle), static_cast<int>(set_size), detail::parse_number(fields[2], context)});
  }
  if (!header_seen) throw ParseError("sample CSV: missing header");
  if (rows.empty()) throw ParseError("sample CSV: no rows");
  int m = 0;
  int l = 0;
  for (const auto& r : rows) {
    m = std::max(m, r.set_size);
    l = std::max(l, r.cycle);
  }
  if (rows.size() != static_cast<std::size_t>(m) * static_cast<std::size_t>(l)) {
    throw ParseError("sample CSV: expected " + std::to_string(m * l) + " rows for m=" + std::to_string(m) +
                     ", l=" + std::to_string(l) + ", got " + std::to_string(rows.size()));
  }
  MinRssuSample s(m, l);
  std::vector<bool> seen(s.n(), false);
  for (const auto& r : rows) {
    const auto idx = static_cast<std::size_t>(r.cycle - 1) * static_cast<std::size_t>(m) +
                     static_cast<std::size_t>(r.set_size - 1);
    if (seen[idx]) throw ParseError("sample CSV: duplicate cell");
    seen[idx] = true;
    s.at(r.cycle, r.set_size) = r.value;
  }
  return s;
}

}  // namespace crexlab
