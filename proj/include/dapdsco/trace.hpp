#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dapdsco {

// One row per tick. Stamp conventions: record k covers the update taking iterate k
// to k+1; gap/violation/ergodic_gap are evaluated at the post-update iterate, the
// descent quantities (V_pre, delta_x, delta_lambda, S, T, E) at the pre-update one.
// S = sum of beta over the realized price-staleness window, T = sum of alpha over
// the realized flow-staleness window, E the per-tick error envelope. Metric fields
// start as NaN and are filled by analysis annotation where applicable.
struct TickRecord {
  long k = 0;
  double alpha = 0.0;
  double beta = 0.0;
  long price_age_max = 0;  // realized delta_max(k)
  long flow_age_max = 0;   // realized Delta_max(k)
  double S = 0.0;
  double T = 0.0;
  long sent = 0;
  long dropped = 0;

  double gap = std::numeric_limits<double>::quiet_NaN();
  double violation = std::numeric_limits<double>::quiet_NaN();
  double ergodic_gap = std::numeric_limits<double>::quiet_NaN();
  double V_pre = std::numeric_limits<double>::quiet_NaN();
  double V_post = std::numeric_limits<double>::quiet_NaN();
  double delta_x = std::numeric_limits<double>::quiet_NaN();
  double delta_lambda = std::numeric_limits<double>::quiet_NaN();
  double E = std::numeric_limits<double>::quiet_NaN();
};

struct RunTrace {
  std::string algorithm;
  std::string variant;  // "supply_chain" or "quadratic"
  std::uint64_t seed = 0;
  long iterations = 0;

  std::vector<double> x0;
  std::vector<double> lambda0;
  // Post-update iterates, one entry per tick.
  std::vector<std::vector<double>> x;
  std::vector<std::vector<double>> lambda;
  std::vector<TickRecord> ticks;

  long total_sent = 0;
  long total_dropped = 0;

  long record_count() const { return static_cast<long>(ticks.size()); }

  const std::vector<double>& iterate_x(long k) const {
    return k == 0 ? x0 : x.at(static_cast<std::size_t>(k - 1));
  }
  const std::vector<double>& iterate_lambda(long k) const {
    return k == 0 ? lambda0 : lambda.at(static_cast<std::size_t>(k - 1));
  }
};

// Shortest round-trip formatting; byte-stable across runs for identical doubles.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("double formatting failed");
  return std::string(buf, ptr);
}

struct TraceWriteOptions {
  bool full_iterates = false;
  long stride = 1;
};

inline std::string trace_csv_header(const RunTrace& t, const TraceWriteOptions& opt) {
  std::string h =
      "k,alpha,beta,delta_max,Delta_max,S,T,sent,dropped,delivered,gap,violation,"
      "ergodic_gap,V_pre,V_post,delta_x,delta_lambda,E";
  if (opt.full_iterates) {
    for (std::size_t i = 0; i < t.x0.size(); ++i) h += ",x" + std::to_string(i);
    for (std::size_t i = 0; i < t.lambda0.size(); ++i) h += ",lambda" + std::to_string(i);
  }
  return h;
}

inline std::string trace_to_csv(const RunTrace& t, const TraceWriteOptions& opt = {}) {
  if (opt.stride < 1) throw std::invalid_argument("trace stride must be >= 1");
  std::string out = trace_csv_header(t, opt);
  out += '\n';
  for (std::size_t i = 0; i < t.ticks.size(); ++i) {
    const auto& r = t.ticks[i];
    // Keep the final row regardless of stride so the last iterate survives.
    if (r.k % opt.stride != 0 && i + 1 != t.ticks.size()) continue;
    out += std::to_string(r.k);
    out += ',';
    out += format_double(r.alpha);
    out += ',';
    out += format_double(r.beta);
    out += ',';
    out += std::to_string(r.price_age_max);
    out += ',';
    out += std::to_string(r.flow_age_max);
    out += ',';
    out += format_double(r.S);
    out += ',';
    out += format_double(r.T);
    out += ',';
    out += std::to_string(r.sent);
    out += ',';
    out += std::to_string(r.dropped);
    out += ',';
    out += std::to_string(r.sent - r.dropped);
    out += ',';
    out += format_double(r.gap);
    out += ',';
    out += format_double(r.violation);
    out += ',';
    out += format_double(r.ergodic_gap);
    out += ',';
    out += format_double(r.V_pre);
    out += ',';
    out += format_double(r.V_post);
    out += ',';
    out += format_double(r.delta_x);
    out += ',';
    out += format_double(r.delta_lambda);
    out += ',';
    out += format_double(r.E);
    if (opt.full_iterates) {
      for (double v : t.x[i]) {
        out += ',';
        out += format_double(v);
      }
      for (double v : t.lambda[i]) {
        out += ',';
        out += format_double(v);
      }
    }
    out += '\n';
  }
  return out;
}

// Column-oriented view of a trace CSV, used by the verification commands.
struct TraceTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> data;  // per column

  long rows() const { return data.empty() ? 0 : static_cast<long>(data.front().size()); }

  bool has_column(const std::string& name) const {
    for (const auto& c : columns)
      if (c == name) return true;
    return false;
  }

  const std::vector<double>& column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return data[i];
    throw std::runtime_error("trace is missing column: " + name);
  }
};

inline TraceTable parse_trace_csv(std::istream& in) {
  TraceTable t;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("trace file is empty");
  std::stringstream header(line);
  std::string cell;
  while (std::getline(header, cell, ',')) t.columns.push_back(cell);
  if (t.columns.empty() || t.columns.front() != "k")
    throw std::runtime_error("trace header malformed: expected leading k column");
  t.data.assign(t.columns.size(), {});
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::size_t col = 0;
    const char* p = line.data();
    const char* end = p + line.size();
    while (p <= end) {
      const char* comma = p;
      while (comma < end && *comma != ',') ++comma;
      if (col >= t.columns.size())
        throw std::runtime_error("trace row " + std::to_string(line_no) + " has extra fields");
      double v = 0.0;
      if (comma == p) {
        v = std::numeric_limits<double>::quiet_NaN();
      } else if (std::string_view(p, static_cast<std::size_t>(comma - p)) == "nan") {
        v = std::numeric_limits<double>::quiet_NaN();
      } else {
        auto [ptr, ec] = std::from_chars(p, comma, v);
        if (ec != std::errc() || ptr != comma)
          throw std::runtime_error("trace row " + std::to_string(line_no) +
                                   " has a malformed number in column " + t.columns[col]);
      }
      t.data[col].push_back(v);
      ++col;
      if (comma == end) break;
      p = comma + 1;
    }
    if (col != t.columns.size())
      throw std::runtime_error("trace row " + std::to_string(line_no) +
                               " is truncated: expected " + std::to_string(t.columns.size()) +
                               " fields, got " + std::to_string(col));
  }
  return t;
}

inline TraceTable read_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace file: " + path);
  return parse_trace_csv(in);
}

}  // namespace dapdsco
