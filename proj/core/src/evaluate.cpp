#include "ghlfd/evaluate.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ghlfd/detect.hpp"
#include "ghlfd/errors.hpp"

namespace ghlfd {

ScoreRow make_row(double threshold, const Confusion& c) {
  ScoreRow r;
  r.threshold = threshold;
  r.counts = c;
  if (c.tp + c.fp == 0) {
    r.precision = 1.0;
    r.precision_undefined = true;
  } else {
    r.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  }
  r.recall = c.tp + c.fn == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  const double sum = r.precision + r.recall;
  r.f1 = sum == 0.0 ? 0.0 : 2.0 * r.precision * r.recall / sum;
  return r;
}

Confusion count_intervals(std::span<const std::uint8_t> decisions, std::span<const std::uint8_t> danger,
                          std::size_t interval_length) {
  if (decisions.size() != danger.size()) {
    throw DataError("score_intervals: " + std::to_string(decisions.size()) + " decisions vs " +
                    std::to_string(danger.size()) + " labels");
  }
  if (interval_length == 0) throw ConfigError("score_intervals: interval length must be >= 1");
  Confusion c;
  const std::size_t count = decisions.size() / interval_length;
  for (std::size_t k = 0; k < count; ++k) {
    const auto d = decisions.subspan(k * interval_length, interval_length);
    const auto g = danger.subspan(k * interval_length, interval_length);
    const bool predicted = std::any_of(d.begin(), d.end(), [](auto v) { return v != 0; });
    const bool actual = std::any_of(g.begin(), g.end(), [](auto v) { return v != 0; });
    if (predicted && actual) ++c.tp;
    else if (predicted) ++c.fp;
    else if (actual) ++c.fn;
    else ++c.tn;
  }
  return c;
}

ScoreRow score_intervals(std::span<const std::uint8_t> decisions, std::span<const std::uint8_t> danger,
                         std::size_t interval_length) {
  return make_row(0.0, count_intervals(decisions, danger, interval_length));
}

const ScoreRow& EvalReport::best() const {
  if (rows.empty()) throw DataError("EvalReport::best: empty report");
  const ScoreRow* best = &rows.front();
  for (const auto& r : rows) {
    if (r.f1 > best->f1) best = &r;
  }
  return *best;
}

std::vector<double> threshold_grid(double lo, double hi, std::size_t count) {
  if (count == 0) throw ConfigError("threshold grid must have at least one point");
  if (hi < lo) hi = lo;
  std::vector<double> g(count);
  if (count == 1) {
    g[0] = lo;
    return g;
  }
  for (std::size_t k = 0; k < count; ++k)
    g[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(count - 1);
  g.back() = hi;
  return g;
}

EvalReport sweep_thresholds(std::span<const TraceErrors> traces, std::span<const double> grid,
                            std::size_t interval_length) {
  if (grid.empty()) throw ConfigError("sweep_thresholds: empty threshold grid");
  EvalReport rep;
  rep.interval_length = interval_length;
  rep.per_trace.resize(traces.size());
  for (const auto& tr : traces) rep.trace_names.push_back(tr.name);
  for (double thr : grid) {
    Confusion total;
    for (std::size_t k = 0; k < traces.size(); ++k) {
      const auto dec = decide(traces[k].smoothed, thr);
      const Confusion c = count_intervals(dec, traces[k].danger, interval_length);
      rep.per_trace[k].push_back(make_row(thr, c));
      total += c;
    }
    rep.rows.push_back(make_row(thr, total));
  }
  return rep;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError(path.string() + ": cannot open file for writing");
  out.precision(17);
  return out;
}

}  // namespace

void write_report_csv(const EvalReport& report, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "threshold,tp,fp,fn,tn,precision,recall,f1,precision_undefined\n";
  for (const auto& r : report.rows) {
    out << r.threshold << ',' << r.counts.tp << ',' << r.counts.fp << ',' << r.counts.fn << ',' << r.counts.tn << ','
        << r.precision << ',' << r.recall << ',' << r.f1 << ',' << (r.precision_undefined ? 1 : 0) << '\n';
  }
}

void write_sweep_csv(const EvalReport& report, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "threshold,precision,recall,f1\n";
  for (const auto& r : report.rows) out << r.threshold << ',' << r.precision << ',' << r.recall << ',' << r.f1 << '\n';
}

std::string format_report(const EvalReport& report) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%12s %6s %6s %6s %6s %9s %7s %7s\n", "threshold", "TP", "FP", "FN", "TN",
                "precision", "recall", "F1");
  out << line;
  for (const auto& r : report.rows) {
    std::snprintf(line, sizeof line, "%12.6g %6zu %6zu %6zu %6zu %8.3f%s %7.3f %7.3f\n", r.threshold, r.counts.tp,
                  r.counts.fp, r.counts.fn, r.counts.tn, r.precision, r.precision_undefined ? "*" : " ", r.recall,
                  r.f1);
    out << line;
  }
  return out.str();
}

}  // namespace ghlfd
