#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace ghlfd {

struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

  Confusion& operator+=(const Confusion& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

struct ScoreRow {
  double threshold = 0.0;
  Confusion counts;
  double precision = 0.0;  // 1 when TP + FP = 0, see precision_undefined
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_undefined = false;
};

// Precision/recall/F1 from interval counts.
ScoreRow make_row(double threshold, const Confusion& counts);

// Splits aligned vectors into consecutive intervals of `interval_length`
// (trailing remainder dropped). An interval is a predicted fault if any
// decision in it is 1 and a true fault if any danger label in it is 1.
Confusion count_intervals(std::span<const std::uint8_t> decisions, std::span<const std::uint8_t> danger,
                          std::size_t interval_length);

ScoreRow score_intervals(std::span<const std::uint8_t> decisions, std::span<const std::uint8_t> danger,
                         std::size_t interval_length);

// Smoothed error and ground truth over one test trace's scored window.
struct TraceErrors {
  std::string name;
  std::vector<double> smoothed;
  std::vector<std::uint8_t> danger;
};

struct EvalReport {
  std::size_t interval_length = 0;
  std::vector<ScoreRow> rows;                       // aggregated over traces, one per threshold
  std::vector<std::string> trace_names;
  std::vector<std::vector<ScoreRow>> per_trace;     // [trace][threshold]

  // Row with the highest F1; ties go to the lower threshold.
  const ScoreRow& best() const;
};

// `count` evenly spaced thresholds from `lo` to `hi` inclusive.
std::vector<double> threshold_grid(double lo, double hi, std::size_t count);

EvalReport sweep_thresholds(std::span<const TraceErrors> traces, std::span<const double> grid,
                            std::size_t interval_length);

// threshold,tp,fp,fn,tn,precision,recall,f1,precision_undefined
void write_report_csv(const EvalReport& report, const std::filesystem::path& path);
// threshold,precision,recall,f1 (threshold sweep plot data)
void write_sweep_csv(const EvalReport& report, const std::filesystem::path& path);
// Fixed-width text table of the aggregated rows.
std::string format_report(const EvalReport& report);

}  // namespace ghlfd
