#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ghlfd/evaluate.hpp"
#include "ghlfd/model_io.hpp"
#include "ghlfd/pca.hpp"
#include "ghlfd/plant.hpp"

namespace ghlfd {

struct PipelineConfig {
  std::vector<std::string> channels = default_channels();
  std::size_t w = 120;
  std::size_t hidden1 = 64;
  std::size_t hidden2 = 64;
  TrainConfig train;
  double quantile_q = 0.999;
  double halflife = 0.0;           // 0: 2w
  double holdout_fraction = 0.2;   // tail of the normal trace kept out of training
  std::size_t interval_length = 0; // 0: w
  std::size_t sweep_points = 100;
  double pca_variance = 0.95;
  std::size_t burn_in_batches = 1;  // forecast batches skipped before scoring
  // When the normal trace is too short for a hold-out threshold fit: false
  // throws, true trains on the whole trace and leaves the threshold NaN.
  bool allow_unfitted_threshold = false;

  std::size_t effective_interval() const { return interval_length ? interval_length : w; }
  double effective_halflife() const { return halflife > 0.0 ? halflife : 2.0 * static_cast<double>(w); }
  // First scored row and minimum series length for detection.
  std::size_t scored_from() const { return (1 + burn_in_batches) * w; }
  void validate() const;
};

struct LstmFit {
  TrainedModel model;
  TrainResult history;
  std::vector<double> holdout_smoothed;  // smoothed error on the held-out tail
};

// Normalizes with statistics of the training part, trains on it, and fits
// the threshold as the q-quantile of smoothed forecast error on the held-out
// tail.
LstmFit fit_lstm_detector(const TimeSeries& normal, const PipelineConfig& config);

// Smoothed forecast error and DANGER labels over the scored window
// [(1 + burn_in) * w, floor(n / w) * w) of one trace.
TraceErrors score_trace(const TrainedModel& model, const LabeledTrace& trace, const std::string& name);
// Same window, with raw error and forecast kept for plotting/reporting.
struct TraceDetail {
  ForecastResult forecast;
  ErrorSeries errors;
};
TraceDetail detail_trace(const TrainedModel& model, const LabeledTrace& trace);

struct PcaFit {
  PcaDetector detector;
  std::vector<double> holdout_smoothed;
};

// PCA baseline with the same normalization, smoothing, hold-out split and
// quantile rule as the LSTM detector.
PcaFit fit_pca_detector(const TimeSeries& normal, const PipelineConfig& config);
TraceErrors score_trace(const PcaDetector& detector, const LabeledTrace& trace, const std::string& name,
                        const PipelineConfig& config);

struct MethodResult {
  EvalReport report;  // sweep from the fitted threshold to the largest observed error
  ScoreRow at_fitted;
  ScoreRow best;
};

MethodResult evaluate_method(std::span<const TraceErrors> traces, double fitted_threshold,
                             const PipelineConfig& config);

struct StudyRow {
  std::size_t w = 0;
  double dropout = 0.0;
  double holdout_mse = 0.0;
  double threshold = 0.0;
  ScoreRow at_fitted;
  ScoreRow best;
};

// One trained model per (w, dropout) cell, evaluated on the same traces.
std::vector<StudyRow> run_study(const TimeSeries& normal, std::span<const LabeledTrace> tests,
                                const PipelineConfig& base, std::span<const std::size_t> batch_lengths,
                                std::span<const double> dropouts, std::size_t jobs = 1);

std::string format_study(std::span<const StudyRow> rows);
void write_study_csv(std::span<const StudyRow> rows, const std::filesystem::path& path);

}  // namespace ghlfd
