#include "ghlfd/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "ghlfd/errors.hpp"
#include "ghlfd/parallel.hpp"

namespace ghlfd {

void PipelineConfig::validate() const {
  if (channels.empty()) throw ConfigError("no channels selected");
  if (w == 0) throw ConfigError("batch length w must be >= 1");
  if (hidden1 == 0 || hidden2 == 0) throw ConfigError("hidden sizes must be >= 1");
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) throw ConfigError("holdout fraction must lie in (0, 1)");
  if (!(quantile_q > 0.0 && quantile_q < 1.0)) throw ConfigError("quantile must lie in (0, 1)");
  if (halflife != 0.0 && !(halflife >= 1.0)) throw ConfigError("EMA half-life must be >= 1");
  if (sweep_points == 0) throw ConfigError("sweep needs at least one threshold");
  if (!(pca_variance > 0.0 && pca_variance <= 1.0)) throw ConfigError("PCA variance fraction must lie in (0, 1]");
  train.validate();
}

namespace {

std::size_t training_rows(std::size_t n, const PipelineConfig& cfg) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(n) * (1.0 - cfg.holdout_fraction)));
}

// Window of a trace that gets scored: whole batches after the first
// (1 + burn_in) batches.
struct Window {
  std::size_t from, to;
};

Window scored_window(std::size_t n, std::size_t w, std::size_t burn_in) {
  const std::size_t need = (2 + burn_in) * w;
  if (n < need) {
    throw DataError("series has " + std::to_string(n) + " points, need at least " + std::to_string(need) +
                    " (w = " + std::to_string(w) + ", burn-in " + std::to_string(burn_in) + " batch(es))");
  }
  return {(1 + burn_in) * w, (n / w) * w};
}

std::vector<std::uint8_t> window_labels(const LabeledTrace& trace, Window win) {
  return {trace.danger.begin() + static_cast<std::ptrdiff_t>(win.from),
          trace.danger.begin() + static_cast<std::ptrdiff_t>(win.to)};
}

std::vector<double> tail_of(const std::vector<double>& window_values, std::size_t window_from, std::size_t first_row) {
  const std::size_t skip = first_row > window_from ? first_row - window_from : 0;
  if (skip >= window_values.size()) return {};
  return {window_values.begin() + static_cast<std::ptrdiff_t>(skip), window_values.end()};
}

}  // namespace

namespace {

// Number of smoothed hold-out points available when training on n_train rows.
std::size_t holdout_points(std::size_t n, std::size_t n_train, const PipelineConfig& cfg) {
  const std::size_t from = std::max(n_train, cfg.scored_from());
  const std::size_t to = (n / cfg.w) * cfg.w;
  return to > from ? to - from : 0;
}

}  // namespace

LstmFit fit_lstm_detector(const TimeSeries& normal, const PipelineConfig& cfg) {
  cfg.validate();
  const TimeSeries selected = normal.select(cfg.channels);
  const std::size_t n = selected.length();
  std::size_t n_train = training_rows(n, cfg);
  bool fit_thr = true;
  if (n_train < 2 * cfg.w || holdout_points(n, n_train, cfg) < kMinThresholdPoints) {
    if (!cfg.allow_unfitted_threshold) {
      if (n_train < 2 * cfg.w)
        throw DataError("training part has " + std::to_string(n_train) + " points, need at least 2w = " +
                        std::to_string(2 * cfg.w));
      throw DataError("held-out normal data has " + std::to_string(holdout_points(n, n_train, cfg)) +
                      " scored points, need at least " + std::to_string(kMinThresholdPoints) +
                      " to fit the threshold; use a longer normal trace");
    }
    fit_thr = false;
    n_train = n;
  }
  if (n_train < 2 * cfg.w) {
    throw DataError("series has " + std::to_string(n_train) + " points, need at least 2w = " +
                    std::to_string(2 * cfg.w));
  }
  const TimeSeries train_part = selected.slice(0, n_train);

  LstmFit fit;
  fit.model.norm = fit_norm(train_part);
  fit.model.batch_length = cfg.w;
  fit.model.detector.quantile_q = cfg.quantile_q;
  fit.model.detector.halflife = cfg.effective_halflife();
  fit.model.detector.burn_in_batches = cfg.burn_in_batches;
  fit.model.net = LstmModel(selected.width(), cfg.hidden1, cfg.hidden2, cfg.train.dropout_p);
  fit.model.net.initialize(cfg.train.seed);
  fit.history = train(fit.model.net, apply_norm(train_part, fit.model.norm), cfg.w, cfg.train);

  if (!fit_thr) {
    fit.model.detector.threshold = std::numeric_limits<double>::quiet_NaN();
    fit.model.holdout_mse = std::numeric_limits<double>::quiet_NaN();
    return fit;
  }
  const TimeSeries normalized = apply_norm(selected, fit.model.norm);
  const ForecastResult fc = run_forecast(fit.model.net, normalized, cfg.w, fit.model.norm.channels);
  const ErrorSeries es = error_series(normalized, fc, cfg.effective_halflife(), cfg.burn_in_batches * cfg.w);
  fit.holdout_smoothed = tail_of(es.smoothed, es.valid_from, n_train);
  const auto raw_tail = tail_of(es.raw, es.valid_from, n_train);
  double sum = 0.0;
  for (double v : raw_tail) sum += v;
  fit.model.holdout_mse = sum / static_cast<double>(raw_tail.size());
  if (!std::isfinite(fit.model.holdout_mse)) throw NumericError("forecast error on held-out data is not finite");
  fit.model.detector.threshold = fit_threshold(fit.holdout_smoothed, cfg.quantile_q);
  return fit;
}

TraceDetail detail_trace(const TrainedModel& model, const LabeledTrace& trace) {
  const auto normalized = apply_norm(trace.series.select(model.norm.channels), model.norm);
  TraceDetail d;
  scored_window(normalized.length(), model.batch_length, model.detector.burn_in_batches);
  d.forecast = run_forecast(model.net, normalized, model.batch_length, model.norm.channels);
  d.errors = error_series(normalized, d.forecast, model.detector.effective_halflife(model.batch_length),
                          model.detector.burn_in_batches * model.batch_length);
  return d;
}

TraceErrors score_trace(const TrainedModel& model, const LabeledTrace& trace, const std::string& name) {
  const Window win = scored_window(trace.series.length(), model.batch_length, model.detector.burn_in_batches);
  TraceDetail d = detail_trace(model, trace);
  return TraceErrors{name, std::move(d.errors.smoothed), window_labels(trace, win)};
}

PcaFit fit_pca_detector(const TimeSeries& normal, const PipelineConfig& cfg) {
  cfg.validate();
  const TimeSeries selected = normal.select(cfg.channels);
  const std::size_t n_train = training_rows(selected.length(), cfg);
  if (n_train < 2) throw DataError("PCA baseline: training part too short");
  const TimeSeries train_part = selected.slice(0, n_train);
  const NormStats norm = fit_norm(train_part);

  PcaFit fit;
  fit.detector = pca_fit(apply_norm(train_part, norm), cfg.pca_variance);
  fit.detector.norm = norm;
  const Window win = scored_window(selected.length(), cfg.w, cfg.burn_in_batches);
  const auto score = pca_score(fit.detector, apply_norm(selected, norm));
  const std::vector<double> raw(score.begin() + static_cast<std::ptrdiff_t>(win.from),
                                score.begin() + static_cast<std::ptrdiff_t>(win.to));
  fit.holdout_smoothed = tail_of(ema_smooth(raw, cfg.effective_halflife()), win.from, n_train);
  if (fit.holdout_smoothed.size() < kMinThresholdPoints)
    throw DataError("PCA baseline: held-out normal data too short to fit the threshold");
  fit.detector.threshold = fit_threshold(fit.holdout_smoothed, cfg.quantile_q);
  return fit;
}

TraceErrors score_trace(const PcaDetector& det, const LabeledTrace& trace, const std::string& name,
                        const PipelineConfig& cfg) {
  const Window win = scored_window(trace.series.length(), cfg.w, cfg.burn_in_batches);
  const auto score = pca_score(det, apply_norm(trace.series.select(det.norm.channels), det.norm));
  const std::vector<double> raw(score.begin() + static_cast<std::ptrdiff_t>(win.from),
                                score.begin() + static_cast<std::ptrdiff_t>(win.to));
  return TraceErrors{name, ema_smooth(raw, cfg.effective_halflife()), window_labels(trace, win)};
}

MethodResult evaluate_method(std::span<const TraceErrors> traces, double fitted_threshold,
                             const PipelineConfig& cfg) {
  if (traces.empty()) throw DataError("no test traces to evaluate");
  double max_err = fitted_threshold;
  for (const auto& t : traces)
    for (double v : t.smoothed) max_err = std::max(max_err, v);
  const auto grid = threshold_grid(fitted_threshold, max_err, cfg.sweep_points);
  MethodResult r;
  r.report = sweep_thresholds(traces, grid, cfg.effective_interval());
  r.at_fitted = r.report.rows.front();
  r.best = r.report.best();
  return r;
}

std::vector<StudyRow> run_study(const TimeSeries& normal, std::span<const LabeledTrace> tests,
                                const PipelineConfig& base, std::span<const std::size_t> batch_lengths,
                                std::span<const double> dropouts, std::size_t jobs) {
  if (tests.empty()) throw DataError("study: no test traces");
  struct Cell {
    std::size_t w;
    double p;
  };
  std::vector<Cell> cells;
  for (auto w : batch_lengths)
    for (auto p : dropouts) cells.push_back({w, p});
  std::vector<StudyRow> rows(cells.size());
  parallel_for(cells.size(), jobs, [&](std::size_t k) {
    PipelineConfig cfg = base;
    cfg.w = cells[k].w;
    cfg.train.dropout_p = cells[k].p;
    const auto fit = fit_lstm_detector(normal, cfg);
    std::vector<TraceErrors> errs;
    for (std::size_t i = 0; i < tests.size(); ++i) errs.push_back(score_trace(fit.model, tests[i], std::to_string(i)));
    const auto res = evaluate_method(errs, fit.model.detector.threshold, cfg);
    rows[k] = StudyRow{cfg.w, cfg.train.dropout_p, fit.model.holdout_mse, fit.model.detector.threshold,
                       res.at_fitted, res.best};
  });
  return rows;
}

std::string format_study(std::span<const StudyRow> rows) {
  std::ostringstream out;
  char line[200];
  std::snprintf(line, sizeof line, "%5s %7s %9s %10s %9s %7s %7s   %9s %7s %7s\n", "w", "p", "MSE", "threshold",
                "Precision", "Recall", "F1", "P@fitted", "R@fit", "F1@fit");
  out << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%5zu %7.3g %9.4f %10.4g %9.3f %7.3f %7.3f   %9.3f %7.3f %7.3f\n", r.w, r.dropout,
                  r.holdout_mse, r.best.threshold, r.best.precision, r.best.recall, r.best.f1, r.at_fitted.precision,
                  r.at_fitted.recall, r.at_fitted.f1);
    out << line;
  }
  return out.str();
}

void write_study_csv(std::span<const StudyRow> rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError(path.string() + ": cannot open file for writing");
  out.precision(17);
  out << "w,dropout,holdout_mse,fitted_threshold,best_threshold,precision,recall,f1,"
         "precision_at_fitted,recall_at_fitted,f1_at_fitted\n";
  for (const auto& r : rows) {
    out << r.w << ',' << r.dropout << ',' << r.holdout_mse << ',' << r.threshold << ',' << r.best.threshold << ','
        << r.best.precision << ',' << r.best.recall << ',' << r.best.f1 << ',' << r.at_fitted.precision << ','
        << r.at_fitted.recall << ',' << r.at_fitted.f1 << '\n';
  }
}

}  // namespace ghlfd
