#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ghlfd/forecast.hpp"
#include "ghlfd/matrix.hpp"

namespace ghlfd {

// Per-time-point mean over channels of the squared normalized residual.
std::vector<double> pointwise_mse(const Matrix& measured, const Matrix& predicted);

// Decay factor whose impulse response halves after `halflife` steps.
double ema_decay(double halflife);

// s_0 = raw_0, s_t = lambda s_{t-1} + (1 - lambda) raw_t with
// lambda = 2^(-1/halflife).
std::vector<double> ema_smooth(std::span<const double> raw, double halflife);

// Empirical q-quantile with linear interpolation between order statistics
// (position (n - 1) q in the sorted sample). Needs at least
// kMinThresholdPoints values.
inline constexpr std::size_t kMinThresholdPoints = 1000;
double fit_threshold(std::span<const double> smoothed, double quantile_q);

// 1 (fault) where smoothed > threshold; a value equal to the threshold is
// normal.
std::vector<std::uint8_t> decide(std::span<const double> smoothed, double threshold);

struct DetectorConfig {
  double threshold = 0.0;  // operator-tunable; defaults to the fitted quantile
  double quantile_q = 0.999;
  double halflife = 0.0;  // 0: twice the batch length
  // Forecast batches skipped before error statistics start; the first
  // forecast batch is produced from a cold recurrent state.
  std::size_t burn_in_batches = 1;

  // NaN when the training trace was too short to fit one.
  bool has_threshold() const { return !std::isnan(threshold); }
  double effective_halflife(std::size_t w) const { return halflife > 0.0 ? halflife : 2.0 * static_cast<double>(w); }
  void validate() const;
};

// Error signals over the forecast window [valid_from, valid_to) of a series.
// Index k of raw/smoothed corresponds to time point valid_from + k.
struct ErrorSeries {
  std::vector<double> raw;
  std::vector<double> smoothed;
  std::size_t valid_from = 0;
};

// Errors start `burn_in` rows after forecast.valid_from.
ErrorSeries error_series(const TimeSeries& measured_normalized, const ForecastResult& forecast, double halflife,
                         std::size_t burn_in = 0);

}  // namespace ghlfd
