#include "ghlfd/detect.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ghlfd/errors.hpp"

namespace ghlfd {

std::vector<double> pointwise_mse(const Matrix& measured, const Matrix& predicted) {
  if (measured.rows() != predicted.rows() || measured.cols() != predicted.cols())
    throw DataError("pointwise_mse: shape mismatch");
  const std::size_t m = measured.cols();
  if (m == 0) throw DataError("pointwise_mse: no channels");
  std::vector<double> out(measured.rows());
  for (std::size_t t = 0; t < measured.rows(); ++t) {
    const auto a = measured.row(t);
    const auto b = predicted.row(t);
    double acc = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      const double d = a[c] - b[c];
      acc += d * d;
    }
    out[t] = acc / static_cast<double>(m);
  }
  return out;
}

double ema_decay(double halflife) {
  if (!(halflife >= 1.0)) throw ConfigError("EMA half-life must be >= 1");
  return std::exp2(-1.0 / halflife);
}

std::vector<double> ema_smooth(std::span<const double> raw, double halflife) {
  const double lambda = ema_decay(halflife);
  std::vector<double> out(raw.size());
  if (raw.empty()) return out;
  out[0] = raw[0];
  for (std::size_t t = 1; t < raw.size(); ++t) out[t] = lambda * out[t - 1] + (1.0 - lambda) * raw[t];
  return out;
}

double fit_threshold(std::span<const double> smoothed, double quantile_q) {
  if (!(quantile_q > 0.0 && quantile_q < 1.0)) throw ConfigError("quantile must lie in (0, 1)");
  if (smoothed.size() < kMinThresholdPoints) {
    throw DataError("fit_threshold: " + std::to_string(smoothed.size()) + " error points, need at least " +
                    std::to_string(kMinThresholdPoints));
  }
  std::vector<double> v(smoothed.begin(), smoothed.end());
  const double pos = static_cast<double>(v.size() - 1) * quantile_q;
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(lo), v.end());
  const double a = v[lo];
  const double b = hi == lo ? a : *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(lo) + 1, v.end());
  return a + (pos - static_cast<double>(lo)) * (b - a);
}

std::vector<std::uint8_t> decide(std::span<const double> smoothed, double threshold) {
  if (!(threshold >= 0.0)) throw ConfigError("threshold must be >= 0");
  std::vector<std::uint8_t> out(smoothed.size());
  for (std::size_t t = 0; t < smoothed.size(); ++t) out[t] = smoothed[t] > threshold ? 1 : 0;
  return out;
}

void DetectorConfig::validate() const {
  if (!(threshold >= 0.0)) throw ConfigError("threshold must be >= 0");
  if (!(quantile_q > 0.0 && quantile_q < 1.0)) throw ConfigError("quantile must lie in (0, 1)");
  if (halflife != 0.0 && !(halflife >= 1.0)) throw ConfigError("EMA half-life must be >= 1");
}

ErrorSeries error_series(const TimeSeries& measured, const ForecastResult& forecast, double halflife,
                         std::size_t burn_in) {
  if (measured.length() != forecast.predicted.length() || measured.width() != forecast.predicted.width())
    throw DataError("error_series: forecast does not match the measured series");
  const std::size_t from = forecast.valid_from + burn_in;
  if (from >= forecast.valid_to) throw DataError("error_series: burn-in leaves no forecast points");
  const std::size_t n = forecast.valid_to - from;
  ErrorSeries es;
  es.valid_from = from;
  es.raw = pointwise_mse(measured.values().slice_rows(from, n), forecast.predicted.values().slice_rows(from, n));
  es.smoothed = ema_smooth(es.raw, halflife);
  return es;
}

}  // namespace ghlfd
