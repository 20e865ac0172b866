#include "ghlfd/forecast.hpp"

#include <limits>

#include "ghlfd/errors.hpp"

namespace ghlfd {

ForecastResult run_forecast(const LstmModel& model, const TimeSeries& normalized, std::size_t w,
                            std::span<const std::string> expected_channels) {
  if (w == 0) throw ConfigError("run_forecast: batch length must be >= 1");
  if (!expected_channels.empty()) {
    const auto& names = normalized.channel_names();
    if (names.size() != expected_channels.size() || !std::equal(names.begin(), names.end(), expected_channels.begin())) {
      std::string want, got;
      for (const auto& n : expected_channels) want += (want.empty() ? "" : ",") + n;
      for (const auto& n : names) got += (got.empty() ? "" : ",") + n;
      throw DataError("channel mismatch: model trained on [" + want + "], series has [" + got + "]");
    }
  }
  if (normalized.width() != model.channels()) {
    throw DataError("run_forecast: series has " + std::to_string(normalized.width()) + " channels, model expects " +
                    std::to_string(model.channels()));
  }
  if (normalized.length() < 2 * w) {
    throw DataError("run_forecast: series has " + std::to_string(normalized.length()) +
                    " points, need at least 2w = " + std::to_string(2 * w));
  }

  LstmModel net = model;
  net.reset_state();
  const auto batches = make_batches(normalized, w);
  Matrix pred(normalized.length(), normalized.width(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i + 1 < batches.size(); ++i) {
    const Matrix out = net.forward(batches[i].values);
    const std::size_t dest = batches[i + 1].start - 1;
    for (std::size_t t = 0; t < w; ++t) {
      const auto src = out.row(t);
      std::copy(src.begin(), src.end(), pred.row(dest + t).begin());
    }
  }
  return ForecastResult{TimeSeries(normalized.channel_names(), std::move(pred), normalized.dt()), w,
                        batches.size() * w};
}

}  // namespace ghlfd
