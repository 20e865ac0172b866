#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "ghlfd/neural.hpp"
#include "ghlfd/timeseries.hpp"

namespace ghlfd {

// Row t of `predicted` is the model's forecast of observation t. Rows
// outside [valid_from, valid_to) hold NaN: the first batch has no forecast
// and a trailing partial batch is never forecast.
struct ForecastResult {
  TimeSeries predicted;
  std::size_t valid_from = 0;
  std::size_t valid_to = 0;
};

// Feeds batches 1..k-1 through a copy of `model` from zero state with
// inference-mode dropout; the output for batch i fills batch i+1.
// When `expected_channels` is non-empty the series channel names must match
// it exactly.
ForecastResult run_forecast(const LstmModel& model, const TimeSeries& normalized, std::size_t w,
                            std::span<const std::string> expected_channels = {});

}  // namespace ghlfd
