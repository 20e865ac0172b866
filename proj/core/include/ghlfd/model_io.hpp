#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>

#include "ghlfd/detect.hpp"
#include "ghlfd/neural.hpp"
#include "ghlfd/timeseries.hpp"

namespace ghlfd {

// Everything needed to run detection on new data.
struct TrainedModel {
  LstmModel net;
  NormStats norm;  // channel names double as the model's input schema
  std::size_t batch_length = 0;
  DetectorConfig detector;
  double holdout_mse = 0.0;  // mean raw forecast MSE on held-out normal data
};

// Binary layout: see docs/model_format.md.
inline constexpr char kModelMagic[8] = {'G', 'H', 'L', 'F', 'D', 'M', 'D', 'L'};
inline constexpr std::uint32_t kModelFormatVersion = 1;

void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

// Threshold, quantile, half-life and batch length as JSON, for humans and
// for the threshold "handle" to be edited without touching the model.
void save_detector_json(const TrainedModel& model, const std::filesystem::path& path);

}  // namespace ghlfd
