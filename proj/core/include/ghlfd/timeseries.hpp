#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ghlfd/matrix.hpp"

namespace ghlfd {

// Column holding the time stamp in GHL-style CSV files.
inline constexpr const char* kTimeChannel = "Time";

// The six process channels the detector works on by default.
std::vector<std::string> default_channels();

// Label channels carried by attack traces.
inline constexpr const char* kAttackChannel = "ATTACK";
inline constexpr const char* kDangerChannel = "DANGER";
inline constexpr const char* kFaultChannel = "FAULT";

// n x m samples on a uniform time grid. Row t is time point t.
class TimeSeries {
 public:
  TimeSeries() = default;
  TimeSeries(std::vector<std::string> channel_names, Matrix values, double dt = 1.0);

  std::size_t length() const noexcept { return values_.rows(); }
  std::size_t width() const noexcept { return values_.cols(); }
  double dt() const noexcept { return dt_; }

  const std::vector<std::string>& channel_names() const noexcept { return names_; }
  const Matrix& values() const noexcept { return values_; }
  Matrix& values() noexcept { return values_; }

  std::optional<std::size_t> find_channel(const std::string& name) const;
  bool has_channel(const std::string& name) const { return find_channel(name).has_value(); }

  // Copy of one channel. Throws DataError naming the channel when absent.
  std::vector<double> column(const std::string& name) const;

  // New series holding the named channels in the requested order.
  TimeSeries select(std::span<const std::string> names) const;

  // Rows [first, first + count).
  TimeSeries slice(std::size_t first, std::size_t count) const;

 private:
  std::vector<std::string> names_;
  Matrix values_;
  double dt_ = 1.0;
};

// Reads a header-plus-rows CSV. Channels keep file order; when
// `expected_channels` is given every listed name must be present.
TimeSeries read_csv(const std::filesystem::path& path,
                    std::span<const std::string> expected_channels = {});

// Writes with shortest round-trip decimal representation.
void write_csv(const TimeSeries& series, const std::filesystem::path& path);

struct NormStats {
  std::vector<std::string> channels;
  std::vector<double> mean;
  std::vector<double> std;

  std::size_t width() const noexcept { return mean.size(); }
  bool is_constant(std::size_t channel) const { return std[channel] == 0.0; }
};

// Mean and population standard deviation per channel. Requires n >= 2.
NormStats fit_norm(const TimeSeries& series);

// (x - mean) / std per channel; constant channels map to 0.
TimeSeries apply_norm(const TimeSeries& series, const NormStats& stats);

// x * std + mean; a constant channel comes back as its mean.
TimeSeries invert_norm(const TimeSeries& series, const NormStats& stats);

void save_norm_stats(const NormStats& stats, const std::filesystem::path& path);
NormStats load_norm_stats(const std::filesystem::path& path);

// Window X^(i) of w consecutive time points.
struct Batch {
  std::size_t index = 0;  // i, 1-based
  std::size_t start = 0;  // j = w * (i - 1) + 1, 1-based
  Matrix values;          // w x m
};

// floor(n / w) disjoint windows; a trailing remainder shorter than w is dropped.
std::vector<Batch> make_batches(const TimeSeries& series, std::size_t w);

}  // namespace ghlfd
