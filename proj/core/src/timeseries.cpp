#include "ghlfd/timeseries.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string_view>

#include <nlohmann/json.hpp>

#include "ghlfd/errors.hpp"

namespace ghlfd {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = line.find(',', pos);
    if (comma == std::string_view::npos) {
      out.push_back(trim(line.substr(pos)));
      break;
    }
    out.push_back(trim(line.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::vector<std::string> default_channels() {
  return {"RT_level", "RT_temperature", "HT_level", "HT_temperature", "inj_valve_act", "heater_act"};
}

TimeSeries::TimeSeries(std::vector<std::string> channel_names, Matrix values, double dt)
    : names_(std::move(channel_names)), values_(std::move(values)), dt_(dt) {
  if (names_.size() != values_.cols()) {
    throw DataError("time series: " + std::to_string(names_.size()) + " channel names for " +
                    std::to_string(values_.cols()) + " columns");
  }
  std::set<std::string> unique(names_.begin(), names_.end());
  if (unique.size() != names_.size()) throw DataError("time series: duplicate channel names");
  if (!(dt_ > 0.0)) throw DataError("time series: dt must be positive");
}

std::optional<std::size_t> TimeSeries::find_channel(const std::string& name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names_.begin());
}

std::vector<double> TimeSeries::column(const std::string& name) const {
  const auto idx = find_channel(name);
  if (!idx) throw DataError("channel not found: \"" + name + "\"");
  std::vector<double> out(length());
  for (std::size_t t = 0; t < length(); ++t) out[t] = values_(t, *idx);
  return out;
}

TimeSeries TimeSeries::select(std::span<const std::string> names) const {
  std::vector<std::size_t> idx;
  idx.reserve(names.size());
  for (const auto& n : names) {
    const auto i = find_channel(n);
    if (!i) throw DataError("channel not found: \"" + n + "\"");
    idx.push_back(*i);
  }
  Matrix out(length(), idx.size());
  for (std::size_t t = 0; t < length(); ++t)
    for (std::size_t c = 0; c < idx.size(); ++c) out(t, c) = values_(t, idx[c]);
  return TimeSeries({names.begin(), names.end()}, std::move(out), dt_);
}

TimeSeries TimeSeries::slice(std::size_t first, std::size_t count) const {
  if (first + count > length()) throw DataError("time series: slice out of range");
  return TimeSeries(names_, values_.slice_rows(first, count), dt_);
}

TimeSeries read_csv(const std::filesystem::path& path, std::span<const std::string> expected_channels) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open file");

  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
  std::vector<std::string> names;
  for (auto f : split_fields(line)) names.emplace_back(f);

  for (const auto& e : expected_channels) {
    if (std::find(names.begin(), names.end(), e) == names.end())
      throw DataError(path.string() + ": channel not found: \"" + e + "\"");
  }

  const std::size_t m = names.size();
  std::vector<double> flat;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != m) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) + " has " +
                      std::to_string(fields.size()) + " fields, expected " + std::to_string(m));
    }
    for (std::size_t c = 0; c < m; ++c) {
      double v = 0.0;
      const auto f = fields[c];
      const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size()) {
        throw DataError(path.string() + ": non-numeric value \"" + std::string(f) + "\" at line " +
                        std::to_string(line_no) + ", column " + std::to_string(c + 1) + " (" +
                        names[c] + ")");
      }
      flat.push_back(v);
    }
  }
  const std::size_t n = flat.size() / std::max<std::size_t>(m, 1);
  if (n == 0) throw DataError(path.string() + ": no data rows");

  Matrix values(n, m);
  std::copy(flat.begin(), flat.end(), values.data().begin());

  double dt = 1.0;
  const auto time_it = std::find(names.begin(), names.end(), kTimeChannel);
  if (time_it != names.end() && n >= 2) {
    const auto tc = static_cast<std::size_t>(time_it - names.begin());
    const double step = values(1, tc) - values(0, tc);
    if (step > 0.0) dt = step;
  }
  return TimeSeries(std::move(names), std::move(values), dt);
}

void write_csv(const TimeSeries& series, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError(path.string() + ": cannot open file for writing");
  const auto& names = series.channel_names();
  for (std::size_t c = 0; c < names.size(); ++c) out << (c ? "," : "") << names[c];
  out << '\n';
  std::string row;
  for (std::size_t t = 0; t < series.length(); ++t) {
    row.clear();
    const auto r = series.values().row(t);
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c) row += ',';
      row += format_double(r[c]);
    }
    row += '\n';
    out << row;
  }
  if (!out) throw DataError(path.string() + ": write failed");
}

NormStats fit_norm(const TimeSeries& series) {
  const std::size_t n = series.length();
  const std::size_t m = series.width();
  if (n < 2) throw DataError("fit_norm: need at least 2 time points");
  NormStats stats{series.channel_names(), std::vector<double>(m, 0.0), std::vector<double>(m, 0.0)};
  const auto& v = series.values();
  for (std::size_t c = 0; c < m; ++c) {
    double sum = 0.0;
    for (std::size_t t = 0; t < n; ++t) sum += v(t, c);
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    bool constant = true;
    for (std::size_t t = 0; t < n; ++t) {
      const double d = v(t, c) - mean;
      ss += d * d;
      constant = constant && v(t, c) == v(0, c);
    }
    stats.mean[c] = constant ? v(0, c) : mean;
    stats.std[c] = constant ? 0.0 : std::sqrt(ss / static_cast<double>(n));
  }
  return stats;
}

namespace {

void check_dims(const TimeSeries& series, const NormStats& stats, const char* what) {
  if (stats.width() != series.width() || stats.std.size() != series.width()) {
    throw DataError(std::string(what) + ": stats have " + std::to_string(stats.width()) +
                    " channels, series has " + std::to_string(series.width()));
  }
}

}  // namespace

TimeSeries apply_norm(const TimeSeries& series, const NormStats& stats) {
  check_dims(series, stats, "apply_norm");
  Matrix out(series.length(), series.width());
  const auto& v = series.values();
  for (std::size_t t = 0; t < series.length(); ++t)
    for (std::size_t c = 0; c < series.width(); ++c)
      out(t, c) = stats.is_constant(c) ? 0.0 : (v(t, c) - stats.mean[c]) / stats.std[c];
  return TimeSeries(series.channel_names(), std::move(out), series.dt());
}

TimeSeries invert_norm(const TimeSeries& series, const NormStats& stats) {
  check_dims(series, stats, "invert_norm");
  Matrix out(series.length(), series.width());
  const auto& v = series.values();
  for (std::size_t t = 0; t < series.length(); ++t)
    for (std::size_t c = 0; c < series.width(); ++c)
      out(t, c) = stats.is_constant(c) ? stats.mean[c] : v(t, c) * stats.std[c] + stats.mean[c];
  return TimeSeries(series.channel_names(), std::move(out), series.dt());
}

void save_norm_stats(const NormStats& stats, const std::filesystem::path& path) {
  nlohmann::json j;
  j["channels"] = stats.channels;
  j["mean"] = stats.mean;
  j["std"] = stats.std;
  std::ofstream out(path);
  if (!out) throw DataError(path.string() + ": cannot open file for writing");
  out << j.dump(2) << '\n';
}

NormStats load_norm_stats(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open file");
  try {
    const auto j = nlohmann::json::parse(in);
    NormStats s{j.at("channels").get<std::vector<std::string>>(), j.at("mean").get<std::vector<double>>(),
                j.at("std").get<std::vector<double>>()};
    if (s.channels.size() != s.mean.size() || s.mean.size() != s.std.size())
      throw DataError(path.string() + ": inconsistent normalization stats");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::vector<Batch> make_batches(const TimeSeries& series, std::size_t w) {
  if (w == 0) throw ConfigError("make_batches: batch length must be >= 1");
  const std::size_t count = series.length() / w;
  std::vector<Batch> out;
  out.reserve(count);
  for (std::size_t i = 1; i <= count; ++i) {
    const std::size_t j = w * (i - 1) + 1;
    out.push_back(Batch{i, j, series.values().slice_rows(j - 1, w)});
  }
  return out;
}

}  // namespace ghlfd
