#include "ghlfd/run_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "ghlfd/errors.hpp"

namespace ghlfd {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Shortest text that reads back to the same double.
std::string num(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double to_double(const std::string& key, const std::string& value) {
  double v = 0.0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size())
    throw ConfigError(key + ": bad number \"" + value + "\"");
  return v;
}

std::uint64_t to_uint(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size())
    throw ConfigError(key + ": expected a non-negative integer, got \"" + value + "\"");
  return v;
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream in(value);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// First range key copies the defaults of the current attack kind.
AttackRange& range_of(RunConfig& c) {
  if (!c.campaign.range) c.campaign.range = default_attack_range(c.plant, c.campaign.attack_kind);
  return *c.campaign.range;
}

}  // namespace

void RunConfig::finalize() {
  pipeline.train.seed = seed;
  plant.validate();
  pipeline.validate();
  if (!(campaign.normal_horizon > 0.0) || !(campaign.attack_horizon > 0.0))
    throw ConfigError("horizons must be positive");
  if (threshold && !(*threshold >= 0.0)) throw ConfigError("threshold must be >= 0");
}

void set_config_value(RunConfig& c, const std::string& key, const std::string& value) {
  auto& p = c.pipeline;
  auto& t = c.pipeline.train;
  if (key.rfind("plant.", 0) == 0) {
    apply_plant_overrides(c.plant, key.substr(6) + " = " + value);
  } else if (key == "seed") {
    c.seed = to_uint(key, value);
  } else if (key == "threshold") {
    if (value.empty() || value == "fitted") c.threshold.reset();
    else c.threshold = to_double(key, value);
  } else if (key == "channels") {
    p.channels = split_list(value);
  } else if (key == "w") {
    p.w = to_uint(key, value);
  } else if (key == "hidden1") {
    p.hidden1 = to_uint(key, value);
  } else if (key == "hidden2") {
    p.hidden2 = to_uint(key, value);
  } else if (key == "quantile") {
    p.quantile_q = to_double(key, value);
  } else if (key == "halflife") {
    p.halflife = to_double(key, value);
  } else if (key == "burn_in") {
    p.burn_in_batches = to_uint(key, value);
  } else if (key == "holdout_fraction") {
    p.holdout_fraction = to_double(key, value);
  } else if (key == "interval") {
    p.interval_length = to_uint(key, value);
  } else if (key == "sweep_points") {
    p.sweep_points = to_uint(key, value);
  } else if (key == "pca_variance") {
    p.pca_variance = to_double(key, value);
  } else if (key == "dropout") {
    t.dropout_p = to_double(key, value);
  } else if (key == "epochs") {
    t.epochs = static_cast<int>(to_uint(key, value));
  } else if (key == "learning_rate") {
    t.learning_rate = to_double(key, value);
  } else if (key == "rmsprop_decay") {
    t.rmsprop_decay = to_double(key, value);
  } else if (key == "rmsprop_epsilon") {
    t.rmsprop_epsilon = to_double(key, value);
  } else if (key == "tbptt") {
    t.tbptt_length = to_uint(key, value);
  } else if (key == "clip_norm") {
    t.gradient_clip_norm = to_double(key, value);
  } else if (key == "early_stop_delta") {
    t.early_stop_delta = to_double(key, value);
  } else if (key == "early_stop_patience") {
    t.early_stop_patience = static_cast<int>(to_uint(key, value));
  } else if (key == "normal_horizon") {
    c.campaign.normal_horizon = to_double(key, value);
  } else if (key == "attack_horizon") {
    c.campaign.attack_horizon = to_double(key, value);
  } else if (key == "attack_kind") {
    c.campaign.attack_kind = parse_attack_kind(value);
  } else if (key == "attack_count") {
    c.campaign.attack_count = to_uint(key, value);
  } else if (key == "attack_start_lo") {
    range_of(c).start_lo = to_double(key, value);
  } else if (key == "attack_start_hi") {
    range_of(c).start_hi = to_double(key, value);
  } else if (key == "attack_value_lo") {
    range_of(c).value_lo = to_double(key, value);
  } else if (key == "attack_value_hi") {
    range_of(c).value_hi = to_double(key, value);
  } else {
    throw ConfigError("unknown config key \"" + key + "\"");
  }
}

void apply_config_text(RunConfig& c, const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(line_no) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    try {
      set_config_value(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
}

void apply_config_file(RunConfig& c, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  std::stringstream buf;
  buf << in.rdbuf();
  apply_config_text(c, buf.str(), path.string());
}

std::string to_config_text(const RunConfig& c) {
  const auto& p = c.pipeline;
  const auto& t = c.pipeline.train;
  const AttackRange r = effective_range(c);
  std::ostringstream out;
  out << "seed = " << c.seed << '\n';
  out << "threshold = ";
  if (c.threshold) out << num(*c.threshold);
  else out << "fitted";
  out << '\n';
  out << "channels = ";
  for (std::size_t i = 0; i < p.channels.size(); ++i) out << (i ? "," : "") << p.channels[i];
  out << '\n';
  out << "w = " << p.w << '\n'
      << "hidden1 = " << p.hidden1 << '\n'
      << "hidden2 = " << p.hidden2 << '\n'
      << "quantile = " << num(p.quantile_q) << '\n'
      << "halflife = " << num(p.halflife) << '\n'
      << "burn_in = " << p.burn_in_batches << '\n'
      << "holdout_fraction = " << num(p.holdout_fraction) << '\n'
      << "interval = " << p.interval_length << '\n'
      << "sweep_points = " << p.sweep_points << '\n'
      << "pca_variance = " << num(p.pca_variance) << '\n'
      << "dropout = " << num(t.dropout_p) << '\n'
      << "epochs = " << t.epochs << '\n'
      << "learning_rate = " << num(t.learning_rate) << '\n'
      << "rmsprop_decay = " << num(t.rmsprop_decay) << '\n'
      << "rmsprop_epsilon = " << num(t.rmsprop_epsilon) << '\n'
      << "tbptt = " << t.tbptt_length << '\n'
      << "clip_norm = " << num(t.gradient_clip_norm) << '\n'
      << "early_stop_delta = " << num(t.early_stop_delta) << '\n'
      << "early_stop_patience = " << t.early_stop_patience << '\n'
      << "normal_horizon = " << num(c.campaign.normal_horizon) << '\n'
      << "attack_horizon = " << num(c.campaign.attack_horizon) << '\n'
      << "attack_kind = " << to_string(c.campaign.attack_kind) << '\n'
      << "attack_count = " << c.campaign.attack_count << '\n'
      << "attack_start_lo = " << num(r.start_lo) << '\n'
      << "attack_start_hi = " << num(r.start_hi) << '\n'
      << "attack_value_lo = " << num(r.value_lo) << '\n'
      << "attack_value_hi = " << num(r.value_hi) << '\n';
  std::istringstream plant(to_config_text(c.plant));
  std::string line;
  while (std::getline(plant, line)) out << "plant." << line << '\n';
  return out.str();
}

AttackRange effective_range(const RunConfig& c) {
  return c.campaign.range ? *c.campaign.range : default_attack_range(c.plant, c.campaign.attack_kind);
}

std::uint64_t normal_trace_seed(const RunConfig& c) { return c.seed; }

std::uint64_t attack_trace_seed(const RunConfig& c, std::size_t index) { return c.seed + 1 + index; }

}  // namespace ghlfd
