#include "ghlfd/plant.hpp"

#include <algorithm>
#include <array>
#include <cassert>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "ghlfd/errors.hpp"
#include "ghlfd/rng.hpp"

namespace ghlfd {

namespace {

struct DoubleField {
  const char* key;
  double PlantParams::*member;
};

constexpr std::array kDoubleFields{
    DoubleField{"rt_capacity", &PlantParams::rt_capacity},
    DoubleField{"ht_capacity", &PlantParams::ht_capacity},
    DoubleField{"ct_capacity", &PlantParams::ct_capacity},
    DoubleField{"max_rt_level_setpoint", &PlantParams::max_rt_level_setpoint},
    DoubleField{"max_ht_temp_setpoint", &PlantParams::max_ht_temp_setpoint},
    DoubleField{"rt_target_temp", &PlantParams::rt_target_temp},
    DoubleField{"ht_portion", &PlantParams::ht_portion},
    DoubleField{"pump_rate", &PlantParams::pump_rate},
    DoubleField{"fill_rate", &PlantParams::fill_rate},
    DoubleField{"ct_outflow_rate", &PlantParams::ct_outflow_rate},
    DoubleField{"heater_power", &PlantParams::heater_power},
    DoubleField{"reference_volume", &PlantParams::reference_volume},
    DoubleField{"ambient_loss_coeff", &PlantParams::ambient_loss_coeff},
    DoubleField{"ambient_temp", &PlantParams::ambient_temp},
    DoubleField{"relax_time", &PlantParams::relax_time},
    DoubleField{"dt", &PlantParams::dt},
    DoubleField{"ht_temp_envelope_margin", &PlantParams::ht_temp_envelope_margin},
    DoubleField{"damage_temp", &PlantParams::damage_temp},
};

constexpr double kEps = 1e-12;

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("plant params: " + what);
}

// Shortest text that reads back to the same double.
std::string num(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double mix(double temp_a, double vol_a, double temp_b, double vol_b) {
  const double total = vol_a + vol_b;
  if (total <= 0.0) return temp_a;
  return (temp_a * vol_a + temp_b * vol_b) / total;
}

}  // namespace

void PlantParams::validate() const {
  require(rt_capacity > 0 && ht_capacity > 0 && ct_capacity > 0, "capacities must be positive");
  require(pump_rate > 0 && fill_rate > 0 && ct_outflow_rate > 0, "rates must be positive");
  require(heater_power > 0 && reference_volume > 0, "heater_power and reference_volume must be positive");
  require(dt > 0, "dt must be positive");
  require(sample_every >= 1, "sample_every must be >= 1");
  require(ambient_loss_coeff >= 0 && ambient_loss_coeff * dt < 1.0, "ambient_loss_coeff out of range");
  require(relax_time >= 0, "relax_time must be non-negative");
  require(max_rt_level_setpoint > 0 && max_rt_level_setpoint <= rt_capacity,
          "max_rt_level_setpoint must lie in (0, rt_capacity]");
  require(ht_portion > 0 && ht_portion <= ht_capacity, "ht_portion must lie in (0, ht_capacity]");
  require(max_ht_temp_setpoint > ambient_temp, "max_ht_temp_setpoint must exceed ambient_temp");
  require(rt_target_temp > ambient_temp && rt_target_temp < max_ht_temp_setpoint,
          "rt_target_temp must lie between ambient_temp and max_ht_temp_setpoint");
  require(damage_temp > max_ht_temp_setpoint + ht_temp_envelope_margin, "damage_temp below the danger envelope");
  require(ht_temp_envelope_margin >= 0, "ht_temp_envelope_margin must be non-negative");
}

void apply_plant_overrides(PlantParams& params, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("plant config line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    double v = 0.0;
    const auto res = std::from_chars(val.data(), val.data() + val.size(), v);
    if (res.ec != std::errc() || res.ptr != val.data() + val.size()) {
      throw ConfigError("plant config line " + std::to_string(line_no) + ": bad number \"" + val + "\"");
    }
    if (key == "sample_every") {
      if (v < 1 || v != std::floor(v)) throw ConfigError("plant config: sample_every must be a positive integer");
      params.sample_every = static_cast<std::size_t>(v);
      continue;
    }
    const auto it = std::find_if(kDoubleFields.begin(), kDoubleFields.end(),
                                 [&](const DoubleField& f) { return key == f.key; });
    if (it == kDoubleFields.end()) {
      throw ConfigError("plant config line " + std::to_string(line_no) + ": unknown key \"" + key + "\"");
    }
    params.*(it->member) = v;
  }
}

PlantParams load_plant_params(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open file");
  std::stringstream buf;
  buf << in.rdbuf();
  PlantParams p;
  apply_plant_overrides(p, buf.str());
  p.validate();
  return p;
}

std::string to_config_text(const PlantParams& params) {
  std::ostringstream out;
  for (const auto& f : kDoubleFields) out << f.key << " = " << num(params.*(f.member)) << '\n';
  out << "sample_every = " << params.sample_every << '\n';
  return out.str();
}

const char* to_string(Phase phase) {
  switch (phase) {
    case Phase::Filling: return "Filling";
    case Phase::PumpToHT: return "PumpToHT";
    case Phase::Heating: return "Heating";
    case Phase::PumpToRT: return "PumpToRT";
    case Phase::Relaxing: return "Relaxing";
    case Phase::DrainToCT: return "DrainToCT";
  }
  return "?";
}

const char* to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::MaxRtLevel: return "max-rt-level";
    case AttackKind::MaxHtTemp: return "max-ht-temp";
    case AttackKind::PumpFreq: return "pump-freq";
    case AttackKind::RelaxTime: return "relax-time";
  }
  return "?";
}

AttackKind parse_attack_kind(const std::string& name) {
  for (auto k : {AttackKind::MaxRtLevel, AttackKind::MaxHtTemp, AttackKind::PumpFreq, AttackKind::RelaxTime}) {
    if (name == to_string(k)) return k;
  }
  throw ConfigError("unknown attack kind \"" + name + "\"");
}

PlantState initial_state(const PlantParams& params) {
  PlantState s;
  s.rt_temp = params.ambient_temp;
  s.ht_temp = params.ambient_temp;
  return s;
}

double targeted_value(const PlantParams& params, AttackKind kind) {
  switch (kind) {
    case AttackKind::MaxRtLevel: return params.max_rt_level_setpoint;
    case AttackKind::MaxHtTemp: return params.max_ht_temp_setpoint;
    case AttackKind::PumpFreq: return params.pump_rate;
    case AttackKind::RelaxTime: return params.relax_time;
  }
  return 0.0;
}

PlantParams effective_params(const PlantParams& params, const std::optional<AttackSpec>& attack, double t) {
  if (!attack || t < attack->start_time) return params;
  PlantParams p = params;
  switch (attack->kind) {
    case AttackKind::MaxRtLevel: p.max_rt_level_setpoint = attack->hacked_value; break;
    case AttackKind::MaxHtTemp: p.max_ht_temp_setpoint = attack->hacked_value; break;
    case AttackKind::PumpFreq: p.pump_rate = attack->hacked_value; break;
    case AttackKind::RelaxTime: p.relax_time = attack->hacked_value; break;
  }
  return p;
}

PlantState step(const PlantState& state, const PlantParams& nominal, const std::optional<AttackSpec>& attack,
                double t, double fill_scale) {
  const PlantParams p = effective_params(nominal, attack, t);
  const double dt = p.dt;
  PlantState s = state;

  // Dynamics of the current phase.
  switch (s.phase) {
    case Phase::Filling: {
      // The valve shuts exactly at the set point; a set point above
      // capacity spills the excess.
      const double target = std::min(p.max_rt_level_setpoint, p.rt_capacity);
      const double inflow = std::max(0.0, std::min(p.fill_rate * fill_scale * dt, target - s.rt_level));
      s.rt_temp = mix(s.rt_temp, s.rt_level, p.ambient_temp, inflow);
      s.rt_level += inflow;
      break;
    }
    case Phase::PumpToHT: {
      const double room = std::min(p.ht_portion, p.ht_capacity) - s.ht_level;
      const double q = std::max(0.0, std::min({p.pump_rate * dt, s.rt_level, room}));
      s.ht_temp = mix(s.ht_temp, s.ht_level, s.rt_temp, q);
      s.ht_level += q;
      s.rt_level -= q;
      break;
    }
    case Phase::Heating:
      if (s.ht_level > kEps) s.ht_temp += p.heater_power * (p.reference_volume / s.ht_level) * dt;
      break;
    case Phase::PumpToRT: {
      const double q = std::max(0.0, std::min({p.pump_rate * dt, s.ht_level, p.rt_capacity - s.rt_level}));
      s.rt_temp = mix(s.rt_temp, s.rt_level, s.ht_temp, q);
      s.rt_level += q;
      s.ht_level -= q;
      break;
    }
    case Phase::Relaxing:
      break;
    case Phase::DrainToCT: {
      const double q = std::max(0.0, std::min({p.pump_rate * dt, s.rt_level, p.ct_capacity - s.ct_level}));
      s.rt_level -= q;
      s.ct_level += q;
      break;
    }
  }
  // The collector tank discharges downstream except while liquid moves
  // between tanks.
  if (s.phase == Phase::Filling || s.phase == Phase::Heating || s.phase == Phase::Relaxing) {
    s.ct_level -= std::min(s.ct_level, p.ct_outflow_rate * dt);
  }

  // Heat loss to ambient (explicit Euler, stays above ambient since k*dt < 1).
  const double decay = p.ambient_loss_coeff * dt;
  s.rt_temp -= decay * (s.rt_temp - p.ambient_temp);
  s.ht_temp -= decay * (s.ht_temp - p.ambient_temp);
  s.phase_timer += dt;

  // Phase transitions on the updated state.
  const Phase before = s.phase;
  switch (s.phase) {
    case Phase::Filling:
      if (s.rt_level >= p.max_rt_level_setpoint - kEps) s.phase = Phase::PumpToHT;
      break;
    case Phase::PumpToHT:
      if (s.ht_level >= std::min(p.ht_portion, p.ht_capacity) - kEps || s.rt_level <= kEps) {
        s.phase = s.ht_level > kEps ? Phase::Heating : Phase::DrainToCT;
      }
      break;
    case Phase::Heating:
      if (s.ht_temp >= p.max_ht_temp_setpoint) s.phase = Phase::PumpToRT;
      break;
    case Phase::PumpToRT:
      if (s.ht_level <= kEps) s.phase = Phase::Relaxing;
      break;
    case Phase::Relaxing:
      if (s.phase_timer >= p.relax_time - kEps) {
        s.phase = s.rt_temp >= p.rt_target_temp ? Phase::DrainToCT : Phase::PumpToHT;
      }
      break;
    case Phase::DrainToCT:
      if (s.rt_level <= kEps) s.phase = Phase::Filling;
      break;
  }
  if (s.phase != before) s.phase_timer = 0.0;
  s.inj_valve_act = s.phase == Phase::Filling ? 1 : 0;
  s.heater_act = s.phase == Phase::Heating ? 1 : 0;

  // Clamp float dust; the transfer bounds above keep real violations out.
  s.rt_level = std::clamp(s.rt_level, 0.0, p.rt_capacity);
  s.ht_level = std::clamp(s.ht_level, 0.0, p.ht_capacity);
  s.ct_level = std::clamp(s.ct_level, 0.0, p.ct_capacity);
  s.rt_temp = std::max(s.rt_temp, p.ambient_temp);
  s.ht_temp = std::max(s.ht_temp, p.ambient_temp);
  assert(std::isfinite(s.rt_temp) && std::isfinite(s.ht_temp));
  return s;
}

TimeSeries LabeledTrace::to_csv_series() const {
  const std::size_t n = series.length();
  const std::size_t m = series.width();
  std::vector<std::string> names;
  names.emplace_back(kTimeChannel);
  names.insert(names.end(), series.channel_names().begin(), series.channel_names().end());
  names.emplace_back(kAttackChannel);
  names.emplace_back(kDangerChannel);
  names.emplace_back(kFaultChannel);
  Matrix v(n, m + 4);
  for (std::size_t t = 0; t < n; ++t) {
    v(t, 0) = time[t];
    for (std::size_t c = 0; c < m; ++c) v(t, c + 1) = series.values()(t, c);
    v(t, m + 1) = attack[t];
    v(t, m + 2) = danger[t];
    v(t, m + 3) = fault[t];
  }
  return TimeSeries(std::move(names), std::move(v), series.dt());
}

LabeledTrace LabeledTrace::from_csv_series(const TimeSeries& s, std::span<const std::string> channels) {
  LabeledTrace out;
  out.series = s.select(channels);
  const std::size_t n = s.length();
  auto labels = [&](const char* name) {
    std::vector<std::uint8_t> v(n, 0);
    if (const auto idx = s.find_channel(name)) {
      for (std::size_t t = 0; t < n; ++t) v[t] = s.values()(t, *idx) > 0.5 ? 1 : 0;
    }
    return v;
  };
  out.attack = labels(kAttackChannel);
  out.danger = labels(kDangerChannel);
  out.fault = labels(kFaultChannel);
  if (const auto idx = s.find_channel(kTimeChannel)) {
    out.time = s.column(kTimeChannel);
  } else {
    out.time.resize(n);
    for (std::size_t t = 0; t < n; ++t) out.time[t] = static_cast<double>(t) * s.dt();
  }
  return out;
}

namespace {

// Runs the nominal plant from `initial_state` until it is back at Filling
// after its first drain.
CycleInfo run_first_cycle(const PlantParams& params, PlantState* final_state) {
  PlantState s = initial_state(params);
  CycleInfo info;
  bool drained = false;
  double t = 0.0;
  // Generous step bound: every round is finite, so a stuck plant shows up
  // as too many rounds before the bound is hit.
  const long max_steps = 100'000'000;
  for (long k = 0; k < max_steps; ++k) {
    const PlantState next = step(s, params, std::nullopt, t);
    t += params.dt;
    if (s.phase != Phase::Heating && next.phase == Phase::Heating) ++info.heating_rounds;
    if (next.phase == Phase::DrainToCT) drained = true;
    if (drained && next.phase == Phase::Filling) {
      info.duration = t;
      if (final_state) *final_state = next;
      return info;
    }
    if (info.heating_rounds > kMaxHeatingRounds) break;
    s = next;
  }
  throw ConfigError("plant params: nominal cycle does not complete within " + std::to_string(kMaxHeatingRounds) +
                    " heating rounds");
}

}  // namespace

CycleInfo nominal_cycle(const PlantParams& params) {
  params.validate();
  return run_first_cycle(params, nullptr);
}

PlantState warm_state(const PlantParams& params) {
  params.validate();
  PlantState s;
  run_first_cycle(params, &s);
  s.phase_timer = 0.0;
  return s;
}

namespace {

// Smooth bounded multiplier 1 + 0.02 * p(t) with |p| <= 1: a sum of three
// slow sinusoids with seeded periods, phases and weights.
class FillPerturbation {
 public:
  explicit FillPerturbation(std::uint64_t seed) {
    auto gen = make_stream(seed, "sim");
    double total = 0.0;
    for (auto& c : comps_) {
      c.period = 2.0e4 + 8.0e4 * uniform01(gen);
      c.phase = 2.0 * std::numbers::pi * uniform01(gen);
      c.weight = 0.2 + uniform01(gen);
      total += c.weight;
    }
    for (auto& c : comps_) c.weight /= total;
  }

  double operator()(double t) const {
    double p = 0.0;
    for (const auto& c : comps_) p += c.weight * std::sin(2.0 * std::numbers::pi * t / c.period + c.phase);
    return 1.0 + kAmplitude * p;
  }

  static constexpr double kAmplitude = 0.02;

 private:
  struct Component {
    double period, phase, weight;
  };
  std::array<Component, 3> comps_{};
};

bool outside_envelope(const PlantState& s, const PlantParams& nominal) {
  return s.rt_level > nominal.max_rt_level_setpoint + 1e-9 ||
         s.ht_temp > nominal.max_ht_temp_setpoint + nominal.ht_temp_envelope_margin;
}

bool hard_limit(const PlantState& s, const PlantParams& p) {
  return s.rt_level >= p.rt_capacity || s.ht_level >= p.ht_capacity || s.ct_level >= p.ct_capacity ||
         s.ht_temp >= p.damage_temp;
}

}  // namespace

LabeledTrace simulate(const PlantParams& params, double horizon, const std::optional<AttackSpec>& attack,
                      std::uint64_t seed) {
  params.validate();
  const CycleInfo cycle = nominal_cycle(params);
  if (horizon < cycle.duration) {
    throw ConfigError("simulate: horizon " + std::to_string(horizon) + " s is shorter than one plant cycle (" +
                      std::to_string(cycle.duration) + " s)");
  }
  if (attack) {
    if (attack->start_time < 0 || attack->start_time >= horizon)
      throw ConfigError("simulate: attack start_time outside the simulation horizon");
    if (attack->hacked_value == targeted_value(params, attack->kind))
      throw ConfigError("simulate: hacked_value equals the nominal parameter value");
    if (!(attack->hacked_value > 0)) throw ConfigError("simulate: hacked_value must be positive");
  }

  const FillPerturbation perturb(seed);
  const auto steps = static_cast<std::size_t>(std::floor(horizon / params.dt + 1e-9));
  const std::size_t rows = (steps + params.sample_every - 1) / params.sample_every;

  LabeledTrace trace;
  Matrix values(rows, 6);
  trace.time.reserve(rows);
  trace.attack.reserve(rows);
  trace.danger.reserve(rows);
  trace.fault.reserve(rows);

  PlantState s = warm_state(params);
  bool danger = false;
  bool fault = false;
  std::size_t row = 0;
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * params.dt;
    const bool attacked = attack && t >= attack->start_time;
    if (attacked) {
      fault = fault || hard_limit(s, params);
      danger = danger || fault || outside_envelope(s, params);
    }
    if (k % params.sample_every == 0) {
      auto r = values.row(row++);
      r[0] = s.rt_level;
      r[1] = s.rt_temp;
      r[2] = s.ht_level;
      r[3] = s.ht_temp;
      r[4] = s.inj_valve_act;
      r[5] = s.heater_act;
      trace.time.push_back(t);
      trace.attack.push_back(attacked ? 1 : 0);
      trace.danger.push_back(danger ? 1 : 0);
      trace.fault.push_back(fault ? 1 : 0);
    }
    s = step(s, params, attack, t, perturb(t));
  }
  trace.series = TimeSeries(default_channels(), std::move(values), params.dt * static_cast<double>(params.sample_every));
  return trace;
}

AttackRange default_attack_range(const PlantParams& params, AttackKind kind) {
  AttackRange r;
  switch (kind) {
    case AttackKind::MaxRtLevel:
      r.value_lo = params.max_rt_level_setpoint + 8.0;
      r.value_hi = params.rt_capacity + 5.0;
      break;
    case AttackKind::MaxHtTemp:
      r.value_lo = params.max_ht_temp_setpoint + 10.0;
      r.value_hi = params.damage_temp + 10.0;
      break;
    case AttackKind::PumpFreq:
      r.value_lo = params.pump_rate * 0.2;
      r.value_hi = params.pump_rate * 0.5;
      break;
    case AttackKind::RelaxTime:
      r.value_lo = params.relax_time * 5.0;
      r.value_hi = params.relax_time * 20.0;
      break;
  }
  return r;
}

std::vector<AttackSpec> random_attacks(AttackKind kind, const AttackRange& range, std::size_t count, double horizon,
                                       std::uint64_t seed) {
  if (!(range.start_lo >= 0.0 && range.start_lo <= range.start_hi && range.start_hi < 1.0))
    throw ConfigError("attack start range must satisfy 0 <= lo <= hi < 1");
  if (!(range.value_lo > 0.0 && range.value_lo <= range.value_hi))
    throw ConfigError("attack value range must satisfy 0 < lo <= hi");
  auto gen = make_stream(seed, "attacks");
  std::vector<AttackSpec> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    AttackSpec a;
    a.kind = kind;
    a.start_time = horizon * (range.start_lo + (range.start_hi - range.start_lo) * uniform01(gen));
    a.hacked_value = range.value_lo + (range.value_hi - range.value_lo) * uniform01(gen);
    out.push_back(a);
  }
  return out;
}

}  // namespace ghlfd
