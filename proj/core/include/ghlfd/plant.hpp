#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ghlfd/timeseries.hpp"

namespace ghlfd {

// Gasoil heating loop: receiving tank (RT) is filled from an unlimited
// source, heated in portions by cycling liquid through the heating tank (HT)
// until it reaches the target temperature, then drained into the collector
// tank (CT). Volumes are in abstract volume units, temperatures in deg C,
// time in seconds.
struct PlantParams {
  double rt_capacity = 100.0;
  double ht_capacity = 30.0;
  double ct_capacity = 200.0;
  double max_rt_level_setpoint = 80.0;
  double max_ht_temp_setpoint = 60.0;
  double rt_target_temp = 58.0;  // RT is drained once it is at least this warm
  double ht_portion = 20.0;      // volume moved into HT per heating round
  double pump_rate = 0.1;
  double fill_rate = 0.05;
  double ct_outflow_rate = 0.05;
  double heater_power = 0.1;      // deg C / s at reference_volume
  double reference_volume = 20.0;
  double ambient_loss_coeff = 2e-6;
  double ambient_temp = 20.0;
  double relax_time = 300.0;
  double dt = 1.0;
  std::size_t sample_every = 1;  // emit every k-th simulated step
  double ht_temp_envelope_margin = 2.0;  // allowed heater overshoot before DANGER
  double damage_temp = 100.0;

  // Throws ConfigError on the first violated constraint.
  void validate() const;
};

PlantParams load_plant_params(const std::filesystem::path& path);
// Overrides fields of `params` from "key=value" lines; '#' starts a comment.
void apply_plant_overrides(PlantParams& params, const std::string& text);
std::string to_config_text(const PlantParams& params);

enum class Phase { Filling, PumpToHT, Heating, PumpToRT, Relaxing, DrainToCT };
const char* to_string(Phase phase);

struct PlantState {
  double rt_level = 0.0;
  double ht_level = 0.0;
  double ct_level = 0.0;
  double rt_temp = 20.0;
  double ht_temp = 20.0;
  Phase phase = Phase::Filling;
  double phase_timer = 0.0;
  int inj_valve_act = 1;
  int heater_act = 0;

  double total_volume() const { return rt_level + ht_level + ct_level; }
};

// Empty tanks at ambient temperature, filling.
PlantState initial_state(const PlantParams& params);

enum class AttackKind { MaxRtLevel, MaxHtTemp, PumpFreq, RelaxTime };
const char* to_string(AttackKind kind);
AttackKind parse_attack_kind(const std::string& name);

struct AttackSpec {
  AttackKind kind = AttackKind::MaxRtLevel;
  double start_time = 0.0;
  double hacked_value = 0.0;
};

// Nominal value of the parameter an attack of `kind` overwrites.
double targeted_value(const PlantParams& params, AttackKind kind);

// Parameters in force at time t: nominal ones with the attacked field
// replaced once t >= start_time.
PlantParams effective_params(const PlantParams& params, const std::optional<AttackSpec>& attack, double t);

// Advances the plant by one dt starting from time t. `fill_scale` multiplies
// the source inflow (1 + seeded perturbation).
PlantState step(const PlantState& state, const PlantParams& params, const std::optional<AttackSpec>& attack,
                double t, double fill_scale = 1.0);

struct LabeledTrace {
  TimeSeries series;  // the six process channels
  std::vector<double> time;
  std::vector<std::uint8_t> attack;
  std::vector<std::uint8_t> danger;
  std::vector<std::uint8_t> fault;

  // Time + process channels + ATTACK/DANGER/FAULT, the on-disk layout.
  TimeSeries to_csv_series() const;
  static LabeledTrace from_csv_series(const TimeSeries& series, std::span<const std::string> channels);
};

// Bound on heating rounds within one fill/drain cycle; a nominal plant that
// does not reach rt_target_temp within it is misconfigured.
inline constexpr int kMaxHeatingRounds = 60;

struct CycleInfo {
  double duration = 0.0;  // seconds from empty RT back to Filling
  int heating_rounds = 0;
};

// Runs one noiseless nominal cycle. Throws ConfigError if it does not finish.
CycleInfo nominal_cycle(const PlantParams& params);

// State at the start of the second nominal cycle: RT empty and filling, HT
// holding the warmth of the previous cycle. Traces start here.
PlantState warm_state(const PlantParams& params);

// Simulates [0, horizon) from warm_state(). Labels latch: ATTACK from start_time, DANGER from
// the first envelope crossing, FAULT from the first overflow or damage
// temperature. The seed drives a smooth fill-rate perturbation of at most 2%.
LabeledTrace simulate(const PlantParams& params, double horizon, const std::optional<AttackSpec>& attack,
                      std::uint64_t seed);

// Randomized attack campaign: start time uniform in
// [start_lo, start_hi] * horizon, hacked value uniform in [value_lo, value_hi].
struct AttackRange {
  double start_lo = 0.4, start_hi = 0.6;
  double value_lo = 0.0, value_hi = 0.0;
};
// Default ranges. Level and temperature attacks leave the operating envelope;
// pump and relax-time attacks only slow the process and usually raise no DANGER.
AttackRange default_attack_range(const PlantParams& params, AttackKind kind);
std::vector<AttackSpec> random_attacks(AttackKind kind, const AttackRange& range, std::size_t count, double horizon,
                                       std::uint64_t seed);

}  // namespace ghlfd
