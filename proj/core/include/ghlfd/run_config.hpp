#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "ghlfd/pipeline.hpp"
#include "ghlfd/plant.hpp"

namespace ghlfd {

// Simulation campaign: one normal trace plus `attack_count` attack traces.
struct CampaignConfig {
  double normal_horizon = 200000.0;
  double attack_horizon = 60000.0;
  AttackKind attack_kind = AttackKind::MaxRtLevel;
  std::size_t attack_count = 10;
  std::optional<AttackRange> range;  // unset: default_attack_range()
};

// Everything a run needs. Text form is `key = value` lines; plant
// parameters use a `plant.` prefix.
struct RunConfig {
  std::uint64_t seed = 1;
  PlantParams plant;
  CampaignConfig campaign;
  PipelineConfig pipeline;
  std::optional<double> threshold;  // operator override of the fitted one

  // Pushes seed into the pieces that consume it and validates.
  void finalize();
};

void set_config_value(RunConfig& config, const std::string& key, const std::string& value);
// `source` prefixes error messages (file name or "flag").
void apply_config_text(RunConfig& config, const std::string& text, const std::string& source);
void apply_config_file(RunConfig& config, const std::filesystem::path& path);
std::string to_config_text(const RunConfig& config);

AttackRange effective_range(const RunConfig& config);
// Seeds of the generated traces, derived from the run seed.
std::uint64_t normal_trace_seed(const RunConfig& config);
std::uint64_t attack_trace_seed(const RunConfig& config, std::size_t index);

}  // namespace ghlfd
