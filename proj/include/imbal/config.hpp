#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "imbal/agents.hpp"
#include "imbal/battery_env.hpp"
#include "imbal/market_data.hpp"
#include "imbal/policy_correction.hpp"
#include "json.hpp"

namespace imbal {

struct EvalConfig {
  double initial_soc = 0.5;
  // Carry the final SoC of each backtest day into the next instead of resetting.
  bool carry_soc = false;
  double histogram_bin_width = 50.0;  // EUR/MWh
};

struct PathsConfig {
  std::string prices = "prices.csv";
  std::string out_dir = "out";
  std::string teacher = "teacher.ckpt";
  std::string student = "student.ckpt";
};

/// Everything a pipeline run needs. Missing keys in a config file keep
/// their defaults; unknown keys are rejected.
struct RunConfig {
  std::uint64_t seed = 0;
  AgentKind agent = AgentKind::kDdqn;
  BatteryParams battery;
  TrainConfig train;
  ConstraintConfig constraints;
  DistillConfig distill;
  GridSpec probe_grid;
  GridSpec heatmap_grid;
  SynthConfig synth;
  EvalConfig eval;
  PathsConfig paths;

  void validate() const;
};

void to_json(nlohmann::json& j, const BatteryParams& v);
void from_json(const nlohmann::json& j, BatteryParams& v);
void to_json(nlohmann::json& j, const AtomGrid& v);
void from_json(const nlohmann::json& j, AtomGrid& v);
void to_json(nlohmann::json& j, const TrainConfig& v);
void from_json(const nlohmann::json& j, TrainConfig& v);
void to_json(nlohmann::json& j, const ConstraintConfig& v);
void from_json(const nlohmann::json& j, ConstraintConfig& v);
void to_json(nlohmann::json& j, const DistillConfig& v);
void from_json(const nlohmann::json& j, DistillConfig& v);
void to_json(nlohmann::json& j, const CalendarContext& v);
void from_json(const nlohmann::json& j, CalendarContext& v);
void to_json(nlohmann::json& j, const GridSpec& v);
void from_json(const nlohmann::json& j, GridSpec& v);
void to_json(nlohmann::json& j, const SynthConfig& v);
void from_json(const nlohmann::json& j, SynthConfig& v);
void to_json(nlohmann::json& j, const EvalConfig& v);
void from_json(const nlohmann::json& j, EvalConfig& v);
void to_json(nlohmann::json& j, const PathsConfig& v);
void from_json(const nlohmann::json& j, PathsConfig& v);
void to_json(nlohmann::json& j, const RunConfig& v);
void from_json(const nlohmann::json& j, RunConfig& v);

std::string dump_config(const RunConfig& config);
RunConfig parse_config(std::string_view text);
RunConfig read_config(const std::filesystem::path& path);

}  // namespace imbal
