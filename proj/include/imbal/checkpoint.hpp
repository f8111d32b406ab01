#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "imbal/battery_env.hpp"
#include "imbal/nn.hpp"
#include "json.hpp"

namespace imbal {

/// Versioned JSON envelope around a trained network. Doubles are written in
/// shortest round-trip decimal form, so save/load is bit-exact.
struct Checkpoint {
  static constexpr int kFormatVersion = 1;

  int format_version = kFormatVersion;
  std::string agent_kind;  // "dqn", "ddqn" or "student"
  FeedForwardNet net;
  NormStats norm_stats;
  std::uint64_t seed = 0;
  std::uint64_t episodes = 0;
  // Kind-specific settings (return atoms, constraint config, ...).
  nlohmann::json extra = nlohmann::json::object();
};

std::string save_checkpoint(const Checkpoint& ckpt);
Checkpoint load_checkpoint(std::string_view bytes);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace imbal
