#pragma once

#include <cstdint>
#include <string>

#include "qtrack/associator.hpp"
#include "qtrack/baseline.hpp"
#include "qtrack/detsim.hpp"
#include "qtrack/lifecycle.hpp"
#include "qtrack/training.hpp"

namespace qtrack::io {

/// Everything a run needs, in one human-readable structured file with a
/// schema version. Round-trips losslessly; unknown keys are hard errors so
/// typos cannot silently fall back to defaults.
struct RunConfig {
  int schema_version = 1;
  std::uint64_t seed = 0;
  double image_w = 1000.0;  // pixel frame the MOT files are expressed in
  double image_h = 1000.0;
  assoc::AssociatorConfig associator;
  track::LifecycleConfig lifecycle;
  train::TrainConfig train;
  sim::SceneConfig scene;
  sim::NoiseConfig noise;
  baseline::GreedyConfig greedy;
  // Paths; commands treat flags as overrides of these.
  std::string data_dir;
  std::string checkpoint;
  std::string results;
  std::string out_dir;
};

/// Text form with a stable field order, so identical configs produce
/// identical bytes.
std::string format_run_config(const RunConfig& cfg);
/// Inverse of format_run_config. Missing keys keep their defaults; unknown
/// keys, bad types, and bad enum names throw std::runtime_error.
RunConfig parse_run_config(const std::string& text);

RunConfig load_run_config(const std::string& path);
void save_run_config(const RunConfig& cfg, const std::string& path);

}  // namespace qtrack::io
