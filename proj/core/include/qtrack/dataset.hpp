#pragma once

#include <string>
#include <vector>

#include "qtrack/config_io.hpp"
#include "qtrack/detsim.hpp"

namespace qtrack::io {

/// A dataset directory on disk:
///   config.json  -- the resolved RunConfig that produced it
///   gt.txt       -- visible ground truth, MOT CSV (ids = identities)
///   det.txt      -- detections, MOT CSV (ids = 1-based per-frame ordinals,
///                   conf = detector score)
///   sidecar.json -- what MOT files cannot carry: per-detection content
///                   vectors plus the per-frame feature/position grids
/// Real detection dumps can replace det.txt as long as the sidecar rows
/// stay aligned; the loader cross-checks the counts.
struct Dataset {
  RunConfig config;
  sim::GroundTruthSequence gt;  // reconstructed; every row visible
  std::vector<sim::FrameObservation> observations;
};

void write_dataset(const std::string& dir, const RunConfig& cfg,
                   const sim::GroundTruthSequence& gt,
                   const std::vector<sim::FrameObservation>& observations);

Dataset load_dataset(const std::string& dir);

}  // namespace qtrack::io
