#pragma once

#include <vector>

#include "qtrack/detsim.hpp"
#include "qtrack/lifecycle.hpp"

namespace qtrack::baseline {

/// Reference tracker configuration: pure IoU association, no motion model,
/// no appearance. The comparison point for the learned associator.
struct GreedyConfig {
  double iou_gate = 0.3;     // minimum IoU for a track-detection match
  int max_age = 20;          // consecutive misses before a track is dropped
  double spawn_score = 0.5;  // entry threshold for unmatched detections

  void validate() const;
};

/// Frame-by-frame Hungarian matching on IoU between last-frame track boxes
/// and current detections, gated at iou_gate. Matched tracks adopt the
/// detection box and emit a record; unmatched tracks coast silently and age
/// out after max_age misses; unmatched detections at or above spawn_score
/// start new tracks. Deterministic; ids strictly increase in order of birth.
std::vector<track::TrackRecord> greedy_track(
    const std::vector<sim::FrameObservation>& frames, const GreedyConfig& cfg);

}  // namespace qtrack::baseline
