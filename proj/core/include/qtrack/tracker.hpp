#pragma once

#include <vector>

#include "qtrack/associator.hpp"
#include "qtrack/detsim.hpp"
#include "qtrack/lifecycle.hpp"

namespace qtrack::track {

/// Full inference output: per-frame records plus the final tracklet list,
/// and (optionally) the interaction attention maps for debugging overlays.
struct TrackerOutputs {
  std::vector<TrackRecord> records;
  std::vector<Tracklet> tracklets;
  std::vector<Eigen::MatrixXd> det_attention;  // per frame, kept x (kept+trk)
  std::vector<Eigen::MatrixXd> trk_attention;  // per frame, trk x (kept+trk)
};

/// Online tracking over a detection stream: one forward pass per frame on a
/// fresh tape, lifecycle update, then query propagation into the next frame.
/// Deterministic given the model parameters and the observations.
TrackerOutputs run_tracker(assoc::AssociatorModel& model,
                           const std::vector<sim::FrameObservation>& frames,
                           const LifecycleConfig& cfg,
                           bool keep_attention = false);

}  // namespace qtrack::track
