#pragma once

#include <Eigen/Core>
#include <vector>

#include "qtrack/associator.hpp"
#include "qtrack/box.hpp"

namespace qtrack::track {

struct LifecycleConfig {
  double tau_n = 0.5;       // confidence floor for staying active
  int persistence = 20;     // T: consecutive inactive frames before removal
  double tau_e = 0.5;       // entry threshold for newborn tracklets
  double ema_weight = 0.7;  // w in the history EMA
  /// Guard rail, off by default: suppress a newborn whose box overlaps an
  /// active tracklet beyond the IoU threshold. The learned interaction is
  /// expected to handle duplicate suppression on its own.
  bool suppress_newborn_overlap = false;
  double newborn_overlap_iou = 0.7;

  void validate() const;
};

enum class TrackState { kActive, kInactive, kRemoved };

/// One tracked object. Removed tracklets stay in the list (excluded from all
/// query sets) so ids are never reused within a sequence.
struct Tracklet {
  int id = 0;  // assigned at birth, strictly increasing
  TrackState state = TrackState::kActive;
  assoc::ObjectQuery query;  // kind = track; last reliable content/box/score
  Eigen::VectorXd history;   // H_q, frozen while inactive
  int miss_count = 0;        // consecutive inactive frames, 0 when active
  int birth_frame = 0;
};

/// Decoder output values for one frame. Row layout: the first n_tracks rows
/// follow the live tracklets in id order, the rest are detection slots.
struct FramePredictions {
  Eigen::MatrixXd content;  // (n_tracks + n_det) x d
  Eigen::MatrixXd boxes;    // (n_tracks + n_det) x 4
  Eigen::VectorXd scores;   // n_tracks + n_det
  Eigen::Index n_tracks = 0;
};

/// One row of per-frame tracker output, ready for the result writer.
struct TrackRecord {
  int frame = 0;
  int id = 0;
  BoundingBox box;
  double score = 0.0;
};

struct LifecycleResult {
  std::vector<Tracklet> tracklets;
  std::vector<TrackRecord> records;  // active tracklets only, id order
};

/// Indices of non-removed tracklets in id order. Every consumer of the
/// "live" set goes through this so prediction rows and query rows agree.
std::vector<int> live_indices(const std::vector<Tracklet>& tracklets);

/// Advances every tracklet one frame:
///   - live tracklet with predicted score >= tau_n -> active, miss_count 0,
///     query refreshed from the decoder row, history advanced by the EMA;
///   - score < tau_n -> inactive, miss_count incremented, everything frozen;
///     reaching `persistence` consecutive misses removes the tracklet;
///   - detection row with score >= tau_e (and not suppressed) -> new
///     tracklet, fresh id, history initialized to its content.
/// Throws std::invalid_argument when prediction rows do not line up with
/// the live tracklet set.
LifecycleResult step_lifecycle(const std::vector<Tracklet>& tracklets,
                               const FramePredictions& predictions,
                               int frame_index, const LifecycleConfig& cfg);

/// Queries of all non-removed tracklets in id order; inactive tracklets
/// carry their last active content and box.
std::vector<assoc::ObjectQuery> propagate_queries(
    const std::vector<Tracklet>& tracklets);

}  // namespace qtrack::track
