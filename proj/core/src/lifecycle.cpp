#include "qtrack/lifecycle.hpp"

#include <algorithm>
#include <stdexcept>

namespace qtrack::track {

namespace {

BoundingBox box_from_row(const Eigen::MatrixXd& m, Eigen::Index r) {
  return BoundingBox{m(r, 0), m(r, 1), m(r, 2), m(r, 3)};
}

bool overlaps_active(const std::vector<Tracklet>& tracklets,
                     const BoundingBox& candidate, double threshold) {
  for (const Tracklet& t : tracklets)
    if (t.state == TrackState::kActive &&
        iou(t.query.box, candidate) > threshold)
      return true;
  return false;
}

}  // namespace

void LifecycleConfig::validate() const {
  if (!(tau_n > 0.0 && tau_n < 1.0))
    throw std::invalid_argument("tau_n must lie in (0, 1)");
  if (persistence < 1)
    throw std::invalid_argument("persistence must be at least 1");
  if (!(tau_e > 0.0 && tau_e < 1.0))
    throw std::invalid_argument("tau_e must lie in (0, 1)");
  if (!(ema_weight > 0.0 && ema_weight <= 1.0))
    throw std::invalid_argument("ema_weight must lie in (0, 1]");
}

std::vector<int> live_indices(const std::vector<Tracklet>& tracklets) {
  std::vector<int> live;
  for (size_t i = 0; i < tracklets.size(); ++i)
    if (tracklets[i].state != TrackState::kRemoved)
      live.push_back(static_cast<int>(i));
  std::sort(live.begin(), live.end(), [&](int a, int b) {
    return tracklets[static_cast<size_t>(a)].id <
           tracklets[static_cast<size_t>(b)].id;
  });
  return live;
}

LifecycleResult step_lifecycle(const std::vector<Tracklet>& tracklets,
                               const FramePredictions& predictions,
                               int frame_index, const LifecycleConfig& cfg) {
  cfg.validate();
  const std::vector<int> live = live_indices(tracklets);
  if (predictions.n_tracks != static_cast<Eigen::Index>(live.size()))
    throw std::invalid_argument(
        "prediction track rows do not match the live tracklet count");
  const Eigen::Index rows = predictions.content.rows();
  if (predictions.boxes.rows() != rows || predictions.scores.size() != rows ||
      rows < predictions.n_tracks)
    throw std::invalid_argument("prediction row counts disagree");

  LifecycleResult result;
  result.tracklets = tracklets;

  // Existing tracklets first: rows [0, n_tracks) follow `live` order.
  for (size_t i = 0; i < live.size(); ++i) {
    Tracklet& t = result.tracklets[static_cast<size_t>(live[i])];
    const Eigen::Index row = static_cast<Eigen::Index>(i);
    const double score = predictions.scores(row);
    if (score >= cfg.tau_n) {
      t.state = TrackState::kActive;
      t.miss_count = 0;
      t.query.content = predictions.content.row(row).transpose();
      t.query.box = box_from_row(predictions.boxes, row);
      t.query.score = score;
      Eigen::MatrixXd h = t.history;
      t.history = assoc::update_history(t.query.content, &h, cfg.ema_weight);
    } else {
      // Unreliable observation: freeze content, box and history.
      t.state = TrackState::kInactive;
      t.miss_count += 1;
      if (t.miss_count >= cfg.persistence) t.state = TrackState::kRemoved;
    }
  }

  // Newborns from the detection rows.
  int next_id = 0;
  for (const Tracklet& t : result.tracklets) next_id = std::max(next_id, t.id);
  ++next_id;
  for (Eigen::Index row = predictions.n_tracks; row < rows; ++row) {
    const double score = predictions.scores(row);
    if (score < cfg.tau_e) continue;
    const BoundingBox box = box_from_row(predictions.boxes, row);
    if (cfg.suppress_newborn_overlap &&
        overlaps_active(result.tracklets, box, cfg.newborn_overlap_iou))
      continue;
    Tracklet born;
    born.id = next_id++;
    born.state = TrackState::kActive;
    born.query.kind = assoc::ObjectQuery::Kind::kTrack;
    born.query.content = predictions.content.row(row).transpose();
    born.query.box = box;
    born.query.score = score;
    born.history = born.query.content;  // EMA base case
    born.miss_count = 0;
    born.birth_frame = frame_index;
    result.tracklets.push_back(std::move(born));
  }

  // Emit this frame's active tracklets in id order.
  for (int idx : live_indices(result.tracklets)) {
    const Tracklet& t = result.tracklets[static_cast<size_t>(idx)];
    if (t.state != TrackState::kActive) continue;
    result.records.push_back(
        TrackRecord{frame_index, t.id, t.query.box, t.query.score});
  }
  return result;
}

std::vector<assoc::ObjectQuery> propagate_queries(
    const std::vector<Tracklet>& tracklets) {
  std::vector<assoc::ObjectQuery> queries;
  for (int idx : live_indices(tracklets))
    queries.push_back(tracklets[static_cast<size_t>(idx)].query);
  return queries;
}

}  // namespace qtrack::track
