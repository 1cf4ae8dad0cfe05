#include "qtrack/baseline.hpp"

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "qtrack/hungarian.hpp"

namespace qtrack::baseline {

namespace {

struct GreedyTrack {
  int id = 0;
  BoundingBox box;
  int miss = 0;
};

}  // namespace

void GreedyConfig::validate() const {
  if (!(iou_gate > 0.0 && iou_gate < 1.0))
    throw std::invalid_argument("iou_gate must lie in (0, 1)");
  if (max_age < 1) throw std::invalid_argument("max_age must be >= 1");
  if (!(spawn_score >= 0.0 && spawn_score <= 1.0))
    throw std::invalid_argument("spawn_score must lie in [0, 1]");
}

std::vector<track::TrackRecord> greedy_track(
    const std::vector<sim::FrameObservation>& frames,
    const GreedyConfig& cfg) {
  cfg.validate();
  std::vector<track::TrackRecord> records;
  std::vector<GreedyTrack> tracks;  // birth order, ids ascending
  int next_id = 1;

  for (std::size_t f = 0; f < frames.size(); ++f) {
    const auto& dets = frames[f].detections;
    const int n = static_cast<int>(tracks.size());
    const int m = static_cast<int>(dets.size());

    Eigen::MatrixXd ious(n, m);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j)
        ious(i, j) = iou(tracks[i].box, dets[j].box);

    std::vector<int> track_match(n, -1), det_match(m, -1);
    if (n > 0 && m > 0) {
      for (const MatchPair& p : gated_max_match(ious, cfg.iou_gate)) {
        track_match[p.row] = p.col;
        det_match[p.col] = p.row;
      }
    }

    std::vector<GreedyTrack> survivors;
    survivors.reserve(tracks.size());
    for (int i = 0; i < n; ++i) {
      GreedyTrack t = tracks[i];
      if (track_match[i] >= 0) {
        const sim::Detection& det = dets[static_cast<std::size_t>(track_match[i])];
        t.box = det.box;
        t.miss = 0;
        records.push_back({static_cast<int>(f), t.id, t.box, det.score});
        survivors.push_back(t);
      } else if (++t.miss < cfg.max_age) {
        survivors.push_back(t);  // coast without emitting
      }
    }
    for (int j = 0; j < m; ++j) {
      if (det_match[j] >= 0 || dets[static_cast<std::size_t>(j)].score <
                                   cfg.spawn_score)
        continue;
      GreedyTrack t{next_id++, dets[static_cast<std::size_t>(j)].box, 0};
      records.push_back({static_cast<int>(f), t.id,
                         t.box, dets[static_cast<std::size_t>(j)].score});
      survivors.push_back(t);
    }
    tracks = std::move(survivors);

    // Matched records come out in track order (= id order) and newborns get
    // ids above every existing one, so per-frame output is already sorted.
  }
  return records;
}

}  // namespace qtrack::baseline
