#pragma once

#include <array>
#include <utility>
#include <vector>

#include "qtrack/box.hpp"
#include "qtrack/detsim.hpp"
#include "qtrack/lifecycle.hpp"

namespace qtrack::metrics {

/// One frame of a track set: parallel id/box arrays, ids unique per frame.
struct TrackedFrame {
  std::vector<int> ids;
  std::vector<BoundingBox> boxes;
};

/// Whole sequence, one entry per frame.
using TrackSet = std::vector<TrackedFrame>;

/// Ground truth restricted to visible objects (occluded boxes are not
/// expected from any tracker and are excluded from scoring).
TrackSet from_ground_truth(const sim::GroundTruthSequence& seq);

/// Tracker output records regrouped by frame (frames without records are
/// empty entries).
TrackSet from_records(const std::vector<track::TrackRecord>& records,
                      int frame_count);

/// Per-frame correspondence: maximum cardinality, then maximum total IoU,
/// over pairs with IoU >= alpha; ties broken lexicographically by
/// (gt id, pred id).
struct FrameMatch {
  std::vector<std::pair<int, int>> pairs;  // (gt id, pred id)
  std::vector<double> ious;                // aligned with pairs
  int fn = 0;                              // unmatched ground truth
  int fp = 0;                              // unmatched predictions
};

FrameMatch match_frame(const TrackedFrame& gt, const TrackedFrame& pred,
                       double alpha);

/// CLEAR metrics. An identity switch is counted when a matched ground-truth
/// identity's predicted id differs from its most recent previously matched
/// predicted id (memory persists across unmatched gaps).
struct ClearResult {
  double mota = 0.0;
  int fp = 0;
  int fn = 0;
  int idsw = 0;
  int gt = 0;
  bool defined = true;  // false when GT = 0 (MOTA undefined)
};

ClearResult clear_metrics(const TrackSet& gt, const TrackSet& pred,
                          double alpha = 0.5);

/// Identity-F1 with global trajectory matching: the pairing of whole
/// trajectories maximizes identity true positives.
struct IdfResult {
  double idf1 = 1.0;
  int idtp = 0;
  int idfp = 0;
  int idfn = 0;
};

IdfResult idf1(const TrackSet& gt, const TrackSet& pred, double alpha = 0.5);

/// Higher-order tracking accuracy at alpha in {0.05, 0.10, ..., 0.95}:
/// per alpha, DetA from detection TP/FP/FN and AssA as the mean association
/// score over matched pairs; the headline numbers average over alpha.
constexpr int kHotaAlphaCount = 19;

struct HotaResult {
  double hota = 1.0;
  double deta = 1.0;
  double assa = 1.0;
  std::array<double, kHotaAlphaCount> per_alpha_hota{};
  std::array<double, kHotaAlphaCount> per_alpha_deta{};
  std::array<double, kHotaAlphaCount> per_alpha_assa{};
  bool empty_convention = false;  // empty gt and empty pred
};

/// The alpha grid itself, index-aligned with the per-alpha arrays.
std::array<double, kHotaAlphaCount> hota_alphas();

HotaResult hota(const TrackSet& gt, const TrackSet& pred);

/// Everything at once, on one gt/pred pair.
struct MetricsReport {
  HotaResult hota;
  ClearResult clear;
  IdfResult idf;
};

MetricsReport evaluate(const TrackSet& gt, const TrackSet& pred);

/// Pooled evaluation over several sequences: frames are concatenated with
/// per-sequence id offsets so identities never collide across sequences.
MetricsReport evaluate_pooled(
    const std::vector<std::pair<TrackSet, TrackSet>>& sequences);

}  // namespace qtrack::metrics
