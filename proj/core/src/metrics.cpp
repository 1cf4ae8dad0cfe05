#include "qtrack/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>

#include "qtrack/hungarian.hpp"

namespace qtrack::metrics {

namespace {

/// Frame with ids sorted ascending so row/col order in the matcher coincides
/// with (gt id, pred id) lexicographic order.
struct SortedFrame {
  std::vector<int> ids;
  std::vector<BoundingBox> boxes;
};

SortedFrame sort_frame(const TrackedFrame& frame, const char* side) {
  if (frame.ids.size() != frame.boxes.size()) {
    throw std::invalid_argument(std::string(side) +
                                ": ids and boxes differ in length");
  }
  std::vector<int> order(frame.ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return frame.ids[a] < frame.ids[b]; });
  SortedFrame out;
  out.ids.reserve(order.size());
  out.boxes.reserve(order.size());
  for (int idx : order) {
    if (!out.ids.empty() && out.ids.back() == frame.ids[idx]) {
      throw std::invalid_argument(std::string(side) + ": duplicate id " +
                                  std::to_string(frame.ids[idx]) +
                                  " within one frame");
    }
    out.ids.push_back(frame.ids[idx]);
    out.boxes.push_back(frame.boxes[idx]);
  }
  return out;
}

Eigen::MatrixXd iou_matrix(const SortedFrame& gt, const SortedFrame& pred) {
  Eigen::MatrixXd m(static_cast<int>(gt.ids.size()),
                    static_cast<int>(pred.ids.size()));
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) {
      m(r, c) = iou(gt.boxes[r], pred.boxes[c]);
    }
  }
  return m;
}

/// Per-frame matching on pre-sorted frames; pairs come back in
/// (gt id, pred id) lexicographic order by construction.
FrameMatch match_sorted(const SortedFrame& gt, const SortedFrame& pred,
                        const Eigen::MatrixXd& ious, double alpha) {
  FrameMatch out;
  if (!gt.ids.empty() && !pred.ids.empty()) {
    for (const MatchPair& p : gated_max_match(ious, alpha)) {
      out.pairs.emplace_back(gt.ids[p.row], pred.ids[p.col]);
      out.ious.push_back(ious(p.row, p.col));
    }
  }
  out.fn = static_cast<int>(gt.ids.size() - out.pairs.size());
  out.fp = static_cast<int>(pred.ids.size() - out.pairs.size());
  return out;
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("alpha must lie in (0, 1)");
  }
}

const TrackedFrame& frame_or_empty(const TrackSet& set, std::size_t i) {
  static const TrackedFrame kEmpty;
  return i < set.size() ? set[i] : kEmpty;
}

/// Trajectory view: id -> frames present. Presence counts are what the
/// identity and association measures consume.
std::map<int, std::vector<int>> presence(const std::vector<SortedFrame>& set) {
  std::map<int, std::vector<int>> out;
  for (std::size_t f = 0; f < set.size(); ++f) {
    for (int id : set[f].ids) out[id].push_back(static_cast<int>(f));
  }
  return out;
}

}  // namespace

TrackSet from_ground_truth(const sim::GroundTruthSequence& seq) {
  TrackSet out(seq.frames.size());
  for (std::size_t f = 0; f < seq.frames.size(); ++f) {
    for (const sim::GroundTruthObject& obj : seq.frames[f]) {
      if (!obj.visible) continue;
      out[f].ids.push_back(obj.identity);
      out[f].boxes.push_back(obj.box);
    }
  }
  return out;
}

TrackSet from_records(const std::vector<track::TrackRecord>& records,
                      int frame_count) {
  if (frame_count < 0) throw std::invalid_argument("negative frame count");
  TrackSet out(static_cast<std::size_t>(frame_count));
  for (const track::TrackRecord& rec : records) {
    if (rec.frame < 0 || rec.frame >= frame_count) {
      throw std::invalid_argument("record frame " + std::to_string(rec.frame) +
                                  " outside [0, " +
                                  std::to_string(frame_count) + ")");
    }
    out[rec.frame].ids.push_back(rec.id);
    out[rec.frame].boxes.push_back(rec.box);
  }
  return out;
}

FrameMatch match_frame(const TrackedFrame& gt, const TrackedFrame& pred,
                       double alpha) {
  check_alpha(alpha);
  SortedFrame g = sort_frame(gt, "gt");
  SortedFrame p = sort_frame(pred, "pred");
  return match_sorted(g, p, iou_matrix(g, p), alpha);
}

ClearResult clear_metrics(const TrackSet& gt, const TrackSet& pred,
                          double alpha) {
  check_alpha(alpha);
  ClearResult out;
  std::map<int, int> last_matched;  // gt id -> most recent matched pred id
  std::size_t frames = std::max(gt.size(), pred.size());
  for (std::size_t f = 0; f < frames; ++f) {
    SortedFrame g = sort_frame(frame_or_empty(gt, f), "gt");
    SortedFrame p = sort_frame(frame_or_empty(pred, f), "pred");
    FrameMatch match = match_sorted(g, p, iou_matrix(g, p), alpha);
    out.gt += static_cast<int>(g.ids.size());
    out.fn += match.fn;
    out.fp += match.fp;
    for (const auto& [gt_id, pred_id] : match.pairs) {
      auto it = last_matched.find(gt_id);
      if (it != last_matched.end() && it->second != pred_id) ++out.idsw;
      last_matched[gt_id] = pred_id;
    }
  }
  if (out.gt == 0) {
    out.defined = false;
    out.mota = 0.0;
  } else {
    out.mota = 1.0 - static_cast<double>(out.fp + out.fn + out.idsw) /
                         static_cast<double>(out.gt);
  }
  return out;
}

IdfResult idf1(const TrackSet& gt, const TrackSet& pred, double alpha) {
  check_alpha(alpha);
  std::size_t frames = std::max(gt.size(), pred.size());
  std::vector<SortedFrame> g(frames), p(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    g[f] = sort_frame(frame_or_empty(gt, f), "gt");
    p[f] = sort_frame(frame_or_empty(pred, f), "pred");
  }
  std::map<int, std::vector<int>> gt_traj = presence(g);
  std::map<int, std::vector<int>> pred_traj = presence(p);

  // Frame-wise co-presence with IoU >= alpha, per (gt trajectory, pred
  // trajectory) pair. The global pairing maximizes total overlap, which is
  // exactly maximizing identity true positives.
  std::vector<int> gt_ids, pred_ids;
  for (const auto& [id, _] : gt_traj) gt_ids.push_back(id);
  for (const auto& [id, _] : pred_traj) pred_ids.push_back(id);
  std::map<int, int> pred_col;
  for (std::size_t c = 0; c < pred_ids.size(); ++c) pred_col[pred_ids[c]] = c;

  Eigen::MatrixXd overlap = Eigen::MatrixXd::Zero(
      static_cast<int>(gt_ids.size()), static_cast<int>(pred_ids.size()));
  for (std::size_t r = 0; r < gt_ids.size(); ++r) {
    for (int f : gt_traj[gt_ids[r]]) {
      auto git = std::lower_bound(g[f].ids.begin(), g[f].ids.end(), gt_ids[r]);
      const BoundingBox& gbox = g[f].boxes[git - g[f].ids.begin()];
      for (std::size_t c = 0; c < p[f].ids.size(); ++c) {
        if (iou(gbox, p[f].boxes[c]) >= alpha) {
          overlap(static_cast<int>(r), pred_col[p[f].ids[c]]) += 1.0;
        }
      }
    }
  }

  IdfResult out;
  int total_gt = 0, total_pred = 0;
  for (const auto& [_, fs] : gt_traj) total_gt += static_cast<int>(fs.size());
  for (const auto& [_, fs] : pred_traj)
    total_pred += static_cast<int>(fs.size());

  if (overlap.rows() > 0 && overlap.cols() > 0) {
    std::vector<int> assign = min_cost_assignment(-overlap);
    for (int r = 0; r < overlap.rows(); ++r) {
      if (assign[r] >= 0) out.idtp += static_cast<int>(overlap(r, assign[r]));
    }
  }
  out.idfn = total_gt - out.idtp;
  out.idfp = total_pred - out.idtp;
  int denom = 2 * out.idtp + out.idfp + out.idfn;
  out.idf1 = denom == 0 ? 1.0 : 2.0 * out.idtp / static_cast<double>(denom);
  return out;
}

std::array<double, kHotaAlphaCount> hota_alphas() {
  std::array<double, kHotaAlphaCount> a{};
  for (int i = 0; i < kHotaAlphaCount; ++i) a[i] = 0.05 * (i + 1);
  return a;
}

HotaResult hota(const TrackSet& gt, const TrackSet& pred) {
  std::size_t frames = std::max(gt.size(), pred.size());
  std::vector<SortedFrame> g(frames), p(frames);
  std::vector<Eigen::MatrixXd> ious(frames);
  int total_gt = 0, total_pred = 0;
  for (std::size_t f = 0; f < frames; ++f) {
    g[f] = sort_frame(frame_or_empty(gt, f), "gt");
    p[f] = sort_frame(frame_or_empty(pred, f), "pred");
    ious[f] = iou_matrix(g[f], p[f]);
    total_gt += static_cast<int>(g[f].ids.size());
    total_pred += static_cast<int>(p[f].ids.size());
  }

  HotaResult out;
  if (total_gt == 0 && total_pred == 0) {
    out.empty_convention = true;
    out.per_alpha_hota.fill(1.0);
    out.per_alpha_deta.fill(1.0);
    out.per_alpha_assa.fill(1.0);
    return out;  // hota/deta/assa default to 1.0
  }

  std::map<int, int> gt_len, pred_len;
  for (std::size_t f = 0; f < frames; ++f) {
    for (int id : g[f].ids) ++gt_len[id];
    for (int id : p[f].ids) ++pred_len[id];
  }

  std::array<double, kHotaAlphaCount> alphas = hota_alphas();
  double hota_sum = 0.0, deta_sum = 0.0, assa_sum = 0.0;
  for (int a = 0; a < kHotaAlphaCount; ++a) {
    int tp = 0, fp = 0, fn = 0;
    std::map<std::pair<int, int>, int> pair_count;
    for (std::size_t f = 0; f < frames; ++f) {
      FrameMatch match = match_sorted(g[f], p[f], ious[f], alphas[a]);
      tp += static_cast<int>(match.pairs.size());
      fn += match.fn;
      fp += match.fp;
      for (const auto& pr : match.pairs) ++pair_count[pr];
    }
    double deta = tp + fn + fp == 0
                      ? 0.0
                      : static_cast<double>(tp) /
                            static_cast<double>(tp + fn + fp);
    // Association score of a matched pair (g, p): co-matched frames over
    // frames where either identity is present, summed over every matched
    // instance and normalized by the number of instances.
    double ass_sum = 0.0;
    for (const auto& [key, m] : pair_count) {
      double denom = gt_len[key.first] + pred_len[key.second] - m;
      ass_sum += static_cast<double>(m) * (static_cast<double>(m) / denom);
    }
    double assa = tp == 0 ? 0.0 : ass_sum / static_cast<double>(tp);
    out.per_alpha_deta[a] = deta;
    out.per_alpha_assa[a] = assa;
    out.per_alpha_hota[a] = std::sqrt(deta * assa);
    deta_sum += deta;
    assa_sum += assa;
    hota_sum += out.per_alpha_hota[a];
  }
  out.deta = deta_sum / kHotaAlphaCount;
  out.assa = assa_sum / kHotaAlphaCount;
  out.hota = hota_sum / kHotaAlphaCount;
  return out;
}

MetricsReport evaluate(const TrackSet& gt, const TrackSet& pred) {
  MetricsReport report;
  report.hota = hota(gt, pred);
  report.clear = clear_metrics(gt, pred);
  report.idf = idf1(gt, pred);
  return report;
}

MetricsReport evaluate_pooled(
    const std::vector<std::pair<TrackSet, TrackSet>>& sequences) {
  TrackSet gt_all, pred_all;
  int next_gt = 0, next_pred = 0;
  for (const auto& [gt, pred] : sequences) {
    // Remap each sequence's ids into disjoint global ranges, in id order,
    // so pooling is deterministic and identities never collide.
    std::map<int, int> gt_map, pred_map;
    std::size_t frames = std::max(gt.size(), pred.size());
    for (std::size_t f = 0; f < frames; ++f) {
      TrackedFrame gf = frame_or_empty(gt, f);
      TrackedFrame pf = frame_or_empty(pred, f);
      for (int id : gf.ids) gt_map.emplace(id, 0);
      for (int id : pf.ids) pred_map.emplace(id, 0);
      gt_all.push_back(std::move(gf));
      pred_all.push_back(std::move(pf));
    }
    for (auto& [_, global] : gt_map) global = next_gt++;
    for (auto& [_, global] : pred_map) global = next_pred++;
    for (std::size_t f = gt_all.size() - frames; f < gt_all.size(); ++f) {
      for (int& id : gt_all[f].ids) id = gt_map.at(id);
      for (int& id : pred_all[f].ids) id = pred_map.at(id);
    }
  }
  return evaluate(gt_all, pred_all);
}

}  // namespace qtrack::metrics
