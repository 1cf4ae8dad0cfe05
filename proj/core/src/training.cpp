#include "qtrack/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "qtrack/hungarian.hpp"

namespace qtrack::train {

namespace {

using ad::Matrix;
using ad::Tape;
using ad::Var;

constexpr double kProbEps = 1e-8;  // keeps focal logs finite

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

BoundingBox box_from_row(const Eigen::MatrixXd& m, Eigen::Index r) {
  return BoundingBox{m(r, 0), m(r, 1), m(r, 2), m(r, 3)};
}

// Differentiable GIoU of prediction rows against fixed target rows, n x 1.
Var giou_pairs(Tape& t, Var pred, const Matrix& gt) {
  const Eigen::Index n = pred.rows();
  Var px = t.slice_cols(pred, 0, 1), py = t.slice_cols(pred, 1, 1);
  Var pw = t.slice_cols(pred, 2, 1), ph = t.slice_cols(pred, 3, 1);
  Var px1 = t.sub(px, t.scale(pw, 0.5)), px2 = t.add(px, t.scale(pw, 0.5));
  Var py1 = t.sub(py, t.scale(ph, 0.5)), py2 = t.add(py, t.scale(ph, 0.5));

  Matrix gx1 = gt.col(0) - 0.5 * gt.col(2), gx2 = gt.col(0) + 0.5 * gt.col(2);
  Matrix gy1 = gt.col(1) - 0.5 * gt.col(3), gy2 = gt.col(1) + 0.5 * gt.col(3);
  Var vgx1 = t.input(gx1), vgx2 = t.input(gx2);
  Var vgy1 = t.input(gy1), vgy2 = t.input(gy2);
  Var zero = t.input(Matrix::Zero(n, 1));

  Var iw = t.cwise_max(zero, t.sub(t.cwise_min(px2, vgx2),
                                   t.cwise_max(px1, vgx1)));
  Var ih = t.cwise_max(zero, t.sub(t.cwise_min(py2, vgy2),
                                   t.cwise_max(py1, vgy1)));
  Var inter = t.mul(iw, ih);
  Var area_p = t.mul(pw, ph);
  Var area_g = t.input((gt.col(2).array() * gt.col(3).array()).matrix());
  Var uni = t.sub(t.add(area_p, area_g), inter);
  Var iou = t.cwise_div(inter, uni);

  Var hw = t.sub(t.cwise_max(px2, vgx2), t.cwise_min(px1, vgx1));
  Var hh = t.sub(t.cwise_max(py2, vgy2), t.cwise_min(py1, vgy1));
  Var hull = t.mul(hw, hh);
  return t.sub(iou, t.cwise_div(t.sub(hull, uni), hull));
}

// Focal + box terms for one prediction head over one frame: returns the
// un-normalized sum and tallies the per-term values.
Var head_loss(Tape& t, Var scores, Var boxes, const std::vector<int>& identity,
              const Matrix& targets, const LossWeights& w, double* cls_out,
              double* l1_out, double* giou_out) {
  std::vector<int> pos, neg;
  for (size_t i = 0; i < identity.size(); ++i)
    (identity[i] >= 0 ? pos : neg).push_back(static_cast<int>(i));

  Var out = t.input(Matrix::Zero(1, 1));
  if (!pos.empty()) {
    const int n = static_cast<int>(pos.size());
    Var p = t.select_rows(scores, pos);
    Var eps = t.input(Matrix::Constant(n, 1, kProbEps));
    Var ones = t.input(Matrix::Ones(n, 1));
    // alpha (1-p)^gamma (-log p) per matched slot.
    Var focal = t.mul(t.pow_scalar(t.sub(ones, p), w.focal_gamma),
                      t.scale(t.log(t.cwise_max(p, eps)), -1.0));
    Var cls = t.scale(t.sum(focal), w.lambda_cls * w.focal_alpha);
    *cls_out += cls.value()(0, 0);
    out = t.add(out, cls);

    Matrix gt(n, 4);
    for (int i = 0; i < n; ++i)
      gt.row(i) = targets.row(pos[static_cast<size_t>(i)]);
    Var pb = t.select_rows(boxes, pos);
    Var l1 = t.scale(t.sum(t.abs(t.sub(pb, t.input(gt)))), w.lambda_l1);
    *l1_out += l1.value()(0, 0);
    out = t.add(out, l1);

    Var ones_n = t.input(Matrix::Ones(n, 1));
    Var giou_loss = t.scale(t.sum(t.sub(ones_n, giou_pairs(t, pb, gt))),
                            w.lambda_giou);
    *giou_out += giou_loss.value()(0, 0);
    out = t.add(out, giou_loss);
  }
  if (!neg.empty()) {
    const int n = static_cast<int>(neg.size());
    Var p = t.select_rows(scores, neg);
    Var eps = t.input(Matrix::Constant(n, 1, kProbEps));
    Var ones = t.input(Matrix::Ones(n, 1));
    // (1-alpha) p^gamma (-log(1-p)) per background slot.
    Var focal =
        t.mul(t.pow_scalar(p, w.focal_gamma),
              t.scale(t.log(t.cwise_max(t.sub(ones, p), eps)), -1.0));
    Var cls = t.scale(t.sum(focal), w.lambda_cls * (1.0 - w.focal_alpha));
    *cls_out += cls.value()(0, 0);
    out = t.add(out, cls);
  }
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (clip_length < 2) throw std::invalid_argument("clip_length must be >= 2");
  if (lr <= 0.0) throw std::invalid_argument("lr must be positive");
  if (lr_drop_factor <= 0.0)
    throw std::invalid_argument("lr_drop_factor must be positive");
  if (!(p_insert >= 0.0 && p_insert < 1.0))
    throw std::invalid_argument("p_insert must lie in [0, 1)");
  if (!(p_drop >= 0.0 && p_drop < 1.0))
    throw std::invalid_argument("p_drop must lie in [0, 1)");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (clips_per_sequence < 1)
    throw std::invalid_argument("clips_per_sequence must be >= 1");
  if (!std::is_sorted(lr_milestones.begin(), lr_milestones.end()))
    throw std::invalid_argument("lr milestones must be sorted");
}

double lr_at_epoch(const TrainConfig& cfg, int epoch) {
  double lr = cfg.lr;
  for (int m : cfg.lr_milestones)
    if (epoch >= m) lr /= cfg.lr_drop_factor;
  return lr;
}

ClipSample sample_clip(const TrainingSequence& seq, int clip_length,
                       std::mt19937_64& rng) {
  const int frames = static_cast<int>(seq.gt.frames.size());
  if (static_cast<int>(seq.observations.size()) != frames)
    throw std::invalid_argument("observation count mismatch");
  if (frames < clip_length)
    throw std::invalid_argument("sequence shorter than the clip length");

  // Contiguous windows only: the tracker always runs frame-by-frame, so a
  // subsampled clip would teach the box update a larger per-step motion than
  // it ever sees at inference and the rollout would overshoot.
  std::uniform_int_distribution<int> start_dist(0, frames - clip_length);
  const int start = start_dist(rng);

  ClipSample clip;
  for (int i = 0; i < clip_length; ++i) {
    const int f = start + i;
    ClipFrame cf;
    cf.obs = seq.observations[static_cast<size_t>(f)];
    cf.truth = seq.gt.frames[static_cast<size_t>(f)];
    clip.frames.push_back(std::move(cf));
  }
  return clip;
}

ClipAugmentation augment_clip(const ClipSample& clip, double p_insert,
                              double p_drop, std::uint64_t seed) {
  if (p_insert < 0.0 || p_insert > 1.0 || p_drop < 0.0 || p_drop > 1.0)
    throw std::invalid_argument("augmentation probabilities must be in [0, 1]");
  std::mt19937_64 rng(mix_seed(seed, 0x61756721));
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  // Upper bound on live slots: every identity in the clip plus one inserted
  // negative per frame.
  std::set<int> identities;
  for (const ClipFrame& f : clip.frames)
    for (const auto& obj : f.truth) identities.insert(obj.identity);
  const size_t slot_bound = identities.size() + clip.frames.size();

  ClipAugmentation aug;
  for (const ClipFrame& frame : clip.frames) {
    ClipAugmentation::Frame directives;
    directives.drop.resize(slot_bound);
    for (size_t i = 0; i < slot_bound; ++i)
      directives.drop[i] = uniform(rng) < p_drop ? 1 : 0;

    if (uniform(rng) < p_insert && !frame.obs.detections.empty()) {
      // Prefer detections that overlap no visible object: true negatives.
      std::vector<int> candidates;
      for (size_t d = 0; d < frame.obs.detections.size(); ++d) {
        bool clean = true;
        for (const auto& obj : frame.truth)
          if (obj.visible &&
              iou(frame.obs.detections[d].box, obj.box) >= 0.3) {
            clean = false;
            break;
          }
        if (clean) candidates.push_back(static_cast<int>(d));
      }
      if (candidates.empty()) {
        // Fall back to the least confident detection.
        int worst = 0;
        for (size_t d = 1; d < frame.obs.detections.size(); ++d)
          if (frame.obs.detections[d].score <
              frame.obs.detections[static_cast<size_t>(worst)].score)
            worst = static_cast<int>(d);
        candidates.push_back(worst);
      }
      std::uniform_int_distribution<size_t> pick(0, candidates.size() - 1);
      directives.insert = true;
      directives.insert_source = candidates[pick(rng)];
    }
    aug.frames.push_back(std::move(directives));
  }
  return aug;
}

double focal_match_cost(double p, double alpha, double gamma) {
  const double q = std::min(std::max(p, kProbEps), 1.0 - kProbEps);
  const double pos = alpha * std::pow(1.0 - q, gamma) * (-std::log(q));
  const double neg = (1.0 - alpha) * std::pow(q, gamma) * (-std::log(1.0 - q));
  return pos - neg;
}

Assignment assign_labels(const Eigen::MatrixXd& pred_boxes,
                         const Eigen::VectorXd& pred_scores,
                         Eigen::Index n_tracks,
                         const std::vector<int>& carried,
                         const std::vector<sim::GroundTruthObject>& truth,
                         const LossWeights& w) {
  if (static_cast<Eigen::Index>(carried.size()) != n_tracks)
    throw std::invalid_argument("carried bindings must cover the track rows");
  if (pred_boxes.rows() != pred_scores.size())
    throw std::invalid_argument("prediction box/score count mismatch");
  const Eigen::Index rows = pred_boxes.rows();

  Assignment out;
  out.identity.assign(static_cast<size_t>(rows), -1);

  std::set<int> bound;
  for (Eigen::Index i = 0; i < n_tracks; ++i) {
    const int id = carried[static_cast<size_t>(i)];
    if (id >= 0) bound.insert(id);
  }

  // Track rows keep their identity while it is visible this frame.
  for (Eigen::Index i = 0; i < n_tracks; ++i) {
    const int id = carried[static_cast<size_t>(i)];
    if (id < 0) continue;
    for (const auto& obj : truth)
      if (obj.identity == id && obj.visible) {
        out.identity[static_cast<size_t>(i)] = id;
        ++out.matched;
        break;
      }
  }

  // Newborns: visible identities not bound to any slot.
  std::vector<const sim::GroundTruthObject*> newborn;
  for (const auto& obj : truth)
    if (obj.visible && bound.find(obj.identity) == bound.end())
      newborn.push_back(&obj);
  const Eigen::Index n_dets = rows - n_tracks;
  if (newborn.empty() || n_dets == 0) return out;

  Eigen::MatrixXd cost(static_cast<Eigen::Index>(newborn.size()), n_dets);
  for (size_t g = 0; g < newborn.size(); ++g) {
    const BoundingBox& gt_box = newborn[g]->box;
    for (Eigen::Index j = 0; j < n_dets; ++j) {
      const Eigen::Index row = n_tracks + j;
      const BoundingBox pb = box_from_row(pred_boxes, row);
      const double cls =
          focal_match_cost(pred_scores(row), w.focal_alpha, w.focal_gamma);
      const double l1 = std::abs(pb.cx - gt_box.cx) +
                        std::abs(pb.cy - gt_box.cy) +
                        std::abs(pb.w - gt_box.w) + std::abs(pb.h - gt_box.h);
      cost(static_cast<Eigen::Index>(g), j) = w.lambda_cls * cls +
                                              w.lambda_l1 * l1 +
                                              w.lambda_giou * (1.0 - giou(pb, gt_box));
    }
  }
  const std::vector<int> match = min_cost_assignment(cost);
  for (size_t g = 0; g < newborn.size(); ++g) {
    const int j = match[g];
    if (j < 0) continue;
    const Eigen::Index row = n_tracks + j;
    out.identity[static_cast<size_t>(row)] = newborn[g]->identity;
    out.newborn_rows.push_back(static_cast<int>(row));
    ++out.matched;
  }
  std::sort(out.newborn_rows.begin(), out.newborn_rows.end());
  return out;
}

ClipLoss compute_loss(Tape& tape, const std::vector<FrameLossInputs>& frames,
                      const LossWeights& w) {
  ClipLoss result;
  int matched = 0;
  for (const FrameLossInputs& f : frames)
    for (int id : f.identity) matched += id >= 0 ? 1 : 0;
  result.breakdown.matched = matched;
  const double denom = std::max(1, matched);

  Var total = tape.input(Matrix::Zero(1, 1));
  double aux_cls = 0.0, aux_l1 = 0.0, aux_giou = 0.0;
  for (const FrameLossInputs& f : frames) {
    if (f.identity.size() != static_cast<size_t>(f.scores.rows()))
      throw std::invalid_argument("assignment does not cover the slots");
    total = tape.add(total, head_loss(tape, f.scores, f.boxes, f.identity,
                                      f.target_boxes, w,
                                      &result.breakdown.cls,
                                      &result.breakdown.l1,
                                      &result.breakdown.giou));
    if (f.aux_scores.valid())
      total = tape.add(total,
                       head_loss(tape, f.aux_scores, f.aux_boxes, f.identity,
                                 f.target_boxes, w, &aux_cls, &aux_l1,
                                 &aux_giou));
  }
  result.total = tape.scale(total, 1.0 / denom);
  result.breakdown.cls /= denom;
  result.breakdown.l1 /= denom;
  result.breakdown.giou /= denom;
  result.breakdown.aux = (aux_cls + aux_l1 + aux_giou) / denom;
  result.breakdown.total = result.total.value()(0, 0);
  return result;
}

ClipLoss clip_loss(assoc::AssociatorModel& model, Tape& tape,
                   const ClipSample& clip, const ClipAugmentation& aug,
                   const LossWeights& w, RolloutDiagnostics* diag) {
  if (aug.frames.size() != clip.frames.size())
    throw std::invalid_argument("augmentation does not cover the clip");
  const int d = model.config().d_model;

  // Differentiable slot state carried across frames.
  assoc::TrackStateVars slots;
  std::vector<int> slot_identity;  // -1 for inserted negatives

  std::vector<FrameLossInputs> frame_losses;
  for (size_t fi = 0; fi < clip.frames.size(); ++fi) {
    const ClipFrame& frame = clip.frames[fi];
    const ClipAugmentation::Frame& directives = aug.frames[fi];

    // Slot dropout at frame start.
    if (!slot_identity.empty()) {
      std::vector<int> keep;
      for (size_t i = 0; i < slot_identity.size(); ++i)
        if (i >= directives.drop.size() || !directives.drop[i])
          keep.push_back(static_cast<int>(i));
      if (keep.size() < slot_identity.size()) {
        std::vector<int> kept_ids;
        for (int i : keep)
          kept_ids.push_back(slot_identity[static_cast<size_t>(i)]);
        slot_identity = std::move(kept_ids);
        if (slot_identity.empty()) {
          slots = assoc::TrackStateVars{};
        } else {
          slots.content = tape.select_rows(slots.content, keep);
          slots.boxes = tape.select_rows(slots.boxes, keep);
          slots.history = tape.select_rows(slots.history, keep);
        }
      }
    }

    // Negative track-query insertion.
    if (directives.insert && directives.insert_source >= 0 &&
        directives.insert_source <
            static_cast<int>(frame.obs.detections.size())) {
      const sim::Detection& src =
          frame.obs.detections[static_cast<size_t>(directives.insert_source)];
      Matrix content = src.content.transpose();
      Matrix box(1, 4);
      box << src.box.cx, src.box.cy, src.box.w, src.box.h;
      Var c = tape.input(content), b = tape.input(box);
      if (slot_identity.empty()) {
        slots.content = c;
        slots.boxes = b;
        slots.history = tape.input(content);
      } else {
        slots.content = tape.concat_rows(slots.content, c);
        slots.boxes = tape.concat_rows(slots.boxes, b);
        slots.history = tape.concat_rows(slots.history, tape.input(content));
      }
      slot_identity.push_back(-1);
    }

    // Frame leaves from the frozen detector.
    const auto& dets = frame.obs.detections;
    Matrix det_content(static_cast<Eigen::Index>(dets.size()), d);
    Matrix det_boxes(static_cast<Eigen::Index>(dets.size()), 4);
    std::vector<double> det_scores(dets.size());
    for (size_t i = 0; i < dets.size(); ++i) {
      det_content.row(static_cast<Eigen::Index>(i)) =
          dets[i].content.transpose();
      det_boxes.row(static_cast<Eigen::Index>(i)) << dets[i].box.cx,
          dets[i].box.cy, dets[i].box.w, dets[i].box.h;
      det_scores[i] = dets[i].score;
    }
    assoc::FrameInputs inputs;
    inputs.det_content = tape.input(std::move(det_content));
    inputs.det_boxes = tape.input(std::move(det_boxes));
    inputs.det_scores = std::move(det_scores);
    inputs.features = tape.input(frame.obs.features);
    inputs.positions = tape.input(frame.obs.positions);

    assoc::FrameOutputs out = model.step_frame(
        tape, inputs, slot_identity.empty() ? nullptr : &slots);

    // Supervision for this frame.
    Assignment asg = assign_labels(out.boxes.value(),
                                   out.scores.value().col(0), out.n_tracks,
                                   slot_identity, frame.truth, w);
    const Eigen::Index rows = out.boxes.rows();
    Matrix targets = Matrix::Zero(rows, 4);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const int id = asg.identity[static_cast<size_t>(r)];
      if (id < 0) continue;
      for (const auto& obj : frame.truth)
        if (obj.identity == id) {
          targets.row(r) << obj.box.cx, obj.box.cy, obj.box.w, obj.box.h;
          break;
        }
    }
    FrameLossInputs fl;
    fl.scores = out.scores;
    fl.boxes = out.boxes;
    fl.aux_scores = out.aux_scores;
    fl.aux_boxes = out.aux_boxes;
    fl.identity = asg.identity;
    fl.target_boxes = std::move(targets);
    frame_losses.push_back(std::move(fl));

    if (diag) {
      diag->slot_identity.push_back(asg.identity);
      diag->slot_count.push_back(static_cast<int>(rows));
    }

    // Propagate: existing slots continue with decoder content and boxes
    // (history advanced by the EMA); newborn-matched detection rows join
    // with history initialized to their content.
    std::vector<int> old_rows(static_cast<size_t>(out.n_tracks));
    std::iota(old_rows.begin(), old_rows.end(), 0);
    std::vector<int> next_identity = slot_identity;
    for (int r : asg.newborn_rows)
      next_identity.push_back(asg.identity[static_cast<size_t>(r)]);

    std::vector<int> all_rows = old_rows;
    all_rows.insert(all_rows.end(), asg.newborn_rows.begin(),
                    asg.newborn_rows.end());
    if (all_rows.empty()) {
      slots = assoc::TrackStateVars{};
      slot_identity.clear();
      continue;
    }
    Var next_content = tape.select_rows(out.content, all_rows);
    Var next_boxes = tape.select_rows(out.boxes, all_rows);
    Var next_history;
    if (!old_rows.empty()) {
      Var carried_h = model.ema_update(
          tape, tape.select_rows(out.content, old_rows), slots.history);
      if (!asg.newborn_rows.empty())
        next_history = tape.concat_rows(
            carried_h, tape.select_rows(out.content, asg.newborn_rows));
      else
        next_history = carried_h;
    } else {
      next_history = tape.select_rows(out.content, asg.newborn_rows);
    }
    slots.content = next_content;
    slots.boxes = next_boxes;
    slots.history = next_history;
    slot_identity = std::move(next_identity);
  }

  return compute_loss(tape, frame_losses, w);
}

TrainReport train(assoc::AssociatorModel& model,
                  const std::vector<TrainingSequence>& dataset,
                  const TrainConfig& cfg) {
  cfg.validate();
  if (dataset.empty()) throw std::invalid_argument("empty training dataset");

  std::mt19937_64 rng(mix_seed(cfg.seed, 0x747261696eULL));
  ad::AdamW optimizer;
  TrainReport report;
  int step = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = lr_at_epoch(cfg, epoch);
    std::vector<size_t> order;
    for (int pass = 0; pass < cfg.clips_per_sequence; ++pass) {
      std::vector<size_t> one(dataset.size());
      std::iota(one.begin(), one.end(), 0);
      std::shuffle(one.begin(), one.end(), rng);
      order.insert(order.end(), one.begin(), one.end());
    }

    double epoch_total = 0.0;
    for (size_t idx : order) {
      ClipSample clip =
          sample_clip(dataset[idx], cfg.clip_length, rng);
      ClipAugmentation aug =
          augment_clip(clip, cfg.p_insert, cfg.p_drop,
                       mix_seed(cfg.seed, static_cast<std::uint64_t>(step)));
      Tape tape;
      ClipLoss loss = clip_loss(model, tape, clip, aug, cfg.weights);
      if (!std::isfinite(loss.breakdown.total))
        throw std::runtime_error("training diverged: non-finite loss");

      model.params().zero_grads();
      tape.backward(loss.total);
      optimizer.step(model.params(), lr);

      report.curve.push_back(StepRecord{epoch, step, lr, loss.breakdown});
      epoch_total += loss.breakdown.total;
      ++step;
    }
    report.epoch_mean.push_back(epoch_total /
                                static_cast<double>(order.size()));
  }
  return report;
}

}  // namespace qtrack::train
