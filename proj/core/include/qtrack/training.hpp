#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>
#include <vector>

#include "qtrack/associator.hpp"
#include "qtrack/detsim.hpp"
#include "qtrack/tape.hpp"

namespace qtrack::train {

/// Loss-term weights, shared between the matching cost and the loss itself.
struct LossWeights {
  double lambda_cls = 2.0;
  double lambda_l1 = 5.0;
  double lambda_giou = 2.0;
  double focal_alpha = 0.25;
  double focal_gamma = 2.0;
};

struct TrainConfig {
  int clip_length = 9;
  double lr = 1.2e-4;
  std::vector<int> lr_milestones = {6, 10};  // 1-based epochs
  double lr_drop_factor = 10.0;
  LossWeights weights;
  double p_insert = 0.1;  // per-frame negative track-query insertion
  double p_drop = 0.1;    // per-slot track-query dropout
  int epochs = 12;
  /// Clip samples drawn from each sequence per epoch. Desk-scale datasets
  /// are tiny, so one pass per epoch leaves the schedule's step budget far
  /// too small; this multiplies steps without touching lr or milestones.
  int clips_per_sequence = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Stepped schedule: the rate divides by `lr_drop_factor` at each milestone
/// epoch (inclusive). Epochs are 1-based.
double lr_at_epoch(const TrainConfig& cfg, int epoch);

/// One clip frame: detector observation plus the ground truth it was
/// produced from (visibility included, for supervision).
struct ClipFrame {
  sim::FrameObservation obs;
  std::vector<sim::GroundTruthObject> truth;
};

struct ClipSample {
  std::vector<ClipFrame> frames;
};

/// A ground-truth sequence paired with its frozen-detector outputs.
struct TrainingSequence {
  sim::GroundTruthSequence gt;
  std::vector<sim::FrameObservation> observations;
};

/// Random contiguous window of `clip_length` frames. Contiguity matters: the
/// tracker steps frame-by-frame at inference, so training on subsampled
/// frames would systematically overstate per-step motion. Throws when the
/// sequence is shorter than the clip.
ClipSample sample_clip(const TrainingSequence& seq, int clip_length,
                       std::mt19937_64& rng);

/// Pre-drawn augmentation directives, deterministic per (clip, seed):
/// per frame, one drop coin per potential slot and at most one negative
/// insertion sourced from a detection of that frame.
struct ClipAugmentation {
  struct Frame {
    std::vector<char> drop;  // consumed by slot position at frame start
    bool insert = false;
    int insert_source = -1;  // index into the frame's detection list
  };
  std::vector<Frame> frames;
};

ClipAugmentation augment_clip(const ClipSample& clip, double p_insert,
                              double p_drop, std::uint64_t seed);

/// Per-slot supervision for one frame. `identity[i] >= 0` binds prediction
/// slot i to that ground-truth identity (box + positive score targets);
/// -1 means background (negative score target only).
struct Assignment {
  std::vector<int> identity;
  std::vector<int> newborn_rows;  // detection-region rows bound this frame
  int matched = 0;                // slots with a box target
};

/// Classification part of the matching cost (positive minus negative focal
/// cost at prediction confidence p).
double focal_match_cost(double p, double alpha, double gamma);

/// Label assignment for one frame. Track slots (the first n_tracks rows)
/// keep their carried identity while it is visible, background otherwise.
/// Visible identities bound to no slot are matched to detection-region rows
/// by minimum-cost assignment over
///   lambda_cls * focal-cost + lambda_l1 * L1 + lambda_giou * (1 - GIoU).
Assignment assign_labels(const Eigen::MatrixXd& pred_boxes,
                         const Eigen::VectorXd& pred_scores,
                         Eigen::Index n_tracks,
                         const std::vector<int>& carried,
                         const std::vector<sim::GroundTruthObject>& truth,
                         const LossWeights& w);

/// Everything compute_loss needs for one frame. Aux vars may be invalid
/// (frames that skipped the alignment stage contribute no auxiliary terms).
struct FrameLossInputs {
  ad::Var scores;      // slots x 1
  ad::Var boxes;       // slots x 4
  ad::Var aux_scores;  // slots x 1 or invalid
  ad::Var aux_boxes;   // slots x 4 or invalid
  std::vector<int> identity;     // per slot, -1 = background
  Eigen::MatrixXd target_boxes;  // slots x 4, rows valid where identity >= 0
};

struct LossBreakdown {
  double total = 0.0;
  double cls = 0.0;
  double l1 = 0.0;
  double giou = 0.0;
  double aux = 0.0;  // all auxiliary terms combined
  int matched = 0;   // collective denominator before the max(1, .) guard
};

struct ClipLoss {
  ad::Var total;  // scalar node, ready for backward()
  LossBreakdown breakdown;
};

/// Collectively averaged clip loss:
///   sum over frames of [lambda_cls * focal + lambda_l1 * L1
///                       + lambda_giou * (1 - GIoU)] / max(1, total matched),
/// with the auxiliary head contributing the same formula on its outputs.
ClipLoss compute_loss(ad::Tape& tape,
                      const std::vector<FrameLossInputs>& frames,
                      const LossWeights& w);

/// Optional rollout introspection for tests.
struct RolloutDiagnostics {
  std::vector<std::vector<int>> slot_identity;  // per frame, post-assignment
  std::vector<int> slot_count;                  // prediction rows per frame
};

/// Full differentiable rollout of one clip: gate + interact + align + decode
/// each frame, MOTR-style assignment, slot propagation with the history EMA,
/// augmentation directives applied at frame starts.
ClipLoss clip_loss(assoc::AssociatorModel& model, ad::Tape& tape,
                   const ClipSample& clip, const ClipAugmentation& aug,
                   const LossWeights& w,
                   RolloutDiagnostics* diag = nullptr);

struct StepRecord {
  int epoch = 0;
  int step = 0;  // global step counter
  double lr = 0.0;
  LossBreakdown loss;
};

struct TrainReport {
  std::vector<StepRecord> curve;
  std::vector<double> epoch_mean;  // mean total loss per epoch
};

/// Clip-wise training loop: one sampled clip per sequence per epoch,
/// decoupled-weight-decay adaptive-moment updates, stepped learning-rate
/// schedule. Deterministic for a fixed config seed. Throws on non-finite
/// loss.
TrainReport train(assoc::AssociatorModel& model,
                  const std::vector<TrainingSequence>& dataset,
                  const TrainConfig& cfg);

}  // namespace qtrack::train
