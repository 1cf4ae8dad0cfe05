#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qtrack/box.hpp"
#include "qtrack/params.hpp"
#include "qtrack/tape.hpp"

namespace qtrack::assoc {

struct AssociatorConfig {
  int d_model = 64;
  int n_heads = 8;
  int ffn_dim = 256;
  double tau_q = 0.3;          // detection-query quality gate
  double ema_weight = 0.7;     // w: fresh-information weight in the history EMA
  double temperature = 20.0;   // sinusoidal encoding temperature
  bool use_learned_projections = true;  // off: literal single-head attention
  bool identity_norm = false;  // test hook: layer norms become identity
  /// Box refinement operates on inverse-sigmoid coordinates (the production
  /// reading); off applies the update in plain coordinate space.
  bool logit_space_box_update = true;
  /// Hard negatives: sub-threshold pool (production), the full detection
  /// pool, or all-zero rows (ablation baselines).
  enum class NoisyMode { kHardRejected, kAllDetections, kZeros };
  NoisyMode noisy_mode = NoisyMode::kHardRejected;

  void validate() const;
};

struct ObjectQuery {
  enum class Kind { kDetection, kTrack };
  Eigen::VectorXd content;  // E [d_model]
  BoundingBox box;
  double score = 0.0;
  Kind kind = Kind::kDetection;
};

/// Quality gate on detection queries: kept = score >= tau_q (inclusive),
/// both lists preserve input order.
std::pair<std::vector<ObjectQuery>, std::vector<ObjectQuery>>
filter_detection_queries(const std::vector<ObjectQuery>& dets, double tau_q);

/// M hard negatives: content rows of the M highest-score rejected queries in
/// descending score order, zero-padded when fewer exist. M = 0 -> 0 x d.
Eigen::MatrixXd build_noisy_queries(const std::vector<ObjectQuery>& rejected,
                                    int M, int d_model);

/// History EMA: birth (h_prev == nullptr) -> t_new; otherwise
/// w * t_new + (1 - w) * h_prev.
Eigen::MatrixXd update_history(const Eigen::MatrixXd& t_new,
                               const Eigen::MatrixXd* h_prev, double w);

/// Attention inputs for one BII branch. K/V1 rows align (the attention weight
/// over key j aggregates value row j); Q/V2 rows align (residual base).
struct AttentionBundle {
  ad::Var q;
  ad::Var k;
  ad::Var v1;
  ad::Var v2;
};

/// Differentiable track-slot state carried across frames of a clip. Rows are
/// slots; the caller owns slot bookkeeping (insertion, removal, identity).
struct TrackStateVars {
  ad::Var content;  // n x d
  ad::Var boxes;    // n x 4
  ad::Var history;  // n x d
  Eigen::Index rows() const { return content.valid() ? content.rows() : 0; }
};

/// Per-frame leaves: detector outputs plus global memory tokens.
struct FrameInputs {
  ad::Var det_content;            // m x d
  ad::Var det_boxes;              // m x 4
  std::vector<double> det_scores; // m, plain values (gating only)
  ad::Var features;               // n_tokens x d (F)
  ad::Var positions;              // n_tokens x d (P)
};

/// Decoder and auxiliary outputs for one frame. Slot layout: the first
/// n_tracks rows are the incoming track slots in order, followed by one row
/// per kept detection (in kept order). Output order equals input order.
struct FrameOutputs {
  ad::Var content;     // (n_tracks + n_kept) x d, decoder embeddings
  ad::Var boxes;       // (n_tracks + n_kept) x 4
  ad::Var scores;      // (n_tracks + n_kept) x 1, sigmoid
  ad::Var aux_boxes;   // CPA-head boxes, same layout
  ad::Var aux_scores;  // CPA-head scores, same layout
  std::vector<int> kept;      // indices into the frame's detection list
  std::vector<int> rejected;  // complement, order preserved
  Eigen::MatrixXd det_attention;  // W_d: kept x (kept + tracks), head-averaged
  Eigen::MatrixXd trk_attention;  // W_t: tracks x (kept + tracks)
  Eigen::Index n_tracks = 0;
};

/// The learnable associator: query assembly, bidirectional interaction,
/// content-position alignment, and the single-layer association decoder.
/// All forward math runs on a Tape, so training and inference share one code
/// path; inference simply never calls backward().
class AssociatorModel {
 public:
  AssociatorModel(const AssociatorConfig& config, std::uint64_t seed);

  const AssociatorConfig& config() const { return cfg_; }
  ad::ParamSet& params() { return params_; }
  const ad::ParamSet& params() const { return params_; }

  /// Full query assembly: content + sinusoidal encoding of the box.
  ad::Var assemble_full(ad::Tape& t, ad::Var content, ad::Var boxes);

  /// Eq-style core block: O1 = softmax(Q K^T / sqrt(d)) V1,
  /// O2 = norm(O1 + V2), O3 = norm(FFN(O2) + O2). `branch` selects the
  /// parameter family ("det" or "trk"). With learned projections enabled,
  /// Q/K/V1 pass through per-branch multi-head projections first.
  /// `attn_out`, if given, receives the head-averaged attention weights.
  ad::Var bii_attention(ad::Tape& t, const AttentionBundle& bundle,
                        const std::string& branch,
                        Eigen::MatrixXd* attn_out = nullptr);

  /// Detection branch: Q = D~, K = concat(D~, T~), V1 = concat(D, N), V2 = D.
  ad::Var update_detection_queries(ad::Tape& t, ad::Var det_content,
                                   ad::Var det_full, ad::Var trk_full,
                                   ad::Var noisy,
                                   Eigen::MatrixXd* attn_out = nullptr);

  /// Track branch: Q = T~, K = concat(D~, H~), V1 = concat(D, H), V2 = T.
  /// The history's positional part is shared with the track queries.
  ad::Var update_track_queries(ad::Tape& t, ad::Var trk_content,
                               ad::Var trk_full, ad::Var det_content,
                               ad::Var det_full, ad::Var history,
                               ad::Var trk_boxes,
                               Eigen::MatrixXd* attn_out = nullptr);

  /// Content-position alignment: modulated cross-attention over (F, P),
  /// then a zero-initialized box refinement on top of the input boxes.
  /// Returns (aligned content E'', aligned boxes B'); `aux_scores_out`
  /// receives the auxiliary classification head output.
  std::pair<ad::Var, ad::Var> cpa_align(ad::Tape& t, ad::Var content,
                                        ad::Var boxes, ad::Var features,
                                        ad::Var positions,
                                        ad::Var* aux_scores_out = nullptr);

  /// Single decoder layer (self-attention, cross-attention to (F, P), FFN)
  /// plus sigmoid score and box-delta heads. Output row i corresponds to
  /// input row i.
  struct Decoded {
    ad::Var content;
    ad::Var boxes;
    ad::Var scores;
  };
  Decoded decode(ad::Tape& t, ad::Var content, ad::Var boxes,
                 ad::Var features, ad::Var positions);

  /// One full frame: gate detections, run BII + CPA when track slots exist
  /// (first-frame path skips both), decode tracks ++ kept detections.
  FrameOutputs step_frame(ad::Tape& t, const FrameInputs& frame,
                          const TrackStateVars* tracks);

  /// History EMA as a tape op (birth handled by the caller passing
  /// prev = content of the newborn slot).
  ad::Var ema_update(ad::Tape& t, ad::Var t_new, ad::Var h_prev);

 private:
  ad::Var attention(ad::Tape& t, ad::Var q_in, ad::Var k_in, ad::Var v_in,
                    const std::string& prefix, Eigen::MatrixXd* attn_out);
  ad::Var layer_norm(ad::Tape& t, ad::Var x, const std::string& gamma,
                     const std::string& beta);
  ad::Var ffn(ad::Tape& t, ad::Var x, const std::string& prefix);
  ad::Var refine_boxes(ad::Tape& t, ad::Var boxes, ad::Var delta);

  AssociatorConfig cfg_;
  ad::ParamSet params_;
};

}  // namespace qtrack::assoc
