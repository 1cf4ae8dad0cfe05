#include "qtrack/associator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "qtrack/posenc.hpp"

namespace qtrack::assoc {

namespace {

using ad::Matrix;
using ad::ParamSet;
using ad::Tape;
using ad::Var;

void declare_attention(ParamSet& ps, std::mt19937_64& rng,
                       const std::string& prefix, int d) {
  for (const char* w : {".wq", ".wk", ".wv", ".wo"})
    ad::init_xavier(ps.declare(prefix + w, d, d), rng);
}

void declare_ln(ParamSet& ps, const std::string& name, int d) {
  // gamma starts at one, beta at zero: the identity transform.
  ps.declare(name + "_g", 1, d).setOnes();
  ps.declare(name + "_b", 1, d).setZero();
}

void declare_ffn(ParamSet& ps, std::mt19937_64& rng, const std::string& prefix,
                 int d, int ffn_dim) {
  ad::init_xavier(ps.declare(prefix + ".ffn_w1", d, ffn_dim), rng);
  ps.declare(prefix + ".ffn_b1", 1, ffn_dim).setZero();
  ad::init_xavier(ps.declare(prefix + ".ffn_w2", ffn_dim, d), rng);
  ps.declare(prefix + ".ffn_b2", 1, d).setZero();
}

}  // namespace

void AssociatorConfig::validate() const {
  if (d_model <= 0 || d_model % 8 != 0)
    throw std::invalid_argument("d_model must be a positive multiple of 8");
  if (n_heads <= 0 || d_model % n_heads != 0)
    throw std::invalid_argument("d_model must be divisible by n_heads");
  if (ffn_dim <= 0) throw std::invalid_argument("ffn_dim must be positive");
  if (!(tau_q > 0.0 && tau_q < 1.0))
    throw std::invalid_argument("tau_q must lie in (0, 1)");
  if (!(ema_weight > 0.0 && ema_weight <= 1.0))
    throw std::invalid_argument("ema_weight must lie in (0, 1]");
  if (temperature <= 0.0)
    throw std::invalid_argument("temperature must be positive");
}

std::pair<std::vector<ObjectQuery>, std::vector<ObjectQuery>>
filter_detection_queries(const std::vector<ObjectQuery>& dets, double tau_q) {
  std::vector<ObjectQuery> kept, rejected;
  for (const ObjectQuery& q : dets) {
    if (q.kind != ObjectQuery::Kind::kDetection)
      throw std::invalid_argument("filter_detection_queries: non-detection query");
    (q.score >= tau_q ? kept : rejected).push_back(q);
  }
  return {std::move(kept), std::move(rejected)};
}

Eigen::MatrixXd build_noisy_queries(const std::vector<ObjectQuery>& rejected,
                                    int M, int d_model) {
  if (M < 0) throw std::invalid_argument("M must be non-negative");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(M, d_model);
  std::vector<int> order(rejected.size());
  std::iota(order.begin(), order.end(), 0);
  // Highest scores first; equal scores keep input order for determinism.
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return rejected[static_cast<size_t>(a)].score >
           rejected[static_cast<size_t>(b)].score;
  });
  const int n = std::min<int>(M, static_cast<int>(rejected.size()));
  for (int i = 0; i < n; ++i) {
    const auto& src = rejected[static_cast<size_t>(order[static_cast<size_t>(i)])];
    if (src.content.size() != d_model)
      throw std::invalid_argument("noisy query content width mismatch");
    out.row(i) = src.content.transpose();
  }
  return out;
}

Eigen::MatrixXd update_history(const Eigen::MatrixXd& t_new,
                               const Eigen::MatrixXd* h_prev, double w) {
  if (h_prev == nullptr) return t_new;  // birth: H = T^0
  if (h_prev->rows() != t_new.rows() || h_prev->cols() != t_new.cols())
    throw std::invalid_argument("history shape mismatch");
  return w * t_new + (1.0 - w) * *h_prev;
}

AssociatorModel::AssociatorModel(const AssociatorConfig& config,
                                 std::uint64_t seed)
    : cfg_(config) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  const int d = cfg_.d_model;

  // Bidirectional interaction: one parameter family per branch.
  for (const char* branch : {"det", "trk"}) {
    declare_attention(params_, rng, branch, d);
    declare_ln(params_, std::string(branch) + ".ln1", d);
    declare_ffn(params_, rng, branch, d, cfg_.ffn_dim);
    declare_ln(params_, std::string(branch) + ".ln2", d);
  }

  // Content-position alignment.
  ad::init_xavier(params_.declare("cpa.mod_w", d, d), rng);
  params_.declare("cpa.mod_b", 1, d).setZero();
  declare_attention(params_, rng, "cpa", d);
  declare_ln(params_, "cpa.ln1", d);
  declare_ffn(params_, rng, "cpa", d, cfg_.ffn_dim);
  declare_ln(params_, "cpa.ln2", d);
  // Zero-initialized refinement: boxes pass through unchanged at start.
  params_.declare("cpa.delta_w", d, 4).setZero();
  params_.declare("cpa.delta_b", 1, 4).setZero();
  params_.declare("cpa.score_w", d, 1).setZero();
  params_.declare("cpa.score_b", 1, 1).setZero();

  // Association decoder.
  declare_attention(params_, rng, "dec.self", d);
  declare_ln(params_, "dec.ln1", d);
  declare_attention(params_, rng, "dec.cross", d);
  declare_ln(params_, "dec.ln2", d);
  declare_ffn(params_, rng, "dec", d, cfg_.ffn_dim);
  declare_ln(params_, "dec.ln3", d);
  params_.declare("dec.score_w", d, 1).setZero();
  params_.declare("dec.score_b", 1, 1).setZero();
  params_.declare("dec.box_w", d, 4).setZero();
  params_.declare("dec.box_b", 1, 4).setZero();
}

Var AssociatorModel::assemble_full(Tape& t, Var content, Var boxes) {
  return t.add(content,
               t.posenc_boxes(boxes, cfg_.d_model, cfg_.temperature));
}

Var AssociatorModel::layer_norm(Tape& t, Var x, const std::string& gamma,
                                const std::string& beta) {
  if (cfg_.identity_norm) return x;
  return t.layer_norm_rows(x, t.param(params_, gamma), t.param(params_, beta));
}

Var AssociatorModel::ffn(Tape& t, Var x, const std::string& prefix) {
  Var h = t.relu(t.add_rowvec(t.matmul(x, t.param(params_, prefix + ".ffn_w1")),
                              t.param(params_, prefix + ".ffn_b1")));
  return t.add_rowvec(t.matmul(h, t.param(params_, prefix + ".ffn_w2")),
                      t.param(params_, prefix + ".ffn_b2"));
}

Var AssociatorModel::refine_boxes(Tape& t, Var boxes, Var delta) {
  if (cfg_.logit_space_box_update)
    return t.sigmoid(t.add(delta, t.logit(boxes)));
  // Literal-space variant: clamp back into the valid coordinate range.
  const Eigen::Index n = boxes.rows();
  Var lo = t.input(Matrix::Constant(n, 4, 1e-5));
  Var hi = t.input(Matrix::Constant(n, 4, 1.0 - 1e-5));
  return t.cwise_min(t.cwise_max(t.add(boxes, delta), lo), hi);
}

Var AssociatorModel::attention(Tape& t, Var q_in, Var k_in, Var v_in,
                               const std::string& prefix,
                               Eigen::MatrixXd* attn_out) {
  const int d = cfg_.d_model;
  const int heads = cfg_.n_heads;
  const int dh = d / heads;
  Var q = t.matmul(q_in, t.param(params_, prefix + ".wq"));
  Var k = t.matmul(k_in, t.param(params_, prefix + ".wk"));
  Var v = t.matmul(v_in, t.param(params_, prefix + ".wv"));
  std::vector<Var> outputs;
  Matrix attn_sum;
  for (int h = 0; h < heads; ++h) {
    Var qh = t.slice_cols(q, h * dh, dh);
    Var kh = t.slice_cols(k, h * dh, dh);
    Var vh = t.slice_cols(v, h * dh, dh);
    Var logits = t.scale(t.matmul(qh, t.transpose(kh)),
                         1.0 / std::sqrt(static_cast<double>(dh)));
    Var weights = t.softmax_rows(logits);
    if (attn_out) {
      if (h == 0)
        attn_sum = weights.value();
      else
        attn_sum += weights.value();
    }
    outputs.push_back(t.matmul(weights, vh));
  }
  if (attn_out) *attn_out = attn_sum / static_cast<double>(heads);
  Var merged = heads == 1 ? outputs[0] : t.concat_cols(outputs);
  return t.matmul(merged, t.param(params_, prefix + ".wo"));
}

Var AssociatorModel::bii_attention(Tape& t, const AttentionBundle& bundle,
                                   const std::string& branch,
                                   Eigen::MatrixXd* attn_out) {
  if (branch != "det" && branch != "trk")
    throw std::invalid_argument("unknown BII branch: " + branch);
  if (bundle.k.rows() != bundle.v1.rows())
    throw std::invalid_argument("BII bundle: K and V1 row counts differ");
  if (bundle.q.rows() != bundle.v2.rows())
    throw std::invalid_argument("BII bundle: Q and V2 row counts differ");

  Var o1;
  if (cfg_.use_learned_projections) {
    o1 = attention(t, bundle.q, bundle.k, bundle.v1, branch, attn_out);
  } else {
    // Literal form: single head, no projections, scale by sqrt(d_model).
    Var logits = t.scale(t.matmul(bundle.q, t.transpose(bundle.k)),
                         1.0 / std::sqrt(static_cast<double>(cfg_.d_model)));
    Var weights = t.softmax_rows(logits);
    if (attn_out) *attn_out = weights.value();
    o1 = t.matmul(weights, bundle.v1);
  }
  Var o2 = layer_norm(t, t.add(o1, bundle.v2), branch + ".ln1_g",
                      branch + ".ln1_b");
  Var o3 = layer_norm(t, t.add(ffn(t, o2, branch), o2), branch + ".ln2_g",
                      branch + ".ln2_b");
  return o3;
}

Var AssociatorModel::update_detection_queries(Tape& t, Var det_content,
                                              Var det_full, Var trk_full,
                                              Var noisy,
                                              Eigen::MatrixXd* attn_out) {
  if (noisy.rows() != trk_full.rows())
    throw std::invalid_argument(
        "noisy query count must equal track query count");
  AttentionBundle bundle;
  bundle.q = det_full;
  bundle.k = t.concat_rows(det_full, trk_full);
  bundle.v1 = t.concat_rows(det_content, noisy);
  bundle.v2 = det_content;
  return bii_attention(t, bundle, "det", attn_out);
}

Var AssociatorModel::update_track_queries(Tape& t, Var trk_content,
                                          Var trk_full, Var det_content,
                                          Var det_full, Var history,
                                          Var trk_boxes,
                                          Eigen::MatrixXd* attn_out) {
  // The history queries reuse the track queries' positional part.
  Var hist_full = t.add(
      history, t.posenc_boxes(trk_boxes, cfg_.d_model, cfg_.temperature));
  AttentionBundle bundle;
  bundle.q = trk_full;
  bundle.k = t.concat_rows(det_full, hist_full);
  bundle.v1 = t.concat_rows(det_content, history);
  bundle.v2 = trk_content;
  return bii_attention(t, bundle, "trk", attn_out);
}

std::pair<Var, Var> AssociatorModel::cpa_align(Tape& t, Var content, Var boxes,
                                               Var features, Var positions,
                                               Var* aux_scores_out) {
  // Modulated positional query: the content decides, per channel, how much
  // of the box encoding enters the cross-attention query.
  Var pos = t.posenc_boxes(boxes, cfg_.d_model, cfg_.temperature);
  Var mod = t.sigmoid(t.add_rowvec(t.matmul(content, t.param(params_, "cpa.mod_w")),
                                   t.param(params_, "cpa.mod_b")));
  Var q_in = t.add(content, t.mul(pos, mod));
  Var memory_keys = t.add(features, positions);
  Var attended = attention(t, q_in, memory_keys, features, "cpa", nullptr);
  Var x = layer_norm(t, t.add(attended, content), "cpa.ln1_g", "cpa.ln1_b");
  Var aligned = layer_norm(t, t.add(ffn(t, x, "cpa"), x), "cpa.ln2_g",
                           "cpa.ln2_b");
  Var delta = t.add_rowvec(t.matmul(aligned, t.param(params_, "cpa.delta_w")),
                           t.param(params_, "cpa.delta_b"));
  Var new_boxes = refine_boxes(t, boxes, delta);
  if (aux_scores_out)
    *aux_scores_out = t.sigmoid(
        t.add_rowvec(t.matmul(aligned, t.param(params_, "cpa.score_w")),
                     t.param(params_, "cpa.score_b")));
  return {aligned, new_boxes};
}

AssociatorModel::Decoded AssociatorModel::decode(Tape& t, Var content,
                                                 Var boxes, Var features,
                                                 Var positions) {
  Var pos = t.posenc_boxes(boxes, cfg_.d_model, cfg_.temperature);
  Var full = t.add(content, pos);
  Var self_out = attention(t, full, full, content, "dec.self", nullptr);
  Var x = layer_norm(t, t.add(self_out, content), "dec.ln1_g", "dec.ln1_b");

  Var memory_keys = t.add(features, positions);
  Var cross_out =
      attention(t, t.add(x, pos), memory_keys, features, "dec.cross", nullptr);
  Var y = layer_norm(t, t.add(cross_out, x), "dec.ln2_g", "dec.ln2_b");
  Var z = layer_norm(t, t.add(ffn(t, y, "dec"), y), "dec.ln3_g", "dec.ln3_b");

  Decoded out;
  out.content = z;
  out.scores = t.sigmoid(t.add_rowvec(t.matmul(z, t.param(params_, "dec.score_w")),
                                      t.param(params_, "dec.score_b")));
  Var delta = t.add_rowvec(t.matmul(z, t.param(params_, "dec.box_w")),
                           t.param(params_, "dec.box_b"));
  out.boxes = refine_boxes(t, boxes, delta);
  return out;
}

FrameOutputs AssociatorModel::step_frame(Tape& t, const FrameInputs& frame,
                                         const TrackStateVars* tracks) {
  if (frame.det_content.valid() &&
      frame.det_content.rows() !=
          static_cast<Eigen::Index>(frame.det_scores.size()))
    throw std::invalid_argument("detection scores/content count mismatch");

  FrameOutputs out;
  for (size_t i = 0; i < frame.det_scores.size(); ++i) {
    (frame.det_scores[i] >= cfg_.tau_q ? out.kept : out.rejected)
        .push_back(static_cast<int>(i));
  }
  const Eigen::Index n_tracks = tracks ? tracks->rows() : 0;
  out.n_tracks = n_tracks;

  Var kept_content = t.select_rows(frame.det_content, out.kept);
  Var kept_boxes = t.select_rows(frame.det_boxes, out.kept);

  if (n_tracks == 0) {
    // First-frame path: no interaction partners, decode detections directly.
    Decoded decoded =
        decode(t, kept_content, kept_boxes, frame.features, frame.positions);
    out.content = decoded.content;
    out.boxes = decoded.boxes;
    out.scores = decoded.scores;
    return out;
  }

  // Hard negatives for the detection branch.
  Matrix noisy = Matrix::Zero(n_tracks, cfg_.d_model);
  if (cfg_.noisy_mode != AssociatorConfig::NoisyMode::kZeros) {
    const Matrix& det_values = frame.det_content.value();
    std::vector<int> pool;
    if (cfg_.noisy_mode == AssociatorConfig::NoisyMode::kHardRejected) {
      pool = out.rejected;
    } else {
      pool = out.kept;
      pool.insert(pool.end(), out.rejected.begin(), out.rejected.end());
    }
    std::stable_sort(pool.begin(), pool.end(), [&](int a, int b) {
      return frame.det_scores[static_cast<size_t>(a)] >
             frame.det_scores[static_cast<size_t>(b)];
    });
    const Eigen::Index take =
        std::min<Eigen::Index>(n_tracks, static_cast<Eigen::Index>(pool.size()));
    for (Eigen::Index i = 0; i < take; ++i)
      noisy.row(i) = det_values.row(pool[static_cast<size_t>(i)]);
  }
  Var noisy_var = t.input(std::move(noisy));

  Var det_full = assemble_full(t, kept_content, kept_boxes);
  Var trk_full = assemble_full(t, tracks->content, tracks->boxes);

  Var new_det = update_detection_queries(t, kept_content, det_full, trk_full,
                                         noisy_var, &out.det_attention);
  Var new_trk = update_track_queries(t, tracks->content, trk_full,
                                     kept_content, det_full, tracks->history,
                                     tracks->boxes, &out.trk_attention);

  // Decoder slot order: track slots first, then kept detections.
  Var combined_content = t.concat_rows(new_trk, new_det);
  Var combined_boxes = t.concat_rows(tracks->boxes, kept_boxes);

  Var aux_scores;
  auto [aligned, aligned_boxes] =
      cpa_align(t, combined_content, combined_boxes, frame.features,
                frame.positions, &aux_scores);
  out.aux_boxes = aligned_boxes;
  out.aux_scores = aux_scores;

  Decoded decoded =
      decode(t, aligned, aligned_boxes, frame.features, frame.positions);
  out.content = decoded.content;
  out.boxes = decoded.boxes;
  out.scores = decoded.scores;
  return out;
}

Var AssociatorModel::ema_update(Tape& t, Var t_new, Var h_prev) {
  return t.add(t.scale(t_new, cfg_.ema_weight),
               t.scale(h_prev, 1.0 - cfg_.ema_weight));
}

}  // namespace qtrack::assoc
