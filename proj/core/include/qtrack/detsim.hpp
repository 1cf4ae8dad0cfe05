#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <vector>

#include "qtrack/box.hpp"

namespace qtrack::sim {

enum class MotionFamily { kLinear, kSinusoidal, kCrossing };

/// Scene recipe for the synthetic generator. Deterministic given a seed.
struct SceneConfig {
  int min_objects = 3;
  int max_objects = 6;
  int frame_count = 30;
  MotionFamily motion = MotionFamily::kLinear;
  /// Per-frame probability that a visible object starts an occlusion window.
  double occlusion_rate = 0.0;
  /// Latent appearance dimensionality carried per identity.
  int d_app = 16;
};

struct GroundTruthObject {
  int identity = 0;
  BoundingBox box;
  bool visible = true;
};

struct GroundTruthSequence {
  std::vector<std::vector<GroundTruthObject>> frames;
  std::map<int, Eigen::VectorXd> appearance;  // identity -> latent [d_app]
  std::uint64_t seed = 0;
};

struct Detection {
  BoundingBox box;
  double score = 0.0;
  Eigen::VectorXd content;  // [d_model]
};

/// One frame of the emulated frozen detector: detections plus the global
/// memory tokens (features F with grid positions P) the associator attends to.
struct FrameObservation {
  std::vector<Detection> detections;
  Eigen::MatrixXd features;   // n_tokens x d_model
  Eigen::MatrixXd positions;  // n_tokens x d_model
};

/// Detector noise model. The projection from appearance space to content
/// space is fixed by detector_seed, emulating frozen detector weights.
struct NoiseConfig {
  double box_jitter = 0.01;     // per-coordinate Gaussian sigma
  double miss_prob = 0.05;      // drop probability per visible object
  double fp_rate = 0.3;         // mean false positives per frame (Poisson)
  double content_noise = 0.1;   // appearance noise sigma before projection
  int d_model = 64;
  int grid_h = 8;
  int grid_w = 8;
  std::uint64_t detector_seed = 1234;
};

/// Deterministic synthetic scene. Crossing scenes are post-checked to contain
/// at least one pair whose boxes meet at IoU > 0.5 and later separate.
GroundTruthSequence generate_sequence(const SceneConfig& config,
                                      std::uint64_t seed);

/// Emulated detector inference over one ground-truth frame. True detections
/// carry projected (appearance + noise) content and Beta(8,2) scores; false
/// positives carry fresh content and Beta(2,5) scores. Identity is never
/// encoded in the observation.
FrameObservation detect(const GroundTruthSequence& sequence, int frame_index,
                        const NoiseConfig& noise, std::uint64_t seed);

/// All frames of a sequence, with per-frame seeds derived from `seed`.
std::vector<FrameObservation> detect_all(const GroundTruthSequence& sequence,
                                         const NoiseConfig& noise,
                                         std::uint64_t seed);

}  // namespace qtrack::sim
