#include "qtrack/detsim.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "qtrack/posenc.hpp"

namespace qtrack::sim {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// splitmix64: decorrelates derived seeds from a base seed.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double sample_beta(std::mt19937_64& rng, double a, double b) {
  std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
  const double x = ga(rng), y = gb(rng);
  return x / (x + y);
}

double clamp(double v, double lo, double hi) {
  return std::min(std::max(v, lo), hi);
}

void validate(const SceneConfig& c) {
  if (c.frame_count <= 0)
    throw std::invalid_argument("frame_count must be positive");
  if (c.min_objects <= 0 || c.max_objects < c.min_objects)
    throw std::invalid_argument("object count range must be positive");
  if (c.d_app <= 0) throw std::invalid_argument("d_app must be positive");
}

struct Trajectory {
  std::vector<BoundingBox> boxes;  // one per frame
};

std::vector<Trajectory> make_linear(std::mt19937_64& rng, int n_objects,
                                    int frames) {
  std::uniform_real_distribution<double> usize(0.08, 0.2);
  std::uniform_real_distribution<double> upos(0.15, 0.85);
  std::uniform_real_distribution<double> uvel(-0.02, 0.02);
  std::vector<Trajectory> out(static_cast<size_t>(n_objects));
  for (auto& tr : out) {
    const double w = usize(rng), h = usize(rng);
    double cx = upos(rng), cy = upos(rng);
    double vx = uvel(rng), vy = uvel(rng);
    tr.boxes.reserve(static_cast<size_t>(frames));
    for (int f = 0; f < frames; ++f) {
      tr.boxes.push_back({cx, cy, w, h});
      cx += vx;
      cy += vy;
      // Bounce off soft walls so boxes stay well inside the frame.
      if (cx < 0.1 || cx > 0.9) vx = -vx, cx = clamp(cx, 0.1, 0.9);
      if (cy < 0.1 || cy > 0.9) vy = -vy, cy = clamp(cy, 0.1, 0.9);
    }
  }
  return out;
}

std::vector<Trajectory> make_sinusoidal(std::mt19937_64& rng, int n_objects,
                                        int frames) {
  std::uniform_real_distribution<double> usize(0.08, 0.2);
  std::uniform_real_distribution<double> upos(0.15, 0.85);
  std::uniform_real_distribution<double> uvel(-0.015, 0.015);
  std::uniform_real_distribution<double> uamp(0.05, 0.15);
  std::uniform_real_distribution<double> ufreq(0.02, 0.08);
  std::uniform_real_distribution<double> uphase(0.0, kTwoPi);
  std::vector<Trajectory> out(static_cast<size_t>(n_objects));
  for (auto& tr : out) {
    const double w = usize(rng), h = usize(rng);
    double cx = upos(rng);
    const double cy0 = upos(rng);
    double vx = uvel(rng);
    const double amp = uamp(rng), freq = ufreq(rng), phase = uphase(rng);
    tr.boxes.reserve(static_cast<size_t>(frames));
    for (int f = 0; f < frames; ++f) {
      const double cy =
          clamp(cy0 + amp * std::sin(kTwoPi * freq * f + phase), 0.05, 0.95);
      tr.boxes.push_back({cx, cy, w, h});
      cx += vx;
      if (cx < 0.1 || cx > 0.9) vx = -vx, cx = clamp(cx, 0.1, 0.9);
    }
  }
  return out;
}

// Pairs of equal-size boxes swap sides along a shared lane; the relative
// per-frame step stays below size/3, so some frame has IoU > 0.5, and they
// end far enough apart to separate again.
std::vector<Trajectory> make_crossing(std::mt19937_64& rng, int n_objects,
                                      int frames) {
  std::uniform_real_distribution<double> usize(0.14, 0.18);
  std::uniform_real_distribution<double> ujit(-0.005, 0.005);
  std::vector<Trajectory> out(static_cast<size_t>(n_objects));
  const int n_pairs = n_objects / 2;
  // Meet around 60% of the clip; relative step 0.7 / (0.6 * frames).
  const double v = 0.35 / (0.6 * frames);
  for (int p = 0; p < n_pairs; ++p) {
    const double lane =
        n_pairs == 1 ? 0.5 : 0.2 + 0.6 * p / static_cast<double>(n_pairs - 1);
    const double s = usize(rng);
    const double ya = clamp(lane + ujit(rng), 0.1, 0.9);
    const double yb = clamp(lane + ujit(rng), 0.1, 0.9);
    Trajectory& a = out[static_cast<size_t>(2 * p)];
    Trajectory& b = out[static_cast<size_t>(2 * p + 1)];
    for (int f = 0; f < frames; ++f) {
      a.boxes.push_back({clamp(0.15 + v * f, 0.05, 0.95), ya, s, s});
      b.boxes.push_back({clamp(0.85 - v * f, 0.05, 0.95), yb, s, s});
    }
  }
  if (n_objects % 2 == 1) {
    auto extra = make_linear(rng, 1, frames);
    out.back() = std::move(extra.front());
  }
  return out;
}

// A crossing scene must contain a pair that meets (IoU > 0.5) and then
// separates below 0.5 in a later frame.
bool has_crossing(const std::vector<Trajectory>& trajs, int frames) {
  for (size_t i = 0; i < trajs.size(); ++i) {
    for (size_t j = i + 1; j < trajs.size(); ++j) {
      int met = -1;
      for (int f = 0; f < frames; ++f) {
        const double v = iou(trajs[i].boxes[static_cast<size_t>(f)],
                             trajs[j].boxes[static_cast<size_t>(f)]);
        if (met < 0 && v > 0.5) met = f;
        if (met >= 0 && f > met && v < 0.5) return true;
      }
    }
  }
  return false;
}

GroundTruthSequence generate_attempt(const SceneConfig& config,
                                     std::uint64_t seed,
                                     std::uint64_t salt) {
  std::mt19937_64 rng(mix_seed(seed, salt));
  std::uniform_int_distribution<int> count(config.min_objects,
                                           config.max_objects);
  const int n_objects = count(rng);

  std::vector<Trajectory> trajs;
  switch (config.motion) {
    case MotionFamily::kLinear:
      trajs = make_linear(rng, n_objects, config.frame_count);
      break;
    case MotionFamily::kSinusoidal:
      trajs = make_sinusoidal(rng, n_objects, config.frame_count);
      break;
    case MotionFamily::kCrossing:
      trajs = make_crossing(rng, n_objects, config.frame_count);
      break;
  }

  GroundTruthSequence seq;
  seq.seed = seed;
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int id = 1; id <= n_objects; ++id) {
    Eigen::VectorXd latent(config.d_app);
    for (int k = 0; k < config.d_app; ++k) latent(k) = gauss(rng);
    seq.appearance.emplace(id, std::move(latent));
  }

  // Occlusion is a two-state Markov chain per object: a visible object goes
  // occluded with probability occlusion_rate and recovers with probability
  // 0.4, giving short contiguous invisibility windows.
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<bool> visible(static_cast<size_t>(n_objects), true);
  seq.frames.resize(static_cast<size_t>(config.frame_count));
  for (int f = 0; f < config.frame_count; ++f) {
    auto& frame = seq.frames[static_cast<size_t>(f)];
    for (int o = 0; o < n_objects; ++o) {
      if (f > 0 && config.occlusion_rate > 0.0) {
        if (visible[static_cast<size_t>(o)]) {
          if (u01(rng) < config.occlusion_rate)
            visible[static_cast<size_t>(o)] = false;
        } else if (u01(rng) < 0.4) {
          visible[static_cast<size_t>(o)] = true;
        }
      }
      frame.push_back({o + 1,
                       trajs[static_cast<size_t>(o)]
                           .boxes[static_cast<size_t>(f)],
                       visible[static_cast<size_t>(o)]});
    }
  }
  return seq;
}

}  // namespace

GroundTruthSequence generate_sequence(const SceneConfig& config,
                                      std::uint64_t seed) {
  validate(config);
  for (std::uint64_t salt = 0; salt < 32; ++salt) {
    GroundTruthSequence seq = generate_attempt(config, seed, salt);
    if (config.motion != MotionFamily::kCrossing) return seq;
    // Re-check the crossing guarantee on the final (possibly occluded) boxes.
    std::vector<Trajectory> trajs(seq.frames.front().size());
    for (const auto& frame : seq.frames)
      for (size_t o = 0; o < frame.size(); ++o)
        trajs[o].boxes.push_back(frame[o].box);
    if (has_crossing(trajs, config.frame_count)) return seq;
  }
  throw std::logic_error("crossing scene never produced a valid crossing");
}

FrameObservation detect(const GroundTruthSequence& sequence, int frame_index,
                        const NoiseConfig& noise, std::uint64_t seed) {
  if (frame_index < 0 ||
      frame_index >= static_cast<int>(sequence.frames.size()))
    throw std::out_of_range("frame_index out of range");
  if (sequence.appearance.empty())
    throw std::invalid_argument("sequence has no appearance latents");
  const int d_app =
      static_cast<int>(sequence.appearance.begin()->second.size());

  // Frozen "detector weights": regenerated from detector_seed so detect() is
  // a pure function.
  std::mt19937_64 wrng(noise.detector_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd proj(noise.d_model, d_app);
  for (Eigen::Index i = 0; i < proj.rows(); ++i)
    for (Eigen::Index j = 0; j < proj.cols(); ++j)
      proj(i, j) = gauss(wrng) / std::sqrt(static_cast<double>(d_app));
  Eigen::VectorXd occupancy_token(noise.d_model);
  for (int k = 0; k < noise.d_model; ++k) occupancy_token(k) = gauss(wrng);
  occupancy_token.normalize();

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  FrameObservation obs;

  const auto& frame = sequence.frames[static_cast<size_t>(frame_index)];
  for (const GroundTruthObject& obj : frame) {
    if (!obj.visible) continue;
    if (u01(rng) < noise.miss_prob) continue;
    Detection det;
    det.box.cx = clamp(obj.box.cx + noise.box_jitter * gauss(rng), 0.0, 1.0);
    det.box.cy = clamp(obj.box.cy + noise.box_jitter * gauss(rng), 0.0, 1.0);
    det.box.w = clamp(obj.box.w + noise.box_jitter * gauss(rng), 1e-3, 1.0);
    det.box.h = clamp(obj.box.h + noise.box_jitter * gauss(rng), 1e-3, 1.0);
    det.score = sample_beta(rng, 8.0, 2.0);
    Eigen::VectorXd latent = sequence.appearance.at(obj.identity);
    for (int k = 0; k < d_app; ++k) latent(k) += noise.content_noise * gauss(rng);
    det.content = proj * latent;
    obs.detections.push_back(std::move(det));
  }

  if (noise.fp_rate > 0.0) {
    std::poisson_distribution<int> fp_count(noise.fp_rate);
    const int n_fp = fp_count(rng);
    for (int k = 0; k < n_fp; ++k) {
      Detection det;
      det.box.w = 0.05 + 0.2 * u01(rng);
      det.box.h = 0.05 + 0.2 * u01(rng);
      det.box.cx = 0.1 + 0.8 * u01(rng);
      det.box.cy = 0.1 + 0.8 * u01(rng);
      det.score = sample_beta(rng, 2.0, 5.0);
      Eigen::VectorXd latent(d_app);
      for (int j = 0; j < d_app; ++j) latent(j) = gauss(rng);
      det.content = proj * latent;
      obs.detections.push_back(std::move(det));
    }
  }

  // Detectors hand over score-sorted outputs; this also avoids leaking
  // "true first, false later" ordering.
  std::stable_sort(obs.detections.begin(), obs.detections.end(),
                   [](const Detection& a, const Detection& b) {
                     return a.score > b.score;
                   });

  // Global memory tokens: per-cell occupancy direction plus pooled projected
  // appearance of the objects centered there, over a low background noise
  // floor; always emitted, even for empty frames.
  const int n_tokens = noise.grid_h * noise.grid_w;
  obs.features.setZero(n_tokens, noise.d_model);
  for (int t = 0; t < n_tokens; ++t)
    for (int k = 0; k < noise.d_model; ++k)
      obs.features(t, k) = 0.02 * gauss(rng);
  std::vector<int> cell_count(static_cast<size_t>(n_tokens), 0);
  Eigen::MatrixXd cell_app = Eigen::MatrixXd::Zero(n_tokens, d_app);
  for (const GroundTruthObject& obj : frame) {
    if (!obj.visible) continue;
    const int gx = std::min(noise.grid_w - 1,
                            static_cast<int>(obj.box.cx * noise.grid_w));
    const int gy = std::min(noise.grid_h - 1,
                            static_cast<int>(obj.box.cy * noise.grid_h));
    const int cell = gy * noise.grid_w + gx;
    cell_count[static_cast<size_t>(cell)] += 1;
    cell_app.row(cell) += sequence.appearance.at(obj.identity).transpose();
  }
  for (int t = 0; t < n_tokens; ++t) {
    const int c = cell_count[static_cast<size_t>(t)];
    if (c == 0) continue;
    obs.features.row(t) += c * occupancy_token.transpose() +
                           (proj * (cell_app.row(t).transpose() / c)).transpose();
  }
  obs.positions =
      encode_grid_positions(noise.grid_h, noise.grid_w, noise.d_model);
  return obs;
}

std::vector<FrameObservation> detect_all(const GroundTruthSequence& sequence,
                                         const NoiseConfig& noise,
                                         std::uint64_t seed) {
  std::vector<FrameObservation> out;
  out.reserve(sequence.frames.size());
  for (size_t f = 0; f < sequence.frames.size(); ++f)
    out.push_back(detect(sequence, static_cast<int>(f), noise,
                         mix_seed(seed, static_cast<std::uint64_t>(f))));
  return out;
}

}  // namespace qtrack::sim
