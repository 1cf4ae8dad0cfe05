#include "qtrack/detsim.hpp"

#include <cmath>
#include <set>

#include "doctest.h"
#include "qtrack/posenc.hpp"

namespace sim = qtrack::sim;

namespace {

sim::SceneConfig basic_config(sim::MotionFamily motion, int objects,
                              int frames) {
  sim::SceneConfig c;
  c.min_objects = objects;
  c.max_objects = objects;
  c.frame_count = frames;
  c.motion = motion;
  return c;
}

bool sequences_equal(const sim::GroundTruthSequence& a,
                     const sim::GroundTruthSequence& b) {
  if (a.frames.size() != b.frames.size()) return false;
  for (size_t f = 0; f < a.frames.size(); ++f) {
    if (a.frames[f].size() != b.frames[f].size()) return false;
    for (size_t o = 0; o < a.frames[f].size(); ++o) {
      const auto& x = a.frames[f][o];
      const auto& y = b.frames[f][o];
      if (x.identity != y.identity || x.visible != y.visible) return false;
      if (x.box.cx != y.box.cx || x.box.cy != y.box.cy ||
          x.box.w != y.box.w || x.box.h != y.box.h)
        return false;
    }
  }
  if (a.appearance.size() != b.appearance.size()) return false;
  for (const auto& [id, latent] : a.appearance)
    if (latent != b.appearance.at(id)) return false;
  return true;
}

}  // namespace

TEST_CASE("zero occlusion keeps every object visible in every frame") {
  for (auto motion : {sim::MotionFamily::kLinear, sim::MotionFamily::kSinusoidal,
                      sim::MotionFamily::kCrossing}) {
    const auto seq = sim::generate_sequence(basic_config(motion, 4, 25), 7);
    REQUIRE(seq.frames.size() == 25);
    for (const auto& frame : seq.frames) {
      REQUIRE(frame.size() == 4);
      std::set<int> ids;
      for (const auto& obj : frame) {
        CHECK(obj.visible);
        CHECK(obj.box.valid());
        ids.insert(obj.identity);
      }
      CHECK(ids.size() == 4);  // an identity never repeats within a frame
    }
  }
}

TEST_CASE("generation is deterministic in (config, seed)") {
  const auto cfg = basic_config(sim::MotionFamily::kSinusoidal, 3, 20);
  const auto a = sim::generate_sequence(cfg, 99);
  const auto b = sim::generate_sequence(cfg, 99);
  CHECK(sequences_equal(a, b));
  const auto c = sim::generate_sequence(cfg, 100);
  CHECK_FALSE(sequences_equal(a, c));
}

TEST_CASE("occlusion windows appear at positive occlusion rates") {
  auto cfg = basic_config(sim::MotionFamily::kLinear, 5, 40);
  cfg.occlusion_rate = 0.15;
  const auto seq = sim::generate_sequence(cfg, 3);
  int invisible = 0;
  for (const auto& frame : seq.frames)
    for (const auto& obj : frame) invisible += obj.visible ? 0 : 1;
  CHECK(invisible > 0);
}

TEST_CASE("crossing scenes contain a meet-then-separate pair") {
  // Brute-force scan over all pairs and frames, per the generator contract.
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 17ULL, 123ULL}) {
    const auto seq =
        sim::generate_sequence(basic_config(sim::MotionFamily::kCrossing, 2, 30),
                               seed);
    bool found = false;
    int met = -1;
    for (size_t f = 0; f < seq.frames.size() && !found; ++f) {
      const double v = qtrack::iou(seq.frames[f][0].box, seq.frames[f][1].box);
      if (met < 0 && v > 0.5) met = static_cast<int>(f);
      if (met >= 0 && static_cast<int>(f) > met && v < 0.5) found = true;
    }
    CHECK(found);
  }
}

TEST_CASE("generation rejects bad configs") {
  CHECK_THROWS_AS(
      sim::generate_sequence(basic_config(sim::MotionFamily::kLinear, 3, 0), 1),
      std::invalid_argument);
  CHECK_THROWS_AS(
      sim::generate_sequence(basic_config(sim::MotionFamily::kLinear, 0, 10), 1),
      std::invalid_argument);
  auto bad = basic_config(sim::MotionFamily::kLinear, 3, 10);
  bad.max_objects = 2;
  CHECK_THROWS_AS(sim::generate_sequence(bad, 1), std::invalid_argument);
}

TEST_CASE("noise-free detection reproduces every visible box exactly") {
  const auto seq =
      sim::generate_sequence(basic_config(sim::MotionFamily::kLinear, 4, 10), 5);
  sim::NoiseConfig noise;
  noise.box_jitter = 0.0;
  noise.miss_prob = 0.0;
  noise.fp_rate = 0.0;
  const auto obs = sim::detect(seq, 3, noise, 11);
  REQUIRE(obs.detections.size() == 4);
  // Each ground-truth box appears exactly once (order is score-sorted).
  for (const auto& obj : seq.frames[3]) {
    int hits = 0;
    for (const auto& det : obs.detections)
      if (det.box.cx == obj.box.cx && det.box.cy == obj.box.cy &&
          det.box.w == obj.box.w && det.box.h == obj.box.h)
        ++hits;
    CHECK(hits == 1);
  }
  for (size_t i = 1; i < obs.detections.size(); ++i)
    CHECK(obs.detections[i - 1].score >= obs.detections[i].score);
}

TEST_CASE("certain misses leave the detections empty but tokens present") {
  const auto seq =
      sim::generate_sequence(basic_config(sim::MotionFamily::kLinear, 3, 5), 2);
  sim::NoiseConfig noise;
  noise.miss_prob = 1.0;
  noise.fp_rate = 0.0;
  const auto obs = sim::detect(seq, 0, noise, 1);
  CHECK(obs.detections.empty());
  CHECK(obs.features.rows() == noise.grid_h * noise.grid_w);
  CHECK(obs.features.cols() == noise.d_model);
  CHECK(obs.positions.rows() == obs.features.rows());
  CHECK(obs.features.cwiseAbs().maxCoeff() > 0.0);  // background content
}

TEST_CASE("box jitter matches the half-normal mean over 1000 draws") {
  const auto seq =
      sim::generate_sequence(basic_config(sim::MotionFamily::kLinear, 1, 2), 13);
  sim::NoiseConfig noise;
  noise.box_jitter = 0.01;
  noise.miss_prob = 0.0;
  noise.fp_rate = 0.0;
  const auto& gt = seq.frames[0][0].box;
  double abs_err = 0.0;
  int n = 0;
  for (int draw = 0; draw < 1000; ++draw) {
    const auto obs = sim::detect(seq, 0, noise, 1000 + draw);
    REQUIRE(obs.detections.size() == 1);
    const auto& b = obs.detections[0].box;
    abs_err += std::abs(b.cx - gt.cx) + std::abs(b.cy - gt.cy) +
               std::abs(b.w - gt.w) + std::abs(b.h - gt.h);
    n += 4;
  }
  // E|N(0, 0.01)| = 0.01 * sqrt(2/pi) ~ 0.00798.
  const double mean = abs_err / n;
  CHECK(mean > 0.006);
  CHECK(mean < 0.010);
}

TEST_CASE("true detections outscore false positives in expectation") {
  const auto seq =
      sim::generate_sequence(basic_config(sim::MotionFamily::kLinear, 1, 2), 21);
  sim::NoiseConfig noise;
  noise.box_jitter = 0.0;  // exact boxes let the test identify the true one
  noise.miss_prob = 0.0;
  noise.fp_rate = 1.0;
  const auto& gt = seq.frames[0][0].box;
  double true_sum = 0.0, fp_sum = 0.0;
  int true_n = 0, fp_n = 0;
  for (int draw = 0; draw < 10000 && (true_n < 10000 || fp_n < 10000); ++draw) {
    const auto obs = sim::detect(seq, 0, noise, 50000 + draw);
    for (const auto& det : obs.detections) {
      const bool is_true = det.box.cx == gt.cx && det.box.cy == gt.cy &&
                           det.box.w == gt.w && det.box.h == gt.h;
      (is_true ? true_sum : fp_sum) += det.score;
      (is_true ? true_n : fp_n) += 1;
    }
  }
  REQUIRE(true_n >= 1000);
  REQUIRE(fp_n >= 1000);
  // Beta(8,2) mean 0.8 vs Beta(2,5) mean ~0.286.
  CHECK(true_sum / true_n > fp_sum / fp_n + 0.3);
}

TEST_CASE("detection content never repeats across frames for one identity") {
  const auto seq =
      sim::generate_sequence(basic_config(sim::MotionFamily::kLinear, 1, 6), 31);
  sim::NoiseConfig noise;
  noise.miss_prob = 0.0;
  noise.fp_rate = 0.0;
  std::vector<Eigen::VectorXd> contents;
  for (int f = 0; f < 6; ++f) {
    const auto obs = sim::detect(seq, f, noise, 700 + f);
    REQUIRE(obs.detections.size() == 1);
    contents.push_back(obs.detections[0].content);
  }
  for (size_t i = 0; i < contents.size(); ++i)
    for (size_t j = i + 1; j < contents.size(); ++j)
      CHECK((contents[i] - contents[j]).norm() > 1e-9);
}

TEST_CASE("detection is deterministic and observation shapes follow config") {
  const auto seq = sim::generate_sequence(
      basic_config(sim::MotionFamily::kSinusoidal, 3, 8), 8);
  sim::NoiseConfig noise;
  noise.grid_h = 4;
  noise.grid_w = 6;
  noise.d_model = 32;
  const auto a = sim::detect(seq, 2, noise, 42);
  const auto b = sim::detect(seq, 2, noise, 42);
  REQUIRE(a.detections.size() == b.detections.size());
  for (size_t i = 0; i < a.detections.size(); ++i) {
    CHECK(a.detections[i].score == b.detections[i].score);
    CHECK(a.detections[i].content == b.detections[i].content);
  }
  CHECK(a.features == b.features);
  CHECK(a.features.rows() == 24);
  CHECK(a.features.cols() == 32);
  CHECK(a.positions == qtrack::encode_grid_positions(4, 6, 32));
  for (const auto& det : a.detections) {
    CHECK(det.score >= 0.0);
    CHECK(det.score <= 1.0);
    CHECK(det.box.valid());
    CHECK(det.content.size() == 32);
  }

  const auto all = sim::detect_all(seq, noise, 42);
  CHECK(all.size() == 8);
}

TEST_CASE("occupied grid cells stand out from the background") {
  const auto seq =
      sim::generate_sequence(basic_config(sim::MotionFamily::kLinear, 3, 4), 55);
  sim::NoiseConfig noise;
  const auto obs = sim::detect(seq, 1, noise, 9);
  std::set<int> occupied;
  for (const auto& obj : seq.frames[1]) {
    const int gx = std::min(noise.grid_w - 1,
                            static_cast<int>(obj.box.cx * noise.grid_w));
    const int gy = std::min(noise.grid_h - 1,
                            static_cast<int>(obj.box.cy * noise.grid_h));
    occupied.insert(gy * noise.grid_w + gx);
  }
  double min_occupied = 1e9, max_empty = 0.0;
  for (int t = 0; t < obs.features.rows(); ++t) {
    const double norm = obs.features.row(t).norm();
    if (occupied.count(t))
      min_occupied = std::min(min_occupied, norm);
    else
      max_empty = std::max(max_empty, norm);
  }
  CHECK(min_occupied > max_empty);
}
