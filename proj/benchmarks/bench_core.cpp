#include <benchmark/benchmark.h>

#include <random>

#include "qtrack/baseline.hpp"
#include "qtrack/detsim.hpp"
#include "qtrack/hungarian.hpp"
#include "qtrack/metrics.hpp"
#include "qtrack/posenc.hpp"
#include "qtrack/tape.hpp"
#include "qtrack/tracker.hpp"
#include "qtrack/training.hpp"

namespace {

Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index r,
                              Eigen::Index c, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = u(rng);
  return m;
}

}  // namespace

static void BM_EncodeBoxPositions(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd boxes =
      random_matrix(rng, state.range(0), 4, 0.1, 0.9);
  for (auto _ : state) {
    benchmark::DoNotOptimize(qtrack::encode_box_positions(boxes, 64));
  }
}
BENCHMARK(BM_EncodeBoxPositions)->Arg(8)->Arg(64);

static void BM_MinCostAssignment(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd cost =
      random_matrix(rng, state.range(0), state.range(0), 0.0, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(qtrack::min_cost_assignment(cost));
  }
}
BENCHMARK(BM_MinCostAssignment)->Arg(8)->Arg(32)->Arg(128);

static void BM_GatedMaxMatch(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd score =
      random_matrix(rng, state.range(0), state.range(0), 0.0, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(qtrack::gated_max_match(score, 0.5));
  }
}
BENCHMARK(BM_GatedMaxMatch)->Arg(4)->Arg(8)->Arg(16);

// Attention-shaped forward + backward through the tape: the inner loop of
// every training step.
static void BM_TapeAttentionGrad(benchmark::State& state) {
  std::mt19937_64 rng(4);
  const Eigen::Index n = state.range(0), d = 64;
  const Eigen::MatrixXd q = random_matrix(rng, n, d, -1.0, 1.0);
  const Eigen::MatrixXd k = random_matrix(rng, n, d, -1.0, 1.0);
  const Eigen::MatrixXd v = random_matrix(rng, n, d, -1.0, 1.0);
  for (auto _ : state) {
    qtrack::ad::Tape t;
    auto logits = t.scale(t.matmul(t.input(q), t.transpose(t.input(k))),
                          1.0 / std::sqrt(double(d)));
    auto out = t.matmul(t.softmax_rows(logits), t.input(v));
    auto loss = t.sum(t.mul(out, out));
    t.backward(loss);
    benchmark::DoNotOptimize(t.gradient(loss));
  }
}
BENCHMARK(BM_TapeAttentionGrad)->Arg(8)->Arg(32);

namespace {

/// Shared synthetic stream: `objects` identities over `frames` frames with
/// default detector noise at the given width.
std::pair<qtrack::sim::GroundTruthSequence,
          std::vector<qtrack::sim::FrameObservation>>
make_stream(int objects, int frames, int d_model) {
  qtrack::sim::SceneConfig scene;
  scene.min_objects = objects;
  scene.max_objects = objects;
  scene.frame_count = frames;
  scene.motion = qtrack::sim::MotionFamily::kCrossing;
  qtrack::sim::NoiseConfig noise;
  noise.d_model = d_model;
  auto gt = qtrack::sim::generate_sequence(scene, 11);
  auto obs = qtrack::sim::detect_all(gt, noise, 12);
  return {std::move(gt), std::move(obs)};
}

}  // namespace

// Full online inference at production width: gate, interact, align, decode,
// lifecycle -- per frame cost = total / iterations / frames.
static void BM_RunTracker(benchmark::State& state) {
  const int frames = static_cast<int>(state.range(0));
  auto [gt, obs] = make_stream(6, frames, 64);
  qtrack::assoc::AssociatorConfig cfg;  // defaults: d=64, 8 heads
  qtrack::assoc::AssociatorModel model(cfg, 5);
  qtrack::track::LifecycleConfig lc;
  for (auto _ : state) {
    benchmark::DoNotOptimize(qtrack::track::run_tracker(model, obs, lc));
  }
  state.SetItemsProcessed(state.iterations() * frames);
}
BENCHMARK(BM_RunTracker)->Arg(10)->Arg(30);

// One training step minus the optimizer: differentiable clip rollout,
// assignment, collective loss, backward pass.
static void BM_ClipLossGrad(benchmark::State& state) {
  const int clip_length = static_cast<int>(state.range(0));
  auto [gt, obs] = make_stream(5, 20, 64);
  qtrack::train::TrainingSequence seq{std::move(gt), std::move(obs)};
  std::mt19937_64 rng(6);
  qtrack::train::ClipSample clip =
      qtrack::train::sample_clip(seq, clip_length, rng);
  qtrack::train::ClipAugmentation aug =
      qtrack::train::augment_clip(clip, 0.1, 0.1, 7);
  qtrack::assoc::AssociatorConfig cfg;
  qtrack::assoc::AssociatorModel model(cfg, 8);
  qtrack::train::LossWeights w;
  for (auto _ : state) {
    qtrack::ad::Tape tape;
    qtrack::train::ClipLoss loss =
        qtrack::train::clip_loss(model, tape, clip, aug, w);
    tape.backward(loss.total);
    benchmark::DoNotOptimize(loss.breakdown.total);
  }
}
BENCHMARK(BM_ClipLossGrad)->Arg(2)->Arg(9);

// The whole evaluation suite (19-threshold HOTA + CLEAR + IDF1) on a
// greedy-tracked noisy sequence.
static void BM_EvaluateMetrics(benchmark::State& state) {
  const int frames = static_cast<int>(state.range(0));
  auto [gt, obs] = make_stream(6, frames, 16);
  qtrack::metrics::TrackSet gt_set = qtrack::metrics::from_ground_truth(gt);
  qtrack::baseline::GreedyConfig greedy;
  qtrack::metrics::TrackSet pred = qtrack::metrics::from_records(
      qtrack::baseline::greedy_track(obs, greedy), frames);
  for (auto _ : state) {
    benchmark::DoNotOptimize(qtrack::metrics::evaluate(gt_set, pred));
  }
}
BENCHMARK(BM_EvaluateMetrics)->Arg(50)->Arg(200);

// IoU-greedy baseline throughput, for contrast with BM_RunTracker.
static void BM_GreedyTrack(benchmark::State& state) {
  const int frames = static_cast<int>(state.range(0));
  auto [gt, obs] = make_stream(6, frames, 16);
  qtrack::baseline::GreedyConfig greedy;
  for (auto _ : state) {
    benchmark::DoNotOptimize(qtrack::baseline::greedy_track(obs, greedy));
  }
  state.SetItemsProcessed(state.iterations() * frames);
}
BENCHMARK(BM_GreedyTrack)->Arg(50)->Arg(200);

BENCHMARK_MAIN();
