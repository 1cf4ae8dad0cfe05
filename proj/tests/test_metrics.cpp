#include "qtrack/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "doctest.h"
#include "qtrack/detsim.hpp"

namespace {

using qtrack::BoundingBox;
using namespace qtrack::metrics;

BoundingBox bb(double cx, double cy, double w = 0.2, double h = 0.2) {
  return BoundingBox{cx, cy, w, h};
}

TrackedFrame frame(std::vector<std::pair<int, BoundingBox>> objects) {
  TrackedFrame f;
  for (auto& [id, box] : objects) {
    f.ids.push_back(id);
    f.boxes.push_back(box);
  }
  return f;
}

// Scalar IoU written independently of the library (xyxy overlap by hand).
double ref_iou(const BoundingBox& a, const BoundingBox& b) {
  auto ax = a.to_xyxy(), bx = b.to_xyxy();
  double iw = std::min(ax[2], bx[2]) - std::max(ax[0], bx[0]);
  double ih = std::min(ax[3], bx[3]) - std::max(ax[1], bx[1]);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  double inter = iw * ih;
  return inter / (a.w * a.h + b.w * b.h - inter);
}

// ---------------------------------------------------------------------------
// Brute-force frame matching oracle: enumerate every injective partial
// matching over pairs with IoU >= alpha, then select by maximum cardinality,
// maximum total IoU (1e-9 tolerance, mirroring the production tie window),
// and lexicographically smallest (row, col) pair list.
struct BruteMatch {
  std::vector<std::pair<int, int>> pairs;  // (row, col), rows ascending
  double total = 0.0;
};

void enumerate_matchings(const Eigen::MatrixXd& ious, double alpha, int row,
                         std::vector<char>& used,
                         std::vector<std::pair<int, int>>& cur, double total,
                         std::vector<BruteMatch>& out) {
  if (row == ious.rows()) {
    out.push_back({cur, total});
    return;
  }
  enumerate_matchings(ious, alpha, row + 1, used, cur, total, out);
  for (int c = 0; c < ious.cols(); ++c) {
    if (used[c] || ious(row, c) < alpha) continue;
    used[c] = 1;
    cur.emplace_back(row, c);
    enumerate_matchings(ious, alpha, row + 1, used, cur, total + ious(row, c),
                        out);
    cur.pop_back();
    used[c] = 0;
  }
}

BruteMatch brute_best(const Eigen::MatrixXd& ious, double alpha) {
  std::vector<BruteMatch> all;
  std::vector<char> used(static_cast<std::size_t>(ious.cols()), 0);
  std::vector<std::pair<int, int>> cur;
  enumerate_matchings(ious, alpha, 0, used, cur, 0.0, all);
  std::size_t best_card = 0;
  for (const BruteMatch& m : all) best_card = std::max(best_card, m.pairs.size());
  double best_total = 0.0;
  for (const BruteMatch& m : all) {
    if (m.pairs.size() == best_card) best_total = std::max(best_total, m.total);
  }
  const BruteMatch* best = nullptr;
  for (const BruteMatch& m : all) {
    if (m.pairs.size() != best_card || m.total < best_total - 1e-9) continue;
    if (best == nullptr || m.pairs < best->pairs) best = &m;
  }
  return *best;
}

// ---------------------------------------------------------------------------
// A deliberately sloppy tracker built from ground truth: jittered boxes,
// random misses, one identity fragmented halfway through, occasional false
// positives. Produces every failure mode the metrics must count.
TrackSet sloppy_pred(const TrackSet& gt, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> jitter(0.0, 0.01);
  int fragmented = -1;
  for (const TrackedFrame& f : gt) {
    if (!f.ids.empty()) {
      fragmented = f.ids.front();
      break;
    }
  }
  TrackSet pred(gt.size());
  for (std::size_t f = 0; f < gt.size(); ++f) {
    for (std::size_t i = 0; i < gt[f].ids.size(); ++i) {
      if (unit(rng) > 0.85) continue;  // missed
      BoundingBox b = gt[f].boxes[i];
      b.cx += jitter(rng);
      b.cy += jitter(rng);
      int id = gt[f].ids[i];
      if (id == fragmented && f >= gt.size() / 2) id = 777;
      pred[f].ids.push_back(id);
      pred[f].boxes.push_back(b);
    }
    if (unit(rng) < 0.3) {
      pred[f].ids.push_back(9000 + static_cast<int>(f));
      pred[f].boxes.push_back(bb(unit(rng), unit(rng), 0.05, 0.05));
    }
  }
  return pred;
}

TrackSet crossing_gt(std::uint64_t seed, int frames = 24) {
  qtrack::sim::SceneConfig cfg;
  cfg.min_objects = 4;
  cfg.max_objects = 4;
  cfg.frame_count = frames;
  cfg.motion = qtrack::sim::MotionFamily::kCrossing;
  cfg.occlusion_rate = 0.1;
  return from_ground_truth(qtrack::sim::generate_sequence(cfg, seed));
}

}  // namespace

TEST_CASE("match_frame: identical gt and pred match perfectly") {
  TrackedFrame f = frame({{1, bb(0.3, 0.3)}, {2, bb(0.7, 0.7)}});
  FrameMatch m = match_frame(f, f, 0.5);
  REQUIRE(m.pairs.size() == 2);
  CHECK(m.pairs[0] == std::pair<int, int>{1, 1});
  CHECK(m.pairs[1] == std::pair<int, int>{2, 2});
  CHECK(m.fp == 0);
  CHECK(m.fn == 0);
  CHECK(m.ious[0] == doctest::Approx(1.0));
}

TEST_CASE("match_frame: empty predictions count every gt as missed") {
  TrackedFrame gt = frame({{1, bb(0.3, 0.3)}, {2, bb(0.7, 0.7)}});
  FrameMatch m = match_frame(gt, TrackedFrame{}, 0.5);
  CHECK(m.pairs.empty());
  CHECK(m.fn == 2);
  CHECK(m.fp == 0);
  FrameMatch rev = match_frame(TrackedFrame{}, gt, 0.5);
  CHECK(rev.fn == 0);
  CHECK(rev.fp == 2);
}

TEST_CASE("match_frame: duplicate ids and bad alpha are hard errors") {
  TrackedFrame dup = frame({{3, bb(0.3, 0.3)}, {3, bb(0.7, 0.7)}});
  TrackedFrame ok = frame({{1, bb(0.3, 0.3)}});
  CHECK_THROWS_AS(match_frame(dup, ok, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(match_frame(ok, dup, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(match_frame(ok, ok, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(match_frame(ok, ok, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(match_frame(ok, ok, -0.5), std::invalid_argument);
}

TEST_CASE("match_frame: lexicographic tie-break on exactly tied IoUs") {
  // Both gts sit on the same box, both preds too: any pairing has
  // cardinality 2 and total 2, so the (gt id, pred id) lexicographic rule
  // must pick {(5,3),(9,7)} over {(5,7),(9,3)}.
  TrackedFrame gt = frame({{9, bb(0.5, 0.5)}, {5, bb(0.5, 0.5)}});
  TrackedFrame pred = frame({{7, bb(0.5, 0.5)}, {3, bb(0.5, 0.5)}});
  FrameMatch m = match_frame(gt, pred, 0.5);
  REQUIRE(m.pairs.size() == 2);
  CHECK(m.pairs[0] == std::pair<int, int>{5, 3});
  CHECK(m.pairs[1] == std::pair<int, int>{9, 7});
}

TEST_CASE("match_frame equals brute force on random instances up to 4x4") {
  std::mt19937_64 rng(20240817);
  std::uniform_int_distribution<int> size_dist(0, 4);
  std::uniform_real_distribution<double> pos(0.2, 0.8);
  std::uniform_real_distribution<double> dim(0.05, 0.35);
  std::uniform_real_distribution<double> alpha_dist(0.05, 0.95);
  for (int trial = 0; trial < 1000; ++trial) {
    int n = size_dist(rng), m = size_dist(rng);
    double alpha = alpha_dist(rng);
    TrackedFrame gt, pred;
    for (int i = 0; i < n; ++i) {
      gt.ids.push_back(10 + i);
      gt.boxes.push_back(bb(pos(rng), pos(rng), dim(rng), dim(rng)));
    }
    for (int j = 0; j < m; ++j) {
      pred.ids.push_back(50 + j);
      pred.boxes.push_back(bb(pos(rng), pos(rng), dim(rng), dim(rng)));
    }
    // Shuffle presentation order; the matcher sorts by id internally.
    std::shuffle(gt.ids.begin(), gt.ids.end(), rng);
    std::shuffle(pred.ids.begin(), pred.ids.end(), rng);

    Eigen::MatrixXd ious(n, m);
    std::vector<int> gs(gt.ids), ps(pred.ids);
    std::sort(gs.begin(), gs.end());
    std::sort(ps.begin(), ps.end());
    auto box_of = [](const TrackedFrame& f, int id) {
      for (std::size_t k = 0; k < f.ids.size(); ++k)
        if (f.ids[k] == id) return f.boxes[k];
      throw std::logic_error("id not found");
    };
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < m; ++c)
        ious(r, c) = ref_iou(box_of(gt, gs[r]), box_of(pred, ps[c]));

    BruteMatch expect = brute_best(ious, alpha);
    FrameMatch got = match_frame(gt, pred, alpha);
    REQUIRE(got.pairs.size() == expect.pairs.size());
    for (std::size_t k = 0; k < expect.pairs.size(); ++k) {
      CHECK(got.pairs[k].first == gs[expect.pairs[k].first]);
      CHECK(got.pairs[k].second == ps[expect.pairs[k].second]);
    }
    CHECK(got.fn == n - static_cast<int>(expect.pairs.size()));
    CHECK(got.fp == m - static_cast<int>(expect.pairs.size()));
  }
}

TEST_CASE("clear_metrics: perfect tracking scores MOTA 1.0") {
  TrackSet gt(5);
  for (int f = 0; f < 5; ++f)
    gt[f] = frame({{1, bb(0.3, 0.3)}, {2, bb(0.7, 0.7)}});
  ClearResult r = clear_metrics(gt, gt);
  CHECK(r.mota == doctest::Approx(1.0));
  CHECK(r.fp == 0);
  CHECK(r.fn == 0);
  CHECK(r.idsw == 0);
  CHECK(r.gt == 10);
  CHECK(r.defined);
}

TEST_CASE("clear_metrics: mid-sequence id swap between two objects costs 2") {
  BoundingBox a = bb(0.25, 0.5), b = bb(0.75, 0.5);
  TrackSet gt(6), pred(6);
  for (int f = 0; f < 6; ++f) {
    gt[f] = frame({{1, a}, {2, b}});
    pred[f] = f < 3 ? frame({{1, a}, {2, b}}) : frame({{1, b}, {2, a}});
  }
  ClearResult r = clear_metrics(gt, pred);
  CHECK(r.idsw == 2);
  CHECK(r.fp == 0);
  CHECK(r.fn == 0);
  CHECK(r.gt == 12);
  CHECK(r.mota == doctest::Approx(1.0 - 2.0 / 12.0).epsilon(1e-12));

  // The same sequence halves IDF1: global matching binds each gt identity
  // to one predicted id, leaving the swapped half as id errors.
  IdfResult idf = idf1(gt, pred);
  CHECK(idf.idtp == 6);
  CHECK(idf.idfp == 6);
  CHECK(idf.idfn == 6);
  CHECK(idf.idf1 == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("clear_metrics: all frames missed gives MOTA exactly 0") {
  TrackSet gt(4), pred(4);
  for (int f = 0; f < 4; ++f) gt[f] = frame({{1, bb(0.3, 0.3)}});
  ClearResult r = clear_metrics(gt, pred);
  CHECK(r.fn == 4);
  CHECK(r.fp == 0);
  CHECK(r.idsw == 0);
  CHECK(r.mota == 0.0);
}

TEST_CASE("clear_metrics: switch memory persists across unmatched gaps") {
  BoundingBox a = bb(0.3, 0.3);
  TrackSet gt(5), pred(5);
  for (int f = 0; f < 5; ++f) gt[f] = frame({{1, a}});
  pred[0] = frame({{4, a}});
  pred[1] = frame({{4, a}});
  pred[2] = TrackedFrame{};    // gap: no prediction at all
  pred[3] = frame({{4, a}});   // same id resumes: no switch
  pred[4] = frame({{6, a}});   // different id: one switch
  ClearResult r = clear_metrics(gt, pred);
  CHECK(r.idsw == 1);
  CHECK(r.fn == 1);
  CHECK(r.fp == 0);
}

TEST_CASE("clear_metrics: zero ground truth is flagged undefined") {
  TrackSet gt(3), pred(3);
  for (int f = 0; f < 3; ++f) pred[f] = frame({{1, bb(0.5, 0.5)}});
  ClearResult r = clear_metrics(gt, pred);
  CHECK_FALSE(r.defined);
  CHECK(r.fp == 3);
  CHECK(r.gt == 0);
}

TEST_CASE("idf1: perfect tracking and consistent relabeling both score 1.0") {
  BoundingBox a = bb(0.25, 0.5), b = bb(0.75, 0.5);
  TrackSet gt(6), swapped(6);
  for (int f = 0; f < 6; ++f) {
    gt[f] = frame({{1, a}, {2, b}});
    swapped[f] = frame({{2, a}, {1, b}});  // ids traded for the whole sequence
  }
  CHECK(idf1(gt, gt).idf1 == doctest::Approx(1.0));
  IdfResult r = idf1(gt, swapped);
  CHECK(r.idf1 == doctest::Approx(1.0));
  CHECK(r.idtp == 12);
  CHECK(r.idfp == 0);
  CHECK(r.idfn == 0);
}

TEST_CASE("idf1 equals factorial brute force for up to 4 trajectories") {
  std::mt19937_64 rng(7151);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> jitter(0.0, 0.02);
  for (int trial = 0; trial < 200; ++trial) {
    const int frames = 6;
    const int n_obj = 1 + static_cast<int>(unit(rng) * 4.0);
    TrackSet gt(frames), pred(frames);
    std::vector<BoundingBox> base;
    for (int o = 0; o < n_obj; ++o)
      base.push_back(bb(0.15 + 0.2 * o, 0.3 + 0.4 * unit(rng), 0.15, 0.15));
    for (int f = 0; f < frames; ++f) {
      std::vector<int> pred_ids{1, 2, 3, 4};
      std::shuffle(pred_ids.begin(), pred_ids.end(), rng);
      for (int o = 0; o < n_obj; ++o) {
        BoundingBox box = base[o];
        box.cy += 0.02 * f;
        if (unit(rng) < 0.85) {
          gt[f].ids.push_back(10 + o);
          gt[f].boxes.push_back(box);
        }
        if (unit(rng) < 0.85) {
          BoundingBox pb = box;
          pb.cx += jitter(rng);
          pb.cy += jitter(rng);
          pred[f].ids.push_back(pred_ids[o]);
          pred[f].boxes.push_back(pb);
        }
      }
    }

    // Independent overlap table: frames where both ids are present and the
    // boxes meet at IoU >= 0.5.
    std::map<int, int> gt_total, pred_total;
    std::map<std::pair<int, int>, int> overlap;
    for (int f = 0; f < frames; ++f) {
      for (std::size_t i = 0; i < gt[f].ids.size(); ++i) {
        ++gt_total[gt[f].ids[i]];
        for (std::size_t j = 0; j < pred[f].ids.size(); ++j) {
          if (ref_iou(gt[f].boxes[i], pred[f].boxes[j]) >= 0.5)
            ++overlap[{gt[f].ids[i], pred[f].ids[j]}];
        }
      }
      for (int id : pred[f].ids) ++pred_total[id];
    }
    std::vector<int> gids, pids;
    for (auto& [id, _] : gt_total) gids.push_back(id);
    for (auto& [id, _] : pred_total) pids.push_back(id);

    // Enumerate every injective partial pairing and maximize IDTP.
    int best = 0;
    std::vector<char> used(pids.size(), 0);
    std::function<void(std::size_t, int)> recurse = [&](std::size_t g,
                                                        int acc) {
      if (g == gids.size()) {
        best = std::max(best, acc);
        return;
      }
      recurse(g + 1, acc);
      for (std::size_t j = 0; j < pids.size(); ++j) {
        if (used[j]) continue;
        used[j] = 1;
        auto it = overlap.find({gids[g], pids[j]});
        recurse(g + 1, acc + (it == overlap.end() ? 0 : it->second));
        used[j] = 0;
      }
    };
    recurse(0, 0);

    int total_gt = 0, total_pred = 0;
    for (auto& [_, c] : gt_total) total_gt += c;
    for (auto& [_, c] : pred_total) total_pred += c;
    double expect = (total_gt + total_pred) == 0
                        ? 1.0
                        : 2.0 * best / static_cast<double>(total_gt + total_pred);

    IdfResult got = idf1(gt, pred);
    CHECK(got.idtp == best);
    CHECK(got.idf1 == doctest::Approx(expect).epsilon(1e-12));
    CHECK(got.idfn == total_gt - best);
    CHECK(got.idfp == total_pred - best);
  }
}

TEST_CASE("hota: perfect tracking scores 1.0 across the board") {
  TrackSet gt = crossing_gt(11);
  HotaResult r = hota(gt, gt);
  CHECK(r.hota == doctest::Approx(1.0));
  CHECK(r.deta == doctest::Approx(1.0));
  CHECK(r.assa == doctest::Approx(1.0));
  for (int a = 0; a < kHotaAlphaCount; ++a) {
    CHECK(r.per_alpha_hota[a] == doctest::Approx(1.0));
  }
  CHECK_FALSE(r.empty_convention);
}

TEST_CASE("hota: alpha grid is 0.05 through 0.95") {
  auto alphas = hota_alphas();
  CHECK(alphas.front() == doctest::Approx(0.05));
  CHECK(alphas.back() == doctest::Approx(0.95));
  for (int i = 1; i < kHotaAlphaCount; ++i)
    CHECK(alphas[i] - alphas[i - 1] == doctest::Approx(0.05));
}

TEST_CASE("hota: perfect boxes with random per-frame ids sinks AssA only") {
  const int frames = 10, objects = 3;
  TrackSet gt(frames), pred(frames);
  for (int f = 0; f < frames; ++f) {
    for (int o = 0; o < objects; ++o) {
      BoundingBox box = bb(0.2 + 0.3 * o, 0.3 + 0.03 * f, 0.15, 0.15);
      gt[f].ids.push_back(o);
      gt[f].boxes.push_back(box);
      pred[f].ids.push_back(100 + f * 10 + o);  // fresh id every frame
      pred[f].boxes.push_back(box);
    }
  }
  HotaResult r = hota(gt, pred);
  for (int a = 0; a < kHotaAlphaCount; ++a) {
    CHECK(r.per_alpha_deta[a] == doctest::Approx(1.0));
    // Each pair co-occurs once; the gt identity spans all frames:
    // A = 1 / (frames + 1 - 1).
    CHECK(r.per_alpha_assa[a] == doctest::Approx(1.0 / frames));
  }
  CHECK(r.deta == doctest::Approx(1.0));
  CHECK(r.assa == doctest::Approx(0.1));
  CHECK(r.hota == doctest::Approx(std::sqrt(0.1)));
}

TEST_CASE("hota: 2-object 4-frame case equals a scalar transcription") {
  // Objects far apart, so every prediction overlaps at most one gt and the
  // per-frame matching is forced: pairs are exactly those with IoU >= alpha.
  BoundingBox a = bb(0.3, 0.3), b = bb(0.7, 0.7);
  BoundingBox b_shift = bb(0.8, 0.7);  // IoU vs b: 0.02/0.06 = 1/3
  BoundingBox fp_box = bb(0.1, 0.9, 0.1, 0.1);
  TrackSet gt(4), pred(4);
  for (int f = 0; f < 4; ++f) gt[f] = frame({{1, a}, {2, b}});
  pred[0] = frame({{10, a}, {20, b_shift}});
  pred[1] = frame({{10, a}, {20, b_shift}});
  pred[2] = frame({{10, b}, {20, a}});  // ids land on the other objects
  pred[3] = frame({{10, b}, {30, fp_box}});

  HotaResult got = hota(gt, pred);

  // Transcription: per alpha, walk frames with scalar loops only.
  auto alphas = hota_alphas();
  double hota_sum = 0.0, deta_sum = 0.0, assa_sum = 0.0;
  for (int ai = 0; ai < kHotaAlphaCount; ++ai) {
    double alpha = alphas[ai];
    int tp = 0, fp = 0, fn = 0;
    std::map<std::pair<int, int>, int> m;  // matched (gt,pred) frame counts
    std::map<int, int> len_g, len_p;
    for (int f = 0; f < 4; ++f) {
      std::vector<char> pred_used(pred[f].ids.size(), 0);
      for (std::size_t i = 0; i < gt[f].ids.size(); ++i) {
        ++len_g[gt[f].ids[i]];
        bool matched = false;
        for (std::size_t j = 0; j < pred[f].ids.size(); ++j) {
          if (ref_iou(gt[f].boxes[i], pred[f].boxes[j]) >= alpha) {
            ++m[{gt[f].ids[i], pred[f].ids[j]}];
            pred_used[j] = 1;
            matched = true;
          }
        }
        matched ? ++tp : ++fn;
      }
      for (std::size_t j = 0; j < pred[f].ids.size(); ++j) {
        ++len_p[pred[f].ids[j]];
        if (!pred_used[j]) ++fp;
      }
    }
    double deta = static_cast<double>(tp) / (tp + fn + fp);
    double ass = 0.0;
    for (auto& [key, count] : m) {
      double denom = len_g[key.first] + len_p[key.second] - count;
      ass += count * (count / denom);
    }
    double assa = tp == 0 ? 0.0 : ass / tp;
    CHECK(got.per_alpha_deta[ai] == doctest::Approx(deta).epsilon(1e-12));
    CHECK(got.per_alpha_assa[ai] == doctest::Approx(assa).epsilon(1e-12));
    CHECK(got.per_alpha_hota[ai] ==
          doctest::Approx(std::sqrt(deta * assa)).epsilon(1e-12));
    deta_sum += deta;
    assa_sum += assa;
    hota_sum += std::sqrt(deta * assa);
  }
  CHECK(got.deta == doctest::Approx(deta_sum / 19).epsilon(1e-12));
  CHECK(got.assa == doctest::Approx(assa_sum / 19).epsilon(1e-12));
  CHECK(got.hota == doctest::Approx(hota_sum / 19).epsilon(1e-12));

  // Hand-derived anchors. Below IoU 1/3 every box matches:
  // TP=7, FN=1, FP=1, AssA = (2/3 + 4/5 + 2/3 + 1/6)/7 = 23/70.
  CHECK(got.per_alpha_deta[0] == doctest::Approx(7.0 / 9.0).epsilon(1e-12));
  CHECK(got.per_alpha_assa[0] == doctest::Approx(23.0 / 70.0).epsilon(1e-12));
  // Above 1/3 the shifted box drops out: TP=5, FN=3, FP=3,
  // AssA = (2/3 + 2/3 + 1/6)/5 = 3/10.
  CHECK(got.per_alpha_deta[18] == doctest::Approx(5.0 / 11.0).epsilon(1e-12));
  CHECK(got.per_alpha_assa[18] == doctest::Approx(3.0 / 10.0).epsilon(1e-12));
}

TEST_CASE("hota: per-alpha geometric-mean identity holds to 1e-9") {
  TrackSet gt = crossing_gt(31);
  TrackSet pred = sloppy_pred(gt, 99);
  HotaResult r = hota(gt, pred);
  for (int a = 0; a < kHotaAlphaCount; ++a) {
    CHECK(std::abs(r.per_alpha_hota[a] -
                   std::sqrt(r.per_alpha_deta[a] * r.per_alpha_assa[a])) <=
          1e-9);
  }
  // Headline MOTA identity on the same run.
  ClearResult c = clear_metrics(gt, pred);
  REQUIRE(c.defined);
  CHECK(std::abs(c.mota - (1.0 - static_cast<double>(c.fp + c.fn + c.idsw) /
                                     c.gt)) <= 1e-9);
}

TEST_CASE("hota: empty gt and empty pred is all-ones with a flag") {
  TrackSet gt(3), pred(3);
  HotaResult r = hota(gt, pred);
  CHECK(r.empty_convention);
  CHECK(r.hota == 1.0);
  CHECK(r.deta == 1.0);
  CHECK(r.assa == 1.0);
  MetricsReport rep = evaluate(gt, pred);
  CHECK(rep.hota.empty_convention);
  CHECK_FALSE(rep.clear.defined);
  CHECK(rep.idf.idf1 == 1.0);
}

TEST_CASE("all metrics are invariant under global relabeling of pred ids") {
  TrackSet gt = crossing_gt(47);
  TrackSet pred = sloppy_pred(gt, 5);
  // Deterministic bijection onto a shuffled id set.
  std::set<int> id_set;
  for (const TrackedFrame& f : pred)
    id_set.insert(f.ids.begin(), f.ids.end());
  std::vector<int> ordered(id_set.begin(), id_set.end());
  std::vector<int> shuffled = ordered;
  std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937_64(3));
  std::map<int, int> relabel;
  for (std::size_t i = 0; i < ordered.size(); ++i)
    relabel[ordered[i]] = 100000 + shuffled[i];
  TrackSet renamed = pred;
  for (TrackedFrame& f : renamed)
    for (int& id : f.ids) id = relabel.at(id);

  MetricsReport before = evaluate(gt, pred);
  MetricsReport after = evaluate(gt, renamed);
  CHECK(after.clear.fp == before.clear.fp);
  CHECK(after.clear.fn == before.clear.fn);
  CHECK(after.clear.idsw == before.clear.idsw);
  CHECK(after.clear.mota == doctest::Approx(before.clear.mota).epsilon(1e-12));
  CHECK(after.idf.idtp == before.idf.idtp);
  CHECK(after.idf.idf1 == doctest::Approx(before.idf.idf1).epsilon(1e-12));
  for (int a = 0; a < kHotaAlphaCount; ++a) {
    CHECK(after.hota.per_alpha_hota[a] ==
          doctest::Approx(before.hota.per_alpha_hota[a]).epsilon(1e-12));
    CHECK(after.hota.per_alpha_assa[a] ==
          doctest::Approx(before.hota.per_alpha_assa[a]).epsilon(1e-12));
  }
}

TEST_CASE("MOTA never improves when pure false positives are injected") {
  std::mt19937_64 rng(61);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  TrackSet gt = crossing_gt(53);
  TrackSet pred = sloppy_pred(gt, 8);
  double base = clear_metrics(gt, pred).mota;
  for (int trial = 0; trial < 30; ++trial) {
    TrackSet injected = pred;
    for (std::size_t f = 0; f < injected.size(); ++f) {
      if (unit(rng) > 0.5) continue;
      // Sample until the box cannot match any gt at the 0.5 gate.
      for (int attempt = 0; attempt < 200; ++attempt) {
        BoundingBox box = bb(unit(rng), unit(rng), 0.08, 0.08);
        double worst = 0.0;
        for (const BoundingBox& g : gt[f].boxes)
          worst = std::max(worst, ref_iou(box, g));
        if (worst < 0.3) {
          injected[f].ids.push_back(5000 + static_cast<int>(f));
          injected[f].boxes.push_back(box);
          break;
        }
      }
    }
    double worse = clear_metrics(gt, injected).mota;
    CHECK(worse <= base + 1e-12);
  }
}

TEST_CASE("from_ground_truth keeps only visible objects") {
  qtrack::sim::GroundTruthSequence seq;
  seq.frames.resize(2);
  seq.frames[0].push_back({1, bb(0.3, 0.3), true});
  seq.frames[0].push_back({2, bb(0.7, 0.7), false});  // occluded
  seq.frames[1].push_back({1, bb(0.3, 0.35), true});
  seq.frames[1].push_back({2, bb(0.7, 0.7), true});
  TrackSet set = from_ground_truth(seq);
  REQUIRE(set.size() == 2);
  CHECK(set[0].ids == std::vector<int>{1});
  CHECK(set[1].ids == std::vector<int>{1, 2});
}

TEST_CASE("from_records groups by frame and validates the range") {
  std::vector<qtrack::track::TrackRecord> recs;
  recs.push_back({2, 7, bb(0.5, 0.5), 0.9});
  recs.push_back({0, 3, bb(0.2, 0.2), 0.8});
  recs.push_back({2, 8, bb(0.6, 0.6), 0.7});
  TrackSet set = from_records(recs, 3);
  REQUIRE(set.size() == 3);
  CHECK(set[0].ids == std::vector<int>{3});
  CHECK(set[1].ids.empty());
  CHECK(set[2].ids == std::vector<int>{7, 8});
  recs.push_back({3, 9, bb(0.5, 0.5), 0.9});
  CHECK_THROWS_AS(from_records(recs, 3), std::invalid_argument);
}

TEST_CASE("evaluate_pooled matches a hand-offset concatenation") {
  // Two short sequences that deliberately reuse the same gt and pred ids.
  BoundingBox a = bb(0.3, 0.3), b = bb(0.7, 0.7);
  TrackSet gt1(3), pred1(3), gt2(2), pred2(2);
  for (int f = 0; f < 3; ++f) {
    gt1[f] = frame({{1, a}, {2, b}});
    pred1[f] = frame({{7, a}, {8, b}});
  }
  for (int f = 0; f < 2; ++f) gt2[f] = frame({{1, b}, {3, a}});
  pred2[0] = frame({{7, b}});
  pred2[1] = frame({{7, b}, {9, a}});

  MetricsReport pooled = evaluate_pooled({{gt1, pred1}, {gt2, pred2}});

  // Manual pooling: remap ids in ascending order per sequence and side,
  // then concatenate frames.
  TrackSet gt_cat(5), pred_cat(5);
  for (int f = 0; f < 3; ++f) {
    gt_cat[f] = frame({{0, a}, {1, b}});
    pred_cat[f] = frame({{0, a}, {1, b}});
  }
  gt_cat[3] = frame({{2, b}, {3, a}});
  gt_cat[4] = frame({{2, b}, {3, a}});
  pred_cat[3] = frame({{2, b}});
  pred_cat[4] = frame({{2, b}, {3, a}});
  MetricsReport manual = evaluate(gt_cat, pred_cat);

  CHECK(pooled.clear.fp == manual.clear.fp);
  CHECK(pooled.clear.fn == manual.clear.fn);
  CHECK(pooled.clear.idsw == manual.clear.idsw);
  CHECK(pooled.clear.gt == manual.clear.gt);
  CHECK(pooled.clear.mota == manual.clear.mota);
  CHECK(pooled.idf.idtp == manual.idf.idtp);
  CHECK(pooled.idf.idf1 == manual.idf.idf1);
  CHECK(pooled.hota.hota == manual.hota.hota);
  CHECK(pooled.hota.deta == manual.hota.deta);
  CHECK(pooled.hota.assa == manual.hota.assa);
}
