#include "qtrack/tracker.hpp"

#include <utility>

namespace qtrack::track {

TrackerOutputs run_tracker(assoc::AssociatorModel& model,
                           const std::vector<sim::FrameObservation>& frames,
                           const LifecycleConfig& cfg, bool keep_attention) {
  cfg.validate();
  const int d = model.config().d_model;
  TrackerOutputs out;
  std::vector<Tracklet> tracklets;

  for (std::size_t f = 0; f < frames.size(); ++f) {
    ad::Tape tape;
    const auto& dets = frames[f].detections;
    Eigen::MatrixXd det_content(static_cast<Eigen::Index>(dets.size()), d);
    Eigen::MatrixXd det_boxes(static_cast<Eigen::Index>(dets.size()), 4);
    std::vector<double> det_scores(dets.size());
    for (std::size_t i = 0; i < dets.size(); ++i) {
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
    inputs.features = tape.input(frames[f].features);
    inputs.positions = tape.input(frames[f].positions);

    // Live tracklet state, re-leafed on this frame's tape.
    std::vector<assoc::ObjectQuery> queries = propagate_queries(tracklets);
    std::vector<int> live = live_indices(tracklets);
    assoc::TrackStateVars state;
    if (!queries.empty()) {
      const Eigen::Index n = static_cast<Eigen::Index>(queries.size());
      Eigen::MatrixXd content(n, d), boxes(n, 4), history(n, d);
      for (Eigen::Index i = 0; i < n; ++i) {
        const assoc::ObjectQuery& q = queries[static_cast<std::size_t>(i)];
        content.row(i) = q.content.transpose();
        boxes.row(i) << q.box.cx, q.box.cy, q.box.w, q.box.h;
        history.row(i) =
            tracklets[static_cast<std::size_t>(live[static_cast<std::size_t>(i)])]
                .history.transpose();
      }
      state.content = tape.input(std::move(content));
      state.boxes = tape.input(std::move(boxes));
      state.history = tape.input(std::move(history));
    }

    assoc::FrameOutputs fo =
        model.step_frame(tape, inputs, queries.empty() ? nullptr : &state);

    FramePredictions pred;
    pred.content = fo.content.value();
    pred.boxes = fo.boxes.value();
    pred.scores = fo.scores.value().col(0);
    pred.n_tracks = fo.n_tracks;
    LifecycleResult res =
        step_lifecycle(tracklets, pred, static_cast<int>(f), cfg);
    tracklets = std::move(res.tracklets);
    out.records.insert(out.records.end(), res.records.begin(),
                       res.records.end());
    if (keep_attention) {
      out.det_attention.push_back(fo.det_attention);
      out.trk_attention.push_back(fo.trk_attention);
    }
  }
  out.tracklets = std::move(tracklets);
  return out;
}

}  // namespace qtrack::track
