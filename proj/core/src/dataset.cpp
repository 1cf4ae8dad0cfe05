#include "qtrack/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "qtrack/mot_io.hpp"

namespace qtrack::io {

namespace {

using Json = nlohmann::ordered_json;

Json matrix_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from(const Json& j, const char* what) {
  if (!j.is_array()) throw std::runtime_error(std::string(what) + ": expected an array of rows");
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  Eigen::Index cols = -1;
  Eigen::MatrixXd m;
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Json& row = j.at(static_cast<std::size_t>(r));
    if (cols < 0) {
      cols = static_cast<Eigen::Index>(row.size());
      m.resize(rows, cols);
    }
    if (static_cast<Eigen::Index>(row.size()) != cols)
      throw std::runtime_error(std::string(what) + ": ragged rows");
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  if (rows == 0) m.resize(0, 0);
  return m;
}

std::string join(const std::string& dir, const char* file) {
  return (std::filesystem::path(dir) / file).string();
}

}  // namespace

void write_dataset(const std::string& dir, const RunConfig& cfg,
                   const sim::GroundTruthSequence& gt,
                   const std::vector<sim::FrameObservation>& observations) {
  if (static_cast<int>(gt.frames.size()) != cfg.scene.frame_count ||
      observations.size() != gt.frames.size())
    throw std::invalid_argument(
        "dataset: frame counts disagree with the scene config");
  std::filesystem::create_directories(dir);
  save_run_config(cfg, join(dir, "config.json"));

  std::vector<MotRecord> gt_rows;
  for (std::size_t f = 0; f < gt.frames.size(); ++f) {
    for (const sim::GroundTruthObject& obj : gt.frames[f]) {
      if (!obj.visible) continue;
      MotRecord r;
      r.frame = static_cast<int>(f) + 1;
      r.id = obj.identity;
      r.bb_left = (obj.box.cx - 0.5 * obj.box.w) * cfg.image_w;
      r.bb_top = (obj.box.cy - 0.5 * obj.box.h) * cfg.image_h;
      r.bb_width = obj.box.w * cfg.image_w;
      r.bb_height = obj.box.h * cfg.image_h;
      r.conf = 1.0;
      gt_rows.push_back(r);
    }
  }
  write_mot(std::move(gt_rows), join(dir, "gt.txt"));

  std::vector<MotRecord> det_rows;
  Json frames = Json::array();
  for (std::size_t f = 0; f < observations.size(); ++f) {
    const sim::FrameObservation& obs = observations[f];
    Json content = Json::array();
    for (std::size_t i = 0; i < obs.detections.size(); ++i) {
      const sim::Detection& det = obs.detections[i];
      MotRecord r;
      r.frame = static_cast<int>(f) + 1;
      r.id = static_cast<int>(i) + 1;  // per-frame ordinal, not an identity
      r.bb_left = (det.box.cx - 0.5 * det.box.w) * cfg.image_w;
      r.bb_top = (det.box.cy - 0.5 * det.box.h) * cfg.image_h;
      r.bb_width = det.box.w * cfg.image_w;
      r.bb_height = det.box.h * cfg.image_h;
      r.conf = det.score;
      det_rows.push_back(r);
      Json row = Json::array();
      for (Eigen::Index k = 0; k < det.content.size(); ++k)
        row.push_back(det.content(k));
      content.push_back(std::move(row));
    }
    Json fj;
    fj["content"] = std::move(content);
    fj["features"] = matrix_json(obs.features);
    fj["positions"] = matrix_json(obs.positions);
    frames.push_back(std::move(fj));
  }
  write_mot(std::move(det_rows), join(dir, "det.txt"));

  Json sidecar;
  sidecar["kind"] = "sidecar";
  sidecar["schema_version"] = 1;
  sidecar["frames"] = std::move(frames);
  std::ofstream out(join(dir, "sidecar.json"), std::ios::binary);
  if (!out)
    throw std::runtime_error(join(dir, "sidecar.json") +
                             ": cannot open for writing");
  std::string text = sidecar.dump();
  text += '\n';
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("sidecar.json: write failed");
}

Dataset load_dataset(const std::string& dir) {
  Dataset ds;
  ds.config = load_run_config(join(dir, "config.json"));
  const int frame_count = ds.config.scene.frame_count;
  const double W = ds.config.image_w, H = ds.config.image_h;

  // Ground truth, regrouped by frame.
  ds.gt.seed = ds.config.seed;
  ds.gt.frames.resize(static_cast<std::size_t>(frame_count));
  for (const MotRecord& r : read_mot(join(dir, "gt.txt"))) {
    if (r.frame < 1 || r.frame > frame_count)
      throw std::runtime_error("gt.txt: frame " + std::to_string(r.frame) +
                               " outside the configured range");
    sim::GroundTruthObject obj;
    obj.identity = r.id;
    obj.box.w = r.bb_width / W;
    obj.box.h = r.bb_height / H;
    obj.box.cx = r.bb_left / W + 0.5 * obj.box.w;
    obj.box.cy = r.bb_top / H + 0.5 * obj.box.h;
    obj.visible = true;
    ds.gt.frames[static_cast<std::size_t>(r.frame - 1)].push_back(obj);
  }

  // Detections from the MOT view, content and grids from the sidecar.
  std::ifstream side(join(dir, "sidecar.json"));
  if (!side)
    throw std::runtime_error(join(dir, "sidecar.json") +
                             ": cannot open for reading");
  Json sidecar;
  try {
    side >> sidecar;
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("sidecar.json: ") + e.what());
  }
  if (sidecar.value("kind", std::string{}) != "sidecar")
    throw std::runtime_error("sidecar.json: not a sidecar file");
  const Json& frames = sidecar.at("frames");
  if (static_cast<int>(frames.size()) != frame_count)
    throw std::runtime_error("sidecar.json: frame count mismatch");

  ds.observations.resize(static_cast<std::size_t>(frame_count));
  for (const MotRecord& r : read_mot(join(dir, "det.txt"))) {
    if (r.frame < 1 || r.frame > frame_count)
      throw std::runtime_error("det.txt: frame " + std::to_string(r.frame) +
                               " outside the configured range");
    sim::Detection det;
    det.box.w = r.bb_width / W;
    det.box.h = r.bb_height / H;
    det.box.cx = r.bb_left / W + 0.5 * det.box.w;
    det.box.cy = r.bb_top / H + 0.5 * det.box.h;
    det.score = r.conf;
    ds.observations[static_cast<std::size_t>(r.frame - 1)].detections.push_back(
        det);
  }
  for (int f = 0; f < frame_count; ++f) {
    const Json& fj = frames.at(static_cast<std::size_t>(f));
    sim::FrameObservation& obs = ds.observations[static_cast<std::size_t>(f)];
    const Json& content = fj.at("content");
    if (content.size() != obs.detections.size())
      throw std::runtime_error(
          "sidecar.json: content rows disagree with det.txt at frame " +
          std::to_string(f + 1));
    for (std::size_t i = 0; i < obs.detections.size(); ++i) {
      const Json& row = content.at(i);
      Eigen::VectorXd v(static_cast<Eigen::Index>(row.size()));
      for (Eigen::Index k = 0; k < v.size(); ++k)
        v(k) = row.at(static_cast<std::size_t>(k)).get<double>();
      obs.detections[i].content = std::move(v);
    }
    obs.features = matrix_from(fj.at("features"), "sidecar features");
    obs.positions = matrix_from(fj.at("positions"), "sidecar positions");
  }
  return ds;
}

}  // namespace qtrack::io
