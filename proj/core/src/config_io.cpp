#include "qtrack/config_io.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "qtrack/checkpoint.hpp"

namespace qtrack::io {

namespace {

using Json = nlohmann::ordered_json;

void check_keys(const Json& j, std::initializer_list<const char*> allowed,
                const char* where) {
  if (!j.is_object())
    throw std::runtime_error(std::string(where) + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) {
      if (it.key() == k) {
        known = true;
        break;
      }
    }
    if (!known)
      throw std::runtime_error(std::string(where) + ": unknown key '" +
                               it.key() + "'");
  }
}

template <typename T>
void read_field(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

// --- enum names ------------------------------------------------------------

const char* motion_name(sim::MotionFamily m) {
  switch (m) {
    case sim::MotionFamily::kLinear: return "linear";
    case sim::MotionFamily::kSinusoidal: return "sinusoidal";
    case sim::MotionFamily::kCrossing: return "crossing";
  }
  throw std::logic_error("unhandled motion family");
}

sim::MotionFamily motion_from(const std::string& s) {
  if (s == "linear") return sim::MotionFamily::kLinear;
  if (s == "sinusoidal") return sim::MotionFamily::kSinusoidal;
  if (s == "crossing") return sim::MotionFamily::kCrossing;
  throw std::runtime_error("scene.motion: unknown value '" + s + "'");
}

const char* noisy_name(assoc::AssociatorConfig::NoisyMode m) {
  switch (m) {
    case assoc::AssociatorConfig::NoisyMode::kHardRejected:
      return "hard_rejected";
    case assoc::AssociatorConfig::NoisyMode::kAllDetections:
      return "all_detections";
    case assoc::AssociatorConfig::NoisyMode::kZeros: return "zeros";
  }
  throw std::logic_error("unhandled noisy mode");
}

assoc::AssociatorConfig::NoisyMode noisy_from(const std::string& s) {
  if (s == "hard_rejected")
    return assoc::AssociatorConfig::NoisyMode::kHardRejected;
  if (s == "all_detections")
    return assoc::AssociatorConfig::NoisyMode::kAllDetections;
  if (s == "zeros") return assoc::AssociatorConfig::NoisyMode::kZeros;
  throw std::runtime_error("associator.noisy_mode: unknown value '" + s + "'");
}

// --- per-section (de)serializers --------------------------------------------

Json associator_json(const assoc::AssociatorConfig& c) {
  Json j;
  j["d_model"] = c.d_model;
  j["n_heads"] = c.n_heads;
  j["ffn_dim"] = c.ffn_dim;
  j["tau_q"] = c.tau_q;
  j["ema_weight"] = c.ema_weight;
  j["temperature"] = c.temperature;
  j["use_learned_projections"] = c.use_learned_projections;
  j["identity_norm"] = c.identity_norm;
  j["logit_space_box_update"] = c.logit_space_box_update;
  j["noisy_mode"] = noisy_name(c.noisy_mode);
  return j;
}

void associator_from(const Json& j, assoc::AssociatorConfig& c) {
  check_keys(j,
             {"d_model", "n_heads", "ffn_dim", "tau_q", "ema_weight",
              "temperature", "use_learned_projections", "identity_norm",
              "logit_space_box_update", "noisy_mode"},
             "associator");
  read_field(j, "d_model", c.d_model);
  read_field(j, "n_heads", c.n_heads);
  read_field(j, "ffn_dim", c.ffn_dim);
  read_field(j, "tau_q", c.tau_q);
  read_field(j, "ema_weight", c.ema_weight);
  read_field(j, "temperature", c.temperature);
  read_field(j, "use_learned_projections", c.use_learned_projections);
  read_field(j, "identity_norm", c.identity_norm);
  read_field(j, "logit_space_box_update", c.logit_space_box_update);
  if (j.contains("noisy_mode"))
    c.noisy_mode = noisy_from(j.at("noisy_mode").get<std::string>());
}

Json lifecycle_json(const track::LifecycleConfig& c) {
  Json j;
  j["tau_n"] = c.tau_n;
  j["persistence"] = c.persistence;
  j["tau_e"] = c.tau_e;
  j["ema_weight"] = c.ema_weight;
  j["suppress_newborn_overlap"] = c.suppress_newborn_overlap;
  j["newborn_overlap_iou"] = c.newborn_overlap_iou;
  return j;
}

void lifecycle_from(const Json& j, track::LifecycleConfig& c) {
  check_keys(j,
             {"tau_n", "persistence", "tau_e", "ema_weight",
              "suppress_newborn_overlap", "newborn_overlap_iou"},
             "lifecycle");
  read_field(j, "tau_n", c.tau_n);
  read_field(j, "persistence", c.persistence);
  read_field(j, "tau_e", c.tau_e);
  read_field(j, "ema_weight", c.ema_weight);
  read_field(j, "suppress_newborn_overlap", c.suppress_newborn_overlap);
  read_field(j, "newborn_overlap_iou", c.newborn_overlap_iou);
}

Json weights_json(const train::LossWeights& w) {
  Json j;
  j["lambda_cls"] = w.lambda_cls;
  j["lambda_l1"] = w.lambda_l1;
  j["lambda_giou"] = w.lambda_giou;
  j["focal_alpha"] = w.focal_alpha;
  j["focal_gamma"] = w.focal_gamma;
  return j;
}

void weights_from(const Json& j, train::LossWeights& w) {
  check_keys(
      j, {"lambda_cls", "lambda_l1", "lambda_giou", "focal_alpha",
          "focal_gamma"},
      "train.weights");
  read_field(j, "lambda_cls", w.lambda_cls);
  read_field(j, "lambda_l1", w.lambda_l1);
  read_field(j, "lambda_giou", w.lambda_giou);
  read_field(j, "focal_alpha", w.focal_alpha);
  read_field(j, "focal_gamma", w.focal_gamma);
}

Json train_json(const train::TrainConfig& c) {
  Json j;
  j["clip_length"] = c.clip_length;
  j["lr"] = c.lr;
  j["lr_milestones"] = c.lr_milestones;
  j["lr_drop_factor"] = c.lr_drop_factor;
  j["weights"] = weights_json(c.weights);
  j["p_insert"] = c.p_insert;
  j["p_drop"] = c.p_drop;
  j["epochs"] = c.epochs;
  j["clips_per_sequence"] = c.clips_per_sequence;
  j["seed"] = c.seed;
  return j;
}

void train_from(const Json& j, train::TrainConfig& c) {
  check_keys(j,
             {"clip_length", "lr", "lr_milestones", "lr_drop_factor",
              "weights", "p_insert", "p_drop", "epochs", "clips_per_sequence",
              "seed"},
             "train");
  read_field(j, "clip_length", c.clip_length);
  read_field(j, "lr", c.lr);
  read_field(j, "lr_milestones", c.lr_milestones);
  read_field(j, "lr_drop_factor", c.lr_drop_factor);
  if (j.contains("weights")) weights_from(j.at("weights"), c.weights);
  read_field(j, "p_insert", c.p_insert);
  read_field(j, "p_drop", c.p_drop);
  read_field(j, "epochs", c.epochs);
  read_field(j, "clips_per_sequence", c.clips_per_sequence);
  read_field(j, "seed", c.seed);
}

Json scene_json(const sim::SceneConfig& c) {
  Json j;
  j["min_objects"] = c.min_objects;
  j["max_objects"] = c.max_objects;
  j["frame_count"] = c.frame_count;
  j["motion"] = motion_name(c.motion);
  j["occlusion_rate"] = c.occlusion_rate;
  j["d_app"] = c.d_app;
  return j;
}

void scene_from(const Json& j, sim::SceneConfig& c) {
  check_keys(j,
             {"min_objects", "max_objects", "frame_count", "motion",
              "occlusion_rate", "d_app"},
             "scene");
  read_field(j, "min_objects", c.min_objects);
  read_field(j, "max_objects", c.max_objects);
  read_field(j, "frame_count", c.frame_count);
  if (j.contains("motion"))
    c.motion = motion_from(j.at("motion").get<std::string>());
  read_field(j, "occlusion_rate", c.occlusion_rate);
  read_field(j, "d_app", c.d_app);
}

Json noise_json(const sim::NoiseConfig& c) {
  Json j;
  j["box_jitter"] = c.box_jitter;
  j["miss_prob"] = c.miss_prob;
  j["fp_rate"] = c.fp_rate;
  j["content_noise"] = c.content_noise;
  j["d_model"] = c.d_model;
  j["grid_h"] = c.grid_h;
  j["grid_w"] = c.grid_w;
  j["detector_seed"] = c.detector_seed;
  return j;
}

void noise_from(const Json& j, sim::NoiseConfig& c) {
  check_keys(j,
             {"box_jitter", "miss_prob", "fp_rate", "content_noise", "d_model",
              "grid_h", "grid_w", "detector_seed"},
             "noise");
  read_field(j, "box_jitter", c.box_jitter);
  read_field(j, "miss_prob", c.miss_prob);
  read_field(j, "fp_rate", c.fp_rate);
  read_field(j, "content_noise", c.content_noise);
  read_field(j, "d_model", c.d_model);
  read_field(j, "grid_h", c.grid_h);
  read_field(j, "grid_w", c.grid_w);
  read_field(j, "detector_seed", c.detector_seed);
}

Json greedy_json(const baseline::GreedyConfig& c) {
  Json j;
  j["iou_gate"] = c.iou_gate;
  j["max_age"] = c.max_age;
  j["spawn_score"] = c.spawn_score;
  return j;
}

void greedy_from(const Json& j, baseline::GreedyConfig& c) {
  check_keys(j, {"iou_gate", "max_age", "spawn_score"}, "greedy");
  read_field(j, "iou_gate", c.iou_gate);
  read_field(j, "max_age", c.max_age);
  read_field(j, "spawn_score", c.spawn_score);
}

}  // namespace

std::string format_run_config(const RunConfig& cfg) {
  Json j;
  j["schema_version"] = cfg.schema_version;
  j["seed"] = cfg.seed;
  j["image_w"] = cfg.image_w;
  j["image_h"] = cfg.image_h;
  j["associator"] = associator_json(cfg.associator);
  j["lifecycle"] = lifecycle_json(cfg.lifecycle);
  j["train"] = train_json(cfg.train);
  j["scene"] = scene_json(cfg.scene);
  j["noise"] = noise_json(cfg.noise);
  j["greedy"] = greedy_json(cfg.greedy);
  j["data_dir"] = cfg.data_dir;
  j["checkpoint"] = cfg.checkpoint;
  j["results"] = cfg.results;
  j["out_dir"] = cfg.out_dir;
  return j.dump(2) + "\n";
}

RunConfig parse_run_config(const std::string& text) {
  try {
    Json j = Json::parse(text);
    check_keys(j,
               {"schema_version", "seed", "image_w", "image_h", "associator",
                "lifecycle", "train", "scene", "noise", "greedy", "data_dir",
                "checkpoint", "results", "out_dir"},
               "config");
    RunConfig cfg;
    read_field(j, "schema_version", cfg.schema_version);
    if (cfg.schema_version != 1)
      throw std::runtime_error("config: unsupported schema_version " +
                               std::to_string(cfg.schema_version));
    read_field(j, "seed", cfg.seed);
    read_field(j, "image_w", cfg.image_w);
    read_field(j, "image_h", cfg.image_h);
    if (j.contains("associator"))
      associator_from(j.at("associator"), cfg.associator);
    if (j.contains("lifecycle"))
      lifecycle_from(j.at("lifecycle"), cfg.lifecycle);
    if (j.contains("train")) train_from(j.at("train"), cfg.train);
    if (j.contains("scene")) scene_from(j.at("scene"), cfg.scene);
    if (j.contains("noise")) noise_from(j.at("noise"), cfg.noise);
    if (j.contains("greedy")) greedy_from(j.at("greedy"), cfg.greedy);
    read_field(j, "data_dir", cfg.data_dir);
    read_field(j, "checkpoint", cfg.checkpoint);
    read_field(j, "results", cfg.results);
    read_field(j, "out_dir", cfg.out_dir);
    return cfg;
  } catch (const std::runtime_error&) {
    throw;
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("config: ") + e.what());
  }
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open for reading");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_run_config(buf.str());
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

void save_run_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  std::string text = format_run_config(cfg);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error(path + ": write failed");
}

// --- checkpoints -------------------------------------------------------------

namespace {

template <typename T>
void check_fingerprint_field(const char* name, const T& file_value,
                             const T& model_value) {
  if (file_value != model_value)
    throw std::runtime_error(std::string("checkpoint fingerprint mismatch: ") +
                             name);
}

void verify_fingerprint(const assoc::AssociatorConfig& file,
                        const assoc::AssociatorConfig& model) {
  check_fingerprint_field("d_model", file.d_model, model.d_model);
  check_fingerprint_field("n_heads", file.n_heads, model.n_heads);
  check_fingerprint_field("ffn_dim", file.ffn_dim, model.ffn_dim);
  check_fingerprint_field("tau_q", file.tau_q, model.tau_q);
  check_fingerprint_field("ema_weight", file.ema_weight, model.ema_weight);
  check_fingerprint_field("temperature", file.temperature, model.temperature);
  check_fingerprint_field("use_learned_projections",
                          file.use_learned_projections,
                          model.use_learned_projections);
  check_fingerprint_field("identity_norm", file.identity_norm,
                          model.identity_norm);
  check_fingerprint_field("logit_space_box_update",
                          file.logit_space_box_update,
                          model.logit_space_box_update);
  check_fingerprint_field("noisy_mode", noisy_name(file.noisy_mode),
                          noisy_name(model.noisy_mode));
}

Json load_checkpoint_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open for reading");
  Json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  if (!j.is_object() || j.value("kind", std::string{}) != "checkpoint")
    throw std::runtime_error(path + ": not a checkpoint file");
  return j;
}

}  // namespace

void save_checkpoint(const std::string& path,
                     const assoc::AssociatorModel& model,
                     const train::LossWeights& weights,
                     const CheckpointMeta& meta) {
  Json j;
  j["kind"] = "checkpoint";
  j["schema_version"] = meta.schema_version;
  j["meta"] = {{"seed", meta.seed},
               {"epochs_trained", meta.epochs_trained},
               {"final_loss", meta.final_loss}};
  j["fingerprint"] = associator_json(model.config());
  j["loss_weights"] = weights_json(weights);
  Json tensors = Json::object();
  const ad::ParamSet& params = model.params();
  for (const std::string& name : params.names()) {
    const Eigen::MatrixXd& m = params.value(name);
    Json t;
    t["rows"] = m.rows();
    t["cols"] = m.cols();
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
    t["data"] = data;
    tensors[name] = std::move(t);
  }
  j["tensors"] = std::move(tensors);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  std::string text = j.dump();
  text += '\n';
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error(path + ": write failed");
}

assoc::AssociatorConfig peek_checkpoint_config(const std::string& path) {
  Json j = load_checkpoint_json(path);
  if (!j.contains("fingerprint"))
    throw std::runtime_error(path + ": missing fingerprint");
  assoc::AssociatorConfig cfg;
  associator_from(j.at("fingerprint"), cfg);
  return cfg;
}

CheckpointMeta load_checkpoint(const std::string& path,
                               assoc::AssociatorModel& model) {
  Json j = load_checkpoint_json(path);
  if (!j.contains("fingerprint"))
    throw std::runtime_error(path + ": missing fingerprint");
  assoc::AssociatorConfig file_cfg;
  associator_from(j.at("fingerprint"), file_cfg);
  verify_fingerprint(file_cfg, model.config());

  const Json& tensors = j.at("tensors");
  ad::ParamSet& params = model.params();
  for (auto it = tensors.begin(); it != tensors.end(); ++it) {
    if (!params.contains(it.key()))
      throw std::runtime_error(path + ": unexpected tensor '" + it.key() +
                               "'");
  }
  for (const std::string& name : params.names()) {
    if (!tensors.contains(name))
      throw std::runtime_error(path + ": missing tensor '" + name + "'");
    const Json& t = tensors.at(name);
    Eigen::MatrixXd& m = params.value(name);
    if (t.at("rows").get<Eigen::Index>() != m.rows() ||
        t.at("cols").get<Eigen::Index>() != m.cols())
      throw std::runtime_error(path + ": tensor '" + name +
                               "' has the wrong shape");
    const auto data = t.at("data").get<std::vector<double>>();
    if (data.size() != static_cast<std::size_t>(m.size()))
      throw std::runtime_error(path + ": tensor '" + name +
                               "' has the wrong element count");
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = data[k++];
  }

  CheckpointMeta meta;
  read_field(j, "schema_version", meta.schema_version);
  if (j.contains("meta")) {
    const Json& mj = j.at("meta");
    read_field(mj, "seed", meta.seed);
    read_field(mj, "epochs_trained", meta.epochs_trained);
    read_field(mj, "final_loss", meta.final_loss);
  }
  return meta;
}

}  // namespace qtrack::io
