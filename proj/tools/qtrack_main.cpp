// qtrack: the command-line surface tying the pipeline together.
//
//   generate   synthetic scenes + frozen-detector outputs -> dataset dirs
//   train      fit the associator on dataset dirs -> checkpoint
//   track      run the learned tracker (or the greedy baseline) -> MOT file
//   eval       score results against ground truth -> table / CSV
//   compare    two result files against one ground truth, side by side
//   plot       per-frame overlays and attention heat maps for debugging
//
// Every command exits nonzero with a one-line "error: <reason>" on failure.
// All randomness flows from the seed in the config (or the --seed override);
// each producing command writes its resolved config next to its outputs.
// The QTRACK_VERBOSE environment variable enables progress logging on
// stderr and changes nothing else.

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qtrack/baseline.hpp"
#include "qtrack/checkpoint.hpp"
#include "qtrack/config_io.hpp"
#include "qtrack/dataset.hpp"
#include "qtrack/metrics.hpp"
#include "qtrack/mot_io.hpp"
#include "qtrack/render.hpp"
#include "qtrack/tracker.hpp"
#include "qtrack/training.hpp"

namespace {

using namespace qtrack;

namespace fs = std::filesystem;

bool verbose() {
  static const bool on = [] {
    const char* v = std::getenv("QTRACK_VERBOSE");
    return v != nullptr && v[0] != '\0' &&
           !(v[0] == '0' && v[1] == '\0');
  }();
  return on;
}

std::ostream& vlog() { return std::cerr; }

/// Shortest round-trip decimal text, matching the MOT writer's style.
std::string num(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, end);
}

bool is_dataset_dir(const fs::path& dir) {
  return fs::exists(dir / "config.json") && fs::exists(dir / "det.txt");
}

/// A data path is either one dataset directory or a parent holding several
/// (any immediate child that looks like a dataset), sorted by name.
std::vector<fs::path> sequence_dirs(const std::string& data) {
  fs::path root(data);
  if (is_dataset_dir(root)) return {root};
  std::vector<fs::path> dirs;
  if (fs::is_directory(root))
    for (const auto& entry : fs::directory_iterator(root))
      if (entry.is_directory() && is_dataset_dir(entry.path()))
        dirs.push_back(entry.path());
  if (dirs.empty())
    throw std::runtime_error(data + ": no dataset found (need config.json + det.txt)");
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

io::Dataset load_single_sequence(const std::string& data) {
  std::vector<fs::path> dirs = sequence_dirs(data);
  if (dirs.size() > 1)
    throw std::runtime_error(data + ": holds " + std::to_string(dirs.size()) +
                             " sequences; point at one of them");
  return io::load_dataset(dirs.front().string());
}

/// Resolved-config path next to an output file: results.txt -> results.config.json.
std::string config_sibling(const std::string& out_path) {
  fs::path p(out_path);
  return (p.parent_path() / (p.stem().string() + ".config.json")).string();
}

metrics::TrackSet records_to_set(const std::vector<io::MotRecord>& mot,
                                 double image_w, double image_h,
                                 int frame_count) {
  return metrics::from_records(io::from_mot(mot, image_w, image_h),
                               frame_count);
}

int max_frame(const std::vector<io::MotRecord>& mot) {
  int m = 0;
  for (const io::MotRecord& r : mot) m = std::max(m, r.frame);
  return m;
}

/// Ground truth + both sides' frame geometry for eval/compare. `gt_path`
/// may be a dataset directory (preferred: carries image size and frame
/// count) or a bare MOT file (frame count inferred, default geometry --
/// IoU is invariant to the shared pixel scale, so scoring is unaffected).
struct EvalContext {
  metrics::TrackSet gt;
  double image_w = 1000.0;
  double image_h = 1000.0;
  int frame_count = 0;
};

EvalContext load_eval_context(const std::string& gt_path,
                              const std::vector<std::string>& result_paths) {
  EvalContext ctx;
  if (fs::is_directory(gt_path)) {
    io::Dataset ds = load_single_sequence(gt_path);
    ctx.gt = metrics::from_ground_truth(ds.gt);
    ctx.image_w = ds.config.image_w;
    ctx.image_h = ds.config.image_h;
    ctx.frame_count = ds.config.scene.frame_count;
    return ctx;
  }
  std::vector<io::MotRecord> gt_mot = io::read_mot(gt_path);
  int frames = max_frame(gt_mot);
  for (const std::string& path : result_paths)
    frames = std::max(frames, max_frame(io::read_mot(path)));
  ctx.frame_count = frames;
  ctx.gt = records_to_set(gt_mot, ctx.image_w, ctx.image_h, frames);
  return ctx;
}

metrics::MetricsReport score(const EvalContext& ctx,
                             const std::string& results_path) {
  metrics::TrackSet pred = records_to_set(
      io::read_mot(results_path), ctx.image_w, ctx.image_h, ctx.frame_count);
  return metrics::evaluate(ctx.gt, pred);
}

// ---------------------------------------------------------------------------
// report formatting

struct MetricRow {
  const char* name;
  double value;
  bool ratio;    // 4-decimal ratio vs integer count
  bool defined;  // MOTA can be undefined (GT = 0)
};

std::vector<MetricRow> report_rows(const metrics::MetricsReport& r) {
  return {
      {"HOTA", r.hota.hota, true, true},
      {"DetA", r.hota.deta, true, true},
      {"AssA", r.hota.assa, true, true},
      {"IDF1", r.idf.idf1, true, true},
      {"MOTA", r.clear.mota, true, r.clear.defined},
      {"IDSW", double(r.clear.idsw), false, true},
      {"FP", double(r.clear.fp), false, true},
      {"FN", double(r.clear.fn), false, true},
      {"IDTP", double(r.idf.idtp), false, true},
      {"GT", double(r.clear.gt), false, true},
  };
}

std::string cell(const MetricRow& row) {
  if (!row.defined) return "n/a";
  if (!row.ratio) return std::to_string(static_cast<long>(row.value));
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << row.value;
  return os.str();
}

std::string csv_cell(const MetricRow& row) {
  if (!row.defined) return "nan";
  if (!row.ratio) return std::to_string(static_cast<long>(row.value));
  return num(row.value);
}

void print_report(const metrics::MetricsReport& r) {
  for (const MetricRow& row : report_rows(r))
    std::cout << std::left << std::setw(6) << row.name << std::right
              << std::setw(10) << cell(row) << "\n";
}

void write_report_csv(const metrics::MetricsReport& r,
                      const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  std::string header, values;
  for (const MetricRow& row : report_rows(r)) {
    header += header.empty() ? "" : ",";
    std::string key(row.name);
    std::transform(key.begin(), key.end(), key.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    header += key;
    values += values.empty() ? "" : ",";
    values += csv_cell(row);
  }
  out << header << "\n" << values << "\n";
}

void write_per_alpha_csv(const metrics::HotaResult& h,
                         const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "alpha,hota,deta,assa\n";
  std::array<double, metrics::kHotaAlphaCount> alphas =
      metrics::hota_alphas();
  for (int i = 0; i < metrics::kHotaAlphaCount; ++i)
    out << num(alphas[i]) << "," << num(h.per_alpha_hota[i]) << ","
        << num(h.per_alpha_deta[i]) << "," << num(h.per_alpha_assa[i])
        << "\n";
}

// ---------------------------------------------------------------------------
// commands

struct GenerateArgs {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int count = 1;
};

void run_generate(const GenerateArgs& a) {
  io::RunConfig cfg =
      a.config.empty() ? io::RunConfig{} : io::load_run_config(a.config);
  if (a.seed_set) cfg.seed = a.seed;
  fs::create_directories(a.out);
  for (int i = 0; i < a.count; ++i) {
    io::RunConfig seq_cfg = cfg;
    seq_cfg.seed = cfg.seed + static_cast<std::uint64_t>(i);
    sim::GroundTruthSequence gt =
        sim::generate_sequence(seq_cfg.scene, seq_cfg.seed);
    // Detection stream seed is scene seed + 1 by convention; the detector's
    // projection weights stay pinned by noise.detector_seed across sequences.
    std::vector<sim::FrameObservation> obs =
        sim::detect_all(gt, seq_cfg.noise, seq_cfg.seed + 1);
    std::ostringstream name;
    name << "seq_" << std::setw(3) << std::setfill('0') << i + 1;
    fs::path dir = fs::path(a.out) / name.str();
    io::write_dataset(dir.string(), seq_cfg, gt, obs);
    if (verbose())
      vlog() << "generate: " << dir.string() << " seed=" << seq_cfg.seed
             << " frames=" << seq_cfg.scene.frame_count << "\n";
  }
  std::cout << "wrote " << a.count << " sequence"
            << (a.count == 1 ? "" : "s") << " to " << a.out << "\n";
}

struct TrainArgs {
  std::string data;
  std::string out;
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int epochs = 0;  // 0 = keep config value
};

void run_train(const TrainArgs& a) {
  std::vector<fs::path> dirs = sequence_dirs(a.data);
  std::vector<train::TrainingSequence> sequences;
  io::RunConfig cfg;
  bool cfg_loaded = false;
  if (!a.config.empty()) {
    cfg = io::load_run_config(a.config);
    cfg_loaded = true;
  }
  for (const fs::path& dir : dirs) {
    io::Dataset ds = io::load_dataset(dir.string());
    if (!cfg_loaded) {
      cfg = ds.config;  // first sequence's config drives the run
      cfg_loaded = true;
    }
    sequences.push_back({std::move(ds.gt), std::move(ds.observations)});
  }
  if (a.seed_set) {
    cfg.seed = a.seed;
    cfg.train.seed = a.seed;
  }
  if (a.epochs > 0) cfg.train.epochs = a.epochs;

  assoc::AssociatorModel model(cfg.associator, cfg.seed);
  train::TrainReport report = train::train(model, sequences, cfg.train);
  if (verbose())
    for (std::size_t e = 0; e < report.epoch_mean.size(); ++e)
      vlog() << "train: epoch " << e + 1 << " mean loss "
             << report.epoch_mean[e] << "\n";

  io::CheckpointMeta meta;
  meta.seed = cfg.seed;
  meta.epochs_trained = cfg.train.epochs;
  meta.final_loss =
      report.epoch_mean.empty() ? 0.0 : report.epoch_mean.back();
  save_checkpoint(a.out, model, cfg.train.weights, meta);
  io::save_run_config(cfg, config_sibling(a.out));
  std::cout << "trained " << cfg.train.epochs << " epochs on "
            << sequences.size() << " sequence"
            << (sequences.size() == 1 ? "" : "s") << ", final mean loss "
            << num(meta.final_loss) << "; wrote " << a.out << "\n";
}

struct TrackArgs {
  std::string data;
  std::string checkpoint;
  std::string out;
  std::string config;
  bool greedy = false;
};

void run_track(const TrackArgs& a) {
  if (a.greedy != a.checkpoint.empty())
    throw std::runtime_error(
        "track needs exactly one of --checkpoint and --greedy");
  io::Dataset ds = load_single_sequence(a.data);
  io::RunConfig cfg =
      a.config.empty() ? ds.config : io::load_run_config(a.config);

  std::vector<track::TrackRecord> records;
  if (a.greedy) {
    records = baseline::greedy_track(ds.observations, cfg.greedy);
  } else {
    assoc::AssociatorConfig arch = io::peek_checkpoint_config(a.checkpoint);
    assoc::AssociatorModel model(arch, 0);
    io::load_checkpoint(a.checkpoint, model);
    records =
        track::run_tracker(model, ds.observations, cfg.lifecycle).records;
  }
  io::write_mot(io::to_mot(records, cfg.image_w, cfg.image_h), a.out);
  io::save_run_config(cfg, config_sibling(a.out));

  std::set<int> identities;
  for (const track::TrackRecord& r : records) identities.insert(r.id);
  std::cout << "tracked " << ds.observations.size() << " frames: "
            << records.size() << " records, " << identities.size()
            << " identities; wrote " << a.out << "\n";
}

struct EvalArgs {
  std::string gt;
  std::string results;
  std::string csv;
  std::string per_alpha;
};

void run_eval(const EvalArgs& a) {
  EvalContext ctx = load_eval_context(a.gt, {a.results});
  metrics::MetricsReport report = score(ctx, a.results);
  print_report(report);
  if (!report.clear.defined)
    std::cout << "(MOTA undefined: ground truth is empty)\n";
  if (report.hota.empty_convention)
    std::cout << "(empty ground truth and empty results: metrics are 1.0 "
                 "by convention)\n";
  if (!a.csv.empty()) write_report_csv(report, a.csv);
  if (!a.per_alpha.empty()) write_per_alpha_csv(report.hota, a.per_alpha);
}

struct CompareArgs {
  std::string gt;
  std::string a;
  std::string b;
  std::string label_a = "A";
  std::string label_b = "B";
};

void run_compare(const CompareArgs& args) {
  EvalContext ctx = load_eval_context(args.gt, {args.a, args.b});
  metrics::MetricsReport ra = score(ctx, args.a);
  metrics::MetricsReport rb = score(ctx, args.b);
  std::vector<MetricRow> rows_a = report_rows(ra);
  std::vector<MetricRow> rows_b = report_rows(rb);
  std::cout << std::left << std::setw(6) << "metric" << std::right
            << std::setw(12) << args.label_a << std::setw(12) << args.label_b
            << std::setw(12) << "delta" << "\n";
  for (std::size_t i = 0; i < rows_a.size(); ++i) {
    std::string delta = "n/a";
    if (rows_a[i].defined && rows_b[i].defined) {
      std::ostringstream os;
      os << std::showpos << std::fixed
         << std::setprecision(rows_a[i].ratio ? 4 : 0)
         << rows_b[i].value - rows_a[i].value;
      delta = os.str();
    }
    std::cout << std::left << std::setw(6) << rows_a[i].name << std::right
              << std::setw(12) << cell(rows_a[i]) << std::setw(12)
              << cell(rows_b[i]) << std::setw(12) << delta << "\n";
  }
}

struct PlotArgs {
  std::string data;
  std::string results;
  std::string out;
  std::string checkpoint;
  int cell_px = 16;
  int max_frames = 0;  // 0 = all
};

void run_plot(const PlotArgs& a) {
  io::Dataset ds = load_single_sequence(a.data);
  const io::RunConfig& cfg = ds.config;
  int frame_count = cfg.scene.frame_count;
  metrics::TrackSet gt = metrics::from_ground_truth(ds.gt);
  metrics::TrackSet pred = records_to_set(io::read_mot(a.results),
                                          cfg.image_w, cfg.image_h,
                                          frame_count);
  fs::create_directories(a.out);
  int limit = a.max_frames > 0 ? std::min(a.max_frames, frame_count)
                               : frame_count;
  int w = static_cast<int>(cfg.image_w);
  int h = static_cast<int>(cfg.image_h);
  for (int f = 0; f < limit; ++f) {
    render::Image img = render::render_overlay(
        gt[static_cast<std::size_t>(f)], pred[static_cast<std::size_t>(f)],
        w, h);
    std::ostringstream name;
    name << "frame_" << std::setw(3) << std::setfill('0') << f + 1 << ".ppm";
    render::write_ppm(img, (fs::path(a.out) / name.str()).string());
  }

  int heat_maps = 0;
  if (!a.checkpoint.empty()) {
    assoc::AssociatorConfig arch = io::peek_checkpoint_config(a.checkpoint);
    assoc::AssociatorModel model(arch, 0);
    io::load_checkpoint(a.checkpoint, model);
    track::TrackerOutputs outputs = track::run_tracker(
        model, ds.observations, cfg.lifecycle, /*keep_attention=*/true);
    for (int f = 0; f < limit; ++f) {
      auto dump = [&](const Eigen::MatrixXd& weights, const char* kind) {
        if (weights.size() == 0) return;
        std::ostringstream name;
        name << kind << "_" << std::setw(3) << std::setfill('0') << f + 1
             << ".ppm";
        render::write_ppm(render::render_attention(weights, a.cell_px),
                          (fs::path(a.out) / name.str()).string());
        ++heat_maps;
      };
      dump(outputs.det_attention[static_cast<std::size_t>(f)], "det_attn");
      dump(outputs.trk_attention[static_cast<std::size_t>(f)], "trk_attn");
    }
  }
  io::save_run_config(cfg, (fs::path(a.out) / "config.json").string());
  std::cout << "wrote " << limit << " overlays and " << heat_maps
            << " attention maps to " << a.out << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthetic multi-object tracking pipeline"};
  app.require_subcommand(1);

  GenerateArgs gen;
  CLI::App* c_gen = app.add_subcommand(
      "generate", "write synthetic sequences as dataset directories");
  c_gen->add_option("--config", gen.config, "run config file (JSON)");
  c_gen->add_option("--out", gen.out, "output directory")->required();
  CLI::Option* gen_seed = c_gen->add_option("--seed", gen.seed,
                                            "override the config seed");
  c_gen->add_option("--count", gen.count, "number of sequences")
      ->check(CLI::PositiveNumber);

  TrainArgs tr;
  CLI::App* c_train =
      app.add_subcommand("train", "fit the associator, write a checkpoint");
  c_train->add_option("--data", tr.data, "dataset directory (or parent)")
      ->required();
  c_train->add_option("--out", tr.out, "checkpoint file to write")
      ->required();
  c_train->add_option("--config", tr.config,
                      "run config overriding the dataset's");
  CLI::Option* train_seed = c_train->add_option(
      "--seed", tr.seed, "override model-init and training seeds");
  c_train->add_option("--epochs", tr.epochs, "override epoch count")
      ->check(CLI::PositiveNumber);

  TrackArgs tk;
  CLI::App* c_track = app.add_subcommand(
      "track", "run a tracker over a dataset, write MOT results");
  c_track->add_option("--data", tk.data, "dataset directory")->required();
  c_track->add_option("--checkpoint", tk.checkpoint, "trained checkpoint");
  c_track->add_flag("--greedy", tk.greedy, "IoU-greedy baseline instead");
  c_track->add_option("--out", tk.out, "MOT result file to write")
      ->required();
  c_track->add_option("--config", tk.config,
                      "run config overriding the dataset's");

  EvalArgs ev;
  CLI::App* c_eval = app.add_subcommand(
      "eval", "score a result file against ground truth");
  c_eval->add_option("--gt", ev.gt, "dataset directory or MOT gt file")
      ->required();
  c_eval->add_option("--results", ev.results, "MOT result file")->required();
  c_eval->add_option("--csv", ev.csv, "also write a one-row CSV report");
  c_eval->add_option("--per-alpha", ev.per_alpha,
                     "also write per-threshold HOTA components CSV");

  CompareArgs cp;
  CLI::App* c_cmp = app.add_subcommand(
      "compare", "score two result files side by side");
  c_cmp->add_option("--gt", cp.gt, "dataset directory or MOT gt file")
      ->required();
  c_cmp->add_option("--a", cp.a, "first MOT result file")->required();
  c_cmp->add_option("--b", cp.b, "second MOT result file")->required();
  c_cmp->add_option("--label-a", cp.label_a, "column label");
  c_cmp->add_option("--label-b", cp.label_b, "column label");

  PlotArgs pl;
  CLI::App* c_plot = app.add_subcommand(
      "plot", "render overlay frames and attention heat maps");
  c_plot->add_option("--data", pl.data, "dataset directory")->required();
  c_plot->add_option("--results", pl.results, "MOT result file")->required();
  c_plot->add_option("--out", pl.out, "output directory")->required();
  c_plot->add_option("--checkpoint", pl.checkpoint,
                     "re-run this model to capture attention maps");
  c_plot->add_option("--cell", pl.cell_px, "pixels per attention entry")
      ->check(CLI::PositiveNumber);
  c_plot->add_option("--max-frames", pl.max_frames,
                     "render only the first N frames");

  try {
    app.parse(argc, argv);
    gen.seed_set = gen_seed->count() > 0;
    tr.seed_set = train_seed->count() > 0;
    if (c_gen->parsed()) run_generate(gen);
    if (c_train->parsed()) run_train(tr);
    if (c_track->parsed()) run_track(tk);
    if (c_eval->parsed()) run_eval(ev);
    if (c_cmp->parsed()) run_compare(cp);
    if (c_plot->parsed()) run_plot(pl);
  } catch (const CLI::Success& e) {
    return app.exit(e);  // --help and friends
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
