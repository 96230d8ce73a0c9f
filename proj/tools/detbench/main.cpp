// Command-line front door: evaluate predictions against a dataset, compare
// models, or preview the augmentation pipeline.

#include <charconv>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "detbench/augment.hpp"
#include "detbench/dataset.hpp"
#include "detbench/errors.hpp"
#include "detbench/image.hpp"
#include "detbench/report.hpp"
#include "detbench/rng.hpp"
#include "detbench/svg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace detbench;

namespace {

constexpr int kExitData = 2;
constexpr int kExitConfig = 3;

struct ModelSource {
  std::string name;
  fs::path predictions;
  std::optional<fs::path> latencies;
};

struct RunConfig {
  fs::path dataset_manifest;
  std::vector<ModelSource> models;
  std::vector<double> iou_grid;
  int sweep_points = 1000;
  double confusion_conf = 0.25;
  double confusion_iou = 0.45;
  AugmentationConfig augmentation;
  std::uint64_t seed = 0;
  std::optional<fs::path> output_dir;
};

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::bad_config, "cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    raise(Errc::bad_config, "config " + path.string() + ": " + e.what());
  }
  RunConfig cfg;
  const fs::path base = path.parent_path();
  const auto resolve = [&](const std::string& p) {
    fs::path q(p);
    return q.is_absolute() ? q : base / q;
  };
  if (!j.contains("dataset")) raise(Errc::bad_config, "config missing 'dataset'");
  cfg.dataset_manifest = resolve(j.at("dataset").get<std::string>());

  if (!j.contains("models") || !j.at("models").is_array() || j.at("models").empty()) {
    raise(Errc::bad_config, "config needs a non-empty 'models' array");
  }
  for (const auto& m : j.at("models")) {
    ModelSource src;
    src.name = m.at("name").get<std::string>();
    src.predictions = resolve(m.at("predictions").get<std::string>());
    if (m.contains("latencies")) src.latencies = resolve(m.at("latencies").get<std::string>());
    cfg.models.push_back(std::move(src));
  }

  if (j.contains("iou_grid")) {
    cfg.iou_grid = j.at("iou_grid").get<std::vector<double>>();
    for (std::size_t i = 0; i < cfg.iou_grid.size(); ++i) {
      if (cfg.iou_grid[i] <= 0.0 || cfg.iou_grid[i] > 1.0 ||
          (i > 0 && cfg.iou_grid[i] <= cfg.iou_grid[i - 1])) {
        raise(Errc::bad_config, "iou_grid must be strictly increasing within (0,1]");
      }
    }
  }
  if (j.contains("sweep_points")) {
    cfg.sweep_points = j.at("sweep_points").get<int>();
    if (cfg.sweep_points < 2) raise(Errc::bad_config, "sweep_points must be >= 2");
  }
  if (j.contains("confusion")) {
    const auto& c = j.at("confusion");
    if (c.contains("conf_threshold")) cfg.confusion_conf = c.at("conf_threshold").get<double>();
    if (c.contains("iou_threshold")) cfg.confusion_iou = c.at("iou_threshold").get<double>();
  }
  if (j.contains("augmentation")) {
    cfg.augmentation = augmentation_config_from_json_text(j.at("augmentation").dump());
  }
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("output_dir")) cfg.output_dir = resolve(j.at("output_dir").get<std::string>());
  return cfg;
}

std::vector<double> load_latencies(const fs::path& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::missing_file, "cannot open latency file " + path.string());
  std::vector<double> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    double v = 0.0;
    const char* first = line.data() + b;
    const char* last = line.data() + e + 1;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !(v > 0.0)) {
      raise(Errc::malformed_line,
            path.string() + ":" + std::to_string(line_no) + ": bad latency '" + line + "'");
    }
    out.push_back(v);
  }
  return out;
}

int worker_threads() {
  unsigned n = std::thread::hardware_concurrency();
  if (n == 0) n = 1;
  if (const char* env = std::getenv("DETBENCH_THREADS")) {
    unsigned cap = 0;
    const auto [ptr, ec] = std::from_chars(env, env + std::string_view(env).size(), cap);
    if (ec != std::errc() || *ptr != '\0' || cap == 0) {
      raise(Errc::bad_config, "DETBENCH_THREADS must be a positive integer");
    }
    n = std::min(n, cap);
  }
  return static_cast<int>(n);
}

/// Deletes everything registered unless commit() ran first.
class OutputGuard {
public:
  ~OutputGuard() {
    if (committed_) return;
    for (const auto& p : written_) {
      std::error_code ec;
      fs::remove(p, ec);
    }
  }
  void track(const fs::path& p) { written_.push_back(p); }
  void commit() { committed_ = true; }

private:
  std::vector<fs::path> written_;
  bool committed_ = false;
};

void write_text(OutputGuard& guard, const fs::path& path, const std::string& text) {
  guard.track(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(Errc::io_error, "cannot write " + path.string());
  out << text;
}

fs::path require_out_dir(const RunConfig& cfg, const std::string& cli_out) {
  fs::path dir;
  if (!cli_out.empty()) {
    dir = cli_out;
  } else if (cfg.output_dir) {
    dir = *cfg.output_dir;
  } else {
    raise(Errc::bad_config, "no output directory: pass --out or set output_dir in the config");
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    raise(Errc::bad_config, "cannot create output directory " + dir.string());
  }
  return dir;
}

EvaluationReport evaluate_model(const Dataset& dataset, const ModelSource& model,
                                const RunConfig& cfg, bool strict) {
  const PredictionSet preds = load_predictions(model.predictions, dataset, strict);
  EvaluationOptions opts;
  opts.iou_grid = cfg.iou_grid;
  opts.sweep_points = cfg.sweep_points;
  opts.confusion_conf_threshold = cfg.confusion_conf;
  opts.confusion_iou_threshold = cfg.confusion_iou;
  opts.seed = cfg.seed;
  opts.threads = worker_threads();
  if (model.latencies) opts.latencies_ms = load_latencies(*model.latencies);
  EvaluationReport rep = build_report(dataset, preds, opts);
  rep.dataset_id = cfg.dataset_manifest.stem().string();
  return rep;
}

int run_evaluate(const RunConfig& cfg, bool strict, const std::string& cli_out) {
  if (cfg.models.size() != 1) {
    raise(Errc::bad_config, "evaluate expects exactly one model, got " +
                                std::to_string(cfg.models.size()));
  }
  const fs::path out_dir = require_out_dir(cfg, cli_out);
  const Dataset dataset = load_dataset(cfg.dataset_manifest, strict);
  for (const auto& w : dataset.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());

  const auto t0 = std::chrono::steady_clock::now();
  const EvaluationReport rep = evaluate_model(dataset, cfg.models[0], cfg, strict);
  const auto elapsed =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  // own throughput goes to stderr only; report files stay byte-deterministic
  std::fprintf(stderr, "evaluated %zu images in %.1f ms (%.1f images/s)\n",
               dataset.records.size(), elapsed,
               1000.0 * static_cast<double>(dataset.records.size()) / std::max(elapsed, 1e-9));

  OutputGuard guard;
  write_text(guard, out_dir / "report.json", report_to_json(rep));
  write_text(guard, out_dir / "curves.csv", curves_to_csv(rep.curves));
  write_text(guard, out_dir / "confusion.csv", confusion_to_csv(rep.confusion, rep.classes));
  write_text(guard, out_dir / "pr_curve.svg",
             render_curve_svg(rep.curves, rep.classes, CurveKind::pr));
  write_text(guard, out_dir / "f1_curve.svg",
             render_curve_svg(rep.curves, rep.classes, CurveKind::f1));
  write_text(guard, out_dir / "precision_curve.svg",
             render_curve_svg(rep.curves, rep.classes, CurveKind::precision));
  write_text(guard, out_dir / "recall_curve.svg",
             render_curve_svg(rep.curves, rep.classes, CurveKind::recall));
  write_text(guard, out_dir / "confusion_matrix.svg",
             render_confusion_svg(rep.confusion, rep.classes));
  guard.commit();
  return 0;
}

int run_compare(const RunConfig& cfg, bool strict, const std::string& cli_out) {
  if (cfg.models.size() < 2) {
    raise(Errc::bad_config, "compare expects at least two models");
  }
  const fs::path out_dir = require_out_dir(cfg, cli_out);
  const Dataset dataset = load_dataset(cfg.dataset_manifest, strict);
  for (const auto& w : dataset.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());

  std::vector<ComparisonRow> rows;
  for (const auto& model : cfg.models) {
    const EvaluationReport rep = evaluate_model(dataset, model, cfg, strict);
    ComparisonRow row;
    row.model = model.name;
    row.map50 = rep.map50;
    row.map75 = rep.map75;
    row.map5095 = rep.map5095;
    if (rep.timing) row.fps = rep.timing->fps;
    rows.push_back(std::move(row));
  }

  OutputGuard guard;
  write_text(guard, out_dir / "compare.json", comparison_to_json(rows));
  write_text(guard, out_dir / "compare.csv", comparison_to_csv(rows));
  guard.commit();
  return 0;
}

json params_to_json(const AugmentParams& p) {
  json j;
  j["mosaic"] = p.mosaic_applied;
  if (p.mosaic_applied) {
    j["mosaic_center"] = {p.mosaic_center_x, p.mosaic_center_y};
    j["companions"] = p.companion_ids;
  }
  j["degrees"] = p.theta_deg;
  j["translate"] = {p.translate_x, p.translate_y};
  j["scale"] = p.scale;
  j["shear"] = {p.shear_x_deg, p.shear_y_deg};
  j["perspective"] = {p.perspective_x, p.perspective_y};
  j["hsv_gains"] = {p.gain_h, p.gain_s, p.gain_v};
  j["flipud"] = p.flipped_ud;
  j["fliplr"] = p.flipped_lr;
  return j;
}

int run_preview(const RunConfig& cfg, bool strict, const std::string& cli_out, int count,
                std::uint64_t seed) {
  if (count < 0) raise(Errc::bad_config, "--count must be >= 0");
  const fs::path out_dir = require_out_dir(cfg, cli_out);
  const Dataset dataset = load_dataset(cfg.dataset_manifest, strict);

  AugmentationConfig aug = cfg.augmentation;
  aug.seed = seed;
  for (const auto& w : validate_config(aug)) std::fprintf(stderr, "warning: %s\n", w.c_str());

  OutputGuard guard;
  json index;
  index["schema_version"] = 1;
  index["samples"] = json::array();

  if (count > 0) {
    std::vector<ImageSample> pool;
    for (const auto& rec : dataset.records) {
      const fs::path img_path = dataset.images_dir / (rec.image_id + ".png");
      ImageSample s;
      s.image_id = rec.image_id;
      s.pixels = read_png(img_path);  // DecodeError carries the path
      s.boxes = rec.ground_truth;
      pool.push_back(std::move(s));
    }
    PoolSampler sampler{pool};
    const int n = std::min<int>(count, static_cast<int>(pool.size()));
    for (int i = 0; i < n; ++i) {
      const AugmentResult res = apply_pipeline(pool[static_cast<std::size_t>(i)], aug, sampler);
      const std::string stem = res.sample.image_id + "_aug";
      const fs::path png_path = out_dir / (stem + ".png");
      guard.track(png_path);
      write_png(png_path, res.sample.pixels);
      const fs::path label_path = out_dir / (stem + ".txt");
      guard.track(label_path);
      write_label_file(label_path, res.sample.boxes, res.sample.pixels.width,
                       res.sample.pixels.height, false);
      json entry;
      entry["image_id"] = res.sample.image_id;
      entry["output_image"] = stem + ".png";
      entry["output_labels"] = stem + ".txt";
      entry["params"] = params_to_json(res.params);
      index["samples"].push_back(std::move(entry));
    }
  }
  write_text(guard, out_dir / "index.json", index.dump(2) + "\n");
  guard.commit();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"object-detection evaluation and augmentation toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  bool lenient = false;
  int preview_count = 8;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "run configuration JSON")->required();
    cmd->add_option("--seed", seed, "override the config seed");
    cmd->add_flag("--lenient{true},--strict{false}", lenient,
                  "continue past bad label lines (default: strict)");
    cmd->add_option("--out", out_dir, "output directory (overrides config output_dir)");
  };

  CLI::App* cmd_evaluate = app.add_subcommand("evaluate", "score one model's predictions");
  add_common(cmd_evaluate);
  CLI::App* cmd_compare = app.add_subcommand("compare", "score several models side by side");
  add_common(cmd_compare);
  CLI::App* cmd_preview =
      app.add_subcommand("augment-preview", "write augmented images and parameter logs");
  add_common(cmd_preview);
  cmd_preview->add_option("--count", preview_count, "number of images to augment");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    RunConfig cfg = load_run_config(config_path);
    const auto* seed_opt = app.get_subcommands()[0]->get_option("--seed");
    if (seed_opt->count() > 0) cfg.seed = seed;
    const bool strict = !lenient;
    if (cmd_evaluate->parsed()) return run_evaluate(cfg, strict, out_dir);
    if (cmd_compare->parsed()) return run_compare(cfg, strict, out_dir);
    return run_preview(cfg, strict, out_dir, preview_count, cfg.seed);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return is_data_error(e.code()) ? kExitData : kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
}
