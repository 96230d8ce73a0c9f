#include "detbench/report.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <thread>

#include <json.hpp>

#include "detbench/errors.hpp"

namespace detbench {

using nlohmann::json;

std::vector<double> default_iou_grid() {
  std::vector<double> grid;
  for (int i = 0; i < 10; ++i) grid.push_back(0.50 + 0.05 * i);
  return grid;
}

namespace {

const std::vector<BoundingBox> kNoBoxes;

const std::vector<BoundingBox>& predictions_for(const PredictionSet& preds,
                                                const std::string& image_id) {
  const auto it = preds.by_image.find(image_id);
  return it == preds.by_image.end() ? kNoBoxes : it->second;
}

}  // namespace

EvaluationReport build_report(const Dataset& dataset, const PredictionSet& predictions,
                              const EvaluationOptions& options) {
  EvaluationReport rep;
  rep.seed = options.seed;
  rep.classes = dataset.classes;
  rep.iou_grid = options.iou_grid.empty() ? default_iou_grid() : options.iou_grid;
  if (dataset.records.empty()) raise(Errc::empty_list, "dataset has no images");

  const int n_images = static_cast<int>(dataset.records.size());
  const int threads = std::max(1, std::min(options.threads, n_images));

  // Parallel per-image matching; merge order is fixed by image index, so the
  // result does not depend on the thread count.
  std::vector<MatchResult> per_image(static_cast<std::size_t>(n_images));
  std::vector<ConfusionMatrix> per_thread_cm(
      static_cast<std::size_t>(threads),
      make_confusion_matrix(dataset.classes.size(), options.confusion_conf_threshold,
                            options.confusion_iou_threshold));
  {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    const auto work = [&](int tid) {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n_images) return;
        const auto& rec = dataset.records[static_cast<std::size_t>(i)];
        const auto& preds = predictions_for(predictions, rec.image_id);
        per_image[static_cast<std::size_t>(i)] =
            match_predictions(rec.ground_truth, preds, rep.iou_grid);
        accumulate_confusion(per_thread_cm[static_cast<std::size_t>(tid)], rec.ground_truth,
                             preds);
      }
    };
    if (threads == 1) {
      work(0);
    } else {
      pool.reserve(static_cast<std::size_t>(threads));
      for (int t = 0; t < threads; ++t) pool.emplace_back(work, t);
      for (auto& th : pool) th.join();
    }
  }

  MatchResult match;
  for (const auto& m : per_image) match.merge(m);
  // classes with no boxes anywhere still need slots
  if (match.gt_per_class.size() < static_cast<std::size_t>(dataset.classes.size())) {
    match.gt_per_class.resize(static_cast<std::size_t>(dataset.classes.size()), 0);
  }

  rep.confusion = per_thread_cm[0];
  for (int t = 1; t < threads; ++t) {
    const auto& cm = per_thread_cm[static_cast<std::size_t>(t)];
    for (std::size_t i = 0; i < cm.counts.size(); ++i) rep.confusion.counts[i] += cm.counts[i];
  }

  std::vector<double> ap50s, ap75s, ap5095s;
  const bool has75 = [&] {
    for (const double t : rep.iou_grid) {
      if (std::abs(t - 0.75) < 1e-9) return true;
    }
    return false;
  }();
  for (int c = 0; c < dataset.classes.size(); ++c) {
    PerClassMetrics pc;
    pc.class_id = c;
    pc.name = dataset.classes.name(c);
    pc.ground_truth = match.gt_count(c);
    pc.ap50 = average_precision(match, c, 0.5);
    if (has75) pc.ap75 = average_precision(match, c, 0.75);
    if (pc.ground_truth > 0) {
      std::vector<double> taus;
      for (const double t : rep.iou_grid) {
        const auto ap = average_precision(match, c, t);
        taus.push_back(*ap);  // present: the class has ground truth
      }
      pc.ap5095 = mean_ap(taus);
      ap50s.push_back(*pc.ap50);
      if (pc.ap75) ap75s.push_back(*pc.ap75);
      ap5095s.push_back(*pc.ap5095);
    }
    rep.per_class.push_back(std::move(pc));
  }
  if (!ap50s.empty()) rep.map50 = mean_ap(ap50s);
  if (!ap75s.empty()) rep.map75 = mean_ap(ap75s);
  if (!ap5095s.empty()) rep.map5095 = mean_ap(ap5095s);

  rep.curves = sweep_curves(match, 0.5, options.sweep_points);
  if (options.latencies_ms) rep.timing = timing_stats(*options.latencies_ms);
  return rep;
}

namespace {

json sample_to_json(const CurveSample& s) {
  return json{{"threshold", s.confidence_threshold},
              {"precision", s.precision},
              {"recall", s.recall},
              {"f1", s.f1}};
}

json optional_to_json(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

std::string fmt4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

std::string report_to_json(const EvaluationReport& report) {
  json j;
  j["schema_version"] = 1;
  j["metadata"] = {{"dataset_id", report.dataset_id},
                   {"seed", report.seed},
                   {"iou_grid", report.iou_grid},
                   {"class_names", report.classes.names()}};
  json per_class = json::array();
  for (const auto& pc : report.per_class) {
    per_class.push_back({{"class_id", pc.class_id},
                         {"name", pc.name},
                         {"ground_truth", pc.ground_truth},
                         {"ap50", optional_to_json(pc.ap50)},
                         {"ap75", optional_to_json(pc.ap75)},
                         {"ap5095", optional_to_json(pc.ap5095)}});
  }
  j["per_class"] = std::move(per_class);
  j["map50"] = optional_to_json(report.map50);
  j["map75"] = optional_to_json(report.map75);
  j["map5095"] = optional_to_json(report.map5095);

  json curves;
  curves["best_f1"] = report.curves.best_f1;
  curves["best_f1_threshold"] = report.curves.best_f1_threshold;
  json all = json::array();
  for (const auto& s : report.curves.all_classes) all.push_back(sample_to_json(s));
  curves["all_classes"] = std::move(all);
  json per_class_curves;
  for (std::size_t c = 0; c < report.curves.per_class.size(); ++c) {
    json arr = json::array();
    for (const auto& s : report.curves.per_class[c]) arr.push_back(sample_to_json(s));
    per_class_curves[report.classes.name(static_cast<int>(c))] = std::move(arr);
  }
  curves["per_class"] = std::move(per_class_curves);
  j["curves"] = std::move(curves);

  const int side = report.confusion.class_count + 1;
  json counts = json::array(), norm = json::array();
  const auto normalized = report.confusion.normalized();
  for (int r = 0; r < side; ++r) {
    json crow = json::array(), nrow = json::array();
    for (int c = 0; c < side; ++c) {
      crow.push_back(report.confusion.at(r, c));
      nrow.push_back(normalized[static_cast<std::size_t>(r * side + c)]);
    }
    counts.push_back(std::move(crow));
    norm.push_back(std::move(nrow));
  }
  j["confusion_matrix"] = {{"conf_threshold", report.confusion.conf_threshold},
                           {"iou_threshold", report.confusion.iou_threshold},
                           {"counts", std::move(counts)},
                           {"normalized", std::move(norm)}};

  if (report.timing) {
    j["timing"] = {{"count", report.timing->latencies_ms.size()},
                   {"mean_ms", report.timing->mean_ms},
                   {"median_ms", report.timing->median_ms},
                   {"p95_ms", report.timing->p95_ms},
                   {"fps", report.timing->fps}};
  } else {
    j["timing"] = nullptr;
  }
  return j.dump(2) + "\n";
}

std::string curves_to_csv(const SweepCurves& curves) {
  std::string out = "threshold,precision,recall,f1\n";
  for (const auto& s : curves.all_classes) {
    out += fmt4(s.confidence_threshold);
    out += ',';
    out += fmt4(s.precision);
    out += ',';
    out += fmt4(s.recall);
    out += ',';
    out += fmt4(s.f1);
    out += '\n';
  }
  return out;
}

std::string confusion_to_csv(const ConfusionMatrix& cm, const ClassMap& classes) {
  if (classes.size() != cm.class_count) {
    raise(Errc::shape_mismatch, "class map does not match confusion matrix");
  }
  const int side = cm.class_count + 1;
  const auto label = [&](int i) {
    return i == cm.class_count ? std::string("background") : classes.name(i);
  };
  std::string out = "true\\predicted";
  for (int c = 0; c < side; ++c) {
    out += ',';
    out += label(c);
  }
  out += '\n';
  for (int r = 0; r < side; ++r) {
    out += label(r);
    for (int c = 0; c < side; ++c) {
      out += ',';
      out += std::to_string(cm.at(r, c));
    }
    out += '\n';
  }
  out += '\n';
  const auto normalized = cm.normalized();
  out += "normalized";
  for (int c = 0; c < side; ++c) {
    out += ',';
    out += label(c);
  }
  out += '\n';
  for (int r = 0; r < side; ++r) {
    out += label(r);
    for (int c = 0; c < side; ++c) {
      out += ',';
      out += fmt4(normalized[static_cast<std::size_t>(r * side + c)]);
    }
    out += '\n';
  }
  return out;
}

std::string comparison_to_json(const std::vector<ComparisonRow>& rows) {
  json j;
  j["schema_version"] = 1;
  json models = json::array();
  for (const auto& r : rows) {
    models.push_back({{"model", r.model},
                      {"map50", optional_to_json(r.map50)},
                      {"map75", optional_to_json(r.map75)},
                      {"map5095", optional_to_json(r.map5095)},
                      {"fps", optional_to_json(r.fps)}});
  }
  j["models"] = std::move(models);
  return j.dump(2) + "\n";
}

std::string comparison_to_csv(const std::vector<ComparisonRow>& rows) {
  std::string out = "model,mAP@0.5,mAP@0.75,mAP@[0.5:0.95],FPS\n";
  const auto cell = [](const std::optional<double>& v) {
    return v ? fmt4(*v) : std::string("n/a");
  };
  for (const auto& r : rows) {
    out += r.model;
    out += ',';
    out += cell(r.map50);
    out += ',';
    out += cell(r.map75);
    out += ',';
    out += cell(r.map5095);
    out += ',';
    out += cell(r.fps);
    out += '\n';
  }
  return out;
}

}  // namespace detbench
