#include <doctest.h>

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "detbench/dataset.hpp"
#include "detbench/errors.hpp"
#include "detbench/metrics.hpp"
#include "detbench/report.hpp"
#include "detbench/svg.hpp"
#include "test_util.hpp"

using namespace detbench;

namespace {

// three images, mixed true/false positives, one class with no ground truth
Dataset make_dataset() {
  Dataset ds;
  ds.classes = ClassMap({"car", "truck", "bus"});
  ImageRecord a;
  a.image_id = "img_a";
  a.width = 416;
  a.height = 416;
  a.ground_truth = {testutil::box(10, 10, 50, 50, 0), testutil::box(100, 100, 180, 160, 1)};
  ImageRecord b;
  b.image_id = "img_b";
  b.width = 416;
  b.height = 416;
  b.ground_truth = {testutil::box(0, 0, 40, 40, 0), testutil::box(60, 60, 100, 100, 0)};
  ImageRecord c;
  c.image_id = "img_c";
  c.width = 416;
  c.height = 416;
  c.ground_truth = {testutil::box(20, 20, 90, 80, 1)};
  ds.records = {a, b, c};
  return ds;
}

PredictionSet make_predictions() {
  PredictionSet ps;
  ps.by_image["img_a"] = {
      testutil::box(10, 10, 50, 50, 0, 0.9),      // exact hit
      testutil::box(200, 200, 240, 240, 0, 0.8),  // ghost
      testutil::box(100, 100, 180, 136, 1, 0.7),  // IoU 0.6: hit at 0.5, miss at 0.75
  };
  ps.by_image["img_b"] = {
      testutil::box(0, 0, 40, 40, 0, 0.95),
      testutil::box(5, 5, 25, 25, 2, 0.6),  // no bus ground truth anywhere
      testutil::box(62, 62, 100, 100, 0, 0.5),
  };
  // img_c has no predictions at all
  return ps;
}

// same per-image matching and merge order the report builder uses
MatchResult merged_matches(const Dataset& ds, const PredictionSet& ps,
                           const std::vector<double>& grid) {
  MatchResult merged;
  const std::vector<BoundingBox> none;
  for (const auto& rec : ds.records) {
    const auto it = ps.by_image.find(rec.image_id);
    merged.merge(match_predictions(rec.ground_truth, it == ps.by_image.end() ? none : it->second,
                                   grid));
  }
  if (merged.gt_per_class.size() < static_cast<std::size_t>(ds.classes.size())) {
    merged.gt_per_class.resize(static_cast<std::size_t>(ds.classes.size()), 0);
  }
  return merged;
}

}  // namespace

TEST_CASE("report means equal the per-class average precisions exactly") {
  const Dataset ds = make_dataset();
  const PredictionSet ps = make_predictions();
  EvaluationOptions opt;
  const EvaluationReport rep = build_report(ds, ps, opt);

  REQUIRE(rep.iou_grid == default_iou_grid());
  const MatchResult match = merged_matches(ds, ps, rep.iou_grid);

  REQUIRE(rep.per_class.size() == 3);
  CHECK(rep.per_class[0].ground_truth == 3);
  CHECK(rep.per_class[1].ground_truth == 2);
  CHECK(rep.per_class[2].ground_truth == 0);
  CHECK(!rep.per_class[2].ap50.has_value());
  CHECK(!rep.per_class[2].ap75.has_value());
  CHECK(!rep.per_class[2].ap5095.has_value());

  std::vector<double> ap50s, ap75s, ap5095s;
  for (int c = 0; c < ds.classes.size(); ++c) {
    const auto ap50 = average_precision(match, c, 0.5);
    const auto ap75 = average_precision(match, c, 0.75);
    CHECK(rep.per_class[static_cast<std::size_t>(c)].ap50 == ap50);
    CHECK(rep.per_class[static_cast<std::size_t>(c)].ap75 == ap75);
    if (match.gt_count(c) > 0) {
      std::vector<double> taus;
      for (const double t : rep.iou_grid) taus.push_back(*average_precision(match, c, t));
      CHECK(rep.per_class[static_cast<std::size_t>(c)].ap5095 == mean_ap(taus));
      ap50s.push_back(*ap50);
      ap75s.push_back(*ap75);
      ap5095s.push_back(mean_ap(taus));
    }
  }
  REQUIRE(rep.map50.has_value());
  REQUIRE(rep.map75.has_value());
  REQUIRE(rep.map5095.has_value());
  CHECK(*rep.map50 == mean_ap(ap50s));
  CHECK(*rep.map75 == mean_ap(ap75s));
  CHECK(*rep.map5095 == mean_ap(ap5095s));

  // the IoU-0.6 truck hit survives at 0.5 but not at 0.75
  CHECK(*rep.map50 > *rep.map75);
}

TEST_CASE("report confusion matrix bins hits, ghosts, and misses") {
  const EvaluationReport rep = build_report(make_dataset(), make_predictions(), {});
  const auto& cm = rep.confusion;
  REQUIRE(cm.class_count == 3);
  CHECK(cm.at(0, 0) == 3);
  CHECK(cm.at(1, 1) == 1);
  CHECK(cm.at(1, 3) == 1);  // the truck on img_c goes unpredicted
  CHECK(cm.at(3, 0) == 1);  // stray car prediction
  CHECK(cm.at(3, 2) == 1);  // stray bus prediction
  std::int64_t total = 0;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) total += cm.at(r, c);
  }
  CHECK(total == 7);

  const auto norm = cm.normalized();
  CHECK(norm[0 * 4 + 0] == 1.0);
  CHECK(norm[1 * 4 + 1] == 0.5);
  CHECK(norm[1 * 4 + 3] == 0.5);
  for (int c = 0; c < 4; ++c) CHECK(norm[2 * 4 + c] == 0.0);  // no bus support
}

TEST_CASE("report json bytes do not depend on thread count or repetition") {
  const Dataset ds = make_dataset();
  const PredictionSet ps = make_predictions();
  EvaluationOptions one;
  one.threads = 1;
  EvaluationOptions four;
  four.threads = 4;

  const std::string first = report_to_json(build_report(ds, ps, one));
  const std::string again = report_to_json(build_report(ds, ps, one));
  const std::string parallel = report_to_json(build_report(ds, ps, four));
  CHECK(first == again);
  CHECK(first == parallel);
  CHECK(first.find("\"schema_version\"") != std::string::npos);

  const auto j = nlohmann::json::parse(first);
  CHECK(j.at("timing").is_null());
  CHECK(j.at("per_class").size() == 3);
  CHECK(j.at("per_class").at(2).at("ap50").is_null());
  CHECK(j.at("metadata").at("class_names").size() == 3);
  CHECK(j.at("curves").at("all_classes").size() >= 2);
}

TEST_CASE("latencies fold into the report timing block") {
  EvaluationOptions opt;
  opt.latencies_ms = std::vector<double>{8.0, 2.0, 6.0, 4.0};
  const EvaluationReport rep = build_report(make_dataset(), make_predictions(), opt);
  REQUIRE(rep.timing.has_value());

  const auto j = nlohmann::json::parse(report_to_json(rep));
  CHECK(j.at("timing").at("count") == 4);
  CHECK(j.at("timing").at("mean_ms") == 5.0);
  CHECK(j.at("timing").at("median_ms") == 5.0);
  CHECK(j.at("timing").at("p95_ms") == 8.0);
  CHECK(j.at("timing").at("fps") == 200.0);
}

TEST_CASE("an empty dataset cannot be evaluated") {
  Dataset ds;
  ds.classes = ClassMap({"car"});
  try {
    build_report(ds, {}, {});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::empty_list);
  }
}

TEST_CASE("curve csv renders the all-class sweep at four decimals") {
  SweepCurves cv;
  cv.all_classes = {{0.0, 1.0, 2.0 / 3.0, 0.8}, {0.5, 0.25, 0.125, 1.0 / 6.0}};
  CHECK(curves_to_csv(cv) ==
        "threshold,precision,recall,f1\n"
        "0.0000,1.0000,0.6667,0.8000\n"
        "0.5000,0.2500,0.1250,0.1667\n");

  const EvaluationReport rep = build_report(make_dataset(), make_predictions(), {});
  const std::string csv = curves_to_csv(rep.curves);
  std::size_t lines = 0;
  for (const char ch : csv) lines += ch == '\n' ? 1 : 0;
  CHECK(lines == rep.curves.all_classes.size() + 1);
  CHECK(csv.rfind("threshold,precision,recall,f1\n", 0) == 0);
}

TEST_CASE("confusion csv lays out counts and normalized rows with labels") {
  const EvaluationReport rep = build_report(make_dataset(), make_predictions(), {});
  const std::string csv = confusion_to_csv(rep.confusion, rep.classes);
  CHECK(csv ==
        "true\\predicted,car,truck,bus,background\n"
        "car,3,0,0,0\n"
        "truck,0,1,0,1\n"
        "bus,0,0,0,0\n"
        "background,1,0,1,0\n"
        "\n"
        "normalized,car,truck,bus,background\n"
        "car,1.0000,0.0000,0.0000,0.0000\n"
        "truck,0.0000,0.5000,0.0000,0.5000\n"
        "bus,0.0000,0.0000,0.0000,0.0000\n"
        "background,0.5000,0.0000,0.5000,0.0000\n");

  try {
    confusion_to_csv(rep.confusion, ClassMap({"car", "truck"}));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::shape_mismatch);
  }
}

namespace {

std::size_t count_of(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (std::size_t pos = hay.find(needle); pos != std::string::npos;
       pos = hay.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

}  // namespace

TEST_CASE("curve svg draws one polyline per class plus the pooled one") {
  const EvaluationReport rep = build_report(make_dataset(), make_predictions(), {});
  const std::string svg = render_curve_svg(rep.curves, rep.classes, CurveKind::f1);

  CHECK(svg.rfind("<svg xmlns", 0) == 0);
  CHECK(count_of(svg, "<polyline") == 4);
  CHECK(svg.find("F1-Confidence Curve") != std::string::npos);
  CHECK(svg.find(">car<") != std::string::npos);
  CHECK(svg.find(">truck<") != std::string::npos);
  CHECK(svg.find(">bus<") != std::string::npos);
  CHECK(svg.find(">all<") != std::string::npos);

  char note[64];
  std::snprintf(note, sizeof(note), "all classes %.2f at %.3f", rep.curves.best_f1,
                rep.curves.best_f1_threshold);
  CHECK(svg.find(note) != std::string::npos);

  CHECK(render_curve_svg(rep.curves, rep.classes, CurveKind::pr)
            .find("Precision-Recall Curve") != std::string::npos);

  SweepCurves tiny;
  tiny.all_classes = {{0.0, 1.0, 1.0, 1.0}};
  try {
    render_curve_svg(tiny, rep.classes, CurveKind::f1);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::too_few_samples);
  }
}

TEST_CASE("svg text escapes markup in class names") {
  SweepCurves cv;
  cv.all_classes = {{0.0, 1.0, 1.0, 1.0}, {1.0, 1.0, 0.0, 0.0}};
  cv.per_class = {cv.all_classes, cv.all_classes};
  const std::string svg = render_curve_svg(cv, ClassMap({"a&b", "x<y"}), CurveKind::pr);
  CHECK(svg.find("a&amp;b") != std::string::npos);
  CHECK(svg.find("x&lt;y") != std::string::npos);
  CHECK(svg.find("a&b") == std::string::npos);
}

TEST_CASE("confusion svg shades one cell per class pair") {
  const EvaluationReport rep = build_report(make_dataset(), make_predictions(), {});
  const std::string svg = render_confusion_svg(rep.confusion, rep.classes);
  CHECK(svg.find("Normalized Confusion Matrix") != std::string::npos);
  CHECK(count_of(svg, "<rect") == 17);  // 4x4 cells plus the canvas
  CHECK(svg.find("background") != std::string::npos);
  CHECK(svg.find("predicted") != std::string::npos);

  try {
    render_confusion_svg(rep.confusion, ClassMap({"car"}));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::shape_mismatch);
  }
}

TEST_CASE("comparison tables render four decimals and n/a for gaps") {
  std::vector<ComparisonRow> rows(2);
  rows[0].model = "model_a";
  rows[0].map50 = 0.55;
  rows[0].map75 = 0.4;
  rows[0].map5095 = 0.395;
  rows[0].fps = 260.0;
  rows[1].model = "model_b";

  CHECK(comparison_to_csv(rows) ==
        "model,mAP@0.5,mAP@0.75,mAP@[0.5:0.95],FPS\n"
        "model_a,0.5500,0.4000,0.3950,260.0000\n"
        "model_b,n/a,n/a,n/a,n/a\n");

  const auto j = nlohmann::json::parse(comparison_to_json(rows));
  CHECK(j.at("schema_version") == 1);
  REQUIRE(j.at("models").size() == 2);
  CHECK(j.at("models").at(0).at("model") == "model_a");
  CHECK(j.at("models").at(0).at("fps") == 260.0);
  CHECK(j.at("models").at(1).at("map50").is_null());
  CHECK(j.at("models").at(1).at("fps").is_null());
}
