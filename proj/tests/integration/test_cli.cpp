#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "detbench/dataset.hpp"
#include "detbench/image.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int run_cli(const std::string& args, const fs::path& scratch, const std::string& env = "") {
  const fs::path so = scratch / "stdout.txt", se = scratch / "stderr.txt";
  std::string cmd;
  if (!env.empty()) cmd += "env " + env + " ";
  cmd += '"';
  cmd += DETBENCH_CLI_PATH;
  cmd += "\" ";
  cmd += args;
  cmd += " > \"" + so.string() + "\" 2> \"" + se.string() + "\"";
  const int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  REQUIRE(WIFEXITED(rc));
  return WEXITSTATUS(rc);
}

std::string stderr_of(const fs::path& scratch) { return testutil::read_file(scratch / "stderr.txt"); }

// 2-class dataset with three images, perfect predictions, latency files whose
// means land on round fps values, and a sibling label tree with one bad line
void make_cli_tree(const fs::path& root) {
  fs::create_directories(root / "images");
  fs::create_directories(root / "labels");
  fs::create_directories(root / "labels_bad");
  fs::create_directories(root / "preds_perfect");

  const std::vector<std::vector<detbench::BoundingBox>> gt = {
      {testutil::box(8, 8, 24, 24, 0), testutil::box(32, 32, 56, 56, 1)},
      {testutil::box(4, 4, 20, 28, 0)},
      {testutil::box(10, 20, 40, 50, 1)},
  };
  const double confs[3][2] = {{0.9, 0.8}, {0.95, 0.0}, {0.7, 0.0}};
  for (int i = 0; i < 3; ++i) {
    const std::string id = "img" + std::to_string(i + 1);
    testutil::write_solid_png(root / "images" / (id + ".png"), 64, 64,
                              static_cast<std::uint8_t>(60 * i + 40), 120, 80);
    detbench::write_label_file(root / "labels" / (id + ".txt"), gt[static_cast<std::size_t>(i)],
                               64, 64, false);
    auto preds = gt[static_cast<std::size_t>(i)];
    for (std::size_t k = 0; k < preds.size(); ++k) preds[k].confidence = confs[i][k];
    detbench::write_label_file(root / "preds_perfect" / (id + ".txt"), preds, 64, 64, true);
  }
  for (int i = 1; i <= 3; ++i) {
    const std::string id = "img" + std::to_string(i);
    testutil::write_file(root / "labels_bad" / (id + ".txt"),
                         testutil::read_file(root / "labels" / (id + ".txt")));
  }
  testutil::write_file(root / "labels_bad" / "img2.txt",
                       testutil::read_file(root / "labels" / "img2.txt") + "0 0.5 0.5 0.1\n");

  const char* manifest = R"({
  "images_dir": "images",
  "labels_dir": "labels",
  "classes": ["car", "truck"],
  "image_size": [64, 64]
})";
  testutil::write_file(root / "manifest.json", manifest);
  const char* manifest_bad = R"({
  "images_dir": "images",
  "labels_dir": "labels_bad",
  "classes": ["car", "truck"],
  "image_size": [64, 64]
})";
  testutil::write_file(root / "manifest_bad.json", manifest_bad);

  // fps = 1000 * n / sum: 13/50 -> 260, 7/25 -> 280, 29/100 -> 290
  std::string lat_a;
  for (int i = 0; i < 11; ++i) lat_a += "4\n";
  lat_a += "3\n3\n";
  testutil::write_file(root / "lat_a.txt", lat_a);
  testutil::write_file(root / "lat_b.txt", "4\n4\n4\n4\n3\n3\n3\n");
  std::string lat_c;
  for (int i = 0; i < 28; ++i) lat_c += "3.5\n";
  lat_c += "2\n";
  testutil::write_file(root / "lat_c.txt", lat_c);
  testutil::write_file(root / "lat_bad.txt", "3.5\nnope\n");

  testutil::write_file(root / "eval_config.json", R"({
  "dataset": "manifest.json",
  "models": [{"name": "main", "predictions": "preds_perfect"}],
  "seed": 3
})");
  testutil::write_file(root / "eval_bad_labels.json", R"({
  "dataset": "manifest_bad.json",
  "models": [{"name": "main", "predictions": "preds_perfect"}]
})");
  testutil::write_file(root / "eval_latency.json", R"({
  "dataset": "manifest.json",
  "models": [{"name": "main", "predictions": "preds_perfect", "latencies": "lat_a.txt"}]
})");
  testutil::write_file(root / "eval_latency_bad.json", R"({
  "dataset": "manifest.json",
  "models": [{"name": "main", "predictions": "preds_perfect", "latencies": "lat_bad.txt"}]
})");
  testutil::write_file(root / "compare_config.json", R"({
  "dataset": "manifest.json",
  "models": [
    {"name": "speed_a", "predictions": "preds_perfect", "latencies": "lat_a.txt"},
    {"name": "speed_b", "predictions": "preds_perfect", "latencies": "lat_b.txt"},
    {"name": "speed_c", "predictions": "preds_perfect", "latencies": "lat_c.txt"},
    {"name": "no_timing", "predictions": "preds_perfect"}
  ]
})");
  testutil::write_file(root / "missing_dataset.json", R"({
  "models": [{"name": "main", "predictions": "preds_perfect"}]
})");

  const char* identity_aug = R"("augmentation": {
    "degrees": 0, "translate": 0, "scale": 0, "shear": 0, "perspective": 0,
    "hsv_h": 0, "hsv_s": 0, "hsv_v": 0, "flipud": 0, "fliplr": 0,
    "mosaic": 0, "min_box_area_fraction": 0
  })";
  testutil::write_file(root / "preview_identity.json",
                       std::string(R"({
  "dataset": "manifest.json",
  "models": [{"name": "main", "predictions": "preds_perfect"}],
  "seed": 11,
)") + identity_aug + "\n}\n");

  const char* busy_aug = R"("augmentation": {
    "degrees": 20, "translate": 0.1, "scale": 0.3, "shear": 5, "perspective": 0.0005,
    "hsv_h": 0.015, "hsv_s": 0.7, "hsv_v": 0.4, "flipud": 0.2, "fliplr": 0.5,
    "mosaic": 0.7, "min_box_area_fraction": 0.0001
  })";
  testutil::write_file(root / "preview_busy.json",
                       std::string(R"({
  "dataset": "manifest.json",
  "models": [{"name": "main", "predictions": "preds_perfect"}],
  "seed": 17,
)") + busy_aug + "\n}\n");
  testutil::write_file(root / "preview_busy_seed0.json",
                       std::string(R"({
  "dataset": "manifest.json",
  "models": [{"name": "main", "predictions": "preds_perfect"}],
  "seed": 0,
)") + busy_aug + "\n}\n");
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

const char* kEvalOutputs[] = {"report.json",       "curves.csv",
                              "confusion.csv",     "pr_curve.svg",
                              "f1_curve.svg",      "precision_curve.svg",
                              "recall_curve.svg",  "confusion_matrix.svg"};

}  // namespace

TEST_CASE("evaluate writes the full artifact set and perfect predictions score 1.0") {
  testutil::TempDir tmp("cli_eval");
  make_cli_tree(tmp.path());
  const fs::path out = tmp.path() / "out";

  const int rc = run_cli("evaluate --config " + q(tmp.path() / "eval_config.json") + " --out " +
                             q(out),
                         tmp.path());
  CHECK(rc == 0);
  for (const char* name : kEvalOutputs) CHECK(fs::exists(out / name));

  const auto rep = json::parse(testutil::read_file(out / "report.json"));
  CHECK(rep.at("map50") == 1.0);
  CHECK(rep.at("map75") == 1.0);
  CHECK(rep.at("map5095") == 1.0);
  CHECK(rep.at("metadata").at("dataset_id") == "manifest");
  CHECK(rep.at("timing").is_null());
  CHECK(rep.at("per_class").size() == 2);

  // own throughput goes to stderr, never into the artifacts
  CHECK(stderr_of(tmp.path()).find("images/s") != std::string::npos);
}

TEST_CASE("evaluate artifacts are byte-stable across runs and thread counts") {
  testutil::TempDir tmp("cli_det");
  make_cli_tree(tmp.path());
  const std::string cfg = q(tmp.path() / "eval_config.json");

  const fs::path out1 = tmp.path() / "o1", out2 = tmp.path() / "o2", out3 = tmp.path() / "o3",
                 out4 = tmp.path() / "o4";
  CHECK(run_cli("evaluate --config " + cfg + " --out " + q(out1), tmp.path()) == 0);
  CHECK(run_cli("evaluate --config " + cfg + " --out " + q(out2), tmp.path()) == 0);
  CHECK(run_cli("evaluate --config " + cfg + " --out " + q(out3), tmp.path(),
                "DETBENCH_THREADS=1") == 0);
  CHECK(run_cli("evaluate --config " + cfg + " --out " + q(out4), tmp.path(),
                "DETBENCH_THREADS=4") == 0);

  for (const char* name : kEvalOutputs) {
    const std::string base = testutil::read_file(out1 / name);
    CHECK(base == testutil::read_file(out2 / name));
    CHECK(base == testutil::read_file(out3 / name));
    CHECK(base == testutil::read_file(out4 / name));
  }
}

TEST_CASE("evaluate reproduces the synthetic per-class average precisions") {
  testutil::TempDir tmp("cli_map");
  const testutil::DiskFixture fx = testutil::write_map_fixture(tmp.path());
  testutil::write_file(tmp.path() / "map_config.json",
                       "{\n  \"dataset\": \"" + fx.manifest.string() + "\",\n  \"models\": [{\"name\": \"m\", \"predictions\": \"" +
                           fx.predictions_dir.string() + "\"}]\n}\n");
  const fs::path out = tmp.path() / "out";

  CHECK(run_cli("evaluate --config " + q(tmp.path() / "map_config.json") + " --out " + q(out),
                tmp.path()) == 0);
  const auto rep = json::parse(testutil::read_file(out / "report.json"));

  const double targets[5] = {0.837, 0.679, 0.355, 0.863, 0.982};
  REQUIRE(rep.at("per_class").size() == 5);
  for (int c = 0; c < 5; ++c) {
    const double ap50 = rep.at("per_class").at(c).at("ap50").get<double>();
    CHECK(std::abs(ap50 - targets[c]) <= 1e-9);
    const double ap5095 = rep.at("per_class").at(c).at("ap5095").get<double>();
    CHECK(std::abs(ap5095 - targets[c]) <= 1e-9);
  }
  CHECK(std::abs(rep.at("map50").get<double>() - 0.7432) <= 1e-9);
  CHECK(std::abs(rep.at("map75").get<double>() - 0.7432) <= 1e-9);
  CHECK(std::abs(rep.at("map5095").get<double>() - 0.7432) <= 1e-9);
}

TEST_CASE("strict mode rejects a malformed label line, lenient mode warns past it") {
  testutil::TempDir tmp("cli_strict");
  make_cli_tree(tmp.path());
  const std::string cfg = q(tmp.path() / "eval_bad_labels.json");

  const fs::path out_strict = tmp.path() / "out_strict";
  CHECK(run_cli("evaluate --config " + cfg + " --out " + q(out_strict), tmp.path()) == 2);
  CHECK(!fs::exists(out_strict / "report.json"));
  CHECK(stderr_of(tmp.path()).find("img2.txt") != std::string::npos);

  const fs::path out_lenient = tmp.path() / "out_lenient";
  CHECK(run_cli("evaluate --lenient --config " + cfg + " --out " + q(out_lenient), tmp.path()) ==
        0);
  CHECK(fs::exists(out_lenient / "report.json"));
  CHECK(stderr_of(tmp.path()).find("warning") != std::string::npos);
}

TEST_CASE("config and usage problems exit with code 3") {
  testutil::TempDir tmp("cli_cfg");
  make_cli_tree(tmp.path());
  const fs::path out = tmp.path() / "out";

  CHECK(run_cli("evaluate --config " + q(tmp.path() / "missing_dataset.json") + " --out " +
                    q(out),
                tmp.path()) == 3);
  CHECK(run_cli("evaluate --config " + q(tmp.path() / "nonexistent.json") + " --out " + q(out),
                tmp.path()) == 3);
  // model arity is per subcommand
  CHECK(run_cli("evaluate --config " + q(tmp.path() / "compare_config.json") + " --out " + q(out),
                tmp.path()) == 3);
  CHECK(run_cli("compare --config " + q(tmp.path() / "eval_config.json") + " --out " + q(out),
                tmp.path()) == 3);
  // no output directory given anywhere
  CHECK(run_cli("evaluate --config " + q(tmp.path() / "eval_config.json"), tmp.path()) == 3);
  // malformed thread cap
  CHECK(run_cli("evaluate --config " + q(tmp.path() / "eval_config.json") + " --out " + q(out),
                tmp.path(), "DETBENCH_THREADS=abc") == 3);
  CHECK(run_cli("evaluate --config " + q(tmp.path() / "eval_config.json") + " --out " + q(out),
                tmp.path(), "DETBENCH_THREADS=0") == 3);
  // argument parsing failures
  CHECK(run_cli("evaluate", tmp.path()) == 3);
  CHECK(run_cli("frobnicate --config x.json", tmp.path()) == 3);
}

TEST_CASE("a failed run removes the artifacts it already wrote") {
  testutil::TempDir tmp("cli_guard");
  make_cli_tree(tmp.path());
  const fs::path out = tmp.path() / "out";
  fs::create_directories(out / "curves.csv");  // the second write will fail on this

  const int rc = run_cli("evaluate --config " + q(tmp.path() / "eval_config.json") + " --out " +
                             q(out),
                         tmp.path());
  CHECK(rc == 3);
  CHECK(!fs::exists(out / "report.json"));
}

TEST_CASE("bad latency data is a data error") {
  testutil::TempDir tmp("cli_lat");
  make_cli_tree(tmp.path());
  const fs::path out = tmp.path() / "out";
  CHECK(run_cli("evaluate --config " + q(tmp.path() / "eval_latency_bad.json") + " --out " +
                    q(out),
                tmp.path()) == 2);
  CHECK(!fs::exists(out / "report.json"));
}

TEST_CASE("evaluate folds latencies into the timing block") {
  testutil::TempDir tmp("cli_timing");
  make_cli_tree(tmp.path());
  const fs::path out = tmp.path() / "out";
  CHECK(run_cli("evaluate --config " + q(tmp.path() / "eval_latency.json") + " --out " + q(out),
                tmp.path()) == 0);
  const auto rep = json::parse(testutil::read_file(out / "report.json"));
  CHECK(rep.at("timing").at("count") == 13);
  CHECK(rep.at("timing").at("fps") == 260.0);
}

TEST_CASE("compare renders one row per model in config order") {
  testutil::TempDir tmp("cli_cmp");
  make_cli_tree(tmp.path());
  const fs::path out = tmp.path() / "out";
  CHECK(run_cli("compare --config " + q(tmp.path() / "compare_config.json") + " --out " + q(out),
                tmp.path()) == 0);

  CHECK(testutil::read_file(out / "compare.csv") ==
        "model,mAP@0.5,mAP@0.75,mAP@[0.5:0.95],FPS\n"
        "speed_a,1.0000,1.0000,1.0000,260.0000\n"
        "speed_b,1.0000,1.0000,1.0000,280.0000\n"
        "speed_c,1.0000,1.0000,1.0000,290.0000\n"
        "no_timing,1.0000,1.0000,1.0000,n/a\n");

  const auto j = json::parse(testutil::read_file(out / "compare.json"));
  REQUIRE(j.at("models").size() == 4);
  CHECK(j.at("models").at(0).at("model") == "speed_a");
  CHECK(j.at("models").at(2).at("fps") == 290.0);
  CHECK(j.at("models").at(3).at("fps").is_null());
}

TEST_CASE("augment preview with count zero writes only the index") {
  testutil::TempDir tmp("cli_prev0");
  make_cli_tree(tmp.path());
  const fs::path out = tmp.path() / "out";
  CHECK(run_cli("augment-preview --count 0 --config " + q(tmp.path() / "preview_busy.json") +
                    " --out " + q(out),
                tmp.path()) == 0);

  std::size_t entries = 0;
  for (const auto& e : fs::directory_iterator(out)) {
    (void)e;
    ++entries;
  }
  CHECK(entries == 1);
  const auto idx = json::parse(testutil::read_file(out / "index.json"));
  CHECK(idx.at("samples").empty());
}

TEST_CASE("an identity augmentation config reproduces the input pixels and labels") {
  testutil::TempDir tmp("cli_prev_id");
  make_cli_tree(tmp.path());
  const fs::path out = tmp.path() / "out";
  CHECK(run_cli("augment-preview --count 1 --config " +
                    q(tmp.path() / "preview_identity.json") + " --out " + q(out),
                tmp.path()) == 0);

  const detbench::Image original = detbench::read_png(tmp.path() / "images" / "img1.png");
  const detbench::Image augmented = detbench::read_png(out / "img1_aug.png");
  CHECK(original.width == augmented.width);
  CHECK(original.height == augmented.height);
  CHECK(original.pixels == augmented.pixels);

  CHECK(testutil::read_file(out / "img1_aug.txt") ==
        testutil::read_file(tmp.path() / "labels" / "img1.txt"));

  const auto idx = json::parse(testutil::read_file(out / "index.json"));
  REQUIRE(idx.at("samples").size() == 1);
  const auto& params = idx.at("samples").at(0).at("params");
  CHECK(params.at("mosaic") == false);
  CHECK(params.at("degrees") == 0.0);
  CHECK(params.at("scale") == 1.0);
  CHECK(params.at("flipud") == false);
  CHECK(params.at("fliplr") == false);
}

TEST_CASE("preview draws are seed-reproducible and the seed flag overrides the config") {
  testutil::TempDir tmp("cli_prev_seed");
  make_cli_tree(tmp.path());
  const std::string busy = q(tmp.path() / "preview_busy.json");

  const fs::path o1 = tmp.path() / "o1", o2 = tmp.path() / "o2", o3 = tmp.path() / "o3",
                 o4 = tmp.path() / "o4";
  CHECK(run_cli("augment-preview --count 3 --config " + busy + " --out " + q(o1), tmp.path()) ==
        0);
  CHECK(run_cli("augment-preview --count 3 --config " + busy + " --out " + q(o2), tmp.path()) ==
        0);
  CHECK(testutil::read_file(o1 / "index.json") == testutil::read_file(o2 / "index.json"));
  CHECK(testutil::read_file(o1 / "img1_aug.png") == testutil::read_file(o2 / "img1_aug.png"));

  // same draws when the flag supplies what the config had
  CHECK(run_cli("augment-preview --count 3 --seed 17 --config " +
                    q(tmp.path() / "preview_busy_seed0.json") + " --out " + q(o3),
                tmp.path()) == 0);
  CHECK(testutil::read_file(o1 / "index.json") == testutil::read_file(o3 / "index.json"));

  CHECK(run_cli("augment-preview --count 3 --seed 23 --config " + busy + " --out " + q(o4),
                tmp.path()) == 0);
  CHECK(testutil::read_file(o1 / "index.json") != testutil::read_file(o4 / "index.json"));

  // count is capped by the pool
  const fs::path o5 = tmp.path() / "o5";
  CHECK(run_cli("augment-preview --count 9 --config " + busy + " --out " + q(o5), tmp.path()) ==
        0);
  const auto idx = json::parse(testutil::read_file(o5 / "index.json"));
  CHECK(idx.at("samples").size() == 3);
}
