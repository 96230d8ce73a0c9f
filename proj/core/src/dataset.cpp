#include "detbench/dataset.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "detbench/errors.hpp"
#include "detbench/image.hpp"
#include "detbench/rng.hpp"

namespace detbench {

namespace fs = std::filesystem;
using nlohmann::json;

ClassMap::ClassMap(std::vector<std::string> names) : names_(std::move(names)) {
  std::set<std::string> seen;
  for (const auto& n : names_) {
    if (n.empty()) raise(Errc::bad_config, "class names must be non-empty");
    if (!seen.insert(n).second) raise(Errc::bad_config, "duplicate class name: " + n);
  }
}

ClassMap ClassMap::default_vehicle_classes() {
  return ClassMap({"car", "motorcycle", "truck", "bus", "bicycle"});
}

const std::string& ClassMap::name(int class_id) const {
  if (class_id < 0 || class_id >= size()) {
    raise(Errc::unknown_class, "class id " + std::to_string(class_id) + " out of range");
  }
  return names_[static_cast<std::size_t>(class_id)];
}

const ImageRecord* Dataset::find(std::string_view image_id) const {
  auto it = std::lower_bound(records.begin(), records.end(), image_id,
                             [](const ImageRecord& r, std::string_view id) { return r.image_id < id; });
  if (it != records.end() && it->image_id == image_id) return &*it;
  return nullptr;
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

double parse_double(std::string_view tok, std::string_view what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    raise(Errc::malformed_line, "non-numeric " + std::string(what) + " token '" + std::string(tok) + "'");
  }
  return v;
}

int parse_class_id(std::string_view tok) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    raise(Errc::malformed_line, "non-integer class token '" + std::string(tok) + "'");
  }
  if (v < 0) raise(Errc::malformed_line, "negative class id " + std::to_string(v));
  return v;
}

void check_unit_range(double v, std::string_view what) {
  if (v < 0.0 || v > 1.0) {
    raise(Errc::out_of_range,
          std::string(what) + " value " + std::to_string(v) + " outside [0,1]");
  }
}

}  // namespace

BoundingBox parse_label_line(std::string_view line, double img_w, double img_h,
                             const ParseOptions& opts) {
  const auto fields = split_fields(line);
  const std::size_t expected = opts.has_confidence ? 6 : 5;
  if (fields.size() != expected) {
    raise(Errc::malformed_line, "expected " + std::to_string(expected) + " fields, got " +
                                    std::to_string(fields.size()));
  }
  NormalizedBox n;
  n.class_id = parse_class_id(fields[0]);
  if (opts.class_count && n.class_id >= *opts.class_count) {
    raise(Errc::unknown_class, "class id " + std::to_string(n.class_id) + " >= class count " +
                                   std::to_string(*opts.class_count));
  }
  n.x_center = parse_double(fields[1], "x_center");
  n.y_center = parse_double(fields[2], "y_center");
  n.width = parse_double(fields[3], "width");
  n.height = parse_double(fields[4], "height");
  check_unit_range(n.x_center, "x_center");
  check_unit_range(n.y_center, "y_center");
  check_unit_range(n.width, "width");
  check_unit_range(n.height, "height");
  if (opts.has_confidence) {
    const double conf = parse_double(fields[5], "confidence");
    check_unit_range(conf, "confidence");
    n.confidence = conf;
  }
  return to_absolute(n, img_w, img_h);
}

std::string format_label_line(const BoundingBox& box, double img_w, double img_h,
                              bool include_confidence) {
  const NormalizedBox n = to_normalized(box, img_w, img_h);
  char buf[160];
  if (include_confidence) {
    if (!box.confidence) raise(Errc::missing_confidence, "box has no confidence to serialize");
    std::snprintf(buf, sizeof(buf), "%d %.6f %.6f %.6f %.6f %.6f", n.class_id, n.x_center,
                  n.y_center, n.width, n.height, *box.confidence);
  } else {
    std::snprintf(buf, sizeof(buf), "%d %.6f %.6f %.6f %.6f", n.class_id, n.x_center, n.y_center,
                  n.width, n.height);
  }
  return buf;
}

std::vector<BoundingBox> load_label_file(const fs::path& path, double img_w, double img_h,
                                         const ParseOptions& opts, bool strict,
                                         std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) raise(Errc::missing_file, "cannot open " + path.string());
  std::vector<BoundingBox> boxes;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (split_fields(line).empty()) continue;  // blank line
    try {
      boxes.push_back(parse_label_line(line, img_w, img_h, opts));
    } catch (const Error& e) {
      const std::string ctx = path.string() + ":" + std::to_string(line_no) + ": " + e.what();
      if (strict) throw Error(e.code(), ctx);
      if (warnings) warnings->push_back(ctx);
    }
  }
  return boxes;
}

void write_label_file(const fs::path& path, const std::vector<BoundingBox>& boxes, double img_w,
                      double img_h, bool include_confidence) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(Errc::io_error, "cannot write " + path.string());
  for (const auto& b : boxes) {
    out << format_label_line(b, img_w, img_h, include_confidence) << '\n';
  }
}

namespace {

const std::set<std::string> kImageExtensions = {".png", ".jpg", ".jpeg", ".bmp"};

}  // namespace

Dataset load_dataset(const fs::path& manifest_path, bool strict) {
  std::ifstream in(manifest_path);
  if (!in) raise(Errc::missing_file, "cannot open manifest " + manifest_path.string());
  json m;
  try {
    in >> m;
  } catch (const json::exception& e) {
    raise(Errc::bad_config, "manifest " + manifest_path.string() + ": " + e.what());
  }
  for (const char* key : {"images_dir", "labels_dir", "classes"}) {
    if (!m.contains(key)) {
      raise(Errc::bad_config, "manifest missing key '" + std::string(key) + "'");
    }
  }

  Dataset ds;
  ds.classes = ClassMap(m.at("classes").get<std::vector<std::string>>());
  if (m.contains("image_size")) {
    const auto sz = m.at("image_size").get<std::vector<double>>();
    if (sz.size() != 2 || sz[0] <= 0 || sz[1] <= 0) {
      raise(Errc::bad_config, "image_size must be [width, height] with positive entries");
    }
    ds.declared_size = {sz[0], sz[1]};
  }

  const fs::path base = manifest_path.parent_path();
  const auto resolve = [&](const std::string& p) {
    fs::path q(p);
    return q.is_absolute() ? q : base / q;
  };
  const fs::path labels_dir = resolve(m.at("labels_dir").get<std::string>());
  const fs::path images_dir = resolve(m.at("images_dir").get<std::string>());
  ds.labels_dir = labels_dir;
  ds.images_dir = images_dir;
  if (!fs::is_directory(labels_dir)) {
    raise(Errc::missing_file, "labels_dir not found: " + labels_dir.string());
  }

  // Image files indexed by stem, used for pairing checks and PNG dimensions.
  std::map<std::string, fs::path> images;
  if (fs::is_directory(images_dir)) {
    for (const auto& e : fs::directory_iterator(images_dir)) {
      if (e.is_regular_file() && kImageExtensions.count(e.path().extension().string())) {
        images.emplace(e.path().stem().string(), e.path());
      }
    }
  } else if (strict) {
    raise(Errc::missing_file, "images_dir not found: " + images_dir.string());
  } else {
    ds.warnings.push_back("images_dir not found: " + images_dir.string());
  }

  std::vector<fs::path> label_files;
  for (const auto& e : fs::directory_iterator(labels_dir)) {
    if (e.is_regular_file() && e.path().extension() == ".txt") label_files.push_back(e.path());
  }
  std::sort(label_files.begin(), label_files.end());

  ParseOptions opts;
  opts.has_confidence = false;
  opts.class_count = ds.classes.size();

  for (const auto& lf : label_files) {
    ImageRecord rec;
    rec.image_id = lf.stem().string();
    const auto img_it = images.find(rec.image_id);
    if (img_it == images.end() && fs::is_directory(images_dir)) {
      const std::string msg = "label without image: " + lf.string();
      if (strict) raise(Errc::missing_file, msg);
      ds.warnings.push_back(msg);
    }
    if (ds.declared_size) {
      rec.width = ds.declared_size->first;
      rec.height = ds.declared_size->second;
    } else {
      std::optional<std::pair<int, int>> sz;
      if (img_it != images.end()) sz = probe_png_size(img_it->second);
      if (!sz) {
        raise(Errc::bad_config, "no image_size in manifest and no readable PNG header for '" +
                                    rec.image_id + "'");
      }
      rec.width = sz->first;
      rec.height = sz->second;
    }
    rec.ground_truth = load_label_file(lf, rec.width, rec.height, opts, strict, &ds.warnings);
    ds.records.push_back(std::move(rec));
  }

  // Images with no label file.
  for (const auto& [stem, path] : images) {
    const bool has_label = std::any_of(label_files.begin(), label_files.end(),
                                       [&](const fs::path& p) { return p.stem().string() == stem; });
    if (!has_label) {
      const std::string msg = "image without label file: " + path.string();
      if (strict) raise(Errc::missing_file, msg);
      ds.warnings.push_back(msg);
    }
  }

  std::sort(ds.records.begin(), ds.records.end(),
            [](const ImageRecord& a, const ImageRecord& b) { return a.image_id < b.image_id; });
  return ds;
}

PredictionSet load_predictions(const fs::path& dir, const Dataset& dataset, bool strict) {
  if (!fs::is_directory(dir)) raise(Errc::missing_file, "prediction dir not found: " + dir.string());
  PredictionSet ps;
  ParseOptions opts;
  opts.has_confidence = true;
  opts.class_count = dataset.classes.size();

  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());

  for (const auto& f : files) {
    const std::string id = f.stem().string();
    const ImageRecord* rec = dataset.find(id);
    if (!rec) {
      const std::string msg = "prediction file for unknown image '" + id + "': " + f.string();
      if (strict) raise(Errc::missing_file, msg);
      ps.warnings.push_back(msg);
      continue;
    }
    ps.by_image[id] = load_label_file(f, rec->width, rec->height, opts, strict, &ps.warnings);
  }
  return ps;
}

DatasetSplit split_dataset(std::vector<std::string> ids, const std::array<double, 3>& ratios,
                           std::uint64_t seed) {
  if (ids.empty()) raise(Errc::empty_list, "split_dataset: no ids");
  const double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(sum - 1.0) > 1e-9 || ratios[0] < 0 || ratios[1] < 0 || ratios[2] < 0) {
    raise(Errc::bad_ratios, "ratios must be non-negative and sum to 1");
  }
  std::sort(ids.begin(), ids.end());  // input order must not leak into the shuffle
  Rng rng(mix_seed(seed, 0x5eeddeed));
  rng.shuffle(ids);

  const std::size_t n = ids.size();
  const auto n_train = static_cast<std::size_t>(std::floor(ratios[0] * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::floor(ratios[1] * static_cast<double>(n)));

  DatasetSplit split;
  split.seed = seed;
  split.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.validation.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train),
                          ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  split.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), ids.end());
  return split;
}

}  // namespace detbench
