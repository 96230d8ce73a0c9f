#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "detbench/geometry.hpp"

namespace detbench {

/// Ordered class names; index in the list is the class id.
class ClassMap {
public:
  ClassMap() = default;
  explicit ClassMap(std::vector<std::string> names);

  static ClassMap default_vehicle_classes();  // car, motorcycle, truck, bus, bicycle

  int size() const { return static_cast<int>(names_.size()); }
  const std::string& name(int class_id) const;
  const std::vector<std::string>& names() const { return names_; }

private:
  std::vector<std::string> names_;
};

struct ImageRecord {
  std::string image_id;
  double width = 0.0;
  double height = 0.0;
  std::vector<BoundingBox> ground_truth;  // confidence absent
};

struct Dataset {
  std::vector<ImageRecord> records;  // sorted by image_id
  ClassMap classes;
  std::optional<std::pair<double, double>> declared_size;
  std::filesystem::path images_dir;  // resolved against the manifest location
  std::filesystem::path labels_dir;
  std::vector<std::string> warnings;  // populated in lenient mode

  const ImageRecord* find(std::string_view image_id) const;
};

/// Predictions keyed by image id; every box carries a confidence.
struct PredictionSet {
  std::map<std::string, std::vector<BoundingBox>> by_image;
  std::vector<std::string> warnings;
};

struct DatasetSplit {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
  std::uint64_t seed = 0;
};

struct ParseOptions {
  bool has_confidence = false;
  // When set, class ids >= class_count raise unknown_class.
  std::optional<int> class_count;
};

/// One label line: "class x_center y_center width height [confidence]",
/// normalized fields, '.' decimal separator, fields split on blanks.
BoundingBox parse_label_line(std::string_view line, double img_w, double img_h,
                             const ParseOptions& opts);

/// Inverse of parse_label_line; numeric fields at six decimals.
std::string format_label_line(const BoundingBox& box, double img_w, double img_h,
                              bool include_confidence);

/// Parses a whole label file. In lenient mode malformed lines are skipped and
/// reported through `warnings`; in strict mode the first bad line throws with
/// file and line context.
std::vector<BoundingBox> load_label_file(const std::filesystem::path& path, double img_w,
                                         double img_h, const ParseOptions& opts, bool strict,
                                         std::vector<std::string>* warnings);

void write_label_file(const std::filesystem::path& path, const std::vector<BoundingBox>& boxes,
                      double img_w, double img_h, bool include_confidence);

/// Loads a dataset from a JSON manifest with keys images_dir, labels_dir,
/// classes, and optional image_size [w,h]. Records come from the label files;
/// pairing mismatches against images_dir are errors in strict mode and
/// warnings otherwise. Pixel data is never decoded here; dimensions come from
/// the manifest or from PNG headers.
Dataset load_dataset(const std::filesystem::path& manifest_path, bool strict = true);

/// Loads per-image prediction files (same layout as label files plus a
/// mandatory confidence column) from a directory mirroring label filenames.
PredictionSet load_predictions(const std::filesystem::path& dir, const Dataset& dataset,
                               bool strict = true);

/// Deterministic split: ids are shuffled by a seeded Fisher-Yates, train takes
/// floor(r0*N), validation floor(r1*N), test the remainder.
DatasetSplit split_dataset(std::vector<std::string> ids, const std::array<double, 3>& ratios,
                           std::uint64_t seed);

}  // namespace detbench
