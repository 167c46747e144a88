// Copyright 2026 The oamil Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "oamil/geometry.hpp"

namespace oamil {

/// Raised for invalid datasets and unreadable annotation files. The message
/// names the file and the JSON location (or byte offset) of the problem.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SceneObject {
  Box box;
  int class_id = 0;
  double intensity = 1.0;
};

/// Geometric stand-in for an image: rectangles of constant intensity on a
/// flat background. Objects of class k are painted into channel k; later
/// objects are drawn over earlier ones.
struct Scene {
  Box bounds;
  int num_classes = 1;
  double background = 0.0;
  std::vector<SceneObject> objects;
};

inline constexpr double kMinObjectSize = 4.0;
inline constexpr double kMinContrast = 0.3;

/// Throws DataError if an object leaves the bounds, is smaller than
/// kMinObjectSize, or is not brighter than background + kMinContrast.
void ValidateScene(const Scene& scene);

// ---------------------------------------------------------------------------
// Features

/// Layout of the vector returned by SceneFeatures.
namespace feature {
inline constexpr std::size_t kCandidateCovered = 0;  // |cand ∩ obj| / |cand|
inline constexpr std::size_t kObjectCovered = 1;     // |cand ∩ obj| / |obj|
inline constexpr std::size_t kOffsetLeft = 2;        // (obj.x1 - cand.x1) / cand.w
inline constexpr std::size_t kOffsetTop = 3;         // (obj.y1 - cand.y1) / cand.h
inline constexpr std::size_t kOffsetRight = 4;       // (obj.x2 - cand.x2) / cand.w
inline constexpr std::size_t kOffsetBottom = 5;      // (obj.y2 - cand.y2) / cand.h
inline constexpr std::size_t kLogWidth = 6;          // log(cand.w / image width)
inline constexpr std::size_t kLogHeight = 7;         // log(cand.h / image height)
inline constexpr std::size_t kBias = 8;
inline constexpr std::size_t kIntensity = 9;  // one mean-intensity channel per class
inline constexpr double kOffsetLimit = 1.0;   // offsets are clamped to +-kOffsetLimit
}  // namespace feature

inline std::size_t FeatureDim(int num_classes) {
  return feature::kIntensity + static_cast<std::size_t>(num_classes);
}

/// Index of the object with the highest IoU to `candidate` (lowest index on
/// ties), or -1 for an empty scene.
int BestOverlappingObject(const Scene& scene, const Box& candidate);

/// Mean intensity of each class channel inside `candidate`, computed exactly
/// from the rectangle arrangement.
std::vector<double> MeanIntensities(const Scene& scene, const Box& candidate);

/// Fixed-length feature vector describing `candidate` relative to the scene.
/// See the `feature` namespace for the layout. Geometric entries refer to the
/// best-overlapping object; they are zero when the scene has no objects.
std::vector<double> SceneFeatures(const Scene& scene, const Box& candidate);

// ---------------------------------------------------------------------------
// Annotated datasets

struct Category {
  std::int64_t id = 0;
  std::string name;
  nlohmann::json extra = nlohmann::json::object();
};

struct ImageInfo {
  std::int64_t id = 0;
  double width = 0.0;
  double height = 0.0;
  std::optional<Scene> scene;
  nlohmann::json extra = nlohmann::json::object();

  Box bounds() const { return Box(0.0, 0.0, width, height); }
};

struct Annotation {
  std::int64_t id = 0;
  std::int64_t image_id = 0;
  std::int64_t category_id = 0;
  /// COCO [x, y, w, h]; kept verbatim so files round-trip bit-exactly.
  std::array<double, 4> bbox{};
  nlohmann::json extra = nlohmann::json::object();

  Box box() const { return Box::FromXywh(bbox[0], bbox[1], bbox[2], bbox[3]); }
  void set_box(const Box& b) { bbox = {b.x1(), b.y1(), b.width(), b.height()}; }
};

struct Provenance {
  bool noisy = false;
  double noise_r = 0.0;
  std::uint64_t noise_seed = 0;

  bool operator==(const Provenance&) const = default;
};

struct AnnotatedDataset {
  std::vector<ImageInfo> images;
  std::vector<Annotation> annotations;
  std::vector<Category> categories;
  Provenance provenance;
  /// Unrecognized top-level keys, preserved on write.
  nlohmann::json extra = nlohmann::json::object();

  const ImageInfo* FindImage(std::int64_t image_id) const;
  std::vector<const Annotation*> AnnotationsFor(std::int64_t image_id) const;
  /// Position of `category_id` among categories sorted by id; -1 if unknown.
  int ClassIndex(std::int64_t category_id) const;
};

/// Checks referential integrity and box validity. Throws DataError.
void ValidateDataset(const AnnotatedDataset& ds);

/// Wraps scenes into a dataset whose annotations are the exact object boxes.
AnnotatedDataset DatasetFromScenes(const std::vector<Scene>& scenes);

struct LayoutSpec {
  double image_width = 128.0;
  double image_height = 128.0;
  int min_objects = 1;
  int max_objects = 3;
  int num_classes = 3;
  double min_size = 16.0;
  double max_size = 40.0;
  double max_pair_iou = 0.1;
  double min_intensity = 0.6;
  double max_intensity = 1.0;
  double max_background = 0.2;
  int attempts_per_scene = 200;

  void Validate() const;
};

/// Deterministic synthetic scenes with clean annotations. Object coordinates
/// lie on a 1/16 pixel lattice so that corner and xywh forms convert exactly.
/// Throws DataError naming the scene index when a layout cannot be placed.
AnnotatedDataset GenerateScenes(int count, const LayoutSpec& layout, std::uint64_t seed);

/// Seed-stable split; the first round(val_fraction * n) images of a seeded
/// permutation form the validation set. Both parts keep the input order.
std::pair<AnnotatedDataset, AnnotatedDataset> SplitDataset(const AnnotatedDataset& ds,
                                                           double val_fraction,
                                                           std::uint64_t seed);

// ---------------------------------------------------------------------------
// COCO-style JSON subset

nlohmann::json ToJson(const AnnotatedDataset& ds);
/// `source` is used in error messages only.
AnnotatedDataset FromJson(const nlohmann::json& doc, const std::string& source = "<memory>");

AnnotatedDataset ReadAnnotations(const std::filesystem::path& path);
void WriteAnnotations(const AnnotatedDataset& ds, const std::filesystem::path& path);

}  // namespace oamil
