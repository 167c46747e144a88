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

#include "oamil/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "oamil/random.hpp"

namespace oamil {

using nlohmann::json;

namespace {

constexpr const char* kSceneKey = "oamil_scene";
constexpr const char* kProvenanceKey = "oamil_provenance";

std::string Describe(const Box& b) { return ToString(b); }

}  // namespace

void ValidateScene(const Scene& scene) {
  if (scene.num_classes < 1) throw DataError("scene must have at least one class");
  if (!(scene.background >= 0.0 && scene.background < 0.2)) {
    throw DataError("scene background intensity must lie in [0, 0.2)");
  }
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const SceneObject& o = scene.objects[i];
    const std::string where = "scene object " + std::to_string(i);
    if (o.box.x1() < scene.bounds.x1() || o.box.y1() < scene.bounds.y1() ||
        o.box.x2() > scene.bounds.x2() || o.box.y2() > scene.bounds.y2()) {
      throw DataError(where + " " + Describe(o.box) + " leaves the image bounds");
    }
    if (o.box.width() < kMinObjectSize || o.box.height() < kMinObjectSize) {
      throw DataError(where + " is smaller than the minimum object size");
    }
    if (o.class_id < 0 || o.class_id >= scene.num_classes) {
      throw DataError(where + " has class " + std::to_string(o.class_id) + " out of range");
    }
    if (!(o.intensity <= 1.0 && o.intensity > scene.background + kMinContrast)) {
      throw DataError(where + " intensity does not exceed background + contrast margin");
    }
  }
}

// ---------------------------------------------------------------------------
// Features

int BestOverlappingObject(const Scene& scene, const Box& candidate) {
  int best = -1;
  double best_iou = -1.0;
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const double v = Iou(candidate, scene.objects[i].box);
    if (v > best_iou) {
      best_iou = v;
      best = static_cast<int>(i);
    }
  }
  return best;
}

std::vector<double> MeanIntensities(const Scene& scene, const Box& candidate) {
  const auto channels = static_cast<std::size_t>(scene.num_classes);
  std::vector<double> mean(channels, scene.background);

  // Top-most object containing a point, or nullptr for background.
  auto top_object = [&](double x, double y) -> const SceneObject* {
    for (auto it = scene.objects.rbegin(); it != scene.objects.rend(); ++it) {
      if (x > it->box.x1() && x < it->box.x2() && y > it->box.y1() && y < it->box.y2()) {
        return &*it;
      }
    }
    return nullptr;
  };

  if (candidate.degenerate()) {
    if (const SceneObject* o = top_object(candidate.cx(), candidate.cy())) {
      mean[static_cast<std::size_t>(o->class_id)] = o->intensity;
    }
    return mean;
  }

  // Split the candidate along every object edge; each cell is covered by a
  // single top-most object or by background.
  std::vector<double> xs{candidate.x1(), candidate.x2()};
  std::vector<double> ys{candidate.y1(), candidate.y2()};
  for (const SceneObject& o : scene.objects) {
    xs.push_back(std::clamp(o.box.x1(), candidate.x1(), candidate.x2()));
    xs.push_back(std::clamp(o.box.x2(), candidate.x1(), candidate.x2()));
    ys.push_back(std::clamp(o.box.y1(), candidate.y1(), candidate.y2()));
    ys.push_back(std::clamp(o.box.y2(), candidate.y1(), candidate.y2()));
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end()), ys.end());

  std::vector<double> excess(channels, 0.0);  // integral of (intensity - background)
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    const double mx = 0.5 * (xs[i] + xs[i + 1]);
    for (std::size_t j = 0; j + 1 < ys.size(); ++j) {
      const SceneObject* o = top_object(mx, 0.5 * (ys[j] + ys[j + 1]));
      if (o == nullptr) continue;
      const double area = (xs[i + 1] - xs[i]) * (ys[j + 1] - ys[j]);
      excess[static_cast<std::size_t>(o->class_id)] += area * (o->intensity - scene.background);
    }
  }
  const double area = candidate.area();
  for (std::size_t c = 0; c < channels; ++c) mean[c] += excess[c] / area;
  return mean;
}

std::vector<double> SceneFeatures(const Scene& scene, const Box& candidate) {
  std::vector<double> x(FeatureDim(scene.num_classes), 0.0);
  const double cw = std::max(candidate.width(), 1e-6);
  const double ch = std::max(candidate.height(), 1e-6);

  const int best = BestOverlappingObject(scene, candidate);
  if (best >= 0) {
    const Box& obj = scene.objects[static_cast<std::size_t>(best)].box;
    const double inter = IntersectionArea(candidate, obj);
    x[feature::kCandidateCovered] = inter / (cw * ch);
    x[feature::kObjectCovered] = inter / obj.area();
    auto offset = [](double v) {
      return std::clamp(v, -feature::kOffsetLimit, feature::kOffsetLimit);
    };
    x[feature::kOffsetLeft] = offset((obj.x1() - candidate.x1()) / cw);
    x[feature::kOffsetTop] = offset((obj.y1() - candidate.y1()) / ch);
    x[feature::kOffsetRight] = offset((obj.x2() - candidate.x2()) / cw);
    x[feature::kOffsetBottom] = offset((obj.y2() - candidate.y2()) / ch);
  }
  x[feature::kLogWidth] = std::log(cw / scene.bounds.width());
  x[feature::kLogHeight] = std::log(ch / scene.bounds.height());
  x[feature::kBias] = 1.0;

  const std::vector<double> mean = MeanIntensities(scene, candidate);
  std::copy(mean.begin(), mean.end(), x.begin() + feature::kIntensity);
  return x;
}

// ---------------------------------------------------------------------------
// Dataset helpers

const ImageInfo* AnnotatedDataset::FindImage(std::int64_t image_id) const {
  for (const ImageInfo& img : images) {
    if (img.id == image_id) return &img;
  }
  return nullptr;
}

std::vector<const Annotation*> AnnotatedDataset::AnnotationsFor(std::int64_t image_id) const {
  std::vector<const Annotation*> out;
  for (const Annotation& a : annotations) {
    if (a.image_id == image_id) out.push_back(&a);
  }
  return out;
}

int AnnotatedDataset::ClassIndex(std::int64_t category_id) const {
  std::vector<std::int64_t> ids;
  ids.reserve(categories.size());
  for (const Category& c : categories) ids.push_back(c.id);
  std::sort(ids.begin(), ids.end());
  auto it = std::lower_bound(ids.begin(), ids.end(), category_id);
  if (it == ids.end() || *it != category_id) return -1;
  return static_cast<int>(it - ids.begin());
}

void ValidateDataset(const AnnotatedDataset& ds) {
  std::set<std::int64_t> image_ids;
  for (const ImageInfo& img : ds.images) {
    if (!image_ids.insert(img.id).second) {
      throw DataError("duplicate image id " + std::to_string(img.id));
    }
    if (!(img.width > 0.0 && img.height > 0.0)) {
      throw DataError("image " + std::to_string(img.id) + " has non-positive size");
    }
    if (img.scene) ValidateScene(*img.scene);
  }
  std::set<std::int64_t> category_ids;
  for (const Category& c : ds.categories) category_ids.insert(c.id);
  std::set<std::int64_t> annotation_ids;
  for (const Annotation& a : ds.annotations) {
    const std::string where = "annotation " + std::to_string(a.id);
    if (!annotation_ids.insert(a.id).second) throw DataError("duplicate " + where);
    if (!image_ids.contains(a.image_id)) {
      throw DataError(where + " references unknown image id " + std::to_string(a.image_id));
    }
    if (!category_ids.empty() && !category_ids.contains(a.category_id)) {
      throw DataError(where + " references unknown category id " +
                      std::to_string(a.category_id));
    }
    if (!(a.bbox[2] >= 0.0 && a.bbox[3] >= 0.0)) {
      throw DataError(where + " has a negative box size");
    }
  }
}

AnnotatedDataset DatasetFromScenes(const std::vector<Scene>& scenes) {
  AnnotatedDataset ds;
  int num_classes = 0;
  std::int64_t next_annotation = 1;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const Scene& scene = scenes[i];
    ValidateScene(scene);
    num_classes = std::max(num_classes, scene.num_classes);
    ImageInfo img;
    img.id = static_cast<std::int64_t>(i) + 1;
    img.width = scene.bounds.width();
    img.height = scene.bounds.height();
    img.scene = scene;
    for (const SceneObject& o : scene.objects) {
      Annotation a;
      a.id = next_annotation++;
      a.image_id = img.id;
      a.category_id = o.class_id + 1;
      a.set_box(o.box);
      ds.annotations.push_back(std::move(a));
    }
    ds.images.push_back(std::move(img));
  }
  for (int c = 0; c < num_classes; ++c) {
    ds.categories.push_back({c + 1, "class_" + std::to_string(c), json::object()});
  }
  return ds;
}

void LayoutSpec::Validate() const {
  if (!(image_width > 0.0 && image_height > 0.0)) throw DataError("image size must be positive");
  if (min_objects < 0 || max_objects < min_objects) throw DataError("bad objects-per-scene range");
  if (num_classes < 1) throw DataError("need at least one class");
  if (!(min_size >= kMinObjectSize && max_size >= min_size)) throw DataError("bad size range");
  if (max_size > image_width || max_size > image_height) {
    throw DataError("objects larger than the image");
  }
  if (!(max_pair_iou >= 0.0 && max_pair_iou <= 1.0)) throw DataError("bad IoU cap");
  if (!(max_background > 0.0 && max_background <= 0.2)) throw DataError("bad background range");
  if (!(min_intensity > max_background + kMinContrast && max_intensity <= 1.0 &&
        max_intensity >= min_intensity)) {
    throw DataError("intensity range must exceed background + contrast margin");
  }
  if (attempts_per_scene < 1) throw DataError("attempts_per_scene must be positive");
}

namespace {

constexpr double kLattice = 16.0;

double Snap(double v) { return std::round(v * kLattice) / kLattice; }

std::optional<Scene> TryPlaceScene(const LayoutSpec& layout, Rng& rng) {
  Scene scene;
  scene.bounds = Box(0.0, 0.0, layout.image_width, layout.image_height);
  scene.num_classes = layout.num_classes;
  scene.background = rng.Uniform(0.0, layout.max_background);
  const int count = rng.UniformInt(layout.min_objects, layout.max_objects);
  const double lo = std::ceil(layout.min_size * kLattice) / kLattice;
  const double hi = std::floor(layout.max_size * kLattice) / kLattice;
  int attempts = 0;
  while (static_cast<int>(scene.objects.size()) < count) {
    if (attempts++ >= layout.attempts_per_scene) return std::nullopt;
    const double w = std::clamp(Snap(rng.Uniform(lo, hi)), lo, hi);
    const double h = std::clamp(Snap(rng.Uniform(lo, hi)), lo, hi);
    const double x = std::clamp(Snap(rng.Uniform(0.0, layout.image_width - w)), 0.0,
                                std::floor((layout.image_width - w) * kLattice) / kLattice);
    const double y = std::clamp(Snap(rng.Uniform(0.0, layout.image_height - h)), 0.0,
                                std::floor((layout.image_height - h) * kLattice) / kLattice);
    const Box box(x, y, x + w, y + h);
    const int cls = rng.UniformInt(0, layout.num_classes - 1);
    const double intensity = rng.Uniform(layout.min_intensity, layout.max_intensity);
    const bool fits = std::all_of(scene.objects.begin(), scene.objects.end(),
                                  [&](const SceneObject& o) {
                                    return Iou(o.box, box) <= layout.max_pair_iou;
                                  });
    if (fits) scene.objects.push_back({box, cls, intensity});
  }
  return scene;
}

}  // namespace

AnnotatedDataset GenerateScenes(int count, const LayoutSpec& layout, std::uint64_t seed) {
  if (count < 1) throw DataError("scene count must be at least 1");
  layout.Validate();
  std::vector<Scene> scenes;
  scenes.reserve(static_cast<std::size_t>(count));
  constexpr int kSceneRetries = 8;
  for (int i = 0; i < count; ++i) {
    std::optional<Scene> scene;
    for (int retry = 0; retry < kSceneRetries && !scene; ++retry) {
      Rng rng(DeriveSeed(seed, {static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(retry)}));
      scene = TryPlaceScene(layout, rng);
    }
    if (!scene) {
      throw DataError("scene " + std::to_string(i) +
                      ": cannot place objects under the pairwise IoU cap");
    }
    scenes.push_back(std::move(*scene));
  }
  return DatasetFromScenes(scenes);
}

std::pair<AnnotatedDataset, AnnotatedDataset> SplitDataset(const AnnotatedDataset& ds,
                                                           double val_fraction,
                                                           std::uint64_t seed) {
  if (!(val_fraction >= 0.0 && val_fraction <= 1.0)) {
    throw DataError("validation fraction must lie in [0, 1]");
  }
  const std::size_t n = ds.images.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(DeriveSeed(seed, {0x5b117ULL}));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.UniformIndex(i)]);
  const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n)));
  std::vector<bool> is_val(n, false);
  for (std::size_t i = 0; i < n_val; ++i) is_val[order[i]] = true;

  AnnotatedDataset train, val;
  for (AnnotatedDataset* part : {&train, &val}) {
    part->categories = ds.categories;
    part->provenance = ds.provenance;
    part->extra = ds.extra;
  }
  std::set<std::int64_t> val_ids;
  for (std::size_t i = 0; i < n; ++i) {
    (is_val[i] ? val : train).images.push_back(ds.images[i]);
    if (is_val[i]) val_ids.insert(ds.images[i].id);
  }
  for (const Annotation& a : ds.annotations) {
    (val_ids.contains(a.image_id) ? val : train).annotations.push_back(a);
  }
  return {std::move(train), std::move(val)};
}

// ---------------------------------------------------------------------------
// JSON

namespace {

class JsonReader {
 public:
  explicit JsonReader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void Fail(const std::string& pointer, const std::string& what) const {
    throw DataError(source_ + ": " + (pointer.empty() ? "/" : pointer) + ": " + what);
  }

  const json& Require(const json& obj, const std::string& pointer, const char* key) const {
    auto it = obj.find(key);
    if (it == obj.end()) Fail(pointer, std::string("missing required key '") + key + "'");
    return *it;
  }

  std::int64_t Integer(const json& obj, const std::string& pointer, const char* key) const {
    const json& v = Require(obj, pointer, key);
    if (!v.is_number_integer()) Fail(pointer + "/" + key, "expected an integer");
    return v.get<std::int64_t>();
  }

  double Number(const json& v, const std::string& pointer) const {
    if (!v.is_number()) Fail(pointer, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) Fail(pointer, "non-finite number");
    return d;
  }

  double Number(const json& obj, const std::string& pointer, const char* key) const {
    return Number(Require(obj, pointer, key), pointer + "/" + key);
  }

  const json& Array(const json& obj, const std::string& pointer, const char* key) const {
    const json& v = Require(obj, pointer, key);
    if (!v.is_array()) Fail(pointer + "/" + key, "expected an array");
    return v;
  }

  std::array<double, 4> Quad(const json& v, const std::string& pointer) const {
    if (!v.is_array() || v.size() != 4) Fail(pointer, "expected an array of 4 numbers");
    std::array<double, 4> out{};
    for (std::size_t i = 0; i < 4; ++i) out[i] = Number(v[i], pointer + "/" + std::to_string(i));
    return out;
  }

  Scene ParseScene(const json& v, const std::string& pointer, double width, double height) const {
    if (!v.is_object()) Fail(pointer, "expected an object");
    Scene scene;
    scene.bounds = Box(0.0, 0.0, width, height);
    scene.num_classes = static_cast<int>(Integer(v, pointer, "num_classes"));
    scene.background = Number(v, pointer, "background");
    const json& objects = Array(v, pointer, "objects");
    for (std::size_t i = 0; i < objects.size(); ++i) {
      const std::string p = pointer + "/objects/" + std::to_string(i);
      const json& o = objects[i];
      if (!o.is_object()) Fail(p, "expected an object");
      const auto c = Quad(Require(o, p, "box"), p + "/box");
      if (c[2] < c[0] || c[3] < c[1]) Fail(p + "/box", "inverted box corners");
      scene.objects.push_back({Box(c[0], c[1], c[2], c[3]),
                               static_cast<int>(Integer(o, p, "class")),
                               Number(o, p, "intensity")});
    }
    try {
      ValidateScene(scene);
    } catch (const DataError& e) {
      Fail(pointer, e.what());
    }
    return scene;
  }

 private:
  std::string source_;
};

json SceneToJson(const Scene& scene) {
  json objects = json::array();
  for (const SceneObject& o : scene.objects) {
    objects.push_back({{"box", {o.box.x1(), o.box.y1(), o.box.x2(), o.box.y2()}},
                       {"class", o.class_id},
                       {"intensity", o.intensity}});
  }
  return {{"num_classes", scene.num_classes},
          {"background", scene.background},
          {"objects", std::move(objects)}};
}

}  // namespace

json ToJson(const AnnotatedDataset& ds) {
  json doc = ds.extra.is_object() ? ds.extra : json::object();

  if (ds.provenance.noisy || doc.contains("info")) {
    json info = doc.contains("info") && doc["info"].is_object() ? doc["info"] : json::object();
    info[kProvenanceKey] = {{"noisy", ds.provenance.noisy},
                            {"noise_r", ds.provenance.noise_r},
                            {"noise_seed", ds.provenance.noise_seed}};
    doc["info"] = std::move(info);
  }

  json images = json::array();
  for (const ImageInfo& img : ds.images) {
    json j = img.extra.is_object() ? img.extra : json::object();
    j["id"] = img.id;
    j["width"] = img.width;
    j["height"] = img.height;
    if (img.scene) j[kSceneKey] = SceneToJson(*img.scene);
    images.push_back(std::move(j));
  }
  json annotations = json::array();
  for (const Annotation& a : ds.annotations) {
    json j = a.extra.is_object() ? a.extra : json::object();
    j["id"] = a.id;
    j["image_id"] = a.image_id;
    j["category_id"] = a.category_id;
    j["bbox"] = {a.bbox[0], a.bbox[1], a.bbox[2], a.bbox[3]};
    annotations.push_back(std::move(j));
  }
  json categories = json::array();
  for (const Category& c : ds.categories) {
    json j = c.extra.is_object() ? c.extra : json::object();
    j["id"] = c.id;
    j["name"] = c.name;
    categories.push_back(std::move(j));
  }
  doc["images"] = std::move(images);
  doc["annotations"] = std::move(annotations);
  doc["categories"] = std::move(categories);
  return doc;
}

AnnotatedDataset FromJson(const json& doc, const std::string& source) {
  const JsonReader r(source);
  if (!doc.is_object()) r.Fail("", "top level must be an object");
  AnnotatedDataset ds;

  const json& images = r.Array(doc, "", "images");
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::string p = "/images/" + std::to_string(i);
    const json& j = images[i];
    if (!j.is_object()) r.Fail(p, "expected an object");
    ImageInfo img;
    img.id = r.Integer(j, p, "id");
    img.width = r.Number(j, p, "width");
    img.height = r.Number(j, p, "height");
    if (!(img.width > 0.0 && img.height > 0.0)) r.Fail(p, "image size must be positive");
    if (auto it = j.find(kSceneKey); it != j.end()) {
      img.scene = r.ParseScene(*it, p + "/" + kSceneKey, img.width, img.height);
    }
    img.extra = j;
    for (const char* key : {"id", "width", "height", kSceneKey}) img.extra.erase(key);
    ds.images.push_back(std::move(img));
  }

  const json& annotations = r.Array(doc, "", "annotations");
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    const std::string p = "/annotations/" + std::to_string(i);
    const json& j = annotations[i];
    if (!j.is_object()) r.Fail(p, "expected an object");
    Annotation a;
    a.id = r.Integer(j, p, "id");
    a.image_id = r.Integer(j, p, "image_id");
    a.category_id = r.Integer(j, p, "category_id");
    a.bbox = r.Quad(r.Require(j, p, "bbox"), p + "/bbox");
    if (a.bbox[2] < 0.0 || a.bbox[3] < 0.0) r.Fail(p + "/bbox", "negative box size");
    a.extra = j;
    for (const char* key : {"id", "image_id", "category_id", "bbox"}) a.extra.erase(key);
    ds.annotations.push_back(std::move(a));
  }

  if (auto it = doc.find("categories"); it != doc.end()) {
    if (!it->is_array()) r.Fail("/categories", "expected an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const std::string p = "/categories/" + std::to_string(i);
      const json& j = (*it)[i];
      if (!j.is_object()) r.Fail(p, "expected an object");
      Category c;
      c.id = r.Integer(j, p, "id");
      const json& name = r.Require(j, p, "name");
      if (!name.is_string()) r.Fail(p + "/name", "expected a string");
      c.name = name.get<std::string>();
      c.extra = j;
      c.extra.erase("id");
      c.extra.erase("name");
      ds.categories.push_back(std::move(c));
    }
  }

  ds.extra = doc;
  for (const char* key : {"images", "annotations", "categories"}) ds.extra.erase(key);
  if (auto it = ds.extra.find("info"); it != ds.extra.end() && it->is_object()) {
    if (auto pv = it->find(kProvenanceKey); pv != it->end()) {
      const std::string p = std::string("/info/") + kProvenanceKey;
      if (!pv->is_object()) r.Fail(p, "expected an object");
      const json& noisy = r.Require(*pv, p, "noisy");
      if (!noisy.is_boolean()) r.Fail(p + "/noisy", "expected a boolean");
      ds.provenance.noisy = noisy.get<bool>();
      ds.provenance.noise_r = r.Number(*pv, p, "noise_r");
      const json& seed = r.Require(*pv, p, "noise_seed");
      if (!seed.is_number_unsigned() && !seed.is_number_integer()) {
        r.Fail(p + "/noise_seed", "expected an integer");
      }
      ds.provenance.noise_seed = seed.get<std::uint64_t>();
      it->erase(kProvenanceKey);
    }
    if (it->empty()) ds.extra.erase(it);
  }

  try {
    ValidateDataset(ds);
  } catch (const DataError& e) {
    throw DataError(source + ": " + e.what());
  }
  return ds;
}

AnnotatedDataset ReadAnnotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open file");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": malformed JSON at byte " + std::to_string(e.byte) +
                    ": " + e.what());
  }
  return FromJson(doc, path.string());
}

void WriteAnnotations(const AnnotatedDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path.string() + ": cannot open file for writing");
  out << ToJson(ds).dump(1) << '\n';
  if (!out) throw DataError(path.string() + ": write failed");
}

}  // namespace oamil
