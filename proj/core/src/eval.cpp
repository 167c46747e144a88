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

#include "oamil/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace oamil {

std::vector<Detection> Nms(std::vector<Detection> detections, double iou_threshold) {
  std::stable_sort(detections.begin(), detections.end(),
                   [](const Detection& a, const Detection& b) { return a.confidence > b.confidence; });
  std::vector<Detection> kept;
  for (const Detection& d : detections) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
      return k.scene_id == d.scene_id && k.class_id == d.class_id &&
             Iou(k.box, d.box) > iou_threshold;
    });
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

std::vector<Detection> Detect(const ToyDetector& det, const Scene& scene, std::int64_t scene_id,
                              const InferenceSpec& spec) {
  std::vector<Detection> raw;
  for (const Box& anchor : AnchorGrid(scene.bounds, spec.anchors)) {
    const std::vector<double> x = SceneFeatures(scene, anchor);
    int best = 0;
    double best_score = -1.0;
    for (int c = 0; c < det.num_classes(); ++c) {
      const double s = det.ClassifierScore(x, c);
      if (s > best_score) {
        best_score = s;
        best = c;
      }
    }
    if (best_score < spec.score_threshold) continue;
    const Box box = Clip(DecodeBox(det.PredictDeltas(x, best), anchor), scene.bounds, 1.0);
    raw.push_back({box, best, best_score, scene_id});
  }
  std::vector<Detection> kept = Nms(std::move(raw), spec.nms_iou);
  if (kept.size() > spec.max_per_scene) kept.resize(spec.max_per_scene);
  return kept;
}

std::optional<double> ClassAveragePrecision(std::span<const Detection> detections,
                                            std::span<const GroundTruthBox> ground_truth,
                                            double iou_threshold) {
  if (detections.empty() && ground_truth.empty()) return std::nullopt;
  if (ground_truth.empty()) return 0.0;

  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detections[a].confidence > detections[b].confidence;
  });

  std::vector<bool> matched(ground_truth.size(), false);
  std::vector<double> tp(order.size(), 0.0);
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const Detection& d = detections[order[rank]];
    double best_iou = -1.0;
    std::size_t best = ground_truth.size();
    for (std::size_t g = 0; g < ground_truth.size(); ++g) {
      if (ground_truth[g].scene_id != d.scene_id) continue;
      const double v = Iou(d.box, ground_truth[g].box);
      if (v > best_iou) {
        best_iou = v;
        best = g;
      }
    }
    if (best < ground_truth.size() && best_iou >= iou_threshold && !matched[best]) {
      matched[best] = true;
      tp[rank] = 1.0;
    }
  }

  // Precision envelope over recall, integrated at every recall change.
  const auto n_gt = static_cast<double>(ground_truth.size());
  std::vector<double> recall{0.0};
  std::vector<double> precision{0.0};
  double cum_tp = 0.0;
  for (std::size_t rank = 0; rank < tp.size(); ++rank) {
    cum_tp += tp[rank];
    recall.push_back(cum_tp / n_gt);
    precision.push_back(cum_tp / static_cast<double>(rank + 1));
  }
  recall.push_back(1.0);
  precision.push_back(0.0);
  for (std::size_t i = precision.size() - 1; i > 0; --i) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }
  double ap = 0.0;
  for (std::size_t i = 1; i < recall.size(); ++i) {
    if (recall[i] != recall[i - 1]) ap += (recall[i] - recall[i - 1]) * precision[i];
  }
  return ap;
}

ApResult AveragePrecision(std::span<const Detection> detections,
                          std::span<const GroundTruthBox> ground_truth, int num_classes,
                          double iou_threshold) {
  ApResult result;
  double sum = 0.0;
  int counted = 0;
  for (int c = 0; c < num_classes; ++c) {
    std::vector<Detection> dets;
    for (const Detection& d : detections) {
      if (d.class_id == c) dets.push_back(d);
    }
    std::vector<GroundTruthBox> gts;
    for (const GroundTruthBox& g : ground_truth) {
      if (g.class_id == c) gts.push_back(g);
    }
    const std::optional<double> ap = ClassAveragePrecision(dets, gts, iou_threshold);
    result.per_class.push_back(ap);
    if (ap) {
      sum += *ap;
      ++counted;
    }
  }
  result.map = counted > 0 ? sum / counted : 0.0;
  return result;
}

ClsLocResult ClsLocDiagnostic(std::span<const Detection> detections,
                              std::span<const GroundTruthBox> ground_truth,
                              const DiagnosticSpec& spec) {
  ClsLocResult result;
  result.objects = ground_truth.size();
  if (ground_truth.empty()) return result;
  std::size_t correct = 0;
  std::size_t precise = 0;
  for (const GroundTruthBox& g : ground_truth) {
    const Detection* best = nullptr;
    double best_iou = -1.0;
    for (const Detection& d : detections) {
      if (d.scene_id != g.scene_id || d.confidence < spec.min_confidence) continue;
      const double v = Iou(d.box, g.box);
      if (v > best_iou) {
        best_iou = v;
        best = &d;
      }
    }
    if (best != nullptr && best_iou >= spec.match_iou && best->class_id == g.class_id) ++correct;
    if (best != nullptr && best_iou >= spec.precise_iou) ++precise;
  }
  const auto n = static_cast<double>(ground_truth.size());
  result.cls_acc = static_cast<double>(correct) / n;
  result.loc_prec = static_cast<double>(precise) / n;
  return result;
}

std::vector<GroundTruthBox> CleanGroundTruth(const AnnotatedDataset& ds) {
  std::vector<GroundTruthBox> out;
  for (const ImageInfo& img : ds.images) {
    if (!img.scene) {
      throw DataError("image " + std::to_string(img.id) + " carries no scene geometry");
    }
    for (const SceneObject& o : img.scene->objects) out.push_back({o.box, o.class_id, img.id});
  }
  return out;
}

EvalResult EvaluateDetector(const ToyDetector& det, const AnnotatedDataset& ds,
                            const InferenceSpec& inference, const DiagnosticSpec& diagnostic) {
  EvalResult result;
  for (const ImageInfo& img : ds.images) {
    if (!img.scene) {
      throw DataError("image " + std::to_string(img.id) + " carries no scene geometry");
    }
    auto dets = Detect(det, *img.scene, img.id, inference);
    result.detections.insert(result.detections.end(), dets.begin(), dets.end());
  }
  const std::vector<GroundTruthBox> gt = CleanGroundTruth(ds);
  result.ap = AveragePrecision(result.detections, gt, det.num_classes());
  result.diagnostic = ClsLocDiagnostic(result.detections, gt, diagnostic);
  return result;
}

std::string FormatNumber(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string FormatMetricsRow(const MetricsRow& row) {
  std::ostringstream os;
  os << row.run_id << ',' << row.mode << ',' << FormatNumber(row.noise_r) << ',' << row.seed << ','
     << FormatNumber(row.map50) << ',' << FormatNumber(row.cls_acc) << ','
     << FormatNumber(row.loc_prec);
  return os.str();
}

void WriteMetricsCsv(std::span<const MetricsRow> rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path.string() + ": cannot open metrics file for writing");
  out << kMetricsHeader << '\n';
  for (const MetricsRow& row : rows) out << FormatMetricsRow(row) << '\n';
  if (!out) throw std::runtime_error(path.string() + ": metrics write failed");
}

std::vector<MetricsRow> ReadMetricsCsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open metrics file");
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw std::runtime_error(path.string() + ": unexpected metrics header");
  }
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 7) throw std::runtime_error(path.string() + ": malformed row: " + line);
    MetricsRow row;
    row.run_id = cells[0];
    row.mode = cells[1];
    row.noise_r = std::stod(cells[2]);
    row.seed = std::stoull(cells[3]);
    row.map50 = std::stod(cells[4]);
    row.cls_acc = std::stod(cells[5]);
    row.loc_prec = std::stod(cells[6]);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace oamil
