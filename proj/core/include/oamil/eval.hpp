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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "oamil/data.hpp"
#include "oamil/detector.hpp"
#include "oamil/geometry.hpp"

namespace oamil {

struct Detection {
  Box box;
  int class_id = 0;
  double confidence = 0.0;
  std::int64_t scene_id = 0;
};

struct GroundTruthBox {
  Box box;
  int class_id = 0;
  std::int64_t scene_id = 0;
};

/// Greedy suppression in descending confidence, separately per scene and
/// class. Equal confidences keep input order. Output is in visiting order.
std::vector<Detection> Nms(std::vector<Detection> detections, double iou_threshold);

struct InferenceSpec {
  AnchorSpec anchors;
  double score_threshold = 0.05;
  double nms_iou = 0.5;
  std::size_t max_per_scene = 100;
};

/// Scores every anchor, keeps its best class, regresses the box for that
/// class and applies NMS.
std::vector<Detection> Detect(const ToyDetector& det, const Scene& scene, std::int64_t scene_id,
                              const InferenceSpec& spec);

struct ApResult {
  std::vector<std::optional<double>> per_class;  // nullopt: no detections and no GT
  double map = 0.0;
};

/// AP of a single class with all-points interpolation. Detections are
/// visited by descending confidence (stable); each is matched to its max-IoU
/// ground truth in the same scene and counts as a true positive when that
/// IoU reaches the threshold and the ground truth is still unmatched.
/// Returns nullopt when there is neither a detection nor a ground truth.
std::optional<double> ClassAveragePrecision(std::span<const Detection> detections,
                                            std::span<const GroundTruthBox> ground_truth,
                                            double iou_threshold = 0.5);

/// Per-class AP and their unweighted mean over classes that have any
/// detection or ground truth.
ApResult AveragePrecision(std::span<const Detection> detections,
                          std::span<const GroundTruthBox> ground_truth, int num_classes,
                          double iou_threshold = 0.5);

struct ClsLocResult {
  double cls_acc = 0.0;   // objects whose best-IoU detection (>= match_iou) has the right class
  double loc_prec = 0.0;  // objects covered by a detection with IoU >= precise_iou
  std::size_t objects = 0;
};

struct DiagnosticSpec {
  double match_iou = 0.1;
  double precise_iou = 0.75;
  double min_confidence = 0.5;
};

ClsLocResult ClsLocDiagnostic(std::span<const Detection> detections,
                              std::span<const GroundTruthBox> ground_truth,
                              const DiagnosticSpec& spec = {});

/// Clean object boxes of every scene in the dataset; the annotations are not
/// consulted. Throws DataError for images without scene geometry.
std::vector<GroundTruthBox> CleanGroundTruth(const AnnotatedDataset& ds);

struct EvalResult {
  ApResult ap;
  ClsLocResult diagnostic;
  std::vector<Detection> detections;
};

EvalResult EvaluateDetector(const ToyDetector& det, const AnnotatedDataset& ds,
                            const InferenceSpec& inference = {},
                            const DiagnosticSpec& diagnostic = {});

struct MetricsRow {
  std::string run_id;
  std::string mode;
  double noise_r = 0.0;
  std::uint64_t seed = 0;
  double map50 = 0.0;
  double cls_acc = 0.0;
  double loc_prec = 0.0;
};

inline constexpr const char* kMetricsHeader = "run_id,mode,noise_r,seed,map50,cls_acc,loc_prec";

std::string FormatMetricsRow(const MetricsRow& row);
void WriteMetricsCsv(std::span<const MetricsRow> rows, const std::filesystem::path& path);
std::vector<MetricsRow> ReadMetricsCsv(const std::filesystem::path& path);

/// Fixed-precision number formatting shared by every CSV writer.
std::string FormatNumber(double v);

}  // namespace oamil
