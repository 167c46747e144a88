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
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "oamil/data.hpp"
#include "oamil/detector.hpp"
#include "oamil/eval.hpp"
#include "oamil/mil.hpp"

namespace oamil {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Ablation ladder. Each mode adds one ingredient to the previous one:
///   naive         classifier + regressor trained on the annotations
///   is-loss-only  + selector hinge loss, target = most positive instance
///   +oa-is        target = object-aware merge with the annotation
///   +oa-ie        + recursive bag extension
///   clean-oracle  naive training on the clean scene geometry
enum class TrainMode { kNaive, kIsLossOnly, kOaIs, kOaIe, kCleanOracle };

std::string_view ModeName(TrainMode mode);
std::optional<TrainMode> ParseMode(std::string_view name);
std::vector<TrainMode> AllModes();

struct TrainConfig {
  int epochs = 30;
  int batch_size = 8;  // scenes
  double learning_rate = 0.002;
  double momentum = 0.9;
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::kOaIe;
  bool shared = true;
  double val_fraction = 0.2;
  OAMILConfig oamil;
  ProposalSpec proposals;
  InferenceSpec inference;
  DiagnosticSpec diagnostic;

  void Validate() const;
};

/// The MIL objective actually optimised in `cfg.mode`; N, the target rule and
/// the selector term are switched per mode, the remaining fields copied.
OAMILConfig ObjectiveFor(const TrainConfig& cfg);

/// One training image: its geometry plus the boxes used as supervision.
struct TrainingScene {
  std::int64_t image_id = 0;
  Scene scene;
  std::vector<GroundTruth> annotations;  // as annotated (possibly noisy)
  std::vector<GroundTruth> clean;        // scene objects
};

/// Requires scene geometry on every image; throws DataError otherwise.
std::vector<TrainingScene> PrepareScenes(const AnnotatedDataset& ds);

struct EpochLog {
  int epoch = 0;
  LossBreakdown loss;  // mean per scene
  std::optional<double> val_map50;
};

struct TrainResult {
  ToyDetector detector;
  std::vector<EpochLog> log;
};

/// Loss bundle of one batch for the current detector (selection, labels and
/// targets frozen). `stream` seeds the proposals and extensions.
LossBundle AssembleBatch(const ToyDetector& det, std::span<const TrainingScene* const> batch,
                         const TrainConfig& cfg, std::uint64_t stream);

/// SGD with momentum over shuffled scene batches. Deterministic given
/// cfg.seed. `val` may be empty, in which case no validation mAP is logged.
/// Throws TrainingError naming the iteration if the loss becomes non-finite.
TrainResult TrainSplit(const AnnotatedDataset& train, const AnnotatedDataset& val,
                       const TrainConfig& cfg);

/// Splits `ds` with cfg.val_fraction (seeded by cfg.seed) and trains.
TrainResult Train(const AnnotatedDataset& ds, const TrainConfig& cfg);

inline constexpr const char* kTrainLogHeader =
    "epoch,total_loss,selector_loss,classifier_loss,generator_loss,val_map50";

void WriteTrainingLog(std::span<const EpochLog> log, const std::filesystem::path& path);

}  // namespace oamil
