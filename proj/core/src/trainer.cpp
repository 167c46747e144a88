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

#include "oamil/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace oamil {

std::string_view ModeName(TrainMode mode) {
  switch (mode) {
    case TrainMode::kNaive: return "naive";
    case TrainMode::kIsLossOnly: return "is-loss-only";
    case TrainMode::kOaIs: return "+oa-is";
    case TrainMode::kOaIe: return "+oa-ie";
    case TrainMode::kCleanOracle: return "clean-oracle";
  }
  return "unknown";
}

std::optional<TrainMode> ParseMode(std::string_view name) {
  for (TrainMode m : AllModes()) {
    if (ModeName(m) == name) return m;
  }
  return std::nullopt;
}

std::vector<TrainMode> AllModes() {
  return {TrainMode::kNaive, TrainMode::kIsLossOnly, TrainMode::kOaIs, TrainMode::kOaIe,
          TrainMode::kCleanOracle};
}

void TrainConfig::Validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be at least 1");
  if (batch_size < 1) throw std::invalid_argument("batch size must be at least 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must lie in [0, 1)");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) {
    throw std::invalid_argument("validation fraction must lie in [0, 1)");
  }
  ObjectiveFor(*this).Validate();
  proposals.Validate();
}

OAMILConfig ObjectiveFor(const TrainConfig& cfg) {
  OAMILConfig out = cfg.oamil;
  switch (cfg.mode) {
    case TrainMode::kNaive:
    case TrainMode::kCleanOracle:
      out.target_rule = TargetRule::kNoisyBox;
      out.selector_loss = false;
      out.extensions = 0;
      break;
    case TrainMode::kIsLossOnly:
      out.target_rule = TargetRule::kSelected;
      out.selector_loss = true;
      out.extensions = 0;
      break;
    case TrainMode::kOaIs:
      out.target_rule = TargetRule::kObjectAware;
      out.selector_loss = true;
      out.extensions = 0;
      break;
    case TrainMode::kOaIe:
      out.target_rule = TargetRule::kObjectAware;
      out.selector_loss = true;
      break;
  }
  return out;
}

std::vector<TrainingScene> PrepareScenes(const AnnotatedDataset& ds) {
  std::vector<TrainingScene> out;
  out.reserve(ds.images.size());
  for (const ImageInfo& img : ds.images) {
    if (!img.scene) {
      throw DataError("image " + std::to_string(img.id) +
                      " carries no scene geometry; training needs synthetic scenes");
    }
    TrainingScene ts;
    ts.image_id = img.id;
    ts.scene = *img.scene;
    for (const Annotation* a : ds.AnnotationsFor(img.id)) {
      const int cls = ds.ClassIndex(a->category_id);
      if (cls < 0 || cls >= ts.scene.num_classes) {
        throw DataError("annotation " + std::to_string(a->id) + " has an unusable category");
      }
      ts.annotations.push_back({a->box(), cls});
    }
    for (const SceneObject& o : ts.scene.objects) ts.clean.push_back({o.box, o.class_id});
    out.push_back(std::move(ts));
  }
  return out;
}

LossBundle AssembleBatch(const ToyDetector& det, std::span<const TrainingScene* const> batch,
                         const TrainConfig& cfg, std::uint64_t stream) {
  const OAMILConfig objective = ObjectiveFor(cfg);
  const bool clean = cfg.mode == TrainMode::kCleanOracle;
  LossBundle bundle;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const TrainingScene& ts = *batch[i];
    const std::vector<GroundTruth>& gt = clean ? ts.clean : ts.annotations;
    std::vector<Box> boxes;
    boxes.reserve(gt.size());
    for (const GroundTruth& g : gt) boxes.push_back(g.box);

    ProposalResult proposals = Propose(ts.scene, boxes, cfg.proposals, DeriveSeed(stream, {i, 1}));
    std::vector<Bag> bags = BuildBags(ts.scene, std::move(proposals.candidates), gt,
                                      objective.label_iou, cfg.proposals.negative_max_iou);
    Rng rng(DeriveSeed(stream, {i, 2}));
    const std::vector<BagFamily> families = ExtendBags(std::move(bags), det, ts.scene, objective, rng);
    AppendToLossBundle(families, objective, bundle);
  }
  bundle.lambda = objective.lambda;
  bundle.smooth_l1_beta = objective.smooth_l1_beta;
  return bundle;
}

TrainResult TrainSplit(const AnnotatedDataset& train, const AnnotatedDataset& val,
                       const TrainConfig& cfg) {
  cfg.Validate();
  const std::vector<TrainingScene> scenes = PrepareScenes(train);
  if (scenes.empty()) throw TrainingError("training split is empty");
  const int num_classes = scenes.front().scene.num_classes;
  for (const TrainingScene& ts : scenes) {
    if (ts.scene.num_classes != num_classes) throw DataError("scenes disagree on class count");
  }

  TrainResult result;
  result.detector = ToyDetector(num_classes, FeatureDim(num_classes), cfg.shared);
  ToyDetector& det = result.detector;
  std::vector<double> velocity(det.ParameterCount(), 0.0);

  std::vector<std::size_t> order(scenes.size());
  std::uint64_t iteration = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle(DeriveSeed(cfg.seed, {0xe90c4ULL, static_cast<std::uint64_t>(epoch)}));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.UniformIndex(i)]);

    EpochLog entry;
    entry.epoch = epoch + 1;
    const auto batch_size = static_cast<std::size_t>(cfg.batch_size);
    for (std::size_t start = 0; start < order.size(); start += batch_size, ++iteration) {
      std::vector<const TrainingScene*> batch;
      for (std::size_t k = start; k < std::min(order.size(), start + batch_size); ++k) {
        batch.push_back(&scenes[order[k]]);
      }
      const LossBundle bundle =
          AssembleBatch(det, batch, cfg, DeriveSeed(cfg.seed, {0xba7c4ULL, iteration}));
      const LossBreakdown loss = EvaluateLoss(det, bundle);
      if (!std::isfinite(loss.total)) {
        throw TrainingError("loss became non-finite at iteration " + std::to_string(iteration));
      }
      entry.loss.selector += loss.selector;
      entry.loss.classifier += loss.classifier;
      entry.loss.generator += loss.generator;
      entry.loss.total += loss.total;

      const std::vector<double> grad = Gradients(det, bundle).Flatten();
      std::vector<double> params = det.Parameters();
      const double scale = cfg.learning_rate / static_cast<double>(batch.size());
      for (std::size_t p = 0; p < params.size(); ++p) {
        velocity[p] = cfg.momentum * velocity[p] - scale * grad[p];
        params[p] += velocity[p];
      }
      if (!std::all_of(params.begin(), params.end(), [](double v) { return std::isfinite(v); })) {
        throw TrainingError("weights became non-finite at iteration " + std::to_string(iteration));
      }
      det.SetParameters(params);
    }
    const auto n = static_cast<double>(scenes.size());
    entry.loss.selector /= n;
    entry.loss.classifier /= n;
    entry.loss.generator /= n;
    entry.loss.total /= n;
    if (!val.images.empty()) {
      entry.val_map50 = EvaluateDetector(det, val, cfg.inference, cfg.diagnostic).ap.map;
    }
    result.log.push_back(entry);
  }
  return result;
}

TrainResult Train(const AnnotatedDataset& ds, const TrainConfig& cfg) {
  auto [train, val] = SplitDataset(ds, cfg.val_fraction, cfg.seed);
  return TrainSplit(train, val, cfg);
}

void WriteTrainingLog(std::span<const EpochLog> log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path.string() + ": cannot open training log for writing");
  out << kTrainLogHeader << '\n';
  for (const EpochLog& e : log) {
    out << e.epoch << ',' << FormatNumber(e.loss.total) << ',' << FormatNumber(e.loss.selector)
        << ',' << FormatNumber(e.loss.classifier) << ',' << FormatNumber(e.loss.generator) << ','
        << (e.val_map50 ? FormatNumber(*e.val_map50) : std::string()) << '\n';
  }
  if (!out) throw std::runtime_error(path.string() + ": training log write failed");
}

}  // namespace oamil
