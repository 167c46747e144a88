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

#include <gtest/gtest.h>

#include <limits>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oamil/data.hpp"
#include "oamil/eval.hpp"
#include "oamil/noise_sim.hpp"
#include "oamil/random.hpp"
#include "oamil/trainer.hpp"

namespace oamil {
namespace {

namespace fs = std::filesystem;

struct Split {
  AnnotatedDataset train;
  AnnotatedDataset val;
};

Split MakeSplit(int scenes, double r, std::uint64_t seed) {
  const AnnotatedDataset all = GenerateScenes(scenes, LayoutSpec{}, seed);
  auto [train, val] = SplitDataset(all, 0.2, seed + 1);
  return {PerturbDataset(train, {r, seed + 2}), val};
}

std::vector<const TrainingScene*> Pointers(const std::vector<TrainingScene>& scenes) {
  std::vector<const TrainingScene*> out;
  for (const TrainingScene& s : scenes) out.push_back(&s);
  return out;
}

ToyDetector RandomDetector(std::uint64_t seed, double scale) {
  ToyDetector det(3, FeatureDim(3), true);
  Rng rng(seed);
  std::vector<double> p(det.ParameterCount());
  for (double& v : p) v = rng.Uniform(-scale, scale);
  det.SetParameters(p);
  return det;
}

TEST(Modes, NamesRoundTrip) {
  for (TrainMode m : AllModes()) EXPECT_EQ(ParseMode(ModeName(m)), m);
  EXPECT_FALSE(ParseMode("oa-mil").has_value());
  EXPECT_EQ(ModeName(TrainMode::kOaIe), "+oa-ie");
}

TEST(Modes, ObjectiveLattice) {
  TrainConfig cfg;
  cfg.mode = TrainMode::kNaive;
  OAMILConfig o = ObjectiveFor(cfg);
  EXPECT_FALSE(o.selector_loss);
  EXPECT_EQ(o.target_rule, TargetRule::kNoisyBox);
  EXPECT_EQ(o.extensions, 0);
  cfg.mode = TrainMode::kIsLossOnly;
  o = ObjectiveFor(cfg);
  EXPECT_TRUE(o.selector_loss);
  EXPECT_EQ(o.target_rule, TargetRule::kSelected);
  EXPECT_EQ(o.extensions, 0);
  cfg.mode = TrainMode::kOaIs;
  o = ObjectiveFor(cfg);
  EXPECT_TRUE(o.selector_loss);
  EXPECT_EQ(o.target_rule, TargetRule::kObjectAware);
  EXPECT_EQ(o.extensions, 0);
  cfg.mode = TrainMode::kOaIe;
  o = ObjectiveFor(cfg);
  EXPECT_TRUE(o.selector_loss);
  EXPECT_EQ(o.target_rule, TargetRule::kObjectAware);
  EXPECT_EQ(o.extensions, 4);
}

TEST(Modes, ActiveLossTermsGrowAlongTheLadder) {
  const Split data = MakeSplit(10, 0.3, 50);
  const std::vector<TrainingScene> scenes = PrepareScenes(data.train);
  const auto batch = Pointers(scenes);
  const ToyDetector det = RandomDetector(51, 0.3);
  std::size_t previous_bags = 0;
  for (TrainMode m : {TrainMode::kNaive, TrainMode::kIsLossOnly, TrainMode::kOaIs, TrainMode::kOaIe}) {
    TrainConfig cfg;
    cfg.mode = m;
    const LossBundle b = AssembleBatch(det, batch, cfg, 52);
    EXPECT_FALSE(b.classifier_items.empty());
    EXPECT_FALSE(b.regression_items.empty());
    if (m == TrainMode::kNaive) {
      EXPECT_TRUE(b.selector_bags.empty());
    } else {
      EXPECT_GE(b.selector_bags.size(), previous_bags);
    }
    if (m == TrainMode::kOaIe) {
      EXPECT_GT(b.selector_bags.size(), previous_bags);
    }
    previous_bags = b.selector_bags.size();
  }
}

TEST(TrainConfig, Validation) {
  TrainConfig cfg;
  EXPECT_NO_THROW(cfg.Validate());
  cfg.learning_rate = 0.0;
  EXPECT_THROW(cfg.Validate(), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.Validate(), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.oamil.theta = 1.5;
  EXPECT_THROW(cfg.Validate(), std::invalid_argument);
}

TEST(Train, DeterministicGivenSeed) {
  const Split data = MakeSplit(40, 0.3, 60);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.mode = TrainMode::kOaIe;
  cfg.seed = 4;
  const TrainResult a = TrainSplit(data.train, data.val, cfg);
  const TrainResult b = TrainSplit(data.train, data.val, cfg);
  EXPECT_TRUE(a.detector == b.detector);
  ASSERT_EQ(a.log.size(), 3u);
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    EXPECT_EQ(a.log[i].loss.total, b.log[i].loss.total);
    EXPECT_EQ(a.log[i].val_map50, b.log[i].val_map50);
  }
  cfg.seed = 5;
  EXPECT_FALSE(TrainSplit(data.train, data.val, cfg).detector == a.detector);
}

TEST(Train, ZeroThetaSeparateSelectorFollowsNaive) {
  const Split data = MakeSplit(40, 0.4, 70);
  TrainConfig naive;
  naive.epochs = 3;
  naive.shared = false;
  naive.mode = TrainMode::kNaive;
  TrainConfig oa = naive;
  oa.mode = TrainMode::kOaIs;
  oa.oamil.theta = 0.0;
  const ToyDetector a = TrainSplit(data.train, {}, naive).detector;
  const ToyDetector b = TrainSplit(data.train, {}, oa).detector;
  EXPECT_TRUE(a.classifier_weights() == b.classifier_weights());
  EXPECT_TRUE(a.generator_weights() == b.generator_weights());
  EXPECT_FALSE(a.selector_weights() == b.selector_weights());
}

TEST(Train, ZeroThetaBatchIsNaivePlusSelectorLoss) {
  const Split data = MakeSplit(40, 0.4, 80);
  const std::vector<TrainingScene> scenes = PrepareScenes(data.train);
  const auto all = Pointers(scenes);
  TrainConfig naive;
  naive.mode = TrainMode::kNaive;
  TrainConfig oa = naive;
  oa.mode = TrainMode::kOaIs;
  oa.oamil.theta = 0.0;
  for (std::uint64_t stream = 0; stream < 20; ++stream) {
    const ToyDetector det = RandomDetector(stream, 0.5);
    const std::span<const TrainingScene* const> batch(all.data() + stream % (all.size() - 7), 8);
    const LossBundle a = AssembleBatch(det, batch, naive, stream);
    const LossBundle b = AssembleBatch(det, batch, oa, stream);
    EXPECT_TRUE(a.selector_bags.empty());
    EXPECT_FALSE(b.selector_bags.empty());
    EXPECT_EQ(a.features, b.features);
    ASSERT_EQ(a.regression_items.size(), b.regression_items.size());
    for (std::size_t i = 0; i < a.regression_items.size(); ++i) {
      EXPECT_EQ(a.regression_items[i].instance, b.regression_items[i].instance);
      EXPECT_EQ(a.regression_items[i].target, b.regression_items[i].target);
    }
    ASSERT_EQ(a.classifier_items.size(), b.classifier_items.size());
    for (std::size_t i = 0; i < a.classifier_items.size(); ++i) {
      EXPECT_EQ(a.classifier_items[i].positive_class, b.classifier_items[i].positive_class);
    }
  }
}

TEST(Train, SmallStepDoesNotIncreaseLoss) {
  const Split data = MakeSplit(30, 0.3, 90);
  const std::vector<TrainingScene> scenes = PrepareScenes(data.train);
  const auto all = Pointers(scenes);
  Rng rng(91);
  for (int trial = 0; trial < 20; ++trial) {
    TrainConfig cfg;
    cfg.mode = AllModes()[rng.UniformIndex(5)];
    const ToyDetector det = RandomDetector(92 + trial, 0.5);
    const std::span<const TrainingScene* const> batch(all.data() + rng.UniformIndex(all.size() - 4), 4);
    const LossBundle bundle = AssembleBatch(det, batch, cfg, 93 + trial);
    const double before = EvaluateLoss(det, bundle).total;
    const std::vector<double> grad = Gradients(det, bundle).Flatten();
    std::vector<double> params = det.Parameters();
    bool decreased = false;
    for (double lr = 1e-4; lr > 1e-10 && !decreased; lr *= 0.5) {
      std::vector<double> p = params;
      for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * grad[i];
      ToyDetector stepped = det;
      stepped.SetParameters(p);
      decreased = EvaluateLoss(stepped, bundle).total <= before;
    }
    EXPECT_TRUE(decreased) << "trial " << trial;
  }
}

TEST(Train, DivergenceNamesIteration) {
  const Split data = MakeSplit(20, 0.3, 100);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.learning_rate = std::numeric_limits<double>::max();
  try {
    TrainSplit(data.train, {}, cfg);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("iteration"), std::string::npos) << e.what();
  }
}

TEST(Train, NeedsSceneGeometry) {
  AnnotatedDataset ds = GenerateScenes(3, LayoutSpec{}, 110);
  ds.images[1].scene.reset();
  EXPECT_THROW(Train(ds, TrainConfig{}), DataError);
}

TEST(Train, NaiveOnCleanDataLocalizesWell) {
  const Split data = MakeSplit(250, 0.0, 120);
  TrainConfig cfg;
  cfg.mode = TrainMode::kNaive;
  const TrainResult result = TrainSplit(data.train, data.val, cfg);
  const EvalResult ev = EvaluateDetector(result.detector, data.val, cfg.inference, cfg.diagnostic);
  double sum = 0.0;
  const std::vector<GroundTruthBox> gt = CleanGroundTruth(data.val);
  for (const GroundTruthBox& g : gt) {
    double best = 0.0;
    for (const Detection& d : ev.detections) {
      if (d.scene_id == g.scene_id && d.class_id == g.class_id && d.confidence >= 0.5) {
        best = std::max(best, Iou(d.box, g.box));
      }
    }
    sum += best;
  }
  EXPECT_GE(sum / static_cast<double>(gt.size()), 0.8);
  EXPECT_GE(ev.diagnostic.cls_acc, 0.9);
  EXPECT_GE(ev.diagnostic.loc_prec, 0.9);
  ASSERT_TRUE(result.log.back().val_map50.has_value());
  EXPECT_EQ(*result.log.back().val_map50, ev.ap.map);
}

TEST(Train, LocalizationPrecisionFallsWithNoise) {
  double previous = 1.0;
  for (double r : {0.0, 0.1, 0.2, 0.3, 0.4}) {
    double sum = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const Split data = MakeSplit(250, r, 200 + 10 * seed);
      TrainConfig cfg;
      cfg.mode = TrainMode::kNaive;
      cfg.seed = seed;
      const TrainResult result = TrainSplit(data.train, {}, cfg);
      sum += EvaluateDetector(result.detector, data.val, cfg.inference, cfg.diagnostic).diagnostic.loc_prec;
    }
    const double mean = sum / 5;
    EXPECT_LE(mean, previous + 0.03) << "r=" << r;
    previous = mean;
  }
}

TEST(TrainingLog, CsvLayout) {
  std::vector<EpochLog> log(2);
  log[0].epoch = 1;
  log[0].loss = {1.0, 2.0, 0.5, 3.0};
  log[0].val_map50 = 0.25;
  log[1].epoch = 2;
  const fs::path path = fs::temp_directory_path() / "oamil_trainer_test_log.csv";
  WriteTrainingLog(log, path);
  std::ifstream in(path);
  std::stringstream text;
  text << in.rdbuf();
  EXPECT_EQ(text.str(),
            "epoch,total_loss,selector_loss,classifier_loss,generator_loss,val_map50\n"
            "1,3.000000,1.000000,2.000000,0.500000,0.250000\n"
            "2,0.000000,0.000000,0.000000,0.000000,\n");
  fs::remove(path);
}

}  // namespace
}  // namespace oamil
