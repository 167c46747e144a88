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

#include <cmath>
#include <filesystem>
#include <fstream>

#include "oamil/data.hpp"
#include "oamil/detector.hpp"
#include "oamil/gradcheck.hpp"
#include "oamil/noise_sim.hpp"
#include "oamil/random.hpp"

namespace oamil {
namespace {

namespace fs = std::filesystem;

Scene TestScene() {
  Scene s;
  s.bounds = Box(0, 0, 128, 128);
  s.num_classes = 2;
  s.background = 0.05;
  s.objects.push_back({Box(20, 20, 50, 44), 0, 0.9});
  s.objects.push_back({Box(70, 60, 100, 100), 1, 0.7});
  return s;
}

ToyDetector RandomDetector(int classes, bool shared, std::uint64_t seed, double scale = 0.5) {
  ToyDetector det(classes, FeatureDim(classes), shared);
  Rng rng(seed);
  std::vector<double> p(det.ParameterCount());
  for (double& v : p) v = rng.Uniform(-scale, scale);
  det.SetParameters(p);
  return det;
}

TEST(Propose, ZeroJitterRepeatsTheBox) {
  const Scene s = TestScene();
  ProposalSpec spec;
  spec.jitter = 0.0;
  spec.positives_per_object = 8;
  const Box noisy(22, 18, 49, 47);
  const ProposalResult r = Propose(s, std::span<const Box>(&noisy, 1), spec, 3);
  ASSERT_EQ(r.positives, 9u);
  for (std::size_t i = 0; i < r.positives; ++i) EXPECT_EQ(r.candidates[i].box, noisy);
}

TEST(Propose, BackgroundCandidatesAvoidAnnotations) {
  const Scene s = TestScene();
  const std::vector<Box> noisy{Box(22, 18, 49, 47), Box(68, 62, 101, 97)};
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const ProposalResult r = Propose(s, noisy, ProposalSpec{}, seed);
    EXPECT_EQ(r.candidates.size(), r.positives + 32 - static_cast<std::size_t>(r.missing_negatives));
    for (std::size_t i = r.positives; i < r.candidates.size(); ++i) {
      for (const Box& b : noisy) EXPECT_LT(Iou(r.candidates[i].box, b), 0.1);
      EXPECT_GE(r.candidates[i].box.x1(), 0.0);
      EXPECT_LE(r.candidates[i].box.x2(), 128.0);
    }
  }
}

TEST(Propose, JitterOftenImprovesOnNoisyBox) {
  // Premise of instance selection: around a box annotated at r=0.4, some of
  // K=16 proposals overlap the clean object better than the annotation.
  const AnnotatedDataset clean = GenerateScenes(200, LayoutSpec{}, 31);
  const AnnotatedDataset noisy = PerturbDataset(clean, {0.4, 32});
  ProposalSpec spec;
  spec.positives_per_object = 16;
  spec.jitter = 0.3;
  int trials = 0, improved = 0;
  for (std::size_t i = 0; i < noisy.annotations.size(); ++i) {
    const Box z = noisy.annotations[i].box(), truth = clean.annotations[i].box();
    const Scene& s = *noisy.FindImage(noisy.annotations[i].image_id)->scene;
    const ProposalResult r = Propose(s, std::span<const Box>(&z, 1), spec, 100 + i);
    const double base = Iou(z, truth);
    bool better = false;
    for (std::size_t k = 1; k < r.positives; ++k) better |= Iou(r.candidates[k].box, truth) > base;
    ++trials;
    improved += better;
  }
  EXPECT_GE(static_cast<double>(improved) / trials, 0.9);
}

TEST(Scoring, ZeroWeights) {
  const Scene s = TestScene();
  ToyDetector det(2, FeatureDim(2), true);
  std::vector<Candidate> cands{MakeCandidate(s, Box(10, 10, 40, 30)), MakeCandidate(s, Box(60, 60, 90, 110))};
  ScoreAndRegress(det, cands, s.bounds);
  for (const Candidate& c : cands) {
    for (int k = 0; k < 2; ++k) {
      EXPECT_EQ(c.selector_scores[k], 0.5);
      EXPECT_EQ(c.classifier_scores[k], 0.5);
      EXPECT_EQ(c.regressed[k], c.box);
    }
  }
}

TEST(Scoring, SharedSelectorAliasesClassifier) {
  const Scene s = TestScene();
  const ToyDetector det = RandomDetector(2, true, 4);
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    std::vector<Candidate> c{MakeCandidate(s, Box::FromCenter(rng.Uniform(10, 110), rng.Uniform(10, 110), 20, 16))};
    ScoreAndRegress(det, c, s.bounds);
    EXPECT_EQ(c[0].selector_scores, c[0].classifier_scores);
  }
  const ToyDetector separate = RandomDetector(2, false, 4);
  EXPECT_NE(separate.selector_weights(), separate.classifier_weights());
}

TEST(Scoring, HandEvaluatedTwoFeatureToy) {
  ToyDetector det(1, 2, false);
  det.selector_weights()(0, 0) = 0.5;
  det.selector_weights()(0, 1) = -1.25;
  det.classifier_weights()(0, 0) = 2.0;
  det.classifier_weights()(0, 1) = 0.75;
  const std::vector<double> x{0.3, 0.8};
  const double s = 1.0 / (1.0 + std::exp(-(0.5 * 0.3 - 1.25 * 0.8)));
  const double g = 1.0 / (1.0 + std::exp(-(2.0 * 0.3 + 0.75 * 0.8)));
  EXPECT_NEAR(det.SelectorScore(x, 0), s, 1e-12);
  EXPECT_NEAR(det.ClassifierScore(x, 0), g, 1e-12);
}

TEST(Scoring, ScoresStayInsideOpenUnitInterval) {
  Rng rng(6);
  for (int i = 0; i < 2000; ++i) {
    const ToyDetector det = RandomDetector(3, false, 100 + i, 50.0);
    std::vector<double> x(FeatureDim(3));
    for (double& v : x) v = rng.Uniform(-20, 20);
    for (int c = 0; c < 3; ++c) {
      const double s = det.SelectorScore(x, c), g = det.ClassifierScore(x, c);
      EXPECT_GT(s, 0.0);
      EXPECT_LT(s, 1.0);
      EXPECT_GT(g, 0.0);
      EXPECT_LT(g, 1.0);
    }
  }
}

TEST(Scoring, RejectsNonFiniteFeatures) {
  const Scene s = TestScene();
  ToyDetector det(2, FeatureDim(2), true);
  std::vector<Candidate> c{MakeCandidate(s, Box(10, 10, 40, 30))};
  c[0].features[0] = NAN;
  EXPECT_THROW(ScoreAndRegress(det, c, s.bounds), DetectorError);
}

TEST(BoxEncoding, DecodeInvertsEncode) {
  Rng rng(8);
  for (int i = 0; i < 5000; ++i) {
    const Box anchor = Box::FromCenter(rng.Uniform(0, 100), rng.Uniform(0, 100), rng.Uniform(2, 60), rng.Uniform(2, 60));
    const Box target = Box::FromCenter(rng.Uniform(0, 100), rng.Uniform(0, 100), rng.Uniform(2, 60), rng.Uniform(2, 60));
    const Box back = DecodeBox(EncodeBox(target, anchor), anchor);
    EXPECT_NEAR(back.x1(), target.x1(), 1e-9);
    EXPECT_NEAR(back.y1(), target.y1(), 1e-9);
    EXPECT_NEAR(back.x2(), target.x2(), 1e-9);
    EXPECT_NEAR(back.y2(), target.y2(), 1e-9);
  }
  EXPECT_EQ(EncodeBox(Box(1, 2, 5, 9), Box(1, 2, 5, 9)), (Deltas{0, 0, 0, 0}));
}

TEST(Loss, SmoothL1) {
  EXPECT_EQ(SmoothL1(0.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(SmoothL1(0.5, 1.0), 0.125);
  EXPECT_DOUBLE_EQ(SmoothL1(-2.0, 1.0), 1.5);
}

TEST(Gradients, ZeroAtAPerfectFit) {
  // Logits beyond the +-30 clamp have zero slope, and exact regression
  // targets give zero smooth-l1 slope, so the gradient vanishes exactly.
  ToyDetector det(1, 2, false);
  det.selector_weights()(0, 0) = 40.0;
  det.classifier_weights()(0, 0) = 40.0;
  LossBundle b;
  const std::size_t i = b.AddInstance({1.0, 0.5});
  b.selector_bags.push_back({1, 0, {i}});
  b.classifier_items.push_back({i, 0});
  b.regression_items.push_back({i, 0, det.PredictDeltas(b.features[i], 0)});
  const LossBreakdown loss = EvaluateLoss(det, b);
  EXPECT_LT(loss.total, 1e-12);
  for (double g : Gradients(det, b).Flatten()) EXPECT_EQ(g, 0.0);
}

TEST(Gradients, SinglePositiveClassifierItem) {
  const ToyDetector det = RandomDetector(3, true, 9);
  LossBundle b;
  const std::vector<double> x{0.4, 0.9, -0.2, 0.1, 0.0, 0.3, -1.5, -1.2, 1.0, 0.6, 0.2, 0.1};
  const std::size_t i = b.AddInstance(x);
  b.classifier_items.push_back({i, 1});
  const DetectorGradient grad = Gradients(det, b);
  for (int c = 0; c < 3; ++c) {
    const double g = det.ClassifierScore(x, c);
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double expected = (c == 1 ? g - 1.0 : g) * x[k];
      EXPECT_NEAR(grad.classifier(c, k), expected, 1e-12);
    }
  }
  for (double v : grad.generator.values) EXPECT_EQ(v, 0.0);
}

TEST(Gradients, MatchFiniteDifferences) {
  GradCheckSpec spec;
  spec.configs = 20;
  spec.step = 1e-5;
  spec.seed = 77;
  const GradCheckReport report = RunGradientCheck(spec);
  ASSERT_EQ(report.cases.size(), 20u);
  for (const GradCheckCase& c : report.cases) {
    EXPECT_GT(c.selector_loss, 0.0);
    EXPECT_GT(c.classifier_loss, 0.0);
    EXPECT_GT(c.generator_loss, 0.0);
  }
  EXPECT_LE(report.max_rel_error, 1e-4);
}

TEST(Anchors, GridInsideBounds) {
  const Box bounds(0, 0, 128, 96);
  const std::vector<Box> anchors = AnchorGrid(bounds, AnchorSpec{});
  EXPECT_EQ(anchors.size(), 8u * 6u * 2u * 3u);
  for (const Box& a : anchors) {
    EXPECT_GE(a.x1(), 0.0);
    EXPECT_GE(a.y1(), 0.0);
    EXPECT_LE(a.x2(), 128.0);
    EXPECT_LE(a.y2(), 96.0);
    EXPECT_FALSE(a.degenerate());
  }
}

TEST(Checkpoint, RoundTripsBitExactly) {
  for (bool shared : {true, false}) {
    const ToyDetector det = RandomDetector(3, shared, shared ? 10 : 11);
    const fs::path path = fs::temp_directory_path() / "oamil_detector_test.ckpt";
    SaveCheckpoint(det, path);
    const ToyDetector back = LoadCheckpoint(path);
    EXPECT_TRUE(back == det);
    EXPECT_EQ(back.shared(), shared);
    fs::remove(path);
  }
}

TEST(Checkpoint, RejectsBadFiles) {
  const fs::path path = fs::temp_directory_path() / "oamil_detector_test_bad.ckpt";
  std::ofstream(path) << "oamil-checkpoint 2\n";
  EXPECT_THROW(LoadCheckpoint(path), DetectorError);
  std::ofstream(path) << "oamil-checkpoint 1\nshared 1 1\n1\nclassifier 2 2 3\n1 2 3\n";
  EXPECT_THROW(LoadCheckpoint(path), DetectorError);
  fs::remove(path);
  EXPECT_THROW(LoadCheckpoint(path), DetectorError);
}

}  // namespace
}  // namespace oamil
