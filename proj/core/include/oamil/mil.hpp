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

#include <optional>
#include <span>
#include <vector>

#include "oamil/data.hpp"
#include "oamil/detector.hpp"
#include "oamil/geometry.hpp"
#include "oamil/random.hpp"

namespace oamil {

class MilError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct GroundTruth {
  Box box;
  int class_id = 0;
};

/// A positive bag holds the instances around one annotated object, with the
/// annotated box itself at index 0. Negative bags hold background candidates.
struct Bag {
  int label = -1;  // +1 or -1
  std::vector<Candidate> instances;
  std::optional<Box> anchor_gt;  // the (noisy) annotation, positive bags only
  int class_id = -1;             // positive bags only
  int stage = 0;

  bool positive() const { return label > 0; }
};

/// Which box a positive bag is trained towards.
enum class TargetRule {
  kNoisyBox,     // the annotation itself (plain supervision)
  kSelected,     // the most positive instance
  kObjectAware,  // phi-weighted merge of the most positive instance and the annotation
};

struct OAMILConfig {
  double gamma = 7.5;
  double theta = 0.85;
  int extensions = 4;  // N
  double lambda = 0.1;
  double label_iou = 0.5;
  TargetRule target_rule = TargetRule::kObjectAware;
  bool selector_loss = true;
  int extension_proposals = 32;  // instances re-proposed per extension stage
  double extension_jitter = 0.3;
  double smooth_l1_beta = 1.0;

  void Validate() const;
};

struct SelectionResult {
  std::size_t index = 0;  // j* within the stage bag
  Box merged;             // b*
  double weight = 0.0;    // phi(score)
  double score = 0.0;     // selector score of j*
  int stage = 0;
};

/// Max-IoU assignment of candidates to annotations. Candidates with
/// IoU >= assign_iou join the bag of their best annotation; candidates whose
/// IoU to every annotation is below negative_iou are chunked, in order, into
/// negative bags of at most negative_bag_cap instances. The rest are ignored.
/// A candidate whose box equals an annotation exactly serves as that bag's
/// annotation instance; otherwise one is created from `scene`.
std::vector<Bag> BuildBags(const Scene& scene, std::vector<Candidate> candidates,
                           std::span<const GroundTruth> noisy_gt, double assign_iou = 0.5,
                           double negative_iou = 0.1, std::size_t negative_bag_cap = 16);

/// Argmax with ties broken by the lowest index. `scores` must be non-empty.
std::size_t SelectMostPositive(std::span<const double> scores);

/// Selector scores of every instance for the bag's class.
std::vector<double> BagScores(const Bag& bag);

/// min(x^gamma, theta) for x in [0, 1]; throws MilError otherwise.
double Phi(double x, double gamma, double theta);

/// phi * a + (1 - phi) * b per corner coordinate.
Box MergeBoxes(const Box& a, const Box& b, double phi);

/// Object-aware selection for instance j of a positive bag.
SelectionResult OaSelect(const Bag& bag, std::size_t j, const OAMILConfig& cfg);

/// Training target of a positive bag under `cfg.target_rule`.
SelectionResult SelectTarget(const Bag& bag, const OAMILConfig& cfg);

/// Stages B^0..B^N of one bag plus the target selected across them.
struct BagFamily {
  std::vector<Bag> stages;
  std::vector<SelectionResult> selections;  // one per stage, positive families only
  std::optional<SelectionResult> target;    // positive families only

  const Bag& initial() const { return stages.front(); }
  bool positive() const { return stages.front().positive(); }
};

/// Scores every bag with `det` and builds the extended families. Stage k+1 of
/// a positive bag holds the merged box of stage k followed by
/// cfg.extension_proposals jittered copies of it. The family target is the
/// stage selection with the highest selector score (earliest on ties).
/// Negative bags are never extended.
std::vector<BagFamily> ExtendBags(std::vector<Bag> bags, const ToyDetector& det, const Scene& scene,
                                  const OAMILConfig& cfg, Rng& rng);

double HingeLoss(int label, double best_score);

/// Sum over stages of max(0, 1 - y * (2 s - 1)) with s the best selector
/// score of the stage (negative bags: best over all classes).
double SelectorLoss(const BagFamily& family);

/// +1 iff the bag is positive and IoU(instance, b_star) >= threshold.
std::vector<int> LabelInstances(const Bag& bag, const Box& b_star, double threshold);

/// -log(y (g - 1/2) + 1/2).
double BinaryLogLoss(int label, double g);

/// Binary log-loss of every class head on every instance: an instance
/// labelled +1 is positive for the bag's class and negative for the others;
/// an instance labelled -1 is negative for every class.
double ClassifierLoss(const Bag& bag, std::span<const int> labels);

/// Smooth-l1 between predicted deltas and the encoding of b_star against each
/// positively labelled instance. Zero for negative bags.
double GeneratorLoss(const Bag& bag, std::span<const int> labels, const Box& b_star,
                     double beta = 1.0);

/// Selector over all stages, classifier and generator over B^0 only.
LossBreakdown TotalLoss(std::span<const BagFamily> families, const OAMILConfig& cfg);

/// The same objective in the detector's LossBundle form, for gradients.
void AppendToLossBundle(std::span<const BagFamily> families, const OAMILConfig& cfg,
                        LossBundle& bundle);

}  // namespace oamil
