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

#include "oamil/mil.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace oamil {

void OAMILConfig::Validate() const {
  if (!(gamma > 0.0)) throw MilError("gamma must be positive");
  // theta = 0 is accepted: it collapses the merge onto the annotation.
  if (!(theta >= 0.0 && theta <= 1.0)) throw MilError("theta must lie in [0, 1]");
  if (extensions < 0) throw MilError("extension count must be non-negative");
  if (selector_loss && !(lambda > 0.0)) throw MilError("lambda must be positive");
  if (!(label_iou > 0.0 && label_iou <= 1.0)) throw MilError("label IoU must lie in (0, 1]");
  if (extension_proposals < 0) throw MilError("extension proposal count must be non-negative");
  if (!(extension_jitter >= 0.0 && extension_jitter < 1.0)) {
    throw MilError("extension jitter must lie in [0, 1)");
  }
  if (!(smooth_l1_beta > 0.0)) throw MilError("smooth-l1 beta must be positive");
}

std::vector<Bag> BuildBags(const Scene& scene, std::vector<Candidate> candidates,
                           std::span<const GroundTruth> noisy_gt, double assign_iou,
                           double negative_iou, std::size_t negative_bag_cap) {
  if (negative_bag_cap == 0) throw MilError("negative bag cap must be positive");
  std::vector<Bag> positives(noisy_gt.size());
  std::vector<bool> has_gt_instance(noisy_gt.size(), false);
  for (std::size_t i = 0; i < noisy_gt.size(); ++i) {
    positives[i].label = 1;
    positives[i].anchor_gt = noisy_gt[i].box;
    positives[i].class_id = noisy_gt[i].class_id;
    positives[i].instances.emplace_back();  // slot for the annotation instance
  }

  std::vector<Candidate> background;
  for (Candidate& c : candidates) {
    int best = -1;
    double best_iou = -1.0;
    for (std::size_t i = 0; i < noisy_gt.size(); ++i) {
      const double v = Iou(c.box, noisy_gt[i].box);
      if (v > best_iou) {
        best_iou = v;
        best = static_cast<int>(i);
      }
    }
    if (best >= 0 && best_iou >= assign_iou) {
      const auto b = static_cast<std::size_t>(best);
      if (!has_gt_instance[b] && c.box == noisy_gt[b].box) {
        positives[b].instances[0] = std::move(c);
        has_gt_instance[b] = true;
      } else {
        positives[b].instances.push_back(std::move(c));
      }
    } else if (best < 0 || best_iou < negative_iou) {
      background.push_back(std::move(c));
    }
  }
  for (std::size_t i = 0; i < noisy_gt.size(); ++i) {
    if (!has_gt_instance[i]) positives[i].instances[0] = MakeCandidate(scene, noisy_gt[i].box);
  }

  std::vector<Bag> bags = std::move(positives);
  for (std::size_t start = 0; start < background.size(); start += negative_bag_cap) {
    Bag neg;
    neg.label = -1;
    const std::size_t end = std::min(background.size(), start + negative_bag_cap);
    for (std::size_t k = start; k < end; ++k) neg.instances.push_back(std::move(background[k]));
    bags.push_back(std::move(neg));
  }
  return bags;
}

std::size_t SelectMostPositive(std::span<const double> scores) {
  if (scores.empty()) throw MilError("cannot select from an empty bag");
  std::size_t best = 0;
  for (std::size_t j = 1; j < scores.size(); ++j) {
    if (scores[j] > scores[best]) best = j;
  }
  return best;
}

std::vector<double> BagScores(const Bag& bag) {
  if (!bag.positive()) throw MilError("bag scores need a class; bag is negative");
  const auto c = static_cast<std::size_t>(bag.class_id);
  std::vector<double> scores;
  scores.reserve(bag.instances.size());
  for (const Candidate& inst : bag.instances) {
    if (c >= inst.selector_scores.size()) throw MilError("instance has not been scored");
    scores.push_back(inst.selector_scores[c]);
  }
  return scores;
}

double Phi(double x, double gamma, double theta) {
  if (!(x >= 0.0 && x <= 1.0)) {
    throw MilError("phi is defined on [0, 1], got " + std::to_string(x));
  }
  return std::min(std::pow(x, gamma), theta);
}

Box MergeBoxes(const Box& a, const Box& b, double phi) {
  const double rest = 1.0 - phi;
  return Box(phi * a.x1() + rest * b.x1(), phi * a.y1() + rest * b.y1(),
             phi * a.x2() + rest * b.x2(), phi * a.y2() + rest * b.y2());
}

SelectionResult OaSelect(const Bag& bag, std::size_t j, const OAMILConfig& cfg) {
  if (!bag.positive() || !bag.anchor_gt) throw MilError("object-aware selection needs a positive bag");
  if (j >= bag.instances.size()) throw MilError("selected index out of range");
  const Candidate& inst = bag.instances[j];
  const double score = inst.selector_scores.at(static_cast<std::size_t>(bag.class_id));
  const double weight = Phi(score, cfg.gamma, cfg.theta);
  return {j, MergeBoxes(inst.box, *bag.anchor_gt, weight), weight, score, bag.stage};
}

SelectionResult SelectTarget(const Bag& bag, const OAMILConfig& cfg) {
  if (!bag.positive() || !bag.anchor_gt) throw MilError("targets exist for positive bags only");
  const std::vector<double> scores = BagScores(bag);
  const std::size_t j = SelectMostPositive(scores);
  switch (cfg.target_rule) {
    case TargetRule::kNoisyBox:
      return {j, *bag.anchor_gt, 0.0, scores[j], bag.stage};
    case TargetRule::kSelected:
      return {j, bag.instances[j].box, 1.0, scores[j], bag.stage};
    case TargetRule::kObjectAware:
      break;
  }
  return OaSelect(bag, j, cfg);
}

std::vector<BagFamily> ExtendBags(std::vector<Bag> bags, const ToyDetector& det, const Scene& scene,
                                  const OAMILConfig& cfg, Rng& rng) {
  std::vector<BagFamily> families;
  families.reserve(bags.size());
  for (Bag& bag : bags) {
    BagFamily family;
    bag.stage = 0;
    ScoreAndRegress(det, bag.instances, scene.bounds);
    family.stages.push_back(std::move(bag));
    if (!family.positive()) {
      families.push_back(std::move(family));
      continue;
    }
    family.selections.push_back(SelectTarget(family.stages.back(), cfg));
    for (int k = 1; k <= cfg.extensions; ++k) {
      const Bag& prev = family.stages.back();
      Bag next;
      next.label = 1;
      next.anchor_gt = prev.anchor_gt;
      next.class_id = prev.class_id;
      next.stage = k;
      const Box center = family.selections.back().merged;
      next.instances.push_back(MakeCandidate(scene, center));
      auto around = ProposeAround(scene, center, cfg.extension_proposals, cfg.extension_jitter,
                                  1.0, rng);
      std::move(around.begin(), around.end(), std::back_inserter(next.instances));
      ScoreAndRegress(det, next.instances, scene.bounds);
      family.selections.push_back(SelectTarget(next, cfg));
      family.stages.push_back(std::move(next));
    }
    family.target = *std::max_element(
        family.selections.begin(), family.selections.end(),
        [](const SelectionResult& a, const SelectionResult& b) { return a.score < b.score; });
    families.push_back(std::move(family));
  }
  return families;
}

double HingeLoss(int label, double best_score) {
  return std::max(0.0, 1.0 - label * (2.0 * best_score - 1.0));
}

double SelectorLoss(const BagFamily& family) {
  double loss = 0.0;
  for (const Bag& bag : family.stages) {
    if (bag.instances.empty()) continue;
    double best = -1.0;
    for (const Candidate& inst : bag.instances) {
      if (bag.positive()) {
        best = std::max(best, inst.selector_scores.at(static_cast<std::size_t>(bag.class_id)));
      } else {
        for (double s : inst.selector_scores) best = std::max(best, s);
      }
    }
    loss += HingeLoss(bag.label, best);
  }
  return loss;
}

std::vector<int> LabelInstances(const Bag& bag, const Box& b_star, double threshold) {
  std::vector<int> labels(bag.instances.size(), -1);
  if (!bag.positive()) return labels;
  for (std::size_t j = 0; j < bag.instances.size(); ++j) {
    if (Iou(bag.instances[j].box, b_star) >= threshold) labels[j] = 1;
  }
  return labels;
}

double BinaryLogLoss(int label, double g) { return -std::log(label * (g - 0.5) + 0.5); }

double ClassifierLoss(const Bag& bag, std::span<const int> labels) {
  if (labels.size() != bag.instances.size()) throw MilError("one label per instance required");
  double loss = 0.0;
  for (std::size_t j = 0; j < labels.size(); ++j) {
    const auto& g = bag.instances[j].classifier_scores;
    for (std::size_t c = 0; c < g.size(); ++c) {
      const bool positive = labels[j] > 0 && static_cast<int>(c) == bag.class_id;
      loss += BinaryLogLoss(positive ? 1 : -1, g[c]);
    }
  }
  return loss;
}

double GeneratorLoss(const Bag& bag, std::span<const int> labels, const Box& b_star, double beta) {
  if (!bag.positive()) return 0.0;
  if (labels.size() != bag.instances.size()) throw MilError("one label per instance required");
  double loss = 0.0;
  const auto c = static_cast<std::size_t>(bag.class_id);
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (labels[j] <= 0) continue;
    const Candidate& inst = bag.instances[j];
    const Deltas target = EncodeBox(b_star, inst.box);
    for (std::size_t k = 0; k < 4; ++k) loss += SmoothL1(inst.deltas.at(c)[k] - target[k], beta);
  }
  return loss;
}

LossBreakdown TotalLoss(std::span<const BagFamily> families, const OAMILConfig& cfg) {
  LossBreakdown out;
  for (const BagFamily& family : families) {
    if (cfg.selector_loss) out.selector += SelectorLoss(family);
    const Bag& bag = family.initial();
    if (family.positive()) {
      const Box& b_star = family.target->merged;
      const std::vector<int> labels = LabelInstances(bag, b_star, cfg.label_iou);
      out.classifier += ClassifierLoss(bag, labels);
      out.generator += GeneratorLoss(bag, labels, b_star, cfg.smooth_l1_beta);
    } else {
      out.classifier += ClassifierLoss(bag, std::vector<int>(bag.instances.size(), -1));
    }
  }
  out.total = cfg.lambda * out.selector + out.classifier + out.generator;
  return out;
}

void AppendToLossBundle(std::span<const BagFamily> families, const OAMILConfig& cfg,
                        LossBundle& bundle) {
  bundle.lambda = cfg.lambda;
  bundle.smooth_l1_beta = cfg.smooth_l1_beta;
  for (const BagFamily& family : families) {
    for (const Bag& bag : family.stages) {
      const bool initial = bag.stage == 0;
      if (!initial && !cfg.selector_loss) continue;
      std::vector<int> labels;
      if (initial) {
        labels = family.positive()
                     ? LabelInstances(bag, family.target->merged, cfg.label_iou)
                     : std::vector<int>(bag.instances.size(), -1);
      }
      LossBundle::SelectorBag selector_bag{bag.label, bag.class_id, {}};
      for (std::size_t j = 0; j < bag.instances.size(); ++j) {
        const Candidate& inst = bag.instances[j];
        const std::size_t idx = bundle.AddInstance(inst.features);
        selector_bag.instances.push_back(idx);
        if (!initial) continue;
        bundle.classifier_items.push_back({idx, labels[j] > 0 ? bag.class_id : -1});
        if (bag.positive() && labels[j] > 0) {
          bundle.regression_items.push_back(
              {idx, bag.class_id, EncodeBox(family.target->merged, inst.box)});
        }
      }
      if (cfg.selector_loss) bundle.selector_bags.push_back(std::move(selector_bag));
    }
  }
}

}  // namespace oamil
