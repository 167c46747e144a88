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

#include "oamil/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "oamil/data.hpp"
#include "oamil/detector.hpp"
#include "oamil/noise_sim.hpp"
#include "oamil/random.hpp"
#include "oamil/trainer.hpp"

namespace oamil {

namespace {

constexpr TrainMode kModes[] = {TrainMode::kIsLossOnly, TrainMode::kOaIs, TrainMode::kOaIe};

GradCheckCase CheckOne(const GradCheckSpec& spec, std::uint64_t stream) {
  Rng rng(stream);
  GradCheckCase out;
  out.num_classes = rng.UniformInt(1, 3);
  out.num_scenes = rng.UniformInt(1, 3);
  out.shared = rng.Uniform01() < 0.5;

  LayoutSpec layout;
  layout.num_classes = out.num_classes;
  const AnnotatedDataset clean = GenerateScenes(out.num_scenes, layout, rng.NextU64());
  const AnnotatedDataset noisy = PerturbDataset(clean, {rng.Uniform(0.0, 0.4), rng.NextU64()});
  const std::vector<TrainingScene> scenes = PrepareScenes(noisy);
  std::vector<const TrainingScene*> batch;
  for (const TrainingScene& ts : scenes) batch.push_back(&ts);

  TrainConfig cfg;
  cfg.mode = kModes[rng.UniformIndex(std::size(kModes))];
  cfg.shared = out.shared;
  cfg.oamil.lambda = rng.Uniform(0.01, 1.0);
  cfg.oamil.extensions = rng.UniformInt(1, 2);
  cfg.oamil.extension_proposals = 6;
  cfg.proposals.positives_per_object = 8;
  cfg.proposals.negatives_per_scene = 8;

  ToyDetector det(out.num_classes, FeatureDim(out.num_classes), out.shared);
  std::vector<double> params(det.ParameterCount());
  for (double& p : params) p = rng.Uniform(-0.5, 0.5);
  det.SetParameters(params);

  const LossBundle bundle = AssembleBatch(det, batch, cfg, rng.NextU64());
  const LossBreakdown loss = EvaluateLoss(det, bundle);
  out.selector_loss = loss.selector;
  out.classifier_loss = loss.classifier;
  out.generator_loss = loss.generator;
  out.parameters = params.size();

  const std::vector<double> analytic = Gradients(det, bundle).Flatten();
  ToyDetector probe = det;
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::vector<double> p = params;
    const double h = spec.step * std::max(1.0, std::abs(params[i]));
    p[i] = params[i] + h;
    probe.SetParameters(p);
    const double up = EvaluateLoss(probe, bundle).total;
    p[i] = params[i] - h;
    probe.SetParameters(p);
    const double down = EvaluateLoss(probe, bundle).total;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), spec.floor});
    out.max_rel_error = std::max(out.max_rel_error, std::abs(analytic[i] - numeric) / denom);
  }
  return out;
}

}  // namespace

GradCheckReport RunGradientCheck(const GradCheckSpec& spec) {
  if (spec.configs < 1) throw std::invalid_argument("gradient check needs at least one configuration");
  if (!(spec.step > 0.0) || !(spec.floor > 0.0)) {
    throw std::invalid_argument("gradient check step and floor must be positive");
  }
  GradCheckReport report;
  for (int k = 0; k < spec.configs; ++k) {
    report.cases.push_back(CheckOne(spec, DeriveSeed(spec.seed, {static_cast<std::uint64_t>(k)})));
    report.max_rel_error = std::max(report.max_rel_error, report.cases.back().max_rel_error);
  }
  return report;
}

}  // namespace oamil
