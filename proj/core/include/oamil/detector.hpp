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

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "oamil/data.hpp"
#include "oamil/geometry.hpp"
#include "oamil/random.hpp"

namespace oamil {

class DetectorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense row-major matrix of weights.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {values.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }

  bool operator==(const Matrix&) const = default;
};

// ---------------------------------------------------------------------------
// Box coding

/// Regression deltas (dx, dy, dw, dh) in the usual center-offset / log-size
/// encoding relative to an anchor.
using Deltas = std::array<double, 4>;

Deltas EncodeBox(const Box& target, const Box& anchor);
/// Inverse of EncodeBox. Size deltas are capped at kMaxLogScale.
Box DecodeBox(const Deltas& deltas, const Box& anchor);

inline constexpr double kMaxLogScale = 4.135166556742356;  // log(1000 / 16)

// ---------------------------------------------------------------------------
// Detector

/// Logistic squashing with the logit clamped to +-kLogitLimit, so scores are
/// strictly inside (0, 1) in double precision.
double Squash(double logit);
inline constexpr double kLogitLimit = 30.0;

/// Per-class linear selector f, classifier g and box regressor over scene
/// features. When `shared` is set the selector reads the classifier weights.
class ToyDetector {
 public:
  ToyDetector() = default;
  ToyDetector(int num_classes, std::size_t feature_dim, bool shared);

  int num_classes() const { return num_classes_; }
  std::size_t feature_dim() const { return feature_dim_; }
  bool shared() const { return shared_; }

  const Matrix& selector_weights() const { return shared_ ? classifier_ : selector_; }
  Matrix& selector_weights() { return shared_ ? classifier_ : selector_; }
  const Matrix& classifier_weights() const { return classifier_; }
  Matrix& classifier_weights() { return classifier_; }
  /// Row 4 * c + k holds delta component k of class c.
  const Matrix& generator_weights() const { return generator_; }
  Matrix& generator_weights() { return generator_; }

  double SelectorLogit(std::span<const double> x, int cls) const;
  double ClassifierLogit(std::span<const double> x, int cls) const;
  double SelectorScore(std::span<const double> x, int cls) const;
  double ClassifierScore(std::span<const double> x, int cls) const;
  Deltas PredictDeltas(std::span<const double> x, int cls) const;

  /// Flat parameter vector: selector (unless shared), classifier, generator.
  std::vector<double> Parameters() const;
  void SetParameters(std::span<const double> params);
  std::size_t ParameterCount() const;

  bool operator==(const ToyDetector&) const = default;

 private:
  int num_classes_ = 0;
  std::size_t feature_dim_ = 0;
  bool shared_ = true;
  Matrix selector_;
  Matrix classifier_;
  Matrix generator_;
};

/// Checkpoint text format: a header line `oamil-checkpoint 1`, then for each
/// array a line `<name> <ndims> <dim>...` followed by one line of row-major
/// values printed with 17 significant digits. Arrays: `shared` (1),
/// `selector` (C x F, only when not shared), `classifier` (C x F),
/// `generator` (4C x F).
void SaveCheckpoint(const ToyDetector& det, const std::filesystem::path& path);
ToyDetector LoadCheckpoint(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Candidates

struct Candidate {
  Box box;
  std::vector<double> features;
  std::vector<double> selector_scores;    // per class
  std::vector<double> classifier_scores;  // per class
  std::vector<Deltas> deltas;             // per class
  std::vector<Box> regressed;             // per class, decoded and clipped
};

Candidate MakeCandidate(const Scene& scene, const Box& box);

struct ProposalSpec {
  int positives_per_object = 32;  // K
  double jitter = 0.3;
  int negatives_per_scene = 32;
  double negative_max_iou = 0.1;
  double negative_min_rel_size = 0.1;  // relative to the image side
  double negative_max_rel_size = 0.4;
  int negative_attempts = 20;  // per requested negative
  double min_size = 1.0;

  void Validate() const;
};

struct ProposalResult {
  /// For each box in order: the box itself followed by K jittered copies;
  /// then the background candidates.
  std::vector<Candidate> candidates;
  std::size_t positives = 0;
  int missing_negatives = 0;
};

/// Jitters `count` copies of `anchor` with U(-jitter, jitter) shift/scale
/// draws, clipped to the scene.
std::vector<Candidate> ProposeAround(const Scene& scene, const Box& anchor, int count,
                                     double jitter, double min_size, Rng& rng);

ProposalResult Propose(const Scene& scene, std::span<const Box> noisy_gt,
                       const ProposalSpec& spec, std::uint64_t seed);

/// Fills scores, deltas and regressed boxes. Throws DetectorError on a
/// non-finite feature.
void ScoreAndRegress(const ToyDetector& det, std::span<Candidate> candidates, const Box& bounds,
                     double min_size = 1.0);

struct AnchorSpec {
  double stride = 16.0;
  std::vector<double> sizes{24.0, 36.0};
  std::vector<double> aspect_ratios{0.5, 1.0, 2.0};  // height / width
};

/// Sliding-window anchors clipped to `bounds`, row-major over centers.
std::vector<Box> AnchorGrid(const Box& bounds, const AnchorSpec& spec);

// ---------------------------------------------------------------------------
// Loss inputs and analytic gradients

/// Everything the loss needs once selection, labelling and regression
/// targets have been fixed for an iteration. Scores are recomputed from the
/// detector, so the loss and its gradient are exact functions of the weights
/// with selection treated as a constant.
struct LossBundle {
  struct SelectorBag {
    int label = 1;      // +1 positive, -1 negative
    int class_id = -1;  // object class; ignored for negative bags (max over all classes)
    std::vector<std::size_t> instances;
  };
  struct ClassifierItem {
    std::size_t instance = 0;
    int positive_class = -1;  // -1: background for every class
  };
  struct RegressionItem {
    std::size_t instance = 0;
    int class_id = 0;
    Deltas target{};
  };

  std::vector<std::vector<double>> features;
  std::vector<SelectorBag> selector_bags;
  std::vector<ClassifierItem> classifier_items;
  std::vector<RegressionItem> regression_items;
  double lambda = 0.1;
  double smooth_l1_beta = 1.0;

  std::size_t AddInstance(std::vector<double> x) {
    features.push_back(std::move(x));
    return features.size() - 1;
  }
};

struct LossBreakdown {
  double selector = 0.0;  // unweighted hinge sum
  double classifier = 0.0;
  double generator = 0.0;
  double total = 0.0;  // lambda * selector + classifier + generator
};

double SmoothL1(double diff, double beta);

LossBreakdown EvaluateLoss(const ToyDetector& det, const LossBundle& bundle);

struct DetectorGradient {
  Matrix selector;  // empty when the detector is shared
  Matrix classifier;
  Matrix generator;

  /// Same layout as ToyDetector::Parameters().
  std::vector<double> Flatten() const;
};

DetectorGradient Gradients(const ToyDetector& det, const LossBundle& bundle);

}  // namespace oamil
