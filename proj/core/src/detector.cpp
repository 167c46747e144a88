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

#include "oamil/detector.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>

#include "oamil/noise_sim.hpp"

namespace oamil {

namespace {

double Dot(std::span<const double> w, std::span<const double> x) {
  return std::inner_product(w.begin(), w.end(), x.begin(), 0.0);
}

void Axpy(double a, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

}  // namespace

// ---------------------------------------------------------------------------
// Box coding

Deltas EncodeBox(const Box& target, const Box& anchor) {
  const double aw = anchor.width();
  const double ah = anchor.height();
  return {(target.cx() - anchor.cx()) / aw, (target.cy() - anchor.cy()) / ah,
          std::log(target.width() / aw), std::log(target.height() / ah)};
}

Box DecodeBox(const Deltas& d, const Box& anchor) {
  const double aw = anchor.width();
  const double ah = anchor.height();
  return Box::FromCenter(anchor.cx() + d[0] * aw, anchor.cy() + d[1] * ah,
                         aw * std::exp(std::min(d[2], kMaxLogScale)),
                         ah * std::exp(std::min(d[3], kMaxLogScale)));
}

// ---------------------------------------------------------------------------
// Detector

double Squash(double logit) {
  const double z = std::clamp(logit, -kLogitLimit, kLogitLimit);
  return 1.0 / (1.0 + std::exp(-z));
}

ToyDetector::ToyDetector(int num_classes, std::size_t feature_dim, bool shared)
    : num_classes_(num_classes), feature_dim_(feature_dim), shared_(shared) {
  if (num_classes < 1 || feature_dim < 1) throw DetectorError("empty detector shape");
  const auto c = static_cast<std::size_t>(num_classes);
  if (!shared) selector_ = Matrix(c, feature_dim);
  classifier_ = Matrix(c, feature_dim);
  generator_ = Matrix(4 * c, feature_dim);
}

double ToyDetector::SelectorLogit(std::span<const double> x, int cls) const {
  return Dot(selector_weights().row(static_cast<std::size_t>(cls)), x);
}

double ToyDetector::ClassifierLogit(std::span<const double> x, int cls) const {
  return Dot(classifier_.row(static_cast<std::size_t>(cls)), x);
}

double ToyDetector::SelectorScore(std::span<const double> x, int cls) const {
  return Squash(SelectorLogit(x, cls));
}

double ToyDetector::ClassifierScore(std::span<const double> x, int cls) const {
  return Squash(ClassifierLogit(x, cls));
}

Deltas ToyDetector::PredictDeltas(std::span<const double> x, int cls) const {
  Deltas d{};
  for (std::size_t k = 0; k < 4; ++k) {
    d[k] = Dot(generator_.row(4 * static_cast<std::size_t>(cls) + k), x);
  }
  return d;
}

std::vector<double> ToyDetector::Parameters() const {
  std::vector<double> p;
  p.reserve(ParameterCount());
  if (!shared_) p.insert(p.end(), selector_.values.begin(), selector_.values.end());
  p.insert(p.end(), classifier_.values.begin(), classifier_.values.end());
  p.insert(p.end(), generator_.values.begin(), generator_.values.end());
  return p;
}

void ToyDetector::SetParameters(std::span<const double> params) {
  if (params.size() != ParameterCount()) throw DetectorError("parameter count mismatch");
  auto it = params.begin();
  auto fill = [&](Matrix& m) {
    std::copy(it, it + static_cast<std::ptrdiff_t>(m.values.size()), m.values.begin());
    it += static_cast<std::ptrdiff_t>(m.values.size());
  };
  if (!shared_) fill(selector_);
  fill(classifier_);
  fill(generator_);
}

std::size_t ToyDetector::ParameterCount() const {
  return (shared_ ? 0 : selector_.values.size()) + classifier_.values.size() +
         generator_.values.size();
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

void WriteArray(std::ostream& out, const std::string& name, const std::vector<std::size_t>& shape,
                const std::vector<double>& values) {
  out << name << ' ' << shape.size();
  for (std::size_t d : shape) out << ' ' << d;
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", values[i]);
    out << (i ? " " : "") << buf;
  }
  out << '\n';
}

struct Array {
  std::vector<std::size_t> shape;
  std::vector<double> values;
};

}  // namespace

void SaveCheckpoint(const ToyDetector& det, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DetectorError(path.string() + ": cannot open checkpoint for writing");
  const auto c = static_cast<std::size_t>(det.num_classes());
  const std::size_t f = det.feature_dim();
  out << "oamil-checkpoint 1\n";
  WriteArray(out, "shared", {1}, {det.shared() ? 1.0 : 0.0});
  if (!det.shared()) WriteArray(out, "selector", {c, f}, det.selector_weights().values);
  WriteArray(out, "classifier", {c, f}, det.classifier_weights().values);
  WriteArray(out, "generator", {4 * c, f}, det.generator_weights().values);
  if (!out) throw DetectorError(path.string() + ": checkpoint write failed");
}

ToyDetector LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DetectorError(path.string() + ": cannot open checkpoint");
  auto fail = [&](const std::string& what) -> DetectorError {
    return DetectorError(path.string() + ": " + what);
  };
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "oamil-checkpoint" || version != 1) {
    throw fail("not an oamil checkpoint (version 1)");
  }
  std::map<std::string, Array> arrays;
  std::string name;
  while (in >> name) {
    std::size_t ndims = 0;
    if (!(in >> ndims) || ndims == 0 || ndims > 4) throw fail("bad shape for '" + name + "'");
    Array a;
    std::size_t count = 1;
    for (std::size_t i = 0; i < ndims; ++i) {
      std::size_t d = 0;
      if (!(in >> d)) throw fail("bad shape for '" + name + "'");
      a.shape.push_back(d);
      count *= d;
    }
    a.values.resize(count);
    for (double& v : a.values) {
      std::string tok;
      if (!(in >> tok)) throw fail("truncated values for '" + name + "'");
      try {
        std::size_t used = 0;
        v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw fail("bad number '" + tok + "' in '" + name + "'");
      }
      if (!std::isfinite(v)) throw fail("non-finite weight in '" + name + "'");
    }
    if (!arrays.emplace(name, std::move(a)).second) throw fail("duplicate array '" + name + "'");
  }
  auto get = [&](const std::string& key) -> const Array& {
    auto it = arrays.find(key);
    if (it == arrays.end()) throw fail("missing array '" + key + "'");
    return it->second;
  };
  const bool shared = get("shared").values.at(0) != 0.0;
  const Array& cls = get("classifier");
  if (cls.shape.size() != 2) throw fail("classifier must be two-dimensional");
  const std::size_t c = cls.shape[0];
  const std::size_t f = cls.shape[1];
  ToyDetector det(static_cast<int>(c), f, shared);
  auto load = [&](const std::string& key, Matrix& m) {
    const Array& a = get(key);
    if (a.shape != std::vector<std::size_t>{m.rows, m.cols}) throw fail("shape mismatch in '" + key + "'");
    m.values = a.values;
  };
  if (!shared) load("selector", det.selector_weights());
  load("classifier", det.classifier_weights());
  load("generator", det.generator_weights());
  return det;
}

// ---------------------------------------------------------------------------
// Candidates

Candidate MakeCandidate(const Scene& scene, const Box& box) {
  Candidate c;
  c.box = box;
  c.features = SceneFeatures(scene, box);
  return c;
}

void ProposalSpec::Validate() const {
  if (positives_per_object < 0 || negatives_per_scene < 0) {
    throw DetectorError("proposal counts must be non-negative");
  }
  if (!(jitter >= 0.0 && jitter < 1.0)) throw DetectorError("jitter must lie in [0, 1)");
  if (!(negative_min_rel_size > 0.0 && negative_max_rel_size >= negative_min_rel_size &&
        negative_max_rel_size <= 1.0)) {
    throw DetectorError("bad negative size range");
  }
  if (!(min_size > 0.0)) throw DetectorError("min_size must be positive");
}

std::vector<Candidate> ProposeAround(const Scene& scene, const Box& anchor, int count,
                                     double jitter, double min_size, Rng& rng) {
  std::vector<Candidate> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int k = 0; k < count; ++k) {
    const BoxDeltas d = DrawDeltas(rng, jitter);
    out.push_back(MakeCandidate(scene, Clip(PerturbBox(anchor, d), scene.bounds, min_size)));
  }
  return out;
}

ProposalResult Propose(const Scene& scene, std::span<const Box> noisy_gt,
                       const ProposalSpec& spec, std::uint64_t seed) {
  spec.Validate();
  Rng rng(seed);
  ProposalResult result;
  for (const Box& gt : noisy_gt) {
    result.candidates.push_back(MakeCandidate(scene, gt));
    auto jittered = ProposeAround(scene, gt, spec.positives_per_object, spec.jitter,
                                  spec.min_size, rng);
    std::move(jittered.begin(), jittered.end(), std::back_inserter(result.candidates));
  }
  result.positives = result.candidates.size();

  const double bw = scene.bounds.width();
  const double bh = scene.bounds.height();
  int placed = 0;
  const int budget = spec.negatives_per_scene * spec.negative_attempts;
  for (int attempt = 0; attempt < budget && placed < spec.negatives_per_scene; ++attempt) {
    const double w = bw * rng.Uniform(spec.negative_min_rel_size, spec.negative_max_rel_size);
    const double h = bh * rng.Uniform(spec.negative_min_rel_size, spec.negative_max_rel_size);
    const double x = scene.bounds.x1() + rng.Uniform(0.0, bw - w);
    const double y = scene.bounds.y1() + rng.Uniform(0.0, bh - h);
    const Box box = Clip(Box(x, y, x + w, y + h), scene.bounds, spec.min_size);
    const bool background = std::all_of(noisy_gt.begin(), noisy_gt.end(), [&](const Box& gt) {
      return Iou(box, gt) < spec.negative_max_iou;
    });
    if (!background) continue;
    result.candidates.push_back(MakeCandidate(scene, box));
    ++placed;
  }
  result.missing_negatives = spec.negatives_per_scene - placed;
  return result;
}

void ScoreAndRegress(const ToyDetector& det, std::span<Candidate> candidates, const Box& bounds,
                     double min_size) {
  const auto classes = static_cast<std::size_t>(det.num_classes());
  for (Candidate& c : candidates) {
    if (c.features.size() != det.feature_dim()) throw DetectorError("feature size mismatch");
    for (double v : c.features) {
      if (!std::isfinite(v)) throw DetectorError("non-finite feature for candidate " + ToString(c.box));
    }
    c.selector_scores.resize(classes);
    c.classifier_scores.resize(classes);
    c.deltas.resize(classes);
    c.regressed.resize(classes);
    for (std::size_t k = 0; k < classes; ++k) {
      const int cls = static_cast<int>(k);
      c.classifier_scores[k] = det.ClassifierScore(c.features, cls);
      c.selector_scores[k] = det.shared() ? c.classifier_scores[k] : det.SelectorScore(c.features, cls);
      c.deltas[k] = det.PredictDeltas(c.features, cls);
      c.regressed[k] = Clip(DecodeBox(c.deltas[k], c.box), bounds, min_size);
    }
  }
}

std::vector<Box> AnchorGrid(const Box& bounds, const AnchorSpec& spec) {
  if (!(spec.stride > 0.0)) throw DetectorError("anchor stride must be positive");
  std::vector<Box> anchors;
  for (double cy = bounds.y1() + 0.5 * spec.stride; cy < bounds.y2(); cy += spec.stride) {
    for (double cx = bounds.x1() + 0.5 * spec.stride; cx < bounds.x2(); cx += spec.stride) {
      for (double size : spec.sizes) {
        for (double ratio : spec.aspect_ratios) {
          const double w = size / std::sqrt(ratio);
          const double h = size * std::sqrt(ratio);
          anchors.push_back(Clip(Box::FromCenter(cx, cy, w, h), bounds, 1.0));
        }
      }
    }
  }
  return anchors;
}

// ---------------------------------------------------------------------------
// Losses and gradients

double SmoothL1(double diff, double beta) {
  const double a = std::abs(diff);
  return a < beta ? 0.5 * diff * diff / beta : a - 0.5 * beta;
}

namespace {

double SmoothL1Derivative(double diff, double beta) {
  const double a = std::abs(diff);
  if (a < beta) return diff / beta;
  return diff > 0.0 ? 1.0 : -1.0;
}

// Clamped logits have zero derivative outside the clamp range.
double ClampSlope(double logit) { return std::abs(logit) < kLogitLimit ? 1.0 : 0.0; }

struct HingeArgmax {
  std::size_t instance = 0;
  int cls = 0;
  double score = 0.0;
};

HingeArgmax SelectorMax(const ToyDetector& det, const LossBundle& bundle,
                        const LossBundle::SelectorBag& bag) {
  HingeArgmax best{0, 0, -1.0};
  const int first = bag.label > 0 ? bag.class_id : 0;
  const int last = bag.label > 0 ? bag.class_id : det.num_classes() - 1;
  for (std::size_t idx : bag.instances) {
    for (int c = first; c <= last; ++c) {
      const double s = det.SelectorScore(bundle.features[idx], c);
      if (s > best.score) best = {idx, c, s};
    }
  }
  return best;
}

}  // namespace

LossBreakdown EvaluateLoss(const ToyDetector& det, const LossBundle& bundle) {
  LossBreakdown out;
  for (const auto& bag : bundle.selector_bags) {
    if (bag.instances.empty()) continue;
    const HingeArgmax m = SelectorMax(det, bundle, bag);
    out.selector += std::max(0.0, 1.0 - bag.label * (2.0 * m.score - 1.0));
  }
  for (const auto& item : bundle.classifier_items) {
    const auto& x = bundle.features[item.instance];
    for (int c = 0; c < det.num_classes(); ++c) {
      const double g = det.ClassifierScore(x, c);
      out.classifier -= c == item.positive_class ? std::log(g) : std::log1p(-g);
    }
  }
  for (const auto& item : bundle.regression_items) {
    const Deltas pred = det.PredictDeltas(bundle.features[item.instance], item.class_id);
    for (std::size_t k = 0; k < 4; ++k) {
      out.generator += SmoothL1(pred[k] - item.target[k], bundle.smooth_l1_beta);
    }
  }
  out.total = bundle.lambda * out.selector + out.classifier + out.generator;
  return out;
}

std::vector<double> DetectorGradient::Flatten() const {
  std::vector<double> p;
  p.insert(p.end(), selector.values.begin(), selector.values.end());
  p.insert(p.end(), classifier.values.begin(), classifier.values.end());
  p.insert(p.end(), generator.values.begin(), generator.values.end());
  return p;
}

DetectorGradient Gradients(const ToyDetector& det, const LossBundle& bundle) {
  DetectorGradient grad;
  grad.classifier = Matrix(det.classifier_weights().rows, det.classifier_weights().cols);
  grad.generator = Matrix(det.generator_weights().rows, det.generator_weights().cols);
  if (!det.shared()) grad.selector = Matrix(grad.classifier.rows, grad.classifier.cols);
  Matrix& selector_grad = det.shared() ? grad.classifier : grad.selector;

  for (const auto& bag : bundle.selector_bags) {
    if (bag.instances.empty()) continue;
    const HingeArgmax m = SelectorMax(det, bundle, bag);
    const double margin = 1.0 - bag.label * (2.0 * m.score - 1.0);
    if (margin <= 0.0) continue;
    const auto& x = bundle.features[m.instance];
    const double slope = ClampSlope(det.SelectorLogit(x, m.cls));
    // d/dz of -y (2 s(z) - 1) = -2 y s (1 - s)
    const double dz = -2.0 * bag.label * m.score * (1.0 - m.score) * slope;
    Axpy(bundle.lambda * dz, x, selector_grad.row(static_cast<std::size_t>(m.cls)));
  }

  for (const auto& item : bundle.classifier_items) {
    const auto& x = bundle.features[item.instance];
    for (int c = 0; c < det.num_classes(); ++c) {
      const double z = det.ClassifierLogit(x, c);
      const double g = Squash(z);
      const double dz = (c == item.positive_class ? g - 1.0 : g) * ClampSlope(z);
      Axpy(dz, x, grad.classifier.row(static_cast<std::size_t>(c)));
    }
  }

  for (const auto& item : bundle.regression_items) {
    const auto& x = bundle.features[item.instance];
    const Deltas pred = det.PredictDeltas(x, item.class_id);
    for (std::size_t k = 0; k < 4; ++k) {
      const double dd = SmoothL1Derivative(pred[k] - item.target[k], bundle.smooth_l1_beta);
      Axpy(dd, x, grad.generator.row(4 * static_cast<std::size_t>(item.class_id) + k));
    }
  }
  return grad;
}

}  // namespace oamil
