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
#include <random>

#include "oamil/data.hpp"
#include "oamil/geometry.hpp"
#include "oamil/noise_sim.hpp"
#include "oamil/random.hpp"

namespace oamil {
namespace {

void ExpectCenter(const Box& b, double cx, double cy, double w, double h) {
  EXPECT_NEAR(b.cx(), cx, 1e-12);
  EXPECT_NEAR(b.cy(), cy, 1e-12);
  EXPECT_NEAR(b.width(), w, 1e-12);
  EXPECT_NEAR(b.height(), h, 1e-12);
}

TEST(PerturbBox, ZeroDeltasAreIdentity) {
  const Box b(1.25, 2.5, 7.75, 9.0625);
  EXPECT_EQ(PerturbBox(b, {}), b);
}

TEST(PerturbBox, HandEvaluated) {
  const Box b = Box::FromCenter(10, 10, 4, 4);
  ExpectCenter(PerturbBox(b, {0.1, -0.1, 0.2, -0.2}), 10.4, 9.6, 4.8, 3.2);
  ExpectCenter(PerturbBox(b, {0.4, 0.4, 0.4, 0.4}), 11.6, 11.6, 5.6, 5.6);
}

TEST(PerturbBox, RejectsCollapsingScale) {
  EXPECT_THROW(PerturbBox(Box(0, 0, 4, 4), {0, 0, -1, 0}), std::invalid_argument);
}

TEST(NoiseSpec, Validation) {
  EXPECT_NO_THROW((NoiseSpec{0.0, 0}.Validate()));
  EXPECT_NO_THROW((NoiseSpec{0.49, 0}.Validate()));
  EXPECT_THROW((NoiseSpec{-0.1, 0}.Validate()), std::invalid_argument);
  EXPECT_THROW((NoiseSpec{0.5, 0}.Validate()), std::invalid_argument);
}

TEST(DrawDeltas, UniformMoments) {
  const double r = 0.3;
  const int n = 100000;
  Rng rng(21);
  double sum[4] = {}, sq[4] = {};
  for (int i = 0; i < n; ++i) {
    const BoxDeltas d = DrawDeltas(rng, r);
    const double v[4] = {d.dx, d.dy, d.dw, d.dh};
    for (int k = 0; k < 4; ++k) {
      ASSERT_GE(v[k], -r);
      ASSERT_LT(v[k], r);
      sum[k] += v[k];
      sq[k] += v[k] * v[k];
    }
  }
  const double var = r * r / 3.0;
  for (int k = 0; k < 4; ++k) {
    const double mean = sum[k] / n;
    EXPECT_LE(std::abs(mean), 3.0 * std::sqrt(var / n)) << "component " << k;
    EXPECT_NEAR(sq[k] / n - mean * mean, var, 0.05 * var) << "component " << k;
  }
}

AnnotatedDataset CenteredBoxes(int count, double side) {
  std::vector<Scene> scenes;
  for (int i = 0; i < count; ++i) {
    Scene s;
    s.bounds = Box(0, 0, 100, 100);
    s.background = 0.1;
    s.objects.push_back({Box::FromCenter(50, 50, side, side), 0, 0.9});
    scenes.push_back(s);
  }
  return DatasetFromScenes(scenes);
}

double MeanIou(const AnnotatedDataset& a, const AnnotatedDataset& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.annotations.size(); ++i) sum += Iou(a.annotations[i].box(), b.annotations[i].box());
  return sum / static_cast<double>(a.annotations.size());
}

TEST(PerturbDataset, MeanIouMatchesIndependentMonteCarlo) {
  const AnnotatedDataset clean = CenteredBoxes(10000, 10.0);
  const double simulated = MeanIou(clean, PerturbDataset(clean, {0.4, 3}));

  std::mt19937 gen(12345);
  std::uniform_real_distribution<double> u(-0.4, 0.4);
  const Box ref = Box::FromCenter(50, 50, 10, 10);
  double sum = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double cx = 50 + 10 * u(gen), cy = 50 + 10 * u(gen);
    const double w = 10 * (1 + u(gen)), h = 10 * (1 + u(gen));
    sum += Iou(ref, Box::FromCenter(cx, cy, w, h));
  }
  EXPECT_NEAR(simulated, sum / 10000, 0.01);
}

TEST(PerturbDataset, ExpectedIouFallsWithNoise) {
  const AnnotatedDataset clean = CenteredBoxes(10000, 10.0);
  double previous = 1.0;
  for (double r : {0.1, 0.2, 0.3, 0.4}) {
    const double m = MeanIou(clean, PerturbDataset(clean, {r, 9}));
    EXPECT_LT(m, previous) << "r=" << r;
    previous = m;
  }
}

TEST(PerturbDataset, ZeroNoiseIsIdentity) {
  const AnnotatedDataset clean = GenerateScenes(20, LayoutSpec{}, 4);
  const AnnotatedDataset out = PerturbDataset(clean, {0.0, 8});
  for (std::size_t i = 0; i < clean.annotations.size(); ++i) {
    EXPECT_EQ(out.annotations[i].bbox, clean.annotations[i].bbox);
  }
  EXPECT_TRUE(out.provenance.noisy);
}

TEST(PerturbDataset, DeterministicAndBookkeeping) {
  const AnnotatedDataset clean = GenerateScenes(20, LayoutSpec{}, 4);
  const AnnotatedDataset a = PerturbDataset(clean, {0.4, 8});
  const AnnotatedDataset b = PerturbDataset(clean, {0.4, 8});
  EXPECT_EQ(ToJson(a).dump(), ToJson(b).dump());
  EXPECT_NE(ToJson(a).dump(), ToJson(PerturbDataset(clean, {0.4, 9})).dump());
  ASSERT_EQ(a.annotations.size(), clean.annotations.size());
  for (std::size_t i = 0; i < a.annotations.size(); ++i) {
    EXPECT_EQ(a.annotations[i].id, clean.annotations[i].id);
    EXPECT_EQ(a.annotations[i].image_id, clean.annotations[i].image_id);
    EXPECT_NE(a.annotations[i].bbox, clean.annotations[i].bbox);
    const Box box = a.annotations[i].box();
    const ImageInfo* img = a.FindImage(a.annotations[i].image_id);
    EXPECT_GE(box.x1(), 0.0);
    EXPECT_LE(box.x2(), img->width);
    EXPECT_GE(box.width(), kNoisyBoxMinSize - 1e-9);
  }
  EXPECT_EQ(a.provenance, (Provenance{true, 0.4, 8}));
}

}  // namespace
}  // namespace oamil
