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

#include "oamil/data.hpp"
#include "oamil/geometry.hpp"
#include "oamil/random.hpp"

namespace oamil {

/// Relative shift of the center (dx, dy, in units of w and h) and relative
/// change of the size (dw, dh).
struct BoxDeltas {
  double dx = 0.0;
  double dy = 0.0;
  double dw = 0.0;
  double dh = 0.0;
};

struct NoiseSpec {
  double r = 0.0;  // half-width of U(-r, r), 0 <= r < 0.5
  std::uint64_t seed = 0;

  void Validate() const;
};

inline constexpr double kMaxNoiseLevel = 0.5;
inline constexpr double kNoisyBoxMinSize = 1.0;

/// cx += dx*w, cy += dy*h, w *= 1+dw, h *= 1+dh. Throws GeometryError if
/// dw <= -1 or dh <= -1.
Box PerturbBox(const Box& box, const BoxDeltas& deltas);

/// Draws (dx, dy, dw, dh) in that order from U(-r, r).
BoxDeltas DrawDeltas(Rng& rng, double r);

/// Perturbs every annotation in file order with a single Rng seeded from
/// spec.seed, then clips to the image with kNoisyBoxMinSize. Scene geometry
/// (the clean objects) is left untouched; provenance is set to noisy.
AnnotatedDataset PerturbDataset(const AnnotatedDataset& ds, const NoiseSpec& spec);

}  // namespace oamil
