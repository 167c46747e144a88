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

#include "oamil/noise_sim.hpp"

#include <cmath>
#include <string>
#include <unordered_map>

namespace oamil {

void NoiseSpec::Validate() const {
  if (!(r >= 0.0 && r < kMaxNoiseLevel)) {
    throw std::invalid_argument("noise level r must lie in [0, 0.5), got " + std::to_string(r));
  }
}

Box PerturbBox(const Box& box, const BoxDeltas& d) {
  if (!(d.dw > -1.0) || !(d.dh > -1.0)) {
    throw GeometryError("size deltas must exceed -1");
  }
  if (d.dx == 0.0 && d.dy == 0.0 && d.dw == 0.0 && d.dh == 0.0) return box;
  const CenterBox c = box.center_form();
  return Box::FromCenter(c.cx + d.dx * c.w, c.cy + d.dy * c.h, (1.0 + d.dw) * c.w,
                         (1.0 + d.dh) * c.h);
}

BoxDeltas DrawDeltas(Rng& rng, double r) {
  BoxDeltas d;
  d.dx = rng.Uniform(-r, r);
  d.dy = rng.Uniform(-r, r);
  d.dw = rng.Uniform(-r, r);
  d.dh = rng.Uniform(-r, r);
  return d;
}

AnnotatedDataset PerturbDataset(const AnnotatedDataset& ds, const NoiseSpec& spec) {
  spec.Validate();
  AnnotatedDataset out = ds;
  std::unordered_map<std::int64_t, Box> bounds;
  for (const ImageInfo& img : out.images) bounds.emplace(img.id, img.bounds());
  Rng rng(spec.seed);
  for (Annotation& a : out.annotations) {
    const BoxDeltas d = DrawDeltas(rng, spec.r);
    auto it = bounds.find(a.image_id);
    if (it == bounds.end()) {
      throw DataError("annotation " + std::to_string(a.id) + " references unknown image id " +
                      std::to_string(a.image_id));
    }
    const Box original = a.box();
    const Box noisy = Clip(PerturbBox(original, d), it->second, kNoisyBoxMinSize);
    // Leave the stored xywh untouched when nothing moved so r = 0 is exact.
    if (noisy != original) a.set_box(noisy);
  }
  out.provenance = {true, spec.r, spec.seed};
  return out;
}

}  // namespace oamil
