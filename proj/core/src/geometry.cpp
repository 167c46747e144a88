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

#include "oamil/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace oamil {

Box::Box(double x1, double y1, double x2, double y2) : x1_(x1), y1_(y1), x2_(x2), y2_(y2) {
  if (!std::isfinite(x1) || !std::isfinite(y1) || !std::isfinite(x2) || !std::isfinite(y2)) {
    throw GeometryError("box has non-finite coordinates");
  }
  if (x1 > x2 || y1 > y2) {
    throw GeometryError("box corners are inverted: " + ToString(*this));
  }
}

Box Box::FromCenter(const CenterBox& c) {
  if (c.w < 0.0 || c.h < 0.0) throw GeometryError("box has negative size");
  return Box(c.cx - 0.5 * c.w, c.cy - 0.5 * c.h, c.cx + 0.5 * c.w, c.cy + 0.5 * c.h);
}

Box Box::FromXywh(double x, double y, double w, double h) {
  if (w < 0.0 || h < 0.0) throw GeometryError("box has negative size");
  return Box(x, y, x + w, y + h);
}

CenterBox ToCenter(const Box& box) { return box.center_form(); }

Box ToCorner(const CenterBox& box) { return Box::FromCenter(box); }

double IntersectionArea(const Box& a, const Box& b) {
  const double iw = std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1());
  const double ih = std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  return iw * ih;
}

double Iou(const Box& a, const Box& b) {
  if (a.degenerate() || b.degenerate()) return a == b ? 1.0 : 0.0;
  const double inter = IntersectionArea(a, b);
  if (inter <= 0.0) return 0.0;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

namespace {

// Clamp one axis [lo, hi] into [min_bound, max_bound] with length >= min_size.
// The length test tolerates one rounding step so that clipping is idempotent.
void ClipAxis(double& lo, double& hi, double min_bound, double max_bound, double min_size) {
  lo = std::clamp(lo, min_bound, max_bound);
  hi = std::clamp(hi, min_bound, max_bound);
  if (hi - lo >= min_size * (1.0 - 1e-12)) return;
  const double center = 0.5 * (lo + hi);
  if (center + 0.5 * min_size > max_bound) {
    hi = max_bound;
    lo = max_bound - min_size;
  } else if (center - 0.5 * min_size < min_bound) {
    lo = min_bound;
    hi = min_bound + min_size;
  } else {
    lo = center - 0.5 * min_size;
    hi = center + 0.5 * min_size;
  }
}

}  // namespace

Box Clip(const Box& box, const Box& bounds, double min_size) {
  if (!(min_size > 0.0)) throw GeometryError("min_size must be positive");
  if (bounds.width() < min_size || bounds.height() < min_size) {
    throw GeometryError("image bounds " + ToString(bounds) + " are smaller than min_size");
  }
  double x1 = box.x1(), x2 = box.x2(), y1 = box.y1(), y2 = box.y2();
  ClipAxis(x1, x2, bounds.x1(), bounds.x2(), min_size);
  ClipAxis(y1, y2, bounds.y1(), bounds.y2(), min_size);
  return Box(x1, y1, x2, y2);
}

std::string ToString(const Box& box) {
  std::ostringstream os;
  os << "(" << box.x1() << ", " << box.y1() << ", " << box.x2() << ", " << box.y2() << ")";
  return os.str();
}

}  // namespace oamil
