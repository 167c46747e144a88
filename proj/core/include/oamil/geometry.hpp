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

#include <stdexcept>
#include <string>

namespace oamil {

class GeometryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Center parameterization (cx, cy, w, h) of an axis-aligned box.
struct CenterBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  bool operator==(const CenterBox&) const = default;
};

/// Axis-aligned rectangle in continuous pixel coordinates.
///
/// Stored in corner form. The constructor rejects non-finite coordinates
/// and inverted extents, so every Box value satisfies x1 <= x2, y1 <= y2.
class Box {
 public:
  Box() = default;
  Box(double x1, double y1, double x2, double y2);

  static Box FromCenter(const CenterBox& c);
  static Box FromCenter(double cx, double cy, double w, double h) {
    return FromCenter(CenterBox{cx, cy, w, h});
  }
  /// COCO-style (x, y, w, h) with (x, y) the top-left corner.
  static Box FromXywh(double x, double y, double w, double h);

  double x1() const { return x1_; }
  double y1() const { return y1_; }
  double x2() const { return x2_; }
  double y2() const { return y2_; }

  double cx() const { return 0.5 * (x1_ + x2_); }
  double cy() const { return 0.5 * (y1_ + y2_); }
  double width() const { return x2_ - x1_; }
  double height() const { return y2_ - y1_; }
  double area() const { return width() * height(); }
  bool degenerate() const { return !(width() > 0.0 && height() > 0.0); }

  CenterBox center_form() const { return {cx(), cy(), width(), height()}; }

  bool operator==(const Box&) const = default;

 private:
  double x1_ = 0.0;
  double y1_ = 0.0;
  double x2_ = 0.0;
  double y2_ = 0.0;
};

CenterBox ToCenter(const Box& box);
Box ToCorner(const CenterBox& box);

double IntersectionArea(const Box& a, const Box& b);

/// Intersection over union. Zero-area boxes have IoU 0 with everything
/// except an identical zero-area box, for which the IoU is 1.
double Iou(const Box& a, const Box& b);

/// Clamps `box` into `bounds`, then grows any side shorter than `min_size`
/// to exactly `min_size` about its center, shifted back inside `bounds`.
/// Throws GeometryError when `bounds` itself is smaller than `min_size`.
Box Clip(const Box& box, const Box& bounds, double min_size);

std::string ToString(const Box& box);

}  // namespace oamil
