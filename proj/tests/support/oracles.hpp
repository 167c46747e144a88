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
#include <optional>
#include <span>
#include <vector>

#include "oamil/eval.hpp"
#include "oamil/geometry.hpp"
#include "oamil/mil.hpp"
#include "oamil/random.hpp"

namespace oamil::testing {

/// IoU by counting sub-pixel centres on a grid of `subdiv` cells per unit.
/// Exact for boxes whose coordinates are multiples of 1/subdiv.
double PixelIou(const Box& a, const Box& b, int subdiv);

/// Single-class AP by brute force: every prefix of the ranked detections is
/// re-matched from scratch and the interpolated precision at each recall step
/// is the maximum precision over all longer prefixes. Arithmetic is exact
/// (integer fractions) until the final conversion.
std::optional<double> OracleClassAp(std::span<const Detection> detections,
                                    std::span<const GroundTruthBox> ground_truth, double iou_threshold);

/// Hinge loss of a bag written as an extremum over instances: the min of
/// per-instance hinges for a positive bag (hinge falls with the score), the
/// max over every instance and class for a negative one.
double OracleBagHinge(const Bag& bag);

/// Per-instance labels evaluated directly from the IoU to `b_star`.
std::vector<int> OracleLabels(const Bag& bag, const Box& b_star, double threshold);

/// Random box with corners on a 1/subdiv lattice inside [0, extent]^2 and
/// sides of at least 1/subdiv.
Box RandomLatticeBox(Rng& rng, int extent, int subdiv);

/// Candidate with the given per-class selector scores and no features.
Candidate ScoredCandidate(const Box& box, std::vector<double> scores);

}  // namespace oamil::testing
