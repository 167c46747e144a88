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

#include "oamil/random.hpp"

#include <limits>
#include <stdexcept>

namespace oamil {

std::uint64_t MixSeed(std::uint64_t value) {
  value += 0x9e3779b97f4a7c15ULL;
  value = (value ^ (value >> 30)) * 0xbf58476d1ce4e5b9ULL;
  value = (value ^ (value >> 27)) * 0x94d049bb133111ebULL;
  return value ^ (value >> 31);
}

std::uint64_t DeriveSeed(std::uint64_t seed, std::initializer_list<std::uint64_t> stream) {
  std::uint64_t h = MixSeed(seed);
  for (std::uint64_t part : stream) h = MixSeed(MixSeed(h) ^ part);
  return h;
}

std::uint64_t Rng::UniformIndex(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("UniformIndex requires n > 0");
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t v = engine_();
  while (v >= limit) v = engine_();
  return v % n;
}

int Rng::UniformInt(int lo, int hi) {
  if (hi < lo) throw std::invalid_argument("UniformInt requires lo <= hi");
  const auto span = static_cast<std::uint64_t>(static_cast<std::int64_t>(hi) - lo) + 1;
  return lo + static_cast<int>(UniformIndex(span));
}

}  // namespace oamil
