// Copyright 2026 The dpsc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dpsc/rng.h"

#include <cmath>
#include <numbers>

namespace dpsc {

std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double UniformAt(std::uint64_t seed, std::uint64_t stream,
                 std::uint64_t index) {
  std::uint64_t h = SplitMix64(seed);
  h = SplitMix64(h ^ stream);
  h = SplitMix64(h ^ index);
  // 53 random bits, shifted off zero.
  return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
}

double NormalAt(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  // Separate sub-stream so normals never reuse uniform draws.
  const std::uint64_t sub = SplitMix64(stream ^ 0xa0761d6478bd642fULL);
  const double u1 = UniformAt(seed, sub, 2 * index);
  const double u2 = UniformAt(seed, sub, 2 * index + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t DeriveSeed(std::uint64_t master, std::uint64_t i) {
  return SplitMix64(SplitMix64(master) + 0x632be59bd9b4e019ULL * (i + 1));
}

}  // namespace dpsc
