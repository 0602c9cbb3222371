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

// Counter-based random numbers. A draw is a pure function of
// (seed, stream, index), so the order in which cells are visited never
// changes the values.

#ifndef DPSC_RNG_H_
#define DPSC_RNG_H_

#include <cstdint>

namespace dpsc {

std::uint64_t SplitMix64(std::uint64_t x);

// Uniform in the open interval (0, 1).
double UniformAt(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

// Standard normal via Box-Muller on two counter draws.
double NormalAt(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

// Sequential view over one (seed, stream) pair.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream)
      : seed_(seed), stream_(stream) {}

  double Uniform() { return UniformAt(seed_, stream_, counter_++); }
  double Normal() { return NormalAt(seed_, stream_, counter_++); }
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
};

// Derives an independent seed for instance `i` of a batch.
std::uint64_t DeriveSeed(std::uint64_t master, std::uint64_t i);

}  // namespace dpsc

#endif  // DPSC_RNG_H_
