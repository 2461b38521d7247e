// Copyright 2026 The Derender Authors
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

#pragma once

#include <random>
#include <sstream>
#include <string>

#include "derender/common.hpp"

namespace derender {

// Mixes a base seed with stream tags so independent consumers (per record,
// per subject, per step) get decorrelated, order-independent streams.
inline uint64_t mix_seed(uint64_t seed) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

template <typename... Tags>
uint64_t mix_seed(uint64_t seed, uint64_t tag, Tags... rest) {
  return mix_seed(mix_seed(seed) ^ tag, rest...);
}

// Deterministic random source. std::mt19937_64 is fully specified by the
// standard; the distributions below are hand-rolled so sequences do not
// depend on the standard library implementation.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(mix_seed(seed)) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1).
  real uniform() {
    return static_cast<real>(std::ldexp(static_cast<double>(next_u64() >> 11), -53));
  }

  real uniform(real lo, real hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  int uniform_int(int n) {
    require(n > 0, "uniform_int: n must be positive, got ", n);
    // Multiply-shift; bias is negligible for the small n used here.
    return static_cast<int>((static_cast<unsigned __int128>(next_u64()) *
                             static_cast<unsigned __int128>(n)) >>
                            64);
  }

  std::string state() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
  }

  void restore(const std::string& s) {
    std::istringstream is(s);
    is >> engine_;
    require(!is.fail(), "Rng::restore: malformed state string");
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace derender
