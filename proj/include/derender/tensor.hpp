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

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "derender/common.hpp"
#include "derender/rng.hpp"

namespace derender::ad {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

// Dense row-major tensor of real scalars. Rank 0 is a scalar.
struct Tensor {
  Shape shape;
  std::vector<real> data;

  Tensor() = default;
  explicit Tensor(Shape s, real fill = 0)
      : shape(std::move(s)), data(static_cast<size_t>(shape_numel(shape)), fill) {}

  static Tensor scalar(real v) {
    Tensor t{Shape{}};
    t.data[0] = v;
    return t;
  }

  static Tensor from(Shape s, std::vector<real> values) {
    require(shape_numel(s) == static_cast<int64_t>(values.size()),
            "Tensor::from: shape ", shape_str(s), " needs ", shape_numel(s),
            " values, got ", values.size());
    Tensor t;
    t.shape = std::move(s);
    t.data = std::move(values);
    return t;
  }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  real& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
  real operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

  real& at(int64_t i, int64_t j) { return data[static_cast<size_t>(i * shape[1] + j)]; }
  real at(int64_t i, int64_t j) const { return data[static_cast<size_t>(i * shape[1] + j)]; }

  real& at(int64_t i, int64_t j, int64_t k) {
    return data[static_cast<size_t>((i * shape[1] + j) * shape[2] + k)];
  }
  real at(int64_t i, int64_t j, int64_t k) const {
    return data[static_cast<size_t>((i * shape[1] + j) * shape[2] + k)];
  }

  bool all_finite() const {
    for (real v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

inline Tensor zeros_like(const Tensor& t) { return Tensor(t.shape); }

inline Tensor rand_uniform(Shape s, Rng& rng, real lo = -1, real hi = 1) {
  Tensor t(std::move(s));
  for (real& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace derender::ad
