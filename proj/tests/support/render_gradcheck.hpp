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

#include <string>
#include <vector>

#include "derender/raster.hpp"

// Finite-difference oracle for the rasterizer backward. The render is only
// piecewise smooth: when a perturbation flips a pixel's winning triangle,
// changes a band contributor, or flips a face across the lighting terminator,
// central differences straddle a kink and measure nothing useful. Those
// coordinates are detected by comparing the discrete render structure at
// x-delta and x+delta and skipped; everything else must match the analytic
// gradient.
namespace derender::testing {

struct RenderStructure {
  std::vector<int> winner;
  std::vector<int> band_elem;  // canonical contributor id per pixel, -1 if none
  std::vector<char> lit;

  bool operator==(const RenderStructure&) const = default;
};

inline RenderStructure structure_of(const raster::SavedState& st) {
  RenderStructure s;
  s.winner.reserve(st.hits.size());
  for (const auto& h : st.hits) s.winner.push_back(h.tri);
  for (const auto& b : st.band) {
    if (b.tri < 0) {
      s.band_elem.push_back(-1);
      continue;
    }
    // Canonical element: interior of an edge, or a corner. Two edges tying
    // at a shared corner contribute the identical closest point and
    // gradient, so they must compare equal here.
    int elem;
    if (b.t <= 0)
      elem = 3 + b.edge;
    else if (b.t >= 1)
      elem = 3 + (b.edge + 1) % 3;
    else
      elem = b.edge;
    s.band_elem.push_back(b.tri * 8 + elem);
  }
  for (const auto& t : st.tris) s.lit.push_back(t.lambert > 0);
  return s;
}

struct RenderGradCheck {
  real max_rel_err = 0;
  int checked = 0;
  int skipped = 0;
  std::string worst;
  bool ok(real tol) const { return checked > 0 && max_rel_err < tol; }
};

// Loss = sum(w_rgb * rgb) + sum(w_sil * silhouette).
inline RenderGradCheck render_gradient_check(
    const ad::Tensor& verts, std::span<const raster::PartSpec> parts,
    const geom::Camera& cam, const raster::LightRig& lights, const raster::Options& opt,
    const ad::Tensor& w_rgb, const ad::Tensor& w_sil, real delta = real(1e-4)) {
  const int width = cam.width, height = cam.height;
  auto eval = [&](const ad::Tensor& v, raster::SavedState* st) {
    auto out = raster::rasterize_core(v.data, parts, cam, lights, width, height, opt, st);
    real loss = 0;
    for (int64_t i = 0; i < out.rgb.numel(); ++i) loss += w_rgb[i] * out.rgb[i];
    for (int64_t i = 0; i < out.silhouette.numel(); ++i)
      loss += w_sil[i] * out.silhouette[i];
    return loss;
  };

  raster::SavedState st0;
  eval(verts, &st0);
  const RenderStructure base = structure_of(st0);
  ad::Tensor analytic(verts.shape);
  raster::rasterize_backward_core(st0, w_rgb.data.data(), w_sil.data.data(),
                                  analytic.data);

  RenderGradCheck res;
  for (int64_t j = 0; j < verts.numel(); ++j) {
    ad::Tensor plus = verts, minus = verts;
    plus[j] += delta;
    minus[j] -= delta;
    raster::SavedState stp, stm;
    const real fp = eval(plus, &stp);
    const real fm = eval(minus, &stm);
    if (!(structure_of(stp) == base) || !(structure_of(stm) == base)) {
      ++res.skipped;
      continue;
    }
    ++res.checked;
    const real fd = (fp - fm) / (2 * delta);
    const real a = analytic[j];
    const real denom = std::max({std::abs(a), std::abs(fd), real(1e-6)});
    const real rel = std::abs(a - fd) / denom;
    if (rel > res.max_rel_err) {
      res.max_rel_err = rel;
      res.worst = msg("coordinate ", j, " analytic=", a, " fd=", fd);
    }
  }
  return res;
}

}  // namespace derender::testing
