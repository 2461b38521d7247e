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

#include <memory>
#include <vector>

#include "derender/geometry_ops.hpp"
#include "derender/raster.hpp"

// Tape binding of the rasterizer: a custom op whose input is the flat
// [V,3] world-frame vertex tensor and whose packed output carries rgb and
// silhouette (depth is a non-differentiable side product).
namespace derender::raster {

struct SceneSpec {
  struct Part {
    std::vector<geom::Face> faces;
    int vertex_count = 0;
    geom::Vec3 albedo{kDefaultAlbedo, kDefaultAlbedo, kDefaultAlbedo};
  };
  std::vector<Part> parts;
  Camera camera;
  LightRig lights;
  Options opt;
};

struct RenderVars {
  ad::Var rgb;         // [3,H,W]
  ad::Var silhouette;  // [H,W]
  ad::Tensor depth;    // [H,W], not on the tape
  int degenerate_triangles = 0;
};

// Renders a [V,3] vertex Var; gradients reach every vertex coordinate.
inline RenderVars render_op(ad::Tape& tape, const ad::Var& verts_world,
                            const SceneSpec& scene) {
  const ad::Tensor& vv = verts_world.value();
  require(vv.rank() == 2 && vv.shape[1] == 3, "render_op: vertices must be [V,3], got ",
          ad::shape_str(vv.shape));
  int total = 0;
  for (const auto& p : scene.parts) total += p.vertex_count;
  require(total == vv.shape[0], "render_op: scene declares ", total, " vertices, got ",
          vv.shape[0]);

  const int w = scene.camera.width, h = scene.camera.height;
  const int64_t hw = int64_t(h) * w;

  auto saved = std::make_shared<SavedState>();
  auto depth_out = std::make_shared<ad::Tensor>();
  auto degenerate = std::make_shared<int>(0);

  std::vector<PartSpec> parts;
  int offset = 0;
  for (const auto& p : scene.parts) {
    PartSpec ps;
    ps.faces = p.faces;
    ps.vertex_offset = offset;
    ps.vertex_count = p.vertex_count;
    ps.albedo = p.albedo;
    parts.push_back(ps);
    offset += p.vertex_count;
  }

  RenderOutput fwd = rasterize_core(vv.data, parts, scene.camera, scene.lights, w, h,
                                    scene.opt, saved.get());
  *depth_out = std::move(fwd.depth);
  *degenerate = fwd.degenerate_triangles;

  // Pack rgb + silhouette into one differentiable [4,H,W] tensor.
  ad::Tensor packed(ad::Shape{4, h, w});
  std::copy(fwd.rgb.data.begin(), fwd.rgb.data.end(), packed.data.begin());
  std::copy(fwd.silhouette.data.begin(), fwd.silhouette.data.end(),
            packed.data.begin() + 3 * hw);

  ad::Var out = tape.record(
      "rasterize", {verts_world}, std::move(packed),
      [iv = verts_world.id(), saved, hw](ad::Tape& t, const ad::Tensor& g, int) {
        if (!t.needs_grad(iv)) return;
        const real* d_rgb = g.data.data();
        const real* d_sil = g.data.data() + 3 * hw;
        ad::Tensor gv(t.value(iv).shape);
        rasterize_backward_core(*saved, d_rgb, d_sil, gv.data);
        t.accumulate_grad(iv, gv);
      });

  RenderVars rv;
  rv.rgb = ad::slice_channels(out, 0, 3);
  rv.silhouette = ad::reshape(ad::slice_channels(out, 3, 1), ad::Shape{h, w});
  rv.depth = std::move(*depth_out);
  rv.degenerate_triangles = *degenerate;
  return rv;
}

// Assembles transformed part meshes and renders them. `rotated_verts` holds
// one [V,3] Var per part, already deformed and rotated in world orientation;
// `translations` holds one [3] world-frame Var per part (the override slot
// in cross-view rendering). Guards that every part center stays in front of
// the near plane.
inline RenderVars render_parts(ad::Tape& tape, std::span<const ad::Var> rotated_verts,
                               std::span<const ad::Var> translations,
                               const SceneSpec& scene) {
  require(rotated_verts.size() == scene.parts.size(), "render_parts: ",
          rotated_verts.size(), " vertex blocks for ", scene.parts.size(), " parts");
  require(translations.size() == rotated_verts.size(),
          "render_parts: translation count ", translations.size(),
          " does not match part count ", rotated_verts.size());
  std::vector<ad::Var> placed;
  placed.reserve(rotated_verts.size());
  for (size_t k = 0; k < rotated_verts.size(); ++k) {
    const ad::Tensor& tv = translations[k].value();
    require(tv.numel() == 3, "render_parts: translation ", k, " must have 3 values");
    const geom::Vec3 t_world{tv[0], tv[1], tv[2]};
    const geom::Vec3 t_cam = scene.camera.to_camera(t_world);
    require(t_cam.z > scene.camera.z_near, "render_parts: part ", k,
            " center at camera depth ", t_cam.z, " is behind the near plane");
    placed.push_back(ad::add_rowvec(rotated_verts[k], translations[k]));
  }
  return render_op(tape, ad::concat_rows(placed), scene);
}

}  // namespace derender::raster
