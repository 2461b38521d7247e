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

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "derender/geometry.hpp"
#include "derender/tensor.hpp"

// Software rasterizer with an exact hand-derived backward pass.
//
// Forward: z-buffered perspective rasterization with flat (per-face) shading
// under one directional light along the camera view axis plus an ambient
// term. Pixels whose center is covered by a triangle get full silhouette;
// uncovered pixels within sigma_edge of a projected triangle edge get a soft
// silhouette that ramps linearly to zero with 2D distance to the edge.
//
// Backward: gradients w.r.t. world vertex positions flow through
//   (1) the shaded color's dependence on the face normal (camera-frame
//       vertex positions), and
//   (2) the soft band's dependence on the projected edge endpoints, chained
//       through the pinhole projection.
// Interior coverage is saturated at 1, so pixel colors respond to vertex
// motion only through the shading term, which is what central finite
// differences measure for topology-stable perturbations.
namespace derender::raster {

using geom::Camera;
using geom::Face;
using geom::Mat3;
using geom::TriangleMesh;
using geom::Vec3;

struct LightRig {
  real k_dir = real(0.6);  // directional intensity along the camera view axis
  real k_amb = real(0.4);

  void validate() const {
    require(k_dir >= 0 && k_dir <= 1 && k_amb >= 0 && k_amb <= 1,
            "LightRig: intensities must be in [0,1], got k_dir=", k_dir,
            " k_amb=", k_amb);
    require(k_dir + k_amb <= 1 + real(1e-12), "LightRig: k_dir + k_amb = ",
            k_dir + k_amb, " exceeds 1 (would clip)");
  }
};

struct Options {
  real sigma_edge = real(1.5);  // soft silhouette band width in pixels
  Vec3 background{0, 0, 0};
  real min_area = real(1e-12);  // screen-space degenerate-triangle cutoff
};

inline constexpr real kDefaultAlbedo = real(0.75);
inline constexpr real kBackgroundDepth = std::numeric_limits<real>::infinity();

// Static description of a part inside the flat vertex array.
struct PartSpec {
  std::span<const Face> faces;
  int vertex_offset = 0;
  int vertex_count = 0;
  Vec3 albedo{kDefaultAlbedo, kDefaultAlbedo, kDefaultAlbedo};
};

struct RenderOutput {
  ad::Tensor rgb;         // [3,H,W], in [0,1]
  ad::Tensor silhouette;  // [H,W], in [0,1]
  ad::Tensor depth;       // [H,W], camera-frame depth; +inf where silhouette==0
  int degenerate_triangles = 0;
};

// Everything backward needs from one forward pass. One forward's state
// serves exactly one backward.
struct SavedState {
  struct EffVert {
    Vec3 cam;      // camera-frame position
    real u, v;     // screen position (pixels)
    real invz;
    int pa, pb;    // source vertex indices (flat); pa == pb means unclipped
    real t;        // near-plane lerp parameter from pa to pb when clipped
  };
  struct EffTri {
    EffVert v[3];
    int part;
    Vec3 unit_normal;  // camera frame
    real inv_raw_norm; // 1 / |e1 x e2|
    real lambert;      // max(0, -n.z)
    real shade;        // k_amb + k_dir * lambert
  };
  struct PixelHit {
    int tri = -1;
    real b0 = 0, b1 = 0, b2 = 0;
    real z = 0;
  };
  struct BandHit {
    int tri = -1;
    int edge = 0;
    real t = 0;
    real dist = 0;
    real coverage = 0;
  };

  bool valid = false;
  int width = 0, height = 0;
  int vert_total = 0;
  real z_near = 0;
  Mat3 world_to_cam;
  real fu = 0, fv = 0, cu = 0, cv = 0;
  LightRig lights;
  Options opt;
  std::vector<Vec3> albedos;    // per part
  std::vector<Vec3> cam_verts;  // all source vertices, camera frame
  std::vector<EffTri> tris;
  std::vector<PixelHit> hits;
  std::vector<BandHit> band;
};

namespace detail {

inline real point_segment_distance(real qx, real qy, real ax, real ay, real bx, real by,
                                   real* t_out) {
  const real dx = bx - ax, dy = by - ay;
  const real len2 = dx * dx + dy * dy;
  real t = 0;
  if (len2 > 0) t = std::clamp(((qx - ax) * dx + (qy - ay) * dy) / len2, real(0), real(1));
  const real fx = ax + t * dx, fy = ay + t * dy;
  *t_out = t;
  return std::sqrt((qx - fx) * (qx - fx) + (qy - fy) * (qy - fy));
}

}  // namespace detail

// Rasterizes the given parts of one flat world-frame vertex array. Writes
// rgb/silhouette/depth and, when `state` is non-null, the forward state for
// a later backward pass.
inline RenderOutput rasterize_core(std::span<const real> verts_world,
                                   std::span<const PartSpec> parts, const Camera& cam_in,
                                   const LightRig& lights, int width, int height,
                                   const Options& opt = {}, SavedState* state = nullptr) {
  require(width > 0 && height > 0, "rasterize: zero-area image ", width, "x", height);
  Camera cam = cam_in;
  cam.width = width;
  cam.height = height;
  cam.validate();
  lights.validate();
  require(verts_world.size() % 3 == 0, "rasterize: vertex array size ",
          verts_world.size(), " is not a multiple of 3");
  const int vert_total = static_cast<int>(verts_world.size() / 3);
  for (size_t p = 0; p < parts.size(); ++p) {
    require(parts[p].vertex_count > 0 && !parts[p].faces.empty(),
            "rasterize: part ", p, " is empty");
    require(parts[p].vertex_offset >= 0 &&
                parts[p].vertex_offset + parts[p].vertex_count <= vert_total,
            "rasterize: part ", p, " vertex range out of bounds");
  }

  RenderOutput out;
  out.rgb = ad::Tensor(ad::Shape{3, height, width});
  out.silhouette = ad::Tensor(ad::Shape{height, width});
  out.depth = ad::Tensor(ad::Shape{height, width}, kBackgroundDepth);
  const int64_t hw = int64_t(height) * width;
  for (int c = 0; c < 3; ++c)
    for (int64_t i = 0; i < hw; ++i) out.rgb[c * hw + i] = opt.background[c];

  SavedState local;
  SavedState& st = state ? *state : local;
  st = SavedState{};
  st.valid = true;
  st.width = width;
  st.height = height;
  st.vert_total = vert_total;
  st.world_to_cam = cam.world_to_cam_rot();
  st.fu = cam.focal * real(width) / 2;
  st.fv = cam.focal * real(height) / 2;
  st.cu = real(width) / 2;
  st.cv = real(height) / 2;
  st.lights = lights;
  st.opt = opt;
  for (const PartSpec& p : parts) st.albedos.push_back(p.albedo);

  // World -> camera.
  const Vec3 cam_pos = cam.position();
  st.cam_verts.resize(static_cast<size_t>(vert_total));
  std::vector<Vec3>& vc = st.cam_verts;
  for (int i = 0; i < vert_total; ++i) {
    const Vec3 w{verts_world[size_t(i) * 3], verts_world[size_t(i) * 3 + 1],
                 verts_world[size_t(i) * 3 + 2]};
    vc[size_t(i)] = st.world_to_cam * (w - cam_pos);
  }
  st.z_near = cam.z_near;

  // Near-plane clipping into effective triangles.
  const real znear = cam.z_near;
  auto project_vert = [&](const SavedState::EffVert& in) {
    SavedState::EffVert v = in;
    v.invz = real(1) / v.cam.z;
    v.u = st.cu + st.fu * v.cam.x * v.invz;
    v.v = st.cv + st.fv * v.cam.y * v.invz;
    return v;
  };
  auto lerp_vert = [&](int ia, int ib) {
    const Vec3& a = vc[size_t(ia)];
    const Vec3& b = vc[size_t(ib)];
    const real t = (znear - a.z) / (b.z - a.z);
    SavedState::EffVert v;
    v.cam = a + (b - a) * t;
    v.cam.z = znear;  // exact by construction; avoid rounding drift
    v.pa = ia;
    v.pb = ib;
    v.t = t;
    return project_vert(v);
  };
  auto orig_vert = [&](int i) {
    SavedState::EffVert v;
    v.cam = vc[size_t(i)];
    v.pa = v.pb = i;
    v.t = 0;
    return project_vert(v);
  };

  for (size_t p = 0; p < parts.size(); ++p) {
    const PartSpec& part = parts[p];
    for (const Face& f : part.faces) {
      int idx[3];
      for (int k = 0; k < 3; ++k) {
        idx[k] = part.vertex_offset + f[k];
        require(f[k] >= 0 && f[k] < part.vertex_count, "rasterize: part ", p,
                " face index ", f[k], " out of range");
      }
      bool in[3];
      int n_in = 0;
      for (int k = 0; k < 3; ++k) {
        in[k] = vc[size_t(idx[k])].z > znear;
        n_in += in[k];
      }
      if (n_in == 0) continue;

      SavedState::EffVert ev[4];
      int n_ev = 0;
      if (n_in == 3) {
        for (int k = 0; k < 3; ++k) ev[n_ev++] = orig_vert(idx[k]);
      } else {
        // Walk the triangle boundary, emitting kept vertices and near-plane
        // intersections; preserves winding.
        for (int k = 0; k < 3; ++k) {
          const int a = idx[k], b = idx[(k + 1) % 3];
          if (in[k]) ev[n_ev++] = orig_vert(a);
          if (in[k] != in[(k + 1) % 3]) ev[n_ev++] = lerp_vert(a, b);
        }
      }

      const int tri_count = n_ev - 2;
      for (int k = 0; k < tri_count; ++k) {
        SavedState::EffTri tri;
        tri.v[0] = ev[0];
        tri.v[1] = ev[k + 1];
        tri.v[2] = ev[k + 2];
        tri.part = static_cast<int>(p);
        const real area2 = (tri.v[1].u - tri.v[0].u) * (tri.v[2].v - tri.v[0].v) -
                           (tri.v[1].v - tri.v[0].v) * (tri.v[2].u - tri.v[0].u);
        const Vec3 e1 = tri.v[1].cam - tri.v[0].cam;
        const Vec3 e2 = tri.v[2].cam - tri.v[0].cam;
        const Vec3 raw_n = cross(e1, e2);
        const real raw = norm(raw_n);
        if (std::abs(area2) < opt.min_area || raw < opt.min_area) {
          ++out.degenerate_triangles;
          continue;
        }
        tri.inv_raw_norm = real(1) / raw;
        tri.unit_normal = raw_n * tri.inv_raw_norm;
        tri.lambert = std::max<real>(0, -tri.unit_normal.z);
        tri.shade = lights.k_amb + lights.k_dir * tri.lambert;
        st.tris.push_back(tri);
      }
    }
  }

  st.hits.assign(static_cast<size_t>(hw), {});
  st.band.assign(static_cast<size_t>(hw), {});

  // Coverage pass: z-buffer on pixel centers. Ties keep the earlier
  // (lower-index) triangle, which means the lower part index.
  for (size_t ti = 0; ti < st.tris.size(); ++ti) {
    const auto& tr = st.tris[ti];
    const real u0 = tr.v[0].u, v0 = tr.v[0].v, u1 = tr.v[1].u, v1 = tr.v[1].v,
               u2 = tr.v[2].u, v2 = tr.v[2].v;
    const real area2 = (u1 - u0) * (v2 - v0) - (v1 - v0) * (u2 - u0);
    const int x_lo = std::max(0, (int)std::floor(std::min({u0, u1, u2}) - real(0.5)));
    const int x_hi = std::min(width - 1, (int)std::ceil(std::max({u0, u1, u2})));
    const int y_lo = std::max(0, (int)std::floor(std::min({v0, v1, v2}) - real(0.5)));
    const int y_hi = std::min(height - 1, (int)std::ceil(std::max({v0, v1, v2})));
    const real inv_area = real(1) / area2;
    for (int py = y_lo; py <= y_hi; ++py) {
      const real qy = py + real(0.5);
      for (int px = x_lo; px <= x_hi; ++px) {
        const real qx = px + real(0.5);
        const real b0 = ((u2 - u1) * (qy - v1) - (v2 - v1) * (qx - u1)) * inv_area;
        if (b0 < 0) continue;
        const real b1 = ((u0 - u2) * (qy - v2) - (v0 - v2) * (qx - u2)) * inv_area;
        if (b1 < 0) continue;
        const real b2 = 1 - b0 - b1;
        if (b2 < 0) continue;
        const real invz = b0 * tr.v[0].invz + b1 * tr.v[1].invz + b2 * tr.v[2].invz;
        const real z = real(1) / invz;
        auto& hit = st.hits[size_t(py) * width + px];
        if (hit.tri < 0 || z < hit.z) {
          hit.tri = static_cast<int>(ti);
          hit.b0 = b0;
          hit.b1 = b1;
          hit.b2 = b2;
          hit.z = z;
        }
      }
    }
  }

  // Soft band pass for uncovered pixels near projected edges.
  const real sigma = opt.sigma_edge;
  if (sigma > 0) {
    const int pad = static_cast<int>(std::ceil(sigma)) + 1;
    for (size_t ti = 0; ti < st.tris.size(); ++ti) {
      const auto& tr = st.tris[ti];
      const real umin = std::min({tr.v[0].u, tr.v[1].u, tr.v[2].u});
      const real umax = std::max({tr.v[0].u, tr.v[1].u, tr.v[2].u});
      const real vmin = std::min({tr.v[0].v, tr.v[1].v, tr.v[2].v});
      const real vmax = std::max({tr.v[0].v, tr.v[1].v, tr.v[2].v});
      const int x_lo = std::max(0, (int)std::floor(umin) - pad);
      const int x_hi = std::min(width - 1, (int)std::ceil(umax) + pad);
      const int y_lo = std::max(0, (int)std::floor(vmin) - pad);
      const int y_hi = std::min(height - 1, (int)std::ceil(vmax) + pad);
      for (int py = y_lo; py <= y_hi; ++py) {
        for (int px = x_lo; px <= x_hi; ++px) {
          auto& hit = st.hits[size_t(py) * width + px];
          if (hit.tri >= 0) continue;
          const real qx = px + real(0.5), qy = py + real(0.5);
          real best_d = std::numeric_limits<real>::infinity();
          real best_t = 0;
          int best_e = 0;
          for (int e = 0; e < 3; ++e) {
            const auto& a = tr.v[e];
            const auto& b = tr.v[(e + 1) % 3];
            real t;
            const real d = detail::point_segment_distance(qx, qy, a.u, a.v, b.u, b.v, &t);
            if (d < best_d) {
              best_d = d;
              best_t = t;
              best_e = e;
            }
          }
          if (best_d >= sigma) continue;
          auto& bh = st.band[size_t(py) * width + px];
          if (bh.tri >= 0 && best_d >= bh.dist) continue;
          bh.tri = static_cast<int>(ti);
          bh.edge = best_e;
          bh.t = best_t;
          bh.dist = best_d;
          bh.coverage = 1 - best_d / sigma;
        }
      }
    }
  }

  // Resolve outputs.
  for (int64_t i = 0; i < hw; ++i) {
    const auto& hit = st.hits[size_t(i)];
    if (hit.tri >= 0) {
      const auto& tr = st.tris[size_t(hit.tri)];
      const Vec3& alb = st.albedos[size_t(tr.part)];
      for (int c = 0; c < 3; ++c) out.rgb[c * hw + i] = alb[c] * tr.shade;
      out.silhouette[i] = 1;
      out.depth[i] = hit.z;
      continue;
    }
    const auto& bh = st.band[size_t(i)];
    if (bh.tri >= 0) {
      const auto& tr = st.tris[size_t(bh.tri)];
      const Vec3& alb = st.albedos[size_t(tr.part)];
      const auto& a = tr.v[bh.edge];
      const auto& b = tr.v[(bh.edge + 1) % 3];
      const real invz = (1 - bh.t) * a.invz + bh.t * b.invz;
      for (int c = 0; c < 3; ++c)
        out.rgb[c * hw + i] =
            alb[c] * tr.shade * bh.coverage + opt.background[c] * (1 - bh.coverage);
      out.silhouette[i] = bh.coverage;
      out.depth[i] = real(1) / invz;
    }
  }
  return out;
}

// Backward of rasterize_core. `d_rgb` is the upstream gradient over [3,H,W]
// (may be null), `d_sil` over [H,W] (may be null). Accumulates into
// d_verts_world (V*3), which the caller must have zero-initialized.
inline void rasterize_backward_core(const SavedState& st, const real* d_rgb,
                                    const real* d_sil, std::span<real> d_verts_world) {
  require(st.valid, "rasterize_backward: missing forward state");
  require(d_verts_world.size() == size_t(st.vert_total) * 3,
          "rasterize_backward: gradient buffer size mismatch");
  const int64_t hw = int64_t(st.height) * st.width;

  // Per-triangle accumulators: shade-scalar gradient and effective-vertex
  // camera-frame gradients.
  std::vector<real> tri_gshade(st.tris.size(), 0);
  struct EffGrad {
    Vec3 g[3];
  };
  std::vector<EffGrad> tri_gv(st.tris.size());
  std::vector<char> tri_touched(st.tris.size(), 0);

  auto screen_to_cam = [&](const SavedState::EffVert& v, real gu, real gv, Vec3* gc) {
    // u = cu + fu*x/z, v = cv + fv*y/z
    gc->x += gu * st.fu * v.invz;
    gc->y += gv * st.fv * v.invz;
    gc->z += (-gu * st.fu * v.cam.x - gv * st.fv * v.cam.y) * v.invz * v.invz;
  };

  for (int64_t i = 0; i < hw; ++i) {
    const auto& hit = st.hits[size_t(i)];
    if (hit.tri >= 0) {
      if (!d_rgb) continue;
      const auto& tr = st.tris[size_t(hit.tri)];
      const Vec3& alb = st.albedos[size_t(tr.part)];
      real gs = 0;
      for (int c = 0; c < 3; ++c) gs += alb[c] * d_rgb[c * hw + i];
      if (gs != 0) {
        tri_gshade[size_t(hit.tri)] += gs;
        tri_touched[size_t(hit.tri)] = 1;
      }
      continue;
    }
    const auto& bh = st.band[size_t(i)];
    if (bh.tri < 0) continue;
    const auto& tr = st.tris[size_t(bh.tri)];
    const Vec3& alb = st.albedos[size_t(tr.part)];
    real g_cov = d_sil ? d_sil[i] : 0;
    real gs = 0;
    if (d_rgb) {
      for (int c = 0; c < 3; ++c) {
        g_cov += (alb[c] * tr.shade - st.opt.background[c]) * d_rgb[c * hw + i];
        gs += alb[c] * bh.coverage * d_rgb[c * hw + i];
      }
    }
    if (gs != 0) {
      tri_gshade[size_t(bh.tri)] += gs;
      tri_touched[size_t(bh.tri)] = 1;
    }
    if (g_cov != 0 && bh.dist > 0) {
      // coverage = 1 - dist/sigma; dist is point-to-segment with foot at t.
      const real g_dist = -g_cov / st.opt.sigma_edge;
      const auto& a = tr.v[bh.edge];
      const auto& b = tr.v[(bh.edge + 1) % 3];
      const int py = static_cast<int>(i / st.width);
      const int px = static_cast<int>(i % st.width);
      const real qx = px + real(0.5), qy = py + real(0.5);
      const real fx = a.u + bh.t * (b.u - a.u), fy = a.v + bh.t * (b.v - a.v);
      const real inv_d = real(1) / bh.dist;
      const real dirx = (qx - fx) * inv_d, diry = (qy - fy) * inv_d;
      // d(dist)/d(a) = -(1-t)*dir, d(dist)/d(b) = -t*dir (envelope theorem
      // for interior t; endpoint cases coincide with t clamped).
      EffGrad& eg = tri_gv[size_t(bh.tri)];
      tri_touched[size_t(bh.tri)] = 1;
      screen_to_cam(a, -g_dist * (1 - bh.t) * dirx, -g_dist * (1 - bh.t) * diry,
                    &eg.g[bh.edge]);
      screen_to_cam(b, -g_dist * bh.t * dirx, -g_dist * bh.t * diry,
                    &eg.g[(bh.edge + 1) % 3]);
    }
  }

  // Shade gradient -> face normal -> camera-frame vertices, then scatter to
  // source vertices (through near-plane lerp for clipped vertices) and map
  // back to world frame.
  std::vector<Vec3> gv_cam(size_t(st.vert_total));
  for (size_t ti = 0; ti < st.tris.size(); ++ti) {
    if (!tri_touched[ti]) continue;
    const auto& tr = st.tris[ti];
    EffGrad& eg = tri_gv[ti];
    const real gs = tri_gshade[ti];
    if (gs != 0 && tr.lambert > 0) {
      // shade = k_amb + k_dir * (-n.z)
      const Vec3 gn_raw{0, 0, -st.lights.k_dir * gs};
      const Vec3 n = tr.unit_normal;
      const Vec3 gn = (gn_raw - n * dot(gn_raw, n)) * tr.inv_raw_norm;
      const Vec3 e1 = tr.v[1].cam - tr.v[0].cam;
      const Vec3 e2 = tr.v[2].cam - tr.v[0].cam;
      const Vec3 ge1 = cross(e2, gn);
      const Vec3 ge2 = cross(gn, e1);
      eg.g[1] += ge1;
      eg.g[2] += ge2;
      eg.g[0] += (ge1 + ge2) * real(-1);
    }
    for (int k = 0; k < 3; ++k) {
      const auto& v = tr.v[k];
      const Vec3& g = eg.g[k];
      if (g.x == 0 && g.y == 0 && g.z == 0) continue;
      if (v.pa == v.pb) {
        gv_cam[size_t(v.pa)] += g;
      } else {
        // v = a + t*(b-a) with t = (znear - a.z)/(b.z - a.z)
        const Vec3& a = st.cam_verts[size_t(v.pa)];
        const Vec3& b = st.cam_verts[size_t(v.pb)];
        const real d = b.z - a.z;
        const real dt_dza = (st.z_near - b.z) / (d * d);
        const real dt_dzb = -(st.z_near - a.z) / (d * d);
        const real g_dot_ab = dot(g, b - a);
        Vec3 ga = g * (1 - v.t);
        Vec3 gb = g * v.t;
        ga.z += g_dot_ab * dt_dza;
        gb.z += g_dot_ab * dt_dzb;
        gv_cam[size_t(v.pa)] += ga;
        gv_cam[size_t(v.pb)] += gb;
      }
    }
  }

  const Mat3 rt = st.world_to_cam.transposed();
  for (int i = 0; i < st.vert_total; ++i) {
    const Vec3 gw = rt * gv_cam[size_t(i)];
    d_verts_world[size_t(i) * 3] += gw.x;
    d_verts_world[size_t(i) * 3 + 1] += gw.y;
    d_verts_world[size_t(i) * 3 + 2] += gw.z;
  }
}

// Rasterize a list of world-frame meshes. An empty list renders background.
inline RenderOutput rasterize(std::span<const TriangleMesh> meshes, const Camera& cam,
                              const LightRig& lights, int width, int height,
                              const Options& opt = {},
                              std::span<const Vec3> albedos = {},
                              SavedState* state = nullptr) {
  require(albedos.empty() || albedos.size() == meshes.size(),
          "rasterize: ", albedos.size(), " albedos for ", meshes.size(), " meshes");
  std::vector<real> verts;
  std::vector<PartSpec> parts;
  int offset = 0;
  for (size_t k = 0; k < meshes.size(); ++k) {
    const TriangleMesh& m = meshes[k];
    require(!m.vertices.empty() && !m.faces.empty(), "rasterize: mesh ", k, " is empty");
    PartSpec p;
    p.faces = m.faces;
    p.vertex_offset = offset;
    p.vertex_count = static_cast<int>(m.vertices.size());
    if (!albedos.empty()) p.albedo = albedos[k];
    parts.push_back(p);
    for (const Vec3& v : m.vertices) {
      verts.push_back(v.x);
      verts.push_back(v.y);
      verts.push_back(v.z);
    }
    offset += p.vertex_count;
  }
  return rasterize_core(verts, parts, cam, lights, width, height, opt, state);
}

inline RenderOutput rasterize(std::initializer_list<TriangleMesh> meshes, const Camera& cam,
                              const LightRig& lights, int width, int height,
                              const Options& opt = {}) {
  return rasterize(std::span<const TriangleMesh>(meshes.begin(), meshes.size()), cam,
                   lights, width, height, opt);
}

}  // namespace derender::raster
