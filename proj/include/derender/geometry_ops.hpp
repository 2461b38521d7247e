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

#include "derender/geometry.hpp"
#include "derender/ops.hpp"

// Tape ops that bridge tensors and camera geometry.
namespace derender::ad {

// Rotation matrix [3,3] of a unit quaternion [4] (w,x,y,z). The input must
// already be normalized (see normalize_rows); the backward differentiates
// the polynomial matrix entries directly.
inline Var quat_to_mat(const Var& q) {
  const Tensor& qv = q.value();
  require(qv.numel() == 4, "quat_to_mat: expects 4 values, got shape ",
          shape_str(qv.shape));
  const real w = qv[0], x = qv[1], y = qv[2], z = qv[3];
  Tensor out(Shape{3, 3});
  out[0] = 1 - 2 * (y * y + z * z);
  out[1] = 2 * (x * y - w * z);
  out[2] = 2 * (x * z + w * y);
  out[3] = 2 * (x * y + w * z);
  out[4] = 1 - 2 * (x * x + z * z);
  out[5] = 2 * (y * z - w * x);
  out[6] = 2 * (x * z - w * y);
  out[7] = 2 * (y * z + w * x);
  out[8] = 1 - 2 * (x * x + y * y);
  return q.tape().record(
      "quat_to_mat", {q}, std::move(out),
      [iq = q.id()](Tape& t, const Tensor& g, int) {
        const Tensor& qv2 = t.value(iq);
        const real w = qv2[0], x = qv2[1], y = qv2[2], z = qv2[3];
        Tensor gq(qv2.shape);
        gq[0] = 2 * (-g[1] * z + g[2] * y + g[3] * z - g[5] * x - g[6] * y + g[7] * x);
        gq[1] = 2 * (g[1] * y + g[2] * z + g[3] * y - 2 * g[4] * x - g[5] * w + g[6] * z +
                     g[7] * w - 2 * g[8] * x);
        gq[2] = 2 * (-2 * g[0] * y + g[1] * x + g[2] * w + g[3] * x + g[5] * z - g[6] * w +
                     g[7] * z - 2 * g[8] * y);
        gq[3] = 2 * (-2 * g[0] * z - g[1] * w + g[2] * x + g[3] * w - 2 * g[4] * z +
                     g[5] * y + g[6] * x + g[7] * y);
        t.accumulate_grad(iq, gq);
      });
}

// Unprojection of pixel coordinates and camera-frame depth to a world point,
// differentiable in (u, v, depth). Realizes the translation-retrieval
// inverse projection with a fixed, known camera.
inline Var unproject_pixel(const Var& u, const Var& v, const Var& depth,
                           const geom::Camera& cam) {
  require(u.value().numel() == 1 && v.value().numel() == 1 && depth.value().numel() == 1,
          "unproject_pixel: u, v, depth must be scalars");
  cam.validate();
  const real z = depth.value()[0];
  require(z > 0, "unproject_pixel: depth must be positive, got ", z);
  const geom::Vec3 p = cam.unproject(u.value()[0], v.value()[0], z);
  Tensor out(Shape{3});
  out[0] = p.x;
  out[1] = p.y;
  out[2] = p.z;
  const geom::Mat3 rt = cam.world_to_cam_rot().transposed();
  const real fu = cam.focal * real(cam.width) / 2;
  const real fv = cam.focal * real(cam.height) / 2;
  const real cu = real(cam.width) / 2, cv = real(cam.height) / 2;
  return u.tape().record(
      "unproject_pixel", {u, v, depth}, std::move(out),
      [iu = u.id(), iv = v.id(), iz = depth.id(), rt, fu, fv, cu, cv](
          Tape& t, const Tensor& g, int) {
        const real uu = t.value(iu)[0], vv = t.value(iv)[0], zz = t.value(iz)[0];
        // world = Rt * pc + C with pc = ((u-cu)/fu*z, (v-cv)/fv*z, z)
        const geom::Vec3 gw{g[0], g[1], g[2]};
        const geom::Vec3 gpc = rt.transposed() * gw;
        Tensor gu(Shape{}), gv(Shape{}), gz(Shape{});
        gu[0] = gpc.x * zz / fu;
        gv[0] = gpc.y * zz / fv;
        gz[0] = gpc.x * (uu - cu) / fu + gpc.y * (vv - cv) / fv + gpc.z;
        t.accumulate_grad(iu, gu);
        t.accumulate_grad(iv, gv);
        t.accumulate_grad(iz, gz);
      });
}

// v' = v * R^T for row-vector vertices [V,3]; rotation applied on the left
// of column vectors, i.e. out_row = R * v_row.
inline Var rotate_rows(const Var& verts, const Var& rot3x3) {
  return matmul(verts, transpose(rot3x3));
}

}  // namespace derender::ad
