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

#include <array>
#include <cmath>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "derender/common.hpp"

namespace derender::geom {

// ---------------------------------------------------------------------------
// Small fixed-size linear algebra
// ---------------------------------------------------------------------------

struct Vec3 {
  real x = 0, y = 0, z = 0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(real s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(real s) const { return {x / s, y / s, z / s}; }
  Vec3 operator-() const { return {-x, -y, -z}; }
  Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  real operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

inline real dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline real norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 normalized(const Vec3& a) {
  const real n = norm(a);
  require(n > 0, "normalized: zero vector");
  return a / n;
}

// Row-major 3x3 matrix.
struct Mat3 {
  std::array<real, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  static Mat3 identity() { return {}; }
  static Mat3 from_rows(const Vec3& r0, const Vec3& r1, const Vec3& r2) {
    return Mat3{{r0.x, r0.y, r0.z, r1.x, r1.y, r1.z, r2.x, r2.y, r2.z}};
  }

  real operator()(int i, int j) const { return m[static_cast<size_t>(i * 3 + j)]; }
  real& operator()(int i, int j) { return m[static_cast<size_t>(i * 3 + j)]; }

  Vec3 operator*(const Vec3& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z, m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }
  Mat3 operator*(const Mat3& o) const {
    Mat3 r{};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        real acc = 0;
        for (int k = 0; k < 3; ++k) acc += (*this)(i, k) * o(k, j);
        r(i, j) = acc;
      }
    return r;
  }
  Mat3 transposed() const {
    Mat3 r{};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r(i, j) = (*this)(j, i);
    return r;
  }
  real det() const {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
  }
};

// ---------------------------------------------------------------------------
// Quaternions
// ---------------------------------------------------------------------------

struct Quaternion {
  real w = 1, x = 0, y = 0, z = 0;

  real norm2() const { return w * w + x * x + y * y + z * z; }

  Quaternion normalized() const {
    const real n2 = norm2();
    require(n2 > 0, "Quaternion::normalized: zero quaternion");
    const real inv = real(1) / std::sqrt(n2);
    return {w * inv, x * inv, y * inv, z * inv};
  }

  static Quaternion from_axis_angle(const Vec3& axis, real angle) {
    const Vec3 a = geom::normalized(axis);
    const real s = std::sin(angle / 2);
    return {std::cos(angle / 2), a.x * s, a.y * s, a.z * s};
  }

  Quaternion operator*(const Quaternion& o) const {
    return {w * o.w - x * o.x - y * o.y - z * o.z, w * o.x + x * o.w + y * o.z - z * o.y,
            w * o.y - x * o.z + y * o.w + z * o.x, w * o.z + x * o.y - y * o.x + z * o.w};
  }
};

// Rotation matrix of a quaternion; normalizes internally, so scale-invariant.
inline Mat3 quat_to_matrix(const Quaternion& q_in) {
  const Quaternion q = q_in.normalized();
  const real w = q.w, x = q.x, y = q.y, z = q.z;
  Mat3 r{};
  r(0, 0) = 1 - 2 * (y * y + z * z);
  r(0, 1) = 2 * (x * y - w * z);
  r(0, 2) = 2 * (x * z + w * y);
  r(1, 0) = 2 * (x * y + w * z);
  r(1, 1) = 1 - 2 * (x * x + z * z);
  r(1, 2) = 2 * (y * z - w * x);
  r(2, 0) = 2 * (x * z - w * y);
  r(2, 1) = 2 * (y * z + w * x);
  r(2, 2) = 1 - 2 * (x * x + y * y);
  return r;
}

// Quaternion of a rotation matrix; inverse of quat_to_matrix up to sign.
inline Quaternion matrix_to_quat(const Mat3& r) {
  const real tr = r(0, 0) + r(1, 1) + r(2, 2);
  Quaternion q;
  if (tr > 0) {
    const real s = std::sqrt(tr + 1) * 2;
    q = {s / 4, (r(2, 1) - r(1, 2)) / s, (r(0, 2) - r(2, 0)) / s, (r(1, 0) - r(0, 1)) / s};
  } else if (r(0, 0) > r(1, 1) && r(0, 0) > r(2, 2)) {
    const real s = std::sqrt(1 + r(0, 0) - r(1, 1) - r(2, 2)) * 2;
    q = {(r(2, 1) - r(1, 2)) / s, s / 4, (r(0, 1) + r(1, 0)) / s, (r(0, 2) + r(2, 0)) / s};
  } else if (r(1, 1) > r(2, 2)) {
    const real s = std::sqrt(1 + r(1, 1) - r(0, 0) - r(2, 2)) * 2;
    q = {(r(0, 2) - r(2, 0)) / s, (r(0, 1) + r(1, 0)) / s, s / 4, (r(1, 2) + r(2, 1)) / s};
  } else {
    const real s = std::sqrt(1 + r(2, 2) - r(0, 0) - r(1, 1)) * 2;
    q = {(r(1, 0) - r(0, 1)) / s, (r(0, 2) + r(2, 0)) / s, (r(1, 2) + r(2, 1)) / s, s / 4};
  }
  return q.normalized();
}

// ---------------------------------------------------------------------------
// Meshes
// ---------------------------------------------------------------------------

using Face = std::array<int, 3>;

// Faces are counter-clockwise when viewed from outside.
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
};

inline void check_face_indices(const TriangleMesh& mesh) {
  const int n = static_cast<int>(mesh.vertices.size());
  for (size_t f = 0; f < mesh.faces.size(); ++f)
    for (int k = 0; k < 3; ++k)
      require(mesh.faces[f][k] >= 0 && mesh.faces[f][k] < n, "face ", f,
              " references vertex ", mesh.faces[f][k], " of ", n);
}

// Interior edge of a closed 2-manifold with its two adjacent faces.
// v0 < v1; face0 contains the directed edge v0->v1, face1 contains v1->v0.
struct EdgeAdjacency {
  int v0, v1;
  int face0, face1;
};

inline std::vector<EdgeAdjacency> mesh_edges(const TriangleMesh& mesh) {
  check_face_indices(mesh);
  std::map<std::pair<int, int>, EdgeAdjacency> edges;
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    const Face& face = mesh.faces[f];
    for (int k = 0; k < 3; ++k) {
      const int a = face[k], b = face[(k + 1) % 3];
      require(a != b, "face ", f, " has a repeated vertex ", a);
      const auto key = std::minmax(a, b);
      auto it = edges.find(key);
      if (it == edges.end()) {
        EdgeAdjacency e{key.first, key.second, -1, -1};
        if (a < b)
          e.face0 = static_cast<int>(f);
        else
          e.face1 = static_cast<int>(f);
        edges.emplace(key, e);
      } else {
        EdgeAdjacency& e = it->second;
        if (a < b) {
          require(e.face0 == -1, "non-manifold edge (", a, ",", b,
                  "): directed edge seen twice");
          e.face0 = static_cast<int>(f);
        } else {
          require(e.face1 == -1, "non-manifold edge (", b, ",", a,
                  "): directed edge seen twice");
          e.face1 = static_cast<int>(f);
        }
      }
    }
  }
  std::vector<EdgeAdjacency> out;
  out.reserve(edges.size());
  for (const auto& [key, e] : edges) {
    require(e.face0 >= 0 && e.face1 >= 0, "non-manifold edge (", key.first, ",",
            key.second, "): shared by fewer than 2 faces");
    out.push_back(e);
  }
  return out;
}

inline Vec3 face_normal(const TriangleMesh& mesh, int f) {
  const Face& face = mesh.faces[static_cast<size_t>(f)];
  const Vec3 e1 = mesh.vertices[face[1]] - mesh.vertices[face[0]];
  const Vec3 e2 = mesh.vertices[face[2]] - mesh.vertices[face[0]];
  return cross(e1, e2);
}

// Icosphere: level 0 is a regular icosahedron; each level splits every
// triangle into 4 and reprojects the new vertices onto the unit sphere.
inline TriangleMesh icosphere(int level) {
  require(level >= 0, "icosphere: level must be >= 0, got ", level);
  require(level <= 6, "icosphere: level ", level, " exceeds resource guard (6)");
  const real phi = (1 + std::sqrt(real(5))) / 2;
  TriangleMesh mesh;
  mesh.vertices = {{-1, phi, 0}, {1, phi, 0},   {-1, -phi, 0}, {1, -phi, 0},
                   {0, -1, phi}, {0, 1, phi},   {0, -1, -phi}, {0, 1, -phi},
                   {phi, 0, -1}, {phi, 0, 1},   {-phi, 0, -1}, {-phi, 0, 1}};
  for (Vec3& v : mesh.vertices) v = normalized(v);
  mesh.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int l = 0; l < level; ++l) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      const Vec3 m = normalized((mesh.vertices[a] + mesh.vertices[b]) * real(0.5));
      mesh.vertices.push_back(m);
      const int idx = static_cast<int>(mesh.vertices.size()) - 1;
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<Face> faces;
    faces.reserve(mesh.faces.size() * 4);
    for (const Face& f : mesh.faces) {
      const int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
      faces.push_back({f[0], ab, ca});
      faces.push_back({f[1], bc, ab});
      faces.push_back({f[2], ca, bc});
      faces.push_back({ab, bc, ca});
    }
    mesh.faces = std::move(faces);
  }
  return mesh;
}

inline TriangleMesh deform(const TriangleMesh& base, std::span<const Vec3> displacements) {
  require(displacements.size() == base.vertices.size(), "deform: ",
          displacements.size(), " displacements for ", base.vertices.size(),
          " vertices");
  TriangleMesh out = base;
  for (size_t i = 0; i < out.vertices.size(); ++i) out.vertices[i] += displacements[i];
  return out;
}

struct RigidTransform {
  Quaternion rotation;
  Vec3 translation;
};

inline TriangleMesh apply_transform(const TriangleMesh& mesh, const RigidTransform& t) {
  const Mat3 r = quat_to_matrix(t.rotation);
  TriangleMesh out = mesh;
  for (Vec3& v : out.vertices) v = r * v + t.translation;
  return out;
}

// ---------------------------------------------------------------------------
// Camera
// ---------------------------------------------------------------------------

// Pinhole camera orbiting the world origin. Right-handed world with +Z up;
// the camera looks at the origin and the image v-axis points down. Pixel
// coordinates live in [0,W)x[0,H) with the principal point at the center.
struct Camera {
  real azimuth = 0;       // radians
  real elevation = 0;     // radians, fixed per dataset
  real distance = 1;      // to origin, object units
  real focal = 1;         // normalized: u = W/2 + focal*(x/z)*(W/2)
  int width = 64, height = 64;
  real z_near = real(0.1);

  void validate() const {
    require(distance > 0, "Camera: distance must be positive, got ", distance);
    require(focal > 0, "Camera: focal must be positive, got ", focal);
    require(width > 0 && height > 0, "Camera: empty image ", width, "x", height);
  }

  Vec3 position() const {
    const real ce = std::cos(elevation);
    return Vec3{ce * std::cos(azimuth), ce * std::sin(azimuth), std::sin(elevation)} *
           distance;
  }

  // Rows are the camera axes: x right, y down, z forward (into the scene).
  Mat3 world_to_cam_rot() const {
    const Vec3 fwd = normalized(Vec3{0, 0, 0} - position());
    const Vec3 up_world{0, 0, 1};
    const Vec3 right_unnorm = cross(fwd, up_world);
    require(norm(right_unnorm) > 1e-9, "Camera: view direction parallel to world up");
    const Vec3 right = normalized(right_unnorm);
    const Vec3 down = cross(fwd, right);
    return Mat3::from_rows(right, down, fwd);
  }

  Vec3 to_camera(const Vec3& p_world) const {
    return world_to_cam_rot() * (p_world - position());
  }

  struct Pixel {
    real u, v, depth;
  };

  Pixel project(const Vec3& p_world) const {
    validate();
    const Vec3 pc = to_camera(p_world);
    require(pc.z > z_near, "project: point at camera depth ", pc.z,
            " is behind the near plane (", z_near, ")");
    const real fu = focal * real(width) / 2, fv = focal * real(height) / 2;
    return {real(width) / 2 + fu * pc.x / pc.z, real(height) / 2 + fv * pc.y / pc.z, pc.z};
  }

  Vec3 unproject(real u, real v, real depth) const {
    validate();
    require(depth > 0, "unproject: depth must be positive, got ", depth);
    const real fu = focal * real(width) / 2, fv = focal * real(height) / 2;
    const Vec3 pc{(u - real(width) / 2) / fu * depth, (v - real(height) / 2) / fv * depth,
                  depth};
    return world_to_cam_rot().transposed() * pc + position();
  }
};

// ---------------------------------------------------------------------------
// Dihedral angles
// ---------------------------------------------------------------------------

// Interior angle between face planes measured on the outward side: coplanar
// outward-consistent faces give pi, a convex 90-degree edge gives pi/2.
inline std::vector<real> dihedral_angles(const TriangleMesh& mesh) {
  const auto edges = mesh_edges(mesh);
  std::vector<real> angles;
  angles.reserve(edges.size());
  for (const EdgeAdjacency& e : edges) {
    const Vec3 n0 = normalized(face_normal(mesh, e.face0));
    const Vec3 n1 = normalized(face_normal(mesh, e.face1));
    const Vec3 edge_dir = normalized(mesh.vertices[e.v1] - mesh.vertices[e.v0]);
    // Signed angle between normals about the shared edge (oriented as in
    // face0); convex edges give a positive angle.
    const real alpha = std::atan2(dot(cross(n0, n1), edge_dir), dot(n0, n1));
    angles.push_back(real(M_PI) - alpha);
  }
  return angles;
}

// ---------------------------------------------------------------------------
// OBJ export
// ---------------------------------------------------------------------------

inline void export_obj(std::ostream& os, std::span<const TriangleMesh> parts) {
  os.precision(9);
  int base = 1;  // OBJ indices are 1-based
  for (size_t k = 0; k < parts.size(); ++k) {
    os << "o part_" << k << "\n";
    for (const Vec3& v : parts[k].vertices)
      os << "v " << v.x << " " << v.y << " " << v.z << "\n";
    for (const Face& f : parts[k].faces)
      os << "f " << f[0] + base << " " << f[1] + base << " " << f[2] + base << "\n";
    base += static_cast<int>(parts[k].vertices.size());
  }
}

inline std::vector<TriangleMesh> import_obj(std::istream& is) {
  std::vector<TriangleMesh> parts;
  std::vector<Vec3> all_vertices;
  std::vector<int> part_vertex_base;
  std::string line;
  while (std::getline(is, line)) {
    if (line.rfind("o ", 0) == 0) {
      parts.emplace_back();
      part_vertex_base.push_back(static_cast<int>(all_vertices.size()));
    } else if (line.rfind("v ", 0) == 0) {
      require(!parts.empty(), "import_obj: vertex before any object");
      std::istringstream ls(line.substr(2));
      Vec3 v;
      ls >> v.x >> v.y >> v.z;
      require(!ls.fail(), "import_obj: malformed vertex line: ", line);
      all_vertices.push_back(v);
      parts.back().vertices.push_back(v);
    } else if (line.rfind("f ", 0) == 0) {
      require(!parts.empty(), "import_obj: face before any object");
      std::istringstream ls(line.substr(2));
      int a, b, c;
      ls >> a >> b >> c;
      require(!ls.fail(), "import_obj: malformed face line: ", line);
      const int base = part_vertex_base.back();
      parts.back().faces.push_back({a - 1 - base, b - 1 - base, c - 1 - base});
    }
  }
  for (const TriangleMesh& m : parts) check_face_indices(m);
  return parts;
}

}  // namespace derender::geom
