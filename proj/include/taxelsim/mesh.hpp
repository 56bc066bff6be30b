// Copyright 2026 The taxelsim Authors
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

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "taxelsim/io.hpp"
#include "taxelsim/vec.hpp"

namespace taxelsim {

// Indexed triangle mesh with per-triangle unit normals recomputed from
// winding. All coordinates in meters.
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<Vec3> normals;  // one unit normal per triangle

  bool empty() const { return triangles.empty(); }
};

struct RayHit {
  Vec3 point;
  Vec3 normal;
  double t = 0.0;
};

namespace detail {

inline void recompute_normals(TriangleMesh& mesh) {
  mesh.normals.clear();
  mesh.normals.reserve(mesh.triangles.size());
  std::vector<std::array<int, 3>> kept;
  kept.reserve(mesh.triangles.size());
  for (const auto& tri : mesh.triangles) {
    const Vec3& a = mesh.vertices[tri[0]];
    const Vec3& b = mesh.vertices[tri[1]];
    const Vec3& c = mesh.vertices[tri[2]];
    Vec3 n = cross(b - a, c - a);
    double len = norm(n);
    if (len <= 1e-30) continue;  // drop degenerate triangles
    kept.push_back(tri);
    mesh.normals.push_back(n / len);
  }
  mesh.triangles = std::move(kept);
}

inline void validate_indices(const TriangleMesh& mesh) {
  int n = static_cast<int>(mesh.vertices.size());
  for (const auto& tri : mesh.triangles)
    for (int k = 0; k < 3; ++k)
      if (tri[k] < 0 || tri[k] >= n)
        throw std::runtime_error("mesh triangle index out of range: " +
                                 std::to_string(tri[k]) + " with " +
                                 std::to_string(n) + " vertices");
}

// Exact-key vertex dedup; STL repeats every vertex per facet.
class VertexPool {
 public:
  int intern(const Vec3& v, std::vector<Vec3>& vertices) {
    auto [it, inserted] = index_.try_emplace({v.x, v.y, v.z}, 0);
    if (inserted) {
      it->second = static_cast<int>(vertices.size());
      vertices.push_back(v);
    }
    return it->second;
  }

 private:
  std::map<std::array<double, 3>, int> index_;
};

inline TriangleMesh load_obj(std::istream& is, double scale) {
  TriangleMesh mesh;
  std::string line;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      Vec3 v;
      if (!(ls >> v.x >> v.y >> v.z))
        throw std::runtime_error("OBJ: malformed vertex line: " + line);
      mesh.vertices.push_back(v * scale);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ls >> tok) {
        // tokens look like "i", "i/t", "i//n", "i/t/n"
        std::size_t slash = tok.find('/');
        std::string head = slash == std::string::npos ? tok : tok.substr(0, slash);
        int i = std::stoi(head);
        // negative indices are relative to the current vertex count
        if (i < 0) i = static_cast<int>(mesh.vertices.size()) + i + 1;
        idx.push_back(i - 1);
      }
      if (idx.size() < 3)
        throw std::runtime_error("OBJ: face with fewer than 3 vertices");
      for (std::size_t k = 1; k + 1 < idx.size(); ++k)
        mesh.triangles.push_back({idx[0], idx[k], idx[k + 1]});
    }
  }
  return mesh;
}

inline TriangleMesh load_stl_binary(const std::string& bytes, double scale) {
  TriangleMesh mesh;
  std::uint32_t count;
  std::memcpy(&count, bytes.data() + 80, 4);
  VertexPool pool;
  const char* p = bytes.data() + 84;
  for (std::uint32_t t = 0; t < count; ++t, p += 50) {
    std::array<int, 3> tri;
    for (int k = 0; k < 3; ++k) {
      float xyz[3];
      std::memcpy(xyz, p + 12 + 12 * k, 12);
      Vec3 v{static_cast<double>(xyz[0]), static_cast<double>(xyz[1]),
             static_cast<double>(xyz[2])};
      tri[k] = pool.intern(v * scale, mesh.vertices);
    }
    mesh.triangles.push_back(tri);
  }
  return mesh;
}

inline TriangleMesh load_stl_ascii(std::istream& is, double scale) {
  TriangleMesh mesh;
  VertexPool pool;
  std::string tok;
  std::vector<int> face;
  while (is >> tok) {
    if (tok == "vertex") {
      Vec3 v;
      if (!(is >> v.x >> v.y >> v.z))
        throw std::runtime_error("STL: malformed vertex");
      face.push_back(pool.intern(v * scale, mesh.vertices));
    } else if (tok == "endfacet") {
      if (face.size() != 3)
        throw std::runtime_error("STL: facet does not have 3 vertices");
      mesh.triangles.push_back({face[0], face[1], face[2]});
      face.clear();
    }
  }
  return mesh;
}

}  // namespace detail

// Maps every undirected edge to the number of incident triangles. A mesh is
// watertight when every edge is shared by exactly two triangles.
inline bool is_watertight(const TriangleMesh& mesh) {
  if (mesh.empty()) return false;
  std::unordered_map<std::uint64_t, int> edges;
  edges.reserve(mesh.triangles.size() * 3);
  for (const auto& tri : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      std::uint64_t a = static_cast<std::uint32_t>(tri[k]);
      std::uint64_t b = static_cast<std::uint32_t>(tri[(k + 1) % 3]);
      if (a > b) std::swap(a, b);
      ++edges[(a << 32) | b];
    }
  }
  for (const auto& [edge, count] : edges)
    if (count != 2) return false;
  return true;
}

struct MeshLoadOptions {
  double scale = 1.0;  // e.g. 1e-3 for assets authored in millimeters
  std::vector<std::string>* warnings = nullptr;
};

// Loads an OBJ or STL (ASCII or binary) file. Normals always recomputed from
// winding; degenerate triangles dropped. Non-manifold geometry is reported as
// a warning here and only rejected when an SDF build is requested.
inline TriangleMesh load_mesh(const std::filesystem::path& path,
                              const MeshLoadOptions& opts = {}) {
  if (!std::filesystem::exists(path))
    throw std::runtime_error("mesh file not found: " + path.string());
  std::string ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(c));

  TriangleMesh mesh;
  if (ext == ".obj") {
    std::ifstream is = open_input(path, /*binary=*/false);
    mesh = detail::load_obj(is, opts.scale);
  } else if (ext == ".stl") {
    std::ifstream is = open_input(path);
    std::stringstream ss;
    ss << is.rdbuf();
    std::string bytes = ss.str();
    bool binary = false;
    if (bytes.size() >= 84) {
      std::uint32_t count;
      std::memcpy(&count, bytes.data() + 80, 4);
      binary = bytes.size() == 84 + static_cast<std::size_t>(count) * 50;
    }
    if (binary) {
      mesh = detail::load_stl_binary(bytes, opts.scale);
    } else {
      std::istringstream as(bytes);
      mesh = detail::load_stl_ascii(as, opts.scale);
    }
  } else {
    throw std::runtime_error("unsupported mesh format: " + path.string() +
                             " (expected .obj or .stl)");
  }

  detail::validate_indices(mesh);
  std::size_t before = mesh.triangles.size();
  detail::recompute_normals(mesh);
  if (opts.warnings) {
    if (std::size_t dropped = before - mesh.triangles.size())
      opts.warnings->push_back(path.string() + ": dropped " +
                               std::to_string(dropped) +
                               " degenerate triangle(s)");
    if (!is_watertight(mesh))
      opts.warnings->push_back(path.string() +
                               ": mesh is not watertight (SDF build will be "
                               "rejected)");
  }
  return mesh;
}

inline Aabb mesh_bounds(const TriangleMesh& mesh) {
  if (mesh.vertices.empty()) throw std::runtime_error("mesh is empty");
  Aabb box{mesh.vertices.front(), mesh.vertices.front()};
  for (const Vec3& v : mesh.vertices) {
    box.min = cwise_min(box.min, v);
    box.max = cwise_max(box.max, v);
  }
  return box;
}

// Moller-Trumbore intersection of one ray with one triangle.
inline std::optional<double> ray_triangle(const Vec3& origin, const Vec3& dir,
                                          const Vec3& a, const Vec3& b,
                                          const Vec3& c) {
  constexpr double kEps = 1e-14;
  Vec3 e1 = b - a;
  Vec3 e2 = c - a;
  Vec3 pvec = cross(dir, e2);
  double det = dot(e1, pvec);
  if (std::abs(det) < kEps) return std::nullopt;
  double inv_det = 1.0 / det;
  Vec3 tvec = origin - a;
  double u = dot(tvec, pvec) * inv_det;
  if (u < 0.0 || u > 1.0) return std::nullopt;
  Vec3 qvec = cross(tvec, e1);
  double v = dot(dir, qvec) * inv_det;
  if (v < 0.0 || u + v > 1.0) return std::nullopt;
  double t = dot(e2, qvec) * inv_det;
  if (t <= 0.0) return std::nullopt;
  return t;
}

// Nearest intersection with t > 0, or nullopt on a miss.
inline std::optional<RayHit> ray_cast(const TriangleMesh& mesh,
                                      const Vec3& origin, const Vec3& dir) {
  std::optional<RayHit> best;
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
    const auto& tri = mesh.triangles[i];
    auto t = ray_triangle(origin, dir, mesh.vertices[tri[0]],
                          mesh.vertices[tri[1]], mesh.vertices[tri[2]]);
    if (t && (!best || *t < best->t))
      best = RayHit{origin + dir * *t, mesh.normals[i], *t};
  }
  return best;
}

// Distance from point to triangle (Ericson-style closest point).
inline double point_triangle_distance(const Vec3& p, const Vec3& a,
                                      const Vec3& b, const Vec3& c) {
  Vec3 ab = b - a, ac = c - a, ap = p - a;
  double d1 = dot(ab, ap), d2 = dot(ac, ap);
  if (d1 <= 0.0 && d2 <= 0.0) return norm(p - a);

  Vec3 bp = p - b;
  double d3 = dot(ab, bp), d4 = dot(ac, bp);
  if (d3 >= 0.0 && d4 <= d3) return norm(p - b);

  double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    double v = d1 / (d1 - d3);
    return norm(p - (a + ab * v));
  }

  Vec3 cp = p - c;
  double d5 = dot(ab, cp), d6 = dot(ac, cp);
  if (d6 >= 0.0 && d5 <= d6) return norm(p - c);

  double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    double w = d2 / (d2 - d6);
    return norm(p - (a + ac * w));
  }

  double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return norm(p - (b + (c - b) * w));
  }

  double denom = 1.0 / (va + vb + vc);
  double v = vb * denom, w = vc * denom;
  return norm(p - (a + ab * v + ac * w));
}

// ---------------------------------------------------------------------------
// Procedural meshes (scene synthesis and oracles).

inline TriangleMesh make_box_mesh(const Vec3& center, const Vec3& half) {
  TriangleMesh mesh;
  for (int i = 0; i < 8; ++i)
    mesh.vertices.push_back(center + Vec3{(i & 1) ? half.x : -half.x,
                                          (i & 2) ? half.y : -half.y,
                                          (i & 4) ? half.z : -half.z});
  // CCW as seen from outside
  const int faces[12][3] = {{0, 2, 3}, {0, 3, 1},   // -z
                            {4, 5, 7}, {4, 7, 6},   // +z
                            {0, 1, 5}, {0, 5, 4},   // -y
                            {2, 6, 7}, {2, 7, 3},   // +y
                            {0, 4, 6}, {0, 6, 2},   // -x
                            {1, 3, 7}, {1, 7, 5}};  // +x
  for (const auto& f : faces) mesh.triangles.push_back({f[0], f[1], f[2]});
  detail::recompute_normals(mesh);
  return mesh;
}

// Icosphere by midpoint subdivision of an icosahedron.
inline TriangleMesh make_icosphere_mesh(const Vec3& center, double radius,
                                        int subdivisions = 3) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> verts = {
      {-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0},
      {0, -1, t}, {0, 1, t},  {0, -1, -t}, {0, 1, -t},
      {t, 0, -1}, {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  for (Vec3& v : verts) v = normalized(v);
  std::vector<std::array<int, 3>> faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};

  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      auto key = std::minmax(a, b);
      auto [it, inserted] = midpoint.try_emplace(key, 0);
      if (inserted) {
        it->second = static_cast<int>(verts.size());
        verts.push_back(normalized(verts[a] + verts[b]));
      }
      return it->second;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }

  TriangleMesh mesh;
  mesh.vertices.reserve(verts.size());
  for (const Vec3& v : verts) mesh.vertices.push_back(center + v * radius);
  mesh.triangles = std::move(faces);
  detail::recompute_normals(mesh);
  return mesh;
}

// Writes a mesh as ASCII OBJ (handy for synthesizing test/demo assets).
inline void save_obj(const std::filesystem::path& path,
                     const TriangleMesh& mesh) {
  AtomicFile file(path, /*binary=*/false);
  std::ostream& os = file.stream();
  os.precision(17);
  for (const Vec3& v : mesh.vertices)
    os << "v " << v.x << " " << v.y << " " << v.z << "\n";
  for (const auto& t : mesh.triangles)
    os << "f " << t[0] + 1 << " " << t[1] + 1 << " " << t[2] + 1 << "\n";
  file.commit();
}

// Writes a mesh as binary STL.
inline void save_stl_binary(const std::filesystem::path& path,
                            const TriangleMesh& mesh) {
  AtomicFile file(path);
  std::ostream& os = file.stream();
  char header[80] = {};
  os.write(header, 80);
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(mesh.triangles.size()));
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
    const auto& tri = mesh.triangles[i];
    auto put = [&](const Vec3& v) {
      detail::write_le<float>(os, static_cast<float>(v.x));
      detail::write_le<float>(os, static_cast<float>(v.y));
      detail::write_le<float>(os, static_cast<float>(v.z));
    };
    put(mesh.normals[i]);
    put(mesh.vertices[tri[0]]);
    put(mesh.vertices[tri[1]]);
    put(mesh.vertices[tri[2]]);
    detail::write_le<std::uint16_t>(os, 0);
  }
  file.commit();
}

}  // namespace taxelsim
