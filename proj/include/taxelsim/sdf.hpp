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

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <variant>
#include <vector>

#include "taxelsim/io.hpp"
#include "taxelsim/mesh.hpp"
#include "taxelsim/vec.hpp"

namespace taxelsim {

// Signed distance and outward unit normal at a query point.
struct SdfSample {
  double distance = 0.0;
  Vec3 normal{0.0, 0.0, 1.0};
};

// Uniform grid of signed distances at nodes, negative inside the solid.
// Node (i,j,k) sits at origin + cell*(i,j,k); values are x-fastest.
struct SdfGrid {
  Vec3 origin;
  double cell = 0.0;
  int nx = 0, ny = 0, nz = 0;
  std::vector<double> values;

  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(nx) *
               (static_cast<std::size_t>(j) +
                static_cast<std::size_t>(ny) * static_cast<std::size_t>(k));
  }
  double at(int i, int j, int k) const { return values[index(i, j, k)]; }
  Vec3 node_position(int i, int j, int k) const {
    return origin + Vec3{i * cell, j * cell, k * cell};
  }
  Vec3 max_corner() const {
    return origin + Vec3{(nx - 1) * cell, (ny - 1) * cell, (nz - 1) * cell};
  }
  std::size_t node_count() const {
    return static_cast<std::size_t>(nx) * ny * nz;
  }
};

namespace detail {

// Orientation of the origin against segment (x1,y1)-(x2,y2) with a
// deterministic tie-break so shared edges are counted exactly once.
inline int orientation2d(double x1, double y1, double x2, double y2,
                         double& twice_signed_area) {
  twice_signed_area = y1 * x2 - x1 * y2;
  if (twice_signed_area > 0) return 1;
  if (twice_signed_area < 0) return -1;
  if (y2 > y1) return 1;
  if (y2 < y1) return -1;
  if (x1 > x2) return 1;
  if (x1 < x2) return -1;
  return 0;  // coincident vertices
}

// Point-in-triangle in 2D with barycentric output; boundary cases resolved
// by the orientation tie-break above.
inline bool point_in_triangle_2d(double x0, double y0, double x1, double y1,
                                 double x2, double y2, double x3, double y3,
                                 double& a, double& b, double& c) {
  x1 -= x0; x2 -= x0; x3 -= x0;
  y1 -= y0; y2 -= y0; y3 -= y0;
  int sa = orientation2d(x2, y2, x3, y3, a);
  if (sa == 0) return false;
  int sb = orientation2d(x3, y3, x1, y1, b);
  if (sb != sa) return false;
  int sc = orientation2d(x1, y1, x2, y2, c);
  if (sc != sa) return false;
  double sum = a + b + c;
  a /= sum; b /= sum; c /= sum;
  return true;
}

}  // namespace detail

struct SdfBuildOptions {
  int padding_cells = 2;
  std::size_t node_budget = std::size_t{64} * 1024 * 1024;
};

// Builds the signed distance grid of a watertight mesh.
//
// Distances come from exact point-triangle distances in a band around each
// triangle, propagated to the rest of the grid by eight directional sweeps
// of closest-triangle candidates. Signs come from ray-crossing parity along
// all three grid axes with a majority vote, which is robust to rays grazing
// edges or vertices.
inline SdfGrid build_sdf_grid(const TriangleMesh& mesh, double cell_size,
                              const SdfBuildOptions& opts = {}) {
  if (cell_size <= 0.0) throw std::runtime_error("cell_size must be > 0");
  if (!is_watertight(mesh)) throw std::runtime_error("mesh not watertight");

  Aabb bounds = mesh_bounds(mesh);
  Vec3 ext = bounds.extent();
  SdfGrid grid;
  grid.cell = cell_size;
  grid.origin = bounds.min - Vec3{1.0, 1.0, 1.0} * (opts.padding_cells * cell_size);
  auto axis_nodes = [&](double e) {
    return static_cast<int>(std::ceil(e / cell_size)) + 2 * opts.padding_cells + 1;
  };
  grid.nx = axis_nodes(ext.x);
  grid.ny = axis_nodes(ext.y);
  grid.nz = axis_nodes(ext.z);

  std::size_t n = grid.node_count();
  if (n > opts.node_budget)
    throw std::runtime_error("SDF grid of " + std::to_string(n) +
                             " nodes exceeds budget of " +
                             std::to_string(opts.node_budget));

  grid.values.assign(n, std::numeric_limits<double>::max());
  std::vector<std::int32_t> closest(n, -1);

  const int dims[3] = {grid.nx, grid.ny, grid.nz};
  auto node_index = [&](int i, int j, int k) { return grid.index(i, j, k); };
  auto tri_vertex = [&](std::size_t t, int k) -> const Vec3& {
    return mesh.vertices[mesh.triangles[t][k]];
  };

  // Exact distances in a band of +-2 cells around every triangle.
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const Vec3& a = tri_vertex(t, 0);
    const Vec3& b = tri_vertex(t, 1);
    const Vec3& c = tri_vertex(t, 2);
    Vec3 lo = cwise_min(a, cwise_min(b, c));
    Vec3 hi = cwise_max(a, cwise_max(b, c));
    int i0[3], i1[3];
    for (int ax = 0; ax < 3; ++ax) {
      i0[ax] = std::max(0, static_cast<int>(std::floor(
                               (lo[ax] - grid.origin[ax]) / cell_size)) - 2);
      i1[ax] = std::min(dims[ax] - 1,
                        static_cast<int>(std::ceil(
                            (hi[ax] - grid.origin[ax]) / cell_size)) + 2);
    }
    for (int k = i0[2]; k <= i1[2]; ++k)
      for (int j = i0[1]; j <= i1[1]; ++j)
        for (int i = i0[0]; i <= i1[0]; ++i) {
          Vec3 gx = grid.node_position(i, j, k);
          double d = point_triangle_distance(gx, a, b, c);
          std::size_t idx = node_index(i, j, k);
          if (d < grid.values[idx]) {
            grid.values[idx] = d;
            closest[idx] = static_cast<std::int32_t>(t);
          }
        }
  }

  // Propagate closest-triangle candidates across the grid.
  auto relax = [&](int i, int j, int k, int pi, int pj, int pk) {
    std::size_t src = node_index(pi, pj, pk);
    std::int32_t t = closest[src];
    if (t < 0) return;
    std::size_t dst = node_index(i, j, k);
    Vec3 gx = grid.node_position(i, j, k);
    double d = point_triangle_distance(gx, tri_vertex(t, 0), tri_vertex(t, 1),
                                       tri_vertex(t, 2));
    if (d < grid.values[dst]) {
      grid.values[dst] = d;
      closest[dst] = t;
    }
  };
  auto sweep = [&](int di, int dj, int dk) {
    int is = di > 0 ? 1 : grid.nx - 2, ie = di > 0 ? grid.nx : -1;
    int js = dj > 0 ? 1 : grid.ny - 2, je = dj > 0 ? grid.ny : -1;
    int ks = dk > 0 ? 1 : grid.nz - 2, ke = dk > 0 ? grid.nz : -1;
    for (int k = ks; k != ke; k += dk)
      for (int j = js; j != je; j += dj)
        for (int i = is; i != ie; i += di) {
          relax(i, j, k, i - di, j, k);
          relax(i, j, k, i, j - dj, k);
          relax(i, j, k, i - di, j - dj, k);
          relax(i, j, k, i, j, k - dk);
          relax(i, j, k, i - di, j, k - dk);
          relax(i, j, k, i, j - dj, k - dk);
          relax(i, j, k, i - di, j - dj, k - dk);
        }
  };
  sweep(+1, +1, +1); sweep(-1, -1, -1);
  sweep(+1, +1, -1); sweep(-1, -1, +1);
  sweep(+1, -1, +1); sweep(-1, +1, -1);
  sweep(+1, -1, -1); sweep(-1, +1, +1);

  // Inside/outside votes from crossing parity along each grid axis.
  std::vector<std::uint8_t> votes(n, 0);
  std::vector<std::uint32_t> crossings(n);
  // ray axis ra, plane axes pb/pc
  auto parity_pass = [&](int ra, int pb, int pc) {
    std::fill(crossings.begin(), crossings.end(), 0u);
    auto lattice_index = [&](int ia, int ib, int ic) {
      int ijk[3];
      ijk[ra] = ia; ijk[pb] = ib; ijk[pc] = ic;
      return node_index(ijk[0], ijk[1], ijk[2]);
    };
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
      const Vec3& va = tri_vertex(t, 0);
      const Vec3& vb = tri_vertex(t, 1);
      const Vec3& vc = tri_vertex(t, 2);
      double bmin = std::min({va[pb], vb[pb], vc[pb]});
      double bmax = std::max({va[pb], vb[pb], vc[pb]});
      double cmin = std::min({va[pc], vb[pc], vc[pc]});
      double cmax = std::max({va[pc], vb[pc], vc[pc]});
      int jb0 = std::max(0, static_cast<int>(std::ceil((bmin - grid.origin[pb]) / cell_size)));
      int jb1 = std::min(dims[pb] - 1, static_cast<int>(std::floor((bmax - grid.origin[pb]) / cell_size)));
      int kc0 = std::max(0, static_cast<int>(std::ceil((cmin - grid.origin[pc]) / cell_size)));
      int kc1 = std::min(dims[pc] - 1, static_cast<int>(std::floor((cmax - grid.origin[pc]) / cell_size)));
      for (int kc = kc0; kc <= kc1; ++kc)
        for (int jb = jb0; jb <= jb1; ++jb) {
          double gb = grid.origin[pb] + jb * cell_size;
          double gc = grid.origin[pc] + kc * cell_size;
          double w0, w1, w2;
          if (!detail::point_in_triangle_2d(gb, gc, va[pb], va[pc], vb[pb],
                                            vb[pc], vc[pb], vc[pc], w0, w1, w2))
            continue;
          double aint = w0 * va[ra] + w1 * vb[ra] + w2 * vc[ra];
          int ia = static_cast<int>(
              std::ceil((aint - grid.origin[ra]) / cell_size));
          if (ia < 0)
            ++crossings[lattice_index(0, jb, kc)];
          else if (ia < dims[ra])
            ++crossings[lattice_index(ia, jb, kc)];
        }
    }
    for (int kc = 0; kc < dims[pc]; ++kc)
      for (int jb = 0; jb < dims[pb]; ++jb) {
        std::uint32_t total = 0;
        for (int ia = 0; ia < dims[ra]; ++ia) {
          std::size_t idx = lattice_index(ia, jb, kc);
          total += crossings[idx];
          if (total % 2 == 1) ++votes[idx];
        }
      }
  };
  parity_pass(0, 1, 2);
  parity_pass(1, 2, 0);
  parity_pass(2, 0, 1);

  for (std::size_t idx = 0; idx < n; ++idx)
    if (votes[idx] >= 2) grid.values[idx] = -grid.values[idx];
  return grid;
}

namespace detail {

inline double trilinear(const SdfGrid& grid, const Vec3& p) {
  double u = (p.x - grid.origin.x) / grid.cell;
  double v = (p.y - grid.origin.y) / grid.cell;
  double w = (p.z - grid.origin.z) / grid.cell;
  auto cell_of = [](double t, int n) {
    int c = static_cast<int>(std::floor(t));
    return std::clamp(c, 0, n - 2);
  };
  int i = cell_of(u, grid.nx), j = cell_of(v, grid.ny), k = cell_of(w, grid.nz);
  double fu = std::clamp(u - i, 0.0, 1.0);
  double fv = std::clamp(v - j, 0.0, 1.0);
  double fw = std::clamp(w - k, 0.0, 1.0);
  double c00 = grid.at(i, j, k) * (1 - fu) + grid.at(i + 1, j, k) * fu;
  double c10 = grid.at(i, j + 1, k) * (1 - fu) + grid.at(i + 1, j + 1, k) * fu;
  double c01 = grid.at(i, j, k + 1) * (1 - fu) + grid.at(i + 1, j, k + 1) * fu;
  double c11 = grid.at(i, j + 1, k + 1) * (1 - fu) + grid.at(i + 1, j + 1, k + 1) * fu;
  double c0 = c00 * (1 - fv) + c10 * fv;
  double c1 = c01 * (1 - fv) + c11 * fv;
  return c0 * (1 - fw) + c1 * fw;
}

}  // namespace detail

// Signed distance at an arbitrary point. Outside the grid box the value
// extrapolates as distance-to-box plus the boundary value.
inline double sdf_distance(const SdfGrid& grid, const Vec3& p) {
  Vec3 lo = grid.origin;
  Vec3 hi = grid.max_corner();
  Vec3 q = cwise_max(lo, cwise_min(hi, p));
  double base = detail::trilinear(grid, q);
  Vec3 gap = p - q;
  return gap == Vec3{} ? base : base + norm(gap);
}

inline bool sdf_covers(const SdfGrid& grid, const Vec3& p) {
  return p.x >= grid.origin.x && p.y >= grid.origin.y && p.z >= grid.origin.z &&
         p.x <= grid.max_corner().x && p.y <= grid.max_corner().y &&
         p.z <= grid.max_corner().z;
}

// Distance by trilinear interpolation, normal by normalized central finite
// difference with a one-cell step (the extrapolation rule above keeps the
// stencil defined near and beyond the grid boundary).
inline SdfSample sdf_query(const SdfGrid& grid, const Vec3& p) {
  SdfSample s;
  s.distance = sdf_distance(grid, p);
  double h = grid.cell;
  Vec3 g{sdf_distance(grid, p + Vec3{h, 0, 0}) - sdf_distance(grid, p - Vec3{h, 0, 0}),
         sdf_distance(grid, p + Vec3{0, h, 0}) - sdf_distance(grid, p - Vec3{0, h, 0}),
         sdf_distance(grid, p + Vec3{0, 0, h}) - sdf_distance(grid, p - Vec3{0, 0, h})};
  double gn = norm(g);
  s.normal = gn > 1e-30 ? g / gn : Vec3{0.0, 0.0, 1.0};
  return s;
}

// ---------------------------------------------------------------------------
// Analytic primitives: exact closed-form signed distance, used as oracles.

struct SpherePrimitive {
  Vec3 center;
  double radius = 1.0;
};

struct BoxPrimitive {
  Vec3 center;
  Vec3 half_extents{1.0, 1.0, 1.0};
};

struct PlanePrimitive {
  Vec3 point;
  Vec3 normal{0.0, 0.0, 1.0};
};

using AnalyticPrimitive =
    std::variant<SpherePrimitive, BoxPrimitive, PlanePrimitive>;

inline SdfSample analytic_sdf(const SpherePrimitive& s, const Vec3& p) {
  if (s.radius <= 0.0) throw std::invalid_argument("sphere radius must be > 0");
  Vec3 d = p - s.center;
  double r = norm(d);
  return {r - s.radius, r > 1e-30 ? d / r : Vec3{0.0, 0.0, 1.0}};
}

inline SdfSample analytic_sdf(const BoxPrimitive& b, const Vec3& p) {
  if (b.half_extents.x <= 0 || b.half_extents.y <= 0 || b.half_extents.z <= 0)
    throw std::invalid_argument("box half-extents must be > 0");
  Vec3 r = p - b.center;
  Vec3 q{std::abs(r.x) - b.half_extents.x, std::abs(r.y) - b.half_extents.y,
         std::abs(r.z) - b.half_extents.z};
  Vec3 qp = cwise_max(q, Vec3{});
  double outside = norm(qp);
  double inside = std::min(std::max({q.x, q.y, q.z}), 0.0);
  SdfSample s;
  s.distance = outside + inside;
  if (outside > 1e-30) {
    Vec3 sign{r.x < 0 ? -1.0 : 1.0, r.y < 0 ? -1.0 : 1.0, r.z < 0 ? -1.0 : 1.0};
    s.normal = Vec3{sign.x * qp.x, sign.y * qp.y, sign.z * qp.z} / outside;
  } else {
    // interior: gradient points along the least-penetrated axis
    int axis = q.x >= q.y && q.x >= q.z ? 0 : (q.y >= q.z ? 1 : 2);
    Vec3 nrm{};
    nrm[axis] = r[axis] < 0 ? -1.0 : 1.0;
    s.normal = nrm;
  }
  return s;
}

inline SdfSample analytic_sdf(const PlanePrimitive& pl, const Vec3& p) {
  Vec3 n = normalized(pl.normal);
  if (n == Vec3{}) throw std::invalid_argument("plane normal must be nonzero");
  return {dot(n, p - pl.point), n};
}

inline SdfSample analytic_sdf(const AnalyticPrimitive& prim, const Vec3& p) {
  return std::visit([&](const auto& g) { return analytic_sdf(g, p); }, prim);
}

// ---------------------------------------------------------------------------
// TSDF persistence: magic "TSDF", version u32, dims, origin, cell size, then
// node values in x-fastest order. Version 1 stores 32-bit floats (the
// interchange format); version 2 stores 64-bit values and is what the scene
// cache uses so a reloaded grid is bit-identical to a freshly built one.

inline void save_sdf_grid(const std::filesystem::path& path,
                          const SdfGrid& grid, bool full_precision = false) {
  AtomicFile file(path);
  std::ostream& os = file.stream();
  detail::write_magic(os, "TSDF");
  detail::write_le<std::uint32_t>(os, full_precision ? 2 : 1);
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(grid.nx));
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(grid.ny));
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(grid.nz));
  detail::write_le<double>(os, grid.origin.x);
  detail::write_le<double>(os, grid.origin.y);
  detail::write_le<double>(os, grid.origin.z);
  detail::write_le<double>(os, grid.cell);
  for (double v : grid.values) {
    if (full_precision)
      detail::write_le<double>(os, v);
    else
      detail::write_le<float>(os, static_cast<float>(v));
  }
  file.commit();
}

inline SdfGrid load_sdf_grid(const std::filesystem::path& path) {
  std::ifstream is = open_input(path);
  detail::expect_magic(is, "TSDF", path.string());
  std::uint32_t version = detail::read_le<std::uint32_t>(is);
  if (version != 1 && version != 2)
    throw std::runtime_error(path.string() + ": unsupported TSDF version " +
                             std::to_string(version));
  SdfGrid grid;
  grid.nx = static_cast<int>(detail::read_le<std::uint32_t>(is));
  grid.ny = static_cast<int>(detail::read_le<std::uint32_t>(is));
  grid.nz = static_cast<int>(detail::read_le<std::uint32_t>(is));
  grid.origin.x = detail::read_le<double>(is);
  grid.origin.y = detail::read_le<double>(is);
  grid.origin.z = detail::read_le<double>(is);
  grid.cell = detail::read_le<double>(is);
  if (grid.nx < 2 || grid.ny < 2 || grid.nz < 2 || grid.cell <= 0.0)
    throw std::runtime_error(path.string() + ": invalid TSDF header");
  std::size_t n = grid.node_count();
  grid.values.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    grid.values[i] = version == 2
                         ? detail::read_le<double>(is)
                         : static_cast<double>(detail::read_le<float>(is));
  return grid;
}

}  // namespace taxelsim
