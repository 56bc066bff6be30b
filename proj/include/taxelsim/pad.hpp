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

#include <cmath>
#include <filesystem>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "taxelsim/io.hpp"
#include "taxelsim/mesh.hpp"
#include "taxelsim/vec.hpp"

namespace taxelsim {

// Orthonormal frame of the sensing face of a slab-like pad mesh.
struct FaceFrame {
  Vec3 centroid;
  Vec3 axis_u;
  Vec3 axis_v;
  Vec3 outward_normal;
  double extent_u = 0.0;
  double extent_v = 0.0;
  double thickness = 0.0;
};

// Rest poses of the sensing-unit lattice on a pad, in the pad's local frame.
struct TaxelArray {
  int rows = 0;
  int cols = 0;
  std::vector<Vec3> positions_local;  // rows*cols, row-major
  Quat orientation_local;             // one fixed orientation for all taxels
  double pitch_u = 0.0;
  double pitch_v = 0.0;
  double margin = 0.0;

  int count() const { return rows * cols; }
};

// World-space positions and velocities of every taxel of one pad.
struct TaxelWorldBatch {
  int rows = 0;
  int cols = 0;
  std::vector<Vec3> positions;
  std::vector<Vec3> velocities;

  int count() const { return rows * cols; }
};

// All taxels share a fixed local orientation: a rotation of -pi about z.
inline constexpr Quat kTaxelOrientation{0.0, 0.0, 0.0, -1.0};

// Identifies the sensing face of a thin slab: the thickness axis is the
// shortest bounding-box axis, the face side is picked by `side_hint`
// (defaults to the +thickness axis).
inline FaceFrame detect_contact_face(const TriangleMesh& pad_mesh,
                                     const Vec3& side_hint = Vec3{}) {
  Aabb box = mesh_bounds(pad_mesh);
  Vec3 ext = box.extent();
  int order[3] = {0, 1, 2};
  std::sort(order, order + 3, [&](int a, int b) { return ext[a] < ext[b]; });
  int thick_axis = order[0];
  double second = ext[order[1]];
  if (!(ext[thick_axis] <= 0.5 * second))
    throw std::runtime_error("pad not slab-like: thickness " +
                             std::to_string(ext[thick_axis]) +
                             " exceeds half of second-shortest extent " +
                             std::to_string(second));

  // Face axes are the two non-thickness axes in ascending world-axis order.
  int ua = thick_axis == 0 ? 1 : 0;
  int va = thick_axis == 2 ? 1 : 2;

  Vec3 n{};
  n[thick_axis] = 1.0;
  if (dot(side_hint, n) < 0.0) n[thick_axis] = -1.0;

  FaceFrame face;
  face.axis_u = Vec3{};
  face.axis_u[ua] = 1.0;
  face.axis_v = Vec3{};
  face.axis_v[va] = 1.0;
  face.outward_normal = n;
  // keep {u, v, n} right-handed without disturbing the u/v extent mapping
  if (dot(cross(face.axis_u, face.axis_v), n) < 0.0) face.axis_v = -face.axis_v;
  face.extent_u = ext[ua];
  face.extent_v = ext[va];
  face.thickness = ext[thick_axis];
  face.centroid = box.center() + n * (face.thickness * 0.5);
  return face;
}

struct TaxelSampleOptions {
  Vec3 side_hint{};             // forwarded to detect_contact_face
  double nominal_pitch = 2e-3;  // warn when derived pitch strays > 10%
  std::vector<std::string>* warnings = nullptr;
};

// Lays an R x C lattice over the contact face (rows along axis_u, columns
// along axis_v), lifts each node 2x thickness along the outward normal and
// ray-casts back onto the mesh, so taxels land on the true surface also for
// gently curved pads.
inline TaxelArray sample_taxels(const TriangleMesh& pad_mesh, int rows,
                                int cols, double margin,
                                const TaxelSampleOptions& opts = {}) {
  if (rows < 2 || cols < 2)
    throw std::runtime_error("taxel lattice needs rows >= 2 and cols >= 2");
  FaceFrame face = detect_contact_face(pad_mesh, opts.side_hint);
  double span_u = face.extent_u - 2.0 * margin;
  double span_v = face.extent_v - 2.0 * margin;
  if (span_u <= 0.0 || span_v <= 0.0)
    throw std::runtime_error("margin " + std::to_string(margin) +
                             " leaves no usable face area");

  TaxelArray taxels;
  taxels.rows = rows;
  taxels.cols = cols;
  taxels.margin = margin;
  taxels.pitch_u = span_u / (rows - 1);
  taxels.pitch_v = span_v / (cols - 1);
  taxels.orientation_local = kTaxelOrientation;
  taxels.positions_local.reserve(static_cast<std::size_t>(rows) * cols);

  if (opts.warnings && opts.nominal_pitch > 0.0) {
    for (double pitch : {taxels.pitch_u, taxels.pitch_v}) {
      if (std::abs(pitch - opts.nominal_pitch) > 0.1 * opts.nominal_pitch) {
        std::ostringstream msg;
        msg << "derived pitch " << pitch << " m deviates more than 10% from "
            << "nominal " << opts.nominal_pitch << " m";
        opts.warnings->push_back(msg.str());
        break;
      }
    }
  }

  double lift = 2.0 * face.thickness;
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      Vec3 node = face.centroid +
                  face.axis_u * (-0.5 * span_u + i * taxels.pitch_u) +
                  face.axis_v * (-0.5 * span_v + j * taxels.pitch_v);
      Vec3 start = node + face.outward_normal * lift;
      auto hit = ray_cast(pad_mesh, start, -face.outward_normal);
      if (!hit)
        throw std::runtime_error("taxel ray missed pad surface at lattice (" +
                                 std::to_string(i) + "," + std::to_string(j) +
                                 ")");
      taxels.positions_local.push_back(hit->point);
    }
  }
  return taxels;
}

// x_i^w = R x_i^l + p,  xdot_i^w = omega x (R x_i^l) + v.
inline TaxelWorldBatch taxel_world_state(const TaxelArray& taxels,
                                         const RigidState& pad_state) {
  TaxelWorldBatch batch;
  batch.rows = taxels.rows;
  batch.cols = taxels.cols;
  batch.positions.reserve(taxels.positions_local.size());
  batch.velocities.reserve(taxels.positions_local.size());
  for (const Vec3& local : taxels.positions_local) {
    Vec3 arm = rotate(pad_state.rotation, local);
    batch.positions.push_back(arm + pad_state.translation);
    batch.velocities.push_back(cross(pad_state.angular_velocity, arm) +
                               pad_state.linear_velocity);
  }
  return batch;
}

// ---------------------------------------------------------------------------
// Plain-text taxel layout, so measured hardware layouts can replace sampled
// ones. Format: header lines (rows/cols/pitch/margin/orientation), then one
// "x y z" line per taxel in row-major order.

inline void save_taxels(const std::filesystem::path& path,
                        const TaxelArray& taxels) {
  AtomicFile file(path, /*binary=*/false);
  std::ostream& os = file.stream();
  os.precision(17);
  os << "taxelsim-taxels 1\n";
  os << "rows " << taxels.rows << "\n";
  os << "cols " << taxels.cols << "\n";
  os << "pitch " << taxels.pitch_u << " " << taxels.pitch_v << "\n";
  os << "margin " << taxels.margin << "\n";
  const Quat& q = taxels.orientation_local;
  os << "orientation " << q.w << " " << q.x << " " << q.y << " " << q.z << "\n";
  for (const Vec3& p : taxels.positions_local)
    os << p.x << " " << p.y << " " << p.z << "\n";
  file.commit();
}

inline TaxelArray load_taxels(const std::filesystem::path& path) {
  std::ifstream is = open_input(path, /*binary=*/false);
  std::string tag;
  int version = 0;
  if (!(is >> tag >> version) || tag != "taxelsim-taxels" || version != 1)
    throw std::runtime_error(path.string() + ": not a taxel layout file");
  TaxelArray taxels;
  auto expect = [&](const char* key) {
    if (!(is >> tag) || tag != key)
      throw std::runtime_error(path.string() + ": expected key '" + key + "'");
  };
  expect("rows");
  is >> taxels.rows;
  expect("cols");
  is >> taxels.cols;
  expect("pitch");
  is >> taxels.pitch_u >> taxels.pitch_v;
  expect("margin");
  is >> taxels.margin;
  expect("orientation");
  Quat& q = taxels.orientation_local;
  is >> q.w >> q.x >> q.y >> q.z;
  if (!is || taxels.rows < 1 || taxels.cols < 1)
    throw std::runtime_error(path.string() + ": malformed taxel header");
  taxels.positions_local.resize(static_cast<std::size_t>(taxels.rows) *
                                taxels.cols);
  for (Vec3& p : taxels.positions_local)
    if (!(is >> p.x >> p.y >> p.z))
      throw std::runtime_error(path.string() + ": truncated taxel list");
  return taxels;
}

}  // namespace taxelsim
