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
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "taxelsim/contact.hpp"
#include "taxelsim/io.hpp"
#include "taxelsim/pad.hpp"
#include "taxelsim/rng.hpp"
#include "taxelsim/vec.hpp"

namespace taxelsim {

// 4-channel point set: world-frame XYZ plus a scalar reading channel
// (zero for visual points).
struct PointCloud {
  std::vector<Vec3> positions;
  std::vector<double> readings;

  std::size_t size() const { return positions.size(); }
  void push_back(const Vec3& p, double reading) {
    positions.push_back(p);
    readings.push_back(reading);
  }
};

// 5-channel merged observation: XYZ, reading, modality flag (0 visual,
// 1 tactile), visual rows first.
struct MergedCloud {
  std::vector<Vec3> positions;
  std::vector<double> readings;
  std::vector<std::uint8_t> modality;

  std::size_t size() const { return positions.size(); }
};

struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<float> depth;  // row-major, meters, 0 = invalid
  double fx = 0.0, fy = 0.0, cx = 0.0, cy = 0.0;
  Quat rotation;     // camera-to-world
  Vec3 translation;

  float at(int u, int v) const {
    return depth[static_cast<std::size_t>(v) * width + u];
  }
};

struct NoiseConfig {
  double sigma = 0.0;       // noise level; coordinate std is 0.01*sigma
  std::uint64_t seed = 0;
};

// Back-projects valid depth pixels to camera space and transforms them into
// the world frame. Pixel (u,v) with depth z maps to
// ((u-cx) z / fx, (v-cy) z / fy, z).
inline PointCloud backproject_depth(const DepthImage& img) {
  if (img.fx <= 0.0 || img.fy <= 0.0)
    throw std::runtime_error("backproject: intrinsics must be positive");
  PointCloud cloud;
  for (int v = 0; v < img.height; ++v)
    for (int u = 0; u < img.width; ++u) {
      double z = img.at(u, v);
      if (!(z > 0.0)) continue;
      Vec3 cam{(u - img.cx) * z / img.fx, (v - img.cy) * z / img.fy, z};
      cloud.push_back(rotate(img.rotation, cam) + img.translation, 0.0);
    }
  return cloud;
}

// Keeps points inside the closed box, preserving order.
inline PointCloud crop_workspace(const PointCloud& cloud, const Aabb& box) {
  if (!box.valid()) throw std::runtime_error("crop: invalid box");
  PointCloud out;
  for (std::size_t i = 0; i < cloud.size(); ++i)
    if (box.contains(cloud.positions[i]))
      out.push_back(cloud.positions[i], cloud.readings[i]);
  return out;
}

// Round-half-even, the rounding rule the downsampling indices are pinned to.
inline std::int64_t round_half_even(double v) {
  double f = std::floor(v);
  double frac = v - f;
  auto lo = static_cast<std::int64_t>(f);
  if (frac < 0.5) return lo;
  if (frac > 0.5) return lo + 1;
  return lo % 2 == 0 ? lo : lo + 1;
}

// Selected source indices for downsampling N points to n by uniform
// lin-space indexing; pads by repeating the last index when N <= n.
inline std::vector<std::size_t> downsample_indices(std::size_t n_points,
                                                   std::size_t target) {
  if (n_points == 0) throw std::runtime_error("downsample: empty input cloud");
  if (target < 1) throw std::runtime_error("downsample: target must be >= 1");
  std::vector<std::size_t> idx;
  idx.reserve(target);
  if (n_points <= target) {
    for (std::size_t i = 0; i < n_points; ++i) idx.push_back(i);
    while (idx.size() < target) idx.push_back(n_points - 1);
  } else if (target == 1) {
    idx.push_back(0);
  } else {
    for (std::size_t j = 0; j < target; ++j) {
      double v = static_cast<double>(j) *
                 static_cast<double>(n_points - 1) /
                 static_cast<double>(target - 1);
      idx.push_back(static_cast<std::size_t>(round_half_even(v)));
    }
  }
  return idx;
}

inline PointCloud downsample_uniform(const PointCloud& cloud, std::size_t n) {
  PointCloud out;
  for (std::size_t i : downsample_indices(cloud.size(), n))
    out.push_back(cloud.positions[i], cloud.readings[i]);
  return out;
}

// Multiplicative coordinate jitter x <- x (1 + g), g ~ N(0, 0.01 sigma),
// drawn per (point, axis) from a counter-based generator so results do not
// depend on evaluation order. Readings are untouched.
inline PointCloud inject_noise(const PointCloud& cloud, const NoiseConfig& cfg) {
  if (cfg.sigma < 0.0) throw std::runtime_error("noise: sigma must be >= 0");
  if (cfg.sigma == 0.0) return cloud;
  PointCloud out = cloud;
  double std_dev = 0.01 * cfg.sigma;
  for (std::size_t i = 0; i < out.size(); ++i)
    for (int axis = 0; axis < 3; ++axis) {
      double g = std_dev * counter_normal(cfg.seed, i, static_cast<std::uint64_t>(axis));
      out.positions[i][axis] *= 1.0 + g;
    }
  return out;
}

// Tactile points: taxel world positions with their normalized force readings,
// in lattice order.
inline PointCloud tactile_to_points(const TaxelWorldBatch& taxels,
                                    const TactileFrame& frame) {
  if (frame.count() != taxels.count() || frame.rows != taxels.rows)
    throw std::runtime_error("tactile_to_points: frame/taxel shape mismatch");
  PointCloud cloud;
  cloud.positions = taxels.positions;
  cloud.readings = frame.force;
  return cloud;
}

// Concatenates visual-then-tactile with the modality flag channel. Visual
// rows carry reading 0 and flag 0; tactile rows keep their readings, flag 1.
// Coordinates are never transformed, so cross-modal distances are preserved.
inline MergedCloud merge_visuo_tactile(const PointCloud& visual,
                                       const PointCloud& tactile) {
  MergedCloud merged;
  merged.positions.reserve(visual.size() + tactile.size());
  merged.readings.reserve(visual.size() + tactile.size());
  merged.modality.reserve(visual.size() + tactile.size());
  for (std::size_t i = 0; i < visual.size(); ++i) {
    merged.positions.push_back(visual.positions[i]);
    merged.readings.push_back(0.0);
    merged.modality.push_back(0);
  }
  for (std::size_t i = 0; i < tactile.size(); ++i) {
    merged.positions.push_back(tactile.positions[i]);
    merged.readings.push_back(tactile.readings[i]);
    merged.modality.push_back(1);
  }
  return merged;
}

// Farthest-point sampling. Quadratic; kept only as the speed baseline the
// uniform downsampler is benchmarked against.
inline PointCloud farthest_point_sample(const PointCloud& cloud, std::size_t n,
                                        std::size_t start_index = 0) {
  if (cloud.size() == 0) throw std::runtime_error("fps: empty input cloud");
  n = std::min(n, cloud.size());
  std::vector<double> nearest(cloud.size(),
                              std::numeric_limits<double>::max());
  PointCloud out;
  std::size_t current = start_index;
  for (std::size_t picked = 0; picked < n; ++picked) {
    out.push_back(cloud.positions[current], cloud.readings[current]);
    std::size_t next = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      double d = norm_squared(cloud.positions[i] - cloud.positions[current]);
      if (d < nearest[i]) nearest[i] = d;
      if (nearest[i] > best) {
        best = nearest[i];
        next = i;
      }
    }
    current = next;
  }
  return out;
}

// ---------------------------------------------------------------------------
// TPCD point-cloud file: magic "TPCD", version u32, point count u32, channel
// count u32 (4 or 5), then f32 rows. Plus a CSV debug export.

inline void save_tpcd(const std::filesystem::path& path, const PointCloud& cloud) {
  AtomicFile file(path);
  std::ostream& os = file.stream();
  detail::write_magic(os, "TPCD");
  detail::write_le<std::uint32_t>(os, 1);
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(cloud.size()));
  detail::write_le<std::uint32_t>(os, 4);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    detail::write_le<float>(os, static_cast<float>(cloud.positions[i].x));
    detail::write_le<float>(os, static_cast<float>(cloud.positions[i].y));
    detail::write_le<float>(os, static_cast<float>(cloud.positions[i].z));
    detail::write_le<float>(os, static_cast<float>(cloud.readings[i]));
  }
  file.commit();
}

inline void save_tpcd(const std::filesystem::path& path, const MergedCloud& cloud) {
  AtomicFile file(path);
  std::ostream& os = file.stream();
  detail::write_magic(os, "TPCD");
  detail::write_le<std::uint32_t>(os, 1);
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(cloud.size()));
  detail::write_le<std::uint32_t>(os, 5);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    detail::write_le<float>(os, static_cast<float>(cloud.positions[i].x));
    detail::write_le<float>(os, static_cast<float>(cloud.positions[i].y));
    detail::write_le<float>(os, static_cast<float>(cloud.positions[i].z));
    detail::write_le<float>(os, static_cast<float>(cloud.readings[i]));
    detail::write_le<float>(os, static_cast<float>(cloud.modality[i]));
  }
  file.commit();
}

struct TpcdContents {
  int channels = 0;
  PointCloud cloud;                    // channels 0..3
  std::vector<std::uint8_t> modality;  // channel 4 when channels == 5
};

inline TpcdContents load_tpcd(const std::filesystem::path& path) {
  std::ifstream is = open_input(path);
  detail::expect_magic(is, "TPCD", path.string());
  std::uint32_t version = detail::read_le<std::uint32_t>(is);
  if (version != 1)
    throw std::runtime_error(path.string() + ": unsupported TPCD version");
  std::uint32_t count = detail::read_le<std::uint32_t>(is);
  std::uint32_t channels = detail::read_le<std::uint32_t>(is);
  if (channels != 4 && channels != 5)
    throw std::runtime_error(path.string() + ": TPCD channel count must be 4 or 5");
  TpcdContents out;
  out.channels = static_cast<int>(channels);
  for (std::uint32_t i = 0; i < count; ++i) {
    Vec3 p{detail::read_le<float>(is), detail::read_le<float>(is),
           detail::read_le<float>(is)};
    double reading = detail::read_le<float>(is);
    out.cloud.push_back(p, reading);
    if (channels == 5)
      out.modality.push_back(detail::read_le<float>(is) != 0.0f ? 1 : 0);
  }
  return out;
}

inline void save_cloud_csv(const std::filesystem::path& path,
                           const MergedCloud& cloud) {
  AtomicFile file(path, /*binary=*/false);
  std::ostream& os = file.stream();
  os.precision(9);
  os << "x,y,z,reading,flag\n";
  for (std::size_t i = 0; i < cloud.size(); ++i)
    os << cloud.positions[i].x << "," << cloud.positions[i].y << ","
       << cloud.positions[i].z << "," << cloud.readings[i] << ","
       << static_cast<int>(cloud.modality[i]) << "\n";
  file.commit();
}

// ---------------------------------------------------------------------------
// Depth raster file used when episodes reference recorded depth streams:
// magic "TDPT", version u32, width u32, height u32, then f32 depths
// row-major (intrinsics and camera pose live in the scene config).

inline void save_depth_raster(const std::filesystem::path& path,
                              const DepthImage& img) {
  AtomicFile file(path);
  std::ostream& os = file.stream();
  detail::write_magic(os, "TDPT");
  detail::write_le<std::uint32_t>(os, 1);
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(img.width));
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(img.height));
  for (float z : img.depth) detail::write_le<float>(os, z);
  file.commit();
}

// Loads the raster only; caller fills intrinsics/pose from the scene.
inline DepthImage load_depth_raster(const std::filesystem::path& path) {
  std::ifstream is = open_input(path);
  detail::expect_magic(is, "TDPT", path.string());
  if (detail::read_le<std::uint32_t>(is) != 1)
    throw std::runtime_error(path.string() + ": unsupported TDPT version");
  DepthImage img;
  img.width = static_cast<int>(detail::read_le<std::uint32_t>(is));
  img.height = static_cast<int>(detail::read_le<std::uint32_t>(is));
  if (img.width < 1 || img.height < 1)
    throw std::runtime_error(path.string() + ": invalid TDPT header");
  img.depth.resize(static_cast<std::size_t>(img.width) * img.height);
  for (float& z : img.depth) z = detail::read_le<float>(is);
  return img;
}

}  // namespace taxelsim
