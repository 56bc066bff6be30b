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
#include <vector>

#include "taxelsim/io.hpp"
#include "taxelsim/pad.hpp"
#include "taxelsim/sdf.hpp"
#include "taxelsim/vec.hpp"

namespace taxelsim {

// Kelvin-Voigt contact constants: a linear spring k_n and viscous damper k_d
// in parallel.
struct ContactParams {
  double k_n = 1.0;
  double k_d = 3e-3;
  bool clamp_negative = true;
};

// Per-taxel contact state. depth >= 0 with 0 meaning no contact; the normal
// is the outward object normal at the query point.
struct ContactSample {
  double depth = 0.0;
  double depth_rate = 0.0;
  Vec3 normal{0.0, 0.0, 1.0};
  double force = 0.0;
};

// Two-channel taxel image: channel 0 penetration depth (m), channel 1 normal
// force. Values are raw until normalize_frame is applied.
struct TactileFrame {
  int rows = 0;
  int cols = 0;
  std::vector<double> depth;
  std::vector<double> force;
  std::vector<std::uint8_t> saturated;  // per-taxel trust flags
  bool normalized = false;
  int timestamp = 0;
  int clamp_events = 0;

  int count() const { return rows * cols; }
  int saturated_count() const {
    int n = 0;
    for (std::uint8_t s : saturated) n += s;
    return n;
  }
};

// Normal force magnitude from penetration depth (pre-clamped, >= 0) and
// penetration-depth rate (positive while approaching). Zero depth means no
// contact and produces zero force regardless of rate.
inline double contact_force(double depth, double depth_rate,
                            const ContactParams& params) {
  if (depth <= 0.0) return 0.0;
  double f = params.k_n * depth + params.k_d * depth_rate;
  return params.clamp_negative ? std::max(0.0, f) : f;
}

struct StepOptions {
  // Penetrations deeper than this raise the per-taxel saturation flag;
  // scenes set it to the SDF padding band.
  double saturation_depth = std::numeric_limits<double>::infinity();
};

// Contact state of one taxel against an object SDF. The SDF is built at the
// object's rest pose; `object_state` maps rest pose to world, so the query
// point is pulled back into the object frame and the normal pushed forward.
inline ContactSample contact_sample(const Vec3& taxel_pos,
                                    const Vec3& taxel_vel,
                                    const SdfGrid& object_sdf,
                                    const RigidState& object_state,
                                    const ContactParams& params) {
  Vec3 local = inverse_transform_point(object_state, taxel_pos);
  SdfSample sdf = sdf_query(object_sdf, local);
  ContactSample out;
  out.normal = rotate(object_state.rotation, sdf.normal);
  out.depth = std::max(0.0, -sdf.distance);
  Vec3 surface_vel = point_velocity(object_state, taxel_pos);
  // positive while the taxel closes in on the object
  out.depth_rate = -dot(out.normal, taxel_vel - surface_vel);
  out.force = contact_force(out.depth, out.depth_rate, params);
  return out;
}

// Evaluates the whole taxel lattice against the object and packs the result
// into a raw two-channel frame in row-major lattice order. Pure per taxel:
// any evaluation order produces the identical frame.
inline TactileFrame step_tactile(const TaxelWorldBatch& taxels,
                                 const SdfGrid& object_sdf,
                                 const RigidState& object_state,
                                 const ContactParams& params,
                                 const StepOptions& opts = {}) {
  TactileFrame frame;
  frame.rows = taxels.rows;
  frame.cols = taxels.cols;
  int n = taxels.count();
  frame.depth.resize(n);
  frame.force.resize(n);
  frame.saturated.assign(n, 0);
  for (int i = 0; i < n; ++i) {
    ContactSample s = contact_sample(taxels.positions[i], taxels.velocities[i],
                                     object_sdf, object_state, params);
    frame.depth[i] = s.depth;
    frame.force[i] = s.force;
    if (s.depth > opts.saturation_depth) frame.saturated[i] = 1;
  }
  return frame;
}

// Rescales both channels to [0,1] by fixed maxima, clamping out-of-range
// values and counting the clamp events.
inline TactileFrame normalize_frame(const TactileFrame& frame,
                                    double depth_max, double force_max) {
  if (depth_max <= 0.0 || force_max <= 0.0)
    throw std::runtime_error("normalize_frame: maxima must be > 0");
  TactileFrame out = frame;
  out.normalized = true;
  out.clamp_events = 0;
  auto rescale = [&](std::vector<double>& channel, double max_value) {
    for (double& v : channel) {
      double scaled = v / max_value;
      if (scaled < 0.0 || scaled > 1.0) ++out.clamp_events;
      v = clamp01(scaled);
    }
  };
  rescale(out.depth, depth_max);
  rescale(out.force, force_max);
  return out;
}

// ---------------------------------------------------------------------------
// TFRM frame-sequence file: magic "TFRM", header (rows, cols, channels,
// frame count, dt), then frames as little-endian f32, channel-major.
// channels is 2 (depth, force) or 4 (two zero channels appended for
// tensor-shape compatibility).

inline void save_tfrm(const std::filesystem::path& path,
                      const std::vector<TactileFrame>& frames, double dt,
                      int channels = 2) {
  if (channels != 2 && channels != 4)
    throw std::runtime_error("TFRM channels must be 2 or 4");
  if (frames.empty()) throw std::runtime_error("TFRM: no frames to write");
  AtomicFile file(path);
  std::ostream& os = file.stream();
  detail::write_magic(os, "TFRM");
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(frames[0].rows));
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(frames[0].cols));
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(channels));
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(frames.size()));
  detail::write_le<double>(os, dt);
  for (const TactileFrame& f : frames) {
    if (f.rows != frames[0].rows || f.cols != frames[0].cols)
      throw std::runtime_error("TFRM: inconsistent frame shapes");
    for (double v : f.depth) detail::write_le<float>(os, static_cast<float>(v));
    for (double v : f.force) detail::write_le<float>(os, static_cast<float>(v));
    for (int c = 2; c < channels; ++c)
      for (int i = 0; i < f.count(); ++i) detail::write_le<float>(os, 0.0f);
  }
  file.commit();
}

struct TfrmContents {
  int rows = 0;
  int cols = 0;
  int channels = 0;
  double dt = 0.0;
  std::vector<TactileFrame> frames;
};

inline TfrmContents load_tfrm(const std::filesystem::path& path) {
  std::ifstream is = open_input(path);
  detail::expect_magic(is, "TFRM", path.string());
  TfrmContents out;
  out.rows = static_cast<int>(detail::read_le<std::uint32_t>(is));
  out.cols = static_cast<int>(detail::read_le<std::uint32_t>(is));
  out.channels = static_cast<int>(detail::read_le<std::uint32_t>(is));
  std::uint32_t count = detail::read_le<std::uint32_t>(is);
  out.dt = detail::read_le<double>(is);
  if (out.rows < 1 || out.cols < 1 || (out.channels != 2 && out.channels != 4))
    throw std::runtime_error(path.string() + ": invalid TFRM header");
  int n = out.rows * out.cols;
  out.frames.resize(count);
  for (std::uint32_t f = 0; f < count; ++f) {
    TactileFrame& frame = out.frames[f];
    frame.rows = out.rows;
    frame.cols = out.cols;
    frame.timestamp = static_cast<int>(f);
    frame.depth.resize(n);
    frame.force.resize(n);
    for (int i = 0; i < n; ++i) frame.depth[i] = detail::read_le<float>(is);
    for (int i = 0; i < n; ++i) frame.force[i] = detail::read_le<float>(is);
    for (int c = 2; c < out.channels; ++c)
      for (int i = 0; i < n; ++i) detail::read_le<float>(is);
  }
  return out;
}

}  // namespace taxelsim
