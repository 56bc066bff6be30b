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

#include <atomic>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "taxelsim/cloud.hpp"
#include "taxelsim/rng.hpp"
#include "taxelsim/scene.hpp"

namespace taxelsim {

// Kinematic episode: per-step pose and twist for every finger pad and the
// object. Poses drive the contact; no dynamics are integrated.
struct Trajectory {
  double dt = 0.0;
  std::vector<std::vector<RigidState>> pads;  // [finger][step]
  std::vector<RigidState> object;             // [step]

  std::size_t steps() const { return object.size(); }

  void validate() const {
    if (!(dt > 0.0)) throw std::runtime_error("trajectory: dt must be > 0");
    if (object.empty()) throw std::runtime_error("trajectory: no steps");
    for (const auto& track : pads)
      if (track.size() != object.size())
        throw std::runtime_error("trajectory: track lengths differ");
  }
};

namespace detail {

// Twists absent from a trajectory file are reconstructed by central finite
// differences of the poses (one-sided at the ends).
inline void reconstruct_twists(std::vector<RigidState>& track, double dt) {
  std::size_t n = track.size();
  if (n < 2) return;
  std::vector<Vec3> lin(n), ang(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t a = k == 0 ? 0 : k - 1;
    std::size_t b = k + 1 == n ? n - 1 : k + 1;
    double span = static_cast<double>(b - a) * dt;
    lin[k] = (track[b].translation - track[a].translation) / span;
    Quat rel = track[b].rotation * conjugate(track[a].rotation);
    ang[k] = quat_log_vector(rel) / span;
  }
  for (std::size_t k = 0; k < n; ++k) {
    track[k].linear_velocity = lin[k];
    track[k].angular_velocity = ang[k];
  }
}

}  // namespace detail

// Trajectory CSV: header "t,body_id,qw,qx,qy,qz,px,py,pz[,wx,wy,wz,vx,vy,vz]",
// one row per body per step. Body ids are "pad0".."padN" and "object".
inline Trajectory load_trajectory_csv(const std::filesystem::path& path,
                                      int expected_fingers = -1) {
  std::ifstream is = open_input(path, /*binary=*/false);
  std::string line;
  if (!std::getline(is, line))
    throw std::runtime_error(path.string() + ": empty trajectory file");
  std::string header = line;
  header.erase(std::remove_if(header.begin(), header.end(),
                              [](char c) { return c == ' ' || c == '\r'; }),
               header.end());
  bool has_twist = header.find(",wx") != std::string::npos;
  if (header.rfind("t,body_id", 0) != 0)
    throw std::runtime_error(path.string() + ": missing trajectory header");

  struct Row {
    double t;
    RigidState state;
  };
  std::map<std::string, std::vector<Row>> tracks;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    Row row;
    std::string body;
    Quat& q = row.state.rotation;
    Vec3& p = row.state.translation;
    if (!(ls >> row.t >> body >> q.w >> q.x >> q.y >> q.z >> p.x >> p.y >> p.z))
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": malformed trajectory row");
    if (has_twist) {
      Vec3& w = row.state.angular_velocity;
      Vec3& v = row.state.linear_velocity;
      if (!(ls >> w.x >> w.y >> w.z >> v.x >> v.y >> v.z))
        throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                 ": missing twist columns");
    }
    double qn = norm(q);
    if (std::abs(qn - 1.0) > 1e-6)
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": quaternion is not unit length");
    q = normalized(q);
    tracks[body].push_back(row);
  }
  auto object_it = tracks.find("object");
  if (object_it == tracks.end())
    throw std::runtime_error(path.string() + ": no rows for body 'object'");

  Trajectory traj;
  std::size_t steps = object_it->second.size();
  if (steps >= 2)
    traj.dt = object_it->second[1].t - object_it->second[0].t;
  else
    traj.dt = 1.0;
  if (!(traj.dt > 0.0))
    throw std::runtime_error(path.string() + ": timestamps must increase");

  auto take_track = [&](const std::string& body) {
    auto it = tracks.find(body);
    if (it == tracks.end())
      throw std::runtime_error(path.string() + ": no rows for body '" + body + "'");
    if (it->second.size() != steps)
      throw std::runtime_error(path.string() + ": body '" + body +
                               "' has a different step count");
    std::vector<RigidState> track;
    track.reserve(steps);
    for (const Row& r : it->second) track.push_back(r.state);
    if (!has_twist) detail::reconstruct_twists(track, traj.dt);
    return track;
  };

  traj.object = take_track("object");
  int fingers = 0;
  while (tracks.count("pad" + std::to_string(fingers))) ++fingers;
  if (expected_fingers >= 0 && fingers != expected_fingers)
    throw std::runtime_error(path.string() + ": trajectory has " +
                             std::to_string(fingers) + " pad tracks, scene has " +
                             std::to_string(expected_fingers));
  for (int f = 0; f < fingers; ++f)
    traj.pads.push_back(take_track("pad" + std::to_string(f)));

  traj.validate();
  return traj;
}

inline void save_trajectory_csv(const std::filesystem::path& path,
                                const Trajectory& traj) {
  AtomicFile file(path, /*binary=*/false);
  std::ostream& os = file.stream();
  os.precision(17);
  os << "t,body_id,qw,qx,qy,qz,px,py,pz,wx,wy,wz,vx,vy,vz\n";
  auto put = [&](double t, const std::string& body, const RigidState& s) {
    os << t << "," << body << "," << s.rotation.w << "," << s.rotation.x << ","
       << s.rotation.y << "," << s.rotation.z << "," << s.translation.x << ","
       << s.translation.y << "," << s.translation.z << ","
       << s.angular_velocity.x << "," << s.angular_velocity.y << ","
       << s.angular_velocity.z << "," << s.linear_velocity.x << ","
       << s.linear_velocity.y << "," << s.linear_velocity.z << "\n";
  };
  for (std::size_t k = 0; k < traj.steps(); ++k) {
    double t = static_cast<double>(k) * traj.dt;
    for (std::size_t f = 0; f < traj.pads.size(); ++f)
      put(t, "pad" + std::to_string(f), traj.pads[f][k]);
    put(t, "object", traj.object[k]);
  }
  file.commit();
}

struct StepStats {
  int contact_count = 0;   // taxels with positive depth, all fingers
  double max_force = 0.0;  // raw (pre-normalization) peak force
  int saturated = 0;
};

struct EpisodeOutput {
  std::vector<std::vector<TactileFrame>> frames;  // [finger][step], normalized
  std::vector<MergedCloud> clouds;                // [step], when camera present
  std::vector<StepStats> stats;                   // [step]
  std::string error;

  bool ok() const { return error.empty(); }
};

struct RunOptions {
  bool keep_frames = true;
  bool keep_clouds = true;
};

namespace detail {

inline DepthImage load_step_depth(const CameraConfig& cam, int step) {
  char buf[4096];
  std::snprintf(buf, sizeof(buf), cam.depth_pattern.c_str(), step);
  DepthImage img = load_depth_raster(buf);
  img.fx = cam.fx; img.fy = cam.fy; img.cx = cam.cx; img.cy = cam.cy;
  img.rotation = cam.rotation;
  img.translation = cam.translation;
  return img;
}

}  // namespace detail

// Replays one trajectory through the tactile (and optional visual) pipeline.
// Contact anomalies only raise per-taxel saturation flags; the episode always
// runs to the final step.
inline EpisodeOutput run_episode(const Scene& scene, const Trajectory& traj,
                                 const RunOptions& opts = {}) {
  traj.validate();
  if (static_cast<int>(traj.pads.size()) != scene.finger_count())
    throw std::runtime_error("trajectory finger count does not match scene");

  EpisodeOutput out;
  std::size_t steps = traj.steps();
  int fingers = scene.finger_count();
  if (opts.keep_frames) out.frames.resize(fingers);
  out.stats.resize(steps);

  StepOptions step_opts;
  step_opts.saturation_depth = scene.saturation_depth;

  for (std::size_t k = 0; k < steps; ++k) {
    PointCloud tactile_points;
    StepStats& stats = out.stats[k];
    for (int f = 0; f < fingers; ++f) {
      TaxelWorldBatch world = taxel_world_state(scene.taxels[f], traj.pads[f][k]);
      TactileFrame raw = step_tactile(world, scene.object_sdf, traj.object[k],
                                      scene.contact, step_opts);
      raw.timestamp = static_cast<int>(k);
      for (int i = 0; i < raw.count(); ++i) {
        if (raw.depth[i] > 0.0) ++stats.contact_count;
        stats.max_force = std::max(stats.max_force, raw.force[i]);
      }
      stats.saturated += raw.saturated_count();
      TactileFrame norm = normalize_frame(raw, scene.depth_max, scene.force_max);
      if (scene.camera && opts.keep_clouds) {
        PointCloud finger_points = tactile_to_points(world, norm);
        for (std::size_t i = 0; i < finger_points.size(); ++i)
          tactile_points.push_back(finger_points.positions[i],
                                   finger_points.readings[i]);
      }
      if (opts.keep_frames) out.frames[f].push_back(std::move(norm));
    }

    if (scene.camera && opts.keep_clouds) {
      const CameraConfig& cam = *scene.camera;
      PointCloud visual;
      if (!cam.depth_pattern.empty()) {
        DepthImage img = detail::load_step_depth(cam, static_cast<int>(k));
        visual = backproject_depth(img);
        if (cam.crop) visual = crop_workspace(visual, *cam.crop);
        if (visual.size() > 0)
          visual = downsample_uniform(visual, static_cast<std::size_t>(cam.n_vis));
        if (scene.domain == Domain::kSim && scene.noise.sigma > 0.0) {
          // per-step sub-stream of the scene seed keeps draws replayable
          NoiseConfig step_noise{scene.noise.sigma,
                                 counter_hash(scene.noise.seed, k)};
          visual = inject_noise(visual, step_noise);
        }
      }
      out.clouds.push_back(merge_visuo_tactile(visual, tactile_points));
    }
  }
  return out;
}

// Replays many trajectories against one read-only scene. Episodes are
// independent and write only their own output slot, so results are
// bit-identical for any worker count; per-episode failures are recorded and
// the batch always completes.
inline std::vector<EpisodeOutput> run_batch(
    const Scene& scene, const std::vector<Trajectory>& trajectories,
    int workers, const RunOptions& opts = {}) {
  if (workers < 1) throw std::runtime_error("run_batch: workers must be >= 1");
  std::vector<EpisodeOutput> outputs(trajectories.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= trajectories.size()) return;
      try {
        outputs[i] = run_episode(scene, trajectories[i], opts);
      } catch (const std::exception& e) {
        outputs[i] = EpisodeOutput{};
        outputs[i].error = e.what();
      }
    }
  };
  int n_threads = std::min<int>(workers, static_cast<int>(trajectories.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return outputs;
}

// Copies of `base` with the object track rigidly offset by a uniform draw
// over a range x range square on the horizontal plane; draws are keyed by
// (seed, episode index) so the list is reproducible and order-independent.
inline std::vector<Trajectory> randomize_initials(const Trajectory& base,
                                                  double range, int count,
                                                  std::uint64_t seed,
                                                  bool include_pads = false) {
  if (range < 0.0) throw std::runtime_error("randomize: range must be >= 0");
  if (count < 0) throw std::runtime_error("randomize: count must be >= 0");
  std::vector<Trajectory> out;
  out.reserve(count);
  for (int e = 0; e < count; ++e) {
    Vec3 offset{(counter_uniform(seed, e, 0) - 0.5) * range,
                (counter_uniform(seed, e, 1) - 0.5) * range, 0.0};
    Trajectory traj = base;
    for (RigidState& s : traj.object) s.translation += offset;
    if (include_pads)
      for (auto& track : traj.pads)
        for (RigidState& s : track) s.translation += offset;
    out.push_back(std::move(traj));
  }
  return out;
}

// Order-sensitive content hash of an episode output; lets callers compare
// batch results across worker counts cheaply.
inline std::uint64_t episode_digest(const EpisodeOutput& output) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto add_doubles = [&](const std::vector<double>& v) {
    h = fnv1a64(v.data(), v.size() * sizeof(double), h);
  };
  for (const auto& track : output.frames)
    for (const TactileFrame& f : track) {
      add_doubles(f.depth);
      add_doubles(f.force);
      h = fnv1a64(f.saturated.data(), f.saturated.size(), h);
    }
  for (const MergedCloud& c : output.clouds) {
    h = fnv1a64(c.positions.data(), c.positions.size() * sizeof(Vec3), h);
    add_doubles(c.readings);
    h = fnv1a64(c.modality.data(), c.modality.size(), h);
  }
  for (const StepStats& s : output.stats) {
    h = fnv1a64(&s.contact_count, sizeof(s.contact_count), h);
    h = fnv1a64(&s.max_force, sizeof(s.max_force), h);
    h = fnv1a64(&s.saturated, sizeof(s.saturated), h);
  }
  h = fnv1a64(output.error.data(), output.error.size(), h);
  return h;
}

}  // namespace taxelsim
