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

#include "taxelsim/replay.hpp"

#include <chrono>
#include <fstream>
#include <random>

#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"

using namespace taxelsim;
using testsupport::TempDir;

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path);
  os << text;
}

// Writes pad/sphere assets plus a scene config into `dir`.
std::filesystem::path make_scene_assets(const TempDir& dir,
                                        const std::string& extra = "",
                                        int fingers = 1) {
  save_obj(dir.file("pad.obj"),
           make_box_mesh({0, 0, -0.002}, {0.012, 0.032, 0.002}));
  save_obj(dir.file("sphere.obj"), make_icosphere_mesh({0, 0, 0}, 0.01, 3));
  std::string cfg =
      "domain = sim\n"
      "[pads]\n"
      "count = " + std::to_string(fingers) + "\n"
      "mesh = pad.obj\n"
      "rows = 12\ncols = 32\nmargin = 0.001\n"
      "[object]\n"
      "mesh = sphere.obj\n"
      "cell_size = 0.0005\n"
      "padding = 2\n"
      "[contact]\n"
      "k_n = 1.0\nk_d = 3e-3\ndepth_max = 0.005\nforce_max = 0.005\n" +
      extra;
  write_text(dir.file("scene.cfg"), cfg);
  return dir.file("scene.cfg");
}

// Vertical descent of the sphere toward the pad at (0.001, 0.001).
Trajectory descent_trajectory(int steps, double z_start, double z_end,
                              int fingers = 1) {
  Trajectory traj;
  traj.dt = 0.01;
  traj.pads.resize(fingers);
  for (int k = 0; k < steps; ++k) {
    double a = steps == 1 ? 0.0 : static_cast<double>(k) / (steps - 1);
    RigidState object;
    object.translation = {0.001, 0.001, z_start + (z_end - z_start) * a};
    object.linear_velocity = {0, 0, (z_end - z_start) / (traj.dt * (steps - 1))};
    traj.object.push_back(object);
    for (int f = 0; f < fingers; ++f) traj.pads[f].push_back(RigidState{});
  }
  return traj;
}

}  // namespace

TEST_CASE("minimal scene config loads with a 384-taxel default lattice") {
  TempDir dir("scene_min");
  SceneLoadOptions opts;
  opts.use_cache = false;
  Scene scene = load_scene(make_scene_assets(dir), opts);
  CHECK(scene.finger_count() == 1);
  CHECK(scene.taxels_per_finger() == 384);
  CHECK(scene.contact.k_n == 1.0);
  CHECK(scene.contact.k_d == 3e-3);
  CHECK(scene.domain == Domain::kSim);
  CHECK(scene.saturation_depth == Catch::Approx(2 * 0.0005));
  CHECK(!scene.camera);
}

TEST_CASE("invalid scene parameters name the offending field") {
  TempDir dir("scene_bad");
  make_scene_assets(dir);
  write_text(dir.file("bad.cfg"),
             "[pads]\nmesh = pad.obj\n"
             "[object]\nmesh = sphere.obj\ncell_size = 0.0005\n"
             "[contact]\nk_n = -1\n");
  SceneLoadOptions opts;
  opts.use_cache = false;
  REQUIRE_THROWS_WITH(load_scene(dir.file("bad.cfg"), opts),
                      Catch::Matchers::ContainsSubstring("contact.k_n"));

  write_text(dir.file("missing.cfg"),
             "[pads]\nmesh = nope.obj\n[object]\nmesh = sphere.obj\n");
  REQUIRE_THROWS(load_scene(dir.file("missing.cfg"), opts));
}

TEST_CASE("SDF cache is transparent and reports hits") {
  TempDir dir("scene_cache");
  std::filesystem::path cfg = make_scene_assets(dir);
  SceneLoadOptions opts;
  opts.cache_dir = (dir.path() / "cache").string();

  Scene first = load_scene(cfg, opts);
  CHECK(!first.sdf_cache_hit);
  Scene second = load_scene(cfg, opts);
  CHECK(second.sdf_cache_hit);

  REQUIRE(second.object_sdf.values.size() == first.object_sdf.values.size());
  for (std::size_t i = 0; i < first.object_sdf.values.size(); ++i)
    REQUIRE(second.object_sdf.values[i] == first.object_sdf.values[i]);

  // identical frames through either grid
  Trajectory traj = descent_trajectory(5, 0.012, 0.009);
  CHECK(episode_digest(run_episode(first, traj)) ==
        episode_digest(run_episode(second, traj)));
}

TEST_CASE("trajectory CSV round trip and twist reconstruction") {
  TempDir dir("traj_io");

  Trajectory traj = descent_trajectory(9, 0.02, 0.008);
  traj.object[3].angular_velocity = {0.1, -0.2, 0.3};
  save_trajectory_csv(dir.file("t.csv"), traj);
  Trajectory back = load_trajectory_csv(dir.file("t.csv"), 1);
  REQUIRE(back.steps() == 9);
  CHECK(back.dt == Catch::Approx(0.01).margin(1e-12));
  CHECK(norm(back.object[3].angular_velocity - Vec3{0.1, -0.2, 0.3}) < 1e-12);
  CHECK(norm(back.object[4].translation - traj.object[4].translation) < 1e-12);

  SECTION("twists reconstructed from poses only") {
    // constant linear velocity + constant spin about z
    std::ostringstream os;
    os.precision(17);
    os << "t,body_id,qw,qx,qy,qz,px,py,pz\n";
    const double dt = 0.02, omega = 0.8, vx = 0.05;
    for (int k = 0; k < 8; ++k) {
      double t = k * dt;
      Quat q = quat_from_axis_angle({0, 0, 1}, omega * t);
      os << t << ",object," << q.w << "," << q.x << "," << q.y << "," << q.z
         << "," << vx * t << ",0,0\n";
      os << t << ",pad0,1,0,0,0,0,0,0\n";
    }
    write_text(dir.file("posed.csv"), os.str());
    Trajectory rec = load_trajectory_csv(dir.file("posed.csv"), 1);
    for (int k = 0; k < 8; ++k) {
      CHECK(norm(rec.object[k].linear_velocity - Vec3{vx, 0, 0}) < 1e-9);
      CHECK(norm(rec.object[k].angular_velocity - Vec3{0, 0, omega}) < 1e-9);
      CHECK(norm(rec.pads[0][k].linear_velocity) < 1e-12);
    }
  }

  SECTION("malformed files are rejected") {
    write_text(dir.file("nohdr.csv"), "1,object,1,0,0,0,0,0,0\n");
    REQUIRE_THROWS(load_trajectory_csv(dir.file("nohdr.csv")));
    write_text(dir.file("badquat.csv"),
               "t,body_id,qw,qx,qy,qz,px,py,pz\n"
               "0,object,5,0,0,0,0,0,0\n");
    REQUIRE_THROWS(load_trajectory_csv(dir.file("badquat.csv")));
  }
}

TEST_CASE("out-of-reach trajectory produces all-zero frames") {
  TempDir dir("replay_zero");
  SceneLoadOptions opts;
  opts.use_cache = false;
  Scene scene = load_scene(make_scene_assets(dir), opts);
  Trajectory traj = descent_trajectory(6, 0.5, 0.4);
  EpisodeOutput out = run_episode(scene, traj);
  REQUIRE(out.frames.size() == 1);
  REQUIRE(out.frames[0].size() == 6);
  for (const TactileFrame& f : out.frames[0])
    for (int i = 0; i < f.count(); ++i) {
      CHECK(f.depth[i] == 0.0);
      CHECK(f.force[i] == 0.0);
    }
  for (const StepStats& s : out.stats) CHECK(s.contact_count == 0);
}

TEST_CASE("linear descent gives a non-decreasing frame-sum force") {
  TempDir dir("replay_press");
  SceneLoadOptions opts;
  opts.use_cache = false;
  Scene scene = load_scene(make_scene_assets(dir), opts);
  Trajectory traj = descent_trajectory(20, 0.012, 0.0085);
  EpisodeOutput out = run_episode(scene, traj);
  REQUIRE(out.frames[0].size() == 20);
  double prev = -1.0;
  for (const TactileFrame& f : out.frames[0]) {
    double sum = 0.0;
    for (double v : f.force) sum += v;
    CHECK(sum >= prev - 1e-12);
    prev = sum;
  }
  CHECK(prev > 0.0);  // final step is in contact
  CHECK(out.stats.back().max_force > 0.0);
}

TEST_CASE("episode outputs have exactly trajectory-length streams") {
  TempDir dir("replay_len");
  SceneLoadOptions opts;
  opts.use_cache = false;
  Scene scene = load_scene(make_scene_assets(dir, "", 2), opts);
  Trajectory traj = descent_trajectory(13, 0.012, 0.009, 2);
  EpisodeOutput out = run_episode(scene, traj);
  REQUIRE(out.frames.size() == 2);
  CHECK(out.frames[0].size() == 13);
  CHECK(out.frames[1].size() == 13);
  CHECK(out.stats.size() == 13);
}

TEST_CASE("batch outputs are bit-identical across worker counts") {
  TempDir dir("replay_batch");
  SceneLoadOptions opts;
  opts.use_cache = false;
  Scene scene = load_scene(make_scene_assets(dir), opts);
  Trajectory base = descent_trajectory(10, 0.011, 0.009);
  std::vector<Trajectory> trajectories =
      randomize_initials(base, 0.004, 16, 2024);

  std::vector<EpisodeOutput> serial = run_batch(scene, trajectories, 1);
  std::vector<EpisodeOutput> parallel = run_batch(scene, trajectories, 4);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].ok());
    CHECK(episode_digest(serial[i]) == episode_digest(parallel[i]));
  }
}

TEST_CASE("randomize_initials spreads starts uniformly and reproducibly") {
  Trajectory base = descent_trajectory(4, 0.012, 0.010);

  SECTION("zero range copies the base") {
    std::vector<Trajectory> all = randomize_initials(base, 0.0, 5, 7);
    for (const Trajectory& t : all)
      for (std::size_t k = 0; k < t.steps(); ++k)
        CHECK(norm(t.object[k].translation - base.object[k].translation) == 0.0);
  }

  SECTION("same seed reproduces, offsets stay within range") {
    std::vector<Trajectory> a = randomize_initials(base, 0.03, 200, 11);
    std::vector<Trajectory> b = randomize_initials(base, 0.03, 200, 11);
    double mean_x = 0.0, min_x = 1.0, max_x = -1.0;
    for (int e = 0; e < 200; ++e) {
      Vec3 off = a[e].object[0].translation - base.object[0].translation;
      CHECK(off == (b[e].object[0].translation - base.object[0].translation));
      CHECK(std::abs(off.x) <= 0.015);
      CHECK(std::abs(off.y) <= 0.015);
      CHECK(off.z == 0.0);
      // the offset shifts the whole track rigidly
      Vec3 off_last = a[e].object.back().translation -
                      base.object.back().translation;
      CHECK(norm(off - off_last) < 1e-15);
      mean_x += off.x;
      min_x = std::min(min_x, off.x);
      max_x = std::max(max_x, off.x);
    }
    mean_x /= 200.0;
    CHECK(std::abs(mean_x) < 0.003);  // ~5 sigma of the mean
    CHECK(min_x < -0.010);
    CHECK(max_x > 0.010);
  }

  SECTION("offsets pass a Kolmogorov-Smirnov uniformity check") {
    const int n = 10000;
    std::vector<Trajectory> all = randomize_initials(base, 0.03, n, 5);
    for (int axis = 0; axis < 2; ++axis) {
      std::vector<double> u;
      u.reserve(n);
      for (const Trajectory& t : all) {
        Vec3 off = t.object[0].translation - base.object[0].translation;
        u.push_back((off[axis] + 0.015) / 0.03);
      }
      std::sort(u.begin(), u.end());
      double d_stat = 0.0;
      for (int i = 0; i < n; ++i) {
        double hi = static_cast<double>(i + 1) / n - u[i];
        double lo = u[i] - static_cast<double>(i) / n;
        d_stat = std::max({d_stat, hi, lo});
      }
      // alpha = 0.01 critical value: 1.628 / sqrt(n)
      CHECK(d_stat < 1.628 / std::sqrt(static_cast<double>(n)));
    }
  }
}

TEST_CASE("per-episode failures are recorded and the batch completes") {
  TempDir dir("replay_err");
  SceneLoadOptions opts;
  opts.use_cache = false;
  Scene scene = load_scene(make_scene_assets(dir), opts);
  std::vector<Trajectory> trajectories = {
      descent_trajectory(5, 0.012, 0.010),
      descent_trajectory(5, 0.012, 0.010, /*fingers=*/2),  // wrong pad count
      descent_trajectory(5, 0.012, 0.010)};
  std::vector<EpisodeOutput> outputs = run_batch(scene, trajectories, 2);
  CHECK(outputs[0].ok());
  CHECK(!outputs[1].ok());
  CHECK(outputs[1].error.find("finger") != std::string::npos);
  CHECK(outputs[2].ok());
}

TEST_CASE("camera scenes merge depth-derived visual points with taxels") {
  TempDir dir("replay_cam");
  // camera 0.3 m above the pad looking straight down (+z axis toward -z)
  std::string camera =
      "[camera]\n"
      "fx = 60\nfy = 60\ncx = 7.5\ncy = 7.5\n"
      "pose = 0 1 0 0 0 0 0.3\n"  // 180 deg about x: +z maps to -z
      "n_vis = 64\n"
      "depth_pattern = depth_%d.tdpt\n"
      "[noise]\n"
      "sigma = 3\nseed = 77\n";
  std::filesystem::path cfg = make_scene_assets(dir, camera);

  const int steps = 3;
  for (int k = 0; k < steps; ++k) {
    DepthImage img;
    img.width = 16;
    img.height = 16;
    img.depth.assign(256, 0.3f);  // flat table plane at z = 0
    save_depth_raster(dir.file("depth_" + std::to_string(k) + ".tdpt"), img);
  }

  SceneLoadOptions opts;
  opts.use_cache = false;
  Scene scene = load_scene(cfg, opts);
  REQUIRE(scene.camera);
  Trajectory traj = descent_trajectory(steps, 0.0095, 0.0090);
  EpisodeOutput out = run_episode(scene, traj);
  REQUIRE(out.clouds.size() == steps);
  for (const MergedCloud& cloud : out.clouds) {
    REQUIRE(cloud.size() == 64 + 384);
    for (std::size_t i = 0; i < 64; ++i) {
      CHECK(cloud.modality[i] == 0);
      CHECK(cloud.readings[i] == 0.0);
    }
    int flags = 0;
    for (std::size_t i = 0; i < cloud.size(); ++i) flags += cloud.modality[i];
    CHECK(flags == 384);
  }
  // final step is pressed: some tactile readings are nonzero
  double tactile_sum = 0.0;
  for (std::size_t i = 64; i < out.clouds.back().size(); ++i)
    tactile_sum += out.clouds.back().readings[i];
  CHECK(tactile_sum > 0.0);

  SECTION("noise applies only to simulated domains") {
    EpisodeOutput a = run_episode(scene, traj);
    CHECK(episode_digest(a) == episode_digest(out));  // replayable

    write_text(dir.file("real.cfg"),
               "domain = real\n" +
                   [&] {
                     std::ifstream is(cfg);
                     std::stringstream ss;
                     ss << is.rdbuf();
                     std::string s = ss.str();
                     return s.substr(s.find("[pads]"));
                   }());
    Scene real_scene = load_scene(dir.file("real.cfg"), opts);
    EpisodeOutput real_out = run_episode(real_scene, traj);
    EpisodeOutput real_again = run_episode(real_scene, traj);
    CHECK(episode_digest(real_out) == episode_digest(real_again));
    // the sim cloud is jittered relative to the noise-free real one
    int moved = 0;
    for (std::size_t i = 0; i < 64; ++i)
      if (std::abs(out.clouds[0].positions[i].x -
                   real_out.clouds[0].positions[i].x) > 1e-7)
        ++moved;
    CHECK(moved > 32);
  }
}

TEST_CASE("weak scaling stays within budget on multi-core hosts") {
  if (std::thread::hardware_concurrency() < 2) {
    SUCCEED("single-core machine, scaling check not applicable");
    return;
  }
  TempDir dir("replay_scale");
  SceneLoadOptions opts;
  opts.use_cache = false;
  Scene scene = load_scene(make_scene_assets(dir), opts);
  Trajectory base = descent_trajectory(30, 0.011, 0.009);
  std::vector<Trajectory> small = randomize_initials(base, 0.004, 8, 3);
  std::vector<Trajectory> doubled = randomize_initials(base, 0.004, 16, 3);

  RunOptions run_opts;
  run_opts.keep_frames = false;
  auto timed = [&](const std::vector<Trajectory>& trajs, int workers) {
    auto t0 = std::chrono::steady_clock::now();
    run_batch(scene, trajs, workers, run_opts);
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  };
  timed(small, 1);  // warm-up
  double t1 = timed(small, 1);
  double t2 = timed(doubled, 2);
  CHECK(t2 <= 2.5 * t1 + 0.05);
}
