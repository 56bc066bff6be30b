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

// Command-line front end: taxel sampling, episode/batch replay, calibration,
// histogram comparison, point-cloud utilities and trajectory randomization.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "taxelsim/taxelsim.hpp"

namespace fs = std::filesystem;
using namespace taxelsim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

Vec3 to_vec3(const std::vector<double>& v) { return {v[0], v[1], v[2]}; }

void print_warnings(const std::vector<std::string>& warnings) {
  for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
}

// --- sample-taxels ---------------------------------------------------------

struct SampleTaxelsArgs {
  std::string mesh, out;
  int rows = 12, cols = 32;
  double margin = 1e-3, scale = 1.0, nominal_pitch = 2e-3;
  std::vector<double> hint;
};

int run_sample_taxels(const SampleTaxelsArgs& args) {
  std::vector<std::string> warnings;
  MeshLoadOptions load{args.scale, &warnings};
  TriangleMesh mesh = load_mesh(args.mesh, load);
  TaxelSampleOptions opts;
  opts.nominal_pitch = args.nominal_pitch;
  opts.warnings = &warnings;
  if (!args.hint.empty()) opts.side_hint = to_vec3(args.hint);
  TaxelArray taxels = sample_taxels(mesh, args.rows, args.cols, args.margin, opts);
  print_warnings(warnings);
  save_taxels(args.out, taxels);
  std::cout << "wrote " << taxels.count() << " taxels (" << taxels.rows << "x"
            << taxels.cols << ", pitch " << taxels.pitch_u * 1e3 << " x "
            << taxels.pitch_v * 1e3 << " mm) to " << args.out << "\n";
  return kExitOk;
}

// --- simulate ---------------------------------------------------------------

struct SimulateArgs {
  std::string scene, trajectory, out_dir;
  std::string heatmap_channel = "force";
  int heatmap_every = 0;  // 0 = no heatmaps
  bool no_cache = false;
};

void write_stats(const fs::path& path, const std::vector<StepStats>& stats,
                 double dt) {
  AtomicFile file(path, /*binary=*/false);
  std::ostream& os = file.stream();
  os.precision(17);
  os << "step,t,contact_taxels,max_force,saturated\n";
  for (std::size_t k = 0; k < stats.size(); ++k)
    os << k << "," << k * dt << "," << stats[k].contact_count << ","
       << stats[k].max_force << "," << stats[k].saturated << "\n";
  file.commit();
}

int run_simulate(const SimulateArgs& args) {
  std::vector<std::string> warnings;
  SceneLoadOptions opts;
  opts.use_cache = !args.no_cache;
  opts.warnings = &warnings;
  Scene scene = load_scene(args.scene, opts);
  print_warnings(warnings);
  if (scene.sdf_cache_hit) std::cerr << "object SDF: cache hit\n";

  Trajectory traj = load_trajectory_csv(args.trajectory, scene.finger_count());
  EpisodeOutput out = run_episode(scene, traj);

  fs::create_directories(args.out_dir);
  fs::path dir = args.out_dir;
  for (int f = 0; f < scene.finger_count(); ++f)
    save_tfrm(dir / ("pad" + std::to_string(f) + ".tfrm"), out.frames[f],
              traj.dt, scene.tfrm_channels);
  for (std::size_t k = 0; k < out.clouds.size(); ++k) {
    char name[64];
    std::snprintf(name, sizeof(name), "cloud_%05zu.tpcd", k);
    save_tpcd(dir / name, out.clouds[k]);
  }
  if (args.heatmap_every > 0) {
    int channel = args.heatmap_channel == "depth" ? 0 : 1;
    for (int f = 0; f < scene.finger_count(); ++f)
      for (std::size_t k = 0; k < out.frames[f].size();
           k += static_cast<std::size_t>(args.heatmap_every)) {
        char name[64];
        std::snprintf(name, sizeof(name), "pad%d_%05zu.png", f, k);
        save_frame_heatmap(dir / name, out.frames[f][k], channel);
      }
  }
  write_stats(dir / "stats.csv", out.stats, traj.dt);

  int saturated = 0;
  for (const StepStats& s : out.stats) saturated += s.saturated;
  std::cout << "simulated " << traj.steps() << " steps x "
            << scene.finger_count() << " pads into " << args.out_dir << "\n";
  if (saturated > 0)
    std::cerr << "warning: " << saturated
              << " taxel-steps exceeded the SDF trust band\n";
  return kExitOk;
}

// --- batch -------------------------------------------------------------------

struct BatchArgs {
  std::string scene, traj_dir, out_dir;
  int workers = 1;
  bool save_frames = false;
  bool no_cache = false;
};

int run_batch_cmd(const BatchArgs& args) {
  SceneLoadOptions opts;
  opts.use_cache = !args.no_cache;
  Scene scene = load_scene(args.scene, opts);

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(args.traj_dir))
    if (entry.path().extension() == ".csv") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty())
    throw std::runtime_error("no .csv trajectories in " + args.traj_dir);

  std::vector<Trajectory> trajectories;
  trajectories.reserve(files.size());
  for (const fs::path& f : files)
    trajectories.push_back(load_trajectory_csv(f, scene.finger_count()));

  RunOptions run_opts;
  run_opts.keep_clouds = false;
  run_opts.keep_frames = args.save_frames;
  auto t0 = std::chrono::steady_clock::now();
  std::vector<EpisodeOutput> outputs =
      run_batch(scene, trajectories, args.workers, run_opts);
  auto t1 = std::chrono::steady_clock::now();
  double seconds = std::chrono::duration<double>(t1 - t0).count();

  std::size_t taxel_steps = 0;
  for (const Trajectory& t : trajectories)
    taxel_steps += t.steps() * scene.finger_count() * scene.taxels_per_finger();

  fs::create_directories(args.out_dir);
  fs::path dir = args.out_dir;
  {
    AtomicFile report(dir / "batch_report.txt", /*binary=*/false);
    std::ostream& os = report.stream();
    os << "taxelsim-batch 1\n";
    os << "episodes " << outputs.size() << "\n";
    for (std::size_t i = 0; i < outputs.size(); ++i) {
      os << "episode " << i << " " << files[i].filename().string() << " ";
      if (outputs[i].ok())
        os << "digest " << std::hex << episode_digest(outputs[i]) << std::dec;
      else
        os << "error " << outputs[i].error;
      os << "\n";
    }
    report.commit();
  }
  if (args.save_frames) {
    for (std::size_t i = 0; i < outputs.size(); ++i) {
      if (!outputs[i].ok()) continue;
      for (int f = 0; f < scene.finger_count(); ++f) {
        char name[64];
        std::snprintf(name, sizeof(name), "episode%04zu_pad%d.tfrm", i, f);
        save_tfrm(dir / name, outputs[i].frames[f], trajectories[i].dt,
                  scene.tfrm_channels);
      }
    }
  }

  int failures = 0;
  for (const EpisodeOutput& o : outputs) failures += o.ok() ? 0 : 1;
  std::cout << "ran " << outputs.size() << " episodes (" << failures
            << " failed) with " << args.workers << " workers in " << seconds
            << " s: " << static_cast<double>(taxel_steps) / seconds
            << " taxel-steps/s\n";
  return kExitOk;
}

// --- calibrate ----------------------------------------------------------------

struct CalibrateArgs {
  std::string measured, out;
  double init_kn = 0.5, init_kd = 1e-3, depth_max = 5e-3;
  int budget = 2000;
};

int run_calibrate(const CalibrateArgs& args) {
  ForceResponseCurve curve = load_curve_csv(args.measured);
  FitOptions opts;
  opts.budget = args.budget;
  opts.response.depth_max = args.depth_max;
  CalibrationResult fit =
      fit_contact_params(curve, ContactParams{args.init_kn, args.init_kd}, opts);

  std::ostringstream report;
  report.precision(17);
  report << "taxelsim-calibration 1\n";
  report << "k_n " << fit.k_n << "\n";
  report << "k_d " << fit.k_d << "\n";
  report << "mse " << fit.mse << "\n";
  report << "iterations " << fit.iterations << "\n";
  report << "converged " << (fit.converged ? "true" : "false") << "\n";
  report << "k_d_confidence "
         << (fit.k_d_constrained ? "constrained" : "unconstrained") << "\n";
  if (!args.out.empty()) {
    AtomicFile file(args.out, /*binary=*/false);
    file.stream() << report.str();
    file.commit();
  }
  std::cout << report.str();
  return kExitOk;
}

// --- compare-hist ---------------------------------------------------------------

struct CompareHistArgs {
  std::string real_file, sim_file, out;
  int bins = 32;
};

int run_compare_hist(const CompareHistArgs& args) {
  std::vector<double> real = load_samples(args.real_file);
  std::vector<double> sim = load_samples(args.sim_file);
  HistogramReport report = histogram_compare(real, sim, args.bins);
  if (!args.out.empty()) save_histogram_report(args.out, report);
  std::cout << "jensen-shannon divergence: " << report.divergence << " bits ("
            << real.size() << " real vs " << sim.size() << " sim samples, "
            << args.bins << " bins)\n";
  return kExitOk;
}

// --- cloud -----------------------------------------------------------------------

int run_cloud_crop(const std::string& in, const std::string& out,
                   const std::vector<double>& lo, const std::vector<double>& hi) {
  TpcdContents contents = load_tpcd(in);
  Aabb box{to_vec3(lo), to_vec3(hi)};
  save_tpcd(out, crop_workspace(contents.cloud, box));
  return kExitOk;
}

int run_cloud_downsample(const std::string& in, const std::string& out, int n) {
  TpcdContents contents = load_tpcd(in);
  save_tpcd(out, downsample_uniform(contents.cloud, static_cast<std::size_t>(n)));
  return kExitOk;
}

int run_cloud_noise(const std::string& in, const std::string& out, double sigma,
                    std::uint64_t seed) {
  TpcdContents contents = load_tpcd(in);
  save_tpcd(out, inject_noise(contents.cloud, NoiseConfig{sigma, seed}));
  return kExitOk;
}

int run_cloud_merge(const std::string& visual, const std::string& tactile,
                    const std::string& out) {
  PointCloud vis = load_tpcd(visual).cloud;
  PointCloud tac = load_tpcd(tactile).cloud;
  save_tpcd(out, merge_visuo_tactile(vis, tac));
  return kExitOk;
}

int run_cloud_csv(const std::string& in, const std::string& out) {
  TpcdContents contents = load_tpcd(in);
  MergedCloud merged;
  merged.positions = contents.cloud.positions;
  merged.readings = contents.cloud.readings;
  merged.modality = contents.channels == 5
                        ? contents.modality
                        : std::vector<std::uint8_t>(contents.cloud.size(), 0);
  save_cloud_csv(out, merged);
  return kExitOk;
}

// --- randomize --------------------------------------------------------------------

struct RandomizeArgs {
  std::string base, out_dir;
  double range = 0.03;
  int count = 1;
  std::uint64_t seed = 0;
  bool include_pads = false;
};

int run_randomize(const RandomizeArgs& args) {
  Trajectory base = load_trajectory_csv(args.base);
  std::vector<Trajectory> randomized = randomize_initials(
      base, args.range, args.count, args.seed, args.include_pads);
  fs::create_directories(args.out_dir);
  for (std::size_t i = 0; i < randomized.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "traj_%04zu.csv", i);
    save_trajectory_csv(fs::path(args.out_dir) / name, randomized[i]);
  }
  std::cout << "wrote " << randomized.size() << " trajectories to "
            << args.out_dir << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"taxelsim: batch-parallel tactile sensing simulator"};
  app.require_subcommand(1);

  SampleTaxelsArgs sample_args;
  CLI::App* sample = app.add_subcommand(
      "sample-taxels", "Sample a taxel lattice on a sensor pad mesh");
  sample->add_option("--mesh", sample_args.mesh, "Pad mesh (.obj/.stl)")->required();
  sample->add_option("--rows", sample_args.rows, "Lattice rows");
  sample->add_option("--cols", sample_args.cols, "Lattice columns");
  sample->add_option("--margin", sample_args.margin, "Edge margin (m)");
  sample->add_option("--scale", sample_args.scale, "Mesh unit scale factor");
  sample->add_option("--nominal-pitch", sample_args.nominal_pitch,
                     "Expected pitch for the deviation warning (m)");
  sample->add_option("--hint", sample_args.hint,
                     "Sensing-side hint vector (3 numbers)")->expected(3);
  sample->add_option("--out", sample_args.out, "Output taxel file")->required();

  SimulateArgs sim_args;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "Replay one trajectory and write TFRM/TPCD outputs");
  simulate->add_option("--scene", sim_args.scene, "Scene config file")->required();
  simulate->add_option("--trajectory", sim_args.trajectory, "Trajectory CSV")->required();
  simulate->add_option("--out-dir", sim_args.out_dir, "Output directory")->required();
  simulate->add_option("--heatmap-every", sim_args.heatmap_every,
                       "Write a PNG heatmap every N steps (0 = off)");
  simulate->add_option("--heatmap-channel", sim_args.heatmap_channel,
                       "Heatmap channel: depth or force")
      ->check(CLI::IsMember({"depth", "force"}));
  simulate->add_flag("--no-cache", sim_args.no_cache, "Skip the SDF disk cache");

  BatchArgs batch_args;
  CLI::App* batch = app.add_subcommand(
      "batch", "Replay a directory of trajectories in parallel");
  batch->add_option("--scene", batch_args.scene, "Scene config file")->required();
  batch->add_option("--traj-dir", batch_args.traj_dir,
                    "Directory of trajectory .csv files")->required();
  batch->add_option("--out-dir", batch_args.out_dir, "Output directory")->required();
  batch->add_option("--workers", batch_args.workers, "Worker threads")
      ->check(CLI::PositiveNumber);
  batch->add_flag("--save-frames", batch_args.save_frames,
                  "Write per-episode TFRM files");
  batch->add_flag("--no-cache", batch_args.no_cache, "Skip the SDF disk cache");

  CalibrateArgs cal_args;
  CLI::App* calibrate = app.add_subcommand(
      "calibrate", "Fit (k_n, k_d) to a measured force-response curve");
  calibrate->add_option("--measured", cal_args.measured,
                        "Measured curve CSV (load_n,reading[,press_rate])")->required();
  calibrate->add_option("--init-kn", cal_args.init_kn, "Initial k_n");
  calibrate->add_option("--init-kd", cal_args.init_kd, "Initial k_d");
  calibrate->add_option("--budget", cal_args.budget, "Search sweep budget");
  calibrate->add_option("--depth-max", cal_args.depth_max,
                        "Reading normalization ceiling (m)");
  calibrate->add_option("--out", cal_args.out, "Report file (optional)");

  CompareHistArgs hist_args;
  CLI::App* compare = app.add_subcommand(
      "compare-hist", "Jensen-Shannon divergence of two reading sample sets");
  compare->add_option("--real", hist_args.real_file,
                      "Real samples (one value per line)")->required();
  compare->add_option("--sim", hist_args.sim_file, "Simulated samples")->required();
  compare->add_option("--bins", hist_args.bins, "Histogram bins over [0,1]")
      ->check(CLI::Range(2, 4096));
  compare->add_option("--out", hist_args.out, "Report file (optional)");

  CLI::App* cloud = app.add_subcommand("cloud", "Point-cloud utilities");
  cloud->require_subcommand(1);
  std::string cloud_in, cloud_out, cloud_visual, cloud_tactile;
  std::vector<double> crop_lo, crop_hi;
  int downsample_n = 1024;
  double noise_sigma = 3.0;
  std::uint64_t noise_seed = 0;

  CLI::App* crop = cloud->add_subcommand("crop", "Crop to an AABB");
  crop->add_option("--in", cloud_in)->required();
  crop->add_option("--out", cloud_out)->required();
  crop->add_option("--min", crop_lo, "Box min corner")->expected(3)->required();
  crop->add_option("--max", crop_hi, "Box max corner")->expected(3)->required();

  CLI::App* down = cloud->add_subcommand("downsample", "Uniform lin-space downsampling");
  down->add_option("--in", cloud_in)->required();
  down->add_option("--out", cloud_out)->required();
  down->add_option("--n", downsample_n, "Target point count")
      ->check(CLI::PositiveNumber)->required();

  CLI::App* noise = cloud->add_subcommand("noise", "Multiplicative depth-style jitter");
  noise->add_option("--in", cloud_in)->required();
  noise->add_option("--out", cloud_out)->required();
  noise->add_option("--sigma", noise_sigma, "Noise level (std = 0.01*sigma)");
  noise->add_option("--seed", noise_seed, "Deterministic seed")->required();

  CLI::App* merge = cloud->add_subcommand("merge", "Merge visual + tactile clouds");
  merge->add_option("--visual", cloud_visual)->required();
  merge->add_option("--tactile", cloud_tactile)->required();
  merge->add_option("--out", cloud_out)->required();

  CLI::App* tocsv = cloud->add_subcommand("export-csv", "Debug CSV dump of a TPCD");
  tocsv->add_option("--in", cloud_in)->required();
  tocsv->add_option("--out", cloud_out)->required();

  RandomizeArgs rand_args;
  CLI::App* randomize = app.add_subcommand(
      "randomize", "Randomize trajectory start poses on the horizontal plane");
  randomize->add_option("--base", rand_args.base, "Base trajectory CSV")->required();
  randomize->add_option("--range", rand_args.range,
                        "Offset range (m); draws are uniform in +-range/2");
  randomize->add_option("--count", rand_args.count, "Number of trajectories")
      ->check(CLI::PositiveNumber);
  randomize->add_option("--seed", rand_args.seed, "Deterministic seed")->required();
  randomize->add_flag("--include-pads", rand_args.include_pads,
                      "Offset pad tracks together with the object");
  randomize->add_option("--out-dir", rand_args.out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (app.got_subcommand(sample)) return run_sample_taxels(sample_args);
    if (app.got_subcommand(simulate)) return run_simulate(sim_args);
    if (app.got_subcommand(batch)) return run_batch_cmd(batch_args);
    if (app.got_subcommand(calibrate)) return run_calibrate(cal_args);
    if (app.got_subcommand(compare)) return run_compare_hist(hist_args);
    if (app.got_subcommand(cloud)) {
      if (cloud->got_subcommand(crop))
        return run_cloud_crop(cloud_in, cloud_out, crop_lo, crop_hi);
      if (cloud->got_subcommand(down))
        return run_cloud_downsample(cloud_in, cloud_out, downsample_n);
      if (cloud->got_subcommand(noise))
        return run_cloud_noise(cloud_in, cloud_out, noise_sigma, noise_seed);
      if (cloud->got_subcommand(merge))
        return run_cloud_merge(cloud_visual, cloud_tactile, cloud_out);
      if (cloud->got_subcommand(tocsv)) return run_cloud_csv(cloud_in, cloud_out);
    }
    if (app.got_subcommand(randomize)) return run_randomize(rand_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
