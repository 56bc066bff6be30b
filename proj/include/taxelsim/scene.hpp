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

#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "taxelsim/cloud.hpp"
#include "taxelsim/contact.hpp"
#include "taxelsim/io.hpp"
#include "taxelsim/mesh.hpp"
#include "taxelsim/pad.hpp"
#include "taxelsim/sdf.hpp"
#include "taxelsim/signal.hpp"

namespace taxelsim {

enum class Domain { kSim, kReal };

struct CameraConfig {
  double fx = 0.0, fy = 0.0, cx = 0.0, cy = 0.0;
  Quat rotation;      // camera-to-world
  Vec3 translation;
  int n_vis = 1024;   // visual point budget after downsampling
  std::optional<Aabb> crop;
  std::string depth_pattern;  // printf-style %d pattern of TDPT files, optional
};

// Fully loaded simulation scene: pads with their taxel lattices, the contact
// object with its SDF, and the signal-pipeline configuration. Immutable after
// load_scene and shared read-only across parallel episodes.
struct Scene {
  std::vector<TriangleMesh> pad_meshes;  // one per finger
  std::vector<TaxelArray> taxels;        // one per finger
  TriangleMesh object_mesh;
  SdfGrid object_sdf;
  ContactParams contact;
  double depth_max = 5e-3;
  double force_max = 5e-3;
  double saturation_depth = 0.0;
  int tfrm_channels = 2;
  NormalizationConfig normalization;
  NoiseConfig noise;
  std::optional<CameraConfig> camera;
  Domain domain = Domain::kSim;
  bool sdf_cache_hit = false;

  int finger_count() const { return static_cast<int>(taxels.size()); }
  int taxels_per_finger() const { return taxels.empty() ? 0 : taxels[0].count(); }
};

namespace detail {

// Minimal INI-style reader: [section] headers, key = value pairs, '#' or ';'
// comments. Keys before the first section live in section "".
class ConfigDoc {
 public:
  static ConfigDoc parse_file(const std::filesystem::path& path) {
    std::ifstream is = open_input(path, /*binary=*/false);
    ConfigDoc doc;
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      std::size_t comment = line.find_first_of("#;");
      if (comment != std::string::npos) line.erase(comment);
      std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      if (trimmed.front() == '[') {
        if (trimmed.back() != ']')
          throw std::runtime_error(path.string() + ":" +
                                   std::to_string(lineno) +
                                   ": unterminated section header");
        section = trim(trimmed.substr(1, trimmed.size() - 2));
        continue;
      }
      std::size_t eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                 ": expected key = value");
      std::string key = trim(trimmed.substr(0, eq));
      std::string value = trim(trimmed.substr(eq + 1));
      doc.values_[section + "." + key] = value;
    }
    return doc;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end())
      throw std::runtime_error("scene config: missing required key '" + key + "'");
    return it->second;
  }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_number(const std::string& key) const {
    return parse_number(key, get_string(key));
  }

  double get_number(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : parse_number(key, it->second);
  }

  std::vector<double> get_numbers(const std::string& key, std::size_t n) const {
    std::istringstream ls(get_string(key));
    std::vector<double> out;
    double v;
    while (ls >> v) out.push_back(v);
    if (out.size() != n)
      throw std::runtime_error("scene config: key '" + key + "' needs " +
                               std::to_string(n) + " numbers");
    return out;
  }

 private:
  static std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  static double parse_number(const std::string& key, const std::string& text) {
    std::istringstream ls(text);
    double v;
    if (!(ls >> v))
      throw std::runtime_error("scene config: key '" + key +
                               "' is not a number: " + text);
    return v;
  }

  std::map<std::string, std::string> values_;
};

inline void require_positive(double v, const std::string& field) {
  if (!(v > 0.0))
    throw std::runtime_error("scene config: " + field + " must be > 0 (got " +
                             std::to_string(v) + ")");
}

}  // namespace detail

struct SceneLoadOptions {
  bool use_cache = true;
  std::string cache_dir;  // empty = $TAXELSIM_CACHE_DIR or <scene dir>/.taxelsim_cache
  std::vector<std::string>* warnings = nullptr;
};

inline std::filesystem::path sdf_cache_dir(
    const std::filesystem::path& scene_dir, const SceneLoadOptions& opts) {
  if (!opts.cache_dir.empty()) return opts.cache_dir;
  if (const char* env = std::getenv("TAXELSIM_CACHE_DIR"); env && *env)
    return env;
  return scene_dir / ".taxelsim_cache";
}

// Builds (or loads from cache) the object SDF. The cache key is the mesh file
// content hash combined with scale, cell size and padding; cached grids store
// full-precision values so a hit reproduces the fresh build bit-exactly.
inline SdfGrid object_sdf_cached(const std::filesystem::path& mesh_path,
                                 const TriangleMesh& mesh, double scale,
                                 double cell_size, int padding_cells,
                                 const std::filesystem::path& cache_dir,
                                 bool use_cache, bool* cache_hit) {
  *cache_hit = false;
  std::filesystem::path cache_file;
  if (use_cache) {
    std::uint64_t key = hash_file_contents(mesh_path);
    key = fnv1a64(&scale, sizeof(scale), key);
    key = fnv1a64(&cell_size, sizeof(cell_size), key);
    key = fnv1a64(&padding_cells, sizeof(padding_cells), key);
    std::ostringstream name;
    name << "sdf-" << std::hex << key << ".tsdf";
    cache_file = cache_dir / name.str();
    if (std::filesystem::exists(cache_file)) {
      *cache_hit = true;
      return load_sdf_grid(cache_file);
    }
  }
  SdfBuildOptions build;
  build.padding_cells = padding_cells;
  SdfGrid grid = build_sdf_grid(mesh, cell_size, build);
  if (use_cache) {
    std::filesystem::create_directories(cache_dir);
    save_sdf_grid(cache_file, grid, /*full_precision=*/true);
  }
  return grid;
}

// Loads and validates a scene document. Sections: [pads], [object],
// [contact], [normalization], [camera], [noise]; a top-level `domain` key
// selects sim/real.
inline Scene load_scene(const std::filesystem::path& path,
                        const SceneLoadOptions& opts = {}) {
  auto doc = detail::ConfigDoc::parse_file(path);
  std::filesystem::path scene_dir = path.has_parent_path()
                                        ? path.parent_path()
                                        : std::filesystem::path(".");
  auto resolve = [&](const std::string& rel) {
    std::filesystem::path p = rel;
    return p.is_absolute() ? p : scene_dir / p;
  };

  Scene scene;
  std::string domain = doc.get_string(".domain", "sim");
  if (domain == "sim")
    scene.domain = Domain::kSim;
  else if (domain == "real")
    scene.domain = Domain::kReal;
  else
    throw std::runtime_error("scene config: domain must be 'sim' or 'real'");

  // [pads]
  int fingers = static_cast<int>(doc.get_number("pads.count", 1));
  if (fingers < 1 || fingers > 4)
    throw std::runtime_error("scene config: pads.count must be in 1..4");
  double pad_scale = doc.get_number("pads.scale", 1.0);
  MeshLoadOptions pad_load{pad_scale, opts.warnings};
  TriangleMesh pad_mesh = load_mesh(resolve(doc.get_string("pads.mesh")), pad_load);

  TaxelArray taxels;
  if (doc.has("pads.taxels")) {
    taxels = load_taxels(resolve(doc.get_string("pads.taxels")));
  } else {
    int rows = static_cast<int>(doc.get_number("pads.rows", 12));
    int cols = static_cast<int>(doc.get_number("pads.cols", 32));
    double margin = doc.get_number("pads.margin", 1e-3);
    TaxelSampleOptions sample;
    sample.warnings = opts.warnings;
    if (doc.has("pads.hint")) {
      auto h = doc.get_numbers("pads.hint", 3);
      sample.side_hint = {h[0], h[1], h[2]};
    }
    taxels = sample_taxels(pad_mesh, rows, cols, margin, sample);
  }
  for (int f = 0; f < fingers; ++f) {
    scene.pad_meshes.push_back(pad_mesh);
    scene.taxels.push_back(taxels);
  }

  // [object]
  double obj_scale = doc.get_number("object.scale", 1.0);
  MeshLoadOptions obj_load{obj_scale, opts.warnings};
  std::filesystem::path obj_path = resolve(doc.get_string("object.mesh"));
  scene.object_mesh = load_mesh(obj_path, obj_load);
  Aabb obj_bounds = mesh_bounds(scene.object_mesh);
  Vec3 ext = obj_bounds.extent();
  double longest = std::max({ext.x, ext.y, ext.z});
  double cell = doc.get_number("object.cell_size", longest / 64.0);
  detail::require_positive(cell, "object.cell_size");
  int padding = static_cast<int>(doc.get_number("object.padding", 2));
  if (padding < 2)
    throw std::runtime_error("scene config: object.padding must be >= 2");
  scene.object_sdf = object_sdf_cached(
      obj_path, scene.object_mesh, obj_scale, cell, padding,
      sdf_cache_dir(scene_dir, opts), opts.use_cache, &scene.sdf_cache_hit);
  scene.saturation_depth = padding * cell;

  // [contact]
  scene.contact.k_n = doc.get_number("contact.k_n", 1.0);
  scene.contact.k_d = doc.get_number("contact.k_d", 3e-3);
  detail::require_positive(scene.contact.k_n, "contact.k_n");
  if (scene.contact.k_d < 0.0)
    throw std::runtime_error("scene config: contact.k_d must be >= 0");
  scene.depth_max = doc.get_number("contact.depth_max", 5e-3);
  scene.force_max = doc.get_number("contact.force_max",
                                   scene.contact.k_n * scene.depth_max);
  detail::require_positive(scene.depth_max, "contact.depth_max");
  detail::require_positive(scene.force_max, "contact.force_max");
  scene.tfrm_channels = static_cast<int>(doc.get_number("contact.channels", 2));
  if (scene.tfrm_channels != 2 && scene.tfrm_channels != 4)
    throw std::runtime_error("scene config: contact.channels must be 2 or 4");

  // [normalization]
  scene.normalization.tau = doc.get_number("normalization.tau", 51.0);
  scene.normalization.s_max_fixed =
      doc.get_number("normalization.s_max_fixed", 1023.0);
  scene.normalization.validate();

  // [noise]
  scene.noise.sigma = doc.get_number("noise.sigma", 0.0);
  if (scene.noise.sigma < 0.0)
    throw std::runtime_error("scene config: noise.sigma must be >= 0");
  scene.noise.seed =
      static_cast<std::uint64_t>(doc.get_number("noise.seed", 0.0));

  // [camera]
  if (doc.has("camera.fx")) {
    CameraConfig cam;
    cam.fx = doc.get_number("camera.fx");
    cam.fy = doc.get_number("camera.fy");
    cam.cx = doc.get_number("camera.cx");
    cam.cy = doc.get_number("camera.cy");
    detail::require_positive(cam.fx, "camera.fx");
    detail::require_positive(cam.fy, "camera.fy");
    if (doc.has("camera.pose")) {
      auto p = doc.get_numbers("camera.pose", 7);  // qw qx qy qz px py pz
      cam.rotation = normalized(Quat{p[0], p[1], p[2], p[3]});
      cam.translation = {p[4], p[5], p[6]};
    }
    cam.n_vis = static_cast<int>(doc.get_number("camera.n_vis", 1024));
    if (cam.n_vis < 1)
      throw std::runtime_error("scene config: camera.n_vis must be >= 1");
    if (doc.has("camera.crop_min")) {
      auto lo = doc.get_numbers("camera.crop_min", 3);
      auto hi = doc.get_numbers("camera.crop_max", 3);
      Aabb crop{{lo[0], lo[1], lo[2]}, {hi[0], hi[1], hi[2]}};
      if (!crop.valid())
        throw std::runtime_error("scene config: camera.crop_min exceeds crop_max");
      cam.crop = crop;
    }
    cam.depth_pattern = doc.get_string("camera.depth_pattern", "");
    if (!cam.depth_pattern.empty() &&
        cam.depth_pattern.find("%d") == std::string::npos)
      throw std::runtime_error(
          "scene config: camera.depth_pattern needs a %d placeholder");
    if (!cam.depth_pattern.empty())
      cam.depth_pattern = resolve(cam.depth_pattern).string();
    scene.camera = cam;
  }

  return scene;
}

}  // namespace taxelsim
