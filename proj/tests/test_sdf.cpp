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

#include "taxelsim/sdf.hpp"

#include <random>

#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"

using namespace taxelsim;
using testsupport::TempDir;

TEST_CASE("analytic sphere SDF") {
  SpherePrimitive sphere{{0, 0, 0}, 1.0};
  SdfSample s = analytic_sdf(sphere, {2, 0, 0});
  CHECK(s.distance == Catch::Approx(1.0).margin(1e-15));
  CHECK(norm(s.normal - Vec3{1, 0, 0}) < 1e-15);

  SdfSample inside = analytic_sdf(sphere, {0, 0.25, 0});
  CHECK(inside.distance == Catch::Approx(-0.75).margin(1e-15));
  CHECK(norm(inside.normal - Vec3{0, 1, 0}) < 1e-15);

  REQUIRE_THROWS(analytic_sdf(SpherePrimitive{{0, 0, 0}, -1.0}, {0, 0, 0}));
}

TEST_CASE("analytic plane SDF") {
  PlanePrimitive plane{{0, 0, 0}, {0, 0, 1}};
  SdfSample s = analytic_sdf(plane, {3, 4, -0.2});
  CHECK(s.distance == Catch::Approx(-0.2).margin(1e-15));
  CHECK(norm(s.normal - Vec3{0, 0, 1}) < 1e-15);
}

TEST_CASE("analytic box SDF, outside diagonal") {
  BoxPrimitive box{{0, 0, 0}, {1, 1, 1}};
  SdfSample s = analytic_sdf(box, {2, 2, 0});
  CHECK(s.distance == Catch::Approx(std::sqrt(2.0)).margin(1e-15));
  double c = std::sqrt(2.0) / 2.0;
  CHECK(norm(s.normal - Vec3{c, c, 0}) < 1e-15);

  SdfSample inside = analytic_sdf(box, {0.9, 0, 0});
  CHECK(inside.distance == Catch::Approx(-0.1).margin(1e-15));
  CHECK(norm(inside.normal - Vec3{1, 0, 0}) < 1e-15);
}

TEST_CASE("analytic box SDF gradient matches finite differences") {
  BoxPrimitive box{{0.1, -0.2, 0.3}, {0.4, 0.2, 0.6}};
  std::mt19937_64 rng(7);
  const double h = 1e-7;
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    Vec3 p = testsupport::random_point(rng, -1.2, 1.2);
    SdfSample s = analytic_sdf(box, p);
    if (std::abs(s.distance) < 1e-3) continue;  // skip the surface kink
    Vec3 g{(analytic_sdf(box, p + Vec3{h, 0, 0}).distance -
            analytic_sdf(box, p - Vec3{h, 0, 0}).distance) / (2 * h),
           (analytic_sdf(box, p + Vec3{0, h, 0}).distance -
            analytic_sdf(box, p - Vec3{0, h, 0}).distance) / (2 * h),
           (analytic_sdf(box, p + Vec3{0, 0, h}).distance -
            analytic_sdf(box, p - Vec3{0, 0, h}).distance) / (2 * h)};
    if (norm(g) < 0.5) continue;  // medial-axis neighborhoods
    CHECK(norm(normalized(g) - s.normal) < 1e-4);
    ++checked;
  }
  CHECK(checked > 100);
}

TEST_CASE("cube grid stores -0.5 at the center node") {
  TriangleMesh cube = make_box_mesh({0, 0, 0}, {0.5, 0.5, 0.5});
  SdfGrid grid = build_sdf_grid(cube, 0.05);
  // origin sits at -0.6; node (12,12,12) is the cube center
  SdfSample s = sdf_query(grid, {0, 0, 0});
  CHECK(s.distance == Catch::Approx(-0.5).margin(0.05));
}

TEST_CASE("icosphere grid stores -r at the center") {
  TriangleMesh sphere = make_icosphere_mesh({0, 0, 0}, 0.1, 3);
  SdfGrid grid = build_sdf_grid(sphere, 0.005);
  SdfSample s = sdf_query(grid, {0, 0, 0});
  CHECK(s.distance == Catch::Approx(-0.1).margin(0.005));
}

TEST_CASE("non-watertight mesh is rejected") {
  TriangleMesh open = make_box_mesh({0, 0, 0}, {0.5, 0.5, 0.5});
  open.triangles.pop_back();
  open.normals.pop_back();
  REQUIRE_THROWS_WITH(build_sdf_grid(open, 0.05),
                      Catch::Matchers::ContainsSubstring("not watertight"));
}

TEST_CASE("node budget is enforced") {
  TriangleMesh cube = make_box_mesh({0, 0, 0}, {0.5, 0.5, 0.5});
  SdfBuildOptions opts;
  opts.node_budget = 1000;
  REQUIRE_THROWS_WITH(build_sdf_grid(cube, 0.05, opts),
                      Catch::Matchers::ContainsSubstring("budget"));
}

TEST_CASE("query on a stored grid node returns the stored value") {
  TriangleMesh cube = make_box_mesh({0, 0, 0}, {0.5, 0.5, 0.5});
  SdfGrid grid = build_sdf_grid(cube, 0.05);
  for (int k : {0, 5, 12}) {
    Vec3 node = grid.node_position(k, k + 3, k + 1);
    CHECK(sdf_distance(grid, node) ==
          Catch::Approx(grid.at(k, k + 3, k + 1)).margin(1e-12));
  }
}

TEST_CASE("sphere grid matches the analytic sphere within 2 cells") {
  const double cell = 0.005;
  const double radius = 0.1;
  TriangleMesh sphere = make_icosphere_mesh({0, 0, 0}, radius, 3);
  SdfGrid grid = build_sdf_grid(sphere, cell);
  SpherePrimitive oracle{{0, 0, 0}, radius};

  std::mt19937_64 rng(11);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    Vec3 p = testsupport::random_point(rng, -0.11, 0.11);
    double got = sdf_distance(grid, p);
    double want = analytic_sdf(oracle, p).distance;
    worst = std::max(worst, std::abs(got - want));
  }
  CHECK(worst <= 2 * cell);
}

TEST_CASE("box grid matches the analytic box within 2 cells") {
  const double cell = 0.01;
  TriangleMesh cube = make_box_mesh({0, 0, 0}, {0.2, 0.15, 0.1});
  SdfGrid grid = build_sdf_grid(cube, cell);
  BoxPrimitive oracle{{0, 0, 0}, {0.2, 0.15, 0.1}};

  std::mt19937_64 rng(13);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    Vec3 p = testsupport::random_point(rng, -0.25, 0.25);
    double got = sdf_distance(grid, p);
    double want = analytic_sdf(oracle, p).distance;
    worst = std::max(worst, std::abs(got - want));
  }
  CHECK(worst <= 2 * cell);
}

TEST_CASE("outside queries extrapolate: sphere at (0.2,0,0)") {
  const double cell = 0.005;
  TriangleMesh sphere = make_icosphere_mesh({0, 0, 0}, 0.1, 3);
  SdfGrid grid = build_sdf_grid(sphere, cell);
  SdfSample s = sdf_query(grid, {0.2, 0, 0});
  CHECK(s.distance == Catch::Approx(0.1).margin(2 * cell));
  CHECK(dot(s.normal, Vec3{1, 0, 0}) > 0.95);

  SdfSample inside = sdf_query(grid, {0.05, 0, 0});
  CHECK(inside.distance == Catch::Approx(-0.05).margin(2 * cell));
}

TEST_CASE("grid normals track the analytic box normal away from edges") {
  const double cell = 0.01;
  Vec3 half{0.2, 0.15, 0.1};
  TriangleMesh cube = make_box_mesh({0, 0, 0}, half);
  SdfGrid grid = build_sdf_grid(cube, cell);
  BoxPrimitive oracle{{0, 0, 0}, half};

  std::mt19937_64 rng(17);
  int checked = 0;
  for (int i = 0; i < 20000 && checked < 2000; ++i) {
    Vec3 p = testsupport::random_point(rng, -0.28, 0.28);
    // keep points whose nearest box feature is a face, at least 2 cells from
    // the edges of that face
    Vec3 q{std::abs(p.x) - half.x, std::abs(p.y) - half.y,
           std::abs(p.z) - half.z};
    int positive = (q.x > 0) + (q.y > 0) + (q.z > 0);
    if (positive != 1) continue;
    double clearance = std::min({q.x > 0 ? -std::max(q.y, q.z) : 1e9,
                                 q.y > 0 ? -std::max(q.x, q.z) : 1e9,
                                 q.z > 0 ? -std::max(q.x, q.y) : 1e9});
    if (clearance < 2 * cell) continue;
    SdfSample got = sdf_query(grid, p);
    SdfSample want = analytic_sdf(oracle, p);
    CHECK(dot(got.normal, want.normal) >= 0.95);
    ++checked;
  }
  CHECK(checked >= 1000);
}

TEST_CASE("grid sign agrees with analytic inside/outside away from surface") {
  const double cell = 0.005;
  const double radius = 0.1;
  TriangleMesh sphere = make_icosphere_mesh({0, 0, 0}, radius, 3);
  SdfGrid grid = build_sdf_grid(sphere, cell);
  SpherePrimitive oracle{{0, 0, 0}, radius};

  std::mt19937_64 rng(19);
  int agree = 0, total = 0;
  for (int i = 0; i < 20000; ++i) {
    Vec3 p = testsupport::random_point(rng, -0.12, 0.12);
    double want = analytic_sdf(oracle, p).distance;
    if (std::abs(want) < cell) continue;  // skip the surface band
    ++total;
    double got = sdf_distance(grid, p);
    if ((got < 0) == (want < 0)) ++agree;
  }
  REQUIRE(total > 10000);
  CHECK(static_cast<double>(agree) / total >= 0.999);
}

TEST_CASE("translated build reproduces distances at translated points") {
  const double cell = 0.01;
  TriangleMesh cube = make_box_mesh({0, 0, 0}, {0.2, 0.15, 0.1});
  SdfGrid base = build_sdf_grid(cube, cell);

  Vec3 shift = Vec3{16, -8, 4} * cell;  // keeps the cell alignment
  TriangleMesh moved = cube;
  for (Vec3& v : moved.vertices) v += shift;
  SdfGrid shifted = build_sdf_grid(moved, cell);

  std::mt19937_64 rng(23);
  for (int i = 0; i < 2000; ++i) {
    Vec3 p = testsupport::random_point(rng, -0.3, 0.3);
    double a = sdf_distance(base, p);
    double b = sdf_distance(shifted, p + shift);
    CHECK(std::abs(a - b) < 1e-9);
  }
}

TEST_CASE("TSDF round trip") {
  TempDir dir("sdf_io");
  TriangleMesh cube = make_box_mesh({0, 0, 0}, {0.1, 0.1, 0.1});
  SdfGrid grid = build_sdf_grid(cube, 0.02);

  save_sdf_grid(dir.file("grid.tsdf"), grid);
  SdfGrid f32 = load_sdf_grid(dir.file("grid.tsdf"));
  REQUIRE(f32.nx == grid.nx);
  REQUIRE(f32.values.size() == grid.values.size());
  for (std::size_t i = 0; i < grid.values.size(); ++i)
    CHECK(f32.values[i] ==
          Catch::Approx(grid.values[i]).margin(1e-6 * (1 + std::abs(grid.values[i]))));

  save_sdf_grid(dir.file("grid64.tsdf"), grid, /*full_precision=*/true);
  SdfGrid f64 = load_sdf_grid(dir.file("grid64.tsdf"));
  for (std::size_t i = 0; i < grid.values.size(); ++i)
    CHECK(f64.values[i] == grid.values[i]);

  // corrupt magic
  {
    std::ofstream os(dir.file("bad.tsdf"), std::ios::binary);
    os << "NOPE";
  }
  REQUIRE_THROWS(load_sdf_grid(dir.file("bad.tsdf")));
}
