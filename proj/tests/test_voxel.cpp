#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "voxlang/voxel.hpp"

using namespace voxlang;

namespace {

// hand-rolled slab entry distance, kept separate from ray_box on purpose
double slab_depth(const Ray& r, const Box3D& b) {
  double tmin = 0.0, tmax = 1e300;
  for (int i = 0; i < 3; ++i) {
    double lo = b.min()[i], hi = b.max()[i];
    if (r.dir[i] == 0.0) {
      if (r.origin[i] < lo || r.origin[i] > hi) return 0.0;
      continue;
    }
    double a = (lo - r.origin[i]) / r.dir[i];
    double c = (hi - r.origin[i]) / r.dir[i];
    if (a > c) std::swap(a, c);
    tmin = std::max(tmin, a);
    tmax = std::min(tmax, c);
  }
  return tmin <= tmax ? tmin : 0.0;
}

std::string tmp_path(const char* name) { return std::string("/tmp/voxtest_") + name; }

VoxelGrid patterned_scene_grid() {
  VoxelGrid g = make_scene_grid();
  for (int z = 0; z < g.d; ++z)
    for (int y = 0; y < g.h; ++y)
      for (int x = 0; x < g.w; ++x)
        for (int ch = 0; ch < g.c; ++ch)
          g.at(x, y, z, ch) = static_cast<float>(((x * 31 + y * 17 + z * 7 + ch * 3) % 97) * 0.01);
  return g;
}

}  // namespace

TEST_CASE("sfg files carry the documented header and round-trip the payload") {
  VoxelGrid g(5, 4, 3, 2, Box3D{Vec3::Zero(), Vec3(1, 1, 1)});
  int v = 0;
  for (int z = 0; z < 3; ++z)
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 5; ++x)
        for (int ch = 0; ch < 2; ++ch) g.at(x, y, z, ch) = static_cast<float>(v++) * 0.25f;
  std::string path = tmp_path("roundtrip.sfg");
  save_sfg(path, g);

  std::ifstream f(path, std::ios::binary);
  std::vector<unsigned char> head(24);
  f.read(reinterpret_cast<char*>(head.data()), 24);
  REQUIRE(f.good());
  CHECK(std::string(head.begin(), head.begin() + 4) == "SFG1");
  auto u32 = [&](int at) {
    return static_cast<std::uint32_t>(head[at]) | (static_cast<std::uint32_t>(head[at + 1]) << 8) |
           (static_cast<std::uint32_t>(head[at + 2]) << 16) |
           (static_cast<std::uint32_t>(head[at + 3]) << 24);
  };
  CHECK(u32(4) == 5);
  CHECK(u32(8) == 4);
  CHECK(u32(12) == 3);
  CHECK(u32(16) == 2);
  CHECK(u32(20) == 0);
  f.seekg(0, std::ios::end);
  CHECK(static_cast<std::size_t>(f.tellg()) == 24 + 4u * 5 * 4 * 3 * 2);

  VoxelGrid back = load_sfg(path);
  REQUIRE(back.w == 5);
  REQUIRE(back.h == 4);
  REQUIRE(back.d == 3);
  REQUIRE(back.c == 2);
  CHECK(back.data == g.data);
  std::remove(path.c_str());

  CHECK_THROWS_AS(load_sfg(tmp_path("missing.sfg")), IoError);
}

TEST_CASE("scene-sized sfg grids keep the scene extent") {
  VoxelGrid g = make_scene_grid();
  g.at(10, 20, 30, 5) = 1.5f;
  std::string path = tmp_path("scene.sfg");
  save_sfg(path, g);
  VoxelGrid back = load_sfg(path);
  CHECK(back.extent.center == scene_extent().center);
  CHECK(back.extent.half_extent == scene_extent().half_extent);
  CHECK(back.at(10, 20, 30, 5) == 1.5f);
  std::remove(path.c_str());
}

TEST_CASE("ppm and pgm files round-trip within quantization") {
  Camera cam;
  Box3D box{{0.2, 0.4, -0.1}, {0.4, 0.4, 0.4}};
  Image img = render_scene({box}, {Vec3(0.85, 0.10, 0.10)}, cam);
  std::string prgb = tmp_path("img.ppm"), pd = tmp_path("img.pgm");
  save_ppm(prgb, img);
  save_pgm16(pd, img);

  Image rgb_back = load_ppm(prgb);
  REQUIRE(rgb_back.width == img.width);
  REQUIRE(rgb_back.height == img.height);
  float worst = 0.0f;
  for (std::size_t i = 0; i < img.rgb.size(); ++i)
    worst = std::max(worst, std::abs(rgb_back.rgb[i] - img.rgb[i]));
  CHECK(worst <= 0.5f / 255.0f + 1e-6f);

  Image d_back;
  d_back.width = img.width;
  d_back.height = img.height;
  load_pgm16(pd, d_back);
  double worst_d = 0.0;
  for (std::size_t i = 0; i < img.depth.size(); ++i) {
    worst_d = std::max(worst_d, std::abs(static_cast<double>(d_back.depth[i]) - img.depth[i]));
    if (img.depth[i] == 0.0f) CHECK(d_back.depth[i] == 0.0f);
  }
  CHECK(worst_d <= 0.5e-3 + 1e-9);

  std::ifstream f(prgb, std::ios::binary);
  std::string magic(2, '\0');
  f.read(magic.data(), 2);
  CHECK(magic == "P6");
  std::ifstream f2(pd, std::ios::binary);
  f2.read(magic.data(), 2);
  CHECK(magic == "P5");
  std::remove(prgb.c_str());
  std::remove(pd.c_str());
}

TEST_CASE("rendering an empty scene yields background everywhere") {
  Image img = render_scene({}, {}, Camera{});
  for (float d : img.depth) CHECK(d == 0.0f);
  for (float v : img.rgb) CHECK(v == 0.0f);
  for (int id : img.id) CHECK(id == -1);
}

TEST_CASE("frontal depth equals radius minus the facing half extent") {
  Camera cam;
  cam.azimuth_deg = 0.0;
  cam.elevation_deg = 0.0;
  Box3D cube{{0, 0, 0}, {0.5, 0.5, 0.5}};
  Image img = render_scene({cube}, {Vec3(1, 1, 1)}, cam);
  // the pixel nearest the principal point
  float d = img.depth[63 * cam.width + 63];
  CHECK(std::abs(d - (cam.radius - 0.5)) < 1e-3);
}

TEST_CASE("rendered depth matches an independent slab intersection") {
  Camera cam;
  cam.azimuth_deg = 35.0;
  cam.elevation_deg = 40.0;
  Box3D box{{0.3, 0.5, -0.4}, {0.5, 0.5, 0.5}};
  Image img = render_scene({box}, {Vec3(0, 1, 0)}, cam);
  int checked = 0;
  for (int v = 0; v < cam.height; v += 2)
    for (int u = 0; u < cam.width; u += 2) {
      Ray r = camera_ray(cam, u, v);
      double expect = slab_depth(r, box);
      float got = img.depth[v * cam.width + u];
      if (expect == 0.0) {
        CHECK(got == 0.0f);
      } else {
        CHECK(std::abs(got - expect) < 1e-5);
        ++checked;
      }
    }
  CHECK(checked > 20);
}

TEST_CASE("the nearer box wins every contested pixel") {
  Box3D near{{0, 0, 1}, {0.5, 0.5, 0.5}};
  Box3D far{{0, 0, -1}, {0.5, 0.5, 0.5}};
  Camera cam;
  cam.azimuth_deg = 0.0;
  cam.elevation_deg = 0.0;
  Image img = render_scene({near, far}, {Vec3(1, 0, 0), Vec3(0, 0, 1)}, cam);
  int fg = 0;
  for (std::size_t i = 0; i < img.depth.size(); ++i) {
    if (img.depth[i] == 0.0f) continue;
    ++fg;
    CHECK(img.id[i] == 0);
    CHECK(img.rgb[3 * i + 0] == 1.0f);
  }
  CHECK(fg > 100);
}

TEST_CASE("unprojecting background-only views gives a zero grid") {
  Image img;
  Camera cam;
  img.width = cam.width;
  img.height = cam.height;
  img.rgb.assign(static_cast<std::size_t>(img.width) * img.height * 3, 0.0f);
  img.depth.assign(static_cast<std::size_t>(img.width) * img.height, 0.0f);
  VoxelGrid g = unproject({img}, {cam});
  for (float v : g.data) CHECK(v == 0.0f);
}

TEST_CASE("a single foreground pixel writes exactly one voxel") {
  Camera cam;
  cam.azimuth_deg = 20.0;
  Image img;
  img.width = cam.width;
  img.height = cam.height;
  img.rgb.assign(static_cast<std::size_t>(img.width) * img.height * 3, 0.0f);
  img.depth.assign(static_cast<std::size_t>(img.width) * img.height, 0.0f);
  const int u = 40, v = 70;
  const double d = 8.0;
  img.depth[v * img.width + u] = static_cast<float>(d);
  img.rgb[3 * (v * img.width + u) + 0] = 0.85f;
  img.rgb[3 * (v * img.width + u) + 1] = 0.10f;
  img.rgb[3 * (v * img.width + u) + 2] = 0.10f;

  VoxelGrid g = unproject({img}, {cam});
  Ray r = camera_ray(cam, u, v);
  Vec3 p = r.origin + d * r.dir;
  int xi, yi, zi;
  REQUIRE(g.locate(p, xi, yi, zi));
  CHECK(g.at(xi, yi, zi, kChanOccupancy) == 1.0f);
  CHECK(g.at(xi, yi, zi, kChanColor + 0) == 1.0f);  // red is the nearest palette color
  int nonzero = 0;
  for (float val : g.data) nonzero += (val != 0.0f);
  CHECK(nonzero == 2);

  // a point past the grid boundary is a hard error when it is all there is
  img.depth[v * img.width + u] = 100.0f;
  CHECK_THROWS_AS(unproject({img}, {cam}), GeometryError);
}

TEST_CASE("unprojected occupancy hugs the rendered box") {
  Box3D box{{0.3, 0.35, -0.2}, {0.35, 0.35, 0.35}};
  auto cams = training_cameras();
  std::vector<Image> views;
  views.reserve(cams.size());
  for (const auto& cam : cams) views.push_back(render_scene({box}, {Vec3(0.1, 0.25, 0.85)}, cam));
  VoxelGrid g = unproject(views, cams);
  Vec3 pitch = g.pitch();
  Box3D dilated{box.center, box.half_extent + pitch};
  int occupied = 0;
  for (int z = 0; z < g.d; ++z)
    for (int y = 0; y < g.h; ++y)
      for (int x = 0; x < g.w; ++x) {
        if (g.at(x, y, z, kChanOccupancy) == 0.0f) continue;
        ++occupied;
        CHECK(testutil::point_in_box(g.voxel_center(x, y, z), dilated));
      }
  CHECK(occupied > 50);
}

// The one-pitch round trip has two requirements: the image must resolve the
// grid (pixel footprint under one pitch everywhere, so no face voxel goes
// unwritten), and each face plane must sit just inside the outer boundary of
// its voxel slab. Otherwise a ray entering the slab at grazing incidence
// registers depth early by (slab offset)/(incidence cosine), and whole faces
// miss the tolerance together. Boxes dimensioned on the voxel lattice with
// half extents a hair under a voxel multiple satisfy the phase condition at
// every face.
TEST_CASE("projecting an unprojected view reproduces depth on grid-aligned boxes") {
  const double p = 3.0 / 32.0;
  const double eps = 1e-6;
  Box3D a{Vec3(-8 * p, 5 * p - eps, 3 * p), Vec3(5 * p - eps, 5 * p - eps, 5 * p - eps)};
  Box3D b{Vec3(10 * p, 4 * p - eps, -6 * p), Vec3(4 * p - eps, 4 * p - eps, 6 * p - eps)};
  for (double el : {12.0, 40.0}) {
    for (double az : {30.0, 90.0}) {
      Camera cam;
      cam.azimuth_deg = az;
      cam.elevation_deg = el;
      cam.width = 320;
      cam.height = 320;
      cam.focal = 110.0 * 320 / 128.0;
      cam.cx = 160.0;
      cam.cy = 160.0;
      Image img = render_scene({a, b}, {Vec3(1, 0, 0), Vec3(0, 0, 1)}, cam);
      VoxelGrid g = unproject({img}, {cam});
      Image back = project(g, cam);
      const double pitch = g.pitch().x();
      int fg = 0, close = 0;
      for (std::size_t i = 0; i < img.depth.size(); ++i) {
        if (img.depth[i] == 0.0f) continue;
        ++fg;
        close += std::abs(back.depth[i] - img.depth[i]) <= pitch;
      }
      REQUIRE(fg > 1500);
      CHECK(static_cast<double>(close) / fg >= 0.95);
    }
  }
}

// Unaligned boxes at an oblique view: the grazing-face phase error caps the
// one-pitch fraction well below the aligned case, but errors stay bounded by
// a few pitches almost everywhere.
TEST_CASE("oblique views of unaligned boxes reproduce depth within a few pitches") {
  Box3D a{{-0.6, 0.5, 0.2}, {0.5, 0.5, 0.5}};
  Box3D b{{0.9, 0.6, -0.4}, {0.6, 0.6, 0.6}};
  Camera cam;
  cam.azimuth_deg = 70.0;
  Image img = render_scene({a, b}, {Vec3(1, 0, 0), Vec3(0, 0, 1)}, cam);
  VoxelGrid g = unproject({img}, {cam});
  Image back = project(g, cam);
  const double pitch = g.pitch().x();
  int fg = 0, close1 = 0, close3 = 0;
  for (std::size_t i = 0; i < img.depth.size(); ++i) {
    if (img.depth[i] == 0.0f) continue;
    ++fg;
    double e = std::abs(back.depth[i] - img.depth[i]);
    close1 += e <= pitch;
    close3 += e <= 3 * pitch;
  }
  REQUIRE(fg > 500);
  CHECK(static_cast<double>(close1) / fg >= 0.70);
  CHECK(static_cast<double>(close3) / fg >= 0.93);
}

TEST_CASE("projecting a zero grid gives background") {
  Image img = project(make_scene_grid(), Camera{});
  for (float d : img.depth) CHECK(d == 0.0f);
}

TEST_CASE("a voxel-aligned crop is an identity copy") {
  VoxelGrid g = patterned_scene_grid();
  // voxels 8..23 per axis: center -1.5, half extent 8 * pitch
  Box3D box{{-1.5, -1.5, -1.5}, {0.75, 0.75, 0.75}};
  ObjectTensor t = crop_and_resize(g, box);
  REQUIRE(t.grid.w == 16);
  CHECK(t.size == Vec3(1.5, 1.5, 1.5));
  for (int z = 0; z < 16; ++z)
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x)
        for (int ch = 0; ch < g.c; ++ch)
          CHECK(t.grid.at(x, y, z, ch) == g.at(8 + x, 8 + y, 8 + z, ch));
}

TEST_CASE("cropping a constant grid yields the constant") {
  VoxelGrid g(20, 20, 20, 3, Box3D{Vec3::Zero(), Vec3(1, 1, 1)});
  std::fill(g.data.begin(), g.data.end(), 0.625f);
  ObjectTensor t = crop_and_resize(g, Box3D{{0.31, -0.4, 0.09}, {0.53, 0.21, 0.37}});
  for (float v : t.grid.data) CHECK(v == doctest::Approx(0.625f));
  CHECK_THROWS_AS(crop_and_resize(g, Box3D{{5, 5, 5}, {0.1, 0.1, 0.1}}), GeometryError);
}

TEST_CASE("crop then resize back stays within five percent rms") {
  VoxelGrid g(48, 48, 48, 1, Box3D{Vec3::Zero(), Vec3(3, 3, 3)});
  for (int z = 0; z < g.d; ++z)
    for (int y = 0; y < g.h; ++y)
      for (int x = 0; x < g.w; ++x) {
        Vec3 p = g.voxel_center(x, y, z);
        g.at(x, y, z, 0) =
            static_cast<float>(2.0 + std::sin(p.x()) * std::cos(0.8 * p.y()) * std::sin(0.6 * p.z()));
      }
  Box3D box{{0, 0, 0}, {1.5, 1.5, 1.5}};
  ObjectTensor t = crop_and_resize(g, box);
  VoxelGrid back = resize(t.grid, t.size);
  REQUIRE(back.w == 32);  // a 3-unit span at the scene pitch
  double num = 0.0, den = 0.0;
  for (int z = 0; z < back.d; ++z)
    for (int y = 0; y < back.h; ++y)
      for (int x = 0; x < back.w; ++x) {
        Vec3 p = back.voxel_center(x, y, z) + box.center;
        double ref = g.sample(p, 0);
        double err = back.at(x, y, z, 0) - ref;
        num += err * err;
        den += ref * ref;
      }
  CHECK(std::sqrt(num / den) < 0.05);
}

TEST_CASE("resize at the native pitch copies through exactly") {
  const double pitch = 6.0 / kSceneGridN;
  VoxelGrid t(16, 16, 16, 2, Box3D{Vec3::Zero(), Vec3(0.75, 0.75, 0.75)});
  for (std::size_t i = 0; i < t.data.size(); ++i) t.data[i] = static_cast<float>(i % 37) * 0.1f;
  VoxelGrid out = resize(t, Vec3(16 * pitch, 16 * pitch, 16 * pitch));
  REQUIRE(out.w == 16);
  REQUIRE(out.h == 16);
  REQUIRE(out.d == 16);
  CHECK(out.data == t.data);
}

TEST_CASE("upscale then downscale stays within five percent rms") {
  VoxelGrid t(16, 16, 16, 1, Box3D{Vec3::Zero(), Vec3(0.75, 0.75, 0.75)});
  for (int z = 0; z < 16; ++z)
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x)
        t.at(x, y, z, 0) = static_cast<float>(
            2.0 + std::sin(0.4 * x) * std::cos(0.3 * y) * std::sin(0.5 * z));
  const double pitch = 6.0 / kSceneGridN;
  VoxelGrid up = resize(t, Vec3(32 * pitch, 32 * pitch, 32 * pitch));
  REQUIRE(up.w == 32);
  VoxelGrid down = resize(up, Vec3(16 * pitch, 16 * pitch, 16 * pitch));
  REQUIRE(down.w == 16);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < t.data.size(); ++i) {
    double err = down.data[i] - t.data[i];
    num += err * err;
    den += static_cast<double>(t.data[i]) * t.data[i];
  }
  CHECK(std::sqrt(num / den) < 0.05);
  CHECK_THROWS_AS(resize(t, Vec3(0.0, 1.0, 1.0)), std::invalid_argument);
}

TEST_CASE("drawing into a zero canvas places the block verbatim") {
  VoxelGrid canvas(16, 16, 16, 2, Box3D{Vec3::Zero(), Vec3(0.75, 0.75, 0.75)});
  VoxelGrid block(4, 4, 4, 2, Box3D{Vec3::Zero(), Vec3(0.1875, 0.1875, 0.1875)});
  for (std::size_t i = 0; i < block.data.size(); ++i)
    block.data[i] = static_cast<float>(i + 1) * 0.03f;
  // canvas voxel (6,6,6) is the block's minimum corner
  Vec3 loc = canvas.extent.min() + Vec3(8, 8, 8) * canvas.pitch().x();
  int clipped = draw(canvas, block, loc);
  CHECK(clipped == 0);
  for (int z = 0; z < 16; ++z)
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x)
        for (int ch = 0; ch < 2; ++ch) {
          bool in = x >= 6 && x < 10 && y >= 6 && y < 10 && z >= 6 && z < 10;
          float want = in ? block.at(x - 6, y - 6, z - 6, ch) : 0.0f;
          CHECK(canvas.at(x, y, z, ch) == want);
        }
}

TEST_CASE("draw is linear and order-independent") {
  auto fresh = [] {
    return VoxelGrid(16, 16, 16, 1, Box3D{Vec3::Zero(), Vec3(0.75, 0.75, 0.75)});
  };
  VoxelGrid a(4, 4, 4, 1, Box3D{Vec3::Zero(), Vec3(0.1875, 0.1875, 0.1875)});
  VoxelGrid b = a;
  Rng rng(3);
  for (auto& v : a.data) v = static_cast<float>(rng.uniform(-1, 1));
  for (auto& v : b.data) v = static_cast<float>(rng.uniform(-1, 1));
  VoxelGrid ab = a;
  for (std::size_t i = 0; i < ab.data.size(); ++i) ab.data[i] += b.data[i];

  Vec3 l1 = Vec3(-0.1, 0.05, 0.0), l2 = Vec3(0.02, -0.04, 0.08);  // overlapping placements

  VoxelGrid sum_first = fresh();
  draw(sum_first, ab, l1);
  VoxelGrid one_by_one = fresh();
  draw(one_by_one, a, l1);
  draw(one_by_one, b, l1);
  CHECK(sum_first.data == one_by_one.data);

  VoxelGrid order1 = fresh();
  draw(order1, a, l1);
  draw(order1, b, l2);
  VoxelGrid order2 = fresh();
  draw(order2, b, l2);
  draw(order2, a, l1);
  CHECK(order1.data == order2.data);
}

TEST_CASE("disjoint draws do not interact") {
  auto fresh = [] {
    return VoxelGrid(16, 16, 16, 1, Box3D{Vec3::Zero(), Vec3(0.75, 0.75, 0.75)});
  };
  VoxelGrid a(3, 3, 3, 1, Box3D{Vec3::Zero(), Vec3(1, 1, 1)});
  VoxelGrid b = a;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    a.data[i] = static_cast<float>(i) + 1.0f;
    b.data[i] = 100.0f - static_cast<float>(i);
  }
  Vec3 la(-0.4, -0.4, -0.4), lb(0.4, 0.4, 0.4);
  VoxelGrid both = fresh(), only_a = fresh(), only_b = fresh();
  draw(both, a, la);
  draw(both, b, lb);
  draw(only_a, a, la);
  draw(only_b, b, lb);
  for (std::size_t i = 0; i < both.data.size(); ++i) {
    if (only_a.data[i] != 0.0f) CHECK(both.data[i] == only_a.data[i]);
    if (only_b.data[i] != 0.0f) CHECK(both.data[i] == only_b.data[i]);
  }
}

TEST_CASE("draws at the boundary clip and report the lost voxels") {
  VoxelGrid canvas(64, 64, 64, 1, scene_extent());
  VoxelGrid block(4, 4, 4, 1, Box3D{Vec3::Zero(), Vec3(0.1875, 0.1875, 0.1875)});
  std::fill(block.data.begin(), block.data.end(), 1.0f);
  // centered on the -x face: two of four x-slabs fall outside
  int clipped = draw(canvas, block, Vec3(-3.0, 0.0, 0.0));
  CHECK(clipped == 2 * 4 * 4);
  double total = 0.0;
  for (float v : canvas.data) total += v;
  CHECK(total == doctest::Approx(64 - 32).epsilon(1e-12));
  CHECK_THROWS_AS(draw(canvas, block, Vec3(-3.01, 0.0, 0.0)), GeometryError);
}
