#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "voxlang/scene.hpp"

namespace voxlang {

// Scene feature grids are 64x64x64 with 32 channels over the world cube
// [-3,3]^3. Channel layout:
//   0      occupancy
//   1..8   color one-hot (order of color_tokens())
//   9..10  material one-hot (rubber, metal)
//   11..14 shape one-hot (cube, sphere, cylinder, bowl)
//   15..16 size one-hot (small, large)
//   17..31 reserved, always zero
// Grids built from RGB-D views carry only occupancy and color; generated
// appearance blocks fill every mentioned family and leave unmentioned
// families at 1 (the gating product treats absence as neutral).
inline constexpr int kSceneGridN = 64;
inline constexpr int kSceneGridC = 32;
inline constexpr int kChanOccupancy = 0;
inline constexpr int kChanColor = 1;     // 8 channels
inline constexpr int kChanMaterial = 9;  // 2 channels
inline constexpr int kChanShape = 11;    // 4 channels
inline constexpr int kChanSize = 15;     // 2 channels

Box3D scene_extent();  // centered at the origin, half extent (3,3,3)

// Dense voxel grid. Memory layout keeps channels fastest:
// data[((z*h + y)*w + x)*c + ch].
struct VoxelGrid {
  int w = 0, h = 0, d = 0, c = 0;
  Box3D extent;  // world region covered; voxel (0,0,0) sits at extent.min()
  std::vector<float> data;

  VoxelGrid() = default;
  VoxelGrid(int w_, int h_, int d_, int c_, const Box3D& extent_);

  std::size_t index(int x, int y, int z, int ch) const {
    return (static_cast<std::size_t>((z * h + y) * w + x)) * c + ch;
  }
  float& at(int x, int y, int z, int ch) { return data[index(x, y, z, ch)]; }
  float at(int x, int y, int z, int ch) const { return data[index(x, y, z, ch)]; }

  Vec3 pitch() const;
  Vec3 voxel_center(int x, int y, int z) const;
  // Voxel containing p; false when p falls outside the extent.
  bool locate(const Vec3& p, int& x, int& y, int& z) const;
  // Trilinear sample between voxel centers, border-clamped; exactly zero
  // outside the extent.
  float sample(const Vec3& p, int ch) const;
};

VoxelGrid make_scene_grid();

// SFG1 container: "SFG1", then w,h,d,c as u32 LE, then 4 zero bytes
// (24-byte header), then c*w*h*d float32 LE planes, channel-major with x
// fastest: file index ((ch*d + z)*h + y)*w + x.
void save_sfg(const std::string& path, const VoxelGrid& grid);
VoxelGrid load_sfg(const std::string& path);

// ---------------------------------------------------------------------------

struct Image {
  int width = 0, height = 0;
  std::vector<float> rgb;    // row-major, 3 floats per pixel, [0,1]
  std::vector<float> depth;  // Euclidean ray distance in meters, 0 = background
  std::vector<int> id;       // per-pixel box index, -1 = background (not serialized)
};

struct Hit {
  double t0, t1;
};
// Slab intersection; returns false when the ray misses the box.
bool ray_box(const Ray& ray, const Box3D& box, Hit& hit);

// Flat-shaded axis-aligned box rasterizer: nearest box wins per pixel.
Image render_scene(const std::vector<Box3D>& boxes, const std::vector<Vec3>& colors,
                   const Camera& cam);

// P6, 8-bit.
void save_ppm(const std::string& path, const Image& img);
Image load_ppm(const std::string& path);
// P5, 16-bit big-endian, millimeters, saturating at 65535.
void save_pgm16(const std::string& path, const Image& img);
void load_pgm16(const std::string& path, Image& img);

// Back-projects posed RGB-D views into a scene grid. Each foreground pixel
// writes its feature vector (occupancy 1 + one-hot of the palette color
// nearest its rgb) into the voxel containing its 3D point; voxels with
// several writes hold the average vector, so occupancy stays 1 and the
// color channels are vote fractions. Material, shape and size channels stay
// zero; those are not observable from RGB-D. Throws GeometryError when the
// views contain foreground but every point misses the grid.
VoxelGrid unproject(const std::vector<Image>& views, const std::vector<Camera>& cams);

// Ray-marches front to back at half-voxel steps; the first voxel with
// occupancy > 0.5 sets the pixel's depth and its argmax color channel the
// rgb.
Image project(const VoxelGrid& grid, const Camera& cam);

// A fixed-resolution feature block for one object. The grid's extent is the
// object's bounding box recentered at the origin; `size` is that box's full
// extent per axis.
struct ObjectTensor {
  VoxelGrid grid;
  Vec3 size;
};

// Resamples the region `box` to an n^3 block of the same channel count via
// trilinear interpolation at target voxel centers. Throws GeometryError when
// the box does not meet the grid extent.
ObjectTensor crop_and_resize(const VoxelGrid& grid, const Box3D& box, int n = 16);

// Rescales a feature block to the voxel dimensions its world size `s` spans
// at the scene-grid pitch (rounded, at least 1 per axis), resampling
// trilinearly in normalized block coordinates. The result's extent is `s`
// centered at the origin; a block already at scene pitch copies through
// exactly.
VoxelGrid resize(const VoxelGrid& t, const Vec3& s);

// Additive write of `block` into `canvas`, centered at `location` and
// aligned to the canvas lattice: block voxels map one-to-one onto canvas
// voxels (resize to canvas pitch first). Returns the number of block voxels
// clipped at the canvas boundary. Throws GeometryError when `location` lies
// outside the canvas extent.
int draw(VoxelGrid& canvas, const VoxelGrid& block, const Vec3& location);

}  // namespace voxlang
