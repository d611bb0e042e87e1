#include "voxlang/voxel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace voxlang {

Box3D scene_extent() { return Box3D{Vec3::Zero(), Vec3(3.0, 3.0, 3.0)}; }

VoxelGrid::VoxelGrid(int w_, int h_, int d_, int c_, const Box3D& extent_)
    : w(w_), h(h_), d(d_), c(c_), extent(extent_) {
  if (w <= 0 || h <= 0 || d <= 0 || c <= 0) throw std::invalid_argument("bad grid dims");
  data.assign(static_cast<std::size_t>(w) * h * d * c, 0.0f);
}

Vec3 VoxelGrid::pitch() const {
  Vec3 size = 2.0 * extent.half_extent;
  return {size.x() / w, size.y() / h, size.z() / d};
}

Vec3 VoxelGrid::voxel_center(int x, int y, int z) const {
  Vec3 p = pitch();
  Vec3 lo = extent.min();
  return {lo.x() + (x + 0.5) * p.x(), lo.y() + (y + 0.5) * p.y(), lo.z() + (z + 0.5) * p.z()};
}

bool VoxelGrid::locate(const Vec3& p, int& x, int& y, int& z) const {
  Vec3 q = (p - extent.min()).cwiseQuotient(pitch());
  x = static_cast<int>(std::floor(q.x()));
  y = static_cast<int>(std::floor(q.y()));
  z = static_cast<int>(std::floor(q.z()));
  return x >= 0 && x < w && y >= 0 && y < h && z >= 0 && z < d;
}

float VoxelGrid::sample(const Vec3& p, int ch) const {
  Vec3 lo = extent.min(), hi = extent.max();
  for (int i = 0; i < 3; ++i)
    if (p[i] < lo[i] || p[i] > hi[i]) return 0.0f;
  Vec3 q = (p - lo).cwiseQuotient(pitch()) - Vec3(0.5, 0.5, 0.5);
  double fx = std::clamp(q.x(), 0.0, static_cast<double>(w - 1));
  double fy = std::clamp(q.y(), 0.0, static_cast<double>(h - 1));
  double fz = std::clamp(q.z(), 0.0, static_cast<double>(d - 1));
  int x0 = std::min(static_cast<int>(fx), w - 2 >= 0 ? w - 2 : 0);
  int y0 = std::min(static_cast<int>(fy), h - 2 >= 0 ? h - 2 : 0);
  int z0 = std::min(static_cast<int>(fz), d - 2 >= 0 ? d - 2 : 0);
  if (w == 1) x0 = 0;
  if (h == 1) y0 = 0;
  if (d == 1) z0 = 0;
  int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1), z1 = std::min(z0 + 1, d - 1);
  double tx = fx - x0, ty = fy - y0, tz = fz - z0;
  auto v = [&](int x, int y, int z) { return static_cast<double>(at(x, y, z, ch)); };
  double c00 = v(x0, y0, z0) * (1 - tx) + v(x1, y0, z0) * tx;
  double c10 = v(x0, y1, z0) * (1 - tx) + v(x1, y1, z0) * tx;
  double c01 = v(x0, y0, z1) * (1 - tx) + v(x1, y0, z1) * tx;
  double c11 = v(x0, y1, z1) * (1 - tx) + v(x1, y1, z1) * tx;
  double c0 = c00 * (1 - ty) + c10 * ty;
  double c1 = c01 * (1 - ty) + c11 * ty;
  return static_cast<float>(c0 * (1 - tz) + c1 * tz);
}

VoxelGrid make_scene_grid() {
  return VoxelGrid(kSceneGridN, kSceneGridN, kSceneGridN, kSceneGridC, scene_extent());
}

// ---------------------------------------------------------------------------

namespace {

void put_u32(std::ofstream& f, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  f.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::ifstream& f) {
  unsigned char b[4];
  f.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void save_sfg(const std::string& path, const VoxelGrid& g) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for write: " + path);
  f.write("SFG1", 4);
  put_u32(f, static_cast<std::uint32_t>(g.w));
  put_u32(f, static_cast<std::uint32_t>(g.h));
  put_u32(f, static_cast<std::uint32_t>(g.d));
  put_u32(f, static_cast<std::uint32_t>(g.c));
  const char pad[4] = {0, 0, 0, 0};
  f.write(pad, 4);
  std::vector<float> plane(static_cast<std::size_t>(g.w) * g.h * g.d);
  for (int ch = 0; ch < g.c; ++ch) {
    std::size_t i = 0;
    for (int z = 0; z < g.d; ++z)
      for (int y = 0; y < g.h; ++y)
        for (int x = 0; x < g.w; ++x) plane[i++] = g.at(x, y, z, ch);
    static_assert(sizeof(float) == 4);
    f.write(reinterpret_cast<const char*>(plane.data()),
            static_cast<std::streamsize>(plane.size() * 4));
  }
  if (!f) throw IoError("write failed: " + path);
}

VoxelGrid load_sfg(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "SFG1", 4) != 0) throw IoError("not an SFG1 file: " + path);
  std::uint32_t w = get_u32(f), h = get_u32(f), d = get_u32(f), c = get_u32(f);
  char pad[4];
  f.read(pad, 4);
  if (!f || w == 0 || h == 0 || d == 0 || c == 0 || w > 4096 || h > 4096 || d > 4096 || c > 4096)
    throw IoError("bad SFG1 header: " + path);
  Box3D extent = scene_extent();
  if (!(w == kSceneGridN && h == kSceneGridN && d == kSceneGridN)) {
    Vec3 p = scene_extent().half_extent * 2.0 / kSceneGridN;
    extent = Box3D{Vec3::Zero(), Vec3(w * p.x(), h * p.y(), d * p.z()) * 0.5};
  }
  VoxelGrid g(static_cast<int>(w), static_cast<int>(h), static_cast<int>(d), static_cast<int>(c),
              extent);
  std::vector<float> plane(static_cast<std::size_t>(w) * h * d);
  for (std::uint32_t ch = 0; ch < c; ++ch) {
    f.read(reinterpret_cast<char*>(plane.data()), static_cast<std::streamsize>(plane.size() * 4));
    if (!f) throw IoError("truncated SFG1 payload: " + path);
    std::size_t i = 0;
    for (std::uint32_t z = 0; z < d; ++z)
      for (std::uint32_t y = 0; y < h; ++y)
        for (std::uint32_t x = 0; x < w; ++x)
          g.at(static_cast<int>(x), static_cast<int>(y), static_cast<int>(z),
               static_cast<int>(ch)) = plane[i++];
  }
  return g;
}

// ---------------------------------------------------------------------------

bool ray_box(const Ray& ray, const Box3D& box, Hit& hit) {
  Vec3 lo = box.min(), hi = box.max();
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i) {
    if (ray.dir[i] == 0.0) {
      if (ray.origin[i] < lo[i] || ray.origin[i] > hi[i]) return false;
      continue;
    }
    double inv = 1.0 / ray.dir[i];
    double a = (lo[i] - ray.origin[i]) * inv;
    double b = (hi[i] - ray.origin[i]) * inv;
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
    if (t0 > t1) return false;
  }
  hit = {t0, t1};
  return true;
}

Image render_scene(const std::vector<Box3D>& boxes, const std::vector<Vec3>& colors,
                   const Camera& cam) {
  if (boxes.size() != colors.size()) throw std::invalid_argument("boxes/colors size mismatch");
  Image img;
  img.width = cam.width;
  img.height = cam.height;
  img.rgb.assign(static_cast<std::size_t>(cam.width) * cam.height * 3, 0.0f);
  img.depth.assign(static_cast<std::size_t>(cam.width) * cam.height, 0.0f);
  img.id.assign(static_cast<std::size_t>(cam.width) * cam.height, -1);
  for (int v = 0; v < cam.height; ++v) {
    for (int u = 0; u < cam.width; ++u) {
      Ray ray = camera_ray(cam, u, v);
      double best = std::numeric_limits<double>::infinity();
      int best_i = -1;
      for (std::size_t i = 0; i < boxes.size(); ++i) {
        Hit h;
        if (!ray_box(ray, boxes[i], h)) continue;
        if (h.t1 < 0) continue;
        double t = h.t0 >= 0 ? h.t0 : h.t1;
        if (t < best) {
          best = t;
          best_i = static_cast<int>(i);
        }
      }
      if (best_i < 0) continue;
      std::size_t px = static_cast<std::size_t>(v) * cam.width + u;
      img.depth[px] = static_cast<float>(best);
      img.id[px] = best_i;
      const Vec3& c = colors[best_i];
      img.rgb[px * 3 + 0] = static_cast<float>(c.x());
      img.rgb[px * 3 + 1] = static_cast<float>(c.y());
      img.rgb[px * 3 + 2] = static_cast<float>(c.z());
    }
  }
  return img;
}

// ---------------------------------------------------------------------------

namespace {

// Reads one netpbm header token, skipping whitespace and # comments.
std::string pnm_token(std::ifstream& f) {
  std::string t;
  int ch;
  while ((ch = f.get()) != EOF) {
    if (ch == '#') {
      while ((ch = f.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!t.empty()) break;
      continue;
    }
    t += static_cast<char>(ch);
  }
  return t;
}

}  // namespace

void save_ppm(const std::string& path, const Image& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for write: " + path);
  f << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(img.width) * 3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int k = 0; k < 3; ++k) {
        float v = img.rgb[(static_cast<std::size_t>(y) * img.width + x) * 3 + k];
        long q = std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f);
        row[static_cast<std::size_t>(x) * 3 + k] = static_cast<unsigned char>(q);
      }
    }
    f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!f) throw IoError("write failed: " + path);
}

Image load_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  if (pnm_token(f) != "P6") throw IoError("not a P6 ppm: " + path);
  Image img;
  img.width = std::stoi(pnm_token(f));
  img.height = std::stoi(pnm_token(f));
  int maxval = std::stoi(pnm_token(f));
  if (img.width <= 0 || img.height <= 0 || maxval != 255) throw IoError("bad ppm header: " + path);
  std::size_t n = static_cast<std::size_t>(img.width) * img.height * 3;
  std::vector<unsigned char> buf(n);
  f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
  if (!f) throw IoError("truncated ppm: " + path);
  img.rgb.resize(n);
  for (std::size_t i = 0; i < n; ++i) img.rgb[i] = buf[i] / 255.0f;
  img.depth.assign(static_cast<std::size_t>(img.width) * img.height, 0.0f);
  img.id.assign(static_cast<std::size_t>(img.width) * img.height, -1);
  return img;
}

void save_pgm16(const std::string& path, const Image& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for write: " + path);
  f << "P5\n" << img.width << " " << img.height << "\n65535\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(img.width) * 2);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double mm = std::round(img.depth[static_cast<std::size_t>(y) * img.width + x] * 1000.0);
      long q = std::lround(std::clamp(mm, 0.0, 65535.0));
      row[static_cast<std::size_t>(x) * 2 + 0] = static_cast<unsigned char>((q >> 8) & 0xff);
      row[static_cast<std::size_t>(x) * 2 + 1] = static_cast<unsigned char>(q & 0xff);
    }
    f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!f) throw IoError("write failed: " + path);
}

void load_pgm16(const std::string& path, Image& img) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  if (pnm_token(f) != "P5") throw IoError("not a P5 pgm: " + path);
  int w = std::stoi(pnm_token(f));
  int h = std::stoi(pnm_token(f));
  int maxval = std::stoi(pnm_token(f));
  if (w <= 0 || h <= 0 || maxval != 65535) throw IoError("bad pgm header: " + path);
  if (img.width == 0 && img.height == 0) {
    img.width = w;
    img.height = h;
    img.rgb.assign(static_cast<std::size_t>(w) * h * 3, 0.0f);
    img.id.assign(static_cast<std::size_t>(w) * h, -1);
  }
  if (w != img.width || h != img.height) throw IoError("pgm dims mismatch: " + path);
  std::size_t n = static_cast<std::size_t>(w) * h;
  std::vector<unsigned char> buf(n * 2);
  f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * 2));
  if (!f) throw IoError("truncated pgm: " + path);
  img.depth.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    unsigned v = (static_cast<unsigned>(buf[i * 2]) << 8) | buf[i * 2 + 1];
    img.depth[i] = static_cast<float>(v / 1000.0);
  }
}

// ---------------------------------------------------------------------------

namespace {

// Palette index nearest an rgb triple, matching color_from_rgb.
int nearest_color_index(float r, float g, float b) {
  const auto& toks = color_tokens();
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < toks.size(); ++k) {
    std::array<float, 3> c = color_rgb(toks[k]);
    double d = (r - c[0]) * (r - c[0]) + (g - c[1]) * (g - c[1]) + (b - c[2]) * (b - c[2]);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(k);
    }
  }
  return best;
}

}  // namespace

VoxelGrid unproject(const std::vector<Image>& views, const std::vector<Camera>& cams) {
  if (views.size() != cams.size() || views.empty())
    throw std::invalid_argument("views/cams mismatch");
  VoxelGrid g = make_scene_grid();
  std::size_t nvox = static_cast<std::size_t>(g.w) * g.h * g.d;
  std::vector<std::uint32_t> count(nvox, 0);
  std::vector<std::array<std::uint32_t, 8>> votes(nvox, std::array<std::uint32_t, 8>{});
  bool any_foreground = false, any_hit = false;
  for (std::size_t vi = 0; vi < views.size(); ++vi) {
    const Image& img = views[vi];
    const Camera& cam = cams[vi];
    if (img.width != cam.width || img.height != cam.height)
      throw std::invalid_argument("image does not match camera");
    for (int v = 0; v < img.height; ++v) {
      for (int u = 0; u < img.width; ++u) {
        std::size_t px = static_cast<std::size_t>(v) * img.width + u;
        float dpt = img.depth[px];
        if (dpt <= 0.0f) continue;
        any_foreground = true;
        Ray ray = camera_ray(cam, u, v);
        Vec3 p = ray.origin + ray.dir * static_cast<double>(dpt);
        int x, y, z;
        if (!g.locate(p, x, y, z)) continue;
        any_hit = true;
        std::size_t idx = static_cast<std::size_t>(z * g.h + y) * g.w + x;
        ++count[idx];
        int ci = nearest_color_index(img.rgb[px * 3 + 0], img.rgb[px * 3 + 1],
                                     img.rgb[px * 3 + 2]);
        ++votes[idx][static_cast<std::size_t>(ci)];
      }
    }
  }
  if (any_foreground && !any_hit)
    throw GeometryError("depth points all fall outside the scene grid");
  for (int z = 0; z < g.d; ++z)
    for (int y = 0; y < g.h; ++y)
      for (int x = 0; x < g.w; ++x) {
        std::size_t idx = static_cast<std::size_t>(z * g.h + y) * g.w + x;
        if (!count[idx]) continue;
        g.at(x, y, z, kChanOccupancy) = 1.0f;
        for (int k = 0; k < 8; ++k)
          g.at(x, y, z, kChanColor + k) =
              static_cast<float>(static_cast<double>(votes[idx][static_cast<std::size_t>(k)]) /
                                 count[idx]);
      }
  return g;
}

Image project(const VoxelGrid& grid, const Camera& cam) {
  Image img;
  img.width = cam.width;
  img.height = cam.height;
  img.rgb.assign(static_cast<std::size_t>(cam.width) * cam.height * 3, 0.0f);
  img.depth.assign(static_cast<std::size_t>(cam.width) * cam.height, 0.0f);
  img.id.assign(static_cast<std::size_t>(cam.width) * cam.height, -1);
  double step = grid.pitch().minCoeff() * 0.5;
  for (int v = 0; v < cam.height; ++v) {
    for (int u = 0; u < cam.width; ++u) {
      Ray ray = camera_ray(cam, u, v);
      Hit h;
      if (!ray_box(ray, grid.extent, h)) continue;
      double t = std::max(h.t0, 0.0) + step * 0.5;
      for (; t <= h.t1; t += step) {
        Vec3 p = ray.origin + ray.dir * t;
        int x, y, z;
        if (!grid.locate(p, x, y, z)) continue;
        if (grid.at(x, y, z, kChanOccupancy) <= 0.5f) continue;
        std::size_t px = static_cast<std::size_t>(v) * cam.width + u;
        img.depth[px] = static_cast<float>(t);
        int best = 0;
        float bestv = grid.at(x, y, z, kChanColor);
        for (int k = 1; k < 8; ++k) {
          float val = grid.at(x, y, z, kChanColor + k);
          if (val > bestv) {
            bestv = val;
            best = k;
          }
        }
        std::array<float, 3> c = color_rgb(color_tokens()[static_cast<std::size_t>(best)]);
        img.rgb[px * 3 + 0] = c[0];
        img.rgb[px * 3 + 1] = c[1];
        img.rgb[px * 3 + 2] = c[2];
        break;
      }
    }
  }
  return img;
}

ObjectTensor crop_and_resize(const VoxelGrid& grid, const Box3D& box, int n) {
  if (n <= 0) throw std::invalid_argument("bad crop size");
  Vec3 lo = box.min().cwiseMax(grid.extent.min());
  Vec3 hi = box.max().cwiseMin(grid.extent.max());
  if ((lo.array() >= hi.array()).any())
    throw GeometryError("crop box does not intersect the grid");
  Vec3 size = box.half_extent * 2.0;
  VoxelGrid out(n, n, n, grid.c, Box3D{Vec3::Zero(), box.half_extent});
  for (int z = 0; z < n; ++z)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        Vec3 p = box.center + out.voxel_center(x, y, z);
        for (int ch = 0; ch < grid.c; ++ch) out.at(x, y, z, ch) = grid.sample(p, ch);
      }
  return ObjectTensor{std::move(out), size};
}

VoxelGrid resize(const VoxelGrid& t, const Vec3& s) {
  if ((s.array() <= 0.0).any()) throw std::invalid_argument("resize wants a positive size");
  Vec3 pitch = scene_extent().half_extent * 2.0 / kSceneGridN;
  int nx = std::max(1, static_cast<int>(std::lround(s.x() / pitch.x())));
  int ny = std::max(1, static_cast<int>(std::lround(s.y() / pitch.y())));
  int nz = std::max(1, static_cast<int>(std::lround(s.z() / pitch.z())));
  VoxelGrid out(nx, ny, nz, t.c, Box3D{Vec3::Zero(), s * 0.5});
  // Target voxel centers in the source's fractional index space; same
  // convention as crop_and_resize so an identity scale copies through.
  auto src_coord = [](int i, int n_out, int n_in) {
    return (i + 0.5) * n_in / n_out - 0.5;
  };
  for (int z = 0; z < nz; ++z) {
    double fz = src_coord(z, nz, t.d);
    for (int y = 0; y < ny; ++y) {
      double fy = src_coord(y, ny, t.h);
      for (int x = 0; x < nx; ++x) {
        double fx = src_coord(x, nx, t.w);
        double cx = std::clamp(fx, 0.0, static_cast<double>(t.w - 1));
        double cy = std::clamp(fy, 0.0, static_cast<double>(t.h - 1));
        double cz = std::clamp(fz, 0.0, static_cast<double>(t.d - 1));
        int x0 = std::min(static_cast<int>(cx), t.w - 1);
        int y0 = std::min(static_cast<int>(cy), t.h - 1);
        int z0 = std::min(static_cast<int>(cz), t.d - 1);
        int x1 = std::min(x0 + 1, t.w - 1);
        int y1 = std::min(y0 + 1, t.h - 1);
        int z1 = std::min(z0 + 1, t.d - 1);
        double tx = cx - x0, ty = cy - y0, tz = cz - z0;
        for (int ch = 0; ch < t.c; ++ch) {
          auto v = [&](int xi, int yi, int zi) {
            return static_cast<double>(t.at(xi, yi, zi, ch));
          };
          double c00 = v(x0, y0, z0) * (1 - tx) + v(x1, y0, z0) * tx;
          double c10 = v(x0, y1, z0) * (1 - tx) + v(x1, y1, z0) * tx;
          double c01 = v(x0, y0, z1) * (1 - tx) + v(x1, y0, z1) * tx;
          double c11 = v(x0, y1, z1) * (1 - tx) + v(x1, y1, z1) * tx;
          double c0 = c00 * (1 - ty) + c10 * ty;
          double c1 = c01 * (1 - ty) + c11 * ty;
          out.at(x, y, z, ch) = static_cast<float>(c0 * (1 - tz) + c1 * tz);
        }
      }
    }
  }
  return out;
}

int draw(VoxelGrid& canvas, const VoxelGrid& block, const Vec3& location) {
  if (canvas.c != block.c) throw std::invalid_argument("channel mismatch");
  Vec3 clo = canvas.extent.min(), chi = canvas.extent.max();
  if ((location.array() < clo.array()).any() || (location.array() > chi.array()).any())
    throw GeometryError("draw location outside the canvas");
  Vec3 p = canvas.pitch();
  // Lattice-aligned placement: block voxel (0,0,0) lands at `start`.
  long sx = std::lround((location.x() - clo.x()) / p.x() - block.w * 0.5);
  long sy = std::lround((location.y() - clo.y()) / p.y() - block.h * 0.5);
  long sz = std::lround((location.z() - clo.z()) / p.z() - block.d * 0.5);
  int clipped = 0;
  for (int z = 0; z < block.d; ++z) {
    long cz = sz + z;
    for (int y = 0; y < block.h; ++y) {
      long cy = sy + y;
      for (int x = 0; x < block.w; ++x) {
        long cx = sx + x;
        if (cx < 0 || cx >= canvas.w || cy < 0 || cy >= canvas.h || cz < 0 || cz >= canvas.d) {
          ++clipped;
          continue;
        }
        for (int ch = 0; ch < canvas.c; ++ch)
          canvas.at(static_cast<int>(cx), static_cast<int>(cy), static_cast<int>(cz), ch) +=
              block.at(x, y, z, ch);
      }
    }
  }
  return clipped;
}

}  // namespace voxlang
