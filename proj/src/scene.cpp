#include "voxlang/scene.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>

namespace voxlang {

namespace {

double overlap_1d(double c0, double h0, double c1, double h1) {
  double lo = std::max(c0 - h0, c1 - h1);
  double hi = std::min(c0 + h0, c1 + h1);
  return std::max(0.0, hi - lo);
}

constexpr double kPi = 3.14159265358979323846;

}  // namespace

double iou3d(const Box3D& a, const Box3D& b) {
  double inter = 1.0;
  for (int i = 0; i < 3; ++i) {
    inter *= overlap_1d(a.center[i], a.half_extent[i], b.center[i], b.half_extent[i]);
    if (inter == 0.0) return 0.0;
  }
  double uni = a.volume() + b.volume() - inter;
  return inter / uni;
}

const std::array<RelationKind, kNumRelations>& all_relations() {
  static const std::array<RelationKind, kNumRelations> k = {
      RelationKind::LeftOf,     RelationKind::RightOf,   RelationKind::InFrontOf,
      RelationKind::Behind,     RelationKind::LeftBehind, RelationKind::LeftFront,
      RelationKind::RightBehind, RelationKind::RightFront, RelationKind::Inside,
  };
  return k;
}

const std::string& relation_name(RelationKind r) {
  static const std::array<std::string, kNumRelations> k = {
      "left_of", "right_of", "in_front_of", "behind", "left_behind",
      "left_front", "right_behind", "right_front", "inside"};
  return k[static_cast<int>(r)];
}

std::optional<RelationKind> relation_from_name(const std::string& name) {
  for (RelationKind r : all_relations())
    if (relation_name(r) == name) return r;
  return std::nullopt;
}

const std::string& relation_surface(RelationKind r) {
  static const std::array<std::string, kNumRelations> k = {
      "to the left of", "to the right of", "in front of", "behind", "left behind",
      "left front of", "right behind", "right front of", "inside"};
  return k[static_cast<int>(r)];
}

RelationKind mirror_relation(RelationKind r) {
  switch (r) {
    case RelationKind::LeftOf: return RelationKind::RightOf;
    case RelationKind::RightOf: return RelationKind::LeftOf;
    case RelationKind::InFrontOf: return RelationKind::Behind;
    case RelationKind::Behind: return RelationKind::InFrontOf;
    case RelationKind::LeftBehind: return RelationKind::RightFront;
    case RelationKind::LeftFront: return RelationKind::RightBehind;
    case RelationKind::RightBehind: return RelationKind::LeftFront;
    case RelationKind::RightFront: return RelationKind::LeftBehind;
    case RelationKind::Inside: return RelationKind::Inside;
  }
  return r;
}

std::array<int, 3> relation_axis_signs(RelationKind r) {
  // x sign, y sign (always 0), z sign. Left = -x, behind = -z.
  switch (r) {
    case RelationKind::LeftOf: return {-1, 0, 0};
    case RelationKind::RightOf: return {+1, 0, 0};
    case RelationKind::InFrontOf: return {0, 0, +1};
    case RelationKind::Behind: return {0, 0, -1};
    case RelationKind::LeftBehind: return {-1, 0, -1};
    case RelationKind::LeftFront: return {-1, 0, +1};
    case RelationKind::RightBehind: return {+1, 0, -1};
    case RelationKind::RightFront: return {+1, 0, +1};
    case RelationKind::Inside: return {0, 0, 0};
  }
  return {0, 0, 0};
}

bool relation_oracle(RelationKind rel, const Box3D& a, const Box3D& b, double margin) {
  if (rel == RelationKind::Inside) {
    for (int i = 0; i < 3; ++i) {
      if (std::abs(a.center[i] - b.center[i]) + a.half_extent[i] >
          b.half_extent[i] + 1e-9)
        return false;
    }
    return true;
  }
  auto signs = relation_axis_signs(rel);
  for (int i = 0; i < 3; ++i) {
    if (signs[i] == 0) continue;
    double d = a.center[i] - b.center[i];
    if (signs[i] > 0 ? (d < margin) : (-d < margin)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& size_tokens() {
  static const std::vector<std::string> k = {"small", "large"};
  return k;
}

const std::vector<std::string>& color_tokens() {
  static const std::vector<std::string> k = {"red",  "blue",   "green", "yellow",
                                             "cyan", "purple", "brown", "gray"};
  return k;
}

const std::vector<std::string>& material_tokens() {
  static const std::vector<std::string> k = {"rubber", "metal"};
  return k;
}

const std::vector<std::string>& shape_tokens() {
  static const std::vector<std::string> k = {"cube", "sphere", "cylinder", "bowl"};
  return k;
}

namespace {
bool contains_token(const std::vector<std::string>& v, const std::string& t) {
  return std::find(v.begin(), v.end(), t) != v.end();
}
}  // namespace

bool is_size_token(const std::string& t) { return contains_token(size_tokens(), t); }
bool is_color_token(const std::string& t) { return contains_token(color_tokens(), t); }
bool is_material_token(const std::string& t) { return contains_token(material_tokens(), t); }
bool is_shape_token(const std::string& t) { return contains_token(shape_tokens(), t); }

std::array<float, 3> color_rgb(const std::string& color) {
  if (color == "red") return {0.85f, 0.10f, 0.10f};
  if (color == "blue") return {0.15f, 0.25f, 0.85f};
  if (color == "green") return {0.10f, 0.70f, 0.15f};
  if (color == "yellow") return {0.90f, 0.85f, 0.10f};
  if (color == "cyan") return {0.10f, 0.80f, 0.80f};
  if (color == "purple") return {0.55f, 0.15f, 0.70f};
  if (color == "brown") return {0.50f, 0.30f, 0.10f};
  if (color == "gray") return {0.55f, 0.55f, 0.55f};
  throw UnknownTokenError(color);
}

const std::string& color_from_rgb(float r, float g, float b) {
  const auto& names = color_tokens();
  std::size_t best = 0;
  float best_d = 1e9f;
  for (std::size_t i = 0; i < names.size(); ++i) {
    auto c = color_rgb(names[i]);
    float d = (c[0] - r) * (c[0] - r) + (c[1] - g) * (c[1] - g) + (c[2] - b) * (c[2] - b);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return names[best];
}

double size_value(const std::string& size_token) {
  if (size_token.empty()) return 0.5;  // medium, the unmentioned default
  if (size_token == "small") return 0.35;
  if (size_token == "large") return 0.7;
  throw UnknownTokenError(size_token);
}

Vec3 shape_aspect(const std::string& shape) {
  if (shape == "cube" || shape == "sphere") return {1.0, 1.0, 1.0};
  if (shape == "cylinder") return {0.8, 1.2, 0.8};
  if (shape == "bowl") return {1.3, 0.75, 1.3};
  throw UnknownTokenError(shape);
}

Vec3 nominal_half_extent(const std::string& size_token, const std::string& shape) {
  return size_value(size_token) * shape_aspect(shape);
}

bool shape_can_contain(const std::string& shape) { return shape == "bowl"; }

// ---------------------------------------------------------------------------

std::string NounPhrase::text() const {
  std::string s;
  for (const auto& a : adjectives) {
    s += a;
    s += ' ';
  }
  s += noun;
  return s;
}

namespace {
std::string adjective_of(const NounPhrase& np, bool (*pred)(const std::string&)) {
  for (const auto& a : np.adjectives)
    if (pred(a)) return a;
  return "";
}
}  // namespace

std::string NounPhrase::size() const { return adjective_of(*this, &is_size_token); }
std::string NounPhrase::color() const { return adjective_of(*this, &is_color_token); }
std::string NounPhrase::material() const { return adjective_of(*this, &is_material_token); }

void validate(const SceneGraph& g) {
  if (g.nodes.empty()) throw std::invalid_argument("scene graph has no nodes");
  int n = static_cast<int>(g.nodes.size());
  for (const auto& e : g.edges) {
    if (e.subject < 0 || e.subject >= n || e.object < 0 || e.object >= n)
      throw std::invalid_argument("scene graph edge index out of range");
    if (e.subject == e.object) throw std::invalid_argument("scene graph self-edge");
  }
}

// ---------------------------------------------------------------------------

Vec3 camera_eye(const Camera& cam) {
  double az = cam.azimuth_deg * kPi / 180.0;
  double el = cam.elevation_deg * kPi / 180.0;
  return cam.radius * Vec3(std::cos(el) * std::sin(az), std::sin(el), std::cos(el) * std::cos(az));
}

Eigen::Matrix3d camera_basis(const Camera& cam) {
  Vec3 eye = camera_eye(cam);
  Vec3 fwd = (-eye).normalized();  // toward the origin
  Vec3 world_up(0, 1, 0);
  Vec3 right = fwd.cross(world_up).normalized();
  Vec3 down = fwd.cross(right);  // image rows grow downward
  Eigen::Matrix3d R;
  R.col(0) = right;
  R.col(1) = down;
  R.col(2) = fwd;
  return R;
}

Ray camera_ray(const Camera& cam, double u, double v) {
  Eigen::Matrix3d R = camera_basis(cam);
  Vec3 d_cam((u + 0.5 - cam.cx) / cam.focal, (v + 0.5 - cam.cy) / cam.focal, 1.0);
  Vec3 d = (R * d_cam).normalized();
  return Ray{camera_eye(cam), d};
}

std::vector<Ray> camera_rays(const Camera& cam) {
  std::vector<Ray> rays;
  rays.reserve(static_cast<std::size_t>(cam.width) * cam.height);
  Eigen::Matrix3d R = camera_basis(cam);
  Vec3 eye = camera_eye(cam);
  for (int v = 0; v < cam.height; ++v)
    for (int u = 0; u < cam.width; ++u) {
      Vec3 d_cam((u + 0.5 - cam.cx) / cam.focal, (v + 0.5 - cam.cy) / cam.focal, 1.0);
      rays.push_back(Ray{eye, (R * d_cam).normalized()});
    }
  return rays;
}

std::vector<Camera> camera_ring(int n_azimuths, const std::vector<double>& elevations_deg,
                                double az_offset_deg, double radius) {
  std::vector<Camera> cams;
  cams.reserve(static_cast<std::size_t>(n_azimuths) * elevations_deg.size());
  for (int a = 0; a < n_azimuths; ++a)
    for (double el : elevations_deg) {
      Camera c;
      c.azimuth_deg = az_offset_deg + 360.0 * a / n_azimuths;
      c.elevation_deg = el;
      c.radius = radius;
      cams.push_back(c);
    }
  return cams;
}

std::vector<Camera> training_cameras() { return camera_ring(12, {12.0, 20.0, 40.0, 60.0}); }

std::vector<Camera> novel_cameras() { return camera_ring(12, {30.0, 50.0}, 15.0); }

}  // namespace voxlang
