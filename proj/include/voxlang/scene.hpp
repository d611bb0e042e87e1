#pragma once
// Scene model: axis-aligned boxes, spatial relations, scene graphs, cameras.
//
// World frame: the table plane is y = 0, +x points right and +z points
// toward the azimuth-0 camera. "left of" is an x-sign test, "in front of"
// a z-sign test (front = nearer the reference camera = larger z). Composite
// relations are conjunctions of the two axis tests. Inside is full
// containment of a's box in b's box.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "voxlang/common.hpp"

namespace voxlang {

using Vec3 = Eigen::Vector3d;

struct Box3D {
  Vec3 center{0, 0, 0};
  Vec3 half_extent{1, 1, 1};  // all components > 0

  Vec3 min() const { return center - half_extent; }
  Vec3 max() const { return center + half_extent; }
  double volume() const { return 8.0 * half_extent.prod(); }
};

// Exact axis-aligned intersection-over-union.
double iou3d(const Box3D& a, const Box3D& b);

enum class RelationKind : std::uint8_t {
  LeftOf,
  RightOf,
  InFrontOf,
  Behind,
  LeftBehind,
  LeftFront,
  RightBehind,
  RightFront,
  Inside,
};

inline constexpr int kNumRelations = 9;
inline constexpr double kRelationMargin = 0.1;

// All kinds, in enum order.
const std::array<RelationKind, kNumRelations>& all_relations();

// Canonical snake_case name used in JSON/CSV ("left_of", ...).
const std::string& relation_name(RelationKind r);
std::optional<RelationKind> relation_from_name(const std::string& name);

// Surface form in the utterance grammar ("to the left of", ...).
const std::string& relation_surface(RelationKind r);

// Mirror pairs swap argument order: LeftOf(a,b) == RightOf(b,a).
// Inside has no mirror and maps to itself.
RelationKind mirror_relation(RelationKind r);

// Per-axis sign requirement of a relation: -1 means the subject's center
// coordinate must be below the object's by at least the margin, +1 above,
// 0 unconstrained. Inside has no axis signs (returns all zero).
std::array<int, 3> relation_axis_signs(RelationKind r);

// True iff relation holds for subject box a w.r.t. object box b. Axis kinds
// test center differences against the margin; Inside tests containment of
// a in b (1e-9 slack per axis so resting-on-the-floor equality is stable).
bool relation_oracle(RelationKind rel, const Box3D& a, const Box3D& b,
                     double margin = kRelationMargin);

// ---------------------------------------------------------------------------
// Vocabulary (closed)

const std::vector<std::string>& size_tokens();      // small, large
const std::vector<std::string>& color_tokens();     // 8 colors
const std::vector<std::string>& material_tokens();  // rubber, metal
const std::vector<std::string>& shape_tokens();     // cube, sphere, cylinder, bowl

bool is_size_token(const std::string& t);
bool is_color_token(const std::string& t);
bool is_material_token(const std::string& t);
bool is_shape_token(const std::string& t);

// Display color for a color token, components in [0,1].
std::array<float, 3> color_rgb(const std::string& color);
// Nearest color token for an rgb triple (inverse of color_rgb on its range).
const std::string& color_from_rgb(float r, float g, float b);

// Half-extent in world units for a size token ("" = unmentioned = medium),
// scaled by the shape's aspect. Only "bowl" can contain other shapes.
double size_value(const std::string& size_token);
Vec3 shape_aspect(const std::string& shape);
Vec3 nominal_half_extent(const std::string& size_token, const std::string& shape);
bool shape_can_contain(const std::string& shape);

// ---------------------------------------------------------------------------
// Scene graphs

struct NounPhrase {
  std::vector<std::string> adjectives;  // subset of {size, color, material}, in that order
  std::string noun;                     // shape token

  std::string text() const;  // "small red rubber cube"
  bool operator==(const NounPhrase&) const = default;

  // First adjective of the given family, or "" when unmentioned.
  std::string size() const;
  std::string color() const;
  std::string material() const;
};

struct SceneEdge {
  int subject = 0;
  RelationKind relation = RelationKind::LeftOf;
  int object = 0;
  bool operator==(const SceneEdge&) const = default;
};

// Nodes are objects in first-mention order; edges never self-loop.
struct SceneGraph {
  std::vector<NounPhrase> nodes;
  std::vector<SceneEdge> edges;
  bool operator==(const SceneGraph&) const = default;
};

// Throws std::invalid_argument on self-edges, bad indices, or no nodes.
void validate(const SceneGraph& g);

// ---------------------------------------------------------------------------
// Cameras

// Pinhole camera on an orbit looking at the world origin with +y up.
// azimuth 0 puts the eye on the +z axis; elevation raises it toward +y.
struct Camera {
  double azimuth_deg = 0;    // [0, 360)
  double elevation_deg = 40; // (0, 90)
  double radius = 9;         // > 0
  double focal = 110;        // pixels
  double cx = 64, cy = 64;   // principal point, pixels
  int width = 128, height = 128;
};

Vec3 camera_eye(const Camera& cam);

// Rotation world->camera basis: columns are (right, down, forward) in world
// coordinates, so a camera-space direction d maps to world as R * d.
Eigen::Matrix3d camera_basis(const Camera& cam);

struct Ray {
  Vec3 origin;
  Vec3 dir;  // unit norm
};

// Ray through the center of pixel (u, v); u is the column, v the row.
// Fractional indices address points between pixel centers.
Ray camera_ray(const Camera& cam, double u, double v);

// All width*height rays, row-major.
std::vector<Ray> camera_rays(const Camera& cam);

// n_azimuths evenly spaced azimuths (starting at az_offset_deg) crossed with
// the given elevations; azimuth-major, elevation-minor order.
std::vector<Camera> camera_ring(int n_azimuths, const std::vector<double>& elevations_deg,
                                double az_offset_deg = 0.0, double radius = 9.0);

// Dataset view sets: 12 azimuths x elevations {12,20,40,60}, and the novel
// set at elevations {30,50} with azimuths offset by 15 degrees.
std::vector<Camera> training_cameras();
std::vector<Camera> novel_cameras();

}  // namespace voxlang
