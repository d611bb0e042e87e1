#pragma once

#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <utility>

#include "voxlang/grammar.hpp"
#include "voxlang/voxel.hpp"

namespace voxlang {

// Fills in attributes the phrase leaves open so the object can be rendered:
// a missing color or material is drawn uniformly. Size stays as-is; an absent
// size adjective already denotes the medium size.
NounPhrase resolve_attributes(const NounPhrase& np, Rng& rng);

// Appearance model. Each vocabulary token owns a 16^3 feature block and a
// multiplicative size factor; a phrase's tensor is the elementwise product
// of its tokens' blocks (absent channels read 1, so unmentioned attribute
// families stay neutral) plus optional Gaussian noise. Size tokens gate only
// the size channels.
class WhatModel {
 public:
  struct TokenEntry {
    VoxelGrid tensor;  // 16^3 x kSceneGridC, unit extent
    Vec3 size;         // size-vector factor; the phrase product gives s^o
  };

  WhatModel(std::map<std::string, TokenEntry> table, double noise_sigma);

  // The hand-declared model: uniform one-hot channel patterns per token,
  // size factors from the size lexicon and shape aspect ratios.
  static WhatModel declared(double noise_sigma = 0.0);

  // Product of the phrase's token blocks, perturbed by N(0, sigma) per cell
  // when sigma > 0 (no rng draws at sigma = 0). Throws UnknownTokenError.
  ObjectTensor generate(const NounPhrase& np, Rng& rng) const;

  // Full object extent for the phrase, no noise. Throws UnknownTokenError.
  Vec3 size_of(const NounPhrase& np) const;

  const std::map<std::string, TokenEntry>& table() const { return table_; }
  double noise_sigma() const { return noise_sigma_; }

 private:
  const TokenEntry& entry(const std::string& token) const;

  std::map<std::string, TokenEntry> table_;
  double noise_sigma_;
};

// Spatial model: per-relation offset distributions (subject center minus
// object center). Constrained axes draw from a Gaussian truncated to the
// relation's half-space beyond the margin; free axes are untruncated.
class WhereModel {
 public:
  WhereModel(std::array<Vec3, kNumRelations> means, std::array<Vec3, kNumRelations> stddevs,
             double margin);

  // The hand-declared model: mean offset magnitude `mean_mag` split evenly
  // across each relation's constrained axes, shared per-axis stddev.
  static WhereModel declared(double mean_mag = 1.2, double sigma = 0.4,
                             double margin = kRelationMargin);

  // Axis relations only; the result satisfies relation_oracle by rejection.
  Vec3 sample_offset(RelationKind rel, Rng& rng) const;

  // Containment offset, uniform inside 0.9x the per-axis slack box; nullopt
  // when the subject cannot fit.
  std::optional<Vec3> sample_inside_offset(const Vec3& h_subj, const Vec3& h_obj, Rng& rng) const;

  const Vec3& mean(RelationKind rel) const;
  const Vec3& stddev(RelationKind rel) const;
  double margin() const { return margin_; }

 private:
  std::array<Vec3, kNumRelations> means_;
  std::array<Vec3, kNumRelations> stddevs_;
  double margin_;
};

// ---------------------------------------------------------------------------

struct ComposeOptions {
  int max_samples = 1000;  // per-node retry cap and scene restart cap
  double margin = kRelationMargin;
  double iou_limit = 0.1;  // pairwise overlap cap
  double world_limit = std::numeric_limits<double>::infinity();  // center bound per axis
  bool table_rest = false;   // snap uncontained objects to y = half_extent.y
  bool build_canvas = true;  // skip tensor generation and drawing when off
};

struct Placement {
  std::vector<Box3D> boxes;           // one per graph node
  std::vector<ObjectTensor> tensors;  // filled when the canvas is built
  std::optional<VoxelGrid> canvas;    // scene grid, sum of drawn blocks
};

struct ComposeResult {
  bool success = false;
  Placement placement;  // meaningful only on success
  int samples_used = 0;
};

// Places nodes in node order: node 0 at the canvas center, each later node at
// its anchor (the other endpoint of its first incident edge that is already
// placed) plus a sampled offset. A placement must keep pairwise iou3d within
// iou_limit and satisfy every edge to a placed node; violations re-sample the
// node up to max_samples times, then restart the scene, up to max_samples
// restarts.
ComposeResult compose_scene(const SceneGraph& g, const WhatModel& what, const WhereModel& where,
                            Rng& rng, const ComposeOptions& opt = {});

// Override for the edge test applied to a candidate witness, e.g. a trained
// pairwise scorer. Arguments: relation, subject box, object box.
using EdgeCheck = std::function<bool(RelationKind, const Box3D&, const Box3D&)>;

struct AffordResult {
  bool affordable = false;
  int samples_used = 0;
  std::optional<Placement> witness;
};

// An utterance is affordable when composition finds a witness within budget.
// With an edge_check, the witness's edges are re-verified through it and a
// rejected witness is re-composed (a few attempts) before giving up.
AffordResult classify_affordable(const SceneGraph& g, const WhatModel& what,
                                 const WhereModel& where, Rng& rng, const ComposeOptions& opt = {},
                                 const EdgeCheck& edge_check = {});

// Index of the library entry nearest the query in Euclidean feature distance;
// ties break toward the lowest id. The library must be nonempty.
int retrieve_prototype(const ObjectTensor& query,
                       const std::vector<std::pair<int, ObjectTensor>>& library);

// One dataset scene: two distinctly colored objects on the table plane, one
// axis relation between them, centers within the dataset world bound.
struct SceneSample {
  std::string utterance;
  SceneGraph graph;
  std::vector<Box3D> boxes;
  std::vector<Vec3> colors;  // render color per node
};

SceneSample synth_scene(const WhatModel& what, const WhereModel& where, Rng& rng);

}  // namespace voxlang
