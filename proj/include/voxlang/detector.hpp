#pragma once

#include <Eigen/Dense>
#include <map>

#include "voxlang/grammar.hpp"
#include "voxlang/voxel.hpp"

namespace voxlang {

using Vec7 = Eigen::Matrix<double, 7, 1>;
using Vec8 = Eigen::Matrix<double, 8, 1>;
using VecC = Eigen::Matrix<double, kSceneGridC, 1>;

// Connected components of occupancy > 0.5 under 26-connectivity, each
// reported as the union of its voxels' extents (the index-tight box widened
// by the half-pitch a voxel spans past its center). Components under 4 voxels
// are dropped. A component whose box wastes volume against the best two-box
// split along its longest axis is split there, one level deep; see
// kSplitGain.
std::vector<Box3D> propose_boxes(const VoxelGrid& grid);

// Commit a split when parent volume > kSplitGain * (best two-box volume).
// Shells of distinct touching objects always leave slack at the contact
// (mismatched cross-sections), while a single object's box tiles exactly;
// the gain just needs to clear ragged-cap noise.
inline constexpr double kSplitGain = 1.05;

// Per-channel mean over a block's cells; the inner product of a spatially
// uniform template with a block reduces to a dot with this vector.
VecC channel_means(const VoxelGrid& grid);

// Appearance scorer. Templates are one channel pattern per token, broadcast
// over the 16^3 block; a phrase's template is the elementwise product of its
// tokens' patterns, mirroring the generator's gating.
struct UnaryModel {
  std::map<std::string, VecC> templates;
  double bias = 0.0;

  // All-ones patterns and zero bias: every phrase starts at the same score
  // and no channel is gated off before training.
  static UnaryModel initial();
};

// sigmoid(<phrase template, t> / 16^3 + bias). Throws UnknownTokenError.
double unary_score(const UnaryModel& m, const NounPhrase& p, const ObjectTensor& t);

// Aggregate channel pattern for a phrase (product of its tokens' templates).
VecC phrase_template(const UnaryModel& m, const NounPhrase& p);

// Subject-minus-object geometry: center delta, half-extent delta, iou3d.
Vec7 pairwise_features(const Box3D& a, const Box3D& b);

// One logistic per relation over pairwise_features plus bias (last weight).
// Starts at zero weights, which score 0.5 everywhere.
struct PairwiseClassifier {
  std::array<Vec8, kNumRelations> weights;

  PairwiseClassifier() {
    for (auto& w : weights) w.setZero();
  }
};

double pairwise_score(const PairwiseClassifier& c, RelationKind rel, const Box3D& a,
                      const Box3D& b);

inline constexpr double kUnaryThreshold = 0.4;

struct DetectionResult {
  Box3D referent;              // node 0's box
  std::vector<int> assignment;  // node index -> proposal index
  std::vector<double> unary_scores;     // per node, at its assigned proposal
  std::vector<double> pairwise_scores;  // per graph edge
  double score = 0.0;                   // product over the above
  std::vector<Box3D> proposals;         // the candidate set searched
};

// Exhaustive search over injective node-to-proposal assignments, restricted
// to proposals whose unary score clears the threshold for that node. Returns
// the argmax of the unary/pairwise score product; ties break lexicographically
// by assignment vector. Throws NoCandidateError naming the first node with an
// empty candidate list.
DetectionResult resolve_referent(const SceneGraph& g, const VoxelGrid& grid,
                                 const std::vector<Box3D>& proposals, const UnaryModel& unary,
                                 const PairwiseClassifier& pairwise,
                                 double threshold = kUnaryThreshold);

// Same, with proposals taken from propose_boxes(grid).
DetectionResult resolve_referent(const SceneGraph& g, const VoxelGrid& grid,
                                 const UnaryModel& unary, const PairwiseClassifier& pairwise,
                                 double threshold = kUnaryThreshold);

}  // namespace voxlang
