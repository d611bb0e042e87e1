#pragma once

#include "voxlang/detector.hpp"
#include "voxlang/generator.hpp"

namespace voxlang {

// Unary supervision stores the crop's per-channel means; the unary score
// depends on a crop only through them, and full blocks would hold hundreds
// of megabytes at training scale.
struct UnaryExample {
  NounPhrase phrase;
  VecC means = VecC::Zero();
  int label = 0;
};

struct PairwiseExample {
  RelationKind rel = RelationKind::LeftOf;
  Box3D subject, object;
  int label = 0;
};

struct TrainSet {
  std::vector<UnaryExample> unary_train, unary_heldout;
  std::vector<PairwiseExample> pair_train, pair_heldout;
};

struct TrainConfig {
  double lr = 0.1;
  int epochs = 50;
  int batch = 64;
  std::uint64_t seed = 0;
  double l2 = 1e-4;
};

struct TrainLogRow {
  int epoch = 0;
  double train_loss = 0.0;
  double heldout_accuracy = 0.0;
};

// Builds balanced supervision from composed scenes. Every scene yields one
// pairwise positive (its edge) and one negative (the swapped pair, asserted
// to violate the oracle). Scenes below the render cap are additionally
// rendered from the training cameras and unprojected; each yields two unary
// positives (each phrase on its own crop) and two negatives (first phrase on
// the other object's crop, second phrase on an empty-region crop). Every
// ninth scene is a containment pair (pairwise only; a contained object is
// occluded in renders). Every fifth scene's examples are tagged held-out.
TrainSet make_training_pairs(int n_scenes, const WhatModel& what, const WhereModel& where,
                             Rng& rng);

// Scenes rendered for unary supervision; the rest contribute pairwise
// examples only. Crop rounds per rendered scene: the first uses the exact
// boxes, later ones jitter them. Sized so a default run takes enough
// gradient steps to separate wrong-object crops.
inline constexpr int kUnaryRenderCap = 1600;
inline constexpr int kUnaryCropRounds = 3;

// Mini-batch gradient descent on mean binary cross-entropy plus an L2
// penalty on weights (biases excluded). The log gets one row per epoch with
// the full-train-set loss and held-out accuracy. Throws DivergedError when
// the loss leaves the finite range.
UnaryModel train_unary(const TrainSet& ts, const TrainConfig& cfg,
                       std::vector<TrainLogRow>* log = nullptr);
PairwiseClassifier train_pairwise(const TrainSet& ts, const TrainConfig& cfg,
                                  std::vector<TrainLogRow>* log = nullptr);

// Central finite differences (h = 1e-4) against the analytic batch gradient
// on every parameter; returns the worst symmetric relative error
// |a - f| / max(1e-2, |a| + |f|).
double check_unary_gradients(const UnaryModel& m, const std::vector<UnaryExample>& batch,
                             double l2);
double check_pairwise_gradients(const PairwiseClassifier& c,
                                const std::vector<PairwiseExample>& batch, double l2);

}  // namespace voxlang
