#pragma once
// Dataset synthesis, model files, evaluation suites, CLI entry points.
//
// Every command derives all randomness from one root seed through named
// Rng substreams, one label per concern and one index per item, so re-runs
// with the same seed write byte-identical JSON/CSV (no timestamps or wall
// clock ever reach a file; timings go to stdout only).

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "voxlang/control.hpp"
#include "voxlang/trainer.hpp"

namespace voxlang {

using Json = nlohmann::ordered_json;

// RFC 4648 with padding.
std::string base64_encode(const unsigned char* data, std::size_t n);
std::vector<unsigned char> base64_decode(const std::string& s);

std::string floats_to_base64(const std::vector<float>& v);
std::vector<float> base64_to_floats(const std::string& s);

// ---------------------------------------------------------------------------
// Model bundle

struct Models {
  WhatModel what = WhatModel::declared();
  WhereModel where = WhereModel::declared();
  UnaryModel unary = UnaryModel::initial();
  PairwiseClassifier pairwise;
};

// what.json, where.json, unary.json, pairwise.json under dir. Appearance
// blocks are base64 float32; scorer weights are plain JSON numbers (exact
// double round-trip). Throws IoError on malformed files.
void save_models(const std::filesystem::path& dir, const Models& m);
Models load_models(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Dataset

struct SceneRecord {
  std::string utterance;
  SceneGraph graph;
  std::vector<Box3D> boxes;
  std::vector<Camera> cameras;  // one per emitted view, in file order
};

Json scene_record_to_json(const SceneRecord& r);
SceneRecord scene_record_from_json(const Json& j);

struct DatasetSpec {
  int n_train = 800;
  int n_test = 400;
  // 0 keeps the full rigs: train scenes get the 48 training views, test
  // scenes those plus the 24 novel views. A positive value caps each list.
  int max_cameras = 0;
};

// The seeded scene stream backing a dataset split; scene i of a split is
// independent of every other scene, so any prefix of a split is stable.
SceneSample dataset_scene(const Models& m, std::uint64_t seed, const std::string& split, int i);

// ---------------------------------------------------------------------------
// Evaluation suites (pure in-memory cores; commands wrap them with file IO)

struct AffordEval {
  struct Row {
    std::string utterance;
    bool expected = false;
    bool predicted = false;
    int samples_used = 0;
  };
  std::vector<Row> rows;
  int correct = 0;
  double accuracy = 0.0;
};

// Classifies the seeded contradiction set. With use_classifier the trained
// pairwise scorer vets each witness; otherwise the oracle alone decides.
AffordEval eval_afford(const Models& m, int n_items, int budget, std::uint64_t seed,
                       bool use_classifier);

struct DetectCounts {
  int tp = 0, fp = 0, fn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

struct DetectEval {
  int n_scenes = 0;
  DetectCounts gt_in, gt_ood, prop_in, prop_ood;
  struct Row {
    int scene = 0;
    bool ood = false;
    bool gt_boxes = false;
    bool predicted = false;
    double iou = 0.0;
    bool correct = false;
  };
  std::vector<Row> rows;
};

// Renders each seeded test scene from the training rig and the novel rig,
// unprojects each, and resolves the scene's graph against ground-truth boxes
// and against proposals. Scene content is shared across view sets, so the
// in-domain/novel comparison isolates the viewpoints.
DetectEval eval_detection(const Models& m, int n_scenes, std::uint64_t seed);

struct ProposalEval {
  int n_scenes = 0;
  int objects_all = 0, recalled_all = 0;
  int objects_apart = 0, recalled_apart = 0;  // scenes with no touching pair
  int touching_scenes = 0;
  double recall_all = 0.0, recall_apart = 0.0;
};

// Proposal recall at 3D IoU >= 0.5. A scene counts as touching when some
// box pair's largest axis gap is at most two scene-grid pitches.
ProposalEval eval_proposals(const Models& m, int n_scenes, std::uint64_t seed);

struct FollowEval {
  struct Episode {
    RelationKind rel = RelationKind::LeftOf;
    int seed_index = 0;
    std::string utterance;
    bool success = false;
    int release_step = -1;
    int clipped_actions = 0;
    double final_cost = 0.0;
    FollowResult result;
  };
  std::vector<Episode> episodes;
  int successes = 0;
};

// Placement episodes over the seven instruction relations (the six
// horizontal composites/sides plus containment), seeds_per_relation each.
FollowEval eval_follow(const Models& m, int seeds_per_relation, std::uint64_t seed,
                       bool fit_dynamics);

const std::array<RelationKind, 7>& instruction_relations();

// ---------------------------------------------------------------------------
// Commands. Return a process exit status: 0 success, 1 failure,
// kExitInfeasible when composition exhausts its budget.

inline constexpr int kExitInfeasible = 3;

struct CliOptions {
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "out";
  std::filesystem::path models_dir = "models";
  int jobs = 1;  // accepted for interface stability; evaluation is serial
};

int cmd_synth(const CliOptions& o, const DatasetSpec& spec);
int cmd_train(const CliOptions& o, int n_scenes, const TrainConfig& cfg);
int cmd_generate(const CliOptions& o, const std::string& utterance, int n_samples,
                 double azimuth_deg, double elevation_deg);
int cmd_afford(const CliOptions& o, int n_items, int budget);
int cmd_detect(const CliOptions& o, int n_scenes);
int cmd_follow(const CliOptions& o, int seeds_per_relation, bool fit_dynamics);
int cmd_eval_all(const CliOptions& o, int train_scenes, int detect_scenes, int proposal_scenes,
                 int afford_items, int follow_seeds);

// Loads models from o.models_dir; untrained defaults when absent.
Models load_models_or_default(const CliOptions& o);

// Shared writers (also used by tests).
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);
std::string format_double(double v);  // shortest round-trip decimal

}  // namespace voxlang
