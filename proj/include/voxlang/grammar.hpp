#pragma once
// Utterance grammar: parsing, printing, sampling, contradiction sets.
//
//   utterance := group { "," group }
//   group     := clause { "and" relation np }
//   clause    := np "is" relation np | np
//   np        := ("a"|"the") [size] [color] [material] shape
//   command   := ("put"|"place") np relation np
//
// Case-insensitive; canonical form is lowercase with single spaces and a
// comma directly after the word it follows. "and"-chained relations attach
// to their group's subject. An "a" phrase always introduces a new node; a
// "the" phrase refers to the earliest node with the identical phrase, or
// introduces one if no mention exists yet.

#include <string>
#include <utility>
#include <vector>

#include "voxlang/common.hpp"
#include "voxlang/scene.hpp"

namespace voxlang {

// Throws ParseError (byte offset + expected surface tokens) on any
// non-utterance, including truncations and unknown words.
SceneGraph parse_utterance(const std::string& text);

// Canonical surface form. Expects node indices in first-mention order
// (true of every graph produced by parse_utterance / generate_utterance /
// make_contradiction_set); edges are emitted in stored order, isolated
// nodes as bare clauses at the end.
std::string pretty_print(const SceneGraph& g);

struct GenConfig {
  int n_objects_min = 1;
  int n_objects_max = 2;
  int n_constraints_max = 1;
  bool allow_repeat_mentions = true;
};

struct Utterance {
  std::string text;
  SceneGraph graph;
};

// Phrase sampling used by generate_utterance and the dataset harness. Each
// adjective slot fills with probability 1/2; force_color always fills the
// color slot. Distinct phrases reject duplicates, and with force_color also
// duplicate colors (dataset scenes keep colors unambiguous).
NounPhrase sample_phrase(Rng& rng, bool force_color = false);
std::vector<NounPhrase> sample_distinct_phrases(int n, Rng& rng, bool force_color = false);

// The eight sign-constrained kinds, excluding Inside.
const std::array<RelationKind, 8>& axis_relations();

// Uniform over the axis kinds, plus Inside when the object shape can contain
// the subject within the overlap cap. axis_only drops the Inside arm.
RelationKind sample_relation(const NounPhrase& subj, const NounPhrase& obj, Rng& rng,
                             bool axis_only = false);

// Samples an utterance with distinct node phrases; attributes uniform over
// the vocabulary, relations uniform over the axis kinds plus Inside when
// the object shape can contain the subject. graph == parse_utterance(text).
Utterance generate_utterance(const GenConfig& cfg, Rng& rng);

struct ContradictionItem {
  std::string utterance;
  bool affordable = true;
};

// n/2 affordable + n/2 unaffordable utterances (shuffled). Unaffordable
// items inject an axis constraint contradicting the transitive closure of
// the earlier ones; affordable items close consistently or not at all.
// Only axis relations participate. n must be even and positive.
std::vector<ContradictionItem> make_contradiction_set(int n, Rng& rng);

struct PlacementCommand {
  NounPhrase manipulandum;
  NounPhrase anchor;
  RelationKind relation = RelationKind::LeftOf;
};

bool is_command(const std::string& text);
PlacementCommand parse_command(const std::string& text);

// Brute-force satisfiability: every node center ranges over a 9x9x9 grid
// spanning [-2,2]^3; accepts iff some assignment satisfies every edge at
// the margin and keeps non-Inside pairs at iou3d <= 0.1. Box sizes come
// from each phrase's size token (medium when absent) and shape aspect.
bool grid_satisfiable(const SceneGraph& g, double margin = kRelationMargin);

}  // namespace voxlang
