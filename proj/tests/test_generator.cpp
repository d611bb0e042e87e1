#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "voxlang/generator.hpp"
#include "voxlang/grammar.hpp"

using namespace voxlang;

namespace {

NounPhrase phrase(const std::string& text) {
  SceneGraph g = parse_utterance(text);
  REQUIRE(g.nodes.size() == 1);
  return g.nodes[0];
}

SceneGraph chain(int n, RelationKind rel) {
  SceneGraph g;
  const char* colors[] = {"red", "blue", "green", "yellow", "cyan", "purple", "brown", "gray"};
  for (int i = 0; i < n; ++i) g.nodes.push_back(NounPhrase{{colors[i]}, "cube"});
  for (int i = 0; i + 1 < n; ++i) g.edges.push_back(SceneEdge{i, rel, i + 1});
  return g;
}

}  // namespace

TEST_CASE("zero-noise appearance generation is deterministic") {
  WhatModel what = WhatModel::declared();
  Rng a(1), b(999);
  ObjectTensor t1 = what.generate(phrase("a red cube"), a);
  ObjectTensor t2 = what.generate(phrase("a red cube"), b);
  CHECK(t1.grid.data == t2.grid.data);
  CHECK(t1.size == t2.size);
}

TEST_CASE("color changes touch only the color channels") {
  WhatModel what = WhatModel::declared();
  Rng rng(0);
  ObjectTensor red = what.generate(phrase("a red cube"), rng);
  ObjectTensor blue = what.generate(phrase("a blue cube"), rng);
  REQUIRE(red.grid.c == kSceneGridC);
  bool color_differs = false;
  for (int z = 0; z < red.grid.d; ++z)
    for (int y = 0; y < red.grid.h; ++y)
      for (int x = 0; x < red.grid.w; ++x)
        for (int ch = 0; ch < red.grid.c; ++ch) {
          float a = red.grid.at(x, y, z, ch);
          float b = blue.grid.at(x, y, z, ch);
          if (ch >= kChanColor && ch < kChanColor + 8) {
            if (a != b) color_differs = true;
          } else {
            CHECK(a == b);
          }
        }
  CHECK(color_differs);
}

TEST_CASE("large objects outsize small ones componentwise") {
  WhatModel what = WhatModel::declared();
  Vec3 lg = what.size_of(phrase("a large sphere"));
  Vec3 sm = what.size_of(phrase("a small sphere"));
  CHECK((lg.array() > sm.array()).all());
  // an unmentioned size reads as medium, between the two
  Vec3 md = what.size_of(phrase("a sphere"));
  CHECK((md.array() > sm.array()).all());
  CHECK((md.array() < lg.array()).all());
}

TEST_CASE("unknown tokens are rejected") {
  WhatModel what = WhatModel::declared();
  NounPhrase np{{"magenta"}, "cube"};
  Rng rng(0);
  CHECK_THROWS_AS(what.generate(np, rng), UnknownTokenError);
  CHECK_THROWS_AS(what.size_of(np), UnknownTokenError);
}

TEST_CASE("left offsets always clear the margin") {
  WhereModel where = WhereModel::declared();
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    Vec3 off = where.sample_offset(RelationKind::LeftOf, rng);
    CHECK(off.x() < -where.margin());
    Box3D subj{off, Vec3(0.3, 0.3, 0.3)};
    Box3D obj{Vec3::Zero(), Vec3(0.3, 0.3, 0.3)};
    CHECK(relation_oracle(RelationKind::LeftOf, subj, obj, where.margin()));
  }
}

TEST_CASE("behind and in-front offsets mirror in distribution") {
  WhereModel where = WhereModel::declared();
  Rng rng(4);
  const int n = 4000;
  double behind = 0.0, front = 0.0;
  for (int i = 0; i < n; ++i) behind += std::abs(where.sample_offset(RelationKind::Behind, rng).z());
  for (int i = 0; i < n; ++i)
    front += std::abs(where.sample_offset(RelationKind::InFrontOf, rng).z());
  behind /= n;
  front /= n;
  // shared stddev 0.4; three standard errors of the difference of means
  CHECK(std::abs(behind - front) < 3.0 * 0.4 * std::sqrt(2.0 / n));
}

TEST_CASE("composite relations truncate both axes jointly") {
  WhereModel where = WhereModel::declared();
  Rng rng(5);
  double y_sum = 0.0;
  for (int i = 0; i < 1000; ++i) {
    Vec3 off = where.sample_offset(RelationKind::LeftBehind, rng);
    CHECK(off.x() < -where.margin());
    CHECK(off.z() < -where.margin());
    y_sum += off.y();
  }
  // the vertical axis is free: untruncated, zero mean
  CHECK(std::abs(y_sum / 1000) < 3.0 * 0.4 / std::sqrt(1000.0));
}

TEST_CASE("declared relation means satisfy the oracle at the origin") {
  WhereModel where = WhereModel::declared();
  Vec3 h(0.3, 0.3, 0.3);
  for (RelationKind rel : axis_relations()) {
    Box3D subj{where.mean(rel), h};
    CHECK(relation_oracle(rel, subj, Box3D{Vec3::Zero(), h}, where.margin()));
  }
  Box3D small{where.mean(RelationKind::Inside), Vec3(0.3, 0.3, 0.3)};
  CHECK(relation_oracle(RelationKind::Inside, small, Box3D{Vec3::Zero(), Vec3(0.7, 0.7, 0.7)}));
}

TEST_CASE("containment offsets keep the subject inside, or report no fit") {
  WhereModel where = WhereModel::declared();
  Rng rng(6);
  Vec3 h_small(0.35, 0.26, 0.35), h_big(0.91, 0.53, 0.91);
  for (int i = 0; i < 200; ++i) {
    auto off = where.sample_inside_offset(h_small, h_big, rng);
    REQUIRE(off.has_value());
    Box3D subj{*off, h_small};
    CHECK(relation_oracle(RelationKind::Inside, subj, Box3D{Vec3::Zero(), h_big}));
  }
  CHECK(!where.sample_inside_offset(h_big, h_small, rng).has_value());
}

TEST_CASE("a single object lands at the canvas center") {
  WhatModel what = WhatModel::declared();
  WhereModel where = WhereModel::declared();
  Rng rng(7);
  SceneGraph g = parse_utterance("a red cube");
  ComposeResult r = compose_scene(g, what, where, rng);
  REQUIRE(r.success);
  CHECK(r.samples_used == 1);
  CHECK(r.placement.boxes[0].center == Vec3::Zero());
  REQUIRE(r.placement.canvas.has_value());
}

TEST_CASE("a cycle of lefts never composes") {
  WhatModel what = WhatModel::declared();
  WhereModel where = WhereModel::declared();
  SceneGraph g = chain(3, RelationKind::LeftOf);
  g.edges.push_back(SceneEdge{2, RelationKind::LeftOf, 0});
  Rng rng(8);
  ComposeOptions opt;
  opt.max_samples = 50;
  ComposeResult r = compose_scene(g, what, where, rng, opt);
  CHECK(!r.success);
  CHECK(r.samples_used >= opt.max_samples);
  Rng rng2(8);
  AffordResult a = classify_affordable(g, what, where, rng2, opt);
  CHECK(!a.affordable);
}

TEST_CASE("a five-object left chain composes in strict x order") {
  WhatModel what = WhatModel::declared();
  WhereModel where = WhereModel::declared();
  SceneGraph g = chain(5, RelationKind::LeftOf);
  Rng rng(9);
  ComposeOptions opt;
  opt.build_canvas = false;
  ComposeResult r = compose_scene(g, what, where, rng, opt);
  REQUIRE(r.success);
  for (int i = 0; i + 1 < 5; ++i)
    CHECK(r.placement.boxes[static_cast<std::size_t>(i)].center.x() <
          r.placement.boxes[static_cast<std::size_t>(i) + 1].center.x() - kRelationMargin);
}

TEST_CASE("every affordable witness re-verifies against the oracle") {
  WhatModel what = WhatModel::declared();
  WhereModel where = WhereModel::declared();
  GenConfig cfg;
  cfg.n_objects_max = 3;
  cfg.n_constraints_max = 2;
  Rng root(10);
  Rng gen = root.stream("graphs");
  ComposeOptions opt;
  opt.build_canvas = false;
  int affordable = 0;
  for (int i = 0; i < 1000; ++i) {
    Utterance u = generate_utterance(cfg, gen);
    Rng solve = root.stream("solve", static_cast<std::uint64_t>(i));
    AffordResult a = classify_affordable(u.graph, what, where, solve, opt);
    if (!a.affordable) continue;
    ++affordable;
    const auto& boxes = a.witness->boxes;
    for (const SceneEdge& e : u.graph.edges)
      CHECK(relation_oracle(e.relation, boxes[static_cast<std::size_t>(e.subject)],
                            boxes[static_cast<std::size_t>(e.object)], opt.margin));
    for (std::size_t x = 0; x < boxes.size(); ++x)
      for (std::size_t y = x + 1; y < boxes.size(); ++y) {
        bool inside_pair = false;
        for (const SceneEdge& e : u.graph.edges)
          if (e.relation == RelationKind::Inside &&
              ((e.subject == static_cast<int>(x) && e.object == static_cast<int>(y)) ||
               (e.subject == static_cast<int>(y) && e.object == static_cast<int>(x))))
            inside_pair = true;
        if (!inside_pair) CHECK(iou3d(boxes[x], boxes[y]) <= opt.iou_limit);
      }
  }
  CHECK(affordable > 800);
}

TEST_CASE("sampler verdicts agree with the exhaustive grid on a labeled set") {
  WhatModel what = WhatModel::declared();
  WhereModel where = WhereModel::declared();
  Rng root(11);
  Rng setr = root.stream("set");
  auto items = make_contradiction_set(12, setr);
  for (std::size_t i = 0; i < items.size(); ++i) {
    SceneGraph g = parse_utterance(items[i].utterance);
    Rng solve = root.stream("verdict", i);
    AffordResult a = classify_affordable(g, what, where, solve);
    CHECK(a.affordable == items[i].affordable);
    CHECK(grid_satisfiable(g) == items[i].affordable);
  }
}

TEST_CASE("identical seeds reproduce verdict and witness exactly") {
  WhatModel what = WhatModel::declared();
  WhereModel where = WhereModel::declared();
  SceneGraph g = parse_utterance(
      "a red cube is behind a cyan sphere and to the left of a red cylinder");
  ComposeOptions opt;
  opt.build_canvas = false;
  Rng r1(12), r2(12);
  AffordResult a1 = classify_affordable(g, what, where, r1, opt);
  AffordResult a2 = classify_affordable(g, what, where, r2, opt);
  REQUIRE(a1.affordable);
  REQUIRE(a1.affordable == a2.affordable);
  CHECK(a1.samples_used == a2.samples_used);
  REQUIRE(a1.witness.has_value());
  REQUIRE(a2.witness.has_value());
  for (std::size_t i = 0; i < a1.witness->boxes.size(); ++i) {
    CHECK(a1.witness->boxes[i].center == a2.witness->boxes[i].center);
    CHECK(a1.witness->boxes[i].half_extent == a2.witness->boxes[i].half_extent);
  }
}

TEST_CASE("prototype retrieval finds exact and near matches") {
  WhatModel what = WhatModel::declared();
  Rng rng(13);
  std::vector<std::pair<int, ObjectTensor>> library;
  int red_cube_id = -1;
  int id = 0;
  for (const std::string& color : color_tokens())
    for (const std::string& shape : shape_tokens()) {
      NounPhrase np{{color}, shape};
      if (color == "red" && shape == "cube") red_cube_id = id;
      library.emplace_back(id++, what.generate(np, rng));
    }
  REQUIRE(library.size() == 32);
  REQUIRE(red_cube_id >= 0);

  SUBCASE("an exact library entry retrieves itself") {
    CHECK(retrieve_prototype(library[7].second, library) == library[7].first);
  }

  SUBCASE("a noiseless query picks its own attribute combination") {
    ObjectTensor q = what.generate(phrase("a red cube"), rng);
    CHECK(retrieve_prototype(q, library) == red_cube_id);
  }

  SUBCASE("small appearance noise rarely flips the neighbor") {
    WhatModel noisy = WhatModel::declared(0.05);
    Rng nrng(14);
    int hits = 0;
    const int trials = 1000;
    for (int i = 0; i < trials; ++i) {
      ObjectTensor q = noisy.generate(phrase("a red cube"), nrng);
      hits += retrieve_prototype(q, library) == red_cube_id;
    }
    CHECK(hits >= 990);
  }

  SUBCASE("distance ties break toward the lowest id") {
    std::vector<std::pair<int, ObjectTensor>> dup = {{5, library[0].second},
                                                     {2, library[0].second}};
    CHECK(retrieve_prototype(library[0].second, dup) == 2);
  }
}

TEST_CASE("dataset scenes keep their documented shape") {
  WhatModel what = WhatModel::declared();
  WhereModel where = WhereModel::declared();
  Rng rng(15);
  for (int i = 0; i < 50; ++i) {
    SceneSample s = synth_scene(what, where, rng);
    REQUIRE(s.graph.nodes.size() == 2);
    REQUIRE(s.graph.edges.size() == 1);
    REQUIRE(s.boxes.size() == 2);
    CHECK(s.graph.nodes[0].color() != s.graph.nodes[1].color());
    const SceneEdge& e = s.graph.edges[0];
    CHECK(e.relation != RelationKind::Inside);
    CHECK(relation_oracle(e.relation, s.boxes[static_cast<std::size_t>(e.subject)],
                          s.boxes[static_cast<std::size_t>(e.object)], kRelationMargin));
    for (const Box3D& b : s.boxes) {
      CHECK(b.center.y() == b.half_extent.y());
      CHECK(b.center.x() >= -2.0);
      CHECK(b.center.x() <= 2.0);
      CHECK(b.center.z() >= -2.0);
      CHECK(b.center.z() <= 2.0);
    }
    SceneGraph reparsed = parse_utterance(s.utterance);
    REQUIRE(reparsed.nodes.size() == 2);
    CHECK(reparsed.edges.size() == 1);
    CHECK(reparsed.edges[0].relation == e.relation);
  }
}

TEST_CASE("composed canvases show each object's color from every viewpoint") {
  WhatModel what = WhatModel::declared();
  WhereModel where = WhereModel::declared();
  Rng rng(16);
  SceneGraph g = parse_utterance("a red cube is to the left of a blue sphere");
  ComposeOptions opt;
  opt.table_rest = true;
  ComposeResult r = compose_scene(g, what, where, rng, opt);
  REQUIRE(r.success);
  REQUIRE(r.placement.canvas.has_value());

  std::vector<Vec3> colors;
  for (const NounPhrase& np : g.nodes) {
    std::array<float, 3> c = color_rgb(np.color());
    colors.emplace_back(c[0], c[1], c[2]);
  }
  auto cams = training_cameras();
  for (std::size_t ci : {2u, 17u, 33u}) {
    const Camera& cam = cams[ci];
    Image truth = render_scene(r.placement.boxes, colors, cam);
    Image shown = project(*r.placement.canvas, cam);
    int checked = 0, agree = 0;
    for (int v = 1; v + 1 < cam.height; ++v)
      for (int u = 1; u + 1 < cam.width; ++u) {
        int id = truth.id[static_cast<std::size_t>(v) * cam.width + u];
        if (id < 0) continue;
        // erode by one pixel so silhouette quantization stays out of the sample
        bool interior = true;
        for (int dv = -1; dv <= 1 && interior; ++dv)
          for (int du = -1; du <= 1; ++du)
            if (truth.id[static_cast<std::size_t>(v + dv) * cam.width + (u + du)] != id) {
              interior = false;
              break;
            }
        if (!interior) continue;
        ++checked;
        std::size_t px = (static_cast<std::size_t>(v) * cam.width + u) * 3;
        std::array<float, 3> want = color_rgb(g.nodes[static_cast<std::size_t>(id)].color());
        if (shown.rgb[px] == want[0] && shown.rgb[px + 1] == want[1] &&
            shown.rgb[px + 2] == want[2])
          ++agree;
      }
    REQUIRE(checked > 200);
    CHECK(static_cast<double>(agree) / checked >= 0.95);
  }
}
