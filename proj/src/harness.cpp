#include "voxlang/harness.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>

namespace voxlang {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Encoding helpers

namespace {

constexpr char kB64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int b64_value(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

Json vec3_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 3) throw IoError("expected a 3-vector");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

Json box_json(const Box3D& b) {
  Json j;
  j["center"] = vec3_json(b.center);
  j["half_extent"] = vec3_json(b.half_extent);
  return j;
}

Box3D box_from_json(const Json& j) {
  return Box3D{vec3_from_json(j.at("center")), vec3_from_json(j.at("half_extent"))};
}

void write_json_file(const fs::path& path, const Json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

Json read_json_file(const fs::path& path) {
  Json j = Json::parse(read_text_file(path), nullptr, false);
  if (j.is_discarded()) throw IoError("malformed JSON: " + path.string());
  return j;
}

Vec3 rgb_vec(const std::string& color_token) {
  auto c = color_rgb(color_token);
  return Vec3(c[0], c[1], c[2]);
}

}  // namespace

std::string base64_encode(const unsigned char* data, std::size_t n) {
  std::string out;
  out.reserve((n + 2) / 3 * 4);
  for (std::size_t i = 0; i < n; i += 3) {
    unsigned v = data[i] << 16;
    if (i + 1 < n) v |= data[i + 1] << 8;
    if (i + 2 < n) v |= data[i + 2];
    out += kB64[(v >> 18) & 63];
    out += kB64[(v >> 12) & 63];
    out += i + 1 < n ? kB64[(v >> 6) & 63] : '=';
    out += i + 2 < n ? kB64[v & 63] : '=';
  }
  return out;
}

std::vector<unsigned char> base64_decode(const std::string& s) {
  if (s.size() % 4 != 0) throw IoError("base64 length not a multiple of 4");
  std::vector<unsigned char> out;
  out.reserve(s.size() / 4 * 3);
  for (std::size_t i = 0; i < s.size(); i += 4) {
    int pad = 0;
    unsigned v = 0;
    for (int k = 0; k < 4; ++k) {
      char c = s[i + k];
      if (c == '=') {
        if (i + 4 != s.size() || k < 2) throw IoError("bad base64 padding");
        ++pad;
        v <<= 6;
        continue;
      }
      if (pad > 0) throw IoError("bad base64 padding");
      int d = b64_value(c);
      if (d < 0) throw IoError("bad base64 character");
      v = (v << 6) | static_cast<unsigned>(d);
    }
    out.push_back((v >> 16) & 255);
    if (pad < 2) out.push_back((v >> 8) & 255);
    if (pad < 1) out.push_back(v & 255);
  }
  return out;
}

std::string floats_to_base64(const std::vector<float>& v) {
  // little-endian host assumed; the file format is little-endian float32
  return base64_encode(reinterpret_cast<const unsigned char*>(v.data()),
                       v.size() * sizeof(float));
}

std::vector<float> base64_to_floats(const std::string& s) {
  auto bytes = base64_decode(s);
  if (bytes.size() % sizeof(float) != 0) throw IoError("float payload size not a multiple of 4");
  std::vector<float> out(bytes.size() / sizeof(float));
  std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

std::string read_text_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Model files

void save_models(const fs::path& dir, const Models& m) {
  fs::create_directories(dir);
  {
    Json j;
    j["noise_sigma"] = m.what.noise_sigma();
    Json toks;
    for (const auto& [tok, entry] : m.what.table()) {
      Json t;
      t["n"] = entry.tensor.w;
      t["c"] = entry.tensor.c;
      t["size"] = vec3_json(entry.size);
      t["tensor"] = floats_to_base64(entry.tensor.data);
      toks[tok] = std::move(t);
    }
    j["tokens"] = std::move(toks);
    write_json_file(dir / "what.json", j);
  }
  {
    Json j;
    j["margin"] = m.where.margin();
    Json rels;
    for (RelationKind r : all_relations()) {
      Json e;
      e["mean"] = vec3_json(m.where.mean(r));
      e["stddev"] = vec3_json(m.where.stddev(r));
      rels[relation_name(r)] = std::move(e);
    }
    j["relations"] = std::move(rels);
    write_json_file(dir / "where.json", j);
  }
  {
    Json j;
    j["bias"] = m.unary.bias;
    Json tmpl;
    for (const auto& [tok, t] : m.unary.templates) {
      Json arr = Json::array();
      for (int ch = 0; ch < kSceneGridC; ++ch) arr.push_back(t[ch]);
      tmpl[tok] = std::move(arr);
    }
    j["templates"] = std::move(tmpl);
    write_json_file(dir / "unary.json", j);
  }
  {
    Json rels;
    for (RelationKind r : all_relations()) {
      Json arr = Json::array();
      const Vec8& w = m.pairwise.weights[static_cast<int>(r)];
      for (int i = 0; i < 8; ++i) arr.push_back(w[i]);
      rels[relation_name(r)] = std::move(arr);
    }
    Json j;
    j["relations"] = std::move(rels);
    write_json_file(dir / "pairwise.json", j);
  }
}

Models load_models(const fs::path& dir) {
  Models m;
  {
    Json j = read_json_file(dir / "what.json");
    std::map<std::string, WhatModel::TokenEntry> table;
    for (const auto& [tok, t] : j.at("tokens").items()) {
      int n = t.at("n").get<int>();
      int c = t.at("c").get<int>();
      if (n <= 0 || c <= 0) throw IoError("bad token tensor dims in what.json");
      VoxelGrid g(n, n, n, c, Box3D{Vec3::Zero(), Vec3(0.5, 0.5, 0.5)});
      g.data = base64_to_floats(t.at("tensor").get<std::string>());
      if (g.data.size() != static_cast<std::size_t>(n) * n * n * c)
        throw IoError("token tensor payload size mismatch in what.json");
      table[tok] = WhatModel::TokenEntry{std::move(g), vec3_from_json(t.at("size"))};
    }
    m.what = WhatModel(std::move(table), j.at("noise_sigma").get<double>());
  }
  {
    Json j = read_json_file(dir / "where.json");
    std::array<Vec3, kNumRelations> means, stddevs;
    for (RelationKind r : all_relations()) {
      const Json& e = j.at("relations").at(relation_name(r));
      means[static_cast<int>(r)] = vec3_from_json(e.at("mean"));
      stddevs[static_cast<int>(r)] = vec3_from_json(e.at("stddev"));
    }
    m.where = WhereModel(means, stddevs, j.at("margin").get<double>());
  }
  {
    Json j = read_json_file(dir / "unary.json");
    m.unary.templates.clear();
    m.unary.bias = j.at("bias").get<double>();
    for (const auto& [tok, arr] : j.at("templates").items()) {
      if (!arr.is_array() || arr.size() != kSceneGridC)
        throw IoError("bad template width in unary.json");
      VecC t;
      for (int ch = 0; ch < kSceneGridC; ++ch) t[ch] = arr[ch].get<double>();
      m.unary.templates[tok] = t;
    }
  }
  {
    Json j = read_json_file(dir / "pairwise.json");
    for (RelationKind r : all_relations()) {
      const Json& arr = j.at("relations").at(relation_name(r));
      if (!arr.is_array() || arr.size() != 8) throw IoError("bad weight width in pairwise.json");
      for (int i = 0; i < 8; ++i)
        m.pairwise.weights[static_cast<int>(r)][i] = arr[i].get<double>();
    }
  }
  return m;
}

Models load_models_or_default(const CliOptions& o) {
  const char* files[] = {"what.json", "where.json", "unary.json", "pairwise.json"};
  bool have = true;
  for (const char* f : files) have = have && fs::exists(o.models_dir / f);
  if (have) return load_models(o.models_dir);
  std::cout << "models not found under " << o.models_dir.string()
            << "; using untrained defaults\n";
  return Models{};
}

// ---------------------------------------------------------------------------
// Scene records

Json scene_record_to_json(const SceneRecord& r) {
  Json j;
  j["utterance"] = r.utterance;
  Json nodes = Json::array();
  for (const auto& np : r.graph.nodes) {
    Json n;
    n["adjectives"] = np.adjectives;
    n["noun"] = np.noun;
    nodes.push_back(std::move(n));
  }
  Json edges = Json::array();
  for (const auto& e : r.graph.edges)
    edges.push_back(Json::array({e.subject, relation_name(e.relation), e.object}));
  Json graph;
  graph["nodes"] = std::move(nodes);
  graph["edges"] = std::move(edges);
  j["graph"] = std::move(graph);
  Json boxes = Json::array();
  for (const auto& b : r.boxes) boxes.push_back(box_json(b));
  j["boxes"] = std::move(boxes);
  Json cams = Json::array();
  for (const auto& c : r.cameras) {
    Json cj;
    cj["azimuth"] = c.azimuth_deg;
    cj["elevation"] = c.elevation_deg;
    cj["radius"] = c.radius;
    cams.push_back(std::move(cj));
  }
  j["cameras"] = std::move(cams);
  return j;
}

SceneRecord scene_record_from_json(const Json& j) {
  SceneRecord r;
  r.utterance = j.at("utterance").get<std::string>();
  for (const auto& n : j.at("graph").at("nodes")) {
    NounPhrase np;
    np.adjectives = n.at("adjectives").get<std::vector<std::string>>();
    np.noun = n.at("noun").get<std::string>();
    r.graph.nodes.push_back(std::move(np));
  }
  for (const auto& e : j.at("graph").at("edges")) {
    if (!e.is_array() || e.size() != 3) throw IoError("bad edge triple");
    auto rel = relation_from_name(e[1].get<std::string>());
    if (!rel) throw IoError("unknown relation name: " + e[1].get<std::string>());
    r.graph.edges.push_back({e[0].get<int>(), *rel, e[2].get<int>()});
  }
  for (const auto& b : j.at("boxes")) r.boxes.push_back(box_from_json(b));
  for (const auto& c : j.at("cameras")) {
    Camera cam;
    cam.azimuth_deg = c.at("azimuth").get<double>();
    cam.elevation_deg = c.at("elevation").get<double>();
    cam.radius = c.at("radius").get<double>();
    r.cameras.push_back(cam);
  }
  return r;
}

SceneSample dataset_scene(const Models& m, std::uint64_t seed, const std::string& split, int i) {
  Rng rng = Rng(seed).stream("synth-" + split, static_cast<std::uint64_t>(i));
  return synth_scene(m.what, m.where, rng);
}

// ---------------------------------------------------------------------------
// Rendering helpers shared by the evaluation suites

namespace {

VoxelGrid observe_scene(const std::vector<Box3D>& boxes, const std::vector<Vec3>& colors,
                        const std::vector<Camera>& cams) {
  std::vector<Image> views;
  views.reserve(cams.size());
  for (const auto& cam : cams) views.push_back(render_scene(boxes, colors, cam));
  return unproject(views, cams);
}

void finalize_counts(DetectCounts& c, int n_scenes) {
  c.precision = (c.tp + c.fp) > 0 ? static_cast<double>(c.tp) / (c.tp + c.fp) : 0.0;
  c.recall = n_scenes > 0 ? static_cast<double>(c.tp) / n_scenes : 0.0;
  c.f1 = (c.precision + c.recall) > 0.0
             ? 2.0 * c.precision * c.recall / (c.precision + c.recall)
             : 0.0;
}

Json counts_json(const DetectCounts& c) {
  Json j;
  j["tp"] = c.tp;
  j["fp"] = c.fp;
  j["fn"] = c.fn;
  j["precision"] = c.precision;
  j["recall"] = c.recall;
  j["f1"] = c.f1;
  return j;
}

}  // namespace

// ---------------------------------------------------------------------------
// Evaluation suites

AffordEval eval_afford(const Models& m, int n_items, int budget, std::uint64_t seed,
                       bool use_classifier) {
  Rng root(seed);
  Rng set_rng = root.stream("afford-set");
  auto items = make_contradiction_set(n_items, set_rng);
  EdgeCheck check;
  if (use_classifier)
    check = [&m](RelationKind r, const Box3D& a, const Box3D& b) {
      return pairwise_score(m.pairwise, r, a, b) > 0.5;
    };
  AffordEval ev;
  for (std::size_t i = 0; i < items.size(); ++i) {
    SceneGraph g = parse_utterance(items[i].utterance);
    ComposeOptions opt;
    opt.max_samples = budget;
    opt.world_limit = 2.0;
    opt.build_canvas = false;
    Rng rng = root.stream("afford-item", i);
    AffordResult res = classify_affordable(g, m.what, m.where, rng, opt, check);
    ev.rows.push_back({items[i].utterance, items[i].affordable, res.affordable, res.samples_used});
    ev.correct += res.affordable == items[i].affordable;
  }
  ev.accuracy = ev.rows.empty() ? 0.0 : static_cast<double>(ev.correct) / ev.rows.size();
  return ev;
}

DetectEval eval_detection(const Models& m, int n_scenes, std::uint64_t seed) {
  DetectEval ev;
  ev.n_scenes = n_scenes;
  const auto in_rig = training_cameras();
  const auto ood_rig = novel_cameras();
  for (int i = 0; i < n_scenes; ++i) {
    SceneSample sc = dataset_scene(m, seed, "test", i);
    for (int vs = 0; vs < 2; ++vs) {
      const bool ood = vs == 1;
      VoxelGrid grid = observe_scene(sc.boxes, sc.colors, ood ? ood_rig : in_rig);
      std::vector<Box3D> proposals = propose_boxes(grid);
      for (int gt = 0; gt < 2; ++gt) {
        const bool gt_boxes = gt == 0;
        DetectEval::Row row;
        row.scene = i;
        row.ood = ood;
        row.gt_boxes = gt_boxes;
        try {
          auto r = resolve_referent(sc.graph, grid, gt_boxes ? sc.boxes : proposals, m.unary,
                                    m.pairwise);
          row.predicted = true;
          row.iou = iou3d(r.referent, sc.boxes[0]);
          row.correct = row.iou >= 0.5;
        } catch (const NoCandidateError&) {
        }
        DetectCounts& c = gt_boxes ? (ood ? ev.gt_ood : ev.gt_in) : (ood ? ev.prop_ood : ev.prop_in);
        c.tp += row.correct;
        c.fp += row.predicted && !row.correct;
        c.fn += !row.correct;
        ev.rows.push_back(row);
      }
    }
  }
  finalize_counts(ev.gt_in, n_scenes);
  finalize_counts(ev.gt_ood, n_scenes);
  finalize_counts(ev.prop_in, n_scenes);
  finalize_counts(ev.prop_ood, n_scenes);
  return ev;
}

ProposalEval eval_proposals(const Models& m, int n_scenes, std::uint64_t seed) {
  ProposalEval ev;
  ev.n_scenes = n_scenes;
  const auto rig = training_cameras();
  const double touch_gap = 2.0 * make_scene_grid().pitch().x();
  for (int i = 0; i < n_scenes; ++i) {
    SceneSample sc = dataset_scene(m, seed, "proposal", i);
    VoxelGrid grid = observe_scene(sc.boxes, sc.colors, rig);
    std::vector<Box3D> props = propose_boxes(grid);
    bool touching = false;
    for (std::size_t a = 0; a < sc.boxes.size(); ++a)
      for (std::size_t b = a + 1; b < sc.boxes.size(); ++b) {
        Vec3 gap = (sc.boxes[a].center - sc.boxes[b].center).cwiseAbs() -
                   (sc.boxes[a].half_extent + sc.boxes[b].half_extent);
        touching = touching || gap.maxCoeff() <= touch_gap;
      }
    ev.touching_scenes += touching;
    for (const auto& b : sc.boxes) {
      bool matched = false;
      for (const auto& p : props) matched = matched || iou3d(p, b) >= 0.5;
      ++ev.objects_all;
      ev.recalled_all += matched;
      if (!touching) {
        ++ev.objects_apart;
        ev.recalled_apart += matched;
      }
    }
  }
  ev.recall_all =
      ev.objects_all > 0 ? static_cast<double>(ev.recalled_all) / ev.objects_all : 0.0;
  ev.recall_apart =
      ev.objects_apart > 0 ? static_cast<double>(ev.recalled_apart) / ev.objects_apart : 0.0;
  return ev;
}

const std::array<RelationKind, 7>& instruction_relations() {
  static const std::array<RelationKind, 7> rels{
      RelationKind::LeftOf,      RelationKind::RightOf,    RelationKind::LeftBehind,
      RelationKind::LeftFront,   RelationKind::RightBehind, RelationKind::RightFront,
      RelationKind::Inside};
  return rels;
}

FollowEval eval_follow(const Models& m, int seeds_per_relation, std::uint64_t seed,
                       bool fit_dynamics) {
  Rng root(seed);
  const auto rig = training_cameras();
  static const std::array<const char*, 3> solids{"cube", "sphere", "cylinder"};
  FollowEval ev;
  int ep = 0;
  for (RelationKind rel : instruction_relations()) {
    for (int k = 0; k < seeds_per_relation; ++k, ++ep) {
      // scene content is shared between the known and fitted arms
      Rng scene_rng = root.stream("follow-scene", ep);
      NounPhrase mp, ap;
      if (rel == RelationKind::Inside) {
        std::string c1 = color_tokens()[scene_rng.index(color_tokens().size())];
        std::string c2 = c1;
        while (c2 == c1) c2 = color_tokens()[scene_rng.index(color_tokens().size())];
        mp = NounPhrase{{"small", c1}, solids[scene_rng.index(solids.size())]};
        ap = NounPhrase{{"large", c2}, "bowl"};
      } else {
        auto ph = sample_distinct_phrases(2, scene_rng, /*force_color=*/true);
        mp = ph[0];
        ap = ph[1];
      }
      SceneGraph sg{{mp, ap}, {}};
      ComposeOptions opt;
      opt.world_limit = 2.0;
      opt.table_rest = true;
      opt.build_canvas = false;
      auto res = compose_scene(sg, m.what, m.where, scene_rng, opt);

      FollowEval::Episode e;
      e.rel = rel;
      e.seed_index = k;
      e.utterance =
          "put the " + mp.text() + " " + relation_surface(rel) + " the " + ap.text();
      if (res.success) {
        VoxelGrid grid = observe_scene(res.placement.boxes,
                                       {rgb_vec(mp.color()), rgb_vec(ap.color())}, rig);
        Rng ep_rng =
            root.stream(fit_dynamics ? "follow-episode-fitted" : "follow-episode", ep);
        try {
          e.result = follow_instruction(e.utterance, grid, m.unary, m.pairwise, m.where, ep_rng,
                                        fit_dynamics);
          e.success = e.result.success;
          e.release_step = e.result.release_step;
          e.clipped_actions = e.result.clipped_actions;
          e.final_cost = e.result.final_cost;
        } catch (const NoCandidateError&) {
        } catch (const GeometryError&) {
        }
      }
      ev.successes += e.success;
      ev.episodes.push_back(std::move(e));
    }
  }
  return ev;
}

// ---------------------------------------------------------------------------
// Output writers shared by commands

namespace {

void write_afford_outputs(const fs::path& dir, const AffordEval& ev) {
  std::string csv = "utterance,expected,predicted,samples_used\n";
  for (const auto& r : ev.rows) {
    csv += csv_field(r.utterance);
    csv += ',';
    csv += r.expected ? '1' : '0';
    csv += ',';
    csv += r.predicted ? '1' : '0';
    csv += ',';
    csv += std::to_string(r.samples_used);
    csv += '\n';
  }
  write_text_file(dir / "afford.csv", csv);
  Json j;
  j["n"] = ev.rows.size();
  j["correct"] = ev.correct;
  j["accuracy"] = ev.accuracy;
  write_json_file(dir / "afford.json", j);
}

Json detect_json(const DetectEval& ev) {
  Json j;
  j["n_scenes"] = ev.n_scenes;
  j["gt_in"] = counts_json(ev.gt_in);
  j["gt_ood"] = counts_json(ev.gt_ood);
  j["prop_in"] = counts_json(ev.prop_in);
  j["prop_ood"] = counts_json(ev.prop_ood);
  return j;
}

void write_detect_outputs(const fs::path& dir, const DetectEval& ev) {
  std::string csv = "scene,views,boxes,predicted,iou,correct\n";
  for (const auto& r : ev.rows) {
    csv += std::to_string(r.scene);
    csv += ',';
    csv += r.ood ? "ood" : "in";
    csv += ',';
    csv += r.gt_boxes ? "gt" : "proposals";
    csv += ',';
    csv += r.predicted ? '1' : '0';
    csv += ',';
    csv += format_double(r.iou);
    csv += ',';
    csv += r.correct ? '1' : '0';
    csv += '\n';
  }
  write_text_file(dir / "detect.csv", csv);
  write_json_file(dir / "detect.json", detect_json(ev));
}

Json proposals_json(const ProposalEval& ev) {
  Json j;
  j["n_scenes"] = ev.n_scenes;
  j["objects_all"] = ev.objects_all;
  j["recalled_all"] = ev.recalled_all;
  j["recall_all"] = ev.recall_all;
  j["objects_apart"] = ev.objects_apart;
  j["recalled_apart"] = ev.recalled_apart;
  j["recall_apart"] = ev.recall_apart;
  j["touching_scenes"] = ev.touching_scenes;
  return j;
}

void write_trajectory_csv(const fs::path& path, const FollowResult& r) {
  std::string csv = "t,x0,x1,x2,x3,x4,x5,x6,u0,u1,u2,u3,cost\n";
  for (std::size_t t = 0; t < r.us.size(); ++t) {
    csv += std::to_string(t);
    for (int i = 0; i < kStateDim; ++i) {
      csv += ',';
      csv += format_double(r.xs[t][i]);
    }
    for (int i = 0; i < kActionDim; ++i) {
      csv += ',';
      csv += format_double(r.us[t][i]);
    }
    csv += ',';
    csv += format_double(t < r.costs.size() ? r.costs[t] : 0.0);
    csv += '\n';
  }
  write_text_file(path, csv);
}

void write_follow_outputs(const fs::path& dir, const FollowEval& ev, bool fitted) {
  const std::string arm = fitted ? "fitted" : "known";
  std::string csv = "relation,seed,success,release_step,clipped_actions,final_cost\n";
  fs::path traj_dir = dir / "trajectories";
  fs::create_directories(traj_dir);
  for (const auto& e : ev.episodes) {
    csv += relation_name(e.rel);
    csv += ',';
    csv += std::to_string(e.seed_index);
    csv += ',';
    csv += e.success ? '1' : '0';
    csv += ',';
    csv += std::to_string(e.release_step);
    csv += ',';
    csv += std::to_string(e.clipped_actions);
    csv += ',';
    csv += format_double(e.final_cost);
    csv += '\n';
    std::string name = "traj_" + relation_name(e.rel) + "_" + std::to_string(e.seed_index) +
                       (fitted ? "_fitted" : "") + ".csv";
    write_trajectory_csv(traj_dir / name, e.result);
  }
  write_text_file(dir / ("follow_" + arm + ".csv"), csv);
  Json j;
  j["dynamics"] = arm;
  j["episodes"] = ev.episodes.size();
  j["successes"] = ev.successes;
  Json per = Json::object();
  for (RelationKind rel : instruction_relations()) {
    int n = 0, ok = 0;
    for (const auto& e : ev.episodes)
      if (e.rel == rel) {
        ++n;
        ok += e.success;
      }
    Json row;
    row["episodes"] = n;
    row["successes"] = ok;
    per[relation_name(rel)] = std::move(row);
  }
  j["per_relation"] = std::move(per);
  write_json_file(dir / ("follow_" + arm + ".json"), j);
}

void print_follow_table(const FollowEval& ev, int seeds_per_relation, bool fitted) {
  std::cout << "placement (" << (fitted ? "fitted" : "known") << " dynamics), successes out of "
            << seeds_per_relation << " seeds:\n";
  for (RelationKind rel : instruction_relations()) {
    int ok = 0;
    for (const auto& e : ev.episodes) ok += e.rel == rel && e.success;
    std::cout << "  " << relation_name(rel) << ": " << ok << "/" << seeds_per_relation << "\n";
  }
  std::cout << "  total: " << ev.successes << "/" << ev.episodes.size() << "\n";
}

Models train_and_save(const CliOptions& o, int n_scenes, const TrainConfig& cfg_in) {
  TrainConfig cfg = cfg_in;
  cfg.seed = o.seed;
  Models m;
  Timer t;
  Rng data_rng = Rng(o.seed).stream("train-data");
  TrainSet ts = make_training_pairs(n_scenes, m.what, m.where, data_rng);
  std::cout << "training set: " << ts.unary_train.size() << " unary / " << ts.pair_train.size()
            << " pairwise train, " << ts.unary_heldout.size() << " / " << ts.pair_heldout.size()
            << " held out (" << format_double(t.seconds()) << "s to build)\n";
  std::vector<TrainLogRow> ulog, plog;
  m.unary = train_unary(ts, cfg, &ulog);
  m.pairwise = train_pairwise(ts, cfg, &plog);
  fs::create_directories(o.models_dir);
  save_models(o.models_dir, m);
  auto log_csv = [](const std::vector<TrainLogRow>& log) {
    std::string csv = "epoch,train_loss,heldout_accuracy\n";
    for (const auto& r : log)
      csv += std::to_string(r.epoch) + "," + format_double(r.train_loss) + "," +
             format_double(r.heldout_accuracy) + "\n";
    return csv;
  };
  write_text_file(o.models_dir / "unary_training.csv", log_csv(ulog));
  write_text_file(o.models_dir / "pairwise_training.csv", log_csv(plog));
  if (!ulog.empty())
    std::cout << "unary: loss " << format_double(ulog.back().train_loss) << ", held-out accuracy "
              << format_double(ulog.back().heldout_accuracy) << "\n";
  if (!plog.empty())
    std::cout << "pairwise: loss " << format_double(plog.back().train_loss)
              << ", held-out accuracy " << format_double(plog.back().heldout_accuracy) << "\n";
  std::cout << "trained in " << format_double(t.seconds()) << "s; models in "
            << o.models_dir.string() << "\n";
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// Commands

int cmd_synth(const CliOptions& o, const DatasetSpec& spec) {
  if (spec.n_train < 0 || spec.n_test < 0 || spec.n_train + spec.n_test == 0)
    throw std::invalid_argument("dataset needs a positive scene count");
  Timer t;
  Models m;
  auto cap = [&spec](std::vector<Camera> v) {
    if (spec.max_cameras > 0 && static_cast<int>(v.size()) > spec.max_cameras)
      v.resize(spec.max_cameras);
    return v;
  };
  std::vector<Camera> train_rig = cap(training_cameras());
  std::vector<Camera> test_rig = training_cameras();
  for (const Camera& c : novel_cameras()) test_rig.push_back(c);
  test_rig = cap(std::move(test_rig));

  Json manifest;
  manifest["seed"] = o.seed;
  manifest["n_train"] = spec.n_train;
  manifest["n_test"] = spec.n_test;
  manifest["train_views"] = train_rig.size();
  manifest["test_views"] = test_rig.size();
  Json scenes;
  for (const std::string& split : {std::string("train"), std::string("test")}) {
    const int n = split == "train" ? spec.n_train : spec.n_test;
    const auto& rig = split == "train" ? train_rig : test_rig;
    Json list = Json::array();
    for (int i = 0; i < n; ++i) {
      SceneSample sc = dataset_scene(m, o.seed, split, i);
      char name[32];
      std::snprintf(name, sizeof name, "scene_%05d", i);
      fs::path dir = o.out_dir / split / name;
      fs::create_directories(dir);
      write_text_file(dir / "utterance.txt", sc.utterance + "\n");
      write_json_file(dir / "scene.json",
                      scene_record_to_json({sc.utterance, sc.graph, sc.boxes, rig}));
      for (std::size_t v = 0; v < rig.size(); ++v) {
        Image img = render_scene(sc.boxes, sc.colors, rig[v]);
        char view[32];
        std::snprintf(view, sizeof view, "view_%02zu", v);
        save_ppm((dir / (std::string(view) + ".ppm")).string(), img);
        save_pgm16((dir / (std::string(view) + ".pgm")).string(), img);
      }
      list.push_back(split + "/" + name);
    }
    scenes[split] = std::move(list);
  }
  manifest["scenes"] = std::move(scenes);
  write_json_file(o.out_dir / "manifest.json", manifest);
  std::cout << "synthesized " << spec.n_train << " train + " << spec.n_test << " test scenes in "
            << format_double(t.seconds()) << "s under " << o.out_dir.string() << "\n";
  return 0;
}

int cmd_train(const CliOptions& o, int n_scenes, const TrainConfig& cfg) {
  train_and_save(o, n_scenes, cfg);
  return 0;
}

int cmd_generate(const CliOptions& o, const std::string& utterance, int n_samples,
                 double azimuth_deg, double elevation_deg) {
  if (n_samples <= 0) throw std::invalid_argument("n_samples must be positive");
  Models m = load_models_or_default(o);
  SceneGraph g = parse_utterance(utterance);
  fs::create_directories(o.out_dir);
  Camera cam;
  cam.azimuth_deg = azimuth_deg;
  cam.elevation_deg = elevation_deg;
  bool has_inside = false;
  for (const auto& e : g.edges) has_inside = has_inside || e.relation == RelationKind::Inside;
  Rng root(o.seed);
  for (int k = 0; k < n_samples; ++k) {
    Rng rng = root.stream("generate", k);
    SceneGraph rg = g;
    for (auto& np : rg.nodes) np = resolve_attributes(np, rng);
    ComposeOptions opt;
    opt.world_limit = 2.0;
    opt.table_rest = !has_inside;
    auto res = compose_scene(rg, m.what, m.where, rng, opt);
    if (!res.success) {
      std::cout << "infeasible: no placement found within the sampling budget ("
                << opt.max_samples << " samples per node, " << opt.max_samples
                << " restarts; " << res.samples_used << " samples used) for: " << utterance
                << "\n";
      return kExitInfeasible;
    }
    char stem[32];
    std::snprintf(stem, sizeof stem, "sample_%02d", k);
    Image img = project(*res.placement.canvas, cam);
    save_ppm((o.out_dir / (std::string(stem) + ".ppm")).string(), img);
    Json j;
    j["utterance"] = utterance;
    j["sample"] = k;
    Json nodes = Json::array();
    for (const auto& np : rg.nodes) {
      Json n;
      n["adjectives"] = np.adjectives;
      n["noun"] = np.noun;
      nodes.push_back(std::move(n));
    }
    j["nodes"] = std::move(nodes);
    Json boxes = Json::array();
    for (const auto& b : res.placement.boxes) boxes.push_back(box_json(b));
    j["boxes"] = std::move(boxes);
    Json sat = Json::array();
    for (const auto& e : rg.edges)
      sat.push_back(relation_oracle(e.relation, res.placement.boxes[e.subject],
                                    res.placement.boxes[e.object]));
    j["edges_satisfied"] = std::move(sat);
    j["samples_used"] = res.samples_used;
    write_json_file(o.out_dir / (std::string(stem) + ".json"), j);
  }
  std::cout << "generated " << n_samples << " sample(s) under " << o.out_dir.string() << "\n";
  return 0;
}

int cmd_afford(const CliOptions& o, int n_items, int budget) {
  Models m = load_models_or_default(o);
  bool trained = false;
  for (const auto& w : m.pairwise.weights) trained = trained || w.squaredNorm() > 0.0;
  Timer t;
  AffordEval ev = eval_afford(m, n_items, budget, o.seed, trained);
  fs::create_directories(o.out_dir);
  write_afford_outputs(o.out_dir, ev);
  std::cout << "affordability: " << ev.correct << "/" << ev.rows.size() << " correct (accuracy "
            << format_double(ev.accuracy) << ") in " << format_double(t.seconds()) << "s"
            << (trained ? "" : " [oracle edge checks; train models first for scored checks]")
            << "\n";
  return 0;
}

int cmd_detect(const CliOptions& o, int n_scenes) {
  Models m = load_models_or_default(o);
  Timer t;
  DetectEval ev = eval_detection(m, n_scenes, o.seed);
  fs::create_directories(o.out_dir);
  write_detect_outputs(o.out_dir, ev);
  std::cout << "detection over " << n_scenes << " scenes in " << format_double(t.seconds())
            << "s\n"
            << "  gt boxes:   f1 in " << format_double(ev.gt_in.f1) << ", ood "
            << format_double(ev.gt_ood.f1) << "\n"
            << "  proposals:  f1 in " << format_double(ev.prop_in.f1) << ", ood "
            << format_double(ev.prop_ood.f1) << "\n";
  return 0;
}

int cmd_follow(const CliOptions& o, int seeds_per_relation, bool fit_dynamics) {
  Models m = load_models_or_default(o);
  Timer t;
  FollowEval ev = eval_follow(m, seeds_per_relation, o.seed, fit_dynamics);
  fs::create_directories(o.out_dir);
  write_follow_outputs(o.out_dir, ev, fit_dynamics);
  print_follow_table(ev, seeds_per_relation, fit_dynamics);
  std::cout << "follow suite in " << format_double(t.seconds()) << "s\n";
  return 0;
}

int cmd_eval_all(const CliOptions& o, int train_scenes, int detect_scenes, int proposal_scenes,
                 int afford_items, int follow_seeds) {
  const char* files[] = {"what.json", "where.json", "unary.json", "pairwise.json"};
  bool have = true;
  for (const char* f : files) have = have && fs::exists(o.models_dir / f);
  Models m = have ? load_models(o.models_dir) : train_and_save(o, train_scenes, TrainConfig{});
  fs::create_directories(o.out_dir);

  Timer ta;
  AffordEval afford = eval_afford(m, afford_items, 1000, o.seed, true);
  write_afford_outputs(o.out_dir, afford);
  std::cout << "affordability: " << afford.correct << "/" << afford.rows.size() << " ("
            << format_double(ta.seconds()) << "s)\n";

  Timer td;
  DetectEval detect = eval_detection(m, detect_scenes, o.seed);
  write_detect_outputs(o.out_dir, detect);
  std::cout << "detection: gt f1 " << format_double(detect.gt_in.f1) << "/"
            << format_double(detect.gt_ood.f1) << ", proposal f1 "
            << format_double(detect.prop_in.f1) << "/" << format_double(detect.prop_ood.f1)
            << " (" << format_double(td.seconds()) << "s)\n";

  Timer tp;
  ProposalEval props = eval_proposals(m, proposal_scenes, o.seed);
  write_json_file(o.out_dir / "proposals.json", proposals_json(props));
  std::cout << "proposal recall: " << format_double(props.recall_apart) << " apart, "
            << format_double(props.recall_all) << " overall (" << format_double(tp.seconds())
            << "s)\n";

  Timer tf;
  FollowEval known = eval_follow(m, follow_seeds, o.seed, false);
  write_follow_outputs(o.out_dir, known, false);
  print_follow_table(known, follow_seeds, false);
  FollowEval fitted = eval_follow(m, follow_seeds, o.seed, true);
  write_follow_outputs(o.out_dir, fitted, true);
  print_follow_table(fitted, follow_seeds, true);
  std::cout << "placement suites (" << format_double(tf.seconds()) << "s)\n";

  Json metrics;
  metrics["seed"] = o.seed;
  {
    Json a;
    a["n"] = afford.rows.size();
    a["correct"] = afford.correct;
    a["accuracy"] = afford.accuracy;
    metrics["afford"] = std::move(a);
  }
  metrics["detect"] = detect_json(detect);
  metrics["proposals"] = proposals_json(props);
  {
    Json f;
    Json kj;
    kj["episodes"] = known.episodes.size();
    kj["successes"] = known.successes;
    f["known"] = std::move(kj);
    Json fj;
    fj["episodes"] = fitted.episodes.size();
    fj["successes"] = fitted.successes;
    f["fitted"] = std::move(fj);
    metrics["follow"] = std::move(f);
  }
  write_json_file(o.out_dir / "metrics.json", metrics);
  std::cout << "metrics written to " << (o.out_dir / "metrics.json").string() << "\n";
  return 0;
}

}  // namespace voxlang
