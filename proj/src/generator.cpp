#include "voxlang/generator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace voxlang {

namespace {

// Spatially uniform 16^3 block carrying one channel pattern.
VoxelGrid uniform_block(const std::array<float, kSceneGridC>& pattern) {
  VoxelGrid g(16, 16, 16, kSceneGridC, Box3D{Vec3::Zero(), Vec3(0.5, 0.5, 0.5)});
  for (int z = 0; z < 16; ++z)
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x)
        for (int ch = 0; ch < kSceneGridC; ++ch) g.at(x, y, z, ch) = pattern[ch];
  return g;
}

// Neutral pattern: 1 on every meaningful channel so the token gates nothing,
// 0 on the reserved tail.
std::array<float, kSceneGridC> neutral_pattern() {
  std::array<float, kSceneGridC> p;
  p.fill(0.0f);
  for (int ch = 0; ch <= kChanSize + 1; ++ch) p[ch] = 1.0f;
  return p;
}

std::array<float, kSceneGridC> one_hot_pattern(int family_base, int family_size, int index) {
  std::array<float, kSceneGridC> p = neutral_pattern();
  for (int k = 0; k < family_size; ++k) p[family_base + k] = (k == index) ? 1.0f : 0.0f;
  return p;
}

int token_index(const std::vector<std::string>& family, const std::string& token) {
  for (std::size_t k = 0; k < family.size(); ++k)
    if (family[k] == token) return static_cast<int>(k);
  return -1;
}

}  // namespace

NounPhrase resolve_attributes(const NounPhrase& np, Rng& rng) {
  NounPhrase out;
  out.noun = np.noun;
  std::string size = np.size(), color = np.color(), material = np.material();
  if (color.empty()) {
    const auto& c = color_tokens();
    color = c[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(c.size()) - 1))];
  }
  if (material.empty()) {
    const auto& m = material_tokens();
    material = m[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(m.size()) - 1))];
  }
  if (!size.empty()) out.adjectives.push_back(size);
  out.adjectives.push_back(color);
  out.adjectives.push_back(material);
  return out;
}

WhatModel::WhatModel(std::map<std::string, TokenEntry> table, double noise_sigma)
    : table_(std::move(table)), noise_sigma_(noise_sigma) {
  if (noise_sigma_ < 0.0) throw std::invalid_argument("negative noise sigma");
}

WhatModel WhatModel::declared(double noise_sigma) {
  std::map<std::string, TokenEntry> table;
  const double medium = 2.0 * size_value("");
  const auto& colors = color_tokens();
  for (std::size_t k = 0; k < colors.size(); ++k)
    table.emplace(colors[k],
                  TokenEntry{uniform_block(one_hot_pattern(kChanColor, static_cast<int>(colors.size()),
                                                           static_cast<int>(k))),
                             Vec3::Ones()});
  const auto& materials = material_tokens();
  for (std::size_t k = 0; k < materials.size(); ++k)
    table.emplace(materials[k],
                  TokenEntry{uniform_block(one_hot_pattern(kChanMaterial,
                                                           static_cast<int>(materials.size()),
                                                           static_cast<int>(k))),
                             Vec3::Ones()});
  const auto& shapes = shape_tokens();
  for (std::size_t k = 0; k < shapes.size(); ++k)
    table.emplace(shapes[k],
                  TokenEntry{uniform_block(one_hot_pattern(kChanShape, static_cast<int>(shapes.size()),
                                                           static_cast<int>(k))),
                             medium * shape_aspect(shapes[k])});
  const auto& sizes = size_tokens();
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    // Size tokens gate only the size channels; everything else stays 1,
    // including the reserved tail (the noun already zeroes it).
    std::array<float, kSceneGridC> p;
    p.fill(1.0f);
    for (std::size_t j = 0; j < sizes.size(); ++j)
      p[kChanSize + static_cast<int>(j)] = (j == k) ? 1.0f : 0.0f;
    double factor = size_value(sizes[k]) / size_value("");
    table.emplace(sizes[k], TokenEntry{uniform_block(p), factor * Vec3::Ones()});
  }
  return WhatModel(std::move(table), noise_sigma);
}

const WhatModel::TokenEntry& WhatModel::entry(const std::string& token) const {
  auto it = table_.find(token);
  if (it == table_.end()) throw UnknownTokenError(token);
  return it->second;
}

ObjectTensor WhatModel::generate(const NounPhrase& np, Rng& rng) const {
  std::vector<const TokenEntry*> entries;
  for (const auto& adj : np.adjectives) entries.push_back(&entry(adj));
  entries.push_back(&entry(np.noun));

  Vec3 size = Vec3::Ones();
  for (const TokenEntry* e : entries) size = size.cwiseProduct(e->size);

  VoxelGrid grid = entries.front()->tensor;
  for (std::size_t i = 1; i < entries.size(); ++i) {
    const VoxelGrid& t = entries[i]->tensor;
    for (std::size_t j = 0; j < grid.data.size(); ++j) grid.data[j] *= t.data[j];
  }
  if (noise_sigma_ > 0.0)
    for (float& v : grid.data) v += static_cast<float>(rng.normal(0.0, noise_sigma_));
  grid.extent = Box3D{Vec3::Zero(), size * 0.5};
  return ObjectTensor{std::move(grid), size};
}

Vec3 WhatModel::size_of(const NounPhrase& np) const {
  Vec3 size = entry(np.noun).size;
  for (const auto& adj : np.adjectives) size = size.cwiseProduct(entry(adj).size);
  return size;
}

WhereModel::WhereModel(std::array<Vec3, kNumRelations> means,
                       std::array<Vec3, kNumRelations> stddevs, double margin)
    : means_(std::move(means)), stddevs_(std::move(stddevs)), margin_(margin) {
  for (const Vec3& sd : stddevs_)
    if ((sd.array() <= 0.0).any()) throw std::invalid_argument("stddevs must be positive");
}

WhereModel WhereModel::declared(double mean_mag, double sigma, double margin) {
  std::array<Vec3, kNumRelations> means;
  std::array<Vec3, kNumRelations> stddevs;
  for (int r = 0; r < kNumRelations; ++r) {
    auto signs = relation_axis_signs(static_cast<RelationKind>(r));
    int k = 0;
    for (int s : signs) k += (s != 0);
    Vec3 mean = Vec3::Zero();
    if (k > 0) {
      double per_axis = mean_mag / std::sqrt(static_cast<double>(k));
      for (int a = 0; a < 3; ++a) mean[a] = signs[static_cast<std::size_t>(a)] * per_axis;
    }
    means[static_cast<std::size_t>(r)] = mean;
    stddevs[static_cast<std::size_t>(r)] = sigma * Vec3::Ones();
  }
  return WhereModel(means, stddevs, margin);
}

Vec3 WhereModel::sample_offset(RelationKind rel, Rng& rng) const {
  if (rel == RelationKind::Inside)
    throw std::invalid_argument("containment offsets depend on sizes; use sample_inside_offset");
  const Vec3& mean = means_[static_cast<std::size_t>(rel)];
  const Vec3& sd = stddevs_[static_cast<std::size_t>(rel)];
  auto signs = relation_axis_signs(rel);
  Vec3 out;
  for (int a = 0; a < 3; ++a) {
    int s = signs[static_cast<std::size_t>(a)];
    double v = rng.normal(mean[a], sd[a]);
    while (s != 0 && v * s <= margin_) v = rng.normal(mean[a], sd[a]);
    out[a] = v;
  }
  return out;
}

std::optional<Vec3> WhereModel::sample_inside_offset(const Vec3& h_subj, const Vec3& h_obj,
                                                     Rng& rng) const {
  Vec3 slack = h_obj - h_subj;
  if ((slack.array() <= 0.0).any()) return std::nullopt;
  Vec3 out;
  for (int a = 0; a < 3; ++a) out[a] = rng.uniform(-0.9 * slack[a], 0.9 * slack[a]);
  return out;
}

const Vec3& WhereModel::mean(RelationKind rel) const {
  return means_[static_cast<std::size_t>(rel)];
}

const Vec3& WhereModel::stddev(RelationKind rel) const {
  return stddevs_[static_cast<std::size_t>(rel)];
}

namespace {

// Generates the node tensors and draws them onto a fresh scene grid. Nodes
// whose centers fall outside the grid stay undrawn; long relation chains can
// walk past the canvas while the placement itself is still valid.
void materialize_placement(const SceneGraph& g, const WhatModel& what, Rng& rng, Placement& p) {
  p.tensors.clear();
  p.tensors.reserve(g.nodes.size());
  VoxelGrid canvas = make_scene_grid();
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    p.tensors.push_back(what.generate(g.nodes[i], rng));
    const Vec3& c = p.boxes[i].center;
    if ((c.array().abs() > canvas.extent.half_extent.array()).any()) continue;
    VoxelGrid block = resize(p.tensors.back().grid, p.tensors.back().size);
    draw(canvas, block, c);
  }
  p.canvas = std::move(canvas);
}

}  // namespace

ComposeResult compose_scene(const SceneGraph& g, const WhatModel& what, const WhereModel& where,
                            Rng& rng, const ComposeOptions& opt) {
  validate(g);
  if (opt.max_samples < 1) throw std::invalid_argument("max_samples must be positive");
  const int n = static_cast<int>(g.nodes.size());

  std::vector<Vec3> half(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    half[static_cast<std::size_t>(i)] = 0.5 * what.size_of(g.nodes[static_cast<std::size_t>(i)]);

  std::vector<char> contained(static_cast<std::size_t>(n), 0);
  for (const SceneEdge& e : g.edges)
    if (e.relation == RelationKind::Inside) contained[static_cast<std::size_t>(e.subject)] = 1;

  const double unanchored_bound = std::isfinite(opt.world_limit) ? opt.world_limit : 2.0;

  ComposeResult result;
  std::vector<Box3D> boxes(static_cast<std::size_t>(n));
  std::vector<char> placed(static_cast<std::size_t>(n), 0);

  for (int restart = 0; restart < opt.max_samples; ++restart) {
    std::fill(placed.begin(), placed.end(), 0);
    bool scene_ok = true;
    for (int i = 0; i < n && scene_ok; ++i) {
      const std::size_t ui = static_cast<std::size_t>(i);
      // Anchor: first incident edge whose other endpoint is placed.
      const SceneEdge* anchor = nullptr;
      for (const SceneEdge& e : g.edges) {
        if (e.subject == i && placed[static_cast<std::size_t>(e.object)]) { anchor = &e; break; }
        if (e.object == i && placed[static_cast<std::size_t>(e.subject)]) { anchor = &e; break; }
      }
      bool node_ok = false;
      for (int attempt = 0; attempt < opt.max_samples; ++attempt) {
        ++result.samples_used;
        Vec3 loc;
        if (i == 0) {
          loc = Vec3::Zero();
        } else if (anchor == nullptr) {
          for (int a = 0; a < 3; ++a) loc[a] = rng.uniform(-unanchored_bound, unanchored_bound);
        } else {
          const std::size_t us = static_cast<std::size_t>(anchor->subject);
          const std::size_t uo = static_cast<std::size_t>(anchor->object);
          Vec3 off;
          if (anchor->relation == RelationKind::Inside) {
            auto inside = where.sample_inside_offset(half[us], half[uo], rng);
            if (!inside) continue;
            off = *inside;
          } else {
            off = where.sample_offset(anchor->relation, rng);
          }
          loc = anchor->subject == i ? Vec3(boxes[uo].center + off)
                                     : Vec3(boxes[us].center - off);
        }
        if (opt.table_rest && !contained[ui]) loc.y() = half[ui].y();
        if ((loc.array().abs() > opt.world_limit).any()) continue;
        Box3D box{loc, half[ui]};

        bool ok = true;
        for (int j = 0; j < i && ok; ++j)
          if (placed[static_cast<std::size_t>(j)] &&
              iou3d(box, boxes[static_cast<std::size_t>(j)]) > opt.iou_limit)
            ok = false;
        for (const SceneEdge& e : g.edges) {
          if (!ok) break;
          if (e.subject == i && placed[static_cast<std::size_t>(e.object)])
            ok = relation_oracle(e.relation, box, boxes[static_cast<std::size_t>(e.object)],
                                 opt.margin);
          else if (e.object == i && placed[static_cast<std::size_t>(e.subject)])
            ok = relation_oracle(e.relation, boxes[static_cast<std::size_t>(e.subject)], box,
                                 opt.margin);
        }
        if (!ok) continue;
        boxes[ui] = box;
        placed[ui] = 1;
        node_ok = true;
        break;
      }
      if (!node_ok) scene_ok = false;
    }
    if (scene_ok) {
      result.success = true;
      result.placement.boxes = boxes;
      if (opt.build_canvas) materialize_placement(g, what, rng, result.placement);
      return result;
    }
  }
  return result;
}

AffordResult classify_affordable(const SceneGraph& g, const WhatModel& what,
                                 const WhereModel& where, Rng& rng, const ComposeOptions& opt,
                                 const EdgeCheck& edge_check) {
  AffordResult out;
  ComposeOptions inner = opt;
  inner.build_canvas = false;
  // A trained edge check can reject a geometrically valid witness; re-compose
  // a few times before accepting the rejection as the verdict.
  const int kWitnessAttempts = 3;
  for (int attempt = 0; attempt < kWitnessAttempts; ++attempt) {
    ComposeResult c = compose_scene(g, what, where, rng, inner);
    out.samples_used += c.samples_used;
    if (!c.success) return out;
    bool verified = true;
    if (edge_check)
      for (const SceneEdge& e : g.edges)
        if (!edge_check(e.relation, c.placement.boxes[static_cast<std::size_t>(e.subject)],
                        c.placement.boxes[static_cast<std::size_t>(e.object)])) {
          verified = false;
          break;
        }
    if (verified) {
      out.affordable = true;
      if (opt.build_canvas) materialize_placement(g, what, rng, c.placement);
      out.witness = std::move(c.placement);
      return out;
    }
  }
  return out;
}

int retrieve_prototype(const ObjectTensor& query,
                       const std::vector<std::pair<int, ObjectTensor>>& library) {
  if (library.empty()) throw std::invalid_argument("empty prototype library");
  int best_id = 0;
  double best_d = std::numeric_limits<double>::infinity();
  bool first = true;
  for (const auto& [id, proto] : library) {
    if (proto.grid.data.size() != query.grid.data.size())
      throw std::invalid_argument("library tensor shape mismatch");
    double d = 0.0;
    for (std::size_t j = 0; j < query.grid.data.size(); ++j) {
      double diff = static_cast<double>(query.grid.data[j]) - proto.grid.data[j];
      d += diff * diff;
    }
    if (first || d < best_d || (d == best_d && id < best_id)) {
      best_d = d;
      best_id = id;
      first = false;
    }
  }
  return best_id;
}

SceneSample synth_scene(const WhatModel& what, const WhereModel& where, Rng& rng) {
  ComposeOptions opt;
  opt.world_limit = 2.0;
  opt.table_rest = true;
  opt.build_canvas = false;
  for (;;) {
    std::vector<NounPhrase> phrases = sample_distinct_phrases(2, rng, /*force_color=*/true);
    RelationKind rel = sample_relation(phrases[0], phrases[1], rng, /*axis_only=*/true);
    SceneGraph g;
    g.nodes = phrases;
    g.edges = {SceneEdge{0, rel, 1}};
    ComposeResult c = compose_scene(g, what, where, rng, opt);
    if (!c.success) continue;
    SceneSample s;
    s.utterance = pretty_print(g);
    s.graph = std::move(g);
    s.boxes = std::move(c.placement.boxes);
    for (const NounPhrase& np : s.graph.nodes) {
      std::array<float, 3> c3 = color_rgb(np.color());
      s.colors.emplace_back(c3[0], c3[1], c3[2]);
    }
    return s;
  }
}

}  // namespace voxlang
