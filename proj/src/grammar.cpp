#include "voxlang/grammar.hpp"

#include <algorithm>
#include <cctype>

namespace voxlang {

namespace {

struct Token {
  std::string text;
  std::size_t offset;
};

std::vector<Token> tokenize(const std::string& s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    if (s[i] == ',') {
      out.push_back({",", i});
      ++i;
      continue;
    }
    std::size_t start = i;
    std::string w;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i])) && s[i] != ',')
      w += static_cast<char>(std::tolower(static_cast<unsigned char>(s[i++])));
    out.push_back({std::move(w), start});
  }
  return out;
}

class Parser {
 public:
  explicit Parser(const std::string& text) : text_(text), toks_(tokenize(text)) {}

  SceneGraph utterance() {
    SceneGraph g;
    group(g);
    while (!at_end()) {
      expect(",");
      group(g);
    }
    validate(g);
    return g;
  }

  PlacementCommand command() {
    PlacementCommand c;
    if (peek() != "put" && peek() != "place") fail({"put", "place"});
    advance();
    c.manipulandum = noun_phrase().first;
    c.relation = relation();
    auto [anchor, off] = noun_phrase();
    c.anchor = anchor;
    if (!at_end()) fail({"<end of command>"});
    if (c.manipulandum == c.anchor)
      throw ParseError(off, {}, "command names the same object twice");
    return c;
  }

 private:
  bool at_end() const { return pos_ >= toks_.size(); }
  const std::string& peek() const {
    static const std::string empty;
    return at_end() ? empty : toks_[pos_].text;
  }
  std::size_t offset() const { return at_end() ? text_.size() : toks_[pos_].offset; }
  void advance() { ++pos_; }

  [[noreturn]] void fail(std::vector<std::string> expected) const {
    std::string msg = "expected ";
    for (std::size_t i = 0; i < expected.size(); ++i)
      msg += (i ? " | " : "") + expected[i];
    msg += " at offset " + std::to_string(offset());
    msg += at_end() ? ", got end of input" : ", got '" + peek() + "'";
    throw ParseError(offset(), std::move(expected), msg);
  }

  void expect(const std::string& w) {
    if (peek() != w) fail({w});
    advance();
  }

  // group := np ["is" relation np] {"and" relation np}
  void group(SceneGraph& g) {
    int subj = noun_phrase_node(g);
    if (peek() == "is") {
      advance();
      add_edge(g, subj, relation());
    }
    while (peek() == "and") {
      advance();
      add_edge(g, subj, relation());
    }
    if (!at_end() && peek() != ",") fail({"is", "and", ",", "<end>"});
  }

  void add_edge(SceneGraph& g, int subj, RelationKind rel) {
    std::size_t off = offset();
    int obj = noun_phrase_node(g);
    if (obj == subj)
      throw ParseError(off, {}, "relation relates a phrase to itself");
    g.edges.push_back({subj, rel, obj});
  }

  RelationKind relation() {
    const std::string& w = peek();
    if (w == "behind") {
      advance();
      return RelationKind::Behind;
    }
    if (w == "inside") {
      advance();
      return RelationKind::Inside;
    }
    if (w == "to") {
      advance();
      expect("the");
      RelationKind r;
      if (peek() == "left")
        r = RelationKind::LeftOf;
      else if (peek() == "right")
        r = RelationKind::RightOf;
      else
        fail({"left", "right"});
      advance();
      expect("of");
      return r;
    }
    if (w == "in") {
      advance();
      expect("front");
      expect("of");
      return RelationKind::InFrontOf;
    }
    if (w == "left" || w == "right") {
      bool left = (w == "left");
      advance();
      if (peek() == "behind") {
        advance();
        return left ? RelationKind::LeftBehind : RelationKind::RightBehind;
      }
      if (peek() == "front") {
        advance();
        expect("of");
        return left ? RelationKind::LeftFront : RelationKind::RightFront;
      }
      fail({"behind", "front"});
    }
    fail({"to", "in", "behind", "left", "right", "inside"});
  }

  // Returns the phrase and its starting byte offset.
  std::pair<NounPhrase, std::size_t> noun_phrase() {
    std::size_t start = offset();
    if (peek() != "a" && peek() != "the") fail({"a", "the"});
    bool definite = (peek() == "the");
    advance();
    NounPhrase np;
    if (is_size_token(peek())) {
      np.adjectives.push_back(peek());
      advance();
    }
    if (is_color_token(peek())) {
      np.adjectives.push_back(peek());
      advance();
    }
    if (is_material_token(peek())) {
      np.adjectives.push_back(peek());
      advance();
    }
    if (!is_shape_token(peek())) {
      std::vector<std::string> exp = shape_tokens();
      if (np.adjectives.empty() || is_size_token(np.adjectives.back())) {
        auto add = [&exp](const std::vector<std::string>& v) {
          exp.insert(exp.end(), v.begin(), v.end());
        };
        if (np.adjectives.empty()) add(size_tokens());
        add(color_tokens());
        add(material_tokens());
      } else if (is_color_token(np.adjectives.back())) {
        exp.insert(exp.end(), material_tokens().begin(), material_tokens().end());
      }
      fail(std::move(exp));
    }
    np.noun = peek();
    advance();
    last_definite_ = definite;
    return {np, start};
  }

  int noun_phrase_node(SceneGraph& g) {
    auto [np, off] = noun_phrase();
    (void)off;
    if (last_definite_) {
      for (std::size_t i = 0; i < g.nodes.size(); ++i)
        if (g.nodes[i] == np) return static_cast<int>(i);
    }
    g.nodes.push_back(std::move(np));
    return static_cast<int>(g.nodes.size()) - 1;
  }

  const std::string& text_;
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  bool last_definite_ = false;
};

}  // namespace

SceneGraph parse_utterance(const std::string& text) { return Parser(text).utterance(); }

bool is_command(const std::string& text) {
  auto toks = tokenize(text);
  return !toks.empty() && (toks[0].text == "put" || toks[0].text == "place");
}

PlacementCommand parse_command(const std::string& text) { return Parser(text).command(); }

std::string pretty_print(const SceneGraph& g) {
  validate(g);
  struct Group {
    int subj;
    std::vector<std::pair<RelationKind, int>> rels;
  };
  std::vector<Group> groups;
  for (const auto& e : g.edges) {
    if (groups.empty() || groups.back().subj != e.subject)
      groups.push_back({e.subject, {}});
    groups.back().rels.push_back({e.relation, e.object});
  }

  std::vector<bool> mentioned(g.nodes.size(), false);
  auto mention = [&](int i) {
    std::string s = mentioned[i] ? "the " : "a ";
    mentioned[i] = true;
    return s + g.nodes[i].text();
  };

  std::vector<std::string> parts;
  for (const auto& gr : groups) {
    std::string s = mention(gr.subj);
    bool first = true;
    for (const auto& [rel, obj] : gr.rels) {
      s += first ? " is " : " and ";
      s += relation_surface(rel);
      s += ' ';
      s += mention(obj);
      first = false;
    }
    parts.push_back(std::move(s));
  }
  for (std::size_t i = 0; i < g.nodes.size(); ++i)
    if (!mentioned[i]) parts.push_back(mention(static_cast<int>(i)));

  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += ", ";
    out += parts[i];
  }
  return out;
}

// ---------------------------------------------------------------------------

NounPhrase sample_phrase(Rng& rng, bool force_color) {
  NounPhrase np;
  if (rng.uniform() < 0.5) np.adjectives.push_back(size_tokens()[rng.index(size_tokens().size())]);
  if (force_color || rng.uniform() < 0.5)
    np.adjectives.push_back(color_tokens()[rng.index(color_tokens().size())]);
  if (rng.uniform() < 0.5)
    np.adjectives.push_back(material_tokens()[rng.index(material_tokens().size())]);
  np.noun = shape_tokens()[rng.index(shape_tokens().size())];
  return np;
}

std::vector<NounPhrase> sample_distinct_phrases(int n, Rng& rng, bool force_color) {
  std::vector<NounPhrase> out;
  while (static_cast<int>(out.size()) < n) {
    NounPhrase np = sample_phrase(rng, force_color);
    bool dup = std::any_of(out.begin(), out.end(), [&](const NounPhrase& o) {
      return o == np || (force_color && o.color() == np.color());
    });
    if (!dup) out.push_back(std::move(np));
  }
  return out;
}

const std::array<RelationKind, 8>& axis_relations() {
  static const std::array<RelationKind, 8> k = {
      RelationKind::LeftOf,     RelationKind::RightOf,    RelationKind::InFrontOf,
      RelationKind::Behind,     RelationKind::LeftBehind, RelationKind::LeftFront,
      RelationKind::RightBehind, RelationKind::RightFront};
  return k;
}

// Inside joins the pool only when the object can contain the subject and the
// contained overlap (volume ratio) stays under the 0.1 cap.
RelationKind sample_relation(const NounPhrase& subj, const NounPhrase& obj, Rng& rng,
                             bool axis_only) {
  bool inside_ok = false;
  if (!axis_only && shape_can_contain(obj.noun)) {
    Vec3 hs = nominal_half_extent(subj.size(), subj.noun);
    Vec3 ho = nominal_half_extent(obj.size(), obj.noun);
    inside_ok = (hs.array() < ho.array()).all() && hs.prod() <= 0.1 * ho.prod();
  }
  int pool = inside_ok ? 9 : 8;
  int pick = rng.uniform_int(0, pool - 1);
  if (pick == 8) return RelationKind::Inside;
  return axis_relations()[pick];
}

Utterance generate_utterance(const GenConfig& cfg, Rng& rng) {
  if (cfg.n_objects_min < 1 || cfg.n_objects_max < cfg.n_objects_min)
    throw std::invalid_argument("bad n_objects range");
  int n = rng.uniform_int(cfg.n_objects_min, cfg.n_objects_max);
  SceneGraph g;
  g.nodes = sample_distinct_phrases(n, rng);

  if (n >= 2) {
    auto rel = [&](int s, int o) { return sample_relation(g.nodes[s], g.nodes[o], rng); };
    if (!cfg.allow_repeat_mentions) {
      // Star from node 0; every phrase appears exactly once.
      for (int i = 1; i < n; ++i) g.edges.push_back({0, rel(0, i), i});
    } else {
      int k_lo = n - 1;
      int k_hi = std::max(k_lo, cfg.n_constraints_max);
      int k = rng.uniform_int(k_lo, k_hi);
      g.edges.push_back({0, rel(0, 1), 1});
      for (int m = 2; m < n; ++m) {
        int anchor = static_cast<int>(rng.index(static_cast<std::size_t>(m)));
        if (rng.uniform() < 0.5)
          g.edges.push_back({anchor, rel(anchor, m), m});
        else
          g.edges.push_back({m, rel(m, anchor), anchor});
      }
      for (int e = n - 1; e < k; ++e) {
        for (int attempt = 0; attempt < 32; ++attempt) {
          int i = rng.uniform_int(0, n - 1);
          int j = rng.uniform_int(0, n - 2);
          if (j >= i) ++j;
          SceneEdge cand{i, rel(i, j), j};
          bool dup = std::any_of(g.edges.begin(), g.edges.end(),
                                 [&](const SceneEdge& x) { return x == cand; });
          if (!dup) {
            g.edges.push_back(cand);
            break;
          }
        }
      }
    }
  }
  return {pretty_print(g), std::move(g)};
}

std::vector<ContradictionItem> make_contradiction_set(int n, Rng& rng) {
  if (n <= 0 || n % 2 != 0) throw std::invalid_argument("set size must be even and positive");

  auto axis_rel = [&](Rng& r) { return axis_relations()[r.index(8)]; };

  // A relation contradicting `r` on exactly one of its constrained axes.
  auto conflicting = [&](RelationKind r, Rng& rr) -> RelationKind {
    auto s = relation_axis_signs(r);
    std::vector<RelationKind> out;
    for (RelationKind c : axis_relations()) {
      auto cs = relation_axis_signs(c);
      bool conflict = false, compatible = true;
      for (int ax : {0, 2}) {
        if (s[ax] != 0 && cs[ax] != 0 && cs[ax] != s[ax]) conflict = true;
      }
      (void)compatible;
      if (conflict) out.push_back(c);
    }
    return out[rr.index(out.size())];
  };

  std::vector<ContradictionItem> items;
  int half = n / 2;
  for (int i = 0; i < half; ++i) {
    SceneGraph g;
    int variant = i % 3;
    if (variant == 0) {
      g.nodes = sample_distinct_phrases(2, rng);
      g.edges = {{0, axis_rel(rng), 1}};
    } else if (variant == 1) {
      RelationKind r = axis_rel(rng);
      g.nodes = sample_distinct_phrases(3, rng);
      g.edges = {{0, r, 1}, {1, r, 2}, {0, r, 2}};
    } else {
      RelationKind r = axis_rel(rng);
      // Chain closed on a free axis: always satisfiable.
      auto s = relation_axis_signs(r);
      RelationKind ortho = (s[0] == 0) ? (rng.uniform() < 0.5 ? RelationKind::LeftOf : RelationKind::RightOf)
                                       : (rng.uniform() < 0.5 ? RelationKind::Behind : RelationKind::InFrontOf);
      g.nodes = sample_distinct_phrases(3, rng);
      g.edges = {{0, r, 1}, {1, r, 2}, {0, ortho, 2}};
      if (s[0] != 0 && s[2] != 0) g.edges.pop_back();  // composite chain: leave open
    }
    items.push_back({pretty_print(g), true});
  }
  for (int i = 0; i < half; ++i) {
    SceneGraph g;
    int variant = i % 3;
    if (variant == 0) {
      RelationKind r = axis_rel(rng);
      g.nodes = sample_distinct_phrases(2, rng);
      g.edges = {{0, r, 1}, {0, conflicting(r, rng), 1}};
    } else if (variant == 1) {
      RelationKind r = axis_rel(rng);
      g.nodes = sample_distinct_phrases(3, rng);
      g.edges = {{0, r, 1}, {1, r, 2}, {0, conflicting(r, rng), 2}};
    } else {
      RelationKind r = axis_rel(rng);
      g.nodes = sample_distinct_phrases(3, rng);
      g.edges = {{0, r, 1}, {1, r, 2}, {2, r, 0}};
    }
    items.push_back({pretty_print(g), false});
  }
  for (std::size_t i = items.size(); i > 1; --i)
    std::swap(items[i - 1], items[rng.index(i)]);
  return items;
}

// ---------------------------------------------------------------------------

namespace {

constexpr int kGridN = 9;
constexpr double kGridLo = -2.0, kGridHi = 2.0;

double grid_value(int i) { return kGridLo + (kGridHi - kGridLo) * i / (kGridN - 1); }

struct GridSearch {
  const SceneGraph& g;
  double margin;
  std::vector<Vec3> half;
  std::vector<int> order;                 // node placement order
  std::vector<std::vector<int>> edges_at; // edge indices checkable at order position
  std::vector<Vec3> pos;                  // by node id
  std::vector<bool> placed;

  explicit GridSearch(const SceneGraph& graph, double m) : g(graph), margin(m) {
    int n = static_cast<int>(g.nodes.size());
    half.resize(n);
    for (int i = 0; i < n; ++i)
      half[i] = nominal_half_extent(g.nodes[i].size(), g.nodes[i].noun);
    // BFS from node 0 so each placed node connects to earlier ones when possible.
    std::vector<bool> seen(n, false);
    std::vector<int> queue{0};
    seen[0] = true;
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
      int u = queue[qi];
      order.push_back(u);
      for (const auto& e : g.edges) {
        int v = e.subject == u ? e.object : (e.object == u ? e.subject : -1);
        if (v >= 0 && !seen[v]) {
          seen[v] = true;
          queue.push_back(v);
        }
      }
    }
    for (int i = 0; i < n; ++i)
      if (!seen[i]) order.push_back(i);
    edges_at.resize(n);
    std::vector<int> rank(n);
    for (int k = 0; k < n; ++k) rank[order[k]] = k;
    for (std::size_t ei = 0; ei < g.edges.size(); ++ei) {
      const auto& e = g.edges[ei];
      edges_at[std::max(rank[e.subject], rank[e.object])].push_back(static_cast<int>(ei));
    }
    pos.assign(n, Vec3::Zero());
    placed.assign(n, false);
  }

  // Single-axis feasibility of edge `e` given the new node's coordinate on `ax`.
  bool axis_ok(const SceneEdge& e, int node, int ax, double coord) const {
    int other = (e.subject == node) ? e.object : e.subject;
    double s = (e.subject == node) ? coord : pos[e.subject][ax];
    double o = (e.object == node) ? coord : pos[e.object][ax];
    if (e.relation == RelationKind::Inside) {
      return std::abs(s - o) + half[e.subject][ax] <= half[e.object][ax] + 1e-9;
    }
    (void)other;
    int sign = relation_axis_signs(e.relation)[ax];
    if (sign == 0) return true;
    double d = s - o;
    return sign > 0 ? d >= margin : -d >= margin;
  }

  bool search(int k) {
    int n = static_cast<int>(g.nodes.size());
    if (k == n) return true;
    int node = order[k];
    const auto& check = edges_at[k];
    for (int zi = 0; zi < kGridN; ++zi) {
      double z = grid_value(zi);
      bool ok = true;
      for (int ei : check)
        if (!axis_ok(g.edges[ei], node, 2, z)) {
          ok = false;
          break;
        }
      if (!ok) continue;
      for (int yi = 0; yi < kGridN; ++yi) {
        double y = grid_value(yi);
        bool oky = true;
        for (int ei : check)
          if (!axis_ok(g.edges[ei], node, 1, y)) {
            oky = false;
            break;
          }
        if (!oky) continue;
        for (int xi = 0; xi < kGridN; ++xi) {
          double x = grid_value(xi);
          bool okx = true;
          for (int ei : check)
            if (!axis_ok(g.edges[ei], node, 0, x)) {
              okx = false;
              break;
            }
          if (!okx) continue;
          Box3D nb{{x, y, z}, half[node]};
          bool iou_ok = true;
          for (int j = 0; j < n; ++j) {
            if (!placed[j]) continue;
            if (iou3d(nb, Box3D{pos[j], half[j]}) > 0.1) {
              iou_ok = false;
              break;
            }
          }
          if (!iou_ok) continue;
          pos[node] = {x, y, z};
          placed[node] = true;
          if (search(k + 1)) return true;
          placed[node] = false;
        }
      }
    }
    return false;
  }
};

}  // namespace

bool grid_satisfiable(const SceneGraph& g, double margin) {
  GridSearch s(g, margin);
  return s.search(0);
}

}  // namespace voxlang
