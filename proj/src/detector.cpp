#include "voxlang/detector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace voxlang {

namespace {

struct Component {
  std::vector<int> voxels;  // flat indices x + w*(y + h*z)
  int lo[3], hi[3];         // inclusive voxel index bounds
};

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

Box3D voxel_extent_box(const VoxelGrid& grid, const int lo[3], const int hi[3]) {
  Vec3 p = grid.pitch();
  Vec3 gmin = grid.extent.min();
  Vec3 bmin(gmin.x() + lo[0] * p.x(), gmin.y() + lo[1] * p.y(), gmin.z() + lo[2] * p.z());
  Vec3 bmax(gmin.x() + (hi[0] + 1) * p.x(), gmin.y() + (hi[1] + 1) * p.y(),
            gmin.z() + (hi[2] + 1) * p.z());
  return Box3D{0.5 * (bmin + bmax), 0.5 * (bmax - bmin)};
}

// Best two-box split of a component along its longest axis. Returns true and
// fills the children when the split clears kSplitGain and both children keep
// at least 4 voxels.
bool try_split(const VoxelGrid& grid, const Component& comp, Component& a, Component& b) {
  int axis = 0;
  int dim = comp.hi[0] - comp.lo[0] + 1;
  for (int ax = 1; ax < 3; ++ax) {
    int d = comp.hi[ax] - comp.lo[ax] + 1;
    if (d > dim) { dim = d; axis = ax; }
  }
  if (dim < 2) return false;

  // Per-slice counts and cross-section bounds along the split axis.
  const int u = (axis == 0) ? 1 : 0;   // first cross axis
  const int v = (axis == 2) ? 1 : 2;   // second cross axis
  std::vector<int> count(static_cast<std::size_t>(dim), 0);
  std::vector<int> ulo(static_cast<std::size_t>(dim), std::numeric_limits<int>::max());
  std::vector<int> uhi(static_cast<std::size_t>(dim), std::numeric_limits<int>::min());
  std::vector<int> vlo = ulo, vhi = uhi;
  for (int flat : comp.voxels) {
    int xyz[3];
    xyz[0] = flat % grid.w;
    xyz[1] = (flat / grid.w) % grid.h;
    xyz[2] = flat / (grid.w * grid.h);
    std::size_t s = static_cast<std::size_t>(xyz[axis] - comp.lo[axis]);
    ++count[s];
    ulo[s] = std::min(ulo[s], xyz[u]);
    uhi[s] = std::max(uhi[s], xyz[u]);
    vlo[s] = std::min(vlo[s], xyz[v]);
    vhi[s] = std::max(vhi[s], xyz[v]);
  }

  // Prefix/suffix aggregates over slices.
  auto agg = [&](bool forward) {
    struct Row { long n; int ul, uh, vl, vh; };
    std::vector<Row> rows(static_cast<std::size_t>(dim));
    long n = 0;
    int aul = std::numeric_limits<int>::max(), auh = std::numeric_limits<int>::min();
    int avl = aul, avh = auh;
    for (int k = 0; k < dim; ++k) {
      std::size_t s = static_cast<std::size_t>(forward ? k : dim - 1 - k);
      n += count[s];
      if (count[s] > 0) {
        aul = std::min(aul, ulo[s]);
        auh = std::max(auh, uhi[s]);
        avl = std::min(avl, vlo[s]);
        avh = std::max(avh, vhi[s]);
      }
      rows[s] = Row{n, aul, auh, avl, avh};
    }
    return rows;
  };
  auto pre = agg(true);
  auto suf = agg(false);

  double parent_vol = static_cast<double>(dim) * (comp.hi[u] - comp.lo[u] + 1) *
                      (comp.hi[v] - comp.lo[v] + 1);
  double best = std::numeric_limits<double>::infinity();
  int best_cut = -1;  // child a = slices [0, cut], child b = [cut+1, dim-1]
  for (int cut = 0; cut + 1 < dim; ++cut) {
    const auto& l = pre[static_cast<std::size_t>(cut)];
    const auto& r = suf[static_cast<std::size_t>(cut + 1)];
    if (l.n < 4 || r.n < 4) continue;
    double vol_l = static_cast<double>(cut + 1) * (l.uh - l.ul + 1) * (l.vh - l.vl + 1);
    double vol_r = static_cast<double>(dim - 1 - cut) * (r.uh - r.ul + 1) * (r.vh - r.vl + 1);
    if (vol_l + vol_r < best) {
      best = vol_l + vol_r;
      best_cut = cut;
    }
  }
  if (best_cut < 0 || parent_vol <= kSplitGain * best) return false;

  a = Component{};
  b = Component{};
  for (int i = 0; i < 3; ++i) {
    a.lo[i] = std::numeric_limits<int>::max();
    a.hi[i] = std::numeric_limits<int>::min();
    b.lo[i] = a.lo[i];
    b.hi[i] = a.hi[i];
  }
  for (int flat : comp.voxels) {
    int xyz[3];
    xyz[0] = flat % grid.w;
    xyz[1] = (flat / grid.w) % grid.h;
    xyz[2] = flat / (grid.w * grid.h);
    Component& dst = (xyz[axis] - comp.lo[axis] <= best_cut) ? a : b;
    dst.voxels.push_back(flat);
    for (int i = 0; i < 3; ++i) {
      dst.lo[i] = std::min(dst.lo[i], xyz[i]);
      dst.hi[i] = std::max(dst.hi[i], xyz[i]);
    }
  }
  return true;
}

}  // namespace

std::vector<Box3D> propose_boxes(const VoxelGrid& grid) {
  const int w = grid.w, h = grid.h, d = grid.d;
  const std::size_t n = static_cast<std::size_t>(w) * h * d;
  std::vector<char> occ(n, 0), seen(n, 0);
  for (int z = 0; z < d; ++z)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        occ[static_cast<std::size_t>(x + w * (y + static_cast<std::size_t>(h) * z))] =
            grid.at(x, y, z, kChanOccupancy) > 0.5f;

  std::vector<Box3D> out;
  std::vector<int> stack;
  for (std::size_t start = 0; start < n; ++start) {
    if (!occ[start] || seen[start]) continue;
    Component comp;
    for (int i = 0; i < 3; ++i) {
      comp.lo[i] = std::numeric_limits<int>::max();
      comp.hi[i] = std::numeric_limits<int>::min();
    }
    stack.assign(1, static_cast<int>(start));
    seen[start] = 1;
    while (!stack.empty()) {
      int flat = stack.back();
      stack.pop_back();
      comp.voxels.push_back(flat);
      int x = flat % w, y = (flat / w) % h, z = flat / (w * h);
      int xyz[3] = {x, y, z};
      for (int i = 0; i < 3; ++i) {
        comp.lo[i] = std::min(comp.lo[i], xyz[i]);
        comp.hi[i] = std::max(comp.hi[i], xyz[i]);
      }
      for (int dz = -1; dz <= 1; ++dz)
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0 && dz == 0) continue;
            int nx = x + dx, ny = y + dy, nz = z + dz;
            if (nx < 0 || nx >= w || ny < 0 || ny >= h || nz < 0 || nz >= d) continue;
            std::size_t nf = static_cast<std::size_t>(nx + w * (ny + static_cast<std::size_t>(h) * nz));
            if (!occ[nf] || seen[nf]) continue;
            seen[nf] = 1;
            stack.push_back(static_cast<int>(nf));
          }
    }
    if (comp.voxels.size() < 4) continue;
    Component a, b;
    if (try_split(grid, comp, a, b)) {
      out.push_back(voxel_extent_box(grid, a.lo, a.hi));
      out.push_back(voxel_extent_box(grid, b.lo, b.hi));
    } else {
      out.push_back(voxel_extent_box(grid, comp.lo, comp.hi));
    }
  }
  return out;
}

VecC channel_means(const VoxelGrid& grid) {
  VecC m = VecC::Zero();
  const std::size_t cells = grid.data.size() / static_cast<std::size_t>(grid.c);
  for (std::size_t j = 0; j < grid.data.size(); ++j)
    m[static_cast<int>(j % static_cast<std::size_t>(grid.c))] += grid.data[j];
  return m / static_cast<double>(cells);
}

UnaryModel UnaryModel::initial() {
  UnaryModel m;
  auto add = [&](const std::vector<std::string>& toks) {
    for (const auto& t : toks) m.templates.emplace(t, VecC::Ones());
  };
  add(size_tokens());
  add(color_tokens());
  add(material_tokens());
  add(shape_tokens());
  return m;
}

VecC phrase_template(const UnaryModel& m, const NounPhrase& p) {
  auto lookup = [&](const std::string& tok) -> const VecC& {
    auto it = m.templates.find(tok);
    if (it == m.templates.end()) throw UnknownTokenError(tok);
    return it->second;
  };
  VecC agg = lookup(p.noun);
  for (const auto& adj : p.adjectives) agg = agg.cwiseProduct(lookup(adj));
  return agg;
}

double unary_score(const UnaryModel& m, const NounPhrase& p, const ObjectTensor& t) {
  return sigmoid(phrase_template(m, p).dot(channel_means(t.grid)) + m.bias);
}

Vec7 pairwise_features(const Box3D& a, const Box3D& b) {
  Vec7 f;
  f.segment<3>(0) = a.center - b.center;
  f.segment<3>(3) = a.half_extent - b.half_extent;
  f[6] = iou3d(a, b);
  return f;
}

double pairwise_score(const PairwiseClassifier& c, RelationKind rel, const Box3D& a,
                      const Box3D& b) {
  const Vec8& w = c.weights[static_cast<std::size_t>(rel)];
  return sigmoid(w.head<7>().dot(pairwise_features(a, b)) + w[7]);
}

DetectionResult resolve_referent(const SceneGraph& g, const VoxelGrid& grid,
                                 const std::vector<Box3D>& proposals, const UnaryModel& unary,
                                 const PairwiseClassifier& pairwise, double threshold) {
  validate(g);
  const int n_nodes = static_cast<int>(g.nodes.size());
  const int n_props = static_cast<int>(proposals.size());

  // Unary scores per (node, proposal); crops shared across nodes.
  std::vector<ObjectTensor> crops;
  crops.reserve(static_cast<std::size_t>(n_props));
  for (const Box3D& box : proposals) crops.push_back(crop_and_resize(grid, box));
  std::vector<std::vector<double>> uscore(static_cast<std::size_t>(n_nodes));
  std::vector<std::vector<int>> candidates(static_cast<std::size_t>(n_nodes));
  for (int i = 0; i < n_nodes; ++i) {
    uscore[static_cast<std::size_t>(i)].resize(static_cast<std::size_t>(n_props));
    for (int j = 0; j < n_props; ++j) {
      double s = unary_score(unary, g.nodes[static_cast<std::size_t>(i)],
                             crops[static_cast<std::size_t>(j)]);
      uscore[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = s;
      if (s > threshold) candidates[static_cast<std::size_t>(i)].push_back(j);
    }
    if (candidates[static_cast<std::size_t>(i)].empty()) throw NoCandidateError(i);
  }

  std::vector<int> current(static_cast<std::size_t>(n_nodes), -1);
  std::vector<char> used(static_cast<std::size_t>(n_props), 0);
  std::vector<int> best_assign;
  double best_score = -1.0;

  // Ascending candidate order plus strict improvement keeps the
  // lexicographically smallest assignment among ties.
  auto dfs = [&](auto&& self, int node, double score) -> void {
    if (node == n_nodes) {
      for (const SceneEdge& e : g.edges)
        score *= pairwise_score(pairwise, e.relation,
                                proposals[static_cast<std::size_t>(
                                    current[static_cast<std::size_t>(e.subject)])],
                                proposals[static_cast<std::size_t>(
                                    current[static_cast<std::size_t>(e.object)])]);
      if (score > best_score) {
        best_score = score;
        best_assign = current;
      }
      return;
    }
    for (int j : candidates[static_cast<std::size_t>(node)]) {
      if (used[static_cast<std::size_t>(j)]) continue;
      used[static_cast<std::size_t>(j)] = 1;
      current[static_cast<std::size_t>(node)] = j;
      self(self, node + 1, score * uscore[static_cast<std::size_t>(node)][static_cast<std::size_t>(j)]);
      used[static_cast<std::size_t>(j)] = 0;
    }
  };
  dfs(dfs, 0, 1.0);
  if (best_assign.empty()) throw NoCandidateError(n_nodes - 1);  // more nodes than proposals

  DetectionResult r;
  r.assignment = best_assign;
  r.proposals = proposals;
  r.referent = proposals[static_cast<std::size_t>(best_assign[0])];
  r.score = best_score;
  for (int i = 0; i < n_nodes; ++i)
    r.unary_scores.push_back(
        uscore[static_cast<std::size_t>(i)][static_cast<std::size_t>(best_assign[static_cast<std::size_t>(i)])]);
  for (const SceneEdge& e : g.edges)
    r.pairwise_scores.push_back(pairwise_score(
        pairwise, e.relation,
        proposals[static_cast<std::size_t>(best_assign[static_cast<std::size_t>(e.subject)])],
        proposals[static_cast<std::size_t>(best_assign[static_cast<std::size_t>(e.object)])]));
  return r;
}

DetectionResult resolve_referent(const SceneGraph& g, const VoxelGrid& grid,
                                 const UnaryModel& unary, const PairwiseClassifier& pairwise,
                                 double threshold) {
  return resolve_referent(g, grid, propose_boxes(grid), unary, pairwise, threshold);
}

}  // namespace voxlang
