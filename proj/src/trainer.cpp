#include "voxlang/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace voxlang {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// -log p(y | z) in the overflow-safe max/log1p form.
double bce(double z, int y) {
  return std::max(z, 0.0) - z * static_cast<double>(y) + std::log1p(std::exp(-std::abs(z)));
}

std::vector<std::string> phrase_tokens(const NounPhrase& p) {
  std::vector<std::string> toks = p.adjectives;
  toks.push_back(p.noun);
  return toks;
}

struct UnaryGrads {
  std::map<std::string, VecC> templates;
  double bias = 0.0;

  VecC& slot(const std::string& tok) {
    return templates.try_emplace(tok, VecC::Zero()).first->second;
  }
};

// Mean BCE over the batch plus l2 * sum of squared template entries (bias
// exempt). Gradients, when requested, cover every model parameter.
double unary_batch_loss(const UnaryModel& m, const std::vector<UnaryExample>& batch, double l2,
                        UnaryGrads* g) {
  if (batch.empty()) throw std::invalid_argument("empty unary batch");
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (const auto& ex : batch) {
    auto toks = phrase_tokens(ex.phrase);
    std::vector<const VecC*> tmpl(toks.size());
    for (std::size_t i = 0; i < toks.size(); ++i) {
      auto it = m.templates.find(toks[i]);
      if (it == m.templates.end()) throw UnknownTokenError(toks[i]);
      tmpl[i] = &it->second;
    }
    VecC agg = VecC::Ones();
    for (const VecC* t : tmpl) agg = agg.cwiseProduct(*t);
    double z = agg.dot(ex.means) + m.bias;
    loss += bce(z, ex.label) * inv_n;
    if (!g) continue;
    double d = (sigmoid(z) - static_cast<double>(ex.label)) * inv_n;
    g->bias += d;
    for (std::size_t i = 0; i < toks.size(); ++i) {
      // leave-one-out product: d z / d tmpl_i = (prod of the others) * means
      VecC loo = VecC::Ones();
      for (std::size_t j = 0; j < toks.size(); ++j)
        if (j != i) loo = loo.cwiseProduct(*tmpl[j]);
      g->slot(toks[i]) += d * loo.cwiseProduct(ex.means);
    }
  }
  for (const auto& [tok, tmpl] : m.templates) {
    loss += l2 * tmpl.squaredNorm();
    if (g) g->slot(tok) += (2.0 * l2) * tmpl;
  }
  return loss;
}

struct PairGrads {
  std::array<Vec8, kNumRelations> w;
  PairGrads() {
    for (auto& v : w) v.setZero();
  }
};

double pairwise_batch_loss(const PairwiseClassifier& c, const std::vector<PairwiseExample>& batch,
                           double l2, PairGrads* g) {
  if (batch.empty()) throw std::invalid_argument("empty pairwise batch");
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (const auto& ex : batch) {
    Vec8 x;
    x.head<7>() = pairwise_features(ex.subject, ex.object);
    x[7] = 1.0;
    const Vec8& w = c.weights[static_cast<int>(ex.rel)];
    double z = w.dot(x);
    loss += bce(z, ex.label) * inv_n;
    if (g) {
      double d = (sigmoid(z) - static_cast<double>(ex.label)) * inv_n;
      g->w[static_cast<int>(ex.rel)] += d * x;
    }
  }
  for (int r = 0; r < kNumRelations; ++r) {
    loss += l2 * c.weights[r].head<7>().squaredNorm();
    if (g) g->w[r].head<7>() += (2.0 * l2) * c.weights[r].head<7>();
  }
  return loss;
}

void shuffle_indices(std::vector<std::size_t>& order, Rng rng) {
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng.index(i)]);
}

double unary_logit(const UnaryModel& m, const UnaryExample& ex) {
  return phrase_template(m, ex.phrase).dot(ex.means) + m.bias;
}

// Fraction classified correctly at the detector's decision threshold.
// Vacuously 1 on an empty set.
double unary_accuracy(const UnaryModel& m, const std::vector<UnaryExample>& xs) {
  if (xs.empty()) return 1.0;
  int ok = 0;
  for (const auto& ex : xs)
    ok += (sigmoid(unary_logit(m, ex)) > kUnaryThreshold) == (ex.label == 1);
  return static_cast<double>(ok) / static_cast<double>(xs.size());
}

double pairwise_accuracy(const PairwiseClassifier& c, const std::vector<PairwiseExample>& xs) {
  if (xs.empty()) return 1.0;
  int ok = 0;
  for (const auto& ex : xs)
    ok += (pairwise_score(c, ex.rel, ex.subject, ex.object) > 0.5) == (ex.label == 1);
  return static_cast<double>(ok) / static_cast<double>(xs.size());
}

void check_train_config(const TrainConfig& cfg) {
  if (cfg.batch <= 0 || cfg.epochs < 0 || cfg.lr < 0.0 || cfg.l2 < 0.0)
    throw std::invalid_argument("bad training config");
}

}  // namespace

TrainSet make_training_pairs(int n_scenes, const WhatModel& what, const WhereModel& where,
                             Rng& rng) {
  if (n_scenes <= 0) throw std::invalid_argument("n_scenes must be positive");
  TrainSet ts;
  const auto cams = training_cameras();
  for (int s = 0; s < n_scenes; ++s) {
    const bool heldout = (s % 5 == 4);
    auto& upool = heldout ? ts.unary_heldout : ts.unary_train;
    auto& ppool = heldout ? ts.pair_heldout : ts.pair_train;

    if (s % 9 == 8) {
      // Containment pair: a small solid in a large bowl. The contained
      // object is occluded in every view, so no unary crops come from here.
      static const std::array<const char*, 3> solids{"cube", "sphere", "cylinder"};
      for (;;) {
        std::string inner_color = color_tokens()[rng.index(color_tokens().size())];
        std::string outer_color = inner_color;
        while (outer_color == inner_color)
          outer_color = color_tokens()[rng.index(color_tokens().size())];
        NounPhrase inner{{"small", inner_color}, solids[rng.index(solids.size())]};
        NounPhrase outer{{"large", outer_color}, "bowl"};
        SceneGraph g{{inner, outer}, {{0, RelationKind::Inside, 1}}};
        ComposeOptions opt;
        opt.world_limit = 2.0;
        opt.table_rest = false;
        opt.build_canvas = false;
        auto res = compose_scene(g, what, where, rng, opt);
        if (!res.success) continue;
        const auto& boxes = res.placement.boxes;
        ppool.push_back({RelationKind::Inside, boxes[0], boxes[1], 1});
        if (relation_oracle(RelationKind::Inside, boxes[1], boxes[0]))
          throw std::logic_error("swapped containment pair still satisfies the oracle");
        ppool.push_back({RelationKind::Inside, boxes[1], boxes[0], 0});
        break;
      }
      continue;
    }

    SceneSample sc = synth_scene(what, where, rng);
    RelationKind rel = sc.graph.edges[0].relation;
    ppool.push_back({rel, sc.boxes[0], sc.boxes[1], 1});
    if (relation_oracle(rel, sc.boxes[1], sc.boxes[0]))
      throw std::logic_error("swapped pair still satisfies the oracle");
    ppool.push_back({rel, sc.boxes[1], sc.boxes[0], 0});

    if (s >= kUnaryRenderCap) continue;
    std::vector<Image> views;
    views.reserve(cams.size());
    for (const auto& cam : cams) views.push_back(render_scene(sc.boxes, sc.colors, cam));
    VoxelGrid grid = unproject(views, cams);
    const NounPhrase& np0 = sc.graph.nodes[0];
    const NounPhrase& np1 = sc.graph.nodes[1];
    const double pitch = grid.pitch().x();
    // each round crops both objects (the exact box first, then jittered
    // views of it), a wrong-object pairing, and an empty-region crop; the
    // extra rounds multiply the per-render yield, which sets how many
    // gradient steps an epoch carries
    for (int round = 0; round < kUnaryCropRounds; ++round) {
      Box3D b0 = sc.boxes[0];
      Box3D b1 = sc.boxes[1];
      if (round > 0) {
        for (Box3D* b : {&b0, &b1}) {
          for (int ax = 0; ax < 3; ++ax) b->center[ax] += rng.uniform(-0.5, 0.5) * pitch;
          b->half_extent *= rng.uniform(0.95, 1.10);
        }
      }
      VecC m0 = channel_means(crop_and_resize(grid, b0).grid);
      VecC m1 = channel_means(crop_and_resize(grid, b1).grid);
      upool.push_back({np0, m0, 1});
      upool.push_back({np1, m1, 1});
      // one negative with wrong-object appearance, one with none
      upool.push_back({np0, m1, 0});
      Vec3 half = 0.5 * what.size_of(np1);
      Box3D empty{Vec3(0, half.y(), 0), half};
      for (int tries = 0; tries < 100; ++tries) {
        empty.center = Vec3(rng.uniform(-2.0, 2.0), half.y(), rng.uniform(-2.0, 2.0));
        if (iou3d(empty, sc.boxes[0]) == 0.0 && iou3d(empty, sc.boxes[1]) == 0.0) break;
      }
      upool.push_back({np1, channel_means(crop_and_resize(grid, empty).grid), 0});
    }
  }
  return ts;
}

UnaryModel train_unary(const TrainSet& ts, const TrainConfig& cfg, std::vector<TrainLogRow>* log) {
  check_train_config(cfg);
  if (ts.unary_train.empty()) throw std::invalid_argument("no unary training examples");
  UnaryModel m = UnaryModel::initial();
  if (log) log->clear();
  std::vector<std::size_t> order(ts.unary_train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_indices(order, Rng(cfg.seed).stream("train-unary-shuffle", epoch));
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      std::size_t stop = std::min(order.size(), start + cfg.batch);
      std::vector<UnaryExample> batch;
      batch.reserve(stop - start);
      for (std::size_t i = start; i < stop; ++i) batch.push_back(ts.unary_train[order[i]]);
      UnaryGrads g;
      unary_batch_loss(m, batch, cfg.l2, &g);
      for (const auto& [tok, gv] : g.templates) m.templates.at(tok) -= cfg.lr * gv;
      m.bias -= cfg.lr * g.bias;
    }
    double train_loss = unary_batch_loss(m, ts.unary_train, cfg.l2, nullptr);
    if (!std::isfinite(train_loss)) throw DivergedError("unary training loss is not finite");
    if (log) log->push_back({epoch, train_loss, unary_accuracy(m, ts.unary_heldout)});
  }
  return m;
}

PairwiseClassifier train_pairwise(const TrainSet& ts, const TrainConfig& cfg,
                                  std::vector<TrainLogRow>* log) {
  check_train_config(cfg);
  if (ts.pair_train.empty()) throw std::invalid_argument("no pairwise training examples");
  PairwiseClassifier c;
  if (log) log->clear();
  std::vector<std::size_t> order(ts.pair_train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_indices(order, Rng(cfg.seed).stream("train-pairwise-shuffle", epoch));
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      std::size_t stop = std::min(order.size(), start + cfg.batch);
      std::vector<PairwiseExample> batch;
      batch.reserve(stop - start);
      for (std::size_t i = start; i < stop; ++i) batch.push_back(ts.pair_train[order[i]]);
      PairGrads g;
      pairwise_batch_loss(c, batch, cfg.l2, &g);
      for (int r = 0; r < kNumRelations; ++r) c.weights[r] -= cfg.lr * g.w[r];
    }
    double train_loss = pairwise_batch_loss(c, ts.pair_train, cfg.l2, nullptr);
    if (!std::isfinite(train_loss)) throw DivergedError("pairwise training loss is not finite");
    if (log) log->push_back({epoch, train_loss, pairwise_accuracy(c, ts.pair_heldout)});
  }
  return c;
}

double check_unary_gradients(const UnaryModel& m, const std::vector<UnaryExample>& batch,
                             double l2) {
  UnaryGrads g;
  unary_batch_loss(m, batch, l2, &g);
  const double h = 1e-4;
  double worst = 0.0;
  auto probe = [&](double analytic, double fp, double fm) {
    double fd = (fp - fm) / (2.0 * h);
    double err = std::abs(analytic - fd) / std::max(1e-2, std::abs(analytic) + std::abs(fd));
    worst = std::max(worst, err);
  };
  for (const auto& [tok, tmpl] : m.templates) {
    for (int ch = 0; ch < kSceneGridC; ++ch) {
      UnaryModel p = m;
      p.templates.at(tok)[ch] += h;
      UnaryModel q = m;
      q.templates.at(tok)[ch] -= h;
      probe(g.slot(tok)[ch], unary_batch_loss(p, batch, l2, nullptr),
            unary_batch_loss(q, batch, l2, nullptr));
    }
  }
  {
    UnaryModel p = m;
    p.bias += h;
    UnaryModel q = m;
    q.bias -= h;
    probe(g.bias, unary_batch_loss(p, batch, l2, nullptr),
          unary_batch_loss(q, batch, l2, nullptr));
  }
  return worst;
}

double check_pairwise_gradients(const PairwiseClassifier& c,
                                const std::vector<PairwiseExample>& batch, double l2) {
  PairGrads g;
  pairwise_batch_loss(c, batch, l2, &g);
  const double h = 1e-4;
  double worst = 0.0;
  for (int r = 0; r < kNumRelations; ++r) {
    for (int i = 0; i < 8; ++i) {
      PairwiseClassifier p = c;
      p.weights[r][i] += h;
      PairwiseClassifier q = c;
      q.weights[r][i] -= h;
      double fd =
          (pairwise_batch_loss(p, batch, l2, nullptr) - pairwise_batch_loss(q, batch, l2, nullptr)) /
          (2.0 * h);
      double a = g.w[r][i];
      double err = std::abs(a - fd) / std::max(1e-2, std::abs(a) + std::abs(fd));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace voxlang
