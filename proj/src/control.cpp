#include "voxlang/control.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

namespace voxlang {

PlacementState step_dynamics(const PlacementState& s, const Vec4& u, const SimParams& p,
                             int* clipped) {
  Vec4 uc = u;
  for (int i = 0; i < kActionDim; ++i) {
    double v = std::clamp(u[i], -p.action_limit, p.action_limit);
    if (v != u[i] && clipped) ++*clipped;
    uc[i] = v;
  }
  PlacementState n = s;
  n.x.segment<3>(3) += uc.head<3>();
  n.x[6] += uc[3];
  if (s.grasped) {
    n.x.segment<3>(0) = n.x.segment<3>(3) - kGraspOffset;
    Vec3 obj = n.x.segment<3>(0);
    double horiz = std::hypot(obj.x() - p.goal_obj.x(), obj.z() - p.goal_obj.z());
    if (horiz <= p.release_xz && obj.y() - p.goal_obj.y() <= p.drop_height) {
      n.grasped = false;
      n.x[1] = p.obj_half.y();  // settle on the table plane
    }
  }
  return n;
}

double cost(const PlacementState& s, const GoalSpec& g) {
  return (s.x - g.x_goal).squaredNorm();
}

namespace {

double trajectory_cost(const std::vector<Vec7>& xs, const std::vector<Vec4>& us, const Vec7& goal,
                       double u_cost) {
  double c = 0.0;
  for (std::size_t t = 0; t < us.size(); ++t)
    c += (xs[t] - goal).squaredNorm() + u_cost * us[t].squaredNorm();
  c += (xs.back() - goal).squaredNorm();
  return c;
}

}  // namespace

IlqrResult ilqr_solve(const Vec7& x0, const GoalSpec& goal, int horizon,
                      const DynamicsFn& dynamics, const IlqrConfig& cfg) {
  if (horizon < 1) throw std::invalid_argument("horizon must be positive");
  const int T = horizon;
  const Vec7& g = goal.x_goal;

  IlqrResult r;
  r.us.assign(static_cast<std::size_t>(T), Vec4::Zero());
  r.xs.assign(static_cast<std::size_t>(T) + 1, x0);
  for (int t = 0; t < T; ++t)
    r.xs[static_cast<std::size_t>(t) + 1] =
        dynamics(r.xs[static_cast<std::size_t>(t)], r.us[static_cast<std::size_t>(t)], t);
  r.cost = trajectory_cost(r.xs, r.us, g, cfg.u_cost);
  r.cost_trace.push_back(r.cost);

  r.K.assign(static_cast<std::size_t>(T), Mat47::Zero());
  r.k.assign(static_cast<std::size_t>(T), Vec4::Zero());
  r.Sigma.assign(static_cast<std::size_t>(T), Mat44::Identity());

  std::vector<Mat77> A(static_cast<std::size_t>(T));
  std::vector<Mat74> B(static_cast<std::size_t>(T));
  // Gains land here first and reach the result only when a forward pass
  // accepts them; failed regularization climbs must not clobber the gains
  // of the last accepted step.
  std::vector<Mat47> K_try(static_cast<std::size_t>(T));
  std::vector<Vec4> k_try(static_cast<std::size_t>(T));
  std::vector<Mat44> S_try(static_cast<std::size_t>(T));
  double reg = 0.0;

  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    // Linearize around the nominal trajectory.
    for (int t = 0; t < T; ++t) {
      const Vec7& x = r.xs[static_cast<std::size_t>(t)];
      const Vec4& u = r.us[static_cast<std::size_t>(t)];
      for (int i = 0; i < kStateDim; ++i) {
        Vec7 xp = x, xm = x;
        xp[i] += cfg.fd_h;
        xm[i] -= cfg.fd_h;
        A[static_cast<std::size_t>(t)].col(i) =
            (dynamics(xp, u, t) - dynamics(xm, u, t)) / (2.0 * cfg.fd_h);
      }
      for (int i = 0; i < kActionDim; ++i) {
        Vec4 up = u, um = u;
        up[i] += cfg.fd_h;
        um[i] -= cfg.fd_h;
        B[static_cast<std::size_t>(t)].col(i) =
            (dynamics(x, up, t) - dynamics(x, um, t)) / (2.0 * cfg.fd_h);
      }
    }

    // Backward pass; climb the regularization ladder until Quu factorizes.
    bool backward_ok = false;
    while (!backward_ok) {
      backward_ok = true;
      Vec7 Vx = 2.0 * (r.xs[static_cast<std::size_t>(T)] - g);
      Mat77 Vxx = 2.0 * Mat77::Identity();
      for (int t = T - 1; t >= 0 && backward_ok; --t) {
        const Mat77& At = A[static_cast<std::size_t>(t)];
        const Mat74& Bt = B[static_cast<std::size_t>(t)];
        Vec7 cx = 2.0 * (r.xs[static_cast<std::size_t>(t)] - g);
        Vec4 cu = 2.0 * cfg.u_cost * r.us[static_cast<std::size_t>(t)];
        Vec7 Qx = cx + At.transpose() * Vx;
        Vec4 Qu = cu + Bt.transpose() * Vx;
        Mat77 Qxx = 2.0 * Mat77::Identity() + At.transpose() * Vxx * At;
        Mat44 Quu = 2.0 * cfg.u_cost * Mat44::Identity() + Bt.transpose() * Vxx * Bt;
        Mat47 Qux = Bt.transpose() * Vxx * At;
        Mat44 Quu_reg = Quu + reg * Mat44::Identity();
        Eigen::LLT<Mat44> llt(Quu_reg);
        if (llt.info() != Eigen::Success) {
          backward_ok = false;
          break;
        }
        Vec4 kt = -llt.solve(Qu);
        Mat47 Kt = -llt.solve(Qux);
        k_try[static_cast<std::size_t>(t)] = kt;
        K_try[static_cast<std::size_t>(t)] = Kt;
        S_try[static_cast<std::size_t>(t)] = llt.solve(Mat44::Identity());
        Vx = Qx + Kt.transpose() * Quu * kt + Kt.transpose() * Qu + Qux.transpose() * kt;
        Vxx = Qxx + Kt.transpose() * Quu * Kt + Kt.transpose() * Qux + Qux.transpose() * Kt;
        Vxx = 0.5 * (Vxx + Vxx.transpose()).eval();
      }
      if (!backward_ok) {
        reg = (reg == 0.0) ? 1e-6 : reg * 10.0;
        if (reg > cfg.reg_cap)
          throw RiccatiError("backward pass failed at regularization cap");
      }
    }

    // Forward pass with backtracking.
    bool accepted = false;
    double new_cost = r.cost;
    std::vector<Vec7> xs_new(static_cast<std::size_t>(T) + 1);
    std::vector<Vec4> us_new(static_cast<std::size_t>(T));
    for (double alpha = 1.0; alpha >= 1.0 / 64.0 - 1e-12; alpha *= 0.5) {
      xs_new[0] = x0;
      for (int t = 0; t < T; ++t) {
        us_new[static_cast<std::size_t>(t)] =
            r.us[static_cast<std::size_t>(t)] + alpha * k_try[static_cast<std::size_t>(t)] +
            K_try[static_cast<std::size_t>(t)] *
                (xs_new[static_cast<std::size_t>(t)] - r.xs[static_cast<std::size_t>(t)]);
        xs_new[static_cast<std::size_t>(t) + 1] =
            dynamics(xs_new[static_cast<std::size_t>(t)], us_new[static_cast<std::size_t>(t)], t);
      }
      double c = trajectory_cost(xs_new, us_new, g, cfg.u_cost);
      if (std::isfinite(c) && c < r.cost) {
        new_cost = c;
        accepted = true;
        break;
      }
    }

    if (!accepted) {
      reg = (reg == 0.0) ? 1e-6 : reg * 10.0;
      if (reg > cfg.reg_cap) break;  // converged as far as regularization allows
      continue;
    }

    double improvement = r.cost - new_cost;
    r.xs = xs_new;
    r.us = us_new;
    r.K = K_try;
    r.k = k_try;
    r.Sigma = S_try;
    r.cost = new_cost;
    r.cost_trace.push_back(new_cost);
    ++r.iterations;
    reg = (reg <= 1e-6) ? 0.0 : reg / 10.0;
    if (improvement < cfg.tol) break;
  }
  return r;
}

DynamicsFn LinearDynamics::as_fn() const {
  return [this](const Vec7& x, const Vec4& u, int t) -> Vec7 {
    std::size_t s = std::min(static_cast<std::size_t>(t), A.size() - 1);
    return A[s] * x + B[s] * u + c[s];
  };
}

LinearDynamics fit_linear_dynamics(const std::vector<Rollout>& rollouts) {
  const int kCols = kStateDim + kActionDim + 1;
  if (rollouts.size() < static_cast<std::size_t>(kCols))
    throw RankDeficientError("need at least dim(x)+dim(u)+1 rollouts");
  std::size_t T = rollouts.front().us.size();
  for (const Rollout& r : rollouts)
    if (r.us.size() != T || r.xs.size() != T + 1)
      throw std::invalid_argument("rollouts must share the horizon");

  LinearDynamics out;
  out.A.resize(T);
  out.B.resize(T);
  out.c.resize(T);
  out.residual_rms.resize(T);
  const std::size_t N = rollouts.size();
  Eigen::MatrixXd M(N, kCols);
  Eigen::MatrixXd Y(N, kStateDim);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < N; ++i) {
      M.block<1, 7>(static_cast<Eigen::Index>(i), 0) = rollouts[i].xs[t].transpose();
      M.block<1, 4>(static_cast<Eigen::Index>(i), 7) = rollouts[i].us[t].transpose();
      M(static_cast<Eigen::Index>(i), 11) = 1.0;
      Y.row(static_cast<Eigen::Index>(i)) = rollouts[i].xs[t + 1].transpose();
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Eigen::MatrixXd theta = svd.solve(Y);  // kCols x 7, minimum norm
    out.A[t] = theta.topRows<7>().transpose();
    out.B[t] = theta.middleRows<4>(7).transpose();
    out.c[t] = theta.row(11).transpose();
    out.residual_rms[t] = std::sqrt((M * theta - Y).squaredNorm() /
                                    static_cast<double>(N * kStateDim));
  }
  return out;
}

FollowResult follow_instruction(const std::string& utterance, const VoxelGrid& grid,
                                const UnaryModel& unary, const PairwiseClassifier& pairwise,
                                const WhereModel& where, Rng& rng, bool fit_dynamics) {
  PlacementCommand cmd = parse_command(utterance);

  // Joint resolution keeps the two phrases on distinct proposals.
  SceneGraph ref;
  ref.nodes = {cmd.manipulandum, cmd.anchor};
  DetectionResult det = resolve_referent(ref, grid, unary, pairwise);
  FollowResult out;
  out.manipulandum = det.proposals[static_cast<std::size_t>(det.assignment[0])];
  out.anchor = det.proposals[static_cast<std::size_t>(det.assignment[1])];

  Vec3 goal_obj;
  if (cmd.relation == RelationKind::Inside) {
    auto off = where.sample_inside_offset(out.manipulandum.half_extent, out.anchor.half_extent, rng);
    if (!off) throw GeometryError("object does not fit inside the anchor");
    goal_obj = out.anchor.center + *off;
  } else {
    goal_obj = out.anchor.center + where.sample_offset(cmd.relation, rng);
  }

  GoalSpec goal;
  goal.x_goal.segment<3>(0) = goal_obj;
  goal.x_goal.segment<3>(3) = goal_obj + kGraspOffset;
  goal.x_goal[6] = 0.0;
  out.goal = goal.x_goal;

  SimParams sim;
  sim.goal_obj = goal_obj;
  sim.obj_half = out.manipulandum.half_extent;

  PlacementState x0;
  x0.x.segment<3>(0) = out.manipulandum.center;
  x0.x.segment<3>(3) = out.manipulandum.center + kGraspOffset;
  x0.x[6] = 0.0;
  x0.grasped = true;

  // The planner sees pure grasped kinematics; clipping and release live in
  // the execution simulator, where feedback absorbs the mismatch.
  DynamicsFn plan_dyn;
  LinearDynamics fitted;
  if (fit_dynamics) {
    std::vector<Rollout> rollouts(20);
    for (Rollout& ro : rollouts) {
      PlacementState s = x0;
      ro.xs.push_back(s.x);
      for (int t = 0; t < kHorizon; ++t) {
        Vec4 u;
        for (int i = 0; i < kActionDim; ++i) u[i] = rng.uniform(-0.1, 0.1);
        s = step_dynamics(s, u, sim);
        ro.us.push_back(u);
        ro.xs.push_back(s.x);
      }
    }
    fitted = fit_linear_dynamics(rollouts);
    plan_dyn = fitted.as_fn();
  } else {
    plan_dyn = [](const Vec7& x, const Vec4& u, int) -> Vec7 {
      Vec7 n = x;
      n.segment<3>(3) += u.head<3>();
      n[6] += u[3];
      n.segment<3>(0) = n.segment<3>(3) - kGraspOffset;
      return n;
    };
  }

  IlqrResult plan = ilqr_solve(x0.x, goal, kHorizon, plan_dyn);
  out.iterations = plan.iterations;

  PlacementState s = x0;
  out.xs.push_back(s.x);
  for (int t = 0; t < kHorizon; ++t) {
    Vec4 u = plan.us[static_cast<std::size_t>(t)] +
             plan.K[static_cast<std::size_t>(t)] * (s.x - plan.xs[static_cast<std::size_t>(t)]);
    bool was_grasped = s.grasped;
    s = step_dynamics(s, u, sim, &out.clipped_actions);
    if (was_grasped && !s.grasped && out.release_step < 0) out.release_step = t;
    out.us.push_back(u);
    out.xs.push_back(s.x);
    out.costs.push_back(cost(s, goal));
  }
  out.final_cost = cost(s, goal);

  Box3D final_box{s.obj(), out.manipulandum.half_extent};
  out.success = relation_oracle(cmd.relation, final_box, out.anchor, kRelationMargin);
  return out;
}

}  // namespace voxlang
