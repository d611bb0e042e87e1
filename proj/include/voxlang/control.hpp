#pragma once

#include <functional>

#include "voxlang/detector.hpp"
#include "voxlang/generator.hpp"

namespace voxlang {

inline constexpr int kStateDim = 7;   // object (3), end effector (3), yaw
inline constexpr int kActionDim = 4;  // end-effector delta (3), yaw delta
inline constexpr int kHorizon = 30;

using Vec4 = Eigen::Vector4d;
using Mat77 = Eigen::Matrix<double, 7, 7>;
using Mat74 = Eigen::Matrix<double, 7, 4>;
using Mat47 = Eigen::Matrix<double, 4, 7>;
using Mat44 = Eigen::Matrix<double, 4, 4>;

// The end effector grips from above: ee = object + kGraspOffset while held.
inline const Vec3 kGraspOffset{0.0, 0.25, 0.0};

struct PlacementState {
  Vec7 x = Vec7::Zero();
  bool grasped = true;

  Vec3 obj() const { return x.segment<3>(0); }
  Vec3 ee() const { return x.segment<3>(3); }
  double yaw() const { return x[6]; }
};

struct SimParams {
  Vec3 goal_obj = Vec3::Zero();  // release reference cell
  Vec3 obj_half = Vec3::Constant(0.35);
  double release_xz = 0.05;    // horizontal release radius around the goal
  double drop_height = 0.2;    // object height over the goal that permits release
  double action_limit = 0.1;   // per-axis action clip
};

// One kinematic step: the end effector integrates the (clipped) action, a
// grasped object follows underneath, and the object detaches and settles on
// the table plane once it hovers over the goal cell. `clipped` counts action
// components clipped so far when given.
PlacementState step_dynamics(const PlacementState& s, const Vec4& u, const SimParams& p,
                             int* clipped = nullptr);

struct GoalSpec {
  Vec7 x_goal = Vec7::Zero();
};

// Squared Euclidean distance over the 7-vector.
double cost(const PlacementState& s, const GoalSpec& g);

struct IlqrConfig {
  int max_iters = 100;
  double tol = 1e-8;       // stop when an accepted step improves cost less
  double fd_h = 1e-5;      // linearization step
  double u_cost = 1e-6;    // action penalty keeping Quu positive definite
  double reg_cap = 1e6;
};

using DynamicsFn = std::function<Vec7(const Vec7&, const Vec4&, int)>;

struct IlqrResult {
  std::vector<Mat47> K;       // feedback gains per timestep
  std::vector<Vec4> k;        // feedforward, folded into us after acceptance
  std::vector<Mat44> Sigma;   // Quu inverse per timestep (diagnostic)
  std::vector<Vec7> xs;       // nominal states, length T+1
  std::vector<Vec4> us;       // nominal actions, length T
  double cost = 0.0;
  int iterations = 0;
  std::vector<double> cost_trace;  // initial cost then each accepted cost
};

// Iterative LQR with finite-difference linearization, regularized backward
// Riccati recursion, and a backtracking line search over alpha in
// {1, 1/2, ..., 1/64}. Accepted costs are non-increasing; throws RiccatiError
// when the regularization ladder passes reg_cap without progress.
IlqrResult ilqr_solve(const Vec7& x0, const GoalSpec& goal, int horizon,
                      const DynamicsFn& dynamics, const IlqrConfig& cfg = {});

struct Rollout {
  std::vector<Vec7> xs;  // length T+1
  std::vector<Vec4> us;  // length T
};

struct LinearDynamics {
  std::vector<Mat77> A;
  std::vector<Mat74> B;
  std::vector<Vec7> c;
  std::vector<double> residual_rms;  // per timestep

  DynamicsFn as_fn() const;
};

// Per-timestep least squares x_{t+1} ~ A_t x_t + B_t u_t + c_t over the
// rollouts (minimum-norm solution via SVD). Throws RankDeficientError when
// fewer than dim(x)+dim(u)+1 rollouts make the regression underdetermined.
LinearDynamics fit_linear_dynamics(const std::vector<Rollout>& rollouts);

struct FollowResult {
  bool success = false;
  Box3D manipulandum;  // resolved boxes in the scene grid
  Box3D anchor;
  Vec7 goal = Vec7::Zero();
  std::vector<Vec7> xs;  // executed trajectory
  std::vector<Vec4> us;
  std::vector<double> costs;  // running cost per executed step
  int iterations = 0;
  double final_cost = 0.0;
  int release_step = -1;
  int clipped_actions = 0;
};

// Full instruction episode: parse "put NP1 REL NP2", resolve both phrases
// jointly in the grid, sample the goal offset from the spatial model, plan
// with iLQR (grasped kinematics, or per-timestep models fitted from random
// rollouts when fit_dynamics is set), execute the mean policy on the true
// simulator, and judge the final configuration with the relation oracle.
FollowResult follow_instruction(const std::string& utterance, const VoxelGrid& grid,
                                const UnaryModel& unary, const PairwiseClassifier& pairwise,
                                const WhereModel& where, Rng& rng, bool fit_dynamics = false);

}  // namespace voxlang
