#pragma once
// Independent oracles shared by the module tests and the acceptance run.
// Nothing here calls the code paths it is used to check: IoU is estimated
// by point sampling, and the LQ oracle is a standalone value recursion.

#include <vector>

#include "voxlang/common.hpp"
#include "voxlang/control.hpp"
#include "voxlang/scene.hpp"

namespace testutil {

using voxlang::Box3D;
using voxlang::Rng;
using voxlang::Vec3;
using voxlang::Vec4;
using voxlang::Vec7;

inline bool point_in_box(const Vec3& p, const Box3D& b) {
  Vec3 d = (p - b.center).cwiseAbs();
  return d.x() <= b.half_extent.x() && d.y() <= b.half_extent.y() && d.z() <= b.half_extent.z();
}

// Monte-Carlo IoU from 1e5 points jittered on a 50x50x40 lattice inside box
// a; the intersection volume is the hit fraction times a's (analytic)
// volume. Stratification keeps the estimator noise well under the 0.01
// acceptance band.
inline double mc_iou(const Box3D& a, const Box3D& b, Rng& rng) {
  const int nx = 50, ny = 50, nz = 40;
  const Vec3 lo = a.min();
  const Vec3 sz = 2.0 * a.half_extent;
  long hits = 0;
  for (int iz = 0; iz < nz; ++iz)
    for (int iy = 0; iy < ny; ++iy)
      for (int ix = 0; ix < nx; ++ix) {
        Vec3 p(lo.x() + sz.x() * ((ix + rng.uniform()) / nx),
               lo.y() + sz.y() * ((iy + rng.uniform()) / ny),
               lo.z() + sz.z() * ((iz + rng.uniform()) / nz));
        hits += point_in_box(p, b);
      }
  double v_int = a.volume() * static_cast<double>(hits) / (1.0 * nx * ny * nz);
  double v_union = a.volume() + b.volume() - v_int;
  return v_int / v_union;
}

inline Box3D random_box(Rng& rng, double center_range = 1.0, double half_lo = 0.2,
                        double half_hi = 1.2) {
  Box3D b;
  for (int i = 0; i < 3; ++i) {
    b.center[i] = rng.uniform(-center_range, center_range);
    b.half_extent[i] = rng.uniform(half_lo, half_hi);
  }
  return b;
}

// ---------------------------------------------------------------------------
// Linear-quadratic oracle.
//
// Instance: x_{t+1} = A x_t + B u_t + c, objective
//   sum_{t<T} (|x_t - g|^2 + lambda |u_t|^2) + |x_T - g|^2,
// the exact objective the trajectory optimizer minimizes. The oracle runs
// the affine-quadratic value recursion V_t(x) = x'P x + q'x + r, extracts
// the optimal affine policy u_t = F_t x + f_t, and reports the cost of the
// induced rollout. V_0(x0) must agree with that rollout cost; the check
// guards the recursion algebra itself.

using voxlang::Mat44;
using voxlang::Mat47;
using voxlang::Mat74;
using voxlang::Mat77;

struct LqInstance {
  Mat77 A;
  Mat74 B;
  Vec7 c = Vec7::Zero();
  Vec7 goal = Vec7::Zero();
  Vec7 x0 = Vec7::Zero();
  double lambda = 1e-6;
  int T = 30;
};

struct LqSolution {
  double cost = 0.0;        // rollout cost under the optimal policy
  double value_at_x0 = 0.0; // V_0(x0) from the recursion
  std::vector<Vec7> xs;
  std::vector<Vec4> us;
};

inline LqSolution lq_oracle(const LqInstance& in) {
  const Mat77& A = in.A;
  const Mat74& B = in.B;
  const Vec7& c = in.c;
  const Vec7& g = in.goal;

  std::vector<Mat47> F(static_cast<std::size_t>(in.T));
  std::vector<Vec4> f(static_cast<std::size_t>(in.T));

  Mat77 P = Mat77::Identity();
  Vec7 q = -2.0 * g;
  double r = g.squaredNorm();
  for (int t = in.T - 1; t >= 0; --t) {
    Mat44 Huu = in.lambda * Mat44::Identity() + B.transpose() * P * B;
    Mat47 Hux = B.transpose() * P * A;
    Vec4 hu = B.transpose() * P * c + 0.5 * B.transpose() * q;
    Mat44 Hinv = Huu.inverse();
    F[static_cast<std::size_t>(t)] = -Hinv * Hux;
    f[static_cast<std::size_t>(t)] = -Hinv * hu;

    Mat77 Pn = Mat77::Identity() + A.transpose() * P * A - Hux.transpose() * Hinv * Hux;
    Vec7 qn = 2.0 * A.transpose() * P * c + A.transpose() * q - 2.0 * g -
              2.0 * Hux.transpose() * Hinv * hu;
    double rn = c.dot(P * c) + q.dot(c) + g.squaredNorm() + r - hu.dot(Hinv * hu);
    P = 0.5 * (Pn + Pn.transpose()).eval();
    q = qn;
    r = rn;
  }

  LqSolution out;
  out.value_at_x0 = in.x0.dot(P * in.x0) + q.dot(in.x0) + r;
  out.xs.push_back(in.x0);
  for (int t = 0; t < in.T; ++t) {
    Vec4 u = F[static_cast<std::size_t>(t)] * out.xs.back() + f[static_cast<std::size_t>(t)];
    out.cost += (out.xs.back() - g).squaredNorm() + in.lambda * u.squaredNorm();
    out.us.push_back(u);
    out.xs.push_back(A * out.xs.back() + B * u + c);
  }
  out.cost += (out.xs.back() - g).squaredNorm();
  return out;
}

// Random instance with spectral radius of A capped at 0.95 so rollouts stay
// bounded over the horizon.
inline LqInstance random_lq_instance(Rng& rng) {
  LqInstance in;
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 7; ++j) in.A(i, j) = rng.normal(0.0, 1.0 / std::sqrt(7.0));
  Eigen::EigenSolver<Mat77> es(in.A);
  double rho = es.eigenvalues().cwiseAbs().maxCoeff();
  if (rho > 0.95) in.A *= 0.95 / rho;
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 4; ++j) in.B(i, j) = rng.normal(0.0, 0.5);
  for (int i = 0; i < 7; ++i) {
    in.c[i] = rng.normal(0.0, 0.1);
    in.goal[i] = rng.normal(0.0, 0.5);
    in.x0[i] = rng.normal(0.0, 1.0);
  }
  return in;
}

}  // namespace testutil
