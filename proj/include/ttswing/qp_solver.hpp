#pragma once

#include <vector>

#include "ttswing/types.hpp"

namespace ttswing::ocp {

// Convex subproblem produced by condensing the swing program onto the
// stacked joint accelerations x in R^{nodes*dof} (node-major):
//
//   min  1/2 x' (Hs kron I_dof) x + g' x
//   s.t. box_lo <= (Ts kron I_dof) x <= box_hi        (joint positions)
//        | G_c x + h_c | <= radius_c                  (terminal balls)
//
// Hs is SPD (cost curvature over nodes, identical per joint); Ts maps
// accelerations to the position offset of selected nodes.
struct KronQp {
  int nodes = 0;
  int dof = 0;
  MatX Hs;       // nodes x nodes
  VecX g;        // nodes*dof
  MatX Ts;       // box_rows x nodes
  VecX box_lo;   // box_rows*dof, row-major by (row, joint)
  VecX box_hi;
  struct Ball {
    Mat3X G;  // 3 x nodes*dof
    Vec3 h;
    double radius = 0.0;
  };
  std::vector<Ball> balls;

  int box_rows() const { return static_cast<int>(Ts.rows()); }
  int vars() const { return nodes * dof; }
};

struct AdmmSettings {
  double sigma = 1e-6;      // proximal weight on x (equilibrated units)
  double rho_box = 0.1;     // penalty on the box block
  double rho_ball = 10.0;   // balls sit at their radius, i.e. near-equalities
  double eps_abs = 1e-8;
  double eps_rel = 1e-6;
  int max_iter = 1000;
  int adapt_interval = 25;  // residual-balancing rho updates; 0 disables
};

// Warm-startable iterate memory. The solver equilibrates the problem (unit
// constraint row norms, unit cost curvature); x lives in problem units while
// z/u and rho live in the scaled space recorded by the scale_* fields. Use
// dual_box/dual_ball for problem-unit multipliers.
struct AdmmState {
  bool valid = false;
  VecX x;
  VecX z_box, u_box;
  Mat3X z_ball, u_ball;  // column c per ball
  VecX scale_box;        // per box row
  VecX scale_ball;       // per ball
  double scale_cost = 1.0;
  double rho_box = 0.0, rho_ball = 0.0;

  bool matches(const KronQp& qp) const {
    return valid && x.size() == qp.vars() &&
           z_box.size() == static_cast<Eigen::Index>(qp.box_rows()) * qp.dof &&
           z_ball.cols() == static_cast<Eigen::Index>(qp.balls.size());
  }
  VecX dual_box(const KronQp& qp) const;        // stacked (row, joint)
  Vec3 dual_ball(const KronQp& qp, int c) const;
};

struct AdmmInfo {
  bool converged = false;
  int iterations = 0;
  double prim_res = 0.0;
  double dual_res = 0.0;
};

// Operator-splitting solve. The KKT system is factored once per rho value:
// an LLT of the nodes x nodes reduced matrix plus a low-rank (3 rows per
// ball) Woodbury correction, so iterations cost O(nodes^2 * dof).
AdmmInfo admm_solve(const KronQp& qp, const AdmmSettings& settings, AdmmState& state);

}  // namespace ttswing::ocp
