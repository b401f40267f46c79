#pragma once

#include <functional>
#include <optional>
#include <string>

#include "ttswing/arm_model.hpp"
#include "ttswing/qp_solver.hpp"
#include "ttswing/types.hpp"

namespace ttswing::ocp {

// Terminal kinematics callbacks (generic in dof so reduced-dof problems can
// reuse the solver).
struct TerminalKinematics {
  std::function<Vec3(const VecX&)> position;
  std::function<Mat3X(const VecX&)> position_jacobian;
  std::function<Vec3(const VecX&)> normal;
  std::function<Mat3X(const VecX&)> normal_jacobian;
  // d(J(q) qd)/dq at fixed qd
  std::function<Mat3X(const VecX&, const VecX&)> velocity_gradient;
};

TerminalKinematics make_arm_kinematics(const arm::ArmParams& params);

struct OcpParams {
  int dof = kArmDof;
  int nodes = 50;
  double dt = 0.01;
  double w_accel = 1e-4;
  double w_vel = 1e-2;
  double hessian_reg = 1e-8;
  double eps_pos = 1e-4;          // (1 cm)^2
  double eps_vel = 0.04;          // (0.2 m/s)^2
  double eps_orient = 0.0076106;  // (2 sin 2.5 deg)^2
  VecX q0, qd0;                   // initial joint state
  VecX q_min, q_max;
  void validate() const;
};

struct TerminalSpec {
  Vec3 p_des = Vec3::Zero();
  Vec3 v_des = Vec3::Zero();
  Vec3 o_des = Vec3::UnitX();
  bool constrain_position = true;
  bool constrain_velocity = true;
  bool constrain_orientation = true;
};

// Condensed program: states are affine in x (stacked accelerations), so the
// decision vector is x alone and dynamics hold by construction.
struct OcpProblem {
  OcpParams params;
  TerminalSpec terminal;
  TerminalKinematics kin;

  MatX Hs;   // nodes x nodes cost curvature (with regularization)
  VecX g0;   // gradient at x = 0
  MatX Ts;   // box rows (nodes 2..N) x nodes
  VecX box_lo, box_hi;
  VecX pvec, vvec;  // terminal maps: qf = qf0 + sum pvec(k) x_k, qdf = qd0 + sum vvec(k) x_k
  VecX qf0;
  double cost0 = 0.0;  // cost at x = 0

  bool infeasible = false;
  std::string infeasible_reason;

  double cost(const VecX& x) const;
  VecX cost_grad(const VecX& x) const;
  void terminal_state(const VecX& x, VecX& qf, VecX& qdf) const;
  // joint trajectories from accelerations: q, qd are dof x (nodes+1)
  void rollout(const VecX& x, MatX& q, MatX& qd) const;
};

OcpProblem build_problem(const OcpParams& params, const TerminalSpec& terminal,
                         TerminalKinematics kin);

enum class SolveStatus { Converged, MaxIterations, Infeasible, BudgetExhausted, Stalled };

const char* status_name(SolveStatus s);

struct TerminalResiduals {
  double pos = 0.0;     // |fk(qf) - p_des|
  double vel = 0.0;     // |J(qf) qdf - v_des|
  double orient = 0.0;  // |n(qf) - o_des|
};

struct OcpSolution {
  SolveStatus status = SolveStatus::MaxIterations;
  bool converged = false;
  int iterations = 0;      // SQP iterations (QP solves)
  int qp_iterations = 0;   // total ADMM iterations
  double solve_ms = 0.0;   // wall time, measured
  double cost = 0.0;
  TerminalResiduals residuals;
  VecX x;                  // stacked accelerations
  MatX q, qd;              // dof x (nodes+1)
  MatX qdd;                // dof x nodes
};

struct SqpSettings {
  int max_iter_cold = 50;
  int max_iter_warm = 15;
  double step_tol = 1e-5;
  double kkt_tol = 1e-4;
  double box_tol = 1e-5;      // allowed joint-limit violation, rad
  double feas_tol = 1e-5;     // slack on the terminal ball radii (>= qp primal tol)
  int qp_iter_budget = 3000;  // per-solve ADMM budget (real-time envelope); 0 = off
  // memory helps only near the problem it was built for; a replan whose
  // target moved beyond these falls back to a cold seed for that solve
  double warm_drift_pos = 0.12;  // m
  double warm_drift_vel = 1.5;   // m/s
  // subproblems only need directional accuracy (inexact SQP): solving them
  // to full precision burns the iteration budget long before stationarity
  AdmmSettings admm{.eps_abs = 1e-7, .eps_rel = 1e-5};
};

// SQP over the condensed program; each subproblem is the operator-splitting
// QP. Keeps iterate + dual memory between calls for warm starting.
class OcpSolver {
 public:
  explicit OcpSolver(const SqpSettings& settings = {});

  OcpSolution solve(const OcpProblem& problem);
  void reset();  // drop warm memory: next solve is cold
  void seed(const VecX& x);  // adopt an external iterate as warm start
  bool warm() const { return warm_; }
  SqpSettings& settings() { return settings_; }
  const SqpSettings& settings() const { return settings_; }

 private:
  SqpSettings settings_;
  AdmmState admm_state_;
  VecX x_;
  double mu_ = 1.0;
  bool warm_ = false;
  bool warm_converged_ = false;  // memory stems from a converged solve
  TerminalSpec mem_terminal_;    // terminal of the problem x_ belongs to
  double mem_dt_ = 0.0;
  bool have_mem_terminal_ = false;
};

// One-shot convenience; warm_start (if given) seeds the iterate.
OcpSolution solve_swing(const OcpProblem& problem, const SqpSettings& settings = {},
                        const OcpSolution* warm_start = nullptr);

// ---- kinematic-only solve (used by the workspace sweep) ------------------

struct IkSettings {
  int max_iter = 200;
  double damping = 0.05;
  double orient_weight = 0.3;
  double pos_tol = 1e-4;     // meters
  double normal_tol = 5e-3;  // unit-vector distance
};

struct IkResult {
  bool converged = false;
  int iterations = 0;
  Vec5 q = Vec5::Zero();
  double pos_residual = 0.0;
  double normal_residual = 0.0;
};

// Damped least squares on the stacked position+normal residual, joint
// limits enforced by clamping.
IkResult ik_solve(const arm::ArmParams& params, const Vec3& target_p, const Vec3& target_n,
                  const Vec5& q_guess, const IkSettings& settings = {});

}  // namespace ttswing::ocp
