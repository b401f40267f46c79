#pragma once

#include <deque>
#include <optional>
#include <vector>

#include "ttswing/arm_model.hpp"
#include "ttswing/ball_prediction.hpp"
#include "ttswing/collision_model.hpp"
#include "ttswing/swing_ocp.hpp"
#include "ttswing/types.hpp"

namespace ttswing::mpc {

// FH re-solves the full swing from the ready state with fixed node spacing;
// SH seeds at the current state and shrinks the per-node dt as the strike
// approaches.
enum class Mode { FH, SH };

const char* mode_name(Mode m);

struct MpcConfig {
  Mode mode = Mode::FH;
  double t_swing = 0.5;           // full swing duration, s
  double blend_duration = 0.020;  // S-curve transition window, s
  int s_max = 10;                 // max forward index jump per tick
  double interp_dt = 0.002;       // dense setpoint spacing, s
  double plan_delay = 0.010;      // solve + transport latency before adoption, s
  ocp::OcpParams ocp;             // weights/eps/nodes template; q0, qd0, dt set per solve
  ocp::SqpSettings solver;

  int interp_nodes() const;  // N_i: dense intervals spanning a full swing
  void validate() const;     // throws std::invalid_argument
};

struct Setpoint {
  Vec5 q = Vec5::Zero();
  Vec5 qd = Vec5::Zero();
  Vec5 qdd = Vec5::Zero();
};

// Dense joint-space plan on a uniform grid whose FINAL node is the strike.
struct PlannedTrajectory {
  double t_start = 0.0;
  double dt = 0.002;
  MatX q, qd, qdd;  // dof x n, node j at t_start + j*dt
  int source_id = -1;
  bool clipped_blend = false;  // blend window was cut to the plans' overlap

  int cols() const { return static_cast<int>(q.cols()); }
  double t_end() const { return t_start + dt * (cols() - 1); }
  double t_strike() const { return t_end(); }
  bool covers(double t) const;
  Setpoint node(int j) const;
  // Cubic Hermite on (q, qd) between nodes (exact on piecewise-constant
  // acceleration data); qdd linearly interpolated. Clamps outside the span.
  Setpoint sample(double t) const;
};

// Resample an accepted solve onto the interp_dt grid, anchored at the strike
// so the final node lands exactly on t_strike_abs. A sub-interval sliver at
// the start is dropped when the horizon is not a multiple of interp_dt.
PlannedTrajectory densify(const ocp::OcpSolution& sol, double t_strike_abs, double ocp_dt,
                          double interp_dt, int source_id = -1);

// Quintic smoothstep 6u^5 - 15u^4 + 10u^3 and derivatives; value and first
// two derivatives vanish at u = 0 and are (1, 0, 0) at u = 1.
double smoothstep(double u);
double smoothstep_d(double u);
double smoothstep_dd(double u);

// S-curve transition from `oldp` to `newp` over [t_switch, t_switch +
// blend_duration], emitted on newp's grid. Blended velocity/acceleration are
// the exact time derivatives of the blended position. The window is clipped
// to the plans' common span (flagged); past it the output equals newp.
PlannedTrajectory blend(const PlannedTrajectory& oldp, const PlannedTrajectory& newp,
                        double t_switch, const MpcConfig& cfg);

// Map elapsed swing time to the dense node index: raw i = (1 - (t_strike -
// t)/T_swing) * N_i, then clamp to [i_prev, min(i_prev + s_max, N_i)] —
// forward jumps are capped, "slow down" holds the index rather than moving
// backward, and indices saturate at the strike node.
int select_index(double t, double t_strike, const MpcConfig& cfg, int i_prev);

struct SolveRecord {
  double t = 0.0;  // sim time of the replan
  bool attempted = false;
  bool converged = false;
  double solve_ms = 0.0;
  int sqp_iterations = 0;
  int qp_iterations = 0;
  double ocp_dt = 0.0;  // per-node dt of the solved horizon
  Vec3 p_des = Vec3::Zero();
  int i_star = 0;  // executor index when the solve was issued
};

// Replanner + blending executor. update() solves toward the latest smoothed
// prediction (FH: from the ready state, fixed dt; SH: from the current state,
// dt = remaining/N once inside the swing window); converged plans are adopted
// plan_delay later with an S-curve blend. Non-converged solves keep the
// previous plan. tick() emits the setpoint for the selected index.
class MpcController {
 public:
  MpcController(const arm::ArmParams& arm, const MpcConfig& cfg);

  void set_ready(const arm::JointState& ready);

  SolveRecord update(double t_now, const arm::JointState& current,
                     const pred::StrikePrediction& prediction, const strike::SwingSpec& spec,
                     const Vec3& hit_dir = Vec3::UnitX());

  Setpoint tick(double t);  // call at interp_dt spacing

  bool has_plan() const { return active_.has_value(); }
  const PlannedTrajectory* plan() const { return active_ ? &*active_ : nullptr; }
  double t_strike() const { return active_ ? active_->t_strike() : 0.0; }
  int last_index() const { return i_prev_; }
  void reset_solver() { solver_.reset(); }  // next solve is cold
  void reset();
  const MpcConfig& config() const { return cfg_; }

 private:
  struct Pending {
    PlannedTrajectory traj;
    double due = 0.0;  // adoption time (dispatch + plan_delay)
  };

  void adopt(const PlannedTrajectory& next, double t);

  arm::ArmParams arm_;
  MpcConfig cfg_;
  ocp::TerminalKinematics kin_;
  ocp::OcpSolver solver_;
  arm::JointState ready_;
  std::optional<PlannedTrajectory> active_;
  std::deque<Pending> pending_;  // in flight; a new solve cannot retract these
  int i_prev_ = 0;
  int plans_ = 0;
};

// ---- replan-loop benchmark (kinematic, no plant) --------------------------

struct PredictionUpdate {
  double t = 0.0;  // arrival time
  pred::StrikePrediction prediction;
};

struct MpcRunLog {
  Mode mode = Mode::FH;
  bool cold = false;
  std::vector<SolveRecord> solves;  // attempted solves only
  int attempted = 0;
  int converged = 0;
  double convergence_ratio = 1.0;
  double median_solve_ms = 0.0;
  long total_qp_iterations = 0;
  std::vector<double> tick_times;
  std::vector<int> indices;       // i* per tick
  std::vector<Setpoint> executed; // setpoint per tick
  double t_strike = 0.0;          // of the last adopted plan
};

// Runs the replan loop against a prediction stream, executing setpoints
// kinematically (SH sees the last emitted setpoint as the current state).
// cold_start drops solver memory before every solve.
MpcRunLog simulate_mpc(const arm::ArmParams& arm, const arm::JointState& ready,
                       const std::vector<PredictionUpdate>& stream,
                       const strike::SwingSpec& spec, const MpcConfig& cfg,
                       bool cold_start = false, const Vec3& hit_dir = Vec3::UnitX());

}  // namespace ttswing::mpc
