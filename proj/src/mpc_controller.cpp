#include "ttswing/mpc_controller.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ttswing::mpc {

namespace {
constexpr double kTimeEps = 1e-9;
}

const char* mode_name(Mode m) { return m == Mode::FH ? "fh" : "sh"; }

int MpcConfig::interp_nodes() const {
  return static_cast<int>(std::llround(t_swing / interp_dt));
}

void MpcConfig::validate() const {
  if (!(t_swing > 0.0)) throw std::invalid_argument("mpc: t_swing must be positive");
  if (!(interp_dt > 0.0)) throw std::invalid_argument("mpc: interp_dt must be positive");
  if (blend_duration < interp_dt)
    throw std::invalid_argument("mpc: blend_duration must be >= interp_dt");
  if (s_max < 1) throw std::invalid_argument("mpc: s_max must be >= 1");
  if (plan_delay < 0.0) throw std::invalid_argument("mpc: plan_delay must be >= 0");
  if (interp_nodes() < 2) throw std::invalid_argument("mpc: t_swing spans too few nodes");
}

bool PlannedTrajectory::covers(double t) const {
  return t >= t_start - kTimeEps && t <= t_end() + kTimeEps;
}

Setpoint PlannedTrajectory::node(int j) const {
  Setpoint s;
  s.q = q.col(j);
  s.qd = qd.col(j);
  s.qdd = qdd.col(j);
  return s;
}

Setpoint PlannedTrajectory::sample(double t) const {
  const int n = cols();
  double u = (t - t_start) / dt;
  u = std::clamp(u, 0.0, static_cast<double>(n - 1));
  const int j = std::min(static_cast<int>(std::floor(u)), n - 2);
  const double lam = u - j;
  if (lam < 1e-12) return node(j);
  if (lam > 1.0 - 1e-12) return node(j + 1);

  const double l2 = lam * lam, l3 = l2 * lam;
  const double h00 = 2 * l3 - 3 * l2 + 1, h10 = l3 - 2 * l2 + lam;
  const double h01 = -2 * l3 + 3 * l2, h11 = l3 - l2;
  const double d00 = 6 * l2 - 6 * lam, d10 = 3 * l2 - 4 * lam + 1;
  const double d01 = -6 * l2 + 6 * lam, d11 = 3 * l2 - 2 * lam;

  Setpoint s;
  s.q = h00 * q.col(j) + h10 * dt * qd.col(j) + h01 * q.col(j + 1) + h11 * dt * qd.col(j + 1);
  s.qd = (d00 * q.col(j) + d01 * q.col(j + 1)) / dt + d10 * qd.col(j) + d11 * qd.col(j + 1);
  s.qdd = (1.0 - lam) * qdd.col(j) + lam * qdd.col(j + 1);
  return s;
}

PlannedTrajectory densify(const ocp::OcpSolution& sol, double t_strike_abs, double ocp_dt,
                          double interp_dt, int source_id) {
  const int dof = static_cast<int>(sol.q.rows());
  const int nodes = static_cast<int>(sol.qdd.cols());
  const double span = nodes * ocp_dt;
  const int m = std::max(1, static_cast<int>(std::floor(span / interp_dt + 1e-9)));

  PlannedTrajectory p;
  p.t_start = t_strike_abs - m * interp_dt;
  p.dt = interp_dt;
  p.source_id = source_id;
  p.q.resize(dof, m + 1);
  p.qd.resize(dof, m + 1);
  p.qdd.resize(dof, m + 1);

  const double ocp_start = t_strike_abs - span;
  for (int j = 0; j <= m; ++j) {
    // cubic Hermite on the transcription nodes (exact copies where grids align);
    // acceleration is the piecewise-constant interval input
    double u = (p.t_start + j * interp_dt - ocp_start) / ocp_dt;
    u = std::clamp(u, 0.0, static_cast<double>(nodes));
    if (j == m) u = nodes;
    const int k = std::min(static_cast<int>(std::floor(u)), nodes - 1);
    const double lam = u - k;
    if (lam < 1e-9) {
      p.q.col(j) = sol.q.col(k);
      p.qd.col(j) = sol.qd.col(k);
      p.qdd.col(j) = sol.qdd.col(k);
      continue;
    }
    if (lam > 1.0 - 1e-9) {
      p.q.col(j) = sol.q.col(k + 1);
      p.qd.col(j) = sol.qd.col(k + 1);
      p.qdd.col(j) = sol.qdd.col(std::min(k + 1, nodes - 1));
      continue;
    }
    const double l2 = lam * lam, l3 = l2 * lam;
    const double h00 = 2 * l3 - 3 * l2 + 1, h10 = l3 - 2 * l2 + lam;
    const double h01 = -2 * l3 + 3 * l2, h11 = l3 - l2;
    const double d00 = 6 * l2 - 6 * lam, d10 = 3 * l2 - 4 * lam + 1;
    const double d01 = -6 * l2 + 6 * lam, d11 = 3 * l2 - 2 * lam;
    p.q.col(j) = h00 * sol.q.col(k) + h10 * ocp_dt * sol.qd.col(k) + h01 * sol.q.col(k + 1) +
                 h11 * ocp_dt * sol.qd.col(k + 1);
    p.qd.col(j) = (d00 * sol.q.col(k) + d01 * sol.q.col(k + 1)) / ocp_dt + d10 * sol.qd.col(k) +
                  d11 * sol.qd.col(k + 1);
    p.qdd.col(j) = sol.qdd.col(k);
  }
  return p;
}

double smoothstep(double u) { return u * u * u * (u * (6 * u - 15) + 10); }
double smoothstep_d(double u) { return 30 * u * u * (u - 1) * (u - 1); }
double smoothstep_dd(double u) { return 60 * u * (u - 1) * (2 * u - 1); }

PlannedTrajectory blend(const PlannedTrajectory& oldp, const PlannedTrajectory& newp,
                        double t_switch, const MpcConfig& cfg) {
  PlannedTrajectory out = newp;
  // plans are strike-anchored and executed by phase, so the old plan is read
  // at the matching phase, not the matching wall-clock instant
  const double shift = oldp.t_strike() - newp.t_strike();
  const double lo = std::max(oldp.t_start - shift, newp.t_start);
  const double hi = std::min(oldp.t_end() - shift, newp.t_end());
  const double w0 = std::max(t_switch, lo);
  const double w1 = std::min(t_switch + cfg.blend_duration, hi);
  out.clipped_blend = (w0 > t_switch + kTimeEps) || (w1 < t_switch + cfg.blend_duration - kTimeEps);
  if (w1 <= w0 + kTimeEps) return out;  // no usable overlap: hard switch
  const double width = w1 - w0;

  for (int j = 0; j < out.cols(); ++j) {
    const double t = newp.t_start + j * newp.dt;
    if (t >= w1 - kTimeEps) break;  // pure new from here on
    if (!oldp.covers(t + shift)) continue;  // nothing to carry over
    const Setpoint o = oldp.sample(t + shift);
    if (t <= w0 + kTimeEps) {
      out.q.col(j) = o.q;
      out.qd.col(j) = o.qd;
      out.qdd.col(j) = o.qdd;
      continue;
    }
    const Setpoint n = newp.node(j);
    const double u = (t - w0) / width;
    const double s = smoothstep(u);
    const double sd = smoothstep_d(u) / width;
    const double sdd = smoothstep_dd(u) / (width * width);
    // delta form: identical plans pass through bitwise
    out.q.col(j) = o.q + s * (n.q - o.q);
    out.qd.col(j) = o.qd + s * (n.qd - o.qd) + sd * (n.q - o.q);
    out.qdd.col(j) = o.qdd + s * (n.qdd - o.qdd) + 2.0 * sd * (n.qd - o.qd) + sdd * (n.q - o.q);
  }
  return out;
}

int select_index(double t, double t_strike, const MpcConfig& cfg, int i_prev) {
  const int ni = cfg.interp_nodes();
  const double raw = (1.0 - (t_strike - t) / cfg.t_swing) * ni;
  int i = static_cast<int>(std::llround(raw));
  i = std::max(i, 0);
  i = std::min(i, std::min(i_prev + cfg.s_max, ni));
  i = std::max(i, std::min(i_prev, ni));
  return i;
}

MpcController::MpcController(const arm::ArmParams& arm, const MpcConfig& cfg)
    : arm_(arm), cfg_(cfg), kin_(ocp::make_arm_kinematics(arm_)), solver_(cfg.solver) {
  cfg_.validate();
  cfg_.ocp.dof = kArmDof;
  if (cfg_.ocp.q_min.size() != kArmDof) cfg_.ocp.q_min = arm_.q_lower();
  if (cfg_.ocp.q_max.size() != kArmDof) cfg_.ocp.q_max = arm_.q_upper();
}

void MpcController::set_ready(const arm::JointState& ready) { ready_ = ready; }

void MpcController::reset() {
  solver_.reset();
  active_.reset();
  pending_.clear();
  i_prev_ = 0;
  plans_ = 0;
}

SolveRecord MpcController::update(double t_now, const arm::JointState& current,
                                  const pred::StrikePrediction& prediction,
                                  const strike::SwingSpec& spec, const Vec3& hit_dir) {
  SolveRecord rec;
  rec.t = t_now;
  rec.i_star = i_prev_;
  if (!prediction.valid) return rec;

  const double remaining = prediction.t_strike - t_now;
  if (remaining < cfg_.plan_delay + 2.0 * cfg_.interp_dt) return rec;  // too late: hold plan

  ocp::OcpParams op = cfg_.ocp;
  if (cfg_.mode == Mode::FH || remaining >= cfg_.t_swing) {
    // full swing from the ready state, fixed node spacing
    op.dt = cfg_.t_swing / op.nodes;
    op.q0 = ready_.q;
    op.qd0 = ready_.qd;
  } else {
    // shrink toward the strike from the current state
    op.dt = remaining / op.nodes;
    op.q0 = current.q;
    op.qd0 = current.qd;
  }

  const auto dirs = strike::spec_to_terminal(spec, hit_dir);
  ocp::TerminalSpec terminal;
  terminal.p_des = prediction.p_des;
  terminal.v_des = dirs.v_des;
  terminal.o_des = dirs.o_des;

  const auto problem = ocp::build_problem(op, terminal, kin_);
  const auto sol = solver_.solve(problem);

  rec.attempted = true;
  rec.converged = sol.converged;
  rec.solve_ms = sol.solve_ms;
  rec.sqp_iterations = sol.iterations;
  rec.qp_iterations = sol.qp_iterations;
  rec.ocp_dt = op.dt;
  rec.p_des = prediction.p_des;
  if (sol.converged) {
    // dispatch; already in-flight plans are not retracted by a newer solve
    pending_.push_back({densify(sol, prediction.t_strike, op.dt, cfg_.interp_dt, plans_++),
                        t_now + cfg_.plan_delay});
  }
  return rec;
}

void MpcController::adopt(const PlannedTrajectory& next, double t) {
  if (!active_) {
    active_ = next;
    i_prev_ = 0;
  } else {
    const double shift = (next.t_strike() - active_->t_strike()) / cfg_.interp_dt;
    active_ = blend(*active_, next, t, cfg_);
    // keep the executed phase when the strike time moves between plans
    i_prev_ = std::clamp(static_cast<int>(std::llround(i_prev_ - shift)), 0, cfg_.interp_nodes());
  }
}

Setpoint MpcController::tick(double t) {
  while (!pending_.empty() && t + kTimeEps >= pending_.front().due) {
    adopt(pending_.front().traj, t);
    pending_.pop_front();
  }
  if (!active_) {
    Setpoint hold;
    hold.q = ready_.q;
    hold.qd.setZero();
    hold.qdd.setZero();
    return hold;
  }
  i_prev_ = select_index(t, active_->t_strike(), cfg_, i_prev_);
  // plans shorter than the full swing index from the strike end backwards
  const int offset = cfg_.interp_nodes() - (active_->cols() - 1);
  const int j = std::clamp(i_prev_ - offset, 0, active_->cols() - 1);
  return active_->node(j);
}

MpcRunLog simulate_mpc(const arm::ArmParams& arm, const arm::JointState& ready,
                       const std::vector<PredictionUpdate>& stream,
                       const strike::SwingSpec& spec, const MpcConfig& cfg, bool cold_start,
                       const Vec3& hit_dir) {
  MpcRunLog log;
  log.mode = cfg.mode;
  log.cold = cold_start;
  if (stream.empty()) return log;

  MpcController ctl(arm, cfg);
  ctl.set_ready(ready);

  double t_end = stream.front().t;
  for (const auto& u : stream)
    if (u.prediction.valid) t_end = std::max(t_end, u.prediction.t_strike);

  arm::JointState current = ready;
  const double t0 = stream.front().t;
  std::size_t next = 0;
  for (int k = 0;; ++k) {
    const double t = t0 + k * cfg.interp_dt;
    if (t > t_end + kTimeEps) break;
    while (next < stream.size() && stream[next].t <= t + kTimeEps) {
      if (cold_start) ctl.reset_solver();
      const auto rec = ctl.update(stream[next].t, current, stream[next].prediction, spec, hit_dir);
      if (rec.attempted) {
        ++log.attempted;
        if (rec.converged) ++log.converged;
        log.total_qp_iterations += rec.qp_iterations;
        log.solves.push_back(rec);
      }
      ++next;
    }
    const Setpoint sp = ctl.tick(t);
    current.q = sp.q;
    current.qd = sp.qd;
    log.tick_times.push_back(t);
    log.indices.push_back(ctl.last_index());
    log.executed.push_back(sp);
  }

  log.t_strike = ctl.has_plan() ? ctl.t_strike() : 0.0;
  log.convergence_ratio = log.attempted ? double(log.converged) / log.attempted : 1.0;
  if (!log.solves.empty()) {
    std::vector<double> ms;
    ms.reserve(log.solves.size());
    for (const auto& s : log.solves) ms.push_back(s.solve_ms);
    std::nth_element(ms.begin(), ms.begin() + ms.size() / 2, ms.end());
    log.median_solve_ms = ms[ms.size() / 2];
  }
  return log;
}

}  // namespace ttswing::mpc
