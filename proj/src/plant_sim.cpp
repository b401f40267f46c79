#include "ttswing/plant_sim.hpp"

#include <cmath>
#include <stdexcept>

#include "ttswing/rng.hpp"

namespace ttswing::plant {

void PdGains::validate() const {
  if ((kp.array() < 0.0).any() || (kd.array() < 0.0).any())
    throw std::invalid_argument("plant: PD gains must be >= 0");
  if ((tau_max.array() <= 0.0).any())
    throw std::invalid_argument("plant: torque limits must be > 0");
}

void ClosedLoopConfig::validate() const {
  gains.validate();
  if (!(control_dt > 0.0)) throw std::invalid_argument("plant: control_dt must be positive");
  if (substeps < 2) throw std::invalid_argument("plant: need >= 2 plant substeps per tick");
  if (disturbances.torque_noise_std < 0.0)
    throw std::invalid_argument("plant: torque noise std must be >= 0");
  if (!(disturbances.paddle_mass_scale > 0.0))
    throw std::invalid_argument("plant: paddle mass scale must be positive");
}

Vec5 control_torque(const arm::ArmParams& model, const arm::JointState& state,
                    const mpc::Setpoint& sp, const PdGains& gains, const Vec3& gravity,
                    int* sat_mask) {
  const auto dyn = arm::dynamics_terms(model, state.q, state.qd, gravity);
  Vec5 u = dyn.M * sp.qdd + dyn.C - dyn.tau_g;
  u += gains.kp.cwiseProduct(sp.q - state.q) + gains.kd.cwiseProduct(sp.qd - state.qd);

  int mask = 0;
  for (int i = 0; i < kArmDof; ++i) {
    if (std::abs(u(i)) > gains.tau_max(i)) {
      u(i) = std::copysign(gains.tau_max(i), u(i));
      mask |= 1 << i;
    }
  }
  if (sat_mask) *sat_mask = mask;
  return u;
}

namespace {

Vec5 forward_dynamics(const arm::ArmParams& model, const Vec5& q, const Vec5& qd,
                      const Vec5& u, const Vec3& gravity) {
  const auto dyn = arm::dynamics_terms(model, q, qd, gravity);
  const Vec5 qdd = dyn.M.ldlt().solve(u + dyn.tau_g - dyn.C);
  if (!qdd.allFinite()) throw std::runtime_error("plant: singular mass matrix");
  return qdd;
}

}  // namespace

PlantState step_plant(const arm::ArmParams& model, const PlantState& s, const Vec5& u,
                      double dt, const Vec3& gravity) {
  if (!(dt > 0.0)) throw std::invalid_argument("plant: dt must be positive");

  const Vec5 k1q = s.state.qd;
  const Vec5 k1v = forward_dynamics(model, s.state.q, s.state.qd, u, gravity);
  const Vec5 k2q = s.state.qd + 0.5 * dt * k1v;
  const Vec5 k2v =
      forward_dynamics(model, s.state.q + 0.5 * dt * k1q, k2q, u, gravity);
  const Vec5 k3q = s.state.qd + 0.5 * dt * k2v;
  const Vec5 k3v =
      forward_dynamics(model, s.state.q + 0.5 * dt * k2q, k3q, u, gravity);
  const Vec5 k4q = s.state.qd + dt * k3v;
  const Vec5 k4v = forward_dynamics(model, s.state.q + dt * k3q, k4q, u, gravity);

  PlantState out;
  out.state.q = s.state.q + (dt / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
  out.state.qd = s.state.qd + (dt / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
  out.t = s.t + dt;
  return out;
}

ClosedLoopLog run_closed_loop(const arm::ArmParams& model, const arm::ArmParams& truth,
                              const SetpointSource& source, const arm::JointState& x0,
                              double t0, double t_strike, const ClosedLoopConfig& cfg,
                              const TickHook& pre_tick) {
  cfg.validate();
  if (!(t_strike > t0)) throw std::invalid_argument("plant: t_strike must be after t0");

  arm::ArmParams plant_model = truth;
  if (cfg.disturbances.paddle_mass_scale != 1.0) {
    auto& wrist = plant_model.joints[kArmDof - 1];
    wrist.mass *= cfg.disturbances.paddle_mass_scale;
    wrist.inertia *= cfg.disturbances.paddle_mass_scale;
  }

  Rng rng(cfg.disturbances.seed, 0);
  ClosedLoopLog log;
  PlantState s;
  s.state = x0;
  s.t = t0;

  for (int k = 0;; ++k) {
    const double t = t0 + k * cfg.control_dt;
    if (t >= t_strike - 1e-12) break;
    if (pre_tick) pre_tick(t, s.state);

    const mpc::Setpoint sp = source(t);
    int mask = 0;
    const Vec5 u = control_torque(model, s.state, sp, cfg.gains, cfg.gravity, &mask);
    if (mask) ++log.saturated_ticks;

    log.max_q_err = std::max(log.max_q_err, (sp.q - s.state.q).lpNorm<Eigen::Infinity>());
    log.max_qd_err = std::max(log.max_qd_err, (sp.qd - s.state.qd).lpNorm<Eigen::Infinity>());

    ControlSample rec;
    rec.t = t;
    rec.q = s.state.q;
    rec.qd = s.state.qd;
    rec.u = u;
    rec.sat_mask = mask;
    log.samples.push_back(rec);

    Vec5 u_plant = u;
    if (cfg.disturbances.torque_noise_std > 0.0)
      u_plant += cfg.disturbances.torque_noise_std *
                 Vec5::NullaryExpr([&] { return rng.normal(); });

    // hold the torque over the tick, stop exactly on the strike
    const double tick_end = std::min(t + cfg.control_dt, t_strike);
    const double sub_dt = (tick_end - t) / cfg.substeps;
    for (int i = 0; i < cfg.substeps; ++i)
      s = step_plant(plant_model, s, u_plant, sub_dt, cfg.gravity);
    s.t = tick_end;  // avoid accumulated rounding
  }

  log.strike.t = t_strike;
  log.strike.q = s.state.q;
  log.strike.qd = s.state.qd;
  log.strike.paddle_pos = arm::fk_paddle(plant_model, s.state.q);
  log.strike.paddle_vel = arm::jacobian(plant_model, s.state.q) * s.state.qd;
  log.strike.paddle_normal = arm::paddle_normal(plant_model, s.state.q);
  return log;
}

}  // namespace ttswing::plant
