#pragma once

#include <functional>
#include <vector>

#include "ttswing/arm_model.hpp"
#include "ttswing/mpc_controller.hpp"
#include "ttswing/types.hpp"

namespace ttswing::plant {

struct PdGains {
  // tuned to the default model: distal joints have mJ-scale inertia, so
  // uniform stiff gains go discretely unstable at the 500 Hz control rate
  Vec5 kp = (Vec5() << 200.0, 200.0, 100.0, 100.0, 20.0).finished();
  Vec5 kd = (Vec5() << 5.0, 5.0, 2.0, 2.0, 0.2).finished();
  Vec5 tau_max = (Vec5() << 34.0, 34.0, 34.0, 34.0, 3.0).finished();  // Nm

  void validate() const;  // throws std::invalid_argument
};

struct PlantState {
  arm::JointState state;
  double t = 0.0;
};

// Inverse-dynamics feedforward evaluated at the measured state plus joint PD,
// saturated at the actuator limits. Bit i of sat_mask flags a clipped joint.
Vec5 control_torque(const arm::ArmParams& model, const arm::JointState& state,
                    const mpc::Setpoint& sp, const PdGains& gains, const Vec3& gravity,
                    int* sat_mask = nullptr);

// One RK4 step of the forward dynamics M qdd = u + tau_g - C under constant
// torque (solved against M, never inverted).
PlantState step_plant(const arm::ArmParams& model, const PlantState& s, const Vec5& u,
                      double dt, const Vec3& gravity);

// External disturbances: torque noise enters the plant directly (not through
// the saturated actuator), the mass scale perturbs the wrist link + paddle.
struct Disturbances {
  double torque_noise_std = 0.0;   // Nm, resampled each control tick
  double paddle_mass_scale = 1.0;  // plant-side multiplier
  uint64_t seed = 0;
};

struct ControlSample {
  double t = 0.0;
  Vec5 q = Vec5::Zero();
  Vec5 qd = Vec5::Zero();
  Vec5 u = Vec5::Zero();
  int sat_mask = 0;
};

struct StrikeSnapshot {
  double t = 0.0;
  Vec5 q = Vec5::Zero();
  Vec5 qd = Vec5::Zero();
  Vec3 paddle_pos = Vec3::Zero();
  Vec3 paddle_vel = Vec3::Zero();
  Vec3 paddle_normal = Vec3::UnitX();
};

struct ClosedLoopConfig {
  PdGains gains;
  double control_dt = 0.002;  // 500 Hz
  int substeps = 4;           // 0.5 ms plant steps
  Vec3 gravity{0.0, 0.0, -9.81};
  Disturbances disturbances;

  void validate() const;  // throws std::invalid_argument
};

struct ClosedLoopLog {
  std::vector<ControlSample> samples;  // one per control tick
  StrikeSnapshot strike;
  int saturated_ticks = 0;
  double max_q_err = 0.0;   // worst joint-space setpoint error seen
  double max_qd_err = 0.0;
};

using SetpointSource = std::function<mpc::Setpoint(double)>;
using TickHook = std::function<void(double, const arm::JointState&)>;

// Tracks the setpoint source from x0 at t0 until t_strike: PD + feedforward
// on `model` at 1/control_dt, plant integrated on `truth` in substeps. The
// strike snapshot is the truth-model paddle state at exactly t_strike.
// pre_tick (if set) sees the measured state before each control update.
ClosedLoopLog run_closed_loop(const arm::ArmParams& model, const arm::ArmParams& truth,
                              const SetpointSource& source, const arm::JointState& x0,
                              double t0, double t_strike, const ClosedLoopConfig& cfg,
                              const TickHook& pre_tick = {});

}  // namespace ttswing::plant
