#pragma once

#include <vector>

#include "ttswing/types.hpp"

namespace ttswing::strike {

// Named strike style: velocity direction (theta azimuth, phi elevation) and
// paddle orientation (alpha azimuth, beta elevation), degrees in the strike
// frame whose +X is the horizontal hitting direction.
struct SwingSpec {
  double theta_deg = 0.0;
  double phi_deg = 0.0;
  double alpha_deg = 0.0;
  double beta_deg = 0.0;
  double speed = 6.0;    // |v_des|, m/s
  double t_swing = 0.5;  // s

  void validate() const;
  static SwingSpec drive(double speed = 6.0, double t_swing = 0.5);
  static SwingSpec loop(double speed = 6.0, double t_swing = 0.5);
  static SwingSpec chop(double speed = 6.0, double t_swing = 0.5);
};

struct ContactParams {
  double e_n = 0.85;  // normal restitution, (0, 1]
  double k_t = 0.75;  // tangential velocity retention, (0, 1]
  void validate() const;
};

struct StrikeDirections {
  Vec3 v_des = Vec3::UnitX();  // world frame, |v_des| = speed
  Vec3 o_des = Vec3::UnitX();  // world frame, unit
};

// Angles of a direction vector: azimuth in the X-Y plane, elevation from it.
double azimuth_deg(const Vec3& v);
double elevation_deg(const Vec3& v);

// hit_dir: horizontal hitting direction (strike-frame +X) in world frame.
StrikeDirections spec_to_terminal(const SwingSpec& spec, const Vec3& hit_dir = Vec3::UnitX());

bool approaching(const Vec3& v_ball_in, const Vec3& v_paddle, const Vec3& normal);

// Spin-free impact map: relative velocity r = v_in - v_p splits into the
// normal component (restitution e_n flips it) and the tangential component
// (retention k_t shrinks it). Throws std::domain_error unless approaching.
Vec3 exit_velocity(const Vec3& v_ball_in, const Vec3& v_paddle, const Vec3& normal,
                   const ContactParams& cp = {});

struct PaddleState {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec3 n = Vec3::UnitX();
};

// Strike-condition tracking + exit-velocity errors vs the model prediction
// computed from the *target* paddle state and the measured incoming ball.
struct StrikeScore {
  double p_err = 0.0;  // m
  double v_err = 0.0;  // paddle speed error, m/s
  double beta_err = 0.0, alpha_err = 0.0;  // orientation angles, deg
  double phi_err = 0.0, theta_err = 0.0;   // velocity direction angles, deg
  double exit_mag_err = 0.0;               // m/s
  double exit_vert_err = 0.0, exit_horiz_err = 0.0;  // deg
};

StrikeScore score_strike(const PaddleState& measured, const Vec3& p_des, const Vec3& v_des,
                         const Vec3& o_des, const Vec3& v_ball_in, const Vec3& v_ball_out,
                         const ContactParams& cp = {});

struct ContactSample {
  Vec3 v_ball_in, v_paddle, normal, v_ball_out;
};

// Least-squares fit of (e_n, k_t) from logged strike pairs.
ContactParams fit_contact(const std::vector<ContactSample>& samples);

}  // namespace ttswing::strike
