#pragma once

#include <array>

#include "ttswing/types.hpp"

namespace ttswing::arm {

// One revolute joint: the frame is translated by `offset` in the parent
// frame, then rotated by q about `axis`. The link body (mass/com/inertia,
// expressed in the rotated frame) rides on this joint; rotor_inertia is the
// reflected actuator inertia added on the diagonal of M.
struct JointParams {
  Vec3 axis{0, 1, 0};
  Vec3 offset{0, 0, 0};
  double mass = 0.0;
  Vec3 com{0, 0, 0};
  Mat3 inertia = Mat3::Identity() * 1e-3;  // about the com
  double rotor_inertia = 0.0;
  double q_min = -2.5;
  double q_max = 2.5;
};

struct PaddleParams {
  Vec3 center_offset{0, 0, -0.10};  // in the wrist frame
  Vec3 normal_local{1, 0, 0};       // unit, in the wrist frame
  double radius = 0.075;
};

struct ArmParams {
  std::array<JointParams, kArmDof> joints;
  PaddleParams paddle;

  // 5-DoF lightweight arm: pitch/roll/yaw shoulder (intersecting axes),
  // pitch elbow, pitch wrist; 3 kg total.
  static ArmParams default_model();

  void validate() const;  // throws std::invalid_argument
  Vec5 q_lower() const;
  Vec5 q_upper() const;
  double total_mass() const;
  double reach() const;  // sum of offset and paddle lever lengths
};

struct JointState {
  Vec5 q = Vec5::Zero();
  Vec5 qd = Vec5::Zero();
};

// FK cache: world-frame joint origins, joint axes, and link rotations.
struct Frames {
  std::array<Vec3, kArmDof> origin;
  std::array<Vec3, kArmDof> axis;     // world frame, after parent rotations
  std::array<Mat3, kArmDof> rotation; // world orientation of link i frame
  Vec3 paddle_center;
  Vec3 paddle_normal;                 // unit
};

Frames compute_frames(const ArmParams& params, const Vec5& q);

Vec3 fk_paddle(const ArmParams& params, const Vec5& q);
// A point one unit along the paddle normal; the normal itself is the
// difference of the two FK points.
Vec3 fk_normal_point(const ArmParams& params, const Vec5& q);
Vec3 paddle_normal(const ArmParams& params, const Vec5& q);

// Geometric Jacobian of the paddle center (column i = a_i x (p - o_i)).
Mat35 jacobian(const ArmParams& params, const Vec5& q);
// d(normal)/dq (column i = a_i x n).
Mat35 normal_jacobian(const ArmParams& params, const Vec5& q);
// d(J(q) qd)/dq at fixed qd; used to linearize the paddle velocity.
Mat35 velocity_gradient(const ArmParams& params, const Vec5& q, const Vec5& qd);

// Inverse dynamics tau = M(q) qdd + C(q, qd) - tau_g(q) via recursive
// Newton-Euler; gravity points along `gravity`.
Vec5 inverse_dynamics(const ArmParams& params, const Vec5& q, const Vec5& qd,
                      const Vec5& qdd, const Vec3& gravity);

struct DynamicsTerms {
  Mat5 M;      // symmetric positive definite
  Vec5 C;      // Coriolis/centrifugal torque (depends on qd)
  Vec5 tau_g;  // gravity torque, -dV/dq: M qdd + C = tau_g + u
};

// M from unit-acceleration inverse dynamics columns, C and tau_g from
// zero-acceleration / zero-velocity calls.
DynamicsTerms dynamics_terms(const ArmParams& params, const Vec5& q, const Vec5& qd,
                             const Vec3& gravity);

double potential_energy(const ArmParams& params, const Vec5& q, const Vec3& gravity);
double kinetic_energy(const ArmParams& params, const Vec5& q, const Vec5& qd);

}  // namespace ttswing::arm
