#include "ttswing/arm_model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ttswing::arm {

ArmParams ArmParams::default_model() {
  ArmParams p;
  auto diag = [](double a, double b, double c) {
    Mat3 m = Mat3::Zero();
    m(0, 0) = a;
    m(1, 1) = b;
    m(2, 2) = c;
    return m;
  };
  // shoulder pitch / roll / yaw share an origin; links hang along -Z at q=0
  p.joints[0] = {{0, 1, 0}, {0, 0, 0}, 0.9, {0, 0, 0}, diag(2e-3, 2e-3, 2e-3), 0.00612, -2.5, 2.5};
  p.joints[1] = {{1, 0, 0}, {0, 0, 0}, 0.7, {0, 0, 0}, diag(1.5e-3, 1.5e-3, 1.5e-3), 0.00612, -2.5, 2.5};
  p.joints[2] = {{0, 0, 1}, {0, 0, 0}, 0.75, {0, 0, -0.10}, diag(8e-3, 8e-3, 1e-3), 0.00612, -2.5, 2.5};
  p.joints[3] = {{0, 1, 0}, {0, 0, -0.30}, 0.5, {0, 0, -0.12}, diag(4e-3, 4e-3, 5e-4), 0.00612, -2.5, 2.5};
  p.joints[4] = {{0, 1, 0}, {0, 0, -0.32}, 0.15, {0, 0, -0.07}, diag(8e-4, 8e-4, 2e-4), 2e-5, -1.6, 1.6};
  p.paddle = {{0, 0, -0.10}, {1, 0, 0}, 0.075};
  return p;
}

void ArmParams::validate() const {
  for (int i = 0; i < kArmDof; ++i) {
    const auto& j = joints[i];
    const std::string where = "arm joint " + std::to_string(i + 1) + ": ";
    if (std::abs(j.axis.norm() - 1.0) > 1e-6)
      throw std::invalid_argument(where + "axis must be a unit vector");
    if (!(j.mass > 0.0)) throw std::invalid_argument(where + "mass must be positive");
    if (!(j.rotor_inertia >= 0.0))
      throw std::invalid_argument(where + "rotor_inertia must be >= 0");
    if (!(j.q_min < j.q_max)) throw std::invalid_argument(where + "q_min must be < q_max");
    if ((j.inertia - j.inertia.transpose()).norm() > 1e-9)
      throw std::invalid_argument(where + "inertia must be symmetric");
    Eigen::SelfAdjointEigenSolver<Mat3> es(j.inertia);
    if (es.eigenvalues().minCoeff() < -1e-12)
      throw std::invalid_argument(where + "inertia must be positive semidefinite");
  }
  if (std::abs(paddle.normal_local.norm() - 1.0) > 1e-6)
    throw std::invalid_argument("arm paddle: normal_local must be a unit vector");
  if (!(paddle.radius > 0.0))
    throw std::invalid_argument("arm paddle: radius must be positive");
}

Vec5 ArmParams::q_lower() const {
  Vec5 v;
  for (int i = 0; i < kArmDof; ++i) v(i) = joints[i].q_min;
  return v;
}

Vec5 ArmParams::q_upper() const {
  Vec5 v;
  for (int i = 0; i < kArmDof; ++i) v(i) = joints[i].q_max;
  return v;
}

double ArmParams::total_mass() const {
  double m = 0.0;
  for (const auto& j : joints) m += j.mass;
  return m;
}

double ArmParams::reach() const {
  double r = 0.0;
  for (const auto& j : joints) r += j.offset.norm();
  return r + paddle.center_offset.norm();
}

Frames compute_frames(const ArmParams& params, const Vec5& q) {
  Frames f;
  Mat3 R = Mat3::Identity();
  Vec3 o = Vec3::Zero();
  for (int i = 0; i < kArmDof; ++i) {
    const auto& j = params.joints[i];
    o += R * j.offset;
    f.origin[i] = o;
    f.axis[i] = R * j.axis;  // invariant under the joint's own rotation
    R = R * Eigen::AngleAxisd(q(i), j.axis).toRotationMatrix();
    f.rotation[i] = R;
  }
  f.paddle_center = o + R * params.paddle.center_offset;
  f.paddle_normal = (R * params.paddle.normal_local).normalized();
  return f;
}

Vec3 fk_paddle(const ArmParams& params, const Vec5& q) {
  return compute_frames(params, q).paddle_center;
}

Vec3 fk_normal_point(const ArmParams& params, const Vec5& q) {
  const Frames f = compute_frames(params, q);
  return f.paddle_center + f.paddle_normal;
}

Vec3 paddle_normal(const ArmParams& params, const Vec5& q) {
  return compute_frames(params, q).paddle_normal;
}

Mat35 jacobian(const ArmParams& params, const Vec5& q) {
  const Frames f = compute_frames(params, q);
  Mat35 J;
  for (int i = 0; i < kArmDof; ++i)
    J.col(i) = f.axis[i].cross(f.paddle_center - f.origin[i]);
  return J;
}

Mat35 normal_jacobian(const ArmParams& params, const Vec5& q) {
  const Frames f = compute_frames(params, q);
  Mat35 J;
  for (int i = 0; i < kArmDof; ++i) J.col(i) = f.axis[i].cross(f.paddle_normal);
  return J;
}

Mat35 velocity_gradient(const ArmParams& params, const Vec5& q, const Vec5& qd) {
  const Frames f = compute_frames(params, q);
  const Vec3 p = f.paddle_center;
  Mat35 W = Mat35::Zero();
  for (int j = 0; j < kArmDof; ++j) {
    Vec3 col = Vec3::Zero();
    for (int i = 0; i < kArmDof; ++i) {
      const Vec3& ai = f.axis[i];
      if (j <= i) {
        // dJ_i/dq_j for a joint at or above i in the chain
        col += qd(i) * ((f.axis[j].cross(ai)).cross(p - f.origin[i]) +
                        ai.cross(f.axis[j].cross(p - f.origin[i])));
      } else {
        col += qd(i) * ai.cross(f.axis[j].cross(p - f.origin[j]));
      }
    }
    W.col(j) = col;
  }
  return W;
}

Vec5 inverse_dynamics(const ArmParams& params, const Vec5& q, const Vec5& qd,
                      const Vec5& qdd, const Vec3& gravity) {
  // Recursive Newton-Euler in link coordinates; the base "accelerates"
  // against gravity so gravity wrenches fall out of the recursion.
  std::array<Mat3, kArmDof> E;   // rotation child->parent
  std::array<Vec3, kArmDof> w, wd, a;
  std::array<Vec3, kArmDof> F, N;

  Vec3 w_p = Vec3::Zero(), wd_p = Vec3::Zero(), a_p = -gravity;
  for (int i = 0; i < kArmDof; ++i) {
    const auto& j = params.joints[i];
    E[i] = Eigen::AngleAxisd(q(i), j.axis).toRotationMatrix();
    const Mat3 Et = E[i].transpose();
    const Vec3 z = j.axis;  // same coordinates in child frame
    const Vec3 w_in = Et * w_p;
    w[i] = w_in + z * qd(i);
    wd[i] = Et * wd_p + z * qdd(i) + w_in.cross(z * qd(i));
    a[i] = Et * (a_p + wd_p.cross(j.offset) + w_p.cross(w_p.cross(j.offset)));

    const Vec3 a_com = a[i] + wd[i].cross(j.com) + w[i].cross(w[i].cross(j.com));
    F[i] = j.mass * a_com;
    N[i] = j.inertia * wd[i] + w[i].cross(j.inertia * w[i]);

    w_p = w[i];
    wd_p = wd[i];
    a_p = a[i];
  }

  Vec5 tau;
  Vec3 f_child = Vec3::Zero(), n_child = Vec3::Zero();
  for (int i = kArmDof - 1; i >= 0; --i) {
    const auto& j = params.joints[i];
    Vec3 f_i = F[i];
    Vec3 n_i = N[i] + j.com.cross(F[i]);
    if (i + 1 < kArmDof) {
      const Vec3 fc = E[i + 1] * f_child;
      f_i += fc;
      n_i += E[i + 1] * n_child + params.joints[i + 1].offset.cross(fc);
    }
    tau(i) = j.axis.dot(n_i) + j.rotor_inertia * qdd(i);
    f_child = f_i;
    n_child = n_i;
  }
  return tau;
}

DynamicsTerms dynamics_terms(const ArmParams& params, const Vec5& q, const Vec5& qd,
                             const Vec3& gravity) {
  DynamicsTerms t;
  const Vec5 zero = Vec5::Zero();
  const Vec5 g_hold = inverse_dynamics(params, q, zero, zero, gravity);
  for (int j = 0; j < kArmDof; ++j) {
    Vec5 e = Vec5::Zero();
    e(j) = 1.0;
    t.M.col(j) = inverse_dynamics(params, q, zero, e, gravity) - g_hold;
  }
  t.M = 0.5 * (t.M + t.M.transpose());  // symmetrize roundoff
  t.C = inverse_dynamics(params, q, qd, zero, gravity) - g_hold;
  t.tau_g = -g_hold;
  return t;
}

double potential_energy(const ArmParams& params, const Vec5& q, const Vec3& gravity) {
  const Frames f = compute_frames(params, q);
  double V = 0.0;
  for (int i = 0; i < kArmDof; ++i) {
    const Vec3 com_w = f.origin[i] + f.rotation[i] * params.joints[i].com;
    V -= params.joints[i].mass * gravity.dot(com_w);
  }
  return V;
}

double kinetic_energy(const ArmParams& params, const Vec5& q, const Vec5& qd) {
  // Independent world-frame formulation (not via RNEA): sum over links of
  // translational + rotational energy, plus rotor terms.
  const Frames f = compute_frames(params, q);
  double T = 0.0;
  Vec3 w = Vec3::Zero();
  for (int i = 0; i < kArmDof; ++i) {
    w += f.axis[i] * qd(i);  // angular velocity of link i in world frame
    const Vec3 com_w = f.origin[i] + f.rotation[i] * params.joints[i].com;
    Vec3 v = Vec3::Zero();
    for (int j = 0; j <= i; ++j)
      v += qd(j) * f.axis[j].cross(com_w - f.origin[j]);
    const Mat3 I_w = f.rotation[i] * params.joints[i].inertia * f.rotation[i].transpose();
    T += 0.5 * params.joints[i].mass * v.squaredNorm() + 0.5 * w.dot(I_w * w);
    T += 0.5 * params.joints[i].rotor_inertia * qd(i) * qd(i);
  }
  return T;
}

}  // namespace ttswing::arm
