#include "ttswing/collision_model.hpp"

#include <cmath>
#include <stdexcept>

namespace ttswing::strike {

void SwingSpec::validate() const {
  auto in_range = [](double a) { return a >= -90.0 && a <= 90.0; };
  if (!in_range(theta_deg) || !in_range(phi_deg) || !in_range(alpha_deg) ||
      !in_range(beta_deg))
    throw std::invalid_argument("swing: angles must lie within +-90 degrees");
  if (!(speed > 0.0)) throw std::invalid_argument("swing: speed must be positive");
  if (!(t_swing > 0.0)) throw std::invalid_argument("swing: t_swing must be positive");
}

SwingSpec SwingSpec::drive(double speed, double t_swing) {
  return {0.0, 0.0, 0.0, 0.0, speed, t_swing};
}
SwingSpec SwingSpec::loop(double speed, double t_swing) {
  return {0.0, 45.0, 0.0, -7.0, speed, t_swing};
}
SwingSpec SwingSpec::chop(double speed, double t_swing) {
  return {0.0, -18.0, 0.0, 12.0, speed, t_swing};
}

void ContactParams::validate() const {
  if (!(e_n > 0.0) || e_n > 1.0 || !(k_t > 0.0) || k_t > 1.0)
    throw std::invalid_argument("contact: e_n and k_t must lie in (0, 1]");
}

double azimuth_deg(const Vec3& v) { return rad2deg(std::atan2(v.y(), v.x())); }

double elevation_deg(const Vec3& v) {
  return rad2deg(std::atan2(v.z(), std::hypot(v.x(), v.y())));
}

namespace {

Vec3 direction(double azimuth_deg_, double elevation_deg_) {
  const double az = deg2rad(azimuth_deg_), el = deg2rad(elevation_deg_);
  return {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
}

}  // namespace

StrikeDirections spec_to_terminal(const SwingSpec& spec, const Vec3& hit_dir) {
  spec.validate();
  if (hit_dir.head<2>().norm() < 1e-9)
    throw std::invalid_argument("swing: hit_dir must have a horizontal component");
  const double yaw = std::atan2(hit_dir.y(), hit_dir.x());
  const Mat3 R = Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
  StrikeDirections out;
  out.v_des = spec.speed * (R * direction(spec.theta_deg, spec.phi_deg));
  out.o_des = R * direction(spec.alpha_deg, spec.beta_deg);
  return out;
}

bool approaching(const Vec3& v_ball_in, const Vec3& v_paddle, const Vec3& normal) {
  return (v_ball_in - v_paddle).dot(normal) < 0.0;
}

Vec3 exit_velocity(const Vec3& v_ball_in, const Vec3& v_paddle, const Vec3& normal,
                   const ContactParams& cp) {
  cp.validate();
  const Vec3 n = normal.normalized();
  const Vec3 r = v_ball_in - v_paddle;
  if (!(r.dot(n) < 0.0)) throw std::domain_error("contact: ball is not approaching the paddle");
  const Vec3 r_n = r.dot(n) * n;
  const Vec3 r_t = r - r_n;
  return v_paddle - cp.e_n * r_n + cp.k_t * r_t;
}

StrikeScore score_strike(const PaddleState& measured, const Vec3& p_des, const Vec3& v_des,
                         const Vec3& o_des, const Vec3& v_ball_in, const Vec3& v_ball_out,
                         const ContactParams& cp) {
  StrikeScore s;
  s.p_err = (measured.p - p_des).norm();
  s.v_err = std::abs(measured.v.norm() - v_des.norm());
  s.alpha_err = std::abs(azimuth_deg(measured.n) - azimuth_deg(o_des));
  s.beta_err = std::abs(elevation_deg(measured.n) - elevation_deg(o_des));
  s.theta_err = std::abs(azimuth_deg(measured.v) - azimuth_deg(v_des));
  s.phi_err = std::abs(elevation_deg(measured.v) - elevation_deg(v_des));

  const Vec3 v_pred = exit_velocity(v_ball_in, v_des, o_des, cp);
  s.exit_mag_err = std::abs(v_ball_out.norm() - v_pred.norm());
  s.exit_vert_err = std::abs(elevation_deg(v_ball_out) - elevation_deg(v_pred));
  s.exit_horiz_err = std::abs(azimuth_deg(v_ball_out) - azimuth_deg(v_pred));
  return s;
}

ContactParams fit_contact(const std::vector<ContactSample>& samples) {
  if (samples.empty()) throw std::invalid_argument("contact fit: no samples");
  double nn = 0.0, nd = 0.0, tt = 0.0, td = 0.0;
  for (const auto& s : samples) {
    const Vec3 n = s.normal.normalized();
    const Vec3 r = s.v_ball_in - s.v_paddle;
    const Vec3 d = s.v_ball_out - s.v_paddle;
    const double rn = r.dot(n);
    const Vec3 r_t = r - rn * n;
    nn += rn * rn;
    nd += -d.dot(n) * rn;
    tt += r_t.squaredNorm();
    td += (d - d.dot(n) * n).dot(r_t);
  }
  if (nn < 1e-12 || tt < 1e-12)
    throw std::invalid_argument("contact fit: samples do not excite both components");
  ContactParams cp;
  cp.e_n = nd / nn;
  cp.k_t = td / tt;
  return cp;
}

}  // namespace ttswing::strike
