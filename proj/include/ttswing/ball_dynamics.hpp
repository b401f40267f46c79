#pragma once

#include <string>
#include <vector>

#include "ttswing/types.hpp"

namespace ttswing::ball {

struct BallState {
  double t = 0.0;
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
};

// Lumped flight/bounce parameters: a = -drag*|v|*v + g, and the bounce
// maps (vx, vy, vz) -> (c_h*vx, c_h*vy, -c_v*vz).
struct AeroParams {
  double drag = 0.12;  // 1/m
  double c_h = 0.75;
  double c_v = 0.88;
  Vec3 gravity{0.0, 0.0, -9.81};
  void validate() const;  // throws std::invalid_argument
};

// World frame sits at the shoulder: +X toward the launcher, +Z up.
// The table surface spans x in [table_x0, table_x0 + extents.x()],
// y in [-extents.y()/2, extents.y()/2] at height z_table.
struct TableGeometry {
  double z_table = -0.5;
  double x_strike = 0.0;
  double table_x0 = 0.4;
  Vec2 extents{2.74, 1.525};
  Vec3 bounds_lo{-1.5, -3.0, -2.0};
  Vec3 bounds_hi{5.0, 3.0, 3.0};
  bool on_table(const Vec3& p) const;
  bool in_bounds(const Vec3& p) const;
  void validate() const;
};

Vec3 flight_accel(const Vec3& v, const AeroParams& params);
// Requires v_pre.z() < 0 (ball moving into the table), else throws.
Vec3 bounce_map(const Vec3& v_pre, const AeroParams& params);

enum class EventType { Bounce, Crossing, OutOfBounds };

struct FlightEvent {
  EventType type;
  double t;
  Vec3 p;
  Vec3 v_pre;
  Vec3 v_post;  // == v_pre except for bounces
};

// Row tags for trajectory output; Bounce rows carry the pre-impact
// velocity and are followed by a BouncePost row at the same time.
enum class SampleTag { None, Bounce, BouncePost, Crossing, OutOfBounds, NoCrossing };

struct FlightSample {
  BallState state;
  SampleTag tag = SampleTag::None;
};

const char* tag_name(SampleTag tag);

struct IntegrateOptions {
  double dt = 1.0 / 480.0;
  double horizon = 2.0;
  bool stop_at_crossing = false;
  double event_time_tol = 1e-6;  // seconds
  void validate() const;
};

struct FlightResult {
  std::vector<FlightSample> samples;
  std::vector<FlightEvent> events;
  bool crossed = false;
  bool out_of_bounds = false;
  bool no_crossing = false;
  BallState crossing;  // valid iff crossed
};

// Fixed-step RK4 with bisection event localization (bounce, strike-plane
// crossing, bounding box). Events are located to within event_time_tol.
FlightResult integrate(const BallState& s0, const AeroParams& params,
                       const TableGeometry& geom, const IntegrateOptions& opt = {});

// Single RK4 step of the flight dynamics (no events).
BallState rk4_step(const BallState& s, double dt, const AeroParams& params);

// ---- parameter fitting -------------------------------------------------

struct PositionSample {
  double t;
  Vec3 p;
};
using PositionTrack = std::vector<PositionSample>;

enum class FitStatus { Ok, InsufficientData, InsufficientExcitation };

struct DragFit {
  FitStatus status = FitStatus::InsufficientData;
  double drag = 0.0;
  double residual_rms = 0.0;  // |a_meas - a_model| RMS over used samples
  int samples_used = 0;
};

struct DiffOptions {
  double stencil_dt = 0.06;  // half-width of the central-difference stencil
  double min_speed = 0.5;    // samples below this speed are dropped
  void validate() const;
};

// Least squares on a = -D|v|v + g from position-only tracks (central
// differences for v and a). Tracks must not contain bounces.
DragFit fit_drag(const std::vector<PositionTrack>& tracks, const Vec3& gravity,
                 const DiffOptions& opt = {});

struct BouncePair {
  Vec3 v_pre;
  Vec3 v_post;
};

struct BounceFit {
  // Separate statuses: a stack of pure vertical drops identifies c_v but
  // leaves c_h unidentifiable (and vice versa).
  FitStatus status_h = FitStatus::InsufficientData;
  FitStatus status_v = FitStatus::InsufficientData;
  double c_h = 0.0;
  double c_v = 0.0;
  double residual_h = 0.0;
  double residual_v = 0.0;
  int pairs_used = 0;
};

// Independent least squares for the horizontal retention and vertical
// restitution factors from pre/post bounce velocity pairs.
BounceFit fit_bounce(const std::vector<BouncePair>& pairs);

}  // namespace ttswing::ball
