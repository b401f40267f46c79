#include "ttswing/ball_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ttswing::ball {

void AeroParams::validate() const {
  if (!(drag >= 0.0) || !std::isfinite(drag))
    throw std::invalid_argument("aero: drag must be finite and >= 0");
  if (!(c_h > 0.0 && c_h <= 1.0))
    throw std::invalid_argument("aero: c_h must be in (0, 1]");
  if (!(c_v > 0.0 && c_v <= 1.0))
    throw std::invalid_argument("aero: c_v must be in (0, 1]");
  if (!gravity.allFinite())
    throw std::invalid_argument("aero: gravity must be finite");
}

bool TableGeometry::on_table(const Vec3& p) const {
  return p.x() >= table_x0 && p.x() <= table_x0 + extents.x() &&
         std::abs(p.y()) <= 0.5 * extents.y();
}

bool TableGeometry::in_bounds(const Vec3& p) const {
  return (p.array() >= bounds_lo.array()).all() &&
         (p.array() <= bounds_hi.array()).all();
}

void TableGeometry::validate() const {
  if (!(extents.array() > 0.0).all())
    throw std::invalid_argument("table: extents must be positive");
  if (!(bounds_lo.array() < bounds_hi.array()).all())
    throw std::invalid_argument("table: bounds_lo must be < bounds_hi");
  if (z_table < bounds_lo.z() || z_table > bounds_hi.z())
    throw std::invalid_argument("table: z_table outside bounds");
}

void IntegrateOptions::validate() const {
  if (!(dt > 0.0) || !(horizon > 0.0))
    throw std::invalid_argument("integrate: dt and horizon must be positive");
  if (!(event_time_tol > 0.0))
    throw std::invalid_argument("integrate: event_time_tol must be positive");
}

void DiffOptions::validate() const {
  if (!(stencil_dt > 0.0))
    throw std::invalid_argument("fit_drag: stencil_dt must be positive");
  if (!(min_speed >= 0.0))
    throw std::invalid_argument("fit_drag: min_speed must be >= 0");
}

Vec3 flight_accel(const Vec3& v, const AeroParams& params) {
  return -params.drag * v.norm() * v + params.gravity;
}

Vec3 bounce_map(const Vec3& v_pre, const AeroParams& params) {
  if (!(v_pre.z() < 0.0))
    throw std::invalid_argument("bounce_map: incoming vertical velocity must be negative");
  return {params.c_h * v_pre.x(), params.c_h * v_pre.y(), -params.c_v * v_pre.z()};
}

const char* tag_name(SampleTag tag) {
  switch (tag) {
    case SampleTag::None: return "";
    case SampleTag::Bounce: return "bounce";
    case SampleTag::BouncePost: return "bounce_post";
    case SampleTag::Crossing: return "crossing";
    case SampleTag::OutOfBounds: return "out_of_bounds";
    case SampleTag::NoCrossing: return "no_crossing";
  }
  return "";
}

BallState rk4_step(const BallState& s, double dt, const AeroParams& params) {
  auto acc = [&](const Vec3& v) { return flight_accel(v, params); };
  const Vec3 k1p = s.v, k1v = acc(s.v);
  const Vec3 k2p = s.v + 0.5 * dt * k1v, k2v = acc(Vec3(s.v + 0.5 * dt * k1v));
  const Vec3 k3p = s.v + 0.5 * dt * k2v, k3v = acc(Vec3(s.v + 0.5 * dt * k2v));
  const Vec3 k4p = s.v + dt * k3v, k4v = acc(Vec3(s.v + dt * k3v));
  BallState out;
  out.t = s.t + dt;
  out.p = s.p + dt / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
  out.v = s.v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
  return out;
}

namespace {

// Bisect tau in (0, h] where indicator flips from from-sign at tau=0 to the
// opposite sign at tau=h. Returns the upper end of the final bracket so the
// returned state satisfies the post-event condition.
template <typename Indicator>
double bisect_event(const BallState& y0, double h, const AeroParams& params,
                    double tol, Indicator ind) {
  double lo = 0.0, hi = h;
  const bool sign_lo = ind(y0);
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (ind(rk4_step(y0, mid, params)) == sign_lo)
      lo = mid;
    else
      hi = mid;
  }
  return hi;
}

struct Candidate {
  bool found = false;
  double tau = 0.0;
  EventType type{};
};

}  // namespace

FlightResult integrate(const BallState& s0, const AeroParams& params,
                       const TableGeometry& geom, const IntegrateOptions& opt) {
  params.validate();
  geom.validate();
  opt.validate();
  if (!s0.p.allFinite() || !s0.v.allFinite())
    throw std::invalid_argument("integrate: initial state must be finite");

  FlightResult res;
  BallState y = s0;
  res.samples.push_back({y, SampleTag::None});
  if (!geom.in_bounds(y.p)) {
    res.out_of_bounds = true;
    res.samples.back().tag = SampleTag::OutOfBounds;
    res.events.push_back({EventType::OutOfBounds, y.t, y.p, y.v, y.v});
    res.no_crossing = !res.crossed;
    return res;
  }

  const double t_end = s0.t + opt.horizon;
  const long n_steps = static_cast<long>(std::ceil(opt.horizon / opt.dt - 1e-12));
  bool stopped = false;

  for (long i = 0; i < n_steps && !stopped; ++i) {
    double t_next = std::min(s0.t + (i + 1) * opt.dt, t_end);
    // Process the step, handling any events inside it in time order.
    while (y.t < t_next - 1e-15 && !stopped) {
      const double h = t_next - y.t;
      const BallState y1 = rk4_step(y, h, params);

      Candidate best;
      auto consider = [&](bool cond, EventType type, auto ind) {
        if (!cond) return;
        const double tau = bisect_event(y, h, params, opt.event_time_tol, ind);
        if (!best.found || tau < best.tau) best = {true, tau, type};
      };
      const bool falling_through =
          y.p.z() >= geom.z_table && y1.p.z() < geom.z_table && y.v.z() < 0.0;
      consider(falling_through, EventType::Bounce,
               [&](const BallState& s) { return s.p.z() >= geom.z_table; });
      consider(y.p.x() > geom.x_strike && y1.p.x() <= geom.x_strike,
               EventType::Crossing,
               [&](const BallState& s) { return s.p.x() > geom.x_strike; });
      consider(!geom.in_bounds(y1.p), EventType::OutOfBounds,
               [&](const BallState& s) { return geom.in_bounds(s.p); });

      if (!best.found) {
        y = y1;
        break;
      }

      BallState ye = rk4_step(y, best.tau, params);
      switch (best.type) {
        case EventType::Bounce:
          if (geom.on_table(ye.p)) {
            const Vec3 v_post = bounce_map(ye.v, params);
            ye.p.z() = geom.z_table;
            res.events.push_back({EventType::Bounce, ye.t, ye.p, ye.v, v_post});
            res.samples.push_back({ye, SampleTag::Bounce});
            ye.v = v_post;
            res.samples.push_back({ye, SampleTag::BouncePost});
          }
          // Off the table the ball keeps falling; the bounding box below
          // the table catches it eventually.
          y = ye;
          break;
        case EventType::Crossing: {
          res.events.push_back({EventType::Crossing, ye.t, ye.p, ye.v, ye.v});
          res.samples.push_back({ye, SampleTag::Crossing});
          if (!res.crossed) {
            res.crossed = true;
            res.crossing = ye;
          }
          if (opt.stop_at_crossing) stopped = true;
          y = ye;
          break;
        }
        case EventType::OutOfBounds:
          res.events.push_back({EventType::OutOfBounds, ye.t, ye.p, ye.v, ye.v});
          res.samples.push_back({ye, SampleTag::OutOfBounds});
          res.out_of_bounds = true;
          stopped = true;
          y = ye;
          break;
      }
    }
    if (!stopped && y.t >= t_next - 1e-15) res.samples.push_back({y, SampleTag::None});
  }

  res.no_crossing = !res.crossed;
  if (res.no_crossing && !res.samples.empty() && !res.out_of_bounds)
    res.samples.back().tag = SampleTag::NoCrossing;
  return res;
}

DragFit fit_drag(const std::vector<PositionTrack>& tracks, const Vec3& gravity,
                 const DiffOptions& opt) {
  opt.validate();
  DragFit fit;
  double swm = 0.0, sww = 0.0;  // sum m.w and w.w over used samples
  struct Used {
    Vec3 m, w;
  };
  std::vector<Used> used;
  for (const auto& track : tracks) {
    const int n = static_cast<int>(track.size());
    if (n < 3) continue;
    double med_dt = 0.0;
    {
      std::vector<double> dts;
      for (int i = 1; i < n; ++i) dts.push_back(track[i].t - track[i - 1].t);
      std::nth_element(dts.begin(), dts.begin() + dts.size() / 2, dts.end());
      med_dt = dts[dts.size() / 2];
    }
    if (!(med_dt > 0.0)) continue;
    const int k = std::max(1, static_cast<int>(std::lround(opt.stencil_dt / med_dt)));
    for (int i = k; i + k < n; ++i) {
      const auto &s1 = track[i - k], &s2 = track[i], &s3 = track[i + k];
      const double h1 = s2.t - s1.t, h2 = s3.t - s2.t;
      if (!(h1 > 0.0) || !(h2 > 0.0)) continue;
      // Nonuniform 3-point first/second derivatives at the middle sample.
      const Vec3 v = -h2 / (h1 * (h1 + h2)) * s1.p +
                     (h2 - h1) / (h1 * h2) * s2.p +
                     h1 / (h2 * (h1 + h2)) * s3.p;
      const Vec3 a = 2.0 / (h1 * (h1 + h2)) * s1.p - 2.0 / (h1 * h2) * s2.p +
                     2.0 / (h2 * (h1 + h2)) * s3.p;
      if (v.norm() < opt.min_speed) continue;
      const Vec3 w = v.norm() * v;   // regressor: a - g = -D * w
      const Vec3 m = a - gravity;
      swm += m.dot(w);
      sww += w.squaredNorm();
      used.push_back({m, w});
    }
  }
  fit.samples_used = static_cast<int>(used.size());
  if (fit.samples_used < 8) {
    fit.status = FitStatus::InsufficientData;
    return fit;
  }
  if (sww < 1e-9) {
    fit.status = FitStatus::InsufficientExcitation;
    return fit;
  }
  fit.drag = -swm / sww;
  double ss = 0.0;
  for (const auto& u : used) ss += (u.m + fit.drag * u.w).squaredNorm();
  fit.residual_rms = std::sqrt(ss / (3.0 * fit.samples_used));
  fit.status = FitStatus::Ok;
  return fit;
}

BounceFit fit_bounce(const std::vector<BouncePair>& pairs) {
  BounceFit fit;
  fit.pairs_used = static_cast<int>(pairs.size());
  if (pairs.empty()) return fit;

  double shh = 0.0, shp = 0.0, svv = 0.0, svp = 0.0;
  for (const auto& pr : pairs) {
    shh += pr.v_pre.head<2>().squaredNorm();
    shp += pr.v_pre.head<2>().dot(pr.v_post.head<2>());
    svv += pr.v_pre.z() * pr.v_pre.z();
    svp += pr.v_pre.z() * pr.v_post.z();
  }
  if (shh > 1e-9) {
    fit.c_h = shp / shh;
    double ss = 0.0;
    for (const auto& pr : pairs)
      ss += (pr.v_post.head<2>() - fit.c_h * pr.v_pre.head<2>()).squaredNorm();
    fit.residual_h = std::sqrt(ss / (2.0 * pairs.size()));
    fit.status_h = FitStatus::Ok;
  } else {
    fit.status_h = FitStatus::InsufficientExcitation;
  }
  if (svv > 1e-9) {
    fit.c_v = -svp / svv;
    double ss = 0.0;
    for (const auto& pr : pairs) {
      const double r = pr.v_post.z() + fit.c_v * pr.v_pre.z();
      ss += r * r;
    }
    fit.residual_v = std::sqrt(ss / pairs.size());
    fit.status_v = FitStatus::Ok;
  } else {
    fit.status_v = FitStatus::InsufficientExcitation;
  }
  return fit;
}

}  // namespace ttswing::ball
