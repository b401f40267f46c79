#include "ttswing/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "ttswing/csv.hpp"

namespace ttswing::harness {

namespace {

constexpr double kG = 9.81;  // launcher aim assumes nominal gravity

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

void LaunchDistribution::validate() const {
  if (p_jitter < 0.0) throw std::invalid_argument("launch: p_jitter must be >= 0");
  if (!(speed_lo > 0.0) || speed_hi < speed_lo)
    throw std::invalid_argument("launch: need 0 < speed_lo <= speed_hi");
  if (cone_deg < 0.0 || cone_deg >= 45.0)
    throw std::invalid_argument("launch: cone_deg must lie in [0, 45)");
  if (!(bounce_target.x() > 0.0) || !(p_mean.x() > bounce_target.x()))
    throw std::invalid_argument("launch: bounce target must sit between plane and launcher");
}

ball::BallState sample_launch(Rng& rng, const LaunchDistribution& dist,
                              const ball::TableGeometry& geom) {
  ball::BallState s;
  s.t = 0.0;
  for (int i = 0; i < 3; ++i)
    s.p(i) = dist.p_mean(i) + rng.uniform(-dist.p_jitter, dist.p_jitter);
  const double speed = rng.uniform(dist.speed_lo, dist.speed_hi);

  // drag-free aim dropping the ball on the bounce target
  const Vec2 dxy(dist.bounce_target.x() - s.p.x(), dist.bounce_target.y() - s.p.y());
  const double d = dxy.norm();
  const double drop = geom.z_table - s.p.z();  // negative: target below launch
  double vh = speed;
  double vz = 0.0;
  for (int it = 0; it < 3; ++it) {
    const double t_b = d / vh;
    vz = drop / t_b + 0.5 * kG * t_b;
    vh = std::sqrt(std::max(speed * speed - vz * vz, 0.25 * speed * speed));
  }
  Vec3 v = vh / d * Vec3(dxy.x(), dxy.y(), 0.0) + vz * Vec3::UnitZ();

  // area-uniform jitter within the cone about the aimed direction
  const double ang = deg2rad(dist.cone_deg) * std::sqrt(rng.uniform());
  const double psi = rng.uniform(0.0, 2.0 * kPi);
  const Vec3 dir = v.normalized();
  const Vec3 e1 = dir.unitOrthogonal();
  const Vec3 e2 = dir.cross(e1);
  const Vec3 axis = std::cos(psi) * e1 + std::sin(psi) * e2;
  s.v = Eigen::AngleAxisd(ang, axis) * v;
  return s;
}

void Scenario::validate() const {
  launch.validate();
  aero_true.validate();
  aero_model.validate();
  geom.validate();
  predictor.validate();
  swing.validate();
  contact.validate();
  mpc.validate();
  plant.validate();
  if (noise.sigma < 0.0) throw std::invalid_argument("scenario: noise sigma must be >= 0");
  if (!(noise.rate > 0.0)) throw std::invalid_argument("scenario: noise rate must be positive");
  if (trials < 1) throw std::invalid_argument("scenario: need at least one trial");
  if (std::abs(mpc.t_swing - swing.t_swing) > 1e-12)
    throw std::invalid_argument("scenario: mpc.t_swing must match swing.t_swing");
}

namespace {

// regular-cadence ground-truth states strictly before the crossing
std::vector<ball::BallState> observation_states(const ball::FlightResult& truth) {
  std::vector<ball::BallState> out;
  for (const auto& smp : truth.samples)
    if (smp.tag == ball::SampleTag::None && smp.state.t < truth.crossing.t)
      out.push_back(smp.state);
  return out;
}

ball::FlightResult simulate_truth(const Scenario& sc, const ball::BallState& s0) {
  ball::IntegrateOptions opt = sc.predictor.integ;
  opt.dt = 1.0 / sc.noise.rate;  // sample grid doubles as the camera cadence
  opt.horizon = 3.0;
  opt.stop_at_crossing = true;
  return ball::integrate(s0, sc.aero_true, sc.geom, opt);
}

}  // namespace

TrialResult run_trial(const arm::ArmParams& arm, const Scenario& sc, int trial) {
  TrialResult res;
  res.trial = trial;
  try {
    Rng rng(sc.seed, static_cast<uint64_t>(trial));
    const auto s0 = sample_launch(rng, sc.launch, sc.geom);
    const auto truth = simulate_truth(sc, s0);
    if (!truth.crossed) return res;
    res.crossed = true;
    res.t_strike_true = truth.crossing.t;
    res.p_ball = truth.crossing.p;
    res.ball_v_in = truth.crossing.v;

    std::vector<pred::Observation> obs;
    for (const auto& st : observation_states(truth))
      obs.push_back({st.t, st.p + sc.noise.sigma * rng.normal3()});

    pred::BallPredictor predictor(sc.aero_model, sc.geom, sc.predictor);
    mpc::MpcController ctl(arm, sc.mpc);
    ctl.set_ready(sc.ready);

    plant::ClosedLoopConfig pcfg = sc.plant;
    pcfg.disturbances.seed = rng.next();

    size_t next_obs = 0;
    std::vector<double> solve_ms;
    auto feed = [&](double t, const arm::JointState& state) {
      while (next_obs < obs.size() && obs[next_obs].t <= t + 1e-12) {
        if (const auto p = predictor.push(obs[next_obs])) {
          const auto rec = ctl.update(t, state, *p, sc.swing);
          if (rec.attempted) {
            ++res.solves_attempted;
            if (rec.converged) ++res.solves_converged;
            solve_ms.push_back(rec.solve_ms);
          }
        }
        ++next_obs;
      }
    };
    const auto log = plant::run_closed_loop(
        arm, arm, [&](double t) { return ctl.tick(t); }, sc.ready, 0.0, res.t_strike_true,
        pcfg, feed);
    res.saturated_ticks = log.saturated_ticks;
    res.median_solve_ms = median(solve_ms);

    const auto& snap = log.strike;
    res.p_paddle = snap.paddle_pos;
    res.p_err = (snap.paddle_pos - res.p_ball).norm();
    res.contact_ok = strike::approaching(res.ball_v_in, snap.paddle_vel, snap.paddle_normal);
    res.hit = res.contact_ok && res.p_err <= arm.paddle.radius;
    if (res.contact_ok) {
      res.ball_v_out =
          strike::exit_velocity(res.ball_v_in, snap.paddle_vel, snap.paddle_normal, sc.contact);
      const auto dirs = strike::spec_to_terminal(sc.swing);
      res.score = strike::score_strike({snap.paddle_pos, snap.paddle_vel, snap.paddle_normal},
                                       res.p_ball, dirs.v_des, dirs.o_des, res.ball_v_in,
                                       res.ball_v_out, sc.contact);
    }
  } catch (const std::exception& e) {
    res.error = e.what();
  }
  return res;
}

TrialReport run_trials(const arm::ArmParams& arm, const Scenario& sc) {
  sc.validate();
  TrialReport rep;
  rep.results.reserve(sc.trials);
  for (int i = 0; i < sc.trials; ++i) rep.results.push_back(run_trial(arm, sc, i));
  rep.aggregate = aggregate(rep.results);
  return rep;
}

TrialAggregate aggregate(const std::vector<TrialResult>& results) {
  TrialAggregate a;
  a.trials = static_cast<int>(results.size());
  std::vector<double> p_errs, medians;
  long attempted = 0, converged = 0;
  int contacts = 0, mag_ok = 0, dir_ok = 0;
  double p_err_sum = 0.0;
  for (const auto& r : results) {
    if (!r.error.empty()) ++a.errors;
    if (!r.crossed) continue;
    ++a.crossed;
    p_errs.push_back(r.p_err);
    p_err_sum += r.p_err;
    if (r.hit) ++a.hits;
    attempted += r.solves_attempted;
    converged += r.solves_converged;
    if (r.solves_attempted > 0) medians.push_back(r.median_solve_ms);
    if (r.contact_ok) {
      ++contacts;
      if (std::abs(r.score.exit_mag_err) < 2.0) ++mag_ok;
      if (std::max(std::abs(r.score.exit_vert_err), std::abs(r.score.exit_horiz_err)) < 10.0)
        ++dir_ok;
    }
  }
  if (a.crossed > 0) {
    a.hit_rate = double(a.hits) / a.crossed;
    a.mean_p_err = p_err_sum / a.crossed;
    a.median_p_err = median(p_errs);
  }
  if (contacts > 0) {
    a.exit_within_2mps = double(mag_ok) / contacts;
    a.exit_within_10deg = double(dir_ok) / contacts;
  }
  if (attempted > 0) a.convergence_ratio = double(converged) / attempted;
  a.median_solve_ms = median(medians);  // median of per-trial medians
  return a;
}

void write_trials_csv(const std::string& path, const TrialReport& rep) {
  csv::Writer w(path, "trials",
                {"trial",        "crossed",       "hit",           "contact_ok",
                 "p_err",        "t_strike",      "ball_x",        "ball_y",
                 "ball_z",       "paddle_x",      "paddle_y",      "paddle_z",
                 "vin_x",        "vin_y",         "vin_z",         "vout_x",
                 "vout_y",       "vout_z",        "v_err",         "alpha_err",
                 "beta_err",     "theta_err",     "phi_err",       "exit_mag_err",
                 "exit_vert_err", "exit_horiz_err", "solves",       "converged",
                 "saturated",    "error"});
  for (const auto& r : rep.results) {
    w.field(r.trial)
        .field(r.crossed)
        .field(r.hit)
        .field(r.contact_ok)
        .field(r.p_err)
        .field(r.t_strike_true)
        .fields(r.p_ball)
        .fields(r.p_paddle)
        .fields(r.ball_v_in)
        .fields(r.ball_v_out)
        .field(r.score.v_err)
        .field(r.score.alpha_err)
        .field(r.score.beta_err)
        .field(r.score.theta_err)
        .field(r.score.phi_err)
        .field(r.score.exit_mag_err)
        .field(r.score.exit_vert_err)
        .field(r.score.exit_horiz_err)
        .field(r.solves_attempted)
        .field(r.solves_converged)
        .field(r.saturated_ticks)
        .field(r.error);
    w.endrow();
  }
}

void write_hit_histogram_csv(const std::string& path, const TrialReport& rep,
                             double bin_width) {
  if (!(bin_width > 0.0)) throw std::invalid_argument("histogram: bin width must be positive");
  double maxe = 0.0;
  for (const auto& r : rep.results)
    if (r.crossed) maxe = std::max(maxe, r.p_err);
  const int bins = std::max(1, static_cast<int>(std::ceil(maxe / bin_width + 1e-12)));
  std::vector<int> count(bins, 0);
  for (const auto& r : rep.results)
    if (r.crossed)
      ++count[std::min(bins - 1, static_cast<int>(r.p_err / bin_width))];
  csv::Writer w(path, "hit-histogram", {"bin_lo", "bin_hi", "count"});
  for (int i = 0; i < bins; ++i) {
    w.field(i * bin_width).field((i + 1) * bin_width).field(count[i]);
    w.endrow();
  }
}

std::vector<StreamSet> make_prediction_streams(const Scenario& sc, int count) {
  sc.validate();
  if (count < 1) throw std::invalid_argument("streams: count must be positive");
  std::vector<StreamSet> out;
  // decorrelated from the trial substreams, which use stream = trial index
  constexpr uint64_t kStreamBase = 0x100000000ULL;
  for (int i = 0; static_cast<int>(out.size()) < count && i < 4 * count; ++i) {
    Rng rng(sc.seed, kStreamBase + i);
    const auto s0 = sample_launch(rng, sc.launch, sc.geom);
    const auto truth = simulate_truth(sc, s0);
    if (!truth.crossed) continue;

    StreamSet set;
    set.fixed.valid = true;
    set.fixed.p_des = truth.crossing.p;
    set.fixed.t_strike = truth.crossing.t;
    set.fixed.v_at_plane = truth.crossing.v;

    pred::BallPredictor predictor(sc.aero_model, sc.geom, sc.predictor);
    for (const auto& st : observation_states(truth)) {
      const pred::Observation o{st.t, st.p + sc.noise.sigma * rng.normal3()};
      if (const auto p = predictor.push(o)) set.replayed.push_back({o.t, *p});
    }
    if (set.replayed.size() < 5) continue;
    out.push_back(std::move(set));
  }
  return out;
}

const BenchCell& BenchReport::cell(mpc::Mode mode, const std::string& variant) const {
  for (const auto& c : cells)
    if (c.mode == mode && c.variant == variant) return c;
  throw std::out_of_range("bench: no cell " + std::string(mpc::mode_name(mode)) + "/" + variant);
}

BenchReport bench_mpc(const arm::ArmParams& arm, const Scenario& sc,
                      const std::vector<StreamSet>& streams) {
  if (streams.empty()) throw std::invalid_argument("bench: need at least one stream");
  BenchReport rep;
  for (const mpc::Mode mode : {mpc::Mode::FH, mpc::Mode::SH}) {
    for (const std::string variant : {"fixed", "replayed", "cold"}) {
      BenchCell cell;
      cell.mode = mode;
      cell.variant = variant;
      mpc::MpcConfig cfg = sc.mpc;
      cfg.mode = mode;
      std::vector<double> times;
      for (const auto& set : streams) {
        std::vector<mpc::PredictionUpdate> stream;
        if (variant == "fixed") {
          stream.reserve(set.replayed.size());
          for (const auto& u : set.replayed) stream.push_back({u.t, set.fixed});
        } else {
          stream = set.replayed;
        }
        const auto log =
            mpc::simulate_mpc(arm, sc.ready, stream, sc.swing, cfg, variant == "cold");
        cell.attempted += log.attempted;
        cell.converged += log.converged;
        cell.total_qp_iterations += log.total_qp_iterations;
        for (const auto& r : log.solves) times.push_back(r.solve_ms);
        ++cell.streams;
      }
      if (cell.attempted > 0)
        cell.convergence_ratio = double(cell.converged) / cell.attempted;
      cell.median_solve_ms = median(times);
      rep.cells.push_back(std::move(cell));
    }
  }
  return rep;
}

void write_bench_csv(const std::string& path, const BenchReport& rep, bool include_timing) {
  csv::Writer w(path, "bench",
                {"mode", "variant", "streams", "attempted", "converged", "convergence_ratio",
                 "median_solve_ms", "total_qp_iterations"});
  for (const auto& c : rep.cells) {
    w.field(std::string(mpc::mode_name(c.mode)))
        .field(c.variant)
        .field(c.streams)
        .field(c.attempted)
        .field(c.converged)
        .field(c.convergence_ratio)
        .field(include_timing ? c.median_solve_ms : 0.0)
        .field(c.total_qp_iterations);
    w.endrow();
  }
}

std::string format_bench(const BenchReport& rep) {
  std::string out = "mode  variant    streams  attempted  converged   ratio  median ms\n";
  char buf[128];
  for (const auto& c : rep.cells) {
    std::snprintf(buf, sizeof(buf), "%-4s  %-9s  %7d  %9d  %9d  %5.1f%%  %9.2f\n",
                  mpc::mode_name(c.mode), c.variant.c_str(), c.streams, c.attempted,
                  c.converged, 100.0 * c.convergence_ratio, c.median_solve_ms);
    out += buf;
  }
  return out;
}

}  // namespace ttswing::harness
