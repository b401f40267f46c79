#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "ttswing/mpc_controller.hpp"
#include "ttswing/rng.hpp"

using namespace ttswing;
using namespace ttswing::mpc;

namespace {

const Vec5 kReady = (Vec5() << 0.8, -0.5, 0.0, -0.5, 0.0).finished();

// a reachable strike: paddle pose at a mid-workspace configuration, hitting
// along its own normal so the terminal set is nonempty by construction
struct TestStrike {
  Vec3 p_des;
  strike::SwingSpec spec;
  pred::StrikePrediction prediction(double t_strike) const {
    pred::StrikePrediction pr;
    pr.valid = true;
    pr.p_des = p_des;
    pr.t_strike = t_strike;
    pr.v_at_plane = Vec3(-5.0, 0.3, -1.0);
    return pr;
  }
};

TestStrike make_strike(const arm::ArmParams& params, double speed = 3.0) {
  const Vec5 qt = (Vec5() << 0.1, -0.4, 0.3, -0.7, 0.2).finished();
  const Vec3 n = arm::paddle_normal(params, qt);
  TestStrike s;
  s.p_des = arm::fk_paddle(params, qt);
  s.spec.theta_deg = strike::azimuth_deg(n);
  s.spec.phi_deg = strike::elevation_deg(n);
  s.spec.alpha_deg = s.spec.theta_deg;
  s.spec.beta_deg = s.spec.phi_deg;
  s.spec.speed = speed;
  return s;
}

MpcConfig make_config(Mode mode = Mode::FH) {
  MpcConfig cfg;
  cfg.mode = mode;
  return cfg;
}

// quintic test signal with analytic derivatives, one polynomial per joint
struct PolySignal {
  Eigen::Matrix<double, kArmDof, 6> c;  // q_i(t) = sum_k c(i,k) t^k
  Vec5 q(double t) const {
    Vec5 out;
    for (int i = 0; i < kArmDof; ++i) {
      double v = 0.0;
      for (int k = 5; k >= 0; --k) v = v * t + c(i, k);
      out(i) = v;
    }
    return out;
  }
  Vec5 qd(double t) const {
    Vec5 out;
    for (int i = 0; i < kArmDof; ++i) {
      double v = 0.0;
      for (int k = 5; k >= 1; --k) v = v * t + k * c(i, k);
      out(i) = v;
    }
    return out;
  }
  Vec5 qdd(double t) const {
    Vec5 out;
    for (int i = 0; i < kArmDof; ++i) {
      double v = 0.0;
      for (int k = 5; k >= 2; --k) v = v * t + k * (k - 1) * c(i, k);
      out(i) = v;
    }
    return out;
  }
};

PolySignal random_signal(Rng& rng, double scale) {
  PolySignal s;
  for (int i = 0; i < kArmDof; ++i)
    for (int k = 0; k < 6; ++k) s.c(i, k) = scale * rng.normal() / std::pow(3.0, k);
  return s;
}

PlannedTrajectory sampled_plan(const PolySignal& s, double t_start, double dt, int n) {
  PlannedTrajectory p;
  p.t_start = t_start;
  p.dt = dt;
  p.q.resize(kArmDof, n);
  p.qd.resize(kArmDof, n);
  p.qdd.resize(kArmDof, n);
  for (int j = 0; j < n; ++j) {
    const double t = t_start + j * dt;
    p.q.col(j) = s.q(t);
    p.qd.col(j) = s.qd(t);
    p.qdd.col(j) = s.qdd(t);
  }
  return p;
}

std::vector<PredictionUpdate> fixed_stream(const TestStrike& strike, double t_strike,
                                           double t0, double rate_hz) {
  std::vector<PredictionUpdate> stream;
  const double dt = 1.0 / rate_hz;
  for (double t = t0; t < t_strike - 0.02; t += dt) {
    PredictionUpdate u;
    u.t = t;
    u.prediction = strike.prediction(t_strike);
    u.prediction.t_pred = t;
    stream.push_back(u);
  }
  return stream;
}

std::vector<PredictionUpdate> noisy_stream(const TestStrike& strike, double t_strike,
                                           double t0, double rate_hz, uint64_t seed) {
  auto stream = fixed_stream(strike, t_strike, t0, rate_hz);
  Rng rng(seed, 0);
  Vec3 drift = Vec3::Zero();
  for (auto& u : stream) {
    drift += 0.002 * rng.normal3();  // random-walk target, mm-scale per update
    u.prediction.p_des += drift;
    u.prediction.t_strike += 0.002 * rng.normal();
  }
  return stream;
}

}  // namespace

TEST_CASE("smoothstep: boundary values and finite-difference derivatives") {
  CHECK(smoothstep(0.0) == 0.0);
  CHECK(smoothstep(1.0) == 1.0);
  CHECK(smoothstep_d(0.0) == 0.0);
  CHECK(smoothstep_d(1.0) == 0.0);
  CHECK(smoothstep_dd(0.0) == 0.0);
  CHECK(smoothstep_dd(1.0) == 0.0);
  CHECK(smoothstep(0.5) == doctest::Approx(0.5).epsilon(1e-15));

  const double h = 1e-6;
  for (double u = 0.1; u < 1.0; u += 0.2) {
    const double fd1 = (smoothstep(u + h) - smoothstep(u - h)) / (2 * h);
    const double fd2 = (smoothstep_d(u + h) - smoothstep_d(u - h)) / (2 * h);
    CHECK(smoothstep_d(u) == doctest::Approx(fd1).epsilon(1e-8));
    CHECK(smoothstep_dd(u) == doctest::Approx(fd2).epsilon(1e-6));
  }
  for (double u = 0.05; u < 1.0; u += 0.1) {
    CHECK(smoothstep(u) >= 0.0);
    CHECK(smoothstep(u) <= 1.0);
    CHECK(smoothstep_d(u) >= 0.0);  // monotone transition
  }
}

TEST_CASE("select_index: endpoint, cap, hold, and monotonicity") {
  MpcConfig cfg = make_config();
  const int ni = cfg.interp_nodes();
  CHECK(ni == 250);

  // swing start and strike time
  CHECK(select_index(0.0, cfg.t_swing, cfg, 0) == 0);
  CHECK(select_index(cfg.t_swing, cfg.t_swing, cfg, ni - 1) == ni);
  // before the swing window the raw index is negative -> clamp at 0
  CHECK(select_index(0.0, 2.0 * cfg.t_swing, cfg, 0) == 0);
  // forward jumps capped at s_max past the executed index
  CHECK(select_index(0.4, 0.5, cfg, 0) == cfg.s_max);
  CHECK(select_index(0.4, 0.5, cfg, 100) == 110);
  // raw index behind the executed one -> hold, never move backward
  CHECK(select_index(0.1, 0.5, cfg, 60) == 60);
  // saturation at the strike node
  CHECK(select_index(10.0, 0.5, cfg, ni) == ni);
  // rounding to the nearest node
  CHECK(select_index(0.2501, 0.5, cfg, 124) == 125);

  int i_prev = 0;
  int last = 0;
  for (double t = 0.0; t <= 0.8; t += cfg.interp_dt) {
    const int i = select_index(t, 0.55, cfg, i_prev);
    CHECK(i >= last);
    CHECK(i - i_prev <= cfg.s_max);
    CHECK(i <= ni);
    last = i;
    i_prev = i;
  }
  CHECK(last == ni);
}

TEST_CASE("densify: node-exact on the transcription grid, cubic-exact between nodes") {
  SUBCASE("aligned grids copy transcription nodes bitwise") {
    Rng rng(41, 0);
    ocp::OcpSolution sol;
    const int nodes = 13;
    const double ocp_dt = 0.010;  // 5 interpolation steps per interval
    sol.q.resize(kArmDof, nodes + 1);
    sol.qd.resize(kArmDof, nodes + 1);
    sol.qdd.resize(kArmDof, nodes);
    sol.q.col(0) = 0.3 * Vec5::NullaryExpr([&] { return rng.normal(); });
    sol.qd.col(0) = 0.5 * Vec5::NullaryExpr([&] { return rng.normal(); });
    for (int k = 0; k < nodes; ++k) {
      sol.qdd.col(k) = 2.0 * Vec5::NullaryExpr([&] { return rng.normal(); });
      // the transcription's semi-implicit step
      sol.q.col(k + 1) = sol.q.col(k) + ocp_dt * sol.qd.col(k);
      sol.qd.col(k + 1) = sol.qd.col(k) + ocp_dt * sol.qdd.col(k);
    }

    const double t_strike = 1.37;
    const double interp_dt = 0.002;
    const auto plan = densify(sol, t_strike, ocp_dt, interp_dt, 7);

    CHECK(plan.dt == interp_dt);
    CHECK(plan.source_id == 7);
    CHECK(plan.t_strike() == doctest::Approx(t_strike).epsilon(1e-12));
    CHECK(plan.cols() == nodes * 5 + 1);

    for (int k = 0; k <= nodes; ++k) {
      const int j = 5 * k;
      CHECK((plan.q.col(j) - sol.q.col(k)).norm() == 0.0);
      CHECK((plan.qd.col(j) - sol.qd.col(k)).norm() == 0.0);
    }
    // acceleration everywhere is the input of the interval in progress
    for (int j = 0; j < plan.cols(); ++j) {
      const int k = std::min(j / 5, nodes - 1);
      CHECK((plan.qdd.col(j) - sol.qdd.col(k)).norm() == 0.0);
    }
  }

  SUBCASE("misaligned grids reproduce a cubic exactly") {
    ocp::OcpSolution sol;
    const int nodes = 9;
    const double ocp_dt = 0.0173;  // deliberately not a multiple of interp_dt
    const double t_strike = 0.77;
    sol.q.resize(kArmDof, nodes + 1);
    sol.qd.resize(kArmDof, nodes + 1);
    sol.qdd.resize(kArmDof, nodes);
    Rng rng(43, 0);
    const Vec5 a = Vec5::NullaryExpr([&] { return rng.normal(); });
    const Vec5 b = Vec5::NullaryExpr([&] { return rng.normal(); });
    const Vec5 c = Vec5::NullaryExpr([&] { return rng.normal(); });
    const Vec5 d = Vec5::NullaryExpr([&] { return rng.normal(); });
    for (int k = 0; k <= nodes; ++k) {
      const double s = k * ocp_dt;
      sol.q.col(k) = a + b * s + c * s * s + d * s * s * s;
      sol.qd.col(k) = b + 2.0 * c * s + 3.0 * d * s * s;
      if (k < nodes) sol.qdd.col(k) = Vec5::NullaryExpr([&] { return rng.normal(); });
    }

    const double interp_dt = 0.002;
    const auto plan = densify(sol, t_strike, ocp_dt, interp_dt, 3);

    // spacing exact, span within one interpolation step of the horizon
    const double span = plan.t_end() - plan.t_start;
    CHECK(span <= nodes * ocp_dt + 1e-12);
    CHECK(span > nodes * ocp_dt - interp_dt);
    CHECK((plan.q.rightCols(1) - sol.q.rightCols(1)).norm() == 0.0);
    CHECK((plan.qd.rightCols(1) - sol.qd.rightCols(1)).norm() == 0.0);

    // cubic Hermite on node data is exact for cubic node data
    const double t0 = t_strike - nodes * ocp_dt;
    for (int j = 0; j < plan.cols(); ++j) {
      const double s = plan.t_start + j * plan.dt - t0;
      const Vec5 q_ref = a + b * s + c * s * s + d * s * s * s;
      const Vec5 qd_ref = b + 2.0 * c * s + 3.0 * d * s * s;
      CHECK((plan.q.col(j) - q_ref).norm() < 1e-10);
      CHECK((plan.qd.col(j) - qd_ref).norm() < 1e-10);
    }
  }
}

TEST_CASE("planned trajectory sampling: exact at nodes, exact on quadratic spans") {
  PlannedTrajectory p;
  p.t_start = 0.25;
  p.dt = 0.002;
  const int n = 40;
  p.q.resize(kArmDof, n);
  p.qd.resize(kArmDof, n);
  p.qdd.resize(kArmDof, n);
  // one global quadratic: q(t) = a + b t + 0.5 c t^2 (constant acceleration)
  Rng rng(42, 0);
  const Vec5 a = Vec5::NullaryExpr([&] { return rng.normal(); });
  const Vec5 b = Vec5::NullaryExpr([&] { return rng.normal(); });
  const Vec5 c = Vec5::NullaryExpr([&] { return rng.normal(); });
  for (int j = 0; j < n; ++j) {
    const double t = p.t_start + j * p.dt;
    p.q.col(j) = a + b * t + 0.5 * c * t * t;
    p.qd.col(j) = b + c * t;
    p.qdd.col(j) = c;
  }
  for (int j = 0; j < n; ++j) {
    const auto s = p.sample(p.t_start + j * p.dt);
    CHECK((s.q - p.q.col(j)).norm() == 0.0);
    CHECK((s.qd - p.qd.col(j)).norm() == 0.0);
  }
  Rng tr(43, 0);
  for (int trial = 0; trial < 25; ++trial) {
    const double t = tr.uniform(p.t_start, p.t_end());
    const auto s = p.sample(t);
    CHECK((s.q - (a + b * t + 0.5 * c * t * t)).norm() < 1e-12);
    CHECK((s.qd - (b + c * t)).norm() < 1e-12);
    CHECK((s.qdd - c).norm() < 1e-12);
  }
  // clamped beyond the ends
  const auto lo = p.sample(p.t_start - 1.0);
  CHECK((lo.q - p.q.col(0)).norm() == 0.0);
  const auto hi = p.sample(p.t_end() + 1.0);
  CHECK((hi.q - p.q.col(n - 1)).norm() == 0.0);
}

TEST_CASE("blend: identical plans pass through untouched") {
  Rng rng(44, 0);
  const auto sig = random_signal(rng, 0.4);
  const auto plan = sampled_plan(sig, 0.0, 0.002, 120);
  MpcConfig cfg = make_config();
  const auto out = blend(plan, plan, 0.08, cfg);
  CHECK_FALSE(out.clipped_blend);
  CHECK((out.q - plan.q).norm() == 0.0);
  CHECK((out.qd - plan.qd).norm() == 0.0);
  CHECK((out.qdd - plan.qdd).norm() == 0.0);
}

TEST_CASE("blend: matches the analytic S-curve composite and is impulse-free") {
  Rng rng(45, 0);
  const auto sa = random_signal(rng, 0.4);
  const auto sb = random_signal(rng, 0.4);
  const double dt = 0.002;
  const auto oldp = sampled_plan(sa, 0.0, dt, 150);
  const auto newp = sampled_plan(sb, 0.0, dt, 150);
  MpcConfig cfg = make_config();
  const double t_switch = 0.100;
  const double w = cfg.blend_duration;
  const auto out = blend(oldp, newp, t_switch, cfg);
  CHECK_FALSE(out.clipped_blend);

  for (int j = 0; j < out.cols(); ++j) {
    const double t = out.t_start + j * dt;
    Vec5 q_ref, qd_ref, qdd_ref;
    if (t <= t_switch + 1e-12) {
      q_ref = sa.q(t);
      qd_ref = sa.qd(t);
      qdd_ref = sa.qdd(t);
    } else if (t >= t_switch + w - 1e-12) {
      q_ref = sb.q(t);
      qd_ref = sb.qd(t);
      qdd_ref = sb.qdd(t);
    } else {
      const double u = (t - t_switch) / w;
      const double s = smoothstep(u), sd = smoothstep_d(u) / w,
                   sdd = smoothstep_dd(u) / (w * w);
      q_ref = (1 - s) * sa.q(t) + s * sb.q(t);
      qd_ref = (1 - s) * sa.qd(t) + s * sb.qd(t) + sd * (sb.q(t) - sa.q(t));
      qdd_ref = (1 - s) * sa.qdd(t) + s * sb.qdd(t) + 2 * sd * (sb.qd(t) - sa.qd(t)) +
                sdd * (sb.q(t) - sa.q(t));
    }
    CHECK((out.q.col(j) - q_ref).norm() < 1e-10);
    CHECK((out.qd.col(j) - qd_ref).norm() < 1e-10);
    CHECK((out.qdd.col(j) - qdd_ref).norm() < 1e-10);
  }

  // no impulse: discrete acceleration of the blended stream stays bounded by
  // the analytic acceleration scale, unlike a hard switch at t_switch
  double fd_max = 0.0, qdd_max = 0.0, hard_max = 0.0;
  for (int j = 1; j + 1 < out.cols(); ++j) {
    const double t = out.t_start + j * dt;
    fd_max = std::max(fd_max,
                      ((out.q.col(j + 1) - 2.0 * out.q.col(j) + out.q.col(j - 1)) / (dt * dt))
                          .cwiseAbs()
                          .maxCoeff());
    qdd_max = std::max(qdd_max, out.qdd.col(j).cwiseAbs().maxCoeff());
    const Vec5 hard = t <= t_switch ? sa.q(t) : sb.q(t);
    const Vec5 hm1 = t - dt <= t_switch ? sa.q(t - dt) : sb.q(t - dt);
    const Vec5 hp1 = t + dt <= t_switch ? sa.q(t + dt) : sb.q(t + dt);
    hard_max = std::max(hard_max, ((hp1 - 2.0 * hard + hm1) / (dt * dt)).cwiseAbs().maxCoeff());
  }
  CHECK(fd_max < 1.5 * qdd_max + 1.0);
  CHECK(hard_max > 5.0 * fd_max);  // the unblended switch is an impulse
}

TEST_CASE("blend: window clipped to the common span and flagged") {
  Rng rng(46, 0);
  const auto sig = random_signal(rng, 0.3);
  const auto oldp = sampled_plan(sig, 0.0, 0.002, 100);   // ends at 0.198
  const auto newp = sampled_plan(sig, 0.05, 0.002, 100);  // ends at 0.248
  MpcConfig cfg = make_config();

  // plans of equal length share the full phase span: nothing to clip
  const auto mid = blend(oldp, newp, 0.190, cfg);
  CHECK_FALSE(mid.clipped_blend);

  // window extending past the strike is cut short
  const auto tail = blend(oldp, newp, 0.240, cfg);  // window would reach 0.260
  CHECK(tail.clipped_blend);

  // old plan too short in phase to reach the window: hard switch
  const auto shortp = sampled_plan(sig, 0.1, 0.002, 30);  // phase span 0.058
  const auto out = blend(shortp, newp, 0.060, cfg);
  CHECK(out.clipped_blend);
  CHECK((out.q - newp.q).norm() == 0.0);

  // same, reversed roles: new plan starts after the window
  const auto far = sampled_plan(sig, 1.0, 0.002, 50);
  const auto out2 = blend(oldp, far, 0.190, cfg);
  CHECK(out2.clipped_blend);
  CHECK((out2.q - far.q).norm() == 0.0);
}

TEST_CASE("fh replans of an unchanged prediction are identical") {
  const auto params = arm::ArmParams::default_model();
  const auto strike = make_strike(params);
  MpcConfig cfg = make_config(Mode::FH);
  MpcController ctl(params, cfg);
  ctl.set_ready({kReady, Vec5::Zero()});

  const double t_strike = 0.55;
  arm::JointState current{kReady, Vec5::Zero()};
  const auto r1 = ctl.update(0.0, current, strike.prediction(t_strike), strike.spec);
  REQUIRE(r1.attempted);
  REQUIRE(r1.converged);
  (void)ctl.tick(0.012);  // adopt
  REQUIRE(ctl.has_plan());
  const PlannedTrajectory first = *ctl.plan();

  const auto r2 = ctl.update(0.05, current, strike.prediction(t_strike), strike.spec);
  REQUIRE(r2.converged);
  CHECK(r2.sqp_iterations <= 1);
  CHECK(r2.qp_iterations == 0);  // warm fixed point: no QP work
  (void)ctl.tick(0.062);
  const PlannedTrajectory second = *ctl.plan();

  REQUIRE(second.cols() == first.cols());
  CHECK((second.q - first.q).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((second.qd - first.qd).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((second.qdd - first.qdd).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("fh replan tracks a shifted target and meets the new terminal set") {
  const auto params = arm::ArmParams::default_model();
  auto strike = make_strike(params);
  MpcConfig cfg = make_config(Mode::FH);
  MpcController ctl(params, cfg);
  ctl.set_ready({kReady, Vec5::Zero()});

  const double t_strike = 0.55;
  arm::JointState current{kReady, Vec5::Zero()};
  auto pr = strike.prediction(t_strike);
  REQUIRE(ctl.update(0.0, current, pr, strike.spec).converged);
  (void)ctl.tick(0.012);

  pr.p_des += Vec3(0.0, 0.02, 0.02);  // ~3 cm shift mid-swing
  const auto rec = ctl.update(0.2, current, pr, strike.spec);
  REQUIRE(rec.attempted);
  REQUIRE(rec.converged);
  (void)ctl.tick(0.212);
  const PlannedTrajectory& plan = *ctl.plan();

  const int last = plan.cols() - 1;
  const Vec5 qf = plan.q.col(last);
  const Vec5 qdf = plan.qd.col(last);
  const auto dirs = strike::spec_to_terminal(strike.spec);
  CHECK((arm::fk_paddle(params, qf) - pr.p_des).norm() <=
        std::sqrt(cfg.ocp.eps_pos) + 1e-4);
  CHECK((arm::jacobian(params, qf) * qdf - dirs.v_des).norm() <=
        std::sqrt(cfg.ocp.eps_vel) + 1e-4);
  CHECK((arm::paddle_normal(params, qf) - dirs.o_des).norm() <=
        std::sqrt(cfg.ocp.eps_orient) + 1e-4);
}

TEST_CASE("sh horizons shrink with the remaining time at fixed node count") {
  const auto params = arm::ArmParams::default_model();
  const auto strike = make_strike(params);
  MpcConfig cfg = make_config(Mode::SH);
  MpcController ctl(params, cfg);
  ctl.set_ready({kReady, Vec5::Zero()});

  const double t_strike = 0.60;
  arm::JointState current{kReady, Vec5::Zero()};
  // inside the swing window: dt = remaining / nodes
  const auto r1 = ctl.update(0.20, current, strike.prediction(t_strike), strike.spec);
  REQUIRE(r1.attempted);
  CHECK(r1.ocp_dt == doctest::Approx(0.40 / cfg.ocp.nodes).epsilon(1e-12));
  const auto r2 = ctl.update(0.40, current, strike.prediction(t_strike), strike.spec);
  CHECK(r2.ocp_dt == doctest::Approx(0.20 / cfg.ocp.nodes).epsilon(1e-12));
  CHECK(r2.ocp_dt == doctest::Approx(0.5 * r1.ocp_dt).epsilon(1e-12));

  // before the swing window the horizon is pinned to the full swing
  MpcController ctl2(params, cfg);
  ctl2.set_ready({kReady, Vec5::Zero()});
  const auto r0 = ctl2.update(0.0, current, strike.prediction(0.8), strike.spec);
  CHECK(r0.ocp_dt == doctest::Approx(cfg.t_swing / cfg.ocp.nodes).epsilon(1e-12));

  // too late to replan: previous plan held
  const auto r3 = ctl.update(t_strike - 0.005, current, strike.prediction(t_strike), strike.spec);
  CHECK_FALSE(r3.attempted);
}

TEST_CASE("simulate_mpc: fixed conditions, fh warm") {
  const auto params = arm::ArmParams::default_model();
  const auto strike = make_strike(params, 6.0);
  MpcConfig cfg = make_config(Mode::FH);
  const double t_strike = 0.55;
  const auto stream = fixed_stream(strike, t_strike, 0.0, 120.0);
  const auto log = simulate_mpc(params, {kReady, Vec5::Zero()}, stream, strike.spec, cfg);

  REQUIRE(log.attempted > 50);
  CHECK(log.convergence_ratio >= 0.99);
  CHECK(log.t_strike == doctest::Approx(t_strike).epsilon(1e-9));

  // exact tick spacing, monotone capped indices ending on the strike node
  REQUIRE(log.tick_times.size() == log.indices.size());
  for (std::size_t k = 1; k < log.tick_times.size(); ++k) {
    CHECK(log.tick_times[k] - log.tick_times[k - 1] ==
          doctest::Approx(cfg.interp_dt).epsilon(1e-9));
    CHECK(log.indices[k] >= log.indices[k - 1]);
    CHECK(log.indices[k] - log.indices[k - 1] <= cfg.s_max);
  }
  CHECK(log.indices.back() == cfg.interp_nodes());

  // executed terminal setpoint reaches the strike pose
  const auto& sp = log.executed.back();
  const auto dirs = strike::spec_to_terminal(strike.spec);
  CHECK((arm::fk_paddle(params, sp.q) - strike.p_des).norm() < 0.02);
  CHECK((arm::jacobian(params, sp.q) * sp.qd - dirs.v_des).norm() < 0.3);
}

TEST_CASE("simulate_mpc: fh does less qp work than sh on a drifting target") {
  const auto params = arm::ArmParams::default_model();
  const auto strike = make_strike(params, 4.0);
  const double t_strike = 0.60;
  const auto stream = noisy_stream(strike, t_strike, 0.0, 120.0, 91);

  const auto fh = simulate_mpc(params, {kReady, Vec5::Zero()}, stream, strike.spec,
                               make_config(Mode::FH));
  const auto sh = simulate_mpc(params, {kReady, Vec5::Zero()}, stream, strike.spec,
                               make_config(Mode::SH));
  REQUIRE(fh.attempted > 30);
  REQUIRE(sh.attempted > 30);
  CHECK(fh.convergence_ratio >= 0.95);
  CHECK(sh.convergence_ratio >= 0.60);
  // FH re-solves a nearly unchanged problem; SH relinearizes a shrinking one
  CHECK(fh.total_qp_iterations < sh.total_qp_iterations);
}

TEST_CASE("simulate_mpc: warm starting beats cold restarts under a budget") {
  const auto params = arm::ArmParams::default_model();
  const auto strike = make_strike(params, 4.0);
  const double t_strike = 0.60;
  const auto stream = noisy_stream(strike, t_strike, 0.0, 120.0, 92);

  MpcConfig cfg = make_config(Mode::FH);
  cfg.solver.qp_iter_budget = 400;  // real-time envelope the warm solves fit in
  const auto warm = simulate_mpc(params, {kReady, Vec5::Zero()}, stream, strike.spec, cfg);
  const auto cold = simulate_mpc(params, {kReady, Vec5::Zero()}, stream, strike.spec, cfg, true);
  REQUIRE(warm.attempted == cold.attempted);
  CHECK(warm.convergence_ratio > cold.convergence_ratio);
  CHECK(warm.total_qp_iterations < cold.total_qp_iterations);
}

TEST_CASE("controller holds the ready pose until a plan exists") {
  const auto params = arm::ArmParams::default_model();
  MpcConfig cfg = make_config();
  MpcController ctl(params, cfg);
  ctl.set_ready({kReady, Vec5::Zero()});
  const auto sp = ctl.tick(0.0);
  CHECK((sp.q - kReady).norm() == 0.0);
  CHECK(sp.qd.norm() == 0.0);
  CHECK_FALSE(ctl.has_plan());

  // invalid prediction is ignored
  pred::StrikePrediction bad;
  bad.valid = false;
  const auto rec = ctl.update(0.0, {kReady, Vec5::Zero()}, bad, strike::SwingSpec::drive());
  CHECK_FALSE(rec.attempted);
}

TEST_CASE("config validation") {
  MpcConfig cfg = make_config();
  cfg.blend_duration = 0.001;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = make_config();
  cfg.s_max = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = make_config();
  cfg.t_swing = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
