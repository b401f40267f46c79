#pragma once

#include <string>
#include <vector>

#include "ttswing/arm_model.hpp"
#include "ttswing/ball_dynamics.hpp"
#include "ttswing/ball_prediction.hpp"
#include "ttswing/collision_model.hpp"
#include "ttswing/mpc_controller.hpp"
#include "ttswing/plant_sim.hpp"
#include "ttswing/rng.hpp"

namespace ttswing::harness {

// Simulated launcher. Each throw is aimed ballistically at a table bounce
// target so the whole 4-6 m/s speed band lands one bounce ~0.25 s before
// reaching the strike plane (a fixed elevation cannot: slow balls bounce
// twice, fast ones fly long).
struct LaunchDistribution {
  Vec3 p_mean{2.4, 0.0, -0.2};   // launcher side, table height + 0.3 m
  double p_jitter = 0.05;        // +- uniform per axis, m
  double speed_lo = 4.0;
  double speed_hi = 6.0;
  double cone_deg = 5.0;         // half-angle jitter about the aimed direction
  Vec2 bounce_target{1.0, 0.0};  // (x, y) spot on the table the launcher aims at

  void validate() const;  // throws std::invalid_argument
};

ball::BallState sample_launch(Rng& rng, const LaunchDistribution& dist,
                              const ball::TableGeometry& geom);

// Everything one batch of trials depends on; aggregates are a pure function
// of (scenario, seed). aero_model may differ from aero_true to probe
// prediction-model error.
struct Scenario {
  LaunchDistribution launch;
  ball::AeroParams aero_true;
  ball::AeroParams aero_model;
  ball::TableGeometry geom;
  pred::NoiseModel noise;
  pred::PredictorConfig predictor;
  strike::SwingSpec swing = strike::SwingSpec::loop();
  strike::ContactParams contact;
  mpc::MpcConfig mpc;
  plant::ClosedLoopConfig plant;
  arm::JointState ready{(Vec5() << 0.8, -0.5, 0.0, -0.5, 0.0).finished(), Vec5::Zero()};
  int trials = 150;
  uint64_t seed = 0;

  void validate() const;  // throws std::invalid_argument
};

struct TrialResult {
  int trial = 0;
  bool crossed = false;     // the true ball reached the strike plane
  bool hit = false;         // p_err <= paddle radius and approaching contact
  bool contact_ok = false;  // approaching at the crossing
  double p_err = 0.0;       // paddle center to ball center at the crossing, m
  double t_strike_true = 0.0;
  strike::StrikeScore score;  // meaningful when contact_ok
  Vec3 ball_v_in = Vec3::Zero();
  Vec3 ball_v_out = Vec3::Zero();  // zero unless contact_ok
  Vec3 p_ball = Vec3::Zero();
  Vec3 p_paddle = Vec3::Zero();
  int solves_attempted = 0;
  int solves_converged = 0;
  double median_solve_ms = 0.0;
  int saturated_ticks = 0;
  std::string error;  // non-empty when the trial threw; the batch continues
};

struct TrialAggregate {
  int trials = 0;
  int crossed = 0;  // hit-rate denominator
  int errors = 0;
  int hits = 0;
  double hit_rate = 0.0;
  double mean_p_err = 0.0;    // over crossed trials
  double median_p_err = 0.0;
  double exit_within_2mps = 0.0;   // fraction of contacts, |exit mag err| < 2 m/s
  double exit_within_10deg = 0.0;  // fraction of contacts, both exit angles < 10 deg
  double convergence_ratio = 0.0;  // pooled over all solves
  double median_solve_ms = 0.0;
};

struct TrialReport {
  std::vector<TrialResult> results;
  TrialAggregate aggregate;
};

// One full trial: simulate the ball, stream noisy observations through the
// predictor, replan + execute on the simulated plant, apply the contact map
// at the true crossing, score. Exceptions are captured into result.error.
TrialResult run_trial(const arm::ArmParams& arm, const Scenario& sc, int trial);

// All trials plus an order-independent aggregate.
TrialReport run_trials(const arm::ArmParams& arm, const Scenario& sc);

TrialAggregate aggregate(const std::vector<TrialResult>& results);

void write_trials_csv(const std::string& path, const TrialReport& rep);
// p_err histogram over crossed trials (fixed-width bins from zero).
void write_hit_histogram_csv(const std::string& path, const TrialReport& rep,
                             double bin_width = 0.01);

// ---- replan benchmark (Table-I-shaped) ------------------------------------

// One synthesized prediction stream: the replayed noisy predictor output and
// the true crossing replayed as a constant ("fixed strike conditions").
struct StreamSet {
  std::vector<mpc::PredictionUpdate> replayed;
  pred::StrikePrediction fixed;
};

// Deterministic in (sc.seed); skips launches that never cross the plane.
std::vector<StreamSet> make_prediction_streams(const Scenario& sc, int count);

struct BenchCell {
  mpc::Mode mode = mpc::Mode::FH;
  std::string variant;  // fixed | replayed | cold
  int streams = 0;
  int attempted = 0;
  int converged = 0;
  double convergence_ratio = 0.0;
  double median_solve_ms = 0.0;
  long total_qp_iterations = 0;
};

struct BenchReport {
  std::vector<BenchCell> cells;  // FH/SH x fixed/replayed/cold
  const BenchCell& cell(mpc::Mode mode, const std::string& variant) const;
};

// Runs the 2x3 grid over the same streams: fixed replaces each update's
// prediction with the stream's true crossing; cold drops solver memory
// before every solve.
BenchReport bench_mpc(const arm::ArmParams& arm, const Scenario& sc,
                      const std::vector<StreamSet>& streams);

// include_timing keeps byte-identical output possible when timings are off.
void write_bench_csv(const std::string& path, const BenchReport& rep, bool include_timing);
std::string format_bench(const BenchReport& rep);

}  // namespace ttswing::harness
