#pragma once

#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "ttswing/ball_dynamics.hpp"
#include "ttswing/types.hpp"

namespace ttswing::pred {

struct Observation {
  double t;
  Vec3 p;
};

enum class EstimateStatus { Ok, TooFewPoints, WindowTooLong, Degenerate };

struct StateEstimate {
  EstimateStatus status = EstimateStatus::TooFewPoints;
  ball::BallState state;  // at the newest observation time
};

// Per-axis cubic least squares over the window; position and velocity are
// the polynomial value and derivative at the newest sample.
StateEstimate estimate_state(std::span<const Observation> window);

struct StrikePrediction {
  bool valid = false;
  double t_pred = 0.0;   // time the estimate refers to
  Vec3 p_des = Vec3::Zero();
  double t_strike = 0.0;
  Vec3 v_at_plane = Vec3::Zero();
  int samples_used = 0;
};

// Forward-integrate the state estimate to the strike plane.
StrikePrediction predict_strike(const ball::BallState& s, const ball::AeroParams& params,
                                const ball::TableGeometry& geom,
                                const ball::IntegrateOptions& opt = {});

// Moving average (up to `window` most recent valid predictions) of p_des,
// t_strike, and v_at_plane.
StrikePrediction smooth(std::span<const StrikePrediction> history, int window = 10);

struct PredictorConfig {
  int window = 12;             // observations per cubic fit
  double max_window_span = 0.2;
  int smooth_window = 10;
  ball::IntegrateOptions integ;
  void validate() const;
};

// Streaming front end: feed observations, get smoothed strike predictions.
class BallPredictor {
 public:
  BallPredictor(const ball::AeroParams& params, const ball::TableGeometry& geom,
                const PredictorConfig& cfg = {});

  // Returns the smoothed prediction once enough observations have arrived
  // and the ball still heads for the plane; nullopt otherwise.
  std::optional<StrikePrediction> push(const Observation& obs);

  const StrikePrediction* last_raw() const {
    return history_.empty() ? nullptr : &history_.back();
  }
  double window_start_time() const {
    return window_.empty() ? 0.0 : window_.front().t;
  }
  void reset();

 private:
  ball::AeroParams params_;
  ball::TableGeometry geom_;
  PredictorConfig cfg_;
  std::deque<Observation> window_;
  std::vector<StrikePrediction> history_;
};

// ---- prediction error characterization ----------------------------------

struct NoiseModel {
  double sigma = 0.0005;  // per-axis position noise, meters
  double rate = 120.0;    // observations per second
};

struct ErrorSample {
  int trial;
  double time_to_strike;  // true t_strike - t_pred
  double p_err;           // |predicted p_des - true crossing point|
  double t_err;           // |predicted t_strike - true t_strike|
  bool after_bounce;      // estimate window lies entirely after the bounce
};

struct CharacterizeResult {
  std::vector<ErrorSample> samples;
  int trials_used = 0;   // trials whose true trajectory crosses the plane
  int trials_total = 0;
};

// Simulates noisy observation streams of ground-truth trajectories and
// records prediction error against the true plane crossing. model_params
// may differ from true_params to probe model error. Deterministic in seed.
CharacterizeResult characterize_errors(const std::vector<ball::BallState>& launches,
                                       const ball::AeroParams& true_params,
                                       const ball::AeroParams& model_params,
                                       const ball::TableGeometry& geom,
                                       const NoiseModel& noise, uint64_t seed,
                                       const PredictorConfig& cfg = {});

}  // namespace ttswing::pred
