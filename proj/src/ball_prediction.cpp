#include "ttswing/ball_prediction.hpp"

#include <cmath>
#include <stdexcept>

#include "ttswing/rng.hpp"

namespace ttswing::pred {

void PredictorConfig::validate() const {
  if (window < 4) throw std::invalid_argument("predictor: window must be >= 4");
  if (!(max_window_span > 0.0))
    throw std::invalid_argument("predictor: max_window_span must be positive");
  if (smooth_window < 1)
    throw std::invalid_argument("predictor: smooth_window must be >= 1");
  integ.validate();
}

StateEstimate estimate_state(std::span<const Observation> window) {
  StateEstimate est;
  const int n = static_cast<int>(window.size());
  if (n < 4) {
    est.status = EstimateStatus::TooFewPoints;
    return est;
  }
  const double t_last = window.back().t;
  if (t_last - window.front().t > 0.2 + 1e-12) {
    est.status = EstimateStatus::WindowTooLong;
    return est;
  }
  MatX A(n, 4);
  MatX P(n, 3);
  for (int i = 0; i < n; ++i) {
    const double tau = window[i].t - t_last;
    A(i, 0) = 1.0;
    A(i, 1) = tau;
    A(i, 2) = tau * tau;
    A(i, 3) = tau * tau * tau;
    P.row(i) = window[i].p.transpose();
  }
  Eigen::ColPivHouseholderQR<MatX> qr(A);
  qr.setThreshold(1e-10);
  if (qr.rank() < 4) {
    est.status = EstimateStatus::Degenerate;
    return est;
  }
  const MatX coef = qr.solve(P);  // 4x3, rows: value, t, t^2, t^3 at tau=0
  est.status = EstimateStatus::Ok;
  est.state.t = t_last;
  est.state.p = coef.row(0).transpose();
  est.state.v = coef.row(1).transpose();
  return est;
}

StrikePrediction predict_strike(const ball::BallState& s, const ball::AeroParams& params,
                                const ball::TableGeometry& geom,
                                const ball::IntegrateOptions& opt) {
  StrikePrediction pr;
  pr.t_pred = s.t;
  if (s.p.x() <= geom.x_strike) return pr;  // already at/past the plane
  ball::IntegrateOptions o = opt;
  o.stop_at_crossing = true;
  const auto res = ball::integrate(s, params, geom, o);
  if (!res.crossed) return pr;
  pr.valid = true;
  pr.p_des = res.crossing.p;
  pr.t_strike = res.crossing.t;
  pr.v_at_plane = res.crossing.v;
  return pr;
}

StrikePrediction smooth(std::span<const StrikePrediction> history, int window) {
  StrikePrediction out;
  Vec3 p = Vec3::Zero(), v = Vec3::Zero();
  double ts = 0.0;
  int used = 0;
  for (int i = static_cast<int>(history.size()) - 1; i >= 0 && used < window; --i) {
    const auto& h = history[i];
    if (!h.valid) continue;
    p += h.p_des;
    v += h.v_at_plane;
    ts += h.t_strike;
    if (used == 0) out.t_pred = h.t_pred;
    ++used;
  }
  if (used == 0) return out;
  out.valid = true;
  out.p_des = p / used;
  out.v_at_plane = v / used;
  out.t_strike = ts / used;
  out.samples_used = used;
  return out;
}

BallPredictor::BallPredictor(const ball::AeroParams& params, const ball::TableGeometry& geom,
                             const PredictorConfig& cfg)
    : params_(params), geom_(geom), cfg_(cfg) {
  params_.validate();
  geom_.validate();
  cfg_.validate();
}

void BallPredictor::reset() {
  window_.clear();
  history_.clear();
}

std::optional<StrikePrediction> BallPredictor::push(const Observation& obs) {
  if (!window_.empty() && obs.t <= window_.back().t)
    throw std::invalid_argument("predictor: observation times must increase");
  window_.push_back(obs);
  while (static_cast<int>(window_.size()) > cfg_.window) window_.pop_front();
  while (window_.size() > 1 && window_.back().t - window_.front().t > cfg_.max_window_span)
    window_.pop_front();
  if (static_cast<int>(window_.size()) < cfg_.window) return std::nullopt;

  std::vector<Observation> w(window_.begin(), window_.end());
  const auto est = estimate_state(w);
  if (est.status != EstimateStatus::Ok) return std::nullopt;
  history_.push_back(predict_strike(est.state, params_, geom_, cfg_.integ));
  const auto sm = smooth(history_, cfg_.smooth_window);
  if (!sm.valid) return std::nullopt;
  return sm;
}

CharacterizeResult characterize_errors(const std::vector<ball::BallState>& launches,
                                       const ball::AeroParams& true_params,
                                       const ball::AeroParams& model_params,
                                       const ball::TableGeometry& geom,
                                       const NoiseModel& noise, uint64_t seed,
                                       const PredictorConfig& cfg) {
  if (!(noise.rate > 0.0)) throw std::invalid_argument("characterize: rate must be positive");
  CharacterizeResult out;
  out.trials_total = static_cast<int>(launches.size());
  for (size_t trial = 0; trial < launches.size(); ++trial) {
    // Ground truth at fine resolution.
    ball::IntegrateOptions fine;
    fine.stop_at_crossing = true;
    auto truth = ball::integrate(launches[trial], true_params, geom, fine);
    if (!truth.crossed) continue;
    ++out.trials_used;
    const double t_star = truth.crossing.t;
    const Vec3 p_star = truth.crossing.p;
    double t_bounce = -1.0;
    for (const auto& ev : truth.events)
      if (ev.type == ball::EventType::Bounce) {
        t_bounce = ev.t;
        break;
      }

    // Observation stream at the camera rate (integrated at that step so
    // sample times land exactly on the grid).
    ball::IntegrateOptions obs_opt;
    obs_opt.dt = 1.0 / noise.rate;
    obs_opt.horizon = t_star - launches[trial].t;
    obs_opt.stop_at_crossing = true;
    auto obs_traj = ball::integrate(launches[trial], true_params, geom, obs_opt);

    Rng rng(seed, trial);
    BallPredictor predictor(model_params, geom, cfg);
    for (const auto& s : obs_traj.samples) {
      if (s.tag != ball::SampleTag::None) continue;
      if (s.state.t >= t_star) break;
      Observation o{s.state.t, s.state.p + noise.sigma * rng.normal3()};
      auto pr = predictor.push(o);
      if (!pr) continue;
      ErrorSample e;
      e.trial = static_cast<int>(trial);
      e.time_to_strike = t_star - o.t;
      e.p_err = (pr->p_des - p_star).norm();
      e.t_err = std::abs(pr->t_strike - t_star);
      e.after_bounce = t_bounce >= 0.0 && predictor.window_start_time() > t_bounce;
      out.samples.push_back(e);
    }
  }
  return out;
}

}  // namespace ttswing::pred
