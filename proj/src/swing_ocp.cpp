#include "ttswing/swing_ocp.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <stdexcept>

namespace ttswing::ocp {

TerminalKinematics make_arm_kinematics(const arm::ArmParams& params) {
  TerminalKinematics k;
  k.position = [params](const VecX& q) { return arm::fk_paddle(params, Vec5(q)); };
  k.position_jacobian = [params](const VecX& q) -> Mat3X {
    return arm::jacobian(params, Vec5(q));
  };
  k.normal = [params](const VecX& q) { return arm::paddle_normal(params, Vec5(q)); };
  k.normal_jacobian = [params](const VecX& q) -> Mat3X {
    return arm::normal_jacobian(params, Vec5(q));
  };
  k.velocity_gradient = [params](const VecX& q, const VecX& qd) -> Mat3X {
    return arm::velocity_gradient(params, Vec5(q), Vec5(qd));
  };
  return k;
}

void OcpParams::validate() const {
  if (dof < 1) throw std::invalid_argument("ocp: dof must be >= 1");
  if (nodes < 2) throw std::invalid_argument("ocp: nodes must be >= 2");
  if (!(dt > 0.0)) throw std::invalid_argument("ocp: dt must be positive");
  if (!(w_accel > 0.0) || !(w_vel >= 0.0))
    throw std::invalid_argument("ocp: weights must be positive");
  if (!(eps_pos > 0.0) || !(eps_vel > 0.0) || !(eps_orient > 0.0))
    throw std::invalid_argument("ocp: tolerance balls must be positive");
  if (q0.size() != dof || qd0.size() != dof)
    throw std::invalid_argument("ocp: q0/qd0 must have length dof");
  if (q_min.size() != dof || q_max.size() != dof)
    throw std::invalid_argument("ocp: q_min/q_max must have length dof");
  if (((q_max - q_min).array() <= 0.0).any())
    throw std::invalid_argument("ocp: q_min must be < q_max");
}

double OcpProblem::cost(const VecX& x) const {
  Eigen::Map<const MatX> X(x.data(), params.dof, params.nodes);
  return cost0 + g0.dot(x) + 0.5 * (X * Hs).cwiseProduct(X).sum();
}

VecX OcpProblem::cost_grad(const VecX& x) const {
  VecX out(x.size());
  Eigen::Map<const MatX> X(x.data(), params.dof, params.nodes);
  Eigen::Map<MatX>(out.data(), params.dof, params.nodes).noalias() = X * Hs;
  out += g0;
  return out;
}

void OcpProblem::terminal_state(const VecX& x, VecX& qf, VecX& qdf) const {
  Eigen::Map<const MatX> X(x.data(), params.dof, params.nodes);
  qf = qf0 + X * pvec;
  qdf = params.qd0 + X * vvec;
}

void OcpProblem::rollout(const VecX& x, MatX& q, MatX& qd) const {
  const int m = params.dof, N = params.nodes;
  q.resize(m, N + 1);
  qd.resize(m, N + 1);
  q.col(0) = params.q0;
  qd.col(0) = params.qd0;
  for (int n = 0; n < N; ++n) {
    q.col(n + 1) = q.col(n) + params.dt * qd.col(n);
    qd.col(n + 1) = qd.col(n) + params.dt * x.segment(Eigen::Index(n) * m, m);
  }
}

OcpProblem build_problem(const OcpParams& params, const TerminalSpec& terminal,
                         TerminalKinematics kin) {
  params.validate();
  OcpProblem pb;
  pb.params = params;
  pb.terminal = terminal;
  pb.kin = std::move(kin);
  if (terminal.constrain_position || terminal.constrain_velocity) {
    if (!pb.kin.position || !pb.kin.position_jacobian)
      throw std::invalid_argument("ocp: position kinematics required");
  }
  if (terminal.constrain_orientation && (!pb.kin.normal || !pb.kin.normal_jacobian))
    throw std::invalid_argument("ocp: normal kinematics required");
  if (terminal.constrain_velocity && !pb.kin.velocity_gradient)
    throw std::invalid_argument("ocp: velocity gradient required");

  const int N = params.nodes, m = params.dof;
  const double dt = params.dt;

  // cost: w_accel sum |x_n|^2 + w_vel sum_{n=1..N} |qd_n|^2 with
  // qd_n = qd0 + dt sum_{k<n} x_k; curvature is shared across joints
  pb.Hs.resize(N, N);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      pb.Hs(i, j) = 2.0 * params.w_vel * dt * dt * (N - std::max(i, j)) +
                    (i == j ? 2.0 * params.w_accel + params.hessian_reg : 0.0);
  pb.g0.resize(Eigen::Index(N) * m);
  for (int k = 0; k < N; ++k)
    pb.g0.segment(Eigen::Index(k) * m, m) = 2.0 * params.w_vel * dt * (N - k) * params.qd0;
  pb.cost0 = params.w_vel * N * params.qd0.squaredNorm();

  // terminal maps: qf = qf0 + sum_k pvec(k) x_k, qdf = qd0 + dt sum_k x_k
  pb.pvec.resize(N);
  for (int k = 0; k < N; ++k) pb.pvec(k) = dt * dt * (N - 1 - k);
  pb.vvec = VecX::Constant(N, dt);
  pb.qf0 = params.q0 + N * dt * params.qd0;

  // box rows: q_n for n = 2..N is affine in x; q_0, q_1 are fixed data
  pb.Ts = MatX::Zero(N - 1, N);
  pb.box_lo.resize(Eigen::Index(N - 1) * m);
  pb.box_hi.resize(Eigen::Index(N - 1) * m);
  for (int n = 2; n <= N; ++n) {
    const int r = n - 2;
    for (int k = 0; k + 2 <= n; ++k) pb.Ts(r, k) = dt * dt * (n - 1 - k);
    const VecX base = params.q0 + n * dt * params.qd0;
    pb.box_lo.segment(Eigen::Index(r) * m, m) = params.q_min - base;
    pb.box_hi.segment(Eigen::Index(r) * m, m) = params.q_max - base;
  }

  auto in_box = [&](const VecX& q) {
    return ((q - params.q_min).array() >= -1e-9).all() &&
           ((params.q_max - q).array() >= -1e-9).all();
  };
  if (!in_box(params.q0)) {
    pb.infeasible = true;
    pb.infeasible_reason = "initial joint position violates limits";
  } else if (!in_box(params.q0 + dt * params.qd0)) {
    pb.infeasible = true;
    pb.infeasible_reason = "first node position violates limits (initial velocity too high)";
  }
  return pb;
}

const char* status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxIterations: return "max_iterations";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::BudgetExhausted: return "budget_exhausted";
    case SolveStatus::Stalled: return "stalled";
  }
  return "unknown";
}

namespace {

struct ConstraintEval {
  std::vector<Vec3> r;
  std::vector<double> radius;
  std::vector<int> kind;  // 0 pos, 1 vel, 2 orient
  double viol = 0.0;      // sum of norm excesses over the ball radii
  bool feasible(double tol) const {
    for (size_t i = 0; i < r.size(); ++i)
      if (r[i].norm() > radius[i] + tol) return false;
    return true;
  }
};

ConstraintEval eval_constraints(const OcpProblem& pb, const VecX& qf, const VecX& qdf) {
  ConstraintEval ev;
  const auto& t = pb.terminal;
  if (t.constrain_position) {
    ev.r.push_back(pb.kin.position(qf) - t.p_des);
    ev.radius.push_back(std::sqrt(pb.params.eps_pos));
    ev.kind.push_back(0);
  }
  if (t.constrain_velocity) {
    ev.r.push_back(Vec3(pb.kin.position_jacobian(qf) * qdf) - t.v_des);
    ev.radius.push_back(std::sqrt(pb.params.eps_vel));
    ev.kind.push_back(1);
  }
  if (t.constrain_orientation) {
    ev.r.push_back(pb.kin.normal(qf) - t.o_des);
    ev.radius.push_back(std::sqrt(pb.params.eps_orient));
    ev.kind.push_back(2);
  }
  for (size_t i = 0; i < ev.r.size(); ++i)
    ev.viol += std::max(0.0, ev.r[i].norm() - ev.radius[i]);
  return ev;
}

double box_violation_max(const OcpProblem& pb, const VecX& x) {
  if (pb.Ts.rows() == 0) return 0.0;
  const int m = pb.params.dof;
  Eigen::Map<const MatX> X(x.data(), m, pb.params.nodes);
  const MatX W = X * pb.Ts.transpose();
  const Eigen::Map<const MatX> Lo(pb.box_lo.data(), m, pb.Ts.rows());
  const Eigen::Map<const MatX> Hi(pb.box_hi.data(), m, pb.Ts.rows());
  return std::max((Lo - W).cwiseMax(0.0).maxCoeff(), (W - Hi).cwiseMax(0.0).maxCoeff());
}

double box_violation_sum(const OcpProblem& pb, const VecX& x) {
  if (pb.Ts.rows() == 0) return 0.0;
  const int m = pb.params.dof;
  Eigen::Map<const MatX> X(x.data(), m, pb.params.nodes);
  const MatX W = X * pb.Ts.transpose();
  const Eigen::Map<const MatX> Lo(pb.box_lo.data(), m, pb.Ts.rows());
  const Eigen::Map<const MatX> Hi(pb.box_hi.data(), m, pb.Ts.rows());
  return (Lo - W).cwiseMax(0.0).sum() + (W - Hi).cwiseMax(0.0).sum();
}

// absolute-form linearization: |G y + h| <= radius with h = r(x) - G x, so
// the QP variable is the full new iterate and ADMM memory stays meaningful
std::vector<KronQp::Ball> linearize(const OcpProblem& pb, const VecX& x, const VecX& qf,
                                    const VecX& qdf, const ConstraintEval& ev) {
  const int m = pb.params.dof, N = pb.params.nodes;
  std::vector<KronQp::Ball> balls;
  Mat3X Jp;
  if (pb.terminal.constrain_position || pb.terminal.constrain_velocity)
    Jp = pb.kin.position_jacobian(qf);
  for (size_t i = 0; i < ev.r.size(); ++i) {
    KronQp::Ball b;
    b.radius = ev.radius[i];
    b.G.resize(3, Eigen::Index(N) * m);
    Mat3X blockJ;
    switch (ev.kind[i]) {
      case 0: blockJ = Jp; break;
      case 1: blockJ = pb.kin.velocity_gradient(qf, qdf); break;
      default: blockJ = pb.kin.normal_jacobian(qf); break;
    }
    for (int k = 0; k < N; ++k) {
      b.G.middleCols(Eigen::Index(k) * m, m) = pb.pvec(k) * blockJ;
      if (ev.kind[i] == 1) b.G.middleCols(Eigen::Index(k) * m, m) += pb.vvec(k) * Jp;
    }
    b.h = ev.r[i] - b.G * x;
    balls.push_back(std::move(b));
  }
  return balls;
}

// cold-start seed: Gauss-Newton on the terminal maps picks a target state
// (qf, qdf), then the minimum-acceleration profile reaching it analytically.
// Starting the SQP here keeps the first linearization near-feasible; from
// rest the exact targets can be outside the linearized reachable set, which
// stalls the subproblem solver.
VecX seed_profile(const OcpProblem& pb) {
  const auto& t = pb.terminal;
  const auto& kin = pb.kin;
  const int m = pb.params.dof, N = pb.params.nodes;
  VecX x = VecX::Zero(Eigen::Index(N) * m);
  if (!t.constrain_position && !t.constrain_velocity && !t.constrain_orientation) return x;
  if (!kin.position || !kin.position_jacobian) return x;

  VecX qf = pb.params.q0;
  const bool use_n = t.constrain_orientation && kin.normal && kin.normal_jacobian;
  const double wn = 0.3;
  for (int it = 0; it < 60; ++it) {
    const Vec3 rp = t.constrain_position ? Vec3(kin.position(qf) - t.p_des) : Vec3::Zero();
    const Vec3 rn = use_n ? Vec3(kin.normal(qf) - t.o_des) : Vec3::Zero();
    const double score = rp.norm() + wn * rn.norm();
    if (score < 1e-8) break;
    MatX J = MatX::Zero(6, m);
    if (t.constrain_position) J.topRows(3) = kin.position_jacobian(qf);
    if (use_n) J.bottomRows(3) = wn * kin.normal_jacobian(qf);
    VecX r(6);
    r.head(3) = rp;
    r.tail(3) = wn * rn;
    const double lam = std::max(1e-6, 0.05 * std::min(1.0, score));
    MatX JJt = J * J.transpose();
    JJt.diagonal().array() += lam * lam;
    qf = (qf - J.transpose() * JJt.ldlt().solve(r))
             .cwiseMax(pb.params.q_min)
             .cwiseMin(pb.params.q_max);
  }
  VecX qdf = VecX::Zero(m);
  if (t.constrain_velocity) {
    const MatX J = kin.position_jacobian(qf);
    MatX JJt = J * J.transpose();
    JJt.diagonal().array() += 1e-6;
    qdf = J.transpose() * JJt.ldlt().solve(VecX(t.v_des));
  }
  // per joint: least-norm x with vvec'x = dqd, pvec'x = dq
  Eigen::Matrix2d A;
  A << pb.vvec.squaredNorm(), pb.vvec.dot(pb.pvec), pb.vvec.dot(pb.pvec),
      pb.pvec.squaredNorm();
  const auto Af = A.ldlt();
  const VecX dqd = qdf - pb.params.qd0;
  const VecX dq = qf - pb.qf0;
  for (int j = 0; j < m; ++j) {
    const Eigen::Vector2d ab = Af.solve(Eigen::Vector2d(dqd(j), dq(j)));
    for (int k = 0; k < N; ++k)
      x(Eigen::Index(k) * m + j) = ab(0) * pb.vvec(k) + ab(1) * pb.pvec(k);
  }
  return x;
}

}  // namespace

OcpSolver::OcpSolver(const SqpSettings& settings) : settings_(settings) {}

void OcpSolver::reset() {
  warm_ = false;
  warm_converged_ = false;
  admm_state_ = AdmmState{};
  x_ = VecX();
  mu_ = 1.0;
  have_mem_terminal_ = false;
}

void OcpSolver::seed(const VecX& x) {
  x_ = x;
  warm_ = true;
  warm_converged_ = false;
  admm_state_ = AdmmState{};
  have_mem_terminal_ = false;  // external iterate: trust the caller
}

OcpSolution OcpSolver::solve(const OcpProblem& pb) {
  const auto t_start = std::chrono::steady_clock::now();
  OcpSolution sol;
  const int m = pb.params.dof, N = pb.params.nodes;
  const Eigen::Index nv = Eigen::Index(N) * m;

  // a failed solve must not poison the warm-start memory
  const VecX x_bak = x_;
  const AdmmState admm_bak = admm_state_;
  const double mu_bak = mu_;
  const bool warm_bak = warm_;
  mu_ = 1.0;  // penalty scale is per-problem; carrying it over ratchets

  auto finish = [&](VecX x) {
    VecX qf(m), qdf(m);
    pb.terminal_state(x, qf, qdf);
    const auto ev = eval_constraints(pb, qf, qdf);
    for (size_t i = 0; i < ev.r.size(); ++i) {
      const double nrm = ev.r[i].norm();
      if (ev.kind[i] == 0) sol.residuals.pos = nrm;
      if (ev.kind[i] == 1) sol.residuals.vel = nrm;
      if (ev.kind[i] == 2) sol.residuals.orient = nrm;
    }
    sol.converged = sol.status == SolveStatus::Converged &&
                    ev.feasible(settings_.feas_tol) &&
                    box_violation_max(pb, x) <= settings_.box_tol;
    if (sol.status == SolveStatus::Converged && !sol.converged)
      sol.status = SolveStatus::Stalled;
    sol.cost = pb.cost(x);
    sol.x = x;
    pb.rollout(x, sol.q, sol.qd);
    sol.qdd.resize(m, N);
    for (int n = 0; n < N; ++n) sol.qdd.col(n) = x.segment(Eigen::Index(n) * m, m);
    if (sol.converged) {
      x_ = std::move(x);
      warm_ = true;
      warm_converged_ = true;
      mem_terminal_ = pb.terminal;
      mem_dt_ = pb.params.dt;
      have_mem_terminal_ = true;
    } else if (sol.status == SolveStatus::BudgetExhausted && !warm_converged_) {
      // nothing better banked: keep the partial iterate as anytime progress
      x_ = std::move(x);
      admm_state_ = AdmmState{};
      mu_ = mu_bak;
      warm_ = true;
      mem_terminal_ = pb.terminal;
      mem_dt_ = pb.params.dt;
      have_mem_terminal_ = true;
    } else {
      // restore the iterate: the last converged plan outlives a failed
      // replan. Drop the dual state though — carrying the ADMM internals
      // of a failed attempt (or its entry state) repeats the failure.
      x_ = x_bak;
      admm_state_ = AdmmState{};
      mu_ = mu_bak;
      warm_ = warm_bak;
    }
    sol.solve_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - t_start)
                       .count();
    return sol;
  };

  if (pb.infeasible) {
    sol.status = SolveStatus::Infeasible;
    VecX x = VecX::Zero(nv);
    OcpSolution out = finish(std::move(x));  // memory restored for the next problem
    out.converged = false;
    return out;
  }

  bool warm = warm_ && x_.size() == nv;
  if (warm && have_mem_terminal_) {
    // memory built for a distant target misleads more than it helps
    const bool jumped =
        (pb.terminal.p_des - mem_terminal_.p_des).norm() > settings_.warm_drift_pos ||
        (pb.terminal.v_des - mem_terminal_.v_des).norm() > settings_.warm_drift_vel ||
        std::abs(pb.params.dt - mem_dt_) > 0.2 * mem_dt_;
    if (jumped) warm = false;
  }
  VecX x = warm ? x_ : seed_profile(pb);
  if (!warm) admm_state_ = AdmmState{};
  const int max_iter = warm ? settings_.max_iter_warm : settings_.max_iter_cold;

  KronQp qp;
  qp.nodes = N;
  qp.dof = m;
  qp.Hs = pb.Hs;
  qp.Ts = pb.Ts;
  qp.box_lo = pb.box_lo;
  qp.box_hi = pb.box_hi;
  qp.g = pb.g0;

  VecX qf(m), qdf(m);
  int budget_left = settings_.qp_iter_budget > 0 ? settings_.qp_iter_budget
                                                 : std::numeric_limits<int>::max();
  sol.status = SolveStatus::MaxIterations;
  int stalls = 0;

  for (int iter = 0; iter < max_iter; ++iter) {
    pb.terminal_state(x, qf, qdf);
    const auto ev = eval_constraints(pb, qf, qdf);
    const bool feasible = ev.feasible(settings_.feas_tol) &&
                          box_violation_max(pb, x) <= settings_.box_tol;
    qp.balls = linearize(pb, x, qf, qdf, ev);

    // stationarity test with the dual memory: detects an already optimal
    // iterate (e.g. an unchanged replan) without spending a QP solve
    if (feasible && admm_state_.matches(qp)) {
      VecX kkt = pb.cost_grad(x);
      if (qp.box_rows() > 0) {
        const VecX yb = admm_state_.dual_box(qp);
        Eigen::Map<const MatX> Y(yb.data(), m, qp.box_rows());
        Eigen::Map<MatX>(kkt.data(), m, N).noalias() += Y * qp.Ts;
      }
      for (size_t c = 0; c < qp.balls.size(); ++c)
        kkt.noalias() +=
            qp.balls[c].G.transpose() * admm_state_.dual_ball(qp, static_cast<int>(c));
      if (kkt.lpNorm<Eigen::Infinity>() < settings_.kkt_tol) {
        sol.status = SolveStatus::Converged;
        return finish(std::move(x));
      }
    }

    AdmmSettings as = settings_.admm;
    as.max_iter = std::min(as.max_iter, budget_left);
    const auto info = admm_solve(qp, as, admm_state_);
    sol.iterations = iter + 1;
    sol.qp_iterations += info.iterations;
    budget_left -= info.iterations;

    const VecX d = admm_state_.x - x;
    if (std::getenv("TTSWING_SQP_TRACE"))
      std::fprintf(stderr,
                   "  sqp %2d warm=%d feas=%d qp{conv=%d it=%4d pr=%.2e du=%.2e} "
                   "|d|=%.3e viol=%.3e mu=%.1f rho=(%.3g,%.3g)\n",
                   iter, warm, feasible, info.converged, info.iterations, info.prim_res,
                   info.dual_res, d.lpNorm<Eigen::Infinity>(), ev.viol, mu_,
                   admm_state_.rho_box, admm_state_.rho_ball);
    if (feasible && d.lpNorm<Eigen::Infinity>() < settings_.step_tol) {
      sol.status = SolveStatus::Converged;
      return finish(std::move(x));
    }
    if (budget_left <= 0) {
      sol.status = SolveStatus::BudgetExhausted;
      x = admm_state_.x;  // best available iterate
      return finish(std::move(x));
    }

    // l1 exact-penalty line search
    double y_max = 0.0;
    for (Eigen::Index c = 0; c < admm_state_.u_ball.cols(); ++c)
      y_max = std::max(y_max, admm_state_.dual_ball(qp, static_cast<int>(c)).norm());
    if (qp.box_rows() > 0)
      y_max = std::max(y_max, admm_state_.dual_box(qp).lpNorm<Eigen::Infinity>());
    mu_ = std::max(mu_, 2.0 * y_max + 1.0);

    auto merit = [&](const VecX& xc) {
      VecX qfc(m), qdfc(m);
      pb.terminal_state(xc, qfc, qdfc);
      return pb.cost(xc) + mu_ * (eval_constraints(pb, qfc, qdfc).viol +
                                  box_violation_sum(pb, xc));
    };
    const double viol0 = ev.viol + box_violation_sum(pb, x);
    const double phi0 = pb.cost(x) + mu_ * viol0;
    const double descent = pb.cost_grad(x).dot(d) - mu_ * viol0;

    double alpha = 1.0, phi_best = phi0;
    VecX x_best = x;
    bool accepted = false;
    for (int ls = 0; ls < 25; ++ls) {
      const VecX xc = x + alpha * d;
      const double phi = merit(xc);
      if (phi <= phi0 + 1e-4 * alpha * std::min(descent, 0.0) - 1e-14) {
        x_best = xc;
        accepted = true;
        break;
      }
      if (phi < phi_best) {
        phi_best = phi;
        x_best = xc;
      }
      alpha *= 0.5;
    }
    if (accepted || phi_best < phi0 - 1e-14) {
      stalls = 0;
      x = x_best;
    } else if (++stalls >= 2) {
      sol.status = SolveStatus::Stalled;
      return finish(std::move(x));
    } else {
      // merit flat: adopt the QP iterate once, the subproblem may just
      // need another linearization point
      x = admm_state_.x;
    }
  }
  return finish(std::move(x));
}

OcpSolution solve_swing(const OcpProblem& problem, const SqpSettings& settings,
                        const OcpSolution* warm_start) {
  OcpSolver solver(settings);
  if (warm_start &&
      warm_start->x.size() == Eigen::Index(problem.params.nodes) * problem.params.dof)
    solver.seed(warm_start->x);
  return solver.solve(problem);
}

IkResult ik_solve(const arm::ArmParams& params, const Vec3& target_p, const Vec3& target_n,
                  const Vec5& q_guess, const IkSettings& settings) {
  IkResult best;
  const Vec5 lo = params.q_lower(), hi = params.q_upper();
  Vec5 q = q_guess.cwiseMax(lo).cwiseMin(hi);
  const double wn = settings.orient_weight;

  auto residual = [&](const Vec5& qq, Vec3& rp, Vec3& rn) {
    const auto f = arm::compute_frames(params, qq);
    rp = f.paddle_center - target_p;
    rn = f.paddle_normal - target_n;
    return rp.norm() + wn * rn.norm();
  };

  Vec3 rp, rn;
  double score = residual(q, rp, rn);
  double best_score = std::numeric_limits<double>::infinity();
  for (int it = 0; it <= settings.max_iter; ++it) {
    if (score < best_score) {
      best_score = score;
      best.q = q;
      best.pos_residual = rp.norm();
      best.normal_residual = rn.norm();
      best.iterations = it;
    }
    if (rp.norm() <= settings.pos_tol && rn.norm() <= settings.normal_tol) {
      best.converged = true;
      break;
    }
    if (it == settings.max_iter) break;
    Eigen::Matrix<double, 6, kArmDof> J;
    J.topRows<3>() = arm::jacobian(params, q);
    J.bottomRows<3>() = wn * arm::normal_jacobian(params, q);
    Eigen::Matrix<double, 6, 1> r;
    r.head<3>() = rp;
    r.tail<3>() = wn * rn;
    // damping shrinks with the residual so late iterations are Gauss-Newton
    const double lam = std::max(1e-7, settings.damping * std::min(1.0, score));
    Eigen::Matrix<double, 6, 6> JJt = J * J.transpose();
    JJt.diagonal().array() += lam * lam;
    const Vec5 dq = -J.transpose() * JJt.ldlt().solve(r);
    double step = 1.0;
    for (int bt = 0; bt < 6; ++bt) {
      const Vec5 qn = (q + step * dq).cwiseMax(lo).cwiseMin(hi);
      Vec3 rpn, rnn;
      const double sn = residual(qn, rpn, rnn);
      if (sn < score || bt == 5) {
        q = qn;
        score = sn;
        rp = rpn;
        rn = rnn;
        break;
      }
      step *= 0.5;
    }
  }
  return best;
}

}  // namespace ttswing::ocp
