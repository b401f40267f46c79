#include "ttswing/qp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ttswing::ocp {

namespace {

// (B kron I_dof)^{-1} applied to a stacked vector, viewing it as dof x nodes.
struct KronFactor {
  Eigen::LLT<MatX> llt;
  int nodes = 0, dof = 0;

  void factor(const MatX& B) {
    llt.compute(B);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("qp: reduced KKT matrix is not positive definite");
  }
  VecX solve(const VecX& r) const {
    Eigen::Map<const MatX> Rm(r.data(), dof, nodes);
    MatX Yt = llt.solve(Rm.transpose());  // nodes x dof
    VecX out(r.size());
    Eigen::Map<MatX>(out.data(), dof, nodes) = Yt.transpose();
    return out;
  }
};

}  // namespace

VecX AdmmState::dual_box(const KronQp& qp) const {
  VecX y = rho_box * u_box;
  const int m = qp.dof;
  for (int r = 0; r < qp.box_rows(); ++r)
    y.segment(Eigen::Index(r) * m, m) *= scale_box(r) / scale_cost;
  return y;
}

Vec3 AdmmState::dual_ball(const KronQp& qp, int c) const {
  (void)qp;
  return rho_ball * u_ball.col(c) * (scale_ball(c) / scale_cost);
}

AdmmInfo admm_solve(const KronQp& qp, const AdmmSettings& settings, AdmmState& state) {
  const int n = qp.vars();
  const int m = qp.dof;
  const int R = qp.box_rows();
  const int K = static_cast<int>(qp.balls.size());
  if (n <= 0) throw std::invalid_argument("qp: empty problem");

  // equilibration: unit cost curvature, unit constraint row norms. x keeps
  // problem units (columns are untouched); each scaled row r carries dual
  // y_scaled = scale_cost * y / scale_row.
  const double c0 = 1.0 / std::max(qp.Hs.cwiseAbs().maxCoeff(), 1e-12);
  VecX dbox(R), sball(K);
  for (int r = 0; r < R; ++r) dbox(r) = 1.0 / std::max(qp.Ts.row(r).norm(), 1e-9);
  for (int c = 0; c < K; ++c)
    sball(c) = 1.0 / std::max(qp.balls[c].G.rowwise().norm().maxCoeff(), 1e-9);

  const MatX Hs = c0 * qp.Hs;
  const VecX g = c0 * qp.g;
  const MatX Ts = dbox.asDiagonal() * qp.Ts;
  VecX box_lo(Eigen::Index(R) * m), box_hi(Eigen::Index(R) * m);
  for (int r = 0; r < R; ++r) {
    box_lo.segment(Eigen::Index(r) * m, m) = dbox(r) * qp.box_lo.segment(Eigen::Index(r) * m, m);
    box_hi.segment(Eigen::Index(r) * m, m) = dbox(r) * qp.box_hi.segment(Eigen::Index(r) * m, m);
  }
  std::vector<KronQp::Ball> balls(K);
  for (int c = 0; c < K; ++c) {
    balls[c].G = sball(c) * qp.balls[c].G;
    balls[c].h = sball(c) * qp.balls[c].h;
    balls[c].radius = sball(c) * qp.balls[c].radius;
  }

  if (!state.matches(qp)) {
    state.valid = true;
    state.x = VecX::Zero(n);
    state.z_box = VecX::Zero(Eigen::Index(R) * m);
    state.u_box = VecX::Zero(Eigen::Index(R) * m);
    state.z_ball = Mat3X::Zero(3, K);
    state.u_ball = Mat3X::Zero(3, K);
    state.scale_box = dbox;
    state.scale_ball = sball;
    state.scale_cost = c0;
    state.rho_box = settings.rho_box;
    state.rho_ball = settings.rho_ball;
  } else {
    // carry z/u across drifting scale factors (problem-unit duals fixed)
    for (int r = 0; r < R; ++r) {
      const double fz = dbox(r) / state.scale_box(r);
      const double fu = (c0 / state.scale_cost) / fz;
      state.z_box.segment(Eigen::Index(r) * m, m) *= fz;
      state.u_box.segment(Eigen::Index(r) * m, m) *= fu;
    }
    for (int c = 0; c < K; ++c) {
      const double fz = sball(c) / state.scale_ball(c);
      const double fu = (c0 / state.scale_cost) / fz;
      state.z_ball.col(c) *= fz;
      state.u_ball.col(c) *= fu;
    }
    state.scale_box = dbox;
    state.scale_ball = sball;
    state.scale_cost = c0;
  }
  if (!(state.rho_box > 0.0)) state.rho_box = settings.rho_box;
  if (!(state.rho_ball > 0.0)) state.rho_ball = settings.rho_ball;

  auto apply_box = [&](const VecX& x, VecX& out) {
    // out(r*m + j) = sum_k Ts(r,k) x(k*m + j)
    Eigen::Map<const MatX> X(x.data(), m, qp.nodes);
    Eigen::Map<MatX> O(out.data(), m, R);
    O.noalias() = X * Ts.transpose();
  };
  auto apply_box_T = [&](const VecX& y, VecX& out) {
    Eigen::Map<const MatX> Y(y.data(), m, R);
    Eigen::Map<MatX> O(out.data(), m, qp.nodes);
    O.noalias() = Y * Ts;
  };
  auto apply_H = [&](const VecX& x) {
    VecX out(n);
    Eigen::Map<const MatX> X(x.data(), m, qp.nodes);
    Eigen::Map<MatX>(out.data(), m, qp.nodes).noalias() = X * Hs;  // Hs symmetric
    return out;
  };

  KronFactor base;
  base.nodes = qp.nodes;
  base.dof = m;
  MatX Wmat;             // n x 3K, base^{-1} Ghat'
  Eigen::LLT<MatX> cap;  // 3K x 3K capacitance
  auto refactor = [&]() {
    MatX B = Hs + state.rho_box * (Ts.transpose() * Ts);
    B.diagonal().array() += settings.sigma;
    base.factor(B);
    if (K > 0) {
      Wmat.resize(n, 3 * K);
      MatX capm = MatX::Identity(3 * K, 3 * K);
      const double s = std::sqrt(state.rho_ball);
      for (int c = 0; c < K; ++c)
        for (int r = 0; r < 3; ++r)
          Wmat.col(3 * c + r) = base.solve(s * balls[c].G.row(r).transpose());
      for (int c = 0; c < K; ++c)
        capm.middleRows(3 * c, 3).noalias() += s * balls[c].G * Wmat;
      cap.compute(capm);
      if (cap.info() != Eigen::Success)
        throw std::runtime_error("qp: capacitance matrix is not positive definite");
    }
  };
  auto kkt_solve = [&](const VecX& rhs) {
    VecX t = base.solve(rhs);
    if (K == 0) return t;
    VecX gt(3 * K);
    const double s = std::sqrt(state.rho_ball);
    for (int c = 0; c < K; ++c) gt.segment<3>(3 * c) = s * (balls[c].G * t);
    const VecX sol = cap.solve(gt);
    t.noalias() -= Wmat * sol;
    return t;
  };

  refactor();

  AdmmInfo info;
  VecX wb(Eigen::Index(R) * m), rhs(n), aty(n);
  Mat3X wc(3, K);

  for (int iter = 1; iter <= settings.max_iter; ++iter) {
    // x update
    rhs = settings.sigma * state.x - g;
    if (R > 0) {
      VecX tmp = state.rho_box * (state.z_box - state.u_box);
      VecX acc(n);
      apply_box_T(tmp, acc);
      rhs += acc;
    }
    for (int c = 0; c < K; ++c)
      rhs.noalias() +=
          state.rho_ball * balls[c].G.transpose() * (state.z_ball.col(c) - state.u_ball.col(c));
    state.x = kkt_solve(rhs);

    // z and u updates (projections)
    if (R > 0) {
      apply_box(state.x, wb);
      state.z_box = (wb + state.u_box).cwiseMax(box_lo).cwiseMin(box_hi);
      state.u_box += wb - state.z_box;
    }
    for (int c = 0; c < K; ++c) {
      wc.col(c) = balls[c].G * state.x;
      Vec3 cand = wc.col(c) + state.u_ball.col(c) + balls[c].h;  // recentre
      const double nrm = cand.norm();
      if (nrm > balls[c].radius) cand *= balls[c].radius / nrm;
      state.z_ball.col(c) = cand - balls[c].h;
      state.u_ball.col(c) += wc.col(c) - state.z_ball.col(c);
    }

    // residuals (unscaled duals y = rho * u, all in equilibrated units)
    double prim = 0.0, ax_scale = 0.0, z_scale = 0.0;
    if (R > 0) {
      prim = (wb - state.z_box).lpNorm<Eigen::Infinity>();
      ax_scale = wb.lpNorm<Eigen::Infinity>();
      z_scale = state.z_box.lpNorm<Eigen::Infinity>();
    }
    for (int c = 0; c < K; ++c) {
      prim = std::max(prim, (wc.col(c) - state.z_ball.col(c)).lpNorm<Eigen::Infinity>());
      ax_scale = std::max(ax_scale, wc.col(c).lpNorm<Eigen::Infinity>());
      z_scale = std::max(z_scale, state.z_ball.col(c).lpNorm<Eigen::Infinity>());
    }

    aty.setZero();
    if (R > 0) {
      VecX yb = state.rho_box * state.u_box;
      VecX acc(n);
      apply_box_T(yb, acc);
      aty += acc;
    }
    for (int c = 0; c < K; ++c)
      aty.noalias() += balls[c].G.transpose() * (state.rho_ball * state.u_ball.col(c));
    const VecX hx = apply_H(state.x);
    const double dual = (hx + g + aty).lpNorm<Eigen::Infinity>();
    const double dual_scale = std::max({hx.lpNorm<Eigen::Infinity>(),
                                        g.lpNorm<Eigen::Infinity>(),
                                        aty.lpNorm<Eigen::Infinity>()});

    info.iterations = iter;
    info.prim_res = prim;
    info.dual_res = dual;
    const double eps_prim = settings.eps_abs + settings.eps_rel * std::max(ax_scale, z_scale);
    const double eps_dual = settings.eps_abs + settings.eps_rel * dual_scale;
    if (prim <= eps_prim && dual <= eps_dual) {
      info.converged = true;
      break;
    }

    // residual balancing
    if (settings.adapt_interval > 0 && iter % settings.adapt_interval == 0) {
      const double pr = prim / std::max(1e-30, std::max(ax_scale, z_scale));
      const double dr = dual / std::max(1e-30, dual_scale);
      const double ratio = std::sqrt(pr / std::max(1e-30, dr));
      if (ratio > 5.0 || ratio < 0.2) {
        const double f = std::clamp(ratio, 1e-2, 1e2);
        const double old_box = state.rho_box, old_ball = state.rho_ball;
        state.rho_box = std::clamp(state.rho_box * f, 1e-6, 1e6);
        state.rho_ball = std::clamp(state.rho_ball * f, 1e-6, 1e6);
        state.u_box *= old_box / state.rho_box;
        state.u_ball *= old_ball / state.rho_ball;
        refactor();
      }
    }
  }
  return info;
}

}  // namespace ttswing::ocp
