#pragma once

// Test-only reference implementations, kept independent of the library's
// interior-point path: an ADMM cone solver with closed-form projections and
// a few generators for cone programs with known status.

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "geobeam/cones.hpp"
#include "geobeam/rng.hpp"

namespace oracle {

inline void project_cone(const geobeam::ConeBlock& blk, Eigen::Ref<Eigen::VectorXd> v) {
  using geobeam::ConeKind;
  switch (blk.kind) {
    case ConeKind::Zero:
      v.setZero();
      break;
    case ConeKind::NonNeg:
      v = v.cwiseMax(0.0);
      break;
    case ConeKind::SecondOrder: {
      const int d = blk.dim;
      const double t = v.tail(d - 1).norm();
      if (t <= v[0]) return;
      if (t <= -v[0]) {
        v.setZero();
        return;
      }
      const double beta = 0.5 * (v[0] + t);
      v[0] = beta;
      v.tail(d - 1) *= beta / t;
      break;
    }
    case ConeKind::Psd: {
      Eigen::MatrixXd U = geobeam::conedetail::svec_to_mat(v, blk.side);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(U);
      Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
      U = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
      geobeam::conedetail::mat_to_svec(U, v);
      break;
    }
  }
}

struct AdmmResult {
  bool converged = false;
  double objective = 0.0;
  Eigen::VectorXd x;
};

/// Two-block ADMM on: min c.x s.t. Ax + s = b, s in K.
/// x-update is a prefactored least-squares solve, s-update a cone projection.
inline AdmmResult admm_solve(const geobeam::ConeProgram& p, int max_iters = 200000,
                             double rho = 1.0, double tol = 1e-10) {
  const int n = p.num_vars();
  const int m = p.num_rows();
  Eigen::MatrixXd A = p.A.toDense();
  Eigen::MatrixXd AtA = A.transpose() * A;
  AtA.diagonal().array() += 1e-12;
  Eigen::LLT<Eigen::MatrixXd> llt(AtA);

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(m);

  AdmmResult out;
  const double alpha = 1.6;  // over-relaxation
  for (int it = 0; it < max_iters; ++it) {
    x = llt.solve(A.transpose() * (p.b - s - u) - p.c / rho);
    Eigen::VectorXd Ax = A * x;
    Eigen::VectorXd Ax_rel = alpha * Ax + (1.0 - alpha) * (p.b - s);
    Eigen::VectorXd s_old = s;
    s = p.b - Ax_rel - u;
    int off = 0;
    for (const auto& blk : p.cones) {
      project_cone(blk, s.segment(off, blk.dim));
      off += blk.dim;
    }
    u += Ax_rel + s - p.b;
    if (it % 50 == 0) {
      const double pres = (Ax + s - p.b).norm();
      const double dres = rho * (A.transpose() * (s - s_old)).norm();
      if (pres < tol * std::max(1.0, p.b.norm()) &&
          dres < tol * std::max(1.0, p.c.norm())) {
        out.converged = true;
        break;
      }
    }
  }
  out.objective = p.c.dot(x);
  out.x = x;
  return out;
}

/// Random bounded, strictly feasible SOCP: a trust-region SOC row keeps the
/// problem bounded; b is chosen so a strictly interior point exists.
inline geobeam::ConeProgram random_bounded_socp(geobeam::Rng& rng, int n) {
  geobeam::ConeProgramBuilder builder;
  builder.add_vars(n);
  for (int j = 0; j < n; ++j) builder.set_objective(j, rng.gaussian());

  Eigen::VectorXd x0(n);
  for (int j = 0; j < n; ++j) x0[j] = rng.gaussian();
  x0 *= 0.5;

  const int n_lin = 2 + static_cast<int>(rng.uniform() * n);
  for (int i = 0; i < n_lin; ++i) {
    geobeam::LinExpr e;
    double ax0 = 0.0;
    for (int j = 0; j < n; ++j) {
      const double a = rng.gaussian();
      e.add(j, a);
      ax0 += a * x0[j];
    }
    e.constant = -ax0 + rng.uniform(0.1, 1.0);  // slack at x0
    builder.add_nonneg(e);
  }

  const int n_soc = 1 + static_cast<int>(rng.uniform() * 2);
  for (int k = 0; k < n_soc; ++k) {
    const int d = 2 + static_cast<int>(rng.uniform() * 3);
    std::vector<geobeam::LinExpr> rows(d);
    Eigen::VectorXd at_x0(d);
    for (int r = 0; r < d; ++r) {
      double ax0 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double a = rng.gaussian() * 0.3;
        rows[r].add(j, a);
        ax0 += a * x0[j];
      }
      at_x0[r] = ax0;
    }
    // shift constants so the block value at x0 is strictly inside the cone
    rows[0].constant = -at_x0[0] + at_x0.tail(d - 1).norm() + rng.uniform(0.2, 1.0);
    builder.add_soc(rows);
  }

  // trust region ||x|| <= R with x0 well inside
  const double radius = 2.0 * x0.norm() + 2.0;
  std::vector<geobeam::LinExpr> tr(n + 1);
  tr[0] = geobeam::LinExpr::constant_of(radius);
  for (int j = 0; j < n; ++j) tr[j + 1] = geobeam::LinExpr::variable(j);
  builder.add_soc(tr);

  return builder.build();
}

struct KnownOptimal {
  geobeam::ConeProgram program;
  Eigen::VectorXd x_star, y_star, s_star;
  double objective = 0.0;
};

/// Constructs a program with a known optimal primal-dual pair by choosing
/// complementary (s*, y*) per block and back-solving b and c.
inline KnownOptimal known_optimal_socp(geobeam::Rng& rng, int n) {
  const int n_lin = 3 + static_cast<int>(rng.uniform() * 4);
  const int soc_dim = 3 + static_cast<int>(rng.uniform() * 3);
  const int m = n_lin + soc_dim;

  Eigen::MatrixXd A(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = rng.gaussian();

  Eigen::VectorXd s(m), y(m);
  for (int i = 0; i < n_lin; ++i) {
    if (rng.uniform() < 0.5) {  // active row
      s[i] = 0.0;
      y[i] = rng.uniform(0.2, 2.0);
    } else {
      s[i] = rng.uniform(0.2, 2.0);
      y[i] = 0.0;
    }
  }
  {
    auto sb = s.segment(n_lin, soc_dim);
    auto yb = y.segment(n_lin, soc_dim);
    if (rng.uniform() < 0.5) {  // boundary-complementary pair
      Eigen::VectorXd v(soc_dim - 1);
      for (int j = 0; j < soc_dim - 1; ++j) v[j] = rng.gaussian();
      v.normalize();
      const double t = rng.uniform(0.5, 2.0);
      sb[0] = t;
      sb.tail(soc_dim - 1) = t * v;
      const double muv = rng.uniform(0.5, 2.0);
      yb[0] = muv * t;
      yb.tail(soc_dim - 1) = -muv * t * v;
    } else {  // interior s, zero dual
      for (int j = 0; j < soc_dim; ++j) sb[j] = rng.gaussian();
      sb[0] = sb.tail(soc_dim - 1).norm() + rng.uniform(0.5, 1.5);
      yb.setZero();
    }
  }

  Eigen::VectorXd x(n);
  for (int j = 0; j < n; ++j) x[j] = rng.gaussian();

  KnownOptimal out;
  out.program.c = -A.transpose() * y;
  out.program.b = A * x + s;
  out.program.A = A.sparseView();
  out.program.cones = {geobeam::ConeBlock::nonneg(n_lin), geobeam::ConeBlock::soc(soc_dim)};
  out.x_star = x;
  out.y_star = y;
  out.s_star = s;
  out.objective = out.program.c.dot(x);
  return out;
}

/// Infeasible by construction: y0 is a Farkas certificate (A^T y0 = 0,
/// y0 in K*, b.y0 = -1).
inline geobeam::ConeProgram farkas_infeasible(geobeam::Rng& rng, int n) {
  const int n_lin = 4 + static_cast<int>(rng.uniform() * 4);
  const int m = n_lin;
  Eigen::MatrixXd A(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = rng.gaussian();
  Eigen::VectorXd y0(m);
  for (int i = 0; i < m; ++i) y0[i] = rng.uniform(0.5, 2.0);
  A -= y0 * (y0.transpose() * A) / y0.squaredNorm();
  Eigen::VectorXd b(m);
  for (int i = 0; i < m; ++i) b[i] = rng.gaussian();
  b -= y0 * (y0.dot(b) + 1.0) / y0.squaredNorm();

  geobeam::ConeProgram p;
  p.A = A.sparseView();
  p.b = b;
  p.c = Eigen::VectorXd::Zero(n);
  for (int j = 0; j < n; ++j) p.c[j] = rng.gaussian();
  p.cones = {geobeam::ConeBlock::nonneg(m)};
  return p;
}

}  // namespace oracle
