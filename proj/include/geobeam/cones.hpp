#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace geobeam {

// ---------------------------------------------------------------------------
// Standard-form cone program
//
//   minimize    c.x
//   subject to  A x + s = b,   s in K = K_1 x K_2 x ... (ordered blocks)
//
// Supported blocks: Zero(d), NonNeg(d), SecondOrder(d) with the first entry
// as the cone axis, and dense Psd(side) stored as svec (column-major lower
// triangle, off-diagonal entries scaled by sqrt(2), so dot products equal
// matrix traces).
// ---------------------------------------------------------------------------

enum class ConeKind { Zero, NonNeg, SecondOrder, Psd };

struct ConeBlock {
  ConeKind kind = ConeKind::Zero;
  int dim = 0;   // rows occupied in A and b
  int side = 0;  // Psd only

  static ConeBlock zero(int d) { return {ConeKind::Zero, d, 0}; }
  static ConeBlock nonneg(int d) { return {ConeKind::NonNeg, d, 0}; }
  static ConeBlock soc(int d) { return {ConeKind::SecondOrder, d, 0}; }
  static ConeBlock psd(int side) { return {ConeKind::Psd, side * (side + 1) / 2, side}; }
};

struct ConeProgram {
  Eigen::VectorXd c;
  Eigen::SparseMatrix<double> A;
  Eigen::VectorXd b;
  std::vector<ConeBlock> cones;

  int num_vars() const { return static_cast<int>(c.size()); }
  int num_rows() const { return static_cast<int>(b.size()); }

  void validate() const {
    if (A.rows() != b.size() || A.cols() != c.size())
      throw std::invalid_argument("cone program: dimension mismatch");
    int total = 0;
    for (const ConeBlock& blk : cones) {
      if (blk.dim < 0) throw std::invalid_argument("cone program: negative block dim");
      if (blk.kind == ConeKind::SecondOrder && blk.dim < 2)
        throw std::invalid_argument("cone program: SOC block needs dim >= 2");
      if (blk.kind == ConeKind::Psd) {
        if (blk.side < 1 || blk.side > 64)
          throw std::invalid_argument("cone program: PSD side out of supported range");
        if (blk.dim != blk.side * (blk.side + 1) / 2)
          throw std::invalid_argument("cone program: PSD dim/side mismatch");
      }
      total += blk.dim;
    }
    if (total != b.size())
      throw std::invalid_argument("cone program: cone dims do not sum to row count");
  }
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, MaxIter, NumericalFailure };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::MaxIter: return "max_iter";
    case SolveStatus::NumericalFailure: return "numerical_failure";
  }
  return "?";
}

struct SolverOptions {
  double feas_tol = 1e-8;
  double gap_tol = 1e-8;
  int max_iters = 200;
  double static_reg = 1e-9;
  int refine_steps = 2;
  bool verbose = false;
};

/// Solution of a cone program. On Optimal, (x, y, s) is a primal-dual pair
/// with normalized residuals below the requested tolerances. On Infeasible,
/// y holds a dual improving ray: A^T y ~ 0, y in K*, b.y = -1. On Unbounded,
/// x (with s) holds a primal ray: A x + s ~ 0, s in K, c.x = -1.
struct ConeSolution {
  SolveStatus status = SolveStatus::NumericalFailure;
  Eigen::VectorXd x, y, s;
  double gap = std::numeric_limits<double>::quiet_NaN();
  double primal_res = std::numeric_limits<double>::quiet_NaN();
  double dual_res = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  double objective = std::numeric_limits<double>::quiet_NaN();
};

struct KktResiduals {
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;
};

namespace conedetail {

inline int svec_dim(int side) { return side * (side + 1) / 2; }

inline Eigen::MatrixXd svec_to_mat(const Eigen::Ref<const Eigen::VectorXd>& u, int side) {
  const double inv_sqrt2 = 0.70710678118654752440;
  Eigen::MatrixXd U(side, side);
  int k = 0;
  for (int j = 0; j < side; ++j) {
    U(j, j) = u[k++];
    for (int i = j + 1; i < side; ++i) {
      const double v = u[k++] * inv_sqrt2;
      U(i, j) = v;
      U(j, i) = v;
    }
  }
  return U;
}

inline void mat_to_svec(const Eigen::MatrixXd& U, Eigen::Ref<Eigen::VectorXd> out) {
  const double sqrt2 = 1.41421356237309504880;
  const int side = static_cast<int>(U.rows());
  int k = 0;
  for (int j = 0; j < side; ++j) {
    out[k++] = U(j, j);
    for (int i = j + 1; i < side; ++i) out[k++] = sqrt2 * U(i, j);
  }
}

// How far inside its cone a point is: min slack for NonNeg, u0 - |u1| for
// SOC, the minimum eigenvalue for PSD. Negative means outside.
inline double inside_margin(const ConeBlock& blk, const Eigen::Ref<const Eigen::VectorXd>& u) {
  switch (blk.kind) {
    case ConeKind::NonNeg:
      return blk.dim == 0 ? std::numeric_limits<double>::infinity() : u.minCoeff();
    case ConeKind::SecondOrder:
      return u[0] - u.tail(blk.dim - 1).norm();
    case ConeKind::Psd: {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(svec_to_mat(u, blk.side),
                                                        Eigen::EigenvaluesOnly);
      return es.eigenvalues().minCoeff();
    }
    case ConeKind::Zero:
      return 0.0;
  }
  return 0.0;
}

inline void identity_element(const ConeBlock& blk, Eigen::Ref<Eigen::VectorXd> e) {
  e.setZero();
  switch (blk.kind) {
    case ConeKind::NonNeg:
      e.setOnes();
      break;
    case ConeKind::SecondOrder:
      e[0] = 1.0;
      break;
    case ConeKind::Psd: {
      int k = 0;
      for (int j = 0; j < blk.side; ++j) {
        e[k] = 1.0;
        k += blk.side - j;
      }
      break;
    }
    case ConeKind::Zero:
      break;
  }
}

// Largest step to the cone boundary: sup { a : u + t*du in K for t in [0,a] }.
inline double max_step(const ConeBlock& blk, const Eigen::Ref<const Eigen::VectorXd>& u,
                       const Eigen::Ref<const Eigen::VectorXd>& du) {
  const double inf = std::numeric_limits<double>::infinity();
  switch (blk.kind) {
    case ConeKind::NonNeg: {
      double a = inf;
      for (int i = 0; i < blk.dim; ++i)
        if (du[i] < 0.0) a = std::min(a, -u[i] / du[i]);
      return a;
    }
    case ConeKind::SecondOrder: {
      const int d = blk.dim;
      const double qa = du[0] * du[0] - du.tail(d - 1).squaredNorm();
      const double qb = u[0] * du[0] - u.tail(d - 1).dot(du.tail(d - 1));
      const double qc = u[0] * u[0] - u.tail(d - 1).squaredNorm();
      double a = inf;
      if (qa == 0.0) {
        if (qb < 0.0) a = -qc / (2.0 * qb);
      } else {
        const double disc = qb * qb - qa * qc;
        if (disc >= 0.0) {
          const double sq = std::sqrt(disc);
          for (double root : {(-qb - sq) / qa, (-qb + sq) / qa})
            if (root > 0.0) a = std::min(a, root);
        }
      }
      if (du[0] < 0.0) a = std::min(a, -u[0] / du[0]);
      return a;
    }
    case ConeKind::Psd: {
      Eigen::MatrixXd U = svec_to_mat(u, blk.side);
      Eigen::LLT<Eigen::MatrixXd> llt(U);
      if (llt.info() != Eigen::Success) return 0.0;
      Eigen::MatrixXd L = llt.matrixL();
      Eigen::MatrixXd B = svec_to_mat(du, blk.side);
      Eigen::MatrixXd T = L.triangularView<Eigen::Lower>().solve(B);
      T = L.triangularView<Eigen::Lower>().solve(T.transpose()).eval();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (T + T.transpose()),
                                                        Eigen::EigenvaluesOnly);
      const double rho = es.eigenvalues().minCoeff();
      return rho >= 0.0 ? inf : -1.0 / rho;
    }
    case ConeKind::Zero:
      return inf;
  }
  return inf;
}

// Nesterov-Todd scaling of one symmetric cone block: a linear map W with
// W z = W^{-T} s = lambda for the current interior pair (s, z).
struct NtScaling {
  ConeBlock blk;
  // NonNeg
  Eigen::VectorXd d;
  // SecondOrder: W = eta*(2 wb wb^T - J)
  double eta = 0.0;
  Eigen::VectorXd wb;
  // Psd: W u = svec(R^T mat(u) R)
  Eigen::MatrixXd R, Rinv;

  Eigen::VectorXd lam;

  bool compute(const Eigen::Ref<const Eigen::VectorXd>& s,
               const Eigen::Ref<const Eigen::VectorXd>& z) {
    switch (blk.kind) {
      case ConeKind::NonNeg: {
        d = (s.array() / z.array()).sqrt();
        lam = (s.array() * z.array()).sqrt();
        return d.allFinite() && lam.allFinite();
      }
      case ConeKind::SecondOrder: {
        const int n1 = blk.dim - 1;
        const double sres = s[0] * s[0] - s.tail(n1).squaredNorm();
        const double zres = z[0] * z[0] - z.tail(n1).squaredNorm();
        if (!(sres > 0.0) || !(zres > 0.0)) return false;
        const double snorm = std::sqrt(sres), znorm = std::sqrt(zres);
        Eigen::VectorXd sb = s / snorm, zb = z / znorm;
        const double gamma = std::sqrt(0.5 * (1.0 + sb.dot(zb)));
        // NT point on the unit hyperboloid, then its Jordan square root:
        // W = eta * (2 v v^T - J) with v = sqrt_J(wbar).
        wb = sb;
        wb[0] += zb[0];
        wb.tail(n1) -= zb.tail(n1);
        wb /= 2.0 * gamma;
        wb[0] += 1.0;
        wb /= std::sqrt(2.0 * wb[0]);
        eta = std::pow(sres / zres, 0.25);
        lam = apply_w(z);
        return lam.allFinite() && std::isfinite(eta);
      }
      case ConeKind::Psd: {
        Eigen::MatrixXd S = svec_to_mat(s, blk.side);
        Eigen::MatrixXd Z = svec_to_mat(z, blk.side);
        Eigen::LLT<Eigen::MatrixXd> llt_s(S), llt_z(Z);
        if (llt_s.info() != Eigen::Success || llt_z.info() != Eigen::Success) return false;
        Eigen::MatrixXd Ls = llt_s.matrixL();
        Eigen::MatrixXd Lz = llt_z.matrixL();
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(Lz.transpose() * Ls,
                                              Eigen::ComputeFullU | Eigen::ComputeFullV);
        Eigen::VectorXd sig = svd.singularValues();
        if (!(sig.minCoeff() > 0.0)) return false;
        Eigen::VectorXd isq = sig.array().sqrt().inverse();
        R = Ls * svd.matrixV() * isq.asDiagonal();
        Rinv = isq.asDiagonal() * svd.matrixU().transpose() * Lz.transpose();
        lam.setZero(blk.dim);
        int k = 0;
        for (int j = 0; j < blk.side; ++j) {
          lam[k] = sig[j];
          k += blk.side - j;
        }
        return true;
      }
      case ConeKind::Zero:
        return false;
    }
    return false;
  }

  Eigen::VectorXd apply_w(const Eigen::Ref<const Eigen::VectorXd>& u) const {
    switch (blk.kind) {
      case ConeKind::NonNeg:
        return (d.array() * u.array()).matrix();
      case ConeKind::SecondOrder: {
        Eigen::VectorXd ju = u;
        ju.tail(blk.dim - 1) *= -1.0;
        return eta * (2.0 * wb * wb.dot(u) - ju);
      }
      case ConeKind::Psd: {
        Eigen::VectorXd out(blk.dim);
        mat_to_svec(R.transpose() * svec_to_mat(u, blk.side) * R, out);
        return out;
      }
      case ConeKind::Zero:
        return u;
    }
    return u;
  }

  Eigen::VectorXd apply_wt(const Eigen::Ref<const Eigen::VectorXd>& u) const {
    if (blk.kind != ConeKind::Psd) return apply_w(u);  // W symmetric for nonneg/SOC
    Eigen::VectorXd out(blk.dim);
    mat_to_svec(R * svec_to_mat(u, blk.side) * R.transpose(), out);
    return out;
  }

  Eigen::VectorXd apply_winv_t(const Eigen::Ref<const Eigen::VectorXd>& u) const {
    switch (blk.kind) {
      case ConeKind::NonNeg:
        return (u.array() / d.array()).matrix();
      case ConeKind::SecondOrder: {
        Eigen::VectorXd jw = wb;
        jw.tail(blk.dim - 1) *= -1.0;
        Eigen::VectorXd ju = u;
        ju.tail(blk.dim - 1) *= -1.0;
        return (2.0 * jw * jw.dot(u) - ju) / eta;
      }
      case ConeKind::Psd: {
        Eigen::VectorXd out(blk.dim);
        mat_to_svec(Rinv * svec_to_mat(u, blk.side) * Rinv.transpose(), out);
        return out;
      }
      case ConeKind::Zero:
        return u;
    }
    return u;
  }

  /// Writes W^T W into the given dense block.
  void fill_wtw(Eigen::Ref<Eigen::MatrixXd> out) const {
    switch (blk.kind) {
      case ConeKind::NonNeg:
        out.setZero();
        out.diagonal() = d.array().square();
        break;
      case ConeKind::SecondOrder: {
        const int dim = blk.dim;
        Eigen::VectorXd jw = wb;
        jw.tail(dim - 1) *= -1.0;
        const double c0 = wb.squaredNorm();
        out.setIdentity();
        out += 4.0 * c0 * wb * wb.transpose();
        out -= 2.0 * wb * jw.transpose();
        out -= 2.0 * jw * wb.transpose();
        out *= eta * eta;
        break;
      }
      case ConeKind::Psd: {
        // Apply W^T W to each basis vector; R R^T conjugation twice.
        Eigen::MatrixXd P = R * R.transpose();
        Eigen::VectorXd col(blk.dim);
        Eigen::VectorXd basis = Eigen::VectorXd::Zero(blk.dim);
        for (int k = 0; k < blk.dim; ++k) {
          basis[k] = 1.0;
          mat_to_svec(P * svec_to_mat(basis, blk.side) * P, col);
          out.col(k) = col;
          basis[k] = 0.0;
        }
        break;
      }
      case ConeKind::Zero:
        break;
    }
  }
};

inline Eigen::VectorXd jordan_product(const ConeBlock& blk,
                                      const Eigen::Ref<const Eigen::VectorXd>& u,
                                      const Eigen::Ref<const Eigen::VectorXd>& v) {
  switch (blk.kind) {
    case ConeKind::NonNeg:
      return (u.array() * v.array()).matrix();
    case ConeKind::SecondOrder: {
      Eigen::VectorXd out(blk.dim);
      out[0] = u.dot(v);
      out.tail(blk.dim - 1) = u[0] * v.tail(blk.dim - 1) + v[0] * u.tail(blk.dim - 1);
      return out;
    }
    case ConeKind::Psd: {
      Eigen::MatrixXd U = svec_to_mat(u, blk.side), V = svec_to_mat(v, blk.side);
      Eigen::VectorXd out(blk.dim);
      mat_to_svec(0.5 * (U * V + V * U), out);
      return out;
    }
    case ConeKind::Zero:
      return Eigen::VectorXd::Zero(blk.dim);
  }
  return Eigen::VectorXd::Zero(blk.dim);
}

/// Solves lam o u = v for u in the block's Jordan algebra.
inline Eigen::VectorXd jordan_solve(const ConeBlock& blk,
                                    const Eigen::Ref<const Eigen::VectorXd>& lam,
                                    const Eigen::Ref<const Eigen::VectorXd>& v) {
  switch (blk.kind) {
    case ConeKind::NonNeg:
      return (v.array() / lam.array()).matrix();
    case ConeKind::SecondOrder: {
      const int n1 = blk.dim - 1;
      const double delta = lam[0] * lam[0] - lam.tail(n1).squaredNorm();
      Eigen::VectorXd u(blk.dim);
      u[0] = (lam[0] * v[0] - lam.tail(n1).dot(v.tail(n1))) / delta;
      u.tail(n1) = (v.tail(n1) - u[0] * lam.tail(n1)) / lam[0];
      return u;
    }
    case ConeKind::Psd: {
      // lam is diagonal in svec storage after NT scaling.
      Eigen::VectorXd diag(blk.side);
      int k = 0;
      for (int j = 0; j < blk.side; ++j) {
        diag[j] = lam[k];
        k += blk.side - j;
      }
      Eigen::MatrixXd V = svec_to_mat(v, blk.side);
      Eigen::MatrixXd U(blk.side, blk.side);
      for (int j = 0; j < blk.side; ++j)
        for (int i = 0; i < blk.side; ++i) U(i, j) = 2.0 * V(i, j) / (diag[i] + diag[j]);
      Eigen::VectorXd out(blk.dim);
      mat_to_svec(0.5 * (U + U.transpose()), out);
      return out;
    }
    case ConeKind::Zero:
      return Eigen::VectorXd::Zero(blk.dim);
  }
  return Eigen::VectorXd::Zero(blk.dim);
}

}  // namespace conedetail

/// Normalized KKT residuals of a candidate primal/dual pair. The dual
/// residual includes the dual-cone membership error of y; the gap is
/// |c.x + b.y| normalized by the larger of the two objective magnitudes.
inline KktResiduals kkt_residuals(const ConeProgram& p, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& y, const Eigen::VectorXd& s) {
  KktResiduals r;
  r.primal = (p.A * x + s - p.b).norm() / std::max(1.0, p.b.norm());
  double dual_lin = (p.A.transpose() * y + p.c).norm();
  double cone_err = 0.0;
  int off = 0;
  for (const ConeBlock& blk : p.cones) {
    if (blk.kind != ConeKind::Zero && blk.dim > 0) {
      const double margin = conedetail::inside_margin(blk, y.segment(off, blk.dim));
      cone_err = std::max(cone_err, -std::min(0.0, margin));
    }
    off += blk.dim;
  }
  r.dual = dual_lin / std::max(1.0, p.c.norm()) + cone_err / std::max(1.0, y.norm());
  const double px = p.c.dot(x), dy = p.b.dot(y);
  r.gap = std::abs(px + dy) / std::max({1.0, std::abs(px), std::abs(dy)});
  return r;
}

/**
 * Primal-dual interior-point solver on the homogeneous self-dual embedding
 * with Nesterov-Todd scaling and Mehrotra predictor-corrector steps.
 * The KKT system is solved by a dense LU factorization with static
 * regularization and iterative refinement; problem sizes here stay in the
 * hundreds of rows, where dense factorization is both robust and fast.
 */
inline ConeSolution solve(const ConeProgram& prog, const SolverOptions& opts = {}) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  namespace cd = conedetail;

  prog.validate();
  const int n = prog.num_vars();
  const int m = prog.num_rows();

  ConeSolution sol;
  sol.x = VectorXd::Zero(n);
  sol.y = VectorXd::Zero(m);
  sol.s = VectorXd::Zero(m);

  // Split rows: Zero blocks become equality rows, the rest form the barrier
  // part. Remember original offsets to reassemble y and s at the end.
  struct BlockMap {
    ConeBlock blk;
    int orig = 0;
    int local = 0;
  };
  std::vector<BlockMap> eq_blocks, cone_blocks;
  int p = 0, mk = 0, degree = 0;
  {
    int off = 0;
    for (const ConeBlock& blk : prog.cones) {
      if (blk.dim == 0) continue;
      if (blk.kind == ConeKind::Zero) {
        eq_blocks.push_back({blk, off, p});
        p += blk.dim;
      } else {
        cone_blocks.push_back({blk, off, mk});
        mk += blk.dim;
        degree += blk.kind == ConeKind::NonNeg ? blk.dim
                  : blk.kind == ConeKind::SecondOrder ? 1
                                                      : blk.side;
      }
      off += blk.dim;
    }
  }

  // Degenerate case: no barrier rows. A single Newton solve settles it.
  if (mk == 0) {
    MatrixXd K = MatrixXd::Zero(n + p, n + p);
    VectorXd rhs(n + p);
    rhs.head(n) = -prog.c;
    Eigen::MatrixXd Adense = prog.A.toDense();
    for (const BlockMap& bm : eq_blocks) {
      K.block(n + bm.local, 0, bm.blk.dim, n) = Adense.middleRows(bm.orig, bm.blk.dim);
      K.block(0, n + bm.local, n, bm.blk.dim) =
          Adense.middleRows(bm.orig, bm.blk.dim).transpose();
      rhs.segment(n + bm.local, bm.blk.dim) = prog.b.segment(bm.orig, bm.blk.dim);
    }
    K.topLeftCorner(n, n).diagonal().array() += opts.static_reg;
    K.bottomRightCorner(p, p).diagonal().array() -= opts.static_reg;
    Eigen::PartialPivLU<MatrixXd> lu(K);
    VectorXd u = lu.solve(rhs);
    sol.x = u.head(n);
    for (const BlockMap& bm : eq_blocks)
      sol.y.segment(bm.orig, bm.blk.dim) = u.segment(n + bm.local, bm.blk.dim);
    KktResiduals rr = kkt_residuals(prog, sol.x, sol.y, sol.s);
    sol.primal_res = rr.primal;
    sol.dual_res = rr.dual;
    sol.gap = rr.gap;
    sol.objective = prog.c.dot(sol.x);
    sol.status = (rr.primal <= opts.feas_tol * 10 && rr.dual <= opts.feas_tol * 10)
                     ? SolveStatus::Optimal
                     : SolveStatus::NumericalFailure;
    sol.iterations = 1;
    return sol;
  }

  // Internal equality/cone data.
  MatrixXd Aeq(p, n), G(mk, n);
  VectorXd beq(p), h(mk);
  {
    Eigen::MatrixXd Adense = prog.A.toDense();
    for (const BlockMap& bm : eq_blocks) {
      Aeq.middleRows(bm.local, bm.blk.dim) = Adense.middleRows(bm.orig, bm.blk.dim);
      beq.segment(bm.local, bm.blk.dim) = prog.b.segment(bm.orig, bm.blk.dim);
    }
    for (const BlockMap& bm : cone_blocks) {
      G.middleRows(bm.local, bm.blk.dim) = Adense.middleRows(bm.orig, bm.blk.dim);
      h.segment(bm.local, bm.blk.dim) = prog.b.segment(bm.orig, bm.blk.dim);
    }
  }
  const VectorXd& c = prog.c;

  const int N = n + p + mk;
  MatrixXd K0 = MatrixXd::Zero(N, N);
  K0.block(n, 0, p, n) = Aeq;
  K0.block(0, n, n, p) = Aeq.transpose();
  K0.block(n + p, 0, mk, n) = G;
  K0.block(0, n + p, n, mk) = G.transpose();

  Eigen::PartialPivLU<MatrixXd> lu;
  MatrixXd Kreg(N, N);

  auto factor = [&](const std::vector<cd::NtScaling>& scalings) {
    // (3,3) block: -W^T W per cone block.
    K0.block(n + p, n + p, mk, mk).setZero();
    for (std::size_t i = 0; i < scalings.size(); ++i) {
      const int off = n + p + cone_blocks[i].local;
      const int d = cone_blocks[i].blk.dim;
      MatrixXd wtw(d, d);
      scalings[i].fill_wtw(wtw);
      K0.block(off, off, d, d) = -wtw;
    }
    Kreg = K0;
    Kreg.topLeftCorner(n, n).diagonal().array() += opts.static_reg;
    Kreg.bottomRightCorner(p + mk, p + mk).diagonal().array() -= opts.static_reg;
    lu.compute(Kreg);
  };

  auto kkt_solve = [&](const VectorXd& rhs) {
    VectorXd u = lu.solve(rhs);
    for (int it = 0; it < opts.refine_steps; ++it) {
      VectorXd res = rhs - K0 * u;
      u += lu.solve(res);
    }
    return u;
  };

  // Block-wise helpers over the stacked cone rows.
  auto each_block = [&](auto&& fn) {
    for (std::size_t i = 0; i < cone_blocks.size(); ++i)
      fn(i, cone_blocks[i].blk, cone_blocks[i].local);
  };

  auto cone_margin = [&](const VectorXd& u) {
    double margin = std::numeric_limits<double>::infinity();
    each_block([&](std::size_t, const ConeBlock& blk, int off) {
      margin = std::min(margin, cd::inside_margin(blk, u.segment(off, blk.dim)));
    });
    return margin;
  };

  auto cone_max_step = [&](const VectorXd& u, const VectorXd& du) {
    double a = std::numeric_limits<double>::infinity();
    each_block([&](std::size_t, const ConeBlock& blk, int off) {
      a = std::min(a, cd::max_step(blk, u.segment(off, blk.dim), du.segment(off, blk.dim)));
    });
    return a;
  };

  VectorXd cone_e(mk);
  each_block([&](std::size_t, const ConeBlock& blk, int off) {
    cd::identity_element(blk, cone_e.segment(off, blk.dim));
  });

  // Initial point from two least-squares solves with identity scaling.
  std::vector<cd::NtScaling> scalings(cone_blocks.size());
  each_block([&](std::size_t i, const ConeBlock& blk, int off) {
    scalings[i].blk = blk;
    Eigen::VectorXd e = cone_e.segment(off, blk.dim);
    scalings[i].compute(e, e);
  });
  factor(scalings);

  VectorXd x(n), y(p), s(mk), z(mk);
  {
    VectorXd rhs = VectorXd::Zero(N);
    rhs.segment(n, p) = beq;
    rhs.segment(n + p, mk) = h;
    VectorXd u = kkt_solve(rhs);
    x = u.head(n);
    s = -u.segment(n + p, mk);  // s = h - G x up to scaling block
    const double margin = cone_margin(s);
    if (!(margin > 0.0)) s += (1.0 - margin) * cone_e;

    rhs.setZero();
    rhs.head(n) = -c;
    u = kkt_solve(rhs);
    y = u.segment(n, p);
    z = u.segment(n + p, mk);
    const double zmargin = cone_margin(z);
    if (!(zmargin > 0.0)) z += (1.0 - zmargin) * cone_e;
  }
  double tau = 1.0, kappa = 1.0;

  const double bnorm = std::max(1.0, beq.norm());
  const double hnorm = std::max(1.0, h.norm());
  const double cnorm = std::max(1.0, c.norm());

  // Best iterate fallback for MaxIter exits.
  double best_merit = std::numeric_limits<double>::infinity();
  VectorXd best_x = x, best_y = y, best_s = s, best_z = z;
  double best_tau = tau;

  auto fail = [&](int iters) {
    sol.status = SolveStatus::NumericalFailure;
    sol.iterations = iters;
    return sol;
  };

  auto pack_solution = [&](SolveStatus status, const VectorXd& xv, const VectorXd& yv,
                           const VectorXd& zv, const VectorXd& sv, double scale, int iters) {
    sol.status = status;
    sol.x = xv / scale;
    for (const BlockMap& bm : eq_blocks)
      sol.y.segment(bm.orig, bm.blk.dim) = yv.segment(bm.local, bm.blk.dim) / scale;
    for (const BlockMap& bm : cone_blocks) {
      sol.y.segment(bm.orig, bm.blk.dim) = zv.segment(bm.local, bm.blk.dim) / scale;
      sol.s.segment(bm.orig, bm.blk.dim) = sv.segment(bm.local, bm.blk.dim) / scale;
    }
    sol.iterations = iters;
    sol.objective = prog.c.dot(sol.x);
    KktResiduals rr = kkt_residuals(prog, sol.x, sol.y, sol.s);
    sol.primal_res = rr.primal;
    sol.dual_res = rr.dual;
    sol.gap = rr.gap;
    return sol;
  };

  VectorXd rhs(N), v1(N), v2(N);
  VectorXd ds(mk), dz_aff(mk), ds_aff(mk), dcorr(mk), lam_lam(mk), dsol(mk);

  int iter = 0;
  for (; iter < opts.max_iters; ++iter) {
    // Residuals of the homogeneous model.
    VectorXd r_x = Aeq.transpose() * y + G.transpose() * z + c * tau;
    VectorXd r_y = Aeq * x - beq * tau;
    VectorXd r_z = G * x + s - h * tau;
    const double r_tau = c.dot(x) + beq.dot(y) + h.dot(z) + kappa;

    const double stz = s.dot(z);
    const double mu = (stz + tau * kappa) / (degree + 1);
    if (!std::isfinite(mu) || tau <= 0.0) return fail(iter);

    const double pcost = c.dot(x) / tau;
    const double dcost = -(beq.dot(y) + h.dot(z)) / tau;
    const double pres =
        std::max(p > 0 ? r_y.norm() / bnorm : 0.0, r_z.norm() / hnorm) / tau;
    const double dres = r_x.norm() / cnorm / tau;
    const double absgap = stz / (tau * tau);
    const double relgap =
        absgap / std::max(1e-10, std::min(std::abs(pcost), std::abs(dcost)));

    if (opts.verbose) {
      std::printf(
          "iter %3d  pcost % .6e  dcost % .6e  pres %.2e  dres %.2e  gap %.2e  "
          "tau %.2e  kappa %.2e  mu %.2e\n",
          iter, pcost, dcost, pres, dres, absgap, tau, kappa, mu);
#ifdef GEOBEAM_TRACE_CERT
      std::printf("      |x| %.3e |z| %.3e |s| %.3e |rx| %.3e |rz| %.3e rtau % .3e "
                  "ctx % .3e hz+by % .3e smargin %.3e zmargin %.3e\n",
                  x.norm(), z.norm(), s.norm(), r_x.norm(), r_z.norm(), r_tau,
                  c.dot(x), beq.dot(y) + h.dot(z), cone_margin(s), cone_margin(z));
#endif
    }

    const double merit = std::max({pres, dres, std::min(absgap, relgap)});
    if (merit < best_merit) {
      best_merit = merit;
      best_x = x;
      best_y = y;
      best_s = s;
      best_z = z;
      best_tau = tau;
    }

    if (pres <= opts.feas_tol && dres <= opts.feas_tol &&
        (absgap <= opts.gap_tol || relgap <= opts.gap_tol)) {
      return pack_solution(SolveStatus::Optimal, x, y, z, s, tau, iter);
    }

    // Certificate checks.
    const double dual_ray_obj = -(beq.dot(y) + h.dot(z));
    if (dual_ray_obj > 0.0) {
      const double pinfres =
          (Aeq.transpose() * y + G.transpose() * z).norm() / cnorm / dual_ray_obj;
      if (pinfres <= opts.feas_tol)
        return pack_solution(SolveStatus::Infeasible, VectorXd::Zero(n), y, z,
                             VectorXd::Zero(mk), dual_ray_obj, iter);
    }
    const double primal_ray_obj = -c.dot(x);
    if (primal_ray_obj > 0.0) {
      const double dinfres = std::max(p > 0 ? (Aeq * x).norm() / bnorm : 0.0,
                                      (G * x + s).norm() / hnorm) /
                             primal_ray_obj;
      if (dinfres <= opts.feas_tol)
        return pack_solution(SolveStatus::Unbounded, x, VectorXd::Zero(p),
                             VectorXd::Zero(mk), s, primal_ray_obj, iter);
    }

    // NT scaling and KKT factorization at the current iterate.
    bool ok = true;
    each_block([&](std::size_t i, const ConeBlock& blk, int off) {
      ok = ok && scalings[i].compute(s.segment(off, blk.dim), z.segment(off, blk.dim));
    });
    if (!ok) return fail(iter);
    factor(scalings);

    each_block([&](std::size_t i, const ConeBlock& blk, int off) {
      lam_lam.segment(off, blk.dim) = cd::jordan_product(
          blk, scalings[i].lam.segment(0, blk.dim), scalings[i].lam.segment(0, blk.dim));
    });

    // Direction with d tau eliminated: (dx,dy,dz) = v2 + dtau * v1.
    rhs.head(n) = -c;
    rhs.segment(n, p) = beq;
    rhs.segment(n + p, mk) = h;
    v1 = kkt_solve(rhs);
    const double den = c.dot(v1.head(n)) + beq.dot(v1.segment(n, p)) +
                       h.dot(v1.segment(n + p, mk)) - kappa / tau;
    if (!std::isfinite(den) || std::abs(den) < 1e-300) return fail(iter);

    auto compute_direction = [&](double eta_r, const VectorXd& d_s, double d_kt,
                                 VectorXd& dx_out, VectorXd& dy_out, VectorXd& dz_out,
                                 VectorXd& ds_out, double& dtau_out, double& dkappa_out) {
      each_block([&](std::size_t i, const ConeBlock& blk, int off) {
        dsol.segment(off, blk.dim) = scalings[i].apply_wt(cd::jordan_solve(
            blk, scalings[i].lam.segment(0, blk.dim), d_s.segment(off, blk.dim)));
      });
      rhs.head(n) = -(1.0 - eta_r) * r_x;
      rhs.segment(n, p) = -(1.0 - eta_r) * r_y;
      rhs.segment(n + p, mk) = -(1.0 - eta_r) * r_z - dsol;
      v2 = kkt_solve(rhs);
      const double num = -(1.0 - eta_r) * r_tau - d_kt / tau -
                         (c.dot(v2.head(n)) + beq.dot(v2.segment(n, p)) +
                          h.dot(v2.segment(n + p, mk)));
      dtau_out = num / den;
      dx_out = v2.head(n) + dtau_out * v1.head(n);
      dy_out = v2.segment(n, p) + dtau_out * v1.segment(n, p);
      dz_out = v2.segment(n + p, mk) + dtau_out * v1.segment(n + p, mk);
      // ds = W^T(lam \ d_s) - W^T W dz
      each_block([&](std::size_t i, const ConeBlock& blk, int off) {
        ds_out.segment(off, blk.dim) =
            dsol.segment(off, blk.dim) -
            scalings[i].apply_wt(scalings[i].apply_w(dz_out.segment(off, blk.dim)));
      });
      dkappa_out = (d_kt - kappa * dtau_out) / tau;
    };

    // Predictor.
    VectorXd dx(n), dy(p), dz(mk);
    double dtau = 0.0, dkappa = 0.0;
    compute_direction(0.0, -lam_lam, -tau * kappa, dx, dy, dz_aff, ds_aff, dtau, dkappa);

    double alpha_aff = std::min(cone_max_step(s, ds_aff), cone_max_step(z, dz_aff));
    if (dtau < 0.0) alpha_aff = std::min(alpha_aff, -tau / dtau);
    if (dkappa < 0.0) alpha_aff = std::min(alpha_aff, -kappa / dkappa);
    alpha_aff = std::min(alpha_aff, 1.0);
    const double sigma = std::pow(1.0 - alpha_aff, 3);

    // Corrector: Mehrotra second-order term in the scaled space.
    each_block([&](std::size_t i, const ConeBlock& blk, int off) {
      dcorr.segment(off, blk.dim) =
          cd::jordan_product(blk, scalings[i].apply_winv_t(ds_aff.segment(off, blk.dim)),
                             scalings[i].apply_w(dz_aff.segment(off, blk.dim)));
    });
    const double dtau_aff = dtau, dkappa_aff = dkappa;
    VectorXd d_s = -lam_lam + sigma * mu * cone_e - dcorr;
    const double d_kt = -tau * kappa + sigma * mu - dtau_aff * dkappa_aff;

    compute_direction(sigma, d_s, d_kt, dx, dy, dz, ds, dtau, dkappa);

    double alpha = std::min(cone_max_step(s, ds), cone_max_step(z, dz));
    if (dtau < 0.0) alpha = std::min(alpha, -tau / dtau);
    if (dkappa < 0.0) alpha = std::min(alpha, -kappa / dkappa);
    alpha = std::min(0.99 * alpha, 1.0);
    if (!std::isfinite(alpha) || alpha <= 0.0) return fail(iter);


    x += alpha * dx;
    y += alpha * dy;
    z += alpha * dz;
    s += alpha * ds;
    tau += alpha * dtau;
    kappa += alpha * dkappa;
  }

  // Iteration cap: return the best iterate seen, tagged MaxIter.
  return pack_solution(SolveStatus::MaxIter, best_x, best_y, best_z, best_s, best_tau,
                       opts.max_iters);
}

/// Writes the program in a plain-text triplet format (matrix-market style)
/// for external cross-checking.
inline void dump_program(const ConeProgram& p, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("dump_program: cannot open " + path);
  f << "%%cone-program rows=" << p.num_rows() << " cols=" << p.num_vars() << "\n";
  f << "cones";
  for (const ConeBlock& blk : p.cones) {
    switch (blk.kind) {
      case ConeKind::Zero: f << " z" << blk.dim; break;
      case ConeKind::NonNeg: f << " l" << blk.dim; break;
      case ConeKind::SecondOrder: f << " q" << blk.dim; break;
      case ConeKind::Psd: f << " s" << blk.side; break;
    }
  }
  f << "\nc";
  for (int i = 0; i < p.num_vars(); ++i) f << " " << p.c[i];
  f << "\nb";
  for (int i = 0; i < p.num_rows(); ++i) f << " " << p.b[i];
  f << "\nA triplets (row col value)\n";
  for (int k = 0; k < p.A.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(p.A, k); it; ++it)
      f << it.row() << " " << it.col() << " " << it.value() << "\n";
}

// ---------------------------------------------------------------------------
// Incremental construction of cone programs from affine expressions.
// ---------------------------------------------------------------------------

/// Sparse affine functional: sum of coef * x[idx] plus a constant.
struct LinExpr {
  std::vector<std::pair<int, double>> terms;
  double constant = 0.0;

  static LinExpr constant_of(double v) {
    LinExpr e;
    e.constant = v;
    return e;
  }
  static LinExpr variable(int idx, double coef = 1.0) {
    LinExpr e;
    e.terms.emplace_back(idx, coef);
    return e;
  }
  LinExpr& add(int idx, double coef) {
    terms.emplace_back(idx, coef);
    return *this;
  }
  LinExpr& operator+=(const LinExpr& o) {
    terms.insert(terms.end(), o.terms.begin(), o.terms.end());
    constant += o.constant;
    return *this;
  }
  LinExpr& operator*=(double f) {
    for (auto& t : terms) t.second *= f;
    constant *= f;
    return *this;
  }
};

class ConeProgramBuilder {
 public:
  int add_vars(int count) {
    const int first = nvars_;
    nvars_ += count;
    return first;
  }
  int num_vars() const { return nvars_; }

  void set_objective(int idx, double coef) { objective_.emplace_back(idx, coef); }

  /// expr == 0
  void add_zero(const LinExpr& e) { push_row(e, ConeBlock::zero(1)); }

  /// expr >= 0
  void add_nonneg(const LinExpr& e) { push_row(e, ConeBlock::nonneg(1)); }

  /// || (rows[1], ..., rows[k]) || <= rows[0]
  void add_soc(const std::vector<LinExpr>& rows) {
    if (rows.size() < 2) throw std::invalid_argument("SOC block needs >= 2 rows");
    cones_.push_back(ConeBlock::soc(static_cast<int>(rows.size())));
    for (const LinExpr& e : rows) append_row(e);
  }

  /// mat(svec rows) is positive semidefinite; rows in svec order.
  void add_psd(const std::vector<LinExpr>& rows, int side) {
    if (static_cast<int>(rows.size()) != conedetail::svec_dim(side))
      throw std::invalid_argument("PSD block row count mismatch");
    cones_.push_back(ConeBlock::psd(side));
    for (const LinExpr& e : rows) append_row(e);
  }

  ConeProgram build() const {
    ConeProgram p;
    p.c = Eigen::VectorXd::Zero(nvars_);
    for (auto [idx, coef] : objective_) p.c[idx] += coef;
    p.b = Eigen::VectorXd::Zero(static_cast<int>(bvals_.size()));
    for (std::size_t i = 0; i < bvals_.size(); ++i) p.b[static_cast<int>(i)] = bvals_[i];
    p.A.resize(static_cast<int>(bvals_.size()), nvars_);
    p.A.setFromTriplets(triplets_.begin(), triplets_.end());
    p.cones = cones_;
    p.validate();
    return p;
  }

 private:
  void push_row(const LinExpr& e, ConeBlock blk) {
    cones_.push_back(blk);
    append_row(e);
  }
  // Row encodes s = e(x), i.e. A row = -coeffs, b = constant.
  void append_row(const LinExpr& e) {
    const int row = static_cast<int>(bvals_.size());
    for (auto [idx, coef] : e.terms) {
      if (idx < 0 || idx >= nvars_) throw std::invalid_argument("LinExpr: bad index");
      triplets_.emplace_back(row, idx, -coef);
    }
    bvals_.push_back(e.constant);
  }

  int nvars_ = 0;
  std::vector<std::pair<int, double>> objective_;
  std::vector<Eigen::Triplet<double>> triplets_;
  std::vector<double> bvals_;
  std::vector<ConeBlock> cones_;
};

}  // namespace geobeam
