#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "geobeam/channel.hpp"
#include "geobeam/cones.hpp"

namespace geobeam {

// ---------------------------------------------------------------------------
// Real embedding of complex beams.
//
// The decision vector stacks [Re w_0; Im w_0; Re w_1; Im w_1; ...], so each
// beam occupies 2M consecutive entries. Auxiliary scalar variables live after
// the beam block.
// ---------------------------------------------------------------------------

struct BeamLayout {
  int antennas = 0;
  int beams = 0;

  int dim() const { return 2 * antennas * beams; }
  int re_offset(int beam) const { return 2 * antennas * beam; }
  int im_offset(int beam) const { return 2 * antennas * beam + antennas; }
};

/// phi(h, w) = [Re(h^H w), Im(h^H w)]; its squared norm is |h^H w|^2.
inline Eigen::Vector2d phi(const Eigen::VectorXcd& h, const Eigen::VectorXcd& w) {
  if (h.size() != w.size()) throw std::invalid_argument("phi: length mismatch");
  const std::complex<double> v = h.dot(w);  // h^H w
  return {v.real(), v.imag()};
}

/// The two coordinates of phi as affine functionals of the embedding.
struct PhiRows {
  LinExpr re, im;
};

inline PhiRows phi_rows(const BeamLayout& layout, const Eigen::VectorXcd& h, int beam) {
  PhiRows rows;
  const int M = layout.antennas;
  const int ro = layout.re_offset(beam);
  const int io = layout.im_offset(beam);
  for (int m = 0; m < M; ++m) {
    const double hr = h[m].real(), hi = h[m].imag();
    // Re(h^H w) = hr.Re(w) + hi.Im(w);  Im(h^H w) = hr.Im(w) - hi.Re(w)
    rows.re.add(ro + m, hr);
    rows.re.add(io + m, hi);
    rows.im.add(io + m, hr);
    rows.im.add(ro + m, -hi);
  }
  return rows;
}

inline Eigen::VectorXd embed(const BeamformerSet& W, const BeamLayout& layout) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(layout.dim());
  int b = 0;
  auto put = [&](const Eigen::VectorXcd& w) {
    for (int m = 0; m < layout.antennas; ++m) {
      x[layout.re_offset(b) + m] = w[m].real();
      x[layout.im_offset(b) + m] = w[m].imag();
    }
    ++b;
  };
  for (const auto& w : W.group) put(w);
  if (W.extra) put(*W.extra);
  return x;
}

inline BeamformerSet unembed(const Eigen::Ref<const Eigen::VectorXd>& x,
                             const BeamLayout& layout, bool has_extra = false) {
  BeamformerSet W;
  const int M = layout.antennas;
  for (int b = 0; b < layout.beams; ++b) {
    Eigen::VectorXcd w(M);
    for (int m = 0; m < M; ++m)
      w[m] = std::complex<double>(x[layout.re_offset(b) + m], x[layout.im_offset(b) + m]);
    if (has_extra && b == layout.beams - 1)
      W.extra = std::move(w);
    else
      W.group.push_back(std::move(w));
  }
  return W;
}

/// First-order Taylor minorizer of |h^H w|^2 around phi0, as an affine
/// functional of the embedding: 2 phi0 . phi(x) - |phi0|^2.
inline LinExpr taylor_minorizer(const Eigen::Vector2d& phi0, const PhiRows& rows) {
  LinExpr e;
  LinExpr re = rows.re;
  re *= 2.0 * phi0[0];
  LinExpr im = rows.im;
  im *= 2.0 * phi0[1];
  e += re;
  e += im;
  e.constant -= phi0.squaredNorm();
  return e;
}

/// Minorizer expansion point for beam w seen by channel h. A zero inner
/// product would freeze the minorizer at 0 and make any positive threshold
/// infeasible, so the point is nudged along the channel direction.
inline Eigen::Vector2d minorizer_point(const Eigen::VectorXcd& h,
                                       const Eigen::VectorXcd& w) {
  Eigen::Vector2d p = phi(h, w);
  const double scale = h.norm() * (w.norm() + 1e-6 * h.norm());
  if (p.norm() <= 1e-12 * scale || p.norm() == 0.0)
    p = phi(h, (w + 1e-6 * h).eval());
  return p;
}

namespace modeldetail {

// minorizer(x) >= threshold * (sum_k |h^H w_k|^2 + sigma^2), linearized on
// the left only. With L = minorizer/threshold the right side is a sum of
// squares, so the row becomes ||(2u, L-1)|| <= L+1 plus L >= 0.
inline void sinr_minorant_rows(ConeProgramBuilder& builder, const BeamLayout& layout,
                               const Eigen::VectorXcd& h, int target_beam,
                               double threshold, double noise_mw,
                               const Eigen::Vector2d& phi0,
                               const std::vector<int>& interferers) {
  if (!(threshold > 0.0)) throw std::invalid_argument("sinr row: threshold must be > 0");
  LinExpr L = taylor_minorizer(phi0, phi_rows(layout, h, target_beam));
  L *= 1.0 / threshold;
  const double sigma = std::sqrt(noise_mw);
  if (interferers.empty()) {
    LinExpr row = L;
    row.constant -= noise_mw;
    builder.add_nonneg(row);  // minorizer >= threshold * sigma^2
    return;
  }
  std::vector<LinExpr> soc;
  LinExpr top = L;
  top.constant += 1.0;
  soc.push_back(top);
  for (int k : interferers) {
    PhiRows pk = phi_rows(layout, h, k);
    pk.re *= 2.0;
    pk.im *= 2.0;
    soc.push_back(pk.re);
    soc.push_back(pk.im);
  }
  soc.push_back(LinExpr::constant_of(2.0 * sigma));
  LinExpr bottom = L;
  bottom.constant -= 1.0;
  soc.push_back(bottom);
  builder.add_soc(soc);
  builder.add_nonneg(L);
}

}  // namespace modeldetail

/// QoS row of the MM subproblem: group-g users decode their own message
/// against beams with indices above g (plus any extra interferer passed in).
inline void qos_row(ConeProgramBuilder& builder, const BeamLayout& layout,
                    const Eigen::VectorXcd& h, int g, double threshold,
                    double noise_mw, const Eigen::Vector2d& phi0,
                    const std::vector<int>& interferers) {
  modeldetail::sinr_minorant_rows(builder, layout, h, g, threshold, noise_mw, phi0,
                                  interferers);
}

/// SIC row: the same user decodes the farther group i's message (i < g)
/// against beams above i.
inline void sic_row(ConeProgramBuilder& builder, const BeamLayout& layout,
                    const Eigen::VectorXcd& h, int g, int i, double threshold,
                    double noise_mw, const Eigen::Vector2d& phi0,
                    const std::vector<int>& interferers) {
  if (i >= g) throw std::invalid_argument("sic_row: requires i < g");
  modeldetail::sinr_minorant_rows(builder, layout, h, i, threshold, noise_mw, phi0,
                                  interferers);
}

/// Conservative initialization row: Re(h^H w_target) upper-bounds |h^H w|,
/// so Re(h^H w_target) >= sqrt(threshold).||(phis of interferers, sigma)||
/// is feasible for the original constraint wherever it is feasible at all.
inline void socp_init_rows(ConeProgramBuilder& builder, const BeamLayout& layout,
                           const Eigen::VectorXcd& h, int target_beam,
                           double threshold, double noise_mw,
                           const std::vector<int>& interferers) {
  if (!(threshold > 0.0)) throw std::invalid_argument("socp_init: threshold must be > 0");
  const double root = std::sqrt(threshold);
  const double sigma = std::sqrt(noise_mw);
  LinExpr re = phi_rows(layout, h, target_beam).re;
  if (interferers.empty()) {
    re.constant -= root * sigma;
    builder.add_nonneg(re);
    return;
  }
  std::vector<LinExpr> soc;
  soc.push_back(re);
  for (int k : interferers) {
    PhiRows pk = phi_rows(layout, h, k);
    pk.re *= root;
    pk.im *= root;
    soc.push_back(pk.re);
    soc.push_back(pk.im);
  }
  soc.push_back(LinExpr::constant_of(root * sigma));
  builder.add_soc(soc);
}

/// Adds the transmit-power epigraph: a variable t with ||x_beams|| <= t and
/// objective t. The reported power is t^2.
inline int power_epigraph(ConeProgramBuilder& builder, const BeamLayout& layout) {
  const int t = builder.add_vars(1);
  builder.set_objective(t, 1.0);
  if (layout.dim() == 0) {
    builder.add_nonneg(LinExpr::variable(t));
    return t;
  }
  std::vector<LinExpr> soc;
  soc.push_back(LinExpr::variable(t));
  for (int j = 0; j < layout.dim(); ++j) soc.push_back(LinExpr::variable(j));
  builder.add_soc(soc);
  return t;
}

/// Total-power budget: ||x_beams|| <= sqrt(budget_mw).
inline void budget_row(ConeProgramBuilder& builder, const BeamLayout& layout,
                       double budget_mw) {
  std::vector<LinExpr> soc;
  soc.push_back(LinExpr::constant_of(std::sqrt(budget_mw)));
  for (int j = 0; j < layout.dim(); ++j) soc.push_back(LinExpr::variable(j));
  builder.add_soc(soc);
}

/// ||x_beams||^2 <= expr, as ||(2x, expr-1)|| <= expr+1.
inline void power_quadratic_row(ConeProgramBuilder& builder, const BeamLayout& layout,
                                const LinExpr& bound) {
  std::vector<LinExpr> soc;
  LinExpr top = bound;
  top.constant += 1.0;
  soc.push_back(top);
  for (int j = 0; j < layout.dim(); ++j) soc.push_back(LinExpr::variable(j, 2.0));
  LinExpr bottom = bound;
  bottom.constant -= 1.0;
  soc.push_back(bottom);
  builder.add_soc(soc);
  builder.add_nonneg(bound);
}

/// scalar^2 <= expr, as ||(2 scalar, expr-1)|| <= expr+1.
inline void square_row(ConeProgramBuilder& builder, int scalar_var, const LinExpr& bound) {
  LinExpr top = bound;
  top.constant += 1.0;
  LinExpr bottom = bound;
  bottom.constant -= 1.0;
  builder.add_soc({top, LinExpr::variable(scalar_var, 2.0), bottom});
  builder.add_nonneg(bound);
}

// ---------------------------------------------------------------------------
// MM iteration record
// ---------------------------------------------------------------------------

struct MMIterate {
  double objective = 0.0;       // objective of the original problem at this iterate
  double worst_violation = 0.0; // most negative relative constraint margin
  int solver_iterations = 0;
};

struct MMTrace {
  std::vector<MMIterate> iterates;
  bool converged = false;
  BeamformerSet final_beams;
};

}  // namespace geobeam
