#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "geobeam/channel.hpp"
#include "geobeam/cones.hpp"
#include "geobeam/modeling.hpp"

namespace geobeam {

/// One SINR requirement: channel h must receive beam `target` at `threshold`
/// against the listed interfering beams plus noise. The three NOMA row
/// families (QoS, SIC, late-joiner SIC) and the SDMA/OMA variants are all
/// instances with different interferer sets.
struct SinrRequirement {
  Eigen::VectorXcd h;
  int target = 0;
  double threshold = 0.0;
  std::vector<int> interferers;
};

inline double requirement_sinr(const SinrRequirement& req, const BeamformerSet& W,
                               const BeamLayout& layout, double noise_mw) {
  auto beam_of = [&](int idx) -> const Eigen::VectorXcd& {
    const int G = static_cast<int>(W.group.size());
    return idx < G ? W.group[idx] : *W.extra;
  };
  (void)layout;
  double denom = noise_mw;
  for (int k : req.interferers) denom += std::norm(req.h.dot(beam_of(k)));
  return std::norm(req.h.dot(beam_of(req.target))) / denom;
}

/// Worst relative margin min(sinr/threshold - 1) over all requirements.
inline double worst_margin(const std::vector<SinrRequirement>& reqs,
                           const BeamformerSet& W, const BeamLayout& layout,
                           double noise_mw) {
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& req : reqs)
    worst = std::min(worst,
                     requirement_sinr(req, W, layout, noise_mw) / req.threshold - 1.0);
  return worst;
}

/// QoS + SIC requirement rows of the NOMA downlink: group-g users decode
/// messages g, g-1, ..., 0 in distance order, each against the beams that
/// are not yet cancelled.
inline std::vector<SinrRequirement> noma_requirements(
    const ChannelRealization& chan, const std::vector<double>& thresholds) {
  const int G = chan.group_count();
  std::vector<SinrRequirement> reqs;
  for (int g = 0; g < G; ++g) {
    for (int u = 0; u < chan.users_in(g); ++u) {
      for (int msg = g; msg >= 0; --msg) {
        SinrRequirement r;
        r.h = chan.h[g][u];
        r.target = msg;
        r.threshold = thresholds[msg];
        for (int k = msg + 1; k < G; ++k) r.interferers.push_back(k);
        reqs.push_back(std::move(r));
      }
    }
  }
  return reqs;
}

enum class MMStatus { Optimal, InfeasibleInit, NumericalFailure };

struct PowerMinResult {
  MMStatus status = MMStatus::NumericalFailure;
  BeamformerSet beams;
  MMTrace trace;
  double power_mw = std::numeric_limits<double>::quiet_NaN();
  SolveStatus init_status = SolveStatus::NumericalFailure;
};

struct MMOptions {
  double mm_tol = 1e-4;
  int max_mm_iters = 50;
  SolverOptions solver = tight_solver_options();
  /// Start from these beams instead of the SOCP initialization.
  std::optional<BeamformerSet> start;

  /// MM accuracy tracks the subproblem accuracy, so the inner solves aim
  /// well below the documented closed-form tolerances.
  static SolverOptions tight_solver_options() {
    SolverOptions o;
    o.feas_tol = 1e-10;
    o.gap_tol = 1e-10;
    return o;
  }
};

namespace mmdetail {
/// Solve at the requested tolerance; if that stalls, retry at the solver's
/// stock tolerance before giving up.
inline ConeSolution solve_with_retry(const ConeProgram& p, const SolverOptions& opts) {
  ConeSolution sol = solve(p, opts);
  if (sol.status == SolveStatus::MaxIter || sol.status == SolveStatus::NumericalFailure) {
    SolverOptions relaxed = opts;
    relaxed.feas_tol = std::max(opts.feas_tol, 1e-8);
    relaxed.gap_tol = std::max(opts.gap_tol, 1e-8);
    ConeSolution retry = solve(p, relaxed);
    if (retry.status == SolveStatus::Optimal || retry.status == SolveStatus::Infeasible ||
        retry.status == SolveStatus::Unbounded)
      return retry;
  }
  return sol;
}
}  // namespace mmdetail

/// Conservative SOCP initialization: every requirement's left side is
/// restricted to its real part, which yields a convex program whose feasible
/// set is contained in the original one.
inline ConeSolution socp_init_solve(const std::vector<SinrRequirement>& reqs,
                                    const BeamLayout& layout, double noise_mw,
                                    const SolverOptions& opts = {}) {
  ConeProgramBuilder builder;
  builder.add_vars(layout.dim());
  power_epigraph(builder, layout);
  for (const auto& req : reqs)
    socp_init_rows(builder, layout, req.h, req.target, req.threshold, noise_mw,
                   req.interferers);
  return solve(builder.build(), opts);
}

/// MM power minimization: iteratively solves the convex restriction obtained
/// by replacing each |h^H w_target|^2 with its tangent minorizer at the
/// previous iterate, starting from the SOCP initialization.
inline PowerMinResult mm_power_min(const std::vector<SinrRequirement>& reqs,
                                   const BeamLayout& layout, double noise_mw,
                                   const MMOptions& opts = {}, bool has_extra = false) {
  PowerMinResult result;

  Eigen::VectorXd x;
  if (opts.start) {
    x = embed(*opts.start, layout);
    result.init_status = SolveStatus::Optimal;
  } else {
    ConeSolution init = socp_init_solve(reqs, layout, noise_mw, opts.solver);
    result.init_status = init.status;
    if (init.status == SolveStatus::Infeasible) {
      result.status = MMStatus::InfeasibleInit;
      return result;
    }
    if (init.status != SolveStatus::Optimal) {
      result.status = MMStatus::NumericalFailure;
      return result;
    }
    x = init.x.head(layout.dim());
  }
  BeamformerSet beams = unembed(x, layout, has_extra);
  result.trace.iterates.push_back(
      {x.squaredNorm(), worst_margin(reqs, beams, layout, noise_mw), 0});

  double prev_power = x.squaredNorm();
  for (int n = 0; n < opts.max_mm_iters; ++n) {
    ConeProgramBuilder builder;
    builder.add_vars(layout.dim());
    power_epigraph(builder, layout);
    auto beam_of = [&](int idx) -> const Eigen::VectorXcd& {
      const int G = static_cast<int>(beams.group.size());
      return idx < G ? beams.group[idx] : *beams.extra;
    };
    for (const auto& req : reqs) {
      const Eigen::Vector2d phi0 = minorizer_point(req.h, beam_of(req.target));
      modeldetail::sinr_minorant_rows(builder, layout, req.h, req.target,
                                      req.threshold, noise_mw, phi0, req.interferers);
    }

    ConeSolution sol = solve(builder.build(), opts.solver);
    if (sol.status != SolveStatus::Optimal) {
      result.status = MMStatus::NumericalFailure;
      result.beams = beams;
      result.power_mw = prev_power;
      result.trace.final_beams = beams;
      return result;
    }
    x = sol.x.head(layout.dim());
    beams = unembed(x, layout, has_extra);
    const double power = x.squaredNorm();
    result.trace.iterates.push_back(
        {power, worst_margin(reqs, beams, layout, noise_mw), sol.iterations});

    if (std::abs(power - prev_power) < opts.mm_tol * std::max(prev_power, 1e-30)) {
      result.trace.converged = true;
      prev_power = power;
      break;
    }
    prev_power = power;
  }

  result.status = MMStatus::Optimal;
  result.beams = beams;
  result.power_mw = prev_power;
  result.trace.final_beams = beams;
  return result;
}

// ---------------------------------------------------------------------------
// Scenario-facing wrappers
// ---------------------------------------------------------------------------

struct PowerMinSpec {
  ChannelRealization realization;
  std::vector<double> thresholds;  // linear SINR targets, one per group
  double noise_mw = 1e-8;
  MMOptions mm;
};

/// Initial feasible beams from the conservative SOCP, or the solver status
/// explaining why none was produced.
inline PowerMinResult socp_initial(const PowerMinSpec& spec) {
  const int G = spec.realization.group_count();
  if (static_cast<int>(spec.thresholds.size()) != G)
    throw std::invalid_argument("socp_initial: thresholds size mismatch");
  BeamLayout layout{spec.realization.antennas(), G};
  auto reqs = noma_requirements(spec.realization, spec.thresholds);
  ConeSolution init = socp_init_solve(reqs, layout, spec.noise_mw, spec.mm.solver);
  PowerMinResult result;
  result.init_status = init.status;
  if (init.status == SolveStatus::Optimal) {
    result.status = MMStatus::Optimal;
    result.beams = unembed(init.x.head(layout.dim()), layout);
    result.power_mw = init.x.head(layout.dim()).squaredNorm();
  } else if (init.status == SolveStatus::Infeasible) {
    result.status = MMStatus::InfeasibleInit;
  }
  return result;
}

/// Algorithm: total-transmit-power minimization under QoS and SIC
/// constraints via MM with SOCP initialization.
inline PowerMinResult solve_power_min(const PowerMinSpec& spec) {
  const int G = spec.realization.group_count();
  if (static_cast<int>(spec.thresholds.size()) != G)
    throw std::invalid_argument("solve_power_min: thresholds size mismatch");
  for (double t : spec.thresholds)
    if (!(t > 0.0)) throw std::invalid_argument("solve_power_min: thresholds must be > 0");
  BeamLayout layout{spec.realization.antennas(), G};
  auto reqs = noma_requirements(spec.realization, spec.thresholds);
  return mm_power_min(reqs, layout, spec.noise_mw, spec.mm);
}

struct ComplexityEstimate {
  int qos_rows = 0;
  int sic_rows = 0;
  std::string scaling;  // worst-case interior-point scaling label
};

/// Constraint counts of the per-iteration subproblem for G groups of U users.
inline ComplexityEstimate worst_case_complexity_estimate(int G, int U) {
  ComplexityEstimate est;
  est.qos_rows = U * G;
  est.sic_rows = U * G * (G - 1) / 2;
  est.scaling = "O(sqrt(U*G^2))";
  return est;
}

}  // namespace geobeam
