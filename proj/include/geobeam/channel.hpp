#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "geobeam/rng.hpp"
#include "geobeam/units.hpp"

namespace geobeam {

/// Annulus of distances [d_min, d_max] hosting one user group.
struct RegionSpec {
  double d_min = 0.0;  // meters, > 0
  double d_max = 0.0;  // meters, >= d_min

  double d_ave() const { return 0.5 * (d_min + d_max); }
};

/// Deterministic region layouts used throughout the experiments.
/// Model D takes a distance offset: region 2 sits at (60-dd, 70-dd).
enum class RegionModel { A, B, C, D, E };

/// Scenario geometry: regions ordered farthest-first (non-increasing average
/// distance), which fixes the SIC decoding order.
struct ScenarioGeometry {
  std::vector<RegionSpec> regions;
  std::vector<int> users_per_region;
  int antennas = 1;
  double pathloss_exponent = 2.5;
  double noise_mw = 1e-8;  // -80 dBm

  int group_count() const { return static_cast<int>(regions.size()); }

  void validate() const {
    if (regions.empty()) throw std::invalid_argument("geometry: no regions");
    if (users_per_region.size() != regions.size())
      throw std::invalid_argument("geometry: users_per_region size mismatch");
    for (const RegionSpec& r : regions) {
      if (!(r.d_min > 0.0) || !(r.d_max >= r.d_min))
        throw std::invalid_argument("geometry: bad region distances");
    }
    for (std::size_t g = 1; g < regions.size(); ++g) {
      if (regions[g - 1].d_ave() < regions[g].d_ave())
        throw std::invalid_argument("geometry: regions not sorted farthest-first");
    }
    for (int u : users_per_region)
      if (u < 1) throw std::invalid_argument("geometry: empty group");
    if (antennas < 1) throw std::invalid_argument("geometry: antennas < 1");
    if (!(pathloss_exponent > 0.0))
      throw std::invalid_argument("geometry: pathloss exponent <= 0");
    if (!(noise_mw > 0.0)) throw std::invalid_argument("geometry: noise <= 0");
  }
};

inline ScenarioGeometry preset_geometry(RegionModel model, double delta_d = 0.0) {
  ScenarioGeometry geo;
  switch (model) {
    case RegionModel::A:
      geo.regions = {{90, 100}, {40, 50}, {10, 15}};
      break;
    case RegionModel::B:
      geo.regions = {{110, 120}, {90, 100}, {40, 50}, {10, 15}};
      break;
    case RegionModel::C:
      geo.regions = {{160, 170}, {90, 100}, {40, 50}, {10, 15}};
      break;
    case RegionModel::D:
      if (!(delta_d >= 0.0) || !(delta_d < 60.0))
        throw std::invalid_argument("model D requires 0 <= delta_d < 60");
      geo.regions = {{60, 70}, {60 - delta_d, 70 - delta_d}};
      break;
    case RegionModel::E:
      geo.regions = {{70, 90}, {10, 20}};
      break;
    default:
      throw std::invalid_argument("unknown region model");
  }
  geo.users_per_region.assign(geo.regions.size(), 1);
  return geo;
}

inline RegionModel parse_region_model(const std::string& s) {
  if (s == "A" || s == "a") return RegionModel::A;
  if (s == "B" || s == "b") return RegionModel::B;
  if (s == "C" || s == "c") return RegionModel::C;
  if (s == "D" || s == "d") return RegionModel::D;
  if (s == "E" || s == "e") return RegionModel::E;
  throw std::invalid_argument("unknown region model: " + s);
}

/// One beam per group; `extra` carries the beam of a late-joining group when
/// a scenario has one.
struct BeamformerSet {
  std::vector<Eigen::VectorXcd> group;
  std::optional<Eigen::VectorXcd> extra;

  double total_power() const {
    double p = 0.0;
    for (const auto& w : group) p += w.squaredNorm();
    if (extra) p += extra->squaredNorm();
    return p;
  }
};

/// All users' channel vectors h[g][u] plus the distances that generated them.
struct ChannelRealization {
  std::vector<std::vector<Eigen::VectorXcd>> h;
  std::vector<std::vector<double>> distances;
  std::uint64_t seed = 0;

  int group_count() const { return static_cast<int>(h.size()); }
  int users_in(int g) const { return static_cast<int>(h[g].size()); }
  int antennas() const { return h.empty() || h[0].empty() ? 0 : static_cast<int>(h[0][0].size()); }
};

/// Draws one channel realization: distances uniform on the region interval,
/// small-scale fading i.i.d. unit-variance circular Gaussian, and
/// h = g * d^(-alpha/2). Pure function of (geometry, seed).
inline ChannelRealization sample_channels(const ScenarioGeometry& geo, std::uint64_t seed) {
  geo.validate();
  Rng rng(seed);
  ChannelRealization out;
  out.seed = seed;
  const int G = geo.group_count();
  const int M = geo.antennas;
  const double half_alpha = 0.5 * geo.pathloss_exponent;
  out.h.resize(G);
  out.distances.resize(G);
  const double inv_sqrt2 = 0.70710678118654752440;
  for (int g = 0; g < G; ++g) {
    const RegionSpec& region = geo.regions[g];
    for (int u = 0; u < geo.users_per_region[g]; ++u) {
      const double d = rng.uniform(region.d_min, region.d_max);
      const double gain = std::pow(d, -half_alpha);
      Eigen::VectorXcd hv(M);
      for (int m = 0; m < M; ++m) {
        const double re = rng.gaussian() * inv_sqrt2;
        const double im = rng.gaussian() * inv_sqrt2;
        hv[m] = std::complex<double>(re * gain, im * gain);
      }
      out.h[g].push_back(std::move(hv));
      out.distances[g].push_back(d);
    }
  }
  return out;
}

namespace detail {
inline double beam_gain(const Eigen::VectorXcd& h, const Eigen::VectorXcd& w) {
  return std::norm(h.dot(w));  // |h^H w|^2 (Eigen's dot conjugates the left side)
}
}  // namespace detail

/// SINR of a group-g user decoding its own message: desired beam g against
/// the not-yet-cancelled beams k > g plus noise. Indices are 0-based.
inline double sinr_own(const BeamformerSet& W, const Eigen::VectorXcd& h, int g,
                       double noise_mw) {
  const int G = static_cast<int>(W.group.size());
  if (g < 0 || g >= G) throw std::invalid_argument("sinr_own: group out of range");
  double interference = 0.0;
  for (int k = g + 1; k < G; ++k) interference += detail::beam_gain(h, W.group[k]);
  return detail::beam_gain(h, W.group[g]) / (interference + noise_mw);
}

/// SINR of a group-g user decoding the message of a farther group i < g
/// during SIC; beams k > i are still active interference.
inline double sinr_cross(const BeamformerSet& W, const Eigen::VectorXcd& h, int g,
                         int i, double noise_mw) {
  const int G = static_cast<int>(W.group.size());
  if (g < 0 || g >= G) throw std::invalid_argument("sinr_cross: group out of range");
  if (i < 0 || i >= g) throw std::invalid_argument("sinr_cross: requires 0 <= i < g");
  double interference = 0.0;
  for (int k = i + 1; k < G; ++k) interference += detail::beam_gain(h, W.group[k]);
  return detail::beam_gain(h, W.group[i]) / (interference + noise_mw);
}

struct FeasibilityReport {
  bool feasible = false;
  /// min over all constraints of sinr/threshold - 1; negative means violated.
  double worst_margin = 0.0;
  int worst_group = -1;
  int worst_user = -1;
  int worst_message = -1;  // equals worst_group for a QoS row, i < g for a SIC row
};

/// Checks all QoS rows (own-message SINR >= threshold) and SIC rows
/// (cross-message SINR >= farther group's threshold) with relative slack.
inline FeasibilityReport check_feasible(const BeamformerSet& W,
                                        const ChannelRealization& chan,
                                        const std::vector<double>& thresholds,
                                        double noise_mw, double slack = 1e-6) {
  const int G = chan.group_count();
  if (static_cast<int>(thresholds.size()) != G)
    throw std::invalid_argument("check_feasible: thresholds size mismatch");
  for (double t : thresholds)
    if (!(t > 0.0)) throw std::invalid_argument("check_feasible: thresholds must be positive");

  FeasibilityReport report;
  report.worst_margin = std::numeric_limits<double>::infinity();
  auto consider = [&](double sinr, double threshold, int g, int u, int msg) {
    const double margin = sinr / threshold - 1.0;
    if (margin < report.worst_margin) {
      report.worst_margin = margin;
      report.worst_group = g;
      report.worst_user = u;
      report.worst_message = msg;
    }
  };
  for (int g = 0; g < G; ++g) {
    for (int u = 0; u < chan.users_in(g); ++u) {
      const Eigen::VectorXcd& h = chan.h[g][u];
      consider(sinr_own(W, h, g, noise_mw), thresholds[g], g, u, g);
      for (int i = 0; i < g; ++i)
        consider(sinr_cross(W, h, g, i, noise_mw), thresholds[i], g, u, i);
    }
  }
  report.feasible = report.worst_margin >= -slack;
  return report;
}

}  // namespace geobeam
