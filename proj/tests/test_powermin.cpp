#include <catch2/catch_amalgamated.hpp>
#include <complex>

#include "geobeam/powermin.hpp"
#include "support/oracles.hpp"

using namespace geobeam;

namespace {

ChannelRealization single_user_channel(Rng& rng, int antennas, double scale = 0.01) {
  ChannelRealization chan;
  Eigen::VectorXcd h(antennas);
  for (int m = 0; m < antennas; ++m)
    h[m] = std::complex<double>(rng.gaussian(), rng.gaussian()) * scale;
  chan.h = {{h}};
  chan.distances = {{1.0}};
  return chan;
}

// two orthogonal single-user groups in C^2
ChannelRealization orthogonal_pair(Rng& rng, double s1, double s2) {
  std::complex<double> a(rng.gaussian(), rng.gaussian()), b(rng.gaussian(), rng.gaussian());
  const double n = std::sqrt(std::norm(a) + std::norm(b));
  a /= n;
  b /= n;
  Eigen::VectorXcd h1(2), h2(2);
  h1 << a * s1, b * s1;
  h2 << -std::conj(b) * s2, std::conj(a) * s2;
  ChannelRealization chan;
  chan.h = {{h1}, {h2}};
  chan.distances = {{1.0}, {1.0}};
  return chan;
}

}  // namespace

TEST_CASE("single group, single user: matched-filter closed form") {
  Rng rng(101);
  const double noise = 1e-8;
  for (int t = 0; t < 25; ++t) {
    ChannelRealization chan = single_user_channel(rng, 4);
    const double gamma = rng.uniform(0.5, 15.0);
    PowerMinSpec spec{chan, {gamma}, noise, {}};
    PowerMinResult res = solve_power_min(spec);
    REQUIRE(res.status == MMStatus::Optimal);
    const double expected = gamma * noise / chan.h[0][0].squaredNorm();
    CHECK(res.power_mw == Catch::Approx(expected).epsilon(1e-6));
  }
}

TEST_CASE("socp initialization behaves at the extremes") {
  Rng rng(103);
  ChannelRealization chan = single_user_channel(rng, 3);
  const double noise = 1e-8;
  SECTION("matched filter for one user") {
    PowerMinSpec spec{chan, {2.0}, noise, {}};
    PowerMinResult init = socp_initial(spec);
    REQUIRE(init.status == MMStatus::Optimal);
    CHECK(init.power_mw ==
          Catch::Approx(2.0 * noise / chan.h[0][0].squaredNorm()).epsilon(1e-6));
  }
  SECTION("vanishing threshold sends power to zero") {
    double prev = std::numeric_limits<double>::infinity();
    for (double gamma : {1.0, 1e-2, 1e-4, 1e-6}) {
      PowerMinSpec spec{chan, {gamma}, noise, {}};
      PowerMinResult init = socp_initial(spec);
      REQUIRE(init.status == MMStatus::Optimal);
      CHECK(init.power_mw < prev);
      prev = init.power_mw;
    }
    CHECK(prev <= 1e-6);
  }
  SECTION("initial beams are feasible on a model-A instance") {
    ScenarioGeometry geo = preset_geometry(RegionModel::A);
    geo.antennas = 8;
    geo.users_per_region = {3, 3, 3};
    ChannelRealization c = sample_channels(geo, 4242);
    std::vector<double> thr(3, rate_to_sinr(3.0));
    PowerMinSpec spec{c, thr, geo.noise_mw, {}};
    PowerMinResult init = socp_initial(spec);
    REQUIRE(init.status == MMStatus::Optimal);
    CHECK(check_feasible(init.beams, c, thr, geo.noise_mw, 1e-6).feasible);
  }
}

TEST_CASE("orthogonal two-group instance matches the exact closed form") {
  // With h1 orthogonal to h2 the optimum is known exactly: group 0 needs its
  // matched-filter power, the near group pays the SIC premium through the
  // h2-aligned component of w0.
  Rng rng(107);
  const double noise = 1e-8;
  for (int t = 0; t < 5; ++t) {
    ChannelRealization chan = orthogonal_pair(rng, 0.01, 0.05);
    const double g0 = rng.uniform(0.5, 4.0), g1 = rng.uniform(0.5, 4.0);
    const double n1 = chan.h[0][0].squaredNorm();
    const double n2 = chan.h[1][0].squaredNorm();
    const double expected = g0 * noise / n1 + (g0 * (1.0 + g1) + g1) * noise / n2;

    PowerMinSpec spec{chan, {g0, g1}, noise, {}};
    PowerMinResult res = solve_power_min(spec);
    REQUIRE(res.status == MMStatus::Optimal);
    CHECK(res.power_mw == Catch::Approx(expected).epsilon(1e-5));
  }
}

TEST_CASE("coarse grid search confirms the orthogonal closed form") {
  // Brute force over the 2-beam parameterization at M = 2. With orthogonal
  // channels every constraint sees only coefficient magnitudes in the
  // orthonormal (h1, h2) basis, so four nonnegative reals span the search
  // space: w0 = a e1 + b e2, w1 = c e1 + d e2.
  Rng rng(109);
  const double noise = 1e-8;
  ChannelRealization chan = orthogonal_pair(rng, 0.02, 0.04);
  const double g0 = 2.0, g1 = 1.5;
  const double n1 = chan.h[0][0].squaredNorm();
  const double n2 = chan.h[1][0].squaredNorm();
  const double expected = g0 * noise / n1 + (g0 * (1.0 + g1) + g1) * noise / n2;

  const double lim = 1.5 * std::sqrt(expected);
  const int N = 40;
  double best = std::numeric_limits<double>::infinity();
  for (int ia = 0; ia <= N; ++ia)
    for (int ib = 0; ib <= N; ++ib)
      for (int ic = 0; ic <= N; ++ic)
        for (int id = 0; id <= N; ++id) {
          const double a = lim * ia / N, b = lim * ib / N;
          const double c = lim * ic / N, d = lim * id / N;
          // user 0 decodes msg 0 against beam 1; user 1 decodes msg 0
          // against beam 1 then msg 1 against noise only
          const double qos0 = a * a * n1 / (c * c * n1 + noise);
          const double sic = b * b * n2 / (d * d * n2 + noise);
          const double qos1 = d * d * n2 / noise;
          if (qos0 >= g0 && sic >= g0 && qos1 >= g1)
            best = std::min(best, a * a + b * b + c * c + d * d);
        }
  CHECK(best >= expected * (1.0 - 1e-9));
  CHECK(best <= expected * 1.2);
}

TEST_CASE("mm trace is monotone and every iterate stays feasible") {
  ScenarioGeometry geo = preset_geometry(RegionModel::A);
  geo.antennas = 6;
  geo.users_per_region = {2, 2, 2};
  const std::vector<double> thr(3, rate_to_sinr(2.0));
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    ChannelRealization chan = sample_channels(geo, seed);
    PowerMinSpec spec{chan, thr, geo.noise_mw, {}};
    PowerMinResult res = solve_power_min(spec);
    REQUIRE(res.status == MMStatus::Optimal);
    REQUIRE(res.trace.iterates.size() >= 2);
    for (std::size_t i = 1; i < res.trace.iterates.size(); ++i)
      CHECK(res.trace.iterates[i].objective <=
            res.trace.iterates[i - 1].objective +
                1e-7 * (1.0 + res.trace.iterates[i - 1].objective));
    for (const MMIterate& it : res.trace.iterates)
      CHECK(it.worst_violation >= -1e-6);
    CHECK(check_feasible(res.beams, chan, thr, geo.noise_mw, 1e-6).feasible);
  }
}

TEST_CASE("mm converges quickly on the reference configuration") {
  ScenarioGeometry geo = preset_geometry(RegionModel::A);
  geo.antennas = 8;
  geo.users_per_region = {3, 3, 3};
  const std::vector<double> thr(3, rate_to_sinr(3.0));
  int converged_fast = 0;
  const int trials = 10;
  for (int t = 0; t < trials; ++t) {
    ChannelRealization chan = sample_channels(geo, 9000 + t);
    PowerMinSpec spec{chan, thr, geo.noise_mw, {}};
    PowerMinResult res = solve_power_min(spec);
    REQUIRE(res.status == MMStatus::Optimal);
    CHECK(res.trace.converged);
    if (res.trace.converged && res.trace.iterates.size() <= 21) ++converged_fast;
  }
  CHECK(converged_fast == trials);
}

TEST_CASE("rerunning mm from its own output is idempotent") {
  ScenarioGeometry geo = preset_geometry(RegionModel::A);
  geo.antennas = 4;
  geo.users_per_region = {1, 1, 1};
  ChannelRealization chan = sample_channels(geo, 31337);
  const std::vector<double> thr(3, 1.0);
  PowerMinSpec spec{chan, thr, geo.noise_mw, {}};
  PowerMinResult first = solve_power_min(spec);
  REQUIRE(first.status == MMStatus::Optimal);

  PowerMinSpec again = spec;
  again.mm.start = first.beams;
  PowerMinResult second = solve_power_min(again);
  REQUIRE(second.status == MMStatus::Optimal);
  CHECK(std::abs(second.power_mw - first.power_mw) <=
        spec.mm.mm_tol * (1.0 + first.power_mw));
}

TEST_CASE("infeasible requirement sets are reported, not asserted") {
  // Mutual interference at M = 1: both streams above SINR 4 on the same
  // scalar channel is impossible, and the conservative restriction of an
  // infeasible set is infeasible too.
  Eigen::VectorXcd h(1);
  h << std::complex<double>(0.01, 0.0);
  std::vector<SinrRequirement> reqs(2);
  reqs[0].h = h;
  reqs[0].target = 0;
  reqs[0].threshold = 4.0;
  reqs[0].interferers = {1};
  reqs[1].h = h;
  reqs[1].target = 1;
  reqs[1].threshold = 4.0;
  reqs[1].interferers = {0};
  BeamLayout layout{1, 2};
  ConeSolution init = socp_init_solve(reqs, layout, 1e-8);
  CHECK(init.status == SolveStatus::Infeasible);
  PowerMinResult res = mm_power_min(reqs, layout, 1e-8);
  CHECK(res.status == MMStatus::InfeasibleInit);
}

TEST_CASE("complexity estimate counts constraint rows") {
  ComplexityEstimate e33 = worst_case_complexity_estimate(3, 3);
  CHECK(e33.qos_rows == 9);
  CHECK(e33.sic_rows == 9);
  ComplexityEstimate e1 = worst_case_complexity_estimate(1, 5);
  CHECK(e1.sic_rows == 0);
  ComplexityEstimate e42 = worst_case_complexity_estimate(4, 2);
  CHECK(e42.qos_rows == 8);
  CHECK(e42.sic_rows == 12);
  CHECK(e42.scaling == "O(sqrt(U*G^2))");
}
