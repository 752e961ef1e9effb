#include <boost/math/quadrature/ooura_fourier_integrals.hpp>
#include <cmath>
#include <numbers>
#include <vector>

#include "cylstable/error.hpp"
#include "cylstable/simulator.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace cylstable;
using std::numbers::pi;

namespace {

// F(x) = 1/2 + (1/pi) int_0^inf exp(-t u^alpha) sin(u x) / u du.
double stable_cdf_oracle(double alpha, double t, double x) {
  if (x == 0.0) return 0.5;
  static boost::math::quadrature::ooura_fourier_sin<double> integrator(1e-12, 8);
  auto f = [alpha, t](double u) { return std::exp(-t * std::pow(u, alpha)) / u; };
  const double v = integrator.integrate(f, std::abs(x)).first / pi;
  return x > 0 ? 0.5 + v : 0.5 - v;
}

SimConfig config(double dt, double t_end, std::int64_t n, std::uint64_t seed) {
  SimConfig c;
  c.dt = dt;
  c.t_end = t_end;
  c.n_paths = n;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_SUITE("simulator") {
  TEST_CASE("free endpoint law matches the product Cauchy law (chi-square, 20x20 cells)") {
    const AlphaParam params(1.0, 2);
    const auto cfg = config(0.01, 1.0, 100000, 42);
    const Ensemble e = simulate_ensemble(params, Point{0.0, 0.0}, cfg, nullptr, {1.0});
    // Equiprobable bins of the standard Cauchy law per coordinate.
    auto bin = [](double v) {
      const double u = 0.5 + std::atan(v) / pi;
      return std::min(19, static_cast<int>(u * 20.0));
    };
    std::vector<double> counts(400, 0.0);
    for (std::int64_t i = 0; i < e.n_paths; ++i) {
      const auto s = e.state_at(i, 0);
      counts[bin(s[0]) + 20 * bin(s[1])] += 1.0;
    }
    const double expected = e.n_paths / 400.0;
    double chi2 = 0.0;
    for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
    CHECK(chi2 < oracle::chi2_critical(399.0, 0.01));
  }

  TEST_CASE("free marginals match the stable law (KS per coordinate)") {
    const double alpha = 1.3, t = 0.5;
    const AlphaParam params(alpha, 2);
    const auto cfg = config(0.005, t, 100000, 7);
    const Ensemble e = simulate_ensemble(params, Point{0.5, -1.0}, cfg, nullptr, {t});
    for (int k = 0; k < 2; ++k) {
      std::vector<double> v;
      for (std::int64_t i = 0; i < e.n_paths; ++i) v.push_back(e.state_at(i, 0)[k] - (k == 0 ? 0.5 : -1.0));
      const double d = oracle::ks_one_sample(v, [&](double x) { return stable_cdf_oracle(alpha, t, x); });
      CHECK(d < 1.628 / std::sqrt(static_cast<double>(v.size())));
    }
  }

  TEST_CASE("paths are reproducible and independent of worker count") {
    const AlphaParam params(1.2, 2);
    const Domain d = paper_domain("four_squares");
    auto cfg = config(1e-3, 0.5, 2000, 99);
    cfg.workers = 1;
    const Ensemble a = simulate_ensemble(params, Point{0.0, 0.0}, cfg, &d, {0.1, 0.5});
    cfg.workers = 3;
    const Ensemble b = simulate_ensemble(params, Point{0.0, 0.0}, cfg, &d, {0.1, 0.5});
    CHECK(a.kill_step == b.kill_step);
    CHECK(std::equal(a.observed.begin(), a.observed.end(), b.observed.begin(), b.observed.end(),
                     [](double u, double v) { return (std::isnan(u) && std::isnan(v)) || u == v; }));
    // The single-path API reproduces ensemble path 17.
    auto single = cfg;
    single.record_mode = RecordMode::FullPath;
    const PathSample p = simulate_path(params, Point{0.0, 0.0}, single, 17, &d);
    CHECK(p.killed == a.killed(17));
    if (p.killed) {
      CHECK(p.tau_hi == a.tau_hi(17));
      CHECK(p.exit_point.value()[0] == a.exit_point(17)[0]);
    } else {
      CHECK(p.states.back()[1] == a.state_at(17, 1)[1]);
    }
    const auto idx = static_cast<std::size_t>(std::llround(0.1 / cfg.dt));
    if (a.alive_at(17, 0)) CHECK(p.states[idx][0] == a.state_at(17, 0)[0]);
  }

  TEST_CASE("killing bracket") {
    const AlphaParam params(0.9, 2);
    const Domain d = paper_domain("disc");
    auto cfg = config(2e-3, 1.0, 500, 5);
    cfg.record_mode = RecordMode::FullPath;
    int killed = 0;
    for (std::int64_t i = 0; i < cfg.n_paths; ++i) {
      const PathSample p = simulate_path(params, Point{0.2, 0.1}, cfg, i, &d);
      if (!p.killed) continue;
      ++killed;
      CHECK(p.tau_hi - p.tau_lo == doctest::Approx(cfg.dt).epsilon(1e-12));
      CHECK(d.contains(p.pre_exit_point.value()));
      CHECK_FALSE(d.contains(p.exit_point.value()));
      CHECK(p.states.back() == p.exit_point.value());
      for (std::size_t k = 0; k + 1 < p.states.size(); ++k) CHECK(d.contains(p.states[k]));
    }
    CHECK(killed > 100);
    CHECK_THROWS_WITH_AS(simulate_path(params, Point{2.0, 0.0}, cfg, 0, &d), doctest::Contains("StartOutsideDomain"),
                         Error);
    auto bad = cfg;
    bad.t_end = 0.0035;
    CHECK_THROWS_AS(simulate_path(params, Point{0.0, 0.0}, bad, 0, &d), Error);
  }

  TEST_CASE("near-boundary start is killed almost surely") {
    const AlphaParam params(1.5, 2);
    const Domain d = paper_domain("disc");
    const auto s = survival_probability(d, params, Point{1.0 - 1e-3, 0.0}, 1.0, config(1e-3, 1.0, 20000, 3));
    CHECK(1.0 - s.value >= 0.99);
  }

  TEST_CASE("survival at small times") {
    const AlphaParam params(1.5, 2);
    const Domain d = paper_domain("disc");
    const auto cfg = config(1e-3, 1.0, 20000, 4);
    const auto first = survival_probability(d, params, Point{0.0, 0.0}, cfg.dt, cfg);
    CHECK(first.value >= 1.0 - 10.0 * cfg.dt);

    // P(tau_{B(0,r)} <= t) <= c t / r^alpha with c calibrated at r = 1.
    const auto cfg2 = config(1e-3, 1.0, 100000, 8);
    const double t = 0.05;
    const double exit1 = 1.0 - survival_probability(d, params, Point{0.0, 0.0}, t, cfg2).value;
    const double exit2 = 1.0 - survival_probability(paper_domain("disc", 2.0), params, Point{0.0, 0.0}, t, cfg2).value;
    const double c = 1.2 * exit1 / t;
    CHECK(exit2 <= c * t / std::pow(2.0, 1.5));
    const double exit_half = 1.0 - survival_probability(d, params, Point{0.0, 0.0}, t / 2.0, cfg2).value;
    CHECK(exit1 / exit_half == doctest::Approx(2.0).epsilon(0.25));
  }

  TEST_CASE("survival is monotone in the domain (pathwise coupling)") {
    const AlphaParam params(1.1, 2);
    const Domain small = paper_domain("disc");
    const Domain big = paper_domain("disc", 1.5);
    const auto cfg = config(1e-3, 0.8, 3000, 12);
    const Ensemble a = simulate_ensemble(params, Point{0.3, 0.0}, cfg, &small, {0.8});
    const Ensemble b = simulate_ensemble(params, Point{0.3, 0.0}, cfg, &big, {0.8});
    for (std::int64_t i = 0; i < cfg.n_paths; ++i) {
      if (b.killed(i)) {
        REQUIRE(a.killed(i));
        CHECK(a.kill_step[i] <= b.kill_step[i]);
      }
    }
    CHECK(a.survivors_at(0) <= b.survivors_at(0));
  }

  TEST_CASE("survival refinement halves dt with a common seed") {
    const AlphaParam params(1.0, 2);
    const auto levels = survival_refinement(paper_domain("disc"), params, Point{0.0, 0.0}, 0.2,
                                            config(4e-3, 1.0, 20000, 13), 3);
    REQUIRE(levels.size() == 3);
    CHECK(levels[1].dt == 2e-3);
    CHECK(levels[2].dt == 1e-3);
    // Finer monitoring can only catch more exits (up to noise).
    CHECK(levels[2].value <= levels[0].value + 3.0 * levels[0].std_error);
  }

  TEST_CASE("exit-time scaling and refinement (reduced budget)") {
    for (double alpha : {0.8, 1.5}) {
      const AlphaParam params(alpha, 2);
      const auto cfg = config(1e-3, 1.0, 20000, 21);
      const auto e1 = mean_exit_time(paper_domain("disc"), params, Point{0.0, 0.0}, cfg);
      const auto e2 = mean_exit_time(paper_domain("disc", 2.0), params, Point{0.0, 0.0}, cfg);
      CHECK(e1.killed_fraction >= 0.999);
      CHECK(e2.value / e1.value == doctest::Approx(std::pow(2.0, alpha)).epsilon(0.08));
      const auto half = mean_exit_time(paper_domain("disc", 0.5), params, Point{0.25, 0.0},
                                       config(1e-3, 1.0, 20000, 22));
      CHECK(half.value > 0.0);
      CHECK(half.value < e1.value);
    }
    const AlphaParam params(1.5, 2);
    auto cfg = config(2e-3, 0.5, 20000, 23);
    const auto coarse = mean_exit_time(paper_domain("disc"), params, Point{0.0, 0.0}, cfg);
    cfg.dt = 1e-3;
    const auto fine = mean_exit_time(paper_domain("disc"), params, Point{0.0, 0.0}, cfg);
    CHECK(std::abs(coarse.value - fine.value) < 2.0 * std::hypot(coarse.std_error, fine.std_error) + cfg.dt);
  }

  TEST_CASE("horizon extension budget") {
    const AlphaParam params(1.0, 2);
    auto cfg = config(1e-2, 0.1, 200, 1);
    cfg.max_t_end = 0.4;
    CHECK_THROWS_WITH_AS(mean_exit_time(paper_domain("disc", 50.0), params, Point{0.0, 0.0}, cfg),
                         doctest::Contains("TruncationBudgetExceeded"), Error);
  }

  TEST_CASE("exit law: Levy-system mass beyond radius 2, symmetry, single-axis exits") {
    const double alpha = 1.0;
    const AlphaParam params(alpha, 2);
    const Domain d = paper_domain("disc");
    const auto cfg = config(1e-3, 1.0, 100000, 31);
    const CellMesh mesh = CellMesh::covering({{-4.0, -4.0}, {4.0, 4.0}}, 0.5);
    const auto h = exit_distribution(d, params, Point{0.0, 0.0}, cfg, mesh);
    REQUIRE(h.n_killed >= 99900);
    double far = 0.0;
    for (std::int64_t i = 0; i < h.n_killed; ++i) {
      far += std::hypot(h.exit_points[2 * i], h.exit_points[2 * i + 1]) > 2.0 ? 1.0 : 0.0;
    }
    far /= static_cast<double>(h.n_paths);

    // Right side of the Levy-system identity from the occupation measure.
    const CellMesh occ_mesh = CellMesh::covering(d.bbox(), 0.02);
    const auto occ = occupation_green(d, params, Point{0.0, 0.0}, cfg, occ_mesh);
    const double c1 = cd_alpha(alpha, 1);
    double predicted = 0.0;
    for (std::int64_t c = 0; c < occ_mesh.cell_count(); ++c) {
      if (occ.mass[c] == 0.0) continue;
      const Point z = occ_mesh.cell_center(c);
      for (int k = 0; k < 2; ++k) {
        const double other = z[1 - k];
        const double reach = std::sqrt(4.0 - other * other);
        const double plus = reach - z[k], minus = reach + z[k];
        predicted += occ.mass[c] * c1 / alpha * (std::pow(plus, -alpha) + std::pow(minus, -alpha));
      }
    }
    INFO("simulated=" << far << " predicted=" << predicted);
    CHECK(far == doctest::Approx(predicted).epsilon(0.10));

    // Reflection x <-> y leaves the exit law invariant.
    const std::int64_t n = mesh.shape[0];
    double chi2 = 0.0;
    int dof = 0;
    for (std::int64_t i = 0; i < n; ++i) {
      for (std::int64_t j = i + 1; j < n; ++j) {
        const double a = static_cast<double>(h.counts[i + n * j]);
        const double b = static_cast<double>(h.counts[j + n * i]);
        if (a + b < 10) continue;
        chi2 += (a - b) * (a - b) / (a + b);
        ++dof;
      }
    }
    CHECK(dof > 10);
    CHECK(chi2 < oracle::chi2_critical(dof, 0.01));

    CHECK(h.median_second_displacement < 10.0 * std::pow(cfg.dt, 1.0 / alpha));
  }

  TEST_CASE("occupation measure: total mass, boundary decay, Green scaling") {
    const double alpha = 1.0;
    const AlphaParam params(alpha, 2);
    const auto cfg = config(1e-3, 1.0, 50000, 41);
    const Domain d1 = paper_domain("disc");
    const Domain d2 = paper_domain("disc", 2.0);
    const CellMesh m1 = CellMesh::covering(d1.bbox(), 0.25);
    const CellMesh m2 = CellMesh::covering(d2.bbox(), 0.5);
    const auto g1 = occupation_green(d1, params, Point{0.0, 0.0}, cfg, m1);
    const auto g2 = occupation_green(d2, params, Point{0.0, 0.0}, cfg, m2);
    const auto tau = mean_exit_time(d1, params, Point{0.0, 0.0}, cfg);
    CHECK(g1.total_mass == doctest::Approx(tau.value).epsilon(1e-12));
    CHECK(g1.outside_mesh == 0.0);

    // Cells hugging the boundary carry less Green density than central cells.
    double centre = 0.0, rim = 0.0;
    int n_centre = 0, n_rim = 0;
    for (std::int64_t c = 0; c < m1.cell_count(); ++c) {
      const Point z = m1.cell_center(c);
      const double r = std::hypot(z[0], z[1]);
      if (r < 0.4) centre += g1.green_density(c), ++n_centre;
      if (r > 0.8 && r < 1.0) rim += g1.green_density(c), ++n_rim;
    }
    CHECK(rim / n_rim < 0.5 * centre / n_centre);

    // G_{2D}(0, 2y) = 2^(alpha-d) G_D(0, y): cell masses scale by 2^alpha.
    for (std::int64_t c = 0; c < m1.cell_count(); ++c) {
      if (g1.mass[c] < 0.01) continue;
      INFO("cell " << c);
      CHECK(g2.mass[c] / g1.mass[c] == doctest::Approx(std::pow(2.0, alpha)).epsilon(0.10));
    }
  }
}
