#include <cmath>
#include <vector>

#include "cylstable/error.hpp"
#include "cylstable/heatkernel.hpp"
#include "doctest.h"

using namespace cylstable;

namespace {

SimConfig config(double dt, std::int64_t n, std::uint64_t seed) {
  SimConfig c;
  c.dt = dt;
  c.n_paths = n;
  c.seed = seed;
  return c;
}

bool agree(const KernelEstimate& a, const KernelEstimate& b, double k) {
  return std::abs(a.value - b.value) <= k * std::hypot(a.std_error, b.std_error);
}

}  // namespace

TEST_SUITE("heatkernel") {
  TEST_CASE("kernel basics") {
    CHECK(parse_kernel_method("kde") == KernelMethod::SurvivorKde);
    CHECK(parse_kernel_method("sub") == KernelMethod::Subtraction);
    CHECK(parse_kernel_method("bridge") == KernelMethod::Bridge);
    CHECK_THROWS_AS(parse_kernel_method("magic"), Error);
    CHECK(default_bandwidth(1.0, 0.5, 64, 2) == doctest::Approx(0.8 * 0.5 / 2.0));

    // Riemann sum of the product kernel over its support.
    const double eps = 0.3;
    double mass = 0.0;
    const int m = 400;
    const double h = 2.0 * eps / m;
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) {
        const double u[2] = {-eps + (i + 0.5) * h, -eps + (j + 0.5) * h};
        mass += epanechnikov(u, eps) * h * h;
      }
    }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-4));
    const double outside[2] = {0.31, 0.0};
    CHECK(epanechnikov(outside, eps) == 0.0);
  }

  TEST_CASE("whole-space control matches the free kernel") {
    const AlphaParam params(1.0, 2);
    const Domain huge(make_ball(Point{0.0, 0.0}, 1e4));
    const auto cfg = config(1e-2, 200000, 3);
    const Point x{0.0, 0.0}, y{0.2, -0.1};
    const double t = 0.5;
    const double exact = product_kernel(params, t, x, y);
    const auto kde = estimate_pd_survivor_kde(huge, params, t, x, y, cfg);
    CHECK(std::abs(kde.value - exact) <= 3.0 * kde.std_error);
    const auto sub = estimate_pd_subtraction(huge, params, t, x, y, cfg);
    CHECK(sub.value == doctest::Approx(exact).epsilon(1e-3));
    // About n * 4t / (pi R) paths leave the ball.
    CHECK(sub.hits <= 60);
  }

  TEST_CASE("bootstrap standard error agrees with the iid formula") {
    const AlphaParam params(1.3, 2);
    const Domain d = paper_domain("disc");
    SimConfig cfg = config(1e-3, 50000, 8);
    cfg.t_end = 0.2;
    const Ensemble e = simulate_ensemble(params, Point{0.1, 0.0}, cfg, &d, {0.2});
    const Point y{0.2, 0.1};
    const double eps = 0.1;
    const auto kde = kde_from_ensemble(e, 0, y, eps, 1);
    double s = 0.0, ss = 0.0;
    for (std::int64_t i = 0; i < e.n_paths; ++i) {
      const double k = e.alive_at(i, 0) ? epanechnikov(std::vector<double>{e.state_at(i, 0)[0] - y[0],
                                                                          e.state_at(i, 0)[1] - y[1]},
                                                      eps)
                                        : 0.0;
      s += k;
      ss += k * k;
    }
    const double n = static_cast<double>(e.n_paths);
    CHECK(kde.value == doctest::Approx(s / n).epsilon(1e-12));
    const double se = std::sqrt((ss / n - (s / n) * (s / n)) / n);
    CHECK(kde.std_error == doctest::Approx(se).epsilon(0.2));
    REQUIRE(kde.value_half_bandwidth.has_value());
    CHECK(*kde.value_half_bandwidth > 0.0);
  }

  TEST_CASE("short-time interior equivalence for the subtraction estimator") {
    const AlphaParam params(1.0, 2);
    const auto est = estimate_pd_subtraction(paper_domain("disc"), params, 0.01, Point{0.0, 0.0},
                                             Point{0.0, 0.0}, config(1e-3, 50000, 4));
    CHECK(est.value / product_kernel(params, 0.01, Point{0.0, 0.0}, Point{0.0, 0.0}) ==
          doctest::Approx(1.0).epsilon(0.01));
    CHECK_FALSE(est.flagged);
  }

  TEST_CASE("small-time lower bound at the centre of the disc") {
    const AlphaParam params(1.0, 2);
    const double t = 0.05;
    const auto est = estimate_pd_subtraction(paper_domain("disc"), params, t, Point{0.0, 0.0}, Point{0.0, 0.0},
                                             config(1e-3, 50000, 5));
    const double c = envelope_constant(params);
    const double scale = std::pow(t, -2.0);
    CHECK(est.value >= scale / c);
    CHECK(est.value <= scale * c);
  }

  TEST_CASE("three estimators agree and the bridge is symmetric") {
    const AlphaParam params(1.2, 2);
    const Domain d = paper_domain("disc");
    const auto cfg = config(1e-3, 100000, 6);
    const Point x{0.0, 0.0}, y{0.4, 0.2};
    const double t = 0.4;
    const auto kde = estimate_pd_survivor_kde(d, params, t, x, y, cfg);
    const auto bridge = estimate_pd_bridge(d, params, t, x, y, cfg);
    const auto sub = estimate_pd_subtraction(d, params, t, x, y, cfg);
    INFO("kde " << kde.value << "+-" << kde.std_error << " bridge " << bridge.value << "+-" << bridge.std_error
                << " sub " << sub.value << "+-" << sub.std_error);
    CHECK(agree(kde, bridge, 3.0));
    CHECK(agree(kde, sub, 3.0));
    CHECK(agree(bridge, sub, 3.0));

    auto other = cfg;
    other.seed = 60;
    const auto reverse = estimate_pd_bridge(d, params, t, y, x, other);
    INFO("reverse " << reverse.value << "+-" << reverse.std_error);
    CHECK(agree(bridge, reverse, 3.0));

    // Below the free kernel.
    const double free = product_kernel(params, t, x, y);
    CHECK(kde.value <= free + 3.0 * kde.std_error);
    CHECK(bridge.value <= free + 3.0 * bridge.std_error);
    CHECK(sub.value <= free + 3.0 * sub.std_error);
  }

  TEST_CASE("Chapman-Kolmogorov closure on a mesh") {
    const AlphaParam params(1.0, 2);
    const Domain d = paper_domain("disc");
    SimConfig cfg = config(1e-3, 100000, 9);
    cfg.t_end = 0.25;
    const Point x{0.0, 0.0}, y{0.3, 0.0};
    const Ensemble ex = simulate_ensemble(params, x, cfg, &d, {0.25});
    cfg.seed = 10;
    const Ensemble ey = simulate_ensemble(params, y, cfg, &d, {0.25});
    const CellMesh mesh = CellMesh::covering(d.bbox(), 0.04);
    std::vector<double> fx(mesh.cell_count(), 0.0), fy(mesh.cell_count(), 0.0);
    for (std::int64_t i = 0; i < cfg.n_paths; ++i) {
      if (ex.alive_at(i, 0)) fx[mesh.index_of(ex.state_at(i, 0))] += 1.0;
      if (ey.alive_at(i, 0)) fy[mesh.index_of(ey.state_at(i, 0))] += 1.0;
    }
    double integral = 0.0;
    const double vol = mesh.cell_volume();
    for (std::int64_t c = 0; c < mesh.cell_count(); ++c) {
      integral += (fx[c] / (cfg.n_paths * vol)) * (fy[c] / (cfg.n_paths * vol)) * vol;
    }
    const auto direct = estimate_pd_subtraction(d, params, 0.5, x, y, config(1e-3, 100000, 11));
    CHECK(integral == doctest::Approx(direct.value).epsilon(0.03));
  }

  TEST_CASE("irreducible four squares have a positive kernel across the chain") {
    const AlphaParam params(1.0, 2);
    const auto est = estimate_pd_bridge(paper_domain("four_squares"), params, 0.5, Point{0.0, 0.0},
                                        Point{6.0, 3.0}, config(1e-3, 100000, 12));
    CHECK(est.value > 0.0);
    CHECK(est.hits > 0);
  }

  TEST_CASE("no survivor reaches the other diagonal ball") {
    const AlphaParam params(1.0, 2);
    const Domain d = paper_domain("diagonal_balls_6_3");
    SimConfig cfg = config(1e-3, 100000, 13);
    const Ensemble e = simulate_ensemble(params, Point{-1.1, -1.1}, cfg, &d, {1.0});
    const double rate = survivor_fraction_where(e, 0, [](std::span<const double> z) { return z[0] > 0.0; });
    CHECK(rate <= 1e-4);
    const auto kde = kde_from_ensemble(e, 0, Point{1.1, 1.1}, default_bandwidth(1.0, 1.0, cfg.n_paths, 2), 1);
    CHECK(kde.hits <= 2);
  }

  TEST_CASE("zero survivors") {
    const AlphaParam params(1.5, 2);
    SimConfig cfg = config(1e-2, 20, 14);
    CHECK_THROWS_WITH_AS(
        estimate_pd_survivor_kde(paper_domain("disc"), params, 2.0, Point{0.999, 0.0}, Point{0.0, 0.0}, cfg),
        doctest::Contains("ZeroSurvivors"), Error);
  }

  TEST_CASE("principal eigenvalue from survival decay") {
    const AlphaParam params(1.0, 2);
    const Domain d = paper_domain("disc");
    const auto cfg = config(1e-3, 40000, 15);
    const auto a = estimate_lambda1(d, params, {Point{0.0, 0.0}}, {}, cfg);
    auto other = cfg;
    other.seed = 16;
    const auto b = estimate_lambda1(d, params, {Point{0.4, 0.0}}, a.t_grid, other);
    INFO("lambda(0)=" << a.lambda1 << "+-" << a.std_error << " lambda(0.4)=" << b.lambda1 << "+-" << b.std_error);
    CHECK(a.lambda1 > 0.0);
    CHECK(std::isfinite(a.lambda1));
    CHECK(a.t_grid.size() == 5);
    CHECK(a.t_grid.back() <= 3.0 * a.t_grid.front() + 1e-12);
    // The window starts where the pilot run's survival reaches 0.1.
    CHECK(a.curves[0].front().survival == doctest::Approx(0.1).epsilon(0.15));
    CHECK(a.curves[0].back().survival > 0.0);
    CHECK(std::abs(a.lambda1 - b.lambda1) <= 3.0 * std::hypot(a.std_error, b.std_error));
    CHECK(a.std_error > 0.0);

    const auto pooled = estimate_lambda1(d, params, {Point{0.0, 0.0}, Point{0.4, 0.0}}, a.t_grid, cfg);
    CHECK(pooled.lambda1 == doctest::Approx(0.5 * (a.lambda1 + b.lambda1)).epsilon(0.1));

    CHECK_THROWS_WITH_AS(estimate_lambda1(d, params, {Point{0.0, 0.0}}, {0.001, 0.002}, config(1e-3, 2000, 1)),
                         doctest::Contains("DecayNotResolved"), Error);
  }

  TEST_CASE("bound ratio diagnostics") {
    const AlphaParam params(1.0, 2);
    BoundGrid grid;
    grid.times = {0.1, 0.2};
    grid.pairs = {{Point{0.0, 0.0}, Point{0.3, 0.0}}, {Point{0.9, 0.0}, Point{0.0, 0.0}}};
    for (KernelMethod m : {KernelMethod::Bridge, KernelMethod::SurvivorKde, KernelMethod::Subtraction}) {
      grid.method = m;
      const auto diag = bound_ratio_diagnostics(paper_domain("disc"), params, grid, config(1e-3, 20000, 17));
      REQUIRE(diag.entries.size() == 4);
      CHECK(diag.ratio_min > 0.0);
      CHECK(diag.ratio_min <= diag.ratio_max);
      CHECK(std::isfinite(diag.ratio_max));
      CHECK(diag.entries[1].w_x == doctest::Approx(1.0));
      CHECK(diag.entries[3].w_x == doctest::Approx(std::sqrt(0.5)));
      CHECK(diag.to_json().at("entries").size() == 4);
    }
    CHECK(boundary_weight(0.04, 1.0, 0.25) == doctest::Approx(0.4));
    CHECK(boundary_weight(1.0, 1.0, 0.25) == 1.0);

    grid.method = KernelMethod::Bridge;
    grid.times = {1.0};
    grid.pairs = {{Point{-1.1, -1.1}, Point{1.1, 1.1}}};
    const auto diag = bound_ratio_diagnostics(paper_domain("diagonal_balls_6_3"), params, grid,
                                              config(1e-3, 20000, 18));
    CHECK(diag.entries[0].zero);
    CHECK(diag.ratio_min == 0.0);
  }
}
