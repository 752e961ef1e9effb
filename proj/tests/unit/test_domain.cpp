#include <cmath>
#include <numbers>
#include <random>

#include "cylstable/domain.hpp"
#include "cylstable/error.hpp"
#include "doctest.h"

using namespace cylstable;

namespace {

// Distance from an interior x to the boundary along direction (c, s): march
// with a fixed step using contains() only, then bisect. Returns +inf if no
// exit is found before `limit`.
double ray_exit(const Domain& d, const Point& x, double c, double s, double limit, double step) {
  double inside_t = 0.0;
  for (double t = step; t <= limit + step; t += step) {
    const Point p{x[0] + t * c, x[1] + t * s};
    if (!d.contains(p)) {
      double lo = inside_t, hi = t;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        const Point q{x[0] + mid * c, x[1] + mid * s};
        (d.contains(q) ? lo : hi) = mid;
      }
      return 0.5 * (lo + hi);
    }
    inside_t = t;
  }
  return std::numeric_limits<double>::infinity();
}

Point random_inside(const Domain& d, std::mt19937_64& rng) {
  const auto& b = d.bbox();
  std::uniform_real_distribution<double> ux(b.lo[0], b.hi[0]), uy(b.lo[1], b.hi[1]);
  for (;;) {
    Point p{ux(rng), uy(rng)};
    if (d.contains(p)) return p;
  }
}

}  // namespace

TEST_SUITE("domain") {
  TEST_CASE("signed distance examples") {
    const Domain disc = paper_domain("disc");
    CHECK(disc.signed_distance(Point{0.0, 0.0}) == doctest::Approx(1.0));
    CHECK(disc.signed_distance(Point{2.0, 0.0}) == doctest::Approx(-1.0));
    const Domain four = paper_domain("four_squares");
    CHECK(four.signed_distance(Point{0.0, 0.0}) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(four.exact_sdf());
  }

  TEST_CASE("contains examples and openness") {
    const Domain d = paper_domain("diagonal_balls_6_3");
    CHECK_FALSE(d.contains(Point{0.0, 0.0}));
    CHECK(d.contains(Point{-1.1, -1.1}));
    CHECK_FALSE(d.contains(Point{-1.1 + 1.0, -1.1}));
    CHECK_FALSE(paper_domain("disc").contains(Point{0.0, 1.0}));
  }

  TEST_CASE("ball_inside examples") {
    const Domain disc = paper_domain("disc");
    CHECK(disc.ball_inside(Point{0.0, 0.0}, 0.5));
    CHECK_FALSE(disc.ball_inside(Point{0.6, 0.0}, 0.5));
    CHECK(paper_domain("four_squares").ball_inside(Point{3.0, 0.0}, 0.9));
    CHECK_THROWS_AS(disc.ball_inside(Point{0.0, 0.0}, 0.0), Error);
  }

  TEST_CASE("catalog metadata") {
    const Domain diag = paper_domain("diagonal_balls_6_3");
    CHECK(diag.components().size() == 2);
    CHECK(diag.components()[0].kind == PrimitiveKind::Ball);
    const auto box = paper_domain("four_squares").bbox();
    CHECK(box.lo == Point{-1.0, -1.0});
    CHECK(box.hi == Point{7.0, 4.0});
    const Domain disc2 = paper_domain("disc", 2.0);
    REQUIRE(disc2.components().size() == 1);
    CHECK(disc2.components()[0].params.at("radius").get<double>() == 2.0);
    CHECK(disc2.c11_radius().value() == 2.0);
    CHECK(paper_domain("four_squares").c11_radius().value() == 0.25);
    CHECK_THROWS_WITH_AS(paper_domain("nowhere"), doctest::Contains("UnknownDomain"), Error);
  }

  TEST_CASE("marked points of the counterexample sets") {
    const Domain channel = paper_domain("nested_channel_6_1");
    CHECK(channel.signed_distance(Point{0.0, 0.0}) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(channel.signed_distance(Point{4.0, 4.0}) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK_FALSE(channel.contains(Point{4.0, 0.0}));
    CHECK_FALSE(channel.contains(Point{0.0, 4.0}));
    CHECK(channel.contains(Point{-4.0, 5.0}));
    CHECK(channel.contains(Point{0.0, 8.0}));
    CHECK_FALSE(channel.contains(Point{0.0, 5.0}));

    const Domain tilted = paper_domain("tilted_rect_6_2");
    CHECK(tilted.contains(Point{-4.0, -4.0}));
    CHECK(tilted.contains(Point{4.0, 4.0}));
    CHECK_FALSE(tilted.contains(Point{4.0, -4.0}));
    CHECK_FALSE(tilted.contains(Point{-4.0, 4.0}));
    CHECK(tilted.signed_distance(Point{0.0, 0.0}) == doctest::Approx(2.0));
  }

  TEST_CASE("rounded polygon of a square matches the rounded box") {
    const auto poly = make_rounded_polygon({{-1, -1}, {1, -1}, {1, 1}, {-1, 1}}, 0.3);
    const auto cw = make_rounded_polygon({{-1, 1}, {1, 1}, {1, -1}, {-1, -1}}, 0.3);
    const auto box = make_rounded_box({0.0, 0.0}, {1.0, 1.0}, 0.3);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int i = 0; i < 5000; ++i) {
      const Point p{u(rng), u(rng)};
      CHECK(poly->sdf(p) == doctest::Approx(box->sdf(p)).epsilon(1e-12).scale(1.0));
      CHECK(cw->sdf(p) == doctest::Approx(box->sdf(p)).epsilon(1e-12).scale(1.0));
    }
  }

  TEST_CASE("rotated box at zero angle matches the axis-aligned box") {
    const auto rot = make_rotated_rounded_box({0.5, -0.2}, {2.0, 1.0}, 0.4, 0.0);
    const auto box = make_rounded_box({0.5, -0.2}, {2.0, 1.0}, 0.4);
    const auto quarter = make_rotated_rounded_box({0.5, -0.2}, {1.0, 2.0}, 0.4, 90.0);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int i = 0; i < 2000; ++i) {
      const Point p{u(rng), u(rng)};
      CHECK(rot->sdf(p) == doctest::Approx(box->sdf(p)).epsilon(1e-13).scale(1.0));
      CHECK(quarter->sdf(p) == doctest::Approx(box->sdf(p)).epsilon(1e-12).scale(1.0));
    }
  }

  TEST_CASE("exact SDF agrees with ray-sampled boundary distance") {
    std::mt19937_64 rng(20240611);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    const int points_per_domain = 10000 / static_cast<int>(catalog_names().size()) + 1;
    for (const auto& name : catalog_names()) {
      const Domain d = paper_domain(name);
      REQUIRE(d.exact_sdf());
      double worst = 0.0;
      for (int i = 0; i < points_per_domain; ++i) {
        const Point x = random_inside(d, rng);
        const double offset = phase(rng);
        double best = d.bbox().diameter();
        for (int k = 0; k < 1000; ++k) {
          const double a = offset + 2.0 * std::numbers::pi * k / 1000.0;
          best = std::min(best, ray_exit(d, x, std::cos(a), std::sin(a), best, std::max(best / 8.0, 1e-4)));
        }
        worst = std::max(worst, std::abs(d.signed_distance(x) - best));
      }
      INFO(name);
      CHECK(worst < 2e-3);
    }
  }

  TEST_CASE("union monotonicity and exactness flag") {
    const auto a = make_ball({0.0, 0.0}, 1.0);
    const auto b = make_ball({1.5, 0.0}, 1.0);
    const Domain overlap(make_union({a, b}));
    CHECK_FALSE(overlap.exact_sdf());
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-2.0, 3.5);
    for (int i = 0; i < 1000; ++i) {
      const Point p{u(rng), u(rng)};
      CHECK(overlap.signed_distance(p) >= std::max(a->sdf(p), b->sdf(p)));
    }
    // The SDF lower bound misses this ball; the sampling fallback finds it.
    CHECK(overlap.signed_distance(Point{0.75, 0.0}) < 1.0);
    CHECK(overlap.ball_inside(Point{0.75, 0.0}, 0.6));
    CHECK_FALSE(overlap.ball_inside(Point{0.75, 0.0}, 0.7));
    CHECK(paper_domain("parallel_balls").exact_sdf());
    CHECK(paper_domain("diagonal_balls_6_3").exact_sdf());
  }

  TEST_CASE("scaling") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-8.0, 10.0);
    for (const auto& name : catalog_names()) {
      const Domain one = paper_domain(name, 1.0);
      const Domain big = paper_domain(name, 2.5);
      for (int i = 0; i < 200; ++i) {
        const Point x{u(rng), u(rng)};
        const Point y{2.5 * x[0], 2.5 * x[1]};
        CHECK(big.signed_distance(y) == doctest::Approx(2.5 * one.signed_distance(x)).epsilon(1e-12).scale(1.0));
      }
    }
  }

  TEST_CASE("diameter bounded by bounding box") {
    std::mt19937_64 rng(5);
    for (const auto& name : catalog_names()) {
      const Domain d = paper_domain(name);
      double far = 0.0;
      for (int i = 0; i < 300; ++i) {
        const Point p = random_inside(d, rng), q = random_inside(d, rng);
        far = std::max(far, std::hypot(p[0] - q[0], p[1] - q[1]));
      }
      CHECK(far <= d.bbox().diameter());
    }
  }

  TEST_CASE("JSON round trip and validation") {
    for (const auto& name : catalog_names()) {
      const Domain d = paper_domain(name);
      const Domain back = Domain::from_json(nlohmann::json::parse(d.to_json().dump()));
      CHECK(back.name() == name);
      CHECK(back.exact_sdf() == d.exact_sdf());
      CHECK(back.c11_radius() == d.c11_radius());
      for (double x = -5.0; x <= 9.0; x += 0.7) {
        const Point p{x, 0.37 * x + 0.1};
        CHECK(back.signed_distance(p) == d.signed_distance(p));
      }
    }
    auto bad = paper_domain("disc").to_json();
    bad["params"]["radias"] = 1.0;
    CHECK_THROWS_WITH_AS(Domain::from_json(bad), doctest::Contains("unknown key"), Error);
    const nlohmann::json bad_rho = {
        {"kind", "rounded_box"},
        {"params", {{"center", {0, 0}}, {"half_widths", {1, 1}}, {"corner_radius", 1.5}}}};
    CHECK_THROWS_AS(Domain::from_json(bad_rho), Error);
  }

  TEST_CASE("general dimension") {
    const Domain cube(make_rounded_box({0.0, 0.0, 0.0}, {1.0, 2.0, 3.0}, 0.5));
    CHECK(cube.signed_distance(Point{0.0, 0.0, 0.0}) == doctest::Approx(1.0));
    CHECK(cube.signed_distance(Point{0.0, 0.0, 3.5}) == doctest::Approx(-0.5));
    const Domain ball3(make_ball({0.0, 0.0, 0.0}, 1.0));
    CHECK(ball3.ball_inside(Point{0.2, 0.0, 0.0}, 0.8));
    CHECK_THROWS_AS(ball3.signed_distance(Point{0.0, 0.0}), Error);
  }
}
