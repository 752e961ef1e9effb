#include <boost/multiprecision/cpp_bin_float.hpp>
#include <cmath>
#include <numbers>
#include <vector>

#include "cylstable/error.hpp"
#include "cylstable/stable.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace cylstable;
using std::numbers::pi;

namespace {

double rel_err(double a, double b) { return std::abs(a - b) / std::abs(b); }

std::vector<double> draws(double alpha, double dt, std::uint64_t seed, std::size_t n) {
  std::vector<double> out(n);
  fill_increments(alpha, dt, RandomStream(seed, 0, 0, StreamPurpose::Generic), 0, out);
  return out;
}

}  // namespace

TEST_SUITE("stable") {
  TEST_CASE("cd_alpha closed forms") {
    CHECK(cd_alpha(1.0, 1) == doctest::Approx(1.0 / pi).epsilon(1e-15));
    CHECK(cd_alpha(1.0, 2) == doctest::Approx(1.0 / (2.0 * pi)).epsilon(1e-15));
  }

  TEST_CASE("cd_alpha against a 50-digit Gamma oracle") {
    using mp = boost::multiprecision::cpp_bin_float_50;
    for (double alpha : {0.5, 0.3, 1.7}) {
      for (int d : {1, 2, 3}) {
        const mp a = alpha;
        const mp expected = a * pow(mp(2), a - 1) * boost::multiprecision::tgamma((mp(d) + a) / 2) /
                            (pow(boost::math::constants::pi<mp>(), mp(d) / 2) *
                             boost::multiprecision::tgamma(1 - a / 2));
        CHECK(rel_err(cd_alpha(alpha, d), expected.convert_to<double>()) < 1e-13);
      }
    }
  }

  TEST_CASE("AlphaParam rejects out-of-range values") {
    CHECK_THROWS_AS(AlphaParam(2.0, 2), Error);
    CHECK_THROWS_AS(AlphaParam(0.0, 2), Error);
    CHECK_THROWS_AS(AlphaParam(1.0, 0), Error);
  }

  TEST_CASE("density_1d matches the Cauchy closed form on [-10,10]") {
    double worst = 0.0;
    for (int i = 0; i <= 400; ++i) {
      const double z = -10.0 + 0.05 * i;
      worst = std::max(worst, rel_err(density_1d(1.0, 1.0, z), oracle::cauchy_density(1.0, z)));
    }
    CHECK(worst < 1e-8);
    // Forced quadrature, including the oscillatory route.
    for (double z : {0.3, 2.0, 5.5, 9.75}) {
      const auto ev = density_1d_detailed(1.0, 1.0, z, false);
      CHECK(rel_err(ev.value, oracle::cauchy_density(1.0, z)) < 1e-9);
    }
    CHECK(density_1d_detailed(1.0, 1.0, 9.75, false).route == DensityEvaluation::Route::Oscillatory);
  }

  TEST_CASE("density_1d at the origin equals Gamma(1+1/alpha)/pi") {
    for (double alpha : {0.5, 0.7, 1.3, 1.9}) {
      const double expected = std::tgamma(1.0 + 1.0 / alpha) / pi;
      CHECK(rel_err(density_1d(alpha, 1.0, 0.0), expected) < 1e-10);
    }
    CHECK(density_1d(0.5, 1.0, 0.0) == doctest::Approx(2.0 / pi).epsilon(1e-10));
  }

  TEST_CASE("density_1d agrees with an independent Fourier-cosine oracle") {
    for (double alpha : {0.6, 1.2, 1.7}) {
      for (double z : {0.1, 0.8, 2.5, 6.0}) {
        CHECK(rel_err(density_1d(alpha, 1.0, z), oracle::stable_density_ooura(alpha, 1.0, z)) < 1e-8);
      }
    }
  }

  TEST_CASE("density_1d for small alpha between the series and quadrature ranges") {
    for (double alpha : {0.32, 0.45}) {
      for (double z : {0.3, 1.0, 2.39, 3.5}) {
        INFO("alpha=" << alpha << " z=" << z);
        CHECK(rel_err(density_1d(alpha, 0.884, z), oracle::stable_density_ooura(alpha, 0.884, z)) < 1e-8);
      }
    }
  }

  TEST_CASE("density_1d self-similarity") {
    const double alpha = 1.5;
    const double lhs = density_1d(alpha, 2.0, 3.0);
    const double s = std::pow(2.0, -1.0 / alpha);
    const double rhs = s * density_1d(alpha, 1.0, 3.0 * s);
    CHECK(rel_err(lhs, rhs) < 1e-10);
  }

  TEST_CASE("density_1d integrates to one") {
    for (double alpha : {0.5, 1.0, 1.5}) {
      const double t = 0.7;
      const auto table = StableDensityTable::shared(alpha);
      const double z_max = 1e4;
      // Adaptive grid (log-spaced panels) plus the analytic series tail.
      std::vector<double> breaks{0.0};
      for (double b = 1e-2; b < z_max; b *= 2.0) breaks.push_back(b);
      breaks.push_back(z_max);
      auto f = [&](double z) { return (*table)(t, z); };
      const double body = 2.0 * quad::integrate_piecewise(f, breaks, {1e-13, 1e-12, 4000}).value;
      // Tail: int_Z^inf c_k t^(k) z^(-k alpha-1) dz summed over the series terms.
      double tail = 0.0;
      for (int k = 1; k <= 6; ++k) {
        const double c = ((k % 2) ? 1.0 : -1.0) * std::tgamma(k * alpha + 1.0) / std::tgamma(k + 1.0) *
                         std::sin(k * pi * alpha / 2.0) / pi;
        tail += c * std::pow(t, k) * std::pow(z_max, -k * alpha) / (k * alpha);
      }
      CHECK(std::abs(body + 2.0 * tail - 1.0) < 1e-6);
    }
  }

  TEST_CASE("density_1d rejects invalid input") {
    CHECK_THROWS_AS(density_1d(1.0, 0.0, 1.0), Error);
    CHECK_THROWS_AS(density_1d(2.5, 1.0, 1.0), Error);
  }

  TEST_CASE("density table tracks the quadrature") {
    for (double alpha : {0.5, 0.8, 1.0, 1.3, 1.7, 1.95}) {
      const auto table = StableDensityTable::shared(alpha);
      double worst = 0.0;
      for (double x = 0.0; x < 40.0; x += 0.173) {
        worst = std::max(worst, rel_err(table->standard(x), density_1d(alpha, 1.0, x)));
      }
      CAPTURE(alpha);
      CHECK(worst < 1e-9);
    }
  }

  TEST_CASE("product kernel examples") {
    const AlphaParam p2(1.0, 2);
    const Point o{0.3, -0.2};
    CHECK(rel_err(product_kernel(p2, 1.0, o, o), 1.0 / (pi * pi)) < 1e-10);
    const AlphaParam p3(0.7, 3);
    const Point z3{0.0, 0.0, 0.0};
    CHECK(rel_err(product_kernel(p3, 1.0, z3, z3), std::pow(std::tgamma(1.0 + 1.0 / 0.7) / pi, 3)) < 1e-9);
  }

  TEST_CASE("product kernel symmetry and scaling on random tuples") {
    RandomStream rs(99, 0);
    const double alpha = 1.2;
    const AlphaParam p(alpha, 2);
    for (int i = 0; i < 30; ++i) {
      const Point x{4 * rs.next_uniform() - 2, 4 * rs.next_uniform() - 2};
      const Point y{4 * rs.next_uniform() - 2, 4 * rs.next_uniform() - 2};
      const double t = 0.1 + 2.0 * rs.next_uniform();
      const double lambda = 0.5 + 3.5 * rs.next_uniform();
      const double direct = product_kernel(p, t, x, y);
      CHECK(direct == product_kernel(p, t, y, x));
      const Point xs{x[0] / lambda, x[1] / lambda}, ys{y[0] / lambda, y[1] / lambda};
      const double scaled = std::pow(lambda, -2.0) * product_kernel(p, t * std::pow(lambda, -alpha), xs, ys);
      CHECK(rel_err(scaled, direct) < 1e-8);
    }
  }

  TEST_CASE("bound envelope") {
    for (double alpha : {0.5, 1.0, 1.5}) {
      const AlphaParam p(alpha, 2);
      const double c = envelope_constant(p);
      const Point x{0.1, 0.4};
      const double t = 0.3;
      const auto diag = bound_envelope(p, t, x, x);
      CHECK(rel_err(diag.low, std::pow(t, -2.0 / alpha) / c) < 1e-14);
      CHECK(rel_err(diag.high, std::pow(t, -2.0 / alpha) * c) < 1e-14);
      const double g = std::pow(t, 1.0 / alpha);
      const Point y{x[0] + g, x[1] - g};
      const auto cross = bound_envelope(p, t, x, y);
      CHECK(rel_err(cross.low, cross.high / (c * c)) < 1e-12);

      RandomStream rs(5, static_cast<std::uint64_t>(alpha * 10));
      int violations = 0;
      for (int i = 0; i < 1000; ++i) {
        const double tt = std::pow(10.0, -2.0 + 3.0 * rs.next_uniform());
        const Point a{20 * rs.next_uniform() - 10, 20 * rs.next_uniform() - 10};
        const Point b{20 * rs.next_uniform() - 10, 20 * rs.next_uniform() - 10};
        const auto kv = kernel_value(p, tt, a, b);
        if (!(kv.envelope_low <= kv.value && kv.value <= kv.envelope_high)) ++violations;
      }
      CHECK(violations == 0);
    }
  }

  TEST_CASE("Levy axis density") {
    CHECK(levy_density_axis(1.0, 0.0, 1.0) == doctest::Approx(1.0 / pi).epsilon(1e-15));
    for (double alpha : {0.4, 1.3}) {
      CHECK(levy_density_axis(alpha, 0.0, 2.0) ==
            doctest::Approx(std::pow(2.0, -1.0 - alpha) * levy_density_axis(alpha, 0.0, 1.0)).epsilon(1e-14));
      CHECK(levy_density_axis(alpha, 2.0, -1.0) == levy_density_axis(alpha, -1.0, 2.0));
    }
    // Tail mass beyond eps against the antiderivative.
    const double alpha = 1.3, eps = 0.5;
    auto j = [&](double th) { return levy_density_axis(alpha, 0.0, th); };
    const double numeric = 2.0 * quad::integrate([&](double s) {
                             const double th = eps / s;  // theta = eps/s maps (0,1] to [eps,inf)
                             return j(th) * eps / (s * s);
                           }, 0.0, 1.0, {1e-14, 1e-12, 4000}).value;
    CHECK(rel_err(numeric, 2.0 * cd_alpha(alpha, 1) * std::pow(eps, -alpha) / alpha) < 1e-9);
    CHECK_THROWS_AS(levy_density_axis(1.0, 0.5, 0.5), Error);
  }

  TEST_CASE("sampler characteristic function and symmetry") {
    const std::size_t n = 1000000;
    for (double alpha : {0.6, 1.0, 1.7}) {
      const auto x = draws(alpha, 1.0, 2024, n);
      double sup = 0.0;
      for (double xi : {0.5, 1.0, 2.0}) {
        double acc = 0.0;
        for (double v : x) acc += std::cos(xi * v);
        sup = std::max(sup, std::abs(acc / n - std::exp(-std::pow(xi, alpha))));
      }
      CAPTURE(alpha);
      CHECK(sup < 0.01);
      double sign = 0.0;
      for (double v : x) sign += (v > 0) - (v < 0);
      CHECK(std::abs(sign / n) < 3e-3);
    }
  }

  TEST_CASE("sampler stable scaling by two-sample KS") {
    const double alpha = 1.3;
    const std::size_t n = 100000;
    const auto a = draws(alpha, 2.0, 11, n);
    auto b = draws(alpha, 1.0, 12, n);
    for (double& v : b) v *= std::pow(2.0, 1.0 / alpha);
    CHECK(oracle::ks_statistic(a, b) < oracle::ks_critical_001(n, n));
  }

  TEST_CASE("scalar and block sampling agree") {
    const RandomStream s(3, 9, 1, StreamPurpose::PathIncrement);
    std::vector<double> block(100);
    fill_increments(0.9, 0.01, s, 40, block);
    CHECK(sample_increment(0.9, 0.01, s, 57) == block[17]);
  }
}
