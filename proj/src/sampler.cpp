// Compiled with -ffast-math so the transcendental loop maps onto libmvec.
// Inputs are confined to the open unit interval, so no inf/nan can arise.

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cylstable/error.hpp"
#include "cylstable/stable.hpp"

namespace cylstable {

namespace {

constexpr std::size_t kBlock = 64;

}  // namespace

double standard_stable_from_uniforms(double alpha, double u_angle, double u_exp) noexcept {
  const double v = std::numbers::pi * (u_angle - 0.5);
  const double w = -std::log(u_exp);
  const double inv_alpha = 1.0 / alpha;
  const double exponent = (1.0 - alpha) / alpha;
  return std::sin(alpha * v) *
         std::exp(-inv_alpha * std::log(std::cos(v)) +
                  exponent * (std::log(std::cos(v - alpha * v)) - std::log(w)));
}

double sample_increment(double alpha, double dt, const RandomStream& stream, std::uint64_t k) {
  double out = 0.0;
  fill_increments(alpha, dt, stream, k, std::span<double>(&out, 1));
  return out;
}

void fill_increments(double alpha, double dt, const RandomStream& stream, std::uint64_t k0,
                     std::span<double> out) {
  const double scale = std::pow(dt, 1.0 / alpha);
  const double inv_alpha = 1.0 / alpha;
  const double exponent = (1.0 - alpha) / alpha;
  // Always evaluate full blocks so every draw goes through the same (vector)
  // code path; a draw's value then depends only on its counter.
  double ua[kBlock];
  double ue[kBlock];
  double buffer[kBlock];
  std::size_t done = 0;
  while (done < out.size()) {
    const std::size_t n = std::min(kBlock, out.size() - done);
    for (std::size_t i = 0; i < kBlock; ++i) stream.uniform_pair(k0 + done + i, ua[i], ue[i]);
    double* dst = buffer;
#pragma omp simd
    for (std::size_t i = 0; i < kBlock; ++i) {
      const double v = std::numbers::pi * (ua[i] - 0.5);
      const double w = -std::log(ue[i]);
      dst[i] = scale * std::sin(alpha * v) *
               std::exp(-inv_alpha * std::log(std::cos(v)) +
                        exponent * (std::log(std::cos(v - alpha * v)) - std::log(w)));
    }
    std::copy_n(buffer, n, out.data() + done);
    done += n;
  }
}

}  // namespace cylstable
