#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "cylstable/quadrature.hpp"
#include "cylstable/rng.hpp"

namespace cylstable {

using Point = std::vector<double>;

// Stability index and dimension of the cylindrical process.
class AlphaParam {
 public:
  AlphaParam(double alpha, int dim);

  double alpha() const noexcept { return alpha_; }
  int dim() const noexcept { return dim_; }

 private:
  double alpha_;
  int dim_;
};

void validate_alpha(double alpha);

// Normalizing constant of the d-dimensional fractional Laplacian,
// alpha 2^(alpha-1) Gamma((d+alpha)/2) / (pi^(d/2) Gamma(1-alpha/2)).
double cd_alpha(const AlphaParam& params);
double cd_alpha(double alpha, int dim);

// Diagnostics of one Fourier inversion.
struct DensityEvaluation {
  enum class Route { Direct, Oscillatory, Series };
  double value = 0.0;
  double abs_error = 0.0;
  double remainder_bound = 0.0;
  int pieces = 0;
  Route route = Route::Direct;
};

// 1-D symmetric alpha-stable transition density p(t,0,z) by Fourier inversion
// (1/pi) int_0^inf exp(-t u^alpha) cos(u z) du. Throws
// QuadratureNonConvergence when the tolerance cannot be met.
double density_1d(double alpha, double t, double z);
// allow_series=false forces the quadrature route (used to build tables).
DensityEvaluation density_1d_detailed(double alpha, double t, double z, bool allow_series = true);

// Tabulated standard density f(x) = p(1,0,x): piecewise Chebyshev fits on
// [0, series_start] and the convergent/asymptotic power series beyond. Built
// from density_1d; intended for hot loops (relative accuracy ~1e-10).
class StableDensityTable {
 public:
  explicit StableDensityTable(double alpha);

  double alpha() const noexcept { return alpha_; }
  double standard(double x) const noexcept;
  double operator()(double t, double z) const noexcept;
  double series_start() const noexcept { return series_start_; }

  // Process-wide cache keyed by alpha; thread-safe.
  static std::shared_ptr<const StableDensityTable> shared(double alpha);

 private:
  double series_value(double x) const noexcept;
  static double clenshaw(const double* coeffs, double s) noexcept;

  double alpha_;
  double series_start_;
  std::vector<double> breaks_;  // panel boundaries, ascending
  std::vector<double> cheb_;    // (degree+1) coefficients per panel
  std::vector<double> series_coeffs_;
};

// Density p(t,x,y) of the cylindrical process: product of 1-D marginals.
double product_kernel(const AlphaParam& params, double t, std::span<const double> x,
                      std::span<const double> y);
// Same via the cached table.
double product_kernel_fast(const AlphaParam& params, double t, std::span<const double> x,
                           std::span<const double> y);

struct KernelValue {
  double value = 0.0;
  double envelope_low = 0.0;
  double envelope_high = 0.0;
};

struct Envelope {
  double low = 0.0;
  double high = 0.0;
};

// Per-coordinate envelope constant C_1(alpha), calibrated on a log grid of
// |z|/t^(1/alpha) in [1e-3,1e3] and padded by 5%. The d-dim constant is C_1^d.
double envelope_constant_1d(double alpha);
double envelope_constant(const AlphaParam& params);

// low = C^-1 prod_k min(t^(-1/alpha), t/|x_k-y_k|^(1+alpha)), high = C * prod.
Envelope bound_envelope(const AlphaParam& params, double t, std::span<const double> x,
                        std::span<const double> y);
KernelValue kernel_value(const AlphaParam& params, double t, std::span<const double> x,
                         std::span<const double> y);

// Axis jump intensity C_{1,alpha} / |a-b|^(1+alpha).
double levy_density_axis(double alpha, double a, double b);

// ---- sampling -------------------------------------------------------------

// One standard symmetric alpha-stable variate (characteristic function
// exp(-|xi|^alpha)) via Chambers-Mallows-Stuck from two uniforms in (0,1).
double standard_stable_from_uniforms(double alpha, double u_angle, double u_exp) noexcept;

// Increment X_{t+dt}-X_t of one coordinate: dt^(1/alpha) times draw `k` of `stream`.
double sample_increment(double alpha, double dt, const RandomStream& stream, std::uint64_t k);

// Fills out[i] with increments for draws k0, k0+1, ... of `stream`. Vectorized.
void fill_increments(double alpha, double dt, const RandomStream& stream, std::uint64_t k0,
                     std::span<double> out);

}  // namespace cylstable
