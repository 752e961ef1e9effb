#pragma once

#include <span>
#include <vector>

namespace cylstable {

// w_p(x) = max(x, 0)^p with 0 < p.
class PowerTestFn {
 public:
  explicit PowerTestFn(double p);
  double p() const noexcept { return p_; }
  double operator()(double x) const noexcept;

 private:
  double p_;
};

// Phi(x) = (a, x - x0); delta_Pi(x) = max(Phi(x), 0) / |a|.
class Hyperplane {
 public:
  Hyperplane(std::vector<double> normal, std::vector<double> base);

  int dim() const noexcept { return static_cast<int>(normal_.size()); }
  const std::vector<double>& normal() const noexcept { return normal_; }
  const std::vector<double>& base() const noexcept { return base_; }
  double normal_length() const noexcept { return norm_; }
  double phi(std::span<const double> x) const;
  double distance_above(std::span<const double> x) const;

 private:
  std::vector<double> normal_;
  std::vector<double> base_;
  double norm_;
};

struct FracLapResult {
  double value = 0.0;
  double abs_error = 0.0;     // quadrature error estimate plus series truncation
  double tail = 0.0;          // analytic contribution beyond the cutoff
  int evaluations = 0;
};

// C(p, alpha) = (Delta^{alpha/2} w_p)(1) from the reduced integral
// (p C_{1,alpha} / alpha) int_0^inf t^-alpha (1+t)^(p-1) (1 - (1+t)^(alpha-2p)) dt.
// Requires 0 < p < alpha < 2. Throws QuadratureNonConvergence.
FracLapResult ctest_constant_detailed(double p, double alpha);
double ctest_constant(double p, double alpha);

// C(p, alpha) x^(p - alpha), x > 0.
double frac_lap_power(double p, double alpha, double x);

// Independent route: C_{1,alpha} times the principal value
// int_0^inf (w_p(x+z) + w_p(x-z) - 2 w_p(x)) / z^(1+alpha) dz evaluated in the
// raw variable z.
FracLapResult frac_lap_power_direct(double p, double alpha, double x);

// sum_k (Delta_k^{alpha/2} delta_Pi^p)(x) = C Phi(x)^(p-alpha) |a|^-p sum_k |a_k|^alpha.
// Throws PointBelowHyperplane when Phi(x) <= 0.
double cyl_op_hyperplane(const Hyperplane& plane, double p, double alpha, std::span<const double> x);

// Per-coordinate values of the same operator, each from an independent
// second-difference quadrature along the coordinate axis.
std::vector<double> cyl_op_hyperplane_direct(const Hyperplane& plane, double p, double alpha,
                                             std::span<const double> x);

}  // namespace cylstable
