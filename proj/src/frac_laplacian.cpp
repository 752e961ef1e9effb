#include "cylstable/frac_laplacian.hpp"

#include <cmath>
#include <string>

#include "cylstable/error.hpp"
#include "cylstable/quadrature.hpp"
#include "cylstable/stable.hpp"

namespace cylstable {

namespace {

constexpr double kSeriesEnd = 1e-3;  // [0, kSeriesEnd] integrated term by term
constexpr double kCutoff = 1e6;      // quadrature stops here, analytic tail beyond
constexpr int kSeriesTerms = 12;

const quad::Options kOptions{1e-15, 1e-13, 2000};

void check_orders(double p, double alpha) {
  validate_alpha(alpha);
  if (!(p > 0.0 && p < alpha)) {
    throw Error(ErrorCode::InvalidArgument,
                "need 0 < p < alpha, got p=" + std::to_string(p) + " alpha=" + std::to_string(alpha));
  }
}

// Binomial coefficients binom(beta, k), k = 0..n-1.
std::vector<double> binomials(double beta, int n) {
  std::vector<double> b(n);
  b[0] = 1.0;
  for (int k = 1; k < n; ++k) b[k] = b[k - 1] * (beta - k + 1) / k;
  return b;
}

// int_a^b f(t) dt through t = e^s, split into unit pieces in s.
template <class F>
quad::Result integrate_log(F&& f, double a, double b) {
  const double s0 = std::log(a), s1 = std::log(b);
  const int pieces = std::max(1, static_cast<int>(std::ceil(s1 - s0)));
  std::vector<double> breaks(pieces + 1);
  for (int i = 0; i <= pieces; ++i) breaks[i] = s0 + (s1 - s0) * i / pieces;
  return quad::integrate_piecewise(
      [&](double s) {
        const double t = std::exp(s);
        return f(t) * t;
      },
      breaks, kOptions);
}

// int_T^inf t^-gamma (1+t)^beta dt by expanding (1+t)^beta = sum binom(beta,k) t^(beta-k).
double power_tail(double beta, double gamma, double T, double& truncation) {
  const auto b = binomials(beta, kSeriesTerms);
  double sum = 0.0;
  for (int k = 0; k < kSeriesTerms; ++k) {
    const double e = gamma + k - beta - 1.0;  // > 0 for every k used here
    sum += b[k] * std::pow(T, -e) / e;
  }
  truncation = std::abs(sum) * std::pow(T, -static_cast<double>(kSeriesTerms));
  return sum;
}

void check_converged(const FracLapResult& r, const char* what) {
  const double allowed = 1e-8 * std::max(1.0, std::abs(r.value));
  if (!std::isfinite(r.value) || r.abs_error > allowed) {
    throw Error(ErrorCode::QuadratureNonConvergence,
                std::string(what) + ": error estimate " + std::to_string(r.abs_error) + " exceeds " +
                    std::to_string(allowed));
  }
}

}  // namespace

PowerTestFn::PowerTestFn(double p) : p_(p) {
  if (!(p > 0.0)) throw Error(ErrorCode::InvalidArgument, "power exponent must be positive");
}

double PowerTestFn::operator()(double x) const noexcept { return x > 0.0 ? std::pow(x, p_) : 0.0; }

Hyperplane::Hyperplane(std::vector<double> normal, std::vector<double> base)
    : normal_(std::move(normal)), base_(std::move(base)), norm_(0.0) {
  if (normal_.empty() || normal_.size() != base_.size()) {
    throw Error(ErrorCode::InvalidArgument, "hyperplane normal and base must have equal, non-zero length");
  }
  for (double a : normal_) norm_ += a * a;
  norm_ = std::sqrt(norm_);
  if (!(norm_ > 0.0)) throw Error(ErrorCode::InvalidArgument, "hyperplane normal must be non-zero");
}

double Hyperplane::phi(std::span<const double> x) const {
  if (x.size() != normal_.size()) throw Error(ErrorCode::InvalidArgument, "point dimension mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) s += normal_[k] * (x[k] - base_[k]);
  return s;
}

double Hyperplane::distance_above(std::span<const double> x) const {
  return std::max(phi(x), 0.0) / norm_;
}

FracLapResult ctest_constant_detailed(double p, double alpha) {
  check_orders(p, alpha);
  FracLapResult out;
  if (2.0 * p == alpha) return out;  // integrand vanishes identically
  const double gap = alpha - 2.0 * p;

  // Near 0: (1+t)^(p-1) - (1+t)^(alpha-p-1) = sum_{k>=1} c_k t^k.
  const auto b1 = binomials(p - 1.0, kSeriesTerms);
  const auto b2 = binomials(alpha - p - 1.0, kSeriesTerms);
  double head = 0.0;
  for (int k = 1; k < kSeriesTerms; ++k) {
    const double e = k + 1.0 - alpha;
    head += (b1[k] - b2[k]) * std::pow(kSeriesEnd, e) / e;
  }

  auto integrand = [&](double t) {
    const double l = std::log1p(t);
    return -std::exp(-alpha * std::log(t) + (p - 1.0) * l) * std::expm1(gap * l);
  };
  const auto body = integrate_log(integrand, kSeriesEnd, kCutoff);

  double trunc1 = 0.0, trunc2 = 0.0;
  const double tail =
      power_tail(p - 1.0, alpha, kCutoff, trunc1) - power_tail(alpha - p - 1.0, alpha, kCutoff, trunc2);

  const double scale = p * cd_alpha(alpha, 1) / alpha;
  out.value = scale * (head + body.value + tail);
  out.tail = scale * tail;
  out.abs_error = scale * (body.abs_error + trunc1 + trunc2 +
                           std::abs(head) * std::pow(kSeriesEnd, kSeriesTerms - 1));
  out.evaluations = body.evaluations;
  check_converged(out, "ctest_constant");
  return out;
}

double ctest_constant(double p, double alpha) { return ctest_constant_detailed(p, alpha).value; }

double frac_lap_power(double p, double alpha, double x) {
  if (!(x > 0.0)) throw Error(ErrorCode::InvalidArgument, "frac_lap_power needs x > 0");
  return ctest_constant(p, alpha) * std::pow(x, p - alpha);
}

FracLapResult frac_lap_power_direct(double p, double alpha, double x) {
  check_orders(p, alpha);
  if (!(x > 0.0)) throw Error(ErrorCode::InvalidArgument, "frac_lap_power_direct needs x > 0");
  const double xp = std::pow(x, p);

  // (x+z)^p + (x-z)^p - 2x^p = 2 sum_{k even} binom(p,k) x^(p-k) z^k for z < x.
  const auto b = binomials(p, 2 * kSeriesTerms);
  const double z0 = kSeriesEnd * x;
  double head = 0.0;
  for (int k = 2; k < 2 * kSeriesTerms; k += 2) {
    head += 2.0 * b[k] * std::pow(x, p - k) * std::pow(z0, k - alpha) / (k - alpha);
  }

  auto inner = [&](double z) {
    return (std::pow(x + z, p) + std::pow(x - z, p) - 2.0 * xp) / std::pow(z, 1.0 + alpha);
  };
  std::vector<double> breaks{z0};
  for (double f = 0.01; f < 0.5; f *= 3.0) breaks.push_back(f * x);
  for (int j = 1; j <= 12; ++j) breaks.push_back(x * (1.0 - std::pow(2.0, -j)));
  breaks.push_back(x);
  auto near = quad::integrate_piecewise(inner, breaks, kOptions);

  auto outer = [&](double z) { return (std::pow(x + z, p) - 2.0 * xp) / std::pow(z, 1.0 + alpha); };
  const auto far = integrate_log(outer, x, kCutoff * x);

  // int_{Tx}^inf ((x+z)^p - 2x^p) z^(-1-alpha) dz with z = x s.
  double trunc = 0.0;
  const double tail = std::pow(x, p - alpha) *
                      (power_tail(p, 1.0 + alpha, kCutoff, trunc) - 2.0 * std::pow(kCutoff, -alpha) / alpha);

  const double c1 = cd_alpha(alpha, 1);
  FracLapResult out;
  out.value = c1 * (head + near.value + far.value + tail);
  out.tail = c1 * tail;
  out.abs_error = c1 * (near.abs_error + far.abs_error + trunc * std::pow(x, p - alpha) +
                        std::abs(head) * std::pow(kSeriesEnd, 2 * kSeriesTerms - 2));
  out.evaluations = near.evaluations + far.evaluations;
  check_converged(out, "frac_lap_power_direct");
  return out;
}

double cyl_op_hyperplane(const Hyperplane& plane, double p, double alpha, std::span<const double> x) {
  check_orders(p, alpha);
  const double phi = plane.phi(x);
  if (!(phi > 0.0)) throw Error(ErrorCode::PointBelowHyperplane, "Phi(x) must be positive");
  double weight = 0.0;
  for (double a : plane.normal()) weight += std::pow(std::abs(a), alpha);
  return ctest_constant(p, alpha) * std::pow(phi, p - alpha) * std::pow(plane.normal_length(), -p) * weight;
}

std::vector<double> cyl_op_hyperplane_direct(const Hyperplane& plane, double p, double alpha,
                                             std::span<const double> x) {
  check_orders(p, alpha);
  const double phi = plane.phi(x);
  if (!(phi > 0.0)) throw Error(ErrorCode::PointBelowHyperplane, "Phi(x) must be positive");
  std::vector<double> out;
  const double inv_norm_p = std::pow(plane.normal_length(), -p);
  for (double a : plane.normal()) {
    const double s = std::abs(a);
    if (s == 0.0) {
      out.push_back(0.0);  // delta_Pi is constant along this axis
      continue;
    }
    // Along e_k, delta_Pi^p(x + z e_k) = |a|^-p s^p max(phi/s + z sign(a_k), 0)^p.
    out.push_back(inv_norm_p * std::pow(s, p) * frac_lap_power_direct(p, alpha, phi / s).value);
  }
  return out;
}

}  // namespace cylstable
