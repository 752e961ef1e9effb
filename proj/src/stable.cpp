#include "cylstable/stable.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <string>

#include "cylstable/error.hpp"

namespace cylstable {

namespace {

constexpr double kPi = std::numbers::pi;
// exp(-35) ~ 6e-16: beyond this the Fourier integrand is below double precision.
constexpr double kCutoffExponent = 35.0;
constexpr double kOscillationThreshold = 50.0;
constexpr double kSeriesMinX = 4.0;
constexpr int kDegree = 16;

std::string fmt_args(double alpha, double t, double z) {
  return "alpha=" + std::to_string(alpha) + " t=" + std::to_string(t) + " z=" + std::to_string(z);
}

// Series f(x) = (1/pi) sum_k (-1)^(k+1) Gamma(k alpha + 1)/k! sin(k pi alpha/2) x^(-k alpha-1).
// Convergent for alpha<1, asymptotic for alpha>1. Returns false when the
// terms do not fall below 1e-17 of the sum before they start to grow, or when
// cancellation between terms would cost more than four digits.
bool try_series(double alpha, double x, double& value, int& terms) {
  double sum = 0.0;
  double abs_sum = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  const double log_x = std::log(x);
  for (int k = 1; k <= 400; ++k) {
    const double s = std::sin(k * kPi * alpha / 2.0);
    const double log_mag = std::lgamma(k * alpha + 1.0) - std::lgamma(k + 1.0) -
                           (k * alpha + 1.0) * log_x;
    const double mag = std::exp(log_mag);
    const double term = ((k % 2 == 1) ? 1.0 : -1.0) * s * mag / kPi;
    sum += term;
    abs_sum += std::abs(term);
    if (mag > prev && mag > 1e-300) return false;
    prev = mag;
    if (mag < 1e-17 * std::abs(sum) && k >= 2) {
      if (abs_sum > 1e4 * std::abs(sum)) return false;
      value = sum;
      terms = k;
      return true;
    }
  }
  return false;
}

// Upper bound of int_U^inf exp(-t u^alpha) du with t U^alpha = kCutoffExponent,
// via Gamma(s,x) <= x^(s-1) e^-x max(1, x/(x-s+1)), s = 1/alpha.
double fourier_remainder_bound(double alpha, double t) {
  const double s = 1.0 / alpha;
  const double x = kCutoffExponent;
  const double factor = std::max(1.0, x / (x - s + 1.0));
  return std::pow(t, -s) / alpha * std::pow(x, s - 1.0) * std::exp(-x) * factor;
}

}  // namespace

void validate_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 2.0)) {
    throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0,2), got " + std::to_string(alpha));
  }
}

AlphaParam::AlphaParam(double alpha, int dim) : alpha_(alpha), dim_(dim) {
  validate_alpha(alpha);
  if (dim < 1) throw Error(ErrorCode::InvalidArgument, "dimension must be >= 1");
}

double cd_alpha(double alpha, int dim) { return cd_alpha(AlphaParam(alpha, dim)); }

double cd_alpha(const AlphaParam& params) {
  const double a = params.alpha();
  const double d = params.dim();
  return a * std::pow(2.0, a - 1.0) * std::tgamma((d + a) / 2.0) /
         (std::pow(kPi, d / 2.0) * std::tgamma(1.0 - a / 2.0));
}

DensityEvaluation density_1d_detailed(double alpha, double t, double z, bool allow_series) {
  validate_alpha(alpha);
  if (!(t > 0.0) || !std::isfinite(t)) {
    throw Error(ErrorCode::InvalidArgument, "t must be positive: " + fmt_args(alpha, t, z));
  }
  if (!std::isfinite(z)) throw Error(ErrorCode::InvalidArgument, "z must be finite");
  z = std::abs(z);
  const double scale = std::pow(t, -1.0 / alpha);  // typical frequency, 1/length
  DensityEvaluation out;

  const double x = z * scale;
  // Below alpha = 1 the series converges everywhere; the guard in
  // try_series decides where it is accurate.
  if (allow_series && (x >= kSeriesMinX || (alpha < 1.0 && x > 0.0))) {
    double value = 0.0;
    int terms = 0;
    if (try_series(alpha, x, value, terms)) {
      out.value = value * scale;
      out.abs_error = 1e-16 * std::abs(out.value);
      out.pieces = terms;
      out.route = DensityEvaluation::Route::Series;
      return out;
    }
  }

  const double cutoff = std::pow(kCutoffExponent / t, 1.0 / alpha);
  out.remainder_bound = fourier_remainder_bound(alpha, t) / kPi;
  auto integrand = [&](double u) { return std::exp(-t * std::pow(u, alpha)) * std::cos(u * z); };

  quad::Result total;
  total.converged = true;
  if (z * cutoff <= kOscillationThreshold) {
    out.route = DensityEvaluation::Route::Direct;
    std::vector<double> breaks{0.0};
    for (double b = 0.25 / scale; b < cutoff; b *= 2.0) breaks.push_back(b);
    breaks.push_back(cutoff);
    quad::Options opt{1e-15 * scale, 1e-14, 4000};
    total = quad::integrate_piecewise(integrand, breaks, opt);
    out.pieces = static_cast<int>(breaks.size() - 1);
  } else {
    // Half-period pieces between consecutive zeros of cos(u z), summed with
    // Wynn acceleration; stops once the accelerated sum settles or at the cutoff.
    out.route = DensityEvaluation::Route::Oscillatory;
    const double half_period = kPi / z;
    quad::Options opt{1e-17 * scale, 1e-15, 400};
    quad::WynnEpsilon wynn;
    double partial = 0.0;
    double a = 0.0;
    double b = 0.5 * half_period;
    int settled = 0;
    bool accelerated = false;
    while (a < cutoff) {
      auto piece = quad::integrate(integrand, a, std::min(b, cutoff), opt);
      total += piece;
      partial += piece.value;
      wynn.push(partial);
      ++out.pieces;
      if (wynn.size() >= 12) {
        const double tol = 1e-15 * std::abs(wynn.estimate()) + 1e-17 * scale;
        settled = (wynn.last_change() < tol) ? settled + 1 : 0;
        if (settled >= 3) {
          accelerated = true;
          break;
        }
      }
      a = b;
      b += half_period;
    }
    if (accelerated) {
      total.value = wynn.estimate();
      total.abs_error += 10.0 * wynn.last_change();
    } else {
      total.value = partial;
    }
  }
  out.value = total.value / kPi;
  out.abs_error = total.abs_error / kPi + out.remainder_bound;
  const double allowed = std::max(1e-11 * std::abs(out.value), 1e-13 * scale);
  if (!(out.abs_error <= allowed)) {
    throw Error(ErrorCode::QuadratureNonConvergence,
                "error estimate " + std::to_string(out.abs_error) + " for " + fmt_args(alpha, t, z) +
                    "; rescale via self-similarity");
  }
  out.value = std::max(out.value, 0.0);
  return out;
}

double density_1d(double alpha, double t, double z) {
  return density_1d_detailed(alpha, t, z, true).value;
}

// ---- table ------------------------------------------------------------------


StableDensityTable::StableDensityTable(double alpha) : alpha_(alpha) {
  validate_alpha(alpha);
  // Smallest x where the series reaches full precision.
  series_start_ = 0.0;
  int terms = 0;
  for (double x = 2.0; x <= 80.0; x += 1.0) {
    double v = 0.0;
    if (try_series(alpha, x, v, terms)) {
      series_start_ = x;
      break;
    }
  }
  if (series_start_ == 0.0) {
    throw Error(ErrorCode::QuadratureNonConvergence, "no series range for alpha=" + std::to_string(alpha));
  }
  series_coeffs_.resize(terms);
  for (int k = 1; k <= static_cast<int>(series_coeffs_.size()); ++k) {
    series_coeffs_[k - 1] = ((k % 2 == 1) ? 1.0 : -1.0) * std::sin(k * kPi * alpha / 2.0) *
                            std::exp(std::lgamma(k * alpha + 1.0) - std::lgamma(k + 1.0)) / kPi;
  }

  // Chebyshev panels on [0, series_start], bisected until the fit reproduces
  // the quadrature at off-node check points. For alpha < 1 the Taylor series
  // at 0 diverges, so panels near the origin end up much narrower.
  auto fit = [&](double lo, double hi, std::vector<double>& coeffs) {
    std::array<double, kDegree + 1> values{};
    for (int j = 0; j <= kDegree; ++j) {
      const double node = std::cos(kPi * (j + 0.5) / (kDegree + 1));
      values[j] = density_1d_detailed(alpha, 1.0, lo + 0.5 * (hi - lo) * (node + 1.0), false).value;
    }
    coeffs.assign(kDegree + 1, 0.0);
    for (int k = 0; k <= kDegree; ++k) {
      double c = 0.0;
      for (int j = 0; j <= kDegree; ++j) c += values[j] * std::cos(kPi * k * (j + 0.5) / (kDegree + 1));
      coeffs[k] = c * 2.0 / (kDegree + 1);
    }
  };
  std::vector<std::pair<double, double>> pending;
  for (double lo = series_start_; lo > 0.0; lo -= 0.125) pending.emplace_back(std::max(0.0, lo - 0.125), lo);
  std::vector<std::pair<double, std::vector<double>>> done;
  std::vector<double> coeffs;
  while (!pending.empty()) {
    const auto [lo, hi] = pending.back();
    pending.pop_back();
    fit(lo, hi, coeffs);
    double worst = 0.0;
    for (double s : {-0.97, -0.61, -0.13, 0.29, 0.77, 0.995}) {
      const double x = lo + 0.5 * (hi - lo) * (s + 1.0);
      const double exact = density_1d_detailed(alpha, 1.0, x, false).value;
      worst = std::max(worst, std::abs(clenshaw(coeffs.data(), s) - exact) / exact);
    }
    if (worst > 1e-11 && hi - lo > 1e-4) {
      const double mid = 0.5 * (lo + hi);
      pending.emplace_back(mid, hi);
      pending.emplace_back(lo, mid);
    } else {
      done.emplace_back(lo, coeffs);
    }
  }
  for (const auto& [lo, c] : done) {
    breaks_.push_back(lo);
    cheb_.insert(cheb_.end(), c.begin(), c.end());
  }
  breaks_.push_back(series_start_);
}

double StableDensityTable::clenshaw(const double* c, double s) noexcept {
  double b1 = 0.0, b2 = 0.0;
  for (int k = kDegree; k >= 1; --k) {
    const double b0 = 2.0 * s * b1 - b2 + c[k];
    b2 = b1;
    b1 = b0;
  }
  return s * b1 - b2 + 0.5 * c[0];
}

double StableDensityTable::series_value(double x) const noexcept {
  const double y = std::pow(x, -alpha_);
  double acc = 0.0;
  for (auto it = series_coeffs_.rbegin(); it != series_coeffs_.rend(); ++it) acc = acc * y + *it;
  return acc * y / x;
}

double StableDensityTable::standard(double x) const noexcept {
  x = std::abs(x);
  if (x >= series_start_) return series_value(x);
  const auto it = std::upper_bound(breaks_.begin(), breaks_.end(), x);
  const auto p = static_cast<std::size_t>(it - breaks_.begin()) - 1;
  const double lo = breaks_[p], hi = breaks_[p + 1];
  const double s = 2.0 * (x - lo) / (hi - lo) - 1.0;
  return std::max(0.0, clenshaw(cheb_.data() + p * (kDegree + 1), s));
}

double StableDensityTable::operator()(double t, double z) const noexcept {
  const double scale = std::pow(t, -1.0 / alpha_);
  return scale * standard(z * scale);
}

std::shared_ptr<const StableDensityTable> StableDensityTable::shared(double alpha) {
  static std::mutex mutex;
  static std::map<double, std::shared_ptr<const StableDensityTable>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[alpha];
  if (!slot) slot = std::make_shared<const StableDensityTable>(alpha);
  return slot;
}

// ---- kernels ----------------------------------------------------------------

namespace {
void check_points(const AlphaParam& params, double t, std::span<const double> x,
                  std::span<const double> y) {
  if (static_cast<int>(x.size()) != params.dim() || static_cast<int>(y.size()) != params.dim()) {
    throw Error(ErrorCode::InvalidArgument, "point dimension does not match AlphaParam");
  }
  if (!(t > 0.0)) throw Error(ErrorCode::InvalidArgument, "t must be positive");
}
}  // namespace

double product_kernel(const AlphaParam& params, double t, std::span<const double> x,
                      std::span<const double> y) {
  check_points(params, t, x, y);
  double value = 1.0;
  for (std::size_t k = 0; k < x.size(); ++k) value *= density_1d(params.alpha(), t, std::abs(x[k] - y[k]));
  return value;
}

double product_kernel_fast(const AlphaParam& params, double t, std::span<const double> x,
                           std::span<const double> y) {
  const auto table = StableDensityTable::shared(params.alpha());
  double value = 1.0;
  for (std::size_t k = 0; k < x.size(); ++k) value *= (*table)(t, std::abs(x[k] - y[k]));
  return value;
}

double envelope_constant_1d(double alpha) {
  static std::mutex mutex;
  static std::map<double, double> cache;
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(alpha); it != cache.end()) return it->second;
  }
  const auto table = StableDensityTable::shared(alpha);
  double hi = 0.0;
  double lo = std::numeric_limits<double>::infinity();
  constexpr int kPoints = 2001;
  for (int i = 0; i < kPoints; ++i) {
    const double u = std::pow(10.0, -3.0 + 6.0 * i / (kPoints - 1));
    const double ratio = table->standard(u) / std::min(1.0, std::pow(u, -1.0 - alpha));
    hi = std::max(hi, ratio);
    lo = std::min(lo, ratio);
  }
  const double c = 1.05 * std::max(hi, 1.0 / lo);
  std::lock_guard lock(mutex);
  cache[alpha] = c;
  return c;
}

double envelope_constant(const AlphaParam& params) {
  return std::pow(envelope_constant_1d(params.alpha()), params.dim());
}

Envelope bound_envelope(const AlphaParam& params, double t, std::span<const double> x,
                        std::span<const double> y) {
  check_points(params, t, x, y);
  const double a = params.alpha();
  const double diag = std::pow(t, -1.0 / a);
  double product = 1.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double gap = std::abs(x[k] - y[k]);
    product *= (gap == 0.0) ? diag : std::min(diag, t / std::pow(gap, 1.0 + a));
  }
  const double c = envelope_constant(params);
  return {product / c, product * c};
}

KernelValue kernel_value(const AlphaParam& params, double t, std::span<const double> x,
                         std::span<const double> y) {
  const auto env = bound_envelope(params, t, x, y);
  return {product_kernel(params, t, x, y), env.low, env.high};
}

double levy_density_axis(double alpha, double a, double b) {
  validate_alpha(alpha);
  if (a == b) throw Error(ErrorCode::SingularArguments, "jump density is singular at a == b");
  return cd_alpha(alpha, 1) / std::pow(std::abs(a - b), 1.0 + alpha);
}

}  // namespace cylstable
