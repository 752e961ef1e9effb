#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <vector>

namespace cylstable::quad {

struct Options {
  double abs_tol = 1e-14;
  double rel_tol = 1e-12;
  int max_intervals = 4000;
};

struct Result {
  double value = 0.0;
  double abs_error = 0.0;
  int evaluations = 0;
  bool converged = false;

  Result& operator+=(const Result& other) {
    value += other.value;
    abs_error += other.abs_error;
    evaluations += other.evaluations;
    converged = converged && other.converged;
    return *this;
  }
};

namespace detail {

// 15-point Kronrod extension of the 7-point Gauss-Legendre rule on [-1,1].
inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
// Gauss weights for the nodes kKronrodNodes[1], [3], [5], [7].
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double a, b, value, error;
  bool operator<(const Panel& other) const { return error < other.error; }
};

template <class F>
Panel gauss_kronrod_15(F& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double f_center = f(center);
  double kronrod = f_center * kKronrodWeights[7];
  double gauss = f_center * kGaussWeights[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kKronrodNodes[j];
    const double pair = f(center - dx) + f(center + dx);
    kronrod += kKronrodWeights[j] * pair;
    if (j % 2 == 1) gauss += kGaussWeights[j / 2] * pair;
  }
  return {a, b, kronrod * half, std::abs((kronrod - gauss) * half)};
}

}  // namespace detail

// Globally adaptive Gauss-Kronrod (G7/K15) quadrature on [a,b]: the panel
// with the largest error estimate is bisected until the summed error meets
// max(abs_tol, rel_tol*|value|). Endpoint singularities of integrable type
// are handled by repeated bisection; the integrand is never evaluated at a or b.
template <class F>
Result integrate(F&& f, double a, double b, const Options& opt = {}) {
  Result out;
  if (a == b) {
    out.converged = true;
    return out;
  }
  std::priority_queue<detail::Panel> panels;
  auto first = detail::gauss_kronrod_15(f, a, b);
  panels.push(first);
  double value = first.value;
  double error = first.error;
  int evaluations = 15;
  while (static_cast<int>(panels.size()) < opt.max_intervals) {
    if (error <= std::max(opt.abs_tol, opt.rel_tol * std::abs(value))) break;
    const auto worst = panels.top();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) break;  // interval exhausted
    panels.pop();
    const auto left = detail::gauss_kronrod_15(f, worst.a, mid);
    const auto right = detail::gauss_kronrod_15(f, mid, worst.b);
    evaluations += 30;
    value += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    panels.push(left);
    panels.push(right);
  }
  // Re-sum to remove drift accumulated by the incremental updates.
  double sum = 0.0, err = 0.0;
  while (!panels.empty()) {
    sum += panels.top().value;
    err += panels.top().error;
    panels.pop();
  }
  out.value = sum;
  out.abs_error = err;
  out.evaluations = evaluations;
  out.converged = err <= std::max(opt.abs_tol, opt.rel_tol * std::abs(sum));
  return out;
}

// Integrates over consecutive breakpoints and sums the pieces.
template <class F>
Result integrate_piecewise(F&& f, const std::vector<double>& breakpoints, const Options& opt = {}) {
  Result total;
  total.converged = true;
  for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
    total += integrate(f, breakpoints[i], breakpoints[i + 1], opt);
  }
  return total;
}

// Wynn's epsilon algorithm applied to a stream of partial sums. Used to
// accelerate alternating sums of half-period integrals.
class WynnEpsilon {
 public:
  void push(double partial_sum);
  double estimate() const { return estimate_; }
  double last_change() const { return change_; }
  std::size_t size() const { return count_; }

 private:
  std::vector<double> row_;
  std::size_t count_ = 0;
  double estimate_ = 0.0;
  double change_ = std::numeric_limits<double>::infinity();
};

inline void WynnEpsilon::push(double partial_sum) {
  // row_ holds the last anti-diagonal e_0^{(n-1)}, e_1^{(n-2)}, ...
  std::vector<double> next;
  next.reserve(row_.size() + 1);
  next.push_back(partial_sum);
  double prev_lower = 0.0;  // e_{k-1} on the previous anti-diagonal
  for (std::size_t k = 0; k < row_.size(); ++k) {
    const double diff = next[k] - row_[k];
    const double upper = (k == 0 ? 0.0 : prev_lower);
    if (diff == 0.0 || !std::isfinite(1.0 / diff)) break;
    prev_lower = row_[k];
    next.push_back(upper + 1.0 / diff);
  }
  row_ = std::move(next);
  ++count_;
  // Even columns carry the accelerated estimates; take the highest.
  const std::size_t top = (row_.size() - 1) & ~std::size_t{1};
  const double estimate = row_[top];
  change_ = std::abs(estimate - estimate_);
  estimate_ = estimate;
  if (row_.size() > 24) row_.resize(24 | 1);
}

}  // namespace cylstable::quad
