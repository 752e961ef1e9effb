#include "cylstable/heatkernel.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "cylstable/error.hpp"

namespace cylstable {

namespace {

// Uniform random bit generator over a RandomStream, for <random> distributions.
class StreamEngine {
 public:
  using result_type = std::uint64_t;
  explicit StreamEngine(RandomStream stream) : stream_(stream) {}
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() {
    if (!spare_) {
      words_ = stream_.block(position_++);
      spare_ = true;
      return (std::uint64_t{words_[0]} << 32) | words_[1];
    }
    spare_ = false;
    return (std::uint64_t{words_[2]} << 32) | words_[3];
  }

 private:
  RandomStream stream_;
  std::uint64_t position_ = 0;
  Philox4x32::Counter words_{};
  bool spare_ = false;
};

std::int64_t binomial(StreamEngine& eng, std::int64_t trials, double p) {
  if (trials <= 0 || p <= 0.0) return 0;
  if (p >= 1.0) return trials;
  std::binomial_distribution<std::int64_t> dist(trials, p);
  return dist(eng);
}

// Counts of the first m categories of a Multinomial(n; 1/n, ..., 1/n) draw:
// the counts of a bootstrap resample restricted to the paths that matter.
void sparse_multinomial(StreamEngine& eng, std::int64_t n, std::size_t m, std::vector<std::int64_t>& counts) {
  counts.assign(m, 0);
  std::int64_t remaining = n;
  for (std::size_t q = 0; q < m && remaining > 0; ++q) {
    counts[q] = binomial(eng, remaining, 1.0 / static_cast<double>(n - static_cast<std::int64_t>(q)));
    remaining -= counts[q];
  }
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

// Bootstrap standard error of (1/n) sum_i v_i where only the listed values
// are nonzero.
double bootstrap_sparse_mean_se(const std::vector<double>& values, std::int64_t n, std::uint64_t seed,
                                std::uint32_t lane) {
  if (values.empty()) return 0.0;
  std::vector<double> means(kBootstrapResamples);
#pragma omp parallel for schedule(static)
  for (int r = 0; r < kBootstrapResamples; ++r) {
    StreamEngine eng(RandomStream(seed, static_cast<std::uint64_t>(r), lane, StreamPurpose::Bootstrap));
    std::vector<std::int64_t> counts;
    sparse_multinomial(eng, n, values.size(), counts);
    double sum = 0.0;
    for (std::size_t q = 0; q < values.size(); ++q) sum += static_cast<double>(counts[q]) * values[q];
    means[r] = sum / static_cast<double>(n);
  }
  return sample_sd(means);
}

double epanechnikov_between(std::span<const double> a, std::span<const double> b, double eps) noexcept {
  double k = 1.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double u = (a[j] - b[j]) / eps;
    if (u <= -1.0 || u >= 1.0) return 0.0;
    k *= 0.75 * (1.0 - u * u) / eps;
  }
  return k;
}

void check_observation(const Ensemble& ens, std::size_t obs) {
  if (obs >= ens.observe_times.size()) throw Error(ErrorCode::InvalidArgument, "observation index out of range");
}

void check_target(const Ensemble& ens, std::span<const double> y) {
  if (static_cast<int>(y.size()) != ens.dim) throw Error(ErrorCode::InvalidArgument, "target dimension mismatch");
}

void check_bandwidth(double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw Error(ErrorCode::InvalidArgument, "bandwidth must be positive");
}

// Surviving states at one observation, with a lexicographically sorted cell
// index for neighbour queries.
class CellHash {
 public:
  CellHash(const Ensemble& ens, std::size_t obs, double cell) : dim_(ens.dim), cell_(cell) {
    for (std::int64_t i = 0; i < ens.n_paths; ++i) {
      if (!ens.alive_at(i, obs)) continue;
      const auto s = ens.state_at(i, obs);
      paths_.push_back(i);
      points_.insert(points_.end(), s.begin(), s.end());
      for (double v : s) keys_.push_back(static_cast<std::int64_t>(std::floor(v / cell_)));
    }
    order_.resize(paths_.size());
    for (std::size_t q = 0; q < order_.size(); ++q) order_[q] = q;
    std::sort(order_.begin(), order_.end(), [this](std::size_t a, std::size_t b) {
      return std::lexicographical_compare(key(a).begin(), key(a).end(), key(b).begin(), key(b).end());
    });
  }

  std::size_t size() const { return paths_.size(); }
  std::span<const double> point(std::size_t q) const { return {points_.data() + q * dim_, static_cast<std::size_t>(dim_)}; }

  // Calls f(q) for every stored point in the 3^d cells around x.
  template <class F>
  void for_each_near(std::span<const double> x, F&& f) const {
    std::vector<std::int64_t> base(dim_), probe(dim_);
    for (int k = 0; k < dim_; ++k) base[k] = static_cast<std::int64_t>(std::floor(x[k] / cell_));
    const int total = static_cast<int>(std::pow(3, dim_));
    for (int code = 0; code < total; ++code) {
      int c = code;
      for (int k = 0; k < dim_; ++k) {
        probe[k] = base[k] + (c % 3) - 1;
        c /= 3;
      }
      auto less_key = [this](std::size_t q, const std::vector<std::int64_t>& p) {
        return std::lexicographical_compare(key(q).begin(), key(q).end(), p.begin(), p.end());
      };
      auto key_less = [this](const std::vector<std::int64_t>& p, std::size_t q) {
        return std::lexicographical_compare(p.begin(), p.end(), key(q).begin(), key(q).end());
      };
      auto lo = std::lower_bound(order_.begin(), order_.end(), probe, less_key);
      auto hi = std::upper_bound(lo, order_.end(), probe, key_less);
      for (auto it = lo; it != hi; ++it) f(*it);
    }
  }

 private:
  std::span<const std::int64_t> key(std::size_t q) const {
    return {keys_.data() + q * dim_, static_cast<std::size_t>(dim_)};
  }

  int dim_;
  double cell_;
  std::vector<std::int64_t> paths_;
  std::vector<double> points_;
  std::vector<std::int64_t> keys_;
  std::vector<std::size_t> order_;
};

struct NearSums {
  std::vector<double> main, half, twice;
  std::vector<std::int64_t> matches;
};

// For every point of `from`, kernel sums against all points of `to` at
// bandwidth eps and, with `sensitivity`, at eps/2 and 2 eps.
NearSums kernel_sums(const CellHash& from, const CellHash& to, double eps, bool sensitivity) {
  NearSums s;
  const auto n = static_cast<std::int64_t>(from.size());
  s.main.assign(n, 0.0);
  s.half.assign(n, 0.0);
  s.twice.assign(n, 0.0);
  s.matches.assign(n, 0);
#pragma omp parallel for schedule(dynamic, 64)
  for (std::int64_t a = 0; a < n; ++a) {
    const auto x = from.point(a);
    double m = 0.0, h = 0.0, t = 0.0;
    std::int64_t c = 0;
    to.for_each_near(x, [&](std::size_t b) {
      const auto y = to.point(b);
      const double k = epanechnikov_between(x, y, eps);
      if (k > 0.0) {
        m += k;
        ++c;
      }
      if (sensitivity) {
        h += epanechnikov_between(x, y, 0.5 * eps);
        t += epanechnikov_between(x, y, 2.0 * eps);
      }
    });
    s.main[a] = m;
    s.half[a] = h;
    s.twice[a] = t;
    s.matches[a] = c;
  }
  return s;
}

constexpr std::int64_t kExactBootstrapMatches = 1'000'000;

KernelEstimate base_estimate(const Ensemble& ens, double t, std::span<const double> y, KernelMethod method) {
  KernelEstimate e;
  e.t = t;
  e.x = ens.start;
  e.y.assign(y.begin(), y.end());
  e.method = method;
  e.dt = ens.dt;
  e.n_paths = ens.n_paths;
  return e;
}

SimConfig horizon_config(const SimConfig& cfg, double t_end) {
  SimConfig c = cfg;
  c.t_end = t_end;
  return c;
}

nlohmann::json point_json(const Point& p) { return nlohmann::json(p); }

}  // namespace

std::string_view to_string(KernelMethod m) noexcept {
  switch (m) {
    case KernelMethod::SurvivorKde:
      return "survivor_kde";
    case KernelMethod::Bridge:
      return "bridge";
    case KernelMethod::Subtraction:
      return "subtraction";
  }
  return "unknown";
}

KernelMethod parse_kernel_method(std::string_view name) {
  if (name == "kde" || name == "survivor_kde") return KernelMethod::SurvivorKde;
  if (name == "bridge") return KernelMethod::Bridge;
  if (name == "sub" || name == "subtraction") return KernelMethod::Subtraction;
  throw Error(ErrorCode::InvalidArgument, "unknown kernel method '" + std::string(name) + "'");
}

nlohmann::json KernelEstimate::to_json() const {
  nlohmann::json j = {{"t", t},
                      {"x", point_json(x)},
                      {"y", point_json(y)},
                      {"value", value},
                      {"stderr", std_error},
                      {"method", std::string(to_string(method))},
                      {"bandwidth", bandwidth},
                      {"dt", dt},
                      {"n_paths", n_paths},
                      {"hits", hits},
                      {"flagged", flagged}};
  if (value_half_bandwidth) j["value_half_bandwidth"] = *value_half_bandwidth;
  if (value_double_bandwidth) j["value_double_bandwidth"] = *value_double_bandwidth;
  return j;
}

double default_bandwidth(double alpha, double t, std::int64_t n, int dim) {
  return 0.8 * std::pow(t, 1.0 / alpha) * std::pow(static_cast<double>(n), -1.0 / (dim + 4.0));
}

double epanechnikov(std::span<const double> u, double eps) noexcept {
  double k = 1.0;
  for (double v : u) {
    const double s = v / eps;
    if (s <= -1.0 || s >= 1.0) return 0.0;
    k *= 0.75 * (1.0 - s * s) / eps;
  }
  return k;
}

KernelEstimate kde_from_ensemble(const Ensemble& ens, std::size_t obs, std::span<const double> y, double bandwidth,
                                 std::uint64_t seed) {
  check_observation(ens, obs);
  check_target(ens, y);
  check_bandwidth(bandwidth);
  if (ens.survivors_at(obs) == 0) {
    throw Error(ErrorCode::ZeroSurvivors, "no path survives to t=" + std::to_string(ens.observe_times[obs]));
  }
  std::vector<double> contrib;
  double sum = 0.0, half = 0.0, twice = 0.0;
  for (std::int64_t i = 0; i < ens.n_paths; ++i) {
    if (!ens.alive_at(i, obs)) continue;
    const auto s = ens.state_at(i, obs);
    const double k = epanechnikov_between(s, y, bandwidth);
    if (k > 0.0) {
      contrib.push_back(k);
      sum += k;
    }
    half += epanechnikov_between(s, y, 0.5 * bandwidth);
    twice += epanechnikov_between(s, y, 2.0 * bandwidth);
  }
  const double n = static_cast<double>(ens.n_paths);
  KernelEstimate e = base_estimate(ens, ens.observe_times[obs], y, KernelMethod::SurvivorKde);
  e.value = sum / n;
  e.std_error = bootstrap_sparse_mean_se(contrib, ens.n_paths, seed, 0);
  e.bandwidth = bandwidth;
  e.hits = static_cast<std::int64_t>(contrib.size());
  e.value_half_bandwidth = half / n;
  e.value_double_bandwidth = twice / n;
  return e;
}

KernelEstimate bridge_from_ensembles(const Ensemble& from_x, const Ensemble& from_y, std::size_t obs,
                                     double bandwidth, std::uint64_t seed, bool sensitivity) {
  check_observation(from_x, obs);
  check_observation(from_y, obs);
  check_bandwidth(bandwidth);
  if (from_x.dim != from_y.dim || from_x.dt != from_y.dt ||
      from_x.observe_times[obs] != from_y.observe_times[obs]) {
    throw Error(ErrorCode::InvalidArgument, "bridge ensembles are not compatible");
  }
  if (from_x.survivors_at(obs) == 0 || from_y.survivors_at(obs) == 0) {
    throw Error(ErrorCode::ZeroSurvivors,
                "no path survives to t/2=" + std::to_string(from_x.observe_times[obs]) + " from one end");
  }
  const double cell = sensitivity ? 2.0 * bandwidth : bandwidth;
  const CellHash hx(from_x, obs, cell);
  const CellHash hy(from_y, obs, cell);
  const NearSums sx = kernel_sums(hx, hy, bandwidth, sensitivity);
  const NearSums sy = kernel_sums(hy, hx, bandwidth, false);

  const double nn = static_cast<double>(from_x.n_paths) * static_cast<double>(from_y.n_paths);
  double total = 0.0, half = 0.0, twice = 0.0;
  std::int64_t matches = 0;
  for (std::size_t a = 0; a < hx.size(); ++a) {
    total += sx.main[a];
    half += sx.half[a];
    twice += sx.twice[a];
    matches += sx.matches[a];
  }
  KernelEstimate e = base_estimate(from_x, 2.0 * from_x.observe_times[obs], from_y.start, KernelMethod::Bridge);
  e.value = total / nn;
  e.bandwidth = bandwidth;
  e.hits = matches;
  if (sensitivity) {
    e.value_half_bandwidth = half / nn;
    e.value_double_bandwidth = twice / nn;
  }

  // Compact indices of the contributing points on each side.
  std::vector<std::size_t> xs, ys;
  std::vector<std::int64_t> x_slot(hx.size(), -1), y_slot(hy.size(), -1);
  for (std::size_t a = 0; a < hx.size(); ++a) {
    if (sx.main[a] > 0.0) {
      x_slot[a] = static_cast<std::int64_t>(xs.size());
      xs.push_back(a);
    }
  }
  for (std::size_t b = 0; b < hy.size(); ++b) {
    if (sy.main[b] > 0.0) {
      y_slot[b] = static_cast<std::int64_t>(ys.size());
      ys.push_back(b);
    }
  }
  if (xs.empty()) return e;

  // Small match sets get the exact two-sample bootstrap over the pair list;
  // large ones its linearization in the per-point sums.
  struct Match {
    std::int32_t a, b;
    double k;
  };
  std::vector<Match> pairs;
  const bool exact = matches <= kExactBootstrapMatches;
  if (exact) {
    pairs.reserve(matches);
    for (std::size_t a : xs) {
      const auto x = hx.point(a);
      hy.for_each_near(x, [&](std::size_t b) {
        const double k = epanechnikov_between(x, hy.point(b), bandwidth);
        if (k > 0.0) pairs.push_back({static_cast<std::int32_t>(x_slot[a]), static_cast<std::int32_t>(y_slot[b]), k});
      });
    }
  }
  std::vector<double> resampled(kBootstrapResamples);
#pragma omp parallel for schedule(static)
  for (int r = 0; r < kBootstrapResamples; ++r) {
    StreamEngine ex(RandomStream(seed, static_cast<std::uint64_t>(r), 1, StreamPurpose::Bootstrap));
    StreamEngine ey(RandomStream(seed, static_cast<std::uint64_t>(r), 2, StreamPurpose::Bootstrap));
    std::vector<std::int64_t> nx, ny;
    sparse_multinomial(ex, from_x.n_paths, xs.size(), nx);
    sparse_multinomial(ey, from_y.n_paths, ys.size(), ny);
    double u = 0.0;
    if (exact) {
      for (const Match& m : pairs) u += static_cast<double>(nx[m.a] * ny[m.b]) * m.k;
      u /= nn;
    } else {
      for (std::size_t q = 0; q < xs.size(); ++q) u += static_cast<double>(nx[q]) * sx.main[xs[q]];
      for (std::size_t q = 0; q < ys.size(); ++q) u += static_cast<double>(ny[q]) * sy.main[ys[q]];
      u = u / nn - e.value;
    }
    resampled[r] = u;
  }
  e.std_error = sample_sd(resampled);
  return e;
}

KernelEstimate subtraction_from_ensemble(const AlphaParam& params, const Ensemble& ens, double t,
                                         std::span<const double> y, std::uint64_t seed) {
  check_target(ens, y);
  if (!(t > 0.0) || t > ens.horizon * (1.0 + 1e-12)) {
    throw Error(ErrorCode::InvalidArgument, "t must lie in (0, horizon]");
  }
  const auto steps = static_cast<std::int64_t>(std::llround(t / ens.dt));
  std::vector<double> contrib;
  double sum = 0.0;
  for (std::int64_t i = 0; i < ens.n_paths; ++i) {
    if (!ens.killed(i) || ens.kill_step[i] >= steps) continue;
    const double remaining = static_cast<double>(steps - ens.kill_step[i]) * ens.dt;
    const double r = product_kernel_fast(params, remaining, ens.exit_point(i), y);
    if (r > 0.0) {
      contrib.push_back(r);
      sum += r;
    }
  }
  KernelEstimate e = base_estimate(ens, t, y, KernelMethod::Subtraction);
  e.value = product_kernel(params, t, ens.start, y) - sum / static_cast<double>(ens.n_paths);
  e.std_error = bootstrap_sparse_mean_se(contrib, ens.n_paths, seed, 0);
  e.hits = static_cast<std::int64_t>(contrib.size());
  e.flagged = e.value < 0.0;
  return e;
}

KernelEstimate estimate_pd_survivor_kde(const Domain& domain, const AlphaParam& params, double t,
                                        std::span<const double> x, std::span<const double> y,
                                        const SimConfig& cfg, std::optional<double> bandwidth) {
  if (!domain.contains(y)) throw Error(ErrorCode::PointOutsideDomain, "target point is not in the domain");
  const Ensemble ens = simulate_ensemble(params, x, horizon_config(cfg, t), &domain, {t});
  const double eps = bandwidth.value_or(default_bandwidth(params.alpha(), t, cfg.n_paths, params.dim()));
  return kde_from_ensemble(ens, 0, y, eps, cfg.seed);
}

KernelEstimate estimate_pd_bridge(const Domain& domain, const AlphaParam& params, double t,
                                  std::span<const double> x, std::span<const double> y, const SimConfig& cfg,
                                  std::optional<double> bandwidth, bool sensitivity) {
  const double s = 0.5 * t;
  SimConfig c = horizon_config(cfg, s);
  const Ensemble ex = simulate_ensemble(params, x, c, &domain, {s});
  c.seed = derive_seed(cfg.seed, 1);
  const Ensemble ey = simulate_ensemble(params, y, c, &domain, {s});
  const double eps = bandwidth.value_or(default_bandwidth(params.alpha(), s, cfg.n_paths, params.dim()));
  return bridge_from_ensembles(ex, ey, 0, eps, cfg.seed, sensitivity);
}

KernelEstimate estimate_pd_subtraction(const Domain& domain, const AlphaParam& params, double t,
                                       std::span<const double> x, std::span<const double> y,
                                       const SimConfig& cfg) {
  if (!domain.contains(y)) throw Error(ErrorCode::PointOutsideDomain, "target point is not in the domain");
  const Ensemble ens = simulate_ensemble(params, x, horizon_config(cfg, t), &domain, {});
  return subtraction_from_ensemble(params, ens, t, y, cfg.seed);
}

// ---- principal eigenvalue ------------------------------------------------------

namespace {

// Weighted least squares for y = lambda t + c_a with one intercept per start.
double common_slope(const std::vector<double>& t, const std::vector<std::vector<double>>& survival,
                    const std::vector<std::int64_t>& n_paths) {
  double num = 0.0, den = 0.0;
  for (std::size_t a = 0; a < survival.size(); ++a) {
    std::vector<double> w(t.size()), y(t.size());
    double sw = 0.0, swt = 0.0, swy = 0.0;
    for (std::size_t m = 0; m < t.size(); ++m) {
      const double s = survival[a][m];
      y[m] = -std::log(s);
      w[m] = static_cast<double>(n_paths[a]) * s / std::max(1.0 - s, 1e-12);
      sw += w[m];
      swt += w[m] * t[m];
      swy += w[m] * y[m];
    }
    const double tbar = swt / sw, ybar = swy / sw;
    for (std::size_t m = 0; m < t.size(); ++m) {
      num += w[m] * (t[m] - tbar) * (y[m] - ybar);
      den += w[m] * (t[m] - tbar) * (t[m] - tbar);
    }
  }
  return num / den;
}

// Number of grid times each path survives: bin b holds paths alive at the
// first b grid times only.
std::vector<std::int64_t> survival_bins(const Ensemble& e, const std::vector<std::int64_t>& steps) {
  std::vector<std::int64_t> bins(steps.size() + 1, 0);
  for (std::int64_t i = 0; i < e.n_paths; ++i) {
    const std::int64_t k = e.kill_step[i];
    std::size_t b = 0;
    while (b < steps.size() && (k < 0 || k > steps[b])) ++b;
    ++bins[b];
  }
  return bins;
}

std::vector<double> survival_from_bins(const std::vector<std::int64_t>& bins, std::int64_t n) {
  std::vector<double> s(bins.size() - 1);
  std::int64_t alive = n;
  for (std::size_t m = 0; m < s.size(); ++m) {
    alive -= bins[m];
    s[m] = static_cast<double>(alive) / static_cast<double>(n);
  }
  return s;
}

constexpr double kWindowStartSurvival = 0.1;

std::vector<double> automatic_grid(const Domain& domain, const AlphaParam& params, const Point& x,
                                   const SimConfig& cfg) {
  SimConfig c = cfg;
  c.n_paths = std::min<std::int64_t>(cfg.n_paths, 20000);
  for (;;) {
    const Ensemble e = simulate_ensemble(params, x, c, &domain, {});
    const std::int64_t total = c.steps_to(c.t_end);
    std::vector<std::int64_t> deaths(total + 1, 0);
    std::int64_t alive_end = 0;
    for (std::int64_t i = 0; i < e.n_paths; ++i) {
      if (e.killed(i)) {
        ++deaths[e.kill_step[i]];
      } else {
        ++alive_end;
      }
    }
    const double n = static_cast<double>(e.n_paths);
    if (static_cast<double>(alive_end) / n < 0.05) {
      // t0 sits at the low end of the survival band, where the higher modes
      // have died out; the window [t0, 3 t0] then runs into the tail.
      std::int64_t alive = e.n_paths, first = -1;
      for (std::int64_t s = 0; s <= total && first < 0; ++s) {
        alive -= deaths[s];
        if (static_cast<double>(alive) / n <= kWindowStartSurvival) first = s;
      }
      if (first < 4) {
        throw Error(ErrorCode::DecayNotResolved, "survival drops below 0.1 within a few steps; reduce dt");
      }
      std::vector<double> grid;
      for (int q = 0; q < 5; ++q) {
        const std::int64_t s = first + (2 * first) * q / 4;
        grid.push_back(static_cast<double>(s) * c.dt);
      }
      return grid;
    }
    if (2.0 * c.t_end > c.max_t_end * (1.0 + 1e-12)) {
      throw Error(ErrorCode::DecayNotResolved, "survival stays above 0.05 up to max_t_end");
    }
    c.t_end *= 2.0;
  }
}

}  // namespace

nlohmann::json Lambda1Estimate::to_json() const {
  nlohmann::json curves_json = nlohmann::json::array();
  for (std::size_t a = 0; a < curves.size(); ++a) {
    nlohmann::json c = nlohmann::json::array();
    for (const auto& p : curves[a]) c.push_back({{"t", p.t}, {"survival", p.survival}});
    curves_json.push_back({{"x", point_json(starts[a])}, {"curve", c}});
  }
  return {{"lambda1", lambda1}, {"stderr", std_error}, {"t_grid", t_grid}, {"curves", curves_json}};
}

Lambda1Estimate estimate_lambda1(const Domain& domain, const AlphaParam& params, const std::vector<Point>& x_list,
                                 std::vector<double> t_grid, const SimConfig& cfg) {
  if (x_list.empty()) throw Error(ErrorCode::InvalidArgument, "x_list is empty");
  cfg.validate();
  if (t_grid.empty()) t_grid = automatic_grid(domain, params, x_list.front(), cfg);
  std::sort(t_grid.begin(), t_grid.end());
  t_grid.erase(std::unique(t_grid.begin(), t_grid.end()), t_grid.end());
  if (t_grid.size() < 2) throw Error(ErrorCode::InvalidArgument, "t_grid needs at least two times");
  std::vector<std::int64_t> steps;
  for (double t : t_grid) steps.push_back(cfg.steps_to(t));

  Lambda1Estimate out;
  out.t_grid = t_grid;
  out.starts = x_list;
  std::vector<std::vector<std::int64_t>> bins;
  std::vector<std::vector<double>> survival;
  std::vector<std::int64_t> n_paths;
  for (std::size_t a = 0; a < x_list.size(); ++a) {
    SimConfig c = horizon_config(cfg, t_grid.back());
    c.seed = derive_seed(cfg.seed, a);
    const Ensemble e = simulate_ensemble(params, x_list[a], c, &domain, {});
    bins.push_back(survival_bins(e, steps));
    survival.push_back(survival_from_bins(bins.back(), e.n_paths));
    n_paths.push_back(e.n_paths);
    const auto& s = survival.back();
    const double n = static_cast<double>(e.n_paths);
    const double se_first = std::sqrt(s.front() * (1.0 - s.front()) / n);
    const double se_last = std::sqrt(s.back() * (1.0 - s.back()) / n);
    if (s.back() <= 2.0 * se_last || s.front() - s.back() <= 2.0 * std::hypot(se_first, se_last)) {
      throw Error(ErrorCode::DecayNotResolved, "survival decay over t_grid is within noise");
    }
    std::vector<SurvivalCurvePoint> curve;
    for (std::size_t m = 0; m < t_grid.size(); ++m) curve.push_back({t_grid[m], s[m]});
    out.curves.push_back(std::move(curve));
  }
  out.lambda1 = common_slope(t_grid, survival, n_paths);

  std::vector<double> boot(kBootstrapResamples, std::numeric_limits<double>::quiet_NaN());
#pragma omp parallel for schedule(static)
  for (int r = 0; r < kBootstrapResamples; ++r) {
    std::vector<std::vector<double>> s_star;
    bool ok = true;
    for (std::size_t a = 0; a < bins.size() && ok; ++a) {
      StreamEngine eng(RandomStream(cfg.seed, static_cast<std::uint64_t>(r), static_cast<std::uint32_t>(a),
                                    StreamPurpose::Bootstrap));
      std::vector<std::int64_t> b(bins[a].size());
      std::int64_t remaining = n_paths[a], pool = n_paths[a];
      for (std::size_t q = 0; q < b.size(); ++q) {
        b[q] = q + 1 == b.size() ? remaining
                                 : binomial(eng, remaining, static_cast<double>(bins[a][q]) / static_cast<double>(pool));
        remaining -= b[q];
        pool -= bins[a][q];
      }
      s_star.push_back(survival_from_bins(b, n_paths[a]));
      ok = s_star.back().back() > 0.0;
    }
    if (ok) boot[r] = common_slope(t_grid, s_star, n_paths);
  }
  boot.erase(std::remove_if(boot.begin(), boot.end(), [](double v) { return std::isnan(v); }), boot.end());
  out.std_error = sample_sd(boot);
  return out;
}

// ---- envelope diagnostics ----------------------------------------------------

double boundary_weight(double delta, double alpha, double t) noexcept {
  return std::min(1.0, std::pow(std::max(delta, 0.0), 0.5 * alpha) / std::sqrt(t));
}

nlohmann::json BoundDiagnostics::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : entries) {
    auto j = e.estimate.to_json();
    j["w_x"] = e.w_x;
    j["w_y"] = e.w_y;
    j["free_kernel"] = e.free_kernel;
    j["ratio"] = e.ratio;
    j["zero"] = e.zero;
    rows.push_back(std::move(j));
  }
  return {{"ratio_min", ratio_min}, {"ratio_max", ratio_max}, {"entries", rows}};
}

BoundDiagnostics bound_ratio_diagnostics(const Domain& domain, const AlphaParam& params, const BoundGrid& grid,
                                         const SimConfig& cfg) {
  if (grid.times.empty() || grid.pairs.empty()) throw Error(ErrorCode::InvalidArgument, "empty diagnostics grid");
  for (const auto& [x, y] : grid.pairs) {
    if (!domain.contains(x) || !domain.contains(y)) {
      throw Error(ErrorCode::PointOutsideDomain, "grid point is not in the domain");
    }
  }
  std::vector<double> times = grid.times;
  std::sort(times.begin(), times.end());
  const bool bridge = grid.method == KernelMethod::Bridge;
  std::vector<double> observe;
  for (double t : times) {
    if (grid.method == KernelMethod::Bridge) observe.push_back(0.5 * t);
    if (grid.method == KernelMethod::SurvivorKde) observe.push_back(t);
  }
  SimConfig c = horizon_config(cfg, bridge ? 0.5 * times.back() : times.back());

  // One ensemble per distinct point, each with its own seed so that the two
  // ends of a bridge are independent. A bridge from x to x gets a second
  // ensemble for its far end.
  std::map<std::pair<Point, int>, Ensemble> ensembles;
  auto ensemble_for = [&](const Point& p, int copy = 0) -> const Ensemble& {
    auto it = ensembles.find({p, copy});
    if (it == ensembles.end()) {
      c.seed = derive_seed(cfg.seed, ensembles.size());
      it = ensembles.emplace(std::pair{p, copy}, simulate_ensemble(params, p, c, &domain, observe)).first;
    }
    return it->second;
  };

  BoundDiagnostics out;
  out.ratio_min = std::numeric_limits<double>::infinity();
  out.ratio_max = 0.0;
  for (std::size_t m = 0; m < times.size(); ++m) {
    const double t = times[m];
    for (const auto& [x, y] : grid.pairs) {
      BoundEntry entry;
      const Ensemble& ex = ensemble_for(x);
      switch (grid.method) {
        case KernelMethod::SurvivorKde: {
          const double eps = grid.bandwidth.value_or(default_bandwidth(params.alpha(), t, cfg.n_paths, params.dim()));
          entry.estimate = kde_from_ensemble(ex, m, y, eps, cfg.seed);
          break;
        }
        case KernelMethod::Bridge: {
          const double eps =
              grid.bandwidth.value_or(default_bandwidth(params.alpha(), 0.5 * t, cfg.n_paths, params.dim()));
          entry.estimate = bridge_from_ensembles(ex, ensemble_for(y, x == y ? 1 : 0), m, eps, cfg.seed, grid.bandwidth_sensitivity);
          break;
        }
        case KernelMethod::Subtraction:
          entry.estimate = subtraction_from_ensemble(params, ex, t, y, cfg.seed);
          break;
      }
      entry.w_x = boundary_weight(domain.signed_distance(x), params.alpha(), t);
      entry.w_y = boundary_weight(domain.signed_distance(y), params.alpha(), t);
      entry.free_kernel = product_kernel(params, t, x, y);
      entry.zero = !(entry.estimate.value > 0.0);
      entry.ratio = entry.zero ? 0.0 : entry.estimate.value / (entry.w_x * entry.w_y * entry.free_kernel);
      out.ratio_min = std::min(out.ratio_min, entry.ratio);
      out.ratio_max = std::max(out.ratio_max, entry.ratio);
      out.entries.push_back(std::move(entry));
    }
  }
  return out;
}

}  // namespace cylstable
