#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cylstable/domain.hpp"
#include "cylstable/simulator.hpp"
#include "cylstable/stable.hpp"
#include "json.hpp"

namespace cylstable {

enum class KernelMethod { SurvivorKde, Bridge, Subtraction };

std::string_view to_string(KernelMethod m) noexcept;
// Accepts "kde", "bridge", "sub" and the full names.
KernelMethod parse_kernel_method(std::string_view name);

struct KernelEstimate {
  double t = 0.0;
  Point x;
  Point y;
  double value = 0.0;
  double std_error = 0.0;
  KernelMethod method = KernelMethod::SurvivorKde;
  double bandwidth = 0.0;  // 0 for subtraction
  double dt = 0.0;
  std::int64_t n_paths = 0;
  std::int64_t hits = 0;   // paths (or path pairs) with a nonzero contribution
  bool flagged = false;    // subtraction result below zero
  // Values at bandwidth/2 and 2*bandwidth (kernel methods only).
  std::optional<double> value_half_bandwidth;
  std::optional<double> value_double_bandwidth;

  nlohmann::json to_json() const;
};

// 0.8 * t^(1/alpha) * n^(-1/(d+4)), per coordinate.
double default_bandwidth(double alpha, double t, std::int64_t n, int dim);

// Product Epanechnikov kernel with half-width eps in each coordinate.
double epanechnikov(std::span<const double> u, double eps) noexcept;

inline constexpr int kBootstrapResamples = 200;

// Estimators on precomputed ensembles, so one simulation can serve many
// targets. `obs` indexes ens.observe_times; bootstrap draws use `seed`.
KernelEstimate kde_from_ensemble(const Ensemble& ens, std::size_t obs, std::span<const double> y,
                                 double bandwidth, std::uint64_t seed);

// from_x and from_y must share observation time s = t/2 at index `obs` and
// come from independent seeds. `sensitivity` also evaluates bandwidth/2 and
// 2*bandwidth, at roughly four times the cost.
KernelEstimate bridge_from_ensembles(const Ensemble& from_x, const Ensemble& from_y, std::size_t obs,
                                     double bandwidth, std::uint64_t seed, bool sensitivity = false);

// p(t,x,y) minus the mean of p(t - tau, X_tau, y) over paths killed before t,
// with tau the first grid time outside D. ens.horizon must be >= t.
KernelEstimate subtraction_from_ensemble(const AlphaParam& params, const Ensemble& ens, double t,
                                         std::span<const double> y, std::uint64_t seed);

// One-shot forms. t (and t/2 for the bridge) must be multiples of cfg.dt;
// cfg.t_end is ignored. bandwidth defaults to default_bandwidth.
KernelEstimate estimate_pd_survivor_kde(const Domain& domain, const AlphaParam& params, double t,
                                        std::span<const double> x, std::span<const double> y,
                                        const SimConfig& cfg, std::optional<double> bandwidth = {});
KernelEstimate estimate_pd_bridge(const Domain& domain, const AlphaParam& params, double t,
                                  std::span<const double> x, std::span<const double> y, const SimConfig& cfg,
                                  std::optional<double> bandwidth = {}, bool sensitivity = false);
KernelEstimate estimate_pd_subtraction(const Domain& domain, const AlphaParam& params, double t,
                                       std::span<const double> x, std::span<const double> y,
                                       const SimConfig& cfg);

// Fraction of paths alive at observation `obs` whose state lies in the given
// set (e.g. a different rook class than the start).
template <class Pred>
double survivor_fraction_where(const Ensemble& ens, std::size_t obs, Pred&& in_set) {
  std::int64_t hits = 0;
  for (std::int64_t i = 0; i < ens.n_paths; ++i) {
    if (ens.alive_at(i, obs) && in_set(ens.state_at(i, obs))) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(ens.n_paths);
}

// ---- principal eigenvalue --------------------------------------------------

struct SurvivalCurvePoint {
  double t = 0.0;
  double survival = 0.0;
};

struct Lambda1Estimate {
  double lambda1 = 0.0;
  double std_error = 0.0;
  std::vector<double> t_grid;
  std::vector<Point> starts;
  std::vector<std::vector<SurvivalCurvePoint>> curves;  // per start

  nlohmann::json to_json() const;
};

// Common slope of -log S_x(t) over t_grid with a separate intercept per start,
// weighted by the binomial variance of log S. Standard error by path
// bootstrap. An empty t_grid is chosen automatically as five points on
// [t0, 3 t0] where t0 is the first time S drops to 0.1. Throws DecayNotResolved when survival at
// the last time is indistinguishable from 0 or from survival at the first.
Lambda1Estimate estimate_lambda1(const Domain& domain, const AlphaParam& params,
                                 const std::vector<Point>& x_list, std::vector<double> t_grid,
                                 const SimConfig& cfg);

// ---- comparison with the two-sided envelope -----------------------------------

// min(1, delta^(alpha/2) / sqrt(t)).
double boundary_weight(double delta, double alpha, double t) noexcept;

struct BoundGrid {
  std::vector<double> times;
  std::vector<std::pair<Point, Point>> pairs;
  KernelMethod method = KernelMethod::Bridge;
  std::optional<double> bandwidth;
  bool bandwidth_sensitivity = false;  // bridge only; KDE always reports it
};

struct BoundEntry {
  KernelEstimate estimate;
  double w_x = 0.0;
  double w_y = 0.0;
  double free_kernel = 0.0;
  double ratio = 0.0;
  bool zero = false;
};

struct BoundDiagnostics {
  std::vector<BoundEntry> entries;
  double ratio_min = 0.0;
  double ratio_max = 0.0;

  double band() const { return ratio_max / ratio_min; }
  nlohmann::json to_json() const;
};

// Estimates p_D on every (t, pair) of the grid, sharing one ensemble per
// distinct start point, and reports estimate / (w_t(x) w_t(y) p(t,x,y)).
BoundDiagnostics bound_ratio_diagnostics(const Domain& domain, const AlphaParam& params, const BoundGrid& grid,
                                         const SimConfig& cfg);

}  // namespace cylstable
