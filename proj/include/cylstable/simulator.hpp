#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cylstable/domain.hpp"
#include "cylstable/stable.hpp"

namespace cylstable {

enum class RecordMode { EndpointOnly, FullPath, ExitOnly };

struct SimConfig {
  double dt = 1e-3;
  double t_end = 1.0;
  std::int64_t n_paths = 10000;
  std::uint64_t seed = 1;
  RecordMode record_mode = RecordMode::EndpointOnly;
  int workers = 0;          // 0: OpenMP default
  double max_t_end = 1e3;   // cap for automatic horizon extension

  void validate() const;
  // Number of steps to reach `t`; t must be a multiple of dt.
  std::int64_t steps_to(double t) const;
};

// One discretized trajectory. For killed paths tau_hi = tau_lo + dt, the
// state at tau_lo is in D and the state at tau_hi (the exit point) is not.
// Survivors have tau_lo = tau_hi = +inf.
struct PathSample {
  std::vector<double> times;
  std::vector<Point> states;
  bool killed = false;
  double tau_lo = 0.0;
  double tau_hi = 0.0;
  std::optional<Point> exit_point;
  std::optional<Point> pre_exit_point;
};

// Increments of coordinate j of path i are the draws of
// RandomStream(seed, i, j, PathIncrement), so a path does not depend on how
// the work is scheduled.
PathSample simulate_path(const AlphaParam& params, std::span<const double> x0, const SimConfig& cfg,
                         std::int64_t path_index, const Domain* domain = nullptr);

// Regular cell mesh; axis 0 varies fastest.
struct CellMesh {
  Point origin;
  double h = 0.0;
  std::vector<std::int64_t> shape;

  static CellMesh covering(const BoundingBox& box, double h, double margin = 0.0);
  std::int64_t cell_count() const;
  std::int64_t index_of(std::span<const double> x) const;  // -1 outside the mesh
  Point cell_center(std::int64_t index) const;
  double cell_volume() const;
};

// Many killed paths from one start, with states recorded at a set of
// observation times (multiples of dt).
struct Ensemble {
  int dim = 0;
  std::int64_t n_paths = 0;
  double dt = 0.0;
  double horizon = 0.0;
  Point start;
  std::vector<double> observe_times;
  std::vector<std::int64_t> kill_step;   // -1 if alive at the horizon
  std::vector<double> exit_points;       // n x dim, NaN for survivors
  std::vector<double> pre_exit_points;   // n x dim, NaN for survivors
  std::vector<double> observed;          // n x n_obs x dim, NaN once killed

  bool killed(std::int64_t i) const { return kill_step[i] >= 0; }
  double tau_lo(std::int64_t i) const;
  double tau_hi(std::int64_t i) const;
  double tau_mid(std::int64_t i) const { return 0.5 * (tau_lo(i) + tau_hi(i)); }
  bool alive_at(std::int64_t i, std::size_t obs) const;
  std::span<const double> state_at(std::int64_t i, std::size_t obs) const;
  std::span<const double> exit_point(std::int64_t i) const;
  std::span<const double> pre_exit_point(std::int64_t i) const;
  std::int64_t survivors_at(std::size_t obs) const;
};

// domain == nullptr simulates the free process.
Ensemble simulate_ensemble(const AlphaParam& params, std::span<const double> x0, const SimConfig& cfg,
                           const Domain* domain, std::vector<double> observe_times);

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  double dt = 0.0;
  std::int64_t n_paths = 0;
  std::uint64_t seed = 0;
};

// P_x(t < tau_D); cfg.t_end is ignored. Binomial standard error.
Estimate survival_probability(const Domain& domain, const AlphaParam& params, std::span<const double> x,
                              double t, const SimConfig& cfg);

// Survival at dt, dt/2, dt/4 (common seed).
std::vector<Estimate> survival_refinement(const Domain& domain, const AlphaParam& params,
                                          std::span<const double> x, double t, const SimConfig& cfg,
                                          int levels = 3);

struct ExitTimeEstimate : Estimate {
  double horizon = 0.0;          // t_end after automatic extension
  double killed_fraction = 0.0;
};

// Mean of (tau_lo + tau_hi)/2, censored at the horizon. The horizon starts
// at cfg.t_end and doubles until 99.9% of paths are killed; throws
// TruncationBudgetExceeded past cfg.max_t_end.
ExitTimeEstimate mean_exit_time(const Domain& domain, const AlphaParam& params, std::span<const double> x,
                                const SimConfig& cfg);

struct ExitHistogram {
  CellMesh mesh;
  std::vector<std::int64_t> counts;  // exit points per cell
  std::int64_t outside_mesh = 0;
  std::int64_t n_killed = 0;
  std::int64_t n_paths = 0;
  double horizon = 0.0;
  // Median over killed paths of the second-largest coordinate displacement
  // in the killing step; small when exits happen by single-axis jumps.
  double median_second_displacement = 0.0;
  std::vector<double> exit_points;  // n_killed x dim, path order
};

ExitHistogram exit_distribution(const Domain& domain, const AlphaParam& params, std::span<const double> x,
                                const SimConfig& cfg, const CellMesh& mesh);

// Expected time spent per cell before exit, per path (trapezoidal in the
// grid times, so the total equals the mean of the censored tau midpoints).
struct OccupationRecord {
  CellMesh mesh;
  std::vector<double> mass;
  double outside_mesh = 0.0;
  double total_mass = 0.0;
  double horizon = 0.0;
  std::int64_t n_paths = 0;

  // Cell-averaged Green function estimate mass / cell volume.
  double green_density(std::int64_t cell) const { return mass[cell] / mesh.cell_volume(); }
};

OccupationRecord occupation_green(const Domain& domain, const AlphaParam& params, std::span<const double> x,
                                  const SimConfig& cfg, const CellMesh& mesh);

}  // namespace cylstable
