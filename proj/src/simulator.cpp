#include "cylstable/simulator.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cylstable/error.hpp"

namespace cylstable {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::int64_t kBlock = 64;
constexpr double kKilledTarget = 0.999;

// Supplies the increments of one path, 64 steps per coordinate at a time.
class PathStepper {
 public:
  PathStepper(const AlphaParam& params, double dt, std::uint64_t seed, std::int64_t path)
      : alpha_(params.alpha()), dt_(dt), dim_(params.dim()), buffer_(dim_ * kBlock) {
    streams_.reserve(dim_);
    for (int j = 0; j < dim_; ++j) {
      streams_.emplace_back(seed, static_cast<std::uint64_t>(path), static_cast<std::uint32_t>(j),
                            StreamPurpose::PathIncrement);
    }
  }

  // Moves x from grid step `step - 1` to `step`; the increment of step s is
  // draw s - 1 of each coordinate stream.
  void advance(std::span<double> x, std::int64_t step) {
    const std::int64_t draw = step - 1;
    const std::int64_t block = draw / kBlock;
    if (block != block_) {
      for (int j = 0; j < dim_; ++j) {
        fill_increments(alpha_, dt_, streams_[j], static_cast<std::uint64_t>(block * kBlock),
                        std::span<double>(buffer_.data() + j * kBlock, kBlock));
      }
      block_ = block;
    }
    const std::int64_t offset = draw - block * kBlock;
    for (int j = 0; j < dim_; ++j) x[j] += buffer_[j * kBlock + offset];
  }

 private:
  double alpha_;
  double dt_;
  int dim_;
  std::vector<RandomStream> streams_;
  std::vector<double> buffer_;
  std::int64_t block_ = -1;
};

void check_start(const AlphaParam& params, std::span<const double> x0, const Domain* domain) {
  if (static_cast<int>(x0.size()) != params.dim()) {
    throw Error(ErrorCode::InvalidArgument, "start point dimension does not match AlphaParam");
  }
  if (domain) {
    if (domain->dim() != params.dim()) throw Error(ErrorCode::InvalidArgument, "domain dimension mismatch");
    if (!domain->contains(x0)) throw Error(ErrorCode::StartOutsideDomain, "start point is not in the domain");
  }
}

int resolve_workers(int requested) { return requested > 0 ? requested : omp_get_max_threads(); }

struct RunOptions {
  std::vector<std::int64_t> observe_steps;  // ascending
  bool extend = false;
  const CellMesh* occupation = nullptr;
};

struct RunOutput {
  Ensemble ensemble;
  std::vector<std::int64_t> occupation_half_steps;  // time in units of dt/2
  std::int64_t occupation_outside = 0;
};

// Runs every path to the horizon (doubling it when opts.extend), recording
// observations, exits and, optionally, occupation counts. All reductions are
// integer or per-path, so the output is independent of scheduling.
RunOutput run_ensemble(const AlphaParam& params, std::span<const double> x0, const SimConfig& cfg,
                       const Domain* domain, const RunOptions& opts) {
  const int d = params.dim();
  const std::int64_t n = cfg.n_paths;
  const std::size_t n_obs = opts.observe_steps.size();
  RunOutput out;
  Ensemble& e = out.ensemble;
  e.dim = d;
  e.n_paths = n;
  e.dt = cfg.dt;
  e.start.assign(x0.begin(), x0.end());
  e.kill_step.assign(n, -1);
  e.exit_points.assign(n * d, kNaN);
  e.pre_exit_points.assign(n * d, kNaN);
  e.observed.assign(n * n_obs * d, kNaN);

  const std::int64_t cells = opts.occupation ? opts.occupation->cell_count() : 0;
  const int workers = resolve_workers(cfg.workers);
  std::vector<std::vector<std::int64_t>> local_hist(workers, std::vector<std::int64_t>(cells, 0));
  std::vector<std::int64_t> local_outside(workers, 0);

  std::vector<double> current(n * d);
  for (std::int64_t i = 0; i < n; ++i) std::copy(x0.begin(), x0.end(), current.begin() + i * d);
  std::vector<std::int64_t> active(n);
  for (std::int64_t i = 0; i < n; ++i) active[i] = i;

  std::int64_t from = 0;
  std::int64_t to = cfg.steps_to(cfg.t_end);
  double horizon = cfg.t_end;
  for (;;) {
    const auto n_active = static_cast<std::int64_t>(active.size());
#pragma omp parallel for schedule(dynamic, 16) num_threads(workers)
    for (std::int64_t a = 0; a < n_active; ++a) {
      const std::int64_t i = active[a];
      const int tid = omp_get_thread_num();
      auto& hist = local_hist[tid];
      auto occupy = [&](std::span<const double> x, std::int64_t weight) {
        if (!opts.occupation) return;
        const std::int64_t c = opts.occupation->index_of(x);
        if (c >= 0) {
          hist[c] += weight;
        } else {
          local_outside[tid] += weight;
        }
      };
      std::span<double> x(current.data() + i * d, d);
      Point prev(d);
      PathStepper stepper(params, cfg.dt, cfg.seed, i);
      std::size_t next_obs = 0;
      while (next_obs < n_obs && opts.observe_steps[next_obs] < from) ++next_obs;
      if (from == 0) {
        occupy(x, 1);
        if (next_obs < n_obs && opts.observe_steps[next_obs] == 0) {
          std::copy(x.begin(), x.end(), e.observed.begin() + (i * n_obs) * d);
          ++next_obs;
        }
      } else {
        occupy(x, 1);  // the state at the old horizon now gets a full step
      }
      for (std::int64_t s = from + 1; s <= to; ++s) {
        std::copy(x.begin(), x.end(), prev.begin());
        stepper.advance(x, s);
        if (domain && !domain->contains(x)) {
          e.kill_step[i] = s;
          std::copy(x.begin(), x.end(), e.exit_points.begin() + i * d);
          std::copy(prev.begin(), prev.end(), e.pre_exit_points.begin() + i * d);
          break;
        }
        occupy(x, s == to ? 1 : 2);
        while (next_obs < n_obs && opts.observe_steps[next_obs] == s) {
          std::copy(x.begin(), x.end(), e.observed.begin() + (i * n_obs + next_obs) * d);
          ++next_obs;
        }
      }
    }
    std::vector<std::int64_t> survivors;
    for (std::int64_t i : active) {
      if (e.kill_step[i] < 0) survivors.push_back(i);
    }
    const double killed_fraction = 1.0 - static_cast<double>(survivors.size()) / static_cast<double>(n);
    if (!opts.extend || killed_fraction >= kKilledTarget) break;
    if (2.0 * horizon > cfg.max_t_end * (1.0 + 1e-12)) {
      throw Error(ErrorCode::TruncationBudgetExceeded,
                  "only " + std::to_string(100.0 * killed_fraction) + "% of paths exited by t=" +
                      std::to_string(horizon) + "; max_t_end=" + std::to_string(cfg.max_t_end));
    }
    active = std::move(survivors);
    from = to;
    to *= 2;
    horizon *= 2.0;
  }
  e.horizon = horizon;

  if (opts.occupation) {
    out.occupation_half_steps.assign(cells, 0);
    for (int w = 0; w < workers; ++w) {
      for (std::int64_t c = 0; c < cells; ++c) out.occupation_half_steps[c] += local_hist[w][c];
      out.occupation_outside += local_outside[w];
    }
  }
  return out;
}

double mean_of(const std::vector<double>& v, double& std_error) {
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  std_error = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size())) : 0.0;
  return mean;
}

}  // namespace

void SimConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorCode::InvalidArgument, "dt must be positive");
  if (!(t_end >= dt)) throw Error(ErrorCode::InvalidArgument, "t_end must be at least dt");
  if (n_paths < 1) throw Error(ErrorCode::InvalidArgument, "n_paths must be at least 1");
  if (workers < 0) throw Error(ErrorCode::InvalidArgument, "workers must be non-negative");
}

std::int64_t SimConfig::steps_to(double t) const {
  const double ratio = t / dt;
  const double rounded = std::round(ratio);
  if (!(t >= 0.0) || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
    throw Error(ErrorCode::InvalidArgument,
                "time " + std::to_string(t) + " is not a multiple of dt=" + std::to_string(dt));
  }
  return static_cast<std::int64_t>(rounded);
}

PathSample simulate_path(const AlphaParam& params, std::span<const double> x0, const SimConfig& cfg,
                         std::int64_t path_index, const Domain* domain) {
  cfg.validate();
  check_start(params, x0, domain);
  const int d = params.dim();
  const std::int64_t steps = cfg.steps_to(cfg.t_end);
  PathSample path;
  Point x(x0.begin(), x0.end()), prev(d);
  if (cfg.record_mode != RecordMode::ExitOnly) {
    path.times.push_back(0.0);
    path.states.push_back(x);
  }
  PathStepper stepper(params, cfg.dt, cfg.seed, path_index);
  for (std::int64_t s = 1; s <= steps; ++s) {
    prev = x;
    stepper.advance(x, s);
    const bool outside = domain && !domain->contains(x);
    if (cfg.record_mode == RecordMode::FullPath || (outside && cfg.record_mode == RecordMode::EndpointOnly)) {
      path.times.push_back(static_cast<double>(s) * cfg.dt);
      path.states.push_back(x);
    }
    if (outside) {
      path.killed = true;
      path.tau_lo = static_cast<double>(s - 1) * cfg.dt;
      path.tau_hi = path.tau_lo + cfg.dt;
      path.exit_point = x;
      path.pre_exit_point = prev;
      return path;
    }
  }
  if (cfg.record_mode == RecordMode::EndpointOnly) {
    path.times.push_back(static_cast<double>(steps) * cfg.dt);
    path.states.push_back(x);
  }
  path.tau_lo = path.tau_hi = std::numeric_limits<double>::infinity();
  return path;
}

// ---- CellMesh ----------------------------------------------------------------

CellMesh CellMesh::covering(const BoundingBox& box, double h, double margin) {
  if (!(h > 0.0)) throw Error(ErrorCode::InvalidArgument, "mesh spacing must be positive");
  CellMesh m;
  m.h = h;
  for (int a = 0; a < box.dim(); ++a) {
    m.origin.push_back(box.lo[a] - margin);
    const double extent = box.hi[a] - box.lo[a] + 2.0 * margin;
    m.shape.push_back(std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(extent / h - 1e-9))));
  }
  return m;
}

std::int64_t CellMesh::cell_count() const {
  std::int64_t n = 1;
  for (auto s : shape) n *= s;
  return n;
}

std::int64_t CellMesh::index_of(std::span<const double> x) const {
  std::int64_t index = 0, stride = 1;
  for (std::size_t a = 0; a < shape.size(); ++a) {
    const double u = (x[a] - origin[a]) / h;
    if (!(u >= 0.0) || u >= static_cast<double>(shape[a])) return -1;
    index += static_cast<std::int64_t>(u) * stride;
    stride *= shape[a];
  }
  return index;
}

Point CellMesh::cell_center(std::int64_t index) const {
  Point p(shape.size());
  for (std::size_t a = 0; a < shape.size(); ++a) {
    p[a] = origin[a] + (static_cast<double>(index % shape[a]) + 0.5) * h;
    index /= shape[a];
  }
  return p;
}

double CellMesh::cell_volume() const { return std::pow(h, static_cast<double>(shape.size())); }

// ---- Ensemble ------------------------------------------------------------------

double Ensemble::tau_lo(std::int64_t i) const {
  return killed(i) ? static_cast<double>(kill_step[i] - 1) * dt : std::numeric_limits<double>::infinity();
}

double Ensemble::tau_hi(std::int64_t i) const {
  return killed(i) ? static_cast<double>(kill_step[i]) * dt : std::numeric_limits<double>::infinity();
}

bool Ensemble::alive_at(std::int64_t i, std::size_t obs) const {
  return !std::isnan(observed[(i * observe_times.size() + obs) * dim]);
}

std::span<const double> Ensemble::state_at(std::int64_t i, std::size_t obs) const {
  return {observed.data() + (i * observe_times.size() + obs) * dim, static_cast<std::size_t>(dim)};
}

std::span<const double> Ensemble::exit_point(std::int64_t i) const {
  return {exit_points.data() + i * dim, static_cast<std::size_t>(dim)};
}

std::span<const double> Ensemble::pre_exit_point(std::int64_t i) const {
  return {pre_exit_points.data() + i * dim, static_cast<std::size_t>(dim)};
}

std::int64_t Ensemble::survivors_at(std::size_t obs) const {
  std::int64_t count = 0;
  for (std::int64_t i = 0; i < n_paths; ++i) count += alive_at(i, obs) ? 1 : 0;
  return count;
}

Ensemble simulate_ensemble(const AlphaParam& params, std::span<const double> x0, const SimConfig& cfg,
                           const Domain* domain, std::vector<double> observe_times) {
  cfg.validate();
  check_start(params, x0, domain);
  std::sort(observe_times.begin(), observe_times.end());
  RunOptions opts;
  for (double t : observe_times) {
    if (t > cfg.t_end * (1.0 + 1e-12)) {
      throw Error(ErrorCode::InvalidArgument, "observation time beyond t_end");
    }
    opts.observe_steps.push_back(cfg.steps_to(t));
  }
  auto out = run_ensemble(params, x0, cfg, domain, opts);
  out.ensemble.observe_times = std::move(observe_times);
  return std::move(out.ensemble);
}

// ---- estimators ------------------------------------------------------------------

Estimate survival_probability(const Domain& domain, const AlphaParam& params, std::span<const double> x,
                              double t, const SimConfig& cfg) {
  SimConfig c = cfg;
  c.t_end = t;
  const Ensemble e = simulate_ensemble(params, x, c, &domain, {t});
  const double p = static_cast<double>(e.survivors_at(0)) / static_cast<double>(e.n_paths);
  Estimate out;
  out.value = p;
  out.std_error = std::sqrt(p * (1.0 - p) / static_cast<double>(e.n_paths));
  out.dt = cfg.dt;
  out.n_paths = cfg.n_paths;
  out.seed = cfg.seed;
  return out;
}

std::vector<Estimate> survival_refinement(const Domain& domain, const AlphaParam& params,
                                          std::span<const double> x, double t, const SimConfig& cfg,
                                          int levels) {
  std::vector<Estimate> out;
  SimConfig c = cfg;
  for (int l = 0; l < levels; ++l) {
    out.push_back(survival_probability(domain, params, x, t, c));
    c.dt /= 2.0;
  }
  return out;
}

ExitTimeEstimate mean_exit_time(const Domain& domain, const AlphaParam& params, std::span<const double> x,
                                const SimConfig& cfg) {
  cfg.validate();
  check_start(params, x, &domain);
  RunOptions opts;
  opts.extend = true;
  const auto run = run_ensemble(params, x, cfg, &domain, opts);
  const Ensemble& e = run.ensemble;
  std::vector<double> tau(e.n_paths);
  std::int64_t killed = 0;
  for (std::int64_t i = 0; i < e.n_paths; ++i) {
    tau[i] = e.killed(i) ? e.tau_mid(i) : e.horizon;
    killed += e.killed(i) ? 1 : 0;
  }
  ExitTimeEstimate out;
  out.value = mean_of(tau, out.std_error);
  out.dt = cfg.dt;
  out.n_paths = cfg.n_paths;
  out.seed = cfg.seed;
  out.horizon = e.horizon;
  out.killed_fraction = static_cast<double>(killed) / static_cast<double>(e.n_paths);
  return out;
}

ExitHistogram exit_distribution(const Domain& domain, const AlphaParam& params, std::span<const double> x,
                                const SimConfig& cfg, const CellMesh& mesh) {
  cfg.validate();
  check_start(params, x, &domain);
  RunOptions opts;
  opts.extend = true;
  const auto run = run_ensemble(params, x, cfg, &domain, opts);
  const Ensemble& e = run.ensemble;
  ExitHistogram h;
  h.mesh = mesh;
  h.counts.assign(mesh.cell_count(), 0);
  h.n_paths = e.n_paths;
  h.horizon = e.horizon;
  std::vector<double> second;
  const int d = e.dim;
  std::vector<double> disp(d);
  for (std::int64_t i = 0; i < e.n_paths; ++i) {
    if (!e.killed(i)) continue;
    ++h.n_killed;
    const auto p = e.exit_point(i);
    const auto q = e.pre_exit_point(i);
    h.exit_points.insert(h.exit_points.end(), p.begin(), p.end());
    const std::int64_t c = mesh.index_of(p);
    if (c >= 0) {
      ++h.counts[c];
    } else {
      ++h.outside_mesh;
    }
    if (d >= 2) {
      for (int k = 0; k < d; ++k) disp[k] = std::abs(p[k] - q[k]);
      std::nth_element(disp.begin(), disp.begin() + 1, disp.end(), std::greater<>());
      second.push_back(disp[1]);
    }
  }
  if (!second.empty()) {
    const auto mid = second.begin() + static_cast<std::ptrdiff_t>(second.size() / 2);
    std::nth_element(second.begin(), mid, second.end());
    h.median_second_displacement = *mid;
  }
  return h;
}

OccupationRecord occupation_green(const Domain& domain, const AlphaParam& params, std::span<const double> x,
                                  const SimConfig& cfg, const CellMesh& mesh) {
  cfg.validate();
  check_start(params, x, &domain);
  RunOptions opts;
  opts.extend = true;
  opts.occupation = &mesh;
  auto run = run_ensemble(params, x, cfg, &domain, opts);
  OccupationRecord rec;
  rec.mesh = mesh;
  rec.horizon = run.ensemble.horizon;
  rec.n_paths = cfg.n_paths;
  const double unit = 0.5 * cfg.dt / static_cast<double>(cfg.n_paths);
  rec.mass.resize(mesh.cell_count());
  std::int64_t total = run.occupation_outside;
  for (std::int64_t c = 0; c < mesh.cell_count(); ++c) {
    rec.mass[c] = static_cast<double>(run.occupation_half_steps[c]) * unit;
    total += run.occupation_half_steps[c];
  }
  rec.outside_mesh = static_cast<double>(run.occupation_outside) * unit;
  rec.total_mass = static_cast<double>(total) * unit;
  return rec;
}

}  // namespace cylstable
