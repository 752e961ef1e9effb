#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <queue>
#include <random>

#include "cylstable/connectivity.hpp"
#include "cylstable/domain.hpp"
#include "cylstable/error.hpp"
#include "cylstable/frac_laplacian.hpp"
#include "cylstable/heatkernel.hpp"
#include "cylstable/stable.hpp"
#include "studies.hpp"

namespace cylstable::detail {

using nlohmann::json;
using R = Check::Relation;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double rel_diff(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

std::vector<double> logs(const std::vector<double>& v) {
  std::vector<double> out;
  for (double x : v) out.push_back(std::log(x));
  return out;
}

// Slope of log y on log x over the points with y > 0; NaN with fewer than
// `min_points` of them.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y, std::size_t min_points) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (y[i] > 0.0 && std::isfinite(y[i])) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  }
  if (lx.size() < std::max<std::size_t>(min_points, 2)) return kNaN;
  return fit_line(lx, ly).slope;
}

std::string point_label(const Point& x) { return "(" + format_number(x[0]) + "," + format_number(x[1]) + ")"; }

std::string pair_label(const Point& x, const Point& y) { return point_label(x) + "-" + point_label(y); }

KernelMethod method_of(const ExperimentConfig& cfg, KernelMethod fallback) {
  const std::string m = cfg.text("method", "");
  return m.empty() ? fallback : parse_kernel_method(m);
}

std::vector<std::string> bound_header() {
  return {"dt", "t",  "x1", "x2", "y1", "y2", "delta_x", "delta_y", "estimate", "stderr", "hits", "bandwidth",
          "w_x", "w_y", "free_kernel", "ratio"};
}

void bound_rows(CsvTable& table, const Domain& domain, const BoundDiagnostics& diag, double dt) {
  for (const auto& e : diag.entries) {
    const auto& k = e.estimate;
    table.add_row({dt, k.t, k.x[0], k.x[1], k.y[0], k.y[1], domain.signed_distance(k.x),
                   domain.signed_distance(k.y), k.value, k.std_error, k.hits, k.bandwidth, e.w_x, e.w_y,
                   e.free_kernel, e.ratio});
  }
}

// entries are ordered time-major; this regroups them per pair.
std::vector<std::vector<const BoundEntry*>> by_pair(const BoundDiagnostics& diag, std::size_t n_pairs) {
  std::vector<std::vector<const BoundEntry*>> out(n_pairs);
  for (std::size_t i = 0; i < diag.entries.size(); ++i) out[i % n_pairs].push_back(&diag.entries[i]);
  return out;
}

std::int64_t zero_entries(const BoundDiagnostics& diag) {
  return std::count_if(diag.entries.begin(), diag.entries.end(), [](const BoundEntry& e) { return e.zero; });
}

SvgPlot ratio_plot(const std::string& title, const BoundDiagnostics& diag, std::size_t n_pairs) {
  SvgPlot plot(title, "t", "estimate / (w_x w_y p)", true, true);
  for (const auto& series : by_pair(diag, n_pairs)) {
    std::vector<double> t, r;
    for (const BoundEntry* e : series) {
      t.push_back(e->estimate.t);
      r.push_back(e->ratio);
    }
    plot.add_series(pair_label(series.front()->estimate.x, series.front()->estimate.y), t, r);
  }
  if (diag.ratio_min > 0.0) plot.add_band("observed band", diag.ratio_min, diag.ratio_max);
  return plot;
}

}  // namespace

// ---- frac_laplacian ----------------------------------------------------------

void study_lemma31_constants(StudyContext& ctx) {
  const auto alphas = ctx.cfg.reals("alphas", {0.5, 1.0, 1.5});

  CsvTable zeros({"alpha", "c_at_half", "c_at_0.1", "c_at_0.9", "root", "root_minus_half"});
  double worst_zero = 0.0, worst_root = 0.0;
  std::int64_t sign_errors = 0;
  for (double a : alphas) {
    const double c_half = ctest_constant(0.5 * a, a);
    double lo = 0.1 * a, hi = 0.9 * a;
    const double c_lo = ctest_constant(lo, a), c_hi = ctest_constant(hi, a);
    sign_errors += (c_lo < 0.0 ? 0 : 1) + (c_hi > 0.0 ? 0 : 1);
    double root = kNaN;
    if (c_lo < 0.0 && c_hi > 0.0) {
      while (hi - lo > 1e-10) {
        const double mid = 0.5 * (lo + hi);
        (ctest_constant(mid, a) < 0.0 ? lo : hi) = mid;
      }
      root = 0.5 * (lo + hi);
    }
    worst_zero = std::max(worst_zero, std::abs(c_half));
    worst_root = std::isnan(root) ? kNaN : std::max(worst_root, std::abs(root - 0.5 * a));
    zeros.add_row({a, c_half, c_lo, c_hi, root, root - 0.5 * a});
  }
  ctx.write_csv("lemma31_zero.csv", zeros);

  CsvTable sweep({"alpha", "p_over_alpha", "c"});
  SvgPlot plot("C(p, alpha) for the power test function", "p / alpha", "C(p, alpha)");
  for (double a : alphas) {
    std::vector<double> f, c;
    for (int k = 1; k <= 19; ++k) {
      f.push_back(0.05 * k);
      c.push_back(ctest_constant(f.back() * a, a));
      sweep.add_row({a, f.back(), c.back()});
    }
    plot.add_series("alpha=" + format_number(a), f, c);
  }
  plot.add_reference("zero", 0.0, 0.0);
  ctx.write_csv("lemma31_sweep.csv", sweep);
  ctx.write_svg("lemma31_sweep.svg", plot);

  CsvTable grid({"alpha", "p", "reduced", "direct", "rel_diff"});
  double worst_grid = 0.0;
  for (double a : {0.4, 0.8, 1.1, 1.5, 1.9}) {
    for (double frac : {0.1, 0.3, 0.45, 0.7, 0.9}) {
      const double p = frac * a;
      const double reduced = ctest_constant(p, a);
      const double direct = frac_lap_power_direct(p, a, 1.0).value;
      worst_grid = std::max(worst_grid, rel_diff(direct, reduced));
      grid.add_row({a, p, reduced, direct, rel_diff(direct, reduced)});
    }
  }
  ctx.write_csv("lemma31_grid.csv", grid);

  ctx.add(Verdict::from_checks(1, "lemma31_trichotomy",
                               {Check::make("max |C(alpha/2, alpha)|", worst_zero, 1e-8, 0.0, R::AtMost),
                                Check::make("sign errors at p = 0.1 alpha, 0.9 alpha", static_cast<double>(sign_errors),
                                            0.0, 0.0, R::AtMost),
                                Check::make("max |root - alpha/2|", worst_root, 1e-6, 0.0, R::AtMost),
                                Check::make("max reduced vs direct rel. diff (5x5)", worst_grid, 1e-6, 0.0, R::AtMost)}));
}

// ---- stable_core --------------------------------------------------------------

void study_kernel_oracles(StudyContext& ctx) {
  const std::uint64_t seed = ctx.cfg.seed();
  ctx.report.provenance["n_paths"] = ctx.cfg.paths(1'000'000);

  // Density against closed forms.
  CsvTable dens({"alpha", "z", "computed", "exact", "rel_error"});
  double worst_cauchy = 0.0;
  for (int k = 0; k <= 2000; ++k) {
    const double z = -10.0 + 0.01 * k;
    const double exact = 1.0 / (std::numbers::pi * (1.0 + z * z));
    const double got = density_1d(1.0, 1.0, z);
    worst_cauchy = std::max(worst_cauchy, rel_diff(got, exact));
    if (k % 20 == 0) dens.add_row({1.0, z, got, exact, rel_diff(got, exact)});
  }
  double worst_origin = 0.0;
  for (double a : {0.5, 0.7, 1.3}) {
    const double exact = std::tgamma(1.0 + 1.0 / a) / std::numbers::pi;
    const double got = density_1d(a, 1.0, 0.0);
    worst_origin = std::max(worst_origin, rel_diff(got, exact));
    dens.add_row({a, 0.0, got, exact, rel_diff(got, exact)});
  }
  ctx.write_csv("density_oracle.csv", dens);
  ctx.add(Verdict::from_checks(2, "density_oracle",
                               {Check::make("max rel. error vs Cauchy on [-10,10]", worst_cauchy, 1e-8, 0.0, R::AtMost),
                                Check::make("max rel. error at z=0", worst_origin, 1e-8, 0.0, R::AtMost)}));

  // Empirical characteristic function of the sampler.
  const std::int64_t n = ctx.cfg.paths(1'000'000);
  CsvTable cf({"alpha", "xi", "re", "im", "exact", "deviation"});
  SvgPlot plot("empirical characteristic function", "xi", "E cos(xi X)");
  double worst_cf = 0.0;
  std::vector<double> draws(n);
  std::uint32_t lane = 0;
  for (double a : {0.6, 1.0, 1.7}) {
    fill_increments(a, 1.0, RandomStream(seed, 0, lane++, StreamPurpose::Generic), 0, draws);
    std::vector<double> xs, ys;
    for (int k = 0; k <= 30; ++k) {
      const double xi = 0.1 * k;
      double re = 0.0, im = 0.0;
      for (double x : draws) {
        re += std::cos(xi * x);
        im += std::sin(xi * x);
      }
      re /= static_cast<double>(n);
      im /= static_cast<double>(n);
      const double exact = std::exp(-std::pow(xi, a));
      const double dev = std::hypot(re - exact, im);
      if (k == 5 || k == 10 || k == 20) {
        worst_cf = std::max(worst_cf, dev);
        cf.add_row({a, xi, re, im, exact, dev});
      }
      xs.push_back(xi);
      ys.push_back(re);
    }
    plot.add_series("alpha=" + format_number(a), xs, ys, true, false);
  }
  ctx.write_csv("sampler_cf.csv", cf);
  ctx.write_svg("sampler_cf.svg", plot);
  ctx.add(Verdict::from_checks(3, "sampler_cf",
                               {Check::make("max |ecf - exp(-|xi|^alpha)|", worst_cf, 0.01, 0.0, R::AtMost)}));

  // Scaling and symmetry of the product kernel.
  std::mt19937_64 rng(derive_seed(seed, 3));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  CsvTable sc({"dim", "alpha", "t", "lambda", "p", "scaled_rel_error", "symmetry_rel_error"});
  double worst_scale = 0.0, worst_sym = 0.0;
  for (int k = 0; k < 100; ++k) {
    const int d = 1 + static_cast<int>(3.0 * unit(rng));
    const double a = 0.3 + 1.6 * unit(rng);
    const double t = std::exp(std::log(0.05) + unit(rng) * std::log(3.0 / 0.05));
    const double lam = std::exp(std::log(0.25) + unit(rng) * std::log(16.0));
    Point x(d), y(d), lx(d), ly(d);
    for (int j = 0; j < d; ++j) {
      x[j] = -3.0 + 6.0 * unit(rng);
      y[j] = -3.0 + 6.0 * unit(rng);
      lx[j] = lam * x[j];
      ly[j] = lam * y[j];
    }
    const AlphaParam params(a, d);
    const double p = product_kernel(params, t, x, y);
    const double scaled = std::pow(lam, d) * product_kernel(params, std::pow(lam, a) * t, lx, ly);
    const double swapped = product_kernel(params, t, y, x);
    worst_scale = std::max(worst_scale, rel_diff(scaled, p));
    worst_sym = std::max(worst_sym, rel_diff(swapped, p));
    sc.add_row({d, a, t, lam, p, rel_diff(scaled, p), rel_diff(swapped, p)});
  }
  ctx.write_csv("kernel_scaling.csv", sc);
  ctx.add(Verdict::from_checks(4, "kernel_scaling",
                               {Check::make("max scaling rel. error", worst_scale, 1e-8, 0.0, R::AtMost),
                                Check::make("max symmetry rel. error", worst_sym, 1e-8, 0.0, R::AtMost)}));
}

// ---- killed_simulator -----------------------------------------------------------

void study_exit_scaling(StudyContext& ctx) {
  const auto alphas = ctx.cfg.reals("alphas", {0.8, 1.5});
  const SimConfig base = ctx.sim(100'000, 1e-3);
  const Domain b1 = paper_domain("disc", 1.0), b2 = paper_domain("disc", 2.0);
  const Point origin{0.0, 0.0};

  CsvTable table({"alpha", "radius", "mean_exit", "stderr", "killed_fraction", "horizon"});
  SvgPlot plot("mean exit time from the centre", "radius", "E tau", true, true);
  std::vector<Check> checks;
  std::uint64_t k = 0;
  for (double a : alphas) {
    const AlphaParam params(a, 2);
    SimConfig c1 = base, c2 = base;
    c1.seed = derive_seed(base.seed, k++);
    c2.seed = derive_seed(base.seed, k++);
    const auto m1 = mean_exit_time(b1, params, origin, c1);
    const auto m2 = mean_exit_time(b2, params, origin, c2);
    table.add_row({a, 1.0, m1.value, m1.std_error, m1.killed_fraction, m1.horizon});
    table.add_row({a, 2.0, m2.value, m2.std_error, m2.killed_fraction, m2.horizon});
    checks.push_back(Check::make("E tau B(0,2) / E tau B(0,1) at alpha=" + format_number(a), m2.value / m1.value,
                                 std::pow(2.0, a), 0.05, R::RelWithin));
    plot.add_series("alpha=" + format_number(a), {1.0, 2.0}, {m1.value, m2.value});
    plot.add_reference("r^alpha, alpha=" + format_number(a), m1.value, a);
  }
  ctx.write_csv("exit_scaling.csv", table);
  ctx.write_svg("exit_scaling.svg", plot);
  ctx.add(Verdict::from_checks(5, "exit_time_scaling", std::move(checks)));
}

void study_survival_bound(StudyContext& ctx) {
  const double alpha = ctx.cfg.alpha;
  const AlphaParam params(alpha, 2);
  const Domain disc = paper_domain("disc");
  const SimConfig base = ctx.sim(100'000, 1e-3);
  const auto deltas = ctx.cfg.reals("deltas", {0.2, 0.1, 0.05, 0.025});
  const double t = 1.0;

  CsvTable table({"delta", "t", "survival", "stderr"});
  std::vector<double> surv;
  for (std::size_t k = 0; k < deltas.size(); ++k) {
    SimConfig c = base;
    c.seed = derive_seed(base.seed, k);
    const Point x{1.0 - deltas[k], 0.0};
    const auto s = survival_probability(disc, params, x, t, c);
    surv.push_back(s.value);
    table.add_row({deltas[k], t, s.value, s.std_error});
  }
  ctx.write_csv("survival_delta.csv", table);
  const double slope = loglog_slope(deltas, surv, deltas.size());
  SvgPlot plot("survival to t=1 against distance to the boundary", "delta", "P(t < tau)", true, true);
  plot.add_series("estimate", deltas, surv, false, true);
  if (std::isfinite(slope)) {
    const auto fit = fit_line(logs(deltas), logs(surv));
    plot.add_reference("fit, slope " + format_number(fit.slope), std::exp(fit.intercept), fit.slope);
  }
  ctx.write_svg("survival_delta.svg", plot);

  // Closer to the boundary, outside the regression: local slopes show whether
  // a miss comes from the profile not yet being a pure power at delta ~ 0.1.
  const std::vector<double> inner{deltas.back() / 2.0, deltas.back() / 4.0};
  std::vector<double> local_d{deltas.back()}, local_s{surv.back()};
  CsvTable tail({"delta", "t", "survival", "stderr", "local_slope"});
  for (std::size_t k = 0; k < inner.size(); ++k) {
    SimConfig c = base;
    c.seed = derive_seed(base.seed, 100 + k);
    const auto s = survival_probability(disc, params, Point{1.0 - inner[k], 0.0}, t, c);
    local_d.push_back(inner[k]);
    local_s.push_back(s.value);
    const double local = std::log(local_s[k] / local_s[k + 1]) / std::log(local_d[k] / local_d[k + 1]);
    tail.add_row({inner[k], t, s.value, s.std_error, local});
  }
  ctx.write_csv("survival_delta_inner.csv", tail);
  const double inner_slope = loglog_slope(local_d, local_s, local_d.size());
  ctx.add(Verdict::from_checks(6, "boundary_decay_exponent",
                               {Check::make("slope of log survival vs log delta", slope, 0.5 * alpha, 0.1,
                                            R::AbsWithin)},
                               "slope over delta in [" + format_number(local_d.back()) + ", " +
                                   format_number(local_d.front()) + "] (not graded): " +
                                   format_number(inner_slope)));

  // Small-time exit from a ball is at most linear in t / r^alpha. By scaling
  // only t / r^alpha matters, so one radius suffices.
  SimConfig c = base;
  c.dt = 1e-4;
  c.t_end = 0.04;
  c.seed = derive_seed(base.seed, deltas.size());
  const Point origin{0.0, 0.0};
  const Ensemble e = simulate_ensemble(params, origin, c, &disc, {});
  const std::vector<double> ss{0.005, 0.01, 0.02, 0.04};
  std::vector<double> exit_prob, per_time;
  CsvTable small({"s", "dt", "exit_probability", "exit_probability_over_s"});
  for (double s : ss) {
    std::int64_t killed = 0;
    for (std::int64_t i = 0; i < e.n_paths; ++i) {
      if (e.killed(i) && e.tau_hi(i) <= s * (1.0 + 1e-12)) ++killed;
    }
    exit_prob.push_back(static_cast<double>(killed) / static_cast<double>(e.n_paths));
    per_time.push_back(exit_prob.back() / s);
    small.add_row({s, c.dt, exit_prob.back(), per_time.back()});
  }
  ctx.write_csv("small_time_exit.csv", small);
  const double small_slope = loglog_slope(ss, exit_prob, ss.size());
  const double spread = *std::max_element(per_time.begin(), per_time.end()) /
                        std::max(*std::min_element(per_time.begin(), per_time.end()), 1e-300);
  ctx.add(Verdict::from_checks(0, "small_time_exit_linear",
                               {Check::make("slope of log P(tau_B(0,1) <= s) vs log s", small_slope, 1.0, 0.15,
                                            R::AbsWithin),
                                Check::make("max/min of P(tau <= s)/s", spread, 2.0, 0.0, R::AtMost)},
                               "exit probability from B(0,1) over s in [0.005, 0.04] at dt=1e-4"));
}

// ---- heatkernel_estimator -------------------------------------------------------

void study_thm11_disc(StudyContext& ctx) {
  const AlphaParam params(ctx.cfg.alpha, 2);
  const Domain disc = paper_domain("disc");
  const SimConfig base = ctx.sim(100'000, 1e-3);
  BoundGrid grid;
  grid.times = ctx.cfg.reals("times", {0.1, 0.25, 0.5});
  grid.method = method_of(ctx.cfg, KernelMethod::Bridge);
  grid.pairs = {{{0.0, 0.0}, {0.0, 0.0}},     {{0.0, 0.0}, {0.5, 0.0}},      {{0.0, 0.0}, {0.98, 0.0}},
                {{0.5, 0.0}, {-0.5, 0.0}},    {{0.98, 0.0}, {0.9, 0.0}},     {{0.0, 0.5}, {0.0, -0.95}},
                {{0.35, 0.35}, {-0.6, 0.6}},  {{0.98, 0.0}, {0.6, 0.6}}};

  CsvTable table(bound_header());
  std::vector<BoundDiagnostics> runs;
  for (double dt : {base.dt, 0.5 * base.dt}) {
    SimConfig c = base;
    c.dt = dt;
    runs.push_back(bound_ratio_diagnostics(disc, params, grid, c));
    bound_rows(table, disc, runs.back(), dt);
    ctx.report.details["band_dt_" + format_number(dt)] = runs.back().band();
  }
  ctx.write_csv("thm11_disc.csv", table);
  ctx.write_svg("thm11_disc_ratio.svg", ratio_plot("B(0,1): estimate over envelope shape", runs[0], grid.pairs.size()));

  const double zeros = static_cast<double>(zero_entries(runs[0]) + zero_entries(runs[1]));
  ctx.add(Verdict::from_checks(
      7, "two_sided_comparability",
      {Check::make("band ratio_max/ratio_min at dt", runs[0].band(), 50.0, 0.0, R::AtMost),
       Check::make("band at dt/2", runs[1].band(), 50.0, 0.0, R::AtMost),
       Check::make("zero estimates (ratio_min > 0)", zeros, 0.0, 0.0, R::AtMost),
       Check::make("band at dt/2 relative to dt", runs[1].band(), runs[0].band(), 0.2, R::RelWithin)}));
}

void study_thm11_lambda1(StudyContext& ctx) {
  const double alpha = ctx.cfg.alpha;
  const AlphaParam params(alpha, 2);
  const SimConfig base = ctx.sim(500'000, 1e-3);
  const Domain b1 = paper_domain("disc", 1.0), b2 = paper_domain("disc", 2.0);

  struct Run {
    std::string domain;
    Point start;
    Lambda1Estimate est;
  };
  std::vector<Run> runs;
  auto run = [&](const std::string& name, const Domain& d, Point x, std::uint64_t k) {
    SimConfig c = base;
    c.seed = derive_seed(base.seed, k);
    runs.push_back({name, x, estimate_lambda1(d, params, {x}, {}, c)});
  };
  run("B(0,1)", b1, {0.0, 0.0}, 0);
  run("B(0,1)", b1, {0.4, 0.0}, 1);
  run("B(0,2)", b2, {0.0, 0.0}, 2);

  CsvTable est({"domain", "x1", "x2", "lambda1", "stderr", "t_first", "t_last"});
  CsvTable curves({"domain", "x1", "x2", "t", "survival"});
  SvgPlot plot("survival on the fitting window", "t", "P(t < tau)", false, true);
  for (const auto& r : runs) {
    est.add_row({r.domain, r.start[0], r.start[1], r.est.lambda1, r.est.std_error, r.est.t_grid.front(),
                 r.est.t_grid.back()});
    std::vector<double> t, s;
    for (const auto& p : r.est.curves.front()) {
      curves.add_row({r.domain, r.start[0], r.start[1], p.t, p.survival});
      t.push_back(p.t);
      s.push_back(p.survival);
    }
    plot.add_series(r.domain + " from " + point_label(r.start), t, s);
  }
  ctx.write_csv("lambda1.csv", est);
  ctx.write_csv("lambda1_survival.csv", curves);
  ctx.write_svg("lambda1_survival.svg", plot);

  const auto& a = runs[0].est;
  const auto& b = runs[1].est;
  const double joint = std::hypot(a.std_error, b.std_error);
  const double lam_min = std::min({a.lambda1, b.lambda1, runs[2].est.lambda1});
  ctx.add(Verdict::from_checks(
      11, "lambda1_consistency",
      {Check::make("|lambda1 from (0,0) - from (0.4,0)| / joint stderr", std::abs(a.lambda1 - b.lambda1) / joint, 2.0,
                   0.0, R::AtMost),
       Check::make("lambda1(B(0,2)) / lambda1(B(0,1))", runs[2].est.lambda1 / a.lambda1, std::pow(2.0, -alpha), 0.1,
                   R::RelWithin),
       Check::make("smallest lambda1 estimate (positive)", lam_min, 1e-12, 0.0, R::AtLeast)}));
}

void study_thm16_four_squares(StudyContext& ctx) {
  const AlphaParam params(ctx.cfg.alpha, 2);
  const Domain dom = paper_domain("four_squares");
  const SimConfig base = ctx.sim(1'000'000, 1e-3);
  BoundGrid grid;
  grid.times = ctx.cfg.reals("times", {0.25, 0.5, 1.0});
  std::sort(grid.times.begin(), grid.times.end());
  grid.method = KernelMethod::Bridge;
  // A1 -> A4 first, then pairs with |i - j| <= 2.
  grid.pairs = {{{0.0, 0.0}, {6.0, 3.0}}, {{0.0, 0.0}, {3.0, 0.0}}, {{3.0, 0.0}, {3.0, 3.0}}, {{0.0, 0.0}, {3.0, 3.0}}};
  const std::vector<std::string> names = {"A1-A4", "A1-A2", "A2-A3", "A1-A3"};

  const BoundDiagnostics diag = bound_ratio_diagnostics(dom, params, grid, base);
  CsvTable table(bound_header());
  bound_rows(table, dom, diag, base.dt);
  ctx.write_csv("four_squares.csv", table);

  const auto series = by_pair(diag, grid.pairs.size());
  std::vector<double> anomalous, anomalous_t_ratio;
  for (const BoundEntry* e : series[0]) {
    anomalous.push_back(e->estimate.value);
    anomalous_t_ratio.push_back(e->ratio / e->estimate.t);
  }
  ctx.report.details["A1-A4 ratio to t w w p"] = anomalous_t_ratio;
  const double slope = loglog_slope(grid.times, anomalous, grid.times.size());

  SvgPlot decay("A1 to A4: estimate against t", "t", "p_D(t,x,y)", true, true);
  decay.add_series("bridge estimate", grid.times, anomalous, false, true);
  if (std::isfinite(slope)) {
    decay.add_reference("t^3 through the last point", anomalous.back() / std::pow(grid.times.back(), 3.0), 3.0);
  }
  ctx.write_svg("four_squares_t3.svg", decay);
  BoundDiagnostics within = diag;
  within.entries.clear();
  within.ratio_min = std::numeric_limits<double>::infinity();
  within.ratio_max = 0.0;
  for (std::size_t i = 0; i < diag.entries.size(); ++i) {
    if (i % grid.pairs.size() == 0) continue;
    within.entries.push_back(diag.entries[i]);
    within.ratio_min = std::min(within.ratio_min, diag.entries[i].ratio);
    within.ratio_max = std::max(within.ratio_max, diag.entries[i].ratio);
  }
  ctx.write_svg("four_squares_ratio.svg", ratio_plot("pairs with |i-j| <= 2", within, grid.pairs.size() - 1));

  std::vector<Check> checks;
  checks.push_back(Check::make("A1-A4 slope of log p vs log t", slope, 3.0, 0.4, R::AbsWithin));
  for (std::size_t k = 1; k < series.size(); ++k) {
    std::vector<double> ratio;
    for (const BoundEntry* e : series[k]) ratio.push_back(e->ratio);
    checks.push_back(Check::make(names[k] + " slope of log ratio vs log t", loglog_slope(grid.times, ratio, grid.times.size()),
                                 0.0, 0.3, R::AbsWithin));
  }
  // Propagated standard error of the A1-A4 slope and the slope on each
  // segment of the time grid.
  const std::vector<double> u = logs(grid.times);
  double u_mean = 0.0, suu = 0.0, var = 0.0;
  for (double v : u) u_mean += v / static_cast<double>(u.size());
  for (double v : u) suu += (v - u_mean) * (v - u_mean);
  std::string segments;
  for (std::size_t m = 0; m < series[0].size(); ++m) {
    const auto& est = series[0][m]->estimate;
    var += std::pow((u[m] - u_mean) / suu, 2) * std::pow(est.std_error / est.value, 2);
    if (m > 0) {
      segments += (m > 1 ? ", " : "") +
                  format_number(std::log(anomalous[m] / anomalous[m - 1]) / (u[m] - u[m - 1]));
    }
  }
  ctx.add(Verdict::from_checks(8, "anomalous_t3_decay", std::move(checks),
                               "A1-A4 slope stderr " + format_number(std::sqrt(var)) + ", segment slopes " +
                                   segments));
}

namespace {

// Shared pipeline of the two lower-bound failure examples.
void lower_bound_failure(StudyContext& ctx, const std::string& domain_name, Point x, Point y, const std::string& id) {
  const AlphaParam params(ctx.cfg.alpha, 2);
  const Domain dom = paper_domain(domain_name);
  const SimConfig base = ctx.sim(200'000, 1e-3);
  BoundGrid grid;
  grid.times = ctx.cfg.reals("times", {0.25, 0.5, 1.0});
  std::sort(grid.times.begin(), grid.times.end());
  grid.method = KernelMethod::Bridge;
  grid.pairs = {{x, y}};
  const BoundDiagnostics diag = bound_ratio_diagnostics(dom, params, grid, base);

  CsvTable table({"t", "estimate", "stderr", "hits", "estimate_over_t2", "estimate_over_t3"});
  std::vector<double> est;
  for (const auto& e : diag.entries) {
    const double t = e.estimate.t;
    est.push_back(e.estimate.value);
    table.add_row({t, e.estimate.value, e.estimate.std_error, e.estimate.hits, e.estimate.value / (t * t),
                   e.estimate.value / (t * t * t)});
  }
  ctx.write_csv(id + ".csv", table);
  const double slope = loglog_slope(grid.times, est, 2);
  SvgPlot plot(domain_name + ": p_D(t,x,y) against t", "t", "estimate", true, true);
  plot.add_series("bridge estimate", grid.times, est, false, true);
  if (est.back() > 0.0) {
    plot.add_reference("t^2 (lower-bound shape)", est.back() / std::pow(grid.times.back(), 2.0), 2.0);
    plot.add_reference("t^3", est.back() / std::pow(grid.times.back(), 3.0), 3.0);
  }
  ctx.write_svg(id + ".svg", plot);
  ctx.add(Verdict::from_checks(0, id,
                               {Check::make("slope of log p vs log t (t^2 lower bound would give 2)", slope, 2.0, 0.0,
                                            R::AtLeast)},
                               "upper bound c t^3 rules out the t^2 lower bound"));
}

}  // namespace

void study_ex61_lshape(StudyContext& ctx) {
  lower_bound_failure(ctx, "nested_channel_6_1", {0.0, 0.0}, {4.0, 4.0}, "ex61_lshape");
}

void study_ex62_tilted(StudyContext& ctx) {
  lower_bound_failure(ctx, "tilted_rect_6_2", {-4.0, -4.0}, {4.0, 4.0}, "ex62_tilted");
}

void study_ex63_diagonal(StudyContext& ctx) {
  const AlphaParam params(ctx.cfg.alpha, 2);
  const Domain dom = paper_domain("diagonal_balls_6_3");
  const SimConfig base = ctx.sim(1'000'000, 1e-3);
  const double t = 1.0;
  const Point start{1.1, 1.1};
  const Point other{-1.1, -1.1};

  const auto report = check_irreducible(dom, default_spacing(dom));

  // Cross-component survivors under refinement (common seed).
  CsvTable cross({"dt", "t", "n_paths", "survivors", "cross_hits", "cross_rate"});
  std::vector<double> rates;
  std::vector<std::int64_t> cross_hits;
  for (double dt : {base.dt, 0.5 * base.dt}) {
    SimConfig c = base;
    c.dt = dt;
    c.t_end = t;
    const Ensemble e = simulate_ensemble(params, start, c, &dom, {t});
    const double rate = survivor_fraction_where(e, 0, [&](std::span<const double> z) {
      return std::hypot(z[0] - other[0], z[1] - other[1]) < 1.0;
    });
    const auto hits = static_cast<std::int64_t>(std::llround(rate * static_cast<double>(e.n_paths)));
    rates.push_back(rate);
    cross_hits.push_back(hits);
    cross.add_row({dt, t, e.n_paths, e.survivors_at(0), hits, rate});
  }
  ctx.write_csv("ex63_cross.csv", cross);
  const double floor = 1.0 / static_cast<double>(base.n_paths);
  const double factor = rates[0] / std::max(rates[1], floor);

  // Comparability inside one ball, same pairs as on the unit disc.
  SimConfig cb = base;
  cb.n_paths = std::max<std::int64_t>(base.n_paths / 10, 1);
  cb.seed = derive_seed(base.seed, 7);
  BoundGrid grid;
  grid.times = {0.1, 0.25, 0.5};
  grid.method = KernelMethod::Bridge;
  const std::vector<std::pair<Point, Point>> unit_pairs = {
      {{0.0, 0.0}, {0.0, 0.0}},   {{0.0, 0.0}, {0.5, 0.0}},  {{0.0, 0.0}, {0.98, 0.0}},  {{0.5, 0.0}, {-0.5, 0.0}},
      {{0.98, 0.0}, {0.9, 0.0}},  {{0.0, 0.5}, {0.0, -0.95}}, {{0.35, 0.35}, {-0.6, 0.6}}, {{0.98, 0.0}, {0.6, 0.6}}};
  for (const auto& [x, y] : unit_pairs) {
    grid.pairs.push_back({{x[0] + start[0], x[1] + start[1]}, {y[0] + start[0], y[1] + start[1]}});
  }
  const BoundDiagnostics diag = bound_ratio_diagnostics(dom, params, grid, cb);
  CsvTable table(bound_header());
  bound_rows(table, dom, diag, cb.dt);
  ctx.write_csv("ex63_same_component.csv", table);
  ctx.write_svg("ex63_ratio.svg", ratio_plot("ball around (1.1,1.1)", diag, grid.pairs.size()));

  SvgPlot plot("cross-component survivors at t=1", "dt", "fraction of paths", true, true);
  plot.add_series("cross rate", {base.dt, 0.5 * base.dt}, rates, true, true);
  ctx.write_svg("ex63_cross.svg", plot);

  ctx.add(Verdict::from_checks(
      9, "cross_component_vanishing",
      {Check::make("rook components", static_cast<double>(report.n_components), 2.0, 0.0, R::AbsWithin),
       Check::make("cross rate(dt) / cross rate(dt/2)", factor, 3.0, 0.0, R::AtLeast),
       Check::make("same-component band", diag.band(), 50.0, 0.0, R::AtMost),
       Check::make("same-component zero estimates", static_cast<double>(zero_entries(diag)), 0.0, 0.0, R::AtMost)},
      "cross hits " + std::to_string(cross_hits[0]) + " at dt and " + std::to_string(cross_hits[1]) + " at dt/2 of " +
          std::to_string(base.n_paths) + " paths"));
}

// ---- connectivity ---------------------------------------------------------------

namespace {

// Exhaustive rook-move search: every occupied cell on the same row or column
// is a neighbour.
std::vector<std::int64_t> bfs_labels(std::int64_t nx, std::int64_t ny, const std::vector<std::uint8_t>& occ) {
  std::vector<std::int64_t> label(nx * ny, -1);
  for (std::int64_t s = 0; s < nx * ny; ++s) {
    if (!occ[s] || label[s] >= 0) continue;
    std::queue<std::int64_t> q;
    q.push(s);
    label[s] = s;
    while (!q.empty()) {
      const std::int64_t c = q.front();
      q.pop();
      const std::int64_t cx = c % nx, cy = c / nx;
      for (std::int64_t i = 0; i < nx; ++i) {
        const std::int64_t n = cy * nx + i;
        if (occ[n] && label[n] < 0) {
          label[n] = s;
          q.push(n);
        }
      }
      for (std::int64_t j = 0; j < ny; ++j) {
        const std::int64_t n = j * nx + cx;
        if (occ[n] && label[n] < 0) {
          label[n] = s;
          q.push(n);
        }
      }
    }
  }
  return label;
}

bool same_partition(const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b) {
  std::map<std::int64_t, std::int64_t> ab, ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((a[i] < 0) != (b[i] < 0)) return false;
    if (a[i] < 0) continue;
    auto [it, fresh] = ab.emplace(a[i], b[i]);
    if (!fresh && it->second != b[i]) return false;
    auto [jt, fresh2] = ba.emplace(b[i], a[i]);
    if (!fresh2 && jt->second != a[i]) return false;
  }
  return true;
}

}  // namespace

void study_irreducibility_suite(StudyContext& ctx) {
  const std::uint64_t seed = ctx.cfg.seed();
  const std::int64_t n_grids = ctx.cfg.integer("grids", 50);
  const std::int64_t n_pairs = ctx.cfg.integer("n_pairs", 10'000);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  CsvTable grids({"grid", "density", "occupied", "components", "oracle_components", "match"});
  std::int64_t mismatches = 0;
  for (std::int64_t g = 0; g < n_grids; ++g) {
    const double density = std::exp(std::log(0.003) + unit(rng) * std::log(0.05 / 0.003));
    std::vector<std::uint8_t> occ(64 * 64);
    std::int64_t occupied = 0;
    for (auto& o : occ) {
      o = unit(rng) < density ? 1 : 0;
      occupied += o;
    }
    const RookGrid rg = rook_components({64, 64}, occ, 1.0, {0.0, 0.0});
    const auto oracle = bfs_labels(64, 64, occ);
    std::int64_t oracle_count = 0;
    for (std::int64_t i = 0; i < 64 * 64; ++i) oracle_count += oracle[i] == i ? 1 : 0;
    const bool match = same_partition(rg.labels, oracle);
    mismatches += match ? 0 : 1;
    grids.add_row({g, density, occupied, rg.n_components, oracle_count, match});
  }
  ctx.write_csv("rook_oracle.csv", grids);

  const std::map<std::string, std::int64_t> expected_components = {
      {"disc", 1},           {"parallel_balls", 1},     {"rounded_square", 1},       {"four_squares", 1},
      {"nested_channel_6_1", 1}, {"tilted_rect_6_2", 1}, {"diagonal_balls_6_3", 2}};
  CsvTable catalog({"domain", "h", "components", "expected_components"});
  std::int64_t wrong_counts = 0;
  for (const auto& [name, want] : expected_components) {
    const Domain d = paper_domain(name);
    const auto r = check_irreducible(d, default_spacing(d));
    wrong_counts += r.n_components == want ? 0 : 1;
    catalog.add_row({name, r.h, r.n_components, want});
  }
  ctx.write_csv("catalog_components.csv", catalog);

  CsvTable hg({"domain", "gamma", "pairs_tested", "holds", "x1", "x2", "y1", "y2", "r", "failing_step",
               "counterexample_verified"});
  std::int64_t missed = 0, false_alarms = 0;
  std::uint64_t k = 0;
  auto run = [&](const std::string& name, double gamma, bool should_fail) {
    const Domain d = paper_domain(name);
    const auto r = check_hgamma_domain(d, gamma, n_pairs, derive_seed(seed, k++));
    bool verified = false;
    if (r.counterexample) {
      const auto& cx = *r.counterexample;
      verified = !check_hgamma_pair(d, gamma, cx.x, cx.y, cx.r).holds;
      hg.add_row({name, gamma, r.pairs_tested, r.hgamma_holds, cx.x[0], cx.x[1], cx.y[0], cx.y[1], cx.r,
                  cx.failing_step, verified});
    } else {
      hg.add_row({name, gamma, r.pairs_tested, r.hgamma_holds, kNaN, kNaN, kNaN, kNaN, kNaN, -1, false});
    }
    if (should_fail && !verified) ++missed;
    if (!should_fail && !r.hgamma_holds) ++false_alarms;
  };
  for (const char* name : {"four_squares", "diagonal_balls_6_3", "nested_channel_6_1", "tilted_rect_6_2"}) {
    for (double gamma : {1.0, 0.1}) run(name, gamma, true);
  }
  for (const char* name : {"disc", "rounded_square"}) run(name, 1.0, false);
  ctx.write_csv("hgamma.csv", hg);

  ctx.add(Verdict::from_checks(
      10, "connectivity_correctness",
      {Check::make("random grids differing from the BFS oracle", static_cast<double>(mismatches), 0.0, 0.0, R::AtMost),
       Check::make("catalog component counts wrong", static_cast<double>(wrong_counts), 0.0, 0.0, R::AtMost),
       Check::make("H_gamma sets without a verified counterexample", static_cast<double>(missed), 0.0, 0.0,
                   R::AtMost),
       Check::make("disc/rounded_square falsified at gamma=1", static_cast<double>(false_alarms), 0.0, 0.0,
                   R::AtMost)}));
}

// ---- cross-method consistency ---------------------------------------------------

void study_kernel_consistency(StudyContext& ctx) {
  const AlphaParam params(ctx.cfg.alpha, 2);
  const Domain disc = paper_domain("disc");
  const SimConfig base = ctx.sim(200'000, 1e-3);
  struct Target {
    double t;
    Point x, y;
  };
  const std::vector<Target> testbed = {{0.1, {0.0, 0.0}, {0.0, 0.0}},    {0.1, {0.0, 0.0}, {0.3, 0.0}},
                                       {0.25, {0.2, 0.1}, {-0.3, 0.2}},  {0.25, {0.0, 0.0}, {0.5, 0.0}},
                                       {0.5, {0.0, 0.0}, {0.3, 0.0}},    {0.5, {0.5, 0.0}, {-0.2, 0.6}}};

  CsvTable table({"t", "x1", "x2", "y1", "y2", "kde", "kde_se", "bridge", "bridge_se", "sub", "sub_se",
                  "z_kde_bridge", "z_kde_sub", "z_bridge_sub"});
  std::vector<Check> checks;
  std::uint64_t k = 0;
  for (const auto& tg : testbed) {
    SimConfig c = base;
    c.seed = derive_seed(base.seed, k++);
    const auto kde = estimate_pd_survivor_kde(disc, params, tg.t, tg.x, tg.y, c);
    c.seed = derive_seed(base.seed, k++);
    const auto bridge = estimate_pd_bridge(disc, params, tg.t, tg.x, tg.y, c);
    c.seed = derive_seed(base.seed, k++);
    const auto sub = estimate_pd_subtraction(disc, params, tg.t, tg.x, tg.y, c);
    auto z = [](const KernelEstimate& a, const KernelEstimate& b) {
      return std::abs(a.value - b.value) / std::hypot(a.std_error, b.std_error);
    };
    const double z1 = z(kde, bridge), z2 = z(kde, sub), z3 = z(bridge, sub);
    table.add_row({tg.t, tg.x[0], tg.x[1], tg.y[0], tg.y[1], kde.value, kde.std_error, bridge.value,
                   bridge.std_error, sub.value, sub.std_error, z1, z2, z3});
    checks.push_back(Check::make("max pairwise |diff| / joint stderr at t=" + format_number(tg.t) + " " +
                                     pair_label(tg.x, tg.y),
                                 std::max({z1, z2, z3}), 3.0, 0.0, R::AtMost));
  }
  ctx.write_csv("kernel_consistency.csv", table);
  ctx.add(Verdict::from_checks(12, "cross_method_consistency", std::move(checks)));
}

}  // namespace cylstable::detail
