// Command-line front end: single-shot estimators and the experiment runner.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cylstable/connectivity.hpp"
#include "cylstable/domain.hpp"
#include "cylstable/error.hpp"
#include "cylstable/experiments.hpp"
#include "cylstable/frac_laplacian.hpp"
#include "cylstable/heatkernel.hpp"
#include "cylstable/output.hpp"
#include "cylstable/simulator.hpp"

using namespace cylstable;
using nlohmann::json;

namespace {

struct SimOptions {
  std::string domain = "disc";
  double alpha = 1.0;
  std::int64_t paths = 100'000;
  double dt = 1e-3;
  std::uint64_t seed = 1;
  int workers = 0;

  void attach(CLI::App* app) {
    app->add_option("--domain", domain, "catalog id or JSON descriptor path")->capture_default_str();
    app->add_option("--alpha", alpha, "stability index in (0,2)")->capture_default_str();
    app->add_option("--paths", paths, "number of paths")->capture_default_str();
    app->add_option("--dt", dt, "time step")->capture_default_str();
    app->add_option("--seed", seed, "random seed")->capture_default_str();
    app->add_option("--workers", workers, "threads (0 = OpenMP default)")->capture_default_str();
  }

  SimConfig config() const {
    SimConfig c;
    c.n_paths = paths;
    c.dt = dt;
    c.seed = seed;
    c.workers = workers;
    return c;
  }

  json params_json() const {
    return {{"domain", domain}, {"alpha", alpha}, {"paths", paths}, {"dt", dt}, {"seed", seed}};
  }
};

Point parse_point(const std::string& s) {
  Point p;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const std::size_t next = s.find(',', pos);
    const std::string part = s.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
    try {
      std::size_t used = 0;
      p.push_back(std::stod(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "cannot parse point '" + s + "'");
    }
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  return p;
}

void print(const json& j) { std::cout << j.dump(2) << '\n'; }

void print_verdicts(const ExperimentReport& r) {
  for (const auto& v : r.verdicts) {
    std::printf("[%s] criterion %d %s: %s\n", v.pass ? "PASS" : "FAIL", v.criterion, v.id.c_str(),
                v.summary().c_str());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cylindrical alpha-stable process: killed kernels, exit times and connectivity"};
  app.require_subcommand(1);

  // ---- connectivity
  std::string conn_domain = "disc";
  double conn_h = 0.0;
  auto* irr = app.add_subcommand("check-irreducible", "rook-connectivity verdict");
  irr->add_option("--domain", conn_domain)->capture_default_str();
  irr->add_option("--cell", conn_h, "cell spacing (default: min feature / 8)");

  double gamma = 1.0;
  std::int64_t n_pairs = 10'000;
  std::uint64_t conn_seed = 1;
  auto* hg = app.add_subcommand("check-hgamma", "search for H_gamma counterexamples");
  hg->add_option("--domain", conn_domain)->capture_default_str();
  hg->add_option("--gamma", gamma)->capture_default_str();
  hg->add_option("--pairs", n_pairs)->capture_default_str();
  hg->add_option("--seed", conn_seed)->capture_default_str();

  // ---- fractional Laplacian
  double fl_p = 0.5, fl_alpha = 1.0, fl_x = 1.0;
  auto* fl = app.add_subcommand("fraclap", "C(p, alpha) and the fractional Laplacian of max(x,0)^p");
  fl->add_option("--p", fl_p)->capture_default_str();
  fl->add_option("--alpha", fl_alpha)->capture_default_str();
  fl->add_option("--x", fl_x)->capture_default_str();

  // ---- simulator
  SimOptions sim;
  std::string x_text = "0,0", y_text = "0,0";
  double t = 1.0, mesh_h = 0.1;
  std::string out_path;

  auto* surv = app.add_subcommand("survival", "P_x(t < tau_D)");
  sim.attach(surv);
  surv->add_option("--x", x_text)->capture_default_str();
  surv->add_option("--t", t)->capture_default_str();

  auto* exit_time = app.add_subcommand("exit-time", "mean exit time E_x tau_D");
  sim.attach(exit_time);
  exit_time->add_option("--x", x_text)->capture_default_str();

  auto* exit_dist = app.add_subcommand("exit-dist", "histogram of exit positions");
  sim.attach(exit_dist);
  exit_dist->add_option("--x", x_text)->capture_default_str();
  exit_dist->add_option("--cell", mesh_h, "histogram cell size")->capture_default_str();
  exit_dist->add_option("--out", out_path, "CSV of cell counts");

  auto* green = app.add_subcommand("green", "occupation-time Green function estimate");
  sim.attach(green);
  green->add_option("--x", x_text)->capture_default_str();
  green->add_option("--cell", mesh_h, "mesh cell size")->capture_default_str();
  green->add_option("--out", out_path, "CSV of cell densities");

  // ---- heat kernel
  std::string method = "bridge";
  double bandwidth = 0.0;
  auto* hk = app.add_subcommand("heatkernel", "estimate p_D(t,x,y)");
  sim.attach(hk);
  hk->add_option("--method", method, "kde, bridge or sub")->capture_default_str();
  hk->add_option("--t", t)->capture_default_str();
  hk->add_option("--x", x_text)->capture_default_str();
  hk->add_option("--y", y_text)->capture_default_str();
  hk->add_option("--bandwidth", bandwidth, "kernel half-width (default: rule of thumb)");

  std::vector<std::string> starts;
  std::vector<double> t_grid;
  std::string out_dir = "out";
  auto* lam = app.add_subcommand("lambda1", "principal eigenvalue from survival decay");
  sim.attach(lam);
  lam->add_option("--x", starts, "start point, repeatable")->default_val(std::vector<std::string>{"0,0"});
  lam->add_option("--t-grid", t_grid, "fit times (default: automatic)")->delimiter(',');
  lam->add_option("--out", out_dir)->capture_default_str();

  std::vector<double> times{0.1, 0.25, 0.5};
  std::vector<std::string> pairs;
  auto* br = app.add_subcommand("bound-ratio", "estimates against the boundary-weighted free kernel");
  sim.attach(br);
  br->add_option("--times", times)->delimiter(',')->capture_default_str();
  br->add_option("--pair", pairs, "x1,x2:y1,y2 (repeatable)")->required();
  br->add_option("--method", method)->capture_default_str();
  br->add_option("--out", out_dir)->capture_default_str();

  // ---- experiments
  std::string exp_name, config_path, exp_out;
  auto* ex = app.add_subcommand("experiment", "run a named experiment; exit code 0 iff all verdicts pass");
  ex->add_option("name", exp_name, "catalog id")->required();
  ex->add_option("--config", config_path, "JSON config");
  ex->add_option("--out", exp_out, "output directory");

  auto* list = app.add_subcommand("list", "list experiments and catalog domains");

  CLI11_PARSE(app, argc, argv);

  try {
    if (irr->parsed()) {
      const Domain d = load_domain(conn_domain);
      print(check_irreducible(d, conn_h > 0.0 ? conn_h : default_spacing(d)).to_json());
    } else if (hg->parsed()) {
      print(check_hgamma_domain(load_domain(conn_domain), gamma, n_pairs, conn_seed).to_json());
    } else if (fl->parsed()) {
      const auto reduced = ctest_constant_detailed(fl_p, fl_alpha);
      const auto direct = frac_lap_power_direct(fl_p, fl_alpha, fl_x);
      print({{"p", fl_p},
             {"alpha", fl_alpha},
             {"C", reduced.value},
             {"C_abs_error", reduced.abs_error},
             {"x", fl_x},
             {"value", frac_lap_power(fl_p, fl_alpha, fl_x)},
             {"direct", direct.value},
             {"direct_abs_error", direct.abs_error}});
    } else if (surv->parsed()) {
      const auto e = survival_probability(load_domain(sim.domain), AlphaParam(sim.alpha, 2), parse_point(x_text), t,
                                          sim.config());
      print({{"survival", e.value}, {"stderr", e.std_error}, {"t", t}, {"x", parse_point(x_text)},
             {"params", sim.params_json()}});
    } else if (exit_time->parsed()) {
      const Point x = parse_point(x_text);
      const auto e = mean_exit_time(load_domain(sim.domain), AlphaParam(sim.alpha, static_cast<int>(x.size())), x,
                                    sim.config());
      print({{"mean_exit_time", e.value}, {"stderr", e.std_error}, {"horizon", e.horizon},
             {"killed_fraction", e.killed_fraction}, {"params", sim.params_json()}});
    } else if (exit_dist->parsed() || green->parsed()) {
      const Point x = parse_point(x_text);
      const Domain d = load_domain(sim.domain);
      const AlphaParam params(sim.alpha, static_cast<int>(x.size()));
      const bool hist = exit_dist->parsed();
      // Exits land outside D, so the histogram mesh gets a margin.
      const CellMesh mesh = CellMesh::covering(d.bbox(), mesh_h, hist ? 1.0 : 0.0);
      CsvTable table(hist ? std::vector<std::string>{"cell", "x1", "x2", "count"}
                          : std::vector<std::string>{"cell", "x1", "x2", "green"});
      json summary;
      if (hist) {
        const auto h = exit_distribution(d, params, x, sim.config(), mesh);
        for (std::int64_t c = 0; c < mesh.cell_count(); ++c) {
          if (h.counts[c] == 0) continue;
          const Point m = mesh.cell_center(c);
          table.add_row({c, m[0], m.size() > 1 ? m[1] : 0.0, h.counts[c]});
        }
        summary = {{"n_killed", h.n_killed}, {"outside_mesh", h.outside_mesh}, {"horizon", h.horizon},
                   {"median_second_displacement", h.median_second_displacement}};
      } else {
        const auto g = occupation_green(d, params, x, sim.config(), mesh);
        for (std::int64_t c = 0; c < mesh.cell_count(); ++c) {
          if (g.mass[c] == 0.0) continue;
          const Point m = mesh.cell_center(c);
          table.add_row({c, m[0], m.size() > 1 ? m[1] : 0.0, g.green_density(c)});
        }
        summary = {{"total_mass", g.total_mass}, {"outside_mesh", g.outside_mesh}, {"horizon", g.horizon}};
      }
      if (!out_path.empty()) {
        table.write(out_path);
        summary["csv"] = out_path;
      }
      summary["params"] = sim.params_json();
      print(summary);
    } else if (hk->parsed()) {
      const Domain d = load_domain(sim.domain);
      const Point x = parse_point(x_text), y = parse_point(y_text);
      const AlphaParam params(sim.alpha, static_cast<int>(x.size()));
      std::optional<double> bw;
      if (bandwidth > 0.0) bw = bandwidth;
      try {
        KernelEstimate e;
        switch (parse_kernel_method(method)) {
          case KernelMethod::SurvivorKde: e = estimate_pd_survivor_kde(d, params, t, x, y, sim.config(), bw); break;
          case KernelMethod::Bridge: e = estimate_pd_bridge(d, params, t, x, y, sim.config(), bw); break;
          case KernelMethod::Subtraction: e = estimate_pd_subtraction(d, params, t, x, y, sim.config()); break;
        }
        json j = e.to_json();
        j["params"] = sim.params_json();
        print(j);
      } catch (const Error& err) {
        if (err.code() != ErrorCode::ZeroSurvivors) throw;
        // No survivor reached y; say whether the rook classes allow it at all.
        const auto grid = rook_components(d, default_spacing(d));
        print({{"error", err.what()},
               {"same_rook_class", same_class(grid, d, x, y)},
               {"components", grid.n_components},
               {"params", sim.params_json()}});
        return 2;
      }
    } else if (lam->parsed()) {
      const Domain d = load_domain(sim.domain);
      std::vector<Point> xs;
      for (const auto& s : starts) xs.push_back(parse_point(s));
      const auto est = estimate_lambda1(d, AlphaParam(sim.alpha, static_cast<int>(xs.front().size())), xs, t_grid,
                                        sim.config());
      CsvTable table({"start", "t", "survival"});
      SvgPlot plot("survival decay in " + d.name(), "t", "P(t < tau)", false, true);
      for (std::size_t a = 0; a < est.curves.size(); ++a) {
        std::vector<double> tt, ss;
        for (const auto& p : est.curves[a]) {
          table.add_row({static_cast<std::int64_t>(a), p.t, p.survival});
          tt.push_back(p.t);
          ss.push_back(p.survival);
        }
        plot.add_series(starts[a], tt, ss);
      }
      std::filesystem::create_directories(out_dir);
      table.write(std::filesystem::path(out_dir) / "lambda1.csv");
      plot.write(std::filesystem::path(out_dir) / "lambda1.svg");
      json j = est.to_json();
      j["params"] = sim.params_json();
      print(j);
    } else if (br->parsed()) {
      const Domain d = load_domain(sim.domain);
      BoundGrid grid;
      grid.times = times;
      grid.method = parse_kernel_method(method);
      for (const auto& s : pairs) {
        const auto colon = s.find(':');
        if (colon == std::string::npos) throw Error(ErrorCode::InvalidArgument, "pair must look like x1,x2:y1,y2");
        grid.pairs.push_back({parse_point(s.substr(0, colon)), parse_point(s.substr(colon + 1))});
      }
      const AlphaParam params(sim.alpha, static_cast<int>(grid.pairs.front().first.size()));
      const auto diag = bound_ratio_diagnostics(d, params, grid, sim.config());
      CsvTable table({"t", "pair", "estimate", "stderr", "w_x", "w_y", "free_kernel", "ratio"});
      SvgPlot plot("estimate / (w_x w_y p) in " + d.name(), "t", "ratio", true, true);
      std::vector<std::vector<double>> rt(grid.pairs.size()), rr(grid.pairs.size());
      for (std::size_t i = 0; i < diag.entries.size(); ++i) {
        const auto& e = diag.entries[i];
        const std::size_t k = i % grid.pairs.size();
        table.add_row({e.estimate.t, pairs[k], e.estimate.value, e.estimate.std_error, e.w_x, e.w_y, e.free_kernel,
                       e.ratio});
        rt[k].push_back(e.estimate.t);
        rr[k].push_back(e.ratio);
      }
      for (std::size_t k = 0; k < pairs.size(); ++k) plot.add_series(pairs[k], rt[k], rr[k]);
      if (diag.ratio_min > 0.0) plot.add_band("band", diag.ratio_min, diag.ratio_max);
      std::filesystem::create_directories(out_dir);
      table.write(std::filesystem::path(out_dir) / "bound_ratio.csv");
      plot.write(std::filesystem::path(out_dir) / "bound_ratio.svg");
      print({{"ratio_min", diag.ratio_min}, {"ratio_max", diag.ratio_max}, {"band", diag.band()},
             {"params", sim.params_json()}});
    } else if (ex->parsed()) {
      json j = json::object();
      if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw Error(ErrorCode::ConfigError, "cannot open " + config_path);
        try {
          j = json::parse(in);
        } catch (const json::exception& e) {
          throw Error(ErrorCode::ConfigError, config_path + ": " + e.what());
        }
        if (!j.is_object()) throw Error(ErrorCode::ConfigError, "config must be a JSON object");
        if (j.contains("name") && j["name"] != exp_name) {
          throw Error(ErrorCode::ConfigError, "config names '" + j["name"].get<std::string>() + "', command line '" +
                                                  exp_name + "'");
        }
      }
      j["name"] = exp_name;
      if (!exp_out.empty()) j["output_dir"] = exp_out;
      if (!j.contains("output_dir")) j["output_dir"] = "out/" + exp_name;
      const auto report = run_experiment(ExperimentConfig::from_json(j));
      print_verdicts(report);
      std::printf("report: %s\n", (std::filesystem::path(j["output_dir"].get<std::string>()) / "report.json").c_str());
      return report.all_pass() ? 0 : 1;
    } else if (list->parsed()) {
      for (const auto& e : experiment_catalog()) {
        std::string crit;
        for (int c : e.criteria) crit += (crit.empty() ? "" : ",") + std::to_string(c);
        std::printf("%-22s criteria %-8s %s\n", e.name.c_str(), crit.c_str(), e.summary.c_str());
      }
      std::printf("domains:");
      for (const auto& n : catalog_names()) std::printf(" %s", n.c_str());
      std::printf("\n");
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
