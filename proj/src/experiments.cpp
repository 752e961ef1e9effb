#include "cylstable/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "cylstable/error.hpp"
#include "studies.hpp"

#ifndef CYLSTABLE_VERSION
#define CYLSTABLE_VERSION "unknown"
#endif

namespace cylstable {

using nlohmann::json;

std::string_view code_version() noexcept { return CYLSTABLE_VERSION; }

namespace {

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorCode::ConfigError, what); }

const json* lookup(const json& overrides, const char* key) {
  auto it = overrides.find(key);
  return it == overrides.end() ? nullptr : &*it;
}

using StudyFn = void (*)(detail::StudyContext&);

const std::map<std::string, StudyFn>& study_table() {
  static const std::map<std::string, StudyFn> table = {
      {"lemma31_constants", detail::study_lemma31_constants},
      {"kernel_oracles", detail::study_kernel_oracles},
      {"exit_scaling", detail::study_exit_scaling},
      {"survival_bound", detail::study_survival_bound},
      {"thm11_disc", detail::study_thm11_disc},
      {"thm11_lambda1", detail::study_thm11_lambda1},
      {"thm16_four_squares", detail::study_thm16_four_squares},
      {"ex61_lshape", detail::study_ex61_lshape},
      {"ex62_tilted", detail::study_ex62_tilted},
      {"ex63_diagonal", detail::study_ex63_diagonal},
      {"irreducibility_suite", detail::study_irreducibility_suite},
      {"kernel_consistency", detail::study_kernel_consistency},
  };
  return table;
}

}  // namespace

const std::vector<std::string>& override_keys() {
  static const std::vector<std::string> keys = {"paths", "dt",    "seed",    "workers", "times",  "alphas",
                                                "deltas", "gamma", "n_pairs", "grids",   "method", "bandwidth"};
  return keys;
}

const std::vector<CatalogEntry>& experiment_catalog() {
  static const std::vector<CatalogEntry> entries = {
      {"lemma31_constants", {1}, "sign and zero of C(p, alpha) for the power test function"},
      {"kernel_oracles", {2, 3, 4}, "density, sampler and kernel scaling oracles"},
      {"exit_scaling", {5}, "mean exit time of B(0,2) against B(0,1)"},
      {"survival_bound", {6, 0}, "boundary decay of survival and small-time exit probability"},
      {"thm11_disc", {7}, "two-sided comparability on the unit disc"},
      {"thm11_lambda1", {11}, "principal eigenvalue from survival decay"},
      {"thm16_four_squares", {8}, "t^3 decay between the outer squares"},
      {"ex61_lshape", {0}, "lower-bound failure in the nested channel"},
      {"ex62_tilted", {0}, "lower-bound failure in the tilted rectangle"},
      {"ex63_diagonal", {9}, "zero kernel between the diagonal balls"},
      {"irreducibility_suite", {10}, "rook components and H_gamma verdicts on the catalog"},
      {"kernel_consistency", {12}, "three kernel estimators on a common testbed"},
  };
  return entries;
}

const CatalogEntry& catalog_entry(const std::string& name) {
  for (const auto& e : experiment_catalog()) {
    if (e.name == name) return e;
  }
  std::string known;
  for (const auto& e : experiment_catalog()) known += (known.empty() ? "" : ", ") + e.name;
  config_error("unknown experiment '" + name + "' (known: " + known + ")");
}

// ---- config -------------------------------------------------------------------

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  if (!j.is_object()) config_error("experiment config must be a JSON object");
  ExperimentConfig cfg;
  for (const auto& [key, value] : j.items()) {
    if (key == "name") {
      if (!value.is_string()) config_error("'name' must be a string");
      cfg.name = value.get<std::string>();
    } else if (key == "alpha") {
      if (!value.is_number()) config_error("'alpha' must be a number");
      cfg.alpha = value.get<double>();
    } else if (key == "overrides") {
      if (!value.is_object()) config_error("'overrides' must be an object");
      cfg.overrides = value;
    } else if (key == "output_dir") {
      if (!value.is_string()) config_error("'output_dir' must be a string");
      cfg.output_dir = value.get<std::string>();
    } else {
      config_error("unknown config key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

json ExperimentConfig::to_json() const {
  return {{"name", name}, {"alpha", alpha}, {"overrides", overrides}, {"output_dir", output_dir.string()}};
}

void ExperimentConfig::validate() const {
  catalog_entry(name);
  if (!(alpha > 0.0 && alpha < 2.0)) config_error("alpha must lie in (0,2)");
  if (!overrides.is_object()) config_error("'overrides' must be an object");
  const auto& keys = override_keys();
  for (const auto& [key, value] : overrides.items()) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) config_error("unknown override '" + key + "'");
    if (key == "seed" || key == "paths" || key == "workers" || key == "n_pairs" || key == "grids") {
      if (!value.is_number_integer()) config_error("override '" + key + "' must be an integer");
      if (value.get<std::int64_t>() < 0) config_error("override '" + key + "' must be non-negative");
    } else if (key == "times" || key == "alphas" || key == "deltas") {
      if (!value.is_array() || value.empty()) config_error("override '" + key + "' must be a non-empty array");
      for (const auto& v : value) {
        if (!v.is_number() || !(v.get<double>() > 0.0)) {
          config_error("override '" + key + "' must hold positive numbers");
        }
      }
    } else if (key == "method") {
      if (!value.is_string()) config_error("override 'method' must be a string");
    } else if (!value.is_number() || !(value.get<double>() > 0.0)) {
      config_error("override '" + key + "' must be a positive number");
    }
  }
  if (paths(1) < 1) config_error("override 'paths' must be at least 1");
}

std::uint64_t ExperimentConfig::seed() const {
  const json* v = lookup(overrides, "seed");
  return v ? v->get<std::uint64_t>() : 1;
}

int ExperimentConfig::workers() const {
  const json* v = lookup(overrides, "workers");
  return v ? v->get<int>() : 0;
}

std::int64_t ExperimentConfig::paths(std::int64_t fallback) const { return integer("paths", fallback); }
double ExperimentConfig::dt(double fallback) const { return real("dt", fallback); }

double ExperimentConfig::real(const char* key, double fallback) const {
  const json* v = lookup(overrides, key);
  return v ? v->get<double>() : fallback;
}

std::int64_t ExperimentConfig::integer(const char* key, std::int64_t fallback) const {
  const json* v = lookup(overrides, key);
  return v ? v->get<std::int64_t>() : fallback;
}

std::vector<double> ExperimentConfig::reals(const char* key, std::vector<double> fallback) const {
  const json* v = lookup(overrides, key);
  return v ? v->get<std::vector<double>>() : fallback;
}

std::string ExperimentConfig::text(const char* key, std::string fallback) const {
  const json* v = lookup(overrides, key);
  return v ? v->get<std::string>() : fallback;
}

// ---- verdicts -----------------------------------------------------------------

Check Check::make(std::string name, double measured, double expected, double tolerance, Relation rel) {
  Check c{std::move(name), measured, expected, tolerance, rel, false};
  switch (rel) {
    case Relation::AbsWithin: c.pass = std::abs(measured - expected) <= tolerance; break;
    case Relation::RelWithin: c.pass = expected != 0.0 && std::abs(measured / expected - 1.0) <= tolerance; break;
    case Relation::AtMost: c.pass = measured <= expected; break;
    case Relation::AtLeast: c.pass = measured >= expected; break;
  }
  if (!std::isfinite(measured)) c.pass = false;
  return c;
}

std::string Check::describe() const {
  std::ostringstream o;
  o << name << " = " << format_number(measured);
  switch (relation) {
    case Relation::AbsWithin: o << " (want " << format_number(expected) << " +- " << format_number(tolerance) << ")"; break;
    case Relation::RelWithin:
      o << " (want " << format_number(expected) << " within " << format_number(100.0 * tolerance) << "%)";
      break;
    case Relation::AtMost: o << " (want <= " << format_number(expected) << ")"; break;
    case Relation::AtLeast: o << " (want >= " << format_number(expected) << ")"; break;
  }
  return o.str();
}

json Check::to_json() const {
  static const char* names[] = {"abs_within", "rel_within", "at_most", "at_least"};
  return {{"name", name},
          {"measured", measured},
          {"expected", expected},
          {"tolerance", tolerance},
          {"relation", names[static_cast<int>(relation)]},
          {"pass", pass}};
}

Verdict Verdict::from_checks(int criterion, std::string id, std::vector<Check> checks, std::string note) {
  if (checks.empty()) throw Error(ErrorCode::InvalidArgument, "verdict '" + id + "' has no checks");
  Verdict v;
  v.criterion = criterion;
  v.id = std::move(id);
  v.pass = std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
  v.measured = checks.front().measured;
  v.expected = checks.front().expected;
  v.tolerance = checks.front().tolerance;
  v.checks = std::move(checks);
  v.note = std::move(note);
  return v;
}

std::string Verdict::summary() const {
  std::string out;
  for (const auto& c : checks) {
    if (!out.empty()) out += "; ";
    out += (c.pass ? "" : "FAILED ") + c.describe();
  }
  if (!note.empty()) out += " (" + note + ")";
  return out;
}

json Verdict::to_json() const {
  json checks_json = json::array();
  for (const auto& c : checks) checks_json.push_back(c.to_json());
  json j = {{"criterion", criterion}, {"id", id},           {"pass", pass},     {"measured", measured},
            {"expected", expected},   {"tolerance", tolerance}, {"checks", checks_json}};
  if (!note.empty()) j["note"] = note;
  return j;
}

bool ExperimentReport::all_pass() const {
  return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
}

const Verdict* ExperimentReport::find(int criterion) const {
  for (const auto& v : verdicts) {
    if (v.criterion == criterion) return &v;
  }
  return nullptr;
}

json ExperimentReport::to_json() const {
  json vs = json::array();
  for (const auto& v : verdicts) vs.push_back(v.to_json());
  return {{"name", name},
          {"pass", all_pass()},
          {"verdicts", vs},
          {"provenance", provenance},
          {"artifacts", artifacts},
          {"details", details},
          {"runtime_seconds", runtime_seconds}};
}

// ---- running ------------------------------------------------------------------

namespace detail {

void StudyContext::write_csv(const std::string& file, const CsvTable& table) {
  table.write(cfg.output_dir / file);
  report.artifacts.push_back(file);
}

void StudyContext::write_svg(const std::string& file, const SvgPlot& plot) {
  const std::string rel = "plots/" + file;
  plot.write(cfg.output_dir / rel);
  report.artifacts.push_back(rel);
}

SimConfig StudyContext::sim(std::int64_t default_paths, double default_dt) {
  SimConfig s;
  s.n_paths = cfg.paths(default_paths);
  s.dt = cfg.dt(default_dt);
  s.seed = cfg.seed();
  s.workers = cfg.workers();
  s.validate();
  report.provenance["n_paths"] = s.n_paths;
  report.provenance["dt"] = s.dt;
  return s;
}

}  // namespace detail

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();
  ExperimentReport report;
  report.name = cfg.name;
  report.provenance = {{"seed", cfg.seed()},
                       {"alpha", cfg.alpha},
                       {"dt", nullptr},
                       {"n_paths", nullptr},
                       {"code_version", std::string(code_version())},
                       {"config", cfg.to_json()}};
  std::filesystem::create_directories(cfg.output_dir / "plots");

  detail::StudyContext ctx{cfg, report};
  try {
    study_table().at(cfg.name)(ctx);
  } catch (const Error& e) {
    throw Error(e.code(), "experiment '" + cfg.name + "': " + e.message());
  }

  const auto& expected = catalog_entry(cfg.name).criteria;
  for (int c : expected) {
    const auto n = std::count_if(report.verdicts.begin(), report.verdicts.end(),
                                 [c](const Verdict& v) { return v.criterion == c; });
    if (n != 1) {
      throw Error(ErrorCode::PreconditionViolated, "experiment '" + cfg.name + "' reported criterion " +
                                                       std::to_string(c) + " " + std::to_string(n) + " times");
    }
  }

  report.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  std::ofstream out(cfg.output_dir / "report.json");
  out << report.to_json().dump(2) << '\n';
  report.artifacts.push_back("report.json");
  return report;
}

}  // namespace cylstable
