#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace cylstable {

// Version string recorded in every report.
std::string_view code_version() noexcept;

// Named, config-driven study. Overrides accept only the keys listed in
// override_keys(); anything else is a ConfigError.
struct ExperimentConfig {
  std::string name;
  double alpha = 1.0;
  nlohmann::json overrides = nlohmann::json::object();
  std::filesystem::path output_dir = "out";

  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void validate() const;

  std::uint64_t seed() const;
  int workers() const;
  std::int64_t paths(std::int64_t fallback) const;
  double dt(double fallback) const;
  double real(const char* key, double fallback) const;
  std::int64_t integer(const char* key, std::int64_t fallback) const;
  std::vector<double> reals(const char* key, std::vector<double> fallback) const;
  std::string text(const char* key, std::string fallback) const;
};

const std::vector<std::string>& override_keys();

struct CatalogEntry {
  std::string name;
  std::vector<int> criteria;  // acceptance criteria reported by this experiment
  std::string summary;
};
const std::vector<CatalogEntry>& experiment_catalog();
const CatalogEntry& catalog_entry(const std::string& name);

// One numeric comparison inside a verdict.
struct Check {
  enum class Relation { AbsWithin, RelWithin, AtMost, AtLeast };

  std::string name;
  double measured = 0.0;
  double expected = 0.0;
  double tolerance = 0.0;
  Relation relation = Relation::AbsWithin;
  bool pass = false;

  // AbsWithin: |m - e| <= tol.  RelWithin: |m/e - 1| <= tol.
  // AtMost: m <= e.  AtLeast: m >= e (tolerance unused).
  static Check make(std::string name, double measured, double expected, double tolerance, Relation rel);
  std::string describe() const;
  nlohmann::json to_json() const;
};

// Verdict on one acceptance criterion (criterion 0: informational study
// without a numbered criterion). measured/expected/tolerance repeat the
// first check.
struct Verdict {
  int criterion = 0;
  std::string id;
  bool pass = false;
  double measured = 0.0;
  double expected = 0.0;
  double tolerance = 0.0;
  std::vector<Check> checks;
  std::string note;

  static Verdict from_checks(int criterion, std::string id, std::vector<Check> checks, std::string note = {});
  std::string summary() const;
  nlohmann::json to_json() const;
};

struct ExperimentReport {
  std::string name;
  std::vector<Verdict> verdicts;
  nlohmann::json provenance;  // seed, dt, n_paths, alpha, code_version, config
  std::vector<std::string> artifacts;  // relative to the output directory
  nlohmann::json details = nlohmann::json::object();
  double runtime_seconds = 0.0;

  bool all_pass() const;
  const Verdict* find(int criterion) const;
  nlohmann::json to_json() const;
};

// Runs the pipeline, writes CSV files, plots/*.svg and report.json under
// cfg.output_dir, and returns the verdicts. Library errors are rethrown with
// the experiment name prepended.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

}  // namespace cylstable
