// Runs the acceptance criteria through the experiment pipelines and prints
// one PASS/FAIL line per criterion. With --strict the exit code is nonzero
// when any criterion fails; otherwise only errors make it nonzero.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cylstable/error.hpp"
#include "cylstable/experiments.hpp"

using namespace cylstable;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string id;
  std::string summary;
  double seconds = 0.0;
};

// Stated wall-clock budgets, in seconds.
const std::map<int, double> kBudget = {{1, 60}, {3, 60}, {5, 300}, {6, 300}, {7, 900}, {8, 900}, {11, 600}};

const std::map<int, std::string> kExperiment = {
    {1, "lemma31_constants"}, {2, "kernel_oracles"},       {3, "kernel_oracles"},     {4, "kernel_oracles"},
    {5, "exit_scaling"},      {6, "survival_bound"},       {7, "thm11_disc"},         {8, "thm16_four_squares"},
    {9, "ex63_diagonal"},     {10, "irreducibility_suite"}, {11, "thm11_lambda1"},    {12, "kernel_consistency"}};

class Runner {
 public:
  Runner(fs::path out, std::uint64_t seed) : out_(std::move(out)), seed_(seed) {}

  const ExperimentReport& report(const std::string& name) {
    auto it = cache_.find(name);
    if (it != cache_.end()) return it->second;
    ExperimentConfig cfg;
    cfg.name = name;
    cfg.overrides = {{"seed", seed_}};
    cfg.output_dir = out_ / name;
    return cache_.emplace(name, run_experiment(cfg)).first->second;
  }

 private:
  fs::path out_;
  std::uint64_t seed_;
  std::map<std::string, ExperimentReport> cache_;
};

std::map<std::string, std::string> csv_bytes(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".csv") continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    out[entry.path().filename().string()] = ss.str();
  }
  return out;
}

Outcome determinism(const fs::path& out, std::uint64_t seed) {
  struct Case {
    std::string name;
    json overrides;
  };
  const std::vector<Case> cases = {
      {"exit_scaling", {{"paths", 4000}, {"alphas", {1.5}}}},
      {"thm11_disc", {{"paths", 4000}, {"times", {0.1, 0.2}}}},
  };
  std::int64_t files = 0, differing = 0;
  for (const auto& c : cases) {
    std::vector<std::map<std::string, std::string>> runs;
    int r = 0;
    for (int workers : {1, 4, 1}) {
      ExperimentConfig cfg;
      cfg.name = c.name;
      cfg.overrides = c.overrides;
      cfg.overrides["seed"] = seed;
      cfg.overrides["workers"] = workers;
      cfg.output_dir = out / "determinism" / (c.name + "_run" + std::to_string(r++) + "_w" + std::to_string(workers));
      fs::remove_all(cfg.output_dir);
      run_experiment(cfg);
      runs.push_back(csv_bytes(cfg.output_dir));
    }
    for (const auto& [file, bytes] : runs[0]) {
      ++files;
      if (runs[1][file] != bytes || runs[2][file] != bytes) ++differing;
    }
  }
  Outcome o;
  o.id = "bit_reproducibility";
  o.pass = files > 0 && differing == 0;
  o.summary = std::to_string(files) + " CSV files compared over workers {1,4} and a re-run, " +
              std::to_string(differing) + " differ";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> selected;
  std::string out_dir = "acceptance_out";
  std::uint64_t seed = 1;
  bool strict = false;
  app.add_option("--criterion", selected, "criterion number (repeatable; default: all)")->check(CLI::Range(1, 13));
  app.add_option("--out", out_dir, "directory for experiment artifacts")->capture_default_str();
  app.add_option("--seed", seed)->capture_default_str();
  app.add_flag("--strict", strict, "exit nonzero when a criterion fails");
  CLI11_PARSE(app, argc, argv);

  std::set<int> todo(selected.begin(), selected.end());
  if (todo.empty()) {
    for (int c = 1; c <= 13; ++c) todo.insert(c);
  }

  Runner runner(out_dir, seed);
  int failed = 0, errors = 0;
  for (int c : todo) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    double experiment_seconds = -1.0;
    try {
      if (c == 13) {
        o = determinism(out_dir, seed);
      } else {
        const ExperimentReport& r = runner.report(kExperiment.at(c));
        const Verdict* v = r.find(c);
        if (!v) throw Error(ErrorCode::PreconditionViolated, "no verdict for criterion " + std::to_string(c));
        o.pass = v->pass;
        o.id = v->id;
        o.summary = v->summary();
        experiment_seconds = r.runtime_seconds;
      }
    } catch (const std::exception& e) {
      o.pass = false;
      o.id = "error";
      o.summary = e.what();
      ++errors;
    }
    // Criteria sharing an experiment are charged its full run time.
    o.seconds = experiment_seconds >= 0.0
                    ? experiment_seconds
                    : std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::string budget;
    if (auto it = kBudget.find(c); it != kBudget.end()) {
      char buf[64];
      std::snprintf(buf, sizeof buf, " of %.0f s", it->second);
      budget = buf;
      if (o.seconds > it->second) {
        o.pass = false;
        o.summary += "; FAILED runtime budget";
      }
    }
    std::printf("criterion %2d %s %s: %s [%.1f s%s]\n", c, o.pass ? "PASS" : "FAIL", o.id.c_str(), o.summary.c_str(),
                o.seconds, budget.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(todo.size()) - failed, todo.size());
  if (errors > 0) return 2;
  return strict && failed > 0 ? 1 : 0;
}
