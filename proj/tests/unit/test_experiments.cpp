#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "cylstable/error.hpp"
#include "cylstable/experiments.hpp"
#include "cylstable/output.hpp"
#include "doctest.h"

using namespace cylstable;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::InvalidArgument;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("experiments") {
  TEST_CASE("format_number is fixed-precision and round-trips to 12 digits") {
    CHECK(format_number(0.1) == "0.1");
    CHECK(format_number(1.0 / 3.0) == "0.333333333333");
    CHECK(format_number(-2.5e-7) == "-2.5e-07");
    CHECK(format_number(std::nan("")) == "nan");
    CHECK(format_number(INFINITY) == "inf");
    CHECK(format_number(-INFINITY) == "-inf");
    for (double v : {1.234567890123e-5, 98765.4321, -3.0}) {
      CHECK(std::abs(std::stod(format_number(v)) / v - 1.0) < 1e-11);
    }
  }

  TEST_CASE("CsvTable quotes fields with separators and checks the column count") {
    CsvTable t({"name", "value"});
    t.add_row({"B(0,1)", 0.5});
    t.add_row({"say \"hi\"", 2});
    CHECK(t.rows() == 2);
    CHECK(t.str() == "name,value\n\"B(0,1)\",0.5\n\"say \"\"hi\"\"\",2\n");
    CHECK(code_of([&] { t.add_row({1.0}); }) == ErrorCode::InvalidArgument);
  }

  TEST_CASE("fit_line recovers an exact line and a noisy slope's scatter") {
    const std::vector<double> x{0, 1, 2, 3, 4};
    std::vector<double> y;
    for (double v : x) y.push_back(1.5 - 0.25 * v);
    const LineFit f = fit_line(x, y);
    CHECK(f.slope == doctest::Approx(-0.25).epsilon(1e-14));
    CHECK(f.intercept == doctest::Approx(1.5).epsilon(1e-14));
    CHECK(f.slope_se < 1e-14);

    // Residuals +-e alternate; slope_se follows from the closed form.
    const std::vector<double> r{0.1, -0.1, 0.1, -0.1, 0.1};
    std::vector<double> yn(5);
    for (int i = 0; i < 5; ++i) yn[i] = y[i] + r[i];
    const LineFit g = fit_line(x, yn);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < 5; ++i) {
      sx += x[i];
      sy += yn[i];
      sxx += x[i] * x[i];
      sxy += x[i] * yn[i];
    }
    const double b = (5 * sxy - sx * sy) / (5 * sxx - sx * sx);
    const double a = (sy - b * sx) / 5;
    double rss = 0;
    for (int i = 0; i < 5; ++i) rss += std::pow(yn[i] - a - b * x[i], 2);
    CHECK(g.slope == doctest::Approx(b).epsilon(1e-12));
    CHECK(g.slope_se == doctest::Approx(std::sqrt(rss / 3.0 / (sxx - sx * sx / 5))).epsilon(1e-12));
  }

  TEST_CASE("config parsing rejects unknown keys, overrides and bad types") {
    const auto cfg = ExperimentConfig::from_json(
        {{"name", "exit_scaling"}, {"alpha", 1.5}, {"overrides", {{"paths", 1000}, {"dt", 5e-4}}}});
    CHECK(cfg.alpha == 1.5);
    CHECK(cfg.paths(7) == 1000);
    CHECK(cfg.dt(1e-3) == 5e-4);
    CHECK(cfg.seed() == 1);
    CHECK(cfg.reals("times", {0.25}) == std::vector<double>{0.25});

    CHECK(code_of([] { ExperimentConfig::from_json({{"name", "exit_scaling"}, {"nme", 1}}); }) ==
          ErrorCode::ConfigError);
    CHECK(code_of([] {
            ExperimentConfig::from_json({{"name", "exit_scaling"}, {"overrides", {{"path", 10}}}});
          }) == ErrorCode::ConfigError);
    CHECK(code_of([] {
            ExperimentConfig::from_json({{"name", "exit_scaling"}, {"overrides", {{"paths", 1.5}}}});
          }) == ErrorCode::ConfigError);
    CHECK(code_of([] {
            ExperimentConfig::from_json({{"name", "exit_scaling"}, {"overrides", {{"times", json::array()}}}});
          }) == ErrorCode::ConfigError);
    CHECK(code_of([] { ExperimentConfig::from_json({{"name", "exit_scaling"}, {"alpha", 2.0}}); }) ==
          ErrorCode::ConfigError);
    CHECK(code_of([] { ExperimentConfig::from_json({{"name", "no_such_study"}}); }) == ErrorCode::ConfigError);
    CHECK(code_of([] { ExperimentConfig::from_json(json::array()); }) == ErrorCode::ConfigError);

    const auto round = ExperimentConfig::from_json(cfg.to_json());
    CHECK(round.to_json() == cfg.to_json());
  }

  TEST_CASE("every numbered criterion belongs to exactly one catalog experiment") {
    std::map<int, int> owners;
    for (const auto& e : experiment_catalog()) {
      for (int c : e.criteria) {
        if (c > 0) ++owners[c];
      }
    }
    for (int c = 1; c <= 12; ++c) {
      INFO("criterion ", c);
      CHECK(owners[c] == 1);
    }
  }

  TEST_CASE("run_experiment writes a report and identical CSV bytes on a re-run") {
    const fs::path root = fs::temp_directory_path() / "cylstable_test_experiments";
    fs::remove_all(root);
    std::vector<std::map<std::string, std::string>> runs;
    for (int r = 0; r < 2; ++r) {
      ExperimentConfig cfg;
      cfg.name = "lemma31_constants";
      cfg.overrides = {{"seed", 11}};
      cfg.output_dir = root / ("run" + std::to_string(r));
      const ExperimentReport rep = run_experiment(cfg);
      REQUIRE(rep.find(1) != nullptr);
      CHECK(rep.find(1)->pass);
      CHECK(rep.provenance.at("seed") == 11);
      CHECK(rep.provenance.at("code_version") == std::string(code_version()));
      CHECK(fs::exists(cfg.output_dir / "report.json"));
      const json saved = json::parse(slurp(cfg.output_dir / "report.json"));
      CHECK(saved.at("verdicts").size() == rep.verdicts.size());
      std::map<std::string, std::string> csv;
      for (const auto& entry : fs::directory_iterator(cfg.output_dir)) {
        if (entry.path().extension() == ".csv") csv[entry.path().filename().string()] = slurp(entry.path());
      }
      CHECK(!csv.empty());
      runs.push_back(std::move(csv));
    }
    CHECK(runs[0] == runs[1]);
    fs::remove_all(root);
  }
}
