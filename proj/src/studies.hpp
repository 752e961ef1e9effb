#pragma once

#include <filesystem>
#include <string>

#include "cylstable/experiments.hpp"
#include "cylstable/output.hpp"
#include "cylstable/simulator.hpp"

namespace cylstable::detail {

struct StudyContext {
  const ExperimentConfig& cfg;
  ExperimentReport& report;

  void write_csv(const std::string& file, const CsvTable& table);
  void write_svg(const std::string& file, const SvgPlot& plot);  // under plots/
  // Simulation settings from the overrides; also recorded as provenance.
  SimConfig sim(std::int64_t default_paths, double default_dt);
  void add(Verdict v) { report.verdicts.push_back(std::move(v)); }
};

void study_lemma31_constants(StudyContext& ctx);
void study_kernel_oracles(StudyContext& ctx);
void study_exit_scaling(StudyContext& ctx);
void study_survival_bound(StudyContext& ctx);
void study_thm11_disc(StudyContext& ctx);
void study_thm11_lambda1(StudyContext& ctx);
void study_thm16_four_squares(StudyContext& ctx);
void study_ex61_lshape(StudyContext& ctx);
void study_ex62_tilted(StudyContext& ctx);
void study_ex63_diagonal(StudyContext& ctx);
void study_irreducibility_suite(StudyContext& ctx);
void study_kernel_consistency(StudyContext& ctx);

}  // namespace cylstable::detail
