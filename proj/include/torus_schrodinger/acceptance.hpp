#pragma once

#include "torus_schrodinger/experiment.hpp"

#include <json.hpp>

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace ts {

struct CriterionResult {
  int id = 0;
  std::string name;
  double measured = 0.0;
  double bound = 0.0;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;  // wall clock; printed, never serialized
};

struct AcceptanceOptions {
  ExperimentConfig benchmark = benchmark_config();
  bool quick = false;
  std::uint64_t seed = 1;
  int jobs = 1;
  std::vector<int> only;  // criterion ids to run; empty runs all
};

/// Runs the acceptance criteria 1-13 in order.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts);

/// One line per criterion: id, PASS/FAIL, measured, bound, seconds, name, detail.
void print_table(std::ostream& os, const std::vector<CriterionResult>& results);

/// Results without timings, so repeated runs serialize identically.
nlohmann::ordered_json acceptance_json(const std::vector<CriterionResult>& results);

}  // namespace ts
