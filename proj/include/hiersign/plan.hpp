#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hiersign/analysis.hpp"
#include "hiersign/csv.hpp"

namespace hiersign {

enum class SweepAxis { None, Algorithm, EdgeRounds, Clustering, NOverD, Alpha };

std::string to_string(SweepAxis a);
SweepAxis sweep_axis_from_string(const std::string& s);

// One point on a sweep axis. `numeric` is what lands in the CSV
// sweep_value column; clustering points also carry (Q, M).
struct SweepPoint {
  std::string text;     // as given on the command line
  double numeric = 0.0;
  int q = 0, m = 0;     // clustering only
};

SweepPoint parse_sweep_point(SweepAxis axis, const std::string& text);

struct ExperimentPlan {
  ExperimentConfig base;
  SweepAxis axis = SweepAxis::None;
  std::vector<SweepPoint> values;          // one implicit point when empty
  std::vector<std::uint64_t> seeds = {1};
  std::filesystem::path out_dir = "out";
  int workers = 1;
  std::int64_t subsample = 0;  // overrides base.data.subsample when > 0
  bool synthetic = false;      // quadratic objective, no dataset
  bool fixed_device_budget = true;  // clustering sweeps must keep Q*M constant

  void validate() const;
};

struct PlanOutcome {
  std::vector<std::filesystem::path> run_files;
  std::filesystem::path summary_file;
  std::filesystem::path manifest_file;
  std::vector<CsvRecord> all_records;
};

// Runs every (sweep value, seed) combination, writes one CSV per run plus a
// merged summary and a manifest of the fully resolved configuration.
// Sweep points run concurrently; outputs are byte-identical for any worker
// count. Errors carry the (sweep value, seed) coordinate; completed runs
// are flushed before the error propagates.
PlanOutcome run_plan(const ExperimentPlan& plan);

}  // namespace hiersign
