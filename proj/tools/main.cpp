// Experiment runner: loads a JSON config, optionally sweeps one axis over a
// list of values and a list of seeds, and writes per-run CSVs plus a merged
// summary and a manifest. See README for the config schema and CSV columns.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hiersign/plan.hpp"

int main(int argc, char** argv) {
  CLI::App app{"hiersign: two-tier sign-compressed federated learning simulator"};

  std::string config_path;
  std::string sweep;
  std::vector<std::uint64_t> seeds = {1};
  std::string out_dir = "out";
  std::int64_t subsample = 0;
  bool synthetic = false;
  int workers = 1;

  app.add_option("--config", config_path, "JSON config file")->required();
  app.add_option("--sweep", sweep,
                 "AXIS=v1,v2,... with AXIS one of "
                 "algorithm|T_E|clustering|n_over_d|alpha "
                 "(clustering values look like 6x8)");
  app.add_option("--seeds", seeds, "seeds, e.g. --seeds 1 2 3")
      ->delimiter(',');
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--subsample", subsample,
                 "cap the training set at N samples (0 = full)");
  app.add_flag("--synthetic", synthetic,
               "use the synthetic quadratic objective (no dataset needed)");
  app.add_option("--workers", workers, "worker threads")
      ->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    hiersign::ExperimentPlan plan;
    plan.base = hiersign::load_config(config_path);
    plan.seeds = seeds;
    plan.out_dir = out_dir;
    plan.subsample = subsample;
    plan.synthetic = synthetic || plan.base.model.kind == "quadratic";
    plan.workers = workers;

    if (!sweep.empty()) {
      const auto eq = sweep.find('=');
      if (eq == std::string::npos)
        throw hiersign::ConfigError("--sweep expects AXIS=v1,v2,...");
      plan.axis = hiersign::sweep_axis_from_string(sweep.substr(0, eq));
      std::string rest = sweep.substr(eq + 1);
      std::size_t pos = 0;
      while (pos <= rest.size()) {
        const auto comma = rest.find(',', pos);
        const std::string item =
            rest.substr(pos, comma == std::string::npos ? std::string::npos
                                                        : comma - pos);
        if (!item.empty())
          plan.values.push_back(hiersign::parse_sweep_point(plan.axis, item));
        if (comma == std::string::npos) break;
        pos = comma + 1;
      }
      if (plan.values.empty())
        throw hiersign::ConfigError("--sweep has no values");
    }

    const hiersign::PlanOutcome outcome = hiersign::run_plan(plan);
    std::printf("wrote %zu run file(s), %s, %s\n", outcome.run_files.size(),
                outcome.summary_file.string().c_str(),
                outcome.manifest_file.string().c_str());
    return 0;
  } catch (const std::exception& e) {
    nlohmann::json err = {{"error", e.what()}};
    std::fprintf(stderr, "%s\n", err.dump().c_str());
    return 1;
  }
}
