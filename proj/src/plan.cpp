#include "hiersign/plan.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "hiersign/parallel.hpp"

namespace hiersign {

using ordered_json = nlohmann::ordered_json;

std::string to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::None: return "none";
    case SweepAxis::Algorithm: return "algorithm";
    case SweepAxis::EdgeRounds: return "T_E";
    case SweepAxis::Clustering: return "clustering";
    case SweepAxis::NOverD: return "n_over_d";
    case SweepAxis::Alpha: return "alpha";
  }
  return "none";
}

SweepAxis sweep_axis_from_string(const std::string& s) {
  if (s == "none") return SweepAxis::None;
  if (s == "algorithm") return SweepAxis::Algorithm;
  if (s == "T_E") return SweepAxis::EdgeRounds;
  if (s == "clustering") return SweepAxis::Clustering;
  if (s == "n_over_d") return SweepAxis::NOverD;
  if (s == "alpha") return SweepAxis::Alpha;
  throw ConfigError("unknown sweep axis: " + s +
                    " (expected algorithm|T_E|clustering|n_over_d|alpha)");
}

SweepPoint parse_sweep_point(SweepAxis axis, const std::string& text) {
  SweepPoint p;
  p.text = text;
  switch (axis) {
    case SweepAxis::None:
      break;
    case SweepAxis::Algorithm:
      // sweep_value column holds the enumeration index; the name is in the
      // algorithm column
      p.numeric = static_cast<double>(
          static_cast<int>(algorithm_from_string(text)));
      break;
    case SweepAxis::EdgeRounds: {
      p.numeric = std::stod(text);
      if (p.numeric < 1 || p.numeric != std::floor(p.numeric))
        throw ConfigError("T_E sweep values must be positive integers: " +
                          text);
      break;
    }
    case SweepAxis::Clustering: {
      const auto sep = text.find('x');
      if (sep == std::string::npos)
        throw ConfigError("clustering values look like QxM, got: " + text);
      p.q = std::stoi(text.substr(0, sep));
      p.m = std::stoi(text.substr(sep + 1));
      if (p.q < 1 || p.m < 1)
        throw ConfigError("clustering Q and M must be >= 1: " + text);
      p.numeric = p.q;  // sweep_value column carries Q
      break;
    }
    case SweepAxis::NOverD:
      p.numeric = std::stod(text);
      if (!(p.numeric > 0.0) || p.numeric > 1.0)
        throw ConfigError("n_over_d values must be in (0, 1]: " + text);
      break;
    case SweepAxis::Alpha:
      p.numeric = std::stod(text);
      if (!(p.numeric > 0.0))
        throw ConfigError("alpha values must be positive: " + text);
      break;
  }
  return p;
}

void ExperimentPlan::validate() const {
  base.validate();
  if (seeds.empty()) throw ConfigError("plan: at least one seed required");
  if (axis != SweepAxis::None && values.empty())
    throw ConfigError("plan: sweep axis declared without values");
  if (axis == SweepAxis::Clustering && fixed_device_budget) {
    int budget = -1;
    for (const auto& v : values) {
      if (budget < 0) budget = v.q * v.m;
      if (v.q * v.m != budget)
        throw ConfigError("clustering sweep must keep Q*M constant (" +
                          v.text + " breaks the device budget of " +
                          std::to_string(budget) + ")");
    }
  }
  if (workers < 1) throw ConfigError("plan: workers must be >= 1");
}

namespace {

ExperimentConfig resolve(const ExperimentPlan& plan, const SweepPoint& point,
                         std::uint64_t seed, int model_dim) {
  ExperimentConfig cfg = plan.base;
  switch (plan.axis) {
    case SweepAxis::None:
      break;
    case SweepAxis::Algorithm:
      cfg.algorithm = point.text;
      break;
    case SweepAxis::EdgeRounds:
      cfg.schedule.edge_rounds = static_cast<int>(point.numeric);
      break;
    case SweepAxis::Clustering:
      cfg.num_edges = point.q;
      cfg.devices_per_edge.assign(point.q, point.m);
      break;
    case SweepAxis::NOverD: {
      cfg.algorithm = "hier_signsgd_qdl";
      cfg.downlink.enabled = true;
      cfg.downlink.active_components = std::max(
          1, static_cast<int>(std::lround(point.numeric * model_dim)));
      break;
    }
    case SweepAxis::Alpha:
      cfg.partition.mode = PartitionMode::Dirichlet;
      cfg.partition.alpha = point.numeric;
      break;
  }
  cfg.schedule.rng_seed = seed;
  cfg.partition.rng_seed = seed;
  return cfg;
}

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s)
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' ||
            c == '-' || c == '_')
               ? c
               : '_';
  return out;
}

int model_dimension(const ExperimentConfig& cfg) {
  if (cfg.model.kind == "quadratic") return cfg.model.dimension;
  return MlpShape{cfg.model.input, cfg.model.hidden, cfg.model.output,
                  cfg.model.activation}
      .dim();
}

struct TaskResult {
  std::vector<CsvRecord> records;
  std::filesystem::path file;
  ordered_json provenance;
};

}  // namespace

PlanOutcome run_plan(const ExperimentPlan& plan) {
  plan.validate();
  std::filesystem::create_directories(plan.out_dir);

  // shared immutable datasets
  LabeledDataset train, test;
  const bool needs_data = !plan.synthetic && plan.base.model.kind == "mlp";
  std::int64_t subsample =
      plan.subsample > 0 ? plan.subsample : plan.base.data.subsample;
  if (needs_data) {
    if (plan.base.data.train_images.empty())
      throw ConfigError("plan: data.train_images required (or --synthetic)");
    train = load_idx(plan.base.data.train_images, plan.base.data.train_labels);
    if (!plan.base.data.test_images.empty())
      test = load_idx(plan.base.data.test_images, plan.base.data.test_labels);
    if (subsample > 0 && subsample < train.size()) {
      auto rng = fork_rng(plan.base.schedule.rng_seed, {.purpose = "subsample"});
      train = train.subsample(subsample, rng);
    }
  }

  std::vector<SweepPoint> points = plan.values;
  if (points.empty()) points.push_back(SweepPoint{});

  struct Task {
    SweepPoint point;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (const auto& point : points)
    for (std::uint64_t seed : plan.seeds) tasks.push_back({point, seed});

  const int task_parallelism =
      std::min<int>(plan.workers, static_cast<int>(tasks.size()));
  const int inner_workers =
      tasks.size() == 1 ? plan.workers
                        : std::max(1, plan.workers / task_parallelism);

  std::vector<TaskResult> results(tasks.size());
  parallel_for(static_cast<int>(tasks.size()), task_parallelism, [&](int ti) {
    const Task& task = tasks[ti];
    try {
      ExperimentConfig cfg =
          resolve(plan, task.point, task.seed, model_dimension(plan.base));
      cfg.validate();
      const Algorithm algo = algorithm_from_string(cfg.algorithm);

      std::vector<RoundLog> logs;
      ordered_json prov;
      if (plan.synthetic || cfg.model.kind == "quadratic") {
        std::vector<std::vector<std::int64_t>> sizes(cfg.num_edges);
        for (int q = 0; q < cfg.num_edges; ++q)
          sizes[q].assign(cfg.devices_per_edge[q], 1);
        const Hierarchy h = derive_weights(sizes);
        auto problem_rng =
            fork_rng(cfg.schedule.rng_seed, {.purpose = "quadratic_problem"});
        QuadraticFederatedObjective obj(
            make_quadratic(cfg.model, problem_rng), &h,
            cfg.schedule.batch_size, cfg.model.heterogeneity_std,
            cfg.model.init_radius, cfg.schedule.rng_seed);
        RunOptions opts;
        opts.workers = inner_workers;
        logs = run_protocol(algo, h, cfg.schedule, cfg.downlink, obj, opts);
        prov["objective"] = "quadratic";
        prov["dimension"] = cfg.model.dimension;
      } else {
        const PartitionedData part = make_partition(
            train, cfg.num_edges, cfg.devices_per_edge, cfg.partition);
        const Hierarchy h = derive_weights(part.shard_sizes());
        MlpShape shape{cfg.model.input, cfg.model.hidden, cfg.model.output,
                       cfg.model.activation};
        MlpFederatedObjective obj(shape, &train, test.size() > 0 ? &test : nullptr,
                                  &part, cfg.schedule.batch_size,
                                  cfg.eval.grad_batch);
        obj.set_eval_workers(inner_workers);
        RunOptions opts;
        opts.workers = inner_workers;
        logs = run_protocol(algo, h, cfg.schedule, cfg.downlink, obj, opts);
        prov["objective"] = "mlp";
        prov["partition_mode"] = to_string(cfg.partition.mode);
        if (cfg.partition.mode == PartitionMode::Dirichlet)
          prov["alpha"] = cfg.partition.alpha;
        prov["total_assigned"] = part.total_assigned;
        prov["dropped_per_edge"] = part.dropped_per_edge;
        prov["edge_class_counts"] = part.edge_class_counts;
      }

      TaskResult& out = results[ti];
      const std::string axis_name = to_string(plan.axis);
      for (const auto& log : logs)
        out.records.push_back(to_record(log, cfg.algorithm, task.seed,
                                        axis_name, task.point.numeric));
      std::string name = "run";
      if (plan.axis != SweepAxis::None)
        name += "_" + axis_name + "_" + sanitize(task.point.text);
      name += "_seed" + std::to_string(task.seed) + ".csv";
      out.file = plan.out_dir / name;
      emit_csv(out.file, out.records);
      out.provenance = std::move(prov);
      out.provenance["file"] = name;
      out.provenance["seed"] = task.seed;
      if (plan.axis != SweepAxis::None)
        out.provenance["sweep_value"] = task.point.text;
    } catch (const std::exception& e) {
      throw TrainError("sweep point '" + task.point.text + "' seed " +
                       std::to_string(task.seed) + ": " + e.what());
    }
  });

  PlanOutcome outcome;
  for (auto& r : results) {
    outcome.run_files.push_back(r.file);
    outcome.all_records.insert(outcome.all_records.end(), r.records.begin(),
                               r.records.end());
  }
  outcome.summary_file = plan.out_dir / "summary.csv";
  emit_csv(outcome.summary_file, outcome.all_records);

  // manifest: every tunable that affects results, no timestamps
  ordered_json manifest;
  manifest["algorithm"] = plan.base.algorithm;
  manifest["sweep_axis"] = to_string(plan.axis);
  {
    std::vector<std::string> vals;
    for (const auto& p : points)
      if (!p.text.empty()) vals.push_back(p.text);
    manifest["sweep_values"] = vals;
  }
  manifest["seeds"] = plan.seeds;
  manifest["workers"] = plan.workers;
  manifest["synthetic"] = plan.synthetic;
  manifest["hierarchy"] = {{"num_edges", plan.base.num_edges},
                           {"devices_per_edge", plan.base.devices_per_edge}};
  manifest["schedule"] = {
      {"global_rounds", plan.base.schedule.global_rounds},
      {"edge_rounds", plan.base.schedule.edge_rounds},
      {"step_size", plan.base.schedule.step_size},
      {"batch_size", plan.base.schedule.batch_size},
      {"tie_policy", to_string(plan.base.schedule.tie_policy)},
  };
  manifest["downlink"] = {
      {"enabled", plan.base.downlink.enabled},
      {"active_components", plan.base.downlink.active_components}};
  manifest["partition"] = {{"mode", to_string(plan.base.partition.mode)},
                           {"alpha", plan.base.partition.alpha},
                           {"retry_limit", plan.base.partition.retry_limit}};
  manifest["model"] = {
      {"kind", plan.base.model.kind},
      {"input", plan.base.model.input},
      {"hidden", plan.base.model.hidden},
      {"output", plan.base.model.output},
      {"activation", to_string(plan.base.model.activation)},
      {"dimension", plan.base.model.dimension},
      {"curvature_min", plan.base.model.curvature_min},
      {"curvature_max", plan.base.model.curvature_max},
      {"noise_std", plan.base.model.noise_std},
      {"heterogeneity_std", plan.base.model.heterogeneity_std},
      {"init_radius", plan.base.model.init_radius},
  };
  manifest["eval"] = {{"grad_batch", plan.base.eval.grad_batch}};
  if (needs_data) {
    manifest["data"] = {
        {"train_images", plan.base.data.train_images},
        {"train_labels", plan.base.data.train_labels},
        {"test_images", plan.base.data.test_images},
        {"test_labels", plan.base.data.test_labels},
        {"subsample", subsample},
        {"train_size", train.size()},
        {"test_size", test.size()},
    };
  }
  {
    ordered_json runs = ordered_json::array();
    for (const auto& r : results) runs.push_back(r.provenance);
    manifest["runs"] = std::move(runs);
  }
  outcome.manifest_file = plan.out_dir / "manifest.json";
  std::ofstream mf(outcome.manifest_file, std::ios::binary);
  if (!mf) throw ConfigError("cannot write manifest");
  mf << manifest.dump(2) << '\n';

  return outcome;
}

}  // namespace hiersign
