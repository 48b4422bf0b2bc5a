#include "hiersign/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace hiersign {

using nlohmann::json;

Hierarchy derive_weights(
    const std::vector<std::vector<std::int64_t>>& raw_shard_sizes) {
  if (raw_shard_sizes.empty())
    throw ConfigError("hierarchy: at least one edge required");
  Hierarchy h;
  h.num_edges = static_cast<int>(raw_shard_sizes.size());
  h.shard_sizes = raw_shard_sizes;
  for (int q = 0; q < h.num_edges; ++q) {
    const auto& shards = raw_shard_sizes[q];
    if (shards.empty())
      throw ConfigError("hierarchy: edge " + std::to_string(q) +
                        " has no devices");
    std::int64_t dq = 0;
    for (std::size_t k = 0; k < shards.size(); ++k) {
      if (shards[k] <= 0)
        throw ConfigError("hierarchy: edge " + std::to_string(q) + " device " +
                          std::to_string(k) + " has a zero-size shard");
      dq += shards[k];
    }
    h.devices_per_edge.push_back(static_cast<int>(shards.size()));
    h.edge_samples.push_back(dq);
    h.total_samples += dq;
  }
  h.edge_weights.resize(h.num_edges);
  h.device_weights.resize(h.num_edges);
  for (int q = 0; q < h.num_edges; ++q) {
    h.edge_weights[q] =
        static_cast<double>(h.edge_samples[q]) / static_cast<double>(h.total_samples);
    h.device_weights[q].resize(h.shard_sizes[q].size());
    for (std::size_t k = 0; k < h.shard_sizes[q].size(); ++k)
      h.device_weights[q][k] = static_cast<double>(h.shard_sizes[q][k]) /
                               static_cast<double>(h.edge_samples[q]);
  }
  return h;
}

void Schedule::validate() const {
  if (global_rounds < 1) throw ConfigError("schedule.global_rounds must be >= 1");
  if (edge_rounds < 1) throw ConfigError("schedule.edge_rounds must be >= 1");
  if (!(step_size > 0.0)) throw ConfigError("schedule.step_size must be > 0");
  if (batch_size < 1) throw ConfigError("schedule.batch_size must be >= 1");
}

void DownlinkConfig::validate(int dim) const {
  if (!enabled) return;
  if (active_components < 1 || active_components > dim)
    throw ConfigError("downlink.active_components must be in [1, " +
                      std::to_string(dim) + "], got " +
                      std::to_string(active_components));
}

void PartitionSpec::validate() const {
  if (mode == PartitionMode::Dirichlet && !(alpha > 0.0))
    throw ConfigError("partition.alpha must be > 0 in dirichlet mode");
  if (retry_limit < 0) throw ConfigError("partition.retry_limit must be >= 0");
}

void ExperimentConfig::validate() const {
  if (algorithm != "hier_signsgd" && algorithm != "hier_sgd" &&
      algorithm != "hier_signsgd_qdl")
    throw ConfigError("unknown algorithm: " + algorithm);
  if (num_edges < 1) throw ConfigError("hierarchy.num_edges must be >= 1");
  if (static_cast<int>(devices_per_edge.size()) != num_edges)
    throw ConfigError("hierarchy.devices_per_edge length must equal num_edges");
  for (int m : devices_per_edge)
    if (m < 1) throw ConfigError("hierarchy.devices_per_edge entries must be >= 1");
  schedule.validate();
  partition.validate();
  if (model.kind != "mlp" && model.kind != "quadratic")
    throw ConfigError("model.kind must be \"mlp\" or \"quadratic\"");
  const int dim = model.kind == "quadratic"
                      ? model.dimension
                      : model.input * model.hidden + model.hidden +
                            model.hidden * model.output + model.output;
  downlink.validate(dim);
  if (eval.grad_batch < 1) throw ConfigError("eval.grad_batch must be >= 1");
}

std::string to_string(TiePolicy p) {
  switch (p) {
    case TiePolicy::Random: return "random";
    case TiePolicy::PlusOne: return "plus_one";
    case TiePolicy::Zero: return "zero";
  }
  return "random";
}

std::string to_string(PartitionMode m) {
  return m == PartitionMode::Iid ? "iid" : "dirichlet";
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Tanh: return "tanh";
  }
  return "relu";
}

TiePolicy tie_policy_from_string(const std::string& s) {
  if (s == "random") return TiePolicy::Random;
  if (s == "plus_one") return TiePolicy::PlusOne;
  if (s == "zero") return TiePolicy::Zero;
  throw ConfigError("unknown tie_policy: " + s);
}

PartitionMode partition_mode_from_string(const std::string& s) {
  if (s == "iid") return PartitionMode::Iid;
  if (s == "dirichlet") return PartitionMode::Dirichlet;
  throw ConfigError("unknown partition mode: " + s);
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "sigmoid") return Activation::Sigmoid;
  if (s == "tanh") return Activation::Tanh;
  throw ConfigError("unknown activation: " + s);
}

namespace {

// Strict section reader: consuming every key and rejecting leftovers keeps
// typos from silently running a different experiment.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object())
      throw ConfigError("config section " + path_ + " must be an object");
  }

  ~Section() = default;

  template <typename T>
  void get(const char* key, T& out) {
    if (auto it = j_.find(key); it != j_.end()) {
      try {
        out = it->get<T>();
      } catch (const json::exception& e) {
        throw ConfigError("config key " + path_ + "." + key + ": " + e.what());
      }
      seen_.insert(key);
    }
  }

  bool has(const char* key) const { return j_.contains(key); }

  const json& child(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key()))
        throw ConfigError("unknown config key: " + path_ + "." + it.key());
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }

  ExperimentConfig cfg;
  Section top(root, "");
  top.get("algorithm", cfg.algorithm);

  if (top.has("hierarchy")) {
    Section s(top.child("hierarchy"), "hierarchy");
    s.get("num_edges", cfg.num_edges);
    if (s.has("devices_per_edge")) {
      json d = s.child("devices_per_edge");
      cfg.devices_per_edge.clear();
      if (d.is_number_integer()) {
        cfg.devices_per_edge.assign(std::max(cfg.num_edges, 0), d.get<int>());
      } else if (d.is_array()) {
        for (const auto& v : d) cfg.devices_per_edge.push_back(v.get<int>());
      } else {
        throw ConfigError("hierarchy.devices_per_edge must be an int or array");
      }
    } else {
      cfg.devices_per_edge.assign(std::max(cfg.num_edges, 0), 5);
    }
    s.finish();
  }

  if (top.has("schedule")) {
    Section s(top.child("schedule"), "schedule");
    s.get("global_rounds", cfg.schedule.global_rounds);
    s.get("edge_rounds", cfg.schedule.edge_rounds);
    s.get("step_size", cfg.schedule.step_size);
    s.get("batch_size", cfg.schedule.batch_size);
    std::string tie = to_string(cfg.schedule.tie_policy);
    s.get("tie_policy", tie);
    cfg.schedule.tie_policy = tie_policy_from_string(tie);
    s.get("rng_seed", cfg.schedule.rng_seed);
    s.finish();
  }

  if (top.has("downlink")) {
    Section s(top.child("downlink"), "downlink");
    s.get("enabled", cfg.downlink.enabled);
    s.get("active_components", cfg.downlink.active_components);
    s.finish();
  }

  if (top.has("partition")) {
    Section s(top.child("partition"), "partition");
    std::string mode = to_string(cfg.partition.mode);
    s.get("mode", mode);
    cfg.partition.mode = partition_mode_from_string(mode);
    s.get("alpha", cfg.partition.alpha);
    s.get("rng_seed", cfg.partition.rng_seed);
    s.get("retry_limit", cfg.partition.retry_limit);
    s.finish();
  }

  if (top.has("model")) {
    Section s(top.child("model"), "model");
    s.get("kind", cfg.model.kind);
    s.get("input", cfg.model.input);
    s.get("hidden", cfg.model.hidden);
    s.get("output", cfg.model.output);
    std::string act = to_string(cfg.model.activation);
    s.get("activation", act);
    cfg.model.activation = activation_from_string(act);
    s.get("dimension", cfg.model.dimension);
    s.get("curvature_min", cfg.model.curvature_min);
    s.get("curvature_max", cfg.model.curvature_max);
    s.get("noise_std", cfg.model.noise_std);
    s.get("heterogeneity_std", cfg.model.heterogeneity_std);
    s.get("init_radius", cfg.model.init_radius);
    s.finish();
  }

  if (top.has("data")) {
    Section s(top.child("data"), "data");
    s.get("train_images", cfg.data.train_images);
    s.get("train_labels", cfg.data.train_labels);
    s.get("test_images", cfg.data.test_images);
    s.get("test_labels", cfg.data.test_labels);
    s.get("subsample", cfg.data.subsample);
    s.finish();
  }

  if (top.has("eval")) {
    Section s(top.child("eval"), "eval");
    s.get("grad_batch", cfg.eval.grad_batch);
    s.get("checkpoints", cfg.eval.checkpoints);
    s.finish();
  }

  top.finish();
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace hiersign
