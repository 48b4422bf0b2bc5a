#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hiersign/errors.hpp"

namespace hiersign {

// How a zero vote sum is resolved. `Zero` yields a ternary vote (coordinate
// left untouched); it cannot be represented on the 1-bit wire and is
// restricted to in-memory simulation.
enum class TiePolicy { Random, PlusOne, Zero };

enum class PartitionMode { Iid, Dirichlet };

enum class Activation { Relu, Sigmoid, Tanh };

// Realized two-tier topology with exact integer sample counts and the
// normalized weights derived from them.
struct Hierarchy {
  int num_edges = 0;                                   // Q
  std::vector<int> devices_per_edge;                   // M_q
  std::vector<std::vector<std::int64_t>> shard_sizes;  // |D_qk|
  std::vector<std::int64_t> edge_samples;              // D_q
  std::int64_t total_samples = 0;                      // N
  std::vector<double> edge_weights;                    // D_q / N
  std::vector<std::vector<double>> device_weights;     // |D_qk| / D_q

  int total_devices() const {
    int m = 0;
    for (int v : devices_per_edge) m += v;
    return m;
  }
};

// Builds a Hierarchy from raw per-device sample counts grouped by edge.
// Every edge needs at least one device and every shard at least one sample;
// violations raise ConfigError naming the offending index.
Hierarchy derive_weights(
    const std::vector<std::vector<std::int64_t>>& raw_shard_sizes);

struct Schedule {
  int global_rounds = 1;   // T_G
  int edge_rounds = 1;     // T_E
  double step_size = 1e-3; // mu
  int batch_size = 1;      // B
  TiePolicy tie_policy = TiePolicy::Random;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

struct DownlinkConfig {
  bool enabled = false;
  int active_components = 0;  // n, 1 <= n <= d when enabled

  void validate(int dim) const;
};

struct PartitionSpec {
  PartitionMode mode = PartitionMode::Iid;
  double alpha = 0.3;  // Dirichlet concentration, dirichlet mode only
  std::uint64_t rng_seed = 0;
  int retry_limit = 10;  // redraws allowed before a degenerate draw errors

  void validate() const;
};

// Model selection. The MLP is the default classifier; the quadratic is the
// synthetic objective with exactly known smoothness used by bound checks.
struct ModelConfig {
  std::string kind = "mlp";  // "mlp" | "quadratic"
  // mlp
  int input = 784;
  int hidden = 30;
  int output = 10;
  Activation activation = Activation::Relu;
  // quadratic
  int dimension = 50;
  double curvature_min = 0.2;
  double curvature_max = 1.0;
  double noise_std = 1.0;
  double heterogeneity_std = 0.0;  // per-device gradient offset scale
  double init_radius = 1.0;
};

struct DataConfig {
  std::string train_images;
  std::string train_labels;
  std::string test_images;
  std::string test_labels;
  std::int64_t subsample = 0;  // 0 = full dataset
};

struct EvalConfig {
  int grad_batch = 4096;  // samples per round for the gradient-norm estimate
  bool checkpoints = false;
};

// Everything a single run needs. Sections mirror the config file schema.
struct ExperimentConfig {
  std::string algorithm = "hier_signsgd";
  int num_edges = 4;
  std::vector<int> devices_per_edge = {5, 5, 5, 5};
  Schedule schedule;
  DownlinkConfig downlink;
  PartitionSpec partition;
  ModelConfig model;
  DataConfig data;
  EvalConfig eval;

  void validate() const;
};

// Parses the JSON config file. Unknown keys anywhere are a hard error
// naming the key path. See README for the schema.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& json_text);

std::string to_string(TiePolicy p);
std::string to_string(PartitionMode m);
std::string to_string(Activation a);
TiePolicy tie_policy_from_string(const std::string& s);
PartitionMode partition_mode_from_string(const std::string& s);
Activation activation_from_string(const std::string& s);

}  // namespace hiersign
