#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "hiersign/compress.hpp"
#include "hiersign/config.hpp"
#include "hiersign/dataio.hpp"
#include "hiersign/model.hpp"

namespace hiersign {

enum class Algorithm { HierSignSgd, HierSgd, HierSignSgdQuantizedDownlink };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& s);

struct EvalReport {
  double train_loss = 0.0;
  double test_loss = 0.0;
  std::optional<double> train_acc;
  std::optional<double> test_acc;
  double grad_l1 = 0.0;  // || grad F(w) ||_1 (estimate for the MLP, exact for
                         // the quadratic)
};

// Gradient provider + evaluator for one federated problem instance. The
// engine is agnostic to what the devices compute; implementations fork all
// randomness from (master_seed, label) so device work can run on any number
// of threads without changing results.
class FederatedObjective {
 public:
  virtual ~FederatedObjective() = default;

  virtual int dim() const = 0;
  // Minibatch (or noisy) gradient of device (q, k) at w for step (t, tau).
  virtual void device_gradient(int t, int tau, int q, int k, const double* w,
                               std::uint64_t master_seed, double* g) = 0;
  // Exact full-shard gradient of device (q, k) at w (used by the
  // heterogeneity estimator).
  virtual void device_full_gradient(int q, int k, const double* w,
                                    double* g) = 0;
  virtual EvalReport evaluate(int t, const double* w,
                              std::uint64_t master_seed) = 0;
  // Initial model draw.
  virtual std::vector<double> initial_params(std::uint64_t master_seed) = 0;
};

// The MLP trained on a partitioned dataset.
class MlpFederatedObjective : public FederatedObjective {
 public:
  MlpFederatedObjective(MlpShape shape, const LabeledDataset* train,
                        const LabeledDataset* test,
                        const PartitionedData* partition, int batch_size,
                        int eval_grad_batch);

  int dim() const override { return shape_.dim(); }
  void device_gradient(int t, int tau, int q, int k, const double* w,
                       std::uint64_t master_seed, double* g) override;
  void device_full_gradient(int q, int k, const double* w, double* g) override;
  EvalReport evaluate(int t, const double* w,
                      std::uint64_t master_seed) override;
  std::vector<double> initial_params(std::uint64_t master_seed) override;

  const MlpShape& shape() const { return shape_; }
  // Threads used for the full-set metric passes; results are identical for
  // any value.
  void set_eval_workers(int workers) { eval_workers_ = std::max(1, workers); }

 private:
  MlpWorkspace& workspace();

  MlpShape shape_;
  const LabeledDataset* train_;
  const LabeledDataset* test_;
  const PartitionedData* partition_;
  int batch_size_;
  int eval_grad_batch_;
  int eval_workers_ = 1;
  std::vector<std::int64_t> assigned_;  // union of all shards
};

// Synthetic separable quadratic with exactly known smoothness. Every device
// shares the same objective; optional per-device fixed gradient offsets
// (heterogeneity_std) and per-draw Gaussian noise (noise_std / sqrt(B)).
class QuadraticFederatedObjective : public FederatedObjective {
 public:
  QuadraticFederatedObjective(QuadraticObjective objective,
                              const Hierarchy* hierarchy, int batch_size,
                              double heterogeneity_std, double init_radius,
                              std::uint64_t problem_seed);

  int dim() const override { return objective_.dim(); }
  void device_gradient(int t, int tau, int q, int k, const double* w,
                       std::uint64_t master_seed, double* g) override;
  void device_full_gradient(int q, int k, const double* w, double* g) override;
  EvalReport evaluate(int t, const double* w,
                      std::uint64_t master_seed) override;
  std::vector<double> initial_params(std::uint64_t master_seed) override;

  const QuadraticObjective& objective() const { return objective_; }
  double initial_value(std::uint64_t master_seed);

 private:
  const double* device_offset(int q, int k);

  QuadraticObjective objective_;
  const Hierarchy* hierarchy_;
  double effective_noise_std_;
  double heterogeneity_std_;
  double init_radius_;
  std::uint64_t problem_seed_;
  std::vector<std::vector<std::vector<double>>> offsets_;  // [q][k] -> vector
};

// One row per global round (plus the t = 0 snapshot of the initial model).
// Bit counters are exact integers derived from simulated payload sizes:
// packed sign payloads count 8*ceil(d/8) bits, full-precision vectors count
// 32 bits/coordinate, sparse downlink payloads count n*(ceil(log2 d) + 32).
struct RoundLog {
  int t = 0;
  std::uint64_t model_hash = 0;
  double train_loss = 0.0;
  double test_loss = 0.0;
  std::optional<double> train_acc;
  std::optional<double> test_acc;
  double grad_l1 = 0.0;
  std::uint64_t uplink_bits = 0;
  std::uint64_t downlink_bits = 0;
  double wall_seconds = 0.0;
};

// Optional capture of every vote vector, for invariant checks on small runs.
struct VoteTrace {
  // votes[t][tau][q] = s_q^(t,tau)
  std::vector<std::vector<std::vector<SignVector>>> votes;
  std::vector<std::vector<double>> models;  // w^(t) snapshots, t = 0..T_G
};

struct RunOptions {
  int workers = 1;
  VoteTrace* trace = nullptr;  // nullptr = no capture
};

// Algorithm 1: devices send gradient signs, edges majority-vote and everyone
// applies v <- v - mu * s; after T_E edge rounds the cloud averages edge
// models with weights D_q/N.
std::vector<RoundLog> run_hier_signsgd(const Hierarchy& hierarchy,
                                       const Schedule& schedule,
                                       FederatedObjective& objective,
                                       const RunOptions& opts = {});

// Full-precision baseline: the edge applies the shard-weighted mean of the
// device minibatch gradients each step; cloud aggregation is unchanged.
std::vector<RoundLog> run_hier_sgd(const Hierarchy& hierarchy,
                                   const Schedule& schedule,
                                   FederatedObjective& objective,
                                   const RunOptions& opts = {});

// Sign variant with the sparsified model-difference downlink:
// v_q^(t,0) = v_q^(t-1,0) + Z(w^(t) - v_q^(t-1,0)), v_q^(0,0) = w^(0).
std::vector<RoundLog> run_hier_signsgd_quantized_downlink(
    const Hierarchy& hierarchy, const Schedule& schedule,
    const DownlinkConfig& downlink, FederatedObjective& objective,
    const RunOptions& opts = {});

std::vector<RoundLog> run_protocol(Algorithm algo, const Hierarchy& hierarchy,
                                   const Schedule& schedule,
                                   const DownlinkConfig& downlink,
                                   FederatedObjective& objective,
                                   const RunOptions& opts = {});

// Coordinate-wise weighted mean of edge models; weights must sum to 1.
std::vector<double> cloud_aggregate(
    std::span<const std::vector<double>> edge_models,
    std::span<const double> edge_weights);

// FNV-1a over the little-endian bytes of a parameter vector.
std::uint64_t hash_params(std::span<const double> w);

}  // namespace hiersign
