#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hiersign/engine.hpp"

namespace hiersign {

// Constants feeding the closed-form convergence bounds. psi is the
// quantizer's relative error coefficient (0 with the downlink disabled;
// sqrt(d/n - 1) for the uniform n-of-d sparsifier).
struct BoundInputs {
  double initial_gap = 0.0;  // F(w^(0)) - F*
  double smoothness = 0.0;   // L
  double noise_bound = 0.0;  // sigma
  double heterogeneity = 0.0;  // zeta
  int dimension = 0;         // d
  int batch_size = 1;        // B
  double step_size = 0.0;    // mu
  int global_rounds = 1;     // T_G
  int edge_rounds = 1;       // T_E
  double quantizer_psi = 0.0;

  void validate() const;
};

struct BoundResult {
  double constant = 0.0;  // C (or C_Z)
  double rhs = 0.0;       // initial_gap / (mu T_G T_E) + constant
};

// C = 2 zeta + 2 sigma d / sqrt(B) + (3 T_E / 2 - 1) L mu
BoundResult theorem1_bound(const BoundInputs& in);

// (1 / sqrt(T_G)) * (initial_gap / T_E + 2 sigma d + (3 T_E / 2 - 1) L),
// i.e. theorem1_bound at mu = 1/sqrt(T_G), B = T_G, zeta = 0.
double corollary2_bound(double initial_gap, double sigma, int dimension,
                        double smoothness, int edge_rounds, int global_rounds);

// C_Z = C + psi sqrt(d) (3 + psi sqrt(d) / 2) L mu T_E
BoundResult theorem4_bound(const BoundInputs& in);

// Weighted l1 gradient dissimilarity sum_q (D_q/N) ||grad F_q - grad F||_1
// averaged over probe points, using exact full-shard gradients.
struct ZetaEstimate {
  double value = 0.0;
  int num_probe_points = 0;
  double standard_error = 0.0;  // over probe points (0 for a single point)
};

ZetaEstimate estimate_zeta(FederatedObjective& objective,
                           const Hierarchy& hierarchy,
                           std::span<const std::vector<double>> probe_points);

// Empirical zeta versus cluster size M under IID sharding, with the fitted
// log-log slope. Per-device shard size is held fixed so edge pools grow
// with M.
struct ZetaScalingResult {
  std::vector<int> m_values;
  std::vector<double> mean_zeta;  // E over seeds x probe points
  double slope = 0.0;             // least-squares slope of log zeta vs log M
};

ZetaScalingResult zeta_scaling_mlp(const LabeledDataset& data, int num_edges,
                                   std::span<const int> m_values,
                                   int shard_size, int probe_points,
                                   std::span<const std::uint64_t> seeds,
                                   const MlpShape& shape = {});

ZetaScalingResult zeta_scaling_quadratic(
    const ModelConfig& model, int num_edges, std::span<const int> m_values,
    int probe_points, std::span<const std::uint64_t> seeds);

// Monte Carlo majority-vote error: per trial, M independent sign flips with
// probability p against a known true sign, decoded by majority vote
// (seeded random tie-break for even M). Rejects p >= 1/2.
double vote_error_experiment(double p, int m, int trials, RngStream& rng);

// Exact oracle: sum_{k > M/2} C(M,k) p^k (1-p)^(M-k), plus half the tie
// mass C(M, M/2) p^(M/2) (1-p)^(M/2) when M is even.
double binomial_vote_error(double p, int m);

// Idealized per-device wire rates (the published-table convention: d bits
// per sign payload, 32 d per full-precision vector).
enum class WireMode { Sign, Full32, QuantizedDownlink };

struct BitReport {
  std::uint64_t uplink_bits_per_device_step = 0;
  std::uint64_t downlink_bits_per_step = 0;        // edge broadcast, per step
  std::uint64_t downlink_bits_per_round_extra = 0; // model broadcast per round
  double uplink_bps_per_device = 0.0;
  double downlink_bps = 0.0;
};

BitReport bit_accounting(int dimension, const Schedule& schedule,
                         const Hierarchy& hierarchy, WireMode mode,
                         double reporting_interval_s,
                         int active_components = 0);

// Least-squares slope of y against x.
double fit_slope(std::span<const double> x, std::span<const double> y);

}  // namespace hiersign
