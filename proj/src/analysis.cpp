#include "hiersign/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hiersign/kernels.hpp"

namespace hiersign {

void BoundInputs::validate() const {
  if (initial_gap < 0 || smoothness < 0 || noise_bound < 0 ||
      heterogeneity < 0 || quantizer_psi < 0)
    throw ConfigError("bound inputs must be nonnegative");
  if (dimension < 1 || batch_size < 1 || global_rounds < 1 || edge_rounds < 1)
    throw ConfigError("bound inputs: d, B, T_G, T_E must be >= 1");
  if (!(step_size > 0)) throw ConfigError("bound inputs: step size must be > 0");
}

BoundResult theorem1_bound(const BoundInputs& in) {
  in.validate();
  const double c = 2.0 * in.heterogeneity +
                   2.0 * in.noise_bound * in.dimension /
                       std::sqrt(static_cast<double>(in.batch_size)) +
                   (1.5 * in.edge_rounds - 1.0) * in.smoothness * in.step_size;
  const double rhs =
      in.initial_gap / (in.step_size * in.global_rounds * in.edge_rounds) + c;
  return {c, rhs};
}

double corollary2_bound(double initial_gap, double sigma, int dimension,
                        double smoothness, int edge_rounds, int global_rounds) {
  const double c_tilde =
      2.0 * sigma * dimension + (1.5 * edge_rounds - 1.0) * smoothness;
  return (initial_gap / edge_rounds + c_tilde) /
         std::sqrt(static_cast<double>(global_rounds));
}

BoundResult theorem4_bound(const BoundInputs& in) {
  in.validate();
  const BoundResult base = theorem1_bound(in);
  const double psi_sqrt_d = in.quantizer_psi * std::sqrt(double(in.dimension));
  const double extra = psi_sqrt_d * (3.0 + psi_sqrt_d / 2.0) * in.smoothness *
                       in.step_size * in.edge_rounds;
  const double cz = base.constant + extra;
  return {cz,
          in.initial_gap / (in.step_size * in.global_rounds * in.edge_rounds) +
              cz};
}

ZetaEstimate estimate_zeta(FederatedObjective& objective,
                           const Hierarchy& hierarchy,
                           std::span<const std::vector<double>> probe_points) {
  if (probe_points.empty())
    throw ConfigError("estimate_zeta: at least one probe point required");
  const int d = objective.dim();
  const auto& K = kernels::active();

  std::vector<double> per_point(probe_points.size());
  std::vector<double> edge_grad(d), global_grad(d), device_grad(d), diff(d);
  std::vector<std::vector<double>> edge_grads(hierarchy.num_edges,
                                              std::vector<double>(d));

  for (std::size_t p = 0; p < probe_points.size(); ++p) {
    const double* w = probe_points[p].data();
    std::fill(global_grad.begin(), global_grad.end(), 0.0);
    for (int q = 0; q < hierarchy.num_edges; ++q) {
      std::fill(edge_grads[q].begin(), edge_grads[q].end(), 0.0);
      for (int k = 0; k < hierarchy.devices_per_edge[q]; ++k) {
        objective.device_full_gradient(q, k, w, device_grad.data());
        K.axpy(d, hierarchy.device_weights[q][k], device_grad.data(),
               edge_grads[q].data());
      }
      K.axpy(d, hierarchy.edge_weights[q], edge_grads[q].data(),
             global_grad.data());
    }
    double zeta = 0.0;
    for (int q = 0; q < hierarchy.num_edges; ++q) {
      for (int i = 0; i < d; ++i) diff[i] = edge_grads[q][i] - global_grad[i];
      zeta += hierarchy.edge_weights[q] * K.l1_norm(d, diff.data());
    }
    per_point[p] = zeta;
  }

  ZetaEstimate est;
  est.num_probe_points = static_cast<int>(per_point.size());
  est.value = std::accumulate(per_point.begin(), per_point.end(), 0.0) /
              per_point.size();
  if (per_point.size() > 1) {
    double var = 0.0;
    for (double z : per_point) var += (z - est.value) * (z - est.value);
    var /= (per_point.size() - 1);
    est.standard_error = std::sqrt(var / per_point.size());
  }
  return est;
}

double fit_slope(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

namespace {

ZetaScalingResult finish_scaling(std::vector<int> m_values,
                                 std::vector<double> mean_zeta) {
  ZetaScalingResult res;
  res.m_values = std::move(m_values);
  res.mean_zeta = std::move(mean_zeta);
  std::vector<double> lx(res.m_values.size()), ly(res.m_values.size());
  for (std::size_t i = 0; i < res.m_values.size(); ++i) {
    lx[i] = std::log(static_cast<double>(res.m_values[i]));
    ly[i] = std::log(res.mean_zeta[i]);
  }
  res.slope = fit_slope(lx, ly);
  return res;
}

}  // namespace

ZetaScalingResult zeta_scaling_mlp(const LabeledDataset& data, int num_edges,
                                   std::span<const int> m_values,
                                   int shard_size, int probe_points,
                                   std::span<const std::uint64_t> seeds,
                                   const MlpShape& shape) {
  std::vector<double> means;
  for (int m : m_values) {
    if (static_cast<std::int64_t>(num_edges) * m * shard_size > data.size())
      throw ConfigError("zeta_scaling_mlp: dataset too small for M=" +
                        std::to_string(m));
    double total = 0.0;
    int count = 0;
    for (std::uint64_t seed : seeds) {
      // disjoint IID shards of fixed size via a seeded global shuffle
      std::vector<std::int64_t> idx(data.size());
      std::iota(idx.begin(), idx.end(), 0);
      auto shuffle_rng = fork_rng(seed, {-1, m, -1, -1, "scaling_shuffle"});
      std::shuffle(idx.begin(), idx.end(), shuffle_rng.engine());

      PartitionedData part;
      part.shards.resize(num_edges);
      std::int64_t off = 0;
      for (int q = 0; q < num_edges; ++q) {
        part.shards[q].resize(m);
        for (int k = 0; k < m; ++k) {
          part.shards[q][k].assign(idx.begin() + off,
                                   idx.begin() + off + shard_size);
          off += shard_size;
        }
      }
      const Hierarchy h = derive_weights(part.shard_sizes());

      MlpFederatedObjective obj(shape, &data, nullptr, &part, 1, 1);
      std::vector<std::vector<double>> probes;
      for (int p = 0; p < probe_points; ++p) {
        auto rng = fork_rng(seed, {-1, m, -1, p, "probe_init"});
        probes.push_back(init_params(shape, rng).values);
      }
      const ZetaEstimate est = estimate_zeta(obj, h, probes);
      total += est.value * est.num_probe_points;
      count += est.num_probe_points;
    }
    means.push_back(total / count);
  }
  return finish_scaling({m_values.begin(), m_values.end()}, std::move(means));
}

ZetaScalingResult zeta_scaling_quadratic(
    const ModelConfig& model, int num_edges, std::span<const int> m_values,
    int probe_points, std::span<const std::uint64_t> seeds) {
  std::vector<double> means;
  for (int m : m_values) {
    double total = 0.0;
    int count = 0;
    for (std::uint64_t seed : seeds) {
      std::vector<std::vector<std::int64_t>> sizes(
          num_edges, std::vector<std::int64_t>(m, 1));
      const Hierarchy h = derive_weights(sizes);
      auto problem_rng = fork_rng(seed, {.purpose = "quadratic_problem"});
      QuadraticFederatedObjective obj(make_quadratic(model, problem_rng), &h,
                                      1, model.heterogeneity_std,
                                      model.init_radius, seed);
      std::vector<std::vector<double>> probes;
      for (int p = 0; p < probe_points; ++p) {
        auto rng = fork_rng(seed, {-1, m, -1, p, "probe_init"});
        std::vector<double> w(model.dimension);
        for (double& v : w) v = rng.uniform(-model.init_radius,
                                            model.init_radius);
        probes.push_back(std::move(w));
      }
      const ZetaEstimate est = estimate_zeta(obj, h, probes);
      total += est.value * est.num_probe_points;
      count += est.num_probe_points;
    }
    means.push_back(total / count);
  }
  return finish_scaling({m_values.begin(), m_values.end()}, std::move(means));
}

double binomial_vote_error(double p, int m) {
  if (!(p > 0.0) || !(p < 0.5))
    throw ConfigError("binomial_vote_error: need 0 < p < 1/2");
  if (m < 1) throw ConfigError("binomial_vote_error: need M >= 1");
  const double q = 1.0 - p;
  // C(m, k) built iteratively; exact in double for the small M used here
  double err = 0.0;
  double binom = 1.0;  // C(m, 0)
  for (int k = 0; k <= m; ++k) {
    if (2 * k > m) {
      err += binom * std::pow(p, k) * std::pow(q, m - k);
    } else if (2 * k == m) {
      err += 0.5 * binom * std::pow(p, k) * std::pow(q, m - k);
    }
    binom = binom * (m - k) / (k + 1);
  }
  return err;
}

double vote_error_experiment(double p, int m, int trials, RngStream& rng) {
  if (!(p > 0.0) || !(p < 0.5))
    throw ConfigError(
        "vote_error_experiment: need 0 < p < 1/2 (the dominance argument "
        "requires P_e < 1/2)");
  if (m < 1 || trials < 1)
    throw ConfigError("vote_error_experiment: need M >= 1 and trials >= 1");

  // One coordinate per trial: M sign vectors of dimension `trials`, each
  // coordinate an independent flip of the true sign +1.
  std::vector<SignVector> votes(m);
  for (int k = 0; k < m; ++k) {
    votes[k].signs.resize(trials);
    for (int i = 0; i < trials; ++i)
      votes[k].signs[i] = rng.uniform() < p ? -1 : 1;
  }
  const SignVector decoded =
      majority_vote(votes, TiePolicy::Random, rng);
  std::int64_t errors = 0;
  for (int i = 0; i < trials; ++i)
    if (decoded.signs[i] != 1) ++errors;
  return static_cast<double>(errors) / trials;
}

BitReport bit_accounting(int dimension, const Schedule& schedule,
                         const Hierarchy& hierarchy, WireMode mode,
                         double reporting_interval_s, int active_components) {
  if (!(reporting_interval_s > 0))
    throw ConfigError("bit_accounting: interval must be positive");
  BitReport r;
  const std::uint64_t d = static_cast<std::uint64_t>(dimension);
  switch (mode) {
    case WireMode::Sign:
      r.uplink_bits_per_device_step = d;
      r.downlink_bits_per_step = d;
      break;
    case WireMode::Full32:
      r.uplink_bits_per_device_step = 32 * d;
      r.downlink_bits_per_step = 32 * d;
      break;
    case WireMode::QuantizedDownlink: {
      SparsifierSpec spec{dimension, active_components};
      spec.validate();
      r.uplink_bits_per_device_step = d;
      r.downlink_bits_per_step = d;
      std::uint64_t idx_bits = 0;
      while ((1ULL << idx_bits) < d) ++idx_bits;
      r.downlink_bits_per_round_extra =
          static_cast<std::uint64_t>(active_components) * (idx_bits + 32);
      break;
    }
  }
  r.uplink_bps_per_device =
      static_cast<double>(r.uplink_bits_per_device_step) /
      reporting_interval_s;
  const double steps_per_round = static_cast<double>(schedule.edge_rounds);
  r.downlink_bps = (static_cast<double>(r.downlink_bits_per_step) +
                    static_cast<double>(r.downlink_bits_per_round_extra) /
                        std::max(1.0, steps_per_round)) /
                   reporting_interval_s;
  (void)hierarchy;
  return r;
}

}  // namespace hiersign
