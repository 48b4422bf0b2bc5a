#include "hiersign/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <numeric>

#include "hiersign/kernels.hpp"
#include "hiersign/parallel.hpp"

namespace hiersign {

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::HierSignSgd: return "hier_signsgd";
    case Algorithm::HierSgd: return "hier_sgd";
    case Algorithm::HierSignSgdQuantizedDownlink: return "hier_signsgd_qdl";
  }
  return "hier_signsgd";
}

Algorithm algorithm_from_string(const std::string& s) {
  if (s == "hier_signsgd") return Algorithm::HierSignSgd;
  if (s == "hier_sgd") return Algorithm::HierSgd;
  if (s == "hier_signsgd_qdl") return Algorithm::HierSignSgdQuantizedDownlink;
  throw ConfigError("unknown algorithm: " + s);
}

std::uint64_t hash_params(std::span<const double> w) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : w) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

std::vector<double> cloud_aggregate(
    std::span<const std::vector<double>> edge_models,
    std::span<const double> edge_weights) {
  if (edge_models.empty())
    throw TrainError("cloud_aggregate: no edge models");
  if (edge_models.size() != edge_weights.size())
    throw TrainError("cloud_aggregate: weight/model count mismatch");
  const std::size_t d = edge_models[0].size();
  double wsum = 0.0;
  for (std::size_t q = 0; q < edge_models.size(); ++q) {
    if (edge_models[q].size() != d)
      throw TrainError("cloud_aggregate: dimension mismatch at edge " +
                       std::to_string(q));
    wsum += edge_weights[q];
  }
  if (std::fabs(wsum - 1.0) > 1e-9)
    throw TrainError("cloud_aggregate: weights sum to " +
                     std::to_string(wsum) + ", expected 1");
  std::vector<double> out(d, 0.0);
  for (std::size_t q = 0; q < edge_models.size(); ++q)
    kernels::active().axpy(static_cast<int>(d), edge_weights[q],
                           edge_models[q].data(), out.data());
  return out;
}

// ---------------------------------------------------------------------------
// Objectives

MlpFederatedObjective::MlpFederatedObjective(MlpShape shape,
                                             const LabeledDataset* train,
                                             const LabeledDataset* test,
                                             const PartitionedData* partition,
                                             int batch_size,
                                             int eval_grad_batch)
    : shape_(shape),
      train_(train),
      test_(test),
      partition_(partition),
      batch_size_(batch_size),
      eval_grad_batch_(eval_grad_batch) {
  assigned_.clear();
  for (const auto& edge : partition_->shards)
    for (const auto& shard : edge)
      assigned_.insert(assigned_.end(), shard.begin(), shard.end());
}

MlpWorkspace& MlpFederatedObjective::workspace() {
  thread_local MlpWorkspace ws;
  return ws;
}

void MlpFederatedObjective::device_gradient(int t, int tau, int q, int k,
                                            const double* w,
                                            std::uint64_t master_seed,
                                            double* g) {
  auto rng = fork_rng(master_seed, {t, tau, q, k, "batch"});
  const auto& shard = partition_->shards[q][k];
  const auto batch = sample_batch(shard, batch_size_, rng);
  backward_into(shape_, w, *train_, batch, workspace(), g);
}

void MlpFederatedObjective::device_full_gradient(int q, int k, const double* w,
                                                 double* g) {
  full_gradient(shape_, w, *train_, partition_->shards[q][k], workspace(), g);
}

EvalReport MlpFederatedObjective::evaluate(int t, const double* w,
                                           std::uint64_t master_seed) {
  EvalReport r;

  // Chunked full-set metrics accumulated in fixed chunk order; chunks may be
  // computed on any number of threads without changing the result.
  constexpr int kChunk = 2048;
  auto metrics_over = [&](const LabeledDataset& data,
                          std::span<const std::int64_t> idx) {
    const int chunks = static_cast<int>((idx.size() + kChunk - 1) / kChunk);
    std::vector<LossAccuracy> part(chunks);
    parallel_for(chunks, eval_workers_, [&](int c) {
      const std::size_t off = static_cast<std::size_t>(c) * kChunk;
      const std::size_t len = std::min<std::size_t>(kChunk, idx.size() - off);
      part[c] = forward_metrics(shape_, w, data, idx.subspan(off, len),
                                workspace());
    });
    LossAccuracy total;
    for (int c = 0; c < chunks; ++c) {
      const std::size_t off = static_cast<std::size_t>(c) * kChunk;
      const std::size_t len = std::min<std::size_t>(kChunk, idx.size() - off);
      const double frac = static_cast<double>(len) / idx.size();
      total.loss += part[c].loss * frac;
      total.accuracy += part[c].accuracy * frac;
    }
    return total;
  };

  const LossAccuracy train = metrics_over(*train_, assigned_);
  r.train_loss = train.loss;
  r.train_acc = train.accuracy;

  if (test_ != nullptr && test_->size() > 0) {
    std::vector<std::int64_t> all(test_->size());
    std::iota(all.begin(), all.end(), 0);
    const LossAccuracy test = metrics_over(*test_, all);
    r.test_loss = test.loss;
    r.test_acc = test.accuracy;
  } else {
    r.test_loss = r.train_loss;
    r.test_acc = r.train_acc;
  }

  // || grad F ||_1 estimated on a per-round minibatch of assigned samples;
  // uniform-over-union sampling matches the 1/N global weighting exactly.
  auto rng = fork_rng(master_seed, {t, -1, -1, -1, "eval_grad"});
  const auto batch = sample_batch(
      assigned_, std::min<int>(eval_grad_batch_,
                               static_cast<int>(assigned_.size())),
      rng);
  std::vector<double> g(shape_.dim());
  full_gradient(shape_, w, *train_, batch, workspace(), g.data());
  r.grad_l1 = kernels::active().l1_norm(shape_.dim(), g.data());
  return r;
}

std::vector<double> MlpFederatedObjective::initial_params(
    std::uint64_t master_seed) {
  auto rng = fork_rng(master_seed, {.purpose = "init"});
  return init_params(shape_, rng).values;
}

QuadraticFederatedObjective::QuadraticFederatedObjective(
    QuadraticObjective objective, const Hierarchy* hierarchy, int batch_size,
    double heterogeneity_std, double init_radius, std::uint64_t problem_seed)
    : objective_(std::move(objective)),
      hierarchy_(hierarchy),
      effective_noise_std_(objective_.noise_std / std::sqrt(double(batch_size))),
      heterogeneity_std_(heterogeneity_std),
      init_radius_(init_radius),
      problem_seed_(problem_seed) {
  offsets_.resize(hierarchy_->num_edges);
  for (int q = 0; q < hierarchy_->num_edges; ++q) {
    offsets_[q].resize(hierarchy_->devices_per_edge[q]);
    if (heterogeneity_std_ > 0.0) {
      for (int k = 0; k < hierarchy_->devices_per_edge[q]; ++k) {
        auto rng = fork_rng(problem_seed_, {-1, -1, q, k, "hetero"});
        auto& off = offsets_[q][k];
        off.resize(objective_.dim());
        for (double& v : off) v = rng.normal(0.0, heterogeneity_std_);
      }
    }
  }
}

void QuadraticFederatedObjective::device_gradient(int t, int tau, int q, int k,
                                                  const double* w,
                                                  std::uint64_t master_seed,
                                                  double* g) {
  const int d = objective_.dim();
  objective_.exact_gradient({w, static_cast<std::size_t>(d)}, g);
  if (!offsets_[q][k].empty())
    kernels::active().axpy(d, 1.0, offsets_[q][k].data(), g);
  if (effective_noise_std_ > 0.0) {
    auto rng = fork_rng(master_seed, {t, tau, q, k, "noise"});
    for (int i = 0; i < d; ++i) g[i] += rng.normal(0.0, effective_noise_std_);
  }
}

void QuadraticFederatedObjective::device_full_gradient(int q, int k,
                                                       const double* w,
                                                       double* g) {
  objective_.exact_gradient({w, static_cast<std::size_t>(objective_.dim())}, g);
  if (!offsets_[q][k].empty())
    kernels::active().axpy(objective_.dim(), 1.0, offsets_[q][k].data(), g);
}

EvalReport QuadraticFederatedObjective::evaluate(int /*t*/, const double* w,
                                                 std::uint64_t /*master_seed*/) {
  const int d = objective_.dim();
  EvalReport r;
  r.train_loss = objective_.value({w, static_cast<std::size_t>(d)});
  r.test_loss = r.train_loss;
  // exact global gradient: curvature term plus the weighted mean offset
  std::vector<double> g(d);
  objective_.exact_gradient({w, static_cast<std::size_t>(d)}, g.data());
  if (heterogeneity_std_ > 0.0) {
    for (int q = 0; q < hierarchy_->num_edges; ++q)
      for (int k = 0; k < hierarchy_->devices_per_edge[q]; ++k)
        kernels::active().axpy(
            d, hierarchy_->edge_weights[q] * hierarchy_->device_weights[q][k],
            offsets_[q][k].data(), g.data());
  }
  r.grad_l1 = kernels::active().l1_norm(d, g.data());
  return r;
}

std::vector<double> QuadraticFederatedObjective::initial_params(
    std::uint64_t master_seed) {
  auto rng = fork_rng(master_seed, {.purpose = "init"});
  std::vector<double> w(objective_.dim());
  for (int i = 0; i < objective_.dim(); ++i)
    w[i] = objective_.optimum[i] + rng.uniform(-init_radius_, init_radius_);
  return w;
}

double QuadraticFederatedObjective::initial_value(std::uint64_t master_seed) {
  const auto w = initial_params(master_seed);
  return objective_.value(w);
}

// ---------------------------------------------------------------------------
// Protocol loop

namespace {

constexpr std::uint64_t kFloatBits = 32;  // full-precision wire convention

std::uint64_t sign_payload_bits(int d) {
  return static_cast<std::uint64_t>(packed_size(d)) * 8;
}

std::uint64_t index_bits(int d) {
  std::uint64_t bits = 0;
  while ((1ULL << bits) < static_cast<std::uint64_t>(d)) ++bits;
  return bits;
}

struct EdgeRuntime {
  std::vector<double> v;      // v_q^(t,tau)
  std::vector<double> v_ref;  // v_q^(t,0) lineage (quantized downlink only)
};

struct RoundClock {
  std::chrono::steady_clock::time_point start =
      std::chrono::steady_clock::now();
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start)
        .count();
  }
};

}  // namespace

static std::vector<RoundLog> run_impl(Algorithm algo,
                                      const Hierarchy& hierarchy,
                                      const Schedule& schedule,
                                      const DownlinkConfig& downlink,
                                      FederatedObjective& objective,
                                      const RunOptions& opts) {
  schedule.validate();
  const int d = objective.dim();
  const int num_edges = hierarchy.num_edges;
  const bool quantized = algo == Algorithm::HierSignSgdQuantizedDownlink;
  if (quantized) {
    if (!downlink.enabled)
      throw ConfigError("quantized downlink run requires downlink.enabled");
    downlink.validate(d);
  }
  const auto& K = kernels::active();
  const std::uint64_t master = schedule.rng_seed;

  // flattened device table for worker scheduling
  struct DeviceRef {
    int q, k, slot;
  };
  std::vector<DeviceRef> devices;
  std::vector<int> edge_slot_base(num_edges);
  for (int q = 0; q < num_edges; ++q) {
    edge_slot_base[q] = static_cast<int>(devices.size());
    for (int k = 0; k < hierarchy.devices_per_edge[q]; ++k)
      devices.push_back({q, k, static_cast<int>(devices.size())});
  }
  const int total_devices = static_cast<int>(devices.size());

  std::vector<double> w = objective.initial_params(master);
  if (static_cast<int>(w.size()) != d)
    throw TrainError("objective initial_params dimension mismatch");

  std::vector<EdgeRuntime> edges(num_edges);
  for (auto& e : edges) {
    e.v.assign(d, 0.0);
    if (quantized) e.v_ref = w;  // v_q^(0,0) = w^(0)
  }

  const bool sign_based = algo != Algorithm::HierSgd;
  std::vector<std::vector<std::int8_t>> device_signs;
  std::vector<std::vector<double>> device_grads;
  if (sign_based) {
    device_signs.assign(total_devices, std::vector<std::int8_t>(d));
  } else {
    device_grads.assign(total_devices, std::vector<double>(d));
  }
  const std::uint64_t vote_bits = sign_payload_bits(d);
  const std::uint64_t model_bits = static_cast<std::uint64_t>(d) * kFloatBits;
  const std::uint64_t sparse_bits =
      quantized ? static_cast<std::uint64_t>(downlink.active_components) *
                      (index_bits(d) + kFloatBits)
                : 0;

  std::vector<RoundLog> logs;
  logs.reserve(schedule.global_rounds + 1);

  auto snapshot = [&](int t, std::uint64_t up, std::uint64_t down,
                      double secs) {
    const EvalReport r = objective.evaluate(t, w.data(), master);
    if (!std::isfinite(r.train_loss))
      throw TrainError("NaN loss at global round t=" + std::to_string(t));
    RoundLog log;
    log.t = t;
    log.model_hash = hash_params(w);
    log.train_loss = r.train_loss;
    log.test_loss = r.test_loss;
    log.train_acc = r.train_acc;
    log.test_acc = r.test_acc;
    log.grad_l1 = r.grad_l1;
    log.uplink_bits = up;
    log.downlink_bits = down;
    log.wall_seconds = secs;
    logs.push_back(std::move(log));
    if (opts.trace != nullptr) opts.trace->models.push_back(w);
  };

  // t = 0: the initial model reaches every cluster once, full precision.
  snapshot(0, 0,
           static_cast<std::uint64_t>(num_edges) * model_bits, 0.0);

  std::vector<SignVector> votes_scratch;
  std::vector<int> mask_scratch;

  for (int t = 1; t <= schedule.global_rounds; ++t) {
    RoundClock clock;
    std::uint64_t uplink = 0;
    std::uint64_t down = 0;
    if (opts.trace != nullptr)
      opts.trace->votes.emplace_back(schedule.edge_rounds,
                                     std::vector<SignVector>());

    // downlink broadcast / device model initialization
    for (int q = 0; q < num_edges; ++q) {
      if (!quantized) {
        edges[q].v = w;
        down += model_bits;
      } else {
        // v_ref <- v_ref + Z(w - v_ref); devices and edge replicate this
        std::vector<double>& v_ref = edges[q].v_ref;
        std::vector<double> delta(d);
        for (int i = 0; i < d; ++i) delta[i] = w[i] - v_ref[i];
        auto rng = fork_rng(master, {t, -1, q, -1, "mask"});
        SparsifierSpec spec{d, downlink.active_components};
        sparsify_accumulate(delta, spec, rng, mask_scratch, v_ref.data());
        edges[q].v = v_ref;
        down += sparse_bits;
      }
    }

    for (int tau = 0; tau < schedule.edge_rounds; ++tau) {
      // device gradients against the replicated edge snapshot, in parallel
      parallel_for(total_devices, opts.workers, [&](int idx) {
        const DeviceRef& dev = devices[idx];
        thread_local std::vector<double> grad;
        grad.resize(d);
        objective.device_gradient(t, tau, dev.q, dev.k,
                                  edges[dev.q].v.data(), master, grad.data());
        if (sign_based) {
          for (int i = 0; i < d; ++i)
            if (std::isnan(grad[i]))
              throw TrainError("NaN gradient at (t=" + std::to_string(t) +
                               ", tau=" + std::to_string(tau) + ", q=" +
                               std::to_string(dev.q) + ", k=" +
                               std::to_string(dev.k) + ")");
          K.sign_pm1(d, grad.data(), device_signs[dev.slot].data());
        } else {
          std::copy(grad.begin(), grad.end(), device_grads[dev.slot].begin());
        }
      });

      // per-edge aggregation + joint step, fixed device order
      for (int q = 0; q < num_edges; ++q) {
        const int m = hierarchy.devices_per_edge[q];
        if (sign_based) {
          std::vector<std::int16_t> acc(d, 0);
          for (int k = 0; k < m; ++k)
            K.vote_accumulate(d, device_signs[edge_slot_base[q] + k].data(),
                              acc.data());
          auto tie_rng = fork_rng(master, {t, tau, q, -1, "tie"});
          SignVector s;
          s.signs.resize(d);
          for (int i = 0; i < d; ++i) {
            if (acc[i] > 0) {
              s.signs[i] = 1;
            } else if (acc[i] < 0) {
              s.signs[i] = -1;
            } else {
              switch (schedule.tie_policy) {
                case TiePolicy::Random:
                  s.signs[i] = tie_rng.coin() ? 1 : -1;
                  break;
                case TiePolicy::PlusOne: s.signs[i] = 1; break;
                case TiePolicy::Zero: s.signs[i] = 0; break;
              }
            }
          }
          K.sign_step(d, schedule.step_size, s.signs.data(),
                      edges[q].v.data());
          uplink += static_cast<std::uint64_t>(m) * vote_bits;
          down += vote_bits;
          if (opts.trace != nullptr)
            opts.trace->votes.back()[tau].push_back(std::move(s));
        } else {
          // shard-weighted mean gradient, then one descent step
          std::vector<double> mean(d, 0.0);
          for (int k = 0; k < m; ++k)
            K.axpy(d, hierarchy.device_weights[q][k],
                   device_grads[edge_slot_base[q] + k].data(), mean.data());
          if (!std::isfinite(K.l1_norm(d, mean.data())))
            throw TrainError("non-finite edge gradient at (t=" +
                             std::to_string(t) + ", tau=" +
                             std::to_string(tau) + ", q=" + std::to_string(q) +
                             ")");
          K.axpy(d, -schedule.step_size, mean.data(), edges[q].v.data());
          uplink += static_cast<std::uint64_t>(m) * model_bits;
          down += model_bits;
        }
      }
    }

    // cloud aggregation
    std::fill(w.begin(), w.end(), 0.0);
    for (int q = 0; q < num_edges; ++q)
      K.axpy(d, hierarchy.edge_weights[q], edges[q].v.data(), w.data());

    snapshot(t, uplink, down, clock.elapsed());
  }
  return logs;
}

std::vector<RoundLog> run_hier_signsgd(const Hierarchy& hierarchy,
                                       const Schedule& schedule,
                                       FederatedObjective& objective,
                                       const RunOptions& opts) {
  return run_impl(Algorithm::HierSignSgd, hierarchy, schedule, {}, objective,
                  opts);
}

std::vector<RoundLog> run_hier_sgd(const Hierarchy& hierarchy,
                                   const Schedule& schedule,
                                   FederatedObjective& objective,
                                   const RunOptions& opts) {
  return run_impl(Algorithm::HierSgd, hierarchy, schedule, {}, objective,
                  opts);
}

std::vector<RoundLog> run_hier_signsgd_quantized_downlink(
    const Hierarchy& hierarchy, const Schedule& schedule,
    const DownlinkConfig& downlink, FederatedObjective& objective,
    const RunOptions& opts) {
  return run_impl(Algorithm::HierSignSgdQuantizedDownlink, hierarchy, schedule,
                  downlink, objective, opts);
}

std::vector<RoundLog> run_protocol(Algorithm algo, const Hierarchy& hierarchy,
                                   const Schedule& schedule,
                                   const DownlinkConfig& downlink,
                                   FederatedObjective& objective,
                                   const RunOptions& opts) {
  switch (algo) {
    case Algorithm::HierSignSgd:
      return run_hier_signsgd(hierarchy, schedule, objective, opts);
    case Algorithm::HierSgd:
      return run_hier_sgd(hierarchy, schedule, objective, opts);
    case Algorithm::HierSignSgdQuantizedDownlink:
      return run_hier_signsgd_quantized_downlink(hierarchy, schedule, downlink,
                                                 objective, opts);
  }
  throw ConfigError("unknown algorithm");
}

}  // namespace hiersign
