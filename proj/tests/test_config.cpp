#include <doctest.h>

#include <cmath>

#include "hiersign/config.hpp"
#include "hiersign/rng.hpp"

using namespace hiersign;

TEST_SUITE_BEGIN("config");

TEST_CASE("derive_weights normalizes the two-edge example") {
  const Hierarchy h = derive_weights({{100, 100}, {200}});
  CHECK(h.num_edges == 2);
  CHECK(h.edge_samples == std::vector<std::int64_t>{200, 200});
  CHECK(h.total_samples == 400);
  CHECK(h.edge_weights[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(h.edge_weights[1] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(h.device_weights[0][0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(h.device_weights[0][1] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(h.device_weights[1][0] == 1.0);
}

TEST_CASE("derive_weights degenerate single device") {
  const Hierarchy h = derive_weights({{1}});
  CHECK(h.edge_weights == std::vector<double>{1.0});
  CHECK(h.device_weights[0] == std::vector<double>{1.0});
}

TEST_CASE("derive_weights on a 4x5 even split of 240000 samples") {
  // 240000 / 20 devices = 12000 per shard
  std::vector<std::vector<std::int64_t>> sizes(
      4, std::vector<std::int64_t>(5, 12000));
  const Hierarchy h = derive_weights(sizes);
  for (int q = 0; q < 4; ++q) {
    CHECK(h.edge_weights[q] == doctest::Approx(0.25).epsilon(1e-15));
    for (int k = 0; k < 5; ++k)
      CHECK(h.device_weights[q][k] == doctest::Approx(0.2).epsilon(1e-15));
  }
  CHECK(h.total_samples == 240000);
}

TEST_CASE("derive_weights rejects empty edges and zero shards by index") {
  CHECK_THROWS_WITH_AS(derive_weights({{10}, {}}),
                       doctest::Contains("edge 1"), ConfigError);
  CHECK_THROWS_WITH_AS(derive_weights({{10, 0}}),
                       doctest::Contains("device 1"), ConfigError);
  CHECK_THROWS_AS(derive_weights({}), ConfigError);
}

TEST_CASE("weight conservation holds for random hierarchies") {
  auto rng = fork_rng(3, {.purpose = "hierarchy_gen"});
  for (int trial = 0; trial < 50; ++trial) {
    const int q = 1 + static_cast<int>(rng.uniform_below(8));
    std::vector<std::vector<std::int64_t>> sizes(q);
    for (auto& edge : sizes) {
      const int m = 1 + static_cast<int>(rng.uniform_below(6));
      for (int k = 0; k < m; ++k)
        edge.push_back(1 + static_cast<std::int64_t>(rng.uniform_below(5000)));
    }
    const Hierarchy h = derive_weights(sizes);
    double esum = 0.0;
    std::int64_t n = 0;
    for (int e = 0; e < h.num_edges; ++e) {
      esum += h.edge_weights[e];
      n += h.edge_samples[e];
      double dsum = 0.0;
      for (double w : h.device_weights[e]) dsum += w;
      CHECK(std::fabs(dsum - 1.0) <= 1e-12);
    }
    CHECK(n == h.total_samples);
    CHECK(std::fabs(esum - 1.0) <= 1e-12);
  }
}

TEST_CASE("config parsing round trip") {
  const char* text = R"({
    "algorithm": "hier_sgd",
    "hierarchy": {"num_edges": 2, "devices_per_edge": [3, 4]},
    "schedule": {"global_rounds": 7, "edge_rounds": 5, "step_size": 0.25,
                 "batch_size": 16, "tie_policy": "plus_one", "rng_seed": 99},
    "downlink": {"enabled": true, "active_components": 10},
    "partition": {"mode": "dirichlet", "alpha": 0.3, "rng_seed": 5},
    "model": {"kind": "mlp", "hidden": 8, "activation": "tanh"},
    "eval": {"grad_batch": 128}
  })";
  const ExperimentConfig cfg = parse_config(text);
  CHECK(cfg.algorithm == "hier_sgd");
  CHECK(cfg.num_edges == 2);
  CHECK(cfg.devices_per_edge == std::vector<int>{3, 4});
  CHECK(cfg.schedule.global_rounds == 7);
  CHECK(cfg.schedule.edge_rounds == 5);
  CHECK(cfg.schedule.step_size == 0.25);
  CHECK(cfg.schedule.tie_policy == TiePolicy::PlusOne);
  CHECK(cfg.downlink.active_components == 10);
  CHECK(cfg.partition.mode == PartitionMode::Dirichlet);
  CHECK(cfg.model.hidden == 8);
  CHECK(cfg.model.activation == Activation::Tanh);
  CHECK(cfg.eval.grad_batch == 128);
}

TEST_CASE("unknown keys are a hard error naming the path") {
  CHECK_THROWS_WITH_AS(parse_config(R"({"schedule": {"step_sze": 0.1}})"),
                       doctest::Contains("schedule.step_sze"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(R"({"bogus": 1})"),
                       doctest::Contains("bogus"), ConfigError);
}

TEST_CASE("invalid values are rejected") {
  CHECK_THROWS_AS(parse_config(R"({"schedule": {"step_size": 0.0}})"),
                  ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"schedule": {"edge_rounds": 0}})"),
                  ConfigError);
  CHECK_THROWS_AS(
      parse_config(R"({"partition": {"mode": "dirichlet", "alpha": 0.0}})"),
      ConfigError);
  CHECK_THROWS_AS(
      parse_config(R"({"downlink": {"enabled": true, "active_components": 0}})"),
      ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"algorithm": "sgd"})"), ConfigError);
  CHECK_THROWS_AS(parse_config("not json"), ConfigError);
}

TEST_SUITE_END();
