#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "hiersign/plan.hpp"
#include "testdata.hpp"

using namespace hiersign;
namespace fs = std::filesystem;

TEST_SUITE_BEGIN("plan");

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("hiersign_plan_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

ExperimentPlan tiny_quadratic_plan(const fs::path& out) {
  ExperimentPlan plan;
  plan.base.model.kind = "quadratic";
  plan.base.model.dimension = 12;
  plan.base.model.noise_std = 0.5;
  plan.base.num_edges = 2;
  plan.base.devices_per_edge = {2, 2};
  plan.base.schedule.global_rounds = 3;
  plan.base.schedule.edge_rounds = 2;
  plan.base.schedule.step_size = 0.05;
  plan.base.schedule.batch_size = 2;
  plan.synthetic = true;
  plan.seeds = {1, 2};
  plan.out_dir = out;
  return plan;
}

}  // namespace

TEST_CASE("emit_csv writes a header-only file for no records") {
  const fs::path p = fs::temp_directory_path() / "hiersign_empty.csv";
  emit_csv(p, {});
  CHECK(slurp(p) == csv_header() + "\n");
}

TEST_CASE("emit_csv sorts rows by (sweep_value, seed, t)") {
  struct Key {
    double sv;
    std::uint64_t seed;
    int t;
  };
  std::vector<CsvRecord> recs;
  for (const Key& key : {Key{2.0, 1, 0}, Key{1.0, 2, 1}, Key{1.0, 1, 1},
                         Key{1.0, 1, 0}, Key{2.0, 1, 1}}) {
    CsvRecord r;
    r.sweep_value = key.sv;
    r.seed = key.seed;
    r.t = key.t;
    recs.push_back(r);
  }
  const fs::path p = fs::temp_directory_path() / "hiersign_sorted.csv";
  emit_csv(p, recs);
  const std::string text = slurp(p);
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  REQUIRE(lines.size() == 6);
  CHECK(lines[1].find("run,,1,none,1,0") == 0);
  CHECK(lines[2].find("run,,1,none,1,1") == 0);
  CHECK(lines[3].find("run,,2,none,1,1") == 0);
  CHECK(lines[4].find("run,,1,none,2,0") == 0);
}

TEST_CASE("floats render with 9 significant digits") {
  CHECK(format_g9(2.302585092994046) == "2.30258509");
  CHECK(format_g9(0.0001) == "0.0001");
  CHECK(format_g9(123456789012.0) == "1.23456789e+11");
}

TEST_CASE("synthetic plan reruns are byte-identical and merge all rows") {
  const fs::path out1 = fresh_dir("a"), out2 = fresh_dir("b");
  const PlanOutcome o1 = run_plan(tiny_quadratic_plan(out1));
  const PlanOutcome o2 = run_plan(tiny_quadratic_plan(out2));

  REQUIRE(o1.run_files.size() == 2);
  std::size_t rows = 0;
  for (const auto& f : o1.run_files) {
    const std::string text = slurp(f);
    rows += static_cast<std::size_t>(
                std::count(text.begin(), text.end(), '\n')) -
            1;
  }
  CHECK(rows == o1.all_records.size());
  CHECK(slurp(o1.summary_file) == slurp(o2.summary_file));
  CHECK(slurp(o1.manifest_file) == slurp(o2.manifest_file));
  for (std::size_t i = 0; i < o1.run_files.size(); ++i)
    CHECK(slurp(o1.run_files[i]) == slurp(o2.run_files[i]));
}

TEST_CASE("worker count does not change plan outputs") {
  const fs::path out1 = fresh_dir("w1"), out8 = fresh_dir("w8");
  ExperimentPlan p1 = tiny_quadratic_plan(out1);
  ExperimentPlan p8 = tiny_quadratic_plan(out8);
  p1.workers = 1;
  p8.workers = 8;
  const PlanOutcome o1 = run_plan(p1);
  const PlanOutcome o8 = run_plan(p8);
  CHECK(slurp(o1.summary_file) == slurp(o8.summary_file));
}

TEST_CASE("T_E sweep over an MLP on generated IDX data is deterministic") {
  const fs::path data = fresh_dir("data");
  const LabeledDataset train = testdata::synthetic_digits(400, 3);
  const LabeledDataset test = testdata::synthetic_digits(100, 4);
  write_idx(data / "train.idx3", data / "train.idx1", train, 28, 28);
  write_idx(data / "test.idx3", data / "test.idx1", test, 28, 28);

  auto make_plan = [&](const fs::path& out) {
    ExperimentPlan plan;
    plan.base.num_edges = 2;
    plan.base.devices_per_edge = {2, 2};
    plan.base.schedule.global_rounds = 2;
    plan.base.schedule.step_size = 0.01;
    plan.base.schedule.batch_size = 8;
    plan.base.model.hidden = 8;
    plan.base.data.train_images = (data / "train.idx3").string();
    plan.base.data.train_labels = (data / "train.idx1").string();
    plan.base.data.test_images = (data / "test.idx3").string();
    plan.base.data.test_labels = (data / "test.idx1").string();
    plan.base.eval.grad_batch = 64;
    plan.axis = SweepAxis::EdgeRounds;
    plan.values = {parse_sweep_point(SweepAxis::EdgeRounds, "1"),
                   parse_sweep_point(SweepAxis::EdgeRounds, "3")};
    plan.seeds = {7};
    plan.out_dir = out;
    plan.workers = 4;
    return plan;
  };
  const PlanOutcome o1 = run_plan(make_plan(fresh_dir("mlp1")));
  const PlanOutcome o2 = run_plan(make_plan(fresh_dir("mlp2")));
  CHECK(slurp(o1.summary_file) == slurp(o2.summary_file));
  REQUIRE(o1.run_files.size() == 2);
  CHECK(slurp(o1.run_files[0]) != slurp(o1.run_files[1]));  // T_E matters
}

TEST_CASE("clustering sweeps enforce the fixed device budget") {
  ExperimentPlan plan = tiny_quadratic_plan(fresh_dir("budget"));
  plan.axis = SweepAxis::Clustering;
  plan.values = {parse_sweep_point(SweepAxis::Clustering, "6x8"),
                 parse_sweep_point(SweepAxis::Clustering, "4x4")};
  CHECK_THROWS_WITH_AS(plan.validate(), doctest::Contains("budget"),
                       ConfigError);
  plan.values[1] = parse_sweep_point(SweepAxis::Clustering, "8x6");
  CHECK_NOTHROW(plan.validate());
}

TEST_CASE("sweep point parsing rejects malformed values") {
  CHECK_THROWS_AS(parse_sweep_point(SweepAxis::EdgeRounds, "0"), ConfigError);
  CHECK_THROWS_AS(parse_sweep_point(SweepAxis::Clustering, "6-8"),
                  ConfigError);
  CHECK_THROWS_AS(parse_sweep_point(SweepAxis::NOverD, "1.5"), ConfigError);
  CHECK_THROWS_AS(parse_sweep_point(SweepAxis::Alpha, "-1"), ConfigError);
  CHECK_THROWS_AS(sweep_axis_from_string("frequency"), ConfigError);
  CHECK(parse_sweep_point(SweepAxis::Algorithm, "hier_sgd").numeric == 1.0);
}

TEST_SUITE_END();
