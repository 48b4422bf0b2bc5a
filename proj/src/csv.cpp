#include "hiersign/csv.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

namespace hiersign {

CsvRecord to_record(const RoundLog& log, const std::string& algorithm,
                    std::uint64_t seed, const std::string& sweep_axis,
                    double sweep_value) {
  CsvRecord r;
  r.algorithm = algorithm;
  r.seed = seed;
  r.sweep_axis = sweep_axis;
  r.sweep_value = sweep_value;
  r.t = log.t;
  r.train_loss = log.train_loss;
  r.test_loss = log.test_loss;
  r.train_acc = log.train_acc;
  r.test_acc = log.test_acc;
  r.grad_l1 = log.grad_l1;
  r.uplink_bits = log.uplink_bits;
  r.downlink_bits = log.downlink_bits;
  return r;
}

std::string format_g9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string csv_header() {
  return "record_type,algorithm,seed,sweep_axis,sweep_value,t,train_loss,"
         "test_loss,train_acc,test_acc,grad_l1,uplink_bits,downlink_bits";
}

std::string to_csv_line(const CsvRecord& r) {
  auto opt = [](const std::optional<double>& v) {
    return v.has_value() ? format_g9(*v) : std::string();
  };
  auto opt_u64 = [](const std::optional<std::uint64_t>& v) {
    return v.has_value() ? std::to_string(*v) : std::string();
  };
  std::string line;
  line.reserve(160);
  line += r.record_type;
  line += ',';
  line += r.algorithm;
  line += ',';
  line += std::to_string(r.seed);
  line += ',';
  line += r.sweep_axis;
  line += ',';
  line += format_g9(r.sweep_value);
  line += ',';
  line += std::to_string(r.t);
  line += ',';
  line += opt(r.train_loss);
  line += ',';
  line += opt(r.test_loss);
  line += ',';
  line += opt(r.train_acc);
  line += ',';
  line += opt(r.test_acc);
  line += ',';
  line += opt(r.grad_l1);
  line += ',';
  line += opt_u64(r.uplink_bits);
  line += ',';
  line += opt_u64(r.downlink_bits);
  return line;
}

void emit_csv(const std::filesystem::path& path,
              std::span<const CsvRecord> records) {
  std::vector<const CsvRecord*> sorted;
  sorted.reserve(records.size());
  for (const auto& r : records) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const CsvRecord* a, const CsvRecord* b) {
                     if (a->sweep_value != b->sweep_value)
                       return a->sweep_value < b->sweep_value;
                     if (a->seed != b->seed) return a->seed < b->seed;
                     return a->t < b->t;
                   });
  std::ofstream out(path, std::ios::binary);  // binary: byte-stable newlines
  if (!out) throw ConfigError("cannot write CSV: " + path.string());
  out << csv_header() << '\n';
  for (const CsvRecord* r : sorted) out << to_csv_line(*r) << '\n';
}

}  // namespace hiersign
