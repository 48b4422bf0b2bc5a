#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hiersign/engine.hpp"

namespace hiersign {

// One CSV row. Run records come from RoundLogs; analysis records (bounds,
// zeta estimates, vote errors, bit rates) reuse the same sink with a
// distinguishing record_type and leave inapplicable columns empty.
struct CsvRecord {
  std::string record_type = "run";
  std::string algorithm;
  std::uint64_t seed = 0;
  std::string sweep_axis = "none";
  double sweep_value = 0.0;
  int t = 0;
  std::optional<double> train_loss;
  std::optional<double> test_loss;
  std::optional<double> train_acc;
  std::optional<double> test_acc;
  std::optional<double> grad_l1;
  std::optional<std::uint64_t> uplink_bits;
  std::optional<std::uint64_t> downlink_bits;
};

CsvRecord to_record(const RoundLog& log, const std::string& algorithm,
                    std::uint64_t seed, const std::string& sweep_axis,
                    double sweep_value);

// %.9g rendering used for every float column.
std::string format_g9(double v);

// Writes header + rows sorted by (sweep_value, seed, t); stable for equal
// keys so analysis records keep their insertion order.
void emit_csv(const std::filesystem::path& path,
              std::span<const CsvRecord> records);

std::string csv_header();
std::string to_csv_line(const CsvRecord& r);

}  // namespace hiersign
