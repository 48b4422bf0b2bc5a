#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "hiersign/config.hpp"
#include "hiersign/rng.hpp"

namespace hiersign {

// Image classification dataset backed by raw ubyte pixels. Pixels are
// exposed normalized to [0, 1] (raw byte / 255); labels are class indices.
class LabeledDataset {
 public:
  LabeledDataset() = default;
  LabeledDataset(int feature_dim, int num_classes,
                 std::vector<std::uint8_t> pixels,
                 std::vector<std::uint8_t> labels);

  std::int64_t size() const { return static_cast<std::int64_t>(labels_.size()); }
  int feature_dim() const { return feature_dim_; }
  int num_classes() const { return num_classes_; }
  int label(std::int64_t i) const { return labels_[i]; }

  double pixel(std::int64_t sample, int j) const {
    return pixels_[static_cast<std::size_t>(sample) * feature_dim_ + j] *
           (1.0 / 255.0);
  }

  // Writes the normalized rows for `indices` into `out` (row-major,
  // indices.size() x feature_dim).
  void gather(std::span<const std::int64_t> indices, double* out) const;

  const std::uint8_t* raw_pixels() const { return pixels_.data(); }

  // Deterministic prefix restriction after a seeded shuffle; used by the
  // --subsample flag. Keeps class balance in expectation.
  LabeledDataset subsample(std::int64_t n, RngStream& rng) const;

 private:
  int feature_dim_ = 0;
  int num_classes_ = 0;
  std::vector<std::uint8_t> pixels_;
  std::vector<std::uint8_t> labels_;
};

// Reads an IDX image/label pair. Accepts plain or gzip files transparently.
// Image magic must be 0x00000803 and label magic 0x00000801 (big-endian),
// counts must agree, payloads must be complete. Pixels are kept as raw
// bytes and normalized on access.
LabeledDataset load_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path);

// Writes an IDX pair (uncompressed); used by tests and synthetic tooling.
void write_idx(const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path,
               const LabeledDataset& data, int rows, int cols);

// Per-device index lists into a parent dataset, grouped by edge, plus the
// bookkeeping needed to audit conservation.
struct PartitionedData {
  std::vector<std::vector<std::vector<std::int64_t>>> shards;  // [q][k] -> idx
  PartitionSpec provenance;
  std::vector<std::int64_t> dropped_per_edge;  // intra-edge equal-split remainder
  std::vector<std::vector<std::int64_t>> edge_class_counts;  // [q][class]
  std::int64_t total_assigned = 0;

  std::vector<std::vector<std::int64_t>> shard_sizes() const;
};

// Edge-level Dirichlet label skew: for each class m, proportions
// p_m ~ Dirichlet(alpha * 1_Q) decide the class's split across edges
// (largest-remainder rounding); each edge pool is then shuffled and split
// into equal device shards, so devices within an edge stay IID.
PartitionedData partition_dirichlet(const LabeledDataset& data,
                                    int num_edges,
                                    std::span<const int> devices_per_edge,
                                    double alpha, const PartitionSpec& spec);

// Global shuffle, equal contiguous shards per device.
PartitionedData partition_iid(const LabeledDataset& data, int num_edges,
                              std::span<const int> devices_per_edge,
                              const PartitionSpec& spec);

PartitionedData make_partition(const LabeledDataset& data, int num_edges,
                               std::span<const int> devices_per_edge,
                               const PartitionSpec& spec);

// B indices drawn uniformly WITH replacement (keeps the minibatch gradient
// an exactly unbiased estimator of the shard gradient).
std::vector<std::int64_t> sample_batch(std::span<const std::int64_t> shard,
                                       int batch_size, RngStream& rng);

}  // namespace hiersign
