#include "hiersign/dataio.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numeric>

#include <zlib.h>

namespace hiersign {

LabeledDataset::LabeledDataset(int feature_dim, int num_classes,
                               std::vector<std::uint8_t> pixels,
                               std::vector<std::uint8_t> labels)
    : feature_dim_(feature_dim),
      num_classes_(num_classes),
      pixels_(std::move(pixels)),
      labels_(std::move(labels)) {
  if (pixels_.size() != labels_.size() * static_cast<std::size_t>(feature_dim_))
    throw LoadError("dataset: pixel buffer size does not match label count");
  for (std::uint8_t l : labels_)
    if (l >= num_classes_)
      throw LoadError("dataset: label " + std::to_string(l) +
                      " out of range for " + std::to_string(num_classes_) +
                      " classes");
}

void LabeledDataset::gather(std::span<const std::int64_t> indices,
                            double* out) const {
  const double scale = 1.0 / 255.0;
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const std::uint8_t* src =
        pixels_.data() + static_cast<std::size_t>(indices[r]) * feature_dim_;
    double* dst = out + r * feature_dim_;
    for (int j = 0; j < feature_dim_; ++j) dst[j] = src[j] * scale;
  }
}

LabeledDataset LabeledDataset::subsample(std::int64_t n, RngStream& rng) const {
  if (n <= 0 || n >= size()) return *this;
  std::vector<std::int64_t> idx(size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng.engine());
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  std::vector<std::uint8_t> px(static_cast<std::size_t>(n) * feature_dim_);
  std::vector<std::uint8_t> lb(n);
  for (std::int64_t r = 0; r < n; ++r) {
    std::memcpy(px.data() + static_cast<std::size_t>(r) * feature_dim_,
                pixels_.data() + static_cast<std::size_t>(idx[r]) * feature_dim_,
                feature_dim_);
    lb[r] = labels_[idx[r]];
  }
  return LabeledDataset(feature_dim_, num_classes_, std::move(px), std::move(lb));
}

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

class GzReader {
 public:
  explicit GzReader(const std::filesystem::path& path)
      : path_(path.string()), f_(gzopen(path_.c_str(), "rb")) {
    if (f_ == nullptr) throw LoadError("cannot open " + path_);
  }
  ~GzReader() {
    if (f_ != nullptr) gzclose(f_);
  }
  GzReader(const GzReader&) = delete;
  GzReader& operator=(const GzReader&) = delete;

  void read_exact(void* dst, std::size_t n) {
    const int got = gzread(f_, dst, static_cast<unsigned>(n));
    if (got < 0 || static_cast<std::size_t>(got) != n)
      throw LoadError("truncated payload in " + path_);
  }

  std::uint32_t read_be32() {
    std::uint8_t b[4];
    read_exact(b, 4);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
  }

  bool at_eof() {
    std::uint8_t probe;
    return gzread(f_, &probe, 1) == 0;
  }

 private:
  std::string path_;
  gzFile f_;
};

}  // namespace

LabeledDataset load_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path) {
  GzReader img(images_path);
  const std::uint32_t img_magic = img.read_be32();
  if (img_magic != kImageMagic)
    throw LoadError("bad image magic in " + images_path.string() +
                    " (expected 0x00000803)");
  const std::uint32_t n_images = img.read_be32();
  const std::uint32_t rows = img.read_be32();
  const std::uint32_t cols = img.read_be32();
  const std::size_t feature_dim = std::size_t(rows) * cols;
  std::vector<std::uint8_t> pixels(std::size_t(n_images) * feature_dim);
  img.read_exact(pixels.data(), pixels.size());

  GzReader lab(labels_path);
  const std::uint32_t lab_magic = lab.read_be32();
  if (lab_magic != kLabelMagic)
    throw LoadError("bad label magic in " + labels_path.string() +
                    " (expected 0x00000801)");
  const std::uint32_t n_labels = lab.read_be32();
  if (n_labels != n_images)
    throw LoadError("image/label count mismatch: " + std::to_string(n_images) +
                    " images vs " + std::to_string(n_labels) + " labels");
  std::vector<std::uint8_t> labels(n_labels);
  lab.read_exact(labels.data(), labels.size());

  int num_classes = 0;
  for (std::uint8_t l : labels) num_classes = std::max(num_classes, int(l) + 1);
  if (num_classes == 0) num_classes = 1;

  return LabeledDataset(static_cast<int>(feature_dim), num_classes,
                        std::move(pixels), std::move(labels));
}

void write_idx(const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path,
               const LabeledDataset& data, int rows, int cols) {
  if (rows * cols != data.feature_dim())
    throw LoadError("write_idx: rows*cols must equal the feature dimension");
  auto put_be32 = [](std::ofstream& out, std::uint32_t v) {
    const std::uint8_t b[4] = {std::uint8_t(v >> 24), std::uint8_t(v >> 16),
                               std::uint8_t(v >> 8), std::uint8_t(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
  };

  std::ofstream img(images_path, std::ios::binary);
  if (!img) throw LoadError("cannot write " + images_path.string());
  put_be32(img, kImageMagic);
  put_be32(img, static_cast<std::uint32_t>(data.size()));
  put_be32(img, static_cast<std::uint32_t>(rows));
  put_be32(img, static_cast<std::uint32_t>(cols));
  img.write(reinterpret_cast<const char*>(data.raw_pixels()),
            data.size() * data.feature_dim());

  std::ofstream lab(labels_path, std::ios::binary);
  if (!lab) throw LoadError("cannot write " + labels_path.string());
  put_be32(lab, kLabelMagic);
  put_be32(lab, static_cast<std::uint32_t>(data.size()));
  for (std::int64_t i = 0; i < data.size(); ++i) {
    const std::uint8_t l = static_cast<std::uint8_t>(data.label(i));
    lab.write(reinterpret_cast<const char*>(&l), 1);
  }
}

std::vector<std::vector<std::int64_t>> PartitionedData::shard_sizes() const {
  std::vector<std::vector<std::int64_t>> sizes(shards.size());
  for (std::size_t q = 0; q < shards.size(); ++q)
    for (const auto& shard : shards[q])
      sizes[q].push_back(static_cast<std::int64_t>(shard.size()));
  return sizes;
}

namespace {

// Shuffle an edge pool and cut it into equal device shards; the remainder is
// dropped so device weights stay uniform within the edge.
void split_edge_pool(std::vector<std::int64_t>& pool, int devices,
                     RngStream& rng, std::vector<std::vector<std::int64_t>>& out,
                     std::int64_t& dropped) {
  std::shuffle(pool.begin(), pool.end(), rng.engine());
  const std::int64_t per_device = static_cast<std::int64_t>(pool.size()) / devices;
  dropped = static_cast<std::int64_t>(pool.size()) - per_device * devices;
  out.resize(devices);
  for (int k = 0; k < devices; ++k)
    out[k].assign(pool.begin() + k * per_device,
                  pool.begin() + (k + 1) * per_device);
}

std::vector<std::vector<std::int64_t>> count_classes(
    const LabeledDataset& data,
    const std::vector<std::vector<std::vector<std::int64_t>>>& shards) {
  std::vector<std::vector<std::int64_t>> counts(
      shards.size(), std::vector<std::int64_t>(data.num_classes(), 0));
  for (std::size_t q = 0; q < shards.size(); ++q)
    for (const auto& shard : shards[q])
      for (std::int64_t idx : shard) ++counts[q][data.label(idx)];
  return counts;
}

// Largest-remainder rounding of total*p into integer counts that sum to total.
std::vector<std::int64_t> largest_remainder(std::int64_t total,
                                            std::span<const double> p) {
  const int q = static_cast<int>(p.size());
  std::vector<std::int64_t> counts(q);
  std::vector<std::pair<double, int>> rema(q);
  std::int64_t assigned = 0;
  for (int i = 0; i < q; ++i) {
    const double exact = total * p[i];
    counts[i] = static_cast<std::int64_t>(exact);
    rema[i] = {exact - static_cast<double>(counts[i]), i};
    assigned += counts[i];
  }
  // ties resolved toward the lower index for determinism
  std::stable_sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) {
    return a.first > b.first;
  });
  for (std::int64_t r = 0; r < total - assigned; ++r) ++counts[rema[r % q].second];
  return counts;
}

}  // namespace

PartitionedData partition_dirichlet(const LabeledDataset& data, int num_edges,
                                    std::span<const int> devices_per_edge,
                                    double alpha, const PartitionSpec& spec) {
  if (num_edges < 1) throw ConfigError("partition: num_edges must be >= 1");
  if (data.size() == 0) throw ConfigError("partition: dataset is empty");
  if (!(alpha > 0.0)) throw ConfigError("partition.alpha must be > 0");

  std::vector<std::vector<std::int64_t>> by_class(data.num_classes());
  for (std::int64_t i = 0; i < data.size(); ++i)
    by_class[data.label(i)].push_back(i);

  for (int attempt = 0; attempt <= spec.retry_limit; ++attempt) {
    std::vector<std::vector<std::int64_t>> pools(num_edges);
    bool degenerate = false;
    for (int m = 0; m < data.num_classes() && !degenerate; ++m) {
      auto rng = fork_rng(spec.rng_seed,
                          {attempt, m, -1, -1, "dirichlet_class"});
      // p_m ~ Dirichlet(alpha 1_Q) via normalized gamma draws
      std::vector<double> p(num_edges);
      double sum = 0.0;
      for (int q = 0; q < num_edges; ++q) {
        p[q] = rng.gamma(alpha);
        sum += p[q];
      }
      if (!(sum > 0.0)) {  // all gammas underflowed (tiny alpha)
        degenerate = true;
        break;
      }
      for (double& v : p) v /= sum;

      auto counts = largest_remainder(
          static_cast<std::int64_t>(by_class[m].size()), p);
      std::vector<std::int64_t> cls = by_class[m];
      std::shuffle(cls.begin(), cls.end(), rng.engine());
      std::int64_t offset = 0;
      for (int q = 0; q < num_edges; ++q) {
        pools[q].insert(pools[q].end(), cls.begin() + offset,
                        cls.begin() + offset + counts[q]);
        offset += counts[q];
      }
    }

    for (int q = 0; q < num_edges; ++q)
      if (pools[q].size() < static_cast<std::size_t>(devices_per_edge[q]))
        degenerate = true;
    if (degenerate) continue;

    PartitionedData part;
    part.provenance = spec;
    part.provenance.alpha = alpha;
    part.shards.resize(num_edges);
    part.dropped_per_edge.resize(num_edges);
    for (int q = 0; q < num_edges; ++q) {
      auto rng = fork_rng(spec.rng_seed, {attempt, -1, q, -1, "edge_split"});
      split_edge_pool(pools[q], devices_per_edge[q], rng, part.shards[q],
                      part.dropped_per_edge[q]);
      for (const auto& shard : part.shards[q])
        part.total_assigned += static_cast<std::int64_t>(shard.size());
    }
    part.edge_class_counts = count_classes(data, part.shards);
    return part;
  }
  throw TrainError("partition_dirichlet: degenerate draw (an edge received "
                   "fewer samples than devices) after " +
                   std::to_string(spec.retry_limit + 1) + " attempts");
}

PartitionedData partition_iid(const LabeledDataset& data, int num_edges,
                              std::span<const int> devices_per_edge,
                              const PartitionSpec& spec) {
  if (num_edges < 1) throw ConfigError("partition: num_edges must be >= 1");
  int total_devices = 0;
  for (int m : devices_per_edge) total_devices += m;
  if (data.size() < total_devices)
    throw ConfigError("partition_iid: fewer samples (" +
                      std::to_string(data.size()) + ") than devices (" +
                      std::to_string(total_devices) + ")");

  std::vector<std::int64_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  auto rng = fork_rng(spec.rng_seed, {.purpose = "iid_shuffle"});
  std::shuffle(idx.begin(), idx.end(), rng.engine());

  const std::int64_t per_device = data.size() / total_devices;
  PartitionedData part;
  part.provenance = spec;
  part.shards.resize(num_edges);
  part.dropped_per_edge.assign(num_edges, 0);
  std::int64_t offset = 0;
  for (int q = 0; q < num_edges; ++q) {
    part.shards[q].resize(devices_per_edge[q]);
    for (int k = 0; k < devices_per_edge[q]; ++k) {
      part.shards[q][k].assign(idx.begin() + offset,
                               idx.begin() + offset + per_device);
      offset += per_device;
      part.total_assigned += per_device;
    }
  }
  // global remainder is unassigned; attribute it to no edge
  part.edge_class_counts = count_classes(data, part.shards);
  return part;
}

PartitionedData make_partition(const LabeledDataset& data, int num_edges,
                               std::span<const int> devices_per_edge,
                               const PartitionSpec& spec) {
  spec.validate();
  return spec.mode == PartitionMode::Iid
             ? partition_iid(data, num_edges, devices_per_edge, spec)
             : partition_dirichlet(data, num_edges, devices_per_edge,
                                   spec.alpha, spec);
}

std::vector<std::int64_t> sample_batch(std::span<const std::int64_t> shard,
                                       int batch_size, RngStream& rng) {
  std::vector<std::int64_t> batch(batch_size);
  const std::uint64_t n = shard.size();
  for (int i = 0; i < batch_size; ++i) batch[i] = shard[rng.uniform_below(n)];
  return batch;
}

}  // namespace hiersign
