#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "hiersign/config.hpp"
#include "hiersign/dataio.hpp"
#include "hiersign/rng.hpp"

namespace hiersign {

// One-hidden-layer classifier shape. The flat parameter layout is
// [W1 (input x hidden), b1 (hidden), W2 (hidden x output), b2 (output)].
struct MlpShape {
  int input = 784;
  int hidden = 30;
  int output = 10;
  Activation activation = Activation::Relu;

  int dim() const { return input * hidden + hidden + hidden * output + output; }
  int w1_offset() const { return 0; }
  int b1_offset() const { return input * hidden; }
  int w2_offset() const { return input * hidden + hidden; }
  int b2_offset() const { return input * hidden + hidden + hidden * output; }

  bool operator==(const MlpShape&) const = default;
};

struct ModelParams {
  MlpShape shape;
  std::vector<double> values;

  int dim() const { return static_cast<int>(values.size()); }
  double* data() { return values.data(); }
  const double* data() const { return values.data(); }
};

struct GradientEstimate {
  std::vector<double> values;
  std::vector<std::int64_t> batch_indices;
};

// Fan-aware symmetric uniform weights (zero-mean keeps the first-round sign
// distribution unbiased); biases exactly zero.
ModelParams init_params(const MlpShape& shape, RngStream& rng);

// Scratch buffers for batched forward/backward; one per worker thread.
class MlpWorkspace {
 public:
  void resize(const MlpShape& shape, int max_batch);

  std::vector<double> x;    // batch x input
  std::vector<double> z1;   // batch x hidden (pre-activation)
  std::vector<double> h;    // batch x hidden (post-activation)
  std::vector<double> p;    // batch x output (softmax probabilities)
  std::vector<double> dz1;  // batch x hidden
  std::vector<double> dz2;  // batch x output
};

// Mean softmax cross-entropy over the given samples (max-subtracted softmax).
double forward_loss(const ModelParams& params, const LabeledDataset& data,
                    std::span<const std::int64_t> indices, MlpWorkspace& ws);
double forward_loss(const MlpShape& shape, const double* w,
                    const LabeledDataset& data,
                    std::span<const std::int64_t> indices, MlpWorkspace& ws);

// Loss plus classification accuracy in one pass.
struct LossAccuracy {
  double loss = 0.0;
  double accuracy = 0.0;
};
LossAccuracy forward_metrics(const ModelParams& params,
                             const LabeledDataset& data,
                             std::span<const std::int64_t> indices,
                             MlpWorkspace& ws);
LossAccuracy forward_metrics(const MlpShape& shape, const double* w,
                             const LabeledDataset& data,
                             std::span<const std::int64_t> indices,
                             MlpWorkspace& ws);

// Exact gradient of forward_loss at `params` over the same samples.
GradientEstimate backward(const ModelParams& params, const LabeledDataset& data,
                          std::span<const std::int64_t> indices,
                          MlpWorkspace& ws);
// In-place variant writing into grad (length shape.dim()).
double backward_into(const MlpShape& shape, const double* w,
                     const LabeledDataset& data,
                     std::span<const std::int64_t> indices, MlpWorkspace& ws,
                     double* grad);

// Full gradient over an arbitrary index set, accumulated in fixed-size
// chunks so shard-sized sets stay within workspace memory.
void full_gradient(const MlpShape& shape, const double* w,
                   const LabeledDataset& data,
                   std::span<const std::int64_t> indices, MlpWorkspace& ws,
                   double* grad, int chunk = 512);

// Checkpoint blob: one JSON header line followed by little-endian doubles.
void save_params(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_params(const std::filesystem::path& path);

// Separable quadratic objective with exactly known smoothness constant
// L = max curvature and optimum value 0; the synthetic stand-in used to
// verify convergence bounds.
struct QuadraticObjective {
  std::vector<double> curvature;  // per-coordinate, all > 0
  std::vector<double> optimum;
  double noise_std = 0.0;

  int dim() const { return static_cast<int>(curvature.size()); }
  double smoothness() const;         // L
  double value(std::span<const double> w) const;
  void exact_gradient(std::span<const double> w, double* g) const;
  // exact gradient plus iid N(0, noise_std^2) per coordinate
  void noisy_gradient(std::span<const double> w, RngStream& rng,
                      double* g) const;
};

QuadraticObjective make_quadratic(const ModelConfig& cfg, RngStream& rng);

}  // namespace hiersign
