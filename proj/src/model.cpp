#include "hiersign/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "hiersign/kernels.hpp"

namespace hiersign {

using nlohmann::json;

ModelParams init_params(const MlpShape& shape, RngStream& rng) {
  ModelParams p;
  p.shape = shape;
  p.values.assign(shape.dim(), 0.0);
  const double a1 = std::sqrt(6.0 / (shape.input + shape.hidden));
  const double a2 = std::sqrt(6.0 / (shape.hidden + shape.output));
  double* w1 = p.values.data() + shape.w1_offset();
  for (int i = 0; i < shape.input * shape.hidden; ++i)
    w1[i] = rng.uniform(-a1, a1);
  double* w2 = p.values.data() + shape.w2_offset();
  for (int i = 0; i < shape.hidden * shape.output; ++i)
    w2[i] = rng.uniform(-a2, a2);
  return p;
}

void MlpWorkspace::resize(const MlpShape& shape, int max_batch) {
  const std::size_t b = static_cast<std::size_t>(max_batch);
  x.resize(b * shape.input);
  z1.resize(b * shape.hidden);
  h.resize(b * shape.hidden);
  p.resize(b * shape.output);
  dz1.resize(b * shape.hidden);
  dz2.resize(b * shape.output);
}

namespace {

void activation_forward(Activation act, int n, const double* z, double* h) {
  switch (act) {
    case Activation::Relu:
      std::memcpy(h, z, sizeof(double) * n);
      kernels::active().relu_forward(n, h);
      break;
    case Activation::Sigmoid:
      for (int i = 0; i < n; ++i) h[i] = 1.0 / (1.0 + std::exp(-z[i]));
      break;
    case Activation::Tanh:
      for (int i = 0; i < n; ++i) h[i] = std::tanh(z[i]);
      break;
  }
}

// dz (pre-activation grad) from dh (post-activation grad), in place in dh.
void activation_backward(Activation act, int n, const double* h, double* dh) {
  switch (act) {
    case Activation::Relu:
      kernels::active().relu_backward(n, h, dh);
      break;
    case Activation::Sigmoid:
      for (int i = 0; i < n; ++i) dh[i] *= h[i] * (1.0 - h[i]);
      break;
    case Activation::Tanh:
      for (int i = 0; i < n; ++i) dh[i] *= 1.0 - h[i] * h[i];
      break;
  }
}

// Forward pass through both layers; fills ws.z1, ws.h, ws.p (softmax probs).
// Returns mean cross-entropy; if correct != nullptr also counts argmax hits.
double forward_pass(const MlpShape& s, const double* w,
                    const LabeledDataset& data,
                    std::span<const std::int64_t> indices, MlpWorkspace& ws,
                    std::int64_t* correct) {
  const int b = static_cast<int>(indices.size());
  const auto& K = kernels::active();

  data.gather(indices, ws.x.data());

  const double* w1 = w + s.w1_offset();
  const double* b1 = w + s.b1_offset();
  const double* w2 = w + s.w2_offset();
  const double* b2 = w + s.b2_offset();

  K.gemm_nn(b, s.hidden, s.input, ws.x.data(), s.input, w1, s.hidden,
            ws.z1.data(), s.hidden, false);
  for (int i = 0; i < b; ++i) {
    double* row = ws.z1.data() + static_cast<std::size_t>(i) * s.hidden;
    for (int j = 0; j < s.hidden; ++j) row[j] += b1[j];
  }
  activation_forward(s.activation, b * s.hidden, ws.z1.data(), ws.h.data());

  K.gemm_nn(b, s.output, s.hidden, ws.h.data(), s.hidden, w2, s.output,
            ws.p.data(), s.output, false);

  double loss = 0.0;
  std::int64_t hits = 0;
  for (int i = 0; i < b; ++i) {
    double* logits = ws.p.data() + static_cast<std::size_t>(i) * s.output;
    int argmax = 0;
    double maxv = logits[0] + b2[0];
    logits[0] = maxv;
    for (int c = 1; c < s.output; ++c) {
      logits[c] += b2[c];
      if (logits[c] > maxv) {
        maxv = logits[c];
        argmax = c;
      }
    }
    double sum = 0.0;
    for (int c = 0; c < s.output; ++c) {
      logits[c] = std::exp(logits[c] - maxv);
      sum += logits[c];
    }
    const int y = data.label(indices[i]);
    loss += -std::log(logits[y] / sum);
    for (int c = 0; c < s.output; ++c) logits[c] /= sum;
    if (argmax == y) ++hits;
  }
  if (correct != nullptr) *correct = hits;
  return loss / b;
}

}  // namespace

double forward_loss(const MlpShape& shape, const double* w,
                    const LabeledDataset& data,
                    std::span<const std::int64_t> indices, MlpWorkspace& ws) {
  ws.resize(shape, static_cast<int>(indices.size()));
  return forward_pass(shape, w, data, indices, ws, nullptr);
}

double forward_loss(const ModelParams& params, const LabeledDataset& data,
                    std::span<const std::int64_t> indices, MlpWorkspace& ws) {
  return forward_loss(params.shape, params.data(), data, indices, ws);
}

LossAccuracy forward_metrics(const MlpShape& shape, const double* w,
                             const LabeledDataset& data,
                             std::span<const std::int64_t> indices,
                             MlpWorkspace& ws) {
  ws.resize(shape, static_cast<int>(indices.size()));
  std::int64_t correct = 0;
  const double loss = forward_pass(shape, w, data, indices, ws, &correct);
  return {loss, static_cast<double>(correct) / indices.size()};
}

LossAccuracy forward_metrics(const ModelParams& params,
                             const LabeledDataset& data,
                             std::span<const std::int64_t> indices,
                             MlpWorkspace& ws) {
  return forward_metrics(params.shape, params.data(), data, indices, ws);
}

double backward_into(const MlpShape& s, const double* w,
                     const LabeledDataset& data,
                     std::span<const std::int64_t> indices, MlpWorkspace& ws,
                     double* grad) {
  const int b = static_cast<int>(indices.size());
  const auto& K = kernels::active();

  ws.resize(s, b);
  const double loss = forward_pass(s, w, data, indices, ws, nullptr);

  // dz2 = (p - onehot(y)) / b
  const double inv_b = 1.0 / b;
  for (int i = 0; i < b; ++i) {
    const double* prob = ws.p.data() + static_cast<std::size_t>(i) * s.output;
    double* dst = ws.dz2.data() + static_cast<std::size_t>(i) * s.output;
    const int y = data.label(indices[i]);
    for (int c = 0; c < s.output; ++c) dst[c] = prob[c] * inv_b;
    dst[y] -= inv_b;
  }

  double* gw1 = grad + s.w1_offset();
  double* gb1 = grad + s.b1_offset();
  double* gw2 = grad + s.w2_offset();
  double* gb2 = grad + s.b2_offset();

  // dW2 = H^T dz2, db2 = column sums of dz2
  K.gemm_tn(s.hidden, s.output, b, ws.h.data(), s.hidden, ws.dz2.data(),
            s.output, gw2, s.output, false);
  std::fill(gb2, gb2 + s.output, 0.0);
  for (int i = 0; i < b; ++i)
    K.axpy(s.output, 1.0, ws.dz2.data() + static_cast<std::size_t>(i) * s.output,
           gb2);

  // dh = dz2 W2^T, then through the activation
  K.gemm_nt(b, s.hidden, s.output, ws.dz2.data(), s.output,
            w + s.w2_offset(), s.output, ws.dz1.data(), s.hidden, false);
  activation_backward(s.activation, b * s.hidden, ws.h.data(), ws.dz1.data());

  // dW1 = X^T dz1, db1 = column sums of dz1
  K.gemm_tn(s.input, s.hidden, b, ws.x.data(), s.input, ws.dz1.data(), s.hidden,
            gw1, s.hidden, false);
  std::fill(gb1, gb1 + s.hidden, 0.0);
  for (int i = 0; i < b; ++i)
    K.axpy(s.hidden, 1.0, ws.dz1.data() + static_cast<std::size_t>(i) * s.hidden,
           gb1);

  return loss;
}

GradientEstimate backward(const ModelParams& params, const LabeledDataset& data,
                          std::span<const std::int64_t> indices,
                          MlpWorkspace& ws) {
  GradientEstimate g;
  g.values.assign(params.dim(), 0.0);
  g.batch_indices.assign(indices.begin(), indices.end());
  backward_into(params.shape, params.data(), data, indices, ws,
                g.values.data());
  return g;
}

void full_gradient(const MlpShape& shape, const double* w,
                   const LabeledDataset& data,
                   std::span<const std::int64_t> indices, MlpWorkspace& ws,
                   double* grad, int chunk) {
  const std::int64_t n = static_cast<std::int64_t>(indices.size());
  std::fill(grad, grad + shape.dim(), 0.0);
  std::vector<double> partial(shape.dim());
  for (std::int64_t off = 0; off < n; off += chunk) {
    const std::int64_t len = std::min<std::int64_t>(chunk, n - off);
    backward_into(shape, w, data, indices.subspan(off, len), ws,
                  partial.data());
    // chunk gradients are per-sample means; reweight to the overall mean
    kernels::active().axpy(shape.dim(), static_cast<double>(len) / n,
                           partial.data(), grad);
  }
}

void save_params(const std::filesystem::path& path, const ModelParams& params) {
  json header = {
      {"input", params.shape.input},
      {"hidden", params.shape.hidden},
      {"output", params.shape.output},
      {"activation", to_string(params.shape.activation)},
      {"dim", params.dim()},
  };
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write " + path.string());
  out << header.dump() << '\n';
  static_assert(std::endian::native == std::endian::little,
                "blob format is little-endian");
  out.write(reinterpret_cast<const char*>(params.data()),
            static_cast<std::streamsize>(sizeof(double)) * params.dim());
}

ModelParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw LoadError("bad checkpoint header in " + path.string() + ": " +
                    e.what());
  }
  ModelParams p;
  p.shape.input = header.at("input").get<int>();
  p.shape.hidden = header.at("hidden").get<int>();
  p.shape.output = header.at("output").get<int>();
  p.shape.activation =
      activation_from_string(header.at("activation").get<std::string>());
  const int dim = header.at("dim").get<int>();
  if (dim != p.shape.dim())
    throw LoadError("checkpoint dim disagrees with its shape header");
  p.values.resize(dim);
  in.read(reinterpret_cast<char*>(p.values.data()),
          static_cast<std::streamsize>(sizeof(double)) * dim);
  if (!in) throw LoadError("truncated checkpoint " + path.string());
  return p;
}

double QuadraticObjective::smoothness() const {
  double l = 0.0;
  for (double c : curvature) l = std::max(l, c);
  return l;
}

double QuadraticObjective::value(std::span<const double> w) const {
  double f = 0.0;
  for (int i = 0; i < dim(); ++i) {
    const double r = w[i] - optimum[i];
    f += 0.5 * curvature[i] * r * r;
  }
  return f;
}

void QuadraticObjective::exact_gradient(std::span<const double> w,
                                        double* g) const {
  for (int i = 0; i < dim(); ++i) g[i] = curvature[i] * (w[i] - optimum[i]);
}

void QuadraticObjective::noisy_gradient(std::span<const double> w,
                                        RngStream& rng, double* g) const {
  exact_gradient(w, g);
  if (noise_std > 0.0)
    for (int i = 0; i < dim(); ++i) g[i] += rng.normal(0.0, noise_std);
}

QuadraticObjective make_quadratic(const ModelConfig& cfg, RngStream& rng) {
  QuadraticObjective q;
  q.noise_std = cfg.noise_std;
  q.curvature.resize(cfg.dimension);
  q.optimum.resize(cfg.dimension);
  for (int i = 0; i < cfg.dimension; ++i) {
    // deterministic curvature ramp gives an exactly known L = curvature_max
    q.curvature[i] =
        cfg.dimension == 1
            ? cfg.curvature_max
            : cfg.curvature_min + (cfg.curvature_max - cfg.curvature_min) * i /
                                      (cfg.dimension - 1);
    q.optimum[i] = rng.uniform(-1.0, 1.0);
  }
  return q;
}

}  // namespace hiersign
