#include "hiersign/compress.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "hiersign/kernels.hpp"

namespace hiersign {

SignVector sign(std::span<const double> v) {
  for (std::size_t i = 0; i < v.size(); ++i)
    if (std::isnan(v[i]))
      throw TrainError("sign: NaN at coordinate " + std::to_string(i));
  SignVector s;
  s.signs.resize(v.size());
  kernels::active().sign_pm1(static_cast<int>(v.size()), v.data(),
                             s.signs.data());
  return s;
}

SignVector majority_vote(std::span<const SignVector> votes, TiePolicy policy,
                         RngStream& tie_rng) {
  if (votes.empty()) throw TrainError("majority_vote: no votes");
  const int d = votes[0].dim();
  for (const auto& v : votes)
    if (v.dim() != d)
      throw TrainError("majority_vote: dimension mismatch (" +
                       std::to_string(v.dim()) + " vs " + std::to_string(d) +
                       ")");

  std::vector<std::int16_t> acc(d, 0);
  for (const auto& v : votes)
    kernels::active().vote_accumulate(d, v.signs.data(), acc.data());

  SignVector out;
  out.signs.resize(d);
  for (int i = 0; i < d; ++i) {
    if (acc[i] > 0) {
      out.signs[i] = 1;
    } else if (acc[i] < 0) {
      out.signs[i] = -1;
    } else {
      switch (policy) {
        case TiePolicy::Random: out.signs[i] = tie_rng.coin() ? 1 : -1; break;
        case TiePolicy::PlusOne: out.signs[i] = 1; break;
        case TiePolicy::Zero: out.signs[i] = 0; break;
      }
    }
  }
  return out;
}

void SparsifierSpec::validate() const {
  if (active_components < 1 || active_components > dimension)
    throw ConfigError("sparsifier: need 1 <= n <= d, got n=" +
                      std::to_string(active_components) +
                      " d=" + std::to_string(dimension));
}

namespace {

// Partial Fisher-Yates over [0, d): first n entries of a uniform permutation.
void draw_mask(int d, int n, RngStream& rng, std::vector<int>& mask) {
  mask.resize(n);
  if (n == d) {
    for (int i = 0; i < d; ++i) mask[i] = i;
    return;
  }
  std::vector<int> perm(d);
  for (int i = 0; i < d; ++i) perm[i] = i;
  for (int i = 0; i < n; ++i) {
    const int j = i + static_cast<int>(rng.uniform_below(d - i));
    std::swap(perm[i], perm[j]);
    mask[i] = perm[i];
  }
  std::sort(mask.begin(), mask.end());
}

}  // namespace

std::vector<double> random_sparsify(std::span<const double> x,
                                    const SparsifierSpec& spec,
                                    RngStream& rng) {
  if (static_cast<int>(x.size()) != spec.dimension)
    throw ConfigError("random_sparsify: input length " +
                      std::to_string(x.size()) + " != d=" +
                      std::to_string(spec.dimension));
  spec.validate();
  std::vector<double> out(x.size(), 0.0);
  std::vector<int> mask;
  sparsify_accumulate(x, spec, rng, mask, out.data());
  return out;
}

void sparsify_accumulate(std::span<const double> x, const SparsifierSpec& spec,
                         RngStream& rng, std::vector<int>& mask, double* out) {
  spec.validate();
  draw_mask(spec.dimension, spec.active_components, rng, mask);
  const double scale =
      static_cast<double>(spec.dimension) / spec.active_components;
  for (int i : mask) out[i] += scale * x[i];
}

std::vector<std::uint8_t> pack_signs(const SignVector& s) {
  for (std::size_t i = 0; i < s.signs.size(); ++i)
    if (s.signs[i] == 0)
      throw TrainError("pack_signs: ternary entry at coordinate " +
                       std::to_string(i) +
                       " (zero tie policy is in-memory only)");
  std::vector<std::uint8_t> payload(packed_size(s.dim()));
  kernels::active().pack_signs(s.dim(), s.signs.data(), payload.data());
  return payload;
}

SignVector unpack_signs(std::span<const std::uint8_t> payload, int dim) {
  if (payload.size() != packed_size(dim))
    throw TrainError("unpack_signs: payload is " +
                     std::to_string(payload.size()) + " bytes, expected " +
                     std::to_string(packed_size(dim)));
  SignVector s;
  s.signs.resize(dim);
  kernels::active().unpack_signs(dim, payload.data(), s.signs.data());
  return s;
}

}  // namespace hiersign
