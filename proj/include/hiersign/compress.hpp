#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hiersign/config.hpp"
#include "hiersign/rng.hpp"

namespace hiersign {

// Per-coordinate signs. Entries are +/-1; 0 appears only as the output of a
// majority vote under the ternary tie policy and is rejected by the wire
// packer.
struct SignVector {
  std::vector<std::int8_t> signs;

  int dim() const { return static_cast<int>(signs.size()); }
};

// Element-wise sign with the documented zero convention (0 -> +1), which
// keeps the uplink at exactly 1 bit per coordinate. NaN entries error.
SignVector sign(std::span<const double> v);

// Coordinate-wise sign of the vote sum. Zero sums (possible only for even
// vote counts) are resolved by the tie policy; `tie_rng` is consulted only
// by the Random policy.
SignVector majority_vote(std::span<const SignVector> votes, TiePolicy policy,
                         RngStream& tie_rng);

// Uniform n-of-d sparsifier: keeps n coordinates chosen uniformly without
// replacement, scales them by d/n, zeroes the rest. Unbiased with relative
// variance factor psi^2 = d/n - 1.
struct SparsifierSpec {
  int dimension = 0;          // d
  int active_components = 0;  // n

  double psi_squared() const {
    return static_cast<double>(dimension) / active_components - 1.0;
  }
  void validate() const;
};

std::vector<double> random_sparsify(std::span<const double> x,
                                    const SparsifierSpec& spec,
                                    RngStream& rng);

// In-place mask draw + scatter-scale used by the engine: fills `mask` with
// the n selected coordinate indices (ascending) and applies
// out[i] += (d/n) * x[i] for selected i.
void sparsify_accumulate(std::span<const double> x, const SparsifierSpec& spec,
                         RngStream& rng, std::vector<int>& mask, double* out);

// 1-bit wire format: bit i (LSB-first within each byte) is 1 iff sign i is
// +1; the last byte's padding bits are zero. Payload is ceil(d/8) bytes.
std::vector<std::uint8_t> pack_signs(const SignVector& s);
SignVector unpack_signs(std::span<const std::uint8_t> payload, int dim);

inline std::size_t packed_size(int dim) {
  return (static_cast<std::size_t>(dim) + 7) / 8;
}

}  // namespace hiersign
