#pragma once

#include <cstdint>

#include "hiersign/dataio.hpp"

namespace hiersign::testdata {

// Procedurally generated 10-class 28x28 dataset: each class lights up a
// class-specific block of pixels over a noisy background, which a one-hidden-
// layer classifier separates easily. Used wherever tests need a learnable
// dataset without external files.
LabeledDataset synthetic_digits(std::int64_t n, std::uint64_t seed);

}  // namespace hiersign::testdata
