#pragma once

#include <cstdint>
#include <string>

#include "fdk/model.hpp"

namespace fdk {

// Deterministic test backbone: 32x32x3 input, a conv stem, two
// inception-style concat blocks, global average pooling into a 64-wide
// bottleneck, and a 6-way placeholder classifier (17 nodes total). Weights
// are seeded Gaussians, so the whole model is a pure function of the seed.
Graph make_tiny_inception(std::uint64_t seed = 1);

// Writes <dir>/tiny_inception.fdkm and .fdkw; returns the manifest path.
std::string write_tiny_inception(const std::string& dir, std::uint64_t seed = 1);

}  // namespace fdk
