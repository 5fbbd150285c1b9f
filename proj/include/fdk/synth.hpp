#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fdk/dataset.hpp"

namespace fdk {

// Desk-scale synthetic corpus: class k gets a base color from a coarse RGB
// lattice plus seeded stripes and noise, so classes are linearly separable in
// mean-color space by construction. Deterministic function of the spec.
struct SynthSpec {
  int n_classes = 4;
  int images_per_class = 300;
  int height = 32;
  int width = 32;
  std::uint64_t seed = 7;
  std::vector<std::string> class_names;  // optional; defaults to class_00..; sorted before use
};

DatasetManifest synth_dataset(const SynthSpec& spec, const std::string& out_dir);

}  // namespace fdk
