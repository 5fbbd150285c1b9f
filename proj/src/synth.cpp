#include "fdk/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>

#include "fdk/error.hpp"
#include "fdk/hash.hpp"
#include "fdk/image.hpp"
#include "fdk/io_util.hpp"
#include "fdk/rng.hpp"

namespace fs = std::filesystem;

namespace fdk {

namespace {

// Widely separated channel levels; class k picks (k, k/4, k/16) mod 4.
constexpr float kLevels[4] = {40.0f, 100.0f, 160.0f, 220.0f};

Tensor synth_image(const SynthSpec& spec, int class_idx, int image_idx) {
  const float base_r = kLevels[class_idx % 4];
  const float base_g = kLevels[(class_idx / 4) % 4];
  const float base_b = kLevels[(class_idx / 16) % 4];
  const double stripe_freq = 1.0 + class_idx % 3;
  const float stripe_amp = 12.0f;
  const float noise_amp = 18.0f;

  // per-image stream: class index in the high half, image index in the low
  Rng rng(spec.seed, (static_cast<std::uint64_t>(class_idx) << 32) |
                         static_cast<std::uint64_t>(image_idx));
  Tensor img({1, spec.height, spec.width, 3});
  for (int i = 0; i < spec.height; ++i) {
    float stripe = stripe_amp * static_cast<float>(std::sin(
                                    2.0 * std::numbers::pi * stripe_freq * i / spec.height));
    for (int j = 0; j < spec.width; ++j) {
      const float base[3] = {base_r, base_g, base_b};
      for (int k = 0; k < 3; ++k) {
        float noise = noise_amp * static_cast<float>(rng.uniform() * 2.0 - 1.0);
        img.at(0, i, j, k) = std::clamp(base[k] + stripe + noise, 0.0f, 255.0f);
      }
    }
  }
  return img;
}

}  // namespace

DatasetManifest synth_dataset(const SynthSpec& spec, const std::string& out_dir) {
  require(spec.n_classes >= 2, Err::InvalidArgument, "synthetic corpus needs >= 2 classes");
  require(spec.images_per_class >= 1, Err::InvalidArgument, "images_per_class must be >= 1");
  require(spec.height >= 1 && spec.width >= 1, Err::InvalidArgument,
          "image dims must be >= 1");
  require(spec.class_names.empty() ||
              spec.class_names.size() == static_cast<std::size_t>(spec.n_classes),
          Err::InvalidArgument, "class_names must be empty or match n_classes");

  std::vector<std::string> classes = spec.class_names;
  if (classes.empty()) {
    char buf[16];
    for (int k = 0; k < spec.n_classes; ++k) {
      std::snprintf(buf, sizeof(buf), "class_%02d", k);
      classes.emplace_back(buf);
    }
  }
  std::sort(classes.begin(), classes.end());
  require(std::adjacent_find(classes.begin(), classes.end()) == classes.end(),
          Err::InvalidArgument, "class names must be distinct");

  DatasetManifest m;
  m.classes = classes;
  m.seed = spec.seed;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  require(!ec, Err::IoError, "cannot create " + out_dir);

  for (int k = 0; k < spec.n_classes; ++k) {
    fs::path class_dir = fs::path(out_dir) / classes[static_cast<std::size_t>(k)];
    fs::create_directories(class_dir, ec);
    require(!ec, Err::IoError, "cannot create " + class_dir.string());
    for (int i = 0; i < spec.images_per_class; ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "img_%05d.ppm", i);
      std::string path = (class_dir / name).string();
      std::string bytes = encode_ppm(synth_image(spec, k, i));
      atomic_write_file(path, bytes);
      ImageRecord r;
      r.path = path;
      r.class_label = classes[static_cast<std::size_t>(k)];
      r.split = Split::kUnassigned;
      r.content_hash = fnv1a64(bytes.data(), bytes.size());
      m.records.push_back(std::move(r));
    }
  }
  return m;
}

}  // namespace fdk
