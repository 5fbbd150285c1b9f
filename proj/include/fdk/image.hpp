#pragma once

#include <functional>
#include <string>

#include "fdk/model.hpp"
#include "fdk/tensor.hpp"

namespace fdk {

// Decodes a raster image to a 1 x h x w x 3 tensor with values in [0, 255].
// Binary PPM (P6, maxval <= 255) is built in; other extensions route through
// decoders registered with register_image_decoder.
Tensor decode_image(const std::string& path);

using ImageDecoder = std::function<Tensor(const std::string& path)>;
void register_image_decoder(const std::string& extension, ImageDecoder decoder);

Tensor decode_ppm(const std::string& bytes);
std::string encode_ppm(const Tensor& image);

// Bilinear resampling, half-pixel centers (sample at (i + 0.5) * scale - 0.5,
// clamped to the source).
Tensor resize_bilinear(const Tensor& x, int out_h, int out_w);

// (x * scale - mean_c) / std_c per channel.
Tensor normalize(const Tensor& x, const Preprocess& pre);

// decode -> resize to the model's input -> normalize.
Tensor load_model_input(const std::string& path, const ModelManifest& m);

}  // namespace fdk
