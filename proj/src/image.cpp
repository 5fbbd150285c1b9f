#include "fdk/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <map>

#include "fdk/io_util.hpp"

namespace fdk {

namespace {

std::map<std::string, ImageDecoder>& decoder_registry() {
  static std::map<std::string, ImageDecoder> registry;
  return registry;
}

std::string lower_ext(const std::string& path) {
  std::string ext = std::filesystem::path(path).extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

// One PNM header field; '#' starts a comment running to end of line.
int ppm_field(const std::string& bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    char c = bytes[pos];
    if (c == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++pos;
    } else {
      break;
    }
  }
  require(pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos])),
          Err::CorruptHeader, "PPM header field is not a number");
  long v = 0;
  while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
    v = v * 10 + (bytes[pos] - '0');
    require(v <= 1 << 24, Err::CorruptHeader, "PPM header field out of range");
    ++pos;
  }
  return static_cast<int>(v);
}

}  // namespace

void register_image_decoder(const std::string& extension, ImageDecoder decoder) {
  decoder_registry()[extension] = std::move(decoder);
}

Tensor decode_ppm(const std::string& bytes) {
  require(bytes.size() >= 2, Err::CorruptHeader, "file too short for a PPM header");
  require(bytes[0] == 'P', Err::UnsupportedFormat, "not a PNM file");
  require(bytes[1] == '6', Err::UnsupportedFormat,
          std::string("only binary PPM (P6) is supported, got P") + bytes[1]);
  std::size_t pos = 2;
  int w = ppm_field(bytes, pos);
  int h = ppm_field(bytes, pos);
  int maxval = ppm_field(bytes, pos);
  require(w >= 1 && h >= 1, Err::CorruptHeader, "PPM dimensions must be >= 1");
  require(maxval >= 1, Err::CorruptHeader, "PPM maxval must be >= 1");
  require(maxval <= 255, Err::UnsupportedFormat,
          "PPM maxval " + std::to_string(maxval) + " > 255 (16-bit samples unsupported)");
  require(pos < bytes.size() &&
              std::isspace(static_cast<unsigned char>(bytes[pos])),
          Err::CorruptHeader, "PPM header must end with one whitespace byte");
  ++pos;

  const std::size_t need = static_cast<std::size_t>(w) * h * 3;
  require(bytes.size() - pos >= need, Err::TruncatedPayload,
          "PPM pixel payload is " + std::to_string(bytes.size() - pos) + " bytes, need " +
              std::to_string(need));
  Tensor out({1, h, w, 3});
  for (std::size_t i = 0; i < need; ++i)
    out.data()[i] = static_cast<float>(static_cast<unsigned char>(bytes[pos + i]));
  return out;
}

std::string encode_ppm(const Tensor& image) {
  const Shape4& s = image.shape();
  require(s.n == 1 && s.c == 3, Err::InvalidArgument,
          "encode_ppm expects a 1 x h x w x 3 tensor, got " + s.str());
  std::string out = "P6\n" + std::to_string(s.w) + " " + std::to_string(s.h) + "\n255\n";
  out.reserve(out.size() + static_cast<std::size_t>(s.h) * s.w * 3);
  for (std::int64_t i = 0; i < image.numel(); ++i) {
    float v = image.data()[i];
    require(v >= 0.0f && v <= 255.0f, Err::InvalidArgument,
            "pixel value " + std::to_string(v) + " outside [0, 255]");
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v))));
  }
  return out;
}

Tensor decode_image(const std::string& path) {
  std::string ext = lower_ext(path);
  if (ext == ".ppm") return decode_ppm(read_file(path));
  auto it = decoder_registry().find(ext);
  require(it != decoder_registry().end(), Err::UnsupportedFormat,
          "no decoder for '" + ext + "' (built-in support is binary PPM)");
  return it->second(path);
}

Tensor resize_bilinear(const Tensor& x, int out_h, int out_w) {
  const Shape4& s = x.shape();
  require(out_h >= 1 && out_w >= 1, Err::InvalidArgument, "resize dims must be >= 1");
  if (out_h == s.h && out_w == s.w) return x;
  Tensor out({s.n, out_h, out_w, s.c});
  const double scale_h = static_cast<double>(s.h) / out_h;
  const double scale_w = static_cast<double>(s.w) / out_w;
  for (int n = 0; n < s.n; ++n)
    for (int oi = 0; oi < out_h; ++oi) {
      double src_i = std::clamp((oi + 0.5) * scale_h - 0.5, 0.0, static_cast<double>(s.h - 1));
      int i0 = static_cast<int>(src_i);
      int i1 = std::min(i0 + 1, s.h - 1);
      double fi = src_i - i0;
      for (int oj = 0; oj < out_w; ++oj) {
        double src_j =
            std::clamp((oj + 0.5) * scale_w - 0.5, 0.0, static_cast<double>(s.w - 1));
        int j0 = static_cast<int>(src_j);
        int j1 = std::min(j0 + 1, s.w - 1);
        double fj = src_j - j0;
        for (int k = 0; k < s.c; ++k) {
          double top = (1.0 - fj) * x.at(n, i0, j0, k) + fj * x.at(n, i0, j1, k);
          double bot = (1.0 - fj) * x.at(n, i1, j0, k) + fj * x.at(n, i1, j1, k);
          out.at(n, oi, oj, k) = static_cast<float>((1.0 - fi) * top + fi * bot);
        }
      }
    }
  return out;
}

Tensor normalize(const Tensor& x, const Preprocess& pre) {
  const Shape4& s = x.shape();
  require(pre.mean.size() == static_cast<std::size_t>(s.c) &&
              pre.std_dev.size() == static_cast<std::size_t>(s.c),
          Err::DimensionMismatch, "preprocessing constants need one value per channel");
  for (float sd : pre.std_dev)
    require(sd != 0.0f, Err::ZeroStd, "per-channel std must be nonzero");
  Tensor out(s);
  for (int n = 0; n < s.n; ++n)
    for (int i = 0; i < s.h; ++i)
      for (int j = 0; j < s.w; ++j)
        for (int k = 0; k < s.c; ++k)
          out.at(n, i, j, k) =
              (x.at(n, i, j, k) * pre.scale - pre.mean[k]) / pre.std_dev[k];
  return out;
}

Tensor load_model_input(const std::string& path, const ModelManifest& m) {
  Tensor img = decode_image(path);
  require(img.shape().c == m.in_c, Err::ShapeMismatch,
          path + ": image has " + std::to_string(img.shape().c) + " channels, model expects " +
              std::to_string(m.in_c));
  return normalize(resize_bilinear(img, m.in_h, m.in_w), m.pre);
}

}  // namespace fdk
