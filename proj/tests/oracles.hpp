// Naive direct-summation reference implementations, written before the
// library kernels and kept independent of them. Everything here is plain
// nested loops over the tensor layout; the only shared vocabulary with the
// library is the Tensor container and the padding rule, which is restated
// inline rather than calling the library's shape helpers.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "fdk/tensor.hpp"

namespace oracle {

struct Pad2 {
  int top = 0, left = 0;
  int out_h = 0, out_w = 0;
};

// SAME: out = ceil(in / s), total pad = max(0, (out-1)*s + k - in),
// floor on the leading side. VALID: out = floor((in - k) / s) + 1.
inline int same_out(int in, int s) { return (in + s - 1) / s; }

inline Pad2 pad_same(int h, int w, int kh, int kw, int sh, int sw) {
  Pad2 p;
  p.out_h = same_out(h, sh);
  p.out_w = same_out(w, sw);
  int total_h = std::max(0, (p.out_h - 1) * sh + kh - h);
  int total_w = std::max(0, (p.out_w - 1) * sw + kw - w);
  p.top = total_h / 2;
  p.left = total_w / 2;
  return p;
}

inline Pad2 pad_valid(int h, int w, int kh, int kw, int sh, int sw) {
  Pad2 p;
  p.out_h = (h - kh) / sh + 1;
  p.out_w = (w - kw) / sw + 1;
  return p;
}

// Six nested loops, double accumulator, zero padding outside the input.
inline fdk::Tensor conv2d_ref(const fdk::Tensor& x, const std::vector<float>& w,
                              const std::vector<float>& bias, int kh, int kw, int c_out,
                              int sh, int sw, bool same) {
  const auto& s = x.shape();
  Pad2 p = same ? pad_same(s.h, s.w, kh, kw, sh, sw) : pad_valid(s.h, s.w, kh, kw, sh, sw);
  fdk::Tensor out({s.n, p.out_h, p.out_w, c_out});
  for (int n = 0; n < s.n; ++n)
    for (int oi = 0; oi < p.out_h; ++oi)
      for (int oj = 0; oj < p.out_w; ++oj)
        for (int o = 0; o < c_out; ++o) {
          double acc = bias[o];
          for (int a = 0; a < kh; ++a)
            for (int b = 0; b < kw; ++b)
              for (int k = 0; k < s.c; ++k) {
                int ii = oi * sh + a - p.top;
                int jj = oj * sw + b - p.left;
                if (ii < 0 || ii >= s.h || jj < 0 || jj >= s.w) continue;
                double wv = w[((static_cast<std::size_t>(a) * kw + b) * s.c + k) * c_out + o];
                acc += static_cast<double>(x.at(n, ii, jj, k)) * wv;
              }
          out.at(n, oi, oj, o) = static_cast<float>(acc);
        }
  return out;
}

// Padded cells contribute -inf to max windows and are excluded from avg
// denominators.
inline fdk::Tensor pool_ref(const fdk::Tensor& x, int ph, int pw, int sh, int sw, bool same,
                            bool take_max) {
  const auto& s = x.shape();
  Pad2 p = same ? pad_same(s.h, s.w, ph, pw, sh, sw) : pad_valid(s.h, s.w, ph, pw, sh, sw);
  fdk::Tensor out({s.n, p.out_h, p.out_w, s.c});
  for (int n = 0; n < s.n; ++n)
    for (int oi = 0; oi < p.out_h; ++oi)
      for (int oj = 0; oj < p.out_w; ++oj)
        for (int k = 0; k < s.c; ++k) {
          double best = -std::numeric_limits<double>::infinity();
          double sum = 0.0;
          int count = 0;
          for (int a = 0; a < ph; ++a)
            for (int b = 0; b < pw; ++b) {
              int ii = oi * sh + a - p.top;
              int jj = oj * sw + b - p.left;
              if (ii < 0 || ii >= s.h || jj < 0 || jj >= s.w) continue;
              double v = x.at(n, ii, jj, k);
              best = std::max(best, v);
              sum += v;
              ++count;
            }
          out.at(n, oi, oj, k) = take_max ? static_cast<float>(best)
                                          : static_cast<float>(sum / count);
        }
  return out;
}

// Double two-loop matrix-vector product.
inline std::vector<float> fc_ref(const std::vector<float>& x, const std::vector<float>& w,
                                 const std::vector<float>& b, int rows, int cols) {
  std::vector<float> out(rows);
  for (int r = 0; r < rows; ++r) {
    double acc = b[r];
    for (int c = 0; c < cols; ++c)
      acc += static_cast<double>(w[static_cast<std::size_t>(r) * cols + c]) * x[c];
    out[r] = static_cast<float>(acc);
  }
  return out;
}

inline double max_abs_diff(const fdk::Tensor& a, const fdk::Tensor& b) {
  double m = 0.0;
  for (std::int64_t i = 0; i < a.numel(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a.data()[i]) - b.data()[i]));
  return m;
}

}  // namespace oracle
