#include "fdk/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "fdk/error.hpp"

namespace fdk {

std::string Shape4::str() const {
  std::ostringstream os;
  os << "(" << n << "," << h << "," << w << "," << c << ")";
  return os.str();
}

const char* err_name(Err code) {
  switch (code) {
    case Err::ChannelMismatch: return "ChannelMismatch";
    case Err::EmptyOutput: return "EmptyOutput";
    case Err::NonFiniteResult: return "NonFiniteResult";
    case Err::NonFiniteInput: return "NonFiniteInput";
    case Err::ShapeMismatch: return "ShapeMismatch";
    case Err::DimensionMismatch: return "DimensionMismatch";
    case Err::InvalidRate: return "InvalidRate";
    case Err::ParseError: return "ParseError";
    case Err::CycleDetected: return "CycleDetected";
    case Err::UnknownNode: return "UnknownNode";
    case Err::ShapeInferenceError: return "ShapeInferenceError";
    case Err::MissingWeight: return "MissingWeight";
    case Err::DecoderNotFound: return "DecoderNotFound";
    case Err::DecoderFailed: return "DecoderFailed";
    case Err::ZeroFrames: return "ZeroFrames";
    case Err::UnsupportedFormat: return "UnsupportedFormat";
    case Err::CorruptHeader: return "CorruptHeader";
    case Err::TruncatedPayload: return "TruncatedPayload";
    case Err::ZeroStd: return "ZeroStd";
    case Err::NoClasses: return "NoClasses";
    case Err::EmptyClassDir: return "EmptyClassDir";
    case Err::ClassTooSmall: return "ClassTooSmall";
    case Err::IoError: return "IoError";
    case Err::DecodeError: return "DecodeError";
    case Err::FingerprintMismatch: return "FingerprintMismatch";
    case Err::LabelOutOfRange: return "LabelOutOfRange";
    case Err::EmptyBatch: return "EmptyBatch";
    case Err::MissingEmbedding: return "MissingEmbedding";
    case Err::NonFiniteLoss: return "NonFiniteLoss";
    case Err::EmptySplit: return "EmptySplit";
    case Err::InvalidConfig: return "InvalidConfig";
    case Err::InvalidArgument: return "InvalidArgument";
  }
  return "UnknownError";
}

namespace {

void check_input_finite(const Tensor& x, const char* op) {
  for (std::int64_t i = 0; i < x.numel(); ++i)
    require(std::isfinite(x.data()[i]), Err::NonFiniteInput,
            std::string(op) + " input has a non-finite value");
}

void check_result_finite(const Tensor& x, const char* op) {
  for (std::int64_t i = 0; i < x.numel(); ++i)
    require(std::isfinite(x.data()[i]), Err::NonFiniteResult,
            std::string(op) + " produced a non-finite value");
}

}  // namespace

int out_dim(int in, int k, int stride, Padding pad) {
  if (pad == Padding::kSame) return (in + stride - 1) / stride;
  require(in >= k, Err::EmptyOutput,
          "VALID window " + std::to_string(k) + " larger than input " + std::to_string(in));
  return (in - k) / stride + 1;
}

int pad_before(int in, int k, int stride, Padding pad) {
  if (pad == Padding::kValid) return 0;
  int out = (in + stride - 1) / stride;
  int total = std::max(0, (out - 1) * stride + k - in);
  return total / 2;  // extra padding goes to the trailing side
}

Tensor conv2d(const Tensor& x, const ConvParams& p) {
  const Shape4& s = x.shape();
  require(p.kh >= 1 && p.kw >= 1 && p.sh >= 1 && p.sw >= 1, Err::InvalidArgument,
          "conv kernel and stride must be >= 1");
  require(s.c == p.c_in, Err::ChannelMismatch,
          "conv expects " + std::to_string(p.c_in) + " input channels, tensor has " +
              std::to_string(s.c));
  require(p.bias.size() == static_cast<std::size_t>(p.c_out), Err::DimensionMismatch,
          "conv bias length must equal c_out");
  require(p.weights.size() ==
              static_cast<std::size_t>(p.kh) * p.kw * p.c_in * p.c_out,
          Err::DimensionMismatch, "conv weight length must be kh*kw*c_in*c_out");

  const int oh = out_dim(s.h, p.kh, p.sh, p.pad);
  const int ow = out_dim(s.w, p.kw, p.sw, p.pad);
  const int top = pad_before(s.h, p.kh, p.sh, p.pad);
  const int left = pad_before(s.w, p.kw, p.sw, p.pad);
  const int patch = p.kh * p.kw * p.c_in;

  // Weights are (kh, kw, c_in, c_out) row-major: rows of the product matrix
  // walk (a, b, k) in the same order the patch columns are filled.
  Eigen::MatrixXd W =
      Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          p.weights.data(), patch, p.c_out)
          .cast<double>();
  Eigen::VectorXd bias =
      Eigen::Map<const Eigen::VectorXf>(p.bias.data(), p.c_out).cast<double>();

  Tensor out({s.n, oh, ow, p.c_out});
  using RowMajorXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowMajorXd patches(static_cast<Eigen::Index>(oh) * ow, patch);
  for (int n = 0; n < s.n; ++n) {
    patches.setZero();
    for (int oi = 0; oi < oh; ++oi)
      for (int oj = 0; oj < ow; ++oj) {
        Eigen::Index row = static_cast<Eigen::Index>(oi) * ow + oj;
        for (int a = 0; a < p.kh; ++a) {
          int ii = oi * p.sh + a - top;
          if (ii < 0 || ii >= s.h) continue;
          for (int b = 0; b < p.kw; ++b) {
            int jj = oj * p.sw + b - left;
            if (jj < 0 || jj >= s.w) continue;
            const float* src = x.data() + x.index(n, ii, jj, 0);
            double* dst = patches.row(row).data() + (a * p.kw + b) * p.c_in;
            for (int k = 0; k < p.c_in; ++k) dst[k] = src[k];
          }
        }
      }
    Eigen::MatrixXd prod = patches * W;  // (oh*ow) x c_out, 64-bit accumulation
    prod.rowwise() += bias.transpose();
    float* dst = out.data() + out.index(n, 0, 0, 0);
    for (Eigen::Index r = 0; r < prod.rows(); ++r)
      for (int o = 0; o < p.c_out; ++o) dst[r * p.c_out + o] = static_cast<float>(prod(r, o));
  }
  check_result_finite(out, "conv2d");
  return out;
}

Tensor relu(const Tensor& x) {
  check_input_finite(x, "relu");
  Tensor out = x;
  for (std::int64_t i = 0; i < out.numel(); ++i)
    out.data()[i] = std::max(0.0f, out.data()[i]);
  return out;
}

Tensor tanh_act(const Tensor& x) {
  check_input_finite(x, "tanh");
  Tensor out = x;
  for (std::int64_t i = 0; i < out.numel(); ++i)
    out.data()[i] = static_cast<float>(std::tanh(static_cast<double>(out.data()[i])));
  return out;
}

namespace {

Tensor pool(const Tensor& x, const PoolParams& p, bool take_max, const char* op) {
  const Shape4& s = x.shape();
  require(p.ph >= 1 && p.pw >= 1 && p.sh >= 1 && p.sw >= 1, Err::InvalidArgument,
          "pool window and stride must be >= 1");
  const int oh = out_dim(s.h, p.ph, p.sh, p.pad);
  const int ow = out_dim(s.w, p.pw, p.sw, p.pad);
  const int top = pad_before(s.h, p.ph, p.sh, p.pad);
  const int left = pad_before(s.w, p.pw, p.sw, p.pad);

  Tensor out({s.n, oh, ow, s.c});
  for (int n = 0; n < s.n; ++n)
    for (int oi = 0; oi < oh; ++oi)
      for (int oj = 0; oj < ow; ++oj) {
        int i0 = std::max(0, oi * p.sh - top);
        int i1 = std::min(s.h, oi * p.sh - top + p.ph);
        int j0 = std::max(0, oj * p.sw - left);
        int j1 = std::min(s.w, oj * p.sw - left + p.pw);
        require(i0 < i1 && j0 < j1, Err::EmptyOutput, std::string(op) + " window has no input cells");
        for (int k = 0; k < s.c; ++k) {
          if (take_max) {
            float best = -std::numeric_limits<float>::infinity();
            for (int ii = i0; ii < i1; ++ii)
              for (int jj = j0; jj < j1; ++jj) best = std::max(best, x.at(n, ii, jj, k));
            out.at(n, oi, oj, k) = best;
          } else {
            double sum = 0.0;  // padded cells excluded from the denominator
            for (int ii = i0; ii < i1; ++ii)
              for (int jj = j0; jj < j1; ++jj) sum += x.at(n, ii, jj, k);
            out.at(n, oi, oj, k) = static_cast<float>(sum / ((i1 - i0) * (j1 - j0)));
          }
        }
      }
  check_result_finite(out, op);
  return out;
}

}  // namespace

Tensor max_pool(const Tensor& x, const PoolParams& p) { return pool(x, p, true, "max_pool"); }
Tensor avg_pool(const Tensor& x, const PoolParams& p) { return pool(x, p, false, "avg_pool"); }

Tensor concat_channels(const std::vector<Tensor>& xs) {
  require(!xs.empty(), Err::InvalidArgument, "concat needs at least one input");
  const Shape4& s0 = xs.front().shape();
  int total_c = 0;
  for (const Tensor& t : xs) {
    const Shape4& s = t.shape();
    require(s.n == s0.n && s.h == s0.h && s.w == s0.w, Err::ShapeMismatch,
            "concat inputs must share (n,h,w): " + s0.str() + " vs " + s.str());
    total_c += s.c;
  }
  Tensor out({s0.n, s0.h, s0.w, total_c});
  for (int n = 0; n < s0.n; ++n)
    for (int i = 0; i < s0.h; ++i)
      for (int j = 0; j < s0.w; ++j) {
        float* dst = out.data() + out.index(n, i, j, 0);
        for (const Tensor& t : xs) {
          const float* src = t.data() + t.index(n, i, j, 0);
          dst = std::copy(src, src + t.shape().c, dst);
        }
      }
  return out;
}

Tensor dropout(const Tensor& x, float rate, DropoutMode mode, Rng& rng) {
  require(rate >= 0.0f && rate < 1.0f, Err::InvalidRate,
          "dropout rate must be in [0, 1), got " + std::to_string(rate));
  if (mode == DropoutMode::kInfer || rate == 0.0f) return x;
  Tensor out = x;
  const float scale = 1.0f / (1.0f - rate);
  for (std::int64_t i = 0; i < out.numel(); ++i) {
    if (rng.uniform() < rate)
      out.data()[i] = 0.0f;
    else
      out.data()[i] *= scale;
  }
  return out;
}

Eigen::VectorXf fully_connected(const Eigen::VectorXf& x, const Eigen::MatrixXf& W,
                                const Eigen::VectorXf& b) {
  require(W.cols() == x.size() && W.rows() == b.size(), Err::DimensionMismatch,
          "fully_connected: W is " + std::to_string(W.rows()) + "x" + std::to_string(W.cols()) +
              ", x has " + std::to_string(x.size()) + ", b has " + std::to_string(b.size()));
  Eigen::VectorXd acc = W.cast<double>() * x.cast<double>() + b.cast<double>();
  for (Eigen::Index i = 0; i < acc.size(); ++i)
    require(std::isfinite(acc[i]), Err::NonFiniteResult, "fully_connected output not finite");
  return acc.cast<float>();
}

Eigen::VectorXf softmax(const Eigen::VectorXf& logits) {
  require(logits.size() >= 1, Err::InvalidArgument, "softmax needs at least one logit");
  for (Eigen::Index i = 0; i < logits.size(); ++i)
    require(std::isfinite(logits[i]), Err::NonFiniteInput, "softmax logit not finite");
  Eigen::VectorXd z = logits.cast<double>();
  double zmax = z.maxCoeff();
  Eigen::VectorXd e = (z.array() - zmax).exp();
  return (e / e.sum()).cast<float>();
}

}  // namespace fdk
