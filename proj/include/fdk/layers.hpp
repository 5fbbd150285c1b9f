#pragma once

#include <Eigen/Dense>
#include <vector>

#include "fdk/rng.hpp"
#include "fdk/tensor.hpp"

namespace fdk {

enum class Padding { kValid, kSame };

// Kernel weights are (kh, kw, c_in, c_out) row-major, bias has length c_out.
struct ConvParams {
  int kh = 1, kw = 1, c_in = 1, c_out = 1;
  int sh = 1, sw = 1;
  Padding pad = Padding::kValid;
  std::vector<float> weights;
  std::vector<float> bias;
};

struct PoolParams {
  int ph = 1, pw = 1;
  int sh = 1, sw = 1;
  Padding pad = Padding::kValid;
};

enum class DropoutMode { kTrain, kInfer };

// Output extent along one spatial axis. VALID: floor((in - k) / s) + 1,
// requires in >= k. SAME: ceil(in / s); total zero padding
// max(0, (out - 1) * s + k - in), split floor-left / ceil-right.
int out_dim(int in, int k, int stride, Padding pad);
int pad_before(int in, int k, int stride, Padding pad);

Tensor conv2d(const Tensor& x, const ConvParams& p);
Tensor relu(const Tensor& x);
Tensor tanh_act(const Tensor& x);
Tensor max_pool(const Tensor& x, const PoolParams& p);
Tensor avg_pool(const Tensor& x, const PoolParams& p);
Tensor concat_channels(const std::vector<Tensor>& xs);
Tensor dropout(const Tensor& x, float rate, DropoutMode mode, Rng& rng);

// out = W x + b, accumulated in double. W is K x D.
Eigen::VectorXf fully_connected(const Eigen::VectorXf& x, const Eigen::MatrixXf& W,
                                const Eigen::VectorXf& b);

// Numerically stable softmax: exp(z_k - max z) / sum_j exp(z_j - max z).
Eigen::VectorXf softmax(const Eigen::VectorXf& logits);

}  // namespace fdk
