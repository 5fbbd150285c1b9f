#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "fdk/layers.hpp"

namespace fdk {

// The trainable classification part: an affine map to K logits followed by
// softmax. Parameters are float32; K rows, D columns.
struct SoftmaxHead {
  Eigen::MatrixXf W;
  Eigen::VectorXf b;
  std::vector<std::string> class_names;

  int num_classes() const { return static_cast<int>(W.rows()); }
  int dim() const { return static_cast<int>(W.cols()); }
};

// Zero-initialized head; requires K >= 2 and K == |class_names|.
SoftmaxHead init_head(int num_classes, int dim, std::vector<std::string> class_names);

// softmax(W e + b)
Eigen::VectorXf head_forward(const SoftmaxHead& head, const Eigen::VectorXf& embedding);

// -ln(probs[label]), clamped at 1e-12.
double cross_entropy(const Eigen::VectorXf& probs, int label);

}  // namespace fdk
