#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fdk/error.hpp"

namespace fdk {

struct Shape4 {
  int n = 0, h = 0, w = 0, c = 0;

  std::int64_t numel() const {
    return static_cast<std::int64_t>(n) * h * w * c;
  }
  bool operator==(const Shape4&) const = default;
  std::string str() const;
};

// Rank-4 (batch, rows, cols, channels) float32 array, row-major in
// (n, h, w, c) order. The currency of every layer operation.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape4 shape) : shape_(shape) {
    require(shape.n >= 1 && shape.h >= 1 && shape.w >= 1 && shape.c >= 1,
            Err::ShapeMismatch, "tensor dims must all be >= 1, got " + shape.str());
    data_.assign(static_cast<std::size_t>(shape.numel()), 0.0f);
  }

  Tensor(Shape4 shape, std::vector<float> data) : shape_(shape), data_(std::move(data)) {
    require(shape.n >= 1 && shape.h >= 1 && shape.w >= 1 && shape.c >= 1,
            Err::ShapeMismatch, "tensor dims must all be >= 1, got " + shape.str());
    require(data_.size() == static_cast<std::size_t>(shape.numel()), Err::ShapeMismatch,
            "data length does not match shape " + shape.str());
  }

  const Shape4& shape() const { return shape_; }
  std::int64_t numel() const { return shape_.numel(); }

  std::size_t index(int n, int i, int j, int k) const {
    return ((static_cast<std::size_t>(n) * shape_.h + i) * shape_.w + j) * shape_.c + k;
  }
  float at(int n, int i, int j, int k) const { return data_[index(n, i, j, k)]; }
  float& at(int n, int i, int j, int k) { return data_[index(n, i, j, k)]; }

  const float* data() const { return data_.data(); }
  float* data() { return data_.data(); }
  const std::vector<float>& values() const { return data_; }

  bool same_bits(const Tensor& other) const {
    return shape_ == other.shape_ && data_ == other.data_;
  }

 private:
  Shape4 shape_;
  std::vector<float> data_;
};

}  // namespace fdk
