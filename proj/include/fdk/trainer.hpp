#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fdk/dataset.hpp"
#include "fdk/embedding_cache.hpp"
#include "fdk/model.hpp"
#include "fdk/softmax_head.hpp"

namespace fdk {

struct TrainConfig {
  float learning_rate = 0.01f;
  int steps = 4000;
  int batch_size = 100;
  float momentum = 0.0f;
  float dropout_rate = 0.0f;  // embedding dropout during training; off by default
  std::uint64_t seed = 42;
  int eval_every = 100;
};

struct EvalPoint {
  int step = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  std::optional<double> validation_accuracy;  // absent when the split is empty
};

struct TrainHistory {
  std::vector<EvalPoint> points;

  std::optional<double> final_validation_accuracy() const;
  std::optional<double> best_validation_accuracy() const;
};

std::string serialize_history(const TrainHistory& h);

struct EmbedStats {
  std::size_t computed = 0;
  std::size_t reused = 0;
};

// Runs decode -> resize -> normalize -> extract_features for every record
// whose content hash is not cached yet. Appending to a cache produced by a
// different backbone fails before any compute. Per-image work may fan out
// over `threads`; the resulting cache is independent of completion order.
EmbedStats compute_embeddings(const Graph& g, const DatasetManifest& m, EmbeddingCache& cache,
                              int threads = 1);

struct Batch {
  std::vector<std::pair<const Eigen::VectorXf*, int>> samples;  // embedding, label index
};

// Mean softmax cross-entropy gradient over the batch: per sample
// dlogits = p - onehot(label), dW += dlogits * e^T, db += dlogits.
// Accumulated in double, returned as float.
struct HeadGradient {
  Eigen::MatrixXf dW;
  Eigen::VectorXf db;
  double batch_loss = 0.0;
};

HeadGradient head_gradient(const SoftmaxHead& head, const Batch& batch);

struct SgdState {
  Eigen::MatrixXf vW;
  Eigen::VectorXf vb;
};

// v <- momentum * v - lr * g;  theta <- theta + v
void sgd_step(SoftmaxHead& head, const HeadGradient& g, const TrainConfig& cfg, SgdState& state);

// Mini-batch SGD on cached embeddings; deterministic function of
// (cache, manifest, config).
std::pair<SoftmaxHead, TrainHistory> train(const EmbeddingCache& cache,
                                           const DatasetManifest& m, const TrainConfig& cfg);

}  // namespace fdk
