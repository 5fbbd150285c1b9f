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

struct ConfusionMatrix {
  std::vector<std::string> class_names;
  std::vector<std::vector<std::uint64_t>> counts;  // rows = true, cols = predicted

  std::uint64_t total() const;
  std::uint64_t trace() const;
  bool operator==(const ConfusionMatrix&) const = default;
};

struct Misclassification {
  std::string path;
  std::string true_label;
  std::string predicted_label;
  double confidence = 0.0;  // softmax probability of the predicted class

  bool operator==(const Misclassification&) const = default;
};

struct EvalReport {
  std::string split;  // which record set was scored
  ConfusionMatrix confusion;
  std::uint64_t total = 0;
  double micro_accuracy = 0.0;  // trace / total
  double macro_accuracy = 0.0;  // unweighted mean over classes with support
  // indexed like class_names; absent for classes with zero support
  std::vector<std::optional<double>> per_class_accuracy;
  double misclassification_rate = 0.0;
  std::vector<Misclassification> misclassifications;

  bool operator==(const EvalReport&) const = default;
};

// Argmax of head_forward; ties break toward the lowest class index.
std::pair<int, Eigen::VectorXf> predict(const SoftmaxHead& head,
                                        const Eigen::VectorXf& embedding);

// Same contract for a retrained bundle on a preprocessed input tensor.
std::pair<int, Eigen::VectorXf> predict(const Graph& g, const Tensor& input);

EvalReport evaluate(const SoftmaxHead& head, const EmbeddingCache& cache,
                    const DatasetManifest& m, Split split);

enum class ReportFormat { kText, kStructured };

std::string render_report_text(const EvalReport& r);
std::string render_report_json(const EvalReport& r);
std::string render_report(const EvalReport& r, ReportFormat format);
EvalReport parse_report_json(const std::string& text);

}  // namespace fdk
