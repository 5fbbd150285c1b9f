#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "fdk/hash.hpp"
#include "fdk/layers.hpp"
#include "fdk/rng.hpp"
#include "fdk/softmax_head.hpp"
#include "fdk/tensor.hpp"
#include "fdk/weight_store.hpp"

namespace fdk {

enum class OpKind {
  kInput,
  kConv,
  kRelu,
  kTanh,
  kMaxPool,
  kAvgPool,
  kConcat,
  kFc,
  kDropout,
  kSoftmax,
};

const char* op_name(OpKind op);

struct ConvSpec {
  int kh = 1, kw = 1, c_out = 1, sh = 1, sw = 1;
  Padding pad = Padding::kValid;
  std::string weight, bias;  // WeightStore entry names
};

struct PoolSpec {
  int ph = 1, pw = 1, sh = 1, sw = 1;
  Padding pad = Padding::kValid;
};

struct FcSpec {
  int out_dim = 1;
  std::string weight, bias;
};

struct DropoutSpec {
  float rate = 0.0f;
};

using NodeParams = std::variant<std::monostate, ConvSpec, PoolSpec, FcSpec, DropoutSpec>;

struct NodeSpec {
  std::string id;
  OpKind op = OpKind::kInput;
  std::vector<std::string> inputs;
  NodeParams params;
};

struct Preprocess {
  float scale = 1.0f;
  std::vector<float> mean;  // one value per input channel
  std::vector<float> std_dev;
};

// Declarative layer DAG plus preprocessing constants. Grammar of the on-disk
// form is specified in docs/formats.md.
struct ModelManifest {
  std::string name;
  int in_h = 0, in_w = 0, in_c = 0;
  Preprocess pre;
  int embedding_dim = 0;
  std::string bottleneck_id;
  std::string output_id;
  std::string weights_file;  // relative to the manifest's directory
  std::vector<std::string> classes;            // set on retrained bundles
  std::string backbone_fingerprint_hex;        // provenance of the frozen backbone
  std::vector<NodeSpec> nodes;
};

ModelManifest parse_model_manifest(const std::string& text);
std::string serialize_model_manifest(const ModelManifest& m);

// Validated, executable model: topological order and static output shapes
// computed up front, weights materialized per node. Immutable after load;
// forward/extract_features are reentrant.
struct Graph {
  ModelManifest manifest;
  WeightStore store;
  std::vector<int> topo;                 // node indices in evaluation order
  std::vector<Shape4> shapes;            // inferred per node, batch dim 1
  std::unordered_map<std::string, int> index;
  std::vector<std::optional<ConvParams>> conv_params;
  struct FcWeights {
    Eigen::MatrixXf W;
    Eigen::VectorXf b;
  };
  std::vector<std::optional<FcWeights>> fc_params;
  Fingerprint fingerprint{};

  int node_of(const std::string& id) const;
};

Graph build_graph(ModelManifest manifest, WeightStore store);
Graph load_model(const std::string& manifest_path);
void save_model(const Graph& g, const std::string& manifest_path);

// Re-derives a valid topological order using seeded tie-breaking; forward
// results must not depend on the choice.
void shuffle_topo_order(Graph& g, std::uint64_t seed);

// Evaluates every node exactly once; dropout nodes run as the identity.
std::map<std::string, Tensor> forward(const Graph& g, const Tensor& x);

// Evaluates only the bottleneck's ancestors and returns its output flattened
// to the manifest's embedding_dim. Input batch must be 1.
Eigen::VectorXf extract_features(const Graph& g, const Tensor& x);

// Feature-extraction subgraph + FC(head) + softmax as a new deployable
// classifier; the original classification nodes are discarded and the head's
// class names are recorded in the emitted manifest.
Graph attach_head(const Graph& g, const SoftmaxHead& head);

// Recovers the trainable head from a retrained bundle (final FC node + class
// list).
SoftmaxHead head_from_graph(const Graph& g);

}  // namespace fdk
