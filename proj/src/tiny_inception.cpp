#include "fdk/tiny_inception.hpp"

#include <cmath>
#include <filesystem>

#include "fdk/rng.hpp"

namespace fdk {

namespace {

struct Builder {
  ModelManifest m;
  WeightStore ws;
  std::uint64_t seed;
  int layer = 0;

  // He-style scale on the fan-in; each layer gets its own rng stream.
  void fill(const std::string& name, std::size_t count, int fan_in, Rng& rng) {
    std::vector<float> v(count);
    const double scale = std::sqrt(2.0 / fan_in);
    for (auto& x : v) x = static_cast<float>(rng.gaussian() * scale);
    ws.add(name, v);
  }

  void conv(const std::string& id, const std::string& in, int kh, int kw, int c_in, int c_out,
            int stride, Padding pad) {
    Rng rng(seed, static_cast<std::uint64_t>(layer++));
    fill(id + ".w", static_cast<std::size_t>(kh) * kw * c_in * c_out, kh * kw * c_in, rng);
    std::vector<float> bias(static_cast<std::size_t>(c_out));
    for (auto& b : bias) b = static_cast<float>(rng.gaussian() * 0.05);
    ws.add(id + ".b", bias);
    NodeSpec n;
    n.id = id;
    n.op = OpKind::kConv;
    n.inputs = {in};
    n.params = ConvSpec{kh, kw, c_out, stride, stride, pad, id + ".w", id + ".b"};
    m.nodes.push_back(n);
  }

  void simple(const std::string& id, OpKind op, std::vector<std::string> inputs,
              NodeParams params = std::monostate{}) {
    NodeSpec n;
    n.id = id;
    n.op = op;
    n.inputs = std::move(inputs);
    n.params = std::move(params);
    m.nodes.push_back(n);
  }
};

}  // namespace

Graph make_tiny_inception(std::uint64_t seed) {
  Builder b;
  b.seed = seed;
  b.m.name = "tiny_inception";
  b.m.in_h = b.m.in_w = 32;
  b.m.in_c = 3;
  b.m.pre.scale = 1.0f / 255.0f;
  b.m.pre.mean = {0.5f, 0.5f, 0.5f};
  b.m.pre.std_dev = {0.25f, 0.25f, 0.25f};
  b.m.embedding_dim = 64;
  b.m.bottleneck_id = "embed";
  b.m.output_id = "probs";
  b.m.weights_file = "tiny_inception.fdkw";

  b.simple("in", OpKind::kInput, {});
  b.conv("stem", "in", 3, 3, 3, 8, 1, Padding::kSame);       // 32x32x8
  b.simple("stem_relu", OpKind::kRelu, {"stem"});
  b.simple("pool1", OpKind::kMaxPool, {"stem_relu"},
           PoolSpec{2, 2, 2, 2, Padding::kValid});            // 16x16x8

  // inception block A: 1x1, 1x1->3x3, and a stride-1 pool branch
  b.conv("a_b1", "pool1", 1, 1, 8, 8, 1, Padding::kValid);
  b.conv("a_b2r", "pool1", 1, 1, 8, 4, 1, Padding::kValid);
  b.conv("a_b2", "a_b2r", 3, 3, 4, 8, 1, Padding::kSame);
  b.simple("a_pool", OpKind::kMaxPool, {"pool1"}, PoolSpec{3, 3, 1, 1, Padding::kSame});
  b.simple("a_cat", OpKind::kConcat, {"a_b1", "a_b2", "a_pool"});  // 16x16x24
  b.simple("pool2", OpKind::kMaxPool, {"a_cat"},
           PoolSpec{2, 2, 2, 2, Padding::kValid});                 // 8x8x24

  // inception block B: 1x1 and 1x1->3x3
  b.conv("b_b1", "pool2", 1, 1, 24, 32, 1, Padding::kValid);
  b.conv("b_b2r", "pool2", 1, 1, 24, 8, 1, Padding::kValid);
  b.conv("b_b2", "b_b2r", 3, 3, 8, 32, 1, Padding::kSame);
  b.simple("b_cat", OpKind::kConcat, {"b_b1", "b_b2"});            // 8x8x64

  b.simple("embed", OpKind::kAvgPool, {"b_cat"},
           PoolSpec{8, 8, 1, 1, Padding::kValid});                 // 1x1x64 bottleneck

  // placeholder 6-way classifier, the part transfer learning replaces
  {
    Rng rng(seed, static_cast<std::uint64_t>(b.layer++));
    b.fill("logits.w", 6 * 64, 64, rng);
    std::vector<float> bias(6);
    for (auto& v : bias) v = static_cast<float>(rng.gaussian() * 0.05);
    b.ws.add("logits.b", bias);
  }
  b.simple("logits", OpKind::kFc, {"embed"}, FcSpec{6, "logits.w", "logits.b"});
  b.simple("probs", OpKind::kSoftmax, {"logits"});

  return build_graph(std::move(b.m), std::move(b.ws));
}

std::string write_tiny_inception(const std::string& dir, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  Graph g = make_tiny_inception(seed);
  std::string path = (std::filesystem::path(dir) / "tiny_inception.fdkm").string();
  save_model(g, path);
  return path;
}

}  // namespace fdk
