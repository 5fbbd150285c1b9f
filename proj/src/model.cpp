#include "fdk/model.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

#include "fdk/io_util.hpp"

namespace fs = std::filesystem;

namespace fdk {

const char* op_name(OpKind op) {
  switch (op) {
    case OpKind::kInput: return "input";
    case OpKind::kConv: return "conv";
    case OpKind::kRelu: return "relu";
    case OpKind::kTanh: return "tanh";
    case OpKind::kMaxPool: return "maxpool";
    case OpKind::kAvgPool: return "avgpool";
    case OpKind::kConcat: return "concat";
    case OpKind::kFc: return "fc";
    case OpKind::kDropout: return "dropout";
    case OpKind::kSoftmax: return "softmax";
  }
  return "?";
}

namespace {

OpKind op_from_name(const std::string& s, const std::string& ctx) {
  if (s == "input") return OpKind::kInput;
  if (s == "conv") return OpKind::kConv;
  if (s == "relu") return OpKind::kRelu;
  if (s == "tanh") return OpKind::kTanh;
  if (s == "maxpool") return OpKind::kMaxPool;
  if (s == "avgpool") return OpKind::kAvgPool;
  if (s == "concat") return OpKind::kConcat;
  if (s == "fc") return OpKind::kFc;
  if (s == "dropout") return OpKind::kDropout;
  if (s == "softmax") return OpKind::kSoftmax;
  fail(Err::ParseError, ctx + ": unknown op '" + s + "'");
}

Padding pad_from_name(const std::string& s, const std::string& ctx) {
  if (s == "same") return Padding::kSame;
  if (s == "valid") return Padding::kValid;
  fail(Err::ParseError, ctx + ": pad must be 'same' or 'valid', got '" + s + "'");
}

const char* pad_name(Padding p) { return p == Padding::kSame ? "same" : "valid"; }

int parse_dim(const std::string& tok, const std::string& ctx) {
  std::int64_t v = parse_int(tok, ctx);
  require(v >= 1 && v <= 1 << 20, Err::ParseError, ctx + ": dimension out of range: " + tok);
  return static_cast<int>(v);
}

// node <id> <op> inputs <csv> [key value...]; value arity depends on the key.
NodeSpec parse_node_line(const std::vector<std::string>& toks, const std::string& ctx) {
  require(toks.size() >= 3, Err::ParseError, ctx + ": node line needs at least id and op");
  NodeSpec node;
  node.id = toks[1];
  node.op = op_from_name(toks[2], ctx);
  if (node.op == OpKind::kInput) {
    require(toks.size() == 3, Err::ParseError, ctx + ": input node takes no arguments");
    return node;
  }
  require(toks.size() >= 5 && toks[3] == "inputs", Err::ParseError,
          ctx + ": expected 'inputs <id[,id...]>'");
  node.inputs = split_csv(toks[4]);
  for (const auto& in : node.inputs)
    require(!in.empty(), Err::ParseError, ctx + ": empty input id");

  ConvSpec conv;
  PoolSpec pool;
  FcSpec fc;
  DropoutSpec drop;
  std::set<std::string> seen;
  std::size_t i = 5;
  auto take = [&](int count) {
    require(i + count <= toks.size(), Err::ParseError, ctx + ": key '" + toks[i - 1] +
                                                           "' is missing values");
    i += count;
  };
  while (i < toks.size()) {
    std::string key = toks[i++];
    require(seen.insert(key).second, Err::ParseError, ctx + ": duplicate key '" + key + "'");
    if (key == "kernel") {
      take(2);
      conv.kh = parse_dim(toks[i - 2], ctx);
      conv.kw = parse_dim(toks[i - 1], ctx);
    } else if (key == "window") {
      take(2);
      pool.ph = parse_dim(toks[i - 2], ctx);
      pool.pw = parse_dim(toks[i - 1], ctx);
    } else if (key == "stride") {
      take(2);
      conv.sh = pool.sh = parse_dim(toks[i - 2], ctx);
      conv.sw = pool.sw = parse_dim(toks[i - 1], ctx);
    } else if (key == "pad") {
      take(1);
      conv.pad = pool.pad = pad_from_name(toks[i - 1], ctx);
    } else if (key == "cout") {
      take(1);
      conv.c_out = parse_dim(toks[i - 1], ctx);
    } else if (key == "out") {
      take(1);
      fc.out_dim = parse_dim(toks[i - 1], ctx);
    } else if (key == "weight") {
      take(1);
      conv.weight = fc.weight = toks[i - 1];
    } else if (key == "bias") {
      take(1);
      conv.bias = fc.bias = toks[i - 1];
    } else if (key == "rate") {
      take(1);
      double r = parse_double(toks[i - 1], ctx);
      require(r >= 0.0 && r < 1.0, Err::ParseError, ctx + ": dropout rate must be in [0,1)");
      drop.rate = static_cast<float>(r);
    } else {
      fail(Err::ParseError, ctx + ": unknown key '" + key + "'");
    }
  }

  auto used = [&](std::initializer_list<const char*> allowed) {
    for (const auto& key : seen) {
      bool ok = false;
      for (const char* a : allowed)
        if (key == a) ok = true;
      require(ok, Err::ParseError,
              ctx + ": key '" + key + "' not valid for op " + op_name(node.op));
    }
  };
  switch (node.op) {
    case OpKind::kConv:
      used({"kernel", "cout", "stride", "pad", "weight", "bias"});
      require(seen.count("kernel") && seen.count("cout") && seen.count("weight") &&
                  seen.count("bias"),
              Err::ParseError, ctx + ": conv needs kernel, cout, weight, bias");
      node.params = conv;
      break;
    case OpKind::kMaxPool:
    case OpKind::kAvgPool:
      used({"window", "stride", "pad"});
      require(seen.count("window"), Err::ParseError, ctx + ": pool needs window");
      node.params = pool;
      break;
    case OpKind::kFc:
      used({"out", "weight", "bias"});
      require(seen.count("out") && seen.count("weight") && seen.count("bias"), Err::ParseError,
              ctx + ": fc needs out, weight, bias");
      node.params = fc;
      break;
    case OpKind::kDropout:
      used({"rate"});
      require(seen.count("rate"), Err::ParseError, ctx + ": dropout needs rate");
      node.params = drop;
      break;
    default:
      used({});
      break;
  }
  if (node.op != OpKind::kConcat)
    require(node.inputs.size() == 1, Err::ParseError,
            ctx + ": op " + op_name(node.op) + " takes exactly one input");
  return node;
}

}  // namespace

ModelManifest parse_model_manifest(const std::string& text) {
  ModelManifest m;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  bool saw_header = false;
  std::set<std::string> seen;
  std::vector<double> mean, std_dev;
  double scale = 1.0;
  bool have_scale = false;

  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> toks = split_ws(line);
    if (toks.empty() || toks[0][0] == '#') continue;
    std::string ctx = "line " + std::to_string(lineno);

    if (!saw_header) {
      require(toks.size() == 2 && toks[0] == "fdk_model" && toks[1] == "1", Err::ParseError,
              ctx + ": expected header 'fdk_model 1'");
      saw_header = true;
      continue;
    }
    const std::string& key = toks[0];
    if (key == "node") {
      m.nodes.push_back(parse_node_line(toks, ctx));
      continue;
    }
    require(seen.insert(key).second, Err::ParseError, ctx + ": duplicate key '" + key + "'");
    auto want = [&](std::size_t n) {
      require(toks.size() == n + 1, Err::ParseError,
              ctx + ": key '" + key + "' takes " + std::to_string(n) + " value(s)");
    };
    if (key == "name") {
      want(1);
      m.name = toks[1];
    } else if (key == "input") {
      want(3);
      m.in_h = parse_dim(toks[1], ctx);
      m.in_w = parse_dim(toks[2], ctx);
      m.in_c = parse_dim(toks[3], ctx);
    } else if (key == "scale") {
      want(1);
      scale = parse_double(toks[1], ctx);
      have_scale = true;
    } else if (key == "mean") {
      for (std::size_t i = 1; i < toks.size(); ++i) mean.push_back(parse_double(toks[i], ctx));
    } else if (key == "std") {
      for (std::size_t i = 1; i < toks.size(); ++i)
        std_dev.push_back(parse_double(toks[i], ctx));
    } else if (key == "embedding_dim") {
      want(1);
      m.embedding_dim = parse_dim(toks[1], ctx);
    } else if (key == "bottleneck") {
      want(1);
      m.bottleneck_id = toks[1];
    } else if (key == "output") {
      want(1);
      m.output_id = toks[1];
    } else if (key == "weights") {
      want(1);
      m.weights_file = toks[1];
    } else if (key == "classes") {
      want(1);
      m.classes = split_csv(toks[1]);
    } else if (key == "backbone_fingerprint") {
      want(1);
      Fingerprint fp;
      require(parse_fingerprint_hex(toks[1], fp), Err::ParseError,
              ctx + ": backbone_fingerprint must be 64 hex characters");
      m.backbone_fingerprint_hex = toks[1];
    } else {
      fail(Err::ParseError, ctx + ": unknown key '" + key + "'");
    }
  }
  require(saw_header, Err::ParseError, "empty manifest: missing 'fdk_model 1' header");
  for (const char* req : {"name", "input", "embedding_dim", "bottleneck", "output", "weights"})
    require(seen.count(req), Err::ParseError, std::string("manifest is missing '") + req + "'");

  m.pre.scale = have_scale ? static_cast<float>(scale) : 1.0f;
  m.pre.mean.assign(m.in_c, 0.0f);
  m.pre.std_dev.assign(m.in_c, 1.0f);
  if (!mean.empty()) {
    require(mean.size() == static_cast<std::size_t>(m.in_c), Err::ParseError,
            "mean needs one value per input channel");
    for (int i = 0; i < m.in_c; ++i) m.pre.mean[i] = static_cast<float>(mean[i]);
  }
  if (!std_dev.empty()) {
    require(std_dev.size() == static_cast<std::size_t>(m.in_c), Err::ParseError,
            "std needs one value per input channel");
    for (int i = 0; i < m.in_c; ++i) m.pre.std_dev[i] = static_cast<float>(std_dev[i]);
  }
  return m;
}

namespace {

std::string join_csv(const std::vector<std::string>& parts, const std::string& what) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    require(parts[i].find_first_of(", \t") == std::string::npos && !parts[i].empty(),
            Err::InvalidArgument, what + " '" + parts[i] + "' must be a non-empty token");
    if (i) out += ',';
    out += parts[i];
  }
  return out;
}

}  // namespace

std::string serialize_model_manifest(const ModelManifest& m) {
  std::ostringstream os;
  os << "fdk_model 1\n";
  os << "name " << m.name << "\n";
  os << "input " << m.in_h << " " << m.in_w << " " << m.in_c << "\n";
  os << "scale " << format_float(m.pre.scale) << "\n";
  os << "mean";
  for (float v : m.pre.mean) os << " " << format_float(v);
  os << "\nstd";
  for (float v : m.pre.std_dev) os << " " << format_float(v);
  os << "\nembedding_dim " << m.embedding_dim << "\n";
  os << "bottleneck " << m.bottleneck_id << "\n";
  os << "output " << m.output_id << "\n";
  os << "weights " << m.weights_file << "\n";
  if (!m.classes.empty()) os << "classes " << join_csv(m.classes, "class name") << "\n";
  if (!m.backbone_fingerprint_hex.empty())
    os << "backbone_fingerprint " << m.backbone_fingerprint_hex << "\n";
  for (const NodeSpec& n : m.nodes) {
    os << "node " << n.id << " " << op_name(n.op);
    if (n.op == OpKind::kInput) {
      os << "\n";
      continue;
    }
    os << " inputs " << join_csv(n.inputs, "node id");
    if (const auto* c = std::get_if<ConvSpec>(&n.params)) {
      os << " kernel " << c->kh << " " << c->kw << " cout " << c->c_out << " stride " << c->sh
         << " " << c->sw << " pad " << pad_name(c->pad) << " weight " << c->weight << " bias "
         << c->bias;
    } else if (const auto* p = std::get_if<PoolSpec>(&n.params)) {
      os << " window " << p->ph << " " << p->pw << " stride " << p->sh << " " << p->sw
         << " pad " << pad_name(p->pad);
    } else if (const auto* f = std::get_if<FcSpec>(&n.params)) {
      os << " out " << f->out_dim << " weight " << f->weight << " bias " << f->bias;
    } else if (const auto* d = std::get_if<DropoutSpec>(&n.params)) {
      os << " rate " << format_float(d->rate);
    }
    os << "\n";
  }
  return os.str();
}

int Graph::node_of(const std::string& id) const {
  auto it = index.find(id);
  require(it != index.end(), Err::UnknownNode, "no node named '" + id + "'");
  return it->second;
}

namespace {

std::vector<int> kahn_order(const std::vector<NodeSpec>& nodes,
                            const std::unordered_map<std::string, int>& index, Rng* tiebreak) {
  const int n = static_cast<int>(nodes.size());
  std::vector<int> indegree(n, 0);
  std::vector<std::vector<int>> consumers(n);
  for (int i = 0; i < n; ++i) {
    for (const std::string& in : nodes[i].inputs) {
      auto it = index.find(in);
      require(it != index.end(), Err::UnknownNode,
              "node '" + nodes[i].id + "' references undeclared node '" + in + "'");
      consumers[it->second].push_back(i);
      ++indegree[i];
    }
  }
  std::vector<int> ready;
  for (int i = 0; i < n; ++i)
    if (indegree[i] == 0) ready.push_back(i);

  std::vector<int> order;
  order.reserve(n);
  while (!ready.empty()) {
    std::size_t pick = 0;
    if (tiebreak) {
      pick = static_cast<std::size_t>(tiebreak->below(ready.size()));
    } else {
      for (std::size_t j = 1; j < ready.size(); ++j)
        if (ready[j] < ready[pick]) pick = j;
    }
    int node = ready[pick];
    ready.erase(ready.begin() + static_cast<std::ptrdiff_t>(pick));
    order.push_back(node);
    for (int consumer : consumers[node])
      if (--indegree[consumer] == 0) ready.push_back(consumer);
  }
  require(order.size() == nodes.size(), Err::CycleDetected, "layer graph contains a cycle");
  return order;
}

Shape4 infer_shape(const Graph& g, int i, const std::vector<Shape4>& shapes) {
  const NodeSpec& node = g.manifest.nodes[i];
  auto in_shape = [&](std::size_t k) { return shapes[g.index.at(node.inputs[k])]; };
  try {
    switch (node.op) {
      case OpKind::kInput:
        return {1, g.manifest.in_h, g.manifest.in_w, g.manifest.in_c};
      case OpKind::kConv: {
        const auto& c = std::get<ConvSpec>(node.params);
        Shape4 s = in_shape(0);
        return {1, out_dim(s.h, c.kh, c.sh, c.pad), out_dim(s.w, c.kw, c.sw, c.pad), c.c_out};
      }
      case OpKind::kMaxPool:
      case OpKind::kAvgPool: {
        const auto& p = std::get<PoolSpec>(node.params);
        Shape4 s = in_shape(0);
        return {1, out_dim(s.h, p.ph, p.sh, p.pad), out_dim(s.w, p.pw, p.sw, p.pad), s.c};
      }
      case OpKind::kConcat: {
        Shape4 s = in_shape(0);
        int c = 0;
        for (std::size_t k = 0; k < node.inputs.size(); ++k) {
          Shape4 sk = in_shape(k);
          require(sk.h == s.h && sk.w == s.w, Err::ShapeInferenceError,
                  "concat inputs disagree on spatial dims");
          c += sk.c;
        }
        return {1, s.h, s.w, c};
      }
      case OpKind::kFc: {
        const auto& f = std::get<FcSpec>(node.params);
        return {1, 1, 1, f.out_dim};
      }
      case OpKind::kSoftmax: {
        Shape4 s = in_shape(0);
        require(s.h == 1 && s.w == 1, Err::ShapeInferenceError,
                "softmax expects a flattened (1,1,K) input");
        return s;
      }
      case OpKind::kRelu:
      case OpKind::kTanh:
      case OpKind::kDropout:
        return in_shape(0);
    }
  } catch (const Error& e) {
    if (e.code() == Err::EmptyOutput)
      fail(Err::ShapeInferenceError, "node '" + node.id + "': " + e.what());
    throw;
  }
  fail(Err::ParseError, "unhandled op");
}

void materialize_weights(Graph& g) {
  const int n = static_cast<int>(g.manifest.nodes.size());
  g.conv_params.assign(n, std::nullopt);
  g.fc_params.assign(n, std::nullopt);
  for (int i = 0; i < n; ++i) {
    const NodeSpec& node = g.manifest.nodes[i];
    if (const auto* c = std::get_if<ConvSpec>(&node.params)) {
      Shape4 in = g.shapes[g.index.at(node.inputs[0])];
      ConvParams p;
      p.kh = c->kh;
      p.kw = c->kw;
      p.c_in = in.c;
      p.c_out = c->c_out;
      p.sh = c->sh;
      p.sw = c->sw;
      p.pad = c->pad;
      auto w = g.store.lookup(c->weight);
      auto b = g.store.lookup(c->bias);
      std::size_t expect = static_cast<std::size_t>(p.kh) * p.kw * p.c_in * p.c_out;
      require(w.size() == expect, Err::ShapeInferenceError,
              "node '" + node.id + "': weight '" + c->weight + "' has " +
                  std::to_string(w.size()) + " floats, expected " + std::to_string(expect));
      require(b.size() == static_cast<std::size_t>(p.c_out), Err::ShapeInferenceError,
              "node '" + node.id + "': bias '" + c->bias + "' length must equal cout");
      p.weights.assign(w.begin(), w.end());
      p.bias.assign(b.begin(), b.end());
      g.conv_params[i] = std::move(p);
    } else if (const auto* f = std::get_if<FcSpec>(&node.params)) {
      Shape4 in = g.shapes[g.index.at(node.inputs[0])];
      const std::int64_t d = static_cast<std::int64_t>(in.h) * in.w * in.c;
      auto w = g.store.lookup(f->weight);
      auto b = g.store.lookup(f->bias);
      std::size_t expect = static_cast<std::size_t>(f->out_dim) * d;
      require(w.size() == expect, Err::ShapeInferenceError,
              "node '" + node.id + "': weight '" + f->weight + "' has " +
                  std::to_string(w.size()) + " floats, expected " + std::to_string(expect));
      require(b.size() == static_cast<std::size_t>(f->out_dim), Err::ShapeInferenceError,
              "node '" + node.id + "': bias length must equal out");
      Graph::FcWeights fw;
      fw.W = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic,
                                            Eigen::RowMajor>>(w.data(), f->out_dim, d)
                 .eval();
      fw.b = Eigen::Map<const Eigen::VectorXf>(b.data(), f->out_dim);
      g.fc_params[i] = std::move(fw);
    }
  }
}

}  // namespace

Graph build_graph(ModelManifest manifest, WeightStore store) {
  Graph g;
  g.manifest = std::move(manifest);
  g.store = std::move(store);

  require(!g.manifest.nodes.empty(), Err::ParseError, "model has no nodes");
  int input_count = 0;
  for (std::size_t i = 0; i < g.manifest.nodes.size(); ++i) {
    const NodeSpec& node = g.manifest.nodes[i];
    require(g.index.emplace(node.id, static_cast<int>(i)).second, Err::ParseError,
            "duplicate node id '" + node.id + "'");
    if (node.op == OpKind::kInput) ++input_count;
  }
  require(input_count == 1, Err::ParseError, "model must declare exactly one input node");

  g.topo = kahn_order(g.manifest.nodes, g.index, nullptr);

  g.shapes.assign(g.manifest.nodes.size(), Shape4{});
  for (int i : g.topo) g.shapes[static_cast<std::size_t>(i)] = infer_shape(g, i, g.shapes);

  materialize_weights(g);

  int bottleneck = g.node_of(g.manifest.bottleneck_id);
  g.node_of(g.manifest.output_id);
  const Shape4& bs = g.shapes[static_cast<std::size_t>(bottleneck)];
  require(static_cast<std::int64_t>(bs.h) * bs.w * bs.c == g.manifest.embedding_dim,
          Err::ShapeInferenceError,
          "bottleneck '" + g.manifest.bottleneck_id + "' flattens to " +
              std::to_string(static_cast<std::int64_t>(bs.h) * bs.w * bs.c) +
              " values, embedding_dim says " + std::to_string(g.manifest.embedding_dim));

  g.fingerprint = fingerprint_bytes(serialize_model_manifest(g.manifest), g.store.serialize());
  return g;
}

Graph load_model(const std::string& manifest_path) {
  ModelManifest m = parse_model_manifest(read_file(manifest_path));
  fs::path dir = fs::path(manifest_path).parent_path();
  std::string weights_path = (dir / m.weights_file).string();
  require(file_exists(weights_path), Err::MissingWeight,
          "weights file not found: " + weights_path);
  WeightStore ws = WeightStore::load(weights_path);
  return build_graph(std::move(m), std::move(ws));
}

void save_model(const Graph& g, const std::string& manifest_path) {
  fs::path dir = fs::path(manifest_path).parent_path();
  atomic_write_file(manifest_path, serialize_model_manifest(g.manifest));
  atomic_write_file((dir / g.manifest.weights_file).string(), g.store.serialize());
}

void shuffle_topo_order(Graph& g, std::uint64_t seed) {
  Rng rng(seed);
  g.topo = kahn_order(g.manifest.nodes, g.index, &rng);
}

namespace {

void check_shape(const Tensor& t, const Shape4& want, int batch, const std::string& id) {
  const Shape4& s = t.shape();
  require(s.n == batch && s.h == want.h && s.w == want.w && s.c == want.c, Err::ShapeMismatch,
          "node '" + id + "' produced shape " + t.shape().str() + ", inferred " + want.str());
}

Tensor eval_node(const Graph& g, int i, const std::vector<Tensor>& results, const Tensor& x) {
  const NodeSpec& node = g.manifest.nodes[i];
  auto input = [&](std::size_t k) -> const Tensor& {
    return results[static_cast<std::size_t>(g.index.at(node.inputs[k]))];
  };
  switch (node.op) {
    case OpKind::kInput: {
      const Shape4& want = g.shapes[static_cast<std::size_t>(i)];
      require(x.shape().h == want.h && x.shape().w == want.w && x.shape().c == want.c,
              Err::ShapeMismatch, "input tensor is " + x.shape().str() + ", model expects (n," +
                                      std::to_string(want.h) + "," + std::to_string(want.w) +
                                      "," + std::to_string(want.c) + ")");
      return x;
    }
    case OpKind::kConv:
      return conv2d(input(0), *g.conv_params[static_cast<std::size_t>(i)]);
    case OpKind::kRelu:
      return relu(input(0));
    case OpKind::kTanh:
      return tanh_act(input(0));
    case OpKind::kMaxPool:
      return max_pool(input(0), {std::get<PoolSpec>(node.params).ph,
                                 std::get<PoolSpec>(node.params).pw,
                                 std::get<PoolSpec>(node.params).sh,
                                 std::get<PoolSpec>(node.params).sw,
                                 std::get<PoolSpec>(node.params).pad});
    case OpKind::kAvgPool:
      return avg_pool(input(0), {std::get<PoolSpec>(node.params).ph,
                                 std::get<PoolSpec>(node.params).pw,
                                 std::get<PoolSpec>(node.params).sh,
                                 std::get<PoolSpec>(node.params).sw,
                                 std::get<PoolSpec>(node.params).pad});
    case OpKind::kConcat: {
      std::vector<Tensor> ins;
      ins.reserve(node.inputs.size());
      for (std::size_t k = 0; k < node.inputs.size(); ++k) ins.push_back(input(k));
      return concat_channels(ins);
    }
    case OpKind::kFc: {
      const Tensor& in = input(0);
      const auto& fw = *g.fc_params[static_cast<std::size_t>(i)];
      const Shape4& s = in.shape();
      const int d = s.h * s.w * s.c;
      const int k_out = static_cast<int>(fw.W.rows());
      Tensor out({s.n, 1, 1, k_out});
      for (int n = 0; n < s.n; ++n) {
        Eigen::Map<const Eigen::VectorXf> xv(in.data() + in.index(n, 0, 0, 0), d);
        Eigen::VectorXf y = fully_connected(xv, fw.W, fw.b);
        std::copy(y.data(), y.data() + k_out, out.data() + out.index(n, 0, 0, 0));
      }
      return out;
    }
    case OpKind::kDropout:
      return input(0);  // frozen-backbone execution always runs dropout as inference
    case OpKind::kSoftmax: {
      const Tensor& in = input(0);
      const Shape4& s = in.shape();
      Tensor out(s);
      for (int n = 0; n < s.n; ++n) {
        Eigen::Map<const Eigen::VectorXf> zv(in.data() + in.index(n, 0, 0, 0), s.c);
        Eigen::VectorXf p = softmax(zv);
        std::copy(p.data(), p.data() + s.c, out.data() + out.index(n, 0, 0, 0));
      }
      return out;
    }
  }
  fail(Err::ParseError, "unhandled op");
}

// Evaluates the subset of nodes marked needed, in g.topo order.
std::vector<Tensor> run_nodes(const Graph& g, const Tensor& x, const std::vector<bool>& needed) {
  std::vector<Tensor> results(g.manifest.nodes.size());
  for (int i : g.topo) {
    if (!needed[static_cast<std::size_t>(i)]) continue;
    const NodeSpec& node = g.manifest.nodes[static_cast<std::size_t>(i)];
    try {
      results[static_cast<std::size_t>(i)] = eval_node(g, i, results, x);
    } catch (const Error& e) {
      if (e.code() == Err::NonFiniteResult || e.code() == Err::NonFiniteInput)
        fail(e.code(), "at node '" + node.id + "': " + e.what());
      throw;
    }
    check_shape(results[static_cast<std::size_t>(i)], g.shapes[static_cast<std::size_t>(i)],
                x.shape().n, node.id);
  }
  return results;
}

std::vector<bool> ancestors_of(const Graph& g, int target) {
  std::vector<bool> needed(g.manifest.nodes.size(), false);
  std::vector<int> stack{target};
  while (!stack.empty()) {
    int i = stack.back();
    stack.pop_back();
    if (needed[static_cast<std::size_t>(i)]) continue;
    needed[static_cast<std::size_t>(i)] = true;
    for (const std::string& in : g.manifest.nodes[static_cast<std::size_t>(i)].inputs)
      stack.push_back(g.index.at(in));
  }
  return needed;
}

}  // namespace

std::map<std::string, Tensor> forward(const Graph& g, const Tensor& x) {
  std::vector<bool> all(g.manifest.nodes.size(), true);
  std::vector<Tensor> results = run_nodes(g, x, all);
  std::map<std::string, Tensor> out;
  for (std::size_t i = 0; i < results.size(); ++i)
    out.emplace(g.manifest.nodes[i].id, std::move(results[i]));
  return out;
}

Eigen::VectorXf extract_features(const Graph& g, const Tensor& x) {
  require(x.shape().n == 1, Err::InvalidArgument,
          "extract_features takes a single image (batch 1)");
  int bottleneck = g.node_of(g.manifest.bottleneck_id);
  std::vector<Tensor> results = run_nodes(g, x, ancestors_of(g, bottleneck));
  const Tensor& t = results[static_cast<std::size_t>(bottleneck)];
  Eigen::VectorXf e(g.manifest.embedding_dim);
  std::copy(t.data(), t.data() + g.manifest.embedding_dim, e.data());
  return e;
}

namespace {

std::string unique_name(std::string base, const auto& taken) {
  while (taken(base)) base = "_" + base;
  return base;
}

}  // namespace

Graph attach_head(const Graph& g, const SoftmaxHead& head) {
  const int k_out = head.num_classes();
  require(k_out >= 1, Err::InvalidArgument, "head must have at least one class");
  require(head.dim() == g.manifest.embedding_dim, Err::DimensionMismatch,
          "head dim " + std::to_string(head.dim()) + " != embedding_dim " +
              std::to_string(g.manifest.embedding_dim));
  require(head.b.size() == k_out, Err::DimensionMismatch, "head bias length must equal K");
  require(head.class_names.size() == static_cast<std::size_t>(k_out), Err::InvalidArgument,
          "head needs one class name per row");
  require(head.W.allFinite() && head.b.allFinite(), Err::NonFiniteInput,
          "head parameters must be finite");

  int bottleneck = g.node_of(g.manifest.bottleneck_id);
  std::vector<bool> keep = ancestors_of(g, bottleneck);

  ModelManifest m;
  m.name = g.manifest.name + "-retrained";
  m.in_h = g.manifest.in_h;
  m.in_w = g.manifest.in_w;
  m.in_c = g.manifest.in_c;
  m.pre = g.manifest.pre;
  m.embedding_dim = g.manifest.embedding_dim;
  m.bottleneck_id = g.manifest.bottleneck_id;
  m.classes = head.class_names;
  m.backbone_fingerprint_hex = to_hex(g.fingerprint.data(), g.fingerprint.size());
  m.weights_file = "classifier.fdkw";

  WeightStore ws;
  for (int i : g.topo) {
    if (!keep[static_cast<std::size_t>(i)]) continue;
    const NodeSpec& node = g.manifest.nodes[static_cast<std::size_t>(i)];
    m.nodes.push_back(node);
    if (const auto* c = std::get_if<ConvSpec>(&node.params)) {
      auto w = g.store.lookup(c->weight);
      auto b = g.store.lookup(c->bias);
      if (!ws.contains(c->weight)) ws.add(c->weight, w.data(), w.size());
      if (!ws.contains(c->bias)) ws.add(c->bias, b.data(), b.size());
    } else if (const auto* f = std::get_if<FcSpec>(&node.params)) {
      auto w = g.store.lookup(f->weight);
      auto b = g.store.lookup(f->bias);
      if (!ws.contains(f->weight)) ws.add(f->weight, w.data(), w.size());
      if (!ws.contains(f->bias)) ws.add(f->bias, b.data(), b.size());
    }
  }

  auto id_taken = [&](const std::string& id) {
    for (const NodeSpec& n : m.nodes)
      if (n.id == id) return true;
    return false;
  };
  std::string fc_id = unique_name("head_fc", id_taken);
  std::string out_id = unique_name("head_probs", id_taken);
  auto weight_taken = [&](const std::string& name) { return ws.contains(name); };
  std::string w_name = unique_name("head_fc.weight", weight_taken);
  std::string b_name = unique_name("head_fc.bias", weight_taken);

  // row-major K x D, matching the fc weight layout the loader expects
  std::vector<float> wrow(static_cast<std::size_t>(k_out) * head.dim());
  for (int r = 0; r < k_out; ++r)
    for (int c = 0; c < head.dim(); ++c)
      wrow[static_cast<std::size_t>(r) * head.dim() + c] = head.W(r, c);
  ws.add(w_name, wrow);
  ws.add(b_name, head.b.data(), static_cast<std::size_t>(head.b.size()));

  NodeSpec fc_node;
  fc_node.id = fc_id;
  fc_node.op = OpKind::kFc;
  fc_node.inputs = {g.manifest.bottleneck_id};
  fc_node.params = FcSpec{k_out, w_name, b_name};
  m.nodes.push_back(fc_node);

  NodeSpec sm_node;
  sm_node.id = out_id;
  sm_node.op = OpKind::kSoftmax;
  sm_node.inputs = {fc_id};
  m.nodes.push_back(sm_node);
  m.output_id = out_id;

  return build_graph(std::move(m), std::move(ws));
}

SoftmaxHead head_from_graph(const Graph& g) {
  int out = g.node_of(g.manifest.output_id);
  const NodeSpec& sm = g.manifest.nodes[static_cast<std::size_t>(out)];
  require(sm.op == OpKind::kSoftmax, Err::InvalidConfig,
          "bundle output node is not a softmax");
  int fc = g.node_of(sm.inputs.at(0));
  require(g.fc_params[static_cast<std::size_t>(fc)].has_value(), Err::InvalidConfig,
          "bundle output is not fed by a fully-connected node");
  SoftmaxHead head;
  head.W = g.fc_params[static_cast<std::size_t>(fc)]->W;
  head.b = g.fc_params[static_cast<std::size_t>(fc)]->b;
  head.class_names = g.manifest.classes;
  require(head.class_names.size() == static_cast<std::size_t>(head.W.rows()),
          Err::InvalidConfig, "bundle class list does not match head rows");
  return head;
}

}  // namespace fdk
