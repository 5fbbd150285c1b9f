#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include "fdk/image.hpp"
#include "fdk/io_util.hpp"
#include "fdk/rng.hpp"
#include "fdk/trainer.hpp"

namespace fdk {

SoftmaxHead init_head(int num_classes, int dim, std::vector<std::string> class_names) {
  require(num_classes >= 2, Err::InvalidArgument,
          "a classification head needs at least 2 classes");
  require(dim >= 1, Err::InvalidArgument, "embedding dim must be >= 1");
  require(class_names.size() == static_cast<std::size_t>(num_classes), Err::InvalidArgument,
          "need one class name per class");
  SoftmaxHead head;
  head.W = Eigen::MatrixXf::Zero(num_classes, dim);
  head.b = Eigen::VectorXf::Zero(num_classes);
  head.class_names = std::move(class_names);
  return head;
}

Eigen::VectorXf head_forward(const SoftmaxHead& head, const Eigen::VectorXf& embedding) {
  return softmax(fully_connected(embedding, head.W, head.b));
}

double cross_entropy(const Eigen::VectorXf& probs, int label) {
  require(label >= 0 && label < probs.size(), Err::LabelOutOfRange,
          "label " + std::to_string(label) + " outside [0, " + std::to_string(probs.size()) +
              ")");
  return -std::log(std::max(static_cast<double>(probs[label]), 1e-12));
}

namespace {

// Double-precision logits -> probabilities for one sample. The gradient and
// loss sums stay in 64-bit; parameters remain float32.
Eigen::VectorXd sample_probs(const Eigen::MatrixXd& w, const Eigen::VectorXd& b,
                             const Eigen::VectorXd& e) {
  Eigen::VectorXd z = w * e + b;
  double zmax = z.maxCoeff();
  Eigen::VectorXd p = (z.array() - zmax).exp();
  return p / p.sum();
}

}  // namespace

HeadGradient head_gradient(const SoftmaxHead& head, const Batch& batch) {
  require(!batch.samples.empty(), Err::EmptyBatch, "gradient of an empty batch");
  const int k = head.num_classes();
  const int d = head.dim();
  Eigen::MatrixXd w = head.W.cast<double>();
  Eigen::VectorXd b = head.b.cast<double>();
  Eigen::MatrixXd dw = Eigen::MatrixXd::Zero(k, d);
  Eigen::VectorXd db = Eigen::VectorXd::Zero(k);
  double loss = 0.0;
  for (const auto& [embedding, label] : batch.samples) {
    require(label >= 0 && label < k, Err::LabelOutOfRange,
            "label " + std::to_string(label) + " outside [0, " + std::to_string(k) + ")");
    require(embedding->size() == d, Err::DimensionMismatch,
            "embedding length does not match head dim");
    Eigen::VectorXd e = embedding->cast<double>();
    Eigen::VectorXd p = sample_probs(w, b, e);
    loss += -std::log(std::max(p[label], 1e-12));
    p[label] -= 1.0;  // dlogits = p - onehot
    dw.noalias() += p * e.transpose();
    db += p;
  }
  const double inv = 1.0 / static_cast<double>(batch.samples.size());
  HeadGradient g;
  g.dW = (dw * inv).cast<float>();
  g.db = (db * inv).cast<float>();
  g.batch_loss = loss * inv;
  return g;
}

void sgd_step(SoftmaxHead& head, const HeadGradient& g, const TrainConfig& cfg,
              SgdState& state) {
  require(g.dW.rows() == head.W.rows() && g.dW.cols() == head.W.cols() &&
              g.db.size() == head.b.size(),
          Err::DimensionMismatch, "gradient shape does not match head");
  if (state.vW.size() == 0) {
    state.vW = Eigen::MatrixXf::Zero(head.W.rows(), head.W.cols());
    state.vb = Eigen::VectorXf::Zero(head.b.size());
  }
  state.vW = cfg.momentum * state.vW - cfg.learning_rate * g.dW;
  state.vb = cfg.momentum * state.vb - cfg.learning_rate * g.db;
  head.W += state.vW;
  head.b += state.vb;
}

EmbedStats compute_embeddings(const Graph& g, const DatasetManifest& m, EmbeddingCache& cache,
                              int threads) {
  require(threads >= 1, Err::InvalidArgument, "threads must be >= 1");
  if (cache.size() == 0 && cache.dim() == 0) {
    cache = EmbeddingCache(g.manifest.embedding_dim, g.fingerprint);
  }
  require(cache.fingerprint() == g.fingerprint, Err::FingerprintMismatch,
          "embedding cache was produced by a different backbone");
  require(cache.dim() == g.manifest.embedding_dim, Err::FingerprintMismatch,
          "embedding cache dim does not match the model");

  // Unique uncached hashes, first occurrence wins; keeps one decode per
  // distinct image content regardless of duplicate paths.
  std::vector<std::pair<std::uint64_t, const ImageRecord*>> todo;
  EmbedStats stats;
  {
    std::vector<std::uint64_t> seen;
    for (const ImageRecord& r : m.records) {
      if (cache.contains(r.content_hash)) {
        ++stats.reused;
        continue;
      }
      if (std::find(seen.begin(), seen.end(), r.content_hash) != seen.end()) {
        ++stats.reused;
        continue;
      }
      seen.push_back(r.content_hash);
      todo.emplace_back(r.content_hash, &r);
    }
  }

  std::vector<Eigen::VectorXf> results(todo.size());
  std::vector<std::string> errors(todo.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= todo.size()) break;
      try {
        Tensor input = load_model_input(todo[i].second->path, g.manifest);
        results[i] = extract_features(g, input);
      } catch (const Error& e) {
        errors[i] = e.what();
      }
    }
  };
  if (threads == 1 || todo.size() <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (std::size_t i = 0; i < todo.size(); ++i)
    require(errors[i].empty(), Err::DecodeError,
            todo[i].second->path + ": " + errors[i]);
  // insertion in manifest order, independent of worker completion order
  for (std::size_t i = 0; i < todo.size(); ++i)
    cache.insert(todo[i].first, std::move(results[i]));
  stats.computed = todo.size();
  return stats;
}

std::optional<double> TrainHistory::final_validation_accuracy() const {
  if (points.empty()) return std::nullopt;
  return points.back().validation_accuracy;
}

std::optional<double> TrainHistory::best_validation_accuracy() const {
  std::optional<double> best;
  for (const EvalPoint& p : points)
    if (p.validation_accuracy && (!best || *p.validation_accuracy > *best))
      best = p.validation_accuracy;
  return best;
}

std::string serialize_history(const TrainHistory& h) {
  std::string out = "fdk_history 1\n";
  out += "step train_loss train_accuracy validation_accuracy\n";
  for (const EvalPoint& p : h.points) {
    out += std::to_string(p.step) + " " + format_float(p.train_loss) + " " +
           format_float(p.train_accuracy) + " " +
           (p.validation_accuracy ? format_float(*p.validation_accuracy) : std::string("-")) +
           "\n";
  }
  return out;
}

namespace {

struct LabeledSet {
  std::vector<const Eigen::VectorXf*> embeddings;
  std::vector<int> labels;
};

LabeledSet gather(const EmbeddingCache& cache, const DatasetManifest& m, Split split) {
  LabeledSet set;
  for (const ImageRecord& r : m.records) {
    if (r.split != split) continue;
    require(cache.contains(r.content_hash), Err::MissingEmbedding,
            "no cached embedding for " + r.path);
    set.embeddings.push_back(&cache.at(r.content_hash));
    set.labels.push_back(m.class_index(r.class_label));
  }
  return set;
}

// Mean loss / accuracy over a whole set, 64-bit accumulation.
std::pair<double, double> score(const SoftmaxHead& head, const LabeledSet& set) {
  Eigen::MatrixXd w = head.W.cast<double>();
  Eigen::VectorXd b = head.b.cast<double>();
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < set.embeddings.size(); ++i) {
    Eigen::VectorXd p = sample_probs(w, b, set.embeddings[i]->cast<double>());
    loss += -std::log(std::max(p[set.labels[i]], 1e-12));
    int argmax = 0;
    for (int k = 1; k < p.size(); ++k)
      if (p[k] > p[argmax]) argmax = k;
    if (argmax == set.labels[i]) ++correct;
  }
  const double n = static_cast<double>(set.embeddings.size());
  return {loss / n, static_cast<double>(correct) / n};
}

}  // namespace

std::pair<SoftmaxHead, TrainHistory> train(const EmbeddingCache& cache,
                                           const DatasetManifest& m, const TrainConfig& cfg) {
  require(cfg.learning_rate > 0.0f, Err::InvalidConfig, "learning_rate must be > 0");
  require(cfg.steps >= 1, Err::InvalidConfig, "steps must be >= 1");
  require(cfg.eval_every >= 1, Err::InvalidConfig, "eval_every must be >= 1");
  require(cfg.dropout_rate >= 0.0f && cfg.dropout_rate < 1.0f, Err::InvalidConfig,
          "dropout_rate must be in [0, 1)");
  require(m.classes.size() >= 2, Err::InvalidConfig, "training needs at least 2 classes");

  LabeledSet train_set = gather(cache, m, Split::kTrain);
  LabeledSet val_set = gather(cache, m, Split::kValidation);
  require(!train_set.embeddings.empty(), Err::EmptySplit, "train split is empty");
  require(cfg.batch_size >= 1 &&
              cfg.batch_size <= static_cast<int>(train_set.embeddings.size()),
          Err::InvalidConfig, "batch_size must be in [1, train-set size]");

  SoftmaxHead head = init_head(static_cast<int>(m.classes.size()), cache.dim(), m.classes);
  SgdState state;
  TrainHistory history;
  Rng shuffle_rng(cfg.seed, 0);
  Rng dropout_rng(cfg.seed, 1);

  std::vector<std::size_t> order(train_set.embeddings.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::size_t pos = order.size();  // forces a shuffle before the first batch

  Eigen::VectorXf dropped;  // reused buffer when embedding dropout is on
  for (int step = 1; step <= cfg.steps; ++step) {
    if (pos >= order.size()) {
      shuffle_rng.shuffle(order);
      pos = 0;
    }
    std::size_t take = std::min(static_cast<std::size_t>(cfg.batch_size), order.size() - pos);
    Batch batch;
    std::vector<Eigen::VectorXf> batch_storage;
    batch_storage.reserve(cfg.dropout_rate > 0.0f ? take : 0);
    for (std::size_t i = 0; i < take; ++i, ++pos) {
      std::size_t idx = order[pos];
      const Eigen::VectorXf* e = train_set.embeddings[idx];
      if (cfg.dropout_rate > 0.0f) {
        dropped = *e;
        const float scale = 1.0f / (1.0f - cfg.dropout_rate);
        for (Eigen::Index j = 0; j < dropped.size(); ++j)
          dropped[j] = dropout_rng.uniform() < cfg.dropout_rate ? 0.0f : dropped[j] * scale;
        batch_storage.push_back(dropped);
        e = &batch_storage.back();
      }
      batch.samples.emplace_back(e, train_set.labels[idx]);
    }
    HeadGradient grad = head_gradient(head, batch);
    require(std::isfinite(grad.batch_loss), Err::NonFiniteLoss,
            "loss diverged at step " + std::to_string(step));
    sgd_step(head, grad, cfg, state);

    if (step % cfg.eval_every == 0 || step == cfg.steps) {
      EvalPoint p;
      p.step = step;
      auto [tl, ta] = score(head, train_set);
      p.train_loss = tl;
      p.train_accuracy = ta;
      require(std::isfinite(tl), Err::NonFiniteLoss,
              "loss diverged at step " + std::to_string(step));
      if (!val_set.embeddings.empty()) p.validation_accuracy = score(head, val_set).second;
      history.points.push_back(p);
    }
  }
  return {std::move(head), std::move(history)};
}

}  // namespace fdk
