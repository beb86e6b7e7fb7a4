#pragma once

// Optimization loop: per-example BPTT, per-batch gradient averaging,
// global-norm clipping, Adam updates, and JSON checkpoints. All
// randomness derives from one master seed via fixed stream ids, so the
// same seed reproduces the same loss history byte for byte.

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ria/data.hpp"
#include "ria/eval.hpp"
#include "ria/inference.hpp"
#include "ria/model.hpp"
#include "ria/ordering.hpp"

namespace ria {

struct OptimizerConfig {
  double learning_rate = 0.0001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 0.1;  // unusually large, kept as the documented default
  double clip_norm = 5.0;
  std::size_t batch_size = 32;
  std::size_t epochs = 0;
  double dropout_rate = 0.5;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(learning_rate > 0)) throw std::invalid_argument("learning_rate must be > 0");
    if (!(beta1 > 0 && beta1 < 1) || !(beta2 > 0 && beta2 < 1))
      throw std::invalid_argument("beta1/beta2 must be in (0, 1)");
    if (!(epsilon > 0)) throw std::invalid_argument("epsilon must be > 0");
    if (!(clip_norm > 0)) throw std::invalid_argument("clip_norm must be > 0");
    if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
    if (!(dropout_rate >= 0 && dropout_rate < 1))
      throw std::invalid_argument("dropout_rate must be in [0, 1)");
  }
};

struct AdamState {
  Parameters m, v;  // moment arrays mirroring Parameters
  std::size_t step_count = 0;
};

inline AdamState make_adam_state(const ModelConfig& cfg) {
  return AdamState{zero_parameters(cfg), zero_parameters(cfg), 0};
}

inline double global_norm(Gradients& grads) {
  double sq = 0.0;
  for (auto& view : param_views(grads))
    for (double g : *view.data) sq += g * g;
  return std::sqrt(sq);
}

/// Scales all arrays by clip_norm/norm when the global L2 norm exceeds it.
inline void clip_gradients(Gradients& grads, double clip_norm) {
  if (!(clip_norm > 0)) throw std::invalid_argument("clip_norm must be > 0");
  double norm = global_norm(grads);
  if (norm <= clip_norm) return;
  double scale = clip_norm / norm;
  for (auto& view : param_views(grads))
    for (double& g : *view.data) g *= scale;
}

inline void adam_update(Parameters& params, const Gradients& grads, AdamState& state,
                        const OptimizerConfig& cfg) {
  cfg.validate();
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);

  auto pv = param_views(params);
  auto gv = param_views(grads);
  auto mv = param_views(state.m);
  auto vv = param_views(state.v);
  for (std::size_t a = 0; a < pv.size(); ++a) {
    std::vector<double>& p = *pv[a].data;
    const std::vector<double>& g = *gv[a].data;
    std::vector<double>& m = *mv[a].data;
    std::vector<double>& v = *vv[a].data;
    if (p.size() != g.size()) throw std::invalid_argument("adam_update: shape mismatch");
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
      double mhat = m[k] / bc1;
      double vhat = v[k] / bc2;
      p[k] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
  }
}

struct EpochRecord {
  std::size_t epoch = 0;     // 1-based
  double mean_loss = 0.0;    // mean per-sequence loss over the train split
  std::optional<Metrics> eval;  // present when this epoch was evaluated
};

struct TrainHistory {
  std::vector<EpochRecord> records;

  std::string to_csv() const {
    std::ostringstream out;
    out << "epoch,loss,precision,recall,f_measure,n_plus\n";
    for (const auto& r : records) {
      out << r.epoch << ',' << r.mean_loss << ',';
      if (r.eval)
        out << r.eval->mean_precision << ',' << r.eval->mean_recall << ','
            << r.eval->f_measure << ',' << r.eval->n_plus;
      else
        out << ",,,";
      out << '\n';
    }
    return out.str();
  }
};

struct TrainOptions {
  std::size_t eval_every = 0;  // 0 = never; otherwise evaluate the test split every k epochs
  DecodePolicy eval_policy;
  bool resample_random_order_each_epoch = false;
  bool log_epochs = false;  // per-epoch line on stderr
};

struct TrainResult {
  Parameters params;
  TrainHistory history;
};

// Stream ids for seed derivation; changing one consumer's draw count
// must not shift the others.
namespace seed_stream {
constexpr std::uint64_t init = 10;
constexpr std::uint64_t shuffle = 11;
constexpr std::uint64_t order = 12;
constexpr std::uint64_t dropout = 13;
}  // namespace seed_stream

inline TrainResult train(const Dataset& data, const ModelConfig& model_cfg,
                         const OptimizerConfig& opt, OrderStrategy strategy,
                         const TrainOptions& options = {}) {
  model_cfg.validate();
  opt.validate();
  if (data.train.empty()) throw std::invalid_argument("train: empty training split");
  if (model_cfg.tag_count != data.vocab.size())
    throw std::invalid_argument("train: model tag_count does not match vocabulary size");

  SeededRng init_rng(derive_seed(opt.seed, seed_stream::init));
  SeededRng shuffle_rng(derive_seed(opt.seed, seed_stream::shuffle));
  SeededRng order_rng(derive_seed(opt.seed, seed_stream::order));
  SeededRng dropout_rng(derive_seed(opt.seed, seed_stream::dropout));

  TrainResult result;
  result.params = init_parameters(model_cfg, init_rng);
  AdamState state = make_adam_state(model_cfg);
  FrequencyTable freq = tag_frequencies(data.train, data.vocab);

  auto order_all = [&]() {
    std::vector<OrderedSequence> seqs;
    seqs.reserve(data.train.size());
    for (const auto& ex : data.train)
      seqs.push_back(order_tags(ex.tags, strategy, freq, data.vocab, order_rng));
    return seqs;
  };
  std::vector<OrderedSequence> sequences = order_all();

  std::map<std::string, std::set<std::size_t>> test_gt;
  if (options.eval_every > 0)
    for (const auto& ex : data.test)
      test_gt[ex.id] = std::set<std::size_t>(ex.tags.begin(), ex.tags.end());

  std::vector<std::size_t> order(data.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= opt.epochs; ++epoch) {
    if (options.resample_random_order_each_epoch && strategy == OrderStrategy::random)
      sequences = order_all();
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += opt.batch_size) {
      std::size_t end = std::min(order.size(), start + opt.batch_size);
      Gradients batch_grads = zero_parameters(model_cfg);
      for (std::size_t bi = start; bi < end; ++bi) {
        const Example& ex = data.train[order[bi]];
        const OrderedSequence& seq = sequences[order[bi]];
        ForwardResult fwd = sequence_forward(result.params, model_cfg, ex.feature, seq,
                                             opt.dropout_rate,
                                             opt.dropout_rate > 0 ? &dropout_rng : nullptr);
        if (!std::isfinite(fwd.loss))
          throw std::runtime_error("non-finite loss at epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(start / opt.batch_size) +
                                   ", example '" + ex.id + "' (divergence)");
        epoch_loss += fwd.loss;
        Gradients g = sequence_backward(result.params, model_cfg, ex.feature, seq, fwd);
        auto bv = param_views(batch_grads);
        auto gv = param_views(g);
        for (std::size_t a = 0; a < bv.size(); ++a) {
          std::vector<double>& acc = *bv[a].data;
          const std::vector<double>& src = *gv[a].data;
          for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += src[k];
        }
      }
      double inv = 1.0 / static_cast<double>(end - start);
      for (auto& view : param_views(batch_grads))
        for (double& g : *view.data) g *= inv;
      clip_gradients(batch_grads, opt.clip_norm);
      adam_update(result.params, batch_grads, state, opt);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_loss = epoch_loss / static_cast<double>(data.train.size());
    if (options.eval_every > 0 && !data.test.empty() &&
        (epoch % options.eval_every == 0 || epoch == opt.epochs)) {
      auto annotations = annotate_dataset(result.params, model_cfg, data.test,
                                          options.eval_policy);
      TagSets preds;
      for (const auto& [id, ann] : annotations)
        preds[id] = std::set<std::size_t>(ann.tags.begin(), ann.tags.end());
      rec.eval = evaluate(preds, test_gt, model_cfg.tag_count);
    }
    if (options.log_epochs) {
      std::ostringstream line;
      line << "epoch " << epoch << "  loss " << rec.mean_loss;
      if (rec.eval)
        line << "  P " << rec.eval->mean_precision << "  R " << rec.eval->mean_recall
             << "  N+ " << rec.eval->n_plus;
      std::fputs((line.str() + "\n").c_str(), stderr);
    }
    result.history.records.push_back(std::move(rec));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoints: versioned JSON with config, vocabulary and every parameter
// array (shape + flat values, 17 significant digits).

constexpr int kCheckpointVersion = 1;

inline void save_checkpoint(const Parameters& params, const ModelConfig& cfg,
                            const Vocabulary& vocab, const std::string& path) {
  nlohmann::json j;
  j["format_version"] = kCheckpointVersion;
  j["config"] = {{"feature_dim", cfg.feature_dim},
                 {"embed_dim", cfg.embed_dim},
                 {"hidden_dim", cfg.hidden_dim},
                 {"tag_count", cfg.tag_count}};
  j["vocab"] = vocab.tags;

  auto views = param_views(params);
  // shapes mirror zero_parameters; record them explicitly for validation
  const std::size_t F = cfg.feature_dim, D = cfg.embed_dim, H = cfg.hidden_dim;
  const std::size_t V = cfg.tag_count + 1;
  std::vector<std::pair<std::size_t, std::size_t>> shapes = {
      {cfg.tag_count + 1, D}, {H, F}, {H, 1},     {H, H + D}, {H, 1}, {H, H + D}, {H, 1},
      {H, H + D},             {H, 1}, {H, H + D}, {H, 1},     {V, H}, {V, 1}};
  nlohmann::json arrays = nlohmann::json::object();
  for (std::size_t a = 0; a < views.size(); ++a) {
    arrays[views[a].name] = {{"shape", {shapes[a].first, shapes[a].second}},
                             {"data", *views[a].data}};
  }
  j["params"] = std::move(arrays);
  write_text_atomic(path, j.dump());
}

struct Checkpoint {
  Parameters params;
  ModelConfig config;
  Vocabulary vocab;
};

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error("checkpoint '" + path + "' is truncated or invalid: " + e.what());
  }
  if (!j.contains("format_version") || j["format_version"].get<int>() != kCheckpointVersion)
    throw std::runtime_error("checkpoint '" + path + "': unsupported format version");

  Checkpoint ck;
  const auto& c = j.at("config");
  ck.config.feature_dim = c.at("feature_dim").get<std::size_t>();
  ck.config.embed_dim = c.at("embed_dim").get<std::size_t>();
  ck.config.hidden_dim = c.at("hidden_dim").get<std::size_t>();
  ck.config.tag_count = c.at("tag_count").get<std::size_t>();
  ck.config.validate();
  for (const auto& tag : j.at("vocab")) ck.vocab.add(tag.get<std::string>());
  if (ck.vocab.size() != ck.config.tag_count)
    throw std::runtime_error("checkpoint '" + path + "': vocabulary size " +
                             std::to_string(ck.vocab.size()) + " != tag_count " +
                             std::to_string(ck.config.tag_count));

  ck.params = zero_parameters(ck.config);
  auto views = param_views(ck.params);
  const auto& arrays = j.at("params");
  for (auto& view : views) {
    if (!arrays.contains(view.name))
      throw std::runtime_error("checkpoint '" + path + "': missing array '" + view.name + "'");
    const auto& entry = arrays.at(view.name);
    auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    std::size_t expected = shape.size() == 2 ? shape[0] * shape[1] : 0;
    auto values = entry.at("data").get<std::vector<double>>();
    if (expected != view.data->size() || values.size() != view.data->size())
      throw std::runtime_error("checkpoint '" + path + "': shape mismatch for '" + view.name +
                               "' (" + std::to_string(values.size()) + " values, expected " +
                               std::to_string(view.data->size()) + ")");
    *view.data = std::move(values);
  }
  return ck;
}

}  // namespace ria
