#pragma once

// The annotator network: tag embedding lookup, linear image projection
// (producing the initial hidden state), a single LSTM layer whose gates
// act on the concatenation [h_prev; x], and a linear tag classifier over
// tag_count real tags plus STOP. Loss is summed softmax cross-entropy
// over the sequence. Backward is exact reverse-mode BPTT.

#include <cmath>
#include <string>
#include <vector>

#include "ria/numerics.hpp"
#include "ria/ordering.hpp"

namespace ria {

struct ModelConfig {
  std::size_t feature_dim = 0;  // F, dimension of precomputed image features
  std::size_t embed_dim = 0;    // D
  std::size_t hidden_dim = 0;   // H
  std::size_t tag_count = 0;    // real tags; classifier emits tag_count + 1 classes

  std::size_t output_dim() const { return tag_count + 1; }  // V
  std::size_t stop_index() const { return tag_count; }      // classifier class
  std::size_t start_index() const { return tag_count; }     // embedding row

  void validate() const {
    if (feature_dim == 0 || embed_dim == 0 || hidden_dim == 0 || tag_count == 0)
      throw std::invalid_argument("model config: all dimensions must be positive");
  }
};

// Trainable arrays. The gate weight layout is [h_prev; x] columns, h_prev
// first; checkpoints depend on this order.
struct Parameters {
  Matrix embed;             // (tag_count + 1) x D, last row is START
  Matrix proj_W;            // H x F
  Vector proj_b;            // H
  Matrix W_forget, W_input, W_output, W_cell;  // H x (H + D)
  Vector b_forget, b_input, b_output, b_cell;  // H
  Matrix cls_W;             // V x H
  Vector cls_b;             // V
};

// Gradients mirror Parameters entry for entry.
using Gradients = Parameters;

struct ParamView {
  const char* name;
  std::vector<double>* data;
};

inline std::vector<ParamView> param_views(Parameters& p) {
  return {
      {"embed", &p.embed.data},       {"proj_W", &p.proj_W.data},
      {"proj_b", &p.proj_b},          {"W_forget", &p.W_forget.data},
      {"b_forget", &p.b_forget},      {"W_input", &p.W_input.data},
      {"b_input", &p.b_input},        {"W_output", &p.W_output.data},
      {"b_output", &p.b_output},      {"W_cell", &p.W_cell.data},
      {"b_cell", &p.b_cell},          {"cls_W", &p.cls_W.data},
      {"cls_b", &p.cls_b},
  };
}

struct ConstParamView {
  const char* name;
  const std::vector<double>* data;
};

inline std::vector<ConstParamView> param_views(const Parameters& p) {
  std::vector<ConstParamView> out;
  for (const auto& v : param_views(const_cast<Parameters&>(p))) out.push_back({v.name, v.data});
  return out;
}

inline Parameters zero_parameters(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t F = cfg.feature_dim, D = cfg.embed_dim, H = cfg.hidden_dim;
  const std::size_t V = cfg.output_dim();
  Parameters p;
  p.embed = Matrix(cfg.tag_count + 1, D);
  p.proj_W = Matrix(H, F);
  p.proj_b = Vector(H, 0.0);
  p.W_forget = p.W_input = p.W_output = p.W_cell = Matrix(H, H + D);
  p.b_forget = p.b_input = p.b_output = p.b_cell = Vector(H, 0.0);
  p.cls_W = Matrix(V, H);
  p.cls_b = Vector(V, 0.0);
  return p;
}

// Glorot-uniform weights, zero biases except forget bias at 1, embedding
// rows uniform in [-0.08, 0.08].
inline Parameters init_parameters(const ModelConfig& cfg, SeededRng& rng) {
  Parameters p = zero_parameters(cfg);
  auto glorot = [&](Matrix& m) {
    double a = std::sqrt(6.0 / static_cast<double>(m.rows + m.cols));
    for (double& x : m.data) x = rng.uniform(-a, a);
  };
  for (double& x : p.embed.data) x = rng.uniform(-0.08, 0.08);
  glorot(p.proj_W);
  glorot(p.W_forget);
  glorot(p.W_input);
  glorot(p.W_output);
  glorot(p.W_cell);
  glorot(p.cls_W);
  p.b_forget.assign(p.b_forget.size(), 1.0);
  return p;
}

/// Row lookup in the embedding table; index tag_count is START.
inline Vector embed_tag(const Parameters& p, const ModelConfig& cfg, std::size_t index) {
  if (index > cfg.tag_count)
    throw std::invalid_argument("embed_tag: index " + std::to_string(index) +
                                " out of range (tag_count = " + std::to_string(cfg.tag_count) +
                                "); corrupted sequence?");
  return Vector(p.embed.row(index), p.embed.row(index) + p.embed.cols);
}

/// h_0 = proj_W * feature + proj_b
inline Vector project_image(const Parameters& p, const Vector& feature) {
  if (feature.size() != p.proj_W.cols)
    throw std::invalid_argument("project_image: feature length " +
                                std::to_string(feature.size()) + ", expected " +
                                std::to_string(p.proj_W.cols));
  return affine(p.proj_W, feature, p.proj_b);
}

struct StepCache {
  std::size_t input_index = 0;  // embedding row that produced x
  Vector x, h_prev, c_prev;
  Vector f, i, o, g, c, h;
  Vector h_dropped;      // classifier input after the dropout mask
  Vector dropout_mask;   // empty when dropout is off
  Vector scores, probs;
};

/// One LSTM step; gate input is the concatenation [h_prev; x].
inline void lstm_step(const Parameters& p, const Vector& h_prev, const Vector& c_prev,
                      const Vector& x, StepCache& cache) {
  const std::size_t H = h_prev.size();
  if (c_prev.size() != H) throw std::invalid_argument("lstm_step: h_prev/c_prev size mismatch");
  Vector z;
  z.reserve(H + x.size());
  z.insert(z.end(), h_prev.begin(), h_prev.end());
  z.insert(z.end(), x.begin(), x.end());

  cache.x = x;
  cache.h_prev = h_prev;
  cache.c_prev = c_prev;
  cache.f = sigmoid(affine(p.W_forget, z, p.b_forget));
  cache.i = sigmoid(affine(p.W_input, z, p.b_input));
  cache.o = sigmoid(affine(p.W_output, z, p.b_output));
  cache.g = tanh(affine(p.W_cell, z, p.b_cell));
  cache.c.resize(H);
  cache.h.resize(H);
  for (std::size_t k = 0; k < H; ++k) {
    cache.c[k] = cache.f[k] * c_prev[k] + cache.i[k] * cache.g[k];
    cache.h[k] = cache.o[k] * std::tanh(cache.c[k]);
  }
}

/// Scores over tags + STOP. A dropout mask (entries 0 or 1/(1-p)) is
/// applied to h before the classifier in training; pass empty for inference.
inline Vector score_tags(const Parameters& p, const Vector& h, const Vector& dropout_mask) {
  if (dropout_mask.empty()) return affine(p.cls_W, h, p.cls_b);
  if (dropout_mask.size() != h.size())
    throw std::invalid_argument("score_tags: mask/hidden size mismatch");
  Vector hd(h.size());
  for (std::size_t k = 0; k < h.size(); ++k) hd[k] = h[k] * dropout_mask[k];
  return affine(p.cls_W, hd, p.cls_b);
}

struct ForwardResult {
  double loss = 0.0;
  Vector h0;
  std::vector<StepCache> caches;
};

/// Teacher-forced forward pass over one sequence. dropout_rng == nullptr
/// disables dropout; otherwise a fresh mask is drawn per time step.
inline ForwardResult sequence_forward(const Parameters& p, const ModelConfig& cfg,
                                      const Vector& feature, const OrderedSequence& seq,
                                      double dropout_rate = 0.0,
                                      SeededRng* dropout_rng = nullptr) {
  validate_sequence(seq, cfg.tag_count);
  const std::size_t H = cfg.hidden_dim;
  const bool use_dropout = dropout_rng != nullptr && dropout_rate > 0.0;
  const double keep = 1.0 - dropout_rate;

  ForwardResult fwd;
  fwd.h0 = project_image(p, feature);
  Vector h = fwd.h0;
  Vector c(H, 0.0);  // c_0 = 0
  fwd.caches.resize(seq.length());

  for (std::size_t t = 0; t < seq.length(); ++t) {
    StepCache& cache = fwd.caches[t];
    cache.input_index = seq.inputs[t];
    Vector x = embed_tag(p, cfg, seq.inputs[t]);
    lstm_step(p, h, c, x, cache);
    h = cache.h;
    c = cache.c;

    if (use_dropout) {
      cache.dropout_mask.resize(H);
      for (double& m : cache.dropout_mask)
        m = dropout_rng->uniform() < dropout_rate ? 0.0 : 1.0 / keep;
      cache.h_dropped.resize(H);
      for (std::size_t k = 0; k < H; ++k) cache.h_dropped[k] = h[k] * cache.dropout_mask[k];
    } else {
      cache.h_dropped = h;
    }
    cache.scores = affine(p.cls_W, cache.h_dropped, p.cls_b);
    cache.probs = softmax(cache.scores);
    double py = cache.probs[seq.targets[t]];
    fwd.loss += -std::log(std::max(py, 1e-300));
  }
  return fwd;
}

namespace detail {
inline void add_outer(Matrix& acc, const Vector& u, const Vector& v) {
  for (std::size_t i = 0; i < u.size(); ++i) {
    double ui = u[i];
    if (ui == 0.0) continue;
    double* row = acc.row(i);
    for (std::size_t j = 0; j < v.size(); ++j) row[j] += ui * v[j];
  }
}

inline void add_transpose_mul(Vector& acc, const Matrix& w, const Vector& u) {
  // acc += W^T u
  for (std::size_t i = 0; i < w.rows; ++i) {
    double ui = u[i];
    if (ui == 0.0) continue;
    const double* row = w.row(i);
    for (std::size_t j = 0; j < w.cols; ++j) acc[j] += ui * row[j];
  }
}
}  // namespace detail

/// Exact BPTT through the caches of a matching sequence_forward call.
inline Gradients sequence_backward(const Parameters& p, const ModelConfig& cfg,
                                   const Vector& feature, const OrderedSequence& seq,
                                   const ForwardResult& fwd) {
  validate_sequence(seq, cfg.tag_count);
  if (fwd.caches.size() != seq.length())
    throw std::invalid_argument("sequence_backward: cache/target length mismatch");
  const std::size_t H = cfg.hidden_dim, D = cfg.embed_dim;

  Gradients grads = zero_parameters(cfg);
  Vector dh(H, 0.0), dc(H, 0.0);

  for (std::size_t ti = seq.length(); ti-- > 0;) {
    const StepCache& cache = fwd.caches[ti];

    // classifier: dL/ds = p - onehot(y)
    Vector ds = cache.probs;
    ds[seq.targets[ti]] -= 1.0;
    detail::add_outer(grads.cls_W, ds, cache.h_dropped);
    for (std::size_t j = 0; j < ds.size(); ++j) grads.cls_b[j] += ds[j];
    Vector dh_cls(H, 0.0);
    detail::add_transpose_mul(dh_cls, p.cls_W, ds);
    if (!cache.dropout_mask.empty())
      for (std::size_t k = 0; k < H; ++k) dh_cls[k] *= cache.dropout_mask[k];
    for (std::size_t k = 0; k < H; ++k) dh[k] += dh_cls[k];

    // LSTM cell
    Vector d_pre_f(H), d_pre_i(H), d_pre_o(H), d_pre_g(H);
    for (std::size_t k = 0; k < H; ++k) {
      double tc = std::tanh(cache.c[k]);
      double dck = dc[k] + dh[k] * cache.o[k] * (1.0 - tc * tc);
      d_pre_o[k] = dh[k] * tc * cache.o[k] * (1.0 - cache.o[k]);
      d_pre_f[k] = dck * cache.c_prev[k] * cache.f[k] * (1.0 - cache.f[k]);
      d_pre_i[k] = dck * cache.g[k] * cache.i[k] * (1.0 - cache.i[k]);
      d_pre_g[k] = dck * cache.i[k] * (1.0 - cache.g[k] * cache.g[k]);
      dc[k] = dck * cache.f[k];  // becomes dc_prev
    }

    Vector z;
    z.reserve(H + D);
    z.insert(z.end(), cache.h_prev.begin(), cache.h_prev.end());
    z.insert(z.end(), cache.x.begin(), cache.x.end());
    detail::add_outer(grads.W_forget, d_pre_f, z);
    detail::add_outer(grads.W_input, d_pre_i, z);
    detail::add_outer(grads.W_output, d_pre_o, z);
    detail::add_outer(grads.W_cell, d_pre_g, z);
    for (std::size_t k = 0; k < H; ++k) {
      grads.b_forget[k] += d_pre_f[k];
      grads.b_input[k] += d_pre_i[k];
      grads.b_output[k] += d_pre_o[k];
      grads.b_cell[k] += d_pre_g[k];
    }

    Vector dz(H + D, 0.0);
    detail::add_transpose_mul(dz, p.W_forget, d_pre_f);
    detail::add_transpose_mul(dz, p.W_input, d_pre_i);
    detail::add_transpose_mul(dz, p.W_output, d_pre_o);
    detail::add_transpose_mul(dz, p.W_cell, d_pre_g);

    for (std::size_t k = 0; k < H; ++k) dh[k] = dz[k];  // dh_prev
    double* embed_row = grads.embed.row(cache.input_index);
    for (std::size_t k = 0; k < D; ++k) embed_row[k] += dz[H + k];
  }

  // dh now holds dL/dh_0
  detail::add_outer(grads.proj_W, dh, feature);
  for (std::size_t k = 0; k < H; ++k) grads.proj_b[k] += dh[k];
  return grads;
}

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_array;
  std::size_t checked_coords = 0;
};

/// Central-difference check of the analytic gradient, dropout disabled.
/// Arrays larger than `max_coords_per_array` are subsampled (seeded).
/// Pass `analytic` to check externally supplied gradients instead of the
/// ones computed here.
inline GradCheckReport check_gradients(Parameters params, const ModelConfig& cfg,
                                       const Vector& feature, const OrderedSequence& seq,
                                       double eps, SeededRng& rng,
                                       const Gradients* analytic = nullptr,
                                       std::size_t max_coords_per_array = 500) {
  if (!(eps > 0.0)) throw std::invalid_argument("check_gradients: eps must be positive");

  Gradients grads;
  if (analytic != nullptr) {
    grads = *analytic;
  } else {
    ForwardResult fwd = sequence_forward(params, cfg, feature, seq);
    grads = sequence_backward(params, cfg, feature, seq, fwd);
  }

  auto views = param_views(params);
  auto grad_views = param_views(grads);

  GradCheckReport report;
  for (std::size_t a = 0; a < views.size(); ++a) {
    std::vector<double>& arr = *views[a].data;
    std::vector<double>& garr = *grad_views[a].data;
    std::vector<std::size_t> coords;
    if (arr.size() <= max_coords_per_array) {
      coords.resize(arr.size());
      for (std::size_t k = 0; k < arr.size(); ++k) coords[k] = k;
    } else {
      for (std::size_t k = 0; k < max_coords_per_array; ++k) coords.push_back(rng.index(arr.size()));
    }
    for (std::size_t k : coords) {
      double saved = arr[k];
      arr[k] = saved + eps;
      double lp = sequence_forward(params, cfg, feature, seq).loss;
      arr[k] = saved - eps;
      double lm = sequence_forward(params, cfg, feature, seq).loss;
      arr[k] = saved;
      double numeric = (lp - lm) / (2.0 * eps);
      double denom = std::max({std::fabs(garr[k]), std::fabs(numeric), 1e-8});
      double rel = std::fabs(garr[k] - numeric) / denom;
      ++report.checked_coords;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_array = views[a].name;
      }
    }
  }
  return report;
}

}  // namespace ria
