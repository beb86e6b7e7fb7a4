#pragma once

// Greedy decoding. Starting from the projected image feature and the
// START symbol, each step takes the argmax over not-yet-emitted tags
// (plus STOP in arbitrary mode) and feeds the emitted tag back as the
// next input. Already-emitted tags are masked so an annotation is a set.

#include <limits>
#include <map>
#include <string>
#include <vector>

#include "ria/model.hpp"

namespace ria {

enum class DecodeMode { arbitrary, fixed_k };

struct DecodePolicy {
  DecodeMode mode = DecodeMode::arbitrary;
  std::size_t k = 5;         // fixed_k only
  std::size_t max_len = 20;  // arbitrary-mode safety cap
};

struct Annotation {
  std::vector<std::size_t> tags;  // emission order, no STOP, no duplicates
  bool hit_cap = false;           // arbitrary mode reached max_len without STOP
};

inline Annotation decode(const Parameters& p, const ModelConfig& cfg, const Vector& feature,
                         const DecodePolicy& policy) {
  if (policy.max_len == 0 || policy.k == 0)
    throw std::invalid_argument("decode policy: k and max_len must be >= 1");
  if (policy.mode == DecodeMode::fixed_k && policy.k > cfg.tag_count)
    throw std::invalid_argument("decode: k = " + std::to_string(policy.k) +
                                " exceeds tag_count = " + std::to_string(cfg.tag_count));

  const double neg_inf = -std::numeric_limits<double>::infinity();
  const std::size_t limit =
      policy.mode == DecodeMode::fixed_k ? policy.k : std::min(policy.max_len, cfg.tag_count);

  Annotation out;
  std::vector<bool> emitted(cfg.tag_count, false);
  Vector h = project_image(p, feature);
  Vector c(cfg.hidden_dim, 0.0);
  std::size_t input = cfg.start_index();
  StepCache cache;

  while (true) {
    Vector x = embed_tag(p, cfg, input);
    lstm_step(p, h, c, x, cache);
    h = cache.h;
    c = cache.c;
    Vector s = score_tags(p, h, {});
    for (std::size_t t = 0; t < cfg.tag_count; ++t)
      if (emitted[t]) s[t] = neg_inf;
    if (policy.mode == DecodeMode::fixed_k) s[cfg.stop_index()] = neg_inf;

    std::size_t pick = argmax(s);
    if (pick == cfg.stop_index()) break;
    out.tags.push_back(pick);
    emitted[pick] = true;
    if (out.tags.size() >= limit) {
      out.hit_cap = policy.mode == DecodeMode::arbitrary && out.tags.size() >= policy.max_len;
      break;
    }
    input = pick;
  }
  return out;
}

/// Decodes every example independently; deterministic.
inline std::map<std::string, Annotation> annotate_dataset(const Parameters& p,
                                                          const ModelConfig& cfg,
                                                          const std::vector<Example>& examples,
                                                          const DecodePolicy& policy) {
  std::map<std::string, Annotation> out;
  for (const auto& ex : examples) {
    try {
      out[ex.id] = decode(p, cfg, ex.feature, policy);
    } catch (const std::exception& e) {
      throw std::runtime_error("example '" + ex.id + "': " + e.what());
    }
  }
  return out;
}

}  // namespace ria
