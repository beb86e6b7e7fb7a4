#pragma once

// Dataset representation and on-disk formats.
//
// Vocabulary: plain text, one tag per line, line number = dense index.
// Examples:   JSON Lines, one object per line:
//               {"id": "...", "feature": [..numbers..], "tags": ["...", ...]}
// A dataset on disk is a vocabulary file plus one JSONL file per split.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "ria/numerics.hpp"

namespace ria {

struct Vocabulary {
  std::vector<std::string> tags;                     // index -> string
  std::unordered_map<std::string, std::size_t> index;  // string -> index

  std::size_t size() const { return tags.size(); }

  void add(const std::string& tag) {
    if (tag.empty()) throw std::invalid_argument("vocabulary: empty tag");
    if (tag == "<START>" || tag == "<STOP>")
      throw std::invalid_argument("vocabulary: reserved tag literal '" + tag + "'");
    if (index.count(tag)) throw std::invalid_argument("vocabulary: duplicate tag '" + tag + "'");
    index.emplace(tag, tags.size());
    tags.push_back(tag);
  }

  std::size_t lookup(const std::string& tag) const {
    auto it = index.find(tag);
    if (it == index.end()) throw std::invalid_argument("unknown tag '" + tag + "'");
    return it->second;
  }
};

struct Example {
  std::string id;
  Vector feature;
  std::vector<std::size_t> tags;  // sorted, unique, nonempty
};

struct Dataset {
  Vocabulary vocab;
  std::size_t feature_dim = 0;
  std::vector<Example> train;
  std::vector<Example> test;
};

struct SummaryStats {
  std::size_t vocab_size = 0;
  std::size_t image_count = 0;
  double mean_words_per_image = 0.0;
  std::size_t max_words_per_image = 0;
  double mean_images_per_word = 0.0;
  std::size_t max_images_per_word = 0;
};

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

// ---------------------------------------------------------------------------
// Atomic file output: write to a sibling temp file, then rename.

inline void write_text_atomic(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + tmp + "' for writing");
    out << content;
    if (!out) throw std::runtime_error("write failed for '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// Loading

inline Vocabulary load_vocabulary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open vocabulary file '" + path + "'");
  Vocabulary v;
  std::string line;
  while (std::getline(in, line)) {
    std::string tag = trim(line);
    if (!tag.empty()) v.add(tag);
  }
  if (v.size() == 0) throw std::runtime_error("vocabulary file '" + path + "' is empty");
  return v;
}

inline std::vector<Example> load_examples(const std::string& path, const Vocabulary& vocab,
                                          std::size_t& feature_dim) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open examples file '" + path + "'");
  std::vector<Example> out;
  std::set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    Example ex;
    ex.id = j.at("id").get<std::string>();
    if (!seen_ids.insert(ex.id).second)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": duplicate example id '" +
                               ex.id + "'");
    ex.feature = j.at("feature").get<Vector>();
    if (feature_dim == 0) feature_dim = ex.feature.size();
    if (ex.feature.size() != feature_dim)
      throw std::runtime_error("example '" + ex.id + "': feature length " +
                               std::to_string(ex.feature.size()) + ", expected " +
                               std::to_string(feature_dim));
    std::set<std::size_t> tagset;
    for (const auto& t : j.at("tags")) {
      std::string tag = trim(t.get<std::string>());
      auto it = vocab.index.find(tag);
      if (it == vocab.index.end())
        throw std::runtime_error(path + ":" + std::to_string(line_no) + " (example '" + ex.id +
                                 "'): tag '" + tag + "' not in vocabulary");
      tagset.insert(it->second);
    }
    if (tagset.empty())
      throw std::runtime_error("example '" + ex.id + "': empty tag set is not allowed");
    ex.tags.assign(tagset.begin(), tagset.end());
    out.push_back(std::move(ex));
  }
  return out;
}

inline Dataset load_dataset(const std::string& train_path, const std::string& test_path,
                            const std::string& vocab_path) {
  Dataset d;
  d.vocab = load_vocabulary(vocab_path);
  d.train = load_examples(train_path, d.vocab, d.feature_dim);
  if (!test_path.empty()) d.test = load_examples(test_path, d.vocab, d.feature_dim);
  return d;
}

// ---------------------------------------------------------------------------
// Writing

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string examples_to_jsonl(const std::vector<Example>& examples,
                                     const Vocabulary& vocab) {
  std::ostringstream out;
  for (const auto& ex : examples) {
    out << "{\"id\":" << nlohmann::json(ex.id).dump() << ",\"feature\":[";
    for (std::size_t i = 0; i < ex.feature.size(); ++i) {
      if (i) out << ',';
      out << format_double(ex.feature[i]);
    }
    out << "],\"tags\":[";
    for (std::size_t i = 0; i < ex.tags.size(); ++i) {
      if (i) out << ',';
      out << nlohmann::json(vocab.tags[ex.tags[i]]).dump();
    }
    out << "]}\n";
  }
  return out.str();
}

inline void write_dataset(const Dataset& d, const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::ostringstream vtext;
  for (const auto& t : d.vocab.tags) vtext << t << '\n';
  write_text_atomic(dir + "/vocab.txt", vtext.str());
  write_text_atomic(dir + "/train.jsonl", examples_to_jsonl(d.train, d.vocab));
  write_text_atomic(dir + "/test.jsonl", examples_to_jsonl(d.test, d.vocab));
}

// ---------------------------------------------------------------------------
// Summary statistics (computed over one split, typically train)

inline SummaryStats summarize(const std::vector<Example>& split, const Vocabulary& vocab) {
  SummaryStats s;
  s.vocab_size = vocab.size();
  s.image_count = split.size();
  std::vector<std::size_t> per_word(vocab.size(), 0);
  std::size_t total_words = 0;
  for (const auto& ex : split) {
    total_words += ex.tags.size();
    s.max_words_per_image = std::max(s.max_words_per_image, ex.tags.size());
    for (std::size_t t : ex.tags) ++per_word[t];
  }
  if (!split.empty())
    s.mean_words_per_image = static_cast<double>(total_words) / static_cast<double>(split.size());
  std::size_t used_words = 0, total_images_over_words = 0;
  for (std::size_t c : per_word) {
    if (c == 0) continue;
    ++used_words;
    total_images_over_words += c;
    s.max_images_per_word = std::max(s.max_images_per_word, c);
  }
  if (used_words > 0)
    s.mean_images_per_word =
        static_cast<double>(total_images_over_words) / static_cast<double>(used_words);
  return s;
}

// ---------------------------------------------------------------------------
// Synthetic generation
//
// Builds cluster centroids with seeded Gaussian coordinates; each cluster
// owns a band of tags; tag base weights follow a Zipf law over a seeded
// permutation of the vocabulary (so alphabetical order carries no frequency
// signal). Cluster popularity follows the same Zipf law, so a few clusters
// recur across most images while others are rare. Each example draws 1-3
// popularity-weighted clusters, a frequency-biased subset of their tags, and
// a feature equal to the mean chosen centroid plus noise.

struct SyntheticConfig {
  std::size_t cluster_count = 10;
  std::size_t vocab_size = 50;
  std::size_t feature_dim = 16;
  std::size_t tags_per_cluster = 5;
  std::size_t examples = 1000;
  double zipf_exponent = 1.0;
  double noise_sigma = 0.1;
  std::size_t tag_draw_cap = 3;  // max tags drawn from each chosen cluster
  std::uint64_t seed = 1;
};

inline Dataset generate_synthetic(const SyntheticConfig& cfg) {
  if (cfg.cluster_count == 0 || cfg.vocab_size == 0 || cfg.feature_dim == 0 ||
      cfg.tags_per_cluster == 0 || cfg.examples == 0 || cfg.tag_draw_cap == 0)
    throw std::invalid_argument("synthetic config: all counts must be positive");
  if (cfg.zipf_exponent < 0) throw std::invalid_argument("synthetic config: zipf_exponent < 0");
  if (cfg.vocab_size < cfg.cluster_count)
    throw std::invalid_argument("synthetic config: vocab_size must be >= cluster_count");

  Dataset d;
  d.feature_dim = cfg.feature_dim;
  int width = cfg.vocab_size > 1000 ? 5 : 3;
  for (std::size_t i = 0; i < cfg.vocab_size; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "tag%0*zu", width, i);
    d.vocab.add(buf);
  }

  SeededRng centroid_rng(derive_seed(cfg.seed, 0));
  SeededRng weight_rng(derive_seed(cfg.seed, 1));
  SeededRng sample_rng(derive_seed(cfg.seed, 2));

  std::vector<Vector> centroids(cfg.cluster_count);
  for (auto& c : centroids) {
    c.resize(cfg.feature_dim);
    for (double& x : c) x = centroid_rng.normal();
  }

  // Zipf weight of rank r is (r+1)^-s; ranks are assigned to tag indices
  // through a seeded permutation.
  std::vector<std::size_t> perm(cfg.vocab_size);
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  weight_rng.shuffle(perm);
  std::vector<double> weight(cfg.vocab_size);
  for (std::size_t r = 0; r < cfg.vocab_size; ++r)
    weight[perm[r]] = std::pow(static_cast<double>(r + 1), -cfg.zipf_exponent);

  // Cluster i owns tags_per_cluster consecutive indices (mod vocab_size).
  auto cluster_tags = [&](std::size_t i) {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < cfg.tags_per_cluster; ++j)
      out.push_back((i * cfg.tags_per_cluster + j) % cfg.vocab_size);
    return out;
  };

  // Cluster popularity follows the same Zipf law, again through a seeded
  // permutation so that popularity is uncorrelated with the tag bands.
  // Popular clusters act as a shared "background" across many images while
  // unpopular clusters contribute genuinely rare tags.
  std::vector<std::size_t> cperm(cfg.cluster_count);
  for (std::size_t i = 0; i < cperm.size(); ++i) cperm[i] = i;
  weight_rng.shuffle(cperm);
  std::vector<double> cluster_weight(cfg.cluster_count);
  for (std::size_t r = 0; r < cfg.cluster_count; ++r)
    cluster_weight[cperm[r]] = std::pow(static_cast<double>(r + 1), -cfg.zipf_exponent);

  auto weighted_pick = [&](std::vector<std::size_t>& pool, const std::vector<double>& w) {
    double total = 0.0;
    for (std::size_t t : pool) total += w[t];
    double u = sample_rng.uniform() * total;
    std::size_t pick = pool.size() - 1;
    double acc = 0.0;
    for (std::size_t pi = 0; pi < pool.size(); ++pi) {
      acc += w[pool[pi]];
      if (u < acc) {
        pick = pi;
        break;
      }
    }
    std::size_t chosen = pool[pick];
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
    return chosen;
  };

  for (std::size_t n = 0; n < cfg.examples; ++n) {
    Example ex;
    char buf[32];
    std::snprintf(buf, sizeof buf, "synth-%06zu", n);
    ex.id = buf;

    std::size_t n_clusters = 1 + sample_rng.index(std::min<std::size_t>(3, cfg.cluster_count));
    std::vector<std::size_t> cluster_pool(cfg.cluster_count);
    for (std::size_t i = 0; i < cluster_pool.size(); ++i) cluster_pool[i] = i;
    std::vector<std::size_t> chosen;
    for (std::size_t k = 0; k < n_clusters; ++k)
      chosen.push_back(weighted_pick(cluster_pool, cluster_weight));

    std::set<std::size_t> tagset;
    for (std::size_t ci : chosen) {
      auto owned = cluster_tags(ci);
      std::size_t take = 1 + sample_rng.index(std::min(cfg.tag_draw_cap, owned.size()));
      // weighted sampling without replacement by Zipf weight
      std::vector<std::size_t> pool = owned;
      for (std::size_t k = 0; k < take && !pool.empty(); ++k)
        tagset.insert(weighted_pick(pool, weight));
    }
    ex.tags.assign(tagset.begin(), tagset.end());

    ex.feature.assign(cfg.feature_dim, 0.0);
    for (std::size_t ci : chosen)
      for (std::size_t k = 0; k < cfg.feature_dim; ++k)
        ex.feature[k] += centroids[ci][k] / static_cast<double>(chosen.size());
    if (cfg.noise_sigma > 0)
      for (double& x : ex.feature) x += cfg.noise_sigma * sample_rng.normal();

    d.train.push_back(std::move(ex));
  }
  return d;
}

// ---------------------------------------------------------------------------
// Splitting

inline Dataset split_dataset(const Dataset& src, double train_fraction, std::uint64_t seed,
                             std::string* warning = nullptr) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument("train_fraction must be in (0, 1)");
  std::vector<Example> all = src.train;
  all.insert(all.end(), src.test.begin(), src.test.end());
  SeededRng rng(derive_seed(seed, 3));
  rng.shuffle(all);
  std::size_t n_train =
      static_cast<std::size_t>(train_fraction * static_cast<double>(all.size()));
  if (n_train == 0 || n_train == all.size())
    throw std::invalid_argument("split leaves an empty train or test set");
  Dataset out;
  out.vocab = src.vocab;
  out.feature_dim = src.feature_dim;
  out.train.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.test.assign(all.begin() + static_cast<std::ptrdiff_t>(n_train), all.end());

  std::vector<bool> covered(src.vocab.size(), false);
  for (const auto& ex : out.train)
    for (std::size_t t : ex.tags) covered[t] = true;
  std::size_t missing = 0;
  for (bool c : covered)
    if (!c) ++missing;
  if (missing > 0 && warning)
    *warning = std::to_string(missing) + " vocabulary tag(s) have no training example";
  return out;
}

}  // namespace ria
