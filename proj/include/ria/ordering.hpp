#pragma once

// Tag ordering strategies: every example's unordered tag set becomes a
// training sequence wrapped with START/STOP. Four strategies: dictionary,
// random, rare-first, frequent-first. Frequency ties break alphabetically.

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "ria/data.hpp"
#include "ria/numerics.hpp"

namespace ria {

enum class OrderStrategy { dictionary, random, rare_first, frequent_first };

inline std::string to_string(OrderStrategy s) {
  switch (s) {
    case OrderStrategy::dictionary: return "dictionary";
    case OrderStrategy::random: return "random";
    case OrderStrategy::rare_first: return "rare-first";
    case OrderStrategy::frequent_first: return "frequent-first";
  }
  return "?";
}

inline OrderStrategy order_strategy_from_string(const std::string& s) {
  if (s == "dictionary") return OrderStrategy::dictionary;
  if (s == "random") return OrderStrategy::random;
  if (s == "rare-first" || s == "rare_first") return OrderStrategy::rare_first;
  if (s == "frequent-first" || s == "frequent_first") return OrderStrategy::frequent_first;
  throw std::invalid_argument("unknown order strategy '" + s + "'");
}

struct FrequencyTable {
  std::vector<std::size_t> counts;  // indexed by tag, size = vocab size

  std::size_t count(std::size_t tag) const { return tag < counts.size() ? counts[tag] : 0; }
};

/// counts[tag] = number of training examples whose tag set contains the tag
inline FrequencyTable tag_frequencies(const std::vector<Example>& train,
                                      const Vocabulary& vocab) {
  if (train.empty()) throw std::invalid_argument("tag_frequencies: empty training split");
  FrequencyTable f;
  f.counts.assign(vocab.size(), 0);
  for (const auto& ex : train)
    for (std::size_t t : ex.tags) ++f.counts.at(t);
  return f;
}

// Teacher pair for one example. inputs = [START, y_1 .. y_{T-1}],
// targets = [y_1 .. y_{T-1}, STOP]. START and STOP both use index
// tag_count: START as the reserved embedding row, STOP as the extra
// classifier class.
struct OrderedSequence {
  std::vector<std::size_t> inputs;
  std::vector<std::size_t> targets;

  std::size_t length() const { return targets.size(); }
};

inline OrderedSequence make_sequence(const std::vector<std::size_t>& ordered_tags,
                                     std::size_t tag_count) {
  OrderedSequence seq;
  seq.inputs.push_back(tag_count);  // START
  seq.inputs.insert(seq.inputs.end(), ordered_tags.begin(), ordered_tags.end());
  seq.targets = ordered_tags;
  seq.targets.push_back(tag_count);  // STOP
  return seq;
}

inline void validate_sequence(const OrderedSequence& seq, std::size_t tag_count) {
  if (seq.targets.empty() || seq.inputs.size() != seq.targets.size())
    throw std::invalid_argument("malformed sequence: input/target lengths differ or empty");
  if (seq.inputs.front() != tag_count)
    throw std::invalid_argument("malformed sequence: first input is not START");
  if (seq.targets.back() != tag_count)
    throw std::invalid_argument("malformed sequence: last target is not STOP");
  std::vector<bool> seen(tag_count, false);
  for (std::size_t i = 0; i < seq.targets.size(); ++i) {
    std::size_t y = seq.targets[i];
    bool last = (i + 1 == seq.targets.size());
    if (!last) {
      if (y >= tag_count) throw std::invalid_argument("malformed sequence: STOP before the end");
      if (seen[y]) throw std::invalid_argument("malformed sequence: duplicate tag");
      seen[y] = true;
      if (seq.inputs[i + 1] != y)
        throw std::invalid_argument("malformed sequence: inputs are not targets shifted by one");
    }
  }
}

inline OrderedSequence order_tags(const std::vector<std::size_t>& tags, OrderStrategy strategy,
                                  const FrequencyTable& freq, const Vocabulary& vocab,
                                  SeededRng& rng) {
  if (tags.empty()) throw std::invalid_argument("order_tags: empty tag set");
  std::vector<std::size_t> ordered = tags;

  auto by_name = [&](std::size_t a, std::size_t b) { return vocab.tags[a] < vocab.tags[b]; };

  switch (strategy) {
    case OrderStrategy::dictionary:
      std::sort(ordered.begin(), ordered.end(), by_name);
      break;
    case OrderStrategy::random:
      std::sort(ordered.begin(), ordered.end(), by_name);  // canonical start state
      rng.shuffle(ordered);
      break;
    case OrderStrategy::rare_first:
      std::sort(ordered.begin(), ordered.end(), [&](std::size_t a, std::size_t b) {
        if (freq.count(a) != freq.count(b)) return freq.count(a) < freq.count(b);
        return vocab.tags[a] < vocab.tags[b];
      });
      break;
    case OrderStrategy::frequent_first:
      std::sort(ordered.begin(), ordered.end(), [&](std::size_t a, std::size_t b) {
        if (freq.count(a) != freq.count(b)) return freq.count(a) > freq.count(b);
        return vocab.tags[a] < vocab.tags[b];
      });
      break;
  }
  return make_sequence(ordered, vocab.size());
}

}  // namespace ria
