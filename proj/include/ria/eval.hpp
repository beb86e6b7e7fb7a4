#pragma once

// Per-class (macro) annotation metrics: precision, recall, F-measure and
// N+ (classes with non-zero recall). Classes absent from the ground truth
// are excluded from the averages; a class that is never predicted gets
// precision 0 and stays in the average.

#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ria/data.hpp"

namespace ria {

struct Metrics {
  std::vector<double> per_class_precision;  // size tag_count; 0 for excluded classes
  std::vector<double> per_class_recall;
  std::vector<std::size_t> support;            // ground-truth image count per class
  std::vector<std::size_t> prediction_counts;  // predicted image count per class
  double mean_precision = 0.0;
  double mean_recall = 0.0;
  double f_measure = 0.0;
  std::size_t n_plus = 0;
  std::size_t excluded_classes = 0;  // classes with no ground-truth occurrences
};

using TagSets = std::map<std::string, std::set<std::size_t>>;

inline Metrics evaluate(const TagSets& predictions, const TagSets& ground_truth,
                        std::size_t tag_count) {
  if (ground_truth.empty()) throw std::invalid_argument("evaluate: empty ground truth");
  for (const auto& [id, _] : predictions)
    if (!ground_truth.count(id))
      throw std::invalid_argument("evaluate: prediction id '" + id + "' not in ground truth");

  Metrics m;
  m.per_class_precision.assign(tag_count, 0.0);
  m.per_class_recall.assign(tag_count, 0.0);
  m.support.assign(tag_count, 0);
  m.prediction_counts.assign(tag_count, 0);
  std::vector<std::size_t> correct(tag_count, 0);

  for (const auto& [id, gt_tags] : ground_truth) {
    for (std::size_t t : gt_tags) {
      if (t >= tag_count) throw std::invalid_argument("evaluate: tag index out of range");
      ++m.support[t];
    }
    auto pit = predictions.find(id);
    if (pit == predictions.end()) continue;
    for (std::size_t t : pit->second) {
      if (t >= tag_count) throw std::invalid_argument("evaluate: tag index out of range");
      ++m.prediction_counts[t];
      if (gt_tags.count(t)) ++correct[t];
    }
  }

  std::size_t included = 0;
  double sum_p = 0.0, sum_r = 0.0;
  for (std::size_t c = 0; c < tag_count; ++c) {
    if (m.support[c] == 0) {
      ++m.excluded_classes;
      continue;
    }
    ++included;
    double prec = m.prediction_counts[c] == 0
                      ? 0.0
                      : static_cast<double>(correct[c]) / static_cast<double>(m.prediction_counts[c]);
    double rec = static_cast<double>(correct[c]) / static_cast<double>(m.support[c]);
    m.per_class_precision[c] = prec;
    m.per_class_recall[c] = rec;
    sum_p += prec;
    sum_r += rec;
    if (rec > 0.0) ++m.n_plus;
  }
  if (included > 0) {
    m.mean_precision = sum_p / static_cast<double>(included);
    m.mean_recall = sum_r / static_cast<double>(included);
  }
  if (m.mean_precision + m.mean_recall > 0.0)
    m.f_measure = 2.0 * m.mean_precision * m.mean_recall / (m.mean_precision + m.mean_recall);
  return m;
}

inline int as_percent(double ratio) { return static_cast<int>(ratio * 100.0 + 0.5); }

/// Aligned text table of P/R/F/N+ per strategy, Table-II style.
inline std::string compare_orders_table(
    const std::vector<std::pair<std::string, Metrics>>& rows) {
  if (rows.size() < 2) throw std::invalid_argument("compare_orders: need at least 2 entries");
  std::ostringstream out;
  out << std::left << std::setw(18) << "order" << std::right << std::setw(8) << "P"
      << std::setw(8) << "R" << std::setw(8) << "F" << std::setw(8) << "N+" << '\n';
  for (const auto& [name, m] : rows) {
    out << std::left << std::setw(18) << name << std::right << std::fixed
        << std::setprecision(3) << std::setw(8) << m.mean_precision << std::setw(8)
        << m.mean_recall << std::setw(8) << m.f_measure << std::setw(8) << m.n_plus << '\n';
    out.unsetf(std::ios::fixed);
  }
  return out.str();
}

/// CSV companion to the table: order,precision,recall,f_measure,n_plus
inline std::string compare_orders_csv(
    const std::vector<std::pair<std::string, Metrics>>& rows) {
  if (rows.size() < 2) throw std::invalid_argument("compare_orders: need at least 2 entries");
  std::ostringstream out;
  out << "order,precision,recall,f_measure,n_plus\n";
  for (const auto& [name, m] : rows)
    out << name << ',' << m.mean_precision << ',' << m.mean_recall << ',' << m.f_measure << ','
        << m.n_plus << '\n';
  return out.str();
}

}  // namespace ria
