#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "kolreg/error.hpp"

namespace kolreg {

struct ScoredEdges {
  std::vector<double> scores;
  std::vector<int> labels;  // 1 = true edge, 0 = false edge

  void add(double score, int label) {
    scores.push_back(score);
    labels.push_back(label);
  }
};

namespace detail {

inline std::pair<std::size_t, std::size_t> class_sizes(const ScoredEdges& s) {
  if (s.scores.size() != s.labels.size()) throw DimensionMismatch("scores and labels differ in length");
  std::size_t pos = 0;
  for (int y : s.labels) {
    if (y != 0 && y != 1) throw ConfigError("labels must be 0 or 1");
    pos += static_cast<std::size_t>(y);
  }
  const std::size_t neg = s.labels.size() - pos;
  if (pos == 0 || neg == 0) throw DegenerateLabels("need at least one positive and one negative");
  return {pos, neg};
}

}  // namespace detail

// Mann-Whitney form: P(score_pos > score_neg), ties counting one half.
// Computed from midranks, which gives the same half-integer pair count as
// direct pair enumeration.
inline double auc(const ScoredEdges& s) {
  const auto [pos, neg] = detail::class_sizes(s);
  const std::size_t n = s.scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s.scores[a] < s.scores[b]; });

  // Twice the rank sum of positives keeps midranks integral.
  double twice_rank_sum = 0.0;
  for (std::size_t lo = 0; lo < n;) {
    std::size_t hi = lo;
    while (hi + 1 < n && s.scores[order[hi + 1]] == s.scores[order[lo]]) ++hi;
    const double twice_midrank = static_cast<double>(lo + hi + 2);
    for (std::size_t k = lo; k <= hi; ++k)
      if (s.labels[order[k]]) twice_rank_sum += twice_midrank;
    lo = hi + 1;
  }
  const double p = static_cast<double>(pos);
  const double twice_u = twice_rank_sum - p * (p + 1.0);
  return twice_u / 2.0 / (p * static_cast<double>(neg));
}

// Mean over positives of precision at the positive's rank. Descending score,
// ties kept in input order.
inline double average_precision(const ScoredEdges& s) {
  const auto [pos, neg] = detail::class_sizes(s);
  (void)neg;
  std::vector<std::size_t> order(s.scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s.scores[a] > s.scores[b]; });
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (!s.labels[order[rank]]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
  }
  return sum / static_cast<double>(pos);
}

}  // namespace kolreg
