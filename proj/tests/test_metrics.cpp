#include <gtest/gtest.h>

#include "kolreg/metrics.hpp"
#include "kolreg/random.hpp"
#include "oracles.hpp"

using namespace kolreg;

namespace {

ScoredEdges make(std::vector<double> s, std::vector<int> y) {
  ScoredEdges e;
  for (std::size_t i = 0; i < s.size(); ++i) e.add(s[i], y[i]);
  return e;
}

}  // namespace

TEST(Auc, Examples) {
  EXPECT_DOUBLE_EQ(auc(make({0.9, 0.8, 0.7}, {1, 0, 1})), 0.5);
  EXPECT_DOUBLE_EQ(auc(make({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0})), 1.0);
  EXPECT_DOUBLE_EQ(auc(make({0.4, 0.4, 0.4, 0.4}, {1, 0, 1, 0})), 0.5);
}

TEST(AveragePrecision, Examples) {
  EXPECT_DOUBLE_EQ(average_precision(make({0.9, 0.8, 0.7}, {1, 0, 1})), 5.0 / 6.0);
  EXPECT_DOUBLE_EQ(average_precision(make({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0})), 1.0);
}

TEST(Metrics, DegenerateLabels) {
  EXPECT_THROW(auc(make({0.1, 0.2}, {1, 1})), DegenerateLabels);
  EXPECT_THROW(average_precision(make({0.1, 0.2}, {0, 0})), DegenerateLabels);
  EXPECT_THROW(auc(ScoredEdges{}), DegenerateLabels);
}

TEST(Metrics, RandomCasesMatchBruteForce) {
  Rng rng(31);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto n = 2 + rng.below(30);
    std::vector<double> s;
    std::vector<int> y;
    for (std::uint64_t i = 0; i < n; ++i) {
      s.push_back(static_cast<double>(rng.below(5)) / 4.0);
      y.push_back(static_cast<int>(rng.below(2)));
    }
    y[0] = 1;
    y[1] = 0;
    const auto e = make(s, y);
    EXPECT_NEAR(auc(e), oracle::auc(s, y), 1e-12);
    EXPECT_NEAR(average_precision(e), oracle::average_precision(s, y), 1e-12);
  }
}
