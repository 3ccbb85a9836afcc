#include <gtest/gtest.h>

#include <cmath>

#include "kolreg/bdm.hpp"
#include "kolreg/random.hpp"
#include "oracles.hpp"

using namespace kolreg;

namespace {

oracle::Grid to_grid(const BinaryMatrix& a) {
  oracle::Grid g(static_cast<std::size_t>(a.n()), std::vector<int>(static_cast<std::size_t>(a.n())));
  for (int i = 0; i < a.n(); ++i)
    for (int j = 0; j < a.n(); ++j) g[i][j] = a(i, j);
  return g;
}

BinaryMatrix random_matrix(int n, double density, Rng& rng) {
  BinaryMatrix a(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a.set(i, j, rng.bernoulli(density));
  return a;
}

// Full table over every r x r block with values in [22, 36).
CtmTable random_table(int r, Rng& rng) {
  CtmTable t(2, r, MissingPolicy::Fail);
  for (std::uint64_t k = 0; k < (std::uint64_t{1} << (r * r)); ++k) t.insert(k, rng.uniform(22.0, 36.0));
  return t;
}

// Fixture: zero block 22, single top-left bit 30, every other block missing.
CtmTable fixture() {
  CtmTable t(2, 4, MissingPolicy::Fail);
  t.insert(0x0000, 22.0);
  t.insert(0x8000, 30.0);
  return t;
}

}  // namespace

TEST(Partition, AllZeroEightByEight) {
  const auto bc = partition(BinaryMatrix(8), 4);
  EXPECT_EQ(bc.unique_blocks(), 1u);
  EXPECT_EQ(bc.count(0), 4u);
  EXPECT_EQ(bc.total_blocks(), 4u);
}

TEST(Partition, PadsFiveByFive) {
  const auto bc = partition(BinaryMatrix::identity(5), 4);
  EXPECT_EQ(bc.n_padded, 8);
  EXPECT_EQ(bc.total_blocks(), 4u);
  // bottom-right block holds only a(4,4) at its top-left corner
  EXPECT_EQ(bc.count(0x8000), 1u);
}

TEST(Partition, IdentityFourByFour) {
  const auto bc = partition(BinaryMatrix::identity(4), 2);
  EXPECT_EQ(bc.unique_blocks(), 2u);
  EXPECT_EQ(bc.count(pack_bits("1001")), 2u);
  EXPECT_EQ(bc.count(0), 2u);
}

TEST(Bdm, ZeroMatrixFixture) {
  EXPECT_DOUBLE_EQ(bdm(BinaryMatrix(8), fixture()), 24.0);
}

TEST(Bdm, MatchesNaiveOracle) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto table = random_table(4, rng);
    const int n = 13 + trial % 6;
    const auto a = random_matrix(n, 0.3, rng);
    const double want =
        oracle::bdm(to_grid(a), 4, [&](const std::string& s) { return table.entries().at(pack_bits(s)); });
    EXPECT_NEAR(bdm(a, table), want, 1e-9);
  }
}

TEST(Bdm, MissingBlockUnderFail) {
  EXPECT_THROW(bdm(BinaryMatrix::identity(8), fixture()), MissingBlock);
  auto lenient = fixture();
  lenient.set_missing_policy(MissingPolicy::MaxPlusOne);
  // two identity blocks (31 each, count 2 -> +1) and two zero blocks (22, +1)
  EXPECT_DOUBLE_EQ(bdm(BinaryMatrix::identity(8), lenient), 31.0 + 1.0 + 22.0 + 1.0);
}

TEST(Bdm, RejectsOneDimensionalTable) {
  CtmTable t(1, 4);
  t.insert(0, 3.0);
  EXPECT_THROW(bdm(BinaryMatrix(8), t), DimensionMismatch);
}

TEST(Bdm, ConstantWeight) {
  EXPECT_DOUBLE_EQ(cw_value(BinaryMatrix(8), 29.0, 4), 31.0);
  auto a = BinaryMatrix(8);
  a.set(0, 0, true);
  a.set(0, 5, true);
  a.set(5, 5, true);
  a.set(6, 6, true);
  EXPECT_DOUBLE_EQ(cw_value(a, 29.0, 4), 4 * 29.0);
  EXPECT_DOUBLE_EQ(bdm(a, BlockCost::constant(29.0, 4)), 4 * 29.0);
  EXPECT_THROW(cw_value(a, 0.0, 4), ConfigError);
}

TEST(BdmString, Examples) {
  CtmTable t(1, 4);
  Rng rng(9);
  for (std::uint64_t k = 0; k < 16; ++k) t.insert(k, rng.uniform(2.0, 12.0));
  EXPECT_DOUBLE_EQ(bdm_string("0110", 4, t), t.lookup(0x6));
  EXPECT_DOUBLE_EQ(bdm_string("1010101010101010", 4, t), t.lookup(0xa) + 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::string s;
    const auto len = 1 + rng.below(40);
    for (std::uint64_t i = 0; i < len; ++i) s += rng.bernoulli(0.5) ? '1' : '0';
    std::string padded = s;
    while (padded.size() % 4) padded += '0';
    std::map<std::string, int> counts;
    for (std::size_t i = 0; i < padded.size(); i += 4) counts[padded.substr(i, 4)]++;
    double want = 0.0;
    for (const auto& [slice, c] : counts) want += t.entries().at(pack_bits(slice)) + std::log2(c);
    EXPECT_NEAR(bdm_string(s, 4, t), want, 1e-12) << s;
  }
  EXPECT_THROW(bdm_string("0120", 4, t), ParseError);
  EXPECT_THROW(bdm_string("0110", 3, t), DimensionMismatch);
}

TEST(BdmState, ValueMatchesBdm) {
  Rng rng(2);
  const auto table = random_table(4, rng);
  for (int n : {4, 5, 16, 17}) {
    const auto a = random_matrix(n, 0.4, rng);
    const auto s = make_state(a, table);
    EXPECT_NEAR(s.value(), bdm(a, table), 1e-9);
    EXPECT_EQ(s.total_blocks(), partition(a, 4).total_blocks());
  }
}

TEST(BdmState, EmptyPatternMatrix) {
  const auto s = make_state(BinaryMatrix(8), fixture());
  EXPECT_DOUBLE_EQ(s.value(), 24.0);
  EXPECT_EQ(s.count(0), 4u);
}

TEST(FlipDelta, SameBitIsZero) {
  auto t = fixture();
  t.set_missing_policy(MissingPolicy::MaxPlusOne);
  auto a = BinaryMatrix(8);
  a.set(2, 6, true);
  const auto s = make_state(a, t);
  EXPECT_EQ(s.flip_delta(3, 3).second, 0.0);
  EXPECT_EQ(s.flip_delta(2, 6).first, 0.0);
}

TEST(FlipDelta, CountTransferFixture) {
  const auto s = make_state(BinaryMatrix(8), fixture());
  const auto [d1, d0] = flip_delta(s, 0, 0);
  EXPECT_NEAR(d1, std::log2(3.0 / 4.0) + 30.0, 1e-12);
  EXPECT_NEAR(d1, 29.585, 1e-3);
  EXPECT_EQ(d0, 0.0);
}

TEST(FlipDelta, RandomCasesMatchRecompute) {
  Rng rng(17);
  CtmTable table(2, 4);
  for (int c = 0; c < 1000; ++c) {
    if (c % 50 == 0) table = random_table(4, rng);
    const auto a = random_matrix(16, rng.uniform(0.05, 0.6), rng);
    const int i = static_cast<int>(rng.below(16)), j = static_cast<int>(rng.below(16));
    const auto s = make_state(a, table);
    auto a1 = a, a0 = a;
    a1.set(i, j, true);
    a0.set(i, j, false);
    const double base = bdm(a, table);
    const auto [d1, d0] = s.flip_delta(i, j);
    ASSERT_NEAR(d1, bdm(a1, table) - base, 1e-9);
    ASSERT_NEAR(d0, bdm(a0, table) - base, 1e-9);
    ASSERT_NEAR(s.flip_difference(i, j), bdm(a1, table) - bdm(a0, table), 1e-9);
  }
}

TEST(BdmState, IncrementalSetTracksRecompute) {
  Rng rng(23);
  const auto table = random_table(4, rng);
  auto a = random_matrix(19, 0.2, rng);
  auto s = make_state(a, table);
  for (int step = 0; step < 3000; ++step) {
    const int i = static_cast<int>(rng.below(19)), j = static_cast<int>(rng.below(19));
    const bool b = rng.bernoulli(0.5);
    s.set(i, j, b);
    a.set(i, j, b);
    EXPECT_EQ(s.get(i, j), b);
    if (step % 100 == 0) {
      ASSERT_NEAR(s.value(), bdm(a, table), 1e-9);
      ASSERT_NEAR(s.value(), s.recompute(), 1e-9);
      EXPECT_EQ(s.counts().counts, partition(a, 4).counts);
    }
  }
}

TEST(BdmState, SparseFrequencyPath) {
  // r = 5 keys are 25 bits wide, beyond the dense array
  Rng rng(4);
  const auto cost = BlockCost::constant(20.0, 5);
  auto a = random_matrix(12, 0.3, rng);
  BdmState s(a, cost);
  EXPECT_NEAR(s.value(), bdm(a, cost), 1e-9);
  for (int step = 0; step < 200; ++step) {
    const int i = static_cast<int>(rng.below(12)), j = static_cast<int>(rng.below(12));
    auto a1 = a, a0 = a;
    a1.set(i, j, true);
    a0.set(i, j, false);
    ASSERT_NEAR(s.flip_difference(i, j), bdm(a1, cost) - bdm(a0, cost), 1e-9);
    const bool b = rng.bernoulli(0.5);
    s.set(i, j, b);
    a.set(i, j, b);
  }
  EXPECT_NEAR(s.value(), bdm(a, cost), 1e-9);
  s.assign(BinaryMatrix(7));
  EXPECT_NEAR(s.value(), 20.0 + 2.0, 1e-12);
}

TEST(BdmState, RejectsPaddingAndOutOfRange) {
  const auto s = make_state(BinaryMatrix(5), fixture());
  EXPECT_THROW(s.flip_delta(5, 0), std::out_of_range);
  EXPECT_THROW(s.flip_delta(0, 7), std::out_of_range);
  EXPECT_THROW(s.flip_delta(-1, 0), std::out_of_range);
}

TEST(BdmState, AssignReusesBuffers) {
  Rng rng(8);
  const auto table = random_table(4, rng);
  auto s = make_state(random_matrix(16, 0.5, rng), table);
  for (int n : {3, 16, 9}) {
    const auto a = random_matrix(n, 0.3, rng);
    s.assign(a);
    EXPECT_NEAR(s.value(), bdm(a, table), 1e-9);
  }
}
