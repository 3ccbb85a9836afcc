#pragma once

// Block Decomposition Method over binary matrices and strings, with a live
// block-frequency state that prices single-entry flips in O(1).

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "kolreg/ctm.hpp"
#include "kolreg/error.hpp"

namespace kolreg {

class BinaryMatrix {
 public:
  BinaryMatrix() = default;
  explicit BinaryMatrix(int n) : n_(n), bits_(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0) {
    if (n < 0) throw ConfigError("matrix side must be >= 0");
  }

  static BinaryMatrix identity(int n) {
    BinaryMatrix m(n);
    for (int i = 0; i < n; ++i) m.set(i, i, 1);
    return m;
  }

  // Rows of '0'/'1' characters; all rows must have the same length as the
  // number of rows.
  static BinaryMatrix from_rows(const std::vector<std::string>& rows) {
    BinaryMatrix m(static_cast<int>(rows.size()));
    for (int i = 0; i < m.n_; ++i) {
      if (static_cast<int>(rows[static_cast<std::size_t>(i)].size()) != m.n_) throw DimensionMismatch("matrix is not square");
      for (int j = 0; j < m.n_; ++j) {
        const char ch = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        if (ch != '0' && ch != '1') throw ParseError("matrix entries must be 0 or 1");
        m.set(i, j, ch == '1');
      }
    }
    return m;
  }

  int n() const noexcept { return n_; }
  std::uint8_t operator()(int i, int j) const noexcept { return bits_[index(i, j)]; }
  void set(int i, int j, bool b) noexcept { bits_[index(i, j)] = b ? 1 : 0; }
  const std::vector<std::uint8_t>& bits() const noexcept { return bits_; }

  std::size_t count_ones() const noexcept {
    std::size_t c = 0;
    for (auto b : bits_) c += b;
    return c;
  }

  bool is_symmetric() const noexcept {
    for (int i = 0; i < n_; ++i)
      for (int j = i + 1; j < n_; ++j)
        if ((*this)(i, j) != (*this)(j, i)) return false;
    return true;
  }

  friend bool operator==(const BinaryMatrix&, const BinaryMatrix&) = default;

 private:
  std::size_t index(int i, int j) const noexcept {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(j);
  }

  int n_ = 0;
  std::vector<std::uint8_t> bits_;
};

inline int padded_side(int n, int r) { return (n + r - 1) / r * r; }

// Key of the RxR block whose top-left cell is (row0, col0); cells beyond the
// matrix edge read as 0.
inline std::uint64_t block_key(const BinaryMatrix& a, int row0, int col0, int r) {
  std::uint64_t key = 0;
  for (int i = row0; i < row0 + r; ++i)
    for (int j = col0; j < col0 + r; ++j) {
      const bool bit = i < a.n() && j < a.n() && a(i, j);
      key = (key << 1) | static_cast<std::uint64_t>(bit);
    }
  return key;
}

struct BlockCounts {
  int r = 0;
  int n = 0;
  int n_padded = 0;
  std::map<std::uint64_t, std::uint64_t> counts;

  std::uint64_t blocks_per_side() const { return static_cast<std::uint64_t>(n_padded / r); }
  std::uint64_t total_blocks() const { return blocks_per_side() * blocks_per_side(); }
  std::size_t unique_blocks() const { return counts.size(); }

  std::uint64_t count(std::uint64_t key) const {
    const auto it = counts.find(key);
    return it == counts.end() ? 0 : it->second;
  }
};

// Zero-pads to a multiple of r on the right and bottom, then cuts into
// non-overlapping r x r blocks.
inline BlockCounts partition(const BinaryMatrix& a, int r) {
  if (r < 1) throw ConfigError("block side must be >= 1");
  if (r * r > 62) throw DimensionMismatch("block does not fit a 64-bit key");
  BlockCounts bc;
  bc.r = r;
  bc.n = a.n();
  bc.n_padded = padded_side(a.n(), r);
  for (int bi = 0; bi < bc.n_padded; bi += r)
    for (int bj = 0; bj < bc.n_padded; bj += r) ++bc.counts[block_key(a, bi, bj, r)];
  return bc;
}

// Per-block complexity: either a CTM table or the constant-weight control.
class BlockCost {
 public:
  static BlockCost from_table(const CtmTable& table) {
    BlockCost c;
    c.block_side_ = table.block_side();
    c.dimension_ = table.dimension();
    if (table.key_bits() <= 20) {
      c.dense_ = std::make_shared<const std::vector<double>>(table.dense());
    } else {
      c.table_ = &table;
    }
    return c;
  }

  static BlockCost constant(double value, int block_side, int dimension = 2) {
    if (!(value > 0.0)) throw ConfigError("constant block weight must be > 0");
    BlockCost c;
    c.block_side_ = block_side;
    c.dimension_ = dimension;
    c.constant_ = value;
    return c;
  }

  int block_side() const noexcept { return block_side_; }
  int dimension() const noexcept { return dimension_; }
  bool is_constant() const noexcept { return !std::isnan(constant_); }

  double operator()(std::uint64_t key) const {
    if (!std::isnan(constant_)) return constant_;
    if (dense_) {
      const double v = (*dense_)[key];
      if (std::isnan(v)) throw MissingBlock("no CTM value for block " + std::to_string(key));
      return v;
    }
    return table_->lookup(key);
  }

 private:
  BlockCost() = default;

  int block_side_ = 0;
  int dimension_ = 2;
  double constant_ = std::numeric_limits<double>::quiet_NaN();
  std::shared_ptr<const std::vector<double>> dense_;
  const CtmTable* table_ = nullptr;
};

// Sum over unique blocks of cost(U) + log2(c_U), summed in key order.
inline double aggregate(const BlockCounts& bc, const BlockCost& cost) {
  double k = 0.0;
  for (const auto& [key, c] : bc.counts) k += cost(key) + std::log2(static_cast<double>(c));
  return k;
}

inline void require_2d(const CtmTable& table) {
  if (table.dimension() != 2) throw DimensionMismatch("matrix BDM needs a 2D CTM table");
}

inline double bdm(const BinaryMatrix& a, const CtmTable& table) {
  require_2d(table);
  return aggregate(partition(a, table.block_side()), BlockCost::from_table(table));
}

inline double bdm(const BinaryMatrix& a, const BlockCost& cost) {
  return aggregate(partition(a, cost.block_side()), cost);
}

// Constant-weight control: every unique block costs c0.
inline double cw_value(const BinaryMatrix& a, double c0, int r) {
  if (!(c0 > 0.0)) throw ConfigError("c0 must be > 0");
  const BlockCounts bc = partition(a, r);
  double k = 0.0;
  for (const auto& [key, c] : bc.counts) k += c0 + std::log2(static_cast<double>(c));
  return k;
}

// 1D BDM over consecutive r-length slices; s is zero-padded to a multiple
// of r.
inline double bdm_string(std::string_view s, int r, const CtmTable& table) {
  if (table.dimension() != 1) throw DimensionMismatch("string BDM needs a 1D CTM table");
  if (table.block_side() != r) throw DimensionMismatch("slice length does not match table");
  if (r < 1) throw ConfigError("slice length must be >= 1");
  std::string padded(s);
  for (char ch : padded)
    if (ch != '0' && ch != '1') throw ParseError("not a binary string");
  while (padded.size() % static_cast<std::size_t>(r) != 0) padded.push_back('0');
  std::map<std::uint64_t, std::uint64_t> counts;
  for (std::size_t i = 0; i < padded.size(); i += static_cast<std::size_t>(r))
    ++counts[pack_bits(std::string_view(padded).substr(i, static_cast<std::size_t>(r)))];
  double k = 0.0;
  for (const auto& [key, c] : counts) k += table.lookup(key) + std::log2(static_cast<double>(c));
  return k;
}

namespace detail {

// Block multiplicities; a flat array when every key fits, otherwise a hash
// map.
class FrequencyTable {
 public:
  explicit FrequencyTable(int key_bits) : dense_(key_bits <= 20) {
    if (dense_) counts_.assign(std::size_t{1} << key_bits, 0);
  }

  std::uint32_t get(std::uint64_t key) const {
    if (dense_) return counts_[key];
    const auto it = sparse_.find(key);
    return it == sparse_.end() ? 0 : it->second;
  }

  void add(std::uint64_t key, int delta) {
    if (dense_) {
      counts_[key] = static_cast<std::uint32_t>(static_cast<int>(counts_[key]) + delta);
      return;
    }
    auto& c = sparse_[key];
    c = static_cast<std::uint32_t>(static_cast<int>(c) + delta);
    if (c == 0) sparse_.erase(key);
  }

  void clear(const std::vector<std::uint64_t>& touched) {
    if (dense_) {
      for (auto k : touched) counts_[k] = 0;
    } else {
      sparse_.clear();
    }
  }

 private:
  bool dense_;
  std::vector<std::uint32_t> counts_;
  std::unordered_map<std::uint64_t, std::uint32_t> sparse_;
};

}  // namespace detail

// Live BDM of one matrix. Keeps the key of every block and the multiplicity
// of every pattern, so pricing or applying a single-entry flip is O(1).
class BdmState {
 public:
  BdmState(const BinaryMatrix& a, BlockCost cost)
      : cost_(std::move(cost)), r_(cost_.block_side()), freq_(r_ * r_) {
    if (r_ < 1 || r_ * r_ > 62) throw DimensionMismatch("unsupported block side");
    assign(a);
  }

  // Rebuilds the state for a new matrix of any size, reusing buffers.
  void assign(const BinaryMatrix& a) {
    freq_.clear(keys_);
    n_ = a.n();
    n_padded_ = padded_side(n_, r_);
    per_side_ = n_padded_ / r_;
    keys_.assign(static_cast<std::size_t>(per_side_) * static_cast<std::size_t>(per_side_), 0);
    for (int bi = 0; bi < per_side_; ++bi)
      for (int bj = 0; bj < per_side_; ++bj) {
        const std::uint64_t key = block_key(a, bi * r_, bj * r_, r_);
        keys_[static_cast<std::size_t>(bi * per_side_ + bj)] = key;
        freq_.add(key, 1);
      }
    const std::size_t total = keys_.size();
    if (log2_.size() < total + 2) {
      log2_.resize(total + 2);
      log2_[0] = 0.0;
      for (std::size_t c = 1; c < log2_.size(); ++c) log2_[c] = std::log2(static_cast<double>(c));
    }
    value_ = recompute();
  }

  int n() const noexcept { return n_; }
  int block_side() const noexcept { return r_; }
  int n_padded() const noexcept { return n_padded_; }
  std::uint64_t total_blocks() const noexcept { return keys_.size(); }
  double value() const noexcept { return value_; }
  const BlockCost& cost() const noexcept { return cost_; }

  std::uint32_t count(std::uint64_t key) const { return freq_.get(key); }

  bool get(int i, int j) const {
    check(i, j);
    return (keys_[block_index(i, j)] >> bit_shift(i, j)) & 1U;
  }

  // Change in value if one occurrence of pattern `from` became `to`.
  double transfer_delta(std::uint64_t from, std::uint64_t to) const {
    if (from == to) return 0.0;
    const std::uint32_t cu = freq_.get(from);
    const std::uint32_t cv = freq_.get(to);
    const double out = cu == 1 ? -cost_(from) : log2_[cu - 1] - log2_[cu];
    const double in = cv == 0 ? cost_(to) : log2_[cv + 1] - log2_[cv];
    return out + in;
  }

  // {K(A with a_ij := 1) - K(A), K(A with a_ij := 0) - K(A)}.
  std::pair<double, double> flip_delta(int i, int j) const {
    check(i, j);
    const std::uint64_t key = keys_[block_index(i, j)];
    const std::uint64_t mask = std::uint64_t{1} << bit_shift(i, j);
    if (key & mask) return {0.0, transfer_delta(key, key & ~mask)};
    return {transfer_delta(key, key | mask), 0.0};
  }

  // K(A_ij=1) - K(A_ij=0).
  double flip_difference(int i, int j) const {
    const auto [d1, d0] = flip_delta(i, j);
    return d1 - d0;
  }

  void set(int i, int j, bool b) {
    check(i, j);
    std::uint64_t& key = keys_[block_index(i, j)];
    const std::uint64_t mask = std::uint64_t{1} << bit_shift(i, j);
    const std::uint64_t next = b ? (key | mask) : (key & ~mask);
    if (next == key) return;
    value_ += transfer_delta(key, next);
    freq_.add(key, -1);
    freq_.add(next, 1);
    key = next;
  }

  // Full recomputation from the block multiplicities.
  double recompute() const {
    std::map<std::uint64_t, std::uint32_t> unique;
    for (auto k : keys_) unique.emplace(k, 0);
    double k = 0.0;
    for (auto& [key, unused] : unique) k += cost_(key) + log2_[freq_.get(key)];
    return k;
  }

  BlockCounts counts() const {
    BlockCounts bc;
    bc.r = r_;
    bc.n = n_;
    bc.n_padded = n_padded_;
    for (auto k : keys_) ++bc.counts[k];
    return bc;
  }

 private:
  void check(int i, int j) const {
    if (i < 0 || j < 0 || i >= n_ || j >= n_)
      throw std::out_of_range("entry (" + std::to_string(i) + "," + std::to_string(j) + ") outside the matrix");
  }
  std::size_t block_index(int i, int j) const noexcept {
    return static_cast<std::size_t>((i / r_) * per_side_ + (j / r_));
  }
  int bit_shift(int i, int j) const noexcept { return r_ * r_ - 1 - ((i % r_) * r_ + (j % r_)); }

  BlockCost cost_;
  int r_;
  int n_ = 0;
  int n_padded_ = 0;
  int per_side_ = 0;
  std::vector<std::uint64_t> keys_;
  detail::FrequencyTable freq_;
  std::vector<double> log2_;
  double value_ = 0.0;
};

inline BdmState make_state(const BinaryMatrix& a, const CtmTable& table) {
  require_2d(table);
  return BdmState(a, BlockCost::from_table(table));
}

inline std::pair<double, double> flip_delta(const BdmState& state, int i, int j) { return state.flip_delta(i, j); }

}  // namespace kolreg
