#pragma once

// Complexity regularizer for predicted adjacency matrices. The decoder output
// is read as N^2 independent Bernoulli edges; the gradient of the expected BDM
// with respect to each edge probability is
//
//   dE[K]/dp_ij = E[K | a_ij = 1] - E[K | a_ij = 0],
//
// which a single sampled matrix estimates without bias through its flip
// deltas.

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <vector>

#include "kolreg/bdm.hpp"
#include "kolreg/ctm.hpp"
#include "kolreg/error.hpp"
#include "kolreg/random.hpp"

namespace kolreg {

class BernoulliMatrix {
 public:
  BernoulliMatrix() = default;
  BernoulliMatrix(int n, double fill) : n_(n), probs_(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), fill) {
    validate();
  }
  BernoulliMatrix(int n, std::vector<double> probs) : n_(n), probs_(std::move(probs)) {
    if (probs_.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(n))
      throw DimensionMismatch("probability matrix has the wrong number of entries");
    validate();
  }

  int n() const noexcept { return n_; }
  double operator()(int i, int j) const noexcept { return probs_[index(i, j)]; }
  void set(int i, int j, double p) {
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("edge probabilities must lie in (0,1)");
    probs_[index(i, j)] = p;
  }
  const std::vector<double>& probs() const noexcept { return probs_; }

 private:
  void validate() const {
    for (double p : probs_)
      if (!(p > 0.0 && p < 1.0)) throw ConfigError("edge probabilities must lie in (0,1)");
  }
  std::size_t index(int i, int j) const noexcept {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(j);
  }

  int n_ = 0;
  std::vector<double> probs_;
};

struct GradientSample {
  int n = 0;
  int m = 0;  // samples averaged; 0 marks an exact gradient
  std::vector<double> values;
  // Per-entry unbiased sample variance of the m single-sample differences.
  // Empty for exact gradients or m == 1.
  std::vector<double> variance;

  double operator()(int i, int j) const noexcept {
    return values[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) + static_cast<std::size_t>(j)];
  }

  double standard_error(int i, int j) const {
    if (variance.empty() || m < 2) return std::numeric_limits<double>::quiet_NaN();
    return std::sqrt(variance[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) + static_cast<std::size_t>(j)] /
                     static_cast<double>(m));
  }
};

enum class RegMode { None, Kolmogorov, ConstantWeight };

struct RegConfig {
  double lambda = 0.0;
  int m = 1;
  RegMode mode = RegMode::None;
  double cw_constant = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
    if (m < 1) throw ConfigError("m must be >= 1");
    if (mode == RegMode::ConstantWeight && !(cw_constant > 0.0))
      throw ConfigError("constant-weight mode needs a positive constant");
  }
};

// No symmetrization: all N^2 entries are drawn independently.
inline BinaryMatrix sample_adjacency(const BernoulliMatrix& p, Rng& rng) {
  BinaryMatrix a(p.n());
  for (int i = 0; i < p.n(); ++i)
    for (int j = 0; j < p.n(); ++j) a.set(i, j, rng.bernoulli(p(i, j)));
  return a;
}

// Sample mean over m draws of K(A_ij=1) - K(A_ij=0). Draw k uses the stream
// derive_seed(seed, k), so the result is independent of evaluation order.
inline GradientSample grad_sample(const BernoulliMatrix& p, const BlockCost& cost, int m, std::uint64_t seed) {
  if (m < 1) throw ConfigError("m must be >= 1");
  const int n = p.n();
  const std::size_t cells = static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
  GradientSample g;
  g.n = n;
  g.m = m;
  g.values.assign(cells, 0.0);
  std::vector<double> sum_sq(m > 1 ? cells : 0, 0.0);

  std::unique_ptr<BdmState> state;
  for (int k = 0; k < m; ++k) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
    const BinaryMatrix a = sample_adjacency(p, rng);
    if (!state) {
      state = std::make_unique<BdmState>(a, cost);
    } else {
      state->assign(a);
    }
    std::size_t idx = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j, ++idx) {
        const double d = state->flip_difference(i, j);
        g.values[idx] += d;
        if (m > 1) sum_sq[idx] += d * d;
      }
  }
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t idx = 0; idx < cells; ++idx) {
    const double mean = g.values[idx] * inv_m;
    g.values[idx] = mean;
    if (m > 1) {
      const double var = (sum_sq[idx] - static_cast<double>(m) * mean * mean) / static_cast<double>(m - 1);
      sum_sq[idx] = var > 0.0 ? var : 0.0;
    }
  }
  g.variance = std::move(sum_sq);
  return g;
}

// Cost model selected by the regularization mode: CTM lookups for
// Kolmogorov, the configured constant for ConstantWeight.
inline BlockCost block_cost_for(const RegConfig& cfg, const CtmTable* table, int r) {
  switch (cfg.mode) {
    case RegMode::Kolmogorov:
      if (!table) throw ConfigError("Kolmogorov regularization needs a CTM table");
      require_2d(*table);
      if (table->block_side() != r) throw DimensionMismatch("CTM table block side does not match R");
      return BlockCost::from_table(*table);
    case RegMode::ConstantWeight:
      return BlockCost::constant(cfg.cw_constant, r);
    case RegMode::None:
      break;
  }
  throw ConfigError("regularization mode None has no block cost");
}

inline GradientSample grad_sample(const BernoulliMatrix& p, const CtmTable* table, const RegConfig& cfg, int r) {
  cfg.validate();
  return grad_sample(p, block_cost_for(cfg, table, r), cfg.m, cfg.seed);
}

inline constexpr int kMaxExactCells = 20;

namespace detail {

inline void check_exact_size(const BernoulliMatrix& p) {
  if (p.n() * p.n() > kMaxExactCells)
    throw TooLarge("exact enumeration limited to N^2 <= " + std::to_string(kMaxExactCells));
}

inline BinaryMatrix matrix_from_mask(int n, std::uint64_t mask) {
  BinaryMatrix a(n);
  for (int c = 0; c < n * n; ++c) a.set(c / n, c % n, (mask >> c) & 1U);
  return a;
}

// Probability of every realization and its BDM, indexed by mask (bit c is
// entry (c / n, c % n)).
struct Realizations {
  std::vector<double> prob;
  std::vector<double> value;
};

inline Realizations enumerate_realizations(const BernoulliMatrix& p, const BlockCost& cost) {
  check_exact_size(p);
  const int n = p.n();
  const int cells = n * n;
  const std::uint64_t count = std::uint64_t{1} << cells;
  Realizations out;
  out.prob.resize(count);
  out.value.resize(count);
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    double w = 1.0;
    for (int c = 0; c < cells; ++c) {
      const double pc = p.probs()[static_cast<std::size_t>(c)];
      w *= ((mask >> c) & 1U) ? pc : 1.0 - pc;
    }
    out.prob[mask] = w;
    out.value[mask] = bdm(matrix_from_mask(n, mask), cost);
  }
  return out;
}

}  // namespace detail

// E[K_BDM] by summing over all 2^(N^2) realizations.
inline double exact_expected_bdm(const BernoulliMatrix& p, const BlockCost& cost) {
  const auto real = detail::enumerate_realizations(p, cost);
  double e = 0.0;
  for (std::size_t k = 0; k < real.prob.size(); ++k) e += real.prob[k] * real.value[k];
  return e;
}

inline double exact_expected_bdm(const BernoulliMatrix& p, const CtmTable& table, int r) {
  require_2d(table);
  if (table.block_side() != r) throw DimensionMismatch("CTM table block side does not match R");
  return exact_expected_bdm(p, BlockCost::from_table(table));
}

// Exact E[K | a_ij = 1] - E[K | a_ij = 0] for every entry.
inline GradientSample exact_gradient(const BernoulliMatrix& p, const BlockCost& cost) {
  const auto real = detail::enumerate_realizations(p, cost);
  const int n = p.n();
  const int cells = n * n;
  GradientSample g;
  g.n = n;
  g.m = 0;
  g.values.assign(static_cast<std::size_t>(cells), 0.0);
  for (int c = 0; c < cells; ++c) {
    const double pc = p.probs()[static_cast<std::size_t>(c)];
    double e1 = 0.0, e0 = 0.0;
    for (std::uint64_t mask = 0; mask < real.prob.size(); ++mask) {
      if ((mask >> c) & 1U) {
        e1 += real.prob[mask] / pc * real.value[mask];
      } else {
        e0 += real.prob[mask] / (1.0 - pc) * real.value[mask];
      }
    }
    g.values[static_cast<std::size_t>(c)] = e1 - e0;
  }
  return g;
}

inline GradientSample exact_gradient(const BernoulliMatrix& p, const CtmTable& table, int r) {
  require_2d(table);
  if (table.block_side() != r) throw DimensionMismatch("CTM table block side does not match R");
  return exact_gradient(p, BlockCost::from_table(table));
}

// lambda * sum_ij p_ij g_ij.
inline double reg_term(const BernoulliMatrix& p, const GradientSample& g, double lambda) {
  if (p.n() != g.n) throw DimensionMismatch("probability and gradient sizes differ");
  double s = 0.0;
  for (std::size_t k = 0; k < g.values.size(); ++k) s += p.probs()[k] * g.values[k];
  return lambda * s;
}

// d(reg_term)/dp_ij with the gradient sample held constant.
inline std::vector<double> reg_backward(const GradientSample& g, double lambda) {
  std::vector<double> out(g.values.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = lambda * g.values[k];
  return out;
}

}  // namespace kolreg
