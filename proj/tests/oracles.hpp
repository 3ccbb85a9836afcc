#pragma once

// Naive reference implementations. They share no code with the library
// beyond plain data types: strings for blocks, std::map tapes, O(n^2)
// metric definitions.

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace oracle {

// --- Turing machines -----------------------------------------------------------

struct Instr {
  int write;
  char move;  // 'L' 'R' 'U' 'D'
  int next;   // 0 = halt
};

// All instructions for one table cell, listed independently of the library's
// index layout.
inline std::vector<Instr> instruction_set(int n, int dim) {
  std::vector<Instr> out;
  const std::string moves = dim == 1 ? "LR" : "LRUD";
  for (int next = 1; next <= n; ++next)
    for (int w = 0; w <= 1; ++w)
      for (char m : moves) out.push_back({w, m, next});
  out.push_back({0, 'R', 0});
  out.push_back({1, 'R', 0});
  return out;
}

struct Run {
  bool halted = false;
  long steps = 0;
  std::string key;  // visited bounding box, rows joined with '|'
};

inline Run simulate(const std::vector<Instr>& table, long limit) {
  std::map<std::pair<long, long>, int> tape;
  long r = 0, c = 0;
  long rlo = 0, rhi = 0, clo = 0, chi = 0;
  int state = 1;
  Run out;
  while (out.steps < limit) {
    const int read = tape.count({r, c}) ? tape[{r, c}] : 0;
    const Instr& in = table[static_cast<std::size_t>((state - 1) * 2 + read)];
    tape[{r, c}] = in.write;
    if (in.move == 'L') --c;
    if (in.move == 'R') ++c;
    if (in.move == 'U') --r;
    if (in.move == 'D') ++r;
    rlo = std::min(rlo, r);
    rhi = std::max(rhi, r);
    clo = std::min(clo, c);
    chi = std::max(chi, c);
    ++out.steps;
    if (in.next == 0) {
      out.halted = true;
      break;
    }
    state = in.next;
  }
  if (out.halted) {
    for (long i = rlo; i <= rhi; ++i) {
      if (i != rlo) out.key += '|';
      for (long j = clo; j <= chi; ++j) {
        auto it = tape.find({i, j});
        out.key += (it != tape.end() && it->second) ? '1' : '0';
      }
    }
  }
  return out;
}

struct Census {
  long machines = 0;
  long halting = 0;
  long max_steps = 0;
  std::map<std::string, long> counts;
};

// Odometer over every assignment of instructions to the 2n cells.
inline Census census(int n, int dim, long limit) {
  const auto set = instruction_set(n, dim);
  std::vector<std::size_t> digit(static_cast<std::size_t>(2 * n), 0);
  Census c;
  while (true) {
    std::vector<Instr> table;
    for (auto d : digit) table.push_back(set[d]);
    ++c.machines;
    const Run r = simulate(table, limit);
    if (r.halted) {
      ++c.halting;
      c.max_steps = std::max(c.max_steps, r.steps);
      ++c.counts[r.key];
    }
    std::size_t k = 0;
    while (k < digit.size() && ++digit[k] == set.size()) digit[k++] = 0;
    if (k == digit.size()) break;
  }
  return c;
}

// --- BDM -----------------------------------------------------------------------

using Grid = std::vector<std::vector<int>>;

inline std::string block_string(const Grid& a, int r0, int c0, int r) {
  std::string s;
  const int n = static_cast<int>(a.size());
  for (int i = r0; i < r0 + r; ++i)
    for (int j = c0; j < c0 + r; ++j) s += (i < n && j < n && a[i][j]) ? '1' : '0';
  return s;
}

// Two passes: count block strings, then sum cost + log2(count).
template <typename Cost>
double bdm(const Grid& a, int r, Cost cost) {
  const int n = static_cast<int>(a.size());
  const int np = (n + r - 1) / r * r;
  std::map<std::string, int> counts;
  for (int i = 0; i < np; i += r)
    for (int j = 0; j < np; j += r) counts[block_string(a, i, j, r)]++;
  double k = 0.0;
  for (const auto& [s, c] : counts) k += cost(s) + std::log2(static_cast<double>(c));
  return k;
}

// --- metrics ---------------------------------------------------------------------

// Probability that a random positive outscores a random negative, ties 1/2.
inline double auc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0;
  long pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[i] != 1 || y[j] != 0) continue;
      ++pairs;
      if (s[i] > s[j]) wins += 1.0;
      if (s[i] == s[j]) wins += 0.5;
    }
  return wins / static_cast<double>(pairs);
}

// Ranks by descending score, ties kept in input order; mean precision at
// each positive's rank.
inline double average_precision(const std::vector<double>& s, const std::vector<int>& y) {
  std::vector<std::size_t> order;
  std::vector<bool> used(s.size(), false);
  for (std::size_t k = 0; k < s.size(); ++k) {
    std::size_t best = s.size();
    for (std::size_t i = 0; i < s.size(); ++i)
      if (!used[i] && (best == s.size() || s[i] > s[best])) best = i;
    used[best] = true;
    order.push_back(best);
  }
  double sum = 0.0;
  int hits = 0, pos = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (y[order[k]] != 1) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  for (int v : y) pos += v;
  return sum / pos;
}

}  // namespace oracle
