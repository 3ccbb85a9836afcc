#pragma once

// Coding Theorem Method: exhaustive enumeration of small 2-symbol Turing
// machines and the complexity tables derived from their output frequencies.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include "kolreg/error.hpp"

namespace kolreg {

enum class Move : std::uint8_t { Left, Right, Up, Down };

// Next-state value that stops the machine. Working states are 1..n.
inline constexpr std::uint8_t kHalt = 0;

struct Transition {
  std::uint8_t write = 0;
  Move move = Move::Right;
  std::uint8_t next = kHalt;

  friend bool operator==(const Transition&, const Transition&) = default;
};

// An n-state, 2-symbol machine in the busy beaver formalism. dimension 1 runs
// on a bi-infinite tape (Left/Right moves); dimension 2 runs on an unbounded
// grid and may also move Up/Down.
class TuringMachine {
 public:
  TuringMachine(int n_states, int dimension = 1)
      : n_states_(n_states), dimension_(dimension), table_(2 * static_cast<std::size_t>(n_states)) {
    if (n_states < 1 || n_states > 255) throw ConfigError("n_states must be in 1..255");
    if (dimension != 1 && dimension != 2) throw ConfigError("dimension must be 1 or 2");
  }

  int n_states() const noexcept { return n_states_; }
  int dimension() const noexcept { return dimension_; }

  const Transition& at(int state, int read) const {
    return table_[index_of(state, read)];
  }

  void set(int state, int read, Transition t) {
    if (t.next > n_states_) throw ConfigError("next state out of range");
    if (dimension_ == 1 && (t.move == Move::Up || t.move == Move::Down))
      throw ConfigError("1D machine cannot move up/down");
    table_[index_of(state, read)] = t;
  }

  // Unchecked; for simulator inner loops.
  const Transition& step(int state, std::uint8_t read) const noexcept {
    return table_[static_cast<std::size_t>(state - 1) * 2 + read];
  }

  bool has_halt_transition() const noexcept {
    return std::any_of(table_.begin(), table_.end(), [](const Transition& t) { return t.next == kHalt; });
  }

  // Number of instructions available per table cell: 2 writes x (2 or 4)
  // moves x n states, plus 2 halting instructions (write 0/1, then step
  // right and stop).
  static std::uint64_t instructions_per_cell(int n_states, int dimension) {
    return static_cast<std::uint64_t>(dimension == 1 ? 4 : 8) * n_states + 2;
  }

  // (4n+2)^(2n) in 1D, (8n+2)^(2n) in 2D.
  static std::uint64_t class_size(int n_states, int dimension) {
    const std::uint64_t base = instructions_per_cell(n_states, dimension);
    std::uint64_t total = 1;
    for (int i = 0; i < 2 * n_states; ++i) {
      if (total > std::numeric_limits<std::uint64_t>::max() / base)
        throw TooLarge("machine class does not fit in 64 bits");
      total *= base;
    }
    return total;
  }

  // Mixed-radix decoding of a machine index; every index in
  // [0, class_size) maps to a distinct machine.
  static TuringMachine from_index(int n_states, std::uint64_t index, int dimension = 1) {
    TuringMachine tm(n_states, dimension);
    const std::uint64_t base = instructions_per_cell(n_states, dimension);
    const std::uint64_t moves = dimension == 1 ? 2 : 4;
    for (auto& cell : tm.table_) {
      const std::uint64_t c = index % base;
      index /= base;
      const std::uint64_t working = base - 2;
      if (c < working) {
        cell.next = static_cast<std::uint8_t>(c / (2 * moves) + 1);
        cell.write = static_cast<std::uint8_t>((c / moves) % 2);
        cell.move = static_cast<Move>(c % moves);
      } else {
        cell.next = kHalt;
        cell.write = static_cast<std::uint8_t>(c - working);
        cell.move = Move::Right;
      }
    }
    return tm;
  }

 private:
  std::size_t index_of(int state, int read) const {
    if (state < 1 || state > n_states_ || read < 0 || read > 1)
      throw ConfigError("transition index out of range");
    return static_cast<std::size_t>(state - 1) * 2 + static_cast<std::size_t>(read);
  }

  int n_states_;
  int dimension_;
  std::vector<Transition> table_;
};

enum class RunStatus { Halted, StepLimitExceeded };

struct RunOutcome {
  RunStatus status = RunStatus::StepLimitExceeded;
  // Visited region at halt, row-major, one '0'/'1' per cell. Empty unless
  // Halted.
  std::string output;
  int rows = 0;
  int cols = 0;
  std::uint64_t steps = 0;
};

namespace detail {

// Reusable scratch tape; enumeration runs millions of machines through the
// same buffers and only clears what each run touched.
class TapeWorkspace {
 public:
  RunOutcome run(const TuringMachine& tm, std::uint64_t step_limit) {
    return tm.dimension() == 1 ? run_1d(tm, step_limit) : run_2d(tm, step_limit);
  }

 private:
  RunOutcome run_1d(const TuringMachine& tm, std::uint64_t step_limit) {
    const std::size_t width = 2 * step_limit + 3;
    if (tape_.size() < width) tape_.assign(width, 0);
    const auto origin = static_cast<std::int64_t>(step_limit + 1);
    std::int64_t head = origin, lo = origin, hi = origin;
    int state = 1;
    RunOutcome out;
    while (out.steps < step_limit) {
      auto& cell = tape_[static_cast<std::size_t>(head)];
      const Transition& t = tm.step(state, cell);
      cell = t.write;
      head += t.move == Move::Left ? -1 : 1;
      lo = std::min(lo, head);
      hi = std::max(hi, head);
      ++out.steps;
      if (t.next == kHalt) {
        out.status = RunStatus::Halted;
        break;
      }
      state = t.next;
    }
    if (out.status == RunStatus::Halted) {
      out.rows = 1;
      out.cols = static_cast<int>(hi - lo + 1);
      out.output.reserve(static_cast<std::size_t>(out.cols));
      for (std::int64_t i = lo; i <= hi; ++i) out.output.push_back(tape_[static_cast<std::size_t>(i)] ? '1' : '0');
    }
    std::fill(tape_.begin() + lo, tape_.begin() + hi + 1, std::uint8_t{0});
    return out;
  }

  RunOutcome run_2d(const TuringMachine& tm, std::uint64_t step_limit) {
    const std::size_t side = 2 * step_limit + 3;
    if (grid_side_ < side) {
      grid_side_ = side;
      grid_.assign(side * side, 0);
    }
    const auto origin = static_cast<std::int64_t>(step_limit + 1);
    std::int64_t r = origin, c = origin;
    std::int64_t r_lo = r, r_hi = r, c_lo = c, c_hi = c;
    const auto stride = static_cast<std::int64_t>(grid_side_);
    int state = 1;
    RunOutcome out;
    while (out.steps < step_limit) {
      auto& cell = grid_[static_cast<std::size_t>(r * stride + c)];
      const Transition& t = tm.step(state, cell);
      cell = t.write;
      switch (t.move) {
        case Move::Left: --c; break;
        case Move::Right: ++c; break;
        case Move::Up: --r; break;
        case Move::Down: ++r; break;
      }
      r_lo = std::min(r_lo, r);
      r_hi = std::max(r_hi, r);
      c_lo = std::min(c_lo, c);
      c_hi = std::max(c_hi, c);
      ++out.steps;
      if (t.next == kHalt) {
        out.status = RunStatus::Halted;
        break;
      }
      state = t.next;
    }
    if (out.status == RunStatus::Halted) {
      out.rows = static_cast<int>(r_hi - r_lo + 1);
      out.cols = static_cast<int>(c_hi - c_lo + 1);
      out.output.reserve(static_cast<std::size_t>(out.rows * out.cols));
      for (std::int64_t i = r_lo; i <= r_hi; ++i)
        for (std::int64_t j = c_lo; j <= c_hi; ++j)
          out.output.push_back(grid_[static_cast<std::size_t>(i * stride + j)] ? '1' : '0');
    }
    for (std::int64_t i = r_lo; i <= r_hi; ++i)
      std::fill_n(grid_.begin() + (i * stride + c_lo), c_hi - c_lo + 1, std::uint8_t{0});
    return out;
  }

  std::vector<std::uint8_t> tape_;
  std::vector<std::uint8_t> grid_;
  std::size_t grid_side_ = 0;
};

}  // namespace detail

// Runs from a blank (all-0) tape, head at the origin, state 1. A machine that
// has not halted after step_limit transitions is reported as
// StepLimitExceeded.
inline RunOutcome run_tm(const TuringMachine& machine, std::uint64_t step_limit) {
  if (step_limit < 1) throw ConfigError("step_limit must be >= 1");
  detail::TapeWorkspace ws;
  return ws.run(machine, step_limit);
}

// Key under which a run output is counted. 1D outputs are the bit string
// itself; 2D outputs join rows with '|' so that shape is part of the key.
inline std::string output_key(const RunOutcome& r) {
  if (r.rows <= 1) return r.output;
  std::string key;
  key.reserve(r.output.size() + static_cast<std::size_t>(r.rows));
  for (int i = 0; i < r.rows; ++i) {
    if (i) key.push_back('|');
    key.append(r.output, static_cast<std::size_t>(i * r.cols), static_cast<std::size_t>(r.cols));
  }
  return key;
}

// Output frequency distribution D over a whole machine class.
struct Distribution {
  int n_states = 0;
  int dimension = 1;
  std::uint64_t step_limit = 0;
  std::uint64_t machines = 0;  // machines visited
  std::uint64_t halting = 0;   // machines that halted within step_limit
  std::uint64_t max_steps = 0; // longest halting run observed
  std::map<std::string, std::uint64_t> counts;

  double frequency(const std::string& key) const {
    const auto it = counts.find(key);
    return it == counts.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(halting);
  }

  std::map<std::string, double> frequencies() const {
    std::map<std::string, double> out;
    for (const auto& [k, c] : counts) out.emplace(k, static_cast<double>(c) / static_cast<double>(halting));
    return out;
  }
};

// Default step limits: comfortably above the known halting bounds for the
// 2-symbol classes.
inline std::uint64_t default_step_limit(int n_states) {
  if (n_states <= 2) return 10;
  if (n_states == 3) return 50;
  return 200;
}

// Enumerates every machine in class (n,2). Work is split over `threads`
// contiguous index ranges and merged at the end, so the result does not
// depend on the thread count.
inline Distribution enumerate_distribution(int n_states, std::uint64_t step_limit, int dimension = 1,
                                           unsigned threads = 0) {
  if (n_states < 1) throw ConfigError("n_states must be >= 1");
  if (step_limit < 1) throw ConfigError("step_limit must be >= 1");
  if (dimension != 1 && dimension != 2) throw ConfigError("dimension must be 1 or 2");
  if (dimension == 2 && n_states > 2) throw TooLarge("2D enumeration is limited to n <= 2");

  const std::uint64_t total = TuringMachine::class_size(n_states, dimension);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::uint64_t>(threads, total));

  struct Partial {
    std::uint64_t machines = 0, halting = 0, max_steps = 0;
    std::unordered_map<std::string, std::uint64_t> counts;
  };
  std::vector<Partial> partials(threads);

  auto work = [&](unsigned w) {
    Partial& p = partials[w];
    detail::TapeWorkspace ws;
    const std::uint64_t begin = total / threads * w + std::min<std::uint64_t>(w, total % threads);
    const std::uint64_t end = begin + total / threads + (w < total % threads ? 1 : 0);
    for (std::uint64_t idx = begin; idx < end; ++idx) {
      ++p.machines;
      const TuringMachine tm = TuringMachine::from_index(n_states, idx, dimension);
      if (!tm.has_halt_transition()) continue;
      const RunOutcome r = ws.run(tm, step_limit);
      if (r.status != RunStatus::Halted) continue;
      ++p.halting;
      p.max_steps = std::max(p.max_steps, r.steps);
      ++p.counts[output_key(r)];
    }
  };

  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned w = 0; w < threads; ++w) pool.emplace_back(work, w);
  }

  Distribution d;
  d.n_states = n_states;
  d.dimension = dimension;
  d.step_limit = step_limit;
  for (const auto& p : partials) {
    d.machines += p.machines;
    d.halting += p.halting;
    d.max_steps = std::max(d.max_steps, p.max_steps);
    for (const auto& [k, c] : p.counts) d.counts[k] += c;
  }
  if (d.halting == 0) throw ZeroHaltingMachines("no machine halted within the step limit");
  return d;
}

enum class MissingPolicy { Fail, MaxPlusOne };

// Complexity (bits) of every R-cell (1D) or RxR (2D) binary block, keyed by
// its row-major bit packing with cell (0,0) as the most significant bit.
class CtmTable {
 public:
  CtmTable(int dimension, int block_side, MissingPolicy policy = MissingPolicy::MaxPlusOne)
      : dimension_(dimension), block_side_(block_side), policy_(policy) {
    if (dimension != 1 && dimension != 2) throw DimensionMismatch("dimension must be 1 or 2");
    if (block_side < 1) throw DimensionMismatch("block side must be >= 1");
    if (key_bits() > 62) throw DimensionMismatch("block does not fit a 64-bit key");
  }

  int dimension() const noexcept { return dimension_; }
  int block_side() const noexcept { return block_side_; }
  int key_bits() const noexcept { return dimension_ == 1 ? block_side_ : block_side_ * block_side_; }
  MissingPolicy missing_policy() const noexcept { return policy_; }
  void set_missing_policy(MissingPolicy p) noexcept { policy_ = p; }

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const std::map<std::uint64_t, double>& entries() const noexcept { return entries_; }

  // Returns false if the key was already present.
  bool insert(std::uint64_t key, double value) {
    check_key(key);
    if (!(value >= 0.0) || !std::isfinite(value)) throw Error("complexity values must be finite and >= 0");
    const bool fresh = entries_.emplace(key, value).second;
    if (fresh) max_ = std::max(max_, value);
    return fresh;
  }

  std::optional<double> find(std::uint64_t key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  double max_value() const {
    if (empty()) throw EmptyTable("table has no entries");
    return max_;
  }

  double lookup(std::uint64_t key) const {
    check_key(key);
    const auto it = entries_.find(key);
    if (it != entries_.end()) return it->second;
    if (policy_ == MissingPolicy::Fail) throw MissingBlock("no CTM value for block " + std::to_string(key));
    return max_value() + 1.0;
  }

  // Every possible key resolved through lookup(); NaN marks a missing block
  // under the Fail policy. Used by the BDM hot loops.
  std::vector<double> dense() const {
    if (key_bits() > 24) throw TooLarge("dense table limited to 24-bit keys");
    const std::size_t n = std::size_t{1} << key_bits();
    const double fill = policy_ == MissingPolicy::Fail ? std::numeric_limits<double>::quiet_NaN()
                                                       : (empty() ? std::numeric_limits<double>::quiet_NaN() : max_ + 1.0);
    std::vector<double> out(n, fill);
    for (const auto& [k, v] : entries_) out[k] = v;
    return out;
  }

  friend bool operator==(const CtmTable& a, const CtmTable& b) {
    return a.dimension_ == b.dimension_ && a.block_side_ == b.block_side_ && a.entries_ == b.entries_;
  }

 private:
  void check_key(std::uint64_t key) const {
    if (key >> key_bits()) throw DimensionMismatch("key wider than " + std::to_string(key_bits()) + " bits");
  }

  int dimension_;
  int block_side_;
  MissingPolicy policy_;
  std::map<std::uint64_t, double> entries_;
  double max_ = 0.0;
};

// Packs a '0'/'1' string (optionally with '|' row separators) into a key.
inline std::uint64_t pack_bits(std::string_view bits) {
  std::uint64_t key = 0;
  for (char ch : bits) {
    if (ch == '|') continue;
    if (ch != '0' && ch != '1') throw ParseError("not a binary string");
    key = (key << 1) | static_cast<std::uint64_t>(ch == '1');
  }
  return key;
}

inline std::string unpack_bits(std::uint64_t key, int n_bits) {
  std::string s(static_cast<std::size_t>(n_bits), '0');
  for (int i = 0; i < n_bits; ++i)
    if ((key >> (n_bits - 1 - i)) & 1U) s[static_cast<std::size_t>(i)] = '1';
  return s;
}

// Output key that a block of the given shape has in a Distribution.
inline std::string block_output_key(std::uint64_t key, int dimension, int block_side) {
  if (dimension == 1) return unpack_bits(key, block_side);
  const std::string flat = unpack_bits(key, block_side * block_side);
  std::string out;
  for (int r = 0; r < block_side; ++r) {
    if (r) out.push_back('|');
    out.append(flat, static_cast<std::size_t>(r * block_side), static_cast<std::size_t>(block_side));
  }
  return out;
}

// CTM values for blocks of one shape: length block_side in 1D, a
// block_side x block_side bounding box in 2D. Frequencies are taken among the
// halting machines whose output has that shape, so the stored values satisfy
// sum(2^-value) = 1.
inline CtmTable table_from_distribution(const Distribution& d, int block_side) {
  CtmTable table(d.dimension, block_side);
  std::uint64_t shape_total = 0;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> hits;
  for (const auto& [key, count] : d.counts) {
    const auto rows = d.dimension == 1 ? 1 : static_cast<int>(std::count(key.begin(), key.end(), '|') + 1);
    const auto cells = static_cast<int>(key.size()) - (rows - 1);
    const bool match = d.dimension == 1 ? cells == block_side
                                        : rows == block_side && cells == block_side * block_side;
    if (!match) continue;
    shape_total += count;
    hits.emplace_back(pack_bits(key), count);
  }
  if (shape_total == 0)
    throw ZeroHaltingMachines("no halting machine produced a block of side " + std::to_string(block_side));
  for (const auto& [key, count] : hits)
    table.insert(key, -std::log2(static_cast<double>(count) / static_cast<double>(shape_total)));
  return table;
}

inline CtmTable build_ctm_table(int n_states, std::uint64_t step_limit, int dimension, int block_side,
                                unsigned threads = 0) {
  return table_from_distribution(enumerate_distribution(n_states, step_limit, dimension, threads), block_side);
}

inline double average_ctm(const CtmTable& table) {
  if (table.empty()) throw EmptyTable("cannot average an empty table");
  double sum = 0.0;
  for (const auto& [k, v] : table.entries()) sum += v;
  return sum / static_cast<double>(table.size());
}

// ---- text format -----------------------------------------------------------
//
//   ctm r=<R> dim=<1|2>
//   <hex key> <decimal value>
//   ...
//
// Keys are zero-padded to ceil(bits/4) hex digits. Values are written in the
// shortest form that reads back to the same double.

namespace detail {

inline int hex_width(int key_bits) { return (key_bits + 3) / 4; }

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

}  // namespace detail

inline void write_ctm_table(const CtmTable& table, std::ostream& os) {
  os << "ctm r=" << table.block_side() << " dim=" << table.dimension() << '\n';
  const int width = detail::hex_width(table.key_bits());
  char hex[24];
  for (const auto& [k, v] : table.entries()) {
    std::snprintf(hex, sizeof hex, "%0*llx", width, static_cast<unsigned long long>(k));
    os << hex << ' ' << detail::format_double(v) << '\n';
  }
}

inline CtmTable read_ctm_table(std::istream& is, MissingPolicy policy = MissingPolicy::MaxPlusOne) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(is, line)) throw ParseError("missing header", 1);
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  int r = 0, dim = 0;
  {
    char tail = 0;
    if (std::sscanf(line.c_str(), "ctm r=%d dim=%d%c", &r, &dim, &tail) != 2)
      throw ParseError("expected header 'ctm r=<R> dim=<1|2>'", lineno);
    if (r < 1 || (dim != 1 && dim != 2)) throw ParseError("bad header values", lineno);
  }
  CtmTable table(dim, r, policy);
  const int width = detail::hex_width(table.key_bits());
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto sp = line.find(' ');
    if (sp == std::string::npos || sp == 0) throw ParseError("expected '<hex key> <value>'", lineno);
    const std::string_view key_text(line.data(), sp);
    const std::string_view value_text(line.data() + sp + 1, line.size() - sp - 1);

    std::uint64_t key = 0;
    auto kr = std::from_chars(key_text.data(), key_text.data() + key_text.size(), key, 16);
    if (kr.ec != std::errc() || kr.ptr != key_text.data() + key_text.size())
      throw ParseError("bad hex key '" + std::string(key_text) + "'", lineno);
    if (static_cast<int>(key_text.size()) != width || (key >> table.key_bits()) != 0)
      throw DimensionMismatch("line " + std::to_string(lineno) + ": key '" + std::string(key_text) +
                              "' does not match r=" + std::to_string(r) + " dim=" + std::to_string(dim));

    double value = 0.0;
    auto vr = std::from_chars(value_text.data(), value_text.data() + value_text.size(), value);
    if (vr.ec != std::errc() || vr.ptr != value_text.data() + value_text.size() || !std::isfinite(value) ||
        value < 0.0)
      throw ParseError("bad value '" + std::string(value_text) + "'", lineno);

    if (!table.insert(key, value)) throw ParseError("duplicate key '" + std::string(key_text) + "'", lineno);
  }
  return table;
}

inline void save_ctm_table(const CtmTable& table, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  write_ctm_table(table, os);
  if (!os) throw Error("failed writing '" + path + "'");
}

inline CtmTable load_ctm_table(const std::string& path, MissingPolicy policy = MissingPolicy::MaxPlusOne) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open '" + path + "'");
  return read_ctm_table(is, policy);
}

}  // namespace kolreg
