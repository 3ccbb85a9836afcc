#pragma once

// Multi-trial experiment runner: shared split, per-trial initializations,
// one result row per (mode, metric), lambda search and table output.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "kolreg/ctm.hpp"
#include "kolreg/data.hpp"
#include "kolreg/error.hpp"
#include "kolreg/linkpred.hpp"
#include "kolreg/random.hpp"
#include "kolreg/regularizer.hpp"

namespace kolreg {

inline std::string to_string(RegMode m) {
  switch (m) {
    case RegMode::None: return "none";
    case RegMode::Kolmogorov: return "kol";
    case RegMode::ConstantWeight: return "cw";
  }
  return "none";
}

inline RegMode parse_reg_mode(const std::string& s) {
  if (s == "none") return RegMode::None;
  if (s == "kol") return RegMode::Kolmogorov;
  if (s == "cw") return RegMode::ConstantWeight;
  throw ConfigError("unknown regularization '" + s + "' (expected none, kol or cw)");
}

// Comma-separated list, e.g. "none,kol,cw".
inline std::vector<RegMode> parse_reg_modes(const std::string& s) {
  std::vector<RegMode> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    const RegMode m = parse_reg_mode(tok);
    if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
  }
  if (out.empty()) throw ConfigError("no regularization mode given");
  return out;
}

struct ExperimentConfig {
  std::string dataset;
  ModelKind model = ModelKind::GAE;
  std::vector<RegMode> reg_modes{RegMode::None};
  double lambda = 0.0;
  double lambda_scale = 1.0;
  int trials = 10;
  int epochs = 1000;
  int m = 1;
  int block_size = 4;
  std::string ctm_table;
  std::uint64_t split_seed = 0;
  std::uint64_t seed = 0;
  std::string out;
  double learning_rate = 0.01;
  unsigned threads = 0;

  bool needs_table() const {
    return std::any_of(reg_modes.begin(), reg_modes.end(), [](RegMode r) { return r != RegMode::None; });
  }

  double effective_lambda() const { return lambda * lambda_scale; }

  void validate() const {
    if (dataset.empty()) throw ConfigError("no dataset given");
    if (trials < 1) throw ConfigError("trials must be >= 1");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (m < 1) throw ConfigError("m must be >= 1");
    if (block_size < 1) throw ConfigError("block size must be >= 1");
    if (!(lambda >= 0.0) || !(lambda_scale >= 0.0)) throw ConfigError("lambda must be >= 0");
    if (needs_table() && ctm_table.empty())
      throw ConfigError("kol and cw regularization need --ctm-table (cw uses the table average as its constant)");
  }
};

// JSON keys match the command-line flag names.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  static const std::vector<std::string> known = {"dataset", "model", "reg", "lambda", "lambda-scale", "trials",
                                                 "epochs", "m", "block-size", "ctm-table", "split-seed", "seed",
                                                 "out", "learning-rate", "threads"};
  for (const auto& [k, v] : j.items())
    if (std::find(known.begin(), known.end(), k) == known.end()) throw ConfigError("unknown config key '" + k + "'");
  ExperimentConfig c;
  c.dataset = j.value("dataset", c.dataset);
  if (j.contains("model")) c.model = parse_model_kind(j.at("model").get<std::string>());
  if (j.contains("reg")) c.reg_modes = parse_reg_modes(j.at("reg").get<std::string>());
  c.lambda = j.value("lambda", c.lambda);
  c.lambda_scale = j.value("lambda-scale", c.lambda_scale);
  c.trials = j.value("trials", c.trials);
  c.epochs = j.value("epochs", c.epochs);
  c.m = j.value("m", c.m);
  c.block_size = j.value("block-size", c.block_size);
  c.ctm_table = j.value("ctm-table", c.ctm_table);
  c.split_seed = j.value("split-seed", c.split_seed);
  c.seed = j.value("seed", c.seed);
  c.out = j.value("out", c.out);
  c.learning_rate = j.value("learning-rate", c.learning_rate);
  c.threads = j.value("threads", c.threads);
  return c;
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  std::string reg;
  for (RegMode m : c.reg_modes) reg += (reg.empty() ? "" : ",") + to_string(m);
  return {{"dataset", c.dataset},       {"model", to_string(c.model)}, {"reg", reg},
          {"lambda", c.lambda},         {"lambda-scale", c.lambda_scale}, {"trials", c.trials},
          {"epochs", c.epochs},         {"m", c.m},                     {"block-size", c.block_size},
          {"ctm-table", c.ctm_table},   {"split-seed", c.split_seed},   {"seed", c.seed},
          {"out", c.out},               {"learning-rate", c.learning_rate}, {"threads", c.threads}};
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open '" + path + "'");
  try {
    return config_from_json(nlohmann::json::parse(is));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config: ") + e.what());
  }
}

struct ResultRow {
  std::string dataset;
  std::string model;
  std::string reg_mode;
  std::string metric;  // AUC, AP (test) or val_AUC, val_AP
  double mean = 0.0;
  double standard_error = 0.0;
  std::vector<double> values;  // per trial, percent
};

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

// Sample standard deviation / sqrt(n); a single value has se 0.
inline MeanSe mean_se(const std::vector<double>& v) {
  MeanSe out;
  if (v.empty()) return out;
  for (double x : v) out.mean += x;
  out.mean /= static_cast<double>(v.size());
  if (v.size() < 2) return out;
  double ss = 0.0;
  for (double x : v) ss += (x - out.mean) * (x - out.mean);
  out.se = std::sqrt(ss / static_cast<double>(v.size() - 1)) / std::sqrt(static_cast<double>(v.size()));
  return out;
}

inline ResultRow make_row(std::string dataset, std::string model, std::string mode, std::string metric,
                          std::vector<double> values) {
  const MeanSe ms = mean_se(values);
  return {std::move(dataset), std::move(model), std::move(mode), std::move(metric), ms.mean, ms.se, std::move(values)};
}

// Seeds for trial t. Initialization and VGAE noise depend only on the trial,
// so every regularization mode starts trial t from the same weights.
inline std::uint64_t trial_init_seed(std::uint64_t base, int trial) {
  return derive_seed(base, static_cast<std::uint64_t>(trial));
}
inline std::uint64_t trial_reg_seed(std::uint64_t base, int trial) {
  return derive_seed(derive_seed(base, static_cast<std::uint64_t>(trial)), 0x5eed);
}

// Runs `trials` independent trainings on a worker pool; result order follows
// the trial index regardless of scheduling.
inline std::vector<TrialResult> run_trials(const GraphData& data, const SplitData& splits, const TrainConfig& base,
                                           const BlockCost* cost, std::uint64_t seed_base, unsigned threads = 0) {
  base.validate();
  std::vector<TrialResult> results(static_cast<std::size_t>(base.trials));
  std::vector<std::exception_ptr> errors(results.size());
  auto run_one = [&](int t) {
    try {
      TrainConfig cfg = base;
      cfg.seed = trial_init_seed(seed_base, t);
      cfg.reg.seed = trial_reg_seed(seed_base, t);
      results[static_cast<std::size_t>(t)] = train(data, splits, cfg, cost);
    } catch (...) {
      errors[static_cast<std::size_t>(t)] = std::current_exception();
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(base.trials));
  if (threads <= 1) {
    for (int t = 0; t < base.trials; ++t) run_one(t);
  } else {
    std::atomic<int> next{0};
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < threads; ++w)
      pool.emplace_back([&] {
        for (int t = next++; t < base.trials; t = next++) run_one(t);
      });
  }
  for (std::size_t t = 0; t < errors.size(); ++t) {
    if (!errors[t]) continue;
    try {
      std::rethrow_exception(errors[t]);
    } catch (const std::exception& e) {
      throw Error("trial " + std::to_string(t) + ": " + e.what());
    }
  }
  return results;
}

inline std::string dataset_name(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

// Everything needed to train on one dataset, loaded once.
struct PreparedExperiment {
  std::string name;
  EdgeList graph;
  SplitData splits;
  GraphData data;
  std::optional<CtmTable> table;
  double cw_constant = 0.0;
};

inline PreparedExperiment prepare(const ExperimentConfig& cfg) {
  cfg.validate();
  PreparedExperiment p;
  p.name = dataset_name(cfg.dataset);
  try {
    p.graph = parse_edge_list(cfg.dataset);
    p.splits = split(p.graph, cfg.split_seed);
  } catch (const std::exception& e) {
    throw Error("dataset " + p.name + ": " + e.what());
  }
  p.data = to_graph_data(p.splits);
  if (cfg.needs_table()) {
    p.table = load_ctm_table(cfg.ctm_table);
    require_2d(*p.table);
    if (p.table->block_side() != cfg.block_size)
      throw DimensionMismatch("CTM table has r=" + std::to_string(p.table->block_side()) + " but block size is " +
                              std::to_string(cfg.block_size));
    p.cw_constant = average_ctm(*p.table);
  }
  return p;
}

inline TrainConfig train_config(const ExperimentConfig& cfg, RegMode mode, double cw_constant) {
  TrainConfig t;
  t.model = cfg.model;
  t.epochs = cfg.epochs;
  t.trials = cfg.trials;
  t.block_size = cfg.block_size;
  t.adam.learning_rate = cfg.learning_rate;
  t.reg.mode = mode;
  t.reg.lambda = mode == RegMode::None ? 0.0 : cfg.effective_lambda();
  t.reg.m = cfg.m;
  t.reg.cw_constant = cw_constant;
  return t;
}

inline std::vector<TrialResult> run_mode(const PreparedExperiment& p, const ExperimentConfig& cfg, RegMode mode) {
  const TrainConfig tc = train_config(cfg, mode, p.cw_constant);
  std::optional<BlockCost> cost;
  if (mode != RegMode::None) cost = block_cost_for(tc.reg, p.table ? &*p.table : nullptr, cfg.block_size);
  try {
    return run_trials(p.data, p.splits, tc, cost ? &*cost : nullptr, cfg.seed, cfg.threads);
  } catch (const std::exception& e) {
    throw Error(p.name + " / " + to_string(mode) + ": " + e.what());
  }
}

inline std::vector<ResultRow> summarize(const std::string& dataset, ModelKind model, RegMode mode,
                                        const std::vector<TrialResult>& trials) {
  std::vector<double> auc_v, ap_v, vauc, vap;
  for (const auto& t : trials) {
    auc_v.push_back(100.0 * t.test_auc());
    ap_v.push_back(100.0 * t.test_ap());
    vauc.push_back(100.0 * t.best_val_auc);
    vap.push_back(100.0 * t.best_val_ap);
  }
  const std::string m = to_string(model), r = to_string(mode);
  return {make_row(dataset, m, r, "AUC", std::move(auc_v)), make_row(dataset, m, r, "AP", std::move(ap_v)),
          make_row(dataset, m, r, "val_AUC", std::move(vauc)), make_row(dataset, m, r, "val_AP", std::move(vap))};
}

// ---- output -----------------------------------------------------------------

inline std::string format_mean_se(double mean, double se) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f \xC2\xB1 %.2f", mean, se);
  return buf;
}

inline std::string csv_text(const std::vector<ResultRow>& rows) {
  std::ostringstream os;
  os << "dataset,model,reg_mode,metric,trial,value,mean,se\n";
  for (const auto& r : rows) {
    const std::string prefix = r.dataset + ',' + r.model + ',' + r.reg_mode + ',' + r.metric + ',';
    for (std::size_t t = 0; t < r.values.size(); ++t)
      os << prefix << t << ',' << detail::format_double(r.values[t]) << ",,\n";
    os << prefix << "all,," << detail::format_double(r.mean) << ',' << detail::format_double(r.standard_error) << '\n';
  }
  return os.str();
}

// Inverse of csv_text.
inline std::vector<ResultRow> parse_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(is, line) || line != "dataset,model,reg_mode,metric,trial,value,mean,se")
    throw ParseError("unexpected CSV header", 1);
  std::vector<ResultRow> rows;
  ResultRow cur;
  auto to_double = [&](const std::string& s) {
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ParseError("bad number '" + s + "'", lineno);
    return v;
  };
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) f.push_back(tok);
    while (f.size() < 8) f.emplace_back();
    if (f.size() != 8) throw ParseError("expected 8 columns", lineno);
    if (f[4] == "all") {
      cur.dataset = f[0];
      cur.model = f[1];
      cur.reg_mode = f[2];
      cur.metric = f[3];
      cur.mean = to_double(f[6]);
      cur.standard_error = to_double(f[7]);
      rows.push_back(std::move(cur));
      cur = ResultRow{};
    } else {
      cur.values.push_back(to_double(f[5]));
    }
  }
  return rows;
}

struct EmittedTable {
  std::string text;
  std::string csv;
};

inline EmittedTable emit_table(const std::vector<ResultRow>& rows) {
  EmittedTable out;
  out.csv = csv_text(rows);
  const std::vector<std::string> head = {"dataset", "model", "reg", "metric", "mean \xC2\xB1 se", "trials"};
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows)
    cells.push_back({r.dataset, r.model, r.reg_mode, r.metric, format_mean_se(r.mean, r.standard_error),
                     std::to_string(r.values.size())});
  // Display width; the +- sign is two bytes but one column.
  auto width = [](const std::string& s) {
    std::size_t w = 0;
    for (unsigned char c : s) w += (c & 0xC0) != 0x80;
    return w;
  };
  std::vector<std::size_t> widths(head.size());
  for (std::size_t c = 0; c < head.size(); ++c) {
    widths[c] = width(head[c]);
    for (const auto& row : cells) widths[c] = std::max(widths[c], width(row[c]));
  }
  std::ostringstream os;
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      os << row[c];
      if (c + 1 < row.size()) os << std::string(widths[c] - width(row[c]) + 2, ' ');
    }
    os << '\n';
  };
  emit(head);
  for (const auto& row : cells) emit(row);
  out.text = os.str();
  return out;
}

inline std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg) {
  const PreparedExperiment p = prepare(cfg);
  std::vector<ResultRow> rows;
  for (RegMode mode : cfg.reg_modes) {
    const auto trials = run_mode(p, cfg, mode);
    const auto r = summarize(p.name, cfg.model, mode, trials);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  if (!cfg.out.empty()) {
    std::ofstream os(cfg.out);
    if (!os) throw Error("cannot open '" + cfg.out + "' for writing");
    os << csv_text(rows);
  }
  return rows;
}

// ---- lambda search ------------------------------------------------------------

using LambdaObjective = std::function<MeanSe(double)>;

// Starts at `start`, probes start*factor and start/factor, and moves to the
// better neighbour while it beats the current value by more than the pooled
// standard error sqrt((se_a^2 + se_b^2) / 2).
inline double lambda_search(double start, const LambdaObjective& objective, double factor = 2.0, int max_rounds = 10,
                            int* rounds_used = nullptr) {
  if (!(factor > 1.0)) throw ConfigError("direction factor must be > 1");
  if (max_rounds < 1) throw ConfigError("max_rounds must be >= 1");
  std::map<double, MeanSe> cache;
  auto eval = [&](double l) {
    auto it = cache.find(l);
    if (it == cache.end()) it = cache.emplace(l, objective(l)).first;
    return it->second;
  };
  double cur = start;
  MeanSe cur_score = eval(cur);
  int round = 0;
  while (round < max_rounds) {
    ++round;
    const double up = cur * factor, down = cur / factor;
    const MeanSe su = eval(up), sd = eval(down);
    const bool up_better = su.mean >= sd.mean;
    const double cand = up_better ? up : down;
    const MeanSe sc = up_better ? su : sd;
    const double pooled = std::sqrt((cur_score.se * cur_score.se + sc.se * sc.se) / 2.0);
    if (sc.mean - cur_score.mean > pooled) {
      cur = cand;
      cur_score = sc;
    } else {
      break;
    }
  }
  if (rounds_used) *rounds_used = round;
  return cur;
}

inline double lambda_start(int n_nodes) {
  if (n_nodes < 1) throw ConfigError("graph has no nodes");
  return 1.0 / (static_cast<double>(n_nodes) * static_cast<double>(n_nodes));
}

// Validation-AUC objective under Kolmogorov regularization, starting from
// lambda_start(N). The returned value is lambda before lambda_scale.
inline double lambda_search(const ExperimentConfig& cfg, double factor = 2.0, int max_rounds = 10) {
  ExperimentConfig c = cfg;
  c.reg_modes = {RegMode::Kolmogorov};
  const PreparedExperiment p = prepare(c);
  return lambda_search(
      lambda_start(p.data.n),
      [&](double lambda) {
        c.lambda = lambda;
        std::vector<double> v;
        for (const auto& t : run_mode(p, c, RegMode::Kolmogorov)) v.push_back(100.0 * t.best_val_auc);
        return mean_se(v);
      },
      factor, max_rounds);
}

}  // namespace kolreg
