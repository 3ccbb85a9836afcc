// kolreg: command-line front end for CTM table generation, BDM evaluation and
// the regularized link-prediction experiments.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "kolreg/kolreg.hpp"

namespace {

struct RunFlags {
  std::string config;
  std::string reg = "none";
  std::string model = "gae";
  kolreg::ExperimentConfig cfg;
};

void add_experiment_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--config", f.config, "JSON config file (keys match the flag names); flags override it");
  cmd->add_option("--dataset", f.cfg.dataset, "Edge-list file");
  cmd->add_option("--model", f.model, "gae or vgae")->check(CLI::IsMember({"gae", "vgae"}));
  cmd->add_option("--reg", f.reg, "Comma-separated regularization modes: none, kol, cw");
  cmd->add_option("--lambda", f.cfg.lambda, "Regularization weight");
  cmd->add_option("--lambda-scale", f.cfg.lambda_scale, "Multiplier applied to --lambda");
  cmd->add_option("--trials", f.cfg.trials, "Trials per mode");
  cmd->add_option("--epochs", f.cfg.epochs, "Epochs per trial");
  cmd->add_option("--m", f.cfg.m, "Gradient samples per epoch");
  cmd->add_option("--block-size", f.cfg.block_size, "BDM block side R");
  cmd->add_option("--ctm-table", f.cfg.ctm_table, "CTM table file");
  cmd->add_option("--split-seed", f.cfg.split_seed, "Seed of the train/val/test split");
  cmd->add_option("--seed", f.cfg.seed, "Base seed of the trial initializations");
  cmd->add_option("--out", f.cfg.out, "CSV output path");
  cmd->add_option("--learning-rate", f.cfg.learning_rate, "Adam learning rate");
  cmd->add_option("--threads", f.cfg.threads, "Worker threads for trials (0 = all cores)");
}

// Config file first, then any flag given explicitly on the command line.
kolreg::ExperimentConfig resolve(CLI::App* cmd, const RunFlags& f) {
  kolreg::ExperimentConfig c = f.config.empty() ? kolreg::ExperimentConfig{} : kolreg::load_config(f.config);
  auto given = [&](const char* name) { return cmd->count(name) > 0; };
  if (given("--dataset")) c.dataset = f.cfg.dataset;
  if (given("--model")) c.model = kolreg::parse_model_kind(f.model);
  if (given("--reg")) c.reg_modes = kolreg::parse_reg_modes(f.reg);
  if (given("--lambda")) c.lambda = f.cfg.lambda;
  if (given("--lambda-scale")) c.lambda_scale = f.cfg.lambda_scale;
  if (given("--trials")) c.trials = f.cfg.trials;
  if (given("--epochs")) c.epochs = f.cfg.epochs;
  if (given("--m")) c.m = f.cfg.m;
  if (given("--block-size")) c.block_size = f.cfg.block_size;
  if (given("--ctm-table")) c.ctm_table = f.cfg.ctm_table;
  if (given("--split-seed")) c.split_seed = f.cfg.split_seed;
  if (given("--seed")) c.seed = f.cfg.seed;
  if (given("--out")) c.out = f.cfg.out;
  if (given("--learning-rate")) c.learning_rate = f.cfg.learning_rate;
  if (given("--threads")) c.threads = f.cfg.threads;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Complexity-regularized link prediction"};
  app.require_subcommand(1);

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "Train and evaluate over several trials per regularization mode");
  add_experiment_flags(run, run_flags);

  RunFlags search_flags;
  double factor = 2.0;
  int max_rounds = 10;
  auto* search = app.add_subcommand("lambda-search", "Search lambda on validation AUC, starting at 1/N^2");
  add_experiment_flags(search, search_flags);
  search->add_option("--factor", factor, "Multiplicative step (> 1)");
  search->add_option("--max-rounds", max_rounds, "Maximum search rounds");

  int states = 2;
  int dim = 1;
  int block_side = 4;
  std::uint64_t step_limit = 0;
  std::string table_out;
  unsigned enum_threads = 0;
  auto* build = app.add_subcommand("ctm-build", "Enumerate (n,2) machines and write a CTM table");
  build->add_option("--states", states, "Number of states n")->required();
  build->add_option("--dim", dim, "Tape dimension (1 or 2)")->check(CLI::IsMember({1, 2}));
  build->add_option("--block-size", block_side, "Output length (1D) or square side (2D) to tabulate");
  build->add_option("--step-limit", step_limit, "Step limit (default depends on n)");
  build->add_option("--threads", enum_threads, "Worker threads (0 = all cores)");
  build->add_option("--out", table_out, "Output table path")->required();

  std::string info_table;
  auto* info = app.add_subcommand("ctm-info", "Summarize a CTM table");
  info->add_option("--table", info_table, "Table path")->required();

  std::string bdm_table, bdm_edges;
  auto* bdm_cmd = app.add_subcommand("bdm", "BDM of a graph's adjacency matrix");
  bdm_cmd->add_option("--ctm-table", bdm_table, "2D CTM table")->required();
  bdm_cmd->add_option("--dataset", bdm_edges, "Edge-list file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      const auto cfg = resolve(run, run_flags);
      const auto rows = kolreg::run_experiment(cfg);
      std::cout << kolreg::emit_table(rows).text;
      if (!cfg.out.empty()) std::cout << "wrote " << cfg.out << '\n';
    } else if (search->parsed()) {
      const auto cfg = resolve(search, search_flags);
      const double lambda = kolreg::lambda_search(cfg, factor, max_rounds);
      std::printf("lambda = %.6g\n", lambda);
    } else if (build->parsed()) {
      const std::uint64_t limit = step_limit ? step_limit : kolreg::default_step_limit(states);
      if (states >= 4 && dim == 1) std::cerr << "note: n=" << states << " enumeration is long-running\n";
      const auto dist = kolreg::enumerate_distribution(states, limit, dim, enum_threads);
      const auto table = kolreg::table_from_distribution(dist, block_side);
      kolreg::save_ctm_table(table, table_out);
      std::printf("machines %llu, halting %llu, longest run %llu steps, %zu blocks written to %s\n",
                  static_cast<unsigned long long>(dist.machines), static_cast<unsigned long long>(dist.halting),
                  static_cast<unsigned long long>(dist.max_steps), table.size(), table_out.c_str());
    } else if (info->parsed()) {
      const auto table = kolreg::load_ctm_table(info_table);
      double lo = table.max_value();
      for (const auto& [k, v] : table.entries()) lo = std::min(lo, v);
      std::printf("r=%d dim=%d entries=%zu min=%.6f max=%.6f mean=%.6f\n", table.block_side(), table.dimension(),
                  table.size(), lo, table.max_value(), kolreg::average_ctm(table));
    } else if (bdm_cmd->parsed()) {
      const auto table = kolreg::load_ctm_table(bdm_table);
      const auto g = kolreg::parse_edge_list(bdm_edges);
      const auto a = kolreg::adjacency(g.node_count, g.edges);
      std::printf("nodes %d, edges %zu, BDM %.6f bits\n", g.node_count, g.edges.size(), kolreg::bdm(a, table));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
