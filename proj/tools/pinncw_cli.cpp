// Command-line front end: run benchmark experiments, list presets, evaluate
// checkpoints and export prediction grids.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "pinncw/pinncw.hpp"

namespace {

using namespace pinncw;

int cmd_run(const std::string& config_arg, bool force, long iterations,
            const std::string& seeds) {
  ExperimentConfig cfg = parse_config(resolve_config_path(config_arg));
  if (iterations > 0) cfg.iterations = iterations;
  if (!seeds.empty()) {
    cfg.seeds.clear();
    std::stringstream ss(seeds);
    std::string item;
    while (std::getline(ss, item, ',')) cfg.seeds.push_back(std::stol(item));
  }
  validate_config(cfg);

  std::vector<SeedOutcome> outcomes;
  const bool ok = run_experiment(cfg, force, &outcomes);
  const auto fields = field_names(make_problem(cfg));
  for (const auto& oc : outcomes) {
    std::cout << "seed " << oc.seed << ": " << (oc.ok ? "ok" : "FAILED");
    for (std::size_t f = 0; f < oc.final_metrics.size(); ++f)
      std::cout << "  rel_l2_" << fields[f] << "="
                << format_double(oc.final_metrics[f].rel_l2);
    if (!oc.note.empty()) std::cout << "  (" << oc.note << ")";
    std::cout << "\n";
  }
  std::cout << "outputs in " << cfg.output_dir << "\n";
  return ok ? 0 : 1;
}

int cmd_presets() {
  const auto presets = list_presets(presets_dir());
  if (presets.empty()) {
    std::cerr << "no presets found in '" << presets_dir()
              << "' (set PINNCW_PRESETS)\n";
    return 1;
  }
  for (const auto& p : presets) {
    const ExperimentConfig cfg = parse_config(p.path);
    std::printf("%-28s problem=%-12s scheme=%-8s n_f=%-6ld iterations=%ld\n",
                p.name.c_str(), cfg.problem.c_str(), cfg.scheme.c_str(),
                cfg.n_f, cfg.iterations);
  }
  return 0;
}

// Loads the networks for `problem` given one checkpoint path. For two-network
// problems the sibling checkpoint is located by the field-name suffix
// (final-u.ckpt / final-a.ckpt).
std::pair<std::vector<NetworkConfig>, std::vector<Vec>> load_networks(
    const Problem& prob, const std::string& ckpt_path) {
  const auto fields = field_names(prob);
  std::vector<NetworkConfig> cfgs;
  std::vector<Vec> params;
  if (fields.size() == 1) {
    auto [cfg, p] = load_checkpoint(ckpt_path);
    cfgs.push_back(cfg);
    params.push_back(std::move(p));
    return {cfgs, params};
  }
  const std::string needle = "-" + fields[0] + ".ckpt";
  const auto pos = ckpt_path.rfind(needle);
  check(pos != std::string::npos,
        "eval: pass the '" + fields[0] + "' checkpoint (…-" + fields[0] +
            ".ckpt); siblings are located by field name");
  for (const auto& f : fields) {
    std::string path = ckpt_path;
    path.replace(pos, needle.size(), "-" + f + ".ckpt");
    auto [cfg, p] = load_checkpoint(path);
    cfgs.push_back(cfg);
    params.push_back(std::move(p));
  }
  return {cfgs, params};
}

int cmd_eval(const std::string& ckpt, const std::string& problem_name,
             uint64_t test_seed, long test_points) {
  const Problem prob = make_problem(problem_name, {});
  auto [cfgs, params] = load_networks(prob, ckpt);
  std::visit(
      [&](const auto& p) {
        const TestSet ts = make_test_set(p, (int)test_points, test_seed);
        const auto metrics = evaluate(p, cfgs, params, ts);
        for (int f = 0; f < p.n_fields(); ++f)
          std::printf("%s: rel_l2=%s l_inf=%s\n", p.field_name(f),
                      format_double(metrics[f].rel_l2).c_str(),
                      format_double(metrics[f].l_inf).c_str());
      },
      prob);
  return 0;
}

int cmd_export_grid(const std::string& ckpt, const std::string& problem_name,
                    const std::string& counts_arg, const std::string& out) {
  const Problem prob = make_problem(problem_name, {});
  auto [cfgs, params] = load_networks(prob, ckpt);
  std::vector<int> counts;
  std::stringstream ss(counts_arg);
  std::string item;
  while (std::getline(ss, item, ',')) counts.push_back(std::stoi(item));
  std::visit([&](const auto& p) { export_field_grid(p, cfgs, params, counts, out); },
             prob);
  std::cout << "wrote " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive convolution-weighted PINN training benchmarks"};
  app.require_subcommand(1);

  std::string config_arg, seeds_arg, ckpt, problem_name, counts, out_path;
  bool force = false;
  long iterations = 0, test_points = 90000;
  uint64_t test_seed = 1;

  auto* run = app.add_subcommand("run", "train an experiment config or preset");
  run->add_option("config", config_arg, "config file path or preset name")
      ->required();
  run->add_flag("--force", force, "overwrite an existing output directory");
  run->add_option("--iterations", iterations,
                  "override iteration count (shortened desk runs)");
  run->add_option("--seeds", seeds_arg, "comma-separated seed list override");

  auto* presets = app.add_subcommand("presets", "list built-in presets");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a problem");
  eval->add_option("checkpoint", ckpt, "checkpoint file")->required();
  eval->add_option("problem", problem_name, "problem name")->required();
  eval->add_option("--test-seed", test_seed, "test-set seed stream");
  eval->add_option("--test-points", test_points, "test-set size");

  auto* grid = app.add_subcommand("export-grid",
                                  "export predictions on a regular grid");
  grid->add_option("checkpoint", ckpt, "checkpoint file")->required();
  grid->add_option("problem", problem_name, "problem name")->required();
  grid->add_option("counts", counts, "grid nodes per input dim, e.g. 200,200")
      ->required();
  grid->add_option("--out", out_path, "output CSV path")
      ->default_val("grid.csv");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_arg, force, iterations, seeds_arg);
    if (presets->parsed()) return cmd_presets();
    if (eval->parsed()) return cmd_eval(ckpt, problem_name, test_seed, test_points);
    if (grid->parsed()) return cmd_export_grid(ckpt, problem_name, counts, out_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
