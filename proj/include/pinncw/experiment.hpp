#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "pinncw/common.hpp"
#include "pinncw/metrics.hpp"
#include "pinncw/problems.hpp"
#include "pinncw/trainer.hpp"
#include "pinncw/weighting.hpp"

namespace pinncw {

namespace fs = std::filesystem;

// Full description of one benchmark experiment; mirrors the line-oriented
// `key = value` config format one-to-one. Defaults are per problem (see
// problem_defaults) so a config can be as short as `problem = ...`.
struct ExperimentConfig {
  std::string problem = "heat1d";
  std::string scheme = "cwp";
  std::vector<long> seeds = {1, 2, 3};
  std::string output_dir;  // empty: runs/<problem>-<scheme>

  // sampling
  long n_f = 1000;
  long n_b = 0;  // boundary points (per edge for poisson-inv)
  long n_0 = 0;  // initial-condition points (all presets hard-enforce these)
  long n_obs = 0;
  long test_points = 90000;

  // weighting
  long m = 4;
  double epsilon = 0.01;
  double eta_lambda = 0.001;
  double eta_star = 0.001;
  double sa_lr = 0.01;
  long weight_update_stride = 1;
  long resample_k = 200;

  // optimization
  long iterations = 50000;
  double lr0 = 1.5e-3;
  double decay_factor = 0.8;
  long decay_every = 2000;
  double lr_floor = 0.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  // loss weights / problem options
  double lambda_b = 0.0;
  double lambda_obs = 0.0;
  double obs_noise_var = 0.01;
  long hidden_layers = 0;  // 0: problem default
  long hidden_width = 0;   // 0: problem default
  double kg_t_max = 10.0;
  std::string burgers_constraint = "printed";  // printed | symmetric

  // reporting
  long checkpoint_every = 100;
  long collocation_snapshot_every = 0;
  long weight_snapshot_every = 0;

  bool operator==(const ExperimentConfig&) const = default;
};

inline ExperimentConfig problem_defaults(const std::string& problem) {
  ExperimentConfig c;
  c.problem = problem;
  if (problem == "heat1d") {
    c.n_f = 1000;
    c.iterations = 50000;
    c.lr0 = 1.5e-3;
    c.decay_factor = 0.8;
    c.decay_every = 2000;
  } else if (problem == "kg2d") {
    c.n_f = 1000;
    c.n_b = 300;
    c.lambda_b = 100.0;
    c.iterations = 20000;
    c.lr0 = 5e-3;
    c.decay_factor = 0.8;
    c.decay_every = 1000;
  } else if (problem == "burgers1d") {
    c.n_f = 10000;
    c.iterations = 30000;
    c.lr0 = 5e-3;
    c.decay_factor = 0.7;
    c.decay_every = 1000;
    c.lr_floor = 1e-5;
  } else if (problem == "poisson-inv") {
    c.n_f = 100;
    c.n_b = 10;
    c.n_obs = 60;
    c.lambda_b = 10.0;
    c.lambda_obs = 10.0;
    c.iterations = 20000;
    c.lr0 = 1e-2;
    c.decay_factor = 0.85;
    c.decay_every = 1500;
  } else {
    fail("unknown problem: " + problem);
  }
  return c;
}

// ---- key/value plumbing -----------------------------------------------------

namespace detail_cfg {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline long parse_long(const std::string& v, const std::string& key, int line) {
  try {
    std::size_t pos = 0;
    const long out = std::stol(v, &pos);
    check(pos == v.size(), "");
    return out;
  } catch (...) {
    fail("config line " + std::to_string(line) + ": key '" + key +
         "' expects an integer, got '" + v + "'");
  }
}

inline double parse_double(const std::string& v, const std::string& key,
                           int line) {
  try {
    std::size_t pos = 0;
    const double out = std::stod(v, &pos);
    check(pos == v.size(), "");
    return out;
  } catch (...) {
    fail("config line " + std::to_string(line) + ": key '" + key +
         "' expects a number, got '" + v + "'");
  }
}

inline std::vector<long> parse_long_list(const std::string& v,
                                         const std::string& key, int line) {
  std::vector<long> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_long(item, key, line));
  }
  check(!out.empty(), "config line " + std::to_string(line) + ": key '" + key +
                          "' expects a comma-separated list");
  return out;
}

inline std::string join_longs(const std::vector<long>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

}  // namespace detail_cfg

inline void apply_key(ExperimentConfig& c, const std::string& key,
                      const std::string& value, int line) {
  using namespace detail_cfg;
  auto L = [&] { return parse_long(value, key, line); };
  auto D = [&] { return parse_double(value, key, line); };
  if (key == "problem") c.problem = value;
  else if (key == "scheme") c.scheme = value;
  else if (key == "seeds") c.seeds = parse_long_list(value, key, line);
  else if (key == "output_dir") c.output_dir = value;
  else if (key == "n_f") c.n_f = L();
  else if (key == "n_b") c.n_b = L();
  else if (key == "n_0") c.n_0 = L();
  else if (key == "n_obs") c.n_obs = L();
  else if (key == "test_points") c.test_points = L();
  else if (key == "m") c.m = L();
  else if (key == "epsilon") c.epsilon = D();
  else if (key == "eta_lambda") c.eta_lambda = D();
  else if (key == "eta_star") c.eta_star = D();
  else if (key == "sa_lr") c.sa_lr = D();
  else if (key == "weight_update_stride") c.weight_update_stride = L();
  else if (key == "resample_k") c.resample_k = L();
  else if (key == "iterations") c.iterations = L();
  else if (key == "lr0") c.lr0 = D();
  else if (key == "decay_factor") c.decay_factor = D();
  else if (key == "decay_every") c.decay_every = L();
  else if (key == "lr_floor") c.lr_floor = D();
  else if (key == "adam_beta1") c.adam_beta1 = D();
  else if (key == "adam_beta2") c.adam_beta2 = D();
  else if (key == "adam_eps") c.adam_eps = D();
  else if (key == "lambda_b") c.lambda_b = D();
  else if (key == "lambda_obs") c.lambda_obs = D();
  else if (key == "obs_noise_var") c.obs_noise_var = D();
  else if (key == "hidden_layers") c.hidden_layers = L();
  else if (key == "hidden_width") c.hidden_width = L();
  else if (key == "kg_t_max") c.kg_t_max = D();
  else if (key == "burgers_constraint") c.burgers_constraint = value;
  else if (key == "checkpoint_every") c.checkpoint_every = L();
  else if (key == "collocation_snapshot_every")
    c.collocation_snapshot_every = L();
  else if (key == "weight_snapshot_every") c.weight_snapshot_every = L();
  else
    fail("config line " + std::to_string(line) + ": unknown key '" + key +
         "'");
}

inline void validate_config(const ExperimentConfig& c) {
  (void)parse_scheme(c.scheme);
  check(!c.seeds.empty(), "config: seeds must not be empty");
  check(c.n_f >= 1, "config: n_f must be >= 1");
  check(c.n_0 == 0, "config: n_0 must be 0 (initial conditions are "
                    "hard-enforced for every built-in problem)");
  check(c.test_points >= 1, "config: test_points must be >= 1");
  check(c.m >= 0, "config: m must be >= 0");
  check(c.epsilon > 0.0, "config: epsilon must be > 0");
  check(c.eta_lambda > 0.0 && c.eta_lambda < 1.0,
        "config: eta_lambda must be in (0,1)");
  check(c.eta_star > 0.0, "config: eta_star must be > 0");
  check(c.sa_lr > 0.0, "config: sa_lr must be > 0");
  check(c.weight_update_stride >= 0, "config: weight_update_stride >= 0");
  check(c.resample_k >= 0, "config: resample_k must be >= 0");
  check(c.iterations >= 1, "config: iterations must be >= 1");
  check(c.lr0 > 0.0, "config: lr0 must be > 0");
  check(c.decay_factor > 0.0 && c.decay_factor <= 1.0,
        "config: decay_factor must be in (0,1]");
  check(c.decay_every >= 1, "config: decay_every must be >= 1");
  check(c.lr_floor >= 0.0, "config: lr_floor must be >= 0");
  check(c.checkpoint_every >= 1, "config: checkpoint_every must be >= 1");
  check(c.hidden_layers >= 0 && c.hidden_width >= 0,
        "config: network overrides must be >= 0");
  check(c.obs_noise_var >= 0.0, "config: obs_noise_var must be >= 0");
  check(c.burgers_constraint == "printed" ||
            c.burgers_constraint == "symmetric",
        "config: burgers_constraint must be 'printed' or 'symmetric'");
  check(c.kg_t_max > 0.0, "config: kg_t_max must be > 0");

  if (c.problem == "heat1d" || c.problem == "burgers1d") {
    check(c.n_b == 0 && c.n_obs == 0,
          "config: " + c.problem + " has no boundary/observation loss terms");
  } else if (c.problem == "kg2d") {
    check(c.n_b >= 1, "config: kg2d requires n_b >= 1");
    check(c.n_obs == 0, "config: kg2d has no observation loss");
  } else if (c.problem == "poisson-inv") {
    check(c.n_b >= 1, "config: poisson-inv requires n_b >= 1 (per edge)");
    check(c.n_obs >= 1, "config: poisson-inv requires n_obs >= 1");
  } else {
    fail("config: unknown problem '" + c.problem + "'");
  }
}

// Line-oriented `key = value` text, UTF-8, `#` starts a comment. Missing keys
// take the per-problem defaults; unknown keys are rejected with the offending
// line number.
inline ExperimentConfig parse_config_text(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::vector<int> lines;
  std::stringstream ss(text);
  std::string raw;
  int line_no = 0;
  std::string problem_name;
  while (std::getline(ss, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw = raw.substr(0, hash);
    const std::string s = detail_cfg::trim(raw);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    check(eq != std::string::npos, "config line " + std::to_string(line_no) +
                                       ": expected 'key = value'");
    const std::string key = detail_cfg::trim(s.substr(0, eq));
    const std::string value = detail_cfg::trim(s.substr(eq + 1));
    check(!key.empty(), "config line " + std::to_string(line_no) +
                            ": empty key");
    if (key == "problem") problem_name = value;
    entries.emplace_back(key, value);
    lines.push_back(line_no);
  }
  check(!problem_name.empty(), "config: missing required key 'problem'");
  ExperimentConfig cfg = problem_defaults(problem_name);
  for (std::size_t i = 0; i < entries.size(); ++i)
    apply_key(cfg, entries[i].first, entries[i].second, lines[i]);
  if (cfg.output_dir.empty())
    cfg.output_dir = "runs/" + cfg.problem + "-" + cfg.scheme;
  validate_config(cfg);
  return cfg;
}

inline ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "config: cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

// Canonical serialization; parse_config_text(emit_config(c)) == c.
inline std::string emit_config(const ExperimentConfig& c) {
  std::ostringstream o;
  o << "problem = " << c.problem << "\n";
  o << "scheme = " << c.scheme << "\n";
  o << "seeds = " << detail_cfg::join_longs(c.seeds) << "\n";
  o << "output_dir = " << c.output_dir << "\n";
  o << "n_f = " << c.n_f << "\n";
  o << "n_b = " << c.n_b << "\n";
  o << "n_0 = " << c.n_0 << "\n";
  o << "n_obs = " << c.n_obs << "\n";
  o << "test_points = " << c.test_points << "\n";
  o << "m = " << c.m << "\n";
  o << "epsilon = " << format_double(c.epsilon) << "\n";
  o << "eta_lambda = " << format_double(c.eta_lambda) << "\n";
  o << "eta_star = " << format_double(c.eta_star) << "\n";
  o << "sa_lr = " << format_double(c.sa_lr) << "\n";
  o << "weight_update_stride = " << c.weight_update_stride << "\n";
  o << "resample_k = " << c.resample_k << "\n";
  o << "iterations = " << c.iterations << "\n";
  o << "lr0 = " << format_double(c.lr0) << "\n";
  o << "decay_factor = " << format_double(c.decay_factor) << "\n";
  o << "decay_every = " << c.decay_every << "\n";
  o << "lr_floor = " << format_double(c.lr_floor) << "\n";
  o << "adam_beta1 = " << format_double(c.adam_beta1) << "\n";
  o << "adam_beta2 = " << format_double(c.adam_beta2) << "\n";
  o << "adam_eps = " << format_double(c.adam_eps) << "\n";
  o << "lambda_b = " << format_double(c.lambda_b) << "\n";
  o << "lambda_obs = " << format_double(c.lambda_obs) << "\n";
  o << "obs_noise_var = " << format_double(c.obs_noise_var) << "\n";
  o << "hidden_layers = " << c.hidden_layers << "\n";
  o << "hidden_width = " << c.hidden_width << "\n";
  o << "kg_t_max = " << format_double(c.kg_t_max) << "\n";
  o << "burgers_constraint = " << c.burgers_constraint << "\n";
  o << "checkpoint_every = " << c.checkpoint_every << "\n";
  o << "collocation_snapshot_every = " << c.collocation_snapshot_every << "\n";
  o << "weight_snapshot_every = " << c.weight_snapshot_every << "\n";
  return o.str();
}

// ---- runtime assembly --------------------------------------------------------

inline Problem make_problem(const ExperimentConfig& c) {
  ProblemOptions opt;
  opt.kg_t_max = c.kg_t_max;
  opt.burgers_symmetric_constraint = c.burgers_constraint == "symmetric";
  return make_problem(c.problem, opt);
}

inline std::vector<NetworkConfig> make_nets(const ExperimentConfig& c) {
  const Problem prob = make_problem(c);
  return std::visit(
      [&](const auto& p) {
        std::vector<NetworkConfig> nets;
        for (int i = 0; i < std::decay_t<decltype(p)>::kNets; ++i) {
          NetworkConfig net = p.default_net(i);
          if (c.hidden_layers > 0) net.hidden_layers = (int)c.hidden_layers;
          if (c.hidden_width > 0) net.hidden_width = (int)c.hidden_width;
          nets.push_back(net);
        }
        return nets;
      },
      prob);
}

inline WeightConfig make_weight_config(const ExperimentConfig& c) {
  WeightConfig w;
  w.scheme = parse_scheme(c.scheme);
  w.eta_lambda = c.eta_lambda;
  w.eta_star = c.eta_star;
  w.neighbors = (int)c.m;
  w.epsilon = c.epsilon;
  w.sa_lr = c.sa_lr;
  return w;
}

inline TrainConfig make_train_config(const ExperimentConfig& c) {
  TrainConfig t;
  t.iterations = c.iterations;
  t.lr = {c.lr0, c.decay_factor, c.decay_every, c.lr_floor};
  t.adam = {c.adam_beta1, c.adam_beta2, c.adam_eps};
  t.weight_update_stride = c.weight_update_stride;
  t.resample_every = c.resample_k;
  t.checkpoint_every = c.checkpoint_every;
  t.collocation_snapshot_every = c.collocation_snapshot_every;
  t.weight_snapshot_every = c.weight_snapshot_every;
  return t;
}

inline SamplingConfig make_sampling_config(const ExperimentConfig& c) {
  SamplingConfig s;
  s.n_f = (int)c.n_f;
  s.test_points = (int)c.test_points;
  s.fixed.n_boundary = (int)c.n_b;
  s.fixed.n_observations = (int)c.n_obs;
  s.fixed.lambda_boundary = c.lambda_b;
  s.fixed.lambda_observation = c.lambda_obs;
  s.fixed.observation_noise_var = c.obs_noise_var;
  return s;
}

// ---- artifact writers ----------------------------------------------------------

inline std::vector<std::string> field_names(const Problem& prob) {
  return std::visit(
      [](const auto& p) {
        std::vector<std::string> names;
        for (int f = 0; f < p.n_fields(); ++f) names.push_back(p.field_name(f));
        return names;
      },
      prob);
}

inline std::vector<std::string> coord_name_list(const Problem& prob) {
  return std::visit(
      [](const auto& p) {
        std::vector<std::string> names;
        for (const char* n : p.coord_names()) names.push_back(n);
        return names;
      },
      prob);
}

// history.csv holds only run-deterministic columns; wall times go to
// timing.csv so that identical (config, seed) runs are byte-identical here.
inline void write_history_csv(const std::string& path,
                              const std::vector<TrainingRecord>& records,
                              const std::vector<std::string>& fields) {
  std::ofstream out(path);
  check(out.good(), "write_history_csv: cannot open " + path);
  out << "iteration,loss_total,loss_residual,loss_fixed";
  for (const auto& f : fields) {
    const std::string sfx = fields.size() > 1 ? "_" + f : "";
    out << ",rel_l2" << sfx << ",l_inf" << sfx;
  }
  out << ",lr\n";
  for (const auto& r : records) {
    out << r.iteration << "," << format_double(r.loss_total) << ","
        << format_double(r.loss_residual) << "," << format_double(r.loss_fixed);
    for (const auto& fm : r.fields)
      out << "," << format_double(fm.rel_l2) << "," << format_double(fm.l_inf);
    out << "," << format_double(r.lr) << "\n";
  }
  check(out.good(), "write_history_csv: write failed for " + path);
}

inline void write_timing_csv(const std::string& path,
                             const std::vector<TrainingRecord>& records) {
  std::ofstream out(path);
  check(out.good(), "write_timing_csv: cannot open " + path);
  out << "iteration,wall_ms\n";
  for (const auto& r : records)
    out << r.iteration << "," << format_double(r.wall_ms) << "\n";
}

inline void write_collocation_csv(const std::string& path,
                                  const std::vector<std::pair<long, Mat>>& snaps,
                                  const std::vector<std::string>& coords) {
  std::ofstream out(path);
  check(out.good(), "write_collocation_csv: cannot open " + path);
  out << "iter,index";
  for (const auto& c : coords) out << "," << c;
  out << "\n";
  for (const auto& [iter, pts] : snaps)
    for (long i = 0; i < pts.cols(); ++i) {
      out << iter << "," << i;
      for (long k = 0; k < pts.rows(); ++k)
        out << "," << format_double(pts(k, i));
      out << "\n";
    }
}

inline void write_weights_csv(const std::string& path,
                              const WeightSnapshot& snap,
                              const std::vector<std::string>& coords) {
  std::ofstream out(path);
  check(out.good(), "write_weights_csv: cannot open " + path);
  out << "index";
  for (const auto& c : coords) out << "," << c;
  out << ",lambda\n";
  for (long i = 0; i < snap.points.cols(); ++i) {
    out << i;
    for (long k = 0; k < snap.points.rows(); ++k)
      out << "," << format_double(snap.points(k, i));
    out << "," << format_double(snap.lambdas[i]) << "\n";
  }
}

// ---- per-seed run + cross-seed index -------------------------------------------

struct SeedOutcome {
  long seed = 0;
  bool ok = false;
  std::string note;
  std::vector<FieldMetrics> final_metrics;
  double total_wall_ms = 0.0;
};

inline void write_run_artifacts(const fs::path& dir, const Problem& prob,
                                const ExperimentConfig& cfg, long seed,
                                const TrainResult& result) {
  fs::create_directories(dir);
  const auto fields = field_names(prob);
  const auto coords = coord_name_list(prob);
  write_history_csv((dir / "history.csv").string(), result.history, fields);
  write_timing_csv((dir / "timing.csv").string(), result.history);
  if (!result.colloc_snapshots.empty())
    write_collocation_csv((dir / "collocation.csv").string(),
                          result.colloc_snapshots, coords);
  for (const auto& snap : result.weight_snapshots)
    write_weights_csv(
        (dir / ("weights-" + std::to_string(snap.iteration) + ".csv")).string(),
        snap, coords);

  {
    std::ofstream out(dir / "config.cfg");
    out << emit_config(cfg);
  }

  for (std::size_t i = 0; i < result.params.size(); ++i) {
    const std::string name =
        "final-" + std::string(fields.size() > i ? fields[i] : "net") + ".ckpt";
    save_checkpoint((dir / name).string(), result.nets[i], result.params[i]);
  }
  {
    std::ofstream meta(dir / "final-meta.txt");
    meta << "scheme = " << cfg.scheme << "\n";
    meta << "iteration = " << result.iterations_run << "\n";
    meta << "seed = " << seed << "\n";
    for (std::size_t i = 0; i < result.params.size(); ++i)
      meta << "stream_param_init_" << i << " = "
           << derive_seed(seed, Stream::ParamInit, i) << "\n";
    meta << "stream_collocation = " << derive_seed(seed, Stream::Collocation)
         << "\n";
    meta << "stream_neighbors = " << derive_seed(seed, Stream::Neighbors)
         << "\n";
    meta << "stream_noise = " << derive_seed(seed, Stream::Noise) << "\n";
    meta << "stream_test = " << derive_seed(seed, Stream::TestSet) << "\n";
    meta << "stream_boundary = " << derive_seed(seed, Stream::Boundary) << "\n";
    meta << "stream_observation = "
         << derive_seed(seed, Stream::Observation) << "\n";
  }

  nlohmann::json summary;
  summary["problem"] = cfg.problem;
  summary["scheme"] = cfg.scheme;
  summary["seed"] = seed;
  summary["iterations_run"] = result.iterations_run;
  summary["diverged"] = result.diverged;
  if (result.diverged) summary["divergence_note"] = result.divergence_note;
  summary["degenerate_weight_updates"] = result.degenerate_weight_updates;
  summary["total_wall_ms"] = result.total_wall_ms;
  if (!result.history.empty()) {
    const auto& fin = result.final_record();
    for (std::size_t f = 0; f < fields.size(); ++f) {
      summary["final"]["rel_l2_" + fields[f]] = fin.fields[f].rel_l2;
      summary["final"]["l_inf_" + fields[f]] = fin.fields[f].l_inf;
    }
    summary["final"]["loss_total"] = fin.loss_total;
  }
  std::ofstream sout(dir / "summary.json");
  sout << summary.dump(2) << "\n";
}

inline int env_thread_count() {
  if (const char* env = std::getenv("PINNCW_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : (int)hw;
}

// Runs every seed (in parallel processes-worth of threads; each run owns its
// directory and shares no mutable state), then writes the cross-seed index
// with per-seed finals and their minimum. Returns true iff all seeds
// completed with finite final metrics.
inline bool run_experiment(const ExperimentConfig& cfg, bool force,
                           std::vector<SeedOutcome>* outcomes_out = nullptr) {
  validate_config(cfg);
  const fs::path out_dir(cfg.output_dir);
  if (fs::exists(out_dir) && !force)
    fail("output directory '" + cfg.output_dir +
         "' already exists (pass --force to overwrite)");
  fs::create_directories(out_dir);

  const Problem prob = make_problem(cfg);
  const auto nets = make_nets(cfg);
  const auto wcfg = make_weight_config(cfg);
  const auto tcfg = make_train_config(cfg);
  const auto scfg = make_sampling_config(cfg);

  std::vector<SeedOutcome> outcomes(cfg.seeds.size());
  std::atomic<std::size_t> next{0};
  const int pool = std::min<int>(env_thread_count(), (int)cfg.seeds.size());
  auto worker = [&] {
    for (;;) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= cfg.seeds.size()) return;
      const long seed = cfg.seeds[idx];
      SeedOutcome& oc = outcomes[idx];
      oc.seed = seed;
      try {
        TrainResult result =
            train(prob, nets, wcfg, tcfg, scfg, (uint64_t)seed);
        write_run_artifacts(out_dir / ("seed-" + std::to_string(seed)), prob,
                            cfg, seed, result);
        oc.final_metrics = result.final_record().fields;
        oc.total_wall_ms = result.total_wall_ms;
        bool finite = !result.diverged;
        for (const auto& fm : oc.final_metrics)
          finite = finite && std::isfinite(fm.rel_l2) && std::isfinite(fm.l_inf);
        oc.ok = finite;
        if (result.diverged) oc.note = result.divergence_note;
      } catch (const std::exception& e) {
        oc.ok = false;
        oc.note = e.what();
      }
    }
  };
  std::vector<std::thread> threads;
  for (int i = 0; i < pool; ++i) threads.emplace_back(worker);
  for (auto& t : threads) t.join();

  const auto fields = field_names(prob);
  nlohmann::json index;
  index["problem"] = cfg.problem;
  index["scheme"] = cfg.scheme;
  bool all_ok = true;
  for (const auto& oc : outcomes) {
    nlohmann::json row;
    row["seed"] = oc.seed;
    row["ok"] = oc.ok;
    if (!oc.note.empty()) row["note"] = oc.note;
    for (std::size_t f = 0; f < oc.final_metrics.size(); ++f) {
      row["rel_l2_" + fields[f]] = oc.final_metrics[f].rel_l2;
      row["l_inf_" + fields[f]] = oc.final_metrics[f].l_inf;
    }
    index["seeds"].push_back(row);
    all_ok = all_ok && oc.ok;
  }
  if (all_ok) {
    for (std::size_t f = 0; f < fields.size(); ++f) {
      double best_l2 = std::numeric_limits<double>::infinity();
      double best_linf = std::numeric_limits<double>::infinity();
      for (const auto& oc : outcomes) {
        best_l2 = std::min(best_l2, oc.final_metrics[f].rel_l2);
        best_linf = std::min(best_linf, oc.final_metrics[f].l_inf);
      }
      index["best"]["rel_l2_" + fields[f]] = best_l2;
      index["best"]["l_inf_" + fields[f]] = best_linf;
    }
  }
  std::ofstream iout(out_dir / "index.json");
  iout << index.dump(2) << "\n";

  if (outcomes_out) *outcomes_out = outcomes;
  return all_ok;
}

// ---- presets -------------------------------------------------------------------

inline std::string presets_dir() {
  if (const char* env = std::getenv("PINNCW_PRESETS")) return env;
#ifdef PINNCW_PRESET_DIR
  return PINNCW_PRESET_DIR;
#else
  return "presets";
#endif
}

struct PresetInfo {
  std::string name;
  std::string path;
};

inline std::vector<PresetInfo> list_presets(const std::string& dir) {
  std::vector<PresetInfo> out;
  if (!fs::exists(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".cfg")
      continue;
    out.push_back({entry.path().stem().string(), entry.path().string()});
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.name < b.name; });
  return out;
}

// `run <config>` accepts either a config file path or a preset name.
inline std::string resolve_config_path(const std::string& arg) {
  if (fs::exists(arg)) return arg;
  const fs::path preset = fs::path(presets_dir()) / (arg + ".cfg");
  if (fs::exists(preset)) return preset.string();
  fail("config '" + arg + "' is neither a file nor a preset name");
}

}  // namespace pinncw
