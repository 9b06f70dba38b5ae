// Command-line front end: train, eval, suite, plot, gradcheck, oracle.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "mhmarl/checkpoint.hpp"
#include "mhmarl/config.hpp"
#include "mhmarl/harness.hpp"
#include "mhmarl/io_util.hpp"
#include "mhmarl/metrics.hpp"
#include "mhmarl/plot.hpp"
#include "mhmarl/verify/coord_oracle.hpp"
#include "mhmarl/verify/gradcheck.hpp"
#include "mhmarl/verify/straight_line.hpp"

namespace fs = std::filesystem;
using namespace mhmarl;

namespace {

constexpr const char* kMetricsFile = "metrics.csv";
constexpr const char* kCheckpointFile = "final.ckpt";
constexpr const char* kConfigFile = "config.cfg";

struct ConfigFlags {
  std::string algorithm;
  std::string config_path;
  std::vector<std::string> settings;

  void attach(CLI::App* cmd) {
    cmd->add_option("--algorithm", algorithm, "Start from a named preset")
        ->check(CLI::IsMember(preset_names()));
    cmd->add_option("--config", config_path, "Config file (key = value lines)")->check(CLI::ExistingFile);
    cmd->add_option("--set", settings, "Override one field, key=value (repeatable)");
  }

  TrainConfig resolve() const {
    TrainConfig c = algorithm.empty() ? TrainConfig{} : preset(algorithm);
    if (!config_path.empty()) c = load_config(config_path, c);
    for (const auto& s : settings) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + s + "'");
      apply_setting(c, s.substr(0, eq), s.substr(eq + 1));
    }
    c.validate();
    return c;
  }
};

void refuse_existing(const std::vector<fs::path>& outputs, bool overwrite) {
  if (overwrite) return;
  for (const auto& p : outputs) {
    if (fs::exists(p)) throw std::runtime_error(p.string() + " already exists (pass --overwrite to replace it)");
  }
}

std::vector<fs::path> run_outputs(const fs::path& dir) {
  return {dir / kMetricsFile, dir / kCheckpointFile, dir / kConfigFile};
}

void write_run(const fs::path& dir, const RunRecord& record) {
  fs::create_directories(dir);
  TrainConfig snapshot = record.config;
  snapshot.seeds = {record.seed};
  write_file_atomically(dir / kConfigFile, format_config(snapshot));
  save_checkpoint(dir / kCheckpointFile, record.final_parameters);
  write_metrics(record.metrics, dir / kMetricsFile);
}

void print_eval(const EvalResult& e) {
  std::printf("success_rate %s\nmean_return %s\n", format_double(e.success_rate).c_str(),
              format_double(e.mean_return).c_str());
  for (std::size_t i = 0; i < e.agent_returns.size(); ++i) {
    std::printf("agent%zu_return %s\n", i, format_double(e.agent_returns[i]).c_str());
  }
}

int cmd_train(const ConfigFlags& flags, std::optional<std::uint64_t> seed, const fs::path& out, bool overwrite) {
  const TrainConfig config = flags.resolve();
  const std::uint64_t s = seed ? *seed : config.seeds.front();
  refuse_existing(run_outputs(out), overwrite);
  const RunRecord record = train(config, s);
  write_run(out, record);
  std::printf("%s seed %llu: %zu steps in %.1fs, final success_rate %s mean_return %s\n", record.algorithm.c_str(),
              static_cast<unsigned long long>(s), record.env_steps, record.wall_seconds,
              format_double(record.final_eval.success_rate).c_str(),
              format_double(record.final_eval.mean_return).c_str());
  if (record.clamped_actions > 0) std::printf("warning: %zu out-of-bounds actions were clamped\n", record.clamped_actions);
  return 0;
}

int cmd_eval(const fs::path& run, const fs::path& checkpoint_arg, const fs::path& config_arg, std::size_t episodes,
             std::uint64_t seed, const fs::path& trajectory) {
  const fs::path checkpoint = checkpoint_arg.empty() ? run / kCheckpointFile : checkpoint_arg;
  const fs::path config_path = config_arg.empty() ? run / kConfigFile : config_arg;
  if (checkpoint.empty() || !fs::exists(checkpoint)) throw std::runtime_error("missing checkpoint " + checkpoint.string());
  if (!fs::exists(config_path)) throw std::runtime_error("missing config " + config_path.string());
  if (episodes == 0) throw std::invalid_argument("--episodes must be at least 1");

  const TrainConfig config = load_config(config_path);
  auto env = make_environment(config.env, config.n_agents);
  Learner learner(config, env->specs(), seed);
  learner.restore(load_checkpoint(checkpoint));
  Rng rng = make_rng(seed, Stream::evaluation);
  const auto actors = learner.actors();
  print_eval(evaluate(actors, *env, episodes, rng, config.reward_scheme));

  if (!trajectory.empty()) {
    // One noise-free episode, stepped manually so every state is recorded.
    auto copy = env->clone();
    Rng traj_rng = make_rng(seed, Stream::evaluation);
    std::vector<double> obs = copy->reset(traj_rng);
    std::string text = copy->trajectory_header() + "\n";
    for (;;) {
      const StepResult r = copy->step(learner.act(obs));
      text += copy->trajectory_row(r) + "\n";
      obs = r.next_obs;
      if (r.done) break;
    }
    write_file_atomically(trajectory, text);
  }
  return 0;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  TrainConfig scratch;
  apply_setting(scratch, "seeds", text);
  return scratch.seeds;
}

int cmd_suite(const ConfigFlags& flags, const std::vector<std::string>& algorithms, const std::string& seeds,
              const fs::path& out, std::size_t parallel, bool overwrite) {
  std::vector<RunRequest> requests;
  auto add = [&](TrainConfig c) {
    if (!seeds.empty()) c.seeds = parse_seed_list(seeds);
    for (const auto& r : expand_seeds(c)) requests.push_back(r);
  };
  if (algorithms.empty()) {
    add(flags.resolve());
  } else {
    for (const auto& a : algorithms) {
      ConfigFlags f = flags;
      f.algorithm = a;
      add(f.resolve());
    }
  }
  auto dir_of = [&](const RunRequest& r) {
    return out / r.config.algorithm_name() / ("seed_" + std::to_string(r.seed));
  };
  for (const auto& r : requests) refuse_existing(run_outputs(dir_of(r)), overwrite);

  std::size_t failures = 0;
  const auto outcomes = run_suite(requests, parallel, [&](const RunOutcome& o) {
    if (o.ok()) {
      std::printf("done %s seed %llu: success_rate %s mean_return %s (%.1fs)\n", o.algorithm.c_str(),
                  static_cast<unsigned long long>(o.seed), format_double(o.record->final_eval.success_rate).c_str(),
                  format_double(o.record->final_eval.mean_return).c_str(), o.record->wall_seconds);
    } else {
      std::printf("FAILED %s seed %llu: %s\n", o.algorithm.c_str(), static_cast<unsigned long long>(o.seed),
                  o.error.c_str());
    }
    std::fflush(stdout);
  });
  for (std::size_t k = 0; k < outcomes.size(); ++k) {
    if (outcomes[k].ok()) {
      write_run(dir_of(requests[k]), *outcomes[k].record);
    } else {
      ++failures;
    }
  }
  std::printf("%zu of %zu runs completed\n", outcomes.size() - failures, outcomes.size());
  return failures == 0 ? 0 : 1;
}

int cmd_plot(const fs::path& in, const std::string& metric, const std::string& scale_name, fs::path out,
             bool overwrite) {
  const AxisScale scale = parse_axis_scale(scale_name);
  if (!fs::is_directory(in)) throw std::runtime_error(in.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(in)) {
    if (entry.is_regular_file() && entry.path().filename() == kMetricsFile) files.push_back(entry.path());
  }
  if (files.empty()) throw std::runtime_error("no " + std::string(kMetricsFile) + " found under " + in.string());
  std::sort(files.begin(), files.end());
  std::vector<MetricsRow> rows;
  for (const auto& f : files) {
    try {
      auto part = read_metrics(f);
      rows.insert(rows.end(), part.begin(), part.end());
    } catch (const std::exception& e) {
      throw std::runtime_error(f.string() + ": " + e.what());
    }
  }
  if (out.empty()) out = in / (metric + ".svg");
  refuse_existing({out}, overwrite);
  const auto curves = aggregate_curves(rows, metric);
  write_file_atomically(out, render_svg(curves, metric, scale));
  std::printf("wrote %s (%zu curves from %zu files)\n", out.string().c_str(), curves.size(), files.size());
  return 0;
}

int cmd_gradcheck(std::size_t draws, std::uint64_t seed, const std::string& fault) {
  verify::GradCheckOptions options;
  options.draws = draws;
  options.seed = seed;
  if (fault == "tanh") options.fault = PlantedFault::tanh_derivative;
  const auto report = verify::run_gradcheck(options);
  std::fputs(verify::format_report(report).c_str(), stdout);
  return report.passed() ? 0 : 1;
}

int cmd_oracle(std::size_t draws, std::uint64_t seed) {
  const auto grid = verify::run_coordination_oracle();
  std::fputs(verify::format_result(grid).c_str(), stdout);
  const auto losses = verify::run_loss_oracle(draws, seed);
  std::fputs(verify::format_report(losses).c_str(), stdout);
  const bool ok = grid.passed() && losses.passed();
  std::puts(ok ? "oracle passed" : "oracle FAILED");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  keep_heap_resident();
  CLI::App app{"Mutual-help multi-agent RL lab"};
  app.require_subcommand(1);

  ConfigFlags train_flags;
  std::optional<std::uint64_t> train_seed;
  std::string train_out;
  bool train_overwrite = false;
  auto* train_cmd = app.add_subcommand("train", "Train one run; writes metrics.csv, final.ckpt and config.cfg");
  train_flags.attach(train_cmd);
  train_cmd->add_option("--seed", train_seed, "Run seed (default: first entry of `seeds`)");
  train_cmd->add_option("--out", train_out, "Output directory")->required();
  train_cmd->add_flag("--overwrite", train_overwrite, "Replace existing outputs");

  std::string eval_run, eval_ckpt, eval_config, eval_traj;
  std::size_t eval_episodes = 10;
  std::uint64_t eval_seed = 0;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint without exploration noise");
  eval_cmd->add_option("--run", eval_run, "Run directory holding final.ckpt and config.cfg");
  eval_cmd->add_option("--checkpoint", eval_ckpt, "Checkpoint file");
  eval_cmd->add_option("--config", eval_config, "Config file the checkpoint was trained with");
  eval_cmd->add_option("--episodes", eval_episodes, "Evaluation episodes")->capture_default_str();
  eval_cmd->add_option("--seed", eval_seed, "Seed of the evaluation episodes")->capture_default_str();
  eval_cmd->add_option("--trajectory", eval_traj, "Write one episode's trajectory as CSV");

  ConfigFlags suite_flags;
  std::vector<std::string> suite_algorithms;
  std::string suite_seeds, suite_out;
  std::size_t suite_parallel = 1;
  bool suite_overwrite = false;
  auto* suite_cmd = app.add_subcommand("suite", "Train several algorithms and seeds; one directory per run");
  suite_flags.attach(suite_cmd);
  suite_cmd->add_option("--algorithms", suite_algorithms, "Presets to run (comma separated)")
      ->delimiter(',')
      ->check(CLI::IsMember(preset_names()));
  suite_cmd->add_option("--seeds", suite_seeds, "Seeds, e.g. 0,1,2 (default: config `seeds`)");
  suite_cmd->add_option("--out", suite_out, "Output root")->required();
  suite_cmd->add_option("--parallel", suite_parallel, "Concurrent runs")->capture_default_str()->check(CLI::PositiveNumber);
  suite_cmd->add_flag("--overwrite", suite_overwrite, "Replace existing outputs");

  std::string plot_in, plot_metric = "success_rate", plot_scale = "linear", plot_out;
  bool plot_overwrite = false;
  auto* plot_cmd = app.add_subcommand("plot", "Seed-aggregated curves (mean with min/max band) as SVG");
  plot_cmd->add_option("--in", plot_in, "Directory scanned recursively for metrics.csv")->required();
  plot_cmd->add_option("--metric", plot_metric, "Column to plot")->capture_default_str();
  plot_cmd->add_option("--scale", plot_scale, "linear, fifth-root or symlog")->capture_default_str();
  plot_cmd->add_option("--out", plot_out, "SVG path (default: <in>/<metric>.svg)");
  plot_cmd->add_flag("--overwrite", plot_overwrite, "Replace an existing image");

  std::size_t gc_draws = 10;
  std::uint64_t gc_seed = 1;
  std::string gc_fault = "none";
  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every network and loss");
  gc_cmd->add_option("--draws", gc_draws, "Random instantiations per case")->capture_default_str();
  gc_cmd->add_option("--seed", gc_seed, "Seed")->capture_default_str();
  gc_cmd->add_option("--fault", gc_fault, "Plant a wrong derivative rule (none, tanh)")
      ->check(CLI::IsMember({"none", "tanh"}))
      ->capture_default_str();

  std::size_t or_draws = 100;
  std::uint64_t or_seed = 1;
  auto* or_cmd = app.add_subcommand("oracle", "Coordination grid search and straight-line loss comparison");
  or_cmd->add_option("--draws", or_draws, "Random problems")->capture_default_str();
  or_cmd->add_option("--seed", or_seed, "Seed")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) return cmd_train(train_flags, train_seed, train_out, train_overwrite);
    if (*eval_cmd) {
      if (eval_run.empty() && (eval_ckpt.empty() || eval_config.empty())) {
        throw std::invalid_argument("eval needs --run, or both --checkpoint and --config");
      }
      return cmd_eval(eval_run, eval_ckpt, eval_config, eval_episodes, eval_seed, eval_traj);
    }
    if (*suite_cmd) {
      return cmd_suite(suite_flags, suite_algorithms, suite_seeds, suite_out, suite_parallel, suite_overwrite);
    }
    if (*plot_cmd) return cmd_plot(plot_in, plot_metric, plot_scale, plot_out, plot_overwrite);
    if (*gc_cmd) return cmd_gradcheck(gc_draws, gc_seed, gc_fault);
    if (*or_cmd) return cmd_oracle(or_draws, or_seed);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
