#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "locoforge/config.hpp"
#include "locoforge/eval.hpp"
#include "locoforge/ppo.hpp"

namespace fs = std::filesystem;
using namespace locoforge;

namespace {

// precedence: --seed flag, then LOCOFORGE_SEED, then the config file
std::uint64_t effective_seed(const std::optional<std::uint64_t>& flag,
                             std::uint64_t config_seed) {
  if (flag) return *flag;
  if (const char* env = std::getenv("LOCOFORGE_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end && *end == '\0') return v;
    throw std::runtime_error("LOCOFORGE_SEED is not a valid integer");
  }
  return config_seed;
}

Env make_env(const RunConfig& cfg, const DemoTrajectory& demo) {
  return Env(cfg.model, cfg.gains, cfg.ground, cfg.rewards, demo, cfg.env);
}

int cmd_demo_gen(const std::string& task_str, double apex, double stance_depth,
                 double amplitude, double hop_height, double period, double dt,
                 const std::string& out) {
  const Task task = parse_task(task_str);
  PlanarModel model;
  const DemoTrajectory demo =
      task == Task::Hopping
          ? synthesize_hop_demo(apex, stance_depth, period, dt, model)
          : synthesize_bound_demo(amplitude, hop_height, period, dt, model);
  save_demo(demo, out);
  std::printf("wrote %s (%d frames, task=%s, dt=%g)\n", out.c_str(), demo.frame_count(),
              task_name(demo.task).c_str(), demo.dt);
  return 0;
}

int cmd_train(const std::string& config_path, int stage,
              const std::string& from_checkpoint, std::optional<std::uint64_t> seed,
              const std::string& out_dir_flag, int workers, bool resume) {
  RunConfig cfg = load_run_config(config_path);
  cfg.env.stage = stage;
  cfg.seed = effective_seed(seed, cfg.seed);
  cfg.ppo.seed = cfg.seed;
  if (!out_dir_flag.empty()) cfg.out_dir = out_dir_flag;
  cfg.validate();

  const DemoTrajectory demo = resolve_demo(cfg.demo, cfg.model);

  TrainStageOptions opt;
  opt.task = cfg.env.task;
  opt.stage = stage;
  opt.model = cfg.model;
  opt.gains = cfg.gains;
  opt.ground = cfg.ground;
  opt.weights = cfg.rewards;
  opt.demo = demo;
  opt.env_config = cfg.env;
  opt.ppo = cfg.ppo;
  opt.out_dir = cfg.out_dir;
  opt.workers = workers;
  opt.resume = resume;
  if (!from_checkpoint.empty()) opt.initial_params = load_policy(from_checkpoint);

  write_manifest(cfg.out_dir, cfg, "train");
  save_run_config(cfg, cfg.out_dir + "/config_used.json");

  const TrainResult result = train_stage(opt);
  std::printf("trained stage %d for %d updates; final checkpoint: %s\n", stage,
              result.updates_run, result.final_checkpoint.c_str());
  return 0;
}

int cmd_eval_drop(const RunConfig& cfg, const PolicyParams& params,
                  const std::vector<double>& conditions, int horizon,
                  std::uint64_t seed, const std::string& out_dir, bool angles) {
  DemoTrajectory demo = resolve_demo(cfg.demo, cfg.model);
  Env env = make_env(cfg, demo);

  DropTestSpec spec;
  spec.conditions = conditions;
  spec.horizon = horizon;
  spec.seed = seed;
  spec.apex_tolerance = angles ? 0.05 : 0.01;

  const auto results = drop_test(params, spec, env);
  fs::create_directories(out_dir);
  std::string summary_path = out_dir + (angles ? "/angle_test.csv" : "/drop_test.csv");
  std::ofstream os(summary_path);
  os << "condition,survived,cycles,convergence_index,steady_value,steady_amplitude,"
        "peak_force_estimate\n";
  for (size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%.17g,%d,%zu,%d,%.17g,%.17g,%.17g\n", r.condition,
                  r.survived ? 1 : 0, r.metrics.peaks.size(), r.metrics.convergence_index,
                  r.metrics.steady_value, r.metrics.steady_amplitude,
                  r.metrics.peak_force_estimate);
    os << buf;
    char trace_name[64];
    std::snprintf(trace_name, sizeof(trace_name), "/trace_%02zu.csv", i);
    write_trace_csv(r.trace, out_dir + trace_name);
    std::printf("condition %+.3f: %s, %zu cycles, convergence at %d, steady %.4f\n",
                r.condition, r.survived ? "survived" : "terminated",
                r.metrics.peaks.size(), r.metrics.convergence_index,
                r.metrics.steady_value);
  }
  std::printf("wrote %s\n", summary_path.c_str());
  return 0;
}

int cmd_eval_sweep(const RunConfig& cfg, const PolicyParams& params,
                   const std::vector<double>& heights, const std::vector<double>& frictions,
                   int episodes, std::uint64_t seed, const std::string& out_dir) {
  DemoTrajectory demo = resolve_demo(cfg.demo, cfg.model);
  Env env = make_env(cfg, demo);
  const auto cells = robustness_sweep(params, env, heights, frictions, episodes, seed);
  fs::create_directories(out_dir);
  write_sweep_csv(cells, out_dir + "/sweep.csv");
  double total = 0.0;
  for (const auto& c : cells) {
    std::printf("height %+.3f friction %.2f: survival %.2f mean return %.2f\n",
                c.ground_height, c.friction, c.survival_rate, c.mean_return);
    total += c.survival_rate;
  }
  std::printf("mean survival %.3f; wrote %s/sweep.csv\n", total / cells.size(),
              out_dir.c_str());
  return 0;
}

int cmd_eval_replay(const RunConfig& cfg, const std::string& trace_path,
                    double tolerance) {
  DemoTrajectory demo = resolve_demo(cfg.demo, cfg.model);
  const auto trace = read_trace_csv(trace_path);
  if (trace.size() < 2) throw std::runtime_error("replay: trace has no steps");

  double worst = 0.0;
  for (size_t i = 1; i < trace.size(); ++i) {
    StepContext ctx;
    ctx.state = trace[i - 1].state;
    ctx.next_state = trace[i].state;
    ctx.action = trace[i].action;
    ctx.torque = trace[i].torque;
    ctx.prev_torque = i == 1 ? trace[i].torque : trace[i - 1].torque;
    for (int f = 0; f < kNumFeet; ++f) {
      ctx.contact.feet[f].in_contact = trace[i].contact_flags[f];
      ctx.contact.feet[f].force = trace[i].contact_forces[f];
    }
    ctx.demo = &demo;
    ctx.demo_index = trace[i].demo_index;

    const RewardBreakdown got =
        reward_breakdown(ctx, cfg.rewards, cfg.env.task, cfg.env.stage);
    const RewardBreakdown& logged = trace[i].breakdown;
    worst = std::max({worst, std::abs(got.tt - logged.tt), std::abs(got.ti - logged.ti),
                      std::abs(got.hp - logged.hp), std::abs(got.ps - logged.ps),
                      std::abs(got.ct - logged.ct), std::abs(got.ts - logged.ts),
                      std::abs(got.bn - logged.bn), std::abs(got.cc - logged.cc),
                      std::abs(got.total - logged.total)});
  }
  std::printf("replay: %zu steps, max per-term deviation %.3g (tolerance %.3g)\n",
              trace.size() - 1, worst, tolerance);
  if (worst > tolerance) {
    std::fprintf(stderr, "replay: recomputed rewards deviate from the log\n");
    return 1;
  }
  return 0;
}

int cmd_validate(const std::string& config_path, const std::string& demo_path) {
  bool ok = true;
  auto report = [&](const std::string& name, const std::function<void()>& fn) {
    try {
      fn();
      std::printf("PASS %s\n", name.c_str());
    } catch (const std::exception& e) {
      std::printf("FAIL %s: %s\n", name.c_str(), e.what());
      ok = false;
    }
  };

  if (!config_path.empty()) {
    RunConfig cfg;
    bool parsed = false;
    report("config.parse", [&] {
      cfg = load_run_config(config_path);
      parsed = true;
    });
    if (parsed) {
      report("config.model", [&] { cfg.model.validate(); });
      report("config.control", [&] { cfg.gains.validate(); });
      report("config.ground", [&] { cfg.ground.validate(); });
      report("config.env", [&] { cfg.env.validate(); });
      report("config.rewards", [&] { cfg.rewards.validate(); });
      report("config.ppo", [&] { cfg.ppo.validate(); });
      report("config.files", [&] { cfg.validate(); });
      report("config.demo", [&] { resolve_demo(cfg.demo, cfg.model).validate(); });
    }
  }
  if (!demo_path.empty())
    report("demo", [&] { load_demo(demo_path); });
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"locoforge: planar quadruped locomotion training and evaluation"};
  app.require_subcommand(1);

  // demo-gen
  auto* gen = app.add_subcommand("demo-gen", "synthesize a demonstration trajectory");
  std::string gen_task = "hopping", gen_out;
  double gen_apex = 0.35, gen_depth = 0.09, gen_amp = 0.35, gen_hop = 0.03,
         gen_period = 0.5, gen_dt = 0.01;
  gen->add_option("--task", gen_task, "hopping|bounding");
  gen->add_option("--apex", gen_apex, "hop apex height [m]");
  gen->add_option("--stance-depth", gen_depth, "hop stance compression [m]");
  gen->add_option("--amplitude", gen_amp, "bound pitch amplitude [rad]");
  gen->add_option("--hop-height", gen_hop, "bound base oscillation [m]");
  gen->add_option("--period", gen_period, "cycle period [s]");
  gen->add_option("--dt", gen_dt, "frame spacing [s]");
  gen->add_option("--out", gen_out, "output demo file")->required();

  // train
  auto* train = app.add_subcommand("train", "run one training stage");
  std::string train_config, train_from, train_out;
  int train_stage_n = 1, train_workers = 1;
  bool train_resume = false;
  std::optional<std::uint64_t> train_seed;
  train->add_option("--config", train_config, "run configuration file")->required();
  train->add_option("--stage", train_stage_n, "1|2")->check(CLI::Range(1, 2));
  train->add_option("--from-checkpoint", train_from,
                    "stage-1 policy checkpoint (required for stage 2)");
  train->add_option("--seed", train_seed, "seed override");
  train->add_option("--out-dir", train_out, "output directory override");
  train->add_option("--workers", train_workers, "rollout worker threads");
  train->add_flag("--resume", train_resume, "resume from the latest checkpoint");

  // eval
  auto* eval = app.add_subcommand("eval", "evaluation experiments");
  eval->require_subcommand(1);
  std::string eval_config, eval_checkpoint, eval_out = "eval_out", eval_trace;
  std::optional<std::uint64_t> eval_seed;
  std::vector<double> eval_heights{0.3, 0.5, 0.7, 1.0};
  std::vector<double> eval_angles{-0.6, -0.4, -0.2, 0.0, 0.2, 0.4, 0.6};
  std::vector<double> sweep_heights{-0.05, -0.025, 0.0, 0.025, 0.05};
  std::vector<double> sweep_frictions{0.5, 0.75, 1.0};
  int eval_horizon = 1000, sweep_episodes = 20;
  double replay_tolerance = 1e-9;

  auto* drop = eval->add_subcommand("drop-test", "hopping drop-height test");
  drop->add_option("--config", eval_config)->required();
  drop->add_option("--checkpoint", eval_checkpoint)->required();
  drop->add_option("--out-dir", eval_out);
  drop->add_option("--heights", eval_heights, "initial base heights [m]");
  drop->add_option("--horizon", eval_horizon);
  drop->add_option("--seed", eval_seed);

  auto* angle = eval->add_subcommand("angle-test", "bounding drop-angle test");
  angle->add_option("--config", eval_config)->required();
  angle->add_option("--checkpoint", eval_checkpoint)->required();
  angle->add_option("--out-dir", eval_out);
  angle->add_option("--angles", eval_angles, "initial pitch angles [rad]");
  angle->add_option("--horizon", eval_horizon);
  angle->add_option("--seed", eval_seed);

  auto* sweep = eval->add_subcommand("sweep", "ground height x friction robustness sweep");
  sweep->add_option("--config", eval_config)->required();
  sweep->add_option("--checkpoint", eval_checkpoint)->required();
  sweep->add_option("--out-dir", eval_out);
  sweep->add_option("--heights", sweep_heights, "ground heights [m]");
  sweep->add_option("--frictions", sweep_frictions, "friction coefficients");
  sweep->add_option("--episodes", sweep_episodes, "episodes per cell");
  sweep->add_option("--seed", eval_seed);

  auto* replay = eval->add_subcommand("replay", "recompute rewards from a trace CSV");
  replay->add_option("--config", eval_config)->required();
  replay->add_option("--trace", eval_trace)->required();
  replay->add_option("--tolerance", replay_tolerance);

  // validate
  auto* validate = app.add_subcommand("validate", "check a config or demo file");
  std::string val_config, val_demo;
  validate->add_option("--config", val_config, "run configuration file");
  validate->add_option("--demo", val_demo, "demo trajectory file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed())
      return cmd_demo_gen(gen_task, gen_apex, gen_depth, gen_amp, gen_hop, gen_period,
                          gen_dt, gen_out);

    if (train->parsed()) {
      if (train_stage_n == 2 && train_from.empty() && !train_resume) {
        std::fprintf(stderr, "train: --stage 2 requires --from-checkpoint\n");
        return 2;
      }
      return cmd_train(train_config, train_stage_n, train_from, train_seed, train_out,
                       train_workers, train_resume);
    }

    if (eval->parsed()) {
      RunConfig cfg = load_run_config(eval_config);
      if (replay->parsed()) return cmd_eval_replay(cfg, eval_trace, replay_tolerance);

      cfg.seed = effective_seed(eval_seed, cfg.seed);
      const PolicyParams params = load_policy(eval_checkpoint);
      write_manifest(eval_out, cfg, "eval");
      if (drop->parsed())
        return cmd_eval_drop(cfg, params, eval_heights, eval_horizon, cfg.seed, eval_out,
                             false);
      if (angle->parsed())
        return cmd_eval_drop(cfg, params, eval_angles, eval_horizon, cfg.seed, eval_out,
                             true);
      if (sweep->parsed())
        return cmd_eval_sweep(cfg, params, sweep_heights, sweep_frictions, sweep_episodes,
                              cfg.seed, eval_out);
    }

    if (validate->parsed()) {
      if (val_config.empty() && val_demo.empty()) {
        std::fprintf(stderr, "validate: pass --config and/or --demo\n");
        return 2;
      }
      return cmd_validate(val_config, val_demo);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
