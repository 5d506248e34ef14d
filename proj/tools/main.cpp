#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mmsc/config.hpp"
#include "mmsc/eval.hpp"
#include "mmsc/mms.hpp"
#include "mmsc/ppo.hpp"
#include "mmsc/solvers.hpp"

namespace {

using namespace mmsc;

constexpr double kResidualTolerance = 1e-5;

struct CommonFlags {
  std::string config_path;
  std::string pde_name;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool out_set = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "Config file (INI-style)");
  cmd->add_option("--pde", flags.pde_name, "PDE kind: burgers_1d, burgers_2d, advection_2d");
  cmd->add_option_function<std::uint64_t>(
      "--seed", [&flags](std::uint64_t v) { flags.seed = v; flags.seed_set = true; }, "Master seed");
  cmd->add_option_function<std::string>(
      "--out", [&flags](std::string v) { flags.out_dir = std::move(v); flags.out_set = true; },
      "Output directory");
}

AppConfig resolve_config(const CommonFlags& flags) {
  AppConfig cfg;
  if (!flags.config_path.empty()) {
    cfg = parse_config_file(flags.config_path);
    if (!flags.pde_name.empty() && pde_from_string(flags.pde_name) != cfg.episode.pde)
      throw std::invalid_argument("--pde disagrees with the config file's pde.kind");
  } else {
    PdeType pde = flags.pde_name.empty() ? PdeType::burgers_1d : pde_from_string(flags.pde_name);
    cfg = AppConfig::defaults(pde);
  }
  if (flags.seed_set) cfg.seed = flags.seed;
  if (flags.out_set) {
    cfg.out_dir = flags.out_dir;
  } else if (const char* env_dir = std::getenv("MMSC_OUT_DIR"); env_dir && *env_dir) {
    cfg.out_dir = env_dir;
  }
  return cfg;
}

int cmd_mms_check(const CommonFlags& flags, int tuples) {
  AppConfig cfg = resolve_config(flags);
  Rng rng(cfg.seed, rng_streams::kEval);

  ResidualReport r1 = residual_check_1d(EpisodeConfig::defaults(PdeType::burgers_1d).nu, tuples, rng);
  ResidualReport r2 =
      residual_check_2d_burgers(EpisodeConfig::defaults(PdeType::burgers_2d).nu, tuples, rng);
  ResidualReport r3 = residual_check_2d_advection(tuples, rng);

  std::printf("burgers_1d   max residual %.3e over %d tuples\n", r1.max_abs_error, r1.samples);
  std::printf("burgers_2d   max residual %.3e over %d tuples\n", r2.max_abs_error, r2.samples);
  std::printf("advection_2d max residual %.3e over %d tuples\n", r3.max_abs_error, r3.samples);

  double worst = std::max({r1.max_abs_error, r2.max_abs_error, r3.max_abs_error});
  if (worst > kResidualTolerance) {
    std::fprintf(stderr, "FAIL: residual %.3e exceeds tolerance %.0e\n", worst, kResidualTolerance);
    return 1;
  }
  std::printf("OK: all residuals within %.0e\n", kResidualTolerance);
  return 0;
}

int cmd_solve(const CommonFlags& flags, bool homogeneous, bool fine) {
  AppConfig cfg = resolve_config(flags);
  const EpisodeConfig& ep = cfg.episode;
  Rng rng(cfg.seed, rng_streams::kEval);
  MmsSpec spec = sample_spec(ep.pde, rng);

  std::filesystem::create_directories(cfg.out_dir);
  write_manifest(cfg, "solve", cfg.out_dir);

  const double dt = fine ? ep.fine_dt : ep.coarse_dt;
  const int steps_per_coarse = fine ? ep.time_refinement() : 1;
  const int total_steps = ep.max_steps * steps_per_coarse;
  auto step_for_time = [&](double t) {
    return std::clamp(static_cast<int>(std::lround(t / dt)), 0, total_steps);
  };

  auto want_snapshot = [&](int k, double& t_out) {
    for (double t : cfg.snapshot_times)
      if (step_for_time(t) == k) {
        t_out = t;
        return true;
      }
    return false;
  };

  auto emit_1d = [&](int k, const ScalarField1D& f) {
    double t;
    if (!want_snapshot(k, t)) return;
    char name[64];
    std::snprintf(name, sizeof(name), "solution_t%g.csv", t);
    write_csv(cfg.out_dir + "/" + name, f);
  };
  auto emit_2d = [&](int k, const ScalarField2D& f, const char* suffix) {
    double t;
    if (!want_snapshot(k, t)) return;
    char name[64];
    std::snprintf(name, sizeof(name), "solution%s_t%g.csv", suffix, t);
    write_csv(cfg.out_dir + "/" + name, f);
  };

  switch (ep.pde) {
    case PdeType::burgers_1d: {
      const auto& s = std::get<Mms1DBurgers>(spec);
      GridSpec1D grid = fine ? ep.fine_grid_1d() : ep.coarse_grid_1d();
      Forcing1D forcing;
      if (!homogeneous)
        forcing = [&](double t) { return forcing_field(s, ep.nu, grid, t); };
      ScalarField1D state = solution_field(s, grid, 0.0);
      emit_1d(0, state);
      for (int k = 1; k <= total_steps; ++k) {
        double t = (k - 1) * grid.dt;
        if (forcing) {
          ScalarField1D f = forcing(t);
          state = step_burgers_1d(state, ep.nu, grid, &f);
        } else {
          state = step_burgers_1d(state, ep.nu, grid);
        }
        if (!all_finite(state.v)) throw BlowupError(k);
        emit_1d(k, state);
      }
      break;
    }
    case PdeType::burgers_2d: {
      const auto& s = std::get<Mms2DBurgers>(spec);
      GridSpec2D grid = fine ? ep.fine_grid_2d() : ep.coarse_grid_2d();
      VectorField2D state = solution_field(s, grid, 0.0);
      emit_2d(0, state.u, "_u");
      emit_2d(0, state.v, "_v");
      for (int k = 1; k <= total_steps; ++k) {
        double t = (k - 1) * grid.dt;
        if (homogeneous) {
          state = step_burgers_2d(state, ep.nu, grid);
        } else {
          VectorField2D f = forcing_field(s, ep.nu, grid, t);
          state = step_burgers_2d(state, ep.nu, grid, &f);
        }
        if (!all_finite(state.u.v) || !all_finite(state.v.v)) throw BlowupError(k);
        emit_2d(k, state.u, "_u");
        emit_2d(k, state.v, "_v");
      }
      break;
    }
    case PdeType::advection_2d: {
      const auto& s = std::get<Mms2DAdvection>(spec);
      GridSpec2D grid = fine ? ep.fine_grid_2d() : ep.coarse_grid_2d();
      VectorField2D vel = advection_velocity_field(s, grid);
      ScalarField2D state = solution_field(s, grid);
      emit_2d(0, state, "");
      for (int k = 1; k <= total_steps; ++k) {
        if (homogeneous) {
          state = step_advection_2d(state, vel, grid);
        } else {
          ScalarField2D f = forcing_field(s, grid);
          state = step_advection_2d(state, vel, grid, &f);
        }
        if (!all_finite(state.v)) throw BlowupError(k);
        emit_2d(k, state, "");
      }
      break;
    }
  }
  std::printf("wrote snapshots to %s\n", cfg.out_dir.c_str());
  return 0;
}

int cmd_train(const CommonFlags& flags, int epochs_override, int transitions_override,
              bool deterministic) {
  AppConfig cfg = resolve_config(flags);
  if (epochs_override > 0) cfg.rl.epochs = epochs_override;
  if (transitions_override > 0) cfg.rl.transitions_per_epoch = transitions_override;
  if (deterministic) cfg.deterministic = true;
  cfg.validate();

  write_manifest(cfg, "train", cfg.out_dir);
  TrainResult result = train(cfg.episode, cfg.rl, cfg.seed, cfg.out_dir);
  std::printf("best validation score %.6e at epoch %d -> %s\n", result.best_score,
              result.best_epoch, result.best_checkpoint_path.c_str());
  return 0;
}

int cmd_eval(const CommonFlags& flags, const std::string& checkpoint, const std::string& mode_name,
             int samples_override) {
  AppConfig cfg = resolve_config(flags);
  if (samples_override > 0) cfg.eval_samples = samples_override;
  cfg.validate();

  NetworkParams params =
      load_checkpoint_for(checkpoint, static_cast<std::uint32_t>(cfg.episode.pde));

  EvalRun run;
  run.episode = cfg.episode;
  run.mode = eval_mode_from_string(mode_name);
  run.samples = cfg.eval_samples;
  run.seed = cfg.seed;
  run.out_dir = cfg.out_dir;
  run.snapshot_times = cfg.snapshot_times;

  EvalResult result = evaluate(run, &params);
  write_manifest(cfg, "eval", cfg.out_dir);
  write_outputs(result, run);

  if (result.excluded_samples > 0)
    std::fprintf(stderr, "warning: %d sample(s) blew up and were excluded\n",
                 result.excluded_samples);
  std::printf("final median error reduction: per-step %.1f%%, cumulative %.1f%%\n",
              100.0 * result.reduction.back(), 100.0 * result.cum_reduction.back());
  std::printf("outputs in %s\n", cfg.out_dir.c_str());
  return 0;
}

int cmd_plot(const std::string& in_dir, const std::string& out_dir) {
  plot_from_csv(in_dir, out_dir.empty() ? in_dir : out_dir, 0.0);
  std::printf("wrote plots to %s\n", (out_dir.empty() ? in_dir : out_dir).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closure modeling for coarse-grained PDE solvers trained on manufactured solutions"};
  app.require_subcommand(1);

  CommonFlags check_flags;
  int check_tuples = 200;
  CLI::App* check = app.add_subcommand("mms-check", "Verify closed-form forcings against a finite-difference residual oracle");
  add_common(check, check_flags);
  check->add_option("--tuples", check_tuples, "Random (spec, point, time) tuples per family")
      ->check(CLI::PositiveNumber);

  CommonFlags solve_flags;
  bool solve_homogeneous = false, solve_fine = false;
  CLI::App* solve = app.add_subcommand("solve", "Run one trajectory and write snapshot CSVs");
  add_common(solve, solve_flags);
  solve->add_flag("--homogeneous", solve_homogeneous, "Drop the manufactured forcing");
  solve->add_flag("--fine", solve_fine, "Use the fine grid instead of the coarse one");

  CommonFlags train_flags;
  int train_epochs = 0, train_transitions = 0;
  bool train_deterministic = false;
  CLI::App* train_cmd = app.add_subcommand("train", "Train the closure policy with PPO");
  add_common(train_cmd, train_flags);
  train_cmd->add_option("--epochs", train_epochs, "Override epoch count");
  train_cmd->add_option("--transitions", train_transitions, "Override transitions per epoch");
  train_cmd->add_flag("--deterministic", train_deterministic,
                      "Single-threaded bitwise-reproducible collection");

  CommonFlags eval_flags;
  std::string eval_checkpoint, eval_mode = "in_distribution";
  int eval_samples = 0;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint against the coarse baseline");
  add_common(eval_cmd, eval_flags);
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "Trained checkpoint file")->required();
  eval_cmd->add_option("--mode", eval_mode, "in_distribution (forced) or out_of_distribution (homogeneous)");
  eval_cmd->add_option("--samples", eval_samples, "Number of test specs");

  std::string plot_in, plot_out;
  CLI::App* plot_cmd = app.add_subcommand("plot", "Regenerate SVG plots from eval CSV outputs");
  plot_cmd->add_option("--in", plot_in, "Directory holding mse.csv / cumulative.csv")->required();
  plot_cmd->add_option("--out", plot_out, "Output directory (defaults to --in)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (check->parsed()) return cmd_mms_check(check_flags, check_tuples);
    if (solve->parsed()) return cmd_solve(solve_flags, solve_homogeneous, solve_fine);
    if (train_cmd->parsed())
      return cmd_train(train_flags, train_epochs, train_transitions, train_deterministic);
    if (eval_cmd->parsed()) return cmd_eval(eval_flags, eval_checkpoint, eval_mode, eval_samples);
    if (plot_cmd->parsed()) return cmd_plot(plot_in, plot_out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
