#pragma once

#include <functional>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "mmsc/grid.hpp"
#include "mmsc/mms.hpp"
#include "mmsc/rng.hpp"

namespace mmsc {

enum class PdeType { burgers_1d = 1, burgers_2d = 2, advection_2d = 3 };

std::string to_string(PdeType pde);
PdeType pde_from_string(const std::string& name);

using MmsSpec = std::variant<Mms1DBurgers, Mms2DBurgers, Mms2DAdvection>;

MmsSpec sample_spec(PdeType pde, Rng& rng);

/// Coarse/fine discretization and episode limits for one PDE setup.
struct EpisodeConfig {
  PdeType pde = PdeType::burgers_1d;
  int max_steps = 200;
  double mae_threshold = 2e-2;
  int coarse_n = 64;
  double coarse_dt = 5e-3;
  int fine_n = 2048;
  double fine_dt = 1e-5;
  double nu = 1e-2;  // unused for advection
  /// Training truncates episodes whose MAE breaches the threshold; validation
  /// and evaluation run the full horizon instead.
  bool terminate_on_mae = true;

  static EpisodeConfig defaults(PdeType pde);

  bool is_2d() const { return pde != PdeType::burgers_1d; }
  GridSpec1D coarse_grid_1d() const { return GridSpec1D::make(coarse_n, coarse_dt); }
  GridSpec2D coarse_grid_2d() const { return GridSpec2D::make(coarse_n, coarse_n, coarse_dt); }
  GridSpec1D fine_grid_1d() const { return GridSpec1D::make(fine_n, fine_dt); }
  GridSpec2D fine_grid_2d() const { return GridSpec2D::make(fine_n, fine_n, fine_dt); }
  int space_refinement() const { return fine_n / coarse_n; }
  int time_refinement() const { return static_cast<int>(coarse_dt / fine_dt + 0.5); }
  FieldShape shape() const;
  int obs_channels() const;
  int action_channels() const;
  void validate() const;
};

using Observation = ChannelField;

struct StepOutcome {
  Observation obs;
  std::vector<double> reward;  // one value per cell
  bool terminated = false;     // MAE breach or non-finite state
  bool truncated = false;      // max_steps reached
  double mae = 0.0;
  double mse = 0.0;
};

/// Subsampled fine-grid snapshots, one per coarse step, laid out like the
/// environment's solution stack ([component][cell]). Immutable once built and
/// shareable across episodes that reuse the same initial condition.
struct ReferenceTrajectory {
  std::vector<ChannelField> snapshots;
};

/// Integrates the homogeneous PDE on the fine grid from the spec's t=0
/// solution and keeps every (coarse_dt/fine_dt)-th step restricted to the
/// coarse points.
ReferenceTrajectory build_fgs_reference(const EpisodeConfig& cfg, const MmsSpec& ic, int coarse_steps);

/// Minimal episode interface consumed by the PPO trainer.
class Env {
 public:
  virtual ~Env() = default;
  virtual FieldShape shape() const = 0;
  virtual int obs_channels() const = 0;
  virtual int action_channels() const = 0;
  /// Starts a fresh episode; the rng is used for any per-episode sampling.
  virtual Observation reset(Rng& rng) = 0;
  virtual StepOutcome step(const ChannelField& action) = 0;
};

/// Coarse-grid simulation wrapped as an RL environment. Each step advances
/// the solver with the episode's manufactured forcing, adds the per-cell
/// action to the update output, and scores the result against the reference
/// solution (analytic during training, cached fine-grid data for the
/// homogeneous out-of-distribution mode).
class ClosureEnv : public Env {
 public:
  explicit ClosureEnv(EpisodeConfig cfg);

  FieldShape shape() const override { return cfg_.shape(); }
  int obs_channels() const override { return cfg_.obs_channels(); }
  int action_channels() const override { return cfg_.action_channels(); }

  /// Training reset: samples a fresh spec from the configured family.
  Observation reset(Rng& rng) override;
  /// Inhomogeneous episode for a known spec (training / in-distribution eval).
  Observation reset_with_spec(const MmsSpec& spec);
  /// Homogeneous episode: zero forcing, reference from a fine-grid cache.
  Observation reset_homogeneous(const MmsSpec& ic,
                                std::shared_ptr<const ReferenceTrajectory> reference);

  StepOutcome step(const ChannelField& action) override;

  /// Observation of the current state (same channels a reset/step returns).
  Observation observation() const { return build_observation(); }

  const EpisodeConfig& config() const { return cfg_; }
  const ChannelField& current() const { return cur_; }
  const ChannelField& previous() const { return prev_; }
  int step_index() const { return step_; }
  double time() const { return step_ * cfg_.coarse_dt; }
  bool done() const { return done_; }
  const MmsSpec& spec() const { return spec_; }

  /// Reference solution stack at a coarse step index.
  ChannelField reference_at(int step) const;

 private:
  Observation build_observation() const;
  ChannelField solver_candidate(double t) const;
  ChannelField forcing_stack(double t) const;

  EpisodeConfig cfg_;
  MmsSpec spec_;
  bool homogeneous_ = false;
  std::shared_ptr<const ReferenceTrajectory> reference_;
  ChannelField cur_;
  ChannelField prev_;
  int step_ = 0;
  bool done_ = true;
};

/// Per-step scalars captured while rolling an episode.
struct EpisodeTrace {
  std::vector<double> mse;          // index = step (0 .. length)
  std::vector<double> mae;
  std::vector<double> mean_reward;  // index = step-1 (one per transition)
  int length = 0;
  bool terminated = false;
  bool nonfinite = false;
};

using PolicyFn = std::function<ChannelField(const Observation&)>;
using SnapshotFn = std::function<void(int step, const ChannelField& field)>;

/// Rolls one already-reset episode to completion. A null policy plays the
/// zero action (pure coarse simulation). on_step, when set, sees the solution
/// stack after every step including step 0.
EpisodeTrace run_episode(ClosureEnv& env, const PolicyFn& policy, const SnapshotFn& on_step = {});

/// Episode record rows {step, t, mae, mse, mean_reward} as CSV.
void write_episode_csv(const std::string& path, const EpisodeTrace& trace, double dt);

}  // namespace mmsc
