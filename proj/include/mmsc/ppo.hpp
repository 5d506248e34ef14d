#pragma once

#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mmsc/env.hpp"
#include "mmsc/policy_net.hpp"

namespace mmsc {

struct PpoConfig {
  double learning_rate = 1e-5;
  double entropy_coef = 0.02;
  double discount = 1.0;
  int epochs = 1000;
  int transitions_per_epoch = 2500;
  int episodes_per_update = 10;
  int batch_size = 50;
  int repeat_per_collect = 2;
  int validation_episodes = 32;
  double clip_ratio = 0.2;
  double gae_lambda = 0.95;
  double value_coef = 0.5;
  double max_grad_norm = 0.5;
  /// Scale value targets by the running std of the per-cell returns so the
  /// critic learns O(1) quantities; the closure rewards live at the squared
  /// solver-defect scale (~1e-6), far below a fresh critic's output noise.
  bool return_normalization = true;
  int checkpoint_every = 1;

  void validate() const;
};

/// Running statistics of the unnormalized per-cell returns, shared across
/// updates of one training run (the critic is trained in units of the running
/// return std).
struct ReturnNormalizer {
  double mean = 0.0;
  double var = 1.0;
  double count = 1e-4;

  double scale() const;
  void update(const std::vector<std::vector<double>>& returns);
};

/// One environment transition with its per-cell quantities.
struct Transition {
  Observation obs;
  ChannelField action;
  std::vector<double> log_prob;  // behavior policy log-prob per cell
  std::vector<double> reward;    // per cell
  std::vector<double> value;     // critic prediction per cell
  bool episode_end = false;
};

/// Episodes laid out contiguously; advantage/returns are filled by
/// compute_advantages.
struct TransitionBatch {
  std::vector<Transition> steps;
  std::vector<std::pair<int, int>> episode_spans;  // [begin, end) into steps
  std::vector<std::vector<double>> advantage;
  std::vector<std::vector<double>> returns;

  int size() const { return static_cast<int>(steps.size()); }
};

struct EpisodeStat {
  double reward_sum = 0.0;  // sum over steps of the cell-mean reward
  int length = 0;
};

/// Plays one full episode with sampled actions and appends its transitions.
EpisodeStat play_episode(const NetworkParams& params, Env& env, Rng& env_rng, Rng& action_rng,
                         TransitionBatch& batch);

/// Per-cell GAE with terminal bootstrap value 0 on both termination and
/// truncation, followed (by default) by zero-mean unit-variance normalization
/// of the advantages across the whole batch. When a ReturnNormalizer is
/// given, critic predictions are interpreted in normalized units: they are
/// rescaled to reward units for the GAE recursion, the stored returns
/// (critic targets) are divided by the running scale, and the normalizer is
/// updated with this batch's raw returns.
void compute_advantages(TransitionBatch& batch, double discount, double gae_lambda,
                        bool normalize = true, ReturnNormalizer* return_norm = nullptr);

/// Per-minibatch components of the PPO objective, averaged per (transition,
/// cell) element.
struct LossParts {
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
};

/// Clipped-surrogate PPO objective averaged over every (transition, cell)
/// pair of the index set:
///   mean[-min(rho A, clip(rho, 1 +- eps) A)] + value_coef mean[(V - G)^2]
///   - entropy_coef mean[entropy]
/// When grads is non-null, exact parameter gradients are accumulated into it.
double ppo_loss(const NetworkParams& params, const TransitionBatch& batch,
                std::span<const int> indices, const PpoConfig& cfg, GradientBuffer* grads = nullptr,
                LossParts* parts = nullptr);

struct AdamState {
  NetworkParams m;
  NetworkParams v;
  long step = 0;

  static AdamState init(const NetworkParams& params);
};

/// One Adam step with bias correction (beta1 0.9, beta2 0.999, eps 1e-8).
void adam_step(NetworkParams& params, const GradientBuffer& grads, AdamState& state, double lr);

/// Scales gradients down so their global L2 norm is at most max_norm.
double clip_grad_norm(GradientBuffer& grads, double max_norm);

struct UpdateDiagnostics {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double total_loss = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  int minibatches = 0;
  bool aborted = false;  // non-finite loss; params were restored
};

/// repeat_per_collect shuffled passes over the batch in minibatches of
/// batch_size transitions, Adam step after each minibatch. A non-finite loss
/// restores the parameters from before the update and aborts.
UpdateDiagnostics ppo_update(NetworkParams& params, const TransitionBatch& batch,
                             const PpoConfig& cfg, AdamState& adam, Rng& shuffle_rng);

struct TrainingLogEntry {
  int epoch = 0;
  int episode_idx = 0;
  double reward_sum = 0.0;
  int episode_len = 0;
  double validation_score = 0.0;  // epoch's score, repeated on its rows
};

struct TrainingLog {
  std::vector<TrainingLogEntry> episodes;
  std::vector<double> validation_scores;  // one per epoch

  std::vector<double> reward_history() const;
  std::vector<double> length_history() const;
};

std::vector<double> moving_average(std::span<const double> series, int window);

/// Fixed homogeneous validation problems: specs drawn once from the
/// validation stream and fine-grid reference trajectories cached for reuse
/// across epochs.
struct ValidationSet {
  std::vector<MmsSpec> specs;
  std::vector<std::shared_ptr<const ReferenceTrajectory>> references;
};

ValidationSet build_validation_set(const EpisodeConfig& cfg, int episodes, std::uint64_t seed);

/// Mean over the validation episodes of the cumulative MSE against the
/// subsampled fine-grid solution, using the deterministic (mean) policy over
/// the full horizon. Lower is better; a blown-up episode scores infinity.
double validate(const NetworkParams& params, const EpisodeConfig& cfg, const ValidationSet& set);

/// Deterministic policy: action = Gaussian mean.
PolicyFn make_mean_policy(const NetworkParams& params);

NetworkConfig network_config_for(const EpisodeConfig& cfg);

struct TrainResult {
  NetworkParams best_params;
  double best_score = 0.0;
  int best_epoch = 0;
  std::string best_checkpoint_path;
  TrainingLog log;
};

/// Full training loop: stream episodes in groups of episodes_per_update,
/// update after each group, finish an epoch once transitions_per_epoch have
/// been consumed, then validate and checkpoint (best = lowest validation
/// score). Writes log.csv plus epoch_<k>.ckpt / best.ckpt under out_dir.
TrainResult train(const EpisodeConfig& env_cfg, const PpoConfig& cfg, std::uint64_t seed,
                  const std::string& out_dir);

}  // namespace mmsc
