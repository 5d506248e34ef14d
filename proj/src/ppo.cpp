#include "mmsc/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace mmsc {

void PpoConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (entropy_coef < 0.0) throw std::invalid_argument("entropy_coef must be nonnegative");
  if (!(discount > 0.0) || discount > 1.0) throw std::invalid_argument("discount must be in (0, 1]");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (transitions_per_epoch < 1) throw std::invalid_argument("transitions_per_epoch must be >= 1");
  if (episodes_per_update < 1) throw std::invalid_argument("episodes_per_update must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (repeat_per_collect < 1) throw std::invalid_argument("repeat_per_collect must be >= 1");
  if (validation_episodes < 1) throw std::invalid_argument("validation_episodes must be >= 1");
  if (!(clip_ratio > 0.0) || clip_ratio >= 1.0) throw std::invalid_argument("clip_ratio must be in (0, 1)");
  if (gae_lambda < 0.0 || gae_lambda > 1.0) throw std::invalid_argument("gae_lambda must be in [0, 1]");
  if (value_coef < 0.0) throw std::invalid_argument("value_coef must be nonnegative");
  if (!(max_grad_norm > 0.0)) throw std::invalid_argument("max_grad_norm must be positive");
  if (checkpoint_every < 1) throw std::invalid_argument("checkpoint_every must be >= 1");
}

EpisodeStat play_episode(const NetworkParams& params, Env& env, Rng& env_rng, Rng& action_rng,
                         TransitionBatch& batch) {
  EpisodeStat stat;
  const int begin = batch.size();
  Observation obs = env.reset(env_rng);

  while (true) {
    ForwardResult fwd = forward(params, obs);
    Transition tr;
    tr.value = std::move(fwd.value);
    tr.action = sample_action(fwd.policy, action_rng, &tr.log_prob);

    StepOutcome out = env.step(tr.action);
    tr.obs = std::move(obs);
    tr.reward = out.reward;
    tr.episode_end = out.terminated || out.truncated;

    double sum = 0.0;
    for (double r : out.reward) sum += r;
    stat.reward_sum += sum / static_cast<double>(out.reward.size());
    ++stat.length;

    batch.steps.push_back(std::move(tr));
    obs = std::move(out.obs);
    if (out.terminated || out.truncated) break;
  }
  batch.episode_spans.emplace_back(begin, batch.size());
  return stat;
}

double ReturnNormalizer::scale() const { return std::sqrt(var + 1e-8); }

void ReturnNormalizer::update(const std::vector<std::vector<double>>& returns) {
  // Parallel-variance merge of the batch statistics into the running ones.
  double batch_sum = 0.0;
  double batch_count = 0.0;
  for (const auto& row : returns) {
    for (double r : row) batch_sum += r;
    batch_count += static_cast<double>(row.size());
  }
  if (batch_count == 0.0) return;
  double batch_mean = batch_sum / batch_count;
  double batch_var = 0.0;
  for (const auto& row : returns)
    for (double r : row) batch_var += (r - batch_mean) * (r - batch_mean);
  batch_var /= batch_count;

  double delta = batch_mean - mean;
  double total = count + batch_count;
  mean += delta * batch_count / total;
  var = (var * count + batch_var * batch_count + delta * delta * count * batch_count / total) / total;
  count = total;
}

void compute_advantages(TransitionBatch& batch, double discount, double gae_lambda, bool normalize,
                        ReturnNormalizer* return_norm) {
  const int n = batch.size();
  batch.advantage.assign(n, {});
  batch.returns.assign(n, {});
  if (n == 0) return;

  const double scale = return_norm ? return_norm->scale() : 1.0;

  for (auto [begin, end] : batch.episode_spans) {
    const int cells = static_cast<int>(batch.steps[begin].reward.size());
    std::vector<double> gae(cells, 0.0);
    for (int t = end - 1; t >= begin; --t) {
      const Transition& tr = batch.steps[t];
      batch.advantage[t].resize(cells);
      batch.returns[t].resize(cells);
      // Bootstrap value is zero past the episode end (termination and
      // truncation alike); inside the episode the next step's prediction.
      // Critic outputs are in normalized-return units; bring them back to
      // reward units for the recursion.
      const std::vector<double>* next_value = t + 1 < end ? &batch.steps[t + 1].value : nullptr;
      for (int i = 0; i < cells; ++i) {
        double nv = next_value ? (*next_value)[i] * scale : 0.0;
        double delta = tr.reward[i] + discount * nv - tr.value[i] * scale;
        gae[i] = delta + discount * gae_lambda * gae[i];
        batch.advantage[t][i] = gae[i];
        batch.returns[t][i] = (gae[i] + tr.value[i] * scale) / scale;
      }
    }
  }

  if (return_norm) {
    // Feed the raw-unit returns into the running statistics.
    std::vector<std::vector<double>> raw = batch.returns;
    for (auto& row : raw)
      for (double& r : row) r *= scale;
    return_norm->update(raw);
  }

  if (!normalize) return;
  double sum = 0.0;
  size_t count = 0;
  for (const auto& adv : batch.advantage) {
    for (double a : adv) sum += a;
    count += adv.size();
  }
  if (count == 0) return;
  double mean = sum / static_cast<double>(count);
  double var = 0.0;
  for (const auto& adv : batch.advantage)
    for (double a : adv) var += (a - mean) * (a - mean);
  double std = std::sqrt(var / static_cast<double>(count));
  for (auto& adv : batch.advantage)
    for (double& a : adv) a = (a - mean) / (std + 1e-8);
}

double ppo_loss(const NetworkParams& params, const TransitionBatch& batch,
                std::span<const int> indices, const PpoConfig& cfg, GradientBuffer* grads,
                LossParts* parts) {
  if (batch.advantage.size() != batch.steps.size())
    throw std::logic_error("ppo_loss: compute_advantages must run first");

  size_t total_cells = 0;
  for (int idx : indices) total_cells += batch.steps[idx].reward.size();
  if (total_cells == 0) throw std::invalid_argument("ppo_loss: empty minibatch");
  const double inv_n = 1.0 / static_cast<double>(total_cells);

  const double clip_lo = 1.0 - cfg.clip_ratio;
  const double clip_hi = 1.0 + cfg.clip_ratio;
  double policy_loss = 0.0, value_loss = 0.0, entropy_sum = 0.0;
  double kl_sum = 0.0, clipped = 0.0;

  ForwardTrace trace;
  std::vector<double> logp_new, entropy;
  for (int idx : indices) {
    const Transition& tr = batch.steps[idx];
    ForwardResult fwd = forward(params, tr.obs, grads ? &trace : nullptr);
    log_prob_and_entropy(fwd.policy, tr.action, logp_new, entropy);

    const int cells = static_cast<int>(tr.reward.size());
    const int a_ch = fwd.policy.mean.channels;

    OutputGrads out_grads;
    if (grads) {
      out_grads.d_mean = ChannelField(a_ch, fwd.policy.mean.shape);
      out_grads.d_log_std = ChannelField(a_ch, fwd.policy.mean.shape);
      out_grads.d_value.assign(cells, 0.0);
    }

    for (int i = 0; i < cells; ++i) {
      const double adv = batch.advantage[idx][i];
      const double ratio = std::exp(logp_new[i] - tr.log_prob[i]);
      const double s1 = ratio * adv;
      const double s2 = std::clamp(ratio, clip_lo, clip_hi) * adv;
      policy_loss -= std::min(s1, s2);
      const double verr = fwd.value[i] - batch.returns[idx][i];
      value_loss += verr * verr;
      entropy_sum += entropy[i];
      kl_sum += tr.log_prob[i] - logp_new[i];
      if (ratio < clip_lo || ratio > clip_hi) clipped += 1.0;

      if (grads) {
        // Gradient flows through the unclipped surrogate when it is the
        // active (smaller) branch; the clipped branch is constant in theta
        // wherever it differs from the unclipped one.
        double d_logp = s1 <= s2 ? -adv * ratio * inv_n : 0.0;
        for (int c = 0; c < a_ch; ++c) {
          const double mean_ci = fwd.policy.mean.channel(c)[i];
          const double ls_ci = fwd.policy.log_std.channel(c)[i];
          const double diff = tr.action.channel(c)[i] - mean_ci;
          const double inv_var = std::exp(-2.0 * ls_ci);
          out_grads.d_mean.channel(c)[i] = d_logp * diff * inv_var;
          out_grads.d_log_std.channel(c)[i] =
              d_logp * (diff * diff * inv_var - 1.0) - cfg.entropy_coef * inv_n;
        }
        out_grads.d_value[i] = cfg.value_coef * 2.0 * verr * inv_n;
      }
    }
    if (grads) backward(params, trace, out_grads, *grads);
  }

  if (parts) {
    parts->policy = policy_loss * inv_n;
    parts->value = value_loss * inv_n;
    parts->entropy = entropy_sum * inv_n;
    parts->approx_kl = kl_sum * inv_n;
    parts->clip_fraction = clipped * inv_n;
  }
  return policy_loss * inv_n + cfg.value_coef * value_loss * inv_n -
         cfg.entropy_coef * entropy_sum * inv_n;
}

AdamState AdamState::init(const NetworkParams& params) {
  AdamState s;
  s.m = zeros_like(params);
  s.v = zeros_like(params);
  s.step = 0;
  return s;
}

namespace {

template <typename Fn>
void for_each_tensor_pair(NetworkParams& a, const NetworkParams& b, Fn&& fn) {
  auto la = a.layers();
  auto lb = b.layers();
  for (size_t i = 0; i < la.size(); ++i) {
    fn(la[i]->w, lb[i]->w);
    fn(la[i]->b, lb[i]->b);
  }
}

}  // namespace

void adam_step(NetworkParams& params, const GradientBuffer& grads, AdamState& state, double lr) {
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  ++state.step;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));

  auto pl = params.layers();
  auto gl = grads.layers();
  auto ml = state.m.layers();
  auto vl = state.v.layers();
  for (size_t l = 0; l < pl.size(); ++l) {
    auto update = [&](std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                      std::vector<double>& v) {
      for (size_t i = 0; i < p.size(); ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
      }
    };
    update(pl[l]->w, gl[l]->w, ml[l]->w, vl[l]->w);
    update(pl[l]->b, gl[l]->b, ml[l]->b, vl[l]->b);
  }
}

double clip_grad_norm(GradientBuffer& grads, double max_norm) {
  double sq = 0.0;
  for (const auto* layer : grads.layers()) {
    for (double g : layer->w) sq += g * g;
    for (double g : layer->b) sq += g * g;
  }
  double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    double scale = max_norm / norm;
    for (auto* layer : grads.layers()) {
      for (double& g : layer->w) g *= scale;
      for (double& g : layer->b) g *= scale;
    }
  }
  return norm;
}

UpdateDiagnostics ppo_update(NetworkParams& params, const TransitionBatch& batch,
                             const PpoConfig& cfg, AdamState& adam, Rng& shuffle_rng) {
  if (batch.size() == 0) throw std::invalid_argument("ppo_update: empty batch");
  UpdateDiagnostics diag;
  const NetworkParams backup = params;
  const AdamState adam_backup = adam;

  std::vector<int> order(batch.size());
  std::iota(order.begin(), order.end(), 0);

  for (int pass = 0; pass < cfg.repeat_per_collect; ++pass) {
    // Fisher-Yates with the shuffle stream.
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
      std::swap(order[i], order[shuffle_rng.uniform_int(i + 1)]);

    for (int start = 0; start < batch.size(); start += cfg.batch_size) {
      const int end = std::min(start + cfg.batch_size, batch.size());
      std::span<const int> indices(order.data() + start, static_cast<size_t>(end - start));

      GradientBuffer grads = zeros_like(params);
      LossParts parts;
      double loss = ppo_loss(params, batch, indices, cfg, &grads, &parts);
      if (!std::isfinite(loss)) {
        params = backup;
        adam = adam_backup;
        diag.aborted = true;
        return diag;
      }
      clip_grad_norm(grads, cfg.max_grad_norm);
      adam_step(params, grads, adam, cfg.learning_rate);

      diag.policy_loss += parts.policy;
      diag.value_loss += parts.value;
      diag.entropy += parts.entropy;
      diag.approx_kl += parts.approx_kl;
      diag.clip_fraction += parts.clip_fraction;
      diag.total_loss += loss;
      ++diag.minibatches;
    }
  }

  if (diag.minibatches > 0) {
    diag.policy_loss /= diag.minibatches;
    diag.value_loss /= diag.minibatches;
    diag.entropy /= diag.minibatches;
    diag.approx_kl /= diag.minibatches;
    diag.clip_fraction /= diag.minibatches;
    diag.total_loss /= diag.minibatches;
  }
  return diag;
}

std::vector<double> TrainingLog::reward_history() const {
  std::vector<double> out;
  out.reserve(episodes.size());
  for (const auto& e : episodes) out.push_back(e.reward_sum);
  return out;
}

std::vector<double> TrainingLog::length_history() const {
  std::vector<double> out;
  out.reserve(episodes.size());
  for (const auto& e : episodes) out.push_back(static_cast<double>(e.episode_len));
  return out;
}

std::vector<double> moving_average(std::span<const double> series, int window) {
  if (window < 1) throw std::invalid_argument("moving_average: window must be >= 1");
  std::vector<double> out;
  out.reserve(series.size());
  double acc = 0.0;
  for (size_t i = 0; i < series.size(); ++i) {
    acc += series[i];
    if (i >= static_cast<size_t>(window)) acc -= series[i - window];
    const size_t span = std::min(static_cast<size_t>(window), i + 1);
    out.push_back(acc / static_cast<double>(span));
  }
  return out;
}

ValidationSet build_validation_set(const EpisodeConfig& cfg, int episodes, std::uint64_t seed) {
  ValidationSet set;
  Rng rng(seed, rng_streams::kValidation);
  for (int i = 0; i < episodes; ++i) {
    MmsSpec spec = sample_spec(cfg.pde, rng);
    auto ref = std::make_shared<ReferenceTrajectory>(build_fgs_reference(cfg, spec, cfg.max_steps));
    set.specs.push_back(std::move(spec));
    set.references.push_back(std::move(ref));
  }
  return set;
}

PolicyFn make_mean_policy(const NetworkParams& params) {
  return [&params](const Observation& obs) { return forward(params, obs).policy.mean; };
}

double validate(const NetworkParams& params, const EpisodeConfig& cfg, const ValidationSet& set) {
  EpisodeConfig eval_cfg = cfg;
  eval_cfg.terminate_on_mae = false;  // score the full horizon
  PolicyFn policy = make_mean_policy(params);

  double total = 0.0;
  for (size_t i = 0; i < set.specs.size(); ++i) {
    ClosureEnv env(eval_cfg);
    env.reset_homogeneous(set.specs[i], set.references[i]);
    EpisodeTrace trace = run_episode(env, policy);
    if (trace.nonfinite || !all_finite(trace.mse)) return std::numeric_limits<double>::infinity();
    for (double m : trace.mse) total += m;
  }
  return total / static_cast<double>(set.specs.size());
}

NetworkConfig network_config_for(const EpisodeConfig& cfg) {
  NetworkConfig net;
  net.spatial_dims = cfg.is_2d() ? 2 : 1;
  net.in_channels = cfg.obs_channels();
  net.action_channels = cfg.action_channels();
  net.hidden_channels = 64;
  net.dilations = {1, 2, 3, 4, 3, 2};
  net.pde_tag = static_cast<std::uint32_t>(cfg.pde);
  return net;
}

TrainResult train(const EpisodeConfig& env_cfg, const PpoConfig& cfg, std::uint64_t seed,
                  const std::string& out_dir) {
  env_cfg.validate();
  cfg.validate();
  std::filesystem::create_directories(out_dir);

  Rng init_rng(seed, rng_streams::kParamInit);
  Rng episode_rng(seed, rng_streams::kTrainEpisodes);
  Rng action_rng(seed, rng_streams::kActions);
  Rng shuffle_rng(seed, rng_streams::kShuffle);

  NetworkParams params = init_params(network_config_for(env_cfg), init_rng);
  AdamState adam = AdamState::init(params);
  ReturnNormalizer return_norm;
  ValidationSet vset = build_validation_set(env_cfg, cfg.validation_episodes, seed);

  std::ofstream log_csv(out_dir + "/log.csv");
  if (!log_csv) throw std::runtime_error("cannot open log: " + out_dir + "/log.csv");
  log_csv << "epoch,episode_idx,reward_sum,episode_len,validation_score\n";

  TrainResult result;
  result.best_score = std::numeric_limits<double>::infinity();
  ClosureEnv env(env_cfg);

  char buf[160];
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<TrainingLogEntry> epoch_rows;
    int transitions = 0;
    int episode_idx = 0;
    while (transitions < cfg.transitions_per_epoch) {
      TransitionBatch batch;
      while (static_cast<int>(batch.episode_spans.size()) < cfg.episodes_per_update &&
             transitions < cfg.transitions_per_epoch) {
        EpisodeStat stat = play_episode(params, env, episode_rng, action_rng, batch);
        transitions += stat.length;
        epoch_rows.push_back({epoch, episode_idx++, stat.reward_sum, stat.length, 0.0});
      }
      compute_advantages(batch, cfg.discount, cfg.gae_lambda, /*normalize=*/true,
                         cfg.return_normalization ? &return_norm : nullptr);
      ppo_update(params, batch, cfg, adam, shuffle_rng);
    }

    double score = validate(params, env_cfg, vset);
    result.log.validation_scores.push_back(score);
    for (auto& row : epoch_rows) {
      row.validation_score = score;
      std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%d,%.17g\n", row.epoch, row.episode_idx,
                    row.reward_sum, row.episode_len, row.validation_score);
      log_csv << buf;
      result.log.episodes.push_back(row);
    }
    log_csv.flush();

    if (epoch % cfg.checkpoint_every == 0)
      save_checkpoint(params, out_dir + "/epoch_" + std::to_string(epoch) + ".ckpt");
    // First epoch always seeds best.ckpt so the file exists even when every
    // validation score is infinite.
    if (score < result.best_score || result.best_epoch == 0) {
      result.best_score = score;
      result.best_epoch = epoch;
      result.best_params = params;
      result.best_checkpoint_path = out_dir + "/best.ckpt";
      save_checkpoint(params, result.best_checkpoint_path);
    }
  }
  return result;
}

}  // namespace mmsc
