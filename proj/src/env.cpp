#include "mmsc/env.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "mmsc/solvers.hpp"

namespace mmsc {

std::string to_string(PdeType pde) {
  switch (pde) {
    case PdeType::burgers_1d: return "burgers_1d";
    case PdeType::burgers_2d: return "burgers_2d";
    case PdeType::advection_2d: return "advection_2d";
  }
  return "unknown";
}

PdeType pde_from_string(const std::string& name) {
  if (name == "burgers_1d") return PdeType::burgers_1d;
  if (name == "burgers_2d") return PdeType::burgers_2d;
  if (name == "advection_2d") return PdeType::advection_2d;
  throw std::invalid_argument("unknown pde kind: " + name);
}

MmsSpec sample_spec(PdeType pde, Rng& rng) {
  switch (pde) {
    case PdeType::burgers_1d: return sample_1d_burgers(rng);
    case PdeType::burgers_2d: return sample_2d_burgers(rng);
    case PdeType::advection_2d: return sample_2d_advection(rng);
  }
  throw std::invalid_argument("unknown pde kind");
}

EpisodeConfig EpisodeConfig::defaults(PdeType pde) {
  EpisodeConfig c;
  c.pde = pde;
  c.max_steps = 200;
  c.coarse_dt = 5e-3;
  switch (pde) {
    case PdeType::burgers_1d:
      c.mae_threshold = 2e-2;
      c.coarse_n = 64;
      c.fine_n = 2048;
      c.fine_dt = 1e-5;
      c.nu = 1e-2;
      break;
    case PdeType::burgers_2d:
      c.mae_threshold = 1e-1;
      c.coarse_n = 32;
      c.fine_n = 128;
      c.fine_dt = 1e-4;
      c.nu = 5e-3;
      break;
    case PdeType::advection_2d:
      c.mae_threshold = 5e-2;
      c.coarse_n = 32;
      c.fine_n = 128;
      c.fine_dt = 1e-4;
      c.nu = 0.0;
      break;
  }
  return c;
}

FieldShape EpisodeConfig::shape() const {
  return is_2d() ? FieldShape{coarse_n, coarse_n} : FieldShape{coarse_n, 0};
}

int EpisodeConfig::obs_channels() const {
  switch (pde) {
    case PdeType::burgers_1d: return 3;
    case PdeType::burgers_2d: return 6;
    case PdeType::advection_2d: return 5;
  }
  return 0;
}

int EpisodeConfig::action_channels() const { return pde == PdeType::burgers_2d ? 2 : 1; }

void EpisodeConfig::validate() const {
  if (max_steps < 1) throw std::invalid_argument("max_steps must be >= 1");
  if (!(mae_threshold > 0.0)) throw std::invalid_argument("mae_threshold must be positive");
  if (coarse_n < 4) throw std::invalid_argument("coarse_n must be >= 4");
  if (!(coarse_dt > 0.0)) throw std::invalid_argument("coarse_dt must be positive");
  if (fine_n < coarse_n || fine_n % coarse_n != 0)
    throw std::invalid_argument("fine_n must be a multiple of coarse_n");
  if (!(fine_dt > 0.0) || fine_dt > coarse_dt)
    throw std::invalid_argument("fine_dt must be positive and <= coarse_dt");
  if (pde != PdeType::advection_2d && !(nu > 0.0))
    throw std::invalid_argument("nu must be positive for Burgers problems");
}

namespace {

constexpr double kForcingFloor = 1e-12;

ScalarField1D stack_to_1d(const ChannelField& cf) {
  ScalarField1D f;
  f.v.assign(cf.channel(0), cf.channel(0) + cf.cells());
  return f;
}

ScalarField2D stack_to_2d(const ChannelField& cf, int channel) {
  ScalarField2D f(cf.shape.nx, cf.shape.ny);
  const double* src = cf.channel(channel);
  f.v.assign(src, src + cf.cells());
  return f;
}

ChannelField stack_from_1d(const ScalarField1D& f) {
  ChannelField cf(1, FieldShape{f.size(), 0});
  std::copy(f.v.begin(), f.v.end(), cf.data.begin());
  return cf;
}

ChannelField stack_from_2d(const ScalarField2D& f) {
  ChannelField cf(1, FieldShape{f.nx, f.ny});
  std::copy(f.v.begin(), f.v.end(), cf.data.begin());
  return cf;
}

ChannelField stack_from_vec2d(const VectorField2D& f) {
  ChannelField cf(2, FieldShape{f.u.nx, f.u.ny});
  std::copy(f.u.v.begin(), f.u.v.end(), cf.channel(0));
  std::copy(f.v.v.begin(), f.v.v.end(), cf.channel(1));
  return cf;
}

VectorField2D stack_to_vec2d(const ChannelField& cf) {
  VectorField2D f(cf.shape.nx, cf.shape.ny);
  const double* u = cf.channel(0);
  const double* v = cf.channel(1);
  f.u.v.assign(u, u + cf.cells());
  f.v.v.assign(v, v + cf.cells());
  return f;
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

ClosureEnv::ClosureEnv(EpisodeConfig cfg) : cfg_(cfg) { cfg_.validate(); }

ChannelField ClosureEnv::forcing_stack(double t) const {
  if (homogeneous_) return ChannelField(action_channels(), shape());
  switch (cfg_.pde) {
    case PdeType::burgers_1d:
      return stack_from_1d(forcing_field(std::get<Mms1DBurgers>(spec_), cfg_.nu, cfg_.coarse_grid_1d(), t));
    case PdeType::burgers_2d:
      return stack_from_vec2d(forcing_field(std::get<Mms2DBurgers>(spec_), cfg_.nu, cfg_.coarse_grid_2d(), t));
    case PdeType::advection_2d:
      return stack_from_2d(forcing_field(std::get<Mms2DAdvection>(spec_), cfg_.coarse_grid_2d()));
  }
  throw std::logic_error("unreachable");
}

ChannelField ClosureEnv::solver_candidate(double t) const {
  switch (cfg_.pde) {
    case PdeType::burgers_1d: {
      ScalarField1D psi = stack_to_1d(cur_);
      if (homogeneous_) return stack_from_1d(step_burgers_1d(psi, cfg_.nu, cfg_.coarse_grid_1d()));
      ScalarField1D f = forcing_field(std::get<Mms1DBurgers>(spec_), cfg_.nu, cfg_.coarse_grid_1d(), t);
      return stack_from_1d(step_burgers_1d(psi, cfg_.nu, cfg_.coarse_grid_1d(), &f));
    }
    case PdeType::burgers_2d: {
      VectorField2D field = stack_to_vec2d(cur_);
      if (homogeneous_) return stack_from_vec2d(step_burgers_2d(field, cfg_.nu, cfg_.coarse_grid_2d()));
      VectorField2D f = forcing_field(std::get<Mms2DBurgers>(spec_), cfg_.nu, cfg_.coarse_grid_2d(), t);
      return stack_from_vec2d(step_burgers_2d(field, cfg_.nu, cfg_.coarse_grid_2d(), &f));
    }
    case PdeType::advection_2d: {
      ScalarField2D psi = stack_to_2d(cur_, 0);
      VectorField2D vel = advection_velocity_field(std::get<Mms2DAdvection>(spec_), cfg_.coarse_grid_2d());
      if (homogeneous_) return stack_from_2d(step_advection_2d(psi, vel, cfg_.coarse_grid_2d()));
      ScalarField2D f = forcing_field(std::get<Mms2DAdvection>(spec_), cfg_.coarse_grid_2d());
      return stack_from_2d(step_advection_2d(psi, vel, cfg_.coarse_grid_2d(), &f));
    }
  }
  throw std::logic_error("unreachable");
}

ChannelField ClosureEnv::reference_at(int step) const {
  if (homogeneous_) {
    if (!reference_ || step >= static_cast<int>(reference_->snapshots.size()))
      throw std::out_of_range("FGS reference cache missing step " + std::to_string(step));
    return reference_->snapshots[step];
  }
  double t = step * cfg_.coarse_dt;
  switch (cfg_.pde) {
    case PdeType::burgers_1d:
      return stack_from_1d(solution_field(std::get<Mms1DBurgers>(spec_), cfg_.coarse_grid_1d(), t));
    case PdeType::burgers_2d:
      return stack_from_vec2d(solution_field(std::get<Mms2DBurgers>(spec_), cfg_.coarse_grid_2d(), t));
    case PdeType::advection_2d:
      return stack_from_2d(solution_field(std::get<Mms2DAdvection>(spec_), cfg_.coarse_grid_2d()));
  }
  throw std::logic_error("unreachable");
}

Observation ClosureEnv::build_observation() const {
  Observation obs(obs_channels(), shape());
  const int cells = obs.cells();

  // Forcing channels first, normalized jointly by their max magnitude; an
  // all-zero forcing (homogeneous episodes) keeps the channels at zero.
  ChannelField forcing =
      homogeneous_ ? ChannelField(action_channels(), shape()) : forcing_stack(time());
  double scale = max_abs(forcing.data);
  int ch = 0;
  for (int fc = 0; fc < forcing.channels; ++fc, ++ch) {
    double* dst = obs.channel(ch);
    const double* src = forcing.channel(fc);
    if (scale >= kForcingFloor)
      for (int i = 0; i < cells; ++i) dst[i] = src[i] / scale;
  }

  // Previous then current solution snapshots.
  for (int c = 0; c < prev_.channels; ++c, ++ch)
    std::copy(prev_.channel(c), prev_.channel(c) + cells, obs.channel(ch));
  for (int c = 0; c < cur_.channels; ++c, ++ch)
    std::copy(cur_.channel(c), cur_.channel(c) + cells, obs.channel(ch));

  // Advection exposes its per-episode velocity field.
  if (cfg_.pde == PdeType::advection_2d) {
    VectorField2D vel = advection_velocity_field(std::get<Mms2DAdvection>(spec_), cfg_.coarse_grid_2d());
    std::copy(vel.u.v.begin(), vel.u.v.end(), obs.channel(ch++));
    std::copy(vel.v.v.begin(), vel.v.v.end(), obs.channel(ch++));
  }
  return obs;
}

Observation ClosureEnv::reset(Rng& rng) { return reset_with_spec(sample_spec(cfg_.pde, rng)); }

Observation ClosureEnv::reset_with_spec(const MmsSpec& spec) {
  spec_ = spec;
  homogeneous_ = false;
  reference_.reset();
  cur_ = reference_at(0);  // analytic solution at t = 0
  prev_ = cur_;
  step_ = 0;
  done_ = false;
  return build_observation();
}

Observation ClosureEnv::reset_homogeneous(const MmsSpec& ic,
                                          std::shared_ptr<const ReferenceTrajectory> reference) {
  if (!reference || reference->snapshots.empty())
    throw std::invalid_argument("reset_homogeneous: missing reference trajectory");
  spec_ = ic;
  homogeneous_ = true;
  reference_ = std::move(reference);
  cur_ = reference_->snapshots[0];
  prev_ = cur_;
  step_ = 0;
  done_ = false;
  return build_observation();
}

StepOutcome ClosureEnv::step(const ChannelField& action) {
  if (done_) throw std::logic_error("step() called on a finished episode");
  if (action.channels != action_channels() || action.shape != shape())
    throw std::invalid_argument("action shape mismatch");
  if (!all_finite(action.data)) throw std::invalid_argument("non-finite action");

  ChannelField candidate = solver_candidate(time());
  ChannelField post = candidate;
  for (size_t i = 0; i < post.data.size(); ++i) post.data[i] += action.data[i];

  ChannelField ref = reference_at(step_ + 1);

  StepOutcome out;
  const int cells = post.cells();
  out.reward.assign(cells, 0.0);
  for (int c = 0; c < post.channels; ++c) {
    const double* r = ref.channel(c);
    const double* pre = candidate.channel(c);
    const double* pst = post.channel(c);
    for (int i = 0; i < cells; ++i) {
      double e_pre = r[i] - pre[i];
      double e_post = r[i] - pst[i];
      // Factored difference of squares: exactly zero for a zero action, where
      // fused multiply-adds would otherwise leave rounding residue.
      out.reward[i] += (e_pre - e_post) * (e_pre + e_post);
    }
  }

  out.mae = mae(std::span(post.data), std::span(ref.data));
  out.mse = mse(std::span(post.data), std::span(ref.data));

  bool finite = all_finite(post.data);
  out.terminated = !finite || (cfg_.terminate_on_mae && out.mae > cfg_.mae_threshold);

  prev_ = std::move(cur_);
  cur_ = std::move(post);
  ++step_;
  out.truncated = !out.terminated && step_ >= cfg_.max_steps;
  done_ = out.terminated || out.truncated;

  out.obs = build_observation();
  return out;
}

ReferenceTrajectory build_fgs_reference(const EpisodeConfig& cfg, const MmsSpec& ic, int coarse_steps) {
  cfg.validate();
  ReferenceTrajectory ref;
  ref.snapshots.reserve(coarse_steps + 1);
  const int d = cfg.space_refinement();
  const int dt_ratio = cfg.time_refinement();

  switch (cfg.pde) {
    case PdeType::burgers_1d: {
      GridSpec1D fine = cfg.fine_grid_1d();
      ScalarField1D state = solution_field(std::get<Mms1DBurgers>(ic), fine, 0.0);
      ref.snapshots.push_back(stack_from_1d(subsample(state, d)));
      for (int k = 1; k <= coarse_steps; ++k) {
        for (int s = 0; s < dt_ratio; ++s) state = step_burgers_1d(state, cfg.nu, fine);
        if (!all_finite(state.v)) throw BlowupError(k);
        ref.snapshots.push_back(stack_from_1d(subsample(state, d)));
      }
      break;
    }
    case PdeType::burgers_2d: {
      GridSpec2D fine = cfg.fine_grid_2d();
      VectorField2D state = solution_field(std::get<Mms2DBurgers>(ic), fine, 0.0);
      ref.snapshots.push_back(stack_from_vec2d(subsample(state, d)));
      for (int k = 1; k <= coarse_steps; ++k) {
        for (int s = 0; s < dt_ratio; ++s) state = step_burgers_2d(state, cfg.nu, fine);
        if (!all_finite(state.u.v) || !all_finite(state.v.v)) throw BlowupError(k);
        ref.snapshots.push_back(stack_from_vec2d(subsample(state, d)));
      }
      break;
    }
    case PdeType::advection_2d: {
      GridSpec2D fine = cfg.fine_grid_2d();
      const auto& spec = std::get<Mms2DAdvection>(ic);
      VectorField2D vel = advection_velocity_field(spec, fine);
      ScalarField2D state = solution_field(spec, fine);
      ref.snapshots.push_back(stack_from_2d(subsample(state, d)));
      for (int k = 1; k <= coarse_steps; ++k) {
        for (int s = 0; s < dt_ratio; ++s) state = step_advection_2d(state, vel, fine);
        if (!all_finite(state.v)) throw BlowupError(k);
        ref.snapshots.push_back(stack_from_2d(subsample(state, d)));
      }
      break;
    }
  }
  return ref;
}

EpisodeTrace run_episode(ClosureEnv& env, const PolicyFn& policy, const SnapshotFn& on_step) {
  if (env.done()) throw std::logic_error("run_episode: environment must be reset first");
  EpisodeTrace trace;

  ChannelField ref0 = env.reference_at(env.step_index());
  trace.mse.push_back(mse(std::span(env.current().data), std::span(ref0.data)));
  trace.mae.push_back(mae(std::span(env.current().data), std::span(ref0.data)));
  if (on_step) on_step(env.step_index(), env.current());

  Observation obs = env.observation();
  while (!env.done()) {
    ChannelField action =
        policy ? policy(obs) : ChannelField(env.action_channels(), env.shape());
    StepOutcome out = env.step(action);
    trace.mse.push_back(out.mse);
    trace.mae.push_back(out.mae);
    double sum = 0.0;
    for (double r : out.reward) sum += r;
    trace.mean_reward.push_back(sum / static_cast<double>(out.reward.size()));
    if (on_step) on_step(env.step_index(), env.current());
    if (out.terminated) {
      trace.terminated = true;
      trace.nonfinite = !all_finite(env.current().data);
    }
    obs = std::move(out.obs);
  }
  trace.length = env.step_index();
  return trace;
}

void write_episode_csv(const std::string& path, const EpisodeTrace& trace, double dt) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "step,t,mae,mse,mean_reward\n";
  char buf[160];
  for (size_t k = 0; k < trace.mse.size(); ++k) {
    double reward = k == 0 ? 0.0 : trace.mean_reward[k - 1];
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g\n", k, k * dt, trace.mae[k],
                  trace.mse[k], reward);
    out << buf;
  }
}

}  // namespace mmsc
