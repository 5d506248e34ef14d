#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "mmsc/policy_net.hpp"
#include "mmsc/rng.hpp"

using namespace mmsc;

namespace {

NetworkConfig tiny_config(int spatial_dims) {
  NetworkConfig cfg;
  cfg.spatial_dims = spatial_dims;
  cfg.in_channels = 3;
  cfg.action_channels = 1;
  cfg.hidden_channels = 4;
  cfg.dilations = {1, 2};
  return cfg;
}

ChannelField random_obs(int channels, FieldShape shape, Rng& rng) {
  ChannelField obs(channels, shape);
  for (double& v : obs.data) v = rng.uniform(-1, 1);
  return obs;
}

ChannelField shift_field(const ChannelField& f, int sx, int sy) {
  ChannelField out(f.channels, f.shape);
  if (!f.shape.is_2d()) {
    for (int c = 0; c < f.channels; ++c)
      for (int i = 0; i < f.shape.nx; ++i)
        out.channel(c)[i] = f.channel(c)[periodic_index(i - sx, f.shape.nx)];
    return out;
  }
  for (int c = 0; c < f.channels; ++c)
    for (int ix = 0; ix < f.shape.nx; ++ix)
      for (int iy = 0; iy < f.shape.ny; ++iy)
        out.channel(c)[ix * f.shape.ny + iy] =
            f.channel(c)[periodic_index(ix - sx, f.shape.nx) * f.shape.ny +
                         periodic_index(iy - sy, f.shape.ny)];
  return out;
}

// Scalar probe loss: weighted sums of mean, log-std and value outputs. Simple
// enough to differentiate by hand through the output grads, rich enough to
// touch every parameter.
struct ProbeLoss {
  ChannelField w_mean, w_log_std;
  std::vector<double> w_value;

  static ProbeLoss make(int action_channels, FieldShape shape, Rng& rng) {
    ProbeLoss p;
    p.w_mean = random_obs(action_channels, shape, rng);
    p.w_log_std = random_obs(action_channels, shape, rng);
    p.w_value.resize(shape.cells());
    for (double& v : p.w_value) v = rng.uniform(-1, 1);
    return p;
  }

  double eval(const ForwardResult& fwd) const {
    double loss = 0.0;
    for (size_t i = 0; i < fwd.policy.mean.data.size(); ++i) {
      loss += w_mean.data[i] * fwd.policy.mean.data[i];
      loss += w_log_std.data[i] * fwd.policy.log_std.data[i];
    }
    for (size_t i = 0; i < fwd.value.size(); ++i) loss += w_value[i] * fwd.value[i];
    return loss;
  }

  OutputGrads grads() const {
    OutputGrads g;
    g.d_mean = w_mean;
    g.d_log_std = w_log_std;
    g.d_value = w_value;
    return g;
  }
};

double max_relative_gradient_error(NetworkParams params, const ChannelField& obs, Rng& rng) {
  ProbeLoss probe = ProbeLoss::make(params.config.action_channels, obs.shape, rng);

  ForwardTrace trace;
  ForwardResult fwd = forward(params, obs, &trace);
  GradientBuffer grads = zeros_like(params);
  backward(params, trace, probe.grads(), grads);
  (void)fwd;

  const double h = 1e-5;
  double worst = 0.0;
  auto layers = params.layers();
  auto grad_layers = grads.layers();
  for (size_t l = 0; l < layers.size(); ++l) {
    auto probe_tensor = [&](std::vector<double>& tensor, const std::vector<double>& g) {
      for (size_t i = 0; i < tensor.size(); ++i) {
        double saved = tensor[i];
        tensor[i] = saved + h;
        double up = probe.eval(forward(params, obs));
        tensor[i] = saved - h;
        double down = probe.eval(forward(params, obs));
        tensor[i] = saved;
        double fd = (up - down) / (2 * h);
        double rel = std::abs(g[i] - fd) / (std::abs(g[i]) + 1e-8);
        worst = std::max(worst, rel);
      }
    };
    probe_tensor(layers[l]->w, grad_layers[l]->w);
    probe_tensor(layers[l]->b, grad_layers[l]->b);
  }
  return worst;
}

}  // namespace

TEST_CASE("all-zero network produces zero mean, unit std, zero value") {
  NetworkConfig cfg = tiny_config(1);
  NetworkParams params = zeros_like([&] {
    Rng rng(1);
    return init_params(cfg, rng);
  }());
  ChannelField obs(3, FieldShape{8, 0});
  ForwardResult fwd = forward(params, obs);
  for (double v : fwd.policy.mean.data) CHECK(v == 0.0);
  for (double v : fwd.policy.log_std.data) CHECK(v == 0.0);  // std = e^0 = 1
  for (double v : fwd.value) CHECK(v == 0.0);
}

TEST_CASE("spatial shape is preserved end to end") {
  Rng rng(2);
  NetworkConfig cfg1;
  cfg1.spatial_dims = 1;
  cfg1.in_channels = 3;
  cfg1.action_channels = 1;
  NetworkParams p1 = init_params(cfg1, rng);
  ChannelField obs1(3, FieldShape{64, 0});
  ForwardResult f1 = forward(p1, obs1);
  CHECK(f1.policy.mean.cells() == 64);
  CHECK(f1.policy.log_std.cells() == 64);
  CHECK(f1.value.size() == 64);

  NetworkConfig cfg2;
  cfg2.spatial_dims = 2;
  cfg2.in_channels = 6;
  cfg2.action_channels = 2;
  cfg2.hidden_channels = 8;
  NetworkParams p2 = init_params(cfg2, rng);
  ChannelField obs2(6, FieldShape{16, 16});
  ForwardResult f2 = forward(p2, obs2);
  CHECK(f2.policy.mean.channels == 2);
  CHECK(f2.policy.mean.cells() == 256);
  CHECK(f2.value.size() == 256);
}

TEST_CASE("forward is equivariant under cyclic shifts") {
  Rng rng(3);
  NetworkConfig cfg = tiny_config(1);
  cfg.dilations = {1, 2, 3, 4, 3, 2};
  NetworkParams params = init_params(cfg, rng);
  ChannelField obs = random_obs(3, FieldShape{32, 0}, rng);

  ForwardResult base = forward(params, obs);
  for (int s : {1, 7}) {
    ForwardResult shifted = forward(params, shift_field(obs, s, 0));
    ChannelField expect_mean = shift_field(base.policy.mean, s, 0);
    for (size_t i = 0; i < expect_mean.data.size(); ++i)
      CHECK(shifted.policy.mean.data[i] == doctest::Approx(expect_mean.data[i]).epsilon(1e-13));
  }

  NetworkConfig cfg2 = tiny_config(2);
  NetworkParams params2 = init_params(cfg2, rng);
  ChannelField obs2 = random_obs(3, FieldShape{8, 8}, rng);
  ForwardResult base2 = forward(params2, obs2);
  ForwardResult shifted2 = forward(params2, shift_field(obs2, 3, 5));
  ChannelField expect2 = shift_field(base2.policy.mean, 3, 5);
  for (size_t i = 0; i < expect2.data.size(); ++i)
    CHECK(shifted2.policy.mean.data[i] == doctest::Approx(expect2.data[i]).epsilon(1e-13));
}

TEST_CASE("log-std clamp keeps std within bounds") {
  Rng rng(4);
  NetworkConfig cfg = tiny_config(1);
  NetworkParams params = init_params(cfg, rng);
  // Huge bias pushes the raw log-std far beyond the clamp.
  params.policy_head.b[1] = 1e3;
  ChannelField obs = random_obs(3, FieldShape{8, 0}, rng);
  ForwardResult fwd = forward(params, obs);
  for (double v : fwd.policy.log_std.data) {
    CHECK(v >= kLogStdMin);
    CHECK(v <= kLogStdMax);
  }
  params.policy_head.b[1] = -1e3;
  fwd = forward(params, obs);
  for (double v : fwd.policy.log_std.data) CHECK(v == kLogStdMin);
}

TEST_CASE("sampling at the clamp floor collapses to the mean") {
  GaussianPolicy policy;
  policy.mean = ChannelField(1, FieldShape{16, 0});
  policy.log_std = ChannelField(1, FieldShape{16, 0});
  for (int i = 0; i < 16; ++i) {
    policy.mean.channel(0)[i] = 0.1 * i;
    policy.log_std.channel(0)[i] = kLogStdMin;
  }
  Rng rng(5);
  ChannelField action = sample_action(policy, rng);
  for (int i = 0; i < 16; ++i)
    CHECK(action.channel(0)[i] == doctest::Approx(policy.mean.channel(0)[i]).epsilon(1e-8));
}

TEST_CASE("gaussian log density and entropy formulas") {
  GaussianPolicy policy;
  policy.mean = ChannelField(1, FieldShape{4, 0});
  policy.log_std = ChannelField(1, FieldShape{4, 0});  // std = 1

  ChannelField at_mean = policy.mean;
  std::vector<double> logp, entropy;
  log_prob_and_entropy(policy, at_mean, logp, entropy);
  for (double v : logp) CHECK(v == doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi)));
  for (double v : entropy) CHECK(v == doctest::Approx(1.4189385332046727));

  // Doubling std adds log 2 to the entropy.
  for (double& v : policy.log_std.data) v = std::log(2.0);
  log_prob_and_entropy(policy, at_mean, logp, entropy);
  for (double v : entropy)
    CHECK(v == doctest::Approx(1.4189385332046727 + std::log(2.0)));
}

TEST_CASE("sample_action log-probs agree with log_prob_and_entropy") {
  Rng rng(6);
  GaussianPolicy policy;
  policy.mean = ChannelField(2, FieldShape{8, 0});
  policy.log_std = ChannelField(2, FieldShape{8, 0});
  for (double& v : policy.mean.data) v = rng.uniform(-1, 1);
  for (double& v : policy.log_std.data) v = rng.uniform(-2, 0.5);

  std::vector<double> logp_sampled;
  ChannelField action = sample_action(policy, rng, &logp_sampled);
  std::vector<double> logp, entropy;
  log_prob_and_entropy(policy, action, logp, entropy);
  for (size_t i = 0; i < logp.size(); ++i)
    CHECK(logp[i] == doctest::Approx(logp_sampled[i]).epsilon(1e-10));
}

TEST_CASE("empirical sample mean matches the policy mean") {
  GaussianPolicy policy;
  policy.mean = ChannelField(1, FieldShape{4, 0});
  policy.log_std = ChannelField(1, FieldShape{4, 0});
  for (int i = 0; i < 4; ++i) {
    policy.mean.channel(0)[i] = -1.0 + i * 0.5;
    policy.log_std.channel(0)[i] = std::log(0.7);
  }
  Rng rng(7);
  const int n = 100000;
  std::vector<double> sums(4, 0.0);
  for (int k = 0; k < n; ++k) {
    ChannelField a = sample_action(policy, rng);
    for (int i = 0; i < 4; ++i) sums[i] += a.channel(0)[i];
  }
  const double se = 0.7 / std::sqrt(static_cast<double>(n));
  for (int i = 0; i < 4; ++i)
    CHECK(std::abs(sums[i] / n - policy.mean.channel(0)[i]) < 4.0 * se);
}

TEST_CASE("analytic gradients match central finite differences") {
  Rng rng(8);

  SUBCASE("single 1d conv layer") {
    NetworkConfig cfg = tiny_config(1);
    cfg.dilations = {2};
    NetworkParams params = init_params(cfg, rng);
    ChannelField obs = random_obs(3, FieldShape{8, 0}, rng);
    CHECK(max_relative_gradient_error(params, obs, rng) < 1e-4);
  }

  SUBCASE("composed 1d network") {
    NetworkParams params = init_params(tiny_config(1), rng);
    ChannelField obs = random_obs(3, FieldShape{8, 0}, rng);
    CHECK(max_relative_gradient_error(params, obs, rng) < 1e-4);
  }

  SUBCASE("composed 2d network") {
    NetworkParams params = init_params(tiny_config(2), rng);
    ChannelField obs = random_obs(3, FieldShape{4, 4}, rng);
    CHECK(max_relative_gradient_error(params, obs, rng) < 1e-4);
  }
}

TEST_CASE("zero output gradient yields zero parameter gradient") {
  Rng rng(9);
  NetworkParams params = init_params(tiny_config(1), rng);
  ChannelField obs = random_obs(3, FieldShape{8, 0}, rng);
  ForwardTrace trace;
  forward(params, obs, &trace);

  OutputGrads out_grads;
  out_grads.d_mean = ChannelField(1, obs.shape);
  out_grads.d_log_std = ChannelField(1, obs.shape);
  out_grads.d_value.assign(obs.shape.cells(), 0.0);
  GradientBuffer grads = zeros_like(params);
  backward(params, trace, out_grads, grads);
  for (const auto* layer : grads.layers()) {
    for (double g : layer->w) CHECK(g == 0.0);
    for (double g : layer->b) CHECK(g == 0.0);
  }
}

TEST_CASE("relu blocks gradient at dead units") {
  // One layer, one channel, fixed weights; a strongly negative bias makes the
  // unit dead for the probe input, so every gradient must vanish.
  NetworkConfig cfg;
  cfg.spatial_dims = 1;
  cfg.in_channels = 1;
  cfg.action_channels = 1;
  cfg.hidden_channels = 1;
  cfg.dilations = {1};
  Rng rng(10);
  NetworkParams params = init_params(cfg, rng);
  params.backbone[0].b[0] = -100.0;

  ChannelField obs(1, FieldShape{8, 0});
  for (double& v : obs.data) v = rng.uniform(-1, 1);
  ForwardTrace trace;
  forward(params, obs, &trace);

  OutputGrads out_grads;
  out_grads.d_mean = ChannelField(1, obs.shape);
  for (double& v : out_grads.d_mean.data) v = 1.0;
  out_grads.d_log_std = ChannelField(1, obs.shape);
  out_grads.d_value.assign(8, 0.0);

  GradientBuffer grads = zeros_like(params);
  backward(params, trace, out_grads, grads);
  for (double g : grads.backbone[0].w) CHECK(g == 0.0);
  for (double g : grads.backbone[0].b) CHECK(g == 0.0);
}

TEST_CASE("fresh networks start with small actions") {
  Rng rng(11);
  NetworkConfig cfg;
  cfg.spatial_dims = 1;
  cfg.in_channels = 3;
  cfg.action_channels = 1;
  NetworkParams params = init_params(cfg, rng);

  for (const auto* layer : params.layers()) {
    for (double w : layer->w) CHECK(std::isfinite(w));
    for (double b : layer->b) CHECK(std::isfinite(b));
  }

  double max_mean = 0.0;
  double log_std_acc = 0.0;
  int log_std_count = 0;
  for (int trial = 0; trial < 5; ++trial) {
    ChannelField obs = random_obs(3, FieldShape{64, 0}, rng);
    ForwardResult fwd = forward(params, obs);
    for (double v : fwd.policy.mean.data) max_mean = std::max(max_mean, std::abs(v));
    for (double v : fwd.policy.log_std.data) {
      log_std_acc += v;
      ++log_std_count;
    }
  }
  CHECK(max_mean < 0.2);  // policy-head 1e-2 scaling keeps early actions small
  CHECK(log_std_acc / log_std_count == doctest::Approx(-1.0).epsilon(0.2));

  Rng rng_a(42), rng_b(42);
  NetworkParams p1 = init_params(cfg, rng_a);
  NetworkParams p2 = init_params(cfg, rng_b);
  CHECK(p1.backbone[0].w == p2.backbone[0].w);
  CHECK(p1.policy_head.w == p2.policy_head.w);
}

TEST_CASE("checkpoint round trip is bit exact") {
  namespace fs = std::filesystem;
  Rng rng(12);
  NetworkConfig cfg = tiny_config(1);
  cfg.pde_tag = 1;
  NetworkParams params = init_params(cfg, rng);
  fs::path path = fs::temp_directory_path() / "mmsc_ckpt_roundtrip.ckpt";
  save_checkpoint(params, path.string());

  NetworkParams loaded = load_checkpoint(path.string());
  CHECK(loaded.config == params.config);
  REQUIRE(loaded.backbone.size() == params.backbone.size());
  for (size_t l = 0; l < params.backbone.size(); ++l) {
    CHECK(loaded.backbone[l].w == params.backbone[l].w);
    CHECK(loaded.backbone[l].b == params.backbone[l].b);
  }
  CHECK(loaded.policy_head.w == params.policy_head.w);
  CHECK(loaded.value_head.w == params.value_head.w);
}

TEST_CASE("checkpoint guards reject bad files and wrong kinds") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path();

  fs::path bad_magic = dir / "mmsc_bad_magic.ckpt";
  {
    std::ofstream out(bad_magic, std::ios::binary);
    out << "NOPE then some bytes";
  }
  CHECK_THROWS_WITH_AS(load_checkpoint(bad_magic.string()),
                       doctest::Contains("magic"), std::runtime_error);

  Rng rng(13);
  NetworkConfig cfg = tiny_config(1);
  cfg.pde_tag = 1;  // tagged as 1d burgers
  NetworkParams params = init_params(cfg, rng);
  fs::path tagged = dir / "mmsc_tagged.ckpt";
  save_checkpoint(params, tagged.string());
  CHECK_THROWS_WITH_AS(load_checkpoint_for(tagged.string(), 2),
                       doctest::Contains("tag mismatch"), std::runtime_error);

  // Truncated file.
  fs::path truncated = dir / "mmsc_truncated.ckpt";
  {
    std::ifstream in(tagged, std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::ofstream out(truncated, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  CHECK_THROWS_AS(load_checkpoint(truncated.string()), std::runtime_error);
}
