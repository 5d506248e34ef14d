#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mmsc/grid.hpp"
#include "mmsc/rng.hpp"

namespace mmsc {

/// Network layout: a stack of kernel-3 circular convolutions with ReLU
/// between them, followed by one policy head (mean and log-std channels per
/// action component) and one value head (one channel), both kernel-3
/// convolutions sharing the backbone activations. Circular padding equal to
/// the dilation keeps the spatial size fixed end to end. 1D problems use 1D
/// convolutions along x; 2D problems use 3x3 kernels.
struct NetworkConfig {
  int spatial_dims = 1;  // 1 or 2
  int in_channels = 3;
  int action_channels = 1;
  int hidden_channels = 64;
  std::vector<int> dilations = {1, 2, 3, 4, 3, 2};
  /// PdeType value the checkpoint was trained for; 0 marks free-standing
  /// networks (tests, toys).
  std::uint32_t pde_tag = 0;

  int policy_out_channels() const { return 2 * action_channels; }
  int taps() const { return spatial_dims == 2 ? 9 : 3; }
  bool operator==(const NetworkConfig&) const = default;
};

/// One convolution layer: weights [out_ch][in_ch][taps] and per-output bias.
struct ConvLayerParams {
  int in_ch = 0;
  int out_ch = 0;
  int dilation = 1;
  std::vector<double> w;
  std::vector<double> b;

  static ConvLayerParams zeros(int in_ch, int out_ch, int dilation, int taps);
  size_t param_count() const { return w.size() + b.size(); }
};

struct NetworkParams {
  NetworkConfig config;
  std::vector<ConvLayerParams> backbone;
  ConvLayerParams policy_head;
  ConvLayerParams value_head;

  size_t param_count() const;
  std::vector<ConvLayerParams*> layers();
  std::vector<const ConvLayerParams*> layers() const;
};

/// Same structure as the parameters, used to accumulate d loss / d theta.
using GradientBuffer = NetworkParams;

NetworkParams zeros_like(const NetworkParams& params);

/// He-style fan-in init for the ReLU stack. The policy head is additionally
/// scaled by 1e-2 and its log-std biases start at -1 so a fresh policy takes
/// small actions; the value head uses the plain He scaling.
NetworkParams init_params(const NetworkConfig& config, Rng& rng);

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;

/// Policy head output split into mean and clamped log-std stacks.
struct GaussianPolicy {
  ChannelField mean;
  ChannelField log_std;
};

/// Saved intermediates of one forward pass, enough for an exact backward.
struct ForwardTrace {
  std::vector<ChannelField> acts;  // acts[0] = input, acts[l] = post-ReLU of layer l
  ChannelField policy_raw;         // policy head output before the log-std clamp
  std::vector<double> value;
};

struct ForwardResult {
  GaussianPolicy policy;
  std::vector<double> value;
};

ForwardResult forward(const NetworkParams& params, const ChannelField& obs,
                      ForwardTrace* trace = nullptr);

/// Gradients of a scalar loss with respect to the network outputs.
struct OutputGrads {
  ChannelField d_mean;
  ChannelField d_log_std;
  std::vector<double> d_value;
};

/// Exact backward through heads, ReLUs and convolutions; adds parameter
/// gradients into `grads`. Requires the trace of the matching forward call.
void backward(const NetworkParams& params, const ForwardTrace& trace, const OutputGrads& out_grads,
              GradientBuffer& grads);

/// Diagonal Gaussian sampling; per-cell log-probability sums the action
/// channels. Fills log_prob_cells when non-null.
ChannelField sample_action(const GaussianPolicy& policy, Rng& rng,
                           std::vector<double>* log_prob_cells = nullptr);

void log_prob_and_entropy(const GaussianPolicy& policy, const ChannelField& action,
                          std::vector<double>& log_prob, std::vector<double>& entropy);

// Binary checkpoint: magic "MMSC", version, PDE tag, then the layer stack
// with u32 dims and little-endian f64 parameters. Round-trips bit exact.
void save_checkpoint(const NetworkParams& params, const std::string& path);
NetworkParams load_checkpoint(const std::string& path);
/// Load plus a guard that the checkpoint was produced for `expected_tag`.
NetworkParams load_checkpoint_for(const std::string& path, std::uint32_t expected_tag);

}  // namespace mmsc
