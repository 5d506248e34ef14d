#include "mmsc/policy_net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace mmsc {

namespace {

inline int wrap(int i, int n) {
  i %= n;
  return i < 0 ? i + n : i;
}

// Fused three-tap periodic kernels: one pass over the row applies all taps of
// a kernel-3 convolution. The interior loop is contiguous and carries nearly
// all of the network's FLOPs; the wrapped edges are handled separately.
//   dst[i] += w0 src[i-d] + w1 src[i] + w2 src[i+d]   (indices mod n)
inline void axpy3_shifted(double* __restrict dst, const double* __restrict src, int n, int d,
                          double w0, double w1, double w2) {
  d = wrap(d, n);
  const int lo = d;
  const int hi = n - d;
  if (lo <= hi) {
    for (int i = 0; i < lo; ++i) dst[i] += w0 * src[i - d + n] + w1 * src[i] + w2 * src[i + d];
    for (int i = lo; i < hi; ++i) dst[i] += w0 * src[i - d] + w1 * src[i] + w2 * src[i + d];
    for (int i = hi; i < n; ++i) dst[i] += w0 * src[i - d] + w1 * src[i] + w2 * src[i + d - n];
  } else {
    for (int i = 0; i < n; ++i)
      dst[i] += w0 * src[wrap(i - d, n)] + w1 * src[i] + w2 * src[wrap(i + d, n)];
  }
}

//   out[k] = sum_i a[i] * b[i + (k-1) d]   (indices mod n), k = 0..2
inline void dot3_shifted(const double* __restrict a, const double* __restrict b, int n, int d,
                         double* __restrict out) {
  d = wrap(d, n);
  double s0 = 0.0, s1 = 0.0, s2 = 0.0;
  const int lo = d;
  const int hi = n - d;
  if (lo <= hi) {
    for (int i = 0; i < lo; ++i) {
      s0 += a[i] * b[i - d + n];
      s1 += a[i] * b[i];
      s2 += a[i] * b[i + d];
    }
    for (int i = lo; i < hi; ++i) {
      s0 += a[i] * b[i - d];
      s1 += a[i] * b[i];
      s2 += a[i] * b[i + d];
    }
    for (int i = hi; i < n; ++i) {
      s0 += a[i] * b[i - d];
      s1 += a[i] * b[i];
      s2 += a[i] * b[i + d - n];
    }
  } else {
    for (int i = 0; i < n; ++i) {
      s0 += a[i] * b[wrap(i - d, n)];
      s1 += a[i] * b[i];
      s2 += a[i] * b[wrap(i + d, n)];
    }
  }
  out[0] += s0;
  out[1] += s1;
  out[2] += s2;
}

ChannelField conv_apply(const ConvLayerParams& layer, const ChannelField& in) {
  const FieldShape shape = in.shape;
  ChannelField out(layer.out_ch, shape);
  const int dil = layer.dilation;

  if (!shape.is_2d()) {
    const int n = shape.nx;
    for (int oc = 0; oc < layer.out_ch; ++oc) {
      double* dst = out.channel(oc);
      std::fill(dst, dst + n, layer.b[oc]);
      for (int ic = 0; ic < layer.in_ch; ++ic) {
        const double* src = in.channel(ic);
        const double* w = &layer.w[(static_cast<size_t>(oc) * layer.in_ch + ic) * 3];
        axpy3_shifted(dst, src, n, dil, w[0], w[1], w[2]);
      }
    }
    return out;
  }

  const int nx = shape.nx, ny = shape.ny;
  for (int oc = 0; oc < layer.out_ch; ++oc) {
    double* dst = out.channel(oc);
    std::fill(dst, dst + nx * ny, layer.b[oc]);
    for (int ic = 0; ic < layer.in_ch; ++ic) {
      const double* src = in.channel(ic);
      const double* w = &layer.w[(static_cast<size_t>(oc) * layer.in_ch + ic) * 9];
      for (int kx = 0; kx < 3; ++kx) {
        const int offx = (kx - 1) * dil;
        for (int ix = 0; ix < nx; ++ix)
          axpy3_shifted(dst + static_cast<size_t>(ix) * ny,
                        src + static_cast<size_t>(wrap(ix + offx, nx)) * ny, ny, dil,
                        w[kx * 3 + 0], w[kx * 3 + 1], w[kx * 3 + 2]);
      }
    }
  }
  return out;
}

// Accumulates layer gradients and, when d_in is non-null, the gradient with
// respect to the layer input (the transposed convolution of d_out).
void conv_backward(const ConvLayerParams& layer, const ChannelField& in, const ChannelField& d_out,
                   ChannelField* d_in, ConvLayerParams& grads) {
  const FieldShape shape = in.shape;
  const int dil = layer.dilation;

  if (!shape.is_2d()) {
    const int n = shape.nx;
    for (int oc = 0; oc < layer.out_ch; ++oc) {
      const double* dout = d_out.channel(oc);
      double bsum = 0.0;
      for (int i = 0; i < n; ++i) bsum += dout[i];
      grads.b[oc] += bsum;
      for (int ic = 0; ic < layer.in_ch; ++ic) {
        const double* src = in.channel(ic);
        const size_t wbase = (static_cast<size_t>(oc) * layer.in_ch + ic) * 3;
        dot3_shifted(dout, src, n, dil, &grads.w[wbase]);
        if (d_in) {
          // Transposed convolution: the taps act with mirrored offsets.
          axpy3_shifted(d_in->channel(ic), dout, n, dil, layer.w[wbase + 2], layer.w[wbase + 1],
                        layer.w[wbase + 0]);
        }
      }
    }
    return;
  }

  const int nx = shape.nx, ny = shape.ny;
  for (int oc = 0; oc < layer.out_ch; ++oc) {
    const double* dout = d_out.channel(oc);
    double bsum = 0.0;
    for (int i = 0; i < nx * ny; ++i) bsum += dout[i];
    grads.b[oc] += bsum;
    for (int ic = 0; ic < layer.in_ch; ++ic) {
      const double* src = in.channel(ic);
      const size_t wbase = (static_cast<size_t>(oc) * layer.in_ch + ic) * 9;
      for (int kx = 0; kx < 3; ++kx) {
        const int offx = (kx - 1) * dil;
        for (int ix = 0; ix < nx; ++ix)
          dot3_shifted(dout + static_cast<size_t>(ix) * ny,
                       src + static_cast<size_t>(wrap(ix + offx, nx)) * ny, ny, dil,
                       &grads.w[wbase + static_cast<size_t>(kx) * 3]);
        if (d_in) {
          double* din = d_in->channel(ic);
          const double* w = &layer.w[wbase + static_cast<size_t>(kx) * 3];
          for (int jx = 0; jx < nx; ++jx)
            axpy3_shifted(din + static_cast<size_t>(jx) * ny,
                          dout + static_cast<size_t>(wrap(jx - offx, nx)) * ny, ny, dil, w[2], w[1],
                          w[0]);
        }
      }
    }
  }
}

void relu_inplace(ChannelField& f) {
  for (double& v : f.data)
    if (v < 0.0) v = 0.0;
}

constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5 * log(2 pi)

}  // namespace

ConvLayerParams ConvLayerParams::zeros(int in_ch, int out_ch, int dilation, int taps) {
  ConvLayerParams p;
  p.in_ch = in_ch;
  p.out_ch = out_ch;
  p.dilation = dilation;
  p.w.assign(static_cast<size_t>(out_ch) * in_ch * taps, 0.0);
  p.b.assign(out_ch, 0.0);
  return p;
}

size_t NetworkParams::param_count() const {
  size_t n = policy_head.param_count() + value_head.param_count();
  for (const auto& l : backbone) n += l.param_count();
  return n;
}

std::vector<ConvLayerParams*> NetworkParams::layers() {
  std::vector<ConvLayerParams*> out;
  for (auto& l : backbone) out.push_back(&l);
  out.push_back(&policy_head);
  out.push_back(&value_head);
  return out;
}

std::vector<const ConvLayerParams*> NetworkParams::layers() const {
  std::vector<const ConvLayerParams*> out;
  for (const auto& l : backbone) out.push_back(&l);
  out.push_back(&policy_head);
  out.push_back(&value_head);
  return out;
}

NetworkParams zeros_like(const NetworkParams& params) {
  NetworkParams z;
  z.config = params.config;
  const int taps = params.config.taps();
  for (const auto& l : params.backbone)
    z.backbone.push_back(ConvLayerParams::zeros(l.in_ch, l.out_ch, l.dilation, taps));
  z.policy_head = ConvLayerParams::zeros(params.policy_head.in_ch, params.policy_head.out_ch,
                                         params.policy_head.dilation, taps);
  z.value_head = ConvLayerParams::zeros(params.value_head.in_ch, params.value_head.out_ch,
                                        params.value_head.dilation, taps);
  return z;
}

NetworkParams init_params(const NetworkConfig& config, Rng& rng) {
  if (config.spatial_dims != 1 && config.spatial_dims != 2)
    throw std::invalid_argument("init_params: spatial_dims must be 1 or 2");
  if (config.dilations.empty()) throw std::invalid_argument("init_params: empty backbone");

  NetworkParams p;
  p.config = config;
  const int taps = config.taps();

  auto he_fill = [&](ConvLayerParams& layer, double scale) {
    double limit = std::sqrt(6.0 / (layer.in_ch * taps));
    for (double& w : layer.w) w = scale * rng.uniform(-limit, limit);
  };

  int in_ch = config.in_channels;
  for (int dil : config.dilations) {
    ConvLayerParams layer = ConvLayerParams::zeros(in_ch, config.hidden_channels, dil, taps);
    he_fill(layer, 1.0);
    p.backbone.push_back(std::move(layer));
    in_ch = config.hidden_channels;
  }

  p.policy_head = ConvLayerParams::zeros(in_ch, config.policy_out_channels(), 1, taps);
  he_fill(p.policy_head, 1e-2);
  for (int c = config.action_channels; c < config.policy_out_channels(); ++c)
    p.policy_head.b[c] = -1.0;  // log-std channels start at std = e^-1

  p.value_head = ConvLayerParams::zeros(in_ch, 1, 1, taps);
  he_fill(p.value_head, 1.0);
  return p;
}

ForwardResult forward(const NetworkParams& params, const ChannelField& obs, ForwardTrace* trace) {
  if (obs.channels != params.config.in_channels)
    throw std::invalid_argument("forward: observation channel mismatch");
  if ((params.config.spatial_dims == 2) != obs.shape.is_2d())
    throw std::invalid_argument("forward: observation dimensionality mismatch");

  if (trace) {
    trace->acts.clear();
    trace->acts.reserve(params.backbone.size() + 1);
    trace->acts.push_back(obs);
  }

  ChannelField cur = obs;
  for (const auto& layer : params.backbone) {
    cur = conv_apply(layer, cur);
    relu_inplace(cur);
    if (trace) trace->acts.push_back(cur);
  }

  ChannelField policy_raw = conv_apply(params.policy_head, cur);
  ChannelField value_field = conv_apply(params.value_head, cur);

  const int a_ch = params.config.action_channels;
  const int cells = obs.cells();
  ForwardResult result;
  result.policy.mean = ChannelField(a_ch, obs.shape);
  result.policy.log_std = ChannelField(a_ch, obs.shape);
  for (int c = 0; c < a_ch; ++c) {
    std::copy(policy_raw.channel(c), policy_raw.channel(c) + cells, result.policy.mean.channel(c));
    const double* raw = policy_raw.channel(a_ch + c);
    double* ls = result.policy.log_std.channel(c);
    for (int i = 0; i < cells; ++i) ls[i] = std::clamp(raw[i], kLogStdMin, kLogStdMax);
  }
  result.value.assign(value_field.channel(0), value_field.channel(0) + cells);

  if (trace) {
    trace->policy_raw = std::move(policy_raw);
    trace->value = result.value;
  }
  return result;
}

void backward(const NetworkParams& params, const ForwardTrace& trace, const OutputGrads& out_grads,
              GradientBuffer& grads) {
  const int a_ch = params.config.action_channels;
  const int cells = trace.acts.front().cells();
  const FieldShape shape = trace.acts.front().shape;

  // Head output gradient; the clamp blocks log-std gradient outside its range.
  ChannelField d_policy_raw(2 * a_ch, shape);
  for (int c = 0; c < a_ch; ++c) {
    std::copy(out_grads.d_mean.channel(c), out_grads.d_mean.channel(c) + cells,
              d_policy_raw.channel(c));
    const double* raw = trace.policy_raw.channel(a_ch + c);
    const double* dls = out_grads.d_log_std.channel(c);
    double* dst = d_policy_raw.channel(a_ch + c);
    for (int i = 0; i < cells; ++i)
      dst[i] = (raw[i] >= kLogStdMin && raw[i] <= kLogStdMax) ? dls[i] : 0.0;
  }

  ChannelField d_value(1, shape);
  std::copy(out_grads.d_value.begin(), out_grads.d_value.end(), d_value.channel(0));

  const ChannelField& backbone_out = trace.acts.back();
  ChannelField d_hidden(backbone_out.channels, shape);
  conv_backward(params.policy_head, backbone_out, d_policy_raw, &d_hidden, grads.policy_head);
  conv_backward(params.value_head, backbone_out, d_value, &d_hidden, grads.value_head);

  for (int l = static_cast<int>(params.backbone.size()) - 1; l >= 0; --l) {
    const ChannelField& post = trace.acts[l + 1];
    // ReLU: gradient passes only where the activation is positive.
    for (size_t i = 0; i < d_hidden.data.size(); ++i)
      if (post.data[i] <= 0.0) d_hidden.data[i] = 0.0;

    const ChannelField& input = trace.acts[l];
    if (l > 0) {
      ChannelField d_prev(input.channels, shape);
      conv_backward(params.backbone[l], input, d_hidden, &d_prev, grads.backbone[l]);
      d_hidden = std::move(d_prev);
    } else {
      conv_backward(params.backbone[l], input, d_hidden, nullptr, grads.backbone[l]);
    }
  }
}

ChannelField sample_action(const GaussianPolicy& policy, Rng& rng,
                           std::vector<double>* log_prob_cells) {
  const int a_ch = policy.mean.channels;
  const int cells = policy.mean.cells();
  ChannelField action(a_ch, policy.mean.shape);
  if (log_prob_cells) log_prob_cells->assign(cells, 0.0);

  for (int c = 0; c < a_ch; ++c) {
    const double* mean = policy.mean.channel(c);
    const double* ls = policy.log_std.channel(c);
    double* a = action.channel(c);
    for (int i = 0; i < cells; ++i) {
      double std = std::exp(ls[i]);
      double z = rng.normal();
      a[i] = mean[i] + std * z;
      if (log_prob_cells) (*log_prob_cells)[i] += -kHalfLog2Pi - ls[i] - 0.5 * z * z;
    }
  }
  return action;
}

void log_prob_and_entropy(const GaussianPolicy& policy, const ChannelField& action,
                          std::vector<double>& log_prob, std::vector<double>& entropy) {
  const int a_ch = policy.mean.channels;
  const int cells = policy.mean.cells();
  if (action.channels != a_ch || action.shape != policy.mean.shape)
    throw std::invalid_argument("log_prob_and_entropy: action shape mismatch");

  log_prob.assign(cells, 0.0);
  entropy.assign(cells, 0.0);
  for (int c = 0; c < a_ch; ++c) {
    const double* mean = policy.mean.channel(c);
    const double* ls = policy.log_std.channel(c);
    const double* a = action.channel(c);
    for (int i = 0; i < cells; ++i) {
      double z = (a[i] - mean[i]) * std::exp(-ls[i]);
      log_prob[i] += -kHalfLog2Pi - ls[i] - 0.5 * z * z;
      entropy[i] += kHalfLog2Pi + 0.5 + ls[i];  // 0.5 log(2 pi e sigma^2)
    }
  }
}

namespace {

constexpr char kMagic[4] = {'M', 'M', 'S', 'C'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8), static_cast<char>(v >> 16),
               static_cast<char>(v >> 24)};
  os.write(b, 4);
}

void put_f64(std::ostream& os, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>(v >> (8 * i));
  os.write(b, 8);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("truncated checkpoint");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

double get_f64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}

void put_layer(std::ostream& os, const ConvLayerParams& layer, int taps) {
  put_u32(os, static_cast<std::uint32_t>(layer.in_ch));
  put_u32(os, static_cast<std::uint32_t>(layer.out_ch));
  put_u32(os, static_cast<std::uint32_t>(layer.dilation));
  put_u32(os, static_cast<std::uint32_t>(taps));
  for (double w : layer.w) put_f64(os, w);
  for (double b : layer.b) put_f64(os, b);
}

ConvLayerParams get_layer(std::istream& is, int expected_taps) {
  std::uint32_t in_ch = get_u32(is);
  std::uint32_t out_ch = get_u32(is);
  std::uint32_t dilation = get_u32(is);
  std::uint32_t taps = get_u32(is);
  if (taps != static_cast<std::uint32_t>(expected_taps) || in_ch == 0 || out_ch == 0)
    throw std::runtime_error("corrupt checkpoint layer header");
  ConvLayerParams layer = ConvLayerParams::zeros(static_cast<int>(in_ch), static_cast<int>(out_ch),
                                                 static_cast<int>(dilation), expected_taps);
  for (double& w : layer.w) w = get_f64(is);
  for (double& b : layer.b) b = get_f64(is);
  return layer;
}

}  // namespace

void save_checkpoint(const NetworkParams& params, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os.write(kMagic, 4);
  put_u32(os, kVersion);
  put_u32(os, params.config.pde_tag);
  put_u32(os, static_cast<std::uint32_t>(params.config.spatial_dims));
  put_u32(os, static_cast<std::uint32_t>(params.config.in_channels));
  put_u32(os, static_cast<std::uint32_t>(params.config.action_channels));
  put_u32(os, static_cast<std::uint32_t>(params.config.hidden_channels));
  put_u32(os, static_cast<std::uint32_t>(params.backbone.size()));
  const int taps = params.config.taps();
  for (const auto& layer : params.backbone) put_layer(os, layer, taps);
  put_layer(os, params.policy_head, taps);
  put_layer(os, params.value_head, taps);
  if (!os) throw std::runtime_error("write failed: " + path);
}

NetworkParams load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("bad checkpoint magic: " + path);
  std::uint32_t version = get_u32(is);
  if (version != kVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));

  NetworkParams p;
  p.config.pde_tag = get_u32(is);
  p.config.spatial_dims = static_cast<int>(get_u32(is));
  p.config.in_channels = static_cast<int>(get_u32(is));
  p.config.action_channels = static_cast<int>(get_u32(is));
  p.config.hidden_channels = static_cast<int>(get_u32(is));
  std::uint32_t n_backbone = get_u32(is);
  if (p.config.spatial_dims != 1 && p.config.spatial_dims != 2)
    throw std::runtime_error("corrupt checkpoint header");
  if (n_backbone == 0 || n_backbone > 64) throw std::runtime_error("corrupt checkpoint header");

  const int taps = p.config.taps();
  p.config.dilations.clear();
  for (std::uint32_t l = 0; l < n_backbone; ++l) {
    p.backbone.push_back(get_layer(is, taps));
    p.config.dilations.push_back(p.backbone.back().dilation);
  }
  p.policy_head = get_layer(is, taps);
  p.value_head = get_layer(is, taps);
  is.peek();
  if (!is.eof()) throw std::runtime_error("trailing bytes in checkpoint: " + path);
  return p;
}

NetworkParams load_checkpoint_for(const std::string& path, std::uint32_t expected_tag) {
  NetworkParams p = load_checkpoint(path);
  if (p.config.pde_tag != expected_tag)
    throw std::runtime_error("checkpoint PDE tag mismatch: file has " +
                             std::to_string(p.config.pde_tag) + ", expected " +
                             std::to_string(expected_tag));
  return p;
}

}  // namespace mmsc
