#include "neural/neural.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include "common/error.h"
#include "common/io.h"
#include "common/rng.h"
#include "json.hpp"

namespace ladproto {

using nlohmann::json;

std::string shape_string(const std::vector<size_t>& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += " x ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

size_t shape_product(const std::vector<size_t>& shape) {
  size_t n = 1;
  for (size_t d : shape) n *= d;
  return n;
}

template <typename T>
Tensor<T>::Tensor(std::vector<size_t> s, T fill) : shape(std::move(s)), values(shape_product(shape), fill) {}

namespace layers {

namespace {

template <typename T>
void require_rank3(const Tensor<T>& x, const char* what) {
  if (x.shape.size() != 3) fail(ErrorKind::kShape, std::string(what) + ": expected [C x H x W], got " + shape_string(x.shape));
}

}  // namespace

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  require_rank3(x, "conv2d");
  const size_t cin = x.shape[0], h = x.shape[1], w = x.shape[2];
  if (weight.shape.size() != 4 || weight.shape[1] != cin || weight.shape[2] != weight.shape[3] ||
      weight.shape[2] % 2 == 0) {
    fail(ErrorKind::kShape, "conv2d: weight " + shape_string(weight.shape) + " does not fit input " + shape_string(x.shape));
  }
  const size_t cout = weight.shape[0], k = weight.shape[2];
  if (bias.size() != cout) fail(ErrorKind::kShape, "conv2d: bias " + shape_string(bias.shape) + " for " + std::to_string(cout) + " filters");
  const ptrdiff_t pad = static_cast<ptrdiff_t>(k / 2);
  Tensor<T> out({cout, h, w});
  const ptrdiff_t H = static_cast<ptrdiff_t>(h), W = static_cast<ptrdiff_t>(w);
  for (size_t co = 0; co < cout; ++co) {
    T* o = &out.values[co * h * w];
    std::fill(o, o + h * w, bias.values[co]);
    for (size_t ci = 0; ci < cin; ++ci) {
      const T* in = &x.values[ci * h * w];
      for (size_t ky = 0; ky < k; ++ky) {
        const ptrdiff_t dy = static_cast<ptrdiff_t>(ky) - pad;
        const ptrdiff_t y0 = std::max<ptrdiff_t>(0, -dy), y1 = std::min(H, H - dy);
        for (size_t kx = 0; kx < k; ++kx) {
          const ptrdiff_t dx = static_cast<ptrdiff_t>(kx) - pad;
          const ptrdiff_t x0 = std::max<ptrdiff_t>(0, -dx), x1 = std::min(W, W - dx);
          const T wv = weight.values[((co * cin + ci) * k + ky) * k + kx];
          for (ptrdiff_t y = y0; y < y1; ++y) {
            T* orow = o + y * W;
            const T* irow = in + (y + dy) * W + dx;
            for (ptrdiff_t xx = x0; xx < x1; ++xx) orow[xx] += wv * irow[xx];
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& weight, const std::vector<T>& dout,
                     std::vector<T>& dx, std::vector<T>& dweight, std::vector<T>& dbias) {
  const size_t cin = x.shape[0], h = x.shape[1], w = x.shape[2];
  const size_t cout = weight.shape[0], k = weight.shape[2];
  const ptrdiff_t pad = static_cast<ptrdiff_t>(k / 2);
  const ptrdiff_t H = static_cast<ptrdiff_t>(h), W = static_cast<ptrdiff_t>(w);
  for (size_t co = 0; co < cout; ++co) {
    const T* g = &dout[co * h * w];
    T bsum = 0;
    for (size_t i = 0; i < h * w; ++i) bsum += g[i];
    dbias[co] += bsum;
    for (size_t ci = 0; ci < cin; ++ci) {
      const T* in = &x.values[ci * h * w];
      T* din = &dx[ci * h * w];
      for (size_t ky = 0; ky < k; ++ky) {
        const ptrdiff_t dy = static_cast<ptrdiff_t>(ky) - pad;
        const ptrdiff_t y0 = std::max<ptrdiff_t>(0, -dy), y1 = std::min(H, H - dy);
        for (size_t kx = 0; kx < k; ++kx) {
          const ptrdiff_t dxo = static_cast<ptrdiff_t>(kx) - pad;
          const ptrdiff_t x0 = std::max<ptrdiff_t>(0, -dxo), x1 = std::min(W, W - dxo);
          const size_t widx = ((co * cin + ci) * k + ky) * k + kx;
          const T wv = weight.values[widx];
          T acc = 0;
          for (ptrdiff_t y = y0; y < y1; ++y) {
            const T* grow = g + y * W;
            const T* irow = in + (y + dy) * W + dxo;
            T* drow = din + (y + dy) * W + dxo;
            for (ptrdiff_t xx = x0; xx < x1; ++xx) {
              acc += grow[xx] * irow[xx];
              drow[xx] += wv * grow[xx];
            }
          }
          dweight[widx] += acc;
        }
      }
    }
  }
}

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x) {
  Tensor<T> y = x;
  y.grad.clear();
  for (auto& v : y.values) v = v > T(0) ? v : T(0);
  return y;
}

template <typename T>
void relu_backward(const Tensor<T>& y, const std::vector<T>& dout, std::vector<T>& dx) {
  for (size_t i = 0; i < dout.size(); ++i) {
    if (y.values[i] > T(0)) dx[i] += dout[i];
  }
}

template <typename T>
Tensor<T> maxpool_forward(const Tensor<T>& x, std::vector<uint32_t>& argmax) {
  require_rank3(x, "maxpool");
  const size_t c = x.shape[0], h = x.shape[1], w = x.shape[2];
  const size_t oh = h / 2, ow = w / 2;
  if (oh == 0 || ow == 0) fail(ErrorKind::kShape, "maxpool: input " + shape_string(x.shape) + " is smaller than the 2x2 window");
  Tensor<T> out({c, oh, ow});
  argmax.assign(out.size(), 0);
  for (size_t ch = 0; ch < c; ++ch) {
    for (size_t y = 0; y < oh; ++y) {
      for (size_t xx = 0; xx < ow; ++xx) {
        size_t best = (ch * h + 2 * y) * w + 2 * xx;
        for (size_t dy = 0; dy < 2; ++dy) {
          for (size_t dx = 0; dx < 2; ++dx) {
            const size_t idx = (ch * h + 2 * y + dy) * w + 2 * xx + dx;
            if (x.values[idx] > x.values[best]) best = idx;
          }
        }
        const size_t o = (ch * oh + y) * ow + xx;
        out.values[o] = x.values[best];
        argmax[o] = static_cast<uint32_t>(best);
      }
    }
  }
  return out;
}

template <typename T>
void maxpool_backward(const std::vector<uint32_t>& argmax, const std::vector<T>& dout, std::vector<T>& dx) {
  for (size_t i = 0; i < dout.size(); ++i) dx[argmax[i]] += dout[i];
}

template <typename T>
Tensor<T> global_avg_pool_forward(const Tensor<T>& x) {
  require_rank3(x, "global pool");
  const size_t c = x.shape[0], hw = x.shape[1] * x.shape[2];
  Tensor<T> out({c});
  for (size_t ch = 0; ch < c; ++ch) {
    T s = 0;
    for (size_t i = 0; i < hw; ++i) s += x.values[ch * hw + i];
    out.values[ch] = s / static_cast<T>(hw);
  }
  return out;
}

template <typename T>
void global_avg_pool_backward(const Tensor<T>& x, const std::vector<T>& dout, std::vector<T>& dx) {
  const size_t c = x.shape[0], hw = x.shape[1] * x.shape[2];
  for (size_t ch = 0; ch < c; ++ch) {
    const T g = dout[ch] / static_cast<T>(hw);
    for (size_t i = 0; i < hw; ++i) dx[ch * hw + i] += g;
  }
}

template <typename T>
Tensor<T> channel_norm_forward(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                               const Tensor<T>& mean, const Tensor<T>& var) {
  require_rank3(x, "channel norm");
  const size_t c = x.shape[0], hw = x.shape[1] * x.shape[2];
  if (gamma.size() != c || beta.size() != c || mean.size() != c || var.size() != c) {
    fail(ErrorKind::kShape, "channel norm: parameters do not match " + std::to_string(c) + " channels");
  }
  Tensor<T> out(x.shape);
  for (size_t ch = 0; ch < c; ++ch) {
    const T scale = gamma.values[ch] / std::sqrt(var.values[ch] + static_cast<T>(kNormEps));
    for (size_t i = 0; i < hw; ++i) {
      out.values[ch * hw + i] = scale * (x.values[ch * hw + i] - mean.values[ch]) + beta.values[ch];
    }
  }
  return out;
}

template <typename T>
void channel_norm_backward(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& mean,
                           const Tensor<T>& var, const std::vector<T>& dout, std::vector<T>& dx,
                           std::vector<T>& dgamma, std::vector<T>& dbeta) {
  const size_t c = x.shape[0], hw = x.shape[1] * x.shape[2];
  for (size_t ch = 0; ch < c; ++ch) {
    const T inv = T(1) / std::sqrt(var.values[ch] + static_cast<T>(kNormEps));
    T gsum = 0, gxsum = 0;
    for (size_t i = 0; i < hw; ++i) {
      const T g = dout[ch * hw + i];
      gsum += g;
      gxsum += g * (x.values[ch * hw + i] - mean.values[ch]) * inv;
      dx[ch * hw + i] += g * gamma.values[ch] * inv;
    }
    dgamma[ch] += gxsum;
    dbeta[ch] += gsum;
  }
}

}  // namespace layers

void ArchConfig::validate() const {
  if (channels.empty()) fail(ErrorKind::kConfig, "net: channel plan is empty");
  for (int c : channels) {
    if (c < 1) fail(ErrorKind::kConfig, "net: channel counts must be positive");
  }
  if (convs_per_block < 1) fail(ErrorKind::kConfig, "net: convs_per_block must be >= 1");
  if (kernel_size < 1 || kernel_size % 2 == 0) fail(ErrorKind::kConfig, "net: kernel_size must be odd and positive");
  if (in_channels < 1) fail(ErrorKind::kConfig, "net: in_channels must be >= 1");
  if (input_mels < 0) fail(ErrorKind::kConfig, "net: input_mels must be >= 0");
  if (input_mels > 0 && static_cast<size_t>(input_mels) < min_input_size()) {
    fail(ErrorKind::kConfig, "net: input_mels " + std::to_string(input_mels) + " is below the minimum " +
                                 std::to_string(min_input_size()) + " for " + std::to_string(channels.size()) + " blocks");
  }
}

size_t ArchConfig::min_input_size() const { return size_t{1} << (channels.size() - 1); }

std::string ArchConfig::to_json() const {
  json j = {{"channels", channels},     {"convs_per_block", convs_per_block},
            {"kernel_size", kernel_size}, {"in_channels", in_channels},
            {"input_mels", input_mels},   {"norm", norm}};
  return j.dump();
}

ArchConfig ArchConfig::from_json(const std::string& text) {
  ArchConfig c;
  try {
    const json j = json::parse(text);
    c.channels = j.at("channels").get<std::vector<int>>();
    c.convs_per_block = j.at("convs_per_block").get<int>();
    c.kernel_size = j.at("kernel_size").get<int>();
    c.in_channels = j.at("in_channels").get<int>();
    c.input_mels = j.at("input_mels").get<int>();
    c.norm = j.at("norm").get<bool>();
  } catch (const json::exception& e) {
    fail(ErrorKind::kParse, std::string("architecture config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string ArchConfig::fingerprint() const { return short_hash(to_json()); }

template <typename T>
EmbeddingNetwork<T>::EmbeddingNetwork(const ArchConfig& config) : config_(config) {
  config_.validate();
  const size_t k = static_cast<size_t>(config_.kernel_size);
  size_t in = static_cast<size_t>(config_.in_channels);
  const size_t blocks = config_.channels.size();
  for (size_t b = 0; b < blocks; ++b) {
    const size_t out = static_cast<size_t>(config_.channels[b]);
    for (int c = 0; c < config_.convs_per_block; ++c) {
      const std::string stem = "block" + std::to_string(b + 1) + ".conv" + std::to_string(c + 1);
      layers_.push_back({LayerKind::kConv, static_cast<int>(params_.size()), -1});
      params_.push_back({stem + ".weight", Tensor<T>({out, in, k, k})});
      params_.push_back({stem + ".bias", Tensor<T>({out})});
      if (config_.norm) {
        layers_.push_back({LayerKind::kNorm, static_cast<int>(params_.size()), static_cast<int>(buffers_.size())});
        params_.push_back({stem + ".norm.gamma", Tensor<T>({out}, T(1))});
        params_.push_back({stem + ".norm.beta", Tensor<T>({out})});
        buffers_.push_back({stem + ".norm.mean", Tensor<T>({out})});
        buffers_.push_back({stem + ".norm.var", Tensor<T>({out}, T(1))});
      }
      layers_.push_back({LayerKind::kRelu});
      in = out;
    }
    layers_.push_back({b + 1 < blocks ? LayerKind::kMaxPool : LayerKind::kGlobalPool});
  }
}

template <typename T>
void EmbeddingNetwork<T>::check_input(const Tensor<T>& x) const {
  const size_t min = config_.min_input_size();
  const bool ok = x.shape.size() == 3 && x.shape[0] == static_cast<size_t>(config_.in_channels) &&
                  x.shape[1] >= min && x.shape[2] >= min &&
                  (config_.input_mels == 0 || x.shape[2] == static_cast<size_t>(config_.input_mels));
  if (!ok) {
    const std::string mels = config_.input_mels ? std::to_string(config_.input_mels) : ">=" + std::to_string(min);
    fail(ErrorKind::kShape, "network input " + shape_string(x.shape) + " does not match expected [" +
                                std::to_string(config_.in_channels) + " x >=" + std::to_string(min) + " x " + mels + "]");
  }
}

template <typename T>
Tensor<T> EmbeddingNetwork<T>::run(const Tensor<T>& x, Tape<T>* tape, bool global_pool) const {
  check_input(x);
  if (tape) {
    *tape = Tape<T>{};
    tape->input_shape = x.shape;
  }
  Tensor<T> cur = x;
  cur.grad.clear();
  for (const auto& layer : layers_) {
    if (layer.kind == LayerKind::kGlobalPool && !global_pool) break;
    if (tape) tape->inputs.push_back(cur);
    switch (layer.kind) {
      case LayerKind::kConv:
        cur = layers::conv2d_forward(cur, params_[layer.param].tensor, params_[layer.param + 1].tensor);
        break;
      case LayerKind::kNorm:
        cur = layers::channel_norm_forward(cur, params_[layer.param].tensor, params_[layer.param + 1].tensor,
                                           buffers_[layer.buffer].tensor, buffers_[layer.buffer + 1].tensor);
        break;
      case LayerKind::kRelu:
        cur = layers::relu_forward(cur);
        break;
      case LayerKind::kMaxPool: {
        std::vector<uint32_t> argmax;
        cur = layers::maxpool_forward(cur, argmax);
        if (tape) tape->argmax.push_back(std::move(argmax));
        break;
      }
      case LayerKind::kGlobalPool:
        cur = layers::global_avg_pool_forward(cur);
        break;
    }
  }
  if (tape) tape->valid = true;
  return cur;
}

template <typename T>
Tensor<T> EmbeddingNetwork<T>::forward(const Tensor<T>& x, Tape<T>* tape) const {
  return run(x, tape, true);
}

template <typename T>
Tensor<T> EmbeddingNetwork<T>::forward_feature_map(const Tensor<T>& x) const {
  return run(x, nullptr, false);
}

template <typename T>
std::vector<T> EmbeddingNetwork<T>::backward(const Tape<T>& tape, const std::vector<T>& upstream) {
  if (!tape.valid || tape.inputs.size() != layers_.size()) {
    fail(ErrorKind::kState, "backward called without a matching forward pass");
  }
  if (upstream.size() != static_cast<size_t>(config_.embedding_dim())) {
    fail(ErrorKind::kShape, "backward: upstream gradient has " + std::to_string(upstream.size()) +
                                " entries, embedding has " + std::to_string(config_.embedding_dim()));
  }
  for (auto& p : params_) p.tensor.ensure_grad();
  std::vector<T> g = upstream;
  size_t pool = tape.argmax.size();
  for (size_t li = layers_.size(); li-- > 0;) {
    const auto& layer = layers_[li];
    const Tensor<T>& in = tape.inputs[li];
    std::vector<T> dx(in.size(), T(0));
    switch (layer.kind) {
      case LayerKind::kConv: {
        auto& w = params_[layer.param].tensor;
        auto& b = params_[layer.param + 1].tensor;
        layers::conv2d_backward(in, w, g, dx, w.grad, b.grad);
        break;
      }
      case LayerKind::kNorm: {
        auto& gamma = params_[layer.param].tensor;
        auto& beta = params_[layer.param + 1].tensor;
        layers::channel_norm_backward(in, gamma, buffers_[layer.buffer].tensor, buffers_[layer.buffer + 1].tensor,
                                      g, dx, gamma.grad, beta.grad);
        break;
      }
      case LayerKind::kRelu:
        // relu(x) > 0 exactly where x > 0, so the input serves as the mask.
        layers::relu_backward(in, g, dx);
        break;
      case LayerKind::kMaxPool:
        layers::maxpool_backward(tape.argmax[--pool], g, dx);
        break;
      case LayerKind::kGlobalPool:
        layers::global_avg_pool_backward(in, g, dx);
        break;
    }
    g = std::move(dx);
  }
  return g;
}

template <typename T>
void EmbeddingNetwork<T>::zero_grad() {
  for (auto& p : params_) p.tensor.clear_grad();
}

template <typename T>
size_t EmbeddingNetwork<T>::parameter_count() const {
  size_t n = 0;
  for (const auto& p : params_) n += p.tensor.size();
  return n;
}

template <typename T>
EmbeddingNetwork<T> init_parameters(const ArchConfig& config, uint64_t seed) {
  EmbeddingNetwork<T> net(config);
  Rng rng(seed);
  for (auto& p : net.parameters()) {
    auto& t = p.tensor;
    if (t.shape.size() != 4) continue;  // biases zero, gamma one, beta zero
    const double fan_in = static_cast<double>(t.shape[1] * t.shape[2] * t.shape[3]);
    const double std = std::sqrt(2.0 / fan_in);
    for (auto& v : t.values) v = static_cast<T>(std * rng.normal());
  }
  return net;
}

void OptimizerConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) fail(ErrorKind::kConfig, "optimizer: learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) fail(ErrorKind::kConfig, "optimizer: momentum must lie in [0, 1)");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    fail(ErrorKind::kConfig, "optimizer: adam betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) fail(ErrorKind::kConfig, "optimizer: eps must be positive");
}

OptimizerKind parse_optimizer_kind(const std::string& name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "momentum" || name == "sgd+momentum") return OptimizerKind::kMomentum;
  if (name == "adam") return OptimizerKind::kAdam;
  fail(ErrorKind::kConfig, "unknown optimizer '" + name + "' (expected sgd, momentum or adam)");
}

std::string optimizer_kind_name(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::kSgd:
      return "sgd";
    case OptimizerKind::kMomentum:
      return "momentum";
    case OptimizerKind::kAdam:
      return "adam";
  }
  return "?";
}

template <typename T>
Optimizer<T>::Optimizer(const OptimizerConfig& config) : config_(config) {
  config_.validate();
}

template <typename T>
void Optimizer<T>::step(EmbeddingNetwork<T>& net) {
  auto& params = net.parameters();
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) fail(ErrorKind::kState, "optimizer step: parameter '" + p.name + "' has no gradient");
  }
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.tensor.size(), 0.0);
      if (config_.kind == OptimizerKind::kAdam) v_.emplace_back(p.tensor.size(), 0.0);
    }
  }
  if (m_.size() != params.size()) fail(ErrorKind::kState, "optimizer step: network layout changed since the first step");
  ++steps_;
  const double lr = config_.lr;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
  for (size_t i = 0; i < params.size(); ++i) {
    auto& t = params[i].tensor;
    for (size_t j = 0; j < t.size(); ++j) {
      const double g = static_cast<double>(t.grad[j]);
      double update = 0.0;
      switch (config_.kind) {
        case OptimizerKind::kSgd:
          update = lr * g;
          break;
        case OptimizerKind::kMomentum:
          m_[i][j] = config_.momentum * m_[i][j] + g;
          update = lr * m_[i][j];
          break;
        case OptimizerKind::kAdam: {
          m_[i][j] = config_.beta1 * m_[i][j] + (1.0 - config_.beta1) * g;
          v_[i][j] = config_.beta2 * v_[i][j] + (1.0 - config_.beta2) * g * g;
          update = lr * (m_[i][j] / bc1) / (std::sqrt(v_[i][j] / bc2) + config_.eps);
          break;
        }
      }
      t.values[j] = static_cast<T>(static_cast<double>(t.values[j]) - update);
    }
    t.clear_grad();
  }
}

namespace {

constexpr const char* kCheckpointMagic = "LADPROTO-CKPT 1";

void append_f32(std::string& out, float v) {
  uint32_t bits = std::bit_cast<uint32_t>(v);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

float read_f32(const std::string& bytes, size_t off) {
  uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<uint32_t>(static_cast<unsigned char>(bytes[off + i])) << (8 * i);
  return std::bit_cast<float>(bits);
}

}  // namespace

std::string encode_checkpoint(const EmbeddingNetwork<float>& net, const CheckpointMeta& meta) {
  json tensors = json::array();
  for (const auto& p : net.parameters()) tensors.push_back({{"name", p.name}, {"shape", p.tensor.shape}, {"kind", "param"}});
  for (const auto& b : net.buffers()) tensors.push_back({{"name", b.name}, {"shape", b.tensor.shape}, {"kind", "buffer"}});
  json header = {{"arch", json::parse(net.config().to_json())},
                 {"arch_fingerprint", net.config().fingerprint()},
                 {"seed", meta.seed},
                 {"step", meta.step},
                 {"dtype", "f32le"},
                 {"tensors", tensors}};
  if (!meta.extra.empty()) header["extra"] = json::parse(meta.extra);
  std::string out = std::string(kCheckpointMagic) + "\n" + header.dump() + "\n";
  for (const auto& p : net.parameters()) {
    for (float v : p.tensor.values) append_f32(out, v);
  }
  for (const auto& b : net.buffers()) {
    for (float v : b.tensor.values) append_f32(out, v);
  }
  return out;
}

EmbeddingNetwork<float> decode_checkpoint(const std::string& bytes, CheckpointMeta* meta) {
  const size_t l1 = bytes.find('\n');
  if (l1 == std::string::npos || bytes.compare(0, l1, kCheckpointMagic) != 0) {
    fail(ErrorKind::kIo, "checkpoint: bad magic line");
  }
  const size_t l2 = bytes.find('\n', l1 + 1);
  if (l2 == std::string::npos) fail(ErrorKind::kIo, "checkpoint: missing header");
  json header;
  ArchConfig arch;
  try {
    header = json::parse(bytes.substr(l1 + 1, l2 - l1 - 1));
    arch = ArchConfig::from_json(header.at("arch").dump());
    if (meta) {
      meta->seed = header.at("seed").get<uint64_t>();
      meta->step = header.at("step").get<uint64_t>();
      meta->extra = header.contains("extra") ? header["extra"].dump() : "";
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::kIo, std::string("checkpoint: malformed header: ") + e.what());
  }
  EmbeddingNetwork<float> net(arch);
  std::vector<Tensor<float>*> slots;
  for (auto& p : net.parameters()) slots.push_back(&p.tensor);
  for (auto& b : net.buffers()) slots.push_back(&b.tensor);
  const auto& listed = header.at("tensors");
  if (listed.size() != slots.size()) fail(ErrorKind::kIo, "checkpoint: tensor count does not match the architecture");
  size_t total = 0;
  for (size_t i = 0; i < slots.size(); ++i) {
    if (listed[i].at("shape").get<std::vector<size_t>>() != slots[i]->shape) {
      fail(ErrorKind::kIo, "checkpoint: tensor '" + listed[i].at("name").get<std::string>() + "' has shape " +
                               shape_string(listed[i].at("shape").get<std::vector<size_t>>()) + ", architecture expects " +
                               shape_string(slots[i]->shape));
    }
    total += slots[i]->size();
  }
  size_t off = l2 + 1;
  if (bytes.size() - off != 4 * total) fail(ErrorKind::kIo, "checkpoint: payload size does not match the tensor list");
  for (auto* t : slots) {
    for (auto& v : t->values) {
      v = read_f32(bytes, off);
      off += 4;
    }
  }
  return net;
}

#define LADPROTO_INSTANTIATE(T)                                                                                  \
  template struct Tensor<T>;                                                                                     \
  template class EmbeddingNetwork<T>;                                                                            \
  template class Optimizer<T>;                                                                                   \
  template EmbeddingNetwork<T> init_parameters<T>(const ArchConfig&, uint64_t);                                  \
  namespace layers {                                                                                             \
  template Tensor<T> conv2d_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                       \
  template void conv2d_backward(const Tensor<T>&, const Tensor<T>&, const std::vector<T>&, std::vector<T>&,      \
                                std::vector<T>&, std::vector<T>&);                                               \
  template Tensor<T> relu_forward(const Tensor<T>&);                                                             \
  template void relu_backward(const Tensor<T>&, const std::vector<T>&, std::vector<T>&);                         \
  template Tensor<T> maxpool_forward(const Tensor<T>&, std::vector<uint32_t>&);                                  \
  template void maxpool_backward(const std::vector<uint32_t>&, const std::vector<T>&, std::vector<T>&);          \
  template Tensor<T> global_avg_pool_forward(const Tensor<T>&);                                                  \
  template void global_avg_pool_backward(const Tensor<T>&, const std::vector<T>&, std::vector<T>&);              \
  template Tensor<T> channel_norm_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, \
                                          const Tensor<T>&);                                                     \
  template void channel_norm_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,    \
                                      const std::vector<T>&, std::vector<T>&, std::vector<T>&, std::vector<T>&); \
  }

LADPROTO_INSTANTIATE(float)
LADPROTO_INSTANTIATE(double)

}  // namespace ladproto
