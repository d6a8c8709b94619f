#ifndef LADPROTO_NEURAL_NEURAL_H_
#define LADPROTO_NEURAL_NEURAL_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace ladproto {

// Dense row-major array with an optional gradient slot of the same shape.
template <typename T>
struct Tensor {
  std::vector<size_t> shape;
  std::vector<T> values;
  std::vector<T> grad;  // empty when absent

  Tensor() = default;
  explicit Tensor(std::vector<size_t> s, T fill = T(0));

  size_t size() const { return values.size(); }
  bool has_grad() const { return !grad.empty(); }
  void ensure_grad() {
    if (grad.empty()) grad.assign(values.size(), T(0));
  }
  void clear_grad() { grad.clear(); }
};

std::string shape_string(const std::vector<size_t>& shape);
size_t shape_product(const std::vector<size_t>& shape);

// Layer primitives on single examples laid out as [channels x height x width].
// Backward functions accumulate into the gradient slots they are given.
namespace layers {

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);
template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& weight, const std::vector<T>& dout,
                     std::vector<T>& dx, std::vector<T>& dweight, std::vector<T>& dbias);

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x);
template <typename T>
void relu_backward(const Tensor<T>& y, const std::vector<T>& dout, std::vector<T>& dx);

// 2x2 window, stride 2, trailing odd row/column dropped; ties go to the first
// maximum in row-major window order.
template <typename T>
Tensor<T> maxpool_forward(const Tensor<T>& x, std::vector<uint32_t>& argmax);
template <typename T>
void maxpool_backward(const std::vector<uint32_t>& argmax, const std::vector<T>& dout, std::vector<T>& dx);

template <typename T>
Tensor<T> global_avg_pool_forward(const Tensor<T>& x);
template <typename T>
void global_avg_pool_backward(const Tensor<T>& x, const std::vector<T>& dout, std::vector<T>& dx);

// Per-channel affine normalization with frozen statistics:
// y = gamma * (x - mean) / sqrt(var + eps) + beta. Only gamma and beta train.
template <typename T>
Tensor<T> channel_norm_forward(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                               const Tensor<T>& mean, const Tensor<T>& var);
template <typename T>
void channel_norm_backward(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& mean,
                           const Tensor<T>& var, const std::vector<T>& dout, std::vector<T>& dx,
                           std::vector<T>& dgamma, std::vector<T>& dbeta);

inline constexpr double kNormEps = 1e-5;

}  // namespace layers

struct ArchConfig {
  std::vector<int> channels{32, 64, 128, 256};  // one entry per block
  int convs_per_block = 2;
  int kernel_size = 3;
  int in_channels = 1;
  int input_mels = 0;  // 0 accepts any mel count >= min_input_size()
  bool norm = false;

  void validate() const;
  int embedding_dim() const { return channels.back(); }
  // Smallest frame/mel extent that survives every stride-2 pool.
  size_t min_input_size() const;
  std::string to_json() const;
  static ArchConfig from_json(const std::string& text);
  std::string fingerprint() const;
};

enum class LayerKind { kConv, kNorm, kRelu, kMaxPool, kGlobalPool };

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
};

// Intermediates recorded by one forward pass.
template <typename T>
struct Tape {
  std::vector<Tensor<T>> inputs;  // input of each layer
  std::vector<Tensor<T>> outputs;  // output of each relu (for its mask)
  std::vector<std::vector<uint32_t>> argmax;  // per max-pool layer
  std::vector<size_t> input_shape;
  bool valid = false;
};

template <typename T>
class EmbeddingNetwork {
 public:
  EmbeddingNetwork() = default;
  explicit EmbeddingNetwork(const ArchConfig& config);

  const ArchConfig& config() const { return config_; }

  // x has shape [in_channels x frames x mels].
  Tensor<T> forward(const Tensor<T>& x, Tape<T>* tape = nullptr) const;
  // Same network without the final global pool: [C x h x w].
  Tensor<T> forward_feature_map(const Tensor<T>& x) const;
  // Accumulates parameter gradients; returns the input gradient.
  std::vector<T> backward(const Tape<T>& tape, const std::vector<T>& upstream);

  std::vector<NamedTensor<T>>& parameters() { return params_; }
  const std::vector<NamedTensor<T>>& parameters() const { return params_; }
  // Frozen statistics: stored and checkpointed, never given gradients.
  std::vector<NamedTensor<T>>& buffers() { return buffers_; }
  const std::vector<NamedTensor<T>>& buffers() const { return buffers_; }

  void zero_grad();
  size_t parameter_count() const;
  void check_input(const Tensor<T>& x) const;

 private:
  struct Layer {
    LayerKind kind;
    int param = -1;   // first parameter index (weight/gamma)
    int buffer = -1;  // first buffer index (mean)
  };

  Tensor<T> run(const Tensor<T>& x, Tape<T>* tape, bool global_pool) const;

  ArchConfig config_;
  std::vector<Layer> layers_;
  std::vector<NamedTensor<T>> params_;
  std::vector<NamedTensor<T>> buffers_;
};

// He-normal weights (std = sqrt(2 / fan_in)), zero biases, unit gamma.
template <typename T>
EmbeddingNetwork<T> init_parameters(const ArchConfig& config, uint64_t seed);

enum class OptimizerKind { kSgd, kMomentum, kAdam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double lr = 1e-3;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

OptimizerKind parse_optimizer_kind(const std::string& name);
std::string optimizer_kind_name(OptimizerKind kind);

template <typename T>
class Optimizer {
 public:
  explicit Optimizer(const OptimizerConfig& config);

  // Applies one update from the current gradients, then clears them.
  void step(EmbeddingNetwork<T>& net);
  uint64_t steps() const { return steps_; }

 private:
  OptimizerConfig config_;
  uint64_t steps_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

// Checkpoint: "LADPROTO-CKPT 1\n", one JSON header line, float32 payload of
// every parameter then every buffer in declared order.
struct CheckpointMeta {
  uint64_t seed = 0;
  uint64_t step = 0;
  std::string extra;  // free-form JSON object text, may be empty
};

std::string encode_checkpoint(const EmbeddingNetwork<float>& net, const CheckpointMeta& meta);
EmbeddingNetwork<float> decode_checkpoint(const std::string& bytes, CheckpointMeta* meta = nullptr);

}  // namespace ladproto

#endif  // LADPROTO_NEURAL_NEURAL_H_
