#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "amodal/grid.hpp"
#include "amodal/losscore.hpp"
#include "amodal/scenegen.hpp"

namespace amodal {

// CHW tensor.
template <typename T>
struct Tensor {
  int channels = 0, height = 0, width = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(int c, int h, int w) : channels(c), height(h), width(w), data(std::size_t(c) * h * w, T(0)) {}
  T* plane(int c) { return data.data() + std::size_t(c) * height * width; }
  const T* plane(int c) const { return data.data() + std::size_t(c) * height * width; }
};

struct ConvSpec {
  int in_channels = 1;
  int out_channels = 1;
  int kernel = 3;
  int stride = 1;
  int dilation = 1;
};

// 2-D convolution with "same"-style zero padding of dilation * (kernel / 2).
template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  explicit Conv2d(const ConvSpec& spec);

  const ConvSpec& spec() const { return spec_; }
  std::vector<T>& weight() { return weight_; }
  std::vector<T>& bias() { return bias_; }
  const std::vector<T>& weight() const { return weight_; }
  const std::vector<T>& bias() const { return bias_; }

  int output_size(int in) const { return (in + spec_.stride - 1) / spec_.stride; }

  Tensor<T> forward(const Tensor<T>& x) const;
  // Accumulates into dweight/dbias; returns dL/dx when `want_dx`.
  Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& dy, std::span<T> dweight,
                     std::span<T> dbias, bool want_dx) const;

 private:
  ConvSpec spec_;
  std::vector<T> weight_;  // [out][in][k][k]
  std::vector<T> bias_;
};

struct TrunkLayer {
  int width = 16;
  int dilation = 1;
};

struct NetConfig {
  int num_classes = 3;  // K; semantic heads emit K + 1 channels
  int embed_dim = 6;    // C
  int input_size = 256;
  int output_size = 64;
  // The first log2(input/output) layers use stride 2.
  std::vector<TrunkLayer> trunk{{16, 1}, {32, 1}, {64, 1}, {128, 1}};
  int kernel = 3;
  // Hidden 1x1 widths of every head before scaling by head_width_factor.
  std::vector<int> head_hidden{256, 256, 128};
  double head_width_factor = 0.125;
  // Append normalized x/y coordinate planes to the image.
  bool coord_channels = true;

  int input_channels() const { return coord_channels ? 3 : 1; }
  int downsample_steps() const;
  std::vector<int> scaled_head_hidden() const;
  void validate() const;
};

enum HeadIndex : int { kFgLogits = 0, kOccLogits = 1, kFgEmbed = 2, kOccEmbed = 3 };

struct HeadOutputs {
  FeatureMap fg_logits, occ_logits, fg_embed, occ_embed;
};

template <typename T>
struct ParamRef {
  std::string name;
  std::vector<int> shape;
  std::span<T> data;
};

template <typename T>
struct ForwardCache {
  Tensor<T> input;
  std::vector<Tensor<T>> trunk_out;  // post-activation per trunk layer
  std::array<std::vector<Tensor<T>>, 4> head_out;  // per head layer; hidden ones post-ReLU
};

template <typename T>
class BasicPredictor {
 public:
  BasicPredictor() = default;
  explicit BasicPredictor(const NetConfig& config);

  const NetConfig& config() const { return config_; }

  // He-normal weights, zero biases.
  void initialize(std::uint64_t seed);

  std::vector<ParamRef<T>> params();
  std::size_t num_params() const;

  Tensor<T> prepare_input(const GrayImage& image) const;

  // `cache` is optional; required for backward().
  HeadOutputs forward(const Tensor<T>& input, ForwardCache<T>* cache = nullptr) const;
  HeadOutputs forward(const GrayImage& image) const { return forward(prepare_input(image)); }

  // Accumulates parameter gradients (aligned with params()) given the loss
  // gradient w.r.t. the four head outputs.
  void backward(const ForwardCache<T>& cache, const LossGradient& grad,
                std::vector<std::vector<T>>& param_grads) const;

  std::vector<std::vector<T>> zero_grads() const;

  // Copies all parameters from another predictor of identical architecture.
  template <typename U>
  void copy_params_from(const BasicPredictor<U>& other);

  const std::vector<Conv2d<T>>& trunk() const { return trunk_; }
  const std::array<std::vector<Conv2d<T>>, 4>& heads() const { return heads_; }
  std::vector<Conv2d<T>>& trunk() { return trunk_; }
  std::array<std::vector<Conv2d<T>>, 4>& heads() { return heads_; }

 private:
  NetConfig config_;
  std::vector<Conv2d<T>> trunk_;
  std::array<std::vector<Conv2d<T>>, 4> heads_;
};

using Predictor = BasicPredictor<float>;

template <typename T>
template <typename U>
void BasicPredictor<T>::copy_params_from(const BasicPredictor<U>& other) {
  auto copy = [](const std::vector<U>& src, std::vector<T>& dst) {
    dst.assign(src.begin(), src.end());
  };
  for (std::size_t i = 0; i < trunk_.size(); ++i) {
    copy(other.trunk()[i].weight(), trunk_[i].weight());
    copy(other.trunk()[i].bias(), trunk_[i].bias());
  }
  for (int h = 0; h < 4; ++h) {
    for (std::size_t i = 0; i < heads_[h].size(); ++i) {
      copy(other.heads()[h][i].weight(), heads_[h][i].weight());
      copy(other.heads()[h][i].bias(), heads_[h][i].bias());
    }
  }
}

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam(const AdamConfig& config, const std::vector<ParamRef<float>>& params);
  void step(std::vector<ParamRef<float>>& params, const std::vector<std::vector<float>>& grads);
  long steps() const { return t_; }

 private:
  AdamConfig config_;
  long t_ = 0;
  std::vector<std::vector<float>> m_, v_;
};

struct TrainConfig {
  double learning_rate = 1e-4;
  int batch_size = 2;
  int epochs = 10;
  int samples_per_epoch = 200;
  double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
};

// Yields training sample `index` of `epoch`.
using SampleStream = std::function<Sample(int epoch, int index)>;

// Fresh scenes every epoch; epoch e draws from derive_seed(scene.seed, e).
SampleStream streaming_samples(const SceneConfig& scene);
// Cycles through a fixed dataset, reshuffled per epoch from `seed`.
SampleStream dataset_samples(std::vector<Sample> samples, std::uint64_t seed);

struct EpochLog {
  int epoch = 0;
  LossBreakdown mean;  // averaged over the epoch's samples (pre-update)
};

struct TrainResult {
  std::vector<EpochLog> epochs;
  std::vector<double> step_totals;
};

// Optional per-epoch callback (e.g. progress output).
using EpochCallback = std::function<void(const EpochLog&)>;

// Throws Error(kDiverged) naming the step and term on a non-finite loss.
TrainResult train(Predictor& predictor, const SampleStream& data, const LossConfig& loss,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

LossInputs loss_inputs(const HeadOutputs& out, const Sample& sample, const InstanceRegions& regions);

std::string loss_log_csv(const TrainResult& result);

// Checkpoint container:
//   bytes 0..7   magic "AMODCKPT"
//   bytes 8..11  uint32 LE format version
//   bytes 12..19 uint64 LE length of the JSON index
//   JSON index   {format_version, architecture, tensors:[{name, shape, offset, count}]}
//   payload      raw little-endian float32 tensors; offsets relative to payload start
inline constexpr std::uint32_t kCheckpointVersion = 1;
void save_checkpoint(const std::filesystem::path& path, Predictor& predictor);
Predictor load_checkpoint(const std::filesystem::path& path);

// Class-index label maps from logits (argmax, ties to the lower index).
LabelMap argmax_labels(const FeatureMap& logits);

}  // namespace amodal
