#include "amodal/net.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "amodal/error.hpp"
#include "amodal/rng.hpp"
#include "amodal/serialization.hpp"

namespace amodal {

// ---------------------------------------------------------------- Conv2d

template <typename T>
Conv2d<T>::Conv2d(const ConvSpec& spec)
    : spec_(spec),
      weight_(std::size_t(spec.out_channels) * spec.in_channels * spec.kernel * spec.kernel, T(0)),
      bias_(spec.out_channels, T(0)) {}

namespace {

// Valid output range [lo, hi) so that 0 <= o * stride + offset < in.
inline void valid_range(int offset, int stride, int in, int out, int& lo, int& hi) {
  lo = offset >= 0 ? 0 : (-offset + stride - 1) / stride;
  const int last = in - 1 - offset;
  hi = last < 0 ? 0 : std::min(out, last / stride + 1);
  if (hi < lo) hi = lo;
}

}  // namespace

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x) const {
  if (x.channels != spec_.in_channels)
    throw Error(ErrorKind::kShapeMismatch, "conv: input channel mismatch");
  const int k = spec_.kernel, s = spec_.stride, d = spec_.dilation, pad = d * (k / 2);
  const int oh = output_size(x.height), ow = output_size(x.width);
  Tensor<T> y(spec_.out_channels, oh, ow);
  for (int oc = 0; oc < spec_.out_channels; ++oc) {
    T* yp = y.plane(oc);
    std::fill(yp, yp + std::size_t(oh) * ow, bias_[oc]);
    for (int ic = 0; ic < spec_.in_channels; ++ic) {
      const T* xp = x.plane(ic);
      const T* wk = weight_.data() + (std::size_t(oc) * spec_.in_channels + ic) * k * k;
      for (int ky = 0; ky < k; ++ky) {
        int oy_lo, oy_hi;
        valid_range(ky * d - pad, s, x.height, oh, oy_lo, oy_hi);
        for (int kx = 0; kx < k; ++kx) {
          const T w = wk[ky * k + kx];
          if (w == T(0)) continue;
          const int xoff = kx * d - pad;
          int ox_lo, ox_hi;
          valid_range(xoff, s, x.width, ow, ox_lo, ox_hi);
          for (int oy = oy_lo; oy < oy_hi; ++oy) {
            const T* xrow = xp + std::size_t(oy * s + ky * d - pad) * x.width;
            T* yrow = yp + std::size_t(oy) * ow;
            if (s == 1) {
              for (int ox = ox_lo; ox < ox_hi; ++ox) yrow[ox] += w * xrow[ox + xoff];
            } else {
              for (int ox = ox_lo; ox < ox_hi; ++ox) yrow[ox] += w * xrow[ox * s + xoff];
            }
          }
        }
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& x, const Tensor<T>& dy, std::span<T> dweight,
                              std::span<T> dbias, bool want_dx) const {
  const int k = spec_.kernel, s = spec_.stride, d = spec_.dilation, pad = d * (k / 2);
  const int oh = dy.height, ow = dy.width;
  Tensor<T> dx;
  if (want_dx) dx = Tensor<T>(x.channels, x.height, x.width);
  for (int oc = 0; oc < spec_.out_channels; ++oc) {
    const T* gp = dy.plane(oc);
    T acc = 0;
    for (std::size_t i = 0; i < std::size_t(oh) * ow; ++i) acc += gp[i];
    dbias[oc] += acc;
    for (int ic = 0; ic < spec_.in_channels; ++ic) {
      const T* xp = x.plane(ic);
      T* dxp = want_dx ? dx.plane(ic) : nullptr;
      const std::size_t wbase = (std::size_t(oc) * spec_.in_channels + ic) * k * k;
      for (int ky = 0; ky < k; ++ky) {
        int oy_lo, oy_hi;
        valid_range(ky * d - pad, s, x.height, oh, oy_lo, oy_hi);
        for (int kx = 0; kx < k; ++kx) {
          const T w = weight_[wbase + ky * k + kx];
          const int xoff = kx * d - pad;
          int ox_lo, ox_hi;
          valid_range(xoff, s, x.width, ow, ox_lo, ox_hi);
          T gw = 0;
          for (int oy = oy_lo; oy < oy_hi; ++oy) {
            const std::size_t row = std::size_t(oy * s + ky * d - pad) * x.width;
            const T* xrow = xp + row;
            const T* grow = gp + std::size_t(oy) * ow;
            if (s == 1) {
              for (int ox = ox_lo; ox < ox_hi; ++ox) gw += grow[ox] * xrow[ox + xoff];
              if (dxp) {
                T* dxrow = dxp + row;
                for (int ox = ox_lo; ox < ox_hi; ++ox) dxrow[ox + xoff] += w * grow[ox];
              }
            } else {
              for (int ox = ox_lo; ox < ox_hi; ++ox) gw += grow[ox] * xrow[ox * s + xoff];
              if (dxp) {
                T* dxrow = dxp + row;
                for (int ox = ox_lo; ox < ox_hi; ++ox) dxrow[ox * s + xoff] += w * grow[ox];
              }
            }
          }
          dweight[wbase + ky * k + kx] += gw;
        }
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------- NetConfig

int NetConfig::downsample_steps() const {
  if (output_size <= 0 || input_size % output_size != 0) return -1;
  const unsigned f = static_cast<unsigned>(input_size / output_size);
  if (!std::has_single_bit(f)) return -1;
  return std::countr_zero(f);
}

std::vector<int> NetConfig::scaled_head_hidden() const {
  std::vector<int> out;
  for (int w : head_hidden)
    out.push_back(std::max(1, static_cast<int>(std::lround(w * head_width_factor))));
  return out;
}

void NetConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorKind::kInvalidArgument, "net config: " + m); };
  if (num_classes < 1) fail("num_classes must be >= 1");
  if (embed_dim < 1) fail("embed_dim must be >= 1");
  if (kernel < 1 || kernel % 2 == 0) fail("kernel must be odd");
  const int steps = downsample_steps();
  if (steps < 0) fail("input_size / output_size must be a power of two");
  if (static_cast<int>(trunk.size()) < std::max(1, steps))
    fail("trunk needs at least log2(input/output) layers");
  for (const auto& l : trunk)
    if (l.width < 1 || l.dilation < 1) fail("trunk widths and dilations must be >= 1");
  if (!(head_width_factor > 0.0)) fail("head_width_factor must be > 0");
}

// ---------------------------------------------------------------- Predictor

namespace {

const char* kHeadNames[4] = {"fg_semantic", "occ_semantic", "fg_embed", "occ_embed"};

template <typename T>
void relu_inplace(Tensor<T>& t) {
  for (auto& v : t.data) v = v > T(0) ? v : T(0);
}

template <typename T>
FeatureMap to_feature_map(const Tensor<T>& t) {
  FeatureMap f(t.width, t.height, t.channels);
  const std::size_t hw = std::size_t(t.height) * t.width;
  for (int c = 0; c < t.channels; ++c) {
    const T* p = t.plane(c);
    for (std::size_t i = 0; i < hw; ++i) f.values[i * t.channels + c] = static_cast<double>(p[i]);
  }
  return f;
}

template <typename T>
Tensor<T> from_feature_map(const FeatureMap& f) {
  Tensor<T> t(f.channels, f.height, f.width);
  const std::size_t hw = f.pixels();
  for (int c = 0; c < f.channels; ++c) {
    T* p = t.plane(c);
    for (std::size_t i = 0; i < hw; ++i) p[i] = static_cast<T>(f.values[i * f.channels + c]);
  }
  return t;
}

}  // namespace

template <typename T>
BasicPredictor<T>::BasicPredictor(const NetConfig& config) : config_(config) {
  config_.validate();
  const int steps = config_.downsample_steps();
  int in = config_.input_channels();
  for (std::size_t i = 0; i < config_.trunk.size(); ++i) {
    ConvSpec s;
    s.in_channels = in;
    s.out_channels = config_.trunk[i].width;
    s.kernel = config_.kernel;
    s.stride = static_cast<int>(i) < steps ? 2 : 1;
    s.dilation = config_.trunk[i].dilation;
    trunk_.emplace_back(s);
    in = s.out_channels;
  }
  const auto hidden = config_.scaled_head_hidden();
  const int outs[4] = {config_.num_classes + 1, config_.num_classes + 1, config_.embed_dim,
                       config_.embed_dim};
  for (int h = 0; h < 4; ++h) {
    int c = in;
    for (int w : hidden) {
      heads_[h].emplace_back(ConvSpec{c, w, 1, 1, 1});
      c = w;
    }
    heads_[h].emplace_back(ConvSpec{c, outs[h], 1, 1, 1});
  }
}

template <typename T>
void BasicPredictor<T>::initialize(std::uint64_t seed) {
  Rng rng(seed);
  auto init = [&](Conv2d<T>& conv) {
    const auto& s = conv.spec();
    const double stddev = std::sqrt(2.0 / (s.in_channels * s.kernel * s.kernel));
    for (auto& w : conv.weight()) w = static_cast<T>(stddev * rng.normal());
    std::fill(conv.bias().begin(), conv.bias().end(), T(0));
  };
  for (auto& c : trunk_) init(c);
  for (auto& head : heads_)
    for (auto& c : head) init(c);
}

template <typename T>
std::vector<ParamRef<T>> BasicPredictor<T>::params() {
  std::vector<ParamRef<T>> out;
  auto add = [&](const std::string& prefix, Conv2d<T>& c) {
    const auto& s = c.spec();
    out.push_back({prefix + ".weight", {s.out_channels, s.in_channels, s.kernel, s.kernel},
                   std::span<T>(c.weight())});
    out.push_back({prefix + ".bias", {s.out_channels}, std::span<T>(c.bias())});
  };
  for (std::size_t i = 0; i < trunk_.size(); ++i) add("trunk." + std::to_string(i), trunk_[i]);
  for (int h = 0; h < 4; ++h)
    for (std::size_t j = 0; j < heads_[h].size(); ++j)
      add(std::string("head.") + kHeadNames[h] + "." + std::to_string(j), heads_[h][j]);
  return out;
}

template <typename T>
std::size_t BasicPredictor<T>::num_params() const {
  std::size_t n = 0;
  for (const auto& c : trunk_) n += c.weight().size() + c.bias().size();
  for (const auto& head : heads_)
    for (const auto& c : head) n += c.weight().size() + c.bias().size();
  return n;
}

template <typename T>
std::vector<std::vector<T>> BasicPredictor<T>::zero_grads() const {
  std::vector<std::vector<T>> g;
  for (const auto& c : trunk_) {
    g.emplace_back(c.weight().size(), T(0));
    g.emplace_back(c.bias().size(), T(0));
  }
  for (const auto& head : heads_) {
    for (const auto& c : head) {
      g.emplace_back(c.weight().size(), T(0));
      g.emplace_back(c.bias().size(), T(0));
    }
  }
  return g;
}

template <typename T>
Tensor<T> BasicPredictor<T>::prepare_input(const GrayImage& image) const {
  if (image.width != config_.input_size || image.height != config_.input_size)
    throw Error(ErrorKind::kShapeMismatch,
                "predictor: image is " + std::to_string(image.width) + "x" +
                    std::to_string(image.height) + ", expected " +
                    std::to_string(config_.input_size) + "^2");
  Tensor<T> t(config_.input_channels(), image.height, image.width);
  T* ink = t.plane(0);
  for (std::size_t i = 0; i < image.size(); ++i) ink[i] = T(1) - static_cast<T>(image[i]) / T(255);
  if (config_.coord_channels) {
    T* xs = t.plane(1);
    T* ys = t.plane(2);
    for (int y = 0; y < image.height; ++y) {
      for (int x = 0; x < image.width; ++x) {
        xs[y * image.width + x] = static_cast<T>(2.0 * (x + 0.5) / image.width - 1.0);
        ys[y * image.width + x] = static_cast<T>(2.0 * (y + 0.5) / image.height - 1.0);
      }
    }
  }
  return t;
}

template <typename T>
HeadOutputs BasicPredictor<T>::forward(const Tensor<T>& input, ForwardCache<T>* cache) const {
  if (input.channels != config_.input_channels() || input.height != config_.input_size ||
      input.width != config_.input_size)
    throw Error(ErrorKind::kShapeMismatch, "predictor: input tensor shape mismatch");
  ForwardCache<T> local;
  ForwardCache<T>& c = cache ? *cache : local;
  c.input = input;
  c.trunk_out.clear();
  const Tensor<T>* x = &c.input;
  for (const auto& conv : trunk_) {
    auto y = conv.forward(*x);
    relu_inplace(y);
    c.trunk_out.push_back(std::move(y));
    x = &c.trunk_out.back();
  }
  const Tensor<T>& features = c.trunk_out.back();
  HeadOutputs out;
  FeatureMap* dst[4] = {&out.fg_logits, &out.occ_logits, &out.fg_embed, &out.occ_embed};
  for (int h = 0; h < 4; ++h) {
    auto& stack = c.head_out[h];
    stack.clear();
    const Tensor<T>* hx = &features;
    for (std::size_t j = 0; j < heads_[h].size(); ++j) {
      auto y = heads_[h][j].forward(*hx);
      if (j + 1 < heads_[h].size()) relu_inplace(y);
      stack.push_back(std::move(y));
      hx = &stack.back();
    }
    *dst[h] = to_feature_map(stack.back());
    if (!cache) stack.clear();
  }
  return out;
}

template <typename T>
void BasicPredictor<T>::backward(const ForwardCache<T>& cache, const LossGradient& grad,
                                 std::vector<std::vector<T>>& param_grads) const {
  const FeatureMap* src[4] = {&grad.fg_logits, &grad.occ_logits, &grad.fg_embed, &grad.occ_embed};
  std::size_t head_param_base = 2 * trunk_.size();
  const Tensor<T>& features = cache.trunk_out.back();
  Tensor<T> g_features(features.channels, features.height, features.width);

  for (int h = 0; h < 4; ++h) {
    const auto& layers = heads_[h];
    Tensor<T> g = from_feature_map<T>(*src[h]);
    for (std::size_t j = layers.size(); j-- > 0;) {
      if (j + 1 < layers.size()) {
        const auto& out = cache.head_out[h][j];
        for (std::size_t i = 0; i < g.data.size(); ++i)
          if (!(out.data[i] > T(0))) g.data[i] = T(0);
      }
      const Tensor<T>& in = j == 0 ? features : cache.head_out[h][j - 1];
      const std::size_t pi = head_param_base + 2 * j;
      g = layers[j].backward(in, g, param_grads[pi], param_grads[pi + 1], true);
    }
    for (std::size_t i = 0; i < g.data.size(); ++i) g_features.data[i] += g.data[i];
    head_param_base += 2 * layers.size();
  }

  Tensor<T> g = std::move(g_features);
  for (std::size_t i = trunk_.size(); i-- > 0;) {
    const auto& out = cache.trunk_out[i];
    for (std::size_t k = 0; k < g.data.size(); ++k)
      if (!(out.data[k] > T(0))) g.data[k] = T(0);
    const Tensor<T>& in = i == 0 ? cache.input : cache.trunk_out[i - 1];
    g = trunk_[i].backward(in, g, param_grads[2 * i], param_grads[2 * i + 1], i > 0);
  }
}

template class Conv2d<float>;
template class Conv2d<double>;
template class BasicPredictor<float>;
template class BasicPredictor<double>;

// ---------------------------------------------------------------- Adam

Adam::Adam(const AdamConfig& config, const std::vector<ParamRef<float>>& params) : config_(config) {
  for (const auto& p : params) {
    m_.emplace_back(p.data.size(), 0.0f);
    v_.emplace_back(p.data.size(), 0.0f);
  }
}

void Adam::step(std::vector<ParamRef<float>>& params, const std::vector<std::vector<float>>& grads) {
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto data = params[i].data;
    const auto& g = grads[i];
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < data.size(); ++k) {
      const double gk = g[k];
      m[k] = static_cast<float>(b1 * m[k] + (1.0 - b1) * gk);
      v[k] = static_cast<float>(b2 * v[k] + (1.0 - b2) * gk * gk);
      const double update =
          config_.learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + config_.epsilon);
      data[k] = static_cast<float>(data[k] - update);
    }
  }
}

// ---------------------------------------------------------------- training

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || batch_size < 1 || epochs < 1 || samples_per_epoch < 1)
    throw Error(ErrorKind::kInvalidArgument,
                "train config: learning_rate >= 0 and positive batch/epoch sizes required");
}

SampleStream streaming_samples(const SceneConfig& scene) {
  return [scene](int epoch, int index) {
    SceneConfig c = scene;
    c.seed = derive_seed(scene.seed, static_cast<std::uint64_t>(epoch));
    return make_sample(c, static_cast<std::uint64_t>(index));
  };
}

SampleStream dataset_samples(std::vector<Sample> samples, std::uint64_t seed) {
  if (samples.empty()) throw Error(ErrorKind::kInvalidArgument, "training dataset is empty");
  auto shared = std::make_shared<const std::vector<Sample>>(std::move(samples));
  return [shared, seed](int epoch, int index) {
    const std::size_t n = shared->size();
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(perm.begin(), perm.end());
    return (*shared)[perm[static_cast<std::size_t>(index) % n]];
  };
}

LossInputs loss_inputs(const HeadOutputs& out, const Sample& sample, const InstanceRegions& regions) {
  return LossInputs{out.fg_embed,  out.occ_embed, out.fg_logits, out.occ_logits,
                    regions,       sample.rendered.fg_class, sample.rendered.occ_class};
}

namespace {

void check_finite(const LossBreakdown& b, long step) {
  const std::pair<const char*, double> terms[] = {
      {"l_var", b.l_var}, {"l_dst", b.l_dst}, {"l_reg", b.l_reg}, {"l_semantic", b.l_semantic},
      {"total", b.total}};
  for (const auto& [name, v] : terms) {
    if (!std::isfinite(v))
      throw Error(ErrorKind::kDiverged,
                  "training diverged at step " + std::to_string(step) + ": " + name + " is non-finite");
  }
}

}  // namespace

TrainResult train(Predictor& predictor, const SampleStream& data, const LossConfig& loss,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  loss.validate();
  auto params = predictor.params();
  Adam adam({config.learning_rate, config.beta1, config.beta2, config.epsilon}, params);
  TrainResult result;
  long step = 0;
  ForwardCache<float> cache;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    EpochLog log;
    log.epoch = epoch + 1;
    int seen = 0;
    for (int start = 0; start < config.samples_per_epoch; start += config.batch_size) {
      const int end = std::min(config.samples_per_epoch, start + config.batch_size);
      auto grads = predictor.zero_grads();
      double batch_total = 0.0;
      for (int i = start; i < end; ++i) {
        const Sample sample = data(epoch, i);
        const auto regions =
            regions_from_labels(sample.rendered.fg_instance, sample.rendered.occ_instance,
                                sample.rendered.fg_class, sample.rendered.occ_class);
        const auto out = predictor.forward(predictor.prepare_input(sample.rendered.image), &cache);
        LossGradient lg;
        const auto b = loss_gradient(loss_inputs(out, sample, regions), loss, lg);
        check_finite(b, step);
        predictor.backward(cache, lg, grads);
        log.mean.l_var += b.l_var;
        log.mean.l_dst += b.l_dst;
        log.mean.l_reg += b.l_reg;
        log.mean.l_semantic += b.l_semantic;
        log.mean.total += b.total;
        batch_total += b.total;
        ++seen;
      }
      const float scale = 1.0f / static_cast<float>(end - start);
      for (auto& g : grads)
        for (auto& v : g) v *= scale;
      adam.step(params, grads);
      result.step_totals.push_back(batch_total / (end - start));
      ++step;
    }
    for (double* v : {&log.mean.l_var, &log.mean.l_dst, &log.mean.l_reg, &log.mean.l_semantic,
                      &log.mean.total})
      *v /= seen;
    result.epochs.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  return result;
}

std::string loss_log_csv(const TrainResult& result) {
  std::ostringstream os;
  os.precision(9);
  os << "epoch,l_var,l_dst,l_reg,l_semantic,total\n";
  for (const auto& e : result.epochs)
    os << e.epoch << ',' << e.mean.l_var << ',' << e.mean.l_dst << ',' << e.mean.l_reg << ','
       << e.mean.l_semantic << ',' << e.mean.total << '\n';
  return os.str();
}

LabelMap argmax_labels(const FeatureMap& logits) {
  LabelMap out(logits.width, logits.height);
  for (std::size_t p = 0; p < logits.pixels(); ++p) {
    const double* z = logits.pixel(p);
    out[p] = static_cast<std::uint16_t>(std::max_element(z, z + logits.channels) - z);
  }
  return out;
}

// ---------------------------------------------------------------- checkpoint

namespace {

constexpr char kMagic[8] = {'A', 'M', 'O', 'D', 'C', 'K', 'P', 'T'};

template <typename U>
void put_le(std::ostream& os, U v) {
  unsigned char b[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), sizeof(U));
}

template <typename U>
U get_le(std::istream& is) {
  unsigned char b[sizeof(U)];
  if (!is.read(reinterpret_cast<char*>(b), sizeof(U)))
    throw Error(ErrorKind::kFormat, "checkpoint: unexpected end of file");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, Predictor& predictor) {
  nlohmann::json index;
  index["format_version"] = kCheckpointVersion;
  index["architecture"] = to_json(predictor.config());
  auto& tensors = index["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  auto params = predictor.params();
  for (const auto& p : params) {
    tensors.push_back({{"name", p.name}, {"shape", p.shape}, {"offset", offset}, {"count", p.data.size()}});
    offset += p.data.size() * sizeof(float);
  }
  const std::string json = index.dump();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::kIo, "cannot write checkpoint " + path.string());
  os.write(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(os, kCheckpointVersion);
  put_le<std::uint64_t>(os, json.size());
  os.write(json.data(), static_cast<std::streamsize>(json.size()));
  for (const auto& p : params)
    for (float f : p.data) put_le<std::uint32_t>(os, std::bit_cast<std::uint32_t>(f));
  if (!os) throw Error(ErrorKind::kIo, "failed writing checkpoint " + path.string());
}

Predictor load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::kIo, "cannot open checkpoint " + path.string());
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    throw Error(ErrorKind::kFormat, "checkpoint: bad magic in " + path.string());
  const auto version = get_le<std::uint32_t>(is);
  if (version != kCheckpointVersion)
    throw Error(ErrorKind::kFormat, "checkpoint: unsupported format version " + std::to_string(version));
  const auto len = get_le<std::uint64_t>(is);
  const auto header_end = is.tellg();
  is.seekg(0, std::ios::end);
  const auto remaining = static_cast<std::uint64_t>(is.tellg() - header_end);
  is.seekg(header_end);
  if (len > remaining) throw Error(ErrorKind::kFormat, "checkpoint: truncated index");
  std::string json(len, '\0');
  if (!is.read(json.data(), static_cast<std::streamsize>(len)))
    throw Error(ErrorKind::kFormat, "checkpoint: truncated index");
  nlohmann::json index;
  try {
    index = nlohmann::json::parse(json);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kFormat, std::string("checkpoint: bad index: ") + e.what());
  }
  Predictor predictor(net_config_from_json(index.at("architecture")));
  auto params = predictor.params();
  const auto& tensors = index.at("tensors");
  if (tensors.size() != params.size())
    throw Error(ErrorKind::kFormat, "checkpoint: tensor count does not match architecture");
  const auto payload = is.tellg();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = tensors[i];
    if (t.at("name").get<std::string>() != params[i].name ||
        t.at("count").get<std::size_t>() != params[i].data.size())
      throw Error(ErrorKind::kFormat, "checkpoint: tensor '" + params[i].name + "' mismatch");
    is.seekg(payload + static_cast<std::streamoff>(t.at("offset").get<std::uint64_t>()));
    for (auto& f : params[i].data) f = std::bit_cast<float>(get_le<std::uint32_t>(is));
  }
  return predictor;
}

}  // namespace amodal
