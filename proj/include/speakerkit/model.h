// speakerkit/model.h

// Copyright 2026  Speakerkit Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// The speaker network: a VGG-style conv front-end that downsamples an
// [N, 80] log-mel spectrogram into a sequence of hidden state vectors, an
// interchangeable pooling layer (statistical / self-attention / multi-head
// self-attention / double multi-head self-attention), and a four-layer
// fully connected classifier head whose second layer doubles as the
// speaker embedding.

#ifndef SPEAKERKIT_MODEL_H_
#define SPEAKERKIT_MODEL_H_

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "speakerkit/audio.h"
#include "speakerkit/common.h"
#include "speakerkit/errors.h"
#include "speakerkit/ops.h"
#include "speakerkit/tensor.h"

namespace speakerkit {

enum class PoolingVariant { kStatistical, kSelfAttention, kMhsa, kDmhsa };

inline std::string pooling_name(PoolingVariant v) {
  switch (v) {
    case PoolingVariant::kStatistical: return "statistical";
    case PoolingVariant::kSelfAttention: return "self_attention";
    case PoolingVariant::kMhsa: return "mhsa";
    case PoolingVariant::kDmhsa: return "dmhsa";
  }
  return "?";
}

inline PoolingVariant parse_pooling(const std::string& s) {
  if (s == "statistical") return PoolingVariant::kStatistical;
  if (s == "self_attention") return PoolingVariant::kSelfAttention;
  if (s == "mhsa") return PoolingVariant::kMhsa;
  if (s == "dmhsa") return PoolingVariant::kDmhsa;
  throw ConfigError("unknown pooling variant: " + s);
}

struct ModelConfig {
  int blocks = 4;
  std::vector<std::int64_t> channels = {128, 256, 512, 1024};
  PoolingVariant pooling = PoolingVariant::kDmhsa;
  int heads = 16;
  double head_drop = 0.0;
  std::int64_t fc1_dim = 2048;
  std::int64_t embed_dim = 512;
  std::int64_t fc3_dim = 512;
  std::int64_t n_classes = 0;
  std::int64_t mel_bands = 80;

  std::int64_t downsample() const { return std::int64_t(1) << blocks; }
  std::int64_t freq_after_vgg() const { return mel_bands / downsample(); }
  // D: per-step hidden state width after the front-end reshape.
  std::int64_t hidden_dim() const {
    return freq_after_vgg() * channels.back();
  }
  int effective_heads() const {
    return pooling == PoolingVariant::kSelfAttention ? 1 : heads;
  }
  std::int64_t head_dim() const { return hidden_dim() / effective_heads(); }
  std::int64_t pooled_dim() const {
    switch (pooling) {
      case PoolingVariant::kStatistical: return 2 * hidden_dim();
      case PoolingVariant::kSelfAttention:
      case PoolingVariant::kMhsa: return hidden_dim();
      case PoolingVariant::kDmhsa: return head_dim();
    }
    return 0;
  }

  void validate() const {
    if (blocks != 3 && blocks != 4)
      throw ConfigError("blocks must be 3 or 4, got " + std::to_string(blocks));
    if (static_cast<int>(channels.size()) != blocks)
      throw ConfigError("need one channel count per block");
    for (std::size_t i = 0; i < channels.size(); ++i) {
      if (channels[i] < 1) throw ConfigError("channel counts must be positive");
      if (i > 0 && channels[i] <= channels[i - 1])
        throw ConfigError("channel counts must be strictly increasing");
    }
    if (mel_bands % downsample() != 0)
      throw ConfigError("mel bands " + std::to_string(mel_bands) +
                        " not divisible by 2^" + std::to_string(blocks));
    if (pooling == PoolingVariant::kSelfAttention && heads != 1)
      throw ConfigError("self_attention pooling implies a single head");
    if (heads < 1) throw ConfigError("head count must be positive");
    if (pooling != PoolingVariant::kStatistical &&
        hidden_dim() % effective_heads() != 0)
      throw ConfigError("head count " + std::to_string(effective_heads()) +
                        " does not divide hidden dim " +
                        std::to_string(hidden_dim()));
    if (head_drop < 0.0 || head_drop >= 1.0)
      throw ConfigError("head_drop must be in [0,1)");
    if (fc1_dim < 1 || embed_dim < 1 || fc3_dim < 1)
      throw ConfigError("classifier layer widths must be positive");
    if (n_classes < 2) throw ConfigError("need at least two classes");
  }

  std::string serialize() const {
    std::ostringstream os;
    os << "model.blocks = " << blocks << "\n";
    os << "model.channels = ";
    for (std::size_t i = 0; i < channels.size(); ++i)
      os << (i ? "," : "") << channels[i];
    os << "\n";
    os << "model.pooling = " << pooling_name(pooling) << "\n";
    os << "model.heads = " << heads << "\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", head_drop);
    os << "model.head_drop = " << buf << "\n";
    os << "model.fc1_dim = " << fc1_dim << "\n";
    os << "model.embed_dim = " << embed_dim << "\n";
    os << "model.fc3_dim = " << fc3_dim << "\n";
    os << "model.n_classes = " << n_classes << "\n";
    os << "model.mel_bands = " << mel_bands << "\n";
    return os.str();
  }

  // FNV-1a over the canonical serialization; checkpoints load only against
  // a matching hash.
  std::uint64_t hash() const {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : serialize()) {
      h ^= c;
      h *= 1099511628211ull;
    }
    return h;
  }
};

// ---------------------------------------------------------------------------
// Pooling operations (free functions; the tests drive these directly).
// ---------------------------------------------------------------------------

// Per-head attention weights over time.  h is [T, D]; each hidden state is
// split into K contiguous chunks and head j scores chunk j of every step
// against its query u[j], scaled by 1/sqrt(D/K), then softmax over time.
// Result is [T, K]; every column sums to 1.
template <typename T>
Tensor<T> attention_weights_per_head(const Tensor<T>& h,
                                     const std::vector<Tensor<T>>& u,
                                     int heads) {
  if (h.ndim() != 2)
    throw DimensionError("attention: hidden sequence must be [T,D], got " +
                         shape_str(h.shape()));
  const std::int64_t d = h.dim(1);
  if (heads < 1 || d % heads != 0)
    throw ConfigError("head count " + std::to_string(heads) +
                      " does not divide hidden dim " + std::to_string(d));
  if (static_cast<int>(u.size()) != heads)
    throw DimensionError("attention: expected " + std::to_string(heads) +
                         " query vectors, got " + std::to_string(u.size()));
  const std::int64_t dh = d / heads;
  const T inv_sqrt = T(1) / std::sqrt(T(dh));
  std::vector<Tensor<T>> score_cols;
  score_cols.reserve(u.size());
  for (int j = 0; j < heads; ++j) {
    Tensor<T> chunk = ops::slice_cols(h, j * dh, (j + 1) * dh);
    score_cols.push_back(ops::scale(ops::matvec(chunk, u[j]), inv_sqrt));
  }
  return ops::softmax(ops::stack_cols(score_cols), /*axis=*/0);
}

// Per-head context vectors c_j = sum_t w_tj * h_tj, one [D/K] tensor per
// head.  Each coordinate is a convex combination of that head's inputs.
template <typename T>
std::vector<Tensor<T>> head_contexts(const Tensor<T>& h, const Tensor<T>& w,
                                     int heads) {
  const std::int64_t t = h.dim(0), d = h.dim(1);
  if (w.ndim() != 2 || w.dim(0) != t || w.dim(1) != heads)
    throw DimensionError("head_contexts: weights " + shape_str(w.shape()) +
                         " do not match [T=" + std::to_string(t) +
                         ", K=" + std::to_string(heads) + "]");
  const std::int64_t dh = d / heads;
  std::vector<Tensor<T>> contexts;
  contexts.reserve(static_cast<std::size_t>(heads));
  for (int j = 0; j < heads; ++j) {
    Tensor<T> chunk = ops::slice_cols(h, j * dh, (j + 1) * dh);
    Tensor<T> wj = ops::flatten(ops::slice_cols(w, j, j + 1));
    contexts.push_back(ops::matvec(ops::transpose(chunk), wj));
  }
  return contexts;
}

// Second attention stage: head weights w'_i = softmax_i(c_i . u') -- note
// there is no 1/sqrt(d_h) scaling here -- and the compressed context
// c = sum_i w'_i c_i of width D/K.
template <typename T>
Tensor<T> double_attention_weights(const std::vector<Tensor<T>>& contexts,
                                   const Tensor<T>& u_prime) {
  std::vector<Tensor<T>> scores;
  scores.reserve(contexts.size());
  for (const auto& c : contexts)
    scores.push_back(ops::reshape(ops::dot(c, u_prime), Shape{1}));
  return ops::softmax(ops::concat(scores));
}

template <typename T>
Tensor<T> combine_heads(const std::vector<Tensor<T>>& contexts,
                        const Tensor<T>& weights) {
  return ops::matvec(ops::transpose(ops::stack_rows(contexts)), weights);
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> double_attention(
    const std::vector<Tensor<T>>& contexts, const Tensor<T>& u_prime) {
  Tensor<T> w = double_attention_weights(contexts, u_prime);
  return {combine_heads(contexts, w), w};
}

// Concatenation of the head contexts: the multi-head pooled vector of
// width D (for K=1 this is plain self-attention pooling).
template <typename T>
Tensor<T> mhsa_pool(const Tensor<T>& h, const std::vector<Tensor<T>>& u,
                    int heads) {
  Tensor<T> w = attention_weights_per_head(h, u, heads);
  return ops::concat(head_contexts(h, w, heads));
}

// Mean and population standard deviation over time, concatenated: [2D].
template <typename T>
Tensor<T> statistical_pool(const Tensor<T>& h) {
  return ops::mean_std_rows(h);
}

// Training-time head regularization: each aggregation weight is zeroed
// independently with probability p and the survivors are renormalized to
// sum 1.  If every head is dropped the mask is resampled.  Identity in eval
// mode and for p == 0.
template <typename T>
Tensor<T> head_drop(const Tensor<T>& w, double p, Rng& rng, bool train) {
  if (p < 0.0 || p >= 1.0)
    throw ParameterError("head_drop: p must be in [0,1), got " +
                         std::to_string(p));
  if (!train || p == 0.0) return w;
  const std::int64_t k = w.numel();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<T> mask(static_cast<std::size_t>(k));
  bool any_kept = false;
  while (!any_kept) {
    for (std::int64_t i = 0; i < k; ++i) {
      mask[i] = unif(rng) < p ? T(0) : T(1);
      any_kept = any_kept || mask[i] > T(0);
    }
  }
  Tensor<T> masked = ops::mul(w, Tensor<T>::from(w.shape(), mask));
  return ops::div_scalar(masked, ops::sum(masked));
}

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

template <typename T>
struct LinearLayer {
  Tensor<T> weight;  // [in, out]
  Tensor<T> bias;    // [out]

  Tensor<T> forward(const Tensor<T>& x) const {
    return ops::add_rowvec(ops::matmul(x, weight), bias);
  }
};

template <typename T>
struct BatchNormLayer {
  Tensor<T> gamma;
  Tensor<T> beta;
  ops::BatchNormState<T> state;

  Tensor<T> forward(const Tensor<T>& x, bool train) {
    return ops::batchnorm(x, gamma, beta, state, train);
  }
};

template <typename T>
struct ConvLayer {
  Tensor<T> weight;  // [out, in, 3, 3]
  Tensor<T> bias;    // [out]

  Tensor<T> forward(const Tensor<T>& x) const {
    return ops::conv2d_same3x3(x, weight, bias);
  }
};

// ---------------------------------------------------------------------------
// SpeakerNet
// ---------------------------------------------------------------------------

template <typename T>
class SpeakerNet {
 public:
  SpeakerNet(const ModelConfig& config, std::uint64_t seed)
      : config_(config) {
    config_.validate();
    Rng rng(seed);
    build(rng);
  }

  const ModelConfig& config() const { return config_; }
  bool training() const { return training_; }
  void set_train(bool train) { training_ = train; }

  std::vector<Parameter<T>>& parameters() { return params_; }
  const std::vector<Parameter<T>>& parameters() const { return params_; }

  // Batch-norm running statistics; persisted in checkpoints next to the
  // parameters.
  std::vector<std::pair<std::string, std::vector<T>*>> buffers() {
    return {{"head.bn1.running_mean", &bn1_.state.running_mean},
            {"head.bn1.running_var", &bn1_.state.running_var},
            {"head.bn2.running_mean", &bn2_.state.running_mean},
            {"head.bn2.running_var", &bn2_.state.running_var}};
  }

  // [N, 80] spectrogram tensor -> [T, D] hidden sequence with
  // T = floor(N / 2^blocks) and D = (80 / 2^blocks) * last channel count.
  Tensor<T> vgg_forward(const Tensor<T>& spec) const {
    if (spec.ndim() != 2 || spec.dim(1) != config_.mel_bands)
      throw DimensionError("vgg_forward: expected [N," +
                           std::to_string(config_.mel_bands) + "], got " +
                           shape_str(spec.shape()));
    if (spec.dim(0) < config_.downsample())
      throw InputTooShortError(
          "vgg_forward: " + std::to_string(spec.dim(0)) +
          " frames is fewer than the front-end downsampling factor " +
          std::to_string(config_.downsample()));
    Tensor<T> x = ops::reshape(spec, {1, spec.dim(0), spec.dim(1)});
    for (int b = 0; b < config_.blocks; ++b) {
      x = ops::relu(convs_[2 * b].forward(x));
      x = ops::relu(convs_[2 * b + 1].forward(x));
      x = ops::maxpool2x2(x);
    }
    return ops::fold_time_major(x);
  }

  // Hidden sequence -> pooled utterance vector of width pooled_dim().
  // rng is only consulted for head drop in training mode.
  Tensor<T> pool(const Tensor<T>& h, Rng* rng) const {
    switch (config_.pooling) {
      case PoolingVariant::kStatistical:
        return statistical_pool(h);
      case PoolingVariant::kSelfAttention:
      case PoolingVariant::kMhsa:
        return mhsa_pool(h, u_, config_.effective_heads());
      case PoolingVariant::kDmhsa: {
        const int k = config_.effective_heads();
        Tensor<T> w = attention_weights_per_head(h, u_, k);
        std::vector<Tensor<T>> contexts = head_contexts(h, w, k);
        Tensor<T> hw = double_attention_weights(contexts, u_prime_);
        if (training_ && config_.head_drop > 0.0) {
          if (!rng)
            throw UsageError("dmhsa pooling with head drop needs an rng in "
                             "training mode");
          hw = head_drop(hw, config_.head_drop, *rng, /*train=*/true);
        }
        return combine_heads(contexts, hw);
      }
    }
    throw ConfigError("unhandled pooling variant");
  }

  // Full forward pass over a batch of CMN-applied spectrogram tensors.
  // Returns [B, n_classes] logits; batch norm runs in the current mode.
  Tensor<T> forward_batch_t(const std::vector<Tensor<T>>& specs, Rng* rng) {
    if (specs.empty()) throw UsageError("forward_batch: empty batch");
    std::vector<Tensor<T>> pooled;
    pooled.reserve(specs.size());
    for (const auto& s : specs) pooled.push_back(pool(vgg_forward(s), rng));
    return head_logits(ops::stack_rows(pooled));
  }

  Tensor<T> forward_batch(const std::vector<audio::LogMelSpectrogram>& specs,
                          Rng* rng) {
    std::vector<Tensor<T>> ts;
    ts.reserve(specs.size());
    for (const auto& s : specs) ts.push_back(spec_to_tensor(s));
    return forward_batch_t(ts, rng);
  }

  // Single-utterance logits; eval mode only (train-mode batch norm is
  // undefined for a batch of one).
  std::vector<T> forward(const audio::LogMelSpectrogram& spec) {
    if (training_)
      throw UsageError("forward: single-utterance inference requires eval "
                       "mode");
    NoGradGuard ng;
    Tensor<T> logits = forward_batch({spec}, nullptr);
    return std::vector<T>(logits.data().begin(), logits.data().end());
  }

  // The speaker embedding: the second FC layer's affine output (before its
  // batch norm and ReLU) on the full utterance.
  std::vector<T> extract_embedding(const audio::LogMelSpectrogram& spec) {
    if (training_)
      throw UsageError("extract_embedding: model must be in eval mode");
    NoGradGuard ng;
    Tensor<T> pooled = pool(vgg_forward(spec_to_tensor(spec)), nullptr);
    Tensor<T> x = ops::reshape(pooled, {1, pooled.numel()});
    x = ops::relu(bn1_.forward(fc1_.forward(x), /*train=*/false));
    Tensor<T> e = fc2_.forward(x);
    return std::vector<T>(e.data().begin(), e.data().end());
  }

  struct AttentionInspection {
    std::vector<T> weights;       // [T, K] row-major, per-step rows
    std::int64_t steps = 0;
    std::vector<T> head_weights;  // [K]
  };

  // Attention introspection for one utterance (eval path, no head drop).
  AttentionInspection inspect_attention(const audio::LogMelSpectrogram& spec) {
    if (config_.pooling == PoolingVariant::kStatistical)
      throw UsageError("statistical pooling has no attention weights");
    NoGradGuard ng;
    Tensor<T> h = vgg_forward(spec_to_tensor(spec));
    const int k = config_.effective_heads();
    Tensor<T> w = attention_weights_per_head(h, u_, k);
    AttentionInspection out;
    out.weights = w.data();
    out.steps = w.dim(0);
    if (config_.pooling == PoolingVariant::kDmhsa) {
      out.head_weights =
          double_attention_weights(head_contexts(h, w, k), u_prime_).data();
    }
    return out;
  }

  Tensor<T> spec_to_tensor(const audio::LogMelSpectrogram& spec) const {
    if (!spec.cmn_applied)
      throw UsageError("spectrogram must be CMN-normalized before the model");
    std::vector<T> vals(spec.values.begin(), spec.values.end());
    return Tensor<T>::from({spec.num_frames, spec.num_bands}, std::move(vals));
  }

  Tensor<T> head_logits(const Tensor<T>& pooled_rows) {
    Tensor<T> x = ops::relu(bn1_.forward(fc1_.forward(pooled_rows), training_));
    x = ops::relu(bn2_.forward(fc2_.forward(x), training_));
    x = fc3_.forward(x);
    return fc4_.forward(x);
  }

 private:
  Tensor<T> make_param(const std::string& name, Shape shape,
                       std::vector<T> data) {
    Tensor<T> t = Tensor<T>::from(std::move(shape), std::move(data), true);
    t.set_name(name);
    params_.push_back({name, t});
    return t;
  }

  std::vector<T> he_normal(Rng& rng, std::int64_t n, std::int64_t fan_in) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
    std::vector<T> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = static_cast<T>(dist(rng));
    return v;
  }

  std::vector<T> uniform_sym(Rng& rng, std::int64_t n, double bound) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<T> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = static_cast<T>(dist(rng));
    return v;
  }

  // Construction order fixes the init RNG stream: conv blocks, classifier
  // layers, batch norms, then attention queries.
  void build(Rng& rng) {
    std::int64_t in_ch = 1;
    for (int b = 0; b < config_.blocks; ++b) {
      const std::int64_t out_ch = config_.channels[b];
      for (int layer = 1; layer <= 2; ++layer) {
        const std::int64_t cin = layer == 1 ? in_ch : out_ch;
        const std::string base = "vgg.block" + std::to_string(b + 1) +
                                 ".conv" + std::to_string(layer);
        ConvLayer<T> conv;
        conv.weight = make_param(base + ".weight", {out_ch, cin, 3, 3},
                                 he_normal(rng, out_ch * cin * 9, cin * 9));
        conv.bias = make_param(
            base + ".bias", {out_ch},
            std::vector<T>(static_cast<std::size_t>(out_ch), T(0)));
        convs_.push_back(std::move(conv));
      }
      in_ch = out_ch;
    }
    const std::int64_t pdim = config_.pooled_dim();
    fc1_ = make_linear(rng, "head.fc1", pdim, config_.fc1_dim);
    fc2_ = make_linear(rng, "head.fc2", config_.fc1_dim, config_.embed_dim);
    fc3_ = make_linear(rng, "head.fc3", config_.embed_dim, config_.fc3_dim);
    fc4_ = make_linear(rng, "head.fc4", config_.fc3_dim, config_.n_classes);
    bn1_ = make_bn("head.bn1", config_.fc1_dim);
    bn2_ = make_bn("head.bn2", config_.embed_dim);
    if (config_.pooling != PoolingVariant::kStatistical) {
      const std::int64_t dh = config_.head_dim();
      const double bound = 1.0 / std::sqrt(static_cast<double>(dh));
      for (int j = 0; j < config_.effective_heads(); ++j) {
        u_.push_back(make_param("pool.u." + std::to_string(j), {dh},
                                uniform_sym(rng, dh, bound)));
      }
      if (config_.pooling == PoolingVariant::kDmhsa) {
        u_prime_ =
            make_param("pool.u_prime", {dh}, uniform_sym(rng, dh, bound));
      }
    }
  }

  LinearLayer<T> make_linear(Rng& rng, const std::string& base,
                             std::int64_t in, std::int64_t out) {
    LinearLayer<T> l;
    l.weight = make_param(base + ".weight", {in, out},
                          he_normal(rng, in * out, in));
    l.bias = make_param(base + ".bias", {out},
                        std::vector<T>(static_cast<std::size_t>(out), T(0)));
    return l;
  }

  BatchNormLayer<T> make_bn(const std::string& base, std::int64_t features) {
    BatchNormLayer<T> bn;
    bn.gamma = make_param(base + ".gamma", {features},
                          std::vector<T>(static_cast<std::size_t>(features),
                                         T(1)));
    bn.beta = make_param(base + ".beta", {features},
                         std::vector<T>(static_cast<std::size_t>(features),
                                        T(0)));
    bn.state = ops::BatchNormState<T>(features);
    return bn;
  }

  ModelConfig config_;
  bool training_ = true;
  std::vector<Parameter<T>> params_;
  std::vector<ConvLayer<T>> convs_;
  LinearLayer<T> fc1_, fc2_, fc3_, fc4_;
  BatchNormLayer<T> bn1_, bn2_;
  std::vector<Tensor<T>> u_;
  Tensor<T> u_prime_;
};

// Index of the largest logit.
template <typename T>
int argmax(const std::vector<T>& v) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = static_cast<int>(i);
  return best;
}

}  // namespace speakerkit

#endif  // SPEAKERKIT_MODEL_H_
