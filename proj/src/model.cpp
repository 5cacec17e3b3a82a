#include "scogait/model.hpp"

#include <cmath>
#include <limits>

#include "scogait/random.hpp"

namespace scogait {

namespace {

int conv3_out(int in, int stride) { return (in + 2 - 3) / stride + 1; }

}  // namespace

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kSconetPlain: return "sconet_plain";
    case Variant::kSconetPlainTriplet: return "sconet_plain_triplet";
    case Variant::kSconetPlainMt: return "sconet_plain_mt";
    case Variant::kSconet: return "sconet";
    case Variant::kSconetTriplet: return "sconet_triplet";
    case Variant::kSconetMt: return "sconet_mt";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  for (Variant v : {Variant::kSconetPlain, Variant::kSconetPlainTriplet, Variant::kSconetPlainMt,
                    Variant::kSconet, Variant::kSconetTriplet, Variant::kSconetMt}) {
    if (to_string(v) == s) return v;
  }
  throw ConfigError({"unknown model variant '" + s + "'"});
}

bool uses_part_pooling(Variant v) {
  return v == Variant::kSconet || v == Variant::kSconetTriplet || v == Variant::kSconetMt;
}

std::string to_string(TemporalPooling p) { return p == TemporalPooling::kMax ? "max" : "mean"; }

TemporalPooling parse_temporal_pooling(const std::string& s) {
  if (s == "max") return TemporalPooling::kMax;
  if (s == "mean") return TemporalPooling::kMean;
  throw ConfigError({"unknown temporal pooling '" + s + "' (expected max or mean)"});
}

int ModelConfig::feature_height() const {
  int h = in_h;
  for (int s : strides) h = conv3_out(h, s);
  return h;
}

int ModelConfig::feature_width() const {
  int w = in_w;
  for (int s : strides) w = conv3_out(w, s);
  return w;
}

void ModelConfig::validate() const {
  std::vector<std::string> problems;
  if (in_h < 1 || in_w < 1) problems.push_back("model input size must be positive");
  if (channels.size() < 2) problems.push_back("model.channels needs a stem width and >= 1 stage");
  for (int c : channels) {
    if (c < 1) problems.push_back("model.channels entries must be positive");
  }
  if (channels.size() >= 2 && strides.size() != channels.size() - 1) {
    problems.push_back("model.strides needs one entry per residual stage (" +
                       std::to_string(channels.size() - 1) + ")");
  }
  for (int s : strides) {
    if (s < 1) problems.push_back("model.strides entries must be positive");
  }
  if (blocks_per_stage < 1) problems.push_back("model.blocks_per_stage must be >= 1");
  if (embed_dim < 1) problems.push_back("model.embed_dim must be positive");
  if (n_classes != 3) problems.push_back("model.n_classes is fixed at 3");
  if (parts < 1) {
    problems.push_back("model.parts must be >= 1");
  } else if (problems.empty() && uses_part_pooling(variant) &&
             feature_height() % parts != 0) {
    problems.push_back("model.parts (" + std::to_string(parts) +
                       ") must divide the encoder output height (" +
                       std::to_string(feature_height()) + ")");
  }
  if (!problems.empty()) throw ConfigError(problems);
}

template <typename T>
Tensor<T> temporal_pool(const Tensor<T>& f, std::span<const int> lengths, TemporalPooling kind,
                        std::vector<int>* argmax) {
  if (f.rank() != 4) throw ShapeError("temporal_pool expects (n, c, h, w)");
  int total = 0;
  for (int len : lengths) {
    if (len < 1) throw ShapeError("temporal_pool needs >= 1 frame per view");
    total += len;
  }
  if (total != f.dim(0)) throw ShapeError("view lengths do not sum to the frame count");
  const int views = static_cast<int>(lengths.size());
  const std::size_t frame = f.size() / static_cast<std::size_t>(f.dim(0));
  Tensor<T> z({views, f.dim(1), f.dim(2), f.dim(3)});
  if (argmax) argmax->assign(z.size(), 0);
  int start = 0;
  for (int v = 0; v < views; ++v) {
    T* out = z.data() + v * frame;
    const T* first = f.data() + static_cast<std::size_t>(start) * frame;
    std::copy(first, first + frame, out);
    if (kind == TemporalPooling::kMax) {
      int* idx = argmax ? argmax->data() + v * frame : nullptr;
      if (idx) std::fill(idx, idx + frame, start);
      for (int t = start + 1; t < start + lengths[v]; ++t) {
        const T* src = f.data() + static_cast<std::size_t>(t) * frame;
        for (std::size_t i = 0; i < frame; ++i) {
          if (src[i] > out[i]) {
            out[i] = src[i];
            if (idx) idx[i] = t;
          }
        }
      }
    } else {
      for (int t = start + 1; t < start + lengths[v]; ++t) {
        const T* src = f.data() + static_cast<std::size_t>(t) * frame;
        for (std::size_t i = 0; i < frame; ++i) out[i] += src[i];
      }
      const T inv = T(1) / static_cast<T>(lengths[v]);
      for (std::size_t i = 0; i < frame; ++i) out[i] *= inv;
    }
    start += lengths[v];
  }
  return z;
}

template <typename T>
Tensor<T> temporal_pool_backward(const Tensor<T>& grad, const std::vector<int>& f_shape,
                                 std::span<const int> lengths, TemporalPooling kind,
                                 const std::vector<int>& argmax) {
  Tensor<T> df(f_shape);
  const std::size_t frame = df.size() / static_cast<std::size_t>(f_shape[0]);
  int start = 0;
  for (std::size_t v = 0; v < lengths.size(); ++v) {
    const T* g = grad.data() + v * frame;
    if (kind == TemporalPooling::kMax) {
      const int* idx = argmax.data() + v * frame;
      for (std::size_t i = 0; i < frame; ++i) {
        df[static_cast<std::size_t>(idx[i]) * frame + i] += g[i];
      }
    } else {
      const T inv = T(1) / static_cast<T>(lengths[v]);
      for (int t = start; t < start + lengths[v]; ++t) {
        T* dst = df.data() + static_cast<std::size_t>(t) * frame;
        for (std::size_t i = 0; i < frame; ++i) dst[i] = g[i] * inv;
      }
    }
    start += lengths[v];
  }
  return df;
}

template <typename T>
Tensor<T> horizontal_pool(const Tensor<T>& z, int parts, std::vector<int>* argmax) {
  if (z.rank() != 4) throw ShapeError("horizontal_pool expects (views, c, h, w)");
  const int views = z.dim(0), c = z.dim(1), h = z.dim(2), w = z.dim(3);
  if (parts < 1 || h < parts) {
    throw ShapeError("horizontal_pool: height " + std::to_string(h) + " < parts " +
                     std::to_string(parts));
  }
  if (h % parts != 0) {
    throw ShapeError("horizontal_pool: parts " + std::to_string(parts) +
                     " do not divide height " + std::to_string(h));
  }
  const int rows = h / parts;
  const int strip = rows * w;
  Tensor<T> out({views, parts, c});
  if (argmax) argmax->assign(out.size(), 0);
  for (int v = 0; v < views; ++v) {
    for (int ch = 0; ch < c; ++ch) {
      const T* plane = z.data() + (static_cast<std::size_t>(v) * c + ch) * h * w;
      for (int p = 0; p < parts; ++p) {
        const T* s = plane + static_cast<std::size_t>(p) * strip;
        T best = s[0];
        int best_i = 0;
        T sum = 0;
        for (int i = 0; i < strip; ++i) {
          sum += s[i];
          if (s[i] > best) {
            best = s[i];
            best_i = i;
          }
        }
        const std::size_t o = (static_cast<std::size_t>(v) * parts + p) * c + ch;
        out[o] = best + sum / static_cast<T>(strip);
        if (argmax) (*argmax)[o] = p * strip + best_i;
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> horizontal_pool_backward(const Tensor<T>& grad, const std::vector<int>& z_shape,
                                   int parts, const std::vector<int>& argmax) {
  Tensor<T> dz(z_shape);
  const int views = z_shape[0], c = z_shape[1], h = z_shape[2], w = z_shape[3];
  const int strip = (h / parts) * w;
  const T inv = T(1) / static_cast<T>(strip);
  for (int v = 0; v < views; ++v) {
    for (int ch = 0; ch < c; ++ch) {
      T* plane = dz.data() + (static_cast<std::size_t>(v) * c + ch) * h * w;
      for (int p = 0; p < parts; ++p) {
        const std::size_t o = (static_cast<std::size_t>(v) * parts + p) * c + ch;
        const T g = grad[o];
        T* s = plane + static_cast<std::size_t>(p) * strip;
        for (int i = 0; i < strip; ++i) s[i] += g * inv;
        plane[argmax[o]] += g;
      }
    }
  }
  return dz;
}

template <typename T>
ScoNet<T>::ScoNet(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  const auto& ch = config_.channels;
  stem_conv_ = Conv2d<T>("encoder.stem.conv", 1, ch[0], 3, 1, 1);
  stem_bn_ = BatchNorm<T>("encoder.stem.bn", ch[0]);
  for (std::size_t s = 1; s < ch.size(); ++s) {
    for (int b = 0; b < config_.blocks_per_stage; ++b) {
      const std::string name =
          "encoder.layer" + std::to_string(s) + "." + std::to_string(b);
      blocks_.emplace_back(name, b == 0 ? ch[s - 1] : ch[s], ch[s],
                           b == 0 ? config_.strides[s - 1] : 1);
    }
  }
  const int parts = config_.head_parts();
  const int c = config_.feature_channels();
  const int d = config_.embed_dim;
  fc_weight_ = Param<T>("head.fc.weight", {parts, c, d}, true);
  fc_bias_ = Param<T>("head.fc.bias", {parts, d}, false);
  if (config_.uses_bnneck()) bnneck_ = BatchNorm<T>("head.bnneck", parts * d);
  cls_weight_ = Param<T>("head.classifier.weight", {parts, d, config_.n_classes}, true);
}

template <typename T>
void ScoNet<T>::init(std::uint64_t seed) {
  Rng rng(seed);
  stem_conv_.init(rng);
  for (auto& b : blocks_) b.init(rng);
  const int c = config_.feature_channels(), d = config_.embed_dim;
  const double bound = std::sqrt(6.0 / (c + d));
  for (auto& w : fc_weight_.value.values()) w = static_cast<T>(rng.uniform(-bound, bound));
  fc_bias_.value.zero();
  for (auto& w : cls_weight_.value.values()) w = static_cast<T>(rng.normal() * 0.001);
}

template <typename T>
ParamRefs<T> ScoNet<T>::refs() {
  ParamRefs<T> r;
  stem_conv_.collect(r);
  stem_bn_.collect(r);
  for (auto& b : blocks_) b.collect(r);
  r.params.push_back(&fc_weight_);
  r.params.push_back(&fc_bias_);
  if (config_.uses_bnneck()) bnneck_.collect(r);
  r.params.push_back(&cls_weight_);
  return r;
}

template <typename T>
void ScoNet<T>::zero_grad() {
  for (auto* p : refs().params) p->grad.zero();
}

template <typename T>
Tensor<T> ScoNet<T>::encode(const Tensor<T>& frames, Mode mode) {
  if (frames.rank() != 4 || frames.dim(0) < 1 || frames.dim(1) != 1 ||
      frames.dim(2) != config_.in_h || frames.dim(3) != config_.in_w) {
    throw ShapeError("encode expects (n >= 1, 1, " + std::to_string(config_.in_h) + ", " +
                     std::to_string(config_.in_w) + "), got " + shape_string(frames.shape()));
  }
  mode_ = mode;
  stem_out_ = stem_bn_.forward(stem_conv_.forward(frames), mode);
  relu_inplace(stem_out_);
  Tensor<T> x = stem_out_;
  for (auto& b : blocks_) x = b.forward(x, mode);
  return x;
}

template <typename T>
Tensor<T> ScoNet<T>::embed(const Tensor<T>& part_vectors) {
  const int views = part_vectors.dim(0), parts = part_vectors.dim(1), c = part_vectors.dim(2);
  const int d = config_.embed_dim;
  if (parts != config_.head_parts() || c != config_.feature_channels()) {
    throw ShapeError("embed: unexpected part vector shape " + shape_string(part_vectors.shape()));
  }
  part_vectors_ = part_vectors;
  Tensor<T> e({views, parts, d});
  for (int v = 0; v < views; ++v) {
    for (int p = 0; p < parts; ++p) {
      T* out = &e.at(v, p, 0);
      const T* bias = &fc_bias_.value.at(p, 0);
      std::copy(bias, bias + d, out);
      const T* in = &part_vectors.at(v, p, 0);
      for (int k = 0; k < c; ++k) {
        const T x = in[k];
        if (x == T(0)) continue;
        const T* wrow = &fc_weight_.value.at(p, k, 0);
        for (int j = 0; j < d; ++j) out[j] += x * wrow[j];
      }
    }
  }
  return e;
}

template <typename T>
Tensor<T> ScoNet<T>::classify(const Tensor<T>& embeddings, Mode mode) {
  const int views = embeddings.dim(0), parts = embeddings.dim(1), d = embeddings.dim(2);
  const int k = config_.n_classes;
  if (config_.uses_bnneck()) {
    neck_ = bnneck_.forward(embeddings.reshaped({views, parts * d}), mode)
                .reshaped({views, parts, d});
  } else {
    neck_ = embeddings;
  }
  Tensor<T> logits({views, k});
  const T inv_parts = T(1) / static_cast<T>(parts);
  for (int v = 0; v < views; ++v) {
    for (int p = 0; p < parts; ++p) {
      for (int j = 0; j < d; ++j) {
        const T x = neck_.at(v, p, j) * inv_parts;
        const T* wrow = &cls_weight_.value.at(p, j, 0);
        for (int c = 0; c < k; ++c) logits.at(v, c) += x * wrow[c];
      }
    }
  }
  return logits;
}

template <typename T>
ForwardOutput<T> ScoNet<T>::forward(const Tensor<T>& frames, std::span<const int> lengths,
                                    Mode mode) {
  features_ = encode(frames, mode);
  lengths_.assign(lengths.begin(), lengths.end());
  pooled_ = temporal_pool(features_, lengths, config_.temporal_pooling, &tp_argmax_);
  const Tensor<T> parts = horizontal_pool(pooled_, config_.head_parts(), &hp_argmax_);
  ForwardOutput<T> out;
  out.embeddings = embed(parts);
  out.logits = classify(out.embeddings, mode);
  embeddings_ = out.embeddings;
  return out;
}

template <typename T>
Tensor<T> ScoNet<T>::backward_to_features(const Tensor<T>& d_embeddings,
                                          const Tensor<T>& d_logits) {
  const int views = neck_.dim(0), parts = neck_.dim(1), d = neck_.dim(2);
  const int k = config_.n_classes;
  const T inv_parts = T(1) / static_cast<T>(parts);
  Tensor<T> d_neck({views, parts, d});
  for (int v = 0; v < views; ++v) {
    for (int p = 0; p < parts; ++p) {
      for (int j = 0; j < d; ++j) {
        const T* wrow = &cls_weight_.value.at(p, j, 0);
        T* grow = &cls_weight_.grad.at(p, j, 0);
        const T x = neck_.at(v, p, j) * inv_parts;
        T acc = 0;
        for (int c = 0; c < k; ++c) {
          const T g = d_logits.at(v, c);
          acc += g * wrow[c];
          grow[c] += x * g;
        }
        d_neck.at(v, p, j) = acc * inv_parts;
      }
    }
  }
  Tensor<T> d_e = config_.uses_bnneck()
                      ? bnneck_.backward(d_neck.reshaped({views, parts * d}))
                            .reshaped({views, parts, d})
                      : d_neck;
  if (!d_embeddings.empty()) d_e += d_embeddings;

  const int c = config_.feature_channels();
  Tensor<T> d_parts({views, parts, c});
  for (int v = 0; v < views; ++v) {
    for (int p = 0; p < parts; ++p) {
      const T* g = &d_e.at(v, p, 0);
      T* bias_grad = &fc_bias_.grad.at(p, 0);
      for (int j = 0; j < d; ++j) bias_grad[j] += g[j];
      for (int ch = 0; ch < c; ++ch) {
        const T x = part_vectors_.at(v, p, ch);
        const T* wrow = &fc_weight_.value.at(p, ch, 0);
        T* grow = &fc_weight_.grad.at(p, ch, 0);
        T acc = 0;
        for (int j = 0; j < d; ++j) {
          acc += g[j] * wrow[j];
          grow[j] += x * g[j];
        }
        d_parts.at(v, p, ch) = acc;
      }
    }
  }
  const Tensor<T> dz = horizontal_pool_backward(d_parts, pooled_.shape(), parts, hp_argmax_);
  return temporal_pool_backward(dz, features_.shape(), lengths_, config_.temporal_pooling,
                                tp_argmax_);
}

template <typename T>
void ScoNet<T>::backward_encoder(const Tensor<T>& d_features) {
  Tensor<T> g = d_features;
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) g = it->backward(g);
  relu_backward_inplace(g, stem_out_);
  stem_conv_.backward(stem_bn_.backward(g), /*input_grad=*/false);
}

template <typename T>
void ScoNet<T>::backward(const Tensor<T>& d_embeddings, const Tensor<T>& d_logits) {
  backward_encoder(backward_to_features(d_embeddings, d_logits));
}

#define SCOGAIT_INSTANTIATE(T)                                                               \
  template Tensor<T> temporal_pool<T>(const Tensor<T>&, std::span<const int>, TemporalPooling, \
                                      std::vector<int>*);                                    \
  template Tensor<T> temporal_pool_backward<T>(const Tensor<T>&, const std::vector<int>&,    \
                                               std::span<const int>, TemporalPooling,        \
                                               const std::vector<int>&);                     \
  template Tensor<T> horizontal_pool<T>(const Tensor<T>&, int, std::vector<int>*);           \
  template Tensor<T> horizontal_pool_backward<T>(const Tensor<T>&, const std::vector<int>&,  \
                                                 int, const std::vector<int>&);              \
  template class ScoNet<T>;

SCOGAIT_INSTANTIATE(float)
SCOGAIT_INSTANTIATE(double)
#undef SCOGAIT_INSTANTIATE

}  // namespace scogait
