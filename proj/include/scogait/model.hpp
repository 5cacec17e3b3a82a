#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "scogait/layers.hpp"
#include "scogait/tensor.hpp"

namespace scogait {

// Model/loss combinations. The "plain" family swaps horizontal pooling for
// one global pool and drops the BNNeck. "triplet" adds a triplet term keyed
// on the diagnostic label, "mt" keys it on subject identity.
enum class Variant {
  kSconetPlain,
  kSconetPlainTriplet,
  kSconetPlainMt,
  kSconet,
  kSconetTriplet,
  kSconetMt,
};

enum class TemporalPooling { kMax, kMean };

std::string to_string(Variant v);
Variant parse_variant(const std::string& s);
bool uses_part_pooling(Variant v);
std::string to_string(TemporalPooling p);
TemporalPooling parse_temporal_pooling(const std::string& s);

struct ModelConfig {
  int in_h = 64;
  int in_w = 44;
  // Stem width followed by one width per residual stage.
  std::vector<int> channels{32, 64, 128, 256};
  // One stride per residual stage.
  std::vector<int> strides{1, 2, 2};
  int blocks_per_stage = 2;
  int parts = 16;
  int embed_dim = 256;
  int n_classes = 3;
  Variant variant = Variant::kSconetMt;
  TemporalPooling temporal_pooling = TemporalPooling::kMax;

  int feature_channels() const { return channels.back(); }
  int feature_height() const;
  int feature_width() const;
  // Parts actually produced by the head (1 for the plain family).
  int head_parts() const { return uses_part_pooling(variant) ? parts : 1; }
  bool uses_bnneck() const { return uses_part_pooling(variant); }

  // Throws ConfigError listing every violated constraint.
  void validate() const;
};

// Max (or mean) over the frame axis, separately for each view.
// f: [n_total, c, h, w]; lengths sum to n_total. Returns [views, c, h, w].
// `argmax` (max mode) receives the winning frame index per output element.
template <typename T>
Tensor<T> temporal_pool(const Tensor<T>& f, std::span<const int> lengths,
                        TemporalPooling kind = TemporalPooling::kMax,
                        std::vector<int>* argmax = nullptr);

template <typename T>
Tensor<T> temporal_pool_backward(const Tensor<T>& grad, const std::vector<int>& f_shape,
                                 std::span<const int> lengths, TemporalPooling kind,
                                 const std::vector<int>& argmax);

// Splits the height axis of z [views, c, h, w] into `parts` equal strips and
// returns max + mean of each strip per channel: [views, parts, c].
template <typename T>
Tensor<T> horizontal_pool(const Tensor<T>& z, int parts, std::vector<int>* argmax = nullptr);

template <typename T>
Tensor<T> horizontal_pool_backward(const Tensor<T>& grad, const std::vector<int>& z_shape,
                                   int parts, const std::vector<int>& argmax);

template <typename T>
struct ForwardOutput {
  Tensor<T> embeddings;  // [views, parts, embed_dim], pre-BNNeck
  Tensor<T> logits;      // [views, n_classes], averaged over parts
};

// ResNet-style frame encoder followed by set pooling, part pooling,
// separate per-part FC layers and a BNNeck classifier.
template <typename T>
class ScoNet {
 public:
  explicit ScoNet(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  void init(std::uint64_t seed);

  // frames: [n_total, 1, in_h, in_w]; lengths: frames per view.
  ForwardOutput<T> forward(const Tensor<T>& frames, std::span<const int> lengths, Mode mode);

  // Individual stages; they cache what backward needs.
  Tensor<T> encode(const Tensor<T>& frames, Mode mode);
  Tensor<T> embed(const Tensor<T>& part_vectors);
  Tensor<T> classify(const Tensor<T>& embeddings, Mode mode);

  // Backprop from loss gradients. d_embeddings may be empty (no metric loss).
  void backward(const Tensor<T>& d_embeddings, const Tensor<T>& d_logits);
  // Head-only backprop, returning dL/df for the last forward's feature map.
  Tensor<T> backward_to_features(const Tensor<T>& d_embeddings, const Tensor<T>& d_logits);
  void backward_encoder(const Tensor<T>& d_features);

  const Tensor<T>& feature_map() const { return features_; }

  ParamRefs<T> refs();
  void zero_grad();

 private:
  ModelConfig config_;
  Conv2d<T> stem_conv_;
  BatchNorm<T> stem_bn_;
  std::vector<BasicBlock<T>> blocks_;
  Param<T> fc_weight_;   // [parts, c, embed_dim]
  Param<T> fc_bias_;     // [parts, embed_dim]
  BatchNorm<T> bnneck_;  // over parts * embed_dim features
  Param<T> cls_weight_;  // [parts, embed_dim, n_classes]

  Mode mode_ = Mode::kTrain;
  Tensor<T> stem_out_;
  Tensor<T> features_;
  std::vector<int> lengths_;
  std::vector<int> tp_argmax_;
  Tensor<T> pooled_;
  std::vector<int> hp_argmax_;
  Tensor<T> part_vectors_;
  Tensor<T> embeddings_;
  Tensor<T> neck_;
};

}  // namespace scogait
