#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scogait/random.hpp"
#include "scogait/tensor.hpp"

namespace scogait {

enum class Mode { kTrain, kEval };

// Trainable tensor with its gradient. `decay` marks membership in the
// weight-decay parameter group.
template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  bool decay = true;

  Param() = default;
  Param(std::string n, std::vector<int> shape, bool d)
      : name(std::move(n)), value(shape), grad(shape), decay(d) {}
};

// Non-trainable state that still belongs in a checkpoint (BN statistics).
template <typename T>
struct Buffer {
  std::string name;
  Tensor<T>* tensor;
};

template <typename T>
struct ParamRefs {
  std::vector<Param<T>*> params;
  std::vector<Buffer<T>> buffers;
};

// 2-D convolution without bias over NCHW input.
template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(const std::string& name, int in_channels, int out_channels, int kernel, int stride,
         int pad);

  void init(Rng& rng);
  Tensor<T> forward(const Tensor<T>& x);
  // Accumulates the weight gradient; returns dL/dx unless `input_grad` is false.
  Tensor<T> backward(const Tensor<T>& grad_out, bool input_grad = true);
  void collect(ParamRefs<T>& refs) { refs.params.push_back(&weight_); }

  int out_channels() const { return out_channels_; }
  int out_size(int in) const { return (in + 2 * pad_ - kernel_) / stride_ + 1; }

 private:
  void im2col(const T* image, int h, int w, T* col) const;
  void col2im(const T* col, int h, int w, T* image) const;

  int in_channels_ = 0;
  int out_channels_ = 0;
  int kernel_ = 0;
  int stride_ = 1;
  int pad_ = 0;
  Param<T> weight_;  // [out, in, k, k]
  Tensor<T> input_;
};

// Batch normalization over axis 1 of an [N, C, ...] tensor.
template <typename T>
class BatchNorm {
 public:
  BatchNorm() = default;
  BatchNorm(const std::string& name, int channels, double momentum = 0.1, double eps = 1e-5);

  Tensor<T> forward(const Tensor<T>& x, Mode mode);
  Tensor<T> backward(const Tensor<T>& grad_out);
  void collect(ParamRefs<T>& refs);

  Param<T>& gamma() { return gamma_; }
  Param<T>& beta() { return beta_; }
  Tensor<T>& running_mean() { return running_mean_; }
  Tensor<T>& running_var() { return running_var_; }

 private:
  std::string name_;
  int channels_ = 0;
  double momentum_ = 0.1;
  double eps_ = 1e-5;
  Param<T> gamma_;
  Param<T> beta_;
  Tensor<T> running_mean_;
  Tensor<T> running_var_;

  Mode mode_ = Mode::kTrain;
  Tensor<T> normalized_;
  std::vector<T> inv_std_;
  std::vector<int> shape_;
};

// In-place rectifier helpers; backward masks by the forward output.
template <typename T>
void relu_inplace(Tensor<T>& x);
template <typename T>
void relu_backward_inplace(Tensor<T>& grad, const Tensor<T>& output);

// conv3x3-BN-ReLU-conv3x3-BN plus (projected) shortcut, then ReLU.
template <typename T>
class BasicBlock {
 public:
  BasicBlock() = default;
  BasicBlock(const std::string& name, int in_channels, int out_channels, int stride);

  void init(Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, Mode mode);
  Tensor<T> backward(const Tensor<T>& grad_out);
  void collect(ParamRefs<T>& refs);

 private:
  Conv2d<T> conv1_, conv2_;
  BatchNorm<T> bn1_, bn2_;
  bool projected_ = false;
  Conv2d<T> shortcut_conv_;
  BatchNorm<T> shortcut_bn_;
  Tensor<T> hidden_;
  Tensor<T> output_;
};

}  // namespace scogait
