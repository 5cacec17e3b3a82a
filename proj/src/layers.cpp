#include "scogait/layers.hpp"

#include <cmath>

#include <Eigen/Core>

#include "scogait/blas.hpp"

namespace scogait {

namespace {

template <typename T>
using ArrayMap = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;
template <typename T>
using ConstArrayMap = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;

// Contiguous (sample, channel) slab of an [N, C, inner] buffer.
template <typename T>
ArrayMap<T> slab(T* base, std::size_t offset, std::size_t inner) {
  return ArrayMap<T>(base + offset, static_cast<Eigen::Index>(inner));
}
template <typename T>
ConstArrayMap<T> slab(const T* base, std::size_t offset, std::size_t inner) {
  return ConstArrayMap<T>(base + offset, static_cast<Eigen::Index>(inner));
}

}  // namespace

template <typename T>
Conv2d<T>::Conv2d(const std::string& name, int in_channels, int out_channels, int kernel,
                  int stride, int pad)
    : in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel),
      stride_(stride),
      pad_(pad),
      weight_(name + ".weight", {out_channels, in_channels, kernel, kernel}, true) {}

template <typename T>
void Conv2d<T>::init(Rng& rng) {
  // He initialization for ReLU networks, fan-in mode.
  const double std = std::sqrt(2.0 / (in_channels_ * kernel_ * kernel_));
  for (auto& w : weight_.value.values()) w = static_cast<T>(rng.normal() * std);
}

// Valid output columns [x0, x1) for kernel column kx: 0 <= x*stride - pad + kx < w.
inline void valid_range(int w, int ow, int stride, int pad, int kx, int& x0, int& x1) {
  const int off = kx - pad;
  x0 = off >= 0 ? 0 : (-off + stride - 1) / stride;
  x1 = w - off <= 0 ? 0 : std::min(ow, (w - off - 1) / stride + 1);
  if (x1 < x0) x1 = x0;
}

template <typename T>
void Conv2d<T>::im2col(const T* image, int h, int w, T* col) const {
  const int oh = out_size(h), ow = out_size(w);
  for (int c = 0; c < in_channels_; ++c) {
    for (int ky = 0; ky < kernel_; ++ky) {
      for (int kx = 0; kx < kernel_; ++kx) {
        int x0, x1;
        valid_range(w, ow, stride_, pad_, kx, x0, x1);
        const int off = kx - pad_;
        T* row = col + ((static_cast<std::size_t>(c) * kernel_ + ky) * kernel_ + kx) * oh * ow;
        for (int y = 0; y < oh; ++y) {
          const int iy = y * stride_ - pad_ + ky;
          T* dst = row + static_cast<std::size_t>(y) * ow;
          if (iy < 0 || iy >= h) {
            std::fill(dst, dst + ow, T(0));
            continue;
          }
          const T* src = image + (static_cast<std::size_t>(c) * h + iy) * w + off;
          std::fill(dst, dst + x0, T(0));
          if (stride_ == 1) {
            std::copy(src + x0, src + x1, dst + x0);
          } else {
            for (int x = x0; x < x1; ++x) dst[x] = src[x * stride_];
          }
          std::fill(dst + x1, dst + ow, T(0));
        }
      }
    }
  }
}

template <typename T>
void Conv2d<T>::col2im(const T* col, int h, int w, T* image) const {
  const int oh = out_size(h), ow = out_size(w);
  std::fill(image, image + static_cast<std::size_t>(in_channels_) * h * w, T(0));
  for (int c = 0; c < in_channels_; ++c) {
    for (int ky = 0; ky < kernel_; ++ky) {
      for (int kx = 0; kx < kernel_; ++kx) {
        int x0, x1;
        valid_range(w, ow, stride_, pad_, kx, x0, x1);
        const int off = kx - pad_;
        const T* row =
            col + ((static_cast<std::size_t>(c) * kernel_ + ky) * kernel_ + kx) * oh * ow;
        for (int y = 0; y < oh; ++y) {
          const int iy = y * stride_ - pad_ + ky;
          if (iy < 0 || iy >= h) continue;
          T* dst = image + (static_cast<std::size_t>(c) * h + iy) * w + off;
          const T* src = row + static_cast<std::size_t>(y) * ow;
          if (stride_ == 1) {
            for (int x = x0; x < x1; ++x) dst[x] += src[x];
          } else {
            for (int x = x0; x < x1; ++x) dst[x * stride_] += src[x];
          }
        }
      }
    }
  }
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x) {
  if (x.rank() != 4 || x.dim(1) != in_channels_) {
    throw ShapeError("conv expects (n, " + std::to_string(in_channels_) + ", h, w), got " +
                     shape_string(x.shape()));
  }
  input_ = x;
  const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const int oh = out_size(h), ow = out_size(w);
  const int patch = in_channels_ * kernel_ * kernel_;
  Tensor<T> out({n, out_channels_, oh, ow});
  AlignedVector<T> col(static_cast<std::size_t>(patch) * oh * ow);
  const std::size_t in_stride = static_cast<std::size_t>(in_channels_) * h * w;
  const std::size_t out_stride = static_cast<std::size_t>(out_channels_) * oh * ow;
  for (int i = 0; i < n; ++i) {
    im2col(x.data() + i * in_stride, h, w, col.data());
    blas::gemm<T>(false, false, out_channels_, oh * ow, patch, T(1), weight_.value.data(), patch,
                  col.data(), oh * ow, T(0), out.data() + i * out_stride, oh * ow);
  }
  return out;
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& grad_out, bool input_grad) {
  const int n = input_.dim(0), h = input_.dim(2), w = input_.dim(3);
  const int oh = out_size(h), ow = out_size(w);
  const int patch = in_channels_ * kernel_ * kernel_;
  AlignedVector<T> col(static_cast<std::size_t>(patch) * oh * ow);
  const std::size_t in_stride = static_cast<std::size_t>(in_channels_) * h * w;
  const std::size_t out_stride = static_cast<std::size_t>(out_channels_) * oh * ow;
  Tensor<T> grad_in;
  if (input_grad) grad_in = Tensor<T>(input_.shape());
  for (int i = 0; i < n; ++i) {
    const T* dy = grad_out.data() + i * out_stride;
    im2col(input_.data() + i * in_stride, h, w, col.data());
    blas::gemm<T>(false, true, out_channels_, patch, oh * ow, T(1), dy, oh * ow, col.data(),
                  oh * ow, T(1), weight_.grad.data(), patch);
    if (input_grad) {
      blas::gemm<T>(true, false, patch, oh * ow, out_channels_, T(1), weight_.value.data(), patch,
                    dy, oh * ow, T(0), col.data(), oh * ow);
      col2im(col.data(), h, w, grad_in.data() + i * in_stride);
    }
  }
  return grad_in;
}

template <typename T>
BatchNorm<T>::BatchNorm(const std::string& name, int channels, double momentum, double eps)
    : name_(name),
      channels_(channels),
      momentum_(momentum),
      eps_(eps),
      gamma_(name + ".weight", {channels}, false),
      beta_(name + ".bias", {channels}, false),
      running_mean_({channels}, T(0)),
      running_var_({channels}, T(1)) {
  gamma_.value.fill(T(1));
}

template <typename T>
void BatchNorm<T>::collect(ParamRefs<T>& refs) {
  refs.params.push_back(&gamma_);
  refs.params.push_back(&beta_);
  refs.buffers.push_back({name_ + ".running_mean", &running_mean_});
  refs.buffers.push_back({name_ + ".running_var", &running_var_});
}

template <typename T>
Tensor<T> BatchNorm<T>::forward(const Tensor<T>& x, Mode mode) {
  if (x.rank() < 2 || x.dim(1) != channels_) {
    throw ShapeError("batch norm " + name_ + " expects " + std::to_string(channels_) +
                     " channels, got " + shape_string(x.shape()));
  }
  mode_ = mode;
  shape_ = x.shape();
  const int n = x.dim(0);
  const std::size_t inner = x.size() / (static_cast<std::size_t>(n) * channels_);
  const std::size_t count = static_cast<std::size_t>(n) * inner;
  Tensor<T> out(x.shape());
  normalized_ = Tensor<T>(x.shape());
  inv_std_.assign(channels_, T(0));
  std::vector<double> mean(channels_, 0.0), var(channels_, 0.0);
  if (mode == Mode::kTrain) {
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < channels_; ++c) {
        mean[c] += slab(x.data(), (static_cast<std::size_t>(i) * channels_ + c) * inner, inner).sum();
      }
    }
    for (int c = 0; c < channels_; ++c) mean[c] /= static_cast<double>(count);
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < channels_; ++c) {
        var[c] += (slab(x.data(), (static_cast<std::size_t>(i) * channels_ + c) * inner, inner) - static_cast<T>(mean[c])).square().sum();
      }
    }
    for (int c = 0; c < channels_; ++c) {
      const double sq = var[c];
      var[c] = sq / static_cast<double>(count);
      const double unbiased = count > 1 ? sq / static_cast<double>(count - 1) : var[c];
      running_mean_[c] = static_cast<T>((1 - momentum_) * running_mean_[c] + momentum_ * mean[c]);
      running_var_[c] = static_cast<T>((1 - momentum_) * running_var_[c] + momentum_ * unbiased);
    }
  } else {
    for (int c = 0; c < channels_; ++c) {
      mean[c] = running_mean_[c];
      var[c] = running_var_[c];
    }
  }
  for (int c = 0; c < channels_; ++c) inv_std_[c] = static_cast<T>(1.0 / std::sqrt(var[c] + eps_));
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < channels_; ++c) {
      auto xn = slab(normalized_.data(), (static_cast<std::size_t>(i) * channels_ + c) * inner, inner);
      xn = (slab(x.data(), (static_cast<std::size_t>(i) * channels_ + c) * inner, inner) - static_cast<T>(mean[c])) * inv_std_[c];
      slab(out.data(), (static_cast<std::size_t>(i) * channels_ + c) * inner, inner) = xn * gamma_.value[c] + beta_.value[c];
    }
  }
  return out;
}

template <typename T>
Tensor<T> BatchNorm<T>::backward(const Tensor<T>& grad_out) {
  const int n = shape_[0];
  const std::size_t inner = grad_out.size() / (static_cast<std::size_t>(n) * channels_);
  const double count = static_cast<double>(n) * inner;
  Tensor<T> grad_in(shape_);
  std::vector<double> sum_dy(channels_, 0.0), sum_dy_xn(channels_, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < channels_; ++c) {
      auto dy = slab(grad_out.data(), (static_cast<std::size_t>(i) * channels_ + c) * inner, inner);
      sum_dy[c] += dy.sum();
      sum_dy_xn[c] += (dy * slab(normalized_.data(), (static_cast<std::size_t>(i) * channels_ + c) * inner, inner)).sum();
    }
  }
  for (int c = 0; c < channels_; ++c) {
    gamma_.grad[c] += static_cast<T>(sum_dy_xn[c]);
    beta_.grad[c] += static_cast<T>(sum_dy[c]);
  }
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < channels_; ++c) {
      const T scale = gamma_.value[c] * inv_std_[c];
      auto dx = slab(grad_in.data(), (static_cast<std::size_t>(i) * channels_ + c) * inner, inner);
      auto dy = slab(grad_out.data(), (static_cast<std::size_t>(i) * channels_ + c) * inner, inner);
      if (mode_ == Mode::kTrain) {
        const T mean_dy = static_cast<T>(sum_dy[c] / count);
        const T mean_dy_xn = static_cast<T>(sum_dy_xn[c] / count);
        dx = scale * (dy - mean_dy - slab(normalized_.data(), (static_cast<std::size_t>(i) * channels_ + c) * inner, inner) * mean_dy_xn);
      } else {
        dx = scale * dy;
      }
    }
  }
  return grad_in;
}

template <typename T>
void relu_inplace(Tensor<T>& x) {
  for (auto& v : x.values()) v = v > T(0) ? v : T(0);
}

template <typename T>
void relu_backward_inplace(Tensor<T>& grad, const Tensor<T>& output) {
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!(output[i] > T(0))) grad[i] = T(0);
  }
}

template <typename T>
BasicBlock<T>::BasicBlock(const std::string& name, int in_channels, int out_channels, int stride)
    : conv1_(name + ".conv1", in_channels, out_channels, 3, stride, 1),
      conv2_(name + ".conv2", out_channels, out_channels, 3, 1, 1),
      bn1_(name + ".bn1", out_channels),
      bn2_(name + ".bn2", out_channels),
      projected_(stride != 1 || in_channels != out_channels) {
  if (projected_) {
    shortcut_conv_ = Conv2d<T>(name + ".shortcut.conv", in_channels, out_channels, 1, stride, 0);
    shortcut_bn_ = BatchNorm<T>(name + ".shortcut.bn", out_channels);
  }
}

template <typename T>
void BasicBlock<T>::init(Rng& rng) {
  conv1_.init(rng);
  conv2_.init(rng);
  if (projected_) shortcut_conv_.init(rng);
}

template <typename T>
void BasicBlock<T>::collect(ParamRefs<T>& refs) {
  conv1_.collect(refs);
  bn1_.collect(refs);
  conv2_.collect(refs);
  bn2_.collect(refs);
  if (projected_) {
    shortcut_conv_.collect(refs);
    shortcut_bn_.collect(refs);
  }
}

template <typename T>
Tensor<T> BasicBlock<T>::forward(const Tensor<T>& x, Mode mode) {
  hidden_ = bn1_.forward(conv1_.forward(x), mode);
  relu_inplace(hidden_);
  Tensor<T> out = bn2_.forward(conv2_.forward(hidden_), mode);
  if (projected_) {
    out += shortcut_bn_.forward(shortcut_conv_.forward(x), mode);
  } else {
    out += x;
  }
  relu_inplace(out);
  output_ = out;
  return out;
}

template <typename T>
Tensor<T> BasicBlock<T>::backward(const Tensor<T>& grad_out) {
  Tensor<T> g = grad_out;
  relu_backward_inplace(g, output_);
  Tensor<T> gh = conv2_.backward(bn2_.backward(g));
  relu_backward_inplace(gh, hidden_);
  Tensor<T> grad_in = conv1_.backward(bn1_.backward(gh));
  if (projected_) {
    grad_in += shortcut_conv_.backward(shortcut_bn_.backward(g));
  } else {
    grad_in += g;
  }
  return grad_in;
}

template class Conv2d<float>;
template class Conv2d<double>;
template class BatchNorm<float>;
template class BatchNorm<double>;
template class BasicBlock<float>;
template class BasicBlock<double>;
template void relu_inplace<float>(Tensor<float>&);
template void relu_inplace<double>(Tensor<double>&);
template void relu_backward_inplace<float>(Tensor<float>&, const Tensor<float>&);
template void relu_backward_inplace<double>(Tensor<double>&, const Tensor<double>&);

}  // namespace scogait
