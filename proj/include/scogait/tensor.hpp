#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <functional>
#include <new>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "scogait/errors.hpp"

namespace scogait {

// Fixed 64-byte alignment keeps vectorized reductions in the same order from
// one allocation to the next, so repeated runs are bit-identical.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }

  template <typename U>
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator<U>&) {
    return true;
  }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

// Dense row-major tensor with value semantics.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, T fill = T(0))
      : shape_(std::move(shape)), data_(count(shape_), fill) {}

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& at(int a, int b) { return data_[offset(a, b)]; }
  const T& at(int a, int b) const { return data_[offset(a, b)]; }
  T& at(int a, int b, int c) { return data_[offset(a, b, c)]; }
  const T& at(int a, int b, int c) const { return data_[offset(a, b, c)]; }
  T& at(int a, int b, int c, int d) { return data_[offset(a, b, c, d)]; }
  const T& at(int a, int b, int c, int d) const { return data_[offset(a, b, c, d)]; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  void zero() { fill(T(0)); }

  // Same storage, new shape with identical element count.
  Tensor reshaped(std::vector<int> shape) const {
    if (count(shape) != data_.size()) throw ShapeError("reshape changes element count");
    Tensor out;
    out.shape_ = std::move(shape);
    out.data_ = data_;
    return out;
  }

  // Elements [begin, end) of the leading axis.
  Tensor slice(int begin, int end) const {
    assert(rank() >= 1 && begin >= 0 && begin <= end && end <= shape_[0]);
    const std::size_t stride = data_.size() / static_cast<std::size_t>(std::max(shape_[0], 1));
    std::vector<int> shape = shape_;
    shape[0] = end - begin;
    Tensor out(shape);
    std::copy(data_.begin() + static_cast<std::ptrdiff_t>(stride * begin),
              data_.begin() + static_cast<std::ptrdiff_t>(stride * end), out.data_.begin());
    return out;
  }

  Tensor& operator+=(const Tensor& other) {
    assert(other.size() == size());
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
  }

  Tensor& operator*=(T s) {
    for (auto& v : data_) v *= s;
    return *this;
  }

  static std::size_t count(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    return n;
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  std::size_t offset(int a, int b) const {
    assert(rank() == 2);
    return static_cast<std::size_t>(a) * shape_[1] + b;
  }
  std::size_t offset(int a, int b, int c) const {
    assert(rank() == 3);
    return (static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c;
  }
  std::size_t offset(int a, int b, int c, int d) const {
    assert(rank() == 4);
    return ((static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c) * shape_[3] + d;
  }

  std::vector<int> shape_;
  AlignedVector<T> data_;
};

std::string shape_string(const std::vector<int>& shape);

}  // namespace scogait
