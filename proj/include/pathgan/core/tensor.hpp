#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <new>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "pathgan/core/error.hpp"

namespace pathgan {

using Shape = std::vector<std::int64_t>;

/// Eigen's vectorised reductions peel leading elements based on the runtime
/// address, so buffers are over-aligned to keep float sums bit-reproducible.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};
  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) {}
  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }
  template <class U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

using FloatBuffer = std::vector<float, AlignedAllocator<float>>;

inline std::int64_t shape_numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::int64_t{1}, std::multiplies<>{});
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ')';
  return os.str();
}

/// Dense row-major float tensor. Images inside the network use NCHW.
class Tensor {
public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f)
      : shape_(std::move(shape)), data_(static_cast<std::size_t>(shape_numel(shape_)), fill) {}
  Tensor(Shape shape, FloatBuffer data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (static_cast<std::int64_t>(data_.size()) != shape_numel(shape_))
      throw ArgumentError("tensor data size does not match shape " + shape_str(shape_));
  }
  Tensor(Shape shape, const std::vector<float>& data) : shape_(std::move(shape)), data_(data.begin(), data.end()) {
    if (static_cast<std::int64_t>(data_.size()) != shape_numel(shape_))
      throw ArgumentError("tensor data size does not match shape " + shape_str(shape_));
  }

  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape_); }

  const Shape& shape() const { return shape_; }
  std::int64_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t rank() const { return shape_.size(); }
  std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  std::span<float> values() { return data_; }
  std::span<const float> values() const { return data_; }
  FloatBuffer& storage() { return data_; }
  const FloatBuffer& storage() const { return data_; }

  float& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  float operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  /// Same data, new shape with identical element count.
  Tensor reshaped(Shape s) const {
    if (shape_numel(s) != numel())
      throw ArgumentError("cannot reshape " + shape_str(shape_) + " to " + shape_str(s));
    return Tensor(std::move(s), data_);
  }
  void reshape_inplace(Shape s) {
    if (shape_numel(s) != numel())
      throw ArgumentError("cannot reshape " + shape_str(shape_) + " to " + shape_str(s));
    shape_ = std::move(s);
  }

  void fill(float v) { std::fill(data_.begin(), data_.end(), v); }

  void add_(const Tensor& o) {
    if (o.numel() != numel()) throw ArgumentError("add_: size mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  }
  void scale_(float s) {
    for (auto& v : data_) v *= s;
  }

  bool operator==(const Tensor& o) const { return shape_ == o.shape_ && data_ == o.data_; }

private:
  Shape shape_;
  FloatBuffer data_;
};

/// Deterministic RNG used throughout; seeds are 64-bit.
using Rng = std::mt19937_64;

inline Tensor randn(Shape shape, Rng& rng, float stddev = 1.0f) {
  Tensor t(std::move(shape));
  std::normal_distribution<float> nd(0.0f, stddev);
  for (auto& v : t.values()) v = nd(rng);
  return t;
}

} // namespace pathgan
