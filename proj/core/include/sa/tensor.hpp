#ifndef SA_TENSOR_HPP
#define SA_TENSOR_HPP

#include <algorithm>
#include <cstdint>
#include <vector>

#include "sa/common.hpp"

namespace sa {

// Dense rank-4 shape (batch, channel, height, width). Lower-rank data
// (scalars, vectors, matrices) is stored with trailing singleton axes.
struct Shape4 {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::int64_t numel() const {
    return std::int64_t(n) * c * h * w;
  }
  bool operator==(const Shape4&) const = default;
};

inline std::string to_string(const Shape4& s) {
  return strcat("(", s.n, ",", s.c, ",", s.h, ",", s.w, ")");
}

template <typename S>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape4 shape, S fill = S(0))
      : shape_(shape), data_(static_cast<std::size_t>(shape.numel()), fill) {
    if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
      throw DimensionError(strcat("negative tensor dimension ", to_string(shape)));
    }
  }
  Tensor(Shape4 shape, std::vector<S> data) : shape_(shape), data_(std::move(data)) {
    if (static_cast<std::int64_t>(data_.size()) != shape_.numel()) {
      throw DimensionError(strcat("data length ", data_.size(), " does not match shape ",
                                  to_string(shape_)));
    }
  }

  static Tensor scalar(S v) { return Tensor({1, 1, 1, 1}, std::vector<S>{v}); }

  const Shape4& shape() const { return shape_; }
  std::int64_t numel() const { return shape_.numel(); }

  S* data() { return data_.data(); }
  const S* data() const { return data_.data(); }
  std::vector<S>& vec() { return data_; }
  const std::vector<S>& vec() const { return data_; }

  S& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  const S& operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  S& at(int n, int c, int h, int w) { return data_[flat(n, c, h, w)]; }
  const S& at(int n, int c, int h, int w) const { return data_[flat(n, c, h, w)]; }

  std::size_t flat(int n, int c, int h, int w) const {
    return static_cast<std::size_t>(((std::int64_t(n) * shape_.c + c) * shape_.h + h) * shape_.w + w);
  }

  void fill(S v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  template <typename T>
  Tensor<T> cast() const {
    std::vector<T> out(data_.size());
    std::transform(data_.begin(), data_.end(), out.begin(),
                   [](S v) { return static_cast<T>(v); });
    return Tensor<T>(shape_, std::move(out));
  }

 private:
  Shape4 shape_{0, 0, 0, 0};
  std::vector<S> data_;
};

}  // namespace sa

#endif  // SA_TENSOR_HPP
