#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

#include "mars/errors.hpp"

namespace mars {

template <typename Scalar>
using MatrixRM = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using MatrixXdRM = MatrixRM<double>;

/// Storage for buffers read through Eigen maps. A fixed base alignment keeps the
/// vectorized kernels on the same code path from run to run, so results are
/// bitwise reproducible.
template <typename Scalar>
using AlignedVector = std::vector<Scalar, Eigen::aligned_allocator<Scalar>>;

/// Dense [batch x time x width] tensor, row-major with the width axis innermost.
///
/// Each (batch, time) slot holds a contiguous width-vector, so a batch row is a
/// [time x width] row-major matrix and the whole tensor is a [(batch*time) x width]
/// matrix. The scans walk time with the width (hidden unit) axis vectorized.
template <typename Scalar>
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(std::size_t batch, std::size_t time, std::size_t width, Scalar fill = Scalar(0))
      : batch_(batch), time_(time), width_(width), data_(batch * time * width, fill) {}

  std::size_t batch() const noexcept { return batch_; }
  std::size_t time() const noexcept { return time_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  Scalar& operator()(std::size_t b, std::size_t t, std::size_t w) {
    return data_[(b * time_ + t) * width_ + w];
  }
  Scalar operator()(std::size_t b, std::size_t t, std::size_t w) const {
    return data_[(b * time_ + t) * width_ + w];
  }

  Scalar* slot(std::size_t b, std::size_t t) { return data_.data() + (b * time_ + t) * width_; }
  const Scalar* slot(std::size_t b, std::size_t t) const {
    return data_.data() + (b * time_ + t) * width_;
  }

  std::span<Scalar> flat() noexcept { return data_; }
  std::span<const Scalar> flat() const noexcept { return data_; }
  Scalar* data() noexcept { return data_.data(); }
  const Scalar* data() const noexcept { return data_.data(); }

  /// [(batch*time) x width] view.
  Eigen::Map<MatrixRM<Scalar>> rows() {
    return {data_.data(), static_cast<Eigen::Index>(batch_ * time_),
            static_cast<Eigen::Index>(width_)};
  }
  Eigen::Map<const MatrixRM<Scalar>> rows() const {
    return {data_.data(), static_cast<Eigen::Index>(batch_ * time_),
            static_cast<Eigen::Index>(width_)};
  }

  bool same_shape(const Tensor3& other) const noexcept {
    return batch_ == other.batch_ && time_ == other.time_ && width_ == other.width_;
  }

  template <typename Other>
  Tensor3<Other> cast() const {
    Tensor3<Other> out(batch_, time_, width_);
    for (std::size_t i = 0; i < data_.size(); ++i) out.data()[i] = static_cast<Other>(data_[i]);
    return out;
  }

  friend bool operator==(const Tensor3&, const Tensor3&) = default;

 private:
  std::size_t batch_ = 0;
  std::size_t time_ = 0;
  std::size_t width_ = 0;
  AlignedVector<Scalar> data_;
};

}  // namespace mars
