#pragma once

#include <cstddef>
#include <initializer_list>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace nextpoi::num {

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return rows * cols; }
  bool operator==(const Shape&) const = default;
  std::string to_string() const;
};

/// Cache-line aligned storage. Eigen picks its vectorised code path from the
/// buffer address, so unaligned buffers make sums vary between runs.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

using AlignedBuffer = std::vector<double, AlignedAllocator<double>>;

/// Dense row-major 2-D array of doubles. Vectors are 1 x n, scalars 1 x 1.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> data);
  explicit Tensor(Shape shape, double fill = 0.0) : Tensor(shape.rows, shape.cols, fill) {}

  static Tensor row(std::initializer_list<double> values);
  static Tensor row(std::span<const double> values);
  static Tensor scalar(double value) { return Tensor(1, 1, value); }
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor identity(std::size_t n);

  Shape shape() const { return shape_; }
  std::size_t rows() const { return shape_.rows; }
  std::size_t cols() const { return shape_.cols; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_.cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * shape_.cols + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> row_span(std::size_t r) { return {data_.data() + r * shape_.cols, shape_.cols}; }
  std::span<const double> row_span(std::size_t r) const {
    return {data_.data() + r * shape_.cols, shape_.cols};
  }

  /// Scalar value of a 1 x 1 tensor.
  double item() const;

  void fill(double value);
  Tensor& operator+=(const Tensor& other);
  bool all_finite() const;
  double squared_norm() const;

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  AlignedBuffer data_;
};

}  // namespace nextpoi::num
