#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace gzsl::numerics {

// Row-major float32 matrix. Batches are stored one sample per row.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, float fill = 0.0f);
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<float> data);

  static DenseMatrix from_rows(std::initializer_list<std::initializer_list<float>> rows);
  static DenseMatrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  float& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  float operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<float> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const float> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<float> values() noexcept { return data_; }
  std::span<const float> values() const noexcept { return data_; }
  float* data() noexcept { return data_.data(); }
  const float* data() const noexcept { return data_.data(); }

  bool all_finite() const noexcept;
  void fill(float v);

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

// a·b
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
// aᵀ·b
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);
// a·bᵀ
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);

DenseMatrix select_rows(const DenseMatrix& m, std::span<const std::uint32_t> indices);
DenseMatrix slice_cols(const DenseMatrix& m, std::size_t begin, std::size_t count);
DenseMatrix vstack(std::span<const DenseMatrix> parts);

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* what);

enum class Activation { kIdentity, kRelu, kSigmoid };

// activation(input·weight + bias); weight is in×out, bias is 1×out.
DenseMatrix linear_forward(const DenseMatrix& weight, const DenseMatrix& bias,
                           const DenseMatrix& input, Activation activation);

}  // namespace gzsl::numerics
