#include "gzsl/dense_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Core>

#include "gzsl/error.hpp"

namespace gzsl::numerics {

namespace {

using RowMajor = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

ConstMap view(const DenseMatrix& m) {
  return ConstMap(m.data(), static_cast<Eigen::Index>(m.rows()),
                  static_cast<Eigen::Index>(m.cols()));
}

MutMap view(DenseMatrix& m) {
  return MutMap(m.data(), static_cast<Eigen::Index>(m.rows()),
                static_cast<Eigen::Index>(m.cols()));
}

std::string dims(const DenseMatrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, float fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    fail(ErrorCode::kShape, "matrix data length " + std::to_string(data_.size()) +
                                " does not match " + std::to_string(rows) + "x" +
                                std::to_string(cols));
  }
}

DenseMatrix DenseMatrix::from_rows(std::initializer_list<std::initializer_list<float>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<float> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) fail(ErrorCode::kShape, "ragged row in matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return DenseMatrix(r, c, std::move(data));
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0f;
  return m;
}

bool DenseMatrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

void DenseMatrix::fill(float v) { std::fill(data_.begin(), data_.end(), v); }

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) {
    fail(ErrorCode::kShape, "matmul: " + dims(a) + " times " + dims(b));
  }
  DenseMatrix out(a.rows(), b.cols());
  if (out.empty()) return out;
  view(out).noalias() = view(a) * view(b);
  return out;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) {
    fail(ErrorCode::kShape, "matmul_tn: " + dims(a) + "^T times " + dims(b));
  }
  DenseMatrix out(a.cols(), b.cols());
  if (out.empty()) return out;
  view(out).noalias() = view(a).transpose() * view(b);
  return out;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols()) {
    fail(ErrorCode::kShape, "matmul_nt: " + dims(a) + " times " + dims(b) + "^T");
  }
  DenseMatrix out(a.rows(), b.rows());
  if (out.empty()) return out;
  view(out).noalias() = view(a) * view(b).transpose();
  return out;
}

DenseMatrix select_rows(const DenseMatrix& m, std::span<const std::uint32_t> indices) {
  DenseMatrix out(indices.size(), m.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= m.rows()) {
      fail(ErrorCode::kShape, "row index " + std::to_string(indices[i]) + " out of range for " +
                                  dims(m));
    }
    std::copy_n(m.row(indices[i]).begin(), m.cols(), out.row(i).begin());
  }
  return out;
}

DenseMatrix slice_cols(const DenseMatrix& m, std::size_t begin, std::size_t count) {
  if (begin + count > m.cols()) {
    fail(ErrorCode::kShape, "column slice past the end of " + dims(m));
  }
  DenseMatrix out(m.rows(), count);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    std::copy_n(m.row(r).begin() + static_cast<std::ptrdiff_t>(begin), count, out.row(r).begin());
  }
  return out;
}

DenseMatrix vstack(std::span<const DenseMatrix> parts) {
  if (parts.empty()) return {};
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) fail(ErrorCode::kShape, "vstack: column count mismatch");
    rows += p.rows();
  }
  std::vector<float> data;
  data.reserve(rows * cols);
  for (const auto& p : parts) data.insert(data.end(), p.values().begin(), p.values().end());
  return DenseMatrix(rows, cols, std::move(data));
}

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    fail(ErrorCode::kShape, std::string(what) + ": shape " + dims(a) + " vs " + dims(b));
  }
}

DenseMatrix linear_forward(const DenseMatrix& weight, const DenseMatrix& bias,
                           const DenseMatrix& input, Activation activation) {
  if (input.cols() != weight.rows()) {
    fail(ErrorCode::kShape, "linear: input " + dims(input) + " does not fit weight " + dims(weight));
  }
  if (bias.rows() != 1 || bias.cols() != weight.cols()) {
    fail(ErrorCode::kShape, "linear: bias " + dims(bias) + " does not fit weight " + dims(weight));
  }
  DenseMatrix out = matmul(input, weight);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < out.cols(); ++c) {
      float v = row[c] + bias(0, c);
      switch (activation) {
        case Activation::kIdentity: break;
        case Activation::kRelu: v = v > 0.0f ? v : 0.0f; break;
        case Activation::kSigmoid: v = 1.0f / (1.0f + std::exp(-v)); break;
      }
      row[c] = v;
    }
  }
  return out;
}

}  // namespace gzsl::numerics
