#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace coreguard {

using Vector = std::vector<float>;

// Dense row-major single-precision matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, float fill = 0.0f);
  Matrix(std::size_t rows, std::size_t cols, std::vector<float> data);

  static Matrix from_rows(std::initializer_list<std::initializer_list<float>> rows);
  // A 1 x n matrix holding `v`.
  static Matrix row_vector(std::span<const float> v);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  float& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  float operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<float> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const float> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  bool all_finite() const noexcept;

  // Value comparison (IEEE ==, so -0 == +0). Use bitwise_equal() for
  // byte-exact checks.
  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

bool bitwise_equal(const Matrix& a, const Matrix& b) noexcept;
bool bitwise_equal(std::span<const float> a, std::span<const float> b) noexcept;

// A bijection on {0..n-1}. `forward()[j]` is the column that source column j
// is sent to, i.e. the dense matrix has pi[j][forward[j]] = 1.
class PermutationKey {
 public:
  PermutationKey() = default;

  // Throws InputError unless `forward` is a bijection on {0..n-1}.
  static PermutationKey from_forward(std::vector<std::uint32_t> forward);
  static PermutationKey identity(std::size_t n);

  std::size_t size() const noexcept { return forward_.size(); }
  std::span<const std::uint32_t> forward() const noexcept { return forward_; }
  std::span<const std::uint32_t> inverse() const noexcept { return inverse_; }
  bool is_identity() const noexcept;

  friend bool operator==(const PermutationKey& a, const PermutationKey& b) {
    return a.forward_ == b.forward_;
  }

 private:
  std::vector<std::uint32_t> forward_;
  std::vector<std::uint32_t> inverse_;
};

// True iff `forward` is a bijection on {0..forward.size()-1}.
bool is_bijection(std::span<const std::uint32_t> forward) noexcept;

}  // namespace coreguard
