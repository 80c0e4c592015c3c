#include "coreguard/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <string>

#include "coreguard/error.hpp"

namespace coreguard {

Matrix::Matrix(std::size_t rows, std::size_t cols, float fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw SizeError("matrix data length " + std::to_string(data_.size()) +
                    " does not match " + std::to_string(rows) + "x" +
                    std::to_string(cols));
  }
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<float>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<float> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw SizeError("ragged row list");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Matrix(r, c, std::move(data));
}

Matrix Matrix::row_vector(std::span<const float> v) {
  return Matrix(1, v.size(), std::vector<float>(v.begin(), v.end()));
}

bool Matrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(),
                     [](float v) { return std::isfinite(v); });
}

bool bitwise_equal(std::span<const float> a, std::span<const float> b) noexcept {
  return a.size() == b.size() &&
         (a.empty() || std::memcmp(a.data(), b.data(), a.size_bytes()) == 0);
}

bool bitwise_equal(const Matrix& a, const Matrix& b) noexcept {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         bitwise_equal(a.data(), b.data());
}

bool is_bijection(std::span<const std::uint32_t> forward) noexcept {
  std::vector<bool> seen(forward.size(), false);
  for (std::uint32_t v : forward) {
    if (v >= forward.size() || seen[v]) return false;
    seen[v] = true;
  }
  return true;
}

PermutationKey PermutationKey::from_forward(std::vector<std::uint32_t> forward) {
  if (!is_bijection(forward)) {
    throw InputError("index array of length " + std::to_string(forward.size()) +
                     " is not a bijection");
  }
  PermutationKey k;
  k.inverse_.resize(forward.size());
  for (std::size_t i = 0; i < forward.size(); ++i) {
    k.inverse_[forward[i]] = static_cast<std::uint32_t>(i);
  }
  k.forward_ = std::move(forward);
  return k;
}

PermutationKey PermutationKey::identity(std::size_t n) {
  std::vector<std::uint32_t> f(n);
  std::iota(f.begin(), f.end(), 0u);
  return from_forward(std::move(f));
}

bool PermutationKey::is_identity() const noexcept {
  for (std::size_t i = 0; i < forward_.size(); ++i) {
    if (forward_[i] != i) return false;
  }
  return true;
}

}  // namespace coreguard
