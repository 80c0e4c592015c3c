#include "coreguard/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "coreguard/error.hpp"
#include "coreguard/kernels.hpp"

namespace coreguard {

Matrix permute_cols(const Matrix& x, const PermutationKey& k) {
  if (x.cols() != k.size()) {
    throw SizeError("permute_cols: matrix has " + std::to_string(x.cols()) +
                    " columns, key has size " + std::to_string(k.size()));
  }
  Matrix out(x.rows(), x.cols());
  const auto fwd = k.forward();
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto src = x.row(i);
    auto dst = out.row(i);
    for (std::size_t j = 0; j < src.size(); ++j) dst[fwd[j]] = src[j];
  }
  return out;
}

Matrix permute_rows(const Matrix& w, const PermutationKey& k) {
  if (w.rows() != k.size()) {
    throw SizeError("permute_rows: matrix has " + std::to_string(w.rows()) +
                    " rows, key has size " + std::to_string(k.size()));
  }
  Matrix out(w.rows(), w.cols());
  const auto fwd = k.forward();
  for (std::size_t j = 0; j < w.rows(); ++j) {
    std::copy_n(w.row(j).begin(), w.cols(), out.row(fwd[j]).begin());
  }
  return out;
}

Vector permute(std::span<const float> v, const PermutationKey& k) {
  if (v.size() != k.size()) throw SizeError("permute: vector length mismatch");
  Vector out(v.size());
  const auto fwd = k.forward();
  for (std::size_t j = 0; j < v.size(); ++j) out[fwd[j]] = v[j];
  return out;
}

PermutationKey invert(const PermutationKey& k) {
  const auto inv = k.inverse();
  return PermutationKey::from_forward({inv.begin(), inv.end()});
}

PermutationKey compose(const PermutationKey& k1, const PermutationKey& k2) {
  if (k1.size() != k2.size()) throw SizeError("compose: key sizes differ");
  std::vector<std::uint32_t> f(k1.size());
  for (std::size_t j = 0; j < f.size(); ++j) f[j] = k2.forward()[k1.forward()[j]];
  return PermutationKey::from_forward(std::move(f));
}

PermutationKey random_permutation(Rng& rng, std::size_t n) {
  if (n == 0) throw SizeError("random_permutation: n must be >= 1");
  std::vector<std::uint32_t> f(n);
  std::iota(f.begin(), f.end(), 0u);
  for (std::size_t i = n - 1; i > 0; --i) {
    std::swap(f[i], f[rng.below(i + 1)]);
  }
  return PermutationKey::from_forward(std::move(f));
}

PermutationKey random_permutation(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  return random_permutation(rng, n);
}

double keyspace_bits(std::size_t n) {
  if (n == 0) throw SizeError("keyspace_bits: n must be >= 1");
  double bits = 0.0;
  for (std::size_t i = 2; i <= n; ++i) bits += std::log2(static_cast<double>(i));
  return bits;
}

Matrix matmul(const Matrix& a, const Matrix& b) { return kernels::parallel::matmul(a, b); }

Matrix affine(const Matrix& a, const Matrix& b, std::span<const float> bias) {
  return kernels::parallel::affine(a, b, bias);
}

void add_bias(Matrix& x, std::span<const float> bias) {
  if (bias.size() != x.cols()) throw SizeError("add_bias: length mismatch");
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto r = x.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += bias[j];
  }
}

namespace {
void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw SizeError(std::string(op) + ": shapes differ");
  }
}
}  // namespace

Matrix add(const Matrix& a, const Matrix& b) {
  check_same_shape(a, b, "add");
  Matrix out = a;
  auto o = out.data();
  const auto s = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += s[i];
  return out;
}

Matrix subtract(const Matrix& a, const Matrix& b) {
  check_same_shape(a, b, "subtract");
  Matrix out = a;
  auto o = out.data();
  const auto s = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= s[i];
  return out;
}

Matrix relu(Matrix x) {
  for (float& v : x.data()) v = v > 0.0f ? v : 0.0f;
  return x;
}

Matrix transpose(const Matrix& x) {
  Matrix out(x.cols(), x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) out(j, i) = x(i, j);
  }
  return out;
}

Matrix softmax_rows(const Matrix& scores, bool causal) {
  if (causal && scores.rows() != scores.cols()) {
    throw SizeError("softmax_rows: causal mask needs a square score matrix");
  }
  Matrix out(scores.rows(), scores.cols());
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    const std::size_t visible = causal ? i + 1 : scores.cols();
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < visible; ++j) top = std::max<double>(top, scores(i, j));
    double total = 0.0;
    std::vector<double> e(visible);
    for (std::size_t j = 0; j < visible; ++j) {
      e[j] = std::exp(static_cast<double>(scores(i, j)) - top);
      total += e[j];
    }
    for (std::size_t j = 0; j < visible; ++j) out(i, j) = static_cast<float>(e[j] / total);
  }
  return out;
}

RowStats row_stats(const Matrix& x) {
  RowStats s;
  s.mean.resize(x.rows());
  s.stddev.resize(x.rows());
  const double n = static_cast<double>(x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double mean = 0.0;
    for (float v : x.row(i)) mean += v;
    mean /= n;
    double var = 0.0;
    for (float v : x.row(i)) var += (v - mean) * (v - mean);
    s.mean[i] = mean;
    s.stddev[i] = std::sqrt(var / n + kNormEpsilon);
  }
  return s;
}

Matrix layer_norm(const Matrix& x, std::span<const float> gamma,
                  std::span<const float> beta) {
  return kernels::parallel::layer_norm(x, gamma, beta, kNormEpsilon);
}

double max_relative_error(std::span<const float> got, std::span<const float> ref) {
  if (got.size() != ref.size()) throw SizeError("max_relative_error: length mismatch");
  double diff = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    const double d = std::abs(static_cast<double>(got[i]) - ref[i]);
    if (!std::isfinite(d)) return std::numeric_limits<double>::infinity();
    diff = std::max(diff, d);
    scale = std::max(scale, std::abs(static_cast<double>(ref[i])));
  }
  return diff / std::max(scale, 1e-30);
}

double max_relative_error(const Matrix& got, const Matrix& ref) {
  check_same_shape(got, ref, "max_relative_error");
  return max_relative_error(got.data(), ref.data());
}

double frobenius_relative_error(const Matrix& got, const Matrix& ref) {
  check_same_shape(got, ref, "frobenius_relative_error");
  double num = 0.0;
  double den = 0.0;
  const auto g = got.data();
  const auto r = ref.data();
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double d = static_cast<double>(g[i]) - r[i];
    num += d * d;
    den += static_cast<double>(r[i]) * r[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-30);
}

std::vector<std::size_t> argmax_rows(const Matrix& x) {
  std::vector<std::size_t> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto r = x.row(i);
    out[i] = static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return out;
}

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, float stddev) {
  Matrix m(rows, cols);
  for (float& v : m.data()) v = rng.normal(0.0f, stddev);
  return m;
}

}  // namespace coreguard
