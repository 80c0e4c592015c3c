#include "coreguard/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "coreguard/error.hpp"

namespace coreguard::kernels {
namespace {

void check_matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw SizeError("matmul inner dimensions differ: " + std::to_string(a.cols()) +
                    " vs " + std::to_string(b.rows()));
  }
}

void check_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                     std::size_t heads) {
  if (q.rows() != k.rows() || q.rows() != v.rows() || q.cols() != k.cols() ||
      q.cols() != v.cols()) {
    throw SizeError("attention operands must share shape");
  }
  if (heads == 0 || q.cols() % heads != 0) {
    throw SizeError("model width " + std::to_string(q.cols()) +
                    " not divisible into " + std::to_string(heads) + " heads");
  }
}

void check_norm(const Matrix& x, std::span<const float> gamma,
                std::span<const float> beta) {
  if (gamma.size() != x.cols() || beta.size() != x.cols()) {
    throw SizeError("layer norm parameters do not match row width");
  }
}

// One output row of a*b (+ bias). Shared by both builds so the accumulation
// order is identical.
void matmul_row(const Matrix& a, const Matrix& b, std::span<const float> bias,
                std::size_t i, std::vector<double>& acc, Matrix& out) {
  std::fill(acc.begin(), acc.end(), 0.0);
  const std::size_t m = b.cols();
  for (std::size_t p = 0; p < a.cols(); ++p) {
    const double aip = a(i, p);
    if (aip == 0.0) continue;
    const auto brow = b.row(p);
    for (std::size_t j = 0; j < m; ++j) acc[j] += aip * brow[j];
  }
  auto orow = out.row(i);
  if (bias.empty()) {
    for (std::size_t j = 0; j < m; ++j) orow[j] = static_cast<float>(acc[j]);
  } else {
    for (std::size_t j = 0; j < m; ++j) {
      orow[j] = static_cast<float>(static_cast<float>(acc[j]) + bias[j]);
    }
  }
}

// Attention output for query row i of head t.
void attention_row(const Matrix& q, const Matrix& k, const Matrix& v,
                   std::size_t head_dim, std::size_t t, std::size_t i,
                   bool causal, std::vector<double>& scores, Matrix& out) {
  const std::size_t l = q.rows();
  const std::size_t c0 = t * head_dim;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  const std::size_t visible = causal ? i + 1 : l;
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < visible; ++j) {
    double dot = 0.0;
    for (std::size_t c = 0; c < head_dim; ++c) {
      dot += static_cast<double>(q(i, c0 + c)) * k(j, c0 + c);
    }
    scores[j] = dot * scale;
    top = std::max(top, scores[j]);
  }
  double total = 0.0;
  for (std::size_t j = 0; j < visible; ++j) {
    scores[j] = std::exp(scores[j] - top);
    total += scores[j];
  }
  for (std::size_t c = 0; c < head_dim; ++c) {
    double acc = 0.0;
    for (std::size_t j = 0; j < visible; ++j) acc += scores[j] * v(j, c0 + c);
    out(i, c0 + c) = static_cast<float>(acc / total);
  }
}

void norm_row(const Matrix& x, std::span<const float> gamma,
              std::span<const float> beta, float eps, std::size_t i, Matrix& out) {
  const auto row = x.row(i);
  const double n = static_cast<double>(row.size());
  double mean = 0.0;
  for (float v : row) mean += v;
  mean /= n;
  double var = 0.0;
  for (float v : row) var += (v - mean) * (v - mean);
  var /= n;
  const double sd = std::sqrt(var + eps);
  auto orow = out.row(i);
  for (std::size_t j = 0; j < row.size(); ++j) {
    orow[j] = static_cast<float>(gamma[j] * ((row[j] - mean) / sd) + beta[j]);
  }
}

}  // namespace

namespace serial {

Matrix matmul(const Matrix& a, const Matrix& b) { return affine(a, b, {}); }

Matrix affine(const Matrix& a, const Matrix& b, std::span<const float> bias) {
  check_matmul(a, b);
  if (!bias.empty() && bias.size() != b.cols()) throw SizeError("bias length");
  Matrix out(a.rows(), b.cols());
  std::vector<double> acc(b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) matmul_row(a, b, bias, i, acc, out);
  return out;
}

Matrix attention(const Matrix& q, const Matrix& k, const Matrix& v,
                 std::size_t heads, bool causal) {
  check_attention(q, k, v, heads);
  const std::size_t hd = q.cols() / heads;
  Matrix out(q.rows(), q.cols());
  std::vector<double> scores(q.rows());
  for (std::size_t t = 0; t < heads; ++t) {
    for (std::size_t i = 0; i < q.rows(); ++i) {
      attention_row(q, k, v, hd, t, i, causal, scores, out);
    }
  }
  return out;
}

Matrix layer_norm(const Matrix& x, std::span<const float> gamma,
                  std::span<const float> beta, float eps) {
  check_norm(x, gamma, beta);
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) norm_row(x, gamma, beta, eps, i, out);
  return out;
}

}  // namespace serial

namespace parallel {

Matrix matmul(const Matrix& a, const Matrix& b) { return affine(a, b, {}); }

Matrix affine(const Matrix& a, const Matrix& b, std::span<const float> bias) {
  check_matmul(a, b);
  if (!bias.empty() && bias.size() != b.cols()) throw SizeError("bias length");
  Matrix out(a.rows(), b.cols());
  const auto n = static_cast<std::ptrdiff_t>(a.rows());
  const bool worth_it = a.rows() * a.cols() * b.cols() >= (1u << 15);
#pragma omp parallel if (worth_it)
  {
    std::vector<double> acc(b.cols());
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      matmul_row(a, b, bias, static_cast<std::size_t>(i), acc, out);
    }
  }
  return out;
}

Matrix attention(const Matrix& q, const Matrix& k, const Matrix& v,
                 std::size_t heads, bool causal) {
  check_attention(q, k, v, heads);
  const std::size_t hd = q.cols() / heads;
  const std::size_t l = q.rows();
  Matrix out(l, q.cols());
  const auto work = static_cast<std::ptrdiff_t>(heads * l);
  const bool worth_it = l * l * q.cols() >= (1u << 15);
#pragma omp parallel if (worth_it)
  {
    std::vector<double> scores(l);
#pragma omp for schedule(static)
    for (std::ptrdiff_t w = 0; w < work; ++w) {
      const auto t = static_cast<std::size_t>(w) / l;
      const auto i = static_cast<std::size_t>(w) % l;
      attention_row(q, k, v, hd, t, i, causal, scores, out);
    }
  }
  return out;
}

Matrix layer_norm(const Matrix& x, std::span<const float> gamma,
                  std::span<const float> beta, float eps) {
  check_norm(x, gamma, beta);
  Matrix out(x.rows(), x.cols());
  const auto n = static_cast<std::ptrdiff_t>(x.rows());
  const bool worth_it = x.size() >= (1u << 15);
#pragma omp parallel for schedule(static) if (worth_it)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    norm_row(x, gamma, beta, eps, static_cast<std::size_t>(i), out);
  }
  return out;
}

}  // namespace parallel

namespace {
int g_default_threads = 0;
}

void set_max_threads(int n) {
  if (g_default_threads == 0) g_default_threads = omp_get_max_threads();
  omp_set_num_threads(n > 0 ? n : g_default_threads);
}

int max_threads() { return omp_get_max_threads(); }

}  // namespace coreguard::kernels
