#pragma once

// Hot loops of the forward pass, in two builds: `serial` is the reference kept
// for testing, `parallel` spreads independent output rows over OpenMP threads.
// Both compute every output element with the same accumulation order, so their
// results are bitwise identical for any thread count.

#include <cstddef>
#include <span>

#include "coreguard/matrix.hpp"

namespace coreguard::kernels {

namespace serial {

// a (n x k) times b (k x m), accumulated in double per output element.
Matrix matmul(const Matrix& a, const Matrix& b);
// matmul followed by a per-column bias add (bias length m).
Matrix affine(const Matrix& a, const Matrix& b, std::span<const float> bias);
// Multi-head scaled dot-product attention on projected q, k, v (all l x d).
// Head t uses columns [t*d/h, (t+1)*d/h). Causal masking sets scores of
// future positions to -inf before the softmax.
Matrix attention(const Matrix& q, const Matrix& k, const Matrix& v,
                 std::size_t heads, bool causal);
// Row-wise (x - mean) / sqrt(var + eps) * gamma + beta.
Matrix layer_norm(const Matrix& x, std::span<const float> gamma,
                  std::span<const float> beta, float eps);

}  // namespace serial

namespace parallel {

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix affine(const Matrix& a, const Matrix& b, std::span<const float> bias);
Matrix attention(const Matrix& q, const Matrix& k, const Matrix& v,
                 std::size_t heads, bool causal);
Matrix layer_norm(const Matrix& x, std::span<const float> gamma,
                  std::span<const float> beta, float eps);

}  // namespace parallel

// Caps the OpenMP team size used by `parallel` kernels; 0 restores the default.
void set_max_threads(int n);
int max_threads();

}  // namespace coreguard::kernels
