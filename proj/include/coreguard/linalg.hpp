#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "coreguard/matrix.hpp"
#include "coreguard/random.hpp"

namespace coreguard {

// --- permutations -------------------------------------------------------

// X * pi: output[i][k.forward[j]] = X[i][j]. Requires X.cols() == k.size().
Matrix permute_cols(const Matrix& x, const PermutationKey& k);
// pi^T * W: output row k.forward[j] = W row j. Requires W.rows() == k.size().
Matrix permute_rows(const Matrix& w, const PermutationKey& k);
// v * pi for a row vector v.
Vector permute(std::span<const float> v, const PermutationKey& k);

PermutationKey invert(const PermutationKey& k);
// k2 after k1, i.e. the key whose dense matrix is pi1 * pi2.
PermutationKey compose(const PermutationKey& k1, const PermutationKey& k2);

// Fisher-Yates shuffle driven by Rng(seed). Throws SizeError for n == 0.
PermutationKey random_permutation(std::uint64_t seed, std::size_t n);
PermutationKey random_permutation(Rng& rng, std::size_t n);

// log2(n!) by exact summation of log2(i), i = 2..n.
double keyspace_bits(std::size_t n);

// --- dense ops ------------------------------------------------------------

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix affine(const Matrix& a, const Matrix& b, std::span<const float> bias);
void add_bias(Matrix& x, std::span<const float> bias);
Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
Matrix relu(Matrix x);
Matrix transpose(const Matrix& x);

// Row-wise softmax of `scores`; with `causal`, entries above the diagonal are
// treated as -inf (decoder mask) and come out as exactly 0.
Matrix softmax_rows(const Matrix& scores, bool causal);

inline constexpr float kNormEpsilon = 1e-5f;

struct RowStats {
  std::vector<double> mean;
  // sqrt(population variance + kNormEpsilon)
  std::vector<double> stddev;
};
RowStats row_stats(const Matrix& x);

Matrix layer_norm(const Matrix& x, std::span<const float> gamma,
                  std::span<const float> beta);

// --- comparisons --------------------------------------------------------

// max |got - ref| / max |ref|; the reference scale is floored at 1e-30.
double max_relative_error(const Matrix& got, const Matrix& ref);
double max_relative_error(std::span<const float> got, std::span<const float> ref);
// ||got - ref||_F / ||ref||_F.
double frobenius_relative_error(const Matrix& got, const Matrix& ref);

std::vector<std::size_t> argmax_rows(const Matrix& x);

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, float stddev);

}  // namespace coreguard
