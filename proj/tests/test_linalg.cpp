#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "coreguard/error.hpp"
#include "coreguard/linalg.hpp"
#include "coreguard/random.hpp"

using namespace coreguard;

namespace {

// Dense 0/1 matrix with P[j][forward[j]] = 1.
Matrix dense(const PermutationKey& k) {
  Matrix p(k.size(), k.size());
  for (std::size_t j = 0; j < k.size(); ++j) p(j, k.forward()[j]) = 1.0f;
  return p;
}

Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0;
      for (std::size_t t = 0; t < a.cols(); ++t) s += double(a(i, t)) * b(t, j);
      c(i, j) = static_cast<float>(s);
    }
  return c;
}

}  // namespace

TEST(Matrix, ConstructorRejectsWrongDataLength) {
  EXPECT_THROW(Matrix(2, 3, std::vector<float>(5)), SizeError);
  Matrix m(2, 3, std::vector<float>{1, 2, 3, 4, 5, 6});
  EXPECT_EQ(m(1, 2), 6.0f);
  EXPECT_EQ(m.row(1)[0], 4.0f);
}

TEST(Matrix, BitwiseEqualSeesSignedZero) {
  Matrix a(1, 1, 0.0f), b(1, 1, -0.0f);
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(bitwise_equal(a, b));
}

TEST(PermutationKey, RejectsNonBijection) {
  EXPECT_THROW(PermutationKey::from_forward({0, 0, 1}), InputError);
  EXPECT_THROW(PermutationKey::from_forward({0, 3}), InputError);
  const auto k = PermutationKey::from_forward({2, 0, 1});
  EXPECT_EQ(k.inverse()[2], 0u);
  EXPECT_TRUE(PermutationKey::identity(5).is_identity());
}

TEST(Permute, ColsMatchesDensePermutationMatrix) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.below(12);
    const auto k = random_permutation(rng, n);
    const Matrix x = random_matrix(rng, 3, n, 1.0f);
    EXPECT_TRUE(bitwise_equal(permute_cols(x, k), naive_matmul(x, dense(k))));
  }
}

TEST(Permute, RowsMatchesTransposedPermutationMatrix) {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.below(12);
    const auto k = random_permutation(rng, n);
    const Matrix w = random_matrix(rng, n, 5, 1.0f);
    EXPECT_TRUE(bitwise_equal(permute_rows(w, k), naive_matmul(transpose(dense(k)), w)));
  }
}

TEST(Permute, RowPermutedWeightsUndoColumnPermutedInputs) {
  Rng rng(13);
  const auto k = random_permutation(rng, 9);
  const Matrix x = random_matrix(rng, 4, 9, 1.0f);
  const Matrix w = random_matrix(rng, 9, 6, 1.0f);
  EXPECT_LE(max_relative_error(matmul(permute_cols(x, k), permute_rows(w, k)), matmul(x, w)),
            1e-6);
}

TEST(Permute, VectorFollowsColumnConvention) {
  const auto k = PermutationKey::from_forward({2, 0, 1});
  const Vector v{10, 20, 30};
  const Vector got = permute(v, k);
  EXPECT_EQ(got, (Vector{20, 30, 10}));
  EXPECT_TRUE(bitwise_equal(Matrix::row_vector(got), permute_cols(Matrix::row_vector(v), k)));
}

TEST(Permute, InvertAndCompose) {
  Rng rng(14);
  const auto a = random_permutation(rng, 10);
  const auto b = random_permutation(rng, 10);
  EXPECT_TRUE(compose(a, invert(a)).is_identity());
  const Matrix x = random_matrix(rng, 2, 10, 1.0f);
  EXPECT_TRUE(bitwise_equal(permute_cols(permute_cols(x, a), b), permute_cols(x, compose(a, b))));
  EXPECT_THROW(compose(a, PermutationKey::identity(3)), SizeError);
}

TEST(RandomPermutation, UniformOverS4) {
  Rng rng(2024);
  std::map<std::vector<std::uint32_t>, int> counts;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const auto k = random_permutation(rng, 4);
    counts[{k.forward().begin(), k.forward().end()}]++;
  }
  ASSERT_EQ(counts.size(), 24u);
  const double expected = draws / 24.0;
  double chi2 = 0;
  for (const auto& [perm, c] : counts) chi2 += (c - expected) * (c - expected) / expected;
  // 23 degrees of freedom, p = 0.001 critical value.
  EXPECT_LT(chi2, 49.73);
}

TEST(RandomPermutation, SeededAndValidated) {
  EXPECT_EQ(random_permutation(5, 50), random_permutation(5, 50));
  EXPECT_NE(random_permutation(5, 50), random_permutation(6, 50));
  EXPECT_THROW(random_permutation(1, 0), SizeError);
}

TEST(Keyspace, MatchesDirectLogFactorial) {
  EXPECT_EQ(keyspace_bits(1), 0.0);
  EXPECT_DOUBLE_EQ(keyspace_bits(4), std::log2(24.0));
  long double direct = 0;
  for (std::size_t n = 1; n <= 1000; ++n) {
    direct += std::log2(static_cast<long double>(n));
    EXPECT_NEAR(keyspace_bits(n), static_cast<double>(direct), 1e-9 * std::max(1.0L, direct));
  }
}

TEST(Dense, MatmulAgainstHandComputed) {
  const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
  const Matrix b = Matrix::from_rows({{5, 6, 7}, {8, 9, 10}});
  EXPECT_EQ(matmul(a, b), Matrix::from_rows({{21, 24, 27}, {47, 54, 61}}));
  EXPECT_THROW(matmul(a, Matrix(3, 1)), SizeError);
  const Vector bias{1, 1, 1};
  EXPECT_EQ(affine(a, b, bias), Matrix::from_rows({{22, 25, 28}, {48, 55, 62}}));
}

TEST(Dense, ReluTransposeAddSubtract) {
  const Matrix a = Matrix::from_rows({{-1, 2}, {0.5f, -3}});
  EXPECT_EQ(relu(a), Matrix::from_rows({{0, 2}, {0.5f, 0}}));
  EXPECT_EQ(transpose(a), Matrix::from_rows({{-1, 0.5f}, {2, -3}}));
  EXPECT_EQ(subtract(add(a, a), a), a);
  EXPECT_THROW(add(a, Matrix(1, 2)), SizeError);
}

TEST(Softmax, RowsSumToOneAndMaskFuture) {
  Rng rng(15);
  const Matrix s = random_matrix(rng, 6, 6, 3.0f);
  for (bool causal : {false, true}) {
    const Matrix p = softmax_rows(s, causal);
    for (std::size_t i = 0; i < 6; ++i) {
      double sum = 0;
      for (std::size_t j = 0; j < 6; ++j) {
        sum += p(i, j);
        if (causal && j > i) EXPECT_EQ(p(i, j), 0.0f);
      }
      EXPECT_NEAR(sum, 1.0, 1e-6);
    }
  }
}

TEST(LayerNorm, PopulationVarianceAndEpsilon) {
  const Matrix x = Matrix::from_rows({{1, 2, 3, 4}});
  const Vector g{1, 1, 1, 1}, b{0, 0, 0, 0};
  const Matrix y = layer_norm(x, g, b);
  const double sigma = std::sqrt(1.25 + 1e-5);
  EXPECT_NEAR(y(0, 0), -1.5 / sigma, 1e-6);
  EXPECT_NEAR(y(0, 3), 1.5 / sigma, 1e-6);
  const auto st = row_stats(x);
  EXPECT_NEAR(st.mean[0], 2.5, 1e-7);
}

TEST(LayerNorm, CommutesWithColumnPermutation) {
  Rng rng(16);
  const auto k = random_permutation(rng, 12);
  const Matrix x = random_matrix(rng, 5, 12, 2.0f);
  Vector g(12), b(12);
  for (auto& v : g) v = rng.normal(1, 0.1f);
  for (auto& v : b) v = rng.normal(0, 0.1f);
  EXPECT_LE(max_relative_error(layer_norm(permute_cols(x, k), permute(g, k), permute(b, k)),
                               permute_cols(layer_norm(x, g, b), k)),
            1e-6);
}

TEST(Errors, RelativeErrorConventions) {
  const Matrix ref = Matrix::from_rows({{1, -4}});
  EXPECT_DOUBLE_EQ(max_relative_error(Matrix::from_rows({{1.5f, -4}}), ref), 0.125);
  Matrix bad = ref;
  bad(0, 0) = std::numeric_limits<float>::quiet_NaN();
  EXPECT_TRUE(std::isinf(max_relative_error(bad, ref)));
  EXPECT_EQ(argmax_rows(Matrix::from_rows({{1, 3, 3}, {5, 0, 1}})),
            (std::vector<std::size_t>{1, 0}));
}

TEST(Rng, BelowIsInRangeAndSeeded) {
  Rng a(1), b(1);
  for (int i = 0; i < 1000; ++i) {
    const auto v = a.below(7);
    EXPECT_LT(v, 7u);
    EXPECT_EQ(v, b.below(7));
  }
}
