#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <type_traits>

#include "coreguard/enclave.hpp"
#include "coreguard/error.hpp"
#include "coreguard/linalg.hpp"
#include "helpers.hpp"

namespace coreguard {

// White-box view used only to check pad statistics and unmasking.
struct EnclaveTestAccess {
  static const Matrix& next_pad(const Enclave& e) { return e.pads_.front().p; }
  static const Matrix& original_wn(const Enclave& e) { return e.wn_; }
  static Matrix unmask(const Enclave& e, const MaskedFeature& n) {
    return subtract(n.value(), e.in_flight_->pwn);
  }
};

}  // namespace coreguard

using namespace coreguard;
using coreguard::testing::tiny_config;

namespace {

struct Fixture {
  ModelConfig cfg = tiny_config(4, 16, 2, 64, 8, 32);
  Model model = random_model(cfg, 3);
  LockKeys keys = LockKeys::random(4, 16, 64);
  LockedModel locked = lock_model(model, keys, 2);
  Enclave enclave = Enclave::provision(locked, keys, 5);
};

template <class T>
concept LeaksKeys = requires(const T& t) { t.keys(); } || requires(const T& t) { t.pads(); } ||
                    requires(const T& t) { t.pad_source(); } || requires(const T& t) { t.wn(); };

}  // namespace

TEST(Enclave, ExposesNoSecretAccessors) {
  static_assert(!LeaksKeys<Enclave>);
  SUCCEED();
}

TEST(Enclave, ProvisionRecoversOriginalParameters) {
  Fixture f;
  EXPECT_TRUE(bitwise_equal(EnclaveTestAccess::original_wn(f.enclave), f.model.layers()[1].wn));
}

TEST(Enclave, PadsAreUniformWithExpectedVariance) {
  Fixture f;
  f.enclave.precompute_pads(4);
  const Matrix& p = EnclaveTestAccess::next_pad(f.enclave);
  ASSERT_EQ(p.rows(), 8u);
  ASSERT_EQ(p.cols(), 64u);
  double sum = 0, sq = 0;
  const float a = f.enclave.pad_amplitude();
  for (float v : p.data()) {
    EXPECT_LE(std::abs(v), a);
    sum += v;
    sq += double(v) * v;
  }
  const double n = double(p.size());
  const double var = sq / n - (sum / n) * (sum / n);
  // 512 samples: the sample variance is within ~15% of a^2/3 with overwhelming odds.
  EXPECT_NEAR(var, a * a / 3.0, 0.15 * a * a / 3.0);
}

TEST(Enclave, SameFeatureEncryptsDifferently) {
  Fixture f;
  Rng rng(1);
  const Matrix m = relu(random_matrix(rng, 8, 64, 1.0f));
  f.enclave.precompute_pads(2);
  const Matrix c1 = f.enclave.encrypt_step(m).value();
  f.enclave.decrypt_authorize(MaskedFeature(Matrix(8, 16)), Matrix(8, 16));
  const Matrix c2 = f.enclave.encrypt_step(m).value();
  EXPECT_FALSE(bitwise_equal(c1, c2));
}

TEST(Enclave, UnmaskingRestoresN) {
  Fixture f;
  const LayerWeights& auth = f.locked.auth_layer();
  const LayerWeights& orig = f.model.layers()[1];
  Rng rng(2);
  f.enclave.precompute_pads(20);
  double worst = 0;
  for (int i = 0; i < 20; ++i) {
    const Matrix m = relu(random_matrix(rng, 8, 64, 1.0f));
    const MaskedFeature n_prime = f.enclave.encrypt_step(m).affine(auth.wn, auth.bn);
    const Matrix n = EnclaveTestAccess::unmask(f.enclave, n_prime);
    worst = std::max(worst, max_relative_error(n, affine(m, orig.wn, orig.bn)));
    f.enclave.decrypt_authorize(n_prime, Matrix(8, 16));
  }
  EXPECT_LE(worst, 1e-5);
}

TEST(Enclave, AuthorizedFeatureIsPermutedAddNorm) {
  Fixture f;
  const LayerWeights& auth = f.locked.auth_layer();
  const LayerWeights& orig = f.model.layers()[1];
  Rng rng(3);
  const Matrix m = relu(random_matrix(rng, 8, 64, 1.0f));
  const Matrix y = random_matrix(rng, 8, 16, 1.0f);
  f.enclave.precompute_pads(1);
  const Matrix z_pi =
      f.enclave.decrypt_authorize(f.enclave.encrypt_step(m).affine(auth.wn, auth.bn), y);
  const Matrix want =
      permute_cols(add_norm(y, affine(m, orig.wn, orig.bn), orig.gamma2, orig.beta2), f.keys.pi);
  EXPECT_LE(max_relative_error(z_pi, want), 1e-4);
}

TEST(Enclave, ProtocolOrderEnforced) {
  Fixture f;
  const Matrix m(8, 64, 1.0f);
  EXPECT_THROW(f.enclave.encrypt_step(m), ProtocolError);
  EXPECT_THROW(f.enclave.decrypt_authorize(MaskedFeature(Matrix(8, 16)), Matrix(8, 16)),
               ProtocolError);
  f.enclave.precompute_pads(2);
  const MaskedFeature c = f.enclave.encrypt_step(m);
  EXPECT_TRUE(f.enclave.pad_in_flight());
  EXPECT_THROW(f.enclave.encrypt_step(m), ProtocolError);
  f.enclave.decrypt_authorize(MaskedFeature(Matrix(8, 16)), Matrix(8, 16));
  // The retired pad cannot be used again.
  EXPECT_THROW(f.enclave.decrypt_authorize(MaskedFeature(Matrix(8, 16)), Matrix(8, 16)),
               ProtocolError);
  EXPECT_EQ(f.enclave.pads_available(), 1u);
  (void)c;
}

TEST(Enclave, ShapeChecks) {
  Fixture f;
  f.enclave.precompute_pads(1);
  EXPECT_THROW(f.enclave.encrypt_step(Matrix(8, 63)), SizeError);
  EXPECT_THROW(Enclave::provision(f.locked, LockKeys::random(1, 16, 32), 1), SizeError);
}

TEST(Enclave, LedgerCountsFiveCrossings) {
  Fixture f;
  f.enclave.precompute_pads(1);
  EXPECT_EQ(f.enclave.ledger().rounds, 0u);
  const auto c = f.enclave.encrypt_step(Matrix(8, 64));
  EXPECT_EQ(f.enclave.ledger().rounds, 2u);
  f.enclave.decrypt_authorize(c.affine(f.locked.auth_layer().wn, f.locked.auth_layer().bn),
                              Matrix(8, 16));
  EXPECT_EQ(f.enclave.ledger().rounds, 5u);
  EXPECT_EQ(f.enclave.ledger().bytes, 4u * 8 * (2 * 64 + 3 * 16));
}

TEST(Enclave, ZeroAmplitudeDisablesPad) {
  Fixture f;
  Enclave plain = Enclave::provision(f.locked, f.keys, 5, {0.0f});
  plain.precompute_pads(1);
  Rng rng(4);
  const Matrix m = random_matrix(rng, 8, 64, 1.0f);
  EXPECT_TRUE(bitwise_equal(plain.encrypt_step(m).value(), permute_cols(m, f.keys.pi_enc)));
}

TEST(Enclave, SeededPadStream) {
  Fixture a, b;
  a.enclave.precompute_pads(1);
  b.enclave.precompute_pads(1);
  EXPECT_TRUE(bitwise_equal(EnclaveTestAccess::next_pad(a.enclave),
                            EnclaveTestAccess::next_pad(b.enclave)));
}
