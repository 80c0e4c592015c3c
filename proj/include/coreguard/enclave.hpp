#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>

#include "coreguard/locking.hpp"
#include "coreguard/matrix.hpp"
#include "coreguard/random.hpp"

namespace coreguard {

// Count of crossings between the untrusted world and the enclave. Every
// matrix that crosses is one round; payload is 4 bytes per element.
struct BoundaryLedger {
  std::size_t rounds = 0;
  std::size_t bytes = 0;

  void record(std::size_t elements) {
    ++rounds;
    bytes += elements * sizeof(float);
  }
  BoundaryLedger since(const BoundaryLedger& earlier) const {
    return {rounds - earlier.rounds, bytes - earlier.bytes};
  }
  friend bool operator==(const BoundaryLedger&, const BoundaryLedger&) = default;
};

// A feature that left the enclave under a one-time pad. The only thing the
// untrusted side can do with it before handing it back is one affine map, so
// the pad p*W_n can still be removed exactly.
class MaskedFeature {
 public:
  explicit MaskedFeature(Matrix value) : value_(std::move(value)) {}
  const Matrix& value() const noexcept { return value_; }
  MaskedFeature affine(const Matrix& w, std::span<const float> bias) const;

 private:
  Matrix value_;
};

struct EnclaveOptions {
  // Pad entries are uniform in [-pad_amplitude, pad_amplitude]. Zero turns
  // the one-time pad off (ablation builds only).
  float pad_amplitude = 64.0f;
};

// Simulated trusted world. Holds the keys, the one-time-pad stream and the
// original authorization-layer parameters; exposes only the two boundary
// operations. Not thread-safe: one owner drives it serially.
class Enclave {
 public:
  Enclave(LockKeys keys, std::uint64_t pad_seed, Matrix wn_original, Vector gamma2,
          Vector beta2, std::size_t seq_len, EnclaveOptions opts = {});

  // Recovers W_n, gamma_2 and beta_2 of the authorization layer from the
  // locked model's public copies and the keys.
  static Enclave provision(const LockedModel& locked, const LockKeys& keys,
                           std::uint64_t pad_seed, EnclaveOptions opts = {});

  // Appends `count` fresh (p, p*W_n) pairs; offline work, no ledger entry.
  void precompute_pads(std::size_t count);

  // m' = (m + p) * pi_enc. Takes the next pad and marks it in flight.
  // Throws ProtocolError if the queue is empty or a pad is already in flight.
  MaskedFeature encrypt_step(const Matrix& m);

  // n = n' - p*W_n, z = add-norm(y + n), returns z * pi and retires the pad.
  // Throws ProtocolError if no pad is in flight.
  Matrix decrypt_authorize(const MaskedFeature& n_prime, const Matrix& y);

  std::size_t pads_available() const noexcept { return pads_.size(); }
  bool pad_in_flight() const noexcept { return in_flight_.has_value(); }
  const BoundaryLedger& ledger() const noexcept { return ledger_; }
  std::size_t d_model() const noexcept { return d_model_; }
  std::size_t d_ffn() const noexcept { return d_ffn_; }
  std::size_t seq_len() const noexcept { return seq_len_; }
  float pad_amplitude() const noexcept { return opts_.pad_amplitude; }

 private:
  struct Pad {
    Matrix p;    // seq_len x d_ffn
    Matrix pwn;  // seq_len x d_model, p * W_n
  };
  friend struct EnclaveTestAccess;

  LockKeys keys_;
  Rng pad_source_;
  Matrix wn_;
  Vector gamma2_;
  Vector beta2_;
  std::size_t d_model_;
  std::size_t d_ffn_;
  std::size_t seq_len_;
  EnclaveOptions opts_;
  std::deque<Pad> pads_;
  std::optional<Pad> in_flight_;
  BoundaryLedger ledger_;
};

}  // namespace coreguard
