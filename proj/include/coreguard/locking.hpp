#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "coreguard/matrix.hpp"
#include "coreguard/transformer.hpp"

namespace coreguard {

// Secret material of a locked model. `pi` (size d_model) permutes the
// residual stream of every rear layer; `pi_enc` (size d_ffn) hides the masked
// FFN feature of the authorization layer.
struct LockKeys {
  PermutationKey pi;
  PermutationKey pi_enc;

  static LockKeys identity(std::size_t d_model, std::size_t d_ffn);
  static LockKeys random(std::uint64_t seed, std::size_t d_model, std::size_t d_ffn);

  friend bool operator==(const LockKeys&, const LockKeys&) = default;
};

// Deployable form of a model. Everything here is public: layers before the
// authorization layer are untouched, the authorization layer keeps its
// attention block and FFN input linear but has W_n row-permuted by pi_enc and
// its second add-norm parameters column-permuted by pi, and every later layer
// plus the output head is permuted by pi.
class LockedModel {
 public:
  LockedModel(ModelConfig config, Matrix embedding, std::vector<LayerWeights> front,
              LayerWeights auth, std::vector<LayerWeights> rear, Matrix head);

  // config().auth_position is always set explicitly.
  const ModelConfig& config() const noexcept { return config_; }
  std::size_t auth_position() const noexcept { return config_.auth_position; }
  const Matrix& embedding() const noexcept { return embedding_; }
  const std::vector<LayerWeights>& front_layers() const noexcept { return front_; }
  const LayerWeights& auth_layer() const noexcept { return auth_; }
  const std::vector<LayerWeights>& rear_layers() const noexcept { return rear_; }
  const Matrix& output_head() const noexcept { return head_; }

 private:
  ModelConfig config_;
  Matrix embedding_;
  std::vector<LayerWeights> front_;
  LayerWeights auth_;
  std::vector<LayerWeights> rear_;
  Matrix head_;
};

bool bitwise_equal(const LockedModel& a, const LockedModel& b) noexcept;

// Row-permutes the input-processing weights (W_q, W_k, W_v, W_m) by pi^T and
// column-permutes the output-processing weights (W_o, W_n, b_n and both
// add-norm gamma/beta) by pi. b_m is left alone.
LayerWeights lock_layer(const LayerWeights& w, const PermutationKey& pi);

// Locks `m` at authorization position `auth_position` in [1, L-1].
LockedModel lock_model(const Model& m, const LockKeys& keys, std::size_t auth_position);

// Parameters that live in permuted form: (L - L0) rear layers plus the head.
std::size_t locked_parameter_count(const ModelConfig& cfg, std::size_t auth_position);
std::size_t total_parameter_count(const ModelConfig& cfg);
double locked_fraction(const ModelConfig& cfg, std::size_t auth_position);

inline constexpr double kLockTolerance = 1e-4;

struct LockCheck {
  std::string scope;  // "front[0]", "auth", "rear[2]", "head"
  std::string line;   // "Q'=Q", "o'=o*pi", ...
  double max_relative_error = 0.0;
  bool passed = false;
};

struct LockVerification {
  std::vector<LockCheck> checks;

  bool passed() const;
  const LockCheck* first_failure() const;
  // Throws VerificationError naming the first failing line.
  void require() const;
};

// Re-derives every rear layer's permuted-layer identities on random probe
// inputs (original layer on x against locked layer on x*pi) and checks the
// front layers, the authorization layer and the head against the keys.
LockVerification verify_lock(const Model& original, const LockedModel& locked,
                             const LockKeys& keys, std::uint64_t probe_seed = 1,
                             std::size_t probes = 2);

}  // namespace coreguard
