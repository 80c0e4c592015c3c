#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "coreguard/locking.hpp"
#include "coreguard/traces.hpp"
#include "coreguard/transformer.hpp"

namespace coreguard {

struct AttackReport {
  std::optional<PermutationKey> recovered_key;
  double key_accuracy = 0.0;          // fraction of key indices recovered
  double downstream_agreement = 0.0;  // argmax agreement vs. the original model
  double fit_residual = 0.0;          // relative Frobenius error of a fitted map
  double chance = 0.0;                // chance level of the headline metric
  std::size_t candidates_tried = 0;
  std::size_t perfect_candidates = 0;  // candidates with agreement == 1
};

// Fraction of indices j with recovered.forward[j] == truth.forward[j].
double key_accuracy(const PermutationKey& recovered, const PermutationKey& truth);

// Recovers pi_enc from encrypt-boundary traces (m -> m'). Without the pad the
// columns of m' are exact copies of columns of m and are matched by value; with
// it, columns are matched greedily by maximal sample correlation. `truth` only
// scores the result. Throws InputError for correlation mode with < 2 traces.
AttackReport differencing_attack(const TraceSet& traces, bool otp_enabled,
                                 const PermutationKey& truth);

inline constexpr double kSimulationRidge = 1e-6;

// Fits the least-squares affine map y -> z*pi over authorization-boundary
// traces (ridge kSimulationRidge), splices it in place of the enclave and
// measures argmax agreement of the spliced pipeline with `oracle`.
// Requires at least 2*d_model trace rows.
AttackReport simulate_authorization_unit(const TraceSet& traces, const LockedModel& locked,
                                         const Model& oracle,
                                         std::span<const std::vector<Token>> eval);

// Tries `budget` candidate keys for pi (all of them when budget >= d_model!),
// feeding the original boundary feature z (taken from `oracle`, i.e. assuming
// the pad and pi_enc are already broken) through the locked rear layers.
// Throws InputError for budget == 0.
AttackReport permutation_guess_attack(const LockedModel& locked, std::size_t budget,
                                      const Model& oracle,
                                      std::span<const std::vector<Token>> eval,
                                      std::uint64_t seed);

// Positive control for the simulator: a copy of `m` whose authorization unit
// at `auth_position` is affine in y. Layer auth_position-1 gets gamma_1 = 1,
// W_n = 0 and b_n = -beta_1, so y + n is the unit-variance normalized
// residual and the second add-norm reduces to a fixed scale and shift.
Model affine_authorization_ablation(const Model& m, std::size_t auth_position);

struct SweepOptions {
  std::uint64_t seed = 0;
  std::size_t trace_sequences = 64;
  std::size_t eval_sequences = 100;
};

struct SweepRow {
  std::size_t auth_position = 0;
  double locked_fraction = 0.0;
  double simulation_agreement = 0.0;
  double simulation_residual = 0.0;
  double unauthorized_agreement = 0.0;
};

// Locks `model` at every position in `positions` and reports the security
// proxies for each.
std::vector<SweepRow> sweep_auth_position(const Model& model, const LockKeys& keys,
                                          std::span<const std::size_t> positions,
                                          const SweepOptions& opts = {});

}  // namespace coreguard
