#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "coreguard/enclave.hpp"
#include "coreguard/locking.hpp"
#include "coreguard/traces.hpp"
#include "coreguard/transformer.hpp"

namespace coreguard {

// --- partitioned inference ------------------------------------------------

// Untrusted-side state at the authorization layer.
struct AuthBoundary {
  Matrix x;  // input of the authorization layer
  Matrix y;  // after its attention add & norm
  Matrix m;  // ReLU(y W_m + b_m)
};

// Everything the untrusted world computes before the enclave is involved.
AuthBoundary public_prefix(const LockedModel& locked, std::span<const Token> tokens);
// Rear (permuted) layers and locked head applied to an authorized feature z*pi.
Matrix locked_suffix(const LockedModel& locked, const Matrix& z_pi);

// Tensors visible at the boundary during one authorized run.
struct BoundaryView {
  const Matrix& m;
  const Matrix& m_masked;
  const Matrix& n_masked;
  const Matrix& y;
  const Matrix& z_pi;
};
using BoundaryObserver = std::function<void(const BoundaryView&)>;

struct AuthorizedResult {
  Matrix logits;
  BoundaryLedger ledger;  // crossings of this run only
};

// GPU/TEE split of the authorization layer: the untrusted side computes y and
// m, the enclave masks m, the untrusted side applies the permuted W'_n, the
// enclave unmasks, normalizes and permutes. Throws ProtocolError when the
// enclave has no pad left.
AuthorizedResult run_authorized(const LockedModel& locked, Enclave& enclave,
                                std::span<const Token> tokens,
                                const BoundaryObserver& observer = {});

// Plain forward through the public weights, no enclave involved.
Matrix run_unauthorized(const LockedModel& locked, std::span<const Token> tokens);

// Run the authorized pipeline over `sequences`, topping up pads as needed, and
// record what an observer of the boundary sees.
TraceSet collect_encrypt_traces(const LockedModel& locked, Enclave& enclave,
                                std::span<const std::vector<Token>> sequences);
TraceSet collect_authorization_traces(const LockedModel& locked, Enclave& enclave,
                                      std::span<const std::vector<Token>> sequences);

// Fraction of (sequence, position) pairs whose argmax token agrees.
double argmax_agreement(const std::function<Matrix(std::span<const Token>)>& pipeline,
                        const Model& reference,
                        std::span<const std::vector<Token>> sequences);

// --- overhead models ------------------------------------------------------

enum class Scheme { noshield, blackbox, coreguard, dte, serdab, darknetz, soter, shadownet, tlg };

struct SchemeDescriptor {
  Scheme scheme = Scheme::coreguard;
  double soter_fraction = 0.20;  // share of layers SOTER keeps in the enclave
  std::uint64_t seed = 0;        // SOTER layer choice

  std::string name() const;
  // Accepts the lowercase names above; throws InputError otherwise.
  static SchemeDescriptor parse(std::string_view name);
};

std::vector<Scheme> all_schemes();

struct OverheadReport {
  std::uint64_t tee_flops = 0;
  double tee_flops_fraction = 0.0;  // tee_flops / count_flops(cfg).total
  std::uint64_t transfer_bytes = 0;
  std::uint64_t transfer_rounds = 0;
};

// Per-element payload is 4 bytes. Closed forms (l = seq_len, d = d_model,
// f = d_ffn, L = num_layers, L0 = authorization position):
//   coreguard  flops l(2f + 2d)              rounds 5        bytes 4l(2f + 3d)
//   tlg        (L-1) x coreguard             rounds 5(L-1)
//   dte        layers L0..L-1                rounds 2        bytes 8ld
//   serdab     first layer                   rounds 2        bytes 8ld
//   darknetz   last layer + head             rounds 2        bytes 4ld + 4l*vocab
//   soter      seeded 20% of layers          rounds 2 x contiguous segments
//   shadownet  non-linear work + re-masking  rounds 2 x 7L
//   blackbox   whole model                   rounds 2
//   noshield   nothing
OverheadReport estimate_overhead(const SchemeDescriptor& scheme, const ModelConfig& cfg);

// Layers SOTER places in the enclave for `seed`, sorted ascending.
std::vector<std::size_t> soter_layers(const ModelConfig& cfg, double fraction,
                                      std::uint64_t seed);

struct NamedConfig {
  std::string name;
  ModelConfig config;
};

// Architecture shapes of the four evaluated LLMs (l = 128).
std::vector<NamedConfig> reference_configs();

struct RoundStats {
  double mean = 0.0;
  double stddev = 0.0;
};

struct BenchRow {
  std::string model;
  std::string scheme;
  OverheadReport estimate;
  std::optional<BoundaryLedger> measured;   // coreguard on small configs
  std::optional<RoundStats> soter_rounds;   // over `soter_seeds` seeds
};

struct BenchOptions {
  std::uint64_t seed = 0;
  bool measure = true;
  // Configs with more parameters than this are not instantiated.
  std::size_t max_measured_parameters = 4'000'000;
  std::size_t soter_seeds = 100;
};

struct BenchReport {
  std::uint64_t seed = 0;
  std::vector<BenchRow> rows;
};

BenchReport bench_report(std::span<const NamedConfig> configs,
                         std::span<const SchemeDescriptor> schemes,
                         const BenchOptions& opts = {});

}  // namespace coreguard
