#include "coreguard/runtime.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "coreguard/error.hpp"
#include "coreguard/linalg.hpp"

namespace coreguard {

void TraceSet::check_consistent() const {
  if (pairs.empty()) return;
  const auto& [in0, out0] = pairs.front();
  for (const auto& [in, out] : pairs) {
    if (in.rows() != in0.rows() || in.cols() != in0.cols() || out.rows() != out0.rows() ||
        out.cols() != out0.cols()) {
      throw SizeError("trace set: inconsistent pair shapes");
    }
  }
}

AuthBoundary public_prefix(const LockedModel& locked, std::span<const Token> tokens) {
  const ModelConfig& cfg = locked.config();
  AuthBoundary b;
  b.x = embed(locked.embedding(), cfg, tokens);
  for (std::size_t i = 0; i < locked.front_layers().size(); ++i) {
    b.x = layer_forward(locked.front_layers()[i], b.x, cfg, i);
  }
  const LayerWeights& auth = locked.auth_layer();
  b.y = add_norm(attention_output(auth, b.x, cfg), b.x, auth.gamma1, auth.beta1);
  b.m = ffn_hidden(auth, b.y);
  return b;
}

Matrix locked_suffix(const LockedModel& locked, const Matrix& z_pi) {
  const ModelConfig& cfg = locked.config();
  Matrix x = z_pi;
  for (std::size_t r = 0; r < locked.rear_layers().size(); ++r) {
    x = layer_forward(locked.rear_layers()[r], x, cfg, locked.auth_position() + r);
  }
  return matmul(x, locked.output_head());
}

AuthorizedResult run_authorized(const LockedModel& locked, Enclave& enclave,
                                std::span<const Token> tokens,
                                const BoundaryObserver& observer) {
  const ModelConfig& cfg = locked.config();
  if (enclave.d_model() != cfg.d_model || enclave.d_ffn() != cfg.d_ffn ||
      enclave.seq_len() != cfg.seq_len) {
    throw SizeError("run_authorized: enclave was provisioned for a different shape");
  }
  if (enclave.pads_available() == 0) {
    throw ProtocolError("run_authorized: enclave has no precomputed pad");
  }
  const BoundaryLedger before = enclave.ledger();
  const AuthBoundary b = public_prefix(locked, tokens);
  const LayerWeights& auth = locked.auth_layer();

  // Between encrypt and decrypt the masked feature only goes through W'_n.
  const MaskedFeature m_masked = enclave.encrypt_step(b.m);
  const MaskedFeature n_masked = m_masked.affine(auth.wn, auth.bn);
  const Matrix z_pi = enclave.decrypt_authorize(n_masked, b.y);

  if (observer) observer({b.m, m_masked.value(), n_masked.value(), b.y, z_pi});
  return {locked_suffix(locked, z_pi), enclave.ledger().since(before)};
}

Matrix run_unauthorized(const LockedModel& locked, std::span<const Token> tokens) {
  const AuthBoundary b = public_prefix(locked, tokens);
  const LayerWeights& auth = locked.auth_layer();
  const Matrix n = affine(b.m, auth.wn, auth.bn);
  return locked_suffix(locked, add_norm(b.y, n, auth.gamma2, auth.beta2));
}

namespace {

TraceSet collect(const LockedModel& locked, Enclave& enclave,
                 std::span<const std::vector<Token>> sequences, const char* cut,
                 bool encrypt_cut) {
  TraceSet traces;
  traces.cut = cut;
  traces.pairs.reserve(sequences.size());
  for (const auto& tokens : sequences) {
    if (enclave.pads_available() == 0) enclave.precompute_pads(16);
    run_authorized(locked, enclave, tokens, [&](const BoundaryView& v) {
      if (encrypt_cut) {
        traces.pairs.emplace_back(v.m, v.m_masked);
      } else {
        traces.pairs.emplace_back(v.y, v.z_pi);
      }
    });
  }
  return traces;
}

}  // namespace

TraceSet collect_encrypt_traces(const LockedModel& locked, Enclave& enclave,
                                std::span<const std::vector<Token>> sequences) {
  return collect(locked, enclave, sequences, kEncryptCut, true);
}

TraceSet collect_authorization_traces(const LockedModel& locked, Enclave& enclave,
                                      std::span<const std::vector<Token>> sequences) {
  return collect(locked, enclave, sequences, kAuthorizationCut, false);
}

double argmax_agreement(const std::function<Matrix(std::span<const Token>)>& pipeline,
                        const Model& reference,
                        std::span<const std::vector<Token>> sequences) {
  std::size_t agree = 0;
  std::size_t total = 0;
  for (const auto& tokens : sequences) {
    const auto got = argmax_rows(pipeline(tokens));
    const auto want = argmax_rows(model_forward(reference, tokens));
    for (std::size_t i = 0; i < got.size(); ++i) agree += got[i] == want[i];
    total += got.size();
  }
  return total == 0 ? 0.0 : static_cast<double>(agree) / static_cast<double>(total);
}

// --- overhead models ------------------------------------------------------

namespace {

struct SchemeName {
  Scheme scheme;
  const char* name;
};

constexpr SchemeName kSchemeNames[] = {
    {Scheme::noshield, "noshield"}, {Scheme::blackbox, "blackbox"},
    {Scheme::coreguard, "coreguard"}, {Scheme::dte, "dte"},
    {Scheme::serdab, "serdab"},     {Scheme::darknetz, "darknetz"},
    {Scheme::soter, "soter"},       {Scheme::shadownet, "shadownet"},
    {Scheme::tlg, "tlg"},
};

// ShadowNet offloads every linear layer; a LLaMA-style block has seven
// (q, k, v, o, gate, up, down).
constexpr std::uint64_t kShadowNetLinearsPerBlock = 7;

}  // namespace

std::string SchemeDescriptor::name() const {
  for (const auto& s : kSchemeNames) {
    if (s.scheme == scheme) return s.name;
  }
  return "unknown";
}

SchemeDescriptor SchemeDescriptor::parse(std::string_view name) {
  for (const auto& s : kSchemeNames) {
    if (name == s.name) return SchemeDescriptor{s.scheme};
  }
  throw InputError("unknown scheme '" + std::string(name) + "'");
}

std::vector<Scheme> all_schemes() {
  std::vector<Scheme> out;
  for (const auto& s : kSchemeNames) out.push_back(s.scheme);
  return out;
}

std::vector<std::size_t> soter_layers(const ModelConfig& cfg, double fraction,
                                      std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw InputError("soter: fraction must be in (0, 1]");
  }
  const std::size_t L = cfg.num_layers;
  const auto k = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(fraction * static_cast<double>(L))), 1, L);
  const PermutationKey order = random_permutation(seed, L);
  std::vector<std::size_t> chosen(order.forward().begin(), order.forward().begin() + k);
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

OverheadReport estimate_overhead(const SchemeDescriptor& scheme, const ModelConfig& cfg) {
  cfg.validate();
  using u64 = std::uint64_t;
  const FlopCount flops = count_flops(cfg);
  const u64 l = cfg.seq_len;
  const u64 d = cfg.d_model;
  const u64 f = cfg.d_ffn;
  const u64 L = cfg.num_layers;
  const u64 feature_bytes = 4 * l * d;

  OverheadReport r;
  switch (scheme.scheme) {
    case Scheme::noshield:
      break;
    case Scheme::blackbox:
      r.tee_flops = flops.total;
      r.transfer_rounds = 2;
      r.transfer_bytes = 4 * l + 4 * l * cfg.vocab_size;  // token ids in, logits out
      break;
    case Scheme::coreguard:
      r.tee_flops = l * (2 * f + 2 * d);
      r.transfer_rounds = 5;
      r.transfer_bytes = 4 * l * (2 * f + 3 * d);
      break;
    case Scheme::tlg:
      r.tee_flops = (L - 1) * l * (2 * f + 2 * d);
      r.transfer_rounds = 5 * (L - 1);
      r.transfer_bytes = (L - 1) * 4 * l * (2 * f + 3 * d);
      break;
    case Scheme::dte: {
      cfg.validate_lockable();
      const u64 l0 = cfg.effective_auth_position();
      r.tee_flops = flops.layers(L - l0);
      r.transfer_rounds = 2;
      r.transfer_bytes = 2 * feature_bytes;
      break;
    }
    case Scheme::serdab:
      r.tee_flops = flops.layers(1);
      r.transfer_rounds = 2;
      r.transfer_bytes = 2 * feature_bytes;
      break;
    case Scheme::darknetz:
      r.tee_flops = flops.layers(1) + flops.head;
      r.transfer_rounds = 2;
      r.transfer_bytes = feature_bytes + 4 * l * cfg.vocab_size;
      break;
    case Scheme::soter: {
      const auto chosen = soter_layers(cfg, scheme.soter_fraction, scheme.seed);
      u64 segments = 0;
      for (std::size_t i = 0; i < chosen.size(); ++i) {
        if (i == 0 || chosen[i] != chosen[i - 1] + 1) ++segments;
      }
      r.tee_flops = flops.layers(chosen.size());
      r.transfer_rounds = 2 * segments;
      r.transfer_bytes = r.transfer_rounds * feature_bytes;
      break;
    }
    case Scheme::shadownet: {
      r.transfer_rounds = 2 * kShadowNetLinearsPerBlock * L;
      // Per block the inputs of q, k, v, o, gate, up (width d) and down
      // (width f) each cross twice.
      const u64 per_block_elems = 2 * l * (6 * d + f);
      r.transfer_bytes = 4 * per_block_elems * L;
      // The enclave runs the non-linear work and unmasks every crossing.
      r.tee_flops = L * (flops.attention + flops.elementwise + per_block_elems);
      break;
    }
  }
  r.tee_flops_fraction =
      static_cast<double>(r.tee_flops) / static_cast<double>(flops.total);
  return r;
}

std::vector<NamedConfig> reference_configs() {
  auto make = [](std::size_t L, std::size_t d, std::size_t h, std::size_t f,
                 std::size_t vocab, std::size_t kv) {
    ModelConfig c;
    c.num_layers = L;
    c.d_model = d;
    c.num_heads = h;
    c.d_ffn = f;
    c.seq_len = 128;
    c.vocab_size = vocab;
    c.causal = true;
    c.auth_position = L / 2;
    c.gated_ffn = true;
    c.kv_dim = kv;
    return c;
  };
  return {
      {"qwen2", make(24, 896, 14, 4864, 151936, 128)},
      {"gemma2", make(26, 2304, 8, 9216, 256000, 1024)},
      {"chatglm3", make(28, 4096, 32, 13696, 65024, 256)},
      {"llama3", make(32, 4096, 32, 14336, 128256, 1024)},
  };
}

namespace {

std::optional<BoundaryLedger> measure_coreguard(const ModelConfig& cfg,
                                                const BenchOptions& opts) {
  ModelConfig plain = cfg;
  plain.gated_ffn = false;
  plain.kv_dim = 0;
  if (total_parameter_count(plain) > opts.max_measured_parameters) return std::nullopt;
  plain.validate_lockable();
  const Model model = random_model(plain, opts.seed);
  const LockKeys keys = LockKeys::random(opts.seed + 1, plain.d_model, plain.d_ffn);
  const LockedModel locked = lock_model(model, keys, plain.effective_auth_position());
  Enclave enclave = Enclave::provision(locked, keys, opts.seed + 2);
  enclave.precompute_pads(1);
  const auto tokens = random_sequences(opts.seed + 3, 1, plain);
  return run_authorized(locked, enclave, tokens.front()).ledger;
}

RoundStats soter_round_stats(const ModelConfig& cfg, const SchemeDescriptor& base,
                             const BenchOptions& opts) {
  const std::size_t n = std::max<std::size_t>(opts.soter_seeds, 1);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    SchemeDescriptor d = base;
    d.seed = opts.seed + s;
    const double r = static_cast<double>(estimate_overhead(d, cfg).transfer_rounds);
    sum += r;
    sum_sq += r * r;
  }
  const double mean = sum / static_cast<double>(n);
  const double var = n > 1 ? (sum_sq - n * mean * mean) / static_cast<double>(n - 1) : 0.0;
  return {mean, std::sqrt(std::max(var, 0.0))};
}

}  // namespace

BenchReport bench_report(std::span<const NamedConfig> configs,
                         std::span<const SchemeDescriptor> schemes,
                         const BenchOptions& opts) {
  BenchReport report;
  report.seed = opts.seed;
  std::vector<std::optional<BoundaryLedger>> measured(configs.size());
  const bool wants_coreguard = std::any_of(schemes.begin(), schemes.end(), [](const auto& s) {
    return s.scheme == Scheme::coreguard;
  });
  if (opts.measure && wants_coreguard) {
    for (std::size_t i = 0; i < configs.size(); ++i) {
      measured[i] = measure_coreguard(configs[i].config, opts);
    }
  }
  for (std::size_t i = 0; i < configs.size(); ++i) {
    for (const auto& s : schemes) {
      SchemeDescriptor desc = s;
      if (desc.scheme == Scheme::soter) desc.seed = opts.seed;
      BenchRow row{configs[i].name, desc.name(), estimate_overhead(desc, configs[i].config),
                   std::nullopt, std::nullopt};
      if (desc.scheme == Scheme::coreguard) row.measured = measured[i];
      if (desc.scheme == Scheme::soter) {
        row.soter_rounds = soter_round_stats(configs[i].config, desc, opts);
      }
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

}  // namespace coreguard
