#include <gtest/gtest.h>

#include <cmath>

#include "coreguard/error.hpp"
#include "coreguard/linalg.hpp"
#include "coreguard/runtime.hpp"
#include "helpers.hpp"

using namespace coreguard;
using coreguard::testing::tiny_config;

namespace {

struct Pipeline {
  ModelConfig cfg;
  Model model;
  LockKeys keys;
  LockedModel locked;
  Enclave enclave;

  explicit Pipeline(ModelConfig c, std::uint64_t seed = 1, std::size_t l0 = 2)
      : cfg(c),
        model(random_model(c, seed)),
        keys(LockKeys::random(seed + 1, c.d_model, c.d_ffn)),
        locked(lock_model(model, keys, l0)),
        enclave(Enclave::provision(locked, keys, seed + 2)) {}
};

NamedConfig named(const std::string& name) {
  for (auto& nc : reference_configs()) {
    if (nc.name == name) return nc;
  }
  throw std::runtime_error("no config " + name);
}

OverheadReport est(Scheme s, const ModelConfig& c) { return estimate_overhead({s}, c); }

}  // namespace

TEST(RunAuthorized, MatchesOriginalModel) {
  Pipeline p(tiny_config(4, 16, 2, 16, 8, 32));
  const auto seqs = random_sequences(9, 5, p.cfg);
  p.enclave.precompute_pads(seqs.size());
  for (const auto& s : seqs) {
    const AuthorizedResult r = run_authorized(p.locked, p.enclave, s);
    EXPECT_LE(max_relative_error(r.logits, model_forward(p.model, s)), 1e-4);
    EXPECT_EQ(r.ledger.rounds, 5u);
    EXPECT_EQ(r.ledger.bytes, 4u * 8 * (2 * 16 + 3 * 16));
  }
  EXPECT_EQ(p.enclave.ledger().rounds, 25u);
}

TEST(RunAuthorized, EveryAuthorizationPosition) {
  for (std::size_t l0 = 1; l0 < 4; ++l0) {
    Pipeline p(tiny_config(4, 8, 2, 16, 4, 16), 3, l0);
    const auto s = random_sequences(1, 1, p.cfg)[0];
    p.enclave.precompute_pads(1);
    EXPECT_LE(max_relative_error(run_authorized(p.locked, p.enclave, s).logits,
                                 model_forward(p.model, s)),
              1e-4);
  }
}

TEST(RunAuthorized, NeedsPadAndMatchingShape) {
  Pipeline p(tiny_config());
  const auto s = random_sequences(1, 1, p.cfg)[0];
  EXPECT_THROW(run_authorized(p.locked, p.enclave, s), ProtocolError);
  Pipeline other(tiny_config(4, 16, 2, 32));
  other.enclave.precompute_pads(1);
  EXPECT_THROW(run_authorized(p.locked, other.enclave, s), SizeError);
}

TEST(RunAuthorized, WrongKeyIsNotDetected) {
  Pipeline p(tiny_config(4, 16, 2, 16, 8, 64));
  Enclave wrong = Enclave::provision(p.locked, LockKeys::random(77, 16, 16), 3);
  const auto seqs = random_sequences(2, 20, p.cfg);
  wrong.precompute_pads(seqs.size());
  const double agree = argmax_agreement(
      [&](std::span<const Token> t) { return run_authorized(p.locked, wrong, t).logits; },
      p.model, seqs);
  EXPECT_LT(agree, 0.5);
}

TEST(RunAuthorized, ObserverSeesOnlyBoundaryTensors) {
  Pipeline p(tiny_config());
  const auto s = random_sequences(1, 1, p.cfg)[0];
  p.enclave.precompute_pads(1);
  bool seen = false;
  run_authorized(p.locked, p.enclave, s, [&](const BoundaryView& v) {
    seen = true;
    EXPECT_EQ(v.m.cols(), 16u);
    EXPECT_FALSE(bitwise_equal(v.m_masked, permute_cols(v.m, p.keys.pi_enc)));
    const Matrix z = forward_prefix(p.model, s, 2);
    EXPECT_LE(max_relative_error(v.z_pi, permute_cols(z, p.keys.pi)), 1e-4);
  });
  EXPECT_TRUE(seen);
}

TEST(RunUnauthorized, ScramblesAndUsesNoEnclave) {
  Pipeline p(tiny_config(4, 16, 2, 32, 8, 64));
  const auto seqs = random_sequences(4, 100, p.cfg);
  const double agree = argmax_agreement(
      [&](std::span<const Token> t) { return run_unauthorized(p.locked, t); }, p.model, seqs);
  EXPECT_LE(agree, 1.0 / 64 + 0.05);
  EXPECT_EQ(p.enclave.ledger().rounds, 0u);
}

TEST(Traces, CollectionTopsUpPads) {
  Pipeline p(tiny_config());
  const auto seqs = random_sequences(5, 20, p.cfg);
  const TraceSet enc = collect_encrypt_traces(p.locked, p.enclave, seqs);
  EXPECT_EQ(enc.cut, kEncryptCut);
  EXPECT_EQ(enc.size(), 20u);
  const TraceSet auth = collect_authorization_traces(p.locked, p.enclave, seqs);
  EXPECT_EQ(auth.cut, kAuthorizationCut);
  EXPECT_EQ(auth.pairs[0].first.cols(), 16u);
  EXPECT_EQ(p.enclave.ledger().rounds, 5u * 40);
}

TEST(Schemes, NamesRoundTrip) {
  for (Scheme s : all_schemes()) {
    EXPECT_EQ(SchemeDescriptor::parse(SchemeDescriptor{s}.name()).scheme, s);
  }
  EXPECT_EQ(all_schemes().size(), 9u);
  EXPECT_THROW(SchemeDescriptor::parse("CoreGuard"), InputError);
}

TEST(Overhead, CoreGuardTransferAndFlops) {
  const auto llama = named("llama3").config;
  const auto r = est(Scheme::coreguard, llama);
  EXPECT_EQ(r.transfer_rounds, 5u);
  EXPECT_EQ(r.transfer_bytes, 20971520u);
  EXPECT_EQ(r.tee_flops, 128u * (2 * 14336 + 2 * 4096));
  EXPECT_NEAR(r.tee_flops_fraction * 100, 2.46e-4, 0.1 * 2.46e-4);
  EXPECT_EQ(est(Scheme::coreguard, named("qwen2").config).tee_flops, 1474560u);
  EXPECT_EQ(est(Scheme::coreguard, named("gemma2").config).tee_flops, 2949120u);
}

TEST(Overhead, BaselineRounds) {
  const std::size_t want_tlg[] = {115, 125, 135, 155};
  const auto configs = reference_configs();
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const auto& c = configs[i].config;
    EXPECT_EQ(est(Scheme::tlg, c).transfer_rounds, want_tlg[i]);
    EXPECT_EQ(est(Scheme::shadownet, c).transfer_rounds, 14 * c.num_layers);
    EXPECT_EQ(est(Scheme::serdab, c).transfer_rounds, 2u);
    EXPECT_EQ(est(Scheme::darknetz, c).transfer_rounds, 2u);
    EXPECT_EQ(est(Scheme::dte, c).transfer_rounds, 2u);
    EXPECT_EQ(est(Scheme::blackbox, c).transfer_rounds, 2u);
    EXPECT_EQ(est(Scheme::noshield, c).transfer_rounds, 0u);
    EXPECT_EQ(est(Scheme::noshield, c).tee_flops, 0u);
    EXPECT_DOUBLE_EQ(est(Scheme::blackbox, c).tee_flops_fraction, 1.0);
  }
  EXPECT_EQ(est(Scheme::shadownet, named("llama3").config).transfer_rounds, 448u);
}

TEST(Overhead, LayerBasedSchemesScaleWithLayers) {
  const auto c = tiny_config(8, 16, 2, 32, 8, 64);
  const auto f = count_flops(c);
  EXPECT_EQ(est(Scheme::serdab, c).tee_flops, f.per_layer);
  EXPECT_EQ(est(Scheme::darknetz, c).tee_flops, f.per_layer + f.head);
  EXPECT_EQ(est(Scheme::dte, c).tee_flops, 4 * f.per_layer);
  EXPECT_EQ(est(Scheme::tlg, c).tee_flops, 7 * est(Scheme::coreguard, c).tee_flops);
  EXPECT_EQ(est(Scheme::serdab, c).transfer_bytes, 8u * 8 * 16);
}

TEST(Overhead, SoterSeededSegments) {
  const auto c = named("llama3").config;
  const auto chosen = soter_layers(c, 0.2, 5);
  EXPECT_EQ(chosen.size(), 6u);
  EXPECT_TRUE(std::is_sorted(chosen.begin(), chosen.end()));
  EXPECT_EQ(chosen, soter_layers(c, 0.2, 5));
  std::size_t segments = 0;
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    segments += i == 0 || chosen[i] != chosen[i - 1] + 1;
  }
  SchemeDescriptor d{Scheme::soter};
  d.seed = 5;
  EXPECT_EQ(estimate_overhead(d, c).transfer_rounds, 2 * segments);
  EXPECT_THROW(soter_layers(c, 0.0, 1), InputError);
}

TEST(Bench, MeasuredLedgerMatchesClosedForm) {
  const std::vector<NamedConfig> configs = {{"tiny", tiny_config(4, 16, 2, 32, 8, 64)}};
  const std::vector<SchemeDescriptor> schemes = {{Scheme::coreguard}, {Scheme::soter}};
  BenchOptions opts;
  opts.soter_seeds = 10;
  const auto report = bench_report(configs, schemes, opts);
  ASSERT_EQ(report.rows.size(), 2u);
  ASSERT_TRUE(report.rows[0].measured.has_value());
  EXPECT_EQ(report.rows[0].measured->rounds, report.rows[0].estimate.transfer_rounds);
  EXPECT_EQ(report.rows[0].measured->bytes, report.rows[0].estimate.transfer_bytes);
  ASSERT_TRUE(report.rows[1].soter_rounds.has_value());
  EXPECT_GE(report.rows[1].soter_rounds->mean, 2.0);
}

TEST(Bench, LargeConfigsAreNotInstantiated) {
  const auto configs = reference_configs();
  const std::vector<SchemeDescriptor> schemes = {{Scheme::coreguard}};
  const auto report = bench_report(configs, schemes);
  for (const auto& row : report.rows) EXPECT_FALSE(row.measured.has_value());
}
