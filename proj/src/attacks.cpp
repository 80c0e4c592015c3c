#include "coreguard/attacks.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "coreguard/enclave.hpp"
#include "coreguard/error.hpp"
#include "coreguard/linalg.hpp"
#include "coreguard/runtime.hpp"

namespace coreguard {

double key_accuracy(const PermutationKey& recovered, const PermutationKey& truth) {
  if (recovered.size() != truth.size()) throw SizeError("key_accuracy: size mismatch");
  std::size_t hit = 0;
  for (std::size_t j = 0; j < truth.size(); ++j) {
    hit += recovered.forward()[j] == truth.forward()[j];
  }
  return truth.size() == 0 ? 0.0
                           : static_cast<double>(hit) / static_cast<double>(truth.size());
}

namespace {

// Column-major sample matrix: column c holds every row of every trace.
Eigen::MatrixXd stack_samples(const TraceSet& traces, bool output_side) {
  const Matrix& first = output_side ? traces.pairs.front().second : traces.pairs.front().first;
  const std::size_t rows = first.rows() * traces.size();
  Eigen::MatrixXd out(rows, first.cols());
  std::size_t r = 0;
  for (const auto& [in, outm] : traces.pairs) {
    const Matrix& m = output_side ? outm : in;
    for (std::size_t i = 0; i < m.rows(); ++i, ++r) {
      for (std::size_t c = 0; c < m.cols(); ++c) out(r, c) = m(i, c);
    }
  }
  return out;
}

PermutationKey match_exact(const Eigen::MatrixXd& in, const Eigen::MatrixXd& out) {
  const auto n = static_cast<std::size_t>(in.cols());
  std::multimap<std::vector<double>, std::uint32_t> by_value;
  for (std::size_t c = 0; c < n; ++c) {
    const Eigen::VectorXd col = out.col(static_cast<Eigen::Index>(c));
    by_value.emplace(std::vector<double>(col.data(), col.data() + col.size()),
                     static_cast<std::uint32_t>(c));
  }
  constexpr auto kUnset = static_cast<std::uint32_t>(-1);
  std::vector<std::uint32_t> forward(n, kUnset);
  std::vector<bool> used(n, false);
  for (std::size_t j = 0; j < n; ++j) {
    const Eigen::VectorXd col = in.col(static_cast<Eigen::Index>(j));
    auto [lo, hi] = by_value.equal_range(std::vector<double>(col.data(), col.data() + col.size()));
    for (auto it = lo; it != hi; ++it) {
      if (!used[it->second]) {
        forward[j] = it->second;
        used[it->second] = true;
        break;
      }
    }
  }
  // Columns without an exact partner take the leftovers in order.
  std::uint32_t next = 0;
  for (auto& f : forward) {
    if (f != kUnset) continue;
    while (used[next]) ++next;
    f = next;
    used[next] = true;
  }
  return PermutationKey::from_forward(std::move(forward));
}

PermutationKey match_correlation(const Eigen::MatrixXd& in, const Eigen::MatrixXd& out) {
  const auto n = static_cast<std::size_t>(in.cols());
  auto standardize = [](Eigen::MatrixXd m) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m.col(c).array() -= m.col(c).mean();
      const double norm = m.col(c).norm();
      if (norm > 0.0) m.col(c) /= norm;
    }
    return m;
  };
  const Eigen::MatrixXd corr = standardize(in).transpose() * standardize(out);

  struct Candidate {
    double score;
    std::uint32_t src;
    std::uint32_t dst;
  };
  std::vector<Candidate> all;
  all.reserve(n * n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t c = 0; c < n; ++c) {
      all.push_back({corr(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c)),
                     static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(c)});
    }
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
  std::vector<std::uint32_t> forward(n);
  std::vector<bool> src_done(n, false);
  std::vector<bool> dst_done(n, false);
  std::size_t assigned = 0;
  for (const auto& cand : all) {
    if (src_done[cand.src] || dst_done[cand.dst]) continue;
    forward[cand.src] = cand.dst;
    src_done[cand.src] = dst_done[cand.dst] = true;
    if (++assigned == n) break;
  }
  return PermutationKey::from_forward(std::move(forward));
}

}  // namespace

AttackReport differencing_attack(const TraceSet& traces, bool otp_enabled,
                                 const PermutationKey& truth) {
  if (traces.size() == 0) throw InputError("differencing_attack: no traces");
  if (otp_enabled && traces.size() < 2) {
    throw InputError("differencing_attack: correlation matching needs >= 2 traces, got " +
                     std::to_string(traces.size()));
  }
  traces.check_consistent();
  const auto& [m0, mp0] = traces.pairs.front();
  if (m0.cols() != mp0.cols() || m0.cols() != truth.size()) {
    throw SizeError("differencing_attack: trace width does not match key size");
  }
  const Eigen::MatrixXd in = stack_samples(traces, false);
  const Eigen::MatrixXd out = stack_samples(traces, true);

  AttackReport report;
  report.recovered_key = otp_enabled ? match_correlation(in, out) : match_exact(in, out);
  report.key_accuracy = key_accuracy(*report.recovered_key, truth);
  report.chance = 1.0 / static_cast<double>(truth.size());
  report.candidates_tried = 1;
  return report;
}

AttackReport simulate_authorization_unit(const TraceSet& traces, const LockedModel& locked,
                                         const Model& oracle,
                                         std::span<const std::vector<Token>> eval) {
  if (traces.size() == 0) throw InputError("simulate_authorization_unit: no traces");
  traces.check_consistent();
  const std::size_t d = locked.config().d_model;
  const Eigen::MatrixXd y = stack_samples(traces, false);
  const Eigen::MatrixXd z = stack_samples(traces, true);
  if (static_cast<std::size_t>(y.cols()) != d || static_cast<std::size_t>(z.cols()) != d) {
    throw SizeError("simulate_authorization_unit: trace width != d_model");
  }
  if (static_cast<std::size_t>(y.rows()) < 2 * d) {
    throw InputError("simulate_authorization_unit: need >= " + std::to_string(2 * d) +
                     " trace rows, got " + std::to_string(y.rows()));
  }

  // Design matrix [y 1]; solve (X^T X + ridge I) B = X^T Z.
  Eigen::MatrixXd x(y.rows(), y.cols() + 1);
  x << y, Eigen::VectorXd::Ones(y.rows());
  Eigen::MatrixXd gram = x.transpose() * x;
  gram.diagonal().array() += kSimulationRidge;
  const Eigen::MatrixXd coef = gram.ldlt().solve(x.transpose() * z);
  const double residual = (x * coef - z).norm() / std::max(z.norm(), 1e-30);

  Matrix a(d, d);
  Vector b(d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      a(i, j) = static_cast<float>(coef(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    b[j] = static_cast<float>(coef(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(j)));
  }

  auto spliced = [&](std::span<const Token> tokens) {
    const AuthBoundary boundary = public_prefix(locked, tokens);
    return locked_suffix(locked, affine(boundary.y, a, b));
  };
  AttackReport report;
  report.fit_residual = residual;
  report.downstream_agreement = argmax_agreement(spliced, oracle, eval);
  report.chance = 1.0 / static_cast<double>(locked.config().vocab_size);
  report.candidates_tried = 1;
  return report;
}

namespace {

std::uint64_t factorial_capped(std::size_t n, std::uint64_t cap) {
  std::uint64_t f = 1;
  for (std::size_t i = 2; i <= n; ++i) {
    if (f > cap / i) return cap + 1;
    f *= i;
  }
  return f;
}

}  // namespace

AttackReport permutation_guess_attack(const LockedModel& locked, std::size_t budget,
                                      const Model& oracle,
                                      std::span<const std::vector<Token>> eval,
                                      std::uint64_t seed) {
  if (budget == 0) throw InputError("permutation_guess_attack: budget must be >= 1");
  if (eval.empty()) throw InputError("permutation_guess_attack: no evaluation sequences");
  const ModelConfig& cfg = locked.config();
  const std::size_t d = cfg.d_model;

  std::vector<Matrix> boundary;
  std::vector<std::vector<std::size_t>> want;
  std::size_t positions = 0;
  for (const auto& tokens : eval) {
    boundary.push_back(forward_prefix(oracle, tokens, locked.auth_position()));
    want.push_back(argmax_rows(model_forward(oracle, tokens)));
    positions += want.back().size();
  }

  AttackReport report;
  report.chance = 1.0 / static_cast<double>(cfg.vocab_size);
  report.downstream_agreement = -1.0;
  auto score = [&](const PermutationKey& key) {
    std::size_t agree = 0;
    for (std::size_t s = 0; s < boundary.size(); ++s) {
      const auto got = argmax_rows(locked_suffix(locked, permute_cols(boundary[s], key)));
      for (std::size_t i = 0; i < got.size(); ++i) agree += got[i] == want[s][i];
    }
    const double agreement = static_cast<double>(agree) / static_cast<double>(positions);
    ++report.candidates_tried;
    if (agree == positions) ++report.perfect_candidates;
    if (agreement > report.downstream_agreement) {
      report.downstream_agreement = agreement;
      report.recovered_key = key;
    }
  };

  const std::uint64_t keyspace = factorial_capped(d, budget);
  if (keyspace <= budget) {
    std::vector<std::uint32_t> f(d);
    std::iota(f.begin(), f.end(), 0u);
    do {
      score(PermutationKey::from_forward(f));
    } while (std::next_permutation(f.begin(), f.end()));
  } else {
    Rng rng(seed);
    for (std::size_t i = 0; i < budget; ++i) score(random_permutation(rng, d));
  }
  return report;
}

Model affine_authorization_ablation(const Model& m, std::size_t auth_position) {
  const ModelConfig& cfg = m.config();
  if (auth_position < 1 || auth_position > cfg.num_layers) {
    throw InputError("affine ablation: position " + std::to_string(auth_position) +
                     " outside [1, " + std::to_string(cfg.num_layers) + "]");
  }
  std::vector<LayerWeights> layers = m.layers();
  LayerWeights& w = layers[auth_position - 1];
  std::fill(w.gamma1.begin(), w.gamma1.end(), 1.0f);
  w.wn = Matrix(cfg.d_ffn, cfg.d_model, 0.0f);
  for (std::size_t j = 0; j < cfg.d_model; ++j) w.bn[j] = -w.beta1[j];
  return Model(cfg, m.embedding(), std::move(layers), m.output_head());
}

std::vector<SweepRow> sweep_auth_position(const Model& model, const LockKeys& keys,
                                          std::span<const std::size_t> positions,
                                          const SweepOptions& opts) {
  const ModelConfig& cfg = model.config();
  for (std::size_t p : positions) {
    if (p < 1 || p >= cfg.num_layers) {
      throw InputError("sweep: position " + std::to_string(p) + " outside [1, " +
                       std::to_string(cfg.num_layers - 1) + "]");
    }
  }
  const auto trace_seqs = random_sequences(opts.seed + 11, opts.trace_sequences, cfg);
  const auto eval_seqs = random_sequences(opts.seed + 12, opts.eval_sequences, cfg);

  std::vector<SweepRow> rows(positions.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(positions.size()); ++i) {
    const std::size_t l0 = positions[static_cast<std::size_t>(i)];
    const LockedModel locked = lock_model(model, keys, l0);
    Enclave enclave = Enclave::provision(locked, keys, opts.seed + 13 + l0);
    const TraceSet traces = collect_authorization_traces(locked, enclave, trace_seqs);
    const AttackReport sim = simulate_authorization_unit(traces, locked, model, eval_seqs);
    SweepRow& row = rows[static_cast<std::size_t>(i)];
    row.auth_position = l0;
    row.locked_fraction = locked_fraction(cfg, l0);
    row.simulation_agreement = sim.downstream_agreement;
    row.simulation_residual = sim.fit_residual;
    row.unauthorized_agreement = argmax_agreement(
        [&](std::span<const Token> t) { return run_unauthorized(locked, t); }, model,
        eval_seqs);
  }
  return rows;
}

}  // namespace coreguard
